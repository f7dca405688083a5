//! Ready-made networks for examples, tests, and benchmarks, plus a seeded
//! random-network generator that always satisfies the nominal-solvency
//! requirement.

use ndarray::{array, Array1, Array2};
use rand::Rng;

use crate::model::FinancialNetwork;

/// Two banks, one asset: bank `a` owes 1 to sink `b`, holds one share worth
/// 1, and nets +1 in external cash. Nominal net worth is (1, 1).
pub fn toy() -> FinancialNetwork {
    FinancialNetwork::from_parts(
        vec!["a".into(), "b".into()],
        array![[0.0, 1.0], [0.0, 0.0]],
        array![1.0, 0.0],
        array![0.0, 0.0],
        array![[1.0], [0.0]],
        array![1.0],
    )
    .expect("valid fixture")
}

/// Like `toy` but with two identical unit exposures for bank `a`, so the
/// worst-case asset index is never unique under the l1 ball.
pub fn toy2() -> FinancialNetwork {
    FinancialNetwork::from_parts(
        vec!["a".into(), "b".into()],
        array![[0.0, 1.0], [0.0, 0.0]],
        array![0.5, 0.0],
        array![0.0, 0.0],
        array![[1.0, 1.0], [0.0, 0.0]],
        array![0.5, 0.5],
    )
    .expect("valid fixture")
}

/// Three banks in a cycle, each owing 1 to the next; no external flows or
/// asset exposure. With zero inflow the clearing vectors form the full
/// lattice between 0 and (1,1,1).
pub fn ring3() -> FinancialNetwork {
    FinancialNetwork::from_parts(
        vec!["a".into(), "b".into(), "c".into()],
        array![
            [0.0, 1.0, 0.0],
            [0.0, 0.0, 1.0],
            [1.0, 0.0, 0.0]
        ],
        Array1::zeros(3),
        Array1::zeros(3),
        Array2::zeros((3, 1)),
        array![1.0],
    )
    .expect("valid fixture")
}

/// Five banks with a dense liability mesh and three assets at distinct
/// prices. Hand-computable reference values: debts (15,12,10,8,6), nominal
/// inflow (13,10.5,8,10,7.5), net worth (7,10.5,11,12,8.5).
pub fn mesh5() -> FinancialNetwork {
    FinancialNetwork::from_parts(
        vec!["a".into(), "b".into(), "c".into(), "d".into(), "e".into()],
        array![
            [0.0, 10.0, 5.0, 0.0, 0.0],
            [0.0, 0.0, 8.0, 4.0, 0.0],
            [2.0, 0.0, 0.0, 6.0, 2.0],
            [3.0, 0.0, 0.0, 0.0, 5.0],
            [4.0, 2.0, 0.0, 0.0, 0.0]
        ],
        array![20.0, 12.0, 9.0, 10.0, 8.0],
        array![18.0, 9.0, 6.0, 7.0, 5.0],
        array![
            [4.0, 2.0, 0.0],
            [1.0, 3.0, 1.0],
            [0.0, 2.0, 2.0],
            [3.0, 0.0, 1.0],
            [1.0, 1.0, 1.0]
        ],
        array![2.0, 1.5, 1.0],
    )
    .expect("valid fixture")
}

/// Eight banks, four assets, desk-scale magnitudes: large share positions
/// next to moderate interbank liabilities. Net worth is strongly positive
/// everywhere, so both margins are comfortably inside the price scale.
pub fn demo8() -> FinancialNetwork {
    let liabilities = array![
        [0.0, 30.0, 0.0, 20.0, 0.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, 25.0, 0.0, 10.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, 15.0, 0.0, 0.0, 0.0, 0.0],
        [25.0, 0.0, 0.0, 0.0, 40.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, 0.0, 0.0, 20.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 35.0, 15.0],
        [10.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 20.0],
        [30.0, 0.0, 0.0, 0.0, 0.0, 25.0, 0.0, 0.0]
    ];
    let shares = array![
        [96.0, 99.0, 29.0, 57.0],
        [53.0, 75.0, 13.0, 15.0],
        [0.0, 28.0, 0.0, 0.0],
        [32.0, 79.0, 0.0, 0.0],
        [0.0, 0.0, 21.0, 0.0],
        [0.0, 45.0, 27.0, 71.0],
        [0.0, 0.0, 49.0, 0.0],
        [75.0, 79.0, 5.0, 41.0]
    ];
    FinancialNetwork::from_parts(
        (1..=8).map(|i| format!("bank{i}")).collect(),
        liabilities,
        array![158.0, 38.0, 15.0, 285.0, 25.0, 180.0, 60.0, 55.0],
        array![180.0, 100.0, 0.0, 145.0, 0.0, 50.0, 20.0, 60.0],
        shares,
        Array1::ones(4),
    )
    .expect("valid fixture")
}

/// Random network with long-only share positions and nominal net worth at
/// least 0.05 everywhere (external inflows are topped up where needed, which
/// shifts net worth one-for-one).
pub fn random_network<R: Rng + ?Sized>(rng: &mut R, n: usize, m: usize) -> FinancialNetwork {
    assert!(n >= 1 && m >= 1);
    let mut liabilities = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            if i != j && rng.gen_bool(0.35) {
                liabilities[(i, j)] = rng.gen_range(0.2..2.0);
            }
        }
    }
    let mut shares = Array2::<f64>::zeros((n, m));
    for i in 0..n {
        for j in 0..m {
            if rng.gen_bool(0.5) {
                shares[(i, j)] = rng.gen_range(0.1..1.5);
            }
        }
    }
    let prices = Array1::from_iter((0..m).map(|_| rng.gen_range(0.5..2.0)));
    let outflows = Array1::from_iter((0..n).map(|_| rng.gen_range(0.0..0.5)));
    let mut inflows = Array1::from_iter((0..n).map(|_| rng.gen_range(0.1..1.0)));

    let draft = FinancialNetwork::from_parts(
        (0..n).map(|i| format!("n{i}")).collect(),
        liabilities.clone(),
        inflows.clone(),
        outflows.clone(),
        shares.clone(),
        prices.clone(),
    )
    .expect("draft network is structurally valid");
    let worth = draft.check_nominal_solvency().net_worth;
    for (i, w) in worth.iter().enumerate() {
        if *w < 0.05 {
            inflows[i] += 0.05 - w;
        }
    }
    FinancialNetwork::from_parts(
        (0..n).map(|i| format!("n{i}")).collect(),
        liabilities,
        inflows,
        outflows,
        shares,
        prices,
    )
    .expect("adjusted network is structurally valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn toy_reference_values() {
        let net = toy();
        assert_eq!(net.debts().to_vec(), vec![1.0, 0.0]);
        assert_eq!(net.nominal_inflow().to_vec(), vec![2.0, 0.0]);
        let solvency = net.check_nominal_solvency();
        assert!(solvency.solvent);
        assert_eq!(solvency.net_worth, vec![1.0, 1.0]);
    }

    #[test]
    fn toy2_reference_values() {
        let net = toy2();
        assert_eq!(net.nominal_inflow().to_vec(), vec![1.5, 0.0]);
        assert_eq!(net.check_nominal_solvency().net_worth, vec![0.5, 1.0]);
    }

    #[test]
    fn ring3_sits_on_the_solvency_boundary() {
        let net = ring3();
        let solvency = net.check_nominal_solvency();
        assert!(!solvency.solvent);
        assert_eq!(solvency.net_worth, vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn mesh5_reference_values() {
        let net = mesh5();
        assert_eq!(net.debts().to_vec(), vec![15.0, 12.0, 10.0, 8.0, 6.0]);
        assert_eq!(net.nominal_inflow().to_vec(), vec![13.0, 10.5, 8.0, 10.0, 7.5]);
        assert_eq!(
            net.check_nominal_solvency().net_worth,
            vec![7.0, 10.5, 11.0, 12.0, 8.5]
        );
    }

    #[test]
    fn demo8_reference_values() {
        let net = demo8();
        let flow = net.net_external_flow();
        assert_eq!(flow[0], -22.0);
        assert_eq!(flow.to_vec(), vec![-22.0, -62.0, 15.0, 140.0, 25.0, 130.0, 40.0, -5.0]);
        let solvency = net.check_nominal_solvency();
        assert!(solvency.solvent);
        assert_eq!(
            solvency.net_worth,
            vec![274.0, 89.0, 53.0, 221.0, 76.0, 268.0, 94.0, 175.0]
        );
    }

    #[test]
    fn random_networks_are_nominally_solvent_with_long_positions() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let n = rng.gen_range(1..=10);
            let m = rng.gen_range(1..=5);
            let net = random_network(&mut rng, n, m);
            assert_eq!(net.n(), n);
            assert_eq!(net.m(), m);
            assert!(net.check_nominal_solvency().solvent);
            assert!(net
                .check_nominal_solvency()
                .net_worth
                .iter()
                .all(|w| *w >= 0.05 - 1e-12));
            assert!(net.asset_shares().iter().all(|s| *s >= 0.0));
        }
    }
}
