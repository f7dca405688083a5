//! Property-based checks of the structural invariants: pro-rata shares,
//! affinity of the perturbed inflow, lattice ordering of clearing vectors,
//! monotonicity/concavity of payments in the inflow, convexity of the loss,
//! and margin witness tightness on randomly generated networks.

use ndarray::Array1;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use clearnet::clearing::{
    default_max_iter, fixed_point_residual, max_clearing_iterative, max_clearing_lp,
    min_clearing_iterative,
};
use clearnet::experiments::random_shock;
use clearnet::fixtures::random_network;
use clearnet::resilience::{default_margin, dual_norm_rows, insolvency_margin};
use clearnet::{FinancialNetwork, NormKind};

fn net_from(seed: u64, n: usize, m: usize) -> FinancialNetwork {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_network(&mut rng, n, m)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn pro_rata_rows_are_distributions(seed in 0u64..1_000_000, n in 2usize..7, m in 1usize..5) {
        let net = net_from(seed, n, m);
        let a = net.pro_rata();
        for i in 0..net.n() {
            let row_sum: f64 = a.row(i).sum();
            prop_assert!((row_sum - 1.0).abs() <= 1e-12, "row {i} sums to {row_sum}");
            prop_assert!(a.row(i).iter().all(|v| *v >= 0.0));
        }
    }

    #[test]
    fn perturbed_inflow_is_affine_in_the_shock(
        seed in 0u64..1_000_000,
        n in 2usize..6,
        m in 1usize..5,
        alpha in 0.0f64..1.0,
    ) {
        let net = net_from(seed, n, m);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e3779b97f4a7c15);
        let d1: Vec<f64> = (0..m).map(|_| rand::Rng::gen_range(&mut rng, -1.0..1.0)).collect();
        let d2: Vec<f64> = (0..m).map(|_| rand::Rng::gen_range(&mut rng, -1.0..1.0)).collect();
        let mix: Vec<f64> = d1.iter().zip(&d2).map(|(a, b)| alpha * a + (1.0 - alpha) * b).collect();

        let c1 = net.perturbed_inflow(&d1).unwrap();
        let c2 = net.perturbed_inflow(&d2).unwrap();
        let cm = net.perturbed_inflow(&mix).unwrap();
        for i in 0..net.n() {
            let expect = alpha * c1[i] + (1.0 - alpha) * c2[i];
            prop_assert!((cm[i] - expect).abs() <= 1e-10);
        }
        let c0 = net.perturbed_inflow(&vec![0.0; m]).unwrap();
        prop_assert_eq!(c0, net.nominal_inflow().to_owned());
    }

    #[test]
    fn clearing_orders_and_satisfies_the_fixed_point(seed in 0u64..1_000_000, n in 2usize..7, m in 1usize..4) {
        let net = net_from(seed, n, m);
        let c = net.nominal_inflow().to_owned();
        let cap = default_max_iter(&net);
        let max_it = max_clearing_iterative(&net, c.view(), 1e-12, cap).unwrap();
        let min_it = min_clearing_iterative(&net, c.view(), 1e-12, cap).unwrap();
        let lp = max_clearing_lp(&net, c.view()).unwrap();

        for i in 0..net.n() {
            prop_assert!(min_it.payments[i] <= max_it.payments[i] + 1e-9);
            prop_assert!((lp.payments[i] - max_it.payments[i]).abs() <= 1e-6);
        }
        prop_assert!(fixed_point_residual(&net, c.view(), &max_it.payments) <= 1e-8);
        prop_assert!(fixed_point_residual(&net, c.view(), &min_it.payments) <= 1e-8);
    }

    #[test]
    fn payments_monotone_concave_and_loss_convex(
        seed in 0u64..1_000_000,
        n in 2usize..7,
        m in 1usize..4,
        scale_a in 0.05f64..0.6,
        extra in 0.05f64..0.4,
    ) {
        let net = net_from(seed, n, m);
        let ub = insolvency_margin(&net, NormKind::Linf).unwrap();
        prop_assume!(ub.is_finite() && ub > 1e-6);

        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(3) ^ 0xabcdef);
        let shock_a = random_shock(m, NormKind::Linf, scale_a * ub, &mut rng);
        let shock_b = random_shock(m, NormKind::Linf, extra * ub, &mut rng);
        // delta_b <= delta_a componentwise and both stay within the
        // insolvency margin, so both inflows admit clearing vectors.
        let delta_a = shock_a.delta.clone();
        let delta_b: Vec<f64> = delta_a
            .iter()
            .zip(&shock_b.delta)
            .map(|(a, b)| (a + b).max(-ub))
            .collect();

        let c_a = net.perturbed_inflow(&delta_a).unwrap();
        let c_b = net.perturbed_inflow(&delta_b).unwrap();
        let c_mid: Array1<f64> = (&c_a + &c_b) * 0.5;

        let p_a = max_clearing_lp(&net, c_a.view()).unwrap();
        let p_b = max_clearing_lp(&net, c_b.view()).unwrap();
        let p_mid = max_clearing_lp(&net, c_mid.view()).unwrap();

        for i in 0..net.n() {
            prop_assert!(
                p_b.payments[i] <= p_a.payments[i] + 1e-8,
                "payments must not rise when inflow falls"
            );
            let avg = 0.5 * (p_a.payments[i] + p_b.payments[i]);
            prop_assert!(p_mid.payments[i] >= avg - 1e-8, "payments concave in inflow");
        }
        let avg_loss = 0.5 * (p_a.loss + p_b.loss);
        prop_assert!(p_mid.loss <= avg_loss + 1e-8, "loss convex in inflow");
        prop_assert!(p_b.loss >= p_a.loss - 1e-8, "loss must not fall when inflow falls");
    }

    #[test]
    fn margin_ordering_and_witness_tightness(seed in 0u64..1_000_000, n in 2usize..7, m in 1usize..4) {
        let net = net_from(seed, n, m);
        let worth = Array1::from(net.check_nominal_solvency().net_worth);

        let report_inf = default_margin(&net, NormKind::Linf).unwrap();
        let report_l1 = default_margin(&net, NormKind::L1).unwrap();
        prop_assert!(report_l1.epsilon_star >= report_inf.epsilon_star - 1e-12);

        for (norm, report) in [(NormKind::Linf, &report_inf), (NormKind::L1, &report_l1)] {
            let ub = insolvency_margin(&net, norm).unwrap();
            prop_assert!(ub >= report.epsilon_star - 1e-9, "insolvency margin below default margin");

            let s = dual_norm_rows(&net, norm);
            if let Some(witness) = &report.witness {
                // The witness drives the tightest bank's net worth to zero.
                let shift = net.perturbed_inflow(&witness.delta).unwrap()
                    - net.nominal_inflow().to_owned();
                let perturbed = &worth + &shift;
                let min = perturbed.iter().cloned().fold(f64::INFINITY, f64::min);
                prop_assert!(min.abs() <= 1e-9, "witness slack {min}");
            }
            // Uniform bound: every shock of norm below the margin keeps all
            // banks solvent.
            if report.epsilon_star.is_finite() {
                for i in 0..net.n() {
                    prop_assert!(
                        worth[i] - report.epsilon_star * s[i] >= -1e-9,
                        "bank {i} breaches inside the certified ball"
                    );
                }
            }
        }
    }
}
