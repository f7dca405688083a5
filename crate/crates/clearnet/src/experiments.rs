//! Loss-curve sweeps: worst-case loss across an epsilon grid spanning the
//! default margin to the insolvency margin, with Monte Carlo random-shock
//! baselines and CSV emission.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::clearing::{max_clearing_lp, ClearingError};
use crate::model::{FinancialNetwork, NormKind, PricePerturbation};
use crate::resilience::{self, MarginError};
use crate::worstcase::{self, WorstCaseError};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("sweep grid needs at least 2 points, got {points}")]
    GridTooSmall { points: usize },
    /// No bank has any price exposure, so both margins are infinite and no
    /// finite sweep interval exists.
    #[error("every bank has zero price exposure; the sweep interval is unbounded")]
    NoPriceExposure,
    #[error(transparent)]
    Margin(#[from] MarginError),
    #[error(transparent)]
    WorstCase(#[from] WorstCaseError),
    #[error(transparent)]
    Clearing(#[from] ClearingError),
}

/// Sweep parameters. `grid_points` epsilon values are spaced evenly on
/// `[default margin, insolvency margin]`; `prefix_points` extra values are
/// prepended evenly on `[0, default margin)` to show the flat zero-loss
/// segment; each grid point gets `runs` random shocks.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct SweepConfig {
    pub grid_points: usize,
    pub prefix_points: usize,
    pub runs: usize,
    pub seed: u64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self { grid_points: 20, prefix_points: 0, runs: 150, seed: 0 }
    }
}

/// Loss statistics over the random shocks drawn at one grid point.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ShockStats {
    pub min: f64,
    pub mean: f64,
    pub max: f64,
    pub runs: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct LossCurvePoint {
    pub epsilon: f64,
    pub eta_wc: f64,
    /// Worst asset index (l1 ball only).
    pub i_star: Option<usize>,
    /// `None` when the sweep ran with zero random shocks.
    pub random: Option<ShockStats>,
}

#[derive(Clone, Debug, Serialize)]
pub struct LossCurve {
    pub norm: NormKind,
    pub epsilon_star: f64,
    pub epsilon_ub: f64,
    pub seed: u64,
    pub runs: usize,
    pub points: Vec<LossCurvePoint>,
}

/// Draw a nonpositive perturbation with `||delta|| == epsilon` exactly.
///
/// l1 ball: `delta = -epsilon * w` with `w` uniform on the probability
/// simplex (uniform-spacings construction). linf ball: one uniformly chosen
/// coordinate is pinned to `-epsilon`, the rest are uniform on `[-epsilon, 0)`.
/// `epsilon == 0` degenerates to the zero perturbation.
pub fn random_shock<R: Rng + ?Sized>(
    m: usize,
    norm: NormKind,
    epsilon: f64,
    rng: &mut R,
) -> PricePerturbation {
    if epsilon == 0.0 || m == 0 {
        return PricePerturbation::new(vec![0.0; m], norm);
    }
    let delta = match norm {
        NormKind::L1 => {
            let mut cuts: Vec<f64> = (0..m - 1).map(|_| rng.gen_range(0.0..1.0)).collect();
            cuts.sort_by(|a, b| a.partial_cmp(b).expect("uniform draws are finite"));
            let mut delta = Vec::with_capacity(m);
            let mut prev = 0.0;
            for &cut in &cuts {
                delta.push(-epsilon * (cut - prev));
                prev = cut;
            }
            delta.push(-epsilon * (1.0 - prev));
            delta
        }
        NormKind::Linf => {
            let pinned = rng.gen_range(0..m);
            (0..m)
                .map(|j| if j == pinned { -epsilon } else { rng.gen_range(-epsilon..0.0) })
                .collect()
        }
    };
    PricePerturbation::new(delta, norm)
}

fn rng_for(seed: u64, grid_index: usize, run_index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((grid_index as u64) << 32) | run_index as u64);
    rng
}

fn point_at(
    net: &FinancialNetwork,
    norm: NormKind,
    epsilon: f64,
    grid_index: usize,
    config: &SweepConfig,
) -> Result<LossCurvePoint, ExperimentError> {
    let report = worstcase::worst_case_loss(net, norm, epsilon)?;
    let random = if config.runs == 0 {
        None
    } else {
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        let mut sum = 0.0;
        for run in 0..config.runs {
            let mut rng = rng_for(config.seed, grid_index, run);
            let shock = random_shock(net.m(), norm, epsilon, &mut rng);
            let c = net
                .perturbed_inflow(&shock.delta)
                .expect("shock has one entry per asset");
            let loss = max_clearing_lp(net, c.view())?.loss;
            min = min.min(loss);
            max = max.max(loss);
            sum += loss;
        }
        Some(ShockStats { min, mean: sum / config.runs as f64, max, runs: config.runs })
    };
    Ok(LossCurvePoint { epsilon, eta_wc: report.eta_wc, i_star: report.i_star, random })
}

/// Sweep the worst-case loss and random-shock baselines across an epsilon
/// grid from the default margin to the insolvency margin (plus an optional
/// prefix below the default margin). Deterministic for fixed inputs: each
/// (grid point, run) pair uses its own counter-derived RNG stream, so the
/// parallel schedule cannot affect the output.
pub fn loss_curve(
    net: &FinancialNetwork,
    norm: NormKind,
    config: &SweepConfig,
) -> Result<LossCurve, ExperimentError> {
    if config.grid_points < 2 {
        return Err(ExperimentError::GridTooSmall { points: config.grid_points });
    }
    let star = resilience::default_margin(net, norm)?.epsilon_star;
    let ub = resilience::insolvency_margin(net, norm)?;
    if !star.is_finite() || !ub.is_finite() {
        return Err(ExperimentError::NoPriceExposure);
    }

    let mut grid = Vec::with_capacity(config.prefix_points + config.grid_points);
    for k in 0..config.prefix_points {
        grid.push(star * k as f64 / config.prefix_points as f64);
    }
    for i in 0..config.grid_points {
        let t = i as f64 / (config.grid_points - 1) as f64;
        grid.push(star + t * (ub - star));
    }

    let mut outcomes: Vec<Result<LossCurvePoint, ExperimentError>> = Vec::new();
    grid.par_iter()
        .enumerate()
        .map(|(g, &eps)| point_at(net, norm, eps, g, config))
        .collect_into_vec(&mut outcomes);
    let points = outcomes.into_iter().collect::<Result<Vec<_>, _>>()?;

    Ok(LossCurve {
        norm,
        epsilon_star: star,
        epsilon_ub: ub,
        seed: config.seed,
        runs: config.runs,
        points,
    })
}

fn csv_float(x: f64) -> String {
    format!("{x:.11e}")
}

/// Render a curve as CSV: 12-significant-digit floats, LF line endings,
/// `i_star` empty for the linf ball, shock columns empty when runs == 0.
pub fn to_csv(curve: &LossCurve) -> String {
    let mut out = String::from("epsilon,eta_wc,i_star,rand_min,rand_mean,rand_max\n");
    for point in &curve.points {
        let i_star = point.i_star.map(|i| i.to_string()).unwrap_or_default();
        let (rmin, rmean, rmax) = match &point.random {
            Some(s) => (csv_float(s.min), csv_float(s.mean), csv_float(s.max)),
            None => (String::new(), String::new(), String::new()),
        };
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            csv_float(point.epsilon),
            csv_float(point.eta_wc),
            i_star,
            rmin,
            rmean,
            rmax
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn toy_grid_matches_linear_ramp() {
        let net = fixtures::toy();
        let config = SweepConfig { grid_points: 4, prefix_points: 0, runs: 0, seed: 0 };
        let curve = loss_curve(&net, NormKind::Linf, &config).unwrap();
        let eps: Vec<f64> = curve.points.iter().map(|p| p.epsilon).collect();
        let eta: Vec<f64> = curve.points.iter().map(|p| p.eta_wc).collect();
        for (got, want) in eps.iter().zip([1.0, 4.0 / 3.0, 5.0 / 3.0, 2.0]) {
            assert!((got - want).abs() < 1e-12);
        }
        for (got, want) in eta.iter().zip([0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0]) {
            assert!((got - want).abs() < 1e-8, "eta {got} want {want}");
        }
        assert!(curve.points.iter().all(|p| p.random.is_none()));
    }

    #[test]
    fn prefix_points_sit_below_the_margin_at_zero_loss() {
        let net = fixtures::toy();
        let config = SweepConfig { grid_points: 3, prefix_points: 2, runs: 0, seed: 0 };
        let curve = loss_curve(&net, NormKind::Linf, &config).unwrap();
        let eps: Vec<f64> = curve.points.iter().map(|p| p.epsilon).collect();
        for (got, want) in eps.iter().zip([0.0, 0.5, 1.0, 1.5, 2.0]) {
            assert!((got - want).abs() < 1e-12);
        }
        for p in &curve.points {
            if p.epsilon <= curve.epsilon_star {
                assert!(p.eta_wc.abs() < 1e-9, "flat segment at eps {}", p.epsilon);
            }
        }
        assert!((curve.points[4].eta_wc - 1.0).abs() < 1e-8);
    }

    #[test]
    fn single_asset_random_shock_equals_worst_case() {
        let net = fixtures::toy();
        let config = SweepConfig { grid_points: 4, prefix_points: 0, runs: 5, seed: 9 };
        let curve = loss_curve(&net, NormKind::Linf, &config).unwrap();
        for p in &curve.points {
            let stats = p.random.as_ref().unwrap();
            assert_eq!(stats.runs, 5);
            assert!((stats.min - p.eta_wc).abs() < 1e-8);
            assert!((stats.max - p.eta_wc).abs() < 1e-8);
        }
    }

    #[test]
    fn curve_is_bitwise_deterministic() {
        let net = fixtures::mesh5();
        let config = SweepConfig { grid_points: 5, prefix_points: 1, runs: 7, seed: 42 };
        let a = loss_curve(&net, NormKind::L1, &config).unwrap();
        let b = loss_curve(&net, NormKind::L1, &config).unwrap();
        assert_eq!(to_csv(&a), to_csv(&b));
        for (pa, pb) in a.points.iter().zip(&b.points) {
            assert_eq!(pa.epsilon.to_bits(), pb.epsilon.to_bits());
            assert_eq!(pa.eta_wc.to_bits(), pb.eta_wc.to_bits());
            let (sa, sb) = (pa.random.unwrap(), pb.random.unwrap());
            assert_eq!(sa.min.to_bits(), sb.min.to_bits());
            assert_eq!(sa.mean.to_bits(), sb.mean.to_bits());
            assert_eq!(sa.max.to_bits(), sb.max.to_bits());
        }
    }

    #[test]
    fn random_dominated_by_worst_case_and_curve_monotone() {
        let net = fixtures::mesh5();
        let config = SweepConfig { grid_points: 6, prefix_points: 0, runs: 20, seed: 3 };
        for norm in [NormKind::L1, NormKind::Linf] {
            let curve = loss_curve(&net, norm, &config).unwrap();
            let mut prev = -1.0;
            for p in &curve.points {
                assert!(p.eta_wc >= prev - 1e-9, "eta must not decrease");
                prev = p.eta_wc;
                let stats = p.random.unwrap();
                assert!(stats.max <= p.eta_wc + 1e-6);
                assert!(stats.min >= 0.0 && stats.min <= stats.mean && stats.mean <= stats.max);
            }
        }
    }

    #[test]
    fn shocks_attain_their_norm_exactly() {
        let mut rng = rng_for(7, 0, 0);
        for eps in [0.3, 1.0, 2.5] {
            for _ in 0..50 {
                let l1 = random_shock(5, NormKind::L1, eps, &mut rng);
                assert!(l1.delta.iter().all(|d| *d <= 0.0));
                let sum: f64 = l1.delta.iter().sum();
                assert!((sum + eps).abs() < 1e-12);

                let li = random_shock(5, NormKind::Linf, eps, &mut rng);
                assert!(li.delta.iter().all(|d| *d <= 0.0 && *d >= -eps));
                let min = li.delta.iter().cloned().fold(f64::INFINITY, f64::min);
                assert_eq!(min, -eps);
            }
        }
        let single = random_shock(1, NormKind::L1, 0.7, &mut rng);
        assert_eq!(single.delta, vec![-0.7]);
        let single_inf = random_shock(1, NormKind::Linf, 0.7, &mut rng);
        assert_eq!(single_inf.delta, vec![-0.7]);
    }

    #[test]
    fn unexposed_network_has_no_sweep_interval() {
        let net = crate::model::FinancialNetwork::from_parts(
            vec!["a".into(), "b".into()],
            ndarray::array![[0.0, 1.0], [0.0, 0.0]],
            ndarray::array![2.0, 0.0],
            ndarray::array![0.0, 0.0],
            ndarray::array![[0.0], [0.0]],
            ndarray::array![1.0],
        )
        .unwrap();
        let config = SweepConfig { grid_points: 4, prefix_points: 0, runs: 0, seed: 0 };
        match loss_curve(&net, NormKind::Linf, &config) {
            Err(ExperimentError::NoPriceExposure) => {}
            other => panic!("expected NoPriceExposure, got {other:?}"),
        }
        match loss_curve(&fixtures::toy(), NormKind::Linf, &SweepConfig { grid_points: 1, ..config }) {
            Err(ExperimentError::GridTooSmall { points: 1 }) => {}
            other => panic!("expected GridTooSmall, got {other:?}"),
        }
    }
}
