//! Worst-case systemic loss over a perturbation ball, the price scenario
//! attaining it, a brute-force vertex oracle, and a certificate for
//! uniqueness of the worst-case scenario.
//!
//! The loss `eta(c)` of the clearing LP is convex in the inflow vector, so
//! its maximum over a norm ball of price moves is attained at ball vertices
//! and equals the optimum of the dual program
//! `max (1-beta)^T p_bar - c^T lambda + eps ||S^T lambda||_dual` over
//! `beta - 1 + (I-A) lambda >= 0`, `beta, lambda >= 0`. For the linf ball
//! the norm term is linear in `lambda` (one LP); for the l1 ball it splits
//! into one LP per asset. Both reductions use `|zeta^T lambda| =
//! |zeta|^T lambda`, exact when each asset column has a consistent sign
//! across banks (in particular for long-only books).

use ndarray::{Array1, Array2};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::clearing::{max_clearing_lp, ClearingError, ClearingResult};
use crate::lpcore::{self, matrix_rank, solve_lp, LpProblem, LpStatus, Sense};
use crate::model::{FinancialNetwork, NormKind, PricePerturbation};
use crate::resilience::{self, MarginError};

/// Sensitivities `zeta_i^T lambda` at or below this magnitude count as zero.
pub const SENSITIVITY_TOL: f64 = 1e-10;
/// Two inner-LP values (l1 case) within this relative distance are a tie.
pub const INNER_TIE_TOL: f64 = 1e-9;
/// Multiplier threshold splitting active rows into strict/degenerate sets.
pub const MULTIPLIER_TOL: f64 = 1e-8;
/// Primal-dual disagreement beyond this flags solver trouble.
pub const CONSISTENCY_TOL: f64 = 1e-5;
/// Vertex budget for the linf oracle (2^m clearing solves).
pub const ORACLE_MAX_ASSETS: usize = 12;

#[derive(Debug, Error)]
pub enum WorstCaseError {
    #[error("epsilon must be nonnegative, got {epsilon}")]
    NegativeEpsilon { epsilon: f64 },
    /// The ball of radius `epsilon` contains perturbations for which no
    /// payment vector keeps all banks solvent (the dual LP is unbounded).
    #[error("epsilon {epsilon} exceeds the insolvency margin")]
    EpsilonExceedsBound { epsilon: f64 },
    #[error("dual value {eta_wc} and clearing loss {clearing_loss} disagree")]
    ConsistencyFailure { eta_wc: f64, clearing_loss: f64 },
    #[error("uniqueness check needs epsilon in (default margin, insolvency margin], got {epsilon} outside ({lo}, {hi}]")]
    EpsilonOutOfRange { epsilon: f64, lo: f64, hi: f64 },
    #[error("linf oracle needs at most {limit} assets, got {m}")]
    TooManyVertices { m: usize, limit: usize },
    #[error(transparent)]
    Margin(#[from] MarginError),
    #[error(transparent)]
    Clearing(#[from] ClearingError),
    #[error(transparent)]
    Lp(#[from] lpcore::LpError),
}

/// Worst-case loss at a given radius, with the dual variables, the scenario
/// attaining it, and the clearing state under that scenario.
#[derive(Clone, Debug, Serialize)]
pub struct WorstCaseReport {
    pub norm: NormKind,
    pub epsilon: f64,
    pub eta_wc: f64,
    pub beta_star: Vec<f64>,
    pub lambda_star: Vec<f64>,
    /// The asset whose move is worst (l1 ball only).
    pub i_star: Option<usize>,
    pub delta_wc: PricePerturbation,
    pub clearing_at_wc: ClearingResult,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Uniqueness {
    #[serde(rename = "unique")]
    Unique,
    #[serde(rename = "not-unique")]
    NotUnique,
    #[serde(rename = "inconclusive")]
    Inconclusive,
}

/// Which sufficient conditions for a unique worst-case scenario held.
#[derive(Clone, Debug, Serialize)]
pub struct ConditionFlags {
    /// l1 only: the per-asset inner maximum is attained at a single asset.
    pub inner_max_unique: Option<bool>,
    /// The dual vertex passes the rank + auxiliary-LP certificate.
    pub dual_vertex_unique: bool,
    /// l1: a single asset maximizes `|zeta_i^T lambda|`; linf: every
    /// sensitivity `zeta_i^T lambda` is nonzero.
    pub sensitivity_unique: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct UniquenessReport {
    pub norm: NormKind,
    pub epsilon: f64,
    pub unique: Uniqueness,
    /// Rank of the active-row submatrix versus the number it needs.
    pub rank_fz: usize,
    pub full_rank: usize,
    /// Optimum of the auxiliary LP on degenerate active rows (0 or +inf).
    #[serde(serialize_with = "crate::jsonf::extended")]
    pub iota_star: f64,
    pub flags: ConditionFlags,
}

/// Loss maximum over explicit ball vertices, by repeated clearing.
#[derive(Clone, Debug)]
pub struct OracleReport {
    pub eta: f64,
    /// Vertices attaining the maximum within 1e-9 relative.
    pub argmax_vertices: Vec<Vec<f64>>,
    /// Vertices at which clearing was infeasible (possible only beyond the
    /// insolvency margin); they are excluded from `eta`.
    pub infeasible_vertices: usize,
}

struct DualVertex {
    beta: Array1<f64>,
    lambda: Array1<f64>,
    value: f64,
}

/// Solve `max (1-beta)^T p_bar - c_wc^T lambda` over the dual cone.
/// `None` means unbounded, i.e. clearing at `c_wc` is infeasible.
fn solve_dual(
    net: &FinancialNetwork,
    c_wc: &Array1<f64>,
) -> Result<Option<DualVertex>, WorstCaseError> {
    let n = net.n();
    let debts = net.debts();
    // Variables x = (beta, lambda). Constraint beta - 1 + (I-A) lambda >= 0
    // becomes -beta - (I-A) lambda <= -1.
    let mut g = Array2::<f64>::zeros((n, 2 * n));
    let pro_rata = net.pro_rata();
    for i in 0..n {
        g[(i, i)] = -1.0;
        for j in 0..n {
            g[(i, n + j)] = pro_rata[(i, j)];
        }
        g[(i, n + i)] -= 1.0;
    }
    let mut cost = Array1::<f64>::zeros(2 * n);
    for i in 0..n {
        cost[i] = -debts[i];
        cost[n + i] = -c_wc[i];
    }
    let problem = LpProblem::new(Sense::Maximize, cost)
        .with_ineq(g, Array1::from_elem(n, -1.0))
        .with_bounds(Array1::zeros(2 * n), Array1::from_elem(2 * n, f64::INFINITY));
    let sol = solve_lp(&problem)?;
    match sol.status {
        LpStatus::Optimal => {
            let beta = sol.x.slice(ndarray::s![..n]).to_owned();
            let lambda = sol.x.slice(ndarray::s![n..]).to_owned();
            let value = (sol.objective + debts.sum()).max(0.0);
            Ok(Some(DualVertex { beta, lambda, value }))
        }
        LpStatus::Unbounded => Ok(None),
        LpStatus::Infeasible => Err(WorstCaseError::Lp(lpcore::LpError::NumericalFailure(
            "dual program reported infeasible despite always-feasible cone".into(),
        ))),
    }
}

/// Column `j` of the share matrix.
fn asset_column(net: &FinancialNetwork, j: usize) -> Array1<f64> {
    net.asset_shares().column(j).to_owned()
}

fn sensitivity(net: &FinancialNetwork, j: usize, lambda: &Array1<f64>) -> f64 {
    asset_column(net, j).dot(lambda)
}

/// `-eps * sign(x)` with the zero-sign case pinned to `-eps` so the scenario
/// always sits on the ball boundary and is deterministic. Any choice in
/// `[-eps, eps]` attains the same dual value when the sensitivity vanishes.
fn scenario_entry(eps: f64, x: f64) -> f64 {
    let v = if x > SENSITIVITY_TOL { -eps } else if x < -SENSITIVITY_TOL { eps } else { -eps };
    if v == 0.0 {
        0.0
    } else {
        v
    }
}

fn cross_checked_report(
    net: &FinancialNetwork,
    norm: NormKind,
    epsilon: f64,
    eta_wc: f64,
    vertex: DualVertex,
    i_star: Option<usize>,
    delta: Vec<f64>,
) -> Result<WorstCaseReport, WorstCaseError> {
    let c = net
        .perturbed_inflow(&delta)
        .expect("scenario has one entry per asset");
    let clearing_at_wc = match max_clearing_lp(net, c.view()) {
        Ok(r) => r,
        Err(ClearingError::InsolventToExternal { fallback }) => *fallback,
        Err(e) => return Err(e.into()),
    };
    if (clearing_at_wc.loss - eta_wc).abs() > CONSISTENCY_TOL * (1.0 + eta_wc.abs()) {
        return Err(WorstCaseError::ConsistencyFailure {
            eta_wc,
            clearing_loss: clearing_at_wc.loss,
        });
    }
    Ok(WorstCaseReport {
        norm,
        epsilon,
        eta_wc,
        beta_star: vertex.beta.to_vec(),
        lambda_star: vertex.lambda.to_vec(),
        i_star,
        delta_wc: PricePerturbation::new(delta, norm),
        clearing_at_wc,
    })
}

/// Worst-case loss over the linf ball of radius `epsilon`: a single dual LP
/// with the norm term `eps * 1^T |S|^T lambda`.
pub fn worst_case_loss_linf(
    net: &FinancialNetwork,
    epsilon: f64,
) -> Result<WorstCaseReport, WorstCaseError> {
    if epsilon < 0.0 || !epsilon.is_finite() {
        return Err(WorstCaseError::NegativeEpsilon { epsilon });
    }
    let s = resilience::dual_norm_rows(net, NormKind::Linf);
    let c_wc = &net.nominal_inflow().to_owned() - &(s * epsilon);
    let vertex = solve_dual(net, &c_wc)?
        .ok_or(WorstCaseError::EpsilonExceedsBound { epsilon })?;
    let eta_wc = vertex.value;
    let delta: Vec<f64> = (0..net.m())
        .map(|j| scenario_entry(epsilon, sensitivity(net, j, &vertex.lambda)))
        .collect();
    cross_checked_report(net, NormKind::Linf, epsilon, eta_wc, vertex, None, delta)
}

struct L1Scan {
    winner: usize,
    tie: bool,
    vertex: DualVertex,
}

fn l1_inner_scan(net: &FinancialNetwork, epsilon: f64) -> Result<L1Scan, WorstCaseError> {
    let nominal = net.nominal_inflow().to_owned();
    let mut outcomes: Vec<Result<Option<DualVertex>, WorstCaseError>> = Vec::new();
    (0..net.m())
        .into_par_iter()
        .map(|j| {
            let col = asset_column(net, j).mapv(f64::abs);
            let c_wc = &nominal - &(col * epsilon);
            solve_dual(net, &c_wc)
        })
        .collect_into_vec(&mut outcomes);
    let mut vertices = Vec::with_capacity(net.m());
    for outcome in outcomes {
        match outcome? {
            Some(v) => vertices.push(v),
            None => return Err(WorstCaseError::EpsilonExceedsBound { epsilon }),
        }
    }
    let values: Vec<f64> = vertices.iter().map(|v| v.value).collect();
    let best = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let winner = values
        .iter()
        .position(|v| (best - v).abs() <= INNER_TIE_TOL * (1.0 + best.abs()))
        .expect("max exists");
    let tie = values
        .iter()
        .filter(|v| (best - **v).abs() <= INNER_TIE_TOL * (1.0 + best.abs()))
        .count()
        > 1;
    let vertex = vertices.swap_remove(winner);
    Ok(L1Scan { winner, tie, vertex })
}

/// Worst-case loss over the l1 ball of radius `epsilon`: one dual LP per
/// asset, reduced by value with ties broken toward the lowest index.
pub fn worst_case_loss_l1(
    net: &FinancialNetwork,
    epsilon: f64,
) -> Result<WorstCaseReport, WorstCaseError> {
    if epsilon < 0.0 || !epsilon.is_finite() {
        return Err(WorstCaseError::NegativeEpsilon { epsilon });
    }
    let scan = l1_inner_scan(net, epsilon)?;
    let eta_wc = scan.vertex.value;
    let mut delta = vec![0.0; net.m()];
    delta[scan.winner] = scenario_entry(epsilon, sensitivity(net, scan.winner, &scan.vertex.lambda));
    let winner = scan.winner;
    cross_checked_report(net, NormKind::L1, epsilon, eta_wc, scan.vertex, Some(winner), delta)
}

/// Dispatch on the ball norm.
pub fn worst_case_loss(
    net: &FinancialNetwork,
    norm: NormKind,
    epsilon: f64,
) -> Result<WorstCaseReport, WorstCaseError> {
    match norm {
        NormKind::L1 => worst_case_loss_l1(net, epsilon),
        NormKind::Linf => worst_case_loss_linf(net, epsilon),
    }
}

/// Evaluate the loss at every vertex of the perturbation ball by direct
/// clearing: `2m` vertices for l1, `2^m` (capped) for linf. Convexity of
/// the loss in the inflow makes the vertex maximum the ball maximum.
pub fn worst_case_oracle(
    net: &FinancialNetwork,
    epsilon: f64,
    norm: NormKind,
) -> Result<OracleReport, WorstCaseError> {
    if epsilon < 0.0 || !epsilon.is_finite() {
        return Err(WorstCaseError::NegativeEpsilon { epsilon });
    }
    let m = net.m();
    let vertices: Vec<Vec<f64>> = match norm {
        NormKind::L1 => (0..2 * m)
            .map(|k| {
                let mut d = vec![0.0; m];
                d[k / 2] = if k % 2 == 0 { -epsilon } else { epsilon };
                d
            })
            .collect(),
        NormKind::Linf => {
            if m > ORACLE_MAX_ASSETS {
                return Err(WorstCaseError::TooManyVertices { m, limit: ORACLE_MAX_ASSETS });
            }
            (0..1usize << m)
                .map(|mask| {
                    (0..m)
                        .map(|j| if mask >> j & 1 == 1 { epsilon } else { -epsilon })
                        .collect()
                })
                .collect()
        }
    };
    let mut losses: Vec<Result<Option<f64>, WorstCaseError>> = Vec::new();
    vertices
        .par_iter()
        .map(|delta| {
            let c = net.perturbed_inflow(delta).expect("vertex length m");
            match max_clearing_lp(net, c.view()) {
                Ok(r) => Ok(Some(r.loss)),
                Err(ClearingError::InsolventToExternal { .. }) => Ok(None),
                Err(e) => Err(WorstCaseError::from(e)),
            }
        })
        .collect_into_vec(&mut losses);
    let mut eta = 0.0_f64;
    let mut infeasible = 0usize;
    let mut evaluated: Vec<(usize, f64)> = Vec::new();
    for (k, outcome) in losses.into_iter().enumerate() {
        match outcome? {
            Some(loss) => {
                eta = eta.max(loss);
                evaluated.push((k, loss));
            }
            None => infeasible += 1,
        }
    }
    let argmax_vertices = evaluated
        .iter()
        .filter(|(_, loss)| (eta - loss).abs() <= 1e-9 * (1.0 + eta.abs()))
        .map(|(k, _)| vertices[*k].clone())
        .collect();
    Ok(OracleReport { eta, argmax_vertices, infeasible_vertices: infeasible })
}

/// Outcome of the rank / auxiliary-LP certificate at one dual vertex.
struct VertexCertificate {
    unique: bool,
    rank_fz: usize,
    full_rank: usize,
    iota_star: f64,
    /// Some active-row multiplier sat in the ambiguous band, so a negative
    /// certificate may be a solver-degeneracy artifact.
    gray_zone: bool,
}

/// Apply the active-set certificate to the dual vertex `(beta, lambda)` of
/// the program with inflow `c_wc`. Sink banks are projected out: their
/// `beta_i` enters no objective term and only the decoupled constraints
/// `beta_i >= 1`, `beta_i >= 0`, so it is always free to move and would
/// spuriously void the certificate.
fn certify_vertex(
    net: &FinancialNetwork,
    c_wc: &Array1<f64>,
    beta: &Array1<f64>,
    lambda: &Array1<f64>,
) -> Result<VertexCertificate, WorstCaseError> {
    let n = net.n();
    let debts = net.debts();
    let pro_rata = net.pro_rata();

    // Multipliers of the dual program are the clearing solution at c_wc.
    let clearing = max_clearing_lp(net, c_wc.view())?;
    let p_star = Array1::from(clearing.payments.clone());
    let v_star = &debts.to_owned() - &p_star;
    // w = c_wc - (I - A)^T p = residual slack of the clearing constraint.
    let w_star = &Array1::from(clearing.residuals.clone()) - &p_star;

    let beta_cols: Vec<usize> = (0..n).filter(|&i| debts[i] > 0.0).collect();
    let ncols = beta_cols.len() + n;
    let col_of_beta = |i: usize| beta_cols.iter().position(|&b| b == i);

    // Rows of the constraint system F x >= g restricted to live columns,
    // paired with their multipliers.
    let mut rows: Vec<(Array1<f64>, f64, f64)> = Vec::new();
    for i in 0..n {
        let Some(bc) = col_of_beta(i) else { continue };
        let mut row = Array1::<f64>::zeros(ncols);
        row[bc] = 1.0;
        for j in 0..n {
            row[beta_cols.len() + j] -= pro_rata[(i, j)];
        }
        row[beta_cols.len() + i] += 1.0;
        rows.push((row, 1.0, p_star[i]));
    }
    for i in 0..n {
        let Some(bc) = col_of_beta(i) else { continue };
        let mut row = Array1::<f64>::zeros(ncols);
        row[bc] = 1.0;
        rows.push((row, 0.0, v_star[i]));
    }
    for i in 0..n {
        let mut row = Array1::<f64>::zeros(ncols);
        row[beta_cols.len() + i] = 1.0;
        rows.push((row, 0.0, w_star[i]));
    }

    let mut x = Array1::<f64>::zeros(ncols);
    for (k, &i) in beta_cols.iter().enumerate() {
        x[k] = beta[i];
    }
    for i in 0..n {
        x[beta_cols.len() + i] = lambda[i];
    }

    let mut active: Vec<usize> = Vec::new();
    let mut gray_zone = false;
    for (k, (row, gk, mult)) in rows.iter().enumerate() {
        if (row.dot(&x) - gk).abs() <= 1e-8 {
            active.push(k);
            if *mult > 1e-11 && *mult < 1e-5 {
                gray_zone = true;
            }
        }
    }
    let strict: Vec<usize> = active
        .iter()
        .copied()
        .filter(|&k| rows[k].2 > MULTIPLIER_TOL)
        .collect();
    let degenerate: Vec<usize> = active
        .iter()
        .copied()
        .filter(|&k| rows[k].2 <= MULTIPLIER_TOL)
        .collect();

    let mut f_z = Array2::<f64>::zeros((active.len(), ncols));
    for (r, &k) in active.iter().enumerate() {
        f_z.row_mut(r).assign(&rows[k].0);
    }
    let rank_fz = matrix_rank(&f_z, 1e-8);

    let iota_star = if degenerate.is_empty() {
        0.0
    } else {
        let mut e = Array2::<f64>::zeros((strict.len(), ncols));
        for (r, &k) in strict.iter().enumerate() {
            e.row_mut(r).assign(&rows[k].0);
        }
        let mut g = Array2::<f64>::zeros((degenerate.len(), ncols));
        let mut cost = Array1::<f64>::zeros(ncols);
        for (r, &k) in degenerate.iter().enumerate() {
            let row = &rows[k].0;
            for j in 0..ncols {
                g[(r, j)] = -row[j];
                cost[j] += row[j];
            }
        }
        let problem = LpProblem::new(Sense::Maximize, cost)
            .with_ineq(g, Array1::zeros(degenerate.len()))
            .with_eq(e, Array1::zeros(strict.len()));
        let sol = solve_lp(&problem)?;
        match sol.status {
            LpStatus::Optimal => sol.objective.abs(),
            LpStatus::Unbounded => f64::INFINITY,
            LpStatus::Infeasible => {
                return Err(WorstCaseError::Lp(lpcore::LpError::NumericalFailure(
                    "auxiliary cone program cannot be infeasible".into(),
                )))
            }
        }
    };

    Ok(VertexCertificate {
        unique: rank_fz == ncols && iota_star <= 1e-9,
        rank_fz,
        full_rank: ncols,
        iota_star,
        gray_zone,
    })
}

/// Decide whether the worst-case scenario at `epsilon` is unique. Requires
/// `epsilon` strictly beyond the default margin (below it the scenario is
/// trivially non-unique: every ball point gives zero loss) and within the
/// insolvency margin.
pub fn uniqueness_check(
    net: &FinancialNetwork,
    epsilon: f64,
    norm: NormKind,
) -> Result<UniquenessReport, WorstCaseError> {
    let star = resilience::default_margin(net, norm)?.epsilon_star;
    let ub = resilience::insolvency_margin(net, norm)?;
    if !(epsilon > star && epsilon <= ub + 1e-12) {
        return Err(WorstCaseError::EpsilonOutOfRange { epsilon, lo: star, hi: ub });
    }

    let nominal = net.nominal_inflow().to_owned();
    let (c_wc, vertex, inner_max_unique) = match norm {
        NormKind::Linf => {
            let s = resilience::dual_norm_rows(net, NormKind::Linf);
            let c_wc = &nominal - &(s * epsilon);
            let vertex = solve_dual(net, &c_wc)?
                .ok_or(WorstCaseError::EpsilonExceedsBound { epsilon })?;
            (c_wc, vertex, None)
        }
        NormKind::L1 => {
            let scan = l1_inner_scan(net, epsilon)?;
            let col = asset_column(net, scan.winner).mapv(f64::abs);
            let c_wc = &nominal - &(col * epsilon);
            (c_wc, scan.vertex, Some(!scan.tie))
        }
    };

    let sensitivity_unique = match norm {
        NormKind::Linf => (0..net.m())
            .all(|j| sensitivity(net, j, &vertex.lambda).abs() > SENSITIVITY_TOL),
        NormKind::L1 => {
            let mags: Vec<f64> = (0..net.m())
                .map(|j| sensitivity(net, j, &vertex.lambda).abs())
                .collect();
            let peak = mags.iter().cloned().fold(0.0_f64, f64::max);
            mags.iter()
                .filter(|v| (peak - **v).abs() <= INNER_TIE_TOL * (1.0 + peak))
                .count()
                == 1
        }
    };

    let cert = certify_vertex(net, &c_wc, &vertex.beta, &vertex.lambda)?;

    let decisive_failure = inner_max_unique == Some(false) || !sensitivity_unique;
    let unique = if decisive_failure {
        Uniqueness::NotUnique
    } else if cert.unique {
        Uniqueness::Unique
    } else if cert.gray_zone {
        // The negative certificate may reflect an ambiguous multiplier
        // split rather than true non-uniqueness.
        Uniqueness::Inconclusive
    } else {
        Uniqueness::NotUnique
    };

    Ok(UniquenessReport {
        norm,
        epsilon,
        unique,
        rank_fz: cert.rank_fz,
        full_rank: cert.full_rank,
        iota_star: cert.iota_star,
        flags: ConditionFlags {
            inner_max_unique,
            dual_vertex_unique: cert.unique,
            sensitivity_unique,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn toy_linf_losses_match_hand_clearing() {
        let net = fixtures::toy();
        let report = worst_case_loss_linf(&net, 1.5).unwrap();
        assert!((report.eta_wc - 0.5).abs() < 1e-8);
        assert_eq!(report.delta_wc.delta, vec![-1.5]);
        assert!((report.clearing_at_wc.loss - 0.5).abs() < 1e-8);
        assert_eq!(report.clearing_at_wc.defaulted, vec![true, false]);

        let at_margin = worst_case_loss_linf(&net, 1.0).unwrap();
        assert!(at_margin.eta_wc.abs() < 1e-8);

        let at_bound = worst_case_loss_linf(&net, 2.0).unwrap();
        assert!((at_bound.eta_wc - 1.0).abs() < 1e-8);
        assert_eq!(at_bound.delta_wc.delta, vec![-2.0]);
        assert!(at_bound.clearing_at_wc.payments[0].abs() < 1e-8);
    }

    #[test]
    fn toy_l1_equals_linf_with_one_asset() {
        let net = fixtures::toy();
        let l1 = worst_case_loss_l1(&net, 1.5).unwrap();
        let linf = worst_case_loss_linf(&net, 1.5).unwrap();
        assert!((l1.eta_wc - linf.eta_wc).abs() < 1e-9);
        assert_eq!(l1.i_star, Some(0));
        assert_eq!(l1.delta_wc.delta, vec![-1.5]);
    }

    #[test]
    fn l1_losses_never_exceed_linf_losses() {
        // A total shock budget of eps (l1 ball) buys at most what a per-asset
        // budget of eps (linf ball) buys, because the l1 ball sits inside.
        for net in [fixtures::toy2(), fixtures::mesh5()] {
            let ub_linf = crate::resilience::insolvency_margin(&net, NormKind::Linf).unwrap();
            for t in [0.25, 0.5, 0.75, 1.0] {
                let eps = t * ub_linf;
                let linf = worst_case_loss_linf(&net, eps).unwrap();
                let l1 = worst_case_loss_l1(&net, eps).unwrap();
                assert!(
                    l1.eta_wc <= linf.eta_wc + 1e-9,
                    "eps {eps}: l1 {} > linf {}",
                    l1.eta_wc,
                    linf.eta_wc
                );
            }
        }
    }

    #[test]
    fn toy2_l1_concentrates_on_one_asset() {
        let net = fixtures::toy2();
        let report = worst_case_loss_l1(&net, 1.0).unwrap();
        assert!((report.eta_wc - 0.5).abs() < 1e-8);
        let delta = &report.delta_wc.delta;
        let nonzero: Vec<&f64> = delta.iter().filter(|d| **d != 0.0).collect();
        assert_eq!(nonzero.len(), 1);
        assert!((nonzero[0] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn epsilon_beyond_bound_is_rejected() {
        let net = fixtures::toy();
        assert!(matches!(
            worst_case_loss_linf(&net, 2.5),
            Err(WorstCaseError::EpsilonExceedsBound { .. })
        ));
        assert!(matches!(
            worst_case_loss_l1(&net, 2.5),
            Err(WorstCaseError::EpsilonExceedsBound { .. })
        ));
        assert!(matches!(
            worst_case_loss_linf(&net, -0.1),
            Err(WorstCaseError::NegativeEpsilon { .. })
        ));
    }

    #[test]
    fn oracle_agrees_on_fixtures() {
        let net = fixtures::toy();
        let oracle = worst_case_oracle(&net, 1.5, NormKind::Linf).unwrap();
        assert!((oracle.eta - 0.5).abs() < 1e-8);
        assert_eq!(oracle.argmax_vertices, vec![vec![-1.5]]);
        assert_eq!(oracle.infeasible_vertices, 0);

        let oracle2 = worst_case_oracle(&fixtures::toy2(), 1.0, NormKind::L1).unwrap();
        assert!((oracle2.eta - 0.5).abs() < 1e-8);

        let below = worst_case_oracle(&net, 0.5, NormKind::Linf).unwrap();
        assert_eq!(below.eta, 0.0);
    }

    #[test]
    fn oracle_rejects_oversized_linf_enumeration() {
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(3);
        let net = fixtures::random_network(&mut rng, 3, 13);
        assert!(matches!(
            worst_case_oracle(&net, 0.1, NormKind::Linf),
            Err(WorstCaseError::TooManyVertices { m: 13, .. })
        ));
    }

    #[test]
    fn toy_scenario_is_unique() {
        let net = fixtures::toy();
        for eps in [1.2, 1.5, 1.9] {
            let report = uniqueness_check(&net, eps, NormKind::Linf).unwrap();
            assert_eq!(report.unique, Uniqueness::Unique, "eps {eps}: {report:?}");
            assert_eq!(report.rank_fz, report.full_rank);
            assert_eq!(report.iota_star, 0.0);
        }
    }

    #[test]
    fn insolvency_boundary_degrades_to_not_unique() {
        // At epsilon equal to the insolvency margin the worst-case inflow is
        // exactly on the feasibility boundary; the dual optimal face becomes
        // unbounded (a zero-cost multiplier direction), so the vertex
        // certificate must fail decisively.
        let net = fixtures::toy();
        let report = uniqueness_check(&net, 2.0, NormKind::Linf).unwrap();
        assert_eq!(report.unique, Uniqueness::NotUnique);
        assert!(report.iota_star.is_infinite());
    }

    #[test]
    fn duplicated_asset_columns_are_never_unique_in_l1() {
        let net = fixtures::toy2();
        for eps in [0.75, 1.0, 1.5] {
            let report = uniqueness_check(&net, eps, NormKind::L1).unwrap();
            assert_eq!(report.unique, Uniqueness::NotUnique, "eps {eps}");
            assert_eq!(report.flags.inner_max_unique, Some(false));
        }
    }

    #[test]
    fn uniqueness_requires_epsilon_between_margins() {
        let net = fixtures::toy();
        assert!(matches!(
            uniqueness_check(&net, 0.5, NormKind::Linf),
            Err(WorstCaseError::EpsilonOutOfRange { .. })
        ));
        assert!(matches!(
            uniqueness_check(&net, 2.5, NormKind::Linf),
            Err(WorstCaseError::EpsilonOutOfRange { .. })
        ));
    }

    #[test]
    fn zero_sensitivity_coordinates_fall_to_minus_epsilon() {
        // Two banks, two assets; only bank a is exposed, and only to asset 0.
        // Asset 1's sensitivity is exactly zero, so its scenario entry is
        // pinned at -eps and the linf sensitivity bullet must fail.
        let net = FinancialNetwork::from_parts(
            vec!["a".into(), "b".into()],
            ndarray::array![[0.0, 1.0], [0.0, 0.0]],
            ndarray::array![1.0, 0.0],
            ndarray::array![0.0, 0.0],
            ndarray::array![[1.0, 0.0], [0.0, 0.0]],
            ndarray::array![1.0, 1.0],
        )
        .unwrap();
        let report = worst_case_loss_linf(&net, 1.5).unwrap();
        assert_eq!(report.delta_wc.delta, vec![-1.5, -1.5]);
        assert!((report.eta_wc - 0.5).abs() < 1e-8);

        let uniq = uniqueness_check(&net, 1.5, NormKind::Linf).unwrap();
        assert_eq!(uniq.unique, Uniqueness::NotUnique);
        assert!(!uniq.flags.sensitivity_unique);
    }

    #[test]
    fn mesh5_dual_matches_oracle_across_levels() {
        let net = fixtures::mesh5();
        for norm in [NormKind::L1, NormKind::Linf] {
            let star = resilience::default_margin(&net, norm).unwrap().epsilon_star;
            let ub = resilience::insolvency_margin(&net, norm).unwrap();
            for t in [0.25, 0.5, 0.75, 1.0] {
                let eps = star + t * (ub - star);
                let report = worst_case_loss(&net, norm, eps).unwrap();
                let oracle = worst_case_oracle(&net, eps, norm).unwrap();
                assert!(
                    (report.eta_wc - oracle.eta).abs() <= 1e-6 * (1.0 + oracle.eta),
                    "{norm:?} eps {eps}: dual {} oracle {}",
                    report.eta_wc,
                    oracle.eta
                );
                assert_eq!(oracle.infeasible_vertices, 0);
            }
        }
    }
}
