//! Clearing payments under limited liability, debt priority, and pro-rata
//! division.
//!
//! A payment vector `p` clears the network for inflow `c` when
//! `p = min(p_bar, (c + A^T p)^+)`. The set of such vectors is a lattice;
//! monotone iteration from `p_bar` (resp. `0`) yields the maximal (resp.
//! minimal) clearing vector. The maximal vector is also the unique optimum
//! of the LP `min 1^T (p_bar - p)` over `0 <= p <= p_bar`,
//! `c + A^T p >= p`; that LP is infeasible exactly when some bank cannot
//! cover its external obligations no matter how payments are arranged.

use ndarray::{Array1, ArrayView1};
use serde::Serialize;
use thiserror::Error;

use crate::lpcore::{self, solve_lp, LpProblem, LpStatus};
use crate::model::FinancialNetwork;

/// Default stopping tolerance for the fixed-point iterations (max-norm
/// change between successive iterates).
pub const ITER_TOL: f64 = 1e-10;
/// A bank with `p_i < debts_i - DEFAULT_TOL` is flagged as defaulted.
pub const DEFAULT_TOL: f64 = 1e-9;
/// A bank with residual `d_i < -INSOLVENCY_TOL` cannot cover its external
/// obligations.
pub const INSOLVENCY_TOL: f64 = 1e-9;

/// How a `ClearingResult` was produced.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ClearingMethod {
    #[serde(rename = "iter-max")]
    IterMax,
    #[serde(rename = "iter-min")]
    IterMin,
    #[serde(rename = "lp")]
    Lp,
}

#[derive(Debug, Error)]
pub enum ClearingError {
    /// The clearing LP is infeasible: for every payment vector some bank
    /// stays insolvent to the external sector. `fallback` carries the
    /// iterative (maximal) clearing vector with insolvent banks flagged.
    #[error("no payment vector keeps every bank solvent to the external sector")]
    InsolventToExternal { fallback: Box<ClearingResult> },
    /// The fixed-point iteration hit its step limit; `last` holds the final
    /// iterate so callers can still inspect the near-clearing state.
    #[error("clearing iteration stopped after {iterations} steps with residual {residual:.3e}")]
    MaxIterExceeded {
        iterations: usize,
        residual: f64,
        last: Box<ClearingResult>,
    },
    #[error("payment {value} at index {index} lies outside [0, debt]")]
    OutOfRange { index: usize, value: f64 },
    #[error(transparent)]
    Lp(#[from] lpcore::LpError),
}

/// Payments plus everything derived from them.
#[derive(Clone, Debug, Serialize)]
pub struct ClearingResult {
    pub payments: Vec<f64>,
    /// Residual value at each bank after external liabilities: `c + A^T p`.
    pub residuals: Vec<f64>,
    /// `p_i < debts_i - DEFAULT_TOL`; banks with zero debt are never flagged.
    pub defaulted: Vec<bool>,
    /// `residuals_i < -INSOLVENCY_TOL`: the bank cannot cover external
    /// obligations even after zeroing interbank payments.
    pub insolvent: Vec<bool>,
    /// Total unpaid interbank debt `1^T (p_bar - p)`.
    pub loss: f64,
    pub method: ClearingMethod,
    /// Number of applications of the clearing map (0 for the LP method).
    pub iterations: usize,
}

/// Step limit used by the higher-level entry points: generous enough for
/// any default cascade at desk scale.
pub fn default_max_iter(net: &FinancialNetwork) -> usize {
    let arcs = net.liabilities().iter().filter(|&&w| w > 0.0).count();
    10 * net.n() * arcs + 100
}

/// One application of the clearing map: `min(p_bar, (c + A^T p)^+)`.
pub fn clearing_map(
    net: &FinancialNetwork,
    c: ArrayView1<'_, f64>,
    p: ArrayView1<'_, f64>,
) -> Array1<f64> {
    let inflow = net.pro_rata().t().dot(&p);
    let debts = net.debts();
    Array1::from_iter(
        (0..net.n()).map(|i| (c[i] + inflow[i]).max(0.0).min(debts[i])),
    )
}

/// `max_i |p_i - T_c(p)_i|`: how far `p` is from being a clearing vector.
pub fn fixed_point_residual(
    net: &FinancialNetwork,
    c: ArrayView1<'_, f64>,
    p: &[f64],
) -> f64 {
    let pv = ArrayView1::from(p);
    let mapped = clearing_map(net, c, pv);
    mapped
        .iter()
        .zip(p)
        .fold(0.0_f64, |acc, (m, q)| acc.max((m - q).abs()))
}

fn build_result(
    net: &FinancialNetwork,
    c: ArrayView1<'_, f64>,
    p: Array1<f64>,
    method: ClearingMethod,
    iterations: usize,
) -> ClearingResult {
    let residuals = &net.pro_rata().t().dot(&p) + &c;
    let debts = net.debts();
    let defaulted = (0..net.n())
        .map(|i| debts[i] > 0.0 && p[i] < debts[i] - DEFAULT_TOL)
        .collect();
    let insolvent = residuals.iter().map(|&d| d < -INSOLVENCY_TOL).collect();
    let loss = (debts.sum() - p.sum()).max(0.0);
    ClearingResult {
        payments: p.to_vec(),
        residuals: residuals.to_vec(),
        defaulted,
        insolvent,
        loss,
        method,
        iterations,
    }
}

fn iterate(
    net: &FinancialNetwork,
    c: ArrayView1<'_, f64>,
    start: Array1<f64>,
    tol: f64,
    max_iter: usize,
    method: ClearingMethod,
) -> Result<ClearingResult, ClearingError> {
    let mut p = start;
    let mut iterations = 0usize;
    loop {
        let next = clearing_map(net, c, p.view());
        iterations += 1;
        let residual = next
            .iter()
            .zip(p.iter())
            .fold(0.0_f64, |acc, (a, b)| acc.max((a - b).abs()));
        p = next;
        if residual <= tol {
            return Ok(build_result(net, c, p, method, iterations));
        }
        if iterations >= max_iter {
            let last = build_result(net, c, p, method, iterations);
            return Err(ClearingError::MaxIterExceeded {
                iterations,
                residual,
                last: Box::new(last),
            });
        }
    }
}

/// Maximal clearing vector by monotone iteration downward from `p_bar`.
pub fn max_clearing_iterative(
    net: &FinancialNetwork,
    c: ArrayView1<'_, f64>,
    tol: f64,
    max_iter: usize,
) -> Result<ClearingResult, ClearingError> {
    iterate(net, c, net.debts().to_owned(), tol, max_iter, ClearingMethod::IterMax)
}

/// Minimal clearing vector by monotone iteration upward from `0`.
pub fn min_clearing_iterative(
    net: &FinancialNetwork,
    c: ArrayView1<'_, f64>,
    tol: f64,
    max_iter: usize,
) -> Result<ClearingResult, ClearingError> {
    iterate(net, c, Array1::zeros(net.n()), tol, max_iter, ClearingMethod::IterMin)
}

/// Maximal clearing vector via the LP characterization. Infeasibility means
/// some bank is insolvent to the external sector for every payment vector;
/// the error then carries the iterative clearing result so reporting can
/// degrade gracefully.
pub fn max_clearing_lp(
    net: &FinancialNetwork,
    c: ArrayView1<'_, f64>,
) -> Result<ClearingResult, ClearingError> {
    let n = net.n();
    let debts = net.debts().to_owned();
    // min 1^T(p_bar - p)  <=>  min -1^T p; constraint (I - A^T) p <= c.
    let mut g = net.pro_rata().t().to_owned();
    g.mapv_inplace(|v| -v);
    for i in 0..n {
        g[(i, i)] += 1.0;
    }
    let problem = LpProblem::minimize(Array1::from_elem(n, -1.0))
        .with_ineq(g, c.to_owned())
        .with_bounds(Array1::zeros(n), debts.clone());
    let sol = solve_lp(&problem)?;
    match sol.status {
        LpStatus::Optimal => {
            // Clamp solver fuzz back into the box before deriving flags.
            let p = Array1::from_iter(
                sol.x.iter().enumerate().map(|(i, &v)| v.max(0.0).min(debts[i])),
            );
            Ok(build_result(net, c, p, ClearingMethod::Lp, 0))
        }
        LpStatus::Infeasible => {
            let iterative = match max_clearing_iterative(net, c, ITER_TOL, default_max_iter(net)) {
                Ok(r) => r,
                Err(ClearingError::MaxIterExceeded { last, .. }) => *last,
                Err(e) => return Err(e),
            };
            Err(ClearingError::InsolventToExternal {
                fallback: Box::new(iterative),
            })
        }
        LpStatus::Unbounded => Err(ClearingError::Lp(lpcore::LpError::NumericalFailure(
            "clearing LP reported unbounded despite box bounds".into(),
        ))),
    }
}

/// Total unpaid debt `1^T (p_bar - p)` for a payment vector inside the box
/// `[0, p_bar]` (tolerance 1e-9 per component).
pub fn system_loss(net: &FinancialNetwork, p: &[f64]) -> Result<f64, ClearingError> {
    if p.len() != net.n() {
        return Err(ClearingError::OutOfRange {
            index: p.len().min(net.n()),
            value: f64::NAN,
        });
    }
    let debts = net.debts();
    for (i, &v) in p.iter().enumerate() {
        if !v.is_finite() || v < -1e-9 || v > debts[i] + 1e-9 {
            return Err(ClearingError::OutOfRange { index: i, value: v });
        }
    }
    Ok((debts.sum() - p.iter().sum::<f64>()).max(0.0))
}
