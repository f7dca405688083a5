//! Dense linear programming core.
//!
//! Problems are stated over variables `x` with optional box bounds:
//!
//! ```text
//!   minimize / maximize   cost . x
//!   subject to            G x <= h,    E x = f,    lower <= x <= upper
//! ```
//!
//! Bounds may be infinite on either side. The solver is a two-phase dense
//! primal simplex on the slack/artificial standard form; it prices with
//! Dantzig's rule and switches permanently to Bland's rule once the objective
//! stalls, which makes every run deterministic for identical input.
//!
//! Dual conventions, stated once and tested:
//!
//! * `dual_ineq[k] >= 0` for every `G` row, under both senses. The value is
//!   the sensitivity of the optimum to `h[k]`: for a minimization it is
//!   `-d(obj)/d(h[k])`, for a maximization `+d(obj)/d(h[k])`.
//! * `dual_eq[k]` is unrestricted in sign, with the same orientation.
//! * On `Infeasible`, the solution carries a Farkas certificate: multipliers
//!   that aggregate the rows into a single inequality no point in the box can
//!   satisfy ([`FarkasCertificate::gap`] is strictly positive).
//! * On `Unbounded`, the solution carries a feasible point and an improving
//!   ray.
//!
//! Tolerances used by callers and tests live here as named constants.

mod simplex;

use ndarray::{Array1, Array2};
use thiserror::Error;

/// Absolute feasibility tolerance for primal constraint residuals.
pub const FEASIBILITY_TOL: f64 = 1e-8;
/// Relative duality-gap tolerance: `|primal - dual| <= tol * (1 + |primal|)`.
pub const DUALITY_GAP_RTOL: f64 = 1e-7;
/// Tolerance on complementary slackness products.
pub const COMPLEMENTARITY_TOL: f64 = 1e-7;

/// Optimization direction.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

/// Solver outcome classification.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Error)]
pub enum LpError {
    /// Inconsistent dimensions, non-finite coefficients, or crossed bounds.
    #[error("invalid linear program: {0}")]
    InvalidProblem(String),
    /// Pivot breakdown or a violated post-solve check after the
    /// anti-cycling fallback already engaged.
    #[error("numerical failure in LP solve: {0}")]
    NumericalFailure(String),
}

/// A dense LP. Rows of `g` are `<=` constraints, rows of `e` equalities.
#[derive(Clone, Debug)]
pub struct LpProblem {
    pub sense: Sense,
    pub cost: Array1<f64>,
    pub g: Array2<f64>,
    pub h: Array1<f64>,
    pub e: Array2<f64>,
    pub f: Array1<f64>,
    pub lower: Array1<f64>,
    pub upper: Array1<f64>,
}

impl LpProblem {
    /// A problem with no constraints yet and free variables.
    pub fn new(sense: Sense, cost: Array1<f64>) -> Self {
        let n = cost.len();
        LpProblem {
            sense,
            cost,
            g: Array2::zeros((0, n)),
            h: Array1::zeros(0),
            e: Array2::zeros((0, n)),
            f: Array1::zeros(0),
            lower: Array1::from_elem(n, f64::NEG_INFINITY),
            upper: Array1::from_elem(n, f64::INFINITY),
        }
    }

    pub fn minimize(cost: Array1<f64>) -> Self {
        Self::new(Sense::Minimize, cost)
    }

    pub fn maximize(cost: Array1<f64>) -> Self {
        Self::new(Sense::Maximize, cost)
    }

    pub fn with_ineq(mut self, g: Array2<f64>, h: Array1<f64>) -> Self {
        self.g = g;
        self.h = h;
        self
    }

    pub fn with_eq(mut self, e: Array2<f64>, f: Array1<f64>) -> Self {
        self.e = e;
        self.f = f;
        self
    }

    pub fn with_bounds(mut self, lower: Array1<f64>, upper: Array1<f64>) -> Self {
        self.lower = lower;
        self.upper = upper;
        self
    }

    pub fn num_vars(&self) -> usize {
        self.cost.len()
    }

    fn validate(&self) -> Result<(), LpError> {
        let n = self.num_vars();
        let bad = |msg: &str| Err(LpError::InvalidProblem(msg.to_string()));
        if self.g.ncols() != n && self.g.nrows() > 0 {
            return bad("inequality matrix column count differs from variable count");
        }
        if self.e.ncols() != n && self.e.nrows() > 0 {
            return bad("equality matrix column count differs from variable count");
        }
        if self.g.nrows() != self.h.len() {
            return bad("inequality rhs length differs from row count");
        }
        if self.e.nrows() != self.f.len() {
            return bad("equality rhs length differs from row count");
        }
        if self.lower.len() != n || self.upper.len() != n {
            return bad("bound vectors must match variable count");
        }
        let finite = |xs: &Array1<f64>| xs.iter().all(|v| v.is_finite());
        if !finite(&self.cost) || !finite(&self.h) || !finite(&self.f) {
            return bad("cost and right-hand sides must be finite");
        }
        if self.g.iter().chain(self.e.iter()).any(|v| !v.is_finite()) {
            return bad("constraint coefficients must be finite");
        }
        for j in 0..n {
            let (lo, up) = (self.lower[j], self.upper[j]);
            if lo.is_nan() || up.is_nan() {
                return bad("bounds must not be NaN");
            }
            if lo == f64::INFINITY || up == f64::NEG_INFINITY || lo > up {
                return bad("variable bounds are crossed or infinite the wrong way");
            }
        }
        Ok(())
    }
}

/// Farkas infeasibility certificate over the original rows.
///
/// The multipliers aggregate `G x <= h` and `E x = f` into
/// `w . x <= rho` with `w = G^T y_ineq + E^T y_eq` and
/// `rho = y_ineq . h + y_eq . f`; infeasibility is proven when even the
/// box minimum of `w . x` exceeds `rho`.
#[derive(Clone, Debug)]
pub struct FarkasCertificate {
    pub y_ineq: Array1<f64>,
    pub y_eq: Array1<f64>,
}

impl FarkasCertificate {
    /// `min_box(w . x) - rho`; strictly positive for a valid certificate,
    /// `-inf` when the multipliers fail to bound the box minimum.
    pub fn gap(&self, p: &LpProblem) -> f64 {
        let n = p.num_vars();
        let mut w = Array1::<f64>::zeros(n);
        for (k, row) in p.g.rows().into_iter().enumerate() {
            for j in 0..n {
                w[j] += self.y_ineq[k] * row[j];
            }
        }
        for (k, row) in p.e.rows().into_iter().enumerate() {
            for j in 0..n {
                w[j] += self.y_eq[k] * row[j];
            }
        }
        let rho = self.y_ineq.dot(&p.h) + self.y_eq.dot(&p.f);
        let mut lo_sum = 0.0;
        for j in 0..n {
            let wj = w[j];
            if wj.abs() <= 1e-12 {
                continue;
            }
            let at = if wj > 0.0 { p.lower[j] } else { p.upper[j] };
            if !at.is_finite() {
                return f64::NEG_INFINITY;
            }
            lo_sum += wj * at;
        }
        lo_sum - rho
    }
}

/// Solver result. `x`, duals, and `objective` are meaningful for `Optimal`;
/// `Infeasible` carries the Farkas certificate (and `objective = +inf` for a
/// minimization, `-inf` for a maximization); `Unbounded` carries a feasible
/// point in `x` plus an improving `ray` (and the opposite infinities).
#[derive(Clone, Debug)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Array1<f64>,
    pub dual_ineq: Array1<f64>,
    pub dual_eq: Array1<f64>,
    pub objective: f64,
    pub ray: Option<Array1<f64>>,
    pub farkas: Option<FarkasCertificate>,
}

impl LpSolution {
    /// Largest violation of `G x <= h`, `E x = f`, and the box bounds.
    pub fn primal_infeasibility(&self, p: &LpProblem) -> f64 {
        let mut worst: f64 = 0.0;
        let gx = p.g.dot(&self.x);
        for k in 0..p.h.len() {
            worst = worst.max(gx[k] - p.h[k]);
        }
        let ex = p.e.dot(&self.x);
        for k in 0..p.f.len() {
            worst = worst.max((ex[k] - p.f[k]).abs());
        }
        for j in 0..p.num_vars() {
            worst = worst.max(p.lower[j] - self.x[j]);
            worst = worst.max(self.x[j] - p.upper[j]);
        }
        worst
    }

    /// Largest complementary-slackness product `dual_ineq[k] * slack[k]`.
    pub fn complementarity(&self, p: &LpProblem) -> f64 {
        let gx = p.g.dot(&self.x);
        let mut worst: f64 = 0.0;
        for k in 0..p.h.len() {
            worst = worst.max((self.dual_ineq[k] * (p.h[k] - gx[k])).abs());
        }
        worst
    }

    /// `|primal objective - dual objective|` in the minimization orientation.
    /// Uses the Lagrangian box dual, so internal bound multipliers are not
    /// needed. `+inf` when the duals fail to bound the problem.
    pub fn duality_gap(&self, p: &LpProblem) -> f64 {
        let n = p.num_vars();
        // Fold to minimization: internal cost and internal objective.
        let sgn = match p.sense {
            Sense::Minimize => 1.0,
            Sense::Maximize => -1.0,
        };
        let mut w = Array1::<f64>::zeros(n);
        for j in 0..n {
            w[j] = sgn * p.cost[j];
        }
        for (k, row) in p.g.rows().into_iter().enumerate() {
            for j in 0..n {
                w[j] += self.dual_ineq[k] * row[j];
            }
        }
        for (k, row) in p.e.rows().into_iter().enumerate() {
            for j in 0..n {
                w[j] += self.dual_eq[k] * row[j];
            }
        }
        let mut dual_obj = -self.dual_ineq.dot(&p.h) - self.dual_eq.dot(&p.f);
        for j in 0..n {
            let wj = w[j];
            if wj.abs() <= 1e-12 {
                continue;
            }
            let at = if wj > 0.0 { p.lower[j] } else { p.upper[j] };
            if !at.is_finite() {
                return f64::INFINITY;
            }
            dual_obj += wj * at;
        }
        (sgn * self.objective - dual_obj).abs()
    }
}

/// Solve a dense LP. Deterministic: identical input yields the identical
/// sequence of pivots and the identical solution.
pub fn solve_lp(problem: &LpProblem) -> Result<LpSolution, LpError> {
    problem.validate()?;
    let sol = simplex::solve(problem)?;
    if sol.status == LpStatus::Optimal {
        // Post-solve sanity: reject a "solution" that badly violates its own
        // certificates rather than hand it to callers.
        let scale = 1.0 + sol.objective.abs();
        if sol.primal_infeasibility(problem) > 10.0 * FEASIBILITY_TOL * scale {
            return Err(LpError::NumericalFailure(
                "primal residual beyond tolerance after solve".into(),
            ));
        }
        if sol.duality_gap(problem) > 10.0 * DUALITY_GAP_RTOL * scale {
            return Err(LpError::NumericalFailure(
                "duality gap beyond tolerance after solve".into(),
            ));
        }
    }
    Ok(sol)
}

/// Numerical rank via column-pivoted Householder triangularization: the
/// number of pivot magnitudes exceeding `rel_tol` times the largest pivot.
pub fn matrix_rank(m: &Array2<f64>, rel_tol: f64) -> usize {
    let (rows, cols) = (m.nrows(), m.ncols());
    if rows == 0 || cols == 0 {
        return 0;
    }
    let mut a = m.clone();
    let kmax = rows.min(cols);
    let mut pivots = Vec::with_capacity(kmax);
    for k in 0..kmax {
        // Pivot: bring the remaining column with the largest tail norm to k.
        let mut best = k;
        let mut best_norm = -1.0;
        for j in k..cols {
            let norm: f64 = (k..rows).map(|i| a[(i, j)] * a[(i, j)]).sum();
            if norm > best_norm {
                best_norm = norm;
                best = j;
            }
        }
        if best != k {
            for i in 0..rows {
                a.swap((i, k), (i, best));
            }
        }
        let norm = best_norm.max(0.0).sqrt();
        pivots.push(norm);
        if norm == 0.0 {
            break;
        }
        // Householder vector for column k, applied to the trailing block.
        let alpha = if a[(k, k)] >= 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = (k..rows).map(|i| a[(i, k)]).collect();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|t| t * t).sum();
        if vnorm2 > 0.0 {
            for j in k..cols {
                let dot: f64 = (k..rows).map(|i| v[i - k] * a[(i, j)]).sum();
                let scale = 2.0 * dot / vnorm2;
                for i in k..rows {
                    a[(i, j)] -= scale * v[i - k];
                }
            }
        }
        a[(k, k)] = alpha;
    }
    let largest = pivots.first().copied().unwrap_or(0.0);
    if largest == 0.0 {
        return 0;
    }
    pivots.iter().filter(|p| **p > rel_tol * largest).count()
}
