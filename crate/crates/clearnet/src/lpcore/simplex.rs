//! Two-phase dense primal simplex over the slack/artificial standard form.
//!
//! Conversion: every variable is shifted, mirrored, or split so the internal
//! variables are nonnegative; finite double bounds add one internal row;
//! every inequality row gains a slack; rows are sign-flipped to a nonnegative
//! right-hand side; every row gains an artificial column. The artificial
//! block therefore starts as the identity and holds `B^{-1}` throughout,
//! which is where duals are read off.

use ndarray::{Array1, Array2};

use super::{FarkasCertificate, LpError, LpProblem, LpSolution, LpStatus, Sense};

/// Entries smaller than this are unusable as pivots.
const PIVOT_TOL: f64 = 1e-9;
/// Reduced costs above `-RCOST_TOL` count as optimal.
const RCOST_TOL: f64 = 1e-9;
/// Phase-1 objective below this certifies feasibility.
const PHASE1_TOL: f64 = 1e-8;
/// Consecutive non-improving pivots before switching to Bland's rule.
const STALL_LIMIT: usize = 64;

#[derive(Clone, Copy)]
enum VarMap {
    /// `x = lo + z`
    Shift { col: usize, lo: f64 },
    /// `x = up - z`
    Mirror { col: usize, up: f64 },
    /// `x = z_pos - z_neg`
    Split { pos: usize, neg: usize },
}

#[derive(Clone, Copy)]
enum RowKind {
    Ineq(usize),
    Bound,
    Eq(usize),
}

struct Standard {
    tab: Array2<f64>,   // nrows x (ncols + 1), rhs in the last column
    nrows: usize,
    ncols: usize,       // structural + slack + artificial
    nz: usize,          // structural (transformed) columns
    art0: usize,        // first artificial column
    kinds: Vec<RowKind>,
    sigma: Vec<f64>,    // row sign flips applied to reach rhs >= 0
    maps: Vec<VarMap>,
    cost_z: Vec<f64>,   // internal (minimization) cost over structural columns
    cost_const: f64,    // internal cost contribution of the offsets
}

fn build(p: &LpProblem) -> Standard {
    let n = p.num_vars();
    let sgn = match p.sense {
        Sense::Minimize => 1.0,
        Sense::Maximize => -1.0,
    };

    let mut maps = Vec::with_capacity(n);
    let mut nz = 0usize;
    let mut bound_rows: Vec<(usize, f64)> = Vec::new(); // (column, width)
    for j in 0..n {
        let (lo, up) = (p.lower[j], p.upper[j]);
        let map = match (lo.is_finite(), up.is_finite()) {
            (true, false) => VarMap::Shift { col: nz, lo },
            (true, true) => {
                bound_rows.push((nz, up - lo));
                VarMap::Shift { col: nz, lo }
            }
            (false, true) => VarMap::Mirror { col: nz, up },
            (false, false) => {
                let m = VarMap::Split { pos: nz, neg: nz + 1 };
                nz += 1;
                m
            }
        };
        nz += 1;
        maps.push(map);
    }

    let mg = p.g.nrows();
    let me = p.e.nrows();
    let nb = bound_rows.len();
    let nrows = mg + nb + me;
    let nslack = mg + nb;
    let art0 = nz + nslack;
    let ncols = art0 + nrows;

    let mut tab = Array2::<f64>::zeros((nrows, ncols + 1));
    let mut kinds = Vec::with_capacity(nrows);
    let mut sigma = vec![1.0; nrows];

    let fill_row = |tab: &mut Array2<f64>, r: usize, coeffs: &dyn Fn(usize) -> f64, rhs: f64| {
        let mut b = rhs;
        for j in 0..n {
            let a = coeffs(j);
            if a == 0.0 {
                continue;
            }
            match maps[j] {
                VarMap::Shift { col, lo } => {
                    tab[(r, col)] += a;
                    b -= a * lo;
                }
                VarMap::Mirror { col, up } => {
                    tab[(r, col)] -= a;
                    b -= a * up;
                }
                VarMap::Split { pos, neg } => {
                    tab[(r, pos)] += a;
                    tab[(r, neg)] -= a;
                }
            }
        }
        tab[(r, ncols)] = b;
    };

    let mut r = 0usize;
    for k in 0..mg {
        let row = p.g.row(k);
        fill_row(&mut tab, r, &|j| row[j], p.h[k]);
        tab[(r, nz + r)] = 1.0; // slack
        kinds.push(RowKind::Ineq(k));
        r += 1;
    }
    for (col, width) in &bound_rows {
        tab[(r, *col)] = 1.0;
        tab[(r, ncols)] = *width;
        tab[(r, nz + r)] = 1.0; // slack
        kinds.push(RowKind::Bound);
        r += 1;
    }
    for k in 0..me {
        let row = p.e.row(k);
        fill_row(&mut tab, r, &|j| row[j], p.f[k]);
        kinds.push(RowKind::Eq(k));
        r += 1;
    }

    for r in 0..nrows {
        if tab[(r, ncols)] < 0.0 {
            sigma[r] = -1.0;
            for c in 0..=ncols {
                tab[(r, c)] = -tab[(r, c)];
            }
        }
        tab[(r, art0 + r)] = 1.0;
    }

    let mut cost_z = vec![0.0; nz];
    let mut cost_const = 0.0;
    for j in 0..n {
        let cj = sgn * p.cost[j];
        if cj == 0.0 {
            continue;
        }
        match maps[j] {
            VarMap::Shift { col, lo } => {
                cost_z[col] += cj;
                cost_const += cj * lo;
            }
            VarMap::Mirror { col, up } => {
                cost_z[col] -= cj;
                cost_const += cj * up;
            }
            VarMap::Split { pos, neg } => {
                cost_z[pos] += cj;
                cost_z[neg] -= cj;
            }
        }
    }

    Standard {
        tab,
        nrows,
        ncols,
        nz,
        art0,
        kinds,
        sigma,
        maps,
        cost_z,
        cost_const,
    }
}

enum RunEnd {
    Optimal,
    Unbounded { entering: usize },
}

struct Engine<'a> {
    std: &'a mut Standard,
    basis: Vec<usize>,
    banned: Vec<bool>,
    bland: bool,
    pivots: usize,
    limit: usize,
}

impl<'a> Engine<'a> {
    fn new(std: &'a mut Standard) -> Self {
        let basis: Vec<usize> = (0..std.nrows).map(|r| std.art0 + r).collect();
        let banned = vec![false; std.ncols];
        let limit = 400 * (std.nrows + std.ncols) + 2000;
        Engine { std, basis, banned, bland: false, pivots: 0, limit }
    }

    fn rhs(&self, r: usize) -> f64 {
        self.std.tab[(r, self.std.ncols)]
    }

    fn objective(&self, cost: &[f64]) -> f64 {
        (0..self.std.nrows)
            .map(|r| cost[self.basis[r]] * self.rhs(r))
            .sum()
    }

    fn reduced_costs(&self, cost: &[f64]) -> Vec<f64> {
        let mut rc = cost.to_vec();
        for r in 0..self.std.nrows {
            let cb = cost[self.basis[r]];
            if cb == 0.0 {
                continue;
            }
            for c in 0..self.std.ncols {
                rc[c] -= cb * self.std.tab[(r, c)];
            }
        }
        rc
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let ncols = self.std.ncols;
        let piv = self.std.tab[(r, c)];
        for j in 0..=ncols {
            self.std.tab[(r, j)] /= piv;
        }
        self.std.tab[(r, c)] = 1.0;
        for i in 0..self.std.nrows {
            if i == r {
                continue;
            }
            let factor = self.std.tab[(i, c)];
            if factor == 0.0 {
                continue;
            }
            for j in 0..=ncols {
                self.std.tab[(i, j)] -= factor * self.std.tab[(r, j)];
            }
            self.std.tab[(i, c)] = 0.0;
        }
        let old = self.basis[r];
        if old >= self.std.art0 {
            self.banned[old] = true; // an artificial never re-enters
        }
        self.basis[r] = c;
        self.pivots += 1;
    }

    /// Degenerate pivot driving a basic artificial out of any row touched by
    /// the entering column; keeps artificials at exact zero during phase 2.
    fn kick_artificial(&mut self, entering: usize) -> bool {
        for r in 0..self.std.nrows {
            if self.basis[r] >= self.std.art0 && self.std.tab[(r, entering)].abs() > PIVOT_TOL {
                self.pivot(r, entering);
                return true;
            }
        }
        false
    }

    fn run(&mut self, cost: &[f64], phase2: bool) -> Result<RunEnd, LpError> {
        let mut stall = 0usize;
        let mut last_obj = self.objective(cost);
        loop {
            if self.pivots > self.limit {
                return Err(LpError::NumericalFailure(
                    "simplex iteration limit exceeded".into(),
                ));
            }
            let rc = self.reduced_costs(cost);
            let entering = if self.bland {
                (0..self.std.ncols).find(|&c| !self.banned[c] && rc[c] < -RCOST_TOL)
            } else {
                let mut best: Option<(usize, f64)> = None;
                for c in 0..self.std.ncols {
                    if self.banned[c] || rc[c] >= -RCOST_TOL {
                        continue;
                    }
                    if best.map_or(true, |(_, v)| rc[c] < v) {
                        best = Some((c, rc[c]));
                    }
                }
                best.map(|(c, _)| c)
            };
            let Some(entering) = entering else {
                return Ok(RunEnd::Optimal);
            };

            if phase2 && self.kick_artificial(entering) {
                continue;
            }

            // Ratio test over rows with a usable positive pivot.
            let mut min_ratio = f64::INFINITY;
            for r in 0..self.std.nrows {
                let a = self.std.tab[(r, entering)];
                if a > PIVOT_TOL {
                    min_ratio = min_ratio.min(self.rhs(r) / a);
                }
            }
            if !min_ratio.is_finite() {
                return Ok(RunEnd::Unbounded { entering });
            }
            let tie = min_ratio + 1e-10 * (1.0 + min_ratio.abs());
            let mut leave: Option<usize> = None;
            for r in 0..self.std.nrows {
                let a = self.std.tab[(r, entering)];
                if a <= PIVOT_TOL || self.rhs(r) / a > tie {
                    continue;
                }
                leave = Some(match leave {
                    None => r,
                    Some(cur) => {
                        if self.bland {
                            // Bland: lowest basis index leaves.
                            if self.basis[r] < self.basis[cur] { r } else { cur }
                        } else {
                            // Prefer kicking artificials, then the larger pivot.
                            let (ra, ca) = (self.basis[r] >= self.std.art0,
                                            self.basis[cur] >= self.std.art0);
                            if ra != ca {
                                if ra { r } else { cur }
                            } else if (self.std.tab[(r, entering)] - self.std.tab[(cur, entering)])
                                .abs() > 1e-12
                            {
                                if self.std.tab[(r, entering)] > self.std.tab[(cur, entering)] {
                                    r
                                } else {
                                    cur
                                }
                            } else if self.basis[r] < self.basis[cur] {
                                r
                            } else {
                                cur
                            }
                        }
                    }
                });
            }
            let leave = leave.expect("ratio test returned a row");
            self.pivot(leave, entering);

            let obj = self.objective(cost);
            if obj > last_obj - 1e-12 * (1.0 + last_obj.abs()) {
                stall += 1;
                if stall >= STALL_LIMIT {
                    self.bland = true;
                }
            } else {
                stall = 0;
            }
            last_obj = obj;
        }
    }

    /// After phase 1: swap basic artificials for structural columns where a
    /// usable pivot exists. Rows with no such pivot are redundant and keep
    /// their zero-valued artificial.
    fn expel_artificials(&mut self) {
        for r in 0..self.std.nrows {
            if self.basis[r] < self.std.art0 {
                continue;
            }
            let target = (0..self.std.art0)
                .find(|&c| !self.banned[c] && self.std.tab[(r, c)].abs() > PIVOT_TOL);
            if let Some(c) = target {
                self.pivot(r, c);
            }
        }
    }

    /// Duals of the standard-form rows for the given cost: `c_B^T B^{-1}`,
    /// read from the artificial block.
    fn standard_duals(&self, cost: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.std.nrows];
        for i in 0..self.std.nrows {
            let mut v = 0.0;
            for r in 0..self.std.nrows {
                let cb = cost[self.basis[r]];
                if cb != 0.0 {
                    v += cb * self.std.tab[(r, self.std.art0 + i)];
                }
            }
            y[i] = v;
        }
        y
    }

    fn structural_values(&self) -> Vec<f64> {
        let mut z = vec![0.0; self.std.nz];
        for r in 0..self.std.nrows {
            let c = self.basis[r];
            if c < self.std.nz {
                z[c] = self.rhs(r);
            }
        }
        z
    }
}

fn map_to_user(maps: &[VarMap], z: &[f64]) -> Array1<f64> {
    let mut x = Array1::<f64>::zeros(maps.len());
    for (j, map) in maps.iter().enumerate() {
        x[j] = match *map {
            VarMap::Shift { col, lo } => lo + z[col],
            VarMap::Mirror { col, up } => up - z[col],
            VarMap::Split { pos, neg } => z[pos] - z[neg],
        };
    }
    x
}

fn map_direction_to_user(maps: &[VarMap], dz: &[f64]) -> Array1<f64> {
    let mut d = Array1::<f64>::zeros(maps.len());
    for (j, map) in maps.iter().enumerate() {
        d[j] = match *map {
            VarMap::Shift { col, .. } => dz[col],
            VarMap::Mirror { col, .. } => -dz[col],
            VarMap::Split { pos, neg } => dz[pos] - dz[neg],
        };
    }
    d
}

/// Split standard-row duals back onto the original rows with the sign flips
/// undone. Internal bound rows are folded away (their effect reappears in the
/// Lagrangian box terms used by the verification helpers).
fn split_duals(std: &Standard, y_std: &[f64], p: &LpProblem) -> (Array1<f64>, Array1<f64>) {
    let mut y_ineq = Array1::<f64>::zeros(p.g.nrows());
    let mut y_eq = Array1::<f64>::zeros(p.e.nrows());
    for (i, kind) in std.kinds.iter().enumerate() {
        let v = -std.sigma[i] * y_std[i];
        match kind {
            RowKind::Ineq(k) => y_ineq[*k] = v,
            RowKind::Eq(k) => y_eq[*k] = v,
            RowKind::Bound => {}
        }
    }
    (y_ineq, y_eq)
}

pub(super) fn solve(p: &LpProblem) -> Result<LpSolution, LpError> {
    let mut std = build(p);
    let nrows = std.nrows;
    let ncols = std.ncols;
    let art0 = std.art0;

    let mut cost1 = vec![0.0; ncols];
    for c in art0..ncols {
        cost1[c] = 1.0;
    }

    let (min_inf, max_inf) = match p.sense {
        Sense::Minimize => (f64::INFINITY, f64::NEG_INFINITY),
        Sense::Maximize => (f64::NEG_INFINITY, f64::INFINITY),
    };

    let mut eng = Engine::new(&mut std);
    match eng.run(&cost1, false)? {
        RunEnd::Optimal => {}
        RunEnd::Unbounded { .. } => {
            return Err(LpError::NumericalFailure(
                "phase 1 reported unbounded".into(),
            ));
        }
    }
    if eng.objective(&cost1) > PHASE1_TOL {
        let y_std = eng.standard_duals(&cost1);
        let (y_ineq, y_eq) = split_duals(eng.std, &y_std, p);
        let cert = FarkasCertificate { y_ineq, y_eq };
        return Ok(LpSolution {
            status: LpStatus::Infeasible,
            x: Array1::zeros(p.num_vars()),
            dual_ineq: Array1::zeros(p.g.nrows()),
            dual_eq: Array1::zeros(p.e.nrows()),
            objective: min_inf,
            ray: None,
            farkas: Some(cert),
        });
    }
    eng.expel_artificials();

    let mut cost2 = vec![0.0; ncols];
    cost2[..eng.std.nz].copy_from_slice(&eng.std.cost_z);
    for c in art0..ncols {
        eng.banned[c] = true;
    }

    match eng.run(&cost2, true)? {
        RunEnd::Optimal => {
            let z = eng.structural_values();
            let x = map_to_user(&eng.std.maps, &z);
            let internal_obj = eng.objective(&cost2) + eng.std.cost_const;
            let y_std = eng.standard_duals(&cost2);
            let (dual_ineq, dual_eq) = split_duals(eng.std, &y_std, p);
            let objective = match p.sense {
                Sense::Minimize => internal_obj,
                Sense::Maximize => -internal_obj,
            };
            Ok(LpSolution {
                status: LpStatus::Optimal,
                x,
                dual_ineq,
                dual_eq,
                objective,
                ray: None,
                farkas: None,
            })
        }
        RunEnd::Unbounded { entering } => {
            let mut dz = vec![0.0; eng.std.nz];
            let mut dz_full = vec![0.0; eng.std.ncols];
            dz_full[entering] = 1.0;
            for r in 0..nrows {
                let c = eng.basis[r];
                dz_full[c] = -eng.std.tab[(r, entering)];
            }
            for c in 0..eng.std.nz {
                dz[c] = dz_full[c];
            }
            let z = eng.structural_values();
            let x = map_to_user(&eng.std.maps, &z);
            let ray = map_direction_to_user(&eng.std.maps, &dz);
            Ok(LpSolution {
                status: LpStatus::Unbounded,
                x,
                dual_ineq: Array1::zeros(p.g.nrows()),
                dual_eq: Array1::zeros(p.e.nrows()),
                objective: max_inf,
                ray: Some(ray),
                farkas: None,
            })
        }
    }
}
