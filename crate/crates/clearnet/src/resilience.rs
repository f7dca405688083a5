//! Resilience margins: how large a price perturbation the network absorbs
//! without any default (`epsilon_star`), and without any insolvency to the
//! external sector (`epsilon_ub`).
//!
//! Both margins measure the perturbation ball in a chosen norm. The default
//! margin has the closed form `min_i net_worth_i / s_i` with
//! `s_i = ||row i of shares||` in the dual norm; the insolvency margin is
//! the optimum of a small LP. Banks with `s_i = 0` have no price exposure
//! and never constrain either margin.

use ndarray::{Array1, Array2};
use serde::Serialize;
use thiserror::Error;

use crate::lpcore::{self, solve_lp, LpProblem, LpStatus, Sense};
use crate::model::{FinancialNetwork, NormKind, PricePerturbation};

/// Indices within this relative distance of the extremum count as tied.
pub const TIE_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum MarginError {
    /// Some bank has nonpositive nominal net worth, so a default exists
    /// before any perturbation and the default margin is undefined.
    #[error("bank defaults under nominal conditions; margin undefined")]
    NominalDefault { net_worth: Vec<f64> },
    /// Clearing is infeasible already at zero perturbation.
    #[error("clearing infeasible at nominal prices")]
    InfeasibleAtZero,
    #[error(transparent)]
    Lp(#[from] lpcore::LpError),
}

/// The default resilience margin with the banks and assets attaining it.
#[derive(Clone, Debug, Serialize)]
pub struct MarginReport {
    pub norm: NormKind,
    /// `+inf` when no bank holds any asset exposure.
    #[serde(serialize_with = "crate::jsonf::extended")]
    pub epsilon_star: f64,
    /// Banks whose net worth / exposure ratio attains the margin.
    pub critical_banks: Vec<usize>,
    /// For the l1 ball only: per critical bank, the assets of maximal
    /// absolute exposure (the perturbation concentrates there). Empty for
    /// the linf ball, where every asset moves at once.
    pub critical_assets: Vec<Vec<usize>>,
    /// A perturbation of magnitude `epsilon_star` driving some bank's net
    /// worth to exactly zero; absent when the margin is infinite.
    pub witness: Option<PricePerturbation>,
}

/// Per-bank exposure sizes `s_i`: the dual-norm length of bank `i`'s share
/// row. The dual of linf is l1 and vice versa.
pub fn dual_norm_rows(net: &FinancialNetwork, norm: NormKind) -> Array1<f64> {
    let dual = norm.dual();
    Array1::from_iter(
        net.asset_shares()
            .rows()
            .into_iter()
            .map(|row| dual.vector_norm(row)),
    )
}

fn tied_minima(values: &[(usize, f64)], minimum: f64) -> Vec<usize> {
    values
        .iter()
        .filter(|(_, v)| (v - minimum).abs() <= TIE_TOL * (1.0 + minimum.abs()))
        .map(|(i, _)| *i)
        .collect()
}

/// Largest `epsilon` such that every perturbation with `||delta|| <=
/// epsilon` leaves all banks with nonnegative net worth.
pub fn default_margin(
    net: &FinancialNetwork,
    norm: NormKind,
) -> Result<MarginReport, MarginError> {
    let solvency = net.check_nominal_solvency();
    if !solvency.solvent {
        return Err(MarginError::NominalDefault {
            net_worth: solvency.net_worth,
        });
    }
    let s = dual_norm_rows(net, norm);
    let ratios: Vec<(usize, f64)> = s
        .iter()
        .enumerate()
        .filter(|(_, si)| **si > 0.0)
        .map(|(i, si)| (i, solvency.net_worth[i] / si))
        .collect();
    let Some(epsilon_star) = ratios
        .iter()
        .map(|(_, v)| *v)
        .min_by(|a, b| a.total_cmp(b))
    else {
        // No bank is exposed to prices at all.
        return Ok(MarginReport {
            norm,
            epsilon_star: f64::INFINITY,
            critical_banks: Vec::new(),
            critical_assets: Vec::new(),
            witness: None,
        });
    };
    let critical_banks = tied_minima(&ratios, epsilon_star);
    let shares = net.asset_shares();
    let m = net.m();

    let critical_assets: Vec<Vec<usize>> = match norm {
        NormKind::Linf => Vec::new(),
        NormKind::L1 => critical_banks
            .iter()
            .map(|&i| {
                let row = shares.row(i);
                let peak = row.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
                (0..m)
                    .filter(|&j| (row[j].abs() - peak).abs() <= TIE_TOL * (1.0 + peak))
                    .collect()
            })
            .collect(),
    };

    // Witness from the lowest critical bank: the direction in the ball that
    // extracts its full exposure.
    let o = critical_banks[0];
    let row = shares.row(o);
    let delta = match norm {
        NormKind::Linf => (0..m)
            .map(|j| -epsilon_star * row[j].signum() * f64::from(row[j] != 0.0))
            .collect::<Vec<f64>>(),
        NormKind::L1 => {
            let assets = &critical_assets[0];
            let share = epsilon_star / assets.len() as f64;
            let mut d = vec![0.0; m];
            for &j in assets {
                d[j] = -share * row[j].signum();
            }
            d
        }
    };
    Ok(MarginReport {
        norm,
        epsilon_star,
        critical_banks,
        critical_assets,
        witness: Some(PricePerturbation::new(delta, norm)),
    })
}

/// Largest `epsilon` such that clearing stays feasible for every
/// perturbation in the ball: the optimum of
/// `max eps  s.t.  0 <= p <= debts,  (I - A^T) p + eps * s <= inflow`.
/// Returns `+inf` when no bank is exposed (the LP is unbounded).
pub fn insolvency_margin(net: &FinancialNetwork, norm: NormKind) -> Result<f64, MarginError> {
    let n = net.n();
    let s = dual_norm_rows(net, norm);
    let mut g = Array2::<f64>::zeros((n, n + 1));
    let pro_rata = net.pro_rata();
    for i in 0..n {
        for j in 0..n {
            g[(i, j)] = -pro_rata[(j, i)];
        }
        g[(i, i)] += 1.0;
        g[(i, n)] = s[i];
    }
    let mut cost = Array1::<f64>::zeros(n + 1);
    cost[n] = 1.0;
    let mut lower = Array1::<f64>::zeros(n + 1);
    let mut upper = Array1::<f64>::from_elem(n + 1, f64::INFINITY);
    for i in 0..n {
        lower[i] = 0.0;
        upper[i] = net.debts()[i];
    }
    let problem = LpProblem::new(Sense::Maximize, cost)
        .with_ineq(g, net.nominal_inflow().to_owned())
        .with_bounds(lower, upper);
    let sol = solve_lp(&problem)?;
    match sol.status {
        LpStatus::Optimal => Ok(sol.objective.max(0.0)),
        LpStatus::Unbounded => Ok(f64::INFINITY),
        LpStatus::Infeasible => Err(MarginError::InfeasibleAtZero),
    }
}
