//! Network data model.
//!
//! A financial network has `n` banks and `m` marketable assets. Bank `i`
//! owes bank `j` the fixed amount `liabilities[i][j]`; the row sum is the
//! bank's total interbank debt `p_bar[i]`. Each bank also has nonnegative
//! external inflows and outflows (the external sector is senior, so the net
//! flow may leave a bank cash-negative) and holds `asset_shares[i][j]` units
//! of asset `j`, marked at `nominal_prices[j]`. Units can be negative to
//! model short positions.
//!
//! Derived on construction:
//!
//! * `p_bar = liabilities . 1` (total nominal debt),
//! * the pro-rata matrix `A` with `a_ij = liabilities[i][j] / p_bar[i]`
//!   for indebted banks and `a_ii = 1` for banks with no interbank debt,
//!   re-normalized so each row sums to one,
//! * `c_bar = inflows - outflows + asset_shares . nominal_prices`, the cash
//!   each bank has before interbank payments at nominal prices.
//!
//! The nominal net worth is `r_bar = c_bar + (A^T - I) p_bar`; the system is
//! *nominally solvent* when `r_bar > 0` strictly, which is the standing
//! assumption behind the margin analyses.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Per-row tolerance on pro-rata row sums; rows are re-normalized on load so
/// sums land within this of one.
pub const ROW_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("negative liability at ({row}, {col}): {value}")]
    NegativeLiability { row: usize, col: usize, value: f64 },
    #[error("nonzero diagonal liability at bank {index}: {value}")]
    NonzeroDiagonal { index: usize, value: f64 },
    #[error("negative entry in {field} at index {index}: {value}")]
    NegativeEntry { field: &'static str, index: usize, value: f64 },
    #[error("non-finite entry in {field}")]
    NonFinite { field: &'static str },
    #[error("invalid network JSON: {0}")]
    Json(String),
}

/// Which norm measures a price perturbation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum NormKind {
    #[serde(rename = "l1")]
    L1,
    #[serde(rename = "linf")]
    Linf,
}

impl NormKind {
    /// The dual norm: l1 and linf are dual to each other.
    pub fn dual(self) -> NormKind {
        match self {
            NormKind::L1 => NormKind::Linf,
            NormKind::Linf => NormKind::L1,
        }
    }

    pub fn vector_norm(self, v: ArrayView1<'_, f64>) -> f64 {
        match self {
            NormKind::L1 => v.iter().map(|x| x.abs()).sum(),
            NormKind::Linf => v.iter().fold(0.0_f64, |acc, x| acc.max(x.abs())),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            NormKind::L1 => "l1",
            NormKind::Linf => "linf",
        }
    }
}

/// A price move `delta` with its measuring norm and recorded magnitude.
#[derive(Clone, Debug, Serialize)]
pub struct PricePerturbation {
    pub delta: Vec<f64>,
    pub norm: NormKind,
    pub magnitude: f64,
}

impl PricePerturbation {
    /// Records the magnitude from `delta`, so the stored value always matches
    /// a recomputation.
    pub fn new(delta: Vec<f64>, norm: NormKind) -> Self {
        let magnitude = norm.vector_norm(ArrayView1::from(&delta));
        PricePerturbation { delta, norm, magnitude }
    }
}

/// Raw JSON form of a network file. Field names are the file schema; unknown
/// keys are rejected.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkInput {
    pub nodes: Vec<String>,
    pub liabilities: Vec<Vec<f64>>,
    pub external_inflows: Vec<f64>,
    pub external_outflows: Vec<f64>,
    pub asset_shares: Vec<Vec<f64>>,
    pub nominal_prices: Vec<f64>,
}

impl NetworkInput {
    pub fn from_json_str(text: &str) -> Result<Self, ModelError> {
        serde_json::from_str(text).map_err(|e| ModelError::Json(e.to_string()))
    }
}

/// Validated network with derived quantities.
#[derive(Clone, Debug)]
pub struct FinancialNetwork {
    node_names: Vec<String>,
    liabilities: Array2<f64>,
    external_inflows: Array1<f64>,
    external_outflows: Array1<f64>,
    asset_shares: Array2<f64>,
    nominal_prices: Array1<f64>,
    // derived
    debts: Array1<f64>,
    pro_rata: Array2<f64>,
    nominal_inflow: Array1<f64>,
}

/// Result of the nominal solvency check: `solvent` iff every component of
/// the nominal net worth `r_bar` is strictly positive.
#[derive(Clone, Debug, Serialize)]
pub struct NominalSolvency {
    pub solvent: bool,
    pub net_worth: Vec<f64>,
}

fn to_matrix(rows: &[Vec<f64>], what: &'static str, ncols: usize) -> Result<Array2<f64>, ModelError> {
    let nrows = rows.len();
    let mut m = Array2::<f64>::zeros((nrows, ncols));
    for (i, row) in rows.iter().enumerate() {
        if row.len() != ncols {
            return Err(ModelError::DimensionMismatch(format!(
                "{what} row {i} has {} entries, expected {ncols}",
                row.len()
            )));
        }
        for (j, v) in row.iter().enumerate() {
            m[(i, j)] = *v;
        }
    }
    Ok(m)
}

impl FinancialNetwork {
    /// Validate a parsed file and derive `p_bar`, `A`, and `c_bar`.
    pub fn build(input: NetworkInput) -> Result<Self, ModelError> {
        let n = input.nodes.len();
        let m = input.nominal_prices.len();
        if n == 0 {
            return Err(ModelError::DimensionMismatch("at least one node required".into()));
        }
        if m == 0 {
            return Err(ModelError::DimensionMismatch("at least one asset required".into()));
        }
        if input.liabilities.len() != n {
            return Err(ModelError::DimensionMismatch(format!(
                "liabilities has {} rows, expected {n}",
                input.liabilities.len()
            )));
        }
        if input.asset_shares.len() != n {
            return Err(ModelError::DimensionMismatch(format!(
                "asset_shares has {} rows, expected {n}",
                input.asset_shares.len()
            )));
        }
        if input.external_inflows.len() != n || input.external_outflows.len() != n {
            return Err(ModelError::DimensionMismatch(
                "external flow vectors must have one entry per node".into(),
            ));
        }
        let liabilities = to_matrix(&input.liabilities, "liabilities", n)?;
        let asset_shares = to_matrix(&input.asset_shares, "asset_shares", m)?;
        let external_inflows = Array1::from(input.external_inflows);
        let external_outflows = Array1::from(input.external_outflows);
        let nominal_prices = Array1::from(input.nominal_prices);
        Self::from_parts(
            input.nodes,
            liabilities,
            external_inflows,
            external_outflows,
            asset_shares,
            nominal_prices,
        )
    }

    pub fn from_json_str(text: &str) -> Result<Self, ModelError> {
        Self::build(NetworkInput::from_json_str(text)?)
    }

    /// Validate already-shaped arrays and derive the network quantities.
    pub fn from_parts(
        node_names: Vec<String>,
        liabilities: Array2<f64>,
        external_inflows: Array1<f64>,
        external_outflows: Array1<f64>,
        asset_shares: Array2<f64>,
        nominal_prices: Array1<f64>,
    ) -> Result<Self, ModelError> {
        let n = node_names.len();
        let m = nominal_prices.len();
        if n == 0 || m == 0 {
            return Err(ModelError::DimensionMismatch(
                "at least one node and one asset required".into(),
            ));
        }
        if liabilities.nrows() != n || liabilities.ncols() != n {
            return Err(ModelError::DimensionMismatch(format!(
                "liabilities is {}x{}, expected {n}x{n}",
                liabilities.nrows(),
                liabilities.ncols()
            )));
        }
        if asset_shares.nrows() != n || asset_shares.ncols() != m {
            return Err(ModelError::DimensionMismatch(format!(
                "asset_shares is {}x{}, expected {n}x{m}",
                asset_shares.nrows(),
                asset_shares.ncols()
            )));
        }
        if external_inflows.len() != n || external_outflows.len() != n {
            return Err(ModelError::DimensionMismatch(
                "external flow vectors must have one entry per node".into(),
            ));
        }
        if liabilities.iter().any(|v| !v.is_finite()) {
            return Err(ModelError::NonFinite { field: "liabilities" });
        }
        if asset_shares.iter().any(|v| !v.is_finite()) {
            return Err(ModelError::NonFinite { field: "asset_shares" });
        }
        for (field, vec) in [
            ("external_inflows", &external_inflows),
            ("external_outflows", &external_outflows),
            ("nominal_prices", &nominal_prices),
        ] {
            if vec.iter().any(|v| !v.is_finite()) {
                return Err(ModelError::NonFinite { field });
            }
            if let Some((index, value)) = vec.iter().enumerate().find(|(_, v)| **v < 0.0) {
                return Err(ModelError::NegativeEntry { field, index, value: *value });
            }
        }
        for i in 0..n {
            for j in 0..n {
                let v = liabilities[(i, j)];
                if i == j && v != 0.0 {
                    return Err(ModelError::NonzeroDiagonal { index: i, value: v });
                }
                if v < 0.0 {
                    return Err(ModelError::NegativeLiability { row: i, col: j, value: v });
                }
            }
        }

        let debts: Array1<f64> = liabilities.rows().into_iter().map(|r| r.sum()).collect();
        let mut pro_rata = Array2::<f64>::zeros((n, n));
        for i in 0..n {
            if debts[i] > 0.0 {
                for j in 0..n {
                    pro_rata[(i, j)] = liabilities[(i, j)] / debts[i];
                }
                // One re-normalization pass keeps row sums within ROW_SUM_TOL.
                let sum: f64 = pro_rata.row(i).sum();
                for j in 0..n {
                    pro_rata[(i, j)] /= sum;
                }
            } else {
                pro_rata[(i, i)] = 1.0;
            }
        }

        let nominal_inflow =
            &external_inflows - &external_outflows + asset_shares.dot(&nominal_prices);

        Ok(FinancialNetwork {
            node_names,
            liabilities,
            external_inflows,
            external_outflows,
            asset_shares,
            nominal_prices,
            debts,
            pro_rata,
            nominal_inflow,
        })
    }

    pub fn n(&self) -> usize {
        self.node_names.len()
    }

    pub fn m(&self) -> usize {
        self.nominal_prices.len()
    }

    pub fn node_names(&self) -> &[String] {
        &self.node_names
    }

    pub fn liabilities(&self) -> ArrayView2<'_, f64> {
        self.liabilities.view()
    }

    /// Total nominal interbank debt per bank (`p_bar`).
    pub fn debts(&self) -> ArrayView1<'_, f64> {
        self.debts.view()
    }

    /// Pro-rata payment shares (`A`); row-stochastic, with `a_ii = 1` for
    /// banks without interbank debt.
    pub fn pro_rata(&self) -> ArrayView2<'_, f64> {
        self.pro_rata.view()
    }

    pub fn asset_shares(&self) -> ArrayView2<'_, f64> {
        self.asset_shares.view()
    }

    pub fn nominal_prices(&self) -> ArrayView1<'_, f64> {
        self.nominal_prices.view()
    }

    /// Net external cash flow `inflows - outflows` (may be negative).
    pub fn net_external_flow(&self) -> Array1<f64> {
        &self.external_inflows - &self.external_outflows
    }

    /// Cash before interbank payments at nominal prices (`c_bar`).
    pub fn nominal_inflow(&self) -> ArrayView1<'_, f64> {
        self.nominal_inflow.view()
    }

    /// Cash before interbank payments after the price move `delta`:
    /// `c_bar + asset_shares . delta`. Affine in `delta`.
    pub fn perturbed_inflow(&self, delta: &[f64]) -> Result<Array1<f64>, ModelError> {
        if delta.len() != self.m() {
            return Err(ModelError::DimensionMismatch(format!(
                "delta has {} entries, expected {}",
                delta.len(),
                self.m()
            )));
        }
        if delta.iter().any(|v| !v.is_finite()) {
            return Err(ModelError::NonFinite { field: "delta" });
        }
        Ok(&self.nominal_inflow + &self.asset_shares.dot(&ArrayView1::from(delta)))
    }

    /// Nominal net worth `r_bar = c_bar + (A^T - I) p_bar` and whether it is
    /// strictly positive everywhere.
    pub fn check_nominal_solvency(&self) -> NominalSolvency {
        let incoming = self.pro_rata.t().dot(&self.debts);
        let net_worth = &self.nominal_inflow + &incoming - &self.debts;
        NominalSolvency {
            solvent: net_worth.iter().all(|v| *v > 0.0),
            net_worth: net_worth.to_vec(),
        }
    }
}
