//! Clearing payments, resilience margins, and worst-case systemic losses for
//! financial networks in which banks hold interbank liabilities alongside
//! marketable asset portfolios.
//!
//! The model follows the Eisenberg–Noe tradition with an external sector that
//! is senior to interbank debt: each bank owes fixed nominal amounts to other
//! banks (`liabilities`), nets external cash flows, and marks an asset
//! portfolio (`asset_shares`) to prices. A price move `delta` shifts every
//! bank's available cash; payments then clear pro rata. The crate computes:
//!
//! * clearing payment vectors (fixed-point iteration and an LP formulation),
//! * the default resilience margin: the largest price-move norm that leaves
//!   the system default free,
//! * the insolvency resilience margin: the largest norm for which clearing
//!   payments still exist,
//! * worst-case system loss over a norm ball of price moves, with an
//!   adversarial scenario, a brute-force oracle, and a uniqueness certificate,
//! * seeded Monte Carlo sweeps of loss versus perturbation magnitude.
//!
//! Modules are layered bottom-up: [`lpcore`] is a self-contained dense LP
//! solver, [`model`] holds network data, [`clearing`] computes payment
//! vectors, [`resilience`] and [`worstcase`] implement the margin and
//! worst-case analyses, and [`experiments`] drives parameter sweeps.

pub mod clearing;
pub mod experiments;
pub mod fixtures;
pub mod lpcore;
pub mod model;
pub mod resilience;
pub mod worstcase;

pub use model::{FinancialNetwork, NormKind, PricePerturbation};

/// Serde helpers for values JSON cannot represent natively.
pub mod jsonf {
    use serde::Serializer;

    /// Serialize a float, mapping non-finite values to the strings `"inf"`,
    /// `"-inf"`, and `"nan"` (JSON has no literals for them; `serde_json`
    /// would silently emit `null`).
    pub fn extended<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if *v == f64::INFINITY {
            s.serialize_str("inf")
        } else if *v == f64::NEG_INFINITY {
            s.serialize_str("-inf")
        } else {
            s.serialize_str("nan")
        }
    }
}
