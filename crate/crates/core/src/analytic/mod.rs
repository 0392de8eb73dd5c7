//! Closed-form rate engine: inverse moments of quadratic forms, the
//! interference approximation and the per-user rate.

pub mod quadrature;
pub mod rate;
pub mod ruben;

use crate::config::AnalyticConfig;
use crate::error::{Error, Result};

pub use rate::{AnalyticModel, QuadFormSpec, Score, UserTerms};
pub use ruben::{ruben_coeffs, RubenSeries};

/// How the inverse moments `E{1/ζ}`, `E{1/ζ²}` are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MomentMethod {
    /// Ruben series when its predicted length fits the budget, quadrature otherwise.
    #[default]
    Auto,
    Series,
    Quadrature,
}

/// `E{ζ^{−p}}` for `p ∈ {1, 2}`.
pub fn inverse_moment(lambdas: &[f64], p: u32, cfg: &AnalyticConfig, method: MomentMethod) -> Result<f64> {
    if p == 0 || p > 2 {
        return Err(Error::Domain(format!("inverse moment order {p} not supported")));
    }
    if lambdas.len() <= p as usize {
        return Err(Error::DivergentMoment { user: 0, rank: lambdas.len(), required: p as usize });
    }
    let use_series = match method {
        MomentMethod::Series => true,
        MomentMethod::Quadrature => false,
        MomentMethod::Auto => ruben::predicted_terms(lambdas, cfg.tail_tol) <= cfg.series_budget as f64,
    };
    if use_series {
        let s = ruben_coeffs(lambdas, cfg.l_mu, cfg.tail_tol)?;
        if p == 1 {
            s.expected_inv_zeta()
        } else {
            s.expected_inv_zeta_sq()
        }
    } else {
        quadrature::inverse_moment(lambdas, p as f64, quadrature::DEFAULT_STEP)
    }
}
