//! Inverse moments of `ζ = Σ_j λ_j |g_j|²` by the Laplace-transform integral
//!
//! `E{ζ^{−p}} = (1/Γ(p)) ∫₀^∞ t^{p−1} Π_j (1 + λ_j t)^{−1} dt`,
//!
//! evaluated with the trapezoid rule after `t = e^s`. The integrand is
//! analytic in the strip `|Im s| < π`, so the error decays like `exp(−2π²/h)`
//! times a factor that grows with the pole order when eigenvalues cluster.

use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Default step, small enough for a pole of order 200 at distance π.
pub const DEFAULT_STEP: f64 = 0.25;
/// Log-integrand drop at which the tails are cut.
const TAIL_DROP: f64 = 45.0;

/// `ln(1 + e^x)` without overflow.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// `E{ζ^{−p}}` for `0 < p < ρ`.
pub fn inverse_moment(lambdas: &[f64], p: f64, step: f64) -> Result<f64> {
    if lambdas.is_empty() || lambdas.iter().any(|&l| !(l > 0.0) || !l.is_finite()) {
        return Err(Error::Domain("inverse moment needs positive finite eigenvalues".into()));
    }
    if !(p > 0.0) || p >= lambdas.len() as f64 {
        return Err(Error::DivergentMoment { user: 0, rank: lambdas.len(), required: p.ceil() as usize });
    }
    let ln_l: Vec<f64> = lambdas.iter().map(|l| l.ln()).collect();
    // concave in s, so a single peak
    let g = |s: f64| p * s - ln_l.iter().map(|&a| softplus(a + s)).sum::<f64>();
    let s0 = -ln_l.iter().sum::<f64>() / ln_l.len() as f64;
    let mut vals = vec![g(s0)];
    let mut peak = vals[0];
    let mut s = s0;
    loop {
        s += step;
        let v = g(s);
        peak = peak.max(v);
        vals.push(v);
        if v < peak - TAIL_DROP {
            break;
        }
    }
    s = s0;
    loop {
        s -= step;
        let v = g(s);
        peak = peak.max(v);
        vals.push(v);
        if v < peak - TAIL_DROP {
            break;
        }
    }
    let sum: f64 = vals.iter().map(|v| (v - peak).exp()).sum();
    Ok((peak + sum.ln() + step.ln() - ln_gamma(p)).exp())
}
