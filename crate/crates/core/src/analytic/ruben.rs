//! Ruben's series for `ζ = Σ_j λ_j |g_j|²`, `g_j ~ CN(0, 1)`: the density is a
//! mixture of Gamma(ρ+k, 2β) densities with weights `α_k`.

use statrs::function::gamma::{gamma_lr, ln_gamma};

use crate::error::{Error, Result};

/// Stored coefficients beyond this magnitude trigger rescaling.
const OVERFLOW: f64 = 1e300;
/// Consecutive small terms required before truncating.
const QUIET_TERMS: usize = 3;

#[derive(Debug, Clone)]
pub struct RubenSeries {
    pub lambdas: Vec<f64>,
    pub beta: f64,
    /// `α_k = alpha[k] · exp(ln_scale)`.
    alpha: Vec<f64>,
    ln_scale: f64,
    /// True when the tail test stopped the stream before `L_μ` terms.
    pub converged: bool,
    /// True when the coefficients were accumulated with a separate scale.
    pub log_domain: bool,
}

/// Scale choice: the harmonic-mean rule `β = ρ / (2 Σ 1/λ_j)` when it keeps
/// every `|1 − 2β/λ_j| < 1`, otherwise the minimax rule
/// `2β = 2 λ_min λ_max / (λ_min + λ_max)`.
pub fn choose_beta(lambdas: &[f64]) -> f64 {
    let rho = lambdas.len() as f64;
    let inv: f64 = lambdas.iter().map(|l| 1.0 / l).sum();
    let beta = rho / (2.0 * inv);
    if max_ratio(lambdas, beta) < 1.0 - 1e-9 {
        return beta;
    }
    let lmin = lambdas.iter().copied().fold(f64::INFINITY, f64::min);
    let lmax = lambdas.iter().copied().fold(0.0, f64::max);
    lmin * lmax / (lmin + lmax)
}

/// `max_j |1 − 2β/λ_j|`, the geometric decay rate of the coefficients.
pub fn max_ratio(lambdas: &[f64], beta: f64) -> f64 {
    lambdas.iter().map(|l| (1.0 - 2.0 * beta / l).abs()).fold(0.0, f64::max)
}

/// Expected number of terms before `|α_k|` drops below `tail_tol`.
pub fn predicted_terms(lambdas: &[f64], tail_tol: f64) -> f64 {
    let q = max_ratio(lambdas, choose_beta(lambdas));
    if q <= 0.0 {
        return 1.0;
    }
    (tail_tol * (1.0 - q)).ln() / q.ln()
}

fn check_lambdas(lambdas: &[f64]) -> Result<()> {
    if lambdas.is_empty() || lambdas.iter().any(|&l| !(l > 0.0) || !l.is_finite()) {
        return Err(Error::Domain("Ruben series needs at least one positive finite eigenvalue".into()));
    }
    Ok(())
}

/// Coefficients by the Newton recursion `α_k = (1/2k) Σ_{r<k} b_{k−r} α_r`,
/// `b_k = 2 Σ_j (1 − 2β/λ_j)^k`, truncated after `l_mu` terms or once
/// [`QUIET_TERMS`] consecutive terms fall below `tail_tol` relative to the
/// partial sum (weighted by the geometric tail factor).
pub fn ruben_coeffs(lambdas: &[f64], l_mu: usize, tail_tol: f64) -> Result<RubenSeries> {
    check_lambdas(lambdas)?;
    let beta = choose_beta(lambdas);
    let ln_alpha0: f64 = lambdas.iter().map(|l| (2.0 * beta / l).ln()).sum();
    let alpha0 = ln_alpha0.exp();
    if alpha0 > f64::MIN_POSITIVE {
        if let Some(s) = recurse(lambdas, beta, alpha0, 0.0, l_mu, tail_tol, false) {
            return Ok(s);
        }
    }
    Ok(recurse(lambdas, beta, 1.0, ln_alpha0, l_mu, tail_tol, true).expect("rescaled recursion cannot overflow"))
}

/// Same series, always accumulated with a separate scale.
pub fn ruben_coeffs_log_domain(lambdas: &[f64], l_mu: usize, tail_tol: f64) -> Result<RubenSeries> {
    check_lambdas(lambdas)?;
    let beta = choose_beta(lambdas);
    let ln_alpha0: f64 = lambdas.iter().map(|l| (2.0 * beta / l).ln()).sum();
    Ok(recurse(lambdas, beta, 1.0, ln_alpha0, l_mu, tail_tol, true).expect("rescaled recursion cannot overflow"))
}

fn recurse(lambdas: &[f64], beta: f64, a0: f64, mut ln_scale: f64, l_mu: usize, tail_tol: f64, rescale: bool) -> Option<RubenSeries> {
    let q: Vec<f64> = lambdas.iter().map(|l| 1.0 - 2.0 * beta / l).collect();
    let qmax = q.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let tail = 1.0 / (1.0 - qmax).max(f64::EPSILON);
    let l_mu = l_mu.max(1);
    let mut pow = vec![1.0; q.len()];
    let mut b = vec![0.0; l_mu];
    let mut alpha = Vec::with_capacity(l_mu.min(4096));
    alpha.push(a0);
    let mut sum = a0;
    let mut quiet = 0;
    let mut converged = qmax == 0.0;
    if !converged {
        for k in 1..l_mu {
            for (p, qj) in pow.iter_mut().zip(&q) {
                *p *= qj;
            }
            b[k] = 2.0 * pow.iter().sum::<f64>();
            let acc: f64 = (0..k).map(|r| b[k - r] * alpha[r]).sum();
            let a = acc / (2.0 * k as f64);
            alpha.push(a);
            sum += a;
            if a.abs() > OVERFLOW || !a.is_finite() {
                if !rescale {
                    return None;
                }
                // exact power-of-two rescale of everything stored so far
                let e = a.abs().log2().ceil() as i32;
                let f = 2f64.powi(-e);
                for v in alpha.iter_mut() {
                    *v *= f;
                }
                sum *= f;
                ln_scale += e as f64 * std::f64::consts::LN_2;
            }
            if a.abs() * tail < tail_tol * sum.abs() {
                quiet += 1;
                if quiet >= QUIET_TERMS {
                    converged = true;
                    break;
                }
            } else {
                quiet = 0;
            }
        }
    }
    Some(RubenSeries { lambdas: lambdas.to_vec(), beta, alpha, ln_scale, converged, log_domain: rescale })
}

impl RubenSeries {
    pub fn rho(&self) -> usize {
        self.lambdas.len()
    }

    pub fn terms(&self) -> usize {
        self.alpha.len()
    }

    /// `α_k`.
    pub fn alpha(&self, k: usize) -> f64 {
        self.alpha[k] * self.ln_scale.exp()
    }

    /// `Σ_k α_k c_k` with the scale applied at the end.
    fn weighted_sum(&self, c: impl Fn(usize) -> f64) -> f64 {
        let s: f64 = self.alpha.iter().enumerate().map(|(k, a)| a * c(k)).sum();
        s * self.ln_scale.exp()
    }

    /// `Σ α_k`, which tends to 1.
    pub fn normalization(&self) -> f64 {
        self.weighted_sum(|_| 1.0)
    }

    /// `E{1/ζ} = Σ α_k / (2β(ρ+k−1))`; needs ρ > 1.
    pub fn expected_inv_zeta(&self) -> Result<f64> {
        let rho = self.rho();
        if rho <= 1 {
            return Err(Error::DivergentMoment { user: 0, rank: rho, required: 1 });
        }
        let tb = 2.0 * self.beta;
        Ok(self.weighted_sum(|k| 1.0 / (tb * (rho + k - 1) as f64)))
    }

    /// `E{1/ζ²} = Σ α_k / ((2β)²(ρ+k−1)(ρ+k−2))`; needs ρ > 2.
    pub fn expected_inv_zeta_sq(&self) -> Result<f64> {
        let rho = self.rho();
        if rho <= 2 {
            return Err(Error::DivergentMoment { user: 0, rank: rho, required: 2 });
        }
        let tb = 2.0 * self.beta;
        Ok(self.weighted_sum(|k| 1.0 / (tb * tb * ((rho + k - 1) * (rho + k - 2)) as f64)))
    }

    /// Density `Σ α_k x^{ρ+k−1} e^{−x/2β} / (Γ(ρ+k)(2β)^{ρ+k})`.
    pub fn pdf(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        let tb = 2.0 * self.beta;
        let rho = self.rho();
        if x == 0.0 {
            return if rho == 1 { self.alpha(0) / tb } else { 0.0 };
        }
        let lx = x.ln();
        self.alpha
            .iter()
            .enumerate()
            .map(|(k, &a)| {
                if a == 0.0 {
                    return 0.0;
                }
                let n = (rho + k) as f64;
                let ln = a.abs().ln() + self.ln_scale + (n - 1.0) * lx - x / tb - ln_gamma(n) - n * tb.ln();
                a.signum() * ln.exp()
            })
            .sum()
    }

    /// Distribution function `Σ α_k P(ρ+k, x/2β)`.
    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        let y = x / (2.0 * self.beta);
        let rho = self.rho();
        self.weighted_sum(|k| gamma_lr((rho + k) as f64, y))
    }
}
