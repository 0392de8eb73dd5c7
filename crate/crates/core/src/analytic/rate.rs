//! Per-user rate approximation from second-order statistics.
//!
//! Everything a user v contributes depends only on its own selection `Λ_v`:
//! the spectrum of `S_v`, its inverse moments, and the column
//! `(tr(S_uv), δ_uv)` over all u. [`UserTerms`] caches exactly that, so a port
//! swap for one user only recomputes one entry.

use super::{inverse_moment, MomentMethod};
use crate::config::AnalyticConfig;
use crate::error::{Error, Result};
use crate::linalg::{frobenius_sq, hermitian_sqrt, real_diag, submatrix, trace, CMat, HermitianEigen};
use crate::precoder::{RateReport, RateSource};
use crate::scenario::ScenarioStatistics;
use crate::selection::PortSelection;

/// `S_u = (1−ε²) R^{1/2} B Bᴴ R^{1/2}` with `B = diag(b)`.
pub fn build_s_u(r_lambda: &CMat, b: &[f64], eps2: f64) -> CMat {
    let rs = hermitian_sqrt(r_lambda);
    let bb: Vec<f64> = b.iter().map(|x| x * x).collect();
    (&rs * real_diag(&bb) * &rs).map(|z| z * (1.0 - eps2))
}

/// `S_uv = (1−ε²) R_v^{1/2} Bᵘ Bᵘᴴ R̄ B_v B_vᴴ R_v^{1/2}`.
pub fn build_s_uv(r_lambda_v: &CMat, b_v: &[f64], b_u_at_v: &[f64], r_bar: &CMat, eps2: f64) -> CMat {
    let rs = hermitian_sqrt(r_lambda_v);
    let bu: Vec<f64> = b_u_at_v.iter().map(|x| x * x).collect();
    let bv: Vec<f64> = b_v.iter().map(|x| x * x).collect();
    (&rs * real_diag(&bu) * r_bar * real_diag(&bv) * &rs).map(|z| z * (1.0 - eps2))
}

/// Spectrum and inverse moments of one `S_u`.
#[derive(Debug, Clone)]
pub struct QuadFormSpec {
    /// Positive eigenvalues above the rank tolerance, descending.
    pub lambdas: Vec<f64>,
    pub rank: usize,
    /// `E{1/ζ}`; infinite when ρ ≤ 1.
    pub mu: f64,
    /// `E{1/ζ²}/M²`; infinite when ρ ≤ 2.
    pub eta: f64,
    /// `tr(S)`.
    pub trace: f64,
    /// `‖S‖_F²`.
    pub frobenius_sq: f64,
}

impl QuadFormSpec {
    /// Analyse a Hermitian PSD matrix with the same nonzero spectrum as `S_u`.
    pub fn new(s: &CMat, n_antennas: usize, cfg: &AnalyticConfig, method: MomentMethod) -> Result<Self> {
        let eig = HermitianEigen::new(s);
        let rank = eig.rank(cfg.rank_tol);
        let lambdas = eig.values[..rank].to_vec();
        let mu = if rank > 1 { inverse_moment(&lambdas, 1, cfg, method)? } else { f64::INFINITY };
        let m2 = (n_antennas * n_antennas) as f64;
        let eta = if rank > 2 { inverse_moment(&lambdas, 2, cfg, method)? / m2 } else { f64::INFINITY };
        let pos = eig.values.iter().map(|v| v.max(0.0));
        Ok(Self { trace: pos.clone().sum(), frobenius_sq: pos.map(|v| v * v).sum(), lambdas, rank, mu, eta })
    }

    /// `|tr(S)|² + ‖S‖_F² = E{ζ²}`.
    pub fn second_moment(&self) -> f64 {
        self.trace * self.trace + self.frobenius_sq
    }
}

/// `δ_uv` over the selected ports of v (BS pairs b ≠ b′ only).
pub fn delta_uv(stats: &ScenarioStatistics, selection: &PortSelection, eps2: f64, u: usize, v: usize) -> f64 {
    delta_for_ports(stats, &selection.user_ports(v), eps2, u, v)
}

fn delta_for_ports(stats: &ScenarioStatistics, ports: &[(usize, usize)], eps2: f64, u: usize, v: usize) -> f64 {
    let m = stats.n_antennas;
    let mut acc = 0.0;
    for &(b, l) in ports {
        for &(b2, l2) in ports {
            if b == b2 {
                continue;
            }
            let rv = stats.corr(v, b, l, b2, l2);
            if u == v {
                acc += rv.norm_sqr() * stats.beta(b, v, l) * stats.beta(b2, v, l2);
            } else {
                let ru = stats.corr(u, b, l, b2, l2);
                let w = (stats.beta(b, v, l) * stats.beta(b, u, l) * stats.beta(b2, v, l2) * stats.beta(b2, u, l2)).sqrt();
                acc += (ru * rv.conj()).re * w;
            }
        }
    }
    let pref = if u == v { eps2 * (1.0 - eps2) } else { 1.0 - eps2 };
    (m * m) as f64 * pref * acc
}

/// Cached contribution of user v.
#[derive(Debug, Clone)]
pub struct UserTerms {
    pub spec: QuadFormSpec,
    /// `tr(S_uv)` for every u.
    pub tr_cross: Vec<f64>,
    /// `δ_uv` for every u.
    pub delta: Vec<f64>,
}

/// Rate evaluator bound to one scenario, power vector and error level.
#[derive(Debug, Clone)]
pub struct AnalyticModel<'a> {
    pub stats: &'a ScenarioStatistics,
    pub powers: Vec<f64>,
    pub sigma_n2: f64,
    pub eps2: f64,
    pub cfg: AnalyticConfig,
    pub method: MomentMethod,
}

/// Optimizer objective, ordered by `served` and then `sum_rate`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Score {
    pub served: usize,
    pub sum_rate: f64,
}

impl PartialOrd for Score {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.served.cmp(&other.served).then(self.sum_rate.partial_cmp(&other.sum_rate)?))
    }
}

/// Per-user rates together with the terms they were computed from.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub rates: Vec<f64>,
    pub signal: Vec<f64>,
    pub interference: Vec<Vec<f64>>,
    pub noise: f64,
}

impl<'a> AnalyticModel<'a> {
    pub fn new(stats: &'a ScenarioStatistics, powers: Vec<f64>, sigma_n2: f64, eps2: f64, cfg: AnalyticConfig) -> Result<Self> {
        if powers.len() != stats.n_users {
            return Err(Error::Dimension { expected: stats.n_users, got: powers.len() });
        }
        crate::channel::check_eps2(eps2)?;
        Ok(Self { stats, powers, sigma_n2, eps2, cfg, method: MomentMethod::Auto })
    }

    pub fn with_method(mut self, method: MomentMethod) -> Self {
        self.method = method;
        self
    }

    /// Terms of user v for the BS-major port list `ports`.
    pub fn terms_for_ports(&self, v: usize, ports: &[(usize, usize)]) -> Result<UserTerms> {
        let st = self.stats;
        let m = st.n_antennas;
        let idx: Vec<usize> = ports.iter().map(|&(b, l)| b * m + l).collect();
        let r = submatrix(&st.r[v], &idx, &idx);
        let beta_v: Vec<f64> = ports.iter().map(|&(b, l)| st.beta(b, v, l)).collect();
        // B R B has the nonzero spectrum of R^{1/2} B² R^{1/2}
        let k = idx.len();
        let s = CMat::from_fn(k, k, |i, j| r[(i, j)] * ((beta_v[i] * beta_v[j]).sqrt() * (1.0 - self.eps2)));
        let spec = QuadFormSpec::new(&s, m, &self.cfg, self.method)?;
        let e = self.eps2;
        let mut tr_cross = Vec::with_capacity(st.n_users);
        let mut delta = Vec::with_capacity(st.n_users);
        for u in 0..st.n_users {
            let tr = if u == v {
                let mut acc = 0.0;
                for i in 0..k {
                    for j in 0..k {
                        acc += beta_v[i] * beta_v[j] * r[(i, j)].norm_sqr();
                    }
                }
                e * (1.0 - e) * acc
            } else {
                (1.0 - e) * ports.iter().enumerate().map(|(i, &(b, l))| st.beta(b, u, l) * beta_v[i] * r[(i, i)].re).sum::<f64>()
            };
            tr_cross.push(tr);
            delta.push(delta_for_ports(st, ports, e, u, v));
        }
        Ok(UserTerms { spec, tr_cross, delta })
    }

    pub fn terms(&self, selection: &PortSelection, v: usize) -> Result<UserTerms> {
        self.terms_for_ports(v, &selection.user_ports(v)).map_err(|e| with_user(e, v))
    }

    pub fn all_terms(&self, selection: &PortSelection) -> Result<Vec<UserTerms>> {
        (0..self.stats.n_users).map(|v| self.terms(selection, v)).collect()
    }

    /// `E{|h̃_uᴴ w̄_v|²}` approximation: `tr(S_uv)/E{ζ_v²} + δ_uv η_v`.
    pub fn interference_term(terms: &UserTerms, u: usize) -> f64 {
        let t = &terms.spec;
        let first = if terms.tr_cross[u] == 0.0 { 0.0 } else { terms.tr_cross[u] / t.second_moment() };
        let second = if terms.delta[u] == 0.0 { 0.0 } else { terms.delta[u] * t.eta };
        first + second
    }

    /// Rates with the extended conventions used inside optimizers: a user
    /// whose `E{1/ζ}` diverges gets zero rate and contributes no
    /// interference; a nonzero `δ_uv` paired with a divergent `η_v` drives
    /// user u's rate to zero.
    pub fn evaluate_terms(&self, terms: &[UserTerms]) -> Evaluation {
        let m = self.stats.n_antennas as f64;
        let weight: Vec<f64> = terms.iter().zip(&self.powers).map(|(t, p)| if t.spec.mu.is_finite() { m * p / t.spec.mu } else { 0.0 }).collect();
        let mut rates = Vec::with_capacity(terms.len());
        let mut interference = Vec::with_capacity(terms.len());
        for u in 0..terms.len() {
            let row: Vec<f64> = terms
                .iter()
                .enumerate()
                .map(|(v, t)| if weight[v] == 0.0 { 0.0 } else { weight[v] * Self::interference_term(t, u) })
                .collect();
            let denom: f64 = row.iter().sum::<f64>() + self.sigma_n2;
            let sinr = weight[u] / denom;
            rates.push(if sinr.is_finite() && sinr > 0.0 { sinr.ln_1p() / std::f64::consts::LN_2 } else { 0.0 });
            interference.push(row);
        }
        Evaluation { rates, signal: weight, interference, noise: self.sigma_n2 }
    }

    /// Sum rate under the extended conventions.
    pub fn sum_rate_terms(&self, terms: &[UserTerms]) -> f64 {
        self.evaluate_terms(terms).rates.iter().sum()
    }

    /// Number of users with positive rate, and the extended sum rate.
    /// Optimizers compare served counts first so that a degenerate
    /// selection cannot buy rate by silencing a user.
    pub fn score_terms(&self, terms: &[UserTerms]) -> Score {
        let ev = self.evaluate_terms(terms);
        Score { served: ev.rates.iter().filter(|&&r| r > 0.0).count(), sum_rate: ev.rates.iter().sum() }
    }

    /// Strict per-user rates: every moment the formula touches must exist.
    pub fn user_rates(&self, selection: &PortSelection) -> Result<Vec<f64>> {
        let terms = self.all_terms(selection)?;
        self.check_moments(&terms)?;
        Ok(self.evaluate_terms(&terms).rates)
    }

    /// Strict rate of user u.
    pub fn user_rate(&self, selection: &PortSelection, u: usize) -> Result<f64> {
        Ok(self.user_rates(selection)?[u])
    }

    pub fn sum_rate(&self, selection: &PortSelection) -> Result<f64> {
        Ok(self.user_rates(selection)?.iter().sum())
    }

    fn check_moments(&self, terms: &[UserTerms]) -> Result<()> {
        for (v, t) in terms.iter().enumerate() {
            let needs_eta = t.delta.iter().any(|&d| d != 0.0);
            let required = if needs_eta { 2 } else { 1 };
            if t.spec.rank <= required {
                return Err(Error::DivergentMoment { user: v, rank: t.spec.rank, required });
            }
        }
        Ok(())
    }

    /// Strict evaluation packaged as a report.
    pub fn report(&self, selection: &PortSelection) -> Result<RateReport> {
        let terms = self.all_terms(selection)?;
        self.check_moments(&terms)?;
        let ev = self.evaluate_terms(&terms);
        Ok(RateReport::new(RateSource::Analytic, ev.rates, ev.signal, ev.interference, ev.noise, 0))
    }
}

fn with_user(e: Error, user: usize) -> Error {
    match e {
        Error::DivergentMoment { rank, required, .. } => Error::DivergentMoment { user, rank, required },
        other => other,
    }
}

/// `tr(S_uv)` from the dense matrix product, for cross-checks.
pub fn dense_cross_trace(stats: &ScenarioStatistics, selection: &PortSelection, eps2: f64, u: usize, v: usize) -> f64 {
    let m = stats.n_antennas;
    let pv = selection.user_ports(v);
    let idx_v: Vec<usize> = pv.iter().map(|&(b, l)| b * m + l).collect();
    let r_v = submatrix(&stats.r[v], &idx_v, &idx_v);
    let b_v: Vec<f64> = pv.iter().map(|&(b, l)| stats.beta(b, v, l).sqrt()).collect();
    let b_u: Vec<f64> = pv.iter().map(|&(b, l)| stats.beta(b, u, l).sqrt()).collect();
    let r_bar = if u == v { r_v.map(|z| z * eps2) } else { CMat::identity(idx_v.len(), idx_v.len()) };
    trace(&build_s_uv(&r_v, &b_v, &b_u, &r_bar, eps2)).re
}

/// `(tr S, ‖S‖_F²)` of the dense `S_u`, for cross-checks.
pub fn dense_s_moments(stats: &ScenarioStatistics, selection: &PortSelection, eps2: f64, u: usize) -> (f64, f64) {
    let m = stats.n_antennas;
    let p = selection.user_ports(u);
    let idx: Vec<usize> = p.iter().map(|&(b, l)| b * m + l).collect();
    let r = submatrix(&stats.r[u], &idx, &idx);
    let b: Vec<f64> = p.iter().map(|&(bb, l)| stats.beta(bb, u, l).sqrt()).collect();
    let s = build_s_u(&r, &b, eps2);
    (trace(&s).re, frobenius_sq(&s))
}
