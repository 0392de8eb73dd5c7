//! ZF precoding on reconstructed CSI and the Monte Carlo rate estimator.
//!
//! The estimator works in beamspace restricted to the union of selected
//! ports: `Fᴴ` is unitary, so every inner product equals its antenna-domain
//! counterpart, and the precoders are supported on selected ports only.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::channel::{check_eps2, draw, ChannelSampler};
use crate::error::{Error, Result};
use crate::feedback::{EdtCodec, EdtMode, Quantizer};
use crate::linalg::{submatrix, CMat, CVec, ZERO};
use crate::rng::{stream, Domain};
use crate::scenario::ScenarioStatistics;
use crate::selection::PortSelection;

/// Realizations per RNG stream; fixed so results never depend on thread count.
pub const CHUNK: usize = 1024;
/// Gram diagonal entries below this fraction of the largest one are singular.
pub const SINGULAR_TOL: f64 = 1e-12;
/// Groups used for the batch-split standard error.
const STDERR_GROUPS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateSource {
    Analytic,
    MonteCarlo,
}

impl RateSource {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Analytic => "analytic",
            Self::MonteCarlo => "monte_carlo",
        }
    }
}

/// Per-user rates and the powers they were computed from.
#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    pub source: RateSource,
    pub per_user_rate: Vec<f64>,
    pub sum_rate: f64,
    pub signal_power: Vec<f64>,
    /// `interference_power[u][v]`: leakage of v's stream into user u.
    pub interference_power: Vec<Vec<f64>>,
    pub noise: f64,
    pub n_realizations: usize,
    /// Batch-split standard error of the sum rate (Monte Carlo only).
    pub sum_rate_stderr: Option<f64>,
    pub rejected: usize,
}

impl RateReport {
    pub fn new(source: RateSource, rates: Vec<f64>, signal: Vec<f64>, interference: Vec<Vec<f64>>, noise: f64, n: usize) -> Self {
        Self {
            source,
            sum_rate: rates.iter().sum(),
            per_user_rate: rates,
            signal_power: signal,
            interference_power: interference,
            noise,
            n_realizations: n,
            sum_rate_stderr: None,
            rejected: 0,
        }
    }

    pub fn csv_header(n_users: usize) -> String {
        let mut s = String::from("source,n_realizations,sum_rate,sum_rate_stderr");
        for u in 0..n_users {
            let _ = write!(s, ",rate_{u}");
        }
        s
    }

    pub fn csv_row(&self) -> String {
        let mut s = format!(
            "{},{},{},{}",
            self.source.as_str(),
            self.n_realizations,
            self.sum_rate,
            self.sum_rate_stderr.map_or(String::new(), |e| e.to_string())
        );
        for r in &self.per_user_rate {
            let _ = write!(s, ",{r}");
        }
        s
    }
}

/// Unnormalized ZF directions `Ĥ (ĤᴴĤ)^{−1}`.
pub fn zf_directions(hhat: &CMat) -> Result<CMat> {
    let gram = hhat.adjoint() * hhat;
    let dmax = (0..gram.nrows()).map(|i| gram[(i, i)].re).fold(0.0, f64::max);
    if let Some(u) = (0..gram.nrows()).find(|&i| !(gram[(i, i)].re > SINGULAR_TOL * dmax)) {
        return Err(Error::Precoder { user: u });
    }
    let chol = gram.cholesky().ok_or(Error::Precoder { user: 0 })?;
    Ok(hhat * chol.inverse())
}

/// `W = Ĥ(ĤᴴĤ)^{−1} Σ` with `ω_u = √(P_u / E{‖w̄_u‖²})`.
pub fn zf_precoder(hhat: &CMat, powers: &[f64], norm_expectations: &[f64]) -> Result<CMat> {
    let u = hhat.ncols();
    if powers.len() != u || norm_expectations.len() != u {
        return Err(Error::Dimension { expected: u, got: powers.len().min(norm_expectations.len()) });
    }
    let mut w = zf_directions(hhat)?;
    for (c, (p, e)) in powers.iter().zip(norm_expectations).enumerate() {
        let omega = (p / e).sqrt();
        w.column_mut(c).scale_mut(omega);
    }
    Ok(w)
}

/// Second-order terms of one realization: `‖w̄_v‖²` and `|h̃_uᴴ w̄_v|²`
/// (row-major `[u * U + v]`). `None` when the Gram matrix is singular.
pub fn realization_terms(g_true: &[CVec], g_hat: &[CVec]) -> Option<(Vec<f64>, Vec<f64>)> {
    let nu = g_hat.len();
    let hhat = CMat::from_columns(g_hat);
    let w = zf_directions(&hhat).ok()?;
    let wn: Vec<f64> = (0..nu).map(|v| w.column(v).norm_squared()).collect();
    let mut inter = vec![0.0; nu * nu];
    for u in 0..nu {
        let err = &g_true[u] - &g_hat[u];
        for v in 0..nu {
            inter[u * nu + v] = err.dotc(&w.column(v)).norm_sqr();
        }
    }
    Some((wn, inter))
}

/// How the fed-back coefficients are produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeedbackPath {
    /// `ĥ = √(1−ε²) x_Λ` with ε² the overall error level.
    Statistical,
    /// Estimation error ε² only, then EDT compression, optional
    /// quantization `(bits_amp, bits_phase)` and reconstruction.
    Explicit { mode: EdtMode, quantize: Option<(u32, u32)> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct McOptions {
    pub feedback: FeedbackPath,
    /// Replace the sample mean of `‖w̄_v‖²` inside `ω_v` by supplied values.
    pub norm_override: Option<Vec<f64>>,
    pub rank_tol: f64,
}

impl Default for McOptions {
    fn default() -> Self {
        Self { feedback: FeedbackPath::Statistical, norm_override: None, rank_tol: 1e-10 }
    }
}

#[derive(Debug, Clone)]
struct Accum {
    n: usize,
    wn: Vec<f64>,
    inter: Vec<f64>,
    rejected: usize,
}

impl Accum {
    fn new(nu: usize) -> Self {
        Self { n: 0, wn: vec![0.0; nu], inter: vec![0.0; nu * nu], rejected: 0 }
    }

    fn add(&mut self, o: &Accum) {
        self.n += o.n;
        self.rejected += o.rejected;
        for (a, b) in self.wn.iter_mut().zip(&o.wn) {
            *a += b;
        }
        for (a, b) in self.inter.iter_mut().zip(&o.inter) {
            *a += b;
        }
    }
}

struct Plan {
    nu: usize,
    sampler: ChannelSampler,
    /// `√(M β̄)` of every user at every union port.
    gain: Vec<Vec<f64>>,
    /// Positions of each user's selected ports in the union.
    sel_pos: Vec<Vec<usize>>,
    codecs: Option<Vec<EdtCodec>>,
    quantizer: Option<Quantizer>,
    a: f64,
    c: f64,
}

impl Plan {
    fn new(stats: &ScenarioStatistics, selection: &PortSelection, eps2: f64, opts: &McOptions) -> Result<Self> {
        let m = stats.n_antennas;
        let nu = stats.n_users;
        let mut union: Vec<usize> = (0..nu).flat_map(|u| selection.stacked_indices(u)).collect();
        union.sort_unstable();
        union.dedup();
        let sampler = ChannelSampler::restricted(stats, &union)?;
        let sm = (m as f64).sqrt();
        let gain = (0..nu).map(|u| union.iter().map(|&i| sm * stats.beta(i / m, u, i % m).sqrt()).collect()).collect();
        let sel_pos = (0..nu)
            .map(|u| selection.stacked_indices(u).iter().map(|i| union.binary_search(i).expect("selected port in union")).collect())
            .collect();
        let (codecs, quantizer) = match opts.feedback {
            FeedbackPath::Statistical => (None, None),
            FeedbackPath::Explicit { mode, quantize } => {
                let codecs = (0..nu)
                    .map(|u| {
                        let idx = selection.stacked_indices(u);
                        EdtCodec::build(&submatrix(&stats.r[u], &idx, &idx), mode, opts.rank_tol)
                    })
                    .collect::<Result<Vec<_>>>()?;
                let q = quantize.map(|(ba, bp)| Quantizer::new(ba, bp, (1.0 - eps2).sqrt())).transpose()?;
                (Some(codecs), q)
            }
        };
        Ok(Self { nu, sampler, gain, sel_pos, codecs, quantizer, a: (1.0 - eps2).sqrt(), c: eps2.sqrt() })
    }

    fn realization(&self, rng: &mut crate::rng::SimRng) -> Result<Option<(Vec<f64>, Vec<f64>)>> {
        let mut g_true = Vec::with_capacity(self.nu);
        let mut g_hat = Vec::with_capacity(self.nu);
        for u in 0..self.nu {
            let l = self.sampler.factor(u);
            let x = draw(l, rng);
            let y = draw(l, rng);
            let n = x.len();
            let hbar = x.zip_map(&y, |xi, yi| xi * self.a + yi * self.c);
            let mut hs = CVec::from_iterator(self.sel_pos[u].len(), self.sel_pos[u].iter().map(|&p| x[p] * self.a));
            if let Some(codecs) = &self.codecs {
                let mut r = codecs[u].compress(&hs)?;
                if let Some(q) = &self.quantizer {
                    r = q.quantize(&r).0;
                }
                hs = codecs[u].reconstruct(&r)?;
            }
            let gt = CVec::from_fn(n, |i, _| hbar[i] * self.gain[u][i]);
            let mut gh = CVec::from_element(n, ZERO);
            for (k, &p) in self.sel_pos[u].iter().enumerate() {
                gh[p] = hs[k] * self.gain[u][p];
            }
            g_true.push(gt);
            g_hat.push(gh);
        }
        Ok(realization_terms(&g_true, &g_hat))
    }

    fn chunk(&self, seed: u64, index: usize, count: usize) -> Result<Accum> {
        let mut rng = stream(seed, Domain::Channel, index as u64);
        let mut acc = Accum::new(self.nu);
        while acc.n < count {
            match self.realization(&mut rng)? {
                Some((wn, inter)) => {
                    acc.n += 1;
                    for (a, b) in acc.wn.iter_mut().zip(&wn) {
                        *a += b;
                    }
                    for (a, b) in acc.inter.iter_mut().zip(&inter) {
                        *a += b;
                    }
                }
                None => {
                    acc.rejected += 1;
                    if acc.rejected > count {
                        return Err(Error::TooManyRejections { rejected: acc.rejected, requested: count });
                    }
                }
            }
        }
        Ok(acc)
    }
}

fn rates_from(acc: &Accum, powers: &[f64], sigma_n2: f64, norm: Option<&[f64]>) -> (Vec<f64>, Vec<f64>, Vec<Vec<f64>>) {
    let nu = powers.len();
    let n = acc.n as f64;
    let omega2: Vec<f64> = (0..nu)
        .map(|v| {
            let e = norm.map_or(acc.wn[v] / n, |x| x[v]);
            if powers[v] == 0.0 {
                0.0
            } else {
                powers[v] / e
            }
        })
        .collect();
    let mut rates = Vec::with_capacity(nu);
    let mut inter = Vec::with_capacity(nu);
    for u in 0..nu {
        let row: Vec<f64> = (0..nu).map(|v| if omega2[v] == 0.0 { 0.0 } else { omega2[v] * acc.inter[u * nu + v] / n }).collect();
        let sinr = omega2[u] / (row.iter().sum::<f64>() + sigma_n2);
        rates.push((sinr.max(0.0)).ln_1p() / std::f64::consts::LN_2);
        inter.push(row);
    }
    (rates, omega2, inter)
}

/// Sample-mean evaluation of the rate definition over `n_real` realizations.
/// Streams are derived from `(seed, chunk index)`.
#[allow(clippy::too_many_arguments)]
pub fn monte_carlo_rate(
    stats: &ScenarioStatistics,
    selection: &PortSelection,
    eps2: f64,
    powers: &[f64],
    sigma_n2: f64,
    n_real: usize,
    seed: u64,
    opts: &McOptions,
) -> Result<RateReport> {
    if n_real == 0 {
        return Err(Error::Config("n_real must be at least 1".into()));
    }
    check_eps2(eps2)?;
    if powers.len() != stats.n_users {
        return Err(Error::Dimension { expected: stats.n_users, got: powers.len() });
    }
    selection.validate(None)?;
    let plan = Plan::new(stats, selection, eps2, opts)?;
    let n_chunks = n_real.div_ceil(CHUNK);
    let chunks: Vec<Accum> = (0..n_chunks)
        .into_par_iter()
        .map(|i| plan.chunk(seed, i, CHUNK.min(n_real - i * CHUNK)))
        .collect::<Result<_>>()?;
    let mut total = Accum::new(plan.nu);
    for c in &chunks {
        total.add(c);
    }
    if total.rejected * 100 > n_real {
        return Err(Error::TooManyRejections { rejected: total.rejected, requested: n_real });
    }
    let norm = opts.norm_override.as_deref();
    let (rates, signal, inter) = rates_from(&total, powers, sigma_n2, norm);
    let mut report = RateReport::new(RateSource::MonteCarlo, rates, signal, inter, sigma_n2, n_real);
    report.rejected = total.rejected;
    let groups = STDERR_GROUPS.min(n_chunks);
    if groups >= 2 {
        let per = n_chunks.div_ceil(groups);
        let sums: Vec<f64> = chunks
            .chunks(per)
            .map(|g| {
                let mut a = Accum::new(plan.nu);
                g.iter().for_each(|c| a.add(c));
                rates_from(&a, powers, sigma_n2, norm).0.iter().sum()
            })
            .collect();
        let k = sums.len() as f64;
        let mean = sums.iter().sum::<f64>() / k;
        let var = sums.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (k - 1.0);
        report.sum_rate_stderr = Some((var / k).sqrt());
    }
    Ok(report)
}

/// Helper for diagonal checks: largest `|G_uv| / √(G_uu G_vv)` over u ≠ v.
pub fn gram_offdiag_ratio(hhat: &CMat) -> f64 {
    let g = hhat.adjoint() * hhat;
    let mut worst = 0.0f64;
    for i in 0..g.nrows() {
        for j in 0..g.ncols() {
            if i != j {
                let d = (g[(i, i)].re * g[(j, j)].re).sqrt();
                worst = worst.max(g[(i, j)].norm() / d);
            }
        }
    }
    worst
}


#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;
    use crate::channel::{assemble_user_channel, dft_matrix, ChannelSampler};
    use crate::config::SystemConfig;
    use crate::feedback::reconstruct_antenna;
    use crate::rng::complex_normal;
    use crate::scenario::{IndefinitePolicy, Scenario};

    fn desk(eps: f64) -> (Scenario, PortSelection) {
        let cfg = SystemConfig { rho_s: 0.3, rho_c: 0.8, eps_ce2: eps, ..SystemConfig::desk() };
        let sc = Scenario::generate(&cfg, 1.0, IndefinitePolicy::Reject, &mut stream(5, Domain::Placement, 0)).unwrap();
        let sel = crate::portsel::mm_s_baseline(&sc.stats, &[2, 2]).unwrap();
        (sc, sel)
    }

    #[test]
    fn single_user_zf() {
        let mut rng = stream(1, Domain::Oracle, 0);
        let h = CMat::from_fn(5, 1, |_, _| complex_normal(&mut rng));
        let w = zf_precoder(&h, &[2.0], &[0.5]).unwrap();
        let want = &h * Complex64::new(2.0 / h.norm_squared(), 0.0);
        assert!((w - want).norm() < 1e-12);
    }

    #[test]
    fn zf_nulls_other_users() {
        let mut rng = stream(2, Domain::Oracle, 0);
        for _ in 0..50 {
            let h = CMat::from_fn(8, 3, |_, _| complex_normal(&mut rng));
            let w = zf_precoder(&h, &[1.0, 2.0, 3.0], &[1.0, 1.0, 1.0]).unwrap();
            let p = h.adjoint() * &w;
            for u in 0..3 {
                for v in 0..3 {
                    if u != v {
                        assert!(p[(u, v)].norm() <= 1e-10 * h.column(u).norm() * w.column(v).norm());
                    }
                }
                assert!((p[(u, u)].re - ((u + 1) as f64).sqrt()).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn zero_channel_is_rejected_by_user() {
        let mut h = CMat::from_element(4, 2, Complex64::new(1.0, 0.0));
        h.column_mut(1).fill(ZERO);
        assert!(matches!(zf_directions(&h), Err(Error::Precoder { user: 1 })));
    }

    #[test]
    fn beamspace_terms_equal_antenna_terms() {
        let (sc, sel) = desk(0.1);
        let st = &sc.stats;
        let basis = dft_matrix(st.n_antennas);
        let sampler = ChannelSampler::new(st).unwrap();
        let mut rng = stream(3, Domain::Channel, 0);
        let m = st.n_antennas;
        for _ in 0..20 {
            let batch = sampler.sample(&sel, 0.1, &mut rng).unwrap();
            let mut at = Vec::new();
            let mut ah = Vec::new();
            let mut bt = Vec::new();
            let mut bh = Vec::new();
            for u in 0..st.n_users {
                at.push(assemble_user_channel(st, u, &batch.hbar[u], &basis).unwrap());
                let mut hh = CVec::zeros(st.n_bs * m);
                let mut off = 0;
                let mut gh = CVec::zeros(st.n_bs * m);
                for b in 0..st.n_bs {
                    let lam = sel.get(b, u);
                    let part = &batch.hhat_sel[u].as_slice()[off..off + lam.len()];
                    hh.rows_mut(b * m, m).copy_from(&reconstruct_antenna(part, st.beta_row(b, u), lam, &basis).unwrap());
                    for (i, &p) in lam.iter().enumerate() {
                        gh[b * m + p] = part[i] * (m as f64 * st.beta(b, u, p)).sqrt();
                    }
                    off += lam.len();
                }
                ah.push(hh);
                bt.push(CVec::from_fn(st.n_bs * m, |i, _| batch.hbar[u][i] * (m as f64 * st.beta(i / m, u, i % m)).sqrt()));
                bh.push(gh);
            }
            let (wa, ia) = realization_terms(&at, &ah).unwrap();
            let (wb, ib) = realization_terms(&bt, &bh).unwrap();
            for (x, y) in wa.iter().zip(&wb).chain(ia.iter().zip(&ib)) {
                assert!((x - y).abs() <= 1e-9 * y.abs().max(1e-30), "{x} vs {y}");
            }
        }
    }

    #[test]
    fn zero_power_and_noise_limit() {
        let (sc, sel) = desk(0.05);
        let st = &sc.stats;
        let r = monte_carlo_rate(st, &sel, 0.05, &[0.0, 0.0], 1.0, 2000, 1, &McOptions::default()).unwrap();
        assert!(r.per_user_rate.iter().all(|&x| x == 0.0));
        let p = sc.power.per_user.clone();
        let r = monte_carlo_rate(st, &sel, 0.05, &p, 1e12 * p[0] * 1e3, 2000, 1, &McOptions::default()).unwrap();
        assert!(r.sum_rate < 1e-6);
    }

    #[test]
    fn noise_monotonicity_and_determinism() {
        let (sc, sel) = desk(0.05);
        let p = sc.power.per_user.clone();
        let a = monte_carlo_rate(&sc.stats, &sel, 0.05, &p, 1.0, 5000, 7, &McOptions::default()).unwrap();
        let b = monte_carlo_rate(&sc.stats, &sel, 0.05, &p, 4.0, 5000, 7, &McOptions::default()).unwrap();
        for (x, y) in a.per_user_rate.iter().zip(&b.per_user_rate) {
            assert!(y <= x);
        }
        let c = monte_carlo_rate(&sc.stats, &sel, 0.05, &p, 1.0, 5000, 7, &McOptions::default()).unwrap();
        assert_eq!(a, c);
        assert!(a.sum_rate_stderr.unwrap() > 0.0);
        assert!(a.sum_rate >= 0.0 && (a.sum_rate - a.per_user_rate.iter().sum::<f64>()).abs() < 1e-12);
    }

    #[test]
    fn explicit_unquantized_s1_matches_statistical() {
        let (sc, sel) = desk(0.05);
        let p = sc.power.per_user.clone();
        let opts = McOptions { feedback: FeedbackPath::Explicit { mode: EdtMode::S1, quantize: None }, ..McOptions::default() };
        let a = monte_carlo_rate(&sc.stats, &sel, 0.05, &p, 1.0, 3000, 2, &McOptions::default()).unwrap();
        let b = monte_carlo_rate(&sc.stats, &sel, 0.05, &p, 1.0, 3000, 2, &opts).unwrap();
        for (x, y) in a.per_user_rate.iter().zip(&b.per_user_rate) {
            assert!((x - y).abs() < 1e-8 * x.abs().max(1.0), "{x} vs {y}");
        }
    }

    #[test]
    fn csv_row_shape() {
        let r = RateReport::new(RateSource::Analytic, vec![1.0, 2.0], vec![1.0; 2], vec![vec![0.0; 2]; 2], 1.0, 0);
        assert_eq!(RateReport::csv_header(2), "source,n_realizations,sum_rate,sum_rate_stderr,rate_0,rate_1");
        assert_eq!(r.csv_row().split(',').count(), 6);
        assert_eq!(r.sum_rate, 3.0);
    }
}
