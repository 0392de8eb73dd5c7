//! Correlated port-coefficient sampling and antenna-domain assembly.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{submatrix, CMat, CVec, HermitianEigen, ZERO};
use crate::rng::complex_normal;
use crate::scenario::ScenarioStatistics;
use crate::selection::PortSelection;

/// Unitary spatial DFT basis; column m is the steering vector of port m.
#[derive(Debug, Clone)]
pub struct DftBasis {
    pub f: CMat,
}

/// Entry (a, m) is `exp(−j2π a m / M) / √M` (0-based).
pub fn dft_matrix(m: usize) -> DftBasis {
    let scale = 1.0 / (m as f64).sqrt();
    let f = CMat::from_fn(m, m, |a, k| {
        let phase = -2.0 * PI * ((a * k) % m) as f64 / m as f64;
        Complex64::from_polar(scale, phase)
    });
    DftBasis { f }
}

/// Square-root factor `L` with `L Lᴴ = R` built from the positive spectrum.
pub fn covariance_factor(r: &CMat, user: usize) -> Result<CMat> {
    let eig = HermitianEigen::new(r);
    if eig.values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Statistics(format!("eigendecomposition of R[{user}] failed")));
    }
    let keep = eig.rank(1e-14);
    let full = eig.sqrt_factor();
    Ok(full.columns(0, keep).into_owned())
}

/// Draws `L z` with `z ~ CN(0, I)`.
pub fn draw<R: Rng + ?Sized>(factor: &CMat, rng: &mut R) -> CVec {
    let z = CVec::from_fn(factor.ncols(), |_, _| complex_normal(rng));
    factor * z
}

/// Precomputed per-user factors of `R[u]`, reusable across realizations.
#[derive(Debug, Clone)]
pub struct ChannelSampler {
    factors: Vec<CMat>,
}

impl ChannelSampler {
    pub fn new(stats: &ScenarioStatistics) -> Result<Self> {
        let factors = stats.r.iter().enumerate().map(|(u, r)| covariance_factor(r, u)).collect::<Result<_>>()?;
        Ok(Self { factors })
    }

    /// Factors of `R[u]` restricted to the stacked indices `idx`.
    pub fn restricted(stats: &ScenarioStatistics, idx: &[usize]) -> Result<Self> {
        let factors = stats.r.iter().enumerate().map(|(u, r)| covariance_factor(&submatrix(r, idx, idx), u)).collect::<Result<_>>()?;
        Ok(Self { factors })
    }

    pub fn factor(&self, u: usize) -> &CMat {
        &self.factors[u]
    }

    /// One joint draw of true and estimated coefficients for every user.
    pub fn sample<R: Rng + ?Sized>(&self, selection: &PortSelection, eps2: f64, rng: &mut R) -> Result<ChannelBatch> {
        check_eps2(eps2)?;
        let (a, c) = ((1.0 - eps2).sqrt(), eps2.sqrt());
        let mut hbar = Vec::with_capacity(self.factors.len());
        let mut hhat_sel = Vec::with_capacity(self.factors.len());
        for (u, l) in self.factors.iter().enumerate() {
            let x = draw(l, rng);
            let y = draw(l, rng);
            let idx = selection.stacked_indices(u);
            hhat_sel.push(CVec::from_iterator(idx.len(), idx.iter().map(|&i| x[i] * a)));
            hbar.push(x * Complex64::new(a, 0.0) + y * Complex64::new(c, 0.0));
        }
        Ok(ChannelBatch { hbar, hhat_sel, selection: selection.clone(), eps2 })
    }
}

pub(crate) fn check_eps2(eps2: f64) -> Result<()> {
    if !(0.0..1.0).contains(&eps2) {
        return Err(Error::Config(format!("error level must lie in [0, 1), got {eps2}")));
    }
    Ok(())
}

/// One realization of true (`hbar[u]`, length BM) and estimated selected
/// (`hhat_sel[u]`, length K_u, BS-major) port coefficients.
#[derive(Debug, Clone)]
pub struct ChannelBatch {
    pub hbar: Vec<CVec>,
    pub hhat_sel: Vec<CVec>,
    pub selection: PortSelection,
    pub eps2: f64,
}

impl ChannelBatch {
    /// Debug dump: magic `JPSB`, u32 version, u64 B, M, U, f64 ε², then per
    /// user u64 K_u followed by `hbar` (BM) and `hhat_sel` (K_u) as
    /// interleaved little-endian re/im doubles.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        let s = &self.selection;
        w.write_all(b"JPSB")?;
        w.write_all(&1u32.to_le_bytes())?;
        for d in [s.n_bs(), s.n_antennas(), s.n_users()] {
            w.write_all(&(d as u64).to_le_bytes())?;
        }
        w.write_all(&self.eps2.to_le_bytes())?;
        for (h, hh) in self.hbar.iter().zip(&self.hhat_sel) {
            w.write_all(&(hh.len() as u64).to_le_bytes())?;
            for z in h.iter().chain(hh.iter()) {
                w.write_all(&z.re.to_le_bytes())?;
                w.write_all(&z.im.to_le_bytes())?;
            }
        }
        Ok(())
    }
}

/// Draw a [`ChannelBatch`] directly from the statistics.
pub fn sample_true_and_estimated<R: Rng + ?Sized>(
    stats: &ScenarioStatistics,
    selection: &PortSelection,
    eps2: f64,
    rng: &mut R,
) -> Result<ChannelBatch> {
    ChannelSampler::new(stats)?.sample(selection, eps2, rng)
}

/// `h = √M F diag(√β̄) h̄` for one BS-user link.
pub fn assemble_antenna_channel(beta_row: &[f64], hbar: &[Complex64], basis: &DftBasis) -> Result<CVec> {
    let m = basis.f.nrows();
    if beta_row.len() != m || hbar.len() != m {
        return Err(Error::Dimension { expected: m, got: beta_row.len().min(hbar.len()) });
    }
    let scale = (m as f64).sqrt();
    let g = CVec::from_fn(m, |k, _| hbar[k] * (beta_row[k].sqrt() * scale));
    Ok(&basis.f * g)
}

/// Stacked antenna-domain channel `[h_{1,u}; …; h_{B,u}]`.
pub fn assemble_user_channel(stats: &ScenarioStatistics, u: usize, hbar: &CVec, basis: &DftBasis) -> Result<CVec> {
    let m = stats.n_antennas;
    let mut out = CVec::from_element(stats.n_bs * m, ZERO);
    for b in 0..stats.n_bs {
        let h = assemble_antenna_channel(stats.beta_row(b, u), &hbar.as_slice()[b * m..(b + 1) * m], basis)?;
        out.rows_mut(b * m, m).copy_from(&h);
    }
    Ok(out)
}
