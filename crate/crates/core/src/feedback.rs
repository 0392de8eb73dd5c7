//! Selection matrices, EDT compression, scalar quantization and CSI
//! reconstruction.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use rand::Rng;

use crate::channel::DftBasis;
use crate::error::{Error, Result, SelectionError};
use crate::linalg::{CMat, CVec, HermitianEigen, ONE, ZERO};
use crate::rng::complex_normal;

/// `|Λ| × M` binary matrix with a single one per row at the selected port.
pub fn selection_matrix(lambda: &[usize], m: usize) -> std::result::Result<CMat, SelectionError> {
    for (i, &p) in lambda.iter().enumerate() {
        if p >= m {
            return Err(SelectionError::OutOfRange { bs: 0, user: 0, port: p, m });
        }
        if lambda[..i].contains(&p) {
            return Err(SelectionError::Duplicate { bs: 0, user: 0, port: p });
        }
    }
    Ok(CMat::from_fn(lambda.len(), m, |r, c| if lambda[r] == c { ONE } else { ZERO }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdtMode {
    /// Keep every eigenvalue above `rank_tol · λ_max`.
    S1,
    /// Keep the `⌈3K/4⌉` largest eigenvalues (capped at the numerical rank).
    S2,
}

/// Eigenbasis codec for one user's selected-port coefficients.
#[derive(Debug, Clone)]
pub struct EdtCodec {
    pub mode: EdtMode,
    /// `K × r`, orthonormal columns.
    pub u_r: CMat,
    /// Retained eigenvalues, descending, all positive.
    pub sigma_r: Vec<f64>,
    pub rank_tol: f64,
}

impl EdtCodec {
    pub fn build(r_lambda: &CMat, mode: EdtMode, rank_tol: f64) -> Result<Self> {
        let k = r_lambda.nrows();
        let eig = HermitianEigen::new(r_lambda);
        let rank = eig.rank(rank_tol);
        if rank == 0 {
            return Err(Error::DegenerateStatistics);
        }
        let r = match mode {
            EdtMode::S1 => rank,
            EdtMode::S2 => (3 * k).div_ceil(4).min(rank),
        };
        Ok(Self { mode, u_r: eig.vectors.columns(0, r).into_owned(), sigma_r: eig.values[..r].to_vec(), rank_tol })
    }

    pub fn k(&self) -> usize {
        self.u_r.nrows()
    }

    pub fn r(&self) -> usize {
        self.sigma_r.len()
    }

    /// `Σ_r^{−1/2} U_rᴴ ĥ`.
    pub fn compress(&self, hhat: &CVec) -> Result<CVec> {
        if hhat.len() != self.k() {
            return Err(Error::Dimension { expected: self.k(), got: hhat.len() });
        }
        let mut r = self.u_r.adjoint() * hhat;
        for (z, s) in r.iter_mut().zip(&self.sigma_r) {
            *z /= s.sqrt();
        }
        Ok(r)
    }

    /// `U_r Σ_r^{1/2} r̄`.
    pub fn reconstruct(&self, rbar: &CVec) -> Result<CVec> {
        if rbar.len() != self.r() {
            return Err(Error::Dimension { expected: self.r(), got: rbar.len() });
        }
        let scaled = CVec::from_fn(self.r(), |i, _| rbar[i] * self.sigma_r[i].sqrt());
        Ok(&self.u_r * scaled)
    }
}

/// Uniform mid-rise quantizer: amplitude on `[0, 4σ]` (clipped), phase on `[0, 2π)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quantizer {
    pub bits_amp: u32,
    pub bits_phase: u32,
    /// Standard deviation of the coefficients.
    pub sigma: f64,
}

impl Quantizer {
    pub fn new(bits_amp: u32, bits_phase: u32, sigma: f64) -> Result<Self> {
        if bits_amp == 0 || bits_phase == 0 || bits_amp > 30 || bits_phase > 30 {
            return Err(Error::Config(format!("quantizer bits must lie in 1..=30, got {bits_amp}/{bits_phase}")));
        }
        if !(sigma > 0.0) {
            return Err(Error::Config(format!("quantizer scale must be positive, got {sigma}")));
        }
        Ok(Self { bits_amp, bits_phase, sigma })
    }

    pub fn bits_per_coefficient(&self) -> usize {
        (self.bits_amp + self.bits_phase) as usize
    }

    pub fn quantize_one(&self, z: Complex64) -> Complex64 {
        let la = 1u64 << self.bits_amp;
        let step_a = 4.0 * self.sigma / la as f64;
        let ia = ((z.norm() / step_a).floor() as u64).min(la - 1);
        let lp = 1u64 << self.bits_phase;
        let step_p = 2.0 * PI / lp as f64;
        let phase = z.arg().rem_euclid(2.0 * PI);
        let ip = ((phase / step_p).floor() as u64).min(lp - 1);
        Complex64::from_polar((ia as f64 + 0.5) * step_a, (ip as f64 + 0.5) * step_p)
    }

    /// Quantized vector and the number of feedback bits spent.
    pub fn quantize(&self, r: &CVec) -> (CVec, usize) {
        (r.map(|z| self.quantize_one(z)), self.bits_per_coefficient() * r.len())
    }
}

/// Mean squared quantization error on `n` draws of `CN(0, 1)`.
pub fn measure_eps_q2<R: Rng + ?Sized>(bits_amp: u32, bits_phase: u32, n: usize, rng: &mut R) -> Result<f64> {
    let q = Quantizer::new(bits_amp, bits_phase, 1.0)?;
    let mut acc = 0.0;
    for _ in 0..n {
        let z = complex_normal(rng);
        acc += (z - q.quantize_one(z)).norm_sqr();
    }
    Ok(acc / n.max(1) as f64)
}

/// `ĥ_{b,u} = √M F_Λ B_Λ ĥ̄_Λ`.
pub fn reconstruct_antenna(hhat_sel: &[Complex64], beta_row: &[f64], lambda: &[usize], basis: &DftBasis) -> Result<CVec> {
    let m = basis.f.nrows();
    if hhat_sel.len() != lambda.len() || beta_row.len() != m {
        return Err(Error::Dimension { expected: lambda.len(), got: hhat_sel.len() });
    }
    let scale = (m as f64).sqrt();
    let mut out = CVec::from_element(m, ZERO);
    for (&p, &h) in lambda.iter().zip(hhat_sel) {
        if p >= m {
            return Err(SelectionError::OutOfRange { bs: 0, user: 0, port: p, m }.into());
        }
        out.axpy(h * (scale * beta_row[p].sqrt()), &basis.f.column(p), ONE);
    }
    Ok(out)
}

/// Per-user feedback accounting under S1.
#[derive(Debug, Clone, PartialEq)]
pub struct CompressionStats {
    /// `(r_u, K_u)` per user.
    pub per_user: Vec<(usize, usize)>,
    pub bits_per_coefficient: usize,
    /// `Σ r_u / Σ K_u`.
    pub ratio: f64,
}

pub fn compression_ratio(codecs: &[EdtCodec], bits_per_coefficient: usize) -> CompressionStats {
    let per_user: Vec<(usize, usize)> = codecs.iter().map(|c| (c.r(), c.k())).collect();
    let compressed: usize = per_user.iter().map(|p| p.0 * bits_per_coefficient).sum();
    let full: usize = per_user.iter().map(|p| p.1 * bits_per_coefficient).sum();
    let ratio = if full == 0 { 1.0 } else { compressed as f64 / full as f64 };
    CompressionStats { per_user, bits_per_coefficient, ratio }
}

impl CompressionStats {
    /// Rows `user,r_u,K_u,bits,cr1`.
    pub fn write_trace_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "user,r_u,K_u,bits,cr1")?;
        for (u, &(r, k)) in self.per_user.iter().enumerate() {
            writeln!(w, "{u},{r},{k},{},{}", r * self.bits_per_coefficient, self.ratio)?;
        }
        Ok(())
    }
}
