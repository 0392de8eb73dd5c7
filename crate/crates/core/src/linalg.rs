//! Dense complex helpers on top of nalgebra.
//!
//! The Hermitian eigensolver goes through faer: nalgebra's implicit QR
//! returns NaN on some block-sparse correlation matrices.

use faer::{c64, Mat, Side};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

pub const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
pub const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };

/// Eigendecomposition of a Hermitian matrix, eigenvalues sorted descending.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    /// Columns are eigenvectors, in the order of `values`.
    pub vectors: CMat,
}

impl HermitianEigen {
    pub fn new(a: &CMat) -> Self {
        let n = a.nrows();
        assert_eq!(n, a.ncols(), "Hermitian eigensolve needs a square matrix");
        if n == 0 {
            return Self { values: Vec::new(), vectors: CMat::zeros(0, 0) };
        }
        let sym = hermitian_part(a);
        // solve each block of the sparsity pattern separately; faer's QR can
        // stall on large exactly block-diagonal inputs with many zero rows
        let mut pairs: Vec<(f64, usize, CVec)> = Vec::with_capacity(n);
        for block in components(&sym) {
            let k = block.len();
            let m = Mat::<c64>::from_fn(k, k, |r, c| {
                let v = sym[(block[r], block[c])];
                c64::new(v.re, v.im)
            });
            let eig = m.self_adjoint_eigen(Side::Lower).expect("Hermitian eigensolver did not converge");
            let (s, u) = (eig.S(), eig.U());
            for j in 0..k {
                let mut v = CVec::zeros(n);
                for (r, &row) in block.iter().enumerate() {
                    v[row] = Complex64::new(u[(r, j)].re, u[(r, j)].im);
                }
                pairs.push((s[j].re, block[0] * n + j, v));
            }
        }
        pairs.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)));
        let values = pairs.iter().map(|p| p.0).collect();
        let vectors = CMat::from_fn(n, n, |r, c| pairs[c].2[r]);
        Self { values, vectors }
    }

    pub fn max(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    pub fn min(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }

    /// Number of eigenvalues above `rel_tol * max(λ_max, 0)`.
    pub fn rank(&self, rel_tol: f64) -> usize {
        let thr = rel_tol * self.max().max(0.0);
        self.values.iter().filter(|&&v| v > thr && v > 0.0).count()
    }

    /// `V diag(f(λ)) Vᴴ`.
    pub fn apply(&self, f: impl Fn(f64) -> f64) -> CMat {
        let n = self.values.len();
        let mut scaled = self.vectors.clone();
        for (c, &v) in self.values.iter().enumerate() {
            let s = f(v);
            for r in 0..n {
                scaled[(r, c)] *= s;
            }
        }
        &scaled * self.vectors.adjoint()
    }

    /// `V diag(√max(λ,0))`, a square-root factor with `L Lᴴ = A⁺`.
    pub fn sqrt_factor(&self) -> CMat {
        let n = self.values.len();
        let mut f = self.vectors.clone();
        for (c, &v) in self.values.iter().enumerate() {
            let s = v.max(0.0).sqrt();
            for r in 0..n {
                f[(r, c)] *= s;
            }
        }
        f
    }
}

/// Index sets of the connected components of the nonzero pattern of `a`.
fn components(a: &CMat) -> Vec<Vec<usize>> {
    let n = a.nrows();
    let mut label = vec![usize::MAX; n];
    let mut out = Vec::new();
    for start in 0..n {
        if label[start] != usize::MAX {
            continue;
        }
        let id = out.len();
        label[start] = id;
        let mut members = vec![start];
        let mut next = 0;
        while next < members.len() {
            let r = members[next];
            next += 1;
            for c in 0..n {
                if label[c] == usize::MAX && a[(r, c)] != ZERO {
                    label[c] = id;
                    members.push(c);
                }
            }
        }
        members.sort_unstable();
        out.push(members);
    }
    out
}

pub fn hermitian_part(a: &CMat) -> CMat {
    (a + a.adjoint()).map(|z| z * 0.5)
}

/// Principal square root of a Hermitian PSD matrix, negative eigenvalues clipped.
pub fn hermitian_sqrt(a: &CMat) -> CMat {
    HermitianEigen::new(a).apply(|v| v.max(0.0).sqrt())
}

pub fn real_diag(d: &[f64]) -> CMat {
    CMat::from_fn(d.len(), d.len(), |r, c| if r == c { Complex64::new(d[r], 0.0) } else { ZERO })
}

pub fn frobenius_sq(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum()
}

pub fn trace(a: &CMat) -> Complex64 {
    (0..a.nrows().min(a.ncols())).map(|i| a[(i, i)]).sum()
}

/// `‖A − B‖_F`.
pub fn frobenius_dist(a: &CMat, b: &CMat) -> f64 {
    frobenius_sq(&(a - b)).sqrt()
}

pub fn submatrix(a: &CMat, rows: &[usize], cols: &[usize]) -> CMat {
    CMat::from_fn(rows.len(), cols.len(), |r, c| a[(rows[r], cols[c])])
}
