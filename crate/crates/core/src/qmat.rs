//! Dense complex matrix kernel: Kronecker products, partial trace/transpose,
//! Hermitian eigendecomposition, unitary evolution, trace norm.
//!
//! Everything here is a pure function on small dense matrices. Row-major
//! storage throughout; dimensions stay well under 10^3.

use ndarray::{Array1, Array2};
use ndarray_linalg::{Eigh, UPLO};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

pub type CMat = Array2<C64>;
pub type CVec = Array1<C64>;

/// Absolute tolerance on ||m - m^dag||_F below which a matrix is accepted as
/// Hermitian and symmetrized.
pub const HERM_TOL: f64 = 1e-9;

/// Dimensions of the two tensor factors of a bipartite space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BipartiteShape {
    pub d1: usize,
    pub d2: usize,
}

impl BipartiteShape {
    pub fn new(d1: usize, d2: usize) -> Self {
        assert!(d1 >= 1 && d2 >= 1, "factor dimensions must be >= 1");
        Self { d1, d2 }
    }

    pub fn total(&self) -> usize {
        self.d1 * self.d2
    }

    fn check(&self, m: &CMat) -> Result<()> {
        if m.nrows() != self.total() || m.ncols() != self.total() {
            return Err(Error::Shape(format!(
                "matrix is {}x{}, expected {}x{} = ({} x {})^2",
                m.nrows(),
                m.ncols(),
                self.total(),
                self.total(),
                self.d1,
                self.d2
            )));
        }
        Ok(())
    }
}

/// Eigendecomposition of a Hermitian matrix: real ascending eigenvalues and a
/// unitary matrix of column eigenvectors.
#[derive(Debug, Clone)]
pub struct HermitianEigensystem {
    pub eigenvalues: Array1<f64>,
    pub eigenvectors: CMat,
}

impl HermitianEigensystem {
    /// V f(diag) V^dag for an entrywise function of the eigenvalues.
    pub fn apply<F: Fn(f64) -> C64>(&self, f: F) -> CMat {
        let d = self.eigenvalues.len();
        let mut scaled = CMat::zeros((d, d));
        for (j, col) in self.eigenvectors.columns().into_iter().enumerate() {
            let fj = f(self.eigenvalues[j]);
            for i in 0..d {
                scaled[(i, j)] = col[i] * fj;
            }
        }
        scaled.dot(&dagger(&self.eigenvectors))
    }
}

pub fn identity(d: usize) -> CMat {
    CMat::eye(d)
}

pub fn dagger(m: &CMat) -> CMat {
    m.t().mapv(|z| z.conj())
}

pub fn trace(m: &CMat) -> C64 {
    m.diag().sum()
}

pub fn fro_norm(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    assert_eq!(a.dim(), b.dim(), "max_abs_diff on mismatched shapes");
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// Entrywise equality within an absolute tolerance.
pub fn approx_eq(a: &CMat, b: &CMat, tol: f64) -> bool {
    a.dim() == b.dim() && max_abs_diff(a, b) <= tol
}

/// ||m - m^dag||_F, the Hermiticity deviation.
pub fn herm_deviation(m: &CMat) -> f64 {
    let mut s = 0.0;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            s += (m[(i, j)] - m[(j, i)].conj()).norm_sqr();
        }
    }
    s.sqrt()
}

/// (m + m^dag)/2.
pub fn symmetrize(m: &CMat) -> CMat {
    let md = dagger(m);
    (m + &md).mapv(|z| z * 0.5)
}

/// Kronecker product. Output shape (a.rows * b.rows, a.cols * b.cols).
pub fn kron(a: &CMat, b: &CMat) -> CMat {
    ndarray::linalg::kron(a, b)
}

/// Which tensor factor an operation applies to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Factor {
    First,
    Second,
}

/// Trace over one factor of a bipartite matrix. Preserves the total trace.
pub fn partial_trace(m: &CMat, shape: BipartiteShape, which: Factor) -> Result<CMat> {
    shape.check(m)?;
    let (d1, d2) = (shape.d1, shape.d2);
    match which {
        Factor::First => {
            let mut out = CMat::zeros((d2, d2));
            for j in 0..d2 {
                for l in 0..d2 {
                    let mut s = C64::new(0.0, 0.0);
                    for i in 0..d1 {
                        s += m[(i * d2 + j, i * d2 + l)];
                    }
                    out[(j, l)] = s;
                }
            }
            Ok(out)
        }
        Factor::Second => {
            let mut out = CMat::zeros((d1, d1));
            for i in 0..d1 {
                for k in 0..d1 {
                    let mut s = C64::new(0.0, 0.0);
                    for j in 0..d2 {
                        s += m[(i * d2 + j, k * d2 + j)];
                    }
                    out[(i, k)] = s;
                }
            }
            Ok(out)
        }
    }
}

/// Partial transpose of the first factor: entry ((i,j),(k,l)) of the result
/// equals entry ((k,j),(i,l)) of the input.
pub fn partial_transpose(m: &CMat, shape: BipartiteShape) -> Result<CMat> {
    shape.check(m)?;
    let (d1, d2) = (shape.d1, shape.d2);
    let mut out = CMat::zeros(m.raw_dim());
    for i in 0..d1 {
        for k in 0..d1 {
            for j in 0..d2 {
                for l in 0..d2 {
                    out[(i * d2 + j, k * d2 + l)] = m[(k * d2 + j, i * d2 + l)];
                }
            }
        }
    }
    Ok(out)
}

/// Hermitian eigendecomposition. Inputs within `HERM_TOL` of Hermitian are
/// symmetrized before factorization; anything further off is rejected.
pub fn herm_eig(h: &CMat) -> Result<HermitianEigensystem> {
    if h.nrows() != h.ncols() {
        return Err(Error::Shape(format!(
            "herm_eig needs a square matrix, got {}x{}",
            h.nrows(),
            h.ncols()
        )));
    }
    let dev = herm_deviation(h);
    if dev > HERM_TOL {
        return Err(Error::NotHermitian { dev, tol: HERM_TOL });
    }
    let sym = symmetrize(h).as_standard_layout().to_owned();
    let (eigenvalues, eigenvectors) = sym
        .eigh(UPLO::Lower)
        .map_err(|e| Error::Eigensolver(e.to_string()))?;
    // zheev sees the row-major buffer as its transpose, so the vectors come
    // back conjugated; undo that so columns satisfy m v = lambda v
    let eigenvectors = eigenvectors.mapv(|z| z.conj());
    Ok(HermitianEigensystem {
        eigenvalues,
        eigenvectors,
    })
}

/// U(t) = exp(-i h t) via eigendecomposition; exact up to eigensolver accuracy.
pub fn evolve_unitary(h: &CMat, t: f64) -> Result<CMat> {
    let eig = herm_eig(h)?;
    Ok(eig.apply(|e| (-C64::i() * e * t).exp()))
}

/// Trace norm of a Hermitian matrix: the sum of absolute eigenvalues.
pub fn trace_norm(m: &CMat) -> Result<f64> {
    let eig = herm_eig(m)?;
    Ok(eig.eigenvalues.iter().map(|e| e.abs()).sum())
}
