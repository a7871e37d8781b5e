//! Density matrices, Schmidt decomposition / purification, spectrum splitting
//! and the qubit Bloch parameterization.

use ndarray::Array1;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::qmat::{
    self, herm_deviation, herm_eig, kron, partial_trace, symmetrize, BipartiteShape,
    CMat, Factor, HermitianEigensystem, HERM_TOL,
};

/// Density-matrix validation tolerances: trace within `TRACE_TOL` of one,
/// eigenvalues no lower than `-EIG_NEG_TOL`.
pub const TRACE_TOL: f64 = 1e-10;
pub const EIG_NEG_TOL: f64 = 1e-10;

/// Default threshold separating "zero" from "nonzero" eigenvalues of a state.
/// The vanishing/non-vanishing determinant dichotomy is exact in math but
/// thresholded in floating point, so this is configurable at the call sites.
pub const ZERO_TOL_DEFAULT: f64 = 1e-10;

/// Guard for matrix inversion of a state: refuse below this smallest eigenvalue.
pub const INV_GUARD: f64 = 1e-8;

/// Eigenvalues below this are clipped to zero inside matrix square roots.
const SQRT_CLIP: f64 = 1e-14;

/// A positive semidefinite, unit-trace Hermitian matrix.
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    mat: CMat,
    dim: usize,
}

impl DensityMatrix {
    /// Validate and wrap a candidate matrix, naming the violated invariant on
    /// failure. The stored matrix is symmetrized.
    pub fn new(m: CMat) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::InvalidDensity(format!(
                "not square: {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let dev = herm_deviation(&m);
        if dev > HERM_TOL {
            return Err(Error::InvalidDensity(format!(
                "not Hermitian: ||m - m^dag||_F = {dev:.3e} exceeds {HERM_TOL:.1e}"
            )));
        }
        let sym = symmetrize(&m);
        let tr = qmat::trace(&sym);
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::InvalidDensity(format!(
                "trace = {tr} differs from 1 beyond {TRACE_TOL:.1e}"
            )));
        }
        let eig = herm_eig(&sym)?;
        if let Some(bad) = eig.eigenvalues.iter().find(|&&e| e < -EIG_NEG_TOL) {
            return Err(Error::InvalidDensity(format!(
                "negative eigenvalue {bad:.3e} below -{EIG_NEG_TOL:.1e}"
            )));
        }
        let dim = sym.nrows();
        Ok(Self { mat: sym, dim })
    }

    /// Diagonal state from a probability vector.
    pub fn from_eigenvalues(eigenvalues: &[f64]) -> Result<Self> {
        let d = eigenvalues.len();
        let mut m = CMat::zeros((d, d));
        for (i, &e) in eigenvalues.iter().enumerate() {
            m[(i, i)] = C64::new(e, 0.0);
        }
        Self::new(m)
    }

    /// Pure basis state |k><k|.
    pub fn pure_basis(dim: usize, k: usize) -> Result<Self> {
        if k >= dim {
            return Err(Error::Domain(format!("basis index {k} out of range {dim}")));
        }
        let mut m = CMat::zeros((dim, dim));
        m[(k, k)] = C64::new(1.0, 0.0);
        Self::new(m)
    }

    pub fn mat(&self) -> &CMat {
        &self.mat
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn purity(&self) -> f64 {
        qmat::trace(&self.mat.dot(&self.mat)).re
    }

    pub fn eig(&self) -> Result<HermitianEigensystem> {
        herm_eig(&self.mat)
    }

    /// Matrix square root in the eigenbasis; eigenvalues below 1e-14 clip to 0.
    pub fn sqrt(&self) -> Result<CMat> {
        let eig = self.eig()?;
        Ok(eig.apply(|e| C64::new(if e < SQRT_CLIP { 0.0 } else { e.sqrt() }, 0.0)))
    }

    /// Inverse in the eigenbasis, guarded against near-singularity.
    pub fn inverse(&self) -> Result<CMat> {
        let eig = self.eig()?;
        let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        if min < INV_GUARD {
            return Err(Error::Domain(format!(
                "near-singular state (min eigenvalue {min:.3e} < {INV_GUARD:.1e}); \
                 inverse-based formulas unreliable"
            )));
        }
        Ok(eig.apply(|e| C64::new(1.0 / e, 0.0)))
    }
}

/// Equivalent to `DensityMatrix::new`.
pub fn validate_density(m: &CMat) -> Result<DensityMatrix> {
    DensityMatrix::new(m.clone())
}

/// Schmidt data of a pure bipartite state: non-negative coefficients in
/// descending order and the paired orthonormal bases (columns).
#[derive(Debug, Clone)]
pub struct SchmidtPair {
    pub coeffs: Vec<f64>,
    pub basis_left: CMat,
    pub basis_right: CMat,
}

impl SchmidtPair {
    pub fn dim(&self) -> usize {
        self.coeffs.len()
    }

    /// The pure state vector sum_i alpha_i |left_i> (x) |right_i>.
    pub fn omega(&self) -> Array1<C64> {
        let d = self.dim();
        let mut v = Array1::zeros(d * d);
        for i in 0..d {
            for x in 0..d {
                for y in 0..d {
                    v[x * d + y] +=
                        C64::new(self.coeffs[i], 0.0) * self.basis_left[(x, i)] * self.basis_right[(y, i)];
                }
            }
        }
        v
    }

    /// Projector onto the reconstructed pure state.
    pub fn projector(&self) -> CMat {
        let v = self.omega();
        let d2 = v.len();
        let mut m = CMat::zeros((d2, d2));
        for i in 0..d2 {
            for j in 0..d2 {
                m[(i, j)] = v[i] * v[j].conj();
            }
        }
        m
    }

    /// Reduced state on the right factor: sum_i alpha_i^2 |right_i><right_i|.
    pub fn rho_right(&self) -> CMat {
        let d = self.dim();
        let mut m = CMat::zeros((d, d));
        for (i, &a) in self.coeffs.iter().enumerate() {
            let col = self.basis_right.column(i);
            for x in 0..d {
                for y in 0..d {
                    m[(x, y)] += C64::new(a * a, 0.0) * col[x] * col[y].conj();
                }
            }
        }
        m
    }

    /// Reduced state on the left factor.
    pub fn rho_left(&self) -> CMat {
        let d = self.dim();
        let mut m = CMat::zeros((d, d));
        for (i, &a) in self.coeffs.iter().enumerate() {
            let col = self.basis_left.column(i);
            for x in 0..d {
                for y in 0..d {
                    m[(x, y)] += C64::new(a * a, 0.0) * col[x] * col[y].conj();
                }
            }
        }
        m
    }
}

/// Fix each column's global phase so its first component above threshold is
/// real non-negative. Keeps golden outputs stable across eigensolver quirks.
fn fix_phases(v: &mut CMat) {
    for mut col in v.columns_mut() {
        let pivot = col.iter().find(|z| z.norm() > 1e-9).cloned();
        if let Some(p) = pivot {
            let phase = p / p.norm();
            let corr = phase.conj();
            col.mapv_inplace(|z| z * corr);
        }
    }
}

/// Deterministic eigenvector ordering for tied eigenvalues: lexicographic by
/// (re, im) of the components.
fn lex_less(a: ndarray::ArrayView1<C64>, b: ndarray::ArrayView1<C64>) -> bool {
    for (x, y) in a.iter().zip(b.iter()) {
        if (x.re - y.re).abs() > 1e-12 {
            return x.re < y.re;
        }
        if (x.im - y.im).abs() > 1e-12 {
            return x.im < y.im;
        }
    }
    false
}

/// Purify a state: alpha_i = sqrt(lambda_i) with the eigenvectors of the input
/// as the right basis and the coordinate basis as the left (ancilla) basis.
/// Tracing the reconstructed projector over the left factor returns the input.
pub fn purify(rho: &DensityMatrix) -> Result<SchmidtPair> {
    let eig = rho.eig()?;
    let d = rho.dim();
    let mut order: Vec<usize> = (0..d).collect();
    // descending eigenvalues, ties broken lexicographically for determinism
    order.sort_by(|&i, &j| {
        let (ei, ej) = (eig.eigenvalues[i], eig.eigenvalues[j]);
        if (ei - ej).abs() > 1e-12 {
            ej.partial_cmp(&ei).unwrap()
        } else if lex_less(eig.eigenvectors.column(i), eig.eigenvectors.column(j)) {
            std::cmp::Ordering::Less
        } else {
            std::cmp::Ordering::Greater
        }
    });
    let mut coeffs = Vec::with_capacity(d);
    let mut basis_right = CMat::zeros((d, d));
    for (slot, &idx) in order.iter().enumerate() {
        coeffs.push(eig.eigenvalues[idx].max(0.0).sqrt());
        for r in 0..d {
            basis_right[(r, slot)] = eig.eigenvectors[(r, idx)];
        }
    }
    fix_phases(&mut basis_right);
    Ok(SchmidtPair {
        coeffs,
        basis_left: qmat::identity(d),
        basis_right,
    })
}

/// Spectrum of a state split into nonzero and zero parts, with the projectors
/// onto the two subspaces and the eigenbasis ordered nonzero-first.
#[derive(Debug, Clone)]
pub struct SpectrumSplit {
    pub n_nonzero: usize,
    pub proj_nonzero: CMat,
    pub proj_zero: CMat,
    /// Eigenvectors as columns, nonzero eigenvalues first (descending).
    pub basis: CMat,
    /// Eigenvalues in the same order as `basis`.
    pub eigenvalues: Vec<f64>,
    pub zero_tol: f64,
}

impl SpectrumSplit {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Rank of the zero-eigenvalue subspace.
    pub fn n_zero(&self) -> usize {
        self.dim() - self.n_nonzero
    }
}

/// Split the spectrum of a state at `zero_tol`.
pub fn split_spectrum(rho: &DensityMatrix, zero_tol: f64) -> Result<SpectrumSplit> {
    if zero_tol <= 0.0 {
        return Err(Error::Domain("zero_tol must be positive".into()));
    }
    let eig = rho.eig()?;
    let d = rho.dim();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].partial_cmp(&eig.eigenvalues[i]).unwrap());
    let mut basis = CMat::zeros((d, d));
    let mut eigenvalues = Vec::with_capacity(d);
    for (slot, &idx) in order.iter().enumerate() {
        eigenvalues.push(eig.eigenvalues[idx]);
        for r in 0..d {
            basis[(r, slot)] = eig.eigenvectors[(r, idx)];
        }
    }
    fix_phases(&mut basis);
    let n_nonzero = eigenvalues.iter().filter(|&&e| e >= zero_tol).count();
    let mut proj_nonzero = CMat::zeros((d, d));
    let mut proj_zero = CMat::zeros((d, d));
    for k in 0..d {
        let col = basis.column(k);
        let target = if k < n_nonzero {
            &mut proj_nonzero
        } else {
            &mut proj_zero
        };
        for x in 0..d {
            for y in 0..d {
                target[(x, y)] += col[x] * col[y].conj();
            }
        }
    }
    Ok(SpectrumSplit {
        n_nonzero,
        proj_nonzero,
        proj_zero,
        basis,
        eigenvalues,
        zero_tol,
    })
}

/// Bloch-sphere coordinates of a qubit state.
#[derive(Debug, Clone, Copy)]
pub struct BlochVector {
    pub ax: f64,
    pub ay: f64,
    pub az: f64,
}

impl BlochVector {
    pub fn new(ax: f64, ay: f64, az: f64) -> Self {
        Self { ax, ay, az }
    }

    pub fn r(&self) -> f64 {
        (self.ax * self.ax + self.ay * self.ay + self.az * self.az).sqrt()
    }
}

/// rho = (I + a . sigma)/2. Requires r <= 1.
pub fn bloch_to_density(b: &BlochVector) -> Result<DensityMatrix> {
    let r = b.r();
    if r > 1.0 + 1e-12 {
        return Err(Error::Domain(format!("Bloch radius {r} exceeds 1")));
    }
    let mut m = CMat::zeros((2, 2));
    m[(0, 0)] = C64::new(0.5 * (1.0 + b.az), 0.0);
    m[(1, 1)] = C64::new(0.5 * (1.0 - b.az), 0.0);
    m[(0, 1)] = C64::new(0.5 * b.ax, -0.5 * b.ay);
    m[(1, 0)] = C64::new(0.5 * b.ax, 0.5 * b.ay);
    DensityMatrix::new(m)
}

/// Inverse of `bloch_to_density`; requires a 2x2 state.
pub fn density_to_bloch(rho: &DensityMatrix) -> Result<BlochVector> {
    if rho.dim() != 2 {
        return Err(Error::Shape(format!(
            "Bloch representation needs dim 2, got {}",
            rho.dim()
        )));
    }
    let m = rho.mat();
    Ok(BlochVector {
        ax: 2.0 * m[(1, 0)].re,
        ay: 2.0 * m[(1, 0)].im,
        az: (m[(0, 0)] - m[(1, 1)]).re,
    })
}

/// Sanity check used by tests: reconstructed purification traces back to rho.
pub fn purification_roundtrip_residual(rho: &DensityMatrix, pair: &SchmidtPair) -> f64 {
    let proj = pair.projector();
    let d = pair.dim();
    let back = partial_trace(&proj, BipartiteShape::new(d, d), Factor::First).unwrap();
    qmat::max_abs_diff(&back, rho.mat())
}

/// Tensor product of two validated states is again a state.
pub fn product_state(a: &DensityMatrix, b: &DensityMatrix) -> DensityMatrix {
    let m = kron(a.mat(), b.mat());
    let dim = m.nrows();
    DensityMatrix { mat: m, dim }
}

/// Internal constructor for matrices known to be valid states (e.g. unitary
/// images of validated states); symmetrizes but skips the spectral check.
pub(crate) fn trusted_density(m: CMat) -> DensityMatrix {
    let dim = m.nrows();
    DensityMatrix {
        mat: symmetrize(&m),
        dim,
    }
}
