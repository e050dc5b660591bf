//! Small dense complex linear algebra: operator norms, trace distance,
//! fidelity, Hermitian exponentials and the bath partial trace.
//!
//! The qubit is always the first tensor factor, so a joint index is
//! `qubit * bath_dim + bath`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use thiserror::Error;

pub type CMatrix = DMatrix<Complex64>;

/// Relative tolerance for accepting a matrix as Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-10;
/// Tolerance on negative eigenvalues and trace defects of density operators.
pub const DENSITY_TOL: f64 = 1e-10;

#[derive(Debug, Error, PartialEq)]
pub enum LinopsError {
    #[error("matrix must be square, got {0}x{1}")]
    NotSquare(usize, usize),
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("matrix is not Hermitian (relative defect {0:e})")]
    NotHermitian(f64),
    #[error("trace is {0}, expected 1")]
    InvalidTrace(f64),
    #[error("negative eigenvalue {0:e} below tolerance")]
    NotPositive(f64),
    #[error("matrix has non-finite entries")]
    NonFinite,
}

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn identity(dim: usize) -> CMatrix {
    CMatrix::identity(dim, dim)
}

pub fn pauli_x() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)])
}

pub fn pauli_z() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[c(1., 0.), c(0., 0.), c(0., 0.), c(-1., 0.)])
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// `|u><v|`.
pub fn outer(u: &DVector<Complex64>, v: &DVector<Complex64>) -> CMatrix {
    u * v.adjoint()
}

pub fn trace(a: &CMatrix) -> Complex64 {
    a.diagonal().iter().sum()
}

/// Singular values of an arbitrary matrix.
pub fn singular_values(a: &CMatrix) -> Vec<f64> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Vec::new();
    }
    a.clone().singular_values().iter().copied().collect()
}

/// Largest singular value.
pub fn sup_norm(a: &CMatrix) -> f64 {
    singular_values(a).into_iter().fold(0.0, f64::max)
}

/// Sum of singular values.
pub fn trace_norm(a: &CMatrix) -> f64 {
    singular_values(a).into_iter().sum()
}

/// `||H - H^dagger|| / max(1, ||H||)`, measured in the sup-norm.
pub fn hermitian_defect(h: &CMatrix) -> f64 {
    let scale = sup_norm(h).max(1.0);
    sup_norm(&(h - h.adjoint())) / scale
}

fn check_square(a: &CMatrix) -> Result<(), LinopsError> {
    if a.nrows() != a.ncols() {
        return Err(LinopsError::NotSquare(a.nrows(), a.ncols()));
    }
    if a.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(LinopsError::NonFinite);
    }
    Ok(())
}

/// Validate Hermiticity and return the symmetrized copy `(H + H^dagger)/2`.
pub fn hermitize(h: &CMatrix) -> Result<CMatrix, LinopsError> {
    check_square(h)?;
    let defect = hermitian_defect(h);
    if defect >= HERMITIAN_TOL {
        return Err(LinopsError::NotHermitian(defect));
    }
    Ok((h + h.adjoint()).scale(0.5))
}

/// Eigenvalues (ascending) and eigenvectors of a Hermitian matrix.
pub fn eigh(h: &CMatrix) -> Result<(Vec<f64>, CMatrix), LinopsError> {
    let h = hermitize(h)?;
    let n = h.nrows();
    let eig = h.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMatrix::from_fn(n, n, |r, k| eig.eigenvectors[(r, order[k])]);
    Ok((values, vectors))
}

/// Apply a real function to the spectrum of a Hermitian matrix.
pub fn hermitian_fn(h: &CMatrix, f: impl Fn(f64) -> Complex64) -> Result<CMatrix, LinopsError> {
    let (vals, vecs) = eigh(h)?;
    let diag = CMatrix::from_diagonal(&DVector::from_iterator(
        vals.len(),
        vals.iter().map(|&x| f(x)),
    ));
    Ok(&vecs * diag * vecs.adjoint())
}

/// `exp(scale * H)` for Hermitian `H`, via eigendecomposition.
pub fn hermitian_exp(h: &CMatrix, scale: Complex64) -> Result<CMatrix, LinopsError> {
    hermitian_fn(h, |x| (scale * x).exp())
}

/// A validated density operator.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityOperator(CMatrix);

impl DensityOperator {
    /// Accepts `rho` if it is Hermitian, has unit trace and no eigenvalue
    /// below `-DENSITY_TOL`. Stores the Hermitian part.
    pub fn new(rho: CMatrix) -> Result<Self, LinopsError> {
        let rho = hermitize(&rho)?;
        let tr = trace(&rho).re;
        if (tr - 1.0).abs() >= DENSITY_TOL {
            return Err(LinopsError::InvalidTrace(tr));
        }
        let (vals, _) = eigh(&rho)?;
        let min = vals.first().copied().unwrap_or(0.0);
        if min < -DENSITY_TOL {
            return Err(LinopsError::NotPositive(min));
        }
        Ok(DensityOperator(rho))
    }

    /// `|psi><psi|` for a (re-normalized) state vector.
    pub fn pure(psi: &DVector<Complex64>) -> Result<Self, LinopsError> {
        let norm = psi.norm();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(LinopsError::NonFinite);
        }
        let v = psi.unscale(norm);
        Self::new(outer(&v, &v))
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        DensityOperator(identity(dim).unscale(dim as f64))
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    /// PSD square root, with small negative eigenvalues clipped and the
    /// spectrum renormalized.
    fn sqrt_psd(&self) -> Result<CMatrix, LinopsError> {
        let (vals, vecs) = eigh(&self.0)?;
        if let Some(&min) = vals.first() {
            if min < -DENSITY_TOL {
                return Err(LinopsError::NotPositive(min));
            }
        }
        let clipped: Vec<f64> = vals.iter().map(|&x| x.max(0.0)).collect();
        let total: f64 = clipped.iter().sum();
        let diag = CMatrix::from_diagonal(&DVector::from_iterator(
            clipped.len(),
            clipped.iter().map(|&x| c((x / total).sqrt(), 0.0)),
        ));
        Ok(&vecs * diag * vecs.adjoint())
    }
}

fn check_same_dim(a: &CMatrix, b: &CMatrix) -> Result<(), LinopsError> {
    if a.shape() != b.shape() {
        return Err(LinopsError::DimensionMismatch(a.nrows(), b.nrows()));
    }
    Ok(())
}

/// `D[rho1, rho2] = ||rho1 - rho2||_1 / 2`.
pub fn trace_distance(rho1: &DensityOperator, rho2: &DensityOperator) -> Result<f64, LinopsError> {
    check_same_dim(rho1.matrix(), rho2.matrix())?;
    Ok((0.5 * trace_norm(&(rho1.matrix() - rho2.matrix()))).min(1.0))
}

/// Uhlmann fidelity `tr sqrt(sqrt(rho1) rho2 sqrt(rho1))`.
pub fn fidelity(rho1: &DensityOperator, rho2: &DensityOperator) -> Result<f64, LinopsError> {
    check_same_dim(rho1.matrix(), rho2.matrix())?;
    let s1 = rho1.sqrt_psd()?;
    let s2 = rho2.sqrt_psd()?;
    // ||sqrt(rho1) sqrt(rho2)||_1 avoids a second eigendecomposition.
    Ok(trace_norm(&(s1 * s2)).min(1.0))
}

/// Reduce a matrix on `C^2 ⊗ C^d` to the qubit by tracing out the bath.
pub fn partial_trace_bath_matrix(m: &CMatrix, bath_dim: usize) -> Result<CMatrix, LinopsError> {
    check_square(m)?;
    if bath_dim == 0 || m.nrows() != 2 * bath_dim {
        return Err(LinopsError::DimensionMismatch(m.nrows(), 2 * bath_dim));
    }
    Ok(CMatrix::from_fn(2, 2, |a, b| {
        (0..bath_dim)
            .map(|k| m[(a * bath_dim + k, b * bath_dim + k)])
            .sum()
    }))
}

/// `tr_B rho` for a joint qubit-bath density operator.
pub fn partial_trace_bath(
    rho: &DensityOperator,
    bath_dim: usize,
) -> Result<DensityOperator, LinopsError> {
    DensityOperator::new(partial_trace_bath_matrix(rho.matrix(), bath_dim)?)
}

/// Both sides of `|tr[Q rho Q']| <= ||Q|| ||Q'||`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelationCheck {
    pub lhs: f64,
    pub rhs: f64,
}

impl CorrelationCheck {
    pub fn margin(&self) -> f64 {
        self.rhs - self.lhs
    }

    pub fn holds(&self, tol: f64) -> bool {
        self.lhs <= self.rhs + tol
    }
}

pub fn correlation_inequality_check(
    q: &CMatrix,
    qprime: &CMatrix,
    rho: &DensityOperator,
) -> Result<CorrelationCheck, LinopsError> {
    check_same_dim(q, rho.matrix())?;
    check_same_dim(qprime, rho.matrix())?;
    let lhs = trace(&(q * rho.matrix() * qprime)).norm();
    let rhs = sup_norm(q) * sup_norm(qprime);
    Ok(CorrelationCheck { lhs, rhs })
}
