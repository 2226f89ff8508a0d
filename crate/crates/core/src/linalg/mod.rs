//! Dense matrix utilities: Lyapunov solves, matrix exponentials and their
//! directional derivatives, and spectral tests.

mod expm;
mod lyapunov;
mod spectrum;

pub use expm::{expm, expm_gateaux, phi_e};
pub use lyapunov::solve_lyapunov;
pub use spectrum::{spectrum, hermitian_min_eigenvalue, is_hurwitz, HurwitzReport, HURWITZ_MARGIN};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type RealMatrix = DMatrix<f64>;
pub type ComplexMatrix = DMatrix<Complex64>;
pub type RealVector = DVector<f64>;

/// Tolerance for entrywise symmetry / antisymmetry assertions.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// The 2x2 symplectic unit `[[0, 1], [-1, 0]]`.
pub fn symplectic_unit() -> RealMatrix {
    RealMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0])
}

/// `[[0, 1], [-1, 0]] ⊗ I_{dim/2}`, the cross-commutation matrix of `dim`
/// quantum Wiener processes. `dim` must be even.
pub fn canonical_j(dim: usize) -> RealMatrix {
    assert!(dim % 2 == 0, "canonical_j requires an even dimension");
    symplectic_unit().kronecker(&RealMatrix::identity(dim / 2, dim / 2))
}

/// `I_{dim/2} ⊗ [[0, 1], [-1, 0]]`: canonical pairs `(x_{2k-1}, x_{2k})` on
/// the block diagonal.
pub fn paired_j(dim: usize) -> RealMatrix {
    assert!(dim % 2 == 0, "paired_j requires an even dimension");
    RealMatrix::identity(dim / 2, dim / 2).kronecker(&symplectic_unit())
}

pub fn sym(a: &RealMatrix) -> RealMatrix {
    (a + a.transpose()) * 0.5
}

pub fn antisym(a: &RealMatrix) -> RealMatrix {
    (a - a.transpose()) * 0.5
}

/// Largest entrywise deviation from symmetry, relative to `1 + max|a|`.
fn relative_asymmetry(a: &RealMatrix, sign: f64) -> f64 {
    if !a.is_square() {
        return f64::INFINITY;
    }
    let scale = 1.0 + a.amax();
    let mut worst = 0.0f64;
    for i in 0..a.nrows() {
        for j in 0..i + 1 {
            worst = worst.max((a[(i, j)] - sign * a[(j, i)]).abs());
        }
    }
    worst / scale
}

pub fn is_symmetric(a: &RealMatrix, tol: f64) -> bool {
    relative_asymmetry(a, 1.0) <= tol
}

pub fn is_antisymmetric(a: &RealMatrix, tol: f64) -> bool {
    relative_asymmetry(a, -1.0) <= tol
}

/// Frobenius inner product `⟨a, b⟩ = tr(aᵀ b)`.
pub fn frobenius(a: &RealMatrix, b: &RealMatrix) -> f64 {
    a.dot(b)
}

/// Column-stacking vectorization.
pub fn vec(a: &RealMatrix) -> RealVector {
    RealVector::from_column_slice(a.as_slice())
}

pub fn unvec(v: &RealVector, rows: usize, cols: usize) -> RealMatrix {
    RealMatrix::from_column_slice(rows, cols, v.as_slice())
}

pub fn block_diag(a: &RealMatrix, b: &RealMatrix) -> RealMatrix {
    let mut out = RealMatrix::zeros(a.nrows() + b.nrows(), a.ncols() + b.ncols());
    out.view_mut((0, 0), a.shape()).copy_from(a);
    out.view_mut((a.nrows(), a.ncols()), b.shape()).copy_from(b);
    out
}

pub fn to_complex(a: &RealMatrix) -> ComplexMatrix {
    a.map(|x| Complex64::new(x, 0.0))
}

pub(crate) fn all_finite(a: &RealMatrix) -> bool {
    a.iter().all(|x| x.is_finite())
}
