use nalgebra::Complex;

use super::RealMatrix;

/// Strict-stability threshold on the spectral abscissa.
pub const HURWITZ_MARGIN: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HurwitzReport {
    pub stable: bool,
    /// Largest real part over the spectrum.
    pub margin: f64,
}

pub fn spectrum(a: &RealMatrix) -> Vec<Complex<f64>> {
    if a.nrows() == 0 {
        return Vec::new();
    }
    a.complex_eigenvalues().iter().copied().collect()
}

/// Spectral abscissa test. Stable iff every eigenvalue has real part below
/// `-HURWITZ_MARGIN`.
pub fn is_hurwitz(a: &RealMatrix) -> HurwitzReport {
    let margin = spectrum(a)
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max);
    HurwitzReport {
        stable: margin.is_finite() && margin < -HURWITZ_MARGIN,
        margin,
    }
}

/// Smallest eigenvalue of the Hermitian matrix `re + i·im` (`re` symmetric,
/// `im` antisymmetric), via its real symmetric embedding
/// `[[re, -im], [im, re]]`, which has the same spectrum with doubled
/// multiplicities.
pub fn hermitian_min_eigenvalue(re: &RealMatrix, im: &RealMatrix) -> f64 {
    let n = re.nrows();
    if n == 0 {
        return 0.0;
    }
    let mut big = RealMatrix::zeros(2 * n, 2 * n);
    big.view_mut((0, 0), (n, n)).copy_from(re);
    big.view_mut((n, n), (n, n)).copy_from(re);
    big.view_mut((0, n), (n, n)).copy_from(&(-im));
    big.view_mut((n, 0), (n, n)).copy_from(im);
    let big = (&big + big.transpose()) * 0.5;
    big.symmetric_eigenvalues().min()
}
