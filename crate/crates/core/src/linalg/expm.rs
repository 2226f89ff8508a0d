use nalgebra::{ComplexField, DMatrix};

use crate::error::{check_shape, Error, Result};

const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

// Largest 1-norm for which the [13/13] approximant meets unit roundoff.
const THETA13: f64 = 5.371920351148152;

fn one_norm<T: ComplexField<RealField = f64>>(a: &DMatrix<T>) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|x| x.clone().abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Matrix exponential by scaling and squaring with the [13/13] Padé approximant.
pub fn expm<T: ComplexField<RealField = f64>>(a: &DMatrix<T>) -> Result<DMatrix<T>> {
    if !a.is_square() {
        return Err(Error::ShapeMismatch {
            context: "expm",
            expected: "square matrix".into(),
            got: format!("{}x{}", a.nrows(), a.ncols()),
        });
    }
    let n = a.nrows();
    if n == 0 {
        return Ok(a.clone());
    }
    let norm = one_norm(a);
    if !norm.is_finite() {
        return Err(Error::NonFinite("expm input"));
    }

    let squarings = if norm > THETA13 {
        (norm / THETA13).log2().ceil() as i32
    } else {
        0
    };
    let a = a * T::from_real(2f64.powi(-squarings));

    let b = |k: usize| T::from_real(PADE13[k]);
    let ident = DMatrix::<T>::identity(n, n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;

    let inner_u = &a6 * b(13) + &a4 * b(11) + &a2 * b(9);
    let u = &a * (&a6 * inner_u + &a6 * b(7) + &a4 * b(5) + &a2 * b(3) + &ident * b(1));
    let inner_v = &a6 * b(12) + &a4 * b(10) + &a2 * b(8);
    let v = &a6 * inner_v + &a6 * b(6) + &a4 * b(4) + &a2 * b(2) + &ident * b(0);

    let mut r = (&v - &u)
        .lu()
        .solve(&(&v + &u))
        .ok_or(Error::NonFinite("expm Padé denominator"))?;
    for _ in 0..squarings {
        r = &r * &r;
    }
    if r.iter().any(|x| !x.clone().abs().is_finite()) {
        return Err(Error::NonFinite("expm result"));
    }
    Ok(r)
}

/// Directional (Gateaux) derivative of `e^A` along `dir`, read off the lower
/// left block of `exp([[A, 0], [dir, A]])`.
pub fn expm_gateaux<T: ComplexField<RealField = f64>>(
    a: &DMatrix<T>,
    dir: &DMatrix<T>,
) -> Result<DMatrix<T>> {
    check_shape("expm_gateaux", a.shape(), dir.shape())?;
    let n = a.nrows();
    let mut big = DMatrix::<T>::zeros(2 * n, 2 * n);
    big.view_mut((0, 0), (n, n)).copy_from(a);
    big.view_mut((n, 0), (n, n)).copy_from(dir);
    big.view_mut((n, n), (n, n)).copy_from(a);
    let e = expm(&big)?;
    Ok(e.view((n, 0), (n, n)).into_owned())
}

/// `E(A) = Σ_k A^k / (k+1)!`, the entire extension of `(e^z - 1)/z`.
///
/// Evaluated as the upper right block of `exp([[A, I], [0, 0]])`, which equals
/// `∫₀¹ e^{sA} ds`.
pub fn phi_e<T: ComplexField<RealField = f64>>(a: &DMatrix<T>) -> Result<DMatrix<T>> {
    if !a.is_square() {
        return Err(Error::ShapeMismatch {
            context: "phi_e",
            expected: "square matrix".into(),
            got: format!("{}x{}", a.nrows(), a.ncols()),
        });
    }
    let n = a.nrows();
    let mut big = DMatrix::<T>::zeros(2 * n, 2 * n);
    big.view_mut((0, 0), (n, n)).copy_from(a);
    big.view_mut((0, n), (n, n)).fill_with_identity();
    let e = expm(&big)?;
    Ok(e.view((0, n), (n, n)).into_owned())
}
