use super::{antisym, is_antisymmetric, is_symmetric, spectrum, sym, unvec, vec, RealMatrix};
use crate::error::{check_shape, Error, Result};

/// Relative gap below which `λi + λj` is treated as zero.
const PAIR_SUM_TOL: f64 = 1e-10;

/// Solves `A X + X Aᵀ + Q = 0` by vectorizing through the Kronecker sum
/// `I ⊗ A + A ⊗ I`.
///
/// Symmetric (antisymmetric) `Q` yields an explicitly symmetrized
/// (antisymmetrized) `X`.
pub fn solve_lyapunov(a: &RealMatrix, q: &RealMatrix) -> Result<RealMatrix> {
    if !a.is_square() {
        return Err(Error::ShapeMismatch {
            context: "solve_lyapunov",
            expected: "square A".into(),
            got: format!("{}x{}", a.nrows(), a.ncols()),
        });
    }
    let n = a.nrows();
    check_shape("solve_lyapunov", (n, n), q.shape())?;
    if n == 0 {
        return Ok(q.clone());
    }
    if !super::all_finite(a) || !super::all_finite(q) {
        return Err(Error::NonFinite("solve_lyapunov input"));
    }

    let eigs = spectrum(a);
    let scale = 1.0 + a.norm();
    let mut min_pair_sum = f64::INFINITY;
    for (i, x) in eigs.iter().enumerate() {
        for y in &eigs[i..] {
            min_pair_sum = min_pair_sum.min((x + y).norm());
        }
    }
    if min_pair_sum <= PAIR_SUM_TOL * scale {
        return Err(Error::SingularKroneckerSum { min_pair_sum });
    }

    let ident = RealMatrix::identity(n, n);
    let kron_sum = ident.kronecker(a) + a.kronecker(&ident);
    let x = kron_sum
        .lu()
        .solve(&(-vec(q)))
        .ok_or(Error::SingularKroneckerSum { min_pair_sum })?;
    let x = unvec(&x, n, n);

    Ok(if is_symmetric(q, super::SYMMETRY_TOL) {
        sym(&x)
    } else if is_antisymmetric(q, super::SYMMETRY_TOL) {
        antisym(&x)
    } else {
        x
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn residual(a: &RealMatrix, x: &RealMatrix, q: &RealMatrix) -> f64 {
        (a * x + x * a.transpose() + q).norm()
    }

    #[test]
    fn diagonal_case() {
        let a = -RealMatrix::identity(2, 2);
        let x = solve_lyapunov(&a, &(RealMatrix::identity(2, 2) * 2.0)).unwrap();
        assert!((x - RealMatrix::identity(2, 2)).amax() < 1e-14);
    }

    #[test]
    fn damped_rotation_case() {
        let a = RealMatrix::from_row_slice(2, 2, &[-2.0, 2.0, -2.0, -2.0]);
        let x = solve_lyapunov(&a, &(RealMatrix::identity(2, 2) * 4.0)).unwrap();
        assert!((x - RealMatrix::identity(2, 2)).amax() < 1e-14);
    }

    #[test]
    fn origin_symmetric_spectrum_is_singular() {
        let a = RealMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        let r = solve_lyapunov(&a, &RealMatrix::identity(2, 2));
        assert!(matches!(r, Err(Error::SingularKroneckerSum { .. })));
    }

    #[test]
    fn non_symmetric_rhs_and_unstable_but_solvable_a() {
        // eigenvalues 1 and -3: no pair sums to zero
        let a = RealMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, -3.0]);
        let q = RealMatrix::from_row_slice(2, 2, &[1.0, 2.0, -0.5, 3.0]);
        let x = solve_lyapunov(&a, &q).unwrap();
        assert!(residual(&a, &x, &q) <= 1e-10 * (1.0 + q.norm()));
    }

    #[test]
    fn antisymmetric_rhs_gives_antisymmetric_solution() {
        let a = RealMatrix::from_row_slice(3, 3, &[-1.0, 0.3, 0.0, 0.2, -2.0, 0.5, 0.0, -0.4, -1.5]);
        let q = RealMatrix::from_row_slice(3, 3, &[0.0, 1.0, -2.0, -1.0, 0.0, 0.5, 2.0, -0.5, 0.0]);
        let x = solve_lyapunov(&a, &q).unwrap();
        assert!(is_antisymmetric(&x, 0.0));
        assert!(residual(&a, &x, &q) <= 1e-10 * (1.0 + q.norm()));
    }

    fn hurwitz(n: usize) -> impl Strategy<Value = RealMatrix> {
        prop::collection::vec(-1.0f64..1.0, n * n).prop_map(move |v| {
            let m = RealMatrix::from_row_slice(n, n, &v);
            // shift the spectrum strictly into the left half plane
            let shift = m.norm() + 0.1;
            m - RealMatrix::identity(n, n) * shift
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn symmetric_psd_solution_for_hurwitz(
            (a, g) in (1usize..=10).prop_flat_map(|n| (hurwitz(n), prop::collection::vec(-1.0f64..1.0, n * n)))
        ) {
            let n = a.nrows();
            let g = RealMatrix::from_row_slice(n, n, &g);
            let q = &g * g.transpose();
            let x = solve_lyapunov(&a, &q).unwrap();
            prop_assert!(residual(&a, &x, &q) <= 1e-10 * (1.0 + q.norm()));
            prop_assert!(is_symmetric(&x, 0.0));
            prop_assert!(x.symmetric_eigenvalues().min() >= -1e-10);
        }
    }
}
