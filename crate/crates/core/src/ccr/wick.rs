//! Gaussian expectations of normal-ordered polynomials via pairing sums.

use num_complex::Complex64;

use super::{CanonicalPolynomial, CcrStructure};
use crate::error::{check_shape, Error, Result};
use crate::linalg::{hermitian_min_eigenvalue, is_symmetric, sym, RealMatrix, RealVector};

/// Tolerance on `min eig(Σ + iΘ)` for a state to count as admissible.
pub const ADMISSIBILITY_TOL: f64 = 1e-10;

/// Gaussian quantum state: real mean and real symmetric covariance `Σ`, so
/// that `E[X Xᵀ] = Σ + iΘ + mean·meanᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianState {
    mean: RealVector,
    sigma: RealMatrix,
}

impl GaussianState {
    pub fn new(mean: RealVector, sigma: RealMatrix, ccr: &CcrStructure) -> Result<Self> {
        Self::with_tolerance(mean, sigma, ccr, ADMISSIBILITY_TOL)
    }

    pub fn zero_mean(sigma: RealMatrix, ccr: &CcrStructure) -> Result<Self> {
        Self::new(RealVector::zeros(ccr.n()), sigma, ccr)
    }

    pub fn with_tolerance(
        mean: RealVector,
        sigma: RealMatrix,
        ccr: &CcrStructure,
        tol: f64,
    ) -> Result<Self> {
        let n = ccr.n();
        check_shape("Gaussian mean", (n, 1), mean.shape())?;
        check_shape("Gaussian covariance", (n, n), sigma.shape())?;
        if !is_symmetric(&sigma, 1e-10) {
            return Err(Error::InvalidInput("covariance must be symmetric".into()));
        }
        let sigma = sym(&sigma);
        let min_eig = hermitian_min_eigenvalue(&sigma, ccr.theta());
        if min_eig < -tol {
            return Err(Error::InadmissibleState { min_eig });
        }
        Ok(Self { mean, sigma })
    }

    pub fn mean(&self) -> &RealVector {
        &self.mean
    }

    pub fn sigma(&self) -> &RealMatrix {
        &self.sigma
    }

    /// `min eig(Σ + iΘ)`.
    pub fn admissibility_margin(&self, ccr: &CcrStructure) -> f64 {
        hermitian_min_eigenvalue(&self.sigma, ccr.theta())
    }
}

struct Moments<'a> {
    sigma: &'a RealMatrix,
    theta: &'a RealMatrix,
    mean: &'a RealVector,
    centered: bool,
}

impl Moments<'_> {
    // Ordered pair moment of the centered variables, `a` to the left of `b`.
    fn pair(&self, a: usize, b: usize) -> Complex64 {
        Complex64::new(self.sigma[(a, b)], self.theta[(a, b)])
    }

    // Sum over partitions of the word into ordered pairs and (for nonzero
    // means) singletons, expanding `X = mean + centered part`.
    fn word(&self, word: &[usize]) -> Complex64 {
        let Some((&first, rest)) = word.split_first() else {
            return Complex64::new(1.0, 0.0);
        };
        if self.centered && word.len() % 2 == 1 {
            return Complex64::new(0.0, 0.0);
        }
        let mut total = Complex64::new(0.0, 0.0);
        if !self.centered && self.mean[first] != 0.0 {
            total += self.word(rest) * self.mean[first];
        }
        let mut remaining = Vec::with_capacity(rest.len().saturating_sub(1));
        for (j, &partner) in rest.iter().enumerate() {
            let m = self.pair(first, partner);
            if m == Complex64::new(0.0, 0.0) {
                continue;
            }
            remaining.clear();
            remaining.extend_from_slice(&rest[..j]);
            remaining.extend_from_slice(&rest[j + 1..]);
            total += m * self.word(&remaining);
        }
        total
    }
}

/// Expectation of `p` in a Gaussian state by the quantum Isserlis–Wick
/// pairing expansion with ordered pair moments `Σ_{ab} + iΘ_{ab}`.
pub fn gaussian_expectation(
    ccr: &CcrStructure,
    p: &CanonicalPolynomial,
    state: &GaussianState,
) -> Result<Complex64> {
    check_shape("Gaussian state", (ccr.n(), 1), state.mean.shape())?;
    if p.n() != ccr.n() {
        return Err(Error::ShapeMismatch {
            context: "polynomial variable count",
            expected: ccr.n().to_string(),
            got: p.n().to_string(),
        });
    }
    let moments = Moments {
        sigma: &state.sigma,
        theta: ccr.theta(),
        mean: &state.mean,
        centered: state.mean.iter().all(|&m| m == 0.0),
    };
    Ok(p.terms().map(|(w, c)| c * moments.word(w)).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{paired_j, symplectic_unit};
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn vacuum(ccr: &CcrStructure) -> GaussianState {
        GaussianState::zero_mean(RealMatrix::identity(ccr.n(), ccr.n()), ccr).unwrap()
    }

    #[test]
    fn second_moment_is_sigma_plus_i_theta() {
        let theta = RealMatrix::from_row_slice(2, 2, &[0.0, 0.5, -0.5, 0.0]);
        let ccr = CcrStructure::new(theta).unwrap();
        let sigma = RealMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]);
        let state = GaussianState::zero_mean(sigma.clone(), &ccr).unwrap();
        for a in 0..2 {
            for b in 0..2 {
                let p = ccr.canonicalize(c(1.0, 0.0), &[a, b]).unwrap();
                let e = gaussian_expectation(&ccr, &p, &state).unwrap();
                let expected = c(sigma[(a, b)], ccr.theta()[(a, b)]);
                assert!((e - expected).norm() < 1e-15, "({a},{b}): {e}");
            }
        }
    }

    #[test]
    fn odd_moment_vanishes() {
        let ccr = CcrStructure::new(symplectic_unit()).unwrap();
        let x1 = ccr.variable(0).unwrap();
        assert_eq!(gaussian_expectation(&ccr, &x1, &vacuum(&ccr)).unwrap(), c(0.0, 0.0));
        let cubic = ccr.canonicalize(c(1.0, 0.0), &[0, 1, 1]).unwrap();
        assert_eq!(gaussian_expectation(&ccr, &cubic, &vacuum(&ccr)).unwrap(), c(0.0, 0.0));
    }

    #[test]
    fn fourth_moment_on_vacuum() {
        let ccr = CcrStructure::new(symplectic_unit()).unwrap();
        let p = ccr.canonicalize(c(1.0, 0.0), &[0, 0, 1, 1]).unwrap();
        let e = gaussian_expectation(&ccr, &p, &vacuum(&ccr)).unwrap();
        assert!((e - c(-1.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn nonzero_mean_shifts_moments() {
        let ccr = CcrStructure::new(symplectic_unit()).unwrap();
        let mean = RealVector::from_column_slice(&[0.7, -1.3]);
        let state =
            GaussianState::new(mean.clone(), RealMatrix::identity(2, 2), &ccr).unwrap();
        let x1 = ccr.variable(0).unwrap();
        assert!((gaussian_expectation(&ccr, &x1, &state).unwrap() - c(0.7, 0.0)).norm() < 1e-15);
        let x1x2 = ccr.canonicalize(c(1.0, 0.0), &[0, 1]).unwrap();
        let e = gaussian_expectation(&ccr, &x1x2, &state).unwrap();
        assert!((e - c(0.7 * -1.3, 1.0)).norm() < 1e-15);
        // E[X₁³] = 3 μ σ² + μ³
        let x1cubed = ccr.canonicalize(c(1.0, 0.0), &[0, 0, 0]).unwrap();
        let e = gaussian_expectation(&ccr, &x1cubed, &state).unwrap();
        assert!((e - c(3.0 * 0.7 + 0.7f64.powi(3), 0.0)).norm() < 1e-14);
    }

    #[test]
    fn inadmissible_state_rejected() {
        let ccr = CcrStructure::new(symplectic_unit()).unwrap();
        let r = GaussianState::zero_mean(RealMatrix::identity(2, 2) * 0.5, &ccr);
        assert!(matches!(r, Err(Error::InadmissibleState { .. })));
    }

    fn self_adjoint_poly() -> impl Strategy<Value = CanonicalPolynomial> {
        prop::collection::vec(
            (prop::collection::vec(0usize..4, 0..=4), -1.0f64..1.0, -1.0f64..1.0),
            1..6,
        )
        .prop_map(|terms| {
            let ccr = CcrStructure::new(paired_j(4)).unwrap();
            let p = terms.into_iter().fold(ccr.zero(), |acc, (w, re, im)| {
                acc + ccr.canonicalize(Complex64::new(re, im), &w).unwrap()
            });
            ccr.real_part(&p)
        })
    }

    proptest! {
        #[test]
        fn self_adjoint_expectations_are_real(
            p in self_adjoint_poly(),
            s in prop::collection::vec(-0.4f64..0.4, 16),
            mean in prop::collection::vec(-1.0f64..1.0, 4),
        ) {
            let ccr = CcrStructure::new(paired_j(4)).unwrap();
            // vacuum covariance plus a PSD perturbation stays admissible
            let g = RealMatrix::from_row_slice(4, 4, &s);
            let sigma = RealMatrix::identity(4, 4) + &g * g.transpose();
            let state = GaussianState::new(RealVector::from_vec(mean), sigma, &ccr).unwrap();
            let e = gaussian_expectation(&ccr, &p, &state).unwrap();
            prop_assert!(e.im.abs() <= 1e-10 * (1.0 + e.re.abs()));
        }
    }
}
