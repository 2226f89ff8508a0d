//! Noncommutative polynomials in canonical variables `X₁ … Xₙ` subject to
//! `[X, Xᵀ] = 2iΘ`.
//!
//! Every polynomial is kept in a unique normal form: each monomial is a word
//! of variable indices sorted in nondecreasing order. Products are brought
//! back to normal form with the rewrite `X_k X_j = X_j X_k + 2iΘ_{kj}`
//! (`j < k`), which terminates because every step either removes an
//! inversion or shortens the word.
//!
//! Indices are zero-based throughout the library.

pub mod fock;
mod wick;

pub use wick::{gaussian_expectation, GaussianState, ADMISSIBILITY_TOL};

use std::collections::btree_map::{BTreeMap, Entry};
use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{is_antisymmetric, RealMatrix, SYMMETRY_TOL};

pub const DEFAULT_DEGREE_CAP: usize = 4;

const I: Complex64 = Complex64::new(0.0, 1.0);

pub type Word = Vec<usize>;

/// CCR matrix `Θ` together with the degree cap applied to products.
#[derive(Debug, Clone, PartialEq)]
pub struct CcrStructure {
    theta: RealMatrix,
    degree_cap: usize,
    nondegenerate: bool,
}

impl CcrStructure {
    pub fn new(theta: RealMatrix) -> Result<Self> {
        if !theta.is_square() {
            return Err(Error::ShapeMismatch {
                context: "CCR matrix",
                expected: "square matrix".into(),
                got: format!("{}x{}", theta.nrows(), theta.ncols()),
            });
        }
        if !is_antisymmetric(&theta, SYMMETRY_TOL) {
            return Err(Error::InvalidInput("CCR matrix must be antisymmetric".into()));
        }
        let theta = crate::linalg::antisym(&theta);
        let nondegenerate = theta.nrows() > 0 && theta.clone().lu().determinant().abs() > 1e-12;
        Ok(Self {
            theta,
            degree_cap: DEFAULT_DEGREE_CAP,
            nondegenerate,
        })
    }

    pub fn with_degree_cap(mut self, cap: usize) -> Self {
        self.degree_cap = cap;
        self
    }

    pub fn n(&self) -> usize {
        self.theta.nrows()
    }

    pub fn theta(&self) -> &RealMatrix {
        &self.theta
    }

    pub fn degree_cap(&self) -> usize {
        self.degree_cap
    }

    pub fn is_nondegenerate(&self) -> bool {
        self.nondegenerate
    }

    fn check_index(&self, index: usize) -> Result<()> {
        if index < self.n() {
            Ok(())
        } else {
            Err(Error::IndexOutOfRange { index, n: self.n() })
        }
    }

    pub fn zero(&self) -> CanonicalPolynomial {
        CanonicalPolynomial::zero(self.n())
    }

    pub fn constant(&self, c: Complex64) -> CanonicalPolynomial {
        let mut p = self.zero();
        p.add_term(Vec::new(), c);
        p
    }

    pub fn variable(&self, k: usize) -> Result<CanonicalPolynomial> {
        self.check_index(k)?;
        let mut p = self.zero();
        p.add_term(vec![k], Complex64::new(1.0, 0.0));
        Ok(p)
    }

    /// Normal form of `coef · X_{w₁} X_{w₂} ⋯` for an arbitrary word.
    pub fn canonicalize(&self, coef: Complex64, word: &[usize]) -> Result<CanonicalPolynomial> {
        for &k in word {
            self.check_index(k)?;
        }
        if word.len() > self.degree_cap {
            return Err(Error::DegreeCapExceeded {
                degree: word.len(),
                cap: self.degree_cap,
            });
        }
        let mut out = self.zero();
        self.normal_order_into(coef, word.to_vec(), &mut out);
        Ok(out)
    }

    fn normal_order_into(&self, coef: Complex64, word: Word, out: &mut CanonicalPolynomial) {
        let mut stack = vec![(coef, word)];
        while let Some((c, mut w)) = stack.pop() {
            if c == Complex64::new(0.0, 0.0) {
                continue;
            }
            match w.windows(2).position(|p| p[0] > p[1]) {
                None => out.add_term(w, c),
                Some(i) => {
                    let (k, j) = (w[i], w[i + 1]);
                    let swap_term = self.theta[(k, j)];
                    if swap_term != 0.0 {
                        let mut shorter = w.clone();
                        shorter.drain(i..i + 2);
                        stack.push((c * I * (2.0 * swap_term), shorter));
                    }
                    w.swap(i, i + 1);
                    stack.push((c, w));
                }
            }
        }
    }

    pub fn mul(&self, p: &CanonicalPolynomial, q: &CanonicalPolynomial) -> Result<CanonicalPolynomial> {
        self.check_operands(p, q)?;
        let degree = p.degree() + q.degree();
        if !p.is_zero() && !q.is_zero() && degree > self.degree_cap {
            return Err(Error::DegreeCapExceeded {
                degree,
                cap: self.degree_cap,
            });
        }
        let mut out = self.zero();
        for (wp, cp) in &p.terms {
            for (wq, cq) in &q.terms {
                let mut w = wp.clone();
                w.extend_from_slice(wq);
                self.normal_order_into(cp * cq, w, &mut out);
            }
        }
        Ok(out)
    }

    pub fn commutator(&self, p: &CanonicalPolynomial, q: &CanonicalPolynomial) -> Result<CanonicalPolynomial> {
        Ok(self.mul(p, q)? - self.mul(q, p)?)
    }

    /// Reverses every word, conjugates coefficients and re-normalizes.
    pub fn adjoint(&self, p: &CanonicalPolynomial) -> CanonicalPolynomial {
        let mut out = self.zero();
        for (w, c) in &p.terms {
            let reversed: Word = w.iter().rev().copied().collect();
            self.normal_order_into(c.conj(), reversed, &mut out);
        }
        out
    }

    /// `(p + p†)/2`.
    pub fn real_part(&self, p: &CanonicalPolynomial) -> CanonicalPolynomial {
        (p.clone() + self.adjoint(p)).scale(Complex64::new(0.5, 0.0))
    }

    /// `(p - p†)/(2i)`.
    pub fn imag_part(&self, p: &CanonicalPolynomial) -> CanonicalPolynomial {
        (p.clone() - self.adjoint(p)).scale(Complex64::new(0.0, -0.5))
    }

    pub fn is_self_adjoint(&self, p: &CanonicalPolynomial, tol: f64) -> bool {
        p.approx_eq(&self.adjoint(p), tol)
    }

    /// `aᵀX`.
    pub fn linear_form(&self, a: &[f64]) -> Result<CanonicalPolynomial> {
        if a.len() != self.n() {
            return Err(Error::ShapeMismatch {
                context: "linear form",
                expected: format!("{} coefficients", self.n()),
                got: format!("{}", a.len()),
            });
        }
        let mut p = self.zero();
        for (k, &ak) in a.iter().enumerate() {
            p.add_term(vec![k], Complex64::new(ak, 0.0));
        }
        Ok(p)
    }

    /// Rows of `G X` as polynomials.
    pub fn linear_forms(&self, g: &RealMatrix) -> Result<Vec<CanonicalPolynomial>> {
        crate::error::check_shape("linear forms", (g.nrows(), self.n()), g.shape())?;
        g.row_iter()
            .map(|row| self.linear_form(&row.iter().copied().collect::<Vec<_>>()))
            .collect()
    }

    /// `XᵀGX`.
    pub fn quadratic_form(&self, g: &RealMatrix) -> Result<CanonicalPolynomial> {
        crate::error::check_shape("quadratic form", (self.n(), self.n()), g.shape())?;
        if self.degree_cap < 2 {
            return Err(Error::DegreeCapExceeded {
                degree: 2,
                cap: self.degree_cap,
            });
        }
        let mut p = self.zero();
        for j in 0..self.n() {
            for k in 0..self.n() {
                let c = g[(j, k)];
                if c != 0.0 {
                    self.normal_order_into(Complex64::new(c, 0.0), vec![j, k], &mut p);
                }
            }
        }
        Ok(p)
    }

    /// `Σ_{jk} a_j W_{jk} b_k` for polynomial vectors `a`, `b` and a complex
    /// weight matrix `W`, preserving the left-to-right operator order.
    pub fn bilinear(
        &self,
        a: &[CanonicalPolynomial],
        weight: &crate::linalg::ComplexMatrix,
        b: &[CanonicalPolynomial],
    ) -> Result<CanonicalPolynomial> {
        crate::error::check_shape("bilinear weight", (a.len(), b.len()), weight.shape())?;
        let mut out = self.zero();
        for (j, aj) in a.iter().enumerate() {
            for (k, bk) in b.iter().enumerate() {
                let w = weight[(j, k)];
                if w != Complex64::new(0.0, 0.0) && !aj.is_zero() && !bk.is_zero() {
                    out += self.mul(aj, bk)?.scale(w);
                }
            }
        }
        Ok(out)
    }

    fn check_operands(&self, p: &CanonicalPolynomial, q: &CanonicalPolynomial) -> Result<()> {
        for r in [p, q] {
            if r.n != self.n() {
                return Err(Error::ShapeMismatch {
                    context: "polynomial variable count",
                    expected: format!("{}", self.n()),
                    got: format!("{}", r.n),
                });
            }
        }
        Ok(())
    }
}

/// A polynomial in normal form: sorted words mapped to nonzero complex
/// coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalPolynomial {
    n: usize,
    terms: BTreeMap<Word, Complex64>,
}

impl CanonicalPolynomial {
    pub fn zero(n: usize) -> Self {
        Self {
            n,
            terms: BTreeMap::new(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Word, &Complex64)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coefficient(&self, word: &[usize]) -> Complex64 {
        self.terms.get(word).copied().unwrap_or_default()
    }

    pub fn degree(&self) -> usize {
        self.terms.keys().map(Vec::len).max().unwrap_or(0)
    }

    pub fn max_abs_coefficient(&self) -> f64 {
        self.terms.values().map(|c| c.norm()).fold(0.0, f64::max)
    }

    fn add_term(&mut self, word: Word, coef: Complex64) {
        debug_assert!(word.windows(2).all(|p| p[0] <= p[1]));
        let zero = Complex64::new(0.0, 0.0);
        match self.terms.entry(word) {
            Entry::Occupied(mut e) => {
                *e.get_mut() += coef;
                if *e.get() == zero {
                    e.remove();
                }
            }
            Entry::Vacant(e) => {
                if coef != zero {
                    e.insert(coef);
                }
            }
        }
    }

    pub fn scale(mut self, c: Complex64) -> Self {
        if c == Complex64::new(0.0, 0.0) {
            self.terms.clear();
        } else {
            self.terms.values_mut().for_each(|v| *v *= c);
        }
        self
    }

    pub fn scale_real(self, c: f64) -> Self {
        self.scale(Complex64::new(c, 0.0))
    }

    /// Drops coefficients with modulus at most `tol`.
    pub fn pruned(mut self, tol: f64) -> Self {
        self.terms.retain(|_, c| c.norm() > tol);
        self
    }

    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        (self.clone() - other.clone()).max_abs_coefficient() <= tol
    }

    /// Whether every coefficient is real to within `tol`.
    pub fn has_real_coefficients(&self, tol: f64) -> bool {
        self.terms.values().all(|c| c.im.abs() <= tol)
    }
}

impl AddAssign for CanonicalPolynomial {
    fn add_assign(&mut self, rhs: Self) {
        assert_eq!(self.n, rhs.n, "adding polynomials over different variable sets");
        for (w, c) in rhs.terms {
            self.add_term(w, c);
        }
    }
}

impl Add for CanonicalPolynomial {
    type Output = Self;
    fn add(mut self, rhs: Self) -> Self {
        self += rhs;
        self
    }
}

impl Neg for CanonicalPolynomial {
    type Output = Self;
    fn neg(self) -> Self {
        self.scale_real(-1.0)
    }
}

impl Sub for CanonicalPolynomial {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        self + (-rhs)
    }
}

impl Mul<Complex64> for CanonicalPolynomial {
    type Output = Self;
    fn mul(self, rhs: Complex64) -> Self {
        self.scale(rhs)
    }
}

impl fmt::Display for CanonicalPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (w, c)) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            write!(f, "({}{:+}i)", c.re, c.im)?;
            for k in w {
                write!(f, "·X{}", k + 1)?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::symplectic_unit;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn one_mode() -> CcrStructure {
        CcrStructure::new(symplectic_unit()).unwrap()
    }

    fn poly(ccr: &CcrStructure, terms: &[(f64, f64, &[usize])]) -> CanonicalPolynomial {
        terms.iter().fold(ccr.zero(), |acc, (re, im, w)| {
            acc + ccr.canonicalize(c(*re, *im), w).unwrap()
        })
    }

    #[test]
    fn single_swap() {
        let ccr = one_mode();
        let p = ccr.canonicalize(c(1.0, 0.0), &[1, 0]).unwrap();
        assert_eq!(p.coefficient(&[0, 1]), c(1.0, 0.0));
        assert_eq!(p.coefficient(&[]), c(0.0, -2.0));
        assert_eq!(p.len(), 2);
    }

    #[test]
    fn sorted_word_unchanged() {
        let ccr = one_mode();
        let p = ccr.canonicalize(c(1.0, 0.0), &[0, 0]).unwrap();
        assert_eq!(p.len(), 1);
        assert_eq!(p.coefficient(&[0, 0]), c(1.0, 0.0));
    }

    #[test]
    fn two_step_rewrite() {
        // X₂X₁X₂ = X₁X₂² − 2iX₂
        let ccr = one_mode();
        let p = ccr.canonicalize(c(1.0, 0.0), &[1, 0, 1]).unwrap();
        let expected = poly(&ccr, &[(1.0, 0.0, &[0, 1, 1]), (0.0, -2.0, &[1])]);
        assert!(p.approx_eq(&expected, 0.0));
    }

    #[test]
    fn canonicalize_is_idempotent() {
        let ccr = one_mode();
        let p = ccr.canonicalize(c(0.5, 1.0), &[1, 1, 0, 1]).unwrap();
        let again = p
            .terms()
            .fold(ccr.zero(), |acc, (w, cf)| acc + ccr.canonicalize(*cf, w).unwrap());
        assert_eq!(p, again);
    }

    #[test]
    fn degree_cap_enforced() {
        let ccr = one_mode().with_degree_cap(2);
        assert!(matches!(
            ccr.canonicalize(c(1.0, 0.0), &[0, 1, 0]),
            Err(Error::DegreeCapExceeded { degree: 3, cap: 2 })
        ));
        let x = ccr.variable(0).unwrap();
        let x2 = ccr.mul(&x, &x).unwrap();
        assert!(matches!(ccr.mul(&x2, &x), Err(Error::DegreeCapExceeded { .. })));
    }

    #[test]
    fn index_out_of_range() {
        assert!(matches!(
            one_mode().canonicalize(c(1.0, 0.0), &[2]),
            Err(Error::IndexOutOfRange { index: 2, n: 2 })
        ));
    }

    #[test]
    fn basic_commutators() {
        let ccr = one_mode();
        let x1 = ccr.variable(0).unwrap();
        let x2 = ccr.variable(1).unwrap();
        let k = ccr.commutator(&x1, &x2).unwrap();
        assert!(k.approx_eq(&ccr.constant(c(0.0, 2.0)), 0.0));
        assert!(ccr.commutator(&x1, &x1).unwrap().is_zero());
        let x1sq = ccr.mul(&x1, &x1).unwrap();
        let k = ccr.commutator(&x1sq, &x2).unwrap();
        assert!(k.approx_eq(&x1.clone().scale(c(0.0, 4.0)), 1e-15));
    }

    #[test]
    fn adjoint_and_parts() {
        let ccr = one_mode();
        let p = ccr.canonicalize(c(2.0, 3.0), &[0, 1]).unwrap();
        // c̄·X₂X₁ = c̄·(X₁X₂ − 2i)
        let expected = poly(&ccr, &[(2.0, -3.0, &[0, 1])]) + ccr.constant(c(2.0, -3.0) * c(0.0, -2.0));
        assert!(ccr.adjoint(&p).approx_eq(&expected, 1e-15));

        assert!(ccr.real_part(&ccr.constant(c(0.0, 1.0))).is_zero());

        let x1x2 = ccr.canonicalize(c(1.0, 0.0), &[0, 1]).unwrap();
        let re = ccr.real_part(&x1x2);
        let expected = poly(&ccr, &[(1.0, 0.0, &[0, 1]), (0.0, -1.0, &[])]);
        assert!(re.approx_eq(&expected, 1e-15));
        let sym = (ccr.canonicalize(c(0.5, 0.0), &[0, 1]).unwrap())
            + ccr.canonicalize(c(0.5, 0.0), &[1, 0]).unwrap();
        assert!(re.approx_eq(&sym, 1e-15));
    }

    #[test]
    fn quadratic_closed_forms() {
        let theta = RealMatrix::from_row_slice(
            3,
            3,
            &[0.0, 0.7, -0.2, -0.7, 0.0, 1.1, 0.2, -1.1, 0.0],
        );
        let ccr = CcrStructure::new(theta.clone()).unwrap();
        let a = [0.3, -1.2, 0.8];
        let b = [1.5, 0.4, -0.6];
        let la = ccr.linear_form(&a).unwrap();
        let lb = ccr.linear_form(&b).unwrap();
        let va = nalgebra::DVector::from_column_slice(&a);
        let vb = nalgebra::DVector::from_column_slice(&b);
        let expected = 2.0 * va.dot(&(&theta * &vb));
        let k = ccr.commutator(&la, &lb).unwrap();
        assert!(k.approx_eq(&ccr.constant(c(0.0, expected)), 1e-14));

        // [X, XᵀGX] = 2iΘ(G + Gᵀ)X
        let g = RealMatrix::from_row_slice(3, 3, &[1.0, 0.5, 0.0, -0.3, 2.0, 0.1, 0.4, 0.0, -1.0]);
        let q = ccr.quadratic_form(&g).unwrap();
        let rhs = &theta * (&g + g.transpose()) * 2.0;
        for j in 0..3 {
            let k = ccr.commutator(&ccr.variable(j).unwrap(), &q).unwrap();
            let row: Vec<f64> = rhs.row(j).iter().copied().collect();
            let expected = ccr.linear_form(&row).unwrap().scale(c(0.0, 1.0));
            assert!(k.approx_eq(&expected, 1e-13), "{k} vs {expected}");
        }

        let h = RealMatrix::from_row_slice(3, 3, &[0.2, 1.0, 0.0, 1.0, -0.5, 0.3, 0.0, 0.3, 0.9]);
        let k = ccr.commutator(&q, &ccr.quadratic_form(&h).unwrap()).unwrap();
        assert!(k.degree() <= 2);
    }

    fn two_mode() -> CcrStructure {
        CcrStructure::new(crate::linalg::paired_j(4)).unwrap()
    }

    fn random_poly(max_deg: usize) -> impl Strategy<Value = CanonicalPolynomial> {
        prop::collection::vec(
            (prop::collection::vec(0usize..4, 0..=max_deg), -1.0f64..1.0, -1.0f64..1.0),
            1..5,
        )
        .prop_map(|terms| {
            let ccr = two_mode();
            terms.into_iter().fold(ccr.zero(), |acc, (w, re, im)| {
                acc + ccr.canonicalize(Complex64::new(re, im), &w).unwrap()
            })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn jacobi_identity(p in random_poly(2), q in random_poly(2), r in random_poly(2)) {
            let ccr = two_mode().with_degree_cap(6);
            let t1 = ccr.commutator(&ccr.commutator(&p, &q).unwrap(), &r).unwrap();
            let t2 = ccr.commutator(&ccr.commutator(&q, &r).unwrap(), &p).unwrap();
            let t3 = ccr.commutator(&ccr.commutator(&r, &p).unwrap(), &q).unwrap();
            prop_assert!((t1 + t2 + t3).max_abs_coefficient() <= 1e-10);
        }

        #[test]
        fn leibniz_rule(p in random_poly(2), q in random_poly(2), r in random_poly(2)) {
            let ccr = two_mode().with_degree_cap(6);
            let lhs = ccr.commutator(&p, &ccr.mul(&q, &r).unwrap()).unwrap();
            let rhs = ccr.mul(&ccr.commutator(&p, &q).unwrap(), &r).unwrap()
                + ccr.mul(&q, &ccr.commutator(&p, &r).unwrap()).unwrap();
            prop_assert!(lhs.approx_eq(&rhs, 1e-10));
        }

        #[test]
        fn commutator_antisymmetric_and_degree_drops(p in random_poly(2), q in random_poly(2)) {
            let ccr = two_mode();
            let pq = ccr.commutator(&p, &q).unwrap();
            let qp = ccr.commutator(&q, &p).unwrap();
            prop_assert!((pq.clone() + qp).max_abs_coefficient() <= 1e-12);
            let bound = (p.degree() + q.degree()).saturating_sub(2);
            prop_assert!(pq.pruned(1e-12).degree() <= bound);
        }

        #[test]
        fn real_imag_decomposition(p in random_poly(3)) {
            let ccr = two_mode();
            let re = ccr.real_part(&p);
            let im = ccr.imag_part(&p);
            prop_assert!(ccr.is_self_adjoint(&re, 1e-12));
            prop_assert!(ccr.is_self_adjoint(&im, 1e-12));
            let recombined = re + im.scale(Complex64::new(0.0, 1.0));
            prop_assert!(recombined.approx_eq(&p, 1e-12));
            prop_assert!(ccr.adjoint(&ccr.adjoint(&p)).approx_eq(&p, 1e-12));
        }
    }
}
