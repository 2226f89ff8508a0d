//! Truncated Fock-space representation of canonical pairs, used as an
//! independent numeric oracle for the polynomial algebra.
//!
//! Pair `k` is represented as `X_{2k} = a_k + a_k†`, `X_{2k+1} = -i(a_k - a_k†)`,
//! so that `[X_{2k}, X_{2k+1}] = 2i` and the vacuum has covariance `I`.
//! Truncation only corrupts matrix elements that touch the top level, so
//! results are exact on states far enough below it.

use nalgebra::DVector;
use num_complex::Complex64;

use super::{CanonicalPolynomial, CcrStructure};
use crate::error::{Error, Result};
use crate::linalg::{paired_j, ComplexMatrix};

pub type ComplexVector = DVector<Complex64>;

#[derive(Debug, Clone)]
pub struct FockOracle {
    pairs: usize,
    levels: usize,
    variables: Vec<ComplexMatrix>,
    // nonzero entries (row, col, value) of each variable
    sparse: Vec<Vec<(usize, usize, Complex64)>>,
}

impl FockOracle {
    /// Requires `Θ = I_{n/2} ⊗ [[0, 1], [-1, 0]]`.
    pub fn new(ccr: &CcrStructure, levels: usize) -> Result<Self> {
        let n = ccr.n();
        if n == 0 || n % 2 == 1 || (ccr.theta() - paired_j(n)).amax() > 1e-12 {
            return Err(Error::NonCanonicalTheta);
        }
        if levels < 2 {
            return Err(Error::InvalidInput("Fock truncation needs at least 2 levels".into()));
        }
        let pairs = n / 2;
        let mut lower = ComplexMatrix::zeros(levels, levels);
        for j in 1..levels {
            lower[(j - 1, j)] = Complex64::new((j as f64).sqrt(), 0.0);
        }
        let raise = lower.adjoint();
        let position = &lower + &raise;
        let momentum = (&lower - &raise) * Complex64::new(0.0, -1.0);

        let ident = ComplexMatrix::identity(levels, levels);
        let embed = |op: &ComplexMatrix, slot: usize| {
            (0..pairs).fold(ComplexMatrix::identity(1, 1), |acc, k| {
                acc.kronecker(if k == slot { op } else { &ident })
            })
        };
        let variables: Vec<ComplexMatrix> = (0..pairs)
            .flat_map(|k| [embed(&position, k), embed(&momentum, k)])
            .collect();
        let sparse = variables
            .iter()
            .map(|v| {
                let mut nz = Vec::new();
                for c in 0..v.ncols() {
                    for r in 0..v.nrows() {
                        if v[(r, c)] != Complex64::new(0.0, 0.0) {
                            nz.push((r, c, v[(r, c)]));
                        }
                    }
                }
                nz
            })
            .collect();
        Ok(Self {
            pairs,
            levels,
            variables,
            sparse,
        })
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn dim(&self) -> usize {
        self.levels.pow(self.pairs as u32)
    }

    pub fn variable(&self, k: usize) -> &ComplexMatrix {
        &self.variables[k]
    }

    /// `|k₁, k₂, …⟩` with one occupation number per pair.
    pub fn basis_state(&self, occupations: &[usize]) -> ComplexVector {
        assert_eq!(occupations.len(), self.pairs);
        let index = occupations.iter().fold(0, |acc, &k| {
            assert!(k < self.levels);
            acc * self.levels + k
        });
        let mut v = ComplexVector::zeros(self.dim());
        v[index] = Complex64::new(1.0, 0.0);
        v
    }

    pub fn vacuum(&self) -> ComplexVector {
        self.basis_state(&vec![0; self.pairs])
    }

    /// Occupation patterns with total excitation at most `max_total`.
    pub fn low_lying_states(&self, max_total: usize) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new()];
        for _ in 0..self.pairs {
            out = out
                .into_iter()
                .flat_map(|prefix: Vec<usize>| {
                    let used: usize = prefix.iter().sum();
                    (0..=max_total.saturating_sub(used).min(self.levels - 1)).map(move |k| {
                        let mut p = prefix.clone();
                        p.push(k);
                        p
                    })
                })
                .collect();
        }
        out
    }

    /// Applies `X_{w₁} ⋯ X_{w_L}` to `v` (rightmost factor first).
    pub fn apply_word(&self, word: &[usize], v: &ComplexVector) -> ComplexVector {
        word.iter().rev().fold(v.clone(), |acc, &k| {
            let mut out = ComplexVector::zeros(acc.len());
            for &(r, c, x) in &self.sparse[k] {
                out[r] += x * acc[c];
            }
            out
        })
    }

    pub fn apply(&self, p: &CanonicalPolynomial, v: &ComplexVector) -> ComplexVector {
        p.terms().fold(ComplexVector::zeros(self.dim()), |acc, (w, c)| {
            acc + self.apply_word(w, v) * *c
        })
    }

    pub fn word_matrix(&self, word: &[usize]) -> ComplexMatrix {
        word.iter()
            .fold(ComplexMatrix::identity(self.dim(), self.dim()), |acc, &k| {
                acc * &self.variables[k]
            })
    }

    pub fn matrix(&self, p: &CanonicalPolynomial) -> ComplexMatrix {
        p.terms()
            .fold(ComplexMatrix::zeros(self.dim(), self.dim()), |acc, (w, c)| {
                acc + self.word_matrix(w) * *c
            })
    }

    pub fn vacuum_expectation(&self, p: &CanonicalPolynomial) -> Complex64 {
        let vac = self.vacuum();
        vac.dotc(&self.apply(p, &vac))
    }
}

/// Matrix of `p` in the truncated Fock basis together with its vacuum
/// expectation. Requires at least `deg(p) + 2` levels.
pub fn fock_oracle(
    ccr: &CcrStructure,
    p: &CanonicalPolynomial,
    levels: usize,
) -> Result<(ComplexMatrix, Complex64)> {
    if levels < p.degree() + 2 {
        return Err(Error::InvalidInput(format!(
            "truncation of {levels} levels is too small for degree {}",
            p.degree()
        )));
    }
    let oracle = FockOracle::new(ccr, levels)?;
    let expectation = oracle.vacuum_expectation(p);
    Ok((oracle.matrix(p), expectation))
}
