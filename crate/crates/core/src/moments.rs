//! Transient first and second moments of an oscillator and of its
//! parametric sensitivity system.
//!
//! Expectations over the vacuum field state remove the martingale parts of
//! the QSDEs, leaving the classical moment ODEs
//! `ṁ = Am`, `Σ̇ = AΣ + ΣAᵀ + BBᵀ`. The sensitivity process `X′` obeys
//! `dX′ = (A′X + AX′)dt + B′dW` with `X′(0) = 0`, i.e. the pair `[X; X′]`
//! is driven by `[[A, 0], [A′, A]]` and `[B; B′]`.

use crate::error::{check_shape, Error, Result};
use crate::linalg::{is_symmetric, sym, RealMatrix, RealVector};
use crate::ccr::GaussianState;
use crate::oqho::{EnergyParams, OqhoRealization};

/// Perturbation `(R′, N′)` of the Hamiltonian and coupling matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct StructuredDirection {
    r_prime: RealMatrix,
    n_prime: RealMatrix,
}

impl StructuredDirection {
    pub fn new(r_prime: RealMatrix, n_prime: RealMatrix) -> Result<Self> {
        let n = r_prime.nrows();
        check_shape("R′", (n, n), r_prime.shape())?;
        check_shape("N′", (n_prime.nrows(), n), n_prime.shape())?;
        if !is_symmetric(&r_prime, 1e-12) {
            return Err(Error::InvalidInput("R′ must be symmetric".into()));
        }
        Ok(Self {
            r_prime: sym(&r_prime),
            n_prime,
        })
    }

    pub fn zero(n: usize, m: usize) -> Self {
        Self {
            r_prime: RealMatrix::zeros(n, n),
            n_prime: RealMatrix::zeros(m, n),
        }
    }

    pub fn r_prime(&self) -> &RealMatrix {
        &self.r_prime
    }

    pub fn n_prime(&self) -> &RealMatrix {
        &self.n_prime
    }

    pub fn is_zero(&self) -> bool {
        self.r_prime.amax() == 0.0 && self.n_prime.amax() == 0.0
    }

    /// `α·self + β·other`.
    pub fn combine(&self, alpha: f64, other: &Self, beta: f64) -> Self {
        Self {
            r_prime: &self.r_prime * alpha + &other.r_prime * beta,
            n_prime: &self.n_prime * alpha + &other.n_prime * beta,
        }
    }

    /// Frobenius norm of the stacked pair.
    pub fn norm(&self) -> f64 {
        (self.r_prime.norm_squared() + self.n_prime.norm_squared()).sqrt()
    }

    pub fn check_against(&self, n: usize, m: usize) -> Result<()> {
        check_shape("R′", (n, n), self.r_prime.shape())?;
        check_shape("N′", (m, n), self.n_prime.shape())
    }
}

/// Derivatives `(A′, B′, C′)` of the realization matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityMatrices {
    pub a: RealMatrix,
    pub b: RealMatrix,
    pub c: RealMatrix,
}

fn sensitivity_from(
    theta: &RealMatrix,
    j: &RealMatrix,
    coupling: &RealMatrix,
    dir: &StructuredDirection,
) -> SensitivityMatrices {
    let np = dir.n_prime();
    let a = theta
        * (dir.r_prime() + np.transpose() * j * coupling + coupling.transpose() * j * np)
        * 2.0;
    SensitivityMatrices {
        a,
        b: theta * np.transpose() * 2.0,
        c: j * np * 2.0,
    }
}

/// `A′ = 2Θ(R′ + N′ᵀJN + NᵀJN′)`, `B′ = 2ΘN′ᵀ`, `C′ = 2JN′`.
pub fn sensitivity_matrices(
    params: &EnergyParams,
    dir: &StructuredDirection,
) -> Result<SensitivityMatrices> {
    dir.check_against(params.n(), params.m())?;
    Ok(sensitivity_from(
        params.theta(),
        params.ito().j(),
        params.coupling(),
        dir,
    ))
}

/// Moments of the sensitivity process along a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityTrajectory {
    /// `E X′(t)`.
    pub means: Vec<RealVector>,
    /// Symmetrized cross covariance `Re E[(X′ − EX′)(X − EX)ᵀ]`.
    pub cross: Vec<RealMatrix>,
    /// Symmetrized covariance of `X′`.
    pub covariances: Vec<RealMatrix>,
    /// `E Y′(t)`.
    pub output_means: Vec<RealVector>,
}

impl SensitivityTrajectory {
    /// `∂Σ(t_k)/∂ε = cross + crossᵀ`.
    pub fn covariance_derivative(&self, k: usize) -> RealMatrix {
        &self.cross[k] + self.cross[k].transpose()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentTrajectory {
    pub times: Vec<f64>,
    pub means: Vec<RealVector>,
    pub covariances: Vec<RealMatrix>,
    pub sensitivity: Option<SensitivityTrajectory>,
}

impl MomentTrajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Index of the grid point closest to `t`.
    pub fn index_at(&self, t: f64) -> usize {
        self.times
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - t).abs().total_cmp(&(b.1 - t).abs()))
            .map(|(i, _)| i)
            .unwrap_or(0)
    }
}

/// `min(0.01, 0.1/‖A‖)`.
pub fn default_step(a: &RealMatrix) -> f64 {
    let norm = a.norm();
    if norm > 0.0 {
        0.01f64.min(0.1 / norm)
    } else {
        0.01
    }
}

// Grid with uniform spacing no larger than `step`, ending exactly at `horizon`.
fn grid(horizon: f64, step: f64) -> Result<(usize, f64)> {
    if !(step > 0.0) || !(horizon >= step) || !horizon.is_finite() {
        return Err(Error::NonPositiveStep { step, horizon });
    }
    let count = (horizon / step - 1e-9).ceil().max(1.0) as usize;
    Ok((count, horizon / count as f64))
}

fn rk4_step<F: Fn(&RealVector) -> RealVector>(y: &RealVector, h: f64, f: &F) -> RealVector {
    let k1 = f(y);
    let k2 = f(&(y + &k1 * (h / 2.0)));
    let k3 = f(&(y + &k2 * (h / 2.0)));
    let k4 = f(&(y + &k3 * h));
    y + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)
}

fn pack(parts: &[&[f64]]) -> RealVector {
    RealVector::from_iterator(
        parts.iter().map(|p| p.len()).sum(),
        parts.iter().flat_map(|p| p.iter().copied()),
    )
}

/// Integrates `ṁ = Am`, `Σ̇ = AΣ + ΣAᵀ + BBᵀ` with fixed-step RK4.
pub fn simulate_moments(
    realization: &OqhoRealization,
    initial: &GaussianState,
    horizon: f64,
    step: f64,
) -> Result<MomentTrajectory> {
    let n = realization.n();
    check_shape("initial mean", (n, 1), initial.mean().shape())?;
    let (count, h) = grid(horizon, step)?;
    let a = realization.a();
    let bbt = realization.b() * realization.b().transpose();

    let rhs = |y: &RealVector| {
        let mean = RealVector::from_column_slice(&y.as_slice()[..n]);
        let sigma = RealMatrix::from_column_slice(n, n, &y.as_slice()[n..]);
        let dm = a * mean;
        let ds = a * &sigma + &sigma * a.transpose() + &bbt;
        pack(&[dm.as_slice(), ds.as_slice()])
    };

    let mut y = pack(&[initial.mean().as_slice(), initial.sigma().as_slice()]);
    let mut out = MomentTrajectory {
        times: Vec::with_capacity(count + 1),
        means: Vec::with_capacity(count + 1),
        covariances: Vec::with_capacity(count + 1),
        sensitivity: None,
    };
    for k in 0..=count {
        if k > 0 {
            y = rk4_step(&y, h, &rhs);
        }
        out.times.push(k as f64 * h);
        out.means.push(RealVector::from_column_slice(&y.as_slice()[..n]));
        out.covariances
            .push(sym(&RealMatrix::from_column_slice(n, n, &y.as_slice()[n..])));
    }
    Ok(out)
}

/// Integrates the augmented moment system of `[X; X′]` together with the
/// mean of `Y′`, starting from `X′(0) = 0`, `Y′(0) = 0`.
pub fn simulate_sensitivity(
    realization: &OqhoRealization,
    dir: &StructuredDirection,
    initial: &GaussianState,
    horizon: f64,
    step: f64,
) -> Result<MomentTrajectory> {
    let n = realization.n();
    let m = realization.m();
    dir.check_against(n, m)?;
    check_shape("initial mean", (n, 1), initial.mean().shape())?;
    let (count, h) = grid(horizon, step)?;

    let sens = sensitivity_from(
        realization.theta(),
        realization.ito().j(),
        &realization.coupling(),
        dir,
    );
    let a = realization.a();
    let mut a_aug = RealMatrix::zeros(2 * n, 2 * n);
    a_aug.view_mut((0, 0), (n, n)).copy_from(a);
    a_aug.view_mut((n, 0), (n, n)).copy_from(&sens.a);
    a_aug.view_mut((n, n), (n, n)).copy_from(a);
    let mut b_aug = RealMatrix::zeros(2 * n, m);
    b_aug.view_mut((0, 0), (n, m)).copy_from(realization.b());
    b_aug.view_mut((n, 0), (n, m)).copy_from(&sens.b);
    let bbt = &b_aug * b_aug.transpose();
    let c = realization.c();
    let dim = 2 * n;

    let rhs = |y: &RealVector| {
        let s = y.as_slice();
        let mean = RealVector::from_column_slice(&s[..dim]);
        let sigma = RealMatrix::from_column_slice(dim, dim, &s[dim..dim + dim * dim]);
        let dm = &a_aug * &mean;
        let ds = &a_aug * &sigma + &sigma * a_aug.transpose() + &bbt;
        let dy = &sens.c * mean.rows(0, n) + c * mean.rows(n, n);
        pack(&[dm.as_slice(), ds.as_slice(), dy.as_slice()])
    };

    let mut mean0 = RealVector::zeros(dim);
    mean0.rows_mut(0, n).copy_from(initial.mean());
    let mut sigma0 = RealMatrix::zeros(dim, dim);
    sigma0.view_mut((0, 0), (n, n)).copy_from(initial.sigma());
    let mut y = pack(&[mean0.as_slice(), sigma0.as_slice(), &vec![0.0; m]]);

    let mut out = MomentTrajectory {
        times: Vec::with_capacity(count + 1),
        means: Vec::with_capacity(count + 1),
        covariances: Vec::with_capacity(count + 1),
        sensitivity: None,
    };
    let mut sens_out = SensitivityTrajectory {
        means: Vec::with_capacity(count + 1),
        cross: Vec::with_capacity(count + 1),
        covariances: Vec::with_capacity(count + 1),
        output_means: Vec::with_capacity(count + 1),
    };
    for k in 0..=count {
        if k > 0 {
            y = rk4_step(&y, h, &rhs);
        }
        let s = y.as_slice();
        let sigma = sym(&RealMatrix::from_column_slice(dim, dim, &s[dim..dim + dim * dim]));
        out.times.push(k as f64 * h);
        out.means.push(RealVector::from_column_slice(&s[..n]));
        out.covariances.push(sigma.view((0, 0), (n, n)).into_owned());
        sens_out.means.push(RealVector::from_column_slice(&s[n..dim]));
        sens_out.cross.push(sigma.view((n, 0), (n, n)).into_owned());
        sens_out.covariances.push(sigma.view((n, n), (n, n)).into_owned());
        sens_out
            .output_means
            .push(RealVector::from_column_slice(&s[dim + dim * dim..]));
    }
    out.sensitivity = Some(sens_out);
    Ok(out)
}
