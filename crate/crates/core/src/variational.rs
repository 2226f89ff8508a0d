//! Gateaux derivatives of the averaged quadratic cost
//! `𝒵 = lim E ½[Xᵀ Lᵀ]Π[X; L]` with respect to perturbations
//! `H ↦ H + εK`, `L ↦ L + εM` of the energy operators.
//!
//! Three independent routes are provided:
//!
//! * **parametric**: differentiate the covariance Lyapunov equation along
//!   `(R′, N′)`; only valid for quadratic `K` and linear `M`;
//! * **transverse**: average the transverse-Hamiltonian superoperator
//!   `χ(σ) = i[K − Im(LᵀΩM), σ] − 2Re([σ, Lᵀ]ΩM)` applied to the entries of
//!   `Ξ = Re(XXᵀ)` over the invariant Gaussian state, solve
//!   `AΥ + ΥAᵀ + E χ(Ξ) = 0`, and assemble
//!   `𝒵′ = E Re(Xᵀ(Π₁₂ + NᵀΠ₂₂)M) + ½⟨P, Υ⟩`; valid for polynomial `K`, `M`;
//! * **finite differences** of the cost over rebuilt realizations.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::ccr::{gaussian_expectation, CanonicalPolynomial, CcrStructure, GaussianState, DEFAULT_DEGREE_CAP};
use crate::error::{Error, Result};
use crate::linalg::{frobenius, solve_lyapunov, sym, to_complex, RealMatrix};
use crate::moments::{sensitivity_matrices, StructuredDirection};
use crate::oqho::{build_realization, steady_state_covariance, EnergyParams, QuadCost};

/// Relative agreement required between the parametric and transverse routes.
pub const ROUTE_TOL: f64 = 1e-8;
/// Relative agreement required between finite differences and the parametric route.
pub const FD_TOL: f64 = 1e-5;
pub const DEFAULT_FD_STEP: f64 = 1e-5;
pub const DEFAULT_STATIONARITY_TOL: f64 = 1e-7;

const SELF_ADJOINT_TOL: f64 = 1e-12;

/// Perturbation `(K, M)` given as polynomials in the system variables.
#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialDirection {
    k: CanonicalPolynomial,
    m: Vec<CanonicalPolynomial>,
}

impl PolynomialDirection {
    /// Requires `K = K†` and `Mⱼ = Mⱼ†`.
    pub fn new(ccr: &CcrStructure, k: CanonicalPolynomial, m: Vec<CanonicalPolynomial>) -> Result<Self> {
        if !ccr.is_self_adjoint(&k, SELF_ADJOINT_TOL * (1.0 + k.max_abs_coefficient())) {
            return Err(Error::NonSelfAdjointDirection("K".into()));
        }
        for (j, mj) in m.iter().enumerate() {
            if !ccr.is_self_adjoint(mj, SELF_ADJOINT_TOL * (1.0 + mj.max_abs_coefficient())) {
                return Err(Error::NonSelfAdjointDirection(format!("M[{j}]")));
            }
        }
        Ok(Self { k, m })
    }

    /// `K = ½XᵀR′X`, `M = N′X`.
    pub fn from_structured(ccr: &CcrStructure, dir: &StructuredDirection) -> Result<Self> {
        let k = ccr.quadratic_form(&(dir.r_prime() * 0.5))?;
        let m = ccr.linear_forms(dir.n_prime())?;
        Ok(Self { k, m })
    }

    pub fn k(&self) -> &CanonicalPolynomial {
        &self.k
    }

    pub fn m(&self) -> &[CanonicalPolynomial] {
        &self.m
    }

    pub fn degree(&self) -> usize {
        self.m.iter().map(|p| p.degree()).chain([self.k.degree()]).max().unwrap_or(0)
    }

    /// `α·self + β·other`.
    pub fn combine(&self, alpha: f64, other: &Self, beta: f64) -> Self {
        Self {
            k: self.k.clone().scale_real(alpha) + other.k.clone().scale_real(beta),
            m: self
                .m
                .iter()
                .zip(&other.m)
                .map(|(a, b)| a.clone().scale_real(alpha) + b.clone().scale_real(beta))
                .collect(),
        }
    }

    fn coefficient_norm(&self) -> f64 {
        std::iter::once(&self.k)
            .chain(&self.m)
            .flat_map(|p| p.terms().map(|(_, c)| c.norm_sqr()))
            .sum::<f64>()
            .sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PerturbationDirection {
    Structured(StructuredDirection),
    Polynomial(PolynomialDirection),
}

impl PerturbationDirection {
    fn norm(&self) -> f64 {
        match self {
            Self::Structured(d) => d.norm(),
            Self::Polynomial(d) => d.coefficient_norm(),
        }
    }

    fn scaled(&self, s: f64) -> Self {
        match self {
            Self::Structured(d) => Self::Structured(d.combine(s, d, 0.0)),
            Self::Polynomial(d) => Self::Polynomial(d.combine(s, d, 0.0)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransverseConfig {
    /// Largest admissible degree of `K` and of the entries of `M`.
    pub degree_cap: usize,
    /// Largest tolerated imaginary part of `E χ(Ξ)` and of the first term.
    pub imag_tol: f64,
}

impl Default for TransverseConfig {
    fn default() -> Self {
        Self {
            degree_cap: DEFAULT_DEGREE_CAP,
            imag_tol: 1e-9,
        }
    }
}

/// Outcome of the transverse route, with the per-route values when more
/// than one route was evaluated.
#[derive(Debug, Clone, PartialEq)]
pub struct GateauxReport {
    pub value: f64,
    pub parametric: Option<f64>,
    pub transverse: f64,
    pub finite_difference: Option<f64>,
    /// `E Re(Xᵀ(Π₁₂ + NᵀΠ₂₂)M)` over the invariant state.
    pub term1: f64,
    /// `½⟨P, Υ∞⟩`.
    pub term2: f64,
    /// `lim E χ(Ξ)` (real part).
    pub chi_mean: RealMatrix,
    pub upsilon: RealMatrix,
    /// Largest imaginary part seen in `E χ(Ξ)` or in the first term.
    pub imag_residual: f64,
    /// `‖AΥ + ΥAᵀ + E χ(Ξ)‖_F`.
    pub lyapunov_residual: f64,
}

/// `𝒵 = ½⟨P, Σ∞⟩`, using the coupling matrix of `params` directly.
pub fn cost_value(params: &EnergyParams, cost: &QuadCost) -> Result<f64> {
    let real = build_realization(params);
    let state = steady_state_covariance(&real)?;
    Ok(0.5 * frobenius(&cost.p_matrix(params.coupling())?, state.sigma()))
}

/// Differentiates `AΣ + ΣAᵀ + BBᵀ = 0` along `(R′, N′)`.
pub fn gateaux_parametric(params: &EnergyParams, cost: &QuadCost, dir: &StructuredDirection) -> Result<f64> {
    let real = build_realization(params);
    let state = steady_state_covariance(&real)?;
    let sigma = state.sigma();
    let sens = sensitivity_matrices(params, dir)?;
    let b = real.b();
    let forcing = &sens.a * sigma
        + sigma * sens.a.transpose()
        + &sens.b * b.transpose()
        + b * sens.b.transpose();
    let sigma_prime = solve_lyapunov(real.a(), &sym(&forcing))?;

    let coupling = params.coupling();
    let np = dir.n_prime();
    let p_prime = cost.pi12() * np
        + np.transpose() * cost.pi21()
        + np.transpose() * cost.pi22() * coupling
        + coupling.transpose() * cost.pi22() * np;
    let p = cost.p_matrix(coupling)?;
    Ok(0.5 * (frobenius(&p_prime, sigma) + frobenius(&p, &sigma_prime)))
}

/// The entries `χ(X_j X_k)`, `j ≤ k`, as polynomials, together with the
/// working algebra used to build them.
pub struct ChiPolynomials {
    pub algebra: CcrStructure,
    /// Row-major upper triangle: `entries[j][k - j] = χ(X_j X_k)`.
    pub entries: Vec<Vec<CanonicalPolynomial>>,
    /// `Re(Xᵀ(Π₁₂ + NᵀΠ₂₂)M)`, present when a cost was supplied.
    pub first_term: Option<CanonicalPolynomial>,
}

impl ChiPolynomials {
    pub fn get(&self, j: usize, k: usize) -> &CanonicalPolynomial {
        let (j, k) = if j <= k { (j, k) } else { (k, j) };
        &self.entries[j][k - j]
    }
}

/// Builds `χ(X_j X_k) = i[K − Im(LᵀΩM), X_jX_k] + 4 Im((X_kΘ_{j·} + X_jΘ_{k·})NᵀΩM)`.
pub fn chi_polynomials(
    params: &EnergyParams,
    cost: Option<&QuadCost>,
    dir: &PolynomialDirection,
    config: &TransverseConfig,
) -> Result<ChiPolynomials> {
    let n = params.n();
    let m = params.m();
    if dir.m.len() != m {
        return Err(Error::ShapeMismatch {
            context: "coupling perturbation M",
            expected: format!("{m} entries"),
            got: format!("{}", dir.m.len()),
        });
    }
    if dir.k.n() != n || dir.m.iter().any(|p| p.n() != n) {
        return Err(Error::ShapeMismatch {
            context: "perturbation variables",
            expected: format!("{n}"),
            got: format!("{}", dir.k.n()),
        });
    }
    let degree = dir.degree();
    if degree > config.degree_cap {
        return Err(Error::DegreeCapExceeded {
            degree,
            cap: config.degree_cap,
        });
    }
    // Products with X_j X_k and with L add at most three degrees.
    let algebra = params.ccr().clone().with_degree_cap(config.degree_cap + 3);
    let theta = algebra.theta().clone();
    let omega = params.ito().omega();
    let coupling = params.coupling();

    let l = algebra.linear_forms(coupling)?;
    let lom = algebra.bilinear(&l, &omega, &dir.m)?;
    let drift = dir.k.clone() - algebra.imag_part(&lom);

    // w = NᵀΩM, an n-vector of polynomials
    let weights = to_complex(&coupling.transpose()) * &omega;
    let w: Vec<CanonicalPolynomial> = (0..n)
        .map(|p| {
            (0..m).fold(algebra.zero(), |acc, q| {
                let c = weights[(p, q)];
                if c == Complex64::new(0.0, 0.0) {
                    acc
                } else {
                    acc + dir.m[q].clone().scale(c)
                }
            })
        })
        .collect();

    let i = Complex64::new(0.0, 1.0);
    let mut entries = Vec::with_capacity(n);
    for j in 0..n {
        let mut row = Vec::with_capacity(n - j);
        for k in j..n {
            let sigma = algebra.canonicalize(Complex64::new(1.0, 0.0), &[j, k])?;
            let mut chi = algebra.commutator(&drift, &sigma)?.scale(i);
            let mut mixed = algebra.zero();
            for (p, wp) in w.iter().enumerate() {
                let vp = {
                    let mut coeffs = vec![0.0; n];
                    coeffs[k] += theta[(j, p)];
                    coeffs[j] += theta[(k, p)];
                    algebra.linear_form(&coeffs)?
                };
                if !vp.is_zero() && !wp.is_zero() {
                    mixed += algebra.mul(&vp, wp)?;
                }
            }
            chi += algebra.imag_part(&mixed).scale_real(4.0);
            row.push(chi);
        }
        entries.push(row);
    }

    let first_term = match cost {
        Some(cost) => {
            let g = cost.pi12() + coupling.transpose() * cost.pi22();
            let x: Vec<CanonicalPolynomial> = (0..n).map(|p| algebra.variable(p)).collect::<Result<_>>()?;
            let xgm = algebra.bilinear(&x, &to_complex(&g), &dir.m)?;
            Some(algebra.real_part(&xgm))
        }
        None => None,
    };

    Ok(ChiPolynomials {
        algebra,
        entries,
        first_term,
    })
}

/// `lim E χ(Ξ)` over `state`; returns the real part and the largest
/// imaginary part encountered.
pub fn chi_mean(chi: &ChiPolynomials, state: &GaussianState) -> Result<(RealMatrix, f64)> {
    let n = chi.entries.len();
    let mut mean = RealMatrix::zeros(n, n);
    let mut imag = 0.0f64;
    for j in 0..n {
        for k in j..n {
            let e = gaussian_expectation(&chi.algebra, chi.get(j, k), state)?;
            imag = imag.max(e.im.abs());
            mean[(j, k)] = e.re;
            mean[(k, j)] = e.re;
        }
    }
    Ok((mean, imag))
}

fn check_imag(value: f64, scale: f64, tol: f64) -> Result<()> {
    if value > tol * (1.0 + scale) {
        Err(Error::InvalidInput(format!(
            "transverse moments are not real: imaginary residual {value:e}"
        )))
    } else {
        Ok(())
    }
}

/// Transverse-Hamiltonian route for an arbitrary polynomial direction.
pub fn gateaux_transverse(
    params: &EnergyParams,
    cost: &QuadCost,
    dir: &PerturbationDirection,
    config: &TransverseConfig,
) -> Result<GateauxReport> {
    let real = build_realization(params);
    let state = steady_state_covariance(&real)?;
    let poly = match dir {
        PerturbationDirection::Structured(d) => PolynomialDirection::from_structured(params.ccr(), d)?,
        PerturbationDirection::Polynomial(d) => d.clone(),
    };
    let chi = chi_polynomials(params, Some(cost), &poly, config)?;
    let (chi_mean, chi_imag) = chi_mean(&chi, &state)?;
    check_imag(chi_imag, chi_mean.amax(), config.imag_tol)?;

    let first = chi.first_term.as_ref().expect("cost supplied");
    let t1 = gaussian_expectation(&chi.algebra, first, &state)?;
    check_imag(t1.im.abs(), t1.re.abs(), config.imag_tol)?;

    let upsilon = solve_lyapunov(real.a(), &chi_mean)?;
    let lyapunov_residual = (real.a() * &upsilon + &upsilon * real.a().transpose() + &chi_mean).norm();
    let p = cost.p_matrix(params.coupling())?;
    let term2 = 0.5 * frobenius(&p, &upsilon);
    let value = t1.re + term2;
    Ok(GateauxReport {
        value,
        parametric: None,
        transverse: value,
        finite_difference: None,
        term1: t1.re,
        term2,
        chi_mean,
        upsilon,
        imag_residual: chi_imag.max(t1.im.abs()),
        lyapunov_residual,
    })
}

fn central_difference(params: &EnergyParams, cost: &QuadCost, dir: &StructuredDirection, eps: f64) -> Result<f64> {
    let eval = |s: f64, sign: char| -> Result<f64> {
        let shifted = params.shifted(dir.r_prime(), dir.n_prime(), s)?;
        cost_value(&shifted, cost).map_err(|e| match e {
            Error::NotHurwitz { margin } => Error::PerturbedNotHurwitz { sign, margin },
            other => other,
        })
    };
    Ok((eval(eps, '+')? - eval(-eps, '-')?) / (2.0 * eps))
}

/// Central difference of the cost with one Richardson level (steps `ε`, `ε/2`).
pub fn gateaux_finite_difference(
    params: &EnergyParams,
    cost: &QuadCost,
    dir: &StructuredDirection,
    eps: f64,
) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(Error::InvalidInput("finite-difference step must be positive".into()));
    }
    let coarse = central_difference(params, cost, dir, eps)?;
    let fine = central_difference(params, cost, dir, eps / 2.0)?;
    Ok((4.0 * fine - coarse) / 3.0)
}

/// Steady-state growth rate of `E Q(t)` for a structured direction:
/// `½⟨R′ + N′ᵀJN − NᵀJN′, Σ⟩ − ⟨NΘ, N′⟩`.
pub fn expected_transverse_rate(params: &EnergyParams, dir: &StructuredDirection) -> Result<f64> {
    let real = build_realization(params);
    let state = steady_state_covariance(&real)?;
    let j = params.ito().j();
    let coupling = params.coupling();
    let np = dir.n_prime();
    let g = dir.r_prime() + np.transpose() * j * coupling - coupling.transpose() * j * np;
    Ok(0.5 * frobenius(&g, state.sigma()) - frobenius(&(coupling * params.theta()), np))
}

/// All applicable routes for a structured direction, with agreement
/// enforced between them.
pub fn gateaux_all_routes(
    params: &EnergyParams,
    cost: &QuadCost,
    dir: &StructuredDirection,
    fd_step: Option<f64>,
) -> Result<GateauxReport> {
    let parametric = gateaux_parametric(params, cost, dir)?;
    let mut report = gateaux_transverse(
        params,
        cost,
        &PerturbationDirection::Structured(dir.clone()),
        &TransverseConfig::default(),
    )?;
    report.parametric = Some(parametric);
    if !agrees(report.transverse, parametric, ROUTE_TOL) {
        return Err(Error::RouteDisagreement {
            first: "transverse",
            a: report.transverse,
            second: "parametric",
            b: parametric,
        });
    }
    if let Some(eps) = fd_step {
        let fd = gateaux_finite_difference(params, cost, dir, eps)?;
        report.finite_difference = Some(fd);
        if !agrees(fd, parametric, FD_TOL) {
            return Err(Error::RouteDisagreement {
                first: "finite-difference",
                a: fd,
                second: "parametric",
                b: parametric,
            });
        }
    }
    Ok(report)
}

/// `|a − b| ≤ tol·(1 + |b|)`.
pub fn agrees(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + b.abs())
}

#[derive(Debug, Clone, PartialEq)]
pub struct StationarityReport {
    /// `𝒵′` along each unit-normalized basis direction (zero directions give 0).
    pub values: Vec<f64>,
    pub max_abs: f64,
    pub tolerance: f64,
    pub stationary: bool,
}

/// Evaluates `𝒵′` over a basis and declares stationarity when every value
/// is within `tolerance`.
pub fn stationarity_test(
    params: &EnergyParams,
    cost: &QuadCost,
    basis: &[PerturbationDirection],
    tolerance: f64,
) -> Result<StationarityReport> {
    let config = TransverseConfig::default();
    let values = basis
        .par_iter()
        .map(|dir| {
            let norm = dir.norm();
            if norm == 0.0 {
                return Ok(0.0);
            }
            gateaux_transverse(params, cost, &dir.scaled(1.0 / norm), &config).map(|r| r.value)
        })
        .collect::<Result<Vec<f64>>>()?;
    let max_abs = values.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    Ok(StationarityReport {
        values,
        max_abs,
        tolerance,
        stationary: max_abs <= tolerance,
    })
}

/// Orthonormal (Frobenius) basis of structured directions: symmetric
/// elementary `R′` matrices followed by elementary `N′` matrices.
pub fn elementary_basis(n: usize, m: usize) -> Vec<StructuredDirection> {
    let mut out = Vec::new();
    for j in 0..n {
        for k in j..n {
            let mut r = RealMatrix::zeros(n, n);
            if j == k {
                r[(j, j)] = 1.0;
            } else {
                r[(j, k)] = std::f64::consts::FRAC_1_SQRT_2;
                r[(k, j)] = std::f64::consts::FRAC_1_SQRT_2;
            }
            out.push(StructuredDirection::new(r, RealMatrix::zeros(m, n)).expect("symmetric by construction"));
        }
    }
    for l in 0..m {
        for k in 0..n {
            let mut np = RealMatrix::zeros(m, n);
            np[(l, k)] = 1.0;
            out.push(StructuredDirection::new(RealMatrix::zeros(n, n), np).expect("shapes match"));
        }
    }
    out
}
