//! Open quantum harmonic oscillators: realizations built from energy
//! parameters, physical-realizability checks, recovery of the energy
//! parameters, invariant states and quadratic costs.
//!
//! With `H = ½XᵀRX` and `L = NX` the system obeys
//! `dX = AX dt + B dW`, `dY = CX dt + dW` where
//! `A = 2Θ(R + NᵀJN)`, `B = 2ΘNᵀ`, `C = 2JN`.

use num_complex::Complex64;

use crate::ccr::{CcrStructure, GaussianState};
use crate::error::{check_shape, Error, Result};
use crate::linalg::{
    block_diag, canonical_j, frobenius, hermitian_min_eigenvalue, is_hurwitz, is_symmetric,
    solve_lyapunov, sym, ComplexMatrix, HurwitzReport, RealMatrix, RealVector,
};

/// Acceptance threshold on physical-realizability residuals.
pub const PR_TOL: f64 = 1e-8;

/// Asymmetry of the recovered Hamiltonian matrix above which recovery fails.
pub const RECOVERY_ASYMMETRY_TOL: f64 = 1e-7;

/// Ito table `dW dWᵀ = Ω dt`, `Ω = I + iJ`, `J = [[0, 1], [-1, 0]] ⊗ I_{m/2}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ItoTable {
    j: RealMatrix,
}

impl ItoTable {
    pub fn new(m: usize) -> Result<Self> {
        if m % 2 == 1 {
            return Err(Error::InvalidInput(format!(
                "number of field channels must be even, got {m}"
            )));
        }
        Ok(Self { j: canonical_j(m) })
    }

    /// Ito table of two independent field vectors stacked `[W; ω]`.
    pub fn stacked(&self, other: &ItoTable) -> ItoTable {
        ItoTable {
            j: block_diag(&self.j, &other.j),
        }
    }

    pub fn m(&self) -> usize {
        self.j.nrows()
    }

    pub fn j(&self) -> &RealMatrix {
        &self.j
    }

    pub fn omega(&self) -> ComplexMatrix {
        let m = self.m();
        ComplexMatrix::from_fn(m, m, |r, c| {
            Complex64::new(if r == c { 1.0 } else { 0.0 }, self.j[(r, c)])
        })
    }
}

/// Hamiltonian matrix `R` and coupling matrix `N` over a CCR structure.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyParams {
    ccr: CcrStructure,
    r: RealMatrix,
    coupling: RealMatrix,
    ito: ItoTable,
}

impl EnergyParams {
    pub fn new(ccr: CcrStructure, r: RealMatrix, coupling: RealMatrix, ito: ItoTable) -> Result<Self> {
        let n = ccr.n();
        check_shape("Hamiltonian matrix R", (n, n), r.shape())?;
        check_shape("coupling matrix N", (ito.m(), n), coupling.shape())?;
        if !is_symmetric(&r, 1e-12) {
            return Err(Error::InvalidInput("Hamiltonian matrix R must be symmetric".into()));
        }
        Ok(Self {
            ccr,
            r: sym(&r),
            coupling,
            ito,
        })
    }

    pub fn ccr(&self) -> &CcrStructure {
        &self.ccr
    }

    pub fn theta(&self) -> &RealMatrix {
        self.ccr.theta()
    }

    pub fn r(&self) -> &RealMatrix {
        &self.r
    }

    pub fn coupling(&self) -> &RealMatrix {
        &self.coupling
    }

    pub fn ito(&self) -> &ItoTable {
        &self.ito
    }

    pub fn n(&self) -> usize {
        self.ccr.n()
    }

    pub fn m(&self) -> usize {
        self.ito.m()
    }

    /// Parameters moved to `(R + s·dR, N + s·dN)`.
    pub fn shifted(&self, dr: &RealMatrix, dn: &RealMatrix, s: f64) -> Result<Self> {
        Self::new(
            self.ccr.clone(),
            &self.r + dr * s,
            &self.coupling + dn * s,
            self.ito.clone(),
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OqhoRealization {
    a: RealMatrix,
    b: RealMatrix,
    c: RealMatrix,
    ccr: CcrStructure,
    ito: ItoTable,
}

impl OqhoRealization {
    /// Wraps externally supplied `(A, B, C)`, rejecting them if either
    /// realizability residual exceeds `tol`.
    pub fn from_matrices(
        a: RealMatrix,
        b: RealMatrix,
        c: RealMatrix,
        ccr: CcrStructure,
        ito: ItoTable,
        tol: f64,
    ) -> Result<Self> {
        let res = check_physical_realizability(&a, &b, &c, ccr.theta(), &ito)?;
        if !res.passes(tol) {
            return Err(Error::NotRealizable {
                lyapunov: res.lyapunov,
                output: res.output,
                asymmetry: 0.0,
            });
        }
        Ok(Self { a, b, c, ccr, ito })
    }

    pub fn a(&self) -> &RealMatrix {
        &self.a
    }

    pub fn b(&self) -> &RealMatrix {
        &self.b
    }

    pub fn c(&self) -> &RealMatrix {
        &self.c
    }

    pub fn ccr(&self) -> &CcrStructure {
        &self.ccr
    }

    pub fn theta(&self) -> &RealMatrix {
        self.ccr.theta()
    }

    pub fn ito(&self) -> &ItoTable {
        &self.ito
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn m(&self) -> usize {
        self.ito.m()
    }

    /// `N = -½ J C`, using `J⁻¹ = -J`.
    pub fn coupling(&self) -> RealMatrix {
        -(self.ito.j() * &self.c) * 0.5
    }

    pub fn hurwitz(&self) -> HurwitzReport {
        is_hurwitz(&self.a)
    }

    pub fn residuals(&self) -> PrResiduals {
        check_physical_realizability(&self.a, &self.b, &self.c, self.theta(), &self.ito)
            .expect("realization shapes are consistent by construction")
    }
}

pub fn build_realization(params: &EnergyParams) -> OqhoRealization {
    let theta = params.theta();
    let n_mat = params.coupling();
    let j = params.ito.j();
    let a = theta * (params.r() + n_mat.transpose() * j * n_mat) * 2.0;
    let b = theta * n_mat.transpose() * 2.0;
    let c = j * n_mat * 2.0;
    OqhoRealization {
        a,
        b,
        c,
        ccr: params.ccr.clone(),
        ito: params.ito.clone(),
    }
}

/// Frobenius norms of `AΘ + ΘAᵀ + BJBᵀ` and `ΘCᵀ + BJ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrResiduals {
    pub lyapunov: f64,
    pub output: f64,
}

impl PrResiduals {
    pub fn passes(&self, tol: f64) -> bool {
        self.lyapunov <= tol && self.output <= tol
    }
}

pub fn check_physical_realizability(
    a: &RealMatrix,
    b: &RealMatrix,
    c: &RealMatrix,
    theta: &RealMatrix,
    ito: &ItoTable,
) -> Result<PrResiduals> {
    let n = theta.nrows();
    let m = ito.m();
    check_shape("A", (n, n), a.shape())?;
    check_shape("B", (n, m), b.shape())?;
    check_shape("C", (m, n), c.shape())?;
    let j = ito.j();
    Ok(PrResiduals {
        lyapunov: (a * theta + theta * a.transpose() + b * j * b.transpose()).norm(),
        output: (theta * c.transpose() + b * j).norm(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoveredParams {
    pub params: EnergyParams,
    /// `‖R_raw − R_rawᵀ‖_F` before symmetrization.
    pub asymmetry: f64,
    pub residuals: PrResiduals,
}

/// Inverts the map `(R, N) ↦ (A, B, C)`: `N = -½JC`,
/// `R = sym(½Θ⁻¹A − NᵀJN)`.
pub fn recover_energy_params(
    a: &RealMatrix,
    b: &RealMatrix,
    c: &RealMatrix,
    ccr: &CcrStructure,
    ito: &ItoTable,
) -> Result<RecoveredParams> {
    let residuals = check_physical_realizability(a, b, c, ccr.theta(), ito)?;
    let theta_inv = ccr
        .theta()
        .clone()
        .try_inverse()
        .filter(|_| ccr.is_nondegenerate())
        .ok_or(Error::SingularTheta)?;
    let j = ito.j();
    let coupling = -(j * c) * 0.5;
    let r_raw = &theta_inv * a * 0.5 - coupling.transpose() * j * &coupling;
    let asymmetry = (&r_raw - r_raw.transpose()).norm();
    if !residuals.passes(PR_TOL) || asymmetry > RECOVERY_ASYMMETRY_TOL {
        return Err(Error::NotRealizable {
            lyapunov: residuals.lyapunov,
            output: residuals.output,
            asymmetry,
        });
    }
    let params = EnergyParams::new(ccr.clone(), sym(&r_raw), coupling, ito.clone())?;
    Ok(RecoveredParams {
        params,
        asymmetry,
        residuals,
    })
}

/// Invariant Gaussian state: zero mean, `AΣ + ΣAᵀ + BBᵀ = 0`.
pub fn steady_state_covariance(realization: &OqhoRealization) -> Result<GaussianState> {
    let hurwitz = realization.hurwitz();
    if !hurwitz.stable {
        return Err(Error::NotHurwitz {
            margin: hurwitz.margin,
        });
    }
    let b = realization.b();
    let sigma = solve_lyapunov(realization.a(), &(b * b.transpose()))?;
    // Admissibility is reported, not enforced, for the steady state.
    GaussianState::with_tolerance(
        RealVector::zeros(realization.n()),
        sigma,
        realization.ccr(),
        f64::INFINITY,
    )
}

/// `min eig(Σ + iΘ)` for a state of `realization`.
pub fn admissibility_margin(realization: &OqhoRealization, state: &GaussianState) -> f64 {
    hermitian_min_eigenvalue(state.sigma(), realization.theta())
}

/// Weighting `Π` of the criterion `Z = ½[Xᵀ Lᵀ] Π [X; L]`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadCost {
    pi: RealMatrix,
    n: usize,
}

impl QuadCost {
    /// `n` is the number of system variables; `Π` must be `(n+m)×(n+m)`,
    /// symmetric and positive semidefinite to within `1e-10`.
    pub fn new(pi: RealMatrix, n: usize) -> Result<Self> {
        if !pi.is_square() || pi.nrows() < n {
            return Err(Error::ShapeMismatch {
                context: "cost weight Π",
                expected: format!("square with at least {n} rows"),
                got: format!("{}x{}", pi.nrows(), pi.ncols()),
            });
        }
        if !is_symmetric(&pi, 1e-12) {
            return Err(Error::InvalidInput("cost weight Π must be symmetric".into()));
        }
        let pi = sym(&pi);
        if pi.nrows() > 0 && pi.symmetric_eigenvalues().min() < -1e-10 {
            return Err(Error::InvalidInput(
                "cost weight Π must be positive semidefinite".into(),
            ));
        }
        Ok(Self { pi, n })
    }

    /// Gram form `Π = [Sᵀ; -Tᵀ][S, -T]` of `½|SX − TL|²`.
    pub fn from_discrepancy(s: &RealMatrix, t: &RealMatrix) -> Result<Self> {
        if s.nrows() != t.nrows() {
            return Err(Error::ShapeMismatch {
                context: "discrepancy weights S, T",
                expected: format!("{} rows", s.nrows()),
                got: format!("{} rows", t.nrows()),
            });
        }
        let mut g = RealMatrix::zeros(s.nrows(), s.ncols() + t.ncols());
        g.view_mut((0, 0), s.shape()).copy_from(s);
        g.view_mut((0, s.ncols()), t.shape()).copy_from(&(-t));
        Self::new(g.transpose() * g, s.ncols())
    }

    pub fn pi(&self) -> &RealMatrix {
        &self.pi
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.pi.nrows() - self.n
    }

    pub fn pi11(&self) -> RealMatrix {
        self.pi.view((0, 0), (self.n, self.n)).into_owned()
    }

    pub fn pi12(&self) -> RealMatrix {
        self.pi.view((0, self.n), (self.n, self.m())).into_owned()
    }

    pub fn pi21(&self) -> RealMatrix {
        self.pi.view((self.n, 0), (self.m(), self.n)).into_owned()
    }

    pub fn pi22(&self) -> RealMatrix {
        self.pi.view((self.n, self.n), (self.m(), self.m())).into_owned()
    }

    /// `P = Π₁₁ + Π₁₂N + NᵀΠ₂₁ + NᵀΠ₂₂N`.
    pub fn p_matrix(&self, coupling: &RealMatrix) -> Result<RealMatrix> {
        check_shape("coupling matrix N", (self.m(), self.n), coupling.shape())?;
        let nt = coupling.transpose();
        let p = self.pi11() + self.pi12() * coupling + &nt * self.pi21() + &nt * self.pi22() * coupling;
        Ok(sym(&p))
    }
}

/// `𝒵 = ½⟨P, Σ⟩` over the invariant state.
pub fn lqg_cost(realization: &OqhoRealization, cost: &QuadCost) -> Result<f64> {
    let state = steady_state_covariance(realization)?;
    let p = cost.p_matrix(&realization.coupling())?;
    Ok(0.5 * frobenius(&p, state.sigma()))
}
