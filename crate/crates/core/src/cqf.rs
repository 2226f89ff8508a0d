//! Coherent quantum filtering: a linear quantum filter driven by the output
//! fields of the plant, tuned to minimize the mean-square discrepancy
//! `½ E|SX − T[Y; Z]|²` between plant variables and the combined outputs.

use rayon::prelude::*;

use crate::ccr::CcrStructure;
use crate::error::{check_shape, Error, Result};
use crate::linalg::{block_diag, canonical_j, frobenius, is_antisymmetric, is_symmetric, sym, RealMatrix, SYMMETRY_TOL};
use crate::moments::StructuredDirection;
use crate::oqho::{build_realization, EnergyParams, ItoTable, OqhoRealization, QuadCost};
use crate::variational::{
    cost_value, gateaux_all_routes, gateaux_finite_difference, GateauxReport, DEFAULT_FD_STEP,
};

/// Filter with variables `ξ`, `[ξ, ξᵀ] = 2iΛ`, Hamiltonian `Γ = ½ξᵀR_fξ`,
/// coupling `Φ = N_Φξ` to the plant output and `Ψ = N_Ψξ` to its own noise.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterParams {
    lambda: RealMatrix,
    r_f: RealMatrix,
    n_phi: RealMatrix,
    n_psi: RealMatrix,
}

impl FilterParams {
    pub fn new(lambda: RealMatrix, r_f: RealMatrix, n_phi: RealMatrix, n_psi: RealMatrix) -> Result<Self> {
        let nu = lambda.nrows();
        check_shape("filter CCR matrix Λ", (nu, nu), lambda.shape())?;
        check_shape("filter Hamiltonian R_f", (nu, nu), r_f.shape())?;
        check_shape("filter coupling N_Φ", (n_phi.nrows(), nu), n_phi.shape())?;
        check_shape("filter noise coupling N_Ψ", (n_psi.nrows(), nu), n_psi.shape())?;
        if !is_antisymmetric(&lambda, SYMMETRY_TOL) {
            return Err(Error::InvalidInput("filter CCR matrix Λ must be antisymmetric".into()));
        }
        if !is_symmetric(&r_f, SYMMETRY_TOL) {
            return Err(Error::InvalidInput("filter Hamiltonian R_f must be symmetric".into()));
        }
        if n_psi.nrows() % 2 == 1 {
            return Err(Error::InvalidInput(format!(
                "number of filter noise channels must be even, got {}",
                n_psi.nrows()
            )));
        }
        Ok(Self {
            lambda,
            r_f: sym(&r_f),
            n_phi,
            n_psi,
        })
    }

    /// Filter with `Λ = [[0, 1], [-1, 0]] ⊗ I_{ν/2}`.
    pub fn canonical(r_f: RealMatrix, n_phi: RealMatrix, n_psi: RealMatrix) -> Result<Self> {
        let nu = r_f.nrows();
        if nu % 2 == 1 {
            return Err(Error::InvalidInput(format!("filter dimension must be even, got {nu}")));
        }
        Self::new(canonical_j(nu), r_f, n_phi, n_psi)
    }

    pub fn lambda(&self) -> &RealMatrix {
        &self.lambda
    }

    pub fn r_f(&self) -> &RealMatrix {
        &self.r_f
    }

    pub fn n_phi(&self) -> &RealMatrix {
        &self.n_phi
    }

    pub fn n_psi(&self) -> &RealMatrix {
        &self.n_psi
    }

    pub fn nu(&self) -> usize {
        self.lambda.nrows()
    }

    /// Number of filter noise channels `μ`.
    pub fn mu(&self) -> usize {
        self.n_psi.nrows()
    }

    /// `(R_f + s·dR_f, N_Φ + s·dN_Φ)`, with `Λ` and `N_Ψ` unchanged.
    pub fn moved(&self, dir: &FilterDirection, s: f64) -> Result<Self> {
        Self::new(
            self.lambda.clone(),
            &self.r_f + dir.r_f_prime() * s,
            &self.n_phi + dir.n_phi_prime() * s,
            self.n_psi.clone(),
        )
    }
}

/// Weights of the discrepancy `SX − T[Y; Z]`, `T = [T₁ T₂]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CqfWeights {
    s: RealMatrix,
    t: RealMatrix,
}

impl CqfWeights {
    pub fn new(s: RealMatrix, t: RealMatrix) -> Result<Self> {
        if s.nrows() != t.nrows() {
            return Err(Error::ShapeMismatch {
                context: "discrepancy weights S, T",
                expected: format!("{} rows", s.nrows()),
                got: format!("{} rows", t.nrows()),
            });
        }
        Ok(Self { s, t })
    }

    pub fn s(&self) -> &RealMatrix {
        &self.s
    }

    pub fn t(&self) -> &RealMatrix {
        &self.t
    }
}

/// Perturbation `(R_f′, N_Φ′)` of the filter decision variables.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterDirection {
    r_f_prime: RealMatrix,
    n_phi_prime: RealMatrix,
}

impl FilterDirection {
    pub fn new(r_f_prime: RealMatrix, n_phi_prime: RealMatrix) -> Result<Self> {
        let nu = r_f_prime.nrows();
        check_shape("filter direction R_f′", (nu, nu), r_f_prime.shape())?;
        check_shape("filter direction N_Φ′", (n_phi_prime.nrows(), nu), n_phi_prime.shape())?;
        if !is_symmetric(&r_f_prime, SYMMETRY_TOL) {
            return Err(Error::InvalidInput("filter direction R_f′ must be symmetric".into()));
        }
        Ok(Self {
            r_f_prime: sym(&r_f_prime),
            n_phi_prime,
        })
    }

    pub fn zero(nu: usize, m: usize) -> Self {
        Self {
            r_f_prime: RealMatrix::zeros(nu, nu),
            n_phi_prime: RealMatrix::zeros(m, nu),
        }
    }

    pub fn r_f_prime(&self) -> &RealMatrix {
        &self.r_f_prime
    }

    pub fn n_phi_prime(&self) -> &RealMatrix {
        &self.n_phi_prime
    }

    pub fn norm(&self) -> f64 {
        (self.r_f_prime.norm_squared() + self.n_phi_prime.norm_squared()).sqrt()
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            r_f_prime: &self.r_f_prime * s,
            n_phi_prime: &self.n_phi_prime * s,
        }
    }

    /// `Σ cᵢ dᵢ`.
    pub fn linear_combination(coeffs: &[f64], dirs: &[FilterDirection]) -> Self {
        let first = &dirs[0];
        let mut out = Self::zero(first.r_f_prime.nrows(), first.n_phi_prime.nrows());
        for (c, d) in coeffs.iter().zip(dirs) {
            out.r_f_prime += &d.r_f_prime * *c;
            out.n_phi_prime += &d.n_phi_prime * *c;
        }
        out
    }
}

/// Frobenius-orthonormal basis of `(R_f′, N_Φ′)`: symmetric elementary
/// matrices for `R_f′`, then elementary matrices for `N_Φ′`.
pub fn filter_basis(nu: usize, m: usize) -> Vec<FilterDirection> {
    crate::variational::elementary_basis(nu, m)
        .into_iter()
        .map(|d| FilterDirection {
            r_f_prime: d.r_prime().clone(),
            n_phi_prime: d.n_prime().clone(),
        })
        .collect()
}

/// Plant and filter as one oscillator over `[X; ξ]` driven by `[W; ω]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CascadeSystem {
    plant: EnergyParams,
    filter: FilterParams,
    weights: CqfWeights,
    params: EnergyParams,
    realization: OqhoRealization,
    cost: QuadCost,
}

impl CascadeSystem {
    pub fn plant(&self) -> &EnergyParams {
        &self.plant
    }

    pub fn filter(&self) -> &FilterParams {
        &self.filter
    }

    pub fn weights(&self) -> &CqfWeights {
        &self.weights
    }

    /// Combined `(bΘ, bR, bN, bJ)`.
    pub fn params(&self) -> &EnergyParams {
        &self.params
    }

    pub fn realization(&self) -> &OqhoRealization {
        &self.realization
    }

    pub fn cost(&self) -> &QuadCost {
        &self.cost
    }

    /// `bR′ = [[0, −NᵀJN_Φ′], [N_Φ′ᵀJN, R_f′]]`, `bN′ = [[0, N_Φ′], [0, 0]]`.
    pub fn embed(&self, dir: &FilterDirection) -> Result<StructuredDirection> {
        let (n, m) = (self.plant.n(), self.plant.m());
        let (nu, mu) = (self.filter.nu(), self.filter.mu());
        check_shape("filter direction R_f′", (nu, nu), dir.r_f_prime.shape())?;
        check_shape("filter direction N_Φ′", (m, nu), dir.n_phi_prime.shape())?;
        let (r, coupling) = cascade_blocks(
            &RealMatrix::zeros(n, n),
            &RealMatrix::zeros(m, n),
            self.plant.coupling(),
            self.plant.ito().j(),
            dir.r_f_prime(),
            dir.n_phi_prime(),
            &RealMatrix::zeros(mu, nu),
        );
        StructuredDirection::new(r, coupling)
    }
}

/// `(bR, bN)` from the plant blocks `(R, N_block)`, the plant coupling used
/// in the cross term, and the filter blocks.
fn cascade_blocks(
    r: &RealMatrix,
    n_block: &RealMatrix,
    plant_coupling: &RealMatrix,
    j: &RealMatrix,
    r_f: &RealMatrix,
    n_phi: &RealMatrix,
    n_psi: &RealMatrix,
) -> (RealMatrix, RealMatrix) {
    let (n, nu) = (r.nrows(), r_f.nrows());
    let (m, mu) = (n_block.nrows(), n_psi.nrows());
    let cross = n_phi.transpose() * j * plant_coupling;
    let mut br = block_diag(r, r_f);
    br.view_mut((n, 0), (nu, n)).copy_from(&cross);
    br.view_mut((0, n), (n, nu)).copy_from(&cross.transpose());
    let mut bn = RealMatrix::zeros(m + mu, n + nu);
    bn.view_mut((0, 0), (m, n)).copy_from(n_block);
    bn.view_mut((0, n), (m, nu)).copy_from(n_phi);
    bn.view_mut((m, n), (mu, nu)).copy_from(n_psi);
    (br, bn)
}

pub fn build_cascade(plant: &EnergyParams, filter: &FilterParams, weights: &CqfWeights) -> Result<CascadeSystem> {
    let (n, m) = (plant.n(), plant.m());
    let (nu, mu) = (filter.nu(), filter.mu());
    check_shape("filter coupling N_Φ", (m, nu), filter.n_phi.shape())?;
    check_shape("discrepancy weight S", (weights.s.nrows(), n), weights.s.shape())?;
    check_shape("discrepancy weight T", (weights.s.nrows(), m + mu), weights.t.shape())?;

    let ccr = CcrStructure::new(block_diag(plant.theta(), &filter.lambda))?;
    let ito = plant.ito().stacked(&ItoTable::new(mu)?);
    let (br, bn) = cascade_blocks(
        plant.r(),
        plant.coupling(),
        plant.coupling(),
        plant.ito().j(),
        &filter.r_f,
        &filter.n_phi,
        &filter.n_psi,
    );
    let params = EnergyParams::new(ccr, br, bn, ito)?;
    let realization = build_realization(&params);

    // S acts on the plant block only: S·E with E = [I_n 0]
    let mut s_ext = RealMatrix::zeros(weights.s.nrows(), n + nu);
    s_ext.view_mut((0, 0), weights.s.shape()).copy_from(&weights.s);
    let cost = QuadCost::from_discrepancy(&s_ext, &weights.t)?;

    Ok(CascadeSystem {
        plant: plant.clone(),
        filter: filter.clone(),
        weights: weights.clone(),
        params,
        realization,
        cost,
    })
}

/// `𝒵 = ½⟨P_comb, Σ_comb⟩`.
pub fn cqf_cost(cascade: &CascadeSystem) -> Result<f64> {
    cost_value(&cascade.params, &cascade.cost)
}

/// `𝒵′` along a filter direction, by the parametric and transverse routes
/// (agreement enforced) and optionally finite differences.
pub fn cqf_gradient(cascade: &CascadeSystem, dir: &FilterDirection, fd_step: Option<f64>) -> Result<GateauxReport> {
    let embedded = cascade.embed(dir)?;
    gateaux_all_routes(&cascade.params, &cascade.cost, &embedded, fd_step)
}

/// Components of the gradient over [`filter_basis`].
pub fn cqf_gradient_vector(cascade: &CascadeSystem) -> Result<Vec<f64>> {
    filter_basis(cascade.filter.nu(), cascade.plant.m())
        .par_iter()
        .map(|d| cqf_gradient(cascade, d, None).map(|r| r.value))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerConfig {
    pub max_iters: usize,
    /// Stop once the gradient norm falls to this value.
    pub tolerance: f64,
    pub initial_step: f64,
    pub backtrack: f64,
    /// Sufficient-decrease constant of the Armijo condition.
    pub armijo: f64,
    pub max_backtracks: usize,
    /// Compare the directional derivative along the gradient with finite
    /// differences at every iteration.
    pub fd_check: bool,
    pub fd_step: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            max_iters: 2000,
            tolerance: 1e-6,
            initial_step: 1.0,
            backtrack: 0.5,
            armijo: 1e-4,
            max_backtracks: 60,
            fd_check: false,
            fd_step: DEFAULT_FD_STEP,
        }
    }
}

/// Analytic directional derivative along the normalized steepest-descent
/// direction and its finite-difference counterpart.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpotCheck {
    pub iteration: usize,
    pub analytic: f64,
    pub finite_difference: f64,
}

impl SpotCheck {
    pub fn relative_error(&self) -> f64 {
        (self.analytic - self.finite_difference).abs() / self.analytic.abs().max(f64::MIN_POSITIVE)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationResult {
    pub filter: FilterParams,
    /// Cost before the first step and after every accepted step.
    pub cost_trace: Vec<f64>,
    pub gradient_norm: f64,
    pub gradient: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub spot_checks: Vec<SpotCheck>,
}

/// Gradient descent over `(R_f, N_Φ)` with Armijo backtracking; unstable
/// cascades are rejected as infinite cost.
pub fn optimize_filter(
    plant: &EnergyParams,
    weights: &CqfWeights,
    init: &FilterParams,
    config: &OptimizerConfig,
) -> Result<OptimizationResult> {
    let mut cascade = build_cascade(plant, init, weights)?;
    let hurwitz = cascade.realization.hurwitz();
    if !hurwitz.stable {
        return Err(Error::InitUnstable { margin: hurwitz.margin });
    }
    let basis = filter_basis(init.nu(), plant.m());
    let mut cost = cqf_cost(&cascade)?;
    let mut trace = vec![cost];
    let mut spot_checks = Vec::new();
    let mut iterations = 0;

    loop {
        let gradient = cqf_gradient_vector(&cascade)?;
        let grad_norm = gradient.iter().map(|g| g * g).sum::<f64>().sqrt();
        if grad_norm <= config.tolerance || iterations >= config.max_iters {
            return Ok(OptimizationResult {
                filter: cascade.filter,
                cost_trace: trace,
                gradient_norm: grad_norm,
                gradient,
                iterations,
                converged: grad_norm <= config.tolerance,
                spot_checks,
            });
        }
        let descent = FilterDirection::linear_combination(&gradient, &basis).scaled(-1.0);

        if config.fd_check {
            let unit = descent.scaled(1.0 / grad_norm);
            let fd = gateaux_finite_difference(&cascade.params, &cascade.cost, &cascade.embed(&unit)?, config.fd_step)?;
            spot_checks.push(SpotCheck {
                iteration: iterations,
                analytic: -grad_norm,
                finite_difference: fd,
            });
        }

        let mut step = config.initial_step;
        let mut accepted = None;
        for _ in 0..config.max_backtracks {
            if let Some(candidate) = trial(plant, weights, &cascade.filter, &descent, step)? {
                let c = cqf_cost(&candidate)?;
                if c <= cost - config.armijo * step * grad_norm * grad_norm {
                    accepted = Some((candidate, c));
                    break;
                }
            }
            step *= config.backtrack;
        }
        let Some((next, c)) = accepted else {
            return Err(Error::NoDescentDirection { grad_norm });
        };
        cascade = next;
        cost = c;
        trace.push(cost);
        iterations += 1;
    }
}

fn trial(
    plant: &EnergyParams,
    weights: &CqfWeights,
    filter: &FilterParams,
    descent: &FilterDirection,
    step: f64,
) -> Result<Option<CascadeSystem>> {
    let moved = filter.moved(descent, step)?;
    let cascade = build_cascade(plant, &moved, weights)?;
    Ok(cascade.realization.hurwitz().stable.then_some(cascade))
}

/// `⟨P_comb, ·⟩` restricted to the plant block, the cost when `T = 0`.
pub fn plant_only_cost(cascade: &CascadeSystem, plant_sigma: &RealMatrix) -> f64 {
    let s = &cascade.weights.s;
    0.5 * frobenius(&(s.transpose() * s), plant_sigma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::symplectic_unit;
    use crate::oqho::steady_state_covariance;
    use crate::variational::{stationarity_test, PerturbationDirection, DEFAULT_STATIONARITY_TOL};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn flagship() -> EnergyParams {
        EnergyParams::new(
            CcrStructure::new(symplectic_unit()).unwrap(),
            RealMatrix::identity(2, 2),
            RealMatrix::identity(2, 2),
            ItoTable::new(2).unwrap(),
        )
        .unwrap()
    }

    fn tracking_weights() -> CqfWeights {
        let mut t = RealMatrix::zeros(2, 4);
        t.view_mut((0, 2), (2, 2)).fill_with_identity();
        CqfWeights::new(RealMatrix::identity(2, 2), t).unwrap()
    }

    fn random_filter(rng: &mut ChaCha8Rng, scale: f64) -> FilterParams {
        let g = RealMatrix::from_fn(2, 2, |_, _| rng.gen_range(-scale..scale));
        FilterParams::canonical(
            sym(&g),
            RealMatrix::from_fn(2, 2, |_, _| rng.gen_range(-scale..scale)),
            RealMatrix::identity(2, 2) + RealMatrix::from_fn(2, 2, |_, _| rng.gen_range(-scale..scale)),
        )
        .unwrap()
    }

    #[test]
    fn uncoupled_filter_is_block_diagonal() {
        let filter = FilterParams::canonical(RealMatrix::zeros(2, 2), RealMatrix::zeros(2, 2), RealMatrix::zeros(2, 2)).unwrap();
        let c = build_cascade(&flagship(), &filter, &tracking_weights()).unwrap();
        let a = c.realization().a();
        let plant_a = build_realization(&flagship()).a().clone();
        assert_eq!(a.view((0, 0), (2, 2)).into_owned(), plant_a);
        assert_eq!(a.view((0, 2), (2, 2)).amax(), 0.0);
        assert_eq!(a.view((2, 0), (2, 2)).amax(), 0.0);
        assert_eq!(a.view((2, 2), (2, 2)).amax(), 0.0);
        assert!(matches!(cqf_cost(&c), Err(Error::NotHurwitz { .. })));
    }

    #[test]
    fn plant_rows_ignore_filter() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let plant_a = build_realization(&flagship()).a().clone();
        for _ in 0..10 {
            let c = build_cascade(&flagship(), &random_filter(&mut rng, 1.0), &tracking_weights()).unwrap();
            let a = c.realization().a();
            assert!((a.view((0, 0), (2, 2)) - &plant_a).amax() < 1e-14);
            assert!(a.view((0, 2), (2, 2)).amax() < 1e-14);
        }
    }

    #[test]
    fn cascade_is_physically_realizable() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let c = build_cascade(&flagship(), &random_filter(&mut rng, 1.0), &tracking_weights()).unwrap();
            assert!(c.realization().residuals().passes(1e-10));
        }
    }

    #[test]
    fn zero_weights_give_zero_cost() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let filter = random_filter(&mut rng, 0.3);
        let w = CqfWeights::new(RealMatrix::zeros(2, 2), RealMatrix::zeros(2, 4)).unwrap();
        let c = build_cascade(&flagship(), &filter, &w).unwrap();
        assert_eq!(cqf_cost(&c).unwrap(), 0.0);
    }

    #[test]
    fn plant_only_criterion_ignores_filter() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let w = CqfWeights::new(RealMatrix::from_row_slice(1, 2, &[1.0, 2.0]), RealMatrix::zeros(1, 4)).unwrap();
        let plant_sigma = steady_state_covariance(&build_realization(&flagship())).unwrap().sigma().clone();
        for _ in 0..5 {
            let c = build_cascade(&flagship(), &random_filter(&mut rng, 0.3), &w).unwrap();
            let z = cqf_cost(&c).unwrap();
            assert!((z - plant_only_cost(&c, &plant_sigma)).abs() < 1e-12);
            for d in filter_basis(2, 2) {
                assert!(cqf_gradient(&c, &d, None).unwrap().value.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let c = build_cascade(&flagship(), &random_filter(&mut rng, 0.3), &tracking_weights()).unwrap();
        let mut np = RealMatrix::zeros(2, 2);
        np[(0, 0)] = 1.0;
        let dir = FilterDirection::new(RealMatrix::zeros(2, 2), np).unwrap();
        let r = cqf_gradient(&c, &dir, Some(DEFAULT_FD_STEP)).unwrap();
        let fd = r.finite_difference.unwrap();
        assert!((fd - r.value).abs() <= 1e-5 * r.value.abs().max(1e-12));
        assert_eq!(cqf_gradient(&c, &FilterDirection::zero(2, 2), None).unwrap().value, 0.0);
    }

    #[test]
    fn embedded_direction_matches_filter_perturbation() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let filter = random_filter(&mut rng, 0.5);
        let c = build_cascade(&flagship(), &filter, &tracking_weights()).unwrap();
        let dir = FilterDirection::new(sym(&RealMatrix::from_fn(2, 2, |_, _| rng.gen_range(-1.0..1.0))), RealMatrix::from_fn(2, 2, |_, _| rng.gen_range(-1.0..1.0))).unwrap();
        let moved = build_cascade(&flagship(), &filter.moved(&dir, 0.3).unwrap(), &tracking_weights()).unwrap();
        let e = c.embed(&dir).unwrap();
        let shifted = c.params().shifted(e.r_prime(), e.n_prime(), 0.3).unwrap();
        assert!((shifted.r() - moved.params().r()).amax() < 1e-14);
        assert!((shifted.coupling() - moved.params().coupling()).amax() < 1e-14);
    }

    #[test]
    fn zero_tracking_weight_converges_immediately() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let w = CqfWeights::new(RealMatrix::identity(2, 2), RealMatrix::zeros(2, 4)).unwrap();
        let r = optimize_filter(&flagship(), &w, &random_filter(&mut rng, 0.3), &OptimizerConfig::default()).unwrap();
        assert_eq!(r.iterations, 0);
        assert!(r.converged);
    }

    #[test]
    fn unstable_start_is_rejected() {
        let filter = FilterParams::canonical(RealMatrix::zeros(2, 2), RealMatrix::zeros(2, 2), RealMatrix::zeros(2, 2)).unwrap();
        let r = optimize_filter(&flagship(), &tracking_weights(), &filter, &OptimizerConfig::default());
        assert!(matches!(r, Err(Error::InitUnstable { .. })));
    }

    #[test]
    fn optimizer_reaches_stationary_filter() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let init = random_filter(&mut rng, 0.3);
        let config = OptimizerConfig {
            fd_check: true,
            tolerance: 1e-8,
            ..OptimizerConfig::default()
        };
        let r = optimize_filter(&flagship(), &tracking_weights(), &init, &config).unwrap();
        assert!(r.converged, "{} after {} iterations", r.gradient_norm, r.iterations);
        assert!(r.cost_trace.windows(2).all(|w| w[1] <= w[0]));
        assert!(r.cost_trace.last() < r.cost_trace.first());
        for check in r.spot_checks.iter().filter(|c| c.analytic.abs() > 1e-6) {
            assert!(check.relative_error() <= 1e-4, "{check:?}");
        }

        let c = build_cascade(&flagship(), &r.filter, &tracking_weights()).unwrap();
        let basis: Vec<_> = filter_basis(2, 2)
            .iter()
            .map(|d| PerturbationDirection::Structured(c.embed(d).unwrap()))
            .collect();
        let st = stationarity_test(c.params(), c.cost(), &basis, DEFAULT_STATIONARITY_TOL).unwrap();
        assert!(st.stationary, "{st:?}");
    }
}
