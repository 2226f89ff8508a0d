mod common;

use oqho::cqf::{build_cascade, cqf_gradient, CqfWeights, FilterDirection, FilterParams};
use oqho::linalg::{sym, RealMatrix};
use oqho::moments::StructuredDirection;
use oqho::oqho::build_realization;
use oqho::variational::{
    agrees, gateaux_parametric, gateaux_transverse, PerturbationDirection, TransverseConfig, ROUTE_TOL,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn realizations_are_physically_realizable(seed in any::<u64>(), n in prop::sample::select(vec![2usize, 4, 6]), m in prop::sample::select(vec![2usize, 4])) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_params(&mut rng, n, m);
        let r = build_realization(&p).residuals();
        prop_assert!(r.lyapunov <= 1e-10 && r.output <= 1e-10);
    }

    #[test]
    fn gradient_is_linear_in_direction(seed in any::<u64>(), alpha in -2.0f64..2.0, beta in -2.0f64..2.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_stable(&mut rng, 4, 2, false, 0.05);
        let cost = random_cost(&mut rng, 4, 2);
        let d1 = random_direction(&mut rng, 4, 2);
        let d2 = random_direction(&mut rng, 4, 2);
        let g = |d: &StructuredDirection| gateaux_parametric(&p, &cost, d).unwrap();
        let lhs = g(&d1.combine(alpha, &d2, beta));
        let rhs = alpha * g(&d1) + beta * g(&d2);
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + rhs.abs()));
    }

    #[test]
    fn transverse_matches_parametric(seed in any::<u64>(), n in prop::sample::select(vec![2usize, 4]), m in prop::sample::select(vec![2usize, 4])) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_stable(&mut rng, n, m, seed % 2 == 0, 0.05);
        let cost = random_cost(&mut rng, n, m);
        let dir = random_direction(&mut rng, n, m);
        let par = gateaux_parametric(&p, &cost, &dir).unwrap();
        let tr = gateaux_transverse(&p, &cost, &PerturbationDirection::Structured(dir), &TransverseConfig::default()).unwrap();
        prop_assert!(agrees(tr.value, par, ROUTE_TOL), "{} vs {}", tr.value, par);
        prop_assert!(tr.imag_residual <= 1e-9);
    }

    #[test]
    fn random_cascades_are_realizable(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let plant = random_params(&mut rng, 2, 2);
        let filter = FilterParams::canonical(sym(&uniform(&mut rng, 2, 2)), uniform(&mut rng, 2, 2), uniform(&mut rng, 2, 2)).unwrap();
        let weights = CqfWeights::new(uniform(&mut rng, 2, 2), uniform(&mut rng, 2, 4)).unwrap();
        let c = build_cascade(&plant, &filter, &weights).unwrap();
        prop_assert!(c.realization().residuals().passes(1e-10));
        let plant_a = build_realization(&plant).a().clone();
        prop_assert!((c.realization().a().view((0, 0), (2, 2)) - plant_a).amax() <= 1e-14);
    }
}

#[test]
fn cascade_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let plant = flagship();
    let mut t = RealMatrix::zeros(2, 4);
    t.view_mut((0, 2), (2, 2)).fill_with_identity();
    let weights = CqfWeights::new(RealMatrix::identity(2, 2), t).unwrap();
    let filter = FilterParams::canonical(
        sym(&(uniform(&mut rng, 2, 2) * 0.3)),
        uniform(&mut rng, 2, 2) * 0.3,
        RealMatrix::identity(2, 2),
    )
    .unwrap();
    let c = build_cascade(&plant, &filter, &weights).unwrap();
    for _ in 0..5 {
        let dir = FilterDirection::new(sym(&uniform(&mut rng, 2, 2)), uniform(&mut rng, 2, 2)).unwrap();
        let r = cqf_gradient(&c, &dir, Some(1e-5)).unwrap();
        assert!(relative_error(r.finite_difference.unwrap(), r.value) <= 1e-5);
    }
}
