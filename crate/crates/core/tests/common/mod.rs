#![allow(dead_code)]

use oqho::ccr::CcrStructure;
use oqho::linalg::{antisym, paired_j, sym, symplectic_unit, RealMatrix};
use oqho::moments::StructuredDirection;
use oqho::oqho::{build_realization, EnergyParams, ItoTable, QuadCost};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn uniform(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> RealMatrix {
    RealMatrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0))
}

pub fn flagship() -> EnergyParams {
    EnergyParams::new(
        CcrStructure::new(symplectic_unit()).unwrap(),
        RealMatrix::identity(2, 2),
        RealMatrix::identity(2, 2),
        ItoTable::new(2).unwrap(),
    )
    .unwrap()
}

/// Nondegenerate CCR matrix near the canonical pairing.
pub fn random_theta(rng: &mut ChaCha8Rng, n: usize) -> RealMatrix {
    paired_j(n) + antisym(&uniform(rng, n, n)) * 0.5
}

pub fn random_params(rng: &mut ChaCha8Rng, n: usize, m: usize) -> EnergyParams {
    EnergyParams::new(
        CcrStructure::new(random_theta(rng, n)).unwrap(),
        sym(&uniform(rng, n, n)),
        uniform(rng, m, n),
        ItoTable::new(m).unwrap(),
    )
    .unwrap()
}

/// Random parameters whose dynamics matrix has spectral abscissa below `-margin`.
pub fn random_stable(rng: &mut ChaCha8Rng, n: usize, m: usize, canonical: bool, margin: f64) -> EnergyParams {
    loop {
        let theta = if canonical { paired_j(n) } else { random_theta(rng, n) };
        let g = uniform(rng, n, n);
        let p = EnergyParams::new(
            CcrStructure::new(theta).unwrap(),
            &g * g.transpose() * 0.5 + RealMatrix::identity(n, n) * 0.2,
            uniform(rng, m, n),
            ItoTable::new(m).unwrap(),
        )
        .unwrap();
        if build_realization(&p).hurwitz().margin < -margin {
            return p;
        }
    }
}

pub fn random_cost(rng: &mut ChaCha8Rng, n: usize, m: usize) -> QuadCost {
    let w = uniform(rng, n + m, n + m);
    QuadCost::new(&w * w.transpose() / (n + m) as f64, n).unwrap()
}

pub fn random_direction(rng: &mut ChaCha8Rng, n: usize, m: usize) -> StructuredDirection {
    StructuredDirection::new(sym(&uniform(rng, n, n)), uniform(rng, m, n)).unwrap()
}

pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}
