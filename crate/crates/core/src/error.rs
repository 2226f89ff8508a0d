use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Failure modes shared by the whole library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("Kronecker sum A ⊕ A is singular (min |λi + λj| = {min_pair_sum:e})")]
    SingularKroneckerSum { min_pair_sum: f64 },

    #[error("non-finite values encountered in {0}")]
    NonFinite(&'static str),

    #[error("shape mismatch in {context}: expected {expected}, got {got}")]
    ShapeMismatch {
        context: &'static str,
        expected: String,
        got: String,
    },

    #[error("{0}")]
    InvalidInput(String),

    #[error("polynomial degree {degree} exceeds the cap {cap}")]
    DegreeCapExceeded { degree: usize, cap: usize },

    #[error("variable index {index} out of range for {n} canonical variables")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("Gaussian state is not admissible: min eig(Σ + iΘ) = {min_eig:e}")]
    InadmissibleState { min_eig: f64 },

    #[error("CCR matrix is not in canonical block-diagonal pair form")]
    NonCanonicalTheta,

    #[error("CCR matrix is singular")]
    SingularTheta,

    #[error("realization is not physically realizable (residuals {lyapunov:e}, {output:e}; R asymmetry {asymmetry:e})")]
    NotRealizable {
        lyapunov: f64,
        output: f64,
        asymmetry: f64,
    },

    #[error("dynamics matrix is not Hurwitz (spectral margin {margin:e})")]
    NotHurwitz { margin: f64 },

    #[error("perturbed system at {sign}ε is not Hurwitz (spectral margin {margin:e})")]
    PerturbedNotHurwitz { sign: char, margin: f64 },

    #[error("perturbation direction is not self-adjoint ({0})")]
    NonSelfAdjointDirection(String),

    #[error("time step must be positive and not exceed the horizon (h = {step}, T = {horizon})")]
    NonPositiveStep { step: f64, horizon: f64 },

    #[error("initial plant-filter cascade is unstable (spectral margin {margin:e})")]
    InitUnstable { margin: f64 },

    #[error("line search stalled: no descent along the negative gradient (gradient norm {grad_norm:e})")]
    NoDescentDirection { grad_norm: f64 },

    #[error("gradient routes disagree: {first} = {a:e}, {second} = {b:e}")]
    RouteDisagreement {
        first: &'static str,
        a: f64,
        second: &'static str,
        b: f64,
    },
}

pub(crate) fn check_shape(
    context: &'static str,
    expected: (usize, usize),
    got: (usize, usize),
) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::ShapeMismatch {
            context,
            expected: format!("{}x{}", expected.0, expected.1),
            got: format!("{}x{}", got.0, got.1),
        })
    }
}
