//! JSON model files.

use num_complex::Complex64;
use serde::Deserialize;

use crate::ccr::{CanonicalPolynomial, CcrStructure, GaussianState};
use crate::cqf::{build_cascade, CascadeSystem, CqfWeights, FilterDirection, FilterParams};
use crate::error::{Error, Result};
use crate::linalg::{RealMatrix, RealVector};
use crate::moments::StructuredDirection;
use crate::oqho::{EnergyParams, ItoTable, QuadCost};
use crate::variational::PolynomialDirection;

pub const SCHEMA_VERSION: u32 = 1;

pub type Rows = Vec<Vec<f64>>;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub version: u32,
    pub plant: PlantSection,
    pub cost: Option<CostSection>,
    pub filter: Option<FilterSection>,
    #[serde(default)]
    pub directions: Vec<DirectionSection>,
    pub sim: Option<SimSection>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantSection {
    pub theta: Rows,
    #[serde(rename = "R")]
    pub r: Rows,
    #[serde(rename = "N")]
    pub n: Rows,
    pub m: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum CostSection {
    Weight {
        #[serde(rename = "Pi")]
        pi: Rows,
    },
    Discrepancy {
        #[serde(rename = "S")]
        s: Rows,
        #[serde(rename = "T")]
        t: Rows,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterSection {
    pub lambda: Option<Rows>,
    #[serde(rename = "R_f")]
    pub r_f: Rows,
    #[serde(rename = "N_Phi")]
    pub n_phi: Rows,
    #[serde(rename = "N_Psi")]
    pub n_psi: Rows,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "type", content = "payload", rename_all = "lowercase")]
pub enum DirectionSection {
    Structured {
        #[serde(rename = "R_prime")]
        r_prime: Rows,
        #[serde(rename = "N_prime")]
        n_prime: Rows,
    },
    Polynomial {
        #[serde(rename = "K", default)]
        k: Vec<Term>,
        #[serde(rename = "M")]
        m: Vec<Vec<Term>>,
    },
    Filter {
        #[serde(rename = "R_f_prime")]
        r_f_prime: Rows,
        #[serde(rename = "N_Phi_prime")]
        n_phi_prime: Rows,
    },
}

impl DirectionSection {
    pub fn kind(&self) -> &'static str {
        match self {
            Self::Structured { .. } => "structured",
            Self::Polynomial { .. } => "polynomial",
            Self::Filter { .. } => "filter",
        }
    }
}

/// Coefficient times a word of 1-based variable indices.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Term {
    pub coef: Coefficient,
    pub word: Vec<usize>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(untagged)]
pub enum Coefficient {
    Real(f64),
    Complex([f64; 2]),
}

impl Coefficient {
    fn value(self) -> Complex64 {
        match self {
            Self::Real(x) => Complex64::new(x, 0.0),
            Self::Complex([re, im]) => Complex64::new(re, im),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    #[serde(rename = "T")]
    pub horizon: f64,
    pub h: Option<f64>,
    pub initial_mean: Option<Vec<f64>>,
    pub initial_sigma: Option<Rows>,
}

pub fn parse_model(text: &str) -> Result<ModelFile> {
    let model: ModelFile =
        serde_json::from_str(text).map_err(|e| Error::InvalidInput(format!("model file: {e}")))?;
    if model.version != SCHEMA_VERSION {
        return Err(Error::InvalidInput(format!(
            "unsupported model version {} (expected {SCHEMA_VERSION})",
            model.version
        )));
    }
    Ok(model)
}

pub fn matrix(name: &str, rows: &Rows) -> Result<RealMatrix> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::InvalidInput(format!("{name}: rows have unequal lengths")));
    }
    if rows.iter().flatten().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput(format!("{name}: entries must be finite")));
    }
    Ok(RealMatrix::from_row_iterator(nrows, ncols, rows.iter().flatten().copied()))
}

/// Row-major nested arrays, the inverse of [`matrix`].
pub fn rows(m: &RealMatrix) -> Rows {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// The system the cost and the plant-level directions refer to: the plant
/// alone, or the plant-filter cascade when a filter section is present.
pub struct System {
    pub plant: EnergyParams,
    pub filter: Option<FilterParams>,
    pub cascade: Option<CascadeSystem>,
    pub cost: Option<QuadCost>,
}

impl System {
    pub fn params(&self) -> &EnergyParams {
        self.cascade.as_ref().map_or(&self.plant, |c| c.params())
    }

    pub fn require_cost(&self) -> Result<&QuadCost> {
        self.cost
            .as_ref()
            .ok_or_else(|| Error::InvalidInput("model file has no cost section".into()))
    }
}

pub fn plant_params(section: &PlantSection) -> Result<EnergyParams> {
    let ccr = CcrStructure::new(matrix("plant.theta", &section.theta)?)?;
    let coupling = matrix("plant.N", &section.n)?;
    if coupling.nrows() != section.m {
        return Err(Error::InvalidInput(format!(
            "plant.N has {} rows but plant.m = {}",
            coupling.nrows(),
            section.m
        )));
    }
    EnergyParams::new(ccr, matrix("plant.R", &section.r)?, coupling, ItoTable::new(section.m)?)
}

fn filter_params(section: &FilterSection) -> Result<FilterParams> {
    let r_f = matrix("filter.R_f", &section.r_f)?;
    let n_phi = matrix("filter.N_Phi", &section.n_phi)?;
    let n_psi = matrix("filter.N_Psi", &section.n_psi)?;
    match &section.lambda {
        Some(l) => FilterParams::new(matrix("filter.lambda", l)?, r_f, n_phi, n_psi),
        None => FilterParams::canonical(r_f, n_phi, n_psi),
    }
}

/// Assembles the system. A discrepancy cost `(S, T)` requires a filter and
/// is built with the filter weights; when the filter is present but the
/// weights are not, the cascade is built with `S = 0`, `T = 0` and `Π`
/// (if given) weighs the combined system.
pub fn build_system(model: &ModelFile) -> Result<System> {
    let plant = plant_params(&model.plant)?;
    let filter = model.filter.as_ref().map(filter_params).transpose()?;
    match (&filter, &model.cost) {
        (None, Some(CostSection::Discrepancy { .. })) => Err(Error::InvalidInput(
            "cost weights S, T require a filter section".into(),
        )),
        (None, cost) => {
            let cost = cost
                .as_ref()
                .map(|c| match c {
                    CostSection::Weight { pi } => QuadCost::new(matrix("cost.Pi", pi)?, plant.n()),
                    CostSection::Discrepancy { .. } => unreachable!(),
                })
                .transpose()?;
            if let Some(c) = &cost {
                check_cost_shape(c, plant.n(), plant.m())?;
            }
            Ok(System {
                plant,
                filter: None,
                cascade: None,
                cost,
            })
        }
        (Some(f), cost) => {
            let weights = match cost {
                Some(CostSection::Discrepancy { s, t }) => {
                    CqfWeights::new(matrix("cost.S", s)?, matrix("cost.T", t)?)?
                }
                _ => CqfWeights::new(
                    RealMatrix::zeros(0, plant.n()),
                    RealMatrix::zeros(0, plant.m() + f.mu()),
                )?,
            };
            let cascade = build_cascade(&plant, f, &weights)?;
            let cost = match cost {
                Some(CostSection::Weight { pi }) => {
                    let p = cascade.params();
                    let c = QuadCost::new(matrix("cost.Pi", pi)?, p.n())?;
                    check_cost_shape(&c, p.n(), p.m())?;
                    Some(c)
                }
                Some(CostSection::Discrepancy { .. }) => Some(cascade.cost().clone()),
                None => None,
            };
            Ok(System {
                plant,
                filter: Some(f.clone()),
                cascade: Some(cascade),
                cost,
            })
        }
    }
}

fn check_cost_shape(cost: &QuadCost, n: usize, m: usize) -> Result<()> {
    if cost.m() != m {
        return Err(Error::ShapeMismatch {
            context: "cost weight Π",
            expected: format!("{}x{}", n + m, n + m),
            got: format!("{0}x{0}", cost.pi().nrows()),
        });
    }
    Ok(())
}

/// A direction resolved against the system.
pub enum Direction {
    Structured(StructuredDirection),
    Polynomial(PolynomialDirection),
    Filter(FilterDirection),
}

fn polynomial(ccr: &CcrStructure, name: &str, terms: &[Term]) -> Result<CanonicalPolynomial> {
    let n = ccr.n();
    let mut out = ccr.zero();
    for t in terms {
        let word = t
            .word
            .iter()
            .map(|&i| {
                if i == 0 || i > n {
                    Err(Error::InvalidInput(format!(
                        "{name}: variable index {i} outside 1..={n}"
                    )))
                } else {
                    Ok(i - 1)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let c = t.coef.value();
        if !(c.re.is_finite() && c.im.is_finite()) {
            return Err(Error::InvalidInput(format!("{name}: coefficients must be finite")));
        }
        out += ccr.canonicalize(c, &word)?;
    }
    Ok(out)
}

pub fn resolve_direction(system: &System, section: &DirectionSection) -> Result<Direction> {
    match section {
        DirectionSection::Structured { r_prime, n_prime } => {
            let dir = StructuredDirection::new(matrix("R_prime", r_prime)?, matrix("N_prime", n_prime)?)?;
            let p = system.params();
            dir.check_against(p.n(), p.m())?;
            Ok(Direction::Structured(dir))
        }
        DirectionSection::Polynomial { k, m } => {
            let p = system.params();
            let longest = k.iter().chain(m.iter().flatten()).map(|t| t.word.len()).max().unwrap_or(0);
            let ccr = p.ccr().clone().with_degree_cap(longest.max(p.ccr().degree_cap()));
            if m.len() != p.m() {
                return Err(Error::ShapeMismatch {
                    context: "polynomial direction M",
                    expected: format!("{} entries", p.m()),
                    got: format!("{}", m.len()),
                });
            }
            let kp = polynomial(&ccr, "K", k)?;
            let mp = m
                .iter()
                .map(|terms| polynomial(&ccr, "M", terms))
                .collect::<Result<Vec<_>>>()?;
            Ok(Direction::Polynomial(PolynomialDirection::new(&ccr, kp, mp)?))
        }
        DirectionSection::Filter { r_f_prime, n_phi_prime } => {
            if system.cascade.is_none() {
                return Err(Error::InvalidInput("filter directions require a filter section".into()));
            }
            Ok(Direction::Filter(FilterDirection::new(
                matrix("R_f_prime", r_f_prime)?,
                matrix("N_Phi_prime", n_phi_prime)?,
            )?))
        }
    }
}

/// Initial state of a simulation: zero mean and unit covariance unless given.
pub fn initial_state(params: &EnergyParams, sim: &SimSection) -> Result<GaussianState> {
    let n = params.n();
    let mean = match &sim.initial_mean {
        Some(v) => {
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidInput("sim.initial_mean: entries must be finite".into()));
            }
            RealVector::from_column_slice(v)
        }
        None => RealVector::zeros(n),
    };
    let sigma = match &sim.initial_sigma {
        Some(s) => matrix("sim.initial_sigma", s)?,
        None => RealMatrix::identity(n, n),
    };
    GaussianState::new(mean, sigma, params.ccr())
}
