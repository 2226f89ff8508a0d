//! Command-line front end: model files in, JSON reports out.
//!
//! Every report has the shape `{"result": {...}, "timing": {...}}`. The
//! result body depends only on the input file and the flags; wall-clock
//! time lives in `timing` alone.

pub mod model;

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::cqf::{optimize_filter, CqfWeights, FilterParams, OptimizerConfig};
use crate::error::{Error, Result};
use crate::linalg::{sym, RealMatrix};
use crate::moments::{default_step, simulate_moments, StructuredDirection};
use crate::oqho::{admissibility_margin, build_realization, steady_state_covariance, EnergyParams, OqhoRealization, QuadCost};
use crate::variational::{
    cost_value, gateaux_all_routes, gateaux_finite_difference, gateaux_parametric, gateaux_transverse,
    GateauxReport, PerturbationDirection, TransverseConfig, DEFAULT_FD_STEP, FD_TOL, ROUTE_TOL,
};
use model::{build_system, initial_state, parse_model, resolve_direction, rows, CostSection, Direction, ModelFile, System};

/// Residual bound for the physical realizability identities.
pub const CHECK_PR_TOL: f64 = 1e-10;
/// Lower bound on `min eig(Σ + iΘ)` for the invariant state.
pub const CHECK_ADMISSIBILITY_TOL: f64 = 1e-10;
/// Half-width of the uniform jitter applied to the initial filter with `--seed`.
pub const SEED_JITTER: f64 = 0.05;

#[derive(Debug, Clone, Parser)]
#[command(name = "oqho", version, about = "Open quantum harmonic oscillators: realizability, costs and variational gradients")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Physical realizability, stability and admissibility of the invariant state.
    Check {
        #[arg(long)]
        model: PathBuf,
    },
    /// Steady-state quadratic cost.
    Cost {
        #[arg(long)]
        model: PathBuf,
    },
    /// Gateaux derivatives of the cost along the directions in the model file.
    Grad {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, value_enum, default_value_t = Route::All)]
        route: Route,
        /// Finite-difference step.
        #[arg(long, default_value_t = DEFAULT_FD_STEP)]
        step: f64,
    },
    /// Moment trajectories from the sim section, optionally written as CSV.
    Simulate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Gradient descent over the filter Hamiltonian and output coupling.
    Optimize {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 2000)]
        max_iters: usize,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        /// Jitter the initial filter with this seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Compare each step's directional derivative with finite differences.
        #[arg(long)]
        fd_check: bool,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Check { .. } => "check",
            Self::Cost { .. } => "cost",
            Self::Grad { .. } => "grad",
            Self::Simulate { .. } => "simulate",
            Self::Optimize { .. } => "optimize",
        }
    }

    pub fn model_path(&self) -> &Path {
        match self {
            Self::Check { model }
            | Self::Cost { model }
            | Self::Grad { model, .. }
            | Self::Simulate { model, .. }
            | Self::Optimize { model, .. } => model,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Route {
    Parametric,
    Transverse,
    Fd,
    All,
}

/// Finished command: the JSON document to print and the process exit code.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub report: Value,
    pub exit_code: i32,
}

/// Exit code for a library error: 2 for malformed input, 1 for a
/// computation that was refused.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::InvalidInput(_)
        | Error::ShapeMismatch { .. }
        | Error::DegreeCapExceeded { .. }
        | Error::IndexOutOfRange { .. }
        | Error::InadmissibleState { .. }
        | Error::NonCanonicalTheta
        | Error::SingularTheta
        | Error::NonSelfAdjointDirection(_)
        | Error::NonPositiveStep { .. } => 2,
        _ => 1,
    }
}

fn error_kind(err: &Error) -> &'static str {
    match err {
        Error::SingularKroneckerSum { .. } => "singular_kronecker_sum",
        Error::NonFinite(_) => "non_finite",
        Error::ShapeMismatch { .. } => "shape_mismatch",
        Error::InvalidInput(_) => "invalid_input",
        Error::DegreeCapExceeded { .. } => "degree_cap_exceeded",
        Error::IndexOutOfRange { .. } => "index_out_of_range",
        Error::InadmissibleState { .. } => "inadmissible_state",
        Error::NonCanonicalTheta => "non_canonical_theta",
        Error::SingularTheta => "singular_theta",
        Error::NotRealizable { .. } => "not_realizable",
        Error::NotHurwitz { .. } => "not_hurwitz",
        Error::PerturbedNotHurwitz { .. } => "perturbed_not_hurwitz",
        Error::NonSelfAdjointDirection(_) => "non_self_adjoint_direction",
        Error::NonPositiveStep { .. } => "non_positive_step",
        Error::InitUnstable { .. } => "init_unstable",
        Error::NoDescentDirection { .. } => "no_descent_direction",
        Error::RouteDisagreement { .. } => "route_disagreement",
    }
}

/// Result of a command that ran to completion.
struct Body {
    tolerances: Value,
    results: Value,
    pass: bool,
}

pub fn run(cli: &Cli) -> Outcome {
    let start = Instant::now();
    let command = cli.command.name();
    let path = cli.command.model_path();
    let (hash, outcome) = match std::fs::read(path) {
        Ok(bytes) => {
            let hash = hex::encode(Sha256::digest(&bytes));
            let outcome = std::str::from_utf8(&bytes)
                .map_err(|e| Error::InvalidInput(format!("model file is not UTF-8: {e}")))
                .and_then(parse_model)
                .and_then(|model| dispatch(&cli.command, &model));
            (Some(hash), outcome)
        }
        Err(e) => (
            None,
            Err(Error::InvalidInput(format!("cannot read {}: {e}", path.display()))),
        ),
    };

    let (result, exit_code) = match outcome {
        Ok(body) => (
            json!({
                "command": command,
                "input_sha256": hash,
                "tolerances": body.tolerances,
                "results": body.results,
                "verdict": if body.pass { "pass" } else { "fail" },
            }),
            if body.pass { 0 } else { 1 },
        ),
        Err(err) => (
            json!({
                "command": command,
                "input_sha256": hash,
                "error": {"kind": error_kind(&err), "message": err.to_string()},
                "verdict": "error",
            }),
            exit_code(&err),
        ),
    };
    Outcome {
        report: json!({
            "result": result,
            "timing": {"elapsed_seconds": start.elapsed().as_secs_f64()},
        }),
        exit_code,
    }
}

fn dispatch(command: &Command, model: &ModelFile) -> Result<Body> {
    match command {
        Command::Check { .. } => cmd_check(model),
        Command::Cost { .. } => cmd_cost(model),
        Command::Grad { route, step, .. } => cmd_grad(model, *route, *step),
        Command::Simulate { out, .. } => cmd_simulate(model, out.as_deref()),
        Command::Optimize {
            max_iters,
            tol,
            seed,
            fd_check,
            ..
        } => cmd_optimize(model, *max_iters, *tol, *seed, *fd_check),
    }
}

fn check_realization(params: &EnergyParams, real: &OqhoRealization) -> (Value, bool) {
    let pr = real.residuals();
    let hurwitz = real.hurwitz();
    let steady = if hurwitz.stable {
        steady_state_covariance(real).ok()
    } else {
        None
    };
    let admissibility = steady.as_ref().map(|s| admissibility_margin(real, s));
    let pass = pr.passes(CHECK_PR_TOL)
        && hurwitz.stable
        && admissibility.is_some_and(|a| a >= -CHECK_ADMISSIBILITY_TOL);
    let report = json!({
        "theta": rows(params.theta()),
        "R": rows(params.r()),
        "N": rows(params.coupling()),
        "A": rows(real.a()),
        "B": rows(real.b()),
        "C": rows(real.c()),
        "pr_residuals": {"lyapunov": pr.lyapunov, "output": pr.output},
        "hurwitz": {"stable": hurwitz.stable, "margin": hurwitz.margin},
        "steady_state_sigma": steady.as_ref().map(|s| rows(s.sigma())),
        "admissibility_margin": admissibility,
        "pass": pass,
    });
    (report, pass)
}

fn check_system(system: &System) -> (Value, bool) {
    let (plant, plant_ok) = check_realization(&system.plant, &build_realization(&system.plant));
    let (cascade, cascade_ok) = match &system.cascade {
        Some(c) => check_realization(c.params(), c.realization()),
        None => (Value::Null, true),
    };
    (json!({"plant": plant, "cascade": cascade}), plant_ok && cascade_ok)
}

fn cmd_check(model: &ModelFile) -> Result<Body> {
    let system = build_system(model)?;
    let (results, pass) = check_system(&system);
    Ok(Body {
        tolerances: json!({"pr_residual": CHECK_PR_TOL, "admissibility": CHECK_ADMISSIBILITY_TOL}),
        results,
        pass,
    })
}

fn system_label(system: &System) -> &'static str {
    if system.cascade.is_some() {
        "cascade"
    } else {
        "plant"
    }
}

fn cmd_cost(model: &ModelFile) -> Result<Body> {
    let system = build_system(model)?;
    let cost = system.require_cost()?;
    let params = system.params();
    let z = cost_value(params, cost)?;
    let real = build_realization(params);
    let state = steady_state_covariance(&real)?;
    Ok(Body {
        tolerances: json!({}),
        results: json!({
            "system": system_label(&system),
            "cost": z,
            "P": rows(&cost.p_matrix(params.coupling())?),
            "steady_state_sigma": rows(state.sigma()),
            "admissibility_margin": admissibility_margin(&real, &state),
        }),
        pass: true,
    })
}

fn transverse_fields(r: &GateauxReport) -> Value {
    json!({
        "term1": r.term1,
        "term2": r.term2,
        "chi_mean": rows(&r.chi_mean),
        "upsilon": rows(&r.upsilon),
        "imag_residual": r.imag_residual,
        "lyapunov_residual": r.lyapunov_residual,
    })
}

fn structured_gradient(
    params: &EnergyParams,
    cost: &QuadCost,
    dir: &StructuredDirection,
    route: Route,
    step: f64,
) -> Result<Value> {
    let config = TransverseConfig::default();
    Ok(match route {
        Route::Parametric => json!({"parametric": gateaux_parametric(params, cost, dir)?}),
        Route::Fd => json!({"finite_difference": gateaux_finite_difference(params, cost, dir, step)?}),
        Route::Transverse => {
            let r = gateaux_transverse(params, cost, &PerturbationDirection::Structured(dir.clone()), &config)?;
            json!({"transverse": r.value, "details": transverse_fields(&r)})
        }
        Route::All => {
            let r = gateaux_all_routes(params, cost, dir, Some(step))?;
            json!({
                "parametric": r.parametric,
                "transverse": r.transverse,
                "finite_difference": r.finite_difference,
                "details": transverse_fields(&r),
            })
        }
    })
}

fn cmd_grad(model: &ModelFile, route: Route, step: f64) -> Result<Body> {
    let system = build_system(model)?;
    let cost = system.require_cost()?;
    if model.directions.is_empty() {
        return Err(Error::InvalidInput("model file has no directions".into()));
    }
    let params = system.params();
    let mut entries = Vec::with_capacity(model.directions.len());
    for (index, section) in model.directions.iter().enumerate() {
        let values = match resolve_direction(&system, section)? {
            Direction::Structured(d) => structured_gradient(params, cost, &d, route, step)?,
            Direction::Filter(d) => {
                let cascade = system.cascade.as_ref().expect("filter directions need a cascade");
                structured_gradient(params, cost, &cascade.embed(&d)?, route, step)?
            }
            Direction::Polynomial(d) => match route {
                Route::Parametric | Route::Fd => {
                    return Err(Error::InvalidInput(format!(
                        "direction {index}: only the transverse route applies to polynomial directions"
                    )))
                }
                Route::Transverse | Route::All => {
                    let r = gateaux_transverse(params, cost, &PerturbationDirection::Polynomial(d), &TransverseConfig::default())?;
                    json!({"transverse": r.value, "details": transverse_fields(&r)})
                }
            },
        };
        entries.push(json!({"index": index, "type": section.kind(), "values": values}));
    }
    Ok(Body {
        tolerances: json!({
            "route_agreement": ROUTE_TOL,
            "finite_difference_agreement": FD_TOL,
            "finite_difference_step": step,
            "transverse_imag": TransverseConfig::default().imag_tol,
        }),
        results: json!({
            "system": system_label(&system),
            "route": format!("{route:?}").to_lowercase(),
            "directions": entries,
        }),
        pass: true,
    })
}

/// CSV with columns `t`, mean entries, then the upper triangle of `Σ`
/// row by row.
pub fn trajectory_csv(times: &[f64], means: &[crate::linalg::RealVector], covs: &[RealMatrix]) -> String {
    let n = means.first().map_or(0, |m| m.len());
    let mut header = vec!["t".to_string()];
    header.extend((1..=n).map(|i| format!("mean_{i}")));
    for i in 1..=n {
        for j in i..=n {
            header.push(format!("sigma_{i}_{j}"));
        }
    }
    let mut out = header.join(",");
    out.push('\n');
    for ((t, m), s) in times.iter().zip(means).zip(covs) {
        let mut fields = vec![t.to_string()];
        fields.extend(m.iter().map(f64::to_string));
        for i in 0..n {
            for j in i..n {
                fields.push(s[(i, j)].to_string());
            }
        }
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

fn cmd_simulate(model: &ModelFile, out: Option<&Path>) -> Result<Body> {
    let sim = model
        .sim
        .as_ref()
        .ok_or_else(|| Error::InvalidInput("model file has no sim section".into()))?;
    let system = build_system(model)?;
    let params = system.params();
    let real = build_realization(params);
    let initial = initial_state(params, sim)?;
    let step = sim.h.unwrap_or_else(|| default_step(real.a()));
    let traj = simulate_moments(&real, &initial, sim.horizon, step)?;
    let csv = trajectory_csv(&traj.times, &traj.means, &traj.covariances);
    if let Some(path) = out {
        std::fs::write(path, &csv)
            .map_err(|e| Error::InvalidInput(format!("cannot write {}: {e}", path.display())))?;
    }
    let last = traj.len() - 1;
    Ok(Body {
        tolerances: json!({}),
        results: json!({
            "system": system_label(&system),
            "horizon": sim.horizon,
            "step": traj.times[1] - traj.times[0],
            "rows": traj.len(),
            "csv_sha256": hex::encode(Sha256::digest(csv.as_bytes())),
            "final_mean": traj.means[last].as_slice(),
            "final_sigma": rows(&traj.covariances[last]),
        }),
        pass: true,
    })
}

fn jittered(filter: &FilterParams, seed: u64) -> Result<FilterParams> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut noise = |r: usize, c: usize| RealMatrix::from_fn(r, c, |_, _| rng.gen_range(-SEED_JITTER..SEED_JITTER));
    let (nu, m) = (filter.nu(), filter.n_phi().nrows());
    let dr = sym(&noise(nu, nu));
    let dn = noise(m, nu);
    FilterParams::new(
        filter.lambda().clone(),
        filter.r_f() + dr,
        filter.n_phi() + dn,
        filter.n_psi().clone(),
    )
}

fn cmd_optimize(model: &ModelFile, max_iters: usize, tol: f64, seed: Option<u64>, fd_check: bool) -> Result<Body> {
    let system = build_system(model)?;
    let (Some(filter), Some(CostSection::Discrepancy { .. })) = (&system.filter, &model.cost) else {
        return Err(Error::InvalidInput(
            "optimize needs a filter section and discrepancy weights S, T".into(),
        ));
    };
    if !(tol > 0.0) {
        return Err(Error::InvalidInput("--tol must be positive".into()));
    }
    let cascade = system.cascade.as_ref().expect("filter present");
    let weights: &CqfWeights = cascade.weights();
    let init = match seed {
        Some(s) => jittered(filter, s)?,
        None => filter.clone(),
    };
    let config = OptimizerConfig {
        max_iters,
        tolerance: tol,
        fd_check,
        ..OptimizerConfig::default()
    };
    let r = optimize_filter(&system.plant, weights, &init, &config)?;
    let spot_checks: Vec<Value> = r
        .spot_checks
        .iter()
        .map(|c| json!({"iteration": c.iteration, "analytic": c.analytic, "finite_difference": c.finite_difference}))
        .collect();
    Ok(Body {
        tolerances: json!({
            "gradient_norm": tol,
            "armijo": config.armijo,
            "backtrack": config.backtrack,
            "initial_step": config.initial_step,
        }),
        results: json!({
            "iterations": r.iterations,
            "converged": r.converged,
            "gradient_norm": r.gradient_norm,
            "gradient": r.gradient,
            "cost_trace": r.cost_trace,
            "seed": seed,
            "filter": {
                "lambda": rows(r.filter.lambda()),
                "R_f": rows(r.filter.r_f()),
                "N_Phi": rows(r.filter.n_phi()),
                "N_Psi": rows(r.filter.n_psi()),
            },
            "spot_checks": spot_checks,
        }),
        pass: r.converged,
    })
}

/// Caps the global thread pool from `OQHO_NUM_THREADS`.
pub fn configure_threads() -> std::result::Result<(), String> {
    match std::env::var("OQHO_NUM_THREADS") {
        Ok(v) => {
            let n: usize = v
                .trim()
                .parse()
                .map_err(|_| format!("OQHO_NUM_THREADS must be a positive integer, got {v:?}"))?;
            if n == 0 {
                return Err("OQHO_NUM_THREADS must be a positive integer".into());
            }
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| e.to_string())
        }
        Err(_) => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout() {
        let means = vec![crate::linalg::RealVector::from_column_slice(&[1.0, 2.0])];
        let covs = vec![RealMatrix::from_row_slice(2, 2, &[3.0, 4.0, 4.0, 5.0])];
        let csv = trajectory_csv(&[0.5], &means, &covs);
        assert_eq!(csv, "t,mean_1,mean_2,sigma_1_1,sigma_1_2,sigma_2_2\n0.5,1,2,3,4,5\n");
    }

    #[test]
    fn exit_codes_split_input_from_refusal() {
        assert_eq!(exit_code(&Error::InvalidInput("x".into())), 2);
        assert_eq!(exit_code(&Error::NotHurwitz { margin: 0.0 }), 1);
        assert_eq!(exit_code(&Error::RouteDisagreement { first: "a", a: 0.0, second: "b", b: 1.0 }), 1);
    }
}
