//! Command-line front end for the reslab library: problem ingestion
//! (builtins, 2-D expressions, seeded random quadratics), experiment
//! orchestration, and CSV/JSON emission.
//!
//! Every subcommand writes `results.csv` and `summary.json` to --out-dir and
//! prints a short human summary. Exit codes: 0 success, 2 validation error,
//! 3 numerical failure. The env var RESLAB_THREADS caps parallelism.

mod config;
mod emit;

use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use reslab::{
    basin_escape_study, classify_equilibrium, consistency_exponent, dta_map, field_jacobian_at,
    iterate, map_jacobian_at, parse_objective, random_quadratic, resolution_field,
    set_convergence_study, step_bounds, transfer_study, AlgorithmId, BoundsOptions, Dynamics,
    Error, EscapeOptions, HyperParams, Kind, Point, ProblemSpec, ResolutionOrder,
    SetConvergenceOptions, SpectrumSpec, StopRule, TransferOptions, Vector, BUILTIN_IDS,
};

use config::{load_config, RunConfig};
use emit::{fmt_f64, Output};

#[derive(Parser)]
#[command(
    name = "reslab",
    version,
    about = "Min-max algorithm stability lab: steppers, companion ODE fields, \
             spectral classification, step-size bounds, and batch experiments."
)]
struct Cli {
    /// TOML or JSON config file; a summary.json from a previous run works too.
    /// CLI flags override file values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Directory for results.csv / summary.json (default: current directory).
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,

    /// Also write plot.csv in tidy long format (series, t_or_k, value).
    #[arg(long, global = true)]
    emit_plot_data: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Classify an equilibrium of a step map or companion field.
    ///
    /// CSV columns: algorithm, order, kind, verdict, margin, eps_tol,
    /// eig_index, eig_re, eig_im (one row per eigenvalue).
    Classify(CommonOpts),
    /// Run one algorithm from an initial point and record the trajectory.
    ///
    /// CSV columns: k, value, grad_norm, z (space-separated coordinates).
    Simulate(CommonOpts),
    /// Compute hyperparameter bounds at a saddle point.
    ///
    /// CSV columns: name, value, note.
    Bounds(CommonOpts),
    /// Fit the consistency exponent of one step vs the companion flow.
    ///
    /// CSV columns: s, error.
    Consistency(CommonOpts),
    /// Escape statistics around a repelling fixed point.
    ///
    /// CSV columns: seed, termination, iters, final_distance.
    Basin(CommonOpts),
    /// Stability-transfer study over a step-size grid.
    ///
    /// CSV columns: s, continuous_verdict, continuous_margin,
    /// discrete_verdict, discrete_margin, frac_decaying, all_agree_stable.
    Transfer(CommonOpts),
    /// Convergence to a compact invariant set, plus forward invariance.
    ///
    /// CSV columns: seed, start_radius, final_set_distance,
    /// max_distance_increase, success.
    Setconv(CommonOpts),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Classify(_) => "classify",
            Command::Simulate(_) => "simulate",
            Command::Bounds(_) => "bounds",
            Command::Consistency(_) => "consistency",
            Command::Basin(_) => "basin",
            Command::Transfer(_) => "transfer",
            Command::Setconv(_) => "setconv",
        }
    }

    fn opts(&self) -> &CommonOpts {
        match self {
            Command::Classify(o)
            | Command::Simulate(o)
            | Command::Bounds(o)
            | Command::Consistency(o)
            | Command::Basin(o)
            | Command::Transfer(o)
            | Command::Setconv(o) => o,
        }
    }
}

/// Flags shared by all subcommands; each subcommand validates the subset it
/// needs after merging with --config.
#[derive(Args, Clone, Debug, Default)]
struct CommonOpts {
    /// Builtin id (bilinear, quad_saddle, compact_attractor, x2y4, x4y4,
    /// antisaddle), `expr:<formula in x,y>`, or `randquad:<n>,<m>,<seed>`.
    #[arg(long)]
    problem: Option<String>,
    /// Algorithm: tt-gda | geg | tt-ppm | dn | rdn | jm.
    #[arg(long = "alg")]
    algorithm: Option<String>,
    /// o1 | os | dta (classify: what to classify; setconv: which dynamics).
    #[arg(long)]
    order: Option<String>,
    /// Step size (default 0.1).
    #[arg(long)]
    s: Option<f64>,
    /// Timescale ratio (default 1).
    #[arg(long)]
    tau: Option<f64>,
    /// Extragradient weight (default 1).
    #[arg(long)]
    gamma: Option<f64>,
    /// Newton regularization (default 1).
    #[arg(long)]
    phi: Option<f64>,
    /// Comma-separated step-size grid for consistency/transfer.
    #[arg(long = "s-grid", value_parser = parse_f64_list)]
    s_grid: Option<F64List>,
    /// Initial iterate, comma-separated (simulate/consistency).
    #[arg(long, value_parser = parse_f64_list)]
    z0: Option<F64List>,
    /// Expansion/evaluation point, comma-separated (default: origin).
    #[arg(long, value_parser = parse_f64_list)]
    at: Option<F64List>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long = "max-iters")]
    max_iters: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Sampling radius around the expansion point.
    #[arg(long)]
    radius: Option<f64>,
    /// Keep every stride-th trajectory state.
    #[arg(long)]
    stride: Option<usize>,
    /// Gradient stop tolerance (simulate, default 1e-12) / success
    /// tolerance (setconv, default 1e-6).
    #[arg(long)]
    tol: Option<f64>,
    /// Start annulus `inner,outer` for setconv.
    #[arg(long, value_parser = parse_f64_pair)]
    annulus: Option<F64Pair>,
    /// Integration horizon for field dynamics (setconv).
    #[arg(long = "t-end")]
    t_end: Option<f64>,
    /// Integration step for field dynamics (setconv).
    #[arg(long)]
    dt: Option<f64>,
    /// Forward-invariance probe count (setconv).
    #[arg(long = "interior-starts")]
    interior_starts: Option<usize>,
    /// Sampling box half-width for diffeomorphism bounds.
    #[arg(long = "box-halfwidth")]
    box_halfwidth: Option<f64>,
    /// Sample count for diffeomorphism bounds.
    #[arg(long)]
    samples: Option<usize>,
    /// Escape when distance exceeds exit_factor * radius (basin).
    #[arg(long = "exit-factor")]
    exit_factor: Option<f64>,
    /// Escape when distance grows growth_factor times from its minimum.
    #[arg(long = "growth-factor")]
    growth_factor: Option<f64>,
}

impl CommonOpts {
    fn to_config(&self, command: &str) -> RunConfig {
        RunConfig {
            command: Some(command.to_string()),
            problem: self.problem.clone(),
            algorithm: self.algorithm.clone(),
            order: self.order.clone(),
            s: self.s,
            tau: self.tau,
            gamma: self.gamma,
            phi: self.phi,
            s_grid: self.s_grid.clone().map(|l| l.0),
            z0: self.z0.clone().map(|l| l.0),
            at: self.at.clone().map(|l| l.0),
            trials: self.trials,
            max_iters: self.max_iters,
            seed: self.seed,
            radius: self.radius,
            stride: self.stride,
            tol: self.tol,
            annulus: self.annulus.map(|p| p.0),
            t_end: self.t_end,
            dt: self.dt,
            interior_starts: self.interior_starts,
            box_halfwidth: self.box_halfwidth,
            samples: self.samples,
            exit_factor: self.exit_factor,
            growth_factor: self.growth_factor,
        }
    }
}

/// Comma-separated float list; a newtype so clap reads it as one argument.
#[derive(Clone, Debug)]
struct F64List(Vec<f64>);

#[derive(Clone, Copy, Debug)]
struct F64Pair((f64, f64));

fn parse_f64_list(s: &str) -> Result<F64List, String> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("bad number {t:?}: {e}")))
        .collect::<Result<Vec<f64>, String>>()
        .map(F64List)
}

fn parse_f64_pair(s: &str) -> Result<F64Pair, String> {
    let v = parse_f64_list(s)?.0;
    if v.len() != 2 {
        return Err(format!("expected two comma-separated numbers, got {}", v.len()));
    }
    Ok(F64Pair((v[0], v[1])))
}

// ---------------------------------------------------------------------------
// error-to-exit-code mapping

struct CliError {
    msg: String,
    code: u8,
}

impl CliError {
    fn validation(msg: impl Into<String>) -> Self {
        Self { msg: msg.into(), code: 2 }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Dimension { .. }
            | Error::Domain(_)
            | Error::NotFound(_)
            | Error::Unsupported(_)
            | Error::Parse { .. } => 2,
            Error::Numerics(_)
            | Error::SingularJacobian(_)
            | Error::ImplicitSolve { .. }
            | Error::Eigen
            | Error::NotAnEquilibrium(_) => 3,
        };
        Self { msg: e.to_string(), code }
    }
}

// ---------------------------------------------------------------------------
// resolved run inputs

struct Inputs {
    problem: ProblemSpec,
    alg: Option<AlgorithmId>,
    params: HyperParams,
}

fn resolve_problem(spec: &str) -> Result<ProblemSpec, CliError> {
    if let Some(src) = spec.strip_prefix("expr:") {
        let objective = parse_objective(src)?;
        return Ok(ProblemSpec {
            id: format!("expr:{src}"),
            objective,
            known_saddles: vec![],
            invariant_ball: None,
            notes: "user-supplied 2-D expression".into(),
        });
    }
    if let Some(args) = spec.strip_prefix("randquad:") {
        let parts: Vec<&str> = args.split(',').collect();
        if parts.len() != 3 {
            return Err(CliError::validation(format!(
                "randquad spec must be randquad:<n>,<m>,<seed>, got {spec:?}"
            )));
        }
        let n: usize = parts[0].trim().parse().map_err(|e| {
            CliError::validation(format!("bad n in {spec:?}: {e}"))
        })?;
        let m: usize = parts[1].trim().parse().map_err(|e| {
            CliError::validation(format!("bad m in {spec:?}: {e}"))
        })?;
        let seed: u64 = parts[2].trim().parse().map_err(|e| {
            CliError::validation(format!("bad seed in {spec:?}: {e}"))
        })?;
        return Ok(random_quadratic(n, m, seed, &SpectrumSpec::default())?);
    }
    if BUILTIN_IDS.contains(&spec) {
        return Ok(reslab::builtin(spec)?);
    }
    Err(CliError::validation(format!(
        "unknown problem {spec:?}; expected one of {BUILTIN_IDS:?}, expr:<formula>, or \
         randquad:<n>,<m>,<seed>"
    )))
}

fn resolve_inputs(cfg: &RunConfig) -> Result<Inputs, CliError> {
    let problem_spec = cfg
        .problem
        .as_deref()
        .ok_or_else(|| CliError::validation("missing --problem (or `problem` in config)"))?;
    let problem = resolve_problem(problem_spec)?;
    let alg = match cfg.algorithm.as_deref() {
        Some(a) => Some(AlgorithmId::from_str(a)?),
        None => None,
    };
    let params = HyperParams::new(
        cfg.s.unwrap_or(0.1),
        cfg.tau.unwrap_or(1.0),
        cfg.gamma.unwrap_or(1.0),
        cfg.phi.unwrap_or(1.0),
    )?;
    Ok(Inputs { problem, alg, params })
}

fn require_alg(inputs: &Inputs) -> Result<AlgorithmId, CliError> {
    inputs.alg.ok_or_else(|| CliError::validation("missing --alg (or `algorithm` in config)"))
}

fn point_or_origin(coords: &Option<Vec<f64>>, dim: usize) -> Result<Point, CliError> {
    match coords {
        Some(v) => Ok(Point::from_slice(v)?),
        None => Ok(Point::new(Vector::zeros(dim))?),
    }
}

fn parse_order(s: Option<&str>, default: &str) -> Result<String, CliError> {
    let o = s.unwrap_or(default).to_ascii_lowercase();
    match o.as_str() {
        "o1" | "os" | "dta" => Ok(o),
        other => Err(CliError::validation(format!("order must be o1, os, or dta, got {other:?}"))),
    }
}

fn resolution_order(o: &str) -> ResolutionOrder {
    if o == "os" { ResolutionOrder::Os } else { ResolutionOrder::O1 }
}

fn term_str(t: &reslab::Termination) -> String {
    serde_json::to_value(t)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_else(|| format!("{t:?}"))
}

// ---------------------------------------------------------------------------
// subcommand handlers

fn run_classify(cfg: &RunConfig, out: &mut Output) -> Result<(), CliError> {
    let inputs = resolve_inputs(cfg)?;
    let alg = require_alg(&inputs)?;
    let obj = &inputs.problem.objective;
    let at = point_or_origin(&cfg.at, obj.dim())?;
    let order = parse_order(cfg.order.as_deref(), "os")?;

    let report = if order == "dta" {
        let map = dta_map(alg, obj, &inputs.params);
        classify_equilibrium(Kind::Discrete, &map_jacobian_at(map, &at)?)?
    } else {
        let field = resolution_field(alg, resolution_order(&order), obj, &inputs.params)?;
        classify_equilibrium(Kind::Continuous, &field_jacobian_at(&field, &at)?)?
    };

    out.set_header(&[
        "algorithm", "order", "kind", "verdict", "margin", "eps_tol", "eig_index", "eig_re",
        "eig_im",
    ]);
    for (i, ev) in report.eigenvalues.iter().enumerate() {
        out.push_row(vec![
            alg.to_string(),
            order.clone(),
            format!("{:?}", report.kind),
            format!("{:?}", report.verdict),
            fmt_f64(report.margin),
            fmt_f64(report.eps_tol),
            i.to_string(),
            fmt_f64(ev.re),
            fmt_f64(ev.im),
        ]);
        out.plot_point("eig_re", i as f64, ev.re);
        out.plot_point("eig_im", i as f64, ev.im);
    }
    out.note(format!(
        "{alg} ({order}) at {:?}: {:?}, margin {:.3e}",
        at.coords().as_slice(),
        report.verdict,
        report.margin
    ));
    out.push_verdict(&report);
    Ok(())
}

fn run_simulate(cfg: &RunConfig, out: &mut Output) -> Result<(), CliError> {
    let inputs = resolve_inputs(cfg)?;
    let alg = require_alg(&inputs)?;
    let obj = &inputs.problem.objective;
    let z0 = cfg
        .z0
        .as_ref()
        .ok_or_else(|| CliError::validation("simulate needs --z0"))
        .and_then(|v| Ok(Point::from_slice(v)?))?;
    let stop = StopRule {
        max_iters: cfg.max_iters.unwrap_or(10_000),
        tol_f: Some(cfg.tol.unwrap_or(1e-12)),
        target_point: None,
        target_set: None,
        divergence_radius: Some(1e6),
        stride: cfg.stride.unwrap_or(1),
    };
    let mut traj = iterate(alg, obj, &inputs.params, &z0, &stop)?;

    out.set_header(&["k", "value", "grad_norm", "z"]);
    for (stamp, z) in traj.stamps.iter().zip(&traj.states) {
        let zp = Point::new(z.clone())?;
        let value = obj.value(z)?;
        let gnorm = reslab::eval_f(obj, &zp)?.amax();
        let coords: Vec<String> = z.iter().map(|&c| fmt_f64(c)).collect();
        out.push_row(vec![fmt_f64(*stamp), fmt_f64(value), fmt_f64(gnorm), coords.join(" ")]);
        for (i, &c) in z.iter().enumerate() {
            out.plot_point(&format!("z{i}"), *stamp, c);
        }
        out.plot_point("grad_norm", *stamp, gnorm);
    }
    // Decay diagnostics against the nearest known saddle, when there is one.
    if let Some(saddle) = inputs.problem.known_saddles.first() {
        traj.fit_decay_to(saddle.coords());
        if let Some(fit) = &traj.decay_fit {
            out.push_fit(&serde_json::json!({
                "kind": "trajectory_decay",
                "rate": fit.rate,
                "r_squared": fit.r_squared,
                "samples_used": fit.samples_used,
            }));
        }
    }
    out.note(format!(
        "{alg} on {}: {} after {} recorded states, final |z| = {:.3e}",
        inputs.problem.id,
        term_str(&traj.termination),
        traj.states.len(),
        traj.last_state().norm()
    ));
    Ok(())
}

fn run_bounds(cfg: &RunConfig, out: &mut Output) -> Result<(), CliError> {
    let inputs = resolve_inputs(cfg)?;
    let alg = require_alg(&inputs)?;
    let obj = &inputs.problem.objective;
    let at = match (&cfg.at, inputs.problem.known_saddles.first()) {
        (Some(v), _) => Point::from_slice(v)?,
        (None, Some(saddle)) => saddle.clone(),
        (None, None) => Point::new(Vector::zeros(obj.dim()))?,
    };
    let opts = BoundsOptions {
        box_center: cfg.at.clone(),
        box_halfwidth: cfg.box_halfwidth.unwrap_or(1.0),
        samples: cfg.samples.unwrap_or(10_000),
        seed: cfg.seed.unwrap_or(0),
    };
    let report = step_bounds(alg, obj, &at, &inputs.params, &opts)?;

    let note_for = |name: &str| {
        report
            .provenance
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, note)| note.clone())
            .unwrap_or_default()
    };
    out.set_header(&["name", "value", "note"]);
    let mut emit = |name: &str, value: Option<f64>| {
        if let Some(v) = value {
            out.push_row(vec![name.to_string(), fmt_f64(v), note_for(name)]);
        }
    };
    emit("s_max_stability", report.s_max_stability);
    emit("s_max_escape", report.s_max_escape);
    emit("phi_min", report.phi_min);
    emit("lipschitz_l", Some(report.lipschitz_l));
    if let Some((lo, hi)) = report.gamma_range {
        out.push_row(vec!["gamma_min".into(), fmt_f64(lo), note_for("gamma_range")]);
        out.push_row(vec!["gamma_max".into(), fmt_f64(hi), note_for("gamma_range")]);
    }
    if let Some(flags) = &report.per_eigen_jm {
        for (i, (ev, ok)) in flags.iter().enumerate() {
            out.push_row(vec![
                format!("jm_rotation_dominant_{i}"),
                if *ok { "1".into() } else { "0".into() },
                format!("eigenvalue {:.6e} + {:.6e}i of the signed Hessian", ev.re, ev.im),
            ]);
        }
    }

    let mut line = format!("{alg} bounds on {}:", inputs.problem.id);
    if let Some(v) = report.s_max_stability {
        line.push_str(&format!(" s_max_stability = {v:.6}"));
    }
    if let Some(v) = report.s_max_escape {
        line.push_str(&format!(", s_max_escape = {v:.6}"));
    }
    if let Some(v) = report.phi_min {
        line.push_str(&format!(", phi_min = {v:.6}"));
    }
    out.note(line);
    for (name, note) in &report.provenance {
        out.note(format!("  {name}: {note}"));
    }
    out.push_bounds(&report);
    Ok(())
}

fn run_consistency(cfg: &RunConfig, out: &mut Output) -> Result<(), CliError> {
    let inputs = resolve_inputs(cfg)?;
    let alg = require_alg(&inputs)?;
    let obj = &inputs.problem.objective;
    let order = parse_order(cfg.order.as_deref(), "o1")?;
    if order == "dta" {
        return Err(CliError::validation("consistency compares against a field; use o1 or os"));
    }
    let z0 = match &cfg.z0 {
        Some(v) => Point::from_slice(v)?,
        None => Point::new(Vector::from_element(obj.dim(), 0.3))?,
    };
    let grid = cfg.s_grid.clone().unwrap_or_else(reslab::odes::default_s_grid);
    let report =
        consistency_exponent(alg, resolution_order(&order), obj, &inputs.params, &z0, &grid)?;

    out.set_header(&["s", "error"]);
    for &(s, e) in &report.errors {
        out.push_row(vec![fmt_f64(s), fmt_f64(e)]);
        out.plot_point("error", s, e);
    }
    match report.slope {
        Some(slope) => out.note(format!(
            "{alg} vs {order} field on {}: fitted slope {slope:.4}",
            inputs.problem.id
        )),
        None => out.note(format!(
            "{alg} vs {order} field on {}: all gaps at the noise floor (no slope)",
            inputs.problem.id
        )),
    }
    out.push_fit(&report);
    Ok(())
}

fn run_basin(cfg: &RunConfig, out: &mut Output) -> Result<(), CliError> {
    let inputs = resolve_inputs(cfg)?;
    let alg = require_alg(&inputs)?;
    let obj = &inputs.problem.objective;
    let at = point_or_origin(&cfg.at, obj.dim())?;
    let opts = EscapeOptions {
        trials: cfg.trials.unwrap_or(1000),
        radius: cfg.radius.unwrap_or(0.5),
        max_iters: cfg.max_iters.unwrap_or(10_000),
        seed: cfg.seed.unwrap_or(0),
        exit_factor: cfg.exit_factor.unwrap_or(10.0),
        growth_factor: cfg.growth_factor.unwrap_or(100.0),
    };
    let result = basin_escape_study(alg, obj, &at, &inputs.params, &opts)?;

    out.set_header(&["seed", "termination", "iters", "final_distance"]);
    for (i, t) in result.trials.iter().enumerate() {
        out.push_row(vec![
            t.seed.to_string(),
            term_str(&t.termination),
            fmt_f64(t.iters),
            fmt_f64(t.final_distance),
        ]);
        out.plot_point("final_distance", i as f64, t.final_distance);
    }
    out.note(format!(
        "{alg} on {}: {}/{} trials escaped (fraction {:.4})",
        inputs.problem.id, result.escaped, opts.trials, result.escape_fraction
    ));
    out.push_fit(&serde_json::json!({
        "kind": "escape",
        "escaped": result.escaped,
        "trials": opts.trials,
        "escape_fraction": result.escape_fraction,
    }));
    Ok(())
}

fn run_transfer(cfg: &RunConfig, out: &mut Output) -> Result<(), CliError> {
    let inputs = resolve_inputs(cfg)?;
    let alg = require_alg(&inputs)?;
    let obj = &inputs.problem.objective;
    let at = point_or_origin(&cfg.at, obj.dim())?;
    let grid_s = cfg.s_grid.clone().unwrap_or_else(|| match cfg.s {
        Some(s) => vec![s],
        None => reslab::odes::default_s_grid(),
    });
    let p_grid: Vec<HyperParams> = grid_s
        .iter()
        .map(|&s| inputs.params.replace_s(s))
        .collect::<reslab::Result<_>>()?;
    let opts = TransferOptions {
        trials: cfg.trials.unwrap_or(50),
        radius: cfg.radius.unwrap_or(0.5),
        max_iters: cfg.max_iters.unwrap_or(2000),
        seed: cfg.seed.unwrap_or(0),
        ..Default::default()
    };
    let result = transfer_study(alg, obj, &at, &p_grid, &opts)?;

    out.set_header(&[
        "s",
        "continuous_verdict",
        "continuous_margin",
        "discrete_verdict",
        "discrete_margin",
        "frac_decaying",
        "all_agree_stable",
    ]);
    for pt in &result.points {
        out.push_row(vec![
            fmt_f64(pt.params.s),
            format!("{:?}", pt.continuous.verdict),
            fmt_f64(pt.continuous.margin),
            format!("{:?}", pt.discrete.verdict),
            fmt_f64(pt.discrete.margin),
            fmt_f64(pt.frac_decaying),
            pt.all_agree_stable.to_string(),
        ]);
        out.plot_point("frac_decaying", pt.params.s, pt.frac_decaying);
        out.plot_point("discrete_margin", pt.params.s, pt.discrete.margin);
        out.push_verdict(&pt.continuous);
        out.push_verdict(&pt.discrete);
    }
    out.note(format!(
        "{alg} on {}: empirical s* = {}",
        inputs.problem.id,
        result
            .empirical_s_star
            .map(|s| format!("{s:.6}"))
            .unwrap_or_else(|| "none in grid".into())
    ));
    out.push_fit(&serde_json::json!({
        "kind": "transfer",
        "empirical_s_star": result.empirical_s_star,
        "points": result.points.iter().map(|p| serde_json::json!({
            "s": p.params.s,
            "frac_decaying": p.frac_decaying,
            "all_agree_stable": p.all_agree_stable,
        })).collect::<Vec<_>>(),
    }));
    Ok(())
}

fn run_setconv(cfg: &RunConfig, out: &mut Output) -> Result<(), CliError> {
    let inputs = resolve_inputs(cfg)?;
    let alg = require_alg(&inputs)?;
    let order = parse_order(cfg.order.as_deref(), "o1")?;
    let dynamics = if order == "dta" {
        Dynamics::Dta(alg)
    } else {
        Dynamics::Field(alg, resolution_order(&order))
    };
    let opts = SetConvergenceOptions {
        trials: cfg.trials.unwrap_or(100),
        annulus: cfg.annulus.unwrap_or((1.2, 1.5)),
        seed: cfg.seed.unwrap_or(0),
        t_end: cfg.t_end.unwrap_or(20.0),
        dt: cfg.dt.unwrap_or(1e-3),
        max_iters: cfg.max_iters.unwrap_or(10_000),
        success_tol: cfg.tol.unwrap_or(1e-6),
        interior_starts: cfg.interior_starts.unwrap_or(100),
    };
    let result = set_convergence_study(dynamics, &inputs.problem, &inputs.params, &opts)?;

    out.set_header(&[
        "seed",
        "start_radius",
        "final_set_distance",
        "max_distance_increase",
        "success",
    ]);
    for (i, t) in result.trials.iter().enumerate() {
        out.push_row(vec![
            t.seed.to_string(),
            fmt_f64(t.start_radius),
            fmt_f64(t.final_set_distance),
            fmt_f64(t.max_distance_increase),
            t.success.to_string(),
        ]);
        out.plot_point("final_set_distance", i as f64, t.final_set_distance);
    }
    out.note(format!(
        "{alg} ({order}) on {}: {}/{} trials reached the set; {}/{} interior starts fixed",
        inputs.problem.id,
        result.successes,
        opts.trials,
        result.interior_fixed,
        result.interior_checked
    ));
    out.push_fit(&serde_json::json!({
        "kind": "set_convergence",
        "successes": result.successes,
        "trials": opts.trials,
        "interior_fixed": result.interior_fixed,
        "interior_checked": result.interior_checked,
    }));
    Ok(())
}

// ---------------------------------------------------------------------------

fn run(cli: &Cli) -> (RunConfig, Output, Result<(), CliError>) {
    let command = cli.command.name();
    let out_dir = cli.out_dir.clone().unwrap_or_else(|| PathBuf::from("."));
    let mut out = Output::new(out_dir, cli.emit_plot_data);

    let file_cfg = match &cli.config {
        Some(path) => match load_config(path) {
            Ok(c) => c,
            Err(msg) => return (RunConfig::default(), out, Err(CliError::validation(msg))),
        },
        None => RunConfig::default(),
    };
    if let Some(file_cmd) = &file_cfg.command {
        if file_cmd != command {
            return (
                RunConfig::default(),
                out,
                Err(CliError::validation(format!(
                    "config is for subcommand {file_cmd:?} but {command:?} was invoked"
                ))),
            );
        }
    }
    let cfg = file_cfg.overlay(cli.command.opts().to_config(command));

    let result = match &cli.command {
        Command::Classify(_) => run_classify(&cfg, &mut out),
        Command::Simulate(_) => run_simulate(&cfg, &mut out),
        Command::Bounds(_) => run_bounds(&cfg, &mut out),
        Command::Consistency(_) => run_consistency(&cfg, &mut out),
        Command::Basin(_) => run_basin(&cfg, &mut out),
        Command::Transfer(_) => run_transfer(&cfg, &mut out),
        Command::Setconv(_) => run_setconv(&cfg, &mut out),
    };
    (cfg, out, result)
}

fn main() -> ExitCode {
    if let Ok(threads) = std::env::var("RESLAB_THREADS") {
        match threads.parse::<usize>() {
            Ok(n) if n > 0 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => {
                eprintln!("error: RESLAB_THREADS must be a positive integer, got {threads:?}");
                return ExitCode::from(2);
            }
        }
    }

    let cli = Cli::parse();
    let t0 = std::time::Instant::now();
    let (cfg, out, result) = run(&cli);
    let wall = t0.elapsed().as_secs_f64();

    match result {
        Ok(()) => match out.flush(&cfg, wall, false) {
            Ok(()) => ExitCode::SUCCESS,
            Err(msg) => {
                eprintln!("error: {msg}");
                ExitCode::from(3)
            }
        },
        Err(e) => {
            // Flush whatever was produced before the failure, marked partial,
            // but only once the command actually started emitting.
            if !out.header.is_empty() {
                if let Err(msg) = out.flush(&cfg, wall, true) {
                    eprintln!("error: {msg}");
                }
            }
            eprintln!("error: {}", e.msg);
            ExitCode::from(e.code)
        }
    }
}
