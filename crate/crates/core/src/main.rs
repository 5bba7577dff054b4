//! Command-line front end: normalize plants, design Q-filter coefficients,
//! check robust stability, and run closed-loop simulations and tau sweeps.
//!
//! Exit codes: 0 success, 2 config error, 3 model error, 4 design
//! infeasible, 5 instability detected.

use std::fs::{self, File};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use log::info;
use serde::Serialize;
use serde_json::json;

use dobkit::config::ExperimentConfig;
use dobkit::dob;
use dobkit::lti::{canonical_normal_form, StateSpacePlant};
use dobkit::qfilter::verify_condition_c;
use dobkit::sim::{
    sweep_taus, ClosedLoopSim, LoopSetup, RecoveryMetrics, SimulationTrace, SolverOptions,
    SweepPoint,
};
use dobkit::stability::{root_grouping, LoopFactors, Verdict};
use dobkit::{DobError, Result};

const EXIT_CONFIG: i32 = 2;
const EXIT_MODEL: i32 = 3;
const EXIT_INFEASIBLE: i32 = 4;
const EXIT_UNSTABLE: i32 = 5;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SolverKind {
    Rk4,
    Rk45,
}

#[derive(Parser)]
#[command(
    name = "dobkit",
    about = "Design and verification toolkit for disturbance-observer based robust control",
    version
)]
struct Cli {
    /// Experiment configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for traces and tables (defaults to the config's
    /// out_dir, then the working directory).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Override the configured tau list.
    #[arg(long, global = true, num_args = 1.., value_delimiter = ',')]
    tau: Vec<f64>,
    /// Override the configured solver.
    #[arg(long, global = true, value_enum)]
    solver: Option<SolverKind>,
    /// Override the configured sampling seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert the plant to normal form and report its structure.
    Normalize,
    /// Design Q-filter denominator coefficients for a gain interval.
    DesignQ,
    /// Evaluate the robust-stability conditions and the root grouping.
    CheckStability,
    /// Simulate the closed loop at one tau and write the trace CSV.
    Simulate,
    /// Simulate across the tau list and write traces plus a metrics table.
    Sweep,
}

fn main() {
    let env = env_logger::Env::new()
        .filter_or("DOB_LOG_LEVEL", "warn")
        .write_style("DOB_LOG_STYLE");
    env_logger::Builder::from_env(env).init();
    let cli = Cli::parse();
    let code = match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                DobError::Config { .. } => EXIT_CONFIG,
                DobError::DesignInfeasible(_) => EXIT_INFEASIBLE,
                _ => EXIT_MODEL,
            }
        }
    };
    std::process::exit(code);
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| DobError::config("--config", "missing"))?;
    ExperimentConfig::load(path)
}

fn out_dir(cli: &Cli, cfg: &ExperimentConfig) -> Result<PathBuf> {
    let dir = cli
        .out
        .clone()
        .or_else(|| cfg.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir)
        .map_err(|e| DobError::config(dir.display().to_string(), e.to_string()))?;
    Ok(dir)
}

fn solver_override(cli: &Cli, tau: f64) -> Option<SolverOptions> {
    cli.solver.map(|k| match k {
        SolverKind::Rk4 => SolverOptions::Rk4 { h: tau / 50.0 },
        SolverKind::Rk45 => SolverOptions::default_rk45(),
    })
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| DobError::Solver(format!("json encoding failed: {e}")))?;
    println!("{text}");
    Ok(())
}

fn run(cli: &Cli) -> Result<i32> {
    let cfg = load_config(cli)?;
    match cli.command {
        Command::Normalize => cmd_normalize(&cfg),
        Command::DesignQ => cmd_design_q(&cfg),
        Command::CheckStability => cmd_check_stability(cli, &cfg),
        Command::Simulate => cmd_simulate(cli, &cfg),
        Command::Sweep => cmd_sweep(cli, &cfg),
    }
}

fn cmd_normalize(cfg: &ExperimentConfig) -> Result<i32> {
    // State-space plants go through the similarity transformation; transfer
    // functions through the canonical construction. Zeros come from the
    // rank-drop oracle where a realization exists.
    let tf = cfg.plant_rational(None)?;
    let (model, zeros) = {
        let plant = StateSpacePlant::from_tf(&tf)?;
        let zeros = plant.zeros_by_rosenbrock()?;
        (canonical_normal_form(&tf)?, zeros)
    };
    let report = json!({
        "nu": model.nu,
        "m": model.m,
        "g": model.g,
        "phi": model.phi.iter().cloned().collect::<Vec<f64>>(),
        "psi": model.psi.iter().cloned().collect::<Vec<f64>>(),
        "s": matrix_rows(&model.s),
        "g_mat": matrix_rows(&model.g_mat),
        "zeros": zeros.iter().map(|z| json!({"re": z.re, "im": z.im})).collect::<Vec<_>>(),
        "is_minimum_phase": model.is_minimum_phase()?,
    });
    print_json(&report)?;
    Ok(0)
}

fn matrix_rows(m: &nalgebra::DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| m.row(i).iter().cloned().collect())
        .collect()
}

fn cmd_design_q(cfg: &ExperimentConfig) -> Result<i32> {
    let nominal = cfg.nominal_model()?;
    let (result, gains) = cfg.run_design(&nominal)?;
    let tau = cfg.design_request()?.tau;
    let spec = result.spec(tau)?;
    let check = verify_condition_c(&spec, &gains, 1001)?;
    let report = json!({
        "a": spec.a,
        "c": spec.c,
        "mu": spec.mu,
        "tau": spec.tau,
        "a0": spec.a[0],
        "kbar": result.kbar,
        "k_sup": result.k_sup,
        "capped": result.capped,
        "condition_c": check,
    });
    print_json(&report)?;
    Ok(0)
}

fn cmd_check_stability(cli: &Cli, cfg: &ExperimentConfig) -> Result<i32> {
    let plant = cfg.plant_rational(cli.seed)?;
    let nominal = cfg.nominal_rational()?;
    let controller = cfg.controller_rational()?;
    let nominal_model = cfg.nominal_model()?;
    let spec = cfg.qfilter_spec(&nominal_model)?;
    let taus = cfg.tau_list(&cli.tau)?;
    let factors = LoopFactors::new(plant, nominal, controller, spec.clone(), spec)?;
    let reports = root_grouping(&factors, &taus)?;
    print_json(&reports)?;
    let robust = reports
        .first()
        .map(|r| r.verdict == Verdict::RobustlyStableForSmallTau)
        .unwrap_or(false);
    Ok(if robust { 0 } else { EXIT_UNSTABLE })
}

fn trace_path(dir: &Path, tau: f64) -> PathBuf {
    dir.join(format!("trace_tau_{tau}.csv"))
}

fn write_trace(dir: &Path, tau: f64, trace: &SimulationTrace) -> Result<PathBuf> {
    let path = trace_path(dir, tau);
    let file = File::create(&path)
        .map_err(|e| DobError::config(path.display().to_string(), e.to_string()))?;
    trace.write_csv(file)?;
    Ok(path)
}

fn loop_setup(cli: &Cli, cfg: &ExperimentConfig) -> Result<LoopSetup> {
    let nominal = cfg.nominal_model()?;
    let qspec = cfg.qfilter_spec(&nominal)?;
    Ok(LoopSetup {
        plant: cfg.plant_lifted(cli.seed)?,
        nominal,
        qspec,
        controller: cfg.controller_realization()?,
        reference: cfg.reference_signal(),
        disturbance: cfg.disturbance_signal(),
        sat_level: cfg.sat_level,
    })
}

fn cmd_simulate(cli: &Cli, cfg: &ExperimentConfig) -> Result<i32> {
    let dir = out_dir(cli, cfg)?;
    let setup = loop_setup(cli, cfg)?;
    let taus = cfg.tau_list(&cli.tau)?;
    let tau = taus[0];
    let opts = cfg.sim_options(solver_override(cli, tau));
    let spec = setup.qspec.with_tau(tau)?;
    let dob = dob::realize(&setup.nominal, &spec, setup.sat_level)?;
    let sim = ClosedLoopSim::new(
        setup.plant.clone(),
        dob,
        setup.controller.clone(),
        setup.reference.clone(),
        setup.disturbance.clone(),
    )?;
    let trace = sim.simulate(&cfg.initial_state(), &opts)?;
    let t_settle = opts.t_settle.unwrap_or(20.0 * tau).min(opts.horizon / 2.0);
    let metrics = dobkit::sim::recovery_metrics(&trace, t_settle)?;
    let path = write_trace(&dir, tau, &trace)?;
    info!("trace written to {}", path.display());
    print_json(&json!({
        "tau": tau,
        "t_settle": t_settle,
        "trace": path.display().to_string(),
        "diverged": trace.diverged,
        "metrics": metrics,
    }))?;
    Ok(if trace.diverged { EXIT_UNSTABLE } else { 0 })
}

fn write_summary(dir: &Path, points: &[SweepPoint]) -> Result<PathBuf> {
    let path = dir.join("sweep_summary.csv");
    let file = File::create(&path)
        .map_err(|e| DobError::config(path.display().to_string(), e.to_string()))?;
    let mut w = csv::Writer::from_writer(file);
    let to_err = |e: csv::Error| DobError::Solver(format!("csv write failed: {e}"));
    w.write_record([
        "tau",
        "sup_dev",
        "sup_dev_post",
        "u_tracking",
        "steady_state_err",
    ])
    .map_err(to_err)?;
    for p in points {
        let m: &RecoveryMetrics = &p.metrics;
        w.write_record([
            p.tau.to_string(),
            m.sup_dev.to_string(),
            m.sup_dev_post.to_string(),
            m.u_tracking.to_string(),
            m.steady_state_err.to_string(),
        ])
        .map_err(to_err)?;
    }
    w.flush()
        .map_err(|e| DobError::Solver(format!("csv flush failed: {e}")))?;
    Ok(path)
}

fn cmd_sweep(cli: &Cli, cfg: &ExperimentConfig) -> Result<i32> {
    let dir = out_dir(cli, cfg)?;
    let setup = loop_setup(cli, cfg)?;
    let taus = cfg.tau_list(&cli.tau)?;
    // The per-run solver default depends on tau only for RK4.
    let opts = cfg.sim_options(solver_override(cli, taus[taus.len() - 1]));
    let points = sweep_taus(&setup, &cfg.initial_state(), &taus, &opts)?;
    let mut rows = Vec::new();
    let mut any_diverged = false;
    for p in &points {
        let path = write_trace(&dir, p.tau, &p.trace)?;
        any_diverged |= p.trace.diverged;
        rows.push(json!({
            "tau": p.tau,
            "t_settle": p.t_settle,
            "trace": path.display().to_string(),
            "diverged": p.trace.diverged,
            "metrics": p.metrics,
        }));
    }
    let summary = write_summary(&dir, &points)?;
    print_json(&json!({
        "summary": summary.display().to_string(),
        "runs": rows,
    }))?;
    Ok(if any_diverged { EXIT_UNSTABLE } else { 0 })
}
