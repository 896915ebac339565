//! Command-line driver: configuration ingestion, subcommand dispatch and
//! structured output writing.
//!
//! Subcommands:
//! - `simulate`: run a configured simulation, write snapshot CSVs and a run
//!   manifest.
//! - `kernel-inspect`: build the smoothed kernel for given (P, M, N) and emit
//!   a JSON report plus a CSV of (x_j, σ_{M,j}).
//! - `entropy-report`: run a simulation and write the per-step diagnostics
//!   CSV (n, t, tv, entropy, sup_norm, min_grad, fp_iters, contraction).
//! - `experiment run <name>`: canned studies (table2, figures12,
//!   sigma-compare, refinement) with pass/fail summaries.
//!
//! Exit codes: 0 success, 1 assertion/bound violation or solver failure,
//! 2 configuration error. The `DISLOC_OUT_ROOT` environment variable, when
//! set, prefixes every output directory. `--seed` is accepted and recorded in
//! manifests for randomized test corpora; the solver itself uses no
//! randomness.

use clap::{Args, Parser, Subcommand};
use disloc_core::config::{parse_config, RunConfig};
use disloc_core::experiments::{
    run_domain_sweep, run_long_horizon, run_refinement, run_sigma_mode_comparison, ExperimentPlan,
};
use disloc_core::kernel::{KernelSpec, PeriodizationParams, SigmaMode, SmoothedKernel};
use disloc_core::report::{csv_body, format_f64, write_atomic, Json};
use disloc_core::runner::{self, RunError};
use disloc_core::Grid;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(name = "disloc", version, about = "Periodic nonlocal eikonal solver for dislocation dynamics")]
struct Cli {
    /// Maximum number of concurrent runs for experiment sweeps.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Seed recorded into manifests (randomized test corpora only).
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a simulation from a JSON configuration.
    Simulate(SimulateArgs),
    /// Build the smoothed kernel and report coefficients and samples.
    KernelInspect(KernelInspectArgs),
    /// Run a simulation and emit the per-step diagnostics CSV.
    EntropyReport(EntropyReportArgs),
    /// Canned experiments.
    Experiment(ExperimentArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// JSON configuration file; defaults apply for missing keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides the config's output.dir).
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct KernelInspectArgs {
    #[arg(long = "P")]
    p: f64,
    #[arg(long = "M")]
    m: usize,
    #[arg(long = "N")]
    n: usize,
    #[arg(long, default_value = "cesaro")]
    mode: String,
    #[arg(long, default_value_t = 1.0)]
    amplitude: f64,
    #[arg(long, default_value_t = 1.0)]
    zeta: f64,
    #[arg(long)]
    oversample: Option<usize>,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct EntropyReportArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    #[command(subcommand)]
    action: ExperimentAction,
}

#[derive(Subcommand)]
enum ExperimentAction {
    /// Run a named experiment: table2 | figures12 | sigma-compare | refinement.
    Run(ExperimentRunArgs),
}

#[derive(Args)]
struct ExperimentRunArgs {
    name: String,
    /// Comma-separated subset of sweep values (table2 only), e.g. 10,20,50.
    #[arg(long)]
    subset: Option<String>,
    /// Base configuration override (JSON file).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
}

enum CliError {
    Config(String),
    Failure(String),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Failure(_) => 1,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Failure(m) => m,
        }
    }
}

impl From<RunError> for CliError {
    fn from(e: RunError) -> Self {
        CliError::Failure(e.to_string())
    }
}

impl From<disloc_core::experiments::ExperimentError> for CliError {
    fn from(e: disloc_core::experiments::ExperimentError) -> Self {
        CliError::Failure(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Failure(format!("i/o error: {e}"))
    }
}

/// Parse argv and execute; returns the process exit code.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            // help/version requests exit 0; real usage errors are config errors
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let threads = cli
        .threads
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1));
    let result = match &cli.command {
        Command::Simulate(args) => simulate(args, cli.seed),
        Command::KernelInspect(args) => kernel_inspect(args),
        Command::EntropyReport(args) => entropy_report(args, cli.seed),
        Command::Experiment(args) => experiment(args, threads),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.exit_code()
        }
    }
}

/// Apply the `DISLOC_OUT_ROOT` override.
fn resolve_out_dir(dir: &Path) -> PathBuf {
    match std::env::var_os("DISLOC_OUT_ROOT") {
        Some(root) => PathBuf::from(root).join(dir),
        None => dir.to_path_buf(),
    }
}

fn load_config(path: &Option<PathBuf>) -> Result<RunConfig, CliError> {
    let Some(path) = path else {
        return Ok(RunConfig::default());
    };
    let body = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_config(&body).map_err(|e| CliError::Config(e.to_string()))
}

fn simulate(args: &SimulateArgs, seed: Option<u64>) -> Result<(), CliError> {
    let config = load_config(&args.config)?;
    let artifacts = runner::run(&config)?;
    if config.solver.cfl_mode == disloc_core::scheme::CflMode::Practical
        && !(artifacts.cfl_dt_satisfied && artifacts.cfl_ratio_satisfied)
    {
        eprintln!(
            "warning: time step outside the strict bounds (dt_max = {:.3e}, ratio_max = {:.3e}); \
             proceeding on per-step fixed-point convergence",
            artifacts.cfl.dt_max, artifacts.cfl.ratio_max
        );
    }
    let dir = resolve_out_dir(args.out_dir.as_deref().unwrap_or(Path::new(&config.output.dir)));
    let manifest = write_outputs_with_seed(&artifacts, &dir, seed)?;
    println!(
        "simulate: {} steps to t = {}, sup |u + L^P x| = {:.6e}, manifest {}",
        artifacts.final_state.n,
        artifacts.final_state.t,
        artifacts.final_profile_sup(),
        manifest.display()
    );
    if artifacts.violation_count() > 0 {
        return Err(CliError::Failure(format!(
            "{} bound violations recorded; see manifest",
            artifacts.violation_count()
        )));
    }
    Ok(())
}

fn write_outputs_with_seed(
    artifacts: &runner::RunArtifacts,
    dir: &Path,
    seed: Option<u64>,
) -> Result<PathBuf, CliError> {
    let manifest_path = runner::write_outputs(artifacts, dir)?;
    if let Some(seed) = seed {
        // Re-emit the manifest with the seed recorded.
        let mut doc = runner::manifest_json(artifacts);
        if let Json::Obj(entries) = &mut doc {
            entries.push(("seed".into(), Json::Int(seed as i64)));
        }
        write_atomic(&manifest_path, &doc.render())?;
    }
    Ok(manifest_path)
}

fn kernel_inspect(args: &KernelInspectArgs) -> Result<(), CliError> {
    let mode = match args.mode.as_str() {
        "cesaro" => SigmaMode::Cesaro,
        "cell_average" => SigmaMode::CellAverage,
        other => {
            return Err(CliError::Config(format!(
                "mode: expected \"cesaro\" or \"cell_average\", got {other:?}"
            )))
        }
    };
    let spec = KernelSpec::new(args.amplitude, args.zeta)
        .map_err(|e| CliError::Config(e.to_string()))?;
    let params = match args.oversample {
        Some(os) => PeriodizationParams::with_oversample(&spec, args.p, args.m, os),
        None => PeriodizationParams::new(&spec, args.p, args.m),
    }
    .map_err(|e| CliError::Config(e.to_string()))?;
    let grid = Grid::new(args.p, args.n).map_err(|e| CliError::Config(e.to_string()))?;
    let kernel = SmoothedKernel::build(&spec, &params, &grid, mode)
        .map_err(|e| CliError::Failure(e.to_string()))?;

    let dir = resolve_out_dir(&args.out_dir);
    let node_samples = kernel.node_samples();
    let report = Json::obj(vec![
        ("P", Json::Num(args.p)),
        ("M", Json::Int(args.m as i64)),
        ("N", Json::Int(args.n as i64)),
        ("mode", Json::Str(mode.as_str().into())),
        ("coeffs", Json::num_array(kernel.coeffs())),
        ("samples", Json::num_array(&node_samples)),
        ("l1_discrete", Json::Num(kernel.l1_discrete())),
        ("max_coeff", Json::Num(kernel.max_coeff())),
        ("tail_integral", Json::Num(kernel.tail_integral())),
    ]);
    write_atomic(&dir.join("kernel_report.json"), &report.render())?;
    let csv = csv_body(
        &["x_j", "sigma_j"],
        node_samples
            .iter()
            .enumerate()
            .map(|(i, &s)| vec![format_f64(grid.node_x(i)), format_f64(s)]),
    );
    write_atomic(&dir.join("kernel_samples.csv"), &csv)?;
    println!(
        "kernel-inspect: M = {}, N = {}, l1_discrete = {:.6e} (bound {:.6e}), max coeff = {:.3e}",
        args.m,
        args.n,
        kernel.l1_discrete(),
        5.0 * kernel.kernel_l1(),
        kernel.max_coeff()
    );
    Ok(())
}

fn entropy_report(args: &EntropyReportArgs, seed: Option<u64>) -> Result<(), CliError> {
    let config = load_config(&args.config)?;
    let artifacts = runner::run(&config)?;
    let dir = resolve_out_dir(args.out_dir.as_deref().unwrap_or(Path::new(&config.output.dir)));
    write_atomic(
        &dir.join("entropy_report.csv"),
        &runner::records_csv(&artifacts.records),
    )?;
    write_outputs_with_seed(&artifacts, &dir, seed)?;
    let last = artifacts.records.last().expect("run produced records");
    println!(
        "entropy-report: {} rows, final entropy = {:.6e}, final TV = {:.6e}",
        artifacts.records.len(),
        last.entropy,
        last.tv
    );
    if artifacts.violation_count() > 0 {
        return Err(CliError::Failure(format!(
            "{} bound violations recorded; see manifest",
            artifacts.violation_count()
        )));
    }
    Ok(())
}

fn experiment(args: &ExperimentArgs, threads: usize) -> Result<(), CliError> {
    let ExperimentAction::Run(run_args) = &args.action;
    let out_root = resolve_out_dir(&run_args.out_dir);
    let base_override = match &run_args.config {
        Some(_) => Some(load_config(&run_args.config)?),
        None => None,
    };
    match run_args.name.as_str() {
        "table2" => {
            let subset: Option<Vec<f64>> = match &run_args.subset {
                None => None,
                Some(s) => Some(
                    s.split(',')
                        .map(|tok| {
                            tok.trim().parse::<f64>().map_err(|_| {
                                CliError::Config(format!("subset: {tok:?} is not a number"))
                            })
                        })
                        .collect::<Result<_, _>>()?,
                ),
            };
            let mut plan = ExperimentPlan::table2(subset.as_deref(), &out_root.join("table2"));
            if let Some(base) = base_override {
                plan.base = base;
            }
            let report = run_domain_sweep(&plan, threads)?;
            for row in &report.rows {
                println!(
                    "table2 P = {:>5}: sup = {:.4e}{}",
                    row.p,
                    row.final_sup,
                    match (row.expected, row.within_tol) {
                        (Some(e), Some(ok)) =>
                            format!(", expected {:.4e}: {}", e, if ok { "PASS" } else { "FAIL" }),
                        _ => String::new(),
                    }
                );
            }
            finish(report.pass)
        }
        "figures12" => {
            let mut plan = ExperimentPlan::figures12(&out_root.join("figures12"));
            if let Some(base) = base_override {
                plan.base = base;
            }
            let report = run_long_horizon(&plan)?;
            println!(
                "figures12: TV(u) {:.4e} -> {:.4e}, min(theta + L^P) = {:.3e}: {}",
                report.tv_initial,
                report.tv_final,
                report.min_shifted_gradient,
                if report.pass { "PASS" } else { "FAIL" }
            );
            finish(report.pass)
        }
        "sigma-compare" => {
            let mut plan = ExperimentPlan::sigma_compare(&out_root.join("sigma-compare"));
            if let Some(base) = base_override {
                plan.base = base;
            }
            let report = run_sigma_mode_comparison(&plan)?;
            println!(
                "sigma-compare: gap = {:.4e} (bound {:.4e}), halved-dx gap = {:.4e}, wall cesaro {:.2}s vs cell_average {:.2}s: {}",
                report.gap,
                report.gap_bound,
                report.gap_fine,
                report.wall_cesaro,
                report.wall_cell_average,
                if report.pass { "PASS" } else { "FAIL" }
            );
            finish(report.pass)
        }
        "refinement" => {
            let mut plan = ExperimentPlan::refinement(&out_root.join("refinement"));
            if let Some(base) = base_override {
                plan.base = base;
            }
            let report = run_refinement(&plan)?;
            println!(
                "refinement: gaps {:?}, ratios {:?}: {}",
                report.gaps,
                report.ratios,
                if report.pass { "PASS" } else { "FAIL" }
            );
            finish(report.pass)
        }
        other => Err(CliError::Config(format!(
            "unknown experiment {other:?}; names: table2, figures12, sigma-compare, refinement"
        ))),
    }
}

fn finish(pass: bool) -> Result<(), CliError> {
    if pass {
        Ok(())
    } else {
        Err(CliError::Failure("experiment reference check failed".into()))
    }
}
