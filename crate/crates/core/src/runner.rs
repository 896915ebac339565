//! Assembles a full run from a [`RunConfig`]: build kernel, grid and initial
//! state, advance in time collecting per-step diagnostics and snapshots, and
//! write the snapshot CSVs plus a run manifest.

use crate::config::{ProfileCfg, RunConfig};
use crate::diagnostics::{BoundChecker, DiagnosticsRecord};
use crate::grid::{discrete_gradient, project_initial, Grid, GridError, InitialProfile};
use crate::kernel::{KernelError, SmoothedKernel};
use crate::report::{csv_body, format_f64, write_atomic, Json};
use crate::scheme::{
    advance_adaptive, advance_uniform, cfl_bounds, CflBounds, SchemeError, State, TimeMode,
};
use std::path::{Path, PathBuf};
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Scheme(#[from] SchemeError),
    #[error("cannot read profile table {path}: {source}")]
    ProfileIo {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("output error: {0}")]
    Io(#[from] std::io::Error),
}

/// Everything a finished run exposes to callers.
pub struct RunArtifacts {
    pub config: RunConfig,
    pub grid: Grid,
    pub kernel: SmoothedKernel,
    pub final_state: State,
    /// States kept every `output.every_k_steps` steps, initial and final
    /// always included.
    pub snapshots: Vec<State>,
    /// One record per time level, initial included.
    pub records: Vec<DiagnosticsRecord>,
    pub l_p: f64,
    pub k_l1: f64,
    pub cfl: CflBounds,
    pub cfl_dt_satisfied: bool,
    pub cfl_ratio_satisfied: bool,
    pub wall_seconds: f64,
}

impl RunArtifacts {
    /// sup_i |u_i + L^P x_i| of the final state, the scalar tracked by the
    /// domain-size sweep.
    pub fn final_profile_sup(&self) -> f64 {
        profile_sup(&self.final_state, &self.grid)
    }

    pub fn violation_count(&self) -> usize {
        self.records.iter().map(|r| r.violations.len()).sum()
    }
}

pub fn profile_sup(state: &State, grid: &Grid) -> f64 {
    state
        .u
        .iter()
        .enumerate()
        .map(|(i, &u)| (u + state.l_p * grid.node_x(i)).abs())
        .fold(0.0f64, f64::max)
}

pub fn load_profile(config: &RunConfig) -> Result<InitialProfile, RunError> {
    match &config.profile {
        ProfileCfg::Arctan => Ok(InitialProfile::arctan()),
        ProfileCfg::Table { path } => {
            let body = std::fs::read_to_string(path).map_err(|source| RunError::ProfileIo {
                path: PathBuf::from(path),
                source,
            })?;
            Ok(InitialProfile::from_csv_str(&body)?)
        }
    }
}

/// Run the configured simulation, collecting diagnostics on every step.
pub fn run(config: &RunConfig) -> Result<RunArtifacts, RunError> {
    run_with_profile(config, &load_profile(config)?)
}

pub fn run_with_profile(
    config: &RunConfig,
    profile: &InitialProfile,
) -> Result<RunArtifacts, RunError> {
    let spec = config.kernel_spec()?;
    let params = config.periodization()?;
    let grid = config.grid()?;
    let kernel = SmoothedKernel::build(&spec, &params, &grid, config.smoothing.mode)?;
    let initial = project_initial(profile, &grid)?;
    let scheme_config = config.scheme_config();

    let k_l1 = kernel.kernel_l1();
    let cfl = cfl_bounds(initial.sup_norm(), initial.l_p, k_l1, config.time.t_final);
    let cfl_dt_satisfied = config.time.dt < cfl.dt_max;
    let cfl_ratio_satisfied = config.time.dt / grid.dx() < cfl.ratio_max;

    let checker = BoundChecker::new(&initial, &grid, &kernel, config.time.t_final);
    let every_k = config.output.every_k_steps;
    let mut snapshots: Vec<State> = Vec::new();
    let mut records: Vec<DiagnosticsRecord> = Vec::new();

    let started = Instant::now();
    let mut hook = |state: &State, stats: &crate::scheme::StepStats| {
        let mut record = DiagnosticsRecord::new(state, &grid, stats);
        checker.check(&mut record, records.last(), stats.dt);
        records.push(record);
        if state.n % every_k == 0 {
            snapshots.push(state.clone());
        }
    };
    let final_state = match config.time.time_mode {
        TimeMode::Uniform => advance_uniform(&initial, &kernel, &grid, &scheme_config, &mut hook)?,
        TimeMode::Adaptive => advance_adaptive(&initial, &kernel, &grid, &scheme_config, &mut hook)?,
    };
    let wall_seconds = started.elapsed().as_secs_f64();
    if snapshots.last().map(|s| s.n) != Some(final_state.n) {
        snapshots.push(final_state.clone());
    }

    Ok(RunArtifacts {
        config: config.clone(),
        grid,
        kernel,
        final_state,
        snapshots,
        records,
        l_p: initial.l_p,
        k_l1,
        cfl,
        cfl_dt_satisfied,
        cfl_ratio_satisfied,
        wall_seconds,
    })
}

/// Snapshot CSV: one row per node with columns
/// `i, x_i, u_i, u_i + L^P x_i, theta_{i+1/2} + L^P`.
pub fn snapshot_csv(state: &State, grid: &Grid) -> String {
    let theta = discrete_gradient(state, grid);
    csv_body(
        &["i", "x_i", "u_i", "u_plus_lpx_i", "theta_plus_lp_i"],
        (0..grid.ring()).map(|i| {
            let x = grid.node_x(i);
            vec![
                i.to_string(),
                format_f64(x),
                format_f64(state.u[i]),
                format_f64(state.u[i] + state.l_p * x),
                format_f64(theta[i] + state.l_p),
            ]
        }),
    )
}

/// Per-step diagnostics CSV with columns
/// `n, t, tv, entropy, sup_norm, min_grad, fp_iters, contraction`.
pub fn records_csv(records: &[DiagnosticsRecord]) -> String {
    csv_body(
        &["n", "t", "tv", "entropy", "sup_norm", "min_grad", "fp_iters", "contraction"],
        records.iter().map(|r| {
            vec![
                r.n.to_string(),
                format_f64(r.t),
                format_f64(r.tv),
                format_f64(r.entropy),
                format_f64(r.sup_norm),
                format_f64(r.min_grad),
                r.fp_iters.to_string(),
                format_f64(r.contraction),
            ]
        }),
    )
}

/// Run manifest: the full configuration echo plus derived quantities and the
/// outcome summary.
pub fn manifest_json(artifacts: &RunArtifacts) -> Json {
    let violations: Vec<Json> = artifacts
        .records
        .iter()
        .filter(|r| !r.violations.is_empty())
        .flat_map(|r| {
            r.violations
                .iter()
                .map(move |v| Json::Str(format!("step {}: {}", r.n, v)))
        })
        .collect();
    Json::obj(vec![
        ("config", artifacts.config.to_json()),
        (
            "derived",
            Json::obj(vec![
                ("dx", Json::Num(artifacts.grid.dx())),
                ("n_t", Json::Int(artifacts.config.n_t() as i64)),
                ("l_p", Json::Num(artifacts.l_p)),
                ("kernel_l1", Json::Num(artifacts.k_l1)),
                ("tail_integral", Json::Num(artifacts.kernel.tail_integral())),
                ("sigma_l1_discrete", Json::Num(artifacts.kernel.l1_discrete())),
                (
                    "cfl",
                    Json::obj(vec![
                        ("dt_max", Json::Num(artifacts.cfl.dt_max)),
                        ("ratio_max", Json::Num(artifacts.cfl.ratio_max)),
                        ("dt_satisfied", Json::Bool(artifacts.cfl_dt_satisfied)),
                        ("ratio_satisfied", Json::Bool(artifacts.cfl_ratio_satisfied)),
                    ]),
                ),
            ]),
        ),
        (
            "result",
            Json::obj(vec![
                ("steps", Json::Int(artifacts.final_state.n as i64)),
                ("t_final", Json::Num(artifacts.final_state.t)),
                ("final_profile_sup", Json::Num(artifacts.final_profile_sup())),
                ("violations", Json::Arr(violations)),
                ("wall_time_s", Json::Num(artifacts.wall_seconds)),
            ]),
        ),
    ])
}

/// Write snapshots and the manifest under `dir`. Returns the manifest path.
pub fn write_outputs(artifacts: &RunArtifacts, dir: &Path) -> Result<PathBuf, RunError> {
    for snap in &artifacts.snapshots {
        let path = dir.join(format!("snapshot_{:08}.csv", snap.n));
        write_atomic(&path, &snapshot_csv(snap, &artifacts.grid))?;
    }
    let manifest = dir.join("run_manifest.json");
    write_atomic(&manifest, &manifest_json(artifacts).render())?;
    Ok(manifest)
}
