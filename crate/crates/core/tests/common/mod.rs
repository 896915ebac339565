//! Shared helpers for the integration suites: seeded random nondecreasing
//! profiles, strict-bound time-step selection, and run collection.
//!
//! Compiled once per test binary; not every binary uses every helper.
#![allow(dead_code)]

use disloc_core::config::{OutputCfg, RunConfig};
use disloc_core::diagnostics::{discrete_entropy, total_variation, DiagnosticsRecord};
use disloc_core::grid::{mean_slope, project_initial, Grid, InitialProfile};
use disloc_core::kernel::{KernelSpec, PeriodizationParams, SigmaMode, SmoothedKernel};
use disloc_core::scheme::{advance_uniform, cfl_bounds, CflMode, SchemeConfig, State, VelocityMode};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const SEED: u64 = 0x_d15_10c; // fixed corpus seed, recorded here

/// Random bounded nondecreasing piecewise-linear profile with sup ≤ 1,
/// including flat stretches.
pub fn random_profile(rng: &mut ChaCha8Rng) -> InitialProfile {
    let breakpoints = rng.gen_range(3usize..=9);
    let mut x = rng.gen_range(-14.0..-8.0);
    let mut value: f64 = rng.gen_range(0.0..0.2);
    let mut pairs = Vec::with_capacity(breakpoints);
    for _ in 0..breakpoints {
        pairs.push((x, value));
        x += rng.gen_range(0.8..6.0);
        if rng.gen_bool(0.3) {
            // flat segment: exercises the zero-entropy branch
        } else {
            value += rng.gen_range(0.0..0.35);
        }
    }
    let sup = pairs.iter().fold(0.0f64, |m, &(_, v)| m.max(v.abs())).max(1e-9);
    if sup > 1.0 {
        for (_, v) in &mut pairs {
            *v /= sup;
        }
    }
    InitialProfile::from_table(pairs).expect("generated table is admissible")
}

/// Exact sup over [−P, P] of |v₀(x) − L^P x| for a piecewise-linear profile:
/// extrema sit at breakpoints and interval ends.
pub fn projected_sup(profile: &InitialProfile, p: f64) -> f64 {
    let l = mean_slope(profile, p);
    let mut candidates = vec![-p, p];
    if let InitialProfile::Table { xs, .. } = profile {
        candidates.extend(xs.iter().copied().filter(|x| x.abs() < p));
    }
    candidates
        .into_iter()
        .map(|x| (profile.eval(x) - l * x).abs())
        .fold(0.0f64, f64::max)
}

/// One randomized strict-CFL trajectory with its per-step diagnostics.
pub struct RandomRun {
    pub records: Vec<DiagnosticsRecord>,
    pub step_stats_dt: f64,
    pub l_p: f64,
    pub k_l1: f64,
    pub tv0: f64,
    pub entropy0: f64,
    pub sup0: f64,
    pub growth: f64,
    pub t_final: f64,
}

/// Run one random profile at P = 10, T = 1 under the strict time-step bounds.
pub fn random_strict_run(rng: &mut ChaCha8Rng) -> RandomRun {
    let p = 10.0;
    let t_final = 1.0;
    let spec = KernelSpec::new(1.0, 1.0).unwrap();
    let k_l1 = spec.l1_norm();
    let profile = random_profile(rng);
    let m = rng.gen_range(4usize..=16);
    let n = rng.gen_range(m.max(20)..=40);
    let grid = Grid::new(p, n).unwrap();
    let params = PeriodizationParams::new(&spec, p, m).unwrap();
    let kernel = SmoothedKernel::build(&spec, &params, &grid, SigmaMode::Cesaro).unwrap();
    let initial = project_initial(&profile, &grid).unwrap();

    let sup_cont = projected_sup(&profile, p);
    let bounds = cfl_bounds(sup_cont, initial.l_p, k_l1, t_final);
    let dt_cap = 0.9 * bounds.dt_max.min(grid.dx() * bounds.ratio_max);
    let n_t = (t_final / dt_cap).ceil().max(1.0) as usize;
    let dt = t_final / n_t as f64;

    let config = SchemeConfig {
        dt,
        t_final,
        cfl_mode: CflMode::StrictPaper,
        velocity_mode: VelocityMode::Fft,
        ..SchemeConfig::default()
    };
    let mut records = Vec::with_capacity(n_t + 1);
    advance_uniform(&initial, &kernel, &grid, &config, &mut |state, stats| {
        records.push(DiagnosticsRecord::new(state, &grid, stats));
    })
    .expect("strict-CFL run must succeed");

    RandomRun {
        records,
        step_stats_dt: dt,
        l_p: initial.l_p,
        k_l1,
        tv0: total_variation(&initial),
        entropy0: discrete_entropy(&initial, &grid),
        sup0: initial.sup_norm(),
        growth: (10.0 * initial.l_p * t_final * k_l1).exp(),
        t_final,
    }
}

pub fn corpus(count: usize) -> Vec<RandomRun> {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    (0..count).map(|_| random_strict_run(&mut rng)).collect()
}

/// A quickly-solvable configuration used by driver-level tests.
pub fn small_config() -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.domain.p = 10.0;
    cfg.domain.n = 50;
    cfg.smoothing.m = 25;
    cfg.time.dt = 0.02;
    cfg.time.t_final = 1.0;
    cfg.output = OutputCfg {
        every_k_steps: 1,
        dir: "out".into(),
    };
    cfg
}

/// Collect the full state trajectory of a uniform run.
pub fn trajectory(
    initial: &State,
    kernel: &SmoothedKernel,
    grid: &Grid,
    config: &SchemeConfig,
) -> Vec<(State, disloc_core::scheme::StepStats)> {
    let mut out = Vec::new();
    advance_uniform(initial, kernel, grid, config, &mut |s, st| {
        out.push((s.clone(), *st));
    })
    .expect("run failed");
    out
}
