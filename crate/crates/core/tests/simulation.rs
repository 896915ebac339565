//! Driver-level checks: bitwise restart determinism, agreement with an
//! independent RK4 integration of the same semi-discrete system, adaptive
//! stepping consistency, the velocity bound, and the modulus-of-continuity
//! probe.

mod common;

use disloc_core::diagnostics::modulus_probe;
use disloc_core::grid::{discrete_gradient, project_initial, Grid, InitialProfile};
use disloc_core::kernel::{KernelSpec, PeriodizationParams, SigmaMode, SmoothedKernel};
use disloc_core::scheme::{
    advance_adaptive, advance_uniform, q1_reconstruct, velocity, SchemeConfig, State, TimeMode,
    VelocityMode,
};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn setup(p: f64, n: usize, m: usize) -> (Grid, SmoothedKernel, State) {
    let spec = KernelSpec::new(1.0, 1.0).unwrap();
    let params = PeriodizationParams::new(&spec, p, m).unwrap();
    let grid = Grid::new(p, n).unwrap();
    let kernel = SmoothedKernel::build(&spec, &params, &grid, SigmaMode::Cesaro).unwrap();
    let initial = project_initial(&InitialProfile::arctan(), &grid).unwrap();
    (grid, kernel, initial)
}

#[test]
fn restart_is_bitwise_deterministic() {
    let (grid, kernel, initial) = setup(10.0, 40, 20);
    let dt = 0.01;
    let full_config = SchemeConfig {
        dt,
        t_final: 10.0 * dt,
        ..SchemeConfig::default()
    };
    let mut mid: Option<Vec<u8>> = None;
    let full = advance_uniform(&initial, &kernel, &grid, &full_config, &mut |s, _| {
        if s.n == 5 {
            mid = Some(s.to_bytes());
        }
    })
    .unwrap();

    let restored = State::from_bytes(&mid.expect("state at step 5 captured")).unwrap();
    assert_eq!(restored.n, 5);
    let resumed = advance_uniform(&restored, &kernel, &grid, &full_config, &mut |_, _| {}).unwrap();
    assert_eq!(resumed.n, 10);
    // bitwise identity, not approximate agreement
    assert_eq!(resumed.u, full.u);
    assert_eq!(resumed.t.to_bits(), full.t.to_bits());
}

/// RK4 integration of the same upwind semi-discrete system
/// du_i/dt = λ_i[u]_+ θ_{i+1/2} − λ_i[u]_− θ_{i−1/2} + L^P λ_i[u].
fn rk4_reference(initial: &State, kernel: &SmoothedKernel, grid: &Grid, t_final: f64, dt: f64) -> Vec<f64> {
    let ring = grid.ring();
    let l_p = initial.l_p;
    let rhs = |u: &Vec<f64>| -> Vec<f64> {
        let state = State {
            n: 0,
            t: 0.0,
            u: u.clone(),
            l_p,
        };
        let lambda = velocity(u, kernel, grid, VelocityMode::Fft).unwrap().lambda;
        let theta = discrete_gradient(&state, grid);
        (0..ring)
            .map(|i| {
                let lam = lambda[i];
                let plus = 0.5 * (lam + lam.abs());
                let minus = 0.5 * (lam.abs() - lam);
                plus * theta[i] - minus * theta[(i + ring - 1) % ring] + l_p * lam
            })
            .collect()
    };
    let mut u = initial.u.clone();
    let steps = (t_final / dt).round() as usize;
    for _ in 0..steps {
        let k1 = rhs(&u);
        let u2: Vec<f64> = u.iter().zip(&k1).map(|(a, b)| a + 0.5 * dt * b).collect();
        let k2 = rhs(&u2);
        let u3: Vec<f64> = u.iter().zip(&k2).map(|(a, b)| a + 0.5 * dt * b).collect();
        let k3 = rhs(&u3);
        let u4: Vec<f64> = u.iter().zip(&k3).map(|(a, b)| a + dt * b).collect();
        let k4 = rhs(&u4);
        for i in 0..ring {
            u[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    u
}

#[test]
fn stepper_agrees_with_independent_rk4_at_first_order() {
    let (grid, kernel, initial) = setup(10.0, 40, 20);
    let t_final = 2.0;
    let reference = rk4_reference(&initial, &kernel, &grid, t_final, 5e-4);

    let gap_at = |dt: f64| -> f64 {
        let config = SchemeConfig {
            dt,
            t_final,
            ..SchemeConfig::default()
        };
        let out = advance_uniform(&initial, &kernel, &grid, &config, &mut |_, _| {}).unwrap();
        out.u
            .iter()
            .zip(reference.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max)
    };
    let g1 = gap_at(0.02);
    let g2 = gap_at(0.01);
    assert!(g1 < 0.05, "IMEX vs RK4 gap too large: {g1}");
    assert!(g2 < g1, "halving dt did not reduce the gap: {g1} -> {g2}");
    let ratio = g1 / g2;
    assert!(
        (1.4..=2.6).contains(&ratio),
        "time-discretization error not first order: ratio {ratio}"
    );
}

#[test]
fn adaptive_run_matches_uniform_reference() {
    let (grid, kernel, initial) = setup(10.0, 50, 25);
    let t_final = 1.0;
    let adaptive_config = SchemeConfig {
        dt: 0.02,
        t_final,
        time_mode: TimeMode::Adaptive,
        ..SchemeConfig::default()
    };
    let mut dts: Vec<f64> = Vec::new();
    let adaptive = advance_adaptive(&initial, &kernel, &grid, &adaptive_config, &mut |s, st| {
        if s.n > 0 {
            dts.push(st.dt);
        }
    })
    .unwrap();
    assert!((adaptive.t - t_final).abs() < 1e-12);
    let dt_min = dts.iter().cloned().fold(f64::INFINITY, f64::min);
    // dt shrinks along the run and never grows
    assert!(dts.windows(2).all(|w| w[1] <= w[0] + 1e-15));

    let n_t = (t_final / dt_min).ceil() as usize;
    let uniform_config = SchemeConfig {
        dt: t_final / n_t as f64,
        t_final,
        ..SchemeConfig::default()
    };
    let uniform = advance_uniform(&initial, &kernel, &grid, &uniform_config, &mut |_, _| {}).unwrap();
    let gap = adaptive
        .u
        .iter()
        .zip(uniform.u.iter())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max);
    let dt_max_used = dts.iter().cloned().fold(0.0f64, f64::max);
    assert!(
        gap <= 10.0 * dt_max_used,
        "adaptive vs uniform gap {gap} above 10·dt = {}",
        10.0 * dt_max_used
    );
}

#[test]
fn first_step_identity_at_reference_resolution() {
    // One step of the long-horizon reference setup (P=50, N=500, M=400,
    // dt=0.02): the convex-combination identity for the shifted gradient must
    // hold componentwise at 1e-10 with the weights rebuilt from the
    // converged velocity.
    let (grid, kernel, initial) = setup(50.0, 500, 400);
    let config = SchemeConfig {
        dt: 0.02,
        t_final: 0.02,
        ..SchemeConfig::default()
    };
    let (next, stats) =
        disloc_core::scheme::fixed_point_step(&initial, &kernel, &grid, &config).unwrap();
    assert!(stats.contraction < 1.0);
    let lambda = velocity(&next.u, &kernel, &grid, VelocityMode::Fft).unwrap().lambda;
    let theta_prev = discrete_gradient(&initial, &grid);
    let theta_next = discrete_gradient(&next, &grid);
    let ring = grid.ring();
    let r = config.dt / grid.dx();
    let l_p = initial.l_p;
    let mut worst = 0.0f64;
    for i in 0..ring {
        let plus = |x: f64| 0.5 * (x + x.abs());
        let minus = |x: f64| 0.5 * (x.abs() - x);
        let a1 = r * plus(lambda[(i + 1) % ring]);
        let a2 = r * minus(lambda[i]);
        let a3 = 1.0 - r * (plus(lambda[i]) + minus(lambda[(i + 1) % ring]));
        let rebuilt = a1 * (theta_prev[(i + 1) % ring] + l_p)
            + a2 * (theta_prev[(i + ring - 1) % ring] + l_p)
            + a3 * (theta_prev[i] + l_p);
        worst = worst.max(((theta_next[i] + l_p) - rebuilt).abs());
    }
    assert!(worst <= 1e-10, "identity defect {worst}");
}

#[test]
fn velocity_bound_on_random_vectors() {
    let (grid, kernel, _) = setup(10.0, 32, 16);
    let mut rng = ChaCha8Rng::seed_from_u64(common::SEED ^ 0xbeef);
    let limit = 5.0 * kernel.kernel_l1();
    for _ in 0..200 {
        let v: Vec<f64> = (0..grid.ring()).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let sup_v = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let lam = velocity(&v, &kernel, &grid, VelocityMode::Fft).unwrap().lambda;
        let sup_l = lam.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        assert!(
            sup_l <= limit * sup_v + 1e-9,
            "velocity bound violated: {sup_l} > {limit}·{sup_v}"
        );
    }
}

#[test]
fn modulus_probe_statistic_is_recorded() {
    let (grid, kernel, initial) = setup(10.0, 40, 20);
    let config = SchemeConfig {
        dt: 0.01,
        t_final: 1.0,
        ..SchemeConfig::default()
    };
    let mut states = Vec::new();
    advance_uniform(&initial, &kernel, &grid, &config, &mut |s, _| states.push(s.clone())).unwrap();
    let coarse = modulus_probe(&states, &grid, 0.5, 0.5).unwrap();
    let fine = modulus_probe(&states, &grid, 0.25, 0.25).unwrap();
    assert!(coarse.is_finite() && coarse > 0.0);
    assert!(fine.is_finite() && fine > 0.0);
    println!("modulus probe: omega-normalized sup at (0.5, 0.5) = {coarse:.4}, at (0.25, 0.25) = {fine:.4}");
}

#[test]
fn q1_reconstruction_refines_consistently() {
    // Two runs of the same problem at (dx, dt) and (dx/2, dt/2): the coarse
    // reconstruction gap shrinks under refinement.
    let spec = KernelSpec::new(1.0, 1.0).unwrap();
    let run = |n: usize, dt: f64, every: usize| -> (Grid, Vec<State>) {
        let params = PeriodizationParams::new(&spec, 10.0, 10).unwrap();
        let grid = Grid::new(10.0, n).unwrap();
        let kernel = SmoothedKernel::build(&spec, &params, &grid, SigmaMode::Cesaro).unwrap();
        let initial = project_initial(&InitialProfile::arctan(), &grid).unwrap();
        let config = SchemeConfig {
            dt,
            t_final: 0.5,
            ..SchemeConfig::default()
        };
        let mut states = Vec::new();
        advance_uniform(&initial, &kernel, &grid, &config, &mut |s, _| {
            if s.n % every == 0 {
                states.push(s.clone());
            }
        })
        .unwrap();
        (grid, states)
    };
    let (g0, s0) = run(20, 0.025, 1);
    let (g1, s1) = run(40, 0.0125, 2);
    let (g2, s2) = run(80, 0.00625, 4);
    let sup_gap = |ga: &Grid, sa: &[State], gb: &Grid, sb: &[State]| -> f64 {
        let mut sup = 0.0f64;
        for s in sa {
            for i in 0..g0.ring() {
                let x = g0.node_x(i);
                let va = q1_reconstruct(sa, ga, x, s.t).unwrap();
                let vb = q1_reconstruct(sb, gb, x, s.t).unwrap();
                sup = sup.max((va - vb).abs());
            }
        }
        sup
    };
    let gap01 = sup_gap(&g0, &s0, &g1, &s1);
    let gap12 = sup_gap(&g1, &s1, &g2, &s2);
    assert!(gap12 < gap01, "refinement gaps not decreasing: {gap01} -> {gap12}");
}
