//! Discrete estimates attached to the scheme: total variation, gradient
//! entropy, Zygmund (L log L) norms, DFT sign reports, and a
//! modulus-of-continuity probe.
//!
//! The entropy density is the nonnegative convex glue
//!
//! ```text
//! f(x) = x ln x + 1/e   for x ≥ 1/e,        f(x) = 0   for 0 ≤ x ≤ 1/e,
//! ```
//!
//! and the discrete gradient entropy of a state is `Σ_i Δx f(θ_{i+1/2} + L^P)`.
//! Along the scheme it can grow at most by an explicit source per step,
//!
//! ```text
//! Δ entropy ≤ 5 Δt ‖K‖₁ e^{10 L^P T ‖K‖₁} TV(u⁰) (1/(e ln 2) + L^P),
//! ```
//!
//! which accumulated over [0, T] gives the run constant of
//! [`entropy_growth_run`]; the worst case over all admissible slopes replaces
//! L^P by ‖v₀‖∞ ([`entropy_growth_worst_case`]).

use crate::dft::dft_coefficients;
use crate::grid::{discrete_gradient, Grid};
use crate::kernel::SmoothedKernel;
use crate::scheme::{q1_reconstruct, SchemeError, State, StepStats};

/// Slack for the per-step and cumulative entropy inequalities.
pub const ENTROPY_SLACK: f64 = 1e-9;

/// Entropy density f: zero below 1/e, `x ln x + 1/e` above; continuous,
/// convex and nonnegative.
///
/// # Panics
///
/// Panics on negative input; callers clamp roundoff-negative gradients first.
pub fn entropy_density(x: f64) -> f64 {
    assert!(x >= 0.0, "entropy density needs a nonnegative argument, got {x}");
    let e_inv = 1.0 / std::f64::consts::E;
    if x <= e_inv {
        0.0
    } else {
        x * x.ln() + e_inv
    }
}

/// Discrete gradient entropy `Σ_i Δx f(θ_{i+1/2} + L^P)`. Shifted gradients
/// in [−1e−12, 0) are clamped to zero; anything lower is a positivity
/// violation upstream and panics here.
pub fn discrete_entropy(state: &State, grid: &Grid) -> f64 {
    let theta = discrete_gradient(state, grid);
    theta
        .iter()
        .map(|t| {
            let shifted = t + state.l_p;
            assert!(
                shifted >= -1e-12,
                "shifted gradient {shifted} below positivity slack"
            );
            grid.dx() * entropy_density(shifted.max(0.0))
        })
        .sum()
}

/// Ring total variation `Σ_i |u_{i+1} − u_i|`, wrap pair included.
pub fn total_variation(state: &State) -> f64 {
    let u = &state.u;
    let ring = u.len();
    (0..ring).map(|i| (u[(i + 1) % ring] - u[i]).abs()).sum()
}

/// Ring total variation of the tilted profile u + L^P x (the physically
/// plotted quantity; its seam jump is 2P·L^P unless u cancels it).
pub fn total_variation_profile(state: &State, grid: &Grid) -> f64 {
    let u = &state.u;
    let ring = u.len();
    (0..ring)
        .map(|i| {
            let a = u[i] + state.l_p * grid.node_x(i);
            let j = (i + 1) % ring;
            // The periodic extension of u evaluated at x_{i+1}; at the seam the
            // tilt continues past +P rather than jumping back to −P.
            let xb = grid.node_x(i) + grid.dx();
            let b = u[j] + state.l_p * xb;
            (b - a).abs()
        })
        .sum()
}

/// Cumulative entropy-growth constant of one run:
/// `ζ = 5 T ‖K‖₁ e^{10 L^P T ‖K‖₁} (1/(e ln 2) + L^P)`.
pub fn entropy_growth_run(t_final: f64, k_l1: f64, l_p: f64) -> f64 {
    5.0 * t_final
        * k_l1
        * (10.0 * l_p * t_final * k_l1).exp()
        * (1.0 / (std::f64::consts::E * std::f64::consts::LN_2) + l_p)
}

/// Worst case of [`entropy_growth_run`] over all periods P ≥ 1, obtained by
/// replacing L^P with its bound ‖v₀‖∞:
/// `ζ₀ = 5 T ‖K‖₁ e^{10 T ‖v₀‖∞ ‖K‖₁} (1/(e ln 2) + ‖v₀‖∞)`.
pub fn entropy_growth_worst_case(t_final: f64, k_l1: f64, v0_sup: f64) -> f64 {
    entropy_growth_run(t_final, k_l1, v0_sup)
}

/// Allowed entropy increment of a single step of size Δt.
pub fn entropy_step_bound(dt: f64, t_final: f64, k_l1: f64, l_p: f64, tv0: f64) -> f64 {
    5.0 * dt
        * k_l1
        * (10.0 * l_p * t_final * k_l1).exp()
        * tv0
        * (1.0 / (std::f64::consts::E * std::f64::consts::LN_2) + l_p)
}

/// Result of the DFT sign check on a sample vector.
#[derive(Debug, Clone, Copy)]
pub struct DftSignReport {
    /// Largest real part over all DFT coefficients.
    pub max_real: f64,
    /// Largest imaginary magnitude.
    pub max_imag_abs: f64,
    pub pass: bool,
}

/// Check that the DFT coefficients `c^d_j = (1/2N) Σ_l σ_l e^{−iπjl/N}` of an
/// offset-indexed sample vector are real nonpositive numbers within 1e-12.
/// For Cesàro-mode kernels on rings with 2N ≥ 2M−1 this is guaranteed by the
/// coefficient signs; the report form lets callers decide what to do.
pub fn dft_sign_check_samples(samples: &[f64]) -> DftSignReport {
    let hat = dft_coefficients(samples);
    let mut max_real = f64::NEG_INFINITY;
    let mut max_imag_abs = 0.0f64;
    for c in &hat {
        max_real = max_real.max(c.re);
        max_imag_abs = max_imag_abs.max(c.im.abs());
    }
    DftSignReport {
        max_real,
        max_imag_abs,
        pass: max_real <= 1e-12 && max_imag_abs <= 1e-12,
    }
}

/// [`dft_sign_check_samples`] applied to a smoothed kernel's samples.
pub fn dft_sign_check(kernel: &SmoothedKernel) -> DftSignReport {
    dft_sign_check_samples(kernel.samples())
}

/// Zygmund (L log L) norm of a nonnegative grid function by the Luxemburg
/// recipe: the unique μ > 0 with `Σ Δx (w/μ) ln(e + w/μ) = 1` (the map is
/// strictly decreasing in μ). Midpoint quadrature on the grid; bisection to
/// relative tolerance 1e-8. Returns 0 for w ≡ 0.
pub fn zygmund_norm(w: &[f64], dx: f64) -> f64 {
    assert!(w.iter().all(|&x| x >= 0.0), "Zygmund norm needs w >= 0");
    let phi = |mu: f64| -> f64 {
        w.iter()
            .map(|&x| dx * (x / mu) * (std::f64::consts::E + x / mu).ln())
            .sum()
    };
    let l1: f64 = w.iter().map(|&x| dx * x).sum();
    if l1 == 0.0 {
        return 0.0;
    }
    // Φ(‖w‖₁) ≥ 1, so the root lies above; double/halve to bracket.
    let mut lo = l1;
    let mut hi = l1;
    while phi(hi) > 1.0 {
        hi *= 2.0;
    }
    while phi(lo) < 1.0 {
        lo *= 0.5;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if phi(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo) < 1e-8 * hi {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Two-sided comparison between the entropy integral and the Zygmund norm of
/// a nonnegative grid function:
///
/// ```text
/// ∫ f(w) ≤ 1 + ‖w‖_{LlogL} + ‖w‖_{L¹} ln(1 + ‖w‖_{LlogL}),
/// ‖w‖_{LlogL} ≤ 1 + ‖w‖_{L¹} ln(1 + e²) + ∫ f(w).
/// ```
#[derive(Debug, Clone, Copy)]
pub struct EntropyZygmundReport {
    pub entropy_integral: f64,
    pub l1: f64,
    pub llogl: f64,
    pub upper_holds: bool,
    pub lower_holds: bool,
}

impl EntropyZygmundReport {
    pub fn pass(&self) -> bool {
        self.upper_holds && self.lower_holds
    }
}

pub fn entropy_zygmund_check(w: &[f64], dx: f64) -> EntropyZygmundReport {
    let entropy_integral: f64 = w.iter().map(|&x| dx * entropy_density(x)).sum();
    let l1: f64 = w.iter().map(|&x| dx * x).sum();
    let llogl = zygmund_norm(w, dx);
    let slack = 1e-9;
    let upper_holds = entropy_integral <= 1.0 + llogl + l1 * (1.0 + llogl).ln() + slack;
    let lower_holds =
        llogl <= 1.0 + l1 * (1.0 + std::f64::consts::E.powi(2)).ln() + entropy_integral + slack;
    EntropyZygmundReport {
        entropy_integral,
        l1,
        llogl,
        upper_holds,
        lower_holds,
    }
}

/// Largest ratio |u(x+γ, t+h) − u(x, t)| / ω(γ, h) over the sampled run, with
/// `ω(γ,h) = 1/ln(1 + 1/γ) + 1/ln(1 + 1/h)`. A monitored statistic: the
/// theoretical constant in front of ω is not explicit, so nothing is asserted
/// against it.
pub fn modulus_probe(
    states: &[State],
    grid: &Grid,
    gamma: f64,
    h: f64,
) -> Result<f64, SchemeError> {
    if states.len() < 2 {
        return Err(SchemeError::InvalidConfig(
            "modulus probe needs at least two snapshots".into(),
        ));
    }
    if !(gamma > 0.0) || !(h > 0.0) {
        return Err(SchemeError::InvalidConfig("gamma and h must be positive".into()));
    }
    let omega = 1.0 / (1.0 + 1.0 / gamma).ln() + 1.0 / (1.0 + 1.0 / h).ln();
    let t_last = states[states.len() - 1].t;
    let mut sup = 0.0f64;
    for s in states {
        if s.t + h > t_last + 1e-12 {
            continue;
        }
        for i in 0..grid.ring() {
            let x = grid.node_x(i);
            let a = s.u[i];
            let b = q1_reconstruct(states, grid, x + gamma, s.t + h)?;
            sup = sup.max((b - a).abs());
        }
    }
    Ok(sup / omega)
}

/// Per-step diagnostics record: the quantities of the discrete estimates plus
/// solver statistics and any violated named bounds.
#[derive(Debug, Clone)]
pub struct DiagnosticsRecord {
    pub n: usize,
    pub t: f64,
    /// TV(u), the quantity bounded by the discrete estimates.
    pub tv: f64,
    /// TV(u + L^P x), the plotted profile variation.
    pub tv_profile: f64,
    pub entropy: f64,
    pub sup_norm: f64,
    pub min_grad: f64,
    pub fp_iters: usize,
    pub contraction: f64,
    pub violations: Vec<String>,
}

impl DiagnosticsRecord {
    pub fn new(state: &State, grid: &Grid, stats: &StepStats) -> Self {
        Self {
            n: state.n,
            t: state.t,
            tv: total_variation(state),
            tv_profile: total_variation_profile(state, grid),
            entropy: discrete_entropy(state, grid),
            sup_norm: state.sup_norm(),
            min_grad: state.min_shifted_gradient(grid),
            fp_iters: stats.iterations,
            contraction: stats.contraction,
            violations: Vec::new(),
        }
    }
}

/// Per-run bounds against which a stream of records is checked; violations
/// are collected by name into each record.
#[derive(Debug, Clone, Copy)]
pub struct BoundChecker {
    pub tv0: f64,
    pub entropy0: f64,
    pub sup0: f64,
    pub growth: f64,
    pub l_p: f64,
    pub k_l1: f64,
    pub t_final: f64,
    pub positivity_slack: f64,
}

impl BoundChecker {
    pub fn new(initial: &State, grid: &Grid, kernel: &SmoothedKernel, t_final: f64) -> Self {
        Self {
            tv0: total_variation(initial),
            entropy0: discrete_entropy(initial, grid),
            sup0: initial.sup_norm(),
            growth: (10.0 * initial.l_p * t_final * kernel.kernel_l1()).exp(),
            l_p: initial.l_p,
            k_l1: kernel.kernel_l1(),
            t_final,
            positivity_slack: 1e-12,
        }
    }

    /// Check one record against the positivity, L∞, TV, per-step TV, per-step
    /// entropy and cumulative entropy estimates. `prev` carries the previous
    /// record (None on the initial one).
    pub fn check(&self, record: &mut DiagnosticsRecord, prev: Option<&DiagnosticsRecord>, dt: f64) {
        if record.min_grad < -self.positivity_slack {
            record.violations.push("positivity".into());
        }
        if record.sup_norm > self.sup0 * self.growth + 1e-9 {
            record.violations.push("sup_bound".into());
        }
        if record.tv > self.tv0 * self.growth + 1e-9 {
            record.violations.push("tv_bound".into());
        }
        if record.entropy > self.entropy0 + entropy_growth_run(self.t_final, self.k_l1, self.l_p) * self.tv0 + ENTROPY_SLACK {
            record.violations.push("entropy_cumulative".into());
        }
        if let Some(prev) = prev {
            let shrink = 1.0 - 5.0 * self.l_p * dt * self.k_l1;
            if record.tv * shrink > prev.tv + 1e-10 {
                record.violations.push("tv_step".into());
            }
            let step_bound = entropy_step_bound(dt, self.t_final, self.k_l1, self.l_p, self.tv0);
            if record.entropy - prev.entropy > step_bound + ENTROPY_SLACK {
                record.violations.push("entropy_step".into());
            }
        }
    }
}
