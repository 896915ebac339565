//! The physical kernel, its periodization and the Cesàro-smoothed
//! convolution weights.
//!
//! Starting from the Peierls–Nabarro kernel
//!
//! ```text
//! K(x) = A (x² − ζ²) / (x² + ζ²)²,
//! ```
//!
//! the construction runs: restrict K to [−P, P] and extend 2P-periodically
//! (K^P); subtract the Fejér correction `(2 F_{2M}(x)/P) ∫_{|x|≥P} |K|`
//! (giving K^P_M); take the Cesàro mean of order M of the Fourier series of
//! K^P_M (giving σ^P_M). The correction forces every Fourier coefficient of
//! σ^P_M to be a nonpositive real number, which is the structural property
//! the entropy estimate of the scheme rests on. The coefficients come out as
//!
//! ```text
//! c_m(σ^P_M) = (1 − |m|/M) (c_m(K^P) − (2/P)(1 − |m|/2M) ∫_{|x|≥P}|K|)   for |m| < M,
//! c_m(σ^P_M) = 0                                                          for |m| ≥ M.
//! ```
//!
//! Grid samples of σ^P_M are produced either by evaluating the truncated
//! Fourier series (mode `cesaro`) or from exact cell averages of K^P_M
//! convolved with Fejér point values (mode `cell_average`).

use crate::dft::{dft_coefficients, forward_real, DftPair};
use crate::grid::Grid;
use rustfft::num_complex::Complex64;
use std::f64::consts::PI;
use thiserror::Error;

/// Slack for the discrete L¹ bound `Σ Δx |σ_j| ≤ 5‖K‖₁`.
pub const L1_BOUND_SLACK: f64 = 1e-9;
/// Any Cesàro coefficient above this is treated as a sign-structure failure.
pub const COEFF_SIGN_SLACK: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum KernelError {
    #[error("invalid kernel spec: {0}")]
    InvalidSpec(String),
    #[error("invalid periodization parameters: {0}")]
    InvalidParams(String),
    #[error("closed-form tail requires P >= zeta (P = {p}, zeta = {zeta})")]
    TailFormulaDomain { p: f64, zeta: f64 },
    #[error("imaginary residue {max_abs:.3e} of Fourier coefficients exceeds 1e-8")]
    ImaginaryResidue { max_abs: f64 },
    #[error("Fourier quadrature not converged: doubling the fine grid moved a coefficient by {max_change:.3e}")]
    QuadratureNotConverged { max_change: f64 },
    #[error("Cesàro coefficient c_{m} = {value:.3e} is positive beyond slack; kernel violates the sign guarantee")]
    PositiveCoefficient { m: i64, value: f64 },
    #[error("grid too coarse: N = {n} must be at least the Cesàro order M = {m}")]
    GridTooCoarse { n: usize, m: usize },
    #[error("discrete L1 norm {l1:.6e} exceeds the guaranteed bound {limit:.6e}")]
    L1BoundViolated { l1: f64, limit: f64 },
}

/// The physical Peierls–Nabarro kernel `K(x) = A (x² − ζ²)/(x² + ζ²)²`.
///
/// `amplitude` collapses the elastic prefactor μb²/(2π(1−ν)); `zeta` is the
/// dislocation core size. K is even, integrates to zero over the line, and
/// changes sign exactly at |x| = ζ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    pub amplitude: f64,
    pub zeta: f64,
}

impl KernelSpec {
    pub fn new(amplitude: f64, zeta: f64) -> Result<Self, KernelError> {
        if !amplitude.is_finite() {
            return Err(KernelError::InvalidSpec(format!(
                "amplitude must be finite, got {amplitude}"
            )));
        }
        if !(zeta > 0.0) || !zeta.is_finite() {
            return Err(KernelError::InvalidSpec(format!(
                "zeta must be positive and finite, got {zeta}"
            )));
        }
        Ok(Self { amplitude, zeta })
    }

    /// Pointwise value `A (x² − ζ²)/(x² + ζ²)²`; even in x, zero at |x| = ζ.
    pub fn eval(&self, x: f64) -> f64 {
        let x2 = x * x;
        let z2 = self.zeta * self.zeta;
        let d = x2 + z2;
        self.amplitude * (x2 - z2) / (d * d)
    }

    /// Antiderivative `−A x/(x² + ζ²)`, vanishing at ±∞; hence ∫_R K = 0.
    pub fn antiderivative(&self, x: f64) -> f64 {
        -self.amplitude * x / (x * x + self.zeta * self.zeta)
    }

    /// `‖K‖_{L¹(R)} = 2|A|/ζ`: the kernel has one sign change at |x| = ζ and
    /// the two lobes each carry mass |A|/ζ.
    pub fn l1_norm(&self) -> f64 {
        2.0 * self.amplitude.abs() / self.zeta
    }

    /// `∫_{|x| ≥ P} |K| = 2|A|P/(P² + ζ²)`, valid for P ≥ ζ where K keeps a
    /// single sign. Smaller P is rejected rather than silently integrated.
    pub fn tail_integral(&self, p: f64) -> Result<f64, KernelError> {
        if !(p >= self.zeta) {
            return Err(KernelError::TailFormulaDomain { p, zeta: self.zeta });
        }
        Ok(2.0 * self.amplitude.abs() * p / (p * p + self.zeta * self.zeta))
    }
}

/// Parameters of the periodization: half-period P ≥ max(1, ζ), Cesàro order
/// M ≥ 1, the precomputed tail mass, and the oversampling factor used when
/// computing Fourier coefficients of K^P on a fine grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodizationParams {
    pub half_period: f64,
    pub cesaro_order: usize,
    pub tail_integral: f64,
    pub quadrature_oversample: usize,
}

pub const DEFAULT_OVERSAMPLE: usize = 16;

impl PeriodizationParams {
    pub fn new(spec: &KernelSpec, half_period: f64, cesaro_order: usize) -> Result<Self, KernelError> {
        Self::with_oversample(spec, half_period, cesaro_order, DEFAULT_OVERSAMPLE)
    }

    pub fn with_oversample(
        spec: &KernelSpec,
        half_period: f64,
        cesaro_order: usize,
        quadrature_oversample: usize,
    ) -> Result<Self, KernelError> {
        if !(half_period >= 1.0) || !half_period.is_finite() {
            return Err(KernelError::InvalidParams(format!(
                "half-period P must satisfy P >= 1, got {half_period}"
            )));
        }
        if cesaro_order == 0 {
            return Err(KernelError::InvalidParams("Cesàro order M must be >= 1".into()));
        }
        if quadrature_oversample < 4 {
            return Err(KernelError::InvalidParams(format!(
                "quadrature oversample must be >= 4, got {quadrature_oversample}"
            )));
        }
        let tail_integral = spec.tail_integral(half_period)?;
        Ok(Self {
            half_period,
            cesaro_order,
            tail_integral,
            quadrature_oversample,
        })
    }
}

/// Fejér kernel of order `order` on the 2P-periodic line:
/// `F_q(x) = (1/q) (sin(qπx/2P) / sin(πx/2P))²`, with the removable
/// singularity at x ∈ 2PZ filled by the limit value q. Nonnegative, mean one.
pub fn fejer_eval(order: usize, half_period: f64, x: f64) -> f64 {
    debug_assert!(order >= 1);
    let q = order as f64;
    let s = PI * x / (2.0 * half_period);
    let den = s.sin();
    if den.abs() < 1e-9 {
        // Quadratic Taylor expansion of (sin(q d)/sin(d))²/q around the
        // lattice point, with d² ≈ sin²(s).
        return q * (1.0 - (q * q - 1.0) * den * den / 3.0);
    }
    let num = (q * s).sin();
    (num / den) * (num / den) / q
}

/// Antiderivative of the Fejér kernel from 0:
/// `∫_0^x F_q = x + Σ_{m=1}^{q−1} (1 − m/q)(2P/(πm)) sin(πmx/P)`.
/// Valid for all real x (the series form of F_q holds globally).
pub fn fejer_antiderivative(order: usize, half_period: f64, x: f64) -> f64 {
    let q = order as f64;
    let mut acc = x;
    for m in 1..order {
        let mf = m as f64;
        acc += (1.0 - mf / q) * (2.0 * half_period / (PI * mf)) * (PI * mf * x / half_period).sin();
    }
    acc
}

/// Fourier coefficients of the periodized physical kernel,
/// `c_m(K^P) = (1/2P) ∫_{−P}^{P} K(x) e^{−iπmx/P} dx`, for |m| ≤ m_max,
/// returned in index order m = −m_max ..= m_max.
///
/// Computed by the rectangle rule on a uniform fine grid over one period
/// (spectrally accurate away from the derivative kink of K^P at ±P), at two
/// resolutions; the call fails if doubling the grid still moves any
/// coefficient by more than 1e-8, or if evenness does not force the raw
/// imaginary parts down to roundoff.
pub fn periodized_fourier_coeffs(
    spec: &KernelSpec,
    params: &PeriodizationParams,
    m_max: usize,
) -> Result<Vec<f64>, KernelError> {
    let base = fine_grid_len(params, m_max);
    let coarse = coeffs_on_fine_grid(spec, params.half_period, m_max, base)?;
    let fine = coeffs_on_fine_grid(spec, params.half_period, m_max, 2 * base)?;
    let max_change = coarse
        .iter()
        .zip(fine.iter())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max);
    if max_change > 1e-8 {
        return Err(KernelError::QuadratureNotConverged { max_change });
    }
    Ok(fine)
}

fn fine_grid_len(params: &PeriodizationParams, m_max: usize) -> usize {
    let resolved = (2 * (m_max + 1)).max(4 * params.cesaro_order).max(1024);
    params.quadrature_oversample * resolved
}

fn coeffs_on_fine_grid(
    spec: &KernelSpec,
    half_period: f64,
    m_max: usize,
    len: usize,
) -> Result<Vec<f64>, KernelError> {
    let h = 2.0 * half_period / len as f64;
    let samples: Vec<f64> = (0..len).map(|j| spec.eval(-half_period + j as f64 * h)).collect();
    let hat = dft_coefficients(&samples);
    let mut out = Vec::with_capacity(2 * m_max + 1);
    let mut max_imag = 0.0f64;
    for m in -(m_max as i64)..=(m_max as i64) {
        let bin = m.rem_euclid(len as i64) as usize;
        // Fine-grid nodes start at −P, so bin m carries the phase (−1)^m.
        let sign = if m.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
        let c = hat[bin] * sign;
        max_imag = max_imag.max(c.im.abs());
        out.push(c.re);
    }
    if max_imag > 1e-8 {
        return Err(KernelError::ImaginaryResidue { max_abs: max_imag });
    }
    Ok(out)
}

/// Cesàro-mean coefficients of the corrected kernel:
/// `c_m(σ^P_M) = (1 − |m|/M)(c_m(K^P) − (2/P)(1 − |m|/2M) tail)` for |m| < M.
///
/// `c_kp` must cover |m| ≤ m_max with m_max ≥ M−1, in index order
/// −m_max ..= m_max. The result is returned for m = −(M−1) ..= (M−1) and is
/// checked to be nonpositive within [`COEFF_SIGN_SLACK`].
pub fn cesaro_coefficients(
    c_kp: &[f64],
    params: &PeriodizationParams,
) -> Result<Vec<f64>, KernelError> {
    let m_order = params.cesaro_order;
    if c_kp.len() % 2 == 0 || c_kp.len() < 2 * m_order - 1 {
        return Err(KernelError::InvalidParams(format!(
            "coefficient array of length {} does not cover |m| < M = {}",
            c_kp.len(),
            m_order
        )));
    }
    let m_max = (c_kp.len() - 1) / 2;
    let mf = m_order as f64;
    let p = params.half_period;
    let tail = params.tail_integral;
    let mut out = Vec::with_capacity(2 * m_order - 1);
    for m in -(m_order as i64 - 1)..=(m_order as i64 - 1) {
        let am = m.unsigned_abs() as f64;
        let fejer_factor = 1.0 - am / mf;
        let correction = (2.0 / p) * (1.0 - am / (2.0 * mf)) * tail;
        let c = fejer_factor * (c_kp[(m + m_max as i64) as usize] - correction);
        if c > COEFF_SIGN_SLACK {
            return Err(KernelError::PositiveCoefficient { m, value: c });
        }
        out.push(c);
    }
    Ok(out)
}

/// Which definition of the grid weights σ_{M,j} is in use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SigmaMode {
    /// Point values of the Cesàro mean: σ_{M,j} = σ^P_M(x_j).
    Cesaro,
    /// Cell averages of K^P_M convolved discretely with Fejér point values.
    CellAverage,
}

impl SigmaMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            SigmaMode::Cesaro => "cesaro",
            SigmaMode::CellAverage => "cell_average",
        }
    }
}

impl std::fmt::Display for SigmaMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The smoothed periodic kernel on a given ring: Fourier coefficients
/// c_m(σ^P_M) for |m| < M, grid samples σ_{M,j}, and the discrete L¹ norm.
///
/// `samples[j]` is indexed by ring *offset*: it is the value attached to the
/// separation j·Δx in the discrete convolution
/// `λ_i = Σ_j Δx σ_{M,j} v_{i−j}`. The value at the grid node
/// x_i = −P + iΔx is `samples[(i + N) mod 2N]` (see [`Self::node_samples`]).
#[derive(Debug, Clone)]
pub struct SmoothedKernel {
    coeffs: Vec<f64>,
    samples: Vec<f64>,
    mode: SigmaMode,
    l1_discrete: f64,
    half_period: f64,
    cesaro_order: usize,
    resolution: usize,
    dx: f64,
    kernel_l1: f64,
    tail_integral: f64,
}

impl SmoothedKernel {
    /// Build the smoothed kernel on `grid`. Requires N ≥ M; the Fourier sign
    /// guarantee and the discrete L¹ bound `Σ Δx|σ_{M,j}| ≤ 5‖K‖₁` are
    /// enforced, not assumed.
    pub fn build(
        spec: &KernelSpec,
        params: &PeriodizationParams,
        grid: &Grid,
        mode: SigmaMode,
    ) -> Result<Self, KernelError> {
        if grid.resolution() < params.cesaro_order {
            return Err(KernelError::GridTooCoarse {
                n: grid.resolution(),
                m: params.cesaro_order,
            });
        }
        if (grid.half_period() - params.half_period).abs() > 1e-12 * params.half_period {
            return Err(KernelError::InvalidParams(format!(
                "grid half-period {} does not match periodization half-period {}",
                grid.half_period(),
                params.half_period
            )));
        }
        let c_kp = periodized_fourier_coeffs(spec, params, params.cesaro_order)?;
        let coeffs = cesaro_coefficients(&c_kp, params)?;
        let samples = match mode {
            SigmaMode::Cesaro => {
                if grid.ring() >= 2 * params.cesaro_order - 1 {
                    sigma_samples_idft(&coeffs, grid.ring())
                } else {
                    sigma_samples_direct(&coeffs, params.half_period, grid)
                }
            }
            SigmaMode::CellAverage => cell_average_samples(spec, params, grid),
        };
        let l1_discrete: f64 = samples.iter().map(|s| grid.dx() * s.abs()).sum();
        let kernel_l1 = spec.l1_norm();
        let limit = 5.0 * kernel_l1 + L1_BOUND_SLACK;
        if l1_discrete > limit {
            return Err(KernelError::L1BoundViolated { l1: l1_discrete, limit });
        }
        Ok(Self {
            coeffs,
            samples,
            mode,
            l1_discrete,
            half_period: params.half_period,
            cesaro_order: params.cesaro_order,
            resolution: grid.resolution(),
            dx: grid.dx(),
            kernel_l1,
            tail_integral: params.tail_integral,
        })
    }

    /// Coefficients c_m(σ^P_M) in index order m = −(M−1) ..= (M−1).
    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Single coefficient, 0 for |m| ≥ M.
    pub fn coeff(&self, m: i64) -> f64 {
        let m_ord = self.cesaro_order as i64;
        if m.abs() >= m_ord {
            0.0
        } else {
            self.coeffs[(m + m_ord - 1) as usize]
        }
    }

    /// Offset-indexed grid samples σ_{M,j} = σ at separation j·Δx.
    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    /// Sample value at the grid node x_i = −P + iΔx.
    pub fn sample_at_node(&self, i: usize) -> f64 {
        let ring = self.samples.len();
        self.samples[(i + self.resolution) % ring]
    }

    /// Samples reordered by node, i.e. by ascending x over [−P, P).
    pub fn node_samples(&self) -> Vec<f64> {
        (0..self.samples.len()).map(|i| self.sample_at_node(i)).collect()
    }

    pub fn mode(&self) -> SigmaMode {
        self.mode
    }

    /// Σ_j Δx |σ_{M,j}|.
    pub fn l1_discrete(&self) -> f64 {
        self.l1_discrete
    }

    /// Largest (least negative) Cesàro coefficient.
    pub fn max_coeff(&self) -> f64 {
        self.coeffs.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn half_period(&self) -> f64 {
        self.half_period
    }

    pub fn cesaro_order(&self) -> usize {
        self.cesaro_order
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    /// ‖K‖_{L¹(R)} of the physical kernel behind this smoothing.
    pub fn kernel_l1(&self) -> f64 {
        self.kernel_l1
    }

    pub fn tail_integral(&self) -> f64 {
        self.tail_integral
    }
}

/// σ(jΔx) by zero-padded inverse DFT; exact for the degree-(M−1) trigonometric
/// polynomial whenever the ring has at least 2M−1 points.
fn sigma_samples_idft(coeffs: &[f64], ring: usize) -> Vec<f64> {
    let m_max = (coeffs.len() - 1) / 2;
    let mut buf = vec![Complex64::new(0.0, 0.0); ring];
    for (k, &c) in coeffs.iter().enumerate() {
        let m = k as i64 - m_max as i64;
        let bin = m.rem_euclid(ring as i64) as usize;
        buf[bin] += Complex64::new(c, 0.0);
    }
    DftPair::new(ring).inverse(&mut buf);
    buf.into_iter().map(|c| c.re).collect()
}

/// Direct O(N·M) summation fallback of the same trigonometric polynomial.
pub(crate) fn sigma_samples_direct(coeffs: &[f64], half_period: f64, grid: &Grid) -> Vec<f64> {
    let m_max = ((coeffs.len() - 1) / 2) as i64;
    (0..grid.ring())
        .map(|j| {
            let x = j as f64 * grid.dx();
            let mut acc = coeffs[m_max as usize];
            for m in 1..=m_max {
                let c = coeffs[(m + m_max) as usize];
                acc += 2.0 * c * (PI * m as f64 * x / half_period).cos();
            }
            acc
        })
        .collect()
}

/// Samples from exact cell averages of K^P_M convolved with Fejér point
/// values: σ_{M,j} = (1/2P) Σ_i Δx F_M(x_{j−i}) K̄_i, with
/// K̄_i = (1/Δx) ∫_{(i−1/2)Δx}^{(i+1/2)Δx} K^P_M.
fn cell_average_samples(spec: &KernelSpec, params: &PeriodizationParams, grid: &Grid) -> Vec<f64> {
    let ring = grid.ring();
    let dx = grid.dx();
    let p = params.half_period;
    let order2 = 2 * params.cesaro_order;
    let tail_factor = 2.0 * params.tail_integral / p;

    // Cell boundaries at (i ± 1/2)Δx; consecutive cells share a boundary, so
    // evaluate the two antiderivatives once per boundary.
    let kp_anti: Vec<f64> = (0..=ring)
        .map(|i| (i as f64 - 0.5) * dx)
        .map(|b| periodized_antiderivative_point(spec, p, b))
        .collect();
    let f2m_anti: Vec<f64> = (0..=ring)
        .map(|i| (i as f64 - 0.5) * dx)
        .map(|b| fejer_antiderivative(order2, p, b))
        .collect();
    let kbar: Vec<f64> = (0..ring)
        .map(|i| {
            let kp = kp_anti[i + 1] - kp_anti[i];
            let f2m = f2m_anti[i + 1] - f2m_anti[i];
            (kp - tail_factor * f2m) / dx
        })
        .collect();

    let fm: Vec<f64> = (0..ring)
        .map(|j| fejer_eval(params.cesaro_order, p, j as f64 * dx))
        .collect();

    // Circular convolution (fm ⊛ kbar) scaled by Δx/2P, via the DFT.
    let mut fm_hat = forward_real(&fm);
    let kbar_hat = forward_real(&kbar);
    for (a, b) in fm_hat.iter_mut().zip(kbar_hat.iter()) {
        *a *= b;
    }
    DftPair::new(ring).inverse(&mut fm_hat);
    let scale = dx / (2.0 * p) / ring as f64;
    fm_hat.into_iter().map(|c| c.re * scale).collect()
}

/// ∫_0^x K^P of the periodized kernel, evaluated through the closed-form
/// antiderivative of K with seam-aware wrapping.
fn periodized_antiderivative_point(spec: &KernelSpec, p: f64, x: f64) -> f64 {
    // Number of full periods between 0 and x plus the wrapped remainder.
    let period = 2.0 * p;
    let k = ((x + p) / period).floor();
    let xw = x - k * period; // in [−P, P)
    // ∫ over one full period equals F(P) − F(−P) where F is the
    // antiderivative of K; the wrapped remainder integrates from −P.
    let full = spec.antiderivative(p) - spec.antiderivative(-p);
    k * full + (spec.antiderivative(xw) - spec.antiderivative(-p))
}
