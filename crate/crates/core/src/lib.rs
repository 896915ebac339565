//! Solver for a 2P-periodic nonlocal eikonal equation of dislocation dynamics.
//!
//! The equation evolved here is
//!
//! ```text
//! d/dt u(x,t) = (sigma_M^P * u(.,t))(x) * (d/dx u(x,t) + L^P)      on R/2PZ,
//! ```
//!
//! where the convolution kernel `sigma_M^P` is the Cesàro mean of order M of
//! the Fourier series of a corrected periodization of the Peierls–Nabarro
//! kernel, and `L^P` is the mean slope removed from the (nondecreasing)
//! initial data to make it periodic. The Fejér-based correction guarantees
//! that every Fourier coefficient of `sigma_M^P` is a nonpositive real
//! number; that sign structure is what makes the discrete gradient entropy
//! of the scheme nonincreasing up to an explicit source term.
//!
//! Crate layout:
//!
//! - [`kernel`]: the physical kernel, its periodization, the Fejér kernel and
//!   Cesàro-smoothed convolution weights with their sign and L¹ guarantees.
//! - [`grid`]: the periodic ring, initial profiles and their projection onto
//!   the periodic ansatz.
//! - [`scheme`]: the semi-explicit (implicit velocity, explicit upwind
//!   gradient) time stepper, solved per step by fixed-point iteration.
//! - [`diagnostics`]: total variation, discrete gradient entropy, Zygmund
//!   norms, DFT sign reports and modulus-of-continuity probes.
//! - [`experiments`]: canned parameter sweeps and refinement studies.
//! - [`config`]: JSON run configuration with full validation.
//! - [`runner`]: glue that assembles a run from a configuration.
//! - [`report`]: JSON/CSV emission with lossless float formatting.

pub mod config;
pub mod diagnostics;
mod dft;
pub mod experiments;
pub mod grid;
pub mod kernel;
pub mod report;
pub mod runner;
pub mod scheme;

pub use config::{parse_config, ConfigError, RunConfig};
pub use diagnostics::DiagnosticsRecord;
pub use grid::{Grid, InitialProfile};
pub use kernel::{KernelSpec, PeriodizationParams, SigmaMode, SmoothedKernel};
pub use scheme::{SchemeConfig, State, StepStats, VelocityMode};
