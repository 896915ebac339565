//! Shared fixtures for the solver benchmarks.

use disloc_core::grid::{project_initial, Grid, InitialProfile};
use disloc_core::kernel::{KernelSpec, PeriodizationParams, SigmaMode, SmoothedKernel};
use disloc_core::scheme::State;

pub struct Fixture {
    pub grid: Grid,
    pub kernel: SmoothedKernel,
    pub state: State,
}

/// The long-horizon reference setup scaled to a requested resolution.
pub fn fixture(p: f64, n: usize, m: usize, mode: SigmaMode) -> Fixture {
    let spec = KernelSpec::new(1.0, 1.0).expect("valid kernel");
    let params = PeriodizationParams::new(&spec, p, m).expect("valid params");
    let grid = Grid::new(p, n).expect("valid grid");
    let kernel = SmoothedKernel::build(&spec, &params, &grid, mode).expect("kernel build");
    let state = project_initial(&InitialProfile::arctan(), &grid).expect("projection");
    Fixture { grid, kernel, state }
}
