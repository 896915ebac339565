//! Thin wrappers around rustfft used by kernel construction and the
//! convolution engine. All transforms are complex-to-complex; callers hold
//! real data and check that imaginary parts stay at roundoff level.

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

/// Forward/inverse transform pair of a fixed length.
pub(crate) struct DftPair {
    pub len: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl DftPair {
    pub fn new(len: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            len,
            forward: planner.plan_fft_forward(len),
            inverse: planner.plan_fft_inverse(len),
        }
    }

    /// In-place unnormalized forward transform: X_k = sum_j x_j e^{-2πi jk/len}.
    pub fn forward(&self, data: &mut [Complex64]) {
        debug_assert_eq!(data.len(), self.len);
        self.forward.process(data);
    }

    /// In-place unnormalized inverse transform: y_j = sum_k Y_k e^{+2πi jk/len}.
    pub fn inverse(&self, data: &mut [Complex64]) {
        debug_assert_eq!(data.len(), self.len);
        self.inverse.process(data);
    }
}

/// Unnormalized forward DFT of a real vector.
pub(crate) fn forward_real(values: &[f64]) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    DftPair::new(values.len()).forward(&mut buf);
    buf
}

/// DFT coefficients with the 1/len normalization used throughout:
/// c_j = (1/len) sum_l v_l e^{-2πi jl/len}.
pub(crate) fn dft_coefficients(values: &[f64]) -> Vec<Complex64> {
    let len = values.len() as f64;
    let mut buf = forward_real(values);
    for c in &mut buf {
        *c /= len;
    }
    buf
}
