//! The periodic ring, initial profiles, and projection onto the periodic
//! ansatz.
//!
//! A `Grid` discretizes the circle R/2PZ with 2N nodes x_i = −P + iΔx,
//! Δx = P/N. An `InitialProfile` is a bounded nondecreasing function v₀; the
//! projection subtracts the mean slope L^P = (v₀(P) − v₀(−P))/2P so that
//! u(x) = v₀(x) − L^P x is exactly 2P-periodic, and the shifted gradient
//! θ + L^P stays nonnegative — including across the seam at ±P.

use crate::scheme::State;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GridError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid profile: {0}")]
    InvalidProfile(String),
    #[error("profile violates monotonicity at the periodic seam: theta + L^P = {value:.3e} < -1e-12")]
    SeamGradient { value: f64 },
}

/// Uniform periodic grid on [−P, P) with 2N nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    half_period: f64,
    resolution: usize,
    dx: f64,
}

impl Grid {
    pub fn new(half_period: f64, resolution: usize) -> Result<Self, GridError> {
        if !(half_period >= 1.0) || !half_period.is_finite() {
            return Err(GridError::InvalidGrid(format!(
                "half-period P must satisfy P >= 1, got {half_period}"
            )));
        }
        if resolution == 0 {
            return Err(GridError::InvalidGrid("resolution N must be >= 1".into()));
        }
        Ok(Self {
            half_period,
            resolution,
            dx: half_period / resolution as f64,
        })
    }

    pub fn half_period(&self) -> f64 {
        self.half_period
    }

    /// N: nodes per half-period.
    pub fn resolution(&self) -> usize {
        self.resolution
    }

    /// 2N: nodes on the ring.
    pub fn ring(&self) -> usize {
        2 * self.resolution
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    /// Node coordinate x_i = −P + iΔx for the canonical representative
    /// i ∈ {0, …, 2N−1}.
    pub fn node_x(&self, i: usize) -> f64 {
        -self.half_period + i as f64 * self.dx
    }

    /// Canonical representative of an arbitrary ring index.
    pub fn wrap_index(&self, i: i64) -> usize {
        i.rem_euclid(self.ring() as i64) as usize
    }

    /// Wrap a coordinate into [−P, P).
    pub fn wrap_x(&self, x: f64) -> f64 {
        let period = 2.0 * self.half_period;
        let w = x - period * ((x + self.half_period) / period).floor();
        // floor roundoff can land exactly on +P; fold it back.
        if w >= self.half_period {
            w - period
        } else {
            w
        }
    }
}

/// A bounded nondecreasing initial profile v₀.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialProfile {
    /// v₀(x) = (2/π) atan(x) + 1.
    Arctan,
    /// Piecewise-linear interpolation of sorted (x, v₀) pairs, clamped to the
    /// end values outside the table range.
    Table { xs: Vec<f64>, values: Vec<f64> },
}

impl InitialProfile {
    pub fn arctan() -> Self {
        InitialProfile::Arctan
    }

    /// Build a table profile. The x column must be strictly increasing and
    /// the value column nondecreasing; violations are rejected rather than
    /// repaired.
    pub fn from_table(pairs: Vec<(f64, f64)>) -> Result<Self, GridError> {
        if pairs.len() < 2 {
            return Err(GridError::InvalidProfile(
                "profile table needs at least two rows".into(),
            ));
        }
        for w in pairs.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(GridError::InvalidProfile(format!(
                    "x column must be strictly increasing, got {} then {}",
                    w[0].0, w[1].0
                )));
            }
            if w[1].1 < w[0].1 {
                return Err(GridError::InvalidProfile(format!(
                    "v0 column must be nondecreasing, got {} then {}",
                    w[0].1, w[1].1
                )));
            }
        }
        if pairs.iter().any(|(x, v)| !x.is_finite() || !v.is_finite()) {
            return Err(GridError::InvalidProfile("table entries must be finite".into()));
        }
        let (xs, values) = pairs.into_iter().unzip();
        Ok(InitialProfile::Table { xs, values })
    }

    /// Parse a two-column CSV body `x,v0` (optional header row allowed).
    pub fn from_csv_str(body: &str) -> Result<Self, GridError> {
        let mut pairs = Vec::new();
        for (lineno, line) in body.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut cols = line.split(',').map(str::trim);
            let (a, b) = (cols.next().unwrap_or(""), cols.next().unwrap_or(""));
            match (a.parse::<f64>(), b.parse::<f64>()) {
                (Ok(x), Ok(v)) => pairs.push((x, v)),
                _ if lineno == 0 => continue, // header row
                _ => {
                    return Err(GridError::InvalidProfile(format!(
                        "line {}: expected two numeric columns, got {line:?}",
                        lineno + 1
                    )))
                }
            }
        }
        Self::from_table(pairs)
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            InitialProfile::Arctan => (2.0 / std::f64::consts::PI) * x.atan() + 1.0,
            InitialProfile::Table { xs, values } => {
                if x <= xs[0] {
                    return values[0];
                }
                if x >= xs[xs.len() - 1] {
                    return values[values.len() - 1];
                }
                let hi = xs.partition_point(|&t| t <= x);
                let (x0, x1) = (xs[hi - 1], xs[hi]);
                let (v0, v1) = (values[hi - 1], values[hi]);
                v0 + (v1 - v0) * (x - x0) / (x1 - x0)
            }
        }
    }

    /// sup_R |v₀|.
    pub fn sup_abs(&self) -> f64 {
        match self {
            // Range is (0, 2): the supremum of |v₀| is 2.
            InitialProfile::Arctan => 2.0,
            InitialProfile::Table { values, .. } => {
                values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
            }
        }
    }
}

/// Mean slope L^P = (v₀(P) − v₀(−P))/(2P); nonnegative for nondecreasing v₀.
pub fn mean_slope(profile: &InitialProfile, half_period: f64) -> f64 {
    (profile.eval(half_period) - profile.eval(-half_period)) / (2.0 * half_period)
}

/// Project the profile onto the periodic ansatz: u_i = v₀(x_i) − L^P x_i.
///
/// The projection is exactly periodic by the choice of L^P, and the shifted
/// discrete gradient θ_{i+1/2} + L^P is nonnegative everywhere including the
/// wrap-around pair; a seam value below −1e-12 means the profile itself is
/// not admissible and is rejected.
pub fn project_initial(profile: &InitialProfile, grid: &Grid) -> Result<State, GridError> {
    let l_p = mean_slope(profile, grid.half_period());
    let u: Vec<f64> = (0..grid.ring())
        .map(|i| {
            let x = grid.node_x(i);
            profile.eval(x) - l_p * x
        })
        .collect();
    let state = State::initial(u, l_p);
    let theta = discrete_gradient(&state, grid);
    let min_shifted = theta.iter().map(|t| t + l_p).fold(f64::INFINITY, f64::min);
    if min_shifted < -1e-12 {
        return Err(GridError::SeamGradient { value: min_shifted });
    }
    Ok(state)
}

/// Discrete gradient θ_{i+1/2} = (u_{i+1} − u_i)/Δx with circular wrap;
/// entry i holds the difference between nodes i+1 and i.
pub fn discrete_gradient(state: &State, grid: &Grid) -> Vec<f64> {
    let u = &state.u;
    let ring = u.len();
    (0..ring)
        .map(|i| (u[(i + 1) % ring] - u[i]) / grid.dx())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_geometry() {
        let g = Grid::new(10.0, 100).unwrap();
        assert_eq!(g.ring(), 200);
        assert_eq!(g.dx(), 0.1);
        // dx·N = P up to 1 ulp
        assert!((g.dx() * 100.0 - 10.0).abs() <= f64::EPSILON * 10.0);
        assert_eq!(g.node_x(0), -10.0);
        assert!((g.node_x(100) - 0.0).abs() < 1e-13);
        assert_eq!(g.wrap_index(-1), 199);
        assert_eq!(g.wrap_index(200), 0);
        assert!((g.wrap_x(10.0) - -10.0).abs() < 1e-15);
        assert!((g.wrap_x(-10.05) - 9.95).abs() < 1e-12);
    }

    #[test]
    fn grid_rejects_degenerate_parameters() {
        assert!(Grid::new(0.5, 10).is_err());
        assert!(Grid::new(10.0, 0).is_err());
    }

    #[test]
    fn mean_slope_arctan() {
        let v = InitialProfile::arctan();
        // (2/π)·atan(P)/P
        let l50 = mean_slope(&v, 50.0);
        assert!((l50 - 0.0197454).abs() < 1e-6, "L^50 = {l50}");
        let exact50 = (2.0 / std::f64::consts::PI) * 50.0f64.atan() / 50.0;
        assert!((l50 - exact50).abs() < 1e-15);
        let l10 = mean_slope(&v, 10.0);
        assert!((l10 - 0.0936551).abs() < 1e-6, "L^10 = {l10}");
    }

    #[test]
    fn mean_slope_constant_profile() {
        let v = InitialProfile::from_table(vec![(-1.0, 3.0), (1.0, 3.0)]).unwrap();
        assert_eq!(mean_slope(&v, 10.0), 0.0);
    }

    #[test]
    fn projection_of_constant_profile() {
        let v = InitialProfile::from_table(vec![(-100.0, 3.0), (100.0, 3.0)]).unwrap();
        let g = Grid::new(10.0, 20).unwrap();
        let s = project_initial(&v, &g).unwrap();
        assert_eq!(s.l_p, 0.0);
        assert!(s.u.iter().all(|&u| u == 3.0));
        let theta = discrete_gradient(&s, &g);
        assert!(theta.iter().all(|&t| t == 0.0));
    }

    #[test]
    fn projection_of_linear_profile_is_constant() {
        // v₀ = a x + b as a clamped table covering [−P, P]: L^P = a exactly
        // and u ≡ b.
        let (a, b, p) = (0.35, -1.25, 5.0);
        let v = InitialProfile::from_table(vec![(-p, a * -p + b), (p, a * p + b)]).unwrap();
        let g = Grid::new(p, 40).unwrap();
        let s = project_initial(&v, &g).unwrap();
        assert!((s.l_p - a).abs() < 1e-15);
        for (i, &u) in s.u.iter().enumerate() {
            assert!((u - b).abs() < 1e-12, "u[{i}] = {u}");
        }
    }

    #[test]
    fn projection_arctan_bounds() {
        let v = InitialProfile::arctan();
        let g = Grid::new(50.0, 500).unwrap();
        let s = project_initial(&v, &g).unwrap();
        let sup = s.u.iter().fold(0.0f64, |m, u| m.max(u.abs()));
        assert!(sup <= 2.0 * v.sup_abs(), "sup |u| = {sup}");
        // Shifted gradient nonnegative everywhere, seam included.
        let theta = discrete_gradient(&s, &g);
        let min = theta.iter().map(|t| t + s.l_p).fold(f64::INFINITY, f64::min);
        assert!(min >= -1e-12, "min theta + L = {min}");
        // Ring total variation bounded by 4 sup |v₀|.
        let tv: f64 = (0..s.u.len())
            .map(|i| (s.u[(i + 1) % s.u.len()] - s.u[i]).abs())
            .sum();
        assert!(tv <= 4.0 * v.sup_abs());
    }

    #[test]
    fn gradient_of_spike() {
        let g = Grid::new(1.0, 4).unwrap();
        let mut u = vec![0.0; 8];
        u[3] = 1.0;
        let s = State::initial(u, 0.0);
        let theta = discrete_gradient(&s, &g);
        assert_eq!(theta[2], 1.0 / g.dx());
        assert_eq!(theta[3], -1.0 / g.dx());
        assert!(theta.iter().enumerate().all(|(i, &t)| i == 2 || i == 3 || t == 0.0));
        // Telescoping on the ring.
        let sum: f64 = theta.iter().map(|t| t * g.dx()).sum();
        assert!(sum.abs() < 1e-15);
    }

    #[test]
    fn table_validation() {
        assert!(InitialProfile::from_table(vec![(0.0, 0.0)]).is_err());
        assert!(InitialProfile::from_table(vec![(0.0, 0.0), (0.0, 1.0)]).is_err());
        assert!(InitialProfile::from_table(vec![(0.0, 1.0), (1.0, 0.5)]).is_err());
        let v = InitialProfile::from_table(vec![(0.0, 0.0), (1.0, 1.0), (2.0, 1.0)]).unwrap();
        assert_eq!(v.eval(-5.0), 0.0); // clamped
        assert_eq!(v.eval(0.5), 0.5);
        assert_eq!(v.eval(9.0), 1.0);
    }

    #[test]
    fn csv_parsing() {
        let v = InitialProfile::from_csv_str("x,v0\n-1.0,0.0\n0.0,0.5\n1.0,1.0\n").unwrap();
        assert_eq!(v.eval(0.0), 0.5);
        assert!(InitialProfile::from_csv_str("-1.0,0.0\n0.0,zzz\n").is_err());
    }
}
