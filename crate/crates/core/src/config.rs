//! Run configuration: a JSON document mirroring the kernel/domain/smoothing/
//! time/solver/output trees, validated as a whole (every violation is
//! reported, not just the first) with unknown keys rejected.
//!
//! Physical defaults are the long-horizon reference setup: Peierls–Nabarro
//! kernel with amplitude 1 and core size 1, arctan initial profile, P = 50,
//! N = 500, M = 400, Δt = 0.02, T = 1400.

use crate::grid::{Grid, GridError};
use crate::kernel::{KernelError, KernelSpec, PeriodizationParams, SigmaMode};
use crate::report::Json;
use crate::scheme::{CflMode, SchemeConfig, TimeMode, VelocityMode};
use serde_json::Value;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub path: String,
    pub message: String,
}

#[derive(Debug, Error)]
#[error("invalid configuration:\n{}", .violations.iter().map(|v| format!("  {}: {}", v.path, v.message)).collect::<Vec<_>>().join("\n"))]
pub struct ConfigError {
    pub violations: Vec<Violation>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelCfg {
    pub amplitude: f64,
    pub zeta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DomainCfg {
    pub p: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmoothingCfg {
    pub m: usize,
    pub mode: SigmaMode,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeCfg {
    pub dt: f64,
    pub t_final: f64,
    pub time_mode: TimeMode,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverCfg {
    pub fixed_point_tol: f64,
    pub max_iter: usize,
    pub cfl_mode: CflMode,
    pub velocity_mode: VelocityMode,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputCfg {
    pub every_k_steps: usize,
    pub dir: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProfileCfg {
    Arctan,
    Table { path: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub kernel: KernelCfg,
    pub domain: DomainCfg,
    pub smoothing: SmoothingCfg,
    pub time: TimeCfg,
    pub solver: SolverCfg,
    pub output: OutputCfg,
    pub profile: ProfileCfg,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            kernel: KernelCfg { amplitude: 1.0, zeta: 1.0 },
            domain: DomainCfg { p: 50.0, n: 500 },
            smoothing: SmoothingCfg { m: 400, mode: SigmaMode::Cesaro },
            time: TimeCfg {
                dt: 0.02,
                t_final: 1400.0,
                time_mode: TimeMode::Uniform,
            },
            solver: SolverCfg {
                fixed_point_tol: 1e-12,
                max_iter: 200,
                cfl_mode: CflMode::Practical,
                velocity_mode: VelocityMode::Fft,
            },
            output: OutputCfg {
                every_k_steps: 7000,
                dir: "out".into(),
            },
            profile: ProfileCfg::Arctan,
        }
    }
}

impl RunConfig {
    pub fn dx(&self) -> f64 {
        self.domain.p / self.domain.n as f64
    }

    pub fn n_t(&self) -> usize {
        (self.time.t_final / self.time.dt).round() as usize
    }

    pub fn kernel_spec(&self) -> Result<KernelSpec, KernelError> {
        KernelSpec::new(self.kernel.amplitude, self.kernel.zeta)
    }

    pub fn periodization(&self) -> Result<PeriodizationParams, KernelError> {
        PeriodizationParams::new(&self.kernel_spec()?, self.domain.p, self.smoothing.m)
    }

    pub fn grid(&self) -> Result<Grid, GridError> {
        Grid::new(self.domain.p, self.domain.n)
    }

    pub fn scheme_config(&self) -> SchemeConfig {
        SchemeConfig {
            dt: self.time.dt,
            t_final: self.time.t_final,
            fixed_point_tol: self.solver.fixed_point_tol,
            fixed_point_max_iter: self.solver.max_iter,
            cfl_mode: self.solver.cfl_mode,
            time_mode: self.time.time_mode,
            velocity_mode: self.solver.velocity_mode,
            ..SchemeConfig::default()
        }
    }

    /// Configuration echo as a JSON tree (used for emission and manifests).
    pub fn to_json(&self) -> Json {
        let profile = match &self.profile {
            ProfileCfg::Arctan => Json::obj(vec![("kind", Json::Str("arctan".into()))]),
            ProfileCfg::Table { path } => Json::obj(vec![
                ("kind", Json::Str("table".into())),
                ("path", Json::Str(path.clone())),
            ]),
        };
        Json::obj(vec![
            (
                "kernel",
                Json::obj(vec![
                    ("amplitude", Json::Num(self.kernel.amplitude)),
                    ("zeta", Json::Num(self.kernel.zeta)),
                ]),
            ),
            (
                "domain",
                Json::obj(vec![
                    ("P", Json::Num(self.domain.p)),
                    ("N", Json::Int(self.domain.n as i64)),
                ]),
            ),
            (
                "smoothing",
                Json::obj(vec![
                    ("M", Json::Int(self.smoothing.m as i64)),
                    ("mode", Json::Str(self.smoothing.mode.as_str().into())),
                ]),
            ),
            (
                "time",
                Json::obj(vec![
                    ("dt", Json::Num(self.time.dt)),
                    ("T", Json::Num(self.time.t_final)),
                    ("time_mode", Json::Str(self.time.time_mode.as_str().into())),
                ]),
            ),
            (
                "solver",
                Json::obj(vec![
                    ("fixed_point_tol", Json::Num(self.solver.fixed_point_tol)),
                    ("max_iter", Json::Int(self.solver.max_iter as i64)),
                    ("cfl_mode", Json::Str(self.solver.cfl_mode.as_str().into())),
                    ("velocity_mode", Json::Str(self.solver.velocity_mode.as_str().into())),
                ]),
            ),
            (
                "output",
                Json::obj(vec![
                    ("every_k_steps", Json::Int(self.output.every_k_steps as i64)),
                    ("dir", Json::Str(self.output.dir.clone())),
                ]),
            ),
            ("profile", profile),
        ])
    }

    pub fn emit(&self) -> String {
        self.to_json().render()
    }
}

/// Parse and validate a JSON configuration document. Unknown keys, type
/// mismatches and constraint violations are all collected and reported
/// together, each named with its path.
pub fn parse_config(doc: &str) -> Result<RunConfig, ConfigError> {
    let value: Value = serde_json::from_str(doc).map_err(|e| ConfigError {
        violations: vec![Violation {
            path: "$".into(),
            message: format!("not valid JSON: {e}"),
        }],
    })?;
    let mut v = Validator::default();
    let cfg = v.walk(&value);
    if v.violations.is_empty() {
        Ok(cfg)
    } else {
        Err(ConfigError { violations: v.violations })
    }
}

#[derive(Default)]
struct Validator {
    violations: Vec<Violation>,
}

impl Validator {
    fn push(&mut self, path: &str, message: impl Into<String>) {
        self.violations.push(Violation {
            path: path.to_string(),
            message: message.into(),
        });
    }

    fn section<'a>(&mut self, root: &'a Value, name: &str, known: &[&str]) -> Option<&'a Value> {
        let section = root.get(name)?;
        match section.as_object() {
            Some(map) => {
                for key in map.keys() {
                    if !known.contains(&key.as_str()) {
                        self.push(&format!("{name}.{key}"), "unknown key");
                    }
                }
                Some(section)
            }
            None => {
                self.push(name, "expected an object");
                None
            }
        }
    }

    fn real(&mut self, section: Option<&Value>, path: &str, key: &str, default: f64) -> f64 {
        match section.and_then(|s| s.get(key)) {
            None => default,
            Some(v) => match v.as_f64() {
                Some(x) => x,
                None => {
                    self.push(&format!("{path}.{key}"), "expected a number");
                    default
                }
            },
        }
    }

    fn integer(&mut self, section: Option<&Value>, path: &str, key: &str, default: usize) -> usize {
        match section.and_then(|s| s.get(key)) {
            None => default,
            Some(v) => match v.as_u64() {
                Some(x) => x as usize,
                None => {
                    self.push(&format!("{path}.{key}"), "expected a nonnegative integer");
                    default
                }
            },
        }
    }

    fn string(&mut self, section: Option<&Value>, path: &str, key: &str, default: &str) -> String {
        match section.and_then(|s| s.get(key)) {
            None => default.to_string(),
            Some(v) => match v.as_str() {
                Some(s) => s.to_string(),
                None => {
                    self.push(&format!("{path}.{key}"), "expected a string");
                    default.to_string()
                }
            },
        }
    }

    fn choice<T: Copy>(
        &mut self,
        section: Option<&Value>,
        path: &str,
        key: &str,
        options: &[(&str, T)],
        default: T,
    ) -> T {
        let raw = self.string(section, path, key, "");
        if raw.is_empty() && section.and_then(|s| s.get(key)).is_none() {
            return default;
        }
        for (name, value) in options {
            if raw == *name {
                return *value;
            }
        }
        let names: Vec<&str> = options.iter().map(|(n, _)| *n).collect();
        self.push(
            &format!("{path}.{key}"),
            format!("expected one of {names:?}, got {raw:?}"),
        );
        default
    }

    fn walk(&mut self, root: &Value) -> RunConfig {
        let defaults = RunConfig::default();
        if !root.is_object() {
            self.push("$", "top-level document must be an object");
            return defaults;
        }
        const SECTIONS: [&str; 7] = [
            "kernel", "domain", "smoothing", "time", "solver", "output", "profile",
        ];
        for key in root.as_object().unwrap().keys() {
            if !SECTIONS.contains(&key.as_str()) {
                self.push(key, "unknown key");
            }
        }

        let kernel = self.section(root, "kernel", &["amplitude", "zeta"]);
        let amplitude = self.real(kernel, "kernel", "amplitude", defaults.kernel.amplitude);
        let zeta = self.real(kernel, "kernel", "zeta", defaults.kernel.zeta);

        let domain = self.section(root, "domain", &["P", "N"]);
        let p = self.real(domain, "domain", "P", defaults.domain.p);
        let n = self.integer(domain, "domain", "N", defaults.domain.n);

        let smoothing = self.section(root, "smoothing", &["M", "mode"]);
        let m = self.integer(smoothing, "smoothing", "M", defaults.smoothing.m);
        let mode = self.choice(
            smoothing,
            "smoothing",
            "mode",
            &[
                ("cesaro", SigmaMode::Cesaro),
                ("cell_average", SigmaMode::CellAverage),
            ],
            defaults.smoothing.mode,
        );

        let time = self.section(root, "time", &["dt", "T", "time_mode"]);
        let dt = self.real(time, "time", "dt", defaults.time.dt);
        let t_final = self.real(time, "time", "T", defaults.time.t_final);
        let time_mode = self.choice(
            time,
            "time",
            "time_mode",
            &[("uniform", TimeMode::Uniform), ("adaptive", TimeMode::Adaptive)],
            defaults.time.time_mode,
        );

        let solver = self.section(
            root,
            "solver",
            &["fixed_point_tol", "max_iter", "cfl_mode", "velocity_mode"],
        );
        let fixed_point_tol = self.real(solver, "solver", "fixed_point_tol", defaults.solver.fixed_point_tol);
        let max_iter = self.integer(solver, "solver", "max_iter", defaults.solver.max_iter);
        let cfl_mode = self.choice(
            solver,
            "solver",
            "cfl_mode",
            &[
                ("strict_paper", CflMode::StrictPaper),
                ("practical", CflMode::Practical),
                ("off", CflMode::Off),
            ],
            defaults.solver.cfl_mode,
        );
        let velocity_mode = self.choice(
            solver,
            "solver",
            "velocity_mode",
            &[("fft", VelocityMode::Fft), ("direct", VelocityMode::Direct)],
            defaults.solver.velocity_mode,
        );

        let output = self.section(root, "output", &["every_k_steps", "dir"]);
        let every_k_steps = self.integer(output, "output", "every_k_steps", defaults.output.every_k_steps);
        let dir = self.string(output, "output", "dir", &defaults.output.dir);

        let profile_section = self.section(root, "profile", &["kind", "path"]);
        let kind = self.string(profile_section, "profile", "kind", "arctan");
        let profile = match kind.as_str() {
            "arctan" => {
                if profile_section.and_then(|s| s.get("path")).is_some() {
                    self.push("profile.path", "path is only valid for kind = \"table\"");
                }
                ProfileCfg::Arctan
            }
            "table" => {
                let path = self.string(profile_section, "profile", "path", "");
                if path.is_empty() {
                    self.push("profile.path", "kind = \"table\" requires a CSV path");
                }
                ProfileCfg::Table { path }
            }
            other => {
                self.push("profile.kind", format!("expected \"arctan\" or \"table\", got {other:?}"));
                ProfileCfg::Arctan
            }
        };

        // Constraint checks on the assembled values.
        if !(zeta > 0.0) || !zeta.is_finite() {
            self.push("kernel.zeta", format!("zeta > 0 required, got {zeta}"));
        }
        if !amplitude.is_finite() {
            self.push("kernel.amplitude", "must be finite");
        }
        if !(p >= 1.0) || !p.is_finite() {
            self.push("domain.P", format!("P >= 1 required, got {p}"));
        }
        if zeta.is_finite() && p.is_finite() && p < zeta {
            self.push("domain.P", format!("P >= zeta required (P = {p}, zeta = {zeta})"));
        }
        if n == 0 {
            self.push("domain.N", "N >= 1 required");
        }
        if m == 0 {
            self.push("smoothing.M", "M >= 1 required");
        }
        if n > 0 && m > 0 && n < m {
            self.push("domain.N", format!("N >= M required (N = {n}, M = {m})"));
        }
        if !(dt > 0.0) || !dt.is_finite() {
            self.push("time.dt", format!("dt > 0 required, got {dt}"));
        }
        if !(t_final > 0.0) || !t_final.is_finite() {
            self.push("time.T", format!("T > 0 required, got {t_final}"));
        }
        if dt.is_finite() && t_final.is_finite() && dt > t_final {
            self.push("time.dt", format!("dt <= T required (dt = {dt}, T = {t_final})"));
        }
        if !(fixed_point_tol > 0.0) {
            self.push("solver.fixed_point_tol", "must be positive");
        }
        if max_iter == 0 {
            self.push("solver.max_iter", "must be >= 1");
        }
        if every_k_steps == 0 {
            self.push("output.every_k_steps", "must be >= 1");
        }

        RunConfig {
            kernel: KernelCfg { amplitude, zeta },
            domain: DomainCfg { p, n },
            smoothing: SmoothingCfg { m, mode },
            time: TimeCfg { dt, t_final, time_mode },
            solver: SolverCfg {
                fixed_point_tol,
                max_iter,
                cfl_mode,
                velocity_mode,
            },
            output: OutputCfg { every_k_steps, dir },
            profile,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        let cfg = parse_config("{}").unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!(cfg.domain.p, 50.0);
        assert_eq!(cfg.domain.n, 500);
        assert_eq!(cfg.smoothing.m, 400);
    }

    #[test]
    fn partial_document_overlays_defaults() {
        let cfg = parse_config(r#"{"domain": {"P": 10.0, "N": 100}, "smoothing": {"M": 50}}"#).unwrap();
        assert_eq!(cfg.domain.p, 10.0);
        assert_eq!(cfg.domain.n, 100);
        assert_eq!(cfg.smoothing.m, 50);
        assert_eq!(cfg.time.dt, 0.02);
    }

    #[test]
    fn n_below_m_is_rejected() {
        let err = parse_config(r#"{"domain": {"N": 100}}"#).unwrap_err();
        assert!(err.violations.iter().any(|v| v.path == "domain.N" && v.message.contains("N >= M")));
    }

    #[test]
    fn all_violations_reported_together() {
        let err = parse_config(
            r#"{"domain": {"P": 0.5, "N": 0, "Q": 1}, "time": {"dt": -1.0}, "bogus": {}}"#,
        )
        .unwrap_err();
        let paths: Vec<&str> = err.violations.iter().map(|v| v.path.as_str()).collect();
        assert!(paths.contains(&"domain.P"));
        assert!(paths.contains(&"domain.N"));
        assert!(paths.contains(&"domain.Q"));
        assert!(paths.contains(&"time.dt"));
        assert!(paths.contains(&"bogus"));
        assert!(err.violations.len() >= 5);
    }

    #[test]
    fn type_mismatches_are_named() {
        let err = parse_config(r#"{"domain": {"N": 10.5}, "smoothing": {"mode": "fourier", "M": 5}}"#)
            .unwrap_err();
        assert!(err
            .violations
            .iter()
            .any(|v| v.path == "domain.N" && v.message.contains("integer")));
        assert!(err.violations.iter().any(|v| v.path == "smoothing.mode"));
    }

    #[test]
    fn profile_table_requires_path() {
        assert!(parse_config(r#"{"profile": {"kind": "table"}}"#).is_err());
        let cfg = parse_config(r#"{"profile": {"kind": "table", "path": "v0.csv"}}"#).unwrap();
        assert_eq!(cfg.profile, ProfileCfg::Table { path: "v0.csv".into() });
    }

    #[test]
    fn emit_parse_round_trip() {
        let mut cfg = RunConfig::default();
        cfg.domain.p = 12.5;
        cfg.domain.n = 125;
        cfg.smoothing.m = 33;
        cfg.smoothing.mode = SigmaMode::CellAverage;
        cfg.time.dt = 1.0 / 3.0;
        cfg.time.t_final = 7.0;
        cfg.solver.fixed_point_tol = 3.33e-13;
        cfg.solver.cfl_mode = CflMode::StrictPaper;
        cfg.profile = ProfileCfg::Table { path: "x.csv".into() };
        let text = cfg.emit();
        let back = parse_config(&text).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn not_json_is_one_violation() {
        let err = parse_config("{").unwrap_err();
        assert_eq!(err.violations.len(), 1);
        assert_eq!(err.violations[0].path, "$");
    }
}
