//! Run configuration: TOML schema, `key=value` overrides, and validation
//! that re-checks every module-level precondition at load time.

use crate::error::Error;
use crate::field::Grid;
use crate::initial::{self, Shape};
use crate::model::{ModelKind, ModelParams};
use crate::stepper::{self, Scheme, StepControl};
use serde::{Deserialize, Serialize};
use std::path::PathBuf;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub dim: usize,
    pub n: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub kind: ModelKind,
    pub eps: f64,
    /// Penalty exponent; defaults to 0.5.
    #[serde(default = "default_alpha")]
    pub alpha: f64,
}

fn default_alpha() -> f64 {
    crate::model::DEFAULT_ALPHA
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SteppingConfig {
    #[serde(default = "default_scheme")]
    pub scheme: Scheme,
    #[serde(default = "default_safety")]
    pub safety: f64,
    /// Horizon T.
    pub t_final: f64,
    /// Record every this many steps.
    #[serde(default = "default_cadence")]
    pub cadence: u64,
    /// Explicit dt override; must satisfy the stability bound.
    #[serde(default)]
    pub dt: Option<f64>,
}

fn default_scheme() -> Scheme {
    Scheme::ExplicitEuler
}
fn default_safety() -> f64 {
    0.2
}
fn default_cadence() -> u64 {
    1
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// CSV path for the diagnostics records.
    #[serde(default)]
    pub csv: Option<PathBuf>,
    #[serde(default)]
    pub snapshot_times: Vec<f64>,
    #[serde(default)]
    pub snapshot_dir: Option<PathBuf>,
}

/// A backward-heat-kernel query; evaluated at every record time `t < s`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelQueryConfig {
    pub y: Vec<f64>,
    pub s: f64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsConfig {
    /// Track the scheme-compatible energy every step.
    #[serde(default)]
    pub energy_monitor: bool,
    /// Centers for zero-crossing radius sampling (dim >= 2 only).
    #[serde(default)]
    pub radius_centers: Vec<Vec<f64>>,
    #[serde(default)]
    pub kernel_queries: Vec<KernelQueryConfig>,
    /// Density-ratio sample, evaluated at every record when non-empty.
    #[serde(default)]
    pub density_centers: Vec<Vec<f64>>,
    #[serde(default)]
    pub density_radii: Vec<f64>,
    /// Evaluate the first variation against the per-axis sine test field at
    /// every record.
    #[serde(default)]
    pub first_variation: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridConfig,
    pub model: ModelConfig,
    pub shape: Shape,
    /// Clamp width b; defaults to max(10 eps, 0.05).
    #[serde(default)]
    pub clamp_width: Option<f64>,
    pub stepping: SteppingConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub diagnostics: DiagnosticsConfig,
}

impl RunConfig {
    /// Parse a TOML document into a fully validated configuration; all
    /// violated constraints are reported together.
    pub fn parse(text: &str) -> Result<RunConfig, Error> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config {
            field: "<toml>".into(),
            constraint: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Parse with `key=value` overrides applied before validation. Keys use
    /// dotted paths into the TOML tree (`model.eps=0.01`); values are parsed
    /// as TOML scalars, falling back to strings.
    pub fn parse_with_overrides(text: &str, overrides: &[String]) -> Result<RunConfig, Error> {
        let mut doc: toml::Value = toml::from_str(text).map_err(|e| Error::Config {
            field: "<toml>".into(),
            constraint: e.to_string(),
        })?;
        for ov in overrides {
            apply_override(&mut doc, ov)?;
        }
        let cfg: RunConfig = doc.try_into().map_err(|e| Error::Config {
            field: "<toml>".into(),
            constraint: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn clamp_width(&self) -> f64 {
        self.clamp_width
            .unwrap_or_else(|| initial::default_clamp_width(self.model.eps))
    }

    /// Collect every violated invariant; empty means valid.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if !(1..=3).contains(&self.grid.dim) {
            v.push("grid.dim: violates dim in {1,2,3}".into());
        }
        if self.grid.n < 8 {
            v.push("grid.n: violates n >= 8".into());
        }
        if !(self.model.eps > 0.0 && self.model.eps < 1.0) {
            v.push("model.eps: violates (0,1)".into());
        }
        if !(self.model.alpha > 0.0 && self.model.alpha < 1.0) {
            v.push("model.alpha: violates (0,1)".into());
        }
        if self.grid.n >= 8 && (1..=3).contains(&self.grid.dim) {
            let h = 1.0 / self.grid.n as f64;
            if h > self.model.eps / 4.0 {
                v.push(format!(
                    "resolution: h > eps/4 (h = {h}, eps/4 = {})",
                    self.model.eps / 4.0
                ));
            }
            if let Err(e) = self.shape.validate(self.grid.dim) {
                v.push(format!("shape: {e}"));
            }
        }
        let b = self.clamp_width();
        if b < 10.0 * self.model.eps {
            v.push(format!(
                "clamp_width: violates b >= 10*eps (b = {b}, 10*eps = {})",
                10.0 * self.model.eps
            ));
        }
        if !(self.stepping.safety > 0.0 && self.stepping.safety <= 1.0) {
            v.push("stepping.safety: violates (0,1]".into());
        }
        if self.stepping.t_final < 0.0 {
            v.push("stepping.t_final: violates T >= 0".into());
        }
        if self.stepping.cadence < 1 {
            v.push("stepping.cadence: violates cadence >= 1".into());
        }
        if let Some(dt) = self.stepping.dt {
            if let Ok(g) = Grid::new(self.grid.dim.clamp(1, 3), self.grid.n.max(8)) {
                let bound = stepper::stable_dt(g, self.model.eps, self.stepping.safety);
                if dt > bound * (1.0 + 1e-12) {
                    v.push(format!(
                        "stepping.dt: violates dt <= safety*min(h^2/(2d), eps^2/4) = {bound}"
                    ));
                }
            }
        }
        for (i, c) in self.diagnostics.radius_centers.iter().enumerate() {
            if c.len() != self.grid.dim {
                v.push(format!("diagnostics.radius_centers[{i}]: wrong dimension"));
            }
        }
        for (i, q) in self.diagnostics.kernel_queries.iter().enumerate() {
            if q.y.len() != self.grid.dim {
                v.push(format!("diagnostics.kernel_queries[{i}].y: wrong dimension"));
            }
            if !(q.s > 0.0) {
                v.push(format!("diagnostics.kernel_queries[{i}].s: violates s > 0"));
            }
        }
        for (i, r) in self.diagnostics.density_radii.iter().enumerate() {
            if !(*r > 0.0 && *r < 0.5) {
                v.push(format!("diagnostics.density_radii[{i}]: violates (0, 1/2)"));
            }
        }
        v
    }

    pub fn validate(&self) -> Result<(), Error> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else if v.len() == 1 {
            let (field, constraint) = v[0]
                .split_once(": ")
                .map(|(a, b)| (a.to_string(), b.to_string()))
                .unwrap_or_else(|| ("<config>".into(), v[0].clone()));
            Err(Error::Config { field, constraint })
        } else {
            Err(Error::ConfigList { messages: v })
        }
    }

    pub fn grid(&self) -> Result<Grid, Error> {
        Grid::new(self.grid.dim, self.grid.n)
    }

    /// Model parameters once the reference mass is known.
    pub fn model_params(&self, m0: f64) -> Result<ModelParams, Error> {
        ModelParams::new(self.model.eps, self.model.alpha, self.model.kind, m0)
    }

    pub fn step_control(&self, grid: Grid) -> Result<StepControl, Error> {
        let mut ctrl = StepControl::new(
            grid,
            self.model.eps,
            self.stepping.safety,
            self.stepping.scheme,
        )?;
        if let Some(dt) = self.stepping.dt {
            ctrl.dt = dt;
            ctrl.validate(grid, self.model.eps)?;
        }
        Ok(ctrl)
    }
}

fn apply_override(doc: &mut toml::Value, spec: &str) -> Result<(), Error> {
    let (path, raw) = spec.split_once('=').ok_or_else(|| Error::Config {
        field: spec.into(),
        constraint: "override must be key.path=value".into(),
    })?;
    // parse the value as TOML; fall back to a bare string
    let value: toml::Value = toml::from_str(&format!("v = {raw}"))
        .map(|t: toml::Value| t["v"].clone())
        .unwrap_or_else(|_| toml::Value::String(raw.to_string()));
    let mut node = doc;
    let parts: Vec<&str> = path.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let table = node.as_table_mut().ok_or_else(|| Error::Config {
            field: path.into(),
            constraint: format!("{} is not a table", parts[..i].join(".")),
        })?;
        if i + 1 == parts.len() {
            table.insert(part.to_string(), value);
            return Ok(());
        }
        node = table
            .entry(part.to_string())
            .or_insert(toml::Value::Table(Default::default()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[grid]
dim = 2
n = 256

[model]
kind = "takasao"
eps = 0.02

[shape]
kind = "ball"
center = [0.5, 0.5]
radius = 0.2

[stepping]
t_final = 0.001
"#;

    #[test]
    fn minimal_config_fills_defaults() {
        let cfg = RunConfig::parse(MINIMAL).unwrap();
        assert_eq!(cfg.model.alpha, 0.5);
        assert_eq!(cfg.stepping.safety, 0.2);
        assert_eq!(cfg.clamp_width(), 0.2); // max(10*0.02, 0.05)
        assert!(matches!(cfg.stepping.scheme, Scheme::ExplicitEuler));
    }

    #[test]
    fn alpha_out_of_range_is_named() {
        let text = MINIMAL.replace("eps = 0.02", "eps = 0.02\nalpha = 1.2");
        let err = RunConfig::parse(&text).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("model.alpha"), "got: {msg}");
        assert!(msg.contains("(0,1)"), "got: {msg}");
    }

    #[test]
    fn resolution_violation_is_reported() {
        let text = MINIMAL
            .replace("n = 256", "n = 64")
            .replace("eps = 0.02", "eps = 0.005");
        let err = RunConfig::parse(&text).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("h > eps/4"), "got: {msg}");
    }

    #[test]
    fn multiple_violations_all_reported() {
        let text = MINIMAL
            .replace("eps = 0.02", "eps = 0.005\nalpha = 7.0")
            .replace("radius = 0.2", "radius = 0.49");
        let err = RunConfig::parse(&text).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("model.alpha"));
        assert!(msg.contains("h > eps/4"));
        assert!(msg.contains("shape"));
    }

    #[test]
    fn overrides_apply_and_revalidate() {
        let cfg =
            RunConfig::parse_with_overrides(MINIMAL, &["model.eps=0.04".into()]).unwrap();
        assert_eq!(cfg.model.eps, 0.04);
        let err = RunConfig::parse_with_overrides(MINIMAL, &["model.alpha=1.5".into()]);
        assert!(err.is_err());
        // nested path and string value
        let cfg = RunConfig::parse_with_overrides(
            MINIMAL,
            &["output.csv=\"x.csv\"".into(), "stepping.cadence=10".into()],
        )
        .unwrap();
        assert_eq!(cfg.output.csv.as_deref(), Some(std::path::Path::new("x.csv")));
        assert_eq!(cfg.stepping.cadence, 10);
    }

    #[test]
    fn config_roundtrip() {
        let cfg = RunConfig::parse(MINIMAL).unwrap();
        let text = cfg.to_toml();
        let again = RunConfig::parse(&text).unwrap();
        assert_eq!(again.grid.n, cfg.grid.n);
        assert_eq!(again.model.eps, cfg.model.eps);
    }
}
