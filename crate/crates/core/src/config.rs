//! Run configuration: a sectioned TOML file with defaults for every key.
//!
//! ```toml
//! [kernel]
//! family = "gaussian"
//! sigma = 2.0
//!
//! [sim]
//! dt = 1e-3
//! epsilon = [1e-2, 1e-3, 1e-4]
//! ```
//!
//! Keys can be overridden one-for-one with `--section.key value`.

use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::front::FrontOptions;
use crate::grid::Grid;
use crate::model::{FiringRate, KernelFamily, KernelSpec, Model};
use crate::noise::{step_count, NoiseSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelSection {
    pub family: KernelFamily,
    pub sigma: f64,
}

impl Default for KernelSection {
    fn default() -> Self {
        Self { family: KernelFamily::Gaussian, sigma: 2.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FiringSection {
    pub beta: f64,
    pub theta: f64,
}

impl Default for FiringSection {
    fn default() -> Self {
        Self { beta: 8.0, theta: 0.4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub half_width: f64,
    pub n: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        Self { half_width: 40.0, n: 512 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FrontSection {
    pub dtau: f64,
    pub tol: f64,
    pub max_iters: usize,
    pub c_zero_tol: f64,
}

impl Default for FrontSection {
    fn default() -> Self {
        let o = FrontOptions::default();
        Self { dtau: o.dtau, tol: o.tol, max_iters: o.max_iters, c_zero_tol: o.c_zero_tol }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSection {
    pub t_end: f64,
    pub dt: f64,
    pub epsilon: Vec<f64>,
    pub m: f64,
    pub q: f64,
}

impl Default for SimSection {
    fn default() -> Self {
        Self { t_end: 5.0, dt: 1e-3, epsilon: vec![1e-2, 1e-3, 1e-4], m: 15.0, q: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSection {
    pub n_modes: usize,
    pub lambda0: f64,
    pub decay_exponent: f64,
    pub eta: f64,
}

impl Default for NoiseSection {
    fn default() -> Self {
        Self { n_modes: 32, lambda0: 0.1, decay_exponent: 2.0, eta: 0.25 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GapSection {
    /// front positions at which the certificate is computed
    pub shifts: Vec<f64>,
}

impl Default for GapSection {
    fn default() -> Self {
        Self { shifts: vec![-5.0, -2.5, 0.0, 2.5, 5.0] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McSection {
    pub n_paths: usize,
    pub base_seed: u64,
}

impl Default for McSection {
    fn default() -> Self {
        Self { n_paths: 200, base_seed: 20_240_601 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub directory: PathBuf,
    /// full-field snapshots every this many steps (0: none)
    pub snapshot_stride: usize,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { directory: PathBuf::from("neurofront-out"), snapshot_stride: 0 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub kernel: KernelSection,
    pub firing: FiringSection,
    pub grid: GridSection,
    pub front: FrontSection,
    pub sim: SimSection,
    pub noise: NoiseSection,
    pub gap: GapSection,
    pub mc: McSection,
    pub output: OutputSection,
}

fn parse_override_value(raw: &str) -> toml::Value {
    // reuse the TOML grammar for numbers, booleans and arrays; bare words are strings
    match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.to_string())),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

/// Applies `section.key = value` overrides to a parsed table.
pub fn apply_overrides(table: &mut toml::Table, overrides: &[(String, String)]) -> Result<()> {
    for (key, raw) in overrides {
        let (section, field) = key
            .split_once('.')
            .ok_or_else(|| Error::Config(format!("override `{key}` must have the form section.key")))?;
        let entry = table
            .entry(section.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        let toml::Value::Table(sec) = entry else {
            return Err(Error::Config(format!("`{section}` is not a section")));
        };
        sec.insert(field.to_string(), parse_override_value(raw));
    }
    Ok(())
}

impl RunConfig {
    /// Parses TOML text, applies overrides and validates.
    pub fn from_toml_str(text: &str, overrides: &[(String, String)]) -> Result<Self> {
        let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        apply_overrides(&mut table, overrides)?;
        let cfg: RunConfig = table.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads and validates a configuration file.
    pub fn load(path: &Path, overrides: &[(String, String)]) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text, overrides)
    }

    /// Checks every invariant and reports all failures together.
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        let mut need = |ok: bool, key: &str, msg: String| {
            if !ok {
                errs.push(format!("{key}: {msg}"));
            }
        };
        let pos = |x: f64| x.is_finite() && x > 0.0;
        need(pos(self.kernel.sigma), "kernel.sigma", format!("must be positive, got {}", self.kernel.sigma));
        need(pos(self.firing.beta), "firing.beta", format!("must be positive, got {}", self.firing.beta));
        need(
            self.firing.theta > 0.0 && self.firing.theta < 1.0,
            "firing.theta",
            format!("must lie in (0, 1), got {}", self.firing.theta),
        );
        need(pos(self.grid.half_width), "grid.half_width", format!("must be positive, got {}", self.grid.half_width));
        need(self.grid.n >= 16, "grid.n", format!("must be at least 16, got {}", self.grid.n));
        need(pos(self.front.dtau), "front.dtau", format!("must be positive, got {}", self.front.dtau));
        need(pos(self.front.tol), "front.tol", format!("must be positive, got {}", self.front.tol));
        need(self.front.max_iters > 0, "front.max_iters", "must be positive".into());
        need(pos(self.front.c_zero_tol), "front.c_zero_tol", format!("must be positive, got {}", self.front.c_zero_tol));
        need(pos(self.sim.t_end), "sim.t_end", format!("must be positive, got {}", self.sim.t_end));
        need(pos(self.sim.dt), "sim.dt", format!("must be positive, got {}", self.sim.dt));
        if pos(self.sim.t_end) && pos(self.sim.dt) {
            if let Err(e) = step_count(self.sim.t_end, self.sim.dt) {
                need(false, "sim.dt", e.to_string());
            }
        }
        need(!self.sim.epsilon.is_empty(), "sim.epsilon", "needs at least one value".into());
        for (i, &e) in self.sim.epsilon.iter().enumerate() {
            need(pos(e) && e < 1.0, &format!("sim.epsilon[{i}]"), format!("must lie in (0, 1), got {e}"));
        }
        need(pos(self.sim.m), "sim.m", format!("must be positive, got {}", self.sim.m));
        need(self.sim.q > 0.0 && self.sim.q < 0.5, "sim.q", format!("must lie in (0, 1/2), got {}", self.sim.q));
        need(self.noise.n_modes > 0, "noise.n_modes", "must be positive".into());
        need(
            self.noise.n_modes <= self.grid.n / 4,
            "noise.n_modes",
            format!("{} modes alias on {} grid points (at most N/4)", self.noise.n_modes, self.grid.n),
        );
        need(
            self.noise.lambda0.is_finite() && self.noise.lambda0 >= 0.0,
            "noise.lambda0",
            format!("must be nonnegative, got {}", self.noise.lambda0),
        );
        need(
            self.noise.decay_exponent.is_finite() && self.noise.decay_exponent > 1.0,
            "noise.decay_exponent",
            format!("must exceed 1, got {}", self.noise.decay_exponent),
        );
        need(self.noise.eta > 0.0 && self.noise.eta < 0.5, "noise.eta", format!("must lie in (0, 1/2), got {}", self.noise.eta));
        need(!self.gap.shifts.is_empty(), "gap.shifts", "needs at least one shift".into());
        for (i, &s) in self.gap.shifts.iter().enumerate() {
            need(
                s.is_finite() && s.abs() < 0.5 * self.grid.half_width,
                &format!("gap.shifts[{i}]"),
                format!("must lie inside half the window, got {s}"),
            );
        }
        match errs.len() {
            0 => Ok(()),
            1 => Err(Error::Config(errs.remove(0))),
            _ => Err(Error::ConfigList(errs)),
        }
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.grid.half_width, self.grid.n)
    }

    pub fn kernel(&self) -> Result<KernelSpec> {
        KernelSpec::new(self.kernel.family, self.kernel.sigma)
    }

    /// The firing rate; fails if `F'` violates the fixed-point stability conditions.
    pub fn firing(&self) -> Result<FiringRate> {
        FiringRate::new(self.firing.beta, self.firing.theta)
    }

    pub fn model(&self) -> Result<Model> {
        Ok(Model { kernel: self.kernel()?, firing: self.firing()? })
    }

    pub fn front_options(&self) -> FrontOptions {
        FrontOptions {
            dtau: self.front.dtau,
            tol: self.front.tol,
            max_iters: self.front.max_iters,
            c_zero_tol: self.front.c_zero_tol,
        }
    }

    pub fn noise_spec(&self, g: &Grid) -> Result<NoiseSpec> {
        NoiseSpec::new(g, self.noise.n_modes, self.noise.lambda0, self.noise.decay_exponent)
    }

    /// Canonical JSON form, the input of the config digest.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).unwrap_or_default()
    }
}
