//! Run configuration.
//!
//! A run is described by a TOML file; every key is optional and missing
//! keys take case-dependent defaults. The resolved [`RunConfig`] has every
//! field filled in and is what gets echoed into result metadata.
//!
//! ```toml
//! case = "single_transport"
//! modes = 1
//!
//! [physics]
//! a = 1e5
//! d = 1562.0
//!
//! [sweep]
//! tf_min = 12.0
//! tf_max = 34.0
//! tf_steps = 12
//!
//! [simulation]
//! frame = "co_moving"
//!
//! [output]
//! path = "single.csv"
//! format = "csv"
//! ```

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{EstaError, Result};
use crate::experiments::{tf_grid, CaseConfig, SimOptions};
use crate::models::{CaseId, CaseModel};
use crate::quadrature::AdaptiveGl;

/// Result file format.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verbosity {
    Error,
    #[default]
    Warn,
    Info,
    Debug,
}

impl Verbosity {
    pub fn level(self) -> log::LevelFilter {
        match self {
            Verbosity::Error => log::LevelFilter::Error,
            Verbosity::Warn => log::LevelFilter::Warn,
            Verbosity::Info => log::LevelFilter::Info,
            Verbosity::Debug => log::LevelFilter::Debug,
        }
    }
}

/// Physical parameters. Keys that a case does not use are still echoed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Physics {
    /// Trap depth in units of the trap quantum.
    pub a: f64,
    /// Transport distance.
    pub d: f64,
    /// Dimensionless Coulomb constant of the ion pair.
    pub coulomb: f64,
    /// Carrier frequency of the two-level drive.
    pub omega_carrier: f64,
    /// Total mass of the ion pair.
    pub total_mass: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub tf_min: f64,
    pub tf_max: f64,
    pub tf_steps: usize,
    /// Fidelity level of the threshold time.
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    /// Result file; standard output when absent.
    pub path: Option<PathBuf>,
    pub format: Format,
    /// Record wall-clock timings in the JSON sidecar. Switch off for
    /// byte-reproducible output.
    pub timings: bool,
}

/// Fully resolved configuration of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub case: CaseId,
    /// Number of excited modes `N` in the correction.
    pub modes: usize,
    pub physics: Physics,
    pub sweep: SweepSpec,
    pub simulation: SimOptions,
    pub quadrature: AdaptiveGl,
    pub output: OutputSpec,
    pub verbosity: Verbosity,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawPhysics {
    a: Option<f64>,
    d: Option<f64>,
    coulomb: Option<f64>,
    omega_carrier: Option<f64>,
    total_mass: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawSweep {
    tf_min: Option<f64>,
    tf_max: Option<f64>,
    tf_steps: Option<usize>,
    threshold: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawOutput {
    path: Option<PathBuf>,
    format: Option<Format>,
    timings: Option<bool>,
}

/// Configuration as written, before defaults are applied.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PartialConfig {
    case: Option<CaseId>,
    modes: Option<usize>,
    physics: RawPhysics,
    sweep: RawSweep,
    simulation: SimOptions,
    quadrature: AdaptiveGl,
    output: RawOutput,
    verbosity: Verbosity,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub case: Option<CaseId>,
    pub tf_min: Option<f64>,
    pub tf_max: Option<f64>,
    pub tf_steps: Option<usize>,
    pub modes: Option<usize>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
}

fn parse_error(path: String, err: impl std::fmt::Display) -> EstaError {
    let key = if path.is_empty() || path == "." { "<root>".to_string() } else { path };
    EstaError::config(key, err.to_string())
}

impl PartialConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let de = toml::Deserializer::parse(text).map_err(|e| parse_error(String::new(), e.message()))?;
        serde_path_to_error::deserialize(de).map_err(|e| parse_error(e.path().to_string(), e.inner().message()))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| EstaError::Io { path: path.display().to_string(), message: e.to_string() })?;
        Self::from_toml_str(&text)
    }

    pub fn apply(&mut self, o: &Overrides) {
        self.case = o.case.or(self.case);
        self.modes = o.modes.or(self.modes);
        self.sweep.tf_min = o.tf_min.or(self.sweep.tf_min);
        self.sweep.tf_max = o.tf_max.or(self.sweep.tf_max);
        self.sweep.tf_steps = o.tf_steps.or(self.sweep.tf_steps);
        if o.out.is_some() {
            self.output.path = o.out.clone();
        }
        self.output.format = o.format.or(self.output.format);
    }

    /// Fills in defaults and validates.
    pub fn resolve(self) -> Result<RunConfig> {
        let case = self.case.unwrap_or(CaseId::SingleTransport);
        let p = self.physics;
        let physics = Physics {
            a: p.a.unwrap_or(1e5),
            d: p.d.unwrap_or(if case == CaseId::TwoIon { 100.0 } else { 1562.0 }),
            // r_eq = 20 for the pair
            coulomb: p.coulomb.unwrap_or(64000.0),
            omega_carrier: p.omega_carrier.unwrap_or(1.0),
            total_mass: p.total_mass.unwrap_or(2.0),
        };
        let (lo, hi) = default_tf_range(case, physics.omega_carrier);
        let s = self.sweep;
        let sweep = SweepSpec {
            tf_min: s.tf_min.unwrap_or(lo),
            tf_max: s.tf_max.unwrap_or(hi),
            tf_steps: s.tf_steps.unwrap_or(12),
            threshold: s.threshold.unwrap_or(0.99),
        };
        let output = OutputSpec {
            path: self.output.path,
            format: self.output.format.unwrap_or_default(),
            timings: self.output.timings.unwrap_or(true),
        };
        let cfg = RunConfig {
            case,
            modes: self.modes.unwrap_or(1),
            physics,
            sweep,
            simulation: self.simulation,
            quadrature: self.quadrature,
            output,
            verbosity: self.verbosity,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Default `t_f` range of a case: the non-adiabatic region up to near
/// adiabatic fidelities.
pub fn default_tf_range(case: CaseId, omega_carrier: f64) -> (f64, f64) {
    match case {
        CaseId::TwoLevel => (8.0 * PI / omega_carrier, 13.5 * PI / omega_carrier),
        CaseId::SingleTransport => (12.0, 34.0),
        CaseId::TwoIon => (4.0, 15.0),
    }
}

impl RunConfig {
    /// Parses a TOML file with command-line overrides.
    pub fn load(path: Option<&Path>, overrides: &Overrides) -> Result<Self> {
        let mut partial = match path {
            Some(p) => PartialConfig::from_file(p)?,
            None => PartialConfig::default(),
        };
        partial.apply(overrides);
        partial.resolve()
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        PartialConfig::from_toml_str(text)?.resolve()
    }

    /// Parses a resolved configuration, e.g. the echo in a JSON sidecar.
    pub fn from_json_value(value: serde_json::Value) -> Result<Self> {
        let cfg: RunConfig =
            serde_path_to_error::deserialize(value).map_err(|e| parse_error(e.path().to_string(), e.inner()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |key: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(EstaError::config(key, format!("must be positive and finite, got {v}")))
            }
        };
        let p = &self.physics;
        positive("physics.a", p.a)?;
        positive("physics.d", p.d)?;
        positive("physics.coulomb", p.coulomb)?;
        positive("physics.omega_carrier", p.omega_carrier)?;
        positive("physics.total_mass", p.total_mass)?;
        if self.case == CaseId::TwoIon && p.total_mass != 2.0 {
            return Err(EstaError::config("physics.total_mass", "only pairs of unit-mass ions (total 2) are modelled"));
        }
        if self.modes == 0 {
            return Err(EstaError::config("modes", "at least one excited mode is required"));
        }
        if self.case == CaseId::TwoLevel && self.modes != 1 {
            return Err(EstaError::config("modes", "a two-level system has exactly one excited mode"));
        }
        let s = &self.sweep;
        positive("sweep.tf_min", s.tf_min)?;
        positive("sweep.tf_max", s.tf_max)?;
        if s.tf_steps == 0 {
            return Err(EstaError::config("sweep.tf_steps", "must be at least 1"));
        }
        if s.tf_steps > 1 && !(s.tf_max > s.tf_min) {
            return Err(EstaError::config("sweep.tf_max", "must exceed sweep.tf_min for more than one step"));
        }
        if !(s.threshold > 0.0 && s.threshold < 1.0) {
            return Err(EstaError::config("sweep.threshold", format!("must lie in (0, 1), got {}", s.threshold)));
        }
        let sim = &self.simulation;
        let pow2 = |key: &str, n: usize| {
            if n.is_power_of_two() && n >= 2 {
                Ok(())
            } else {
                Err(EstaError::config(key, format!("must be a power of two, got {n}")))
            }
        };
        if let Some(n) = sim.points {
            pow2("simulation.points", n)?;
        }
        pow2("simulation.relative_points", sim.relative_points)?;
        pow2("simulation.max_points", sim.max_points)?;
        if let Some(dt) = sim.dt {
            positive("simulation.dt", dt)?;
        }
        if let Some(w) = sim.half_width {
            positive("simulation.half_width", w)?;
        }
        positive("simulation.edge_tol", sim.edge_tol)?;
        positive("simulation.two_level_tol", sim.two_level_tol)?;
        let q = &self.quadrature;
        if q.order == 0 || q.initial_panels == 0 || q.max_panels < q.initial_panels {
            return Err(EstaError::config("quadrature", "order and panel counts must be positive and ordered"));
        }
        positive("quadrature.rel_tol", q.rel_tol)?;
        Ok(())
    }

    pub fn model(&self) -> CaseModel {
        let p = &self.physics;
        match self.case {
            CaseId::TwoLevel => CaseModel::two_level(p.omega_carrier),
            CaseId::SingleTransport => CaseModel::single_transport(p.a, p.d),
            CaseId::TwoIon => CaseModel::two_ion(p.a, p.d, p.coulomb),
        }
    }

    pub fn case_config(&self) -> CaseConfig {
        CaseConfig { model: self.model(), n_modes: self.modes, sim: self.simulation.clone(), quad: self.quadrature }
    }

    pub fn tf_values(&self) -> Result<Vec<f64>> {
        tf_grid(self.sweep.tf_min, self.sweep.tf_max, self.sweep.tf_steps)
    }
}
