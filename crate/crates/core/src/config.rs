// Copyright 2026 czpulse contributors
// SPDX-License-Identifier: Apache-2.0

//! TOML run configuration.
//!
//! ```toml
//! qubits = [0, 2]            # optional, defaults to every fixed mode
//!
//! [[mode]]
//! label = "Q1"
//! freq_ghz = 6.0
//! anh_ghz = -0.25
//! levels = 4
//!
//! [[mode]]
//! label = "C"
//! freq_ghz = 7.87            # idle point of the coupler
//! anh_ghz = -0.30
//! levels = 4
//! tunable = true
//!
//! [[coupling]]
//! pair = [0, 1]
//! rho = 0.018
//!
//! [flux]
//! omega_max_ghz = 8.2
//! alpha_c_ghz = -0.3
//!
//! [pulse]
//! kind = "awp"
//! tg_ns = 30.0
//! bound_ghz = 5.75
//! filter_mhz = 300.0
//!
//! [job]
//! experiment = "fig4a"
//! seed = 7
//! axis = [{ name = "tg_ns", values = [24.0, 30.0] }]
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CircuitSpec, CouplingSpec, FluxMapSpec, ModeSpec};
use crate::noise::NoiseSpec;
use crate::optimize::{Axis, OptimizerOptions};
use crate::pulse::{self, PulseKind, TransformOrder};
use crate::spectrum::linspace;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeEntry {
    pub label: String,
    pub freq_ghz: f64,
    pub anh_ghz: f64,
    pub levels: usize,
    #[serde(default)]
    pub tunable: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingEntry {
    pub pair: [usize; 2],
    pub rho: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FluxEntry {
    pub omega_max_ghz: f64,
    pub alpha_c_ghz: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PulseConfig {
    /// "awp", "fourier" or "netzero"
    pub kind: String,
    pub tg_ns: f64,
    pub mmax: usize,
    /// fixed λ values (GHz/ns); empty means optimize
    pub lambdas: Vec<f64>,
    /// far end of the tabulated coupler range (GHz)
    pub bound_ghz: Option<f64>,
    pub filter_mhz: Option<f64>,
    /// reflection coefficient and delay (ns)
    pub distortion: Option<[f64; 2]>,
    /// "distort-filter" or "filter-distort"
    pub order: String,
    pub dt_ns: f64,
    /// truncation used for gate dynamics; falls back to the mode levels
    pub levels: Option<usize>,
}

impl Default for PulseConfig {
    fn default() -> Self {
        PulseConfig {
            kind: "awp".into(),
            tg_ns: 30.0,
            mmax: 1,
            lambdas: Vec::new(),
            bound_ghz: None,
            filter_mhz: None,
            distortion: None,
            order: "distort-filter".into(),
            dt_ns: pulse::DEFAULT_DT,
            levels: None,
        }
    }
}

impl PulseConfig {
    pub fn kind(&self) -> Result<PulseKind> {
        PulseKind::parse(&self.kind).ok_or_else(|| Error::Config(format!("unknown pulse kind '{}'", self.kind)))
    }

    pub fn order(&self) -> Result<TransformOrder> {
        match self.order.as_str() {
            "distort-filter" => Ok(TransformOrder::DistortThenFilter),
            "filter-distort" => Ok(TransformOrder::FilterThenDistort),
            o => Err(Error::Config(format!("unknown transform order '{o}'"))),
        }
    }

    pub fn bound(&self) -> Result<f64> {
        self.bound_ghz.ok_or_else(|| Error::Config("pulse.bound_ghz is required for gate simulations".into()))
    }

    pub fn validate(&self) -> Result<()> {
        self.kind()?;
        self.order()?;
        if !(self.tg_ns > 0.0) {
            return Err(Error::Config("pulse.tg_ns must be positive".into()));
        }
        if !(1..=4).contains(&self.mmax) {
            return Err(Error::Config(format!("pulse.mmax = {} outside [1, 4]", self.mmax)));
        }
        if !(self.dt_ns > 0.0 && self.dt_ns <= 1.0) {
            return Err(Error::Config("pulse.dt_ns must be in (0, 1]".into()));
        }
        if let Some(f) = self.filter_mhz {
            if !(f > 0.0) {
                return Err(Error::Config("pulse.filter_mhz must be positive".into()));
            }
        }
        if let Some([r, td]) = self.distortion {
            if !(r.abs() < 1.0 && td >= 0.0) {
                return Err(Error::Config("pulse.distortion needs |r| < 1 and td >= 0".into()));
            }
        }
        Ok(())
    }
}

/// One sweep axis: explicit `values`, or `points` samples on `[start, stop]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisEntry {
    pub name: String,
    pub values: Option<Vec<f64>>,
    pub start: Option<f64>,
    pub stop: Option<f64>,
    pub points: Option<usize>,
}

impl AxisEntry {
    pub fn to_axis(&self) -> Result<Axis> {
        let values = match (&self.values, self.start, self.stop, self.points) {
            (Some(v), None, None, None) => v.clone(),
            (None, Some(a), Some(b), Some(n)) => {
                if n == 0 {
                    Vec::new()
                } else {
                    linspace(a, b, n)
                }
            }
            _ => {
                return Err(Error::Config(format!(
                    "axis '{}' needs either values or start/stop/points",
                    self.name
                )))
            }
        };
        Ok(Axis { name: self.name.clone(), values })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct JobConfig {
    pub experiment: Option<String>,
    pub seed: u64,
    /// 0 selects every logical core
    pub workers: usize,
    pub axis: Vec<AxisEntry>,
    /// experiment-specific scalars
    pub params: BTreeMap<String, f64>,
}

impl Default for JobConfig {
    fn default() -> Self {
        JobConfig { experiment: None, seed: 0, workers: 0, axis: Vec::new(), params: BTreeMap::new() }
    }
}

impl JobConfig {
    /// Axis `name` from the config, or `default` values.
    pub fn axis_or(&self, name: &str, default: Vec<f64>) -> Result<Axis> {
        match self.axis.iter().find(|a| a.name == name) {
            Some(a) => a.to_axis(),
            None => Ok(Axis { name: name.into(), values: default }),
        }
    }

    pub fn param_or(&self, name: &str, default: f64) -> f64 {
        self.params.get(name).copied().unwrap_or(default)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumRange {
    pub start_ghz: f64,
    pub stop_ghz: f64,
    pub points: usize,
}

impl SpectrumRange {
    /// Ascending sample grid. Empty or reversed ranges are usage errors.
    pub fn grid(&self) -> Result<Vec<f64>> {
        if self.points < 2 || !(self.stop_ghz > self.start_ghz) {
            return Err(Error::Domain(format!(
                "empty spectrum range [{}, {}] with {} points",
                self.start_ghz, self.stop_ghz, self.points
            )));
        }
        Ok(linspace(self.start_ghz, self.stop_ghz, self.points))
    }
}

/// Parsed configuration file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub qubits: Option<Vec<usize>>,
    #[serde(rename = "mode")]
    pub modes: Vec<ModeEntry>,
    #[serde(rename = "coupling", default)]
    pub couplings: Vec<CouplingEntry>,
    #[serde(default)]
    pub flux: Option<FluxEntry>,
    #[serde(default)]
    pub pulse: PulseConfig,
    #[serde(default)]
    pub noise: Option<NoiseSpec>,
    #[serde(default)]
    pub optimizer: OptimizerOptions,
    #[serde(default)]
    pub job: JobConfig,
    #[serde(default)]
    pub spectrum: Option<SpectrumRange>,
}

impl Config {
    /// Parse and validate TOML text. Syntax errors carry the line and column.
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text).map_err(|e| Error::Config(e.to_string().trim_end().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let spec = self.circuit()?;
        self.pulse.validate()?;
        self.optimizer.validate()?;
        if let Some(n) = &self.noise {
            n.validate(spec.n_modes())?;
        }
        for a in &self.job.axis {
            a.to_axis()?;
        }
        Ok(())
    }

    /// Circuit as written, coupler at its configured idle frequency.
    pub fn circuit(&self) -> Result<CircuitSpec> {
        let modes = self
            .modes
            .iter()
            .map(|m| ModeSpec::new(&m.label, m.freq_ghz, m.anh_ghz, m.levels, m.tunable))
            .collect();
        let couplings = self.couplings.iter().map(|c| CouplingSpec::new(c.pair[0], c.pair[1], c.rho)).collect();
        let flux = self.flux.as_ref().map(|f| FluxMapSpec { omega_max: f.omega_max_ghz, alpha_c: f.alpha_c_ghz });
        let spec = CircuitSpec::new(modes, couplings, flux)?;
        match &self.qubits {
            Some(q) => spec.with_qubits(q.clone()),
            None => Ok(spec),
        }
    }

    /// Circuit truncated for gate dynamics.
    pub fn dynamics_circuit(&self) -> Result<CircuitSpec> {
        let spec = self.circuit()?;
        Ok(match self.pulse.levels {
            Some(l) => spec.with_levels(l),
            None => spec,
        })
    }

    /// Configured idle frequency of the coupler (GHz).
    pub fn idle(&self) -> Result<f64> {
        let spec = self.circuit()?;
        Ok(spec.modes[spec.coupler_index].frequency)
    }

    pub fn noise(&self) -> Result<&NoiseSpec> {
        self.noise.as_ref().ok_or_else(|| Error::Config("this command needs a [noise] section".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
[[mode]]
label = "Q1"
freq_ghz = 6.0
anh_ghz = -0.25
levels = 3

[[mode]]
label = "C"
freq_ghz = 7.87
anh_ghz = -0.30
levels = 3
tunable = true

[[mode]]
label = "Q2"
freq_ghz = 5.4
anh_ghz = -0.25
levels = 3

[[coupling]]
pair = [0, 1]
rho = 0.018

[[coupling]]
pair = [1, 2]
rho = 0.018

[[coupling]]
pair = [0, 2]
rho = 0.0015
"#;

    #[test]
    fn parses_reference_circuit() {
        let cfg = Config::parse(BASE).unwrap();
        let spec = cfg.circuit().unwrap();
        let reference = crate::model::reference_circuit(3);
        assert_eq!(spec.qubit_indices, vec![0, 2]);
        assert_eq!(spec.coupler_index, 1);
        assert_eq!(spec.couplings, reference.couplings);
        assert_eq!(cfg.idle().unwrap(), 7.87);
        assert_eq!(cfg.pulse.kind().unwrap(), PulseKind::Awp);
    }

    #[test]
    fn syntax_error_reports_line() {
        let text = format!("{BASE}\n[pulse]\ntg_ns = = 3\n");
        let line = text.lines().position(|l| l.starts_with("tg_ns")).unwrap() + 1;
        let msg = Config::parse(&text).unwrap_err().to_string();
        assert!(msg.contains(&format!("line {line}")), "{msg}");
    }

    #[test]
    fn unknown_key_rejected() {
        let text = format!("{BASE}\n[pulse]\ngate_time = 30.0\n");
        let msg = Config::parse(&text).unwrap_err().to_string();
        assert!(msg.contains("gate_time"), "{msg}");
    }

    #[test]
    fn strong_coupling_rejected() {
        let text = BASE.replace("rho = 0.0015", "rho = 0.15");
        assert!(matches!(Config::parse(&text), Err(Error::Config(_))));
    }

    #[test]
    fn noise_length_checked() {
        let text = format!("{BASE}\n[noise]\nt1_us = [20.0, 10.0]\nflux_a_uphi0sq = 100.0\nsigma_uphi0 = 60.0\n");
        assert!(Config::parse(&text).is_err());
        let text = format!("{BASE}\n[noise]\nt1_us = [20.0, 10.0, 20.0]\nflux_a_uphi0sq = 100.0\nsigma_uphi0 = 60.0\n");
        let cfg = Config::parse(&text).unwrap();
        assert_eq!(cfg.noise().unwrap().f_ir_hz, 0.01);
    }

    #[test]
    fn axes_from_range_or_values() {
        let text = format!(
            "{BASE}\n[job]\nexperiment = \"fig4a\"\naxis = [{{ name = \"tg_ns\", values = [24.0, 30.0] }}, {{ name = \"x\", start = 0.0, stop = 1.0, points = 3 }}]\n"
        );
        let cfg = Config::parse(&text).unwrap();
        assert_eq!(cfg.job.axis_or("tg_ns", vec![]).unwrap().values, vec![24.0, 30.0]);
        assert_eq!(cfg.job.axis_or("x", vec![]).unwrap().values, vec![0.0, 0.5, 1.0]);
        assert_eq!(cfg.job.axis_or("y", vec![2.0]).unwrap().values, vec![2.0]);
        let bad = format!("{BASE}\n[job]\naxis = [{{ name = \"x\", start = 0.0 }}]\n");
        assert!(Config::parse(&bad).is_err());
    }

    #[test]
    fn empty_spectrum_range_is_domain_error() {
        let r = SpectrumRange { start_ghz: 6.0, stop_ghz: 6.0, points: 10 };
        assert!(matches!(r.grid(), Err(Error::Domain(_))));
        let r = SpectrumRange { start_ghz: 6.0, stop_ghz: 7.0, points: 3 };
        assert_eq!(r.grid().unwrap(), vec![6.0, 6.5, 7.0]);
    }
}
