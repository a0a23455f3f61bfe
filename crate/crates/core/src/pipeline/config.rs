use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pneumo::{PneumoConfig, FORCE_RANGE_N};
use crate::session::scheduler::MAX_STIMULUS_MS;
use crate::session::SchedulerConfig;
use crate::tracking::{TrajectoryProfile, CAPTURE_RATE_HZ};
use crate::types::{Material, StimulusLabel};
use crate::vibro::LraModel;

pub const SCENARIO_SCHEMA: u32 = 1;
/// Longest accepted scenario, s.
pub const MAX_DURATION_S: f64 = 600.0;

/// Per-stage latencies, ms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatencyBudget {
    /// One capture interval at 30 Hz.
    pub capture: f64,
    pub estimation: f64,
    /// One render frame.
    pub synthesis: f64,
    /// Expected pneumatic activation time (reported against, not injected).
    pub actuation_on: f64,
    /// Expected pneumatic deactivation time (reported against, not injected).
    pub actuation_off: f64,
}

impl Default for LatencyBudget {
    fn default() -> Self {
        let capture = 1000.0 / CAPTURE_RATE_HZ;
        let synthesis = 1.0;
        LatencyBudget {
            capture,
            estimation: 53.53 - capture - synthesis,
            synthesis,
            actuation_on: 145.83,
            actuation_off: 329.17,
        }
    }
}

impl LatencyBudget {
    /// Contact-to-vibration delay, ms.
    pub fn vibro_total(&self) -> f64 {
        self.capture + self.estimation + self.synthesis
    }

    fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("budget.capture", self.capture),
            ("budget.estimation", self.estimation),
            ("budget.synthesis", self.synthesis),
            ("budget.actuation_on", self.actuation_on),
            ("budget.actuation_off", self.actuation_off),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("must be a non-negative number of ms, got {v}"),
                });
            }
        }
        Ok(())
    }
}

/// One finger-on-object interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContactSpan {
    pub material: Material,
    pub begin_ms: u64,
    /// Omitted: contact lasts to the end of the scenario.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub end_ms: Option<u64>,
}

/// Scenario document (`schema: 1`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema: u32,
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    pub duration_s: f64,
    pub trajectory: TrajectoryProfile<f64>,
    pub contacts: Vec<ContactSpan>,
    /// Physical material → stimulus.
    pub mapping: BTreeMap<Material, StimulusLabel>,
    #[serde(default = "default_force")]
    pub normal_force_n: f64,
    #[serde(default = "default_wavelength")]
    pub wavelength_mm: f64,
    #[serde(default)]
    pub refractory_ms: u64,
    #[serde(default = "default_max_stimulus")]
    pub max_stimulus_ms: u64,
    /// Never drive both actuators at once.
    #[serde(default = "default_true")]
    pub exclusive: bool,
    #[serde(default)]
    pub budget: LatencyBudget,
    /// SD of seeded extra vibro latency, ms. The applied delay never drops
    /// below the budget.
    #[serde(default)]
    pub jitter_sd_ms: f64,
    #[serde(default)]
    pub lra: LraModel<f64>,
    /// Plant/gain document, relative to the scenario file. Calibrated
    /// defaults when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pneumo_config: Option<PathBuf>,
    #[serde(skip)]
    pub pneumo: PneumoConfig<f64>,
}

fn default_force() -> f64 {
    1.0
}
fn default_wavelength() -> f64 {
    1.0
}
fn default_max_stimulus() -> u64 {
    MAX_STIMULUS_MS
}
fn default_true() -> bool {
    true
}

fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

impl ScenarioConfig {
    /// A scenario with calibrated defaults and no contacts.
    pub fn new(name: &str, duration_s: f64, trajectory: TrajectoryProfile<f64>) -> Self {
        ScenarioConfig {
            schema: SCENARIO_SCHEMA,
            name: name.to_string(),
            seed: 0,
            duration_s,
            trajectory,
            contacts: Vec::new(),
            mapping: BTreeMap::new(),
            normal_force_n: default_force(),
            wavelength_mm: default_wavelength(),
            refractory_ms: 0,
            max_stimulus_ms: MAX_STIMULUS_MS,
            exclusive: true,
            budget: LatencyBudget::default(),
            jitter_sd_ms: 0.0,
            lra: LraModel::default(),
            pneumo_config: None,
            pneumo: PneumoConfig::default(),
        }
    }

    pub fn with_contact(mut self, material: Material, begin_ms: u64, end_ms: Option<u64>) -> Self {
        self.contacts.push(ContactSpan {
            material,
            begin_ms,
            end_ms,
        });
        self
    }

    pub fn with_mapping(mut self, material: Material, stimulus: StimulusLabel) -> Self {
        self.mapping.insert(material, stimulus);
        self
    }

    /// Parses and validates a scenario. `base_dir` resolves
    /// `pneumo_config`.
    pub fn from_json(text: &str, base_dir: Option<&Path>) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let mut cfg: ScenarioConfig = serde_path_to_error::deserialize(de)
            .map_err(|e| Error::Parse(format!("{}: {}", e.path(), e.inner())))?;
        if cfg.schema != SCENARIO_SCHEMA {
            return Err(Error::Parse(format!(
                "schema: unsupported version {} (expected {SCENARIO_SCHEMA})",
                cfg.schema
            )));
        }
        if let Some(rel) = &cfg.pneumo_config {
            let path = match base_dir {
                Some(dir) if rel.is_relative() => dir.join(rel),
                _ => rel.clone(),
            };
            cfg.pneumo = PneumoConfig::load(&path)
                .map_err(|e| Error::Parse(format!("pneumo_config: {e}")))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text, path.parent()).map_err(|e| match e {
            Error::Parse(m) => Error::Parse(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("scenario serializes");
        s.push('\n');
        s
    }

    pub fn duration_ms(&self) -> u64 {
        (self.duration_s * 1000.0).round() as u64
    }

    pub fn scheduler_config(&self) -> SchedulerConfig {
        SchedulerConfig {
            mapping: self.mapping.clone(),
            max_stimulus_ms: self.max_stimulus_ms,
            refractory_ms: self.refractory_ms,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration_s > 0.0 && self.duration_s <= MAX_DURATION_S) {
            return Err(invalid(
                "duration_s",
                format!(
                    "must be in (0, {MAX_DURATION_S}] s, got {}",
                    self.duration_s
                ),
            ));
        }
        self.trajectory
            .validate()
            .map_err(|e| Error::Parse(format!("trajectory: {e}")))?;
        let end = self.duration_ms();
        for (i, c) in self.contacts.iter().enumerate() {
            if c.begin_ms >= end {
                return Err(Error::Parse(format!(
                    "contacts[{i}].begin_ms: {} is not before the scenario end ({end} ms)",
                    c.begin_ms
                )));
            }
            if c.end_ms.is_some_and(|e| e <= c.begin_ms) {
                return Err(Error::Parse(format!(
                    "contacts[{i}].end_ms: must be after begin_ms"
                )));
            }
        }
        if !(self.normal_force_n >= FORCE_RANGE_N.0 && self.normal_force_n <= FORCE_RANGE_N.1) {
            return Err(invalid(
                "normal_force_n",
                format!(
                    "{} N outside [{}, {}]",
                    self.normal_force_n, FORCE_RANGE_N.0, FORCE_RANGE_N.1
                ),
            ));
        }
        if !(self.wavelength_mm > 0.0 && self.wavelength_mm.is_finite()) {
            return Err(invalid("wavelength_mm", "must be positive"));
        }
        if self.max_stimulus_ms == 0 {
            return Err(invalid("max_stimulus_ms", "must be positive"));
        }
        if !(self.jitter_sd_ms >= 0.0 && self.jitter_sd_ms.is_finite()) {
            return Err(invalid("jitter_sd_ms", "must be non-negative"));
        }
        self.budget.validate()?;
        self.pneumo.plant.validate()?;
        self.pneumo.gains.validate()?;
        for (name, period) in [
            ("gains.sample_period", self.pneumo.gains.sample_period),
            ("plant.sensor_rate", 1.0 / self.pneumo.plant.sensor_rate),
        ] {
            let ticks = period * 1000.0;
            if (ticks - ticks.round()).abs() > 1e-9 || ticks < 1.0 {
                return Err(invalid(name, "must be a whole number of 1 ms ticks"));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "schema": 1,
        "name": "t",
        "duration_s": 2.0,
        "trajectory": {"kind": "constant", "speed_mm_s": 100},
        "contacts": [{"material": "glass", "begin_ms": 100}],
        "mapping": {"glass": "A1"}
    }"#;

    #[test]
    fn defaults_fill_in() {
        let cfg = ScenarioConfig::from_json(MINIMAL, None).unwrap();
        assert_eq!(cfg.normal_force_n, 1.0);
        assert!(cfg.exclusive);
        assert!((cfg.budget.vibro_total() - 53.53).abs() < 1e-9);
        assert_eq!(cfg.pneumo, PneumoConfig::default());
        let again = ScenarioConfig::from_json(&cfg.to_json(), None).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn errors_name_the_field() {
        let bad = MINIMAL.replace("\"glass\", \"begin_ms\"", "\"oak\", \"begin_ms\"");
        let e = ScenarioConfig::from_json(&bad, None)
            .unwrap_err()
            .to_string();
        assert!(e.contains("contacts[0].material"), "{e}");

        let bad = MINIMAL.replace("\"A1\"", "\"Z9\"");
        let e = ScenarioConfig::from_json(&bad, None)
            .unwrap_err()
            .to_string();
        assert!(e.contains("mapping"), "{e}");

        let bad = MINIMAL.replace("\"schema\": 1", "\"schema\": 2");
        let e = ScenarioConfig::from_json(&bad, None)
            .unwrap_err()
            .to_string();
        assert!(e.contains("schema"), "{e}");

        let bad = MINIMAL.replace("\"duration_s\": 2.0", "\"duration_s\": 2.0, \"colour\": 1");
        let e = ScenarioConfig::from_json(&bad, None)
            .unwrap_err()
            .to_string();
        assert!(e.contains("colour"), "{e}");

        let bad = MINIMAL.replace("\"begin_ms\": 100", "\"begin_ms\": 100, \"end_ms\": 50");
        let e = ScenarioConfig::from_json(&bad, None)
            .unwrap_err()
            .to_string();
        assert!(e.contains("contacts[0].end_ms"), "{e}");

        let bad = MINIMAL.replace("\"speed_mm_s\": 100", "\"speed_mm_s\": 900");
        let e = ScenarioConfig::from_json(&bad, None)
            .unwrap_err()
            .to_string();
        assert!(e.contains("trajectory"), "{e}");
    }

    #[test]
    fn pneumo_config_resolves_relative() {
        let dir = tempfile::tempdir().unwrap();
        let mut p = PneumoConfig::<f64>::default();
        p.gains.kp = 0.1;
        std::fs::write(dir.path().join("plant.json"), p.to_json()).unwrap();
        let text = MINIMAL.replace(
            "\"schema\": 1,",
            "\"schema\": 1, \"pneumo_config\": \"plant.json\",",
        );
        let path = dir.path().join("s.json");
        std::fs::write(&path, text).unwrap();
        let cfg = ScenarioConfig::load(&path).unwrap();
        assert_eq!(cfg.pneumo.gains.kp, 0.1);
    }
}
