use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::types::PidGains;

use super::plant::PlantParams;

pub const CONFIG_SCHEMA: u32 = 1;

/// Versioned plant and controller configuration document.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "", deny_unknown_fields)]
pub struct PneumoConfig<T: Scalar> {
    pub schema: u32,
    pub plant: PlantParams<T>,
    pub gains: PidGains<T>,
}

impl<T: Scalar> Default for PneumoConfig<T> {
    fn default() -> Self {
        PneumoConfig {
            schema: CONFIG_SCHEMA,
            plant: super::calibrated_plant(),
            gains: super::calibrated_gains(),
        }
    }
}

impl<T: Scalar> PneumoConfig<T> {
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: PneumoConfig<T> = serde_path_to_error::deserialize(de)
            .map_err(|e| Error::Parse(format!("{}: {}", e.path(), e.inner())))?;
        if cfg.schema != CONFIG_SCHEMA {
            return Err(Error::Parse(format!(
                "schema: unsupported version {} (expected {CONFIG_SCHEMA})",
                cfg.schema
            )));
        }
        cfg.plant.validate()?;
        cfg.gains.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let cfg = PneumoConfig::<f64>::default();
        let back = PneumoConfig::<f64>::from_json(&cfg.to_json()).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn errors_carry_field_paths() {
        let mut v: serde_json::Value =
            serde_json::from_str(&PneumoConfig::<f64>::default().to_json()).unwrap();
        v["plant"]["leak_coeff"] = serde_json::json!("lots");
        let err = PneumoConfig::<f64>::from_json(&v.to_string()).unwrap_err();
        assert!(err.to_string().contains("plant.leak_coeff"), "{err}");

        v["plant"]["leak_coeff"] = serde_json::json!(0.1);
        v["schema"] = serde_json::json!(2);
        assert!(PneumoConfig::<f64>::from_json(&v.to_string()).is_err());
    }
}

#[cfg(test)]
mod checked_in {
    use super::*;

    #[test]
    fn checked_in_config_matches_compiled_defaults() {
        let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/plant.json");
        let cfg = PneumoConfig::<f64>::load(&path).unwrap();
        assert_eq!(cfg, PneumoConfig::default());
    }
}
