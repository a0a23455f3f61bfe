//! Shared domain vocabulary: stimuli, materials and configuration records.
//!
//! Units are fixed by field name: accelerations in m/s², pressures in kPa,
//! lengths in mm, times in s. Conversions happen only at parse boundaries.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{check_range, Error, Result};
use crate::scalar::Scalar;

/// Upper bound of the validated vibrotactile range, m/s².
pub const MAX_VIBRO_ACCEL: f64 = 10.0;
/// Upper bound of the validated pneumatic range, kPa.
pub const MAX_PNEUMO_PRESSURE: f64 = 12.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum StimulusLabel {
    N,
    A1,
    A2,
    A3,
    B1,
    B2,
    B3,
}

impl StimulusLabel {
    pub const ALL: [StimulusLabel; 7] = [
        StimulusLabel::N,
        StimulusLabel::A1,
        StimulusLabel::A2,
        StimulusLabel::A3,
        StimulusLabel::B1,
        StimulusLabel::B2,
        StimulusLabel::B3,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            StimulusLabel::N => "N",
            StimulusLabel::A1 => "A1",
            StimulusLabel::A2 => "A2",
            StimulusLabel::A3 => "A3",
            StimulusLabel::B1 => "B1",
            StimulusLabel::B2 => "B2",
            StimulusLabel::B3 => "B3",
        }
    }

    pub fn kind(self) -> StimulusKind {
        match self {
            StimulusLabel::N => StimulusKind::None,
            StimulusLabel::A1 | StimulusLabel::A2 | StimulusLabel::A3 => StimulusKind::Vibro,
            StimulusLabel::B1 | StimulusLabel::B2 | StimulusLabel::B3 => StimulusKind::Pneumo,
        }
    }

    /// Position in the energy ordering N < A1 < B1 < A2 < B2 < A3 < B3.
    pub fn intensity_rank(self) -> u8 {
        match self {
            StimulusLabel::N => 0,
            StimulusLabel::A1 => 1,
            StimulusLabel::B1 => 2,
            StimulusLabel::A2 => 3,
            StimulusLabel::B2 => 4,
            StimulusLabel::A3 => 5,
            StimulusLabel::B3 => 6,
        }
    }

    pub fn stimulus(self) -> Stimulus {
        Stimulus::from(self)
    }
}

impl fmt::Display for StimulusLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StimulusLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        StimulusLabel::ALL
            .into_iter()
            .find(|l| l.as_str().eq_ignore_ascii_case(t))
            .ok_or_else(|| Error::UnknownStimulus(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StimulusKind {
    None,
    Vibro,
    Pneumo,
}

/// A canonical haptic stimulus.
///
/// `vibro_accel` is present iff the kind is `Vibro`, `pneumo_pressure` iff
/// it is `Pneumo`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stimulus {
    pub kind: StimulusKind,
    /// Peak acceleration at 250 Hz, m/s².
    pub vibro_accel: Option<f64>,
    /// Target gauge pressure, kPa.
    pub pneumo_pressure: Option<f64>,
    pub label: StimulusLabel,
}

impl From<StimulusLabel> for Stimulus {
    fn from(label: StimulusLabel) -> Self {
        let (vibro_accel, pneumo_pressure) = match label {
            StimulusLabel::N => (None, None),
            StimulusLabel::A1 => (Some(3.7), None),
            StimulusLabel::A2 => (Some(4.9), None),
            StimulusLabel::A3 => (Some(6.2), None),
            StimulusLabel::B1 => (None, Some(6.0)),
            StimulusLabel::B2 => (None, Some(8.0)),
            StimulusLabel::B3 => (None, Some(10.0)),
        };
        Stimulus {
            kind: label.kind(),
            vibro_accel,
            pneumo_pressure,
            label,
        }
    }
}

impl Stimulus {
    pub const NONE: Stimulus = Stimulus {
        kind: StimulusKind::None,
        vibro_accel: None,
        pneumo_pressure: None,
        label: StimulusLabel::N,
    };

    /// Checks the field/kind consistency and the validated ranges.
    pub fn validate(&self) -> Result<()> {
        match (self.kind, self.vibro_accel, self.pneumo_pressure) {
            (StimulusKind::None, None, None) => Ok(()),
            (StimulusKind::Vibro, Some(a), None) if a > 0.0 => {
                check_range("vibro_accel", a, 0.0, MAX_VIBRO_ACCEL)
            }
            (StimulusKind::Pneumo, None, Some(p)) if p > 0.0 => {
                check_range("pneumo_pressure", p, 0.0, MAX_PNEUMO_PRESSURE)
            }
            _ => Err(Error::InvalidParameter {
                name: "stimulus",
                reason: format!("inconsistent fields for {:?}", self.kind),
            }),
        }
    }
}

impl fmt::Display for Stimulus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.vibro_accel, self.pneumo_pressure) {
            (Some(a), _) => write!(f, "{} ({a} m/s² @ 250 Hz)", self.label),
            (_, Some(p)) => write!(f, "{} ({p} kPa)", self.label),
            _ => write!(f, "{} (no stimulus)", self.label),
        }
    }
}

/// Parses a canonical stimulus label, case-insensitively.
pub fn stimulus_from_label(label: &str) -> Result<Stimulus> {
    label.parse::<StimulusLabel>().map(Stimulus::from)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Material {
    Glass,
    Ceramics,
    Paper,
    Plywood,
    BalsaWood,
    Cotton,
    Leather,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MaterialRole {
    Test,
    Baseline,
}

impl Material {
    pub const ALL: [Material; 7] = [
        Material::Glass,
        Material::Ceramics,
        Material::Paper,
        Material::Plywood,
        Material::BalsaWood,
        Material::Cotton,
        Material::Leather,
    ];

    /// The six test materials, smoothest to roughest by bare-finger rating.
    pub const TEST: [Material; 6] = [
        Material::Glass,
        Material::Ceramics,
        Material::Paper,
        Material::BalsaWood,
        Material::Cotton,
        Material::Leather,
    ];

    pub fn role(self) -> MaterialRole {
        match self {
            Material::Plywood => MaterialRole::Baseline,
            _ => MaterialRole::Test,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Material::Glass => "glass",
            Material::Ceramics => "ceramics",
            Material::Paper => "paper",
            Material::Plywood => "plywood",
            Material::BalsaWood => "balsa_wood",
            Material::Cotton => "cotton",
            Material::Leather => "leather",
        }
    }
}

impl fmt::Display for Material {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Material {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace(['-', ' '], "_");
        let m = match norm.as_str() {
            "glass" => Material::Glass,
            "ceramics" | "ceramic" => Material::Ceramics,
            "paper" => Material::Paper,
            "plywood" => Material::Plywood,
            "balsa_wood" | "balsawood" | "balsa" | "wood" => Material::BalsaWood,
            "cotton" => Material::Cotton,
            "leather" => Material::Leather,
            _ => return Err(Error::UnknownMaterial(s.to_string())),
        };
        Ok(m)
    }
}

/// Parameters of the speed-driven sinusoidal drive waveform.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct WaveformParams<T: Scalar> {
    /// Drive amplitude, normalized full scale in [0, 1].
    pub amplitude: T,
    /// Spatial wavelength of the virtual surface, mm.
    pub wavelength_mm: T,
    /// Initial phase, rad.
    pub phase: T,
    /// Render frames per second.
    pub render_rate: T,
    /// Drive samples per second.
    pub sample_rate: T,
}

impl<T: Scalar> Default for WaveformParams<T> {
    fn default() -> Self {
        WaveformParams {
            amplitude: T::one(),
            wavelength_mm: T::one(),
            phase: T::zero(),
            render_rate: T::lit(1000.0),
            sample_rate: T::lit(3000.0),
        }
    }
}

impl<T: Scalar> WaveformParams<T> {
    pub fn with_amplitude(mut self, amplitude: T) -> Self {
        self.amplitude = amplitude;
        self
    }

    pub fn with_wavelength(mut self, wavelength_mm: T) -> Self {
        self.wavelength_mm = wavelength_mm;
        self
    }

    /// Validates the record for a trace whose peak speed is `max_speed` mm/s.
    pub fn validate(&self, max_speed: T) -> Result<()> {
        check_range("amplitude", self.amplitude.as_f64(), 0.0, 1.0)?;
        if !(self.wavelength_mm > T::zero()) || !self.wavelength_mm.is_finite() {
            return Err(Error::InvalidParameter {
                name: "wavelength_mm",
                reason: "must be positive".into(),
            });
        }
        if !(self.sample_rate > T::zero()) || !(self.render_rate > T::zero()) {
            return Err(Error::InvalidParameter {
                name: "sample_rate",
                reason: "sample and render rates must be positive".into(),
            });
        }
        let freq = max_speed / self.wavelength_mm;
        let nyquist = self.sample_rate / T::lit(2.0);
        if freq > nyquist {
            return Err(Error::Nyquist {
                freq_hz: freq.as_f64(),
                nyquist_hz: nyquist.as_f64(),
            });
        }
        Ok(())
    }

    /// Samples per render frame; errors unless the ratio is a whole number.
    pub fn block_len(&self) -> Result<usize> {
        let ratio = (self.sample_rate / self.render_rate).as_f64();
        let n = ratio.round();
        if n < 1.0 || (ratio - n).abs() > 1e-9 {
            return Err(Error::InvalidParameter {
                name: "render_rate",
                reason: format!(
                    "sample_rate / render_rate = {ratio} is not a whole number of samples"
                ),
            });
        }
        Ok(n as usize)
    }
}

/// Gains and limits of the pressure controller.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct PidGains<T: Scalar> {
    pub kp: T,
    pub ki: T,
    pub kd: T,
    /// Controller period, s.
    pub sample_period: T,
    /// Pump duty limits `[min, max]`, a subset of [-1, 1].
    pub output_limits: [T; 2],
}

impl<T: Scalar> PidGains<T> {
    pub fn new(kp: T, ki: T, kd: T) -> Self {
        PidGains {
            kp,
            ki,
            kd,
            sample_period: T::lit(0.05),
            output_limits: [-T::one(), T::one()],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let [lo, hi] = self.output_limits;
        if !(lo >= -T::one() && hi <= T::one() && lo <= hi) {
            return Err(Error::InvalidParameter {
                name: "output_limits",
                reason: format!("[{lo}, {hi}] is not an ordered subset of [-1, 1]"),
            });
        }
        if !(self.sample_period > T::zero()) {
            return Err(Error::InvalidParameter {
                name: "sample_period",
                reason: "must be positive".into(),
            });
        }
        for (name, g) in [("kp", self.kp), ("ki", self.ki), ("kd", self.kd)] {
            if !g.is_finite() || g < T::zero() {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("gain {g} must be finite and non-negative"),
                });
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_map_to_canonical_parameters() {
        let a3 = stimulus_from_label("A3").unwrap();
        assert_eq!(a3.kind, StimulusKind::Vibro);
        assert_eq!(a3.vibro_accel, Some(6.2));
        assert_eq!(a3.pneumo_pressure, None);

        let b1 = stimulus_from_label("b1").unwrap();
        assert_eq!(b1.kind, StimulusKind::Pneumo);
        assert_eq!(b1.pneumo_pressure, Some(6.0));

        let n = stimulus_from_label(" n ").unwrap();
        assert_eq!(n, Stimulus::NONE);
    }

    #[test]
    fn unknown_label_names_the_text() {
        let err = stimulus_from_label("C4").unwrap_err();
        assert_eq!(err, Error::UnknownStimulus("C4".into()));
        assert!(err.to_string().contains("C4"));
    }

    #[test]
    fn label_round_trip_is_identity() {
        for l in StimulusLabel::ALL {
            let s = stimulus_from_label(l.as_str()).unwrap();
            assert_eq!(s.label, l);
            s.validate().unwrap();
        }
        let accels: Vec<_> = StimulusLabel::ALL
            .iter()
            .filter_map(|l| l.stimulus().vibro_accel)
            .collect();
        assert_eq!(accels, vec![3.7, 4.9, 6.2]);
    }

    #[test]
    fn exactly_one_baseline_material() {
        let baselines: Vec<_> = Material::ALL
            .iter()
            .filter(|m| m.role() == MaterialRole::Baseline)
            .collect();
        assert_eq!(baselines, vec![&Material::Plywood]);
        for m in Material::ALL {
            assert_eq!(m.as_str().parse::<Material>().unwrap(), m);
        }
        assert_eq!("wood".parse::<Material>().unwrap(), Material::BalsaWood);
    }

    #[test]
    fn intensity_ordering() {
        let mut labels = StimulusLabel::ALL;
        labels.sort_by_key(|l| l.intensity_rank());
        let names: Vec<_> = labels.iter().map(|l| l.as_str()).collect();
        assert_eq!(names, ["N", "A1", "B1", "A2", "B2", "A3", "B3"]);
    }

    #[test]
    fn waveform_defaults_and_nyquist_guard() {
        let p = WaveformParams::<f64>::default();
        assert_eq!(p.wavelength_mm, 1.0);
        assert_eq!(p.phase, 0.0);
        assert_eq!(p.block_len().unwrap(), 3);
        p.validate(400.0).unwrap();
        assert!(matches!(p.validate(1600.0), Err(Error::Nyquist { .. })));
        let bad = WaveformParams {
            render_rate: 700.0,
            ..p
        };
        assert!(bad.block_len().is_err());
    }

    #[test]
    fn pid_gain_limits() {
        let g = PidGains::<f32>::new(0.1, 0.5, 0.0);
        assert_eq!(g.sample_period, 0.05);
        g.validate().unwrap();
        let bad = PidGains {
            output_limits: [-2.0, 1.0],
            ..g
        };
        assert!(bad.validate().is_err());
    }
}
