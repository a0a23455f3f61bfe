use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Converts tube volume flow (mL/s per mL of tube) into pressure rate:
/// the isothermal ideal-gas linearization `dP = P_atm · dV / V`, kPa.
pub const PRESSURE_GAIN_KPA: f64 = 101.325;
/// Hard physical clamp on tube gauge pressure, kPa.
pub const MAX_PLANT_PRESSURE: f64 = 15.0;
/// Largest explicit-Euler step accepted by [`plant_step`], s.
pub const MAX_INNER_DT: f64 = 0.01;

/// Pump, tube, leak and sensor parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct PlantParams<T: Scalar> {
    /// mL
    pub tube_volume: T,
    /// mL/s at zero back-pressure
    pub pump_max_flow: T,
    /// mL/s lost per kPa of back-pressure
    pub pump_flow_droop: T,
    /// mL/s per kPa
    pub leak_coeff: T,
    /// mL/s through the vent valve at full negative duty
    pub valve_vent_flow: T,
    /// Hz
    pub sensor_rate: T,
    /// kPa
    pub sensor_noise_sd: T,
    /// kPa
    pub sensor_quantization: T,
}

impl<T: Scalar> PlantParams<T> {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("tube_volume", self.tube_volume),
            ("pump_max_flow", self.pump_max_flow),
            ("pump_flow_droop", self.pump_flow_droop),
            ("leak_coeff", self.leak_coeff),
            ("valve_vent_flow", self.valve_vent_flow),
            ("sensor_rate", self.sensor_rate),
            ("sensor_noise_sd", self.sensor_noise_sd),
            ("sensor_quantization", self.sensor_quantization),
        ];
        for (name, v) in fields {
            if !v.is_finite() || v < T::zero() {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("{v} must be finite and non-negative"),
                });
            }
        }
        if !(self.tube_volume > T::zero()) || !(self.sensor_rate > T::zero()) {
            return Err(Error::InvalidParameter {
                name: "tube_volume",
                reason: "tube volume and sensor rate must be positive".into(),
            });
        }
        Ok(())
    }

    /// Pressure rate per unit net flow, kPa per mL.
    pub fn pressure_gain(&self) -> T {
        T::lit(PRESSURE_GAIN_KPA) / self.tube_volume
    }

    /// Net volume flow into the tube at `pressure` for pump `duty`, mL/s.
    pub fn net_flow(&self, duty: T, pressure: T) -> T {
        let duty = duty.clamp_to(-T::one(), T::one());
        let inflow = if duty >= T::zero() {
            duty * (self.pump_max_flow - self.pump_flow_droop * pressure).max(T::zero())
        } else {
            duty * self.valve_vent_flow
        };
        inflow - self.leak_coeff * pressure
    }

    /// Steady-state pressure under constant non-negative `duty`.
    pub fn equilibrium(&self, duty: T) -> T {
        let duty = duty.clamp_to(T::zero(), T::one());
        let loss = duty * self.pump_flow_droop + self.leak_coeff;
        if loss <= T::zero() {
            return if duty > T::zero() {
                T::lit(MAX_PLANT_PRESSURE)
            } else {
                T::zero()
            };
        }
        (duty * self.pump_max_flow / loss).min(T::lit(MAX_PLANT_PRESSURE))
    }
}

/// Simulated tube state. Advances only through [`plant_step`].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct PlantState<T: Scalar> {
    pub t: T,
    /// Gauge pressure, kPa, within [0, 15].
    pub pressure: T,
    /// Last applied duty in [-1, 1]; negative vents.
    pub pump_duty: T,
}

/// One explicit-Euler step. `duty` is clamped to [-1, 1] and `dt` to
/// [0, 10 ms].
pub fn plant_step<T: Scalar>(
    state: PlantState<T>,
    duty: T,
    dt: T,
    params: &PlantParams<T>,
) -> PlantState<T> {
    let duty = if duty.is_nan() {
        T::zero()
    } else {
        duty.clamp_to(-T::one(), T::one())
    };
    let dt = if dt.is_nan() {
        T::zero()
    } else {
        dt.clamp_to(T::zero(), T::lit(MAX_INNER_DT))
    };
    let rate = params.pressure_gain() * params.net_flow(duty, state.pressure);
    let pressure = (state.pressure + dt * rate).clamp_to(T::zero(), T::lit(MAX_PLANT_PRESSURE));
    PlantState {
        t: state.t + dt,
        pressure,
        pump_duty: duty,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pneumo::calibrated_plant;

    #[test]
    fn closed_system_holds_pressure() {
        let p = PlantParams {
            leak_coeff: 0.0,
            ..calibrated_plant::<f64>()
        };
        let s = PlantState {
            pressure: 7.5,
            ..Default::default()
        };
        let next = plant_step(s, 0.0, 0.001, &p);
        assert_eq!(next.pressure, 7.5);
        assert!((next.t - 0.001).abs() < 1e-15);
    }

    #[test]
    fn leak_decays_monotonically() {
        let p = calibrated_plant::<f64>();
        assert!(p.leak_coeff > 0.0);
        let mut s = PlantState {
            pressure: 10.0,
            ..Default::default()
        };
        for _ in 0..5000 {
            let next = plant_step(s, 0.0, 0.001, &p);
            assert!(next.pressure < s.pressure || next.pressure == 0.0);
            s = next;
        }
        assert!(s.pressure < 10.0 && s.pressure >= 0.0);
    }

    #[test]
    fn full_duty_rises_to_equilibrium() {
        let p = calibrated_plant::<f64>();
        let eq = p.equilibrium(1.0);
        let expected = (p.pump_max_flow / (p.pump_flow_droop + p.leak_coeff)).min(15.0);
        assert!((eq - expected).abs() < 1e-12);
        let mut s = PlantState::default();
        for _ in 0..20_000 {
            let next = plant_step(s, 1.0, 0.001, &p);
            assert!(next.pressure >= s.pressure);
            s = next;
        }
        assert!((s.pressure - eq).abs() < 1e-3, "{} vs {eq}", s.pressure);
    }

    #[test]
    fn inputs_are_clamped() {
        let p = calibrated_plant::<f64>();
        let s = PlantState::default();
        let a = plant_step(s, 5.0, 0.001, &p);
        let b = plant_step(s, 1.0, 0.001, &p);
        assert_eq!(a, b);
        let c = plant_step(s, 1.0, 1.0, &p);
        let d = plant_step(s, 1.0, 0.01, &p);
        assert_eq!(c, d);
        let vent = plant_step(s, -1.0, 0.01, &p);
        assert_eq!(vent.pressure, 0.0);
    }

    #[test]
    fn validate_rejects_negative() {
        let p = PlantParams {
            leak_coeff: -1.0,
            ..calibrated_plant::<f64>()
        };
        assert!(p.validate().is_err());
        calibrated_plant::<f32>().validate().unwrap();
    }
}
