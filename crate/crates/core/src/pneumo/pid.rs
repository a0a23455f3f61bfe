use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;
use crate::types::PidGains;

/// Integrator and derivative memory of the positional PID.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct PidState<T: Scalar> {
    pub integral: T,
    pub prev_measurement: Option<T>,
}

/// One controller tick. Returns a duty within `gains.output_limits`.
///
/// Derivative acts on the measurement so setpoint steps do not kick. The
/// integrator is frozen whenever integrating would push a saturated output
/// further into saturation.
pub fn pid_tick<T: Scalar>(
    setpoint: T,
    measurement: T,
    gains: &PidGains<T>,
    state: &mut PidState<T>,
) -> T {
    let [lo, hi] = gains.output_limits;
    let dt = gains.sample_period;
    let error = setpoint - measurement;

    let p = gains.kp * error;
    let d = match state.prev_measurement {
        Some(prev) if dt > T::zero() => -gains.kd * (measurement - prev) / dt,
        _ => T::zero(),
    };
    state.prev_measurement = Some(measurement);

    let candidate = state.integral + gains.ki * error * dt;
    let unsat = p + candidate + d;
    let winding_up = (unsat > hi && error > T::zero()) || (unsat < lo && error < T::zero());
    if !winding_up {
        state.integral = candidate.clamp_to(lo, hi);
    }
    (p + state.integral + d).clamp_to(lo, hi)
}

/// Stateful wrapper around [`pid_tick`].
#[derive(Debug, Clone, PartialEq)]
pub struct PidController<T: Scalar> {
    pub gains: PidGains<T>,
    state: PidState<T>,
}

impl<T: Scalar> PidController<T> {
    pub fn new(gains: PidGains<T>) -> Self {
        PidController {
            gains,
            state: PidState::default(),
        }
    }

    pub fn tick(&mut self, setpoint: T, measurement: T) -> T {
        pid_tick(setpoint, measurement, &self.gains, &mut self.state)
    }

    pub fn state(&self) -> &PidState<T> {
        &self.state
    }

    pub fn reset(&mut self) {
        self.state = PidState::default();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_error_zero_duty() {
        let g = PidGains::new(0.3, 2.0, 0.01);
        let mut s = PidState::default();
        assert_eq!(pid_tick(4.0, 4.0, &g, &mut s), 0.0);
    }

    #[test]
    fn proportional_only() {
        let g = PidGains::<f64>::new(0.05, 0.0, 0.0);
        let mut s = PidState::default();
        assert!((pid_tick(10.0, 0.0, &g, &mut s) - 0.5).abs() < 1e-15);
        let g = PidGains::new(0.3, 0.0, 0.0);
        assert_eq!(pid_tick(10.0, 0.0, &g, &mut PidState::default()), 1.0);
        let g = PidGains {
            output_limits: [-0.4, 0.8],
            ..PidGains::new(1.0, 0.0, 0.0)
        };
        assert_eq!(pid_tick(0.0, 10.0, &g, &mut PidState::default()), -0.4);
    }

    #[test]
    fn anti_windup_freezes_integrator() {
        let g = PidGains::new(1.0, 5.0, 0.0);
        let mut s = PidState::default();
        for _ in 0..100 {
            assert_eq!(pid_tick(10.0, 0.0, &g, &mut s), 1.0);
        }
        assert_eq!(s.integral, 0.0);
        // Unwinds immediately once the error reverses.
        assert!(pid_tick(10.0, 10.5, &g, &mut s) < 0.0);
    }

    #[test]
    fn integrator_accumulates_inside_limits() {
        let g = PidGains::<f64>::new(0.0, 1.0, 0.0);
        let mut c = PidController::new(g);
        let u1 = c.tick(1.0, 0.0);
        let u2 = c.tick(1.0, 0.0);
        assert!((u1 - 0.05).abs() < 1e-12);
        assert!((u2 - 0.10).abs() < 1e-12);
        c.reset();
        assert_eq!(c.state().integral, 0.0);
    }

    #[test]
    fn derivative_on_measurement() {
        let g = PidGains::<f64>::new(0.0, 0.0, 0.01);
        let mut s = PidState::default();
        assert_eq!(pid_tick(10.0, 0.0, &g, &mut s), 0.0);
        let u = pid_tick(10.0, 1.0, &g, &mut s);
        assert!((u + 0.01 * 1.0 / 0.05).abs() < 1e-12);
    }
}
