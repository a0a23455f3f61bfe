use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::scalar::Scalar;

use super::plant::PlantParams;

/// Gauge-pressure sensor: additive Gaussian noise, quantization and a
/// zero-order hold at the sensor rate. Readings never go below zero.
#[derive(Debug, Clone)]
pub struct PressureSensor<T: Scalar> {
    rng: ChaCha8Rng,
    noise_sd: T,
    quantum: T,
    held: T,
}

impl<T: Scalar> PressureSensor<T> {
    pub fn new(params: &PlantParams<T>, seed: u64) -> Self {
        PressureSensor {
            rng: ChaCha8Rng::seed_from_u64(seed),
            noise_sd: params.sensor_noise_sd,
            quantum: params.sensor_quantization,
            held: T::zero(),
        }
    }

    /// Takes a new reading of `pressure` and holds it.
    pub fn sample(&mut self, pressure: T) -> T {
        let z: f64 = StandardNormal.sample(&mut self.rng);
        let mut reading = pressure + self.noise_sd * T::lit(z);
        if self.quantum > T::zero() {
            reading = (reading / self.quantum).round() * self.quantum;
        }
        self.held = reading.max(T::zero());
        self.held
    }

    /// Latest held reading.
    pub fn held(&self) -> T {
        self.held
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pneumo::calibrated_plant;

    #[test]
    fn readings_are_quantized_and_seeded() {
        let p = calibrated_plant::<f64>();
        let mut a = PressureSensor::new(&p, 3);
        let mut b = PressureSensor::new(&p, 3);
        for _ in 0..200 {
            let ra = a.sample(8.0);
            assert_eq!(ra, b.sample(8.0));
            let q = ra / p.sensor_quantization;
            assert!((q - q.round()).abs() < 1e-6);
        }
        assert_eq!(a.held(), b.held());
    }

    #[test]
    fn noise_statistics() {
        let p = PlantParams {
            sensor_quantization: 0.0,
            ..calibrated_plant::<f64>()
        };
        let mut s = PressureSensor::new(&p, 11);
        let xs: Vec<f64> = (0..20_000).map(|_| s.sample(10.0) - 10.0).collect();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / xs.len() as f64).sqrt();
        assert!(mean.abs() < 0.02);
        assert!((sd - p.sensor_noise_sd).abs() < 0.02 * p.sensor_noise_sd.max(0.1) * 5.0);
    }
}
