//! Roughness-rating model: per-material, per-stimulus rating distributions
//! and the queries used to plan material substitution.
//!
//! Ratings are on the 1–100 slider whose centre (50) is the bare-finger
//! feel of the plywood baseline. Each (material, stimulus) cell is modeled
//! as a Normal distribution from its published mean and SD.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::types::{Material, Stimulus, StimulusLabel};

/// Embedded rating table, `material,stimulus,mean,sd`.
pub const RATINGS_CSV: &str = include_str!("../data/roughness_ratings.csv");

/// Rating of the baseline material without stimulus.
pub const BASELINE_ANCHOR: f64 = 50.0;

/// Stimulus order along which every material's mean must not increase.
pub const MODULATION_ORDER: [StimulusLabel; 7] = [
    StimulusLabel::A3,
    StimulusLabel::A2,
    StimulusLabel::A1,
    StimulusLabel::N,
    StimulusLabel::B1,
    StimulusLabel::B2,
    StimulusLabel::B3,
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Rating {
    pub mean: f64,
    pub sd: f64,
}

/// One candidate of a substitution ranking.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RankedStimulus {
    pub stimulus: StimulusLabel,
    pub overlap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RatingTable {
    entries: BTreeMap<(Material, StimulusLabel), Rating>,
    pub baseline_anchor: f64,
}

#[derive(serde::Deserialize)]
struct Row {
    material: String,
    stimulus: String,
    mean: f64,
    sd: f64,
}

impl RatingTable {
    /// The table shipped with the crate.
    pub fn embedded() -> Self {
        Self::from_csv(RATINGS_CSV).expect("embedded rating table is valid")
    }

    /// Parses and validates a rating CSV: exactly the 6 test materials × 7
    /// stimuli, means in [1, 100], positive SDs and monotone modulation.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let mut entries = BTreeMap::new();
        for (i, row) in rdr.deserialize::<Row>().enumerate() {
            let row = row?;
            let material: Material = row.material.parse()?;
            let stimulus: StimulusLabel = row.stimulus.parse()?;
            if !Material::TEST.contains(&material) {
                return Err(Error::RatingTable(format!(
                    "row {}: {material} is not a test material",
                    i + 1
                )));
            }
            if !(1.0..=100.0).contains(&row.mean) || !(row.sd > 0.0) || !row.sd.is_finite() {
                return Err(Error::RatingTable(format!(
                    "row {}: mean {} / sd {} out of range",
                    i + 1,
                    row.mean,
                    row.sd
                )));
            }
            let rating = Rating {
                mean: row.mean,
                sd: row.sd,
            };
            if entries.insert((material, stimulus), rating).is_some() {
                return Err(Error::RatingTable(format!(
                    "duplicate entry ({material}, {stimulus})"
                )));
            }
        }
        let expected = Material::TEST.len() * StimulusLabel::ALL.len();
        if entries.len() != expected {
            return Err(Error::RatingTable(format!(
                "expected {expected} entries, found {}",
                entries.len()
            )));
        }
        let table = RatingTable {
            entries,
            baseline_anchor: BASELINE_ANCHOR,
        };
        for m in Material::TEST {
            let means: Vec<f64> = MODULATION_ORDER
                .iter()
                .map(|&s| table.entries[&(m, s)].mean)
                .collect();
            if let Some(w) = means.windows(2).position(|w| w[0] < w[1]) {
                return Err(Error::RatingTable(format!(
                    "{m}: {} mean below {} mean",
                    MODULATION_ORDER[w],
                    MODULATION_ORDER[w + 1]
                )));
            }
        }
        Ok(table)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = (Material, StimulusLabel, Rating)> + '_ {
        self.entries.iter().map(|(&(m, s), &r)| (m, s, r))
    }

    /// Exact lookup. The baseline without stimulus is the slider anchor
    /// with zero spread.
    pub fn predicted_rating(&self, material: Material, stimulus: StimulusLabel) -> Result<Rating> {
        if material == Material::Plywood && stimulus == StimulusLabel::N {
            return Ok(Rating {
                mean: self.baseline_anchor,
                sd: 0.0,
            });
        }
        self.entries
            .get(&(material, stimulus))
            .copied()
            .ok_or_else(|| Error::UnknownRating {
                material: material.to_string(),
                stimulus: stimulus.to_string(),
            })
    }

    /// Overlap coefficient of the two cells' rating distributions.
    pub fn overlap(
        &self,
        a: (Material, StimulusLabel),
        b: (Material, StimulusLabel),
    ) -> Result<f64> {
        let ra = self.predicted_rating(a.0, a.1)?;
        let rb = self.predicted_rating(b.0, b.1)?;
        Ok(gaussian_overlap(ra.mean, ra.sd, rb.mean, rb.sd))
    }

    /// All seven stimuli on `physical`, ranked by how well they reproduce
    /// the unstimulated rating of `virtual_`.
    ///
    /// Scores within `tie_tolerance` of the best remaining score count as
    /// tied; ties go to the lower-intensity stimulus.
    pub fn rank_stimuli(
        &self,
        physical: Material,
        virtual_: Material,
        tie_tolerance: f64,
    ) -> Result<Vec<RankedStimulus>> {
        for m in [physical, virtual_] {
            if !Material::TEST.contains(&m) {
                return Err(Error::UnknownRating {
                    material: m.to_string(),
                    stimulus: "*".into(),
                });
            }
        }
        let mut pool = StimulusLabel::ALL
            .iter()
            .map(|&s| {
                Ok(RankedStimulus {
                    stimulus: s,
                    overlap: self.overlap((physical, s), (virtual_, StimulusLabel::N))?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let tol = tie_tolerance.max(0.0);
        let mut ranked = Vec::with_capacity(pool.len());
        while !pool.is_empty() {
            let best = pool
                .iter()
                .map(|r| r.overlap)
                .fold(f64::NEG_INFINITY, f64::max);
            let (idx, _) = pool
                .iter()
                .enumerate()
                .filter(|(_, r)| r.overlap >= best - tol)
                .min_by_key(|(_, r)| r.stimulus.intensity_rank())
                .expect("pool not empty");
            ranked.push(pool.remove(idx));
        }
        Ok(ranked)
    }

    /// Best stimulus for making `physical` feel like `virtual_`.
    pub fn recommend_stimulus(
        &self,
        physical: Material,
        virtual_: Material,
    ) -> Result<(Stimulus, f64)> {
        if physical == virtual_ {
            return Err(Error::IdentitySubstitution(physical.to_string()));
        }
        let top = self.rank_stimuli(physical, virtual_, 0.0)?[0];
        Ok((Stimulus::from(top.stimulus), top.overlap))
    }
}

fn normal_cdf<T: Scalar>(x: T, mean: T, sd: T) -> T {
    let z = (x - mean) / (sd * T::SQRT_2());
    T::lit(0.5 * libm::erfc(-z.as_f64()))
}

/// Overlap coefficient `∫ min(f_a, f_b)` of two Normal densities, from the
/// density intersection points.
///
/// A zero SD is a point mass: two identical point masses overlap fully,
/// anything else involving a point mass does not overlap.
pub fn gaussian_overlap<T: Scalar>(mean_a: T, sd_a: T, mean_b: T, sd_b: T) -> T {
    let zero = T::zero();
    if sd_a <= zero || sd_b <= zero {
        return if sd_a == sd_b && mean_a == mean_b {
            T::one()
        } else {
            zero
        };
    }
    // Canonical argument order keeps the result bit-symmetric.
    let (m1, s1, m2, s2) = if (sd_a, mean_a) <= (sd_b, mean_b) {
        (mean_a, sd_a, mean_b, sd_b)
    } else {
        (mean_b, sd_b, mean_a, sd_a)
    };
    let two = T::lit(2.0);
    if (s1 - s2).abs() <= T::epsilon() * s2 {
        if m1 == m2 {
            return T::one();
        }
        let d = (m1 - m2).abs();
        return two * normal_cdf(-d / two, zero, s1);
    }

    // Intersections solve a x² + b x + c = 0.
    let v1 = s1 * s1;
    let v2 = s2 * s2;
    let a = T::one() / (two * v1) - T::one() / (two * v2);
    let b = m2 / v2 - m1 / v1;
    let c = m1 * m1 / (two * v1) - m2 * m2 / (two * v2) + (s1 / s2).ln();
    let disc = (b * b - T::lit(4.0) * a * c).max(zero).sqrt();
    // Numerically stable root pair.
    let q = -(b + b.signum() * disc) / two;
    let (r1, r2) = if q == zero {
        (zero, zero)
    } else {
        (q / a, c / q)
    };
    let (x1, x2) = if r1 <= r2 { (r1, r2) } else { (r2, r1) };

    // s1 < s2: the narrower density is the larger one between the roots,
    // the wider one dominates both tails.
    let inner = normal_cdf(x2, m2, s2) - normal_cdf(x1, m2, s2);
    let outer = normal_cdf(x1, m1, s1) + (T::one() - normal_cdf(x2, m1, s1));
    ((outer + inner).min(T::one())).max(zero)
}
