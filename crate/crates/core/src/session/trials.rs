//! Rating-experiment trial plans: Latin-square material order, shuffled
//! stimulus blocks, training and baseline flags.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::Result;
use crate::types::{Material, StimulusLabel};

pub const REPETITIONS: u32 = 5;
/// A baseline reference is presented after every this many trials.
pub const BASELINE_EVERY: usize = 6;
pub const TRIAL_COUNT: usize = 6 * 7 * REPETITIONS as usize;

/// Balanced (Williams) 6×6 Latin square over indices into `Material::TEST`.
/// Every material takes every position once, and every ordered pair of
/// neighbours occurs exactly once.
pub const LATIN_SQUARE: [[usize; 6]; 6] = williams6();

const fn williams6() -> [[usize; 6]; 6] {
    let first = [0, 1, 5, 2, 4, 3];
    let mut sq = [[0; 6]; 6];
    let mut r = 0;
    while r < 6 {
        let mut c = 0;
        while c < 6 {
            sq[r][c] = (first[c] + r) % 6;
            c += 1;
        }
        r += 1;
    }
    sq
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Trial {
    pub index: usize,
    pub material: Material,
    pub stimulus: StimulusLabel,
    /// 1-based repetition of this (material, stimulus) pair.
    pub repetition: u32,
    /// First repetition: familiarization only, not analysed.
    pub is_training: bool,
    /// A baseline presentation follows this trial.
    pub is_baseline: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrialPlan {
    pub seed: u64,
    pub participant: u64,
    pub material_order: [Material; 6],
    pub trials: Vec<Trial>,
}

pub fn material_order(participant: u64) -> [Material; 6] {
    LATIN_SQUARE[(participant % 6) as usize].map(|i| Material::TEST[i])
}

/// Deterministic plan for one participant.
pub fn generate_trials(seed: u64, participant: u64) -> TrialPlan {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(participant);
    let order = material_order(participant);
    let mut trials = Vec::with_capacity(TRIAL_COUNT);
    for material in order {
        for repetition in 1..=REPETITIONS {
            let mut block = StimulusLabel::ALL;
            block.shuffle(&mut rng);
            for stimulus in block {
                let index = trials.len();
                trials.push(Trial {
                    index,
                    material,
                    stimulus,
                    repetition,
                    is_training: repetition == 1,
                    is_baseline: (index + 1) % BASELINE_EVERY == 0,
                });
            }
        }
    }
    TrialPlan {
        seed,
        participant,
        material_order: order,
        trials,
    }
}

impl TrialPlan {
    /// CSV: `index,material,stimulus,repetition,is_training,is_baseline`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        for t in &self.trials {
            wtr.serialize(t)?;
        }
        wtr.flush()?;
        Ok(())
    }
}
