use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid_io::{Condition, ResponseRow, SubjectResponses, Trial};

/// Expected RT in ms for a display.
pub trait RtModel {
    fn rt_ms(&self, condition: Condition, distance_px: f64) -> f64;
}

/// `base + (diff ? diff_penalty : 0) + slope(condition) * distance`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearRtModel {
    pub base_ms: f64,
    pub diff_penalty_ms: f64,
    pub same_ms_per_px: f64,
    pub diff_ms_per_px: f64,
}

impl Default for LinearRtModel {
    fn default() -> Self {
        LinearRtModel {
            base_ms: 620.0,
            diff_penalty_ms: 90.0,
            same_ms_per_px: 0.35,
            diff_ms_per_px: 0.0,
        }
    }
}

impl RtModel for LinearRtModel {
    fn rt_ms(&self, condition: Condition, distance_px: f64) -> f64 {
        if condition.is_same() {
            self.base_ms + self.same_ms_per_px * distance_px
        } else {
            self.base_ms + self.diff_penalty_ms + self.diff_ms_per_px * distance_px
        }
    }
}

impl<F: Fn(Condition, f64) -> f64> RtModel for F {
    fn rt_ms(&self, condition: Condition, distance_px: f64) -> f64 {
        self(condition, distance_px)
    }
}

/// Probability of a correct response in generated data.
pub const ACCURACY: f64 = 0.9;
/// Generated RTs never fall below this.
pub const MIN_RT_MS: f64 = 150.0;

/// Counterbalanced responses: images are taken in manifest order and subject
/// `s` sees image `i` only in condition `(i + s) mod 4`, so every four
/// subjects cover the full trial set. RT = model + N(0, noise_ms).
pub fn gen_responses(
    manifest: &[Trial],
    n_subjects: usize,
    model: &dyn RtModel,
    noise_ms: f64,
    seed: u64,
) -> Result<SubjectResponses> {
    if n_subjects < 2 {
        return Err(Error::Argument(format!("need at least 2 subjects, got {n_subjects}")));
    }
    let noise =
        Normal::new(0.0, noise_ms.max(0.0)).map_err(|e| Error::Argument(format!("noise_ms {noise_ms}: {e}")))?;
    let mut image_ordinal: HashMap<&str, usize> = HashMap::new();
    for t in manifest {
        let next = image_ordinal.len();
        image_ordinal.entry(t.image_id.as_str()).or_insert(next);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    for s in 0..n_subjects {
        for t in manifest {
            let cond_idx = Condition::ALL.iter().position(|&c| c == t.condition).unwrap();
            if (image_ordinal[t.image_id.as_str()] + s) % 4 != cond_idx {
                continue;
            }
            let expected = model.rt_ms(t.condition, t.dot_distance());
            let jitter = if noise_ms > 0.0 { noise.sample(&mut rng) } else { 0.0 };
            rows.push(ResponseRow {
                subject_id: format!("sub{s:03}"),
                trial_id: t.trial_id.clone(),
                rt_ms: (expected + jitter).max(MIN_RT_MS),
                correct: rng.random_bool(ACCURACY),
            });
        }
    }
    Ok(SubjectResponses { rows })
}

/// Fills `mean_rt_ms` with each trial's mean correct RT (`None` without data).
pub fn attach_mean_rt(manifest: &mut [Trial], responses: &SubjectResponses) {
    let means = responses.mean_rt_by_trial(false);
    for t in manifest {
        t.mean_rt_ms = means.get(t.trial_id.as_str()).copied();
    }
}
