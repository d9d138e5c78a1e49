//! Attention spreading through the affinity graph.
//!
//! A segment is seeded at the centre dot with every connected patch whose
//! affinity to the centre clears `tau`. Each later step averages the affinity
//! rows of the whole segment and admits the unattended neighbours of the
//! segment whose averaged affinity clears a threshold that decays each step.
//! The step at which the peripheral dot's patch joins is the RT prediction;
//! trials that never reach it are predicted `max_steps + 1`.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::affinity::{affinity_map, AffinityMatrix};
use crate::error::{Error, Result};
use crate::grid_io::{pixel_to_patch, Condition, PatchIndex, Trial};
use crate::lattice::{component_of, Connectivity};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SpreadSchedule {
    /// `tau * (1 - tau_step)^(t - 1)`
    #[default]
    Multiplicative,
    /// `max(0, tau - (t - 1) * tau_step)`
    Additive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpreadConfig {
    pub tau: f64,
    pub tau_step: f64,
    pub schedule: SpreadSchedule,
    pub max_steps: usize,
    pub connectivity: Connectivity,
}

impl Default for SpreadConfig {
    fn default() -> Self {
        SpreadConfig {
            tau: 0.8,
            tau_step: 0.2,
            schedule: SpreadSchedule::Multiplicative,
            max_steps: 20,
            connectivity: Connectivity::Four,
        }
    }
}

impl SpreadConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(Error::Argument(format!("tau {} must lie in (0, 1]", self.tau)));
        }
        if !(self.tau_step >= 0.0 && self.tau_step < 1.0) {
            return Err(Error::Argument(format!(
                "tau_step {} must lie in [0, 1)",
                self.tau_step
            )));
        }
        if self.max_steps == 0 {
            return Err(Error::Argument("max_steps must be at least 1".into()));
        }
        Ok(())
    }

    /// Threshold used at step `t` (1-based).
    pub fn threshold_at(&self, t: usize) -> f64 {
        let k = t.saturating_sub(1);
        match self.schedule {
            SpreadSchedule::Multiplicative => self.tau * (1.0 - self.tau_step).powi(k as i32),
            SpreadSchedule::Additive => (self.tau - k as f64 * self.tau_step).max(0.0),
        }
    }

    /// Prediction assigned to trials that never reach the peripheral dot.
    pub fn unreached(&self) -> usize {
        self.max_steps + 1
    }
}

/// Growing segment together with the running sum of its members' rows.
struct Segment<'a> {
    aff: &'a AffinityMatrix,
    connectivity: Connectivity,
    member: Vec<bool>,
    size: usize,
    row_sum: Vec<f64>,
}

impl<'a> Segment<'a> {
    fn new(aff: &'a AffinityMatrix, connectivity: Connectivity) -> Self {
        Segment {
            aff,
            connectivity,
            member: vec![false; aff.n],
            size: 0,
            row_sum: vec![0.0; aff.n],
        }
    }

    fn insert(&mut self, patches: &[usize]) {
        for &p in patches {
            debug_assert!(!self.member[p]);
            self.member[p] = true;
            self.size += 1;
            for (acc, v) in self.row_sum.iter_mut().zip(self.aff.row(p)) {
                *acc += v;
            }
        }
    }

    /// Candidates adjacent to the current segment whose averaged affinity
    /// clears `threshold`, ascending. Does not modify the segment.
    fn candidates(&self, threshold: f64) -> Vec<usize> {
        let (h, w) = (self.aff.grid_h(), self.aff.grid_w());
        let size = self.size as f64;
        (0..self.aff.n)
            .filter(|&p| {
                !self.member[p]
                    && self.row_sum[p] / size >= threshold
                    && self.connectivity.neighbors(p, h, w).any(|q| self.member[q])
            })
            .collect()
    }
}

fn check_patch(aff: &AffinityMatrix, p: usize) -> Result<()> {
    if p >= aff.n {
        return Err(Error::Argument(format!(
            "patch index {p} outside grid of {} patches",
            aff.n
        )));
    }
    Ok(())
}

/// Connected component around `center` of the patches whose affinity to the
/// centre is at least `tau`. The centre itself is always included.
pub fn init_segment(aff: &AffinityMatrix, center: PatchIndex, config: &SpreadConfig) -> Result<Vec<usize>> {
    let map = affinity_map(aff, center)?;
    let seed = center.flat(aff.grid_w());
    let mut allowed: Vec<bool> = map.values.iter().map(|&v| v >= config.tau).collect();
    allowed[seed] = true;
    let comp = component_of(&allowed, seed, aff.grid_h(), aff.grid_w(), config.connectivity);
    Ok(comp.iter().enumerate().filter(|(_, &m)| m).map(|(i, _)| i).collect())
}

/// Patches admitted in one step from `segment` at `threshold`, ascending.
/// Only patches adjacent to `segment` as given are considered.
pub fn spread_step(
    aff: &AffinityMatrix,
    segment: &[usize],
    threshold: f64,
    config: &SpreadConfig,
) -> Result<Vec<usize>> {
    if segment.is_empty() {
        return Err(Error::Argument("segment must be non-empty".into()));
    }
    let mut ordered = segment.to_vec();
    ordered.sort_unstable();
    ordered.dedup();
    for &p in &ordered {
        check_patch(aff, p)?;
    }
    let mut seg = Segment::new(aff, config.connectivity);
    seg.insert(&ordered);
    Ok(seg.candidates(threshold))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpreadStep {
    /// 1-based.
    pub step: usize,
    pub threshold: f64,
    /// Row-major patch indices admitted at this step, ascending.
    pub added: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpreadTrace {
    pub trial_id: String,
    pub grid_h: usize,
    pub grid_w: usize,
    pub center: usize,
    pub periph: usize,
    pub steps: Vec<SpreadStep>,
    pub reached_step: Option<usize>,
    pub prediction: usize,
}

impl SpreadTrace {
    /// Membership mask of the segment after each step.
    pub fn segment_masks(&self) -> Vec<Vec<bool>> {
        let mut mask = vec![false; self.grid_h * self.grid_w];
        self.steps
            .iter()
            .map(|s| {
                for &p in &s.added {
                    mask[p] = true;
                }
                mask.clone()
            })
            .collect()
    }
}

/// Simulates one trial from the centre dot until the peripheral patch joins
/// or `max_steps` is exhausted.
pub fn run_trial(aff: &AffinityMatrix, trial: &Trial, config: &SpreadConfig) -> Result<SpreadTrace> {
    config.validate()?;
    let center = pixel_to_patch(trial.center_xy, &aff.geometry)?;
    let periph = pixel_to_patch(trial.periph_xy, &aff.geometry)?;
    let periph_idx = periph.flat(aff.grid_w());

    let mut seg = Segment::new(aff, config.connectivity);
    let init = init_segment(aff, center, config)?;
    seg.insert(&init);
    let mut steps = vec![SpreadStep {
        step: 1,
        threshold: config.tau,
        added: init,
    }];
    let mut reached_step = seg.member[periph_idx].then_some(1);

    let mut t = 2;
    while reached_step.is_none() && t <= config.max_steps {
        let threshold = config.threshold_at(t);
        let added = seg.candidates(threshold);
        seg.insert(&added);
        steps.push(SpreadStep {
            step: t,
            threshold,
            added,
        });
        if seg.member[periph_idx] {
            reached_step = Some(t);
        }
        t += 1;
    }
    Ok(SpreadTrace {
        trial_id: trial.trial_id.clone(),
        grid_h: aff.grid_h(),
        grid_w: aff.grid_w(),
        center: center.flat(aff.grid_w()),
        periph: periph_idx,
        steps,
        reached_step,
        prediction: reached_step.unwrap_or(config.unreached()),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Prediction {
    pub trial_id: String,
    pub condition: Condition,
    pub prediction: usize,
    pub reached: bool,
}

#[derive(Debug, Clone)]
pub struct BatchPredictions {
    /// Manifest order, skipped trials omitted.
    pub predictions: Vec<Prediction>,
    pub traces: Vec<SpreadTrace>,
    /// Counts per condition; bin `k` holds prediction `k + 1`.
    pub histogram: BTreeMap<Condition, Vec<usize>>,
    /// `(trial_id, reason)`.
    pub skipped: Vec<(String, String)>,
}

pub fn predict_batch(
    affinities: &BTreeMap<String, AffinityMatrix>,
    manifest: &[Trial],
    config: &SpreadConfig,
) -> Result<BatchPredictions> {
    config.validate()?;
    let results: Vec<std::result::Result<SpreadTrace, String>> = manifest
        .par_iter()
        .map(|t| {
            let aff = affinities
                .get(&t.image_id)
                .ok_or_else(|| format!("no features for image {}", t.image_id))?;
            run_trial(aff, t, config).map_err(|e| e.to_string())
        })
        .collect();

    let mut out = BatchPredictions {
        predictions: Vec::new(),
        traces: Vec::new(),
        histogram: Condition::ALL
            .iter()
            .map(|&c| (c, vec![0; config.unreached()]))
            .collect(),
        skipped: Vec::new(),
    };
    for (trial, result) in manifest.iter().zip(results) {
        match result {
            Ok(trace) => {
                out.histogram.get_mut(&trial.condition).unwrap()[trace.prediction - 1] += 1;
                out.predictions.push(Prediction {
                    trial_id: trial.trial_id.clone(),
                    condition: trial.condition,
                    prediction: trace.prediction,
                    reached: trace.reached_step.is_some(),
                });
                out.traces.push(trace);
            }
            Err(reason) => out.skipped.push((trial.trial_id.clone(), reason)),
        }
    }
    Ok(out)
}
