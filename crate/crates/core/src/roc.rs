//! Threshold-sweep ROC analysis of affinity maps against ground-truth objects.
//!
//! For each trial the peripheral dot's affinity map is thresholded at
//! 1.00, 0.95, ..., 0.00. At each level the active area inside the dot's
//! object gives the TPR and the active area outside gives the FPR. Trials are
//! averaged per threshold and a single AUC is taken from the mean curve.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::affinity::{affinity_map, AffinityMap, AffinityMatrix};
use crate::error::{Error, Result};
use crate::exact::exact_mean;
use crate::grid_io::{pixel_to_patch, ObjectId, PatchLabelGrid, Trial};

/// Number of threshold levels in a sweep.
pub const N_THRESHOLDS: usize = 21;

/// Sweep levels, descending from 1 to 0 in steps of 0.05.
pub fn thresholds() -> [f64; N_THRESHOLDS] {
    std::array::from_fn(|k| (N_THRESHOLDS - 1 - k) as f64 / (N_THRESHOLDS - 1) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub tpr: f64,
    pub fpr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RocCurve {
    /// Ordered by descending threshold.
    pub points: Vec<RocPoint>,
    pub auc: f64,
    pub n_trials: usize,
}

pub fn active_set(map: &AffinityMap<'_>, threshold: f64) -> Vec<bool> {
    map.values.iter().map(|&v| v >= threshold).collect()
}

/// Why a (tpr, fpr) pair cannot be formed for an object.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AreaProblem {
    ObjectAbsent(ObjectId),
    NothingOutside(ObjectId),
}

impl std::fmt::Display for AreaProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AreaProblem::ObjectAbsent(o) => write!(f, "object {o} has no patches"),
            AreaProblem::NothingOutside(o) => write!(f, "object {o} covers the whole grid"),
        }
    }
}

pub fn tpr_fpr(
    active: &[bool],
    labels: &PatchLabelGrid,
    obj: ObjectId,
) -> std::result::Result<(f64, f64), AreaProblem> {
    let (mut inside, mut hit_in, mut hit_out) = (0usize, 0usize, 0usize);
    for (&a, &l) in active.iter().zip(&labels.labels) {
        if l == obj {
            inside += 1;
            hit_in += a as usize;
        } else {
            hit_out += a as usize;
        }
    }
    let outside = labels.labels.len() - inside;
    if inside == 0 {
        return Err(AreaProblem::ObjectAbsent(obj));
    }
    if outside == 0 {
        return Err(AreaProblem::NothingOutside(obj));
    }
    Ok((hit_in as f64 / inside as f64, hit_out as f64 / outside as f64))
}

/// The 21-point sweep of one trial's peripheral-dot affinity map, scored
/// against the peripheral object.
pub fn trial_roc(aff: &AffinityMatrix, labels: &PatchLabelGrid, trial: &Trial) -> Result<Vec<RocPoint>> {
    if labels.grid_h != aff.grid_h() || labels.grid_w != aff.grid_w() {
        return Err(Error::Argument(format!(
            "label grid {}x{} does not match affinity grid {}x{}",
            labels.grid_h,
            labels.grid_w,
            aff.grid_h(),
            aff.grid_w()
        )));
    }
    let skip = |reason: String| Error::TrialSkipped {
        trial_id: trial.trial_id.clone(),
        reason,
    };
    let patch = pixel_to_patch(trial.periph_xy, &aff.geometry).map_err(|e| skip(e.to_string()))?;
    let map = affinity_map(aff, patch)?;
    thresholds()
        .into_iter()
        .map(|threshold| {
            let active = active_set(&map, threshold);
            let (tpr, fpr) = tpr_fpr(&active, labels, trial.periph_obj)
                .map_err(|p| skip(format!("peripheral patch label {}, {p}", labels.get(patch))))?;
            Ok(RocPoint { threshold, tpr, fpr })
        })
        .collect()
}

/// Trapezoid area under `(fpr, tpr)` points, anchored at (0,0) and (1,1).
/// Points are ordered by fpr; equal-fpr points keep their given order.
pub fn roc_auc(points: &[RocPoint]) -> f64 {
    let mut pts: Vec<(f64, f64)> = Vec::with_capacity(points.len() + 2);
    pts.push((0.0, 0.0));
    pts.extend(points.iter().map(|p| (p.fpr, p.tpr)));
    pts.push((1.0, 1.0));
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    pts.windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0)
        .sum()
}

/// Vertical average of per-trial sweeps, then one AUC. Means are exactly
/// rounded, so the result is independent of trial order.
pub fn aggregate_roc(trial_rocs: &[Vec<RocPoint>]) -> Result<RocCurve> {
    let first = trial_rocs
        .first()
        .ok_or_else(|| Error::EmptyInput("no usable trials for ROC".into()))?;
    for (i, roc) in trial_rocs.iter().enumerate() {
        let same = roc.len() == first.len() && roc.iter().zip(first).all(|(a, b)| a.threshold == b.threshold);
        if !same {
            return Err(Error::Argument(format!("trial curve {i} uses different thresholds")));
        }
    }
    let points: Vec<RocPoint> = (0..first.len())
        .map(|k| {
            let tprs: Vec<f64> = trial_rocs.iter().map(|r| r[k].tpr).collect();
            let fprs: Vec<f64> = trial_rocs.iter().map(|r| r[k].fpr).collect();
            RocPoint {
                threshold: first[k].threshold,
                tpr: exact_mean(&tprs).expect("non-empty"),
                fpr: exact_mean(&fprs).expect("non-empty"),
            }
        })
        .collect();
    Ok(RocCurve {
        auc: roc_auc(&points),
        points,
        n_trials: trial_rocs.len(),
    })
}

/// Per-trial sweeps over a manifest plus the aggregate curve.
#[derive(Debug, Clone)]
pub struct RocBatch {
    /// `(trial_id, sweep)` in manifest order.
    pub per_trial: Vec<(String, Vec<RocPoint>)>,
    /// `(trial_id, reason)` for trials that could not be scored.
    pub skipped: Vec<(String, String)>,
    pub curve: RocCurve,
}

pub fn roc_batch(
    affinities: &BTreeMap<String, AffinityMatrix>,
    labels: &BTreeMap<String, PatchLabelGrid>,
    manifest: &[Trial],
) -> Result<RocBatch> {
    let results: Vec<Result<Vec<RocPoint>>> = manifest
        .par_iter()
        .map(|t| {
            let missing = |what: &str| Error::TrialSkipped {
                trial_id: t.trial_id.clone(),
                reason: format!("no {what} for image {}", t.image_id),
            };
            let aff = affinities.get(&t.image_id).ok_or_else(|| missing("features"))?;
            let lab = labels.get(&t.image_id).ok_or_else(|| missing("mask"))?;
            trial_roc(aff, lab, t)
        })
        .collect();
    let mut per_trial = Vec::new();
    let mut skipped = Vec::new();
    for (t, r) in manifest.iter().zip(results) {
        match r {
            Ok(points) => per_trial.push((t.trial_id.clone(), points)),
            Err(Error::TrialSkipped { trial_id, reason }) => skipped.push((trial_id, reason)),
            Err(e) => return Err(e),
        }
    }
    let sweeps: Vec<Vec<RocPoint>> = per_trial.iter().map(|(_, p)| p.clone()).collect();
    let curve = aggregate_roc(&sweeps)?;
    Ok(RocBatch {
        per_trial,
        skipped,
        curve,
    })
}
