//! Scoring model predictions against human reaction times.

use std::collections::{BTreeMap, HashMap};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exact::exact_mean;
use crate::grid_io::{Condition, SubjectResponses, Trial};

/// 1-based ranks; tied values share the mean of their positions.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // positions start+1 ..= end
        let rank = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = rank;
        }
        start = end;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman rank correlation: Pearson correlation of average ranks.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Argument(format!("length mismatch {} vs {}", x.len(), y.len())));
    }
    if x.len() < 2 {
        return Err(Error::UndefinedCorrelation(format!(
            "need at least 2 pairs, got {}",
            x.len()
        )));
    }
    if x.iter().chain(y).any(|v| v.is_nan()) {
        return Err(Error::Argument("NaN in correlation input".into()));
    }
    pearson(&average_ranks(x), &average_ranks(y)).ok_or_else(|| Error::UndefinedCorrelation("constant input".into()))
}

/// Pixel distance between the two dots of every trial, in manifest order.
pub fn euclidean_baseline(manifest: &[Trial]) -> Vec<f64> {
    manifest.iter().map(Trial::dot_distance).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CeilingEstimate {
    pub rho: f64,
    /// `(split index, rho)` for each split that produced a correlation.
    pub per_split: Vec<(usize, f64)>,
    /// `(split index, reason)`.
    pub skipped: Vec<(usize, String)>,
}

/// Subject-subject agreement: subjects are split into random halves, the
/// per-trial mean RTs of the halves are rank-correlated, and the correlation
/// is averaged over `n_splits` splits. Split `k` is seeded with `seed + k`.
pub fn split_half_ceiling(
    responses: &SubjectResponses,
    manifest: &[Trial],
    n_splits: usize,
    seed: u64,
    include_incorrect: bool,
) -> Result<CeilingEstimate> {
    let subjects = responses.subjects();
    if subjects.len() < 2 {
        return Err(Error::Argument(format!(
            "need at least 2 subjects, got {}",
            subjects.len()
        )));
    }
    if n_splits == 0 {
        return Err(Error::Argument("n_splits must be at least 1".into()));
    }
    let subject_idx: HashMap<&str, usize> = subjects.iter().enumerate().map(|(i, s)| (*s, i)).collect();
    let trial_idx: HashMap<&str, usize> = manifest
        .iter()
        .enumerate()
        .map(|(i, t)| (t.trial_id.as_str(), i))
        .collect();
    // (subject, trial, rt) for the rows that count
    let rows: Vec<(usize, usize, f64)> = responses
        .rows
        .iter()
        .filter(|r| include_incorrect || r.correct)
        .map(|r| {
            let t = *trial_idx
                .get(r.trial_id.as_str())
                .ok_or_else(|| Error::validation(0, format!("trial_id {:?} not in manifest", r.trial_id)))?;
            Ok((subject_idx[r.subject_id.as_str()], t, r.rt_ms))
        })
        .collect::<Result<_>>()?;

    let outcomes: Vec<std::result::Result<f64, String>> = (0..n_splits)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(k as u64));
            let mut order: Vec<usize> = (0..subjects.len()).collect();
            order.shuffle(&mut rng);
            let mut in_first = vec![false; subjects.len()];
            for &s in &order[..subjects.len() / 2] {
                in_first[s] = true;
            }
            let mut halves = [vec![Vec::new(); manifest.len()], vec![Vec::new(); manifest.len()]];
            for &(s, t, rt) in &rows {
                halves[usize::from(!in_first[s])][t].push(rt);
            }
            let (mut a, mut b) = (Vec::new(), Vec::new());
            for (ra, rb) in halves[0].iter().zip(&halves[1]) {
                if let (Some(ma), Some(mb)) = (exact_mean(ra), exact_mean(rb)) {
                    a.push(ma);
                    b.push(mb);
                }
            }
            if a.len() < 2 {
                return Err(format!("only {} trials with data in both halves", a.len()));
            }
            spearman(&a, &b).map_err(|e| e.to_string())
        })
        .collect();

    let mut per_split = Vec::new();
    let mut skipped = Vec::new();
    for (k, o) in outcomes.into_iter().enumerate() {
        match o {
            Ok(rho) => per_split.push((k, rho)),
            Err(reason) => skipped.push((k, reason)),
        }
    }
    let rhos: Vec<f64> = per_split.iter().map(|p| p.1).collect();
    let rho = exact_mean(&rhos).ok_or_else(|| Error::EmptyInput(format!("all {n_splits} splits were skipped")))?;
    Ok(CeilingEstimate {
        rho,
        per_split,
        skipped,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanSem {
    pub mean: f64,
    /// Sample standard deviation over sqrt(n); 0 when n = 1.
    pub sem: f64,
    pub n: usize,
}

impl MeanSem {
    pub fn of(values: &[f64]) -> Option<MeanSem> {
        let mean = exact_mean(values)?;
        let n = values.len();
        let sem = if n < 2 {
            0.0
        } else {
            let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
            (ss / (n - 1) as f64).sqrt() / (n as f64).sqrt()
        };
        Some(MeanSem { mean, sem, n })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct ConditionStats {
    pub model: Option<MeanSem>,
    pub human: Option<MeanSem>,
}

/// Per-condition mean and SEM of model predictions and, when responses are
/// given, of per-trial mean human RT. Empty buckets are `None`.
pub fn condition_stats(
    predictions: &BTreeMap<String, f64>,
    manifest: &[Trial],
    responses: Option<&SubjectResponses>,
    include_incorrect: bool,
) -> Result<BTreeMap<Condition, ConditionStats>> {
    let by_id: HashMap<&str, &Trial> = manifest.iter().map(|t| (t.trial_id.as_str(), t)).collect();
    let mut model: BTreeMap<Condition, Vec<f64>> = BTreeMap::new();
    let mut unknown = Vec::new();
    for (id, &v) in predictions {
        match by_id.get(id.as_str()) {
            Some(t) => model.entry(t.condition).or_default().push(v),
            None => unknown.push(crate::error::RowError {
                row: 0,
                message: format!("prediction for unknown trial {id:?}"),
            }),
        }
    }
    if !unknown.is_empty() {
        return Err(Error::Validation(unknown));
    }
    let mut human: BTreeMap<Condition, Vec<f64>> = BTreeMap::new();
    if let Some(resp) = responses {
        let means = resp.mean_rt_by_trial(include_incorrect);
        for t in manifest {
            if let Some(&m) = means.get(t.trial_id.as_str()) {
                human.entry(t.condition).or_default().push(m);
            }
        }
    }
    Ok(Condition::ALL
        .into_iter()
        .map(|c| {
            let stats = ConditionStats {
                model: model.get(&c).and_then(|v| MeanSem::of(v)),
                human: human.get(&c).and_then(|v| MeanSem::of(v)),
            };
            (c, stats)
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EvalOptions {
    pub n_splits: usize,
    pub seed: u64,
    pub include_incorrect: bool,
    /// Drop trials whose prediction equals this value (e.g. the unreached
    /// sentinel) from the correlations.
    pub exclude_prediction: Option<f64>,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            n_splits: 50,
            seed: crate::cli::DEFAULT_SEED,
            include_incorrect: false,
            exclude_prediction: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub spearman_rho: f64,
    pub n_trials: usize,
    pub baseline_rho: f64,
    pub ceiling_rho: Option<f64>,
    pub condition_means: BTreeMap<Condition, ConditionStats>,
}

/// Correlates predictions with manifest mean RTs (trials without an RT are
/// excluded), alongside the dot-distance baseline and the split-half ceiling.
pub fn evaluate(
    predictions: &BTreeMap<String, f64>,
    manifest: &[Trial],
    responses: Option<&SubjectResponses>,
    options: &EvalOptions,
) -> Result<EvalReport> {
    let condition_means = condition_stats(predictions, manifest, responses, options.include_incorrect)?;
    let (mut pred, mut rt, mut dist) = (Vec::new(), Vec::new(), Vec::new());
    for t in manifest {
        let (Some(&p), Some(r)) = (predictions.get(&t.trial_id), t.mean_rt_ms) else {
            continue;
        };
        if options.exclude_prediction == Some(p) {
            continue;
        }
        pred.push(p);
        rt.push(r);
        dist.push(t.dot_distance());
    }
    if pred.len() < 2 {
        return Err(Error::EmptyInput(format!(
            "need predictions for at least 2 trials with RT, got {}",
            pred.len()
        )));
    }
    let ceiling_rho = responses
        .map(|r| split_half_ceiling(r, manifest, options.n_splits, options.seed, options.include_incorrect))
        .transpose()?
        .map(|c| c.rho);
    Ok(EvalReport {
        spearman_rho: spearman(&pred, &rt)?,
        n_trials: pred.len(),
        baseline_rho: spearman(&dist, &rt)?,
        ceiling_rho,
        condition_means,
    })
}
