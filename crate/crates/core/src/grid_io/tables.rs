//! Trial manifests and per-subject response tables.
//!
//! Manifest columns:
//! `trial_id,image_id,condition,center_x,center_y,periph_x,periph_y,center_obj,periph_obj,mean_rt_ms`
//! (`mean_rt_ms` may be empty). Response columns: `subject_id,trial_id,rt_ms,correct`.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{ObjectId, PixelXY};
use crate::error::{Error, Result, RowError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    SameClose,
    SameFar,
    DiffClose,
    DiffFar,
}

impl Condition {
    pub const ALL: [Condition; 4] = [
        Condition::SameClose,
        Condition::SameFar,
        Condition::DiffClose,
        Condition::DiffFar,
    ];

    pub fn is_same(self) -> bool {
        matches!(self, Condition::SameClose | Condition::SameFar)
    }

    pub fn is_close(self) -> bool {
        matches!(self, Condition::SameClose | Condition::DiffClose)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Condition::SameClose => "same_close",
            Condition::SameFar => "same_far",
            Condition::DiffClose => "diff_close",
            Condition::DiffFar => "diff_far",
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Condition {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Condition::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| format!("unknown condition {s:?}"))
    }
}

/// One two-dot display.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub trial_id: String,
    pub image_id: String,
    pub condition: Condition,
    pub center_xy: PixelXY,
    pub periph_xy: PixelXY,
    pub center_obj: ObjectId,
    pub periph_obj: ObjectId,
    pub mean_rt_ms: Option<f64>,
}

impl Trial {
    pub fn dot_distance(&self) -> f64 {
        self.center_xy.distance(self.periph_xy)
    }

    fn check(&self) -> Vec<String> {
        let mut problems = Vec::new();
        if self.trial_id.is_empty() {
            problems.push("empty trial_id".to_owned());
        }
        if self.image_id.is_empty() {
            problems.push("empty image_id".to_owned());
        }
        if self.center_obj == 0 || self.periph_obj == 0 {
            problems.push("object ids must be nonzero".to_owned());
        }
        if self.condition.is_same() != (self.center_obj == self.periph_obj) {
            problems.push(format!(
                "condition {} inconsistent with center_obj={} periph_obj={}",
                self.condition, self.center_obj, self.periph_obj
            ));
        }
        for (name, xy) in [("center", self.center_xy), ("periph", self.periph_xy)] {
            if !(xy.x.is_finite() && xy.y.is_finite() && xy.x >= 0.0 && xy.y >= 0.0) {
                problems.push(format!("{name} dot ({}, {}) outside the image", xy.x, xy.y));
            }
        }
        if let Some(rt) = self.mean_rt_ms {
            if !(rt.is_finite() && rt > 0.0) {
                problems.push(format!("mean_rt_ms {rt} must be positive"));
            }
        }
        problems
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseRow {
    pub subject_id: String,
    pub trial_id: String,
    pub rt_ms: f64,
    pub correct: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SubjectResponses {
    pub rows: Vec<ResponseRow>,
}

impl SubjectResponses {
    /// Checks rt > 0 and that every trial id resolves against `manifest`.
    pub fn validate(&self, manifest: &[Trial]) -> Result<()> {
        let known: HashSet<&str> = manifest.iter().map(|t| t.trial_id.as_str()).collect();
        let mut problems = Vec::new();
        for (i, r) in self.rows.iter().enumerate() {
            if !(r.rt_ms.is_finite() && r.rt_ms > 0.0) {
                problems.push(RowError {
                    row: i + 1,
                    message: format!("rt_ms {} must be positive", r.rt_ms),
                });
            }
            if !known.contains(r.trial_id.as_str()) {
                problems.push(RowError {
                    row: i + 1,
                    message: format!("trial_id {:?} not in manifest", r.trial_id),
                });
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(problems))
        }
    }

    /// Subject ids in order of first appearance.
    pub fn subjects(&self) -> Vec<&str> {
        let mut seen = HashSet::new();
        self.rows
            .iter()
            .map(|r| r.subject_id.as_str())
            .filter(|s| seen.insert(*s))
            .collect()
    }

    /// Per-trial mean RT over the selected rows, exactly rounded.
    pub fn mean_rt_by_trial(&self, include_incorrect: bool) -> HashMap<&str, f64> {
        let mut by_trial: HashMap<&str, Vec<f64>> = HashMap::new();
        for r in self.rows.iter().filter(|r| include_incorrect || r.correct) {
            by_trial.entry(r.trial_id.as_str()).or_default().push(r.rt_ms);
        }
        by_trial
            .into_iter()
            .map(|(k, v)| (k, crate::exact::exact_mean(&v).expect("non-empty")))
            .collect()
    }
}

const MANIFEST_COLUMNS: [&str; 10] = [
    "trial_id",
    "image_id",
    "condition",
    "center_x",
    "center_y",
    "periph_x",
    "periph_y",
    "center_obj",
    "periph_obj",
    "mean_rt_ms",
];

const RESPONSE_COLUMNS: [&str; 4] = ["subject_id", "trial_id", "rt_ms", "correct"];

fn open_csv(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Format(format!("{}: {:?}", path.display(), other)),
    }
}

/// Column positions for `required`, or a validation error naming the missing ones.
fn column_index(headers: &csv::StringRecord, required: &[&str]) -> Result<Vec<usize>> {
    let mut idx = Vec::with_capacity(required.len());
    let mut missing = Vec::new();
    for name in required {
        match headers.iter().position(|h| h == *name) {
            Some(i) => idx.push(i),
            None => missing.push(RowError {
                row: 0,
                message: format!("missing column {name:?}"),
            }),
        }
    }
    if missing.is_empty() {
        Ok(idx)
    } else {
        Err(Error::Validation(missing))
    }
}

fn field<T: FromStr>(rec: &csv::StringRecord, at: usize, name: &str) -> std::result::Result<T, String>
where
    T::Err: fmt::Display,
{
    let raw = rec.get(at).unwrap_or("");
    raw.parse().map_err(|e| format!("{name}={raw:?}: {e}"))
}

fn parse_trial(rec: &csv::StringRecord, col: &[usize]) -> std::result::Result<Trial, String> {
    let rt_raw = rec.get(col[9]).unwrap_or("");
    Ok(Trial {
        trial_id: field(rec, col[0], "trial_id")?,
        image_id: field(rec, col[1], "image_id")?,
        condition: field(rec, col[2], "condition")?,
        center_xy: PixelXY::new(field(rec, col[3], "center_x")?, field(rec, col[4], "center_y")?),
        periph_xy: PixelXY::new(field(rec, col[5], "periph_x")?, field(rec, col[6], "periph_y")?),
        center_obj: field(rec, col[7], "center_obj")?,
        periph_obj: field(rec, col[8], "periph_obj")?,
        mean_rt_ms: if rt_raw.is_empty() {
            None
        } else {
            Some(field(rec, col[9], "mean_rt_ms")?)
        },
    })
}

/// Reads and validates a trial manifest. All offending rows are reported at once.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<Vec<Trial>> {
    let path = path.as_ref();
    let mut reader = open_csv(path)?;
    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    let col = column_index(&headers, &MANIFEST_COLUMNS)?;

    let mut trials = Vec::new();
    let mut problems = Vec::new();
    let mut ids = HashSet::new();
    for (i, rec) in reader.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| csv_error(path, e))?;
        match parse_trial(&rec, &col) {
            Ok(trial) => {
                for message in trial.check() {
                    problems.push(RowError { row, message });
                }
                if !ids.insert(trial.trial_id.clone()) {
                    problems.push(RowError {
                        row,
                        message: format!("duplicate trial_id {:?}", trial.trial_id),
                    });
                }
                trials.push(trial);
            }
            Err(message) => problems.push(RowError { row, message }),
        }
    }
    if problems.is_empty() {
        Ok(trials)
    } else {
        Err(Error::Validation(problems))
    }
}

fn parse_bool(raw: &str) -> std::result::Result<bool, String> {
    match raw.to_ascii_lowercase().as_str() {
        "1" | "true" | "t" | "yes" => Ok(true),
        "0" | "false" | "f" | "no" => Ok(false),
        _ => Err(format!("correct={raw:?} is not a boolean")),
    }
}

/// Reads a response table and validates it against `manifest`.
pub fn load_responses(path: impl AsRef<Path>, manifest: &[Trial]) -> Result<SubjectResponses> {
    let path = path.as_ref();
    let mut reader = open_csv(path)?;
    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    let col = column_index(&headers, &RESPONSE_COLUMNS)?;

    let mut rows = Vec::new();
    let mut problems = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let parsed = (|| {
            Ok::<_, String>(ResponseRow {
                subject_id: field(&rec, col[0], "subject_id")?,
                trial_id: field(&rec, col[1], "trial_id")?,
                rt_ms: field(&rec, col[2], "rt_ms")?,
                correct: parse_bool(rec.get(col[3]).unwrap_or(""))?,
            })
        })();
        match parsed {
            Ok(r) => rows.push(r),
            Err(message) => problems.push(RowError { row: i + 1, message }),
        }
    }
    if !problems.is_empty() {
        return Err(Error::Validation(problems));
    }
    let responses = SubjectResponses { rows };
    responses.validate(manifest)?;
    Ok(responses)
}

pub fn write_manifest(path: impl AsRef<Path>, trials: &[Trial]) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(MANIFEST_COLUMNS).map_err(|e| csv_error(path, e))?;
    for t in trials {
        let rt = t.mean_rt_ms.map(|v| v.to_string()).unwrap_or_default();
        w.write_record([
            t.trial_id.clone(),
            t.image_id.clone(),
            t.condition.to_string(),
            t.center_xy.x.to_string(),
            t.center_xy.y.to_string(),
            t.periph_xy.x.to_string(),
            t.periph_xy.y.to_string(),
            t.center_obj.to_string(),
            t.periph_obj.to_string(),
            rt,
        ])
        .map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_responses(path: impl AsRef<Path>, responses: &SubjectResponses) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(RESPONSE_COLUMNS).map_err(|e| csv_error(path, e))?;
    for r in &responses.rows {
        w.write_record([
            r.subject_id.as_str(),
            r.trial_id.as_str(),
            &r.rt_ms.to_string(),
            if r.correct { "true" } else { "false" },
        ])
        .map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
