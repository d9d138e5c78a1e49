//! Patch-affinity perceptual grouping.
//!
//! Builds row-normalized affinity matrices from exported backbone patch
//! features, measures how object-centric they are with a threshold-sweep ROC,
//! simulates attention spreading through the affinity graph to predict
//! two-dot reaction times, and scores the predictions against human data.

pub mod affinity;
pub mod cli;
pub mod error;
pub mod eval;
pub mod exact;
pub mod grid_io;
pub mod lattice;
pub mod roc;
pub mod spread;
pub mod synth;

pub use affinity::{affinity_map, compute_affinity, raw_affinity, AffinityMap, AffinityMatrix};
pub use error::{Error, Result, RowError};
pub use grid_io::{
    load_manifest, load_responses, pixel_to_patch, rasterize_mask, read_feature_file, read_mask_file,
    write_feature_file, write_mask_file, Condition, FeatureGrid, FeatureKind, GridGeometry, PatchIndex, PatchLabelGrid,
    PixelMask, PixelXY, ResponseRow, SubjectResponses, Trial,
};
pub use lattice::Connectivity;
pub use roc::{aggregate_roc, trial_roc, RocCurve, RocPoint};
pub use spread::{predict_batch, run_trial, SpreadConfig, SpreadSchedule, SpreadTrace};
