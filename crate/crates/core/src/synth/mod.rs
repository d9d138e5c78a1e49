//! Synthetic scenes, trial manifests and subject responses with known ground
//! truth, plus brute-force reference implementations for testing.

mod dataset;
mod manifest;
pub mod oracle;
mod responses;
mod scene;

pub use dataset::{generate_dataset, write_dataset, SynthConfig, SynthDataset, SynthScene};
pub use manifest::{gen_manifest, ManifestConfig, SceneInput};
pub use responses::{attach_mean_rt, gen_responses, LinearRtModel, RtModel};
pub use scene::{elongated_layout, gen_scene, labels_to_mask, SceneObject, SceneSpec, Shape};
