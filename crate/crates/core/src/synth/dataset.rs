use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::manifest::{gen_manifest, ManifestConfig, SceneInput};
use super::responses::{attach_mean_rt, gen_responses, LinearRtModel};
use super::scene::{elongated_layout, gen_scene, labels_to_mask, SceneSpec};
use crate::error::{Error, Result};
use crate::grid_io::{
    write_feature_file, write_manifest, write_mask_file, FeatureGrid, PatchLabelGrid, SubjectResponses, Trial,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_scenes: usize,
    pub n_subjects: usize,
    pub grid_h: usize,
    pub grid_w: usize,
    pub patch_px: usize,
    pub dim: usize,
    pub separability: f64,
    pub noise_sigma: f64,
    pub rt_noise_ms: f64,
    pub rt_model: LinearRtModel,
    pub manifest: ManifestConfig,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_scenes: 255,
            n_subjects: 72,
            grid_h: 32,
            grid_w: 32,
            patch_px: 16,
            dim: 16,
            separability: 1.0,
            noise_sigma: 0.1,
            rt_noise_ms: 120.0,
            rt_model: LinearRtModel::default(),
            manifest: ManifestConfig::default(),
            seed: crate::cli::DEFAULT_SEED,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthScene {
    pub spec: SceneSpec,
    pub labels: PatchLabelGrid,
    pub features: FeatureGrid,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthDataset {
    pub scenes: Vec<SynthScene>,
    pub manifest: Vec<Trial>,
    pub responses: SubjectResponses,
    /// Layouts that were discarded because no matched placement existed.
    pub diagnostics: Vec<String>,
}

/// Layout attempts allowed per requested scene before giving up.
const MAX_ATTEMPTS_PER_SCENE: usize = 20;

/// Elongated two-object scenes, a matched four-condition manifest over them
/// and counterbalanced subject responses, all derived from `config.seed`.
pub fn generate_dataset(config: &SynthConfig) -> Result<SynthDataset> {
    let mut layout_rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut scenes = Vec::with_capacity(config.n_scenes);
    let mut manifest = Vec::with_capacity(config.n_scenes * 4);
    let mut diagnostics = Vec::new();
    let mut attempt = 0u64;
    while scenes.len() < config.n_scenes {
        if attempt as usize >= config.n_scenes.max(1) * MAX_ATTEMPTS_PER_SCENE {
            return Err(Error::Argument(format!(
                "could only place {} of {} scenes",
                scenes.len(),
                config.n_scenes
            )));
        }
        let spec = SceneSpec {
            image_id: format!("img_{:03}", scenes.len()),
            grid_h: config.grid_h,
            grid_w: config.grid_w,
            patch_px: config.patch_px,
            objects: elongated_layout(&mut layout_rng, config.grid_h, config.grid_w),
            dim: config.dim,
            separability: config.separability,
            noise_sigma: config.noise_sigma,
            seed: config.seed ^ attempt.wrapping_mul(0x9E37_79B9_7F4A_7C15),
        };
        let (labels, features) = gen_scene(&spec)?;
        let input = SceneInput {
            image_id: &spec.image_id,
            labels: &labels,
            geometry: features.geometry,
        };
        let (trials, diag) = gen_manifest(&[input], &config.manifest, config.seed.wrapping_add(attempt));
        attempt += 1;
        if trials.is_empty() {
            diagnostics.extend(diag);
            continue;
        }
        manifest.extend(trials);
        scenes.push(SynthScene { spec, labels, features });
    }
    let responses = gen_responses(
        &manifest,
        config.n_subjects,
        &config.rt_model,
        config.rt_noise_ms,
        config.seed.wrapping_add(0x5EED),
    )?;
    attach_mean_rt(&mut manifest, &responses);
    Ok(SynthDataset {
        scenes,
        manifest,
        responses,
        diagnostics,
    })
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

/// Writes `features/*.aftn`, `masks/*.afmsk`, `manifest.csv`,
/// `responses.csv` and `scenes.json` under `dir`.
pub fn write_dataset(dataset: &SynthDataset, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    let (features_dir, masks_dir) = (dir.join("features"), dir.join("masks"));
    create_dir(&features_dir)?;
    create_dir(&masks_dir)?;
    for scene in &dataset.scenes {
        let id = &scene.spec.image_id;
        write_feature_file(&scene.features, features_dir.join(format!("{id}.aftn")))?;
        let mask = labels_to_mask(&scene.labels, scene.spec.patch_px, id);
        write_mask_file(&mask, masks_dir.join(format!("{id}.afmsk")))?;
    }
    write_manifest(dir.join("manifest.csv"), &dataset.manifest)?;
    crate::grid_io::write_responses(dir.join("responses.csv"), &dataset.responses)?;
    let specs: Vec<&SceneSpec> = dataset.scenes.iter().map(|s| &s.spec).collect();
    let json = serde_json::to_string_pretty(&specs).expect("scene specs serialize");
    let path = dir.join("scenes.json");
    fs::write(&path, json + "\n").map_err(|e| Error::io(&path, e))
}
