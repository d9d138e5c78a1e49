use std::collections::BTreeMap;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::grid_io::{Condition, GridGeometry, PatchLabelGrid, PixelXY, Trial};

#[derive(Debug, Clone, Copy)]
pub struct SceneInput<'a> {
    pub image_id: &'a str,
    pub labels: &'a PatchLabelGrid,
    pub geometry: GridGeometry,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ManifestConfig {
    pub dots_per_condition: usize,
    /// Inclusive dot separation range in original-image pixels.
    pub close_px: (f64, f64),
    pub far_px: (f64, f64),
}

impl Default for ManifestConfig {
    fn default() -> Self {
        ManifestConfig {
            dots_per_condition: 1,
            close_px: (80.0, 128.0),
            far_px: (160.0, 256.0),
        }
    }
}

/// Pixel centre of a patch in original-image coordinates.
fn patch_center(idx: usize, g: &GridGeometry) -> PixelXY {
    let (r, c) = (idx / g.grid_w, idx % g.grid_w);
    PixelXY::new(
        (c as f64 + 0.5) * g.patch_px as f64 * g.img_w as f64 / g.proc_w as f64,
        (r as f64 + 0.5) * g.patch_px as f64 * g.img_h as f64 / g.proc_h as f64,
    )
}

/// Peripheral candidates around `center`, keyed by squared patch distance,
/// split into (same object, different object).
type Rings = BTreeMap<usize, (Vec<usize>, Vec<usize>)>;

fn rings(labels: &PatchLabelGrid, center: usize, range_px: (f64, f64), patch_px: f64) -> Rings {
    let w = labels.grid_w;
    let own = labels.labels[center];
    let (cr, cc) = ((center / w) as isize, (center % w) as isize);
    let mut out = Rings::new();
    for (p, &l) in labels.labels.iter().enumerate() {
        if l == 0 || p == center {
            continue;
        }
        let (dr, dc) = ((p / w) as isize - cr, (p % w) as isize - cc);
        let d2 = (dr * dr + dc * dc) as usize;
        let d = (d2 as f64).sqrt() * patch_px;
        if d < range_px.0 || d > range_px.1 {
            continue;
        }
        let slot = out.entry(d2).or_default();
        if l == own {
            slot.0.push(p);
        } else {
            slot.1.push(p);
        }
    }
    out.retain(|_, (same, diff)| !same.is_empty() && !diff.is_empty());
    out
}

/// Picks `k` (same, diff) peripheral pairs at matched distances, or `None`.
fn pick_pairs(rings: &Rings, k: usize, rng: &mut ChaCha8Rng) -> Option<Vec<(usize, usize)>> {
    let mut options: Vec<(usize, usize)> = Vec::new();
    for (same, diff) in rings.values() {
        let s = *same.choose(rng)?;
        let d = *diff.choose(rng)?;
        options.push((s, d));
    }
    if options.len() < k {
        return None;
    }
    options.shuffle(rng);
    options.truncate(k);
    Some(options)
}

/// Four trial types per scene (times `dots_per_condition`) with the close and
/// far separations matched exactly between same- and different-object
/// placements. Scenes without a valid placement are skipped and reported.
pub fn gen_manifest(scenes: &[SceneInput<'_>], config: &ManifestConfig, seed: u64) -> (Vec<Trial>, Vec<String>) {
    let mut trials = Vec::new();
    let mut diagnostics = Vec::new();
    let k = config.dots_per_condition.max(1);
    for (si, scene) in scenes.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(si as u64));
        let g = &scene.geometry;
        // placements are computed in processed pixels, then mapped back
        let patch_px = g.patch_px as f64 * (g.img_w as f64 / g.proc_w as f64);
        let mut centers: Vec<usize> = (0..scene.labels.labels.len())
            .filter(|&p| scene.labels.labels[p] != 0)
            .collect();
        centers.shuffle(&mut rng);

        let placed = centers.iter().find_map(|&c| {
            let close = pick_pairs(&rings(scene.labels, c, config.close_px, patch_px), k, &mut rng)?;
            let far = pick_pairs(&rings(scene.labels, c, config.far_px, patch_px), k, &mut rng)?;
            Some((c, close, far))
        });
        let Some((center, close, far)) = placed else {
            diagnostics.push(format!("scene {}: no matched close/far placement", scene.image_id));
            continue;
        };
        let center_obj = scene.labels.labels[center];
        for j in 0..k {
            let picks = [
                (Condition::SameClose, close[j].0),
                (Condition::SameFar, far[j].0),
                (Condition::DiffClose, close[j].1),
                (Condition::DiffFar, far[j].1),
            ];
            for (condition, periph) in picks {
                trials.push(Trial {
                    trial_id: format!("{}_{}_{j}", scene.image_id, condition),
                    image_id: scene.image_id.to_owned(),
                    condition,
                    center_xy: patch_center(center, g),
                    periph_xy: patch_center(periph, g),
                    center_obj,
                    periph_obj: scene.labels.labels[periph],
                    mean_rt_ms: None,
                });
            }
        }
    }
    (trials, diagnostics)
}
