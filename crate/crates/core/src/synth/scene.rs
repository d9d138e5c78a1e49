use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid_io::{FeatureGrid, FeatureKind, GridGeometry, ObjectId, PatchLabelGrid, PixelMask};

/// Object footprint in patch coordinates. Patch `(r, c)` covers
/// `[r, r+1) x [c, c+1)`; ellipses test the patch centre.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Shape {
    Rect {
        top: usize,
        left: usize,
        height: usize,
        width: usize,
    },
    Ellipse {
        center_row: f64,
        center_col: f64,
        radius_rows: f64,
        radius_cols: f64,
    },
}

impl Shape {
    fn contains(&self, r: usize, c: usize) -> bool {
        match *self {
            Shape::Rect {
                top,
                left,
                height,
                width,
            } => (top..top + height).contains(&r) && (left..left + width).contains(&c),
            Shape::Ellipse {
                center_row,
                center_col,
                radius_rows,
                radius_cols,
            } => {
                let dr = (r as f64 + 0.5 - center_row) / radius_rows;
                let dc = (c as f64 + 0.5 - center_col) / radius_cols;
                dr * dr + dc * dc <= 1.0
            }
        }
    }

    fn within(&self, grid_h: usize, grid_w: usize) -> bool {
        match *self {
            Shape::Rect {
                top,
                left,
                height,
                width,
            } => height > 0 && width > 0 && top + height <= grid_h && left + width <= grid_w,
            Shape::Ellipse {
                center_row,
                center_col,
                radius_rows,
                radius_cols,
            } => {
                radius_rows > 0.0
                    && radius_cols > 0.0
                    && center_row - radius_rows >= 0.0
                    && center_col - radius_cols >= 0.0
                    && center_row + radius_rows <= grid_h as f64
                    && center_col + radius_cols <= grid_w as f64
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    pub id: ObjectId,
    pub shape: Shape,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub image_id: String,
    pub grid_h: usize,
    pub grid_w: usize,
    pub patch_px: usize,
    pub objects: Vec<SceneObject>,
    /// Must exceed the largest object id: label `l` owns channel `l`.
    pub dim: usize,
    /// Length of the per-label direction.
    pub separability: f64,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl SceneSpec {
    fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Argument(format!("scene {}: {m}", self.image_id)));
        if self.grid_h == 0 || self.grid_w == 0 || self.patch_px == 0 {
            return fail("grid and patch sizes must be positive".into());
        }
        if self.objects.is_empty() {
            return fail("no objects".into());
        }
        let mut ids: Vec<ObjectId> = self.objects.iter().map(|o| o.id).collect();
        ids.sort_unstable();
        if ids[0] == 0 || ids.windows(2).any(|w| w[0] == w[1]) {
            return fail("object ids must be distinct and >= 1".into());
        }
        if self.dim <= *ids.last().unwrap() as usize {
            return fail(format!("dim {} must exceed the largest object id", self.dim));
        }
        if let Some(o) = self.objects.iter().find(|o| !o.shape.within(self.grid_h, self.grid_w)) {
            return fail(format!("object {} extends outside the grid", o.id));
        }
        if !(self.separability >= 0.0 && self.noise_sigma >= 0.0) {
            return fail("separability and noise_sigma must be non-negative".into());
        }
        Ok(())
    }
}

/// Labels plus features `separability * one_hot(label) + N(0, noise_sigma)`.
pub fn gen_scene(spec: &SceneSpec) -> Result<(PatchLabelGrid, FeatureGrid)> {
    spec.validate()?;
    let (h, w) = (spec.grid_h, spec.grid_w);
    let mut labels = vec![0 as ObjectId; h * w];
    for r in 0..h {
        for c in 0..w {
            let mut hits = spec.objects.iter().filter(|o| o.shape.contains(r, c));
            if let Some(first) = hits.next() {
                if let Some(second) = hits.next() {
                    return Err(Error::Argument(format!(
                        "scene {}: objects {} and {} overlap at patch ({r}, {c})",
                        spec.image_id, first.id, second.id
                    )));
                }
                labels[r * w + c] = first.id;
            }
        }
    }

    let mut data = vec![0.0f32; h * w * spec.dim];
    for (p, &l) in labels.iter().enumerate() {
        data[p * spec.dim + l as usize] = spec.separability as f32;
    }
    if spec.noise_sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let normal = Normal::new(0.0, spec.noise_sigma).expect("sigma checked");
        for v in &mut data {
            *v += normal.sample(&mut rng) as f32;
        }
    }
    let geometry = GridGeometry::unscaled(h, w, spec.patch_px);
    let features = FeatureGrid::new(spec.image_id.clone(), geometry, spec.dim, FeatureKind::Key, data)?;
    Ok((
        PatchLabelGrid {
            grid_h: h,
            grid_w: w,
            labels,
        },
        features,
    ))
}

/// Upsamples patch labels to a pixel mask, `patch_px` pixels per patch side.
pub fn labels_to_mask(labels: &PatchLabelGrid, patch_px: usize, image_id: &str) -> PixelMask {
    let (img_h, img_w) = (labels.grid_h * patch_px, labels.grid_w * patch_px);
    let mut px = Vec::with_capacity(img_h * img_w);
    for y in 0..img_h {
        for x in 0..img_w {
            px.push(labels.labels[(y / patch_px) * labels.grid_w + x / patch_px]);
        }
    }
    PixelMask {
        image_id: image_id.to_owned(),
        img_h,
        img_w,
        labels: px,
    }
}

/// Two horizontal bars stacked with a background gap, randomized by `rng`.
/// Needs `grid_h >= 8`.
pub fn elongated_layout(rng: &mut impl Rng, grid_h: usize, grid_w: usize) -> Vec<SceneObject> {
    let unit = (grid_h / 8).max(1);
    let h1 = unit + rng.random_range(0..=unit);
    let h2 = unit + rng.random_range(0..=unit);
    let gap = unit + rng.random_range(0..=unit / 2);
    let top1 = rng.random_range(0..=grid_h.saturating_sub(h1 + h2 + gap));
    let top2 = top1 + h1 + gap;
    let margin = (grid_w / 16).max(1);
    let mut bar = |id, top, height| {
        let left = rng.random_range(0..=margin);
        let width = grid_w - left - rng.random_range(0..=margin);
        SceneObject {
            id,
            shape: Shape::Rect {
                top,
                left,
                height,
                width,
            },
        }
    };
    vec![bar(1, top1, h1), bar(2, top2, h2)]
}
