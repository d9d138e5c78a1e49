//! On-disk artifacts and the pixel/patch geometry that connects them.
//!
//! * `*.aftn` feature files ([`read_feature_file`] / [`write_feature_file`])
//! * `*.afmsk` pixel masks ([`read_mask_file`] / [`write_mask_file`])
//! * trial manifests and per-subject response tables (CSV)

mod feature_file;
mod mask_file;
mod tables;

pub use feature_file::{read_feature_file, write_feature_file, FEATURE_MAGIC, FEATURE_VERSION};
pub use mask_file::{read_mask_file, write_mask_file, write_pgm, MASK_MAGIC};
pub use tables::{
    load_manifest, load_responses, write_manifest, write_responses, Condition, ResponseRow, SubjectResponses, Trial,
};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Object instance id. `0` is background.
pub type ObjectId = u16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Key,
    Query,
    Value,
    Conv,
}

impl FeatureKind {
    pub fn code(self) -> u8 {
        match self {
            FeatureKind::Key => 0,
            FeatureKind::Query => 1,
            FeatureKind::Value => 2,
            FeatureKind::Conv => 3,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Some(match code {
            0 => FeatureKind::Key,
            1 => FeatureKind::Query,
            2 => FeatureKind::Value,
            3 => FeatureKind::Conv,
            _ => return None,
        })
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FeatureKind::Key => "key",
            FeatureKind::Query => "query",
            FeatureKind::Value => "value",
            FeatureKind::Conv => "conv",
        }
    }
}

/// Patch lattice plus the resize geometry that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridGeometry {
    pub grid_h: usize,
    pub grid_w: usize,
    /// Original image size in pixels.
    pub img_h: usize,
    pub img_w: usize,
    /// Size of the resized image fed to the backbone.
    pub proc_h: usize,
    pub proc_w: usize,
    pub patch_px: usize,
}

impl GridGeometry {
    /// Geometry for an image fed to the backbone at its native size.
    pub fn unscaled(grid_h: usize, grid_w: usize, patch_px: usize) -> Self {
        let (h, w) = (grid_h * patch_px, grid_w * patch_px);
        GridGeometry {
            grid_h,
            grid_w,
            img_h: h,
            img_w: w,
            proc_h: h,
            proc_w: w,
            patch_px,
        }
    }

    pub fn n_patches(&self) -> usize {
        self.grid_h * self.grid_w
    }

    pub fn validate(&self) -> Result<()> {
        let named = [
            ("grid_h", self.grid_h),
            ("grid_w", self.grid_w),
            ("img_h", self.img_h),
            ("img_w", self.img_w),
            ("patch_px", self.patch_px),
        ];
        for (name, v) in named {
            if v == 0 {
                return Err(Error::Format(format!("{name} must be at least 1")));
            }
        }
        if self.proc_h != self.grid_h * self.patch_px || self.proc_w != self.grid_w * self.patch_px {
            return Err(Error::Format(format!(
                "processed size {}x{} is not grid {}x{} times patch size {}",
                self.proc_h, self.proc_w, self.grid_h, self.grid_w, self.patch_px
            )));
        }
        Ok(())
    }
}

/// `grid_h x grid_w` patches of `dim`-dimensional features for one image,
/// stored row-major as (row, col, channel).
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureGrid {
    pub image_id: String,
    pub geometry: GridGeometry,
    pub dim: usize,
    pub kind: FeatureKind,
    pub data: Vec<f32>,
}

impl FeatureGrid {
    pub fn new(
        image_id: impl Into<String>,
        geometry: GridGeometry,
        dim: usize,
        kind: FeatureKind,
        data: Vec<f32>,
    ) -> Result<Self> {
        let grid = FeatureGrid {
            image_id: image_id.into(),
            geometry,
            dim,
            kind,
            data,
        };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        if self.dim == 0 {
            return Err(Error::Format("dim must be at least 1".into()));
        }
        let expected = self.geometry.n_patches() * self.dim;
        if self.data.len() != expected {
            return Err(Error::Format(format!(
                "payload has {} values, header implies {expected}",
                self.data.len()
            )));
        }
        if let Some(pos) = self.data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Format(format!(
                "non-finite feature value {} at flat index {pos}",
                self.data[pos]
            )));
        }
        Ok(())
    }

    pub fn grid_h(&self) -> usize {
        self.geometry.grid_h
    }

    pub fn grid_w(&self) -> usize {
        self.geometry.grid_w
    }

    pub fn n_patches(&self) -> usize {
        self.geometry.n_patches()
    }

    /// Feature vector of the patch at row-major index `idx`.
    pub fn patch(&self, idx: usize) -> &[f32] {
        &self.data[idx * self.dim..(idx + 1) * self.dim]
    }
}

/// Pixel-resolution instance labels for one image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PixelMask {
    pub image_id: String,
    pub img_h: usize,
    pub img_w: usize,
    pub labels: Vec<ObjectId>,
}

impl PixelMask {
    pub fn get(&self, y: usize, x: usize) -> ObjectId {
        self.labels[y * self.img_w + x]
    }
}

/// Object labels resampled onto the patch lattice.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatchLabelGrid {
    pub grid_h: usize,
    pub grid_w: usize,
    pub labels: Vec<ObjectId>,
}

impl PatchLabelGrid {
    pub fn get(&self, p: PatchIndex) -> ObjectId {
        self.labels[p.row * self.grid_w + p.col]
    }

    pub fn area(&self, obj: ObjectId) -> usize {
        self.labels.iter().filter(|&&l| l == obj).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PatchIndex {
    pub row: usize,
    pub col: usize,
}

impl PatchIndex {
    pub fn new(row: usize, col: usize) -> Self {
        PatchIndex { row, col }
    }

    pub fn flat(self, grid_w: usize) -> usize {
        self.row * grid_w + self.col
    }

    pub fn from_flat(idx: usize, grid_w: usize) -> Self {
        PatchIndex {
            row: idx / grid_w,
            col: idx % grid_w,
        }
    }
}

/// Pixel position in the original image; `x` is the column, `y` the row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PixelXY {
    pub x: f64,
    pub y: f64,
}

impl PixelXY {
    pub fn new(x: f64, y: f64) -> Self {
        PixelXY { x, y }
    }

    pub fn distance(self, other: PixelXY) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Maps an original-image pixel onto the patch lattice: scale into the
/// processed frame, floor-divide by the patch size, clamp into the grid.
pub fn pixel_to_patch(xy: PixelXY, geometry: &GridGeometry) -> Result<PatchIndex> {
    let in_range = |v: f64, hi: usize| v.is_finite() && v >= 0.0 && v < hi as f64;
    if !in_range(xy.x, geometry.img_w) || !in_range(xy.y, geometry.img_h) {
        return Err(Error::Argument(format!(
            "pixel ({}, {}) outside {}x{} image",
            xy.x, xy.y, geometry.img_w, geometry.img_h
        )));
    }
    let scaled = |v: f64, proc: usize, img: usize, cells: usize| {
        let idx = (v * proc as f64 / (img * geometry.patch_px) as f64).floor() as usize;
        idx.min(cells - 1)
    };
    Ok(PatchIndex {
        row: scaled(xy.y, geometry.proc_h, geometry.img_h, geometry.grid_h),
        col: scaled(xy.x, geometry.proc_w, geometry.img_w, geometry.grid_w),
    })
}

/// Resamples a pixel mask onto a `grid_h x grid_w` lattice.
///
/// The mask is first resized to `proc_h x proc_w` by nearest neighbour; each
/// patch then takes the majority label of its cell. Ties go to background,
/// then to the smaller object id.
pub fn rasterize_mask(
    mask: &PixelMask,
    grid_h: usize,
    grid_w: usize,
    proc_h: usize,
    proc_w: usize,
) -> Result<PatchLabelGrid> {
    if grid_h == 0 || grid_w == 0 || proc_h == 0 || proc_w == 0 {
        return Err(Error::Argument("zero-sized grid".into()));
    }
    if mask.img_h == 0 || mask.img_w == 0 || mask.labels.len() != mask.img_h * mask.img_w {
        return Err(Error::Argument(format!(
            "mask {} has inconsistent size {}x{}",
            mask.image_id, mask.img_h, mask.img_w
        )));
    }
    if !proc_h.is_multiple_of(grid_h) || !proc_w.is_multiple_of(grid_w) {
        return Err(Error::Argument(format!(
            "processed size {proc_h}x{proc_w} not divisible into {grid_h}x{grid_w} patches"
        )));
    }
    let (cell_h, cell_w) = (proc_h / grid_h, proc_w / grid_w);
    let src_row: Vec<usize> = (0..proc_h).map(|y| y * mask.img_h / proc_h).collect();
    let src_col: Vec<usize> = (0..proc_w).map(|x| x * mask.img_w / proc_w).collect();

    let mut labels = Vec::with_capacity(grid_h * grid_w);
    let mut counts: BTreeMap<ObjectId, usize> = BTreeMap::new();
    for gr in 0..grid_h {
        for gc in 0..grid_w {
            counts.clear();
            for &sy in &src_row[gr * cell_h..(gr + 1) * cell_h] {
                for &sx in &src_col[gc * cell_w..(gc + 1) * cell_w] {
                    *counts.entry(mask.get(sy, sx)).or_default() += 1;
                }
            }
            // ascending label order, strict > keeps the smallest label on ties
            let mut best = (0, 0);
            for (&label, &count) in &counts {
                if count > best.1 {
                    best = (label, count);
                }
            }
            labels.push(best.0);
        }
    }
    Ok(PatchLabelGrid { grid_h, grid_w, labels })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(side: usize, patch: usize) -> GridGeometry {
        GridGeometry::unscaled(side / patch, side / patch, patch)
    }

    #[test]
    fn origin_maps_to_first_patch() {
        let g = GridGeometry {
            grid_h: 3,
            grid_w: 5,
            img_h: 480,
            img_w: 640,
            proc_h: 42,
            proc_w: 70,
            patch_px: 14,
        };
        assert_eq!(
            pixel_to_patch(PixelXY::new(0.0, 0.0), &g).unwrap(),
            PatchIndex::new(0, 0)
        );
    }

    #[test]
    fn pixel_arithmetic() {
        let g = square(224, 16);
        let p = pixel_to_patch(PixelXY::new(100.0, 40.0), &g).unwrap();
        assert_eq!((p.col, p.row), (6, 2));
        let p = pixel_to_patch(PixelXY::new(40.0, 100.0), &g).unwrap();
        assert_eq!(p, PatchIndex::new(6, 2));
        let last = pixel_to_patch(PixelXY::new(223.9, 223.9), &g).unwrap();
        assert_eq!(last, PatchIndex::new(13, 13));
    }

    #[test]
    fn pixel_out_of_bounds() {
        let g = square(224, 16);
        for xy in [
            PixelXY::new(-1.0, 0.0),
            PixelXY::new(0.0, 224.0),
            PixelXY::new(f64::NAN, 3.0),
        ] {
            assert!(matches!(pixel_to_patch(xy, &g), Err(Error::Argument(_))));
        }
    }

    #[test]
    fn rasterize_uniform() {
        let mask = PixelMask {
            image_id: "u".into(),
            img_h: 30,
            img_w: 20,
            labels: vec![5; 600],
        };
        let grid = rasterize_mask(&mask, 4, 4, 64, 64).unwrap();
        assert!(grid.labels.iter().all(|&l| l == 5));
    }

    #[test]
    fn rasterize_halves() {
        let mut labels = vec![0; 32 * 32];
        for y in 0..32 {
            for x in 0..32 {
                labels[y * 32 + x] = if x < 16 { 1 } else { 2 };
            }
        }
        let mask = PixelMask {
            image_id: "h".into(),
            img_h: 32,
            img_w: 32,
            labels,
        };
        let grid = rasterize_mask(&mask, 2, 2, 32, 32).unwrap();
        assert_eq!(grid.labels, vec![1, 2, 1, 2]);
    }

    #[test]
    fn rasterize_tie_breaks() {
        // one 2x2 cell: half label 3, half label 0 -> background wins
        let mask = PixelMask {
            image_id: "t".into(),
            img_h: 2,
            img_w: 2,
            labels: vec![3, 0, 3, 0],
        };
        assert_eq!(rasterize_mask(&mask, 1, 1, 2, 2).unwrap().labels, vec![0]);
        // half 4, half 2 -> smaller id wins
        let mask = PixelMask {
            image_id: "t".into(),
            img_h: 2,
            img_w: 2,
            labels: vec![4, 2, 4, 2],
        };
        assert_eq!(rasterize_mask(&mask, 1, 1, 2, 2).unwrap().labels, vec![2]);
    }

    #[test]
    fn rasterize_rejects_zero_grid() {
        let mask = PixelMask {
            image_id: "z".into(),
            img_h: 2,
            img_w: 2,
            labels: vec![0; 4],
        };
        assert!(matches!(rasterize_mask(&mask, 0, 1, 2, 2), Err(Error::Argument(_))));
    }

    #[test]
    fn geometry_validation() {
        assert!(square(224, 16).validate().is_ok());
        let mut g = square(224, 16);
        g.proc_h = 225;
        assert!(g.validate().is_err());
        g = square(224, 16);
        g.patch_px = 0;
        assert!(g.validate().is_err());
    }
}
