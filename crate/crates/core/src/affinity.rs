//! Patch-to-patch affinity: raw dot products between patch features, then
//! per-row min-max normalization into [0, 1].

use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid_io::{write_feature_file, FeatureGrid, FeatureKind, GridGeometry, PatchIndex};

/// Row-normalized `n x n` affinity, `n = grid_h * grid_w`, row-major patch order.
/// Row `i` is the affinity map of source patch `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffinityMatrix {
    pub geometry: GridGeometry,
    pub n: usize,
    pub values: Vec<f64>,
}

/// One row of an [`AffinityMatrix`] viewed on the patch grid.
#[derive(Debug, Clone, Copy)]
pub struct AffinityMap<'a> {
    pub grid_h: usize,
    pub grid_w: usize,
    pub values: &'a [f64],
}

impl AffinityMap<'_> {
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.grid_w + col]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

impl AffinityMatrix {
    pub fn grid_h(&self) -> usize {
        self.geometry.grid_h
    }

    pub fn grid_w(&self) -> usize {
        self.geometry.grid_w
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n..(i + 1) * self.n]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    /// Builds a matrix from explicit rows, checking shape and range.
    pub fn from_values(geometry: GridGeometry, values: Vec<f64>) -> Result<Self> {
        geometry.validate()?;
        let n = geometry.n_patches();
        if values.len() != n * n {
            return Err(Error::Argument(format!(
                "expected {} values, got {}",
                n * n,
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Argument(format!("affinity value {v} outside [0, 1]")));
        }
        Ok(AffinityMatrix { geometry, n, values })
    }
}

fn check_finite(grid: &FeatureGrid) -> Result<()> {
    grid.validate()
        .map_err(|e| Error::validation(0, format!("{}: {e}", grid.image_id)))
}

/// Unnormalized dot products `raw[i][j] = <f_i, f_j>`, accumulated in f64.
pub fn raw_affinity(grid: &FeatureGrid) -> Result<Vec<f64>> {
    check_finite(grid)?;
    let n = grid.n_patches();
    let mut raw = vec![0.0f64; n * n];
    raw.par_chunks_mut(n).enumerate().for_each(|(i, out)| {
        let fi = grid.patch(i);
        for (j, slot) in out.iter_mut().enumerate() {
            *slot = fi.iter().zip(grid.patch(j)).map(|(&a, &b)| a as f64 * b as f64).sum();
        }
    });
    if let Some(pos) = raw.iter().position(|v| !v.is_finite()) {
        return Err(Error::validation(
            0,
            format!("{}: dot product overflow at ({}, {})", grid.image_id, pos / n, pos % n),
        ));
    }
    Ok(raw)
}

/// Min-max normalizes one row in place. A constant row becomes 1 at `self_idx`
/// and 0 elsewhere.
pub fn normalize_row(row: &mut [f64], self_idx: usize) {
    let (lo, hi) = row.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
        (lo.min(v), hi.max(v))
    });
    if hi > lo {
        let span = hi - lo;
        for v in row.iter_mut() {
            *v = (*v - lo) / span;
        }
    } else {
        row.fill(0.0);
        row[self_idx] = 1.0;
    }
}

pub fn compute_affinity(grid: &FeatureGrid) -> Result<AffinityMatrix> {
    let n = grid.n_patches();
    let mut values = raw_affinity(grid)?;
    values
        .par_chunks_mut(n)
        .enumerate()
        .for_each(|(i, row)| normalize_row(row, i));
    Ok(AffinityMatrix {
        geometry: grid.geometry,
        n,
        values,
    })
}

/// The affinity map of `patch`, viewed on the grid.
pub fn affinity_map(aff: &AffinityMatrix, patch: PatchIndex) -> Result<AffinityMap<'_>> {
    if patch.row >= aff.grid_h() || patch.col >= aff.grid_w() {
        return Err(Error::Argument(format!(
            "patch ({}, {}) outside {}x{} grid",
            patch.row,
            patch.col,
            aff.grid_h(),
            aff.grid_w()
        )));
    }
    Ok(AffinityMap {
        grid_h: aff.grid_h(),
        grid_w: aff.grid_w(),
        values: aff.row(patch.flat(aff.grid_w())),
    })
}

/// Writes the matrix as an `AFTN` container with `dim = n`.
pub fn write_affinity_dump(
    aff: &AffinityMatrix,
    image_id: &str,
    kind: FeatureKind,
    path: impl AsRef<Path>,
) -> Result<()> {
    let data = aff.values.iter().map(|&v| v as f32).collect();
    let grid = FeatureGrid::new(image_id, aff.geometry, aff.n, kind, data)?;
    write_feature_file(&grid, path)
}
