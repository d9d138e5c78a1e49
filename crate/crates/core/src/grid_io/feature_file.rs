//! `AFTN` feature container.
//!
//! Layout, all little-endian:
//!
//! ```text
//! "AFTN" | version u32
//! grid_h grid_w dim img_h img_w proc_h proc_w patch_px   (u32 each)
//! feature_kind u8
//! image_id: len u32 + UTF-8 bytes
//! grid_h * grid_w * dim f32, row-major (row, col, channel)
//! ```

use std::fs;
use std::path::Path;

use super::{FeatureGrid, FeatureKind, GridGeometry};
use crate::error::{Error, Result};

pub const FEATURE_MAGIC: &[u8; 4] = b"AFTN";
pub const FEATURE_VERSION: u32 = 1;

fn to_u32(v: usize, name: &str) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::Argument(format!("{name}={v} does not fit in u32")))
}

pub(crate) fn encode_feature_grid(grid: &FeatureGrid) -> Result<Vec<u8>> {
    grid.validate()?;
    let g = &grid.geometry;
    let id = grid.image_id.as_bytes();
    let mut buf = Vec::with_capacity(4 + 4 * 10 + 1 + id.len() + grid.data.len() * 4);
    buf.extend_from_slice(FEATURE_MAGIC);
    buf.extend_from_slice(&FEATURE_VERSION.to_le_bytes());
    let header = [
        ("grid_h", g.grid_h),
        ("grid_w", g.grid_w),
        ("dim", grid.dim),
        ("img_h", g.img_h),
        ("img_w", g.img_w),
        ("proc_h", g.proc_h),
        ("proc_w", g.proc_w),
        ("patch_px", g.patch_px),
    ];
    for (name, v) in header {
        buf.extend_from_slice(&to_u32(v, name)?.to_le_bytes());
    }
    buf.push(grid.kind.code());
    buf.extend_from_slice(&to_u32(id.len(), "image_id length")?.to_le_bytes());
    buf.extend_from_slice(id);
    for v in &grid.data {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    Ok(buf)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Format(format!("truncated file while reading {what} at byte {}", self.pos)))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }
}

pub(crate) fn decode_feature_grid(bytes: &[u8]) -> Result<FeatureGrid> {
    let mut cur = Cursor { bytes, pos: 0 };
    let magic = cur.take(4, "magic")?;
    if magic != FEATURE_MAGIC {
        return Err(Error::Format(format!("bad magic {:?}, expected \"AFTN\"", magic)));
    }
    let version = cur.u32("version")?;
    if version != FEATURE_VERSION {
        return Err(Error::Format(format!("unsupported format version {version}")));
    }
    let mut dims = [0usize; 8];
    for (slot, name) in dims.iter_mut().zip([
        "grid_h", "grid_w", "dim", "img_h", "img_w", "proc_h", "proc_w", "patch_px",
    ]) {
        *slot = cur.u32(name)? as usize;
    }
    let [grid_h, grid_w, dim, img_h, img_w, proc_h, proc_w, patch_px] = dims;
    let code = cur.take(1, "feature_kind")?[0];
    let kind =
        FeatureKind::from_code(code).ok_or_else(|| Error::Format(format!("unknown feature kind code {code}")))?;
    let id_len = cur.u32("image_id length")? as usize;
    let image_id = std::str::from_utf8(cur.take(id_len, "image_id")?)
        .map_err(|e| Error::Format(format!("image_id is not UTF-8: {e}")))?
        .to_owned();

    let geometry = GridGeometry {
        grid_h,
        grid_w,
        img_h,
        img_w,
        proc_h,
        proc_w,
        patch_px,
    };
    geometry.validate()?;
    if dim == 0 {
        return Err(Error::Format("dim must be at least 1".into()));
    }
    let count = grid_h
        .checked_mul(grid_w)
        .and_then(|n| n.checked_mul(dim))
        .ok_or_else(|| Error::Format("payload size overflows".into()))?;
    let payload = cur.take(count * 4, "payload")?;
    if cur.pos != bytes.len() {
        return Err(Error::Format(format!(
            "{} trailing bytes after payload",
            bytes.len() - cur.pos
        )));
    }
    let data: Vec<f32> = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    FeatureGrid::new(image_id, geometry, dim, kind, data)
}

pub fn write_feature_file(grid: &FeatureGrid, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_feature_grid(grid)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_feature_file(path: impl AsRef<Path>) -> Result<FeatureGrid> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_feature_grid(&bytes)
}
