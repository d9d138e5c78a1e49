//! `AFMSK` pixel-mask container: magic, `img_h` and `img_w` as u32, then
//! `img_h * img_w` u16 labels, all little-endian. The image id is the file stem.

use std::fs;
use std::path::Path;

use super::PixelMask;
use crate::error::{Error, Result};

pub const MASK_MAGIC: &[u8; 5] = b"AFMSK";

pub(crate) fn encode_mask(mask: &PixelMask) -> Result<Vec<u8>> {
    if mask.labels.len() != mask.img_h * mask.img_w {
        return Err(Error::Argument(format!(
            "mask {} has {} labels for {}x{} pixels",
            mask.image_id,
            mask.labels.len(),
            mask.img_h,
            mask.img_w
        )));
    }
    let as_u32 = |v: usize| u32::try_from(v).map_err(|_| Error::Argument(format!("mask dimension {v} exceeds u32")));
    let mut buf = Vec::with_capacity(13 + mask.labels.len() * 2);
    buf.extend_from_slice(MASK_MAGIC);
    buf.extend_from_slice(&as_u32(mask.img_h)?.to_le_bytes());
    buf.extend_from_slice(&as_u32(mask.img_w)?.to_le_bytes());
    for l in &mask.labels {
        buf.extend_from_slice(&l.to_le_bytes());
    }
    Ok(buf)
}

pub(crate) fn decode_mask(image_id: &str, bytes: &[u8]) -> Result<PixelMask> {
    if bytes.len() < 13 {
        return Err(Error::Format(format!(
            "mask file of {} bytes is truncated",
            bytes.len()
        )));
    }
    if &bytes[..5] != MASK_MAGIC {
        return Err(Error::Format("bad magic, expected \"AFMSK\"".into()));
    }
    let img_h = u32::from_le_bytes(bytes[5..9].try_into().unwrap()) as usize;
    let img_w = u32::from_le_bytes(bytes[9..13].try_into().unwrap()) as usize;
    if img_h == 0 || img_w == 0 {
        return Err(Error::Format(format!(
            "mask dimensions {img_h}x{img_w} must be positive"
        )));
    }
    let expected = img_h * img_w * 2;
    let payload = &bytes[13..];
    if payload.len() != expected {
        return Err(Error::Format(format!(
            "mask payload has {} bytes, expected {expected}",
            payload.len()
        )));
    }
    let labels = payload
        .chunks_exact(2)
        .map(|c| u16::from_le_bytes([c[0], c[1]]))
        .collect();
    Ok(PixelMask {
        image_id: image_id.to_owned(),
        img_h,
        img_w,
        labels,
    })
}

pub fn write_mask_file(mask: &PixelMask, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_mask(mask)?).map_err(|e| Error::io(path, e))
}

pub fn read_mask_file(path: impl AsRef<Path>) -> Result<PixelMask> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
    decode_mask(stem, &bytes)
}


/// Binary greyscale PGM (`P5`, maxval 255), row-major.
pub fn write_pgm(path: impl AsRef<Path>, height: usize, width: usize, pixels: &[u8]) -> Result<()> {
    let path = path.as_ref();
    if pixels.len() != height * width {
        return Err(Error::Argument(format!(
            "{} pixels for a {height}x{width} image",
            pixels.len()
        )));
    }
    let mut buf = format!("P5\n{width} {height}\n255\n").into_bytes();
    buf.extend_from_slice(pixels);
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod pgm_tests {
    use super::*;

    #[test]
    fn pgm_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.pgm");
        write_pgm(&path, 2, 3, &[0, 255, 0, 0, 0, 255]).unwrap();
        let bytes = fs::read(&path).unwrap();
        assert!(bytes.starts_with(b"P5\n3 2\n255\n"));
        assert_eq!(bytes.len(), 11 + 6);
        assert!(write_pgm(&path, 2, 2, &[0; 3]).is_err());
    }
}
