//! Packed little-endian scan files.
//!
//! | extension | record                              |
//! |-----------|-------------------------------------|
//! | `.bin`    | `f32` x, y, z, intensity            |
//! | `.label`  | `u32` semantic (low 16), instance (high 16) |
//! | `.off`    | `f32` offset x, y, z                |
//! | `.conf`   | `f32` confidence                    |

use std::fs;
use std::path::{Path, PathBuf};

use crate::domain::{decode_labels, encode_labels, PanopticLabels, Point3, PointCloud, PredictionSet};
use crate::error::{Error, Result};

fn f32_records<const K: usize>(what: &'static str, raw: &[u8]) -> Result<Vec<[f32; K]>> {
    let stride = 4 * K;
    if !raw.len().is_multiple_of(stride) {
        return Err(Error::MalformedBinary {
            what,
            len: raw.len(),
            stride,
        });
    }
    Ok(raw
        .chunks_exact(stride)
        .map(|rec| {
            let mut out = [0f32; K];
            for (k, v) in out.iter_mut().enumerate() {
                let b = &rec[4 * k..4 * k + 4];
                *v = f32::from_le_bytes([b[0], b[1], b[2], b[3]]);
            }
            out
        })
        .collect())
}

fn put_f32s(out: &mut Vec<u8>, values: impl IntoIterator<Item = f32>) {
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

/// Decodes `.bin` bytes into a cloud with intensity as its single feature.
pub fn decode_points(raw: &[u8]) -> Result<PointCloud> {
    let records = f32_records::<4>("point", raw)?;
    let coords = records
        .iter()
        .map(|r| [r[0] as f64, r[1] as f64, r[2] as f64])
        .collect();
    let intensity = records.iter().map(|r| r[3]).collect();
    PointCloud::new(coords, intensity, 1)
}

/// Encodes a cloud as `.bin` bytes; the first feature channel (or 0) becomes intensity.
pub fn encode_points(cloud: &PointCloud) -> Vec<u8> {
    let mut out = Vec::with_capacity(cloud.len() * 16);
    for (i, p) in cloud.coords().iter().enumerate() {
        let intensity = cloud.feature(i).first().copied().unwrap_or(0.0);
        put_f32s(&mut out, [p[0] as f32, p[1] as f32, p[2] as f32, intensity]);
    }
    out
}

pub fn decode_offsets(raw: &[u8]) -> Result<Vec<Point3>> {
    Ok(f32_records::<3>("offset", raw)?
        .into_iter()
        .map(|r| [r[0] as f64, r[1] as f64, r[2] as f64])
        .collect())
}

pub fn encode_offsets(offsets: &[Point3]) -> Vec<u8> {
    let mut out = Vec::with_capacity(offsets.len() * 12);
    for o in offsets {
        put_f32s(&mut out, o.iter().map(|&v| v as f32));
    }
    out
}

pub fn decode_confidence(raw: &[u8]) -> Result<Vec<f64>> {
    Ok(f32_records::<1>("confidence", raw)?
        .into_iter()
        .map(|r| r[0] as f64)
        .collect())
}

pub fn encode_confidence(confidence: &[f64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(confidence.len() * 4);
    put_f32s(&mut out, confidence.iter().map(|&c| c as f32));
    out
}

pub fn read_points(path: &Path) -> Result<PointCloud> {
    decode_points(&fs::read(path)?)
}

pub fn read_labels(path: &Path) -> Result<PanopticLabels> {
    decode_labels(&fs::read(path)?)
}

pub fn write_labels(path: &Path, labels: &PanopticLabels) -> Result<()> {
    fs::write(path, encode_labels(labels)?)?;
    Ok(())
}

/// Reads `<stem>.label` (semantics), `<stem>.off` and `<stem>.conf` from `dir`.
pub fn read_predictions(dir: &Path, stem: &str) -> Result<PredictionSet> {
    let semantic = read_labels(&with_ext(dir, stem, "label"))?.semantic;
    let offsets = decode_offsets(&fs::read(with_ext(dir, stem, "off"))?)?;
    let confidence = decode_confidence(&fs::read(with_ext(dir, stem, "conf"))?)?;
    PredictionSet::new(semantic, offsets, confidence)
}

/// Sorted file stems in `dir` carrying extension `ext`. A missing directory is empty.
pub fn list_stems(dir: &Path, ext: &str) -> Result<Vec<String>> {
    if !dir.exists() {
        return Ok(Vec::new());
    }
    let mut stems = Vec::new();
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_file() && path.extension().is_some_and(|e| e == ext) {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                stems.push(stem.to_string());
            }
        }
    }
    stems.sort();
    Ok(stems)
}

pub fn with_ext(dir: &Path, stem: &str, ext: &str) -> PathBuf {
    dir.join(format!("{stem}.{ext}"))
}
