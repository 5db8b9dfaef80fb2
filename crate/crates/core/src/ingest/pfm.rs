//! Grayscale PFM (`Pf`) depth maps.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::FloatMap;

/// Smallest value kept for non-positive depth samples.
pub const MIN_DEPTH: f32 = 1e-6;

#[derive(Debug, Clone)]
pub struct DepthMap {
    pub map: FloatMap,
    /// Samples that were zero or negative and got clamped to [`MIN_DEPTH`].
    pub clamped: usize,
}

/// Decodes a grayscale PFM. Rows are stored bottom to top; a negative scale
/// marks little-endian data.
pub fn decode(bytes: &[u8]) -> Result<FloatMap> {
    let mut pos = 0;
    let mut token = || -> Result<String> {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Pfm("truncated header".into()));
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };
    match token()?.as_str() {
        "Pf" => {}
        "PF" => return Err(Error::Pfm("color PFM is not a depth map".into())),
        other => return Err(Error::Pfm(format!("bad magic `{other}`"))),
    }
    let width: usize = token()?.parse().map_err(|_| Error::Pfm("bad width".into()))?;
    let height: usize = token()?.parse().map_err(|_| Error::Pfm("bad height".into()))?;
    let scale: f64 = token()?.parse().map_err(|_| Error::Pfm("bad scale".into()))?;
    if scale == 0.0 || !scale.is_finite() {
        return Err(Error::Pfm("scale must be non-zero".into()));
    }
    // exactly one whitespace byte separates the header from the raster
    pos += 1;
    let little = scale < 0.0;
    let n = width * height;
    let raster = bytes
        .get(pos..pos + 4 * n)
        .ok_or_else(|| Error::Pfm(format!("expected {} data bytes", 4 * n)))?;
    let mut data = vec![0f32; n];
    for row in 0..height {
        let dst = height - 1 - row;
        for u in 0..width {
            let o = 4 * (row * width + u);
            let b = [raster[o], raster[o + 1], raster[o + 2], raster[o + 3]];
            data[dst * width + u] = if little { f32::from_le_bytes(b) } else { f32::from_be_bytes(b) };
        }
    }
    Ok(FloatMap { width, height, data })
}

pub fn encode(map: &FloatMap, little_endian: bool) -> Vec<u8> {
    let scale = if little_endian { "-1.0" } else { "1.0" };
    let mut out = format!("Pf\n{} {}\n{scale}\n", map.width, map.height).into_bytes();
    out.reserve(4 * map.data.len());
    for row in (0..map.height).rev() {
        for &v in &map.data[row * map.width..(row + 1) * map.width] {
            out.extend_from_slice(&if little_endian { v.to_le_bytes() } else { v.to_be_bytes() });
        }
    }
    out
}

pub fn write_pfm(path: &Path, map: &FloatMap) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&encode(map, true)).map_err(|e| Error::io(path, e))
}

pub fn read_pfm(path: &Path) -> Result<FloatMap> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}

/// Reads a depth map, rejecting NaN/Inf and clamping non-positive values.
pub fn load_depth(path: &Path) -> Result<DepthMap> {
    let mut map = read_pfm(path)?;
    if let Some(k) = map.data.iter().position(|v| !v.is_finite()) {
        return Err(Error::Pfm(format!(
            "{}: non-finite depth at pixel ({}, {})",
            path.display(),
            k % map.width,
            k / map.width
        )));
    }
    let mut clamped = 0;
    for v in map.data.iter_mut().filter(|v| **v <= 0.0) {
        *v = MIN_DEPTH;
        clamped += 1;
    }
    if clamped > 0 {
        log::warn!("{}: clamped {clamped} non-positive depth values", path.display());
    }
    Ok(DepthMap { map, clamped })
}
