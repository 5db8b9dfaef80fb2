//! Binary little-endian PLY in the layout used by 3DGS tooling.
//!
//! Vertex properties, all `float`: `x y z nx ny nz f_dc_0..2 f_rest_* opacity
//! scale_0..2 rot_0..3`. Opacity and scales are stored pre-activation and
//! `f_rest` is channel-major, matching the reference exporters.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use super::cloud::{GaussianCloud, Params};
use super::sh;
use crate::error::{Error, Result};

fn property_names(sh_degree: usize) -> Vec<String> {
    let rest = 3 * (sh::num_coeffs(sh_degree) - 1);
    let mut names: Vec<String> = ["x", "y", "z", "nx", "ny", "nz", "f_dc_0", "f_dc_1", "f_dc_2"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    names.extend((0..rest).map(|i| format!("f_rest_{i}")));
    names.push("opacity".into());
    names.extend((0..3).map(|i| format!("scale_{i}")));
    names.extend((0..4).map(|i| format!("rot_{i}")));
    names
}

pub fn write<W: Write>(cloud: &GaussianCloud, mut out: W) -> std::io::Result<()> {
    let degree = cloud.sh_degree();
    let names = property_names(degree);
    let mut header = String::from("ply\nformat binary_little_endian 1.0\n");
    header.push_str(&format!("element vertex {}\n", cloud.len()));
    for n in &names {
        header.push_str(&format!("property float {n}\n"));
    }
    header.push_str("end_header\n");
    out.write_all(header.as_bytes())?;

    let k = sh::num_coeffs(degree) - 1;
    let p = &cloud.params;
    let mut row: Vec<f32> = Vec::with_capacity(names.len());
    for i in 0..cloud.len() {
        row.clear();
        row.extend(p.positions[3 * i..3 * i + 3].iter().map(|&v| v as f32));
        row.extend([0.0f32; 3]);
        row.extend(p.sh_dc[3 * i..3 * i + 3].iter().map(|&v| v as f32));
        let rest = cloud.sh_rest(i);
        for ch in 0..3 {
            for j in 0..k {
                row.push(rest[j * 3 + ch] as f32);
            }
        }
        row.push(p.opacity_logits[i] as f32);
        row.extend(p.log_scales[3 * i..3 * i + 3].iter().map(|&v| v as f32));
        row.extend(p.rotations[4 * i..4 * i + 4].iter().map(|&v| v as f32));
        for v in &row {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    out.flush()
}

pub fn save(cloud: &GaussianCloud, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write(cloud, std::io::BufWriter::new(file)).map_err(|e| Error::io(path, e))
}

pub fn read<R: Read>(input: R) -> Result<GaussianCloud> {
    let mut reader = BufReader::new(input);
    let mut line = String::new();
    let next_line = |reader: &mut BufReader<R>, line: &mut String| -> Result<()> {
        line.clear();
        let n = reader
            .read_line(line)
            .map_err(|e| Error::Ply(e.to_string()))?;
        if n == 0 {
            return Err(Error::Ply("unexpected end of header".into()));
        }
        Ok(())
    };

    next_line(&mut reader, &mut line)?;
    if line.trim_end() != "ply" {
        return Err(Error::Ply("missing `ply` magic".into()));
    }
    let mut count: Option<usize> = None;
    let mut props: Vec<String> = Vec::new();
    loop {
        next_line(&mut reader, &mut line)?;
        let tokens: Vec<&str> = line.split_whitespace().collect();
        match tokens.as_slice() {
            ["format", "binary_little_endian", _] => {}
            ["format", other, ..] => {
                return Err(Error::Ply(format!("unsupported format `{other}`")));
            }
            ["comment", ..] | ["obj_info", ..] => {}
            ["element", "vertex", n] => {
                count = Some(n.parse().map_err(|_| Error::Ply(format!("bad vertex count `{n}`")))?);
            }
            ["element", other, ..] => {
                return Err(Error::Ply(format!("unexpected element `{other}`")));
            }
            ["property", "float", name] => props.push(name.to_string()),
            ["property", ty, name] => {
                return Err(Error::Ply(format!("property `{name}` has type `{ty}`, expected float")));
            }
            ["end_header"] => break,
            [] => {}
            _ => return Err(Error::Ply(format!("unrecognized header line `{}`", line.trim_end()))),
        }
    }
    let n = count.ok_or_else(|| Error::Ply("no vertex element".into()))?;

    let rest_count = props.iter().filter(|p| p.starts_with("f_rest_")).count();
    let degree = (0..=sh::MAX_DEGREE)
        .find(|&d| 3 * (sh::num_coeffs(d) - 1) == rest_count)
        .ok_or_else(|| Error::Ply(format!("{rest_count} f_rest properties match no SH degree")))?;
    let index_of = |name: &str| -> Result<usize> {
        props
            .iter()
            .position(|p| p == name)
            .ok_or_else(|| Error::Ply(format!("missing property `{name}`")))
    };
    let expected = property_names(degree);
    let columns: Vec<usize> = expected
        .iter()
        .filter(|n| !matches!(n.as_str(), "nx" | "ny" | "nz"))
        .map(|n| index_of(n))
        .collect::<Result<_>>()?;

    let stride = props.len();
    let mut raw = vec![0u8; n * stride * 4];
    reader
        .read_exact(&mut raw)
        .map_err(|e| Error::Ply(format!("truncated vertex data: {e}")))?;
    let value = |i: usize, col: usize| -> f64 {
        let o = (i * stride + col) * 4;
        f32::from_le_bytes([raw[o], raw[o + 1], raw[o + 2], raw[o + 3]]) as f64
    };

    let k = sh::num_coeffs(degree) - 1;
    let mut params = Params::zeros(n, degree);
    // columns: x y z, f_dc 0..3, f_rest.., opacity, scale 0..3, rot 0..4
    for i in 0..n {
        let mut c = columns.iter();
        for a in 0..3 {
            params.positions[3 * i + a] = value(i, *c.next().unwrap());
        }
        for a in 0..3 {
            params.sh_dc[3 * i + a] = value(i, *c.next().unwrap());
        }
        for ch in 0..3 {
            for j in 0..k {
                params.sh_rest[i * 3 * k + j * 3 + ch] = value(i, *c.next().unwrap());
            }
        }
        params.opacity_logits[i] = value(i, *c.next().unwrap());
        for a in 0..3 {
            params.log_scales[3 * i + a] = value(i, *c.next().unwrap());
        }
        for a in 0..4 {
            params.rotations[4 * i + a] = value(i, *c.next().unwrap());
        }
    }
    Ok(GaussianCloud {
        params,
        visibility_counts: vec![0; n],
        frozen: false,
    })
}

pub fn load(path: &Path) -> Result<GaussianCloud> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read(file)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Vector3;

    #[test]
    fn header_lists_expected_properties() {
        let cloud = GaussianCloud::empty(1);
        let mut buf = Vec::new();
        write(&cloud, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("property float f_rest_8\n"));
        assert!(!text.contains("f_rest_9"));
        assert!(text.ends_with("end_header\n"));
    }

    #[test]
    fn rejects_ascii() {
        let data = b"ply\nformat ascii 1.0\nelement vertex 0\nend_header\n";
        assert!(read(&data[..]).is_err());
    }

    #[test]
    fn rest_layout_is_channel_major() {
        let mut cloud = GaussianCloud::empty(1);
        cloud.push(Vector3::zeros(), [1.0, 0.0, 0.0, 0.0], Vector3::zeros(), 0.5, [0.5; 3]);
        // coefficient j=1 (second rest coefficient), channel 2
        cloud.params.sh_rest[1 * 3 + 2] = 0.25;
        let mut buf = Vec::new();
        write(&cloud, &mut buf).unwrap();
        let header_len = buf.windows(11).position(|w| w == b"end_header\n").unwrap() + 11;
        // f_rest index = ch * K + j = 2 * 3 + 1 = 7, column offset 9 + 7
        let o = header_len + (9 + 7) * 4;
        let v = f32::from_le_bytes([buf[o], buf[o + 1], buf[o + 2], buf[o + 3]]);
        assert_eq!(v, 0.25);
    }
}
