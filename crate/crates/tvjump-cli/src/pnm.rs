//! Binary PGM (P5) and PPM (P6) input and output.
//!
//! Scalar images use P5, three-channel images P6, with maxval 255 or
//! 65535 (two-byte samples are big-endian per the format). Sample values
//! map linearly onto `[0, 1]`. Unless a spacing is forced, a loaded image
//! lives on a grid whose longer side spans the unit interval, so
//! regularization weights mean the same thing across resolutions.

use anyhow::{anyhow, bail, Context, Result};
use std::fs;
use std::io::Write;
use std::path::Path;
use tvjump::grid::{GridSpec, VectorField};

/// Maximum sample value to write; 65535 keeps f64 fields round-trippable
/// to about 1.5e-5, 255 matches byte-oriented consumers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaxVal {
    Eight,
    Sixteen,
}

impl MaxVal {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "255" => Ok(MaxVal::Eight),
            "65535" => Ok(MaxVal::Sixteen),
            other => bail!("maxval must be 255 or 65535, got {other}"),
        }
    }

    fn as_u32(self) -> u32 {
        match self {
            MaxVal::Eight => 255,
            MaxVal::Sixteen => 65535,
        }
    }
}

/// Reads one header token, skipping whitespace and `#` comments.
fn next_token<'a>(bytes: &'a [u8], pos: &mut usize, what: &str) -> Result<&'a [u8]> {
    loop {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < bytes.len() && bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
            continue;
        }
        break;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    if start == *pos {
        bail!("truncated header while reading {what}");
    }
    Ok(&bytes[start..*pos])
}

fn parse_usize(token: &[u8], what: &str) -> Result<usize> {
    std::str::from_utf8(token)
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| anyhow!("bad {what} in header: {:?}", String::from_utf8_lossy(token)))
}

/// Loads a P5 or P6 image as a 1- or 3-channel field on `[rows, cols]`.
///
/// `spacing` forces the grid step; pass `None` for the default step
/// `1 / (max(rows, cols) - 1)`.
pub fn read_image(path: &Path, spacing: Option<f64>) -> Result<VectorField> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    if bytes.len() < 2 {
        bail!("{} is not a PNM file", path.display());
    }
    let channels = match &bytes[..2] {
        b"P5" => 1,
        b"P6" => 3,
        other => bail!(
            "{}: unsupported magic {:?} (binary P5/P6 only)",
            path.display(),
            String::from_utf8_lossy(other)
        ),
    };
    let mut pos = 2;
    let width = parse_usize(next_token(&bytes, &mut pos, "width")?, "width")?;
    let height = parse_usize(next_token(&bytes, &mut pos, "height")?, "height")?;
    let maxval = parse_usize(next_token(&bytes, &mut pos, "maxval")?, "maxval")?;
    if width == 0 || height == 0 {
        bail!("{}: empty image", path.display());
    }
    if !(1..=65535).contains(&maxval) {
        bail!("{}: maxval {maxval} out of range", path.display());
    }
    // Exactly one whitespace byte separates the header from the raster.
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        bail!("{}: missing raster separator", path.display());
    }
    pos += 1;
    let wide = maxval > 255;
    let bytes_per = if wide { 2 } else { 1 };
    let expected = width * height * channels * bytes_per;
    let raster = &bytes[pos..];
    if raster.len() < expected {
        bail!(
            "{}: raster holds {} bytes, header promises {expected}",
            path.display(),
            raster.len()
        );
    }
    let h = spacing.unwrap_or_else(|| {
        let longest = width.max(height);
        if longest > 1 {
            1.0 / (longest as f64 - 1.0)
        } else {
            1.0
        }
    });
    let spec = GridSpec::new(&[height, width], h)
        .map_err(|e| anyhow!("grid for {}: {e}", path.display()))?;
    let scale = 1.0 / maxval as f64;
    let mut data = Vec::with_capacity(width * height * channels);
    for i in 0..width * height * channels {
        let v = if wide {
            u16::from_be_bytes([raster[2 * i], raster[2 * i + 1]]) as f64
        } else {
            raster[i] as f64
        };
        data.push(v * scale);
    }
    VectorField::from_data(&spec, channels, data).map_err(|e| anyhow!("{e}"))
}

/// Writes a 1-channel field as P5 or a 3-channel field as P6, clamping to
/// `[0, 1]` and rounding to the chosen sample depth.
pub fn write_image(path: &Path, field: &VectorField, maxval: MaxVal) -> Result<()> {
    let spec = field.spec();
    if spec.ndim() != 2 {
        bail!("only 2-D images can be written, got {}-D", spec.ndim());
    }
    let magic = match field.channels() {
        1 => "P5",
        3 => "P6",
        n => bail!("PNM output needs 1 or 3 channels, got {n}"),
    };
    let (rows, cols) = (spec.dim(0), spec.dim(1));
    let top = maxval.as_u32();
    let mut out = Vec::with_capacity(field.data().len() * 2 + 32);
    write!(out, "{magic}\n{cols} {rows}\n{top}\n")?;
    for &v in field.data() {
        let q = (v.clamp(0.0, 1.0) * top as f64).round() as u32;
        match maxval {
            MaxVal::Eight => out.push(q as u8),
            MaxVal::Sixteen => out.extend_from_slice(&(q as u16).to_be_bytes()),
        }
    }
    fs::write(path, out).with_context(|| format!("writing {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sixteen_bit_round_trip_preserves_quantized_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.ppm");
        let spec = GridSpec::new(&[5, 7], 1.0).unwrap();
        let f = VectorField::from_fn(&spec, 3, |idx, out| {
            out[0] = (idx[0] as f64 / 4.0).min(1.0);
            out[1] = (idx[1] as f64 / 6.0).min(1.0);
            out[2] = 0.25;
        });
        write_image(&path, &f, MaxVal::Sixteen).unwrap();
        let g = read_image(&path, Some(1.0)).unwrap();
        assert_eq!(g.channels(), 3);
        assert_eq!(g.spec().dims(), &[5, 7]);
        let worst = f
            .data()
            .iter()
            .zip(g.data())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        assert!(worst <= 0.5 / 65535.0, "round trip error {worst}");
    }

    #[test]
    fn eight_bit_grayscale_and_comments_parse() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.pgm");
        fs::write(&path, b"P5 # magic\n# a comment line\n3 2\n255\n\x00\x80\xff\x10\x20\x30").unwrap();
        let g = read_image(&path, None).unwrap();
        assert_eq!(g.channels(), 1);
        assert_eq!(g.spec().dims(), &[2, 3]);
        // Longest side (3 columns) spans the unit interval.
        assert!((g.spec().spacing() - 0.5).abs() < 1e-15);
        assert!((g.get(1, 0) - 128.0 / 255.0).abs() < 1e-12);
        assert!((g.get(2, 0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn malformed_headers_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        for (name, bytes) in [
            ("bad_magic.pnm", b"P3\n1 1\n255\n0".to_vec()),
            ("short.pgm", b"P5\n4 4\n255\n\x00\x01".to_vec()),
            ("zero.pgm", b"P5\n0 3\n255\n".to_vec()),
            ("maxval.pgm", b"P5\n1 1\n70000\n\x00\x00".to_vec()),
        ] {
            let path = dir.path().join(name);
            fs::write(&path, &bytes).unwrap();
            assert!(read_image(&path, None).is_err(), "{name} parsed");
        }
    }
}
