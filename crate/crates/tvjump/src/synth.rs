//! Deterministic synthetic test images with known ground-truth jump sets.
//!
//! Every generator is reproducible: Gaussian noise comes from a counter-mode
//! splitmix64 stream keyed by (seed, pixel, channel), so the output is
//! independent of evaluation order, and the oscillation pattern is a
//! seed-free checkerboard.

use crate::grid::{Direction, GridSpec, VectorField};
use crate::{Error, Result};

/// Axis-aligned rectangle in pixel indices, half-open on the far side.
#[derive(Debug, Clone, PartialEq)]
pub struct RectRegion {
    pub row0: usize,
    pub col0: usize,
    pub row1: usize,
    pub col1: usize,
    pub color: Vec<f64>,
}

/// The geometric content of a synthetic image.
#[derive(Debug, Clone, PartialEq)]
pub enum ImageKind {
    /// 1D signal split into equal-length segments with the given levels.
    Step1D { levels: Vec<Vec<f64>> },
    /// 2D background color overpainted by rectangles (later ones win).
    PiecewiseConstant2D {
        background: Vec<f64>,
        rects: Vec<RectRegion>,
    },
    /// A disk of one color on a background of another.
    DiskOnBackground {
        center: [f64; 2],
        radius: f64,
        inside: Vec<f64>,
        outside: Vec<f64>,
    },
    /// Affine ramp along one axis plus an optional mid-domain step.
    RampPlusStep {
        axis: usize,
        offset: f64,
        slope: f64,
        step_height: f64,
    },
}

/// Additive perturbation applied after the clean image is built.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Noise {
    None,
    /// I.i.d. Gaussian per pixel and channel (Box-Muller on splitmix64).
    Gaussian { sigma: f64, seed: u64 },
    /// Deterministic checkerboard of +/- amplitude with the given period
    /// in pixels (even, default 2); identical across channels.
    Oscillation { amplitude: f64, period_px: usize },
}

/// A complete generator specification.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub kind: ImageKind,
    pub noise: Noise,
}

/// One ground-truth interface pixel with its orientation and the exact
/// clean one-sided values (`f_plus` on the side the normal points to).
#[derive(Debug, Clone)]
pub struct GroundTruthJump {
    pub pixel: usize,
    pub normal: Direction,
    pub f_plus: Vec<f64>,
    pub f_minus: Vec<f64>,
}

/// Sequential splitmix64 generator for test harness use.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E3779B97F4A7C15);
        mix(self.state)
    }

    /// Uniform in `[0, 1)`.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    /// Uniform in `[-1, 1]`.
    pub fn next_symmetric(&mut self) -> f64 {
        self.next_f64() * 2.0 - 1.0
    }

    /// Standard normal via Box-Muller.
    pub fn next_gaussian(&mut self) -> f64 {
        let u1 = ((self.next_u64() >> 11) + 1) as f64 / ((1u64 << 53) + 1) as f64;
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }
}

fn mix(x: u64) -> u64 {
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Counter-mode standard normal: the k-th draw of a stream, independent of
/// evaluation order.
pub fn gaussian_at(seed: u64, k: u64) -> f64 {
    let a = mix(seed.wrapping_add((2 * k + 1).wrapping_mul(0x9E3779B97F4A7C15)));
    let b = mix(seed.wrapping_add((2 * k + 2).wrapping_mul(0x9E3779B97F4A7C15)));
    let u1 = ((a >> 11) + 1) as f64 / ((1u64 << 53) + 1) as f64;
    let u2 = (b >> 11) as f64 / (1u64 << 53) as f64;
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Builds the image described by `spec` on `grid` with `channels` channels,
/// returning the (noisy) field and the clean ground-truth jump list.
pub fn generate(
    spec: &SynthSpec,
    grid: &GridSpec,
    channels: usize,
) -> Result<(VectorField, Vec<GroundTruthJump>)> {
    if channels == 0 {
        return Err(Error::InvalidArgument("channel count must be positive".into()));
    }
    let (mut field, jumps) = match &spec.kind {
        ImageKind::Step1D { levels } => step_1d(levels, grid, channels)?,
        ImageKind::PiecewiseConstant2D { background, rects } => {
            piecewise_2d(background, rects, grid, channels)?
        }
        ImageKind::DiskOnBackground {
            center,
            radius,
            inside,
            outside,
        } => disk(center, *radius, inside, outside, grid, channels)?,
        ImageKind::RampPlusStep {
            axis,
            offset,
            slope,
            step_height,
        } => ramp_plus_step(*axis, *offset, *slope, *step_height, grid, channels)?,
    };
    apply_noise(&mut field, &spec.noise, channels)?;
    Ok((field, jumps))
}

fn check_color(color: &[f64], channels: usize, what: &str) -> Result<()> {
    if color.len() != channels {
        return Err(Error::ShapeMismatch(format!(
            "{what} has {} entries, expected {channels}",
            color.len()
        )));
    }
    if color.iter().any(|c| !(0.0..=1.0).contains(c)) {
        return Err(Error::InvalidArgument(format!(
            "{what} components must lie in [0, 1], got {color:?}"
        )));
    }
    Ok(())
}

fn step_1d(
    levels: &[Vec<f64>],
    grid: &GridSpec,
    channels: usize,
) -> Result<(VectorField, Vec<GroundTruthJump>)> {
    if grid.ndim() != 1 {
        return Err(Error::InvalidGrid("Step1D requires a 1D grid".into()));
    }
    if levels.len() < 2 {
        return Err(Error::InvalidArgument(
            "Step1D needs at least two levels".into(),
        ));
    }
    for (k, level) in levels.iter().enumerate() {
        check_color(level, channels, &format!("level {k}"))?;
    }
    let len = grid.dim(0);
    if len < levels.len() {
        return Err(Error::InvalidGrid(format!(
            "grid of {len} samples cannot hold {} segments",
            levels.len()
        )));
    }
    let seg = |i: usize| -> usize { (i * levels.len() / len).min(levels.len() - 1) };
    let field = VectorField::from_fn(grid, channels, |idx, out| {
        out.copy_from_slice(&levels[seg(idx[0])]);
    });
    let mut jumps = Vec::new();
    for i in 0..len - 1 {
        let (a, b) = (seg(i), seg(i + 1));
        if a != b && levels[a] != levels[b] {
            jumps.push(GroundTruthJump {
                pixel: i,
                normal: Direction::new(&[1.0])?,
                f_plus: levels[b].clone(),
                f_minus: levels[a].clone(),
            });
        }
    }
    Ok((field, jumps))
}

fn piecewise_2d(
    background: &[f64],
    rects: &[RectRegion],
    grid: &GridSpec,
    channels: usize,
) -> Result<(VectorField, Vec<GroundTruthJump>)> {
    if grid.ndim() != 2 {
        return Err(Error::InvalidGrid(
            "PiecewiseConstant2D requires a 2D grid".into(),
        ));
    }
    check_color(background, channels, "background")?;
    let (rows, cols) = (grid.dim(0), grid.dim(1));
    for (k, r) in rects.iter().enumerate() {
        check_color(&r.color, channels, &format!("rectangle {k}"))?;
        if r.row0 >= r.row1 || r.col0 >= r.col1 || r.row1 > rows || r.col1 > cols {
            return Err(Error::InvalidArgument(format!(
                "rectangle {k} is empty or exceeds the grid"
            )));
        }
    }
    let color_at = |i: usize, j: usize| -> &[f64] {
        for r in rects.iter().rev() {
            if i >= r.row0 && i < r.row1 && j >= r.col0 && j < r.col1 {
                return &r.color;
            }
        }
        background
    };
    let field = VectorField::from_fn(grid, channels, |idx, out| {
        out.copy_from_slice(color_at(idx[0], idx[1]));
    });
    let jumps = boundary_jumps(grid, channels, &|i, j| color_at(i, j).to_vec());
    Ok((field, jumps))
}

fn disk(
    center: &[f64; 2],
    radius: f64,
    inside: &[f64],
    outside: &[f64],
    grid: &GridSpec,
    channels: usize,
) -> Result<(VectorField, Vec<GroundTruthJump>)> {
    if grid.ndim() != 2 {
        return Err(Error::InvalidGrid(
            "DiskOnBackground requires a 2D grid".into(),
        ));
    }
    check_color(inside, channels, "inside color")?;
    check_color(outside, channels, "outside color")?;
    let h = grid.spacing();
    if !(radius.is_finite()) || radius < 2.0 * h {
        return Err(Error::InvalidArgument(format!(
            "disk radius {radius} is degenerate (need at least twice the spacing {h})"
        )));
    }
    let in_disk = |i: usize, j: usize| -> bool {
        let y = i as f64 * h - center[0];
        let x = j as f64 * h - center[1];
        (y * y + x * x).sqrt() <= radius
    };
    let field = VectorField::from_fn(grid, channels, |idx, out| {
        out.copy_from_slice(if in_disk(idx[0], idx[1]) {
            inside
        } else {
            outside
        });
    });
    let mut jumps = boundary_jumps(grid, channels, &|i, j| {
        if in_disk(i, j) {
            inside.to_vec()
        } else {
            outside.to_vec()
        }
    });
    // The neighborhood scan quantizes normals to 45-degree steps; the disk
    // boundary normal is known exactly (radial), so replace each one while
    // keeping the scan's orientation from the pixel's own color outward.
    for jump in &mut jumps {
        let mi = grid.multi_index(jump.pixel);
        let y = mi[0] as f64 * h - center[0];
        let x = mi[1] as f64 * h - center[1];
        let len = (y * y + x * x).sqrt();
        if len > 1e-12 {
            let scan = jump.normal.components();
            let sign = if (y * scan[0] + x * scan[1]) >= 0.0 { 1.0 } else { -1.0 };
            jump.normal = Direction::new(&[sign * y / len, sign * x / len])?;
        }
    }
    Ok((field, jumps))
}

fn ramp_plus_step(
    axis: usize,
    offset: f64,
    slope: f64,
    step_height: f64,
    grid: &GridSpec,
    channels: usize,
) -> Result<(VectorField, Vec<GroundTruthJump>)> {
    if axis >= grid.ndim() {
        return Err(Error::InvalidArgument(format!(
            "ramp axis {axis} out of range for a {}D grid",
            grid.ndim()
        )));
    }
    if step_height < 0.0 || !step_height.is_finite() || !slope.is_finite() || !offset.is_finite() {
        return Err(Error::InvalidArgument(
            "ramp parameters must be finite with nonnegative step height".into(),
        ));
    }
    let len = grid.dim(axis);
    let h = grid.spacing();
    let split = len / 2; // first pixel index on the raised side
    let value = |i: usize| -> f64 {
        offset + slope * (i as f64 * h) + if i >= split { step_height } else { 0.0 }
    };
    let lo = value(0).min(value(len - 1)).min(value(split.saturating_sub(1)));
    let hi = value(0).max(value(len - 1)).max(value(split));
    if lo < -1e-12 || hi > 1.0 + 1e-12 {
        return Err(Error::InvalidArgument(format!(
            "ramp values [{lo}, {hi}] leave [0, 1]"
        )));
    }
    let field = VectorField::from_fn(grid, channels, |idx, out| {
        out.fill(value(idx[axis]));
    });
    let mut jumps = Vec::new();
    if step_height > 0.0 && split > 0 && split < len {
        // One-sided limits at the interface: the ramp part is continuous.
        let ramp_at_split = offset + slope * ((split as f64 - 0.5) * h);
        let mut nu = vec![0.0; grid.ndim()];
        nu[axis] = 1.0;
        let normal = Direction::new(&nu)?;
        let per_line = |other: usize| -> usize {
            match grid.ndim() {
                1 => split - 1,
                _ => {
                    if axis == 0 {
                        grid.index_of(&[split - 1, other])
                    } else {
                        grid.index_of(&[other, split - 1])
                    }
                }
            }
        };
        let lines = if grid.ndim() == 1 {
            1
        } else {
            grid.dim(1 - axis)
        };
        for line in 0..lines {
            jumps.push(GroundTruthJump {
                pixel: per_line(line),
                normal: normal.clone(),
                f_plus: vec![ramp_at_split + step_height; channels],
                f_minus: vec![ramp_at_split; channels],
            });
        }
    }
    Ok((field, jumps))
}

/// Scans 4-neighborhoods of a 2D color map for interfaces.  A pixel is
/// recorded when at least one neighbor has a different color; the recorded
/// normal is the mean of the unit offsets toward differing neighbors (so it
/// points from the pixel's own color, `f_minus`, toward the other side),
/// and `f_plus` is the differing neighbor color best aligned with it.
fn boundary_jumps(
    grid: &GridSpec,
    _channels: usize,
    color_at: &dyn Fn(usize, usize) -> Vec<f64>,
) -> Vec<GroundTruthJump> {
    let (rows, cols) = (grid.dim(0), grid.dim(1));
    let mut jumps = Vec::new();
    for i in 0..rows {
        for j in 0..cols {
            let own = color_at(i, j);
            let mut dir = [0.0f64; 2];
            let mut best: Option<(f64, Vec<f64>)> = None;
            let mut offsets: Vec<([f64; 2], Vec<f64>)> = Vec::new();
            for (di, dj) in [(-1i64, 0i64), (1, 0), (0, -1), (0, 1)] {
                let (ni, nj) = (i as i64 + di, j as i64 + dj);
                if ni < 0 || nj < 0 || ni >= rows as i64 || nj >= cols as i64 {
                    continue;
                }
                let other = color_at(ni as usize, nj as usize);
                if other != own {
                    dir[0] += di as f64;
                    dir[1] += dj as f64;
                    offsets.push(([di as f64, dj as f64], other));
                }
            }
            if offsets.is_empty() {
                continue;
            }
            let norm = (dir[0] * dir[0] + dir[1] * dir[1]).sqrt();
            let nu = if norm > 1e-12 {
                [dir[0] / norm, dir[1] / norm]
            } else {
                // Opposing neighbors cancelled; fall back to the first one.
                offsets[0].0
            };
            for (off, color) in &offsets {
                let align = off[0] * nu[0] + off[1] * nu[1];
                if best.as_ref().map_or(true, |(a, _)| align > *a) {
                    best = Some((align, color.clone()));
                }
            }
            let (_, f_plus) = best.expect("nonempty offsets");
            jumps.push(GroundTruthJump {
                pixel: grid.index_of(&[i, j]),
                normal: Direction::new(&[nu[0], nu[1]])
                    .expect("unit by construction"),
                f_plus,
                f_minus: own,
            });
        }
    }
    jumps
}

fn apply_noise(field: &mut VectorField, noise: &Noise, channels: usize) -> Result<()> {
    match noise {
        Noise::None => Ok(()),
        Noise::Gaussian { sigma, seed } => {
            if !(sigma.is_finite() && *sigma >= 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "noise level must be nonnegative, got {sigma}"
                )));
            }
            let count = field.spec().pixel_count();
            for p in 0..count {
                let px = field.pixel_mut(p);
                for c in 0..channels {
                    px[c] += sigma * gaussian_at(*seed, (p * channels + c) as u64);
                }
            }
            Ok(())
        }
        Noise::Oscillation {
            amplitude,
            period_px,
        } => {
            if !(amplitude.is_finite() && *amplitude >= 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "oscillation amplitude must be nonnegative, got {amplitude}"
                )));
            }
            if *period_px == 0 || period_px % 2 != 0 {
                return Err(Error::InvalidArgument(format!(
                    "oscillation period must be a positive even pixel count, got {period_px}"
                )));
            }
            let spec = field.spec().clone();
            let half = period_px / 2;
            let count = spec.pixel_count();
            for p in 0..count {
                let idx = spec.multi_index(p);
                let mut parity = idx[0] / half;
                if spec.ndim() == 2 {
                    parity += idx[1] / half;
                }
                let sign = if parity % 2 == 0 { 1.0 } else { -1.0 };
                for v in field.pixel_mut(p) {
                    *v += sign * amplitude;
                }
            }
            Ok(())
        }
    }
}
