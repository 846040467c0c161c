//! Regular grids and the field types every other module works on.
//!
//! A [`GridSpec`] describes a 1-D or 2-D lattice of sample points with
//! uniform spacing `h`; point `(i0, i1)` sits at physical coordinates
//! `(i0 * h, i1 * h)`.  [`VectorField`] stores one n-vector per grid point,
//! [`MatrixField`] one n-by-m matrix per grid point (used for gradients and
//! dual variables).  Values between nodes are reached through clamped
//! multilinear interpolation, and [`halfcube_average`] computes means over
//! one-sided rotated cubes — the basic measurement used by the jump
//! detector.

use crate::{Error, Result};

/// Maximum supported grid dimension.
pub const MAX_NDIM: usize = 2;

/// Shape and spacing of a regular grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    dims: Vec<usize>,
    spacing: f64,
}

impl GridSpec {
    /// Creates a grid with the given per-axis sample counts and spacing.
    pub fn new(dims: &[usize], spacing: f64) -> Result<Self> {
        if dims.is_empty() || dims.len() > MAX_NDIM {
            return Err(Error::InvalidGrid(format!(
                "expected 1 or 2 axes, got {}",
                dims.len()
            )));
        }
        if dims.iter().any(|&d| d == 0) {
            return Err(Error::InvalidGrid("zero-length axis".into()));
        }
        if !(spacing.is_finite() && spacing > 0.0) {
            return Err(Error::InvalidGrid(format!("bad spacing {spacing}")));
        }
        Ok(Self {
            dims: dims.to_vec(),
            spacing,
        })
    }

    /// Number of axes (1 or 2).
    pub fn ndim(&self) -> usize {
        self.dims.len()
    }

    /// Sample count along `axis`.
    pub fn dim(&self, axis: usize) -> usize {
        self.dims[axis]
    }

    /// Per-axis sample counts.
    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    /// Grid spacing `h`.
    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Total number of grid points.
    pub fn pixel_count(&self) -> usize {
        self.dims.iter().product()
    }

    /// Physical length of `axis`: `(dim - 1) * h`.
    pub fn extent(&self, axis: usize) -> f64 {
        (self.dims[axis] - 1) as f64 * self.spacing
    }

    /// Volume element `h^m` used by all discrete integrals.
    pub fn cell_volume(&self) -> f64 {
        self.spacing.powi(self.ndim() as i32)
    }

    /// Linear index of a multi-index (row-major, axis 0 outermost).
    pub fn index_of(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.ndim());
        match self.dims.len() {
            1 => idx[0],
            _ => idx[0] * self.dims[1] + idx[1],
        }
    }

    /// Multi-index of a linear pixel index.
    pub fn multi_index(&self, pixel: usize) -> [usize; MAX_NDIM] {
        match self.dims.len() {
            1 => [pixel, 0],
            _ => [pixel / self.dims[1], pixel % self.dims[1]],
        }
    }

    /// Physical coordinates of a pixel, written into `out[..ndim]`.
    pub fn point(&self, pixel: usize, out: &mut [f64]) {
        let mi = self.multi_index(pixel);
        for a in 0..self.ndim() {
            out[a] = mi[a] as f64 * self.spacing;
        }
    }

    /// True if `x` lies inside the grid's bounding box (with a tiny slack
    /// proportional to `h` to absorb rounding in lattice constructions).
    pub fn contains_point(&self, x: &[f64]) -> bool {
        let tol = 1e-9 * self.spacing;
        (0..self.ndim()).all(|a| x[a] >= -tol && x[a] <= self.extent(a) + tol)
    }
}

/// A field of n-vectors on a grid, stored row-major with channels innermost.
#[derive(Debug, Clone)]
pub struct VectorField {
    spec: GridSpec,
    channels: usize,
    data: Vec<f64>,
}

impl VectorField {
    /// All-zero field with `channels` entries per grid point.
    pub fn zeros(spec: &GridSpec, channels: usize) -> Self {
        assert!(channels > 0, "channel count must be positive");
        Self {
            spec: spec.clone(),
            channels,
            data: vec![0.0; spec.pixel_count() * channels],
        }
    }

    /// Builds a field by evaluating `f(multi_index, out_pixel)` at every point.
    pub fn from_fn(
        spec: &GridSpec,
        channels: usize,
        mut f: impl FnMut(&[usize], &mut [f64]),
    ) -> Self {
        let mut field = Self::zeros(spec, channels);
        let ndim = spec.ndim();
        for p in 0..spec.pixel_count() {
            let mi = spec.multi_index(p);
            let start = p * channels;
            f(&mi[..ndim], &mut field.data[start..start + channels]);
        }
        field
    }

    /// Wraps raw data (length must be `pixel_count * channels`).
    pub fn from_data(spec: &GridSpec, channels: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != spec.pixel_count() * channels {
            return Err(Error::ShapeMismatch(format!(
                "field data has length {}, expected {}",
                data.len(),
                spec.pixel_count() * channels
            )));
        }
        Ok(Self {
            spec: spec.clone(),
            channels,
            data,
        })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Value of channel `c` at linear pixel `p`.
    pub fn get(&self, p: usize, c: usize) -> f64 {
        self.data[p * self.channels + c]
    }

    /// All channels at linear pixel `p`.
    pub fn pixel(&self, p: usize) -> &[f64] {
        let s = p * self.channels;
        &self.data[s..s + self.channels]
    }

    pub fn pixel_mut(&mut self, p: usize) -> &mut [f64] {
        let s = p * self.channels;
        &mut self.data[s..s + self.channels]
    }

    /// Componentwise `max |self - other|`.
    pub fn sup_distance(&self, other: &Self) -> f64 {
        assert_eq!(self.data.len(), other.data.len());
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// `(min, max)` over all pixels of channel `c`.
    pub fn channel_range(&self, c: usize) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for p in 0..self.spec.pixel_count() {
            let v = self.get(p, c);
            lo = lo.min(v);
            hi = hi.max(v);
        }
        (lo, hi)
    }

    /// Clamped multilinear interpolation at physical coordinates `x`,
    /// written into `out` (one value per channel).
    ///
    /// Coordinates outside the bounding box are clamped to the boundary, so
    /// the result is always a convex combination of stored node values.
    /// Exactly at a node the stored values are returned unchanged.
    pub fn sample_at(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        let ndim = self.spec.ndim();
        debug_assert_eq!(x.len(), ndim);
        debug_assert_eq!(out.len(), self.channels);
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("sample coordinates {x:?}")));
        }
        let mut base = [0usize; MAX_NDIM];
        let mut frac = [0.0f64; MAX_NDIM];
        for a in 0..ndim {
            let d = self.spec.dim(a);
            let mut u = x[a] / self.spec.spacing();
            u = u.clamp(0.0, (d - 1) as f64);
            let mut i = u.floor() as usize;
            if i + 1 >= d {
                i = d.saturating_sub(2).min(i);
            }
            let mut t = if d == 1 { 0.0 } else { u - i as f64 };
            // Snap to the node when rounding noise in `x / h` leaves a
            // vanishing fractional part, so node queries are exact.
            if t < 1e-9 {
                t = 0.0;
            } else if t > 1.0 - 1e-9 {
                t = 1.0;
            }
            base[a] = i;
            frac[a] = t;
        }
        out.fill(0.0);
        match ndim {
            1 => {
                let d = self.spec.dim(0);
                let i = base[0];
                let t = frac[0];
                let j = (i + 1).min(d - 1);
                let a = self.pixel(i);
                let b = self.pixel(j);
                for c in 0..self.channels {
                    out[c] = (1.0 - t) * a[c] + t * b[c];
                }
            }
            _ => {
                let (d0, d1) = (self.spec.dim(0), self.spec.dim(1));
                let (i, j) = (base[0], base[1]);
                let (s, t) = (frac[0], frac[1]);
                let i1 = (i + 1).min(d0 - 1);
                let j1 = (j + 1).min(d1 - 1);
                let w00 = (1.0 - s) * (1.0 - t);
                let w01 = (1.0 - s) * t;
                let w10 = s * (1.0 - t);
                let w11 = s * t;
                let p00 = self.pixel(i * d1 + j);
                let p01 = self.pixel(i * d1 + j1);
                let p10 = self.pixel(i1 * d1 + j);
                let p11 = self.pixel(i1 * d1 + j1);
                for c in 0..self.channels {
                    out[c] = w00 * p00[c] + w01 * p01[c] + w10 * p10[c] + w11 * p11[c];
                }
            }
        }
        Ok(())
    }

    /// Allocating convenience wrapper around [`Self::sample_at`].
    pub fn sample(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.channels];
        self.sample_at(x, &mut out)?;
        Ok(out)
    }
}

/// A field of n-by-m matrices on a grid (row-major per pixel).
#[derive(Debug, Clone)]
pub struct MatrixField {
    spec: GridSpec,
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl MatrixField {
    pub fn zeros(spec: &GridSpec, rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix shape must be positive");
        Self {
            spec: spec.clone(),
            rows,
            cols,
            data: vec![0.0; spec.pixel_count() * rows * cols],
        }
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Entries per pixel (`rows * cols`).
    pub fn entry_count(&self) -> usize {
        self.rows * self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// The n-by-m matrix at pixel `p` as a row-major slice.
    pub fn pixel(&self, p: usize) -> &[f64] {
        let k = self.entry_count();
        &self.data[p * k..(p + 1) * k]
    }

    pub fn pixel_mut(&mut self, p: usize) -> &mut [f64] {
        let k = self.entry_count();
        &mut self.data[p * k..(p + 1) * k]
    }
}

/// A unit direction in the grid's physical space.
#[derive(Debug, Clone, PartialEq)]
pub struct Direction {
    nu: Vec<f64>,
}

impl Direction {
    /// Unit-norm tolerance enforced by the constructor.
    pub const UNIT_TOL: f64 = 1e-12;

    /// Wraps a vector that is already unit length (to within 1e-12).
    pub fn new(nu: &[f64]) -> Result<Self> {
        if nu.is_empty() || nu.len() > MAX_NDIM {
            return Err(Error::InvalidArgument(format!(
                "direction must have 1 or 2 components, got {}",
                nu.len()
            )));
        }
        if nu.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("direction components".into()));
        }
        let norm = nu.iter().map(|v| v * v).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > Self::UNIT_TOL {
            return Err(Error::InvalidArgument(format!(
                "direction norm {norm} is not 1"
            )));
        }
        Ok(Self { nu: nu.to_vec() })
    }

    /// Normalizes an arbitrary nonzero vector.
    pub fn normalized(v: &[f64]) -> Result<Self> {
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::InvalidArgument("cannot normalize zero vector".into()));
        }
        let nu: Vec<f64> = v.iter().map(|x| x / norm).collect();
        Self::new(&nu)
    }

    /// 2-D direction at angle `theta` from the first axis.
    pub fn from_angle(theta: f64) -> Self {
        Self {
            nu: vec![theta.cos(), theta.sin()],
        }
    }

    /// `count` directions equally spaced over the half-circle `[0, pi)`.
    ///
    /// Opposite directions probe the same line with swapped sides, so the
    /// half-circle covers all orientations.
    pub fn circle(count: usize) -> Vec<Self> {
        (0..count)
            .map(|k| Self::from_angle(std::f64::consts::PI * k as f64 / count as f64))
            .collect()
    }

    pub fn ndim(&self) -> usize {
        self.nu.len()
    }

    pub fn components(&self) -> &[f64] {
        &self.nu
    }

    /// The opposite direction `-nu`.
    pub fn flipped(&self) -> Self {
        Self {
            nu: self.nu.iter().map(|v| -v).collect(),
        }
    }

    /// The (2-D) unit vector orthogonal to `nu`, rotated +90 degrees.
    pub fn perp(&self) -> Option<[f64; 2]> {
        if self.nu.len() == 2 {
            Some([-self.nu[1], self.nu[0]])
        } else {
            None
        }
    }
}

/// Which side of the hyperplane through `x0` normal to `nu` to average over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CubeSide {
    /// Offsets along `+nu` in `(0, tau]`.
    Plus,
    /// Offsets along `-nu` in `[-tau, 0)`.
    Minus,
}

/// Deterministic sampling lattice for one half of the rotated cube
/// `Q_tau(x0, nu)`: `ceil(tau/h)` midpoint offsets per axis.
///
/// The minus-side lattice shifted by `tau * nu` reproduces the plus-side
/// lattice exactly, which keeps difference-based estimates consistent.
pub(crate) fn halfcube_lattice(
    spec: &GridSpec,
    x0: &[f64],
    nu: &Direction,
    tau: f64,
    side: CubeSide,
) -> Result<Vec<[f64; MAX_NDIM]>> {
    let ndim = spec.ndim();
    if nu.ndim() != ndim || x0.len() != ndim {
        return Err(Error::ShapeMismatch(
            "direction/point dimension does not match grid".into(),
        ));
    }
    let h = spec.spacing();
    if !(tau.is_finite() && tau >= 2.0 * h) {
        return Err(Error::InvalidArgument(format!(
            "cube size tau = {tau} must be at least 2h = {}",
            2.0 * h
        )));
    }
    let k = (tau / h).ceil() as usize;
    let sign = match side {
        CubeSide::Plus => 1.0,
        CubeSide::Minus => -1.0,
    };
    let n = nu.components();
    let mut points = Vec::with_capacity(k * if ndim == 2 { k } else { 1 });
    for j in 0..k {
        let s = sign * (j as f64 + 0.5) * tau / k as f64;
        match ndim {
            1 => {
                points.push([x0[0] + s * n[0], 0.0]);
            }
            _ => {
                let perp = nu.perp().expect("2-D direction");
                for i in 0..k {
                    let t = -tau + (i as f64 + 0.5) * 2.0 * tau / k as f64;
                    points.push([
                        x0[0] + s * n[0] + t * perp[0],
                        x0[1] + s * n[1] + t * perp[1],
                    ]);
                }
            }
        }
    }
    for pt in &points {
        if !spec.contains_point(&pt[..ndim]) {
            return Err(Error::CubeOutOfDomain(format!(
                "lattice point {:?} outside grid extents",
                &pt[..ndim]
            )));
        }
    }
    Ok(points)
}

/// Mean of `w` over the half-cube of size `tau` at `x0`, on the given side
/// of the hyperplane normal to `nu`, using interpolated lattice samples.
///
/// # Errors
///
/// Fails with [`Error::CubeOutOfDomain`] if any lattice point leaves the
/// grid, and with [`Error::InvalidArgument`] when `tau < 2h`.
pub fn halfcube_average(
    w: &VectorField,
    x0: &[f64],
    nu: &Direction,
    tau: f64,
    side: CubeSide,
) -> Result<Vec<f64>> {
    let points = halfcube_lattice(w.spec(), x0, nu, tau, side)?;
    let ndim = w.spec().ndim();
    let mut acc = vec![0.0; w.channels()];
    let mut buf = vec![0.0; w.channels()];
    for pt in &points {
        w.sample_at(&pt[..ndim], &mut buf)?;
        for (a, b) in acc.iter_mut().zip(&buf) {
            *a += *b;
        }
    }
    let inv = 1.0 / points.len() as f64;
    for a in &mut acc {
        *a *= inv;
    }
    Ok(acc)
}

/// Mean of `w` and mean squared deviation `mean |w - mean|^2` over the full
/// cube (both half-cube lattices combined).
pub fn cube_mean_and_variance(
    w: &VectorField,
    x0: &[f64],
    nu: &Direction,
    tau: f64,
) -> Result<(Vec<f64>, f64)> {
    let mut points = halfcube_lattice(w.spec(), x0, nu, tau, CubeSide::Minus)?;
    points.extend(halfcube_lattice(w.spec(), x0, nu, tau, CubeSide::Plus)?);
    let ndim = w.spec().ndim();
    let mut samples = Vec::with_capacity(points.len());
    let mut buf = vec![0.0; w.channels()];
    let mut mean = vec![0.0; w.channels()];
    for pt in &points {
        w.sample_at(&pt[..ndim], &mut buf)?;
        for (m, b) in mean.iter_mut().zip(&buf) {
            *m += *b;
        }
        samples.push(buf.clone());
    }
    let inv = 1.0 / points.len() as f64;
    for m in &mut mean {
        *m *= inv;
    }
    let mut var = 0.0;
    for s in &samples {
        var += s
            .iter()
            .zip(&mean)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>();
    }
    var *= inv;
    Ok((mean, var))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid1(n: usize, h: f64) -> GridSpec {
        GridSpec::new(&[n], h).unwrap()
    }

    fn grid2(n0: usize, n1: usize, h: f64) -> GridSpec {
        GridSpec::new(&[n0, n1], h).unwrap()
    }

    #[test]
    fn indexing_round_trips() {
        let spec = grid2(5, 7, 0.5);
        for p in 0..spec.pixel_count() {
            let mi = spec.multi_index(p);
            assert_eq!(spec.index_of(&mi[..2]), p);
        }
    }

    #[test]
    fn sampling_is_exact_at_nodes() {
        let spec = grid2(9, 11, 0.1);
        let w = VectorField::from_fn(&spec, 2, |mi, out| {
            out[0] = (mi[0] * 13 + mi[1]) as f64;
            out[1] = -(mi[1] as f64);
        });
        let mut out = [0.0; 2];
        for p in 0..spec.pixel_count() {
            let mut x = [0.0; 2];
            spec.point(p, &mut x);
            w.sample_at(&x, &mut out).unwrap();
            assert_eq!(out[0], w.get(p, 0));
            assert_eq!(out[1], w.get(p, 1));
        }
    }

    #[test]
    fn sampling_clamps_outside_the_box() {
        let spec = grid1(4, 1.0);
        let w = VectorField::from_fn(&spec, 1, |mi, out| out[0] = mi[0] as f64);
        assert_eq!(w.sample(&[-3.0]).unwrap()[0], 0.0);
        assert_eq!(w.sample(&[99.0]).unwrap()[0], 3.0);
    }

    #[test]
    fn sampling_interpolates_linear_fields_exactly() {
        let spec = grid2(16, 16, 0.25);
        let w = VectorField::from_fn(&spec, 1, |mi, out| {
            out[0] = 2.0 * (mi[0] as f64 * 0.25) - 0.5 * (mi[1] as f64 * 0.25) + 1.0;
        });
        for &(x, y) in &[(0.3, 0.7), (1.11, 2.9), (3.0, 0.01)] {
            let v = w.sample(&[x, y]).unwrap()[0];
            assert!((v - (2.0 * x - 0.5 * y + 1.0)).abs() < 1e-12, "got {v}");
        }
    }

    #[test]
    fn sampling_rejects_non_finite_coordinates() {
        let spec = grid1(4, 1.0);
        let w = VectorField::zeros(&spec, 1);
        assert!(matches!(
            w.sample(&[f64::NAN]),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn direction_must_be_unit() {
        assert!(Direction::new(&[0.5, 0.5]).is_err());
        let d = Direction::new(&[0.6, 0.8]).unwrap();
        let f = d.flipped();
        assert_eq!(f.components(), &[-0.6, -0.8]);
        for d in Direction::circle(16) {
            let n: f64 = d.components().iter().map(|v| v * v).sum();
            assert!((n - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn halfcube_average_of_constant_is_constant() {
        let spec = grid2(33, 33, 1.0 / 32.0);
        let w = VectorField::from_fn(&spec, 3, |_, out| {
            out.copy_from_slice(&[0.25, -1.5, 7.0]);
        });
        let nu = Direction::from_angle(0.7);
        let avg = halfcube_average(&w, &[0.5, 0.5], &nu, 0.2, CubeSide::Plus).unwrap();
        for (a, b) in avg.iter().zip(&[0.25, -1.5, 7.0]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn halfcube_average_sees_one_side_of_a_step() {
        // f = 1 where x0 >= 0.5, else 0; averaging the minus side along the
        // first axis should recover the low level up to a boundary layer.
        let h = 1.0 / 64.0;
        let spec = grid2(65, 65, h);
        let w = VectorField::from_fn(&spec, 1, |mi, out| {
            out[0] = if mi[0] as f64 * h >= 0.5 { 1.0 } else { 0.0 };
        });
        let nu = Direction::new(&[1.0, 0.0]).unwrap();
        let tau = 8.0 * h;
        let avg = halfcube_average(&w, &[0.5, 0.5], &nu, tau, CubeSide::Minus).unwrap();
        // One interpolation layer of thickness h can contaminate the mean.
        assert!(avg[0] <= 1.5 * (1.0 / 8.0), "avg = {}", avg[0]);
        let avg_plus = halfcube_average(&w, &[0.5, 0.5], &nu, tau, CubeSide::Plus).unwrap();
        assert!(avg_plus[0] >= 1.0 - 1.5 * (1.0 / 8.0));
    }

    #[test]
    fn halfcube_average_of_oscillation_is_small() {
        // f(x) = sin(2 pi x / p) with tau >> p averages to nearly zero; the
        // exact mean over [x0, x0 + tau] is p/(2 pi tau) * (cos a - cos b).
        let h = 1.0 / 512.0;
        let spec = grid1(513, h);
        let period = 16.0 * h;
        let omega = 2.0 * std::f64::consts::PI / period;
        let w = VectorField::from_fn(&spec, 1, |mi, out| {
            out[0] = (omega * mi[0] as f64 * h).sin();
        });
        let x0 = 0.25;
        let tau = 0.5;
        let nu = Direction::new(&[1.0]).unwrap();
        let avg = halfcube_average(&w, &[x0], &nu, tau, CubeSide::Plus).unwrap()[0];
        assert!(avg.abs() <= period / tau, "avg = {avg}");
        // Independent check: closed-form mean of the continuum sine.
        let exact = ((omega * x0).cos() - (omega * (x0 + tau)).cos()) / (omega * tau);
        assert!(
            (avg - exact).abs() < 5e-3,
            "avg = {avg}, exact = {exact}"
        );
    }

    #[test]
    fn halfcube_average_is_linear_in_the_data() {
        let spec = grid2(33, 33, 1.0 / 32.0);
        let mut state = 0x9E3779B97F4A7C15u64;
        let mut rnd = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1);
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let a = VectorField::from_fn(&spec, 2, |_, out| {
            out[0] = rnd();
            out[1] = rnd();
        });
        let b = VectorField::from_fn(&spec, 2, |_, out| {
            out[0] = rnd();
            out[1] = rnd();
        });
        let combo = VectorField::from_data(
            &spec,
            2,
            a.data()
                .iter()
                .zip(b.data())
                .map(|(x, y)| 2.5 * x - 0.75 * y)
                .collect(),
        )
        .unwrap();
        let nu = Direction::from_angle(1.1);
        let args = (&[0.4, 0.55][..], &nu, 0.25, CubeSide::Minus);
        let va = halfcube_average(&a, args.0, args.1, args.2, args.3).unwrap();
        let vb = halfcube_average(&b, args.0, args.1, args.2, args.3).unwrap();
        let vc = halfcube_average(&combo, args.0, args.1, args.2, args.3).unwrap();
        for c in 0..2 {
            assert!((vc[c] - (2.5 * va[c] - 0.75 * vb[c])).abs() < 1e-12);
        }
    }

    #[test]
    fn halfcube_average_rejects_cubes_leaving_the_grid() {
        let spec = grid2(33, 33, 1.0 / 32.0);
        let w = VectorField::zeros(&spec, 1);
        let nu = Direction::new(&[1.0, 0.0]).unwrap();
        let res = halfcube_average(&w, &[0.05, 0.5], &nu, 0.2, CubeSide::Minus);
        assert!(matches!(res, Err(Error::CubeOutOfDomain(_))));
        // tau below 2h is rejected outright.
        let res = halfcube_average(&w, &[0.5, 0.5], &nu, 0.03, CubeSide::Plus);
        assert!(matches!(res, Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn halfcube_average_is_nonexpansive_in_sup_norm() {
        let spec = grid2(17, 17, 0.125);
        let mut k = 0u64;
        let w = VectorField::from_fn(&spec, 1, |_, out| {
            k += 1;
            out[0] = ((k * 2654435761) % 1000) as f64 / 500.0 - 1.0;
        });
        let nu = Direction::from_angle(0.3);
        let avg = halfcube_average(&w, &[1.0, 1.0], &nu, 0.5, CubeSide::Plus).unwrap()[0];
        let sup = w.data().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(avg.abs() <= sup + 1e-12);
    }
}
