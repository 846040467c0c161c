//! Jump detection and one-sided edge diagnostics.
//!
//! The central estimator measures, at a point and unit direction, the
//! root-mean-square difference of field values across the hyperplane
//! through that point: it samples pairs `(x, x + tau*nu)` with `x` running
//! over the minus half of the rotated cube `Q_tau(x0, nu)` and keeps the
//! best cube size from a dyadic list.  A constant field scores zero, a
//! clean step of height `d` scores `|d|` up to a boundary-layer factor,
//! and the score scales exactly with the field.
//!
//! On top of the estimator sit a grid-wide detector with non-maximum
//! suppression along the best direction, one-sided edge profiles built
//! from half-cube averages at a standoff from the candidate edge, and the
//! comparisons a denoised image should satisfy against its data: the
//! quadratic-form edge inequality, a spectral magnitude bound, set
//! inclusion of detected edges up to dilation, and the one-dimensional
//! midpoint property.

use crate::fidelity::Fidelity;
use crate::grid::{
    halfcube_average, halfcube_lattice, CubeSide, Direction, VectorField, MAX_NDIM,
};
use crate::solver::ops::{check_same_shape, PAR_MIN_PIXELS};
use crate::{Error, Result};
use rayon::prelude::*;

/// Default number of half-circle probe directions in two dimensions.
pub const DEFAULT_DIRECTION_COUNT: usize = 16;

/// Default edge-profile standoff, in units of the grid spacing.
pub const DEFAULT_PROFILE_OFFSET_FACTOR: f64 = 3.0;

/// Probe directions covering `[0, pi)`: the single axis direction in one
/// dimension, [`DEFAULT_DIRECTION_COUNT`] equispaced angles in two.
pub fn default_directions(ndim: usize) -> Vec<Direction> {
    if ndim == 1 {
        vec![Direction::new(&[1.0]).expect("unit vector")]
    } else {
        Direction::circle(DEFAULT_DIRECTION_COUNT)
    }
}

/// Default dyadic cube sizes `{16h, 8h, 4h}` for grid spacing `h`.
pub fn default_tau_list(spacing: f64) -> Vec<f64> {
    vec![16.0 * spacing, 8.0 * spacing, 4.0 * spacing]
}

/// Default detection threshold: a tenth of the largest channel range.
pub fn default_threshold(f: &VectorField) -> f64 {
    let mut range = 0.0f64;
    for c in 0..f.channels() {
        let (lo, hi) = f.channel_range(c);
        range = range.max(hi - lo);
    }
    0.1 * range
}

/// Jump score of a field at one point.
///
/// `j_value` is the largest per-direction score, and `nu_best` the
/// direction attaining it (on exact ties, the first one in the order the
/// directions were given).  Directions whose sampling cubes leave the
/// domain at every cube size are listed in `skipped` instead of scored.
#[derive(Debug, Clone)]
pub struct JumpEstimate {
    /// Point the estimate was taken at.
    pub x0: Vec<f64>,
    /// Direction attaining `j_value`.
    pub nu_best: Direction,
    /// Largest directional score; finite and nonnegative.
    pub j_value: f64,
    /// Every scored direction with its score.
    pub per_direction: Vec<(Direction, f64)>,
    /// Cube sizes the scores were maximized over.
    pub tau_used: Vec<f64>,
    /// Directions dropped because no cube size fits inside the domain.
    pub skipped: Vec<Direction>,
}

fn require_finite_data(w: &VectorField, label: &str) -> Result<()> {
    if w.data().iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(format!(
            "{label} contains non-finite samples"
        )))
    }
}

fn check_probe_args(
    f: &VectorField,
    directions: &[Direction],
    tau_list: &[f64],
) -> Result<()> {
    let ndim = f.spec().ndim();
    if directions.is_empty() {
        return Err(Error::InvalidArgument(
            "at least one probe direction is required".into(),
        ));
    }
    if ndim == 2 && directions.len() < 8 {
        return Err(Error::InvalidArgument(format!(
            "two-dimensional probing needs at least 8 directions, got {}",
            directions.len()
        )));
    }
    for nu in directions {
        if nu.ndim() != ndim {
            return Err(Error::ShapeMismatch(format!(
                "direction dimension {} does not match the {}-D grid",
                nu.ndim(),
                ndim
            )));
        }
    }
    let h = f.spec().spacing();
    if tau_list.is_empty() {
        return Err(Error::InvalidArgument(
            "at least one cube size is required".into(),
        ));
    }
    for &tau in tau_list {
        if !(tau.is_finite() && tau >= 2.0 * h) {
            return Err(Error::InvalidArgument(format!(
                "cube size {tau} must be finite and at least 2h = {}",
                2.0 * h
            )));
        }
    }
    Ok(())
}

/// Mean over the minus half-cube of the channel-summed squared difference
/// across the separating hyperplane.  The shifted sample `x + tau*nu` of a
/// minus-lattice point lands on the plus-side lattice, so both halves of
/// the cube are visited by the pairs exactly once.
fn mean_squared_difference(
    f: &VectorField,
    x0: &[f64],
    nu: &Direction,
    tau: f64,
) -> Result<f64> {
    let spec = f.spec();
    let ndim = spec.ndim();
    let points = halfcube_lattice(spec, x0, nu, tau, CubeSide::Minus)?;
    let n = nu.components();
    let m = f.channels();
    let mut near = vec![0.0; m];
    let mut far = vec![0.0; m];
    let mut acc = 0.0;
    for pt in &points {
        let mut shifted = [0.0; MAX_NDIM];
        for a in 0..ndim {
            shifted[a] = pt[a] + tau * n[a];
        }
        if !spec.contains_point(&shifted[..ndim]) {
            return Err(Error::CubeOutOfDomain(format!(
                "shifted lattice point {:?} outside grid extents",
                &shifted[..ndim]
            )));
        }
        f.sample_at(&pt[..ndim], &mut near)?;
        f.sample_at(&shifted[..ndim], &mut far)?;
        acc += (0..m).map(|c| (far[c] - near[c]) * (far[c] - near[c])).sum::<f64>();
    }
    Ok(acc / points.len() as f64)
}

fn estimate_inner(
    f: &VectorField,
    x0: &[f64],
    directions: &[Direction],
    tau_list: &[f64],
) -> Result<JumpEstimate> {
    let ndim = f.spec().ndim();
    if x0.len() != ndim {
        return Err(Error::ShapeMismatch(format!(
            "point has {} coordinates on a {}-D grid",
            x0.len(),
            ndim
        )));
    }
    if !x0.iter().all(|v| v.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "probe point {x0:?} has non-finite coordinates"
        )));
    }
    let mut per_direction = Vec::with_capacity(directions.len());
    let mut skipped = Vec::new();
    for nu in directions {
        let mut best: Option<f64> = None;
        for &tau in tau_list {
            match mean_squared_difference(f, x0, nu, tau) {
                Ok(v) => best = Some(best.map_or(v, |b| b.max(v))),
                Err(Error::CubeOutOfDomain(_)) => continue,
                Err(e) => return Err(e),
            }
        }
        match best {
            Some(v) => per_direction.push((nu.clone(), v.max(0.0).sqrt())),
            None => skipped.push(nu.clone()),
        }
    }
    if per_direction.is_empty() {
        return Err(Error::CubeOutOfDomain(format!(
            "no sampling cube fits inside the domain at {x0:?}"
        )));
    }
    let mut nu_best = per_direction[0].0.clone();
    let mut j_value = per_direction[0].1;
    for (nu, j) in per_direction.iter().skip(1) {
        if *j > j_value {
            j_value = *j;
            nu_best = nu.clone();
        }
    }
    Ok(JumpEstimate {
        x0: x0.to_vec(),
        nu_best,
        j_value,
        per_direction,
        tau_used: tau_list.to_vec(),
        skipped,
    })
}

/// Directional jump score of `f` at the point `x0`.
///
/// For each direction the score is the square root of the largest, over
/// the cube sizes in `tau_list`, mean channel-summed squared difference
/// between paired samples on the two sides of the hyperplane through
/// `x0`.  Cube sizes whose sampling lattice leaves the domain are skipped
/// for that direction; a direction with no admissible cube size is
/// recorded in [`JumpEstimate::skipped`].
///
/// # Errors
///
/// Rejects empty or undersized direction lists (two-dimensional grids
/// need at least 8), cube sizes below `2h`, mismatched dimensions,
/// non-finite probe points or samples, and points where every direction's
/// cube leaves the domain.
pub fn estimate_jump_function(
    f: &VectorField,
    x0: &[f64],
    directions: &[Direction],
    tau_list: &[f64],
) -> Result<JumpEstimate> {
    check_probe_args(f, directions, tau_list)?;
    require_finite_data(f, "field")?;
    estimate_inner(f, x0, directions, tau_list)
}

/// Scores every pixel of `u`, keeps those at or above `threshold`, and
/// suppresses non-maxima: a candidate is dropped when a pixel within two
/// rounded steps along its best direction scores strictly higher, or ties
/// and has the smaller linear index.  The survivors are returned in pixel
/// order.
///
/// Pixel scores are computed independently (in parallel on large grids);
/// the suppression sweep is sequential, so the result is deterministic.
///
/// # Errors
///
/// Rejects the same argument problems as [`estimate_jump_function`] plus
/// non-positive thresholds.  Pixels where no cube fits (a boundary margin
/// of roughly the largest cube size) are silently excluded.
pub fn detect_jump_set(
    u: &VectorField,
    threshold: f64,
    tau_list: &[f64],
    directions: &[Direction],
) -> Result<Vec<JumpEstimate>> {
    check_probe_args(u, directions, tau_list)?;
    require_finite_data(u, "field")?;
    if !(threshold.is_finite() && threshold > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "detection threshold must be positive, got {threshold}"
        )));
    }
    let spec = u.spec();
    let ndim = spec.ndim();
    let pixels = spec.pixel_count();
    let score = |p: usize| -> Result<Option<JumpEstimate>> {
        let mut x0 = [0.0; MAX_NDIM];
        spec.point(p, &mut x0);
        match estimate_inner(u, &x0[..ndim], directions, tau_list) {
            Ok(est) => Ok(Some(est)),
            Err(Error::CubeOutOfDomain(_)) => Ok(None),
            Err(e) => Err(e),
        }
    };
    let dense: Vec<Option<JumpEstimate>> = if pixels < PAR_MIN_PIXELS {
        (0..pixels).map(score).collect::<Result<_>>()?
    } else {
        (0..pixels)
            .into_par_iter()
            .map(score)
            .collect::<Result<_>>()?
    };
    let mut kept = Vec::new();
    'candidates: for p in 0..pixels {
        let Some(est) = dense[p].as_ref() else {
            continue;
        };
        if est.j_value < threshold {
            continue;
        }
        let mi = spec.multi_index(p);
        let n = est.nu_best.components();
        for step in [-2i64, -1, 1, 2] {
            let mut nb = [0usize; MAX_NDIM];
            let mut inside = true;
            for a in 0..ndim {
                let moved = mi[a] as i64 + (step as f64 * n[a]).round() as i64;
                if moved < 0 || moved >= spec.dim(a) as i64 {
                    inside = false;
                    break;
                }
                nb[a] = moved as usize;
            }
            if !inside {
                continue;
            }
            let q = spec.index_of(&nb[..ndim]);
            if q == p {
                continue;
            }
            if let Some(other) = dense[q].as_ref() {
                if other.j_value > est.j_value
                    || (other.j_value == est.j_value && q < p)
                {
                    continue 'candidates;
                }
            }
        }
        kept.push(est.clone());
    }
    Ok(kept)
}

/// One-sided description of a candidate edge: half-cube averages of the
/// denoised field and the data at a standoff on both sides, the averaged
/// Hessian of the fidelity between the two residual vectors, and the two
/// quadratic forms it induces on the edge vectors.
///
/// Flipping the direction swaps the plus and minus pairs and leaves `lhs`
/// and `rhs` unchanged.
#[derive(Debug, Clone)]
pub struct EdgeProfile {
    /// Center of the profiled edge.
    pub x0: Vec<f64>,
    /// Direction the one-sided averages are taken along.
    pub nu: Direction,
    /// Half-cube average of the denoised field on the plus side.
    pub u_plus: Vec<f64>,
    /// Half-cube average of the denoised field on the minus side.
    pub u_minus: Vec<f64>,
    /// Half-cube average of the data on the plus side.
    pub f_plus: Vec<f64>,
    /// Half-cube average of the data on the minus side.
    pub f_minus: Vec<f64>,
    /// Averaged fidelity Hessian between the one-sided residuals,
    /// row-major `n x n`; symmetric positive semidefinite.
    pub a_matrix: Vec<f64>,
    /// `(u_plus - u_minus) . A (u_plus - u_minus)`.
    pub lhs: f64,
    /// `(f_plus - f_minus) . A (u_plus - u_minus)`.
    pub rhs: f64,
}

/// Builds the one-sided edge profile of `u` against its data `f` at `x0`.
///
/// Averages are taken over half-cubes of size `offset` centered at
/// `x0 +/- offset*nu`, i.e. over the bands between `offset` and
/// `2*offset` from the edge, keeping a standoff of `offset` on each side.
/// The matrix is the fidelity's averaged Hessian at the two one-sided
/// residuals `u - f`.
///
/// # Errors
///
/// Rejects mismatched shapes, non-finite centers, offsets below `2h`, and
/// half-cubes that leave the domain.
pub fn edge_profile(
    u: &VectorField,
    f: &VectorField,
    x0: &[f64],
    nu: &Direction,
    phi: &Fidelity,
    offset: f64,
) -> Result<EdgeProfile> {
    check_same_shape(u, f)?;
    let spec = u.spec();
    let ndim = spec.ndim();
    if x0.len() != ndim || nu.ndim() != ndim {
        return Err(Error::ShapeMismatch(format!(
            "point/direction dimensions ({}, {}) do not match the {}-D grid",
            x0.len(),
            nu.ndim(),
            ndim
        )));
    }
    if !x0.iter().all(|v| v.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "profile center {x0:?} has non-finite coordinates"
        )));
    }
    let h = spec.spacing();
    if !(offset.is_finite() && offset >= 2.0 * h) {
        return Err(Error::InvalidArgument(format!(
            "profile standoff {offset} must be finite and at least 2h = {}",
            2.0 * h
        )));
    }
    let n = nu.components();
    let mut plus_center = [0.0; MAX_NDIM];
    let mut minus_center = [0.0; MAX_NDIM];
    for a in 0..ndim {
        plus_center[a] = x0[a] + offset * n[a];
        minus_center[a] = x0[a] - offset * n[a];
    }
    let u_plus = halfcube_average(u, &plus_center[..ndim], nu, offset, CubeSide::Plus)?;
    let u_minus = halfcube_average(u, &minus_center[..ndim], nu, offset, CubeSide::Minus)?;
    let f_plus = halfcube_average(f, &plus_center[..ndim], nu, offset, CubeSide::Plus)?;
    let f_minus = halfcube_average(f, &minus_center[..ndim], nu, offset, CubeSide::Minus)?;
    let nch = u.channels();
    let res_minus: Vec<f64> = (0..nch).map(|c| u_minus[c] - f_minus[c]).collect();
    let res_plus: Vec<f64> = (0..nch).map(|c| u_plus[c] - f_plus[c]).collect();
    let a_matrix = phi.averaged_hessian(&res_minus, &res_plus);
    let du: Vec<f64> = (0..nch).map(|c| u_plus[c] - u_minus[c]).collect();
    let df: Vec<f64> = (0..nch).map(|c| f_plus[c] - f_minus[c]).collect();
    let mut a_du = vec![0.0; nch];
    for i in 0..nch {
        a_du[i] = (0..nch).map(|j| a_matrix[i * nch + j] * du[j]).sum();
    }
    let lhs = (0..nch).map(|i| du[i] * a_du[i]).sum();
    let rhs = (0..nch).map(|i| df[i] * a_du[i]).sum();
    Ok(EdgeProfile {
        x0: x0.to_vec(),
        nu: nu.clone(),
        u_plus,
        u_minus,
        f_plus,
        f_minus,
        a_matrix,
        lhs,
        rhs,
    })
}

/// Outcome of checking a batch of edge profiles.
#[derive(Debug, Clone)]
pub struct MainInequalityReport {
    /// Number of profiles examined.
    pub total: usize,
    /// Profiles with `lhs <= rhs + slack`.
    pub passes: usize,
    /// Largest `lhs - rhs` over the batch (`0` when empty).
    pub worst_residual: f64,
    /// Whether the magnitude bound applies (fidelity convexity modulus
    /// strictly positive).
    pub magnitude_applicable: bool,
    /// Profiles with `|u_plus - u_minus| <= sqrt(L/l) |f_plus - f_minus|
    /// + slack`; zero when the bound does not apply.
    pub magnitude_passes: usize,
    /// Largest magnitude excess over the batch (`0` when empty or not
    /// applicable).
    pub worst_magnitude_excess: f64,
    /// True when every applicable check passed on every profile.
    pub all_pass: bool,
}

/// Checks every profile's quadratic-form inequality `lhs <= rhs + slack`
/// and, when the fidelity is strongly convex, the edge magnitude bound
/// `|u_plus - u_minus| <= sqrt(L/l) |f_plus - f_minus| + slack` with
/// `(l, L)` the fidelity's convexity and smoothness moduli.
pub fn verify_main_inequality(
    profiles: &[EdgeProfile],
    phi: &Fidelity,
    slack: f64,
) -> MainInequalityReport {
    let (lambda, big_lambda) = phi.moduli();
    let magnitude_applicable = lambda > 0.0;
    let ratio = if magnitude_applicable {
        (big_lambda / lambda).sqrt()
    } else {
        0.0
    };
    let mut passes = 0;
    let mut worst_residual = f64::NEG_INFINITY;
    let mut magnitude_passes = 0;
    let mut worst_magnitude_excess = f64::NEG_INFINITY;
    for profile in profiles {
        let residual = profile.lhs - profile.rhs;
        worst_residual = worst_residual.max(residual);
        if residual <= slack {
            passes += 1;
        }
        if magnitude_applicable {
            let nch = profile.u_plus.len();
            let du = (0..nch)
                .map(|c| (profile.u_plus[c] - profile.u_minus[c]).powi(2))
                .sum::<f64>()
                .sqrt();
            let df = (0..nch)
                .map(|c| (profile.f_plus[c] - profile.f_minus[c]).powi(2))
                .sum::<f64>()
                .sqrt();
            let excess = du - ratio * df;
            worst_magnitude_excess = worst_magnitude_excess.max(excess);
            if excess <= slack {
                magnitude_passes += 1;
            }
        }
    }
    if profiles.is_empty() {
        worst_residual = 0.0;
    }
    if profiles.is_empty() || !magnitude_applicable {
        worst_magnitude_excess = 0.0;
    }
    let all_pass = passes == profiles.len()
        && (!magnitude_applicable || magnitude_passes == profiles.len());
    MainInequalityReport {
        total: profiles.len(),
        passes,
        worst_residual,
        magnitude_applicable,
        magnitude_passes,
        worst_magnitude_excess,
        all_pass,
    }
}

/// Fraction of the first jump set covered by the second after dilating it
/// by `dilation_px` pixels in the Chebyshev metric.  An empty first set is
/// fully covered by convention.  `spacing` converts the stored physical
/// coordinates back to pixel distances.
pub fn verify_inclusion(
    j_u: &[JumpEstimate],
    j_f: &[JumpEstimate],
    dilation_px: usize,
    spacing: f64,
) -> f64 {
    if j_u.is_empty() {
        return 1.0;
    }
    let limit = dilation_px as f64 * spacing + 1e-9 * spacing;
    let covered = j_u
        .iter()
        .filter(|a| {
            j_f.iter().any(|b| {
                a.x0.iter()
                    .zip(&b.x0)
                    .map(|(x, y)| (x - y).abs())
                    .fold(0.0f64, f64::max)
                    <= limit
            })
        })
        .count();
    covered as f64 / j_u.len() as f64
}

/// Midpoint comparison at one jump of a one-dimensional signal.
#[derive(Debug, Clone)]
pub struct MidpointCheck {
    /// Pixel the check was requested at.
    pub pixel: usize,
    /// Left node of the examined interface `(interface_left,
    /// interface_left + 1)`.
    pub interface_left: usize,
    /// `(u_plus + u_minus) / 2` with sides oriented so `u_plus >= u_minus`.
    pub midpoint: f64,
    /// Data value on the lower-`u` side.
    pub f_lower: f64,
    /// Data value on the upper-`u` side.
    pub f_upper: f64,
    /// `min(midpoint - f_lower, f_upper - midpoint)`; infinite when the
    /// check is vacuous.
    pub margin: f64,
    /// True when `u` has no jump at the interface, making the check empty.
    pub vacuous: bool,
    /// `margin >= 0` (vacuous checks pass).
    pub pass: bool,
}

/// Checks, at each listed pixel of a scalar one-dimensional signal, that
/// the midpoint of the denoised jump lies between the data values on the
/// two sides.
///
/// For a pixel `p` the examined interface is the adjacent node pair with
/// the larger `|u|`-gap (ties prefer `(p, p+1)`), so the checks chain
/// directly off detection output regardless of which side of an interface
/// was flagged.  Sides are oriented so the upper value of `u` defines the
/// upper side; interfaces where `u` is (numerically) continuous pass
/// vacuously.
///
/// # Errors
///
/// Rejects fields that are not scalar and one-dimensional, mismatched
/// shapes, and out-of-range pixels.
pub fn midpoint_check_1d(
    u: &VectorField,
    f: &VectorField,
    jump_pixels: &[usize],
) -> Result<Vec<MidpointCheck>> {
    check_same_shape(u, f)?;
    if u.spec().ndim() != 1 || u.channels() != 1 {
        return Err(Error::InvalidArgument(format!(
            "midpoint checks need a 1D scalar signal, got {}D with {} channels",
            u.spec().ndim(),
            u.channels()
        )));
    }
    let len = u.spec().pixel_count();
    if len < 2 {
        return Err(Error::InvalidArgument(
            "midpoint checks need at least two samples".into(),
        ));
    }
    let mut out = Vec::with_capacity(jump_pixels.len());
    for &p in jump_pixels {
        if p >= len {
            return Err(Error::InvalidArgument(format!(
                "jump pixel {p} out of range for {len} samples"
            )));
        }
        let gap_right = if p + 1 < len {
            (u.get(p + 1, 0) - u.get(p, 0)).abs()
        } else {
            -1.0
        };
        let gap_left = if p >= 1 {
            (u.get(p, 0) - u.get(p - 1, 0)).abs()
        } else {
            -1.0
        };
        let left = if gap_right >= gap_left { p } else { p - 1 };
        let (ua, ub) = (u.get(left, 0), u.get(left + 1, 0));
        let (fa, fb) = (f.get(left, 0), f.get(left + 1, 0));
        let (u_lo, u_hi, f_lower, f_upper) = if ub >= ua {
            (ua, ub, fa, fb)
        } else {
            (ub, ua, fb, fa)
        };
        let vacuous = u_hi - u_lo <= 1e-12 * (1.0 + u_lo.abs() + u_hi.abs());
        let midpoint = 0.5 * (u_lo + u_hi);
        let margin = if vacuous {
            f64::INFINITY
        } else {
            (midpoint - f_lower).min(f_upper - midpoint)
        };
        out.push(MidpointCheck {
            pixel: p,
            interface_left: left,
            midpoint,
            f_lower,
            f_upper,
            margin,
            vacuous,
            pass: margin >= 0.0,
        });
    }
    Ok(out)
}
