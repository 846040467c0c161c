//! Second-order denoising for scalar images.
//!
//! The first-order model pays for every gradient, so it flattens slopes into
//! staircases. Here the gradient is split into a tracked slope field `z`
//! plus a residual: only the residual is measured by the spectral penalty,
//! while `z` itself is kept coherent by a *smooth* radial penalty on its
//! derivative. For a scalar image `u` on an `m`-dimensional grid the energy
//! is
//!
//! ```text
//! E(u, z) = a1 * sum rho1((Du - z)_px) + a2 * sum rho2(|(Bz)_px|_F)
//!           + 1/2 * sum |u_px - f_px|^2        (all sums weighted by h^m)
//! ```
//!
//! with `B` the forward-difference Jacobian of `z` (or its symmetrized
//! part), except that each own-axis difference stops one cell earlier than
//! the image gradient does. The image gradient is one-sided, so its last
//! sample along every axis is zero; a slope field that copies it exactly
//! carries the same dead slot, and the shortened stencil keeps such fields
//! free of second-order cost. Affine images are then true fixed points:
//! `z = Df` gives `Du - z = 0` and `Bz = 0`, so the whole regularizer
//! vanishes and `u = f` is the exact minimizer.
//!
//! The second-order penalty is restricted to families with a smooth,
//! radially symmetric profile ([`SecondOrderFamily`]); the 1-homogeneous
//! member (`PowerNorm(1.0)`) is deliberately refused since its minimizers
//! need a different algorithmic treatment.
//!
//! The solver is the same primal–dual scheme as [`rof_solve`], applied to
//! the stacked operator `K(u, z) = (Du - z, Bz)` with duals `P1` (a `1 x m`
//! field) and `P2` (an `m x m` field). `P1` is projected onto the dual ball
//! of the weighted first-order penalty; `P2` takes the proximal step of the
//! conjugate of the radial penalty, computed through the Moreau identity
//! from the (closed-form or scalar-Newton) radial shrinkage.
//!
//! For the stopping rule the dual objective needs a computable conjugate of
//! the primal `z`-term, whose indicator-free form is degenerate. The solver
//! therefore adds a *large, inactive* interval constraint `|z_a| <= Z` with
//! `Z` far above any slope the data can support; its conjugate contributes
//! `Z * h^m * sum |P1 + div_B P2|_1`, which vanishes at dual optimality. The
//! reported gap is therefore conservative (an upper bound on the true
//! suboptimality) and can never produce a false convergence claim.
//!
//! [`rof_solve`]: crate::solver::rof_solve

use rayon::prelude::*;

use crate::fidelity::Fidelity;
use crate::grid::{MatrixField, VectorField};
use crate::solver::ops::{
    check_same_shape, det_sum, div_into, fidelity_sum, grad_into, regularizer_sum, sym_into,
    PAR_MIN_PIXELS,
};
use crate::solver::rof::{clip_field, dual_step, dual_value, extrapolate};
use crate::solver::{gap_check_due, SolveReport, SolverConfig};
use crate::specnorm::{shrink_scalar, SpectralRegularizer};
use crate::{Error, Result};

/// Radial profile of the penalty on the second-order derivative field,
/// applied pointwise to the Frobenius norm of the `m x m` matrix `Bz`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SecondOrderFamily {
    /// `r -> r^p / p` with exponent `p > 1`.
    ///
    /// The exponent-one member is the non-differentiable case whose
    /// minimizers this scheme does not reach; requesting it returns
    /// [`Error::ExactTgvOutOfScope`] instead of silently smoothing.
    PowerNorm(f64),
    /// Huber profile with transition radius `delta > 0`: quadratic
    /// `r^2 / (2 delta)` below the threshold, affine `r - delta / 2` above.
    HuberNorm(f64),
}

impl SecondOrderFamily {
    fn validate(&self) -> Result<()> {
        match *self {
            SecondOrderFamily::PowerNorm(p) => {
                if !p.is_finite() || p < 1.0 {
                    return Err(Error::InvalidArgument(format!(
                        "second-order power exponent must be finite and >= 1, got {p}"
                    )));
                }
                if p == 1.0 {
                    return Err(Error::ExactTgvOutOfScope(
                        "exponent 1 makes the second-order penalty non-differentiable; \
                         request a power above 1 or a Huber profile instead"
                            .to_string(),
                    ));
                }
                Ok(())
            }
            SecondOrderFamily::HuberNorm(delta) => {
                if !(delta.is_finite() && delta > 0.0) {
                    return Err(Error::InvalidArgument(format!(
                        "Huber transition radius must be positive and finite, got {delta}"
                    )));
                }
                Ok(())
            }
        }
    }

    /// Penalty value at radius `r >= 0`, scaled by the weight `alpha2`.
    fn value(&self, r: f64, alpha2: f64) -> f64 {
        match *self {
            SecondOrderFamily::PowerNorm(p) => alpha2 * r.powf(p) / p,
            SecondOrderFamily::HuberNorm(delta) => {
                if r <= delta {
                    alpha2 * r * r / (2.0 * delta)
                } else {
                    alpha2 * (r - 0.5 * delta)
                }
            }
        }
    }

    /// Convex conjugate of the scaled profile at dual radius `r`.
    ///
    /// For the power profile with conjugate exponent `q = p / (p - 1)` this
    /// is `r^q / (q * alpha2^(q-1))`, finite everywhere. For Huber it is
    /// `delta * r^2 / (2 * alpha2)` on the ball `r <= alpha2`; the dual step
    /// keeps iterates inside that ball, so the formula is evaluated without
    /// a guard.
    fn conjugate(&self, r: f64, alpha2: f64) -> f64 {
        match *self {
            SecondOrderFamily::PowerNorm(p) => {
                let q = p / (p - 1.0);
                r.powf(q) / (q * alpha2.powf(q - 1.0))
            }
            SecondOrderFamily::HuberNorm(delta) => delta * r * r / (2.0 * alpha2),
        }
    }

    /// Radius of `argmin_s (s - r0)^2 / 2 + t * alpha2 * profile(s)`.
    fn prox_radius(&self, r0: f64, t: f64, alpha2: f64) -> f64 {
        match *self {
            SecondOrderFamily::PowerNorm(p) => shrink_scalar(r0, t * alpha2, p),
            SecondOrderFamily::HuberNorm(delta) => {
                if r0 <= delta + t * alpha2 {
                    r0 / (1.0 + t * alpha2 / delta)
                } else {
                    r0 - t * alpha2
                }
            }
        }
    }
}

/// Minimizes the second-order model by a primal–dual iteration on the
/// stacked operator `(u, z) -> (Du - z, Bz)`.
///
/// * `f` must be single-channel; `rho1` must be a 1-homogeneous family (its
///   own weight is multiplied by `weights.0`).
/// * `weights = (a1, a2)` are the positive weights of the first- and
///   second-order terms.
/// * `symmetrized` selects `B = sym . D` instead of `B = D`.
/// * An optional box in `cfg` constrains `u` bit-exactly, as in
///   [`rof_solve`](crate::solver::rof_solve).
///
/// Returns the denoised image, the slope field `z` (one channel per grid
/// axis) and a [`SolveReport`] whose `primal_energy` agrees with
/// [`tgv_energy`] at the returned pair.
pub fn tgv_solve(
    f: &VectorField,
    rho1: &SpectralRegularizer,
    rho2: SecondOrderFamily,
    weights: (f64, f64),
    symmetrized: bool,
    cfg: &SolverConfig,
) -> Result<(VectorField, VectorField, SolveReport)> {
    cfg.validate()?;
    rho2.validate()?;
    validate_weights(weights)?;
    if f.channels() != 1 {
        return Err(Error::InvalidArgument(format!(
            "the second-order solver handles single-channel images, got {} channels",
            f.channels()
        )));
    }
    if !rho1.is_one_homogeneous() {
        return Err(Error::UnsupportedRegularizer(
            "this solver needs a one-homogeneous family with a dual-ball projection".to_string(),
        ));
    }
    if f.data().iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("input image contains a non-finite value".to_string()));
    }
    let bx = cfg.checked_box(1)?;
    let (alpha1, alpha2) = weights;
    let rho1_eff = SpectralRegularizer::new(rho1.family(), rho1.weight() * alpha1)?;

    let spec = f.spec().clone();
    let m = spec.ndim();
    let sigma = cfg.sigma;
    let tau = cfg.tau_step;
    let theta = cfg.theta_relax;

    // Inactive interval constraint on the slope field, sized well above any
    // slope the data supports (data range over the shortest axis extent),
    // so the dual objective stays computable. See the module notes.
    let (lo, hi) = f.channel_range(0);
    let extent = (0..m)
        .map(|a| spec.extent(a))
        .fold(f64::INFINITY, f64::min)
        .max(spec.spacing());
    let z_bound = 16.0 * (hi - lo + 1.0) / extent;

    let mut u = f.clone();
    if let Some(bx) = bx {
        clip_field(&mut u, bx);
    }
    let mut u_prev = u.clone();
    let mut ubar = u.clone();
    let mut z = VectorField::zeros(&spec, m);
    let mut z_prev = z.clone();
    let mut zbar = z.clone();

    let mut p1 = MatrixField::zeros(&spec, 1, m);
    let mut p2 = MatrixField::zeros(&spec, m, m);
    let mut gu = MatrixField::zeros(&spec, 1, m);
    let mut a1 = MatrixField::zeros(&spec, 1, m);
    let mut gz = MatrixField::zeros(&spec, m, m);
    let mut bz = MatrixField::zeros(&spec, m, m);
    let mut sp2 = MatrixField::zeros(&spec, m, m);
    let mut divp1 = VectorField::zeros(&spec, 1);
    let mut divp2 = VectorField::zeros(&spec, m);

    let l2 = Fidelity::SquaredL2;
    let mut history = Vec::new();
    let mut final_gap = f64::INFINITY;
    let mut primal_energy = f64::NAN;
    let mut converged = false;
    let mut iterations = 0;

    for k in 1..=cfg.max_iters {
        iterations = k;

        // Dual ascent on both blocks at the extrapolated primal point.
        grad_into(&ubar, &mut gu);
        diff_into(&gu, &zbar, &mut a1);
        dual_step(&mut p1, &a1, sigma, &rho1_eff, 1, m)?;

        grad_into(&zbar, &mut gz);
        mask_own_axis_tail(&mut gz);
        let bz_ref: &MatrixField = if symmetrized {
            sym_into(&gz, &mut bz);
            &bz
        } else {
            &gz
        };
        p2_step(&mut p2, bz_ref, sigma, alpha2, rho2);

        // Adjoints: K_u^* P = -div P1 and K_z^* P = -P1 - div_B P2. The
        // symmetrizer and the tail mask are both self-adjoint pixelwise, so
        // the adjoint of `mask . sym . D` is `div . sym . mask`.
        div_into(&p1, &mut divp1);
        if symmetrized {
            sym_into(&p2, &mut sp2);
        } else {
            sp2.data_mut().copy_from_slice(p2.data());
        }
        mask_own_axis_tail(&mut sp2);
        div_into(&sp2, &mut divp2);

        u_step(&mut u, &mut u_prev, &divp1, f, tau, bx);
        z_step(&mut z, &mut z_prev, &p1, &divp2, tau, z_bound);

        // The fidelity is strongly convex in `u` only, not in the pair
        // (u, z), so the accelerated step-size schedule of the first-order
        // solver does not apply; theta stays fixed.
        extrapolate(&mut ubar, &u, &u_prev, theta);
        extrapolate(&mut zbar, &z, &z_prev, theta);

        if gap_check_due(k, cfg.max_iters) {
            let e = energy_core(
                &u, &z, f, &rho1_eff, rho2, alpha2, symmetrized, &mut gu, &mut a1, &mut gz,
                &mut bz,
            );
            let d = dual_value(f, &l2, &divp1, bx)
                - z_bound * l1_pair_sum(&p1, &divp2)
                - conjugate_sum(&p2, rho2, alpha2);
            let gap = (e - d) / (1.0 + e.abs());
            history.push((k, e, gap));
            final_gap = gap;
            primal_energy = e;
            if gap <= cfg.tol_gap {
                converged = true;
                break;
            }
        }
    }

    Ok((
        u,
        z,
        SolveReport {
            iterations,
            final_gap,
            primal_energy,
            converged,
            history,
        },
    ))
}

/// Evaluates the second-order model energy at an arbitrary pair `(u, z)`.
///
/// `z` must have one channel per grid axis of `u`. The large internal
/// interval constraint used by [`tgv_solve`] for its stopping rule is not
/// part of the model and is not included here.
pub fn tgv_energy(
    u: &VectorField,
    z: &VectorField,
    f: &VectorField,
    rho1: &SpectralRegularizer,
    rho2: SecondOrderFamily,
    weights: (f64, f64),
    symmetrized: bool,
) -> Result<f64> {
    rho2.validate()?;
    validate_weights(weights)?;
    check_same_shape(u, f)?;
    if u.channels() != 1 {
        return Err(Error::InvalidArgument(format!(
            "the second-order energy is defined for single-channel images, got {} channels",
            u.channels()
        )));
    }
    let spec = u.spec();
    let m = spec.ndim();
    if z.spec().dims() != spec.dims()
        || z.spec().spacing() != spec.spacing()
        || z.channels() != m
    {
        return Err(Error::ShapeMismatch(format!(
            "slope field must live on the same grid with {m} channels, got {} channels on {:?}",
            z.channels(),
            z.spec().dims()
        )));
    }
    let (alpha1, alpha2) = weights;
    let rho1_eff = SpectralRegularizer::new(rho1.family(), rho1.weight() * alpha1)?;
    let mut gu = MatrixField::zeros(spec, 1, m);
    let mut a1 = MatrixField::zeros(spec, 1, m);
    let mut gz = MatrixField::zeros(spec, m, m);
    let mut bz = MatrixField::zeros(spec, m, m);
    Ok(energy_core(
        u, z, f, &rho1_eff, rho2, alpha2, symmetrized, &mut gu, &mut a1, &mut gz, &mut bz,
    ))
}

fn validate_weights(weights: (f64, f64)) -> Result<()> {
    let (a1, a2) = weights;
    if !(a1.is_finite() && a1 > 0.0 && a2.is_finite() && a2 > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "both term weights must be positive and finite, got ({a1}, {a2})"
        )));
    }
    Ok(())
}

/// Shared energy evaluation for the in-loop stopping rule, the report and
/// [`tgv_energy`]; one code path keeps the reported value and independent
/// recomputations identical.
#[allow(clippy::too_many_arguments)]
fn energy_core(
    u: &VectorField,
    z: &VectorField,
    f: &VectorField,
    rho1_eff: &SpectralRegularizer,
    rho2: SecondOrderFamily,
    alpha2: f64,
    symmetrized: bool,
    gu: &mut MatrixField,
    a1: &mut MatrixField,
    gz: &mut MatrixField,
    bz: &mut MatrixField,
) -> f64 {
    grad_into(u, gu);
    diff_into(gu, z, a1);
    let first = regularizer_sum(a1, rho1_eff);
    grad_into(z, gz);
    mask_own_axis_tail(gz);
    let bz_ref: &MatrixField = if symmetrized {
        sym_into(gz, bz);
        bz
    } else {
        gz
    };
    let second = radial_sum(bz_ref, rho2, alpha2);
    first + second + fidelity_sum(u, f, &Fidelity::SquaredL2)
}

/// `out = a - b` entrywise; the `1 x m` matrix field and the `m`-channel
/// vector field share one flat layout.
fn diff_into(a: &MatrixField, b: &VectorField, out: &mut MatrixField) {
    let pixels = out.spec().pixel_count();
    let od = out.data_mut();
    let ad = a.data();
    let bd = b.data();
    if pixels < PAR_MIN_PIXELS {
        for i in 0..od.len() {
            od[i] = ad[i] - bd[i];
        }
    } else {
        od.par_iter_mut()
            .zip(ad.par_iter())
            .zip(bd.par_iter())
            .for_each(|((o, &x), &y)| *o = x - y);
    }
}

/// Zeroes every own-axis entry `(a, a)` of a square matrix field on the
/// last two samples of axis `a`, turning a plain forward-difference
/// Jacobian into the shortened slope stencil described in the module docs.
///
/// The mask is a pixelwise orthogonal projection, so it serves as both the
/// forward correction (applied after the Jacobian) and the adjoint one
/// (applied before the divergence).
fn mask_own_axis_tail(field: &mut MatrixField) {
    let spec = field.spec().clone();
    let m = spec.ndim();
    let mm = field.rows() * field.cols();
    let apply = |p: usize, po: &mut [f64]| {
        let idx = spec.multi_index(p);
        for a in 0..m {
            if idx[a] + 2 >= spec.dim(a) {
                po[a * m + a] = 0.0;
            }
        }
    };
    if spec.pixel_count() < PAR_MIN_PIXELS {
        for (p, po) in field.data_mut().chunks_exact_mut(mm).enumerate() {
            apply(p, po);
        }
    } else {
        field
            .data_mut()
            .par_chunks_exact_mut(mm)
            .enumerate()
            .for_each(|(p, po)| apply(p, po));
    }
}

/// `P2 <- prox_{sigma F*}(P2 + sigma Bz)` pixelwise through the Moreau
/// identity: with `y` the ascent point and `s` the radial shrinkage of
/// `|y|/sigma`, the result is `y * (1 - s * sigma / |y|)`.
fn p2_step(
    p2: &mut MatrixField,
    bz: &MatrixField,
    sigma: f64,
    alpha2: f64,
    fam: SecondOrderFamily,
) {
    let mm = p2.rows() * p2.cols();
    let t = 1.0 / sigma;
    let pixels = p2.spec().pixel_count();
    let update = move |pp: &mut [f64], gp: &[f64]| {
        let mut nrm2 = 0.0;
        for i in 0..mm {
            pp[i] += sigma * gp[i];
            nrm2 += pp[i] * pp[i];
        }
        let ry = nrm2.sqrt();
        if ry == 0.0 {
            return;
        }
        let s = fam.prox_radius(ry / sigma, t, alpha2);
        let factor = (1.0 - s * sigma / ry).max(0.0);
        for v in pp.iter_mut() {
            *v *= factor;
        }
    };
    if pixels < PAR_MIN_PIXELS {
        for (pp, gp) in p2
            .data_mut()
            .chunks_exact_mut(mm)
            .zip(bz.data().chunks_exact(mm))
        {
            update(pp, gp);
        }
    } else {
        p2.data_mut()
            .par_chunks_exact_mut(mm)
            .zip(bz.data().par_chunks_exact(mm))
            .for_each(|(pp, gp)| update(pp, gp));
    }
}

/// `u <- prox_{tau psi}(u + tau div P1)` for the squared-distance fidelity,
/// with the optional box applied exactly (1D objective over an interval).
fn u_step(
    u: &mut VectorField,
    u_prev: &mut VectorField,
    divp1: &VectorField,
    f: &VectorField,
    tau: f64,
    bx: Option<&[(f64, f64)]>,
) {
    std::mem::swap(u, u_prev);
    let inv = 1.0 / (1.0 + tau);
    let interval = bx.map(|b| b[0]);
    let pixels = f.spec().pixel_count();
    let kernel = move |uo: f64, dv: f64, fv: f64| {
        let w = (uo + tau * (dv + fv)) * inv;
        match interval {
            Some((lo, hi)) => w.clamp(lo, hi),
            None => w,
        }
    };
    if pixels < PAR_MIN_PIXELS {
        let ud = u.data_mut();
        let od = u_prev.data();
        let dd = divp1.data();
        let fd = f.data();
        for i in 0..pixels {
            ud[i] = kernel(od[i], dd[i], fd[i]);
        }
    } else {
        u.data_mut()
            .par_iter_mut()
            .zip(u_prev.data().par_iter())
            .zip(divp1.data().par_iter())
            .zip(f.data().par_iter())
            .for_each(|(((un, &uo), &dv), &fv)| *un = kernel(uo, dv, fv));
    }
}

/// `z <- clamp(z + tau (P1 + div_B P2))`; the prox of the inactive interval
/// constraint is a clamp, and there is no data term in `z`.
fn z_step(
    z: &mut VectorField,
    z_prev: &mut VectorField,
    p1: &MatrixField,
    divp2: &VectorField,
    tau: f64,
    bound: f64,
) {
    std::mem::swap(z, z_prev);
    let pixels = z_prev.spec().pixel_count();
    let zd = z.data_mut();
    let od = z_prev.data();
    let pd = p1.data();
    let dd = divp2.data();
    if pixels < PAR_MIN_PIXELS {
        for i in 0..zd.len() {
            zd[i] = (od[i] + tau * (pd[i] + dd[i])).clamp(-bound, bound);
        }
    } else {
        zd.par_iter_mut()
            .zip(od.par_iter())
            .zip(pd.par_iter())
            .zip(dd.par_iter())
            .for_each(|(((zn, &zo), &pv), &dv)| {
                *zn = (zo + tau * (pv + dv)).clamp(-bound, bound)
            });
    }
}

/// Weighted sum of the radial profile over a matrix field.
fn radial_sum(field: &MatrixField, fam: SecondOrderFamily, alpha2: f64) -> f64 {
    let mm = field.rows() * field.cols();
    let data = field.data();
    field.spec().cell_volume()
        * det_sum(field.spec().pixel_count(), |range| {
            let mut acc = 0.0;
            for p in range {
                let mut nrm2 = 0.0;
                for v in &data[p * mm..(p + 1) * mm] {
                    nrm2 += v * v;
                }
                acc += fam.value(nrm2.sqrt(), alpha2);
            }
            acc
        })
}

/// Weighted sum of the conjugate profile over a matrix field.
fn conjugate_sum(field: &MatrixField, fam: SecondOrderFamily, alpha2: f64) -> f64 {
    let mm = field.rows() * field.cols();
    let data = field.data();
    field.spec().cell_volume()
        * det_sum(field.spec().pixel_count(), |range| {
            let mut acc = 0.0;
            for p in range {
                let mut nrm2 = 0.0;
                for v in &data[p * mm..(p + 1) * mm] {
                    nrm2 += v * v;
                }
                acc += fam.conjugate(nrm2.sqrt(), alpha2);
            }
            acc
        })
}

/// Weighted entrywise 1-norm of `P1 + div_B P2`, the dual-feasibility
/// residual of the slope block.
fn l1_pair_sum(p1: &MatrixField, divp2: &VectorField) -> f64 {
    let m = divp2.channels();
    let a = p1.data();
    let b = divp2.data();
    divp2.spec().cell_volume()
        * det_sum(divp2.spec().pixel_count(), |range| {
            let mut acc = 0.0;
            for i in range.start * m..range.end * m {
                acc += (a[i] + b[i]).abs();
            }
            acc
        })
}
