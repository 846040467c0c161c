//! Matrix regularizers evaluated through singular values.
//!
//! All families except the entrywise `Lpq` norm are unitarily invariant:
//! they are symmetric gauges of the singular-value vector.  That structure
//! is what makes the dual-ball projections tractable — each projection acts
//! on the singular values alone and reuses the singular vectors of its
//! argument, which is optimal by the trace inequality checked in
//! [`von_neumann_gap`].
//!
//! Matrices are passed as row-major slices with explicit `(rows, cols)`;
//! every routine here targets the small per-pixel blocks (a handful of rows
//! and columns), not large dense problems.

use crate::{Error, Result};

// ---------------------------------------------------------------------------
// Small-matrix SVD
// ---------------------------------------------------------------------------

/// Reduced singular value decomposition `A = U diag(sigma) V^T`.
///
/// `sigma` has `p = min(rows, cols)` nonincreasing, nonnegative entries;
/// `u` is `rows x p`, `v` is `cols x p`, both with orthonormal columns.
#[derive(Debug, Clone)]
pub struct SingularSystem {
    pub sigma: Vec<f64>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub rows: usize,
    pub cols: usize,
}

impl SingularSystem {
    /// Empty system, used as a reusable workspace.
    pub fn empty() -> Self {
        Self {
            sigma: Vec::new(),
            u: Vec::new(),
            v: Vec::new(),
            rows: 0,
            cols: 0,
        }
    }

    /// Number of singular values.
    pub fn rank_bound(&self) -> usize {
        self.sigma.len()
    }

    /// Rebuilds `U diag(s) V^T` for arbitrary replacement values `s`.
    pub fn reconstruct_with(&self, s: &[f64], out: &mut [f64]) {
        let p = self.sigma.len();
        debug_assert_eq!(s.len(), p);
        debug_assert_eq!(out.len(), self.rows * self.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                let mut acc = 0.0;
                for k in 0..p {
                    acc += self.u[i * p + k] * s[k] * self.v[j * p + k];
                }
                out[i * self.cols + j] = acc;
            }
        }
    }
}

/// Computes the reduced SVD of a small dense matrix.
pub fn svd(a: &[f64], rows: usize, cols: usize) -> SingularSystem {
    let mut sys = SingularSystem::empty();
    let mut work = Vec::new();
    svd_in(a, rows, cols, &mut sys, &mut work);
    sys
}

/// Workspace-reusing SVD; `work` holds the rotated copy of the input.
///
/// One-sided Jacobi on the tall orientation: each pair rotation is the
/// Givens rotation diagonalizing the corresponding 2x2 block of `A^T A`,
/// so a two-column matrix is finished after a single rotation.
pub(crate) fn svd_in(
    a: &[f64],
    rows: usize,
    cols: usize,
    sys: &mut SingularSystem,
    work: &mut Vec<f64>,
) {
    debug_assert_eq!(a.len(), rows * cols);
    let transposed = rows < cols;
    let (n, m) = if transposed { (cols, rows) } else { (rows, cols) };

    // `work` holds the n x m column-rotated copy B; `sys.v` accumulates the
    // m x m rotation product.
    work.clear();
    work.resize(n * m, 0.0);
    if transposed {
        for i in 0..rows {
            for j in 0..cols {
                work[j * m + i] = a[i * cols + j];
            }
        }
    } else {
        work.copy_from_slice(a);
    }
    let vbig = &mut sys.v;
    vbig.clear();
    vbig.resize(m * m, 0.0);
    for j in 0..m {
        vbig[j * m + j] = 1.0;
    }

    let b = work.as_mut_slice();
    for _sweep in 0..60 {
        let mut rotated = false;
        for p in 0..m {
            for q in (p + 1)..m {
                let mut app = 0.0;
                let mut aqq = 0.0;
                let mut apq = 0.0;
                for i in 0..n {
                    let x = b[i * m + p];
                    let y = b[i * m + q];
                    app += x * x;
                    aqq += y * y;
                    apq += x * y;
                }
                if apq == 0.0 || apq.abs() <= 1e-15 * (app * aqq).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (aqq - app) / (2.0 * apq);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..n {
                    let x = b[i * m + p];
                    let y = b[i * m + q];
                    b[i * m + p] = c * x - s * y;
                    b[i * m + q] = s * x + c * y;
                }
                for j in 0..m {
                    let x = vbig[j * m + p];
                    let y = vbig[j * m + q];
                    vbig[j * m + p] = c * x - s * y;
                    vbig[j * m + q] = s * x + c * y;
                }
            }
        }
        if !rotated {
            break;
        }
    }

    // Column norms are the singular values; normalized columns form U.
    sys.sigma.clear();
    sys.sigma.resize(m, 0.0);
    for j in 0..m {
        let mut norm = 0.0;
        for i in 0..n {
            norm += b[i * m + j] * b[i * m + j];
        }
        sys.sigma[j] = norm.sqrt();
    }

    // Sort descending by singular value (selection order, m is tiny).
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| sys.sigma[j].partial_cmp(&sys.sigma[i]).unwrap());

    let mut u = std::mem::take(&mut sys.u);
    u.clear();
    u.resize(n * m, 0.0);
    let mut v_sorted = vec![0.0; m * m];
    let mut sig_sorted = vec![0.0; m];
    let sigma_max = sys.sigma[order[0]];
    for (k, &j) in order.iter().enumerate() {
        sig_sorted[k] = sys.sigma[j];
        for r in 0..m {
            v_sorted[r * m + k] = vbig[r * m + j];
        }
        if sys.sigma[j] > 1e-13 * sigma_max && sys.sigma[j] > 0.0 {
            let inv = 1.0 / sys.sigma[j];
            for i in 0..n {
                u[i * m + k] = b[i * m + j] * inv;
            }
        }
        // Columns with (numerically) zero singular value are filled in below.
    }
    complete_orthonormal_columns(&mut u, n, m, &sig_sorted, sigma_max);
    sys.sigma.copy_from_slice(&sig_sorted);
    *vbig = v_sorted;
    sys.u = u;

    if transposed {
        // The factors computed above decompose A^T, so they trade places.
        std::mem::swap(&mut sys.u, &mut sys.v);
    }
    sys.rows = rows;
    sys.cols = cols;
}

/// Replaces columns whose singular value is numerically zero with unit
/// vectors orthogonal to all other columns (deterministic Gram-Schmidt over
/// the canonical basis).
fn complete_orthonormal_columns(u: &mut [f64], n: usize, m: usize, sigma: &[f64], sigma_max: f64) {
    for k in 0..m {
        if sigma[k] > 1e-13 * sigma_max && sigma[k] > 0.0 {
            continue;
        }
        let mut chosen = None;
        for cand in 0..n {
            // Start from the canonical basis vector e_cand.
            let mut col = vec![0.0; n];
            col[cand] = 1.0;
            for _pass in 0..2 {
                for other in 0..m {
                    if other == k {
                        continue;
                    }
                    let mut dot = 0.0;
                    for i in 0..n {
                        dot += col[i] * u[i * m + other];
                    }
                    for i in 0..n {
                        col[i] -= dot * u[i * m + other];
                    }
                }
            }
            let norm = col.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-6 {
                for i in 0..n {
                    u[i * m + k] = col[i] / norm;
                }
                chosen = Some(cand);
                break;
            }
        }
        debug_assert!(chosen.is_some(), "failed to complete orthonormal basis");
    }
}

// ---------------------------------------------------------------------------
// Regularizer families
// ---------------------------------------------------------------------------

/// The supported matrix-norm families.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Family {
    /// Square root of the sum of squared singular values (entrywise 2-norm).
    Frobenius,
    /// Sum of singular values.
    Nuclear,
    /// Largest singular value.
    Spectral,
    /// `(sum sigma_i^p)^(1/p)` for an exponent in the open interval (1, oo).
    Schatten(f64),
    /// Entrywise mixed norm: inner `p`-norm down each column (channels),
    /// outer `q`-norm across columns; both exponents in (1, oo).
    LpqAnisotropic(f64, f64),
    /// `log(sum exp sigma_i)` — convex with linear growth but not
    /// positively homogeneous.
    LogSumExp,
}

/// A weighted matrix regularizer `A -> weight * N(A)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralRegularizer {
    family: Family,
    weight: f64,
}

impl SpectralRegularizer {
    /// Validates exponent ranges and the positive weight.
    pub fn new(family: Family, weight: f64) -> Result<Self> {
        if !(weight.is_finite() && weight > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "regularizer weight must be positive, got {weight}"
            )));
        }
        match family {
            Family::Schatten(p) => {
                if !(p.is_finite() && p > 1.0) {
                    return Err(Error::InvalidArgument(format!(
                        "Schatten exponent must lie strictly between 1 and infinity, got {p}"
                    )));
                }
            }
            Family::LpqAnisotropic(p, q) => {
                if !(p.is_finite() && p > 1.0 && q.is_finite() && q > 1.0) {
                    return Err(Error::InvalidArgument(format!(
                        "mixed-norm exponents must lie strictly between 1 and infinity, got ({p}, {q})"
                    )));
                }
            }
            _ => {}
        }
        Ok(Self { family, weight })
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    /// Whether the family is positively 1-homogeneous.
    pub fn is_one_homogeneous(&self) -> bool {
        !matches!(self.family, Family::LogSumExp)
    }

    /// Evaluates `weight * N(a)` for an n-by-m matrix.
    pub fn value(&self, a: &[f64], rows: usize, cols: usize) -> f64 {
        self.weight * self.norm(a, rows, cols)
    }

    /// The unweighted norm (or gauge) of the family.
    pub fn norm(&self, a: &[f64], rows: usize, cols: usize) -> f64 {
        match self.family {
            Family::Frobenius => frobenius_norm(a),
            Family::LpqAnisotropic(p, q) => lpq_norm(a, rows, cols, p, q),
            _ => {
                let sys = svd(a, rows, cols);
                self.gauge_of_sigma(&sys.sigma)
            }
        }
    }

    /// The family's symmetric gauge applied to a singular-value vector.
    pub(crate) fn gauge_of_sigma(&self, sigma: &[f64]) -> f64 {
        match self.family {
            Family::Frobenius => sigma.iter().map(|s| s * s).sum::<f64>().sqrt(),
            Family::Nuclear => sigma.iter().sum(),
            Family::Spectral => sigma.iter().cloned().fold(0.0, f64::max),
            Family::Schatten(p) => sigma.iter().map(|s| s.powf(p)).sum::<f64>().powf(1.0 / p),
            Family::LogSumExp => log_sum_exp(sigma),
            Family::LpqAnisotropic(..) => {
                unreachable!("entrywise family is not a function of singular values")
            }
        }
    }

    /// Recession function `lim_{t->oo} rho(t A)/t`.
    ///
    /// For the 1-homogeneous families this is the value itself; for
    /// `LogSumExp` the exponential sum is dominated by the largest singular
    /// value, so the recession function is `weight * sigma_1`.
    pub fn recession(&self, a: &[f64], rows: usize, cols: usize) -> f64 {
        match self.family {
            Family::LogSumExp => {
                let sys = svd(a, rows, cols);
                self.weight * sys.sigma.iter().cloned().fold(0.0, f64::max)
            }
            _ => self.value(a, rows, cols),
        }
    }

    /// The dual norm of the family (unweighted); the dual ball used by the
    /// denoising solver is this norm's `weight`-ball.
    ///
    /// # Errors
    ///
    /// `LogSumExp` has no dual ball (it is not a norm), so this fails with
    /// [`Error::NoDualBall`].
    pub fn dual_norm(&self, a: &[f64], rows: usize, cols: usize) -> Result<f64> {
        let dual = match self.family {
            Family::Frobenius => Family::Frobenius,
            Family::Nuclear => Family::Spectral,
            Family::Spectral => Family::Nuclear,
            Family::Schatten(p) => Family::Schatten(p / (p - 1.0)),
            Family::LpqAnisotropic(p, q) => {
                Family::LpqAnisotropic(p / (p - 1.0), q / (q - 1.0))
            }
            Family::LogSumExp => return Err(Error::NoDualBall),
        };
        Ok(SpectralRegularizer::new(dual, 1.0)
            .expect("dual exponents of valid exponents are valid")
            .norm(a, rows, cols))
    }

    /// Euclidean projection of `p` onto `{ B : dual_norm(B) <= weight }`.
    pub fn project_dual_ball(&self, p: &[f64], rows: usize, cols: usize) -> Result<Vec<f64>> {
        let mut out = vec![0.0; p.len()];
        let mut ws = DualProjWorkspace::new();
        self.project_dual_ball_in(p, rows, cols, &mut out, &mut ws)?;
        Ok(out)
    }

    /// Workspace-reusing form of [`Self::project_dual_ball`].
    pub(crate) fn project_dual_ball_in(
        &self,
        p: &[f64],
        rows: usize,
        cols: usize,
        out: &mut [f64],
        ws: &mut DualProjWorkspace,
    ) -> Result<()> {
        debug_assert_eq!(p.len(), rows * cols);
        debug_assert_eq!(out.len(), rows * cols);
        let alpha = self.weight;
        match self.family {
            Family::Frobenius => {
                let norm = frobenius_norm(p);
                if norm <= alpha {
                    out.copy_from_slice(p);
                } else {
                    let scale = alpha / norm;
                    for (o, x) in out.iter_mut().zip(p) {
                        *o = scale * x;
                    }
                }
                Ok(())
            }
            Family::Nuclear | Family::Spectral | Family::Schatten(_) => {
                svd_in(p, rows, cols, &mut ws.sys, &mut ws.work);
                let sig = &mut ws.sig;
                sig.clear();
                sig.extend_from_slice(&ws.sys.sigma);
                match self.family {
                    // Dual of Nuclear is Spectral: clip each singular value.
                    Family::Nuclear => {
                        let mut feasible = true;
                        for s in sig.iter_mut() {
                            if *s > alpha {
                                *s = alpha;
                                feasible = false;
                            }
                        }
                        if feasible {
                            out.copy_from_slice(p);
                            return Ok(());
                        }
                    }
                    // Dual of Spectral is Nuclear: project sigma onto the
                    // l1 ball by sort-and-threshold (sigma is sorted).
                    Family::Spectral => {
                        let total: f64 = sig.iter().sum();
                        if total <= alpha {
                            out.copy_from_slice(p);
                            return Ok(());
                        }
                        project_sorted_l1(sig, alpha);
                    }
                    // Dual of Schatten-p is Schatten-p'.
                    Family::Schatten(pexp) => {
                        let pd = pexp / (pexp - 1.0);
                        let norm = lp_norm(sig, pd);
                        if norm <= alpha {
                            out.copy_from_slice(p);
                            return Ok(());
                        }
                        project_lp_ball(sig, pd, alpha)?;
                    }
                    _ => unreachable!(),
                }
                ws.sys.reconstruct_with(sig, out);
                Ok(())
            }
            Family::LpqAnisotropic(pexp, qexp) => {
                let pd = pexp / (pexp - 1.0);
                let qd = qexp / (qexp - 1.0);
                out.copy_from_slice(p);
                project_mixed_ball(out, rows, cols, pd, qd, alpha)
            }
            Family::LogSumExp => Err(Error::NoDualBall),
        }
    }
}

/// Reusable buffers for [`SpectralRegularizer::project_dual_ball_in`].
pub(crate) struct DualProjWorkspace {
    sys: SingularSystem,
    work: Vec<f64>,
    sig: Vec<f64>,
}

impl DualProjWorkspace {
    pub(crate) fn new() -> Self {
        Self {
            sys: SingularSystem::empty(),
            work: Vec::new(),
            sig: Vec::new(),
        }
    }
}

/// Applies an arbitrary symmetric gauge `h` to the singular values of `a`.
pub fn symmetric_gauge(h: impl Fn(&[f64]) -> f64, a: &[f64], rows: usize, cols: usize) -> f64 {
    let sys = svd(a, rows, cols);
    h(&sys.sigma)
}

/// `sum_i sigma_i(A) sigma_i(B) - trace(A B^T)`, which is nonnegative; it
/// vanishes exactly when the two matrices share aligned singular systems.
pub fn von_neumann_gap(a: &[f64], b: &[f64], rows: usize, cols: usize) -> f64 {
    debug_assert_eq!(a.len(), rows * cols);
    debug_assert_eq!(b.len(), rows * cols);
    let sa = svd(a, rows, cols);
    let sb = svd(b, rows, cols);
    let paired: f64 = sa
        .sigma
        .iter()
        .zip(&sb.sigma)
        .map(|(x, y)| x * y)
        .sum();
    let trace: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    paired - trace
}

// ---------------------------------------------------------------------------
// Norm helpers and ball projections
// ---------------------------------------------------------------------------

fn frobenius_norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn lp_norm(v: &[f64], p: f64) -> f64 {
    v.iter().map(|x| x.abs().powf(p)).sum::<f64>().powf(1.0 / p)
}

/// Inner `p`-norm over rows within each column, outer `q`-norm across columns.
fn lpq_norm(a: &[f64], rows: usize, cols: usize, p: f64, q: f64) -> f64 {
    let mut outer = 0.0;
    for c in 0..cols {
        let mut inner = 0.0;
        for r in 0..rows {
            inner += a[r * cols + c].abs().powf(p);
        }
        outer += inner.powf(q / p);
    }
    outer.powf(1.0 / q)
}

/// Numerically stable `log(sum exp s_i)`.
fn log_sum_exp(s: &[f64]) -> f64 {
    let m = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    m + s.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Projects a nonincreasing nonnegative vector onto the l1 ball of the given
/// radius by the classical sort-and-threshold rule.
fn project_sorted_l1(sig: &mut [f64], radius: f64) {
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (k, &s) in sig.iter().enumerate() {
        cumsum += s;
        let cand = (cumsum - radius) / (k + 1) as f64;
        if s > cand {
            theta = cand;
        }
    }
    for s in sig.iter_mut() {
        *s = (*s - theta).max(0.0);
    }
}

/// Scalar solve of `s + c * s^(p-1) = target` for `s` in `[0, target]`
/// (increasing left-hand side), by safeguarded Newton.
pub(crate) fn shrink_scalar(target: f64, c: f64, p: f64) -> f64 {
    if target <= 0.0 || c == 0.0 {
        return target.max(0.0);
    }
    let f = |s: f64| s + c * s.powf(p - 1.0) - target;
    let mut lo = 0.0;
    let mut hi = target;
    let mut s = target / (1.0 + c * target.powf(p - 2.0)).max(1.0);
    if !(s > lo && s < hi) {
        s = 0.5 * hi;
    }
    for _ in 0..200 {
        let fs = f(s);
        if fs.abs() <= 1e-15 * (1.0 + target) {
            return s;
        }
        if fs > 0.0 {
            hi = s;
        } else {
            lo = s;
        }
        let deriv = 1.0 + c * (p - 1.0) * s.powf(p - 2.0);
        let mut next = s - fs / deriv;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if (hi - lo) <= 1e-16 * (1.0 + target) {
            return 0.5 * (lo + hi);
        }
        s = next;
    }
    0.5 * (lo + hi)
}

/// Projects a nonnegative vector onto the lp ball of the given radius, for
/// an exponent in (1, oo), via Newton iteration on the radial Lagrange
/// multiplier (tolerance 1e-12, at most 100 iterations, bisection fallback).
fn project_lp_ball(v: &mut [f64], p: f64, radius: f64) -> Result<()> {
    let target = radius.powf(p);
    let excess = |lam: f64, out: Option<&mut [f64]>| -> f64 {
        let mut sum = 0.0;
        let mut buf = [0.0; 8];
        debug_assert!(v.len() <= buf.len());
        for (i, &vi) in v.iter().enumerate() {
            let s = shrink_scalar(vi, lam * p, p);
            buf[i] = s;
            sum += s.powf(p);
        }
        if let Some(out) = out {
            out.copy_from_slice(&buf[..v.len()]);
        }
        sum - target
    };

    // Bracket the multiplier: excess(0) > 0 (caller checked infeasibility).
    let mut lo = 0.0;
    let mut hi = 1.0;
    let mut grow = 0;
    while excess(hi, None) > 0.0 {
        lo = hi;
        hi *= 4.0;
        grow += 1;
        if grow > 200 {
            return Err(Error::Numerical(
                "lp-ball projection failed to bracket the multiplier".into(),
            ));
        }
    }

    let mut lam = 0.5 * (lo + hi);
    for _ in 0..100 {
        let g = excess(lam, None);
        if g > 0.0 {
            lo = lam;
        } else {
            hi = lam;
        }
        if g.abs() <= 1e-14 * (1.0 + target) || (hi - lo) <= 1e-12 * (1.0 + lam) {
            break;
        }
        // Newton step on g(lam) with a numerically differenced slope;
        // fall back to bisection when it exits the bracket.
        let dl = 1e-6 * (1.0 + lam);
        let slope = (excess(lam + dl, None) - g) / dl;
        let mut next = if slope < 0.0 { lam - g / slope } else { f64::NAN };
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        lam = next;
    }
    let mut out = vec![0.0; v.len()];
    excess(lam, Some(&mut out));
    v.copy_from_slice(&out);
    Ok(())
}

/// Prox of `b -> lam * ||b||_p^q` for one column, with `p, q` in (1, oo).
///
/// The stationarity system couples the coordinates only through
/// `S = sum |b_i|^p`; for fixed `S` each coordinate solves a monotone
/// scalar equation, and `S` itself is pinned down by a bracketed scan.
fn column_power_prox(col: &mut [f64], lam: f64, p: f64, q: f64) {
    let vnorm_p: f64 = col.iter().map(|x| x.abs().powf(p)).sum();
    if vnorm_p == 0.0 || lam == 0.0 {
        return;
    }
    let coeff = |s: f64| lam * q * s.powf((q - p) / p);
    let shrunk_sum = |s: f64| -> f64 {
        let c = coeff(s);
        col.iter()
            .map(|&vi| shrink_scalar(vi.abs(), c, p).powf(p))
            .sum()
    };
    // Find the fixed point S = sum |b_i(S)|^p in (0, vnorm_p].
    let mut hi = vnorm_p;
    let mut lo = vnorm_p;
    let mut found = false;
    for _ in 0..1100 {
        lo *= 0.5;
        if lo < 1e-280 {
            break;
        }
        if shrunk_sum(lo) - lo > 0.0 {
            found = true;
            break;
        }
        hi = lo;
    }
    if !found {
        // The prox target is indistinguishable from zero.
        col.iter_mut().for_each(|x| *x = 0.0);
        return;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if shrunk_sum(mid) - mid > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo) <= 1e-14 * (1.0 + hi) {
            break;
        }
    }
    let s_star = 0.5 * (lo + hi);
    let c = coeff(s_star);
    for x in col.iter_mut() {
        let mag = shrink_scalar(x.abs(), c, p);
        *x = mag.copysign(*x);
    }
}

/// Projects a matrix onto the mixed `l^{p,q}` ball of the given radius
/// (inner `p`-norm per column, outer `q`-norm across columns) by a nested
/// multiplier search: the outer Lagrange multiplier is bracketed and
/// bisected, and each evaluation solves the per-column power prox.
fn project_mixed_ball(
    a: &mut [f64],
    rows: usize,
    cols: usize,
    p: f64,
    q: f64,
    radius: f64,
) -> Result<()> {
    let col_norms = |mat: &[f64]| -> f64 {
        let mut outer = 0.0;
        for c in 0..cols {
            let mut inner = 0.0;
            for r in 0..rows {
                inner += mat[r * cols + c].abs().powf(p);
            }
            outer += inner.powf(q / p);
        }
        outer
    };
    let target = radius.powf(q);
    if col_norms(a) <= target {
        return Ok(());
    }
    let original = a.to_vec();
    let mut colbuf = vec![0.0; rows];
    let mut eval = |lam: f64, a: &mut [f64]| -> f64 {
        a.copy_from_slice(&original);
        for c in 0..cols {
            for r in 0..rows {
                colbuf[r] = a[r * cols + c];
            }
            column_power_prox(&mut colbuf, lam, p, q);
            for r in 0..rows {
                a[r * cols + c] = colbuf[r];
            }
        }
        col_norms(a) - target
    };

    let mut lo = 0.0;
    let mut hi = 1.0;
    let mut grow = 0;
    while eval(hi, a) > 0.0 {
        lo = hi;
        hi *= 4.0;
        grow += 1;
        if grow > 200 {
            return Err(Error::Numerical(
                "mixed-ball projection failed to bracket the multiplier".into(),
            ));
        }
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if eval(mid, a) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo) <= 1e-12 * (1.0 + hi) {
            break;
        }
    }
    let lam = 0.5 * (lo + hi);
    eval(lam, a);
    Ok(())
}
