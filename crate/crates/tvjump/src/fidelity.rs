//! Convex data-fidelity terms: values, gradients, convexity moduli,
//! proximal maps, and the averaged Hessian along a segment.
//!
//! Two families ship.  `SquaredL2` is the strongly convex quadratic
//! `psi(v) = |v|^2 / 2`; `Huber` flattens the quadratic to linear growth
//! outside radius `delta`, trading strong convexity (`lambda = 0`) for a
//! bounded gradient.  Both expose their convexity moduli `(lambda, Lambda)`
//! with `lambda |v-w|^2 <= (Dpsi(v) - Dpsi(w)) . (v-w) <= Lambda |v-w|^2`.

use std::sync::OnceLock;

use crate::{Error, Result};

/// A convex data term acting on per-pixel residual vectors.
#[derive(Debug, Clone, PartialEq)]
pub enum Fidelity {
    /// `psi(v) = |v|^2 / 2`.
    SquaredL2,
    /// `psi(v) = |v|^2 / 2` for `|v| <= delta`, else `delta |v| - delta^2 / 2`.
    Huber { delta: f64 },
}

impl Fidelity {
    pub fn squared_l2() -> Self {
        Fidelity::SquaredL2
    }

    pub fn huber(delta: f64) -> Result<Self> {
        if !(delta.is_finite() && delta > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "Huber radius must be positive, got {delta}"
            )));
        }
        Ok(Fidelity::Huber { delta })
    }

    /// Convexity moduli `(lambda, Lambda)` of the family.
    pub fn moduli(&self) -> (f64, f64) {
        match self {
            Fidelity::SquaredL2 => (1.0, 1.0),
            Fidelity::Huber { .. } => (0.0, 1.0),
        }
    }

    /// Gradient-norm bound, when one exists (the Huber gradient never
    /// exceeds `delta`); also the radius of the conjugate's domain.
    pub fn grad_bound(&self) -> Option<f64> {
        match self {
            Fidelity::SquaredL2 => None,
            Fidelity::Huber { delta } => Some(*delta),
        }
    }

    /// `psi(v)`.
    pub fn value(&self, v: &[f64]) -> f64 {
        let sq: f64 = v.iter().map(|x| x * x).sum();
        match self {
            Fidelity::SquaredL2 => 0.5 * sq,
            Fidelity::Huber { delta } => {
                let norm = sq.sqrt();
                if norm <= *delta {
                    0.5 * sq
                } else {
                    delta * norm - 0.5 * delta * delta
                }
            }
        }
    }

    /// `Dpsi(v)` written into `out`.
    pub fn grad(&self, v: &[f64], out: &mut [f64]) {
        debug_assert_eq!(v.len(), out.len());
        match self {
            Fidelity::SquaredL2 => out.copy_from_slice(v),
            Fidelity::Huber { delta } => {
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                if norm <= *delta {
                    out.copy_from_slice(v);
                } else {
                    let scale = delta / norm;
                    for (o, x) in out.iter_mut().zip(v) {
                        *o = scale * x;
                    }
                }
            }
        }
    }

    /// `argmin_w |w - v|^2 / (2t) + psi(w - f_pixel)`, written into `out`.
    ///
    /// Both families are radial, so the shifted problem reduces to a scalar
    /// shrinkage of `v - f_pixel`.
    pub fn prox(&self, v: &[f64], f_pixel: &[f64], t: f64, out: &mut [f64]) {
        debug_assert_eq!(v.len(), f_pixel.len());
        debug_assert_eq!(v.len(), out.len());
        debug_assert!(t > 0.0);
        match self {
            Fidelity::SquaredL2 => {
                let inv = 1.0 / (1.0 + t);
                for i in 0..v.len() {
                    out[i] = (v[i] + t * f_pixel[i]) * inv;
                }
            }
            Fidelity::Huber { delta } => {
                let mut norm_sq = 0.0;
                for i in 0..v.len() {
                    let d = v[i] - f_pixel[i];
                    out[i] = d;
                    norm_sq += d * d;
                }
                let norm = norm_sq.sqrt();
                if norm <= delta * (1.0 + t) {
                    let inv = 1.0 / (1.0 + t);
                    for (o, f) in out.iter_mut().zip(f_pixel) {
                        *o = f + *o * inv;
                    }
                } else {
                    let scale = 1.0 - t * delta / norm;
                    for (o, f) in out.iter_mut().zip(f_pixel) {
                        *o = f + *o * scale;
                    }
                }
            }
        }
    }

    /// Convex conjugate `psi*(y)`; `+inf` outside the Huber domain
    /// `|y| <= delta`.
    pub fn conjugate(&self, y: &[f64]) -> f64 {
        let sq: f64 = y.iter().map(|x| x * x).sum();
        match self {
            Fidelity::SquaredL2 => 0.5 * sq,
            Fidelity::Huber { delta } => {
                if sq.sqrt() <= delta * (1.0 + 1e-12) {
                    0.5 * sq
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    /// Averaged Hessian `A = int_0^1 D^2 psi(a + s (b - a)) ds`, an
    /// n-by-n symmetric PSD matrix in row-major order.
    ///
    /// When the whole segment stays strictly inside the quadratic region
    /// (always, for `SquaredL2`; `max(|a|, |b|) < delta` for Huber, since
    /// the norm along a segment peaks at an endpoint) the integral is the
    /// identity and is returned exactly.  Otherwise it is computed by
    /// 32-point Gauss-Legendre quadrature of the piecewise Hessian, split
    /// where `|a + s (b - a)|` crosses `delta` (the Hessian is analytic
    /// between those crossings, so the rule keeps spectral accuracy).
    pub fn averaged_hessian(&self, a: &[f64], b: &[f64]) -> Vec<f64> {
        debug_assert_eq!(a.len(), b.len());
        let n = a.len();
        let identity = |out: &mut [f64]| {
            for i in 0..n {
                out[i * n + i] = 1.0;
            }
        };
        let mut mat = vec![0.0; n * n];
        match self {
            Fidelity::SquaredL2 => identity(&mut mat),
            Fidelity::Huber { delta } => {
                let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
                let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
                if na.max(nb) < *delta {
                    identity(&mut mat);
                } else {
                    let (nodes, weights) = gauss_legendre_32();
                    // Branch crossings: |a + s d|^2 = delta^2 is quadratic
                    // in s, so the segment has at most two of them.
                    let d: Vec<f64> = (0..n).map(|i| b[i] - a[i]).collect();
                    let c0 = a.iter().map(|x| x * x).sum::<f64>() - delta * delta;
                    let c1 = a.iter().zip(&d).map(|(x, y)| x * y).sum::<f64>();
                    let c2 = d.iter().map(|x| x * x).sum::<f64>();
                    let mut cuts = vec![0.0, 1.0];
                    if c2 > 0.0 {
                        let disc = c1 * c1 - c2 * c0;
                        if disc > 0.0 {
                            let root = disc.sqrt();
                            for s in [(-c1 - root) / c2, (-c1 + root) / c2] {
                                if s > 0.0 && s < 1.0 {
                                    cuts.push(s);
                                }
                            }
                        }
                    }
                    cuts.sort_by(|x, y| x.partial_cmp(y).unwrap());
                    let mut point = vec![0.0; n];
                    for pair in cuts.windows(2) {
                        let (lo, len) = (pair[0], pair[1] - pair[0]);
                        if len <= 0.0 {
                            continue;
                        }
                        for (&s, &w) in nodes.iter().zip(weights) {
                            let t = lo + s * len;
                            for i in 0..n {
                                point[i] = a[i] + t * d[i];
                            }
                            accumulate_huber_hessian(&point, *delta, w * len, &mut mat);
                        }
                    }
                    // Exact symmetry regardless of accumulation order.
                    for i in 0..n {
                        for j in 0..i {
                            let avg = 0.5 * (mat[i * n + j] + mat[j * n + i]);
                            mat[i * n + j] = avg;
                            mat[j * n + i] = avg;
                        }
                    }
                }
            }
        }
        mat
    }
}

/// Adds `w * D^2 psi_huber(v)` to `mat`: the identity inside radius
/// `delta`, and `(delta/|v|) (I - vhat vhat^T)` outside.
fn accumulate_huber_hessian(v: &[f64], delta: f64, w: f64, mat: &mut [f64]) {
    let n = v.len();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm < delta {
        for i in 0..n {
            mat[i * n + i] += w;
        }
    } else {
        let scale = w * delta / norm;
        let inv_sq = 1.0 / (norm * norm);
        for i in 0..n {
            for j in 0..n {
                let outer = v[i] * v[j] * inv_sq;
                let kron = if i == j { 1.0 } else { 0.0 };
                mat[i * n + j] += scale * (kron - outer);
            }
        }
    }
}

/// 32-point Gauss-Legendre rule on `[0, 1]`, computed once by Newton
/// iteration on the Legendre polynomial and cached.
fn gauss_legendre_32() -> (&'static [f64; 32], &'static [f64; 32]) {
    static RULE: OnceLock<([f64; 32], [f64; 32])> = OnceLock::new();
    let (nodes, weights) = RULE.get_or_init(|| {
        let n = 32usize;
        let mut nodes = [0.0; 32];
        let mut weights = [0.0; 32];
        for i in 0..(n + 1) / 2 {
            // Chebyshev-based starting guess for the i-th root of P_n.
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut pp = 0.0;
            for _ in 0..100 {
                // Evaluate P_n(x) and P_{n-1}(x) by the three-term recurrence.
                let mut p0 = 1.0;
                let mut p1 = 0.0;
                for j in 0..n {
                    let p2 = p1;
                    p1 = p0;
                    p0 = ((2 * j + 1) as f64 * x * p1 - j as f64 * p2) / (j + 1) as f64;
                }
                pp = n as f64 * (x * p0 - p1) / (x * x - 1.0);
                let dx = p0 / pp;
                x -= dx;
                if dx.abs() < 1e-15 {
                    break;
                }
            }
            // Map from [-1, 1] to [0, 1]; the rule is symmetric.
            nodes[i] = 0.5 * (1.0 - x);
            nodes[n - 1 - i] = 0.5 * (1.0 + x);
            let w = 1.0 / ((1.0 - x * x) * pp * pp);
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        (nodes, weights)
    });
    (nodes, weights)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn splitmix(state: &mut u64) -> u64 {
        *state = state.wrapping_add(0x9E3779B97F4A7C15);
        let mut z = *state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
        z ^ (z >> 31)
    }

    fn unif(state: &mut u64) -> f64 {
        (splitmix(state) >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
    }

    fn rand_vec(state: &mut u64, n: usize, scale: f64) -> Vec<f64> {
        (0..n).map(|_| scale * unif(state)).collect()
    }

    #[test]
    fn values_match_hand_computations() {
        let l2 = Fidelity::squared_l2();
        assert_eq!(l2.value(&[0.0, 0.0]), 0.0);
        assert!((l2.value(&[3.0, 4.0]) - 12.5).abs() < 1e-14);

        let hu = Fidelity::huber(1.0).unwrap();
        // |v| = 5 > 1: delta |v| - delta^2/2 = 5 - 0.5.
        assert!((hu.value(&[3.0, 4.0]) - 4.5).abs() < 1e-14);
        // Inside the radius the families agree.
        assert!((hu.value(&[0.3, 0.4]) - l2.value(&[0.3, 0.4])).abs() < 1e-15);
    }

    #[test]
    fn huber_value_matches_integrated_gradient() {
        // psi(v) - psi(0) as the line integral of the clipped gradient
        // along the ray to v, by fine trapezoid quadrature.
        let hu = Fidelity::huber(0.7).unwrap();
        let mut state = 3u64;
        let mut g = vec![0.0; 3];
        for _ in 0..20 {
            let v = rand_vec(&mut state, 3, 2.0);
            let steps = 20_000;
            let mut acc = 0.0;
            let mut prev = 0.0;
            for k in 0..=steps {
                let s = k as f64 / steps as f64;
                let pt: Vec<f64> = v.iter().map(|x| s * x).collect();
                hu.grad(&pt, &mut g);
                let deriv: f64 = g.iter().zip(&v).map(|(a, b)| a * b).sum();
                if k > 0 {
                    acc += 0.5 * (prev + deriv) / steps as f64;
                }
                prev = deriv;
            }
            assert!(
                (acc - hu.value(&v)).abs() < 1e-7,
                "integral {acc} vs value {}",
                hu.value(&v)
            );
        }
    }

    #[test]
    fn gradient_matches_centered_differences() {
        let mut state = 5u64;
        let fams = [Fidelity::squared_l2(), Fidelity::huber(0.9).unwrap()];
        let mut g = vec![0.0; 3];
        for fam in &fams {
            for _ in 0..100 {
                let mut v = rand_vec(&mut state, 3, 1.5);
                // Keep a margin from the Huber kink circle.
                if let Fidelity::Huber { delta } = fam {
                    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                    if (norm - delta).abs() < 1e-3 {
                        v[0] += 0.01;
                    }
                }
                fam.grad(&v, &mut g);
                let h = 1e-6;
                for i in 0..3 {
                    let mut vp = v.clone();
                    let mut vm = v.clone();
                    vp[i] += h;
                    vm[i] -= h;
                    let fd = (fam.value(&vp) - fam.value(&vm)) / (2.0 * h);
                    assert!(
                        (fd - g[i]).abs() < 1e-6,
                        "{fam:?}: coordinate {i}: {fd} vs {}",
                        g[i]
                    );
                }
            }
        }
    }

    #[test]
    fn moduli_bound_gradient_monotonicity() {
        let mut state = 7u64;
        let fams = [Fidelity::squared_l2(), Fidelity::huber(0.8).unwrap()];
        let mut gv = vec![0.0; 2];
        let mut gw = vec![0.0; 2];
        for fam in &fams {
            let (lambda, cap) = fam.moduli();
            for _ in 0..500 {
                let v = rand_vec(&mut state, 2, 2.0);
                let w = rand_vec(&mut state, 2, 2.0);
                fam.grad(&v, &mut gv);
                fam.grad(&w, &mut gw);
                let diff_sq: f64 = v.iter().zip(&w).map(|(a, b)| (a - b) * (a - b)).sum();
                let pairing: f64 = gv
                    .iter()
                    .zip(&gw)
                    .zip(v.iter().zip(&w))
                    .map(|((ga, gb), (a, b))| (ga - gb) * (a - b))
                    .sum();
                assert!(pairing >= lambda * diff_sq - 1e-12, "{fam:?} lower bound");
                assert!(pairing <= cap * diff_sq + 1e-12, "{fam:?} upper bound");
            }
        }
    }

    /// 1D golden-section minimization of the radial prox objective.
    fn radial_prox_oracle(fam: &Fidelity, dist: f64, t: f64) -> f64 {
        let obj = |r: f64| (r - dist) * (r - dist) / (2.0 * t) + fam.value(&[r]);
        let (mut lo, mut hi) = (0.0f64, dist.max(1e-9));
        let phi = (5f64.sqrt() - 1.0) / 2.0;
        let mut c = hi - phi * (hi - lo);
        let mut d = lo + phi * (hi - lo);
        for _ in 0..200 {
            if obj(c) < obj(d) {
                hi = d;
            } else {
                lo = c;
            }
            c = hi - phi * (hi - lo);
            d = lo + phi * (hi - lo);
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn prox_matches_golden_section_oracle() {
        let mut state = 11u64;
        let fams = [Fidelity::squared_l2(), Fidelity::huber(0.6).unwrap()];
        let mut out = vec![0.0; 2];
        for fam in &fams {
            for _ in 0..100 {
                let v = rand_vec(&mut state, 2, 2.0);
                let f = rand_vec(&mut state, 2, 1.0);
                let t = 0.05 + unif(&mut state).abs() * 3.0;
                fam.prox(&v, &f, t, &mut out);
                // Radial reduction: |out - f| must match the 1D oracle on
                // the distance |v - f|, and out - f must be parallel to v - f.
                let d: Vec<f64> = v.iter().zip(&f).map(|(a, b)| a - b).collect();
                let dist = d.iter().map(|x| x * x).sum::<f64>().sqrt();
                let r = radial_prox_oracle(fam, dist, t);
                let got: Vec<f64> = out.iter().zip(&f).map(|(a, b)| a - b).collect();
                let got_norm = got.iter().map(|x| x * x).sum::<f64>().sqrt();
                assert!(
                    (got_norm - r).abs() < 1e-7,
                    "{fam:?}: radius {got_norm} vs oracle {r}"
                );
                if dist > 1e-9 {
                    let cross = got[0] * d[1] - got[1] * d[0];
                    assert!(cross.abs() < 1e-10 * (1.0 + dist), "not radial");
                }
            }
        }
    }

    #[test]
    fn prox_closed_forms() {
        let l2 = Fidelity::squared_l2();
        let mut out = [0.0];
        // (v + t f) / (1 + t) at v=0, f=1, t=1.
        l2.prox(&[0.0], &[1.0], 1.0, &mut out);
        assert!((out[0] - 0.5).abs() < 1e-15);
        // v = f is a fixed point.
        l2.prox(&[0.7], &[0.7], 2.5, &mut out);
        assert!((out[0] - 0.7).abs() < 1e-15);
        // t -> 0 recovers v.
        l2.prox(&[0.3], &[1.0], 1e-12, &mut out);
        assert!((out[0] - 0.3).abs() < 1e-9);
        // Huber with a huge radius behaves like the quadratic.
        let hu = Fidelity::huber(100.0).unwrap();
        let mut a = [0.0; 2];
        let mut b = [0.0; 2];
        hu.prox(&[0.4, -0.2], &[0.1, 0.1], 0.7, &mut a);
        l2.prox(&[0.4, -0.2], &[0.1, 0.1], 0.7, &mut b);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-14);
        }
    }

    #[test]
    fn prox_is_firmly_nonexpansive() {
        let mut state = 13u64;
        let fams = [Fidelity::squared_l2(), Fidelity::huber(0.5).unwrap()];
        let f = [0.2, -0.1];
        let mut pa = vec![0.0; 2];
        let mut pb = vec![0.0; 2];
        for fam in &fams {
            for _ in 0..500 {
                let a = rand_vec(&mut state, 2, 2.0);
                let b = rand_vec(&mut state, 2, 2.0);
                let t = 0.1 + unif(&mut state).abs() * 2.0;
                fam.prox(&a, &f, t, &mut pa);
                fam.prox(&b, &f, t, &mut pb);
                let dp_sq: f64 = pa.iter().zip(&pb).map(|(x, y)| (x - y) * (x - y)).sum();
                let cross: f64 = pa
                    .iter()
                    .zip(&pb)
                    .zip(a.iter().zip(&b))
                    .map(|((x, y), (u, v))| (x - y) * (u - v))
                    .sum();
                assert!(dp_sq <= cross + 1e-12, "{fam:?}: {dp_sq} > {cross}");
            }
        }
    }

    #[test]
    fn averaged_hessian_identity_shortcuts() {
        let l2 = Fidelity::squared_l2();
        let eye = l2.averaged_hessian(&[5.0, -3.0], &[100.0, 40.0]);
        assert_eq!(eye, vec![1.0, 0.0, 0.0, 1.0]);

        // Huber with the segment strictly inside the quadratic region.
        let hu = Fidelity::huber(10.0).unwrap();
        let eye = hu.averaged_hessian(&[2.0, 1.0], &[-3.0, 0.5]);
        assert_eq!(eye, vec![1.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn averaged_hessian_matches_dense_quadrature_oracle() {
        // The integrand jumps where the segment crosses the Huber radius
        // (identity inside, tangential projector at the boundary), so a
        // dense rule straddling that point is off by O(panel * jump). The
        // oracle therefore locates the crossings itself -- by scanning and
        // bisection, not the closed-form roots the implementation uses --
        // and applies an open midpoint rule to each smooth piece, which
        // never samples the discontinuity.
        let hu = Fidelity::huber(1.0).unwrap();
        let cases = [
            (vec![2.0, 0.0], vec![4.0, 0.0]),
            (vec![0.5, 0.2], vec![3.0, -1.0]),
            (vec![-2.0, 1.0], vec![0.1, 0.3]),
        ];
        for (a, b) in &cases {
            let n = a.len();
            let got = hu.averaged_hessian(a, b);

            let radius = |s: f64| {
                let mut n2 = 0.0;
                for i in 0..n {
                    let v = a[i] + s * (b[i] - a[i]);
                    n2 += v * v;
                }
                n2.sqrt() - 1.0
            };
            let scan = 4096;
            let mut cuts = vec![0.0];
            for k in 0..scan {
                let mut lo = k as f64 / scan as f64;
                let mut hi = (k + 1) as f64 / scan as f64;
                if radius(lo) * radius(hi) < 0.0 {
                    for _ in 0..80 {
                        let mid = 0.5 * (lo + hi);
                        if radius(lo) * radius(mid) <= 0.0 {
                            hi = mid;
                        } else {
                            lo = mid;
                        }
                    }
                    cuts.push(0.5 * (lo + hi));
                }
            }
            cuts.push(1.0);

            let steps = 50_000;
            let mut oracle = vec![0.0; n * n];
            let mut point = vec![0.0; n];
            for pair in cuts.windows(2) {
                let (lo, len) = (pair[0], pair[1] - pair[0]);
                for k in 0..steps {
                    let s = lo + len * (k as f64 + 0.5) / steps as f64;
                    let w = len / steps as f64;
                    for i in 0..n {
                        point[i] = a[i] + s * (b[i] - a[i]);
                    }
                    accumulate_huber_hessian(&point, 1.0, w, &mut oracle);
                }
            }
            for (x, y) in got.iter().zip(&oracle) {
                assert!((x - y).abs() < 1e-8, "{got:?} vs oracle {oracle:?}");
            }
        }
    }

    #[test]
    fn averaged_hessian_is_symmetric_psd_with_moduli_bounds() {
        let mut state = 17u64;
        let fams = [Fidelity::squared_l2(), Fidelity::huber(0.75).unwrap()];
        for fam in &fams {
            let (lambda, cap) = fam.moduli();
            for _ in 0..200 {
                let a = rand_vec(&mut state, 3, 2.0);
                let b = rand_vec(&mut state, 3, 2.0);
                let m = fam.averaged_hessian(&a, &b);
                for i in 0..3 {
                    for j in 0..3 {
                        assert_eq!(m[i * 3 + j], m[j * 3 + i]);
                    }
                }
                for _ in 0..20 {
                    let x = rand_vec(&mut state, 3, 1.0);
                    let xsq: f64 = x.iter().map(|v| v * v).sum();
                    let mut quad = 0.0;
                    for i in 0..3 {
                        for j in 0..3 {
                            quad += x[i] * m[i * 3 + j] * x[j];
                        }
                    }
                    assert!(quad >= lambda * xsq - 1e-10, "{fam:?} below lambda");
                    assert!(quad <= cap * xsq + 1e-10, "{fam:?} above Lambda");
                }
            }
        }
    }

    #[test]
    fn conjugate_values_and_domains() {
        let l2 = Fidelity::squared_l2();
        assert!((l2.conjugate(&[3.0, 4.0]) - 12.5).abs() < 1e-14);
        let hu = Fidelity::huber(1.0).unwrap();
        assert!((hu.conjugate(&[0.6, 0.8]) - 0.5).abs() < 1e-14);
        assert!(hu.conjugate(&[3.0, 4.0]).is_infinite());
        // Fenchel-Young on random pairs inside the domain.
        let mut state = 19u64;
        for _ in 0..200 {
            let v = rand_vec(&mut state, 2, 2.0);
            let mut y = rand_vec(&mut state, 2, 1.0);
            let ny = y.iter().map(|x| x * x).sum::<f64>().sqrt();
            if ny > 1.0 {
                y.iter_mut().for_each(|x| *x *= 0.99 / ny);
            }
            let pairing: f64 = v.iter().zip(&y).map(|(a, b)| a * b).sum();
            assert!(hu.value(&v) + hu.conjugate(&y) >= pairing - 1e-12);
        }
    }

    #[test]
    fn invalid_huber_radius_is_rejected() {
        assert!(Fidelity::huber(0.0).is_err());
        assert!(Fidelity::huber(-1.0).is_err());
        assert!(Fidelity::huber(f64::NAN).is_err());
    }

    #[test]
    fn gauss_legendre_rule_integrates_polynomials_exactly() {
        let (nodes, weights) = gauss_legendre_32();
        // Exact for degree <= 63; check a few moments on [0, 1].
        for k in [0usize, 1, 2, 7, 20, 45, 63] {
            let got: f64 = nodes
                .iter()
                .zip(weights)
                .map(|(&x, &w)| w * x.powi(k as i32))
                .sum();
            let expect = 1.0 / (k as f64 + 1.0);
            assert!((got - expect).abs() < 1e-13, "moment {k}: {got} vs {expect}");
        }
    }
}
