//! Exact solver for the 1D scalar problem
//! `min_u (alpha/h) * sum |u_{i+1} - u_i| + 1/2 sum (u_i - f_i)^2`,
//! which is the discrete energy of this module divided by the cell measure
//! `h`. Being exact (up to rounding), it serves as the oracle against which
//! the iterative solver is validated.
//!
//! The method is dynamic programming on derivatives. Let
//! `B_i(x) = min over u_0..u_{i-1}` of the partial energy with `u_i = x`.
//! Each `B_i` is convex piecewise quadratic, so its derivative is a
//! piecewise-linear nondecreasing function, representable by breakpoints.
//! Passing from `B_{i-1}` to `B_i` clamps the derivative to `[-lambda,
//! lambda]` (the effect of `min_w B_{i-1}(w) + lambda |x - w|`) and then
//! adds the data term `x - f_i`. The clamp interval of each step is the
//! backward recursion: `u_{i-1} = clamp(u_i, lo_i, hi_i)`.
//!
//! After the clamp every segment is flat or increasing, and adding the data
//! term raises all slopes by one, so the derivative is strictly increasing
//! with slopes at least 1 everywhere and all crossings below are unique and
//! well-conditioned (`|dx| <= |dg|`).

use std::collections::VecDeque;

use crate::grid::VectorField;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy)]
struct Node {
    /// Breakpoint position.
    x: f64,
    /// Derivative value at the breakpoint.
    g: f64,
}

fn check_1d_scalar(f: &VectorField) -> Result<()> {
    if f.spec().ndim() != 1 || f.channels() != 1 {
        return Err(Error::InvalidArgument(format!(
            "taut-string oracle needs a 1D scalar field, got {}D with {} channels",
            f.spec().ndim(),
            f.channels()
        )));
    }
    Ok(())
}

/// Exact minimizer of the 1D scalar discrete energy at weight `alpha`.
pub fn taut_string_1d(f: &VectorField, alpha: f64) -> Result<VectorField> {
    check_1d_scalar(f)?;
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "taut-string weight must be positive, got {alpha}"
        )));
    }
    let n = f.spec().pixel_count();
    if n == 1 {
        return Ok(f.clone());
    }
    let lam = alpha / f.spec().spacing();
    let fd = f.data();

    // Derivative of B_0: the line x - f_0.
    let mut deriv: VecDeque<Node> = VecDeque::with_capacity(2 * n);
    deriv.push_back(Node { x: fd[0], g: 0.0 });
    // Clamp interval per step, filled for i = 1..n.
    let mut clamps = vec![(0.0, 0.0); n];

    for i in 1..n {
        // Lower clamp: the unique x with derivative -lam. Tail slopes are
        // exactly 1, interior slopes at least 1.
        let xlo = if deriv[0].g > -lam {
            deriv[0].x - (deriv[0].g + lam)
        } else {
            let mut prev = deriv.pop_front().unwrap();
            loop {
                match deriv.front() {
                    Some(nd) if nd.g <= -lam => {
                        prev = deriv.pop_front().unwrap();
                    }
                    Some(nd) => {
                        break prev.x + (-lam - prev.g) * (nd.x - prev.x) / (nd.g - prev.g);
                    }
                    None => break prev.x + (-lam - prev.g),
                }
            }
        };
        deriv.push_front(Node { x: xlo, g: -lam });

        // Upper clamp, symmetric from the right; the node just inserted has
        // derivative -lam < lam, so the deque cannot drain.
        let back = *deriv.back().unwrap();
        let xhi = if back.g < lam {
            back.x + (lam - back.g)
        } else {
            let mut prev = deriv.pop_back().unwrap();
            loop {
                match deriv.back() {
                    Some(nd) if nd.g >= lam => {
                        prev = deriv.pop_back().unwrap();
                    }
                    Some(nd) => {
                        break nd.x + (lam - nd.g) * (prev.x - nd.x) / (prev.g - nd.g);
                    }
                    None => unreachable!("front node sits below the upper clamp level"),
                }
            }
        };
        deriv.push_back(Node { x: xhi, g: lam });
        clamps[i] = (xlo, xhi);

        // Data term: derivative gains x - f_i.
        for nd in deriv.iter_mut() {
            nd.g += nd.x - fd[i];
        }
    }

    // Root of the final derivative = last sample of the minimizer.
    let root = {
        let first = deriv[0];
        if first.g >= 0.0 {
            first.x - first.g
        } else {
            let mut prev = first;
            let mut found = None;
            for &nd in deriv.iter().skip(1) {
                if nd.g >= 0.0 {
                    found = Some(prev.x + (0.0 - prev.g) * (nd.x - prev.x) / (nd.g - prev.g));
                    break;
                }
                prev = nd;
            }
            found.unwrap_or(prev.x - prev.g)
        }
    };

    let mut u = vec![0.0; n];
    u[n - 1] = root;
    for i in (1..n).rev() {
        u[i - 1] = u[i].clamp(clamps[i].0, clamps[i].1);
    }
    VectorField::from_data(f.spec(), 1, u)
}

/// Optimality certificate for the 1D problem, independent of how a
/// candidate minimizer was produced.
///
/// Summing the stationarity conditions yields running multipliers
/// `t_i = t_{i-1} + (u_i - f_i) * h / alpha` with `t_{-1} = 0`; a minimizer
/// is characterized by `|t_i| <= 1` for `i < N-1`, `t_{N-1} = 0`, and
/// `t_i = sign(u_{i+1} - u_i)` wherever `u` jumps. The returned residual is
/// the worst violation of those three conditions; it is zero (to rounding)
/// exactly at the minimizer.
///
/// Pixels where `|u_{i+1} - u_i|` is below `1e-9 * (1 + max|u|)` are
/// treated as flat, so the certificate expects an (essentially) exact
/// candidate such as the taut-string output.
pub fn tv1d_optimality_residual(u: &VectorField, f: &VectorField, alpha: f64) -> Result<f64> {
    check_1d_scalar(u)?;
    check_1d_scalar(f)?;
    super::ops::check_same_shape(u, f)?;
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "weight must be positive, got {alpha}"
        )));
    }
    let n = u.spec().pixel_count();
    let lam = alpha / u.spec().spacing();
    let ud = u.data();
    let fd = f.data();
    let scale = ud.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let jump_tol = 1e-9 * (1.0 + scale);

    let mut t = 0.0;
    let mut worst = 0.0f64;
    for i in 0..n {
        t += (ud[i] - fd[i]) / lam;
        if i + 1 < n {
            worst = worst.max(t.abs() - 1.0);
            let step = ud[i + 1] - ud[i];
            if step.abs() > jump_tol {
                worst = worst.max((t - step.signum()).abs());
            }
        } else {
            worst = worst.max(t.abs());
        }
    }
    Ok(worst.max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fidelity::Fidelity;
    use crate::grid::GridSpec;
    use crate::solver::ops::energy;
    use crate::solver::{rof_solve, SolverConfig};
    use crate::specnorm::{Family, SpectralRegularizer};

    fn splitmix(state: &mut u64) -> f64 {
        *state = state.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = *state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^= z >> 31;
        (z >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
    }

    fn grid(n: usize) -> GridSpec {
        GridSpec::new(&[n], 1.0 / (n as f64 - 1.0)).unwrap()
    }

    fn random_signal(n: usize, seed: u64) -> VectorField {
        let spec = grid(n);
        let mut s = seed;
        let mut f = VectorField::zeros(&spec, 1);
        for v in f.data_mut() {
            *v = splitmix(&mut s);
        }
        f
    }

    fn step_signal(n: usize) -> VectorField {
        let spec = grid(n);
        VectorField::from_fn(&spec, 1, |idx, out| {
            out[0] = if idx[0] < n / 2 { 0.0 } else { 1.0 };
        })
    }

    #[test]
    fn constant_signal_is_a_fixed_point() {
        let spec = grid(40);
        let f = VectorField::from_fn(&spec, 1, |_, out| out[0] = 0.7);
        let u = taut_string_1d(&f, 0.2).unwrap();
        assert_eq!(u.sup_distance(&f), 0.0);
        assert!(tv1d_optimality_residual(&u, &f, 0.2).unwrap() <= 1e-12);
    }

    #[test]
    fn two_samples_match_the_closed_form() {
        // For f = (a, b) the solution shrinks the jump by 2*lambda or
        // merges to the mean once lambda >= |b - a| / 2.
        let spec = GridSpec::new(&[2], 1.0).unwrap();
        let f = VectorField::from_data(&spec, 1, vec![0.0, 1.0]).unwrap();
        let u = taut_string_1d(&f, 0.2).unwrap();
        assert!((u.get(0, 0) - 0.2).abs() <= 1e-14);
        assert!((u.get(1, 0) - 0.8).abs() <= 1e-14);
        let merged = taut_string_1d(&f, 0.7).unwrap();
        assert!((merged.get(0, 0) - 0.5).abs() <= 1e-14);
        assert!((merged.get(1, 0) - 0.5).abs() <= 1e-14);
    }

    #[test]
    fn optimality_certificate_holds_on_random_signals() {
        let mut seed = 1000;
        for &n in &[2usize, 3, 5, 17, 64, 256] {
            for rep in 0..30 {
                seed += 1;
                let f = random_signal(n, seed);
                let alpha = [0.01, 0.05, 0.1, 0.3, 1.0][rep % 5];
                let u = taut_string_1d(&f, alpha).unwrap();
                let res = tv1d_optimality_residual(&u, &f, alpha).unwrap();
                assert!(res <= 1e-9, "n={n} rep={rep} alpha={alpha}: residual {res}");
            }
        }
    }

    #[test]
    fn energy_beats_random_perturbations() {
        let rho = SpectralRegularizer::new(Family::Frobenius, 0.1).unwrap();
        let phi = Fidelity::squared_l2();
        let f = random_signal(64, 321);
        let u = taut_string_1d(&f, 0.1).unwrap();
        let e_u = energy(&u, &f, &rho, &phi).unwrap();
        let mut s = 17u64;
        for trial in 0..1000 {
            let scale = [1e-4, 1e-2, 0.3][trial % 3];
            let mut w = u.clone();
            for v in w.data_mut() {
                *v += scale * splitmix(&mut s);
            }
            let e_w = energy(&w, &f, &rho, &phi).unwrap();
            assert!(
                e_u <= e_w + 1e-12 * (1.0 + e_w.abs()),
                "trial {trial}: {e_u} vs {e_w}"
            );
        }
    }

    #[test]
    fn step_merges_at_the_critical_weight() {
        // The symmetric step merges once alpha/h >= N/4, i.e. alpha just
        // above N / (4 (N-1)) ~ 0.2510 for N = 256.
        let n = 256;
        let f = step_signal(n);
        let merged = taut_string_1d(&f, 0.3).unwrap();
        let mean = f.data().iter().sum::<f64>() / n as f64;
        for p in 0..n {
            assert!((merged.get(p, 0) - mean).abs() <= 1e-12, "pixel {p}");
        }
        let kept = taut_string_1d(&f, 0.2).unwrap();
        let jump = kept.get(n / 2, 0) - kept.get(n / 2 - 1, 0);
        assert!(jump > 0.15, "jump collapsed: {jump}");
    }

    #[test]
    fn step_solution_has_the_two_constant_values() {
        let n = 256;
        let f = step_signal(n);
        let u = taut_string_1d(&f, 0.1).unwrap();
        // Exact discrete plateau values: 2 lambda / N and 1 - 2 lambda / N.
        let lam = 0.1 * (n as f64 - 1.0);
        let lo = 2.0 * lam / n as f64;
        for p in 0..n {
            let expected = if p < n / 2 { lo } else { 1.0 - lo };
            assert!(
                (u.get(p, 0) - expected).abs() <= 1e-12,
                "pixel {p}: {} vs {expected}",
                u.get(p, 0)
            );
        }
    }

    #[test]
    fn iterative_solver_agrees_with_the_oracle() {
        let f = random_signal(64, 777);
        let alpha = 0.1;
        let u_exact = taut_string_1d(&f, alpha).unwrap();
        let rho = SpectralRegularizer::new(Family::Frobenius, alpha).unwrap();
        let phi = Fidelity::squared_l2();
        let mut cfg = SolverConfig::for_grid(f.spec());
        cfg.tol_gap = 1e-10;
        cfg.max_iters = 50_000;
        let (u_iter, report) = rof_solve(&f, &rho, &phi, &cfg).unwrap();
        assert!(report.converged);
        let dist = u_iter.sup_distance(&u_exact);
        assert!(dist <= 1e-4, "solvers disagree by {dist}");
    }

    #[test]
    fn degenerate_inputs_are_rejected() {
        let f = random_signal(16, 3);
        assert!(taut_string_1d(&f, 0.0).is_err());
        assert!(taut_string_1d(&f, f64::NAN).is_err());
        let spec2 = GridSpec::new(&[4, 4], 0.25).unwrap();
        let f2 = VectorField::zeros(&spec2, 1);
        assert!(taut_string_1d(&f2, 0.1).is_err());
        let single = VectorField::from_data(&GridSpec::new(&[1], 1.0).unwrap(), 1, vec![0.3]);
        if let Ok(single) = single {
            let u = taut_string_1d(&single, 0.1).unwrap();
            assert_eq!(u.get(0, 0), 0.3);
        }
    }
}
