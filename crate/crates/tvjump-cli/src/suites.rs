//! The `verify` suites: each runs a batch of quantitative checks and emits
//! a `key = value` report ending in `all_pass`.
//!
//! Every suite has pinned tolerances and iteration budgets chosen so the
//! checks pass with a comfortable margin on exact arithmetic grounds; a
//! user-supplied `tol` or `iters` overrides the pinned values, which is
//! also the supported way to demonstrate that the checks really bite
//! (e.g. `--tol 0.1` must make `rof1d` fail).

use anyhow::{bail, Result};
use tvjump::fidelity::Fidelity;
use tvjump::grid::{Direction, GridSpec, VectorField};
use tvjump::innervar::{regularizer_quotient_gap, InnerVariation};
use tvjump::jump::{
    default_threshold, detect_jump_set, edge_profile, estimate_jump_function,
    midpoint_check_1d, verify_inclusion, verify_main_inequality, JumpEstimate,
};
use tvjump::solver::{
    discrete_gradient, max_principle_check, rof_solve, taut_string_1d, tgv_solve,
    tv1d_optimality_residual, SecondOrderFamily, SolverConfig,
};
use tvjump::specnorm::{von_neumann_gap, Family, SpectralRegularizer};
use tvjump::synth::{generate, ImageKind, Noise, RectRegion, SplitMix64, SynthSpec};

use crate::config::Params;
use crate::report::KvReport;

pub const SUITE_NAMES: [&str; 6] = [
    "rof1d",
    "inclusion2d",
    "maxprinciple",
    "innervar",
    "vonneumann",
    "tgv",
];

/// Runs one named suite; the returned flag is the `all_pass` verdict.
pub fn run_suite(name: &str, params: &Params) -> Result<(KvReport, bool)> {
    let mut checks = Checks::new(name);
    match name {
        "rof1d" => suite_rof1d(params, &mut checks)?,
        "inclusion2d" => suite_inclusion2d(params, &mut checks)?,
        "maxprinciple" => suite_maxprinciple(params, &mut checks)?,
        "innervar" => suite_innervar(params, &mut checks)?,
        "vonneumann" => suite_vonneumann(&mut checks),
        "tgv" => suite_tgv(params, &mut checks)?,
        other => bail!(
            "unknown suite {other:?}; expected one of {}",
            SUITE_NAMES.join(", ")
        ),
    }
    Ok(checks.finish())
}

/// Report builder that tracks the conjunction of all posted verdicts.
struct Checks {
    report: KvReport,
    all_pass: bool,
}

impl Checks {
    fn new(suite: &str) -> Self {
        let mut report = KvReport::new();
        report.push("suite", suite);
        Checks {
            report,
            all_pass: true,
        }
    }

    fn metric(&mut self, name: &str, value: f64) {
        self.report.push_f64(name, value);
    }

    fn count(&mut self, name: &str, value: usize) {
        self.report.push(name, value);
    }

    fn check(&mut self, name: &str, pass: bool) {
        self.report.push(name, pass);
        self.all_pass &= pass;
    }

    fn finish(mut self) -> (KvReport, bool) {
        self.report.push("all_pass", self.all_pass);
        (self.report, self.all_pass)
    }
}

fn config_for(spec: &GridSpec, tol: f64, iters: usize) -> SolverConfig {
    let mut cfg = SolverConfig::for_grid(spec);
    cfg.tol_gap = tol;
    cfg.max_iters = iters;
    cfg
}

/// Exact-solver certification, the step-shrinkage law, and the midpoint
/// property, all on one-dimensional scalar signals.
fn suite_rof1d(params: &Params, checks: &mut Checks) -> Result<()> {
    let tol = params.tol_or(1e-10);
    let iters = params.iters_or(60_000);

    // Iterative solver vs the exact taut string on random data.
    let spec = GridSpec::new(&[64], 1.0 / 63.0)?;
    let alphas = [0.05, 0.1, 0.3];
    let mut sup = 0.0f64;
    for seed in 0..20u64 {
        let mut rng = SplitMix64::new(0x0D15EA5E ^ (seed << 7));
        let f = VectorField::from_fn(&spec, 1, |_, out| out[0] = rng.next_f64());
        let alpha = alphas[(seed % 3) as usize];
        let exact = taut_string_1d(&f, alpha)?;
        let rho = SpectralRegularizer::new(Family::Frobenius, alpha)?;
        let cfg = config_for(&spec, tol, iters);
        let (u, _) = rof_solve(&f, &rho, &Fidelity::SquaredL2, &cfg)?;
        sup = sup.max(u.sup_distance(&exact));
    }
    checks.metric("oracle_sup_distance", sup);
    checks.check("oracle_agrees", sup <= 1e-4);

    // The unit step at alpha = 0.1: both plateaus move in by
    // alpha / (half-domain length), so the jump lands at
    // 1 - 2 * 0.1 * 255 / 128 and must stay within the data jump.
    let step_spec = GridSpec::new(&[256], 1.0 / 255.0)?;
    let synth = SynthSpec {
        kind: ImageKind::Step1D {
            levels: vec![vec![0.0], vec![1.0]],
        },
        noise: Noise::None,
    };
    let (f, _) = generate(&synth, &step_spec, 1)?;
    let u = taut_string_1d(&f, 0.1)?;
    let (u_minus, u_plus) = (u.get(127, 0), u.get(128, 0));
    let jump = u_plus - u_minus;
    checks.metric("step_u_minus", u_minus);
    checks.metric("step_u_plus", u_plus);
    checks.metric("step_jump", jump);
    checks.check("step_jump_near_expected", (jump - 0.6).abs() <= 0.02);
    checks.metric("step_magnitude_excess", jump.abs() - 1.0);
    checks.check("step_magnitude_bounded", jump.abs() <= 1.0 + 1e-3);
    let residual = tv1d_optimality_residual(&u, &f, 0.1)?;
    checks.metric("step_optimality_residual", residual);
    checks.check("step_is_minimizer", residual <= 1e-9);

    // Midpoint property on random piecewise-constant signals.
    let mid_spec = GridSpec::new(&[240], 1.0 / 239.0)?;
    let mut worst_margin = f64::INFINITY;
    let mut examined = 0usize;
    for seed in 0..10u64 {
        let mut rng = SplitMix64::new(0x3141_5926 ^ (seed << 5));
        let segments = 3 + (rng.next_u64() % 4) as usize;
        let levels: Vec<Vec<f64>> = (0..segments).map(|_| vec![rng.next_f64()]).collect();
        let synth = SynthSpec {
            kind: ImageKind::Step1D { levels },
            noise: Noise::None,
        };
        let (f, _) = generate(&synth, &mid_spec, 1)?;
        let u = taut_string_1d(&f, 0.02)?;
        let jumps: Vec<usize> = (0..239)
            .filter(|&p| (u.get(p + 1, 0) - u.get(p, 0)).abs() > 1e-9)
            .collect();
        for check in midpoint_check_1d(&u, &f, &jumps)? {
            if !check.vacuous {
                examined += 1;
                worst_margin = worst_margin.min(check.margin);
            }
        }
    }
    checks.count("midpoint_jumps_examined", examined);
    checks.metric("midpoint_worst_margin", worst_margin.min(1e9));
    checks.check(
        "midpoints_between_data_sides",
        examined > 0 && worst_margin >= -1e-3,
    );
    Ok(())
}

/// The disk scene shared by the two-dimensional suites.
fn disk_scene(noise: Noise) -> SynthSpec {
    SynthSpec {
        kind: ImageKind::DiskOnBackground {
            center: [0.5, 0.5],
            radius: 0.28,
            inside: vec![0.85, 0.30, 0.15],
            outside: vec![0.15, 0.60, 0.85],
        },
        noise,
    }
}

/// Truth anchors as degenerate estimates so the coverage helper can score
/// detections against them.
fn truth_anchors(truth: &[tvjump::synth::GroundTruthJump], spec: &GridSpec) -> Vec<JumpEstimate> {
    truth
        .iter()
        .map(|t| {
            let mut x0 = vec![0.0; spec.ndim()];
            spec.point(t.pixel, &mut x0);
            JumpEstimate {
                x0,
                nu_best: t.normal.clone(),
                j_value: 1.0,
                per_direction: Vec::new(),
                tau_used: Vec::new(),
                skipped: Vec::new(),
            }
        })
        .collect()
}

/// Main inequality and jump inclusion on the 128-by-128 disk.
fn suite_inclusion2d(params: &Params, checks: &mut Checks) -> Result<()> {
    // The budget is calibrated for a single core: the quadratic-form
    // slack (1e-2) and the coverage bound are both insensitive to the
    // last digits of the iterate, so the iteration cap, not the
    // tolerance, is the effective stop.
    let tol = params.tol_or(1e-6);
    let iters = params.iters_or(3_000);
    let spec = GridSpec::new(&[128, 128], 1.0 / 127.0)?;
    let h = spec.spacing();
    let (f_clean, truth) = generate(&disk_scene(Noise::None), &spec, 3)?;
    // The interface is curved, so the probes stop at 8h: a 16h cube held
    // tangentially off the ring still catches it poking through near the
    // tangent point and would report a spurious second shell.
    let taus = [8.0 * h, 4.0 * h];
    let directions = Direction::circle(16);
    let anchors = truth_anchors(&truth, &spec);
    let phi = Fidelity::SquaredL2;
    let cfg = config_for(&spec, tol, iters);

    // Clean data: every interior edge profile of the minimizer must obey
    // the quadratic-form inequality.
    for family in [Family::Frobenius, Family::Nuclear] {
        let name = format!("{family:?}").to_lowercase();
        let rho = SpectralRegularizer::new(family, 0.1)?;
        let (u, solve) = rof_solve(&f_clean, &rho, &phi, &cfg)?;
        checks.metric(&format!("{name}_gap"), solve.final_gap);
        let detections = detect_jump_set(&u, default_threshold(&u), &taus, &directions)?;
        let mut profiles = Vec::new();
        for est in &detections {
            match edge_profile(&u, &f_clean, &est.x0, &est.nu_best, &phi, 4.0 * h) {
                Ok(p) => profiles.push(p),
                Err(tvjump::Error::CubeOutOfDomain(_)) => continue,
                Err(e) => return Err(e.into()),
            }
        }
        let report = verify_main_inequality(&profiles, &phi, 1e-2);
        checks.count(&format!("{name}_profiles"), report.total);
        checks.metric(&format!("{name}_worst_residual"), report.worst_residual);
        checks.check(
            &format!("{name}_main_inequality"),
            report.total > 0 && report.all_pass,
        );
    }

    // Oscillating data: the detected jump set of the minimizer must stay
    // inside the one-pixel-dilated true interface.
    let (f_osc, _) = generate(
        &disk_scene(Noise::Oscillation {
            amplitude: 0.1,
            period_px: 2,
        }),
        &spec,
        3,
    )?;
    for family in [Family::Frobenius, Family::Nuclear, Family::Spectral] {
        let name = format!("{family:?}").to_lowercase();
        let rho = SpectralRegularizer::new(family, 0.1)?;
        let (u, _) = rof_solve(&f_osc, &rho, &phi, &cfg)?;
        let detections = detect_jump_set(&u, default_threshold(&u), &taus, &directions)?;
        let coverage = verify_inclusion(&detections, &anchors, 1, h);
        checks.count(&format!("{name}_detections"), detections.len());
        checks.metric(&format!("{name}_coverage"), coverage);
        // No differentiability guarantee backs the purely spectral family;
        // its coverage is reported without a verdict.
        if family != Family::Spectral {
            checks.check(
                &format!("{name}_inclusion"),
                !detections.is_empty() && coverage >= 0.99,
            );
        }
    }

    // Consistency of the direction-probed jump score itself: the
    // clean-step magnitude within ten percent, and exact positive
    // homogeneity under a power-of-two rescaling of the data.
    let probe_spec = GridSpec::new(&[64, 64], 1.0 / 63.0)?;
    let step = VectorField::from_fn(&probe_spec, 1, |idx, out| {
        out[0] = if idx[1] < 32 { 0.2 } else { 0.9 };
    });
    let doubled = VectorField::from_fn(&probe_spec, 1, |idx, out| {
        out[0] = 2.0 * if idx[1] < 32 { 0.2 } else { 0.9 };
    });
    let x0 = [32.0 / 63.0, 31.5 / 63.0];
    let dirs = Direction::circle(16);
    let probe_taus = [8.0 / 63.0, 4.0 / 63.0];
    let est = estimate_jump_function(&step, &x0, &dirs, &probe_taus)?;
    let est2 = estimate_jump_function(&doubled, &x0, &dirs, &probe_taus)?;
    checks.metric("step_j_value", est.j_value);
    checks.check("step_j_within_ten_percent", (est.j_value - 0.7).abs() <= 0.07);
    checks.metric("homogeneity_defect", est2.j_value - 2.0 * est.j_value);
    checks.check("exactly_homogeneous", est2.j_value == 2.0 * est.j_value);
    Ok(())
}

/// Solver outputs stay inside the data's per-channel range across the
/// regularizer-by-fidelity-by-image matrix.
fn suite_maxprinciple(params: &Params, checks: &mut Checks) -> Result<()> {
    let tol = params.tol_or(1e-8);
    let iters = params.iters_or(20_000);
    let spec = GridSpec::new(&[32, 32], 1.0 / 31.0)?;

    let images = [
        (
            "rect",
            SynthSpec {
                kind: ImageKind::PiecewiseConstant2D {
                    background: vec![0.2, 0.7],
                    rects: vec![RectRegion {
                        row0: 8,
                        col0: 10,
                        row1: 22,
                        col1: 26,
                        color: vec![0.9, 0.3],
                    }],
                },
                noise: Noise::None,
            },
            2usize,
        ),
        (
            "disk",
            SynthSpec {
                kind: ImageKind::DiskOnBackground {
                    center: [0.45, 0.55],
                    radius: 0.3,
                    inside: vec![0.8, 0.2, 0.4],
                    outside: vec![0.1, 0.7, 0.6],
                },
                noise: Noise::Gaussian {
                    sigma: 0.1,
                    seed: 2024,
                },
            },
            3usize,
        ),
        (
            "rampstep",
            SynthSpec {
                kind: ImageKind::RampPlusStep {
                    axis: 1,
                    offset: 0.05,
                    slope: 0.4,
                    step_height: 0.5,
                },
                noise: Noise::Oscillation {
                    amplitude: 0.1,
                    period_px: 2,
                },
            },
            1usize,
        ),
    ];
    let families = [
        Family::Frobenius,
        Family::Nuclear,
        Family::Spectral,
        Family::Schatten(1.5),
    ];
    let fidelities = [
        ("l2", Fidelity::SquaredL2),
        ("huber", Fidelity::huber(0.05)?),
    ];

    let mut worst = 0.0f64;
    let mut solves = 0usize;
    let mut ok = true;
    for (image_name, synth, channels) in &images {
        let (f, _) = generate(synth, &spec, *channels)?;
        for family in families {
            let rho = SpectralRegularizer::new(family, 0.1)?;
            for (fid_name, phi) in &fidelities {
                let cfg = config_for(&spec, tol, iters);
                let (u, _) = rof_solve(&f, &rho, phi, &cfg)?;
                let report = max_principle_check(&u, &f, 1e-6)?;
                solves += 1;
                worst = worst.max(report.worst_violation);
                if !report.per_channel_ok.iter().all(|&b| b) {
                    ok = false;
                    checks.report.push(
                        "violation_at",
                        format!("{image_name}/{family:?}/{fid_name}"),
                    );
                }
            }
        }
    }
    checks.count("solves", solves);
    checks.metric("worst_range_violation", worst);
    checks.check("ranges_preserved", ok && solves == 24);
    Ok(())
}

fn smoothstep5(x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    x * x * x * (10.0 + x * (-15.0 + 6.0 * x))
}

/// Largest pixelwise Frobenius norm of the discrete gradient.
fn lipschitz(w: &VectorField) -> f64 {
    let g = discrete_gradient(w);
    let nm = g.rows() * g.cols();
    g.data()
        .chunks_exact(nm)
        .map(|px| px.iter().map(|v| v * v).sum::<f64>().sqrt())
        .fold(0.0, f64::max)
}

fn fitted_slope(gaps: &[(f64, f64)]) -> f64 {
    let (t_hi, g_hi) = gaps[0];
    let (t_lo, g_lo) = gaps[gaps.len() - 1];
    ((g_hi / g_lo).ln()) / ((t_hi / t_lo).ln())
}

/// First-order decay of the inner-variation quotient gap on a resolved
/// two-dimensional step.
fn suite_innervar(_params: &Params, checks: &mut Checks) -> Result<()> {
    // The interface is resolved over a dozen pixels: collapsing it into a
    // single cell would make the resampled energy kink at zero shift and
    // the quotient would stall instead of decaying.
    let n = 96;
    let spec = GridSpec::new(&[n, n], 1.0)?;
    let c0 = (n as f64 - 1.0) / 2.0;
    let lo = [0.2, 0.4, 0.1];
    let hi = [0.8, 0.3, 0.9];
    let w = VectorField::from_fn(&spec, 3, |idx, out| {
        let t = smoothstep5((idx[1] as f64 - c0) / 12.0 + 0.5);
        for c in 0..3 {
            out[c] = lo[c] + t * (hi[c] - lo[c]);
        }
    });
    let nu = Direction::new(&[0.0, 1.0])?;
    let iv = InnerVariation::new(&spec, &nu)?;
    let taus = [0.04, 0.02, 0.01];
    let slack = 2.0 * lipschitz(&w) * spec.spacing();
    checks.metric("gap_floor", -slack);
    for family in [Family::Frobenius, Family::Nuclear, Family::Schatten(1.5)] {
        let name = format!("{family:?}")
            .to_lowercase()
            .replace(['(', ')', '.'], "");
        let rho = SpectralRegularizer::new(family, 1.0)?;
        let gaps = regularizer_quotient_gap(&w, &rho, &iv, &taus)?;
        let min_gap = gaps.iter().map(|&(_, g)| g).fold(f64::INFINITY, f64::min);
        let slope = fitted_slope(&gaps);
        checks.metric(&format!("{name}_min_gap"), min_gap);
        checks.metric(&format!("{name}_slope"), slope);
        checks.check(&format!("{name}_gap_above_floor"), min_gap >= -slack);
        checks.check(&format!("{name}_linear_decay"), slope >= 0.8);
    }
    Ok(())
}

/// Dense row-major product of `a` (n-by-k) and `b` (k-by-m).
fn mat_mul(a: &[f64], b: &[f64], n: usize, k: usize, m: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * m];
    for i in 0..n {
        for l in 0..k {
            let ail = a[i * k + l];
            for j in 0..m {
                out[i * m + j] += ail * b[l * m + j];
            }
        }
    }
    out
}

/// Random n-by-n orthogonal matrix as a product of seeded Givens rotations.
fn random_orthogonal(n: usize, rng: &mut SplitMix64) -> Vec<f64> {
    let mut q = vec![0.0; n * n];
    for i in 0..n {
        q[i * n + i] = 1.0;
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let theta = rng.next_f64() * std::f64::consts::TAU;
            let (s, c) = theta.sin_cos();
            // Rotate rows i and j of q in place.
            for col in 0..n {
                let (qi, qj) = (q[i * n + col], q[j * n + col]);
                q[i * n + col] = c * qi - s * qj;
                q[j * n + col] = s * qi + c * qj;
            }
        }
    }
    q
}

/// Trace pairing against aligned singular values, and unitary invariance
/// of every singular-value-based family.
fn suite_vonneumann(checks: &mut Checks) {
    let mut rng = SplitMix64::new(0x5EED_F00D);
    let mut min_gap = f64::INFINITY;
    for _ in 0..10_000 {
        let rows = 1 + (rng.next_u64() % 4) as usize;
        let cols = 1 + (rng.next_u64() % 4) as usize;
        let a: Vec<f64> = (0..rows * cols).map(|_| rng.next_symmetric() * 3.0).collect();
        let b: Vec<f64> = (0..rows * cols).map(|_| rng.next_symmetric() * 3.0).collect();
        min_gap = min_gap.min(von_neumann_gap(&a, &b, rows, cols));
    }
    checks.metric("min_trace_gap", min_gap);
    checks.check("trace_dominated_by_aligned_sigma", min_gap >= -1e-10);

    let families = [
        Family::Frobenius,
        Family::Nuclear,
        Family::Spectral,
        Family::Schatten(1.5),
        Family::Schatten(3.0),
        Family::LogSumExp,
    ];
    let mut worst = 0.0f64;
    for _ in 0..1_000 {
        let rows = 2 + (rng.next_u64() % 3) as usize;
        let cols = 2 + (rng.next_u64() % 3) as usize;
        let a: Vec<f64> = (0..rows * cols).map(|_| rng.next_symmetric() * 2.0).collect();
        let u = random_orthogonal(rows, &mut rng);
        let v = random_orthogonal(cols, &mut rng);
        let rotated = mat_mul(&mat_mul(&u, &a, rows, rows, cols), &v, rows, cols, cols);
        for family in families {
            let rho = SpectralRegularizer::new(family, 1.0).expect("valid family");
            let diff = (rho.norm(&rotated, rows, cols) - rho.norm(&a, rows, cols)).abs();
            worst = worst.max(diff);
        }
    }
    checks.metric("worst_invariance_defect", worst);
    checks.check("unitarily_invariant", worst <= 1e-10);

    // Cross-check the rotation machinery itself: orthogonality to
    // rounding, so invariance defects cannot hide in a bad rotation.
    let q = random_orthogonal(4, &mut rng);
    let qt: Vec<f64> = (0..16).map(|i| q[(i % 4) * 4 + i / 4]).collect();
    let prod = mat_mul(&q, &qt, 4, 4, 4);
    let mut ortho_defect = 0.0f64;
    for i in 0..4 {
        for j in 0..4 {
            let expect = if i == j { 1.0 } else { 0.0 };
            ortho_defect = ortho_defect.max((prod[i * 4 + j] - expect).abs());
        }
    }
    checks.metric("rotation_orthogonality_defect", ortho_defect);
    checks.check("rotations_orthogonal", ortho_defect <= 1e-12);
}

/// Affine invariance and the step inequality for the smoothed
/// second-order model.
fn suite_tgv(params: &Params, checks: &mut Checks) -> Result<()> {
    let tol = params.tol_or(1e-10);
    let iters = params.iters_or(120_000);

    // A ramp is in the null space: with the slope field absorbing the
    // gradient, the output must reproduce the input.
    let spec = GridSpec::new(&[64], 1.0 / 63.0)?;
    let ramp = VectorField::from_fn(&spec, 1, |idx, out| {
        out[0] = idx[0] as f64 / 63.0;
    });
    let rho1 = SpectralRegularizer::new(Family::Frobenius, 1.0)?;
    let mut cfg = SolverConfig::for_tgv(&spec);
    cfg.tol_gap = tol;
    cfg.max_iters = iters;
    let (u, _z, solve) = tgv_solve(
        &ramp,
        &rho1,
        SecondOrderFamily::HuberNorm(0.01),
        (0.1, 2.0),
        false,
        &cfg,
    )?;
    let ramp_err = u.sup_distance(&ramp);
    checks.metric("ramp_sup_error", ramp_err);
    checks.metric("ramp_energy", solve.primal_energy);
    checks.check("ramp_reproduced", ramp_err <= 1e-3);

    // A step keeps its jump, and the minimizer obeys the same quadratic
    // inequality as the first-order model.
    let step_spec = GridSpec::new(&[128], 1.0 / 127.0)?;
    let f = VectorField::from_fn(&step_spec, 1, |idx, out| {
        out[0] = if idx[0] < 64 { 0.15 } else { 0.85 };
    });
    let mut cfg = SolverConfig::for_tgv(&step_spec);
    cfg.tol_gap = params.tol_or(1e-9);
    cfg.max_iters = iters;
    let (u, _z, _) = tgv_solve(
        &f,
        &rho1,
        SecondOrderFamily::HuberNorm(0.01),
        (0.1, 0.15),
        true,
        &cfg,
    )?;
    let h = step_spec.spacing();
    let x0 = [63.5 * h];
    let nu = Direction::new(&[1.0])?;
    let phi = Fidelity::SquaredL2;
    let profile = edge_profile(&u, &f, &x0, &nu, &phi, 3.0 * h)?;
    let report = verify_main_inequality(std::slice::from_ref(&profile), &phi, 1e-2);
    checks.metric("step_lhs", profile.lhs);
    checks.metric("step_rhs", profile.rhs);
    checks.metric("step_worst_residual", report.worst_residual);
    checks.check("step_main_inequality", report.all_pass);

    // The exact (power-one, unsmoothed) second-order model is declared
    // out of reach rather than silently approximated.
    let refused = tgv_solve(
        &f,
        &rho1,
        SecondOrderFamily::PowerNorm(1.0),
        (0.1, 0.15),
        true,
        &cfg,
    );
    let is_refusal = matches!(refused, Err(tvjump::Error::ExactTgvOutOfScope(_)));
    checks.check("power_one_refused", is_refusal);
    Ok(())
}
