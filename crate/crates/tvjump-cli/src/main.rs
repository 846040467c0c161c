//! `tvjump` — vectorial total-variation denoising and jump-set analysis
//! over PGM/PPM images: denoising runs, second-order runs, jump detection
//! to CSV, quantitative verification suites, and a self-contained
//! reproduction pipeline.
//!
//! Exit codes: 0 on success, 1 on operational errors and failed
//! verification suites, 2 when a request is refused as out of scope
//! (non-homogeneous regularizer, exact second-order model).

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

use tvjump_cli::config::Params;
use tvjump_cli::{commands, suites};

#[derive(Parser, Debug)]
#[command(name = "tvjump", version, about = "Vectorial TV denoising and jump-set analysis")]
struct Cli {
    /// Worker threads, 0 = auto; the TVJUMP_THREADS variable is honored
    /// when the flag is absent.
    #[arg(long, global = true)]
    threads: Option<String>,
    /// Flat `key = value` config file; command-line flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Log solver progress at each gap evaluation.
    #[arg(long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Denoise an image with a matrix-norm total variation.
    Denoise {
        input: PathBuf,
        output: PathBuf,
        #[command(flatten)]
        flags: DenoiseFlags,
    },
    /// Denoise with the smoothed second-order (slope-field) model.
    Tgv {
        input: PathBuf,
        output: PathBuf,
        #[command(flatten)]
        flags: TgvFlags,
    },
    /// Detect jumps and write one profiled edge per CSV row.
    Jumps {
        input: PathBuf,
        /// Output CSV path.
        output: PathBuf,
        /// Optional noisy-data image; the input is profiled against it
        /// (defaults to profiling the input against itself).
        #[arg(long)]
        data: Option<PathBuf>,
        #[command(flatten)]
        flags: JumpsFlags,
    },
    /// Run a named verification suite and report pass/fail.
    Verify {
        /// One of: rof1d, inclusion2d, maxprinciple, innervar, vonneumann,
        /// tgv.
        #[arg(long)]
        suite: String,
        /// Also write the report to this path.
        #[arg(long)]
        report: Option<PathBuf>,
        #[command(flatten)]
        flags: SolverFlags,
    },
    /// Noise an image, denoise it with three regularizers, and report
    /// edge oscillation (images + CSV into --outdir).
    Reproduce {
        /// Output directory (created if missing).
        #[arg(long)]
        outdir: PathBuf,
        /// Optional input image; a synthetic disk scene is used otherwise.
        #[arg(long)]
        input: Option<PathBuf>,
        #[command(flatten)]
        flags: ReproduceFlags,
    },
}

/// Each flag mirrors one config key; values are applied through the same
/// parser as the config file, so precedence and validation are uniform.
macro_rules! flags_struct {
    ($name:ident { $( $(#[$doc:meta])* ($field:ident, $key:literal, $arg:literal) ),+ $(,)? }) => {
        #[derive(Args, Debug)]
        struct $name {
            $(
                $(#[$doc])*
                #[arg(long = $arg, value_name = "VALUE")]
                $field: Option<String>,
            )+
        }

        impl $name {
            fn apply(&self, params: &mut Params) -> Result<()> {
                $(
                    if let Some(v) = &self.$field {
                        params
                            .apply($key, v)
                            .with_context(|| format!("flag --{}", $arg))?;
                    }
                )+
                Ok(())
            }
        }
    };
}

flags_struct!(DenoiseFlags {
    /// Regularizer family: frobenius, nuclear, spectral, schatten:<p>,
    /// lpq:<p>,<q>, logsumexp.
    (reg, "reg", "reg"),
    /// Regularizer weight.
    (alpha, "alpha", "alpha"),
    /// Fidelity: l2 or huber:<delta>.
    (fidelity, "fidelity", "fidelity"),
    /// Per-channel box constraint `lo,hi` (or none).
    (boxc, "box", "box"),
    /// Solver gap tolerance.
    (tol, "tol", "tol"),
    /// Solver iteration cap.
    (iters, "iters", "iters"),
    /// Grid spacing (0 = unit extent along the longest side).
    (spacing, "spacing", "spacing"),
    /// Output sample depth: 255 or 65535.
    (maxval, "maxval", "maxval"),
});

flags_struct!(TgvFlags {
    /// First-order family (weights come from alpha1/alpha2).
    (reg1, "reg", "reg1"),
    /// Second-order penalty: power:<p> or huber:<delta>.
    (rho2, "rho2", "rho2"),
    /// Weight of the first-order (gradient minus slope) term.
    (alpha1, "alpha1", "alpha1"),
    /// Weight of the second-order (slope gradient) term.
    (alpha2, "alpha2", "alpha2"),
    /// Penalize the symmetrized slope gradient: true or false.
    (symmetrized, "symmetrized", "symmetrized"),
    /// Fidelity: l2 or huber:<delta>.
    (fidelity, "fidelity", "fidelity"),
    /// Per-channel box constraint `lo,hi` (or none).
    (boxc, "box", "box"),
    /// Solver gap tolerance.
    (tol, "tol", "tol"),
    /// Solver iteration cap.
    (iters, "iters", "iters"),
    /// Grid spacing (0 = unit extent along the longest side).
    (spacing, "spacing", "spacing"),
    /// Output sample depth: 255 or 65535.
    (maxval, "maxval", "maxval"),
});

flags_struct!(JumpsFlags {
    /// Comma-separated probe sizes (defaults to 16h,8h,4h).
    (tau_list, "tau_list", "tau-list"),
    /// Number of probe directions over the half circle.
    (directions, "directions", "directions"),
    /// Detection threshold (0 = a tenth of the dynamic range).
    (threshold, "threshold", "threshold"),
    /// Edge-profile standoff distance (0 = three grid steps).
    (offset, "offset", "offset"),
    /// Slack for the per-edge inequality verdict.
    (slack, "slack", "slack"),
    /// Fidelity weighting the profile averages: l2 or huber:<delta>.
    (fidelity, "fidelity", "fidelity"),
    /// Grid spacing (0 = unit extent along the longest side).
    (spacing, "spacing", "spacing"),
});

flags_struct!(SolverFlags {
    /// Solver gap tolerance override for the suite.
    (tol, "tol", "tol"),
    /// Solver iteration cap override for the suite.
    (iters, "iters", "iters"),
});

flags_struct!(ReproduceFlags {
    /// Noise level added to the clean scene.
    (noise, "noise", "noise"),
    /// Seed for the noise stream.
    (seed, "seed", "seed"),
    /// Regularizer weight shared by the three runs.
    (alpha, "alpha", "alpha"),
    /// Solver gap tolerance.
    (tol, "tol", "tol"),
    /// Solver iteration cap.
    (iters, "iters", "iters"),
    /// Comma-separated probe sizes for edge detection.
    (tau_list, "tau_list", "tau-list"),
    /// Number of probe directions over the half circle.
    (directions, "directions", "directions"),
    /// Output sample depth: 255 or 65535.
    (maxval, "maxval", "maxval"),
    /// Grid spacing (0 = unit extent along the longest side).
    (spacing, "spacing", "spacing"),
});

/// Builds the run parameters: defaults, then the config file, then the
/// environment, then flags.
fn build_params(cli: &Cli, apply_flags: impl FnOnce(&mut Params) -> Result<()>) -> Result<Params> {
    let mut params = Params::default();
    if let Some(path) = &cli.config {
        params.load_file(path)?;
    }
    if let Ok(threads) = std::env::var("TVJUMP_THREADS") {
        params
            .apply("threads", threads.trim())
            .context("environment variable TVJUMP_THREADS")?;
    }
    if let Some(threads) = &cli.threads {
        params.apply("threads", threads).context("flag --threads")?;
    }
    if cli.verbose {
        params.apply("verbose", "true")?;
    }
    apply_flags(&mut params)?;
    if params.threads > 0 {
        // A later build_global for the same pool size is fine to ignore;
        // the pool can only be installed once per process.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(params.threads)
            .build_global();
    }
    Ok(params)
}

fn run(cli: Cli) -> Result<u8> {
    match &cli.command {
        Command::Denoise {
            input,
            output,
            flags,
        } => {
            let params = build_params(&cli, |p| flags.apply(p))?;
            commands::cmd_denoise(input, output, &params)?;
            Ok(0)
        }
        Command::Tgv {
            input,
            output,
            flags,
        } => {
            let params = build_params(&cli, |p| flags.apply(p))?;
            commands::cmd_tgv(input, output, &params)?;
            Ok(0)
        }
        Command::Jumps {
            input,
            output,
            data,
            flags,
        } => {
            let params = build_params(&cli, |p| flags.apply(p))?;
            commands::cmd_jumps(input, data.as_deref(), output, &params)?;
            Ok(0)
        }
        Command::Verify {
            suite,
            report,
            flags,
        } => {
            let params = build_params(&cli, |p| flags.apply(p))?;
            let (kv, all_pass) = suites::run_suite(suite, &params)?;
            print!("{}", kv.render());
            if let Some(path) = report {
                kv.write(path)?;
            }
            Ok(if all_pass { 0 } else { 1 })
        }
        Command::Reproduce {
            outdir,
            input,
            flags,
        } => {
            let params = build_params(&cli, |p| flags.apply(p))?;
            commands::cmd_reproduce(input.as_deref(), outdir, &params)?;
            Ok(0)
        }
    }
}

/// Refusals of declared-out-of-scope requests get their own exit code.
fn is_refusal(err: &anyhow::Error) -> bool {
    matches!(
        err.downcast_ref::<tvjump::Error>(),
        Some(tvjump::Error::UnsupportedRegularizer(_)) | Some(tvjump::Error::ExactTgvOutOfScope(_))
    )
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(if is_refusal(&err) { 2u8 } else { 1u8 })
        }
    }
}
