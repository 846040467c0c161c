//! Flat `key = value` run parameters shared by every subcommand.
//!
//! Each parameter has a default; a config file may override any subset;
//! command-line flags override the file. Unknown keys are errors so typos
//! surface instead of silently running with defaults.

use anyhow::{bail, Context, Result};
use std::fmt::Write as _;
use std::path::Path;
use tvjump::fidelity::Fidelity;
use tvjump::solver::SecondOrderFamily;
use tvjump::specnorm::{Family, SpectralRegularizer};

use crate::pnm::MaxVal;

/// Every tunable the commands accept, in one place.
#[derive(Debug, Clone)]
pub struct Params {
    /// Grid step; 0 means "longest image side spans the unit interval".
    pub spacing: f64,
    /// First-order regularizer family, e.g. `frobenius` or `schatten:1.5`.
    pub reg: String,
    /// First-order regularizer weight.
    pub alpha: f64,
    /// Fidelity: `l2` or `huber:<delta>`.
    pub fidelity: String,
    /// Per-channel box constraint `lo,hi`, or `none`.
    pub boxc: String,
    /// Solver gap tolerance.
    pub tol: f64,
    /// Solver iteration cap.
    pub iters: usize,
    /// Second-order penalty: `power:<p>` or `huber:<delta>`.
    pub rho2: String,
    /// Second-order solve weights.
    pub alpha1: f64,
    pub alpha2: f64,
    /// Whether the slope penalty sees the symmetrized Jacobian.
    pub symmetrized: bool,
    /// Probe distances for jump detection; empty means `16h,8h,4h`.
    pub tau_list: Vec<f64>,
    /// Number of probe directions.
    pub directions: usize,
    /// Detection threshold; 0 means a tenth of the dynamic range.
    pub threshold: f64,
    /// Edge-profile standoff; 0 means `3h`.
    pub offset: f64,
    /// Slack for the per-edge inequality verdict column.
    pub slack: f64,
    /// Noise level for the reproduction pipeline.
    pub noise: f64,
    /// Seed for every stochastic generator.
    pub seed: u64,
    /// Output sample depth.
    pub maxval: MaxVal,
    /// Worker threads; 0 picks the core count.
    pub threads: usize,
    /// Print the solver's convergence history.
    pub verbose: bool,
    /// Keys set explicitly (file or flag), so suites can tell an override
    /// from a default.
    set_keys: std::collections::BTreeSet<String>,
}

impl Default for Params {
    fn default() -> Self {
        Params {
            spacing: 0.0,
            reg: "frobenius".into(),
            alpha: 0.1,
            fidelity: "l2".into(),
            boxc: "none".into(),
            tol: 1e-8,
            iters: 20_000,
            rho2: "huber:0.01".into(),
            alpha1: 0.1,
            alpha2: 0.15,
            symmetrized: true,
            tau_list: Vec::new(),
            directions: 16,
            threshold: 0.0,
            offset: 0.0,
            slack: 1e-2,
            noise: 0.1,
            seed: 42,
            maxval: MaxVal::Sixteen,
            threads: 0,
            verbose: false,
            set_keys: Default::default(),
        }
    }
}

impl Params {
    /// Applies one `key = value` pair; unknown keys are errors.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = |what: &str| format!("bad value {value:?} for {what}");
        match key {
            "spacing" => self.spacing = value.parse().with_context(|| bad("spacing"))?,
            "reg" => self.reg = value.to_string(),
            "alpha" => self.alpha = value.parse().with_context(|| bad("alpha"))?,
            "fidelity" => self.fidelity = value.to_string(),
            "box" => self.boxc = value.to_string(),
            "tol" => self.tol = value.parse().with_context(|| bad("tol"))?,
            "iters" => self.iters = value.parse().with_context(|| bad("iters"))?,
            "rho2" => self.rho2 = value.to_string(),
            "alpha1" => self.alpha1 = value.parse().with_context(|| bad("alpha1"))?,
            "alpha2" => self.alpha2 = value.parse().with_context(|| bad("alpha2"))?,
            "symmetrized" => self.symmetrized = parse_bool(value)?,
            "tau_list" => {
                let mut taus = Vec::new();
                for part in value.split(',').filter(|p| !p.trim().is_empty()) {
                    taus.push(part.trim().parse().with_context(|| bad("tau_list"))?);
                }
                self.tau_list = taus;
            }
            "directions" => self.directions = value.parse().with_context(|| bad("directions"))?,
            "threshold" => self.threshold = value.parse().with_context(|| bad("threshold"))?,
            "offset" => self.offset = value.parse().with_context(|| bad("offset"))?,
            "slack" => self.slack = value.parse().with_context(|| bad("slack"))?,
            "noise" => self.noise = value.parse().with_context(|| bad("noise"))?,
            "seed" => self.seed = value.parse().with_context(|| bad("seed"))?,
            "maxval" => self.maxval = MaxVal::parse(value)?,
            "threads" => self.threads = value.parse().with_context(|| bad("threads"))?,
            "verbose" => self.verbose = parse_bool(value)?,
            other => bail!("unknown config key {other:?}"),
        }
        self.set_keys.insert(key.to_string());
        Ok(())
    }

    /// Whether `key` was set explicitly rather than left at its default.
    pub fn is_set(&self, key: &str) -> bool {
        self.set_keys.contains(key)
    }

    /// The gap tolerance, with `pinned` replacing an untouched default so
    /// batch contexts (suites, the reproduction pipeline) can carry their
    /// own calibrated budget while explicit settings still win.
    pub fn tol_or(&self, pinned: f64) -> f64 {
        if self.is_set("tol") {
            self.tol
        } else {
            pinned
        }
    }

    /// The iteration cap, with the same override rule as [`Self::tol_or`].
    pub fn iters_or(&self, pinned: usize) -> usize {
        if self.is_set("iters") {
            self.iters
        } else {
            pinned
        }
    }

    /// Reads a flat `key = value` UTF-8 file with `#` comments.
    pub fn load_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                bail!(
                    "{}:{}: expected `key = value`, got {raw:?}",
                    path.display(),
                    lineno + 1
                );
            };
            self.apply(key.trim(), value.trim())
                .with_context(|| format!("{}:{}", path.display(), lineno + 1))?;
        }
        Ok(())
    }

    /// The configuration as a config-file-ready listing (used in reports).
    pub fn render(&self) -> String {
        let mut s = String::new();
        let taus = self
            .tau_list
            .iter()
            .map(|t| t.to_string())
            .collect::<Vec<_>>()
            .join(",");
        let maxval = match self.maxval {
            MaxVal::Eight => 255,
            MaxVal::Sixteen => 65535,
        };
        let _ = write!(
            s,
            "spacing = {}\nreg = {}\nalpha = {}\nfidelity = {}\nbox = {}\ntol = {}\n\
             iters = {}\nrho2 = {}\nalpha1 = {}\nalpha2 = {}\nsymmetrized = {}\n\
             tau_list = {}\ndirections = {}\nthreshold = {}\noffset = {}\nslack = {}\n\
             noise = {}\nseed = {}\nmaxval = {}\nthreads = {}\nverbose = {}\n",
            self.spacing,
            self.reg,
            self.alpha,
            self.fidelity,
            self.boxc,
            self.tol,
            self.iters,
            self.rho2,
            self.alpha1,
            self.alpha2,
            self.symmetrized,
            taus,
            self.directions,
            self.threshold,
            self.offset,
            self.slack,
            self.noise,
            self.seed,
            maxval,
            self.threads,
            self.verbose,
        );
        s
    }

    /// Builds the first-order regularizer from `reg` and `alpha`.
    pub fn regularizer(&self) -> Result<SpectralRegularizer> {
        let family = parse_family(&self.reg)?;
        SpectralRegularizer::new(family, self.alpha).map_err(Into::into)
    }

    /// Builds the fidelity from the `fidelity` string.
    pub fn fidelity(&self) -> Result<Fidelity> {
        match self.fidelity.as_str() {
            "l2" => Ok(Fidelity::SquaredL2),
            other => match other.split_once(':') {
                Some(("huber", delta)) => {
                    let delta: f64 = delta
                        .parse()
                        .with_context(|| format!("bad huber threshold in {other:?}"))?;
                    Fidelity::huber(delta).map_err(Into::into)
                }
                _ => bail!("fidelity must be l2 or huber:<delta>, got {other:?}"),
            },
        }
    }

    /// Builds the second-order penalty from the `rho2` string.
    pub fn second_order(&self) -> Result<SecondOrderFamily> {
        match self.rho2.split_once(':') {
            Some(("power", p)) => {
                let p: f64 = p
                    .parse()
                    .with_context(|| format!("bad power exponent in {:?}", self.rho2))?;
                Ok(SecondOrderFamily::PowerNorm(p))
            }
            Some(("huber", delta)) => {
                let delta: f64 = delta
                    .parse()
                    .with_context(|| format!("bad huber threshold in {:?}", self.rho2))?;
                Ok(SecondOrderFamily::HuberNorm(delta))
            }
            _ => bail!(
                "second-order penalty must be power:<p> or huber:<delta>, got {:?}",
                self.rho2
            ),
        }
    }

    /// The box constraint as intervals, replicated per channel.
    pub fn box_for(&self, channels: usize) -> Result<Option<Vec<(f64, f64)>>> {
        if self.boxc == "none" {
            return Ok(None);
        }
        let Some((lo, hi)) = self.boxc.split_once(',') else {
            bail!("box must be `lo,hi` or none, got {:?}", self.boxc);
        };
        let lo: f64 = lo.trim().parse().context("bad box lower bound")?;
        let hi: f64 = hi.trim().parse().context("bad box upper bound")?;
        Ok(Some(vec![(lo, hi); channels]))
    }

    /// Forced spacing for image loading, or `None` for the unit-extent
    /// default.
    pub fn spacing_override(&self) -> Option<f64> {
        (self.spacing > 0.0).then_some(self.spacing)
    }
}

fn parse_bool(value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        other => bail!("expected true or false, got {other:?}"),
    }
}

/// Parses a regularizer family name as accepted by `--reg`.
pub fn parse_family(name: &str) -> Result<Family> {
    match name {
        "frobenius" => Ok(Family::Frobenius),
        "nuclear" => Ok(Family::Nuclear),
        "spectral" => Ok(Family::Spectral),
        "logsumexp" => Ok(Family::LogSumExp),
        other => match other.split_once(':') {
            Some(("schatten", p)) => {
                let p: f64 = p
                    .parse()
                    .with_context(|| format!("bad Schatten exponent in {other:?}"))?;
                Ok(Family::Schatten(p))
            }
            Some(("lpq", pq)) => {
                let Some((p, q)) = pq.split_once(',') else {
                    bail!("lpq needs two exponents, e.g. lpq:1.5,2.5");
                };
                let p: f64 = p.parse().with_context(|| format!("bad p in {other:?}"))?;
                let q: f64 = q.parse().with_context(|| format!("bad q in {other:?}"))?;
                Ok(Family::LpqAnisotropic(p, q))
            }
            _ => bail!(
                "regularizer must be frobenius, nuclear, spectral, schatten:<p>, \
                 lpq:<p>,<q> or logsumexp, got {other:?}"
            ),
        },
    }
}
