//! Command-line arguments. Every struct here serializes into the `config` block of the report,
//! minus the fields that cannot change the numbers (output path, worker count, cache file).

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use momineq::sim::{DEFAULT_CRITICAL_REPS, DEFAULT_POWER_REPS, DEFAULT_SEED};
use momineq::NormOrder;
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "momineq", version, about = "Minimax tests and confidence intervals for Gaussian moment inequalities")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Least-favorable critical values c_{p,alpha} over a (k, p, alpha) grid.
    Critval(CritvalArgs),
    /// Exact and simulated minimax power against separated alternatives, per b.
    PowerCurve(PowerCurveArgs),
    /// Numerical checks of the test/CI duality and of the loss integral representation.
    Duality(DualityArgs),
    /// Neyman-Pearson upper bound on minimax power, or its sweep across k.
    UpperBound(UpperBoundArgs),
    /// Welfare-alternative minimax power of several tests in the treatment problem.
    Treatment(TreatmentArgs),
    /// Upper confidence endpoints from an observed Z vector or a raw-sample CSV.
    Invert(InvertArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct Common {
    /// Master seed for every simulated quantity.
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Report format; each command has its own default.
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Write the report here instead of stdout.
    #[arg(long, short)]
    #[serde(skip)]
    pub output: Option<PathBuf>,
    /// Worker threads (default: available parallelism). Results do not depend on it.
    #[arg(long)]
    #[serde(skip)]
    pub threads: Option<usize>,
    /// Print the resolved configuration and exit without computing.
    #[arg(long)]
    #[serde(skip)]
    pub dry_run: bool,
}

/// Critical value cache shared by the commands that need simulated critical values.
#[derive(Debug, Clone, Args, Serialize)]
pub struct Critical {
    /// Monte Carlo replications for finite-p critical values (accepts 1e6).
    #[arg(long, value_parser = parse_count, default_value_t = DEFAULT_CRITICAL_REPS)]
    pub critical_reps: u64,
    /// JSON file of cached critical values, created if missing.
    #[arg(long)]
    #[serde(skip)]
    pub cache: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CritvalArgs {
    /// Dimensions, comma separated.
    #[arg(long, required = true, value_delimiter = ',')]
    pub k: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "0.05")]
    pub alpha: Vec<f64>,
    /// Norm orders, comma separated; `inf` is the max test.
    #[arg(long, value_delimiter = ',', default_value = "inf")]
    pub p: Vec<NormOrder>,
    /// Monte Carlo replications for finite p (accepts 1e6).
    #[arg(long, value_parser = parse_count, default_value_t = DEFAULT_CRITICAL_REPS)]
    pub reps: u64,
    #[arg(long)]
    #[serde(skip)]
    pub cache: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PowerCurveArgs {
    #[arg(long, required = true, value_delimiter = ',')]
    pub k: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "1,2,inf")]
    pub p: Vec<NormOrder>,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Separations: comma list, each item a number or start:stop:step.
    #[arg(long, value_parser = parse_grid, default_value = "0.5:4:0.5")]
    pub b: Grid,
    /// Null value θ₀ at which the least-favorable alternative is simulated.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub theta0: f64,
    /// Monte Carlo replications per power estimate (accepts 1e5).
    #[arg(long, value_parser = parse_count, default_value_t = DEFAULT_POWER_REPS)]
    pub reps: u64,
    #[command(flatten)]
    #[serde(flatten)]
    pub critical: Critical,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossKind {
    Linear,
    Quadratic,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DualityArgs {
    #[arg(long, required = true, value_delimiter = ',')]
    pub k: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "1,2,inf")]
    pub p: Vec<NormOrder>,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, value_parser = parse_grid, default_value = "0.5,1,2,3,4")]
    pub b: Grid,
    /// Also check the loss integral representation for these losses.
    #[arg(long, value_enum, value_delimiter = ',')]
    pub loss: Vec<LossKind>,
    /// Standard errors allowed in the pass/fail flag of each check.
    #[arg(long, default_value_t = 3.0)]
    pub n_se: f64,
    #[arg(long, value_parser = parse_count, default_value_t = DEFAULT_POWER_REPS)]
    pub reps: u64,
    #[command(flatten)]
    #[serde(flatten)]
    pub critical: Critical,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct UpperBoundArgs {
    #[arg(long, required = true, value_delimiter = ',')]
    pub k: Vec<usize>,
    #[arg(long, value_parser = parse_grid, default_value = "1,2,3")]
    pub b: Grid,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Sweep k at b = sqrt((2 ± epsilon) log k) instead of the (k, b) grid.
    #[arg(long)]
    pub sweep: bool,
    #[arg(long, default_value_t = 0.5)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 3.0)]
    pub n_se: f64,
    #[arg(long, value_parser = parse_count, default_value_t = DEFAULT_POWER_REPS)]
    pub reps: u64,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TreatmentArgs {
    /// Number of strata.
    #[arg(long)]
    pub k: usize,
    #[arg(long, value_delimiter = ',', default_value = "1,2,inf")]
    pub p: Vec<NormOrder>,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Welfare gains: comma list, each item a number or start:stop:step.
    #[arg(long, value_parser = parse_grid, default_value = "0.2:1.6:0.2")]
    pub b: Grid,
    #[arg(long, value_parser = parse_count, default_value_t = DEFAULT_POWER_REPS)]
    pub reps: u64,
    #[command(flatten)]
    #[serde(flatten)]
    pub critical: Critical,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct InvertArgs {
    /// Observed Z vector, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, conflicts_with = "input", required_unless_present = "input")]
    pub z: Vec<f64>,
    /// CSV with header `label,value` (moment model) or `x,d,y` (treatment model).
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Number of labels or strata in the CSV (default: the largest label present).
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long, value_delimiter = ',', default_value = "1,2,inf")]
    pub p: Vec<NormOrder>,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Bisection tolerance for finite p.
    #[arg(long, default_value_t = momineq::ci::DEFAULT_TOL)]
    pub tol: f64,
    #[command(flatten)]
    #[serde(flatten)]
    pub critical: Critical,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

/// Gives the dispatcher access to the flags every command shares.
pub trait WithCommon {
    fn common(&self) -> &Common;
    fn common_mut(&mut self) -> &mut Common;
}

macro_rules! with_common {
    ($($t:ty),*) => {$(
        impl WithCommon for $t {
            fn common(&self) -> &Common {
                &self.common
            }
            fn common_mut(&mut self) -> &mut Common {
                &mut self.common
            }
        }
    )*};
}

with_common!(CritvalArgs, PowerCurveArgs, DualityArgs, UpperBoundArgs, TreatmentArgs, InvertArgs);

/// A grid of reals given as `0.5,1,2` or `0.5:4:0.5`, or a mix.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Grid(pub Vec<f64>);

pub fn parse_grid(s: &str) -> Result<Grid, String> {
    let mut out = Vec::new();
    for item in s.split(',').map(str::trim).filter(|x| !x.is_empty()) {
        let parts: Vec<&str> = item.split(':').collect();
        match parts.as_slice() {
            [v] => out.push(parse_real(v)?),
            [start, stop, step] => {
                let (start, stop, step) = (parse_real(start)?, parse_real(stop)?, parse_real(step)?);
                if !(step > 0.0) || stop < start {
                    return Err(format!("range `{item}` needs start <= stop and a positive step"));
                }
                let n = ((stop - start) / step + 1e-9).floor() as usize;
                out.extend((0..=n).map(|i| start + i as f64 * step));
            }
            _ => return Err(format!("`{item}` is neither a number nor start:stop:step")),
        }
    }
    if out.is_empty() {
        return Err("empty grid".into());
    }
    Ok(Grid(out))
}

fn parse_real(s: &str) -> Result<f64, String> {
    s.trim().parse::<f64>().map_err(|_| format!("`{s}` is not a number")).and_then(|x| {
        if x.is_finite() {
            Ok(x)
        } else {
            Err(format!("`{s}` is not finite"))
        }
    })
}

/// A positive integer count, also accepted in scientific notation (`1e6`).
pub fn parse_count(s: &str) -> Result<u64, String> {
    if let Ok(n) = s.replace('_', "").parse::<u64>() {
        return if n > 0 { Ok(n) } else { Err("count must be positive".into()) };
    }
    let x: f64 = s.parse().map_err(|_| format!("`{s}` is not a count"))?;
    if x >= 1.0 && x.fract() == 0.0 && x <= 1e15 {
        Ok(x as u64)
    } else {
        Err(format!("`{s}` is not a positive whole number"))
    }
}
