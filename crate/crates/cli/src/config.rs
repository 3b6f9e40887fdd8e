//! Run configuration: defaults, an optional `key = value` file, then flags.
//!
//! File keys (all optional, TOML syntax):
//!
//! | key          | type    | meaning                                         |
//! |--------------|---------|-------------------------------------------------|
//! | `seed`       | integer | corpus and sampling seed                        |
//! | `count`      | integer | corpus size                                     |
//! | `hbar`       | float   | entropy bound of the corpus                     |
//! | `N`          | integer | grid points per axis                            |
//! | `L`          | float   | half extent of the velocity box                 |
//! | `gamma`      | float   | interaction exponent, in `(-4, 0]`              |
//! | `threads`    | integer | worker threads                                  |
//! | `out`        | string  | output directory                                |
//! | `checks`     | string  | comma-separated `verify` checks, or `all`       |
//! | `tolerance`  | float   | score reconstruction tolerance                  |
//! | `radius`     | float   | truncation radius of the weighted entropy check |
//! | `init`       | string  | `maxwellian`, `bimax` or `aniso`                |
//! | `drift`      | float   | bi-Maxwellian half separation                   |
//! | `tend`       | float   | final time                                      |
//! | `dt`         | float   | step, or step cap when adaptive                 |
//! | `adaptive`   | bool    | adaptive step selection                         |
//! | `stepper`    | string  | `heun` or `euler`                               |
//! | `stride`     | integer | steps between stored snapshots                  |
//! | `projection` | bool    | conservation projection after each step         |
//! | `order`      | float   | monitored moment order `l`                      |
//! | `mode`       | string  | `algebraic` or `stretched`                      |
//! | `trajectory` | string  | directory written by `solve`                    |
//! | `s`          | float   | stretched exponent                              |
//! | `kappa`      | float   | stretched moment rate                           |

use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, ValueEnum};
use landau_core::asymptotics::DecayMode;
use landau_core::kernel::validate_exponent;
use landau_core::solver::{SolverConfig, Stepper};
use landau_core::LabError;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Check {
    Entropy,
    Cercignani,
    L3,
    Prop31,
    Prop32,
    Prop33,
    Bakry,
    Coercivity,
    Interp,
    Bfield,
    All,
}

impl Check {
    pub const EACH: [Check; 10] = [
        Check::Entropy,
        Check::Cercignani,
        Check::L3,
        Check::Prop31,
        Check::Prop32,
        Check::Prop33,
        Check::Bakry,
        Check::Coercivity,
        Check::Interp,
        Check::Bfield,
    ];

    pub fn needs_corpus(self) -> bool {
        !matches!(self, Check::Bakry | Check::Bfield | Check::Prop31)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitKind {
    Maxwellian,
    Bimax,
    Aniso,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepperKind {
    Heun,
    Euler,
}

impl From<StepperKind> for Stepper {
    fn from(kind: StepperKind) -> Self {
        match kind {
            StepperKind::Heun => Stepper::Heun,
            StepperKind::Euler => Stepper::ExplicitEuler,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeKind {
    Algebraic,
    Stretched,
}

impl From<ModeKind> for DecayMode {
    fn from(kind: ModeKind) -> Self {
        match kind {
            ModeKind::Algebraic => DecayMode::Algebraic,
            ModeKind::Stretched => DecayMode::Stretched,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Verify,
    Solve,
    Decay,
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Command::Verify => "verify",
            Command::Solve => "solve",
            Command::Decay => "decay",
        })
    }
}

/// Flags shared by every command.
#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// Configuration file with `key = value` lines; flags override it.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of corpus members.
    #[arg(long)]
    pub count: Option<usize>,
    /// Entropy bound of the corpus.
    #[arg(long)]
    pub hbar: Option<f64>,
    /// Grid points per axis.
    #[arg(long = "N", value_name = "N")]
    pub points: Option<usize>,
    /// Half extent of the velocity box.
    #[arg(long = "L", value_name = "L")]
    pub half_extent: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub gamma: Option<f64>,
    /// Worker threads.
    #[arg(long, env = "LANDAU_LAB_THREADS")]
    pub threads: Option<usize>,
}

/// Flags of the `verify` command.
#[derive(Debug, Clone, Default, Args)]
pub struct VerifyArgs {
    /// Checks to run, comma separated.
    #[arg(long = "check", value_enum, value_delimiter = ',')]
    pub checks: Vec<Check>,
    /// Maximum relative error of the score reconstruction.
    #[arg(long)]
    pub tolerance: Option<f64>,
    /// Truncation radius of the weighted entropy check.
    #[arg(long)]
    pub radius: Option<f64>,
}

/// Flags controlling a solver run.
#[derive(Debug, Clone, Default, Args)]
pub struct SolveArgs {
    #[arg(long, value_enum)]
    pub init: Option<InitKind>,
    /// Half separation of the bi-Maxwellian bumps.
    #[arg(long)]
    pub drift: Option<f64>,
    #[arg(long)]
    pub tend: Option<f64>,
    #[arg(long)]
    pub dt: Option<f64>,
    /// Use the fixed step `dt` instead of adaptive steps.
    #[arg(long)]
    pub fixed_step: bool,
    #[arg(long, value_enum)]
    pub stepper: Option<StepperKind>,
    /// Steps between stored snapshots.
    #[arg(long)]
    pub stride: Option<usize>,
    /// Skip the conservation projection.
    #[arg(long)]
    pub no_projection: bool,
    /// Order of the monitored polynomial moment.
    #[arg(long)]
    pub order: Option<f64>,
}

/// Flags of the `decay` command.
#[derive(Debug, Clone, Default, Args)]
pub struct DecayArgs {
    #[arg(long, value_enum)]
    pub mode: Option<ModeKind>,
    /// Trajectory directory written by `solve`; solved inline when absent.
    #[arg(long, value_name = "DIR")]
    pub trajectory: Option<PathBuf>,
    /// Stretched exponent.
    #[arg(long)]
    pub s: Option<f64>,
    /// Stretched moment rate.
    #[arg(long)]
    pub kappa: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    seed: Option<u64>,
    count: Option<usize>,
    hbar: Option<f64>,
    #[serde(rename = "N")]
    points: Option<usize>,
    #[serde(rename = "L")]
    half_extent: Option<f64>,
    gamma: Option<f64>,
    threads: Option<usize>,
    out: Option<PathBuf>,
    checks: Option<String>,
    tolerance: Option<f64>,
    radius: Option<f64>,
    init: Option<String>,
    drift: Option<f64>,
    tend: Option<f64>,
    dt: Option<f64>,
    adaptive: Option<bool>,
    stepper: Option<String>,
    stride: Option<usize>,
    projection: Option<bool>,
    order: Option<f64>,
    mode: Option<String>,
    trajectory: Option<PathBuf>,
    s: Option<f64>,
    kappa: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridSettings {
    pub half_extent: f64,
    pub points_per_axis: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorpusSettings {
    pub seed: u64,
    pub count: usize,
    pub entropy_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifySettings {
    pub checks: Vec<Check>,
    pub reconstruction_tolerance: f64,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecaySettings {
    pub mode: ModeKind,
    pub trajectory: Option<PathBuf>,
    pub s: f64,
    pub kappa: f64,
}

/// Fully resolved configuration, echoed into every run directory.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: Command,
    pub grid: GridSettings,
    pub gamma: f64,
    pub corpus: CorpusSettings,
    pub verify: VerifySettings,
    pub init: InitKind,
    pub drift: f64,
    pub solver: SolverConfig,
    pub decay: DecaySettings,
    pub out: PathBuf,
    pub threads: usize,
}

fn parse_choice<T: ValueEnum>(key: &str, value: &str) -> anyhow::Result<T> {
    T::from_str(value, true).map_err(|_| LabError::InvalidConfig(format!("unknown {key} `{value}`")).into())
}

fn read_file(path: &Path) -> anyhow::Result<FileConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    toml::from_str(&text).map_err(|e| LabError::InvalidConfig(format!("{}: {e}", path.display())).into())
}

impl RunConfig {
    /// Merge defaults, the config file named by `--config`, and flags.
    pub fn resolve(
        command: Command,
        common: &CommonArgs,
        verify: &VerifyArgs,
        solve: &SolveArgs,
        decay: &DecayArgs,
    ) -> anyhow::Result<Self> {
        let file = match &common.config {
            Some(path) => read_file(path)?,
            None => FileConfig::default(),
        };
        let base = SolverConfig::default();

        let checks = if !verify.checks.is_empty() {
            verify.checks.clone()
        } else if let Some(list) = &file.checks {
            list.split(',')
                .map(|c| parse_choice::<Check>("check", c.trim()))
                .collect::<anyhow::Result<Vec<_>>>()?
        } else {
            vec![Check::All]
        };
        let mut checks: Vec<Check> = if checks.contains(&Check::All) {
            Check::EACH.to_vec()
        } else {
            checks
        };
        checks.sort();
        checks.dedup();

        let init = match (solve.init, &file.init) {
            (Some(i), _) => i,
            (None, Some(name)) => parse_choice("init", name)?,
            (None, None) => InitKind::Bimax,
        };
        let stepper = match (solve.stepper, &file.stepper) {
            (Some(s), _) => s,
            (None, Some(name)) => parse_choice("stepper", name)?,
            (None, None) => StepperKind::Heun,
        };
        let mode = match (decay.mode, &file.mode) {
            (Some(m), _) => m,
            (None, Some(name)) => parse_choice("mode", name)?,
            (None, None) => ModeKind::Algebraic,
        };

        let grid = GridSettings {
            half_extent: common.half_extent.or(file.half_extent).unwrap_or(base.half_extent),
            points_per_axis: common.points.or(file.points).unwrap_or(base.points_per_axis),
        };
        let gamma = common.gamma.or(file.gamma).unwrap_or(base.gamma);
        let solver = SolverConfig {
            gamma,
            half_extent: grid.half_extent,
            points_per_axis: grid.points_per_axis,
            dt: solve.dt.or(file.dt).unwrap_or(base.dt),
            t_end: solve.tend.or(file.tend).unwrap_or(base.t_end),
            stepper: stepper.into(),
            adaptive: !solve.fixed_step && file.adaptive.unwrap_or(base.adaptive),
            max_relative_change: base.max_relative_change,
            conservation_projection: !solve.no_projection && file.projection.unwrap_or(true),
            snapshot_stride: solve.stride.or(file.stride).unwrap_or(base.snapshot_stride),
            moment_order: solve.order.or(file.order).unwrap_or(base.moment_order),
        };
        let threads = common
            .threads
            .or(file.threads)
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));

        let config = RunConfig {
            command,
            corpus: CorpusSettings {
                seed: common.seed.or(file.seed).unwrap_or(1),
                count: common.count.or(file.count).unwrap_or(20),
                entropy_bound: common.hbar.or(file.hbar).unwrap_or(0.0),
            },
            verify: VerifySettings {
                checks,
                reconstruction_tolerance: verify.tolerance.or(file.tolerance).unwrap_or(1e-3),
                radius: verify.radius.or(file.radius).unwrap_or(2.0),
            },
            init,
            drift: solve.drift.or(file.drift).unwrap_or(1.0),
            solver,
            decay: DecaySettings {
                mode,
                trajectory: decay.trajectory.clone().or(file.trajectory),
                s: decay.s.or(file.s).unwrap_or(0.5),
                kappa: decay.kappa.or(file.kappa).unwrap_or(0.5),
            },
            out: common
                .out
                .clone()
                .or(file.out)
                .unwrap_or_else(|| PathBuf::from(format!("landau-{command}"))),
            threads,
            grid,
            gamma,
        };
        config.validate()?;
        Ok(config)
    }

    /// Reject invalid parameters before any computation starts.
    pub fn validate(&self) -> anyhow::Result<()> {
        let invalid = |msg: String| -> anyhow::Result<()> { Err(LabError::InvalidConfig(msg).into()) };
        validate_exponent(self.gamma)?;
        self.solver.validate()?;
        self.solver.grid()?;
        if self.threads == 0 {
            return invalid("thread count must be at least 1".into());
        }
        if self.corpus.count == 0 {
            return invalid("corpus count must be at least 1".into());
        }
        if self.corpus.entropy_bound.is_nan() {
            return invalid("entropy bound must be a number".into());
        }
        if !(self.verify.reconstruction_tolerance > 0.0) {
            return invalid(format!(
                "tolerance must be positive, got {}",
                self.verify.reconstruction_tolerance
            ));
        }
        if !(self.verify.radius > 0.0 && self.verify.radius.is_finite()) {
            return invalid(format!("radius must be positive, got {}", self.verify.radius));
        }
        if !(self.drift >= 0.0 && self.drift.is_finite()) {
            return invalid(format!("drift must be nonnegative, got {}", self.drift));
        }
        if self.command == Command::Decay && self.decay.mode == ModeKind::Algebraic && self.solver.moment_order <= 9.5 {
            return invalid(format!(
                "moment order must exceed 19/2, got {}",
                self.solver.moment_order
            ));
        }
        if let Some(dir) = &self.decay.trajectory {
            if self.command == Command::Decay && !dir.is_dir() {
                bail!(LabError::InvalidConfig(format!(
                    "trajectory directory {} does not exist",
                    dir.display()
                )));
            }
        }
        Ok(())
    }
}
