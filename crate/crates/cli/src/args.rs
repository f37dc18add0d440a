use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use riskgrad::{GaussianSpec, NaPolicy, PayoffKind, PenaltyMode};

pub const DEFAULT_LAMBDA: f64 = 1e8;
pub const DEFAULT_GAMMA: f64 = 1e-8;
pub const DEFAULT_STEP_SIZE: f64 = 1e-4;
pub const DEFAULT_LEVEL: f64 = 0.95;
pub const DEFAULT_CHAINS: usize = 5000;
/// With the default step size this covers Langevin time `M h = 10`.
pub const DEFAULT_STEPS: usize = 100_000;
pub const DESK_SHRINK: usize = 10;

#[derive(Debug, Parser)]
#[command(
    name = "estimate",
    version,
    about = "Langevin ensemble estimates of AVaR, VaR and EVaR"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Optimized AVaR, VaR and portfolio.
    Avar(RunArgs),
    /// Entropic VaR by random-partition search over risk-level measures.
    Evar(EvarArgs),
    /// Deviation constant psi and the tail bound 2 exp(-eps^2 N / psi).
    Bound(BoundArgs),
    /// Re-run the command recorded in a manifest.json.
    Replay(ReplayArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    /// Chains and steps divided by 10.
    Desk,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum PayoffArg {
    Identity,
    Linear,
    Softmax,
}

impl From<PayoffArg> for PayoffKind {
    fn from(p: PayoffArg) -> Self {
        match p {
            PayoffArg::Identity => PayoffKind::Identity,
            PayoffArg::Linear => PayoffKind::LinearPnl,
            PayoffArg::Softmax => PayoffKind::SoftmaxPortfolio,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum PenaltyArg {
    First,
    Full,
}

impl From<PenaltyArg> for PenaltyMode {
    fn from(p: PenaltyArg) -> Self {
        match p {
            PenaltyArg::First => PenaltyMode::FirstCoordinate,
            PenaltyArg::Full => PenaltyMode::FullState,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum NaArg {
    Drop,
    Error,
}

impl From<NaArg> for NaPolicy {
    fn from(p: NaArg) -> Self {
        match p {
            NaArg::Drop => NaPolicy::DropColumn,
            NaArg::Error => NaPolicy::Error,
        }
    }
}

#[derive(Clone, Debug, Args)]
pub struct RunArgs {
    /// Risk level u in (0, 1).
    #[arg(short = 'u', long, default_value_t = DEFAULT_LEVEL)]
    pub level: f64,
    /// Inverse temperature.
    #[arg(long, default_value_t = DEFAULT_LAMBDA)]
    pub lambda: f64,
    /// Quadratic penalty weight.
    #[arg(long, default_value_t = DEFAULT_GAMMA)]
    pub gamma: f64,
    /// Step size h [default: 1e-4].
    #[arg(long, conflicts_with = "horizon_t")]
    pub step_size: Option<f64>,
    /// Steps per chain M [default: 100000, desk: 10000].
    #[arg(short = 'M', long)]
    pub steps: Option<usize>,
    /// Horizon t; sets h = t / M^2.
    #[arg(long)]
    pub horizon_t: Option<f64>,
    /// Number of chains N [default: 5000, desk: 500].
    #[arg(short = 'N', long)]
    pub chains: Option<usize>,
    /// Sample count P [default: N for --gaussian, all increments for --data].
    #[arg(short = 'P', long)]
    pub samples: Option<usize>,
    #[arg(long, value_enum, default_value = "identity")]
    pub payoff: PayoffArg,
    /// Price CSV; increments of its columns are the samples.
    #[arg(long, conflicts_with = "gaussian")]
    pub data: Option<PathBuf>,
    /// CSV delimiter.
    #[arg(long, default_value_t = ',')]
    pub delimiter: char,
    /// What to do with missing CSV cells.
    #[arg(long, value_enum, default_value = "drop")]
    pub na: NaArg,
    /// Gaussian marginal `mu=..,sigma=..`; repeat for more dimensions.
    #[arg(long, value_parser = parse_gaussian)]
    pub gaussian: Vec<GaussianSpec>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "full")]
    pub penalty: PenaltyArg,
    /// Gradient minibatch size; omit to use every sample at every step.
    #[arg(long)]
    pub minibatch: Option<usize>,
    /// Trace recording stride [default: max(M/100, 1)].
    #[arg(long)]
    pub record_stride: Option<usize>,
    #[arg(long, default_value = "riskgrad-out")]
    pub out: PathBuf,
    /// Also write trace.svg.
    #[arg(long)]
    pub svg: bool,
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
}

#[derive(Clone, Debug, Args)]
pub struct EvarArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Atoms per candidate measure J.
    #[arg(short = 'J', long, default_value_t = 5000)]
    pub atoms: usize,
    /// Number of random candidate measures.
    #[arg(long, default_value_t = 5000)]
    pub partitions: usize,
    /// Renyi order q > 1.
    #[arg(long, default_value_t = 1.00001)]
    pub q_order: f64,
    /// Constraint multiplier.
    #[arg(long, default_value_t = 1e18)]
    pub k: f64,
    /// Level truncation [default: u + (1-u)/2].
    #[arg(long)]
    pub delta: Option<f64>,
    /// Make the first candidate J atoms at this level.
    #[arg(long)]
    pub force_atom: Option<f64>,
    /// AVaR cache cells per unit level.
    #[arg(long, default_value_t = 1000)]
    pub level_grid: u32,
}

#[derive(Clone, Debug, Args)]
pub struct BoundArgs {
    #[arg(short = 'M', long, default_value_t = 100)]
    pub steps: usize,
    /// Horizon t.
    #[arg(long, default_value_t = 1.0, conflicts_with = "step_size")]
    pub horizon_t: f64,
    /// Step size h; sets t = h M^2.
    #[arg(long)]
    pub step_size: Option<f64>,
    #[arg(short = 'u', long, default_value_t = DEFAULT_LEVEL)]
    pub level: f64,
    #[arg(long, default_value_t = DEFAULT_LAMBDA)]
    pub lambda: f64,
    /// Deviation epsilon.
    #[arg(long, default_value_t = 0.01)]
    pub epsilon: f64,
    #[arg(short = 'N', long, default_value_t = DEFAULT_CHAINS)]
    pub chains: usize,
}

#[derive(Clone, Debug, Args)]
pub struct ReplayArgs {
    pub manifest: PathBuf,
    /// Output directory [default: the recorded one].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn parse_gaussian(text: &str) -> Result<GaussianSpec, String> {
    let mut mu = None;
    let mut sigma = None;
    for part in text.split(',') {
        let (key, value) = part
            .split_once('=')
            .ok_or_else(|| format!("expected key=value, got `{part}`"))?;
        let value: f64 = value
            .trim()
            .parse()
            .map_err(|_| format!("`{value}` is not a number"))?;
        match key.trim() {
            "mu" => mu = Some(value),
            "sigma" => sigma = Some(value),
            other => return Err(format!("unknown key `{other}`, expected mu or sigma")),
        }
    }
    let (Some(mu), Some(sigma)) = (mu, sigma) else {
        return Err("both mu and sigma are required".into());
    };
    GaussianSpec::new(mu, sigma).map_err(|e| e.to_string())
}

impl RunArgs {
    fn shrink(&self) -> usize {
        match self.preset {
            Some(Preset::Desk) => DESK_SHRINK,
            None => 1,
        }
    }

    pub fn resolved_chains(&self) -> usize {
        self.chains.unwrap_or(DEFAULT_CHAINS / self.shrink())
    }

    pub fn resolved_steps(&self) -> usize {
        self.steps.unwrap_or(DEFAULT_STEPS / self.shrink())
    }

    pub fn resolved_stride(&self) -> usize {
        self.record_stride
            .unwrap_or_else(|| (self.resolved_steps() / 100).max(1))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_spec_parsing() {
        let g = parse_gaussian("mu=1,sigma=1.5").unwrap();
        assert_eq!((g.mu, g.sigma), (1.0, 1.5));
        assert!(parse_gaussian("mu=1").is_err());
        assert!(parse_gaussian("mu=1,sigma=0").is_err());
        assert!(parse_gaussian("mean=1,sigma=1").is_err());
    }

    #[test]
    fn desk_preset_shrinks_chains_and_steps() {
        let cli = Cli::parse_from([
            "estimate",
            "avar",
            "--gaussian",
            "mu=0,sigma=1",
            "--preset",
            "desk",
        ]);
        let Command::Avar(run) = cli.command else {
            panic!()
        };
        assert_eq!(run.resolved_chains(), 500);
        assert_eq!(run.resolved_steps(), 10_000);
        assert_eq!(run.resolved_stride(), 100);
        let cli = Cli::parse_from(["estimate", "avar", "--preset", "desk", "-N", "7"]);
        let Command::Avar(run) = cli.command else {
            panic!()
        };
        assert_eq!(run.resolved_chains(), 7);
    }

    #[test]
    fn step_size_and_horizon_conflict() {
        let r = Cli::try_parse_from([
            "estimate",
            "avar",
            "--step-size",
            "1e-4",
            "--horizon-t",
            "1",
        ]);
        assert!(r.is_err());
    }
}
