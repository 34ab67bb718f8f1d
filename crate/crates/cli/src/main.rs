//! `lop`: analytic values, bounds, Monte Carlo estimates and figure
//! reproductions for the localization outage probability.

mod config;
mod grid;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lop_core::experiments::Figure;

use crate::config::Config;
use crate::run::{ExperimentSpec, Failure, Kind};

#[derive(Parser)]
#[command(name = "lop", version, about = "Localization outage probability: analysis and simulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// All-anchor LOP from the random-walk integral.
    Analytic(Flags),
    /// P(δ) bounds, exact value and the two-anchor upper bound.
    Bounds(Flags),
    /// Monte Carlo all-anchor and two-anchor LOP curves.
    Mc(Flags),
    /// Reproduce a figure as CSV and SVG.
    Figure {
        #[arg(value_enum)]
        which: FigureArg,
        #[command(flatten)]
        flags: Flags,
    },
    /// Simulate the Q correction term under both radius conventions.
    QOracle(Flags),
    /// Run the acceptance suite; exits 4 if any check fails.
    Validate(Flags),
}

#[derive(Clone, Copy, ValueEnum)]
enum FigureArg {
    Fig3,
    Fig4,
    Fig5,
}

/// Shared flags. Lists accept `3,4,5` or `2..10`; angles accept `pi/6`.
#[derive(Args, Default)]
struct Flags {
    /// Anchor counts.
    #[arg(long)]
    n: Option<String>,
    /// Angular margins δ in radians.
    #[arg(long)]
    delta: Option<String>,
    /// SPEB thresholds in units of P₀.
    #[arg(long)]
    threshold_ratio: Option<String>,
    /// Communication radius over uncertainty radius.
    #[arg(long)]
    r_over_r: Option<String>,
    /// Included angle for q-oracle, in radians.
    #[arg(long)]
    theta: Option<String>,
    #[arg(long)]
    trials: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// at-center | uniform-in-ur
    #[arg(long)]
    agent_policy: Option<String>,
    /// at-agent | worst-case-over-ur (applies to every curve when given)
    #[arg(long)]
    speb_policy: Option<String>,
    /// optimal | suboptimal
    #[arg(long)]
    selector: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<String>,
    /// Comma list of csv, svg.
    #[arg(long)]
    format: Option<String>,
    /// INI-style settings file; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
}

impl Flags {
    fn get(&self, key: &str) -> Option<String> {
        match key {
            "n" => self.n.clone(),
            "delta" => self.delta.clone(),
            "threshold-ratio" => self.threshold_ratio.clone(),
            "r-over-r" => self.r_over_r.clone(),
            "theta" => self.theta.clone(),
            "trials" => self.trials.clone(),
            "seed" => self.seed.clone(),
            "agent-policy" => self.agent_policy.clone(),
            "speb-policy" => self.speb_policy.clone(),
            "selector" => self.selector.clone(),
            "out" => self.out.clone(),
            "format" => self.format.clone(),
            _ => None,
        }
    }
}

fn build(kind: Kind, flags: &Flags) -> Result<ExperimentSpec, Failure> {
    let config = match &flags.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::usage(format!("cannot read {}: {e}", path.display())))?;
            Config::parse(&text).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?
        }
        None => Config::default(),
    };
    let section = kind.section();
    ExperimentSpec::resolve(kind, &|key| flags.get(key).or_else(|| config.get(section, key).map(str::to_string)))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, flags) = match &cli.command {
        Command::Analytic(f) => (Kind::Analytic, f),
        Command::Bounds(f) => (Kind::Bounds, f),
        Command::Mc(f) => (Kind::Mc, f),
        Command::QOracle(f) => (Kind::QOracle, f),
        Command::Validate(f) => (Kind::Validate, f),
        Command::Figure { which, flags } => {
            let fig = match which {
                FigureArg::Fig3 => Figure::Fig3,
                FigureArg::Fig4 => Figure::Fig4,
                FigureArg::Fig5 => Figure::Fig5,
            };
            (Kind::Figure(fig), flags)
        }
    };
    let result = build(kind, flags).and_then(|spec| run::run(&spec, &mut std::io::stdout().lock()));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("lop: {}", f.message);
            ExitCode::from(f.code as u8)
        }
    }
}
