use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fbm_chaos::{Experiment, Settings};

#[derive(Debug, Parser)]
#[command(name = "fbm-chaos", version, about = "Chaos expansions of linear Skorohod equations driven by fractional noise")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    #[command(flatten)]
    settings: Settings,
    /// Output directory for report.json and the CSV tables.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// TOML file with the same keys as the flags.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sample fBm paths and sheets and check their covariances.
    Simulate(Common),
    /// Compare truncated chaos sums with the exponential solution.
    ExactVsChaos(Common),
    /// L² error of the Wick-Euler scheme across step sizes.
    EulerStudy(Common),
    /// Probability that the small-noise sheet solution is negative on a region.
    Negativity(Common),
    /// Unit mean of the Girsanov density for the shifted sheet.
    GirsanovCheck(Common),
    /// Fractional operator identities and the deterministic sheet equation.
    OperatorCheck(Common),
}

impl Command {
    fn split(self) -> (Experiment, Common) {
        match self {
            Self::Simulate(c) => (Experiment::Simulate, c),
            Self::ExactVsChaos(c) => (Experiment::ExactVsChaos, c),
            Self::EulerStudy(c) => (Experiment::EulerStudy, c),
            Self::Negativity(c) => (Experiment::Negativity, c),
            Self::GirsanovCheck(c) => (Experiment::GirsanovCheck, c),
            Self::OperatorCheck(c) => (Experiment::OperatorCheck, c),
        }
    }
}

fn run(experiment: Experiment, common: Common) -> anyhow::Result<bool> {
    let settings = match &common.config {
        Some(path) => common.settings.over(Settings::from_file(path)?),
        None => common.settings,
    };
    let report = experiment.run(&settings)?;
    let dir = common.out.join(experiment.id());
    report.write(&dir)?;
    print!("{}", report.summary());
    println!("report written to {}", dir.display());
    Ok(report.passed)
}

fn main() -> ExitCode {
    let (experiment, common) = Cli::parse().command.split();
    match run(experiment, common) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
