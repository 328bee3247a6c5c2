//! `roughctrl`: one subcommand per experiment.
//!
//! Every subcommand accepts `--config <file>`, a JSON object of the form written to the
//! `.manifest.json` files next to each output; flags given on the command line override it.
//! Exit status is 0 on success, 1 on a numerical failure and 2 on a configuration error.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

mod commands;
mod dynamics;
mod manifest;

use std::process::ExitCode;

use clap::{CommandFactory, FromArgMatches, Parser, Subcommand};

use commands::{control, filter, rde, rough};
use manifest::{resolve, ConfigError, Failure};

#[derive(Parser)]
#[command(name = "roughctrl", version, about = "Rough-path control and robust filtering experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Lift a sampled path (CSV) or a simulated Brownian path to a rough path.
    Lift(rough::LiftArgs),
    /// Report Chen and symmetry residuals of a lift.
    ChenCheck(rough::ChenCheckArgs),
    /// Compensated rough integral of a built-in integrand against a lift.
    Integrate(rough::IntegrateArgs),
    /// Solve a controlled RDE.
    Rde(rde::RdeArgs),
    /// Rough HJB value along mollifications of a lift.
    Hjb(control::HjbArgs),
    /// Closed-form insider value and trading rate.
    InsiderOracle(control::InsiderOracleArgs),
    /// Divergence of the unregularised value under refinement.
    Degeneracy(control::DegeneracyArgs),
    /// Simulate signal and observation of a linear Gaussian model.
    Simulate(filter::SimulateArgs),
    /// Kalman-Bucy filter of an observation path.
    Filter(filter::FilterArgs),
    /// Penalty of the model's parameter trajectory along a lifted observation.
    Penalty(filter::PenaltyArgs),
    /// Robust filter on the reduced scalar problem.
    Robust(filter::RobustArgs),
    /// Lipschitz ratio of the solution map over a perturbation sweep.
    Stability(rde::StabilityArgs),
    /// A priori norms of RDE solutions over a control-amplitude sweep.
    Apriori(rde::AprioriArgs),
}

fn init_threads() -> Result<(), ConfigError> {
    let Ok(raw) = std::env::var("ROUGHCTRL_THREADS") else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| ConfigError(format!("ROUGHCTRL_THREADS must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| ConfigError(format!("cannot size the worker pool: {e}")))
}

macro_rules! dispatch {
    ($cli:expr, $matches:expr, $($variant:ident => $run:path),* $(,)?) => {
        match $cli.command {
            $(Command::$variant(args) => {
                let (name, sub) = $matches.subcommand().expect("subcommand is required");
                let args = resolve(args, sub, name)?;
                $run(args, name)
            })*
        }
    };
}

fn run() -> anyhow::Result<()> {
    init_threads()?;
    let matches = Cli::command().get_matches();
    let cli = Cli::from_arg_matches(&matches)?;
    dispatch!(cli, matches,
        Lift => rough::lift,
        ChenCheck => rough::chen_check,
        Integrate => rough::integrate,
        Rde => rde::rde,
        Hjb => control::hjb,
        InsiderOracle => control::insider_oracle,
        Degeneracy => control::degeneracy,
        Simulate => filter::simulate,
        Filter => filter::filter,
        Penalty => filter::penalty,
        Robust => filter::robust,
        Stability => rde::stability,
        Apriori => rde::apriori,
    )
}

/// 2 for configuration problems, 1 for numerical ones.
fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<ConfigError>() || cause.is::<std::io::Error>() || cause.is::<serde_json::Error>() || cause.is::<clap::Error>() {
            return 2;
        }
        if cause.is::<Failure>() {
            return 1;
        }
        if let Some(e) = cause.downcast_ref::<roughctrl::Error>() {
            use roughctrl::Error::*;
            return match e {
                BlowUp { .. } | Cfl { .. } | ChenViolation(_) | SymmetryViolation(_) | NotGeometric | ReferenceMismatch => 1,
                _ => 2,
            };
        }
    }
    1
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
