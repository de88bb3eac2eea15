//! `gmpot`: solve discrete moment problems and check optimality certificates.
//!
//! Exit status: 0 success, 1 violated or infeasible verdict, 2 input error,
//! 3 numerical failure.

mod commands;
mod error;
mod input;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::CliError;

#[derive(Parser, Debug)]
#[command(
    name = "gmpot",
    version,
    about = "Discrete generalized moment problems and transport certificates"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    #[command(flatten)]
    tol: TolArgs,

    /// Write the main output here instead of standard output.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Copy)]
pub struct TolArgs {
    /// Primal feasibility tolerance of LP solves and certificates.
    #[arg(long, global = true, default_value_t = 1e-9)]
    pub feas_tol: f64,
    /// Optimality (reduced cost and duality gap) tolerance.
    #[arg(long, global = true, default_value_t = 1e-9)]
    pub opt_tol: f64,
    /// Relative improvement a competitor must achieve to count.
    #[arg(long, global = true, default_value_t = 1e-8)]
    pub improve_tol: f64,
    /// Slack below which a cycle counts as cost-lowering.
    #[arg(long, global = true, default_value_t = 1e-10)]
    pub max_cycle_slack: f64,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve a grid instance, or re-verify a stored solution with --verify.
    Solve {
        instance: PathBuf,
        /// Check this solution JSON against the instance without re-solving.
        #[arg(long)]
        verify: Option<PathBuf>,
        /// Also write the optimal plan as CSV.
        #[arg(long)]
        plan_csv: Option<PathBuf>,
    },
    /// Check c-cyclical monotonicity of a set of pairs (x, y).
    CheckMonotone {
        input: PathBuf,
        /// Cost expression, overriding the one in the input.
        #[arg(long)]
        cost: Option<String>,
    },
    /// Search for a better competitor of a measure or of sub-measures of a plan.
    CompetitorSearch {
        input: PathBuf,
        /// Atom budget of the tested sub-measures.
        #[arg(long, default_value_t = 4)]
        k: usize,
        /// Random subsets drawn when exhaustive enumeration is too large.
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Widen candidate grids by the plan's full coordinate projections.
        #[arg(long)]
        extend: bool,
    },
    /// Build the comonotone coupling of the given marginals.
    QuantileCoupling {
        input: PathBuf,
        /// Use this many stratified levels instead of CDF breakpoints.
        #[arg(long)]
        levels: Option<usize>,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Convergence table of the quantile plan on dyadic time grids.
    PassDemo {
        #[arg(long)]
        family: PathBuf,
        /// Finest dyadic depth.
        #[arg(long, default_value_t = 5)]
        depth: u32,
        /// Coarsest dyadic depth.
        #[arg(long, default_value_t = 1)]
        from_depth: u32,
        /// Stratified level count; CDF breakpoints when omitted.
        #[arg(long)]
        levels: Option<usize>,
        /// Concave function id: neg_square, neg_abs_p:P, log_shift:K, affine:A,B.
        #[arg(long, default_value = "neg_square")]
        h: String,
        /// Skip the LP comparison above this depth.
        #[arg(long)]
        lp_max_depth: Option<u32>,
    },
    /// Martingale transport price bounds: minimum and maximum expected cost.
    Mot {
        input: PathBuf,
        /// Also write the minimizing and maximizing plans as CSV with this prefix.
        #[arg(long)]
        plan_csv: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let out = cli.output.as_deref();
    if let Err(e) = cli.tol.check() {
        eprintln!("gmpot: {e}");
        return ExitCode::from(e.exit_code() as u8);
    }
    let result = match cli.command {
        Command::Solve {
            instance,
            verify,
            plan_csv,
        } => match verify {
            Some(solution) => commands::verify(&instance, &solution, &cli.tol, out),
            None => commands::solve(&instance, plan_csv.as_deref(), &cli.tol, out),
        },
        Command::CheckMonotone { input, cost } => {
            commands::check_monotone(&input, cost.as_deref(), &cli.tol, out)
        }
        Command::CompetitorSearch {
            input,
            k,
            trials,
            seed,
            extend,
        } => {
            let search = commands::SearchArgs {
                k,
                trials,
                seed,
                extend,
            };
            commands::competitor_search(&input, &search, &cli.tol, out)
        }
        Command::QuantileCoupling {
            input,
            levels,
            format,
        } => commands::coupling(&input, levels, format, out),
        Command::PassDemo {
            family,
            depth,
            from_depth,
            levels,
            h,
            lp_max_depth,
        } => {
            let demo = commands::PassArgs {
                depth,
                from_depth,
                levels,
                h,
                lp_max_depth,
            };
            commands::pass_demo(&family, &demo, &cli.tol, out)
        }
        Command::Mot { input, plan_csv } => {
            commands::mot(&input, plan_csv.as_deref(), &cli.tol, out)
        }
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("gmpot: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

impl From<TolArgs> for gmpot::Tolerances<f64> {
    fn from(t: TolArgs) -> Self {
        gmpot::Tolerances {
            feas: t.feas_tol,
            opt: t.opt_tol,
        }
    }
}

impl TolArgs {
    fn check(&self) -> Result<(), CliError> {
        for (name, v) in [
            ("--feas-tol", self.feas_tol),
            ("--opt-tol", self.opt_tol),
            ("--improve-tol", self.improve_tol),
            ("--max-cycle-slack", self.max_cycle_slack),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(CliError::Input(format!(
                    "{name} must be a finite nonnegative number"
                )));
            }
        }
        Ok(())
    }
}
