mod commands;
mod config;
mod report;

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::commands::Failure;

#[derive(Debug, Parser)]
#[command(
    name = "semiconj",
    version,
    about = "Classify self-maps of the disk or half-plane and compute their semiconjugations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Output {
    Json,
    Csv,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Map expression in `z`, e.g. "2*z+i".
    #[arg(long)]
    pub map: Option<String>,
    /// disk or halfplane.
    #[arg(long)]
    pub domain: Option<String>,
    /// Seed point(s) as `re,im`; repeat for several seeds.
    #[arg(long = "seed", allow_hyphen_values = true)]
    pub seeds: Vec<String>,
    /// Iteration cap (also read from SEMICONJ_MAX_ITER).
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// JSON run configuration; flags take precedence.
    #[arg(long)]
    pub config: Option<std::path::PathBuf>,
    #[arg(long, value_enum)]
    pub output: Option<Output>,
}

#[derive(Debug, Args)]
pub struct EngineArgs {
    /// Cauchy tolerance.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Functional-equation residual tolerance.
    #[arg(long)]
    pub res_tol: Option<f64>,
    /// Probe grid: `default` or `re,im;re,im;...`.
    #[arg(long, allow_hyphen_values = true)]
    pub grid: Option<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Classify a self-map by the dynamics of its orbits.
    Classify {
        #[command(flatten)]
        common: Common,
    },
    /// Compute the semiconjugation g (disk model) or h (planar model) on a grid.
    Semiconj {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        engine: EngineArgs,
        /// theoremA or theoremB; chosen from the classification when omitted.
        #[arg(long)]
        model: Option<String>,
    },
    /// Check a candidate solution σ∘φ = τ∘σ against the computed limit.
    Verify {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        engine: EngineArgs,
        /// Candidate σ: a closed form in z, or in the limit value with --compose.
        #[arg(long)]
        sigma: String,
        /// τ as `a,b` (z ↦ az + b, real) or `are,aim,bre,bim` (complex).
        #[arg(long, allow_hyphen_values = true)]
        tau: String,
        /// Read --sigma as F in σ = F∘g.
        #[arg(long)]
        compose: bool,
        /// Codomain of σ for the forward equation: halfplane or disk.
        #[arg(long, default_value = "halfplane")]
        codomain: String,
        /// Second base point for the change-of-base-point identity.
        #[arg(long, allow_hyphen_values = true)]
        alt_base: Option<String>,
        /// Number of point pairs for the maximality check.
        #[arg(long, default_value_t = 200)]
        pairs: usize,
    },
    /// Build a member of an intertwiner family and check its defining equation.
    Intertwine {
        /// Family with parameters, e.g. "h->h(4,2)", "p->e(+,1)", "planar:p->e(0.5,1.5)".
        #[arg(long)]
        family: String,
        #[arg(long, value_enum, default_value_t = Output::Json)]
        output: Output,
    },
    /// Run the acceptance battery.
    Suite {
        #[arg(long, value_enum, default_value_t = Output::Json)]
        output: Output,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            if !e.use_stderr() {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let f = Failure::usage(e.render().to_string().trim().to_string());
            f.emit();
            return ExitCode::from(f.code);
        }
    };
    let result = match cli.command {
        Command::Classify { common } => commands::classify(common),
        Command::Semiconj {
            common,
            engine,
            model,
        } => commands::semiconj(common, engine, model),
        Command::Verify {
            common,
            engine,
            sigma,
            tau,
            compose,
            codomain,
            alt_base,
            pairs,
        } => commands::verify(commands::VerifyArgs {
            common,
            engine,
            sigma,
            tau,
            compose,
            codomain,
            alt_base,
            pairs,
        }),
        Command::Intertwine { family, output } => commands::intertwine(&family, output),
        Command::Suite { output } => commands::suite(output),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            f.emit();
            ExitCode::from(f.code)
        }
    }
}
