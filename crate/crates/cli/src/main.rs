use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use gpaco_cli::{cmd_curve, cmd_grad_norms, cmd_train, cmd_verify_theory, output_root, CurveKind};

#[derive(Parser)]
#[command(
    name = "gpaco",
    about = "Generalized parametric contrastive learning: theory oracles, analysis curves, and deterministic toy training"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the converged-optimum statements against the simplex oracles.
    VerifyTheory {
        /// Weight on sample-sample positive terms.
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        /// Positive-set sizes to verify (comma separated); M = 4K slots each.
        #[arg(long, value_delimiter = ',')]
        k: Vec<usize>,
        /// Convergence tolerance and pass threshold.
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
    },
    /// Export an analysis curve as CSV (header "p,value").
    Curve {
        /// Which curve: l_extra or eq8.
        #[arg(long)]
        which: CurveKind,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        /// Expected positive count K*; may be non-integer.
        #[arg(long = "k-star", default_value_t = 8.192)]
        k_star: f64,
        /// Number of grid points on the open interval (0, 1).
        #[arg(long, default_value_t = 999)]
        points: usize,
        /// Output CSV path; defaults under the output root.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train on synthetic long-tailed data per a JSON config.
    Train {
        /// Path to the run config (dataset + encoder + train sections).
        #[arg(long)]
        config: PathBuf,
        /// Output directory; defaults under the output root.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Per-class classifier gradient norms of a stored run.
    GradNorms {
        /// state.json produced by `train`.
        #[arg(long)]
        state: PathBuf,
        /// data.json produced by `train`.
        #[arg(long)]
        data: PathBuf,
        /// Output CSV path; defaults under the output root.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(1);
        }
    };

    let result = match cli.command {
        Command::VerifyTheory { alpha, k, tol } => cmd_verify_theory(alpha, &k, tol),
        Command::Curve {
            which,
            alpha,
            k_star,
            points,
            out,
        } => {
            let out = out.unwrap_or_else(|| {
                let name = match which {
                    CurveKind::LExtra => "l_extra.csv",
                    CurveKind::Eq8 => "eq8.csv",
                };
                output_root().join(name)
            });
            cmd_curve(which, alpha, k_star, points, &out)
        }
        Command::Train { config, out } => {
            let out = out.unwrap_or_else(|| output_root().join("train"));
            cmd_train(&config, &out)
        }
        Command::GradNorms { state, data, out } => {
            let out = out.unwrap_or_else(|| output_root().join("grad_norms.csv"));
            cmd_grad_norms(&state, &data, &out)
        }
    };

    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
