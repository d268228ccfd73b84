use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fraclab::commands::{self, Command};
use fraclab::config::ExperimentConfig;
use fraclab::error::{exit_code, Error};
use fraclab::exec::Execution;
use fraclab::operator::OperatorKind;

#[derive(Parser)]
#[command(name = "fraclab", version, about = "Dirichlet fractional Laplacian on an interval: spectra, Picone checks, bifurcation")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,

    /// JSON experiment config; omitted fields take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory.
    #[arg(long, global = true, env = "FRACLAB_OUT")]
    out: Option<PathBuf>,

    /// Number of interior grid nodes.
    #[arg(long, global = true)]
    n: Option<usize>,

    /// Fractional order.
    #[arg(long, global = true)]
    s: Option<f64>,

    /// Operator definition: restricted or spectral.
    #[arg(long, global = true)]
    kind: Option<OperatorKind>,

    /// RNG seed for every sampled quantity.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Run all data-parallel loops on one thread.
    #[arg(long, global = true)]
    sequential: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Eigenpairs, nodal domains and the isolatedness certificate.
    Eigs,
    /// Bifurcation scan, branch tracing and the bifurcation diagram.
    Bifurcate,
    /// Property suites; exits 5 if any fails.
    Verify,
    /// Restricted versus spectral eigenvalues on the same grid.
    CompareDefs,
    /// Principal eigenvalue under grid refinement.
    Convergence,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Eigs => Command::Eigs,
            Cmd::Bifurcate => Command::Bifurcate,
            Cmd::Verify => Command::Verify,
            Cmd::CompareDefs => Command::CompareDefs,
            Cmd::Convergence => Command::Convergence,
        }
    }
}

fn load(cli: &Cli) -> Result<ExperimentConfig, Error> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(dir) = &cli.out {
        cfg.output.directory = dir.clone();
    }
    if let Some(n) = cli.n {
        cfg.n = n;
    }
    if let Some(s) = cli.s {
        cfg.s = s;
    }
    if let Some(kind) = cli.kind {
        cfg.operator = kind;
    }
    if let Some(seed) = cli.seed {
        cfg.seeds.rng_seed = seed;
    }
    if cli.sequential {
        cfg.execution = Execution::Sequential;
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cmd = Command::from(cli.command);
    let result = load(&cli).and_then(|cfg| commands::run(cmd, &cfg));
    let code = match result {
        Ok(outcome) => {
            for f in &outcome.files {
                println!("{}", f.display());
            }
            if outcome.exit_code == exit_code::HYPOTHESIS {
                eprintln!("fraclab {}: nonlinearity fails the hypothesis check, see hypothesis.json", cmd.name());
            } else if outcome.exit_code == exit_code::VERIFICATION {
                eprintln!("fraclab {}: verification failed, see verify.json", cmd.name());
            }
            outcome.exit_code
        }
        Err(e) => {
            eprintln!("fraclab {}: {e}", cmd.name());
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}
