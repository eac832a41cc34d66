use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sirlab_harness::acceptance::{run_criterion, CRITERIA};
use sirlab_harness::plot::emit_plots;
use sirlab_harness::study::{run_pde, run_simulation};
use sirlab_harness::{load_config, run_clt_study, run_lln_study, ExperimentConfig, HarnessError, StudyResult};

#[derive(Parser)]
#[command(name = "sirlab", version, about = "Spatial SIR particle system: simulation, mean-field PDE and fluctuation studies")]
struct Cli {
    /// Experiment configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides the configured one.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Master seed override.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate the configuration, then print it with defaults filled in.
    Validate,
    /// One particle run of the first population size: counts CSV, snapshots, plot.
    Simulate,
    /// Mean-field solve with the L1 bound checks.
    Pde {
        /// Also run the Picard iteration and compare.
        #[arg(long)]
        picard: bool,
    },
    /// Error against the mean field over the population sizes, with the log-log slope.
    LlnStudy,
    /// Fluctuation ensembles, Gaussianity and covariance against the Galerkin system.
    CltStudy,
    /// SVG plots of CSV artifacts.
    Plot {
        #[arg(required = true)]
        csv: Vec<PathBuf>,
    },
    /// Acceptance criteria; all of them unless one is named.
    Acceptance {
        #[arg(long)]
        criterion: Option<usize>,
    },
    /// Print the reference configuration.
    Standard,
}

enum Status {
    Pass,
    GateFailure,
}

fn config(cli: &Cli) -> Result<ExperimentConfig, HarnessError> {
    let path = cli
        .config
        .as_deref()
        .ok_or_else(|| HarnessError::Validation("this command needs --config PATH".into()))?;
    let mut cfg = load_config(path)?;
    if let Some(seed) = cli.seed {
        cfg.sim.seed = seed;
    }
    Ok(cfg)
}

fn report(result: &StudyResult) -> Status {
    print!("{result}");
    if result.passed() {
        Status::Pass
    } else {
        Status::GateFailure
    }
}

fn run(cli: &Cli) -> Result<Status, HarnessError> {
    if let Some(threads) = cli.threads {
        if threads == 0 {
            return Err(HarnessError::Validation("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| HarnessError::Threads(e.to_string()))?;
    }
    match &cli.command {
        Command::Validate => {
            let cfg = config(cli)?;
            println!("{}", cfg.to_json());
            Ok(Status::Pass)
        }
        Command::Standard => {
            println!("{}", ExperimentConfig::standard().to_json());
            Ok(Status::Pass)
        }
        Command::Simulate => {
            let cfg = config(cli)?;
            Ok(report(&run_simulation(&cfg, &cfg.output_dir(cli.out.as_deref()))?))
        }
        Command::Pde { picard } => {
            let cfg = config(cli)?;
            Ok(report(&run_pde(&cfg, &cfg.output_dir(cli.out.as_deref()), *picard)?))
        }
        Command::LlnStudy => {
            let cfg = config(cli)?;
            Ok(report(&run_lln_study(&cfg, &cfg.output_dir(cli.out.as_deref()))?))
        }
        Command::CltStudy => {
            let cfg = config(cli)?;
            Ok(report(&run_clt_study(&cfg, &cfg.output_dir(cli.out.as_deref()))?))
        }
        Command::Plot { csv } => {
            let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("out"));
            std::fs::create_dir_all(&out).map_err(|source| HarnessError::File { path: out.clone(), source })?;
            for svg in emit_plots(csv, &out)? {
                println!("wrote {}", svg.display());
            }
            Ok(Status::Pass)
        }
        Command::Acceptance { criterion } => {
            let scratch = cli.out.clone().unwrap_or_else(|| Path::new("out").join("acceptance"));
            let ids: Vec<usize> = match criterion {
                Some(k) => vec![*k],
                None => CRITERIA.iter().map(|(k, _)| *k).collect(),
            };
            let mut all = true;
            for id in ids {
                let outcome = run_criterion(id, &scratch)?;
                println!("{outcome}");
                all &= outcome.passed;
            }
            Ok(if all { Status::Pass } else { Status::GateFailure })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(Status::Pass) => ExitCode::SUCCESS,
        Ok(Status::GateFailure) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
