use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use necsim::{run, ConfigFile, ExperimentConfig, ExperimentKind, Overrides};
use necsim_core::entropy::PathMode;

/// Run a Network Evolution Chain experiment and write its outputs.
#[derive(Debug, Parser)]
#[command(name = "necsim", version)]
struct Args {
    /// Experiment to run.
    kind: ExperimentKind,

    /// TOML file with experiment settings; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,

    #[arg(long)]
    seed: Option<u64>,

    /// Chain length in states.
    #[arg(long)]
    length: Option<usize>,

    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Maximum number of nodes.
    #[arg(long = "nmax")]
    n_max: Option<usize>,

    /// Edge probability of new nodes.
    #[arg(long)]
    q: Option<f64>,

    /// Path probability used for entropy estimates: graph-kernel or labeled-path.
    #[arg(long, value_parser = clap::value_parser!(PathMode))]
    mode: Option<PathMode>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let result = (|| {
        let file = match &args.config {
            Some(path) => ConfigFile::load(path)?,
            None => ConfigFile::default(),
        };
        let overrides = Overrides {
            seed: args.seed,
            length: args.length,
            out: args.out.clone(),
            n_max: args.n_max,
            q: args.q,
            mode: args.mode,
        };
        let config = ExperimentConfig::resolve(Some(args.kind), file, overrides)?;
        run(&config)
    })();
    match result {
        Ok(report) => {
            for path in &report.outputs {
                println!("wrote {}", path.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
