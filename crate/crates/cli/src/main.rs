use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use z2metts::output::{write_manifest, OutDir};
use z2metts::{experiments, CliError, ExperimentKind};

#[derive(Parser, Debug)]
#[command(
    name = "z2metts",
    version,
    about = "Finite-temperature METTS experiments on the Z2 gauge chain"
)]
struct Args {
    experiment: ExperimentKind,
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
}

fn run(args: Args) -> Result<PathBuf, CliError> {
    let mut cfg = z2metts::config::load(&args.config)?;
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(o) = args.out {
        cfg.out = Some(o);
    }
    if let Some(w) = args.workers {
        cfg.workers = Some(w);
    }
    cfg.validate(args.experiment)?;
    let root = cfg
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from("out").join(args.experiment.name()));
    let out = OutDir::create(&root)?;

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(w) = cfg.workers {
        pool = pool.num_threads(w);
    }
    let pool = pool
        .build()
        .map_err(|e| CliError::config(format!("cannot start {:?} workers: {e}", cfg.workers)))?;
    pool.install(|| experiments::run(args.experiment, &cfg, &out))?;
    write_manifest(&out, args.experiment, &cfg)?;
    Ok(root)
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(args) {
        Ok(root) => {
            eprintln!("wrote {}", root.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
