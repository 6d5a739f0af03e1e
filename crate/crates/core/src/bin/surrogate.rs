//! `surrogate <task> --config path [--seed k] [--out dir]`

use clap::Parser;
use std::path::PathBuf;
use std::process::ExitCode;

use qsurrogate::harness::{
    exit_code, run_experiment, ExperimentConfig, RunOptions, Task, THREADS_ENV,
};
use qsurrogate::Error;

#[derive(Parser, Debug)]
#[command(
    name = "surrogate",
    version,
    about = "Run a surrogate experiment from a config file"
)]
struct Cli {
    /// Task to run; must match the `task` field of the config.
    task: String,
    /// TOML or JSON experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Root seed, overriding the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory, overriding the environment and the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn configure_threads() -> Result<(), Error> {
    let Ok(v) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = v.trim().parse().map_err(|_| {
        Error::Config(format!(
            "{THREADS_ENV} must be a positive integer, got '{v}'"
        ))
    })?;
    if n == 0 {
        return Err(Error::Config(format!("{THREADS_ENV} must be positive")));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Config(e.to_string()))
}

fn run(cli: Cli) -> Result<(), Error> {
    configure_threads()?;
    let task: Task = cli.task.parse()?;
    let cfg = ExperimentConfig::load(&cli.config)?;
    if cfg.task != task {
        return Err(Error::Config(format!(
            "command line asks for {task} but {} configures {}",
            cli.config.display(),
            cfg.task
        )));
    }
    let report = run_experiment(cfg, &RunOptions::from_env(cli.seed, cli.out))?;
    println!("{}", serde_json::to_string_pretty(&report.summary)?);
    eprintln!(
        "wrote {} files to {}",
        report.manifest.files.len() + 1,
        report.out_dir.display()
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
