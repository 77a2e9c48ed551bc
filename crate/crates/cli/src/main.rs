use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use twistspec_cli::config::{seed_from_env, ConfigError, RunConfig};
use twistspec_cli::output::{write_all, write_atomic};
use twistspec_cli::pipeline::execute;
use twistspec_cli::sweep::{check_param, parse_values, rows_csv, run_sweep, SweepParam};

#[derive(Parser)]
#[command(name = "twistspec", version, about = "Spectral pipelines for twisted magnetic tubes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the pipelines listed in a config.
    Run {
        config: PathBuf,
        /// Worker threads.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Output directory, overriding `output_dir`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a config once per value of one parameter.
    Sweep {
        config: PathBuf,
        /// One of beta0, mu.amplitude, potential.amplitude, h, L.
        #[arg(long)]
        param: SweepParam,
        /// Comma-separated values; fractions such as 1/64 are accepted.
        #[arg(long, allow_hyphen_values = true)]
        values: String,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a config against the schema without running it.
    Validate { config: PathBuf },
}

const EXIT_SCHEMA: u8 = 1;
const EXIT_PIPELINE: u8 = 2;

fn load(path: &Path) -> Result<RunConfig, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    RunConfig::from_json(&text).map_err(|e: ConfigError| format!("{}: {e}", path.display()))
}

fn pool(jobs: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .expect("thread pool")
}

fn resolved(path: &Path, out: Option<PathBuf>) -> Result<(RunConfig, Option<u64>), String> {
    let mut cfg = load(path)?;
    if let Some(o) = out {
        cfg.output_dir = o;
    }
    let seed = seed_from_env().map_err(|e| e.to_string())?;
    Ok((cfg, seed))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Validate { config } => match load(&config) {
            Ok(_) => {
                println!("{}: ok", config.display());
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(EXIT_SCHEMA)
            }
        },
        Command::Run { config, jobs, out } => {
            let (cfg, seed) = match resolved(&config, out) {
                Ok(v) => v,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(EXIT_SCHEMA);
                }
            };
            let cfg = match cfg.resolve(seed) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {}: {e}", config.display());
                    return ExitCode::from(EXIT_SCHEMA);
                }
            };
            let result = pool(jobs).install(|| execute(&cfg));
            if let Err(e) = write_all(&cfg.output_dir, &result.artifacts) {
                eprintln!("error: writing outputs: {e:#}");
                return ExitCode::from(EXIT_PIPELINE);
            }
            for e in &result.errors {
                eprintln!("error: {e}");
            }
            println!("{}: {:?} -> {}", config.display(), result.outcome, cfg.output_dir.display());
            ExitCode::from(result.outcome.exit_code() as u8)
        }
        Command::Sweep { config, param, values, jobs, out } => {
            let (cfg, seed) = match resolved(&config, out) {
                Ok(v) => v,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(EXIT_SCHEMA);
                }
            };
            let values = match parse_values(&values) {
                Ok(v) => v,
                Err(e) => {
                    eprintln!("error: --values: {e}");
                    return ExitCode::from(EXIT_SCHEMA);
                }
            };
            if let Err(e) = check_param(&cfg, param) {
                eprintln!("error: --param {}: {e}", param.name());
                return ExitCode::from(EXIT_SCHEMA);
            }
            let sweep = pool(jobs).install(|| run_sweep(&cfg, param, &values, seed));
            let dir = cfg.output_dir.clone();
            let write = || -> anyhow::Result<()> {
                for (i, run) in sweep.runs.iter().enumerate() {
                    if let Some(r) = run {
                        write_all(&dir.join("runs").join(format!("{i:03}")), &r.artifacts)?;
                    }
                }
                write_atomic(&dir.join("sweep.csv"), &rows_csv(&sweep.rows)?)?;
                let mut js = serde_json::to_string_pretty(&sweep.rows)?;
                js.push('\n');
                write_atomic(&dir.join("sweep.json"), js.as_bytes())?;
                Ok(())
            };
            if let Err(e) = write() {
                eprintln!("error: writing outputs: {e:#}");
                return ExitCode::from(EXIT_PIPELINE);
            }
            for r in &sweep.rows {
                let v = r.headline.verdict.as_deref().unwrap_or("-");
                println!("{} = {}: {} {}", r.param, r.value, r.status, v);
            }
            ExitCode::from(sweep.outcome().exit_code() as u8)
        }
    }
}
