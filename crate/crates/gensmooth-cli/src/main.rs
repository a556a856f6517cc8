use clap::{Parser, Subcommand};
use gensmooth_cli::commands::{self, RunOptions};
use gensmooth_cli::config::{self, CertifyConfig, Format};
use gensmooth_cli::suites::{Suite, VerifyConfig};
use gensmooth_cli::{exit_code, presets, CliError, Status};
use std::path::PathBuf;

/// Simulate and verify AdaGrad-Norm and simple adaptive methods on
/// (L0,L1)-smooth objectives under affine-variance noise.
///
/// Exit codes: 0 success, 1 check or certification failure, 2 configuration
/// or precondition error. Seeds resolve from --seed, then the config's
/// master_seed, then GENSMOOTH_SEED, then 0.
#[derive(Debug, Parser)]
#[command(name = "gensmooth", version)]
struct Cli {
    /// Master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check smoothness and poly-boundedness claims; writes certify.json.
    Certify {
        /// Claims file (default: the shipped zoo).
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Run a study from a preset name or a config file.
    ///
    /// Convergence studies write rate_table.csv (T,quantile,quantile_se,mean,mean_se),
    /// plot.csv (T,quantile), rate_table.json, and plot.svg. Divergence studies write
    /// failure_report.csv (algorithm,empirical,empirical_se,n,bound,t0,delta,pass),
    /// coupling.csv (paths,coupling_violations,bad_step_violations,pre_escape_violations),
    /// and failure_report.json. Every run also writes config.json with the resolved seed.
    Run {
        /// Preset name or path to a JSON config.
        target: String,
        /// Output formats (default: csv,json).
        #[arg(long, value_delimiter = ',')]
        format: Option<Vec<Format>>,
    },
    /// Run an invariant suite; prints one line per check and a JSON summary.
    Verify {
        #[arg(value_enum)]
        suite: Suite,
        /// Suite parameters (default: the acceptance setup).
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Summarize the JSON outputs in a directory as Markdown.
    Report { dir: PathBuf },
    /// List the bundled presets, or print one as JSON.
    Presets {
        #[arg(long)]
        show: Option<String>,
    },
}

fn dispatch(cli: Cli) -> Result<Status, CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(CliError::config)?;
    }
    match cli.command {
        Command::Certify { config } => {
            let cfg = match config {
                Some(p) => config::load::<CertifyConfig>(&p)?,
                None => CertifyConfig::default(),
            };
            commands::cmd_certify(&cfg, cli.seed, cli.out.as_deref())
        }
        Command::Run { target, format } => {
            let cfg = commands::resolve_target(&target)?;
            let opts = RunOptions {
                seed: cli.seed,
                out: cli.out,
                formats: format,
            };
            commands::cmd_run(&cfg, &opts)
        }
        Command::Verify { suite, config } => {
            let cfg = match config {
                Some(p) => config::load::<VerifyConfig>(&p)?,
                None => VerifyConfig::default(),
            };
            commands::cmd_verify(suite, &cfg, cli.seed, cli.out.as_deref())
        }
        Command::Report { dir } => commands::cmd_report(&dir),
        Command::Presets { show } => {
            match show {
                Some(name) => {
                    let cfg = presets::preset(&name)
                        .ok_or_else(|| CliError::Config(format!("unknown preset {name:?}")))?;
                    print!("{}", gensmooth_cli::output::to_json(&cfg));
                }
                None => presets::NAMES.iter().for_each(|n| println!("{n}")),
            }
            Ok(Status::Success)
        }
    }
}

fn main() {
    let result = dispatch(Cli::parse());
    if let Err(e) = &result {
        eprintln!("gensmooth: {e}");
    }
    std::process::exit(exit_code(&result));
}
