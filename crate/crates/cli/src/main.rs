use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use kaehler_cli::{cmd_export, cmd_generate, cmd_verify, RunConfig};

/// Exit status: 0 success, 1 a non-control suite failed, 2 usage or runtime error.
#[derive(Parser)]
#[command(name = "kaehler", version, about = "Minimal Kaehler hypersurfaces: generate, verify, export")]
struct Cli {
    /// Print the default configuration as JSON and exit.
    #[arg(long)]
    print_defaults: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Build the Weierstrass chain and write a chart bundle.
    Generate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run identity suites and write report.json and report.txt.
    Verify {
        #[arg(long)]
        config: PathBuf,
        /// Restrict to these suites (repeatable; `all` and `controls` expand).
        #[arg(long = "suite")]
        suites: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write OBJ and CSV files for a two-dimensional slice.
    Export {
        #[arg(long)]
        config: PathBuf,
        /// e.g. `x,y,u1=0.1`; overrides the config.
        #[arg(long)]
        slice: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> anyhow::Result<u8> {
    if cli.print_defaults {
        println!("{}", RunConfig::defaults_json());
        return Ok(0);
    }
    let Some(command) = cli.command else {
        anyhow::bail!("no command given; see --help");
    };
    match command {
        Command::Generate { config, out } => {
            let cfg = RunConfig::load(&config)?;
            let path = cmd_generate(&cfg, out.as_deref().unwrap_or(&cfg.output_dir))?;
            println!("{}", path.display());
            Ok(0)
        }
        Command::Verify { config, suites, out } => {
            let cfg = RunConfig::load(&config)?;
            let report = cmd_verify(&cfg, &suites, out.as_deref().unwrap_or(&cfg.output_dir))?;
            print!("{}", report.table());
            for s in report.suites.iter().filter(|s| s.error.is_some()) {
                eprintln!("suite {} failed to run: {}", s.suite, s.error.as_deref().unwrap_or_default());
            }
            Ok(report.exit_code() as u8)
        }
        Command::Export { config, slice, out } => {
            let cfg = RunConfig::load(&config)?;
            for p in cmd_export(&cfg, slice.as_deref(), out.as_deref().unwrap_or(&cfg.output_dir))? {
                println!("{}", p.display());
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
