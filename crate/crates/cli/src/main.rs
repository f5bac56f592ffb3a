use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ncergo_cli::acceptance::{self, summary_line};
use ncergo_cli::config::schema_text;
use ncergo_cli::emit;
use ncergo_cli::runner::{self, default_out_dir};
use ncergo_cli::{CliError, ExperimentConfig, Format};

#[derive(Parser)]
#[command(
    name = "ncergo",
    version,
    about = "Noncommutative ergodic averages: experiments and checks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment described by a JSON config.
    Run {
        config: PathBuf,
        /// Output directory (overrides the config).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Series file format (overrides the config).
        #[arg(long, value_enum)]
        format: Option<Format>,
        /// Fixture seed (overrides the config).
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        quiet: bool,
    },
    /// Print the JSON Schema of experiment configs.
    Schema,
    /// Run the built-in acceptance suite and write verify.json.
    Verify {
        #[arg(long, default_value = "ncergo-verify")]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        quiet: bool,
    },
}

fn run_command(
    config: PathBuf,
    out: Option<PathBuf>,
    format: Option<Format>,
    seed: Option<u64>,
    quiet: bool,
) -> Result<bool, CliError> {
    let text = std::fs::read_to_string(&config).map_err(|e| CliError::io(&config, e))?;
    let mut cfg = ExperimentConfig::from_json(&text)?;
    if let Some(s) = seed {
        cfg.fixture.seed = s;
    }
    let dir = out.unwrap_or_else(|| default_out_dir(&cfg));
    let format = format.or(cfg.output.format).unwrap_or_default();
    let report = runner::run(&cfg, Some(&dir), format)?;
    if !quiet {
        for c in report.checks.iter().filter(|c| !c.pass) {
            eprintln!(
                "FAIL {} {:?}: residual {:e}, tolerance {:e}",
                c.check, c.indices, c.residual, c.tolerance
            );
        }
        println!(
            "{}: {} ({} checks, report in {})",
            cfg.experiment,
            if report.pass { "PASS" } else { "FAIL" },
            report.checks.len(),
            dir.join(runner::REPORT_FILE).display()
        );
    }
    Ok(report.pass)
}

fn verify_command(out: PathBuf, seed: u64, quiet: bool) -> Result<bool, CliError> {
    let report = acceptance::verify(seed, |r| {
        if !quiet {
            println!("{}", summary_line(r));
        }
    })?;
    let path = out.join("verify.json");
    emit::write_atomic(&path, emit::to_json(&report).as_bytes())?;
    if !quiet {
        println!("report in {}", path.display());
    }
    Ok(report.pass)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            config,
            out,
            format,
            seed,
            quiet,
        } => run_command(config, out, format, seed, quiet),
        Command::Verify { out, seed, quiet } => verify_command(out, seed, quiet),
        Command::Schema => {
            print!("{}", schema_text());
            Ok(true)
        }
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
