use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use oqs_cli::presets::{self, PRESETS};
use oqs_cli::{plan, run_and_persist, ExperimentConfig, RunError};
use rayon::prelude::*;

#[derive(Parser)]
#[command(name = "oqs", version, about = "Open-quantum-system experiments and figure presets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a configuration file.
    Run { config: PathBuf },
    /// Run a named preset, or `all` of them.
    Preset {
        name: String,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Print the preset catalog.
    ListPresets,
    /// Check a configuration file without running it.
    Validate { config: PathBuf },
}

fn load(path: &PathBuf) -> Result<ExperimentConfig, RunError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| RunError::Validation(oqs_cli::ValidationError(vec![format!("{}: {e}", path.display())])))?;
    Ok(ExperimentConfig::parse(&text)?)
}

fn report(name: &str, r: Result<oqs_cli::RunOutput, RunError>, path: &std::path::Path) -> i32 {
    match r {
        Ok(out) => {
            let audit = if out.info.audit.passes() { "ok" } else { "VIOLATED" };
            println!("{name}: wrote {} ({} rows, {:.2} s, state audit {audit})", path.display(), out.table.rows(), out.seconds);
            0
        }
        Err(e) => {
            eprintln!("{name}: {e}");
            e.exit_code()
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = oqs_cli::init_threads() {
        eprintln!("{e}");
        return ExitCode::from(2);
    }
    let code = match cli.command {
        Command::ListPresets => {
            for p in PRESETS {
                let kind = p.body.lines().next().unwrap_or("").trim_matches(|c| c == '[' || c == ']');
                println!("{:<26} {:<22} {}", p.name, kind, p.description);
            }
            0
        }
        Command::Validate { config } => match load(&config).and_then(|c| Ok(plan(&c)?)) {
            Ok(p) => {
                print!("{}", p.resolved.to_text());
                0
            }
            Err(e) => {
                eprintln!("{e}");
                e.exit_code()
            }
        },
        Command::Run { config } => match load(&config).and_then(|c| Ok(plan(&c)?)) {
            Ok(p) => report(&config.display().to_string(), run_and_persist(&p), &p.output),
            Err(e) => {
                eprintln!("{e}");
                e.exit_code()
            }
        },
        Command::Preset { name, out } => {
            let selected: Vec<_> = if name == "all" { PRESETS.iter().collect() } else { presets::find(&name).into_iter().collect() };
            if selected.is_empty() {
                eprintln!("unknown preset '{name}' (see `oqs list-presets`)");
                2
            } else {
                let codes: Vec<i32> = selected
                    .par_iter()
                    .map(|p| {
                        let planned = p.config(&out).map_err(RunError::from).and_then(|c| Ok(plan(&c)?));
                        match planned {
                            Ok(pl) => report(p.name, run_and_persist(&pl), &pl.output),
                            Err(e) => report(p.name, Err(e), &out),
                        }
                    })
                    .collect();
                codes.into_iter().max().unwrap_or(0)
            }
        }
    };
    ExitCode::from(code as u8)
}
