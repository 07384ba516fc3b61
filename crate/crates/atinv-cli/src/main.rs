use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use atinv_cli::config::{RunConfig, DEFAULT_SEED};
use atinv_cli::exit_codes;
use atinv_cli::runs;

#[derive(Parser)]
#[command(
    name = "atinv",
    version,
    about = "Invariants of approximately transitive systems given by polynomial sequence rules"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute one evaluation invariant with its certified bracket.
    Invariant {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Sweep the family parameter; writes CSV and optionally an SVG chart.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write a chart next to the CSV output.
        #[arg(long)]
        svg: bool,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Compare two systems under shared witnesses and probes.
    Distinguish {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Run a verification suite; exits nonzero on any violated inequality.
    Verify {
        #[arg(long)]
        suite: String,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load_config(path: &Path, workers: Option<usize>) -> Result<RunConfig, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let mut cfg = RunConfig::parse(&text)?;
    if let Some(w) = workers {
        cfg.workers = w;
        cfg.validate()?;
    }
    Ok(cfg)
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<(), String> {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| format!("cannot write {}: {e}", path.display())),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn fail(code: i32, msg: &str) -> ExitCode {
    eprintln!("atinv: {msg}");
    ExitCode::from(code as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Invariant { config, out, workers } => {
            let cfg = match load_config(&config, workers) {
                Ok(c) => c,
                Err(e) => return fail(exit_codes::CONFIG_ERROR, &e),
            };
            match runs::run_invariant(&cfg) {
                Ok(report) => {
                    let text = serde_json::to_string_pretty(&report).expect("report serializes");
                    if let Err(e) = emit(&out, &text) {
                        return fail(exit_codes::CONFIG_ERROR, &e);
                    }
                    if report.precision_met {
                        ExitCode::from(exit_codes::OK as u8)
                    } else {
                        eprintln!(
                            "atinv: bracket width {} exceeds the requested {}",
                            report.result.width(),
                            cfg.tolerances.target_width
                        );
                        ExitCode::from(exit_codes::PRECISION_NOT_MET as u8)
                    }
                }
                Err(e) => fail(exit_codes::CONFIG_ERROR, &e),
            }
        }
        Command::Sweep { config, out, svg, workers } => {
            let cfg = match load_config(&config, workers) {
                Ok(c) => c,
                Err(e) => return fail(exit_codes::CONFIG_ERROR, &e),
            };
            match runs::run_sweep(&cfg, svg) {
                Ok(output) => {
                    if let Err(e) = emit(&out, output.csv.trim_end()) {
                        return fail(exit_codes::CONFIG_ERROR, &e);
                    }
                    if let (Some(chart), Some(path)) = (&output.svg, &out) {
                        let svg_path = path.with_extension("svg");
                        if let Err(e) = fs::write(&svg_path, chart) {
                            return fail(
                                exit_codes::CONFIG_ERROR,
                                &format!("cannot write {}: {e}", svg_path.display()),
                            );
                        }
                    }
                    ExitCode::from(exit_codes::OK as u8)
                }
                Err(e) => fail(exit_codes::CONFIG_ERROR, &e),
            }
        }
        Command::Distinguish { config, out, workers } => {
            let cfg = match load_config(&config, workers) {
                Ok(c) => c,
                Err(e) => return fail(exit_codes::CONFIG_ERROR, &e),
            };
            match runs::run_distinguish(&cfg) {
                Ok(report) => {
                    let text = serde_json::to_string_pretty(&report).expect("report serializes");
                    if let Err(e) = emit(&out, &text) {
                        return fail(exit_codes::CONFIG_ERROR, &e);
                    }
                    ExitCode::from(exit_codes::OK as u8)
                }
                Err(e) => fail(exit_codes::CONFIG_ERROR, &e),
            }
        }
        Command::Verify { suite, config, out } => {
            let seed = match config {
                Some(path) => match load_config(&path, None) {
                    Ok(cfg) => cfg.seed,
                    Err(e) => return fail(exit_codes::CONFIG_ERROR, &e),
                },
                None => DEFAULT_SEED,
            };
            match runs::run_verify(&suite, seed) {
                Ok((report, passed)) => {
                    let text = serde_json::to_string_pretty(&report).expect("report serializes");
                    if let Err(e) = emit(&out, &text) {
                        return fail(exit_codes::CONFIG_ERROR, &e);
                    }
                    if passed {
                        ExitCode::from(exit_codes::OK as u8)
                    } else {
                        fail(exit_codes::VERIFICATION_FAILURE, "verification suite reported violations")
                    }
                }
                Err(e) => fail(exit_codes::CONFIG_ERROR, &e),
            }
        }
    }
}
