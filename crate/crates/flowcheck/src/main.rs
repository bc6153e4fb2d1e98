//! `flowcheck` — dependency typing and dynamic-policy verification for a
//! while-language with channel outputs.
//!
//! Exit codes: 0 compliant/secure/agreement, 1 violation/insecure/
//! disagreement, 2 usage or parse errors, 3 unknown/bounded/inconclusive.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use flowcheck::explain::explain_point;
use flowcheck::formats::{self, AttackerFile};
use flowcheck::pipeline::{
    self, load_policy, load_program, run_check, run_oracle, CheckOutcome, OracleKind,
    OracleOptions, PipelineError,
};
use flowcheck_core::checker::{CheckMode, PointVerdict};
use flowcheck_core::lang::{Chan, Point};

#[derive(Parser)]
#[command(name = "flowcheck", version, about = "Very static checking of dynamic information-flow policies")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
enum Format {
    #[default]
    Json,
    Text,
}

#[derive(Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
enum Mode {
    Syntactic,
    #[default]
    Exact,
}

#[derive(Subcommand)]
enum Cmd {
    /// Infer the principal dependency typing of a program.
    Typecheck {
        source: PathBuf,
        #[arg(long, value_enum, default_value_t)]
        format: Format,
        /// Directory of cached typings keyed by source hash.
        #[arg(long)]
        cache: Option<PathBuf>,
    },
    /// Check a program's typing against a dynamic policy.
    Check {
        source: PathBuf,
        policy: PathBuf,
        #[arg(long, value_enum, default_value_t)]
        mode: Mode,
        #[arg(long, default_value_t = 10_000)]
        fuel: usize,
        /// JSON file of per-variable value ranges overriding the policy's.
        #[arg(long)]
        universe: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t)]
        format: Format,
        #[arg(long)]
        cache: Option<PathBuf>,
    },
    /// Run a brute-force semantic oracle.
    Oracle {
        source: PathBuf,
        policy: PathBuf,
        /// One of: two-run, soundness, kb, acpi, pi, theorem1.
        #[arg(long)]
        check: String,
        /// Attacker automaton file (required for kb/acpi/pi).
        #[arg(long)]
        attacker: Option<PathBuf>,
        #[arg(long, default_value_t = 10_000)]
        fuel: usize,
        #[arg(long)]
        universe: Option<PathBuf>,
        /// Attacker family bound for theorem1.
        #[arg(long, default_value_t = 3)]
        max_states: usize,
        /// Attacker family alphabet for theorem1, comma-separated.
        #[arg(long, default_value = "0,1,2")]
        alphabet: String,
        #[arg(long, value_enum, default_value_t)]
        format: Format,
    },
    /// Show why each member of an output point's dependency set is there.
    Explain {
        source: PathBuf,
        policy: PathBuf,
        /// The point, written `chan@point`.
        point: String,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(err) => {
            eprintln!("flowcheck: {err}");
            ExitCode::from(pipeline::EXIT_USAGE as u8)
        }
    }
}

fn dispatch(cli: Cli) -> Result<i32, PipelineError> {
    match cli.command {
        Cmd::Typecheck { source, format, cache } => {
            let program = load_program(&source)?;
            let typing = pipeline::typing_for(&program, cache.as_deref())?;
            let report = formats::typing_report(&program, &typing);
            match format {
                Format::Json => println!("{}", serde_json::to_string_pretty(&report).unwrap()),
                Format::Text => {
                    for section in ["variables", "channels", "points"] {
                        println!("{section}:");
                        let full = report[section].as_object().unwrap();
                        let restricted = report["restricted"][section].as_object().unwrap();
                        for (name, deps) in full {
                            let deps: Vec<&str> =
                                deps.as_array().unwrap().iter().filter_map(|d| d.as_str()).collect();
                            let rvars: Vec<&str> = restricted[name]
                                .as_array()
                                .unwrap()
                                .iter()
                                .filter_map(|d| d.as_str())
                                .collect();
                            println!("  {name}: {{{}}}  (variables: {{{}}})", deps.join(", "), rvars.join(", "));
                        }
                    }
                }
            }
            Ok(pipeline::EXIT_OK)
        }
        Cmd::Check {
            source,
            policy,
            mode,
            fuel,
            universe,
            format,
            cache,
        } => {
            let program = load_program(&source)?;
            let mut resolved = load_policy(&policy, &program)?;
            if let Some(path) = universe {
                let ranges = formats::load_universe(&path)?;
                pipeline::override_universe(&mut resolved, ranges, &program);
            }
            let mode = match mode {
                Mode::Syntactic => CheckMode::Syntactic,
                Mode::Exact => CheckMode::Exact(resolved.universe.clone()),
            };
            let CheckOutcome { report, json, exit } =
                run_check(&program, &resolved, mode, fuel, cache.as_deref())?;
            match format {
                Format::Json => println!("{}", serde_json::to_string_pretty(&json).unwrap()),
                Format::Text => {
                    println!("verdict: {}", json["verdict"].as_str().unwrap());
                    for entry in &report.points {
                        let verdict = match entry.verdict {
                            PointVerdict::Pass => "pass",
                            PointVerdict::Violation => "VIOLATION",
                            PointVerdict::Unknown => "unknown",
                        };
                        let deps: Vec<String> =
                            entry.deps.iter().map(|v| v.to_string()).collect();
                        println!(
                            "  {}@{}: {} (deps {{{}}}, policy {})",
                            entry.chan,
                            entry.point,
                            verdict,
                            deps.join(", "),
                            entry.approx
                        );
                    }
                }
            }
            Ok(exit)
        }
        Cmd::Oracle {
            source,
            policy,
            check,
            attacker,
            fuel,
            universe,
            max_states,
            alphabet,
            format,
        } => {
            let kind = OracleKind::parse(&check).ok_or_else(|| {
                PipelineError::Io(std::io::Error::new(
                    std::io::ErrorKind::InvalidInput,
                    format!("unknown oracle check `{check}`"),
                ))
            })?;
            let program = load_program(&source)?;
            let mut resolved = load_policy(&policy, &program)?;
            if let Some(path) = universe {
                let ranges = formats::load_universe(&path)?;
                pipeline::override_universe(&mut resolved, ranges, &program);
            }
            let attacker = match attacker {
                Some(path) => Some(AttackerFile::load(&path)?.to_attacker()?),
                None => None,
            };
            let alphabet = parse_alphabet(&alphabet)?;
            let options = OracleOptions {
                fuel,
                attacker,
                max_states,
                alphabet,
            };
            let outcome = run_oracle(&program, &resolved, kind, &options)?;
            match format {
                Format::Json => println!("{}", serde_json::to_string_pretty(&outcome.json).unwrap()),
                Format::Text => {
                    println!("check: {}", outcome.json["check"].as_str().unwrap());
                    println!("overall: {}", outcome.json["overall"].as_str().unwrap());
                }
            }
            Ok(outcome.exit)
        }
        Cmd::Explain { source, policy, point } => {
            let program = load_program(&source)?;
            let resolved = load_policy(&policy, &program)?;
            let (chan, point) = parse_point(&point)?;
            let approx = pipeline::build_approx(&program, &resolved);
            let spec = approx.get(&chan, &point).cloned();
            match explain_point(&program, &chan, &point, spec.as_ref()) {
                Ok(text) => {
                    print!("{text}");
                    Ok(pipeline::EXIT_OK)
                }
                Err(err) => {
                    eprintln!("flowcheck: {err}");
                    Ok(pipeline::EXIT_USAGE)
                }
            }
        }
    }
}

fn parse_point(text: &str) -> Result<(Chan, Point), PipelineError> {
    match text.split_once('@') {
        Some((a, p)) if !a.is_empty() && !p.is_empty() => Ok((Chan::new(a), Point::new(p))),
        _ => Err(PipelineError::Io(std::io::Error::new(
            std::io::ErrorKind::InvalidInput,
            format!("point `{text}` must be written chan@point"),
        ))),
    }
}

fn parse_alphabet(text: &str) -> Result<Vec<i64>, PipelineError> {
    text.split(',')
        .map(|s| {
            s.trim().parse::<i64>().map_err(|_| {
                PipelineError::Io(std::io::Error::new(
                    std::io::ErrorKind::InvalidInput,
                    format!("bad alphabet entry `{s}`"),
                ))
            })
        })
        .collect()
}
