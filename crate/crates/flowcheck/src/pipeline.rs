//! End-to-end orchestration: parse → infer → approximate → check →
//! oracle. Shared between the CLI and the test suites.

use std::collections::BTreeMap;
use std::path::Path;

use serde_json::{json, Value};
use thiserror::Error;

use flowcheck_core::checker::{check_compliance, CheckMode, Compliance, ComplianceReport, PointVerdict};
use flowcheck_core::lang::{parse_program, Chan, Command, ParseError};
use flowcheck_core::oracle::{
    acpi_check, enumerate_attackers, kb_check, pi_check, theorem1_crosscheck, two_run_pi_check,
    typing_soundness_check, FiniteAttacker, Theorem1Report, Verdict,
};
use flowcheck_core::policy::{approximate_policy, PolicyApprox};
use flowcheck_core::semantics::Universe;
use flowcheck_core::typing::{infer, DepEnv};
use flowcheck_core::lang::Var;

use crate::cache;
use crate::formats::{
    self, compliance_report_json, counterexample_json, resolve_policy, verdict_json,
    verdict_name, PolicyFile, ResolvedPolicy,
};

/// Exit-code contract: 0 compliant/secure, 1 violation/insecure,
/// 2 usage or parse error, 3 unknown/bounded.
pub const EXIT_OK: i32 = 0;
pub const EXIT_VIOLATION: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_UNKNOWN: i32 = 3;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("{path}: {error}")]
    Parse { path: String, error: ParseError },
    #[error("{0}")]
    Format(#[from] formats::FormatError),
    #[error("{0}")]
    Cache(#[from] cache::CacheError),
    #[error("{0}")]
    Checker(#[from] flowcheck_core::checker::CheckerError),
    #[error("the `{0}` check requires --attacker")]
    AttackerRequired(String),
}

pub fn load_program(path: &Path) -> Result<Command, PipelineError> {
    let text = std::fs::read_to_string(path)?;
    parse_program(&text).map_err(|error| PipelineError::Parse {
        path: path.display().to_string(),
        error,
    })
}

pub fn load_policy(path: &Path, program: &Command) -> Result<ResolvedPolicy, PipelineError> {
    let file = PolicyFile::load(path)?;
    Ok(resolve_policy(&file, program)?)
}

/// Replaces the universe from a `--universe` file, keeping program
/// variables covered.
pub fn override_universe(
    resolved: &mut ResolvedPolicy,
    ranges: BTreeMap<String, Vec<i64>>,
    program: &Command,
) {
    let mut merged: BTreeMap<Var, Vec<i64>> = ranges
        .into_iter()
        .map(|(v, vals)| (Var::new(v), vals))
        .collect();
    for var in program.variables() {
        merged.entry(var).or_insert_with(|| vec![0, 1]);
    }
    resolved.universe = Universe::from_ranges(merged);
}

/// The policy approximation for a program: computed, then patched by any
/// per-point overrides from the policy file.
pub fn build_approx(program: &Command, resolved: &ResolvedPolicy) -> PolicyApprox {
    let mut approx = approximate_policy(program, &resolved.spec);
    for ((chan, point), spec) in &resolved.overrides {
        approx.insert(chan.clone(), point.clone(), spec.clone());
    }
    approx
}

/// The typing for a program, via the cache when a directory is given.
pub fn typing_for(program: &Command, cache_dir: Option<&Path>) -> Result<DepEnv, PipelineError> {
    match cache_dir {
        Some(dir) => Ok(cache::typing_for(dir, program)?),
        None => Ok(infer(program)),
    }
}

#[derive(Debug)]
pub struct CheckOutcome {
    pub report: ComplianceReport,
    pub json: Value,
    pub exit: i32,
}

/// The full static check: infer (or load) the typing, approximate the
/// policy, compare point by point. In exact mode a violation additionally
/// gets a semantic witness attempt: the two-run oracle runs on each
/// violating channel so imprecision can be told apart from a real leak.
pub fn run_check(
    program: &Command,
    resolved: &ResolvedPolicy,
    mode: CheckMode,
    fuel: usize,
    cache_dir: Option<&Path>,
) -> Result<CheckOutcome, PipelineError> {
    let typing = typing_for(program, cache_dir)?;
    let approx = build_approx(program, resolved);
    let report = check_compliance(&typing, &approx, &mode)?;

    let mut witnesses = Vec::new();
    if report.overall == Compliance::Violation {
        if let CheckMode::Exact(universe) = &mode {
            let mut channels: Vec<Chan> = report
                .points
                .iter()
                .filter(|p| p.verdict == PointVerdict::Violation)
                .map(|p| p.chan.clone())
                .collect();
            channels.dedup();
            for chan in channels {
                let verdict = two_run_pi_check(program, &resolved.spec, &chan, universe, fuel);
                witnesses.push(json!({
                    "channel": chan.to_string(),
                    "two_run": verdict_json(&verdict),
                    "real_leak": verdict.is_insecure(),
                }));
            }
        }
    }

    let json = compliance_report_json(&report, &witnesses);
    let exit = match report.overall {
        Compliance::Compliant => EXIT_OK,
        Compliance::Violation => EXIT_VIOLATION,
        Compliance::Unknown => EXIT_UNKNOWN,
    };
    Ok(CheckOutcome { report, json, exit })
}

/// Which semantic oracle to run.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum OracleKind {
    TwoRun,
    Soundness,
    Kb,
    Acpi,
    Pi,
    Theorem1,
}

impl OracleKind {
    pub fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "two-run" => OracleKind::TwoRun,
            "soundness" => OracleKind::Soundness,
            "kb" => OracleKind::Kb,
            "acpi" => OracleKind::Acpi,
            "pi" => OracleKind::Pi,
            "theorem1" => OracleKind::Theorem1,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            OracleKind::TwoRun => "two-run",
            OracleKind::Soundness => "soundness",
            OracleKind::Kb => "kb",
            OracleKind::Acpi => "acpi",
            OracleKind::Pi => "pi",
            OracleKind::Theorem1 => "theorem1",
        }
    }
}

/// Insecure verdicts are replayable: attach the full label dumps of both
/// runs of the counterexample.
fn verdict_with_replay(
    program: &Command,
    resolved: &ResolvedPolicy,
    fuel: usize,
    verdict: &Verdict,
) -> Value {
    let mut json = verdict_json(verdict);
    if let Verdict::Insecure(ce) = verdict {
        let dump = |store: &flowcheck_core::semantics::Store| {
            let run = flowcheck_core::semantics::run(
                resolved.spec.initial_config(program.clone(), store.clone()),
                fuel,
            );
            formats::labels_json(&run.labels)
        };
        json["counterexample"]["replay"] = json!({
            "sigma_run": dump(&ce.sigma),
            "rho_run": ce.rho.as_ref().map(dump),
        });
    }
    json
}

pub struct OracleOptions {
    pub fuel: usize,
    pub attacker: Option<FiniteAttacker>,
    pub max_states: usize,
    pub alphabet: Vec<i64>,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions {
            fuel: 10_000,
            attacker: None,
            max_states: 3,
            alphabet: vec![0, 1, 2],
        }
    }
}

#[derive(Debug)]
pub struct OracleOutcome {
    pub json: Value,
    pub exit: i32,
}

fn merge(overall: &mut &'static str, verdict: &Verdict) {
    match verdict {
        Verdict::Insecure(_) => *overall = "insecure",
        Verdict::Bounded { .. } if *overall == "secure" => *overall = "bounded",
        _ => {}
    }
}

/// Runs one oracle over every channel of the program (and for the
/// per-attacker checks, every store of the universe), aggregating to a
/// single machine-readable verdict.
pub fn run_oracle(
    program: &Command,
    resolved: &ResolvedPolicy,
    kind: OracleKind,
    options: &OracleOptions,
) -> Result<OracleOutcome, PipelineError> {
    let universe = &resolved.universe;
    let spec = &resolved.spec;
    let fuel = options.fuel;
    let channels: Vec<Chan> = program.channels().into_iter().collect();

    let mut overall: &'static str = "secure";
    let mut per_channel = serde_json::Map::new();

    match kind {
        OracleKind::Soundness => {
            let typing = infer(program);
            let verdict = typing_soundness_check(program, &typing, universe, fuel);
            merge(&mut overall, &verdict);
            per_channel.insert(
                "all".into(),
                verdict_with_replay(program, resolved, fuel, &verdict),
            );
        }
        OracleKind::TwoRun => {
            for chan in &channels {
                let verdict = two_run_pi_check(program, spec, chan, universe, fuel);
                merge(&mut overall, &verdict);
                per_channel.insert(
                    chan.to_string(),
                    verdict_with_replay(program, resolved, fuel, &verdict),
                );
            }
        }
        OracleKind::Kb | OracleKind::Acpi | OracleKind::Pi => {
            let attacker = options
                .attacker
                .as_ref()
                .ok_or_else(|| PipelineError::AttackerRequired(kind.name().into()))?;
            for chan in &channels {
                let mut stores_json = Vec::new();
                for sigma in universe.stores() {
                    let verdict = match kind {
                        OracleKind::Kb => {
                            kb_check(program, spec, attacker, chan, &sigma, universe, fuel)
                        }
                        OracleKind::Acpi => {
                            acpi_check(program, spec, attacker, chan, &sigma, universe, fuel)
                        }
                        _ => pi_check(program, spec, attacker, chan, &sigma, universe, fuel),
                    };
                    merge(&mut overall, &verdict);
                    stores_json.push(json!({
                        "sigma": formats::store_json(&sigma),
                        "verdict": verdict_name(&verdict),
                        "detail": verdict_with_replay(program, resolved, fuel, &verdict),
                    }));
                }
                per_channel.insert(chan.to_string(), Value::Array(stores_json));
            }
        }
        OracleKind::Theorem1 => {
            let family = enumerate_attackers(options.max_states, &options.alphabet);
            let mut agreement: &'static str = "agreement";
            for chan in &channels {
                let report = theorem1_crosscheck(program, spec, chan, universe, fuel, &family);
                if report.disagreement.is_some() {
                    agreement = "disagreement";
                } else if report.inconclusive && agreement == "agreement" {
                    agreement = "inconclusive";
                }
                per_channel.insert(chan.to_string(), theorem1_json(&report));
            }
            let exit = match agreement {
                "agreement" => EXIT_OK,
                "disagreement" => EXIT_VIOLATION,
                _ => EXIT_UNKNOWN,
            };
            return Ok(OracleOutcome {
                json: json!({
                    "check": "theorem1",
                    "fuel": fuel,
                    "attackers": family.len(),
                    "channels": per_channel,
                    "overall": agreement,
                }),
                exit,
            });
        }
    }

    let exit = match overall {
        "secure" => EXIT_OK,
        "insecure" => EXIT_VIOLATION,
        _ => EXIT_UNKNOWN,
    };
    Ok(OracleOutcome {
        json: json!({
            "check": kind.name(),
            "fuel": fuel,
            "channels": per_channel,
            "overall": overall,
        }),
        exit,
    })
}

pub fn theorem1_json(report: &Theorem1Report) -> Value {
    json!({
        "two_run": verdict_json(&report.two_run),
        "attackers_checked": report.attackers_checked,
        "pi_violation": report.pi_violation.as_ref().map(|(attacker, ce)| json!({
            "attacker_states": attacker.num_states(),
            "counterexample": counterexample_json(ce),
        })),
        "split_confirms": report.split_confirms,
        "inconclusive": report.inconclusive,
        "disagreement": report.disagreement,
    })
}
