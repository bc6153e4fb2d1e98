//! JSON file formats and report schemas.
//!
//! * policy files: `{"initial": {chan: [expr, …]}, "universe":
//!   {var: [values]}, "approx_override": {"a@p": [expr, …]}}`;
//! * attacker files: `{"states": […], "start": s, "delta": {state:
//!   {value: state, "default": state}}}` — unlisted values take the
//!   state's default edge (a self-loop when absent);
//! * typing reports, compliance reports and oracle verdicts as emitted by
//!   the CLI. Trace dumps are arrays of
//!   `{"channel", "value", "point", "stepIndex"}` objects.
//!
//! Dependency-set members are rendered as `x` (program variable), `pc`,
//! `@a` (channel context bound) and `a@p` (channel point); the prefixes
//! keep the namespaces apart even when a variable shadows a channel name.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use flowcheck_core::checker::{
    CheckKind, Compliance, ComplianceReport, PointVerdict,
};
use flowcheck_core::lang::{parse_expr, Chan, Command, ParseError, Point, Var};
use flowcheck_core::oracle::{Counterexample, FiniteAttacker, Verdict};
use flowcheck_core::policy::{DynamicPolicySpec, EquivSpec, PolicyState};
use flowcheck_core::semantics::{Label, Store, Universe};
use flowcheck_core::typing::{DepEnv, TypingVar};

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid expression `{source_text}`: {error}")]
    BadExpr {
        source_text: String,
        error: ParseError,
    },
    #[error("invalid point key `{0}` (expected `chan@point`)")]
    BadPointKey(String),
    #[error("attacker references unknown state `{0}`")]
    UnknownState(String),
    #[error("attacker delta key `{0}` is neither an integer nor `default`")]
    BadDeltaKey(String),
    #[error("universe for variable `{0}` is empty")]
    EmptyRange(Var),
    #[error("expression `{expr}` mentions `{var}`, which the universe does not bind")]
    UnboundInUniverse { expr: String, var: Var },
}

/// Raw policy file contents.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct PolicyFile {
    /// Expressions allowed to flow to each channel at program start.
    #[serde(default)]
    pub initial: BTreeMap<String, Vec<String>>,
    /// Value ranges per variable; variables the program mentions but the
    /// file omits default to `{0, 1}`.
    #[serde(default)]
    pub universe: BTreeMap<String, Vec<i64>>,
    /// Per-point replacement of the computed approximation.
    #[serde(default)]
    pub approx_override: BTreeMap<String, Vec<String>>,
}

impl PolicyFile {
    pub fn load(path: &std::path::Path) -> Result<Self, FormatError> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// A policy file resolved against a program: parsed expressions, a
/// universe covering every variable in sight, and any approximation
/// overrides.
#[derive(Debug, Clone)]
pub struct ResolvedPolicy {
    pub spec: DynamicPolicySpec,
    pub universe: Universe,
    pub overrides: Vec<((Chan, Point), EquivSpec)>,
}

fn parse_expr_list(sources: &[String]) -> Result<Vec<flowcheck_core::lang::Expr>, FormatError> {
    sources
        .iter()
        .map(|s| {
            parse_expr(s).map_err(|error| FormatError::BadExpr {
                source_text: s.clone(),
                error,
            })
        })
        .collect()
}

fn parse_point_key(key: &str) -> Result<(Chan, Point), FormatError> {
    match key.split_once('@') {
        Some((a, p)) if !a.is_empty() && !p.is_empty() => {
            Ok((Chan::new(a), Point::new(p)))
        }
        _ => Err(FormatError::BadPointKey(key.to_string())),
    }
}

pub fn resolve_policy(file: &PolicyFile, program: &Command) -> Result<ResolvedPolicy, FormatError> {
    let mut allowed = Vec::new();
    for (chan, exprs) in &file.initial {
        for e in parse_expr_list(exprs)? {
            allowed.push((Chan::new(chan.clone()), e));
        }
    }
    let spec = DynamicPolicySpec::new(PolicyState::new(allowed));

    let mut overrides = Vec::new();
    for (key, exprs) in &file.approx_override {
        let point = parse_point_key(key)?;
        overrides.push((point, EquivSpec::new(parse_expr_list(exprs)?)));
    }

    // the universe covers the program's variables plus everything policy
    // expressions mention; unlisted variables default to {0, 1}
    let mut ranges: BTreeMap<Var, Vec<i64>> = file
        .universe
        .iter()
        .map(|(v, vals)| (Var::new(v.clone()), vals.clone()))
        .collect();
    for var in program.variables() {
        ranges.entry(var).or_insert_with(|| vec![0, 1]);
    }
    for (_, e) in spec.initial.iter() {
        for var in e.fv() {
            ranges.entry(var).or_insert_with(|| vec![0, 1]);
        }
    }
    for (_, spec) in &overrides {
        for var in spec.variables() {
            ranges.entry(var).or_insert_with(|| vec![0, 1]);
        }
    }
    for (var, vals) in &ranges {
        if vals.is_empty() {
            return Err(FormatError::EmptyRange(var.clone()));
        }
    }
    let universe = Universe::from_ranges(ranges);

    Ok(ResolvedPolicy {
        spec,
        universe,
        overrides,
    })
}

/// Raw attacker file contents.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AttackerFile {
    pub states: Vec<String>,
    pub start: String,
    #[serde(default)]
    pub delta: BTreeMap<String, BTreeMap<String, String>>,
}

impl AttackerFile {
    pub fn load(path: &std::path::Path) -> Result<Self, FormatError> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn to_attacker(&self) -> Result<FiniteAttacker, FormatError> {
        let index_of = |name: &str| -> Result<usize, FormatError> {
            self.states
                .iter()
                .position(|s| s == name)
                .ok_or_else(|| FormatError::UnknownState(name.to_string()))
        };
        let start = index_of(&self.start)?;
        let mut edges = Vec::with_capacity(self.states.len());
        let mut defaults = Vec::with_capacity(self.states.len());
        for (idx, name) in self.states.iter().enumerate() {
            let mut row = BTreeMap::new();
            let mut default = idx; // missing default: stay
            if let Some(spec_row) = self.delta.get(name) {
                for (key, target) in spec_row {
                    let target = index_of(target)?;
                    if key == "default" {
                        default = target;
                    } else {
                        let value: i64 = key
                            .parse()
                            .map_err(|_| FormatError::BadDeltaKey(key.clone()))?;
                        row.insert(value, target);
                    }
                }
            }
            edges.push(row);
            defaults.push(default);
        }
        Ok(FiniteAttacker::new(
            self.states.clone(),
            start,
            edges,
            defaults,
        ))
    }
}

/// A `{var: [values]}` universe file, used by `--universe`.
pub fn load_universe(path: &std::path::Path) -> Result<BTreeMap<String, Vec<i64>>, FormatError> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

fn dep_set_json(deps: impl IntoIterator<Item = TypingVar>) -> Value {
    Value::Array(
        deps.into_iter()
            .map(|d| Value::String(d.to_string()))
            .collect(),
    )
}

/// The typing report: full dependency sets plus the program-variable
/// restriction used by policy checks.
pub fn typing_report(program: &Command, typing: &DepEnv) -> Value {
    let mut variables = serde_json::Map::new();
    let mut variables_restricted = serde_json::Map::new();
    for var in program.variables() {
        let key = TypingVar::Pv(var.clone());
        variables.insert(var.to_string(), dep_set_json(typing.deps(&key)));
        variables_restricted.insert(
            var.to_string(),
            json!(typing
                .pvar_deps(&key)
                .iter()
                .map(|v| v.to_string())
                .collect::<Vec<_>>()),
        );
    }
    let mut channels = serde_json::Map::new();
    let mut channels_restricted = serde_json::Map::new();
    for chan in program.channels() {
        let key = TypingVar::Channel(chan.clone());
        channels.insert(chan.to_string(), dep_set_json(typing.deps(&key)));
        channels_restricted.insert(
            chan.to_string(),
            json!(typing
                .pvar_deps(&key)
                .iter()
                .map(|v| v.to_string())
                .collect::<Vec<_>>()),
        );
    }
    let mut points = serde_json::Map::new();
    let mut points_restricted = serde_json::Map::new();
    for (chan, point) in program.output_points() {
        let key = TypingVar::ChanPoint(chan.clone(), point.clone());
        let name = format!("{chan}@{point}");
        points.insert(name.clone(), dep_set_json(typing.deps(&key)));
        points_restricted.insert(
            name,
            json!(typing
                .pvar_deps(&key)
                .iter()
                .map(|v| v.to_string())
                .collect::<Vec<_>>()),
        );
    }
    json!({
        "variables": variables,
        "channels": channels,
        "points": points,
        "restricted": {
            "variables": variables_restricted,
            "channels": channels_restricted,
            "points": points_restricted,
        },
    })
}

pub fn store_json(store: &Store) -> Value {
    Value::Object(
        store
            .iter()
            .map(|(x, v)| (x.to_string(), json!(v)))
            .collect(),
    )
}

/// Trace dump entry schema: `{"channel", "value", "point", "stepIndex"}`.
pub fn labels_json(labels: &[Label]) -> Value {
    Value::Array(
        labels
            .iter()
            .enumerate()
            .filter_map(|(i, l)| match l {
                Label::Silent => None,
                Label::Output { chan, value, point } => Some(json!({
                    "channel": chan.to_string(),
                    "value": value,
                    "point": point.to_string(),
                    "stepIndex": i,
                })),
            })
            .collect(),
    )
}

pub fn counterexample_json(ce: &Counterexample) -> Value {
    json!({
        "channel": ce.chan.to_string(),
        "sigma": store_json(&ce.sigma),
        "rho": ce.rho.as_ref().map(store_json),
        "trace": ce.trace,
        "value": ce.value,
        "other_value": ce.other_value,
        "point": ce.point.as_ref().map(|p| format!("{}@{}", ce.chan, p)),
        "step": ce.step,
        "fuel_limited": ce.fuel_limited,
    })
}

pub fn verdict_json(verdict: &Verdict) -> Value {
    match verdict {
        Verdict::Secure => json!({ "verdict": "secure" }),
        Verdict::Insecure(ce) => json!({
            "verdict": "insecure",
            "counterexample": counterexample_json(ce),
        }),
        Verdict::Bounded { store } => json!({
            "verdict": "bounded",
            "truncated_store": store_json(store),
        }),
    }
}

pub fn verdict_name(verdict: &Verdict) -> &'static str {
    match verdict {
        Verdict::Secure => "secure",
        Verdict::Insecure(_) => "insecure",
        Verdict::Bounded { .. } => "bounded",
    }
}

fn equiv_spec_json(spec: &EquivSpec) -> Value {
    json!(spec.exprs().map(|e| e.to_string()).collect::<Vec<_>>())
}

pub fn compliance_report_json(report: &ComplianceReport, witnesses: &[Value]) -> Value {
    let verdict = match report.overall {
        Compliance::Compliant => "compliant",
        Compliance::Violation => "violation",
        Compliance::Unknown => "unknown",
    };
    let points: Vec<Value> = report
        .points
        .iter()
        .map(|p| {
            json!({
                "point": format!("{}@{}", p.chan, p.point),
                "deps": p.deps.iter().map(|v| v.to_string()).collect::<Vec<_>>(),
                "approx": equiv_spec_json(&p.approx),
                "check": match p.check {
                    CheckKind::Syntactic => "syntactic",
                    CheckKind::Exact => "exact",
                },
                "verdict": match p.verdict {
                    PointVerdict::Pass => "pass",
                    PointVerdict::Violation => "violation",
                    PointVerdict::Unknown => "unknown",
                },
                "witness": p.witness.as_ref().map(|(s, r)| json!({
                    "sigma": store_json(s),
                    "rho": store_json(r),
                })),
            })
        })
        .collect();
    json!({
        "verdict": verdict,
        "points": points,
        "semantic_witnesses": witnesses,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use flowcheck_core::lang::parse_program;
    use flowcheck_core::oracle::Attacker;
    use flowcheck_core::typing::infer;

    #[test]
    fn policy_file_round_trips() {
        let text = r#"{
            "initial": {"a": ["x", "x + y"]},
            "universe": {"x": [0, 1], "y": [0, 1]},
            "approx_override": {"a@p3": ["y"]}
        }"#;
        let file: PolicyFile = serde_json::from_str(text).unwrap();
        let program = parse_program("out x on a @ p3").unwrap();
        let resolved = resolve_policy(&file, &program).unwrap();
        assert_eq!(resolved.universe.stores().len(), 4);
        assert_eq!(resolved.overrides.len(), 1);
        assert!(resolved
            .spec
            .initial
            .allows(&Chan::new("a"), &parse_expr("x").unwrap()));
    }

    #[test]
    fn universe_defaults_to_booleans_over_program_variables() {
        let program = parse_program("out x + z on a").unwrap();
        let resolved = resolve_policy(&PolicyFile::default(), &program).unwrap();
        assert_eq!(resolved.universe.stores().len(), 4); // x and z over {0,1}
    }

    #[test]
    fn bad_point_keys_are_rejected() {
        let mut file = PolicyFile::default();
        file.approx_override.insert("nopoint".into(), vec![]);
        let program = parse_program("skip").unwrap();
        assert!(matches!(
            resolve_policy(&file, &program),
            Err(FormatError::BadPointKey(_))
        ));
    }

    #[test]
    fn attacker_file_builds_the_last_value_attacker() {
        let text = r#"{
            "states": ["q0", "q1", "q2"],
            "start": "q0",
            "delta": {
                "q0": {"1": "q1", "2": "q2", "default": "q0"},
                "q1": {"1": "q1", "2": "q2", "default": "q1"},
                "q2": {"1": "q1", "2": "q2", "default": "q2"}
            }
        }"#;
        let file: AttackerFile = serde_json::from_str(text).unwrap();
        let attacker = file.to_attacker().unwrap();
        assert_eq!(attacker.observe(&[1, 1, 1]), attacker.observe(&[1]));
        assert_ne!(attacker.observe(&[1, 2]), attacker.observe(&[1]));
        // default edge: unlisted value stays put
        assert_eq!(attacker.observe(&[7]), attacker.observe(&[]));
    }

    #[test]
    fn unknown_states_are_rejected() {
        let file = AttackerFile {
            states: vec!["q0".into()],
            start: "nope".into(),
            delta: BTreeMap::new(),
        };
        assert!(matches!(
            file.to_attacker(),
            Err(FormatError::UnknownState(_))
        ));
    }

    #[test]
    fn typing_report_shape() {
        let program = parse_program("x := z + 1; out x on a @ p1").unwrap();
        let report = typing_report(&program, &infer(&program));
        // the assignment is substituted through: the output reads z + 1
        assert_eq!(report["restricted"]["points"]["a@p1"], json!(["z"]));
        assert!(report["points"]["a@p1"]
            .as_array()
            .unwrap()
            .contains(&json!("@a")));
    }
}
