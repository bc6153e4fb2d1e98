//! Executable security conditions.
//!
//! Every check enumerates the fuel-bounded runs of a program over a finite
//! store universe. Verdicts come in three flavours:
//!
//! * `Insecure` carries a replayable counterexample;
//! * `Secure` means no violation was found — for the knowledge-based
//!   checks this is exact relative to fuel-bounded knowledge sets, for the
//!   two-run and soundness checks it additionally means every run that
//!   mattered terminated within fuel;
//! * `Bounded` means the fuel ran out before the check could decide: for
//!   knowledge-based checks when the subject store's own run was cut (so
//!   later output events are unknown), for two-run style checks also when
//!   a compared run was cut before reaching the deciding output.

use alloc::boxed::Box;
use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

use crate::lang::{Chan, Command, Point, Var};
use crate::policy::DynamicPolicySpec;
use crate::semantics::{observe_channel, Store, Universe};
use crate::typing::{DepEnv, TypingVar};

use super::attacker::{split_attacker, Attacker, FiniteAttacker, LengthOnly};
use super::knowledge::TraceTable;

/// A replayable witness of a security violation.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Counterexample {
    pub chan: Chan,
    /// The subject initial store.
    pub sigma: Store,
    /// The distinguishing store, when the violation involves a second run.
    pub rho: Option<Store>,
    /// The observation prefix `t` before the offending output.
    pub trace: Vec<i64>,
    /// The offending output value from the subject run.
    pub value: i64,
    /// The value the second run produces at the same position, for two-run
    /// style violations.
    pub other_value: Option<i64>,
    /// The program point of the offending output, when known.
    pub point: Option<Point>,
    /// Evaluation steps taken before the offending output (the execution
    /// point at which the policy was read).
    pub step: usize,
    /// True when a truncated run was involved in deciding the violation,
    /// i.e. the verdict is relative to the fuel bound.
    pub fuel_limited: bool,
}

/// The outcome of a security check.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum Verdict {
    Secure,
    Insecure(Box<Counterexample>),
    /// No violation found, but a run was truncated before the check could
    /// decide; the named store's run is the first truncated one involved.
    Bounded { store: Store },
}

impl Verdict {
    pub fn is_secure(&self) -> bool {
        matches!(self, Verdict::Secure)
    }

    pub fn is_insecure(&self) -> bool {
        matches!(self, Verdict::Insecure(_))
    }

    pub fn is_bounded(&self) -> bool {
        matches!(self, Verdict::Bounded { .. })
    }

    pub fn counterexample(&self) -> Option<&Counterexample> {
        match self {
            Verdict::Insecure(ce) => Some(ce),
            _ => None,
        }
    }
}

/// Which previous-knowledge term the knowledge-based conditions subtract.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum PreviousKnowledge {
    /// Plain knowledge `ek(t)` — knowledge-based security.
    Plain,
    /// AC progress knowledge `ek⁺(t)`.
    Progress,
    /// Full progress knowledge `ek#(t)` via the counting lift.
    FullProgress,
}

/// Attacker states after every trace prefix of one table row.
struct RowStates<S> {
    states: Vec<S>, // length = outputs + 1, index i = state after i outputs
    exhausted: bool,
}

fn row_states<A: Attacker>(attacker: &A, table: &TraceTable) -> Vec<RowStates<A::State>> {
    (0..table.len())
        .map(|i| {
            let run = table.run(i);
            let mut states = Vec::with_capacity(run.len() + 1);
            let mut state = attacker.start();
            states.push(state.clone());
            for v in &run.trace {
                state = attacker.next(&state, *v);
                states.push(state.clone());
            }
            RowStates {
                states,
                exhausted: run.exhausted,
            }
        })
        .collect()
}

/// Membership of row `i` in `k(A, t·v)`: some reachable prefix of the row
/// lands in the target state.
fn in_knowledge<S: Eq>(row: &RowStates<S>, target: &S) -> bool {
    row.states.iter().any(|s| s == target)
}

/// Membership in the chosen previous-knowledge set for a prefix of length
/// `len` with target state `target`.
fn in_previous<S: Eq>(kind: PreviousKnowledge, row: &RowStates<S>, target: &S, len: usize) -> bool {
    let outputs = row.states.len() - 1;
    match kind {
        PreviousKnowledge::Plain => row.states.iter().any(|s| s == target),
        // the prefix must have an extension, so only proper prefixes count
        PreviousKnowledge::Progress => row.states[..outputs].iter().any(|s| s == target),
        // the counting lift additionally pins the prefix length
        PreviousKnowledge::FullProgress => len < outputs && row.states[len] == *target,
    }
}

fn knowledge_condition_check<A: Attacker>(
    kind: PreviousKnowledge,
    command: &Command,
    spec: &DynamicPolicySpec,
    attacker: &A,
    chan: &Chan,
    sigma: &Store,
    table: &TraceTable,
) -> Verdict {
    let srun = observe_channel(
        spec.initial_config(command.clone(), sigma.clone()),
        chan,
        table.fuel,
    );
    let rows = row_states(attacker, table);
    let any_truncated = rows.iter().any(|r| r.exhausted) || srun.exhausted;

    let mut sigma_states = Vec::with_capacity(srun.len() + 1);
    let mut state = attacker.start();
    sigma_states.push(state.clone());
    for v in &srun.trace {
        state = attacker.next(&state, *v);
        sigma_states.push(state.clone());
    }

    for (j, event) in srun.events.iter().enumerate() {
        let equiv = event.policy_before.allowed_for(chan);
        let before_target = &sigma_states[j];
        let after_target = &sigma_states[j + 1];
        for (i, row) in rows.iter().enumerate() {
            // ρ ∈ ek(t·v) − ek_prev(t) must imply ρ outside [σ]≡
            if !in_knowledge(row, after_target)
                && in_previous(kind, row, before_target, j)
                && equiv.equivalent(sigma, table.store(i))
            {
                return Verdict::Insecure(Box::new(Counterexample {
                    chan: chan.clone(),
                    sigma: sigma.clone(),
                    rho: Some(table.store(i).clone()),
                    trace: srun.trace[..j].to_vec(),
                    value: event.value,
                    other_value: None,
                    point: Some(event.point.clone()),
                    step: event.steps_before,
                    fuel_limited: any_truncated,
                }));
            }
        }
    }
    if srun.exhausted {
        Verdict::Bounded {
            store: sigma.clone(),
        }
    } else {
        Verdict::Secure
    }
}

macro_rules! one_shot_check {
    ($(#[$doc:meta])* $name:ident, $kind:expr) => {
        $(#[$doc])*
        pub fn $name<A: Attacker>(
            command: &Command,
            spec: &DynamicPolicySpec,
            attacker: &A,
            chan: &Chan,
            sigma: &Store,
            universe: &Universe,
            fuel: usize,
        ) -> Verdict {
            let table = TraceTable::build(command, spec, chan, universe, fuel);
            knowledge_condition_check($kind, command, spec, attacker, chan, sigma, &table)
        }
    };
}

one_shot_check!(
    /// Knowledge-based security: at every output, the attacker's exclusion
    /// knowledge may only grow by stores the active policy allows it to
    /// exclude. Per-attacker only — the definition over-demands when
    /// quantified over all attackers.
    kb_check,
    PreviousKnowledge::Plain
);

one_shot_check!(
    /// AC progress-insensitive security: as [`kb_check`] but the previous
    /// knowledge is strengthened with progress knowledge `ek⁺`.
    acpi_check,
    PreviousKnowledge::Progress
);

one_shot_check!(
    /// Progress-insensitive security: the previous knowledge is
    /// strengthened with full progress knowledge `ek#`, granting the
    /// attacker the output count it may have forgotten.
    pi_check,
    PreviousKnowledge::FullProgress
);

/// Table-reusing variant of [`pi_check`] for attacker-family sweeps.
pub fn pi_check_in<A: Attacker>(
    command: &Command,
    spec: &DynamicPolicySpec,
    attacker: &A,
    sigma: &Store,
    table: &TraceTable,
) -> Verdict {
    let chan = table.chan.clone();
    knowledge_condition_check(
        PreviousKnowledge::FullProgress,
        command,
        spec,
        attacker,
        &chan,
        sigma,
        table,
    )
}

/// Two-run progress-insensitive security for a dynamic policy on one
/// channel, quantified over all initial stores of the universe: whenever a
/// run from `σ` emits its `(|t|+1)`-th output `v` and `ρ` is policy-
/// equivalent to `σ` at that execution point, any run from `ρ` that
/// reaches `|t|+1` outputs must emit `v` there too.
pub fn two_run_pi_check(
    command: &Command,
    spec: &DynamicPolicySpec,
    chan: &Chan,
    universe: &Universe,
    fuel: usize,
) -> Verdict {
    let table = TraceTable::build(command, spec, chan, universe, fuel);
    two_run_pi_check_in(chan, &table)
}

pub(crate) fn two_run_pi_check_in(chan: &Chan, table: &TraceTable) -> Verdict {
    let mut bounded: Option<Store> = None;
    for si in 0..table.len() {
        let srun = table.run(si);
        let sigma = table.store(si);
        for (j, event) in srun.events.iter().enumerate() {
            let equiv = event.policy_before.allowed_for(chan);
            for ri in 0..table.len() {
                let rho = table.store(ri);
                if !equiv.equivalent(sigma, rho) {
                    continue;
                }
                let rrun = table.run(ri);
                if rrun.len() > j {
                    if rrun.trace[j] != event.value {
                        return Verdict::Insecure(Box::new(Counterexample {
                            chan: chan.clone(),
                            sigma: sigma.clone(),
                            rho: Some(rho.clone()),
                            trace: srun.trace[..j].to_vec(),
                            value: event.value,
                            other_value: Some(rrun.trace[j]),
                            point: Some(event.point.clone()),
                            step: event.steps_before,
                            fuel_limited: false,
                        }));
                    }
                } else if rrun.exhausted && bounded.is_none() {
                    bounded = Some(rho.clone());
                }
            }
        }
        if srun.exhausted && bounded.is_none() {
            bounded = Some(sigma.clone());
        }
    }
    match bounded {
        Some(store) => Verdict::Bounded { store },
        None => Verdict::Secure,
    }
}

/// Executable typing soundness: for every channel, whenever two universe
/// stores agree on `Γ(a_p)` and their runs both reach an `(|t|+1)`-th
/// output with the subject's one fired at point `p`, the values must be
/// equal.
pub fn typing_soundness_check(
    command: &Command,
    typing: &DepEnv,
    universe: &Universe,
    fuel: usize,
) -> Verdict {
    let spec = DynamicPolicySpec::default();
    let mut bounded: Option<Store> = None;
    for chan in command.channels() {
        let table = TraceTable::build(command, &spec, &chan, universe, fuel);
        for si in 0..table.len() {
            let srun = table.run(si);
            let sigma = table.store(si);
            for (j, event) in srun.events.iter().enumerate() {
                let deps =
                    typing.pvar_deps(&TypingVar::ChanPoint(chan.clone(), event.point.clone()));
                for ri in 0..table.len() {
                    let rho = table.store(ri);
                    if !agree_on(sigma, rho, &deps) {
                        continue;
                    }
                    let rrun = table.run(ri);
                    if rrun.len() > j {
                        if rrun.trace[j] != event.value {
                            return Verdict::Insecure(Box::new(Counterexample {
                                chan: chan.clone(),
                                sigma: sigma.clone(),
                                rho: Some(rho.clone()),
                                trace: srun.trace[..j].to_vec(),
                                value: event.value,
                                other_value: Some(rrun.trace[j]),
                                point: Some(event.point.clone()),
                                step: event.steps_before,
                                fuel_limited: false,
                            }));
                        }
                    } else if rrun.exhausted && bounded.is_none() {
                        bounded = Some(rho.clone());
                    }
                }
            }
            if srun.exhausted && bounded.is_none() {
                bounded = Some(sigma.clone());
            }
        }
    }
    match bounded {
        Some(store) => Verdict::Bounded { store },
        None => Verdict::Secure,
    }
}

fn agree_on(s1: &Store, s2: &Store, vars: &BTreeSet<Var>) -> bool {
    vars.iter().all(|x| s1.get(x) == s2.get(x))
}

/// The outcome of cross-checking the two-run characterization against
/// per-attacker progress-insensitive security.
#[derive(Clone, Debug)]
pub struct Theorem1Report {
    pub two_run: Verdict,
    /// Attackers from the supplied family that were checked.
    pub attackers_checked: usize,
    /// First family attacker found PI-insecure, with its witness.
    pub pi_violation: Option<(FiniteAttacker, Box<Counterexample>)>,
    /// When the two-run check is insecure: whether the state-splitting
    /// attacker derived from its witness confirms a PI violation (the
    /// bounded family alone need not contain a violating attacker).
    pub split_confirms: Option<bool>,
    /// Whether any check was fuel-limited, making the cross-check
    /// inconclusive rather than a disagreement.
    pub inconclusive: bool,
    /// A genuine contradiction between the two characterizations.
    pub disagreement: Option<String>,
}

/// Cross-checks two-run PI security against PI security for every attacker
/// of the supplied family (plus the length-only attacker and, when the
/// two-run check finds a violation, the state-splitting attacker its
/// witness induces). The two characterizations coincide; any disagreement
/// is reported as a bug.
pub fn theorem1_crosscheck(
    command: &Command,
    spec: &DynamicPolicySpec,
    chan: &Chan,
    universe: &Universe,
    fuel: usize,
    family: &[FiniteAttacker],
) -> Theorem1Report {
    let table = TraceTable::build(command, spec, chan, universe, fuel);
    let two_run = two_run_pi_check_in(chan, &table);
    let stores = universe.stores();

    let mut report = Theorem1Report {
        two_run: two_run.clone(),
        attackers_checked: 0,
        pi_violation: None,
        split_confirms: None,
        inconclusive: false,
        disagreement: None,
    };

    match &two_run {
        Verdict::Insecure(ce) => {
            // the bounded family cannot witness every violation; the
            // splitting attacker from the unwinding argument always can
            let splitter = split_attacker(ce.trace.len(), ce.value);
            let verdict = pi_check_in(command, spec, &splitter, &ce.sigma, &table);
            let confirms = verdict.is_insecure();
            report.split_confirms = Some(confirms);
            if !confirms {
                report.disagreement = Some(String::from(
                    "two-run insecure but the witness-splitting attacker is PI-secure",
                ));
            }
        }
        Verdict::Secure | Verdict::Bounded { .. } => {
            'sweep: for attacker in family {
                report.attackers_checked += 1;
                for sigma in &stores {
                    let verdict = pi_check_in(command, spec, attacker, sigma, &table);
                    match verdict {
                        Verdict::Insecure(ce) => {
                            report.pi_violation = Some((attacker.clone(), ce));
                            break 'sweep;
                        }
                        Verdict::Bounded { .. } => report.inconclusive = true,
                        Verdict::Secure => {}
                    }
                }
            }
            // the length-only attacker is part of every family
            for sigma in &stores {
                if report.pi_violation.is_some() {
                    break;
                }
                if let Verdict::Insecure(ce) =
                    knowledge_condition_check(
                        PreviousKnowledge::FullProgress,
                        command,
                        spec,
                        &LengthOnly,
                        chan,
                        sigma,
                        &table,
                    )
                {
                    report.disagreement = Some(String::from(
                        "the length-only attacker learned more than progress",
                    ));
                    report.pi_violation = None;
                    let _ = ce;
                    break;
                }
            }
            if two_run.is_secure() {
                if let Some((attacker, ce)) = &report.pi_violation {
                    report.disagreement = Some(alloc::format!(
                        "two-run secure but a {}-state attacker is PI-insecure (σ = {})",
                        attacker.num_states(),
                        ce.sigma
                    ));
                }
            } else {
                // two-run bounded: nothing decisive either way
                report.inconclusive = true;
            }
        }
    }
    report
}
