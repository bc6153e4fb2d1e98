//! Small-step operational semantics with output labels.
//!
//! Configurations carry the remaining command, the store and the ambient
//! policy state. Execution is deterministic: at most one rule applies to a
//! configuration, and a configuration is terminal exactly when its command
//! is `skip` alone. Termination is not an observable event: terminal
//! configurations produce no label.
//!
//! All unbounded quantification ("for every run") is realized by
//! fuel-bounded execution; results carry an `exhausted` flag when the fuel
//! ran out before the run terminated.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::fmt;

use thiserror::Error;

use crate::lang::{Chan, Command, Expr, Point, Var};
use crate::policy::PolicyState;

/// A total finite mapping from program variables to values.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug, Default)]
pub struct Store(BTreeMap<Var, i64>);

impl Store {
    pub fn new() -> Self {
        Store(BTreeMap::new())
    }

    pub fn from_pairs<I, V>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (V, i64)>,
        V: Into<Var>,
    {
        Store(pairs.into_iter().map(|(v, n)| (v.into(), n)).collect())
    }

    pub fn get(&self, x: &Var) -> Option<i64> {
        self.0.get(x).copied()
    }

    pub fn set(&mut self, x: Var, v: i64) {
        self.0.insert(x, v);
    }

    pub fn vars(&self) -> impl Iterator<Item = &Var> {
        self.0.keys()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Var, i64)> {
        self.0.iter().map(|(x, v)| (x, *v))
    }

    pub fn binds_all<'a>(&self, vars: impl IntoIterator<Item = &'a Var>) -> Result<(), Var> {
        for x in vars {
            if !self.0.contains_key(x) {
                return Err(x.clone());
            }
        }
        Ok(())
    }

    /// Evaluates an expression under the store. Evaluation is total for
    /// stores that bind every free variable of the expression; binding is
    /// validated when a [`Config`] is constructed, so an unbound variable
    /// here is a caller bug.
    pub fn eval(&self, e: &Expr) -> i64 {
        match e {
            Expr::Lit(n) => *n,
            Expr::Var(x) => *self
                .0
                .get(x)
                .unwrap_or_else(|| panic!("store does not bind `{x}`")),
            Expr::Unary(op, inner) => op.apply(self.eval(inner)),
            Expr::Binary(op, l, r) => op.apply(self.eval(l), self.eval(r)),
        }
    }
}

impl fmt::Display for Store {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, (x, v)) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{x}: {v}")?;
        }
        write!(f, "}}")
    }
}

/// A finite store universe: every variable ranges over a finite value set
/// and stores are drawn from the Cartesian product.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct Universe {
    ranges: BTreeMap<Var, Vec<i64>>,
}

impl Universe {
    /// Every listed variable ranges over `{0, 1}`.
    pub fn booleans<I, V>(vars: I) -> Self
    where
        I: IntoIterator<Item = V>,
        V: Into<Var>,
    {
        Universe {
            ranges: vars
                .into_iter()
                .map(|v| (v.into(), alloc::vec![0, 1]))
                .collect(),
        }
    }

    pub fn from_ranges<I, V, R>(ranges: I) -> Self
    where
        I: IntoIterator<Item = (V, R)>,
        V: Into<Var>,
        R: IntoIterator<Item = i64>,
    {
        Universe {
            ranges: ranges
                .into_iter()
                .map(|(v, r)| {
                    let mut vals: Vec<i64> = r.into_iter().collect();
                    vals.sort_unstable();
                    vals.dedup();
                    (v.into(), vals)
                })
                .collect(),
        }
    }

    pub fn vars(&self) -> impl Iterator<Item = &Var> {
        self.ranges.keys()
    }

    pub fn is_empty(&self) -> bool {
        self.ranges.is_empty()
    }

    pub fn binds(&self, x: &Var) -> bool {
        self.ranges.contains_key(x)
    }

    /// All stores of the universe in lexicographic order (variables in name
    /// order, values in ascending order). A universe over no variables has
    /// exactly one store, the empty one.
    pub fn stores(&self) -> Vec<Store> {
        let vars: Vec<&Var> = self.ranges.keys().collect();
        let mut out = Vec::new();
        let mut idx = alloc::vec![0usize; vars.len()];
        'outer: loop {
            let store = Store(
                vars.iter()
                    .zip(idx.iter())
                    .map(|(x, &i)| ((*x).clone(), self.ranges[*x][i]))
                    .collect(),
            );
            out.push(store);
            // odometer increment, most significant variable first
            for pos in (0..vars.len()).rev() {
                idx[pos] += 1;
                if idx[pos] < self.ranges[vars[pos]].len() {
                    continue 'outer;
                }
                idx[pos] = 0;
            }
            break;
        }
        out
    }
}

/// A transition label: silent or an output `(channel, value, point)`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub enum Label {
    Silent,
    Output { chan: Chan, value: i64, point: Point },
}

impl Label {
    pub fn channel(&self) -> Option<&Chan> {
        match self {
            Label::Silent => None,
            Label::Output { chan, .. } => Some(chan),
        }
    }

    pub fn value(&self) -> Option<i64> {
        match self {
            Label::Silent => None,
            Label::Output { value, .. } => Some(*value),
        }
    }
}

/// Error constructing a configuration.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("store does not bind program variable `{0}`")]
    UnboundVariable(Var),
}

/// A machine configuration.
///
/// The policy state travels along but is invisible to expressions and to
/// the dependency typing; it realizes synchronous dynamic policies without
/// perturbing the semantics.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Config {
    pub command: Command,
    pub store: Store,
    pub policy: PolicyState,
}

impl Config {
    /// Builds a configuration, validating that the store binds every
    /// variable the program mentions (including directive subjects).
    pub fn new(command: Command, store: Store, policy: PolicyState) -> Result<Self, ConfigError> {
        store
            .binds_all(command.variables().iter())
            .map_err(ConfigError::UnboundVariable)?;
        Ok(Config {
            command,
            store,
            policy,
        })
    }

    pub fn is_terminal(&self) -> bool {
        self.command == Command::Skip
    }
}

/// The result of one evaluation step.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum StepOutcome {
    Next(Config, Label),
    Terminal(Config),
}

/// Performs one small step. The semantics is total on well-formed
/// configurations and deterministic: `Terminal` exactly when the command
/// is `skip` alone, otherwise exactly one successor.
pub fn step(cfg: Config) -> StepOutcome {
    let Config {
        command,
        mut store,
        mut policy,
    } = cfg;
    match command {
        Command::Skip => StepOutcome::Terminal(Config {
            command: Command::Skip,
            store,
            policy,
        }),
        Command::Seq(c1, c2) => {
            if *c1 == Command::Skip {
                return StepOutcome::Next(
                    Config {
                        command: *c2,
                        store,
                        policy,
                    },
                    Label::Silent,
                );
            }
            match step(Config {
                command: *c1,
                store,
                policy,
            }) {
                StepOutcome::Next(next, label) => StepOutcome::Next(
                    Config {
                        command: Command::seq(next.command, *c2),
                        store: next.store,
                        policy: next.policy,
                    },
                    label,
                ),
                StepOutcome::Terminal(_) => unreachable!("skip;c is handled above"),
            }
        }
        Command::Assign(x, e) => {
            let v = store.eval(&e);
            store.set(x, v);
            StepOutcome::Next(
                Config {
                    command: Command::Skip,
                    store,
                    policy,
                },
                Label::Silent,
            )
        }
        Command::Out(e, chan, point) => {
            let value = store.eval(&e);
            StepOutcome::Next(
                Config {
                    command: Command::Skip,
                    store,
                    policy,
                },
                Label::Output { chan, value, point },
            )
        }
        Command::While(e, body) => {
            let unfolded = Command::If(
                e.clone(),
                alloc::boxed::Box::new(Command::seq(
                    (*body).clone(),
                    Command::While(e, body),
                )),
                alloc::boxed::Box::new(Command::Skip),
            );
            StepOutcome::Next(
                Config {
                    command: unfolded,
                    store,
                    policy,
                },
                Label::Silent,
            )
        }
        Command::If(e, c1, c2) => {
            let taken = if store.eval(&e) != 0 { c1 } else { c2 };
            StepOutcome::Next(
                Config {
                    command: *taken,
                    store,
                    policy,
                },
                Label::Silent,
            )
        }
        Command::Directive(action, e, chan) => {
            policy.apply(action, e, chan);
            StepOutcome::Next(
                Config {
                    command: Command::Skip,
                    store,
                    policy,
                },
                Label::Silent,
            )
        }
    }
}

/// The result of a fuel-bounded run.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct RunResult {
    pub labels: Vec<Label>,
    pub config: Config,
    /// True iff the fuel ran out before a terminal configuration.
    pub exhausted: bool,
    pub steps: usize,
}

/// Iterates [`step`] at most `fuel` times or until terminal.
pub fn run(cfg: Config, fuel: usize) -> RunResult {
    let mut labels = Vec::new();
    let mut current = cfg;
    let mut steps = 0;
    while steps < fuel {
        match step(current) {
            StepOutcome::Next(next, label) => {
                labels.push(label);
                current = next;
                steps += 1;
            }
            StepOutcome::Terminal(config) => {
                return RunResult {
                    labels,
                    config,
                    exhausted: false,
                    steps,
                };
            }
        }
    }
    let exhausted = !current.is_terminal();
    RunResult {
        labels,
        config: current,
        exhausted,
        steps,
    }
}

/// Projects a label sequence to the trace of values on one channel,
/// filtering silent steps and other channels.
pub fn project(labels: &[Label], chan: &Chan) -> Vec<i64> {
    labels
        .iter()
        .filter_map(|l| match l {
            Label::Output { chan: c, value, .. } if c == chan => Some(*value),
            _ => None,
        })
        .collect()
}

/// One output event of a run, as observed on a fixed channel.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct OutputEvent {
    /// The value produced.
    pub value: i64,
    /// The program point of the producing output statement.
    pub point: Point,
    /// Number of evaluation steps taken before the output step, i.e. the
    /// execution point `(c, σ, n)` at which the active policy is read.
    pub steps_before: usize,
    /// The policy state in effect immediately before the output.
    pub policy_before: PolicyState,
}

/// The channel-projected view of one whole (fuel-bounded) run.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct ObservedRun {
    /// Values output on the channel, in order.
    pub trace: Vec<i64>,
    /// Per-output bookkeeping, aligned with `trace`.
    pub events: Vec<OutputEvent>,
    /// True iff the run hit the fuel bound before terminating.
    pub exhausted: bool,
    /// Steps actually taken.
    pub steps: usize,
}

impl ObservedRun {
    pub fn len(&self) -> usize {
        self.trace.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trace.is_empty()
    }

    pub fn prefix(&self, len: usize) -> &[i64] {
        &self.trace[..len]
    }
}

/// Runs `cfg` for at most `fuel` steps recording every output on `chan`.
pub fn observe_channel(cfg: Config, chan: &Chan, fuel: usize) -> ObservedRun {
    let mut trace = Vec::new();
    let mut events = Vec::new();
    let mut current = cfg;
    let mut steps = 0;
    while steps < fuel {
        let policy_before = current.policy.clone();
        match step(current) {
            StepOutcome::Next(next, label) => {
                if let Label::Output { chan: c, value, point } = &label {
                    if c == chan {
                        trace.push(*value);
                        events.push(OutputEvent {
                            value: *value,
                            point: point.clone(),
                            steps_before: steps,
                            policy_before,
                        });
                    }
                }
                current = next;
                steps += 1;
            }
            StepOutcome::Terminal(_) => {
                return ObservedRun {
                    trace,
                    events,
                    exhausted: false,
                    steps,
                };
            }
        }
    }
    let exhausted = !current.is_terminal();
    ObservedRun {
        trace,
        events,
        exhausted,
        steps,
    }
}

/// All channel-`chan` trace prefixes producible within `fuel` steps, each
/// with a flag marking whether its continuation was cut off by the fuel
/// bound (only the longest prefix of a truncated run carries `true`).
pub fn reachable_traces(
    command: &Command,
    store: &Store,
    chan: &Chan,
    fuel: usize,
) -> Vec<(Vec<i64>, bool)> {
    let cfg = Config {
        command: command.clone(),
        store: store.clone(),
        policy: PolicyState::default(),
    };
    let observed = observe_channel(cfg, chan, fuel);
    let mut out = Vec::with_capacity(observed.len() + 1);
    for len in 0..=observed.len() {
        let cut = observed.exhausted && len == observed.len();
        out.push((observed.trace[..len].to_vec(), cut));
    }
    out
}
