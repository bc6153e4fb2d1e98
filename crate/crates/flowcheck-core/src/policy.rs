//! Policies as equivalence relations on initial stores, directive-driven
//! dynamic policies, and their static per-program-point approximation.
//!
//! A policy limits what an observer of a channel may learn about the
//! initial store. The limit is an equivalence relation, represented here by
//! a finite set of expressions whose pointwise agreement defines the
//! relation: the coarsest policy (the empty set) equates all stores and
//! permits only constant flows; adding expressions refines the relation and
//! permits more.

use alloc::collections::{BTreeMap, BTreeSet};
use core::fmt;

use thiserror::Error;

use crate::lang::{Chan, Command, DirectiveAction, Expr, Point, Var};
use crate::semantics::{step, Config, Store, StepOutcome, Universe};

/// A finite set of expressions inducing the relation
/// `σ ≡ ρ iff σ(e) = ρ(e) for all e in the set`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug, Default)]
pub struct EquivSpec {
    exprs: BTreeSet<Expr>,
}

impl EquivSpec {
    /// The total relation: every store equivalent to every other.
    pub const fn total() -> Self {
        EquivSpec {
            exprs: BTreeSet::new(),
        }
    }

    pub fn new(exprs: impl IntoIterator<Item = Expr>) -> Self {
        EquivSpec {
            exprs: exprs.into_iter().collect(),
        }
    }

    /// The relation "agreement on each of these variables".
    pub fn from_vars<I, V>(vars: I) -> Self
    where
        I: IntoIterator<Item = V>,
        V: Into<Var>,
    {
        EquivSpec {
            exprs: vars.into_iter().map(|v| Expr::Var(v.into())).collect(),
        }
    }

    pub fn exprs(&self) -> impl Iterator<Item = &Expr> {
        self.exprs.iter()
    }

    pub fn is_total(&self) -> bool {
        self.exprs.is_empty()
    }

    /// Whether `x` occurs in the spec as a bare-variable expression.
    pub fn allows_var(&self, x: &Var) -> bool {
        self.exprs.contains(&Expr::Var(x.clone()))
    }

    pub fn equivalent(&self, s1: &Store, s2: &Store) -> bool {
        self.exprs.iter().all(|e| s1.eval(e) == s2.eval(e))
    }

    /// The free variables of all member expressions.
    pub fn variables(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        for e in &self.exprs {
            out.extend(e.fv());
        }
        out
    }
}

impl fmt::Display for EquivSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, e) in self.exprs.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{e}")?;
        }
        write!(f, "}}")
    }
}

/// A static policy: one equivalence relation per channel. Channels absent
/// from the mapping default to the total relation (nothing may flow).
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct StaticPolicy {
    per_chan: BTreeMap<Chan, EquivSpec>,
}

static TOTAL: EquivSpec = EquivSpec::total();

impl StaticPolicy {
    pub fn new(per_chan: BTreeMap<Chan, EquivSpec>) -> Self {
        StaticPolicy { per_chan }
    }

    pub fn channel(&self, a: &Chan) -> &EquivSpec {
        self.per_chan.get(a).unwrap_or(&TOTAL)
    }

    pub fn channels(&self) -> impl Iterator<Item = (&Chan, &EquivSpec)> {
        self.per_chan.iter()
    }
}

/// The set of flow permissions currently in force: pairs of an expression
/// and the channel it may flow to. Updated by directive steps.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug, Default)]
pub struct PolicyState {
    allowed: BTreeSet<(Chan, Expr)>,
}

impl PolicyState {
    pub fn new(allowed: impl IntoIterator<Item = (Chan, Expr)>) -> Self {
        PolicyState {
            allowed: allowed.into_iter().collect(),
        }
    }

    pub fn apply(&mut self, action: DirectiveAction, expr: Expr, chan: Chan) {
        match action {
            DirectiveAction::Allow => {
                self.allowed.insert((chan, expr));
            }
            DirectiveAction::Revoke => {
                self.allowed.remove(&(chan, expr));
            }
        }
    }

    pub fn allows(&self, chan: &Chan, expr: &Expr) -> bool {
        self.allowed.contains(&(chan.clone(), expr.clone()))
    }

    pub fn allowed_for(&self, chan: &Chan) -> EquivSpec {
        EquivSpec::new(
            self.allowed
                .iter()
                .filter(|(a, _)| a == chan)
                .map(|(_, e)| e.clone()),
        )
    }

    pub fn iter(&self) -> impl Iterator<Item = &(Chan, Expr)> {
        self.allowed.iter()
    }

    /// The static policy this state determines.
    pub fn to_policy(&self) -> StaticPolicy {
        let mut per_chan: BTreeMap<Chan, EquivSpec> = BTreeMap::new();
        for (a, _) in &self.allowed {
            per_chan
                .entry(a.clone())
                .or_insert_with(|| self.allowed_for(a));
        }
        StaticPolicy { per_chan }
    }
}

/// A synchronous dynamic policy: an initial permission set evolved by the
/// program's own directives. The policy at an execution point `(c, σ, n)`
/// is read off the policy state reached after `n` steps, which the
/// determinism of the semantics ties uniquely to the execution history.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct DynamicPolicySpec {
    pub initial: PolicyState,
}

impl DynamicPolicySpec {
    pub fn new(initial: PolicyState) -> Self {
        DynamicPolicySpec { initial }
    }

    pub fn initial_config(&self, command: Command, store: Store) -> Config {
        Config {
            command,
            store,
            policy: self.initial.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PolicyError {
    #[error("execution point ({0} steps) is not well-defined: the run terminates after {1} steps")]
    IllDefinedPoint(usize, usize),
}

/// The static policy active at execution point `(c, σ, n)`.
///
/// Errors when the point is not well-defined, i.e. the run from `⟨c, σ⟩`
/// terminates in fewer than `n` steps. Depends only on the first `n` steps
/// of the run (prefix stability).
pub fn policy_at(
    spec: &DynamicPolicySpec,
    command: &Command,
    store: &Store,
    n: usize,
) -> Result<StaticPolicy, PolicyError> {
    let mut cfg = spec.initial_config(command.clone(), store.clone());
    for i in 0..n {
        match step(cfg) {
            StepOutcome::Next(next, _) => cfg = next,
            StepOutcome::Terminal(_) => return Err(PolicyError::IllDefinedPoint(n, i)),
        }
    }
    Ok(cfg.policy.to_policy())
}

/// A per-program-point approximation of a dynamic policy: for each
/// channel-point pair, an equivalence relation at least as restrictive as
/// the dynamic policy whenever an output fires there.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct PolicyApprox {
    per_point: BTreeMap<(Chan, Point), EquivSpec>,
}

impl PolicyApprox {
    pub fn new(per_point: BTreeMap<(Chan, Point), EquivSpec>) -> Self {
        PolicyApprox { per_point }
    }

    pub fn get(&self, chan: &Chan, point: &Point) -> Option<&EquivSpec> {
        self.per_point.get(&(chan.clone(), point.clone()))
    }

    pub fn insert(&mut self, chan: Chan, point: Point, spec: EquivSpec) {
        self.per_point.insert((chan, point), spec);
    }

    pub fn points(&self) -> impl Iterator<Item = (&(Chan, Point), &EquivSpec)> {
        self.per_point.iter()
    }
}

/// True iff every variable in `deps` occurs in `spec` as a bare-variable
/// expression. This is a sound sufficient condition for "agreement on
/// `spec` implies agreement on `deps`"; the exact check may accept more.
pub fn coarser_syntactic(deps: &BTreeSet<Var>, spec: &EquivSpec) -> bool {
    deps.iter().all(|x| spec.allows_var(x))
}

/// Exact coarseness on a finite universe: true iff `r1` is coarser than
/// `r2`, i.e. `σ ≡_{r2} ρ` implies `σ ≡_{r1} ρ` for all universe stores.
pub fn coarser_exact(r1: &EquivSpec, r2: &EquivSpec, universe: &Universe) -> bool {
    coarser_exact_witness(r1, r2, universe).is_none()
}

/// As [`coarser_exact`], returning the lexicographically first witness pair
/// `(σ, ρ)` with `σ ≡_{r2} ρ` but not `σ ≡_{r1} ρ` when the check fails.
pub fn coarser_exact_witness(
    r1: &EquivSpec,
    r2: &EquivSpec,
    universe: &Universe,
) -> Option<(Store, Store)> {
    let stores = universe.stores();
    for s1 in &stores {
        for s2 in &stores {
            if r2.equivalent(s1, s2) && !r1.equivalent(s1, s2) {
                return Some((s1.clone(), s2.clone()));
            }
        }
    }
    None
}

/// Statically approximates the dynamic policy per output point.
///
/// A flow-insensitive may-analysis over the control structure propagates
/// the set of policy states that may be in force when control reaches each
/// output statement (loop bodies iterated to fixpoint, both branches of a
/// conditional merged). The approximation at a point is the intersection of
/// the permission sets of all may-active states — the most restrictive
/// policy any path allows — so it is coarser than the dynamic policy on
/// every run that reaches the point.
pub fn approximate_policy(command: &Command, spec: &DynamicPolicySpec) -> PolicyApprox {
    let mut collected: BTreeMap<(Chan, Point), BTreeSet<PolicyState>> = BTreeMap::new();
    let initial = BTreeSet::from([spec.initial.clone()]);
    flow(command, &initial, &mut collected);

    let mut per_point = BTreeMap::new();
    for ((chan, point), states) in collected {
        let spec = intersect_allowed(&chan, &states);
        per_point.insert((chan, point), spec);
    }
    PolicyApprox { per_point }
}

fn intersect_allowed(chan: &Chan, states: &BTreeSet<PolicyState>) -> EquivSpec {
    let mut iter = states.iter();
    let mut exprs: BTreeSet<Expr> = match iter.next() {
        Some(s) => s.allowed_for(chan).exprs().cloned().collect(),
        None => BTreeSet::new(),
    };
    for s in iter {
        let here: BTreeSet<Expr> = s.allowed_for(chan).exprs().cloned().collect();
        exprs.retain(|e| here.contains(e));
    }
    EquivSpec { exprs }
}

fn flow(
    c: &Command,
    inset: &BTreeSet<PolicyState>,
    collected: &mut BTreeMap<(Chan, Point), BTreeSet<PolicyState>>,
) -> BTreeSet<PolicyState> {
    match c {
        Command::Skip | Command::Assign(_, _) => inset.clone(),
        Command::Out(_, chan, point) => {
            collected
                .entry((chan.clone(), point.clone()))
                .or_default()
                .extend(inset.iter().cloned());
            inset.clone()
        }
        Command::Directive(action, expr, chan) => inset
            .iter()
            .map(|s| {
                let mut next = s.clone();
                next.apply(*action, expr.clone(), chan.clone());
                next
            })
            .collect(),
        Command::Seq(c1, c2) => {
            let mid = flow(c1, inset, collected);
            flow(c2, &mid, collected)
        }
        Command::If(_, c1, c2) => {
            let mut out = flow(c1, inset, collected);
            out.extend(flow(c2, inset, collected));
            out
        }
        Command::While(_, body) => {
            let mut states = inset.clone();
            loop {
                let out = flow(body, &states, collected);
                let before = states.len();
                states.extend(out);
                if states.len() == before {
                    break;
                }
            }
            states
        }
    }
}

/// A violation of the approximation soundness condition on bounded runs:
/// an output fired at `point` after `steps` steps from `store`, but the
/// approximated relation is not coarser than the active policy there.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct ApproxViolation {
    pub store: Store,
    pub chan: Chan,
    pub point: Point,
    pub steps: usize,
}

/// Checks the approximation soundness condition by brute force: for every
/// universe store and every output fired within `fuel` steps, the
/// approximated relation at the firing point must be coarser than the
/// dynamic policy at that execution point.
pub fn validate_approximation(
    command: &Command,
    spec: &DynamicPolicySpec,
    approx: &PolicyApprox,
    universe: &Universe,
    fuel: usize,
) -> Result<(), ApproxViolation> {
    for store in universe.stores() {
        let mut cfg = spec.initial_config(command.clone(), store.clone());
        let mut steps = 0;
        while steps < fuel {
            let active = cfg.policy.to_policy();
            match step(cfg) {
                StepOutcome::Next(next, label) => {
                    if let crate::semantics::Label::Output { chan, point, .. } = &label {
                        let approximated = approx
                            .get(chan, point)
                            .cloned()
                            .unwrap_or_else(EquivSpec::total);
                        if !coarser_exact(&approximated, active.channel(chan), universe) {
                            return Err(ApproxViolation {
                                store,
                                chan: chan.clone(),
                                point: point.clone(),
                                steps,
                            });
                        }
                    }
                    cfg = next;
                    steps += 1;
                }
                StepOutcome::Terminal(_) => break,
            }
        }
    }
    Ok(())
}
