//! Knowledge sets over finite store universes.
//!
//! A knowledge set collects the initial stores an attacker considers
//! possible after a trace; its complement is the exclusion knowledge. All
//! trace quantifiers are realized over the prefixes reachable within a fuel
//! bound, so computed knowledge sets are lower bounds: more fuel can only
//! add members (and thus shrink exclusion knowledge).

use alloc::collections::BTreeSet;
use alloc::vec::Vec;

use crate::lang::{Chan, Command};
use crate::policy::DynamicPolicySpec;
use crate::semantics::{observe_channel, ObservedRun, Store, Universe};

use super::attacker::{Attacker, CountingLift};

/// The fuel-bounded runs of one program from every store of a universe,
/// projected to one channel. All knowledge computations and security
/// checks are phrased over this table; building it once per
/// (program, channel, universe, fuel) quadruple amortizes the runs across
/// many queries and attackers.
#[derive(Clone, Debug)]
pub struct TraceTable {
    pub chan: Chan,
    pub fuel: usize,
    stores: Vec<Store>,
    runs: Vec<ObservedRun>,
}

impl TraceTable {
    pub fn build(
        command: &Command,
        spec: &DynamicPolicySpec,
        chan: &Chan,
        universe: &Universe,
        fuel: usize,
    ) -> Self {
        let stores = universe.stores();
        let runs = stores
            .iter()
            .map(|store| {
                observe_channel(
                    spec.initial_config(command.clone(), store.clone()),
                    chan,
                    fuel,
                )
            })
            .collect();
        TraceTable {
            chan: chan.clone(),
            fuel,
            stores,
            runs,
        }
    }

    pub fn len(&self) -> usize {
        self.stores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stores.is_empty()
    }

    pub fn store(&self, idx: usize) -> &Store {
        &self.stores[idx]
    }

    pub fn run(&self, idx: usize) -> &ObservedRun {
        &self.runs[idx]
    }

    pub fn stores(&self) -> &[Store] {
        &self.stores
    }

    pub fn index_of(&self, store: &Store) -> Option<usize> {
        self.stores.iter().position(|s| s == store)
    }

    /// Indices whose runs hit the fuel bound.
    pub fn truncated(&self) -> Vec<usize> {
        (0..self.len()).filter(|i| self.runs[*i].exhausted).collect()
    }
}

/// A subset of the store universe, by index into the trace table order.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct KnowledgeSet {
    pub members: BTreeSet<usize>,
    pub universe_size: usize,
}

impl KnowledgeSet {
    pub fn contains(&self, idx: usize) -> bool {
        self.members.contains(&idx)
    }

    /// The exclusion-knowledge view: stores the attacker can rule out.
    pub fn complement(&self) -> BTreeSet<usize> {
        (0..self.universe_size)
            .filter(|i| !self.members.contains(i))
            .collect()
    }

    pub fn is_whole_universe(&self) -> bool {
        self.members.len() == self.universe_size
    }

    pub fn stores<'a>(&'a self, table: &'a TraceTable) -> impl Iterator<Item = &'a Store> + 'a {
        self.members.iter().map(|i| table.store(*i))
    }
}

fn collect(table: &TraceTable, pred: impl Fn(&ObservedRun) -> bool) -> KnowledgeSet {
    KnowledgeSet {
        members: (0..table.len()).filter(|i| pred(table.run(*i))).collect(),
        universe_size: table.len(),
    }
}

/// Forgetful attacker knowledge
/// `k(A,c,a,t) = { ρ | ⟨c,ρ⟩ ⇒ᵃ t' ∧ A(t') = A(t) }`: the stores that can
/// produce some trace the attacker cannot tell apart from `t`.
pub fn knowledge_in<A: Attacker>(attacker: &A, table: &TraceTable, trace: &[i64]) -> KnowledgeSet {
    let target = attacker.observe(trace);
    collect(table, |run| {
        let mut state = attacker.start();
        if state == target {
            return true;
        }
        for v in &run.trace {
            state = attacker.next(&state, *v);
            if state == target {
                return true;
            }
        }
        false
    })
}

/// AC progress knowledge
/// `k⁺(A,c,a,t) = { ρ | ⟨c,ρ⟩ ⇒ᵃ t'·v ∧ A(t') = A(t) }`: as [`knowledge_in`]
/// but the matching prefix must have at least one further output.
pub fn progress_knowledge_in<A: Attacker>(
    attacker: &A,
    table: &TraceTable,
    trace: &[i64],
) -> KnowledgeSet {
    let target = attacker.observe(trace);
    collect(table, |run| {
        // prefixes with an extension are exactly the proper prefixes
        let mut state = attacker.start();
        if !run.trace.is_empty() && state == target {
            return true;
        }
        for (i, v) in run.trace.iter().enumerate() {
            state = attacker.next(&state, *v);
            if i + 1 < run.trace.len() && state == target {
                return true;
            }
        }
        false
    })
}

/// Full progress knowledge
/// `k#(A,c,a,t) = { ρ | ⟨c,ρ⟩ ⇒ᵃ t'·v ∧ A^ω(t') = A^ω(t) }`: AC progress
/// knowledge computed with the counting lift, which grants the attacker
/// the output count it may have forgotten.
pub fn full_progress_knowledge_in<A: Attacker>(
    attacker: &A,
    table: &TraceTable,
    trace: &[i64],
) -> KnowledgeSet {
    progress_knowledge_in(&CountingLift(attacker), table, trace)
}

/// One-shot form of [`knowledge_in`] matching the definitional signature.
pub fn knowledge<A: Attacker>(
    attacker: &A,
    command: &Command,
    spec: &DynamicPolicySpec,
    chan: &Chan,
    trace: &[i64],
    universe: &Universe,
    fuel: usize,
) -> KnowledgeSet {
    let table = TraceTable::build(command, spec, chan, universe, fuel);
    knowledge_in(attacker, &table, trace)
}

/// One-shot form of [`progress_knowledge_in`].
pub fn progress_knowledge<A: Attacker>(
    attacker: &A,
    command: &Command,
    spec: &DynamicPolicySpec,
    chan: &Chan,
    trace: &[i64],
    universe: &Universe,
    fuel: usize,
) -> KnowledgeSet {
    let table = TraceTable::build(command, spec, chan, universe, fuel);
    progress_knowledge_in(attacker, &table, trace)
}

/// One-shot form of [`full_progress_knowledge_in`].
pub fn full_progress_knowledge<A: Attacker>(
    attacker: &A,
    command: &Command,
    spec: &DynamicPolicySpec,
    chan: &Chan,
    trace: &[i64],
    universe: &Universe,
    fuel: usize,
) -> KnowledgeSet {
    let table = TraceTable::build(command, spec, chan, universe, fuel);
    full_progress_knowledge_in(attacker, &table, trace)
}

/// Whether every trace in the table is a prefix of one common maximal
/// trace, i.e. the program is quasi-constant as far as the fuel bound can
/// see. Quasi-constant programs leak only through progress.
pub fn is_quasi_constant(table: &TraceTable) -> bool {
    let longest = match (0..table.len()).max_by_key(|i| table.run(*i).len()) {
        Some(i) => &table.run(i).trace,
        None => return true,
    };
    (0..table.len()).all(|i| {
        let t = &table.run(i).trace;
        longest[..t.len()] == t[..]
    })
}
