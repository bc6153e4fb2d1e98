//! Forgetful attackers as deterministic automata over observed values.
//!
//! An attacker is a deterministic transition system `(S, s₀, δ)`; its state
//! after a trace abstracts — and possibly forgets — the observation
//! history. Knowledge sets and the security conditions only ever compare
//! states for equality, so isomorphic attackers are interchangeable and the
//! enumerator yields one canonical representative per isomorphism class.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

/// A deterministic attacker automaton over observed values.
pub trait Attacker {
    type State: Clone + Ord;

    fn start(&self) -> Self::State;

    fn next(&self, state: &Self::State, value: i64) -> Self::State;

    /// The state after observing a whole trace: `A(ε) = s₀`,
    /// `A(t·v) = δ(A(t), v)`.
    fn observe(&self, trace: &[i64]) -> Self::State {
        let mut state = self.start();
        for v in trace {
            state = self.next(&state, *v);
        }
        state
    }
}

impl<A: Attacker> Attacker for &A {
    type State = A::State;

    fn start(&self) -> Self::State {
        (*self).start()
    }

    fn next(&self, state: &Self::State, value: i64) -> Self::State {
        (*self).next(state, value)
    }
}

/// A finite-state attacker. Values without an explicit edge take the
/// state's default edge (a self-loop unless the automaton says otherwise).
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct FiniteAttacker {
    state_names: Vec<String>,
    start: usize,
    edges: Vec<BTreeMap<i64, usize>>,
    defaults: Vec<usize>,
}

impl FiniteAttacker {
    pub fn new(
        state_names: Vec<String>,
        start: usize,
        edges: Vec<BTreeMap<i64, usize>>,
        defaults: Vec<usize>,
    ) -> Self {
        assert_eq!(state_names.len(), edges.len());
        assert_eq!(state_names.len(), defaults.len());
        assert!(start < state_names.len());
        FiniteAttacker {
            state_names,
            start,
            edges,
            defaults,
        }
    }

    pub fn num_states(&self) -> usize {
        self.state_names.len()
    }

    pub fn state_name(&self, s: usize) -> &str {
        &self.state_names[s]
    }

    /// The attacker that remembers only the last observed value, as used
    /// in the ACPI counterexample: `q0` initial, `q1` after a `1`, `q2`
    /// after a `2`.
    pub fn last_value() -> Self {
        let mut edges = Vec::new();
        for _ in 0..3 {
            edges.push(BTreeMap::from([(1i64, 1usize), (2i64, 2usize)]));
        }
        FiniteAttacker::new(
            alloc::vec!["q0".into(), "q1".into(), "q2".into()],
            0,
            edges,
            alloc::vec![0, 1, 2],
        )
    }

    /// Canonical signature: state count plus the transition table over
    /// `alphabet` after renumbering states in breadth-first discovery
    /// order. Isomorphic automata (with all states reachable) share it.
    fn bfs_signature(&self, alphabet: &[i64]) -> Option<Vec<usize>> {
        let n = self.num_states();
        let mut order: Vec<usize> = Vec::with_capacity(n);
        let mut index_of = alloc::vec![usize::MAX; n];
        order.push(self.start);
        index_of[self.start] = 0;
        let mut head = 0;
        while head < order.len() {
            let s = order[head];
            head += 1;
            for v in alphabet {
                let t = self.next_index(s, *v);
                if index_of[t] == usize::MAX {
                    index_of[t] = order.len();
                    order.push(t);
                }
            }
        }
        if order.len() != n {
            return None; // unreachable states: a smaller automaton covers it
        }
        let mut sig = Vec::with_capacity(n * alphabet.len() + 1);
        sig.push(n);
        for s in &order {
            for v in alphabet {
                sig.push(index_of[self.next_index(*s, *v)]);
            }
        }
        Some(sig)
    }

    fn next_index(&self, state: usize, value: i64) -> usize {
        self.edges[state]
            .get(&value)
            .copied()
            .unwrap_or(self.defaults[state])
    }
}

impl Attacker for FiniteAttacker {
    type State = usize;

    fn start(&self) -> usize {
        self.start
    }

    fn next(&self, state: &usize, value: i64) -> usize {
        self.next_index(*state, value)
    }
}

/// Enumerates all attacker automata with at most `max_states` states over
/// the given value alphabet, one canonical representative per isomorphism
/// class (all states reachable, states in breadth-first discovery order).
/// Out-of-alphabet values self-loop.
pub fn enumerate_attackers(max_states: usize, alphabet: &[i64]) -> Vec<FiniteAttacker> {
    let mut out = Vec::new();
    for n in 1..=max_states {
        let cells = n * alphabet.len();
        let mut table = alloc::vec![0usize; cells];
        'tables: loop {
            let attacker = finite_from_table(n, alphabet, &table);
            if let Some(sig) = attacker.bfs_signature(alphabet) {
                if sig[1..] == table[..] {
                    out.push(attacker);
                }
            }
            // odometer over the transition table
            for i in (0..cells).rev() {
                table[i] += 1;
                if table[i] < n {
                    continue 'tables;
                }
                table[i] = 0;
            }
            break;
        }
    }
    out
}

fn finite_from_table(n: usize, alphabet: &[i64], table: &[usize]) -> FiniteAttacker {
    let mut edges = Vec::with_capacity(n);
    for s in 0..n {
        let mut row = BTreeMap::new();
        for (i, v) in alphabet.iter().enumerate() {
            row.insert(*v, table[s * alphabet.len() + i]);
        }
        edges.push(row);
    }
    FiniteAttacker::new(
        (0..n).map(|s| format!("q{s}")).collect(),
        0,
        edges,
        (0..n).collect(),
    )
}

/// The counting lift `A^ω`: pairs every state with the number of outputs
/// seen. States are materialized lazily, so the lift of a finite attacker
/// is usable even though it has unboundedly many states.
#[derive(Clone, Debug)]
pub struct CountingLift<A>(pub A);

impl<A: Attacker> Attacker for CountingLift<A> {
    type State = (A::State, usize);

    fn start(&self) -> Self::State {
        (self.0.start(), 0)
    }

    fn next(&self, state: &Self::State, value: i64) -> Self::State {
        (self.0.next(&state.0, value), state.1 + 1)
    }
}

/// The attacker with perfect recall: every trace is its own state.
#[derive(Clone, Copy, Debug, Default)]
pub struct PerfectRecall;

impl Attacker for PerfectRecall {
    type State = Vec<i64>;

    fn start(&self) -> Vec<i64> {
        Vec::new()
    }

    fn next(&self, state: &Vec<i64>, value: i64) -> Vec<i64> {
        let mut next = state.clone();
        next.push(value);
        next
    }
}

/// The distinguished length-only attacker `A_#`, for which
/// `A_#(t) = A_#(t')` iff `|t| = |t'|`.
#[derive(Clone, Copy, Debug, Default)]
pub struct LengthOnly;

impl Attacker for LengthOnly {
    type State = usize;

    fn start(&self) -> usize {
        0
    }

    fn next(&self, state: &usize, _value: i64) -> usize {
        state + 1
    }
}

/// The state-splitting attacker from the two-run unwinding argument.
///
/// Given an observation prefix length `len` and the two distinct next
/// values `v` and `v_other`, this attacker counts outputs up to `len` and
/// then permanently records whether the `(len+1)`-th value was `v`. It
/// witnesses a progress-insensitive violation for every two-run
/// counterexample with these parameters.
pub fn split_attacker(len: usize, v: i64) -> FiniteAttacker {
    // states: s0..s_len (counting), then r_v and r_other (absorbing)
    let n = len + 3;
    let r_v = len + 1;
    let r_other = len + 2;
    let mut edges: Vec<BTreeMap<i64, usize>> = alloc::vec![BTreeMap::new(); n];
    let mut defaults: Vec<usize> = (1..=len).collect();
    defaults.push(r_other);
    defaults.push(0);
    defaults.push(0);
    edges[len].insert(v, r_v);
    defaults[r_v] = r_v;
    defaults[r_other] = r_other;
    let mut names: Vec<String> = (0..=len).map(|i| format!("s{i}")).collect();
    names.push("r_v".into());
    names.push("r_other".into());
    FiniteAttacker::new(names, 0, edges, defaults)
}
