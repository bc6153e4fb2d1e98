//! Core analyses for a deterministic while-language with output channels.
//!
//! The crate is split along the pipeline a policy check travels through:
//!
//! * [`lang`] — abstract syntax, parser and printer for programs and
//!   policy directives;
//! * [`semantics`] — small-step operational semantics with output labels
//!   and fuel-bounded execution;
//! * [`typing`] — the flow-sensitive dependency type system producing a
//!   principal typing per program;
//! * [`policy`] — equivalence-relation policies, directive-driven dynamic
//!   policies and their per-program-point approximation;
//! * [`checker`] — static compliance verdicts combining a typing with a
//!   policy approximation;
//! * [`oracle`] — brute-force semantic ground truth on finite store
//!   universes: attacker automata, knowledge sets and the security
//!   conditions the static verdicts are validated against;
//! * [`gen`] — a deterministic random program generator used by property
//!   tests and benchmarks.
//!
//! Everything is `no_std`-compatible (with `alloc`); IO, file formats and
//! the command-line front-end live in the companion `flowcheck` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod checker;
pub mod gen;
pub mod lang;
pub mod oracle;
pub mod policy;
pub mod semantics;
pub mod typing;
