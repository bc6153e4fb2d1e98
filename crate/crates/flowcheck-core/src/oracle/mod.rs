//! Brute-force semantic ground truth on finite store universes.
//!
//! The oracle quantifies the knowledge-based security definitions over all
//! stores of a finite universe and all trace prefixes reachable within a
//! fuel bound. It exists to cross-validate the static pipeline: a compliant
//! typing verdict must never contradict the semantic security conditions.

mod attacker;
mod checks;
mod knowledge;

pub use attacker::{
    enumerate_attackers, split_attacker, Attacker, CountingLift, FiniteAttacker, LengthOnly,
    PerfectRecall,
};
pub use checks::{
    acpi_check, kb_check, pi_check, pi_check_in, theorem1_crosscheck, two_run_pi_check,
    typing_soundness_check, Counterexample, Theorem1Report, Verdict,
};
pub use knowledge::{
    full_progress_knowledge, full_progress_knowledge_in, is_quasi_constant, knowledge,
    knowledge_in, progress_knowledge, progress_knowledge_in, KnowledgeSet, TraceTable,
};
