//! Static compliance verdicts.
//!
//! A typing is checked against a policy approximation point by point: the
//! relation induced by the dependency set `Γ(a_p)` must be coarser than the
//! approximated relation `A(a_p)` — every dependency must be covered by the
//! permissions in force at the point. A compliant report implies two-run
//! progress-insensitive security for the underlying dynamic policy.
//!
//! The syntactic check is sound but incomplete, so its failures surface as
//! `unknown` rather than `violation` unless the exact (finite-universe)
//! check was requested and refutes coarseness with a concrete store pair.

use alloc::collections::BTreeSet;
use alloc::vec::Vec;

use thiserror::Error;

use crate::lang::{Chan, Point, Var};
use crate::policy::{coarser_exact_witness, coarser_syntactic, EquivSpec, PolicyApprox};
use crate::semantics::{Store, Universe};
use crate::typing::{DepEnv, TypingVar};

/// How coarseness is decided.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum CheckMode {
    /// Bare-variable coverage only; failures are inconclusive.
    Syntactic,
    /// Escalate syntactic failures to exact coarseness over this universe.
    Exact(Universe),
}

/// Which check decided a point entry.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum CheckKind {
    Syntactic,
    Exact,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum PointVerdict {
    Pass,
    Violation,
    Unknown,
}

/// Per-point evidence.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct PointEntry {
    pub chan: Chan,
    pub point: Point,
    /// `Γ(a_p) ∩ PVar`, the static dependency evidence.
    pub deps: BTreeSet<Var>,
    /// The approximated policy relation at the point.
    pub approx: EquivSpec,
    pub check: CheckKind,
    pub verdict: PointVerdict,
    /// A store pair agreeing on `approx` but not on `deps`, when the exact
    /// check fails.
    pub witness: Option<(Store, Store)>,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Compliance {
    Compliant,
    Violation,
    Unknown,
}

/// The machine-readable outcome of a compliance check. Identical inputs
/// produce identical reports; entries are ordered by channel then point.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct ComplianceReport {
    pub overall: Compliance,
    pub points: Vec<PointEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CheckerError {
    /// The approximation must cover every output point of the typing.
    #[error("no policy approximation for output point {chan}@{point}")]
    MissingApproximation { chan: Chan, point: Point },
}

/// Checks a principal typing against a policy approximation.
///
/// For each output point the typing binds, verifies that `≡_{Γ(a_p)}` is
/// coarser than `A(a_p)`: first via the syntactic coverage check, then —
/// in exact mode — by enumerating the universe. Enlarging any `A(a_p)`
/// never flips a compliant point to a violation.
pub fn check_compliance(
    typing: &DepEnv,
    approx: &PolicyApprox,
    mode: &CheckMode,
) -> Result<ComplianceReport, CheckerError> {
    let mut points = Vec::new();
    let mut any_violation = false;
    let mut any_unknown = false;

    for (chan, point) in typing.point_vars() {
        let spec = approx
            .get(&chan, &point)
            .ok_or_else(|| CheckerError::MissingApproximation {
                chan: chan.clone(),
                point: point.clone(),
            })?;
        let deps = typing.pvar_deps(&TypingVar::ChanPoint(chan.clone(), point.clone()));

        let entry = if coarser_syntactic(&deps, spec) {
            PointEntry {
                chan,
                point,
                deps,
                approx: spec.clone(),
                check: CheckKind::Syntactic,
                verdict: PointVerdict::Pass,
                witness: None,
            }
        } else {
            match mode {
                CheckMode::Syntactic => {
                    any_unknown = true;
                    PointEntry {
                        chan,
                        point,
                        deps,
                        approx: spec.clone(),
                        check: CheckKind::Syntactic,
                        verdict: PointVerdict::Unknown,
                        witness: None,
                    }
                }
                CheckMode::Exact(universe) => {
                    let induced = EquivSpec::from_vars(deps.iter().cloned());
                    match coarser_exact_witness(&induced, spec, universe) {
                        None => PointEntry {
                            chan,
                            point,
                            deps,
                            approx: spec.clone(),
                            check: CheckKind::Exact,
                            verdict: PointVerdict::Pass,
                            witness: None,
                        },
                        Some(witness) => {
                            any_violation = true;
                            PointEntry {
                                chan,
                                point,
                                deps,
                                approx: spec.clone(),
                                check: CheckKind::Exact,
                                verdict: PointVerdict::Violation,
                                witness: Some(witness),
                            }
                        }
                    }
                }
            }
        };
        points.push(entry);
    }

    let overall = if any_violation {
        Compliance::Violation
    } else if any_unknown {
        Compliance::Unknown
    } else {
        Compliance::Compliant
    };
    Ok(ComplianceReport { overall, points })
}
