//! Derivation provenance: why a dependency set contains each member.
//!
//! The walker re-derives the typing structurally and, for every member of
//! `Γ(a_p)`, prints the chain of rule applications that introduced it —
//! which statement read it, which condition made it a control dependency,
//! which sequential composition or loop iteration carried it along.

use std::fmt::Write as _;

use thiserror::Error;

use flowcheck_core::lang::{Chan, Command, Expr, Point};
use flowcheck_core::policy::{coarser_syntactic, EquivSpec};
use flowcheck_core::typing::{infer, DepEnv, TypingVar};

#[derive(Debug, Error)]
pub enum ExplainError {
    #[error("no output point `{0}@{1}` in this program")]
    UnknownPoint(Chan, Point),
}

const MAX_DEPTH: usize = 24;

/// Renders the provenance of every member of `Γ(a_p)`, optionally
/// annotated with the approximated policy at the point.
pub fn explain_point(
    program: &Command,
    chan: &Chan,
    point: &Point,
    approx: Option<&EquivSpec>,
) -> Result<String, ExplainError> {
    let typing = infer(program);
    let key = TypingVar::ChanPoint(chan.clone(), point.clone());
    if !typing
        .point_vars()
        .iter()
        .any(|(a, p)| a == chan && p == point)
    {
        return Err(ExplainError::UnknownPoint(chan.clone(), point.clone()));
    }

    let mut out = String::new();
    let deps = typing.deps(&key);
    let pvars = typing.pvar_deps(&key);
    let _ = writeln!(out, "dependencies of {chan}@{point}:");
    let _ = writeln!(
        out,
        "  full:       {{{}}}",
        deps.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(", ")
    );
    let _ = writeln!(
        out,
        "  variables:  {{{}}}",
        pvars.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(", ")
    );
    if let Some(spec) = approx {
        let ok = coarser_syntactic(&pvars, spec);
        let _ = writeln!(out, "  policy at point: {spec}");
        let _ = writeln!(
            out,
            "  covered syntactically: {}",
            if ok { "yes" } else { "no" }
        );
    }

    for member in &deps {
        let _ = writeln!(out, "{member}:");
        let mut lines = Vec::new();
        explain_member(program, &key, member, 1, &mut lines);
        for line in lines {
            let _ = writeln!(out, "{line}");
        }
    }
    Ok(out)
}

fn indent(depth: usize) -> String {
    "  ".repeat(depth)
}

fn push(out: &mut Vec<String>, depth: usize, text: String) {
    out.push(format!("{}{}", indent(depth), text));
}

/// Emits the derivation of `member ∈ Γ(key)` for the typing of `c`.
/// Precondition: the membership holds.
fn explain_member(
    c: &Command,
    key: &TypingVar,
    member: &TypingVar,
    depth: usize,
    out: &mut Vec<String>,
) {
    if depth > MAX_DEPTH {
        push(out, depth, "…".into());
        return;
    }
    match c {
        Command::Skip | Command::Directive(_, _, _) => {
            push(out, depth, format!("{key} is untouched here"));
        }
        Command::Assign(x, e) => {
            if key == &TypingVar::Pv(x.clone()) {
                match member {
                    TypingVar::Pc => push(
                        out,
                        depth,
                        format!("`{x} := {e}` runs only where control reaches it (pc)"),
                    ),
                    _ => push(out, depth, format!("`{x} := {e}` reads {member}")),
                }
            } else {
                push(out, depth, format!("{key} is untouched by `{x} := {e}`"));
            }
        }
        Command::Out(e, a, p) => {
            let stmt = format!("out {e} on {a} @ {p}");
            match (key, member) {
                (TypingVar::ChanPoint(_, _), TypingVar::Pc) => push(
                    out,
                    depth,
                    format!("whether `{stmt}` fires depends on control (pc)"),
                ),
                (TypingVar::ChanPoint(_, _), TypingVar::Channel(_)) => push(
                    out,
                    depth,
                    format!("earlier outputs on {a} shift which observation `{stmt}` produces (channel context)"),
                ),
                (TypingVar::ChanPoint(ka, kp), TypingVar::ChanPoint(ma, mp))
                    if ka == ma && kp == mp =>
                {
                    push(out, depth, format!("`{stmt}` accumulates the point's earlier dependencies"))
                }
                (TypingVar::ChanPoint(_, _), _) => {
                    push(out, depth, format!("the output value `{e}` reads {member}"))
                }
                (TypingVar::Channel(_), TypingVar::Pc) => push(
                    out,
                    depth,
                    format!("`{stmt}` adds an output on {a} wherever control reaches it (pc)"),
                ),
                (TypingVar::Channel(_), _) => push(
                    out,
                    depth,
                    format!("the output count on {a} accumulates across `{stmt}`"),
                ),
                _ => push(out, depth, format!("{key} is untouched by `{stmt}`")),
            }
        }
        Command::Seq(c1, c2) => {
            let g1 = infer(c1);
            let g2 = infer(c2);
            // carried unchanged through the later part?
            if !g2.bound_vars().any(|v| v == key) {
                explain_member(c1, key, member, depth, out);
                return;
            }
            // established by the later part and untouched earlier?
            if g2.contains(key, member) && !g1.bound_vars().any(|v| v == member) {
                explain_member(c2, key, member, depth, out);
                return;
            }
            let mid = g2
                .deps(key)
                .into_iter()
                .find(|y| g1.contains(y, member))
                .expect("membership implies a composition witness");
            push(
                out,
                depth,
                format!("sequencing: {key} ← {mid} (later statements), then {mid} ← {member} (earlier statements)"),
            );
            explain_member(c2, key, &mid, depth + 1, out);
            explain_member(c1, &mid, member, depth + 1, out);
        }
        Command::If(e, c1, c2) => {
            if key == &TypingVar::Pc {
                push(out, depth, "the conditional resets pc to itself".into());
                return;
            }
            let g_then = infer(c1);
            let g_else = infer(c2);
            let (which, branch, g) = if guarded_contains(&g_then, e, key, member) {
                ("then", c1.as_ref(), g_then)
            } else {
                ("else", c2.as_ref(), g_else)
            };
            explain_guarded(branch, &g, e, which, key, member, depth, out);
        }
        Command::While(e, body) => {
            if key == &TypingVar::Pc {
                push(out, depth, "the loop resets pc to itself".into());
                return;
            }
            let step_env = infer(body).compose(&guard_env(e));
            match shortest_chain(&step_env, key, member) {
                None | Some(0) => {
                    push(
                        out,
                        depth,
                        format!("`while ({e})` may run zero times, so {key} keeps depending on {member}"),
                    );
                }
                Some(k) => {
                    push(
                        out,
                        depth,
                        format!("within {k} iteration(s) of `while ({e})`:"),
                    );
                    // walk one hop of the chain, then recurse on the rest
                    let mut current = key.clone();
                    for step in 0..k {
                        let next = step_env
                            .deps(&current)
                            .into_iter()
                            .find(|y| {
                                if step + 1 == k {
                                    y == member
                                } else {
                                    reaches_within(&step_env, y, member, k - step - 1)
                                }
                            })
                            .expect("chain exists");
                        let g_body = infer(body);
                        explain_guarded(
                            body,
                            &g_body,
                            e,
                            "loop body",
                            &current,
                            &next,
                            depth + 1,
                            out,
                        );
                        current = next;
                    }
                }
            }
        }
    }
}

fn guard_env(e: &Expr) -> DepEnv {
    let mut deps: std::collections::BTreeSet<TypingVar> =
        e.fv().into_iter().map(TypingVar::Pv).collect();
    deps.insert(TypingVar::Pc);
    DepEnv::from_bindings([(TypingVar::Pc, deps)])
}

fn guarded_contains(g: &DepEnv, e: &Expr, key: &TypingVar, member: &TypingVar) -> bool {
    g.compose(&guard_env(e)).contains(key, member)
}

/// Explains `member ∈ (Γ_branch ; Γ_id[pc ↦ {pc} ∪ fv(e)])(key)`.
#[allow(clippy::too_many_arguments)]
fn explain_guarded(
    branch: &Command,
    g: &DepEnv,
    e: &Expr,
    which: &str,
    key: &TypingVar,
    member: &TypingVar,
    depth: usize,
    out: &mut Vec<String>,
) {
    if depth > MAX_DEPTH {
        push(out, depth, "…".into());
        return;
    }
    let via_condition = match member {
        TypingVar::Pc => true,
        TypingVar::Pv(x) => e.fv().contains(x),
        _ => false,
    };
    if g.contains(key, member) {
        push(out, depth, format!("in the {which} of `({e})`:"));
        explain_member(branch, key, member, depth + 1, out);
    } else if via_condition && g.contains(key, &TypingVar::Pc) {
        push(
            out,
            depth,
            format!("{key} is control-dependent here and {member} feeds the condition `({e})`"),
        );
        if key != &TypingVar::Pc {
            explain_member(branch, key, &TypingVar::Pc, depth + 1, out);
        }
    } else {
        // identity carry-through
        push(
            out,
            depth,
            format!("{key} keeps depending on {member} through the {which}"),
        );
    }
}

/// Length of the shortest chain `key → … → member` through `env`,
/// `Some(0)` when `key == member` and the membership is the identity.
fn shortest_chain(env: &DepEnv, key: &TypingVar, member: &TypingVar) -> Option<usize> {
    if key == member {
        return Some(0);
    }
    let mut frontier = vec![key.clone()];
    let mut seen = std::collections::BTreeSet::from([key.clone()]);
    for dist in 1..=MAX_DEPTH {
        let mut next = Vec::new();
        for node in &frontier {
            for dep in env.deps(node) {
                if dep == *member {
                    return Some(dist);
                }
                if seen.insert(dep.clone()) {
                    next.push(dep);
                }
            }
        }
        if next.is_empty() {
            return None;
        }
        frontier = next;
    }
    None
}

fn reaches_within(env: &DepEnv, from: &TypingVar, to: &TypingVar, budget: usize) -> bool {
    match shortest_chain(env, from, to) {
        Some(k) => k <= budget,
        None => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use flowcheck_core::lang::parse_program;

    #[test]
    fn intro_b_p3_traces_x_through_the_channel_context() {
        let src = "allow x -> a; out x on a @ p1; \
                   if (x > 0) { out 1 on a @ p2; revoke x -> a }; \
                   out 2 on a @ p3; out 3 on a @ p4";
        let program = parse_program(src).unwrap();
        let text =
            explain_point(&program, &Chan::new("a"), &Point::new("p3"), None).unwrap();
        assert!(text.contains("variables:  {x}"), "{text}");
        assert!(text.contains("channel context"), "{text}");
        assert!(text.contains("control-dependent"), "{text}");
    }

    #[test]
    fn fig3_style_assignment_chain() {
        let program = parse_program("x := z + 1; out x on a @ p1").unwrap();
        let text =
            explain_point(&program, &Chan::new("a"), &Point::new("p1"), None).unwrap();
        assert!(text.contains("`x := z + 1` reads z"), "{text}");
    }

    #[test]
    fn unknown_points_error() {
        let program = parse_program("out 1 on a @ p1").unwrap();
        assert!(explain_point(&program, &Chan::new("a"), &Point::new("zz"), None).is_err());
    }

    #[test]
    fn loop_members_are_reported_with_iterations() {
        let src = "while (y > 0) { out x on a @ p1; x := z; y := y - 1 }";
        let program = parse_program(src).unwrap();
        let text =
            explain_point(&program, &Chan::new("a"), &Point::new("p1"), None).unwrap();
        // z flows into the point only on the second iteration
        assert!(text.contains("iteration"), "{text}");
        assert!(text.contains('z'), "{text}");
    }

    #[test]
    fn every_member_gets_a_narrative() {
        let sources = [
            "allow x -> a; out x on a @ p1; if (x > 0) { out 1 on a @ p2; revoke x -> a }; out 2 on a @ p3",
            "while (y > 0) { out x + y on a @ p1; y := y - 1 }",
            "x := y; if (z) { x := 0 }; out x on a @ p1",
        ];
        for src in sources {
            let program = parse_program(src).unwrap();
            let typing = infer(&program);
            for (chan, point) in typing.point_vars() {
                let text = explain_point(&program, &chan, &point, None).unwrap();
                for member in typing.deps(&TypingVar::ChanPoint(chan.clone(), point.clone())) {
                    assert!(
                        text.contains(&format!("{member}:")),
                        "missing narrative for {member} in {src}:\n{text}"
                    );
                }
            }
        }
    }
}
