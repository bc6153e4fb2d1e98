//! Canonical pretty-printer.
//!
//! The printed form parses back to the same AST and is the canonical text
//! used for content-hashing typings: programs differing only in layout or
//! comments print identically.

use alloc::string::String;
use core::fmt;

use super::ast::{BinOp, Command, Expr, UnOp};
use super::DirectiveAction;

fn precedence(op: BinOp) -> u8 {
    match op {
        BinOp::Or => 1,
        BinOp::And => 2,
        BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => 3,
        BinOp::Add | BinOp::Sub => 4,
        BinOp::Mul => 5,
    }
}

fn fmt_expr(e: &Expr, parent: u8, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match e {
        Expr::Lit(n) => {
            if *n < 0 {
                // negative literals lex as a unary minus; parenthesize so the
                // round-trip survives inside tighter contexts
                write!(f, "(-{})", n.unsigned_abs())
            } else {
                write!(f, "{n}")
            }
        }
        Expr::Var(x) => write!(f, "{x}"),
        Expr::Unary(op, inner) => {
            let sym = match op {
                UnOp::Neg => "-",
                UnOp::Not => "!",
            };
            write!(f, "{sym}")?;
            match **inner {
                Expr::Lit(_) | Expr::Var(_) | Expr::Unary(_, _) => fmt_expr(inner, 6, f),
                _ => {
                    write!(f, "(")?;
                    fmt_expr(inner, 0, f)?;
                    write!(f, ")")
                }
            }
        }
        Expr::Binary(op, l, r) => {
            let prec = precedence(*op);
            let need_parens = prec < parent;
            if need_parens {
                write!(f, "(")?;
            }
            fmt_expr(l, prec, f)?;
            write!(f, " {} ", op.symbol())?;
            // operators are left-associative: a right child at equal
            // precedence keeps its parentheses
            fmt_expr(r, prec + 1, f)?;
            if need_parens {
                write!(f, ")")?;
            }
            Ok(())
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt_expr(self, 0, f)
    }
}

fn fmt_stmts(c: &Command, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match c {
        Command::Seq(c1, c2) => {
            fmt_stmts(c1, f)?;
            write!(f, "; ")?;
            fmt_stmts(c2, f)
        }
        Command::Skip => write!(f, "skip"),
        Command::Assign(x, e) => write!(f, "{x} := {e}"),
        Command::If(e, c1, c2) => {
            write!(f, "if ({e}) {{ ")?;
            fmt_stmts(c1, f)?;
            write!(f, " }}")?;
            if **c2 != Command::Skip {
                write!(f, " else {{ ")?;
                fmt_stmts(c2, f)?;
                write!(f, " }}")?;
            }
            Ok(())
        }
        Command::While(e, body) => {
            write!(f, "while ({e}) {{ ")?;
            fmt_stmts(body, f)?;
            write!(f, " }}")
        }
        Command::Out(e, a, p) => write!(f, "out {e} on {a} @ {p}"),
        Command::Directive(action, e, a) => {
            let kw = match action {
                DirectiveAction::Allow => "allow",
                DirectiveAction::Revoke => "revoke",
            };
            write!(f, "{kw} {e} -> {a}")
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt_stmts(self, f)
    }
}

/// The canonical single-line source of a program.
pub fn canonical_source(c: &Command) -> String {
    alloc::format!("{c}")
}

#[cfg(test)]
mod tests {
    use super::super::parse_program;
    use super::*;

    fn roundtrips(src: &str) {
        let c = parse_program(src).unwrap();
        let printed = canonical_source(&c);
        let reparsed = parse_program(&printed).unwrap();
        assert_eq!(c, reparsed, "printed form was `{printed}`");
    }

    #[test]
    fn print_parse_round_trips() {
        roundtrips("skip");
        roundtrips("x := z + 1; z := x; if (z > 0) { y := 1 }; x := 0");
        roundtrips("out x on a @ p1; out 2 on a");
        roundtrips("while (x > 0) { x := x - 1; out x on a }");
        roundtrips("allow x -> a; if (x) { revoke x -> a } else { out 1 on b }");
        roundtrips("x := -(y + 1) * 2 - 3 - 4; y := !(x == 2) && 1 || 0");
        roundtrips("x := 1 - (2 - 3)");
    }

    #[test]
    fn whitespace_variants_print_identically() {
        let a = parse_program("x := 1;\n\n  y := x // comment\n").unwrap();
        let b = parse_program("x := 1; y := x").unwrap();
        assert_eq!(canonical_source(&a), canonical_source(&b));
    }

    #[test]
    fn else_skip_is_elided() {
        let c = parse_program("if (x) { out 1 on a }").unwrap();
        assert_eq!(canonical_source(&c), "if (x) { out 1 on a @ p1 }");
    }
}
