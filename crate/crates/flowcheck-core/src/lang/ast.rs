//! AST types for programs, expressions and policy directives.

use alloc::boxed::Box;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

/// A program variable.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var(String);

/// An output channel.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Chan(String);

/// A program point annotating an output statement.
///
/// Points are opaque tokens; each point belongs to exactly one channel but
/// several outputs on that channel may share a point, in which case their
/// dependency sets are merged by the type system.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Point(String);

macro_rules! name_impls {
    ($ty:ident) => {
        impl $ty {
            pub fn new(name: impl Into<String>) -> Self {
                $ty(name.into())
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl fmt::Debug for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, concat!(stringify!($ty), "({})"), self.0)
            }
        }

        impl From<&str> for $ty {
            fn from(name: &str) -> Self {
                $ty::new(name)
            }
        }
    };
}

name_impls!(Var);
name_impls!(Chan);
name_impls!(Point);

/// Binary operators. Booleans are integers with `0 = false`.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    And,
    Or,
}

impl BinOp {
    /// Total evaluation on machine integers: arithmetic wraps, comparisons
    /// and logical operators yield `1` or `0`.
    pub fn apply(self, l: i64, r: i64) -> i64 {
        match self {
            BinOp::Add => l.wrapping_add(r),
            BinOp::Sub => l.wrapping_sub(r),
            BinOp::Mul => l.wrapping_mul(r),
            BinOp::Eq => (l == r) as i64,
            BinOp::Ne => (l != r) as i64,
            BinOp::Lt => (l < r) as i64,
            BinOp::Le => (l <= r) as i64,
            BinOp::Gt => (l > r) as i64,
            BinOp::Ge => (l >= r) as i64,
            BinOp::And => (l != 0 && r != 0) as i64,
            BinOp::Or => (l != 0 || r != 0) as i64,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::And => "&&",
            BinOp::Or => "||",
        }
    }
}

/// Unary operators.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum UnOp {
    /// Arithmetic negation (wrapping).
    Neg,
    /// Logical not: `0` becomes `1`, anything else becomes `0`.
    Not,
}

impl UnOp {
    pub fn apply(self, v: i64) -> i64 {
        match self {
            UnOp::Neg => v.wrapping_neg(),
            UnOp::Not => (v == 0) as i64,
        }
    }
}

/// Expressions over integer literals and program variables.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum Expr {
    Lit(i64),
    Var(Var),
    Unary(UnOp, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn var(name: impl Into<String>) -> Self {
        Expr::Var(Var::new(name))
    }

    pub fn binary(op: BinOp, l: Expr, r: Expr) -> Self {
        Expr::Binary(op, Box::new(l), Box::new(r))
    }

    pub fn unary(op: UnOp, e: Expr) -> Self {
        Expr::Unary(op, Box::new(e))
    }

    /// The free variables of the expression.
    pub fn fv(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        self.collect_fv(&mut out);
        out
    }

    fn collect_fv(&self, out: &mut BTreeSet<Var>) {
        match self {
            Expr::Lit(_) => {}
            Expr::Var(x) => {
                out.insert(x.clone());
            }
            Expr::Unary(_, e) => e.collect_fv(out),
            Expr::Binary(_, l, r) => {
                l.collect_fv(out);
                r.collect_fv(out);
            }
        }
    }
}

/// Whether a policy directive grants or withdraws a flow.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum DirectiveAction {
    Allow,
    Revoke,
}

/// Commands of the while-language.
///
/// `Out` carries the channel and program point of the observation it
/// produces. `Directive` is a policy directive: it is silent with respect
/// to the store and the label trace and only updates the ambient policy
/// state.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum Command {
    Skip,
    Seq(Box<Command>, Box<Command>),
    Assign(Var, Expr),
    If(Expr, Box<Command>, Box<Command>),
    While(Expr, Box<Command>),
    Out(Expr, Chan, Point),
    Directive(DirectiveAction, Expr, Chan),
}

impl Command {
    pub fn seq(first: Command, second: Command) -> Self {
        Command::Seq(Box::new(first), Box::new(second))
    }

    /// Right-folds a statement list into a `Seq` chain; empty lists are `Skip`.
    pub fn from_stmts(stmts: Vec<Command>) -> Self {
        let mut iter = stmts.into_iter().rev();
        let last = match iter.next() {
            Some(c) => c,
            None => return Command::Skip,
        };
        iter.fold(last, |acc, c| Command::seq(c, acc))
    }

    /// Every variable the program reads or assigns, including the subjects
    /// of policy directives (those are evaluated on initial stores when the
    /// policy relation is queried).
    pub fn variables(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        self.visit(&mut |c| match c {
            Command::Assign(x, e) => {
                out.insert(x.clone());
                out.extend(e.fv());
            }
            Command::If(e, _, _) | Command::While(e, _) => out.extend(e.fv()),
            Command::Out(e, _, _) | Command::Directive(_, e, _) => out.extend(e.fv()),
            _ => {}
        });
        out
    }

    /// Every channel mentioned by an output or directive.
    pub fn channels(&self) -> BTreeSet<Chan> {
        let mut out = BTreeSet::new();
        self.visit(&mut |c| match c {
            Command::Out(_, a, _) => {
                out.insert(a.clone());
            }
            Command::Directive(_, _, a) => {
                out.insert(a.clone());
            }
            _ => {}
        });
        out
    }

    /// Every `(channel, point)` pair annotating an output statement.
    pub fn output_points(&self) -> BTreeSet<(Chan, Point)> {
        let mut out = BTreeSet::new();
        self.visit(&mut |c| {
            if let Command::Out(_, a, p) = c {
                out.insert((a.clone(), p.clone()));
            }
        });
        out
    }

    /// The same program with every policy directive replaced by `skip`.
    /// Directive erasure preserves the label trace of every run.
    pub fn erase_directives(&self) -> Command {
        match self {
            Command::Directive(_, _, _) => Command::Skip,
            Command::Skip | Command::Assign(_, _) | Command::Out(_, _, _) => self.clone(),
            Command::Seq(c1, c2) => {
                Command::seq(c1.erase_directives(), c2.erase_directives())
            }
            Command::If(e, c1, c2) => Command::If(
                e.clone(),
                Box::new(c1.erase_directives()),
                Box::new(c2.erase_directives()),
            ),
            Command::While(e, body) => {
                Command::While(e.clone(), Box::new(body.erase_directives()))
            }
        }
    }

    /// The number of statements, counting every node except `Seq` spines.
    pub fn size(&self) -> usize {
        match self {
            Command::Seq(c1, c2) => c1.size() + c2.size(),
            Command::If(_, c1, c2) => 1 + c1.size() + c2.size(),
            Command::While(_, body) => 1 + body.size(),
            _ => 1,
        }
    }

    fn visit(&self, f: &mut impl FnMut(&Command)) {
        f(self);
        match self {
            Command::Seq(c1, c2) | Command::If(_, c1, c2) => {
                c1.visit(f);
                c2.visit(f);
            }
            Command::While(_, body) => body.visit(f),
            _ => {}
        }
    }

    /// The point-to-channel assignment of the program. The parser rejects
    /// programs where one point annotates outputs on two different channels.
    pub fn point_channels(&self) -> BTreeMap<Point, Chan> {
        let mut out = BTreeMap::new();
        self.visit(&mut |c| {
            if let Command::Out(_, a, p) = c {
                out.insert(p.clone(), a.clone());
            }
        });
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(name: &str) -> Var {
        Var::new(name)
    }

    #[test]
    fn fv_of_literal_is_empty() {
        assert!(Expr::Lit(5).fv().is_empty());
    }

    #[test]
    fn fv_of_variable_is_singleton() {
        assert_eq!(Expr::var("x").fv(), BTreeSet::from([v("x")]));
    }

    #[test]
    fn fv_of_binop_unions_operands() {
        // z + 1 has exactly {z}
        let e = Expr::binary(BinOp::Add, Expr::var("z"), Expr::Lit(1));
        assert_eq!(e.fv(), BTreeSet::from([v("z")]));
    }

    #[test]
    fn fv_is_monotone_under_subexpressions() {
        let sub = Expr::binary(BinOp::Mul, Expr::var("x"), Expr::var("y"));
        let whole = Expr::binary(BinOp::Add, sub.clone(), Expr::var("z"));
        assert!(sub.fv().is_subset(&whole.fv()));
    }

    #[test]
    fn arithmetic_is_total_on_extremes() {
        assert_eq!(BinOp::Add.apply(i64::MAX, 1), i64::MIN);
        assert_eq!(BinOp::Mul.apply(i64::MIN, -1), i64::MIN);
        assert_eq!(UnOp::Neg.apply(i64::MIN), i64::MIN);
    }

    #[test]
    fn logical_operators_treat_nonzero_as_true() {
        assert_eq!(BinOp::And.apply(2, -3), 1);
        assert_eq!(BinOp::And.apply(2, 0), 0);
        assert_eq!(BinOp::Or.apply(0, 7), 1);
        assert_eq!(UnOp::Not.apply(0), 1);
        assert_eq!(UnOp::Not.apply(-4), 0);
    }

    #[test]
    fn from_stmts_right_folds() {
        let stmts = alloc::vec![Command::Skip, Command::Skip, Command::Skip];
        let c = Command::from_stmts(stmts);
        assert_eq!(
            c,
            Command::seq(Command::Skip, Command::seq(Command::Skip, Command::Skip))
        );
    }
}
