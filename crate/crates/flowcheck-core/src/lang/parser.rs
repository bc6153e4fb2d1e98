//! Recursive descent parser for programs and policy expressions.
//!
//! Concrete grammar, one statement per `;`:
//!
//! ```text
//! stmt  ::= "skip"
//!         | x ":=" expr
//!         | "if" "(" expr ")" block ("else" block)?
//!         | "while" "(" expr ")" block
//!         | "out" expr "on" a ("@" p)?
//!         | "allow" expr "->" a
//!         | "revoke" expr "->" a
//! block ::= "{" stmt (";" stmt)* ";"? "}" | "{" "}"
//! ```
//!
//! `//` starts a comment running to the end of the line. Identifiers are
//! ASCII letters, digits and underscores starting with a letter; channels
//! and points share the lexeme space with variables but live in distinct
//! namespaces. `pc` is reserved.

use alloc::borrow::ToOwned;
use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use thiserror::Error;

use super::ast::{BinOp, Chan, Command, DirectiveAction, Expr, Point, UnOp, Var};

/// Parse failure with a 1-based source position.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("parse error at {line}:{col}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

impl ParseError {
    fn at(pos: Pos, message: impl Into<String>) -> Self {
        ParseError {
            line: pos.line,
            col: pos.col,
            message: message.into(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Pos {
    line: usize,
    col: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Int(i64),
    KwSkip,
    KwIf,
    KwElse,
    KwWhile,
    KwOut,
    KwOn,
    KwAllow,
    KwRevoke,
    Assign, // :=
    Semi,
    At,
    Arrow, // ->
    LParen,
    RParen,
    LBrace,
    RBrace,
    Op(BinOp),
    Bang,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Int(n) => format!("integer `{n}`"),
            Tok::KwSkip => "`skip`".to_owned(),
            Tok::KwIf => "`if`".to_owned(),
            Tok::KwElse => "`else`".to_owned(),
            Tok::KwWhile => "`while`".to_owned(),
            Tok::KwOut => "`out`".to_owned(),
            Tok::KwOn => "`on`".to_owned(),
            Tok::KwAllow => "`allow`".to_owned(),
            Tok::KwRevoke => "`revoke`".to_owned(),
            Tok::Assign => "`:=`".to_owned(),
            Tok::Semi => "`;`".to_owned(),
            Tok::At => "`@`".to_owned(),
            Tok::Arrow => "`->`".to_owned(),
            Tok::LParen => "`(`".to_owned(),
            Tok::RParen => "`)`".to_owned(),
            Tok::LBrace => "`{`".to_owned(),
            Tok::RBrace => "`}`".to_owned(),
            Tok::Op(op) => format!("`{}`", op.symbol()),
            Tok::Bang => "`!`".to_owned(),
            Tok::Eof => "end of input".to_owned(),
        }
    }
}

fn lex(source: &str) -> Result<Vec<(Tok, Pos)>, ParseError> {
    let mut toks = Vec::new();
    let mut chars = source.chars().peekable();
    let mut line = 1usize;
    let mut col = 1usize;

    macro_rules! bump {
        () => {{
            let c = chars.next();
            if c == Some('\n') {
                line += 1;
                col = 1;
            } else if c.is_some() {
                col += 1;
            }
            c
        }};
    }

    loop {
        let pos = Pos { line, col };
        let c = match chars.peek().copied() {
            Some(c) => c,
            None => {
                toks.push((Tok::Eof, pos));
                return Ok(toks);
            }
        };
        match c {
            ' ' | '\t' | '\r' | '\n' => {
                bump!();
            }
            '/' => {
                bump!();
                if chars.peek() == Some(&'/') {
                    while let Some(&c) = chars.peek() {
                        if c == '\n' {
                            break;
                        }
                        bump!();
                    }
                } else {
                    return Err(ParseError::at(pos, "unexpected `/` (did you mean `//`?)"));
                }
            }
            '0'..='9' => {
                let mut digits = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_ascii_digit() {
                        digits.push(c);
                        bump!();
                    } else {
                        break;
                    }
                }
                let n: i64 = digits
                    .parse()
                    .map_err(|_| ParseError::at(pos, format!("integer literal `{digits}` out of range")))?;
                toks.push((Tok::Int(n), pos));
            }
            c if c.is_ascii_alphabetic() => {
                let mut word = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_ascii_alphanumeric() || c == '_' {
                        word.push(c);
                        bump!();
                    } else {
                        break;
                    }
                }
                let tok = match word.as_str() {
                    "skip" => Tok::KwSkip,
                    "if" => Tok::KwIf,
                    "else" => Tok::KwElse,
                    "while" => Tok::KwWhile,
                    "out" => Tok::KwOut,
                    "on" => Tok::KwOn,
                    "allow" => Tok::KwAllow,
                    "revoke" => Tok::KwRevoke,
                    "pc" => {
                        return Err(ParseError::at(pos, "`pc` is a reserved name"));
                    }
                    _ => Tok::Ident(word),
                };
                toks.push((tok, pos));
            }
            ';' => {
                bump!();
                toks.push((Tok::Semi, pos));
            }
            '@' => {
                bump!();
                toks.push((Tok::At, pos));
            }
            '(' => {
                bump!();
                toks.push((Tok::LParen, pos));
            }
            ')' => {
                bump!();
                toks.push((Tok::RParen, pos));
            }
            '{' => {
                bump!();
                toks.push((Tok::LBrace, pos));
            }
            '}' => {
                bump!();
                toks.push((Tok::RBrace, pos));
            }
            ':' => {
                bump!();
                if chars.peek() == Some(&'=') {
                    bump!();
                    toks.push((Tok::Assign, pos));
                } else {
                    return Err(ParseError::at(pos, "expected `:=`"));
                }
            }
            '+' => {
                bump!();
                toks.push((Tok::Op(BinOp::Add), pos));
            }
            '-' => {
                bump!();
                if chars.peek() == Some(&'>') {
                    bump!();
                    toks.push((Tok::Arrow, pos));
                } else {
                    toks.push((Tok::Op(BinOp::Sub), pos));
                }
            }
            '*' => {
                bump!();
                toks.push((Tok::Op(BinOp::Mul), pos));
            }
            '=' => {
                bump!();
                if chars.peek() == Some(&'=') {
                    bump!();
                    toks.push((Tok::Op(BinOp::Eq), pos));
                } else {
                    return Err(ParseError::at(pos, "expected `==` (assignment is `:=`)"));
                }
            }
            '!' => {
                bump!();
                if chars.peek() == Some(&'=') {
                    bump!();
                    toks.push((Tok::Op(BinOp::Ne), pos));
                } else {
                    toks.push((Tok::Bang, pos));
                }
            }
            '<' => {
                bump!();
                if chars.peek() == Some(&'=') {
                    bump!();
                    toks.push((Tok::Op(BinOp::Le), pos));
                } else {
                    toks.push((Tok::Op(BinOp::Lt), pos));
                }
            }
            '>' => {
                bump!();
                if chars.peek() == Some(&'=') {
                    bump!();
                    toks.push((Tok::Op(BinOp::Ge), pos));
                } else {
                    toks.push((Tok::Op(BinOp::Gt), pos));
                }
            }
            '&' => {
                bump!();
                if chars.peek() == Some(&'&') {
                    bump!();
                    toks.push((Tok::Op(BinOp::And), pos));
                } else {
                    return Err(ParseError::at(pos, "expected `&&`"));
                }
            }
            '|' => {
                bump!();
                if chars.peek() == Some(&'|') {
                    bump!();
                    toks.push((Tok::Op(BinOp::Or), pos));
                } else {
                    return Err(ParseError::at(pos, "expected `||`"));
                }
            }
            other => {
                return Err(ParseError::at(pos, format!("unexpected character `{other}`")));
            }
        }
    }
}

struct Parser {
    toks: Vec<(Tok, Pos)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn here(&self) -> Pos {
        self.toks[self.pos].1
    }

    fn advance(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, want: Tok) -> Result<(), ParseError> {
        if *self.peek() == want {
            self.advance();
            Ok(())
        } else {
            Err(ParseError::at(
                self.here(),
                format!("expected {}, found {}", want.describe(), self.peek().describe()),
            ))
        }
    }

    fn ident(&mut self, what: &str) -> Result<String, ParseError> {
        match self.peek().clone() {
            Tok::Ident(name) => {
                self.advance();
                Ok(name)
            }
            other => Err(ParseError::at(
                self.here(),
                format!("expected {what}, found {}", other.describe()),
            )),
        }
    }

    fn stmt_list(&mut self, terminator: &Tok) -> Result<Command, ParseError> {
        let mut stmts = Vec::new();
        if self.peek() == terminator {
            return Ok(Command::Skip);
        }
        loop {
            stmts.push(self.stmt()?);
            if *self.peek() == Tok::Semi {
                self.advance();
                // trailing separator
                if self.peek() == terminator {
                    break;
                }
            } else if self.peek() == terminator {
                break;
            } else {
                return Err(ParseError::at(
                    self.here(),
                    format!(
                        "expected `;` or {}, found {}",
                        terminator.describe(),
                        self.peek().describe()
                    ),
                ));
            }
        }
        Ok(Command::from_stmts(stmts))
    }

    fn block(&mut self) -> Result<Command, ParseError> {
        self.expect(Tok::LBrace)?;
        let body = self.stmt_list(&Tok::RBrace)?;
        self.expect(Tok::RBrace)?;
        Ok(body)
    }

    fn stmt(&mut self) -> Result<Command, ParseError> {
        match self.peek().clone() {
            Tok::KwSkip => {
                self.advance();
                Ok(Command::Skip)
            }
            Tok::KwIf => {
                self.advance();
                self.expect(Tok::LParen)?;
                let cond = self.expr()?;
                self.expect(Tok::RParen)?;
                let then_branch = self.block()?;
                let else_branch = if *self.peek() == Tok::KwElse {
                    self.advance();
                    self.block()?
                } else {
                    Command::Skip
                };
                Ok(Command::If(cond, Box::new(then_branch), Box::new(else_branch)))
            }
            Tok::KwWhile => {
                self.advance();
                self.expect(Tok::LParen)?;
                let cond = self.expr()?;
                self.expect(Tok::RParen)?;
                let body = self.block()?;
                Ok(Command::While(cond, Box::new(body)))
            }
            Tok::KwOut => {
                self.advance();
                let e = self.expr()?;
                self.expect(Tok::KwOn)?;
                let chan = Chan::new(self.ident("channel name")?);
                let point = if *self.peek() == Tok::At {
                    self.advance();
                    Some(Point::new(self.ident("program point")?))
                } else {
                    None
                };
                // placeholder point; fresh points are assigned after parsing
                Ok(Command::Out(e, chan, point.unwrap_or_else(|| Point::new(""))))
            }
            Tok::KwAllow | Tok::KwRevoke => {
                let action = if self.advance() == Tok::KwAllow {
                    DirectiveAction::Allow
                } else {
                    DirectiveAction::Revoke
                };
                let e = self.expr()?;
                self.expect(Tok::Arrow)?;
                let chan = Chan::new(self.ident("channel name")?);
                Ok(Command::Directive(action, e, chan))
            }
            Tok::Ident(name) => {
                self.advance();
                self.expect(Tok::Assign)?;
                let e = self.expr()?;
                Ok(Command::Assign(Var::new(name), e))
            }
            other => Err(ParseError::at(
                self.here(),
                format!("expected a statement, found {}", other.describe()),
            )),
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        self.or_expr()
    }

    fn or_expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.and_expr()?;
        while *self.peek() == Tok::Op(BinOp::Or) {
            self.advance();
            let rhs = self.and_expr()?;
            lhs = Expr::binary(BinOp::Or, lhs, rhs);
        }
        Ok(lhs)
    }

    fn and_expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.cmp_expr()?;
        while *self.peek() == Tok::Op(BinOp::And) {
            self.advance();
            let rhs = self.cmp_expr()?;
            lhs = Expr::binary(BinOp::And, lhs, rhs);
        }
        Ok(lhs)
    }

    fn cmp_expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.add_expr()?;
        while let Tok::Op(
            op @ (BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge),
        ) = self.peek()
        {
            let op = *op;
            self.advance();
            let rhs = self.add_expr()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn add_expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.mul_expr()?;
        while let Tok::Op(op @ (BinOp::Add | BinOp::Sub)) = self.peek() {
            let op = *op;
            self.advance();
            let rhs = self.mul_expr()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn mul_expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary_expr()?;
        while *self.peek() == Tok::Op(BinOp::Mul) {
            self.advance();
            let rhs = self.unary_expr()?;
            lhs = Expr::binary(BinOp::Mul, lhs, rhs);
        }
        Ok(lhs)
    }

    fn unary_expr(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            Tok::Op(BinOp::Sub) => {
                self.advance();
                let e = self.unary_expr()?;
                Ok(Expr::unary(UnOp::Neg, e))
            }
            Tok::Bang => {
                self.advance();
                let e = self.unary_expr()?;
                Ok(Expr::unary(UnOp::Not, e))
            }
            _ => self.atom(),
        }
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        match self.peek().clone() {
            Tok::Int(n) => {
                self.advance();
                Ok(Expr::Lit(n))
            }
            Tok::Ident(name) => {
                self.advance();
                Ok(Expr::Var(Var::new(name)))
            }
            Tok::LParen => {
                self.advance();
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            other => Err(ParseError::at(
                self.here(),
                format!("expected an expression, found {}", other.describe()),
            )),
        }
    }
}

/// Assigns fresh points `p1, p2, …` in source order to outputs that were
/// written without an `@ p` annotation, skipping names used explicitly.
fn assign_fresh_points(c: &mut Command, taken: &BTreeSet<Point>, counter: &mut usize) {
    match c {
        Command::Out(_, _, p) => {
            if p.as_str().is_empty() {
                loop {
                    *counter += 1;
                    let candidate = Point::new(format!("p{counter}"));
                    if !taken.contains(&candidate) {
                        *p = candidate;
                        break;
                    }
                }
            }
        }
        Command::Seq(c1, c2) | Command::If(_, c1, c2) => {
            assign_fresh_points(c1, taken, counter);
            assign_fresh_points(c2, taken, counter);
        }
        Command::While(_, body) => assign_fresh_points(body, taken, counter),
        _ => {}
    }
}

fn collect_explicit_points(c: &Command, out: &mut BTreeSet<Point>) {
    match c {
        Command::Out(_, _, p) => {
            if !p.as_str().is_empty() {
                out.insert(p.clone());
            }
        }
        Command::Seq(c1, c2) | Command::If(_, c1, c2) => {
            collect_explicit_points(c1, out);
            collect_explicit_points(c2, out);
        }
        Command::While(_, body) => collect_explicit_points(body, out),
        _ => {}
    }
}

/// Parses a whole program.
///
/// Output statements without an explicit point get fresh points `p1, p2, …`
/// in source order (auto-assigned points are deterministic and pairwise
/// distinct). A point annotating outputs on two different channels is
/// rejected: a point belongs to exactly one channel.
pub fn parse_program(source: &str) -> Result<Command, ParseError> {
    let toks = lex(source)?;
    let mut parser = Parser { toks, pos: 0 };
    let mut program = parser.stmt_list(&Tok::Eof)?;
    parser.expect(Tok::Eof)?;

    let mut explicit = BTreeSet::new();
    collect_explicit_points(&program, &mut explicit);
    let mut counter = 0usize;
    assign_fresh_points(&mut program, &explicit, &mut counter);

    // a point may not span two channels
    let mut seen: BTreeMap<Point, Chan> = BTreeMap::new();
    for (a, p) in program.output_points() {
        if let Some(prev) = seen.get(&p) {
            if *prev != a {
                return Err(ParseError {
                    line: 1,
                    col: 1,
                    message: format!(
                        "program point `{p}` is used on both channel `{prev}` and channel `{a}`"
                    ),
                });
            }
        } else {
            seen.insert(p, a);
        }
    }

    Ok(program)
}

/// Parses a single expression, as used in policy files.
pub fn parse_expr(source: &str) -> Result<Expr, ParseError> {
    let toks = lex(source)?;
    let mut parser = Parser { toks, pos: 0 };
    let e = parser.expr()?;
    parser.expect(Tok::Eof)?;
    Ok(e)
}
