//! Deterministic random program generation for property tests, oracles and
//! benchmarks.
//!
//! The generator is seeded and platform-independent so counterexamples can
//! be replayed from a seed alone. Loops are generated in a counting-down
//! shape by default so that most programs terminate; an optional fraction
//! of programs receives a deliberately divergent loop to exercise
//! fuel-bounded verdicts and progress flows.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::lang::{BinOp, Chan, Command, DirectiveAction, Expr, Var};
use crate::semantics::Universe;

/// SplitMix64: tiny, deterministic, good enough for test-case generation.
#[derive(Clone, Debug)]
pub struct Rng {
    state: u64,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }

    /// Uniform in `0..bound` (bound must be nonzero).
    pub fn below(&mut self, bound: usize) -> usize {
        (self.next_u64() % bound as u64) as usize
    }

    pub fn pick<'a, T>(&mut self, items: &'a [T]) -> &'a T {
        &items[self.below(items.len())]
    }

    /// True with probability `percent`/100.
    pub fn chance(&mut self, percent: usize) -> bool {
        self.below(100) < percent
    }
}

/// Shape parameters for generated programs.
#[derive(Clone, Debug)]
pub struct GenConfig {
    /// Upper bound on the number of statements.
    pub max_stmts: usize,
    /// Number of program variables (`x0`, `x1`, …).
    pub num_vars: usize,
    /// Channels outputs may use.
    pub num_chans: usize,
    /// Literal pool for expressions.
    pub values: Vec<i64>,
    /// Percentage of programs that get one deliberately divergent loop.
    pub divergent_percent: usize,
    /// Generate allow/revoke directives.
    pub directives: bool,
    /// Restrict output expressions to literals and bare variables (keeps
    /// the observed value alphabet small for attacker enumeration).
    pub simple_outputs: bool,
    /// Maximum nesting depth of if/while bodies.
    pub max_depth: usize,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            max_stmts: 12,
            num_vars: 3,
            num_chans: 1,
            values: alloc::vec![0, 1],
            divergent_percent: 10,
            directives: true,
            simple_outputs: false,
            max_depth: 2,
        }
    }
}

impl GenConfig {
    pub fn var_names(&self) -> Vec<String> {
        (0..self.num_vars).map(|i| format!("x{i}")).collect()
    }

    pub fn chan_names(&self) -> Vec<String> {
        (0..self.num_chans).map(|i| format!("c{i}")).collect()
    }

    /// The boolean universe over the generated variables.
    pub fn universe(&self) -> Universe {
        Universe::from_ranges(
            self.var_names()
                .into_iter()
                .map(|v| (Var::new(v), self.values.clone())),
        )
    }
}

fn gen_var(cfg: &GenConfig, rng: &mut Rng) -> Var {
    Var::new(format!("x{}", rng.below(cfg.num_vars)))
}

fn gen_chan(cfg: &GenConfig, rng: &mut Rng) -> Chan {
    Chan::new(format!("c{}", rng.below(cfg.num_chans)))
}

fn gen_lit(cfg: &GenConfig, rng: &mut Rng) -> Expr {
    Expr::Lit(*rng.pick(&cfg.values))
}

fn gen_atom(cfg: &GenConfig, rng: &mut Rng) -> Expr {
    if rng.chance(50) {
        Expr::Var(gen_var(cfg, rng))
    } else {
        gen_lit(cfg, rng)
    }
}

/// Small arithmetic/comparison expression.
pub fn gen_expr(cfg: &GenConfig, rng: &mut Rng) -> Expr {
    match rng.below(6) {
        0 | 1 => gen_atom(cfg, rng),
        2 => Expr::binary(BinOp::Add, gen_atom(cfg, rng), gen_atom(cfg, rng)),
        3 => Expr::binary(BinOp::Sub, gen_atom(cfg, rng), gen_atom(cfg, rng)),
        4 => Expr::binary(BinOp::Mul, gen_atom(cfg, rng), gen_atom(cfg, rng)),
        _ => Expr::binary(
            *rng.pick(&[BinOp::Eq, BinOp::Ne, BinOp::Lt, BinOp::Gt]),
            gen_atom(cfg, rng),
            gen_atom(cfg, rng),
        ),
    }
}

fn gen_cond(cfg: &GenConfig, rng: &mut Rng) -> Expr {
    match rng.below(3) {
        0 => Expr::Var(gen_var(cfg, rng)),
        1 => Expr::binary(BinOp::Gt, Expr::Var(gen_var(cfg, rng)), gen_lit(cfg, rng)),
        _ => Expr::binary(
            *rng.pick(&[BinOp::Eq, BinOp::Ne]),
            Expr::Var(gen_var(cfg, rng)),
            gen_lit(cfg, rng),
        ),
    }
}

fn gen_out_expr(cfg: &GenConfig, rng: &mut Rng) -> Expr {
    if cfg.simple_outputs {
        // literals from the value pool plus `2`, or a bare variable: keeps
        // observed values inside a small alphabet
        if rng.chance(50) {
            Expr::Var(gen_var(cfg, rng))
        } else if rng.chance(30) {
            Expr::Lit(2)
        } else {
            gen_lit(cfg, rng)
        }
    } else {
        gen_expr(cfg, rng)
    }
}

fn gen_stmt(cfg: &GenConfig, rng: &mut Rng, depth: usize, budget: &mut usize) -> Command {
    if *budget == 0 {
        return Command::Skip;
    }
    *budget -= 1;
    let roll = rng.below(100);
    match roll {
        // assignment
        0..=34 => Command::Assign(gen_var(cfg, rng), gen_expr(cfg, rng)),
        // output
        35..=59 => Command::Out(
            gen_out_expr(cfg, rng),
            gen_chan(cfg, rng),
            crate::lang::Point::new(""),
        ),
        // conditional
        60..=74 if depth < cfg.max_depth => {
            let then_branch = gen_block(cfg, rng, depth + 1, budget);
            let else_branch = if rng.chance(50) {
                gen_block(cfg, rng, depth + 1, budget)
            } else {
                Command::Skip
            };
            Command::If(
                gen_cond(cfg, rng),
                alloc::boxed::Box::new(then_branch),
                alloc::boxed::Box::new(else_branch),
            )
        }
        // counting-down loop: terminates from any initial store
        75..=84 if depth < cfg.max_depth => {
            let counter = gen_var(cfg, rng);
            let mut stmts = gen_block_stmts(cfg, rng, depth + 1, budget);
            stmts.push(Command::Assign(
                counter.clone(),
                Expr::binary(BinOp::Sub, Expr::Var(counter.clone()), Expr::Lit(1)),
            ));
            Command::While(
                Expr::binary(BinOp::Gt, Expr::Var(counter), Expr::Lit(0)),
                alloc::boxed::Box::new(Command::from_stmts(stmts)),
            )
        }
        // directive
        85..=94 if cfg.directives => Command::Directive(
            *rng.pick(&[DirectiveAction::Allow, DirectiveAction::Revoke]),
            Expr::Var(gen_var(cfg, rng)),
            gen_chan(cfg, rng),
        ),
        _ => Command::Skip,
    }
}

fn gen_block_stmts(cfg: &GenConfig, rng: &mut Rng, depth: usize, budget: &mut usize) -> Vec<Command> {
    let n = 1 + rng.below(3);
    (0..n).map(|_| gen_stmt(cfg, rng, depth, budget)).collect()
}

fn gen_block(cfg: &GenConfig, rng: &mut Rng, depth: usize, budget: &mut usize) -> Command {
    Command::from_stmts(gen_block_stmts(cfg, rng, depth, budget))
}

/// Generates one random program. Point annotations are assigned the same
/// way the parser assigns them: `p1, p2, …` in source order.
pub fn gen_program(cfg: &GenConfig, rng: &mut Rng) -> Command {
    let mut budget = 1 + rng.below(cfg.max_stmts);
    let mut stmts = Vec::new();
    while budget > 0 {
        stmts.push(gen_stmt(cfg, rng, 0, &mut budget));
    }
    if cfg.divergent_percent > 0 && rng.chance(cfg.divergent_percent) {
        // an example-3 style progress leak: diverge while a condition holds
        let guard = gen_cond(cfg, rng);
        stmts.push(Command::While(
            guard,
            alloc::boxed::Box::new(Command::Skip),
        ));
        if rng.chance(50) {
            stmts.push(Command::Out(gen_lit(cfg, rng), gen_chan(cfg, rng), crate::lang::Point::new("")));
        }
    }
    let mut program = Command::from_stmts(stmts);
    assign_points(&mut program, &mut 0);
    program
}

/// Generates a program whose only flows are progress flows: all outputs
/// are constants at the top level, loops may diverge. Every trace is a
/// prefix of one fixed trace, regardless of the initial store.
pub fn gen_quasi_constant(cfg: &GenConfig, rng: &mut Rng) -> Command {
    let n = 1 + rng.below(5);
    let mut stmts = Vec::new();
    for _ in 0..n {
        if rng.chance(30) {
            stmts.push(Command::While(
                gen_cond(cfg, rng),
                alloc::boxed::Box::new(Command::Skip),
            ));
        }
        stmts.push(Command::Out(
            gen_lit(cfg, rng),
            Chan::new("c0"),
            crate::lang::Point::new(""),
        ));
    }
    let mut program = Command::from_stmts(stmts);
    assign_points(&mut program, &mut 0);
    program
}

/// Generates a straight-line program of exactly `n` assignments over
/// `num_vars` variables, for complexity measurements.
pub fn gen_straight_line(n: usize, num_vars: usize, rng: &mut Rng) -> Command {
    let cfg = GenConfig {
        num_vars,
        ..GenConfig::default()
    };
    let stmts: Vec<Command> = (0..n)
        .map(|_| {
            Command::Assign(
                gen_var(&cfg, rng),
                Expr::binary(
                    *rng.pick(&[BinOp::Add, BinOp::Sub, BinOp::Mul]),
                    Expr::Var(gen_var(&cfg, rng)),
                    Expr::Var(gen_var(&cfg, rng)),
                ),
            )
        })
        .collect();
    Command::from_stmts(stmts)
}

/// A random initial permission set over the program's variables and
/// channels, for generated directive policies.
pub fn gen_initial_policy(
    cfg: &GenConfig,
    rng: &mut Rng,
) -> crate::policy::PolicyState {
    let mut allowed = Vec::new();
    for chan in cfg.chan_names() {
        for var in cfg.var_names() {
            if rng.chance(50) {
                allowed.push((Chan::new(chan.clone()), Expr::var(var.clone())));
            }
        }
    }
    crate::policy::PolicyState::new(allowed)
}

fn assign_points(c: &mut Command, counter: &mut usize) {
    match c {
        Command::Out(_, _, p) => {
            *counter += 1;
            *p = crate::lang::Point::new(format!("p{counter}"));
        }
        Command::Seq(c1, c2) | Command::If(_, c1, c2) => {
            assign_points(c1, counter);
            assign_points(c2, counter);
        }
        Command::While(_, body) => assign_points(body, counter),
        _ => {}
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::{canonical_source, parse_program};
    use crate::policy::PolicyState;
    use crate::semantics::{run, Config};

    #[test]
    fn generation_is_deterministic() {
        let cfg = GenConfig::default();
        let a = gen_program(&cfg, &mut Rng::new(42));
        let b = gen_program(&cfg, &mut Rng::new(42));
        assert_eq!(a, b);
    }

    #[test]
    fn generated_programs_round_trip_through_the_parser() {
        let cfg = GenConfig::default();
        let mut rng = Rng::new(7);
        for _ in 0..200 {
            let c = gen_program(&cfg, &mut rng);
            let printed = canonical_source(&c);
            let reparsed = parse_program(&printed).unwrap_or_else(|e| {
                panic!("generated program failed to reparse: {e}\n{printed}")
            });
            assert_eq!(c, reparsed, "printed: {printed}");
        }
    }

    #[test]
    fn most_generated_programs_terminate() {
        let cfg = GenConfig {
            divergent_percent: 0,
            ..GenConfig::default()
        };
        let mut rng = Rng::new(3);
        for _ in 0..100 {
            let c = gen_program(&cfg, &mut rng);
            for store in cfg.universe().stores() {
                let r = run(
                    Config::new(c.clone(), store, PolicyState::default()).unwrap(),
                    5000,
                );
                assert!(!r.exhausted, "non-divergent program exhausted fuel: {c}");
            }
        }
    }

    #[test]
    fn straight_line_programs_have_requested_size() {
        let c = gen_straight_line(50, 4, &mut Rng::new(1));
        assert_eq!(c.size(), 50);
    }
}
