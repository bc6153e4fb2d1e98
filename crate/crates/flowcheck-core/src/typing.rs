//! Flow-sensitive dependency type inference.
//!
//! A typing is an environment `Γ` mapping typing variables — program
//! variables, channels, channel-point pairs and the distinguished `pc`
//! token — to sets of typing variables, read as conservative dependency
//! sets:
//!
//! * `Γ(x)` for a program variable: the inputs whose initial value can
//!   affect the final value of `x`;
//! * `Γ(a_p)`: the inputs that can affect the value of an observation
//!   produced by an output statement on channel `a` at point `p`;
//! * `Γ(a)`: the inputs that can affect *how many* outputs appear on `a`
//!   (the channel context bound, capturing latent flows);
//! * `pc` membership marks that the command can write the variable or
//!   produce the output at all, catching implicit flows.
//!
//! Inference produces a single principal typing per program; verdicts for
//! any concrete policy are derived from it without re-analysis.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;
use core::fmt;

use crate::lang::{Chan, Command, Point, Var};

/// A typing variable. The four namespaces are disjoint; `pc` is reserved
/// by the parser so it cannot collide with a program variable.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum TypingVar {
    /// The program-counter token.
    Pc,
    /// A program variable.
    Pv(Var),
    /// A channel context bound.
    Channel(Chan),
    /// A channel-point pair `a_p`.
    ChanPoint(Chan, Point),
}

impl TypingVar {
    pub fn pvar(name: impl Into<alloc::string::String>) -> Self {
        TypingVar::Pv(Var::new(name))
    }

    pub fn channel(name: impl Into<alloc::string::String>) -> Self {
        TypingVar::Channel(Chan::new(name))
    }

    pub fn chan_point(
        chan: impl Into<alloc::string::String>,
        point: impl Into<alloc::string::String>,
    ) -> Self {
        TypingVar::ChanPoint(Chan::new(chan), Point::new(point))
    }

    pub fn as_pvar(&self) -> Option<&Var> {
        match self {
            TypingVar::Pv(x) => Some(x),
            _ => None,
        }
    }
}

impl fmt::Display for TypingVar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TypingVar::Pc => write!(f, "pc"),
            TypingVar::Pv(x) => write!(f, "{x}"),
            TypingVar::Channel(a) => write!(f, "@{a}"),
            TypingVar::ChanPoint(a, p) => write!(f, "{a}@{p}"),
        }
    }
}

pub type DepSet = BTreeSet<TypingVar>;

/// A dependency environment `Γ`.
///
/// The representation is sparse: variables absent from the map implicitly
/// map to their identity singleton `{x}`, so the identity environment is
/// the empty map and environments stay small regardless of the universe.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct DepEnv {
    map: BTreeMap<TypingVar, DepSet>,
}

impl DepEnv {
    /// The identity environment `Γ_id` with `Γ_id(x) = {x}` for all `x`.
    pub fn identity() -> Self {
        DepEnv::default()
    }

    /// Builds an environment from explicit bindings; identity bindings are
    /// normalized away.
    pub fn from_bindings(bindings: impl IntoIterator<Item = (TypingVar, DepSet)>) -> Self {
        let mut env = DepEnv::default();
        for (var, deps) in bindings {
            env.set(var, deps);
        }
        env
    }

    /// The dependency set of `var`, defaulting to the identity singleton.
    pub fn deps(&self, var: &TypingVar) -> DepSet {
        match self.map.get(var) {
            Some(set) => set.clone(),
            None => BTreeSet::from([var.clone()]),
        }
    }

    pub fn contains(&self, var: &TypingVar, dep: &TypingVar) -> bool {
        match self.map.get(var) {
            Some(set) => set.contains(dep),
            None => var == dep,
        }
    }

    pub fn set(&mut self, var: TypingVar, deps: DepSet) {
        if deps.len() == 1 && deps.contains(&var) {
            self.map.remove(&var);
        } else {
            self.map.insert(var, deps);
        }
    }

    /// The explicitly bound (non-identity) variables.
    pub fn bound_vars(&self) -> impl Iterator<Item = &TypingVar> {
        self.map.keys()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&TypingVar, &DepSet)> {
        self.map.iter()
    }

    /// The channel-point variables the environment binds, i.e. the output
    /// points of the typed program.
    pub fn point_vars(&self) -> Vec<(Chan, Point)> {
        self.map
            .keys()
            .filter_map(|v| match v {
                TypingVar::ChanPoint(a, p) => Some((a.clone(), p.clone())),
                _ => None,
            })
            .collect()
    }

    /// The channel context bounds the environment binds.
    pub fn channel_vars(&self) -> Vec<Chan> {
        self.map
            .keys()
            .filter_map(|v| match v {
                TypingVar::Channel(a) => Some(a.clone()),
                _ => None,
            })
            .collect()
    }

    /// Sequential composition `self ; earlier`:
    /// `(Γ2;Γ1)(x) = ⋃_{y ∈ Γ2(x)} Γ1(y)`, substituting the dependency
    /// relations already established in `earlier`.
    pub fn compose(&self, earlier: &DepEnv) -> DepEnv {
        let mut out = DepEnv::default();
        let keys: BTreeSet<&TypingVar> = self.map.keys().chain(earlier.map.keys()).collect();
        for key in keys {
            let deps = match self.map.get(key) {
                None => earlier.deps(key),
                Some(mids) => {
                    let mut acc = DepSet::new();
                    for mid in mids {
                        match earlier.map.get(mid) {
                            Some(set) => acc.extend(set.iter().cloned()),
                            None => {
                                acc.insert(mid.clone());
                            }
                        }
                    }
                    acc
                }
            };
            out.set(key.clone(), deps);
        }
        out
    }

    /// Pointwise union `(Γ1 ∪ Γ2)(x) = Γ1(x) ∪ Γ2(x)`.
    pub fn union_with(&self, other: &DepEnv) -> DepEnv {
        let mut out = DepEnv::default();
        let keys: BTreeSet<&TypingVar> = self.map.keys().chain(other.map.keys()).collect();
        for key in keys {
            let mut deps = self.deps(key);
            deps.extend(other.deps(key));
            out.set(key.clone(), deps);
        }
        out
    }

    /// The fixpoint `Γ* = ⋃_{n ≥ 0} Γⁿ` with `Γ⁰ = Γ_id` and
    /// `Γ^{n+1} = Γⁿ ; Γ`.
    ///
    /// The accumulated union is monotone over a finite powerset lattice, so
    /// iteration stops at the first step that adds nothing; every later
    /// power is already contained in the accumulator at that point.
    pub fn fixpoint(&self) -> DepEnv {
        let mut acc = DepEnv::identity();
        let mut power = DepEnv::identity();
        loop {
            power = power.compose(self);
            let next = acc.union_with(&power);
            if next == acc {
                return acc;
            }
            acc = next;
        }
    }

    /// Restricts every dependency set to its program-variable members, for
    /// reporting and for building store equivalence relations. The result
    /// maps each requested key; keys the environment binds implicitly are
    /// reported with their identity set filtered the same way.
    pub fn restrict_to_pvars(
        &self,
        keys: impl IntoIterator<Item = TypingVar>,
    ) -> BTreeMap<TypingVar, BTreeSet<Var>> {
        keys.into_iter()
            .map(|key| {
                let deps = self.pvar_deps(&key);
                (key, deps)
            })
            .collect()
    }

    /// `Γ(x) ∩ PVar`.
    pub fn pvar_deps(&self, key: &TypingVar) -> BTreeSet<Var> {
        self.deps(key)
            .into_iter()
            .filter_map(|v| match v {
                TypingVar::Pv(x) => Some(x),
                _ => None,
            })
            .collect()
    }
}

fn fv_typing(e: &crate::lang::Expr) -> DepSet {
    e.fv().into_iter().map(TypingVar::Pv).collect()
}

/// Infers the principal typing of a command.
///
/// Policy directives type as `skip`: they are semantically silent, so
/// typing them any other way would introduce a dependency channel the
/// semantics does not have.
pub fn infer(c: &Command) -> DepEnv {
    match c {
        Command::Skip | Command::Directive(_, _, _) => DepEnv::identity(),
        Command::Assign(x, e) => {
            let mut deps = fv_typing(e);
            deps.insert(TypingVar::Pc);
            DepEnv::from_bindings([(TypingVar::Pv(x.clone()), deps)])
        }
        Command::Seq(c1, c2) => infer(c2).compose(&infer(c1)),
        Command::If(e, c1, c2) => {
            let guard = pc_guard(e);
            let g1 = infer(c1).compose(&guard);
            let g2 = infer(c2).compose(&guard);
            let mut out = g1.union_with(&g2);
            out.set(TypingVar::Pc, BTreeSet::from([TypingVar::Pc]));
            out
        }
        Command::While(e, body) => {
            let guard = pc_guard(e);
            let mut out = infer(body).compose(&guard).fixpoint();
            out.set(TypingVar::Pc, BTreeSet::from([TypingVar::Pc]));
            out
        }
        Command::Out(e, a, p) => {
            let point = TypingVar::ChanPoint(a.clone(), p.clone());
            let chan = TypingVar::Channel(a.clone());
            let mut point_deps = fv_typing(e);
            point_deps.insert(TypingVar::Pc);
            point_deps.insert(chan.clone());
            point_deps.insert(point.clone());
            let chan_deps = BTreeSet::from([TypingVar::Pc, chan.clone()]);
            DepEnv::from_bindings([(point, point_deps), (chan, chan_deps)])
        }
    }
}

/// `Γ_id[pc ↦ {pc} ∪ fv(e)]`, the branch-guard environment.
fn pc_guard(e: &crate::lang::Expr) -> DepEnv {
    let mut deps = fv_typing(e);
    deps.insert(TypingVar::Pc);
    DepEnv::from_bindings([(TypingVar::Pc, deps)])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::parse_program;

    fn pv(name: &str) -> TypingVar {
        TypingVar::pvar(name)
    }

    fn set(vars: &[TypingVar]) -> DepSet {
        vars.iter().cloned().collect()
    }

    fn pvars(names: &[&str]) -> BTreeSet<Var> {
        names.iter().map(|n| Var::new(*n)).collect()
    }

    #[test]
    fn identity_defaults_to_singletons() {
        let id = DepEnv::identity();
        assert_eq!(id.deps(&pv("x")), set(&[pv("x")]));
        assert_eq!(id.deps(&TypingVar::Pc), set(&[TypingVar::Pc]));
        assert_eq!(
            id.deps(&TypingVar::chan_point("a", "p")),
            set(&[TypingVar::chan_point("a", "p")])
        );
    }

    #[test]
    fn compose_identity_laws() {
        let g = DepEnv::from_bindings([
            (pv("z"), set(&[pv("x"), TypingVar::Pc])),
            (pv("x"), set(&[pv("y")])),
        ]);
        assert_eq!(DepEnv::identity().compose(&g), g);
        assert_eq!(g.compose(&DepEnv::identity()), g);
    }

    #[test]
    fn compose_substitutes_established_dependencies() {
        // g2 = {z ↦ {x, pc}}, g1 = {x ↦ {z, pc}} ⇒ (g2;g1)(z) = {z, pc}
        let g2 = DepEnv::from_bindings([(pv("z"), set(&[pv("x"), TypingVar::Pc]))]);
        let g1 = DepEnv::from_bindings([(pv("x"), set(&[pv("z"), TypingVar::Pc]))]);
        let composed = g2.compose(&g1);
        assert_eq!(composed.deps(&pv("z")), set(&[pv("z"), TypingVar::Pc]));
    }

    #[test]
    fn union_is_idempotent_and_pointwise() {
        let g = DepEnv::from_bindings([(pv("y"), set(&[TypingVar::Pc, pv("z")]))]);
        assert_eq!(g.union_with(&g), g);
        let h = DepEnv::from_bindings([(pv("y"), set(&[pv("y")]))]);
        assert_eq!(
            g.union_with(&h).deps(&pv("y")),
            set(&[pv("y"), pv("z"), TypingVar::Pc])
        );
        // union with identity only adds the identity singleton
        assert!(DepEnv::identity().union_with(&g).deps(&pv("y")).contains(&pv("y")));
    }

    #[test]
    fn fixpoint_of_identity_is_identity() {
        assert_eq!(DepEnv::identity().fixpoint(), DepEnv::identity());
    }

    #[test]
    fn fixpoint_of_swap_closes_the_cycle() {
        let g = DepEnv::from_bindings([
            (pv("x"), set(&[pv("y")])),
            (pv("y"), set(&[pv("x")])),
        ]);
        let star = g.fixpoint();
        assert_eq!(star.deps(&pv("x")), set(&[pv("x"), pv("y")]));
        assert_eq!(star.deps(&pv("y")), set(&[pv("x"), pv("y")]));
    }

    #[test]
    fn fixpoint_is_closed_under_composition() {
        let envs = [
            DepEnv::from_bindings([(pv("x"), set(&[pv("y")])), (pv("y"), set(&[pv("x")]))]),
            DepEnv::from_bindings([
                (pv("x"), set(&[pv("x"), pv("y")])),
                (pv("y"), set(&[pv("z"), TypingVar::Pc])),
                (pv("z"), set(&[TypingVar::Pc])),
            ]),
        ];
        for g in &envs {
            let star = g.fixpoint();
            let again = star.compose(g);
            // (Γ*;Γ)(x) ⊆ Γ*(x) pointwise
            for key in again.bound_vars().chain(star.bound_vars()) {
                assert!(
                    again.deps(key).is_subset(&star.deps(key)),
                    "fixpoint not closed at {key}"
                );
            }
        }
    }

    #[test]
    fn infer_fig3_matches_published_typing() {
        let c = parse_program("x := z + 1; z := x; if (z > 0) { y := 1 }; x := 0").unwrap();
        let g = infer(&c);
        assert_eq!(g.pvar_deps(&pv("x")), pvars(&[]));
        assert_eq!(g.pvar_deps(&pv("y")), pvars(&["y", "z"]));
        assert_eq!(g.pvar_deps(&pv("z")), pvars(&["z"]));
    }

    #[test]
    fn infer_single_output_rule() {
        let c = parse_program("out x + y on a @ p").unwrap();
        let g = infer(&c);
        let a_p = TypingVar::chan_point("a", "p");
        let a = TypingVar::channel("a");
        assert_eq!(
            g.deps(&a_p),
            set(&[pv("x"), pv("y"), TypingVar::Pc, a.clone(), a_p.clone()])
        );
        assert_eq!(g.deps(&a), set(&[TypingVar::Pc, a]));
    }

    #[test]
    fn infer_intro_program_a() {
        let src = "allow x -> a; allow y -> a; out x on a @ p1; \
                   if (y > 0) { out 1 on a @ p2; revoke x -> a }; \
                   out 2 on a @ p3; out 3 on a @ p4";
        let g = infer(&parse_program(src).unwrap());
        assert_eq!(g.pvar_deps(&TypingVar::chan_point("a", "p1")), pvars(&["x"]));
        assert_eq!(g.pvar_deps(&TypingVar::chan_point("a", "p2")), pvars(&["y"]));
        assert_eq!(g.pvar_deps(&TypingVar::chan_point("a", "p3")), pvars(&["y"]));
        assert_eq!(g.pvar_deps(&TypingVar::chan_point("a", "p4")), pvars(&["y"]));
    }

    #[test]
    fn infer_intro_program_b_has_latent_flow() {
        let src = "allow x -> a; out x on a @ p1; \
                   if (x > 0) { out 1 on a @ p2; revoke x -> a }; \
                   out 2 on a @ p3; out 3 on a @ p4";
        let g = infer(&parse_program(src).unwrap());
        // the conditional output before p3 leaks x through the channel
        // context bound even though `out 2` has no data dependency on x
        assert_eq!(g.pvar_deps(&TypingVar::chan_point("a", "p3")), pvars(&["x"]));
        assert_eq!(g.pvar_deps(&TypingVar::channel("a")), pvars(&["x"]));
    }

    #[test]
    fn directives_type_as_skip() {
        let with = parse_program("allow x -> a; y := x").unwrap();
        let without = parse_program("skip; y := x").unwrap();
        assert_eq!(infer(&with), infer(&without));
    }

    #[test]
    fn shared_points_merge_dependency_sets() {
        let c = parse_program("out x on a @ p; out y on a @ p").unwrap();
        let g = infer(&c);
        let deps = g.pvar_deps(&TypingVar::chan_point("a", "p"));
        assert_eq!(deps, pvars(&["x", "y"]));
    }

    #[test]
    fn pc_maps_to_pc_on_inferred_typings() {
        let sources = [
            "skip",
            "x := y + 1",
            "out x on a",
            "if (x) { y := 1 } else { out 2 on a }",
            "while (x > 0) { x := x - 1; out x on a }",
            "allow x -> a; if (x) { while (y) { out 1 on b } }",
        ];
        for src in sources {
            let g = infer(&parse_program(src).unwrap());
            assert_eq!(g.deps(&TypingVar::Pc), set(&[TypingVar::Pc]), "on `{src}`");
        }
    }

    #[test]
    fn no_pc_implies_identity_on_inferred_typings() {
        let sources = [
            "x := y + 1",
            "if (x) { y := 1 } else { out 2 on a }",
            "while (x > 0) { x := x - 1; out x on a }",
        ];
        for src in sources {
            let c = parse_program(src).unwrap();
            let g = infer(&c);
            let mut keys: Vec<TypingVar> = g.bound_vars().cloned().collect();
            keys.extend(c.variables().into_iter().map(TypingVar::Pv));
            for key in keys {
                if !g.contains(&key, &TypingVar::Pc) {
                    assert_eq!(g.deps(&key), set(core::slice::from_ref(&key)), "at {key} on `{src}`");
                }
            }
        }
    }

    #[test]
    fn points_and_channels_are_cumulative() {
        let sources = [
            "out x on a @ p",
            "out x on a @ p; y := x; out y on a @ q",
            "while (x) { out 1 on a @ p; x := 0 }",
        ];
        for src in sources {
            let g = infer(&parse_program(src).unwrap());
            for (a, p) in g.point_vars() {
                let key = TypingVar::ChanPoint(a, p);
                assert!(g.contains(&key, &key), "a_p ∈ Γ(a_p) on `{src}`");
            }
            for a in g.channel_vars() {
                let key = TypingVar::Channel(a);
                assert!(g.contains(&key, &key), "a ∈ Γ(a) on `{src}`");
            }
        }
    }

    #[test]
    fn while_unfold_is_pointwise_smaller() {
        let sources = [
            ("while (x) { out 1 on a @ p }", "if (x) { out 1 on a @ p; while (x) { out 1 on a @ p } }"),
            ("while (x > 0) { x := x - y }", "if (x > 0) { x := x - y; while (x > 0) { x := x - y } }"),
        ];
        for (w, unfolded) in sources {
            let gw = infer(&parse_program(w).unwrap());
            let gu = infer(&parse_program(unfolded).unwrap());
            let keys: BTreeSet<TypingVar> = gw
                .bound_vars()
                .chain(gu.bound_vars())
                .cloned()
                .collect();
            for key in keys {
                assert!(
                    gu.deps(&key).is_subset(&gw.deps(&key)),
                    "unfold grew at {key} for `{w}`"
                );
            }
        }
    }

    #[test]
    fn restrict_to_pvars_filters_members() {
        let g = DepEnv::from_bindings([(pv("x"), set(&[TypingVar::Pc]))]);
        let view = g.restrict_to_pvars([pv("x")]);
        assert_eq!(view[&pv("x")], pvars(&[]));

        let h = DepEnv::from_bindings([(
            TypingVar::chan_point("a", "p"),
            set(&[
                pv("x"),
                TypingVar::Pc,
                TypingVar::channel("a"),
                TypingVar::chan_point("a", "p"),
            ]),
        )]);
        let view = h.restrict_to_pvars([TypingVar::chan_point("a", "p")]);
        assert_eq!(view[&TypingVar::chan_point("a", "p")], pvars(&["x"]));

        // identity entries are unchanged on PVar keys
        let id = DepEnv::identity();
        let view = id.restrict_to_pvars([pv("x"), pv("y")]);
        assert_eq!(view[&pv("x")], pvars(&["x"]));
        assert_eq!(view[&pv("y")], pvars(&["y"]));
    }
}

#[cfg(test)]
mod prop_tests {
    use super::*;
    use proptest::prelude::*;

    fn small_var() -> impl Strategy<Value = TypingVar> {
        prop_oneof![
            Just(TypingVar::pvar("x")),
            Just(TypingVar::pvar("y")),
            Just(TypingVar::pvar("z")),
            Just(TypingVar::Pc),
        ]
    }

    fn small_env() -> impl Strategy<Value = DepEnv> {
        proptest::collection::btree_map(
            small_var(),
            proptest::collection::btree_set(small_var(), 0..4),
            0..4,
        )
        .prop_map(DepEnv::from_bindings)
    }

    proptest! {
        #[test]
        fn compose_is_associative(g3 in small_env(), g2 in small_env(), g1 in small_env()) {
            let left = g3.compose(&g2).compose(&g1);
            let right = g3.compose(&g2.compose(&g1));
            prop_assert_eq!(left, right);
        }

        #[test]
        fn compose_identity(g in small_env()) {
            prop_assert_eq!(DepEnv::identity().compose(&g), g.clone());
            prop_assert_eq!(g.compose(&DepEnv::identity()), g);
        }

        #[test]
        fn union_laws(g1 in small_env(), g2 in small_env()) {
            prop_assert_eq!(g1.union_with(&g2), g2.union_with(&g1));
            prop_assert_eq!(g1.union_with(&g1), g1);
        }

        #[test]
        fn fixpoint_closure(g in small_env()) {
            let star = g.fixpoint();
            let composed = star.compose(&g);
            let keys: alloc::collections::BTreeSet<TypingVar> =
                composed.bound_vars().chain(star.bound_vars()).cloned().collect();
            for key in keys {
                prop_assert!(composed.deps(&key).is_subset(&star.deps(&key)));
            }
        }
    }
}
