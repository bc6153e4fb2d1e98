//! Cross-module invariants checked over generated programs: typing-shape
//! lemmas, knowledge-set lemmas, and the bridge between static verdicts
//! and the semantic oracles.

use std::collections::BTreeSet;

use flowcheck_core::checker::{check_compliance, CheckMode, Compliance};
use flowcheck_core::gen::{
    gen_initial_policy, gen_program, gen_quasi_constant, GenConfig, Rng,
};
use flowcheck_core::lang::{canonical_source, parse_program, Chan, Command};
use flowcheck_core::oracle::{
    enumerate_attackers, knowledge, pi_check, two_run_pi_check, typing_soundness_check,
    CountingLift, TraceTable,
};
use flowcheck_core::policy::{approximate_policy, validate_approximation, DynamicPolicySpec};
use flowcheck_core::typing::{infer, DepEnv, TypingVar};

const FUEL: usize = 500;

fn corpus(seed: u64, count: usize, cfg: &GenConfig) -> Vec<Command> {
    let mut rng = Rng::new(seed);
    (0..count).map(|_| gen_program(cfg, &mut rng)).collect()
}

#[test]
fn inferred_typings_keep_pc_fixed() {
    let cfg = GenConfig::default();
    for c in corpus(11, 150, &cfg) {
        let g = infer(&c);
        assert_eq!(
            g.deps(&TypingVar::Pc),
            BTreeSet::from([TypingVar::Pc]),
            "Γ(pc) ≠ {{pc}} on {c}"
        );
    }
}

#[test]
fn no_pc_dependency_means_identity() {
    let cfg = GenConfig::default();
    for c in corpus(12, 150, &cfg) {
        let g = infer(&c);
        let mut keys: Vec<TypingVar> = g.bound_vars().cloned().collect();
        keys.extend(c.variables().into_iter().map(TypingVar::Pv));
        for key in keys {
            if !g.contains(&key, &TypingVar::Pc) {
                assert_eq!(
                    g.deps(&key),
                    BTreeSet::from([key.clone()]),
                    "Γ({key}) should be identity on {c}"
                );
            }
        }
    }
}

#[test]
fn sequential_composition_only_grows_point_and_channel_deps() {
    let cfg = GenConfig::default();
    let mut rng = Rng::new(13);
    for _ in 0..150 {
        let c1 = gen_program(&cfg, &mut rng);
        let c2 = gen_program(&cfg, &mut rng);
        let g1 = infer(&c1);
        let g = infer(&Command::seq(c1.clone(), c2.clone()));
        for (chan, point) in g1.point_vars() {
            let key = TypingVar::ChanPoint(chan, point);
            assert!(
                g1.deps(&key).is_subset(&g.deps(&key)),
                "point deps shrank at {key} for {c1} ; {c2}"
            );
        }
        for chan in g1.channel_vars() {
            let key = TypingVar::Channel(chan);
            assert!(
                g1.deps(&key).is_subset(&g.deps(&key)),
                "channel deps shrank at {key} for {c1} ; {c2}"
            );
        }
    }
}

#[test]
fn points_and_channels_depend_on_themselves() {
    let cfg = GenConfig::default();
    for c in corpus(14, 150, &cfg) {
        let g = infer(&c);
        for (chan, point) in g.point_vars() {
            let key = TypingVar::ChanPoint(chan, point);
            assert!(g.contains(&key, &key));
        }
        for chan in g.channel_vars() {
            let key = TypingVar::Channel(chan);
            assert!(g.contains(&key, &key));
        }
    }
}

#[test]
fn generated_programs_print_and_reparse() {
    let cfg = GenConfig::default();
    for c in corpus(15, 150, &cfg) {
        let printed = canonical_source(&c);
        assert_eq!(parse_program(&printed).unwrap(), c, "printed: {printed}");
    }
}

#[test]
fn policy_approximations_are_sound_on_generated_programs() {
    let cfg = GenConfig::default();
    let mut rng = Rng::new(16);
    for _ in 0..60 {
        let c = gen_program(&cfg, &mut rng);
        let spec = DynamicPolicySpec::new(gen_initial_policy(&cfg, &mut rng));
        let approx = approximate_policy(&c, &spec);
        let universe = cfg.universe();
        assert_eq!(
            validate_approximation(&c, &spec, &approx, &universe, FUEL),
            Ok(()),
            "unsound approximation for {c}"
        );
    }
}

#[test]
fn inferred_typings_are_sound_on_a_sample() {
    let cfg = GenConfig::default();
    for c in corpus(17, 60, &cfg) {
        let v = typing_soundness_check(&c, &infer(&c), &cfg.universe(), FUEL);
        assert!(!v.is_insecure(), "typing unsound on {c}: {v:?}");
    }
}

#[test]
fn compliant_programs_are_two_run_secure_on_a_sample() {
    let cfg = GenConfig::default();
    let mut rng = Rng::new(18);
    let universe = cfg.universe();
    let mut compliant_seen = 0;
    for _ in 0..80 {
        let c = gen_program(&cfg, &mut rng);
        let spec = DynamicPolicySpec::new(gen_initial_policy(&cfg, &mut rng));
        let approx = approximate_policy(&c, &spec);
        let typing = infer(&c);
        let report =
            check_compliance(&typing, &approx, &CheckMode::Exact(universe.clone())).unwrap();
        if report.overall != Compliance::Compliant {
            continue;
        }
        compliant_seen += 1;
        for chan in c.channels() {
            let v = two_run_pi_check(&c, &spec, &chan, &universe, FUEL);
            assert!(
                !v.is_insecure(),
                "compliant but two-run insecure on {chan}: {c}\n{:?}",
                v.counterexample()
            );
        }
    }
    assert!(compliant_seen > 5, "sample too small: {compliant_seen}");
}

#[test]
fn counting_lift_knowledge_is_stronger_on_generated_queries() {
    let cfg = GenConfig {
        simple_outputs: true,
        ..GenConfig::default()
    };
    let mut rng = Rng::new(19);
    let family = enumerate_attackers(2, &[0, 1, 2]);
    let universe = cfg.universe();
    for _ in 0..25 {
        let c = gen_program(&cfg, &mut rng);
        for chan in c.channels() {
            let spec = DynamicPolicySpec::default();
            let table = TraceTable::build(&c, &spec, &chan, &universe, FUEL);
            for attacker in family.iter().take(10) {
                for idx in 0..table.len().min(2) {
                    let trace = table.run(idx).trace.clone();
                    let base = knowledge(attacker, &c, &spec, &chan, &trace, &universe, FUEL);
                    let lifted = knowledge(
                        &CountingLift(attacker),
                        &c,
                        &spec,
                        &chan,
                        &trace,
                        &universe,
                        FUEL,
                    );
                    assert!(
                        lifted.members.is_subset(&base.members),
                        "k(A^ω) ⊄ k(A) on {c}"
                    );
                }
            }
        }
    }
}

#[test]
fn quasi_constant_programs_are_pi_secure_for_enumerated_attackers() {
    let cfg = GenConfig::default();
    let mut rng = Rng::new(20);
    let family = enumerate_attackers(2, &[0, 1, 2]);
    let universe = cfg.universe();
    let chan = Chan::new("c0");
    for _ in 0..15 {
        let c = gen_quasi_constant(&cfg, &mut rng);
        let spec = DynamicPolicySpec::default();
        for attacker in &family {
            for sigma in universe.stores() {
                let v = pi_check(&c, &spec, attacker, &chan, &sigma, &universe, FUEL);
                assert!(
                    !v.is_insecure(),
                    "quasi-constant program PI-insecure on {c}: {:?}",
                    v.counterexample()
                );
            }
        }
    }
}

#[test]
fn typing_report_is_reproducible() {
    let cfg = GenConfig::default();
    for c in corpus(21, 40, &cfg) {
        let g1 = infer(&c);
        let g2 = infer(&parse_program(&canonical_source(&c)).unwrap());
        assert_eq!(g1, g2);
    }
}

#[test]
fn bogus_typing_restriction_check() {
    // restrict_to_pvars only filters, never adds
    let cfg = GenConfig::default();
    for c in corpus(22, 40, &cfg) {
        let g = infer(&c);
        let keys: Vec<TypingVar> = g.bound_vars().cloned().collect();
        let view = g.restrict_to_pvars(keys.clone());
        for key in keys {
            let full = g.deps(&key);
            for v in &view[&key] {
                assert!(full.contains(&TypingVar::Pv(v.clone())));
            }
        }
    }
}

#[test]
fn identity_env_round_trips_through_compose_on_programs() {
    let cfg = GenConfig::default();
    for c in corpus(23, 60, &cfg) {
        let g = infer(&c);
        assert_eq!(DepEnv::identity().compose(&g), g);
        assert_eq!(g.compose(&DepEnv::identity()), g);
    }
}
