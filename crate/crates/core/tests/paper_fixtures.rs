//! End-to-end checks of the automata algebra, conversion and abstraction
//! against hand-encoded fixtures of the coin-game example.

mod common;

use common::*;
use num_rational::BigRational;
use num_traits::{One, Zero};
use sarp_core::automata::{
    complement, enumerate_by_weight, is_valid_pcfa, language_equal, min_intersect,
    shortest_excluded_trace, union,
};
use sarp_core::mdp::{apply_policy, mc_accepting_mass, structural_bound, underlying_mdp};
use sarp_core::pcfa::{
    eval_trace, path_condition, path_condition_set, program_to_pcfa, trace_weight, GeneralPcfa,
    Trace,
};
use sarp_core::logic::{SatResult, Solver, SolverConfig};
use sarp_core::stmt::Valuation;
use sarp_core::syntax::parse_bexpr;

fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(n.into(), d.into())
}

#[test]
fn conversion_matches_the_handbuilt_automaton() {
    let converted = program_to_pcfa(&limit_program());
    let expected = limit_pcfa_handbuilt();
    assert_eq!(converted.alphabet, expected.alphabet, "alphabet is exact");
    assert!(language_equal(
        &converted.to_general(),
        &expected.to_general()
    ));
}

#[test]
fn conversion_of_skip_has_two_locations_and_one_edge() {
    let a = program_to_pcfa(&sarp_core::syntax::parse_program("skip").unwrap());
    assert_eq!(a.num_locs, 2);
    assert_eq!(a.delta.len(), 1);
    assert!(a.accepts(&trace(&["skip"])));
}

#[test]
fn prob_choice_allocates_one_fresh_tag_with_shared_exit() {
    let a = program_to_pcfa(&sarp_core::syntax::parse_program("{ c := 0 } <+> { skip }").unwrap());
    assert!(a.alphabet.contains(&stmt("pL0")));
    assert!(a.alphabet.contains(&stmt("pR0")));
    assert!(a.accepts(&trace(&["pL0", "c:=0"])));
    assert!(a.accepts(&trace(&["pR0", "skip"])));
}

#[test]
fn evaluation_of_the_safe_trace_pins_both_variables() {
    let got = eval_trace(&safe_trace(), &Valuation::from_pairs(&[("c", 7), ("x", 5)]));
    assert_eq!(got, Valuation::from_pairs(&[("c", 0), ("x", 0)]));
}

#[test]
fn evaluation_of_the_infeasible_trace_is_bottom() {
    let got = eval_trace(
        &infeasible_trace(),
        &Valuation::from_pairs(&[("c", 3), ("x", 1)]),
    );
    assert!(got.is_bottom());
}

#[test]
fn trace_weights_count_probabilistic_statements_only() {
    assert_eq!(trace_weight(&trace(&["skip", "x:=0"])), rat(1, 1));
    for t in two_iteration_violating_traces() {
        assert_eq!(trace_weight(&t), rat(1, 8));
    }
    let mixed = Trace::new(vec![
        sarp_core::stmt::Statement::ProbLeft(0),
        sarp_core::stmt::Statement::Nondet(2),
        sarp_core::stmt::Statement::ProbRight(1),
    ]);
    assert_eq!(trace_weight(&mixed), rat(1, 4));
}

#[test]
fn joint_path_condition_of_the_two_iteration_traces_is_c_equals_2() {
    let mut solver = Solver::new(SolverConfig::Builtin);
    let pre = parse_bexpr("True").unwrap();
    let post = parse_bexpr("x = 0").unwrap();
    let joint = path_condition_set(&two_iteration_violating_traces(), &pre, &post);
    match solver.check_sat(&joint).unwrap() {
        SatResult::Sat(model) => assert_eq!(model["c"], 2.into()),
        SatResult::Unsat => panic!("joint condition should be satisfiable"),
    }
    // logically equivalent to c = 2
    let c2 = parse_bexpr("c = 2").unwrap();
    assert!(solver.equivalent(&joint, &c2).unwrap());
}

#[test]
fn path_condition_of_safe_and_infeasible_traces_is_unsat() {
    let mut solver = Solver::new(SolverConfig::Builtin);
    let pre = parse_bexpr("True").unwrap();
    let post = parse_bexpr("x = 0").unwrap();
    for t in [safe_trace(), infeasible_trace()] {
        let pc = path_condition(&t, &pre, &post);
        assert!(solver.is_unsat(&pc).unwrap(), "{t}");
        // cross-check on a small grid: no valuation satisfies it
        for c in -3..=3 {
            for x in -3..=3 {
                let v = Valuation::from_pairs(&[("c", c), ("x", x)]);
                assert!(!sarp_core::stmt::eval_bexpr(&pc, &v));
            }
        }
    }
}

#[test]
fn intersection_with_the_universal_automaton_is_identity() {
    let a = limit_pcfa_handbuilt();
    let v = GeneralPcfa::universal(a.alphabet.clone());
    let r = min_intersect(&a, &v);
    assert!(language_equal(&r.to_general(), &a.to_general()));
    assert!(is_valid_pcfa(&r.to_general()));
}

#[test]
fn intersection_with_the_empty_automaton_is_empty() {
    let a = limit_pcfa_handbuilt();
    let v = GeneralPcfa::empty(a.alphabet.clone());
    let r = min_intersect(&a, &v);
    assert!(r.language_is_empty());
}

#[test]
fn refinement_by_the_generalised_automata_matches_the_pictured_result() {
    let a = limit_pcfa_handbuilt();
    let v = complement(&union(&q1_handbuilt(), &q2_handbuilt()));
    let refined = min_intersect(&a, &v);
    assert!(is_valid_pcfa(&refined.to_general()));
    assert!(language_equal(
        &refined.to_general(),
        &refined_limit_handbuilt().to_general()
    ));
}

#[test]
fn refined_structural_bound_drops_from_one_to_half() {
    let a = limit_pcfa_handbuilt();
    assert_eq!(structural_bound(&a).0, BigRational::one());
    let v = complement(&union(&q1_handbuilt(), &q2_handbuilt()));
    let refined = min_intersect(&a, &v);
    assert_eq!(structural_bound(&refined).0, rat(1, 2));
}

#[test]
fn generalised_automata_accept_their_source_traces() {
    assert!(q1_handbuilt().accepts(&safe_trace()));
    assert!(q2_handbuilt().accepts(&infeasible_trace()));
    // and reject the violating traces
    for t in two_iteration_violating_traces() {
        assert!(!q1_handbuilt().accepts(&t));
        assert!(!q2_handbuilt().accepts(&t));
    }
}

#[test]
fn complement_is_an_involution_on_the_generalised_automata() {
    for g in [q1_handbuilt(), q2_handbuilt()] {
        let cc = complement(&complement(&g));
        assert!(language_equal(&cc, &g));
    }
}

#[test]
fn complement_of_union_rejects_members_and_accepts_violating_traces() {
    let v = complement(&union(&q1_handbuilt(), &q2_handbuilt()));
    assert!(!v.accepts(&safe_trace()));
    assert!(!v.accepts(&infeasible_trace()));
    for t in two_iteration_violating_traces() {
        assert!(v.accepts(&t));
    }
}

#[test]
fn union_with_empty_is_identity_and_with_complement_is_universal() {
    let g = q1_handbuilt();
    let empty = GeneralPcfa::empty(g.alphabet.clone());
    assert!(language_equal(&union(&g, &empty), &g));
    let uni = GeneralPcfa::universal(g.alphabet.clone());
    assert!(language_equal(&union(&g, &complement(&g)), &uni));
    assert!(language_equal(&complement(&uni), &empty));
}

#[test]
fn pcfa_shape_check_accepts_the_program_and_rejects_the_generalisations() {
    assert!(is_valid_pcfa(&limit_pcfa_handbuilt().to_general()));
    assert!(!is_valid_pcfa(&q1_handbuilt())); // accepting location has out-edges
    let mut two_accepts = q1_handbuilt();
    two_accepts.ends.insert(0);
    assert!(!is_valid_pcfa(&two_accepts));
}

#[test]
fn exit_policy_candidate_is_the_pictured_run_chain() {
    let a = limit_pcfa_handbuilt();
    let m = underlying_mdp(&a);
    // choose the failed-guard exit at the loop head, everything else is
    // forced; that is the unique reason policy of the unrefined automaton
    let mut policy = sarp_core::mdp::SimplePolicy {
        choice: Default::default(),
    };
    for node in 0..a.num_locs {
        let actions: Vec<_> = m.enabled(node).map(|(act, _)| act.clone()).collect();
        let pick = actions
            .iter()
            .find(|act| {
                matches!(act, sarp_core::mdp::Action::Stmt(s) if *s == stmt("assume !(c > 0)"))
            })
            .or_else(|| actions.first());
        if let Some(act) = pick {
            policy.choice.insert(node, act.clone());
        }
    }
    let cand = apply_policy(&a, &policy);
    assert!(language_equal(
        &cand.to_general(),
        &run_chain_handbuilt().to_general()
    ));
}

#[test]
fn run_chain_enumerates_two_traces_of_weight_half_in_lexicographic_order() {
    let chain = run_chain_handbuilt();
    let got: Vec<(Trace, BigRational)> = enumerate_by_weight(&chain, None).collect();
    assert_eq!(got.len(), 2);
    assert!(got.iter().all(|(_, w)| *w == rat(1, 2)));
    // fixed statement order: probL(0) sorts before probR(0)
    assert_eq!(got[0].0, safe_trace().with_first(stmt("x:=0")));
    assert_eq!(
        got[0].0,
        trace(&["x:=0", "pL0", "c:=0", "assume !(c > 0)"])
    );
    assert_eq!(got[1].0, trace(&["x:=0", "pR0", "skip", "assume !(c > 0)"]));
    assert_eq!(mc_accepting_mass(&chain), BigRational::one());
}

#[test]
fn excluding_the_automaton_itself_yields_an_empty_stream() {
    let chain = run_chain_handbuilt();
    let all = chain.to_general();
    assert_eq!(enumerate_by_weight(&chain, Some(&all)).count(), 0);
}

#[test]
fn refined_exit_candidate_weights_match_breadth_first_enumeration() {
    // apply the exit policy that exits as soon as the guard branch exists
    let refined = {
        let a = limit_pcfa_handbuilt();
        let v = complement(&union(&q1_handbuilt(), &q2_handbuilt()));
        min_intersect(&a, &v)
    };
    let m = underlying_mdp(&refined);
    let mut policy = sarp_core::mdp::SimplePolicy {
        choice: Default::default(),
    };
    for node in 0..refined.num_locs {
        let actions: Vec<_> = m.enabled(node).map(|(act, _)| act.clone()).collect();
        let pick = actions
            .iter()
            .find(|act| {
                matches!(act, sarp_core::mdp::Action::Stmt(s) if *s == stmt("assume !(c > 0)"))
            })
            .or_else(|| actions.first());
        if let Some(act) = pick {
            policy.choice.insert(node, act.clone());
        }
    }
    let cand = apply_policy(&refined, &policy);
    let stream: Vec<(Trace, BigRational)> = enumerate_by_weight(&cand, None).take(10).collect();
    // first trace: both coins once (weight 1/4), one loop iteration
    assert_eq!(stream[0].1, rat(1, 4));
    assert_eq!(stream[0].0.len(), 8);
    // weights are non-increasing and match brute-force breadth-first search
    let mut brute: Vec<(usize, Trace)> = Vec::new();
    let mut frontier = vec![(cand.init, Vec::new())];
    for _ in 0..46 {
        let mut next = Vec::new();
        for (loc, word) in frontier {
            if loc == cand.end && !word.is_empty() {
                brute.push((word.len(), Trace::new(word.clone())));
            }
            for (s, to) in cand.out_edges(loc) {
                let mut w = word.clone();
                w.push(s.clone());
                next.push((to, w));
            }
        }
        frontier = next;
    }
    let mut expected: Vec<(BigRational, Trace)> = brute
        .into_iter()
        .map(|(_, t)| (trace_weight(&t), t))
        .collect();
    expected.sort_by(|(wa, ta), (wb, tb)| {
        wb.cmp(wa)
            .then(ta.len().cmp(&tb.len()))
            .then(ta.cmp(tb))
    });
    for (i, (t, w)) in stream.iter().enumerate() {
        assert_eq!((w, t), (&expected[i].0, &expected[i].1), "position {i}");
    }
    // the accepting mass of the one-loop-then-exit candidate is 1/2:
    // the left coin-0 branch is structurally absent
    assert_eq!(mc_accepting_mass(&cand), rat(1, 2));
}

#[test]
fn shortest_trace_picks_the_lexicographically_least_short_word() {
    let a = limit_pcfa_handbuilt();
    let uni = GeneralPcfa::universal(a.alphabet.clone());
    let empty = GeneralPcfa::empty(a.alphabet.clone());
    // storage = universal: nothing remains
    assert_eq!(shortest_excluded_trace(&a, &uni, &uni), None);
    // storage empty: the shortest accepting trace has four statements and
    // takes the probL branch by the fixed order
    let t = shortest_excluded_trace(&a, &uni, &empty).unwrap();
    assert_eq!(t, trace(&["x:=0", "pL0", "c:=0", "assume !(c > 0)"]));
    // deterministic: a second run yields the same trace
    assert_eq!(shortest_excluded_trace(&a, &uni, &empty).unwrap(), t);
    // no accepting trace of length < 4 exists (breadth-first check)
    let mut frontier = vec![a.init];
    for _ in 0..3 {
        let mut next = Vec::new();
        for loc in frontier {
            assert_ne!(loc, a.end);
            for (_, to) in a.out_edges(loc) {
                next.push(to);
            }
        }
        frontier = next;
    }
}

#[test]
fn oracle_limit_violation_probability_converges_to_half_from_below() {
    // from a fixed initial c = k the violation probability is
    // (1 - 2^-k) / 2; the supremum over pre-models approaches 1/2
    let a = program_to_pcfa(&limit_program());
    let post = parse_bexpr("x = 0").unwrap();
    for (c, num, den) in [(0i64, 0i64, 1i64), (1, 1, 4), (2, 3, 8), (3, 7, 16)] {
        let v0 = Valuation::from_pairs(&[("c", c), ("x", 9)]);
        assert_eq!(
            oracle::max_violation_from(&a, &v0, &post),
            rat(num, den),
            "c = {c}"
        );
    }
}

#[test]
fn oracle_replay_agrees_with_trace_evaluation() {
    let a = limit_pcfa_handbuilt();
    let v0 = Valuation::from_pairs(&[("c", 0), ("x", 0)]);
    let (loc, v) = oracle::replay_computation(&a, &safe_trace(), &v0).unwrap();
    assert_eq!(loc, a.end);
    assert_eq!(v, eval_trace(&safe_trace(), &v0));
    assert!(oracle::replay_computation(&a, &infeasible_trace(), &v0).is_none());
}

#[test]
fn weight_is_multiplicative_under_concatenation() {
    let t1 = trace(&["pL0", "skip"]);
    let t2 = trace(&["pR1", "pL1", "x:=0"]);
    assert_eq!(
        trace_weight(&t1.concat(&t2)),
        trace_weight(&t1) * trace_weight(&t2)
    );
}

#[test]
fn zero_mass_for_unreachable_end() {
    let mut chain = run_chain_handbuilt();
    chain.delta.remove(&(4, stmt("assume !(c > 0)")));
    assert_eq!(mc_accepting_mass(&chain), BigRational::zero());
}
