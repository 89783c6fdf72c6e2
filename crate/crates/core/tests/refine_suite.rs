//! Refinement construction checked against the hand-encoded
//! generalisations and the brute-force oracle.

mod common;

use common::*;
use num_rational::BigRational;
use num_traits::One;
use sarp_core::automata::{
    enumerate_finite_language, is_valid_pcfa, language_equal, language_subset, min_intersect,
};
use sarp_core::cexcheck::{classify_trace, SpuriousReport, TraceClass};
use sarp_core::logic::{
    sequence_interpolants, HoareCache, InterpolationStrategy, Solver, SolverConfig, TaggedTrace,
};
use sarp_core::mdp::structural_bound;
use sarp_core::pcfa::{program_to_pcfa, GeneralPcfa, Trace};
use sarp_core::refine::{
    apply_split, generalize_nonviolating, generalize_violating_finite, initial_refinement,
    sync_program, update_refinement, value_analysis_refine, SplitOutcome, SplitSet,
    ValueAnalysisResult,
};
use sarp_core::stmt::Statement;
use sarp_core::syntax::{parse_bexpr, parse_program, parse_task, BExpr};

fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(n.into(), d.into())
}

fn solver() -> Solver {
    Solver::new(SolverConfig::Builtin)
}

fn post() -> BExpr {
    parse_bexpr("x = 0").unwrap()
}

#[test]
fn initial_refinement_accepts_every_prefixed_trace() {
    let sigma = limit_pcfa_handbuilt().alphabet;
    let state = initial_refinement(&sigma, &BExpr::TRUE);
    assert_eq!(state.splits.members, vec![BExpr::TRUE]);
    let mut with_prefix = vec![Statement::assume(BExpr::TRUE)];
    with_prefix.extend(safe_trace().statements().iter().cloned());
    assert!(state.v.accepts(&Trace::new(with_prefix)));
    // the bare trace is rejected: the split assumption must come first
    assert!(!state.v.accepts(&safe_trace()));
}

#[test]
#[should_panic(expected = "at least one statement")]
fn initial_refinement_rejects_an_empty_alphabet() {
    initial_refinement(&Default::default(), &BExpr::TRUE);
}

#[test]
fn initial_refinement_with_nontrivial_pre() {
    let sigma = limit_pcfa_handbuilt().alphabet;
    let pre = parse_bexpr("x > 0").unwrap();
    let state = initial_refinement(&sigma, &pre);
    let mut t = vec![Statement::assume(pre)];
    t.extend(safe_trace().statements().iter().cloned());
    assert!(state.v.accepts(&Trace::new(t)));
}

#[test]
fn synchronised_program_equals_the_prefixed_language() {
    let a = limit_pcfa_handbuilt();
    let state = initial_refinement(&a.alphabet, &BExpr::TRUE);
    let synced = sync_program(&a, &state.splits);
    assert!(is_valid_pcfa(&synced.to_general()));
    let r = min_intersect(&synced, &state.v);
    assert!(language_equal(&r.to_general(), &synced.to_general()));
}

#[test]
fn sync_with_two_splits_mirrors_the_split_condition_picture() {
    // the split-condition example: both sides become initial assumptions
    let program = parse_program(
        "{ if q > 0 then { y := 0 } else { y := 1 } } <+> { if q > 0 then { y := 1 } else { y := 0 } }",
    )
    .unwrap();
    let a = program_to_pcfa(&program);
    let splits = SplitSet {
        members: vec![
            parse_bexpr("q > 0").unwrap(),
            parse_bexpr("!(q > 0)").unwrap(),
        ],
    };
    let synced = sync_program(&a, &splits);
    assert!(is_valid_pcfa(&synced.to_general()));
    let first: Vec<Statement> = synced
        .out_edges(synced.init)
        .map(|(s, _)| s.clone())
        .collect();
    assert_eq!(first.len(), 2);
    assert!(first.iter().all(|s| matches!(s, Statement::Assume(_))));
}

fn paper_tagging_of_safe_trace() -> TaggedTrace {
    // {True} x:=0 {x=0} probL(0) {x=0} c:=0 {x=0} assume !(c>0) {x=0}
    TaggedTrace::new(
        safe_trace(),
        vec![
            BExpr::TRUE,
            parse_bexpr("x = 0").unwrap(),
            parse_bexpr("x = 0").unwrap(),
            parse_bexpr("x = 0").unwrap(),
            parse_bexpr("x = 0").unwrap(),
        ],
    )
}

fn paper_tagging_of_infeasible_trace() -> TaggedTrace {
    // {True} x:=0 {True} probL(0) {True} c:=0 {c<=0} assume c>0 {False} ...
    TaggedTrace::new(
        infeasible_trace(),
        vec![
            BExpr::TRUE,
            BExpr::TRUE,
            BExpr::TRUE,
            parse_bexpr("c <= 0").unwrap(),
            BExpr::FALSE,
            BExpr::FALSE,
            BExpr::FALSE,
            BExpr::FALSE,
            BExpr::FALSE,
        ],
    )
}

#[test]
fn generalising_the_paper_tagging_reproduces_q1() {
    let mut s = solver();
    let mut cache = HoareCache::new();
    let sigma = limit_pcfa_handbuilt().alphabet;
    let q = generalize_nonviolating(&mut s, &mut cache, &paper_tagging_of_safe_trace(), &sigma)
        .unwrap();
    assert!(q.base.accepts(&safe_trace()));
    assert!(language_equal(&q.base, &q1_handbuilt()));
}

#[test]
fn generalising_the_paper_tagging_reproduces_q2() {
    let mut s = solver();
    let mut cache = HoareCache::new();
    let sigma = limit_pcfa_handbuilt().alphabet;
    let q = generalize_nonviolating(
        &mut s,
        &mut cache,
        &paper_tagging_of_infeasible_trace(),
        &sigma,
    )
    .unwrap();
    assert!(q.base.accepts(&infeasible_trace()));
    assert!(language_equal(&q.base, &q2_handbuilt()));
}

#[test]
fn every_segment_of_a_generalisation_is_hoare_valid() {
    let mut s = solver();
    let mut cache = HoareCache::new();
    let sigma = limit_pcfa_handbuilt().alphabet;
    let tagged = sequence_interpolants(
        &mut s,
        &mut cache,
        &safe_trace(),
        &BExpr::TRUE,
        &post(),
        InterpolationStrategy::StrongestPost,
    )
    .unwrap();
    let q = generalize_nonviolating(&mut s, &mut cache, &tagged, &sigma).unwrap();
    for (from, stmt, to) in &q.base.delta {
        assert!(cache
            .hoare_valid(&mut s, &q.labels[*from], stmt, &q.labels[*to])
            .unwrap());
    }
    // sampled members up to length 6 are all non-violating
    let mut count = 0;
    for len in 1..=6 {
        sample_words(&q.base, len, &mut |t: &Trace| {
            count += 1;
            let class = classify_trace(&mut s, t, &BExpr::TRUE, &post()).unwrap();
            assert!(!class.is_violating(), "violating member {t}");
        });
    }
    assert!(count > 0);
}

/// Depth-first sampling of accepted words up to a length.
fn sample_words(g: &GeneralPcfa, len: usize, f: &mut impl FnMut(&Trace)) {
    fn walk(
        g: &GeneralPcfa,
        at: usize,
        word: &mut Vec<Statement>,
        len: usize,
        f: &mut impl FnMut(&Trace),
        budget: &mut usize,
    ) {
        if *budget == 0 {
            return;
        }
        if word.len() == len {
            if g.ends.contains(&at) {
                *budget -= 1;
                f(&Trace::new(word.clone()));
            }
            return;
        }
        let edges: Vec<(Statement, usize)> = g
            .delta
            .iter()
            .filter(|(from, _, _)| *from == at)
            .map(|(_, s, to)| (s.clone(), *to))
            .collect();
        for (s, to) in edges {
            word.push(s);
            walk(g, to, word, len, f, budget);
            word.pop();
        }
    }
    let mut budget = 40usize;
    walk(g, g.init, &mut Vec::new(), len, f, &mut budget);
}

#[test]
fn ordered_generalisation_is_finite_and_contains_its_trace() {
    let mut s = solver();
    let mut cache = HoareCache::new();
    let sigma = limit_pcfa_handbuilt().alphabet;
    // the one-iteration violating trace (initial counter 1)
    let violating = trace(&[
        "x:=0",
        "pR0",
        "skip",
        "assume c > 0",
        "pL1",
        "x:=x + 1",
        "c:=c - 1",
        "assume !(c > 0)",
    ]);
    let ordered = generalize_violating_finite(
        &mut s,
        &mut cache,
        &violating,
        &BExpr::TRUE,
        &post(),
        &sigma,
    )
    .unwrap();
    // priorities strictly increase along transitions, so the language is
    // finite (its size is bounded by the number of paths in the DAG)
    for (from, _, to) in &ordered.fh.base.delta {
        assert!(ordered.priority[*from] < ordered.priority[*to]);
    }
    let members = enumerate_finite_language(&ordered.fh.base, 1_000_000)
        .expect("a nine-position DAG has a small language");
    assert!(members.contains(&violating));
    // every harvested member is violating or infeasible, never a feasible
    // safe trace
    for t in &members {
        match classify_trace(&mut s, t, &BExpr::TRUE, &post()).unwrap() {
            TraceClass::Violating { .. } => {}
            TraceClass::NonViolating { infeasible } => {
                assert!(infeasible, "feasible safe member {t}");
            }
        }
    }
}

#[test]
fn update_with_nothing_keeps_the_language() {
    let sigma = limit_pcfa_handbuilt().alphabet;
    let state = initial_refinement(&sigma, &BExpr::TRUE);
    let updated = update_refinement(&state, &[]);
    assert!(language_equal(&updated.v, &state.v));
}

#[test]
fn update_with_the_generalisations_drops_the_bound_to_half() {
    let mut s = solver();
    let mut cache = HoareCache::new();
    let a = limit_pcfa_handbuilt();
    let state = initial_refinement(&a.alphabet, &BExpr::TRUE);
    let synced = sync_program(&a, &state.splits);

    // generalise the two prefixed traces with the paper's interpolants
    let prefix = Statement::assume(BExpr::TRUE);
    let tag = |tt: TaggedTrace| -> TaggedTrace {
        let mut stmts = vec![prefix.clone()];
        stmts.extend(tt.trace.statements().iter().cloned());
        let mut phis = vec![BExpr::TRUE];
        phis.extend(tt.interpolants.iter().cloned());
        TaggedTrace::new(Trace::new(stmts), phis)
    };
    let qs: Vec<GeneralPcfa> = [
        tag(paper_tagging_of_safe_trace()),
        tag(paper_tagging_of_infeasible_trace()),
    ]
    .iter()
    .map(|tt| {
        generalize_nonviolating(&mut s, &mut cache, tt, &synced.alphabet)
            .unwrap()
            .base
    })
    .collect();

    let updated = update_refinement(&state, &qs);
    // the language only shrinks
    assert!(language_subset(&updated.v, &state.v));
    let refined = min_intersect(&synced, &updated.v);
    let (bound, _) = structural_bound(&refined);
    // the immediate exits are gone but deeper infeasible entries remain
    // generalisable; with these two automata alone the bound is 1/2
    assert_eq!(bound, rat(1, 2));
    // every violating trace stays in the refined automaton
    for t in two_iteration_violating_traces() {
        let mut stmts = vec![prefix.clone()];
        stmts.extend(t.statements().iter().cloned());
        let prefixed = Trace::new(stmts);
        assert!(updated.v.accepts(&prefixed));
        assert!(refined.accepts(&prefixed));
    }
}

#[test]
fn split_replaces_the_member_and_relabels_traces() {
    let mut s = solver();
    let a = limit_pcfa_handbuilt();
    let state = initial_refinement(&a.alphabet, &BExpr::TRUE);
    let synced = sync_program(&a, &state.splits);
    let prefix = Statement::assume(BExpr::TRUE);
    let prefixed = |t: &Trace| {
        let mut stmts = vec![prefix.clone()];
        stmts.extend(t.statements().iter().cloned());
        Trace::new(stmts)
    };
    let violating: Vec<Trace> = two_iteration_violating_traces().iter().map(&prefixed).collect();
    let report = SpuriousReport {
        violating: violating.clone(),
        non_violating: vec![(prefixed(&safe_trace()), false)],
        max_subset: violating.clone(),
        split_predicate: parse_bexpr("c = 2").unwrap(),
        best_weight: rat(3, 8),
        enumerated: 4,
    };
    let cand = synced.clone();
    let out = apply_split(
        &mut s,
        &state,
        &BExpr::TRUE,
        &report.split_predicate.clone(),
        &report,
        &cand,
    )
    .unwrap();
    match out {
        SplitOutcome::Applied {
            state: next,
            relabeled_max_subset,
            relabeled_others,
            candidate,
        } => {
            assert_eq!(next.splits.members.len(), 2);
            next.splits.check_invariants(&mut s, &BExpr::TRUE).unwrap();
            assert_eq!(relabeled_max_subset.len(), 3);
            assert_eq!(relabeled_others.len(), 1);
            for t in &relabeled_max_subset {
                assert_eq!(
                    t.statements()[0],
                    Statement::assume(next.splits.members[0].clone())
                );
                // relabelled members stay inside the split automaton
                assert!(next.v.accepts(t));
            }
            assert_eq!(
                relabeled_others[0].statements()[0],
                Statement::assume(next.splits.members[1].clone())
            );
            // the candidate's initial edge was duplicated
            assert_eq!(candidate.out_edges(candidate.init).count(), 2);
        }
        SplitOutcome::NoOp => panic!("expected a real split"),
    }
}

#[test]
fn vacuous_split_is_flagged() {
    let mut s = solver();
    let a = limit_pcfa_handbuilt();
    let state = initial_refinement(&a.alphabet, &BExpr::TRUE);
    let report = SpuriousReport {
        violating: vec![],
        non_violating: vec![],
        max_subset: vec![],
        split_predicate: BExpr::TRUE,
        best_weight: rat(0, 1),
        enumerated: 0,
    };
    let cand = sync_program(&a, &state.splits);
    let out = apply_split(&mut s, &state, &BExpr::TRUE, &BExpr::TRUE, &report, &cand).unwrap();
    assert!(matches!(out, SplitOutcome::NoOp));
}

#[test]
fn value_analysis_of_the_two_state_coin_program_is_exact() {
    let mut s = solver();
    let task = parse_task("pre True; prog { { x := 0 } <+> { x := 1 } } post x = 0;").unwrap();
    let a = program_to_pcfa(&task.program);
    match value_analysis_refine(&mut s, &a, &task.pre, &task.post, 64).unwrap() {
        ValueAnalysisResult::Refinement(v) => {
            // three valuations appear: the empty seed, x = 0 and x = 1
            assert_eq!(v.num_locs, 4); // plus the fresh initial node
            let refined = min_intersect(&a, &v);
            let (bound, _) = structural_bound(&refined);
            assert_eq!(bound, rat(1, 2));
            // matches the brute-force violation probability exactly
            let p = oracle::violation_probability(&task, 64);
            assert_eq!(bound, p);
        }
        ValueAnalysisResult::Exhausted => panic!("finite-state program must converge"),
    }
}

#[test]
fn value_analysis_exhausts_on_the_unbounded_counter() {
    let mut s = solver();
    let task = limit_task("0.5");
    let a = program_to_pcfa(&task.program);
    for limit in [4usize, 64, 256] {
        assert!(matches!(
            value_analysis_refine(&mut s, &a, &task.pre, &task.post, limit).unwrap(),
            ValueAnalysisResult::Exhausted
        ));
    }
}

#[test]
fn value_analysis_on_a_bounded_loop_matches_the_oracle() {
    let mut s = solver();
    let task = parse_task(
        "pre True; prog { x := 0; c := 2; while c > 0 do { { x := x + 1 } <+> { skip }; c := c - 1 } } post x = 0;",
    )
    .unwrap();
    let a = program_to_pcfa(&task.program);
    match value_analysis_refine(&mut s, &a, &task.pre, &task.post, 256).unwrap() {
        ValueAnalysisResult::Refinement(v) => {
            let refined = min_intersect(&a, &v);
            let (bound, _) = structural_bound(&refined);
            assert_eq!(bound, rat(3, 4));
            assert_eq!(bound, oracle::violation_probability(&task, 64));
        }
        ValueAnalysisResult::Exhausted => panic!("bounded program must converge"),
    }
}

#[test]
fn update_keeps_one_as_the_bound_before_any_refinement() {
    let a = limit_pcfa_handbuilt();
    let state = initial_refinement(&a.alphabet, &BExpr::TRUE);
    let synced = sync_program(&a, &state.splits);
    let r = min_intersect(&synced, &state.v);
    assert_eq!(structural_bound(&r).0, BigRational::one());
}
