//! Shared fixtures: hand-encoded automata for the coin-game example and
//! its refinement artifacts, plus the brute-force reference interpreter.

#![allow(dead_code)]

pub mod oracle;

use sarp_core::pcfa::{GeneralPcfa, Pcfa, Trace};
use sarp_core::stmt::Statement;
use sarp_core::syntax::{parse_bexpr, parse_program, parse_task, Program, VerificationTask};
use std::collections::{BTreeMap, BTreeSet};

pub const LIMIT_PROGRAM: &str = "x := 0; { c := 0 } <+> { skip }; while c > 0 do { { x := x + 1 } <+> { skip }; c := c - 1 }";

pub fn limit_program() -> Program {
    parse_program(LIMIT_PROGRAM).unwrap()
}

pub fn limit_task(beta: &str) -> VerificationTask {
    parse_task(&format!(
        "pre True; prog {{ {LIMIT_PROGRAM} }} post x = 0; bound {beta};"
    ))
    .unwrap()
}

pub fn stmt(text: &str) -> Statement {
    match text {
        "skip" => Statement::Skip,
        "pL0" => Statement::ProbLeft(0),
        "pR0" => Statement::ProbRight(0),
        "pL1" => Statement::ProbLeft(1),
        "pR1" => Statement::ProbRight(1),
        _ => {
            if let Some(rest) = text.strip_prefix("assume ") {
                Statement::assume(parse_bexpr(rest).unwrap())
            } else if let Some((lhs, rhs)) = text.split_once(":=") {
                Statement::assign(
                    lhs.trim(),
                    sarp_core::syntax::parse_expr(rhs.trim()).unwrap(),
                )
            } else {
                panic!("unknown statement shorthand `{text}`")
            }
        }
    }
}

pub fn trace(parts: &[&str]) -> Trace {
    Trace::new(parts.iter().map(|p| stmt(p)).collect())
}

fn pcfa(
    num_locs: usize,
    init: usize,
    end: usize,
    edges: &[(usize, &str, usize)],
) -> Pcfa {
    let mut delta = BTreeMap::new();
    let mut alphabet = BTreeSet::new();
    for (from, s, to) in edges {
        let st = stmt(s);
        alphabet.insert(st.clone());
        assert!(delta.insert((*from, st), *to).is_none(), "duplicate edge");
    }
    let a = Pcfa {
        num_locs,
        init,
        end,
        alphabet,
        delta,
    };
    a.check_invariants().unwrap();
    a
}

fn general(
    num_locs: usize,
    init: usize,
    ends: &[usize],
    alphabet: &BTreeSet<Statement>,
    edges: &[(usize, Statement, usize)],
) -> GeneralPcfa {
    GeneralPcfa {
        num_locs,
        init,
        ends: ends.iter().copied().collect(),
        alphabet: alphabet.clone(),
        delta: edges.iter().cloned().map(|(f, s, t)| (f, s, t)).collect(),
    }
}

/// The coin-game automaton exactly as pictured: ten locations, coins
/// tagged 0 (initial toss) and 1 (loop body).
pub fn limit_pcfa_handbuilt() -> Pcfa {
    pcfa(
        10,
        0,
        9,
        &[
            (0, "x:=0", 1),
            (1, "pL0", 3),
            (1, "pR0", 2),
            (2, "skip", 4),
            (3, "c:=0", 4),
            (4, "assume c > 0", 5),
            (4, "assume !(c > 0)", 9),
            (5, "pL1", 6),
            (5, "pR1", 7),
            (6, "x:=x + 1", 8),
            (7, "skip", 8),
            (8, "c:=c - 1", 4),
        ],
    )
}

/// The two-state generalisation of the safe immediate-exit trace: after
/// `x := 0` the accept state loops on everything except `x := x + 1`.
pub fn q1_handbuilt() -> GeneralPcfa {
    let sigma = limit_pcfa_handbuilt().alphabet;
    let mut edges: Vec<(usize, Statement, usize)> = vec![(0, stmt("x:=0"), 1)];
    for s in &sigma {
        edges.push((0, s.clone(), 0));
        edges.push((1, s.clone(), 0));
        if *s != stmt("x:=x + 1") {
            edges.push((1, s.clone(), 1));
        }
    }
    general(2, 0, &[1], &sigma, &edges)
}

/// The three-state generalisation of the infeasible loop-entry trace:
/// True, then (c <= 0 after the reset or the failed guard), then the
/// absorbing False accept state entered by `assume c > 0`.
pub fn q2_handbuilt() -> GeneralPcfa {
    let sigma = limit_pcfa_handbuilt().alphabet;
    // 0 = True, 1 = False (accepting), 2 = c <= 0
    let mut edges: Vec<(usize, Statement, usize)> = vec![
        (0, stmt("assume !(c > 0)"), 2),
        (0, stmt("c:=0"), 2),
        (2, stmt("assume c > 0"), 1),
    ];
    for s in &sigma {
        edges.push((0, s.clone(), 0));
        edges.push((1, s.clone(), 0));
        edges.push((1, s.clone(), 1));
        edges.push((1, s.clone(), 2));
        edges.push((2, s.clone(), 0));
        edges.push((2, s.clone(), 2));
    }
    general(3, 0, &[1], &sigma, &edges)
}

/// The refined automaton pictured for the coin game: the left branch of
/// coin 0 is gone and the loop must take the incrementing branch of coin
/// 1 at least once before exiting.
pub fn refined_limit_handbuilt() -> Pcfa {
    pcfa(
        15,
        0,
        14,
        &[
            (0, "x:=0", 1),
            (1, "pR0", 2),
            (2, "skip", 3),
            (3, "assume c > 0", 4),
            (4, "pR1", 5),
            (4, "pL1", 6),
            (5, "skip", 7),
            (7, "c:=c - 1", 3),
            (6, "x:=x + 1", 8),
            (8, "c:=c - 1", 9),
            (9, "assume !(c > 0)", 14),
            (9, "assume c > 0", 10),
            (10, "pR1", 11),
            (10, "pL1", 12),
            (11, "skip", 13),
            (12, "x:=x + 1", 13),
            (13, "c:=c - 1", 9),
        ],
    )
}

/// The two-trace chain produced by exiting the loop immediately: coin 0,
/// then the failed-guard exit.
pub fn run_chain_handbuilt() -> Pcfa {
    pcfa(
        6,
        0,
        5,
        &[
            (0, "x:=0", 1),
            (1, "pL0", 2),
            (1, "pR0", 3),
            (2, "c:=0", 4),
            (3, "skip", 4),
            (4, "assume !(c > 0)", 5),
        ],
    )
}

/// The four-statement safe trace through the left coin branch.
pub fn safe_trace() -> Trace {
    trace(&["x:=0", "pL0", "c:=0", "assume !(c > 0)"])
}

/// The infeasible trace that resets the counter and then enters the loop.
pub fn infeasible_trace() -> Trace {
    trace(&[
        "x:=0",
        "pL0",
        "c:=0",
        "assume c > 0",
        "pR1",
        "skip",
        "c:=c - 1",
        "assume !(c > 0)",
    ])
}

/// The three violating traces of the two-iteration candidate: every coin
/// word over tag 1 with at least one head, from the initial toss pR0.
pub fn two_iteration_violating_traces() -> Vec<Trace> {
    let body = |head: bool| -> Vec<&'static str> {
        if head {
            vec!["assume c > 0", "pL1", "x:=x + 1", "c:=c - 1"]
        } else {
            vec!["assume c > 0", "pR1", "skip", "c:=c - 1"]
        }
    };
    [(true, true), (true, false), (false, true)]
        .into_iter()
        .map(|(h1, h2)| {
            let mut parts = vec!["x:=0", "pR0", "skip"];
            parts.extend(body(h1));
            parts.extend(body(h2));
            parts.push("assume !(c > 0)");
            trace(&parts)
        })
        .collect()
}
