//! Brute-force reference interpreter: computes the exact violation
//! probability of a bounded program by enumerating every initial
//! valuation satisfying the pre-condition, every scheduler resolution
//! (maximising) and every coin outcome (averaging). Independent of the
//! verification pipeline: it walks the automaton with concrete
//! valuations only.

use num_rational::BigRational;
use num_traits::{One, Zero};
use sarp_core::logic::{SatResult, Solver, SolverConfig};
use sarp_core::pcfa::{Loc, Pcfa, Trace, Weight};
use sarp_core::stmt::{eval_bexpr, eval_statement, Statement, Valuation};
use sarp_core::syntax::{BExpr, CmpOp, Expr, VerificationTask};
use std::collections::{BTreeSet, HashMap, HashSet};

/// Exact maximum violation probability from one initial valuation:
/// schedulers maximise over enabled non-probabilistic transitions, fair
/// pairs average, a lone probabilistic branch contributes half. Panics
/// on unbounded loops (the corpus is statically bounded).
pub fn max_violation_from(a: &Pcfa, v0: &Valuation, post: &BExpr) -> Weight {
    let mut memo: HashMap<(Loc, Valuation), Weight> = HashMap::new();
    let mut visiting: HashSet<(Loc, Valuation)> = HashSet::new();
    go(a, a.init, v0, post, &mut memo, &mut visiting)
}

fn go(
    a: &Pcfa,
    loc: Loc,
    v: &Valuation,
    post: &BExpr,
    memo: &mut HashMap<(Loc, Valuation), Weight>,
    visiting: &mut HashSet<(Loc, Valuation)>,
) -> Weight {
    if loc == a.end {
        return if !v.is_bottom() && eval_bexpr(&BExpr::not(post.clone()), v) {
            Weight::one()
        } else {
            Weight::zero()
        };
    }
    let key = (loc, v.clone());
    if let Some(w) = memo.get(&key) {
        return w.clone();
    }
    assert!(
        visiting.insert(key.clone()),
        "oracle requires a semantically bounded program ({loc} revisited)"
    );
    // group the location's out-edges into scheduler choices
    let mut best = Weight::zero();
    let mut coins: HashMap<u32, Vec<(bool, Loc)>> = HashMap::new();
    for (stmt, to) in a.out_edges(loc) {
        match stmt {
            Statement::ProbLeft(i) => coins.entry(*i).or_default().push((true, to)),
            Statement::ProbRight(i) => coins.entry(*i).or_default().push((false, to)),
            Statement::Assume(b) => {
                if eval_bexpr(b, v) {
                    let val = go(a, to, v, post, memo, visiting);
                    if val > best {
                        best = val;
                    }
                }
            }
            other => {
                let next = eval_statement(other, v);
                if !next.is_bottom() {
                    let val = go(a, to, &next, post, memo, visiting);
                    if val > best {
                        best = val;
                    }
                }
            }
        }
    }
    let half = BigRational::new(1.into(), 2.into());
    for (_, branches) in coins {
        let mut val = Weight::zero();
        for (_, to) in &branches {
            val += &half * go(a, *to, v, post, memo, visiting);
        }
        if val > best {
            best = val;
        }
    }
    visiting.remove(&key);
    memo.insert(key, best.clone());
    best
}

/// Exact violation probability of a task: the maximum over the models
/// of the pre-condition. Only variables read before being written (or
/// free in the conditions) need enumeration; the rest cannot influence
/// the outcome and default to zero.
pub fn violation_probability(task: &VerificationTask, model_limit: usize) -> Weight {
    let a = sarp_core::pcfa::program_to_pcfa(&task.program);
    let mut vars = read_before_write(&a, &task.post);
    vars.extend(task.pre.vars());
    let models = models_of(&task.pre, &vars, model_limit)
        .expect("oracle corpus pre-conditions have finitely many models");
    let mut best = Weight::zero();
    for v0 in models {
        let p = max_violation_from(&a, &v0, &task.post);
        if p > best {
            best = p;
        }
    }
    best
}

/// Backward liveness over the automaton graph, seeded with the free
/// variables of the post-condition at the ending location.
fn read_before_write(a: &Pcfa, post: &BExpr) -> BTreeSet<String> {
    let mut live: Vec<BTreeSet<String>> = vec![BTreeSet::new(); a.num_locs];
    live[a.end] = post.vars();
    loop {
        let mut changed = false;
        for ((from, stmt), to) in &a.delta {
            let mut incoming = live[*to].clone();
            match stmt {
                Statement::Assign(x, e) => {
                    incoming.remove(x);
                    e.collect_vars(&mut incoming);
                }
                Statement::Assume(b) => b.collect_vars(&mut incoming),
                _ => {}
            }
            if !incoming.is_subset(&live[*from]) {
                live[*from].extend(incoming);
                changed = true;
            }
        }
        if !changed {
            return live[a.init].clone();
        }
    }
}

/// All models of a predicate over the given variables (as valuations),
/// or `None` past the limit.
pub fn models_of(
    pre: &BExpr,
    vars: &BTreeSet<String>,
    limit: usize,
) -> Option<Vec<Valuation>> {
    let mut solver = Solver::new(SolverConfig::Builtin);
    let mut formula = pre.clone();
    let mut out = Vec::new();
    loop {
        match solver.check_sat(&formula).expect("builtin solver is total") {
            SatResult::Unsat => return Some(out),
            SatResult::Sat(model) => {
                if out.len() >= limit {
                    return None;
                }
                let mut v = Valuation::empty();
                let mut point = BExpr::TRUE;
                for x in vars {
                    let value = model
                        .get(x)
                        .cloned()
                        .unwrap_or_else(|| num_bigint::BigInt::from(0));
                    v.set(x, value.clone());
                    point = BExpr::and(
                        point,
                        BExpr::cmp(CmpOp::Eq, Expr::Var(x.clone()), Expr::Lit(value)),
                    );
                }
                out.push(v);
                formula = BExpr::and(formula, BExpr::not(point));
            }
        }
    }
}

/// Replays a trace as a computation of the automaton: the trace must be
/// label-consistent from the initial location and every assumption must
/// pass. Returns the final location when the computation exists.
pub fn replay_computation(a: &Pcfa, trace: &Trace, v0: &Valuation) -> Option<(Loc, Valuation)> {
    let mut loc = a.init;
    let mut v = v0.clone();
    for s in trace.statements() {
        let to = a.step(loc, s)?;
        let next = eval_statement(s, &v);
        if next.is_bottom() {
            return None;
        }
        v = next;
        loc = to;
    }
    Some((loc, v))
}
