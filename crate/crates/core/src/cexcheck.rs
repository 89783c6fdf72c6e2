//! Counterexample machinery: trace classification, maximum-weight
//! compatible subsets, and candidate verification by weight-ordered
//! enumeration.

use crate::automata::enumerate_by_weight;
use crate::logic::{light_simplify, Model, SatResult, Solver, SolverError};
use crate::mdp::{is_mc_shaped, mc_accepting_mass};
use crate::pcfa::{eval_trace, path_condition, trace_weight, Pcfa, Trace, Weight};
use crate::stmt::{eval_bexpr, Statement, Valuation};
use crate::syntax::BExpr;
use num_bigint::BigInt;
use num_traits::Zero;
use serde::Serialize;
use std::collections::BTreeMap;
use std::time::Instant;

/// Classification of a single trace against `(pre, post)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TraceClass {
    /// Some pre-model drives the trace to a non-bottom state violating
    /// the post-condition; carries that model.
    Violating { path_cond: BExpr, witness: Model },
    /// `infeasible` is true when no pre-model executes the trace to
    /// completion at all.
    NonViolating { infeasible: bool },
}

impl TraceClass {
    pub fn is_violating(&self) -> bool {
        matches!(self, TraceClass::Violating { .. })
    }
}

/// Violating iff the path condition is satisfiable; the infeasible flag
/// additionally checks whether the trace can execute at all.
pub fn classify_trace(
    solver: &mut Solver,
    trace: &Trace,
    pre: &BExpr,
    post: &BExpr,
) -> Result<TraceClass, SolverError> {
    let pc = light_simplify(&path_condition(trace, pre, post));
    match solver.check_sat(&pc)? {
        SatResult::Sat(witness) => Ok(TraceClass::Violating {
            path_cond: pc,
            witness,
        }),
        SatResult::Unsat => {
            // feasibility: the same fold anchored at True
            let feasibility = path_condition(trace, pre, &BExpr::FALSE);
            let infeasible = solver.is_unsat(&feasibility)?;
            Ok(TraceClass::NonViolating { infeasible })
        }
    }
}

/// Two distinct traces are structurally compatible when, after their
/// longest common prefix, they diverge on the two halves of one shared
/// distribution tag.
pub fn structurally_compatible(t1: &Trace, t2: &Trace) -> bool {
    let a = t1.statements();
    let b = t2.statements();
    let mut i = 0;
    while i < a.len() && i < b.len() && a[i] == b[i] {
        i += 1;
    }
    match (a.get(i), b.get(i)) {
        (Some(x), Some(y)) => match (x, y) {
            (Statement::ProbLeft(i), Statement::ProbRight(j))
            | (Statement::ProbRight(i), Statement::ProbLeft(j)) => i == j,
            _ => false,
        },
        // one trace is a prefix of the other (or they are equal)
        _ => false,
    }
}

/// A finite set of pairwise compatible violating traces whose joint path
/// condition is satisfiable and whose total weight exceeds the threshold.
#[derive(Debug, Clone)]
pub struct Counterexample {
    pub traces: Vec<Trace>,
    pub total_weight: Weight,
    pub joint_path_cond: BExpr,
    pub witness: Model,
}

/// Evidence that a candidate cannot beat the threshold: the violating
/// traces seen, the non-violating ones, the best compatible subset and
/// its joint path condition (the split predicate).
#[derive(Debug, Clone)]
pub struct SpuriousReport {
    pub violating: Vec<Trace>,
    pub non_violating: Vec<(Trace, bool)>,
    pub max_subset: Vec<Trace>,
    pub split_predicate: BExpr,
    pub best_weight: Weight,
    pub enumerated: usize,
}

/// Outcome of verifying one candidate.
#[derive(Debug, Clone)]
pub enum CandidateOutcome {
    Counterexample(Counterexample),
    Spurious(SpuriousReport),
}

/// Budgets for one candidate-verification run.
#[derive(Debug, Clone, Copy)]
pub struct CandidateBudget {
    pub max_traces: usize,
    pub deadline: Option<Instant>,
}

#[derive(Debug, thiserror::Error)]
pub enum CexError {
    #[error("verification budget exhausted: {0}")]
    Budget(String),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

/// Maximum-weight subset of violating traces that is pairwise
/// structurally compatible with a satisfiable joint path condition.
/// Branch and bound over the weight-sorted list, pruning with a
/// precomputed conflict relation and joint-satisfiability checks.
pub fn max_weight_compatible_subset(
    solver: &mut Solver,
    traces: &[(Trace, BExpr)],
) -> Result<(Vec<usize>, Weight, BExpr), SolverError> {
    let mut order: Vec<usize> = (0..traces.len()).collect();
    order.sort_by(|a, b| {
        trace_weight(&traces[*b].0)
            .cmp(&trace_weight(&traces[*a].0))
            .then(traces[*a].0.cmp(&traces[*b].0))
    });
    let weights: Vec<Weight> = order
        .iter()
        .map(|i| trace_weight(&traces[*i].0))
        .collect();
    // suffix sums bound the attainable remainder
    let mut suffix = vec![Weight::zero(); order.len() + 1];
    for i in (0..order.len()).rev() {
        suffix[i] = &suffix[i + 1] + &weights[i];
    }
    // structural conflict relation over the sorted positions
    let n = order.len();
    let mut conflict = vec![vec![false; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let incompatible =
                !structurally_compatible(&traces[order[i]].0, &traces[order[j]].0);
            conflict[i][j] = incompatible;
            conflict[j][i] = incompatible;
        }
    }

    struct Search<'s> {
        solver: &'s mut Solver,
        conflict: Vec<Vec<bool>>,
        weights: Vec<Weight>,
        suffix: Vec<Weight>,
        best: (Vec<usize>, Weight),
    }
    impl Search<'_> {
        fn run(
            &mut self,
            at: usize,
            chosen: &mut Vec<usize>,
            joint: &BExpr,
            weight: Weight,
            traces: &[(Trace, BExpr)],
            order: &[usize],
        ) -> Result<(), SolverError> {
            if weight > self.best.1 {
                self.best = (chosen.clone(), weight.clone());
            }
            if at == order.len() || &weight + &self.suffix[at] <= self.best.1 {
                return Ok(());
            }
            // include `at` when structurally consistent and jointly sat
            if !chosen.iter().any(|c| self.conflict[*c][at]) {
                let candidate = BExpr::and(joint.clone(), traces[order[at]].1.clone());
                if self.solver.check_sat(&candidate)?.is_sat() {
                    chosen.push(at);
                    let w = &weight + &self.weights[at];
                    self.run(at + 1, chosen, &candidate, w, traces, order)?;
                    chosen.pop();
                }
            }
            // exclude `at`
            self.run(at + 1, chosen, joint, weight, traces, order)
        }
    }

    let mut search = Search {
        solver,
        conflict,
        weights,
        suffix,
        best: (Vec::new(), Weight::zero()),
    };
    let mut chosen = Vec::new();
    search.run(0, &mut chosen, &BExpr::TRUE, Weight::zero(), traces, &order)?;
    let (positions, weight) = search.best;
    let indices: Vec<usize> = positions.iter().map(|p| order[*p]).collect();
    let cond = if indices.is_empty() {
        BExpr::TRUE
    } else {
        indices
            .iter()
            .map(|i| traces[*i].1.clone())
            .reduce(BExpr::and)
            .expect("non-empty")
    };
    Ok((indices, weight, cond))
}

/// How many retained violating traces trigger a fresh subset search.
const SUBSET_SEARCH_BATCH: usize = 8;

/// Verifies a candidate counterexample (an MC-shaped automaton) against
/// the threshold: enumerates its traces heaviest-first, retains the
/// violating ones, and alternates with maximum-subset searches until
/// either the best subset exceeds the threshold (a real counterexample)
/// or the best subset plus all unenumerated mass cannot (spurious).
pub fn verify_candidate(
    solver: &mut Solver,
    cand: &Pcfa,
    pre: &BExpr,
    post: &BExpr,
    beta: &Weight,
    budget: CandidateBudget,
    mut on_violating: impl FnMut(&Trace),
) -> Result<CandidateOutcome, CexError> {
    assert!(is_mc_shaped(cand), "candidates come from policy application");
    let mass = mc_accepting_mass(cand);
    let mut violating: Vec<(Trace, BExpr)> = Vec::new();
    let mut witnesses: Vec<Model> = Vec::new();
    let mut non_violating: Vec<(Trace, bool)> = Vec::new();
    let mut enumerated_weight = Weight::zero();
    let mut best: (Vec<usize>, Weight, BExpr) = (Vec::new(), Weight::zero(), BExpr::TRUE);
    let mut fresh_since_search = 0usize;
    let mut count = 0usize;

    if &mass <= beta {
        // remaining mass alone cannot beat the threshold
        return Ok(CandidateOutcome::Spurious(SpuriousReport {
            violating: Vec::new(),
            non_violating,
            max_subset: Vec::new(),
            split_predicate: BExpr::TRUE,
            best_weight: Weight::zero(),
            enumerated: 0,
        }));
    }

    let mut stream = enumerate_by_weight(cand, None);
    loop {
        if let Some(deadline) = budget.deadline {
            if Instant::now() > deadline {
                return Err(CexError::Budget("wall clock".into()));
            }
        }
        let next_item = stream.next();
        let exhausted = next_item.is_none();
        if let Some((trace, weight)) = next_item {
            count += 1;
            if count > budget.max_traces {
                return Err(CexError::Budget(format!(
                    "more than {} traces enumerated",
                    budget.max_traces
                )));
            }
            enumerated_weight += &weight;
            match classify_trace(solver, &trace, pre, post)? {
                TraceClass::Violating { path_cond, witness } => {
                    on_violating(&trace);
                    violating.push((trace, path_cond));
                    witnesses.push(witness);
                    fresh_since_search += 1;
                }
                TraceClass::NonViolating { infeasible } => {
                    non_violating.push((trace, infeasible));
                }
            }
        }
        let remaining = &mass - &enumerated_weight;
        debug_assert!(remaining >= Weight::zero());
        // amortise the combinatorial search: run it on every batch of
        // newly retained traces, when the stream can no longer beat the
        // threshold on its own, or at exhaustion
        let due = fresh_since_search >= SUBSET_SEARCH_BATCH
            || (fresh_since_search > 0 && (&remaining < beta || exhausted));
        if due {
            let next = max_weight_compatible_subset(solver, &violating)?;
            debug_assert!(next.1 >= best.1, "best subset weight is monotone");
            best = next;
            fresh_since_search = 0;
        }
        if &best.1 > beta {
            let (indices, weight, cond) = best;
            let traces: Vec<Trace> = indices.iter().map(|i| violating[*i].0.clone()).collect();
            let witness = match solver.check_sat(&cond)? {
                SatResult::Sat(m) => m,
                SatResult::Unsat => unreachable!("joint condition was satisfiable during search"),
            };
            return Ok(CandidateOutcome::Counterexample(Counterexample {
                traces,
                total_weight: weight,
                joint_path_cond: cond,
                witness,
            }));
        }
        // the spurious decision is only taken on a current best subset
        if fresh_since_search == 0 && &best.1 + &remaining <= *beta {
            let (indices, weight, cond) = best;
            return Ok(CandidateOutcome::Spurious(SpuriousReport {
                violating: violating.iter().map(|(t, _)| t.clone()).collect(),
                non_violating,
                max_subset: indices.iter().map(|i| violating[*i].0.clone()).collect(),
                split_predicate: cond,
                best_weight: weight,
                enumerated: count,
            }));
        }
        assert!(!exhausted, "exhausted stream must reach a decision: mass accounted exactly");
    }
}

/// Independent validity check of an emitted counterexample: pairwise
/// structural compatibility, satisfiable joint path condition, total
/// weight beyond the threshold, and a concrete execution of every trace
/// from the witness landing in a state violating the post-condition.
pub fn check_counterexample(
    solver: &mut Solver,
    cex: &Counterexample,
    pre: &BExpr,
    post: &BExpr,
    beta: &Weight,
) -> Result<(), String> {
    if cex.traces.is_empty() {
        return Err("empty trace set".into());
    }
    for (i, t1) in cex.traces.iter().enumerate() {
        for t2 in cex.traces.iter().skip(i + 1) {
            if !structurally_compatible(t1, t2) {
                return Err(format!("traces are not structurally compatible: {t1} / {t2}"));
            }
        }
    }
    let total: Weight = cex.traces.iter().map(trace_weight).sum();
    if total != cex.total_weight {
        return Err("reported total weight does not match the traces".into());
    }
    if &total <= beta {
        return Err(format!("total weight {total} does not exceed beta"));
    }
    let joint = crate::pcfa::path_condition_set(&cex.traces, pre, post);
    let model = match solver.check_sat(&joint).map_err(|e| e.to_string())? {
        SatResult::Sat(m) => m,
        SatResult::Unsat => return Err("joint path condition is unsatisfiable".into()),
    };
    // execute every trace from the witness
    let mut v0 = Valuation::empty();
    for (x, value) in &model {
        v0.set(x, value.clone());
    }
    for x in cex.joint_path_cond.vars() {
        if model.get(&x).is_none() {
            v0.set(&x, BigInt::zero());
        }
    }
    for t in &cex.traces {
        let end = eval_trace(t, &v0);
        if end.is_bottom() {
            return Err(format!("witness does not execute trace {t}"));
        }
        if !eval_bexpr(&BExpr::not(post.clone()), &end) {
            return Err(format!("trace {t} does not violate the post-condition"));
        }
    }
    Ok(())
}

// ---- JSON serialisation ----

#[derive(Serialize)]
struct CexDump {
    traces: Vec<CexTraceDump>,
    total_weight: String,
    joint_condition: String,
    witness: BTreeMap<String, String>,
}

#[derive(Serialize)]
struct CexTraceDump {
    statements: Vec<String>,
    weight: String,
}

/// Counterexamples serialise to JSON with weights as `num/den` strings.
pub fn counterexample_to_json(cex: &Counterexample) -> String {
    let dump = CexDump {
        traces: cex
            .traces
            .iter()
            .map(|t| {
                let w = trace_weight(t);
                CexTraceDump {
                    statements: t.statements().iter().map(|s| s.to_string()).collect(),
                    weight: format!("{}/{}", w.numer(), w.denom()),
                }
            })
            .collect(),
        total_weight: format!("{}/{}", cex.total_weight.numer(), cex.total_weight.denom()),
        joint_condition: cex.joint_path_cond.to_string(),
        witness: cex
            .witness
            .iter()
            .map(|(k, v)| (k.clone(), v.to_string()))
            .collect(),
    };
    serde_json::to_string_pretty(&dump).expect("serializable")
}
