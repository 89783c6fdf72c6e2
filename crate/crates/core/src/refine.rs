//! Refinement-automaton construction: Floyd-Hoare generalisation of
//! non-violating traces, ordered finite generalisation of violating
//! traces, incremental refinement updates, pre-condition splitting, and
//! exact value-analysis refinement for finite-state programs.

use crate::automata::{complement_over, union, AlphabetCtx};
use crate::cexcheck::SpuriousReport;
use crate::logic::{hoare_wp, light_simplify, HoareCache, Solver, SolverError, TaggedTrace};
use crate::pcfa::{GeneralPcfa, Loc, Pcfa, Trace};
use crate::stmt::{Statement, Valuation};
use crate::syntax::{BExpr, Program};
use num_bigint::BigInt;
use std::collections::{BTreeMap, BTreeSet};

/// A general automaton whose locations carry predicates such that every
/// transition is a valid Hoare triple; it contains no violating trace.
#[derive(Debug, Clone)]
pub struct FloydHoareAutomaton {
    pub base: GeneralPcfa,
    pub labels: Vec<BExpr>,
}

/// A Floyd-Hoare automaton with strictly increasing location priorities
/// along transitions: acyclic, hence with a finite language.
#[derive(Debug, Clone)]
pub struct OrderedFloydHoareAutomaton {
    pub fh: FloydHoareAutomaton,
    pub priority: Vec<usize>,
}

/// Mutually exclusive split conditions whose disjunction is the
/// pre-condition.
#[derive(Debug, Clone)]
pub struct SplitSet {
    pub members: Vec<BExpr>,
}

impl SplitSet {
    /// Pairwise conjunctions unsatisfiable, disjunction equivalent to
    /// `pre`.
    pub fn check_invariants(&self, solver: &mut Solver, pre: &BExpr) -> Result<(), String> {
        for (i, a) in self.members.iter().enumerate() {
            for b in self.members.iter().skip(i + 1) {
                let both = BExpr::and(a.clone(), b.clone());
                if solver.check_sat(&both).map_err(|e| e.to_string())?.is_sat() {
                    return Err(format!("split members overlap: {a} and {b}"));
                }
            }
        }
        let disjunction = self
            .members
            .iter()
            .cloned()
            .reduce(BExpr::or)
            .unwrap_or(BExpr::FALSE);
        if !solver
            .equivalent(&disjunction, pre)
            .map_err(|e| e.to_string())?
        {
            return Err("split members do not cover the pre-condition".into());
        }
        Ok(())
    }
}

/// The evolving refinement automaton with its split conditions: every
/// edge from the initial location is one split assumption and never
/// returns to the initial location.
#[derive(Debug, Clone)]
pub struct RefinementState {
    pub v: GeneralPcfa,
    pub splits: SplitSet,
}

impl RefinementState {
    pub fn split_statements(&self) -> Vec<Statement> {
        self.splits
            .members
            .iter()
            .map(|m| Statement::assume(m.clone()))
            .collect()
    }

    /// Restores the split-edge normal form: a fresh initial location
    /// whose out-edges are exactly the one-symbol derivatives by the
    /// split assumptions.
    fn rebuild_split_form(mut v: GeneralPcfa, splits: &SplitSet) -> GeneralPcfa {
        if v.ends.is_empty() {
            return v;
        }
        let fresh = v.num_locs;
        let mut entry = Vec::new();
        for m in &splits.members {
            let sym = Statement::assume(m.clone());
            for (from, s, to) in &v.delta {
                if *from == v.init && *s == sym {
                    entry.push((fresh, sym.clone(), *to));
                }
            }
        }
        v.num_locs += 1;
        v.delta.extend(entry);
        v.init = fresh;
        debug_assert!(!v.ends.contains(&fresh));
        v
    }
}

/// The trivial refinement automaton: one split assumption followed by
/// anything, `assume(pre) . Sigma*`.
pub fn initial_refinement(alphabet: &BTreeSet<Statement>, pre: &BExpr) -> RefinementState {
    assert!(
        !alphabet.is_empty(),
        "programs always contribute at least one statement"
    );
    let split_stmt = Statement::assume(pre.clone());
    let mut full = alphabet.clone();
    full.insert(split_stmt.clone());
    let mut delta: BTreeSet<(Loc, Statement, Loc)> = BTreeSet::new();
    delta.insert((0, split_stmt, 1));
    for s in &full {
        delta.insert((1, s.clone(), 1));
    }
    RefinementState {
        v: GeneralPcfa {
            num_locs: 2,
            init: 0,
            ends: BTreeSet::from([1]),
            alphabet: full,
            delta,
        },
        splits: SplitSet {
            members: vec![pre.clone()],
        },
    }
}

/// Prefixes the program with a fresh initial location carrying one
/// assumption edge per split condition.
pub fn sync_program(a: &Pcfa, splits: &SplitSet) -> Pcfa {
    let fresh = a.num_locs;
    let mut alphabet = a.alphabet.clone();
    let mut delta = a.delta.clone();
    for m in &splits.members {
        let sym = Statement::assume(m.clone());
        alphabet.insert(sym.clone());
        delta.insert((fresh, sym), a.init);
    }
    let out = Pcfa {
        num_locs: a.num_locs + 1,
        init: fresh,
        end: a.end,
        alphabet,
        delta,
    };
    debug_assert_eq!(out.check_invariants(), Ok(()));
    out
}

/// Generalises a tagged non-violating trace: locations are the distinct
/// interpolants, and every Hoare-valid transition over the alphabet is
/// added.
pub fn generalize_nonviolating(
    solver: &mut Solver,
    cache: &mut HoareCache,
    tagged: &TaggedTrace,
    alphabet: &BTreeSet<Statement>,
) -> Result<FloydHoareAutomaton, SolverError> {
    let mut labels: Vec<BExpr> = Vec::new();
    let mut index: BTreeMap<BExpr, usize> = BTreeMap::new();
    for phi in &tagged.interpolants {
        index.entry(phi.clone()).or_insert_with(|| {
            labels.push(phi.clone());
            labels.len() - 1
        });
    }
    let init = index[&tagged.interpolants[0]];
    let end = index[tagged.interpolants.last().expect("non-empty")];
    let mut delta = BTreeSet::new();
    for (from, p) in labels.iter().enumerate() {
        for (to, q) in labels.iter().enumerate() {
            for s in alphabet {
                if cache.hoare_valid(solver, p, s, q)? {
                    delta.insert((from, s.clone(), to));
                }
            }
        }
    }
    let base = GeneralPcfa {
        num_locs: labels.len(),
        init,
        ends: BTreeSet::from([end]),
        alphabet: alphabet.clone(),
        delta,
    };
    debug_assert!(
        base.accepts(&tagged.trace),
        "the generalisation must accept its own trace"
    );
    Ok(FloydHoareAutomaton { base, labels })
}

/// Finite generalisation of a violating trace: one location per trace
/// position tagged by the backward weakest-precondition pass anchored at
/// the negated post-condition, with strictly increasing priorities.
pub fn generalize_violating_finite(
    solver: &mut Solver,
    cache: &mut HoareCache,
    trace: &Trace,
    pre: &BExpr,
    post: &BExpr,
    alphabet: &BTreeSet<Statement>,
) -> Result<OrderedFloydHoareAutomaton, SolverError> {
    let n = trace.len();
    let mut labels = vec![BExpr::TRUE; n + 1];
    labels[n] = light_simplify(&BExpr::not(post.clone()));
    for i in (0..n).rev() {
        labels[i] = light_simplify(&hoare_wp(&trace.statements()[i], &labels[i + 1]));
    }
    labels[0] = light_simplify(&BExpr::and(pre.clone(), labels[0].clone()));
    let mut delta = BTreeSet::new();
    for from in 0..=n {
        for to in (from + 1)..=n {
            for s in alphabet {
                if cache.hoare_valid(solver, &labels[from], s, &labels[to])? {
                    delta.insert((from, s.clone(), to));
                }
            }
        }
    }
    let base = GeneralPcfa {
        num_locs: n + 1,
        init: 0,
        ends: BTreeSet::from([n]),
        alphabet: alphabet.clone(),
        delta,
    };
    debug_assert!(base.accepts(trace));
    Ok(OrderedFloydHoareAutomaton {
        fh: FloydHoareAutomaton {
            base,
            labels,
        },
        priority: (0..=n).collect(),
    })
}

/// `V <- complement(complement(V) | union of the Qs)`, then split-form
/// normalisation. The language only shrinks.
pub fn update_refinement(state: &RefinementState, qs: &[GeneralPcfa]) -> RefinementState {
    if qs.is_empty() {
        return state.clone();
    }
    let mut sets: Vec<&BTreeSet<Statement>> = vec![&state.v.alphabet];
    for q in qs {
        sets.push(&q.alphabet);
    }
    let ctx = AlphabetCtx::from_sets(sets);
    let mut acc = complement_over(&state.v, &ctx);
    for q in qs {
        acc = union(&acc, q);
    }
    let raw = complement_over(&acc, &ctx);
    let v = RefinementState::rebuild_split_form(raw, &state.splits);
    RefinementState {
        v,
        splits: state.splits.clone(),
    }
}

/// Result of splitting a pre-condition.
pub enum SplitOutcome {
    /// One refined side is unsatisfiable: splitting would be vacuous.
    NoOp,
    Applied {
        state: RefinementState,
        /// enumerated traces relabelled with the refined assumptions
        relabeled_max_subset: Vec<Trace>,
        relabeled_others: Vec<Trace>,
        /// the candidate with its initial assumption edge duplicated
        candidate: Pcfa,
    },
}

/// Replaces the split condition of a spurious candidate by its
/// conjunction with the extracted path condition and with its negation,
/// relabelling the refinement automaton, the candidate, and the
/// enumerated traces.
pub fn apply_split(
    solver: &mut Solver,
    state: &RefinementState,
    spurious_split: &BExpr,
    extracted: &BExpr,
    report: &SpuriousReport,
    cand: &Pcfa,
) -> Result<SplitOutcome, SolverError> {
    assert!(
        state.splits.members.contains(spurious_split),
        "the spurious split must be a current member"
    );
    let with = light_simplify(&BExpr::and(spurious_split.clone(), extracted.clone()));
    let without = light_simplify(&BExpr::and(
        spurious_split.clone(),
        BExpr::not(extracted.clone()),
    ));
    if !solver.check_sat(&with)?.is_sat() || !solver.check_sat(&without)?.is_sat() {
        return Ok(SplitOutcome::NoOp);
    }
    let old_sym = Statement::assume(spurious_split.clone());
    let syms = [Statement::assume(with.clone()), Statement::assume(without.clone())];

    // splits: replace the member in place
    let mut members = Vec::new();
    for m in &state.splits.members {
        if m == spurious_split {
            members.push(with.clone());
            members.push(without.clone());
        } else {
            members.push(m.clone());
        }
    }
    let splits = SplitSet { members };

    // refinement automaton: duplicate the initial edge
    let mut v = state.v.clone();
    let olds: Vec<(Loc, Statement, Loc)> = v
        .delta
        .iter()
        .filter(|(from, s, _)| *from == v.init && *s == old_sym)
        .cloned()
        .collect();
    for (from, _, to) in &olds {
        v.delta.remove(&(*from, old_sym.clone(), *to));
        for s in &syms {
            v.delta.insert((*from, s.clone(), *to));
        }
    }
    v.alphabet.extend(syms.iter().cloned());

    // candidate: the same surgery on its initial assumption edge
    let mut candidate = cand.clone();
    let old_cand: Vec<(Loc, Loc)> = candidate
        .delta
        .iter()
        .filter(|((from, s), _)| *from == candidate.init && *s == old_sym)
        .map(|((from, _), to)| (*from, *to))
        .collect();
    for (from, to) in &old_cand {
        candidate.delta.remove(&(*from, old_sym.clone()));
        for s in &syms {
            candidate.delta.insert((*from, s.clone()), *to);
        }
    }
    candidate.alphabet.extend(syms.iter().cloned());

    // traces: the maximum-weight subset keeps the extracted condition,
    // every other enumerated trace gets its negation
    let relabel = |t: &Trace, s: &Statement| -> Trace {
        assert_eq!(
            t.statements()[0], old_sym,
            "enumerated traces start with the candidate's split assumption"
        );
        t.with_first(s.clone())
    };
    let in_subset: BTreeSet<&Trace> = report.max_subset.iter().collect();
    let relabeled_max_subset: Vec<Trace> = report
        .max_subset
        .iter()
        .map(|t| relabel(t, &syms[0]))
        .collect();
    let mut relabeled_others = Vec::new();
    for t in report
        .violating
        .iter()
        .filter(|t| !in_subset.contains(t))
    {
        relabeled_others.push(relabel(t, &syms[1]));
    }
    for (t, _) in &report.non_violating {
        relabeled_others.push(relabel(t, &syms[1]));
    }
    Ok(SplitOutcome::Applied {
        state: RefinementState { v, splits },
        relabeled_max_subset,
        relabeled_others,
        candidate,
    })
}

// ---- value analysis ----

/// Result of the round-robin value analysis.
pub enum ValueAnalysisResult {
    /// Exact refinement automaton over explicit valuations.
    Refinement(GeneralPcfa),
    /// The program (or its pre-condition) has too many states.
    Exhausted,
}

type PartialVal = BTreeMap<String, BigInt>;

fn eval_partial(s: &Statement, v: &PartialVal) -> Option<Option<PartialVal>> {
    // outer None: a read of an undefined variable (analysis must bail);
    // inner None: the statement blocks
    let read_expr = |e: &crate::syntax::Expr, v: &PartialVal| -> Option<BigInt> {
        let mut vars = BTreeSet::new();
        e.collect_vars(&mut vars);
        if vars.iter().any(|x| !v.contains_key(x)) {
            return None;
        }
        let mut val = Valuation::empty();
        for (k, value) in v {
            val.set(k, value.clone());
        }
        crate::stmt::eval_expr(e, &val)
    };
    match s {
        Statement::Skip | Statement::ProbLeft(_) | Statement::ProbRight(_) | Statement::Nondet(_) => {
            Some(Some(v.clone()))
        }
        Statement::Assign(x, e) => match read_expr(e, v) {
            Some(value) => {
                let mut next = v.clone();
                next.insert(x.clone(), value);
                Some(Some(next))
            }
            None => None,
        },
        Statement::Assume(b) => {
            let mut vars = BTreeSet::new();
            b.collect_vars(&mut vars);
            if vars.iter().any(|x| !v.contains_key(x)) {
                return None;
            }
            let mut val = Valuation::empty();
            for (k, value) in v {
                val.set(k, value.clone());
            }
            if crate::stmt::eval_bexpr(b, &val) {
                Some(Some(v.clone()))
            } else {
                Some(None)
            }
        }
    }
}

/// Variables read before being written on some path (the analysis seeds
/// its initial valuations over exactly these plus the free variables of
/// the pre- and post-conditions).
fn live_at_entry(a: &Pcfa, post: &BExpr) -> BTreeSet<String> {
    let mut live: Vec<BTreeSet<String>> = vec![BTreeSet::new(); a.num_locs];
    live[a.end] = post.vars();
    loop {
        let mut changed = false;
        for ((from, stmt), to) in &a.delta {
            let mut incoming: BTreeSet<String> = live[*to].clone();
            match stmt {
                Statement::Assign(x, e) => {
                    incoming.remove(x);
                    e.collect_vars(&mut incoming);
                }
                Statement::Assume(b) => {
                    b.collect_vars(&mut incoming);
                }
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

/// Round-robin data-flow analysis: computes all valuations reachable at
/// each location from every pre-condition model, then mirrors the
/// automaton over valuations. The ending set holds the valuations
/// violating the post-condition, making the refined structural bound
/// exact for finite-state programs.
pub fn value_analysis_refine(
    solver: &mut Solver,
    a: &Pcfa,
    pre: &BExpr,
    post: &BExpr,
    state_limit: usize,
) -> Result<ValueAnalysisResult, SolverError> {
    let mut seed_vars = live_at_entry(a, post);
    seed_vars.extend(pre.vars());

    // enumerate pre-condition models over the seed variables
    let mut seeds: Vec<PartialVal> = Vec::new();
    let mut formula = pre.clone();
    loop {
        match solver.check_sat(&formula)? {
            crate::logic::SatResult::Unsat => break,
            crate::logic::SatResult::Sat(model) => {
                if seeds.len() >= state_limit {
                    return Ok(ValueAnalysisResult::Exhausted);
                }
                let mut v = PartialVal::new();
                let mut point = BExpr::TRUE;
                for x in &seed_vars {
                    let value = model.get(x).cloned().unwrap_or_else(|| BigInt::from(0));
                    v.insert(x.clone(), value.clone());
                    point = BExpr::and(
                        point,
                        BExpr::cmp(
                            crate::syntax::CmpOp::Eq,
                            crate::syntax::Expr::Var(x.clone()),
                            crate::syntax::Expr::Lit(value),
                        ),
                    );
                }
                if seed_vars.is_empty() {
                    // ground satisfiable pre-condition: a single seed
                    seeds.push(v);
                    break;
                }
                seeds.push(v);
                formula = BExpr::and(formula, BExpr::not(point));
            }
        }
    }

    // round-robin fixpoint per location
    let mut sets: Vec<BTreeSet<PartialVal>> = vec![BTreeSet::new(); a.num_locs];
    sets[a.init].extend(seeds.iter().cloned());
    let mut total: usize = seeds.len();
    loop {
        let mut changed = false;
        for ((from, stmt), to) in &a.delta {
            let sources: Vec<PartialVal> = sets[*from].iter().cloned().collect();
            for v in sources {
                match eval_partial(stmt, &v) {
                    None => return Ok(ValueAnalysisResult::Exhausted),
                    Some(None) => {}
                    Some(Some(next)) => {
                        if sets[*to].insert(next) {
                            total += 1;
                            if total > state_limit {
                                return Ok(ValueAnalysisResult::Exhausted);
                            }
                            changed = true;
                        }
                    }
                }
            }
        }
        if !changed {
            break;
        }
    }

    // the refinement automaton over valuations
    let mut nodes: BTreeMap<PartialVal, usize> = BTreeMap::new();
    for set in &sets {
        for v in set {
            let next = nodes.len() + 1; // 0 is the fresh initial node
            nodes.entry(v.clone()).or_insert(next);
        }
    }
    let mut delta: BTreeSet<(Loc, Statement, Loc)> = BTreeSet::new();
    for ((from, stmt), to) in &a.delta {
        for v in &sets[*from] {
            if let Some(Some(next)) = eval_partial(stmt, v) {
                if sets[*to].contains(&next) {
                    delta.insert((nodes[v], stmt.clone(), nodes[&next]));
                }
            }
        }
    }
    // entry edges from the fresh initial node mirror each seed
    for ((from, stmt), _) in &a.delta {
        if *from != a.init {
            continue;
        }
        for seed in &seeds {
            if let Some(Some(next)) = eval_partial(stmt, seed) {
                if let Some(id) = nodes.get(&next) {
                    delta.insert((0, stmt.clone(), *id));
                }
            }
        }
    }
    let post_vars = post.vars();
    let ends: BTreeSet<Loc> = nodes
        .iter()
        .filter(|(v, _)| {
            if !post_vars.iter().all(|x| v.contains_key(x)) {
                return false;
            }
            let mut val = Valuation::empty();
            for (k, value) in v.iter() {
                val.set(k, value.clone());
            }
            crate::stmt::eval_bexpr(&BExpr::not(post.clone()), &val)
        })
        .map(|(_, id)| *id)
        .collect();
    Ok(ValueAnalysisResult::Refinement(GeneralPcfa {
        num_locs: nodes.len() + 1,
        init: 0,
        ends,
        alphabet: a.alphabet.clone(),
        delta,
    }))
}

/// Compiles and syncs a task program in one step (used by tests).
pub fn synced_program_automaton(p: &Program, splits: &SplitSet) -> Pcfa {
    sync_program(&crate::pcfa::program_to_pcfa(p), splits)
}
