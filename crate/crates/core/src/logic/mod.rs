//! Predicates, weakest-precondition transformers, satisfiability, Hoare
//! triples, and trace interpolation strategies.

pub mod lia;
pub mod smt;

pub use smt::{Model, SatResult, Solver, SolverConfig, SolverError};

use crate::pcfa::{path_condition, Trace};
use crate::stmt::Statement;
use crate::syntax::{BExpr, CmpOp, Expr};
use num_bigint::BigInt;
use std::collections::HashMap;

/// The weakest-precondition transformer:
/// assignment substitutes, an assumption contributes an implication,
/// and every other statement is computationally neutral.
pub fn hoare_wp(s: &Statement, q: &BExpr) -> BExpr {
    match s {
        Statement::Assign(x, e) => q.subst(x, e),
        Statement::Assume(b) => BExpr::implies(b.clone(), q.clone()),
        _ => q.clone(),
    }
}

/// The conjunctive variant used for path conditions: an assumption must
/// actually pass, so it contributes a conjunction.
pub fn path_wp(s: &Statement, q: &BExpr) -> BExpr {
    match s {
        Statement::Assign(x, e) => q.subst(x, e),
        Statement::Assume(b) => BExpr::and(b.clone(), q.clone()),
        _ => q.clone(),
    }
}

/// Constant folding and True/False absorption; keeps formulas readable
/// and gives the query cache a canonical key.
pub fn light_simplify(b: &BExpr) -> BExpr {
    match b {
        BExpr::Lit(_) => b.clone(),
        BExpr::Cmp(op, x, y) => {
            if let (Some(xv), Some(yv)) = (const_value(x), const_value(y)) {
                let v = match op {
                    CmpOp::Eq => xv == yv,
                    CmpOp::Ne => xv != yv,
                    CmpOp::Lt => xv < yv,
                    CmpOp::Le => xv <= yv,
                    CmpOp::Gt => xv > yv,
                    CmpOp::Ge => xv >= yv,
                };
                BExpr::Lit(v)
            } else {
                b.clone()
            }
        }
        BExpr::Not(x) => match light_simplify(x) {
            BExpr::Lit(v) => BExpr::Lit(!v),
            BExpr::Not(inner) => *inner,
            other => BExpr::not(other),
        },
        BExpr::And(x, y) => match (light_simplify(x), light_simplify(y)) {
            (BExpr::Lit(false), _) | (_, BExpr::Lit(false)) => BExpr::FALSE,
            (BExpr::Lit(true), other) | (other, BExpr::Lit(true)) => other,
            (a, b) => BExpr::and(a, b),
        },
        BExpr::Or(x, y) => match (light_simplify(x), light_simplify(y)) {
            (BExpr::Lit(true), _) | (_, BExpr::Lit(true)) => BExpr::TRUE,
            (BExpr::Lit(false), other) | (other, BExpr::Lit(false)) => other,
            (a, b) => BExpr::or(a, b),
        },
    }
}

fn const_value(e: &Expr) -> Option<BigInt> {
    match e {
        Expr::Lit(n) => Some(n.clone()),
        Expr::Var(_) => None,
        Expr::Add(a, b) => Some(const_value(a)? + const_value(b)?),
        Expr::Sub(a, b) => Some(const_value(a)? - const_value(b)?),
        Expr::Mul(a, b) => Some(const_value(a)? * const_value(b)?),
    }
}

/// Hoare-validity cache shared by one engine.
#[derive(Default)]
pub struct HoareCache {
    cache: HashMap<(BExpr, Statement, BExpr), bool>,
    pub hits: u64,
}

impl HoareCache {
    pub fn new() -> HoareCache {
        HoareCache::default()
    }

    /// `{p} s {q}` holds iff `p && !wp(s, q)` is unsatisfiable: from every
    /// state satisfying `p`, executing `s` blocks or establishes `q`.
    pub fn hoare_valid(
        &mut self,
        solver: &mut Solver,
        p: &BExpr,
        s: &Statement,
        q: &BExpr,
    ) -> Result<bool, SolverError> {
        let key = (p.clone(), s.clone(), q.clone());
        if let Some(v) = self.cache.get(&key) {
            self.hits += 1;
            return Ok(*v);
        }
        let query = BExpr::and(p.clone(), BExpr::not(hoare_wp(s, q)));
        let valid = solver.is_unsat(&query)?;
        self.cache.insert(key, valid);
        Ok(valid)
    }
}

/// Convenience entry point without a shared cache.
pub fn hoare_valid(
    solver: &mut Solver,
    p: &BExpr,
    s: &Statement,
    q: &BExpr,
) -> Result<bool, SolverError> {
    HoareCache::new().hoare_valid(solver, p, s, q)
}

/// A trace interleaved with predicates: every segment
/// `{phi[i]} stmt[i] {phi[i+1]}` is a valid Hoare triple.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaggedTrace {
    pub trace: Trace,
    /// `trace.len() + 1` predicates.
    pub interpolants: Vec<BExpr>,
}

impl TaggedTrace {
    pub fn new(trace: Trace, interpolants: Vec<BExpr>) -> TaggedTrace {
        assert_eq!(interpolants.len(), trace.len() + 1);
        TaggedTrace {
            trace,
            interpolants,
        }
    }

    /// Checks every segment, plus `pre => phi[0]` and `phi[n] => post`.
    pub fn validate(
        &self,
        solver: &mut Solver,
        cache: &mut HoareCache,
        pre: &BExpr,
        post: &BExpr,
    ) -> Result<bool, SolverError> {
        if !solver.implies(pre, &self.interpolants[0])? {
            return Ok(false);
        }
        let last = self.interpolants.last().expect("non-empty");
        if !solver.implies(last, post)? {
            return Ok(false);
        }
        for (i, s) in self.trace.statements().iter().enumerate() {
            if !cache.hoare_valid(solver, &self.interpolants[i], s, &self.interpolants[i + 1])? {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// How interpolants for a non-violating trace are produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InterpolationStrategy {
    /// Ask the external solver for sequence interpolants; falls back to
    /// the other strategies when unavailable or unusable.
    SolverSequence,
    /// Forward strongest-postcondition pass with unsat-to-False pruning.
    #[default]
    StrongestPost,
    /// Backward weakest-precondition pass; always applicable.
    WpBackward,
}

#[derive(Debug, thiserror::Error)]
pub enum InterpolationError {
    #[error("trace is violating; interpolation requires a non-violating trace")]
    ViolatingTrace,
    #[error(transparent)]
    Solver(#[from] SolverError),
}

/// Produces a tagged trace for a non-violating `trace` under
/// `(pre, post)`. Strategies are tried from the requested one downwards;
/// the wp-backward pass is total on contract-satisfying inputs, so this
/// only fails on solver budget events.
pub fn sequence_interpolants(
    solver: &mut Solver,
    cache: &mut HoareCache,
    trace: &Trace,
    pre: &BExpr,
    post: &BExpr,
    strategy: InterpolationStrategy,
) -> Result<TaggedTrace, InterpolationError> {
    if solver.check_sat(&path_condition(trace, pre, post))?.is_sat() {
        return Err(InterpolationError::ViolatingTrace);
    }
    let attempts: &[InterpolationStrategy] = match strategy {
        InterpolationStrategy::SolverSequence => &[
            InterpolationStrategy::SolverSequence,
            InterpolationStrategy::StrongestPost,
            InterpolationStrategy::WpBackward,
        ],
        InterpolationStrategy::StrongestPost => &[
            InterpolationStrategy::StrongestPost,
            InterpolationStrategy::WpBackward,
        ],
        InterpolationStrategy::WpBackward => &[InterpolationStrategy::WpBackward],
    };
    for attempt in attempts {
        let produced = match attempt {
            InterpolationStrategy::SolverSequence => {
                match solver_sequence(solver, trace, pre, post) {
                    Ok(t) => Some(t),
                    Err(_) => None,
                }
            }
            InterpolationStrategy::StrongestPost => strongest_post_tagging(solver, trace, pre)?,
            InterpolationStrategy::WpBackward => Some(wp_backward_tagging(trace, post)),
        };
        if let Some(tagged) = produced {
            if tagged.validate(solver, cache, pre, post)? {
                return Ok(tagged);
            }
        }
    }
    unreachable!("wp-backward tagging validates on every non-violating trace")
}

/// Backward pass anchored at the post-condition.
fn wp_backward_tagging(trace: &Trace, post: &BExpr) -> TaggedTrace {
    let n = trace.len();
    let mut phis = vec![BExpr::TRUE; n + 1];
    phis[n] = post.clone();
    for i in (0..n).rev() {
        phis[i] = light_simplify(&hoare_wp(&trace.statements()[i], &phis[i + 1]));
    }
    TaggedTrace::new(trace.clone(), phis)
}

/// Forward strongest-postcondition pass. Assignments are projected by
/// quantifier elimination (exact inverse substitution when the assigned
/// variable occurs with a unit coefficient). Every interpolant is pruned
/// to False/True by satisfiability checks, which is what lets infeasible
/// suffixes collapse. Returns None when projection was too weak.
fn strongest_post_tagging(
    solver: &mut Solver,
    trace: &Trace,
    pre: &BExpr,
) -> Result<Option<TaggedTrace>, SolverError> {
    let mut phis = Vec::with_capacity(trace.len() + 1);
    let mut phi = sat_prune(solver, pre.clone())?;
    phis.push(phi.clone());
    for s in trace.statements() {
        phi = match s {
            Statement::Assume(b) => BExpr::and(phi, b.clone()),
            Statement::Assign(x, e) => match strongest_post_assign(&phi, x, e) {
                Some(next) => next,
                None => return Ok(None),
            },
            _ => phi,
        };
        phi = sat_prune(solver, phi)?;
        phis.push(phi.clone());
    }
    Ok(Some(TaggedTrace::new(trace.clone(), phis)))
}

/// sp(phi, x := e): substitute the exact inverse when possible, otherwise
/// project the old value by quantifier elimination (weakened rendering).
fn strongest_post_assign(phi: &BExpr, x: &str, e: &Expr) -> Option<BExpr> {
    let e_lin = lia::Linear::from_expr(e).ok()?;
    let a = e_lin.coeff(x);
    if a == BigInt::from(1) || a == BigInt::from(-1) {
        // new = a*old + r  =>  old = a*(new - r)
        let mut rest = e_lin.clone();
        rest.coeffs.remove(x);
        let inverse = lia::Linear::var(x).sub(&rest).scale(&a);
        Some(phi.subst(x, &inverse.to_expr()))
    } else if a == BigInt::from(0) {
        let old = fresh_name(x, phi, e);
        let renamed = phi.subst(x, &Expr::Var(old.clone()));
        let equality = BExpr::eq(Expr::Var(x.to_string()), e.clone());
        let combined = BExpr::and(renamed, equality);
        lia::project_weaken(&old, &combined).ok()
    } else {
        // new = a*old + r with |a| >= 2: project, accepting weakening
        let old = fresh_name(x, phi, e);
        let renamed = phi.subst(x, &Expr::Var(old.clone()));
        let equality = BExpr::eq(Expr::Var(x.to_string()), e.subst(x, &Expr::Var(old.clone())));
        let combined = BExpr::and(renamed, equality);
        lia::project_weaken(&old, &combined).ok()
    }
}

fn fresh_name(base: &str, phi: &BExpr, e: &Expr) -> String {
    let mut used = phi.vars();
    let mut evars = std::collections::BTreeSet::new();
    e.collect_vars(&mut evars);
    used.extend(evars);
    let mut candidate = format!("{base}!0");
    let mut k = 0u32;
    while used.contains(&candidate) {
        k += 1;
        candidate = format!("{base}!{k}");
    }
    candidate
}

/// Replaces a predicate by False when unsatisfiable and True when valid.
fn sat_prune(solver: &mut Solver, phi: BExpr) -> Result<BExpr, SolverError> {
    let phi = light_simplify(&phi);
    if solver.is_unsat(&phi)? {
        return Ok(BExpr::FALSE);
    }
    if solver.is_unsat(&BExpr::not(phi.clone()))? {
        return Ok(BExpr::TRUE);
    }
    Ok(phi)
}

/// Strategy (a): encode the trace as an SSA path formula, ask the solver
/// for sequence interpolants, and map them back to program variables.
fn solver_sequence(
    solver: &mut Solver,
    trace: &Trace,
    pre: &BExpr,
    post: &BExpr,
) -> Result<TaggedTrace, InterpolationError> {
    if !solver.supports_interpolation() {
        return Err(InterpolationError::Solver(SolverError::Protocol(
            "interpolation not advertised".into(),
        )));
    }
    // SSA versions: var!k is the value of var after its k-th assignment
    let mut version: HashMap<String, u32> = HashMap::new();
    let ssa_var = |var: &str, version: &HashMap<String, u32>| -> Expr {
        let k = version.get(var).copied().unwrap_or(0);
        if k == 0 {
            Expr::Var(var.to_string())
        } else {
            Expr::Var(format!("{var}!{k}"))
        }
    };
    let ssa_bexpr = |b: &BExpr, version: &HashMap<String, u32>| -> BExpr {
        let mut out = b.clone();
        for v in b.vars() {
            out = out.subst(&v, &ssa_var(&v, version));
        }
        out
    };
    let ssa_expr = |e: &Expr, version: &HashMap<String, u32>| -> Expr {
        let mut vs = std::collections::BTreeSet::new();
        e.collect_vars(&mut vs);
        let mut out = e.clone();
        for v in vs {
            out = out.subst(&v, &ssa_var(&v, version));
        }
        out
    };

    let mut groups: Vec<BExpr> = vec![pre.clone()];
    let mut cuts: Vec<HashMap<String, u32>> = vec![version.clone()];
    for s in trace.statements() {
        let g = match s {
            Statement::Assume(b) => ssa_bexpr(b, &version),
            Statement::Assign(x, e) => {
                let rhs = ssa_expr(e, &version);
                let next = version.get(x).copied().unwrap_or(0) + 1;
                version.insert(x.clone(), next);
                BExpr::eq(ssa_var(x, &version), rhs)
            }
            _ => BExpr::TRUE,
        };
        groups.push(g);
        cuts.push(version.clone());
    }
    // the final group asserts the violation; the whole conjunction must be
    // unsat because the trace is non-violating
    groups.push(ssa_bexpr(&BExpr::not(post.clone()), &version));

    let raw = solver.sequence_interpolants_external(&groups)?;
    // n+2 groups yield n+1 interpolants, one per cut position
    if raw.len() != trace.len() + 1 {
        return Err(InterpolationError::Solver(SolverError::Protocol(format!(
            "expected {} interpolants, got {}",
            trace.len() + 1,
            raw.len()
        ))));
    }
    // map SSA names back to program variables; an interpolant mentioning a
    // non-live version cannot be used
    let mut phis = Vec::with_capacity(raw.len());
    for (ip, cut) in raw.iter().zip(cuts.iter()) {
        let mut out = ip.clone();
        for v in ip.vars() {
            if let Some((base, k)) = v.rsplit_once('!') {
                let k: u32 = k.parse().map_err(|_| {
                    InterpolationError::Solver(SolverError::Protocol(format!(
                        "unexpected variable `{v}` in interpolant"
                    )))
                })?;
                if cut.get(base).copied().unwrap_or(0) != k {
                    return Err(InterpolationError::Solver(SolverError::Protocol(format!(
                        "interpolant mentions non-live version `{v}`"
                    ))));
                }
                out = out.subst(&v, &Expr::Var(base.to_string()));
            } else if cut.get(&v).copied().unwrap_or(0) != 0 {
                return Err(InterpolationError::Solver(SolverError::Protocol(format!(
                    "interpolant mentions non-live version `{v}`"
                ))));
            }
        }
        phis.push(light_simplify(&out));
    }
    Ok(TaggedTrace::new(trace.clone(), phis))
}
