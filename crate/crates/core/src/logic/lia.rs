//! Complete decision procedure for quantifier-free linear integer
//! arithmetic: Cooper's quantifier elimination over exact integers, with
//! model extraction by staged back-substitution.

use crate::syntax::{BExpr, CmpOp, Expr};
use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use std::collections::{BTreeMap, BTreeSet};

/// Guard against pathological divisor blow-up; elimination aborts with an
/// `Unknown` outcome past this point rather than looping for hours.
const MAX_DIVISOR: u64 = 1 << 22;

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum LiaError {
    #[error("nonlinear term: product of two variable expressions")]
    Nonlinear,
    #[error("divisor least common multiple exceeds the tractable bound")]
    DivisorOverflow,
}

/// Linear combination of variables plus a constant.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Linear {
    pub coeffs: BTreeMap<String, BigInt>,
    pub constant: BigInt,
}

impl Linear {
    pub fn constant(c: BigInt) -> Linear {
        Linear {
            coeffs: BTreeMap::new(),
            constant: c,
        }
    }

    pub fn var(x: &str) -> Linear {
        Linear {
            coeffs: BTreeMap::from([(x.to_string(), BigInt::one())]),
            constant: BigInt::zero(),
        }
    }

    fn normalize(mut self) -> Linear {
        self.coeffs.retain(|_, c| !c.is_zero());
        self
    }

    pub fn add(&self, other: &Linear) -> Linear {
        let mut coeffs = self.coeffs.clone();
        for (v, c) in &other.coeffs {
            *coeffs.entry(v.clone()).or_insert_with(BigInt::zero) += c;
        }
        Linear {
            coeffs,
            constant: &self.constant + &other.constant,
        }
        .normalize()
    }

    pub fn neg(&self) -> Linear {
        Linear {
            coeffs: self.coeffs.iter().map(|(v, c)| (v.clone(), -c)).collect(),
            constant: -&self.constant,
        }
    }

    pub fn sub(&self, other: &Linear) -> Linear {
        self.add(&other.neg())
    }

    pub fn scale(&self, k: &BigInt) -> Linear {
        if k.is_zero() {
            return Linear::constant(BigInt::zero());
        }
        Linear {
            coeffs: self.coeffs.iter().map(|(v, c)| (v.clone(), c * k)).collect(),
            constant: &self.constant * k,
        }
    }

    pub fn coeff(&self, var: &str) -> BigInt {
        self.coeffs.get(var).cloned().unwrap_or_else(BigInt::zero)
    }

    pub fn is_ground(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Replaces `var` by a whole linear term.
    pub fn subst(&self, var: &str, term: &Linear) -> Linear {
        let c = self.coeff(var);
        if c.is_zero() {
            return self.clone();
        }
        let mut without = self.clone();
        without.coeffs.remove(var);
        without.add(&term.scale(&c))
    }

    pub fn from_expr(e: &Expr) -> Result<Linear, LiaError> {
        match e {
            Expr::Lit(n) => Ok(Linear::constant(n.clone())),
            Expr::Var(x) => Ok(Linear::var(x)),
            Expr::Add(a, b) => Ok(Linear::from_expr(a)?.add(&Linear::from_expr(b)?)),
            Expr::Sub(a, b) => Ok(Linear::from_expr(a)?.sub(&Linear::from_expr(b)?)),
            Expr::Mul(a, b) => {
                let la = Linear::from_expr(a)?;
                let lb = Linear::from_expr(b)?;
                if la.is_ground() {
                    Ok(lb.scale(&la.constant))
                } else if lb.is_ground() {
                    Ok(la.scale(&lb.constant))
                } else {
                    Err(LiaError::Nonlinear)
                }
            }
        }
    }

    /// Renders the term back as an expression, `pos - neg + constant`.
    pub fn to_expr(&self) -> Expr {
        let mut acc: Option<Expr> = None;
        let mut subtract: Vec<Expr> = Vec::new();
        for (v, c) in &self.coeffs {
            let (mag, negative) = if c.is_negative() {
                (-c.clone(), true)
            } else {
                (c.clone(), false)
            };
            let term = if mag.is_one() {
                Expr::Var(v.clone())
            } else {
                Expr::mul(Expr::Lit(mag), Expr::Var(v.clone()))
            };
            if negative {
                subtract.push(term);
            } else {
                acc = Some(match acc {
                    None => term,
                    Some(prev) => Expr::add(prev, term),
                });
            }
        }
        if !self.constant.is_zero() {
            if self.constant.is_negative() {
                subtract.push(Expr::Lit(-self.constant.clone()));
            } else {
                let term = Expr::Lit(self.constant.clone());
                acc = Some(match acc {
                    None => term,
                    Some(prev) => Expr::add(prev, term),
                });
            }
        }
        let mut out = acc.unwrap_or_else(|| Expr::lit(0));
        for t in subtract {
            out = Expr::sub(out, t);
        }
        out
    }

    pub fn vars(&self) -> impl Iterator<Item = &String> {
        self.coeffs.keys()
    }
}

/// Negation-free normal form over linear atoms.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum F {
    True,
    False,
    /// t <= 0
    Le(Linear),
    /// t = 0
    Eq(Linear),
    /// t != 0
    Ne(Linear),
    /// d divides t (d >= 2)
    Dvd(BigInt, Linear),
    /// d does not divide t
    Ndvd(BigInt, Linear),
    And(Vec<F>),
    Or(Vec<F>),
}

impl F {
    pub fn and(fs: Vec<F>) -> F {
        simplify(F::And(fs))
    }

    pub fn or(fs: Vec<F>) -> F {
        simplify(F::Or(fs))
    }

    pub fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            F::True | F::False => {}
            F::Le(t) | F::Eq(t) | F::Ne(t) | F::Dvd(_, t) | F::Ndvd(_, t) => {
                out.extend(t.vars().cloned());
            }
            F::And(fs) | F::Or(fs) => {
                for f in fs {
                    f.collect_vars(out);
                }
            }
        }
    }

    fn contains_var(&self, var: &str) -> bool {
        match self {
            F::True | F::False => false,
            F::Le(t) | F::Eq(t) | F::Ne(t) | F::Dvd(_, t) | F::Ndvd(_, t) => {
                !t.coeff(var).is_zero()
            }
            F::And(fs) | F::Or(fs) => fs.iter().any(|f| f.contains_var(var)),
        }
    }

    fn subst(&self, var: &str, term: &Linear) -> F {
        match self {
            F::True | F::False => self.clone(),
            F::Le(t) => F::Le(t.subst(var, term)),
            F::Eq(t) => F::Eq(t.subst(var, term)),
            F::Ne(t) => F::Ne(t.subst(var, term)),
            F::Dvd(d, t) => F::Dvd(d.clone(), t.subst(var, term)),
            F::Ndvd(d, t) => F::Ndvd(d.clone(), t.subst(var, term)),
            F::And(fs) => F::And(fs.iter().map(|f| f.subst(var, term)).collect()),
            F::Or(fs) => F::Or(fs.iter().map(|f| f.subst(var, term)).collect()),
        }
    }
}

/// Translates a boolean expression into negation-free form. `positive`
/// tracks the polarity while negations are pushed inward.
pub fn from_bexpr(b: &BExpr, positive: bool) -> Result<F, LiaError> {
    Ok(match b {
        BExpr::Lit(v) => {
            if *v == positive {
                F::True
            } else {
                F::False
            }
        }
        BExpr::Not(inner) => from_bexpr(inner, !positive)?,
        BExpr::And(x, y) => {
            let fs = vec![from_bexpr(x, positive)?, from_bexpr(y, positive)?];
            if positive {
                F::And(fs)
            } else {
                F::Or(fs)
            }
        }
        BExpr::Or(x, y) => {
            let fs = vec![from_bexpr(x, positive)?, from_bexpr(y, positive)?];
            if positive {
                F::Or(fs)
            } else {
                F::And(fs)
            }
        }
        BExpr::Cmp(op, a, c) => {
            let d = Linear::from_expr(a)?.sub(&Linear::from_expr(c)?);
            // d OP 0 in the positive polarity
            let eff = if positive {
                *op
            } else {
                match op {
                    CmpOp::Eq => CmpOp::Ne,
                    CmpOp::Ne => CmpOp::Eq,
                    CmpOp::Lt => CmpOp::Ge,
                    CmpOp::Le => CmpOp::Gt,
                    CmpOp::Gt => CmpOp::Le,
                    CmpOp::Ge => CmpOp::Lt,
                }
            };
            match eff {
                CmpOp::Eq => F::Eq(d),
                CmpOp::Ne => F::Ne(d),
                // d < 0  <=>  d + 1 <= 0 over the integers
                CmpOp::Lt => F::Le(d.add(&Linear::constant(BigInt::one()))),
                CmpOp::Le => F::Le(d),
                CmpOp::Gt => F::Le(d.neg().add(&Linear::constant(BigInt::one()))),
                CmpOp::Ge => F::Le(d.neg()),
            }
        }
    })
}

/// Renders back into a boolean expression. Divisibility atoms have no
/// surface form; with `weaken_divisibility` they become `True`, which
/// over-approximates (only sound where a weaker predicate is acceptable).
pub fn to_bexpr(f: &F, weaken_divisibility: bool) -> Option<BExpr> {
    Some(match f {
        F::True => BExpr::TRUE,
        F::False => BExpr::FALSE,
        F::Le(t) => BExpr::cmp(CmpOp::Le, t.to_expr(), Expr::lit(0)),
        F::Eq(t) => BExpr::cmp(CmpOp::Eq, t.to_expr(), Expr::lit(0)),
        F::Ne(t) => BExpr::cmp(CmpOp::Ne, t.to_expr(), Expr::lit(0)),
        F::Dvd(..) | F::Ndvd(..) => {
            if weaken_divisibility {
                BExpr::TRUE
            } else {
                return None;
            }
        }
        F::And(fs) => {
            let mut parts = Vec::new();
            for f in fs {
                parts.push(to_bexpr(f, weaken_divisibility)?);
            }
            match parts.len() {
                0 => BExpr::TRUE,
                _ => {
                    let mut it = parts.into_iter();
                    let first = it.next().expect("non-empty");
                    it.fold(first, BExpr::and)
                }
            }
        }
        F::Or(fs) => {
            let mut parts = Vec::new();
            for f in fs {
                parts.push(to_bexpr(f, weaken_divisibility)?);
            }
            match parts.len() {
                0 => BExpr::FALSE,
                _ => {
                    let mut it = parts.into_iter();
                    let first = it.next().expect("non-empty");
                    it.fold(first, BExpr::or)
                }
            }
        }
    })
}

/// Constant folding, flattening, absorption and deduplication.
pub fn simplify(f: F) -> F {
    match f {
        F::Le(t) => {
            if t.is_ground() {
                if t.constant <= BigInt::zero() {
                    F::True
                } else {
                    F::False
                }
            } else {
                // divide by the gcd of the coefficients; over the integers
                // the constant tightens by flooring
                let g = t
                    .coeffs
                    .values()
                    .fold(BigInt::zero(), |acc, c| acc.gcd(c));
                if g > BigInt::one() {
                    let coeffs = t
                        .coeffs
                        .iter()
                        .map(|(v, c)| (v.clone(), c / &g))
                        .collect();
                    let constant = t.constant.div_floor(&g)
                        + if t.constant.mod_floor(&g).is_zero() {
                            BigInt::zero()
                        } else {
                            BigInt::one()
                        };
                    F::Le(Linear { coeffs, constant })
                } else {
                    F::Le(t)
                }
            }
        }
        F::Eq(t) => {
            if t.is_ground() {
                if t.constant.is_zero() {
                    F::True
                } else {
                    F::False
                }
            } else {
                let g = t
                    .coeffs
                    .values()
                    .fold(BigInt::zero(), |acc, c| acc.gcd(c));
                if g > BigInt::one() && !t.constant.mod_floor(&g).is_zero() {
                    F::False
                } else {
                    F::Eq(t)
                }
            }
        }
        F::Ne(t) => {
            if t.is_ground() {
                if t.constant.is_zero() {
                    F::False
                } else {
                    F::True
                }
            } else {
                F::Ne(t)
            }
        }
        F::Dvd(d, t) => {
            if d.is_one() {
                F::True
            } else if t.is_ground() {
                if t.constant.mod_floor(&d).is_zero() {
                    F::True
                } else {
                    F::False
                }
            } else {
                F::Dvd(d, t)
            }
        }
        F::Ndvd(d, t) => match simplify(F::Dvd(d, t)) {
            F::True => F::False,
            F::False => F::True,
            F::Dvd(d, t) => F::Ndvd(d, t),
            _ => unreachable!(),
        },
        F::And(fs) => {
            let mut out: Vec<F> = Vec::new();
            let mut seen = BTreeSet::new();
            for f in fs {
                match simplify(f) {
                    F::True => {}
                    F::False => return F::False,
                    F::And(inner) => {
                        for g in inner {
                            if seen.insert(g.clone()) {
                                out.push(g);
                            }
                        }
                    }
                    g => {
                        if seen.insert(g.clone()) {
                            out.push(g);
                        }
                    }
                }
            }
            match out.len() {
                0 => F::True,
                1 => out.pop().expect("one element"),
                _ => F::And(out),
            }
        }
        F::Or(fs) => {
            let mut out: Vec<F> = Vec::new();
            let mut seen = BTreeSet::new();
            for f in fs {
                match simplify(f) {
                    F::False => {}
                    F::True => return F::True,
                    F::Or(inner) => {
                        for g in inner {
                            if seen.insert(g.clone()) {
                                out.push(g);
                            }
                        }
                    }
                    g => {
                        if seen.insert(g.clone()) {
                            out.push(g);
                        }
                    }
                }
            }
            match out.len() {
                0 => F::False,
                1 => out.pop().expect("one element"),
                _ => F::Or(out),
            }
        }
        other => other,
    }
}

fn ground_eval(f: &F) -> bool {
    match simplify(f.clone()) {
        F::True => true,
        F::False => false,
        other => panic!("ground evaluation of a formula with free variables: {other:?}"),
    }
}

/// Expands equalities and disequalities over `var` into inequalities so
/// that elimination only deals with `Le`, `Dvd` and `Ndvd` atoms.
fn expand_eq_ne(f: &F, var: &str) -> F {
    match f {
        F::Eq(t) if !t.coeff(var).is_zero() => {
            F::And(vec![F::Le(t.clone()), F::Le(t.neg())])
        }
        F::Ne(t) if !t.coeff(var).is_zero() => {
            let one = Linear::constant(BigInt::one());
            F::Or(vec![
                F::Le(t.add(&one)),
                F::Le(t.neg().add(&one)),
            ])
        }
        F::And(fs) => F::And(fs.iter().map(|g| expand_eq_ne(g, var)).collect()),
        F::Or(fs) => F::Or(fs.iter().map(|g| expand_eq_ne(g, var)).collect()),
        other => other.clone(),
    }
}

struct Elim {
    /// lcm of the divisibility moduli involving the variable
    delta: BigInt,
    /// lower-bound terms b with "b <= y" after unit normalization
    lowers: Vec<Linear>,
}

/// Scales all atoms so the eliminated variable's coefficient is +-1 and
/// records the divisor lcm plus the lower-bound terms. Returns the
/// rewritten formula over the *same* variable (now with unit coefficient)
/// together with the data. `lcm_coeff` divisibility is conjoined.
fn unit_normalize(f: &F, var: &str) -> Result<(F, BigInt), LiaError> {
    fn coeff_lcm(f: &F, var: &str, acc: &mut BigInt) {
        match f {
            F::Le(t) | F::Eq(t) | F::Ne(t) | F::Dvd(_, t) | F::Ndvd(_, t) => {
                let c = t.coeff(var);
                if !c.is_zero() {
                    *acc = acc.lcm(&c.abs());
                }
            }
            F::And(fs) | F::Or(fs) => {
                for g in fs {
                    coeff_lcm(g, var, acc);
                }
            }
            F::True | F::False => {}
        }
    }

    fn rescale(f: &F, var: &str, l: &BigInt) -> F {
        match f {
            F::Le(t) => {
                let c = t.coeff(var);
                if c.is_zero() {
                    return f.clone();
                }
                let factor = l / c.abs();
                F::Le(t.scale(&factor))
            }
            F::Eq(t) | F::Ne(t) => {
                let c = t.coeff(var);
                if c.is_zero() {
                    return f.clone();
                }
                let factor = l / c.abs();
                let scaled = t.scale(&factor);
                if matches!(f, F::Eq(_)) {
                    F::Eq(scaled)
                } else {
                    F::Ne(scaled)
                }
            }
            F::Dvd(d, t) | F::Ndvd(d, t) => {
                let c = t.coeff(var);
                if c.is_zero() {
                    return f.clone();
                }
                let factor = l / c.abs();
                let scaled = t.scale(&factor);
                let d2 = d * &factor;
                if matches!(f, F::Dvd(..)) {
                    F::Dvd(d2, scaled)
                } else {
                    F::Ndvd(d2, scaled)
                }
            }
            F::And(fs) => F::And(fs.iter().map(|g| rescale(g, var, l)).collect()),
            F::Or(fs) => F::Or(fs.iter().map(|g| rescale(g, var, l)).collect()),
            F::True | F::False => f.clone(),
        }
    }

    let mut l = BigInt::one();
    coeff_lcm(f, var, &mut l);
    if l > BigInt::from(MAX_DIVISOR) {
        return Err(LiaError::DivisorOverflow);
    }
    Ok((rescale(f, var, &l), l))
}

fn gather_elim_data(f: &F, var: &str, data: &mut Elim) {
    match f {
        F::Le(t) => {
            let c = t.coeff(var);
            if c == BigInt::from(-1) {
                // -y + r <= 0  <=>  r <= y
                let mut r = t.clone();
                r.coeffs.remove(var);
                data.lowers.push(r);
            }
        }
        F::Dvd(d, t) | F::Ndvd(d, t) => {
            if !t.coeff(var).is_zero() {
                data.delta = data.delta.lcm(d);
            }
        }
        F::And(fs) | F::Or(fs) => {
            for g in fs {
                gather_elim_data(g, var, data);
            }
        }
        _ => {}
    }
}

/// Replaces atoms mentioning `var` by their limits as the variable goes to
/// negative infinity; divisibility atoms are retained for substitution.
fn minus_infinity(f: &F, var: &str) -> F {
    match f {
        F::Le(t) => {
            let c = t.coeff(var);
            if c.is_one() {
                F::True // y <= -r holds for small enough y
            } else if c == BigInt::from(-1) {
                F::False // r <= y fails
            } else {
                f.clone()
            }
        }
        F::And(fs) => F::And(fs.iter().map(|g| minus_infinity(g, var)).collect()),
        F::Or(fs) => F::Or(fs.iter().map(|g| minus_infinity(g, var)).collect()),
        other => other.clone(),
    }
}

/// Existential quantifier elimination: returns a formula equivalent to
/// `exists var. f` without occurrences of `var`.
pub fn eliminate(var: &str, f: &F) -> Result<F, LiaError> {
    let f = simplify(f.clone());
    if !f.contains_var(var) {
        return Ok(f);
    }
    let f = expand_eq_ne(&f, var);
    let (scaled, l) = unit_normalize(&f, var)?;
    // substitute y := l * var conceptually: every coefficient of var is
    // now +-l; rewrite it as +-1 over a fresh unit variable, adding l | y.
    let y = format!("{var}!u");
    let unit = {
        fn replace(f: &F, var: &str, y: &str, l: &BigInt) -> F {
            match f {
                F::Le(t) | F::Eq(t) | F::Ne(t) | F::Dvd(_, t) | F::Ndvd(_, t) => {
                    let c = t.coeff(var);
                    let mut t2 = t.clone();
                    if !c.is_zero() {
                        debug_assert!(c.abs() == *l);
                        t2.coeffs.remove(var);
                        t2.coeffs
                            .insert(y.to_string(), if c.is_negative() { -BigInt::one() } else { BigInt::one() });
                    }
                    match f {
                        F::Le(_) => F::Le(t2),
                        F::Eq(_) => F::Eq(t2),
                        F::Ne(_) => F::Ne(t2),
                        F::Dvd(d, _) => F::Dvd(d.clone(), t2),
                        F::Ndvd(d, _) => F::Ndvd(d.clone(), t2),
                        _ => unreachable!(),
                    }
                }
                F::And(fs) => F::And(fs.iter().map(|g| replace(g, var, y, l)).collect()),
                F::Or(fs) => F::Or(fs.iter().map(|g| replace(g, var, y, l)).collect()),
                F::True | F::False => f.clone(),
            }
        }
        let mut g = replace(&scaled, var, &y, &l);
        if l > BigInt::one() {
            g = F::And(vec![g, F::Dvd(l.clone(), Linear::var(&y))]);
        }
        g
    };

    let mut data = Elim {
        delta: BigInt::one(),
        lowers: Vec::new(),
    };
    gather_elim_data(&unit, &y, &mut data);
    if data.delta > BigInt::from(MAX_DIVISOR) {
        return Err(LiaError::DivisorOverflow);
    }
    let delta_usize: u64 = data
        .delta
        .clone()
        .try_into()
        .map_err(|_| LiaError::DivisorOverflow)?;

    // lower-bound atoms are kept non-strict (b <= y), so the boundary
    // candidates are b + j for j in [0, delta-1]
    let minf = minus_infinity(&unit, &y);
    let mut disjuncts: Vec<F> = Vec::new();
    for j in 0..delta_usize {
        let jl = Linear::constant(BigInt::from(j));
        disjuncts.push(simplify(minf.subst(&y, &jl)));
        for b in &data.lowers {
            let term = b.add(&jl);
            disjuncts.push(simplify(unit.subst(&y, &term)));
        }
    }
    Ok(simplify(F::Or(disjuncts)))
}

/// Outcome of a satisfiability check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Sat {
    Unsat,
    Sat(BTreeMap<String, BigInt>),
}

/// Decides satisfiability of a linear integer formula and produces a model
/// assigning an integer to every free variable.
pub fn check_sat(b: &BExpr) -> Result<Sat, LiaError> {
    let f = simplify(from_bexpr(b, true)?);
    let mut vars: Vec<String> = {
        let mut s = BTreeSet::new();
        f.collect_vars(&mut s);
        s.into_iter().collect()
    };
    // eliminating rarer variables first keeps intermediate formulas small
    vars.sort_by_key(|v| {
        fn count(f: &F, v: &str) -> usize {
            match f {
                F::Le(t) | F::Eq(t) | F::Ne(t) | F::Dvd(_, t) | F::Ndvd(_, t) => {
                    usize::from(!t.coeff(v).is_zero())
                }
                F::And(fs) | F::Or(fs) => fs.iter().map(|g| count(g, v)).sum(),
                F::True | F::False => 0,
            }
        }
        count(&f, v)
    });

    let mut stages = vec![f];
    for v in &vars {
        let next = eliminate(v, stages.last().expect("non-empty"))?;
        stages.push(next);
    }
    if !ground_eval(stages.last().expect("non-empty")) {
        return Ok(Sat::Unsat);
    }
    // stages[i] has free variables vars[i..]; assign from the back
    let mut model: BTreeMap<String, BigInt> = BTreeMap::new();
    for i in (0..vars.len()).rev() {
        let mut g = stages[i].clone();
        for (v, val) in &model {
            g = g.subst(v, &Linear::constant(val.clone()));
        }
        let g = simplify(g);
        let value = find_value(&vars[i], &g)?;
        model.insert(vars[i].clone(), value);
    }
    debug_assert!({
        let mut g = stages[0].clone();
        for (v, val) in &model {
            g = g.subst(v, &Linear::constant(val.clone()));
        }
        ground_eval(&g)
    });
    Ok(Sat::Sat(model))
}

/// Finds an integer value for the single free variable of a satisfiable
/// formula, via the elimination candidate terms.
fn find_value(var: &str, f: &F) -> Result<BigInt, LiaError> {
    let f = simplify(expand_eq_ne(f, var));
    if !f.contains_var(var) {
        // variable unconstrained
        debug_assert!(ground_eval(&f));
        return Ok(BigInt::zero());
    }
    let (scaled, l) = unit_normalize(&f, var)?;
    let y = "!y";
    let unit = {
        fn replace(f: &F, var: &str, y: &str) -> F {
            match f {
                F::Le(t) | F::Eq(t) | F::Ne(t) | F::Dvd(_, t) | F::Ndvd(_, t) => {
                    let c = t.coeff(var);
                    let mut t2 = t.clone();
                    if !c.is_zero() {
                        t2.coeffs.remove(var);
                        t2.coeffs.insert(
                            y.to_string(),
                            if c.is_negative() { -BigInt::one() } else { BigInt::one() },
                        );
                    }
                    match f {
                        F::Le(_) => F::Le(t2),
                        F::Eq(_) => F::Eq(t2),
                        F::Ne(_) => F::Ne(t2),
                        F::Dvd(d, _) => F::Dvd(d.clone(), t2),
                        F::Ndvd(d, _) => F::Ndvd(d.clone(), t2),
                        _ => unreachable!(),
                    }
                }
                F::And(fs) => F::And(fs.iter().map(|g| replace(g, var, y)).collect()),
                F::Or(fs) => F::Or(fs.iter().map(|g| replace(g, var, y)).collect()),
                F::True | F::False => f.clone(),
            }
        }
        let mut g = replace(&scaled, var, y);
        if l > BigInt::one() {
            g = F::And(vec![g, F::Dvd(l.clone(), Linear::var(y))]);
        }
        g
    };

    let mut data = Elim {
        delta: BigInt::one(),
        lowers: Vec::new(),
    };
    gather_elim_data(&unit, y, &mut data);
    let delta: u64 = data
        .delta
        .clone()
        .try_into()
        .map_err(|_| LiaError::DivisorOverflow)?;

    // candidates from each (non-strict) lower bound, all ground here
    for j in 0..delta {
        let jb = BigInt::from(j);
        for b in &data.lowers {
            debug_assert!(b.is_ground());
            let yv = &b.constant + &jb;
            if ground_eval(&unit.subst(y, &Linear::constant(yv.clone())))
            {
                debug_assert!(yv.mod_floor(&l).is_zero());
                return Ok(yv / &l);
            }
        }
    }
    // minus-infinity case: small enough and congruent to some j mod delta
    let mut thresholds: Vec<BigInt> = Vec::new();
    fn uppers(f: &F, y: &str, out: &mut Vec<BigInt>) {
        match f {
            F::Le(t) => {
                let c = t.coeff(y);
                if c.is_one() {
                    // y <= -r
                    let mut r = t.clone();
                    r.coeffs.remove(y);
                    out.push(-r.constant);
                } else if c == BigInt::from(-1) {
                    let mut r = t.clone();
                    r.coeffs.remove(y);
                    out.push(&r.constant - 1);
                }
            }
            F::And(fs) | F::Or(fs) => {
                for g in fs {
                    uppers(g, y, out);
                }
            }
            _ => {}
        }
    }
    uppers(&unit, y, &mut thresholds);
    let dref = BigInt::from(delta);
    for j in 0..delta {
        let jb = BigInt::from(j);
        let base = thresholds.iter().min().cloned().unwrap_or_else(|| jb.clone());
        let base = if base > jb { jb.clone() } else { base };
        // largest value <= base congruent to j modulo delta
        let yv = &base - (&base - &jb).mod_floor(&dref);
        if ground_eval(&unit.subst(y, &Linear::constant(yv.clone()))) {
            debug_assert!(yv.mod_floor(&l).is_zero());
            return Ok(yv / &l);
        }
    }
    panic!("model extraction failed on a satisfiable formula: {f:?}");
}

/// `exists var. b`, rendered back as a surface predicate. Divisibility
/// atoms produced by the elimination are weakened to `True`, so the result
/// may over-approximate the exact projection.
pub fn project_weaken(var: &str, b: &BExpr) -> Result<BExpr, LiaError> {
    let f = from_bexpr(b, true)?;
    let eliminated = eliminate(var, &f)?;
    Ok(to_bexpr(&eliminated, true).expect("weakened rendering is total"))
}
