//! Control-flow automata over statements, traces and their weights,
//! the program-to-automaton conversion, and path conditions.

use crate::logic::path_wp;
use crate::stmt::{eval_statement, Statement, Valuation};
use crate::syntax::{BExpr, Program};
use num_rational::BigRational;
use num_traits::One;
use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt::Write as _;

pub type Loc = usize;

/// Exact probability value; trace weights are 1/2^n and finite sums thereof.
pub type Weight = BigRational;

/// (1/2)^n as an exact rational.
pub fn dyadic(n: u32) -> Weight {
    BigRational::new(1.into(), num_bigint::BigInt::from(2u32).pow(n))
}

/// Deterministic control-flow automaton with a single, out-edge-free
/// ending location.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pcfa {
    pub num_locs: usize,
    pub init: Loc,
    pub end: Loc,
    pub alphabet: BTreeSet<Statement>,
    pub delta: BTreeMap<(Loc, Statement), Loc>,
}

/// Unrestricted NFA over statements: relational transitions, an ending
/// set, and no constraint on edges leaving ending locations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneralPcfa {
    pub num_locs: usize,
    pub init: Loc,
    pub ends: BTreeSet<Loc>,
    pub alphabet: BTreeSet<Statement>,
    pub delta: BTreeSet<(Loc, Statement, Loc)>,
}

/// Non-empty statement sequence.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Trace(Vec<Statement>);

impl Trace {
    pub fn new(stmts: Vec<Statement>) -> Trace {
        assert!(!stmts.is_empty(), "traces are non-empty");
        Trace(stmts)
    }

    pub fn statements(&self) -> &[Statement] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn concat(&self, other: &Trace) -> Trace {
        let mut v = self.0.clone();
        v.extend(other.0.iter().cloned());
        Trace(v)
    }

    /// Copy with the first statement replaced (pre-condition relabeling).
    pub fn with_first(&self, s: Statement) -> Trace {
        let mut v = self.0.clone();
        v[0] = s;
        Trace(v)
    }
}

impl std::fmt::Display for Trace {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let mut first = true;
        for s in &self.0 {
            if !first {
                write!(f, "; ")?;
            }
            write!(f, "{s}")?;
            first = false;
        }
        Ok(())
    }
}

impl Pcfa {
    /// The automaton with the empty language.
    pub fn empty() -> Pcfa {
        Pcfa {
            num_locs: 2,
            init: 0,
            end: 1,
            alphabet: BTreeSet::new(),
            delta: BTreeMap::new(),
        }
    }

    pub fn check_invariants(&self) -> Result<(), String> {
        if self.init >= self.num_locs || self.end >= self.num_locs {
            return Err("initial or ending location out of range".into());
        }
        for ((from, stmt), to) in &self.delta {
            if *from >= self.num_locs || *to >= self.num_locs {
                return Err("transition endpoint out of range".into());
            }
            if *from == self.end {
                return Err(format!("ending location has out-transition on {stmt}"));
            }
            if !self.alphabet.contains(stmt) {
                return Err(format!("transition statement {stmt} missing from alphabet"));
            }
        }
        Ok(())
    }

    pub fn to_general(&self) -> GeneralPcfa {
        GeneralPcfa {
            num_locs: self.num_locs,
            init: self.init,
            ends: BTreeSet::from([self.end]),
            alphabet: self.alphabet.clone(),
            delta: self
                .delta
                .iter()
                .map(|((from, stmt), to)| (*from, stmt.clone(), *to))
                .collect(),
        }
    }

    pub fn step(&self, loc: Loc, stmt: &Statement) -> Option<Loc> {
        self.delta.get(&(loc, stmt.clone())).copied()
    }

    pub fn accepts(&self, trace: &Trace) -> bool {
        let mut at = self.init;
        for s in trace.statements() {
            match self.step(at, s) {
                Some(next) => at = next,
                None => return false,
            }
        }
        at == self.end
    }

    /// Out-transitions of a location, in statement order.
    pub fn out_edges(&self, loc: Loc) -> impl Iterator<Item = (&Statement, Loc)> {
        self.delta
            .range((loc, Statement::Skip)..)
            .take_while(move |((from, _), _)| *from == loc)
            .map(|((_, stmt), to)| (stmt, *to))
    }

    /// True when no accepting path exists.
    pub fn language_is_empty(&self) -> bool {
        let mut seen = vec![false; self.num_locs];
        let mut queue = VecDeque::from([self.init]);
        seen[self.init] = true;
        while let Some(loc) = queue.pop_front() {
            if loc == self.end {
                return false;
            }
            for (_, to) in self.out_edges(loc) {
                if !seen[to] {
                    seen[to] = true;
                    queue.push_back(to);
                }
            }
        }
        true
    }
}

impl GeneralPcfa {
    /// Automaton accepting nothing over the given alphabet.
    pub fn empty(alphabet: BTreeSet<Statement>) -> GeneralPcfa {
        GeneralPcfa {
            num_locs: 1,
            init: 0,
            ends: BTreeSet::new(),
            alphabet,
            delta: BTreeSet::new(),
        }
    }

    /// Automaton accepting every non-empty word over the alphabet.
    pub fn universal(alphabet: BTreeSet<Statement>) -> GeneralPcfa {
        let delta = alphabet
            .iter()
            .flat_map(|s| [(0, s.clone(), 1), (1, s.clone(), 1)])
            .collect();
        GeneralPcfa {
            num_locs: 2,
            init: 0,
            ends: BTreeSet::from([1]),
            alphabet,
            delta,
        }
    }

    /// Linear automaton accepting exactly the given trace.
    pub fn from_trace(trace: &Trace) -> GeneralPcfa {
        let stmts = trace.statements();
        let delta = stmts
            .iter()
            .enumerate()
            .map(|(i, s)| (i, s.clone(), i + 1))
            .collect();
        GeneralPcfa {
            num_locs: stmts.len() + 1,
            init: 0,
            ends: BTreeSet::from([stmts.len()]),
            alphabet: stmts.iter().cloned().collect(),
            delta,
        }
    }

    pub fn successors(&self, loc: Loc, stmt: &Statement) -> BTreeSet<Loc> {
        self.delta
            .iter()
            .filter(|(from, s, _)| *from == loc && s == stmt)
            .map(|(_, _, to)| *to)
            .collect()
    }

    pub fn accepts(&self, trace: &Trace) -> bool {
        let mut current: BTreeSet<Loc> = BTreeSet::from([self.init]);
        for s in trace.statements() {
            let mut next = BTreeSet::new();
            for loc in &current {
                next.extend(self.successors(*loc, s));
            }
            if next.is_empty() {
                return false;
            }
            current = next;
        }
        current.iter().any(|l| self.ends.contains(l))
    }
}

/// Weight of a trace: (1/2)^n with n the number of probabilistic
/// statements; non-deterministic markers contribute nothing.
pub fn trace_weight(trace: &Trace) -> Weight {
    let n = trace
        .statements()
        .iter()
        .filter(|s| s.is_probabilistic())
        .count();
    dyadic(n as u32)
}

/// Left-to-right fold of statement evaluation.
pub fn eval_trace(trace: &Trace, v: &Valuation) -> Valuation {
    let mut current = v.clone();
    for s in trace.statements() {
        current = eval_statement(s, &current);
        if current.is_bottom() {
            return Valuation::Bottom;
        }
    }
    current
}

/// The weakest predicate on initial valuations under which the trace is
/// violating: `pre && pathwp(trace, !post)`, with the conjunctive
/// transformer for assumptions, so every model drives the trace to a
/// non-bottom state satisfying `!post`.
pub fn path_condition(trace: &Trace, pre: &BExpr, post: &BExpr) -> BExpr {
    let mut goal = BExpr::not(post.clone());
    for s in trace.statements().iter().rev() {
        goal = path_wp(s, &goal);
    }
    BExpr::and(pre.clone(), goal)
}

/// Conjunction of the members' path conditions.
pub fn path_condition_set<'a>(
    traces: impl IntoIterator<Item = &'a Trace>,
    pre: &BExpr,
    post: &BExpr,
) -> BExpr {
    let mut conds: Vec<BExpr> = traces
        .into_iter()
        .map(|t| path_condition(t, pre, post))
        .collect();
    assert!(!conds.is_empty(), "path condition of an empty trace set");
    let last = conds.pop().expect("non-empty");
    conds.into_iter().rev().fold(last, |acc, c| BExpr::and(c, acc))
}

// ---- program -> PCFA conversion ----

struct ConvState {
    next_loc: Loc,
    alphabet: BTreeSet<Statement>,
    delta: BTreeMap<(Loc, Statement), Loc>,
}

impl ConvState {
    fn new_loc(&mut self) -> Loc {
        let l = self.next_loc;
        self.next_loc += 1;
        l
    }

    fn edge(&mut self, from: Loc, stmt: Statement, to: Loc) {
        self.alphabet.insert(stmt.clone());
        let previous = self.delta.insert((from, stmt), to);
        debug_assert!(previous.is_none(), "conversion produced a duplicate edge");
    }

    /// Converts `p` between the given entry and exit locations, threading
    /// the distribution- and non-determinism-tag counters. Both choice
    /// constructs allocate their tags after converting the children.
    fn conv(&mut self, l0: Loc, le: Loc, p: &Program, tag_d: u32, tag_n: u32) -> (u32, u32) {
        match p {
            Program::Skip => {
                self.edge(l0, Statement::Skip, le);
                (tag_d, tag_n)
            }
            Program::Assign(x, e) => {
                self.edge(l0, Statement::Assign(x.clone(), e.clone()), le);
                (tag_d, tag_n)
            }
            Program::ProbChoice(p1, p2) => {
                let l1 = self.new_loc();
                let l2 = self.new_loc();
                let (d1, n1) = self.conv(l1, le, p1, tag_d, tag_n);
                let (d2, n2) = self.conv(l2, le, p2, d1, n1);
                self.edge(l0, Statement::ProbLeft(d2), l1);
                self.edge(l0, Statement::ProbRight(d2), l2);
                (d2 + 1, n2)
            }
            Program::NondetChoice(p1, p2) => {
                let l1 = self.new_loc();
                let l2 = self.new_loc();
                let (d1, n1) = self.conv(l1, le, p1, tag_d, tag_n);
                let (d2, n2) = self.conv(l2, le, p2, d1, n1);
                self.edge(l0, Statement::Nondet(n2), l1);
                self.edge(l0, Statement::Nondet(n2 + 1), l2);
                (d2, n2 + 2)
            }
            Program::Seq(p1, p2) => {
                let mid = self.new_loc();
                let (d1, n1) = self.conv(l0, mid, p1, tag_d, tag_n);
                self.conv(mid, le, p2, d1, n1)
            }
            Program::Ite(b, p1, p2) => {
                let l1 = self.new_loc();
                let l2 = self.new_loc();
                let (d1, n1) = self.conv(l1, le, p1, tag_d, tag_n);
                let (d2, n2) = self.conv(l2, le, p2, d1, n1);
                self.edge(l0, Statement::assume(b.clone()), l1);
                self.edge(l0, Statement::assume(BExpr::not(b.clone())), l2);
                (d2, n2)
            }
            Program::While(b, body) => {
                let lbody = self.new_loc();
                let (d1, n1) = self.conv(lbody, l0, body, tag_d, tag_n);
                self.edge(l0, Statement::assume(b.clone()), lbody);
                self.edge(l0, Statement::assume(BExpr::not(b.clone())), le);
                (d1, n1)
            }
        }
    }
}

/// Compiles a program into its control-flow automaton. Distribution and
/// non-determinism tags are consecutive naturals from a single threaded
/// counter pair, so the result is reproducible.
pub fn program_to_pcfa(p: &Program) -> Pcfa {
    let mut st = ConvState {
        next_loc: 0,
        alphabet: BTreeSet::new(),
        delta: BTreeMap::new(),
    };
    let init = st.new_loc();
    let end = st.new_loc();
    st.conv(init, end, p, 0, 0);
    let pcfa = Pcfa {
        num_locs: st.next_loc,
        init,
        end,
        alphabet: st.alphabet,
        delta: st.delta,
    };
    debug_assert_eq!(pcfa.check_invariants(), Ok(()));
    pcfa
}

// ---- DOT export ----

fn dot_escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

pub fn pcfa_to_dot(a: &Pcfa, name: &str) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "digraph \"{}\" {{", dot_escape(name));
    let _ = writeln!(out, "  rankdir=TB;");
    let _ = writeln!(out, "  __start [shape=point];");
    for l in 0..a.num_locs {
        let shape = if l == a.end { "doublecircle" } else { "circle" };
        let _ = writeln!(out, "  n{l} [shape={shape}, label=\"{l}\"];");
    }
    let _ = writeln!(out, "  __start -> n{};", a.init);
    for ((from, stmt), to) in &a.delta {
        let _ = writeln!(
            out,
            "  n{from} -> n{to} [label=\"{}\"];",
            dot_escape(&stmt.to_string())
        );
    }
    out.push_str("}\n");
    out
}

pub fn general_pcfa_to_dot(a: &GeneralPcfa, name: &str) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "digraph \"{}\" {{", dot_escape(name));
    let _ = writeln!(out, "  rankdir=TB;");
    let _ = writeln!(out, "  __start [shape=point];");
    for l in 0..a.num_locs {
        let shape = if a.ends.contains(&l) {
            "doublecircle"
        } else {
            "circle"
        };
        let _ = writeln!(out, "  n{l} [shape={shape}, label=\"{l}\"];");
    }
    let _ = writeln!(out, "  __start -> n{};", a.init);
    for (from, stmt, to) in &a.delta {
        let _ = writeln!(
            out,
            "  n{from} -> n{to} [label=\"{}\"];",
            dot_escape(&stmt.to_string())
        );
    }
    out.push_str("}\n");
    out
}

/// The number of distinct probabilistic statements is a convenient size
/// measure for logs.
pub fn count_coins(a: &Pcfa) -> usize {
    a.alphabet
        .iter()
        .filter_map(Statement::prob_tag)
        .collect::<BTreeSet<_>>()
        .len()
}

/// The weight of a trace times the weight of another equals the weight of
/// their concatenation; exposed for property tests.
pub fn weight_one() -> Weight {
    Weight::one()
}
