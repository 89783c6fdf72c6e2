//! Structural abstraction: the MDP underlying a control-flow automaton,
//! maximum reachability with policy extraction, and policy application.
//!
//! Threshold comparisons must be exact, so reachability values are
//! certified over the rationals: floating-point value iteration only
//! proposes a policy, whose induced chain is then solved exactly and
//! checked for Bellman optimality.

use crate::pcfa::{Loc, Pcfa, Weight};
use crate::stmt::Statement;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Serialize;
use std::collections::{BTreeMap, VecDeque};

const VI_TOLERANCE: f64 = 1e-10;
const VI_MAX_SWEEPS: usize = 1_000_000;
const PI_MAX_ROUNDS: usize = 10_000;

/// An MDP action: a labelled Dirac step, a fair coin per distribution
/// tag, or the dummy self-loop on absorbing nodes.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Action {
    Stmt(Statement),
    Coin(u32),
    Dummy,
}

impl std::fmt::Display for Action {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Action::Stmt(s) => write!(f, "<{s}>"),
            Action::Coin(i) => write!(f, "<{i}>"),
            Action::Dummy => write!(f, "a_dmy"),
        }
    }
}

/// The MDP underlying a PCFA: nodes are its locations plus one dummy;
/// each node maps enabled actions to distributions that sum to one.
#[derive(Debug, Clone)]
pub struct Mdp {
    pub num_nodes: usize,
    pub dummy: usize,
    pub init: usize,
    pub end: usize,
    pub actions: BTreeMap<usize, BTreeMap<Action, Vec<(usize, Weight)>>>,
}

/// A memoryless choice of one enabled action per node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimplePolicy {
    pub choice: BTreeMap<usize, Action>,
}

impl Mdp {
    pub fn enabled(&self, node: usize) -> impl Iterator<Item = (&Action, &Vec<(usize, Weight)>)> {
        self.actions.get(&node).into_iter().flatten()
    }

    fn check_distributions(&self) {
        for acts in self.actions.values() {
            for dist in acts.values() {
                let total: Weight = dist.iter().map(|(_, p)| p.clone()).sum();
                assert!(total.is_one(), "distribution sums to {total}, not 1");
                assert!(dist.iter().all(|(_, p)| p.is_positive()));
            }
        }
    }
}

/// Builds the underlying MDP of a PCFA: non-probabilistic transitions
/// become labelled Dirac actions; a fair pair becomes one coin action;
/// a lone probabilistic branch sends the missing half to the dummy node;
/// the ending location and the dummy carry Dirac self-loops.
pub fn underlying_mdp(a: &Pcfa) -> Mdp {
    let dummy = a.num_locs;
    let mut actions: BTreeMap<usize, BTreeMap<Action, Vec<(usize, Weight)>>> = BTreeMap::new();
    let half = || BigRational::new(1.into(), 2.into());

    for loc in 0..a.num_locs {
        if loc == a.end {
            continue;
        }
        let mut coin_edges: BTreeMap<u32, Vec<(bool, Loc)>> = BTreeMap::new();
        for (stmt, to) in a.out_edges(loc) {
            match stmt {
                Statement::ProbLeft(i) => coin_edges.entry(*i).or_default().push((true, to)),
                Statement::ProbRight(i) => coin_edges.entry(*i).or_default().push((false, to)),
                other => {
                    actions
                        .entry(loc)
                        .or_default()
                        .insert(Action::Stmt(other.clone()), vec![(to, Weight::one())]);
                }
            }
        }
        for (tag, mut edges) in coin_edges {
            edges.sort();
            let dist = match edges.as_slice() {
                [(_, only)] => vec![(*only, half()), (dummy, half())],
                [(_, l1), (_, l2)] => {
                    if l1 == l2 {
                        vec![(*l1, Weight::one())]
                    } else {
                        vec![(*l1, half()), (*l2, half())]
                    }
                }
                other => panic!("tag {tag} has {} edges from one location", other.len()),
            };
            actions.entry(loc).or_default().insert(Action::Coin(tag), dist);
        }
    }
    actions
        .entry(a.end)
        .or_default()
        .insert(Action::Dummy, vec![(a.end, Weight::one())]);
    actions
        .entry(dummy)
        .or_default()
        .insert(Action::Dummy, vec![(dummy, Weight::one())]);

    let mdp = Mdp {
        num_nodes: a.num_locs + 1,
        dummy,
        init: a.init,
        end: a.end,
        actions,
    };
    mdp.check_distributions();
    mdp
}

/// Nodes from which `to` is reachable in the action-erased graph.
fn can_reach(m: &Mdp, to: usize) -> Vec<bool> {
    let mut rev: Vec<Vec<usize>> = vec![Vec::new(); m.num_nodes];
    for (node, acts) in &m.actions {
        for dist in acts.values() {
            for (succ, _) in dist {
                rev[*succ].push(*node);
            }
        }
    }
    let mut seen = vec![false; m.num_nodes];
    seen[to] = true;
    let mut queue = VecDeque::from([to]);
    while let Some(n) = queue.pop_front() {
        for p in &rev[n] {
            if !seen[*p] {
                seen[*p] = true;
                queue.push_back(*p);
            }
        }
    }
    seen
}

/// Exact reachability values of the chain induced by a policy:
/// `x[to] = 1`, `x = P_psi x` on states that can still reach `to`
/// inside the chain, 0 elsewhere.
fn chain_values(m: &Mdp, policy: &SimplePolicy, to: usize) -> Vec<Weight> {
    let succ = |n: usize| -> &[(usize, Weight)] {
        match policy.choice.get(&n) {
            Some(a) => m.actions[&n].get(a).map(|d| d.as_slice()).unwrap_or(&[]),
            None => &[],
        }
    };
    // co-reachability inside the chain
    let mut rev: Vec<Vec<usize>> = vec![Vec::new(); m.num_nodes];
    for n in 0..m.num_nodes {
        if n == to {
            continue;
        }
        for (s, _) in succ(n) {
            rev[*s].push(n);
        }
    }
    let mut alive = vec![false; m.num_nodes];
    alive[to] = true;
    let mut queue = VecDeque::from([to]);
    while let Some(n) = queue.pop_front() {
        for p in &rev[n] {
            if !alive[*p] {
                alive[*p] = true;
                queue.push_back(*p);
            }
        }
    }

    let unknowns: Vec<usize> = (0..m.num_nodes)
        .filter(|n| alive[*n] && *n != to)
        .collect();
    let index: BTreeMap<usize, usize> =
        unknowns.iter().enumerate().map(|(i, n)| (*n, i)).collect();
    let k = unknowns.len();
    // rows: x_n - sum_{u unknown} p(u) x_u = (mass into `to`)
    let mut matrix: Vec<Vec<Weight>> = vec![vec![Weight::zero(); k + 1]; k];
    for (row, n) in unknowns.iter().enumerate() {
        matrix[row][row] = Weight::one();
        for (s, p) in succ(*n) {
            if *s == to {
                matrix[row][k] += p;
            } else if let Some(col) = index.get(s) {
                let cell = &matrix[row][*col] - p;
                matrix[row][*col] = cell;
            }
        }
    }
    let solution = gaussian_solve(&mut matrix, k);
    let mut values = vec![Weight::zero(); m.num_nodes];
    values[to] = Weight::one();
    for (i, n) in unknowns.iter().enumerate() {
        values[*n] = solution[i].clone();
    }
    values
}

/// Solves the k-by-k system in place; the last column is the rhs.
fn gaussian_solve(matrix: &mut [Vec<Weight>], k: usize) -> Vec<Weight> {
    for col in 0..k {
        let pivot_row = (col..k)
            .find(|r| !matrix[*r][col].is_zero())
            .expect("transient chain system is nonsingular");
        matrix.swap(col, pivot_row);
        let pivot = matrix[col][col].clone();
        for c in col..=k {
            let v = &matrix[col][c] / &pivot;
            matrix[col][c] = v;
        }
        for row in 0..k {
            if row != col && !matrix[row][col].is_zero() {
                let factor = matrix[row][col].clone();
                for c in col..=k {
                    let v = &matrix[row][c] - &factor * &matrix[col][c];
                    matrix[row][c] = v;
                }
            }
        }
    }
    (0..k).map(|r| matrix[r][k].clone()).collect()
}

/// Bellman feasibility of exact values: no enabled action improves any
/// node. Feasible values of a policy's own chain are optimal.
fn is_bellman_feasible(m: &Mdp, values: &[Weight], to: usize) -> bool {
    for (node, acts) in &m.actions {
        if *node == to {
            continue;
        }
        for dist in acts.values() {
            let mut lhs = Weight::zero();
            for (s, p) in dist {
                lhs += p * &values[*s];
            }
            if lhs > values[*node] {
                return false;
            }
        }
    }
    true
}

/// Maximum reachability probability from `from` to `to`, with a simple
/// policy attaining it. Value iteration (binary floating point, residual
/// below 1e-10) proposes an argmax policy; the policy's chain is solved
/// exactly over the rationals; exact policy iteration repairs the rare
/// case where floating point picked a sub-optimal action.
pub fn max_reachability(m: &Mdp, from: usize, to: usize) -> (Weight, SimplePolicy) {
    let alive = can_reach(m, to);
    let prob_f64: BTreeMap<usize, Vec<(Action, Vec<(usize, f64)>)>> = m
        .actions
        .iter()
        .map(|(n, acts)| {
            (
                *n,
                acts.iter()
                    .map(|(a, dist)| {
                        (
                            a.clone(),
                            dist.iter()
                                .map(|(s, p)| (*s, p.to_f64().expect("probability fits f64")))
                                .collect(),
                        )
                    })
                    .collect(),
            )
        })
        .collect();
    let mut x = vec![0.0f64; m.num_nodes];
    x[to] = 1.0;
    for _ in 0..VI_MAX_SWEEPS {
        let mut residual = 0.0f64;
        for (node, acts) in &prob_f64 {
            if *node == to || !alive[*node] {
                continue;
            }
            let mut best = 0.0f64;
            for (_, dist) in acts {
                let v: f64 = dist.iter().map(|(s, p)| p * x[*s]).sum();
                if v > best {
                    best = v;
                }
            }
            residual = residual.max((best - x[*node]).abs());
            x[*node] = best;
        }
        if residual < VI_TOLERANCE {
            break;
        }
    }
    // argmax policy; the fixed action order breaks floating-point ties
    let mut policy = SimplePolicy {
        choice: BTreeMap::new(),
    };
    for (node, acts) in &prob_f64 {
        let mut best_action = None;
        let mut best_value = f64::NEG_INFINITY;
        for (a, dist) in acts {
            let v: f64 = dist.iter().map(|(s, p)| p * x[*s]).sum();
            if v > best_value + VI_TOLERANCE {
                best_value = v;
                best_action = Some(a.clone());
            }
        }
        if let Some(a) = best_action {
            policy.choice.insert(*node, a);
        } else if let Some((a, _)) = acts.first() {
            policy.choice.insert(*node, a.clone());
        }
    }
    // exact certification, repaired by policy iteration when needed
    for _ in 0..PI_MAX_ROUNDS {
        let values = chain_values(m, &policy, to);
        if is_bellman_feasible(m, &values, to) {
            return (values[from].clone(), policy);
        }
        let mut improved = false;
        for (node, acts) in &m.actions {
            if *node == to {
                continue;
            }
            let current = &values[*node];
            let mut best = current.clone();
            let mut best_action: Option<Action> = None;
            for (a, dist) in acts {
                let mut v = Weight::zero();
                for (s, p) in dist {
                    v += p * &values[*s];
                }
                if v > best {
                    best = v;
                    best_action = Some(a.clone());
                }
            }
            if let Some(a) = best_action {
                policy.choice.insert(*node, a);
                improved = true;
            }
        }
        assert!(improved, "infeasible values without an improving action");
    }
    panic!("policy iteration did not converge within {PI_MAX_ROUNDS} rounds");
}

/// Keeps exactly the transitions selected by the policy; a coin action
/// keeps both branches of its tag. The result enables at most one action
/// per location.
pub fn apply_policy(a: &Pcfa, policy: &SimplePolicy) -> Pcfa {
    let mut delta = BTreeMap::new();
    for ((from, stmt), to) in &a.delta {
        let keep = match policy.choice.get(from) {
            Some(Action::Stmt(s)) => s == stmt,
            Some(Action::Coin(i)) => stmt.prob_tag() == Some(*i),
            Some(Action::Dummy) | None => false,
        };
        if keep {
            delta.insert((*from, stmt.clone()), *to);
        }
    }
    Pcfa {
        num_locs: a.num_locs,
        init: a.init,
        end: a.end,
        alphabet: a.alphabet.clone(),
        delta,
    }
}

/// True when every location enables at most one action (an automaton
/// interpretable as a Markov chain).
pub fn is_mc_shaped(a: &Pcfa) -> bool {
    let mut seen: BTreeMap<Loc, Action> = BTreeMap::new();
    for ((from, stmt), _) in &a.delta {
        let action = match stmt.prob_tag() {
            Some(i) => Action::Coin(i),
            None => Action::Stmt(stmt.clone()),
        };
        if let Some(prev) = seen.get(from) {
            if *prev != action {
                return false;
            }
        } else {
            seen.insert(*from, action);
        }
    }
    true
}

/// Structural upper bound: maximum reachability from the initial to the
/// ending location in the underlying MDP, with the attaining policy.
pub fn structural_bound(a: &Pcfa) -> (Weight, SimplePolicy) {
    let m = underlying_mdp(a);
    max_reachability(&m, a.init, a.end)
}

/// Total weight of all accepting traces of an MC-shaped automaton: its
/// reachability probability from the initial to the ending location,
/// solved exactly.
pub fn mc_accepting_mass(a: &Pcfa) -> Weight {
    assert!(
        is_mc_shaped(a),
        "accepting mass requires an MC-shaped automaton"
    );
    let m = underlying_mdp(a);
    let mut policy = SimplePolicy {
        choice: BTreeMap::new(),
    };
    for (node, acts) in &m.actions {
        if let Some(a) = acts.keys().next() {
            policy.choice.insert(*node, a.clone());
        }
    }
    chain_values(&m, &policy, a.end)[a.init].clone()
}

// ---- JSON dump ----

#[derive(Serialize)]
struct MdpDump {
    nodes: usize,
    dummy: usize,
    init: usize,
    end: usize,
    transitions: Vec<MdpEdgeDump>,
}

#[derive(Serialize)]
struct MdpEdgeDump {
    node: usize,
    action: String,
    distribution: Vec<(usize, String)>,
}

/// JSON rendering with probabilities as exact `num/den` strings.
pub fn mdp_to_json(m: &Mdp) -> String {
    let transitions = m
        .actions
        .iter()
        .flat_map(|(n, acts)| {
            acts.iter().map(|(a, dist)| MdpEdgeDump {
                node: *n,
                action: a.to_string(),
                distribution: dist
                    .iter()
                    .map(|(s, p)| (*s, format!("{}/{}", p.numer(), p.denom())))
                    .collect(),
            })
        })
        .collect();
    serde_json::to_string_pretty(&MdpDump {
        nodes: m.num_nodes,
        dummy: m.dummy,
        init: m.init,
        end: m.end,
        transitions,
    })
    .expect("serializable")
}

/// Exact reachability value of an arbitrary policy (test oracle); nodes
/// the policy leaves open default to their first enabled action.
pub fn policy_value(m: &Mdp, policy: &SimplePolicy, from: usize, to: usize) -> Weight {
    let mut filled = policy.clone();
    for (node, acts) in &m.actions {
        filled
            .choice
            .entry(*node)
            .or_insert_with(|| acts.keys().next().expect("non-empty").clone());
    }
    chain_values(m, &filled, to)[from].clone()
}

pub fn assert_policy_enabled(m: &Mdp, policy: &SimplePolicy) {
    for (node, action) in &policy.choice {
        assert!(
            m.actions
                .get(node)
                .is_some_and(|acts| acts.contains_key(action)),
            "policy chooses a disabled action at node {node}"
        );
    }
}
