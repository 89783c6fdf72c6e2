//! Finite-automata algebra over the statement alphabet, plus
//! weight-ordered trace enumeration.
//!
//! Complementation is always relative to a working alphabet (the union
//! of the operands' statement sets, including split-condition
//! assumptions); operands are implicitly completed over it. Statement
//! equality is syntactic: two assumptions with equivalent but distinct
//! predicates are different symbols.

use crate::pcfa::{dyadic, GeneralPcfa, Loc, Pcfa, Trace, Weight};
use crate::stmt::Statement;
use num_traits::Zero;
use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, HashMap, VecDeque};

/// Working alphabet for one algebra operation.
#[derive(Debug, Clone)]
pub struct AlphabetCtx {
    pub symbols: Vec<Statement>,
}

impl AlphabetCtx {
    pub fn from_sets<'a>(sets: impl IntoIterator<Item = &'a BTreeSet<Statement>>) -> AlphabetCtx {
        let mut all = BTreeSet::new();
        for s in sets {
            all.extend(s.iter().cloned());
        }
        AlphabetCtx {
            symbols: all.into_iter().collect(),
        }
    }

    pub fn to_set(&self) -> BTreeSet<Statement> {
        self.symbols.iter().cloned().collect()
    }

    fn index(&self, s: &Statement) -> Option<usize> {
        self.symbols.binary_search(s).ok()
    }
}

/// Complete DFA over alphabet indices. Used internally by the algebra.
#[derive(Debug, Clone)]
struct Dfa {
    init: usize,
    accepting: Vec<bool>,
    trans: Vec<Vec<usize>>,
}

impl Dfa {
    fn num_states(&self) -> usize {
        self.accepting.len()
    }
}

/// Subset construction over the working alphabet; the empty subset acts
/// as the (always present) sink, so the result is complete.
fn determinize(g: &GeneralPcfa, ctx: &AlphabetCtx) -> Dfa {
    let nsym = ctx.symbols.len();
    let mut succ: BTreeMap<(Loc, usize), BTreeSet<Loc>> = BTreeMap::new();
    for (from, stmt, to) in &g.delta {
        if let Some(k) = ctx.index(stmt) {
            succ.entry((*from, k)).or_default().insert(*to);
        }
    }
    let mut states: HashMap<BTreeSet<Loc>, usize> = HashMap::new();
    let mut worklist: VecDeque<BTreeSet<Loc>> = VecDeque::new();
    let mut accepting: Vec<bool> = Vec::new();
    let mut trans: Vec<Vec<usize>> = Vec::new();

    let intern = |set: BTreeSet<Loc>,
                      states: &mut HashMap<BTreeSet<Loc>, usize>,
                      accepting: &mut Vec<bool>,
                      trans: &mut Vec<Vec<usize>>,
                      worklist: &mut VecDeque<BTreeSet<Loc>>|
     -> usize {
        if let Some(id) = states.get(&set) {
            return *id;
        }
        let id = accepting.len();
        accepting.push(set.iter().any(|l| g.ends.contains(l)));
        trans.push(vec![usize::MAX; nsym]);
        states.insert(set.clone(), id);
        worklist.push_back(set);
        id
    };

    let init = intern(
        BTreeSet::from([g.init]),
        &mut states,
        &mut accepting,
        &mut trans,
        &mut worklist,
    );
    while let Some(set) = worklist.pop_front() {
        let id = states[&set];
        for k in 0..nsym {
            let mut next = BTreeSet::new();
            for l in &set {
                if let Some(s) = succ.get(&(*l, k)) {
                    next.extend(s.iter().copied());
                }
            }
            let nid = intern(
                next,
                &mut states,
                &mut accepting,
                &mut trans,
                &mut worklist,
            );
            trans[id][k] = nid;
        }
    }
    Dfa {
        init,
        accepting,
        trans,
    }
}

/// Hopcroft partition refinement on a complete DFA.
fn minimize(dfa: &Dfa) -> Dfa {
    let n = dfa.num_states();
    let nsym = if n > 0 { dfa.trans[0].len() } else { 0 };
    let mut rev: Vec<Vec<Vec<usize>>> = vec![vec![Vec::new(); nsym]; n];
    for s in 0..n {
        for k in 0..nsym {
            rev[dfa.trans[s][k]][k].push(s);
        }
    }
    let mut partition: Vec<BTreeSet<usize>> = Vec::new();
    let accepting: BTreeSet<usize> = (0..n).filter(|s| dfa.accepting[*s]).collect();
    let rejecting: BTreeSet<usize> = (0..n).filter(|s| !dfa.accepting[*s]).collect();
    if !accepting.is_empty() {
        partition.push(accepting);
    }
    if !rejecting.is_empty() {
        partition.push(rejecting);
    }
    let mut work: VecDeque<(usize, usize)> = VecDeque::new();
    for k in 0..nsym {
        for b in 0..partition.len() {
            work.push_back((b, k));
        }
    }
    while let Some((b, k)) = work.pop_front() {
        if b >= partition.len() {
            continue;
        }
        let splitter: BTreeSet<usize> = partition[b]
            .iter()
            .flat_map(|s| rev[*s][k].iter().copied())
            .collect();
        if splitter.is_empty() {
            continue;
        }
        let blocks = partition.len();
        for i in 0..blocks {
            let inside: BTreeSet<usize> = partition[i].intersection(&splitter).copied().collect();
            if inside.is_empty() || inside.len() == partition[i].len() {
                continue;
            }
            let outside: BTreeSet<usize> = partition[i].difference(&inside).copied().collect();
            partition[i] = inside;
            partition.push(outside);
            let new_block = partition.len() - 1;
            for sym in 0..nsym {
                work.push_back((i, sym));
                work.push_back((new_block, sym));
            }
        }
    }
    let mut block_of = vec![0usize; n];
    for (b, states) in partition.iter().enumerate() {
        for s in states {
            block_of[*s] = b;
        }
    }
    let m = partition.len();
    let mut accepting = vec![false; m];
    let mut trans = vec![vec![usize::MAX; nsym]; m];
    for (b, states) in partition.iter().enumerate() {
        let rep = *states.iter().next().expect("non-empty block");
        accepting[b] = dfa.accepting[rep];
        for k in 0..nsym {
            trans[b][k] = block_of[dfa.trans[rep][k]];
        }
    }
    Dfa {
        init: block_of[dfa.init],
        accepting,
        trans,
    }
}

/// Drops states that are unreachable or cannot reach an accepting state;
/// the result is a partial automaton rendered as a general PCFA.
fn dfa_to_trimmed_general(dfa: &Dfa, ctx: &AlphabetCtx) -> GeneralPcfa {
    let n = dfa.num_states();
    let nsym = ctx.symbols.len();
    let mut reach = vec![false; n];
    reach[dfa.init] = true;
    let mut queue = VecDeque::from([dfa.init]);
    while let Some(s) = queue.pop_front() {
        for k in 0..nsym {
            let t = dfa.trans[s][k];
            if !reach[t] {
                reach[t] = true;
                queue.push_back(t);
            }
        }
    }
    let mut rev: Vec<Vec<usize>> = vec![Vec::new(); n];
    for s in 0..n {
        for k in 0..nsym {
            rev[dfa.trans[s][k]].push(s);
        }
    }
    let mut alive = vec![false; n];
    let mut queue: VecDeque<usize> = (0..n).filter(|s| dfa.accepting[*s]).collect();
    for s in &queue {
        alive[*s] = true;
    }
    while let Some(s) = queue.pop_front() {
        for p in &rev[s] {
            if !alive[*p] {
                alive[*p] = true;
                queue.push_back(*p);
            }
        }
    }
    if !(reach[dfa.init] && alive[dfa.init]) {
        return GeneralPcfa::empty(ctx.to_set());
    }
    let keep: Vec<usize> = (0..n).filter(|s| reach[*s] && alive[*s]).collect();
    let index: BTreeMap<usize, usize> = keep.iter().enumerate().map(|(i, s)| (*s, i)).collect();
    let mut delta = BTreeSet::new();
    for s in &keep {
        for k in 0..nsym {
            let t = dfa.trans[*s][k];
            if index.contains_key(&t) {
                delta.insert((index[s], ctx.symbols[k].clone(), index[&t]));
            }
        }
    }
    GeneralPcfa {
        num_locs: keep.len(),
        init: index[&dfa.init],
        ends: keep
            .iter()
            .filter(|s| dfa.accepting[**s])
            .map(|s| index[s])
            .collect(),
        alphabet: ctx.to_set(),
        delta,
    }
}

/// True iff the automaton is deterministic with exactly one ending
/// location that has no out-transitions.
pub fn is_valid_pcfa(g: &GeneralPcfa) -> bool {
    if g.ends.len() != 1 {
        return false;
    }
    let end = *g.ends.iter().next().expect("one end");
    let mut seen: BTreeSet<(Loc, &Statement)> = BTreeSet::new();
    for (from, stmt, _) in &g.delta {
        if *from == end {
            return false;
        }
        if !seen.insert((*from, stmt)) {
            return false;
        }
    }
    true
}

fn general_to_pcfa(g: &GeneralPcfa) -> Pcfa {
    assert!(is_valid_pcfa(g), "automaton does not satisfy the PCFA shape");
    Pcfa {
        num_locs: g.num_locs,
        init: g.init,
        end: *g.ends.iter().next().expect("one end"),
        alphabet: g.alphabet.clone(),
        delta: g
            .delta
            .iter()
            .map(|(from, stmt, to)| ((*from, stmt.clone()), *to))
            .collect(),
    }
}

/// Deterministic minimal intersection: the language of `a` restricted to
/// `v`. No accepting trace of a PCFA is a prefix of another, so after
/// minimization and trimming the result is again a PCFA; the empty
/// intersection yields the designated empty automaton.
pub fn min_intersect(a: &Pcfa, v: &GeneralPcfa) -> Pcfa {
    let ctx = AlphabetCtx::from_sets([&a.alphabet, &v.alphabet]);
    let product = intersect_general(&a.to_general(), v);
    let dfa = determinize(&product, &ctx);
    let minimal = minimize(&dfa);
    let trimmed = dfa_to_trimmed_general(&minimal, &ctx);
    if trimmed.ends.is_empty() {
        let mut empty = Pcfa::empty();
        empty.alphabet = ctx.to_set();
        return empty;
    }
    general_to_pcfa(&trimmed)
}

/// Language complement relative to the automaton's own alphabet,
/// restricted to non-empty words.
pub fn complement(g: &GeneralPcfa) -> GeneralPcfa {
    complement_over(g, &AlphabetCtx::from_sets([&g.alphabet]))
}

/// Complement over an explicitly enlarged working alphabet.
pub fn complement_over(g: &GeneralPcfa, ctx: &AlphabetCtx) -> GeneralPcfa {
    let dfa = determinize(g, ctx);
    let flipped = Dfa {
        init: dfa.init,
        accepting: dfa.accepting.iter().map(|b| !b).collect(),
        trans: dfa.trans,
    };
    let minimal = minimize(&flipped);
    let mut out = dfa_to_trimmed_general(&minimal, ctx);
    // traces are non-empty: never accept the empty word
    if out.ends.contains(&out.init) {
        let fresh = out.num_locs;
        out.num_locs += 1;
        let copies: Vec<(Loc, Statement, Loc)> = out
            .delta
            .iter()
            .filter(|(from, _, _)| *from == out.init)
            .map(|(_, s, to)| (fresh, s.clone(), *to))
            .collect();
        out.delta.extend(copies);
        out.init = fresh;
    }
    out
}

/// Language union via a fresh initial location copying both entries.
pub fn union(g1: &GeneralPcfa, g2: &GeneralPcfa) -> GeneralPcfa {
    let offset = g1.num_locs;
    let fresh = g1.num_locs + g2.num_locs;
    let mut delta: BTreeSet<(Loc, Statement, Loc)> = g1.delta.clone();
    for (from, stmt, to) in &g2.delta {
        delta.insert((from + offset, stmt.clone(), to + offset));
    }
    let entry_edges: Vec<(Loc, Statement, Loc)> = delta
        .iter()
        .filter(|(from, _, _)| *from == g1.init || *from == g2.init + offset)
        .map(|(_, s, to)| (fresh, s.clone(), *to))
        .collect();
    delta.extend(entry_edges);
    let mut ends: BTreeSet<Loc> = g1.ends.clone();
    ends.extend(g2.ends.iter().map(|e| e + offset));
    let mut alphabet = g1.alphabet.clone();
    alphabet.extend(g2.alphabet.iter().cloned());
    GeneralPcfa {
        num_locs: fresh + 1,
        init: fresh,
        ends,
        alphabet,
        delta,
    }
}

/// Language intersection of two general automata (plain product).
pub fn intersect_general(g1: &GeneralPcfa, g2: &GeneralPcfa) -> GeneralPcfa {
    let mut alphabet = g1.alphabet.clone();
    alphabet.extend(g2.alphabet.iter().cloned());
    let mut succ1: BTreeMap<(Loc, &Statement), Vec<Loc>> = BTreeMap::new();
    for (from, stmt, to) in &g1.delta {
        succ1.entry((*from, stmt)).or_default().push(*to);
    }
    let mut succ2: BTreeMap<(Loc, &Statement), Vec<Loc>> = BTreeMap::new();
    for (from, stmt, to) in &g2.delta {
        succ2.entry((*from, stmt)).or_default().push(*to);
    }
    let mut index: HashMap<(Loc, Loc), usize> = HashMap::new();
    let mut worklist = VecDeque::new();
    let mut delta = BTreeSet::new();
    let mut ends = BTreeSet::new();
    let mut next_id = 0usize;
    let mut intern = |pair: (Loc, Loc),
                      index: &mut HashMap<(Loc, Loc), usize>,
                      wl: &mut VecDeque<(Loc, Loc)>|
     -> usize {
        *index.entry(pair).or_insert_with(|| {
            wl.push_back(pair);
            let id = next_id;
            next_id += 1;
            id
        })
    };
    let init = intern((g1.init, g2.init), &mut index, &mut worklist);
    while let Some((l1, l2)) = worklist.pop_front() {
        let id = index[&(l1, l2)];
        if g1.ends.contains(&l1) && g2.ends.contains(&l2) {
            ends.insert(id);
        }
        for ((from, stmt), tos1) in succ1.range((l1, &MIN_STATEMENT)..) {
            if *from != l1 {
                break;
            }
            if let Some(tos2) = succ2.get(&(l2, *stmt)) {
                for t1 in tos1 {
                    for t2 in tos2 {
                        let tid = intern((*t1, *t2), &mut index, &mut worklist);
                        delta.insert((id, (*stmt).clone(), tid));
                    }
                }
            }
        }
    }
    GeneralPcfa {
        num_locs: index.len(),
        init,
        ends,
        alphabet,
        delta,
    }
}

static MIN_STATEMENT: Statement = Statement::Skip;

/// Language equivalence over the union alphabet (product of the two
/// determinizations, searching for an acceptance mismatch). The empty
/// word is ignored: traces are non-empty.
pub fn language_equal(g1: &GeneralPcfa, g2: &GeneralPcfa) -> bool {
    let ctx = AlphabetCtx::from_sets([&g1.alphabet, &g2.alphabet]);
    let d1 = determinize(g1, &ctx);
    let d2 = determinize(g2, &ctx);
    let nsym = ctx.symbols.len();
    let mut seen = BTreeSet::new();
    let mut queue = VecDeque::new();
    for k in 0..nsym {
        let pair = (d1.trans[d1.init][k], d2.trans[d2.init][k]);
        if seen.insert(pair) {
            queue.push_back(pair);
        }
    }
    while let Some((s1, s2)) = queue.pop_front() {
        if d1.accepting[s1] != d2.accepting[s2] {
            return false;
        }
        for k in 0..nsym {
            let pair = (d1.trans[s1][k], d2.trans[s2][k]);
            if seen.insert(pair) {
                queue.push_back(pair);
            }
        }
    }
    true
}

/// Language inclusion, ignoring the empty word.
pub fn language_subset(g1: &GeneralPcfa, g2: &GeneralPcfa) -> bool {
    let ctx = AlphabetCtx::from_sets([&g1.alphabet, &g2.alphabet]);
    let d1 = determinize(g1, &ctx);
    let d2 = determinize(g2, &ctx);
    let nsym = ctx.symbols.len();
    let mut seen = BTreeSet::new();
    let mut queue = VecDeque::new();
    for k in 0..nsym {
        let pair = (d1.trans[d1.init][k], d2.trans[d2.init][k]);
        if seen.insert(pair) {
            queue.push_back(pair);
        }
    }
    while let Some((s1, s2)) = queue.pop_front() {
        if d1.accepting[s1] && !d2.accepting[s2] {
            return false;
        }
        for k in 0..nsym {
            let pair = (d1.trans[s1][k], d2.trans[s2][k]);
            if seen.insert(pair) {
                queue.push_back(pair);
            }
        }
    }
    true
}

// ---- weight-ordered enumeration ----

struct QueueItem {
    weight: Weight,
    trace: Vec<Statement>,
    loc: Loc,
}

impl PartialEq for QueueItem {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for QueueItem {}
impl PartialOrd for QueueItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for QueueItem {
    // max-heap: heavier first, then shorter, then lexicographically least
    fn cmp(&self, other: &Self) -> Ordering {
        self.weight
            .cmp(&other.weight)
            .then_with(|| other.trace.len().cmp(&self.trace.len()))
            .then_with(|| other.trace.cmp(&self.trace))
    }
}

/// Lazy stream of the accepting traces of an MC-shaped automaton that the
/// exclusion automaton rejects, in non-increasing weight; ties break
/// shortest-then-lexicographic. States on Dirac cycles cannot reach the
/// ending location in an MC-shaped automaton, so co-reachability pruning
/// keeps the stream productive.
pub struct WeightOrderedTraces<'a> {
    automaton: &'a Pcfa,
    exclude: Option<&'a GeneralPcfa>,
    alive: Vec<bool>,
    heap: BinaryHeap<QueueItem>,
}

pub fn enumerate_by_weight<'a>(
    g: &'a Pcfa,
    exclude: Option<&'a GeneralPcfa>,
) -> WeightOrderedTraces<'a> {
    debug_assert!(crate::mdp::is_mc_shaped(g), "enumeration requires an MC");
    let mut rev: Vec<Vec<Loc>> = vec![Vec::new(); g.num_locs];
    for ((from, _), to) in &g.delta {
        rev[*to].push(*from);
    }
    let mut alive = vec![false; g.num_locs];
    alive[g.end] = true;
    let mut queue = VecDeque::from([g.end]);
    while let Some(l) = queue.pop_front() {
        for p in &rev[l] {
            if !alive[*p] {
                alive[*p] = true;
                queue.push_back(*p);
            }
        }
    }
    let mut heap = BinaryHeap::new();
    if alive[g.init] {
        heap.push(QueueItem {
            weight: dyadic(0),
            trace: Vec::new(),
            loc: g.init,
        });
    }
    WeightOrderedTraces {
        automaton: g,
        exclude,
        alive,
        heap,
    }
}

impl Iterator for WeightOrderedTraces<'_> {
    type Item = (Trace, Weight);

    fn next(&mut self) -> Option<Self::Item> {
        while let Some(item) = self.heap.pop() {
            let mut accepted = None;
            if item.loc == self.automaton.end && !item.trace.is_empty() {
                accepted = Some((Trace::new(item.trace.clone()), item.weight.clone()));
            }
            for (stmt, to) in self.automaton.out_edges(item.loc) {
                if !self.alive[to] {
                    continue;
                }
                let mut trace = item.trace.clone();
                trace.push(stmt.clone());
                let weight = if stmt.is_probabilistic() {
                    &item.weight * dyadic(1)
                } else {
                    item.weight.clone()
                };
                self.heap.push(QueueItem {
                    weight,
                    trace,
                    loc: to,
                });
            }
            if let Some((trace, weight)) = accepted {
                match self.exclude {
                    Some(e) if e.accepts(&trace) => continue,
                    _ => return Some((trace, weight)),
                }
            }
        }
        None
    }
}

/// A minimal-length member of `a && v` not accepted by `storage`, ties
/// broken lexicographically by the fixed statement order; `None` iff the
/// difference is empty.
pub fn shortest_excluded_trace(a: &Pcfa, v: &GeneralPcfa, storage: &GeneralPcfa) -> Option<Trace> {
    let ctx = AlphabetCtx::from_sets([&a.alphabet, &v.alphabet, &storage.alphabet]);
    let da = determinize(&a.to_general(), &ctx);
    let dv = determinize(v, &ctx);
    let ds = determinize(storage, &ctx);
    let nsym = ctx.symbols.len();
    let accepting =
        |s: (usize, usize, usize)| da.accepting[s.0] && dv.accepting[s.1] && !ds.accepting[s.2];

    let start = (da.init, dv.init, ds.init);
    let mut parents: HashMap<(usize, usize, usize), ((usize, usize, usize), usize)> =
        HashMap::new();
    let mut seen = BTreeSet::from([start]);
    let mut queue = VecDeque::from([start]);
    let rebuild = |state: (usize, usize, usize),
                   parents: &HashMap<(usize, usize, usize), ((usize, usize, usize), usize)>| {
        let mut word = Vec::new();
        let mut at = state;
        while let Some((prev, k)) = parents.get(&at) {
            word.push(ctx.symbols[*k].clone());
            at = *prev;
        }
        word.reverse();
        Trace::new(word)
    };
    // the empty word is not a trace, so the start state never counts as
    // accepting; symbols are expanded in sorted order, which makes the
    // first accepting state found carry the lexicographically least
    // shortest word
    while let Some(state) = queue.pop_front() {
        for k in 0..nsym {
            let next = (
                da.trans[state.0][k],
                dv.trans[state.1][k],
                ds.trans[state.2][k],
            );
            if seen.insert(next) {
                parents.insert(next, (state, k));
                if accepting(next) {
                    return Some(rebuild(next, &parents));
                }
                queue.push_back(next);
            }
        }
    }
    None
}

/// Total enumeration of a finite language by DAG search: `None` when the
/// language exceeds `limit` members (the caller falls back to a smaller
/// generalisation); panics when the automaton has a cycle on an
/// accepting path. Used to harvest ordered Floyd-Hoare automata.
pub fn enumerate_finite_language(g: &GeneralPcfa, limit: usize) -> Option<Vec<Trace>> {
    fn walk(
        g: &GeneralPcfa,
        at: Loc,
        succ: &BTreeMap<Loc, Vec<(Statement, Loc)>>,
        stack: &mut Vec<Statement>,
        out: &mut Vec<Trace>,
        limit: usize,
        depth: usize,
    ) -> bool {
        assert!(
            depth <= g.num_locs,
            "cycle detected while enumerating a finite language"
        );
        if out.len() > limit {
            return false;
        }
        if g.ends.contains(&at) && !stack.is_empty() {
            out.push(Trace::new(stack.clone()));
        }
        if let Some(edges) = succ.get(&at) {
            for (s, to) in edges {
                stack.push(s.clone());
                let ok = walk(g, *to, succ, stack, out, limit, depth + 1);
                stack.pop();
                if !ok {
                    return false;
                }
            }
        }
        true
    }
    let mut succ: BTreeMap<Loc, Vec<(Statement, Loc)>> = BTreeMap::new();
    for (from, s, to) in &g.delta {
        succ.entry(*from).or_default().push((s.clone(), *to));
    }
    let mut out = Vec::new();
    let mut stack: Vec<Statement> = Vec::new();
    if !walk(g, g.init, &succ, &mut stack, &mut out, limit, 0) {
        return None;
    }
    out.sort();
    out.dedup();
    Some(out)
}

/// Sum of the weights of finitely many traces.
pub fn total_weight<'a>(traces: impl IntoIterator<Item = &'a Trace>) -> Weight {
    traces
        .into_iter()
        .map(crate::pcfa::trace_weight)
        .fold(Weight::zero(), |a, b| a + b)
}
