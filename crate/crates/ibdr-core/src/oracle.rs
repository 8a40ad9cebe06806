//! Ground-truth engines: bounded configuration-space search over
//! (node, stack, stack) and cubic Dyck saturation.
//!
//! These are deliberately independent of the production solvers; every
//! solver is differentially tested against them at small scale. Searches are
//! breadth-first over configurations with explicit caps, so absence of a
//! witness within caps is a definite answer, and a memory guard aborts
//! loudly rather than truncating silently.

use std::collections::hash_map::Entry;
use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};

use num_bigint::BigUint;

use crate::engine::{effective_label, Active, EffLabel};
use crate::error::{Error, Result};
use crate::graph::{
    reduce_traversal, Alphabet, DirectedEdge, DirectedGraph, InterleavedGraph, Label, NodeId,
    Polarity, Step, Traversal,
};
use crate::partition::Partition;

/// Default cap on distinct visited configurations per search.
pub const DEFAULT_STATE_LIMIT: usize = 10_000_000;

/// Sentinel for "no length cap": the search saturates the capped
/// configuration space instead.
pub const UNBOUNDED_LEN: u32 = u32::MAX;

/// Explicit caps on a configuration search.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SearchCaps {
    /// Maximum number of steps of a witness ([`UNBOUNDED_LEN`] for none).
    pub max_len: u32,
    /// Maximum stack height per alphabet, on every prefix.
    pub max_sh1: u32,
    pub max_sh2: u32,
}

impl SearchCaps {
    pub fn new(max_len: u32, max_sh1: u32, max_sh2: u32) -> SearchCaps {
        SearchCaps {
            max_len,
            max_sh1,
            max_sh2,
        }
    }

    pub fn unbounded_len(max_sh1: u32, max_sh2: u32) -> SearchCaps {
        SearchCaps {
            max_len: UNBOUNDED_LEN,
            max_sh1,
            max_sh2,
        }
    }
}

/// A stack word, interned in a trie: each entry is (rest-of-stack, top).
/// Id 0 is the empty stack. Pushes and pops are O(1) lookups, and equal
/// words always share an id, so a configuration is three integers.
///
/// A unary alphabet degenerates to a chain: the id encodes exactly the
/// counter value's history, so stacks and counters share one machinery.
struct StackArena {
    entries: Vec<(u32, u16)>,
    heights: Vec<u32>,
    children: HashMap<(u32, u16), u32>,
}

impl StackArena {
    fn new() -> StackArena {
        StackArena {
            entries: vec![(0, 0)],
            heights: vec![0],
            children: HashMap::new(),
        }
    }

    fn push(&mut self, stack: u32, sym: u16) -> u32 {
        match self.children.entry((stack, sym)) {
            Entry::Occupied(e) => *e.get(),
            Entry::Vacant(e) => {
                let id = self.entries.len() as u32;
                e.insert(id);
                self.entries.push((stack, sym));
                self.heights.push(self.heights[stack as usize] + 1);
                id
            }
        }
    }

    fn top(&self, stack: u32) -> Option<u16> {
        if stack == 0 {
            None
        } else {
            Some(self.entries[stack as usize].1)
        }
    }

    fn pop(&self, stack: u32) -> Option<u32> {
        if stack == 0 {
            None
        } else {
            Some(self.entries[stack as usize].0)
        }
    }

    fn height(&self, stack: u32) -> u32 {
        self.heights[stack as usize]
    }
}

/// A search state: node plus one interned stack per alphabet.
/// (A unary stack is just its height; the trie makes that literal.)
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Configuration {
    pub node: NodeId,
    pub stack1: u32,
    pub stack2: u32,
}

const EMPTY: u32 = 0;

struct ConfigSpace {
    arenas: [StackArena; 2],
    caps: SearchCaps,
}

impl ConfigSpace {
    fn new(caps: SearchCaps) -> ConfigSpace {
        ConfigSpace {
            arenas: [StackArena::new(), StackArena::new()],
            caps,
        }
    }

    fn cap(&self, alphabet: Alphabet) -> u32 {
        match alphabet {
            Alphabet::A1 => self.caps.max_sh1,
            Alphabet::A2 => self.caps.max_sh2,
        }
    }

    /// Applies a label to a configuration's stacks, or None when blocked
    /// (cap reached, pop on empty, or mismatched pop).
    fn apply(&mut self, cfg: Configuration, to: NodeId, label: Label) -> Option<Configuration> {
        let (stack1, stack2) = match label {
            Label::Epsilon => (cfg.stack1, cfg.stack2),
            Label::Paren {
                alphabet,
                symbol,
                polarity,
            } => {
                let a = alphabet.index();
                let stack = if a == 0 { cfg.stack1 } else { cfg.stack2 };
                let cap = self.cap(alphabet);
                let arena = &mut self.arenas[a];
                let new = match polarity {
                    Polarity::Open => {
                        if arena.height(stack) >= cap {
                            return None;
                        }
                        arena.push(stack, symbol)
                    }
                    Polarity::Close => {
                        if arena.top(stack) != Some(symbol) {
                            return None;
                        }
                        arena.pop(stack).unwrap()
                    }
                };
                if a == 0 {
                    (new, cfg.stack2)
                } else {
                    (cfg.stack1, new)
                }
            }
        };
        Some(Configuration {
            node: to,
            stack1,
            stack2,
        })
    }
}

fn guard(visited: usize, limit: usize) -> Result<()> {
    if visited > limit {
        return Err(Error::ResourceLimit(format!(
            "configuration search exceeded {limit} visited states"
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Single-pair search with witness reconstruction
// ---------------------------------------------------------------------------

/// Shortest valid traversal `src -> dst` with both stacks empty at both ends
/// and every prefix within caps, or None if no such witness exists within
/// caps. Ties break toward the lexicographically smallest successor
/// (node id, then label code), which the sorted adjacency provides.
pub fn bounded_reach(
    g: &InterleavedGraph,
    src: NodeId,
    dst: NodeId,
    caps: SearchCaps,
) -> Result<Option<Traversal>> {
    bounded_reach_with_limit(g, src, dst, caps, DEFAULT_STATE_LIMIT)
}

pub fn bounded_reach_with_limit(
    g: &InterleavedGraph,
    src: NodeId,
    dst: NodeId,
    caps: SearchCaps,
    limit: usize,
) -> Result<Option<Traversal>> {
    if src == dst {
        return Ok(Some(Traversal::empty(src)));
    }
    let adj = g.adjacency();
    let mut space = ConfigSpace::new(caps);
    let start = Configuration {
        node: src,
        stack1: EMPTY,
        stack2: EMPTY,
    };
    let goal = Configuration {
        node: dst,
        stack1: EMPTY,
        stack2: EMPTY,
    };
    let mut parents: HashMap<Configuration, (Configuration, Step)> = HashMap::new();
    let mut queue: VecDeque<(Configuration, u32)> = VecDeque::new();
    let mut seen: HashSet<Configuration> = HashSet::new();
    seen.insert(start);
    queue.push_back((start, 0));
    while let Some((cfg, depth)) = queue.pop_front() {
        if depth >= caps.max_len {
            continue;
        }
        for entry in &adj[cfg.node as usize] {
            if let Some(next) = space.apply(cfg, entry.to, entry.label) {
                if seen.insert(next) {
                    guard(seen.len(), limit)?;
                    parents.insert(
                        next,
                        (
                            cfg,
                            Step {
                                edge: entry.edge,
                                forward: entry.forward,
                            },
                        ),
                    );
                    if next == goal {
                        return Ok(Some(rebuild(g, start, next, &parents)?));
                    }
                    queue.push_back((next, depth + 1));
                }
            }
        }
    }
    Ok(None)
}

fn rebuild(
    g: &InterleavedGraph,
    start: Configuration,
    end: Configuration,
    parents: &HashMap<Configuration, (Configuration, Step)>,
) -> Result<Traversal> {
    let mut steps = Vec::new();
    let mut at = end;
    while at != start {
        let (prev, step) = parents[&at];
        steps.push(step);
        at = prev;
    }
    steps.reverse();
    let t = Traversal {
        start: start.node,
        steps,
    };
    reduce_traversal(g, &t)
}

// ---------------------------------------------------------------------------
// All-pairs search
// ---------------------------------------------------------------------------

/// The partition where `u ≡ v` iff a bounded witness exists between them.
///
/// With no length cap the capped configuration graph is undirected (every
/// step reverses through the mirror edge), so empty-stack configurations are
/// grouped by their connected component: each configuration is visited once
/// per graph. With a finite length cap the relation is searched per source
/// and closed into a partition.
pub fn all_pairs_bounded(g: &InterleavedGraph, caps: SearchCaps) -> Result<Partition> {
    all_pairs_bounded_with_limit(g, caps, DEFAULT_STATE_LIMIT)
}

pub fn all_pairs_bounded_with_limit(
    g: &InterleavedGraph,
    caps: SearchCaps,
    limit: usize,
) -> Result<Partition> {
    if caps.max_len == UNBOUNDED_LEN {
        if let Some(p) = all_pairs_dense(g, caps, limit)? {
            return Ok(p);
        }
        return all_pairs_sparse(g, caps, limit);
    }
    // Finite length cap: plain per-source searches.
    let mut partition = Partition::new(g.n());
    for src in 0..g.n() {
        for dst in src + 1..g.n() {
            if partition.same(src, dst) {
                continue;
            }
            if bounded_reach_with_limit(g, src, dst, caps, limit)?.is_some() {
                partition.union(src, dst);
            }
        }
    }
    Ok(partition)
}

/// Dense fast path for two unary alphabets: configurations are
/// (node, height, height) triples indexed into a flat bitmap.
fn all_pairs_dense(
    g: &InterleavedGraph,
    caps: SearchCaps,
    limit: usize,
) -> Result<Option<Partition>> {
    if g.k1() > 1 || g.k2() > 1 {
        return Ok(None);
    }
    let n = g.n() as u64;
    let levels1 = caps.max_sh1 as u64 + 1;
    let levels2 = caps.max_sh2 as u64 + 1;
    let space = n
        .checked_mul(levels1)
        .and_then(|x| x.checked_mul(levels2))
        .filter(|&x| x <= limit as u64);
    let space = match space {
        Some(s) => s as usize,
        None => return Ok(None),
    };
    let idx = |node: u64, h1: u64, h2: u64| ((node * levels1 + h1) * levels2 + h2) as usize;
    let adj = g.adjacency();
    let mut visited = vec![false; space];
    let mut partition = Partition::new(g.n());
    let mut queue: VecDeque<(NodeId, u32, u32)> = VecDeque::new();
    for src in 0..g.n() {
        if visited[idx(src as u64, 0, 0)] {
            continue;
        }
        visited[idx(src as u64, 0, 0)] = true;
        queue.push_back((src, 0, 0));
        while let Some((node, h1, h2)) = queue.pop_front() {
            if h1 == 0 && h2 == 0 {
                partition.union(src, node);
            }
            for entry in &adj[node as usize] {
                let next = match entry.label {
                    Label::Epsilon => Some((entry.to, h1, h2)),
                    Label::Paren {
                        alphabet: Alphabet::A1,
                        polarity,
                        ..
                    } => match polarity {
                        Polarity::Open if h1 < caps.max_sh1 => Some((entry.to, h1 + 1, h2)),
                        Polarity::Close if h1 > 0 => Some((entry.to, h1 - 1, h2)),
                        _ => None,
                    },
                    Label::Paren {
                        alphabet: Alphabet::A2,
                        polarity,
                        ..
                    } => match polarity {
                        Polarity::Open if h2 < caps.max_sh2 => Some((entry.to, h1, h2 + 1)),
                        Polarity::Close if h2 > 0 => Some((entry.to, h1, h2 - 1)),
                        _ => None,
                    },
                };
                if let Some((to, nh1, nh2)) = next {
                    let i = idx(to as u64, nh1 as u64, nh2 as u64);
                    if !visited[i] {
                        visited[i] = true;
                        queue.push_back((to, nh1, nh2));
                    }
                }
            }
        }
    }
    Ok(Some(partition))
}

fn all_pairs_sparse(g: &InterleavedGraph, caps: SearchCaps, limit: usize) -> Result<Partition> {
    let adj = g.adjacency();
    let mut space = ConfigSpace::new(caps);
    let mut visited: HashSet<Configuration> = HashSet::new();
    let mut partition = Partition::new(g.n());
    let mut queue: VecDeque<Configuration> = VecDeque::new();
    for src in 0..g.n() {
        let start = Configuration {
            node: src,
            stack1: EMPTY,
            stack2: EMPTY,
        };
        if visited.contains(&start) {
            continue;
        }
        visited.insert(start);
        queue.push_back(start);
        while let Some(cfg) = queue.pop_front() {
            if cfg.stack1 == EMPTY && cfg.stack2 == EMPTY {
                partition.union(src, cfg.node);
            }
            for entry in &adj[cfg.node as usize] {
                if let Some(next) = space.apply(cfg, entry.to, entry.label) {
                    if visited.insert(next) {
                        guard(visited.len(), limit)?;
                        queue.push_back(next);
                    }
                }
            }
        }
    }
    Ok(partition)
}

// ---------------------------------------------------------------------------
// Directed search (for the bidirecting reduction's input side)
// ---------------------------------------------------------------------------

/// Bounded witness search on a *directed* interleaved Dyck graph: only the
/// stored edges are traversable, no mirrors. Returns the edge-index sequence
/// of a shortest witness.
pub fn directed_bounded_reach(
    dg: &DirectedGraph,
    src: NodeId,
    dst: NodeId,
    caps: SearchCaps,
) -> Result<Option<Vec<usize>>> {
    directed_bounded_reach_with_limit(dg, src, dst, caps, DEFAULT_STATE_LIMIT)
}

pub fn directed_bounded_reach_with_limit(
    dg: &DirectedGraph,
    src: NodeId,
    dst: NodeId,
    caps: SearchCaps,
    limit: usize,
) -> Result<Option<Vec<usize>>> {
    if src == dst {
        return Ok(Some(Vec::new()));
    }
    let mut adj: Vec<Vec<(usize, &DirectedEdge)>> = vec![Vec::new(); dg.n as usize];
    for (i, e) in dg.edges.iter().enumerate() {
        adj[e.src as usize].push((i, e));
    }
    for list in &mut adj {
        list.sort_by_cached_key(|(i, e)| (e.dst, e.label.code(), *i));
    }
    let mut space = ConfigSpace::new(caps);
    let start = Configuration {
        node: src,
        stack1: EMPTY,
        stack2: EMPTY,
    };
    let goal = Configuration {
        node: dst,
        stack1: EMPTY,
        stack2: EMPTY,
    };
    let mut parents: HashMap<Configuration, (Configuration, usize)> = HashMap::new();
    let mut seen: HashSet<Configuration> = HashSet::new();
    let mut queue: VecDeque<(Configuration, u32)> = VecDeque::new();
    seen.insert(start);
    queue.push_back((start, 0));
    while let Some((cfg, depth)) = queue.pop_front() {
        if depth >= caps.max_len {
            continue;
        }
        for (i, e) in &adj[cfg.node as usize] {
            if let Some(next) = space.apply(cfg, e.dst, e.label) {
                if seen.insert(next) {
                    guard(seen.len(), limit)?;
                    parents.insert(next, (cfg, *i));
                    if next == goal {
                        let mut edges = Vec::new();
                        let mut at = next;
                        while at != start {
                            let (prev, idx) = parents[&at];
                            edges.push(idx);
                            at = prev;
                        }
                        edges.reverse();
                        return Ok(Some(edges));
                    }
                    queue.push_back((next, depth + 1));
                }
            }
        }
    }
    Ok(None)
}

/// Checks that an edge-index sequence is a valid interleaved Dyck witness
/// `src -> dst` in the directed graph.
pub fn validate_directed_witness(
    dg: &DirectedGraph,
    src: NodeId,
    dst: NodeId,
    edges: &[usize],
) -> bool {
    let mut at = src;
    let mut stacks: [Vec<u16>; 2] = [Vec::new(), Vec::new()];
    for &i in edges {
        let Some(e) = dg.edges.get(i) else {
            return false;
        };
        if e.src != at {
            return false;
        }
        if let Label::Paren {
            alphabet,
            symbol,
            polarity,
        } = e.label
        {
            let stack = &mut stacks[alphabet.index()];
            match polarity {
                Polarity::Open => stack.push(symbol),
                Polarity::Close => {
                    if stack.pop() != Some(symbol) {
                        return false;
                    }
                }
            }
        }
        at = e.dst;
    }
    at == dst && stacks[0].is_empty() && stacks[1].is_empty()
}

// ---------------------------------------------------------------------------
// Cubic saturation
// ---------------------------------------------------------------------------

/// Classic all-pairs Dyck reachability by saturation on an explicit directed
/// edge list (use [`crate::graph::mirror_closure`] for bidirected inputs).
///
/// Rules, iterated to fixpoint: every `(u, u)`; an epsilon edge yields its
/// pair; `(u, x)` and `(x, v)` yield `(u, v)`; and an open-`s` edge into `x`
/// with `(x, y)` and a close-`s` edge out of `y` yields the outer pair.
pub fn naive_dyck_closure(
    n: NodeId,
    edges: &[DirectedEdge],
    active: Active,
    k1: u16,
) -> HashSet<(NodeId, NodeId)> {
    let mut eps: Vec<(NodeId, NodeId)> = Vec::new();
    let mut opens_from: Vec<Vec<(NodeId, u32)>> = vec![Vec::new(); n as usize];
    let mut closes_from: Vec<Vec<(NodeId, u32)>> = vec![Vec::new(); n as usize];
    for e in edges {
        match effective_label(e.label, active, k1) {
            EffLabel::Eps => eps.push((e.src, e.dst)),
            EffLabel::Open(s) => opens_from[e.src as usize].push((e.dst, s)),
            EffLabel::Close(s) => closes_from[e.src as usize].push((e.dst, s)),
        }
    }
    let mut reach: HashSet<(NodeId, NodeId)> = HashSet::new();
    let mut out: Vec<Vec<NodeId>> = vec![Vec::new(); n as usize];
    let mut into: Vec<Vec<NodeId>> = vec![Vec::new(); n as usize];
    let mut work: VecDeque<(NodeId, NodeId)> = VecDeque::new();
    let add = |u: NodeId,
               v: NodeId,
                   reach: &mut HashSet<(NodeId, NodeId)>,
                   out: &mut Vec<Vec<NodeId>>,
                   into: &mut Vec<Vec<NodeId>>,
                   work: &mut VecDeque<(NodeId, NodeId)>| {
        if reach.insert((u, v)) {
            out[u as usize].push(v);
            into[v as usize].push(u);
            work.push_back((u, v));
        }
    };
    for u in 0..n {
        add(u, u, &mut reach, &mut out, &mut into, &mut work);
    }
    for (u, v) in eps {
        add(u, v, &mut reach, &mut out, &mut into, &mut work);
    }
    while let Some((x, y)) = work.pop_front() {
        // Transitivity on both sides.
        for v in out[y as usize].clone() {
            add(x, v, &mut reach, &mut out, &mut into, &mut work);
        }
        for u in into[x as usize].clone() {
            add(u, y, &mut reach, &mut out, &mut into, &mut work);
        }
        // Wrap (x, y) in a matched open/close pair.
        for &(u, s) in &opens_from_rev(&opens_from, x) {
            for &(v, s2) in &closes_from[y as usize] {
                if s == s2 {
                    add(u, v, &mut reach, &mut out, &mut into, &mut work);
                }
            }
        }
    }
    reach
}

// Opens are indexed by source; the wrap rule needs opens *into* x.
// Precomputing the reverse once per call keeps the hot loop simple.
fn opens_from_rev(opens_from: &[Vec<(NodeId, u32)>], x: NodeId) -> Vec<(NodeId, u32)> {
    let mut result = Vec::new();
    for (src, lst) in opens_from.iter().enumerate() {
        for &(dst, s) in lst {
            if dst == x {
                result.push((src as NodeId, s));
            }
        }
    }
    result
}

/// Symmetrizes a pair set into a partition (Dyck reachability on bidirected
/// graphs is symmetric, so this closes the naive relation into classes).
pub fn pairs_to_partition(n: NodeId, pairs: &HashSet<(NodeId, NodeId)>) -> Partition {
    let mut p = Partition::new(n);
    for &(u, v) in pairs {
        p.union(u, v);
    }
    p
}

// ---------------------------------------------------------------------------
// Reporting helpers
// ---------------------------------------------------------------------------

/// The exact bounded-enumeration length bound `n^3 * k^(3*delta)`, as an
/// arbitrary-precision integer. A documentation and reporting helper; never
/// used as an actual search cap.
pub fn algorithm2_length_bound(n: u64, k: u64, delta: u32) -> BigUint {
    BigUint::from(n).pow(3) * BigUint::from(k).pow(3 * delta)
}

/// Exhaustively enumerates, within caps, the set of counter deltas over
/// alphabet 2 that are attainable by walks `entry -> exit` whose alphabet-1
/// stack starts and ends empty. The alphabet-2 counter is tracked as a
/// signed offset in `[-slack, +slack]`, so locally negative excursions are
/// explored. The search closes the whole capped state space (no length cap).
pub fn balanced_exit_deltas(
    g: &InterleavedGraph,
    entry: NodeId,
    exit: NodeId,
    max_sh1: u32,
    slack: u32,
    limit: usize,
) -> Result<BTreeSet<i64>> {
    if g.k2() > 1 {
        return Err(Error::AlphabetArity {
            expected: "a unary second alphabet (k2 <= 1)",
            k1: g.k1(),
            k2: g.k2(),
        });
    }
    let adj = g.adjacency();
    let mut arena = StackArena::new();
    // (node, stack1, counter offset by +slack).
    let mut visited: HashSet<(NodeId, u32, u32)> = HashSet::new();
    let mut queue: VecDeque<(NodeId, u32, u32)> = VecDeque::new();
    let start = (entry, EMPTY, slack);
    visited.insert(start);
    queue.push_back(start);
    let mut deltas = BTreeSet::new();
    while let Some((node, s1, c)) = queue.pop_front() {
        if node == exit && s1 == EMPTY {
            deltas.insert(c as i64 - slack as i64);
        }
        for step in &adj[node as usize] {
            let next = match step.label {
                Label::Epsilon => Some((step.to, s1, c)),
                Label::Paren {
                    alphabet: Alphabet::A1,
                    symbol,
                    polarity,
                } => match polarity {
                    Polarity::Open if arena.height(s1) < max_sh1 => {
                        Some((step.to, arena.push(s1, symbol), c))
                    }
                    Polarity::Close if arena.top(s1) == Some(symbol) => {
                        Some((step.to, arena.pop(s1).unwrap(), c))
                    }
                    _ => None,
                },
                Label::Paren {
                    alphabet: Alphabet::A2,
                    polarity,
                    ..
                } => match polarity {
                    Polarity::Open if c < 2 * slack => Some((step.to, s1, c + 1)),
                    Polarity::Close if c > 0 => Some((step.to, s1, c - 1)),
                    _ => None,
                },
            };
            if let Some(next) = next {
                if visited.insert(next) {
                    guard(visited.len(), limit)?;
                    queue.push_back(next);
                }
            }
        }
    }
    Ok(deltas)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{parse_graph, path_metrics};

    fn demo_graph() -> InterleavedGraph {
        parse_graph(
            "graph 4 2 2\n\
             e 0 0 o1:1\ne 0 1 o2:1\ne 1 1 o2:2\ne 1 3 c1:2\n\
             e 3 2 c1:1\ne 2 3 c2:1\ne 1 2 o1:2\ne 2 1 c2:2\n",
        )
        .unwrap()
    }

    #[test]
    fn finds_witness_in_demo_graph() {
        let g = demo_graph();
        let caps = SearchCaps::new(20, 6, 6);
        let t = bounded_reach(&g, 0, 3, caps).unwrap().expect("witness");
        let m = path_metrics(&g, &t).unwrap();
        assert!(m.balanced());
        assert_eq!(m.cnt, [0, 0]);
        assert!(t.len() <= 20);
        assert!(m.max_sh[0] <= 6 && m.max_sh[1] <= 6);
    }

    #[test]
    fn reflexive_reach_is_empty_traversal() {
        let g = demo_graph();
        let t = bounded_reach(&g, 2, 2, SearchCaps::new(5, 1, 1))
            .unwrap()
            .unwrap();
        assert!(t.is_empty());
        assert_eq!(t.start, 2);
    }

    #[test]
    fn tight_height_caps() {
        let g = demo_graph();
        // The forward walk of the figure needs alphabet-2 height 2, but
        // mirror edges admit a witness that interleaves the two pushes;
        // exhaustive search at cap 1 finds it.
        let caps = SearchCaps::new(40, 6, 1);
        let t = bounded_reach(&g, 0, 3, caps).unwrap().expect("witness");
        let m = path_metrics(&g, &t).unwrap();
        assert!(m.balanced());
        assert!(m.max_sh[1] <= 1);
        // With the second alphabet forbidden outright, nothing leaves u's
        // self-loop and the search exhausts.
        let caps = SearchCaps::new(40, 6, 0);
        assert!(bounded_reach(&g, 0, 3, caps).unwrap().is_none());
    }

    #[test]
    fn deterministic_witness() {
        let g = demo_graph();
        let caps = SearchCaps::new(20, 6, 6);
        let a = bounded_reach(&g, 0, 3, caps).unwrap().unwrap();
        let b = bounded_reach(&g, 0, 3, caps).unwrap().unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn cap_monotonicity() {
        let g = demo_graph();
        let small = SearchCaps::new(12, 2, 2);
        let big = SearchCaps::new(24, 4, 4);
        if bounded_reach(&g, 0, 3, small).unwrap().is_some() {
            assert!(bounded_reach(&g, 0, 3, big).unwrap().is_some());
        }
        // Symmetry: reverse direction reachable too.
        assert_eq!(
            bounded_reach(&g, 0, 3, big).unwrap().is_some(),
            bounded_reach(&g, 3, 0, big).unwrap().is_some()
        );
    }

    #[test]
    fn all_pairs_on_edgeless_graph() {
        let g = InterleavedGraph::empty(3, 1, 1);
        let p = all_pairs_bounded(&g, SearchCaps::new(10, 3, 3)).unwrap();
        assert_eq!(p.class_count(), 3);
    }

    #[test]
    fn all_pairs_groups_demo_endpoints() {
        let g = demo_graph();
        let p = all_pairs_bounded(&g, SearchCaps::unbounded_len(6, 6)).unwrap();
        assert!(p.same(0, 3));
    }

    #[test]
    fn dense_and_sparse_paths_agree() {
        let g = parse_graph(
            "graph 5 1 1\n\
             e 0 1 o1:1\ne 1 2 c1:1\ne 2 3 o2:1\ne 3 4 c2:1\ne 4 0 -\ne 1 1 o2:1\n",
        )
        .unwrap();
        let caps = SearchCaps::unbounded_len(5, 5);
        let dense = all_pairs_dense(&g, caps, DEFAULT_STATE_LIMIT)
            .unwrap()
            .unwrap();
        let sparse = all_pairs_sparse(&g, caps, DEFAULT_STATE_LIMIT).unwrap();
        assert_eq!(dense, sparse);
    }

    #[test]
    fn state_limit_aborts_loudly() {
        let g = demo_graph();
        let caps = SearchCaps::unbounded_len(6, 6);
        let err = bounded_reach_with_limit(&g, 0, 3, caps, 3).unwrap_err();
        assert!(matches!(err, Error::ResourceLimit(_)));
    }

    #[test]
    fn naive_closure_matched_pair() {
        let edges = vec![
            DirectedEdge::new(0, 1, Label::open(Alphabet::A1, 1)),
            DirectedEdge::new(1, 2, Label::close(Alphabet::A1, 1)),
        ];
        let r = naive_dyck_closure(3, &edges, Active::One, 1);
        assert!(r.contains(&(0, 2)));
        assert!(!r.contains(&(0, 1)));
    }

    #[test]
    fn naive_closure_unmatched_close_is_reflexive_only() {
        let edges = vec![DirectedEdge::new(0, 1, Label::close(Alphabet::A1, 1))];
        let r = naive_dyck_closure(2, &edges, Active::One, 1);
        assert_eq!(r.len(), 2);
        assert!(r.contains(&(0, 0)) && r.contains(&(1, 1)));
    }

    #[test]
    fn naive_closure_on_bidirected_fixture() {
        let g = parse_graph(
            "graph 4 2 1\n\
             e 0 3 -\ne 3 0 -\ne 3 2 c1:2\ne 2 3 o1:2\ne 0 1 c1:1\ne 1 0 o1:1\n",
        )
        .unwrap();
        let closure = naive_dyck_closure(4, &crate::graph::mirror_closure(&g), Active::One, 2);
        let p = pairs_to_partition(4, &closure);
        assert_eq!(p.classes(), vec![vec![0, 3], vec![1], vec![2]]);
    }

    #[test]
    fn length_bound_values() {
        assert_eq!(algorithm2_length_bound(1, 1, 5), BigUint::from(1u32));
        assert_eq!(algorithm2_length_bound(2, 2, 1), BigUint::from(64u32));
        let big = algorithm2_length_bound(10, 2, 200);
        assert_eq!(big, BigUint::from(1000u32) << 600);
    }

    #[test]
    fn directed_search_ignores_mirrors() {
        // Directed: only u -open-> x exists; no balanced witness.
        let dg = DirectedGraph::new(
            2,
            1,
            1,
            vec![DirectedEdge::new(0, 1, Label::open(Alphabet::A1, 1))],
        )
        .unwrap();
        let caps = SearchCaps::new(10, 3, 3);
        assert!(directed_bounded_reach(&dg, 0, 1, caps).unwrap().is_none());
        // With the matching close added, the witness appears and validates.
        let dg2 = DirectedGraph::new(
            3,
            1,
            1,
            vec![
                DirectedEdge::new(0, 1, Label::open(Alphabet::A1, 1)),
                DirectedEdge::new(1, 2, Label::close(Alphabet::A1, 1)),
            ],
        )
        .unwrap();
        let w = directed_bounded_reach(&dg2, 0, 2, caps).unwrap().unwrap();
        assert_eq!(w, vec![0, 1]);
        assert!(validate_directed_witness(&dg2, 0, 2, &w));
        assert!(!validate_directed_witness(&dg2, 0, 2, &[1, 0]));
    }
}
