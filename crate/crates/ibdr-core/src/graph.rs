//! Graph data model and text format.
//!
//! An interleaved Dyck graph carries edge labels drawn from two disjoint
//! parenthesis alphabets plus epsilon. Graphs here are bidirected by
//! construction: only one direction of each edge is stored (a "half-edge"),
//! and the reverse direction with the complementary label is implied
//! everywhere. Storing the mirror explicitly is allowed (it is a distinct
//! half-edge), but never required.
//!
//! The on-disk `ibdg` format is line oriented:
//!
//! ```text
//! graph <n> <k1> <k2>
//! e <src> <dst> <label>
//! ```
//!
//! where `<label>` is `-` for epsilon, or `o<a>:<s>` / `c<a>:<s>` for the
//! open/close parenthesis `s` of alphabet `a` (`a` is `1` or `2`,
//! `1 <= s <= k_a`). Lines starting with `#` are comments; blank lines are
//! ignored. Canonical output sorts edge lines by `(src, dst, label code)`.

use std::collections::BTreeSet;
use std::fmt;

use crate::error::{Error, Result};

pub type NodeId = u32;

/// One of the two disjoint parenthesis alphabets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Alphabet {
    A1,
    A2,
}

impl Alphabet {
    pub fn index(self) -> usize {
        match self {
            Alphabet::A1 => 0,
            Alphabet::A2 => 1,
        }
    }

    pub fn number(self) -> u8 {
        match self {
            Alphabet::A1 => 1,
            Alphabet::A2 => 2,
        }
    }

    pub fn other(self) -> Alphabet {
        match self {
            Alphabet::A1 => Alphabet::A2,
            Alphabet::A2 => Alphabet::A1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Polarity {
    Open,
    Close,
}

/// An edge label: epsilon, or one parenthesis of one alphabet.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Label {
    Epsilon,
    Paren {
        alphabet: Alphabet,
        symbol: u16,
        polarity: Polarity,
    },
}

impl Label {
    pub fn open(alphabet: Alphabet, symbol: u16) -> Label {
        Label::Paren {
            alphabet,
            symbol,
            polarity: Polarity::Open,
        }
    }

    pub fn close(alphabet: Alphabet, symbol: u16) -> Label {
        Label::Paren {
            alphabet,
            symbol,
            polarity: Polarity::Close,
        }
    }

    /// Complementation: swaps open and close, fixes epsilon. An involution.
    pub fn complement(self) -> Label {
        match self {
            Label::Epsilon => Label::Epsilon,
            Label::Paren {
                alphabet,
                symbol,
                polarity,
            } => Label::Paren {
                alphabet,
                symbol,
                polarity: match polarity {
                    Polarity::Open => Polarity::Close,
                    Polarity::Close => Polarity::Open,
                },
            },
        }
    }

    pub fn is_epsilon(self) -> bool {
        self == Label::Epsilon
    }

    pub fn alphabet(self) -> Option<Alphabet> {
        match self {
            Label::Epsilon => None,
            Label::Paren { alphabet, .. } => Some(alphabet),
        }
    }

    /// The file-format code for this label (`-`, `o1:3`, `c2:1`, ...).
    pub fn code(self) -> String {
        match self {
            Label::Epsilon => "-".to_string(),
            Label::Paren {
                alphabet,
                symbol,
                polarity,
            } => {
                let p = match polarity {
                    Polarity::Open => 'o',
                    Polarity::Close => 'c',
                };
                format!("{}{}:{}", p, alphabet.number(), symbol)
            }
        }
    }

    /// Parses a label code. Symbol bounds are checked by the caller.
    pub fn parse_code(s: &str) -> Option<Label> {
        if s == "-" {
            return Some(Label::Epsilon);
        }
        let polarity = match s.as_bytes().first()? {
            b'o' => Polarity::Open,
            b'c' => Polarity::Close,
            _ => return None,
        };
        let rest = &s[1..];
        let (a, sym) = rest.split_once(':')?;
        let alphabet = match a {
            "1" => Alphabet::A1,
            "2" => Alphabet::A2,
            _ => return None,
        };
        let symbol: u16 = sym.parse().ok()?;
        if symbol == 0 {
            return None;
        }
        Some(Label::Paren {
            alphabet,
            symbol,
            polarity,
        })
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.code())
    }
}

/// A stored edge. The logical edge set of a graph is the stored half-edges
/// together with their mirrors `(dst, src, complement(label))`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct HalfEdge {
    pub src: NodeId,
    pub dst: NodeId,
    pub label: Label,
}

impl HalfEdge {
    pub fn new(src: NodeId, dst: NodeId, label: Label) -> HalfEdge {
        HalfEdge { src, dst, label }
    }

    pub fn mirror(&self) -> HalfEdge {
        HalfEdge {
            src: self.dst,
            dst: self.src,
            label: self.label.complement(),
        }
    }

    /// An epsilon self-loop is its own mirror.
    pub fn is_self_mirror(&self) -> bool {
        self.src == self.dst && self.label == self.label.complement()
    }

    fn canonical_key(&self) -> (NodeId, NodeId, String) {
        (self.src, self.dst, self.label.code())
    }
}

/// A directed labeled edge, as produced by [`mirror_closure`].
pub type DirectedEdge = HalfEdge;

/// An interleaved Dyck graph over two disjoint parenthesis alphabets of
/// sizes `k1` and `k2`, bidirected by the half-edge convention.
///
/// Half-edges are deduplicated and held in canonical `(src, dst, label code)`
/// order, so structural equality is order independent. The graph is immutable
/// after construction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InterleavedGraph {
    n: NodeId,
    k1: u16,
    k2: u16,
    half_edges: Vec<HalfEdge>,
}

impl InterleavedGraph {
    pub fn new(n: NodeId, k1: u16, k2: u16, mut half_edges: Vec<HalfEdge>) -> Result<Self> {
        for e in &half_edges {
            validate_node(e.src, n)?;
            validate_node(e.dst, n)?;
            validate_label(e.label, k1, k2)?;
        }
        half_edges.sort_by_cached_key(|e| e.canonical_key());
        half_edges.dedup();
        Ok(InterleavedGraph {
            n,
            k1,
            k2,
            half_edges,
        })
    }

    pub fn empty(n: NodeId, k1: u16, k2: u16) -> Self {
        InterleavedGraph {
            n,
            k1,
            k2,
            half_edges: Vec::new(),
        }
    }

    /// Trusted constructor for internally generated edge lists (no
    /// validation, no dedup, no canonical sort). Used where the edge list is
    /// large and known well-formed, e.g. counter flattening.
    pub(crate) fn from_raw_parts(n: NodeId, k1: u16, k2: u16, half_edges: Vec<HalfEdge>) -> Self {
        debug_assert!(half_edges
            .iter()
            .all(|e| e.src < n && e.dst < n && validate_label(e.label, k1, k2).is_ok()));
        InterleavedGraph {
            n,
            k1,
            k2,
            half_edges,
        }
    }

    pub fn n(&self) -> NodeId {
        self.n
    }

    pub fn k1(&self) -> u16 {
        self.k1
    }

    pub fn k2(&self) -> u16 {
        self.k2
    }

    pub fn k(&self, alphabet: Alphabet) -> u16 {
        match alphabet {
            Alphabet::A1 => self.k1,
            Alphabet::A2 => self.k2,
        }
    }

    pub fn half_edges(&self) -> &[HalfEdge] {
        &self.half_edges
    }

    /// Index of a stored half-edge, when the edge list is in canonical order.
    pub fn half_edge_index(&self, edge: &HalfEdge) -> Option<usize> {
        self.half_edges
            .binary_search_by_key(&edge.canonical_key(), |e| e.canonical_key())
            .ok()
            .or_else(|| self.half_edges.iter().position(|e| e == edge))
    }

    /// All logical edges: stored half-edges plus mirrors. An epsilon
    /// self-loop contributes a single logical edge.
    pub fn logical_edges(&self) -> impl Iterator<Item = HalfEdge> + '_ {
        self.half_edges.iter().flat_map(|e| {
            let mirror = if e.is_self_mirror() {
                None
            } else {
                Some(e.mirror())
            };
            std::iter::once(*e).chain(mirror)
        })
    }

    /// Per-node adjacency over logical edges, each entry remembering which
    /// stored half-edge it came from and in which direction. Entries are
    /// sorted by `(destination, label code)` for deterministic searches.
    pub fn adjacency(&self) -> Vec<Vec<AdjEntry>> {
        let mut adj: Vec<Vec<AdjEntry>> = vec![Vec::new(); self.n as usize];
        for (idx, e) in self.half_edges.iter().enumerate() {
            adj[e.src as usize].push(AdjEntry {
                to: e.dst,
                label: e.label,
                edge: idx,
                forward: true,
            });
            if !e.is_self_mirror() {
                let m = e.mirror();
                adj[m.src as usize].push(AdjEntry {
                    to: m.dst,
                    label: m.label,
                    edge: idx,
                    forward: false,
                });
            }
        }
        for list in &mut adj {
            list.sort_by_cached_key(|a| (a.to, a.label.code(), a.edge, !a.forward));
        }
        adj
    }

    /// Node degree over stored half-edges (self-loops counted once).
    pub fn stored_degree(&self, v: NodeId) -> usize {
        self.half_edges
            .iter()
            .filter(|e| e.src == v || e.dst == v)
            .count()
    }
}

/// One logical edge leaving a node, tagged with its stored half-edge.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AdjEntry {
    pub to: NodeId,
    pub label: Label,
    pub edge: usize,
    pub forward: bool,
}

fn validate_node(id: NodeId, n: NodeId) -> Result<()> {
    if id >= n {
        return Err(Error::NodeOutOfRange { id: id as u64, n });
    }
    Ok(())
}

fn validate_label(label: Label, k1: u16, k2: u16) -> Result<()> {
    if let Label::Paren {
        alphabet, symbol, ..
    } = label
    {
        let k = match alphabet {
            Alphabet::A1 => k1,
            Alphabet::A2 => k2,
        };
        if symbol == 0 || symbol > k {
            return Err(Error::SymbolOutOfRange {
                alphabet: alphabet.number(),
                symbol,
                k,
            });
        }
    }
    Ok(())
}

/// A directed (non-bidirected) interleaved Dyck graph. Mirrors are *not*
/// implied; this is the input shape of the bidirecting reduction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DirectedGraph {
    pub n: NodeId,
    pub k1: u16,
    pub k2: u16,
    pub edges: Vec<DirectedEdge>,
}

impl DirectedGraph {
    pub fn new(n: NodeId, k1: u16, k2: u16, edges: Vec<DirectedEdge>) -> Result<Self> {
        for e in &edges {
            validate_node(e.src, n)?;
            validate_node(e.dst, n)?;
            validate_label(e.label, k1, k2)?;
        }
        Ok(DirectedGraph { n, k1, k2, edges })
    }
}

// ---------------------------------------------------------------------------
// Text format
// ---------------------------------------------------------------------------

struct RawDoc {
    header: (NodeId, u16, u16),
    edges: Vec<HalfEdge>,
}

fn parse_document(text: &str, keyword: &str) -> Result<RawDoc> {
    let mut header: Option<(NodeId, u16, u16)> = None;
    let mut edges = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        let lineno = lineno + 1;
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let head = tokens.next().unwrap();
        match head {
            h if h == keyword => {
                if header.is_some() {
                    return Err(Error::Parse {
                        line: lineno,
                        msg: "duplicate header".into(),
                    });
                }
                let n = parse_token(tokens.next(), lineno, "node count")?;
                let k1 = parse_token(tokens.next(), lineno, "k1")?;
                let k2 = parse_token(tokens.next(), lineno, "k2")?;
                if tokens.next().is_some() {
                    return Err(Error::Parse {
                        line: lineno,
                        msg: "trailing tokens after header".into(),
                    });
                }
                header = Some((n, k1, k2));
            }
            "e" => {
                let (n, k1, k2) = header.ok_or(Error::MissingHeader)?;
                let src: NodeId = parse_token(tokens.next(), lineno, "source id")?;
                let dst: NodeId = parse_token(tokens.next(), lineno, "destination id")?;
                let code = tokens.next().ok_or_else(|| Error::Parse {
                    line: lineno,
                    msg: "missing label".into(),
                })?;
                if tokens.next().is_some() {
                    return Err(Error::Parse {
                        line: lineno,
                        msg: "trailing tokens after edge".into(),
                    });
                }
                let label = Label::parse_code(code).ok_or_else(|| Error::Parse {
                    line: lineno,
                    msg: format!("bad label `{code}`"),
                })?;
                validate_node(src, n)?;
                validate_node(dst, n)?;
                validate_label(label, k1, k2)?;
                edges.push(HalfEdge::new(src, dst, label));
            }
            other => {
                return Err(Error::Parse {
                    line: lineno,
                    msg: format!("unknown directive `{other}`"),
                });
            }
        }
    }
    let header = header.ok_or(Error::MissingHeader)?;
    Ok(RawDoc { header, edges })
}

fn parse_token<T: std::str::FromStr>(tok: Option<&str>, line: usize, what: &str) -> Result<T> {
    let tok = tok.ok_or_else(|| Error::Parse {
        line,
        msg: format!("missing {what}"),
    })?;
    tok.parse().map_err(|_| Error::Parse {
        line,
        msg: format!("bad {what} `{tok}`"),
    })
}

/// Parses an `ibdg` document into a bidirected graph.
pub fn parse_graph(text: &str) -> Result<InterleavedGraph> {
    let doc = parse_document(text, "graph")?;
    let (n, k1, k2) = doc.header;
    InterleavedGraph::new(n, k1, k2, doc.edges)
}

/// Parses the `digraph` variant: same line grammar, but edges are directed
/// as written and no mirrors are implied.
pub fn parse_directed_graph(text: &str) -> Result<DirectedGraph> {
    let doc = parse_document(text, "digraph")?;
    let (n, k1, k2) = doc.header;
    DirectedGraph::new(n, k1, k2, doc.edges)
}

/// Canonical serialization: header plus edge lines sorted by
/// `(src, dst, label code)`.
pub fn serialize_graph(g: &InterleavedGraph) -> String {
    let mut out = format!("graph {} {} {}\n", g.n(), g.k1(), g.k2());
    let mut edges: Vec<&HalfEdge> = g.half_edges().iter().collect();
    edges.sort_by_cached_key(|e| e.canonical_key());
    for e in edges {
        out.push_str(&format!("e {} {} {}\n", e.src, e.dst, e.label.code()));
    }
    out
}

pub fn serialize_directed_graph(g: &DirectedGraph) -> String {
    let mut out = format!("digraph {} {} {}\n", g.n, g.k1, g.k2);
    let mut edges: Vec<&DirectedEdge> = g.edges.iter().collect();
    edges.sort_by_cached_key(|e| e.canonical_key());
    for e in edges {
        out.push_str(&format!("e {} {} {}\n", e.src, e.dst, e.label.code()));
    }
    out
}

// ---------------------------------------------------------------------------
// Projections and alphabet maps
// ---------------------------------------------------------------------------

/// Projection onto one alphabet: every label of the other alphabet becomes
/// epsilon, everything else is untouched.
pub fn project_alphabet(g: &InterleavedGraph, keep: Alphabet) -> InterleavedGraph {
    let edges = g
        .half_edges()
        .iter()
        .map(|e| {
            let label = match e.label {
                Label::Paren { alphabet, .. } if alphabet != keep => Label::Epsilon,
                l => l,
            };
            HalfEdge::new(e.src, e.dst, label)
        })
        .collect();
    InterleavedGraph::new(g.n(), g.k1(), g.k2(), edges).expect("projection preserves validity")
}

/// Collapses one alphabet to a single parenthesis symbol, keeping polarity.
pub fn project_to_unary(g: &InterleavedGraph, which: Alphabet) -> InterleavedGraph {
    let edges = g
        .half_edges()
        .iter()
        .map(|e| {
            let label = match e.label {
                Label::Paren {
                    alphabet, polarity, ..
                } if alphabet == which => Label::Paren {
                    alphabet,
                    symbol: 1,
                    polarity,
                },
                l => l,
            };
            HalfEdge::new(e.src, e.dst, label)
        })
        .collect();
    let (k1, k2) = match which {
        Alphabet::A1 => (1, g.k2()),
        Alphabet::A2 => (g.k1(), 1),
    };
    InterleavedGraph::new(g.n(), k1, k2, edges).expect("unary projection preserves validity")
}

/// Swaps the roles of the two alphabets.
pub fn swap_alphabets(g: &InterleavedGraph) -> InterleavedGraph {
    let edges = g
        .half_edges()
        .iter()
        .map(|e| {
            let label = match e.label {
                Label::Paren {
                    alphabet,
                    symbol,
                    polarity,
                } => Label::Paren {
                    alphabet: alphabet.other(),
                    symbol,
                    polarity,
                },
                l => l,
            };
            HalfEdge::new(e.src, e.dst, label)
        })
        .collect();
    InterleavedGraph::new(g.n(), g.k2(), g.k1(), edges).expect("swap preserves validity")
}

/// Expands the implicit mirrors into an explicit directed edge list of size
/// `2 * |half_edges|` minus coincidences (an epsilon self-loop mirrors to
/// itself). This feeds the naive closure oracle.
pub fn mirror_closure(g: &InterleavedGraph) -> Vec<DirectedEdge> {
    let mut out = Vec::with_capacity(2 * g.half_edges().len());
    for e in g.half_edges() {
        out.push(*e);
        if !e.is_self_mirror() {
            out.push(e.mirror());
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Traversals
// ---------------------------------------------------------------------------

/// One step of a walk: a stored half-edge traversed forward or backward.
/// A backward step swaps endpoints and complements the label.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Step {
    pub edge: usize,
    pub forward: bool,
}

/// The oriented (from, to, label) view of one step.
pub fn resolve_step(g: &InterleavedGraph, step: Step) -> (NodeId, NodeId, Label) {
    let e = &g.half_edges()[step.edge];
    if step.forward {
        (e.src, e.dst, e.label)
    } else {
        (e.dst, e.src, e.label.complement())
    }
}

/// A walk through a graph, as (half-edge, direction) steps.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Traversal {
    pub start: NodeId,
    pub steps: Vec<Step>,
}

impl Traversal {
    pub fn empty(start: NodeId) -> Traversal {
        Traversal {
            start,
            steps: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// The oriented (from, to, label) view of one step.
    pub fn resolve(&self, g: &InterleavedGraph, step: Step) -> (NodeId, NodeId, Label) {
        resolve_step(g, step)
    }

    /// Checks chaining and returns the arrival node.
    pub fn end(&self, g: &InterleavedGraph) -> Result<NodeId> {
        let mut at = self.start;
        for (i, step) in self.steps.iter().enumerate() {
            let (from, to, _) = self.resolve(g, *step);
            if from != at {
                return Err(Error::NonChaining { step: i, at, from });
            }
            at = to;
        }
        Ok(at)
    }

    pub fn labels(&self, g: &InterleavedGraph) -> Result<Vec<Label>> {
        self.end(g)?;
        Ok(self
            .steps
            .iter()
            .map(|s| self.resolve(g, *s).2)
            .collect())
    }

    /// The reverse walk: same edges in opposite order and direction.
    pub fn reversed(&self, g: &InterleavedGraph) -> Result<Traversal> {
        let end = self.end(g)?;
        let steps = self
            .steps
            .iter()
            .rev()
            .map(|s| Step {
                edge: s.edge,
                forward: !s.forward,
            })
            .collect();
        Ok(Traversal { start: end, steps })
    }
}

/// Per-alphabet path metrics: final signed height, maximum height over
/// prefixes, the stack word, and prefix validity.
///
/// `cnt` and `max_sh` are pure letter counts, defined for any chaining walk.
/// `valid` is true iff no prefix pops an empty stack or a mismatched symbol;
/// only then is `stack` meaningful (and `|stack[a]| == cnt[a] >= 0`).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PathMetrics {
    pub cnt: [i64; 2],
    pub max_sh: [i64; 2],
    pub stack: [Vec<u16>; 2],
    pub valid: bool,
}

impl PathMetrics {
    /// Valid with both stacks empty: the walk witnesses reachability.
    pub fn balanced(&self) -> bool {
        self.valid && self.stack[0].is_empty() && self.stack[1].is_empty()
    }
}

/// Computes [`PathMetrics`] for a chaining traversal.
pub fn path_metrics(g: &InterleavedGraph, t: &Traversal) -> Result<PathMetrics> {
    t.end(g)?;
    let mut cnt = [0i64; 2];
    let mut sh = [0i64; 2];
    let mut max_sh = [0i64; 2];
    let mut stack: [Vec<u16>; 2] = [Vec::new(), Vec::new()];
    let mut valid = true;
    for step in &t.steps {
        let (_, _, label) = t.resolve(g, *step);
        if let Label::Paren {
            alphabet,
            symbol,
            polarity,
        } = label
        {
            let a = alphabet.index();
            match polarity {
                Polarity::Open => {
                    cnt[a] += 1;
                    sh[a] += 1;
                    max_sh[a] = max_sh[a].max(sh[a]);
                    stack[a].push(symbol);
                }
                Polarity::Close => {
                    cnt[a] -= 1;
                    sh[a] -= 1;
                    match stack[a].pop() {
                        Some(top) if top == symbol => {}
                        _ => valid = false,
                    }
                }
            }
        }
    }
    Ok(PathMetrics {
        cnt,
        max_sh,
        stack,
        valid,
    })
}

type StackPair = (Vec<u16>, Vec<u16>);

/// The (node, stack, stack) configuration after every prefix of a valid
/// traversal, including the empty prefix.
fn prefix_configs(g: &InterleavedGraph, t: &Traversal) -> Result<Vec<(NodeId, StackPair)>> {
    let metrics = path_metrics(g, t)?;
    if !metrics.valid {
        return Err(Error::InvalidTraversal(
            "a prefix pops an empty or mismatched stack",
        ));
    }
    let mut at = t.start;
    let mut stacks: StackPair = (Vec::new(), Vec::new());
    let mut out = vec![(at, stacks.clone())];
    for step in &t.steps {
        let (_, to, label) = t.resolve(g, *step);
        if let Label::Paren {
            alphabet,
            symbol,
            polarity,
        } = label
        {
            let stack = match alphabet {
                Alphabet::A1 => &mut stacks.0,
                Alphabet::A2 => &mut stacks.1,
            };
            match polarity {
                Polarity::Open => stack.push(symbol),
                Polarity::Close => {
                    stack.pop();
                }
            }
        }
        at = to;
        out.push((at, stacks.clone()));
    }
    Ok(out)
}

/// A traversal is irreducible iff no cyclic sub-walk returns to a previously
/// seen (node, stack, stack) configuration.
pub fn is_irreducible(g: &InterleavedGraph, t: &Traversal) -> Result<bool> {
    let configs = prefix_configs(g, t)?;
    let mut seen = BTreeSet::new();
    for c in &configs {
        if !seen.insert(c.clone()) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Removes configuration-repeating cycles left to right, yielding an
/// irreducible traversal with the same endpoints and final stacks.
pub fn reduce_traversal(g: &InterleavedGraph, t: &Traversal) -> Result<Traversal> {
    let configs = prefix_configs(g, t)?;
    let mut kept_steps: Vec<Step> = Vec::new();
    let mut kept_configs: Vec<(NodeId, StackPair)> = vec![configs[0].clone()];
    let mut seen: std::collections::HashMap<(NodeId, StackPair), usize> =
        std::collections::HashMap::new();
    seen.insert(configs[0].clone(), 0);
    for (i, step) in t.steps.iter().enumerate() {
        let next = configs[i + 1].clone();
        if let Some(&at) = seen.get(&next) {
            for dropped in kept_configs.drain(at + 1..) {
                seen.remove(&dropped);
            }
            kept_steps.truncate(at);
        } else {
            kept_steps.push(*step);
            seen.insert(next.clone(), kept_configs.len());
            kept_configs.push(next);
        }
    }
    Ok(Traversal {
        start: t.start,
        steps: kept_steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn paren(a: u8, s: u16, open: bool) -> Label {
        let alphabet = if a == 1 { Alphabet::A1 } else { Alphabet::A2 };
        if open {
            Label::open(alphabet, s)
        } else {
            Label::close(alphabet, s)
        }
    }

    /// The interleaved graph with the two-alphabet round trip u -> v.
    fn demo_graph() -> InterleavedGraph {
        // u=0, x=1, y=2, v=3
        parse_graph(
            "graph 4 2 2\n\
             e 0 0 o1:1\n\
             e 0 1 o2:1\n\
             e 1 1 o2:2\n\
             e 1 3 c1:2\n\
             e 3 2 c1:1\n\
             e 2 3 c2:1\n\
             e 1 2 o1:2\n\
             e 2 1 c2:2\n",
        )
        .unwrap()
    }

    /// The caption walk of the demo graph, using labels
    /// o1:1 o2:1 o2:2 o1:2 c2:2 c1:2 c1:1 c2:1.
    fn demo_walk(g: &InterleavedGraph) -> Traversal {
        let seq = [
            (0, 0, paren(1, 1, true)),
            (0, 1, paren(2, 1, true)),
            (1, 1, paren(2, 2, true)),
            (1, 2, paren(1, 2, true)),
            (2, 1, paren(2, 2, false)),
            (1, 3, paren(1, 2, false)),
            (3, 2, paren(1, 1, false)),
            (2, 3, paren(2, 1, false)),
        ];
        let mut steps = Vec::new();
        for (src, dst, label) in seq {
            let fwd = HalfEdge::new(src, dst, label);
            if let Some(i) = g.half_edge_index(&fwd) {
                steps.push(Step {
                    edge: i,
                    forward: true,
                });
            } else {
                let i = g.half_edge_index(&fwd.mirror()).expect("edge exists");
                steps.push(Step {
                    edge: i,
                    forward: false,
                });
            }
        }
        Traversal { start: 0, steps }
    }

    #[test]
    fn parse_single_edge() {
        let g = parse_graph("graph 2 1 1\ne 0 1 o1:1").unwrap();
        assert_eq!(g.n(), 2);
        assert_eq!(g.half_edges(), &[HalfEdge::new(0, 1, paren(1, 1, true))]);
    }

    #[test]
    fn parse_epsilon_self_loop() {
        let g = parse_graph("graph 1 1 1\ne 0 0 -").unwrap();
        assert_eq!(g.half_edges(), &[HalfEdge::new(0, 0, Label::Epsilon)]);
    }

    #[test]
    fn parse_rejects_symbol_out_of_range() {
        let err = parse_graph("graph 2 1 1\ne 0 1 o2:3").unwrap_err();
        assert!(matches!(
            err,
            Error::SymbolOutOfRange {
                alphabet: 2,
                symbol: 3,
                k: 1
            }
        ));
    }

    #[test]
    fn parse_rejects_node_out_of_range() {
        let err = parse_graph("graph 2 1 1\ne 0 2 -").unwrap_err();
        assert!(matches!(err, Error::NodeOutOfRange { id: 2, n: 2 }));
    }

    #[test]
    fn parse_requires_header() {
        assert!(matches!(
            parse_graph("e 0 1 -").unwrap_err(),
            Error::MissingHeader
        ));
        assert!(matches!(parse_graph("").unwrap_err(), Error::MissingHeader));
    }

    #[test]
    fn parse_reports_line_numbers() {
        let err = parse_graph("graph 2 1 1\n# fine\n\ne 0 1 oops").unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 4),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicate_half_edges_are_deduplicated() {
        let g = parse_graph("graph 2 1 1\ne 0 1 o1:1\ne 0 1 o1:1").unwrap();
        assert_eq!(g.half_edges().len(), 1);
        assert_eq!(serialize_graph(&g).lines().count(), 2);
    }

    #[test]
    fn serialize_empty_graph_is_header_only() {
        let g = InterleavedGraph::empty(0, 1, 1);
        assert_eq!(serialize_graph(&g), "graph 0 1 1\n");
    }

    #[test]
    fn projection_erases_other_alphabet() {
        let g = demo_graph();
        let p = project_alphabet(&g, Alphabet::A1);
        assert!(p
            .half_edges()
            .iter()
            .all(|e| e.label.alphabet() != Some(Alphabet::A2)));
        // Alphabet-1 labels untouched.
        let a1 = |g: &InterleavedGraph| {
            g.half_edges()
                .iter()
                .filter(|e| e.label.alphabet() == Some(Alphabet::A1))
                .count()
        };
        assert_eq!(a1(&g), a1(&p));
        // Projecting a single-alphabet graph onto its own alphabet is the identity.
        let only1 = parse_graph("graph 2 1 1\ne 0 1 o1:1").unwrap();
        assert_eq!(project_alphabet(&only1, Alphabet::A1), only1);
        // ... and onto the other erases everything.
        let erased = project_alphabet(&only1, Alphabet::A2);
        assert!(erased.half_edges().iter().all(|e| e.label.is_epsilon()));
    }

    #[test]
    fn mirror_closure_counts() {
        let g = parse_graph("graph 2 1 1\ne 0 1 o1:1").unwrap();
        let closure = mirror_closure(&g);
        assert_eq!(
            closure,
            vec![
                HalfEdge::new(0, 1, paren(1, 1, true)),
                HalfEdge::new(1, 0, paren(1, 1, false)),
            ]
        );

        let loop_g = parse_graph("graph 1 1 1\ne 0 0 -").unwrap();
        assert_eq!(mirror_closure(&loop_g).len(), 1);

        // Bidirected fixture drawn with all six arrows stored explicitly.
        let bidi = parse_graph(
            "graph 4 2 1\n\
             e 0 3 -\ne 3 0 -\ne 3 2 c1:2\ne 2 3 o1:2\ne 0 1 c1:1\ne 1 0 o1:1\n",
        )
        .unwrap();
        assert_eq!(bidi.half_edges().len(), 6);
        assert_eq!(mirror_closure(&bidi).len(), 12);
    }

    #[test]
    fn metrics_of_demo_walk() {
        let g = demo_graph();
        let t = demo_walk(&g);
        let m = path_metrics(&g, &t).unwrap();
        assert_eq!(m.cnt, [0, 0]);
        assert_eq!(m.max_sh, [2, 2]);
        assert!(m.valid);
        assert!(m.balanced());
    }

    #[test]
    fn metrics_of_empty_traversal() {
        let g = demo_graph();
        let m = path_metrics(&g, &Traversal::empty(0)).unwrap();
        assert_eq!(m.cnt, [0, 0]);
        assert_eq!(m.max_sh, [0, 0]);
        assert!(m.valid && m.balanced());
    }

    #[test]
    fn pop_on_empty_is_invalid() {
        let g = parse_graph("graph 2 1 1\ne 0 1 c1:1").unwrap();
        let t = Traversal {
            start: 0,
            steps: vec![Step {
                edge: 0,
                forward: true,
            }],
        };
        let m = path_metrics(&g, &t).unwrap();
        assert!(!m.valid);
        assert_eq!(m.cnt, [-1, 0]);
    }

    #[test]
    fn non_chaining_traversal_is_an_error() {
        let g = parse_graph("graph 3 1 1\ne 0 1 -\ne 2 1 -").unwrap();
        let t = Traversal {
            start: 0,
            steps: vec![
                Step {
                    edge: 0,
                    forward: true,
                },
                Step {
                    edge: 1,
                    forward: true,
                },
            ],
        };
        assert!(matches!(
            path_metrics(&g, &t),
            Err(Error::NonChaining { step: 1, .. })
        ));
    }

    #[test]
    fn back_and_forth_is_reducible() {
        let g = parse_graph("graph 2 1 1\ne 0 1 o1:1").unwrap();
        let t = Traversal {
            start: 0,
            steps: vec![
                Step {
                    edge: 0,
                    forward: true,
                },
                Step {
                    edge: 0,
                    forward: false,
                },
            ],
        };
        assert!(!is_irreducible(&g, &t).unwrap());
        let r = reduce_traversal(&g, &t).unwrap();
        assert!(r.is_empty());
        assert_eq!(r.start, 0);
    }

    #[test]
    fn single_step_is_irreducible() {
        let g = parse_graph("graph 2 1 1\ne 0 1 o1:1").unwrap();
        let t = Traversal {
            start: 0,
            steps: vec![Step {
                edge: 0,
                forward: true,
            }],
        };
        assert!(is_irreducible(&g, &t).unwrap());
    }

    #[test]
    fn demo_walk_is_irreducible() {
        let g = demo_graph();
        let t = demo_walk(&g);
        assert!(is_irreducible(&g, &t).unwrap());
        assert_eq!(reduce_traversal(&g, &t).unwrap(), t);
    }

    #[test]
    fn reduce_preserves_endpoints_and_stacks() {
        let g = demo_graph();
        // Walk into a cycle: push/pop the alphabet-2 loop at x twice.
        let adj = g.adjacency();
        let mut steps = Vec::new();
        // 0 -> 1 via o2:1
        let first = adj[0]
            .iter()
            .find(|a| a.to == 1 && !a.label.is_epsilon())
            .unwrap();
        steps.push(Step {
            edge: first.edge,
            forward: first.forward,
        });
        let loop_edge = g
            .half_edge_index(&HalfEdge::new(1, 1, paren(2, 2, true)))
            .unwrap();
        steps.push(Step {
            edge: loop_edge,
            forward: true,
        });
        steps.push(Step {
            edge: loop_edge,
            forward: false,
        });
        let t = Traversal { start: 0, steps };
        let r = reduce_traversal(&g, &t).unwrap();
        assert_eq!(r.len(), 1);
        assert_eq!(r.end(&g).unwrap(), t.end(&g).unwrap());
        assert_eq!(
            path_metrics(&g, &r).unwrap().stack,
            path_metrics(&g, &t).unwrap().stack
        );
    }

    // ---- property tests ----

    fn arb_label() -> impl Strategy<Value = Label> {
        prop_oneof![
            Just(Label::Epsilon),
            (prop_oneof![Just(Alphabet::A1), Just(Alphabet::A2)], 1..4u16, any::<bool>()).prop_map(
                |(a, s, open)| if open {
                    Label::open(a, s)
                } else {
                    Label::close(a, s)
                }
            ),
        ]
    }

    /// Random small graph plus a random chaining walk in it.
    fn arb_graph_and_walk() -> impl Strategy<Value = (InterleavedGraph, Traversal)> {
        (2..6u32, proptest::collection::vec((any::<u32>(), any::<u32>(), arb_label()), 1..10))
            .prop_flat_map(|(n, raw)| {
                let edges: Vec<HalfEdge> = raw
                    .into_iter()
                    .map(|(s, d, l)| HalfEdge::new(s % n, d % n, l))
                    .collect();
                let g = InterleavedGraph::new(n, 3, 3, edges).unwrap();
                let steps = g.half_edges().len();
                (Just(g), proptest::collection::vec((0..steps, any::<bool>()), 0..12), 0..n)
            })
            .prop_map(|(g, picks, start)| {
                // Build a chaining walk by following whichever orientation
                // of the picked edge leaves the current node, else skip.
                let mut at = start;
                let mut steps = Vec::new();
                for (edge, prefer_fwd) in picks {
                    let e = g.half_edges()[edge];
                    let candidates = if prefer_fwd {
                        [(true, e.src), (false, e.dst)]
                    } else {
                        [(false, e.dst), (true, e.src)]
                    };
                    for (forward, from) in candidates {
                        if from == at {
                            let (_, to, _) = resolve_step(&g, Step { edge, forward });
                            steps.push(Step { edge, forward });
                            at = to;
                            break;
                        }
                    }
                }
                let t = Traversal { start, steps };
                (g, t)
            })
    }

    proptest! {
        #[test]
        fn complement_is_an_involution(l in arb_label()) {
            prop_assert_eq!(l.complement().complement(), l);
        }

        #[test]
        fn parse_serialize_round_trip(
            n in 1..6u32,
            raw in proptest::collection::vec((any::<u32>(), any::<u32>(), arb_label()), 0..12)
        ) {
            let edges: Vec<HalfEdge> = raw
                .into_iter()
                .map(|(s, d, l)| HalfEdge::new(s % n, d % n, l))
                .collect();
            let g = InterleavedGraph::new(n, 3, 3, edges).unwrap();
            let text = serialize_graph(&g);
            let back = parse_graph(&text).unwrap();
            prop_assert_eq!(&back, &g);
            prop_assert_eq!(serialize_graph(&back), text);
        }

        #[test]
        fn reversal_negates_counts((g, t) in arb_graph_and_walk()) {
            let m = path_metrics(&g, &t).unwrap();
            let r = t.reversed(&g).unwrap();
            let rm = path_metrics(&g, &r).unwrap();
            prop_assert_eq!(rm.cnt[0], -m.cnt[0]);
            prop_assert_eq!(rm.cnt[1], -m.cnt[1]);
        }

        #[test]
        fn valid_walk_stack_laws((g, t) in arb_graph_and_walk()) {
            let m = path_metrics(&g, &t).unwrap();
            for a in 0..2 {
                prop_assert!(m.max_sh[a] >= m.cnt[a].max(0));
            }
            if m.valid {
                // |stack| == cnt, and max_sh equals the max prefix height,
                // recomputed independently over prefixes.
                for a in 0..2 {
                    prop_assert_eq!(m.stack[a].len() as i64, m.cnt[a]);
                }
                let mut best = [0i64; 2];
                for k in 0..=t.len() {
                    let prefix = Traversal { start: t.start, steps: t.steps[..k].to_vec() };
                    let pm = path_metrics(&g, &prefix).unwrap();
                    for a in 0..2 {
                        best[a] = best[a].max(pm.stack[a].len() as i64);
                    }
                }
                prop_assert_eq!(m.max_sh[0], best[0]);
                prop_assert_eq!(m.max_sh[1], best[1]);
            }
        }

        #[test]
        fn reduction_yields_irreducible((g, t) in arb_graph_and_walk()) {
            let m = path_metrics(&g, &t).unwrap();
            prop_assume!(m.valid);
            let r = reduce_traversal(&g, &t).unwrap();
            prop_assert!(is_irreducible(&g, &r).unwrap());
            prop_assert_eq!(r.end(&g).unwrap(), t.end(&g).unwrap());
            let rm = path_metrics(&g, &r).unwrap();
            prop_assert_eq!(rm.stack, m.stack);
        }
    }
}
