//! Instance generators: embeddings of Subset Sum, Orthogonal Vectors, and
//! directed interleaved reachability into bidirected interleaved Dyck
//! reachability, plus brute-force reference solvers and a seeded random
//! graph source.
//!
//! The two arithmetic reductions share one building block, the *power
//! gadget*: a fragment whose every stack-balanced entry-to-exit traversal
//! shifts the counter by exactly `±2^level`. Chaining power gadgets per set
//! bit yields a fragment shifting by an arbitrary positive value.

use std::collections::{BTreeMap, HashSet};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::{
    Alphabet, DirectedGraph, HalfEdge, InterleavedGraph, Label, NodeId, Polarity, Step, Traversal,
};
use crate::oracle::validate_directed_witness;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sign {
    Plus,
    Minus,
}

// ---------------------------------------------------------------------------
// Named-node graph building
// ---------------------------------------------------------------------------

struct GraphBuilder {
    k1: u16,
    k2: u16,
    n: NodeId,
    edges: Vec<HalfEdge>,
    names: BTreeMap<String, NodeId>,
}

impl GraphBuilder {
    fn new(k1: u16, k2: u16) -> GraphBuilder {
        GraphBuilder {
            k1,
            k2,
            n: 0,
            edges: Vec::new(),
            names: BTreeMap::new(),
        }
    }

    fn node(&mut self, name: String) -> NodeId {
        let id = self.n;
        self.n += 1;
        let clash = self.names.insert(name, id);
        debug_assert!(clash.is_none(), "duplicate node name");
        id
    }

    fn edge(&mut self, src: NodeId, dst: NodeId, label: Label) {
        self.edges.push(HalfEdge::new(src, dst, label));
    }

    fn build(self) -> Result<(InterleavedGraph, BTreeMap<String, NodeId>)> {
        let g = InterleavedGraph::new(self.n, self.k1, self.k2, self.edges)?;
        Ok((g, self.names))
    }
}

/// Construction byproducts a consumer needs to interpret or post-process a
/// generated instance: the name of every construction node, and for the
/// bidirecting reduction the per-edge symbol assignment and path anchors
/// that witness lifting walks along.
#[derive(Clone, Debug, Default)]
pub struct ReductionArtifacts {
    pub node_names: BTreeMap<String, NodeId>,
    /// Input edge index -> its alphabet-1 symbol (bidirect only).
    pub edge_symbols: BTreeMap<usize, u16>,
    /// The fresh alphabet-2 symbol guarding the verify phase (bidirect only).
    pub nu_symbol: Option<u16>,
    /// Input edge index -> the four half-edges of its guess loop and verify
    /// path (bidirect only).
    pub edge_anchors: BTreeMap<usize, EdgeAnchors>,
    pub nu_edge: Option<HalfEdge>,
    pub nu_bar_edge: Option<HalfEdge>,
}

#[derive(Clone, Debug)]
pub struct EdgeAnchors {
    pub guess_push: HalfEdge,
    pub guess_back: HalfEdge,
    pub verify_pop: HalfEdge,
    pub verify_forward: HalfEdge,
}

// ---------------------------------------------------------------------------
// Power and counter gadgets
// ---------------------------------------------------------------------------

fn counter_label(sign: Sign) -> Label {
    match sign {
        Sign::Plus => Label::open(Alphabet::A2, 1),
        Sign::Minus => Label::close(Alphabet::A2, 1),
    }
}

/// Adds a power gadget for `2^level` to a builder, using alphabet-1 symbols
/// `g0` and `g1` for the two guard parentheses. Returns (entry, exit).
///
/// For `level >= 1` the gadget is a binary sweep over three node rails
/// `a_i`, `b_i`, `c_i`: every stack-balanced entry-to-exit traversal crosses
/// the single counter edge exactly `2^level` times. Level 0 is a guarded
/// three-edge chain crossing it once.
fn add_power_gadget(
    b: &mut GraphBuilder,
    level: u32,
    sign: Sign,
    prefix: &str,
    g0: u16,
    g1: u16,
) -> (NodeId, NodeId) {
    let open0 = Label::open(Alphabet::A1, g0);
    let open1 = Label::open(Alphabet::A1, g1);
    let close0 = Label::close(Alphabet::A1, g0);
    let close1 = Label::close(Alphabet::A1, g1);
    let p = b.node(format!("{prefix}.p"));
    let q = b.node(format!("{prefix}.q"));
    if level == 0 {
        let r0 = b.node(format!("{prefix}.r0"));
        let r1 = b.node(format!("{prefix}.r1"));
        b.edge(p, r0, open0);
        b.edge(r0, r1, counter_label(sign));
        b.edge(r1, q, close0);
        return (p, q);
    }
    let l = level as usize;
    let a: Vec<NodeId> = (1..=l).map(|i| b.node(format!("{prefix}.a{i}"))).collect();
    let bs: Vec<NodeId> = (1..=l).map(|i| b.node(format!("{prefix}.b{i}"))).collect();
    let c: Vec<NodeId> = (1..=l).map(|i| b.node(format!("{prefix}.c{i}"))).collect();
    for i in 0..l {
        b.edge(c[i], bs[i], close0);
        b.edge(bs[i], a[i], open1);
    }
    for i in 0..l - 1 {
        b.edge(a[i + 1], a[i], open0);
        b.edge(c[i], c[i + 1], close1);
    }
    b.edge(p, a[l - 1], open0);
    b.edge(c[l - 1], q, close1);
    b.edge(a[0], c[0], counter_label(sign));
    (p, q)
}

/// Chains power gadgets for each set bit of `value` (ascending), so balanced
/// entry-to-exit traversals shift the counter by exactly `±value`.
fn add_counter_gadget(
    b: &mut GraphBuilder,
    value: u64,
    sign: Sign,
    prefix: &str,
    g0: u16,
    g1: u16,
) -> (NodeId, NodeId) {
    debug_assert!(value >= 1);
    let mut entry = None;
    let mut last_exit: Option<NodeId> = None;
    for bit in 0..64 {
        if value >> bit & 1 == 0 {
            continue;
        }
        let (p, q) = add_power_gadget(b, bit, sign, &format!("{prefix}.pow{bit}"), g0, g1);
        if let Some(prev) = last_exit {
            b.edge(prev, p, Label::Epsilon);
        } else {
            entry = Some(p);
        }
        last_exit = Some(q);
    }
    (entry.unwrap(), last_exit.unwrap())
}

/// Standalone power gadget over alphabets `k1 = 2` (symbols 1 and 2 as the
/// two guards) and a unary counter.
pub fn gen_power_gadget(level: u32, sign: Sign) -> (InterleavedGraph, NodeId, NodeId) {
    let mut b = GraphBuilder::new(2, 1);
    let (p, q) = add_power_gadget(&mut b, level, sign, "G", 1, 2);
    let (graph, _) = b.build().expect("gadget construction is valid");
    (graph, p, q)
}

/// Standalone counter gadget shifting by `±value` (`value >= 1`).
pub fn gen_counter_gadget(value: u64, sign: Sign) -> Result<(InterleavedGraph, NodeId, NodeId)> {
    if value == 0 {
        return Err(Error::InstanceInvariant(
            "counter gadget value must be positive".into(),
        ));
    }
    let mut b = GraphBuilder::new(2, 1);
    let (p, q) = add_counter_gadget(&mut b, value, sign, "H", 1, 2);
    let (graph, _) = b.build()?;
    Ok((graph, p, q))
}

// ---------------------------------------------------------------------------
// Subset Sum
// ---------------------------------------------------------------------------

/// A Subset Sum instance: a multiset of positive values and a positive
/// target, with every value at most the target.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SubsetSumInstance {
    values: Vec<u64>,
    target: u64,
}

impl SubsetSumInstance {
    pub fn new(values: Vec<u64>, target: u64) -> Result<SubsetSumInstance> {
        if target == 0 {
            return Err(Error::InstanceInvariant("target must be positive".into()));
        }
        for &x in &values {
            if x == 0 {
                return Err(Error::InstanceInvariant("values must be positive".into()));
            }
            if x > target {
                return Err(Error::InstanceInvariant(format!(
                    "value {x} exceeds target {target}"
                )));
            }
        }
        Ok(SubsetSumInstance { values, target })
    }

    pub fn values(&self) -> &[u64] {
        &self.values
    }

    pub fn target(&self) -> u64 {
        self.target
    }

    /// Most significant bit position of `2 * target`: the largest power
    /// gadget level the construction needs.
    pub fn j_max(&self) -> u32 {
        63 - (2 * self.target).leading_zeros()
    }
}

/// Exhaustive reference: does any subset of the values sum to the target?
pub fn brute_subset_sum(inst: &SubsetSumInstance) -> bool {
    let n = inst.values.len();
    assert!(n < 30, "exhaustive check is for small instances");
    (0u64..1 << n).any(|mask| {
        let sum: u64 = (0..n)
            .filter(|i| mask >> i & 1 == 1)
            .map(|i| inst.values[i])
            .sum();
        sum == inst.target
    })
}

pub struct SubsetSumOutput {
    pub graph: InterleavedGraph,
    /// Query source (the head of the choice chain).
    pub source: NodeId,
    /// Query target (past the drain gadget).
    pub target: NodeId,
    pub artifacts: ReductionArtifacts,
}

/// Builds the graph in which `target` is reachable from `source` iff the
/// Subset Sum instance is solvable.
///
/// Alphabet 1 holds the gadget guards (symbols 1, 2) and the choice markers
/// (symbols 3 for "skip", 4 for "take"); alphabet 2 is the counter. A path
/// walks the choice chain pushing its decisions, with "take" detouring
/// through a counter gadget for that value; a middle node forces the same
/// decisions to be popped in reverse, doubling the chosen sum; a final
/// gadget drains `2 * target`.
pub fn gen_subset_sum(inst: &SubsetSumInstance) -> Result<SubsetSumOutput> {
    let d0 = Label::open(Alphabet::A1, 3);
    let d1 = Label::open(Alphabet::A1, 4);
    let d0_bar = Label::close(Alphabet::A1, 3);
    let d1_bar = Label::close(Alphabet::A1, 4);
    let n = inst.values.len();
    let mut b = GraphBuilder::new(4, 1);

    let u: Vec<NodeId> = (1..=n).map(|i| b.node(format!("u{i}"))).collect();
    let d = b.node("d".into());
    let v_chain: Vec<NodeId> = (1..=n).map(|i| b.node(format!("v{i}"))).collect();
    let v = b.node("v".into());

    let first: Vec<(NodeId, NodeId)> = (0..n)
        .map(|i| add_counter_gadget(&mut b, inst.values[i], Sign::Plus, &format!("H1.{}", i + 1), 1, 2))
        .collect();
    let second: Vec<(NodeId, NodeId)> = (0..n)
        .map(|i| add_counter_gadget(&mut b, inst.values[i], Sign::Plus, &format!("H2.{}", i + 1), 1, 2))
        .collect();
    let drain = add_counter_gadget(&mut b, 2 * inst.target, Sign::Minus, "Hdrain", 1, 2);

    for i in 0..n {
        b.edge(u[i], first[i].0, d1);
        let after = if i + 1 < n { u[i + 1] } else { d };
        b.edge(u[i], after, d0);
        b.edge(first[i].1, after, Label::Epsilon);
    }
    if n > 0 {
        b.edge(d, v_chain[n - 1], d0_bar);
        b.edge(d, second[n - 1].0, d1_bar);
        for i in 0..n {
            b.edge(second[i].1, v_chain[i], Label::Epsilon);
        }
        for i in 0..n - 1 {
            b.edge(v_chain[i + 1], v_chain[i], d0_bar);
            b.edge(v_chain[i + 1], second[i].0, d1_bar);
        }
        b.edge(v_chain[0], drain.0, Label::Epsilon);
    } else {
        b.edge(d, drain.0, Label::Epsilon);
    }
    b.edge(drain.1, v, Label::Epsilon);

    let source = u.first().copied().unwrap_or(d);
    let (graph, node_names) = b.build()?;
    Ok(SubsetSumOutput {
        graph,
        source,
        target: v,
        artifacts: ReductionArtifacts {
            node_names,
            ..Default::default()
        },
    })
}

// ---------------------------------------------------------------------------
// Orthogonal Vectors
// ---------------------------------------------------------------------------

/// An Orthogonal Vectors instance: two equal-size sets of 0/1 vectors of a
/// common dimension.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OVInstance {
    x: Vec<Vec<u8>>,
    y: Vec<Vec<u8>>,
    dim: usize,
}

impl OVInstance {
    pub fn new(x: Vec<Vec<u8>>, y: Vec<Vec<u8>>, dim: usize) -> Result<OVInstance> {
        if x.len() != y.len() {
            return Err(Error::InstanceInvariant(
                "the two vector sets must have equal size".into(),
            ));
        }
        for v in x.iter().chain(y.iter()) {
            if v.len() != dim {
                return Err(Error::InstanceInvariant(format!(
                    "vector length {} differs from dimension {dim}",
                    v.len()
                )));
            }
            if v.iter().any(|&e| e > 1) {
                return Err(Error::InstanceInvariant("entries must be 0 or 1".into()));
            }
        }
        Ok(OVInstance { x, y, dim })
    }

    pub fn size(&self) -> usize {
        self.x.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

/// Quadratic reference: is some pair of vectors orthogonal?
pub fn brute_ov(inst: &OVInstance) -> bool {
    inst.x.iter().any(|xi| {
        inst.y
            .iter()
            .any(|yj| xi.iter().zip(yj).all(|(a, b)| a * b == 0))
    })
}

pub struct OVOutput {
    pub graph: InterleavedGraph,
    pub source: NodeId,
    pub target: NodeId,
    pub artifacts: ReductionArtifacts,
}

/// Builds the graph in which `target` is reachable from `source` iff the
/// instance has an orthogonal pair.
///
/// An x-side chain pushes the coordinates of one vector (symbol 1 encodes a
/// 0 entry, symbol 2 a 1 entry). A y-side chain pops them back: coordinate
/// `l` always offers a symbol-1 pop, and where the y vector has a 0 it also
/// offers a symbol-2 pop detouring through a counter gadget for `2^l`,
/// whose one-way cost keeps the detour from being walked backward early. A
/// closing self-loop on the target drains the accumulated counter.
pub fn gen_ov(inst: &OVInstance) -> Result<OVOutput> {
    let n = inst.size();
    let dim = inst.dim;
    let mut b = GraphBuilder::new(2, 1);
    let u = b.node("u".into());
    let w = b.node("w".into());
    let v = b.node("v".into());
    let xs: Vec<Vec<NodeId>> = (1..=n)
        .map(|i| (1..=dim + 1).map(|l| b.node(format!("x{i}.{l}"))).collect())
        .collect();
    let ys: Vec<Vec<NodeId>> = (1..=n)
        .map(|i| (1..=dim + 1).map(|l| b.node(format!("y{i}.{l}"))).collect())
        .collect();
    // One gadget copy per (vector, coordinate); only those facing a 0 entry
    // get wired, the rest stay isolated.
    let gadgets: Vec<Vec<(NodeId, NodeId)>> = (1..=n)
        .map(|i| {
            (1..=dim)
                .map(|l| {
                    add_power_gadget(&mut b, l as u32, Sign::Plus, &format!("H{i}.{l}"), 1, 2)
                })
                .collect()
        })
        .collect();

    let gamma = |bit: u8| Label::open(Alphabet::A1, if bit == 0 { 1 } else { 2 });
    for i in 0..n {
        b.edge(u, xs[i][0], Label::Epsilon);
        b.edge(xs[i][dim], w, Label::Epsilon);
        b.edge(w, ys[i][dim], Label::Epsilon);
        b.edge(ys[i][0], v, Label::Epsilon);
        for l in 0..dim {
            b.edge(xs[i][l], xs[i][l + 1], gamma(inst.x[i][l]));
            b.edge(ys[i][l + 1], ys[i][l], Label::close(Alphabet::A1, 1));
            if inst.y[i][l] == 0 {
                b.edge(ys[i][l + 1], gadgets[i][l].0, Label::close(Alphabet::A1, 2));
                b.edge(gadgets[i][l].1, ys[i][l], Label::Epsilon);
            }
        }
    }
    b.edge(v, v, Label::close(Alphabet::A2, 1));

    let (graph, node_names) = b.build()?;
    Ok(OVOutput {
        graph,
        source: u,
        target: v,
        artifacts: ReductionArtifacts {
            node_names,
            ..Default::default()
        },
    })
}

// ---------------------------------------------------------------------------
// Directed-to-bidirected reduction
// ---------------------------------------------------------------------------

pub struct BidirectOutput {
    pub graph: InterleavedGraph,
    pub source: NodeId,
    pub target: NodeId,
    /// The reachability question on the directed input this encodes.
    pub orig_source: NodeId,
    pub orig_target: NodeId,
    pub artifacts: ReductionArtifacts,
}

/// Encodes directed interleaved reachability `orig_source -> orig_target`
/// into a bidirected graph with fresh endpoints.
///
/// Alphabet 1' assigns one parenthesis per input edge. Alphabet 2' embeds
/// both input alphabets plus a fresh guard symbol. A path first guesses the
/// input path in reverse via self-loops at the new source — pushing edge
/// symbols while replaying input alphabet-2 effects mirrored — then crosses
/// into the original graph under the guard and verifies each guessed edge
/// in order, replaying alphabet-1 effects, finally popping the guard into
/// the new target.
pub fn gen_bidirect(dg: &DirectedGraph, u: NodeId, v: NodeId) -> Result<BidirectOutput> {
    let mut seen_pairs: HashSet<(NodeId, NodeId)> = HashSet::new();
    for e in &dg.edges {
        if !seen_pairs.insert((e.src, e.dst)) {
            return Err(Error::MultigraphInput {
                src: e.src,
                dst: e.dst,
            });
        }
    }
    let m = dg.edges.len();
    let k1_out = m as u16;
    let nu = dg.k1 + dg.k2 + 1;
    let k2_out = nu;
    // Input labels re-homed into alphabet 2' of the output.
    let rehome = |label: Label, keep: Alphabet, flip: bool| -> Label {
        match label {
            Label::Paren {
                alphabet,
                symbol,
                polarity,
            } if alphabet == keep => {
                let symbol = match alphabet {
                    Alphabet::A1 => symbol,
                    Alphabet::A2 => dg.k1 + symbol,
                };
                let polarity = match (polarity, flip) {
                    (p, false) => p,
                    (Polarity::Open, true) => Polarity::Close,
                    (Polarity::Close, true) => Polarity::Open,
                };
                Label::Paren {
                    alphabet: Alphabet::A2,
                    symbol,
                    polarity,
                }
            }
            _ => Label::Epsilon,
        }
    };

    let mut b = GraphBuilder::new(k1_out, k2_out);
    for i in 0..dg.n {
        b.node(format!("n{i}"));
    }
    let s = b.node("s".into());
    let t = b.node("t".into());

    let mut artifacts = ReductionArtifacts {
        nu_symbol: Some(nu),
        ..Default::default()
    };

    for (j, e) in dg.edges.iter().enumerate() {
        let sym = (j + 1) as u16;
        artifacts.edge_symbols.insert(j, sym);
        let guess_mid = b.node(format!("guess{j}"));
        let verify_mid = b.node(format!("verify{j}"));
        let guess_push = HalfEdge::new(s, guess_mid, Label::open(Alphabet::A1, sym));
        let guess_back = HalfEdge::new(guess_mid, s, rehome(e.label, Alphabet::A2, true));
        let verify_pop = HalfEdge::new(e.src, verify_mid, Label::close(Alphabet::A1, sym));
        let verify_forward = HalfEdge::new(verify_mid, e.dst, rehome(e.label, Alphabet::A1, false));
        for edge in [&guess_push, &guess_back, &verify_pop, &verify_forward] {
            b.edge(edge.src, edge.dst, edge.label);
        }
        artifacts.edge_anchors.insert(
            j,
            EdgeAnchors {
                guess_push,
                guess_back,
                verify_pop,
                verify_forward,
            },
        );
    }
    let nu_edge = HalfEdge::new(s, u, Label::open(Alphabet::A2, nu));
    let nu_bar_edge = HalfEdge::new(v, t, Label::close(Alphabet::A2, nu));
    b.edge(nu_edge.src, nu_edge.dst, nu_edge.label);
    b.edge(nu_bar_edge.src, nu_bar_edge.dst, nu_bar_edge.label);
    artifacts.nu_edge = Some(nu_edge);
    artifacts.nu_bar_edge = Some(nu_bar_edge);

    let (graph, node_names) = b.build()?;
    artifacts.node_names = node_names;
    Ok(BidirectOutput {
        graph,
        source: s,
        target: t,
        orig_source: u,
        orig_target: v,
        artifacts,
    })
}

/// Lifts a directed witness (an edge-index path) to a traversal of the
/// bidirected encoding: guess loops pushing the edges in reverse order (so
/// the first edge ends on top), the guard into the original source, each
/// edge's verify path in order, and the guard out of the original target.
/// The result is valid with both stacks empty.
pub fn lift_witness(
    dg: &DirectedGraph,
    out: &BidirectOutput,
    path: &[usize],
) -> Result<Traversal> {
    if !validate_directed_witness(dg, out.orig_source, out.orig_target, path) {
        return Err(Error::NotAWitness(
            "edge sequence is not a valid directed witness for the encoded question".into(),
        ));
    }
    let resolve = |edge: &HalfEdge| -> Result<Step> {
        out.graph
            .half_edge_index(edge)
            .map(|i| Step {
                edge: i,
                forward: true,
            })
            .ok_or_else(|| Error::NotAWitness("anchor edge missing from encoding".into()))
    };
    let mut steps = Vec::new();
    for &j in path.iter().rev() {
        let anchors = &out.artifacts.edge_anchors[&j];
        steps.push(resolve(&anchors.guess_push)?);
        steps.push(resolve(&anchors.guess_back)?);
    }
    steps.push(resolve(out.artifacts.nu_edge.as_ref().unwrap())?);
    for &j in path {
        let anchors = &out.artifacts.edge_anchors[&j];
        steps.push(resolve(&anchors.verify_pop)?);
        steps.push(resolve(&anchors.verify_forward)?);
    }
    steps.push(resolve(out.artifacts.nu_bar_edge.as_ref().unwrap())?);
    Ok(Traversal {
        start: out.source,
        steps,
    })
}

// ---------------------------------------------------------------------------
// Random instances
// ---------------------------------------------------------------------------

/// Seed-deterministic random bidirected graph: `m` half-edge draws with
/// uniform endpoints and labels uniform over epsilon and the open
/// parentheses (closes arise via mirrors). Duplicate draws collapse.
pub fn gen_random_bidirected(n: NodeId, m: usize, k1: u16, k2: u16, seed: u64) -> InterleavedGraph {
    if n == 0 {
        return InterleavedGraph::empty(0, k1, k2);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::with_capacity(m);
    for _ in 0..m {
        let src = rng.gen_range(0..n);
        let dst = rng.gen_range(0..n);
        let pick = rng.gen_range(0..(1 + k1 as u32 + k2 as u32));
        let label = if pick == 0 {
            Label::Epsilon
        } else if pick <= k1 as u32 {
            Label::open(Alphabet::A1, pick as u16)
        } else {
            Label::open(Alphabet::A2, (pick - k1 as u32) as u16)
        };
        edges.push(HalfEdge::new(src, dst, label));
    }
    InterleavedGraph::new(n, k1, k2, edges).expect("random edges are in range")
}
