//! All-pairs Dyck reachability on bidirected graphs over a single active
//! alphabet, via union-find congruence closure.
//!
//! On a bidirected graph, Dyck reachability is an equivalence relation, and
//! the relation is the least fixpoint of two local rules:
//!
//! * the endpoints of an epsilon edge are equivalent, and
//! * if one class has two outgoing logical close-`s` edges to nodes `y` and
//!   `z`, then `y` and `z` are equivalent (follow one edge backward — an
//!   open — and the other forward — the matching close).
//!
//! The engine keeps, per representative, a table from close symbol to one
//! known target. Unions merge the smaller table into the larger one and turn
//! every symbol collision with a distinct target into a further pending
//! union, draining to quiescence.

use std::collections::VecDeque;

use crate::graph::{Alphabet, InterleavedGraph, Label, NodeId, Polarity};
use crate::partition::Partition;

/// Which alphabet the engine matches parentheses over. Labels of an inactive
/// alphabet are treated as epsilon; `Union` fuses both alphabets into one
/// Dyck alphabet of `k1 + k2` symbols.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Active {
    One,
    Two,
    Union,
}

/// A label seen through an [`Active`] selection.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EffLabel {
    Eps,
    Open(u32),
    Close(u32),
}

/// Maps a label to its effective form under the active alphabet. Union mode
/// renumbers alphabet-2 symbols after the `k1` alphabet-1 symbols.
pub fn effective_label(label: Label, active: Active, k1: u16) -> EffLabel {
    match label {
        Label::Epsilon => EffLabel::Eps,
        Label::Paren {
            alphabet,
            symbol,
            polarity,
        } => {
            let sym = match (active, alphabet) {
                (Active::One, Alphabet::A1) => Some(symbol as u32),
                (Active::Two, Alphabet::A2) => Some(symbol as u32),
                (Active::Union, Alphabet::A1) => Some(symbol as u32),
                (Active::Union, Alphabet::A2) => Some(k1 as u32 + symbol as u32),
                _ => None,
            };
            match sym {
                None => EffLabel::Eps,
                Some(s) => match polarity {
                    Polarity::Open => EffLabel::Open(s),
                    Polarity::Close => EffLabel::Close(s),
                },
            }
        }
    }
}

/// Mid-solve state: the partition, per-representative close-symbol tables,
/// and the worklist of forced unions not yet applied.
///
/// Tables are keyed by close symbols of the active alphabet only. Table
/// values may be stale node ids; representatives are resolved lazily at
/// comparison time. At quiescence no class has two outgoing close-`s`
/// logical edges into distinct classes.
#[derive(Clone, Debug)]
pub struct CongruenceState {
    partition: Partition,
    // Table of the class whose root is the index; empty for non-roots.
    // Alphabets are tiny, so linear scans beat hashing here.
    tables: Vec<Vec<(u32, NodeId)>>,
    pending: VecDeque<(NodeId, NodeId)>,
}

impl CongruenceState {
    pub fn new(n: NodeId) -> CongruenceState {
        CongruenceState {
            partition: Partition::new(n),
            tables: vec![Vec::new(); n as usize],
            pending: VecDeque::new(),
        }
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn into_partition(self) -> Partition {
        self.partition
    }

    pub fn pending_len(&self) -> usize {
        self.pending.len()
    }

    pub fn pop_pending(&mut self) -> Option<(NodeId, NodeId)> {
        self.pending.pop_front()
    }

    /// Removes an arbitrary indexed pending pair; used by order-independence
    /// tests to drain in adversarial orders.
    pub fn take_pending(&mut self, idx: usize) -> Option<(NodeId, NodeId)> {
        self.pending.remove(idx)
    }

    /// Records that the class of `x` has a close-`sym` edge to `target`.
    /// A collision with a distinct existing target enqueues a union.
    pub fn observe_close(&mut self, x: NodeId, sym: u32, target: NodeId) -> bool {
        let root = self.partition.find_compress(x) as usize;
        let table = &mut self.tables[root];
        match table.iter().find(|(s, _)| *s == sym) {
            Some(&(_, existing)) => {
                if self.partition.find_compress(existing) != self.partition.find_compress(target) {
                    self.pending.push_back((existing, target));
                    true
                } else {
                    false
                }
            }
            None => {
                table.push((sym, target));
                true
            }
        }
    }

    /// One worklist step: merge the classes of `a` and `b`, folding the
    /// smaller close table into the larger. Collided entries are enqueued,
    /// not resolved. Merging already-equal classes is a no-op.
    pub fn union_with_congruence(&mut self, a: NodeId, b: NodeId) {
        let ra = self.partition.find_compress(a);
        let rb = self.partition.find_compress(b);
        if ra == rb {
            return;
        }
        // Small-into-large on table contents.
        let (winner, loser) = if self.tables[ra as usize].len() >= self.tables[rb as usize].len() {
            (ra, rb)
        } else {
            (rb, ra)
        };
        self.partition.union_into(winner, loser);
        let moved = std::mem::take(&mut self.tables[loser as usize]);
        for (sym, target) in moved {
            let table = &mut self.tables[winner as usize];
            match table.iter().find(|(s, _)| *s == sym) {
                Some(&(_, existing)) => {
                    if self.partition.find_compress(existing)
                        != self.partition.find_compress(target)
                    {
                        self.pending.push_back((existing, target));
                    }
                }
                None => table.push((sym, target)),
            }
        }
    }

    /// Drains the worklist in FIFO order.
    pub fn drain(&mut self) {
        while let Some((a, b)) = self.pending.pop_front() {
            self.union_with_congruence(a, b);
        }
    }

    /// Seeds (or re-checks) the tables from every logical close edge of `g`:
    /// stored closes and mirrors of stored opens. Epsilon edges union their
    /// endpoints. Returns true iff anything new was recorded.
    pub fn seed(&mut self, g: &InterleavedGraph, active: Active) -> bool {
        let mut changed = false;
        let k1 = g.k1();
        for e in g.half_edges() {
            match effective_label(e.label, active, k1) {
                EffLabel::Eps => {
                    if !self.partition.same(e.src, e.dst) {
                        self.union_with_congruence(e.src, e.dst);
                        changed = true;
                    }
                }
                EffLabel::Close(s) => {
                    // Stored close (src -> dst) plus its mirror, an open
                    // (dst -> src) whose own mirror is this close again.
                    changed |= self.observe_close(e.src, s, e.dst);
                }
                EffLabel::Open(s) => {
                    // Mirror of a stored open is a close (dst -> src).
                    changed |= self.observe_close(e.dst, s, e.src);
                }
            }
            changed |= !self.pending.is_empty();
            self.drain();
        }
        changed
    }
}

/// All-pairs Dyck reachability over the active alphabet of a bidirected
/// graph. Two nodes share a class in the result iff one is Dyck-reachable
/// from the other.
pub fn solve_bidirected_dyck(g: &InterleavedGraph, active: Active) -> Partition {
    let mut state = CongruenceState::new(g.n());
    // Seed, drain, and re-seed until quiescent: no class keeps two
    // same-symbol close edges into distinct classes.
    while state.seed(g, active) {
        state.drain();
    }
    state.into_partition()
}
