//! Union-find backed node partitions — the output type of every solver.

use crate::graph::NodeId;

/// Disjoint classes over the node ids `0..n`, union-find backed.
///
/// The canonical representative of a class, as reported by observers, is its
/// minimum node id; the internal root is an implementation detail.
#[derive(Clone, Debug)]
pub struct Partition {
    parent: Vec<NodeId>,
    rank: Vec<u8>,
    classes: usize,
}

impl Partition {
    pub fn new(n: NodeId) -> Partition {
        Partition {
            parent: (0..n).collect(),
            rank: vec![0; n as usize],
            classes: n as usize,
        }
    }

    pub fn len(&self) -> NodeId {
        self.parent.len() as NodeId
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    pub fn class_count(&self) -> usize {
        self.classes
    }

    /// Internal root of `x`, without path compression.
    pub fn find(&self, mut x: NodeId) -> NodeId {
        while self.parent[x as usize] != x {
            x = self.parent[x as usize];
        }
        x
    }

    /// Internal root of `x`, halving the path on the way up.
    pub fn find_compress(&mut self, mut x: NodeId) -> NodeId {
        while self.parent[x as usize] != x {
            let grand = self.parent[self.parent[x as usize] as usize];
            self.parent[x as usize] = grand;
            x = grand;
        }
        x
    }

    pub fn same(&self, a: NodeId, b: NodeId) -> bool {
        self.find(a) == self.find(b)
    }

    /// Union by rank. Returns true iff two classes actually merged.
    pub fn union(&mut self, a: NodeId, b: NodeId) -> bool {
        let ra = self.find_compress(a);
        let rb = self.find_compress(b);
        if ra == rb {
            return false;
        }
        let (winner, loser) = if self.rank[ra as usize] >= self.rank[rb as usize] {
            (ra, rb)
        } else {
            (rb, ra)
        };
        if self.rank[winner as usize] == self.rank[loser as usize] {
            self.rank[winner as usize] += 1;
        }
        self.parent[loser as usize] = winner;
        self.classes -= 1;
        true
    }

    /// Attaches the class rooted at `loser` under the root `winner`.
    /// Both arguments must be roots; the caller picks the orientation.
    pub fn union_into(&mut self, winner: NodeId, loser: NodeId) {
        debug_assert_eq!(self.parent[winner as usize], winner);
        debug_assert_eq!(self.parent[loser as usize], loser);
        if winner == loser {
            return;
        }
        self.parent[loser as usize] = winner;
        self.rank[winner as usize] = self.rank[winner as usize]
            .max(self.rank[loser as usize].saturating_add(1));
        self.classes -= 1;
    }

    /// Maps every node to the minimum id in its class.
    pub fn canonical_map(&self) -> Vec<NodeId> {
        let n = self.parent.len();
        let mut min_of_root: Vec<NodeId> = (0..n as NodeId).collect();
        for v in 0..n as NodeId {
            let r = self.find(v) as usize;
            if v < min_of_root[r] {
                min_of_root[r] = v;
            }
        }
        (0..n as NodeId)
            .map(|v| min_of_root[self.find(v) as usize])
            .collect()
    }

    /// Classes as sorted member lists, ordered by representative.
    pub fn classes(&self) -> Vec<Vec<NodeId>> {
        let map = self.canonical_map();
        let mut by_rep: std::collections::BTreeMap<NodeId, Vec<NodeId>> =
            std::collections::BTreeMap::new();
        for (v, rep) in map.iter().enumerate() {
            by_rep.entry(*rep).or_default().push(v as NodeId);
        }
        by_rep.into_values().collect()
    }

    /// True iff every class of `self` is contained in a class of `coarser`.
    pub fn refines(&self, coarser: &Partition) -> bool {
        assert_eq!(self.len(), coarser.len());
        let map = self.canonical_map();
        (0..self.len()).all(|v| coarser.same(v, map[v as usize]))
    }
}

impl PartialEq for Partition {
    fn eq(&self, other: &Self) -> bool {
        self.len() == other.len() && self.canonical_map() == other.canonical_map()
    }
}

impl Eq for Partition {}
