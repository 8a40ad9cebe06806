//! Interleaved bidirected Dyck reachability.
//!
//! Reachability over paths whose edge labels must balance independently in
//! two disjoint parenthesis alphabets, on graphs where every edge also
//! exists reversed with the complementary label. This is the graph
//! formulation of running two sensitivities (say, call contexts and field
//! accesses) at once in a static analysis, and bidirectedness turns the
//! reachability relation into an equivalence over nodes.
//!
//! The crate provides:
//!
//! * [`graph`] — the graph model, the `ibdg` text format, traversals and
//!   their per-alphabet metrics;
//! * [`engine`] — near-linear all-pairs Dyck reachability over one alphabet
//!   on bidirected graphs, by union-find congruence closure;
//! * [`solver`] — the polynomial interleaved solvers: counter flattening for
//!   two unary alphabets and for the bounded-counter stack/counter mix, plus
//!   the preprocessing pipeline (union-alphabet contraction, removal of
//!   doubly-self-looped nodes, leaf trimming);
//! * [`oracle`] — bounded configuration-space search and cubic saturation,
//!   the ground truth every solver is tested against;
//! * [`reduce`] — instance generators embedding Subset Sum, Orthogonal
//!   Vectors, and directed interleaved reachability into this problem, with
//!   brute-force reference solvers.

pub mod engine;
pub mod error;
pub mod graph;
pub mod oracle;
pub mod partition;
pub mod reduce;
pub mod solver;

pub use error::{Error, Result};
pub use graph::{InterleavedGraph, Label, NodeId, Traversal};
pub use partition::Partition;
