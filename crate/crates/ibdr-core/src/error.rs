use thiserror::Error;

/// Errors shared by the graph model, the solvers, and the generators.
#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("missing `graph <n> <k1> <k2>` header")]
    MissingHeader,

    #[error("node id {id} out of range (n = {n})")]
    NodeOutOfRange { id: u64, n: u32 },

    #[error("symbol {symbol} out of range for alphabet {alphabet} (k = {k})")]
    SymbolOutOfRange { alphabet: u8, symbol: u16, k: u16 },

    #[error("operation requires {expected}, got k1 = {k1}, k2 = {k2}")]
    AlphabetArity { expected: &'static str, k1: u16, k2: u16 },

    #[error("traversal does not chain at step {step}: at node {at}, edge departs from {from}")]
    NonChaining { step: usize, at: u32, from: u32 },

    #[error("traversal is not valid: {0}")]
    InvalidTraversal(&'static str),

    #[error("resource limit exceeded: {0}")]
    ResourceLimit(String),

    #[error("instance invariant violated: {0}")]
    InstanceInvariant(String),

    #[error("input graph is a multigraph: duplicate edge between nodes {src} and {dst}")]
    MultigraphInput { src: u32, dst: u32 },

    #[error("not a valid reachability witness: {0}")]
    NotAWitness(String),
}

pub type Result<T> = std::result::Result<T, Error>;
