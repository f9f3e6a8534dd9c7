//! Interactive zero-knowledge proof of graph 3-colorability, with simulated
//! and human agents, transcript attacks, and tools for measuring how random
//! human-chosen permutations and challenges really are.

pub mod agents;
pub mod attacks;
pub mod commitment;
pub mod error;
pub mod graph;
pub mod lab;
pub mod permutation;
pub mod protocol;
pub mod runner;
pub mod stats;
pub mod store;

pub use commitment::{commit, verify_opening, Commitment, Opening, Salt};
pub use graph::{Coloring, Edge, Graph};
pub use permutation::Permutation;
pub use protocol::{run_session, RoundVerdict, SessionConfig, SessionResult, SessionVerdict};
