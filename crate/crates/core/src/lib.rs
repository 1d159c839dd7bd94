pub mod chain_sim;
pub mod context_tree;
pub mod counting;
pub mod ctw;
pub mod error;
pub mod estimator;
pub mod inference;
pub mod seed;
pub mod theory;
pub mod verify;

pub use chain_sim::ChainSpec;
pub use context_tree::{Alphabet, Context, ContextTree, ParameterVector};
pub use counting::{CountTrie, SymbolSequence};
pub use ctw::{CtwState, MapTree, MixtureDiagnostics};
pub use error::{BctError, Result};
