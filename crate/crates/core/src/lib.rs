pub mod cli;
pub mod enumeration;
pub mod error;
pub mod graph;
pub mod instruction;
pub mod objectives;
pub mod optimizer;
pub mod oracle;
pub mod render;
pub mod state;

pub use error::{Error, Result};
pub use graph::{ColoredGraph, Edge, EdgeKey, Mode, VertexRole, WeightDomain};
pub use num_complex::Complex64 as C64;
