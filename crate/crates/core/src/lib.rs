pub mod commands;
pub mod config;
pub mod curvature;
pub mod error;
pub mod gcn;
pub mod graph;
pub mod io;
pub mod mining;
pub mod persistence;
pub mod pipeline;
pub mod synth;
pub mod train;
pub mod transport;
pub mod vectorize;

pub use error::{Error, Result};
pub use graph::{Graph, NodeId};
