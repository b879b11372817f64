pub mod config;
pub mod error;
pub mod eval;
pub mod graph;
pub mod ib;
pub mod incremental;
pub mod io;
pub mod model;
pub mod pipeline;
pub mod relevance;
pub mod scenegraph;
pub mod synth;
pub mod tracker;

pub use error::{Error, Result};
