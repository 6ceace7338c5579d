//! Learn a textual similarity measure between documents from the link
//! structure of a document network, and evaluate it on edges-hidden and
//! nodes-hidden link prediction.

pub mod attention;
pub mod cli;
pub mod config;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod glove;
pub mod graph;
pub mod trainer;

pub use error::{MatanError, Result};
