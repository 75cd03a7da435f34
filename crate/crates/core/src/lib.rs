//! Subteam replacement in attributed social networks.
//!
//! A graph-convolution encoder with a clustering head is trained by
//! contrasting subteams against the rest of their team; replacements are
//! then searched only inside the clusters of the departing members. A
//! random-walk graph-kernel baseline and an evaluation harness built on
//! shortest-path, marginalized and edit-distance similarities sit alongside.

pub mod encoder;
pub mod error;
pub mod eval;
pub mod graph;
pub mod kernels;
pub mod objectives;
pub mod recommender;
pub mod sparse;
pub mod trainer;

pub use error::{Error, Result};
