//! Deep fictitious play for stochastic differential games.
//!
//! Each player's open-loop strategy is a stack of small per-step networks
//! trained by Monte-Carlo best response against the frozen play of the
//! others; stages repeat until realized costs stop moving. The
//! linear-quadratic inter-bank lending game ships with an exact solver so
//! learned equilibria can be scored against the truth.

pub mod best_response;
pub mod diffgraph;
pub mod error;
pub mod fictitious_play;
pub mod game_model;
pub mod lq_oracle;
pub mod policy;
pub mod seeds;

pub use error::{DfpError, Result};
