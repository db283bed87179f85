//! One player's control problem against frozen opponents: Euler rollouts
//! on the tape, Monte-Carlo cost, and minibatch Adam training.

mod belief;
mod gradcheck;
mod noise;
mod rollout;
mod train;

pub use belief::{AggregationMode, BeliefHistory, BeliefProfile, ControlPaths, PathArray, StatePaths};
pub use gradcheck::{gradient_check, GradientCheck};
pub use noise::NoiseBatch;
pub use rollout::{mc_cost, rollout, simulate_profile, ProfileOutcome, RolloutData, RolloutOutput};
pub use train::{train_best_response, EpochRecord, TrainConfig, TrainOutcome};

pub use crate::policy::evaluate_controls;
