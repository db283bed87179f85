use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::diffgraph::{adam_step, AdamConfig, AdamState, Tape};
use crate::error::{invalid, DfpError, Result};
use crate::game_model::GameDefinition;
use crate::policy::{Mode, PlayerPolicy};
use crate::seeds::{stream, StreamRole};

use super::rollout::{cost_node, mc_cost, RolloutData};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub minibatch: usize,
    pub adam: AdamConfig,
    /// Fraction of the batch held out, taken from the end of the path list.
    pub validation_fraction: f64,
    /// Epochs without validation improvement before stopping; `None` disables.
    pub patience: Option<usize>,
    /// Abort once the validation cost exceeds this multiple of its initial value.
    pub divergence_factor: f64,
    /// Put back the best-validation parameters after training.
    pub restore_best: bool,
    /// Validate with batch statistics and, after training, set the
    /// batch-norm running averages to the statistics of the whole batch.
    pub recalibrate_norm: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            minibatch: 1024,
            adam: AdamConfig::default(),
            validation_fraction: 0.25,
            patience: Some(20),
            divergence_factor: 10.0,
            restore_best: true,
            recalibrate_norm: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self, n_paths: usize) -> Result<()> {
        self.adam.validate()?;
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(invalid("train.validation_fraction", "must lie in [0, 1)"));
        }
        if self.minibatch == 0 {
            return Err(invalid("train.minibatch", "must be at least 1"));
        }
        let (train, _) = self.split(n_paths);
        if self.minibatch > train.len() {
            return Err(invalid(
                "train.minibatch",
                format!("{} exceeds the {} training paths", self.minibatch, train.len()),
            ));
        }
        if !(self.divergence_factor > 1.0) {
            return Err(invalid("train.divergence_factor", "must exceed 1"));
        }
        Ok(())
    }

    /// Training and validation path indices. Validation takes the last
    /// `floor(M * fraction)` paths; with none held out, the training paths
    /// double as validation paths.
    pub fn split(&self, n_paths: usize) -> (Vec<usize>, Vec<usize>) {
        let n_val = (n_paths as f64 * self.validation_fraction).floor() as usize;
        let cut = n_paths - n_val;
        let train: Vec<usize> = (0..cut).collect();
        let val = if n_val == 0 { train.clone() } else { (cut..n_paths).collect() };
        (train, val)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub stage: usize,
    pub player: usize,
    pub epoch: usize,
    pub train_cost: f64,
    pub val_cost: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub history: Vec<EpochRecord>,
    pub epochs_run: usize,
    pub best_val_cost: Option<f64>,
    pub stopped_early: bool,
}

/// Trains `policy` in place against the beliefs held in `data`, starting
/// from its current parameters and continuing the given Adam state.
/// Minibatches are reshuffled every epoch from the `(seed, stage, player)`
/// shuffle stream.
#[allow(clippy::too_many_arguments)]
pub fn train_best_response(
    game: &dyn GameDefinition,
    data: &RolloutData,
    player: usize,
    policy: &mut PlayerPolicy,
    adam: &mut AdamState,
    cfg: &TrainConfig,
    seed: u64,
    stage: usize,
) -> Result<TrainOutcome> {
    let mut outcome = TrainOutcome {
        history: Vec::new(),
        epochs_run: 0,
        best_val_cost: None,
        stopped_early: false,
    };
    if cfg.epochs == 0 {
        return Ok(outcome);
    }
    cfg.validate(data.n_paths())?;
    let (mut train_idx, val_idx) = cfg.split(data.n_paths());
    let val = data.subset(&val_idx);
    let mut rng = stream(seed, StreamRole::Shuffle, stage as u64, player as u64);

    let val_mode = if cfg.recalibrate_norm { Mode::Train } else { Mode::Eval };
    let initial = mc_cost(game, &val, player, policy, val_mode)?;
    let limit = cfg.divergence_factor * initial.abs();
    let mut best = (initial, policy.subnets().to_vec());
    let mut since_best = 0;

    for epoch in 1..=cfg.epochs {
        train_idx.shuffle(&mut rng);
        let mut weighted = 0.0;
        for batch in train_idx.chunks(cfg.minibatch) {
            let mb = data.subset(batch);
            let mut tape = Tape::new();
            let (loss, records) = cost_node(&mut tape, game, &mb, player, policy, Mode::Train)?;
            let grads = tape.backward(loss)?;
            policy.update_running_stats(&tape, &records);
            adam_step(policy.subnets_mut(), &grads, adam, &cfg.adam)?;
            weighted += tape.value(loss).item() * batch.len() as f64;
        }
        let train_cost = weighted / train_idx.len() as f64;
        let val_cost = mc_cost(game, &val, player, policy, val_mode)?;
        outcome.history.push(EpochRecord {
            stage,
            player,
            epoch,
            train_cost,
            val_cost,
        });
        outcome.epochs_run = epoch;
        log::debug!("stage {stage} player {player} epoch {epoch}: train {train_cost:.6} val {val_cost:.6}");
        if !val_cost.is_finite() || val_cost > limit {
            return Err(DfpError::Diverged {
                player,
                cost: val_cost,
                initial,
            });
        }
        if val_cost < best.0 {
            best = (val_cost, policy.subnets().to_vec());
            since_best = 0;
        } else {
            since_best += 1;
        }
        if cfg.patience.is_some_and(|p| since_best >= p) {
            outcome.stopped_early = true;
            break;
        }
    }
    if cfg.restore_best && best.0 < outcome.history.last().map_or(f64::INFINITY, |r| r.val_cost) {
        policy.subnets_mut().clone_from_slice(&best.1);
    }
    if cfg.recalibrate_norm {
        policy.recalibrate_norm(data.policy_inputs())?;
    }
    outcome.best_val_cost = Some(best.0);
    Ok(outcome)
}
