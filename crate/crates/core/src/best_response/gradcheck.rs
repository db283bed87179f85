use crate::diffgraph::{ParamKey, Tape};
use crate::error::Result;
use crate::game_model::GameDefinition;
use crate::policy::{Mode, PlayerPolicy};

use super::rollout::{cost_node, mc_cost, RolloutData};

/// Largest disagreement between tape gradients and central differences.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientCheck {
    pub checked: usize,
    pub max_relative_error: f64,
    /// Parameter with the largest error, as `step/name[index]`.
    pub worst: String,
}

/// Compares the gradient of the train-mode Monte-Carlo cost with respect
/// to every trainable parameter against central differences with step
/// `delta`. Relative errors use `max(|g|, |fd|, 1e-6)` as the scale.
pub fn gradient_check(game: &dyn GameDefinition, data: &RolloutData, player: usize, policy: &PlayerPolicy, delta: f64) -> Result<GradientCheck> {
    let mut tape = Tape::new();
    let (loss, _) = cost_node(&mut tape, game, data, player, policy, Mode::Train)?;
    let grads = tape.backward(loss)?;
    let mut probe = policy.clone();
    let mut report = GradientCheck {
        checked: 0,
        max_relative_error: 0.0,
        worst: String::new(),
    };
    for step in 0..policy.n_steps() {
        let set = policy.subnet(step);
        for index in 0..set.len() {
            if !set.is_trainable(index) {
                continue;
            }
            let tape_grad = grads.get(ParamKey { set: step, index });
            for e in 0..set.tensor(index).len() {
                let original = set.tensor(index).values()[e];
                probe.subnets_mut()[step].tensor_mut(index).values_mut()[e] = original + delta;
                let up = mc_cost(game, data, player, &probe, Mode::Train)?;
                probe.subnets_mut()[step].tensor_mut(index).values_mut()[e] = original - delta;
                let down = mc_cost(game, data, player, &probe, Mode::Train)?;
                probe.subnets_mut()[step].tensor_mut(index).values_mut()[e] = original;
                let fd = (up - down) / (2.0 * delta);
                let g = tape_grad.map_or(0.0, |t| t.values()[e]);
                let rel = (g - fd).abs() / g.abs().max(fd.abs()).max(1e-6);
                report.checked += 1;
                if rel > report.max_relative_error {
                    report.max_relative_error = rel;
                    report.worst = format!("{step}/{}[{e}]", set.name(index));
                }
            }
        }
    }
    Ok(report)
}
