use crate::diffgraph::{NodeId, Tape, Tensor};
use crate::error::{DfpError, Result};
use crate::game_model::GameDefinition;
use crate::policy::{Mode, NormRecord, PlayerPolicy, PolicyInputs};

use super::belief::{BeliefProfile, ControlPaths, PathArray, StatePaths};
use super::noise::NoiseBatch;

/// Paths per tape when simulating large batches forward-only.
const CHUNK: usize = 4096;

/// Everything a rollout reads, arranged per step as row-aligned matrices.
#[derive(Debug, Clone)]
pub struct RolloutData {
    x0: Vec<f64>,
    n_players: usize,
    control_dim: usize,
    paths: Vec<usize>,
    inputs: Vec<Tensor>,
    beliefs: Vec<Tensor>,
    dw_idio: Vec<Tensor>,
    dw_common: Vec<Tensor>,
}

impl RolloutData {
    /// Policy input matrices, one per step; empty when built without inputs.
    pub fn policy_inputs(&self) -> &[Tensor] {
        &self.inputs
    }

    /// `inputs` may be omitted when no policy is rolled out.
    pub fn new(game: &dyn GameDefinition, noise: &NoiseBatch, inputs: Option<PolicyInputs>, beliefs: &BeliefProfile) -> Result<Self> {
        let dims = game.dims();
        let (n, d, m, k) = (dims.n_players, dims.state_dim, dims.noise_dim, dims.control_dim);
        if noise.n_steps() != dims.n_steps || noise.n_sources() != dims.n_sources() || noise.noise_dim() != m {
            return Err(DfpError::BatchMismatch("noise batch does not match the game dimensions".into()));
        }
        if beliefs.n_paths() != noise.n_paths() || beliefs.n_steps() != dims.n_steps {
            return Err(DfpError::BatchMismatch(format!(
                "beliefs cover {} paths x {} steps, noise has {} x {}",
                beliefs.n_paths(),
                beliefs.n_steps(),
                noise.n_paths(),
                noise.n_steps()
            )));
        }
        if beliefs.n_players() != n || beliefs.control_dim() != k {
            return Err(DfpError::BatchMismatch("beliefs do not match the number of players".into()));
        }
        let inputs = match inputs {
            Some(pi) => {
                if pi.n_paths() != noise.n_paths() || pi.n_steps() != dims.n_steps {
                    return Err(DfpError::BatchMismatch("policy inputs do not match the noise batch".into()));
                }
                (0..pi.n_steps()).map(|s| pi.step(s).clone()).collect()
            }
            None => Vec::new(),
        };
        let rows = noise.n_paths();
        let width = n * d * m;
        let mut belief_t = Vec::with_capacity(dims.n_steps);
        let mut dw_idio = Vec::with_capacity(dims.n_steps);
        let mut dw_common = Vec::with_capacity(dims.n_steps);
        for step in 0..dims.n_steps {
            let mut b = Vec::with_capacity(rows * n * k);
            let mut wi = Vec::with_capacity(rows * width);
            let mut wc = Vec::with_capacity(rows * width);
            for path in 0..rows {
                b.extend_from_slice(beliefs.controls().at(path, step));
                let inc = noise.increments_at(path, step);
                for player in 0..n {
                    for _ in 0..d {
                        wi.extend_from_slice(&inc[(player + 1) * m..(player + 2) * m]);
                        wc.extend_from_slice(&inc[..m]);
                    }
                }
            }
            belief_t.push(Tensor::matrix(rows, n * k, b)?);
            dw_idio.push(Tensor::matrix(rows, width, wi)?);
            dw_common.push(Tensor::matrix(rows, width, wc)?);
        }
        Ok(Self {
            x0: game.initial_states().to_vec(),
            n_players: n,
            control_dim: k,
            paths: (0..rows).collect(),
            inputs,
            beliefs: belief_t,
            dw_idio,
            dw_common,
        })
    }

    pub fn n_paths(&self) -> usize {
        self.paths.len()
    }

    pub fn n_steps(&self) -> usize {
        self.beliefs.len()
    }

    pub fn has_inputs(&self) -> bool {
        !self.inputs.is_empty()
    }

    /// Rows `rows` of every per-step matrix, in the given order.
    pub fn subset(&self, rows: &[usize]) -> RolloutData {
        let pick = |v: &Vec<Tensor>| v.iter().map(|t| t.select_rows(rows)).collect();
        RolloutData {
            x0: self.x0.clone(),
            n_players: self.n_players,
            control_dim: self.control_dim,
            paths: rows.iter().map(|&r| self.paths[r]).collect(),
            inputs: pick(&self.inputs),
            beliefs: pick(&self.beliefs),
            dw_idio: pick(&self.dw_idio),
            dw_common: pick(&self.dw_common),
        }
    }

    /// Belief controls of everyone but `player`, as (left, right) blocks.
    fn opponents(&self, step: usize, player: usize) -> (Option<Tensor>, Option<Tensor>) {
        let k = self.control_dim;
        let b = &self.beliefs[step];
        let left = (player > 0).then(|| columns(b, 0, player * k));
        let right = (player + 1 < self.n_players).then(|| columns(b, (player + 1) * k, b.cols()));
        (left, right)
    }
}

fn columns(t: &Tensor, from: usize, to: usize) -> Tensor {
    let rows = t.rows();
    let mut v = Vec::with_capacity(rows * (to - from));
    for r in 0..rows {
        v.extend_from_slice(&t.row(r)[from..to]);
    }
    Tensor::matrix(rows, to - from, v).expect("sizes agree")
}

struct Graph {
    states: Vec<NodeId>,
    costs: Vec<NodeId>,
}

/// Euler scheme on `tape`. `controls_at` supplies the full control matrix
/// for each step; pathwise costs are accumulated for `cost_players`.
fn simulate<F>(tape: &mut Tape, game: &dyn GameDefinition, data: &RolloutData, cost_players: &[usize], mut controls_at: F) -> Result<Graph>
where
    F: FnMut(&mut Tape, usize) -> Result<NodeId>,
{
    let dims = game.dims();
    let h = dims.step_size();
    let rows = data.n_paths();
    let (nd, m) = (dims.states_width(), dims.noise_dim);
    let mut x0 = Vec::with_capacity(rows * nd);
    for _ in 0..rows {
        x0.extend_from_slice(&data.x0);
    }
    let mut x = tape.input(Tensor::matrix(rows, nd, x0)?);
    // Sums the noise components of each state entry when m > 1.
    let collapse = if m > 1 {
        let mut s = vec![0.0; nd * m * nd];
        for j in 0..nd {
            for c in 0..m {
                s[(j * m + c) * nd + j] = 1.0;
            }
        }
        Some((Tensor::matrix(nd * m, nd, s)?, Tensor::zeros(vec![nd])))
    } else {
        None
    };
    let mut states = vec![x];
    let mut running: Vec<Option<NodeId>> = vec![None; cost_players.len()];
    for step in 0..data.n_steps() {
        let t = dims.time(step);
        let a = controls_at(tape, step)?;
        for (acc, &p) in running.iter_mut().zip(cost_players) {
            let r = game.running_cost(tape, t, x, a, p)?;
            let r = tape.scale(r, h);
            *acc = Some(match *acc {
                None => r,
                Some(prev) => tape.add(prev, r)?,
            });
        }
        let drift = game.drift(tape, t, x, a)?;
        let idio = game.idiosyncratic_diffusion(tape, t, x, a)?;
        let common = game.common_diffusion(tape, t, x, a)?;
        let dwi = tape.input(data.dw_idio[step].clone());
        let dwc = tape.input(data.dw_common[step].clone());
        let ni = tape.mul(idio, dwi)?;
        let nc = tape.mul(common, dwc)?;
        let mut shock = tape.add(ni, nc)?;
        if let Some((s, z)) = &collapse {
            let s = tape.input(s.clone());
            let z = tape.input(z.clone());
            shock = tape.affine(shock, s, z)?;
        }
        let moved = tape.scale(drift, h);
        let moved = tape.add(x, moved)?;
        x = tape.add(moved, shock)?;
        let value = tape.value(x);
        if !value.all_finite() {
            let row = (0..rows).find(|&r| value.row(r).iter().any(|v| !v.is_finite())).unwrap_or(0);
            return Err(DfpError::NonFiniteState {
                step: step + 1,
                path: data.paths[row],
            });
        }
        states.push(x);
    }
    let mut costs = Vec::with_capacity(cost_players.len());
    for (acc, &p) in running.into_iter().zip(cost_players) {
        let terminal = game.terminal_cost(tape, x, p)?;
        costs.push(match acc {
            None => terminal,
            Some(r) => tape.add(r, terminal)?,
        });
    }
    Ok(Graph { states, costs })
}

/// Records player `player`'s rollout against the beliefs in `data`;
/// returns the state nodes, own control nodes, pathwise cost node and the
/// batch-norm records of a train-mode pass.
fn player_graph(
    tape: &mut Tape,
    game: &dyn GameDefinition,
    data: &RolloutData,
    player: usize,
    policy: &PlayerPolicy,
    mode: Mode,
) -> Result<(Graph, Vec<NodeId>, Vec<NormRecord>)> {
    if !data.has_inputs() {
        return Err(DfpError::BatchMismatch("rollout data carries no policy inputs".into()));
    }
    if player >= data.n_players {
        return Err(crate::error::invalid("player", format!("player {player} out of range")));
    }
    let mut records = Vec::new();
    let mut own_nodes = Vec::with_capacity(data.n_steps());
    let graph = simulate(tape, game, data, &[player], |tape, step| {
        let input = tape.input(data.inputs[step].clone());
        let (own, recs) = policy.record_step(tape, step, input, mode)?;
        records.extend(recs);
        own_nodes.push(own);
        let (left, right) = data.opponents(step, player);
        let mut parts = Vec::with_capacity(3);
        if let Some(l) = left {
            parts.push(tape.input(l));
        }
        parts.push(own);
        if let Some(r) = right {
            parts.push(tape.input(r));
        }
        if parts.len() == 1 {
            Ok(own)
        } else {
            tape.concat(&parts)
        }
    })?;
    Ok((graph, own_nodes, records))
}

/// Mean pathwise cost recorded on `tape`, ready for `backward`.
pub(crate) fn cost_node(
    tape: &mut Tape,
    game: &dyn GameDefinition,
    data: &RolloutData,
    player: usize,
    policy: &PlayerPolicy,
    mode: Mode,
) -> Result<(NodeId, Vec<NormRecord>)> {
    let (graph, _, records) = player_graph(tape, game, data, player, policy, mode)?;
    Ok((tape.reduce_mean(graph.costs[0]), records))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RolloutOutput {
    pub states: StatePaths,
    pub own_controls: ControlPaths,
    pub pathwise_cost: Vec<f64>,
}

fn collect_paths(tape: &Tape, nodes: &[NodeId]) -> PathArray {
    let first = tape.value(nodes[0]);
    let (rows, width) = (first.rows(), first.cols());
    let mut out = PathArray::zeros(rows, nodes.len(), width);
    for (s, &node) in nodes.iter().enumerate() {
        let v = tape.value(node);
        for r in 0..rows {
            out.at_mut(r, s).copy_from_slice(v.row(r));
        }
    }
    out
}

/// Simulates player `player` using `policy` while everyone else follows the
/// beliefs stored in `data`.
pub fn rollout(game: &dyn GameDefinition, data: &RolloutData, player: usize, policy: &PlayerPolicy, mode: Mode) -> Result<RolloutOutput> {
    let mut tape = Tape::new();
    let (graph, own, _) = player_graph(&mut tape, game, data, player, policy, mode)?;
    Ok(RolloutOutput {
        states: collect_paths(&tape, &graph.states),
        own_controls: collect_paths(&tape, &own),
        pathwise_cost: tape.value(graph.costs[0]).values().to_vec(),
    })
}

/// Monte-Carlo estimate of player `player`'s cost.
pub fn mc_cost(game: &dyn GameDefinition, data: &RolloutData, player: usize, policy: &PlayerPolicy, mode: Mode) -> Result<f64> {
    let mut tape = Tape::new();
    let (node, _) = cost_node(&mut tape, game, data, player, policy, mode)?;
    Ok(tape.value(node).item())
}

/// States and per-player pathwise costs when every player follows the
/// controls stored as beliefs in `data`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileOutcome {
    pub states: StatePaths,
    /// `(path, player)`, row-major.
    pub costs: Vec<f64>,
    pub n_players: usize,
}

impl ProfileOutcome {
    pub fn n_paths(&self) -> usize {
        self.costs.len() / self.n_players.max(1)
    }

    pub fn mean_costs(&self) -> Vec<f64> {
        let m = self.n_paths() as f64;
        (0..self.n_players)
            .map(|i| self.costs.iter().skip(i).step_by(self.n_players).sum::<f64>() / m)
            .collect()
    }

    /// Standard error of each mean cost.
    pub fn std_errors(&self) -> Vec<f64> {
        let m = self.n_paths() as f64;
        self.mean_costs()
            .iter()
            .enumerate()
            .map(|(i, mean)| {
                let ss: f64 = self.costs.iter().skip(i).step_by(self.n_players).map(|c| (c - mean).powi(2)).sum();
                (ss / (m - 1.0).max(1.0) / m).sqrt()
            })
            .collect()
    }
}

pub fn simulate_profile(game: &dyn GameDefinition, data: &RolloutData) -> Result<ProfileOutcome> {
    let dims = game.dims();
    let n = dims.n_players;
    let players: Vec<usize> = (0..n).collect();
    let rows = data.n_paths();
    let mut states = PathArray::zeros(rows, dims.n_steps + 1, dims.states_width());
    let mut costs = vec![0.0; rows * n];
    let mut start = 0;
    while start < rows {
        let end = (start + CHUNK).min(rows);
        let idx: Vec<usize> = (start..end).collect();
        let owned;
        let chunk = if start == 0 && end == rows {
            data
        } else {
            owned = data.subset(&idx);
            &owned
        };
        let mut tape = Tape::new();
        let graph = simulate(&mut tape, game, chunk, &players, |tape, step| Ok(tape.input(chunk.beliefs[step].clone())))?;
        for (s, &node) in graph.states.iter().enumerate() {
            let v = tape.value(node);
            for (r, path) in (start..end).enumerate() {
                states.at_mut(path, s).copy_from_slice(v.row(r));
            }
        }
        for (i, &node) in graph.costs.iter().enumerate() {
            let v = tape.value(node).values();
            for (r, path) in (start..end).enumerate() {
                costs[path * n + i] = v[r];
            }
        }
        start = end;
    }
    Ok(ProfileOutcome {
        states,
        costs,
        n_players: n,
    })
}
