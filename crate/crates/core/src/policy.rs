//! Open-loop policies: one small feed-forward network per time step.
//!
//! The network for step `k` sees the initial states and the Brownian path
//! up to `kh`, i.e. `(X_0, W_h, ..., W_kh)`, and outputs that step's control.
//! It never sees the state process, so a policy's controls are a fixed
//! function of `(X_0, noise, parameters)`.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::best_response::{ControlPaths, NoiseBatch};
use crate::diffgraph::{NodeId, NormStats, ParamKey, ParamSet, ParamSetCheckpoint, Tape, Tensor};
use crate::error::{invalid, DfpError, Result};
use crate::game_model::GameDims;
use crate::seeds::{stream, StreamRole};

pub const POLICY_FORMAT_VERSION: u32 = 1;

/// How the Brownian history is presented to a subnetwork.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum InputEncoding {
    /// Path values `W_h, ..., W_kh`.
    #[default]
    Cumulative,
    /// Increments `W_h - W_0, ..., W_kh - W_(k-1)h`.
    Increments,
}

/// Architecture of each per-step subnetwork.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SubnetSpec {
    pub hidden_layers: usize,
    pub hidden_width: usize,
    pub use_batch_norm: bool,
    pub output_dim: usize,
    pub bn_momentum: f64,
    pub bn_eps: f64,
    pub input_encoding: InputEncoding,
    /// Optional box constraint applied to every control component.
    pub control_bounds: Option<[f64; 2]>,
}

impl Default for SubnetSpec {
    fn default() -> Self {
        Self {
            hidden_layers: 2,
            hidden_width: 8,
            use_batch_norm: true,
            output_dim: 1,
            bn_momentum: 0.99,
            bn_eps: 1e-3,
            input_encoding: InputEncoding::Cumulative,
            control_bounds: None,
        }
    }
}

impl SubnetSpec {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_layers == 0 {
            return Err(invalid("policy.hidden_layers", "must be at least 1"));
        }
        if self.hidden_width == 0 || self.output_dim == 0 {
            return Err(invalid("policy.hidden_width", "layer widths must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.bn_momentum) {
            return Err(invalid("policy.bn_momentum", "must lie in [0, 1)"));
        }
        if !(self.bn_eps > 0.0) {
            return Err(invalid("policy.bn_eps", "must be positive"));
        }
        if let Some([lo, hi]) = self.control_bounds {
            if !(lo < hi) {
                return Err(invalid("policy.control_bounds", "lower bound must be below upper bound"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Width of the input of subnetwork `step`: `N d + step (N + 1) m`.
pub fn input_width(dims: &GameDims, step: usize) -> usize {
    dims.n_players * dims.state_dim + step * dims.n_sources() * dims.noise_dim
}

/// Rows of `(X_0, W_h, ..., W_kh)` for every path of `noise`.
///
/// `X_0` comes first (player-major); then, for each time `jh`, the value of
/// every source (common noise first) and noise component.
pub fn assemble_state(dims: &GameDims, x0: &[f64], noise: &NoiseBatch, step: usize, encoding: InputEncoding) -> Result<Tensor> {
    if step >= dims.n_steps {
        return Err(DfpError::StepOutOfRange {
            step,
            n_steps: dims.n_steps,
        });
    }
    check_noise(dims, x0, noise)?;
    let width = input_width(dims, step);
    let block = dims.n_sources() * dims.noise_dim;
    let mut values = Vec::with_capacity(noise.n_paths() * width);
    let mut running = vec![0.0; block];
    for path in 0..noise.n_paths() {
        values.extend_from_slice(x0);
        running.iter_mut().for_each(|v| *v = 0.0);
        for j in 0..step {
            let inc = noise.increments_at(path, j);
            match encoding {
                InputEncoding::Cumulative => {
                    for (r, d) in running.iter_mut().zip(inc) {
                        *r += d;
                    }
                    values.extend_from_slice(&running);
                }
                InputEncoding::Increments => values.extend_from_slice(inc),
            }
        }
    }
    Tensor::matrix(noise.n_paths(), width, values)
}

fn check_noise(dims: &GameDims, x0: &[f64], noise: &NoiseBatch) -> Result<()> {
    if x0.len() != dims.states_width() {
        return Err(invalid("x0", format!("expected {} values", dims.states_width())));
    }
    if noise.n_steps() != dims.n_steps || noise.n_sources() != dims.n_sources() || noise.noise_dim() != dims.noise_dim {
        return Err(DfpError::BatchMismatch(format!(
            "noise batch has {} steps x {} sources x {} components, game expects {} x {} x {}",
            noise.n_steps(),
            noise.n_sources(),
            noise.noise_dim(),
            dims.n_steps,
            dims.n_sources(),
            dims.noise_dim
        )));
    }
    Ok(())
}

/// Network inputs for every step, built once per noise batch and shared by
/// all players.
#[derive(Debug, Clone)]
pub struct PolicyInputs {
    per_step: Vec<Tensor>,
    encoding: InputEncoding,
}

impl PolicyInputs {
    pub fn build(dims: &GameDims, x0: &[f64], noise: &NoiseBatch, encoding: InputEncoding) -> Result<Self> {
        check_noise(dims, x0, noise)?;
        let block = dims.n_sources() * dims.noise_dim;
        let m = noise.n_paths();
        let mut per_step = Vec::with_capacity(dims.n_steps);
        let mut previous: Option<Tensor> = None;
        let mut running = vec![0.0; m * block];
        for step in 0..dims.n_steps {
            let tensor = match &previous {
                None => {
                    let mut values = Vec::with_capacity(m * x0.len());
                    for _ in 0..m {
                        values.extend_from_slice(x0);
                    }
                    Tensor::matrix(m, x0.len(), values)?
                }
                Some(prev) => {
                    let width = prev.cols() + block;
                    let mut values = Vec::with_capacity(m * width);
                    for path in 0..m {
                        values.extend_from_slice(prev.row(path));
                        let inc = noise.increments_at(path, step - 1);
                        let acc = &mut running[path * block..(path + 1) * block];
                        match encoding {
                            InputEncoding::Cumulative => {
                                for (r, d) in acc.iter_mut().zip(inc) {
                                    *r += d;
                                }
                                values.extend_from_slice(acc);
                            }
                            InputEncoding::Increments => values.extend_from_slice(inc),
                        }
                    }
                    Tensor::matrix(m, width, values)?
                }
            };
            previous = Some(tensor.clone());
            per_step.push(tensor);
        }
        Ok(Self { per_step, encoding })
    }

    pub fn step(&self, step: usize) -> &Tensor {
        &self.per_step[step]
    }

    pub fn n_steps(&self) -> usize {
        self.per_step.len()
    }

    pub fn n_paths(&self) -> usize {
        self.per_step.first().map_or(0, |t| t.rows())
    }

    pub fn encoding(&self) -> InputEncoding {
        self.encoding
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct LayerSlots {
    weight: usize,
    bias: usize,
    norm: Option<NormSlots>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct NormSlots {
    gamma: usize,
    beta: usize,
    running_mean: usize,
    running_var: usize,
}

/// A batch-norm node recorded during a train-mode forward pass, used to
/// refresh the running statistics afterwards.
#[derive(Debug, Clone, Copy)]
pub struct NormRecord {
    step: usize,
    layer: usize,
    node: NodeId,
}

/// One player's stack of per-step subnetworks.
#[derive(Debug, Clone, PartialEq)]
pub struct PlayerPolicy {
    player_index: usize,
    spec: SubnetSpec,
    input_widths: Vec<usize>,
    subnets: Vec<ParamSet>,
    init_seed: u64,
    layers: Vec<LayerSlots>,
}

/// Glorot-uniform weights, zero biases, unit scale and zero shift for
/// batch normalization, reproducible from `seed`.
pub fn init_policy(spec: SubnetSpec, dims: &GameDims, player_index: usize, seed: u64) -> Result<PlayerPolicy> {
    spec.validate()?;
    dims.validate()?;
    if spec.output_dim != dims.control_dim {
        return Err(invalid("policy.output_dim", "must equal the control dimension"));
    }
    let mut rng = stream(seed, StreamRole::Initialization, 0, player_index as u64);
    let input_widths: Vec<usize> = (0..dims.n_steps).map(|k| input_width(dims, k)).collect();
    let mut subnets = Vec::with_capacity(dims.n_steps);
    let mut layers = Vec::new();
    for &width in &input_widths {
        let (set, slots) = build_subnet(&spec, width, &mut rng)?;
        layers = slots;
        subnets.push(set);
    }
    Ok(PlayerPolicy {
        player_index,
        spec,
        input_widths,
        subnets,
        init_seed: seed,
        layers,
    })
}

/// Half-width of the Glorot-uniform interval.
pub fn glorot_bound(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

fn glorot(rng: &mut ChaCha8Rng, fan_in: usize, fan_out: usize) -> Result<Tensor> {
    let bound = glorot_bound(fan_in, fan_out);
    let values = (0..fan_in * fan_out).map(|_| rng.random_range(-bound..bound)).collect();
    Tensor::matrix(fan_in, fan_out, values)
}

fn build_subnet(spec: &SubnetSpec, input_width: usize, rng: &mut ChaCha8Rng) -> Result<(ParamSet, Vec<LayerSlots>)> {
    let mut set = ParamSet::new();
    let mut slots = Vec::new();
    let mut fan_in = input_width;
    let total = spec.hidden_layers + 1;
    for layer in 0..total {
        let is_output = layer == spec.hidden_layers;
        let fan_out = if is_output { spec.output_dim } else { spec.hidden_width };
        let prefix = if is_output { "output".to_string() } else { format!("dense{layer}") };
        let weight = set.push(format!("{prefix}.weight"), glorot(rng, fan_in, fan_out)?, true)?;
        let bias = set.push(format!("{prefix}.bias"), Tensor::zeros(vec![fan_out]), true)?;
        let norm = if !is_output && spec.use_batch_norm {
            Some(NormSlots {
                gamma: set.push(format!("bn{layer}.gamma"), Tensor::filled(vec![fan_out], 1.0), true)?,
                beta: set.push(format!("bn{layer}.beta"), Tensor::zeros(vec![fan_out]), true)?,
                running_mean: set.push(format!("bn{layer}.running_mean"), Tensor::zeros(vec![fan_out]), false)?,
                running_var: set.push(format!("bn{layer}.running_var"), Tensor::filled(vec![fan_out], 1.0), false)?,
            })
        } else {
            None
        };
        slots.push(LayerSlots { weight, bias, norm });
        fan_in = fan_out;
    }
    Ok((set, slots))
}

fn layer_slots(spec: &SubnetSpec, set: &ParamSet) -> Result<Vec<LayerSlots>> {
    let find = |name: String| {
        set.index_of(&name)
            .ok_or_else(|| DfpError::Checkpoint(format!("missing parameter `{name}`")))
    };
    let mut slots = Vec::new();
    for layer in 0..=spec.hidden_layers {
        let is_output = layer == spec.hidden_layers;
        let prefix = if is_output { "output".to_string() } else { format!("dense{layer}") };
        let norm = if !is_output && spec.use_batch_norm {
            Some(NormSlots {
                gamma: find(format!("bn{layer}.gamma"))?,
                beta: find(format!("bn{layer}.beta"))?,
                running_mean: find(format!("bn{layer}.running_mean"))?,
                running_var: find(format!("bn{layer}.running_var"))?,
            })
        } else {
            None
        };
        slots.push(LayerSlots {
            weight: find(format!("{prefix}.weight"))?,
            bias: find(format!("{prefix}.bias"))?,
            norm,
        });
    }
    Ok(slots)
}

impl PlayerPolicy {
    pub fn player_index(&self) -> usize {
        self.player_index
    }

    pub fn spec(&self) -> &SubnetSpec {
        &self.spec
    }

    pub fn n_steps(&self) -> usize {
        self.subnets.len()
    }

    pub fn input_widths(&self) -> &[usize] {
        &self.input_widths
    }

    pub fn init_seed(&self) -> u64 {
        self.init_seed
    }

    pub fn subnet(&self, step: usize) -> &ParamSet {
        &self.subnets[step]
    }

    pub fn subnets(&self) -> &[ParamSet] {
        &self.subnets
    }

    pub fn subnets_mut(&mut self) -> &mut [ParamSet] {
        &mut self.subnets
    }

    /// Sets every trainable entry to zero.
    pub fn zero_trainable(&mut self) {
        for set in &mut self.subnets {
            for i in 0..set.len() {
                if set.is_trainable(i) {
                    set.tensor_mut(i).values_mut().iter_mut().for_each(|v| *v = 0.0);
                }
            }
        }
    }

    /// Records subnetwork `step` on `tape`; parameters are keyed by
    /// `ParamKey { set: step, .. }`.
    pub fn record_step(&self, tape: &mut Tape, step: usize, input: NodeId, mode: Mode) -> Result<(NodeId, Vec<NormRecord>)> {
        if step >= self.subnets.len() {
            return Err(DfpError::StepOutOfRange {
                step,
                n_steps: self.subnets.len(),
            });
        }
        let width = tape.value(input).cols();
        if width != self.input_widths[step] {
            return Err(DfpError::ShapeMismatch {
                op: "policy_forward",
                detail: format!("subnet {step} expects width {}, got {width}", self.input_widths[step]),
            });
        }
        let set = &self.subnets[step];
        let key = |index| ParamKey { set: step, index };
        let mut records = Vec::new();
        let mut h = input;
        for (layer, slots) in self.layers.iter().enumerate() {
            let w = tape.parameter(key(slots.weight), set.tensor(slots.weight).clone());
            let b = tape.parameter(key(slots.bias), set.tensor(slots.bias).clone());
            h = tape.affine(h, w, b)?;
            if layer == self.spec.hidden_layers {
                break;
            }
            if let Some(ns) = slots.norm {
                let g = tape.parameter(key(ns.gamma), set.tensor(ns.gamma).clone());
                let bt = tape.parameter(key(ns.beta), set.tensor(ns.beta).clone());
                let stats = match mode {
                    Mode::Train => NormStats::Batch,
                    Mode::Eval => NormStats::Frozen {
                        mean: set.tensor(ns.running_mean).values(),
                        var: set.tensor(ns.running_var).values(),
                    },
                };
                h = tape.batch_norm(h, g, bt, stats, self.spec.bn_eps)?;
                if mode == Mode::Train {
                    records.push(NormRecord { step, layer, node: h });
                }
            }
            h = tape.relu(h);
            if !tape.value(h).all_finite() {
                return Err(DfpError::NonFiniteActivation {
                    step,
                    layer: format!("hidden layer {layer}"),
                });
            }
        }
        if let Some([lo, hi]) = self.spec.control_bounds {
            // lo + relu(x - lo) - relu(x - hi)
            let shape = tape.value(h).shape().to_vec();
            let neg_lo = tape.input(Tensor::filled(shape.clone(), -lo));
            let neg_hi = tape.input(Tensor::filled(shape.clone(), -hi));
            let lo_t = tape.input(Tensor::filled(shape, lo));
            let above_lo = tape.add(h, neg_lo)?;
            let above_lo = tape.relu(above_lo);
            let above_hi = tape.add(h, neg_hi)?;
            let above_hi = tape.relu(above_hi);
            let above_hi = tape.scale(above_hi, -1.0);
            let clipped = tape.add(above_lo, above_hi)?;
            h = tape.add(lo_t, clipped)?;
        }
        if !tape.value(h).all_finite() {
            return Err(DfpError::NonFiniteActivation {
                step,
                layer: "output".into(),
            });
        }
        Ok((h, records))
    }

    /// Folds the batch statistics seen by recorded batch-norm nodes into the
    /// running averages: `running = momentum * running + (1 - momentum) * batch`.
    pub fn update_running_stats(&mut self, tape: &Tape, records: &[NormRecord]) {
        let momentum = self.spec.bn_momentum;
        for rec in records {
            let Some((mean, var)) = tape.batch_stats(rec.node) else { continue };
            let Some(ns) = self.layers[rec.layer].norm else { continue };
            let set = &mut self.subnets[rec.step];
            for (r, m) in set.tensor_mut(ns.running_mean).values_mut().iter_mut().zip(mean) {
                *r = momentum * *r + (1.0 - momentum) * m;
            }
            for (r, v) in set.tensor_mut(ns.running_var).values_mut().iter_mut().zip(var) {
                *r = momentum * *r + (1.0 - momentum) * v;
            }
        }
    }

    /// Replaces the running averages with the exact batch statistics of
    /// `step_inputs`, one input matrix per step.
    pub fn recalibrate_norm(&mut self, step_inputs: &[Tensor]) -> Result<()> {
        if step_inputs.len() != self.subnets.len() {
            return Err(DfpError::BatchMismatch(format!(
                "{} input matrices for {} subnetworks",
                step_inputs.len(),
                self.subnets.len()
            )));
        }
        for (step, input) in step_inputs.iter().enumerate() {
            let mut tape = Tape::new();
            let x = tape.input(input.clone());
            let (_, records) = self.record_step(&mut tape, step, x, Mode::Train)?;
            for rec in records {
                let Some((mean, var)) = tape.batch_stats(rec.node) else { continue };
                let Some(ns) = self.layers[rec.layer].norm else { continue };
                let set = &mut self.subnets[step];
                set.tensor_mut(ns.running_mean).values_mut().copy_from_slice(mean);
                set.tensor_mut(ns.running_var).values_mut().copy_from_slice(var);
            }
        }
        Ok(())
    }

    /// Controls of subnetwork `step` for a batch of inputs. In train mode
    /// the batch statistics are used and folded into the running averages.
    pub fn policy_forward(&mut self, inputs: &Tensor, step: usize, mode: Mode) -> Result<Tensor> {
        let mut tape = Tape::new();
        let x = tape.input(inputs.clone());
        let (out, records) = self.record_step(&mut tape, step, x, mode)?;
        if mode == Mode::Train {
            self.update_running_stats(&tape, &records);
        }
        Ok(tape.value(out).clone())
    }

    /// Eval-mode forward pass over a batch of inputs.
    pub fn eval_step(&self, inputs: &Tensor, step: usize) -> Result<Tensor> {
        let mut tape = Tape::new();
        let x = tape.input(inputs.clone());
        let (out, _) = self.record_step(&mut tape, step, x, Mode::Eval)?;
        Ok(tape.value(out).clone())
    }

    pub fn to_checkpoint(&self) -> PolicyCheckpoint {
        PolicyCheckpoint {
            format_version: POLICY_FORMAT_VERSION,
            player_index: self.player_index,
            init_seed: self.init_seed,
            spec: self.spec,
            input_widths: self.input_widths.clone(),
            subnets: self.subnets.iter().map(ParamSet::to_checkpoint).collect(),
        }
    }

    pub fn from_checkpoint(ckpt: PolicyCheckpoint) -> Result<Self> {
        if ckpt.format_version != POLICY_FORMAT_VERSION {
            return Err(DfpError::FormatVersion {
                found: ckpt.format_version,
                expected: POLICY_FORMAT_VERSION,
            });
        }
        ckpt.spec.validate()?;
        if ckpt.subnets.len() != ckpt.input_widths.len() || ckpt.subnets.is_empty() {
            return Err(DfpError::Checkpoint("subnet count does not match input widths".into()));
        }
        let subnets = ckpt
            .subnets
            .into_iter()
            .map(ParamSet::from_checkpoint)
            .collect::<Result<Vec<_>>>()?;
        let layers = layer_slots(&ckpt.spec, &subnets[0])?;
        for (set, &width) in subnets.iter().zip(&ckpt.input_widths) {
            if layer_slots(&ckpt.spec, set)? != layers || set.tensor(layers[0].weight).rows() != width {
                return Err(DfpError::Checkpoint("subnet layout differs from the first subnet".into()));
            }
        }
        Ok(Self {
            player_index: ckpt.player_index,
            spec: ckpt.spec,
            input_widths: ckpt.input_widths,
            subnets,
            init_seed: ckpt.init_seed,
            layers,
        })
    }

    /// Writes `policy_player{i}.json` into `dir`.
    pub fn save(&self, dir: &std::path::Path) -> Result<std::path::PathBuf> {
        let path = dir.join(checkpoint_file_name(self.player_index));
        std::fs::write(&path, serde_json::to_string(&self.to_checkpoint())?)?;
        Ok(path)
    }

    pub fn load(dir: &std::path::Path, player_index: usize) -> Result<Self> {
        let text = std::fs::read_to_string(dir.join(checkpoint_file_name(player_index)))?;
        let value: serde_json::Value = serde_json::from_str(&text)?;
        // Version check precedes schema parsing.
        let version = value.get("format_version").and_then(|v| v.as_u64()).unwrap_or(0) as u32;
        if version != POLICY_FORMAT_VERSION {
            return Err(DfpError::FormatVersion {
                found: version,
                expected: POLICY_FORMAT_VERSION,
            });
        }
        Self::from_checkpoint(serde_json::from_value(value)?)
    }
}

pub fn checkpoint_file_name(player_index: usize) -> String {
    format!("policy_player{player_index}.json")
}

/// On-disk form of a [`PlayerPolicy`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyCheckpoint {
    pub format_version: u32,
    pub player_index: usize,
    pub init_seed: u64,
    pub spec: SubnetSpec,
    pub input_widths: Vec<usize>,
    pub subnets: Vec<ParamSetCheckpoint>,
}

/// Eval-mode controls of one policy on every path and step, `(path, step, k)`.
pub fn evaluate_controls(policy: &PlayerPolicy, inputs: &PolicyInputs) -> Result<ControlPaths> {
    let k = policy.spec.output_dim;
    let (m, n_steps) = (inputs.n_paths(), inputs.n_steps());
    let mut out = ControlPaths::zeros(m, n_steps, k);
    for step in 0..n_steps {
        let controls = policy.eval_step(inputs.step(step), step)?;
        for path in 0..m {
            out.at_mut(path, step).copy_from_slice(controls.row(path));
        }
    }
    Ok(out)
}

/// Eval-mode controls of every player, `(path, step, player * k + c)`.
/// Paths are processed in chunks so the per-step inputs stay small.
pub fn profile_controls(dims: &GameDims, x0: &[f64], policies: &[PlayerPolicy], noise: &NoiseBatch) -> Result<ControlPaths> {
    const CHUNK: usize = 4096;
    if policies.len() != dims.n_players {
        return Err(invalid("policies", format!("expected {} policies", dims.n_players)));
    }
    let k = dims.control_dim;
    let m = noise.n_paths();
    let mut out = ControlPaths::zeros(m, dims.n_steps, dims.controls_width());
    let mut start = 0;
    while start < m {
        let end = (start + CHUNK).min(m);
        let idx: Vec<usize> = (start..end).collect();
        let chunk = noise.select_paths(&idx);
        let mut by_encoding: Vec<(InputEncoding, PolicyInputs)> = Vec::new();
        for (i, policy) in policies.iter().enumerate() {
            let enc = policy.spec.input_encoding;
            if !by_encoding.iter().any(|(e, _)| *e == enc) {
                by_encoding.push((enc, PolicyInputs::build(dims, x0, &chunk, enc)?));
            }
            let inputs = &by_encoding.iter().find(|(e, _)| *e == enc).expect("inserted above").1;
            let controls = evaluate_controls(policy, inputs)?;
            for (r, path) in (start..end).enumerate() {
                for step in 0..dims.n_steps {
                    out.at_mut(path, step)[i * k..(i + 1) * k].copy_from_slice(controls.at(r, step));
                }
            }
        }
        start = end;
    }
    Ok(out)
}
