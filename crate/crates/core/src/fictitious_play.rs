//! The stage loop: every player best-responds to the same frozen beliefs,
//! the beliefs are refreshed from the new play, and the loop stops once
//! realized costs stop moving.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize, Serializer};

use crate::best_response::{
    evaluate_controls, mc_cost, simulate_profile, train_best_response, AggregationMode, BeliefHistory, BeliefProfile, ControlPaths,
    EpochRecord, NoiseBatch, ProfileOutcome, RolloutData, TrainConfig,
};
use crate::diffgraph::AdamState;
use crate::error::{invalid, DfpError, Result};
use crate::game_model::{GameDefinition, GameDims};
use crate::policy::{init_policy, profile_controls, InputEncoding, Mode, PlayerPolicy, PolicyInputs, SubnetSpec};
use crate::seeds::{derive_seed, StreamRole};

/// Largest cost change between evaluation passes treated as no change.
const EVAL_STATIONARY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub max_stages: usize,
    /// Stop once the relative cost change falls below this.
    pub err_threshold: f64,
    /// Training paths.
    pub n_paths: usize,
    /// Fresh paths for the final evaluation.
    pub n_eval_paths: usize,
    pub aggregation: AggregationMode,
    pub seed: u64,
    pub train: TrainConfig,
    pub policy: SubnetSpec,
    /// Constant control each player is believed to play before stage 1;
    /// empty means zero for everyone.
    pub initial_belief: Vec<f64>,
    /// Draw new training paths at every stage instead of reusing one batch.
    pub fresh_noise_per_stage: bool,
    /// Worker threads for per-player training; 0 uses every core.
    pub jobs: usize,
    /// Order in which training jobs are submitted within a stage.
    pub player_order: Option<Vec<usize>>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            max_stages: 10,
            err_threshold: 1e-4,
            n_paths: 4096,
            n_eval_paths: 10_000,
            aggregation: AggregationMode::LastIterate,
            seed: 0,
            train: TrainConfig::default(),
            policy: SubnetSpec::default(),
            initial_belief: Vec::new(),
            fresh_noise_per_stage: false,
            jobs: 0,
            player_order: None,
        }
    }
}

impl RunConfig {
    pub fn validate(&self, dims: &GameDims) -> Result<()> {
        dims.validate()?;
        if self.max_stages == 0 {
            return Err(invalid("run.max_stages", "must be at least 1"));
        }
        if !(self.err_threshold > 0.0) {
            return Err(invalid("run.err_threshold", "must be positive"));
        }
        if self.n_paths == 0 || self.n_eval_paths == 0 {
            return Err(invalid("run.n_paths", "path counts must be at least 1"));
        }
        self.aggregation.validate(self.max_stages)?;
        if self.fresh_noise_per_stage && self.aggregation != AggregationMode::LastIterate {
            return Err(invalid(
                "run.fresh_noise_per_stage",
                "averaged beliefs need every past stage on one batch; use last_iterate",
            ));
        }
        self.train.validate(self.n_paths)?;
        self.policy.validate()?;
        if self.policy.output_dim != dims.control_dim {
            return Err(invalid("policy.output_dim", "must equal the control dimension"));
        }
        if !self.initial_belief.is_empty() && self.initial_belief.len() != dims.n_players {
            return Err(invalid("run.initial_belief", "need one value per player"));
        }
        if let Some(order) = &self.player_order {
            let mut sorted = order.clone();
            sorted.sort_unstable();
            if sorted != (0..dims.n_players).collect::<Vec<_>>() {
                return Err(invalid("run.player_order", "must be a permutation of the players"));
            }
        }
        Ok(())
    }

    fn initial_values(&self, n: usize) -> Vec<f64> {
        if self.initial_belief.is_empty() {
            vec![0.0; n]
        } else {
            self.initial_belief.clone()
        }
    }
}

fn finite_or_null<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else {
        s.serialize_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageReport {
    pub stage: usize,
    /// Each player's cost against the beliefs of the previous stage.
    pub costs: Vec<f64>,
    /// Largest relative cost change; infinite at stage 1.
    #[serde(serialize_with = "finite_or_null")]
    pub err: f64,
    pub epochs_run: Vec<usize>,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Converged,
    MaxStages,
}

impl StopReason {
    pub fn as_str(self) -> &'static str {
        match self {
            StopReason::Converged => "converged",
            StopReason::MaxStages => "max stages",
        }
    }
}

/// Mutable state carried from one stage to the next.
pub struct FpState {
    pub policies: Vec<PlayerPolicy>,
    adam: Vec<AdamState>,
    history: BeliefHistory,
    pub beliefs: BeliefProfile,
    pub noise: NoiseBatch,
    inputs: Vec<(InputEncoding, PolicyInputs)>,
    prev_costs: Option<Vec<f64>>,
    stage: usize,
}

pub fn training_noise(dims: &GameDims, cfg: &RunConfig, stage: usize) -> NoiseBatch {
    let stage_key = if cfg.fresh_noise_per_stage { stage as u64 } else { 0 };
    NoiseBatch::sample(dims, cfg.n_paths, derive_seed(cfg.seed, StreamRole::TrainingNoise, stage_key, 0))
}

pub fn evaluation_noise(dims: &GameDims, cfg: &RunConfig) -> NoiseBatch {
    NoiseBatch::sample(dims, cfg.n_eval_paths, derive_seed(cfg.seed, StreamRole::EvaluationNoise, 0, 0))
}

fn build_inputs(game: &dyn GameDefinition, noise: &NoiseBatch, policies: &[PlayerPolicy]) -> Result<Vec<(InputEncoding, PolicyInputs)>> {
    let mut out: Vec<(InputEncoding, PolicyInputs)> = Vec::new();
    for p in policies {
        let enc = p.spec().input_encoding;
        if !out.iter().any(|(e, _)| *e == enc) {
            out.push((enc, PolicyInputs::build(game.dims(), game.initial_states(), noise, enc)?));
        }
    }
    Ok(out)
}

fn inputs_for(inputs: &[(InputEncoding, PolicyInputs)], enc: InputEncoding) -> &PolicyInputs {
    &inputs.iter().find(|(e, _)| *e == enc).expect("inputs built for every encoding").1
}

impl FpState {
    /// Freshly initialized policies and the initial constant belief.
    pub fn new(game: &dyn GameDefinition, cfg: &RunConfig) -> Result<Self> {
        let dims = game.dims();
        cfg.validate(dims)?;
        let n = dims.n_players;
        let policies = (0..n)
            .map(|i| init_policy(cfg.policy, dims, i, cfg.seed))
            .collect::<Result<Vec<_>>>()?;
        Self::with_policies(game, cfg, policies)
    }

    /// Starts from the given policies; stage 1 still trains against the
    /// initial constant belief.
    pub fn with_policies(game: &dyn GameDefinition, cfg: &RunConfig, policies: Vec<PlayerPolicy>) -> Result<Self> {
        let dims = game.dims();
        cfg.validate(dims)?;
        if policies.len() != dims.n_players {
            return Err(invalid("policies", format!("expected {} policies", dims.n_players)));
        }
        let noise = training_noise(dims, cfg, 1);
        let beliefs = BeliefProfile::constant(cfg.n_paths, dims.n_steps, dims.control_dim, &cfg.initial_values(dims.n_players))?;
        let inputs = build_inputs(game, &noise, &policies)?;
        Ok(Self {
            adam: vec![AdamState::new(); policies.len()],
            policies,
            history: BeliefHistory::new(cfg.aggregation.clone()),
            beliefs,
            noise,
            inputs,
            prev_costs: None,
            stage: 0,
        })
    }

    /// Replaces the beliefs entering the next stage.
    pub fn set_beliefs(&mut self, beliefs: BeliefProfile) -> Result<()> {
        if beliefs.n_paths() != self.noise.n_paths() || beliefs.n_steps() != self.noise.n_steps() {
            return Err(DfpError::BatchMismatch("beliefs must live on the training batch".into()));
        }
        self.beliefs = beliefs;
        Ok(())
    }

    pub fn stage(&self) -> usize {
        self.stage
    }
}

struct PlayerResult {
    policy: PlayerPolicy,
    adam: AdamState,
    cost: f64,
    controls: ControlPaths,
    history: Vec<EpochRecord>,
    epochs_run: usize,
}

fn build_pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| invalid("jobs", e.to_string()))
}

/// `max_i |J_i - J'_i| / |J'_i|`.
pub fn relative_change(current: &[f64], previous: &[f64]) -> f64 {
    current
        .iter()
        .zip(previous)
        .map(|(c, p)| (c - p).abs() / p.abs())
        .fold(0.0, f64::max)
}

/// Plays one stage: all players train simultaneously against
/// `state.beliefs`, then the beliefs are refreshed from the new play.
/// Returns the stage report and the epoch records of every player.
pub fn run_stage(game: &dyn GameDefinition, state: &mut FpState, cfg: &RunConfig, pool: &rayon::ThreadPool) -> Result<(StageReport, Vec<EpochRecord>)> {
    let started = Instant::now();
    let stage = state.stage + 1;
    let dims = game.dims();
    let n = dims.n_players;

    if cfg.fresh_noise_per_stage && stage > 1 {
        state.noise = training_noise(dims, cfg, stage);
        state.inputs = build_inputs(game, &state.noise, &state.policies)?;
        let controls = profile_controls(dims, game.initial_states(), &state.policies, &state.noise)?;
        state.beliefs = BeliefProfile::new(stage - 1, n, dims.control_dim, controls)?;
    }

    let order: Vec<usize> = cfg.player_order.clone().unwrap_or_else(|| (0..n).collect());
    let inputs = &state.inputs;
    let mut jobs: Vec<(usize, PlayerPolicy, AdamState)> = order
        .iter()
        .map(|&i| (i, state.policies[i].clone(), state.adam[i].clone()))
        .collect();
    let noise = &state.noise;
    let datas = inputs
        .iter()
        .map(|(e, pi)| Ok((*e, RolloutData::new(game, noise, Some(pi.clone()), &state.beliefs)?)))
        .collect::<Result<Vec<_>>>()?;
    let results: Vec<(usize, Result<PlayerResult>)> = pool.install(|| {
        jobs.par_iter_mut()
            .map(|(i, policy, adam)| {
                let i = *i;
                let mut run = || -> Result<PlayerResult> {
                    let enc = policy.spec().input_encoding;
                    let own_inputs = inputs_for(inputs, enc);
                    let data = &datas.iter().find(|(e, _)| *e == enc).expect("data built for every encoding").1;
                    let outcome = train_best_response(game, data, i, policy, adam, &cfg.train, cfg.seed, stage)?;
                    let cost = mc_cost(game, data, i, policy, Mode::Eval)?;
                    let controls = evaluate_controls(policy, own_inputs)?;
                    Ok(PlayerResult {
                        policy: policy.clone(),
                        adam: adam.clone(),
                        cost,
                        controls,
                        history: outcome.history,
                        epochs_run: outcome.epochs_run,
                    })
                };
                (i, run())
            })
            .collect()
    });

    let mut by_player: Vec<Option<PlayerResult>> = (0..n).map(|_| None).collect();
    let mut failures: Vec<(usize, DfpError)> = Vec::new();
    for (i, r) in results {
        match r {
            Ok(res) => by_player[i] = Some(res),
            Err(e) => failures.push((i, e)),
        }
    }
    if let Some((player, source)) = failures.into_iter().min_by_key(|(i, _)| *i) {
        return Err(DfpError::PlayerFailed {
            stage,
            player,
            source: Box::new(source),
        });
    }

    let k = dims.control_dim;
    let mut play = ControlPaths::zeros(noise.n_paths(), dims.n_steps, n * k);
    let mut costs = Vec::with_capacity(n);
    let mut epochs_run = Vec::with_capacity(n);
    let mut history = Vec::new();
    for (i, res) in by_player.into_iter().enumerate() {
        let res = res.expect("every player reported");
        play.set_columns(i * k, &res.controls)?;
        costs.push(res.cost);
        epochs_run.push(res.epochs_run);
        history.extend(res.history);
        state.policies[i] = res.policy;
        state.adam[i] = res.adam;
    }
    state.beliefs = state.history.push(stage, n, k, play)?;
    let err = match &state.prev_costs {
        None => f64::INFINITY,
        Some(prev) => relative_change(&costs, prev),
    };
    if costs.iter().any(|c| !c.is_finite()) {
        return Err(DfpError::Diverged {
            player: costs.iter().position(|c| !c.is_finite()).unwrap_or(0),
            cost: f64::NAN,
            initial: f64::NAN,
        });
    }
    state.prev_costs = Some(costs.clone());
    state.stage = stage;
    let report = StageReport {
        stage,
        costs,
        err,
        epochs_run,
        wall_time_s: started.elapsed().as_secs_f64(),
    };
    log::info!("stage {stage}: err = {:e}, costs = {:?}", report.err, report.costs);
    Ok((report, history))
}

pub struct RunArtifact {
    pub policies: Vec<PlayerPolicy>,
    pub reports: Vec<StageReport>,
    pub stop_reason: StopReason,
    pub history: Vec<EpochRecord>,
    /// Beliefs that would enter the next stage.
    pub beliefs: BeliefProfile,
}

pub fn run(game: &dyn GameDefinition, cfg: &RunConfig) -> Result<RunArtifact> {
    run_with(game, cfg, |_, _| Ok(()))
}

/// [`run`] with a callback after every stage, e.g. to stream reports.
pub fn run_with<F>(game: &dyn GameDefinition, cfg: &RunConfig, mut on_stage: F) -> Result<RunArtifact>
where
    F: FnMut(&StageReport, &[EpochRecord]) -> Result<()>,
{
    let mut state = FpState::new(game, cfg)?;
    let pool = build_pool(cfg.jobs)?;
    let mut reports = Vec::new();
    let mut history = Vec::new();
    let stop_reason = loop {
        let (report, records) = run_stage(game, &mut state, cfg, &pool)?;
        on_stage(&report, &records)?;
        let stage = report.stage;
        let converged = report.err < cfg.err_threshold;
        reports.push(report);
        history.extend(records);
        if converged {
            break StopReason::Converged;
        }
        if stage >= cfg.max_stages {
            break StopReason::MaxStages;
        }
    };
    Ok(RunArtifact {
        policies: state.policies,
        reports,
        stop_reason,
        history,
        beliefs: state.beliefs,
    })
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub costs: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub controls: ControlPaths,
    pub outcome: ProfileOutcome,
    pub passes: usize,
    pub noise_seed: u64,
}

/// Every player's cost when all follow their trained policies on
/// `cfg.n_eval_paths` fresh paths. The evaluation is repeated until the
/// costs stop changing; with open-loop policies this must happen on the
/// second pass.
pub fn evaluate_out_of_sample(game: &dyn GameDefinition, policies: &[PlayerPolicy], cfg: &RunConfig) -> Result<Evaluation> {
    let noise = evaluation_noise(game.dims(), cfg);
    evaluate_on(game, policies, &noise)
}

pub fn evaluate_on(game: &dyn GameDefinition, policies: &[PlayerPolicy], noise: &NoiseBatch) -> Result<Evaluation> {
    let dims = game.dims();
    let mut previous: Option<Vec<f64>> = None;
    let mut pass = 0;
    loop {
        pass += 1;
        let controls = profile_controls(dims, game.initial_states(), policies, noise)?;
        let beliefs = BeliefProfile::new(0, dims.n_players, dims.control_dim, controls.clone())?;
        let data = RolloutData::new(game, noise, None, &beliefs)?;
        let outcome = simulate_profile(game, &data)?;
        let costs = outcome.mean_costs();
        if let Some(prev) = &previous {
            let change = costs.iter().zip(prev).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            if change <= EVAL_STATIONARY_TOL {
                return Ok(Evaluation {
                    std_errors: outcome.std_errors(),
                    costs,
                    controls,
                    outcome,
                    passes: pass,
                    noise_seed: noise.seed(),
                });
            }
            return Err(DfpError::EvaluationNotStationary { passes: pass, change });
        }
        previous = Some(costs);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relative_change_arithmetic() {
        assert_eq!(relative_change(&[11.0, 20.0], &[10.0, 20.0]), 0.1);
        assert_eq!(relative_change(&[3.0, 4.0], &[3.0, 4.0]), 0.0);
    }

    #[test]
    fn infinite_err_serializes_as_null() {
        let r = StageReport {
            stage: 1,
            costs: vec![1.0],
            err: f64::INFINITY,
            epochs_run: vec![3],
            wall_time_s: 0.5,
        };
        let json = serde_json::to_string(&r).unwrap();
        assert!(json.contains("\"err\":null"));
    }

    #[test]
    fn config_validation() {
        let dims = crate::game_model::LqParams::benchmark(vec![0.0; 2], 5).dims;
        let mut cfg = RunConfig {
            n_paths: 64,
            ..RunConfig::default()
        };
        cfg.train.minibatch = 16;
        cfg.validate(&dims).unwrap();
        cfg.player_order = Some(vec![0, 0]);
        assert!(cfg.validate(&dims).is_err());
        cfg.player_order = None;
        cfg.train.minibatch = 60;
        assert!(cfg.validate(&dims).is_err());
        cfg.train.minibatch = 16;
        cfg.err_threshold = 0.0;
        assert!(cfg.validate(&dims).is_err());
    }
}
