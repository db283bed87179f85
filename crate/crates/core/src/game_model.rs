//! Open-loop N-player game definitions and the linear-quadratic
//! inter-bank lending instance used throughout the crate.
//!
//! A game is described by per-player callbacks that record their
//! computation on a [`Tape`], so the best-response trainer can
//! differentiate the whole Euler rollout while treating the opponents'
//! controls as frozen data.

use serde::{Deserialize, Serialize};

use crate::diffgraph::{NodeId, Tape, Tensor};
use crate::error::{invalid, Result};

/// Dimensions of a game and of its time grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameDims {
    pub n_players: usize,
    pub state_dim: usize,
    pub control_dim: usize,
    pub noise_dim: usize,
    pub horizon: f64,
    pub n_steps: usize,
}

impl GameDims {
    pub fn validate(&self) -> Result<()> {
        for (field, v) in [
            ("dims.n_players", self.n_players),
            ("dims.state_dim", self.state_dim),
            ("dims.control_dim", self.control_dim),
            ("dims.noise_dim", self.noise_dim),
            ("dims.n_steps", self.n_steps),
        ] {
            if v == 0 {
                return Err(invalid(field, "must be at least 1"));
            }
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(invalid("dims.horizon", "must be positive and finite"));
        }
        Ok(())
    }

    /// Time step `h = T / N_T`.
    pub fn step_size(&self) -> f64 {
        self.horizon / self.n_steps as f64
    }

    pub fn time(&self, step: usize) -> f64 {
        step as f64 * self.step_size()
    }

    /// Number of Brownian sources: one per player plus the common noise.
    pub fn n_sources(&self) -> usize {
        self.n_players + 1
    }

    pub fn states_width(&self) -> usize {
        self.n_players * self.state_dim
    }

    pub fn controls_width(&self) -> usize {
        self.n_players * self.control_dim
    }
}

/// Scalar parameters of the linear-quadratic game.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LqParams {
    pub a: f64,
    pub q: f64,
    pub epsilon: f64,
    pub c: f64,
    pub sigma: f64,
    pub rho: f64,
    pub dims: GameDims,
    pub x0: Vec<f64>,
}

impl LqParams {
    /// Reference coefficients
    /// (`T = σ = a = ε = c = 1`, `q = ρ = 0`) with the given players and grid.
    pub fn benchmark(x0: Vec<f64>, n_steps: usize) -> Self {
        let n = x0.len();
        Self {
            a: 1.0,
            q: 0.0,
            epsilon: 1.0,
            c: 1.0,
            sigma: 1.0,
            rho: 0.0,
            dims: GameDims {
                n_players: n,
                state_dim: 1,
                control_dim: 1,
                noise_dim: 1,
                horizon: 1.0,
                n_steps,
            },
            x0,
        }
    }

    /// Benchmark coefficients with the initial states of the 5-, 10- and
    /// 24-player examples; other sizes get `x0 = 0.5 i`.
    pub fn benchmark_players(n: usize, n_steps: usize) -> Self {
        let x0 = match n {
            5 => vec![1.0, 5.0, 7.0, 3.0, 8.0],
            10 => (0..10).map(|i| 0.5 + 0.05 * i as f64).collect(),
            _ => (1..=n).map(|i| 0.5 * i as f64).collect(),
        };
        Self::benchmark(x0, n_steps)
    }

    pub fn n(&self) -> usize {
        self.dims.n_players
    }

    pub fn validate(&self) -> Result<()> {
        self.dims.validate()?;
        if self.dims.state_dim != 1 || self.dims.control_dim != 1 || self.dims.noise_dim != 1 {
            return Err(invalid("dims", "the LQ game is scalar: state_dim = control_dim = noise_dim = 1"));
        }
        for (field, v) in [("a", self.a), ("q", self.q), ("epsilon", self.epsilon), ("c", self.c)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(invalid(field, "must be non-negative and finite"));
            }
        }
        if self.q * self.q > self.epsilon {
            return Err(invalid("q", format!("q^2 = {} exceeds epsilon = {}", self.q * self.q, self.epsilon)));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(invalid("sigma", "must be positive"));
        }
        if !(self.rho.abs() <= 1.0) {
            return Err(invalid("rho", "must lie in [-1, 1]"));
        }
        if self.x0.len() != self.dims.n_players {
            return Err(invalid(
                "x0",
                format!("expected {} initial states, got {}", self.dims.n_players, self.x0.len()),
            ));
        }
        if self.x0.iter().any(|v| !v.is_finite()) {
            return Err(invalid("x0", "initial states must be finite"));
        }
        Ok(())
    }

    pub fn mean_x0(&self) -> f64 {
        self.x0.iter().sum::<f64>() / self.x0.len() as f64
    }
}

/// An N-player open-loop stochastic differential game.
///
/// States are `[rows, N*d]` matrices (player-major), controls `[rows, N*k]`.
/// Every callback must be a pure function of its arguments.
pub trait GameDefinition: Send + Sync {
    fn dims(&self) -> &GameDims;

    /// Initial states, `N*d` values.
    fn initial_states(&self) -> &[f64];

    /// Drift of every player's state, `[rows, N*d]`.
    fn drift(&self, tape: &mut Tape, t: f64, states: NodeId, controls: NodeId) -> Result<NodeId>;

    /// Loadings of each player's own Brownian motion, `[rows, N*d*m]` laid
    /// out as (player, state component, noise component).
    fn idiosyncratic_diffusion(&self, tape: &mut Tape, t: f64, states: NodeId, controls: NodeId) -> Result<NodeId>;

    /// Loadings of the common Brownian motion, same layout as
    /// [`GameDefinition::idiosyncratic_diffusion`].
    fn common_diffusion(&self, tape: &mut Tape, t: f64, states: NodeId, controls: NodeId) -> Result<NodeId>;

    /// Running cost of `player`, `[rows, 1]`.
    fn running_cost(&self, tape: &mut Tape, t: f64, states: NodeId, controls: NodeId, player: usize) -> Result<NodeId>;

    /// Terminal cost of `player`, `[rows, 1]`.
    fn terminal_cost(&self, tape: &mut Tape, states: NodeId, player: usize) -> Result<NodeId>;

    /// Drift at a single point.
    fn eval_drift(&self, t: f64, states: &[f64], controls: &[f64]) -> Result<Vec<f64>> {
        let mut tape = Tape::new();
        let (x, a) = point_inputs(&mut tape, states, controls)?;
        let out = self.drift(&mut tape, t, x, a)?;
        Ok(tape.value(out).values().to_vec())
    }

    fn eval_idiosyncratic_diffusion(&self, t: f64, states: &[f64], controls: &[f64]) -> Result<Vec<f64>> {
        let mut tape = Tape::new();
        let (x, a) = point_inputs(&mut tape, states, controls)?;
        let out = self.idiosyncratic_diffusion(&mut tape, t, x, a)?;
        Ok(tape.value(out).values().to_vec())
    }

    fn eval_common_diffusion(&self, t: f64, states: &[f64], controls: &[f64]) -> Result<Vec<f64>> {
        let mut tape = Tape::new();
        let (x, a) = point_inputs(&mut tape, states, controls)?;
        let out = self.common_diffusion(&mut tape, t, x, a)?;
        Ok(tape.value(out).values().to_vec())
    }

    fn eval_running_cost(&self, t: f64, states: &[f64], controls: &[f64], player: usize) -> Result<f64> {
        let mut tape = Tape::new();
        let (x, a) = point_inputs(&mut tape, states, controls)?;
        let out = self.running_cost(&mut tape, t, x, a, player)?;
        Ok(tape.value(out).item())
    }

    fn eval_terminal_cost(&self, states: &[f64], player: usize) -> Result<f64> {
        let mut tape = Tape::new();
        let x = tape.input(Tensor::matrix(1, states.len(), states.to_vec())?);
        let out = self.terminal_cost(&mut tape, x, player)?;
        Ok(tape.value(out).item())
    }
}

fn point_inputs(tape: &mut Tape, states: &[f64], controls: &[f64]) -> Result<(NodeId, NodeId)> {
    let x = tape.input(Tensor::matrix(1, states.len(), states.to_vec())?);
    let a = tape.input(Tensor::matrix(1, controls.len(), controls.to_vec())?);
    Ok((x, a))
}

/// The linear-quadratic game: players mean-revert toward the empirical
/// average and pay for control effort and for distance from the average.
#[derive(Debug, Clone)]
pub struct LqGame {
    params: LqParams,
    /// `P[j][l] = 1/N - delta_{jl}`, so `X P` is the matrix of `x_bar - x^l`.
    deviation: Tensor,
    zero_bias: Tensor,
}

/// Builds the LQ game after validating its parameters.
pub fn lq_game(params: LqParams) -> Result<LqGame> {
    params.validate()?;
    let n = params.n();
    let mut p = vec![1.0 / n as f64; n * n];
    for j in 0..n {
        p[j * n + j] -= 1.0;
    }
    Ok(LqGame {
        deviation: Tensor::matrix(n, n, p)?,
        zero_bias: Tensor::zeros(vec![n]),
        params,
    })
}

impl LqGame {
    pub fn params(&self) -> &LqParams {
        &self.params
    }

    /// `x_bar - x^i` for one player, `[rows, 1]`.
    fn own_deviation(&self, tape: &mut Tape, states: NodeId, player: usize) -> Result<NodeId> {
        let n = self.params.n();
        let col: Vec<f64> = (0..n).map(|j| self.deviation.get(j, player)).collect();
        let w = tape.input(Tensor::matrix(n, 1, col)?);
        let b = tape.input(Tensor::zeros(vec![1]));
        tape.affine(states, w, b)
    }

    fn own_control(&self, tape: &mut Tape, controls: NodeId, player: usize) -> Result<NodeId> {
        let n = self.params.n();
        let mut col = vec![0.0; n];
        col[player] = 1.0;
        let w = tape.input(Tensor::matrix(n, 1, col)?);
        let b = tape.input(Tensor::zeros(vec![1]));
        tape.affine(controls, w, b)
    }

    fn constant_loading(&self, tape: &mut Tape, states: NodeId, value: f64) -> NodeId {
        let rows = tape.value(states).rows();
        tape.input(Tensor::filled(vec![rows, self.params.n()], value))
    }
}

impl GameDefinition for LqGame {
    fn dims(&self) -> &GameDims {
        &self.params.dims
    }

    fn initial_states(&self) -> &[f64] {
        &self.params.x0
    }

    fn drift(&self, tape: &mut Tape, _t: f64, states: NodeId, controls: NodeId) -> Result<NodeId> {
        let p = tape.input(self.deviation.clone());
        let b = tape.input(self.zero_bias.clone());
        let dev = tape.affine(states, p, b)?;
        let reversion = tape.scale(dev, self.params.a);
        tape.add(reversion, controls)
    }

    fn idiosyncratic_diffusion(&self, tape: &mut Tape, _t: f64, states: NodeId, _controls: NodeId) -> Result<NodeId> {
        let rho = self.params.rho;
        Ok(self.constant_loading(tape, states, self.params.sigma * (1.0 - rho * rho).sqrt()))
    }

    fn common_diffusion(&self, tape: &mut Tape, _t: f64, states: NodeId, _controls: NodeId) -> Result<NodeId> {
        Ok(self.constant_loading(tape, states, self.params.sigma * self.params.rho))
    }

    fn running_cost(&self, tape: &mut Tape, _t: f64, states: NodeId, controls: NodeId, player: usize) -> Result<NodeId> {
        let dev = self.own_deviation(tape, states, player)?;
        let alpha = self.own_control(tape, controls, player)?;
        let a2 = tape.square(alpha);
        let effort = tape.scale(a2, 0.5);
        let cross = tape.mul(alpha, dev)?;
        let cross = tape.scale(cross, -self.params.q);
        let d2 = tape.square(dev);
        let distance = tape.scale(d2, 0.5 * self.params.epsilon);
        let partial = tape.add(effort, cross)?;
        tape.add(partial, distance)
    }

    fn terminal_cost(&self, tape: &mut Tape, states: NodeId, player: usize) -> Result<NodeId> {
        let dev = self.own_deviation(tape, states, player)?;
        let d2 = tape.square(dev);
        Ok(tape.scale(d2, 0.5 * self.params.c))
    }
}

/// Drift of `x_bar - x^i` when player `i` plays `own_control` and the
/// others' controls sum to `opponent_control_sum`.
pub fn lq_reduced_drift(params: &LqParams, _t: f64, xtilde: f64, own_control: f64, opponent_control_sum: f64) -> f64 {
    let n = params.n() as f64;
    opponent_control_sum / n - (n - 1.0) / n * own_control - params.a * xtilde
}
