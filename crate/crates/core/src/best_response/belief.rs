use serde::{Deserialize, Serialize};

use crate::error::{invalid, DfpError, Result};

/// Values on a `(path, step, column)` grid, stored path-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PathArray {
    n_paths: usize,
    n_steps: usize,
    width: usize,
    values: Vec<f64>,
}

/// Controls, `(path, step, player * k + component)`.
pub type ControlPaths = PathArray;
/// States, `(path, step 0..=N_T, player * d + component)`.
pub type StatePaths = PathArray;

impl PathArray {
    pub fn zeros(n_paths: usize, n_steps: usize, width: usize) -> Self {
        Self {
            n_paths,
            n_steps,
            width,
            values: vec![0.0; n_paths * n_steps * width],
        }
    }

    pub fn filled(n_paths: usize, n_steps: usize, width: usize, value: f64) -> Self {
        Self {
            n_paths,
            n_steps,
            width,
            values: vec![value; n_paths * n_steps * width],
        }
    }

    pub fn from_values(n_paths: usize, n_steps: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n_paths * n_steps * width {
            return Err(invalid("values", "length does not match the path grid"));
        }
        Ok(Self {
            n_paths,
            n_steps,
            width,
            values,
        })
    }

    pub fn n_paths(&self) -> usize {
        self.n_paths
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn at(&self, path: usize, step: usize) -> &[f64] {
        let start = (path * self.n_steps + step) * self.width;
        &self.values[start..start + self.width]
    }

    pub fn at_mut(&mut self, path: usize, step: usize) -> &mut [f64] {
        let start = (path * self.n_steps + step) * self.width;
        &mut self.values[start..start + self.width]
    }

    pub fn get(&self, path: usize, step: usize, column: usize) -> f64 {
        self.at(path, step)[column]
    }

    /// Copies `other` into columns `offset..offset + other.width()`.
    pub fn set_columns(&mut self, offset: usize, other: &PathArray) -> Result<()> {
        if other.n_paths != self.n_paths || other.n_steps != self.n_steps || offset + other.width > self.width {
            return Err(DfpError::BatchMismatch("column block does not fit".into()));
        }
        for p in 0..self.n_paths {
            for s in 0..self.n_steps {
                self.at_mut(p, s)[offset..offset + other.width].copy_from_slice(other.at(p, s));
            }
        }
        Ok(())
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    fn check_same_grid(&self, other: &PathArray) -> Result<()> {
        if (self.n_paths, self.n_steps, self.width) != (other.n_paths, other.n_steps, other.width) {
            return Err(DfpError::BatchMismatch(format!(
                "grid {}x{}x{} vs {}x{}x{}",
                self.n_paths, self.n_steps, self.width, other.n_paths, other.n_steps, other.width
            )));
        }
        Ok(())
    }
}

/// How past stages are combined into the beliefs of the next one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum AggregationMode {
    /// Opponents play what they played at the previous stage.
    #[default]
    LastIterate,
    /// Arithmetic mean of the play of stages `1..=n`.
    UniformAverage,
    /// `sum_k c_k alpha^k / sum_k c_k` over stages `1..=n`; `weights[k - 1] = c_k`.
    Weighted { weights: Vec<f64> },
}

impl AggregationMode {
    pub fn validate(&self, max_stages: usize) -> Result<()> {
        if let AggregationMode::Weighted { weights } = self {
            if weights.len() < max_stages {
                return Err(invalid("aggregation.weights", "need one weight per stage"));
            }
            if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
                return Err(invalid("aggregation.weights", "weights must be positive"));
            }
        }
        Ok(())
    }
}

/// Materialized controls of every player on one noise batch.
#[derive(Debug, Clone, PartialEq)]
pub struct BeliefProfile {
    stage: usize,
    n_players: usize,
    control_dim: usize,
    controls: ControlPaths,
}

impl BeliefProfile {
    pub fn new(stage: usize, n_players: usize, control_dim: usize, controls: ControlPaths) -> Result<Self> {
        if controls.width() != n_players * control_dim {
            return Err(DfpError::BatchMismatch(format!(
                "belief width {} does not match {} players x {} controls",
                controls.width(),
                n_players,
                control_dim
            )));
        }
        if !controls.all_finite() {
            return Err(invalid("beliefs", "controls must be finite"));
        }
        Ok(Self {
            stage,
            n_players,
            control_dim,
            controls,
        })
    }

    /// The initial belief: player `i` plays the constant `values[i]` everywhere.
    pub fn constant(n_paths: usize, n_steps: usize, control_dim: usize, values: &[f64]) -> Result<Self> {
        let n = values.len();
        let mut controls = ControlPaths::zeros(n_paths, n_steps, n * control_dim);
        for p in 0..n_paths {
            for s in 0..n_steps {
                let row = controls.at_mut(p, s);
                for (i, v) in values.iter().enumerate() {
                    row[i * control_dim..(i + 1) * control_dim].fill(*v);
                }
            }
        }
        Self::new(0, n, control_dim, controls)
    }

    pub fn stage(&self) -> usize {
        self.stage
    }

    pub fn n_players(&self) -> usize {
        self.n_players
    }

    pub fn control_dim(&self) -> usize {
        self.control_dim
    }

    pub fn n_paths(&self) -> usize {
        self.controls.n_paths()
    }

    pub fn n_steps(&self) -> usize {
        self.controls.n_steps()
    }

    pub fn controls(&self) -> &ControlPaths {
        &self.controls
    }

    /// Control of `player` on `path` at `step`, component 0.
    pub fn get(&self, player: usize, path: usize, step: usize) -> f64 {
        self.controls.get(path, step, player * self.control_dim)
    }
}

/// Accumulates per-stage play and produces aggregated beliefs.
#[derive(Debug, Clone)]
pub struct BeliefHistory {
    mode: AggregationMode,
    weighted_sum: Option<ControlPaths>,
    total_weight: f64,
    stages: usize,
}

impl BeliefHistory {
    pub fn new(mode: AggregationMode) -> Self {
        Self {
            mode,
            weighted_sum: None,
            total_weight: 0.0,
            stages: 0,
        }
    }

    pub fn mode(&self) -> &AggregationMode {
        &self.mode
    }

    /// Records the play of stage `stage` (1-based) and returns the beliefs
    /// for the following stage.
    pub fn push(&mut self, stage: usize, n_players: usize, control_dim: usize, play: ControlPaths) -> Result<BeliefProfile> {
        if stage != self.stages + 1 {
            return Err(invalid("stage", format!("expected stage {}, got {stage}", self.stages + 1)));
        }
        self.stages = stage;
        let weight = match &self.mode {
            AggregationMode::LastIterate => return BeliefProfile::new(stage, n_players, control_dim, play),
            AggregationMode::UniformAverage => 1.0,
            AggregationMode::Weighted { weights } => *weights
                .get(stage - 1)
                .ok_or_else(|| invalid("aggregation.weights", format!("no weight for stage {stage}")))?,
        };
        match &mut self.weighted_sum {
            None => {
                let mut sum = play;
                sum.values.iter_mut().for_each(|v| *v *= weight);
                self.weighted_sum = Some(sum);
            }
            Some(sum) => {
                sum.check_same_grid(&play)?;
                for (s, v) in sum.values.iter_mut().zip(&play.values) {
                    *s += weight * v;
                }
            }
        }
        self.total_weight += weight;
        let mut avg = self.weighted_sum.clone().expect("set above");
        let inv = 1.0 / self.total_weight;
        avg.values.iter_mut().for_each(|v| *v *= inv);
        BeliefProfile::new(stage, n_players, control_dim, avg)
    }
}
