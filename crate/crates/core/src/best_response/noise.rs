use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Result};
use crate::game_model::GameDims;

/// Brownian increments for a batch of paths, laid out as
/// `(path, step, source, component)` where source 0 is the common noise
/// and source `1 + l` belongs to player `l`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseBatch {
    n_paths: usize,
    n_steps: usize,
    n_sources: usize,
    noise_dim: usize,
    step_size: f64,
    seed: u64,
    increments: Vec<f64>,
}

impl NoiseBatch {
    /// Draws `N(0, h)` increments from a ChaCha8 stream seeded with `seed`.
    pub fn sample(dims: &GameDims, n_paths: usize, seed: u64) -> Self {
        let h = dims.step_size();
        let sd = h.sqrt();
        let len = n_paths * dims.n_steps * dims.n_sources() * dims.noise_dim;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let increments = (0..len)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                sd * z
            })
            .collect();
        Self {
            n_paths,
            n_steps: dims.n_steps,
            n_sources: dims.n_sources(),
            noise_dim: dims.noise_dim,
            step_size: h,
            seed,
            increments,
        }
    }

    pub fn zeros(dims: &GameDims, n_paths: usize) -> Self {
        Self {
            n_paths,
            n_steps: dims.n_steps,
            n_sources: dims.n_sources(),
            noise_dim: dims.noise_dim,
            step_size: dims.step_size(),
            seed: 0,
            increments: vec![0.0; n_paths * dims.n_steps * dims.n_sources() * dims.noise_dim],
        }
    }

    /// Wraps explicit increments in `(path, step, source, component)` order.
    pub fn from_increments(dims: &GameDims, n_paths: usize, increments: Vec<f64>) -> Result<Self> {
        let expected = n_paths * dims.n_steps * dims.n_sources() * dims.noise_dim;
        if increments.len() != expected {
            return Err(invalid("increments", format!("expected {expected} values, got {}", increments.len())));
        }
        Ok(Self {
            increments,
            ..Self::zeros(dims, n_paths)
        })
    }

    pub fn n_paths(&self) -> usize {
        self.n_paths
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn n_sources(&self) -> usize {
        self.n_sources
    }

    pub fn noise_dim(&self) -> usize {
        self.noise_dim
    }

    pub fn step_size(&self) -> f64 {
        self.step_size
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn increments(&self) -> &[f64] {
        &self.increments
    }

    fn block(&self) -> usize {
        self.n_sources * self.noise_dim
    }

    /// Increments of every source over step `step` of `path`.
    pub fn increments_at(&self, path: usize, step: usize) -> &[f64] {
        let b = self.block();
        let start = (path * self.n_steps + step) * b;
        &self.increments[start..start + b]
    }

    pub fn increment(&self, path: usize, step: usize, source: usize, component: usize) -> f64 {
        self.increments_at(path, step)[source * self.noise_dim + component]
    }

    /// `W_{step h}` for every source of `path`; `W_0 = 0`.
    pub fn cumulative(&self, path: usize, step: usize) -> Vec<f64> {
        let mut w = vec![0.0; self.block()];
        for j in 0..step {
            for (acc, d) in w.iter_mut().zip(self.increments_at(path, j)) {
                *acc += d;
            }
        }
        w
    }

    /// A batch holding only the listed paths, in the given order.
    pub fn select_paths(&self, paths: &[usize]) -> NoiseBatch {
        let per_path = self.n_steps * self.block();
        let mut increments = Vec::with_capacity(paths.len() * per_path);
        for &p in paths {
            increments.extend_from_slice(&self.increments[p * per_path..(p + 1) * per_path]);
        }
        NoiseBatch {
            n_paths: paths.len(),
            increments,
            ..self.clone_header()
        }
    }

    fn clone_header(&self) -> NoiseBatch {
        NoiseBatch {
            n_paths: 0,
            n_steps: self.n_steps,
            n_sources: self.n_sources,
            noise_dim: self.noise_dim,
            step_size: self.step_size,
            seed: self.seed,
            increments: Vec::new(),
        }
    }
}
