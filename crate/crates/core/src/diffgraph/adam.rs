use serde::{Deserialize, Serialize};

use super::params::{ParamKey, ParamSet};
use super::tape::Gradients;
use crate::error::{invalid, DfpError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(invalid("lr", "must be positive"));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(invalid("beta", "moment decay rates must lie in [0, 1)"));
        }
        if !(self.eps > 0.0) {
            return Err(invalid("eps", "must be positive"));
        }
        Ok(())
    }
}

/// First and second moment estimates for every tensor of a list of
/// parameter sets, plus the shared step counter.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AdamState {
    step: u64,
    first: Vec<Vec<Vec<f64>>>,
    second: Vec<Vec<Vec<f64>>>,
}

impl AdamState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    fn ensure(&mut self, key: ParamKey, len: usize) {
        while self.first.len() <= key.set {
            self.first.push(Vec::new());
            self.second.push(Vec::new());
        }
        let (m, v) = (&mut self.first[key.set], &mut self.second[key.set]);
        while m.len() <= key.index {
            m.push(Vec::new());
            v.push(Vec::new());
        }
        if m[key.index].len() != len {
            m[key.index] = vec![0.0; len];
            v[key.index] = vec![0.0; len];
        }
    }
}

/// One bias-corrected Adam update of every trainable tensor that has a
/// gradient. Tensors without a gradient are left untouched.
pub fn adam_step(sets: &mut [ParamSet], grads: &Gradients, state: &mut AdamState, cfg: &AdamConfig) -> Result<()> {
    for (key, g) in grads.iter() {
        if !g.all_finite() {
            let name = sets
                .get(key.set)
                .filter(|s| key.index < s.len())
                .map(|s| format!("set {} / {}", key.set, s.name(key.index)))
                .unwrap_or_else(|| format!("{key:?}"));
            return Err(DfpError::NonFiniteGradient(name));
        }
        let set = sets
            .get(key.set)
            .ok_or_else(|| invalid("gradients", format!("unknown parameter set {}", key.set)))?;
        if key.index >= set.len() || set.tensor(key.index).len() != g.len() {
            return Err(invalid("gradients", format!("gradient {key:?} does not match its parameter")));
        }
    }

    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - cfg.beta1.powi(t);
    let bc2 = 1.0 - cfg.beta2.powi(t);
    for (key, g) in grads.iter() {
        let set = &mut sets[key.set];
        if !set.is_trainable(key.index) {
            continue;
        }
        state.ensure(*key, g.len());
        let m = &mut state.first[key.set][key.index];
        let v = &mut state.second[key.set][key.index];
        let theta = set.tensor_mut(key.index).values_mut();
        for (((p, gi), mi), vi) in theta.iter_mut().zip(g.values()).zip(m.iter_mut()).zip(v.iter_mut()) {
            *mi = cfg.beta1 * *mi + (1.0 - cfg.beta1) * gi;
            *vi = cfg.beta2 * *vi + (1.0 - cfg.beta2) * gi * gi;
            let m_hat = *mi / bc1;
            let v_hat = *vi / bc2;
            *p -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffgraph::{Tape, Tensor};

    fn grads_for(values: Vec<f64>) -> Gradients {
        // d/dw of sum(w * values) is `values`.
        let mut t = Tape::new();
        let n = values.len();
        let w = t.parameter(ParamKey { set: 0, index: 0 }, Tensor::matrix(1, n, vec![0.0; n]).unwrap());
        let x = t.input(Tensor::matrix(1, n, values).unwrap());
        let p = t.mul(w, x).unwrap();
        let s = t.reduce_sum(p);
        t.backward(s).unwrap()
    }

    fn one_set(values: Vec<f64>) -> Vec<ParamSet> {
        let mut s = ParamSet::new();
        let n = values.len();
        s.push("w", Tensor::matrix(1, n, values).unwrap(), true).unwrap();
        vec![s]
    }

    #[test]
    fn zero_gradient_leaves_params_and_counts_step() {
        let mut sets = one_set(vec![0.5, -1.5]);
        let before = sets.clone();
        let mut st = AdamState::new();
        adam_step(&mut sets, &grads_for(vec![0.0, 0.0]), &mut st, &AdamConfig::default()).unwrap();
        assert_eq!(sets, before);
        assert_eq!(st.step(), 1);
    }

    #[test]
    fn first_step_moves_by_lr_against_gradient_sign() {
        // t = 1: m_hat = g, v_hat = g^2, update = -lr * g / (|g| + eps).
        let g = vec![0.3, -2.0, 1e-2];
        let mut sets = one_set(vec![0.0; 3]);
        let cfg = AdamConfig::default();
        adam_step(&mut sets, &grads_for(g.clone()), &mut AdamState::new(), &cfg).unwrap();
        for (p, gi) in sets[0].tensor(0).values().iter().zip(&g) {
            let expected = -cfg.lr * gi / (gi.abs() + cfg.eps);
            assert!((p - expected).abs() < 1e-15);
            assert!((p + cfg.lr * gi.signum()).abs() < 1e-8);
        }
    }

    #[test]
    fn repeated_steps_are_deterministic() {
        let run = || {
            let mut sets = one_set(vec![1.0, 2.0]);
            let mut st = AdamState::new();
            for _ in 0..2 {
                adam_step(&mut sets, &grads_for(vec![0.7, -0.1]), &mut st, &AdamConfig::default()).unwrap();
            }
            (sets, st)
        };
        let (a, sa) = run();
        let (b, sb) = run();
        assert_eq!(a, b);
        assert_eq!(sa, sb);
        assert_eq!(sa.step(), 2);
    }

    #[test]
    fn non_finite_gradient_names_parameter() {
        let mut sets = one_set(vec![1.0]);
        let err = adam_step(&mut sets, &grads_for(vec![f64::NAN]), &mut AdamState::new(), &AdamConfig::default())
            .unwrap_err();
        match err {
            DfpError::NonFiniteGradient(name) => assert!(name.contains('w')),
            other => panic!("unexpected {other:?}"),
        }
    }
}
