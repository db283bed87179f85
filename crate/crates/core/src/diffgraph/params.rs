use serde::{Deserialize, Serialize};

use super::tensor::Tensor;
use crate::error::{invalid, DfpError, Result};

pub const PARAMSET_FORMAT_VERSION: u32 = 1;

/// Named parameter tensors with a fixed order.
///
/// Non-trainable entries (batch-norm running statistics) live in the same
/// set so a checkpoint captures everything needed for evaluation, but the
/// optimizer skips them.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSet {
    names: Vec<String>,
    tensors: Vec<Tensor>,
    trainable: Vec<bool>,
}

/// Identifies one tensor of one parameter set on a tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ParamKey {
    pub set: usize,
    pub index: usize,
}

impl ParamSet {
    pub fn new() -> Self {
        Self {
            names: Vec::new(),
            tensors: Vec::new(),
            trainable: Vec::new(),
        }
    }

    /// Appends a tensor; names must be unique.
    pub fn push(&mut self, name: impl Into<String>, tensor: Tensor, trainable: bool) -> Result<usize> {
        let name = name.into();
        if self.names.contains(&name) {
            return Err(invalid("param_set", format!("duplicate parameter name `{name}`")));
        }
        self.names.push(name);
        self.tensors.push(tensor);
        self.trainable.push(trainable);
        Ok(self.names.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, index: usize) -> &str {
        &self.names[index]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn tensor(&self, index: usize) -> &Tensor {
        &self.tensors[index]
    }

    pub fn tensor_mut(&mut self, index: usize) -> &mut Tensor {
        &mut self.tensors[index]
    }

    pub fn by_name(&self, name: &str) -> Option<&Tensor> {
        self.index_of(name).map(|i| &self.tensors[i])
    }

    pub fn is_trainable(&self, index: usize) -> bool {
        self.trainable[index]
    }

    /// Number of scalar entries in trainable tensors.
    pub fn trainable_count(&self) -> usize {
        self.tensors
            .iter()
            .zip(&self.trainable)
            .filter(|(_, &t)| t)
            .map(|(t, _)| t.len())
            .sum()
    }

    pub fn to_checkpoint(&self) -> ParamSetCheckpoint {
        ParamSetCheckpoint {
            format_version: PARAMSET_FORMAT_VERSION,
            names: self.names.clone(),
            shapes: self.tensors.iter().map(|t| t.shape().to_vec()).collect(),
            values: self.tensors.iter().map(|t| t.values().to_vec()).collect(),
            trainable: self.trainable.clone(),
        }
    }

    pub fn from_checkpoint(ckpt: ParamSetCheckpoint) -> Result<Self> {
        if ckpt.format_version != PARAMSET_FORMAT_VERSION {
            return Err(DfpError::FormatVersion {
                found: ckpt.format_version,
                expected: PARAMSET_FORMAT_VERSION,
            });
        }
        let n = ckpt.names.len();
        if ckpt.shapes.len() != n || ckpt.values.len() != n || ckpt.trainable.len() != n {
            return Err(DfpError::Checkpoint(
                "names, shapes, values and trainable flags differ in length".into(),
            ));
        }
        let mut set = ParamSet::new();
        for (((name, shape), values), trainable) in ckpt
            .names
            .into_iter()
            .zip(ckpt.shapes)
            .zip(ckpt.values)
            .zip(ckpt.trainable)
        {
            set.push(name, Tensor::new(shape, values)?, trainable)?;
        }
        Ok(set)
    }
}

impl Default for ParamSet {
    fn default() -> Self {
        Self::new()
    }
}

/// Versioned on-disk form of a [`ParamSet`].
///
/// Floats are written in shortest round-trip form, so a save/load cycle
/// reproduces every bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamSetCheckpoint {
    pub format_version: u32,
    pub names: Vec<String>,
    pub shapes: Vec<Vec<usize>>,
    pub values: Vec<Vec<f64>>,
    pub trainable: Vec<bool>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn duplicate_names_rejected() {
        let mut p = ParamSet::new();
        p.push("w", Tensor::scalar(1.0), true).unwrap();
        assert!(p.push("w", Tensor::scalar(2.0), true).is_err());
    }

    #[test]
    fn wrong_version_rejected() {
        let mut ckpt = ParamSet::new().to_checkpoint();
        ckpt.format_version = 99;
        assert!(matches!(
            ParamSet::from_checkpoint(ckpt),
            Err(DfpError::FormatVersion { found: 99, .. })
        ));
    }

    proptest! {
        #[test]
        fn json_round_trip_is_bit_exact(vals in proptest::collection::vec(any::<f64>().prop_filter("finite", |v| v.is_finite()), 1..40)) {
            let mut p = ParamSet::new();
            p.push("a", Tensor::vector(vals.clone()), true).unwrap();
            p.push("b", Tensor::scalar(vals[0] * 1e-300), false).unwrap();
            let text = serde_json::to_string(&p.to_checkpoint()).unwrap();
            let back = ParamSet::from_checkpoint(serde_json::from_str(&text).unwrap()).unwrap();
            for i in 0..p.len() {
                let a: Vec<u64> = p.tensor(i).values().iter().map(|v| v.to_bits()).collect();
                let b: Vec<u64> = back.tensor(i).values().iter().map(|v| v.to_bits()).collect();
                prop_assert_eq!(a, b);
            }
            prop_assert_eq!(back.names(), p.names());
        }
    }
}
