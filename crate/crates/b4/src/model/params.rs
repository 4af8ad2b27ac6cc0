use std::collections::BTreeMap;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::DataError;
use crate::tensor::{Tape, Tensor, Var};

use super::ModelConfig;

/// Ordered, named parameter tensors. Order is fixed at construction and
/// shared with the optimizer state.
#[derive(Debug, Clone)]
pub struct ParamSet {
    entries: Vec<(String, Tensor)>,
}

impl ParamSet {
    pub fn new(entries: Vec<(String, Tensor)>) -> Self {
        ParamSet { entries }
    }

    pub fn iter(&self) -> impl Iterator<Item = &(String, Tensor)> {
        self.entries.iter()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.entries.iter().map(|(_, t)| t.numel()).collect()
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.entries
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, t)| t)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.entries
            .iter_mut()
            .find(|(n, _)| n == name)
            .map(|(_, t)| t)
    }

    /// Mutable views over all parameter data, in declaration order.
    pub fn data_mut(&mut self) -> Vec<&mut [f64]> {
        self.entries
            .iter_mut()
            .map(|(_, t)| t.data.as_mut_slice())
            .collect()
    }

    /// Register every parameter as an autodiff leaf on `tape`.
    pub fn bind(&self, tape: &mut Tape) -> BoundParams {
        let mut vars = BTreeMap::new();
        let mut order = Vec::with_capacity(self.entries.len());
        for (name, tensor) in &self.entries {
            let v = tape.leaf(tensor.clone());
            vars.insert(name.clone(), v);
            order.push(v);
        }
        BoundParams { vars, order }
    }
}

/// Tape handles for one forward pass, keyed by parameter name.
pub struct BoundParams {
    vars: BTreeMap<String, Var>,
    order: Vec<Var>,
}

impl BoundParams {
    pub fn var(&self, name: &str) -> Var {
        *self
            .vars
            .get(name)
            .unwrap_or_else(|| panic!("unknown parameter {name}"))
    }

    /// Leaf vars in ParamSet declaration order, for gradient collection.
    pub fn ordered(&self) -> &[Var] {
        &self.order
    }
}

/// Parameter names for a given config, in canonical order. The checkpoint
/// key list is exactly this.
pub fn param_names(cfg: &ModelConfig) -> Vec<String> {
    let mut names = vec![
        "embed".to_string(),
        "pos".to_string(),
        "proto_proj".to_string(),
        "p2c_wq".to_string(),
        "p2c_wk".to_string(),
    ];
    for l in 0..cfg.layers {
        for part in [
            "ln1_gain", "ln1_bias", "attn_wq", "attn_wk", "attn_wv", "attn_wo", "ln2_gain",
            "ln2_bias", "ff_w1", "ff_b1", "ff_w2", "ff_b2",
        ] {
            names.push(format!("layer{l}.{part}"));
        }
    }
    names
}

fn param_shape(cfg: &ModelConfig, name: &str) -> Vec<usize> {
    let d = cfg.d;
    let h = cfg.ff_hidden();
    match name {
        "embed" => vec![cfg.vocab_size, d],
        "pos" => vec![cfg.seq_len, d],
        "proto_proj" => vec![cfg.prototypes, cfg.vocab_size],
        "p2c_wq" => vec![4, cfg.d_k],
        "p2c_wk" => vec![d, cfg.d_k],
        _ => {
            let part = name.split('.').nth(1).expect("layer param name");
            match part {
                "ln1_gain" | "ln1_bias" | "ln2_gain" | "ln2_bias" | "ff_b2" => vec![1, d],
                "attn_wq" | "attn_wk" | "attn_wv" | "attn_wo" => vec![d, d],
                "ff_w1" => vec![d, h],
                "ff_b1" => vec![1, h],
                "ff_w2" => vec![h, d],
                other => panic!("unknown parameter part {other}"),
            }
        }
    }
}

/// Gaussian init (std 0.1) for weights; layer-norm gains start at 1 and
/// all biases at 0.
pub fn init_params(cfg: &ModelConfig, seed: u64) -> ParamSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 0.1).expect("valid normal");
    let entries = param_names(cfg)
        .into_iter()
        .map(|name| {
            let shape = param_shape(cfg, &name);
            let numel: usize = shape.iter().product();
            let data = if name.ends_with("gain") {
                vec![1.0; numel]
            } else if name.ends_with("bias") || name.ends_with("ff_b1") || name.ends_with("ff_b2")
            {
                vec![0.0; numel]
            } else {
                (0..numel).map(|_| normal.sample(&mut rng)).collect()
            };
            (name, Tensor { shape, data })
        })
        .collect();
    ParamSet::new(entries)
}

#[derive(Debug, Serialize, Deserialize)]
struct CheckpointParam {
    name: String,
    shape: Vec<usize>,
    data: Vec<f64>,
}

/// On-disk checkpoint: config echo plus flat named parameter arrays.
#[derive(Debug, Serialize, Deserialize)]
pub struct Checkpoint {
    pub config: ModelConfig,
    params: Vec<CheckpointParam>,
}

impl Checkpoint {
    pub fn from_model(cfg: &ModelConfig, params: &ParamSet) -> Self {
        Checkpoint {
            config: cfg.clone(),
            params: params
                .iter()
                .map(|(name, t)| CheckpointParam {
                    name: name.clone(),
                    shape: t.shape.clone(),
                    data: t.data.clone(),
                })
                .collect(),
        }
    }

    pub fn save(&self, path: &Path) -> Result<(), DataError> {
        let json = serde_json::to_string(self).expect("checkpoint serializes");
        std::fs::write(path, json).map_err(|e| DataError::Io {
            path: path.display().to_string(),
            source: e,
        })
    }

    pub fn load(path: &Path) -> Result<Self, DataError> {
        let raw = std::fs::read_to_string(path).map_err(|e| DataError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        serde_json::from_str(&raw).map_err(|e| DataError::Parse {
            path: path.display().to_string(),
            line: 0,
            detail: e.to_string(),
        })
    }

    /// Rebuild the parameter set, checking names and shapes against `cfg`.
    pub fn into_params(self, cfg: &ModelConfig) -> Result<ParamSet, DataError> {
        let expected = param_names(cfg);
        if self.params.len() != expected.len() {
            return Err(DataError::Invalid(format!(
                "checkpoint has {} parameters, config expects {}",
                self.params.len(),
                expected.len()
            )));
        }
        let mut entries = Vec::with_capacity(expected.len());
        for (p, name) in self.params.into_iter().zip(expected) {
            if p.name != name {
                return Err(DataError::Invalid(format!(
                    "checkpoint parameter {:?} where {:?} expected",
                    p.name, name
                )));
            }
            let shape = param_shape(cfg, &name);
            if p.shape != shape {
                return Err(DataError::Invalid(format!(
                    "checkpoint parameter {name} has shape {:?}, config expects {shape:?}",
                    p.shape
                )));
            }
            let tensor = Tensor::new(p.shape, p.data)
                .map_err(|e| DataError::Invalid(format!("parameter {name}: {e}")))?;
            entries.push((name, tensor));
        }
        Ok(ParamSet::new(entries))
    }
}
