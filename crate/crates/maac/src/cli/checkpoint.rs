//! Checkpoint container: a magic tag, a JSON directory, then raw
//! little-endian f64 tensor payloads. The full resolved config rides along
//! so a checkpoint is self-contained, and save -> load -> save is
//! byte-identical.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::envsim::Environment;
use crate::error::{Error, Result};
use crate::learner::{derive_seed, Learner};
use crate::numcore::ParamTensor;

use super::config::ExperimentConfig;

const MAGIC: &[u8; 8] = b"MAACCKP1";
pub const CHECKPOINT_SCHEMA: u32 = 1;

#[derive(Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    rows: usize,
    cols: usize,
    /// Element offset into the f64 payload.
    offset: usize,
    /// Adam step count (value tensors of live networks only).
    steps: u64,
}

#[derive(Serialize, Deserialize)]
struct Header {
    schema: u32,
    config_hash: String,
    config_toml: String,
    algorithm: String,
    episodes_done: usize,
    total_env_steps: usize,
    tensors: Vec<TensorEntry>,
}

/// A loaded checkpoint: the embedded experiment config plus a learner with
/// every parameter, target, and optimizer moment restored.
pub struct Checkpoint {
    pub config: ExperimentConfig,
    pub episodes_done: usize,
    pub total_env_steps: usize,
    pub learner: Learner,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    hasher.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Digest over every live and target parameter value, in the fixed
/// enumeration order. Used to prove evaluation never learns.
pub fn param_hash(learner: &Learner) -> String {
    let mut hasher = Sha256::new();
    let mut feed = |m: &crate::numcore::DenseMatrix| {
        for v in m.data() {
            hasher.update(v.to_le_bytes());
        }
    };
    for p in learner.policies() {
        for t in [&p.w1, &p.b1, &p.w2, &p.b2] {
            feed(&t.value);
        }
    }
    for p in learner.target_policies() {
        for t in [&p.w1, &p.b1, &p.w2, &p.b2] {
            feed(&t.value);
        }
    }
    for (_, t) in learner.critic().named_params() {
        feed(&t.value);
    }
    for (_, t) in learner.target_critic().named_params() {
        feed(&t.value);
    }
    hasher.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

fn policy_tensor_names(i: usize, prefix: &str) -> [String; 4] {
    [
        format!("{prefix}.{i}.w1"),
        format!("{prefix}.{i}.b1"),
        format!("{prefix}.{i}.w2"),
        format!("{prefix}.{i}.b2"),
    ]
}

struct PayloadBuilder {
    tensors: Vec<TensorEntry>,
    payload: Vec<f64>,
}

impl PayloadBuilder {
    fn new() -> Self {
        PayloadBuilder { tensors: Vec::new(), payload: Vec::new() }
    }

    fn push_plane(&mut self, name: String, m: &crate::numcore::DenseMatrix, steps: u64) {
        self.tensors.push(TensorEntry {
            name,
            rows: m.rows(),
            cols: m.cols(),
            offset: self.payload.len(),
            steps,
        });
        self.payload.extend_from_slice(m.data());
    }

    fn push_live(&mut self, name: &str, p: &ParamTensor) {
        self.push_plane(name.to_string(), &p.value, p.step_count);
        self.push_plane(format!("{name}.adam_m"), &p.adam_m, 0);
        self.push_plane(format!("{name}.adam_v"), &p.adam_v, 0);
    }

    fn push_target(&mut self, name: &str, p: &ParamTensor) {
        self.push_plane(name.to_string(), &p.value, 0);
    }
}

pub fn save_checkpoint(
    path: &Path,
    learner: &Learner,
    config: &ExperimentConfig,
    episodes_done: usize,
    total_env_steps: usize,
) -> Result<()> {
    let config_toml = config.to_toml()?;
    let mut b = PayloadBuilder::new();
    for (i, p) in learner.policies().iter().enumerate() {
        let names = policy_tensor_names(i, "policy");
        for (name, t) in names.iter().zip([&p.w1, &p.b1, &p.w2, &p.b2]) {
            b.push_live(name, t);
        }
    }
    for (i, p) in learner.target_policies().iter().enumerate() {
        let names = policy_tensor_names(i, "target_policy");
        for (name, t) in names.iter().zip([&p.w1, &p.b1, &p.w2, &p.b2]) {
            b.push_target(name, t);
        }
    }
    for (name, t) in learner.critic().named_params() {
        b.push_live(&format!("critic.{name}"), t);
    }
    for (name, t) in learner.target_critic().named_params() {
        b.push_target(&format!("target_critic.{name}"), t);
    }

    let header = Header {
        schema: CHECKPOINT_SCHEMA,
        config_hash: sha256_hex(config_toml.as_bytes()),
        config_toml,
        algorithm: config.learner.algorithm.label().to_string(),
        episodes_done,
        total_env_steps,
        tensors: b.tensors,
    };
    let header_bytes = serde_json::to_vec(&header)?;

    let mut out = Vec::with_capacity(16 + header_bytes.len() + b.payload.len() * 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(header_bytes.len() as u64).to_le_bytes());
    out.extend_from_slice(&header_bytes);
    for v in &b.payload {
        out.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, out)?;
    Ok(())
}

struct TensorReader<'a> {
    entries: HashMap<&'a str, &'a TensorEntry>,
    payload: &'a [f64],
}

impl<'a> TensorReader<'a> {
    fn slice(&self, name: &str) -> Result<(&'a TensorEntry, &'a [f64])> {
        let entry = self
            .entries
            .get(name)
            .ok_or_else(|| Error::Checkpoint(format!("tensor '{name}' missing")))?;
        let len = entry.rows * entry.cols;
        let end = entry.offset.checked_add(len).filter(|&e| e <= self.payload.len());
        match end {
            Some(end) => Ok((entry, &self.payload[entry.offset..end])),
            None => Err(Error::Checkpoint(format!("tensor '{name}' overruns the payload"))),
        }
    }

    fn read_into_value(&self, name: &str, p: &mut ParamTensor) -> Result<()> {
        let (entry, data) = self.slice(name)?;
        if (entry.rows, entry.cols) != p.value.shape() {
            return Err(Error::Checkpoint(format!(
                "tensor '{name}' is {}x{}, expected {}x{}",
                entry.rows,
                entry.cols,
                p.value.shape().0,
                p.value.shape().1
            )));
        }
        p.value.data_mut().copy_from_slice(data);
        Ok(())
    }

    fn read_into_live(&self, name: &str, p: &mut ParamTensor) -> Result<()> {
        self.read_into_value(name, p)?;
        let (entry, _) = self.slice(name)?;
        p.step_count = entry.steps;
        let (_, m) = self.slice(&format!("{name}.adam_m"))?;
        p.adam_m.data_mut().copy_from_slice(m);
        let (_, v) = self.slice(&format!("{name}.adam_v"))?;
        p.adam_v.data_mut().copy_from_slice(v);
        Ok(())
    }
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = fs::read(path)
        .map_err(|e| Error::Checkpoint(format!("cannot read {}: {e}", path.display())))?;
    if bytes.len() < 16 || &bytes[..8] != MAGIC {
        return Err(Error::Checkpoint(format!("{} is not a checkpoint file", path.display())));
    }
    let header_len = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let header_end = 16usize
        .checked_add(header_len)
        .filter(|&e| e <= bytes.len())
        .ok_or_else(|| Error::Checkpoint("header length overruns the file".into()))?;
    let header: Header = serde_json::from_slice(&bytes[16..header_end])
        .map_err(|e| Error::Checkpoint(format!("malformed header: {e}")))?;
    if header.schema != CHECKPOINT_SCHEMA {
        return Err(Error::Checkpoint(format!("unsupported schema {}", header.schema)));
    }
    if sha256_hex(header.config_toml.as_bytes()) != header.config_hash {
        return Err(Error::Checkpoint("embedded config does not match its hash".into()));
    }
    let tail = &bytes[header_end..];
    if tail.len() % 8 != 0 {
        return Err(Error::Checkpoint("payload is not a whole number of f64 values".into()));
    }
    let payload: Vec<f64> =
        tail.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();

    let mut config = ExperimentConfig::from_toml_str(&header.config_toml)?;
    config.resolve()?;
    if config.learner.algorithm.label() != header.algorithm {
        return Err(Error::Checkpoint("algorithm tag disagrees with embedded config".into()));
    }

    let probe = Environment::new(config.environment.clone())?;
    let mut init_rng = ChaCha8Rng::seed_from_u64(derive_seed(config.learner.seed, 1));
    let mut learner =
        Learner::new(&probe.obs_sizes(), &probe.action_sizes(), &config.learner, &mut init_rng)?;

    let reader = TensorReader {
        entries: header.tensors.iter().map(|t| (t.name.as_str(), t)).collect(),
        payload: &payload,
    };
    for (i, p) in learner.policies_mut().iter_mut().enumerate() {
        let names = policy_tensor_names(i, "policy");
        for (name, t) in names.iter().zip([&mut p.w1, &mut p.b1, &mut p.w2, &mut p.b2]) {
            reader.read_into_live(name, t)?;
        }
    }
    for (i, p) in learner.target_policies_mut().iter_mut().enumerate() {
        let names = policy_tensor_names(i, "target_policy");
        for (name, t) in names.iter().zip([&mut p.w1, &mut p.b1, &mut p.w2, &mut p.b2]) {
            reader.read_into_value(name, t)?;
        }
    }
    let critic_names: Vec<String> =
        learner.critic().named_params().iter().map(|(n, _)| n.clone()).collect();
    for (name, t) in critic_names.iter().zip(learner.critic_mut().params_mut()) {
        reader.read_into_live(&format!("critic.{name}"), t)?;
    }
    for (name, t) in critic_names.iter().zip(learner.target_critic_mut().params_mut()) {
        reader.read_into_value(&format!("target_critic.{name}"), t)?;
    }

    Ok(Checkpoint {
        config,
        episodes_done: header.episodes_done,
        total_env_steps: header.total_env_steps,
        learner,
    })
}
