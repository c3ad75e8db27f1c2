//! `WSTC` checkpoint container.
//!
//! Layout: magic `WSTC`, `u32` little-endian header length, JSON header,
//! then every parameter as little-endian `f64` in manifest order, followed
//! (when the header says so) by all first moments and then all second
//! moments in the same order.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Model, ModelConfig, ModelError};
use crate::error::{Error, Result};
use crate::nn::ParamStore;
use crate::Tensor;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"WSTC";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub name: String,
    pub shape: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointHeader {
    pub format_version: u32,
    pub config: ModelConfig,
    pub manifest: Vec<ManifestEntry>,
    pub moments: bool,
    pub epoch: usize,
    pub seed: u64,
    /// Adam steps taken so far.
    pub adam_step: u64,
}

/// A model with its training position.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub model: Model,
    pub epoch: usize,
    pub seed: u64,
    pub adam_step: u64,
}

impl Checkpoint {
    pub fn encode(&self, with_moments: bool) -> Vec<u8> {
        let store = self.model.params();
        let header = CheckpointHeader {
            format_version: FORMAT_VERSION,
            config: self.model.config().clone(),
            manifest: store
                .params()
                .iter()
                .map(|p| ManifestEntry { name: p.name.clone(), shape: p.value.shape().to_vec() })
                .collect(),
            moments: with_moments,
            epoch: self.epoch,
            seed: self.seed,
            adam_step: self.adam_step,
        };
        let json = serde_json::to_vec(&header).expect("header serializes");
        let mut out = Vec::with_capacity(8 + json.len() + 8 * 3 * store.num_scalars());
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&(json.len() as u32).to_le_bytes());
        out.extend_from_slice(&json);
        let mut put = |t: &Tensor| {
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        };
        store.params().iter().for_each(|p| put(&p.value));
        if with_moments {
            store.params().iter().for_each(|p| put(&p.m));
            store.params().iter().for_each(|p| put(&p.v));
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> std::result::Result<Self, ModelError> {
        let bad = |m: String| ModelError::Checkpoint(m);
        if bytes.len() < 8 || &bytes[..4] != CHECKPOINT_MAGIC {
            return Err(bad("missing WSTC magic".into()));
        }
        let hlen = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes")) as usize;
        let json = bytes.get(8..8 + hlen).ok_or_else(|| bad("truncated header".into()))?;
        let header: CheckpointHeader = serde_json::from_slice(json).map_err(|e| bad(format!("header: {e}")))?;
        if header.format_version != FORMAT_VERSION {
            return Err(bad(format!("unsupported format version {}", header.format_version)));
        }
        let scalars: usize = header.manifest.iter().map(|e| e.shape.iter().product::<usize>()).sum();
        let blocks = if header.moments { 3 } else { 1 };
        let payload = &bytes[8 + hlen..];
        if payload.len() != 8 * scalars * blocks {
            return Err(bad(format!("payload has {} bytes, expected {}", payload.len(), 8 * scalars * blocks)));
        }
        let mut floats = payload.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")));
        let mut take = |shape: &[usize]| -> std::result::Result<Tensor, ModelError> {
            let n = shape.iter().product();
            Ok(Tensor::from_vec(shape, floats.by_ref().take(n).collect())?)
        };
        let mut store = ParamStore::new();
        for e in &header.manifest {
            let t = take(&e.shape)?;
            store.insert(&e.name, t)?;
        }
        if header.moments {
            for k in 0..store.len() {
                let t = take(&header.manifest[k].shape)?;
                store.params_mut()[k].m = t;
            }
            for k in 0..store.len() {
                let t = take(&header.manifest[k].shape)?;
                store.params_mut()[k].v = t;
            }
        }
        let model = Model::from_params(header.config, store)?;
        Ok(Checkpoint { model, epoch: header.epoch, seed: header.seed, adam_step: header.adam_step })
    }
}

pub fn save_checkpoint(path: impl AsRef<Path>, ckpt: &Checkpoint, with_moments: bool) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, ckpt.encode(with_moments)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(Checkpoint::decode(&bytes)?)
}
