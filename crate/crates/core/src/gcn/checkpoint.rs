use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::params::Params;
use super::{Model, ModelConfig};
use crate::skeleton::GraphTopology;
use crate::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"GCNC0001";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    len: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Header {
    config: ModelConfig,
    topology_hash: String,
    config_hash: String,
    seed: u64,
    tensors: Vec<TensorEntry>,
}

/// Serialized model weights plus the hashes that tie them to a topology
/// and an architecture.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: ModelConfig,
    pub topology_hash: String,
    pub config_hash: String,
    pub seed: u64,
    params: Params<f32>,
}

impl Checkpoint {
    pub fn from_model(model: &Model) -> Self {
        Self {
            config: model.config.clone(),
            topology_hash: model.topology.hash(),
            config_hash: model.config.hash(),
            seed: model.seed,
            params: model.params.clone(),
        }
    }

    /// Rebuilds the model; the topology must hash to the stored value.
    pub fn into_model(self, topology: &GraphTopology) -> Result<Model> {
        let found = topology.hash();
        if found != self.topology_hash {
            return Err(Error::HashMismatch { what: "topology", expected: self.topology_hash, found });
        }
        // Shapes of a fresh model must match the stored tensors.
        let fresh = Model::new(self.config.clone(), topology.clone(), 0)?;
        let mut expected = Vec::new();
        fresh.params.visit(|name, _, t| expected.push((name.to_string(), t.len())));
        let mut stored = Vec::new();
        self.params.visit(|name, _, t| stored.push((name.to_string(), t.len())));
        if expected != stored {
            return Err(Error::corrupt("checkpoint", "tensor layout does not match the architecture"));
        }
        Ok(Model::from_parts(self.config, topology.clone(), self.params, self.seed))
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        let mut tensors = Vec::new();
        let mut payload = Vec::new();
        self.params.visit(|name, _, t| {
            tensors.push(TensorEntry { name: name.to_string(), len: t.len() });
            for v in t {
                payload.extend_from_slice(&v.to_le_bytes());
            }
        });
        let header = Header {
            config: self.config.clone(),
            topology_hash: self.topology_hash.clone(),
            config_hash: self.config_hash.clone(),
            seed: self.seed,
            tensors,
        };
        let json = serde_json::to_vec(&header)?;
        let len = u32::try_from(json.len()).map_err(|_| Error::Config("checkpoint header too large".into()))?;
        w.write_all(CHECKPOINT_MAGIC)?;
        w.write_all(&len.to_le_bytes())?;
        w.write_all(&json)?;
        w.write_all(&payload)?;
        Ok(())
    }

    pub fn read<R: Read>(mut r: R) -> Result<Self> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        if bytes.len() < 12 || &bytes[..8] != CHECKPOINT_MAGIC {
            return Err(Error::corrupt("checkpoint", "missing or bad magic"));
        }
        let len = u32::from_le_bytes([bytes[8], bytes[9], bytes[10], bytes[11]]) as usize;
        let body = &bytes[12..];
        if body.len() < len {
            return Err(Error::corrupt("checkpoint", "truncated header"));
        }
        let header: Header = serde_json::from_slice(&body[..len])
            .map_err(|e| Error::corrupt("checkpoint", format!("unreadable header: {e}")))?;
        if header.config.hash() != header.config_hash {
            return Err(Error::HashMismatch {
                what: "model config",
                expected: header.config_hash,
                found: header.config.hash(),
            });
        }
        let data = &body[len..];
        let total: usize = header.tensors.iter().map(|t| t.len).sum();
        if data.len() != total * 4 {
            return Err(Error::corrupt(
                "checkpoint",
                format!("expected {} weight bytes, found {}", total * 4, data.len()),
            ));
        }
        header.config.validate()?;
        let mut values = data.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]));
        let mut params = skeleton_params(&header)?;
        let mut layout_ok = true;
        let mut i = 0;
        params.visit_mut(|name, _, t| {
            match header.tensors.get(i) {
                Some(e) if e.name == name && e.len == t.len() => {
                    t.iter_mut().for_each(|x| *x = values.next().unwrap_or(f32::NAN));
                }
                _ => layout_ok = false,
            }
            i += 1;
        });
        if !layout_ok || i != header.tensors.len() {
            return Err(Error::corrupt("checkpoint", "tensor manifest does not match the architecture"));
        }
        Ok(Self {
            config: header.config,
            topology_hash: header.topology_hash,
            config_hash: header.config_hash,
            seed: header.seed,
            params,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut buf = Vec::new();
        self.write(&mut buf)?;
        std::fs::write(path, buf)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read(std::fs::File::open(path)?)
    }
}

/// Zero parameters shaped from the manifest's partition count.
fn skeleton_params(header: &Header) -> Result<Params<f32>> {
    let partitions = header.tensors.iter().filter(|t| t.name.starts_with("blocks.0.gcn.w.")).count();
    if partitions == 0 {
        return Err(Error::corrupt("checkpoint", "no graph convolution weights"));
    }
    let config = &header.config;
    let mut c_in = config.in_channels();
    let mut blocks = Vec::new();
    for &c_out in &config.channels {
        blocks.push(super::params::BlockParams {
            c_in,
            c_out,
            gcn_w: vec![vec![0.0; c_out * c_in]; partitions],
            edge: vec![vec![0.0; config.keypoints()]; partitions],
            tcn_w: vec![0.0; c_out * c_out * config.temporal_kernel],
            tcn_b: vec![0.0; c_out],
        });
        c_in = c_out;
    }
    Ok(Params {
        input_scale: vec![0.0; config.in_channels()],
        blocks,
        classifier_w: vec![0.0; config.num_classes * c_in],
        classifier_b: vec![0.0; config.num_classes],
    })
}
