//! Versioned binary container for both policies.
//!
//! Layout: magic `AECK`, little-endian `u32` version, `u32` header length,
//! the JSON header, then the composer and controller parameters as
//! little-endian `f64`.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::composer::Composer;
use crate::controller::ConfigPolicy;
use crate::nn::ModelConfig;

const MAGIC: &[u8; 4] = b"AECK";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a checkpoint: {0}")]
    Format(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub model: ModelConfig,
    pub seed: u64,
    pub stage: String,
    pub step: u64,
    pub composer_len: usize,
    pub controller_len: usize,
}

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub header: Header,
    pub composer: Composer,
    pub controller: ConfigPolicy,
}

impl Checkpoint {
    pub fn new(composer: Composer, controller: ConfigPolicy, seed: u64, stage: &str, step: u64) -> Self {
        let header = Header {
            model: composer.config,
            seed,
            stage: stage.to_string(),
            step,
            composer_len: composer.params.len(),
            controller_len: controller.params.len(),
        };
        Checkpoint { header, composer, controller }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let header = serde_json::to_vec(&self.header).expect("header serializes");
        let mut out = Vec::with_capacity(12 + header.len() + 8 * (self.header.composer_len + self.header.controller_len));
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(header.len() as u32).to_le_bytes());
        out.extend_from_slice(&header);
        for v in self.composer.params.iter().chain(&self.controller.params) {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CheckpointError> {
        if bytes.len() < 12 || &bytes[..4] != MAGIC {
            return Err(CheckpointError::Format("missing magic".into()));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if version != FORMAT_VERSION {
            return Err(CheckpointError::Format(format!("version {version}, expected {FORMAT_VERSION}")));
        }
        let hlen = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let body = bytes.get(12 + hlen..).ok_or_else(|| CheckpointError::Format("truncated header".into()))?;
        let header: Header = serde_json::from_slice(&bytes[12..12 + hlen])
            .map_err(|e| CheckpointError::Format(e.to_string()))?;
        let want_c = Composer::param_count(&header.model);
        let want_p = ConfigPolicy::param_count(&header.model);
        if header.composer_len != want_c || header.controller_len != want_p {
            return Err(CheckpointError::Shape(format!(
                "header lengths ({}, {}) disagree with model shape ({want_c}, {want_p})",
                header.composer_len, header.controller_len
            )));
        }
        if body.len() != 8 * (want_c + want_p) {
            return Err(CheckpointError::Format(format!("expected {} parameter bytes, found {}", 8 * (want_c + want_p), body.len())));
        }
        let values: Vec<f64> = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        let composer = Composer::from_params(header.model, values[..want_c].to_vec())
            .map_err(|e| CheckpointError::Shape(e.to_string()))?;
        let controller = ConfigPolicy::from_params(header.model, values[want_c..].to_vec())
            .map_err(|e| CheckpointError::Shape(e.to_string()))?;
        Ok(Checkpoint { header, composer, controller })
    }

    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, CheckpointError> {
        Self::from_bytes(&std::fs::read(path)?)
    }

    /// Loads and checks the model shape against `expected`, reporting the
    /// differing fields.
    pub fn load_expecting(path: &Path, expected: &ModelConfig) -> Result<Self, CheckpointError> {
        let c = Self::load(path)?;
        if &c.header.model != expected {
            return Err(CheckpointError::Shape(shape_diff(expected, &c.header.model)));
        }
        Ok(c)
    }
}

fn shape_diff(want: &ModelConfig, got: &ModelConfig) -> String {
    let fields = [
        ("hidden", want.hidden, got.hidden),
        ("heads", want.heads, got.heads),
        ("composer_layers", want.composer_layers, got.composer_layers),
        ("controller_layers", want.controller_layers, got.controller_layers),
        ("max_config", want.max_config, got.max_config),
        ("vocab", want.vocab, got.vocab),
    ];
    fields
        .iter()
        .filter(|(_, a, b)| a != b)
        .map(|(n, a, b)| format!("{n}: expected {a}, found {b}"))
        .collect::<Vec<_>>()
        .join("; ")
}

/// Hex SHA-256 of a parameter vector's little-endian bytes.
pub fn param_hash(params: &[f64]) -> String {
    let mut h = Sha256::new();
    for v in params {
        h.update(v.to_le_bytes());
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use autoec_core::rng;

    #[test]
    fn round_trip_is_bit_exact() {
        let c = ModelConfig::tiny();
        let ck = Checkpoint::new(
            Composer::new(c, &mut rng::from_seed(1)),
            ConfigPolicy::new(c, &mut rng::from_seed(2)),
            7,
            "1",
            3,
        );
        let bytes = ck.to_bytes();
        let back = Checkpoint::from_bytes(&bytes).unwrap();
        assert_eq!(back.header, ck.header);
        assert_eq!(back.composer.params, ck.composer.params);
        assert_eq!(back.controller.params, ck.controller.params);
        assert_eq!(back.to_bytes(), bytes);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(Checkpoint::from_bytes(b"nope"), Err(CheckpointError::Format(_))));
        let c = ModelConfig::tiny();
        let ck = Checkpoint::new(
            Composer::new(c, &mut rng::from_seed(1)),
            ConfigPolicy::new(c, &mut rng::from_seed(2)),
            0,
            "1",
            0,
        );
        let mut bytes = ck.to_bytes();
        bytes.truncate(bytes.len() - 8);
        assert!(Checkpoint::from_bytes(&bytes).is_err());
        let dir = std::env::temp_dir().join(format!("aeck-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("c.bin");
        ck.save(&path).unwrap();
        let err = Checkpoint::load_expecting(&path, &ModelConfig::default()).unwrap_err();
        assert!(err.to_string().contains("hidden: expected 64, found 8"), "{err}");
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn hash_tracks_content() {
        assert_eq!(param_hash(&[1.0, 2.0]), param_hash(&[1.0, 2.0]));
        assert_ne!(param_hash(&[1.0, 2.0]), param_hash(&[1.0, 2.5]));
    }
}
