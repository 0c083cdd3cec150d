//! Checkpoint container: a magic line, a little-endian `u64` manifest
//! length, a JSON manifest, then every tensor as raw little-endian `f64`s
//! in manifest order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::tensor::Shape;

const MAGIC: &[u8; 14] = b"SKSEM-CKPT v1\n";

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("checkpoint i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a checkpoint file (bad magic)")]
    BadMagic,
    #[error("checkpoint manifest: {0}")]
    Manifest(#[from] serde_json::Error),
    #[error("checkpoint schema mismatch: {0}")]
    Schema(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckpointEntry {
    pub name: String,
    pub shape: Shape,
    pub data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ManifestTensor {
    name: String,
    shape: [usize; 2],
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    kind: String,
    meta: serde_json::Value,
    tensors: Vec<ManifestTensor>,
}

/// Flat list of named tensors plus a model kind and free-form metadata.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub kind: String,
    pub meta: serde_json::Value,
    pub entries: Vec<CheckpointEntry>,
}

impl Checkpoint {
    pub fn new(kind: impl Into<String>, meta: serde_json::Value) -> Self {
        Self {
            kind: kind.into(),
            meta,
            entries: Vec::new(),
        }
    }

    /// Adds entries, prefixing each name with `prefix`.
    pub fn extend_prefixed(&mut self, prefix: &str, entries: Vec<CheckpointEntry>) {
        self.entries.extend(entries.into_iter().map(|mut e| {
            e.name = format!("{prefix}{}", e.name);
            e
        }));
    }

    /// Entries whose names start with `prefix`, with the prefix stripped.
    pub fn prefixed(&self, prefix: &str) -> Vec<CheckpointEntry> {
        self.entries
            .iter()
            .filter_map(|e| {
                e.name.strip_prefix(prefix).map(|n| CheckpointEntry {
                    name: n.to_string(),
                    ..e.clone()
                })
            })
            .collect()
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<(), CheckpointError> {
        let manifest = Manifest {
            kind: self.kind.clone(),
            meta: self.meta.clone(),
            tensors: self
                .entries
                .iter()
                .map(|e| ManifestTensor {
                    name: e.name.clone(),
                    shape: e.shape.dims(),
                })
                .collect(),
        };
        let json = serde_json::to_vec(&manifest)?;
        w.write_all(MAGIC)?;
        w.write_all(&(json.len() as u64).to_le_bytes())?;
        w.write_all(&json)?;
        for e in &self.entries {
            for v in &e.data {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self, CheckpointError> {
        let mut magic = [0u8; 14];
        r.read_exact(&mut magic).map_err(|_| CheckpointError::BadMagic)?;
        if &magic != MAGIC {
            return Err(CheckpointError::BadMagic);
        }
        let mut len = [0u8; 8];
        r.read_exact(&mut len)?;
        let len = u64::from_le_bytes(len) as usize;
        let mut json = vec![0u8; len];
        r.read_exact(&mut json)?;
        let manifest: Manifest = serde_json::from_slice(&json)?;
        let mut entries = Vec::with_capacity(manifest.tensors.len());
        let mut buf = [0u8; 8];
        for t in manifest.tensors {
            let shape = Shape::new(t.shape[0], t.shape[1]);
            let mut data = Vec::with_capacity(shape.len());
            for _ in 0..shape.len() {
                r.read_exact(&mut buf)?;
                data.push(f64::from_le_bytes(buf));
            }
            entries.push(CheckpointEntry {
                name: t.name,
                shape,
                data,
            });
        }
        Ok(Self {
            kind: manifest.kind,
            meta: manifest.meta,
            entries,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), CheckpointError> {
        self.write_to(BufWriter::new(File::create(path)?))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, CheckpointError> {
        Self::read_from(BufReader::new(File::open(path)?))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_to(&mut out).expect("writing to a Vec cannot fail");
        out
    }

    /// Fails unless the checkpoint declares the expected kind.
    pub fn expect_kind(&self, kind: &str) -> Result<(), CheckpointError> {
        if self.kind == kind {
            Ok(())
        } else {
            Err(CheckpointError::Schema(format!(
                "expected a {kind} checkpoint, found {}",
                self.kind
            )))
        }
    }
}
