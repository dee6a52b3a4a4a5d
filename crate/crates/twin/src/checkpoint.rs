//! Checkpoint file.
//!
//! Layout (all integers little-endian):
//!
//! | bytes | content |
//! |-------|---------|
//! | 8 | magic `DTWINCKP` |
//! | 4 | format version (`u32`) |
//! | 8 | header length `h` (`u64`) |
//! | h | UTF-8 JSON header ([`Header`]) |
//! | 4 x (8 + 8n) | current params, best params, Adam m, Adam v: each a `u64` length then `f64` values |
//! | 32 | SHA-256 of everything above |

use std::path::Path;

use distill_core::dataset::NormStats;
use distill_core::evaluation::Model;
use distill_core::network::{AdamState, Block, NetworkParams, BLOCKS, N_PARAMS};
use distill_core::physics::OutputScaling;
use distill_core::training::{EpochRecord, Mode, TrainerState};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Result, TwinError};

pub const MAGIC: &[u8; 8] = b"DTWINCKP";
pub const FORMAT_VERSION: u32 = 1;
const HASH_LEN: usize = 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerShape {
    pub block: String,
    pub rows: usize,
    pub cols: usize,
}

/// Everything except the four parameter-sized vectors. Wall-clock times
/// are left out so identical runs write identical files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub mode: Mode,
    pub seed: u64,
    /// Resolved configuration of the run, TOML.
    pub config: String,
    /// SHA-256 (hex) of the training dataset file.
    pub data_sha256: String,
    pub layers: Vec<LayerShape>,
    pub stats: NormStats,
    pub scaling: OutputScaling,
    pub t_max: f64,
    pub next_epoch: u32,
    pub best_epoch: u32,
    /// Bit pattern; the score is infinite before the first epoch.
    pub best_score_bits: u64,
    pub first_total: Option<f64>,
    pub adam_t: u64,
    pub history: Vec<EpochRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub mode: Mode,
    pub config: String,
    pub data_sha256: String,
    pub stats: NormStats,
    pub scaling: OutputScaling,
    pub t_max: f64,
    pub state: TrainerState,
}

impl Checkpoint {
    /// The selected (best-epoch) model.
    pub fn model(&self) -> Model {
        Model {
            params: self.state.best_params.clone(),
            stats: self.stats.clone(),
            scaling: self.scaling,
            t_max: self.t_max,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let s = &self.state;
        let header = Header {
            mode: self.mode,
            seed: s.seed,
            config: self.config.clone(),
            data_sha256: self.data_sha256.clone(),
            layers: BLOCKS
                .iter()
                .map(|b: &Block| {
                    let (rows, cols) = b.shape();
                    LayerShape {
                        block: format!("{b:?}"),
                        rows,
                        cols,
                    }
                })
                .collect(),
            stats: self.stats.clone(),
            scaling: self.scaling,
            t_max: self.t_max,
            next_epoch: s.next_epoch,
            best_epoch: s.best_epoch,
            best_score_bits: s.best_score.to_bits(),
            first_total: s.first_total,
            adam_t: s.adam.t,
            history: s.history.iter().map(|h| EpochRecord { wall_s: 0.0, ..*h }).collect(),
        };
        let json = serde_json::to_vec(&header).expect("checkpoint header serializes");
        let mut out = Vec::with_capacity(json.len() + 4 * (8 + 8 * N_PARAMS) + 64);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        for v in [&s.params.data, &s.best_params.data, &s.adam.m, &s.adam.v] {
            out.extend_from_slice(&(v.len() as u64).to_le_bytes());
            for x in v.iter() {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        let digest = Sha256::digest(&out);
        out.extend_from_slice(&digest);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let corrupt = |m: &str| TwinError::Integrity(m.to_string());
        if bytes.len() < MAGIC.len() + 4 + 8 + HASH_LEN || &bytes[..8] != MAGIC {
            return Err(corrupt("not a checkpoint file"));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
        if version != FORMAT_VERSION {
            return Err(TwinError::CheckpointVersion {
                found: version,
                expected: FORMAT_VERSION,
            });
        }
        let (body, digest) = bytes.split_at(bytes.len() - HASH_LEN);
        if Sha256::digest(body).as_slice() != digest {
            return Err(corrupt("checksum mismatch"));
        }
        let mut r = Reader { buf: body, pos: 12 };
        let h_len = r.u64()? as usize;
        let header: Header =
            serde_json::from_slice(r.take(h_len)?).map_err(|e| TwinError::Integrity(format!("header: {e}")))?;
        let mut vecs = Vec::with_capacity(4);
        for _ in 0..4 {
            let n = r.u64()? as usize;
            if n != N_PARAMS {
                return Err(corrupt("parameter vector has the wrong length"));
            }
            let raw = r.take(n * 8)?;
            vecs.push(
                raw.chunks_exact(8)
                    .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                    .collect::<Vec<f64>>(),
            );
        }
        if r.pos != body.len() {
            return Err(corrupt("trailing bytes"));
        }
        let v = vecs.pop().unwrap();
        let m = vecs.pop().unwrap();
        let best = vecs.pop().unwrap();
        let params = vecs.pop().unwrap();
        let p = |d: Vec<f64>| NetworkParams::from_vec(d).map_err(|e| TwinError::Integrity(e.to_string()));
        Ok(Self {
            mode: header.mode,
            config: header.config,
            data_sha256: header.data_sha256,
            stats: header.stats,
            scaling: header.scaling,
            t_max: header.t_max,
            state: TrainerState {
                seed: header.seed,
                next_epoch: header.next_epoch,
                params: p(params)?,
                adam: AdamState { m, v, t: header.adam_t },
                best_params: p(best)?,
                best_epoch: header.best_epoch,
                best_score: f64::from_bits(header.best_score_bits),
                first_total: header.first_total,
                history: header.history,
                elapsed_s: 0.0,
            },
        })
    }

    /// Written through a temporary file so a failed save leaves no partial
    /// checkpoint behind.
    pub fn save(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, self.to_bytes()).map_err(|e| TwinError::io(&tmp, e))?;
        std::fs::rename(&tmp, path).map_err(|e| TwinError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| TwinError::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|e| *e <= self.buf.len());
        let end = end.ok_or_else(|| TwinError::Integrity("truncated checkpoint".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

/// Lower-case hex SHA-256 of a byte string.
pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn file_sha256(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| TwinError::io(path, e))?;
    Ok(sha256_hex(&bytes))
}
