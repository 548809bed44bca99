//! Binary checkpoint format.
//!
//! Layout (little-endian): the magic `QGPT1\0`; a `u32` byte length and the
//! JSON-encoded [`ModelConfig`]; a `u32` record count; then per record a
//! `u32`-prefixed UTF-8 name, a `u8`-prefixed dtype tag (`f32`), a `u32`
//! rank, `rank` x `u32` dims, a `u64` payload byte length and the raw
//! payload.

use std::path::Path;

use super::config::ModelConfig;
use super::params::SeqToSeqParams;
use crate::error::{Error, Result};
use crate::numerics::{Real, Tensor};

pub const CHECKPOINT_MAGIC: &[u8; 6] = b"QGPT1\0";
const DTYPE_F32: &str = "f32";

/// Contents of a checkpoint file: a config plus named tensors. Encoder-only
/// checkpoints omit the cross-attention tensors.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub config: ModelConfig,
    pub tensors: Vec<(String, Tensor<f32>)>,
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::Format(format!("file truncated while reading {what}")));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn string(&mut self, n: usize, what: &str) -> Result<String> {
        String::from_utf8(self.take(n, what)?.to_vec())
            .map_err(|_| Error::Format(format!("{what} is not valid UTF-8")))
    }
}

impl Checkpoint {
    pub fn from_params<T: Real>(params: &SeqToSeqParams<T>) -> Self {
        Checkpoint {
            config: params.config().clone(),
            tensors: params.iter().map(|(n, t)| (n.to_string(), t.cast())).collect(),
        }
    }

    /// Everything except the decoder-only cross-attention.
    pub fn encoder_only<T: Real>(params: &SeqToSeqParams<T>) -> Self {
        let mut ck = Self::from_params(params);
        ck.tensors.retain(|(n, _)| !n.contains(".cross_attn"));
        ck
    }

    pub fn get(&self, name: &str) -> Option<&Tensor<f32>> {
        self.tensors.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let config = serde_json::to_vec(&self.config).expect("config serializes");
        let payload: usize = self.tensors.iter().map(|(_, t)| t.len() * 4 + 64).sum();
        let mut out = Vec::with_capacity(payload + config.len() + 16);
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&(config.len() as u32).to_le_bytes());
        out.extend_from_slice(&config);
        out.extend_from_slice(&(self.tensors.len() as u32).to_le_bytes());
        for (name, t) in &self.tensors {
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.push(DTYPE_F32.len() as u8);
            out.extend_from_slice(DTYPE_F32.as_bytes());
            out.extend_from_slice(&(t.rank() as u32).to_le_bytes());
            for &d in t.shape() {
                out.extend_from_slice(&(d as u32).to_le_bytes());
            }
            out.extend_from_slice(&((t.len() * 4) as u64).to_le_bytes());
            for &x in t.data() {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(CHECKPOINT_MAGIC.len(), "magic")? != CHECKPOINT_MAGIC {
            return Err(Error::Format("bad magic or unsupported version".into()));
        }
        let config_len = r.u32("config length")? as usize;
        let config: ModelConfig = serde_json::from_slice(r.take(config_len, "config")?)
            .map_err(|e| Error::Format(format!("config block: {e}")))?;
        let count = r.u32("record count")?;
        let mut tensors = Vec::new();
        for _ in 0..count {
            let name_len = r.u32("name length")? as usize;
            let name = r.string(name_len, "parameter name")?;
            let dtype_len = r.u8("dtype length")? as usize;
            let dtype = r.string(dtype_len, "dtype")?;
            if dtype != DTYPE_F32 {
                return Err(Error::Format(format!("{name}: unsupported dtype {dtype:?}")));
            }
            let rank = r.u32("rank")? as usize;
            let shape = (0..rank)
                .map(|_| r.u32("dimension").map(|d| d as usize))
                .collect::<Result<Vec<_>>>()?;
            let numel: usize = shape.iter().product();
            let nbytes = r.u64("payload length")? as usize;
            if nbytes != numel * 4 {
                return Err(Error::Format(format!(
                    "{name}: payload of {nbytes} bytes does not match shape {shape:?}"
                )));
            }
            let data = r
                .take(nbytes, "payload")?
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect();
            let t = Tensor::new(shape, data).map_err(|e| Error::Format(format!("{name}: {e}")))?;
            tensors.push((name, t));
        }
        if r.pos != bytes.len() {
            return Err(Error::Format("trailing bytes after the last record".into()));
        }
        Ok(Checkpoint { config, tensors })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    /// Full parameter set; every tensor of the config's architecture must
    /// be present.
    pub fn into_params(self) -> Result<SeqToSeqParams<f32>> {
        let mut params = SeqToSeqParams::init(&self.config, 0)?;
        let expected = params.len();
        if self.tensors.len() != expected {
            return Err(Error::Format(format!(
                "checkpoint holds {} tensors, the config needs {expected}",
                self.tensors.len()
            )));
        }
        for (name, t) in self.tensors {
            params.set(&name, t)?;
        }
        Ok(params)
    }
}

pub fn save_checkpoint<T: Real>(params: &SeqToSeqParams<T>, path: impl AsRef<Path>) -> Result<()> {
    Checkpoint::from_params(params).write(path)
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<SeqToSeqParams<f32>> {
    Checkpoint::read(path)?.into_params()
}

/// Loads embeddings, shared blocks and norms from `checkpoint` into
/// `params`. Cross-attention keeps the values `params` was initialized with.
pub fn warm_start<T: Real>(mut params: SeqToSeqParams<T>, checkpoint: &Checkpoint) -> Result<SeqToSeqParams<T>> {
    for id in 0..params.len() {
        if params.is_cross_attention(id) {
            continue;
        }
        let name = params.name(id).to_string();
        let Some(src) = checkpoint.get(&name) else {
            return Err(Error::CheckpointIncompatible {
                name,
                detail: "missing from checkpoint".into(),
            });
        };
        let want = params.tensor(id).shape();
        if src.shape() != want {
            return Err(Error::CheckpointIncompatible {
                detail: format!("expected shape {want:?}, checkpoint has {:?}", src.shape()),
                name,
            });
        }
        *params.tensor_mut(id) = src.cast();
    }
    Ok(params)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> SeqToSeqParams<f32> {
        SeqToSeqParams::init(&ModelConfig::tiny(50), 5).unwrap()
    }

    #[test]
    fn bytes_round_trip_exactly() {
        let p = tiny();
        let bytes = Checkpoint::from_params(&p).to_bytes();
        assert_eq!(&bytes[..6], CHECKPOINT_MAGIC);
        let back = Checkpoint::from_bytes(&bytes).unwrap().into_params().unwrap();
        assert_eq!(back, p);
        assert_eq!(Checkpoint::from_params(&back).to_bytes(), bytes);
    }

    #[test]
    fn tiny_checkpoint_is_small() {
        let p = tiny();
        let bytes = Checkpoint::from_params(&p).to_bytes();
        assert!(bytes.len() < 5 * 1024 * 1024);
        assert!(bytes.len() >= p.num_scalars() * 4);
    }

    #[test]
    fn corruption_is_a_format_error() {
        let bytes = Checkpoint::from_params(&tiny()).to_bytes();
        let mut bad = bytes.clone();
        bad[4] = b'9';
        assert!(matches!(Checkpoint::from_bytes(&bad), Err(Error::Format(_))));
        for cut in [3, 20, bytes.len() / 2, bytes.len() - 1] {
            assert!(matches!(Checkpoint::from_bytes(&bytes[..cut]), Err(Error::Format(_))));
        }
        let mut long = bytes;
        long.push(0);
        assert!(matches!(Checkpoint::from_bytes(&long), Err(Error::Format(_))));
    }

    #[test]
    fn warm_start_rejects_wrong_hidden_size() {
        let mut c = ModelConfig::tiny(50);
        let source = SeqToSeqParams::<f32>::init(&c, 1).unwrap();
        c.hidden_size = 128;
        let target = SeqToSeqParams::<f32>::init(&c, 1).unwrap();
        let err = warm_start(target, &Checkpoint::encoder_only(&source)).unwrap_err();
        match err {
            Error::CheckpointIncompatible { name, .. } => assert_eq!(name, "embed.token"),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn warm_start_loads_shared_and_keeps_cross() {
        let source = tiny();
        let ck = Checkpoint::encoder_only(&source);
        assert!(ck.tensors.iter().all(|(n, _)| !n.contains("cross_attn")));
        let fresh = SeqToSeqParams::<f32>::init(&ModelConfig::tiny(50), 99).unwrap();
        let warmed = warm_start(fresh.clone(), &ck).unwrap();
        for id in 0..warmed.len() {
            if warmed.is_cross_attention(id) {
                assert_eq!(warmed.tensor(id), fresh.tensor(id));
            } else {
                assert_eq!(warmed.tensor(id), source.tensor(id));
            }
        }
        let resaved = Checkpoint::encoder_only(&warmed);
        assert_eq!(resaved.to_bytes(), ck.to_bytes());
    }
}
