use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::config::ModelConfig;
use crate::error::{Error, Result};
use crate::numerics::{Real, Tensor};

pub const INIT_STD: f64 = 0.02;

/// Index of a parameter tensor inside [`SeqToSeqParams`].
pub type ParamId = usize;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LinearIds {
    pub weight: ParamId,
    pub bias: ParamId,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NormIds {
    pub gain: ParamId,
    pub bias: ParamId,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AttentionIds {
    pub query: LinearIds,
    pub key: LinearIds,
    pub value: LinearIds,
    pub output: LinearIds,
}

/// Parameters one layer uses on both the encoder and the decoder side.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SharedBlockIds {
    pub self_attn: AttentionIds,
    pub self_attn_norm: NormIds,
    pub ffn_in: LinearIds,
    pub ffn_out: LinearIds,
    pub ffn_norm: NormIds,
}

/// Decoder-only cross-attention of one layer.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CrossBlockIds {
    pub attn: AttentionIds,
    pub norm: NormIds,
}

#[derive(Clone, Debug, PartialEq)]
struct Entry<T> {
    name: String,
    tensor: Tensor<T>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum InitKind {
    Weight,
    Zero,
    One,
}

/// Learnable parameters of the encoder-decoder.
///
/// Layer `k` of the encoder and layer `k` of the decoder resolve to the same
/// [`SharedBlockIds`], so their self-attention, feed-forward and norm weights
/// are a single storage. The output projection reuses the token embedding.
#[derive(Clone, Debug, PartialEq)]
pub struct SeqToSeqParams<T> {
    config: ModelConfig,
    entries: Vec<Entry<T>>,
    index: HashMap<String, ParamId>,
    token_embedding: ParamId,
    position_embedding: ParamId,
    shared: Vec<SharedBlockIds>,
    cross: Vec<CrossBlockIds>,
    final_norm: NormIds,
}

struct Builder {
    specs: Vec<(String, Vec<usize>, InitKind)>,
}

impl Builder {
    fn add(&mut self, name: String, shape: Vec<usize>, kind: InitKind) -> ParamId {
        self.specs.push((name, shape, kind));
        self.specs.len() - 1
    }

    fn linear(&mut self, prefix: &str, fan_in: usize, fan_out: usize) -> LinearIds {
        LinearIds {
            weight: self.add(format!("{prefix}.weight"), vec![fan_in, fan_out], InitKind::Weight),
            bias: self.add(format!("{prefix}.bias"), vec![fan_out], InitKind::Zero),
        }
    }

    fn norm(&mut self, prefix: &str, width: usize) -> NormIds {
        NormIds {
            gain: self.add(format!("{prefix}.gain"), vec![width], InitKind::One),
            bias: self.add(format!("{prefix}.bias"), vec![width], InitKind::Zero),
        }
    }

    fn attention(&mut self, prefix: &str, h: usize) -> AttentionIds {
        AttentionIds {
            query: self.linear(&format!("{prefix}.query"), h, h),
            key: self.linear(&format!("{prefix}.key"), h, h),
            value: self.linear(&format!("{prefix}.value"), h, h),
            output: self.linear(&format!("{prefix}.output"), h, h),
        }
    }
}

/// Stable 64-bit hash of a parameter name, used to pick its RNG stream so a
/// tensor's initial values do not depend on which other tensors exist.
fn name_stream(name: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in name.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Draws `len` values from N(0, std^2) truncated to two standard deviations.
pub(crate) fn truncated_normal(len: usize, std: f64, seed: u64, stream: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let normal = Normal::new(0.0, std).expect("positive std");
    (0..len)
        .map(|_| loop {
            let x: f64 = normal.sample(&mut rng);
            if x.abs() <= 2.0 * std {
                break x;
            }
        })
        .collect()
}

/// Names, shapes and roles of every tensor for a configuration.
struct Plan {
    builder: Builder,
    token_embedding: ParamId,
    position_embedding: ParamId,
    shared: Vec<SharedBlockIds>,
    cross: Vec<CrossBlockIds>,
    final_norm: NormIds,
}

impl Plan {
    fn new(config: &ModelConfig) -> Result<Self> {
        config.validate()?;
        let (h, f) = (config.hidden_size, config.filter_size);
        let mut b = Builder { specs: Vec::new() };
        let token_embedding = b.add("embed.token".into(), vec![config.vocab_size, h], InitKind::Weight);
        let position_embedding = b.add(
            "embed.position".into(),
            vec![config.position_table_len(), h],
            InitKind::Weight,
        );
        let shared: Vec<SharedBlockIds> = (0..config.num_layers)
            .map(|k| SharedBlockIds {
                self_attn: b.attention(&format!("layer.{k}.self_attn"), h),
                self_attn_norm: b.norm(&format!("layer.{k}.self_attn_norm"), h),
                ffn_in: b.linear(&format!("layer.{k}.ffn.in"), h, f),
                ffn_out: b.linear(&format!("layer.{k}.ffn.out"), f, h),
                ffn_norm: b.norm(&format!("layer.{k}.ffn_norm"), h),
            })
            .collect();
        let cross: Vec<CrossBlockIds> = (0..config.num_layers)
            .map(|k| CrossBlockIds {
                attn: b.attention(&format!("layer.{k}.cross_attn"), h),
                norm: b.norm(&format!("layer.{k}.cross_attn_norm"), h),
            })
            .collect();
        let final_norm = b.norm("final_norm", h);
        Ok(Plan {
            builder: b,
            token_embedding,
            position_embedding,
            shared,
            cross,
            final_norm,
        })
    }
}

/// Name and shape of every tensor `SeqToSeqParams::init` would allocate, in
/// storage order, without allocating them.
pub fn parameter_shapes(config: &ModelConfig) -> Result<Vec<(String, Vec<usize>)>> {
    Ok(Plan::new(config)?
        .builder
        .specs
        .into_iter()
        .map(|(name, shape, _)| (name, shape))
        .collect())
}

impl<T: Real> SeqToSeqParams<T> {
    /// Fresh parameters: weights from a truncated normal (std 0.02), biases
    /// zero, norm gains one.
    pub fn init(config: &ModelConfig, seed: u64) -> Result<Self> {
        let plan = Plan::new(config)?;
        let b = plan.builder;
        let (token_embedding, position_embedding, shared, cross, final_norm) =
            (plan.token_embedding, plan.position_embedding, plan.shared, plan.cross, plan.final_norm);

        let entries = b
            .specs
            .into_iter()
            .map(|(name, shape, kind)| {
                let tensor = Self::init_tensor(&name, shape, kind, seed);
                Entry { name, tensor }
            })
            .collect::<Vec<_>>();
        let index = entries
            .iter()
            .enumerate()
            .map(|(i, e)| (e.name.clone(), i))
            .collect();
        Ok(SeqToSeqParams {
            config: config.clone(),
            entries,
            index,
            token_embedding,
            position_embedding,
            shared,
            cross,
            final_norm,
        })
    }

    fn init_tensor(name: &str, shape: Vec<usize>, kind: InitKind, seed: u64) -> Tensor<T> {
        match kind {
            InitKind::Zero => Tensor::zeros(shape),
            InitKind::One => Tensor::full(shape, T::one()),
            InitKind::Weight => {
                let len = shape.iter().product();
                let values = truncated_normal(len, INIT_STD, seed, name_stream(name));
                Tensor::from_f64(shape, &values).expect("shape matches length")
            }
        }
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.entries[id].name
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).copied()
    }

    pub fn tensor(&self, id: ParamId) -> &Tensor<T> {
        &self.entries[id].tensor
    }

    pub fn tensor_mut(&mut self, id: ParamId) -> &mut Tensor<T> {
        &mut self.entries[id].tensor
    }

    pub fn by_name(&self, name: &str) -> Option<&Tensor<T>> {
        self.id(name).map(|id| self.tensor(id))
    }

    /// `(name, tensor)` pairs in storage order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor<T>)> {
        self.entries.iter().map(|e| (e.name.as_str(), &e.tensor))
    }

    pub fn num_scalars(&self) -> usize {
        self.entries.iter().map(|e| e.tensor.len()).sum()
    }

    pub fn token_embedding(&self) -> ParamId {
        self.token_embedding
    }

    pub fn position_embedding(&self) -> ParamId {
        self.position_embedding
    }

    pub fn encoder_layer(&self, k: usize) -> &SharedBlockIds {
        &self.shared[k]
    }

    pub fn decoder_layer(&self, k: usize) -> (&SharedBlockIds, &CrossBlockIds) {
        (&self.shared[k], &self.cross[k])
    }

    pub fn final_norm(&self) -> NormIds {
        self.final_norm
    }

    /// True for decoder-only cross-attention tensors.
    pub fn is_cross_attention(&self, id: ParamId) -> bool {
        self.entries[id].name.contains(".cross_attn")
    }

    pub fn all_finite(&self) -> bool {
        self.entries.iter().all(|e| e.tensor.is_finite())
    }

    pub fn cast<U: Real>(&self) -> SeqToSeqParams<U> {
        SeqToSeqParams {
            config: self.config.clone(),
            entries: self
                .entries
                .iter()
                .map(|e| Entry {
                    name: e.name.clone(),
                    tensor: e.tensor.cast(),
                })
                .collect(),
            index: self.index.clone(),
            token_embedding: self.token_embedding,
            position_embedding: self.position_embedding,
            shared: self.shared.clone(),
            cross: self.cross.clone(),
            final_norm: self.final_norm,
        }
    }

    /// Replaces the tensor named `name`, checking its shape.
    pub fn set(&mut self, name: &str, tensor: Tensor<T>) -> Result<()> {
        let id = self.id(name).ok_or_else(|| Error::CheckpointIncompatible {
            name: name.to_string(),
            detail: "no such parameter in this model".into(),
        })?;
        let want = self.entries[id].tensor.shape();
        if want != tensor.shape() {
            return Err(Error::CheckpointIncompatible {
                name: name.to_string(),
                detail: format!("expected shape {want:?}, found {:?}", tensor.shape()),
            });
        }
        self.entries[id].tensor = tensor;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent count: walk the architecture description layer by layer.
    fn count_by_hand(c: &ModelConfig) -> usize {
        let h = c.hidden_size;
        let linear = |i: usize, o: usize| i * o + o;
        let norm = 2 * h;
        let mut total = c.vocab_size * h + c.max_src_len.max(c.max_tgt_len) * h;
        for _ in 0..c.num_layers {
            total += 4 * linear(h, h) + norm; // self-attention + its norm
            total += linear(h, c.filter_size) + linear(c.filter_size, h) + norm;
            total += 4 * linear(h, h) + norm; // cross-attention + its norm
        }
        total + norm
    }

    #[test]
    fn tiny_param_count_matches_closed_form() {
        let c = ModelConfig::tiny(50);
        let p = SeqToSeqParams::<f32>::init(&c, 1).unwrap();
        assert_eq!(p.num_scalars(), count_by_hand(&c));
        assert_eq!(c.param_count(), count_by_hand(&c));
    }

    #[test]
    fn same_seed_same_params_different_seed_differs() {
        let c = ModelConfig::tiny(40);
        let a = SeqToSeqParams::<f32>::init(&c, 7).unwrap();
        let b = SeqToSeqParams::<f32>::init(&c, 7).unwrap();
        let other = SeqToSeqParams::<f32>::init(&c, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, other);
    }

    #[test]
    fn init_distribution() {
        let c = ModelConfig::tiny(40);
        let p = SeqToSeqParams::<f64>::init(&c, 3).unwrap();
        let w = p.by_name("layer.0.ffn.in.weight").unwrap();
        assert!(w.data().iter().all(|x| x.abs() <= 0.04));
        let std = (w.data().iter().map(|x| x * x).sum::<f64>() / w.len() as f64).sqrt();
        // Truncation at 2 sigma shrinks the std to about 0.88 sigma.
        assert!((std - 0.0176).abs() < 0.001, "std {std}");
        assert!(p.by_name("layer.1.self_attn.query.bias").unwrap().data().iter().all(|&x| x == 0.0));
        assert!(p.by_name("final_norm.gain").unwrap().data().iter().all(|&x| x == 1.0));
    }

    #[test]
    fn encoder_and_decoder_layers_share_storage() {
        let c = ModelConfig::tiny(40);
        let mut p = SeqToSeqParams::<f32>::init(&c, 0).unwrap();
        let enc_q = p.encoder_layer(1).self_attn.query.weight;
        p.tensor_mut(enc_q).data_mut()[5] = 42.0;
        let (dec, _) = p.decoder_layer(1);
        assert_eq!(p.tensor(dec.self_attn.query.weight).data()[5], 42.0);
        assert_eq!(p.encoder_layer(0), p.decoder_layer(0).0);
    }
}
