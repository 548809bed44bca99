//! Pre-norm Transformer encoder-decoder recorded on a [`Tape`].

use super::params::{AttentionIds, LinearIds, NormIds, SeqToSeqParams};
use crate::error::{Error, Result};
use crate::numerics::{Real, Tape, Tensor, Var};
use crate::tokenizer::{BOS_ID, PAD_ID};

const LAYER_NORM_EPS: f64 = 1e-5;
const MASKED: f64 = -1e9;

/// Tape handles for every parameter tensor, indexed like the store.
#[derive(Clone, Debug)]
pub struct BoundParams {
    vars: Vec<Var>,
}

impl BoundParams {
    pub fn var(&self, id: usize) -> Var {
        self.vars[id]
    }

    pub fn vars(&self) -> &[Var] {
        &self.vars
    }
}

/// Right-padded id matrix.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PaddedBatch {
    pub ids: Vec<u32>,
    pub batch: usize,
    pub time: usize,
}

impl PaddedBatch {
    pub fn new(seqs: &[&[u32]]) -> Result<Self> {
        if seqs.is_empty() {
            return Err(Error::invalid("empty batch"));
        }
        if seqs.iter().any(|s| s.is_empty()) {
            return Err(Error::invalid("batch contains an empty sequence"));
        }
        let time = seqs.iter().map(|s| s.len()).max().unwrap_or(0);
        let mut ids = Vec::with_capacity(seqs.len() * time);
        for s in seqs {
            ids.extend_from_slice(s);
            ids.extend(std::iter::repeat_n(PAD_ID, time - s.len()));
        }
        Ok(PaddedBatch {
            ids,
            batch: seqs.len(),
            time,
        })
    }

    fn is_pad(&self, b: usize, t: usize) -> bool {
        self.ids[b * self.time + t] == PAD_ID
    }
}

/// Decoder inputs for teacher forcing: `BOS` followed by all but the last
/// label.
pub fn shift_right(labels: &[u32]) -> Vec<u32> {
    let mut v = Vec::with_capacity(labels.len());
    v.push(BOS_ID);
    v.extend_from_slice(&labels[..labels.len().saturating_sub(1)]);
    v
}

impl<T: Real> SeqToSeqParams<T> {
    /// Pushes every parameter onto `tape`, as learnable leaves when
    /// `trainable`.
    pub fn bind(&self, tape: &mut Tape<T>, trainable: bool) -> BoundParams {
        let vars = self
            .iter()
            .map(|(_, t)| {
                if trainable {
                    tape.param(t.clone())
                } else {
                    tape.constant(t.clone())
                }
            })
            .collect();
        BoundParams { vars }
    }

    fn check_ids(&self, ids: &[u32], limit: usize, what: &str) -> Result<()> {
        if ids.len() > limit {
            return Err(Error::invalid(format!(
                "{what} length {} exceeds the limit of {limit}",
                ids.len()
            )));
        }
        let vocab = self.config().vocab_size as u32;
        if let Some(&bad) = ids.iter().find(|&&i| i >= vocab) {
            return Err(Error::invalid(format!("{what} id {bad} >= vocab size {vocab}")));
        }
        Ok(())
    }

    /// Logits `[batch, tgt_time, vocab]` under teacher forcing. `tgt` holds
    /// label ids (no leading `BOS`); position `t` sees labels `< t` only.
    pub fn forward(&self, src: &[&[u32]], tgt: &[&[u32]]) -> Result<Tensor<T>> {
        let mut tape = Tape::new();
        let bound = self.bind(&mut tape, false);
        let (logits, batch, time) = self.teacher_forced_logits(&mut tape, &bound, src, tgt)?;
        let vocab = self.config().vocab_size;
        tape.value(logits).clone().reshape(vec![batch, time, vocab])
    }

    /// Mean per-token cross-entropy of `tgt` given `src`.
    pub fn loss(&self, tape: &mut Tape<T>, bound: &BoundParams, src: &[&[u32]], tgt: &[&[u32]]) -> Result<Var> {
        let (logits, _, _) = self.teacher_forced_logits(tape, bound, src, tgt)?;
        let labels = PaddedBatch::new(tgt)?;
        tape.cross_entropy(logits, &labels.ids, PAD_ID)
    }

    pub(crate) fn teacher_forced_logits(
        &self,
        tape: &mut Tape<T>,
        bound: &BoundParams,
        src: &[&[u32]],
        tgt: &[&[u32]],
    ) -> Result<(Var, usize, usize)> {
        if src.len() != tgt.len() {
            return Err(Error::invalid(format!(
                "{} sources but {} targets",
                src.len(),
                tgt.len()
            )));
        }
        for (s, t) in src.iter().zip(tgt) {
            self.check_ids(s, self.config().max_src_len, "source")?;
            self.check_ids(t, self.config().max_tgt_len, "target")?;
        }
        let src_batch = PaddedBatch::new(src)?;
        let dec_inputs: Vec<Vec<u32>> = tgt.iter().map(|t| shift_right(t)).collect();
        let dec_refs: Vec<&[u32]> = dec_inputs.iter().map(Vec::as_slice).collect();
        let dec_batch = PaddedBatch::new(&dec_refs)?;
        let memory = self.encode(tape, bound, &src_batch)?;
        let hidden = self.decode(tape, bound, memory, &src_batch, &dec_batch)?;
        let logits = self.project(tape, bound, hidden)?;
        Ok((logits, dec_batch.batch, dec_batch.time))
    }

    fn linear(&self, tape: &mut Tape<T>, bound: &BoundParams, x: Var, ids: LinearIds) -> Result<Var> {
        let y = tape.matmul(x, bound.var(ids.weight), false)?;
        tape.add_broadcast(y, bound.var(ids.bias))
    }

    fn norm(&self, tape: &mut Tape<T>, bound: &BoundParams, x: Var, ids: NormIds) -> Result<Var> {
        tape.layer_norm(x, bound.var(ids.gain), bound.var(ids.bias), T::lit(LAYER_NORM_EPS))
    }

    #[allow(clippy::too_many_arguments)]
    fn attention(
        &self,
        tape: &mut Tape<T>,
        bound: &BoundParams,
        ids: &AttentionIds,
        query_in: Var,
        kv_in: Var,
        batch: usize,
        tq: usize,
        tk: usize,
        mask: Var,
    ) -> Result<Var> {
        let heads = self.config().num_heads;
        let q = self.linear(tape, bound, query_in, ids.query)?;
        let k = self.linear(tape, bound, kv_in, ids.key)?;
        let v = self.linear(tape, bound, kv_in, ids.value)?;
        let qh = tape.split_heads(q, batch, tq, heads)?;
        let qh = tape.scale(qh, T::lit(1.0 / (self.config().head_dim() as f64).sqrt()));
        let kh = tape.split_heads(k, batch, tk, heads)?;
        let vh = tape.split_heads(v, batch, tk, heads)?;
        let scores = tape.batch_matmul(qh, kh, true)?;
        let scores = tape.add(scores, mask)?;
        let probs = tape.softmax(scores, 2)?;
        let ctx = tape.batch_matmul(probs, vh, false)?;
        let merged = tape.merge_heads(ctx, batch, tq, heads)?;
        self.linear(tape, bound, merged, ids.output)
    }

    fn ffn(&self, tape: &mut Tape<T>, bound: &BoundParams, x: Var, block_in: LinearIds, block_out: LinearIds) -> Result<Var> {
        let h = self.linear(tape, bound, x, block_in)?;
        let h = tape.gelu(h);
        self.linear(tape, bound, h, block_out)
    }

    fn embed(&self, tape: &mut Tape<T>, bound: &BoundParams, batch: &PaddedBatch) -> Result<Var> {
        let tok = tape.embedding(bound.var(self.token_embedding()), &batch.ids)?;
        let positions: Vec<u32> = (0..batch.time as u32).collect();
        let pos = tape.embedding(bound.var(self.position_embedding()), &positions)?;
        tape.add_broadcast(tok, pos)
    }

    /// `[batch * heads, tq, tk]` additive mask.
    fn mask(&self, tape: &mut Tape<T>, batch: usize, tq: usize, tk: usize, masked: impl Fn(usize, usize, usize) -> bool) -> Var {
        let heads = self.config().num_heads;
        let mut data = vec![T::zero(); batch * heads * tq * tk];
        for b in 0..batch {
            for i in 0..tq {
                for j in 0..tk {
                    if masked(b, i, j) {
                        for h in 0..heads {
                            data[((b * heads + h) * tq + i) * tk + j] = T::lit(MASKED);
                        }
                    }
                }
            }
        }
        tape.constant(Tensor::new(vec![batch * heads, tq, tk], data).expect("mask shape"))
    }

    /// Encoder states `[batch * src_time, hidden]` after the final norm.
    pub fn encode(&self, tape: &mut Tape<T>, bound: &BoundParams, src: &PaddedBatch) -> Result<Var> {
        let (b, ts) = (src.batch, src.time);
        let mask = self.mask(tape, b, ts, ts, |b, _, j| src.is_pad(b, j));
        let mut x = self.embed(tape, bound, src)?;
        for k in 0..self.config().num_layers {
            let blk = *self.encoder_layer(k);
            let h = self.norm(tape, bound, x, blk.self_attn_norm)?;
            let a = self.attention(tape, bound, &blk.self_attn, h, h, b, ts, ts, mask)?;
            x = tape.add(x, a)?;
            let h = self.norm(tape, bound, x, blk.ffn_norm)?;
            let f = self.ffn(tape, bound, h, blk.ffn_in, blk.ffn_out)?;
            x = tape.add(x, f)?;
        }
        self.norm(tape, bound, x, self.final_norm())
    }

    /// Decoder states `[batch * dec_time, hidden]` after the final norm.
    /// `memory` rows belong to `src` (one source per decoder row).
    pub fn decode(
        &self,
        tape: &mut Tape<T>,
        bound: &BoundParams,
        memory: Var,
        src: &PaddedBatch,
        dec_in: &PaddedBatch,
    ) -> Result<Var> {
        if src.batch != dec_in.batch {
            return Err(Error::invalid("source and decoder batches differ in size"));
        }
        let (b, ts, tt) = (dec_in.batch, src.time, dec_in.time);
        let causal = self.mask(tape, b, tt, tt, |_, i, j| j > i);
        let cross_mask = self.mask(tape, b, tt, ts, |b, _, j| src.is_pad(b, j));
        let mut y = self.embed(tape, bound, dec_in)?;
        for k in 0..self.config().num_layers {
            let (blk, cross) = self.decoder_layer(k);
            let (blk, cross) = (*blk, *cross);
            let h = self.norm(tape, bound, y, blk.self_attn_norm)?;
            let a = self.attention(tape, bound, &blk.self_attn, h, h, b, tt, tt, causal)?;
            y = tape.add(y, a)?;
            let h = self.norm(tape, bound, y, cross.norm)?;
            let c = self.attention(tape, bound, &cross.attn, h, memory, b, tt, ts, cross_mask)?;
            y = tape.add(y, c)?;
            let h = self.norm(tape, bound, y, blk.ffn_norm)?;
            let f = self.ffn(tape, bound, h, blk.ffn_in, blk.ffn_out)?;
            y = tape.add(y, f)?;
        }
        self.norm(tape, bound, y, self.final_norm())
    }

    /// Output logits through the tied token embedding.
    pub fn project(&self, tape: &mut Tape<T>, bound: &BoundParams, hidden: Var) -> Result<Var> {
        tape.matmul(hidden, bound.var(self.token_embedding()), true)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelConfig;

    fn small() -> SeqToSeqParams<f32> {
        let mut c = ModelConfig::tiny(30);
        c.hidden_size = 16;
        c.filter_size = 32;
        c.num_heads = 2;
        c.max_src_len = 16;
        c.max_tgt_len = 8;
        SeqToSeqParams::init(&c, 11).unwrap()
    }

    #[test]
    fn shift_right_prepends_bos() {
        assert_eq!(shift_right(&[7, 8, 2]), vec![BOS_ID, 7, 8]);
        assert_eq!(shift_right(&[2]), vec![BOS_ID]);
    }

    #[test]
    fn padded_batch_pads_right() {
        let b = PaddedBatch::new(&[&[1, 5, 2], &[1, 2]]).unwrap();
        assert_eq!(b.ids, vec![1, 5, 2, 1, 2, PAD_ID]);
        assert_eq!((b.batch, b.time), (2, 3));
    }

    #[test]
    fn forward_shape_and_limits() {
        let p = small();
        let logits = p.forward(&[&[1, 9, 10, 2]], &[&[11, 12, 2]]).unwrap();
        assert_eq!(logits.shape(), &[1, 3, 30]);
        assert!(logits.is_finite());
        let long_src = vec![9u32; 17];
        assert!(p.forward(&[&long_src], &[&[11, 2]]).is_err());
        let long_tgt = vec![9u32; 9];
        assert!(p.forward(&[&[1, 2]], &[&long_tgt]).is_err());
        assert!(p.forward(&[&[1, 30]], &[&[2]]).is_err());
    }

    #[test]
    fn initial_loss_is_near_uniform() {
        let p = small();
        let mut tape = Tape::new();
        let bound = p.bind(&mut tape, false);
        let loss = p.loss(&mut tape, &bound, &[&[1, 9, 10, 2]], &[&[11, 12, 13, 2]]).unwrap();
        let l = tape.value(loss).data()[0];
        assert!((l - 30f32.ln()).abs() < 0.1 * 30f32.ln(), "loss {l}");
    }
}
