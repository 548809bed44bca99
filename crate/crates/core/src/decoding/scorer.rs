use crate::error::{Error, Result};
use crate::model::{BoundParams, PaddedBatch, SeqToSeqParams};
use crate::numerics::{Real, Tape, Var};
use crate::tokenizer::{BOS_ID, EOS_ID, PAD_ID, SEP_ID};

/// Next-token distributions for a batch of decoder prefixes.
pub trait StepScorer {
    fn vocab_size(&self) -> usize;

    fn eos_id(&self) -> u32 {
        EOS_ID
    }

    /// Longest target (in generated tokens) the scorer can handle.
    fn max_len(&self) -> usize;

    /// One row per prefix: natural-log probabilities over the vocabulary,
    /// `-inf` for tokens that may never be emitted. Every prefix starts
    /// with `BOS` and all prefixes have the same length.
    fn log_probs(&mut self, prefixes: &[Vec<u32>]) -> Result<Vec<Vec<f64>>>;
}

/// Scores prefixes with a model for one source sequence. The encoder runs
/// once; each call re-runs the decoder over the full prefixes.
pub struct ModelScorer<'a, T: Real> {
    params: &'a SeqToSeqParams<T>,
    tape: Tape<T>,
    bound: BoundParams,
    memory: Var,
    src: Vec<u32>,
    src_time: usize,
    mark: usize,
    banned: Vec<u32>,
}

impl<'a, T: Real> ModelScorer<'a, T> {
    pub fn new(params: &'a SeqToSeqParams<T>, src: &[u32]) -> Result<Self> {
        let limit = params.config().max_src_len;
        if src.len() > limit {
            return Err(Error::invalid(format!("source length {} exceeds {limit}", src.len())));
        }
        let mut tape = Tape::new();
        let bound = params.bind(&mut tape, false);
        let batch = PaddedBatch::new(&[src])?;
        let memory = params.encode(&mut tape, &bound, &batch)?;
        let mark = tape.len();
        Ok(ModelScorer {
            params,
            tape,
            bound,
            memory,
            src: src.to_vec(),
            src_time: src.len(),
            mark,
            banned: vec![PAD_ID, BOS_ID, SEP_ID],
        })
    }

    /// Additionally forbids `ids`, e.g. `EOS` to force a length.
    pub fn ban(mut self, ids: &[u32]) -> Self {
        self.banned.extend_from_slice(ids);
        self
    }
}

impl<T: Real> StepScorer for ModelScorer<'_, T> {
    fn vocab_size(&self) -> usize {
        self.params.config().vocab_size
    }

    fn max_len(&self) -> usize {
        self.params.config().max_tgt_len
    }

    fn log_probs(&mut self, prefixes: &[Vec<u32>]) -> Result<Vec<Vec<f64>>> {
        let k = prefixes.len();
        let t = prefixes.first().map_or(0, Vec::len);
        if k == 0 || t == 0 || prefixes.iter().any(|p| p.len() != t) {
            return Err(Error::invalid("prefixes must be non-empty and of equal length"));
        }
        let refs: Vec<&[u32]> = prefixes.iter().map(Vec::as_slice).collect();
        let dec_in = PaddedBatch::new(&refs)?;
        let src_refs: Vec<&[u32]> = vec![self.src.as_slice(); k];
        let src = PaddedBatch::new(&src_refs)?;
        let rows: Vec<u32> = (0..k).flat_map(|_| 0..self.src_time as u32).collect();

        let vocab = self.vocab_size();
        let tape = &mut self.tape;
        let memory = tape.embedding(self.memory, &rows)?;
        let hidden = self.params.decode(tape, &self.bound, memory, &src, &dec_in)?;
        let last: Vec<u32> = (0..k).map(|i| (i * t + t - 1) as u32).collect();
        let hidden = tape.embedding(hidden, &last)?;
        let logits = self.params.project(tape, &self.bound, hidden)?;
        let out = tape
            .value(logits)
            .data()
            .chunks(vocab)
            .map(|row| {
                let row: Vec<f64> = row.iter().map(|x| x.as_f64()).collect();
                let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let lse = max + row.iter().map(|x| (x - max).exp()).sum::<f64>().ln();
                let mut lp: Vec<f64> = row.iter().map(|x| x - lse).collect();
                for &b in &self.banned {
                    if let Some(x) = lp.get_mut(b as usize) {
                        *x = f64::NEG_INFINITY;
                    }
                }
                lp
            })
            .collect();
        tape.truncate(self.mark);
        Ok(out)
    }
}
