use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::TrainingConfig;
use super::optimize::{train, TrainingReport};
use crate::data::{
    encode_qa_pair, encode_qg, encode_summarization, subsample, EncodedPair, QAPair, QGExample, SummarizationExample,
};
use crate::decoding::{DecodeConfig, DecodingStrategy};
use crate::error::{Error, Result};
use crate::eval::{evaluate_generation, EvalItem, EvalMode, EvalReport, ModelGenerator};
use crate::model::SeqToSeqParams;
use crate::tokenizer::Vocabulary;

/// Trains `params` to generate each question from its answer.
pub fn pretrain_question_generation(
    params: &mut SeqToSeqParams<f32>,
    vocab: &Vocabulary,
    pairs: &[QAPair],
    config: &TrainingConfig,
) -> Result<TrainingReport> {
    if pairs.is_empty() {
        return Err(Error::invalid("question-answer corpus is empty"));
    }
    let data = pairs
        .iter()
        .map(|p| encode_qa_pair(vocab, p, config.max_src_len, config.max_tgt_len))
        .collect::<Result<Vec<_>>>()?;
    train(params, &data, config)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Summarization,
    QuestionGeneration,
}

/// A fine-tuning dataset of either record kind.
#[derive(Clone, Copy, Debug)]
pub enum TaskData<'a> {
    Summarization(&'a [SummarizationExample]),
    QuestionGeneration(&'a [QGExample]),
}

impl TaskData<'_> {
    pub fn task(&self) -> Task {
        match self {
            TaskData::Summarization(_) => Task::Summarization,
            TaskData::QuestionGeneration(_) => Task::QuestionGeneration,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            TaskData::Summarization(d) => d.len(),
            TaskData::QuestionGeneration(d) => d.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Source ids and target labels for every record.
    pub fn encode(&self, vocab: &Vocabulary, max_src_len: usize, max_tgt_len: usize) -> Result<Vec<EncodedPair>> {
        match self {
            TaskData::Summarization(d) => d
                .iter()
                .map(|ex| encode_summarization(vocab, ex, max_src_len, max_tgt_len))
                .collect(),
            TaskData::QuestionGeneration(d) => d
                .iter()
                .map(|ex| encode_qg(vocab, ex, max_src_len, max_tgt_len))
                .collect(),
        }
    }

    /// Evaluation items: encoded sources with reference texts.
    pub fn eval_items(&self, vocab: &Vocabulary, max_src_len: usize) -> Result<Vec<EvalItem>> {
        let encoded = self.encode(vocab, max_src_len, 2)?;
        let refs: Vec<&str> = match self {
            TaskData::Summarization(d) => d.iter().map(|e| e.summary.as_str()).collect(),
            TaskData::QuestionGeneration(d) => d.iter().map(|e| e.question.as_str()).collect(),
        };
        Ok(encoded
            .into_iter()
            .zip(refs)
            .map(|(p, r)| EvalItem {
                src: p.src,
                reference: r.to_string(),
            })
            .collect())
    }
}

/// Fine-tunes on summarization (document to summary) or answer-focused
/// question generation (answer span and passage to question).
pub fn finetune(
    params: &mut SeqToSeqParams<f32>,
    vocab: &Vocabulary,
    task: Task,
    data: TaskData<'_>,
    config: &TrainingConfig,
) -> Result<TrainingReport> {
    if data.task() != task {
        return Err(Error::invalid(format!(
            "task {task:?} cannot train on {:?} records",
            data.task()
        )));
    }
    if data.is_empty() {
        return Err(Error::invalid("fine-tuning dataset is empty"));
    }
    let encoded = data.encode(vocab, config.max_src_len, config.max_tgt_len)?;
    train(params, &encoded, config)
}

/// Held-out scores of `params` on `data`.
pub fn evaluate_on(
    params: &SeqToSeqParams<f32>,
    vocab: &Vocabulary,
    data: TaskData<'_>,
    strategy: &dyn DecodingStrategy,
    decode: &DecodeConfig,
    max_src_len: usize,
    mode: EvalMode,
) -> Result<EvalReport> {
    let items = data.eval_items(vocab, max_src_len)?;
    let mut generator = ModelGenerator {
        params,
        vocab,
        strategy,
        config: decode.clone(),
    };
    Ok(evaluate_generation(&mut generator, &items, mode)?.report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub model: String,
    pub fraction: f64,
    pub rouge_l_f1: f64,
    pub final_loss: f64,
    pub steps: usize,
}

/// Everything a sample-efficiency sweep holds fixed across fractions.
pub struct Sweep<'a> {
    pub vocab: &'a Vocabulary,
    pub train: &'a [SummarizationExample],
    pub heldout: &'a [SummarizationExample],
    pub fractions: Vec<f64>,
    pub training: TrainingConfig,
    /// Passes over each subset the step budget must cover at least;
    /// `training.max_steps` stays the floor. Zero keeps the budget fixed.
    pub min_epochs: f64,
    pub strategy: &'a dyn DecodingStrategy,
    pub decode: DecodeConfig,
}

impl Sweep<'_> {
    fn check_fractions(&self) -> Result<()> {
        if self.fractions.is_empty() {
            return Err(Error::invalid("no fractions given"));
        }
        for &f in &self.fractions {
            if !(f > 0.0 && f <= 1.0) {
                return Err(Error::invalid(format!("fraction {f} is outside (0, 1]")));
            }
        }
        if self.fractions.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("fractions must be strictly ascending"));
        }
        if !(self.min_epochs >= 0.0 && self.min_epochs.is_finite()) {
            return Err(Error::invalid(format!("min_epochs {} must be non-negative", self.min_epochs)));
        }
        Ok(())
    }

    /// Training settings for a subset of `n` examples.
    pub fn budget(&self, n: usize) -> TrainingConfig {
        let epochs = (self.min_epochs * n as f64 / self.training.batch_size as f64).ceil() as usize;
        TrainingConfig {
            max_steps: self.training.max_steps.max(epochs),
            ..self.training.clone()
        }
    }

    /// Fine-tunes a copy of each starting point on every nested subsample
    /// and scores held-out ROUGE-L. Rows are ordered by start, then by
    /// fraction.
    pub fn run(&self, starts: &[(&str, &SeqToSeqParams<f32>)]) -> Result<Vec<SweepRow>> {
        self.check_fractions()?;
        if self.heldout.is_empty() {
            return Err(Error::invalid("held-out set is empty"));
        }
        let mut rows = Vec::new();
        for &(name, start) in starts {
            for &fraction in &self.fractions {
                let subset = subsample(self.train, fraction, self.training.seed)?;
                let mut params = start.clone();
                let report = finetune(
                    &mut params,
                    self.vocab,
                    Task::Summarization,
                    TaskData::Summarization(&subset),
                    &self.budget(subset.len()),
                )?;
                let eval = evaluate_on(
                    &params,
                    self.vocab,
                    TaskData::Summarization(self.heldout),
                    self.strategy,
                    &self.decode,
                    self.training.max_src_len,
                    EvalMode::Finetuned,
                )?;
                log::info!("{name} at {fraction}: rougeL {:.4}", eval.rouge_l_f1);
                rows.push(SweepRow {
                    model: name.to_string(),
                    fraction,
                    rouge_l_f1: eval.rouge_l_f1,
                    final_loss: report.final_loss,
                    steps: report.steps,
                });
            }
        }
        Ok(rows)
    }
}

pub fn write_sweep_csv(path: impl AsRef<Path>, rows: &[SweepRow]) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
