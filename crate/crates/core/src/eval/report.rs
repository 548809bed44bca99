use serde::{Deserialize, Serialize};

use super::overlap::{bleu, rouge_l_f1, rouge_n_f1};
use crate::decoding::{DecodeConfig, DecodingStrategy, ModelScorer};
use crate::error::{Error, Result};
use crate::model::SeqToSeqParams;
use crate::numerics::Real;
use crate::tokenizer::Vocabulary;

/// ROUGE values are means of per-example F1; BLEU is corpus-level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub rouge1_f1: f64,
    pub rouge2_f1: f64,
    #[serde(rename = "rougeL_f1")]
    pub rouge_l_f1: f64,
    pub bleu1: f64,
    pub bleu2: f64,
    pub bleu3: f64,
    pub bleu4: f64,
    pub n_examples: usize,
}

pub fn evaluate_predictions<S: AsRef<str>>(predictions: &[S], references: &[S]) -> Result<EvalReport> {
    if predictions.len() != references.len() {
        return Err(Error::invalid(format!(
            "{} predictions but {} references",
            predictions.len(),
            references.len()
        )));
    }
    if predictions.is_empty() {
        return Err(Error::invalid("cannot evaluate an empty dataset"));
    }
    let n = predictions.len() as f64;
    let mean = |f: &dyn Fn(&str, &str) -> f64| {
        predictions
            .iter()
            .zip(references)
            .map(|(p, r)| f(p.as_ref(), r.as_ref()))
            .sum::<f64>()
            / n
    };
    let b = bleu(predictions, references, 4)?;
    Ok(EvalReport {
        rouge1_f1: mean(&|c, r| rouge_n_f1(c, r, 1)),
        rouge2_f1: mean(&|c, r| rouge_n_f1(c, r, 2)),
        rouge_l_f1: mean(&rouge_l_f1),
        bleu1: b[0],
        bleu2: b[1],
        bleu3: b[2],
        bleu4: b[3],
        n_examples: predictions.len(),
    })
}

/// Whether the evaluated checkpoint was fine-tuned on the task or is the
/// question-generation model applied as is.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalMode {
    Finetuned,
    ZeroShot,
}

/// Produces one text output per encoded source.
pub trait Generator {
    fn generate(&mut self, src: &[u32]) -> Result<Generated>;
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Generated {
    pub text: String,
    pub score: f64,
}

/// Decodes with a model and returns the top-ranked hypothesis.
pub struct ModelGenerator<'a, T: Real> {
    pub params: &'a SeqToSeqParams<T>,
    pub vocab: &'a Vocabulary,
    pub strategy: &'a dyn DecodingStrategy,
    pub config: DecodeConfig,
}

impl<T: Real> Generator for ModelGenerator<'_, T> {
    fn generate(&mut self, src: &[u32]) -> Result<Generated> {
        let mut scorer = ModelScorer::new(self.params, src)?;
        let hyps = self.strategy.decode(&mut scorer, &self.config)?;
        let top = hyps
            .first()
            .ok_or_else(|| Error::invalid("decoder returned no hypotheses"))?;
        Ok(Generated {
            text: self.vocab.decode(&top.ids)?,
            score: top.score(self.config.length_penalty_alpha),
        })
    }
}

/// One evaluation item: an encoded source and its reference text.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EvalItem {
    pub src: Vec<u32>,
    pub reference: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerationEval {
    pub mode: EvalMode,
    pub report: EvalReport,
    pub predictions: Vec<Generated>,
}

/// Generates for every item and scores against the references. The two
/// modes run the same procedure; they differ in which checkpoint backs
/// `generator`.
pub fn evaluate_generation(generator: &mut dyn Generator, dataset: &[EvalItem], mode: EvalMode) -> Result<GenerationEval> {
    if dataset.is_empty() {
        return Err(Error::invalid("cannot evaluate an empty dataset"));
    }
    let predictions = dataset
        .iter()
        .map(|item| generator.generate(&item.src))
        .collect::<Result<Vec<_>>>()?;
    let texts: Vec<&str> = predictions.iter().map(|g| g.text.as_str()).collect();
    let refs: Vec<&str> = dataset.iter().map(|i| i.reference.as_str()).collect();
    Ok(GenerationEval {
        mode,
        report: evaluate_predictions(&texts, &refs)?,
        predictions,
    })
}
