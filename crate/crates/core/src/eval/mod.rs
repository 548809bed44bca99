//! Automatic metrics, corpus evaluation, Best-Worst Scaling and paired
//! significance tests.

mod bws;
mod metric;
mod overlap;
mod report;
mod significance;

pub use bws::{bws_scores, bws_tallies, BWSJudgment, BwsTally};
pub use metric::{Bleu, Metric, MetricRegistry, RougeL, RougeN};
pub use overlap::{bleu, metric_tokens, modified_precision, rouge_l_f1, rouge_n_f1};
pub use report::{
    evaluate_generation, evaluate_predictions, EvalItem, EvalMode, EvalReport, Generated, GenerationEval, Generator,
    ModelGenerator,
};
pub use significance::{paired_permutation_p, pairwise_permutation_test, write_pvalues_csv, PairPValue};
