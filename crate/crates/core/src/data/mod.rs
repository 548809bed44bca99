//! Corpus records, filters, statistics, model inputs and subsampling.

mod encode;
mod filter;
mod records;
mod stats;
mod subsample;
pub mod synthetic;

pub use encode::{build_qg_input, encode_qa_pair, encode_qg, encode_summarization, encode_text_pair, EncodedPair};
pub use filter::{filter_nq_examples, filter_qa_pairs, looks_english, nq_drop_reason, qa_drop_reason, FilterOutcome};
pub use records::{
    read_jsonl, read_jsonl_lenient, write_jsonl, AnswerType, Malformed, QAPair, QGExample, SummarizationExample,
};
pub use stats::{corpus_stats, CorpusStats, CorpusStatsReport};
pub use subsample::{subsample, subsample_indices, subsample_size, DEFAULT_FRACTIONS};
