use serde::{Deserialize, Serialize};

use super::records::{AnswerType, QAPair, QGExample, SummarizationExample};
use crate::error::{Error, Result};
use crate::tokenizer::{TokenSequence, Vocabulary};

/// A tokenized training pair. `tgt` holds decoder labels: the target's
/// content ids followed by `EOS`, without the leading `BOS`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncodedPair {
    pub src: Vec<u32>,
    pub tgt: Vec<u32>,
    pub src_truncated: bool,
    pub tgt_truncated: bool,
}

/// `BOS + answer span + SEP + passage + EOS`, truncated to `max_src_len`.
pub fn build_qg_input(ex: &QGExample, vocab: &Vocabulary, max_src_len: usize) -> Result<TokenSequence> {
    if ex.answer_type != AnswerType::Span {
        return Err(Error::invalid(format!(
            "question generation input needs a span answer, got {}",
            ex.answer_type.as_str()
        )));
    }
    let answer = ex.answer_text().ok_or_else(|| {
        Error::invalid(format!(
            "answer offsets {}..{} do not fit the passage",
            ex.answer_start, ex.answer_end
        ))
    })?;
    let mut content = vocab.encode_content(&answer);
    content.push(vocab.specials().sep);
    content.extend(vocab.encode_content(&ex.passage));
    vocab.wrap(content, max_src_len)
}

fn pair(src: TokenSequence, tgt: TokenSequence) -> EncodedPair {
    EncodedPair {
        tgt: tgt.ids[1..].to_vec(),
        src_truncated: src.truncated,
        tgt_truncated: tgt.truncated,
        src: src.ids,
    }
}

pub fn encode_text_pair(
    vocab: &Vocabulary,
    source: &str,
    target: &str,
    max_src_len: usize,
    max_tgt_len: usize,
) -> Result<EncodedPair> {
    Ok(pair(vocab.encode(source, max_src_len)?, vocab.encode(target, max_tgt_len)?))
}

/// Pretraining direction: answer in, question out.
pub fn encode_qa_pair(vocab: &Vocabulary, p: &QAPair, max_src_len: usize, max_tgt_len: usize) -> Result<EncodedPair> {
    encode_text_pair(vocab, &p.answer, &p.question, max_src_len, max_tgt_len)
}

pub fn encode_summarization(
    vocab: &Vocabulary,
    ex: &SummarizationExample,
    max_src_len: usize,
    max_tgt_len: usize,
) -> Result<EncodedPair> {
    encode_text_pair(vocab, &ex.document, &ex.summary, max_src_len, max_tgt_len)
}

pub fn encode_qg(vocab: &Vocabulary, ex: &QGExample, max_src_len: usize, max_tgt_len: usize) -> Result<EncodedPair> {
    Ok(pair(build_qg_input(ex, vocab, max_src_len)?, vocab.encode(&ex.question, max_tgt_len)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tokenizer::{train_bpe, BOS_ID, EOS_ID, SEP_ID};

    fn vocab() -> Vocabulary {
        train_bpe(&["x y z", "x y z"], 40).unwrap()
    }

    fn ex(passage: &str, start: usize, end: usize) -> QGExample {
        QGExample {
            passage: passage.into(),
            answer_start: start,
            answer_end: end,
            question: "what?".into(),
            answer_type: AnswerType::Span,
        }
    }

    #[test]
    fn minimal_layout() {
        let v = vocab();
        let id = |w: &str| v.encode_content(w)[0];
        let seq = build_qg_input(&ex("x y z", 2, 3), &v, 512).unwrap();
        assert_eq!(seq.ids, vec![BOS_ID, id("y"), SEP_ID, id("x"), id("y"), id("z"), EOS_ID]);
        assert!(!seq.truncated);
    }

    #[test]
    fn separator_position_at_both_boundaries() {
        let v = vocab();
        for (s, e) in [(0, 3), (2, 5)] {
            let seq = build_qg_input(&ex("x y z", s, e), &v, 512).unwrap();
            let answer_len = v.encode_content(&ex("x y z", s, e).answer_text().unwrap()).len();
            assert_eq!(answer_len, 2);
            assert_eq!(seq.ids[answer_len + 1], SEP_ID);
        }
    }

    #[test]
    fn non_span_is_rejected() {
        let mut e = ex("x y z", 0, 1);
        e.answer_type = AnswerType::Table;
        assert!(build_qg_input(&e, &vocab(), 512).is_err());
        assert!(build_qg_input(&ex("x y z", 2, 9), &vocab(), 512).is_err());
    }

    #[test]
    fn labels_drop_bos() {
        let v = vocab();
        let p = encode_text_pair(&v, "x y", "z", 16, 16).unwrap();
        assert_eq!(p.tgt, vec![v.encode_content("z")[0], EOS_ID]);
        let long = encode_text_pair(&v, "x", "z z z z z z", 16, 4).unwrap();
        assert!(long.tgt_truncated);
        assert_eq!(long.tgt.len(), 3);
    }
}
