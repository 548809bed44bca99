use std::path::PathBuf;

use qglab_core::data::{
    build_qg_input, corpus_stats, filter_nq_examples, filter_qa_pairs, read_jsonl, read_jsonl_lenient, subsample,
    subsample_indices, QAPair, QGExample,
};
use qglab_core::tokenizer::{Vocabulary, BOS_ID, EOS_ID, SEP_ID};
use qglab_core::Error;
use proptest::prelude::*;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

#[test]
fn qa_fixture_keeps_the_four_qualifying_records_in_order() {
    let records = read_jsonl_lenient::<QAPair>(fixture("raw_qa.jsonl")).unwrap();
    let out = filter_qa_pairs(records);
    let kept: Vec<&str> = out.kept.iter().map(|p| p.question.as_str()).collect();
    assert_eq!(
        kept,
        [
            "How do I reset my router?",
            "What is the capital of Peru?",
            "Can cats see in the dark?",
            "How long should I boil an egg?",
        ]
    );
    let drops: Vec<(&str, usize)> = out.drops.iter().map(|(k, v)| (k.as_str(), *v)).collect();
    assert_eq!(drops, [("empty", 1), ("malformed", 2), ("non_english", 2), ("unrated", 1)]);
    assert_eq!(out.total, 10);
    assert_eq!(out.kept.len() + out.dropped(), out.total);
}

#[test]
fn nq_fixture_keeps_only_paragraph_spans() {
    let records: Vec<QGExample> = read_jsonl(fixture("nq_examples.jsonl")).unwrap();
    assert_eq!(records.len(), 12);
    let out = filter_nq_examples(records);
    let kept: Vec<&str> = out.kept.iter().map(|e| e.question.as_str()).collect();
    assert_eq!(
        kept,
        [
            "where does the amazon river end",
            "when did marie curie win her first nobel prize",
            "what is the highest mountain in africa",
        ]
    );
    let drops: Vec<(&str, usize)> = out.drops.iter().map(|(k, v)| (k.as_str(), *v)).collect();
    assert_eq!(drops, [("list", 3), ("table", 3), ("yes_no", 3)]);
    assert_eq!(out.kept.len() + out.dropped(), 12);
}

#[test]
fn twenty_pair_stats_match_the_hand_count() {
    let pairs: Vec<QAPair> = read_jsonl(fixture("qa_stats_20.jsonl")).unwrap();
    let mut reader = csv::Reader::from_path(fixture("qa_stats_20.counts.csv")).unwrap();
    let counts: Vec<(usize, usize)> = reader.deserialize().map(|r| r.unwrap()).collect();
    assert_eq!(counts.len(), 20);
    let q: usize = counts.iter().map(|c| c.0).sum();
    let a: usize = counts.iter().map(|c| c.1).sum();
    let stats = corpus_stats(&pairs, None).unwrap();
    assert_eq!(stats.count, 20);
    assert!((stats.avg_question_tokens - q as f64 / 20.0).abs() < 1e-12);
    assert!((stats.avg_answer_tokens - a as f64 / 20.0).abs() < 1e-12);
    assert!((stats.avg_question_tokens - 6.1).abs() < 1e-12);
    assert!((stats.avg_answer_tokens - 9.15).abs() < 1e-12);
}

#[test]
fn empty_stream_has_no_stats() {
    assert!(matches!(corpus_stats(&[], None), Err(Error::UndefinedStats)));
}

/// A vocabulary holding each word as one token, built by chaining merges
/// from its first letter.
fn word_vocab(words: &[&str]) -> Vocabulary {
    let mut tokens: Vec<String> = ["<pad>", "<s>", "</s>", "<unk>", "<sep>"].map(String::from).to_vec();
    let mut merges: Vec<[String; 2]> = Vec::new();
    let push = |tokens: &mut Vec<String>, t: String| {
        if !tokens.contains(&t) {
            tokens.push(t);
        }
    };
    for w in words {
        let chars: Vec<char> = w.chars().collect();
        for &c in &chars[1..] {
            push(&mut tokens, c.to_string());
        }
        let mut acc = format!("\u{2581}{}", chars[0]);
        push(&mut tokens, acc.clone());
        for &c in &chars[1..] {
            let merge = [acc.clone(), c.to_string()];
            acc.push(c);
            push(&mut tokens, acc.clone());
            if !merges.contains(&merge) {
                merges.push(merge);
            }
        }
    }
    let json = serde_json::json!({
        "tokens": tokens,
        "merges": merges,
        "specials": {"pad": 0, "bos": 1, "eos": 2, "unk": 3, "sep": 4},
    });
    Vocabulary::from_json(&json.to_string()).unwrap()
}

const SQUAD_TRACE: [&str; 55] = [
    "super", "bowl", "50", "was", "an", "american", "football", "game", "to", "determine", "the", "champion", "of",
    "the", "national", "football", "league", "(", "nfl", ")", "for", "the", "2015", "season", ".", "the", "american",
    "football", "conference", "(", "afc", ")", "champion", "denver", "broncos", "defeated", "the", "national",
    "football", "conference", "(", "nfc", ")", "champion", "carolina", "panthers", "24", "\u{2013}", "10", "to",
    "earn", "their", "third", "super", "bowl",
];

#[test]
fn squad_record_matches_the_hand_encoded_trace() {
    let ex: QGExample = serde_json::from_str(&std::fs::read_to_string(fixture("squad_example.json")).unwrap()).unwrap();
    let mut words: Vec<&str> = SQUAD_TRACE.to_vec();
    words.push("title");
    let vocab = word_vocab(&words);
    let id = |w: &str| vocab.id(&format!("\u{2581}{w}")).unwrap();

    let mut expected = vec![BOS_ID, id("denver"), id("broncos"), SEP_ID];
    expected.extend(SQUAD_TRACE.iter().map(|w| id(w)));
    expected.extend([id("title"), id("."), EOS_ID]);
    let seq = build_qg_input(&ex, &vocab, 512).unwrap();
    assert_eq!(seq.ids, expected);
    assert!(!seq.truncated);

    let short = build_qg_input(&ex, &vocab, 8).unwrap();
    assert_eq!(short.ids, [BOS_ID, id("denver"), id("broncos"), SEP_ID, id("super"), id("bowl"), id("50"), id("was")]);
    assert!(short.truncated);
}

#[test]
fn subsamples_are_nested_across_fractions() {
    let data: Vec<usize> = (0..200).collect();
    let mut previous: Vec<usize> = Vec::new();
    for f in [0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0] {
        let s = subsample(&data, f, 11).unwrap();
        assert_eq!(s.len(), (f * 200.0_f64).ceil() as usize);
        assert!(previous.iter().all(|x| s.contains(x)));
        previous = s;
    }
    assert_eq!(previous, data);
}

proptest! {
    #[test]
    fn subsample_indices_are_sorted_unique_and_sized(n in 1usize..400, f in 0.001f64..=1.0, seed in 0u64..1000) {
        let idx = subsample_indices(n, f, seed).unwrap();
        prop_assert_eq!(idx.len(), ((f * n as f64) - 1e-9).ceil() as usize);
        prop_assert!(idx.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(idx.iter().all(|&i| i < n));
    }
}
