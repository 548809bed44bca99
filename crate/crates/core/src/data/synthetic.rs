//! Generator for a small synthetic corpus with a known relation between
//! question generation and summarization.
//!
//! Every document opens with one salient fact followed by filler sentences.
//! A question asks about the salient fact and a summary restates it, both
//! with the same paraphrase, so a model that learned to ask questions about
//! a passage has already learned most of what summarization needs.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::records::{QAPair, SummarizationExample};

const SUBJECTS: &[&str] = &[
    "alice", "bruno", "carla", "dmitri", "elena", "farid", "greta", "hiro", "ines", "jonas",
    "kofi", "lena", "marco", "nadia", "oscar", "priya", "quentin", "rosa", "sven", "tara",
];

const PLACES: &[&str] = &[
    "paris", "lima", "oslo", "cairo", "tokyo", "quito", "dublin", "hanoi", "lagos", "porto",
    "vienna", "delhi", "bergen", "austin", "kyoto", "malmo", "seville", "zurich", "perth", "accra",
];

struct Relation {
    fact: &'static str,
    question: &'static str,
    summary: &'static str,
}

const RELATIONS: &[Relation] = &[
    Relation {
        fact: "{s} lives in {o} .",
        question: "is {o} home to {s} ?",
        summary: "{o} is home to {s} .",
    },
    Relation {
        fact: "{s} works at the office in {o} .",
        question: "does {o} employ {s} ?",
        summary: "{o} employs {s} .",
    },
    Relation {
        fact: "{s} travelled to {o} last year .",
        question: "was {o} visited by {s} ?",
        summary: "{o} was visited by {s} .",
    },
    Relation {
        fact: "{s} bought a house near {o} .",
        question: "does {s} own a house near {o} ?",
        summary: "{s} owns a house near {o} .",
    },
];

const FILLERS: &[&str] = &[
    "the weather was mild .",
    "many people came to watch .",
    "the market opened early .",
    "nobody expected the rain .",
    "the trains ran on time .",
    "a new bridge was built .",
    "prices rose during the spring .",
    "the museum was closed .",
];

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub qa_pairs: usize,
    pub train: usize,
    pub test: usize,
    pub fillers: usize,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            qa_pairs: 2000,
            train: 200,
            test: 40,
            fillers: 2,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SyntheticCorpus {
    pub qa: Vec<QAPair>,
    pub train: Vec<SummarizationExample>,
    pub test: Vec<SummarizationExample>,
}

impl SyntheticCorpus {
    /// Every text in the corpus, for building a vocabulary.
    pub fn texts(&self) -> Vec<&str> {
        let mut out = Vec::new();
        for p in &self.qa {
            out.push(p.question.as_str());
            out.push(p.answer.as_str());
        }
        for ex in self.train.iter().chain(&self.test) {
            out.push(ex.document.as_str());
            out.push(ex.summary.as_str());
        }
        out
    }
}

struct Sample {
    passage: String,
    question: String,
    summary: String,
}

fn fill(template: &str, s: &str, o: &str) -> String {
    template.replace("{s}", s).replace("{o}", o)
}

fn sample(rng: &mut ChaCha8Rng, fillers: usize) -> Sample {
    let s = SUBJECTS.choose(rng).unwrap();
    let o = PLACES.choose(rng).unwrap();
    let rel = RELATIONS.choose(rng).unwrap();
    let mut passage = fill(rel.fact, s, o);
    for f in FILLERS.choose_multiple(rng, fillers) {
        passage.push(' ');
        passage.push_str(f);
    }
    Sample {
        passage,
        question: fill(rel.question, s, o),
        summary: fill(rel.summary, s, o),
    }
}

pub fn synthetic_corpus(spec: &SyntheticSpec) -> SyntheticCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let qa = (0..spec.qa_pairs)
        .map(|_| {
            let x = sample(&mut rng, spec.fillers);
            QAPair {
                question: x.question,
                answer: x.passage,
                rating: rng.random_range(1..=20),
                lang: Some("en".into()),
                source: "synthetic".into(),
            }
        })
        .collect();
    let mut summaries = |n: usize| -> Vec<SummarizationExample> {
        (0..n)
            .map(|_| {
                let x = sample(&mut rng, spec.fillers);
                SummarizationExample {
                    document: x.passage,
                    summary: x.summary,
                }
            })
            .collect()
    };
    let train = summaries(spec.train);
    let test = summaries(spec.test);
    SyntheticCorpus { qa, train, test }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_sized() {
        let spec = SyntheticSpec {
            qa_pairs: 30,
            train: 10,
            test: 5,
            fillers: 2,
            seed: 4,
        };
        let a = synthetic_corpus(&spec);
        let b = synthetic_corpus(&spec);
        assert_eq!(a.qa, b.qa);
        assert_eq!(a.train, b.train);
        assert_eq!((a.qa.len(), a.train.len(), a.test.len()), (30, 10, 5));
        assert!(a.qa.iter().all(|p| p.question.ends_with('?') && p.rating >= 1));
    }

    #[test]
    fn summary_restates_the_lead_sentence() {
        let c = synthetic_corpus(&SyntheticSpec::default());
        for ex in &c.train {
            let lead: Vec<&str> = ex.document.split(" . ").next().unwrap().split(' ').collect();
            assert!(lead.iter().any(|w| SUBJECTS.contains(w)));
            let subject = lead[0];
            assert!(ex.summary.contains(subject));
        }
    }
}
