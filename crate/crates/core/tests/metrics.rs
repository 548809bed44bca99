use std::collections::BTreeMap;

use proptest::prelude::*;
use qglab_core::eval::{
    bleu, bws_scores, bws_tallies, evaluate_predictions, modified_precision, paired_permutation_p,
    pairwise_permutation_test, rouge_l_f1, rouge_n_f1, BWSJudgment,
};

const TOL: f64 = 1e-9;

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= TOL
}

#[test]
fn rouge_hand_values() {
    assert!(close(rouge_n_f1("the cat", "the cat sat", 1), 0.8));
    assert!(close(rouge_n_f1("the cat sat", "the cat sat down", 2), 0.8));
    assert!(close(rouge_l_f1("a c d", "a b c d"), 6.0 / 7.0));
    assert_eq!(rouge_n_f1("red green", "blue yellow", 1), 0.0);
    assert_eq!(rouge_l_f1("", "a b"), 0.0);
    assert_eq!(rouge_n_f1("one", "one", 2), 0.0);
}

#[test]
fn clipped_unigram_precision() {
    assert!(close(modified_precision("the the the", "the cat", 1), 1.0 / 3.0));
}

#[test]
fn brevity_penalty_by_hand() {
    let b = bleu(&["the cat sat"], &["the cat sat on the mat"], 4).unwrap();
    let bp = (1.0_f64 - 6.0 / 3.0).exp();
    assert!(close(b[0], bp) && close(b[1], bp) && close(b[2], bp));
    assert_eq!(b[3], 0.0);
}

#[test]
fn corpus_bleu_by_hand() {
    let cands = ["the cat sat on the mat", "a dog"];
    let refs = ["the cat is on the mat", "a dog barked"];
    let b = bleu(&cands, &refs, 4).unwrap();
    // c = 8, r = 9; p1 = 7/8, p2 = 4/6, p3 = 1/4, p4 = 0/3
    let bp = (1.0_f64 - 9.0 / 8.0).exp();
    let p = [7.0 / 8.0, 4.0 / 6.0, 1.0 / 4.0];
    assert!(close(b[0], bp * p[0]));
    assert!(close(b[1], bp * (p[0] * p[1]).sqrt()));
    assert!(close(b[2], bp * (p[0] * p[1] * p[2]).cbrt()));
    assert_eq!(b[3], 0.0);
}

#[test]
fn report_is_the_mean_of_per_example_scores() {
    let preds = ["the cat sat", "a dog ran home", "red sky", "", "one two three four"];
    let refs = ["the cat sat down", "the dog ran", "red sky at night", "nothing here", "one three two four"];
    let report = evaluate_predictions(&preds, &refs).unwrap();
    let mean = |f: &dyn Fn(&str, &str) -> f64| preds.iter().zip(&refs).map(|(p, r)| f(p, r)).sum::<f64>() / 5.0;
    assert!(close(report.rouge1_f1, mean(&|p, r| rouge_n_f1(p, r, 1))));
    assert!(close(report.rouge2_f1, mean(&|p, r| rouge_n_f1(p, r, 2))));
    assert!(close(report.rouge_l_f1, mean(&rouge_l_f1)));
}

fn judgment(best: &str, worst: &str, shown: &[&str], tie: bool) -> BWSJudgment {
    BWSJudgment {
        item_id: "item".into(),
        system_best: best.into(),
        system_worst: worst.into(),
        annotator_id: "ann".into(),
        tie,
        systems: Some(shown.iter().map(|s| s.to_string()).collect()),
    }
}

#[test]
fn bws_thirty_nine_three() {
    let mut js = Vec::new();
    let shown = ["a", "b", "c"];
    js.extend((0..9).map(|_| judgment("a", "b", &shown, false)));
    js.extend((0..3).map(|_| judgment("b", "a", &shown, false)));
    js.extend((0..18).map(|_| judgment("b", "c", &shown, false)));
    let tallies = bws_tallies(&js);
    assert_eq!((tallies["a"].appearances, tallies["a"].best, tallies["a"].worst), (30, 9, 3));
    let scores = bws_scores(&js, &[]);
    assert!(close(scores["a"], 0.2));
}

#[test]
fn bws_ties_and_unknown_systems() {
    let js = vec![judgment("a", "a", &["a", "b"], true), judgment("a", "b", &["a", "b"], false)];
    let scores = bws_scores(&js, &["a".to_string(), "b".to_string(), "ghost".to_string()]);
    assert!(close(scores["a"], 0.5));
    assert!(close(scores["b"], -0.5));
    assert!(!scores.contains_key("ghost"));
}

fn arb_judgments() -> impl Strategy<Value = Vec<BWSJudgment>> {
    let names = ["s0", "s1", "s2", "s3", "s4"];
    prop::collection::vec((0usize..5, 1usize..5, 0usize..5, any::<bool>()), 1..60).prop_map(move |raw| {
        raw.into_iter()
            .map(|(best, offset, extra, tie)| {
                let worst = (best + offset) % 5;
                let mut shown = vec![names[best], names[worst]];
                if extra != best && extra != worst {
                    shown.push(names[extra]);
                }
                judgment(names[best], names[worst], &shown, tie)
            })
            .collect()
    })
}

proptest! {
    #[test]
    fn bws_scores_stay_in_range(js in arb_judgments()) {
        for (_, s) in bws_scores(&js, &[]) {
            prop_assert!((-1.0..=1.0).contains(&s));
        }
        let tallies = bws_tallies(&js);
        let non_tie = js.iter().filter(|j| !j.tie).count();
        prop_assert_eq!(tallies.values().map(|t| t.best).sum::<usize>(), non_tie);
        prop_assert_eq!(tallies.values().map(|t| t.worst).sum::<usize>(), non_tie);
    }

    #[test]
    fn overlap_metrics_are_bounded_and_case_blind(
        c in "[a-dA-D ]{0,24}",
        r in "[a-dA-D ]{0,24}",
    ) {
        for n in 1..=2 {
            let s = rouge_n_f1(&c, &r, n);
            prop_assert!((0.0..=1.0).contains(&s));
            prop_assert_eq!(s, rouge_n_f1(&c.to_uppercase(), &r.to_lowercase(), n));
        }
        let l = rouge_l_f1(&c, &r);
        prop_assert!((0.0..=1.0).contains(&l));
        let b = bleu(&[c.as_str()], &[r.as_str()], 4).unwrap();
        prop_assert!(b.iter().all(|x| (0.0..=1.0).contains(x)));
        prop_assert_eq!(b, bleu(&[c.to_uppercase().as_str()], &[r.as_str()], 4).unwrap());
    }

    #[test]
    fn self_overlap_is_perfect(words in prop::collection::vec("[a-z]{1,5}", 4..12)) {
        let text = words.join(" ");
        prop_assert!(close(rouge_n_f1(&text, &text, 1), 1.0));
        prop_assert!(close(rouge_n_f1(&text, &text, 2), 1.0));
        prop_assert!(close(rouge_l_f1(&text, &text), 1.0));
        let b = bleu(&[text.as_str()], &[text.as_str()], 4).unwrap();
        prop_assert!(b.iter().all(|x| close(*x, 1.0)));
    }
}

#[test]
fn three_items_match_all_eight_sign_flips() {
    let a = [0.9, 0.4, 0.7];
    let b = [0.5, 0.6, 0.1];
    // differences 0.4, -0.2, 0.6; flipped sums with |s| >= 0.8 are
    // +0.8, +1.2, -1.2, -0.8, so 4 of 8
    let p = paired_permutation_p(&a, &b, 10_000, 0).unwrap();
    assert!(close(p, 0.5));

    let d: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
    let observed: f64 = d.iter().sum::<f64>().abs();
    let mut hits = 0;
    for s0 in [1.0, -1.0] {
        for s1 in [1.0, -1.0] {
            for s2 in [1.0, -1.0] {
                let s: f64 = s0 * d[0] + s1 * d[1] + s2 * d[2];
                if s.abs() >= observed - 1e-12 {
                    hits += 1;
                }
            }
        }
    }
    assert!(close(p, hits as f64 / 8.0));
}

#[test]
fn pairwise_p_values_are_symmetric_and_seeded() {
    let mut scores = BTreeMap::new();
    scores.insert("x".to_string(), (0..40).map(|i| (i % 7) as f64 / 7.0).collect::<Vec<_>>());
    scores.insert("y".to_string(), (0..40).map(|i| (i % 5) as f64 / 5.0).collect::<Vec<_>>());
    scores.insert("z".to_string(), vec![0.0; 40]);
    let first = pairwise_permutation_test(&scores, 2000, 9).unwrap();
    assert_eq!(first, pairwise_permutation_test(&scores, 2000, 9).unwrap());
    assert_eq!(first.len(), 3);
    for row in &first {
        assert!((0.0..=1.0).contains(&row.p_value));
        let a = &scores[&row.system_a];
        let b = &scores[&row.system_b];
        let swapped = paired_permutation_p(b, a, 2000, 9).unwrap();
        let forward = paired_permutation_p(a, b, 2000, 9).unwrap();
        assert_eq!(forward, swapped);
    }
    let z = &scores["z"];
    let far: Vec<f64> = vec![1.0; 40];
    assert!(paired_permutation_p(&far, z, 10_000, 1).unwrap() < 1e-3);
}
