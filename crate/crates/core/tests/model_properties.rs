use qglab_core::data::EncodedPair;
use qglab_core::model::{ModelConfig, SeqToSeqParams};
use qglab_core::numerics::{Tape, Tensor};
use qglab_core::training::batch_gradients;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn small_config() -> ModelConfig {
    ModelConfig {
        num_layers: 2,
        hidden_size: 16,
        filter_size: 32,
        num_heads: 2,
        vocab_size: 50,
        max_src_len: 12,
        max_tgt_len: 8,
    }
}

fn loss_of(p: &SeqToSeqParams<f64>, src: &[&[u32]], tgt: &[&[u32]]) -> f64 {
    let mut tape = Tape::new();
    let bound = p.bind(&mut tape, false);
    let l = p.loss(&mut tape, &bound, src, tgt).unwrap();
    tape.value(l).data()[0]
}

fn row(logits: &Tensor<f64>, b: usize, t: usize) -> &[f64] {
    let (time, vocab) = (logits.shape()[1], logits.shape()[2]);
    let start = (b * time + t) * vocab;
    &logits.data()[start..start + vocab]
}

fn log_softmax(row: &[f64]) -> Vec<f64> {
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + row.iter().map(|x| (x - max).exp()).sum::<f64>().ln();
    row.iter().map(|x| x - lse).collect()
}

#[test]
fn decoder_is_causal() {
    let p = SeqToSeqParams::<f64>::init(&small_config(), 3).unwrap();
    let src: &[u32] = &[1, 9, 10, 11, 2];
    let a: &[u32] = &[20, 21, 22, 23, 2];
    for j in 0..a.len() {
        let mut b = a.to_vec();
        b[j] = 30;
        let la = p.forward(&[src], &[a]).unwrap();
        let lb = p.forward(&[src], &[&b]).unwrap();
        for t in 0..=j {
            assert_eq!(row(&la, 0, t), row(&lb, 0, t), "label {j} leaked into position {t}");
        }
        if j + 1 < a.len() {
            assert_ne!(row(&la, 0, j + 1), row(&lb, 0, j + 1));
        }
    }
}

#[test]
fn padding_and_batch_order_do_not_change_an_example() {
    let p = SeqToSeqParams::<f64>::init(&small_config(), 4).unwrap();
    let (s1, t1): (&[u32], &[u32]) = (&[1, 7, 8, 2], &[12, 2]);
    let (s2, t2): (&[u32], &[u32]) = (&[1, 5, 6, 7, 8, 9, 10, 2], &[13, 14, 15, 2]);
    let alone = p.forward(&[s1], &[t1]).unwrap();
    let batched = p.forward(&[s2, s1], &[t2, t1]).unwrap();
    let swapped = p.forward(&[s1, s2], &[t1, t2]).unwrap();
    for t in 0..t1.len() {
        for (x, y) in row(&alone, 0, t).iter().zip(row(&batched, 1, t)) {
            assert!((x - y).abs() < 1e-12);
        }
        for (x, y) in row(&alone, 0, t).iter().zip(row(&swapped, 0, t)) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}

#[test]
fn loss_averages_only_real_target_positions() {
    let p = SeqToSeqParams::<f64>::init(&small_config(), 5).unwrap();
    let src: [&[u32]; 2] = [&[1, 7, 8, 2], &[1, 9, 2]];
    let tgt: [&[u32]; 2] = [&[12, 13, 14, 2], &[15, 2]];
    let logits = p.forward(&src, &tgt).unwrap();
    let mut total = 0.0;
    let mut count = 0;
    for (b, labels) in tgt.iter().enumerate() {
        for (t, &y) in labels.iter().enumerate() {
            total -= log_softmax(row(&logits, b, t))[y as usize];
            count += 1;
        }
    }
    assert_eq!(count, 6);
    assert!((loss_of(&p, &src, &tgt) - total / count as f64).abs() < 1e-12);
}

#[test]
fn sampled_gradients_match_central_differences() {
    let p = SeqToSeqParams::<f64>::init(&small_config(), 6).unwrap();
    let pairs = [
        EncodedPair {
            src: vec![1, 10, 11, 12, 2],
            tgt: vec![20, 21, 2],
            src_truncated: false,
            tgt_truncated: false,
        },
        EncodedPair {
            src: vec![1, 13, 2],
            tgt: vec![22, 23, 24, 25, 2],
            src_truncated: false,
            tgt_truncated: false,
        },
    ];
    let refs: Vec<&EncodedPair> = pairs.iter().collect();
    let (_, grads) = batch_gradients(&p, &refs).unwrap();
    let src: Vec<&[u32]> = pairs.iter().map(|x| x.src.as_slice()).collect();
    let tgt: Vec<&[u32]> = pairs.iter().map(|x| x.tgt.as_slice()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    // truncation error is about 1e-10 of the gradient scale here
    let h = 1e-5;
    for id in 0..p.len() {
        let n = p.tensor(id).len();
        for _ in 0..4 {
            let i = rng.random_range(0..n);
            let numeric = central_difference(&p, id, i, h, &src, &tgt);
            let analytic = grads[id][i];
            let scale = analytic.abs().max(numeric.abs()).max(1e-4);
            assert!(
                (analytic - numeric).abs() / scale < 1e-6,
                "{}[{i}]: autodiff {analytic} vs difference {numeric}",
                p.name(id)
            );
        }
    }

    // the discrepancy is pure truncation error: it shrinks as h^2
    let id = p.id("layer.0.self_attn.output.bias").unwrap();
    let errors: Vec<f64> = [1e-2, 1e-3, 1e-4]
        .iter()
        .map(|&h| (central_difference(&p, id, 14, h, &src, &tgt) - grads[id][14]).abs())
        .collect();
    for w in errors.windows(2) {
        let ratio = w[0] / w[1];
        assert!((80.0..120.0).contains(&ratio), "error ratio {ratio}");
    }
}

fn central_difference(p: &SeqToSeqParams<f64>, id: usize, i: usize, h: f64, src: &[&[u32]], tgt: &[&[u32]]) -> f64 {
    let mut plus = p.clone();
    plus.tensor_mut(id).data_mut()[i] += h;
    let mut minus = p.clone();
    minus.tensor_mut(id).data_mut()[i] -= h;
    (loss_of(&plus, src, tgt) - loss_of(&minus, src, tgt)) / (2.0 * h)
}
