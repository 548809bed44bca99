//! Value-level entry points for the differentiable ops, for callers that do
//! not need gradients.

use super::tape::Tape;
use super::tensor::{Real, Tensor};
use crate::error::{Error, Result};

pub fn softmax<T: Real>(x: &Tensor<T>, axis: usize) -> Result<Tensor<T>> {
    let mut tape = Tape::new();
    let v = tape.constant(x.clone());
    let out = tape.softmax(v, axis)?;
    Ok(tape.value(out).clone())
}

pub fn layer_norm<T: Real>(
    x: &Tensor<T>,
    gain: &Tensor<T>,
    bias: &Tensor<T>,
    eps: T,
) -> Result<Tensor<T>> {
    let mut tape = Tape::new();
    let (xv, gv, bv) = (
        tape.constant(x.clone()),
        tape.constant(gain.clone()),
        tape.constant(bias.clone()),
    );
    let out = tape.layer_norm(xv, gv, bv, eps)?;
    Ok(tape.value(out).clone())
}

/// Mean negative log-likelihood of `targets` (one row of ids per batch
/// element) under `logits` shaped `[batch, time, vocab]`, skipping `pad_id`.
pub fn cross_entropy_loss<T: Real>(logits: &Tensor<T>, targets: &[Vec<u32>], pad_id: u32) -> Result<T> {
    let shape = logits.shape();
    if shape.len() != 3 {
        return Err(Error::invalid(format!(
            "logits must be [batch, time, vocab], got {shape:?}"
        )));
    }
    if targets.len() != shape[0] || targets.iter().any(|row| row.len() != shape[1]) {
        return Err(Error::invalid("targets do not match the logits batch/time shape"));
    }
    let flat: Vec<u32> = targets.iter().flatten().copied().collect();
    let mut tape = Tape::new();
    let l = tape.constant(logits.clone());
    let loss = tape.cross_entropy(l, &flat, pad_id)?;
    Ok(tape.value(loss).data()[0])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: Vec<usize>, data: &[f64]) -> Tensor<f64> {
        Tensor::from_f64(shape, data).unwrap()
    }

    /// Scalar reference softmax.
    fn softmax_ref(xs: &[f64]) -> Vec<f64> {
        let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = xs.iter().map(|x| (x - m).exp()).collect();
        let s: f64 = e.iter().sum();
        e.iter().map(|x| x / s).collect()
    }

    #[test]
    fn softmax_examples() {
        let out = softmax(&t(vec![2], &[0.0, 0.0]), 0).unwrap();
        assert_eq!(out.data(), &[0.5, 0.5]);

        let out = softmax(&t(vec![3], &[1000.0, 1000.0, 1000.0]), 0).unwrap();
        for &v in out.data() {
            assert!((v - 1.0 / 3.0).abs() < 1e-12);
        }

        let out = softmax(&t(vec![3], &[1.0, 2.0, 3.0]), 0).unwrap();
        for (a, b) in out.data().iter().zip(softmax_ref(&[1.0, 2.0, 3.0])) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn softmax_along_inner_axis() {
        let x = t(vec![2, 3], &[1.0, 5.0, -2.0, 0.5, 0.5, 9.0]);
        let out = softmax(&x, 0).unwrap();
        for c in 0..3 {
            let want = softmax_ref(&[x.data()[c], x.data()[3 + c]]);
            assert!((out.data()[c] - want[0]).abs() < 1e-12);
            assert!((out.data()[3 + c] - want[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn softmax_rejects_bad_axis() {
        assert!(matches!(
            softmax(&t(vec![2], &[0.0, 1.0]), 1),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn layer_norm_examples() {
        let ones = t(vec![4], &[1.0; 4]);
        let zeros = t(vec![4], &[0.0; 4]);
        let out = layer_norm(&t(vec![4], &[5.0; 4]), &ones, &zeros, 1e-5).unwrap();
        assert_eq!(out.data(), &[0.0; 4]);

        let bias = t(vec![4], &[0.5, -1.0, 2.0, 3.0]);
        let out = layer_norm(&t(vec![4], &[3.0, -7.0, 1.0, 8.0]), &zeros, &bias, 1e-5).unwrap();
        assert_eq!(out.data(), bias.data());

        // Scalar reference.
        let xs = [1.0, 2.0, 3.0, 4.0];
        let mean = 2.5;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / 4.0;
        let out = layer_norm(&t(vec![4], &xs), &ones, &zeros, 1e-5).unwrap();
        for (o, x) in out.data().iter().zip(xs) {
            assert!((o - (x - mean) / (var + 1e-5f64).sqrt()).abs() < 1e-7);
        }
    }

    #[test]
    fn layer_norm_shape_mismatch() {
        let x = t(vec![2, 4], &[0.0; 8]);
        let g = t(vec![3], &[1.0; 3]);
        assert!(layer_norm(&x, &g, &g, 1e-5).is_err());
    }

    #[test]
    fn cross_entropy_examples() {
        // Perfect prediction.
        let mut data = vec![-1e4; 2 * 3];
        data[1] = 1e4;
        data[3 + 2] = 1e4;
        let logits = t(vec![1, 2, 3], &data);
        let loss = cross_entropy_loss(&logits, &[vec![1, 2]], 0).unwrap();
        assert!(loss.abs() < 1e-12);

        // Uniform logits give ln V.
        let logits = t(vec![2, 2, 5], &[0.3; 20]);
        let loss = cross_entropy_loss(&logits, &[vec![1, 2], vec![3, 4]], 0).unwrap();
        assert!((loss - 5f64.ln()).abs() < 1e-12);

        // Half the positions padded: hand-masked mean over the rest.
        let rows = [[0.1, 2.0, -1.0], [0.5, 0.5, 3.0], [1.0, -2.0, 0.0], [4.0, 1.0, 1.0]];
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        let logits = t(vec![2, 2, 3], &flat);
        let targets = vec![vec![1, 0], vec![2, 0]];
        let nll = |row: &[f64; 3], k: usize| {
            let lse = row.iter().map(|x| x.exp()).sum::<f64>().ln();
            lse - row[k]
        };
        let want = (nll(&rows[0], 1) + nll(&rows[2], 2)) / 2.0;
        let got = cross_entropy_loss(&logits, &targets, 0).unwrap();
        assert!((got - want).abs() < 1e-12);
    }

    #[test]
    fn cross_entropy_all_pad_is_an_error() {
        let logits = t(vec![1, 2, 3], &[0.0; 6]);
        assert!(matches!(
            cross_entropy_loss(&logits, &[vec![0, 0]], 0),
            Err(Error::UndefinedMean)
        ));
    }
}
