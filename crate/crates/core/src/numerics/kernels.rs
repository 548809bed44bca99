//! Raw slice kernels shared by the pure ops and the tape.
//!
//! Every kernel computes each output element with a fixed summation order,
//! so results do not depend on how rows are split across threads.

use rayon::prelude::*;

use super::tensor::Real;

/// Minimum `m * n * k` before a matmul fans out over the rayon pool.
const PAR_THRESHOLD: usize = 1 << 18;

#[cfg(test)]
pub(crate) fn transpose<T: Real>(src: &[T], rows: usize, cols: usize) -> Vec<T> {
    let mut out = vec![T::zero(); src.len()];
    for r in 0..rows {
        for c in 0..cols {
            out[c * rows + r] = src[r * cols + c];
        }
    }
    out
}

/// `c[m,n] += op(a) @ op(b)` where `op` optionally transposes. `a` is stored
/// as `[m,k]` (or `[k,m]` when `trans_a`), `b` as `[k,n]` (or `[n,k]`).
/// Large products are split by output rows across the rayon pool; the
/// reduction order of each element does not depend on the split.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm_acc<T: Real>(
    m: usize,
    n: usize,
    k: usize,
    a: &[T],
    trans_a: bool,
    b: &[T],
    trans_b: bool,
    c: &mut [T],
) {
    assert_eq!(a.len(), m * k);
    assert_eq!(b.len(), k * n);
    assert_eq!(c.len(), m * n);
    if m == 0 || n == 0 || k == 0 {
        return;
    }
    let a_strides = if trans_a { (1, m as isize) } else { (k as isize, 1) };
    let b_strides = if trans_b { (1, k as isize) } else { (n as isize, 1) };
    let threads = rayon::current_num_threads();
    if m * n * k < PAR_THRESHOLD || threads == 1 || m < 2 * threads {
        // SAFETY: the strides address exactly the `[m,k]` / `[k,n]` views
        // whose lengths were asserted above.
        unsafe { T::gemm_strided(m, k, n, a, a_strides, b, b_strides, c) };
        return;
    }
    let rows = m.div_ceil(threads);
    c.par_chunks_mut(rows * n).enumerate().for_each(|(i, c_rows)| {
        let r0 = i * rows;
        let mr = c_rows.len() / n;
        let offset = r0 * a_strides.0 as usize;
        // SAFETY: rows `r0..r0 + mr` of `op(a)` start at `offset` and stay
        // within `a`; `b` is shared read-only.
        unsafe { T::gemm_strided(mr, k, n, &a[offset..], a_strides, b, b_strides, c_rows) };
    });
}

/// Softmax over the middle axis of an `[outer, axis_len, inner]` view.
pub(crate) fn softmax_axis<T: Real>(x: &[T], outer: usize, axis_len: usize, inner: usize) -> Vec<T> {
    let mut out = vec![T::zero(); x.len()];
    for o in 0..outer {
        let base = o * axis_len * inner;
        for i in 0..inner {
            let idx = |a: usize| base + a * inner + i;
            let mut max = T::neg_infinity();
            for a in 0..axis_len {
                max = max.max(x[idx(a)]);
            }
            let mut sum = T::zero();
            for a in 0..axis_len {
                let e = (x[idx(a)] - max).exp();
                out[idx(a)] = e;
                sum += e;
            }
            let inv = T::one() / sum;
            for a in 0..axis_len {
                out[idx(a)] *= inv;
            }
        }
    }
    out
}

/// Backward of [`softmax_axis`]: `dx = y * (dy - sum(dy * y))` along the axis.
pub(crate) fn softmax_axis_backward<T: Real>(
    y: &[T],
    dy: &[T],
    dx: &mut [T],
    outer: usize,
    axis_len: usize,
    inner: usize,
) {
    for o in 0..outer {
        let base = o * axis_len * inner;
        for i in 0..inner {
            let idx = |a: usize| base + a * inner + i;
            let mut dot = T::zero();
            for a in 0..axis_len {
                dot += dy[idx(a)] * y[idx(a)];
            }
            for a in 0..axis_len {
                dx[idx(a)] += y[idx(a)] * (dy[idx(a)] - dot);
            }
        }
    }
}

/// Layer norm over rows of width `d`. Returns `(y, xhat, rstd)`.
pub(crate) fn layer_norm_rows<T: Real>(
    x: &[T],
    gain: &[T],
    bias: &[T],
    d: usize,
    eps: T,
) -> (Vec<T>, Vec<T>, Vec<T>) {
    let rows = x.len() / d;
    let inv_d = T::one() / T::lit(d as f64);
    let mut y = vec![T::zero(); x.len()];
    let mut xhat = vec![T::zero(); x.len()];
    let mut rstd = vec![T::zero(); rows];
    for r in 0..rows {
        let xs = &x[r * d..(r + 1) * d];
        let mean = xs.iter().copied().sum::<T>() * inv_d;
        let var = xs.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() * inv_d;
        let rs = T::one() / (var + eps).sqrt();
        rstd[r] = rs;
        for j in 0..d {
            let h = (xs[j] - mean) * rs;
            xhat[r * d + j] = h;
            y[r * d + j] = h * gain[j] + bias[j];
        }
    }
    (y, xhat, rstd)
}

const GELU_COEF: f64 = 0.044_715;
// sqrt(2 / pi)
const GELU_SCALE: f64 = 0.797_884_560_802_865_4;

/// Tanh approximation of GELU.
#[inline]
fn tanh_via_exp<T: Real>(u: T) -> T {
    // libm's tanh goes through expm1 and is several times slower; the
    // absolute error of this form stays at rounding level.
    T::one() - T::lit(2.0) / ((u + u).exp() + T::one())
}

#[inline]
pub(crate) fn gelu<T: Real>(x: T) -> T {
    let c = T::lit(GELU_SCALE);
    let inner = c * (x + T::lit(GELU_COEF) * x * x * x);
    T::lit(0.5) * x * (T::one() + tanh_via_exp(inner))
}

#[inline]
pub(crate) fn gelu_grad<T: Real>(x: T) -> T {
    let c = T::lit(GELU_SCALE);
    let k = T::lit(GELU_COEF);
    let t = tanh_via_exp(c * (x + k * x * x * x));
    let half = T::lit(0.5);
    half * (T::one() + t) + half * x * (T::one() - t * t) * c * (T::one() + T::lit(3.0) * k * x * x)
}

/// Row-wise `log_softmax` value at `target`, computed as `x[t] - logsumexp(x)`.
#[inline]
pub(crate) fn log_softmax_at<T: Real>(row: &[T], target: usize) -> T {
    let max = row.iter().fold(T::neg_infinity(), |m, &v| m.max(v));
    let lse = row.iter().map(|&v| (v - max).exp()).sum::<T>().ln() + max;
    row[target] - lse
}
