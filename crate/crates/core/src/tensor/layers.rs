//! Forward and backward kernels for the feed-forward layers.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Activation, Real};

pub fn softmax_rows<T: Real>(data: &mut [T], width: usize) {
    for row in data.chunks_mut(width) {
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let mut sum = T::zero();
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
}

fn sigmoid<T: Real>(x: T) -> T {
    // Split on sign so exp never overflows.
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

pub(crate) fn sigmoid_scalar<T: Real>(x: T) -> T {
    sigmoid(x)
}

/// In-place activation; softmax works on rows of `width` values.
pub fn apply_activation<T: Real>(kind: Activation, data: &mut [T], width: usize) {
    match kind {
        Activation::Identity => {}
        Activation::Relu => data.iter_mut().for_each(|v| *v = v.max(T::zero())),
        Activation::Sigmoid => data.iter_mut().for_each(|v| *v = sigmoid(*v)),
        Activation::Tanh => data.iter_mut().for_each(|v| *v = v.tanh()),
        Activation::Softmax => softmax_rows(data, width),
    }
}

/// Turns the gradient w.r.t. an activation's output into the gradient
/// w.r.t. its input, using only the output values.
pub(crate) fn activation_backward<T: Real>(kind: Activation, out: &[T], grad: &mut [T], width: usize) {
    match kind {
        Activation::Identity => {}
        Activation::Relu => {
            for (g, &y) in grad.iter_mut().zip(out) {
                if y <= T::zero() {
                    *g = T::zero();
                }
            }
        }
        Activation::Sigmoid => {
            for (g, &y) in grad.iter_mut().zip(out) {
                *g *= y * (T::one() - y);
            }
        }
        Activation::Tanh => {
            for (g, &y) in grad.iter_mut().zip(out) {
                *g *= T::one() - y * y;
            }
        }
        Activation::Softmax => {
            for (g, y) in grad.chunks_mut(width).zip(out.chunks(width)) {
                let dot: T = g.iter().zip(y).map(|(&a, &b)| a * b).sum();
                for (gi, &yi) in g.iter_mut().zip(y) {
                    *gi = yi * (*gi - dot);
                }
            }
        }
    }
}

/// Valid cross-correlation over the length axis.
/// `x`: B×L×Cin, `w`: Cout×K×Cin, `b`: Cout → B×(L−K+1)×Cout (pre-activation).
pub(crate) fn conv1d_forward<T: Real>(
    x: &[T],
    w: &[T],
    b: &[T],
    batch: usize,
    len: usize,
    c_in: usize,
    c_out: usize,
    k: usize,
) -> Vec<T> {
    let out_len = len - k + 1;
    let win = k * c_in;
    let mut out = vec![T::zero(); batch * out_len * c_out];
    for bi in 0..batch {
        let xb = &x[bi * len * c_in..(bi + 1) * len * c_in];
        for t in 0..out_len {
            let window = &xb[t * c_in..t * c_in + win];
            let row = &mut out[(bi * out_len + t) * c_out..(bi * out_len + t + 1) * c_out];
            for (o, r) in row.iter_mut().enumerate() {
                let kern = &w[o * win..(o + 1) * win];
                *r = b[o] + dot(window, kern);
            }
        }
    }
    out
}

/// Accumulates into `dx`, `dw`, `db` given the pre-activation gradient `g`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn conv1d_backward<T: Real>(
    x: &[T],
    w: &[T],
    g: &[T],
    batch: usize,
    len: usize,
    c_in: usize,
    c_out: usize,
    k: usize,
    mut dx: Option<&mut [T]>,
    mut dw: Option<&mut [T]>,
    mut db: Option<&mut [T]>,
) {
    let out_len = len - k + 1;
    let win = k * c_in;
    for bi in 0..batch {
        for t in 0..out_len {
            let base = bi * len * c_in + t * c_in;
            let grow = &g[(bi * out_len + t) * c_out..(bi * out_len + t + 1) * c_out];
            for (o, &go) in grow.iter().enumerate() {
                if go == T::zero() {
                    continue;
                }
                if let Some(db) = db.as_deref_mut() {
                    db[o] += go;
                }
                if let Some(dw) = dw.as_deref_mut() {
                    axpy(go, &x[base..base + win], &mut dw[o * win..(o + 1) * win]);
                }
                if let Some(dx) = dx.as_deref_mut() {
                    axpy(go, &w[o * win..(o + 1) * win], &mut dx[base..base + win]);
                }
            }
        }
    }
}

/// `x`: B×N, `w`: N×M, `b`: M → B×M (pre-activation).
pub(crate) fn dense_forward<T: Real>(x: &[T], w: &[T], b: &[T], batch: usize, n: usize, m: usize) -> Vec<T> {
    let mut out = Vec::with_capacity(batch * m);
    for bi in 0..batch {
        let mut row = b.to_vec();
        for (i, &xi) in x[bi * n..(bi + 1) * n].iter().enumerate() {
            if xi != T::zero() {
                axpy(xi, &w[i * m..(i + 1) * m], &mut row);
            }
        }
        out.extend(row);
    }
    out
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn dense_backward<T: Real>(
    x: &[T],
    w: &[T],
    g: &[T],
    batch: usize,
    n: usize,
    m: usize,
    mut dx: Option<&mut [T]>,
    mut dw: Option<&mut [T]>,
    mut db: Option<&mut [T]>,
) {
    for bi in 0..batch {
        let grow = &g[bi * m..(bi + 1) * m];
        if let Some(db) = db.as_deref_mut() {
            for (d, &gv) in db.iter_mut().zip(grow) {
                *d += gv;
            }
        }
        for i in 0..n {
            let wrow = &w[i * m..(i + 1) * m];
            if let Some(dx) = dx.as_deref_mut() {
                dx[bi * n + i] += dot(wrow, grow);
            }
            if let Some(dw) = dw.as_deref_mut() {
                let xi = x[bi * n + i];
                if xi != T::zero() {
                    axpy(xi, grow, &mut dw[i * m..(i + 1) * m]);
                }
            }
        }
    }
}

/// Per-channel max over the length axis; ties resolve to the first index.
pub(crate) fn max_pool_forward<T: Real>(x: &[T], batch: usize, len: usize, c: usize) -> (Vec<T>, Vec<usize>) {
    let mut out = vec![T::neg_infinity(); batch * c];
    let mut arg = vec![0usize; batch * c];
    for bi in 0..batch {
        for t in 0..len {
            let row = &x[(bi * len + t) * c..(bi * len + t + 1) * c];
            for (ch, &v) in row.iter().enumerate() {
                let idx = bi * c + ch;
                if t == 0 || v > out[idx] {
                    out[idx] = v;
                    arg[idx] = t;
                }
            }
        }
    }
    (out, arg)
}

/// Inverted-dropout mask: each entry is 0 with probability `rate`, else 1/(1−rate).
pub fn dropout_mask<T: Real>(n: usize, rate: f64, seed: u64) -> Vec<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let keep = T::lit(1.0 / (1.0 - rate));
    (0..n)
        .map(|_| if rng.gen::<f64>() < rate { T::zero() } else { keep })
        .collect()
}

/// One mask value per (sample, channel), shared across the length axis.
pub fn spatial_dropout_mask<T: Real>(batch: usize, channels: usize, rate: f64, seed: u64) -> Vec<T> {
    dropout_mask(batch * channels, rate, seed)
}

#[inline]
pub(crate) fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    let mut acc = T::zero();
    for (&x, &y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

#[inline]
pub(crate) fn axpy<T: Real>(alpha: T, x: &[T], y: &mut [T]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}
