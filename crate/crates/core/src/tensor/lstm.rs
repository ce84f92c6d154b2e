//! LSTM cell kernels and the bidirectional sequence layer.
//!
//! Parameter layout (shared by checkpoints): `w_ih` is 4H×N, `w_hh` is 4H×H
//! and `bias` is 4H, with gate blocks stacked in the order [i, f, g, o].

use super::layers::{axpy, dot, dropout_mask, sigmoid_scalar};
use super::{Real, Tensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct LstmWeights<'a, T> {
    pub w_ih: &'a [T],
    pub w_hh: &'a [T],
    pub bias: &'a [T],
    pub input: usize,
    pub hidden: usize,
}

impl<T: Real> LstmWeights<'_, T> {
    pub(crate) fn check(&self) -> Result<()> {
        let (n, h) = (self.input, self.hidden);
        if self.w_ih.len() != 4 * h * n || self.w_hh.len() != 4 * h * h || self.bias.len() != 4 * h {
            return Err(Error::shape(
                "lstm",
                format!(
                    "expected w_ih {}, w_hh {}, bias {} values for N={n}, H={h}; got {}, {}, {}",
                    4 * h * n,
                    4 * h * h,
                    4 * h,
                    self.w_ih.len(),
                    self.w_hh.len(),
                    self.bias.len()
                ),
            ));
        }
        Ok(())
    }
}

/// Activated gates plus the new cell and hidden states for one step.
#[derive(Debug, Clone)]
pub(crate) struct StepCache<T> {
    pub gates: Vec<T>,
    pub c: Vec<T>,
    pub tanh_c: Vec<T>,
    pub h: Vec<T>,
}

pub(crate) fn step_forward<T: Real>(
    w: &LstmWeights<'_, T>,
    x: &[T],
    h_prev: &[T],
    c_prev: &[T],
    batch: usize,
) -> StepCache<T> {
    let (n, hd) = (w.input, w.hidden);
    let mut gates = vec![T::zero(); batch * 4 * hd];
    let mut c = vec![T::zero(); batch * hd];
    let mut tanh_c = vec![T::zero(); batch * hd];
    let mut h = vec![T::zero(); batch * hd];
    for b in 0..batch {
        let xb = &x[b * n..(b + 1) * n];
        let hb = &h_prev[b * hd..(b + 1) * hd];
        let z = &mut gates[b * 4 * hd..(b + 1) * 4 * hd];
        for (j, zj) in z.iter_mut().enumerate() {
            *zj = w.bias[j] + dot(&w.w_ih[j * n..(j + 1) * n], xb) + dot(&w.w_hh[j * hd..(j + 1) * hd], hb);
        }
        for j in 0..hd {
            let i = sigmoid_scalar(z[j]);
            let f = sigmoid_scalar(z[hd + j]);
            let g = z[2 * hd + j].tanh();
            let o = sigmoid_scalar(z[3 * hd + j]);
            z[j] = i;
            z[hd + j] = f;
            z[2 * hd + j] = g;
            z[3 * hd + j] = o;
            let cv = f * c_prev[b * hd + j] + i * g;
            let tc = cv.tanh();
            c[b * hd + j] = cv;
            tanh_c[b * hd + j] = tc;
            h[b * hd + j] = o * tc;
        }
    }
    StepCache { gates, c, tanh_c, h }
}

/// Gradient sinks for one LSTM parameter set.
pub(crate) struct LstmGrads<'a, T> {
    pub w_ih: Option<&'a mut [T]>,
    pub w_hh: Option<&'a mut [T]>,
    pub bias: Option<&'a mut [T]>,
}

/// Backward through one step. `dh` is the total gradient on this step's h,
/// `dc` the gradient arriving on its c from the next step; on return `dc`
/// holds the gradient for `c_prev`. `dx` is accumulated, `dh_prev` overwritten.
#[allow(clippy::too_many_arguments)]
pub(crate) fn step_backward<T: Real>(
    w: &LstmWeights<'_, T>,
    x: &[T],
    h_prev: &[T],
    c_prev: &[T],
    cache: &StepCache<T>,
    dh: &[T],
    dc: &mut [T],
    batch: usize,
    grads: &mut LstmGrads<'_, T>,
    mut dx: Option<&mut [T]>,
    dh_prev: &mut [T],
) {
    let (n, hd) = (w.input, w.hidden);
    let one = T::one();
    let mut dz = vec![T::zero(); 4 * hd];
    for b in 0..batch {
        let g = &cache.gates[b * 4 * hd..(b + 1) * 4 * hd];
        for j in 0..hd {
            let k = b * hd + j;
            let (i, f, gg, o) = (g[j], g[hd + j], g[2 * hd + j], g[3 * hd + j]);
            let tc = cache.tanh_c[k];
            let dct = dc[k] + dh[k] * o * (one - tc * tc);
            dz[j] = dct * gg * i * (one - i);
            dz[hd + j] = dct * c_prev[k] * f * (one - f);
            dz[2 * hd + j] = dct * i * (one - gg * gg);
            dz[3 * hd + j] = dh[k] * tc * o * (one - o);
            dc[k] = dct * f;
        }
        let xb = &x[b * n..(b + 1) * n];
        let hb = &h_prev[b * hd..(b + 1) * hd];
        let dhp = &mut dh_prev[b * hd..(b + 1) * hd];
        dhp.iter_mut().for_each(|v| *v = T::zero());
        for (j, &d) in dz.iter().enumerate() {
            if d == T::zero() {
                continue;
            }
            if let Some(db) = grads.bias.as_deref_mut() {
                db[j] += d;
            }
            if let Some(dw) = grads.w_ih.as_deref_mut() {
                axpy(d, xb, &mut dw[j * n..(j + 1) * n]);
            }
            if let Some(dw) = grads.w_hh.as_deref_mut() {
                axpy(d, hb, &mut dw[j * hd..(j + 1) * hd]);
            }
            if let Some(dx) = dx.as_deref_mut() {
                axpy(d, &w.w_ih[j * n..(j + 1) * n], &mut dx[b * n..(b + 1) * n]);
            }
            axpy(d, &w.w_hh[j * hd..(j + 1) * hd], dhp);
        }
    }
}

/// One LSTM step on B×N input with B×H states; returns `(h_t, c_t)`.
pub fn lstm_cell_step<T: Real>(
    x: &Tensor<T>,
    h_prev: &Tensor<T>,
    c_prev: &Tensor<T>,
    weights: &LstmWeights<'_, T>,
) -> Result<(Tensor<T>, Tensor<T>)> {
    weights.check()?;
    let batch = x.shape()[0];
    let hd = weights.hidden;
    if x.shape() != [batch, weights.input] || h_prev.shape() != [batch, hd] || c_prev.shape() != [batch, hd] {
        return Err(Error::shape(
            "lstm_cell_step",
            format!(
                "x {:?}, h {:?}, c {:?} for N={}, H={hd}",
                x.shape(),
                h_prev.shape(),
                c_prev.shape(),
                weights.input
            ),
        ));
    }
    let s = step_forward(weights, x.data(), h_prev.data(), c_prev.data(), batch);
    Ok((Tensor::new(vec![batch, hd], s.h)?, Tensor::new(vec![batch, hd], s.c)?))
}

/// Saved state of one direction of a bidirectional layer.
#[derive(Debug, Clone)]
pub(crate) struct DirectionCache<T> {
    /// Masked input per processed step (B×N).
    inputs: Vec<Vec<T>>,
    steps: Vec<StepCache<T>>,
    in_mask: Option<Vec<T>>,
    rec_mask: Option<Vec<T>>,
    reverse: bool,
    len: usize,
}

impl<T: Real> DirectionCache<T> {
    /// Hidden state produced at time index `t` (B×H).
    pub fn h_at(&self, t: usize) -> &[T] {
        let s = if self.reverse { self.len - 1 - t } else { t };
        &self.steps[s].h
    }

    /// Hidden state of the last processed step.
    pub fn final_h(&self) -> &[T] {
        &self.steps.last().expect("non-empty sequence").h
    }

    /// Time index of the last processed step.
    pub fn last_time(&self) -> usize {
        self.time_of(self.len - 1)
    }

    fn time_of(&self, s: usize) -> usize {
        if self.reverse {
            self.len - 1 - s
        } else {
            s
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct SeqShape {
    pub batch: usize,
    pub len: usize,
    pub input: usize,
}

pub(crate) fn direction_masks<T: Real>(
    shape: SeqShape,
    hidden: usize,
    dropout: f64,
    recurrent_dropout: f64,
    seed: u64,
) -> (Option<Vec<T>>, Option<Vec<T>>) {
    let in_mask = (dropout > 0.0).then(|| dropout_mask(shape.batch * shape.input, dropout, seed));
    let rec_mask = (recurrent_dropout > 0.0)
        .then(|| dropout_mask(shape.batch * hidden, recurrent_dropout, seed ^ 0x5DEE_CE66_D1CE_4E5B));
    (in_mask, rec_mask)
}

fn masked<T: Real>(values: &[T], mask: Option<&Vec<T>>) -> Vec<T> {
    match mask {
        Some(m) => values.iter().zip(m).map(|(&v, &k)| v * k).collect(),
        None => values.to_vec(),
    }
}

pub(crate) fn run_direction<T: Real>(
    x: &[T],
    shape: SeqShape,
    w: &LstmWeights<'_, T>,
    reverse: bool,
    in_mask: Option<Vec<T>>,
    rec_mask: Option<Vec<T>>,
) -> DirectionCache<T> {
    let SeqShape { batch, len, input: n } = shape;
    let hd = w.hidden;
    let mut cache = DirectionCache {
        inputs: Vec::with_capacity(len),
        steps: Vec::with_capacity(len),
        in_mask,
        rec_mask,
        reverse,
        len,
    };
    let zeros = vec![T::zero(); batch * hd];
    let mut xt = vec![T::zero(); batch * n];
    for s in 0..len {
        let t = cache.time_of(s);
        for b in 0..batch {
            xt[b * n..(b + 1) * n].copy_from_slice(&x[(b * len + t) * n..(b * len + t + 1) * n]);
        }
        let xm = masked(&xt, cache.in_mask.as_ref());
        let (h_prev, c_prev) = match cache.steps.last() {
            Some(prev) => (masked(&prev.h, cache.rec_mask.as_ref()), prev.c.clone()),
            None => (zeros.clone(), zeros.clone()),
        };
        let step = step_forward(w, &xm, &h_prev, &c_prev, batch);
        cache.inputs.push(xm);
        cache.steps.push(step);
    }
    cache
}

/// Backpropagation through time for one direction. `dh_out(t)` yields the
/// gradient arriving on the output at time index `t` (B×H), if any.
pub(crate) fn backward_direction<'g, T: Real>(
    cache: &DirectionCache<T>,
    shape: SeqShape,
    w: &LstmWeights<'_, T>,
    dh_out: impl Fn(usize) -> Option<&'g [T]>,
    grads: &mut LstmGrads<'_, T>,
    mut dx: Option<&mut [T]>,
) where
    T: 'g,
{
    let SeqShape { batch, len, input: n } = shape;
    let hd = w.hidden;
    let zeros = vec![T::zero(); batch * hd];
    let mut dh_next = vec![T::zero(); batch * hd];
    let mut dc = vec![T::zero(); batch * hd];
    let mut dh_prev = vec![T::zero(); batch * hd];
    let mut dxm = vec![T::zero(); batch * n];
    for s in (0..len).rev() {
        let t = cache.time_of(s);
        let mut dh = dh_next.clone();
        if let Some(g) = dh_out(t) {
            for (a, &b) in dh.iter_mut().zip(g) {
                *a += b;
            }
        }
        let (h_prev, c_prev) = if s > 0 {
            let prev = &cache.steps[s - 1];
            (masked(&prev.h, cache.rec_mask.as_ref()), prev.c.clone())
        } else {
            (zeros.clone(), zeros.clone())
        };
        dxm.iter_mut().for_each(|v| *v = T::zero());
        step_backward(
            w,
            &cache.inputs[s],
            &h_prev,
            &c_prev,
            &cache.steps[s],
            &dh,
            &mut dc,
            batch,
            grads,
            dx.is_some().then_some(&mut dxm[..]),
            &mut dh_prev,
        );
        if let Some(dx) = dx.as_deref_mut() {
            for b in 0..batch {
                let dst = &mut dx[(b * len + t) * n..(b * len + t + 1) * n];
                let src = &dxm[b * n..(b + 1) * n];
                match &cache.in_mask {
                    Some(m) => {
                        for ((d, &g), &k) in dst.iter_mut().zip(src).zip(&m[b * n..(b + 1) * n]) {
                            *d += g * k;
                        }
                    }
                    None => {
                        for (d, &g) in dst.iter_mut().zip(src) {
                            *d += g;
                        }
                    }
                }
            }
        }
        dh_next = masked(&dh_prev, cache.rec_mask.as_ref());
    }
}
