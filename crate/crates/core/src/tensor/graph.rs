//! The tape: every forward op appends a node, `backward` walks it in reverse.

use super::layers::{
    activation_backward, apply_activation, axpy, conv1d_backward, conv1d_forward, dense_backward,
    dense_forward, dropout_mask, max_pool_forward, spatial_dropout_mask,
};
use super::lstm::{
    backward_direction, direction_masks, run_direction, step_backward, step_forward, DirectionCache,
    LstmGrads, LstmWeights, SeqShape, StepCache,
};
use super::params::{ParamId, ParamStore};
use super::{Activation, Mode, Real, Tensor};
use crate::corpus::PAD_ID;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeId(usize);

/// Node ids of one LSTM parameter set (see [`super::lstm`] for the layout).
#[derive(Debug, Clone, Copy)]
pub struct LstmParams {
    pub w_ih: NodeId,
    pub w_hh: NodeId,
    pub bias: NodeId,
}

#[derive(Debug, Clone, Copy)]
pub struct BiLstmOptions {
    /// Emit every time step (B×L×2H) instead of the two final states (B×2H).
    pub return_sequences: bool,
    /// Input-connection dropout, one mask per sequence.
    pub dropout: f64,
    /// Dropout on `h_prev`, one mask per sequence.
    pub recurrent_dropout: f64,
    pub mode: Mode,
    pub seed: u64,
}

enum Op<T> {
    Input,
    Param(ParamId),
    Embedding {
        table: NodeId,
        ids: Vec<usize>,
    },
    Conv1d {
        x: NodeId,
        kernel: NodeId,
        bias: NodeId,
        act: Activation,
    },
    MaxPool {
        x: NodeId,
        argmax: Vec<usize>,
    },
    Dense {
        x: NodeId,
        w: NodeId,
        b: NodeId,
        act: Activation,
    },
    Activation {
        x: NodeId,
        kind: Activation,
    },
    Dropout {
        x: NodeId,
        mask: Vec<T>,
    },
    SpatialDropout {
        x: NodeId,
        mask: Vec<T>,
    },
    LstmCell {
        x: NodeId,
        h: NodeId,
        c: NodeId,
        p: LstmParams,
        cache: StepCache<T>,
    },
    SliceCols {
        x: NodeId,
        start: usize,
    },
    Recurrent {
        x: NodeId,
        dirs: Vec<(LstmParams, DirectionCache<T>)>,
        return_sequences: bool,
    },
    CrossEntropy {
        probs: NodeId,
        labels: Vec<usize>,
    },
    WeightedSum {
        x: NodeId,
        weights: Vec<T>,
    },
}

struct Node<T> {
    op: Op<T>,
    shape: Vec<usize>,
    /// Empty for parameter nodes, whose values live in the store.
    value: Vec<T>,
    requires_grad: bool,
}

/// Per-parameter gradients produced by one backward pass.
#[derive(Debug, Clone)]
pub struct Gradients<T> {
    grads: Vec<Option<Vec<T>>>,
}

impl<T: Real> Gradients<T> {
    pub fn get(&self, id: ParamId) -> Option<&[T]> {
        self.grads.get(id.0).and_then(|g| g.as_deref())
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &[T])> {
        self.grads
            .iter()
            .enumerate()
            .filter_map(|(i, g)| g.as_deref().map(|g| (ParamId(i), g)))
    }
}

/// A single forward pass over a borrowed parameter store.
pub struct Graph<'a, T> {
    params: &'a ParamStore<T>,
    nodes: Vec<Node<T>>,
}

fn add_into<T: Real>(grads: &mut [Option<Vec<T>>], id: NodeId, delta: Vec<T>) {
    match &mut grads[id.0] {
        Some(g) => {
            for (a, b) in g.iter_mut().zip(delta) {
                *a += b;
            }
        }
        slot @ None => *slot = Some(delta),
    }
}

impl<'a, T: Real> Graph<'a, T> {
    pub fn new(params: &'a ParamStore<T>) -> Self {
        Graph {
            params,
            nodes: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, op: Op<T>, shape: Vec<usize>, value: Vec<T>, inputs: &[NodeId]) -> NodeId {
        let requires_grad = inputs.iter().any(|i| self.nodes[i.0].requires_grad);
        self.nodes.push(Node {
            op,
            shape,
            value,
            requires_grad,
        });
        NodeId(self.nodes.len() - 1)
    }

    pub fn input(&mut self, t: Tensor<T>) -> NodeId {
        let shape = t.shape().to_vec();
        self.push(Op::Input, shape, t.into_data(), &[])
    }

    pub fn param(&mut self, id: ParamId) -> NodeId {
        let p = self.params.get(id);
        self.nodes.push(Node {
            op: Op::Param(id),
            shape: p.value.shape().to_vec(),
            value: Vec::new(),
            requires_grad: p.trainable,
        });
        NodeId(self.nodes.len() - 1)
    }

    pub fn value(&self, id: NodeId) -> &[T] {
        let node = &self.nodes[id.0];
        match node.op {
            Op::Param(pid) => self.params.get(pid).value.data(),
            _ => &node.value,
        }
    }

    pub fn shape(&self, id: NodeId) -> &[usize] {
        &self.nodes[id.0].shape
    }

    pub fn tensor(&self, id: NodeId) -> Tensor<T> {
        Tensor::new(self.shape(id).to_vec(), self.value(id).to_vec()).expect("node shape matches value")
    }

    fn expect_rank(&self, op: &'static str, id: NodeId, rank: usize) -> Result<&[usize]> {
        let s = self.shape(id);
        if s.len() != rank {
            return Err(Error::shape(op, format!("expected rank {rank}, got shape {s:?}")));
        }
        Ok(s)
    }

    /// Row lookup: `ids` is B×L (row-major) into a V×D table → B×L×D.
    pub fn embedding(&mut self, table: NodeId, ids: &[usize], batch: usize, len: usize) -> Result<NodeId> {
        let (v, d) = match self.expect_rank("embedding", table, 2)? {
            &[v, d] => (v, d),
            _ => unreachable!(),
        };
        if ids.len() != batch * len {
            return Err(Error::shape(
                "embedding",
                format!("{} ids for batch {batch} × length {len}", ids.len()),
            ));
        }
        if let Some(&bad) = ids.iter().find(|&&i| i >= v) {
            return Err(Error::OutOfRange {
                what: "embedding table",
                index: bad,
                size: v,
            });
        }
        let tv = self.value(table);
        let mut out = Vec::with_capacity(ids.len() * d);
        for &i in ids {
            out.extend_from_slice(&tv[i * d..(i + 1) * d]);
        }
        Ok(self.push(
            Op::Embedding {
                table,
                ids: ids.to_vec(),
            },
            vec![batch, len, d],
            out,
            &[table],
        ))
    }

    /// `x`: B×L×Cin, `kernel`: Cout×K×Cin, `bias`: Cout → B×(L−K+1)×Cout.
    pub fn conv1d(&mut self, x: NodeId, kernel: NodeId, bias: NodeId, act: Activation) -> Result<NodeId> {
        let (b, l, c_in) = match self.expect_rank("conv1d", x, 3)? {
            &[b, l, c] => (b, l, c),
            _ => unreachable!(),
        };
        let (c_out, k, kc) = match self.expect_rank("conv1d", kernel, 3)? {
            &[o, k, c] => (o, k, c),
            _ => unreachable!(),
        };
        if kc != c_in || self.shape(bias) != [c_out] {
            return Err(Error::shape(
                "conv1d",
                format!(
                    "input channels {c_in}, kernel {:?}, bias {:?}",
                    self.shape(kernel),
                    self.shape(bias)
                ),
            ));
        }
        if l < k {
            return Err(Error::shape(
                "conv1d",
                format!("sequence length {l} shorter than kernel size {k}"),
            ));
        }
        let mut out = conv1d_forward(self.value(x), self.value(kernel), self.value(bias), b, l, c_in, c_out, k);
        apply_activation(act, &mut out, c_out);
        Ok(self.push(
            Op::Conv1d { x, kernel, bias, act },
            vec![b, l - k + 1, c_out],
            out,
            &[x, kernel, bias],
        ))
    }

    /// B×L×C → B×C.
    pub fn global_max_pool1d(&mut self, x: NodeId) -> Result<NodeId> {
        let (b, l, c) = match self.expect_rank("global_max_pool1d", x, 3)? {
            &[b, l, c] => (b, l, c),
            _ => unreachable!(),
        };
        if l == 0 {
            return Err(Error::shape("global_max_pool1d", "empty length axis"));
        }
        let (out, argmax) = max_pool_forward(self.value(x), b, l, c);
        Ok(self.push(Op::MaxPool { x, argmax }, vec![b, c], out, &[x]))
    }

    /// `x`: B×N, `w`: N×M, `b`: M → B×M.
    pub fn dense(&mut self, x: NodeId, w: NodeId, b: NodeId, act: Activation) -> Result<NodeId> {
        let (batch, n) = match self.expect_rank("dense", x, 2)? {
            &[b, n] => (b, n),
            _ => unreachable!(),
        };
        let (wn, m) = match self.expect_rank("dense", w, 2)? {
            &[a, m] => (a, m),
            _ => unreachable!(),
        };
        if wn != n || self.shape(b) != [m] {
            return Err(Error::shape(
                "dense",
                format!("input {:?}, weights {:?}, bias {:?}", self.shape(x), self.shape(w), self.shape(b)),
            ));
        }
        let mut out = dense_forward(self.value(x), self.value(w), self.value(b), batch, n, m);
        apply_activation(act, &mut out, m);
        Ok(self.push(Op::Dense { x, w, b, act }, vec![batch, m], out, &[x, w, b]))
    }

    pub fn activation(&mut self, x: NodeId, kind: Activation) -> Result<NodeId> {
        let shape = self.shape(x).to_vec();
        let width = *shape.last().ok_or_else(|| Error::shape("activation", "scalar input"))?;
        let mut out = self.value(x).to_vec();
        apply_activation(kind, &mut out, width);
        Ok(self.push(Op::Activation { x, kind }, shape, out, &[x]))
    }

    fn check_rate(op: &'static str, rate: f64) -> Result<()> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::Config(format!("{op} rate {rate} outside [0, 1)")));
        }
        Ok(())
    }

    /// Inverted dropout. Infer mode (or rate 0) returns `x` itself.
    pub fn dropout(&mut self, x: NodeId, rate: f64, mode: Mode, seed: u64) -> Result<NodeId> {
        Self::check_rate("dropout", rate)?;
        if mode == Mode::Infer || rate == 0.0 {
            return Ok(x);
        }
        let mask: Vec<T> = dropout_mask(self.value(x).len(), rate, seed);
        let out = self.value(x).iter().zip(&mask).map(|(&v, &m)| v * m).collect();
        let shape = self.shape(x).to_vec();
        Ok(self.push(Op::Dropout { x, mask }, shape, out, &[x]))
    }

    /// Drops whole channels of a B×L×C tensor (same mask at every position).
    pub fn spatial_dropout1d(&mut self, x: NodeId, rate: f64, mode: Mode, seed: u64) -> Result<NodeId> {
        Self::check_rate("spatial_dropout1d", rate)?;
        let (b, l, c) = match self.expect_rank("spatial_dropout1d", x, 3)? {
            &[b, l, c] => (b, l, c),
            _ => unreachable!(),
        };
        if mode == Mode::Infer || rate == 0.0 {
            return Ok(x);
        }
        let mask: Vec<T> = spatial_dropout_mask(b, c, rate, seed);
        let xv = self.value(x);
        let mut out = Vec::with_capacity(xv.len());
        for bi in 0..b {
            for t in 0..l {
                let row = &xv[(bi * l + t) * c..(bi * l + t + 1) * c];
                out.extend(row.iter().zip(&mask[bi * c..(bi + 1) * c]).map(|(&v, &m)| v * m));
            }
        }
        Ok(self.push(Op::SpatialDropout { x, mask }, vec![b, l, c], out, &[x]))
    }

    fn lstm_weights(&self, p: LstmParams, input: usize) -> Result<LstmWeights<'_, T>> {
        let hidden = match self.shape(p.w_hh) {
            &[g, h] if g == 4 * h => h,
            s => return Err(Error::shape("lstm", format!("w_hh shape {s:?} is not 4H×H"))),
        };
        let w = LstmWeights {
            w_ih: self.value(p.w_ih),
            w_hh: self.value(p.w_hh),
            bias: self.value(p.bias),
            input,
            hidden,
        };
        w.check()?;
        Ok(w)
    }

    /// One LSTM step; returns the `(h_t, c_t)` nodes.
    pub fn lstm_cell(&mut self, x: NodeId, h: NodeId, c: NodeId, p: LstmParams) -> Result<(NodeId, NodeId)> {
        let (b, n) = match self.expect_rank("lstm_cell", x, 2)? {
            &[b, n] => (b, n),
            _ => unreachable!(),
        };
        let w = self.lstm_weights(p, n)?;
        let hd = w.hidden;
        if self.shape(h) != [b, hd] || self.shape(c) != [b, hd] {
            return Err(Error::shape(
                "lstm_cell",
                format!("state shapes {:?}/{:?}, expected [{b}, {hd}]", self.shape(h), self.shape(c)),
            ));
        }
        let cache = step_forward(&w, self.value(x), self.value(h), self.value(c), b);
        let mut packed = Vec::with_capacity(b * 2 * hd);
        for bi in 0..b {
            packed.extend_from_slice(&cache.h[bi * hd..(bi + 1) * hd]);
            packed.extend_from_slice(&cache.c[bi * hd..(bi + 1) * hd]);
        }
        let both = self.push(
            Op::LstmCell { x, h, c, p, cache },
            vec![b, 2 * hd],
            packed,
            &[x, h, c, p.w_ih, p.w_hh, p.bias],
        );
        let h_t = self.slice_cols(both, 0, hd)?;
        let c_t = self.slice_cols(both, hd, 2 * hd)?;
        Ok((h_t, c_t))
    }

    /// Columns `start..end` of a B×W tensor.
    pub fn slice_cols(&mut self, x: NodeId, start: usize, end: usize) -> Result<NodeId> {
        let (b, w) = match self.expect_rank("slice_cols", x, 2)? {
            &[b, w] => (b, w),
            _ => unreachable!(),
        };
        if start > end || end > w {
            return Err(Error::shape("slice_cols", format!("range {start}..{end} of width {w}")));
        }
        let xv = self.value(x);
        let out = (0..b).flat_map(|bi| xv[bi * w + start..bi * w + end].iter().copied()).collect();
        Ok(self.push(Op::SliceCols { x, start }, vec![b, end - start], out, &[x]))
    }

    /// Bidirectional LSTM over B×L×N. The forward direction reads t = 0..L,
    /// the backward one t = L..0; outputs are concatenated `[forward, backward]`.
    pub fn bilstm(&mut self, x: NodeId, fwd: LstmParams, bwd: LstmParams, opts: BiLstmOptions) -> Result<NodeId> {
        self.recurrent(x, &[(fwd, false), (bwd, true)], opts)
    }

    /// LSTM layer made of one or more directions (`true` = reads the
    /// sequence from the end). Outputs of the directions are concatenated in
    /// the given order; without `return_sequences` each direction contributes
    /// the state of its last processed step.
    pub fn recurrent(&mut self, x: NodeId, dirs: &[(LstmParams, bool)], opts: BiLstmOptions) -> Result<NodeId> {
        Self::check_rate("lstm dropout", opts.dropout)?;
        Self::check_rate("lstm recurrent dropout", opts.recurrent_dropout)?;
        let (b, l, n) = match self.expect_rank("lstm", x, 3)? {
            &[b, l, n] => (b, l, n),
            _ => unreachable!(),
        };
        if l == 0 {
            return Err(Error::shape("lstm", "empty sequence"));
        }
        if dirs.is_empty() {
            return Err(Error::shape("lstm", "no directions"));
        }
        let shape = SeqShape { batch: b, len: l, input: n };
        let (dropout, rec) = if opts.mode == Mode::Train {
            (opts.dropout, opts.recurrent_dropout)
        } else {
            (0.0, 0.0)
        };
        let xv = self.value(x);
        let mut caches = Vec::with_capacity(dirs.len());
        let mut widths = Vec::with_capacity(dirs.len());
        for (k, &(p, reverse)) in dirs.iter().enumerate() {
            let w = self.lstm_weights(p, n)?;
            let seed = opts.seed.wrapping_add((k as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
            let (im, rm) = direction_masks(shape, w.hidden, dropout, rec, seed);
            caches.push((p, run_direction(xv, shape, &w, reverse, im, rm)));
            widths.push(w.hidden);
        }
        let total: usize = widths.iter().sum();
        let (out_shape, out) = if opts.return_sequences {
            let mut out = Vec::with_capacity(b * l * total);
            for bb in 0..b {
                for t in 0..l {
                    for ((_, c), &hd) in caches.iter().zip(&widths) {
                        out.extend_from_slice(&c.h_at(t)[bb * hd..(bb + 1) * hd]);
                    }
                }
            }
            (vec![b, l, total], out)
        } else {
            let mut out = Vec::with_capacity(b * total);
            for bb in 0..b {
                for ((_, c), &hd) in caches.iter().zip(&widths) {
                    out.extend_from_slice(&c.final_h()[bb * hd..(bb + 1) * hd]);
                }
            }
            (vec![b, total], out)
        };
        let mut inputs = vec![x];
        for (p, _) in dirs {
            inputs.extend([p.w_ih, p.w_hh, p.bias]);
        }
        Ok(self.push(
            Op::Recurrent {
                x,
                dirs: caches,
                return_sequences: opts.return_sequences,
            },
            out_shape,
            out,
            &inputs,
        ))
    }

    /// Mean negative log-likelihood of `labels` under B×C probability rows
    /// (probabilities clamped at 1e-12).
    pub fn cross_entropy(&mut self, probs: NodeId, labels: &[usize]) -> Result<NodeId> {
        let (b, c) = match self.expect_rank("cross_entropy", probs, 2)? {
            &[b, c] => (b, c),
            _ => unreachable!(),
        };
        if labels.len() != b {
            return Err(Error::shape("cross_entropy", format!("{} labels for batch {b}", labels.len())));
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= c) {
            return Err(Error::OutOfRange {
                what: "class count",
                index: bad,
                size: c,
            });
        }
        let pv = self.value(probs);
        let tol = T::lit(1e-5);
        for row in pv.chunks(c) {
            let s: T = row.iter().copied().sum();
            if (s - T::one()).abs() > tol {
                return Err(Error::Graph(format!("probability row sums to {s}, not 1")));
            }
        }
        let floor = T::lit(1e-12);
        let total: T = labels
            .iter()
            .enumerate()
            .map(|(i, &y)| -(pv[i * c + y].max(floor)).ln())
            .sum();
        let loss = total / T::lit(b as f64);
        Ok(self.push(
            Op::CrossEntropy {
                probs,
                labels: labels.to_vec(),
            },
            vec![1],
            vec![loss],
            &[probs],
        ))
    }

    /// Σ x·weights as a scalar; used to probe gradients of arbitrary ops.
    pub fn weighted_sum(&mut self, x: NodeId, weights: Vec<T>) -> Result<NodeId> {
        if weights.len() != self.value(x).len() {
            return Err(Error::shape(
                "weighted_sum",
                format!("{} weights for {} values", weights.len(), self.value(x).len()),
            ));
        }
        let s = self.value(x).iter().zip(&weights).map(|(&a, &w)| a * w).sum();
        Ok(self.push(Op::WeightedSum { x, weights }, vec![1], vec![s], &[x]))
    }

    /// Reverse-mode pass from a scalar node. Each call starts from fresh node
    /// gradients; accumulation across calls happens in [`ParamStore::accumulate`].
    pub fn backward(&self, loss: NodeId) -> Result<Gradients<T>> {
        if self.nodes.is_empty() || loss.0 >= self.nodes.len() {
            return Err(Error::Graph("backward called before a forward pass".into()));
        }
        if self.value(loss).len() != 1 {
            return Err(Error::Graph(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.shape(loss)
            )));
        }
        let mut grads: Vec<Option<Vec<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(vec![T::one()]);
        let mut out = Gradients {
            grads: (0..self.params.len()).map(|_| None).collect(),
        };
        let needs = |id: NodeId| self.nodes[id.0].requires_grad;
        let zeros = |id: NodeId| vec![T::zero(); self.value(id).len()];

        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            match &node.op {
                Op::Input => {}
                Op::Param(pid) => match &mut out.grads[pid.0] {
                    Some(acc) => acc.iter_mut().zip(&g).for_each(|(a, &b)| *a += b),
                    slot @ None => *slot = Some(g),
                },
                Op::Embedding { table, ids } => {
                    let d = self.shape(*table)[1];
                    let mut dt = zeros(*table);
                    for (k, &id) in ids.iter().enumerate() {
                        if id != PAD_ID {
                            axpy(T::one(), &g[k * d..(k + 1) * d], &mut dt[id * d..(id + 1) * d]);
                        }
                    }
                    add_into(&mut grads, *table, dt);
                }
                Op::Conv1d { x, kernel, bias, act } => {
                    let (b, l, c_in) = (self.shape(*x)[0], self.shape(*x)[1], self.shape(*x)[2]);
                    let (c_out, k) = (self.shape(*kernel)[0], self.shape(*kernel)[1]);
                    let mut gp = g;
                    activation_backward(*act, &node.value, &mut gp, c_out);
                    let mut dx = needs(*x).then(|| zeros(*x));
                    let mut dw = needs(*kernel).then(|| zeros(*kernel));
                    let mut db = needs(*bias).then(|| zeros(*bias));
                    conv1d_backward(
                        self.value(*x),
                        self.value(*kernel),
                        &gp,
                        b,
                        l,
                        c_in,
                        c_out,
                        k,
                        dx.as_deref_mut(),
                        dw.as_deref_mut(),
                        db.as_deref_mut(),
                    );
                    for (id, d) in [(*x, dx), (*kernel, dw), (*bias, db)] {
                        if let Some(d) = d {
                            add_into(&mut grads, id, d);
                        }
                    }
                }
                Op::MaxPool { x, argmax } => {
                    let (l, c) = (self.shape(*x)[1], self.shape(*x)[2]);
                    let mut dx = zeros(*x);
                    for (k, (&gv, &t)) in g.iter().zip(argmax).enumerate() {
                        let (bi, ch) = (k / c, k % c);
                        dx[(bi * l + t) * c + ch] += gv;
                    }
                    add_into(&mut grads, *x, dx);
                }
                Op::Dense { x, w, b, act } => {
                    let (batch, n) = (self.shape(*x)[0], self.shape(*x)[1]);
                    let m = self.shape(*w)[1];
                    let mut gp = g;
                    activation_backward(*act, &node.value, &mut gp, m);
                    let mut dx = needs(*x).then(|| zeros(*x));
                    let mut dw = needs(*w).then(|| zeros(*w));
                    let mut db = needs(*b).then(|| zeros(*b));
                    dense_backward(
                        self.value(*x),
                        self.value(*w),
                        &gp,
                        batch,
                        n,
                        m,
                        dx.as_deref_mut(),
                        dw.as_deref_mut(),
                        db.as_deref_mut(),
                    );
                    for (id, d) in [(*x, dx), (*w, dw), (*b, db)] {
                        if let Some(d) = d {
                            add_into(&mut grads, id, d);
                        }
                    }
                }
                Op::Activation { x, kind } => {
                    let width = *node.shape.last().expect("rank ≥ 1");
                    let mut gx = g;
                    activation_backward(*kind, &node.value, &mut gx, width);
                    add_into(&mut grads, *x, gx);
                }
                Op::Dropout { x, mask } => {
                    let gx = g.iter().zip(mask).map(|(&a, &m)| a * m).collect();
                    add_into(&mut grads, *x, gx);
                }
                Op::SpatialDropout { x, mask } => {
                    let (l, c) = (node.shape[1], node.shape[2]);
                    let gx = g
                        .iter()
                        .enumerate()
                        .map(|(k, &a)| a * mask[(k / (l * c)) * c + k % c])
                        .collect();
                    add_into(&mut grads, *x, gx);
                }
                Op::LstmCell { x, h, c, p, cache } => {
                    let (b, n) = (self.shape(*x)[0], self.shape(*x)[1]);
                    let w = self.lstm_weights(*p, n)?;
                    let hd = w.hidden;
                    let mut dh = Vec::with_capacity(b * hd);
                    let mut dc = Vec::with_capacity(b * hd);
                    for bi in 0..b {
                        dh.extend_from_slice(&g[bi * 2 * hd..bi * 2 * hd + hd]);
                        dc.extend_from_slice(&g[bi * 2 * hd + hd..(bi + 1) * 2 * hd]);
                    }
                    let mut dw_ih = needs(p.w_ih).then(|| zeros(p.w_ih));
                    let mut dw_hh = needs(p.w_hh).then(|| zeros(p.w_hh));
                    let mut db = needs(p.bias).then(|| zeros(p.bias));
                    let mut dx = needs(*x).then(|| zeros(*x));
                    let mut dh_prev = vec![T::zero(); b * hd];
                    let mut lg = LstmGrads {
                        w_ih: dw_ih.as_deref_mut(),
                        w_hh: dw_hh.as_deref_mut(),
                        bias: db.as_deref_mut(),
                    };
                    step_backward(
                        &w,
                        self.value(*x),
                        self.value(*h),
                        self.value(*c),
                        cache,
                        &dh,
                        &mut dc,
                        b,
                        &mut lg,
                        dx.as_deref_mut(),
                        &mut dh_prev,
                    );
                    for (id, d) in [(p.w_ih, dw_ih), (p.w_hh, dw_hh), (p.bias, db), (*x, dx)] {
                        if let Some(d) = d {
                            add_into(&mut grads, id, d);
                        }
                    }
                    if needs(*h) {
                        add_into(&mut grads, *h, dh_prev);
                    }
                    if needs(*c) {
                        add_into(&mut grads, *c, dc);
                    }
                }
                Op::SliceCols { x, start } => {
                    let (b, w) = (self.shape(*x)[0], self.shape(*x)[1]);
                    let width = node.shape[1];
                    let mut dx = vec![T::zero(); b * w];
                    for bi in 0..b {
                        dx[bi * w + start..bi * w + start + width].copy_from_slice(&g[bi * width..(bi + 1) * width]);
                    }
                    add_into(&mut grads, *x, dx);
                }
                Op::Recurrent {
                    x,
                    dirs,
                    return_sequences,
                } => {
                    let (b, l, n) = (self.shape(*x)[0], self.shape(*x)[1], self.shape(*x)[2]);
                    let shape = SeqShape { batch: b, len: l, input: n };
                    let total = *node.shape.last().expect("rank ≥ 2");
                    let mut dx = needs(*x).then(|| zeros(*x));
                    let mut off = 0;
                    for (p, cache) in dirs {
                        let w = self.lstm_weights(*p, n)?;
                        let hd = w.hidden;
                        // Output gradient per time index, gathered to B×H.
                        let per_t: Vec<Option<Vec<T>>> = if *return_sequences {
                            (0..l)
                                .map(|t| {
                                    let mut v = Vec::with_capacity(b * hd);
                                    for bi in 0..b {
                                        let base = (bi * l + t) * total + off;
                                        v.extend_from_slice(&g[base..base + hd]);
                                    }
                                    Some(v)
                                })
                                .collect()
                        } else {
                            let last = cache.last_time();
                            (0..l)
                                .map(|t| {
                                    (t == last).then(|| {
                                        (0..b)
                                            .flat_map(|bi| g[bi * total + off..bi * total + off + hd].iter().copied())
                                            .collect()
                                    })
                                })
                                .collect()
                        };
                        let mut dw_ih = needs(p.w_ih).then(|| zeros(p.w_ih));
                        let mut dw_hh = needs(p.w_hh).then(|| zeros(p.w_hh));
                        let mut db = needs(p.bias).then(|| zeros(p.bias));
                        let mut lg = LstmGrads {
                            w_ih: dw_ih.as_deref_mut(),
                            w_hh: dw_hh.as_deref_mut(),
                            bias: db.as_deref_mut(),
                        };
                        backward_direction(cache, shape, &w, |t| per_t[t].as_deref(), &mut lg, dx.as_deref_mut());
                        for (id, d) in [(p.w_ih, dw_ih), (p.w_hh, dw_hh), (p.bias, db)] {
                            if let Some(d) = d {
                                add_into(&mut grads, id, d);
                            }
                        }
                        off += hd;
                    }
                    if let Some(dx) = dx {
                        add_into(&mut grads, *x, dx);
                    }
                }
                Op::CrossEntropy { probs, labels } => {
                    let (b, c) = (self.shape(*probs)[0], self.shape(*probs)[1]);
                    let pv = self.value(*probs);
                    let scale = g[0] / T::lit(b as f64);
                    match self.nodes[probs.0].op {
                        // Fused softmax + cross-entropy: (p − onehot) / B.
                        Op::Activation {
                            x: logits,
                            kind: Activation::Softmax,
                        } if needs(logits) => {
                            let mut gl: Vec<T> = pv.iter().map(|&p| p * scale).collect();
                            for (i, &y) in labels.iter().enumerate() {
                                gl[i * c + y] -= scale;
                            }
                            add_into(&mut grads, logits, gl);
                        }
                        _ => {
                            let floor = T::lit(1e-12);
                            let mut gp = vec![T::zero(); b * c];
                            for (i, &y) in labels.iter().enumerate() {
                                let p = pv[i * c + y];
                                if p >= floor {
                                    gp[i * c + y] = -scale / p;
                                }
                            }
                            add_into(&mut grads, *probs, gp);
                        }
                    }
                }
                Op::WeightedSum { x, weights } => {
                    let gx = weights.iter().map(|&w| w * g[0]).collect();
                    add_into(&mut grads, *x, gx);
                }
            }
        }
        Ok(out)
    }
}
