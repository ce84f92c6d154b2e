//! Finite-difference checks of every differentiable op and of both models,
//! all in f64 with step 1e-5.

use feedback_core::embeddings::EmbeddingMatrix;
use feedback_core::models::{BiLstmConfig, CnnConfig, Model, ModelConfig, SecondLayer};
use feedback_core::tensor::gradcheck::check_gradients;
use feedback_core::tensor::{Activation, BiLstmOptions, Graph, LstmParams, Mode, ParamStore, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const STEP: f64 = 1e-5;
const OP_TOL: f64 = 1e-4;
const MODEL_TOL: f64 = 1e-3;

fn random(rng: &mut ChaCha8Rng, shape: &[usize], scale: f64) -> Tensor<f64> {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.gen_range(-scale..scale)).collect()).unwrap()
}

fn weights(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn assert_ok(name: &str, store: &mut ParamStore<f64>, tol: f64, build: impl Fn(&mut Graph<'_, f64>) -> feedback_core::Result<feedback_core::tensor::NodeId>) {
    let r = check_gradients(store, STEP, build).unwrap();
    assert!(r.checked > 0, "{name}: nothing checked");
    assert!(r.max_rel_err < tol, "{name}: max rel err {:.3e} at {:?}", r.max_rel_err, r.worst);
}

#[test]
fn embedding_lookup() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut store = ParamStore::new();
    let t = store.add("table", random(&mut rng, &[6, 3], 1.0), true);
    // id 0 is PAD, whose row never receives gradient; see pad_row_gets_no_gradient
    let ids = [3, 2, 2, 5, 1, 3];
    let w = weights(&mut rng, 18);
    assert_ok("embedding", &mut store, OP_TOL, |g| {
        let table = g.param(t);
        let e = g.embedding(table, &ids, 2, 3)?;
        g.weighted_sum(e, w.clone())
    });
}

#[test]
fn pad_row_gets_no_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut store = ParamStore::new();
    let t = store.add("table", random(&mut rng, &[4, 3], 1.0), true);
    let mut g = Graph::new(&store);
    let table = g.param(t);
    let e = g.embedding(table, &[0, 1, 0, 2], 2, 2).unwrap();
    let loss = g.weighted_sum(e, vec![1.0; 12]).unwrap();
    let grads = g.backward(loss).unwrap();
    let gt = grads.get(t).unwrap();
    assert_eq!(&gt[..3], &[0.0; 3]);
    assert_eq!(&gt[3..9], &[1.0; 6]);
}

#[test]
fn conv1d_each_activation() {
    for (i, act) in [Activation::Identity, Activation::Relu, Activation::Sigmoid, Activation::Tanh]
        .into_iter()
        .enumerate()
    {
        let mut rng = ChaCha8Rng::seed_from_u64(10 + i as u64);
        let (b, l, cin, cout, k) = (2, rng.gen_range(3..7), 3, rng.gen_range(2..5), rng.gen_range(1..4));
        let mut store = ParamStore::new();
        let x = store.add("x", random(&mut rng, &[b, l, cin], 1.0), true);
        let kern = store.add("kernel", random(&mut rng, &[cout, k, cin], 0.5), true);
        let bias = store.add("bias", random(&mut rng, &[cout], 0.5), true);
        let w = weights(&mut rng, b * (l - k + 1) * cout);
        assert_ok(&format!("conv1d {act:?}"), &mut store, OP_TOL, |g| {
            let (x, kern, bias) = (g.param(x), g.param(kern), g.param(bias));
            let y = g.conv1d(x, kern, bias, act)?;
            g.weighted_sum(y, w.clone())
        });
    }
}

#[test]
fn global_max_pool() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut store = ParamStore::new();
    let x = store.add("x", random(&mut rng, &[3, 5, 4], 1.0), true);
    let w = weights(&mut rng, 12);
    assert_ok("max pool", &mut store, OP_TOL, |g| {
        let x = g.param(x);
        let y = g.global_max_pool1d(x)?;
        g.weighted_sum(y, w.clone())
    });
}

#[test]
fn dense_each_activation() {
    for (i, act) in [
        Activation::Identity,
        Activation::Relu,
        Activation::Sigmoid,
        Activation::Tanh,
        Activation::Softmax,
    ]
    .into_iter()
    .enumerate()
    {
        let mut rng = ChaCha8Rng::seed_from_u64(20 + i as u64);
        let (b, n, m) = (3, rng.gen_range(2..6), rng.gen_range(2..6));
        let mut store = ParamStore::new();
        let x = store.add("x", random(&mut rng, &[b, n], 1.0), true);
        let wt = store.add("w", random(&mut rng, &[n, m], 0.7), true);
        let bias = store.add("b", random(&mut rng, &[m], 0.3), true);
        let w = weights(&mut rng, b * m);
        assert_ok(&format!("dense {act:?}"), &mut store, OP_TOL, |g| {
            let (x, wt, bias) = (g.param(x), g.param(wt), g.param(bias));
            let y = g.dense(x, wt, bias, act)?;
            g.weighted_sum(y, w.clone())
        });
    }
}

#[test]
fn standalone_activations() {
    for (i, act) in [Activation::Relu, Activation::Sigmoid, Activation::Tanh, Activation::Softmax]
        .into_iter()
        .enumerate()
    {
        let mut rng = ChaCha8Rng::seed_from_u64(30 + i as u64);
        let mut store = ParamStore::new();
        let x = store.add("x", random(&mut rng, &[2, 3, 4], 2.0), true);
        let w = weights(&mut rng, 24);
        assert_ok(&format!("activation {act:?}"), &mut store, OP_TOL, |g| {
            let x = g.param(x);
            let y = g.activation(x, act)?;
            g.weighted_sum(y, w.clone())
        });
    }
}

#[test]
fn dropout_variants_train_mode() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut store = ParamStore::new();
    let x = store.add("x", random(&mut rng, &[2, 4, 5], 1.0), true);
    let w = weights(&mut rng, 40);
    assert_ok("dropout", &mut store, OP_TOL, |g| {
        let x = g.param(x);
        let y = g.dropout(x, 0.4, Mode::Train, 99)?;
        g.weighted_sum(y, w.clone())
    });
    assert_ok("spatial dropout", &mut store, OP_TOL, |g| {
        let x = g.param(x);
        let y = g.spatial_dropout1d(x, 0.4, Mode::Train, 7)?;
        g.weighted_sum(y, w.clone())
    });
}

fn lstm_params(store: &mut ParamStore<f64>, rng: &mut ChaCha8Rng, prefix: &str, n: usize, h: usize) -> [feedback_core::tensor::ParamId; 3] {
    [
        store.add(format!("{prefix}.w_ih"), random(rng, &[4 * h, n], 0.6), true),
        store.add(format!("{prefix}.w_hh"), random(rng, &[4 * h, h], 0.6), true),
        store.add(format!("{prefix}.bias"), random(rng, &[4 * h], 0.3), true),
    ]
}

fn nodes(g: &mut Graph<'_, f64>, p: [feedback_core::tensor::ParamId; 3]) -> LstmParams {
    LstmParams {
        w_ih: g.param(p[0]),
        w_hh: g.param(p[1]),
        bias: g.param(p[2]),
    }
}

#[test]
fn lstm_cell_and_slices() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (b, n, h) = (2, 3, 4);
    let mut store = ParamStore::new();
    let x = store.add("x", random(&mut rng, &[b, n], 1.0), true);
    let h0 = store.add("h0", random(&mut rng, &[b, h], 0.5), true);
    let c0 = store.add("c0", random(&mut rng, &[b, h], 0.5), true);
    let p = lstm_params(&mut store, &mut rng, "cell", n, h);
    let wh = weights(&mut rng, b * h);
    let wc = weights(&mut rng, b * h);
    for (out, w) in [(0, wh), (1, wc)] {
        assert_ok("lstm cell", &mut store, OP_TOL, |g| {
            let (xn, hn, cn) = (g.param(x), g.param(h0), g.param(c0));
            let params = nodes(g, p);
            let (h1, c1) = g.lstm_cell(xn, hn, cn, params)?;
            // second step so state gradients pass through a cell
            let (h2, c2) = g.lstm_cell(xn, h1, c1, params)?;
            g.weighted_sum([h2, c2][out], w.clone())
        });
    }
}

#[test]
fn slice_columns() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut store = ParamStore::new();
    let x = store.add("x", random(&mut rng, &[3, 6], 1.0), true);
    let w = weights(&mut rng, 6);
    assert_ok("slice_cols", &mut store, OP_TOL, |g| {
        let x = g.param(x);
        let y = g.slice_cols(x, 2, 4)?;
        g.weighted_sum(y, w.clone())
    });
}

fn check_recurrent(seed: u64, backward_only: bool, return_sequences: bool, mode: Mode) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (b, l, n, h) = (2, rng.gen_range(1..5), 3, rng.gen_range(2..4));
    let mut store = ParamStore::new();
    let x = store.add("x", random(&mut rng, &[b, l, n], 1.0), true);
    let f = lstm_params(&mut store, &mut rng, "fwd", n, h);
    let r = lstm_params(&mut store, &mut rng, "bwd", n, h);
    let dirs = if backward_only { 1 } else { 2 };
    let out = if return_sequences { b * l * dirs * h } else { b * dirs * h };
    let w = weights(&mut rng, out);
    let opts = BiLstmOptions {
        return_sequences,
        dropout: 0.3,
        recurrent_dropout: 0.3,
        mode,
        seed: 11,
    };
    let name = format!("recurrent l={l} backward_only={backward_only} seq={return_sequences} {mode:?}");
    assert_ok(&name, &mut store, OP_TOL, |g| {
        let xn = g.param(x);
        let fp = nodes(g, f);
        let rp = nodes(g, r);
        let y = if backward_only {
            g.recurrent(xn, &[(rp, true)], opts)?
        } else {
            g.bilstm(xn, fp, rp, opts)?
        };
        g.weighted_sum(y, w.clone())
    });
}

#[test]
fn bilstm_layers() {
    let mut seed = 40;
    for backward_only in [false, true] {
        for return_sequences in [false, true] {
            for mode in [Mode::Infer, Mode::Train] {
                check_recurrent(seed, backward_only, return_sequences, mode);
                seed += 1;
            }
        }
    }
}

#[test]
fn softmax_cross_entropy() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut store = ParamStore::new();
    let x = store.add("x", random(&mut rng, &[4, 3], 1.0), true);
    let wt = store.add("w", random(&mut rng, &[3, 5], 1.0), true);
    let bias = store.add("b", random(&mut rng, &[5], 0.5), true);
    let labels = [0, 4, 2, 2];
    // fused path (softmax inside dense) and the standalone softmax node
    assert_ok("dense softmax + ce", &mut store, OP_TOL, |g| {
        let (x, wt, bias) = (g.param(x), g.param(wt), g.param(bias));
        let p = g.dense(x, wt, bias, Activation::Softmax)?;
        g.cross_entropy(p, &labels)
    });
    assert_ok("softmax + ce", &mut store, OP_TOL, |g| {
        let (x, wt, bias) = (g.param(x), g.param(wt), g.param(bias));
        let z = g.dense(x, wt, bias, Activation::Identity)?;
        let p = g.activation(z, Activation::Softmax)?;
        g.cross_entropy(p, &labels)
    });
}

fn emb(rng: &mut ChaCha8Rng, v: usize, d: usize) -> EmbeddingMatrix {
    let mut m = EmbeddingMatrix::new(v, d, (0..v * d).map(|_| rng.gen_range(-0.5..0.5)).collect()).unwrap();
    m.row_mut(0).iter_mut().for_each(|x| *x = 0.0);
    m
}

fn check_model(config: ModelConfig, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (v, d, l, c) = (config.vocab_size(), config.dim(), config.seq_len(), config.num_classes());
    let template = Model::<f64>::build(config, &emb(&mut rng, v, d), seed).unwrap();
    let mut model = template.clone();
    let batch = 3;
    // PAD (id 0) is left out: its row is held at zero by the backward pass
    let ids: Vec<usize> = (0..batch * l).map(|_| rng.gen_range(1..v)).collect();
    let labels: Vec<usize> = (0..batch).map(|i| i % c).collect();
    for mode in [Mode::Infer, Mode::Train] {
        let r = check_gradients(model.params_mut(), STEP, |g| {
            let p = template.forward(g, &ids, batch, mode, 5)?;
            g.cross_entropy(p, &labels)
        })
        .unwrap();
        assert!(
            r.max_rel_err < MODEL_TOL,
            "{:?} {mode:?}: max rel err {:.3e} at {:?}",
            template.architecture(),
            r.max_rel_err,
            r.worst
        );
    }
}

#[test]
fn full_cnn() {
    check_model(
        ModelConfig::Cnn(CnnConfig {
            vocab_size: 9,
            dim: 4,
            seq_len: 7,
            conv1_filters: 5,
            conv1_kernel: 3,
            conv2_filters: 4,
            conv2_kernel: 2,
            dense_units: 6,
            num_classes: 3,
            ..Default::default()
        }),
        7,
    );
}

#[test]
fn full_bilstm() {
    for (i, second_layer) in [SecondLayer::Bidirectional, SecondLayer::BackwardOnly].into_iter().enumerate() {
        check_model(
            ModelConfig::Bilstm(BiLstmConfig {
                vocab_size: 9,
                dim: 4,
                seq_len: 4,
                lstm1_units: 3,
                lstm2_units: 2,
                second_layer,
                dense_units: 4,
                num_classes: 3,
                ..Default::default()
            }),
            8 + i as u64,
        );
    }
}
