//! Central-difference checks of the hand-written backward passes and a
//! brute-force enumeration oracle for the CRF. Each check returns the first
//! mismatch it finds.
#![allow(dead_code)]

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tocgen::nn::{
    relu, relu_backward, softmax_cross_entropy, BiLstm, Conv1d, ConvSpec, CrfParams, Dense, Embedding, Lstm,
    MaxPool1d, Parameters, TextCnn,
};

pub const H: f64 = 1e-5;
pub const TOL: f64 = 1e-4;

pub type Check = Result<(), String>;

pub fn random(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.gen_range(-1.0..1.0))
}

pub fn numeric(x: &Array2<f64>, mut f: impl FnMut(&Array2<f64>) -> f64) -> Array2<f64> {
    let mut g = Array2::zeros(x.raw_dim());
    let mut xp = x.clone();
    for idx in 0..x.len() {
        let (r, c) = (idx / x.ncols(), idx % x.ncols());
        let orig = xp[[r, c]];
        xp[[r, c]] = orig + H;
        let up = f(&xp);
        xp[[r, c]] = orig - H;
        let down = f(&xp);
        xp[[r, c]] = orig;
        g[[r, c]] = (up - down) / (2.0 * H);
    }
    g
}

pub fn relative_error(analytic: &Array2<f64>, numeric: &Array2<f64>) -> f64 {
    let diff = (analytic - numeric).mapv(|v| v * v).sum().sqrt();
    let scale = analytic.mapv(|v| v * v).sum().sqrt() + numeric.mapv(|v| v * v).sum().sqrt();
    if scale < 1e-10 {
        diff
    } else {
        diff / scale
    }
}

pub fn close(label: &str, analytic: &Array2<f64>, numeric: &Array2<f64>) -> Check {
    let rel = relative_error(analytic, numeric);
    if rel < TOL {
        Ok(())
    } else {
        Err(format!("{label}: relative error {rel:e}"))
    }
}

fn weighted_sum(y: &Array2<f64>, r: &Array2<f64>) -> f64 {
    (y * r).sum()
}

/// Checks every parameter of `model` against finite differences of `loss`.
fn params_close<M: Parameters + Clone>(model: &M, loss: impl Fn(&M) -> f64) -> Check {
    for i in 0..model.params().len() {
        let p = &model.params()[i];
        let num = numeric(&p.value, |v| {
            let mut m = model.clone();
            m.params_mut()[i].value = v.clone();
            loss(&m)
        });
        close(&p.name, &p.grad, &num)?;
    }
    Ok(())
}

pub fn embedding(seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut emb = Embedding::new("e", 6, 4, &mut rng);
    let idx = [0usize, 3, 3, 5, 1];
    let r = random(&mut rng, 5, 4);
    emb.backward(&idx, &r);
    params_close(&emb, |e| weighted_sum(&e.forward(&idx).unwrap(), &r))
}

pub fn conv_pool(seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (batch, len, in_dim) = (2, 9, 3);
    let mut conv = Conv1d::new("c", in_dim, 4, 3, &mut rng);
    let pool = MaxPool1d { pool: 2 };
    let x = random(&mut rng, batch * len, in_dim);
    let out_len = conv.out_len(len);
    let r = random(&mut rng, batch * pool.out_len(out_len), 4);
    let loss = |c: &Conv1d, x: &Array2<f64>| {
        let (y, _) = c.forward(x, batch, len).unwrap();
        let (p, _) = pool.forward(&y, batch, out_len);
        weighted_sum(&p, &r)
    };
    let (y, cache) = conv.forward(&x, batch, len).unwrap();
    let (_, pcache) = pool.forward(&y, batch, out_len);
    let dy = pool.backward(&pcache, &r);
    let dx = conv.backward(&cache, &dy);
    close("conv input", &dx, &numeric(&x, |xp| loss(&conv, xp)))?;
    params_close(&conv, |c| loss(c, &x))
}

pub fn dense_relu_softmax(seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut d1 = Dense::new("d1", 5, 6, &mut rng);
    let mut d2 = Dense::new("d2", 6, 3, &mut rng);
    let x = random(&mut rng, 4, 5);
    let labels = [0usize, 2, 1, 2];
    let weights = [1.0, 2.5, 0.5];
    let loss = |a: &Dense, b: &Dense, x: &Array2<f64>| {
        let h = relu(&a.forward(x).unwrap());
        softmax_cross_entropy(&b.forward(&h).unwrap(), &labels, &weights).0
    };
    let h = relu(&d1.forward(&x).unwrap());
    let logits = d2.forward(&h).unwrap();
    let (_, _, dlogits) = softmax_cross_entropy(&logits, &labels, &weights);
    let dh = d2.backward(&h, &dlogits);
    let dx = d1.backward(&x, &relu_backward(&h, &dh));
    close("dense input", &dx, &numeric(&x, |xp| loss(&d1, &d2, xp)))?;
    params_close(&d1, |a| loss(a, &d2, &x))?;
    params_close(&d2, |b| loss(&d1, b, &x))
}

pub fn lstm(seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut lstm = Lstm::new("l", 3, 4, &mut rng);
    let x = random(&mut rng, 5, 3);
    let r = random(&mut rng, 5, 4);
    let loss = |l: &Lstm, x: &Array2<f64>| weighted_sum(&l.forward::<ChaCha8Rng>(x, None).0, &r);
    let (_, cache) = lstm.forward::<ChaCha8Rng>(&x, None);
    let dx = lstm.backward(&cache, &r);
    close("lstm input", &dx, &numeric(&x, |xp| loss(&lstm, xp)))?;
    params_close(&lstm, |l| loss(l, &x))
}

/// Recurrent dropout with a re-seeded mask, so the masked forward pass is a
/// fixed function of the weights.
pub fn lstm_masked(seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut lstm = Lstm::new("l", 2, 6, &mut rng);
    let x = random(&mut rng, 4, 2);
    let r = random(&mut rng, 4, 6);
    let loss = |l: &Lstm, x: &Array2<f64>| {
        let mut m = ChaCha8Rng::seed_from_u64(99);
        weighted_sum(&l.forward(x, Some((0.3, &mut m))).0, &r)
    };
    let mut m = ChaCha8Rng::seed_from_u64(99);
    let (_, cache) = lstm.forward(&x, Some((0.3, &mut m)));
    let dx = lstm.backward(&cache, &r);
    close("masked lstm input", &dx, &numeric(&x, |xp| loss(&lstm, xp)))?;
    params_close(&lstm, |l| loss(l, &x))
}

pub fn bilstm(seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bi = BiLstm::new("b", 3, 3, &mut rng);
    let x = random(&mut rng, 4, 3);
    let r = random(&mut rng, 4, 6);
    let loss = |b: &BiLstm, x: &Array2<f64>| weighted_sum(&b.forward::<ChaCha8Rng>(x, 0.0, None).0, &r);
    let (_, cache) = bi.forward::<ChaCha8Rng>(&x, 0.0, None);
    let dx = bi.backward(&cache, &r);
    close("bilstm input", &dx, &numeric(&x, |xp| loss(&bi, xp)))?;
    params_close(&bi, |b| loss(b, &x))
}

pub fn random_crf(rng: &mut ChaCha8Rng, k: usize) -> CrfParams {
    let mut crf = CrfParams::new("crf", k);
    crf.transitions.value = random(rng, k, k);
    crf.start.value = random(rng, 1, k);
    crf.end.value = random(rng, 1, k);
    crf
}

pub fn crf_nll(seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut crf = random_crf(&mut rng, 4);
    let e = random(&mut rng, 6, 4);
    let labels = [0usize, 1, 1, 3, 2, 0];
    let (_, de) = crf.nll_backward(&e, &labels);
    close("crf emissions", &de, &numeric(&e, |ep| crf.nll(ep, &labels)))?;
    params_close(&crf, |c| c.nll(&e, &labels))
}

/// Word or character CNN with dropout masks replayed from a fixed seed.
pub fn text_cnn(seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let convs = [ConvSpec::new(3, 2, 2), ConvSpec::new(2, 3, 2)];
    let mut net = TextCnn::new("t", 7, 4, 8, &convs, 5, 0.25, &mut rng).unwrap();
    let idx: Vec<usize> = (0..16).map(|i| (i * 3) % 7).collect();
    let r = random(&mut rng, 2, 5);
    let loss = |n: &TextCnn| {
        let mut m = ChaCha8Rng::seed_from_u64(42);
        weighted_sum(&n.forward(&idx, 2, Some(&mut m)).unwrap().0, &r)
    };
    let mut m = ChaCha8Rng::seed_from_u64(42);
    let (_, cache) = net.forward(&idx, 2, Some(&mut m)).unwrap();
    net.backward(&cache, &r);
    params_close(&net, loss)
}

/// Every check above, by name.
pub fn all(seed: u64) -> Vec<(&'static str, Check)> {
    vec![
        ("embedding", embedding(seed)),
        ("conv1d + max-pool", conv_pool(seed + 1)),
        ("dense + relu + softmax", dense_relu_softmax(seed + 2)),
        ("lstm", lstm(seed + 3)),
        ("lstm, recurrent dropout", lstm_masked(seed + 4)),
        ("bilstm", bilstm(seed + 5)),
        ("crf nll", crf_nll(seed + 6)),
        ("text cnn", text_cnn(seed + 7)),
    ]
}

fn all_paths(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|p| {
                (0..k).map(move |y| {
                    let mut q = p.clone();
                    q.push(y);
                    q
                })
            })
            .collect();
    }
    out
}

/// Compares the CRF's partition function, Viterbi path and NLL with
/// exhaustive enumeration over all `k^n` label paths.
pub fn crf_against_enumeration(seed: u64, n: usize, k: usize, tol: f64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let crf = random_crf(&mut rng, k);
    let e = random(&mut rng, n, k).mapv(|v| v * 3.0);
    let paths = all_paths(n, k);
    let scores: Vec<f64> = paths.iter().map(|p| crf.score(&e, p)).collect();
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_z = max + scores.iter().map(|s| (s - max).exp()).sum::<f64>().ln();
    let fail = |what: &str, got: f64, want: f64| Err(format!("n={n} k={k} seed={seed}: {what} {got} vs {want}"));
    if (crf.log_partition(&e) - log_z).abs() > tol {
        return fail("log partition", crf.log_partition(&e), log_z);
    }
    let best = crf.viterbi(&e);
    if (crf.score(&e, &best) - max).abs() > tol {
        return fail("viterbi score", crf.score(&e, &best), max);
    }
    // A unique best path must be the decoded one.
    let first_best = &paths[scores.iter().position(|&s| s == max).unwrap()];
    if scores.iter().filter(|&&s| (s - max).abs() <= tol).count() == 1 && &best != first_best {
        return Err(format!("n={n} k={k} seed={seed}: viterbi path {best:?} vs {first_best:?}"));
    }
    for (p, s) in paths.iter().zip(&scores) {
        if (crf.nll(&e, p) - (log_z - s)).abs() > tol {
            return fail("nll", crf.nll(&e, p), log_z - s);
        }
    }
    Ok(())
}
