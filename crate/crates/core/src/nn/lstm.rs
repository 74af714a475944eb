use ndarray::{concatenate, s, Array1, Array2, Axis};
use rand::Rng;

use super::init::{glorot_uniform, orthogonal};
use super::{Param, Parameters};

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Single-direction LSTM with gates laid out `[input, forget, cell, output]`.
#[derive(Debug, Clone)]
pub struct Lstm {
    pub units: usize,
    pub w_input: Param,
    pub w_recurrent: Param,
    pub bias: Param,
}

#[derive(Debug, Clone)]
pub struct LstmCache {
    x: Array2<f64>,
    /// Activated gates per step, `N × 4h`.
    gates: Array2<f64>,
    /// Cell states; row `t + 1` is the state after step `t`.
    cells: Array2<f64>,
    /// Previous hidden state after the recurrent dropout mask, `N × h`.
    masked_prev: Array2<f64>,
    mask: Option<Array1<f64>>,
}

impl Lstm {
    pub fn new<R: Rng + ?Sized>(name: &str, in_dim: usize, units: usize, rng: &mut R) -> Self {
        let mut bias = Array2::zeros((1, 4 * units));
        bias.slice_mut(s![.., units..2 * units]).fill(1.0);
        Lstm {
            units,
            w_input: Param::new(format!("{name}.w_input"), glorot_uniform(rng, in_dim, 4 * units)),
            w_recurrent: Param::new(format!("{name}.w_recurrent"), orthogonal(rng, units, 4 * units)),
            bias: Param::new(format!("{name}.bias"), bias),
        }
    }

    /// Runs the sequence `x` (`N × in`). With `dropout = Some((rate, rng))`
    /// the recurrent input is masked by one inverted-dropout mask shared across steps.
    pub fn forward<R: Rng + ?Sized>(
        &self,
        x: &Array2<f64>,
        dropout: Option<(f64, &mut R)>,
    ) -> (Array2<f64>, LstmCache) {
        let h = self.units;
        let n = x.nrows();
        let mut pre = x.dot(&self.w_input.value);
        pre += &self.bias.value;
        let mask = match dropout {
            Some((rate, rng)) if rate > 0.0 => {
                let keep = 1.0 - rate;
                Some(Array1::from_shape_fn(h, |_| {
                    if rng.gen::<f64>() < keep {
                        1.0 / keep
                    } else {
                        0.0
                    }
                }))
            }
            _ => None,
        };
        let mut gates = Array2::zeros((n, 4 * h));
        let mut cells = Array2::zeros((n + 1, h));
        let mut hidden = Array2::zeros((n, h));
        let mut masked_prev = Array2::zeros((n, h));
        let mut h_prev = Array1::<f64>::zeros(h);
        for t in 0..n {
            let hm = match &mask {
                Some(m) => &h_prev * m,
                None => h_prev.clone(),
            };
            let z = &pre.row(t) + &hm.dot(&self.w_recurrent.value);
            masked_prev.row_mut(t).assign(&hm);
            let mut g = gates.row_mut(t);
            for k in 0..h {
                g[k] = sigmoid(z[k]);
                g[h + k] = sigmoid(z[h + k]);
                g[2 * h + k] = z[2 * h + k].tanh();
                g[3 * h + k] = sigmoid(z[3 * h + k]);
            }
            for k in 0..h {
                let c: f64 = g[h + k] * cells[[t, k]] + g[k] * g[2 * h + k];
                cells[[t + 1, k]] = c;
                h_prev[k] = g[3 * h + k] * c.tanh();
            }
            hidden.row_mut(t).assign(&h_prev);
        }
        (
            hidden,
            LstmCache {
                x: x.clone(),
                gates,
                cells,
                masked_prev,
                mask,
            },
        )
    }

    /// Backpropagation through time given the gradient of every hidden output.
    pub fn backward(&mut self, cache: &LstmCache, dhidden: &Array2<f64>) -> Array2<f64> {
        let h = self.units;
        let n = dhidden.nrows();
        let mut dz_all = Array2::zeros((n, 4 * h));
        let mut dh_next = Array1::<f64>::zeros(h);
        let mut dc_next = Array1::<f64>::zeros(h);
        for t in (0..n).rev() {
            let g = cache.gates.row(t);
            let mut dz = dz_all.row_mut(t);
            for k in 0..h {
                let (i, f, cg, o) = (g[k], g[h + k], g[2 * h + k], g[3 * h + k]);
                let c = cache.cells[[t + 1, k]];
                let c_prev = cache.cells[[t, k]];
                let tc = c.tanh();
                let dh = dhidden[[t, k]] + dh_next[k];
                let d_o = dh * tc;
                let dc = dc_next[k] + dh * o * (1.0 - tc * tc);
                dz[k] = dc * cg * i * (1.0 - i);
                dz[h + k] = dc * c_prev * f * (1.0 - f);
                dz[2 * h + k] = dc * i * (1.0 - cg * cg);
                dz[3 * h + k] = d_o * o * (1.0 - o);
                dc_next[k] = dc * f;
            }
            let dhm = self.w_recurrent.value.dot(&dz.view());
            dh_next = match &cache.mask {
                Some(m) => dhm * m,
                None => dhm,
            };
        }
        self.w_recurrent.grad += &cache.masked_prev.t().dot(&dz_all);
        self.w_input.grad += &cache.x.t().dot(&dz_all);
        self.bias.grad += &dz_all.sum_axis(Axis(0)).insert_axis(Axis(0));
        dz_all.dot(&self.w_input.value.t())
    }
}

impl Parameters for Lstm {
    fn params(&self) -> Vec<&Param> {
        vec![&self.w_input, &self.w_recurrent, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.w_input, &mut self.w_recurrent, &mut self.bias]
    }
}

/// Forward and backward LSTMs whose outputs are concatenated per step.
#[derive(Debug, Clone)]
pub struct BiLstm {
    pub forward_dir: Lstm,
    pub backward_dir: Lstm,
}

#[derive(Debug, Clone)]
pub struct BiLstmCache {
    fwd: LstmCache,
    bwd: LstmCache,
}

fn reversed(x: &Array2<f64>) -> Array2<f64> {
    x.slice(s![..;-1, ..]).to_owned()
}

impl BiLstm {
    pub fn new<R: Rng + ?Sized>(name: &str, in_dim: usize, units: usize, rng: &mut R) -> Self {
        BiLstm {
            forward_dir: Lstm::new(&format!("{name}.fwd"), in_dim, units, rng),
            backward_dir: Lstm::new(&format!("{name}.bwd"), in_dim, units, rng),
        }
    }

    pub fn units(&self) -> usize {
        self.forward_dir.units
    }

    /// `N × in` to `N × 2·units`; recurrent dropout only when `rng` is given.
    pub fn forward<R: Rng + ?Sized>(
        &self,
        x: &Array2<f64>,
        recurrent_dropout: f64,
        mut rng: Option<&mut R>,
    ) -> (Array2<f64>, BiLstmCache) {
        let (hf, fwd) = self
            .forward_dir
            .forward(x, rng.as_deref_mut().map(|r| (recurrent_dropout, r)));
        let (hb, bwd) = self
            .backward_dir
            .forward(&reversed(x), rng.map(|r| (recurrent_dropout, r)));
        let out = concatenate(Axis(1), &[hf.view(), reversed(&hb).view()]).expect("same row count");
        (out, BiLstmCache { fwd, bwd })
    }

    pub fn backward(&mut self, cache: &BiLstmCache, dout: &Array2<f64>) -> Array2<f64> {
        let h = self.units();
        let df = dout.slice(s![.., ..h]).to_owned();
        let db = reversed(&dout.slice(s![.., h..]).to_owned());
        let dx_f = self.forward_dir.backward(&cache.fwd, &df);
        let dx_b = self.backward_dir.backward(&cache.bwd, &db);
        dx_f + reversed(&dx_b)
    }
}

impl Parameters for BiLstm {
    fn params(&self) -> Vec<&Param> {
        let mut p = self.forward_dir.params();
        p.extend(self.backward_dir.params());
        p
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut p = self.forward_dir.params_mut();
        p.extend(self.backward_dir.params_mut());
        p
    }
}
