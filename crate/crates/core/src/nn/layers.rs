use ndarray::{Array2, Axis};
use rand::Rng;

use super::init::{glorot_uniform, glorot_uniform_shaped, orthogonal};
use super::{Param, Parameters};
use crate::error::{Error, Result};

/// Lookup table mapping token indices to dense rows.
#[derive(Debug, Clone)]
pub struct Embedding {
    pub table: Param,
}

impl Embedding {
    pub fn new<R: Rng + ?Sized>(name: &str, vocab: usize, dim: usize, rng: &mut R) -> Self {
        Embedding {
            table: Param::new(format!("{name}.table"), orthogonal(rng, vocab, dim)),
        }
    }

    pub fn dim(&self) -> usize {
        self.table.value.ncols()
    }

    pub fn forward(&self, indices: &[usize]) -> Result<Array2<f64>> {
        let (vocab, dim) = self.table.value.dim();
        let mut out = Array2::zeros((indices.len(), dim));
        for (row, &i) in indices.iter().enumerate() {
            if i >= vocab {
                return Err(Error::Shape(format!("token index {i} outside vocabulary of {vocab}")));
            }
            out.row_mut(row).assign(&self.table.value.row(i));
        }
        Ok(out)
    }

    pub fn backward(&mut self, indices: &[usize], grad: &Array2<f64>) {
        for (row, &i) in indices.iter().enumerate() {
            let mut g = self.table.grad.row_mut(i);
            g += &grad.row(row);
        }
    }
}

/// Valid (unpadded) 1D convolution along time over `batch` sequences of equal
/// length stacked row-wise: input `(batch·len) × in_dim`.
#[derive(Debug, Clone)]
pub struct Conv1d {
    pub width: usize,
    pub in_dim: usize,
    /// `(width·in_dim) × kernels`; row `j·in_dim + c` holds tap `j`, channel `c`.
    pub weight: Param,
    pub bias: Param,
}

#[derive(Debug, Clone)]
pub struct ConvCache {
    cols: Array2<f64>,
    batch: usize,
    len: usize,
}

impl Conv1d {
    pub fn new<R: Rng + ?Sized>(name: &str, in_dim: usize, kernels: usize, width: usize, rng: &mut R) -> Self {
        Conv1d {
            width,
            in_dim,
            weight: Param::new(
                format!("{name}.weight"),
                glorot_uniform_shaped(rng, width * in_dim, kernels, width * in_dim, width * kernels),
            ),
            bias: Param::new(format!("{name}.bias"), Array2::zeros((1, kernels))),
        }
    }

    pub fn kernels(&self) -> usize {
        self.weight.value.ncols()
    }

    pub fn out_len(&self, len: usize) -> usize {
        len + 1 - self.width
    }

    pub fn forward(&self, x: &Array2<f64>, batch: usize, len: usize) -> Result<(Array2<f64>, ConvCache)> {
        if len < self.width {
            return Err(Error::Shape(format!(
                "sequence length {len} is shorter than the filter width {}",
                self.width
            )));
        }
        if x.dim() != (batch * len, self.in_dim) {
            return Err(Error::Shape(format!(
                "conv input {:?}, expected ({}, {})",
                x.dim(),
                batch * len,
                self.in_dim
            )));
        }
        let x = x.as_standard_layout();
        let src = x.as_slice().expect("standard layout");
        let out_len = self.out_len(len);
        let span = self.width * self.in_dim;
        let mut cols = Array2::zeros((batch * out_len, span));
        {
            let dst = cols.as_slice_mut().expect("fresh array");
            for b in 0..batch {
                for t in 0..out_len {
                    let from = (b * len + t) * self.in_dim;
                    let row = b * out_len + t;
                    dst[row * span..(row + 1) * span].copy_from_slice(&src[from..from + span]);
                }
            }
        }
        let mut out = cols.dot(&self.weight.value);
        out += &self.bias.value;
        Ok((out, ConvCache { cols, batch, len }))
    }

    pub fn backward(&mut self, cache: &ConvCache, dout: &Array2<f64>) -> Array2<f64> {
        self.weight.grad += &cache.cols.t().dot(dout);
        self.bias.grad += &dout.sum_axis(Axis(0)).insert_axis(Axis(0));
        let dcols = dout.dot(&self.weight.value.t());
        let out_len = self.out_len(cache.len);
        let span = self.width * self.in_dim;
        let mut dx = Array2::<f64>::zeros((cache.batch * cache.len, self.in_dim));
        let dst = dx.as_slice_mut().expect("fresh array");
        let dcols = dcols.as_standard_layout();
        let src = dcols.as_slice().expect("standard layout");
        for b in 0..cache.batch {
            for t in 0..out_len {
                let to = (b * cache.len + t) * self.in_dim;
                let row = b * out_len + t;
                for (d, s) in dst[to..to + span].iter_mut().zip(&src[row * span..(row + 1) * span]) {
                    *d += s;
                }
            }
        }
        dx
    }
}

/// Non-overlapping max-pooling along time; a trailing remainder shorter than
/// the pool width is dropped.
#[derive(Debug, Clone, Copy)]
pub struct MaxPool1d {
    pub pool: usize,
}

#[derive(Debug, Clone)]
pub struct PoolCache {
    argmax: Vec<usize>,
    in_rows: usize,
}

impl MaxPool1d {
    pub fn out_len(&self, len: usize) -> usize {
        len / self.pool
    }

    pub fn forward(&self, x: &Array2<f64>, batch: usize, len: usize) -> (Array2<f64>, PoolCache) {
        let k = x.ncols();
        let out_len = self.out_len(len);
        let mut out = Array2::zeros((batch * out_len, k));
        let mut argmax = vec![0; batch * out_len * k];
        for b in 0..batch {
            for p in 0..out_len {
                let orow = b * out_len + p;
                for c in 0..k {
                    let mut best_row = b * len + p * self.pool;
                    let mut best = x[[best_row, c]];
                    for j in 1..self.pool {
                        let r = b * len + p * self.pool + j;
                        if x[[r, c]] > best {
                            best = x[[r, c]];
                            best_row = r;
                        }
                    }
                    out[[orow, c]] = best;
                    argmax[orow * k + c] = best_row;
                }
            }
        }
        (
            out,
            PoolCache {
                argmax,
                in_rows: x.nrows(),
            },
        )
    }

    pub fn backward(&self, cache: &PoolCache, dout: &Array2<f64>) -> Array2<f64> {
        let k = dout.ncols();
        let mut dx = Array2::zeros((cache.in_rows, k));
        for ((r, c), &g) in dout.indexed_iter() {
            dx[[cache.argmax[r * k + c], c]] += g;
        }
        dx
    }
}

/// Convolution followed by max-pooling on a single `T × d` sequence.
pub fn conv1d_maxpool(input: &Array2<f64>, conv: &Conv1d, pool: MaxPool1d) -> Result<Array2<f64>> {
    let len = input.nrows();
    let (h, _) = conv.forward(input, 1, len)?;
    Ok(pool.forward(&h, 1, conv.out_len(len)).0)
}

/// Fully-connected layer `y = x W + b`.
#[derive(Debug, Clone)]
pub struct Dense {
    pub weight: Param,
    pub bias: Param,
}

impl Dense {
    pub fn new<R: Rng + ?Sized>(name: &str, in_dim: usize, out_dim: usize, rng: &mut R) -> Self {
        Dense {
            weight: Param::new(format!("{name}.weight"), glorot_uniform(rng, in_dim, out_dim)),
            bias: Param::new(format!("{name}.bias"), Array2::zeros((1, out_dim))),
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weight.value.nrows()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.value.ncols()
    }

    pub fn forward(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.in_dim() {
            return Err(Error::Shape(format!(
                "dense input has {} columns, expected {}",
                x.ncols(),
                self.in_dim()
            )));
        }
        let mut y = x.dot(&self.weight.value);
        y += &self.bias.value;
        Ok(y)
    }

    /// `x` is the input given to the matching `forward` call.
    pub fn backward(&mut self, x: &Array2<f64>, dout: &Array2<f64>) -> Array2<f64> {
        self.weight.grad += &x.t().dot(dout);
        self.bias.grad += &dout.sum_axis(Axis(0)).insert_axis(Axis(0));
        dout.dot(&self.weight.value.t())
    }
}

pub fn relu(x: &Array2<f64>) -> Array2<f64> {
    x.mapv(|v| v.max(0.0))
}

/// Gradient of ReLU given its output.
pub fn relu_backward(y: &Array2<f64>, dout: &Array2<f64>) -> Array2<f64> {
    let mut d = dout.clone();
    d.zip_mut_with(y, |g, &v| {
        if v <= 0.0 {
            *g = 0.0
        }
    });
    d
}

/// Inverted dropout: kept units are scaled by `1 / (1 - rate)` at train time,
/// inference is the identity.
#[derive(Debug, Clone, Copy)]
pub struct Dropout {
    pub rate: f64,
}

impl Dropout {
    /// Returns the output and the mask applied (None in inference mode).
    pub fn forward<R: Rng + ?Sized>(
        &self,
        x: &Array2<f64>,
        rng: Option<&mut R>,
    ) -> (Array2<f64>, Option<Array2<f64>>) {
        match rng {
            Some(rng) if self.rate > 0.0 => {
                let keep = 1.0 - self.rate;
                let mask = Array2::from_shape_fn(x.raw_dim(), |_| {
                    if rng.gen::<f64>() < keep {
                        1.0 / keep
                    } else {
                        0.0
                    }
                });
                (x * &mask, Some(mask))
            }
            _ => (x.clone(), None),
        }
    }

    pub fn backward(mask: Option<&Array2<f64>>, dout: &Array2<f64>) -> Array2<f64> {
        match mask {
            Some(m) => dout * m,
            None => dout.clone(),
        }
    }
}

pub fn softmax_rows(logits: &Array2<f64>) -> Array2<f64> {
    let mut p = logits.clone();
    for mut row in p.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
    p
}

/// Class-weighted categorical cross-entropy averaged over the batch.
/// Returns the loss, the softmax probabilities and the gradient wrt the logits.
pub fn softmax_cross_entropy(
    logits: &Array2<f64>,
    labels: &[usize],
    class_weights: &[f64],
) -> (f64, Array2<f64>, Array2<f64>) {
    let probs = softmax_rows(logits);
    let n = labels.len().max(1) as f64;
    let mut loss = 0.0;
    let mut grad = probs.clone();
    for (i, &y) in labels.iter().enumerate() {
        let w = class_weights.get(y).copied().unwrap_or(1.0);
        loss -= w * probs[[i, y]].max(1e-300).ln();
        grad[[i, y]] -= 1.0;
        grad.row_mut(i).mapv_inplace(|g| g * w / n);
    }
    (loss / n, probs, grad)
}

impl Parameters for Embedding {
    fn params(&self) -> Vec<&Param> {
        vec![&self.table]
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.table]
    }
}

impl Parameters for Conv1d {
    fn params(&self) -> Vec<&Param> {
        vec![&self.weight, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.weight, &mut self.bias]
    }
}

impl Parameters for Dense {
    fn params(&self) -> Vec<&Param> {
        vec![&self.weight, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.weight, &mut self.bias]
    }
}
