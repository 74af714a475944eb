//! Small neural toolkit for the two fixed architectures of the pipeline:
//! embeddings, 1D convolution and max-pooling, dense layers, dropout, a
//! bidirectional LSTM and a linear-chain CRF, with hand-written backward
//! passes and an Adam optimizer.
//!
//! Layers are plain weight holders. `forward` returns the output together with
//! whatever the backward pass needs; `backward` consumes that cache, adds
//! parameter gradients into [`Param::grad`] and returns the input gradient.

mod adam;
mod crf;
pub mod init;
mod layers;
mod lstm;
pub mod store;
mod text_cnn;

use ndarray::Array2;

pub use adam::{adam_step, Adam, AdamConfig, AdamState};
pub use crf::{crf_nll, crf_viterbi, CrfParams};
pub use layers::{
    conv1d_maxpool, relu, relu_backward, softmax_rows, softmax_cross_entropy, Conv1d, ConvCache,
    Dense, Dropout, Embedding, MaxPool1d, PoolCache,
};
pub use lstm::{BiLstm, BiLstmCache, Lstm, LstmCache};
pub use text_cnn::{validate_convs, ConvSpec, TextCnn, TextCnnCache};

/// A trainable matrix and its accumulated gradient. Vectors are stored as `1×n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub value: Array2<f64>,
    pub grad: Array2<f64>,
}

impl Param {
    pub fn new(name: impl Into<String>, value: Array2<f64>) -> Self {
        let grad = Array2::zeros(value.raw_dim());
        Param {
            name: name.into(),
            value,
            grad,
        }
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(0.0);
    }
}

/// Anything owning trainable parameters, visited in a fixed order.
pub trait Parameters {
    fn params(&self) -> Vec<&Param>;
    fn params_mut(&mut self) -> Vec<&mut Param>;

    fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    fn num_weights(&self) -> usize {
        self.params().iter().map(|p| p.value.len()).sum()
    }
}
