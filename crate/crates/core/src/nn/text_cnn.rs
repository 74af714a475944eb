use ndarray::{concatenate, s, Array2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{relu, relu_backward, Conv1d, ConvCache, Dense, Dropout, Embedding, MaxPool1d, Param, Parameters, PoolCache};
use crate::error::{Error, Result};

/// One convolution branch: `kernels` filters of width `filter`, then max-pool of width `pool`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvSpec {
    pub kernels: usize,
    pub filter: usize,
    pub pool: usize,
}

impl ConvSpec {
    pub const fn new(kernels: usize, filter: usize, pool: usize) -> Self {
        ConvSpec { kernels, filter, pool }
    }

    /// Flattened width of this branch's output for sequences of length `len`.
    pub fn flat_len(&self, len: usize) -> usize {
        ((len + 1).saturating_sub(self.filter) / self.pool.max(1)) * self.kernels
    }
}

/// Checks that every branch produces at least one pooled step for `len`.
pub fn validate_convs(convs: &[ConvSpec], len: usize) -> Result<()> {
    if convs.is_empty() {
        return Err(Error::Config("at least one convolution branch is required".into()));
    }
    for c in convs {
        if c.kernels == 0 || c.filter == 0 || c.pool == 0 {
            return Err(Error::Config(format!("convolution {c:?} has a zero dimension")));
        }
        if c.filter > len {
            return Err(Error::Config(format!(
                "filter width {} exceeds sequence length {len}",
                c.filter
            )));
        }
        if c.flat_len(len) == 0 {
            return Err(Error::Config(format!("convolution {c:?} pools to nothing at length {len}")));
        }
    }
    Ok(())
}

/// Token embedding, parallel conv/ReLU/max-pool branches, concatenation and a
/// ReLU dense layer, with dropout before and after the dense layer.
#[derive(Debug, Clone)]
pub struct TextCnn {
    pub embedding: Embedding,
    pub convs: Vec<Conv1d>,
    pub pools: Vec<MaxPool1d>,
    pub fc: Dense,
    pub seq_len: usize,
    pub dropout: Dropout,
}

#[derive(Debug)]
pub struct TextCnnCache {
    indices: Vec<usize>,
    batch: usize,
    convs: Vec<ConvCache>,
    activations: Vec<Array2<f64>>,
    pools: Vec<PoolCache>,
    flat: Array2<f64>,
    flat_mask: Option<Array2<f64>>,
    hidden: Array2<f64>,
    hidden_mask: Option<Array2<f64>>,
}

impl TextCnn {
    #[allow(clippy::too_many_arguments)]
    pub fn new<R: Rng + ?Sized>(
        name: &str,
        vocab: usize,
        embed_dim: usize,
        seq_len: usize,
        convs: &[ConvSpec],
        fc_dim: usize,
        dropout: f64,
        rng: &mut R,
    ) -> Result<Self> {
        validate_convs(convs, seq_len)?;
        let embedding = Embedding::new(&format!("{name}.embedding"), vocab, embed_dim, rng);
        let layers: Vec<Conv1d> = convs
            .iter()
            .enumerate()
            .map(|(i, c)| Conv1d::new(&format!("{name}.conv{i}"), embed_dim, c.kernels, c.filter, rng))
            .collect();
        let flat: usize = convs.iter().map(|c| c.flat_len(seq_len)).sum();
        Ok(TextCnn {
            embedding,
            convs: layers,
            pools: convs.iter().map(|c| MaxPool1d { pool: c.pool }).collect(),
            fc: Dense::new(&format!("{name}.fc"), flat, fc_dim, rng),
            seq_len,
            dropout: Dropout { rate: dropout },
        })
    }

    pub fn out_dim(&self) -> usize {
        self.fc.out_dim()
    }

    /// `indices` holds `batch` sequences of `seq_len` tokens back to back.
    /// Dropout is active only when `rng` is given.
    pub fn forward<R: Rng + ?Sized>(
        &self,
        indices: &[usize],
        batch: usize,
        mut rng: Option<&mut R>,
    ) -> Result<(Array2<f64>, TextCnnCache)> {
        if indices.len() != batch * self.seq_len {
            return Err(Error::Shape(format!(
                "expected {batch}x{} token indices, got {}",
                self.seq_len,
                indices.len()
            )));
        }
        let emb = self.embedding.forward(indices)?;
        let mut conv_caches = Vec::with_capacity(self.convs.len());
        let mut activations = Vec::with_capacity(self.convs.len());
        let mut pool_caches = Vec::with_capacity(self.convs.len());
        let mut flats = Vec::with_capacity(self.convs.len());
        for (conv, pool) in self.convs.iter().zip(&self.pools) {
            let (y, cc) = conv.forward(&emb, batch, self.seq_len)?;
            let a = relu(&y);
            let out_len = conv.out_len(self.seq_len);
            let (p, pc) = pool.forward(&a, batch, out_len);
            let width = pool.out_len(out_len) * conv.kernels();
            flats.push(
                p.into_shape_with_order((batch, width))
                    .map_err(|e| Error::Shape(e.to_string()))?,
            );
            conv_caches.push(cc);
            activations.push(a);
            pool_caches.push(pc);
        }
        let views: Vec<_> = flats.iter().map(|f| f.view()).collect();
        let flat = concatenate(Axis(1), &views).map_err(|e| Error::Shape(e.to_string()))?;
        let (flat_d, flat_mask) = self.dropout.forward(&flat, rng.as_deref_mut());
        let hidden = relu(&self.fc.forward(&flat_d)?);
        let (out, hidden_mask) = self.dropout.forward(&hidden, rng);
        Ok((
            out,
            TextCnnCache {
                indices: indices.to_vec(),
                batch,
                convs: conv_caches,
                activations,
                pools: pool_caches,
                flat: flat_d,
                flat_mask,
                hidden,
                hidden_mask,
            },
        ))
    }

    pub fn backward(&mut self, cache: &TextCnnCache, dout: &Array2<f64>) {
        let dhidden = Dropout::backward(cache.hidden_mask.as_ref(), dout);
        let dpre = relu_backward(&cache.hidden, &dhidden);
        let dflat = Dropout::backward(cache.flat_mask.as_ref(), &self.fc.backward(&cache.flat, &dpre));
        let mut demb = Array2::<f64>::zeros((cache.indices.len(), self.embedding.dim()));
        let mut offset = 0;
        for (i, conv) in self.convs.iter_mut().enumerate() {
            let out_len = conv.out_len(self.seq_len);
            let pooled = self.pools[i].out_len(out_len);
            let k = conv.kernels();
            let width = pooled * k;
            let dp = dflat
                .slice(s![.., offset..offset + width])
                .to_owned()
                .into_shape_with_order((cache.batch * pooled, k))
                .expect("contiguous slice");
            offset += width;
            let da = self.pools[i].backward(&cache.pools[i], &dp);
            let dy = relu_backward(&cache.activations[i], &da);
            demb += &conv.backward(&cache.convs[i], &dy);
        }
        self.embedding.backward(&cache.indices, &demb);
    }
}

impl Parameters for TextCnn {
    fn params(&self) -> Vec<&Param> {
        let mut v = vec![&self.embedding.table];
        for c in &self.convs {
            v.push(&c.weight);
            v.push(&c.bias);
        }
        v.push(&self.fc.weight);
        v.push(&self.fc.bias);
        v
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut v = vec![&mut self.embedding.table];
        for c in &mut self.convs {
            v.push(&mut c.weight);
            v.push(&mut c.bias);
        }
        v.push(&mut self.fc.weight);
        v.push(&mut self.fc.bias);
        v
    }
}
