use ndarray::Array2;

use super::{Param, Parameters};

fn log_sum_exp(values: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = values.collect();
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + v.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Linear-chain CRF potentials over `K` labels: `transitions[i][j]` scores
/// moving from label `i` to label `j`.
#[derive(Debug, Clone)]
pub struct CrfParams {
    pub transitions: Param,
    pub start: Param,
    pub end: Param,
}

impl CrfParams {
    pub fn new(name: &str, num_labels: usize) -> Self {
        CrfParams {
            transitions: Param::new(format!("{name}.transitions"), Array2::zeros((num_labels, num_labels))),
            start: Param::new(format!("{name}.start"), Array2::zeros((1, num_labels))),
            end: Param::new(format!("{name}.end"), Array2::zeros((1, num_labels))),
        }
    }

    pub fn num_labels(&self) -> usize {
        self.transitions.value.nrows()
    }

    fn trans(&self, i: usize, j: usize) -> f64 {
        self.transitions.value[[i, j]]
    }

    /// Unnormalized score of one label path.
    pub fn score(&self, emissions: &Array2<f64>, labels: &[usize]) -> f64 {
        let mut s = self.start.value[[0, labels[0]]] + self.end.value[[0, labels[labels.len() - 1]]];
        for (t, &y) in labels.iter().enumerate() {
            s += emissions[[t, y]];
            if t > 0 {
                s += self.trans(labels[t - 1], y);
            }
        }
        s
    }

    fn alphas(&self, emissions: &Array2<f64>) -> Array2<f64> {
        let (n, k) = emissions.dim();
        let mut alpha = Array2::zeros((n, k));
        for j in 0..k {
            alpha[[0, j]] = self.start.value[[0, j]] + emissions[[0, j]];
        }
        for t in 1..n {
            for j in 0..k {
                alpha[[t, j]] = emissions[[t, j]]
                    + log_sum_exp((0..k).map(|i| alpha[[t - 1, i]] + self.trans(i, j)));
            }
        }
        alpha
    }

    fn betas(&self, emissions: &Array2<f64>) -> Array2<f64> {
        let (n, k) = emissions.dim();
        let mut beta = Array2::zeros((n, k));
        for i in 0..k {
            beta[[n - 1, i]] = self.end.value[[0, i]];
        }
        for t in (0..n - 1).rev() {
            for i in 0..k {
                beta[[t, i]] = log_sum_exp(
                    (0..k).map(|j| self.trans(i, j) + emissions[[t + 1, j]] + beta[[t + 1, j]]),
                );
            }
        }
        beta
    }

    /// Log partition function by the forward algorithm.
    pub fn log_partition(&self, emissions: &Array2<f64>) -> f64 {
        let alpha = self.alphas(emissions);
        let last = emissions.nrows() - 1;
        log_sum_exp((0..self.num_labels()).map(|j| alpha[[last, j]] + self.end.value[[0, j]]))
    }

    /// Negative log-likelihood of `labels`.
    pub fn nll(&self, emissions: &Array2<f64>, labels: &[usize]) -> f64 {
        self.log_partition(emissions) - self.score(emissions, labels)
    }

    /// NLL plus its gradient: parameter gradients are accumulated into the
    /// params, the emission gradient is returned.
    pub fn nll_backward(&mut self, emissions: &Array2<f64>, labels: &[usize]) -> (f64, Array2<f64>) {
        self.nll_backward_scaled(emissions, labels, 1.0)
    }

    /// As [`CrfParams::nll_backward`] for the loss `scale * nll`; the returned
    /// NLL is unscaled.
    pub fn nll_backward_scaled(&mut self, emissions: &Array2<f64>, labels: &[usize], scale: f64) -> (f64, Array2<f64>) {
        let (n, k) = emissions.dim();
        let alpha = self.alphas(emissions);
        let beta = self.betas(emissions);
        let log_z = log_sum_exp((0..k).map(|j| alpha[[n - 1, j]] + self.end.value[[0, j]]));
        let nll = log_z - self.score(emissions, labels);

        let mut demis = Array2::zeros((n, k));
        for t in 0..n {
            for j in 0..k {
                demis[[t, j]] = (alpha[[t, j]] + beta[[t, j]] - log_z).exp();
            }
            demis[[t, labels[t]]] -= 1.0;
        }
        demis *= scale;
        for j in 0..k {
            self.start.grad[[0, j]] += demis[[0, j]];
            self.end.grad[[0, j]] += demis[[n - 1, j]];
        }
        for t in 1..n {
            for i in 0..k {
                for j in 0..k {
                    let p = (alpha[[t - 1, i]] + self.trans(i, j) + emissions[[t, j]] + beta[[t, j]]
                        - log_z)
                        .exp();
                    self.transitions.grad[[i, j]] += scale * p;
                }
            }
            self.transitions.grad[[labels[t - 1], labels[t]]] -= scale;
        }
        (nll, demis)
    }

    /// Highest-scoring label path; ties go to the lowest label index.
    pub fn viterbi(&self, emissions: &Array2<f64>) -> Vec<usize> {
        let (n, k) = emissions.dim();
        if n == 0 {
            return Vec::new();
        }
        let mut delta = Array2::zeros((n, k));
        let mut back = vec![0usize; n * k];
        for j in 0..k {
            delta[[0, j]] = self.start.value[[0, j]] + emissions[[0, j]];
        }
        for t in 1..n {
            for j in 0..k {
                let mut best_i = 0;
                let mut best = delta[[t - 1, 0]] + self.trans(0, j);
                for i in 1..k {
                    let v = delta[[t - 1, i]] + self.trans(i, j);
                    if v > best {
                        best = v;
                        best_i = i;
                    }
                }
                delta[[t, j]] = best + emissions[[t, j]];
                back[t * k + j] = best_i;
            }
        }
        let mut last = 0;
        let mut best = delta[[n - 1, 0]] + self.end.value[[0, 0]];
        for j in 1..k {
            let v = delta[[n - 1, j]] + self.end.value[[0, j]];
            if v > best {
                best = v;
                last = j;
            }
        }
        let mut path = vec![0; n];
        path[n - 1] = last;
        for t in (1..n).rev() {
            path[t - 1] = back[t * k + path[t]];
        }
        path
    }
}

impl Parameters for CrfParams {
    fn params(&self) -> Vec<&Param> {
        vec![&self.transitions, &self.start, &self.end]
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.transitions, &mut self.start, &mut self.end]
    }
}

/// Negative log-likelihood of a label path.
pub fn crf_nll(emissions: &Array2<f64>, labels: &[usize], params: &CrfParams) -> f64 {
    params.nll(emissions, labels)
}

/// Viterbi decode.
pub fn crf_viterbi(emissions: &Array2<f64>, params: &CrfParams) -> Vec<usize> {
    params.viterbi(emissions)
}
