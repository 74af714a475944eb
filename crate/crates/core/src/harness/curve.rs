//! Hierarchizer learning curves with and without template features.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::TitleVocab;
use crate::hierarchizer::{train_hierarchizer, HierConfig, LabeledSequence};
use crate::train::TrainConfig;

use super::pipeline::evaluate_hierarchizer;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub size: usize,
    pub with_template: bool,
    pub mean_error: f64,
    pub std_error: f64,
    /// Test error of each seed, in seed order.
    pub errors: Vec<f64>,
}

/// For each size and seed, trains on the first `size` documents of a
/// seed-shuffled pool and measures `1 - weighted F1` of levels on `test`.
/// The pool's titles must carry template one-hots for the template mode.
#[allow(clippy::too_many_arguments)]
pub fn run_learning_curve(
    pool: &[LabeledSequence],
    test: &[LabeledSequence],
    title_vocab: &TitleVocab,
    sizes: &[usize],
    with_template: bool,
    seeds: &[u64],
    hier: &HierConfig,
    train: &TrainConfig,
) -> Result<Vec<CurveRow>> {
    if let Some(&too_big) = sizes.iter().find(|&&s| s > pool.len()) {
        return Err(Error::InvalidInput(format!(
            "training size {too_big} exceeds the pool of {} documents",
            pool.len()
        )));
    }
    if seeds.is_empty() {
        return Err(Error::InvalidInput("at least one seed is required".into()));
    }
    let cfg = HierConfig {
        use_template: with_template,
        ..hier.clone()
    };
    let mut rows = Vec::with_capacity(sizes.len());
    for &size in sizes {
        let mut errors = Vec::with_capacity(seeds.len());
        for &seed in seeds {
            let mut idx: Vec<usize> = (0..pool.len()).collect();
            idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            let subset: Vec<LabeledSequence> = idx[..size].iter().map(|&i| pool[i].clone()).collect();
            let (model, _) = train_hierarchizer(&subset, title_vocab.clone(), &cfg, train, seed)?;
            let report = evaluate_hierarchizer(&model, test)?;
            log::info!("curve size {size} template {with_template} seed {seed}: error {:.4}", 1.0 - report.weighted_f1);
            errors.push(1.0 - report.weighted_f1);
        }
        let mean = errors.iter().sum::<f64>() / errors.len() as f64;
        let var = errors.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / errors.len() as f64;
        rows.push(CurveRow {
            size,
            with_template,
            mean_error: mean,
            std_error: var.sqrt(),
            errors,
        });
    }
    Ok(rows)
}

/// `mode,size,mean_error,std_error` lines with a header.
pub fn curve_csv(rows: &[CurveRow]) -> String {
    let mut out = String::from("mode,size,mean_error,std_error\n");
    for r in rows {
        let mode = if r.with_template { "template" } else { "no_template" };
        out.push_str(&format!("{mode},{},{:.6},{:.6}\n", r.size, r.mean_error, r.std_error));
    }
    out
}
