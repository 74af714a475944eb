//! Title detection: a character-level CNN over the block text whose dense
//! output is concatenated with the hand-crafted feature vector before a
//! two-way softmax.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use ndarray::{concatenate, Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::doc::TextBlock;
use crate::error::{Error, Result};
use crate::features::{FeatureLayout, FeatureVector, TitleVocab};
use crate::nn::store::{load_bundle, save_bundle};
use crate::nn::{softmax_cross_entropy, softmax_rows, Adam, AdamConfig, ConvSpec, Dense, Param, Parameters, TextCnn};
use crate::text::normalize_text;
use crate::train::{EarlyStopping, TrainConfig, TrainReport};

pub const PAD: &str = "<pad>";
pub const UNK: &str = "<unk>";
pub const CHAR_MIN_FREQ: usize = 10;
pub const CHAR_VOCAB_CAP: usize = 120;
const KIND: &str = "detector";

/// Character inventory. Index 0 is `<pad>`, index 1 is `<unk>`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct CharVocab {
    symbols: Vec<String>,
    index: HashMap<char, usize>,
}

impl CharVocab {
    /// Characters seen at least `min_freq` times, most frequent first (ties by
    /// code point), at most `cap` symbols including the two specials.
    pub fn build<S: AsRef<str>>(texts: &[S], min_freq: usize, cap: usize) -> Self {
        let mut counts: BTreeMap<char, usize> = BTreeMap::new();
        for t in texts {
            for c in normalize_text(t.as_ref()).chars() {
                *counts.entry(c).or_default() += 1;
            }
        }
        let mut ranked: Vec<(char, usize)> = counts.into_iter().filter(|&(_, n)| n >= min_freq).collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        let mut symbols = vec![PAD.to_string(), UNK.to_string()];
        symbols.extend(ranked.into_iter().take(cap.saturating_sub(2)).map(|(c, _)| c.to_string()));
        CharVocab::try_from(symbols).expect("built vocabulary is well formed")
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn index_of(&self, c: char) -> usize {
        self.index.get(&c).copied().unwrap_or(1)
    }
}

impl TryFrom<Vec<String>> for CharVocab {
    type Error = Error;

    fn try_from(symbols: Vec<String>) -> Result<Self> {
        if symbols.len() < 2 || symbols[0] != PAD || symbols[1] != UNK {
            return Err(Error::InvalidInput("character vocabulary must start with <pad>, <unk>".into()));
        }
        let mut index = HashMap::new();
        for (i, s) in symbols.iter().enumerate().skip(2) {
            let mut chars = s.chars();
            let (Some(c), None) = (chars.next(), chars.next()) else {
                return Err(Error::InvalidInput(format!("vocabulary symbol {s:?} is not one character")));
            };
            if index.insert(c, i).is_some() {
                return Err(Error::InvalidInput(format!("duplicate vocabulary symbol {s:?}")));
            }
        }
        Ok(CharVocab { symbols, index })
    }
}

impl From<CharVocab> for Vec<String> {
    fn from(v: CharVocab) -> Self {
        v.symbols
    }
}

/// First `l_c` characters of the normalized text as vocabulary indices, right-padded.
pub fn encode_chars(s: &str, vocab: &CharVocab, l_c: usize) -> Vec<usize> {
    let mut out: Vec<usize> = normalize_text(s).chars().take(l_c).map(|c| vocab.index_of(c)).collect();
    out.resize(l_c, 0);
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorConfig {
    pub l_c: usize,
    pub d_c: usize,
    pub convs: Vec<ConvSpec>,
    pub fc_dim: usize,
    pub dropout: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig {
            l_c: 50,
            d_c: 200,
            convs: vec![ConvSpec::new(16, 2, 2), ConvSpec::new(32, 5, 2)],
            fc_dim: 256,
            dropout: 0.25,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        crate::nn::validate_convs(&self.convs, self.l_c)?;
        if self.d_c == 0 || self.fc_dim == 0 {
            return Err(Error::Config("detector dimensions must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config("detector dropout must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
struct DetectorNet {
    cnn: TextCnn,
    out: Dense,
}

impl DetectorNet {
    fn new(cfg: &DetectorConfig, vocab: usize, rng: &mut ChaCha8Rng) -> Result<Self> {
        let cnn = TextCnn::new("detector.cnn", vocab, cfg.d_c, cfg.l_c, &cfg.convs, cfg.fc_dim, cfg.dropout, rng)?;
        let feat = FeatureLayout::standard().len;
        let out = Dense::new("detector.out", cfg.fc_dim + feat, 2, rng);
        Ok(DetectorNet { cnn, out })
    }

    fn logits(&self, chars: &[usize], feats: &Array2<f64>) -> Result<Array2<f64>> {
        let (h, _) = self.cnn.forward::<ChaCha8Rng>(chars, feats.nrows(), None)?;
        let z = concatenate(Axis(1), &[h.view(), feats.view()]).map_err(|e| Error::Shape(e.to_string()))?;
        self.out.forward(&z)
    }

    /// One training step's forward and backward pass; returns the batch loss.
    fn train_batch(
        &mut self,
        chars: &[usize],
        feats: &Array2<f64>,
        labels: &[usize],
        class_weights: &[f64],
        rng: &mut ChaCha8Rng,
    ) -> Result<f64> {
        let (h, cache) = self.cnn.forward(chars, feats.nrows(), Some(rng))?;
        let z = concatenate(Axis(1), &[h.view(), feats.view()]).map_err(|e| Error::Shape(e.to_string()))?;
        let logits = self.out.forward(&z)?;
        let (loss, _, dlogits) = softmax_cross_entropy(&logits, labels, class_weights);
        let dz = self.out.backward(&z, &dlogits);
        let dh = dz.slice(ndarray::s![.., ..h.ncols()]).to_owned();
        self.cnn.backward(&cache, &dh);
        Ok(loss)
    }
}

impl Parameters for DetectorNet {
    fn params(&self) -> Vec<&Param> {
        let mut v = self.cnn.params();
        v.push(&self.out.weight);
        v.push(&self.out.bias);
        v
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut v = self.cnn.params_mut();
        v.push(&mut self.out.weight);
        v.push(&mut self.out.bias);
        v
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Sidecar {
    config: DetectorConfig,
    char_vocab: CharVocab,
    title_vocab: TitleVocab,
    feature_layout: Vec<String>,
}

pub(crate) fn layout_signature() -> Vec<String> {
    FeatureLayout::standard()
        .slots
        .iter()
        .map(|s| format!("{}:{}", s.name, s.len))
        .collect()
}

/// A trained detector with everything needed to featurize and classify.
#[derive(Debug, Clone)]
pub struct DetectorModel {
    pub config: DetectorConfig,
    pub char_vocab: CharVocab,
    pub title_vocab: TitleVocab,
    net: DetectorNet,
}

/// A block's text, its encoded features and its gold label.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledBlock {
    pub text: String,
    pub features: FeatureVector,
    pub is_title: bool,
}

const INFER_BATCH: usize = 64;

impl DetectorModel {
    /// Untrained model; weights come from the seeded generator.
    pub fn new(config: DetectorConfig, char_vocab: CharVocab, title_vocab: TitleVocab, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = DetectorNet::new(&config, char_vocab.len(), &mut rng)?;
        Ok(DetectorModel {
            config,
            char_vocab,
            title_vocab,
            net,
        })
    }

    pub fn num_weights(&self) -> usize {
        self.net.num_weights()
    }

    /// Sets every weight to zero.
    pub fn zero_weights(&mut self) {
        for p in self.net.params_mut() {
            p.value.fill(0.0);
        }
    }

    fn batch_inputs(&self, texts: &[&str], feats: &[&FeatureVector]) -> Result<(Vec<usize>, Array2<f64>)> {
        let width = FeatureLayout::standard().len;
        let mut chars = Vec::with_capacity(texts.len() * self.config.l_c);
        let mut f = Array2::zeros((feats.len(), width));
        for (i, (t, fv)) in texts.iter().zip(feats).enumerate() {
            if fv.values.len() != width {
                return Err(Error::ModelMismatch {
                    stage: KIND.into(),
                    message: format!("feature vector has {} values, model expects {width}", fv.values.len()),
                });
            }
            chars.extend(encode_chars(t, &self.char_vocab, self.config.l_c));
            f.row_mut(i).assign(&ndarray::ArrayView1::from(&fv.values[..]));
        }
        Ok((chars, f))
    }

    /// `(p_non_title, p_title)` for each block, in inference mode.
    pub fn predict_proba(&self, texts: &[&str], feats: &[&FeatureVector]) -> Result<Vec<[f64; 2]>> {
        if texts.len() != feats.len() {
            return Err(Error::Shape(format!("{} texts but {} feature vectors", texts.len(), feats.len())));
        }
        let mut out = Vec::with_capacity(texts.len());
        for start in (0..texts.len()).step_by(INFER_BATCH) {
            let end = (start + INFER_BATCH).min(texts.len());
            let (chars, f) = self.batch_inputs(&texts[start..end], &feats[start..end])?;
            let probs = softmax_rows(&self.net.logits(&chars, &f)?);
            out.extend(probs.rows().into_iter().map(|r| [r[0], r[1]]));
        }
        Ok(out)
    }

    pub fn p_title(&self, text: &str, features: &FeatureVector) -> Result<f64> {
        Ok(self.predict_proba(&[text], &[features])?[0][1])
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let side = Sidecar {
            config: self.config.clone(),
            char_vocab: self.char_vocab.clone(),
            title_vocab: self.title_vocab.clone(),
            feature_layout: layout_signature(),
        };
        save_bundle(path, KIND, &side, self.net.params())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let (side, file): (Sidecar, _) = load_bundle(path, KIND)?;
        if side.feature_layout != layout_signature() {
            return Err(Error::ModelMismatch {
                stage: KIND.into(),
                message: "model was trained with a different feature layout".into(),
            });
        }
        let mut model = DetectorModel::new(side.config, side.char_vocab, side.title_vocab, 0)?;
        file.load_into(model.net.params_mut())?;
        Ok(model)
    }
}

/// True iff the model's title probability reaches `threshold` (inclusive).
pub fn is_title(block: &TextBlock, features: &FeatureVector, model: &DetectorModel, threshold: f64) -> Result<bool> {
    Ok(model.p_title(&block.merged_text, features)? >= threshold)
}

fn canonical_order(samples: &[LabeledBlock]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..samples.len()).collect();
    idx.sort_by(|&a, &b| {
        let (x, y) = (&samples[a], &samples[b]);
        x.text
            .cmp(&y.text)
            .then(x.is_title.cmp(&y.is_title))
            .then_with(|| {
                x.features
                    .values
                    .iter()
                    .map(|v| v.to_bits())
                    .cmp(y.features.values.iter().map(|v| v.to_bits()))
            })
    });
    idx
}

/// Trains a detector. Sample order does not matter: samples are put in a
/// canonical order before the seeded shuffle.
pub fn train_detector(
    samples: &[LabeledBlock],
    title_vocab: TitleVocab,
    cfg: &DetectorConfig,
    train: &TrainConfig,
    seed: u64,
) -> Result<(DetectorModel, TrainReport)> {
    cfg.validate()?;
    train.validate()?;
    let titles = samples.iter().filter(|s| s.is_title).count();
    if titles == 0 || titles == samples.len() {
        return Err(Error::InvalidInput(
            "detector training needs at least one title and one non-title block".into(),
        ));
    }
    let order = canonical_order(samples);
    let samples: Vec<&LabeledBlock> = order.iter().map(|&i| &samples[i]).collect();
    let texts: Vec<&str> = samples.iter().map(|s| s.text.as_str()).collect();
    let char_vocab = CharVocab::build(&texts, CHAR_MIN_FREQ, CHAR_VOCAB_CAP);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let net = DetectorNet::new(cfg, char_vocab.len(), &mut rng)?;
    let mut model = DetectorModel {
        config: cfg.clone(),
        char_vocab,
        title_vocab,
        net,
    };
    let feats: Vec<&FeatureVector> = samples.iter().map(|s| &s.features).collect();
    let labels: Vec<usize> = samples.iter().map(|s| usize::from(s.is_title)).collect();
    let (mut train_idx, val_idx) = train.split(samples.len(), &mut rng);

    let n_pos = train_idx.iter().filter(|&&i| labels[i] == 1).count().max(1) as f64;
    let n_neg = (train_idx.len() as f64 - n_pos).max(1.0);
    let n = train_idx.len() as f64;
    let class_weights = [n / (2.0 * n_neg), n / (2.0 * n_pos)];

    let mut adam = Adam::new(AdamConfig {
        learning_rate: train.learning_rate,
        ..AdamConfig::default()
    });
    let mut report = TrainReport::default();
    let mut stopper = EarlyStopping::new(train.patience);
    let mut best = model.net.clone();
    let epochs = train.epochs_for(train_idx.len());
    for epoch in 0..epochs {
        train_idx.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in train_idx.chunks(train.batch_size) {
            let bt: Vec<&str> = batch.iter().map(|&i| texts[i]).collect();
            let bf: Vec<&FeatureVector> = batch.iter().map(|&i| feats[i]).collect();
            let bl: Vec<usize> = batch.iter().map(|&i| labels[i]).collect();
            let (chars, f) = model.batch_inputs(&bt, &bf)?;
            model.net.zero_grad();
            let loss = model.net.train_batch(&chars, &f, &bl, &class_weights, &mut rng)?;
            adam.step(model.net.params_mut())?;
            total += loss * batch.len() as f64;
        }
        report.train_loss.push(total / n);
        if val_idx.is_empty() {
            report.best_epoch = epoch;
            continue;
        }
        let vt: Vec<&str> = val_idx.iter().map(|&i| texts[i]).collect();
        let vf: Vec<&FeatureVector> = val_idx.iter().map(|&i| feats[i]).collect();
        let vl: Vec<usize> = val_idx.iter().map(|&i| labels[i]).collect();
        let probs = model.predict_proba(&vt, &vf)?;
        let val: f64 = probs
            .iter()
            .zip(&vl)
            .map(|(p, &y)| -class_weights[y] * p[y].max(1e-300).ln())
            .sum::<f64>()
            / vl.len() as f64;
        report.validation_loss.push(val);
        log::info!("detector epoch {epoch}: train {:.5} held-out {val:.5}", total / n);
        if stopper.observe(val) {
            best = model.net.clone();
            report.best_epoch = epoch;
        }
        if stopper.should_stop() {
            break;
        }
    }
    if !val_idx.is_empty() {
        model.net = best;
    }
    Ok((model, report))
}
