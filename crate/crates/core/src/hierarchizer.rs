//! Level assignment for a document's detected titles: a word-level CNN encodes
//! each title, the encodings (with hand-crafted and optional template features)
//! form the rows of a document matrix, and a BiLSTM-CRF labels the rows.

use std::collections::BTreeMap;
use std::collections::HashMap;
use std::path::Path;

use ndarray::{concatenate, s, Array2, ArrayView1, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::detector::layout_signature;
use crate::error::{Error, Result};
use crate::features::{FeatureLayout, FeatureVector, TitleVocab};
use crate::nn::store::{load_bundle, save_bundle};
use crate::nn::{Adam, AdamConfig, BiLstm, ConvSpec, CrfParams, Dense, Param, Parameters, TextCnn};
use crate::template::{DISABLED_SLOT, TEMPLATE_SLOTS};
use crate::text::normalize_text;
use crate::train::{EarlyStopping, TrainConfig, TrainReport};

pub const PAD: &str = "<pad>";
pub const UNK: &str = "<unk>";
pub const WORD_MIN_FREQ: usize = 2;
pub const WINDOW: usize = 400;
pub const WINDOW_OVERLAP: usize = 50;
const KIND: &str = "hierarchizer";

/// Title tokens: whitespace split of the normalized, lowercased text.
pub fn tokenize(s: &str) -> Vec<String> {
    normalize_text(s).to_lowercase().split(' ').filter(|t| !t.is_empty()).map(str::to_owned).collect()
}

/// Word inventory. Index 0 is `<pad>`, index 1 is `<unk>`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct WordVocab {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl WordVocab {
    /// Tokens seen at least `min_freq` times, most frequent first, ties lexicographic.
    pub fn build<S: AsRef<str>>(titles: &[S], min_freq: usize) -> Self {
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        for t in titles {
            for tok in tokenize(t.as_ref()) {
                *counts.entry(tok).or_default() += 1;
            }
        }
        let mut ranked: Vec<(String, usize)> = counts.into_iter().filter(|(_, n)| *n >= min_freq).collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let mut tokens = vec![PAD.to_string(), UNK.to_string()];
        tokens.extend(ranked.into_iter().map(|(t, _)| t));
        WordVocab::try_from(tokens).expect("built vocabulary is well formed")
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn index_of(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(1)
    }

    /// First `l_w` tokens as indices, right-padded.
    pub fn encode(&self, title: &str, l_w: usize) -> Vec<usize> {
        let mut out: Vec<usize> = tokenize(title).iter().take(l_w).map(|t| self.index_of(t)).collect();
        out.resize(l_w, 0);
        out
    }
}

impl TryFrom<Vec<String>> for WordVocab {
    type Error = Error;

    fn try_from(tokens: Vec<String>) -> Result<Self> {
        if tokens.len() < 2 || tokens[0] != PAD || tokens[1] != UNK {
            return Err(Error::InvalidInput("word vocabulary must start with <pad>, <unk>".into()));
        }
        let mut index = HashMap::new();
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i).is_some() {
                return Err(Error::InvalidInput(format!("duplicate vocabulary token {t:?}")));
            }
        }
        Ok(WordVocab { tokens, index })
    }
}

impl From<WordVocab> for Vec<String> {
    fn from(v: WordVocab) -> Self {
        v.tokens
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HierConfig {
    pub l_w: usize,
    pub d_w: usize,
    pub convs: Vec<ConvSpec>,
    pub fc_dim: usize,
    pub dropout: f64,
    pub lstm_units: usize,
    pub recurrent_dropout: f64,
    pub num_levels: usize,
    /// Append the 7-slot template one-hot to each title vector.
    pub use_template: bool,
}

impl Default for HierConfig {
    fn default() -> Self {
        HierConfig {
            l_w: 70,
            d_w: 300,
            convs: vec![ConvSpec::new(16, 3, 2), ConvSpec::new(16, 5, 2)],
            fc_dim: 512,
            dropout: 0.25,
            lstm_units: 70,
            recurrent_dropout: 0.1,
            num_levels: 5,
            use_template: false,
        }
    }
}

impl HierConfig {
    pub fn validate(&self) -> Result<()> {
        crate::nn::validate_convs(&self.convs, self.l_w)?;
        if !(1..=6).contains(&self.num_levels) {
            return Err(Error::Config("num_levels must lie in 1..=6".into()));
        }
        if self.d_w == 0 || self.fc_dim == 0 || self.lstm_units == 0 {
            return Err(Error::Config("hierarchizer dimensions must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) || !(0.0..1.0).contains(&self.recurrent_dropout) {
            return Err(Error::Config("dropout rates must lie in [0, 1)".into()));
        }
        Ok(())
    }

    /// Width of one row of the document matrix.
    pub fn title_dim(&self) -> usize {
        self.fc_dim + FeatureLayout::standard().len + if self.use_template { TEMPLATE_SLOTS } else { 0 }
    }
}

/// One detected title as seen by the hierarchizer.
#[derive(Debug, Clone, PartialEq)]
pub struct TitleInput {
    pub text: String,
    pub features: FeatureVector,
    /// Template one-hot; ignored by models trained without template features.
    pub template: [f64; TEMPLATE_SLOTS],
}

impl TitleInput {
    pub fn new(text: impl Into<String>, features: FeatureVector) -> Self {
        let mut template = [0.0; TEMPLATE_SLOTS];
        template[DISABLED_SLOT] = 1.0;
        TitleInput {
            text: text.into(),
            features,
            template,
        }
    }
}

/// A document's gold title sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSequence {
    pub doc_id: String,
    pub titles: Vec<TitleInput>,
    /// Gold levels, 1-based.
    pub levels: Vec<u8>,
}

#[derive(Debug, Clone)]
struct HierNet {
    cnn: TextCnn,
    lstm: BiLstm,
    proj: Dense,
    crf: CrfParams,
}

struct ForwardCache {
    cnn: crate::nn::TextCnnCache,
    lstm: crate::nn::BiLstmCache,
    lstm_out: Array2<f64>,
}

impl HierNet {
    fn new(cfg: &HierConfig, vocab: usize, rng: &mut ChaCha8Rng) -> Result<Self> {
        let cnn = TextCnn::new("hier.cnn", vocab, cfg.d_w, cfg.l_w, &cfg.convs, cfg.fc_dim, cfg.dropout, rng)?;
        let lstm = BiLstm::new("hier.lstm", cfg.title_dim(), cfg.lstm_units, rng);
        let proj = Dense::new("hier.proj", 2 * cfg.lstm_units, cfg.num_levels, rng);
        Ok(HierNet {
            cnn,
            lstm,
            proj,
            crf: CrfParams::new("hier.crf", cfg.num_levels),
        })
    }

    fn matrix(&self, cnn_out: &Array2<f64>, side: &Array2<f64>) -> Result<Array2<f64>> {
        concatenate(Axis(1), &[cnn_out.view(), side.view()]).map_err(|e| Error::Shape(e.to_string()))
    }

    fn emissions(&self, m: &Array2<f64>, cfg: &HierConfig, rng: Option<&mut ChaCha8Rng>) -> Result<(Array2<f64>, crate::nn::BiLstmCache, Array2<f64>)> {
        let (h, cache) = self.lstm.forward(m, cfg.recurrent_dropout, rng);
        let e = self.proj.forward(&h)?;
        Ok((e, cache, h))
    }

    fn train_document(
        &mut self,
        tokens: &[usize],
        side: &Array2<f64>,
        labels: &[usize],
        cfg: &HierConfig,
        scale: f64,
        rng: &mut ChaCha8Rng,
    ) -> Result<f64> {
        let n = side.nrows();
        let (c, cnn_cache) = self.cnn.forward(tokens, n, Some(&mut *rng))?;
        let m = self.matrix(&c, side)?;
        let (e, lstm_cache, h) = self.emissions(&m, cfg, Some(rng))?;
        let cache = ForwardCache {
            cnn: cnn_cache,
            lstm: lstm_cache,
            lstm_out: h,
        };
        let (nll, de) = self.crf.nll_backward_scaled(&e, labels, scale);
        let dh = self.proj.backward(&cache.lstm_out, &de);
        let dm = self.lstm.backward(&cache.lstm, &dh);
        let dc = dm.slice(s![.., ..c.ncols()]).to_owned();
        self.cnn.backward(&cache.cnn, &dc);
        Ok(nll)
    }
}

impl Parameters for HierNet {
    fn params(&self) -> Vec<&Param> {
        let mut v = self.cnn.params();
        v.extend(self.lstm.params());
        v.push(&self.proj.weight);
        v.push(&self.proj.bias);
        v.extend(self.crf.params());
        v
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut v = self.cnn.params_mut();
        v.extend(self.lstm.params_mut());
        v.push(&mut self.proj.weight);
        v.push(&mut self.proj.bias);
        v.extend(self.crf.params_mut());
        v
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Sidecar {
    config: HierConfig,
    word_vocab: WordVocab,
    title_vocab: TitleVocab,
    feature_layout: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct HierarchizerModel {
    pub config: HierConfig,
    pub word_vocab: WordVocab,
    /// Vocabulary the input feature vectors were built with.
    pub title_vocab: TitleVocab,
    net: HierNet,
}

impl HierarchizerModel {
    pub fn new(config: HierConfig, word_vocab: WordVocab, title_vocab: TitleVocab, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = HierNet::new(&config, word_vocab.len(), &mut rng)?;
        Ok(HierarchizerModel {
            config,
            word_vocab,
            title_vocab,
            net,
        })
    }

    pub fn crf(&self) -> &CrfParams {
        &self.net.crf
    }

    pub fn crf_mut(&mut self) -> &mut CrfParams {
        &mut self.net.crf
    }

    pub fn num_weights(&self) -> usize {
        self.net.num_weights()
    }

    fn inputs(&self, titles: &[TitleInput]) -> Result<(Vec<usize>, Array2<f64>)> {
        let width = FeatureLayout::standard().len;
        let side_dim = self.config.title_dim() - self.config.fc_dim;
        let mut tokens = Vec::with_capacity(titles.len() * self.config.l_w);
        let mut side = Array2::zeros((titles.len(), side_dim));
        for (i, t) in titles.iter().enumerate() {
            if t.features.values.len() != width {
                return Err(Error::ModelMismatch {
                    stage: KIND.into(),
                    message: format!("feature vector has {} values, model expects {width}", t.features.values.len()),
                });
            }
            tokens.extend(self.word_vocab.encode(&t.text, self.config.l_w));
            side.slice_mut(s![i, ..width]).assign(&ArrayView1::from(&t.features.values[..]));
            if self.config.use_template {
                side.slice_mut(s![i, width..]).assign(&ArrayView1::from(&t.template[..]));
            }
        }
        Ok((tokens, side))
    }

    /// Title vectors as the rows of the document matrix, in inference mode.
    pub fn document_matrix(&self, titles: &[TitleInput]) -> Result<Array2<f64>> {
        if titles.is_empty() {
            return Err(Error::InvalidInput("document has no titles".into()));
        }
        let (tokens, side) = self.inputs(titles)?;
        let (c, _) = self.net.cnn.forward::<ChaCha8Rng>(&tokens, titles.len(), None)?;
        self.net.matrix(&c, &side)
    }

    /// Per-title emission scores of the BiLSTM for a document matrix.
    pub fn emissions(&self, m: &Array2<f64>) -> Result<Array2<f64>> {
        Ok(self.net.emissions(m, &self.config, None)?.0)
    }

    /// Viterbi levels (1-based) for a document matrix.
    pub fn decode_matrix(&self, m: &Array2<f64>) -> Result<Vec<u8>> {
        let e = self.emissions(m)?;
        Ok(self.net.crf.viterbi(&e).into_iter().map(|k| k as u8 + 1).collect())
    }

    /// Predicted level of every title; empty input gives an empty result.
    pub fn get_hierarchy(&self, titles: &[TitleInput]) -> Result<Vec<u8>> {
        if titles.is_empty() {
            return Ok(Vec::new());
        }
        self.decode_matrix(&self.document_matrix(titles)?)
    }

    /// Mean per-title CRF negative log-likelihood.
    pub fn loss(&self, doc: &LabeledSequence) -> Result<f64> {
        let m = self.document_matrix(&doc.titles)?;
        let e = self.emissions(&m)?;
        let labels = labels_of(doc, self.config.num_levels)?;
        Ok(self.net.crf.nll(&e, &labels) / labels.len() as f64)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let side = Sidecar {
            config: self.config.clone(),
            word_vocab: self.word_vocab.clone(),
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
        let mut model = HierarchizerModel::new(side.config, side.word_vocab, side.title_vocab, 0)?;
        file.load_into(model.net.params_mut())?;
        Ok(model)
    }
}

fn labels_of(doc: &LabeledSequence, k: usize) -> Result<Vec<usize>> {
    if doc.levels.len() != doc.titles.len() {
        return Err(Error::InvalidInput(format!(
            "document {} has {} titles but {} levels",
            doc.doc_id,
            doc.titles.len(),
            doc.levels.len()
        )));
    }
    doc.levels
        .iter()
        .map(|&l| {
            if l >= 1 && (l as usize) <= k {
                Ok(l as usize - 1)
            } else {
                Err(Error::InvalidInput(format!("level {l} outside 1..={k} in {}", doc.doc_id)))
            }
        })
        .collect()
}

/// Splits long sequences into windows of `WINDOW` titles overlapping by `WINDOW_OVERLAP`.
pub fn windows(len: usize) -> Vec<std::ops::Range<usize>> {
    if len <= WINDOW {
        return vec![0..len];
    }
    let step = WINDOW - WINDOW_OVERLAP;
    let mut out = Vec::new();
    let mut start = 0;
    loop {
        let end = (start + WINDOW).min(len);
        out.push(start..end);
        if end == len {
            break;
        }
        start += step;
    }
    out
}

fn doc_order(docs: &[LabeledSequence]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..docs.len()).collect();
    idx.sort_by(|&a, &b| {
        let (x, y) = (&docs[a], &docs[b]);
        x.doc_id
            .cmp(&y.doc_id)
            .then_with(|| x.levels.cmp(&y.levels))
            .then_with(|| x.titles.iter().map(|t| &t.text).cmp(y.titles.iter().map(|t| &t.text)))
    });
    idx
}

/// Trains word-CNN, BiLSTM and CRF jointly on the CRF likelihood. Documents
/// without titles are skipped; document order does not matter.
pub fn train_hierarchizer(
    docs: &[LabeledSequence],
    title_vocab: TitleVocab,
    cfg: &HierConfig,
    train: &TrainConfig,
    seed: u64,
) -> Result<(HierarchizerModel, TrainReport)> {
    cfg.validate()?;
    train.validate()?;
    let mut samples: Vec<LabeledSequence> = Vec::new();
    for &i in &doc_order(docs) {
        let d = &docs[i];
        if d.titles.is_empty() {
            log::warn!("skipping document {} with no titles", d.doc_id);
            continue;
        }
        labels_of(d, cfg.num_levels)?;
        samples.push(d.clone());
    }
    if samples.is_empty() {
        return Err(Error::InvalidInput("no training document has titles".into()));
    }
    let all_titles: Vec<&str> = samples.iter().flat_map(|d| d.titles.iter().map(|t| t.text.as_str())).collect();
    let vocab = WordVocab::build(&all_titles, WORD_MIN_FREQ);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let net = HierNet::new(cfg, vocab.len(), &mut rng)?;
    let mut model = HierarchizerModel {
        config: cfg.clone(),
        word_vocab: vocab,
        title_vocab,
        net,
    };
    let (train_docs, val_docs) = train.split(samples.len(), &mut rng);

    // Training units are windows of the training documents.
    let mut units: Vec<(Vec<usize>, Array2<f64>, Vec<usize>)> = Vec::new();
    for &i in &train_docs {
        let d = &samples[i];
        let labels = labels_of(d, cfg.num_levels)?;
        for w in windows(d.titles.len()) {
            let (tokens, side) = model.inputs(&d.titles[w.clone()])?;
            units.push((tokens, side, labels[w].to_vec()));
        }
    }
    let mut order: Vec<usize> = (0..units.len()).collect();

    let mut adam = Adam::new(AdamConfig {
        learning_rate: train.learning_rate,
        ..AdamConfig::default()
    });
    let mut report = TrainReport::default();
    let mut stopper = EarlyStopping::new(train.patience);
    let mut best = model.net.clone();
    let epochs = train.epochs_for(units.len());
    for epoch in 0..epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(train.batch_size) {
            model.net.zero_grad();
            for &u in batch {
                let (tokens, side, labels) = &units[u];
                let scale = 1.0 / (labels.len() * batch.len()) as f64;
                let nll = model.net.train_document(tokens, side, labels, cfg, scale, &mut rng)?;
                total += nll / labels.len() as f64;
            }
            adam.step(model.net.params_mut())?;
        }
        let train_loss = total / units.len() as f64;
        report.train_loss.push(train_loss);
        if val_docs.is_empty() {
            report.best_epoch = epoch;
            continue;
        }
        let mut val = 0.0;
        for &i in &val_docs {
            val += model.loss(&samples[i])?;
        }
        val /= val_docs.len() as f64;
        report.validation_loss.push(val);
        log::info!("hierarchizer epoch {epoch}: train {train_loss:.5} held-out {val:.5}");
        if stopper.observe(val) {
            best = model.net.clone();
            report.best_epoch = epoch;
        }
        if stopper.should_stop() {
            break;
        }
    }
    if !val_docs.is_empty() {
        model.net = best;
    }
    Ok((model, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config() -> HierConfig {
        HierConfig {
            l_w: 6,
            d_w: 8,
            convs: vec![ConvSpec::new(4, 2, 2), ConvSpec::new(4, 3, 2)],
            fc_dim: 10,
            lstm_units: 6,
            ..HierConfig::default()
        }
    }

    fn input(text: &str) -> TitleInput {
        TitleInput::new(
            text,
            FeatureVector {
                values: vec![0.0; FeatureLayout::standard().len],
            },
        )
    }

    #[test]
    fn tokenize_lowercases_and_keeps_punctuation() {
        assert_eq!(tokenize("  1.2  Fees - Costs "), vec!["1.2", "fees", "-", "costs"]);
    }

    #[test]
    fn vocab_min_frequency() {
        let v = WordVocab::build(&["a b", "a c", "b"], 2);
        assert_eq!(v.tokens(), &["<pad>", "<unk>", "a", "b"]);
        assert_eq!(v.encode("c a", 4), vec![1, 2, 0, 0]);
        assert_eq!(v.encode("", 3), vec![0, 0, 0]);
    }

    #[test]
    fn window_ranges() {
        assert_eq!(windows(10), vec![0..10]);
        assert_eq!(windows(400), vec![0..400]);
        assert_eq!(windows(401), vec![0..400, 350..401]);
        assert_eq!(windows(1000), vec![0..400, 350..750, 700..1000]);
    }

    #[test]
    fn title_vector_width() {
        let cfg = HierConfig::default();
        assert_eq!(cfg.title_dim(), 512 + 356);
        let with = HierConfig {
            use_template: true,
            ..cfg
        };
        assert_eq!(with.title_dim(), 512 + 356 + 7);
    }

    #[test]
    fn document_matrix_rows_follow_titles() {
        let m = HierarchizerModel::new(
            tiny_config(),
            WordVocab::build(&["a b c", "a b c"], 2),
            TitleVocab::build(&["a"]).unwrap(),
            1,
        ).unwrap();
        let titles = [input("a"), input("b c"), input("")];
        let mat = m.document_matrix(&titles).unwrap();
        assert_eq!(mat.dim(), (3, tiny_config().title_dim()));
        let perm = [titles[2].clone(), titles[0].clone(), titles[1].clone()];
        let pm = m.document_matrix(&perm).unwrap();
        assert_eq!(pm.row(0), mat.row(2));
        assert_eq!(pm.row(1), mat.row(0));
        let single = m.get_hierarchy(&titles[..1]).unwrap();
        assert_eq!(single.len(), 1);
        assert!((1..=5).contains(&single[0]));
        assert!(m.get_hierarchy(&[]).unwrap().is_empty());
    }
}
