//! The full TOC-generation loop and the training/evaluation drivers around it.

use std::path::Path;

use crate::detector::{train_detector, DetectorModel};
use crate::doc::{Document, TocTree};
use crate::error::{Error, Result};
use crate::features::{featurize_document, FeatureVector, TitleVocab};
use crate::hierarchizer::{train_hierarchizer, HierarchizerModel, LabeledSequence};
use crate::metrics::{score_toc, weighted_f1, ClassificationReport, InexOptions, TocScore};
use crate::segment::segment;
use crate::template::TemplateToc;
use crate::train::TrainReport;
use crate::tree::build_toc;

use super::config::{PipelineConfig, TitleSource};
use super::dataset::{detector_samples, featurize, hierarchizer_samples, title_input, title_vocab, AnnotatedDoc};

/// Trained models plus the optional template used for hierarchizer features.
#[derive(Debug, Clone)]
pub struct Models {
    pub detector: DetectorModel,
    pub hierarchizer: HierarchizerModel,
    pub template: Option<TemplateToc>,
}

impl Models {
    pub fn load(detector: &Path, hierarchizer: &Path, template: Option<&Path>) -> Result<Self> {
        Ok(Models {
            detector: DetectorModel::load(detector)?,
            hierarchizer: HierarchizerModel::load(hierarchizer)?,
            template: template.map(TemplateToc::load).transpose()?,
        })
    }
}

/// Detector output for one document.
#[derive(Debug, Clone)]
pub struct Detection {
    /// The segmented document.
    pub doc: Document,
    pub features: Vec<FeatureVector>,
    /// Vocabulary the features were built with.
    pub vocab: TitleVocab,
    pub p_title: Vec<f64>,
    /// Indices of blocks at or above the threshold, in reading order.
    pub titles: Vec<usize>,
}

/// Segments, featurizes and classifies every block of a raw document.
pub fn detect(raw: &Document, detector: &DetectorModel, cfg: &PipelineConfig) -> Result<Detection> {
    let doc = segment(raw, &cfg.segmenter);
    detect_segmented(doc, detector, cfg.threshold)
}

pub fn detect_segmented(doc: Document, detector: &DetectorModel, threshold: f64) -> Result<Detection> {
    if doc.blocks.is_empty() {
        return Ok(Detection {
            doc,
            features: Vec::new(),
            vocab: detector.title_vocab.clone(),
            p_title: Vec::new(),
            titles: Vec::new(),
        });
    }
    let (_, features) = featurize_document(&doc, &detector.title_vocab)?;
    let texts: Vec<&str> = doc.blocks.iter().map(|b| b.merged_text.as_str()).collect();
    let refs: Vec<&FeatureVector> = features.iter().collect();
    let p_title: Vec<f64> = detector.predict_proba(&texts, &refs)?.into_iter().map(|p| p[1]).collect();
    let titles = (0..p_title.len()).filter(|&i| p_title[i] >= threshold).collect();
    Ok(Detection {
        doc,
        features,
        vocab: detector.title_vocab.clone(),
        p_title,
        titles,
    })
}

/// Predicted levels of the detected titles.
pub fn hierarchize(det: &Detection, model: &HierarchizerModel, template: Option<&TemplateToc>) -> Result<Vec<u8>> {
    if det.titles.is_empty() {
        return Ok(Vec::new());
    }
    let recomputed;
    let features = if model.title_vocab == det.vocab {
        &det.features
    } else {
        recomputed = featurize_document(&det.doc, &model.title_vocab)?.1;
        &recomputed
    };
    let template = if model.config.use_template { template } else { None };
    let inputs: Vec<_> = det
        .titles
        .iter()
        .map(|&i| title_input(&det.doc.blocks[i].merged_text, &features[i], template))
        .collect();
    model.get_hierarchy(&inputs)
}

/// Segmentation, detection, hierarchization and tree reconstruction.
pub fn generate_toc(raw: &Document, models: &Models, cfg: &PipelineConfig) -> Result<TocTree> {
    let det = detect(raw, &models.detector, cfg)?;
    if det.titles.is_empty() {
        return Ok(TocTree::default());
    }
    let levels = hierarchize(&det, &models.hierarchizer, models.template.as_ref())?;
    let titles: Vec<&str> = det.titles.iter().map(|&i| det.doc.blocks[i].merged_text.as_str()).collect();
    let pages: Vec<u32> = det.titles.iter().map(|&i| det.doc.blocks[i].page()).collect();
    build_toc(&titles, &pages, &levels, det.doc.page_count())
}

/// Reports of a full training run.
#[derive(Debug, Clone)]
pub struct TrainedPipeline {
    pub models: Models,
    pub detector_report: TrainReport,
    pub hierarchizer_report: TrainReport,
}

/// Trains both models on annotated documents.
pub fn train_pipeline(train: &[AnnotatedDoc], template: Option<TemplateToc>, cfg: &PipelineConfig) -> Result<TrainedPipeline> {
    let vocab = title_vocab(train)?;
    let feats = featurize(train, &vocab)?;
    let blocks = detector_samples(train, &feats);
    let (detector, detector_report) = train_detector(&blocks, vocab, &cfg.detector, &cfg.train, cfg.seed)?;
    let (hierarchizer, hierarchizer_report) =
        train_hierarchizer_on(train, &feats, &detector.title_vocab, template.as_ref(), Some(&detector), cfg)?;
    Ok(TrainedPipeline {
        models: Models {
            detector,
            hierarchizer,
            template,
        },
        detector_report,
        hierarchizer_report,
    })
}

/// Per-block detector decisions on annotated documents.
pub fn detected_titles(docs: &[AnnotatedDoc], feats: &[Vec<FeatureVector>], detector: &DetectorModel, threshold: f64) -> Result<Vec<Vec<bool>>> {
    docs.iter()
        .zip(feats)
        .map(|(d, f)| {
            let texts: Vec<&str> = d.doc.blocks.iter().map(|b| b.merged_text.as_str()).collect();
            let refs: Vec<&FeatureVector> = f.iter().collect();
            Ok(detector
                .predict_proba(&texts, &refs)?
                .into_iter()
                .map(|p| p[1] >= threshold)
                .collect())
        })
        .collect()
}

/// Trains the hierarchizer on gold or detected titles, as `cfg.hierarchizer_titles`
/// says. `feats` must have been computed with `vocab`.
pub fn train_hierarchizer_on(
    docs: &[AnnotatedDoc],
    feats: &[Vec<FeatureVector>],
    vocab: &TitleVocab,
    template: Option<&TemplateToc>,
    detector: Option<&DetectorModel>,
    cfg: &PipelineConfig,
) -> Result<(HierarchizerModel, TrainReport)> {
    let selected = match (cfg.hierarchizer_titles, detector) {
        (TitleSource::Gold, _) => None,
        (TitleSource::Detected, Some(det)) => {
            let det_feats;
            let f = if det.title_vocab == *vocab {
                feats
            } else {
                det_feats = featurize(docs, &det.title_vocab)?;
                &det_feats[..]
            };
            Some(detected_titles(docs, f, det, cfg.threshold)?)
        }
        (TitleSource::Detected, None) => {
            return Err(Error::Config("training on detected titles needs a detector".into()));
        }
    };
    let tpl = if cfg.hierarchizer.use_template { template } else { None };
    if cfg.hierarchizer.use_template && tpl.is_none() {
        return Err(Error::Config("template features are enabled but no template was given".into()));
    }
    let seqs = hierarchizer_samples(docs, feats, tpl, selected.as_deref());
    train_hierarchizer(&seqs, vocab.clone(), &cfg.hierarchizer, &cfg.hierarchizer_train, cfg.seed)
}

/// Block-level title/non-title report over annotated documents.
pub fn evaluate_detector(model: &DetectorModel, docs: &[AnnotatedDoc], threshold: f64) -> Result<ClassificationReport> {
    let mut gold = Vec::new();
    let mut pred = Vec::new();
    for d in docs {
        let det = detect_segmented(d.doc.clone(), model, threshold)?;
        gold.extend(d.block_levels.iter().map(|l| l.is_some()));
        let mut p = vec![false; d.doc.blocks.len()];
        for &i in &det.titles {
            p[i] = true;
        }
        pred.extend(p);
    }
    weighted_f1(&gold, &pred)
}

/// Per-title level report on gold title sequences.
pub fn evaluate_hierarchizer(model: &HierarchizerModel, seqs: &[LabeledSequence]) -> Result<ClassificationReport> {
    let mut gold = Vec::new();
    let mut pred = Vec::new();
    for s in seqs {
        gold.extend(&s.levels);
        pred.extend(model.get_hierarchy(&s.titles)?);
    }
    weighted_f1(&gold, &pred)
}

/// Per-document TOC scores of the whole pipeline and their mean Xerox F1.
pub fn evaluate_pipeline(
    models: &Models,
    docs: &[(Document, TocTree)],
    cfg: &PipelineConfig,
) -> Result<(Vec<TocScore>, f64)> {
    let mut scores = Vec::with_capacity(docs.len());
    for (raw, gold) in docs {
        let pred = generate_toc(raw, models, cfg)?;
        scores.push(score_toc(gold, &pred, &InexOptions::default()));
    }
    let mean = if scores.is_empty() {
        0.0
    } else {
        scores.iter().map(|s| s.xerox.f1).sum::<f64>() / scores.len() as f64
    };
    Ok((scores, mean))
}
