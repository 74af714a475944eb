//! Aligning gold TOCs with segmented blocks and building training samples.

use crate::detector::LabeledBlock;
use crate::doc::{Document, TocTree};
use crate::error::Result;
use crate::features::{featurize_document, FeatureVector, TitleVocab};
use crate::hierarchizer::{LabeledSequence, TitleInput};
use crate::metrics::fuzzy_equal;
use crate::segment::{segment, SegmenterConfig};
use crate::template::{match_title, template_feature, TemplateToc, DEFAULT_THRESHOLD_RATIO};
use crate::text::canonical_title;

/// A segmented document, its gold TOC and the gold level of each block
/// (`None` for non-titles).
#[derive(Debug, Clone)]
pub struct AnnotatedDoc {
    pub doc: Document,
    pub toc: TocTree,
    pub block_levels: Vec<Option<u8>>,
}

impl AnnotatedDoc {
    pub fn new(raw: &Document, toc: TocTree, seg: &SegmenterConfig) -> Self {
        let doc = segment(raw, seg);
        let block_levels = align(&doc, &toc);
        AnnotatedDoc { doc, toc, block_levels }
    }

    pub fn gold_titles(&self) -> impl Iterator<Item = (usize, u8)> + '_ {
        self.block_levels.iter().enumerate().filter_map(|(i, l)| l.map(|l| (i, l)))
    }
}

/// Matches each gold entry, in pre-order, to the first later block on its
/// start page with the same canonical title, falling back to a fuzzy match.
/// Entries that find no block are left unmatched.
pub fn align(doc: &Document, toc: &TocTree) -> Vec<Option<u8>> {
    let keys: Vec<String> = doc.blocks.iter().map(|b| canonical_title(&b.merged_text)).collect();
    let mut levels = vec![None; doc.blocks.len()];
    let mut cursor = 0;
    for (entry, _) in toc.preorder() {
        let key = canonical_title(&entry.title);
        let on_page = |i: &usize| doc.blocks[*i].page() == entry.start_page && levels[*i].is_none();
        let found = (cursor..doc.blocks.len())
            .filter(on_page)
            .find(|&i| keys[i] == key)
            .or_else(|| (cursor..doc.blocks.len()).filter(on_page).find(|&i| fuzzy_equal(&keys[i], &key, 0.2)));
        match found {
            Some(i) => {
                levels[i] = Some(entry.level);
                cursor = i + 1;
            }
            None => log::warn!("{}: gold title {:?} not found on page {}", doc.doc_id, entry.title, entry.start_page),
        }
    }
    levels
}

/// Title vocabulary from the gold titles of a training set.
pub fn title_vocab(docs: &[AnnotatedDoc]) -> Result<TitleVocab> {
    let titles: Vec<&str> = docs
        .iter()
        .flat_map(|d| d.gold_titles().map(|(i, _)| d.doc.blocks[i].merged_text.as_str()))
        .collect();
    TitleVocab::build(&titles)
}

/// Encoded features of every block of each document.
pub fn featurize(docs: &[AnnotatedDoc], vocab: &TitleVocab) -> Result<Vec<Vec<FeatureVector>>> {
    docs.iter().map(|d| Ok(featurize_document(&d.doc, vocab)?.1)).collect()
}

pub fn detector_samples(docs: &[AnnotatedDoc], feats: &[Vec<FeatureVector>]) -> Vec<LabeledBlock> {
    docs.iter()
        .zip(feats)
        .flat_map(|(d, f)| {
            d.doc.blocks.iter().zip(f).zip(&d.block_levels).map(|((b, fv), l)| LabeledBlock {
                text: b.merged_text.clone(),
                features: fv.clone(),
                is_title: l.is_some(),
            })
        })
        .collect()
}

/// Hierarchizer input for block `i`, with the template one-hot when a template is given.
pub fn title_input(text: &str, features: &FeatureVector, template: Option<&TemplateToc>) -> TitleInput {
    let mut t = TitleInput::new(text, features.clone());
    if let Some(tpl) = template {
        t.template = template_feature(Some(&match_title(text, tpl, DEFAULT_THRESHOLD_RATIO)));
    }
    t
}

/// Gold title sequences. With `selected`, only the listed blocks of each
/// document are kept (for training on detected titles).
pub fn hierarchizer_samples(
    docs: &[AnnotatedDoc],
    feats: &[Vec<FeatureVector>],
    template: Option<&TemplateToc>,
    selected: Option<&[Vec<bool>]>,
) -> Vec<LabeledSequence> {
    docs.iter()
        .enumerate()
        .map(|(k, d)| {
            let mut titles = Vec::new();
            let mut levels = Vec::new();
            for (i, level) in d.gold_titles() {
                if selected.is_some_and(|s| !s[k][i]) {
                    continue;
                }
                titles.push(title_input(&d.doc.blocks[i].merged_text, &feats[k][i], template));
                levels.push(level);
            }
            LabeledSequence {
                doc_id: d.doc.doc_id.clone(),
                titles,
                levels,
            }
        })
        .collect()
}
