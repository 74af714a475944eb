//! Rule-based segmentation: margin stripping and grouping of lines into blocks.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::doc::{Document, TextBlock, TextLine};
use crate::error::{Error, Result};

/// Fraction of pages a line text must appear on to count as a running header.
pub const REPEAT_PAGE_FRACTION: f64 = 0.6;
/// Documents shorter than this skip repeated-text detection.
pub const REPEAT_MIN_PAGES: u32 = 3;

const SIZE_TOLERANCE: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SegmenterConfig {
    pub header_frac: f64,
    pub footer_frac: f64,
    pub side_frac: f64,
    /// Largest vertical gap between merged lines, as a multiple of font size.
    pub max_line_gap_factor: f64,
    pub require_same_style: bool,
    /// Lets a block continue from the last line of a page onto the first line of the next.
    pub allow_cross_page: bool,
}

impl Default for SegmenterConfig {
    fn default() -> Self {
        SegmenterConfig {
            header_frac: 0.08,
            footer_frac: 0.08,
            side_frac: 0.05,
            max_line_gap_factor: 1.5,
            require_same_style: true,
            allow_cross_page: false,
        }
    }
}

impl SegmenterConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("header_frac", self.header_frac),
            ("footer_frac", self.footer_frac),
            ("side_frac", self.side_frac),
        ] {
            if !(0.0..0.3).contains(&v) {
                return Err(Error::Config(format!("{name} must lie in [0, 0.3), got {v}")));
            }
        }
        if !(self.max_line_gap_factor > 0.0) {
            return Err(Error::Config("max_line_gap_factor must be positive".into()));
        }
        Ok(())
    }
}

/// Key used to spot running headers and footers: case and digits are ignored
/// so that "Page 3 of 26" repeats.
fn repeat_key(text: &str) -> String {
    crate::text::collapse_whitespace(text)
        .chars()
        .flat_map(char::to_lowercase)
        .map(|c| if c.is_ascii_digit() { '#' } else { c })
        .collect()
}

/// Drops lines outside the central page area and lines repeated on most pages.
pub fn strip_margins(doc: &Document, cfg: &SegmenterConfig) -> Document {
    let mut kept: Vec<TextLine> = doc
        .lines
        .iter()
        .filter(|l| {
            let Some(page) = doc.page(l.page) else {
                return false;
            };
            let (cx, cy) = (l.center_x(), l.center_y());
            cy >= cfg.header_frac * page.height
                && cy <= (1.0 - cfg.footer_frac) * page.height
                && cx >= cfg.side_frac * page.width
                && cx <= (1.0 - cfg.side_frac) * page.width
        })
        .cloned()
        .collect();

    if doc.page_count() >= REPEAT_MIN_PAGES {
        let mut pages_by_key: BTreeMap<String, BTreeSet<u32>> = BTreeMap::new();
        for l in &kept {
            pages_by_key.entry(repeat_key(&l.text)).or_default().insert(l.page);
        }
        let min_pages = REPEAT_PAGE_FRACTION * doc.page_count() as f64;
        let repeated: BTreeSet<&String> = pages_by_key
            .iter()
            .filter(|(_, pages)| pages.len() as f64 >= min_pages)
            .map(|(k, _)| k)
            .collect();
        if !repeated.is_empty() {
            let repeated: BTreeSet<String> = repeated.into_iter().cloned().collect();
            kept.retain(|l| !repeated.contains(&repeat_key(&l.text)));
        }
    }

    Document {
        doc_id: doc.doc_id.clone(),
        pages: doc.pages.clone(),
        lines: kept,
        blocks: Vec::new(),
    }
}

fn is_last_on_page(lines: &[TextLine], i: usize) -> bool {
    lines.get(i + 1).is_none_or(|n| n.page != lines[i].page)
}

fn continues(lines: &[TextLine], i: usize, cfg: &SegmenterConfig) -> bool {
    let (prev, next) = (&lines[i], &lines[i + 1]);
    if (prev.font_size - next.font_size).abs() > SIZE_TOLERANCE {
        return false;
    }
    if cfg.require_same_style && !prev.same_style(next) {
        return false;
    }
    if prev.page != next.page {
        return cfg.allow_cross_page && next.page == prev.page + 1 && is_last_on_page(lines, i);
    }
    next.top - prev.bottom() <= cfg.max_line_gap_factor * prev.font_size
}

/// Groups consecutive similar-looking lines into text blocks.
pub fn group_blocks(doc: &Document, cfg: &SegmenterConfig) -> Document {
    let lines = &doc.lines;
    let mut blocks = Vec::new();
    let mut start = 0;
    for i in 0..lines.len() {
        if i + 1 == lines.len() || !continues(lines, i, cfg) {
            blocks.push(TextBlock::new(lines[start..=i].to_vec(), blocks.len()));
            start = i + 1;
        }
    }
    Document {
        doc_id: doc.doc_id.clone(),
        pages: doc.pages.clone(),
        lines: lines.clone(),
        blocks,
    }
}

/// Margin stripping followed by block grouping.
pub fn segment(doc: &Document, cfg: &SegmenterConfig) -> Document {
    group_blocks(&strip_margins(doc, cfg), cfg)
}

#[derive(Debug, Clone, Serialize)]
pub struct BlockBox {
    pub block_index: usize,
    pub page: u32,
    pub left: f64,
    pub top: f64,
    pub right: f64,
    pub bottom: f64,
    pub lines: usize,
    pub text: String,
}

/// Bounding boxes of every block, for debugging segmentation.
pub fn block_boxes(doc: &Document) -> Vec<BlockBox> {
    doc.blocks
        .iter()
        .map(|b| BlockBox {
            block_index: b.block_index,
            page: b.page(),
            left: b.left(),
            top: b.top(),
            right: b.right(),
            bottom: b.bottom(),
            lines: b.lines.len(),
            text: b.merged_text.clone(),
        })
        .collect()
}
