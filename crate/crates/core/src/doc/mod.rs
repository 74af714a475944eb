//! Document model: positioned text lines, text blocks and TOC trees.

mod layout;
mod toc;

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

pub use layout::{ingest_layout_file, parse_layout_json, parse_layout_xml, write_layout_xml};
pub use toc::{parse_toc, serialize_toc, TocEntry, TocTree, MAX_TOC_DEPTH};

/// Lines whose `top` differ by at most this many pixels share a baseline row.
pub const BASELINE_TOLERANCE: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub struct Rgb(pub [u8; 3]);

impl Rgb {
    pub const BLACK: Rgb = Rgb([0, 0, 0]);

    pub fn to_hex(self) -> String {
        format!("#{:02x}{:02x}{:02x}", self.0[0], self.0[1], self.0[2])
    }

    pub fn from_hex(s: &str) -> Option<Rgb> {
        let s = s.strip_prefix('#')?;
        if s.len() != 6 || !s.is_ascii() {
            return None;
        }
        let byte = |i: usize| u8::from_str_radix(&s[i..i + 2], 16).ok();
        Some(Rgb([byte(0)?, byte(2)?, byte(4)?]))
    }
}

/// One positioned, styled run of text as emitted by a layout converter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextLine {
    pub text: String,
    /// 1-based page number.
    pub page: u32,
    pub left: f64,
    pub top: f64,
    pub width: f64,
    pub height: f64,
    /// Font size in points.
    pub font_size: f64,
    pub bold: bool,
    pub italic: bool,
    pub color: Rgb,
    pub font_family: String,
}

impl TextLine {
    pub fn bottom(&self) -> f64 {
        self.top + self.height
    }

    pub fn center_x(&self) -> f64 {
        self.left + self.width / 2.0
    }

    pub fn center_y(&self) -> f64 {
        self.top + self.height / 2.0
    }

    pub fn same_style(&self, other: &TextLine) -> bool {
        self.bold == other.bold && self.italic == other.italic
    }
}

/// A run of consecutive, similar-looking lines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextBlock {
    pub lines: Vec<TextLine>,
    pub block_index: usize,
    pub merged_text: String,
}

impl TextBlock {
    /// Builds a block from a non-empty run of lines.
    pub fn new(lines: Vec<TextLine>, block_index: usize) -> Self {
        assert!(!lines.is_empty(), "a text block needs at least one line");
        let merged_text = lines
            .iter()
            .map(|l| l.text.as_str())
            .collect::<Vec<_>>()
            .join(" ");
        TextBlock {
            lines,
            block_index,
            merged_text,
        }
    }

    fn first(&self) -> &TextLine {
        &self.lines[0]
    }

    pub fn page(&self) -> u32 {
        self.first().page
    }

    pub fn left(&self) -> f64 {
        self.lines.iter().map(|l| l.left).fold(f64::INFINITY, f64::min)
    }

    pub fn right(&self) -> f64 {
        self.lines
            .iter()
            .map(|l| l.left + l.width)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn top(&self) -> f64 {
        self.first().top
    }

    pub fn bottom(&self) -> f64 {
        self.lines
            .iter()
            .map(TextLine::bottom)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn font_size(&self) -> f64 {
        self.lines.iter().map(|l| l.font_size).sum::<f64>() / self.lines.len() as f64
    }

    pub fn bold(&self) -> bool {
        self.lines.iter().all(|l| l.bold)
    }

    pub fn italic(&self) -> bool {
        self.lines.iter().all(|l| l.italic)
    }

    pub fn color(&self) -> Rgb {
        self.first().color
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PageInfo {
    pub number: u32,
    pub width: f64,
    pub height: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub pages: Vec<PageInfo>,
    pub lines: Vec<TextLine>,
    #[serde(default, skip_serializing)]
    pub blocks: Vec<TextBlock>,
}

impl Document {
    /// Builds a document, putting lines into reading order.
    pub fn new(doc_id: impl Into<String>, pages: Vec<PageInfo>, mut lines: Vec<TextLine>) -> Self {
        sort_reading_order(&mut lines);
        Document {
            doc_id: doc_id.into(),
            pages,
            lines,
            blocks: Vec::new(),
        }
    }

    pub fn page_count(&self) -> u32 {
        self.pages.len() as u32
    }

    pub fn page(&self, number: u32) -> Option<&PageInfo> {
        self.pages.get(number.checked_sub(1)? as usize)
    }
}

/// Sorts lines by (page, top, left); lines whose `top` lie within
/// [`BASELINE_TOLERANCE`] of the first line of their row are ordered left to right.
pub fn sort_reading_order(lines: &mut [TextLine]) {
    lines.sort_by(|a, b| {
        a.page
            .cmp(&b.page)
            .then(a.top.total_cmp(&b.top))
            .then(a.left.total_cmp(&b.left))
    });
    let mut start = 0;
    while start < lines.len() {
        let (page, row_top) = (lines[start].page, lines[start].top);
        let mut end = start + 1;
        while end < lines.len()
            && lines[end].page == page
            && lines[end].top - row_top <= BASELINE_TOLERANCE
        {
            end += 1;
        }
        lines[start..end].sort_by(|a, b| {
            a.left
                .total_cmp(&b.left)
                .then(a.top.total_cmp(&b.top))
                .then(Ordering::Equal)
        });
        start = end;
    }
}
