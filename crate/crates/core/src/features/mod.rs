//! Hand-crafted block features and their fixed-length encoding.

mod vocab;

use std::collections::BTreeSet;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::doc::{Document, TextBlock};
use crate::error::{Error, Result};

pub use vocab::{TitleVocab, TITLE_VOCAB_SIZE};

const SIZE_TOLERANCE: f64 = 0.5;
const INDENT_TOLERANCE: f64 = 2.0;

static VERBS: &str = include_str!("verbs_en.txt");

fn verb_lexicon() -> &'static BTreeSet<&'static str> {
    static LEXICON: OnceLock<BTreeSet<&'static str>> = OnceLock::new();
    LEXICON.get_or_init(|| VERBS.lines().map(str::trim).filter(|l| !l.is_empty()).collect())
}

pub fn contains_verb(text: &str) -> bool {
    let lex = verb_lexicon();
    crate::text::word_tokens(text).iter().any(|t| lex.contains(t.as_str()))
}

fn numbering_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        let tok = r"(?:\d+|[ivxlcdm]+|[IVXLCDM]+|[A-Za-z])";
        Regex::new(&format!(r"^\(?{tok}(?:[.)\-]{tok})*[.)\-]?(?:\s|$)")).unwrap()
    })
}

/// True when the text opens with a numbering scheme such as `1.`, `II.2.a`,
/// `(a)` or `1.2.3`. A bare token without any delimiter only counts when it is
/// arabic digits, so that "I am" or "A study" do not match.
pub fn begins_with_numbering(text: &str) -> bool {
    let t = text.trim();
    let Some(m) = numbering_regex().find(t) else {
        return false;
    };
    let head = m.as_str().trim_end();
    head.contains(['.', ')', '-', '(']) || head.chars().all(|c| c.is_ascii_digit())
}

/// The text after its leading numbering, or the whole text when there is none.
pub fn strip_numbering(text: &str) -> &str {
    let t = text.trim();
    if !begins_with_numbering(t) {
        return t;
    }
    let m = numbering_regex().find(t).expect("matched above");
    t[m.end()..].trim_start()
}

pub fn is_all_caps(text: &str) -> bool {
    let mut letters = text.chars().filter(|c| c.is_alphabetic()).peekable();
    letters.peek().is_some() && letters.all(|c| !c.is_lowercase())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fuzzy {
    Small,
    Normal,
    Large,
}

/// Three-way bucketing against per-document statistics; the bounds
/// `mean ± std` themselves count as normal.
pub fn fuzzify(value: f64, mean: f64, std: f64) -> Fuzzy {
    if value < mean - std {
        Fuzzy::Small
    } else if value > mean + std {
        Fuzzy::Large
    } else {
        Fuzzy::Normal
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    Smaller,
    Same,
    Larger,
}

impl Comparison {
    fn of(value: f64, other: f64, tolerance: f64) -> Self {
        if value < other - tolerance {
            Comparison::Smaller
        } else if value > other + tolerance {
            Comparison::Larger
        } else {
            Comparison::Same
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StyleRelation {
    Same,
    Differs,
}

/// The 27 block features before encoding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawFeatures {
    pub contains_verb: bool,
    pub is_bold: bool,
    pub is_italic: bool,
    pub is_all_caps: bool,
    pub text_length: f64,
    pub begins_with_numbering: bool,
    pub one_hot: Vec<u8>,
    pub indent: f64,
    pub font_size: f64,
    pub style_to_prev: StyleRelation,
    pub style_to_subs: StyleRelation,
    pub weight_diff_to_prev: i8,
    pub weight_diff_to_subs: i8,
    pub size_to_prev: Comparison,
    pub size_to_subs: Comparison,
    pub size_diff_to_prev: f64,
    pub size_diff_to_subs: f64,
    pub indent_to_prev: Comparison,
    pub indent_to_subs: Comparison,
    pub indent_diff_to_prev: f64,
    pub indent_diff_to_subs: f64,
    pub dist_to_prev_line: f64,
    pub dist_to_subs_line: f64,
    pub prev_tb_one_hot: Vec<u8>,
    pub subs_tb_one_hot: Vec<u8>,
    /// 1 when the colors are the same.
    pub color_diff_to_prev: bool,
    pub color_diff_to_subs: bool,
}

/// The continuous features bucketed against per-document statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Continuous {
    TextLength,
    Indent,
    FontSize,
    SizeDiffToPrev,
    SizeDiffToSubs,
    IndentDiffToPrev,
    IndentDiffToSubs,
    DistToPrevLine,
    DistToSubsLine,
}

impl Continuous {
    pub const ALL: [Continuous; 9] = [
        Continuous::TextLength,
        Continuous::Indent,
        Continuous::FontSize,
        Continuous::SizeDiffToPrev,
        Continuous::SizeDiffToSubs,
        Continuous::IndentDiffToPrev,
        Continuous::IndentDiffToSubs,
        Continuous::DistToPrevLine,
        Continuous::DistToSubsLine,
    ];

    fn get(self, raw: &RawFeatures) -> f64 {
        match self {
            Continuous::TextLength => raw.text_length,
            Continuous::Indent => raw.indent,
            Continuous::FontSize => raw.font_size,
            Continuous::SizeDiffToPrev => raw.size_diff_to_prev,
            Continuous::SizeDiffToSubs => raw.size_diff_to_subs,
            Continuous::IndentDiffToPrev => raw.indent_diff_to_prev,
            Continuous::IndentDiffToSubs => raw.indent_diff_to_subs,
            Continuous::DistToPrevLine => raw.dist_to_prev_line,
            Continuous::DistToSubsLine => raw.dist_to_subs_line,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

/// Per-document mean and population standard deviation of each fuzzified feature.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DocStats {
    stats: [MeanStd; 9],
}

impl DocStats {
    pub fn compute(raws: &[RawFeatures]) -> Self {
        let mut stats = [MeanStd::default(); 9];
        if raws.is_empty() {
            return DocStats { stats };
        }
        let n = raws.len() as f64;
        for (slot, feat) in stats.iter_mut().zip(Continuous::ALL) {
            let mean = raws.iter().map(|r| feat.get(r)).sum::<f64>() / n;
            let var = raws.iter().map(|r| (feat.get(r) - mean).powi(2)).sum::<f64>() / n;
            *slot = MeanStd { mean, std: var.sqrt() };
        }
        DocStats { stats }
    }

    pub fn get(&self, feat: Continuous) -> MeanStd {
        self.stats[feat as usize]
    }
}

/// Per-document context needed by the relative features.
#[derive(Debug, Clone, PartialEq)]
pub struct DocContext {
    /// Leftmost line start per page (index 0 = page 1).
    page_margins: Vec<f64>,
    /// Median vertical gap between consecutive blocks of the same page.
    pub median_gap: f64,
}

impl DocContext {
    pub fn new(doc: &Document) -> Self {
        let mut page_margins = vec![f64::INFINITY; doc.pages.len()];
        for b in &doc.blocks {
            if let Some(m) = page_margins.get_mut(b.page() as usize - 1) {
                *m = m.min(b.left());
            }
        }
        for m in &mut page_margins {
            if !m.is_finite() {
                *m = 0.0;
            }
        }
        let mut gaps: Vec<f64> = doc
            .blocks
            .windows(2)
            .filter(|w| w[0].page() == w[1].page())
            .map(|w| w[1].top() - w[0].bottom())
            .collect();
        gaps.sort_by(f64::total_cmp);
        let median_gap = match gaps.len() {
            0 => 0.0,
            n if n % 2 == 1 => gaps[n / 2],
            n => (gaps[n / 2 - 1] + gaps[n / 2]) / 2.0,
        };
        DocContext {
            page_margins,
            median_gap,
        }
    }

    fn indent(&self, block: &TextBlock) -> f64 {
        let margin = self
            .page_margins
            .get(block.page() as usize - 1)
            .copied()
            .unwrap_or(0.0);
        (block.left() - margin).max(0.0)
    }
}

fn same_style(a: &TextBlock, b: &TextBlock) -> StyleRelation {
    let (x, y) = (&a.lines[0], &b.lines[0]);
    if a.bold() == b.bold() && a.italic() == b.italic() && x.font_family == y.font_family {
        StyleRelation::Same
    } else {
        StyleRelation::Differs
    }
}

struct Relative {
    style: StyleRelation,
    weight_diff: i8,
    size: Comparison,
    size_diff: f64,
    indent: Comparison,
    indent_diff: f64,
    dist: f64,
    one_hot: Vec<u8>,
    same_color: bool,
}

fn relative(
    block: &TextBlock,
    other: Option<&TextBlock>,
    other_is_prev: bool,
    vocab: &TitleVocab,
    ctx: &DocContext,
) -> Relative {
    let Some(other) = other else {
        return Relative {
            style: StyleRelation::Same,
            weight_diff: 0,
            size: Comparison::Same,
            size_diff: 0.0,
            indent: Comparison::Same,
            indent_diff: 0.0,
            dist: ctx.median_gap,
            one_hot: vec![0; TITLE_VOCAB_SIZE],
            same_color: true,
        };
    };
    let (size, other_size) = (block.font_size(), other.font_size());
    let (indent, other_indent) = (ctx.indent(block), ctx.indent(other));
    let dist = if block.page() != other.page() {
        ctx.median_gap
    } else if other_is_prev {
        block.top() - other.bottom()
    } else {
        other.top() - block.bottom()
    };
    Relative {
        style: same_style(block, other),
        weight_diff: i8::from(block.bold()) - i8::from(other.bold()),
        size: Comparison::of(size, other_size, SIZE_TOLERANCE),
        size_diff: size - other_size,
        indent: Comparison::of(indent, other_indent, INDENT_TOLERANCE),
        indent_diff: indent - other_indent,
        dist,
        one_hot: vocab.one_hot(&other.merged_text),
        same_color: block.color() == other.color(),
    }
}

/// Computes every feature of `block` given its neighbours. Missing neighbours
/// (document boundaries) yield neutral values: zero differences, "same"
/// comparisons and the document median gap as distance.
pub fn extract_raw(
    block: &TextBlock,
    prev: Option<&TextBlock>,
    next: Option<&TextBlock>,
    vocab: &TitleVocab,
    ctx: &DocContext,
) -> RawFeatures {
    let text = block.merged_text.trim();
    let p = relative(block, prev, true, vocab, ctx);
    let s = relative(block, next, false, vocab, ctx);
    RawFeatures {
        contains_verb: contains_verb(text),
        is_bold: block.bold(),
        is_italic: block.italic(),
        is_all_caps: is_all_caps(text),
        text_length: block.merged_text.chars().count() as f64,
        begins_with_numbering: begins_with_numbering(text),
        one_hot: vocab.one_hot(text),
        indent: ctx.indent(block),
        font_size: block.font_size(),
        style_to_prev: p.style,
        style_to_subs: s.style,
        weight_diff_to_prev: p.weight_diff,
        weight_diff_to_subs: s.weight_diff,
        size_to_prev: p.size,
        size_to_subs: s.size,
        size_diff_to_prev: p.size_diff,
        size_diff_to_subs: s.size_diff,
        indent_to_prev: p.indent,
        indent_to_subs: s.indent,
        indent_diff_to_prev: p.indent_diff,
        indent_diff_to_subs: s.indent_diff,
        dist_to_prev_line: p.dist,
        dist_to_subs_line: s.dist,
        prev_tb_one_hot: p.one_hot,
        subs_tb_one_hot: s.one_hot,
        color_diff_to_prev: p.same_color,
        color_diff_to_subs: s.same_color,
    }
}

/// Raw features of every block of a segmented document.
pub fn extract_document(doc: &Document, vocab: &TitleVocab) -> Vec<RawFeatures> {
    let ctx = DocContext::new(doc);
    let blocks = &doc.blocks;
    (0..blocks.len())
        .map(|i| {
            let prev = i.checked_sub(1).map(|j| &blocks[j]);
            extract_raw(&blocks[i], prev, blocks.get(i + 1), vocab, &ctx)
        })
        .collect()
}

/// Named slice of the encoded vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Slot {
    pub name: &'static str,
    pub start: usize,
    pub len: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FeatureLayout {
    pub slots: Vec<Slot>,
    pub len: usize,
}

const LAYOUT_SPEC: [(&str, usize); 27] = [
    ("contains_verb", 1),
    ("is_bold", 1),
    ("is_italic", 1),
    ("is_all_caps", 1),
    ("text_length", 3),
    ("begins_with_numbering", 1),
    ("one_hot", TITLE_VOCAB_SIZE),
    ("indent", 3),
    ("font_size", 3),
    ("style_to_prev", 2),
    ("style_to_subs", 2),
    ("weight_diff_to_prev", 3),
    ("weight_diff_to_subs", 3),
    ("size_to_prev", 3),
    ("size_to_subs", 3),
    ("size_diff_to_prev", 3),
    ("size_diff_to_subs", 3),
    ("indent_to_prev", 3),
    ("indent_to_subs", 3),
    ("indent_diff_to_prev", 3),
    ("indent_diff_to_subs", 3),
    ("dist_to_prev_line", 3),
    ("dist_to_subs_line", 3),
    ("prev_tb_one_hot", TITLE_VOCAB_SIZE),
    ("subs_tb_one_hot", TITLE_VOCAB_SIZE),
    ("color_diff_to_prev", 1),
    ("color_diff_to_subs", 1),
];

impl FeatureLayout {
    pub fn standard() -> &'static FeatureLayout {
        static LAYOUT: OnceLock<FeatureLayout> = OnceLock::new();
        LAYOUT.get_or_init(|| {
            let mut start = 0;
            let slots = LAYOUT_SPEC
                .iter()
                .map(|&(name, len)| {
                    let s = Slot { name, start, len };
                    start += len;
                    s
                })
                .collect();
            FeatureLayout { slots, len: start }
        })
    }

    pub fn slot(&self, name: &str) -> Option<&Slot> {
        self.slots.iter().find(|s| s.name == name)
    }

    /// Column names for a flat dump, e.g. `font_size=large` or `one_hot[12]`.
    pub fn column_names(&self, vocab: &TitleVocab) -> Vec<String> {
        let mut names = Vec::with_capacity(self.len);
        for s in &self.slots {
            let cats: &[&str] = match s.len {
                1 => &[""],
                2 => &["same", "differs"],
                3 if s.name.starts_with("weight_diff") => &["-1", "0", "+1"],
                3 if s.name.ends_with("_to_prev") || s.name.ends_with("_to_subs") => {
                    if s.name.contains("diff") || s.name.starts_with("dist") {
                        &["small", "normal", "large"]
                    } else {
                        &["smaller", "same", "larger"]
                    }
                }
                3 => &["small", "normal", "large"],
                _ => {
                    names.extend(vocab.tokens().iter().map(|t| format!("{}[{t}]", s.name)));
                    continue;
                }
            };
            for c in cats {
                names.push(if c.is_empty() {
                    s.name.to_string()
                } else {
                    format!("{}={c}", s.name)
                });
            }
        }
        names
    }
}

/// Encoded feature vector; its layout is [`FeatureLayout::standard`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn layout(&self) -> &'static FeatureLayout {
        FeatureLayout::standard()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

struct Encoder {
    values: Vec<f64>,
}

impl Encoder {
    fn flag(&mut self, b: bool) {
        self.values.push(if b { 1.0 } else { 0.0 });
    }

    fn one_of(&mut self, index: usize, n: usize) {
        for i in 0..n {
            self.values.push(if i == index { 1.0 } else { 0.0 });
        }
    }

    fn fuzzy(&mut self, f: Fuzzy) {
        self.one_of(f as usize, 3);
    }

    fn comparison(&mut self, c: Comparison) {
        self.one_of(c as usize, 3);
    }

    fn style(&mut self, s: StyleRelation) {
        self.one_of(s as usize, 2);
    }

    fn weight(&mut self, name: &str, d: i8) -> Result<()> {
        if !(-1..=1).contains(&d) {
            return Err(Error::InvalidInput(format!("{name} has unknown category {d}")));
        }
        self.one_of((d + 1) as usize, 3);
        Ok(())
    }

    fn presence(&mut self, name: &str, v: &[u8]) -> Result<()> {
        if v.len() != TITLE_VOCAB_SIZE || v.iter().any(|&x| x > 1) {
            return Err(Error::InvalidInput(format!(
                "{name} must be a 0/1 vector of length {TITLE_VOCAB_SIZE}"
            )));
        }
        self.values.extend(v.iter().map(|&x| f64::from(x)));
        Ok(())
    }
}

/// Encodes raw features: fuzzified features as 3-slot one-hots, categorical
/// features as one slot per category, flags as single slots and vocabulary
/// presence vectors verbatim.
pub fn encode(raw: &RawFeatures, stats: &DocStats) -> Result<FeatureVector> {
    let fz = |feat: Continuous| {
        let v = feat.get(raw);
        let s = stats.get(feat);
        if !v.is_finite() {
            return Err(Error::InvalidInput(format!("{feat:?} is not finite")));
        }
        Ok(fuzzify(v, s.mean, s.std))
    };
    let mut e = Encoder {
        values: Vec::with_capacity(FeatureLayout::standard().len),
    };
    e.flag(raw.contains_verb);
    e.flag(raw.is_bold);
    e.flag(raw.is_italic);
    e.flag(raw.is_all_caps);
    e.fuzzy(fz(Continuous::TextLength)?);
    e.flag(raw.begins_with_numbering);
    e.presence("one_hot", &raw.one_hot)?;
    e.fuzzy(fz(Continuous::Indent)?);
    e.fuzzy(fz(Continuous::FontSize)?);
    e.style(raw.style_to_prev);
    e.style(raw.style_to_subs);
    e.weight("weight_diff_to_prev", raw.weight_diff_to_prev)?;
    e.weight("weight_diff_to_subs", raw.weight_diff_to_subs)?;
    e.comparison(raw.size_to_prev);
    e.comparison(raw.size_to_subs);
    e.fuzzy(fz(Continuous::SizeDiffToPrev)?);
    e.fuzzy(fz(Continuous::SizeDiffToSubs)?);
    e.comparison(raw.indent_to_prev);
    e.comparison(raw.indent_to_subs);
    e.fuzzy(fz(Continuous::IndentDiffToPrev)?);
    e.fuzzy(fz(Continuous::IndentDiffToSubs)?);
    e.fuzzy(fz(Continuous::DistToPrevLine)?);
    e.fuzzy(fz(Continuous::DistToSubsLine)?);
    e.presence("prev_tb_one_hot", &raw.prev_tb_one_hot)?;
    e.presence("subs_tb_one_hot", &raw.subs_tb_one_hot)?;
    e.flag(raw.color_diff_to_prev);
    e.flag(raw.color_diff_to_subs);
    debug_assert_eq!(e.values.len(), FeatureLayout::standard().len);
    Ok(FeatureVector { values: e.values })
}

/// Raw features, statistics and encoded vectors for every block of a segmented document.
pub fn featurize_document(doc: &Document, vocab: &TitleVocab) -> Result<(Vec<RawFeatures>, Vec<FeatureVector>)> {
    let raws = extract_document(doc, vocab);
    let stats = DocStats::compute(&raws);
    let encoded = raws.iter().map(|r| encode(r, &stats)).collect::<Result<Vec<_>>>()?;
    Ok((raws, encoded))
}
