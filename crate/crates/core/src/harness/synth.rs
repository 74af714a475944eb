//! Seeded generator of layout documents with gold TOCs.
//!
//! Every corpus shares one template tree. A document's TOC is an
//! ancestor-closed subset of the template, some titles swapped for fresh ones
//! according to `template_consistency`. Titles are rendered with a per-level
//! style, optional numbering and noise: size jitter, multi-line titles,
//! bold body paragraphs, page headers, footers and a running header.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::doc::{serialize_toc, write_layout_xml, Document, PageInfo, Rgb, TextLine, TocEntry, TocTree};
use crate::error::{Error, Result};
use crate::template::{levenshtein, match_key};
use crate::tree::build_toc;

pub const PAGE_WIDTH: f64 = 892.0;
pub const PAGE_HEIGHT: f64 = 1263.0;
const LEFT: f64 = 90.0;
const TEXT_WIDTH: f64 = 712.0;
const CONTENT_TOP: f64 = 135.0;
const CONTENT_BOTTOM: f64 = 1130.0;
const BODY_SIZE: f64 = 10.0;
const BODY_PITCH: f64 = 15.0;
const PARAGRAPH_GAP: f64 = 16.0;
/// Template titles are kept at least this far apart (relative edit distance).
const MIN_TITLE_SEPARATION: f64 = 0.4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelStyle {
    pub font_size: f64,
    pub bold: bool,
    pub italic: bool,
    pub all_caps: bool,
    pub indent: f64,
    pub color: Rgb,
}

impl LevelStyle {
    fn new(font_size: f64, bold: bool, italic: bool, all_caps: bool, indent: f64, color: Rgb) -> Self {
        LevelStyle {
            font_size,
            bold,
            italic,
            all_caps,
            indent,
            color,
        }
    }
}

fn default_palette() -> Vec<LevelStyle> {
    let navy = Rgb([0x1f, 0x38, 0x64]);
    vec![
        LevelStyle::new(16.0, true, false, true, 0.0, navy),
        LevelStyle::new(13.0, true, false, false, 0.0, navy),
        LevelStyle::new(12.0, true, true, false, 0.0, Rgb::BLACK),
        LevelStyle::new(11.0, false, true, false, 20.0, Rgb::BLACK),
        LevelStyle::new(10.0, true, false, false, 30.0, Rgb::BLACK),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub n_docs: usize,
    /// Inclusive range of target page counts.
    pub pages: (u32, u32),
    /// Inclusive range of TOC depths; each document draws its maximum depth from it.
    pub depth: (u8, u8),
    /// Share of titles taken from the shared template; the rest are fresh.
    pub template_consistency: f64,
    /// Styles of levels 1 to 5.
    pub palette: Vec<LevelStyle>,
    /// Shuffle the palette over levels independently for each document.
    pub randomize_palette: bool,
    /// Maximum absolute font-size jitter of title lines, in points.
    pub size_jitter: f64,
    pub multiline_title_prob: f64,
    pub bold_paragraph_prob: f64,
    pub running_header: bool,
    /// Inclusive range of lines per body paragraph.
    pub paragraph_lines: (u32, u32),
    /// Probability that a template entry is kept in a document, per level.
    pub keep_prob: [f64; 5],
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            n_docs: 10,
            pages: (20, 30),
            depth: (3, 5),
            template_consistency: 0.8,
            palette: default_palette(),
            randomize_palette: false,
            size_jitter: 0.2,
            multiline_title_prob: 0.1,
            bold_paragraph_prob: 0.05,
            running_header: true,
            paragraph_lines: (3, 10),
            keep_prob: [0.75, 0.6, 0.5, 0.45, 0.45],
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("synthetic spec: {m}")));
        if self.pages.0 == 0 || self.pages.0 > self.pages.1 {
            return bad("page range must be non-empty and start at 1 or more");
        }
        if self.depth.0 == 0 || self.depth.0 > self.depth.1 || self.depth.1 > 5 {
            return bad("depth range must lie within 1..=5");
        }
        if !(0.0..=1.0).contains(&self.template_consistency) {
            return bad("template_consistency must lie in [0, 1]");
        }
        if self.palette.len() != 5 {
            return bad("the palette needs one style per level 1..=5");
        }
        if self.paragraph_lines.0 == 0 || self.paragraph_lines.0 > self.paragraph_lines.1 {
            return bad("paragraph line range must be non-empty");
        }
        if self.size_jitter < 0.0 || self.size_jitter > 0.24 {
            return bad("size_jitter must lie in [0, 0.24] so title lines still group");
        }
        for p in [self.multiline_title_prob, self.bold_paragraph_prob]
            .iter()
            .chain(&self.keep_prob)
        {
            if !(0.0..=1.0).contains(p) {
                return bad("probabilities must lie in [0, 1]");
            }
        }
        Ok(())
    }
}

/// One generated document with its gold TOC.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDoc {
    pub document: Document,
    pub toc: TocTree,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub template: TocTree,
    pub docs: Vec<SyntheticDoc>,
}

const NOUNS: &[&str] = &[
    "fees", "costs", "risk", "profile", "objective", "policy", "investment", "strategy", "assets",
    "liabilities", "governance", "management", "depositary", "custody", "shares", "units",
    "subscription", "redemption", "valuation", "performance", "benchmark", "taxation", "distribution",
    "dividends", "reporting", "liquidity", "leverage", "derivatives", "collateral", "counterparty",
    "conflicts", "remuneration", "audit", "accounts", "expenses", "charges", "limits",
    "restrictions", "borrowing", "lending", "securities", "markets", "currency", "hedging", "classes",
    "investors", "eligibility", "transfers", "settlement", "documents", "notices", "meetings",
    "amendments", "termination", "liquidation", "complaints", "disclosures", "definitions",
    "glossary", "summary", "overview", "scope", "principles", "procedures", "controls", "oversight",
    "directors", "board", "officers", "agents", "services", "providers", "calculation",
    "publication", "prices", "suspension", "dealing", "holdings", "thresholds", "exposure",
    "ratings", "sustainability", "criteria", "methodology", "allocation", "diversification",
    "rebalancing", "monitoring", "compliance", "regulation", "authorisation", "registration",
    "protection", "privacy", "indemnity", "liability", "warranties", "jurisdiction",
];

const ADJECTIVES: &[&str] = &[
    "general", "specific", "annual", "periodic", "ongoing", "entry", "exit", "key", "main", "other",
    "additional", "principal", "secondary", "operational", "financial", "legal", "regulatory",
    "environmental", "social", "historical", "net", "gross", "maximum", "minimum", "initial",
    "subsequent", "temporary", "permanent", "material", "relevant", "applicable", "fixed",
    "variable", "total", "past", "future", "current",
];

const BODY_WORDS: &[&str] = &[
    "the", "fund", "may", "invest", "in", "a", "of", "and", "to", "shares", "assets", "will", "be",
    "is", "are", "by", "for", "on", "with", "any", "such", "manager", "company", "investors",
    "should", "note", "that", "this", "document", "value", "net", "each", "day", "business",
    "subject", "terms", "conditions", "described", "below", "above", "section", "applicable",
    "law", "regulations", "under", "which", "can", "not", "more", "than", "per", "cent", "total",
    "portfolio", "securities", "market", "risk", "returns", "income", "capital", "growth",
    "provided", "accordance", "with", "prospectus", "board", "directors", "decide", "pay",
    "receive", "holders", "units", "price", "calculated", "published", "request", "charge",
    "time", "period", "year", "amount", "expressed", "currency", "limit", "exceed", "apply",
];

fn title_case(words: &[&str]) -> String {
    words
        .iter()
        .enumerate()
        .map(|(i, w)| {
            if i > 0 && (*w == "and" || *w == "of") {
                w.to_string()
            } else {
                let mut c = w.chars();
                match c.next() {
                    Some(f) => f.to_uppercase().chain(c).collect(),
                    None => String::new(),
                }
            }
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn random_title(rng: &mut ChaCha8Rng) -> String {
    let n = |rng: &mut ChaCha8Rng| *NOUNS.choose(rng).unwrap();
    let a = |rng: &mut ChaCha8Rng| *ADJECTIVES.choose(rng).unwrap();
    let words: Vec<&str> = match rng.gen_range(0..5) {
        0 => vec![a(rng), n(rng)],
        1 => vec![n(rng), "and", n(rng)],
        2 => vec![a(rng), n(rng), n(rng)],
        3 => vec![n(rng), "of", n(rng)],
        _ => vec![a(rng), n(rng), "and", n(rng)],
    };
    title_case(&words)
}

/// Draws titles that stay clearly apart from every title in `taken`.
struct TitlePool {
    keys: Vec<String>,
}

impl TitlePool {
    fn separated(&self, key: &str) -> bool {
        self.keys.iter().all(|k| {
            let len = k.chars().count().max(key.chars().count()) as f64;
            levenshtein(k, key) as f64 > MIN_TITLE_SEPARATION * len
        })
    }

    fn draw(&mut self, rng: &mut ChaCha8Rng) -> String {
        loop {
            let t = random_title(rng);
            let key = match_key(&t);
            if self.separated(&key) {
                self.keys.push(key);
                return t;
            }
        }
    }
}

fn template_children(level: u8, rng: &mut ChaCha8Rng) -> usize {
    match level {
        1 => rng.gen_range(2..=4),
        2 => rng.gen_range(1..=3),
        3 | 4 => rng.gen_range(1..=2),
        _ => 0,
    }
}

fn template_node(level: u8, pool: &mut TitlePool, rng: &mut ChaCha8Rng) -> TocEntry {
    let title = pool.draw(rng);
    let children = (0..template_children(level, rng))
        .map(|_| template_node(level + 1, pool, rng))
        .collect();
    TocEntry {
        title,
        start_page: 1,
        end_page: 1,
        level,
        children,
    }
}

/// Shared template: eight top-level sections, every branch reaching depth 5.
pub fn generate_template(rng: &mut ChaCha8Rng) -> TocTree {
    let mut pool = TitlePool { keys: Vec::new() };
    TocTree {
        roots: (0..8).map(|_| template_node(1, &mut pool, rng)).collect(),
    }
}

#[derive(Debug, Clone, Copy)]
enum Numbering {
    Decimal,
    Roman,
    TopOnly,
    None,
}

fn roman(mut n: usize) -> String {
    const TABLE: [(usize, &str); 9] = [
        (100, "C"),
        (90, "XC"),
        (50, "L"),
        (40, "XL"),
        (10, "X"),
        (9, "IX"),
        (5, "V"),
        (4, "IV"),
        (1, "I"),
    ];
    let mut s = String::new();
    for (v, r) in TABLE {
        while n >= v {
            s.push_str(r);
            n -= v;
        }
    }
    s
}

fn letter(n: usize) -> char {
    (b'a' + ((n - 1) % 26) as u8) as char
}

/// Label for the title whose per-level counters are `path` (1-based).
fn number_label(scheme: Numbering, path: &[usize]) -> Option<String> {
    let level = path.len();
    let last = *path.last()?;
    match scheme {
        Numbering::None => None,
        Numbering::TopOnly => (level == 1).then(|| format!("{last}.")),
        Numbering::Decimal => Some(match level {
            1 => format!("{last}."),
            2..=4 => path.iter().map(|n| n.to_string()).collect::<Vec<_>>().join("."),
            _ => format!("({})", letter(last)),
        }),
        Numbering::Roman => Some(match level {
            1 => format!("{}.", roman(last)),
            2 => format!("{}.", letter(last).to_ascii_uppercase()),
            3 => format!("{last}."),
            4 => format!("({})", letter(last)),
            _ => format!("({})", roman(last).to_lowercase()),
        }),
    }
}

/// Item of the document's content stream.
enum Item {
    Title { text: String, level: u8 },
    Paragraph { lines: u32, bold: bool },
}

fn sentence(rng: &mut ChaCha8Rng) -> String {
    let n = rng.gen_range(8..=18);
    let words: Vec<&str> = (0..n).map(|_| *BODY_WORDS.choose(rng).unwrap()).collect();
    let mut s = words.join(" ");
    if let Some(f) = s.get_mut(0..1) {
        f.make_ascii_uppercase();
    }
    s.push('.');
    s
}

/// Greedy word wrap of generated sentences into `lines` lines of at most `width` characters.
fn paragraph_text(rng: &mut ChaCha8Rng, lines: u32, width: usize) -> Vec<String> {
    let mut out = Vec::new();
    let mut words: Vec<String> = Vec::new();
    while out.len() < lines as usize {
        if words.is_empty() {
            words = sentence(rng).split(' ').rev().map(str::to_owned).collect();
        }
        let mut line = String::new();
        while let Some(w) = words.last() {
            if !line.is_empty() && line.len() + 1 + w.len() > width {
                break;
            }
            if !line.is_empty() {
                line.push(' ');
            }
            line.push_str(w);
            words.pop();
            if words.is_empty() && out.len() + 1 < lines as usize {
                words = sentence(rng).split(' ').rev().map(str::to_owned).collect();
            }
        }
        out.push(line);
    }
    // The last line of a paragraph is usually short.
    if let Some(last) = out.last_mut() {
        let keep = (last.len() * 2 / 3).max(1);
        if let Some(cut) = last[..keep.min(last.len())].rfind(' ') {
            last.truncate(cut);
            last.push('.');
        }
    }
    out
}

fn text_width(text: &str, size: f64) -> f64 {
    (text.chars().count() as f64 * size * 0.5).round()
}

struct Layout<'a> {
    spec: &'a SyntheticSpec,
    lines: Vec<TextLine>,
    page: u32,
    y: f64,
    header: String,
    running: String,
    family: String,
}

impl Layout<'_> {
    fn line(&mut self, text: String, left: f64, size: f64, bold: bool, italic: bool, color: Rgb) {
        let height = (size * 1.3).round();
        self.lines.push(TextLine {
            width: text_width(&text, size),
            text,
            page: self.page,
            left,
            top: self.y.round(),
            height,
            font_size: size,
            bold,
            italic,
            color,
            font_family: self.family.clone(),
        });
    }

    fn start_page(&mut self) {
        self.page += 1;
        let color = Rgb([0x55, 0x55, 0x55]);
        self.y = 45.0;
        let header = self.header.clone();
        self.line(header, LEFT, 8.0, false, false, color);
        self.y = 1205.0;
        self.line(format!("Page {}", self.page), PAGE_WIDTH / 2.0 - 20.0, 8.0, false, false, color);
        if self.spec.running_header {
            self.y = 108.0;
            let running = self.running.clone();
            self.line(running, LEFT, 8.0, false, true, color);
        }
        self.y = CONTENT_TOP;
    }

    fn ensure(&mut self, height: f64) {
        if self.y + height > CONTENT_BOTTOM {
            self.start_page();
        }
    }
}

fn render(
    doc_id: &str,
    items: &[Item],
    palette: &[LevelStyle],
    spec: &SyntheticSpec,
    rng: &mut ChaCha8Rng,
) -> (Document, Vec<(String, u32, u8)>) {
    let fund = title_case(&[ADJECTIVES.choose(rng).unwrap(), NOUNS.choose(rng).unwrap()]);
    let mut layout = Layout {
        spec,
        lines: Vec::new(),
        page: 0,
        y: 0.0,
        header: format!("{fund} Fund"),
        running: format!("Prospectus - {fund} Fund - {}", 2000 + rng.gen_range(10..25)),
        family: ["Times", "Arial", "Helvetica"].choose(rng).unwrap().to_string(),
    };
    layout.start_page();
    // Cover block: large bold heading and a subtitle, neither part of the TOC.
    layout.line(format!("{fund} Fund"), LEFT, 24.0, true, false, Rgb::BLACK);
    layout.y += 45.0;
    layout.line("Prospectus and key information for investors".into(), LEFT, 12.0, false, false, Rgb::BLACK);
    layout.y += 40.0;

    let chars_per_line = (TEXT_WIDTH / (BODY_SIZE * 0.5)) as usize;
    let mut gold = Vec::new();
    for item in items {
        match item {
            Item::Title { text, level } => {
                let style = &palette[*level as usize - 1];
                let shown = if style.all_caps { text.to_uppercase() } else { text.clone() };
                let words: Vec<&str> = shown.split(' ').collect();
                let parts: Vec<String> = if words.len() >= 4 && rng.gen_bool(spec.multiline_title_prob) {
                    let cut = words.len() / 2;
                    vec![words[..cut].join(" "), words[cut..].join(" ")]
                } else {
                    vec![shown.clone()]
                };
                let pitch = (style.font_size * 1.5).round();
                layout.y += 14.0;
                layout.ensure(pitch * parts.len() as f64 + 2.0 * BODY_PITCH);
                gold.push((shown.clone(), layout.page, *level));
                for part in parts {
                    let size = style.font_size + (rng.gen_range(-spec.size_jitter..=spec.size_jitter) * 10.0).round() / 10.0;
                    let left = LEFT + style.indent + rng.gen_range(-1..=1) as f64;
                    layout.line(part, left, size, style.bold, style.italic, style.color);
                    layout.y += pitch;
                }
                layout.y += 6.0;
            }
            Item::Paragraph { lines, bold } => {
                let text = paragraph_text(rng, *lines, chars_per_line);
                for t in text {
                    layout.ensure(BODY_PITCH);
                    layout.line(t, LEFT, BODY_SIZE, *bold, false, Rgb::BLACK);
                    layout.y += BODY_PITCH;
                }
                layout.y += PARAGRAPH_GAP;
            }
        }
    }
    let pages = (1..=layout.page)
        .map(|number| PageInfo {
            number,
            width: PAGE_WIDTH,
            height: PAGE_HEIGHT,
        })
        .collect();
    (Document::new(doc_id, pages, layout.lines), gold)
}

/// Keeps template entries with per-level probability, never below `max_depth`,
/// and always keeps one chain reaching `max_depth`.
fn select(entry: &TocEntry, max_depth: u8, keep: &[f64; 5], forced: bool, rng: &mut ChaCha8Rng) -> Option<TocEntry> {
    if entry.level > max_depth || !(forced || rng.gen_bool(keep[entry.level as usize - 1])) {
        return None;
    }
    let children = entry
        .children
        .iter()
        .enumerate()
        .filter_map(|(i, c)| select(c, max_depth, keep, forced && i == 0, rng))
        .collect();
    Some(TocEntry {
        children,
        ..entry.clone()
    })
}

fn flatten(entries: &[TocEntry], out: &mut Vec<(String, u8, bool)>) {
    for e in entries {
        out.push((e.title.clone(), e.level, e.children.is_empty()));
        flatten(&e.children, out);
    }
}

fn generate_doc(
    index: usize,
    template: &TocTree,
    pool: &mut TitlePool,
    spec: &SyntheticSpec,
    rng: &mut ChaCha8Rng,
) -> Result<SyntheticDoc> {
    let max_depth = rng.gen_range(spec.depth.0..=spec.depth.1);
    let forced_root = rng.gen_range(0..template.roots.len());
    let roots: Vec<TocEntry> = template
        .roots
        .iter()
        .enumerate()
        .filter_map(|(i, r)| select(r, max_depth, &spec.keep_prob, i == forced_root, rng))
        .collect();
    let mut flat = Vec::new();
    flatten(&roots, &mut flat);
    for t in &mut flat {
        if !rng.gen_bool(spec.template_consistency) {
            t.0 = pool.draw(rng);
        }
    }

    let mut palette = spec.palette.clone();
    if spec.randomize_palette {
        palette.shuffle(rng);
    }
    let scheme = *[Numbering::Decimal, Numbering::Roman, Numbering::TopOnly, Numbering::None]
        .choose(rng)
        .unwrap();

    let target_pages = rng.gen_range(spec.pages.0..=spec.pages.1) as f64;
    let mean_lines = (spec.paragraph_lines.0 + spec.paragraph_lines.1) as f64 / 2.0 + 1.1;
    let per_page = (CONTENT_BOTTOM - CONTENT_TOP) / BODY_PITCH / mean_lines;
    let budget = (target_pages * per_page - flat.len() as f64 * 0.4).max(flat.len() as f64) as usize;
    let mut paras: Vec<usize> = flat.iter().map(|(_, _, leaf)| usize::from(*leaf)).collect();
    let used: usize = paras.iter().sum();
    for _ in used..budget {
        let i = rng.gen_range(0..paras.len());
        paras[i] += 1;
    }

    let mut items = Vec::new();
    let mut counters = [0usize; 5];
    for ((title, level, _), n) in flat.iter().zip(&paras) {
        let l = *level as usize;
        counters[l - 1] += 1;
        counters[l..].iter_mut().for_each(|c| *c = 0);
        let text = match number_label(scheme, &counters[..l]) {
            Some(label) => format!("{label} {title}"),
            None => title.clone(),
        };
        items.push(Item::Title { text, level: *level });
        for k in 0..*n {
            // Bold paragraphs only sit between two regular paragraphs.
            let bold = k > 0 && k + 1 < *n && rng.gen_bool(spec.bold_paragraph_prob);
            let lines = if bold { rng.gen_range(1..=2) } else { rng.gen_range(spec.paragraph_lines.0..=spec.paragraph_lines.1) };
            items.push(Item::Paragraph { lines, bold });
        }
    }

    let doc_id = format!("doc-{index:04}");
    let (document, gold) = render(&doc_id, &items, &palette, spec, rng);
    let titles: Vec<&str> = gold.iter().map(|g| g.0.as_str()).collect();
    let pages: Vec<u32> = gold.iter().map(|g| g.1).collect();
    let levels: Vec<u8> = gold.iter().map(|g| g.2).collect();
    let toc = build_toc(&titles, &pages, &levels, document.page_count())?;
    Ok(SyntheticDoc { document, toc })
}

/// Generates a corpus; identical `spec` and `seed` give identical output.
pub fn generate_corpus(spec: &SyntheticSpec, seed: u64) -> Result<Corpus> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let template = generate_template(&mut rng);
    let mut pool = TitlePool {
        keys: template.preorder().iter().map(|(e, _)| match_key(&e.title)).collect(),
    };
    let docs = (0..spec.n_docs)
        .map(|i| generate_doc(i, &template, &mut pool, spec, &mut rng))
        .collect::<Result<Vec<_>>>()?;
    Ok(Corpus { template, docs })
}

/// Writes `template.json`, `spec.json` and one `<id>.xml` / `<id>.toc.json` pair per document.
pub fn write_corpus(corpus: &Corpus, spec: &SyntheticSpec, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let write = |name: String, bytes: &[u8]| {
        let path = dir.join(name);
        std::fs::write(&path, bytes).map_err(|e| Error::io(path, e))
    };
    write("template.json".into(), &serialize_toc(&corpus.template)?)?;
    let mut spec_json = serde_json::to_vec_pretty(spec)?;
    spec_json.push(b'\n');
    write("spec.json".into(), &spec_json)?;
    for d in &corpus.docs {
        write(format!("{}.xml", d.document.doc_id), write_layout_xml(&d.document).as_bytes())?;
        write(format!("{}.toc.json", d.document.doc_id), &serialize_toc(&d.toc)?)?;
    }
    Ok(())
}

/// Reads every `<id>.xml` layout file of a directory together with its
/// `<id>.toc.json` gold TOC, sorted by file name.
pub fn read_corpus(dir: &Path) -> Result<Vec<(Document, TocTree)>> {
    let mut layouts: Vec<std::path::PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "xml"))
        .collect();
    layouts.sort();
    let mut out = Vec::with_capacity(layouts.len());
    for layout in layouts {
        let toc_path = layout.with_extension("toc.json");
        if !toc_path.exists() {
            log::warn!("{} has no gold TOC, skipped", layout.display());
            continue;
        }
        let doc = crate::doc::ingest_layout_file(&layout)?;
        let bytes = std::fs::read(&toc_path).map_err(|e| Error::io(&toc_path, e))?;
        out.push((doc, crate::doc::parse_toc(&bytes)?));
    }
    if out.is_empty() {
        return Err(Error::InvalidInput(format!("no annotated documents in {}", dir.display())));
    }
    Ok(out)
}
