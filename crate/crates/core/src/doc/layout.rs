//! Layout-file ingestion and serialization.
//!
//! The XML flavour mirrors what common PDF-to-XML converters emit:
//!
//! ```xml
//! <pdf2xml doc-id="fund-x">
//!   <fontspec id="0" size="10" family="Times" color="#000000"/>
//!   <page number="1" width="892" height="1263">
//!     <text top="120" left="90" width="310" height="15" font="0"><b>1. Fees</b></text>
//!   </page>
//! </pdf2xml>
//! ```
//!
//! `fontspec` elements may appear at top level or inside any page; ids are
//! global. A text element is bold (italic) when every non-blank character sits
//! inside `<b>` (`<i>`) markup. Whitespace-only text elements are dropped.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;
use serde::Deserialize;

use super::{Document, PageInfo, Rgb, TextLine};
use crate::error::{Error, Result};

/// Reads a layout file (`.json` is parsed as JSON, anything else as XML).
pub fn ingest_layout_file(path: &Path) -> Result<Document> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let fallback_id = path
        .file_stem()
        .map(|s| s.to_string_lossy().trim_end_matches(".layout").to_string())
        .unwrap_or_default();
    let text = String::from_utf8(bytes)
        .map_err(|e| Error::parse(path.display().to_string(), format!("invalid UTF-8: {e}")))?;
    if path.extension().is_some_and(|e| e == "json") {
        parse_layout_json(&text, &fallback_id)
    } else {
        parse_layout_xml(&text, &fallback_id)
    }
}

#[derive(Debug, Clone)]
struct FontSpec {
    size: f64,
    family: String,
    color: Rgb,
}

struct PendingText {
    page: u32,
    top: f64,
    left: f64,
    width: f64,
    height: f64,
    font: FontSpec,
    text: String,
    chars: usize,
    bold_chars: usize,
    italic_chars: usize,
}

fn line_of(src: &str, offset: usize) -> usize {
    src.as_bytes()[..offset.min(src.len())]
        .iter()
        .filter(|&&b| b == b'\n')
        .count()
        + 1
}

fn attrs(e: &BytesStart<'_>, loc: &dyn Fn() -> String) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for a in e.attributes() {
        let a = a.map_err(|err| Error::parse(loc(), err.to_string()))?;
        let key = String::from_utf8_lossy(a.key.as_ref()).into_owned();
        let value = a
            .unescape_value()
            .map_err(|err| Error::parse(loc(), err.to_string()))?
            .into_owned();
        out.insert(key, value);
    }
    Ok(out)
}

fn required<'a>(
    map: &'a BTreeMap<String, String>,
    key: &str,
    element: &str,
    loc: &dyn Fn() -> String,
) -> Result<&'a str> {
    map.get(key)
        .map(String::as_str)
        .ok_or_else(|| Error::parse(loc(), format!("<{element}> is missing attribute `{key}`")))
}

fn number(value: &str, key: &str, element: &str, loc: &dyn Fn() -> String) -> Result<f64> {
    value
        .trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| {
            Error::parse(
                loc(),
                format!("<{element}> attribute `{key}` is not a number: {value:?}"),
            )
        })
}

#[derive(Default)]
struct XmlState {
    doc_id: Option<String>,
    fonts: BTreeMap<String, FontSpec>,
    pages: Vec<PageInfo>,
    lines: Vec<TextLine>,
    current_page: Option<u32>,
    pending: Option<PendingText>,
    bold_depth: usize,
    italic_depth: usize,
    text_count: usize,
}

impl XmlState {
    fn open(&mut self, e: &BytesStart<'_>, empty: bool, loc: &dyn Fn() -> String) -> Result<()> {
        if self.pending.is_some() {
            // Inline markup inside a text element; an empty <b/> carries no text.
            match e.name().as_ref() {
                b"b" if !empty => self.bold_depth += 1,
                b"i" if !empty => self.italic_depth += 1,
                _ => {}
            }
            return Ok(());
        }
        match e.name().as_ref() {
            b"pdf2xml" => {
                if let Some(id) = attrs(e, loc)?.remove("doc-id") {
                    self.doc_id = Some(id);
                }
            }
            b"fontspec" => {
                let a = attrs(e, loc)?;
                let id = required(&a, "id", "fontspec", loc)?.to_string();
                let size = number(required(&a, "size", "fontspec", loc)?, "size", "fontspec", loc)?;
                if size <= 0.0 {
                    return Err(Error::parse(loc(), format!("fontspec {id} has non-positive size")));
                }
                let family = a.get("family").cloned().unwrap_or_default();
                let color = match a.get("color") {
                    Some(c) => Rgb::from_hex(c).ok_or_else(|| {
                        Error::parse(loc(), format!("fontspec {id} has invalid color {c:?}"))
                    })?,
                    None => Rgb::BLACK,
                };
                self.fonts.insert(id, FontSpec { size, family, color });
            }
            b"page" => {
                let a = attrs(e, loc)?;
                let n = number(required(&a, "number", "page", loc)?, "number", "page", loc)?;
                let width = number(required(&a, "width", "page", loc)?, "width", "page", loc)?;
                let height = number(required(&a, "height", "page", loc)?, "height", "page", loc)?;
                if n < 1.0 || n.fract() != 0.0 || width <= 0.0 || height <= 0.0 {
                    return Err(Error::parse(loc(), format!("invalid <page> geometry (number {n})")));
                }
                let n = n as u32;
                if n as usize != self.pages.len() + 1 {
                    return Err(Error::parse(
                        loc(),
                        format!(
                            "pages must be numbered consecutively from 1; found page {n} after {}",
                            self.pages.len()
                        ),
                    ));
                }
                self.pages.push(PageInfo { number: n, width, height });
                self.current_page = (!empty).then_some(n);
            }
            b"text" => {
                self.text_count += 1;
                let count = self.text_count;
                let page = self.current_page.ok_or_else(|| {
                    Error::parse(loc(), format!("text element #{count} outside of a <page>"))
                })?;
                let a = attrs(e, loc)?;
                let what = format!("text element #{count} on page {page}");
                let font_id = a
                    .get("font")
                    .ok_or_else(|| Error::parse(loc(), format!("{what} is missing attribute `font`")))?;
                let font = self.fonts.get(font_id).cloned().ok_or_else(|| {
                    Error::parse(loc(), format!("{what} references unknown font {font_id:?}"))
                })?;
                let get = |k: &str| -> Result<f64> {
                    let v = a
                        .get(k)
                        .ok_or_else(|| Error::parse(loc(), format!("{what} is missing attribute `{k}`")))?;
                    let v = number(v, k, "text", loc)?;
                    if v < 0.0 && (k == "width" || k == "height") {
                        return Err(Error::parse(loc(), format!("{what} has negative `{k}`")));
                    }
                    Ok(v)
                };
                let pending = PendingText {
                    page,
                    top: get("top")?,
                    left: get("left")?,
                    width: get("width")?,
                    height: get("height")?,
                    font,
                    text: String::new(),
                    chars: 0,
                    bold_chars: 0,
                    italic_chars: 0,
                };
                if !empty {
                    self.pending = Some(pending);
                    self.bold_depth = 0;
                    self.italic_depth = 0;
                }
            }
            // Outline sections and other converter extras are ignored.
            _ => {}
        }
        Ok(())
    }

    fn text(&mut self, s: &str) {
        if let Some(p) = self.pending.as_mut() {
            let visible = s.chars().filter(|c| !c.is_whitespace()).count();
            p.chars += visible;
            if self.bold_depth > 0 {
                p.bold_chars += visible;
            }
            if self.italic_depth > 0 {
                p.italic_chars += visible;
            }
            p.text.push_str(s);
        }
    }

    fn close(&mut self, name: &[u8]) {
        match name {
            b"b" if self.pending.is_some() => self.bold_depth = self.bold_depth.saturating_sub(1),
            b"i" if self.pending.is_some() => {
                self.italic_depth = self.italic_depth.saturating_sub(1)
            }
            b"text" => {
                if let Some(p) = self.pending.take() {
                    if p.chars > 0 {
                        self.lines.push(TextLine {
                            text: p.text,
                            page: p.page,
                            left: p.left,
                            top: p.top,
                            width: p.width,
                            height: p.height,
                            font_size: p.font.size,
                            bold: p.bold_chars == p.chars,
                            italic: p.italic_chars == p.chars,
                            color: p.font.color,
                            font_family: p.font.family,
                        });
                    }
                }
            }
            b"page" => self.current_page = None,
            _ => {}
        }
    }
}

/// Parses the XML layout format.
pub fn parse_layout_xml(src: &str, fallback_id: &str) -> Result<Document> {
    let mut reader = Reader::from_str(src);
    reader.config_mut().trim_text(false);
    let mut state = XmlState::default();
    loop {
        let offset = reader.buffer_position() as usize;
        let loc = || format!("line {}", line_of(src, offset));
        let event = reader
            .read_event()
            .map_err(|e| Error::parse(loc(), e.to_string()))?;
        match event {
            Event::Eof => break,
            Event::Start(e) => state.open(&e, false, &loc)?,
            Event::Empty(e) => state.open(&e, true, &loc)?,
            Event::Text(t) => {
                let s = t.unescape().map_err(|e| Error::parse(loc(), e.to_string()))?;
                state.text(&s);
            }
            Event::CData(t) => state.text(&String::from_utf8_lossy(&t)),
            Event::End(e) => state.close(e.name().as_ref()),
            _ => {}
        }
    }
    if state.pages.is_empty() {
        return Err(Error::EmptyDocument);
    }
    Ok(Document::new(
        state.doc_id.unwrap_or_else(|| fallback_id.to_string()),
        state.pages,
        state.lines,
    ))
}

#[derive(Deserialize)]
struct LayoutJson {
    #[serde(default)]
    doc_id: Option<String>,
    pages: Vec<PageInfo>,
    lines: Vec<TextLine>,
}

/// Parses the JSON flavour: `{doc_id, pages: [{number, width, height}], lines: [TextLine]}`.
pub fn parse_layout_json(src: &str, fallback_id: &str) -> Result<Document> {
    let raw: LayoutJson = serde_json::from_str(src)
        .map_err(|e| Error::parse(format!("line {} column {}", e.line(), e.column()), e.to_string()))?;
    if raw.pages.is_empty() {
        return Err(Error::EmptyDocument);
    }
    for (i, p) in raw.pages.iter().enumerate() {
        if p.number as usize != i + 1 {
            return Err(Error::parse(format!("pages[{i}]"), "pages must be numbered consecutively from 1"));
        }
    }
    for (i, l) in raw.lines.iter().enumerate() {
        if l.page == 0 || l.page as usize > raw.pages.len() {
            return Err(Error::parse(format!("lines[{i}]"), format!("page {} out of range", l.page)));
        }
        if !(l.font_size > 0.0) {
            return Err(Error::parse(format!("lines[{i}]"), "font_size must be positive"));
        }
    }
    let lines = raw
        .lines
        .into_iter()
        .filter(|l| !l.text.trim().is_empty())
        .collect();
    Ok(Document::new(
        raw.doc_id.unwrap_or_else(|| fallback_id.to_string()),
        raw.pages,
        lines,
    ))
}

fn escape(s: &str) -> String {
    quick_xml::escape::escape(s).into_owned()
}

/// Writes a document's lines in the XML layout format.
pub fn write_layout_xml(doc: &Document) -> String {
    let mut fonts: Vec<(String, String, Rgb)> = Vec::new();
    let mut font_ids = Vec::with_capacity(doc.lines.len());
    for l in &doc.lines {
        let key = (format!("{}", l.font_size), l.font_family.clone(), l.color);
        let id = match fonts.iter().position(|f| *f == key) {
            Some(i) => i,
            None => {
                fonts.push(key);
                fonts.len() - 1
            }
        };
        font_ids.push(id);
    }

    let mut out = String::new();
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    let _ = writeln!(out, "<pdf2xml doc-id=\"{}\">", escape(&doc.doc_id));
    for (id, (size, family, color)) in fonts.iter().enumerate() {
        let _ = writeln!(
            out,
            "<fontspec id=\"{id}\" size=\"{size}\" family=\"{}\" color=\"{}\"/>",
            escape(family),
            color.to_hex()
        );
    }
    let mut idx = 0;
    for page in &doc.pages {
        let _ = writeln!(
            out,
            "<page number=\"{}\" width=\"{}\" height=\"{}\">",
            page.number, page.width, page.height
        );
        while idx < doc.lines.len() && doc.lines[idx].page == page.number {
            let l = &doc.lines[idx];
            let mut body = escape(&l.text);
            if l.italic {
                body = format!("<i>{body}</i>");
            }
            if l.bold {
                body = format!("<b>{body}</b>");
            }
            let _ = writeln!(
                out,
                "<text top=\"{}\" left=\"{}\" width=\"{}\" height=\"{}\" font=\"{}\">{body}</text>",
                l.top, l.left, l.width, l.height, font_ids[idx]
            );
            idx += 1;
        }
        out.push_str("</page>\n");
    }
    out.push_str("</pdf2xml>\n");
    out
}
