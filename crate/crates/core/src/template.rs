//! Matching detected titles against a reference TOC template by edit distance.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::doc::{parse_toc, TocTree};
use crate::error::{Error, Result};
use crate::features::strip_numbering;
use crate::text::{canonical_title, normalize_text};

pub const DEFAULT_THRESHOLD_RATIO: f64 = 0.3;
/// One-hot width: levels 1 to 5, no match, template disabled.
pub const TEMPLATE_SLOTS: usize = 7;
pub const NO_MATCH_SLOT: usize = 5;
pub const DISABLED_SLOT: usize = 6;

/// Unit-cost edit distance over Unicode scalar values.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.is_empty() {
        return b.len();
    }
    let mut row: Vec<usize> = (0..=b.len()).collect();
    for (i, ca) in a.iter().enumerate() {
        let mut diag = row[0];
        row[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let next = (diag + usize::from(ca != cb)).min(row[j] + 1).min(row[j + 1] + 1);
            diag = row[j + 1];
            row[j + 1] = next;
        }
    }
    row[b.len()]
}

/// Matching key: leading numbering removed, lowercased, punctuation dropped.
pub fn match_key(title: &str) -> String {
    canonical_title(strip_numbering(&normalize_text(title)))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemplateEntry {
    pub title: String,
    pub key: String,
    pub level: u8,
}

/// Flattened template tree, in pre-order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemplateToc {
    pub entries: Vec<TemplateEntry>,
}

impl TemplateToc {
    pub fn from_tree(tree: &TocTree) -> Result<Self> {
        let entries: Vec<TemplateEntry> = tree
            .preorder()
            .into_iter()
            .map(|(e, _)| TemplateEntry {
                title: e.title.clone(),
                key: match_key(&e.title),
                level: e.level,
            })
            .collect();
        if entries.is_empty() {
            return Err(Error::InvalidInput("template has no entries".into()));
        }
        if let Some(e) = entries.iter().find(|e| e.key.is_empty()) {
            return Err(Error::InvalidInput(format!("template title {:?} is empty after normalization", e.title)));
        }
        Ok(TemplateToc { entries })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_tree(&parse_toc(&bytes)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchResult {
    /// `None` is the no-match outcome.
    pub level: Option<u8>,
    pub distance: usize,
    pub entry: Option<usize>,
}

/// Nearest template entry; a match needs `distance <= ratio * max(len)`.
/// Ties go to the lowest level, then to template order.
pub fn match_title(title: &str, template: &TemplateToc, threshold_ratio: f64) -> MatchResult {
    let key = match_key(title);
    let key_len = key.chars().count();
    let mut best: Option<(usize, u8, usize)> = None;
    for (i, e) in template.entries.iter().enumerate() {
        let d = levenshtein(&key, &e.key);
        let better = match best {
            None => true,
            Some((bd, bl, _)) => (d, e.level) < (bd, bl),
        };
        if better {
            best = Some((d, e.level, i));
        }
    }
    let (distance, level, i) = best.expect("template is never empty");
    let len = key_len.max(template.entries[i].key.chars().count());
    if len > 0 && distance as f64 <= threshold_ratio * len as f64 {
        MatchResult {
            level: Some(level),
            distance,
            entry: Some(i),
        }
    } else {
        MatchResult {
            level: None,
            distance,
            entry: None,
        }
    }
}

/// One-hot over levels 1 to 5, no match and disabled; `None` means disabled.
pub fn template_feature(result: Option<&MatchResult>) -> [f64; TEMPLATE_SLOTS] {
    let mut v = [0.0; TEMPLATE_SLOTS];
    let slot = match result {
        None => DISABLED_SLOT,
        Some(MatchResult { level: Some(l), .. }) if (1..=5).contains(l) => *l as usize - 1,
        Some(_) => NO_MATCH_SLOT,
    };
    v[slot] = 1.0;
    v
}

/// Rule-based hierarchization: each title's matched level, `None` when unmatched.
pub fn template_only_hierarchize<S: AsRef<str>>(titles: &[S], template: &TemplateToc, threshold_ratio: f64) -> Vec<Option<u8>> {
    titles
        .iter()
        .map(|t| match_title(t.as_ref(), template, threshold_ratio).level)
        .collect()
}
