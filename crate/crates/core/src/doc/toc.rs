use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Deepest level a TOC entry may sit at.
pub const MAX_TOC_DEPTH: u8 = 5;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TocEntry {
    pub title: String,
    pub start_page: u32,
    pub end_page: u32,
    /// Depth in the tree, 1 for top-level entries.
    pub level: u8,
    pub children: Vec<TocEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TocTree {
    pub roots: Vec<TocEntry>,
}

/// Wire form: levels are implied by nesting.
#[derive(Serialize, Deserialize)]
struct EntryJson {
    title: String,
    start_page: u32,
    end_page: u32,
    #[serde(default)]
    children: Vec<EntryJson>,
}

impl TocEntry {
    /// Pre-order visit with the parent of each entry.
    fn walk<'a>(&'a self, parent: Option<&'a TocEntry>, f: &mut impl FnMut(&'a TocEntry, Option<&'a TocEntry>)) {
        f(self, parent);
        for c in &self.children {
            c.walk(Some(self), f);
        }
    }

    fn to_json(&self) -> EntryJson {
        EntryJson {
            title: self.title.clone(),
            start_page: self.start_page,
            end_page: self.end_page,
            children: self.children.iter().map(TocEntry::to_json).collect(),
        }
    }

    fn from_json(raw: EntryJson, level: u8) -> TocEntry {
        TocEntry {
            title: raw.title,
            start_page: raw.start_page,
            end_page: raw.end_page,
            level,
            children: raw
                .children
                .into_iter()
                .map(|c| TocEntry::from_json(c, level.saturating_add(1)))
                .collect(),
        }
    }
}

impl TocTree {
    pub fn new(roots: Vec<TocEntry>) -> Self {
        TocTree { roots }
    }

    pub fn is_empty(&self) -> bool {
        self.roots.is_empty()
    }

    /// Pre-order traversal yielding `(entry, parent)`.
    pub fn preorder(&self) -> Vec<(&TocEntry, Option<&TocEntry>)> {
        let mut out = Vec::new();
        for r in &self.roots {
            r.walk(None, &mut |e, p| out.push((e, p)));
        }
        out
    }

    pub fn len(&self) -> usize {
        self.preorder().len()
    }

    pub fn depth(&self) -> u8 {
        self.preorder().iter().map(|(e, _)| e.level).max().unwrap_or(0)
    }

    /// Checks every structural invariant: levels follow nesting, pages are
    /// positive and ordered, child ranges nest inside their parent's, and
    /// depth stays within [`MAX_TOC_DEPTH`].
    pub fn validate(&self) -> Result<()> {
        for (e, parent) in self.preorder() {
            let expected = parent.map_or(1, |p| p.level + 1);
            if e.level != expected {
                return Err(Error::InvalidToc(format!(
                    "entry {:?} has level {} but sits at depth {expected}",
                    e.title, e.level
                )));
            }
            if e.level > MAX_TOC_DEPTH {
                return Err(Error::InvalidToc(format!(
                    "entry {:?} exceeds the maximum depth {MAX_TOC_DEPTH}",
                    e.title
                )));
            }
            if e.start_page == 0 || e.start_page > e.end_page {
                return Err(Error::InvalidToc(format!(
                    "entry {:?} has invalid page range {}..{}",
                    e.title, e.start_page, e.end_page
                )));
            }
            if let Some(p) = parent {
                if e.start_page < p.start_page || e.end_page > p.end_page {
                    return Err(Error::InvalidToc(format!(
                        "entry {:?} ({}..{}) escapes its parent {:?} ({}..{})",
                        e.title, e.start_page, e.end_page, p.title, p.start_page, p.end_page
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Serializes a TOC as a pretty-printed JSON array of
/// `{title, start_page, end_page, children}` objects.
pub fn serialize_toc(toc: &TocTree) -> Result<Vec<u8>> {
    toc.validate()?;
    let raw: Vec<EntryJson> = toc.roots.iter().map(TocEntry::to_json).collect();
    let mut out = serde_json::to_vec_pretty(&raw)?;
    out.push(b'\n');
    Ok(out)
}

/// Parses TOC JSON, deriving levels from nesting and rejecting invalid trees.
pub fn parse_toc(bytes: &[u8]) -> Result<TocTree> {
    let raw: Vec<EntryJson> = serde_json::from_slice(bytes)?;
    let toc = TocTree::new(raw.into_iter().map(|e| TocEntry::from_json(e, 1)).collect());
    toc.validate()?;
    Ok(toc)
}
