//! Rebuilds a valid TOC tree from a sequence of predicted title levels.

use crate::doc::{TocEntry, TocTree, MAX_TOC_DEPTH};
use crate::error::{Error, Result};

/// Parent links and depths over titles in sequence order. Depth 1 hangs
/// from the virtual root.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Forest {
    pub parents: Vec<Option<usize>>,
    pub depths: Vec<u8>,
}

impl Forest {
    pub fn len(&self) -> usize {
        self.depths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.depths.is_empty()
    }
}

/// Each title's parent is the closest previous title with a strictly lower
/// predicted level, the first title counting as level 1. Titles without such
/// a predecessor become top-level. A node that would sit deeper than the
/// maximum depth is attached to its grandparent instead.
pub fn reorganize(levels: &[u8]) -> Forest {
    let mut parents = Vec::with_capacity(levels.len());
    let mut depths = Vec::with_capacity(levels.len());
    // Open path from the root: (index, effective level, depth).
    let mut path: Vec<(usize, u8, u8)> = Vec::new();
    for (i, &predicted) in levels.iter().enumerate() {
        let level = if i == 0 { 1 } else { predicted };
        while path.last().is_some_and(|&(_, l, _)| l >= level) {
            path.pop();
        }
        if path.last().is_some_and(|&(_, _, d)| d >= MAX_TOC_DEPTH) {
            path.pop();
        }
        let (parent, depth) = match path.last() {
            Some(&(j, _, d)) => (Some(j), d + 1),
            None => (None, 1),
        };
        parents.push(parent);
        depths.push(depth);
        path.push((i, level, depth));
    }
    Forest { parents, depths }
}

/// Turns a forest over titles into a TOC tree. A section starts on its
/// title's page and ends on the page where the next entry of the same or a
/// shallower depth starts (inclusive), or on the last page.
pub fn assign_pages<S: AsRef<str>>(titles: &[S], pages: &[u32], forest: &Forest, page_count: u32) -> Result<TocTree> {
    let n = forest.len();
    if titles.len() != n || pages.len() != n {
        return Err(Error::InvalidInput(format!(
            "{} titles and {} pages for a forest of {n}",
            titles.len(),
            pages.len()
        )));
    }
    // Reading order keeps pages non-decreasing; the running max only guards
    // against callers that do not.
    let mut starts = Vec::with_capacity(n);
    let mut high = 1;
    for &p in pages {
        high = high.max(p.max(1));
        starts.push(high);
    }
    let last = page_count.max(high);
    let mut ends = vec![last; n];
    // Pending entries awaiting a same-or-shallower successor, deepest on top.
    let mut open: Vec<usize> = Vec::new();
    for i in 0..n {
        while let Some(&j) = open.last() {
            if forest.depths[j] >= forest.depths[i] {
                ends[j] = starts[i];
                open.pop();
            } else {
                break;
            }
        }
        open.push(i);
    }

    let mut roots: Vec<TocEntry> = Vec::new();
    // Stack of (depth, entry) on the path being built.
    let mut stack: Vec<TocEntry> = Vec::new();
    for i in 0..n {
        let depth = forest.depths[i] as usize;
        while stack.len() >= depth {
            let done = stack.pop().expect("non-empty");
            attach(&mut stack, &mut roots, done);
        }
        stack.push(TocEntry {
            title: titles[i].as_ref().to_string(),
            start_page: starts[i],
            end_page: ends[i],
            level: depth as u8,
            children: Vec::new(),
        });
    }
    while let Some(done) = stack.pop() {
        attach(&mut stack, &mut roots, done);
    }
    let tree = TocTree { roots };
    tree.validate()?;
    Ok(tree)
}

fn attach(stack: &mut [TocEntry], roots: &mut Vec<TocEntry>, entry: TocEntry) {
    match stack.last_mut() {
        Some(parent) => parent.children.push(entry),
        None => roots.push(entry),
    }
}

/// `reorganize` followed by `assign_pages`.
pub fn build_toc<S: AsRef<str>>(titles: &[S], pages: &[u32], levels: &[u8], page_count: u32) -> Result<TocTree> {
    assign_pages(titles, pages, &reorganize(levels), page_count)
}
