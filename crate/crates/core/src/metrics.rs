//! Scores for the two classifiers and for whole TOC trees.
//!
//! The Xerox (hyperlink) and Inex08 measures follow these definitions:
//!
//! * Titles are compared after [`canonical_title`].
//! * Xerox: a predicted entry is link-correct when an unused gold entry has the
//!   same title and its parent has the same title as the predicted parent
//!   (two top-level entries share the virtual root). Entries are matched greedily
//!   in pre-order. Title accuracy repeats the matching without the parent
//!   condition and divides by the gold size.
//! * Inex08: an entry matches when the titles are within `fuzzy_ratio` of the
//!   longer title in edit distance, the start pages agree and the depths agree.
//!   Each component can be switched off.
//!
//! When both sides are empty every score is 1.

use std::collections::BTreeSet;
use std::fmt::Debug;

use serde::{Deserialize, Serialize};

use crate::doc::{TocEntry, TocTree};
use crate::error::{Error, Result};
use crate::template::levenshtein;
use crate::text::canonical_title;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassStats {
    pub label: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub classes: Vec<ClassStats>,
    pub weighted_f1: f64,
}

fn harmonic(p: f64, r: f64) -> f64 {
    if p + r > 0.0 {
        2.0 * p * r / (p + r)
    } else {
        0.0
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Per-class scores and their support-weighted mean F1.
pub fn weighted_f1<L: Ord + Clone + Debug>(gold: &[L], pred: &[L]) -> Result<ClassificationReport> {
    if gold.len() != pred.len() {
        return Err(Error::InvalidInput(format!(
            "{} gold labels but {} predictions",
            gold.len(),
            pred.len()
        )));
    }
    if gold.is_empty() {
        return Ok(ClassificationReport {
            classes: Vec::new(),
            weighted_f1: 1.0,
        });
    }
    let labels: BTreeSet<&L> = gold.iter().chain(pred).collect();
    let mut classes = Vec::with_capacity(labels.len());
    let mut weighted = 0.0;
    for label in labels {
        let tp = gold.iter().zip(pred).filter(|(g, p)| *g == label && *p == label).count();
        let support = gold.iter().filter(|g| *g == label).count();
        let predicted = pred.iter().filter(|p| *p == label).count();
        let (precision, recall) = (ratio(tp, predicted), ratio(tp, support));
        let f1 = harmonic(precision, recall);
        weighted += support as f64 * f1;
        classes.push(ClassStats {
            label: format!("{label:?}"),
            precision,
            recall,
            f1,
            support,
        });
    }
    Ok(ClassificationReport {
        classes,
        weighted_f1: weighted / gold.len() as f64,
    })
}

struct Flat {
    key: String,
    parent_key: Option<String>,
    start_page: u32,
    depth: u8,
}

fn flatten(toc: &TocTree) -> Vec<Flat> {
    toc.preorder()
        .into_iter()
        .map(|(e, p): (&TocEntry, Option<&TocEntry>)| Flat {
            key: canonical_title(&e.title),
            parent_key: p.map(|p| canonical_title(&p.title)),
            start_page: e.start_page,
            depth: e.level,
        })
        .collect()
}

fn greedy(gold: &[Flat], pred: &[Flat], same: impl Fn(&Flat, &Flat) -> bool) -> usize {
    let mut used = vec![false; gold.len()];
    let mut matched = 0;
    for p in pred {
        if let Some(i) = (0..gold.len()).find(|&i| !used[i] && same(&gold[i], p)) {
            used[i] = true;
            matched += 1;
        }
    }
    matched
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct XeroxScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub title_accuracy: f64,
    /// F1 of the title-only matching.
    pub title_f1: f64,
    pub link_matches: usize,
    pub title_matches: usize,
    pub gold: usize,
    pub predicted: usize,
}

pub fn xerox_scores(gold: &TocTree, pred: &TocTree) -> XeroxScore {
    let (g, p) = (flatten(gold), flatten(pred));
    let links = greedy(&g, &p, |a, b| a.key == b.key && a.parent_key == b.parent_key);
    let titles = greedy(&g, &p, |a, b| a.key == b.key);
    if g.is_empty() && p.is_empty() {
        return XeroxScore {
            precision: 1.0,
            recall: 1.0,
            f1: 1.0,
            title_accuracy: 1.0,
            title_f1: 1.0,
            link_matches: 0,
            title_matches: 0,
            gold: 0,
            predicted: 0,
        };
    }
    let (precision, recall) = (ratio(links, p.len()), ratio(links, g.len()));
    XeroxScore {
        precision,
        recall,
        f1: harmonic(precision, recall),
        title_accuracy: ratio(titles, g.len()),
        title_f1: harmonic(ratio(titles, p.len()), ratio(titles, g.len())),
        link_matches: links,
        title_matches: titles,
        gold: g.len(),
        predicted: p.len(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InexOptions {
    pub fuzzy_ratio: f64,
    pub check_title: bool,
    pub check_page: bool,
    pub check_depth: bool,
}

impl Default for InexOptions {
    fn default() -> Self {
        InexOptions {
            fuzzy_ratio: 0.2,
            check_title: true,
            check_page: true,
            check_depth: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InexScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub matched: usize,
}

pub fn fuzzy_equal(a: &str, b: &str, fuzzy_ratio: f64) -> bool {
    let len = a.chars().count().max(b.chars().count());
    levenshtein(a, b) as f64 <= fuzzy_ratio * len as f64
}

pub fn inex08(gold: &TocTree, pred: &TocTree, opts: &InexOptions) -> InexScore {
    let (g, p) = (flatten(gold), flatten(pred));
    if g.is_empty() && p.is_empty() {
        return InexScore {
            precision: 1.0,
            recall: 1.0,
            f1: 1.0,
            matched: 0,
        };
    }
    let matched = greedy(&g, &p, |a, b| {
        (!opts.check_title || fuzzy_equal(&a.key, &b.key, opts.fuzzy_ratio))
            && (!opts.check_page || a.start_page == b.start_page)
            && (!opts.check_depth || a.depth == b.depth)
    });
    let (precision, recall) = (ratio(matched, p.len()), ratio(matched, g.len()));
    InexScore {
        precision,
        recall,
        f1: harmonic(precision, recall),
        matched,
    }
}

pub fn inex08_f1(gold: &TocTree, pred: &TocTree, fuzzy_ratio: f64) -> f64 {
    inex08(
        gold,
        pred,
        &InexOptions {
            fuzzy_ratio,
            ..InexOptions::default()
        },
    )
    .f1
}

/// Both TOC measures for one (gold, predicted) pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TocScore {
    pub xerox: XeroxScore,
    pub inex08: InexScore,
}

impl TocScore {
    pub fn xerox_f1(&self) -> f64 {
        self.xerox.f1
    }

    pub fn xerox_title_accuracy(&self) -> f64 {
        self.xerox.title_accuracy
    }

    pub fn inex08_f1(&self) -> f64 {
        self.inex08.f1
    }
}

pub fn score_toc(gold: &TocTree, pred: &TocTree, opts: &InexOptions) -> TocScore {
    TocScore {
        xerox: xerox_scores(gold, pred),
        inex08: inex08(gold, pred, opts),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanScores {
    pub xerox_f1: f64,
    pub xerox_title_accuracy: f64,
    pub inex08_f1: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Agreement {
    pub a_vs_b: TocScore,
    pub b_vs_a: TocScore,
    pub mean: MeanScores,
}

/// Scores each tree against the other and averages the two directions.
pub fn agreement(a: &TocTree, b: &TocTree, opts: &InexOptions) -> Agreement {
    let ab = score_toc(a, b, opts);
    let ba = score_toc(b, a, opts);
    Agreement {
        a_vs_b: ab,
        b_vs_a: ba,
        mean: MeanScores {
            xerox_f1: (ab.xerox.f1 + ba.xerox.f1) / 2.0,
            xerox_title_accuracy: (ab.xerox.title_accuracy + ba.xerox.title_accuracy) / 2.0,
            inex08_f1: (ab.inex08.f1 + ba.inex08.f1) / 2.0,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn leaf(title: &str, page: u32) -> TocEntry {
        TocEntry {
            title: title.into(),
            start_page: page,
            end_page: page,
            level: 1,
            children: vec![],
        }
    }

    #[test]
    fn weighted_f1_hand_example() {
        let gold = ["T", "T", "N", "N"];
        let pred = ["T", "N", "N", "N"];
        let r = weighted_f1(&gold, &pred).unwrap();
        assert!((r.weighted_f1 - (2.0 * (2.0 / 3.0) + 2.0 * 0.8) / 4.0).abs() < 1e-12);
        assert!(weighted_f1(&gold, &pred[..3]).is_err());
        assert_eq!(weighted_f1(&[1, 0], &[0, 1]).unwrap().weighted_f1, 0.0);
    }

    #[test]
    fn xerox_hand_example() {
        let gold = TocTree {
            roots: vec![leaf("A", 1), leaf("B", 1), leaf("C", 1), leaf("D", 1)],
        };
        let pred = TocTree {
            roots: vec![leaf("A", 1), leaf("B", 1), leaf("X", 1)],
        };
        let s = xerox_scores(&gold, &pred);
        assert!((s.f1 - 4.0 / 7.0).abs() < 1e-12);
        let empty = xerox_scores(&gold, &TocTree::default());
        assert_eq!((empty.f1, empty.title_accuracy), (0.0, 0.0));
    }

    #[test]
    fn inex_depth_and_typo() {
        let gold = TocTree {
            roots: vec![leaf("Introduction", 2)],
        };
        let typo = TocTree {
            roots: vec![leaf("Intrduction", 2)],
        };
        assert_eq!(inex08_f1(&gold, &typo, 0.2), 1.0);
        let moved = TocTree {
            roots: vec![leaf("Introduction", 3)],
        };
        assert_eq!(inex08_f1(&gold, &moved, 0.2), 0.0);
    }
}
