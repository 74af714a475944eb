use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::word_tokens;

pub const TITLE_VOCAB_SIZE: usize = 100;

/// The most frequent tokens of training-set titles.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TitleVocab {
    tokens: Vec<String>,
}

impl TitleVocab {
    /// Top-100 tokens by frequency, ties broken lexicographically, padded with
    /// `<pad-k>` sentinels when fewer distinct tokens exist.
    pub fn build<S: AsRef<str>>(titles: &[S]) -> Result<Self> {
        if titles.is_empty() {
            return Err(Error::InvalidInput("cannot build a title vocabulary from zero titles".into()));
        }
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        for t in titles {
            for tok in word_tokens(t.as_ref()) {
                *counts.entry(tok).or_default() += 1;
            }
        }
        let mut ranked: Vec<(String, usize)> = counts.into_iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let mut tokens: Vec<String> = ranked
            .into_iter()
            .take(TITLE_VOCAB_SIZE)
            .map(|(t, _)| t)
            .collect();
        let mut k = 0;
        while tokens.len() < TITLE_VOCAB_SIZE {
            tokens.push(format!("<pad-{k}>"));
            k += 1;
        }
        Ok(TitleVocab { tokens })
    }

    pub fn from_tokens(tokens: Vec<String>) -> Result<Self> {
        if tokens.len() != TITLE_VOCAB_SIZE {
            return Err(Error::InvalidInput(format!(
                "title vocabulary must hold {TITLE_VOCAB_SIZE} tokens, got {}",
                tokens.len()
            )));
        }
        let mut seen = std::collections::BTreeSet::new();
        if let Some(dup) = tokens.iter().find(|t| !seen.insert(t.as_str())) {
            return Err(Error::InvalidInput(format!("duplicate vocabulary token {dup:?}")));
        }
        Ok(TitleVocab { tokens })
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Presence vector over the vocabulary.
    pub fn one_hot(&self, text: &str) -> Vec<u8> {
        let present: std::collections::BTreeSet<String> = word_tokens(text).into_iter().collect();
        self.tokens
            .iter()
            .map(|t| u8::from(present.contains(t)))
            .collect()
    }
}
