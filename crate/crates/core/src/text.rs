//! String normalization shared by the detector, the template matcher and the metrics.

/// Maps typographic punctuation to ASCII, collapses whitespace runs and trims.
pub fn normalize_text(s: &str) -> String {
    let mut mapped = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '\u{2018}' | '\u{2019}' | '\u{201A}' | '\u{201B}' | '\u{2032}' | '`' | '\u{00B4}' => {
                mapped.push('\'')
            }
            '\u{201C}' | '\u{201D}' | '\u{201E}' | '\u{201F}' | '\u{2033}' | '\u{00AB}'
            | '\u{00BB}' => mapped.push('"'),
            '\u{2010}' | '\u{2011}' | '\u{2012}' | '\u{2013}' | '\u{2014}' | '\u{2015}'
            | '\u{2212}' => mapped.push('-'),
            '\u{2026}' => mapped.push_str("..."),
            '\u{2022}' | '\u{00B7}' | '\u{2023}' | '\u{25CF}' => mapped.push('*'),
            '\u{00A0}' | '\u{2007}' | '\u{202F}' | '\u{2009}' | '\u{200A}' => mapped.push(' '),
            _ => mapped.push(c),
        }
    }
    collapse_whitespace(&mapped)
}

pub(crate) fn collapse_whitespace(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Lowercases, turns punctuation into separators and collapses whitespace.
///
/// Used to compare titles across trees (metrics) and as the first stage of
/// template matching.
pub fn canonical_title(s: &str) -> String {
    let lowered: String = normalize_text(s)
        .chars()
        .flat_map(char::to_lowercase)
        .map(|c| if c.is_alphanumeric() { c } else { ' ' })
        .collect();
    collapse_whitespace(&lowered)
}

/// Lowercase alphanumeric tokens, punctuation acting as a separator.
pub fn word_tokens(s: &str) -> Vec<String> {
    canonical_title(s)
        .split(' ')
        .filter(|t| !t.is_empty())
        .map(str::to_owned)
        .collect()
}
