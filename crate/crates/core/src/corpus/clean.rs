use std::collections::BTreeSet;
use std::fmt;
use std::sync::OnceLock;

use unicode_normalization::char::is_combining_mark;
use unicode_normalization::UnicodeNormalization;

use super::CorpusError;

/// Titles rejected by the default cleaner.
pub const DEFAULT_TITLES: &[&str] = &["mr", "mrs", "ms", "dr", "prof", "rev", "hon", "sr", "jr"];

const VOWELS: &[char] = &['a', 'e', 'i', 'o', 'u'];

/// Punctuation allowed inside a name besides letters.
const NAME_PUNCTUATION: &[char] = &['-', '\'', '.', ' '];

/// Which cleaning rule rejected a raw name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RejectReason {
    TooShort,
    NoVowel,
    IsTitle,
    InvalidCharacters,
}

impl RejectReason {
    pub const ALL: [RejectReason; 4] = [
        RejectReason::TooShort,
        RejectReason::NoVowel,
        RejectReason::IsTitle,
        RejectReason::InvalidCharacters,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            RejectReason::TooShort => "too_short",
            RejectReason::NoVowel => "no_vowel",
            RejectReason::IsTitle => "is_title",
            RejectReason::InvalidCharacters => "invalid_characters",
        }
    }
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Applies the cleaning rules with a configurable title list.
#[derive(Debug, Clone)]
pub struct NameCleaner {
    titles: BTreeSet<String>,
}

impl Default for NameCleaner {
    fn default() -> Self {
        Self::with_titles(DEFAULT_TITLES.iter().copied())
    }
}

impl NameCleaner {
    pub fn with_titles<I, S>(titles: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Self {
            titles: titles
                .into_iter()
                .map(|t| t.as_ref().trim().trim_end_matches('.').to_lowercase())
                .filter(|t| !t.is_empty())
                .collect(),
        }
    }

    pub fn titles(&self) -> impl Iterator<Item = &str> {
        self.titles.iter().map(String::as_str)
    }

    /// Trims, collapses inner whitespace and lower-cases `raw`, then checks,
    /// in order: allowed characters, at least two letters, no title token,
    /// at least one vowel after diacritic folding.
    ///
    /// Non-ASCII letters are kept in the output; only the vowel check sees
    /// the folded form.
    pub fn normalize(&self, raw: &str) -> Result<String, RejectReason> {
        let composed: String = raw.nfc().collect();
        let collapsed = composed.split_whitespace().collect::<Vec<_>>().join(" ");
        let name = collapsed.to_lowercase();

        if !name
            .chars()
            .all(|c| c.is_alphabetic() || is_combining_mark(c) || NAME_PUNCTUATION.contains(&c))
        {
            return Err(RejectReason::InvalidCharacters);
        }
        if name.chars().filter(|c| c.is_alphabetic()).count() < 2 {
            return Err(RejectReason::TooShort);
        }
        if name
            .split(' ')
            .map(|tok| tok.trim_matches('.'))
            .any(|tok| self.titles.contains(tok))
        {
            return Err(RejectReason::IsTitle);
        }
        if !fold_diacritics(&name).chars().any(|c| VOWELS.contains(&c)) {
            return Err(RejectReason::NoVowel);
        }
        Ok(name)
    }
}

fn default_cleaner() -> &'static NameCleaner {
    static CLEANER: OnceLock<NameCleaner> = OnceLock::new();
    CLEANER.get_or_init(NameCleaner::default)
}

/// Cleans a single name with the default title list.
pub fn normalize_name(raw: &str) -> Result<String, RejectReason> {
    default_cleaner().normalize(raw)
}

/// Strips combining marks after canonical decomposition and maps the few
/// Latin letters that have no decomposition onto their base letters.
pub fn fold_diacritics(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.nfd().filter(|c| !is_combining_mark(*c)) {
        match c {
            'ø' | 'Ø' => out.push('o'),
            'æ' | 'Æ' => out.push_str("ae"),
            'œ' | 'Œ' => out.push_str("oe"),
            'ß' => out.push_str("ss"),
            'ı' => out.push('i'),
            'đ' | 'Đ' => out.push('d'),
            'ł' | 'Ł' => out.push('l'),
            other => out.push(other),
        }
    }
    out
}

/// Splits a full name into its first and last whitespace-separated tokens.
/// Middle tokens are dropped; a single token yields an empty last name.
pub fn split_full_name(full: &str) -> Result<(String, String), CorpusError> {
    let tokens: Vec<&str> = full.split_whitespace().collect();
    match tokens.as_slice() {
        [] => Err(CorpusError::InvalidInput("empty full name".into())),
        [only] => Ok(((*only).to_string(), String::new())),
        [first, .., last] => Ok(((*first).to_string(), (*last).to_string())),
    }
}
