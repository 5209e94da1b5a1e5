//! Tokenization, vocabulary construction, and stopword handling.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::Path;

use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};

/// Bundled English stopword list, used when no stopword file is configured.
const DEFAULT_STOPWORDS: &str = include_str!("../data/stopwords_en.txt");

/// Tokenize lyrics text.
///
/// Pipeline: NFKC normalization, bracketed annotation spans (`[Chorus]`)
/// removed, lowercasing, punctuation mapped to whitespace. Apostrophes
/// (`'` and `’`) survive only between two alphanumerics, so contractions
/// stay single tokens. The function is idempotent over re-joined output:
/// `tokenize(tokens.join(" ")) == tokens`.
pub fn tokenize(text: &str) -> Vec<String> {
    let normalized: String = text.nfkc().collect();
    let stripped = strip_bracketed(&normalized);
    let lowered = stripped.to_lowercase();
    let chars: Vec<char> = lowered.chars().collect();
    let mut cleaned = String::with_capacity(lowered.len());
    for (i, &c) in chars.iter().enumerate() {
        if c.is_alphanumeric() {
            cleaned.push(c);
        } else if (c == '\'' || c == '\u{2019}')
            && i > 0
            && chars[i - 1].is_alphanumeric()
            && chars.get(i + 1).is_some_and(|n| n.is_alphanumeric())
        {
            cleaned.push('\'');
        } else {
            cleaned.push(' ');
        }
    }
    cleaned.split_whitespace().map(str::to_string).collect()
}

/// Remove `[...]` spans. An unclosed bracket drops the rest of the text.
fn strip_bracketed(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut depth = 0usize;
    for c in text.chars() {
        match c {
            '[' => depth += 1,
            ']' if depth > 0 => depth -= 1,
            _ if depth == 0 => out.push(c),
            _ => {}
        }
    }
    out
}

/// Token table with dense ids ordered by frequency.
///
/// Ids are assigned by descending corpus count, ties broken by ascending
/// token order, so the mapping is reproducible across runs.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    counts: Vec<u64>,
    index: HashMap<String, u32>,
    total_count: u64,
}

impl Vocabulary {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn get(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: u32) -> &str {
        &self.tokens[id as usize]
    }

    pub fn count(&self, id: u32) -> u64 {
        self.counts[id as usize]
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// Sum of retained token counts; the denominator for subsampling
    /// frequencies.
    pub fn total_count(&self) -> u64 {
        self.total_count
    }

    /// Map a token stream to ids, silently dropping out-of-vocabulary tokens.
    pub fn encode(&self, tokens: &[String]) -> Vec<u32> {
        tokens.iter().filter_map(|t| self.get(t)).collect()
    }
}

/// Count tokens across `docs` and keep those occurring at least `min_count`
/// times. Errors if nothing survives the threshold.
pub fn build_vocab(docs: &[Vec<String>], min_count: u32) -> Result<Vocabulary> {
    let mut counts: HashMap<&str, u64> = HashMap::new();
    for doc in docs {
        for token in doc {
            *counts.entry(token.as_str()).or_default() += 1;
        }
    }
    let mut entries: Vec<(&str, u64)> = counts
        .into_iter()
        .filter(|&(_, n)| n >= u64::from(min_count))
        .collect();
    if entries.is_empty() {
        return Err(Error::EmptyVocabulary(min_count));
    }
    entries.sort_unstable_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let mut vocab = Vocabulary {
        tokens: Vec::with_capacity(entries.len()),
        counts: Vec::with_capacity(entries.len()),
        index: HashMap::with_capacity(entries.len()),
        total_count: 0,
    };
    for (id, (token, n)) in entries.into_iter().enumerate() {
        vocab.tokens.push(token.to_string());
        vocab.counts.push(n);
        vocab.index.insert(token.to_string(), id as u32);
        vocab.total_count += n;
    }
    Ok(vocab)
}

/// Parse a stopword list: one token per line, `#` comments and blank lines
/// ignored. Entries are themselves tokenized so the set matches tokenizer
/// output.
fn parse_stopwords(text: &str) -> HashSet<String> {
    let mut set = HashSet::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        set.extend(tokenize(line));
    }
    set
}

pub fn default_stopwords() -> HashSet<String> {
    parse_stopwords(DEFAULT_STOPWORDS)
}

pub fn load_stopwords(path: &Path) -> Result<HashSet<String>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(parse_stopwords(&text))
}
