//! Single Category Word Embedding Association Test.
//!
//! For a target word w and attribute sets A (male) and B (female):
//!
//! `s(w, A, B) = mean_{a in A} cos(w, a) - mean_{b in B} cos(w, b)`
//!
//! `SCWEAT(X, A, B) = sum_{x in X} s(x, A, B)` and the effect size `d` is
//! the mean of the per-word associations divided by their population
//! standard deviation. Positive scores mean male bias, negative female.
//! All statistics run over vocabulary-present words only; coverage is
//! reported alongside every result.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::embed::{cosine, EmbeddingMatrix};
use crate::error::{Error, Result};

/// Named list of lowercase words, duplicate-free.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WordSet {
    pub name: String,
    words: Vec<String>,
}

impl WordSet {
    pub fn new(name: &str, words: Vec<String>) -> Result<Self> {
        let invalid = |reason: String| Error::InvalidWordSet {
            name: name.to_string(),
            reason,
        };
        if words.is_empty() {
            return Err(invalid("empty word list".into()));
        }
        let mut seen = HashSet::new();
        for w in &words {
            if w.is_empty() || w.chars().any(|c| c.is_whitespace() || c.is_uppercase()) {
                return Err(invalid(format!("word {w:?} is not a lowercase token")));
            }
            if !seen.insert(w.as_str()) {
                return Err(invalid(format!("duplicate word {w:?}")));
            }
        }
        Ok(WordSet {
            name: name.to_string(),
            words,
        })
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

/// A = male, B = female; disjoint by construction.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AttributePair {
    pub male: WordSet,
    pub female: WordSet,
}

impl AttributePair {
    pub fn new(male: WordSet, female: WordSet) -> Result<Self> {
        let m: HashSet<&str> = male.words().iter().map(String::as_str).collect();
        if let Some(shared) = female.words().iter().find(|w| m.contains(w.as_str())) {
            return Err(Error::InvalidWordSet {
                name: female.name.clone(),
                reason: format!("word {shared:?} appears in both attribute sets"),
            });
        }
        Ok(AttributePair { male, female })
    }
}

/// Numeric outcome of one (target, stratum) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeatScores {
    pub sum_score: f64,
    pub effect_size: f64,
    pub p_value: Option<f64>,
}

/// One bias-table cell: coverage plus scores, or a failure reason.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeatResult {
    pub target_name: String,
    pub stratum_label: String,
    pub n_present: usize,
    pub missing: Vec<String>,
    pub scores: Option<WeatScores>,
    pub reason: Option<String>,
}

/// Split a word set by vocabulary membership, preserving order.
pub fn resolve_wordset(set: &WordSet, emb: &EmbeddingMatrix) -> (Vec<String>, Vec<String>) {
    let mut present = Vec::new();
    let mut missing = Vec::new();
    for w in set.words() {
        if emb.get(w).is_some() {
            present.push(w.clone());
        } else {
            missing.push(w.clone());
        }
    }
    (present, missing)
}

fn present_attrs<'a>(
    attrs: &'a AttributePair,
    emb: &EmbeddingMatrix,
) -> Result<(Vec<&'a str>, Vec<&'a str>)> {
    let keep = |set: &'a WordSet| -> Result<Vec<&'a str>> {
        let present: Vec<&str> = set
            .words()
            .iter()
            .map(String::as_str)
            .filter(|w| emb.get(w).is_some())
            .collect();
        if present.is_empty() {
            return Err(Error::EmptyAttributeSet(set.name.clone()));
        }
        Ok(present)
    };
    Ok((keep(&attrs.male)?, keep(&attrs.female)?))
}

fn mean_cosine(w: &[f64], words: &[&str], emb: &EmbeddingMatrix) -> Result<f64> {
    let mut sum = 0.0;
    for a in words {
        sum += cosine(w, emb.vector_of(a)?)?;
    }
    Ok(sum / words.len() as f64)
}

/// Association of one word with the attribute pair: mean cosine to the
/// male words minus mean cosine to the female words.
pub fn association(w: &str, attrs: &AttributePair, emb: &EmbeddingMatrix) -> Result<f64> {
    let v = emb.vector_of(w)?;
    let (male, female) = present_attrs(attrs, emb)?;
    Ok(mean_cosine(v, &male, emb)? - mean_cosine(v, &female, emb)?)
}

fn associations_raw(
    words: &[String],
    attrs: &AttributePair,
    emb: &EmbeddingMatrix,
) -> Result<(Vec<f64>, usize)> {
    let (male, female) = present_attrs(attrs, emb)?;
    let mut scores = Vec::new();
    let mut n_present = 0;
    for w in words {
        if let Some(id) = emb.get(w) {
            let v = emb.vector(id);
            scores.push(mean_cosine(v, &male, emb)? - mean_cosine(v, &female, emb)?);
            n_present += 1;
        }
    }
    Ok((scores, n_present))
}

/// Sum of associations over present target words.
pub fn scweat_sum(target: &WordSet, attrs: &AttributePair, emb: &EmbeddingMatrix) -> Result<f64> {
    let (scores, n) = associations_raw(target.words(), attrs, emb)?;
    if n == 0 {
        return Err(Error::TooFewTargetWords(0));
    }
    Ok(scores.iter().sum())
}

/// Effect size over a raw word list (no dedup), exposed so duplication
/// invariance is testable at the computation layer.
pub fn effect_size_raw(
    words: &[String],
    attrs: &AttributePair,
    emb: &EmbeddingMatrix,
) -> Result<f64> {
    let (scores, n) = associations_raw(words, attrs, emb)?;
    if n < 2 {
        return Err(Error::TooFewTargetWords(n));
    }
    let mean = scores.iter().sum::<f64>() / scores.len() as f64;
    let var = scores.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / scores.len() as f64;
    let std = var.sqrt();
    if std <= 1e-12 * (1.0 + mean.abs()) {
        return Err(Error::DegenerateVariance);
    }
    Ok(mean / std)
}

/// Effect size d: mean association over its population stddev;
/// positive = male bias.
pub fn effect_size(target: &WordSet, attrs: &AttributePair, emb: &EmbeddingMatrix) -> Result<f64> {
    effect_size_raw(target.words(), attrs, emb)
}

const EXHAUSTIVE_LIMIT: u64 = 20_000;

fn binomial_capped(n: usize, k: usize, cap: u64) -> u64 {
    // C(n, k), saturating just above cap to keep the switch cheap
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > cap as u128 {
            return cap + 1;
        }
    }
    acc as u64
}

/// One-sided permutation p-value on the magnitude of the SC-WEAT statistic.
///
/// The attribute pool (present male + female words) is re-partitioned into
/// same-size halves; the statistic of a partition (A', B') is
/// `|mean_{a in A'} colsum(a) - mean_{b in B'} colsum(b)|` where `colsum(w)`
/// sums cos(x, w) over present target words, which equals |SCWEAT(X,A',B')|
/// up to scaling. Enumeration is exhaustive when the partition count is at
/// most 20,000, Monte Carlo over `iterations` seeded draws otherwise. The
/// observed statistic goes through the identical code path, so in exhaustive
/// mode the identity partition ties bit-exactly.
pub fn permutation_pvalue(
    target: &WordSet,
    attrs: &AttributePair,
    emb: &EmbeddingMatrix,
    iterations: u64,
    seed: u64,
) -> Result<f64> {
    if iterations == 0 {
        return Err(Error::ZeroIterations);
    }
    let (male, female) = present_attrs(attrs, emb)?;
    let present_targets: Vec<&str> = target
        .words()
        .iter()
        .map(String::as_str)
        .filter(|w| emb.get(w).is_some())
        .collect();
    if present_targets.is_empty() {
        return Err(Error::TooFewTargetWords(0));
    }
    let pool: Vec<&str> = male.iter().chain(female.iter()).copied().collect();
    let mut colsum = Vec::with_capacity(pool.len());
    for a in &pool {
        let va = emb.vector_of(a)?;
        let mut s = 0.0;
        for x in &present_targets {
            s += cosine(emb.vector_of(x)?, va)?;
        }
        colsum.push(s);
    }
    let (na, nb) = (male.len(), female.len());
    let n = pool.len();
    // Both sides are summed directly in ascending index order. Deriving the
    // B side as total - sum_a would break the bit-exact tie between a
    // partition and its complement, skewing exhaustive counts by one ulp.
    let stat = |indices: &[usize]| -> f64 {
        let mut in_a = vec![false; n];
        for &i in indices {
            in_a[i] = true;
        }
        let mut sum_a = 0.0;
        let mut sum_b = 0.0;
        for (i, &c) in colsum.iter().enumerate() {
            if in_a[i] {
                sum_a += c;
            } else {
                sum_b += c;
            }
        }
        (sum_a / na as f64 - sum_b / nb as f64).abs()
    };
    let identity: Vec<usize> = (0..na).collect();
    let observed = stat(&identity);
    let total_partitions = binomial_capped(n, na, EXHAUSTIVE_LIMIT);
    if total_partitions <= EXHAUSTIVE_LIMIT {
        let mut hits = 0u64;
        let mut indices = identity;
        loop {
            if stat(&indices) >= observed {
                hits += 1;
            }
            // next k-combination in lexicographic order
            let mut i = na;
            loop {
                if i == 0 {
                    return Ok(hits as f64 / total_partitions as f64);
                }
                i -= 1;
                if indices[i] != i + n - na {
                    break;
                }
            }
            indices[i] += 1;
            for j in i + 1..na {
                indices[j] = indices[j - 1] + 1;
            }
        }
    } else {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mut order: Vec<usize> = (0..n).collect();
        let mut hits = 0u64;
        for _ in 0..iterations {
            let (chosen, _) = order.partial_shuffle(&mut rng, na);
            if stat(chosen) >= observed {
                hits += 1;
            }
        }
        Ok(hits as f64 / iterations as f64)
    }
}

/// Evaluate every (target, stratum) cell, never aborting: per-cell failures
/// become results with a reason and no scores. Rows are ordered target-major
/// (target order x stratum order). `permutations = Some((iterations, seed))`
/// adds p-values.
pub fn bias_table(
    targets: &[WordSet],
    attrs: &AttributePair,
    strata: &[(String, EmbeddingMatrix)],
    permutations: Option<(u64, u64)>,
) -> Vec<WeatResult> {
    let mut out = Vec::with_capacity(targets.len() * strata.len());
    for target in targets {
        for (label, emb) in strata {
            let (present, missing) = resolve_wordset(target, emb);
            let cell = scweat_sum(target, attrs, emb).and_then(|sum| {
                let d = effect_size(target, attrs, emb)?;
                let p = match permutations {
                    Some((iterations, seed)) => {
                        Some(permutation_pvalue(target, attrs, emb, iterations, seed)?)
                    }
                    None => None,
                };
                Ok(WeatScores {
                    sum_score: sum,
                    effect_size: d,
                    p_value: p,
                })
            });
            let (scores, reason) = match cell {
                Ok(s) => (Some(s), None),
                Err(e) => (None, Some(e.to_string())),
            };
            out.push(WeatResult {
                target_name: target.name.clone(),
                stratum_label: label.clone(),
                n_present: present.len(),
                missing,
                scores,
                reason,
            });
        }
    }
    out
}

fn set(name: &str, words: &[&str]) -> WordSet {
    WordSet::new(name, words.iter().map(|w| w.to_string()).collect())
        .expect("builtin word set is valid")
}

/// The six example target sets, in source order. Tagged partial: these are
/// the published examples, not the full lists.
pub fn builtin_targets() -> Vec<WordSet> {
    vec![
        set("Pleasant", &["joy", "wonderful", "love", "peace", "happy"]),
        set("Unpleasant", &["terrible", "hatred", "nasty", "kill", "evil"]),
        set(
            "Appearance",
            &["thin", "gorgeous", "fat", "pretty", "beautiful", "handsome"],
        ),
        set(
            "Intelligence",
            &["intelligent", "genius", "smart", "brilliant", "clever"],
        ),
        set("Strength", &["bold", "leader", "strong", "dominant", "power"]),
        set("Weakness", &["loser", "failure", "weak", "surrender", "follow"]),
    ]
}

pub fn builtin_attributes() -> AttributePair {
    AttributePair::new(
        set("Male", &["boy", "him", "father", "boyfriend", "dad", "he", "man"]),
        set(
            "Female",
            &["girl", "her", "lady", "girlfriend", "mother", "she", "woman"],
        ),
    )
    .expect("builtin attribute sets are disjoint")
}

/// Load `{name: [words]}` JSON. Sets named "male"/"female" (case-insensitive)
/// form the attribute pair; the rest become targets, ordered by name.
pub fn load_wordsets(path: &Path) -> Result<(Vec<WordSet>, Option<AttributePair>)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let raw: BTreeMap<String, Vec<String>> =
        serde_json::from_str(&text).map_err(|e| Error::MalformedFile {
            what: "word-sets",
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
    let mut targets = Vec::new();
    let mut male = None;
    let mut female = None;
    for (name, words) in raw {
        let ws = WordSet::new(&name, words)?;
        match name.to_lowercase().as_str() {
            "male" => male = Some(ws),
            "female" => female = Some(ws),
            _ => targets.push(ws),
        }
    }
    let attrs = match (male, female) {
        (Some(m), Some(f)) => Some(AttributePair::new(m, f)?),
        (None, None) => None,
        (Some(m), None) => {
            return Err(Error::InvalidWordSet {
                name: m.name,
                reason: "male set present without a female set".into(),
            })
        }
        (None, Some(f)) => {
            return Err(Error::InvalidWordSet {
                name: f.name,
                reason: "female set present without a male set".into(),
            })
        }
    };
    Ok((targets, attrs))
}
