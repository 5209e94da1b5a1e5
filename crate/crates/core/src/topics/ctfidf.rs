//! Class-based TF-IDF over topic clusters.
//!
//! For topic c and term t:
//! `W(t,c) = tf(t,c) * ln(1 + A / f(t))` where `tf(t,c)` is t's count in c
//! divided by c's total token count, `f(t)` is t's total count across all
//! classes, and `A` is the mean token count per class. Stopwords are removed
//! before counting; outlier docs (topic -1) contribute nothing.

use std::collections::{BTreeMap, HashMap, HashSet};

use crate::error::{Error, Result};

/// Per-topic term weights, each row sorted by weight descending, ties by
/// term ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct Ctfidf {
    rows: BTreeMap<i32, Vec<(String, f64)>>,
}

impl Ctfidf {
    /// Rebuild from per-topic rows (model loading); rows are re-sorted into
    /// canonical order.
    pub fn from_rows(mut rows: BTreeMap<i32, Vec<(String, f64)>>) -> Ctfidf {
        for row in rows.values_mut() {
            row.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
        }
        Ctfidf { rows }
    }

    pub fn topics(&self) -> impl Iterator<Item = i32> + '_ {
        self.rows.keys().copied()
    }

    pub fn n_topics(&self) -> usize {
        self.rows.len()
    }

    /// Weighted terms of one topic, heaviest first.
    pub fn row(&self, topic: i32) -> Option<&[(String, f64)]> {
        self.rows.get(&topic).map(Vec::as_slice)
    }

    pub fn weight(&self, topic: i32, term: &str) -> f64 {
        self.rows
            .get(&topic)
            .and_then(|r| r.iter().find(|(t, _)| t == term))
            .map_or(0.0, |(_, w)| *w)
    }
}

pub fn ctfidf(
    assignments: &[i32],
    docs: &[Vec<String>],
    stopwords: &HashSet<String>,
) -> Result<Ctfidf> {
    if assignments.len() != docs.len() {
        return Err(Error::DimensionMismatch {
            left: assignments.len(),
            right: docs.len(),
        });
    }
    let mut class_counts: BTreeMap<i32, HashMap<&str, u64>> = BTreeMap::new();
    let mut class_totals: BTreeMap<i32, u64> = BTreeMap::new();
    for (&topic, doc) in assignments.iter().zip(docs) {
        if topic < 0 {
            continue;
        }
        let counts = class_counts.entry(topic).or_default();
        let total = class_totals.entry(topic).or_default();
        for token in doc {
            if stopwords.contains(token.as_str()) {
                continue;
            }
            *counts.entry(token.as_str()).or_default() += 1;
            *total += 1;
        }
    }
    if class_counts.is_empty() {
        return Err(Error::NoTopics);
    }
    for (&topic, &total) in &class_totals {
        if total == 0 {
            return Err(Error::EmptyClass(topic));
        }
    }
    let mut corpus_counts: HashMap<&str, u64> = HashMap::new();
    for counts in class_counts.values() {
        for (&t, &n) in counts {
            *corpus_counts.entry(t).or_default() += n;
        }
    }
    let avg_tokens =
        class_totals.values().sum::<u64>() as f64 / class_totals.len() as f64;
    let mut rows = BTreeMap::new();
    for (&topic, counts) in &class_counts {
        let total = class_totals[&topic] as f64;
        let mut row: Vec<(String, f64)> = counts
            .iter()
            .map(|(&t, &n)| {
                let tf = n as f64 / total;
                let idf = (1.0 + avg_tokens / corpus_counts[t] as f64).ln();
                (t.to_string(), tf * idf)
            })
            .collect();
        row.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
        rows.insert(topic, row);
    }
    Ok(Ctfidf { rows })
}

/// Label = top-`n` terms joined with "_". The row is already sorted with the
/// lexicographic tie rule, so the label is deterministic.
pub fn topic_label(row: &[(String, f64)], n: usize) -> String {
    row.iter()
        .take(n)
        .map(|(t, _)| t.as_str())
        .collect::<Vec<_>>()
        .join("_")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_string).collect()
    }

    fn no_stops() -> HashSet<String> {
        HashSet::new()
    }

    #[test]
    fn two_class_hand_computed_weights() {
        // class 0: love x4, music x6; class 1: rage x4, music x6
        // A = 10, f(love) = f(rage) = 4, f(music) = 12
        let docs = vec![
            toks("love love love love music music"),
            toks("music music music music"),
            toks("rage rage rage rage music music"),
            toks("music music music music"),
        ];
        let assignments = vec![0, 0, 1, 1];
        let scores = ctfidf(&assignments, &docs, &no_stops()).unwrap();
        // 0.4 * ln(3.5) and 0.6 * ln(11/6), frozen from an independent computation
        assert!((scores.weight(0, "love") - 0.5011051873981472).abs() < 1e-9);
        assert!((scores.weight(0, "music") - 0.36368148214218937).abs() < 1e-9);
        assert!((scores.weight(1, "rage") - 0.5011051873981472).abs() < 1e-9);
        assert_eq!(scores.weight(0, "rage"), 0.0);
        // exclusive terms outrank the shared one in their own class
        assert_eq!(scores.row(0).unwrap()[0].0, "love");
        assert_eq!(scores.row(1).unwrap()[0].0, "rage");
    }

    #[test]
    fn uniform_term_scores_below_exclusive_term() {
        // "even" appears 3x in every class; "only" appears 3x in class 0 alone
        let docs = vec![
            toks("even even even only only only pad pad"),
            toks("even even even pad pad pad pad pad"),
            toks("even even even pad pad pad pad pad"),
        ];
        let scores = ctfidf(&[0, 1, 2], &docs, &no_stops()).unwrap();
        assert!(scores.weight(0, "only") > scores.weight(0, "even"));
    }

    #[test]
    fn single_class_all_weights_positive() {
        let docs = vec![toks("alpha beta beta gamma")];
        let scores = ctfidf(&[0], &docs, &no_stops()).unwrap();
        assert_eq!(scores.n_topics(), 1);
        for (_, w) in scores.row(0).unwrap() {
            assert!(*w > 0.0);
        }
    }

    #[test]
    fn stopwords_and_outliers_excluded() {
        let stops: HashSet<String> = ["the".to_string()].into();
        let docs = vec![toks("the the love song"), toks("ghost words here")];
        let scores = ctfidf(&[0, -1], &docs, &stops).unwrap();
        assert_eq!(scores.weight(0, "the"), 0.0);
        assert_eq!(scores.weight(0, "ghost"), 0.0);
        assert!(scores.weight(0, "love") > 0.0);
        assert_eq!(scores.n_topics(), 1);
    }

    #[test]
    fn empty_class_after_stopwords_errors() {
        let stops: HashSet<String> = ["the".to_string()].into();
        let docs = vec![toks("the the the"), toks("real words")];
        assert!(matches!(
            ctfidf(&[0, 1], &docs, &stops),
            Err(Error::EmptyClass(0))
        ));
    }

    #[test]
    fn all_outliers_errors() {
        let docs = vec![toks("a b"), toks("c d")];
        assert!(matches!(
            ctfidf(&[-1, -1], &docs, &no_stops()),
            Err(Error::NoTopics)
        ));
    }

    #[test]
    fn label_examples() {
        let row = vec![
            ("tears".to_string(), 0.9),
            ("heart".to_string(), 0.8),
            ("wish".to_string(), 0.7),
            ("love".to_string(), 0.1),
        ];
        assert_eq!(topic_label(&row, 3), "tears_heart_wish");
        assert_eq!(topic_label(&row[..1], 3), "tears");
        // ties sort lexicographically during ctfidf row construction
        let docs = vec![toks("zz aa")];
        let scores = ctfidf(&[0], &docs, &no_stops()).unwrap();
        assert_eq!(topic_label(scores.row(0).unwrap(), 2), "aa_zz");
    }
}
