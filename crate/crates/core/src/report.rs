//! Plot-ready tables and data series.
//!
//! Every emitted value comes straight from an in-memory result; nothing is
//! recomputed here. Files are byte-deterministic for identical inputs: fixed
//! field order, 6-significant-digit decimals, "\n" line endings. The one
//! exception is run_meta.json, which carries wall-clock timestamps.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::topics::{genre_composition, topics_over_time, TopicModel};
use crate::weat::WeatResult;

/// Fixed decimal rendering at 6 significant digits, the precision of every
/// report table; never scientific notation.
pub fn fmt_sig6(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let exp = x.abs().log10().floor() as i32;
    let prec = (5 - exp).max(0) as usize;
    let factor = 10f64.powi(exp - 5);
    format!("{:.prec$}", (x / factor).round() * factor)
}

/// The double nearest the 6-significant-digit decimal, so JSON output shows
/// exactly the table formatting.
pub fn round_sig6(x: f64) -> f64 {
    if !x.is_finite() {
        return x;
    }
    fmt_sig6(x).parse().unwrap_or(x)
}

/// Run provenance written next to the tables. Timestamps make this the one
/// file excluded from byte-determinism checks.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunMeta {
    pub config_hash: String,
    pub seed: u64,
    pub started_unix: u64,
    pub finished_unix: u64,
}

/// Named payloads accumulated before hitting disk. Names are unique across
/// tables and series together.
#[derive(Debug, Default)]
pub struct ReportBundle {
    tables: BTreeMap<String, String>,
    series: BTreeMap<String, String>,
}

impl ReportBundle {
    pub fn new() -> Self {
        Self::default()
    }

    fn claim(&mut self, name: &str) -> Result<()> {
        if self.tables.contains_key(name) || self.series.contains_key(name) {
            return Err(Error::Data(format!("duplicate report name {name:?}")));
        }
        Ok(())
    }

    pub fn add_table(&mut self, name: &str, csv_payload: String) -> Result<()> {
        self.claim(name)?;
        self.tables.insert(name.to_string(), csv_payload);
        Ok(())
    }

    pub fn add_series(&mut self, name: &str, json_payload: String) -> Result<()> {
        self.claim(name)?;
        self.series.insert(name.to_string(), json_payload);
        Ok(())
    }

    /// Writes `{name}.csv` per table and `{name}.json` per series, returning
    /// the paths in sorted order.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut written = Vec::new();
        for (name, payload) in &self.tables {
            let path = dir.join(format!("{name}.csv"));
            fs::write(&path, payload).map_err(|e| Error::io(&path, e))?;
            written.push(path);
        }
        for (name, payload) in &self.series {
            let path = dir.join(format!("{name}.json"));
            fs::write(&path, payload).map_err(|e| Error::io(&path, e))?;
            written.push(path);
        }
        written.sort();
        Ok(written)
    }
}

fn csv_table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory csv");
    for row in rows {
        w.write_record(row).expect("in-memory csv");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv")).expect("csv is utf-8")
}

/// Figures 1-3 data: genre_composition.csv, topics_over_time.csv,
/// top_terms.csv (top-10 c-TF-IDF terms per topic), labels.csv. A model
/// whose every document is an outlier yields empty tables plus warnings.csv.
pub fn emit_topic_reports(
    model: &TopicModel,
    corpus: &Corpus,
    out_dir: &Path,
) -> Result<Vec<PathBuf>> {
    let mut bundle = ReportBundle::new();
    let degenerate =
        model.n_topics() == 0 || model.assignments.iter().all(|(_, t)| *t < 0);

    let mut composition_rows = Vec::new();
    let mut time_rows = Vec::new();
    let mut term_rows = Vec::new();
    let mut label_rows = Vec::new();
    if degenerate {
        bundle.add_table(
            "warnings",
            csv_table(
                &["source", "message"],
                &[vec![
                    "emit_topic_reports".to_string(),
                    "model assigns every document to the outlier bucket; tables are empty"
                        .to_string(),
                ]],
            ),
        )?;
    } else {
        for (topic, genre, pct) in genre_composition(&model.assignments, corpus)? {
            composition_rows.push(vec![
                topic.to_string(),
                genre.to_string(),
                fmt_sig6(pct),
            ]);
        }
        let time = topics_over_time(&model.assignments, corpus)?;
        for (decade, topic, count) in &time.cells {
            time_rows.push(vec![decade.to_string(), topic.to_string(), count.to_string()]);
        }
        if time.undated > 0 {
            time_rows.push(vec![
                "undated".to_string(),
                String::new(),
                time.undated.to_string(),
            ]);
        }
        for topic in model.ctfidf.topics().collect::<Vec<_>>() {
            for (rank, (term, weight)) in
                model.ctfidf.row(topic).unwrap_or(&[]).iter().take(10).enumerate()
            {
                term_rows.push(vec![
                    topic.to_string(),
                    (rank + 1).to_string(),
                    term.clone(),
                    fmt_sig6(*weight),
                ]);
            }
        }
        for (topic, label) in model.labels.iter().enumerate() {
            label_rows.push(vec![
                topic.to_string(),
                label.clone(),
                model.sizes[topic].to_string(),
            ]);
        }
    }
    bundle.add_table(
        "genre_composition",
        csv_table(&["topic", "genre", "percent"], &composition_rows),
    )?;
    bundle.add_table(
        "topics_over_time",
        csv_table(&["decade", "topic", "count"], &time_rows),
    )?;
    bundle.add_table(
        "top_terms",
        csv_table(&["topic", "rank", "term", "weight"], &term_rows),
    )?;
    bundle.add_table("labels", csv_table(&["topic", "label", "size"], &label_rows))?;
    bundle.write(out_dir)
}

/// One bar-chart series per target set; points follow stratum order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasSeries {
    pub strata: Vec<String>,
    pub series: Vec<BiasSeriesEntry>,
}

/// `effect_sizes[i]` pairs with `strata[i]`; null marks a failed cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasSeriesEntry {
    pub target_set: String,
    pub effect_sizes: Vec<Option<f64>>,
}

pub fn build_bias_series(results: &[WeatResult]) -> BiasSeries {
    let mut strata: Vec<String> = Vec::new();
    let mut targets: Vec<String> = Vec::new();
    for r in results {
        if !strata.contains(&r.stratum_label) {
            strata.push(r.stratum_label.clone());
        }
        if !targets.contains(&r.target_name) {
            targets.push(r.target_name.clone());
        }
    }
    let series = targets
        .iter()
        .map(|t| BiasSeriesEntry {
            target_set: t.clone(),
            effect_sizes: strata
                .iter()
                .map(|s| {
                    results
                        .iter()
                        .find(|r| &r.target_name == t && &r.stratum_label == s)
                        .and_then(|r| r.scores.as_ref())
                        .map(|sc| round_sig6(sc.effect_size))
                })
                .collect(),
        })
        .collect();
    BiasSeries { strata, series }
}

/// Figure 4-5 data: bias_table.csv (one row per cell, reason column filled
/// on failure), bias_results.json (full mirror including missing-word
/// lists), bias_series.json (effect sizes grouped per target set).
pub fn emit_bias_reports(results: &[WeatResult], out_dir: &Path) -> Result<Vec<PathBuf>> {
    if results.is_empty() {
        return Err(Error::Data("bias report requires at least one result".into()));
    }
    let mut bundle = ReportBundle::new();
    let rows: Vec<Vec<String>> = results
        .iter()
        .map(|r| {
            let (sum, d, p) = match &r.scores {
                Some(s) => (
                    fmt_sig6(s.sum_score),
                    fmt_sig6(s.effect_size),
                    s.p_value.map(fmt_sig6).unwrap_or_default(),
                ),
                None => (String::new(), String::new(), String::new()),
            };
            vec![
                r.stratum_label.clone(),
                r.target_name.clone(),
                r.n_present.to_string(),
                r.missing.len().to_string(),
                sum,
                d,
                p,
                r.reason.clone().unwrap_or_default(),
            ]
        })
        .collect();
    bundle.add_table(
        "bias_table",
        csv_table(
            &[
                "stratum",
                "target_set",
                "n_present",
                "n_missing",
                "sum_score",
                "effect_size",
                "p_value",
                "reason",
            ],
            &rows,
        ),
    )?;
    let mut mirror = serde_json::to_string_pretty(results).expect("results serialize");
    mirror.push('\n');
    bundle.add_series("bias_results", mirror)?;
    let mut series =
        serde_json::to_string_pretty(&build_bias_series(results)).expect("series serialize");
    series.push('\n');
    bundle.add_series("bias_series", series)?;
    bundle.write(out_dir)
}

pub fn write_run_meta(dir: &Path, meta: &RunMeta) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join("run_meta.json");
    let mut payload = serde_json::to_string_pretty(meta).expect("meta serializes");
    payload.push('\n');
    fs::write(&path, payload).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}
