//! Stage orchestration shared by the CLI and the end-to-end tests.
//!
//! Every stage reads its inputs from the configured source files or from
//! artifacts persisted by an earlier stage, so each one is independently
//! re-runnable and `pipeline` equals the concatenation of single-stage runs
//! with the same seeds. Artifact layout under `output.dir`:
//!
//! ```text
//! out/
//!   ingest_report.json    sample.csv          embeddings/<stratum>.txt
//!   embeddings/all.txt    doc_vectors.tsv     topic_model/
//!   assignments.csv       weat_results.json   report/
//! ```

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde_json::json;

use crate::config::RunConfig;
use crate::corpus::{ingest_files, Corpus, Genre, IngestReport, SongRecord};
use crate::embed::{train_word2vec, EmbeddingMatrix};
use crate::error::{Error, Result};
use crate::report::{emit_bias_reports, emit_topic_reports, write_run_meta, RunMeta};
use crate::text::{default_stopwords, load_stopwords, tokenize};
use crate::topics::{assign_topics, fit, load_model, save_model, DocVectorSet, TopicModel};
use crate::weat::{
    bias_table, builtin_attributes, builtin_targets, load_wordsets, WeatResult,
};

/// One executed stage: its name and a JSON summary for the CLI to print.
#[derive(Debug, Clone)]
pub struct StageOutput {
    pub stage: &'static str,
    pub summary: serde_json::Value,
}

impl StageOutput {
    pub fn to_json_line(&self) -> String {
        let mut obj = serde_json::Map::new();
        obj.insert("stage".to_string(), json!(self.stage));
        if let serde_json::Value::Object(fields) = &self.summary {
            for (k, v) in fields {
                obj.insert(k.clone(), v.clone());
            }
        }
        serde_json::Value::Object(obj).to_string()
    }
}

pub fn sample_path(out: &Path) -> PathBuf {
    out.join("sample.csv")
}

pub fn embeddings_dir(out: &Path) -> PathBuf {
    out.join("embeddings")
}

pub fn embedding_path(out: &Path, stratum: &str) -> PathBuf {
    embeddings_dir(out).join(format!("{stratum}.txt"))
}

pub fn doc_vectors_path(out: &Path) -> PathBuf {
    out.join("doc_vectors.tsv")
}

pub fn model_dir(out: &Path) -> PathBuf {
    out.join("topic_model")
}

pub fn assignments_path(out: &Path) -> PathBuf {
    out.join("assignments.csv")
}

pub fn weat_results_path(out: &Path) -> PathBuf {
    out.join("weat_results.json")
}

pub fn report_dir(out: &Path) -> PathBuf {
    out.join("report")
}

/// Stratum label used for the corpus-wide embedding behind doc vectors.
pub const GLOBAL_STRATUM: &str = "all";

fn now_unix() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// Ingest the configured corpus files with the configured genre map.
pub fn load_corpus(config: &RunConfig) -> Result<(Corpus, IngestReport)> {
    let genre_map = config.genre_map()?;
    ingest_files(&config.corpus.paths, config.corpus.format.0, &genre_map)
}

fn load_stop_set(config: &RunConfig) -> Result<HashSet<String>> {
    match &config.tokenizer.stopwords_file {
        Some(path) => load_stopwords(path),
        None => Ok(default_stopwords()),
    }
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    let mut payload = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Data(format!("serialize {}: {e}", path.display())))?;
    payload.push('\n');
    fs::write(path, payload).map_err(|e| Error::io(path, e))
}

fn write_corpus_csv(records: impl Iterator<Item = SongRecord>, path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Data(e.to_string()))?;
    w.write_record(["id", "title", "artist", "genre", "year", "lyrics", "language"])
        .map_err(|e| Error::Data(e.to_string()))?;
    for r in records {
        let year = r.year.map(|y| y.to_string()).unwrap_or_default();
        w.write_record([
            r.id.as_str(),
            r.title.as_str(),
            r.artist.as_str(),
            r.genre_raw.as_str(),
            year.as_str(),
            r.lyrics.as_str(),
            r.language.as_str(),
        ])
        .map_err(|e| Error::Data(e.to_string()))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn load_sample(config: &RunConfig) -> Result<Corpus> {
    let path = sample_path(&config.output.dir);
    if !path.exists() {
        return Err(Error::Data(format!(
            "missing {}; run the sample stage first",
            path.display()
        )));
    }
    let genre_map = config.genre_map()?;
    let (corpus, _) = ingest_files(
        &[path],
        crate::corpus::CorpusFormat::Csv,
        &genre_map,
    )?;
    Ok(corpus)
}

fn ingest_summary(report: &IngestReport) -> serde_json::Value {
    serde_json::to_value(report).unwrap_or_else(|_| json!({}))
}

pub fn stage_ingest(config: &RunConfig, report_path: Option<&Path>) -> Result<StageOutput> {
    let (corpus, report) = load_corpus(config)?;
    fs::create_dir_all(&config.output.dir).map_err(|e| Error::io(&config.output.dir, e))?;
    let out_path = config.output.dir.join("ingest_report.json");
    write_json(&out_path, &report)?;
    if let Some(extra) = report_path {
        write_json(extra, &report)?;
    }
    Ok(StageOutput {
        stage: "ingest",
        summary: json!({
            "docs": corpus.len(),
            "report": ingest_summary(&report),
            "report_file": out_path,
        }),
    })
}

pub fn stage_sample(config: &RunConfig) -> Result<StageOutput> {
    let (corpus, _) = load_corpus(config)?;
    let sample = corpus.stratified_sample(config.sampling.cap, config.sampling.seed)?;
    let path = sample_path(&config.output.dir);
    write_corpus_csv(sample.records().iter().cloned(), &path)?;
    let strata: serde_json::Map<String, serde_json::Value> = sample
        .strata()
        .map(|(g, idx)| (g.to_string(), json!(idx.len())))
        .collect();
    Ok(StageOutput {
        stage: "sample",
        summary: json!({
            "cap": config.sampling.cap,
            "seed": config.sampling.seed,
            "docs": sample.len(),
            "strata": strata,
            "sample_file": path,
        }),
    })
}

fn guard_stratum(config: &RunConfig, genre: Genre, docs: usize) -> Result<()> {
    if docs < config.embedding.min_stratum_docs {
        return Err(Error::StratumTooSmall {
            label: genre.to_string(),
            docs,
            min: config.embedding.min_stratum_docs,
        });
    }
    Ok(())
}

fn train_stratum(
    config: &RunConfig,
    genre: Genre,
    docs: &[Vec<String>],
) -> Result<(EmbeddingMatrix, Vec<f64>)> {
    let params = config.params_for(genre);
    let trained = train_word2vec(docs, &params)?;
    Ok((trained.embedding, trained.losses))
}

pub fn stage_train(config: &RunConfig) -> Result<StageOutput> {
    let sample = load_sample(config)?;
    let dir = embeddings_dir(&config.output.dir);
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let mut strata_summary = Vec::new();
    for (genre, indices) in sample.strata() {
        guard_stratum(config, genre, indices.len())?;
        let docs: Vec<Vec<String>> = sample
            .stratum_records(genre)
            .map(|r| tokenize(&r.lyrics))
            .collect();
        let (embedding, losses) = train_stratum(config, genre, &docs)?;
        let path = embedding_path(&config.output.dir, genre.as_str());
        embedding.save_text(&path)?;
        strata_summary.push(json!({
            "stratum": genre.to_string(),
            "docs": docs.len(),
            "vocab": embedding.len(),
            "final_loss": losses.last().copied(),
        }));
    }
    // corpus-wide embedding backing the document vectors
    let all_docs: Vec<Vec<String>> = sample.records().iter().map(|r| tokenize(&r.lyrics)).collect();
    let trained = train_word2vec(&all_docs, &config.embedding.params)?;
    let path = embedding_path(&config.output.dir, GLOBAL_STRATUM);
    trained.embedding.save_text(&path)?;
    strata_summary.push(json!({
        "stratum": GLOBAL_STRATUM,
        "docs": all_docs.len(),
        "vocab": trained.embedding.len(),
        "final_loss": trained.losses.last().copied(),
    }));
    Ok(StageOutput {
        stage: "train",
        summary: json!({ "embeddings": strata_summary, "dir": dir }),
    })
}

/// Doc vectors for a corpus: the configured external file, or averaged word
/// vectors from the corpus-wide embedding.
fn doc_vectors_for(
    config: &RunConfig,
    corpus: &Corpus,
    allow_external: bool,
) -> Result<DocVectorSet> {
    if allow_external {
        if let Some(path) = &config.topics.vectors_file {
            return DocVectorSet::load_tsv(path);
        }
    }
    let emb_path = embedding_path(&config.output.dir, GLOBAL_STRATUM);
    if !emb_path.exists() {
        return Err(Error::Data(format!(
            "missing {}; run the train stage first",
            emb_path.display()
        )));
    }
    let emb = EmbeddingMatrix::load_text(&emb_path)?;
    let ids: Vec<String> = corpus.records().iter().map(|r| r.id.clone()).collect();
    let docs: Vec<Vec<String>> = corpus.records().iter().map(|r| tokenize(&r.lyrics)).collect();
    DocVectorSet::from_tokenized(&ids, &docs, &emb)
}

fn tokens_for_ids(corpus: &Corpus, ids: &[String]) -> Result<Vec<Vec<String>>> {
    ids.iter()
        .map(|id| {
            corpus
                .get(id)
                .map(|r| tokenize(&r.lyrics))
                .ok_or_else(|| Error::Data(format!("doc id {id:?} not in the sampled corpus")))
        })
        .collect()
}

pub fn stage_topics_fit(config: &RunConfig) -> Result<StageOutput> {
    let sample = load_sample(config)?;
    let vectors = doc_vectors_for(config, &sample, true)?;
    let docs = tokens_for_ids(&sample, &vectors.doc_ids)?;
    let stopwords = load_stop_set(config)?;
    let model = fit(
        &vectors,
        &docs,
        config.topics.target_dim,
        &config.topics.cluster,
        &stopwords,
    )?;
    save_model(&model, &model_dir(&config.output.dir))?;
    vectors.save_tsv(&doc_vectors_path(&config.output.dir))?;
    Ok(StageOutput {
        stage: "topics-fit",
        summary: json!({
            "docs": vectors.len(),
            "skipped": vectors.skipped.len(),
            "n_topics": model.n_topics(),
            "sizes": model.sizes,
            "labels": model.labels,
            "outlier_share": model.outlier_share(),
            "model_dir": model_dir(&config.output.dir),
        }),
    })
}

pub fn stage_topics_predict(config: &RunConfig) -> Result<StageOutput> {
    let (corpus, _) = load_corpus(config)?;
    let model = load_model(&model_dir(&config.output.dir))?;
    let vectors = doc_vectors_for(config, &corpus, false)?;
    let topics = assign_topics(&model, &vectors)?;
    let path = assignments_path(&config.output.dir);
    let mut w = csv::Writer::from_path(&path).map_err(|e| Error::Data(e.to_string()))?;
    w.write_record(["doc_id", "topic"]).map_err(|e| Error::Data(e.to_string()))?;
    for (id, topic) in vectors.doc_ids.iter().zip(&topics) {
        w.write_record([id.as_str(), &topic.to_string()])
            .map_err(|e| Error::Data(e.to_string()))?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    let outliers = topics.iter().filter(|t| **t < 0).count();
    Ok(StageOutput {
        stage: "topics-predict",
        summary: json!({
            "docs": topics.len(),
            "skipped": vectors.skipped.len(),
            "outliers": outliers,
            "assignments_file": path,
        }),
    })
}

/// Targets and attributes: word-set file when configured, built-ins otherwise.
fn resolve_wordsets(
    config: &RunConfig,
) -> Result<(Vec<crate::weat::WordSet>, crate::weat::AttributePair)> {
    match &config.weat.wordsets_file {
        Some(path) => {
            let (targets, attrs) = load_wordsets(path)?;
            let targets = if targets.is_empty() { builtin_targets() } else { targets };
            let attrs = attrs.unwrap_or_else(builtin_attributes);
            Ok((targets, attrs))
        }
        None => Ok((builtin_targets(), builtin_attributes())),
    }
}

pub fn stage_weat(config: &RunConfig) -> Result<StageOutput> {
    let (corpus, _) = load_corpus(config)?;
    let mut strata = Vec::new();
    for (genre, indices) in corpus.strata() {
        guard_stratum(config, genre, indices.len())?;
        let path = embedding_path(&config.output.dir, genre.as_str());
        if !path.exists() {
            return Err(Error::Data(format!(
                "missing {}; run the train stage first",
                path.display()
            )));
        }
        strata.push((genre.to_string(), EmbeddingMatrix::load_text(&path)?));
    }
    let (targets, attrs) = resolve_wordsets(config)?;
    let results = bias_table(&targets, &attrs, &strata, config.permutation_spec());
    let failed = results.iter().filter(|r| r.scores.is_none()).count();
    let path = weat_results_path(&config.output.dir);
    write_json(&path, &results)?;
    Ok(StageOutput {
        stage: "weat",
        summary: json!({
            "targets": targets.len(),
            "strata": strata.len(),
            "cells": results.len(),
            "failed_cells": failed,
            "results_file": path,
        }),
    })
}

fn load_assignments(path: &Path) -> Result<Vec<(String, i32)>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::MalformedFile {
        what: "assignments",
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::MalformedFile {
            what: "assignments",
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        let topic: i32 = record
            .get(1)
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| Error::MalformedFile {
                what: "assignments",
                path: path.to_path_buf(),
                reason: format!("bad row {record:?}"),
            })?;
        out.push((record.get(0).unwrap_or_default().to_string(), topic));
    }
    Ok(out)
}

pub fn stage_report(config: &RunConfig, seed_used: u64) -> Result<StageOutput> {
    let started = now_unix();
    let (corpus, _) = load_corpus(config)?;
    let mut model: TopicModel = load_model(&model_dir(&config.output.dir))?;
    // prefer full-corpus predictions over the fit-sample assignments
    let assignments = assignments_path(&config.output.dir);
    if assignments.exists() {
        model.assignments = load_assignments(&assignments)?;
    }
    let results_path = weat_results_path(&config.output.dir);
    if !results_path.exists() {
        return Err(Error::Data(format!(
            "missing {}; run the weat stage first",
            results_path.display()
        )));
    }
    let payload = fs::read_to_string(&results_path).map_err(|e| Error::io(&results_path, e))?;
    let results: Vec<WeatResult> =
        serde_json::from_str(&payload).map_err(|e| Error::MalformedFile {
            what: "weat results",
            path: results_path.clone(),
            reason: e.to_string(),
        })?;
    let dir = report_dir(&config.output.dir);
    let mut files = emit_topic_reports(&model, &corpus, &dir)?;
    files.extend(emit_bias_reports(&results, &dir)?);
    let meta = RunMeta {
        config_hash: config.hash(),
        seed: seed_used,
        started_unix: started,
        finished_unix: now_unix(),
    };
    files.push(write_run_meta(&dir, &meta)?);
    files.sort();
    let names: Vec<String> = files
        .iter()
        .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
        .collect();
    Ok(StageOutput {
        stage: "report",
        summary: json!({ "dir": dir, "files": names }),
    })
}

/// Chain every stage: sample, train, fit on the sample, predict the full
/// corpus, per-stratum WEAT, report. `sample_only` stops after sampling.
pub fn stage_pipeline(config: &RunConfig, sample_only: bool) -> Result<Vec<StageOutput>> {
    let mut outputs = vec![stage_ingest(config, None)?, stage_sample(config)?];
    if sample_only {
        return Ok(outputs);
    }
    outputs.push(stage_train(config)?);
    outputs.push(stage_topics_fit(config)?);
    outputs.push(stage_topics_predict(config)?);
    outputs.push(stage_weat(config)?);
    outputs.push(stage_report(config, config.sampling.seed)?);
    Ok(outputs)
}
