//! The four-step topic pipeline: document vectors, dimensionality reduction,
//! clustering with outliers, and c-TF-IDF topic representations. Includes
//! full-corpus prediction plus temporal and genre composition analyses.

mod ctfidf;
mod dbscan;
mod kmeans;
mod pca;

pub use ctfidf::{ctfidf, topic_label, Ctfidf};
pub use dbscan::{dbscan, kth_nearest_distances, median, renumber_by_size};
pub use kmeans::{kmeans, nearest_centroid};
pub use pca::{fit_pca, Pca};

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{decade_of, Corpus, Decade, Genre};
use crate::embed::{doc_embed, EmbeddingMatrix};
use crate::error::{Error, Result};
use crate::matrix::{euclidean, Matrix};

pub const DEFAULT_TARGET_DIM: usize = 5;
pub const DEFAULT_MIN_PTS: usize = 15;
pub const DEFAULT_KMEANS_MAX_ITERS: usize = 100;

/// Uniform-dimension document vectors keyed by doc id.
#[derive(Debug, Clone)]
pub struct DocVectorSet {
    pub doc_ids: Vec<String>,
    pub vectors: Matrix,
    /// Doc ids dropped because no token was in the embedding vocabulary.
    pub skipped: Vec<String>,
}

impl DocVectorSet {
    pub fn new(doc_ids: Vec<String>, vectors: Matrix) -> Result<Self> {
        if doc_ids.len() != vectors.n_rows() {
            return Err(Error::DimensionMismatch {
                left: doc_ids.len(),
                right: vectors.n_rows(),
            });
        }
        if !vectors.is_finite() {
            return Err(Error::Data("non-finite document vector".into()));
        }
        let mut seen = HashSet::with_capacity(doc_ids.len());
        for id in &doc_ids {
            if !seen.insert(id.as_str()) {
                return Err(Error::Data(format!("duplicate doc id {id:?}")));
            }
        }
        Ok(DocVectorSet {
            doc_ids,
            vectors,
            skipped: Vec::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.doc_ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.vectors.n_cols()
    }

    /// Average-of-word-vectors fallback: one vector per doc, skipping and
    /// recording docs with no in-vocabulary token.
    pub fn from_tokenized(
        ids: &[String],
        docs: &[Vec<String>],
        emb: &EmbeddingMatrix,
    ) -> Result<Self> {
        if ids.len() != docs.len() {
            return Err(Error::DimensionMismatch {
                left: ids.len(),
                right: docs.len(),
            });
        }
        let mut doc_ids = Vec::new();
        let mut rows = Vec::new();
        let mut skipped = Vec::new();
        for (id, doc) in ids.iter().zip(docs) {
            match doc_embed(emb, doc) {
                Some(v) => {
                    doc_ids.push(id.clone());
                    rows.push(v);
                }
                None => skipped.push(id.clone()),
            }
        }
        if doc_ids.is_empty() {
            return Err(Error::NoVocabOverlap(
                "no document overlaps the embedding vocabulary".into(),
            ));
        }
        let mut set = DocVectorSet::new(doc_ids, Matrix::from_rows(&rows))?;
        set.skipped = skipped;
        Ok(set)
    }

    /// Load the external TSV format: header `"<n_docs> <dim>"`, then
    /// `doc_id\tv1 v2 ... vdim` per line.
    pub fn load_tsv(path: &Path) -> Result<Self> {
        let malformed = |reason: String| Error::MalformedFile {
            what: "doc-vectors",
            path: path.to_path_buf(),
            reason,
        };
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut lines = BufReader::new(file).lines();
        let header = lines
            .next()
            .ok_or_else(|| malformed("empty file".into()))?
            .map_err(|e| Error::io(path, e))?;
        let mut parts = header.split_whitespace();
        let parse = |s: Option<&str>| -> Result<usize> {
            s.and_then(|v| v.parse().ok())
                .ok_or_else(|| malformed(format!("bad header {header:?}")))
        };
        let n = parse(parts.next())?;
        let dim = parse(parts.next())?;
        let mut doc_ids = Vec::with_capacity(n);
        let mut rows = Vec::with_capacity(n);
        for (lineno, line) in lines.enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let (id, values) = line
                .split_once('\t')
                .ok_or_else(|| malformed(format!("line {}: missing tab", lineno + 2)))?;
            let row: Vec<f64> = values
                .split_whitespace()
                .map(|v| v.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| malformed(format!("line {}: bad float", lineno + 2)))?;
            if row.len() != dim {
                return Err(malformed(format!(
                    "line {}: expected {dim} values, got {}",
                    lineno + 2,
                    row.len()
                )));
            }
            doc_ids.push(id.to_string());
            rows.push(row);
        }
        if doc_ids.len() != n {
            return Err(malformed(format!("expected {n} rows, got {}", doc_ids.len())));
        }
        DocVectorSet::new(doc_ids, Matrix::from_rows(&rows))
    }

    pub fn save_tsv(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let io = |e| Error::io(path, e);
        write!(w, "{} {}\n", self.len(), self.dim()).map_err(io)?;
        for (i, id) in self.doc_ids.iter().enumerate() {
            let values: Vec<String> =
                self.vectors.row(i).iter().map(|v| format!("{v}")).collect();
            write!(w, "{id}\t{}\n", values.join(" ")).map_err(io)?;
        }
        w.flush().map_err(io)
    }
}

/// Clustering configuration; strategy-specific fields only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "lowercase", deny_unknown_fields)]
pub enum ClusterParams {
    Dbscan {
        /// None = pick eps as the median of the min_pts-NN distances.
        #[serde(default)]
        eps: Option<f64>,
        #[serde(default = "default_min_pts")]
        min_pts: usize,
    },
    Kmeans {
        k: usize,
        #[serde(default = "default_kmeans_iters")]
        max_iters: usize,
        #[serde(default = "default_cluster_seed")]
        seed: u64,
    },
}

fn default_min_pts() -> usize {
    DEFAULT_MIN_PTS
}

fn default_kmeans_iters() -> usize {
    DEFAULT_KMEANS_MAX_ITERS
}

fn default_cluster_seed() -> u64 {
    42
}

impl Default for ClusterParams {
    fn default() -> Self {
        ClusterParams::Dbscan {
            eps: None,
            min_pts: DEFAULT_MIN_PTS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClusterStrategy {
    Dbscan,
    Kmeans,
}

/// Fitted topic model: projection, centroids, fit-time assignments, and
/// c-TF-IDF representations.
#[derive(Debug, Clone)]
pub struct TopicModel {
    pub pca: Pca,
    pub strategy: ClusterStrategy,
    /// Reduced-space centroid per topic id.
    pub centroids: Matrix,
    /// 95th-percentile member-to-centroid distance; None for kmeans.
    pub outlier_radius: Option<f64>,
    /// Fit-sample assignments, aligned with the training vector set.
    pub assignments: Vec<(String, i32)>,
    pub sizes: Vec<usize>,
    pub labels: Vec<String>,
    pub ctfidf: Ctfidf,
}

impl TopicModel {
    pub fn n_topics(&self) -> usize {
        self.centroids.n_rows()
    }

    pub fn outlier_share(&self) -> f64 {
        if self.assignments.is_empty() {
            return 0.0;
        }
        let outliers = self.assignments.iter().filter(|(_, t)| *t < 0).count();
        outliers as f64 / self.assignments.len() as f64
    }
}

/// Run reduction, clustering, and c-TF-IDF over training vectors. `docs`
/// must align 1:1 with `vectors` rows (same order).
pub fn fit(
    vectors: &DocVectorSet,
    docs: &[Vec<String>],
    target_dim: usize,
    params: &ClusterParams,
    stopwords: &HashSet<String>,
) -> Result<TopicModel> {
    if docs.len() != vectors.len() {
        return Err(Error::DimensionMismatch {
            left: docs.len(),
            right: vectors.len(),
        });
    }
    let pca = fit_pca(&vectors.vectors, target_dim)?;
    let reduced = pca.project_rows(&vectors.vectors)?;
    let (labels_raw, strategy) = match params {
        ClusterParams::Dbscan { eps, min_pts } => {
            let eps = match eps {
                Some(e) => *e,
                None => {
                    let e = median(&kth_nearest_distances(&reduced, *min_pts));
                    if !(e.is_finite() && e > 0.0) {
                        return Err(Error::Data(
                            "k-distance eps heuristic degenerated to 0; set eps explicitly".into(),
                        ));
                    }
                    e
                }
            };
            (dbscan(&reduced, eps, *min_pts)?, ClusterStrategy::Dbscan)
        }
        ClusterParams::Kmeans { k, max_iters, seed } => {
            let (l, _) = kmeans(&reduced, *k, *max_iters, *seed)?;
            (l, ClusterStrategy::Kmeans)
        }
    };
    let n_topics = labels_raw.iter().copied().max().map_or(0, |m| (m + 1).max(0)) as usize;
    if n_topics == 0 {
        return Err(Error::NoTopics);
    }
    let dim = reduced.n_cols();
    let mut sums = vec![vec![0.0; dim]; n_topics];
    let mut sizes = vec![0usize; n_topics];
    for (i, &t) in labels_raw.iter().enumerate() {
        if t >= 0 {
            sizes[t as usize] += 1;
            for (s, x) in sums[t as usize].iter_mut().zip(reduced.row(i)) {
                *s += x;
            }
        }
    }
    let centroid_rows: Vec<Vec<f64>> = sums
        .iter()
        .zip(&sizes)
        .map(|(s, &n)| s.iter().map(|x| x / n as f64).collect())
        .collect();
    let centroids = Matrix::from_rows(&centroid_rows);
    let outlier_radius = match strategy {
        ClusterStrategy::Kmeans => None,
        ClusterStrategy::Dbscan => {
            let mut dists: Vec<f64> = labels_raw
                .iter()
                .enumerate()
                .filter(|(_, &t)| t >= 0)
                .map(|(i, &t)| euclidean(reduced.row(i), centroids.row(t as usize)))
                .collect();
            dists.sort_by(|a, b| a.partial_cmp(b).unwrap());
            // nearest-rank 95th percentile
            let rank = ((0.95 * dists.len() as f64).ceil() as usize).clamp(1, dists.len());
            Some(dists[rank - 1])
        }
    };
    let scores = ctfidf(&labels_raw, docs, stopwords)?;
    let mut labels = Vec::with_capacity(n_topics);
    let mut used: HashSet<String> = HashSet::new();
    for t in 0..n_topics as i32 {
        let row = scores.row(t).ok_or(Error::EmptyClass(t))?;
        let mut label = topic_label(row, 3);
        if !used.insert(label.clone()) {
            // de-duplicate identical top-3 labels deterministically
            label = format!("{label}_{t}");
            used.insert(label.clone());
        }
        labels.push(label);
    }
    let assignments = vectors
        .doc_ids
        .iter()
        .cloned()
        .zip(labels_raw.iter().copied())
        .collect();
    Ok(TopicModel {
        pca,
        strategy,
        centroids,
        outlier_radius,
        assignments,
        sizes,
        labels,
        ctfidf: scores,
    })
}

/// Project each vector and assign it to the nearest centroid. For
/// dbscan-fitted models, docs beyond the outlier radius get -1.
pub fn assign_topics(model: &TopicModel, vectors: &DocVectorSet) -> Result<Vec<i32>> {
    if vectors.dim() != model.pca.input_dim() {
        return Err(Error::DimensionMismatch {
            left: vectors.dim(),
            right: model.pca.input_dim(),
        });
    }
    let mut out = Vec::with_capacity(vectors.len());
    for i in 0..vectors.len() {
        let p = model.pca.project(vectors.vectors.row(i))?;
        let c = nearest_centroid(&p, &model.centroids);
        let assigned = match model.outlier_radius {
            Some(radius) if euclidean(&p, model.centroids.row(c)) > radius => -1,
            _ => c as i32,
        };
        out.push(assigned);
    }
    Ok(out)
}

/// Docs per (decade, topic), outliers excluded, undated docs counted
/// separately. Cells are sorted by decade then topic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimeMatrix {
    pub cells: Vec<(Decade, i32, u64)>,
    pub undated: u64,
}

pub fn topics_over_time(assignments: &[(String, i32)], corpus: &Corpus) -> Result<TimeMatrix> {
    let mut counts: BTreeMap<(Decade, i32), u64> = BTreeMap::new();
    let mut undated = 0u64;
    for (id, topic) in assignments {
        if *topic < 0 {
            continue;
        }
        let rec = corpus
            .get(id)
            .ok_or_else(|| Error::Data(format!("assignment references unknown doc {id:?}")))?;
        match rec.year.and_then(|y| decade_of(y).ok()) {
            Some(decade) => *counts.entry((decade, *topic)).or_default() += 1,
            None => undated += 1,
        }
    }
    Ok(TimeMatrix {
        cells: counts.into_iter().map(|((d, t), n)| (d, t, n)).collect(),
        undated,
    })
}

/// Genre share (percent) of each topic's members; rows sorted by topic then
/// genre, zero cells omitted. Per-topic percentages sum to 100.
pub fn genre_composition(
    assignments: &[(String, i32)],
    corpus: &Corpus,
) -> Result<Vec<(i32, Genre, f64)>> {
    let mut counts: BTreeMap<i32, BTreeMap<Genre, u64>> = BTreeMap::new();
    let mut totals: BTreeMap<i32, u64> = BTreeMap::new();
    for (id, topic) in assignments {
        if *topic < 0 {
            continue;
        }
        let rec = corpus
            .get(id)
            .ok_or_else(|| Error::Data(format!("assignment references unknown doc {id:?}")))?;
        *counts.entry(*topic).or_default().entry(rec.genre).or_default() += 1;
        *totals.entry(*topic).or_default() += 1;
    }
    let mut out = Vec::new();
    for (topic, by_genre) in &counts {
        let total = totals[topic] as f64;
        for genre in Genre::ALL {
            if let Some(&n) = by_genre.get(&genre) {
                out.push((*topic, genre, 100.0 * n as f64 / total));
            }
        }
    }
    Ok(out)
}

const PROJECTION_MAGIC: &[u8; 8] = b"BBTM0001";

/// Persist the model as a directory: assignments.csv, labels.csv,
/// ctfidf.csv, projection.bin. CSVs use full-precision floats so the
/// roundtrip is exact.
pub fn save_model(model: &TopicModel, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let write_err = |path: &Path| {
        let p = path.to_path_buf();
        move |e: csv::Error| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(&p, io),
            other => Error::Data(format!("csv write failed: {other:?}")),
        }
    };

    let path = dir.join("assignments.csv");
    let mut w = csv::Writer::from_path(&path).map_err(write_err(&path))?;
    w.write_record(["doc_id", "topic"]).map_err(write_err(&path))?;
    for (id, topic) in &model.assignments {
        w.write_record([id.as_str(), &topic.to_string()])
            .map_err(write_err(&path))?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;

    let path = dir.join("labels.csv");
    let mut w = csv::Writer::from_path(&path).map_err(write_err(&path))?;
    w.write_record(["topic", "label", "size"]).map_err(write_err(&path))?;
    for t in 0..model.n_topics() {
        w.write_record([&t.to_string(), &model.labels[t], &model.sizes[t].to_string()])
            .map_err(write_err(&path))?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;

    let path = dir.join("ctfidf.csv");
    let mut w = csv::Writer::from_path(&path).map_err(write_err(&path))?;
    w.write_record(["topic", "term", "weight"]).map_err(write_err(&path))?;
    for topic in model.ctfidf.topics() {
        for (term, weight) in model.ctfidf.row(topic).unwrap_or(&[]) {
            w.write_record([&topic.to_string(), term, &format!("{weight}")])
                .map_err(write_err(&path))?;
        }
    }
    w.flush().map_err(|e| Error::io(&path, e))?;

    let path = dir.join("projection.bin");
    let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(&path, e);
    w.write_all(PROJECTION_MAGIC).map_err(io)?;
    w.write_all(&[match model.strategy {
        ClusterStrategy::Dbscan => 0u8,
        ClusterStrategy::Kmeans => 1u8,
    }])
    .map_err(io)?;
    match model.outlier_radius {
        Some(r) => {
            w.write_all(&[1u8]).map_err(io)?;
            w.write_all(&r.to_le_bytes()).map_err(io)?;
        }
        None => {
            w.write_all(&[0u8]).map_err(io)?;
            w.write_all(&0f64.to_le_bytes()).map_err(io)?;
        }
    }
    let dims = [
        model.pca.input_dim() as u32,
        model.pca.output_dim() as u32,
        model.n_topics() as u32,
    ];
    for d in dims {
        w.write_all(&d.to_le_bytes()).map_err(io)?;
    }
    for v in &model.pca.mean {
        w.write_all(&v.to_le_bytes()).map_err(io)?;
    }
    for v in model.pca.components.as_slice() {
        w.write_all(&v.to_le_bytes()).map_err(io)?;
    }
    for v in &model.pca.explained_variance {
        w.write_all(&v.to_le_bytes()).map_err(io)?;
    }
    for v in &model.pca.explained_variance_ratio {
        w.write_all(&v.to_le_bytes()).map_err(io)?;
    }
    for v in model.centroids.as_slice() {
        w.write_all(&v.to_le_bytes()).map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn load_model(dir: &Path) -> Result<TopicModel> {
    let read_csv = |name: &str| -> Result<Vec<csv::StringRecord>> {
        let path = dir.join(name);
        let mut reader = csv::Reader::from_path(&path).map_err(|e| Error::MalformedFile {
            what: "topic-model",
            path: path.clone(),
            reason: e.to_string(),
        })?;
        reader
            .records()
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::MalformedFile {
                what: "topic-model",
                path,
                reason: e.to_string(),
            })
    };
    let malformed = |name: &str, reason: String| Error::MalformedFile {
        what: "topic-model",
        path: dir.join(name),
        reason,
    };

    let mut assignments = Vec::new();
    for rec in read_csv("assignments.csv")? {
        let id = rec.get(0).unwrap_or("").to_string();
        let topic: i32 = rec
            .get(1)
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| malformed("assignments.csv", format!("bad row {rec:?}")))?;
        assignments.push((id, topic));
    }

    let mut labels = Vec::new();
    let mut sizes = Vec::new();
    for rec in read_csv("labels.csv")? {
        let topic: usize = rec
            .get(0)
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| malformed("labels.csv", format!("bad row {rec:?}")))?;
        if topic != labels.len() {
            return Err(malformed("labels.csv", "topics out of order".into()));
        }
        labels.push(rec.get(1).unwrap_or("").to_string());
        sizes.push(
            rec.get(2)
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| malformed("labels.csv", format!("bad row {rec:?}")))?,
        );
    }

    let mut rows: BTreeMap<i32, Vec<(String, f64)>> = BTreeMap::new();
    for rec in read_csv("ctfidf.csv")? {
        let topic: i32 = rec
            .get(0)
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| malformed("ctfidf.csv", format!("bad row {rec:?}")))?;
        let term = rec.get(1).unwrap_or("").to_string();
        let weight: f64 = rec
            .get(2)
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| malformed("ctfidf.csv", format!("bad row {rec:?}")))?;
        rows.entry(topic).or_default().push((term, weight));
    }
    let scores = Ctfidf::from_rows(rows);

    let path = dir.join("projection.bin");
    let file = File::open(&path).map_err(|e| Error::io(&path, e))?;
    let mut r = BufReader::new(file);
    let bad = |reason: &str| Error::MalformedFile {
        what: "topic-model",
        path: path.clone(),
        reason: reason.to_string(),
    };
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(|e| Error::io(&path, e))?;
    if &magic != PROJECTION_MAGIC {
        return Err(bad("bad magic"));
    }
    let mut byte = [0u8; 1];
    r.read_exact(&mut byte).map_err(|e| Error::io(&path, e))?;
    let strategy = match byte[0] {
        0 => ClusterStrategy::Dbscan,
        1 => ClusterStrategy::Kmeans,
        _ => return Err(bad("bad strategy byte")),
    };
    r.read_exact(&mut byte).map_err(|e| Error::io(&path, e))?;
    let has_radius = byte[0] == 1;
    let mut f64buf = [0u8; 8];
    let mut read_f64 = |r: &mut BufReader<File>| -> Result<f64> {
        r.read_exact(&mut f64buf).map_err(|e| Error::io(&path, e))?;
        Ok(f64::from_le_bytes(f64buf))
    };
    let radius = read_f64(&mut r)?;
    let outlier_radius = if has_radius { Some(radius) } else { None };
    let mut u32buf = [0u8; 4];
    let mut read_u32 = |r: &mut BufReader<File>| -> Result<u32> {
        r.read_exact(&mut u32buf).map_err(|e| Error::io(&path, e))?;
        Ok(u32::from_le_bytes(u32buf))
    };
    let input_dim = read_u32(&mut r)? as usize;
    let target_dim = read_u32(&mut r)? as usize;
    let n_topics = read_u32(&mut r)? as usize;
    let read_vec = |r: &mut BufReader<File>, n: usize| -> Result<Vec<f64>> {
        let mut buf = [0u8; 8];
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            r.read_exact(&mut buf).map_err(|e| Error::io(&path, e))?;
            out.push(f64::from_le_bytes(buf));
        }
        Ok(out)
    };
    let mean = read_vec(&mut r, input_dim)?;
    let components = Matrix::from_flat(target_dim, input_dim, read_vec(&mut r, target_dim * input_dim)?);
    let explained_variance = read_vec(&mut r, target_dim)?;
    let explained_variance_ratio = read_vec(&mut r, target_dim)?;
    let centroids = Matrix::from_flat(n_topics, target_dim, read_vec(&mut r, n_topics * target_dim)?);
    if labels.len() != n_topics {
        return Err(bad("labels.csv disagrees with projection.bin on topic count"));
    }
    Ok(TopicModel {
        pca: Pca {
            mean,
            components,
            explained_variance,
            explained_variance_ratio,
        },
        strategy,
        centroids,
        outlier_radius,
        assignments,
        sizes,
        labels,
        ctfidf: scores,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::SongRecord;

    fn record(id: &str, genre: Genre, year: Option<i32>) -> SongRecord {
        SongRecord {
            id: id.to_string(),
            title: String::new(),
            artist: String::new(),
            genre_raw: genre.to_string(),
            genre,
            year,
            lyrics: "x".to_string(),
            language: "en".to_string(),
        }
    }

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_string).collect()
    }

    /// Two planted groups in 6-D plus an outlier, with themed tokens.
    fn planted() -> (DocVectorSet, Vec<Vec<String>>) {
        let mut ids = Vec::new();
        let mut rows = Vec::new();
        let mut docs = Vec::new();
        for i in 0..20 {
            ids.push(format!("a{i}"));
            let jitter = (i as f64) * 0.01;
            rows.push(vec![5.0 + jitter, 5.0, 0.0, 0.0, jitter, 0.1]);
            docs.push(toks("tears heart wish tears heart wish tears"));
        }
        for i in 0..15 {
            ids.push(format!("b{i}"));
            let jitter = (i as f64) * 0.01;
            rows.push(vec![-5.0, -5.0 - jitter, 0.0, jitter, 0.0, -0.1]);
            docs.push(toks("party club dance party club dance party"));
        }
        ids.push("far".to_string());
        rows.push(vec![80.0, -80.0, 40.0, 0.0, 0.0, 0.0]);
        docs.push(toks("lonely distant refrain"));
        let set = DocVectorSet::new(ids, Matrix::from_rows(&rows)).unwrap();
        (set, docs)
    }

    fn fit_planted_dbscan() -> (TopicModel, DocVectorSet, Vec<Vec<String>>) {
        let (set, docs) = planted();
        let params = ClusterParams::Dbscan {
            eps: Some(2.0),
            min_pts: 3,
        };
        let model = fit(&set, &docs, 3, &params, &HashSet::new()).unwrap();
        (model, set, docs)
    }

    #[test]
    fn fit_dbscan_finds_planted_topics() {
        let (model, set, _) = fit_planted_dbscan();
        assert_eq!(model.n_topics(), 2);
        assert_eq!(model.sizes, vec![20, 15]);
        assert_eq!(model.labels[0], "tears_heart_wish");
        assert_eq!(model.labels[1], "party_club_dance");
        assert!(model.outlier_radius.is_some());
        let outliers: Vec<&str> = model
            .assignments
            .iter()
            .filter(|(_, t)| *t < 0)
            .map(|(id, _)| id.as_str())
            .collect();
        assert_eq!(outliers, vec!["far"]);
        assert!((model.outlier_share() - 1.0 / 36.0).abs() < 1e-12);
        assert_eq!(model.assignments.len(), set.len());
    }

    #[test]
    fn fit_kmeans_assigns_everything() {
        let (set, docs) = planted();
        let params = ClusterParams::Kmeans {
            k: 2,
            max_iters: 50,
            seed: 9,
        };
        let model = fit(&set, &docs, 2, &params, &HashSet::new()).unwrap();
        assert_eq!(model.n_topics(), 2);
        assert!(model.outlier_radius.is_none());
        assert!(model.assignments.iter().all(|(_, t)| *t >= 0));
        // kmeans roundtrip: re-assigning the training vectors is exact
        let re = assign_topics(&model, &set).unwrap();
        let fit_labels: Vec<i32> = model.assignments.iter().map(|(_, t)| *t).collect();
        assert_eq!(re, fit_labels);
    }

    #[test]
    fn assign_topics_respects_radius_and_ties() {
        let (model, set, _) = fit_planted_dbscan();
        let re = assign_topics(&model, &set).unwrap();
        // members keep their topic unless beyond the 95th-percentile radius,
        // which re-flags the farthest ~5% of the training docs
        assert!(re[..20].iter().all(|&t| t == 0 || t == -1));
        assert!(re[20..35].iter().all(|&t| t == 1 || t == -1));
        assert!(re[..35].iter().filter(|&&t| t == -1).count() <= 2);
        assert_eq!(re[35], -1);

        // hand-built model with equidistant centroids: lower id wins
        let tie = TopicModel {
            pca: Pca {
                mean: vec![0.0, 0.0],
                components: Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]),
                explained_variance: vec![1.0, 1.0],
                explained_variance_ratio: vec![0.5, 0.5],
            },
            strategy: ClusterStrategy::Kmeans,
            centroids: Matrix::from_rows(&[vec![1.0, 0.0], vec![-1.0, 0.0]]),
            outlier_radius: None,
            assignments: vec![],
            sizes: vec![1, 1],
            labels: vec!["a".into(), "b".into()],
            ctfidf: Ctfidf::from_rows(BTreeMap::new()),
        };
        let probe = DocVectorSet::new(
            vec!["p".into()],
            Matrix::from_rows(&[vec![0.0, 7.0]]),
        )
        .unwrap();
        assert_eq!(assign_topics(&tie, &probe).unwrap(), vec![0]);
    }

    #[test]
    fn assign_topics_dimension_mismatch() {
        let (model, _, _) = fit_planted_dbscan();
        let probe =
            DocVectorSet::new(vec!["p".into()], Matrix::from_rows(&[vec![1.0, 2.0]])).unwrap();
        assert!(matches!(
            assign_topics(&model, &probe),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn doc_vectors_skip_oov_docs() {
        let emb = EmbeddingMatrix::new(
            vec!["known".into()],
            Matrix::from_rows(&[vec![1.0, 2.0]]),
        )
        .unwrap();
        let ids = vec!["d1".to_string(), "d2".to_string()];
        let docs = vec![toks("known known"), toks("unknown words")];
        let set = DocVectorSet::from_tokenized(&ids, &docs, &emb).unwrap();
        assert_eq!(set.doc_ids, vec!["d1"]);
        assert_eq!(set.skipped, vec!["d2"]);
        assert_eq!(set.vectors.row(0), &[1.0, 2.0]);
    }

    #[test]
    fn tsv_roundtrip_and_validation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vecs.tsv");
        let set = DocVectorSet::new(
            vec!["a".into(), "b".into()],
            Matrix::from_rows(&[vec![0.1, -1.0 / 3.0], vec![2.0, 1e-16]]),
        )
        .unwrap();
        set.save_tsv(&path).unwrap();
        let loaded = DocVectorSet::load_tsv(&path).unwrap();
        assert_eq!(loaded.doc_ids, set.doc_ids);
        assert_eq!(loaded.vectors.as_slice(), set.vectors.as_slice());

        let bad = dir.path().join("bad.tsv");
        std::fs::write(&bad, "2 2\na\t1.0 2.0\nb\t3.0\n").unwrap();
        assert!(matches!(
            DocVectorSet::load_tsv(&bad),
            Err(Error::MalformedFile { .. })
        ));
    }

    #[test]
    fn time_matrix_single_bin_and_empty() {
        let corpus = Corpus::from_records(vec![
            record("a", Genre::Pop, Some(1995)),
            record("b", Genre::Pop, Some(1995)),
            record("c", Genre::Rap, None),
        ])
        .unwrap();
        let assignments = vec![
            ("a".to_string(), 0),
            ("b".to_string(), 0),
            ("c".to_string(), 0),
        ];
        let tm = topics_over_time(&assignments, &corpus).unwrap();
        assert_eq!(tm.cells, vec![(Decade(1990), 0, 2)]);
        assert_eq!(tm.undated, 1);
        let empty = topics_over_time(&[], &corpus).unwrap();
        assert!(empty.cells.is_empty());
        assert_eq!(empty.undated, 0);
    }

    #[test]
    fn time_matrix_matches_recount() {
        let mut records = Vec::new();
        let mut assignments = Vec::new();
        for i in 0..50 {
            let year = 1960 + (i * 7) % 60;
            let id = format!("d{i}");
            records.push(record(&id, Genre::Rock, Some(year)));
            let topic = if i % 11 == 0 { -1 } else { (i % 3) as i32 };
            assignments.push((id, topic));
        }
        let corpus = Corpus::from_records(records).unwrap();
        let tm = topics_over_time(&assignments, &corpus).unwrap();
        let mut naive: BTreeMap<(i32, i32), u64> = BTreeMap::new();
        for (i, (_, topic)) in assignments.iter().enumerate() {
            if *topic >= 0 {
                let year = 1960 + (i as i32 * 7) % 60;
                *naive.entry((year / 10 * 10, *topic)).or_default() += 1;
            }
        }
        assert_eq!(tm.cells.len(), naive.len());
        for (decade, topic, n) in &tm.cells {
            assert_eq!(naive[&(decade.0, *topic)], *n);
        }
    }

    #[test]
    fn genre_composition_examples() {
        let corpus = Corpus::from_records(vec![
            record("r1", Genre::Rap, None),
            record("r2", Genre::Rap, None),
            record("r3", Genre::Rap, None),
            record("r4", Genre::Rap, None),
            record("r5", Genre::Rap, None),
            record("r6", Genre::Rap, None),
            record("r7", Genre::Rap, None),
            record("r8", Genre::Rap, None),
            record("r9", Genre::Rap, None),
            record("p1", Genre::Pop, None),
        ])
        .unwrap();
        let all_rap: Vec<(String, i32)> =
            (1..=9).map(|i| (format!("r{i}"), 0)).collect();
        let comp = genre_composition(&all_rap, &corpus).unwrap();
        assert_eq!(comp, vec![(0, Genre::Rap, 100.0)]);

        let mut mixed = all_rap.clone();
        mixed.push(("p1".to_string(), 0));
        let comp = genre_composition(&mixed, &corpus).unwrap();
        assert_eq!(comp.len(), 2);
        assert_eq!(comp[0], (0, Genre::Pop, 10.0));
        assert_eq!(comp[1], (0, Genre::Rap, 90.0));
        let sum: f64 = comp.iter().map(|(_, _, p)| p).sum();
        assert!((sum - 100.0).abs() < 1e-9);
    }

    #[test]
    fn model_persistence_roundtrip() {
        let (model, set, _) = fit_planted_dbscan();
        let dir = tempfile::tempdir().unwrap();
        let model_dir = dir.path().join("model");
        save_model(&model, &model_dir).unwrap();
        let loaded = load_model(&model_dir).unwrap();
        assert_eq!(loaded.labels, model.labels);
        assert_eq!(loaded.sizes, model.sizes);
        assert_eq!(loaded.assignments, model.assignments);
        assert_eq!(loaded.outlier_radius, model.outlier_radius);
        assert_eq!(loaded.centroids.as_slice(), model.centroids.as_slice());
        assert_eq!(loaded.pca.mean, model.pca.mean);
        assert_eq!(
            loaded.ctfidf.row(0).unwrap(),
            model.ctfidf.row(0).unwrap()
        );
        // the reloaded model predicts identically
        assert_eq!(
            assign_topics(&loaded, &set).unwrap(),
            assign_topics(&model, &set).unwrap()
        );
    }
}
