//! Python bindings over the biasbeam core: tokenization, embedding
//! training and lookup, topic fitting, and the SC-WEAT statistics.
//! Library errors surface as ValueError with the original message.

use std::collections::HashSet;
use std::path::PathBuf;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use biasbeam::embed::{train_word2vec, EmbeddingMatrix, TrainParams};
use biasbeam::matrix::Matrix;
use biasbeam::text::default_stopwords;
use biasbeam::topics::{fit, ClusterParams, DocVectorSet};
use biasbeam::weat::{AttributePair, WordSet};

fn err(e: biasbeam::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// A trained embedding: token lookup, cosine geometry, persistence.
#[pyclass(frozen)]
struct Embedding {
    inner: EmbeddingMatrix,
}

#[pymethods]
impl Embedding {
    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __contains__(&self, token: &str) -> bool {
        self.inner.get(token).is_some()
    }

    fn tokens(&self) -> Vec<String> {
        self.inner.tokens().to_vec()
    }

    fn vector(&self, token: &str) -> PyResult<Vec<f64>> {
        self.inner.vector_of(token).map(<[f64]>::to_vec).map_err(err)
    }

    fn cosine(&self, a: &str, b: &str) -> PyResult<f64> {
        let va = self.inner.vector_of(a).map_err(err)?;
        let vb = self.inner.vector_of(b).map_err(err)?;
        biasbeam::embed::cosine(va, vb).map_err(err)
    }

    /// k nearest tokens by cosine, the query itself excluded.
    fn nearest(&self, token: &str, k: usize) -> PyResult<Vec<(String, f64)>> {
        self.inner.nearest_neighbors(token, k).map_err(err)
    }

    /// Mean of the member token vectors; None when no token is in vocabulary.
    fn doc_vector(&self, tokens: Vec<String>) -> Option<Vec<f64>> {
        biasbeam::embed::doc_embed(&self.inner, &tokens)
    }

    /// Write the classic word-vector text format.
    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save_text(&path).map_err(err)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Embedding> {
        EmbeddingMatrix::load_text(&path)
            .map(|inner| Embedding { inner })
            .map_err(err)
    }
}

/// Lowercase NFKC word tokens, apostrophes kept inside words.
#[pyfunction]
fn tokenize(text: &str) -> Vec<String> {
    biasbeam::text::tokenize(text)
}

/// Train skip-gram negative-sampling vectors over tokenized documents.
/// Returns (embedding, per_epoch_mean_loss). workers=1 with a fixed seed
/// is bit-reproducible.
#[pyfunction]
#[pyo3(signature = (docs, *, dim=100, window=5, negatives=5, epochs=5,
       learning_rate=0.025, subsample=1e-3, min_count=5, workers=1, seed=42))]
#[allow(clippy::too_many_arguments)]
fn train_embedding(
    docs: Vec<Vec<String>>,
    dim: usize,
    window: usize,
    negatives: usize,
    epochs: usize,
    learning_rate: f64,
    subsample: f64,
    min_count: u32,
    workers: usize,
    seed: u64,
) -> PyResult<(Embedding, Vec<f64>)> {
    let params = TrainParams {
        dim,
        window,
        negatives,
        epochs,
        learning_rate,
        subsample,
        min_count,
        workers,
        seed,
    };
    let trained = train_word2vec(&docs, &params).map_err(err)?;
    Ok((Embedding { inner: trained.embedding }, trained.losses))
}

fn word_sets(
    targets: Vec<String>,
    male: Vec<String>,
    female: Vec<String>,
) -> PyResult<(WordSet, AttributePair)> {
    let target = WordSet::new("targets", targets).map_err(err)?;
    let attrs = AttributePair::new(
        WordSet::new("male", male).map_err(err)?,
        WordSet::new("female", female).map_err(err)?,
    )
    .map_err(err)?;
    Ok((target, attrs))
}

/// SC-WEAT sum over the target words present in vocabulary.
#[pyfunction]
fn scweat_sum(
    emb: &Embedding,
    targets: Vec<String>,
    male: Vec<String>,
    female: Vec<String>,
) -> PyResult<f64> {
    let (target, attrs) = word_sets(targets, male, female)?;
    biasbeam::weat::scweat_sum(&target, &attrs, &emb.inner).map_err(err)
}

/// Effect size d; positive values mean association with the male set.
#[pyfunction]
fn effect_size(
    emb: &Embedding,
    targets: Vec<String>,
    male: Vec<String>,
    female: Vec<String>,
) -> PyResult<f64> {
    let (target, attrs) = word_sets(targets, male, female)?;
    biasbeam::weat::effect_size(&target, &attrs, &emb.inner).map_err(err)
}

/// Permutation p-value; exhaustive when the partition count is small,
/// seeded Monte Carlo otherwise.
#[pyfunction]
#[pyo3(signature = (emb, targets, male, female, *, iterations=10_000, seed=42))]
fn permutation_pvalue(
    emb: &Embedding,
    targets: Vec<String>,
    male: Vec<String>,
    female: Vec<String>,
    iterations: u64,
    seed: u64,
) -> PyResult<f64> {
    let (target, attrs) = word_sets(targets, male, female)?;
    biasbeam::weat::permutation_pvalue(&target, &attrs, &emb.inner, iterations, seed)
        .map_err(err)
}

/// Reduce, cluster, and label document vectors. `k` selects k-means;
/// without it DBSCAN runs with `eps` (None = auto) and `min_pts`.
/// Returns (assignments, labels, top_terms) where assignments align with
/// the input rows, -1 marks outliers, and top_terms holds per-topic
/// (term, weight) pairs in rank order.
#[pyfunction]
#[pyo3(signature = (vectors, docs, *, target_dim=5, k=None, eps=None, min_pts=4, seed=42))]
#[allow(clippy::type_complexity)]
fn fit_topics(
    vectors: Vec<Vec<f64>>,
    docs: Vec<Vec<String>>,
    target_dim: usize,
    k: Option<usize>,
    eps: Option<f64>,
    min_pts: usize,
    seed: u64,
) -> PyResult<(Vec<i32>, Vec<String>, Vec<Vec<(String, f64)>>)> {
    let doc_ids: Vec<String> = (0..vectors.len()).map(|i| i.to_string()).collect();
    let set = DocVectorSet::new(doc_ids, Matrix::from_rows(&vectors)).map_err(err)?;
    let params = match k {
        Some(k) => ClusterParams::Kmeans { k, max_iters: 100, seed },
        None => ClusterParams::Dbscan { eps, min_pts },
    };
    let stopwords: HashSet<String> = default_stopwords();
    let model = fit(&set, &docs, target_dim, &params, &stopwords).map_err(err)?;
    let assignments: Vec<i32> = model.assignments.iter().map(|(_, t)| *t).collect();
    let terms: Vec<Vec<(String, f64)>> = (0..model.n_topics() as i32)
        .map(|t| model.ctfidf.row(t).map(<[_]>::to_vec).unwrap_or_default())
        .collect();
    Ok((assignments, model.labels.clone(), terms))
}

#[pymodule]
fn biasbeam_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Embedding>()?;
    m.add_function(wrap_pyfunction!(tokenize, m)?)?;
    m.add_function(wrap_pyfunction!(train_embedding, m)?)?;
    m.add_function(wrap_pyfunction!(scweat_sum, m)?)?;
    m.add_function(wrap_pyfunction!(effect_size, m)?)?;
    m.add_function(wrap_pyfunction!(permutation_pvalue, m)?)?;
    m.add_function(wrap_pyfunction!(fit_topics, m)?)?;
    Ok(())
}
