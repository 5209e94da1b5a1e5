//! Word embeddings: storage, similarity, persistence, and training.

mod train;

pub use train::{
    pair_gradients, pair_loss, subsample_keep_prob, train_word2vec, NegativeSamplingTable,
    PairGradients, TrainedEmbedding,
};

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{self, Matrix};

/// Skip-gram training hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainParams {
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub subsample: f64,
    pub min_count: u32,
    pub workers: usize,
    pub seed: u64,
}

impl Default for TrainParams {
    fn default() -> Self {
        TrainParams {
            dim: 100,
            window: 5,
            negatives: 5,
            epochs: 5,
            learning_rate: 0.025,
            subsample: 1e-3,
            min_count: 5,
            workers: 1,
            seed: 42,
        }
    }
}

impl TrainParams {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::Config("embedding dim must be >= 1".into()));
        }
        if self.window == 0 {
            return Err(Error::Config("window must be >= 1".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        if !self.subsample.is_finite() || self.subsample < 0.0 {
            return Err(Error::Config("subsample must be >= 0".into()));
        }
        if self.workers == 0 {
            return Err(Error::Config("workers must be >= 1".into()));
        }
        Ok(())
    }
}

/// Token-indexed dense vectors. Rows follow vocabulary id order.
#[derive(Debug, Clone)]
pub struct EmbeddingMatrix {
    tokens: Vec<String>,
    index: HashMap<String, u32>,
    vectors: Matrix,
}

impl EmbeddingMatrix {
    pub fn new(tokens: Vec<String>, vectors: Matrix) -> Result<Self> {
        if tokens.len() != vectors.n_rows() {
            return Err(Error::DimensionMismatch {
                left: tokens.len(),
                right: vectors.n_rows(),
            });
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i as u32).is_some() {
                return Err(Error::Data(format!("duplicate embedding token {t:?}")));
            }
        }
        Ok(EmbeddingMatrix {
            tokens,
            index,
            vectors,
        })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.vectors.n_cols()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn token(&self, id: u32) -> &str {
        &self.tokens[id as usize]
    }

    pub fn get(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    pub fn vector(&self, id: u32) -> &[f64] {
        self.vectors.row(id as usize)
    }

    pub fn vector_of(&self, token: &str) -> Result<&[f64]> {
        self.get(token)
            .map(|id| self.vector(id))
            .ok_or_else(|| Error::OutOfVocabulary(token.to_string()))
    }

    /// The `k` most cosine-similar tokens to `token`, descending, excluding
    /// the token itself. Ties break toward the lower vocabulary id.
    pub fn nearest_neighbors(&self, token: &str, k: usize) -> Result<Vec<(String, f64)>> {
        let query_id = self
            .get(token)
            .ok_or_else(|| Error::OutOfVocabulary(token.to_string()))?;
        let query = self.vector(query_id);
        let mut sims: Vec<(u32, f64)> = Vec::with_capacity(self.len().saturating_sub(1));
        for id in 0..self.len() as u32 {
            if id == query_id {
                continue;
            }
            sims.push((id, cosine(query, self.vector(id))?));
        }
        sims.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
        sims.truncate(k);
        Ok(sims
            .into_iter()
            .map(|(id, s)| (self.token(id).to_string(), s))
            .collect())
    }

    /// Write the text format: a `"<vocab> <dim>"` header line, then one
    /// `token v1 .. vdim` line per token. Values use shortest-roundtrip
    /// decimal, so load/save is bit-exact.
    pub fn save_text(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let write = |w: &mut BufWriter<File>, s: &str| -> Result<()> {
            w.write_all(s.as_bytes()).map_err(|e| Error::io(path, e))
        };
        write(&mut w, &format!("{} {}\n", self.len(), self.dim()))?;
        for id in 0..self.len() as u32 {
            let mut line = String::with_capacity(self.dim() * 20);
            line.push_str(self.token(id));
            for v in self.vector(id) {
                line.push(' ');
                line.push_str(&format!("{v}"));
            }
            line.push('\n');
            write(&mut w, &line)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load_text(path: &Path) -> Result<Self> {
        let malformed = |reason: String| Error::MalformedFile {
            what: "embedding",
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
        let parse_count = |s: Option<&str>| -> Result<usize> {
            s.and_then(|v| v.parse().ok())
                .ok_or_else(|| malformed(format!("bad header {header:?}")))
        };
        let vocab = parse_count(parts.next())?;
        let dim = parse_count(parts.next())?;
        let mut tokens = Vec::with_capacity(vocab);
        let mut data = Vec::with_capacity(vocab * dim);
        for (lineno, line) in lines.enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split_whitespace();
            let token = fields
                .next()
                .ok_or_else(|| malformed(format!("line {}: missing token", lineno + 2)))?;
            tokens.push(token.to_string());
            let start = data.len();
            for field in fields {
                let v: f64 = field.parse().map_err(|_| {
                    malformed(format!("line {}: bad float {field:?}", lineno + 2))
                })?;
                data.push(v);
            }
            if data.len() - start != dim {
                return Err(malformed(format!(
                    "line {}: expected {dim} values, got {}",
                    lineno + 2,
                    data.len() - start
                )));
            }
        }
        if tokens.len() != vocab {
            return Err(malformed(format!(
                "expected {vocab} rows, got {}",
                tokens.len()
            )));
        }
        EmbeddingMatrix::new(tokens, Matrix::from_flat(vocab, dim, data))
    }
}

/// Cosine similarity. Errors on zero-norm inputs or mismatched dimensions.
pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let (na, nb) = (matrix::norm(a), matrix::norm(b));
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok(matrix::dot(a, b) / (na * nb))
}

/// Mean of the in-vocabulary token vectors, or `None` when no token is known.
pub fn doc_embed(emb: &EmbeddingMatrix, tokens: &[String]) -> Option<Vec<f64>> {
    let mut sum = vec![0.0; emb.dim()];
    let mut n = 0u64;
    for token in tokens {
        if let Some(id) = emb.get(token) {
            for (s, v) in sum.iter_mut().zip(emb.vector(id)) {
                *s += v;
            }
            n += 1;
        }
    }
    if n == 0 {
        return None;
    }
    for s in &mut sum {
        *s /= n as f64;
    }
    Some(sum)
}

const CHECKPOINT_MAGIC: &[u8; 8] = b"BBEMCK01";

/// Save input and output matrices plus tokens as a binary checkpoint.
pub fn save_checkpoint(trained: &TrainedEmbedding, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    w.write_all(CHECKPOINT_MAGIC).map_err(io)?;
    let emb = &trained.embedding;
    w.write_all(&(emb.len() as u32).to_le_bytes()).map_err(io)?;
    w.write_all(&(emb.dim() as u32).to_le_bytes()).map_err(io)?;
    for token in emb.tokens() {
        let bytes = token.as_bytes();
        w.write_all(&(bytes.len() as u32).to_le_bytes()).map_err(io)?;
        w.write_all(bytes).map_err(io)?;
    }
    for id in 0..emb.len() as u32 {
        for v in emb.vector(id) {
            w.write_all(&v.to_le_bytes()).map_err(io)?;
        }
    }
    for r in 0..trained.output.n_rows() {
        for v in trained.output.row(r) {
            w.write_all(&v.to_le_bytes()).map_err(io)?;
        }
    }
    w.flush().map_err(io)
}

pub fn load_checkpoint(path: &Path) -> Result<TrainedEmbedding> {
    let malformed = |reason: &str| Error::MalformedFile {
        what: "checkpoint",
        path: path.to_path_buf(),
        reason: reason.to_string(),
    };
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(|e| Error::io(path, e))?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(malformed("bad magic"));
    }
    let mut u32buf = [0u8; 4];
    let mut read_u32 = |r: &mut BufReader<File>| -> Result<u32> {
        r.read_exact(&mut u32buf).map_err(|e| Error::io(path, e))?;
        Ok(u32::from_le_bytes(u32buf))
    };
    let vocab = read_u32(&mut r)? as usize;
    let dim = read_u32(&mut r)? as usize;
    let mut tokens = Vec::with_capacity(vocab);
    for _ in 0..vocab {
        let len = read_u32(&mut r)? as usize;
        let mut buf = vec![0u8; len];
        r.read_exact(&mut buf).map_err(|e| Error::io(path, e))?;
        tokens.push(String::from_utf8(buf).map_err(|_| malformed("token not utf-8"))?);
    }
    let read_matrix = |r: &mut BufReader<File>| -> Result<Matrix> {
        let mut data = vec![0.0f64; vocab * dim];
        let mut buf = [0u8; 8];
        for v in &mut data {
            r.read_exact(&mut buf).map_err(|e| Error::io(path, e))?;
            *v = f64::from_le_bytes(buf);
        }
        Ok(Matrix::from_flat(vocab, dim, data))
    };
    let input = read_matrix(&mut r)?;
    let output = read_matrix(&mut r)?;
    Ok(TrainedEmbedding {
        embedding: EmbeddingMatrix::new(tokens, input)?,
        output,
        losses: Vec::new(),
    })
}
