//! Skip-gram negative-sampling trainer.
//!
//! Follows the reference word2vec formulation: dynamic window radius drawn
//! uniformly from `1..=window`, unigram^0.75 negative table, frequent-word
//! subsampling, and a linearly decaying learning rate floored at 1e-4 of its
//! initial value. Weights live in atomic bit-cells so `workers > 1` can run
//! lock-free hogwild updates; with `workers = 1` training is bit-for-bit
//! deterministic in the seed.

use std::sync::atomic::{AtomicU64, Ordering::Relaxed};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::embed::{EmbeddingMatrix, TrainParams};
use crate::error::{Error, Result};
use crate::matrix::{dot, Matrix};
use crate::text::{build_vocab, Vocabulary};

/// Training output: input vectors (the embedding), output vectors, and the
/// mean pair loss per epoch.
#[derive(Debug)]
pub struct TrainedEmbedding {
    pub embedding: EmbeddingMatrix,
    pub output: Matrix,
    pub losses: Vec<f64>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// `ln(1 + e^x)` without overflow for large `x`.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Loss of one training example:
/// `-ln σ(u_pos·v) - Σ_neg ln σ(-u_neg·v)`.
pub fn pair_loss(input: &[f64], positive: &[f64], negatives: &[Vec<f64>]) -> f64 {
    let mut loss = softplus(-dot(input, positive));
    for neg in negatives {
        loss += softplus(dot(input, neg));
    }
    loss
}

/// Analytic gradients of [`pair_loss`].
#[derive(Debug, Clone)]
pub struct PairGradients {
    pub input: Vec<f64>,
    pub positive: Vec<f64>,
    pub negatives: Vec<Vec<f64>>,
}

pub fn pair_gradients(input: &[f64], positive: &[f64], negatives: &[Vec<f64>]) -> PairGradients {
    let sp = sigmoid(dot(input, positive));
    let mut g_input: Vec<f64> = positive.iter().map(|&u| (sp - 1.0) * u).collect();
    let g_positive: Vec<f64> = input.iter().map(|&v| (sp - 1.0) * v).collect();
    let mut g_negatives = Vec::with_capacity(negatives.len());
    for neg in negatives {
        let sn = sigmoid(dot(input, neg));
        for (gi, &n) in g_input.iter_mut().zip(neg) {
            *gi += sn * n;
        }
        g_negatives.push(input.iter().map(|&v| sn * v).collect());
    }
    PairGradients {
        input: g_input,
        positive: g_positive,
        negatives: g_negatives,
    }
}

/// Probability of keeping one occurrence of a token with `count` occurrences
/// out of `total`, at subsample threshold `threshold`. `threshold <= 0`
/// disables subsampling.
pub fn subsample_keep_prob(count: u64, total: u64, threshold: f64) -> f64 {
    if threshold <= 0.0 {
        return 1.0;
    }
    let k = threshold * total as f64;
    let f = count as f64;
    if f <= k {
        1.0
    } else {
        ((k / f).sqrt() + k / f).min(1.0)
    }
}

/// Unigram table raised to the 3/4 power, sampled by inverse CDF.
#[derive(Debug, Clone)]
pub struct NegativeSamplingTable {
    cumulative: Vec<f64>,
    total: f64,
}

impl NegativeSamplingTable {
    pub fn new(counts: &[u64]) -> Self {
        let mut cumulative = Vec::with_capacity(counts.len());
        let mut total = 0.0;
        for &c in counts {
            total += (c as f64).powf(0.75);
            cumulative.push(total);
        }
        NegativeSamplingTable { cumulative, total }
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> u32 {
        let x = rng.random::<f64>() * self.total;
        let idx = self.cumulative.partition_point(|&c| c <= x);
        idx.min(self.cumulative.len() - 1) as u32
    }
}

/// f64 weights stored as atomic bit patterns; hogwild updates are plain
/// load-add-store races by design.
struct AtomicMatrix {
    cols: usize,
    data: Vec<AtomicU64>,
}

impl AtomicMatrix {
    fn from_matrix(m: &Matrix) -> Self {
        AtomicMatrix {
            cols: m.n_cols(),
            data: m.as_slice().iter().map(|v| AtomicU64::new(v.to_bits())).collect(),
        }
    }

    fn zeros(rows: usize, cols: usize) -> Self {
        AtomicMatrix {
            cols,
            data: (0..rows * cols).map(|_| AtomicU64::new(0.0f64.to_bits())).collect(),
        }
    }

    fn read_row_into(&self, row: usize, buf: &mut [f64]) {
        let base = row * self.cols;
        for (d, v) in buf.iter_mut().enumerate() {
            *v = f64::from_bits(self.data[base + d].load(Relaxed));
        }
    }

    fn add(&self, row: usize, col: usize, delta: f64) {
        let cell = &self.data[row * self.cols + col];
        let cur = f64::from_bits(cell.load(Relaxed));
        cell.store((cur + delta).to_bits(), Relaxed);
    }

    fn all_finite(&self) -> bool {
        self.data
            .iter()
            .all(|v| f64::from_bits(v.load(Relaxed)).is_finite())
    }

    fn to_matrix(&self) -> Matrix {
        let data: Vec<f64> = self
            .data
            .iter()
            .map(|v| f64::from_bits(v.load(Relaxed)))
            .collect();
        Matrix::from_flat(self.data.len() / self.cols, self.cols, data)
    }
}

/// Input weights start uniform in `[-0.5/dim, 0.5/dim)`, output weights at
/// zero, both filled in row-major id order from the seed.
fn init_input(vocab: usize, dim: usize, seed: u64) -> Matrix {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let data: Vec<f64> = (0..vocab * dim)
        .map(|_| (rng.random::<f64>() - 0.5) / dim as f64)
        .collect();
    Matrix::from_flat(vocab, dim, data)
}

struct Scratch {
    v: Vec<f64>,
    u: Vec<f64>,
    neu1e: Vec<f64>,
}

/// One skip-gram example: update `input`'s vector against the positive target
/// and freshly drawn negatives. Returns the example loss.
fn train_pair<R: Rng>(
    syn0: &AtomicMatrix,
    syn1: &AtomicMatrix,
    input: usize,
    target: usize,
    negatives: usize,
    table: &NegativeSamplingTable,
    alpha: f64,
    rng: &mut R,
    s: &mut Scratch,
) -> f64 {
    let dim = s.v.len();
    syn0.read_row_into(input, &mut s.v);
    s.neu1e.fill(0.0);
    let mut loss = 0.0;
    for k in 0..=negatives {
        let (out, label) = if k == 0 {
            (target, 1.0)
        } else {
            let neg = table.sample(rng) as usize;
            if neg == target {
                continue;
            }
            (neg, 0.0)
        };
        syn1.read_row_into(out, &mut s.u);
        let f = dot(&s.v, &s.u);
        let g = (label - sigmoid(f)) * alpha;
        for d in 0..dim {
            s.neu1e[d] += g * s.u[d];
        }
        for d in 0..dim {
            syn1.add(out, d, g * s.v[d]);
        }
        loss += if label == 1.0 { softplus(-f) } else { softplus(f) };
    }
    for d in 0..dim {
        syn0.add(input, d, s.neu1e[d]);
    }
    loss
}

#[allow(clippy::too_many_arguments)]
fn run_worker(
    sentences: &[Vec<u32>],
    syn0: &AtomicMatrix,
    syn1: &AtomicMatrix,
    table: &NegativeSamplingTable,
    keep: &[f64],
    params: &TrainParams,
    processed: &AtomicU64,
    lr_denom: f64,
    mut rng: ChaCha12Rng,
) -> (f64, u64) {
    let min_alpha = params.learning_rate * 1e-4;
    let mut scratch = Scratch {
        v: vec![0.0; params.dim],
        u: vec![0.0; params.dim],
        neu1e: vec![0.0; params.dim],
    };
    let subsampling = params.subsample > 0.0;
    let mut loss_sum = 0.0;
    let mut pairs = 0u64;
    let mut sen: Vec<u32> = Vec::new();
    for ids in sentences {
        let done = processed.fetch_add(ids.len() as u64, Relaxed);
        let alpha = (params.learning_rate * (1.0 - done as f64 / lr_denom)).max(min_alpha);
        sen.clear();
        for &id in ids {
            if !subsampling || rng.random::<f64>() < keep[id as usize] {
                sen.push(id);
            }
        }
        for center in 0..sen.len() {
            let radius = rng.random_range(1..=params.window);
            let lo = center.saturating_sub(radius);
            let hi = (center + radius).min(sen.len() - 1);
            for ctx in lo..=hi {
                if ctx == center {
                    continue;
                }
                loss_sum += train_pair(
                    syn0,
                    syn1,
                    sen[ctx] as usize,
                    sen[center] as usize,
                    params.negatives,
                    table,
                    alpha,
                    &mut rng,
                    &mut scratch,
                );
                pairs += 1;
            }
        }
    }
    (loss_sum, pairs)
}

/// Train embeddings over tokenized documents. Vocabulary is rebuilt from the
/// documents with `params.min_count`.
pub fn train_word2vec(docs: &[Vec<String>], params: &TrainParams) -> Result<TrainedEmbedding> {
    params.validate()?;
    let vocab = build_vocab(docs, params.min_count)?;
    train_encoded(&vocab, docs, params)
}

fn train_encoded(
    vocab: &Vocabulary,
    docs: &[Vec<String>],
    params: &TrainParams,
) -> Result<TrainedEmbedding> {
    let sentences: Vec<Vec<u32>> = docs
        .iter()
        .map(|d| vocab.encode(d))
        .filter(|s| s.len() > 1)
        .collect();
    let keep: Vec<f64> = vocab
        .counts()
        .iter()
        .map(|&c| subsample_keep_prob(c, vocab.total_count(), params.subsample))
        .collect();
    let table = NegativeSamplingTable::new(vocab.counts());
    let syn0 = AtomicMatrix::from_matrix(&init_input(vocab.len(), params.dim, params.seed));
    let syn1 = AtomicMatrix::zeros(vocab.len(), params.dim);
    let total_tokens: u64 = sentences.iter().map(|s| s.len() as u64).sum();
    let lr_denom = (params.epochs as u64 * total_tokens) as f64 + 1.0;
    let processed = AtomicU64::new(0);
    let mut losses = Vec::with_capacity(params.epochs);
    for epoch in 0..params.epochs {
        let chunk = sentences.len().div_ceil(params.workers).max(1);
        let worker_rng = |w: usize| {
            ChaCha12Rng::seed_from_u64(
                params
                    .seed
                    .wrapping_add((epoch as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15))
                    .wrapping_add((w as u64).wrapping_mul(0xd1b5_4a32_d192_ed03)),
            )
        };
        let (loss_sum, pairs) = if params.workers == 1 {
            run_worker(
                &sentences, &syn0, &syn1, &table, &keep, params, &processed, lr_denom,
                worker_rng(0),
            )
        } else {
            std::thread::scope(|scope| {
                let handles: Vec<_> = sentences
                    .chunks(chunk)
                    .enumerate()
                    .map(|(w, part)| {
                        let rng = worker_rng(w);
                        let (syn0, syn1, table, keep, processed) =
                            (&syn0, &syn1, &table, &keep, &processed);
                        scope.spawn(move || {
                            run_worker(
                                part, syn0, syn1, table, keep, params, processed, lr_denom, rng,
                            )
                        })
                    })
                    .collect();
                let mut acc = (0.0, 0u64);
                for h in handles {
                    let (l, p) = h.join().expect("training worker panicked");
                    acc.0 += l;
                    acc.1 += p;
                }
                acc
            })
        };
        let mean = if pairs > 0 { loss_sum / pairs as f64 } else { 0.0 };
        if !mean.is_finite() || !syn0.all_finite() || !syn1.all_finite() {
            return Err(Error::Divergence(epoch));
        }
        losses.push(mean);
    }
    Ok(TrainedEmbedding {
        embedding: EmbeddingMatrix::new(vocab.tokens().to_vec(), syn0.to_matrix())?,
        output: syn1.to_matrix(),
        losses,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigmoid_and_softplus_values() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!((softplus(0.0) - std::f64::consts::LN_2).abs() < 1e-15);
        // softplus(-x) = softplus(x) - x
        assert!((softplus(-0.5) - (softplus(0.5) - 0.5)).abs() < 1e-12);
        assert!(softplus(800.0).is_finite());
        assert!((softplus(800.0) - 800.0).abs() < 1e-12);
    }

    #[test]
    fn keep_prob_known_value() {
        // count=1000, total=10000, t=0.01: k=100, sqrt(0.1)+0.1
        let p = subsample_keep_prob(1000, 10_000, 0.01);
        assert!((p - 0.416_227_766_016_837_94).abs() < 1e-15);
        assert_eq!(subsample_keep_prob(50, 10_000, 0.01), 1.0);
        assert_eq!(subsample_keep_prob(1000, 10_000, 0.0), 1.0);
        assert_eq!(subsample_keep_prob(9999, 10_000, 1.0), 1.0);
    }

    #[test]
    fn negative_table_follows_unigram_power() {
        // counts [8, 1]: weight ratio 8^0.75 : 1, so P(0) ~= 0.8263
        let table = NegativeSamplingTable::new(&[8, 1]);
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let draws = 200_000;
        let zeros = (0..draws).filter(|_| table.sample(&mut rng) == 0).count();
        let freq = zeros as f64 / draws as f64;
        assert!((freq - 0.8263).abs() < 0.01, "freq {freq}");
    }

    #[test]
    fn negative_table_single_token() {
        let table = NegativeSamplingTable::new(&[3]);
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        for _ in 0..100 {
            assert_eq!(table.sample(&mut rng), 0);
        }
    }

    #[test]
    fn pair_gradients_match_finite_difference() {
        let input = vec![0.3, -0.2, 0.5];
        let positive = vec![-0.1, 0.4, 0.2];
        let negatives = vec![vec![0.2, 0.1, -0.3], vec![-0.4, 0.0, 0.1]];
        let grads = pair_gradients(&input, &positive, &negatives);
        let eps = 1e-6;
        let fd = |plus: f64, minus: f64| (plus - minus) / (2.0 * eps);
        for d in 0..3 {
            let mut hi = input.clone();
            let mut lo = input.clone();
            hi[d] += eps;
            lo[d] -= eps;
            let est = fd(
                pair_loss(&hi, &positive, &negatives),
                pair_loss(&lo, &positive, &negatives),
            );
            assert!((grads.input[d] - est).abs() < 1e-8, "input[{d}]");
        }
        for d in 0..3 {
            let mut hi = positive.clone();
            let mut lo = positive.clone();
            hi[d] += eps;
            lo[d] -= eps;
            let est = fd(
                pair_loss(&input, &hi, &negatives),
                pair_loss(&input, &lo, &negatives),
            );
            assert!((grads.positive[d] - est).abs() < 1e-8, "positive[{d}]");
        }
        for (n, neg_grad) in grads.negatives.iter().enumerate() {
            for d in 0..3 {
                let mut hi = negatives.clone();
                let mut lo = negatives.clone();
                hi[n][d] += eps;
                lo[n][d] -= eps;
                let est = fd(pair_loss(&input, &positive, &hi), pair_loss(&input, &positive, &lo));
                assert!((neg_grad[d] - est).abs() < 1e-8, "neg[{n}][{d}]");
            }
        }
    }

    #[test]
    fn train_pair_applies_negative_gradient_step() {
        let syn0 = AtomicMatrix::from_matrix(&Matrix::from_rows(&[
            vec![0.1, -0.2],
            vec![0.0, 0.0],
            vec![0.3, 0.4],
        ]));
        let syn1 = AtomicMatrix::from_matrix(&Matrix::from_rows(&[
            vec![0.5, 0.5],
            vec![-0.5, 0.25],
            vec![0.0, 0.1],
        ]));
        let v0: Vec<f64> = {
            let mut buf = vec![0.0; 2];
            syn0.read_row_into(0, &mut buf);
            buf
        };
        let u1: Vec<f64> = {
            let mut buf = vec![0.0; 2];
            syn1.read_row_into(1, &mut buf);
            buf
        };
        let grads = pair_gradients(&v0, &u1, &[]);
        let expected_loss = pair_loss(&v0, &u1, &[]);
        let alpha = 0.1;
        // negatives=0 keeps the update purely positive-pair
        let table = NegativeSamplingTable::new(&[1, 1, 1]);
        let mut rng = ChaCha12Rng::seed_from_u64(0);
        let mut scratch = Scratch {
            v: vec![0.0; 2],
            u: vec![0.0; 2],
            neu1e: vec![0.0; 2],
        };
        let loss = train_pair(&syn0, &syn1, 0, 1, 0, &table, alpha, &mut rng, &mut scratch);
        assert!((loss - expected_loss).abs() < 1e-15);
        let mut new_v = vec![0.0; 2];
        syn0.read_row_into(0, &mut new_v);
        let mut new_u = vec![0.0; 2];
        syn1.read_row_into(1, &mut new_u);
        for d in 0..2 {
            assert!((new_v[d] - (v0[d] - alpha * grads.input[d])).abs() < 1e-12);
            assert!((new_u[d] - (u1[d] - alpha * grads.positive[d])).abs() < 1e-12);
        }
    }

    fn smoke_docs() -> Vec<Vec<String>> {
        let mut docs = Vec::new();
        for i in 0..60 {
            let line = match i % 3 {
                0 => "red green blue red green blue red green",
                1 => "blue red green blue red green blue red",
                _ => "green blue red green blue red green blue",
            };
            docs.push(line.split_whitespace().map(str::to_string).collect());
        }
        docs
    }

    fn smoke_params() -> TrainParams {
        TrainParams {
            dim: 8,
            window: 2,
            negatives: 3,
            epochs: 2,
            learning_rate: 0.05,
            subsample: 0.0,
            min_count: 1,
            workers: 1,
            seed: 11,
        }
    }

    #[test]
    fn training_is_deterministic_single_worker() {
        let docs = smoke_docs();
        let params = smoke_params();
        let a = train_word2vec(&docs, &params).unwrap();
        let b = train_word2vec(&docs, &params).unwrap();
        assert_eq!(a.losses, b.losses);
        assert_eq!(a.embedding.len(), 3);
        for id in 0..a.embedding.len() as u32 {
            let (va, vb) = (a.embedding.vector(id), b.embedding.vector(id));
            for (x, y) in va.iter().zip(vb) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }

    #[test]
    fn training_runs_multiworker() {
        let docs = smoke_docs();
        let params = TrainParams {
            workers: 3,
            ..smoke_params()
        };
        let trained = train_word2vec(&docs, &params).unwrap();
        assert_eq!(trained.losses.len(), 2);
        assert!(trained.losses.iter().all(|l| l.is_finite()));
    }

    #[test]
    fn zero_epochs_returns_initializer() {
        let docs = smoke_docs();
        let params = TrainParams {
            epochs: 0,
            ..smoke_params()
        };
        let trained = train_word2vec(&docs, &params).unwrap();
        assert!(trained.losses.is_empty());
        let bound = 0.5 / params.dim as f64;
        for id in 0..trained.embedding.len() as u32 {
            for &v in trained.embedding.vector(id) {
                assert!(v.abs() <= bound);
            }
        }
        for r in 0..trained.output.n_rows() {
            assert!(trained.output.row(r).iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn invalid_params_rejected() {
        let docs = smoke_docs();
        let bad = TrainParams {
            dim: 0,
            ..smoke_params()
        };
        assert!(matches!(train_word2vec(&docs, &bad), Err(Error::Config(_))));
    }
}
