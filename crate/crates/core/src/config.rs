//! Run configuration. One TOML file drives a full reproducible run; its
//! SHA-256 hash lands in run_meta.json so reports carry their provenance.
//! Unknown keys are rejected everywhere.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{normalize_genre, CorpusFormat, Genre, GenreMap};
use crate::embed::TrainParams;
use crate::error::{Error, Result};
use crate::topics::{ClusterParams, DEFAULT_TARGET_DIM};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub corpus: CorpusSection,
    pub sampling: SamplingSection,
    pub tokenizer: TokenizerSection,
    pub embedding: EmbeddingSection,
    pub topics: TopicsSection,
    pub weat: WeatSection,
    pub output: OutputSection,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusSection {
    pub paths: Vec<PathBuf>,
    pub format: FormatDefault,
    /// Extra raw-genre spellings mapped onto canonical labels.
    pub genre_map: BTreeMap<String, String>,
}

/// Newtype so the corpus format defaults to CSV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FormatDefault(pub CorpusFormat);

impl Default for FormatDefault {
    fn default() -> Self {
        FormatDefault(CorpusFormat::Csv)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplingSection {
    pub cap: usize,
    pub seed: u64,
}

impl Default for SamplingSection {
    fn default() -> Self {
        SamplingSection {
            cap: 20_000,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TokenizerSection {
    /// Bundled English list when absent.
    pub stopwords_file: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbeddingSection {
    pub params: TrainParams,
    /// Strata below this document count refuse to train.
    pub min_stratum_docs: usize,
    /// Per-stratum hyperparameter patches, keyed by canonical genre label.
    pub overrides: BTreeMap<String, TrainOverride>,
}

impl Default for EmbeddingSection {
    fn default() -> Self {
        EmbeddingSection {
            params: TrainParams::default(),
            min_stratum_docs: 500,
            overrides: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainOverride {
    pub dim: Option<usize>,
    pub window: Option<usize>,
    pub negatives: Option<usize>,
    pub epochs: Option<usize>,
    pub learning_rate: Option<f64>,
    pub subsample: Option<f64>,
    pub min_count: Option<u32>,
    pub workers: Option<usize>,
    pub seed: Option<u64>,
}

impl TrainOverride {
    pub fn apply(&self, base: &TrainParams) -> TrainParams {
        TrainParams {
            dim: self.dim.unwrap_or(base.dim),
            window: self.window.unwrap_or(base.window),
            negatives: self.negatives.unwrap_or(base.negatives),
            epochs: self.epochs.unwrap_or(base.epochs),
            learning_rate: self.learning_rate.unwrap_or(base.learning_rate),
            subsample: self.subsample.unwrap_or(base.subsample),
            min_count: self.min_count.unwrap_or(base.min_count),
            workers: self.workers.unwrap_or(base.workers),
            seed: self.seed.unwrap_or(base.seed),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TopicsSection {
    pub target_dim: usize,
    pub cluster: ClusterParams,
    /// Precomputed document vectors (TSV); averaged word vectors when absent.
    pub vectors_file: Option<PathBuf>,
}

impl Default for TopicsSection {
    fn default() -> Self {
        TopicsSection {
            target_dim: DEFAULT_TARGET_DIM,
            cluster: ClusterParams::default(),
            vectors_file: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WeatSection {
    /// Built-in example sets when absent.
    pub wordsets_file: Option<PathBuf>,
    /// Monte Carlo iterations; 0 disables p-values.
    pub permutations: u64,
    pub seed: u64,
}

impl Default for WeatSection {
    fn default() -> Self {
        WeatSection {
            wordsets_file: None,
            permutations: 1_000,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            dir: PathBuf::from("out"),
        }
    }
}

/// Parse a canonical genre label, rejecting anything that would silently
/// fall into the misc bucket.
pub fn strict_genre(label: &str) -> Result<Genre> {
    let genre = normalize_genre(label);
    if genre == Genre::Misc && !label.trim().eq_ignore_ascii_case("misc") {
        return Err(Error::Config(format!(
            "unknown genre label {label:?}; expected one of pop, rap, rock, country, r&b, misc"
        )));
    }
    Ok(genre)
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig> {
        if !path.exists() {
            return Err(Error::ConfigNotFound(path.to_path_buf()));
        }
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let config: RunConfig = toml::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.corpus.paths.is_empty() {
            return Err(Error::Config("corpus.paths must list at least one file".into()));
        }
        for value in self.corpus.genre_map.values() {
            strict_genre(value)?;
        }
        if self.sampling.cap == 0 {
            return Err(Error::Config("sampling.cap must be >= 1".into()));
        }
        self.embedding.params.validate()?;
        let mut seen = Vec::new();
        for (label, patch) in &self.embedding.overrides {
            let genre = strict_genre(label)?;
            if seen.contains(&genre) {
                return Err(Error::Config(format!(
                    "embedding.overrides lists genre {genre} more than once"
                )));
            }
            seen.push(genre);
            patch.apply(&self.embedding.params).validate()?;
        }
        if self.topics.target_dim == 0 {
            return Err(Error::Config("topics.target_dim must be >= 1".into()));
        }
        match &self.topics.cluster {
            ClusterParams::Dbscan { eps, min_pts } => {
                if let Some(e) = eps {
                    if !(e.is_finite() && *e > 0.0) {
                        return Err(Error::Config("topics.cluster.eps must be positive".into()));
                    }
                }
                if *min_pts == 0 {
                    return Err(Error::Config("topics.cluster.min_pts must be >= 1".into()));
                }
            }
            ClusterParams::Kmeans { k, max_iters, .. } => {
                if *k == 0 {
                    return Err(Error::Config("topics.cluster.k must be >= 1".into()));
                }
                if *max_iters == 0 {
                    return Err(Error::Config("topics.cluster.max_iters must be >= 1".into()));
                }
            }
        }
        Ok(())
    }

    pub fn genre_map(&self) -> Result<GenreMap> {
        let mut overrides = Vec::new();
        for (raw, label) in &self.corpus.genre_map {
            overrides.push((raw.clone(), strict_genre(label)?));
        }
        Ok(GenreMap::with_overrides(overrides))
    }

    /// Training hyperparameters for one stratum: base plus any patch.
    pub fn params_for(&self, genre: Genre) -> TrainParams {
        for (label, patch) in &self.embedding.overrides {
            if normalize_genre(label) == genre {
                return patch.apply(&self.embedding.params);
            }
        }
        self.embedding.params.clone()
    }

    /// `Some((iterations, seed))` unless p-values are disabled.
    pub fn permutation_spec(&self) -> Option<(u64, u64)> {
        if self.weat.permutations == 0 {
            None
        } else {
            Some((self.weat.permutations, self.weat.seed))
        }
    }

    /// Apply a command-line seed to every seed the config carries.
    pub fn override_seed(&mut self, seed: u64) {
        self.sampling.seed = seed;
        self.embedding.params.seed = seed;
        for patch in self.embedding.overrides.values_mut() {
            patch.seed = None;
        }
        if let ClusterParams::Kmeans { seed: s, .. } = &mut self.topics.cluster {
            *s = seed;
        }
        self.weat.seed = seed;
    }

    /// Apply a command-line worker count everywhere.
    pub fn override_workers(&mut self, workers: usize) {
        self.embedding.params.workers = workers;
        for patch in self.embedding.overrides.values_mut() {
            patch.workers = None;
        }
    }

    /// SHA-256 over the canonical serialization of the effective config.
    pub fn hash(&self) -> String {
        let canonical = toml::to_string(self).expect("config serializes");
        let mut hasher = Sha256::new();
        hasher.update(canonical.as_bytes());
        let digest = hasher.finalize();
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal_toml() -> &'static str {
        r#"
[corpus]
paths = ["data/songs.csv"]

[sampling]
cap = 100
seed = 7
"#
    }

    #[test]
    fn defaults_fill_missing_sections() {
        let config: RunConfig = toml::from_str(minimal_toml()).unwrap();
        config.validate().unwrap();
        assert_eq!(config.sampling.cap, 100);
        assert_eq!(config.sampling.seed, 7);
        assert_eq!(config.embedding.params.dim, 100);
        assert_eq!(config.embedding.min_stratum_docs, 500);
        assert_eq!(config.topics.target_dim, DEFAULT_TARGET_DIM);
        assert_eq!(config.weat.permutations, 1000);
        assert_eq!(config.output.dir, PathBuf::from("out"));
        assert!(matches!(
            config.topics.cluster,
            ClusterParams::Dbscan { eps: None, min_pts: 15 }
        ));
    }

    #[test]
    fn unknown_keys_rejected() {
        let bad = format!("{}\ntypo_section = 1\n", minimal_toml());
        assert!(toml::from_str::<RunConfig>(&bad).is_err());
        let bad = minimal_toml().replace("cap = 100", "cap = 100\nbudget = 3");
        assert!(toml::from_str::<RunConfig>(&bad).is_err());
    }

    #[test]
    fn full_config_roundtrip() {
        let text = r#"
[corpus]
paths = ["a.jsonl", "b.jsonl"]
format = "jsonl"
genre_map = { "trap" = "rap", "soul" = "r&b" }

[sampling]
cap = 500
seed = 11

[tokenizer]
stopwords_file = "stop.txt"

[embedding]
min_stratum_docs = 20

[embedding.params]
dim = 16
epochs = 2

[embedding.overrides.rap]
epochs = 5
seed = 99

[topics]
target_dim = 3

[topics.cluster]
strategy = "kmeans"
k = 4
max_iters = 25
seed = 5

[weat]
permutations = 200
seed = 3

[output]
dir = "reports"
"#;
        let config: RunConfig = toml::from_str(text).unwrap();
        config.validate().unwrap();
        assert_eq!(config.corpus.format.0, CorpusFormat::Jsonl);
        let map = config.genre_map().unwrap();
        assert_eq!(map.resolve("Trap"), Genre::Rap);
        assert_eq!(map.resolve("soul"), Genre::RnB);
        assert_eq!(map.resolve("rock"), Genre::Rock);
        let rap = config.params_for(Genre::Rap);
        assert_eq!(rap.epochs, 5);
        assert_eq!(rap.seed, 99);
        assert_eq!(rap.dim, 16);
        let pop = config.params_for(Genre::Pop);
        assert_eq!(pop.epochs, 2);
        assert_eq!(pop.seed, 42);
        assert_eq!(config.permutation_spec(), Some((200, 3)));

        let reparsed: RunConfig = toml::from_str(&toml::to_string(&config).unwrap()).unwrap();
        assert_eq!(reparsed, config);
    }

    #[test]
    fn validation_errors() {
        let no_paths: RunConfig = toml::from_str("[corpus]\npaths = []\n").unwrap();
        assert!(no_paths.validate().is_err());

        let bad_genre = minimal_toml().replace(
            "[sampling]",
            "genre_map = { \"x\" = \"polka\" }\n\n[sampling]",
        );
        let config: RunConfig = toml::from_str(&bad_genre).unwrap();
        assert!(matches!(config.validate(), Err(Error::Config(_))));

        let text = format!("{}\n[embedding.params]\ndim = 0\n", minimal_toml());
        let config: RunConfig = toml::from_str(&text).unwrap();
        assert!(config.validate().is_err());

        let text = format!(
            "{}\n[embedding.overrides.\"hip hop\"]\nepochs = 1\n[embedding.overrides.rap]\nepochs = 2\n",
            minimal_toml()
        );
        let config: RunConfig = toml::from_str(&text).unwrap();
        assert!(config.validate().is_err(), "two keys for the same stratum");

        let text = format!("{}\n[topics.cluster]\nstrategy = \"kmeans\"\nk = 0\n", minimal_toml());
        let config: RunConfig = toml::from_str(&text).unwrap();
        assert!(config.validate().is_err());
    }

    #[test]
    fn load_missing_file_names_path() {
        let err = RunConfig::load(Path::new("/nonexistent/run.toml")).unwrap_err();
        match err {
            Error::ConfigNotFound(p) => {
                assert_eq!(p, PathBuf::from("/nonexistent/run.toml"));
            }
            other => panic!("expected ConfigNotFound, got {other:?}"),
        }
        assert_eq!(err_exit(), 1);
        fn err_exit() -> i32 {
            Error::ConfigNotFound(PathBuf::from("x")).exit_code()
        }
    }

    #[test]
    fn seed_override_reaches_every_seed() {
        let text = r#"
[corpus]
paths = ["a.csv"]

[embedding.overrides.pop]
seed = 9

[topics.cluster]
strategy = "kmeans"
k = 2

[weat]
seed = 5
"#;
        let mut config: RunConfig = toml::from_str(text).unwrap();
        config.override_seed(1234);
        assert_eq!(config.sampling.seed, 1234);
        assert_eq!(config.embedding.params.seed, 1234);
        assert_eq!(config.params_for(Genre::Pop).seed, 1234);
        assert_eq!(config.weat.seed, 1234);
        match config.topics.cluster {
            ClusterParams::Kmeans { seed, .. } => assert_eq!(seed, 1234),
            _ => panic!("expected kmeans"),
        }
    }

    #[test]
    fn hash_tracks_content() {
        let a: RunConfig = toml::from_str(minimal_toml()).unwrap();
        let b: RunConfig = toml::from_str(minimal_toml()).unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
        let mut c = a.clone();
        c.override_seed(999);
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn strict_genre_accepts_aliases() {
        assert_eq!(strict_genre("Hip Hop").unwrap(), Genre::Rap);
        assert_eq!(strict_genre("misc").unwrap(), Genre::Misc);
        assert_eq!(strict_genre("rnb").unwrap(), Genre::RnB);
        assert!(strict_genre("polka").is_err());
        assert!(strict_genre("").is_err());
    }
}
