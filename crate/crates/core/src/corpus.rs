//! Corpus ingestion, validation, genre strata, and stratified sampling.
//!
//! A [`Corpus`] is an immutable, validated collection of song records plus an
//! index that partitions the records into genre strata. Ingestion accepts CSV
//! (RFC-4180, header row required) and JSONL (one object per line) with the
//! fixed schema `(id, title, artist, genre, year, lyrics, language)`. Invalid
//! rows are skipped and counted, never fatal, unless no valid row survives.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The closed set of genre strata. Unknown raw tags map to [`Genre::Misc`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Genre {
    Pop,
    Rap,
    Rock,
    Country,
    RnB,
    Misc,
}

impl Genre {
    pub const ALL: [Genre; 6] = [
        Genre::Pop,
        Genre::Rap,
        Genre::Rock,
        Genre::Country,
        Genre::RnB,
        Genre::Misc,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Genre::Pop => "pop",
            Genre::Rap => "rap",
            Genre::Rock => "rock",
            Genre::Country => "country",
            Genre::RnB => "rnb",
            Genre::Misc => "misc",
        }
    }
}

impl fmt::Display for Genre {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Map a raw genre tag to one of the six strata.
///
/// Matching is case-insensitive on the trimmed tag. Anything unmatched lands
/// in [`Genre::Misc`]; this is a total function.
pub fn normalize_genre(raw: &str) -> Genre {
    match raw.trim().to_lowercase().as_str() {
        "pop" => Genre::Pop,
        "rap" | "hip hop" | "hip-hop" | "hiphop" => Genre::Rap,
        "rock" => Genre::Rock,
        "country" => Genre::Country,
        "r&b" | "rb" | "rnb" | "rhythm and blues" => Genre::RnB,
        "misc" => Genre::Misc,
        _ => Genre::Misc,
    }
}

/// Genre mapping with user overrides layered on top of [`normalize_genre`].
#[derive(Debug, Clone, Default)]
pub struct GenreMap {
    overrides: HashMap<String, Genre>,
}

impl GenreMap {
    pub fn with_overrides(overrides: impl IntoIterator<Item = (String, Genre)>) -> Self {
        GenreMap {
            overrides: overrides
                .into_iter()
                .map(|(raw, g)| (raw.trim().to_lowercase(), g))
                .collect(),
        }
    }

    pub fn resolve(&self, raw: &str) -> Genre {
        match self.overrides.get(&raw.trim().to_lowercase()) {
            Some(g) => *g,
            None => normalize_genre(raw),
        }
    }
}

/// One document of the corpus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SongRecord {
    pub id: String,
    pub title: String,
    pub artist: String,
    pub genre_raw: String,
    pub genre: Genre,
    pub year: Option<i32>,
    pub lyrics: String,
    pub language: String,
}

/// Decade bin, rendered `"1990s"` style.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Decade(pub i32);

impl fmt::Display for Decade {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}s", self.0)
    }
}

/// Bin a calendar year into its decade. Years outside 1900..=2100 are
/// rejected.
pub fn decade_of(year: i32) -> Result<Decade> {
    if !(1900..=2100).contains(&year) {
        return Err(Error::YearOutOfRange(year));
    }
    Ok(Decade(year.div_euclid(10) * 10))
}

/// Counters reported by ingestion. Serialized as the ingest report JSON.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct IngestReport {
    pub files: Vec<String>,
    pub total_rows: u64,
    pub kept: u64,
    pub skipped_total: u64,
    pub skipped_invalid: u64,
    pub skipped_empty_lyrics: u64,
    pub skipped_non_english: u64,
    pub skipped_duplicate_id: u64,
    pub missing_year: u64,
    pub genre_counts: BTreeMap<String, u64>,
}

/// Input file format for [`ingest`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorpusFormat {
    Csv,
    Jsonl,
}

/// An immutable, validated corpus with a genre-stratum index.
#[derive(Debug, Clone)]
pub struct Corpus {
    records: Vec<SongRecord>,
    id_index: HashMap<String, usize>,
    strata: BTreeMap<Genre, Vec<usize>>,
}

impl Corpus {
    /// Build a corpus from records, enforcing id uniqueness and non-empty
    /// lyrics.
    pub fn from_records(records: Vec<SongRecord>) -> Result<Self> {
        let mut id_index = HashMap::with_capacity(records.len());
        let mut strata: BTreeMap<Genre, Vec<usize>> = BTreeMap::new();
        for (i, rec) in records.iter().enumerate() {
            if rec.lyrics.trim().is_empty() {
                return Err(Error::Data(format!("record {:?} has empty lyrics", rec.id)));
            }
            if id_index.insert(rec.id.clone(), i).is_some() {
                return Err(Error::Data(format!("duplicate record id {:?}", rec.id)));
            }
            strata.entry(rec.genre).or_default().push(i);
        }
        Ok(Corpus {
            records,
            id_index,
            strata,
        })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[SongRecord] {
        &self.records
    }

    pub fn get(&self, id: &str) -> Option<&SongRecord> {
        self.id_index.get(id).map(|&i| &self.records[i])
    }

    /// Record indices of one stratum, in corpus order.
    pub fn stratum(&self, genre: Genre) -> &[usize] {
        self.strata.get(&genre).map_or(&[], Vec::as_slice)
    }

    /// Strata in [`Genre::ALL`] order, skipping empty ones.
    pub fn strata(&self) -> impl Iterator<Item = (Genre, &[usize])> {
        Genre::ALL
            .iter()
            .filter_map(|g| self.strata.get(g).map(|idx| (*g, idx.as_slice())))
    }

    /// Records of one stratum, in corpus order.
    pub fn stratum_records(&self, genre: Genre) -> impl Iterator<Item = &SongRecord> {
        self.stratum(genre).iter().map(|&i| &self.records[i])
    }

    /// Uniform per-stratum sample without replacement, capped at `cap`
    /// records per stratum.
    ///
    /// Uses a seeded reservoir per stratum, so a single pass suffices and the
    /// result is fully determined by `(corpus, cap, seed)`. Output records are
    /// ordered by stratum ([`Genre::ALL`] order), then by original corpus
    /// order within each stratum.
    pub fn stratified_sample(&self, cap: usize, seed: u64) -> Result<Corpus> {
        if self.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        if cap == 0 {
            return Err(Error::Data("sample cap must be >= 1".into()));
        }
        let mut picked = Vec::new();
        for (stratum_no, genre) in Genre::ALL.iter().enumerate() {
            let indices = self.stratum(*genre);
            if indices.is_empty() {
                continue;
            }
            let mut rng = stratum_rng(seed, stratum_no);
            let mut reservoir: Vec<usize> = Vec::with_capacity(cap.min(indices.len()));
            for (seen, &idx) in indices.iter().enumerate() {
                if seen < cap {
                    reservoir.push(idx);
                } else {
                    let j = rng.random_range(0..=seen);
                    if j < cap {
                        reservoir[j] = idx;
                    }
                }
            }
            reservoir.sort_unstable();
            picked.extend(reservoir);
        }
        let records = picked.iter().map(|&i| self.records[i].clone()).collect();
        Corpus::from_records(records)
    }
}

fn stratum_rng(seed: u64, stratum_no: usize) -> ChaCha12Rng {
    // Distinct, stable stream per stratum.
    ChaCha12Rng::seed_from_u64(seed ^ (stratum_no as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15))
}

/// Ingest a corpus file with the default genre mapping.
pub fn ingest(path: &Path, format: CorpusFormat) -> Result<(Corpus, IngestReport)> {
    ingest_files(&[path.to_path_buf()], format, &GenreMap::default())
}

/// Ingest one or more corpus files, merging them into a single corpus.
///
/// Invalid rows (malformed, empty lyrics, non-English, duplicate id) are
/// skipped and counted in the report. Fails only when a file is unreadable or
/// no valid row remains.
pub fn ingest_files(
    paths: &[PathBuf],
    format: CorpusFormat,
    genre_map: &GenreMap,
) -> Result<(Corpus, IngestReport)> {
    let mut report = IngestReport::default();
    let mut records: Vec<SongRecord> = Vec::new();
    let mut seen_ids: HashMap<String, ()> = HashMap::new();
    for path in paths {
        report.files.push(path.display().to_string());
        match format {
            CorpusFormat::Csv => ingest_csv(path, genre_map, &mut report, &mut records, &mut seen_ids)?,
            CorpusFormat::Jsonl => {
                ingest_jsonl(path, genre_map, &mut report, &mut records, &mut seen_ids)?
            }
        }
    }
    report.skipped_total = report.skipped_invalid
        + report.skipped_empty_lyrics
        + report.skipped_non_english
        + report.skipped_duplicate_id;
    if records.is_empty() {
        return Err(Error::NoValidRows(
            paths.first().cloned().unwrap_or_default(),
        ));
    }
    let corpus = Corpus::from_records(records)?;
    Ok((corpus, report))
}

/// Raw row shared by both formats before validation.
#[derive(Debug, Default, Deserialize)]
struct RawRow {
    #[serde(default)]
    id: String,
    #[serde(default)]
    title: String,
    #[serde(default)]
    artist: String,
    #[serde(default)]
    genre: String,
    #[serde(default)]
    year: Option<serde_json::Value>,
    #[serde(default)]
    lyrics: String,
    #[serde(default)]
    language: String,
}

fn coerce_year(value: &Option<serde_json::Value>) -> Option<i32> {
    match value {
        None => None,
        Some(serde_json::Value::Null) => None,
        Some(serde_json::Value::Number(n)) => n.as_i64().and_then(|y| i32::try_from(y).ok()),
        Some(serde_json::Value::String(s)) => s.trim().parse::<i32>().ok(),
        Some(_) => None,
    }
}

fn accept_row(
    raw: RawRow,
    genre_map: &GenreMap,
    report: &mut IngestReport,
    records: &mut Vec<SongRecord>,
    seen_ids: &mut HashMap<String, ()>,
) {
    report.total_rows += 1;
    if raw.id.trim().is_empty() {
        report.skipped_invalid += 1;
        return;
    }
    if raw.lyrics.trim().is_empty() {
        report.skipped_empty_lyrics += 1;
        return;
    }
    if !raw.language.trim().eq_ignore_ascii_case("en") {
        report.skipped_non_english += 1;
        return;
    }
    let id = raw.id.trim().to_string();
    if seen_ids.insert(id.clone(), ()).is_some() {
        report.skipped_duplicate_id += 1;
        return;
    }
    let year = coerce_year(&raw.year);
    if year.is_none() {
        report.missing_year += 1;
    }
    let genre = genre_map.resolve(&raw.genre);
    *report.genre_counts.entry(genre.to_string()).or_default() += 1;
    report.kept += 1;
    records.push(SongRecord {
        id,
        title: raw.title,
        artist: raw.artist,
        genre_raw: raw.genre,
        genre,
        year,
        lyrics: raw.lyrics,
        language: raw.language.trim().to_lowercase(),
    });
}

fn ingest_csv(
    path: &Path,
    genre_map: &GenreMap,
    report: &mut IngestReport,
    records: &mut Vec<SongRecord>,
    seen_ids: &mut HashMap<String, ()>,
) -> Result<()> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .from_reader(BufReader::new(file));
    let headers = reader
        .headers()
        .map_err(|e| Error::MalformedFile {
            what: "csv",
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?
        .clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let required = ["id", "title", "artist", "genre", "year", "lyrics", "language"];
    let mut cols = HashMap::new();
    for name in required {
        match col(name) {
            Some(i) => {
                cols.insert(name, i);
            }
            None => {
                return Err(Error::MalformedFile {
                    what: "csv",
                    path: path.to_path_buf(),
                    reason: format!("missing required column {name:?}"),
                })
            }
        }
    }
    let field = |rec: &csv::StringRecord, name: &str| -> String {
        rec.get(cols[name]).unwrap_or("").to_string()
    };
    for row in reader.records() {
        match row {
            Ok(rec) => {
                let year_text = field(&rec, "year");
                let raw = RawRow {
                    id: field(&rec, "id"),
                    title: field(&rec, "title"),
                    artist: field(&rec, "artist"),
                    genre: field(&rec, "genre"),
                    year: if year_text.trim().is_empty() {
                        None
                    } else {
                        Some(serde_json::Value::String(year_text))
                    },
                    lyrics: field(&rec, "lyrics"),
                    language: field(&rec, "language"),
                };
                accept_row(raw, genre_map, report, records, seen_ids);
            }
            Err(_) => {
                report.total_rows += 1;
                report.skipped_invalid += 1;
            }
        }
    }
    Ok(())
}

fn ingest_jsonl(
    path: &Path,
    genre_map: &GenreMap,
    report: &mut IngestReport,
    records: &mut Vec<SongRecord>,
    seen_ids: &mut HashMap<String, ()>,
) -> Result<()> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<RawRow>(&line) {
            Ok(raw) => accept_row(raw, genre_map, report, records, seen_ids),
            Err(_) => {
                report.total_rows += 1;
                report.skipped_invalid += 1;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn record(id: &str, genre: Genre, year: Option<i32>, lyrics: &str) -> SongRecord {
        SongRecord {
            id: id.to_string(),
            title: String::new(),
            artist: String::new(),
            genre_raw: genre.to_string(),
            genre,
            year,
            lyrics: lyrics.to_string(),
            language: "en".to_string(),
        }
    }

    #[test]
    fn normalize_genre_cases() {
        assert_eq!(normalize_genre("Pop"), Genre::Pop);
        assert_eq!(normalize_genre("R&B"), Genre::RnB);
        assert_eq!(normalize_genre("rb"), Genre::RnB);
        assert_eq!(normalize_genre("rnb"), Genre::RnB);
        assert_eq!(normalize_genre("Hip Hop"), Genre::Rap);
        assert_eq!(normalize_genre("shoegaze"), Genre::Misc);
        assert_eq!(normalize_genre("  ROCK  "), Genre::Rock);
    }

    #[test]
    fn genre_map_overrides_win() {
        let map = GenreMap::with_overrides([("Shoegaze".to_string(), Genre::Rock)]);
        assert_eq!(map.resolve("shoegaze"), Genre::Rock);
        assert_eq!(map.resolve("r&b"), Genre::RnB);
    }

    #[test]
    fn decade_boundaries() {
        assert_eq!(decade_of(1999).unwrap().to_string(), "1990s");
        assert_eq!(decade_of(2020).unwrap().to_string(), "2020s");
        assert_eq!(decade_of(2022).unwrap().to_string(), "2020s");
        assert!(matches!(decade_of(1899), Err(Error::YearOutOfRange(1899))));
        assert!(matches!(decade_of(2101), Err(Error::YearOutOfRange(2101))));
    }

    #[test]
    fn ingest_csv_three_rows() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "id,title,artist,genre,year,lyrics,language").unwrap();
        writeln!(f, "a,T1,A1,pop,1999,la la la,en").unwrap();
        writeln!(f, "b,T2,A2,rap,2001,yo yo,en").unwrap();
        writeln!(f, "c,T3,A3,rock,,rock on,en").unwrap();
        let (corpus, report) = ingest(f.path(), CorpusFormat::Csv).unwrap();
        assert_eq!(corpus.len(), 3);
        assert_eq!(report.kept, 3);
        assert_eq!(report.skipped_total, 0);
        assert_eq!(report.missing_year, 1);
        assert_eq!(corpus.get("a").unwrap().year, Some(1999));
        assert_eq!(corpus.get("c").unwrap().year, None);
    }

    #[test]
    fn ingest_skips_empty_lyrics() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "id,title,artist,genre,year,lyrics,language").unwrap();
        writeln!(f, "a,T,A,pop,1999,   ,en").unwrap();
        writeln!(f, "b,T,A,pop,1999,words,en").unwrap();
        let (corpus, report) = ingest(f.path(), CorpusFormat::Csv).unwrap();
        assert_eq!(corpus.len(), 1);
        assert_eq!(report.skipped_empty_lyrics, 1);
    }

    #[test]
    fn ingest_drops_non_english() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "id,title,artist,genre,year,lyrics,language").unwrap();
        writeln!(f, "a,T,A,pop,1999,bonjour,fr").unwrap();
        writeln!(f, "b,T,A,pop,1999,hello,en").unwrap();
        let (corpus, report) = ingest(f.path(), CorpusFormat::Csv).unwrap();
        assert_eq!(corpus.len(), 1);
        assert_eq!(report.skipped_non_english, 1);
    }

    #[test]
    fn ingest_jsonl_one_malformed_among_100() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        for i in 0..99 {
            writeln!(
                f,
                r#"{{"id":"s{i}","title":"t","artist":"a","genre":"pop","year":2000,"lyrics":"some words here","language":"en"}}"#
            )
            .unwrap();
        }
        writeln!(f, "{{not json at all").unwrap();
        let (corpus, report) = ingest(f.path(), CorpusFormat::Jsonl).unwrap();
        assert_eq!(corpus.len(), 99);
        assert_eq!(report.kept, 99);
        assert_eq!(report.skipped_invalid, 1);
        assert_eq!(report.total_rows, 100);
    }

    #[test]
    fn ingest_duplicate_ids_counted() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "id,title,artist,genre,year,lyrics,language").unwrap();
        writeln!(f, "a,T,A,pop,1999,one,en").unwrap();
        writeln!(f, "a,T,A,pop,1999,two,en").unwrap();
        let (corpus, report) = ingest(f.path(), CorpusFormat::Csv).unwrap();
        assert_eq!(corpus.len(), 1);
        assert_eq!(report.skipped_duplicate_id, 1);
        assert_eq!(corpus.get("a").unwrap().lyrics, "one");
    }

    #[test]
    fn ingest_zero_valid_rows_is_fatal() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "id,title,artist,genre,year,lyrics,language").unwrap();
        writeln!(f, "a,T,A,pop,1999,,en").unwrap();
        let err = ingest(f.path(), CorpusFormat::Csv).unwrap_err();
        assert!(matches!(err, Error::NoValidRows(_)));
    }

    #[test]
    fn strata_partition_corpus() {
        let records = vec![
            record("a", Genre::Pop, Some(1990), "x"),
            record("b", Genre::Rap, Some(1991), "x"),
            record("c", Genre::Pop, Some(1992), "x"),
            record("d", Genre::Misc, None, "x"),
        ];
        let corpus = Corpus::from_records(records).unwrap();
        let total: usize = corpus.strata().map(|(_, idx)| idx.len()).sum();
        assert_eq!(total, corpus.len());
        assert_eq!(corpus.stratum(Genre::Pop), &[0, 2]);
        assert_eq!(corpus.stratum(Genre::RnB), &[] as &[usize]);
    }

    #[test]
    fn sample_cap_exceeding_stratum_takes_all() {
        let records: Vec<SongRecord> = (0..4)
            .map(|i| record(&format!("r{i}"), Genre::Rock, None, "x"))
            .collect();
        let corpus = Corpus::from_records(records).unwrap();
        let sample = corpus.stratified_sample(10, 7).unwrap();
        assert_eq!(sample.len(), 4);
    }

    #[test]
    fn sample_deterministic_per_seed() {
        let records: Vec<SongRecord> = (0..200)
            .map(|i| {
                let genre = if i % 2 == 0 { Genre::Pop } else { Genre::Rap };
                record(&format!("r{i}"), genre, None, "x")
            })
            .collect();
        let corpus = Corpus::from_records(records).unwrap();
        let ids = |c: &Corpus| c.records().iter().map(|r| r.id.clone()).collect::<Vec<_>>();
        let s1 = corpus.stratified_sample(30, 42).unwrap();
        let s2 = corpus.stratified_sample(30, 42).unwrap();
        let s3 = corpus.stratified_sample(30, 43).unwrap();
        assert_eq!(ids(&s1), ids(&s2));
        assert_ne!(ids(&s1), ids(&s3));
        assert_eq!(s3.len(), 60);
        assert_eq!(s3.stratum(Genre::Pop).len(), 30);
    }

    #[test]
    fn sample_is_subset_without_duplicates() {
        let records: Vec<SongRecord> = (0..100)
            .map(|i| record(&format!("r{i}"), Genre::Country, None, "x"))
            .collect();
        let corpus = Corpus::from_records(records).unwrap();
        let sample = corpus.stratified_sample(25, 1).unwrap();
        assert_eq!(sample.len(), 25);
        let mut seen = std::collections::HashSet::new();
        for rec in sample.records() {
            assert!(seen.insert(rec.id.clone()), "duplicate {}", rec.id);
            assert!(corpus.get(&rec.id).is_some());
        }
    }

    #[test]
    fn sample_empty_corpus_errors() {
        let corpus = Corpus {
            records: vec![],
            id_index: HashMap::new(),
            strata: BTreeMap::new(),
        };
        assert!(matches!(
            corpus.stratified_sample(5, 0),
            Err(Error::EmptyCorpus)
        ));
    }
}
