//! Synthetic demo corpus. Five hundred songs across five genres with
//! planted structure so every pipeline stage has something to find:
//!
//! * four theme vocabularies (love, money, party, road) mixed per genre,
//!   giving separable topics with predictable genre composition;
//! * appearance words always co-occur with female words and strength words
//!   with male words, so SC-WEAT must report Appearance female-biased
//!   (d < 0) and Strength male-biased (d > 0) in every stratum;
//! * the remaining target sets appear without any planted gender tie.
//!
//! Generation is a pure function of the seed.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::corpus::{Genre, SongRecord};
use crate::error::{Error, Result};

pub const DEMO_SEED: u64 = 20_240_615;
pub const DOCS_PER_GENRE: usize = 100;

const GENRES: [Genre; 5] = [Genre::Pop, Genre::Rap, Genre::Rock, Genre::Country, Genre::RnB];

const THEMES: [(&str, [&str; 8]); 4] = [
    ("love", ["love", "heart", "kiss", "tonight", "forever", "baby", "hold", "tears"]),
    ("money", ["money", "cash", "gold", "hustle", "street", "grind", "paper", "shine"]),
    ("party", ["party", "dance", "club", "floor", "lights", "music", "bounce", "groove"]),
    ("road", ["road", "home", "truck", "river", "town", "whiskey", "lonesome", "mile"]),
];

/// Interleaved female-attribute and appearance words; windowed co-occurrence
/// inside this block is the planted Appearance signal.
const FEMALE_BLOCK: [&str; 13] = [
    "she", "thin", "her", "gorgeous", "girl", "fat", "lady", "pretty", "mother",
    "beautiful", "woman", "handsome", "girlfriend",
];

/// Interleaved male-attribute and strength words, the planted Strength signal.
const MALE_BLOCK: [&str; 12] = [
    "he", "bold", "him", "leader", "man", "strong", "dad", "dominant", "father",
    "power", "boy", "boyfriend",
];

/// The four target sets without a planted bias, cycled through the corpus so
/// each word clears min_count in every stratum.
const NEUTRAL_WORDS: [&str; 20] = [
    "joy", "wonderful", "love", "peace", "happy",
    "terrible", "hatred", "nasty", "kill", "evil",
    "intelligent", "genius", "smart", "brilliant", "clever",
    "loser", "failure", "weak", "surrender", "follow",
];

/// (first theme, probability of the first theme, second theme) per genre.
fn mixture(genre: Genre) -> (usize, f64, usize) {
    match genre {
        Genre::Pop => (0, 0.65, 2),
        Genre::Rap => (1, 0.70, 2),
        Genre::Rock => (3, 0.55, 0),
        Genre::Country => (3, 0.70, 0),
        Genre::RnB => (0, 0.60, 2),
        Genre::Misc => (0, 0.50, 2),
    }
}

fn push_theme_tokens(out: &mut Vec<&'static str>, rng: &mut ChaCha12Rng, theme: usize, n: usize) {
    let words = &THEMES[theme].1;
    for _ in 0..n {
        out.push(words[rng.random_range(0..words.len())]);
    }
}

fn push_rotated(out: &mut Vec<&'static str>, rng: &mut ChaCha12Rng, block: &[&'static str]) {
    let offset = rng.random_range(0..block.len());
    for i in 0..block.len() {
        out.push(block[(offset + i) % block.len()]);
    }
}

/// Build the full 500-record corpus for a seed.
pub fn demo_records(seed: u64) -> Vec<SongRecord> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut records = Vec::with_capacity(GENRES.len() * DOCS_PER_GENRE);
    let mut neutral_cursor = 0usize;
    let mut id = 0usize;
    for &genre in &GENRES {
        let (first, p_first, second) = mixture(genre);
        for _ in 0..DOCS_PER_GENRE {
            let theme = if rng.random::<f64>() < p_first { first } else { second };
            let mut tokens: Vec<&'static str> = Vec::with_capacity(60);
            push_theme_tokens(&mut tokens, &mut rng, theme, 10);
            push_rotated(&mut tokens, &mut rng, &FEMALE_BLOCK);
            // theme padding keeps the gender blocks outside each other's
            // maximum context window
            push_theme_tokens(&mut tokens, &mut rng, theme, 8);
            push_rotated(&mut tokens, &mut rng, &MALE_BLOCK);
            push_theme_tokens(&mut tokens, &mut rng, theme, 8);
            for _ in 0..6 {
                tokens.push(NEUTRAL_WORDS[neutral_cursor % NEUTRAL_WORDS.len()]);
                neutral_cursor += 1;
            }
            push_theme_tokens(&mut tokens, &mut rng, theme, 4);

            let year = if rng.random::<f64>() < 0.05 {
                None
            } else {
                Some(rng.random_range(1962..=2015))
            };
            records.push(SongRecord {
                id: format!("song-{id:04}"),
                title: format!("{} song {id}", THEMES[theme].0),
                artist: format!("{} artist {}", genre, id % 7),
                genre_raw: genre.to_string(),
                genre,
                year,
                lyrics: tokens.join(" "),
                language: "en".to_string(),
            });
            id += 1;
        }
    }
    records
}

/// Write the demo corpus in the ingest CSV schema.
pub fn write_demo_csv(path: &Path, seed: u64) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    let mut w = csv::Writer::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Data(format!("{other:?}")),
    })?;
    w.write_record(["id", "title", "artist", "genre", "year", "lyrics", "language"])
        .map_err(|e| Error::Data(e.to_string()))?;
    for r in demo_records(seed) {
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
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}
