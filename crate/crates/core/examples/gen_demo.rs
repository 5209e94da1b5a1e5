//! Regenerates the bundled demo corpus:
//!
//! ```text
//! cargo run -p biasbeam --example gen_demo -- data/demo_corpus.csv
//! ```
//!
//! The output is a pure function of `DEMO_SEED`, so the checked-in file only
//! changes when the generator does.

use std::path::PathBuf;

use biasbeam::demo::{write_demo_csv, DEMO_SEED};

fn main() {
    let path: PathBuf = std::env::args_os()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("data/demo_corpus.csv"));
    write_demo_csv(&path, DEMO_SEED).expect("demo corpus written");
    println!("wrote {}", path.display());
}
