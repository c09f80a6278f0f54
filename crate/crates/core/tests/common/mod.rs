#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use spar_core::corpus::{load_manifest, Corpus};

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn read_fixture(rel: &str) -> String {
    let path = fixtures().join(rel);
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

pub fn corpus() -> &'static Corpus {
    static CORPUS: OnceLock<Corpus> = OnceLock::new();
    CORPUS.get_or_init(|| load_manifest(&fixtures()).expect("fixture corpus loads"))
}
