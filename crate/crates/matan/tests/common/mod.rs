//! Shared fixtures for the integration and acceptance suites: a planted
//! two-cluster corpus with known link structure, seeded random embedding
//! tables, and discovery/conversion of the Cora dataset when present.
#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use matan::corpus::{load_documents, Corpus};
use matan::glove::EmbeddingTable;
use matan::graph::{load_edges, Graph};

/// Planted two-cluster corpus: 200 nodes in two clusters of 100, each
/// cluster split into five 20-node blocks with a block-specific vocabulary.
/// Block tokens come in two complementary type pairs, documents are padded
/// with a cluster-neutral shared pool, and the edges are exactly the
/// cross-type pairs inside each block (intra-cluster by construction).
///
/// Edge pairs therefore share no block tokens, so an untrained model sees
/// no document-similarity shortcut, while the cross-type token affinity is
/// learnable from the links alone.
pub const PLANTED_NODES: usize = 200;
pub const PLANTED_BLOCKS: usize = 10;
pub const PLANTED_BLOCK_SIZE: usize = 20;
pub const PLANTED_SHARED_POOL: usize = 60;
pub const PLANTED_SHARED_PER_DOC: usize = 10;

pub fn write_planted_corpus(dir: &Path, seed: u64) -> (PathBuf, PathBuf) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let docs_path = dir.join("docs.tsv");
    let edges_path = dir.join("edges.tsv");

    let mut docs = String::new();
    for n in 0..PLANTED_NODES {
        let block = n / PLANTED_BLOCK_SIZE;
        let node_type = (n % PLANTED_BLOCK_SIZE) / (PLANTED_BLOCK_SIZE / 2);
        let mut tokens: Vec<String> = (0..PLANTED_SHARED_PER_DOC)
            .map(|_| format!("common{}", rng.random_range(0..PLANTED_SHARED_POOL)))
            .collect();
        tokens.push(format!("blk{block}w{}", 2 * node_type));
        tokens.push(format!("blk{block}w{}", 2 * node_type + 1));
        tokens.shuffle(&mut rng);
        docs.push_str(&format!("n{n}\t{}\n", tokens.join(" ")));
    }
    fs::write(&docs_path, docs).unwrap();

    let mut edges = String::new();
    let half = PLANTED_BLOCK_SIZE / 2;
    for block in 0..PLANTED_BLOCKS {
        let base = block * PLANTED_BLOCK_SIZE;
        for i in 0..half {
            for j in 0..half {
                edges.push_str(&format!("n{}\tn{}\n", base + i, base + half + j));
            }
        }
    }
    fs::write(&edges_path, edges).unwrap();
    (docs_path, edges_path)
}

pub fn load_planted_corpus(dir: &Path, seed: u64) -> (Corpus, Graph) {
    let (docs, edges) = write_planted_corpus(dir, seed);
    let corpus = load_documents(&docs, 1, 300).unwrap();
    let (graph, _) = load_edges(&edges, &corpus).unwrap();
    (corpus, graph)
}

/// Seeded random embedding table, uniform in [-1, 1); the reserved empty
/// row stays zero.
pub fn random_embeddings(vocab_size: usize, dim: usize, seed: u64) -> EmbeddingTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut vectors = Array2::zeros((vocab_size, dim));
    for i in 1..vocab_size {
        for d in 0..dim {
            vectors[(i, d)] = rng.random_range(-1.0..1.0);
        }
    }
    EmbeddingTable::from_vectors(vectors).unwrap()
}

pub fn workspace_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").canonicalize().unwrap()
}

/// Converted Cora input files, when the dataset is available.
pub struct CoraFiles {
    pub docs: PathBuf,
    pub edges: PathBuf,
}

pub const CORA_HELP: &str = "\
Cora dataset not found. The reproduction suite needs the LINQS Cora
distribution. Place either of the following under data/cora/ (or a
directory named by $MATAN_CORA_DIR):

  1. cora.content and cora.cites (as distributed in cora.tgz from
     https://linqs.soe.ucsc.edu/data); they are converted automatically, or
  2. pre-converted documents.tsv and edges.tsv
     (see tools/convert_cora.py and the README data section).

This environment has no route to the dataset (no outbound network), so the
criterion cannot run here; it executes in full once the files are present.";

/// Convert cora.content lines (`id \t f1..f1433 \t label`) into documents
/// of `w<idx>` tokens, one per nonzero feature, in index order.
pub fn convert_content(content: &str) -> String {
    let mut out = String::new();
    for line in content.lines() {
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split('\t');
        let id = fields.next().unwrap();
        let features: Vec<&str> = fields.collect();
        let words: Vec<String> = features[..features.len() - 1]
            .iter()
            .enumerate()
            .filter(|(_, v)| **v == "1")
            .map(|(i, _)| format!("w{i}"))
            .collect();
        out.push_str(&format!("{id}\t{}\n", words.join(" ")));
    }
    out
}

/// Locate (and if needed convert) the Cora input files.
pub fn locate_cora() -> Option<CoraFiles> {
    let dir = std::env::var_os("MATAN_CORA_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| workspace_root().join("data/cora"));

    let docs = dir.join("documents.tsv");
    let edges = dir.join("edges.tsv");
    if docs.is_file() && edges.is_file() {
        return Some(CoraFiles { docs, edges });
    }

    let content = dir.join("cora.content");
    let cites = dir.join("cora.cites");
    if content.is_file() && cites.is_file() {
        let out_dir = std::env::temp_dir().join("matan-cora-converted");
        fs::create_dir_all(&out_dir).unwrap();
        let docs = out_dir.join("documents.tsv");
        let edges = out_dir.join("edges.tsv");
        fs::write(&docs, convert_content(&fs::read_to_string(&content).unwrap())).unwrap();
        fs::copy(&cites, &edges).unwrap();
        return Some(CoraFiles { docs, edges });
    }
    None
}
