//! Document loading, tokenization and vocabulary construction.
//!
//! The input format is one record per line: `<external-id>\t<text>`.
//! Documents become sequences of dense `TokenId`s over a min-count filtered
//! vocabulary; a document whose every token is out-of-vocabulary receives the
//! reserved [`EMPTY_TOKEN`] so that every node stays scoreable.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use crate::error::{MatanError, Result};

pub type NodeId = u32;
pub type TokenId = u32;

/// Reserved id for the empty-document pseudo-token. Its embedding is pinned
/// to the zero vector and it never participates in co-occurrence counts.
pub const EMPTY_TOKEN: TokenId = 0;

/// Printable form of the reserved token. Contains non-alphanumeric
/// characters on purpose: no tokenizer output can ever collide with it.
pub const EMPTY_TOKEN_STR: &str = "<empty>";

pub const DEFAULT_MIN_COUNT: usize = 5;
pub const DEFAULT_MAX_DOC_LEN: usize = 300;

/// Bijective token <-> id mapping plus retained occurrence counts.
#[derive(Debug, Clone)]
pub struct Vocab {
    token_of: HashMap<String, TokenId>,
    string_of: Vec<String>,
    counts: Vec<u64>,
}

impl Vocab {
    /// Build a vocabulary from corpus-wide token counts, keeping tokens with
    /// count >= `min_count`. Ids are assigned by descending count, ties
    /// broken lexicographically, so construction is deterministic. Id 0 is
    /// always the reserved empty pseudo-token.
    fn from_counts(counts: &HashMap<String, u64>, min_count: usize) -> Vocab {
        let mut retained: Vec<(&String, u64)> = counts
            .iter()
            .filter(|(_, &c)| c >= min_count as u64)
            .map(|(t, &c)| (t, c))
            .collect();
        retained.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));

        let mut token_of = HashMap::with_capacity(retained.len() + 1);
        let mut string_of = Vec::with_capacity(retained.len() + 1);
        let mut kept_counts = Vec::with_capacity(retained.len() + 1);
        token_of.insert(EMPTY_TOKEN_STR.to_string(), EMPTY_TOKEN);
        string_of.push(EMPTY_TOKEN_STR.to_string());
        kept_counts.push(0);
        for (tok, c) in retained {
            let id = string_of.len() as TokenId;
            token_of.insert(tok.clone(), id);
            string_of.push(tok.clone());
            kept_counts.push(c);
        }
        Vocab { token_of, string_of, counts: kept_counts }
    }

    pub fn id(&self, token: &str) -> Option<TokenId> {
        self.token_of.get(token).copied()
    }

    pub fn token(&self, id: TokenId) -> &str {
        &self.string_of[id as usize]
    }

    pub fn count(&self, id: TokenId) -> u64 {
        self.counts[id as usize]
    }

    /// Number of ids, including the reserved empty token.
    pub fn size(&self) -> usize {
        self.string_of.len()
    }
}

/// Node-indexed tokenized documents plus their vocabulary.
#[derive(Debug, Clone)]
pub struct Corpus {
    docs: Vec<Vec<TokenId>>,
    raw_ids: HashMap<String, NodeId>,
    ext_ids: Vec<String>,
    pub vocab: Vocab,
}

impl Corpus {
    pub fn n_nodes(&self) -> usize {
        self.docs.len()
    }

    pub fn doc(&self, node: NodeId) -> &[TokenId] {
        &self.docs[node as usize]
    }

    pub fn docs(&self) -> &[Vec<TokenId>] {
        &self.docs
    }

    pub fn node_of(&self, external_id: &str) -> Option<NodeId> {
        self.raw_ids.get(external_id).copied()
    }

    pub fn external_id(&self, node: NodeId) -> &str {
        &self.ext_ids[node as usize]
    }

    /// Space-joined token strings of a document, with the reserved empty
    /// token elided so the text round-trips through `load_documents`.
    pub fn doc_text(&self, node: NodeId) -> String {
        let toks: Vec<&str> = self
            .doc(node)
            .iter()
            .filter(|&&t| t != EMPTY_TOKEN)
            .map(|&t| self.vocab.token(t))
            .collect();
        toks.join(" ")
    }
}

/// Lowercase, split on every non-alphanumeric character, drop empty pieces.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect()
}

/// Load a documents file: tokenize, build the min-count vocabulary, map
/// documents to token ids (OOV dropped), truncate to `max_doc_len` (head),
/// and substitute `[EMPTY_TOKEN]` for documents left empty.
pub fn load_documents(path: &Path, min_count: usize, max_doc_len: usize) -> Result<Corpus> {
    let file = File::open(path).map_err(|e| MatanError::io(path, e))?;
    let reader = BufReader::new(file);

    let mut raw_ids: HashMap<String, NodeId> = HashMap::new();
    let mut ext_ids: Vec<String> = Vec::new();
    let mut token_docs: Vec<Vec<String>> = Vec::new();
    let mut counts: HashMap<String, u64> = HashMap::new();

    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| MatanError::io(path, e))?;
        if line.is_empty() {
            continue;
        }
        let (ext, text) = line
            .split_once('\t')
            .ok_or_else(|| MatanError::parse(path, lineno + 1, "expected <id>\\t<text>"))?;
        if raw_ids.contains_key(ext) {
            return Err(MatanError::parse(
                path,
                lineno + 1,
                format!("duplicate external id {ext:?}"),
            ));
        }
        let toks = tokenize(text);
        for t in &toks {
            *counts.entry(t.clone()).or_insert(0) += 1;
        }
        raw_ids.insert(ext.to_string(), ext_ids.len() as NodeId);
        ext_ids.push(ext.to_string());
        token_docs.push(toks);
    }

    let vocab = Vocab::from_counts(&counts, min_count);
    let docs = token_docs
        .into_iter()
        .map(|toks| {
            let mut ids: Vec<TokenId> =
                toks.iter().filter_map(|t| vocab.id(t)).collect();
            ids.truncate(max_doc_len);
            if ids.is_empty() {
                ids.push(EMPTY_TOKEN);
            }
            ids
        })
        .collect();

    Ok(Corpus { docs, raw_ids, ext_ids, vocab })
}
