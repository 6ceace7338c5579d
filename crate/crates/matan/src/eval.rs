//! Link prediction evaluation: edges-hidden and nodes-hidden splits,
//! non-edge sampling, exact ROC AUC, and the end-to-end experiment runners.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::attention::{pair_score, DocMatrix, ModelParams, Pooling};
use crate::corpus::{Corpus, NodeId};
use crate::error::{MatanError, Result};
use crate::glove::{count_cooccurrences_over, train_glove, EmbeddingTable, GloveConfig};
use crate::graph::Graph;
use crate::trainer::{build_doc_matrices, train, TrainConfig};

/// Random partition of the edge set; the training graph keeps every node.
#[derive(Debug, Clone)]
pub struct EdgeSplit {
    pub train_graph: Graph,
    pub test_edges: Vec<(NodeId, NodeId)>,
}

/// Random partition of the node set into two induced subgraphs; edges
/// crossing the partition are discarded.
#[derive(Debug, Clone)]
pub struct NodeSplit {
    pub train_graph: Graph,
    pub test_graph: Graph,
    pub train_nodes: Vec<NodeId>,
    pub test_nodes: Vec<NodeId>,
}

/// Hide a fraction of the edges: `round(train_fraction * |E|)` go to the
/// training graph, the rest become test positives.
pub fn split_edges<R: Rng>(graph: &Graph, train_fraction: f64, rng: &mut R) -> Result<EdgeSplit> {
    if !(0.0..1.0).contains(&train_fraction) || train_fraction == 0.0 {
        return Err(MatanError::Invalid(format!(
            "train fraction {train_fraction} outside (0, 1)"
        )));
    }
    let mut edges = graph.edges.clone();
    edges.shuffle(rng);
    let n_train = (train_fraction * edges.len() as f64).round() as usize;
    if n_train == 0 || n_train == edges.len() {
        return Err(MatanError::Invalid(format!(
            "edge split {train_fraction} leaves an empty side ({n_train} of {})",
            edges.len()
        )));
    }
    let test_edges = edges.split_off(n_train);
    let train_graph = Graph::from_edges(graph.n_nodes, edges, Some(graph.nodes.clone()))?;
    Ok(EdgeSplit { train_graph, test_edges })
}

/// Partition nodes uniformly at random and keep only intra-side edges.
pub fn split_nodes<R: Rng>(graph: &Graph, train_fraction: f64, rng: &mut R) -> Result<NodeSplit> {
    if !(0.0..1.0).contains(&train_fraction) || train_fraction == 0.0 {
        return Err(MatanError::Invalid(format!(
            "train fraction {train_fraction} outside (0, 1)"
        )));
    }
    let mut nodes = graph.nodes.clone();
    nodes.shuffle(rng);
    let n_train = (train_fraction * nodes.len() as f64).round() as usize;
    if n_train == 0 || n_train == nodes.len() {
        return Err(MatanError::Invalid("node split leaves an empty side".into()));
    }
    let mut train_nodes: Vec<NodeId> = nodes[..n_train].to_vec();
    let mut test_nodes: Vec<NodeId> = nodes[n_train..].to_vec();
    train_nodes.sort_unstable();
    test_nodes.sort_unstable();

    let induced = |side: &[NodeId], name: &str| -> Result<Graph> {
        let members: HashSet<NodeId> = side.iter().copied().collect();
        let edges: Vec<(NodeId, NodeId)> = graph
            .edges
            .iter()
            .filter(|(a, b)| members.contains(a) && members.contains(b))
            .copied()
            .collect();
        Graph::from_edges(graph.n_nodes, edges, Some(side.to_vec())).map_err(|_| {
            MatanError::EmptyGraph(format!(
                "{name} side of the node split ({} nodes) has no internal edges",
                side.len()
            ))
        })
    };
    let train_graph = induced(&train_nodes, "train")?;
    let test_graph = induced(&test_nodes, "test")?;
    Ok(NodeSplit { train_graph, test_graph, train_nodes, test_nodes })
}

/// Sample `n` distinct unordered non-adjacent pairs, uniformly via rejection.
/// Pairs are checked against the full original edge set, so hidden test
/// edges can never be mislabeled as negatives. `restrict_to` confines both
/// endpoints to a node subset.
pub fn sample_non_edges<R: Rng>(
    graph: &Graph,
    n: usize,
    restrict_to: Option<&[NodeId]>,
    rng: &mut R,
) -> Result<Vec<(NodeId, NodeId)>> {
    let universe: &[NodeId] = restrict_to.unwrap_or(&graph.nodes);
    let m = universe.len();
    if m < 2 {
        return Err(MatanError::Invalid("need at least two candidate nodes".into()));
    }
    let member: HashSet<NodeId> = universe.iter().copied().collect();
    let internal_edges = graph
        .edges
        .iter()
        .filter(|(a, b)| member.contains(a) && member.contains(b))
        .count();
    let eligible = m * (m - 1) / 2 - internal_edges;
    if n > eligible {
        return Err(MatanError::Invalid(format!(
            "requested {n} non-edges but only {eligible} exist"
        )));
    }

    let mut chosen: HashSet<(NodeId, NodeId)> = HashSet::with_capacity(n);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let a = universe[rng.random_range(0..m)];
        let b = universe[rng.random_range(0..m)];
        if a == b {
            continue;
        }
        let pair = (a.min(b), a.max(b));
        if graph.has_edge(pair.0, pair.1) || !chosen.insert(pair) {
            continue;
        }
        out.push(pair);
    }
    Ok(out)
}

/// Scores with binary labels; validated to contain both classes.
#[derive(Debug, Clone)]
pub struct ScoredSet {
    pub scores: Vec<f64>,
    pub labels: Vec<u8>,
}

impl ScoredSet {
    pub fn new(scores: Vec<f64>, labels: Vec<u8>) -> Result<ScoredSet> {
        if scores.len() != labels.len() {
            return Err(MatanError::Invalid("scores and labels differ in length".into()));
        }
        if scores.iter().any(|s| !s.is_finite()) {
            return Err(MatanError::Invalid("non-finite score".into()));
        }
        if labels.iter().any(|&l| l > 1) {
            return Err(MatanError::Invalid("labels must be 0 or 1".into()));
        }
        let pos = labels.iter().filter(|&&l| l == 1).count();
        if pos == 0 || pos == labels.len() {
            return Err(MatanError::Invalid(
                "need at least one positive and one negative label".into(),
            ));
        }
        Ok(ScoredSet { scores, labels })
    }
}

/// Exact ROC AUC by a single sort-and-rank pass: the Mann-Whitney statistic
/// with ties counted half.
pub fn roc_auc(set: &ScoredSet) -> Result<f64> {
    let n = set.scores.len();
    let n_pos = set.labels.iter().filter(|&&l| l == 1).count();
    let n_neg = n - n_pos;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| set.scores[a].partial_cmp(&set.scores[b]).unwrap());

    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && set.scores[order[j + 1]] == set.scores[order[i]] {
            j += 1;
        }
        // 1-based average rank over the tie run [i, j]
        let avg_rank = (i + j + 2) as f64 / 2.0;
        let pos_in_run =
            order[i..=j].iter().filter(|&&idx| set.labels[idx] == 1).count();
        rank_sum_pos += avg_rank * pos_in_run as f64;
        i = j + 1;
    }
    let u = rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

/// Full experiment configuration shared by both evaluation protocols.
#[derive(Debug, Clone, Default)]
pub struct EvalConfig {
    pub glove: GloveConfig,
    pub train: TrainConfig,
    /// Train word embeddings on the full corpus even when documents are
    /// hidden (mirrors precomputing embeddings before the split).
    pub full_corpus_embeddings: bool,
}

fn score_pairs(
    docs: &[Option<DocMatrix>],
    pairs: &[(NodeId, NodeId)],
    params: &ModelParams,
    pooling: Pooling,
) -> Result<Vec<f64>> {
    pairs
        .iter()
        .map(|&(a, b)| {
            let da = docs[a as usize].as_ref().expect("doc matrix");
            let db = docs[b as usize].as_ref().expect("doc matrix");
            pair_score(da, db, params, pooling)
        })
        .collect()
}

fn auc_of(
    corpus: &Corpus,
    scope: &Graph,
    embeddings: &EmbeddingTable,
    params: &ModelParams,
    pooling: Pooling,
    positives: &[(NodeId, NodeId)],
    negatives: &[(NodeId, NodeId)],
) -> Result<f64> {
    let docs = build_doc_matrices(corpus, scope, embeddings)?;
    let mut scores = score_pairs(&docs, positives, params, pooling)?;
    scores.extend(score_pairs(&docs, negatives, params, pooling)?);
    let mut labels = vec![1u8; positives.len()];
    labels.extend(vec![0u8; negatives.len()]);
    roc_auc(&ScoredSet::new(scores, labels)?)
}

/// Edges-hidden protocol with explicit (already trained) word embeddings.
pub fn evaluate_edges_hidden_with(
    corpus: &Corpus,
    graph: &Graph,
    train_fraction: f64,
    embeddings: &EmbeddingTable,
    train_cfg: &TrainConfig,
    seed: u64,
) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(2);
    let split = split_edges(graph, train_fraction, &mut rng)?;

    let cfg = TrainConfig { seed, ..train_cfg.clone() };
    let (params, _) = train(corpus, &split.train_graph, embeddings, &cfg)?;

    let negatives = sample_non_edges(graph, split.test_edges.len(), None, &mut rng)?;
    auc_of(corpus, graph, embeddings, &params, cfg.pooling, &split.test_edges, &negatives)
}

/// Edges-hidden protocol: split, train GloVe and the projections on the
/// training side, score hidden edges against sampled non-edges. The split,
/// both trainings and the negative sampling all derive from `seed`.
pub fn evaluate_edges_hidden(
    corpus: &Corpus,
    graph: &Graph,
    train_fraction: f64,
    cfg: &EvalConfig,
    seed: u64,
) -> Result<f64> {
    // every document is visible in this protocol, so the leakage flag
    // cannot change the embedding corpus
    let glove_cfg = GloveConfig { seed, ..cfg.glove.clone() };
    let cooc = count_cooccurrences_over(corpus, glove_cfg.window, 0..corpus.n_nodes() as NodeId);
    let (embeddings, _) = train_glove(&cooc, corpus.vocab.size(), &glove_cfg)?;
    evaluate_edges_hidden_with(corpus, graph, train_fraction, &embeddings, &cfg.train, seed)
}

/// Nodes-hidden protocol with explicit word embeddings.
pub fn evaluate_nodes_hidden_with(
    corpus: &Corpus,
    split: &NodeSplit,
    embeddings: &EmbeddingTable,
    train_cfg: &TrainConfig,
    full_graph: &Graph,
    seed: u64,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    let cfg = TrainConfig { seed, ..train_cfg.clone() };
    let (params, _) = train(corpus, &split.train_graph, embeddings, &cfg)?;

    let positives = split.test_graph.edges.clone();
    let negatives = sample_non_edges(full_graph, positives.len(), Some(&split.test_nodes), rng)?;
    auc_of(corpus, &split.test_graph, embeddings, &params, cfg.pooling, &positives, &negatives)
}

/// Nodes-hidden protocol: partition nodes, train word embeddings on the
/// training side's documents only (unless `full_corpus_embeddings`), train
/// the projections on the training induced graph, then score the test
/// graph's edges against non-edges among test nodes.
pub fn evaluate_nodes_hidden(
    corpus: &Corpus,
    graph: &Graph,
    train_fraction: f64,
    cfg: &EvalConfig,
    seed: u64,
) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(2);
    let split = split_nodes(graph, train_fraction, &mut rng)?;

    let glove_cfg = GloveConfig { seed, ..cfg.glove.clone() };
    let cooc = if cfg.full_corpus_embeddings {
        count_cooccurrences_over(corpus, glove_cfg.window, 0..corpus.n_nodes() as NodeId)
    } else {
        count_cooccurrences_over(corpus, glove_cfg.window, split.train_nodes.iter().copied())
    };
    let (embeddings, _) = train_glove(&cooc, corpus.vocab.size(), &glove_cfg)?;
    evaluate_nodes_hidden_with(corpus, &split, &embeddings, &cfg.train, graph, seed, &mut rng)
}
