//! Noise-contrastive training loop: draw positive links and uniform noise
//! nodes, accumulate loss and gradients per batch, update the projections
//! with ADAM. Word embeddings stay frozen; only the projections learn.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::attention::{init_params, DocMatrix, GradEngine, ModelParams, ParamGrads, Pooling};
use crate::corpus::{Corpus, NodeId};
use crate::error::{MatanError, Result};
use crate::glove::EmbeddingTable;
use crate::graph::Graph;

pub const DEFAULT_K: usize = 1;
pub const DEFAULT_N_PAIRS: usize = 100_000;
pub const DEFAULT_LR: f64 = 1e-3;
pub const DEFAULT_BATCH_SIZE: usize = 32;

/// How positive pairs are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PositiveSampling {
    /// Uniform over the undirected edge list.
    #[default]
    UniformEdges,
    /// Uniform node, then a neighbor from its row of the row-stochastic
    /// adjacency; equivalent to degree-weighted link sampling.
    DegreeWeighted,
}

impl PositiveSampling {
    pub fn parse(s: &str) -> Result<PositiveSampling> {
        match s {
            "uniform-edges" => Ok(PositiveSampling::UniformEdges),
            "m-weighted" => Ok(PositiveSampling::DegreeWeighted),
            other => Err(MatanError::Invalid(format!("unknown sampling mode {other:?}"))),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PositiveSampling::UniformEdges => "uniform-edges",
            PositiveSampling::DegreeWeighted => "m-weighted",
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainConfig {
    /// Negatives per positive pair.
    pub k: usize,
    /// Total positive samples drawn.
    pub n_pairs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub pooling: Pooling,
    pub positive_sampling: PositiveSampling,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            k: DEFAULT_K,
            n_pairs: DEFAULT_N_PAIRS,
            lr: DEFAULT_LR,
            batch_size: DEFAULT_BATCH_SIZE,
            seed: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            pooling: Pooling::default(),
            positive_sampling: PositiveSampling::default(),
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if self.k < 1 {
            return Err(MatanError::Invalid("k must be >= 1".into()));
        }
        if self.batch_size < 1 {
            return Err(MatanError::Invalid("batch_size must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(MatanError::Invalid("ADAM betas must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

/// Running first/second moment estimates for the three projections.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub m: ParamGrads,
    pub v: ParamGrads,
    pub t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(dim: usize, beta1: f64, beta2: f64, eps: f64) -> AdamState {
        AdamState { m: ParamGrads::zeros(dim), v: ParamGrads::zeros(dim), t: 0, beta1, beta2, eps }
    }
}

/// Per-batch mean losses plus the number of positive samples consumed.
#[derive(Debug, Clone, Default)]
pub struct TrainTrace {
    pub losses: Vec<f64>,
    pub samples_seen: usize,
}

/// Draw one edge uniformly from the undirected edge list, orientation
/// randomized.
pub fn sample_positive<R: Rng>(graph: &Graph, rng: &mut R) -> Result<(NodeId, NodeId)> {
    if graph.edges.is_empty() {
        return Err(MatanError::EmptyGraph("cannot sample a link".into()));
    }
    let (a, b) = graph.edges[rng.random_range(0..graph.edges.len())];
    Ok(if rng.random_bool(0.5) { (a, b) } else { (b, a) })
}

/// Degree-weighted variant: uniform node with degree > 0, then a neighbor
/// from its row-stochastic adjacency row.
fn sample_positive_degree_weighted<R: Rng>(graph: &Graph, rng: &mut R) -> Result<(NodeId, NodeId)> {
    if graph.edges.is_empty() {
        return Err(MatanError::EmptyGraph("cannot sample a link".into()));
    }
    loop {
        let u = graph.nodes[rng.random_range(0..graph.nodes.len())];
        let row = &graph.adjacency[u as usize];
        if !row.is_empty() {
            let v = row[rng.random_range(0..row.len())];
            return Ok((u, v));
        }
    }
}

/// Draw `k` noise nodes i.i.d. uniformly over the candidate node set.
/// Collisions with the positive pair or true neighbors are not filtered.
pub fn sample_negatives<R: Rng>(k: usize, nodes: &[NodeId], rng: &mut R) -> Vec<NodeId> {
    (0..k).map(|_| nodes[rng.random_range(0..nodes.len())]).collect()
}

/// One bias-corrected ADAM update; increments the step counter.
pub fn adam_step(
    params: &mut ModelParams,
    grads: &ParamGrads,
    state: &mut AdamState,
    lr: f64,
) -> Result<()> {
    if !grads.is_finite() {
        return Err(MatanError::Numeric(format!(
            "non-finite gradients at ADAM step {}",
            state.t + 1
        )));
    }
    state.t += 1;
    let bc1 = 1.0 - state.beta1.powi(state.t as i32);
    let bc2 = 1.0 - state.beta2.powi(state.t as i32);

    let update = |p: &mut Array2<f64>, g: &Array2<f64>, m: &mut Array2<f64>, v: &mut Array2<f64>| {
        ndarray::Zip::from(p).and(g).and(m).and(v).for_each(|p, &g, m, v| {
            *m = state.beta1 * *m + (1.0 - state.beta1) * g;
            *v = state.beta2 * *v + (1.0 - state.beta2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= lr * m_hat / (v_hat.sqrt() + state.eps);
        });
    };
    update(&mut params.p_q, &grads.g_q, &mut state.m.g_q, &mut state.v.g_q);
    update(&mut params.p_k, &grads.g_k, &mut state.m.g_k, &mut state.v.g_k);
    update(&mut params.p_v, &grads.g_v, &mut state.m.g_v, &mut state.v.g_v);
    Ok(())
}

/// Materialize the document matrices for the graph's active nodes.
pub fn build_doc_matrices(
    corpus: &Corpus,
    graph: &Graph,
    embeddings: &EmbeddingTable,
) -> Result<Vec<Option<DocMatrix>>> {
    let mut docs = vec![None; corpus.n_nodes()];
    for &n in &graph.nodes {
        docs[n as usize] = Some(DocMatrix::from_doc(corpus.doc(n), embeddings)?);
    }
    Ok(docs)
}

/// Train the projections: for each positive link draw `k` uniform noise
/// nodes that replace the context side, accumulate the batch gradient, and
/// apply one ADAM step per batch. Deterministic for a fixed seed.
pub fn train(
    corpus: &Corpus,
    graph: &Graph,
    embeddings: &EmbeddingTable,
    cfg: &TrainConfig,
) -> Result<(ModelParams, TrainTrace)> {
    cfg.validate()?;
    if corpus.n_nodes() != graph.n_nodes {
        return Err(MatanError::Invalid(format!(
            "corpus has {} nodes, graph has {}",
            corpus.n_nodes(),
            graph.n_nodes
        )));
    }

    let docs = build_doc_matrices(corpus, graph, embeddings)?;
    let doc = |n: NodeId| docs[n as usize].as_ref().expect("doc for active node");

    let mut params = init_params(embeddings.dim, cfg.seed);
    let mut state = AdamState::new(params.dim, cfg.beta1, cfg.beta2, cfg.eps);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);

    let mut trace = TrainTrace::default();
    let mut remaining = cfg.n_pairs;
    while remaining > 0 {
        let batch = remaining.min(cfg.batch_size);
        let mut engine = GradEngine::new(&params, cfg.pooling)?;
        for _ in 0..batch {
            let (u, v) = match cfg.positive_sampling {
                PositiveSampling::UniformEdges => sample_positive(graph, &mut rng)?,
                PositiveSampling::DegreeWeighted => {
                    sample_positive_degree_weighted(graph, &mut rng)?
                }
            };
            engine.add_pair(doc(u), doc(v), true)?;
            for z in sample_negatives(cfg.k, &graph.nodes, &mut rng) {
                engine.add_pair(doc(u), doc(z), false)?;
            }
        }
        let (loss_sum, mut grads) = engine.finish();
        grads.scale(1.0 / batch as f64);
        adam_step(&mut params, &grads, &mut state, cfg.lr)?;
        trace.losses.push(loss_sum / batch as f64);
        trace.samples_seen += batch;
        remaining -= batch;
    }

    Ok((params, trace))
}
