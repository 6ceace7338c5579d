//! Mutual attention core: the projection parameters, the scaled dot-product
//! attention between two documents' word vectors, pooling into mutual
//! embeddings, the pair score, and exact analytic gradients of the
//! noise-contrastive loss with respect to the three projection matrices.
//!
//! Scoring uses the literal kernel (`sdpa` -> pool -> dot). Gradient
//! accumulation uses an algebraically identical folded form: with
//! `B = P_Q P_K^T / sqrt(D)` and `C = P_V P_V^T`, the attention logits are
//! `W_u B W_v^T` and the pair score is `c_uv^T C c_vu`, where `c_uv` is the
//! attention-pooled combination of the context document's word vectors.
//! This keeps the per-pair cost at a handful of L-by-D products and defers
//! all D-by-D work to once per batch; correctness is pinned by the
//! finite-difference suite.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ndarray::linalg::general_mat_mul;
use ndarray::{Array1, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::TokenId;
use crate::error::{MatanError, Result};
use crate::glove::EmbeddingTable;

/// How the per-word attention outputs are pooled into one vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Pooling {
    #[default]
    Mean,
    Sum,
}

impl Pooling {
    pub fn parse(s: &str) -> Result<Pooling> {
        match s {
            "mean" => Ok(Pooling::Mean),
            "sum" => Ok(Pooling::Sum),
            other => Err(MatanError::Invalid(format!("unknown pooling mode {other:?}"))),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Pooling::Mean => "mean",
            Pooling::Sum => "sum",
        }
    }

    fn coeff(self, n_queries: usize) -> f64 {
        match self {
            Pooling::Mean => 1.0 / n_queries as f64,
            Pooling::Sum => 1.0,
        }
    }
}

/// The three D x D projection matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub dim: usize,
    pub p_q: Array2<f64>,
    pub p_k: Array2<f64>,
    pub p_v: Array2<f64>,
}

/// Seeded uniform init in [-sqrt(6/(2D)), sqrt(6/(2D))].
pub fn init_params(dim: usize, seed: u64) -> ModelParams {
    let bound = (6.0 / (2.0 * dim as f64)).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mat = || {
        let data: Vec<f64> =
            (0..dim * dim).map(|_| rng.random_range(-bound..bound)).collect();
        Array2::from_shape_vec((dim, dim), data).unwrap()
    };
    ModelParams { dim, p_q: mat(), p_k: mat(), p_v: mat() }
}

impl ModelParams {
    pub fn is_finite(&self) -> bool {
        [&self.p_q, &self.p_k, &self.p_v]
            .iter()
            .all(|m| m.iter().all(|x| x.is_finite()))
    }
}

/// One row of word embeddings per token of a document.
#[derive(Debug, Clone)]
pub struct DocMatrix {
    pub rows: Array2<f64>,
}

impl DocMatrix {
    pub fn new(rows: Array2<f64>) -> Result<DocMatrix> {
        if rows.nrows() == 0 {
            return Err(MatanError::Invalid("document matrix needs at least one row".into()));
        }
        if rows.iter().any(|x| !x.is_finite()) {
            return Err(MatanError::Invalid("non-finite document matrix entry".into()));
        }
        Ok(DocMatrix { rows })
    }

    /// Look a token-id document up in an embedding table.
    pub fn from_doc(doc: &[TokenId], table: &EmbeddingTable) -> Result<DocMatrix> {
        if doc.is_empty() {
            return Err(MatanError::Invalid("empty document".into()));
        }
        let mut rows = Array2::zeros((doc.len(), table.dim));
        for (i, &t) in doc.iter().enumerate() {
            rows.row_mut(i).assign(&table.vectors.row(t as usize));
        }
        DocMatrix::new(rows)
    }

    pub fn len(&self) -> usize {
        self.rows.nrows()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dim(&self) -> usize {
        self.rows.ncols()
    }
}

/// Pooled representation of one document in the context of another.
#[derive(Debug, Clone, PartialEq)]
pub struct MutualEmbedding {
    pub vector: Array1<f64>,
}

/// Gradients with respect to the three projection matrices.
#[derive(Debug, Clone)]
pub struct ParamGrads {
    pub g_q: Array2<f64>,
    pub g_k: Array2<f64>,
    pub g_v: Array2<f64>,
}

impl ParamGrads {
    pub fn zeros(dim: usize) -> ParamGrads {
        ParamGrads {
            g_q: Array2::zeros((dim, dim)),
            g_k: Array2::zeros((dim, dim)),
            g_v: Array2::zeros((dim, dim)),
        }
    }

    pub fn scale(&mut self, factor: f64) {
        self.g_q *= factor;
        self.g_k *= factor;
        self.g_v *= factor;
    }

    pub fn is_finite(&self) -> bool {
        [&self.g_q, &self.g_k, &self.g_v]
            .iter()
            .all(|m| m.iter().all(|x| x.is_finite()))
    }
}

/// In-place row-wise softmax with per-row max subtraction.
pub(crate) fn row_softmax_inplace(m: &mut Array2<f64>) {
    for mut row in m.rows_mut() {
        let max = row.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let mut sum = 0.0;
        for x in row.iter_mut() {
            *x = (*x - max).exp();
            sum += *x;
        }
        for x in row.iter_mut() {
            *x /= sum;
        }
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// log(1 + e^x), stable in both tails; -log sigmoid(x) == softplus(-x).
pub(crate) fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn check_pair_inputs(w_u: &DocMatrix, w_v: &DocMatrix, params: &ModelParams) -> Result<()> {
    if w_u.dim() != params.dim || w_v.dim() != params.dim {
        return Err(MatanError::Invalid(format!(
            "document dim {} / {} does not match model dim {}",
            w_u.dim(),
            w_v.dim(),
            params.dim
        )));
    }
    if !params.is_finite() {
        return Err(MatanError::Numeric("non-finite model parameters".into()));
    }
    Ok(())
}

/// Attention weight matrix of `w_u`'s words (queries) over `w_v`'s words
/// (keys): `softmax(Q_u K_v^T / sqrt(D))`, one row per query summing to 1.
pub fn attention_weights(
    w_u: &DocMatrix,
    w_v: &DocMatrix,
    params: &ModelParams,
) -> Result<Array2<f64>> {
    check_pair_inputs(w_u, w_v, params)?;
    let q = w_u.rows.dot(&params.p_q);
    let k = w_v.rows.dot(&params.p_k);
    let mut scores = q.dot(&k.t());
    scores /= (params.dim as f64).sqrt();
    row_softmax_inplace(&mut scores);
    Ok(scores)
}

/// Scaled dot-product attention of `w_u` over `w_v`: one attended vector per
/// word of `w_u`, each a convex combination of `w_v`'s value projections.
pub fn sdpa(w_u: &DocMatrix, w_v: &DocMatrix, params: &ModelParams) -> Result<Array2<f64>> {
    let weights = attention_weights(w_u, w_v, params)?;
    let values = w_v.rows.dot(&params.p_v);
    Ok(weights.dot(&values))
}

/// Pool the attended word vectors of `w_u` given `w_v` into one vector.
pub fn mutual_embed(
    w_u: &DocMatrix,
    w_v: &DocMatrix,
    params: &ModelParams,
    pooling: Pooling,
) -> Result<MutualEmbedding> {
    let out = sdpa(w_u, w_v, params)?;
    let vector = match pooling {
        Pooling::Mean => out.mean_axis(Axis(0)).expect("non-empty document"),
        Pooling::Sum => out.sum_axis(Axis(0)),
    };
    Ok(MutualEmbedding { vector })
}

/// Similarity of a document pair: the dot product of the two mutual
/// embeddings.
pub fn pair_score(
    w_u: &DocMatrix,
    w_v: &DocMatrix,
    params: &ModelParams,
    pooling: Pooling,
) -> Result<f64> {
    let e_uv = mutual_embed(w_u, w_v, params, pooling)?;
    let e_vu = mutual_embed(w_v, w_u, params, pooling)?;
    Ok(e_uv.vector.dot(&e_vu.vector))
}

/// Per-direction forward cache: the attention weights and the pooled
/// combination of the context document's raw word vectors.
struct DirectionCache {
    attn: Array2<f64>,
    ctx: Array1<f64>,
}

/// Accumulates the noise-contrastive loss and its exact gradients over a set
/// of document pairs for one fixed parameter snapshot.
pub(crate) struct GradEngine<'a> {
    params: &'a ModelParams,
    pooling: Pooling,
    /// P_Q P_K^T / sqrt(D)
    b: Array2<f64>,
    /// P_V P_V^T
    c: Array2<f64>,
    grad_b: Array2<f64>,
    grad_c: Array2<f64>,
    loss: f64,
}

impl<'a> GradEngine<'a> {
    pub fn new(params: &'a ModelParams, pooling: Pooling) -> Result<GradEngine<'a>> {
        if !params.is_finite() {
            return Err(MatanError::Numeric("non-finite model parameters".into()));
        }
        let b = params.p_q.dot(&params.p_k.t()) / (params.dim as f64).sqrt();
        let c = params.p_v.dot(&params.p_v.t());
        Ok(GradEngine {
            params,
            pooling,
            b,
            c,
            grad_b: Array2::zeros((params.dim, params.dim)),
            grad_c: Array2::zeros((params.dim, params.dim)),
            loss: 0.0,
        })
    }

    fn forward(&self, w_x: &DocMatrix, w_y: &DocMatrix) -> DirectionCache {
        let logits = w_x.rows.dot(&self.b);
        let mut attn = logits.dot(&w_y.rows.t());
        row_softmax_inplace(&mut attn);
        let coeff = self.pooling.coeff(w_x.len());
        let pooled_weights = attn.sum_axis(Axis(0)) * coeff;
        let ctx = w_y.rows.t().dot(&pooled_weights);
        DirectionCache { attn, ctx }
    }

    fn backward(&mut self, w_x: &DocMatrix, w_y: &DocMatrix, cache: &DirectionCache, d_ctx: &Array1<f64>) {
        let d_pooled = w_y.rows.dot(d_ctx);
        let coeff = self.pooling.coeff(w_x.len());
        let mut d_logits = cache.attn.clone();
        for mut row in d_logits.rows_mut() {
            let inner: f64 = row.iter().zip(d_pooled.iter()).map(|(a, g)| a * g).sum();
            for (x, g) in row.iter_mut().zip(d_pooled.iter()) {
                *x *= coeff * (g - inner);
            }
        }
        let t = d_logits.dot(&w_y.rows);
        general_mat_mul(1.0, &w_x.rows.t(), &t, 1.0, &mut self.grad_b);
    }

    /// Add one pair's loss term: `softplus(-s)` for a positive pair,
    /// `softplus(s)` for a negative one.
    pub fn add_pair(&mut self, w_u: &DocMatrix, w_v: &DocMatrix, positive: bool) -> Result<()> {
        // params were validated at construction; only doc shapes can vary
        if w_u.dim() != self.params.dim || w_v.dim() != self.params.dim {
            return Err(MatanError::Invalid(format!(
                "document dim {} / {} does not match model dim {}",
                w_u.dim(),
                w_v.dim(),
                self.params.dim
            )));
        }
        let f_uv = self.forward(w_u, w_v);
        let f_vu = self.forward(w_v, w_u);
        let c_ctx2 = self.c.dot(&f_vu.ctx);
        let score = f_uv.ctx.dot(&c_ctx2);

        let (term, dscore) = if positive {
            (softplus(-score), sigmoid(score) - 1.0)
        } else {
            (softplus(score), sigmoid(score))
        };
        self.loss += term;

        // d score / dC = outer(c_uv, c_vu)
        general_mat_mul(
            dscore,
            &f_uv.ctx.view().insert_axis(Axis(1)),
            &f_vu.ctx.view().insert_axis(Axis(0)),
            1.0,
            &mut self.grad_c,
        );
        let d_ctx_uv = c_ctx2 * dscore;
        let d_ctx_vu = self.c.t().dot(&f_uv.ctx) * dscore;
        self.backward(w_u, w_v, &f_uv, &d_ctx_uv);
        self.backward(w_v, w_u, &f_vu, &d_ctx_vu);
        Ok(())
    }

    /// Fold the accumulated B/C gradients back onto the projections.
    pub fn finish(self) -> (f64, ParamGrads) {
        let inv_sqrt_d = 1.0 / (self.params.dim as f64).sqrt();
        let g_q = self.grad_b.dot(&self.params.p_k) * inv_sqrt_d;
        let g_k = self.grad_b.t().dot(&self.params.p_q) * inv_sqrt_d;
        let g_v = (&self.grad_c + &self.grad_c.t()).dot(&self.params.p_v);
        (self.loss, ParamGrads { g_q, g_k, g_v })
    }
}

/// Loss and exact gradients for one positive pair and its negatives:
/// `-log sigmoid(s_pos) - sum_i log sigmoid(-s_neg_i)`, each negative
/// pairing the positive's first document with a noise document.
pub fn loss_and_grads(
    pos: (&DocMatrix, &DocMatrix),
    negs: &[(&DocMatrix, &DocMatrix)],
    params: &ModelParams,
    pooling: Pooling,
) -> Result<(f64, ParamGrads)> {
    if negs.is_empty() {
        return Err(MatanError::Invalid("need at least one negative pair".into()));
    }
    let mut engine = GradEngine::new(params, pooling)?;
    engine.add_pair(pos.0, pos.1, true)?;
    for (w_u, w_z) in negs {
        engine.add_pair(w_u, w_z, false)?;
    }
    Ok(engine.finish())
}

const MODEL_MAGIC: &str = "MATAN-MODEL v1";

/// Write the model file: magic line, `dim <D>`, then PQ/PK/PV blocks of D
/// lines with D full-precision decimal floats each.
pub fn save_model(params: &ModelParams, path: &Path) -> Result<()> {
    let mut out = String::new();
    out.push_str(MODEL_MAGIC);
    out.push('\n');
    writeln!(out, "dim {}", params.dim).unwrap();
    for (label, m) in [("PQ", &params.p_q), ("PK", &params.p_k), ("PV", &params.p_v)] {
        out.push_str(label);
        out.push('\n');
        for row in m.rows() {
            let mut first = true;
            for &x in row {
                if !first {
                    out.push(' ');
                }
                write!(out, "{x}").unwrap();
                first = false;
            }
            out.push('\n');
        }
    }
    fs::write(path, out).map_err(|e| MatanError::io(path, e))
}

pub fn load_model(path: &Path) -> Result<ModelParams> {
    let text = fs::read_to_string(path).map_err(|e| MatanError::io(path, e))?;
    let mut lines = text.lines().enumerate();
    let mut next = |expect: &str| -> Result<(usize, String)> {
        lines
            .next()
            .map(|(n, l)| (n + 1, l.to_string()))
            .ok_or_else(|| MatanError::parse(path, 0, format!("unexpected end, wanted {expect}")))
    };

    let (n, magic) = next("magic header")?;
    if magic != MODEL_MAGIC {
        return Err(MatanError::parse(path, n, format!("bad header {magic:?}")));
    }
    let (n, dim_line) = next("dim line")?;
    let dim: usize = dim_line
        .strip_prefix("dim ")
        .and_then(|d| d.parse().ok())
        .ok_or_else(|| MatanError::parse(path, n, "expected `dim <D>`"))?;

    let mut read_block = |label: &str| -> Result<Array2<f64>> {
        let (n, got) = next(label)?;
        if got != label {
            return Err(MatanError::parse(path, n, format!("expected block {label}, got {got:?}")));
        }
        let mut data = Vec::with_capacity(dim * dim);
        for _ in 0..dim {
            let (n, row) = next("matrix row")?;
            let values: Vec<f64> = row
                .split(' ')
                .map(|p| {
                    p.parse::<f64>()
                        .map_err(|_| MatanError::parse(path, n, format!("bad float {p:?}")))
                })
                .collect::<Result<_>>()?;
            if values.len() != dim {
                return Err(MatanError::parse(
                    path,
                    n,
                    format!("row has {} values, expected {dim}", values.len()),
                ));
            }
            data.extend(values);
        }
        Ok(Array2::from_shape_vec((dim, dim), data).unwrap())
    };

    let p_q = read_block("PQ")?;
    let p_k = read_block("PK")?;
    let p_v = read_block("PV")?;
    Ok(ModelParams { dim, p_q, p_k, p_v })
}
