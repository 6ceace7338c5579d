//! From-scratch GloVe trainer over document-internal co-occurrences, plus
//! text-format load/save of embedding tables.
//!
//! Follows the reference formulation: weighted least squares on log
//! co-occurrence counts with bias terms, per-entry adaptive-gradient updates
//! (accumulators start at 1, learning rate folded into the accumulated
//! gradient), and final vectors `w + w~`.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Corpus, NodeId, TokenId, Vocab, EMPTY_TOKEN};
use crate::error::{MatanError, Result};

pub const DEFAULT_DIM: usize = 256;
pub const DEFAULT_WINDOW: usize = 5;
pub const DEFAULT_X_MAX: f64 = 10.0;
pub const DEFAULT_ALPHA: f64 = 0.75;
pub const DEFAULT_EPOCHS: usize = 50;
pub const DEFAULT_GLOVE_LR: f64 = 0.05;

#[derive(Debug, Clone)]
pub struct GloveConfig {
    pub dim: usize,
    pub window: usize,
    pub x_max: f64,
    pub alpha: f64,
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
}

impl Default for GloveConfig {
    fn default() -> Self {
        GloveConfig {
            dim: DEFAULT_DIM,
            window: DEFAULT_WINDOW,
            x_max: DEFAULT_X_MAX,
            alpha: DEFAULT_ALPHA,
            epochs: DEFAULT_EPOCHS,
            lr: DEFAULT_GLOVE_LR,
            seed: 0,
        }
    }
}

/// Symmetric weighted co-occurrence counts; no diagonal entries, the
/// reserved empty token never appears.
#[derive(Debug, Clone, Default)]
pub struct CoocTable {
    entries: HashMap<(TokenId, TokenId), f64>,
}

impl CoocTable {
    pub fn get(&self, a: TokenId, b: TokenId) -> f64 {
        self.entries.get(&(a, b)).copied().unwrap_or(0.0)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn add(&mut self, a: TokenId, b: TokenId, w: f64) {
        *self.entries.entry((a, b)).or_insert(0.0) += w;
        *self.entries.entry((b, a)).or_insert(0.0) += w;
    }

    /// Entries in deterministic (sorted-key) order.
    pub fn sorted_entries(&self) -> Vec<(TokenId, TokenId, f64)> {
        let mut v: Vec<(TokenId, TokenId, f64)> =
            self.entries.iter().map(|(&(a, b), &w)| (a, b, w)).collect();
        v.sort_unstable_by_key(|&(a, b, _)| (a, b));
        v
    }
}

/// Count co-occurrences over the given documents: every ordered pair of
/// distinct tokens at distance `d <= window` inside one document adds `1/d`
/// to both directions. Windows never cross document boundaries.
pub fn count_cooccurrences_over(
    corpus: &Corpus,
    window: usize,
    nodes: impl IntoIterator<Item = NodeId>,
) -> CoocTable {
    let mut table = CoocTable::default();
    for node in nodes {
        let doc = corpus.doc(node);
        for i in 0..doc.len() {
            let a = doc[i];
            if a == EMPTY_TOKEN {
                continue;
            }
            let hi = (i + window).min(doc.len() - 1);
            for (d, &b) in doc[i + 1..=hi].iter().enumerate() {
                if b == EMPTY_TOKEN || b == a {
                    continue;
                }
                table.add(a, b, 1.0 / (d + 1) as f64);
            }
        }
    }
    table
}

pub fn count_cooccurrences(corpus: &Corpus, window: usize) -> CoocTable {
    count_cooccurrences_over(corpus, window, 0..corpus.n_nodes() as NodeId)
}

/// GloVe weighting function: `(x/x_max)^alpha` clipped at 1.
pub fn glove_weight(x: f64, x_max: f64, alpha: f64) -> f64 {
    if x < x_max {
        (x / x_max).powf(alpha)
    } else {
        1.0
    }
}

/// Vocabulary-indexed dense word vectors. Row 0 (the reserved empty token)
/// is pinned to all zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    pub dim: usize,
    pub vectors: Array2<f64>,
}

impl EmbeddingTable {
    pub fn from_vectors(vectors: Array2<f64>) -> Result<EmbeddingTable> {
        if vectors.nrows() == 0 || vectors.ncols() == 0 {
            return Err(MatanError::Invalid("empty embedding matrix".into()));
        }
        if vectors.row(0).iter().any(|&x| x != 0.0) {
            return Err(MatanError::Invalid(
                "reserved empty-token row must be all zeros".into(),
            ));
        }
        Ok(EmbeddingTable { dim: vectors.ncols(), vectors })
    }

    pub fn zeros(vocab_size: usize, dim: usize) -> EmbeddingTable {
        EmbeddingTable { dim, vectors: Array2::zeros((vocab_size, dim)) }
    }

    pub fn vocab_size(&self) -> usize {
        self.vectors.nrows()
    }
}

/// Internal trainer state: main and context vectors plus bias terms.
struct GloveParams {
    w_main: Array2<f64>,
    w_ctx: Array2<f64>,
    b_main: Vec<f64>,
    b_ctx: Vec<f64>,
}

impl GloveParams {
    /// Seeded uniform init in (-0.5, 0.5)/(dim+1); the reserved empty row
    /// stays zero (it never receives updates either).
    fn init(vocab_size: usize, dim: usize, seed: u64) -> GloveParams {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scale = 1.0 / (dim + 1) as f64;
        let mut sample =
            |n: usize| -> Vec<f64> { (0..n).map(|_| (rng.random::<f64>() - 0.5) * scale).collect() };
        let mut w_main =
            Array2::from_shape_vec((vocab_size, dim), sample(vocab_size * dim)).unwrap();
        let mut w_ctx =
            Array2::from_shape_vec((vocab_size, dim), sample(vocab_size * dim)).unwrap();
        let mut b_main = sample(vocab_size);
        let mut b_ctx = sample(vocab_size);
        w_main.row_mut(EMPTY_TOKEN as usize).fill(0.0);
        w_ctx.row_mut(EMPTY_TOKEN as usize).fill(0.0);
        b_main[EMPTY_TOKEN as usize] = 0.0;
        b_ctx[EMPTY_TOKEN as usize] = 0.0;
        GloveParams { w_main, w_ctx, b_main, b_ctx }
    }

    fn into_table(self) -> EmbeddingTable {
        let vectors = &self.w_main + &self.w_ctx;
        EmbeddingTable { dim: vectors.ncols(), vectors }
    }
}

/// Train embeddings on a co-occurrence table. Entries are visited in a
/// seeded shuffled order each epoch; single-threaded and deterministic for
/// a fixed seed. Returns the table and the mean weighted loss per epoch.
pub fn train_glove(
    cooc: &CoocTable,
    vocab_size: usize,
    cfg: &GloveConfig,
) -> Result<(EmbeddingTable, Vec<f64>)> {
    if cooc.is_empty() {
        return Err(MatanError::Invalid("empty co-occurrence table".into()));
    }
    if cfg.dim == 0 {
        return Err(MatanError::Invalid("embedding dim must be >= 1".into()));
    }

    let mut params = GloveParams::init(vocab_size, cfg.dim, cfg.seed);
    let mut gsq_main = Array2::<f64>::ones((vocab_size, cfg.dim));
    let mut gsq_ctx = Array2::<f64>::ones((vocab_size, cfg.dim));
    let mut gsqb_main = vec![1.0f64; vocab_size];
    let mut gsqb_ctx = vec![1.0f64; vocab_size];

    let mut entries = cooc.sorted_entries();
    let mut order_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    order_rng.set_stream(1);

    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        use rand::seq::SliceRandom;
        entries.shuffle(&mut order_rng);

        let mut cost = 0.0;
        for &(i, j, x) in &entries {
            let (i, j) = (i as usize, j as usize);
            let dot: f64 = params
                .w_main
                .row(i)
                .iter()
                .zip(params.w_ctx.row(j).iter())
                .map(|(a, b)| a * b)
                .sum();
            let diff = dot + params.b_main[i] + params.b_ctx[j] - x.ln();
            let mut fdiff = glove_weight(x, cfg.x_max, cfg.alpha) * diff;
            cost += 0.5 * fdiff * diff;
            if !cost.is_finite() {
                return Err(MatanError::Numeric(
                    "non-finite GloVe loss; lower the learning rate".into(),
                ));
            }
            fdiff *= cfg.lr;

            let mut wi = params.w_main.row_mut(i);
            let mut wj = params.w_ctx.row_mut(j);
            let mut gi = gsq_main.row_mut(i);
            let mut gj = gsq_ctx.row_mut(j);
            for d in 0..cfg.dim {
                let t1 = fdiff * wj[d];
                let t2 = fdiff * wi[d];
                wi[d] -= t1 / gi[d].sqrt();
                wj[d] -= t2 / gj[d].sqrt();
                gi[d] += t1 * t1;
                gj[d] += t2 * t2;
            }
            params.b_main[i] -= fdiff / gsqb_main[i].sqrt();
            params.b_ctx[j] -= fdiff / gsqb_ctx[j].sqrt();
            gsqb_main[i] += fdiff * fdiff;
            gsqb_ctx[j] += fdiff * fdiff;
        }
        epoch_losses.push(cost / entries.len() as f64);
    }

    Ok((params.into_table(), epoch_losses))
}

/// Write `<token> <f1> ... <fD>` per vocabulary entry, shortest decimal
/// representation that parses back to the identical f64.
pub fn save_embeddings(table: &EmbeddingTable, vocab: &Vocab, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| MatanError::io(path, e))?;
    let mut out = BufWriter::new(file);
    let mut run = || -> std::io::Result<()> {
        let mut w = |s: String| out.write_all(s.as_bytes());
        for id in 0..table.vocab_size() {
            w(vocab.token(id as TokenId).to_string())?;
            for &x in table.vectors.row(id) {
                w(format!(" {x}"))?;
            }
            w("\n".to_string())?;
        }
        Ok(())
    };
    run().map_err(|e| MatanError::io(path, e))
}

/// Parse an embeddings file against a vocabulary. Tokens absent from the
/// vocabulary are skipped (their count is returned); rows of differing width
/// are an error. Vocabulary tokens missing from the file keep zero vectors.
pub fn load_embeddings(path: &Path, vocab: &Vocab) -> Result<(EmbeddingTable, usize)> {
    let file = File::open(path).map_err(|e| MatanError::io(path, e))?;
    let reader = BufReader::new(file);

    let mut dim: Option<usize> = None;
    let mut rows: Vec<(TokenId, Vec<f64>)> = Vec::new();
    let mut skipped = 0usize;
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| MatanError::io(path, e))?;
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split(' ');
        let token = parts.next().unwrap_or("");
        let values: Vec<f64> = parts
            .map(|p| {
                p.parse::<f64>().map_err(|_| {
                    MatanError::parse(path, lineno + 1, format!("bad float {p:?}"))
                })
            })
            .collect::<Result<_>>()?;
        if values.is_empty() {
            return Err(MatanError::parse(path, lineno + 1, "row has no values"));
        }
        match dim {
            None => dim = Some(values.len()),
            Some(d) if d != values.len() => {
                return Err(MatanError::parse(
                    path,
                    lineno + 1,
                    format!("row has {} values, expected {d}", values.len()),
                ));
            }
            _ => {}
        }
        match vocab.id(token) {
            Some(id) => rows.push((id, values)),
            None => skipped += 1,
        }
    }
    let dim = dim.ok_or_else(|| MatanError::Invalid("empty embeddings file".into()))?;
    let mut table = EmbeddingTable::zeros(vocab.size(), dim);
    for (id, values) in rows {
        if id != EMPTY_TOKEN {
            for (d, v) in values.into_iter().enumerate() {
                table.vectors[(id as usize, d)] = v;
            }
        }
    }
    Ok((table, skipped))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::load_documents;

    fn corpus_from(lines: &str, min_count: usize) -> Corpus {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(lines.as_bytes()).unwrap();
        load_documents(f.path(), min_count, 300).unwrap()
    }

    #[test]
    fn cooc_single_pair() {
        let c = corpus_from("p1\ta b\n", 1);
        let t = count_cooccurrences(&c, 5);
        let (a, b) = (c.vocab.id("a").unwrap(), c.vocab.id("b").unwrap());
        assert_eq!(t.get(a, b), 1.0);
        assert_eq!(t.get(b, a), 1.0);
    }

    #[test]
    fn cooc_distance_weighting() {
        let c = corpus_from("p1\ta b c\n", 1);
        let t = count_cooccurrences(&c, 5);
        let id = |s: &str| c.vocab.id(s).unwrap();
        assert_eq!(t.get(id("a"), id("b")), 1.0);
        assert_eq!(t.get(id("b"), id("c")), 1.0);
        assert_eq!(t.get(id("a"), id("c")), 0.5);
    }

    #[test]
    fn cooc_empty_doc_contributes_nothing() {
        // the only token is OOV at min_count=2, leaving an EMPTY-token doc
        let c = corpus_from("p1\tunique\n", 2);
        let t = count_cooccurrences(&c, 5);
        assert!(t.is_empty());
    }

    #[test]
    fn cooc_windows_do_not_cross_documents() {
        let c = corpus_from("p1\ta b\np2\tc d\n", 1);
        let t = count_cooccurrences(&c, 5);
        assert_eq!(t.get(c.vocab.id("b").unwrap(), c.vocab.id("c").unwrap()), 0.0);
    }

    #[test]
    fn cooc_symmetry_on_random_corpus() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let mut text = String::new();
        for p in 0..30 {
            text.push_str(&format!("p{p}\t"));
            for _ in 0..rng.random_range(1..40) {
                text.push_str(&format!("t{} ", rng.random_range(0..25)));
            }
            text.push('\n');
        }
        let c = corpus_from(&text, 1);
        let t = count_cooccurrences(&c, 5);
        for (a, b, w) in t.sorted_entries() {
            assert_eq!(w, t.get(b, a), "asymmetry at ({a},{b})");
            assert_ne!(a, b, "diagonal entry");
            assert!(w > 0.0);
        }
    }

    #[test]
    fn weight_clips_at_x_max() {
        assert_eq!(glove_weight(10.0, 10.0, 0.75), 1.0);
        assert_eq!(glove_weight(20.0, 10.0, 0.75), 1.0);
    }

    #[test]
    fn weight_fractional_value() {
        let w = glove_weight(5.0, 10.0, 0.75);
        assert!((w - 0.5f64.powf(0.75)).abs() < 1e-15);
        assert!((w - 0.59460355750136).abs() < 1e-12);
    }

    #[test]
    fn weight_monotone_nondecreasing() {
        let mut prev = 0.0;
        for i in 1..200 {
            let w = glove_weight(i as f64 * 0.1, 10.0, 0.75);
            assert!(w >= prev);
            assert!((0.0..=1.0).contains(&w));
            prev = w;
        }
    }

    #[test]
    fn train_overfits_single_entry() {
        // one entry with X = e so log X = 1; many epochs must reconstruct it
        let mut cooc = CoocTable::default();
        cooc.add(1, 2, std::f64::consts::E);
        let cfg = GloveConfig { dim: 8, epochs: 2000, lr: 0.05, seed: 3, ..Default::default() };
        let (_, losses) = train_glove(&cooc, 3, &cfg).unwrap();
        // reconstruction error of that entry: loss = 0.5*f*(diff)^2 per
        // direction, f = (e/10)^0.75; mean loss < 1e-3 forces |diff| small
        let last = *losses.last().unwrap();
        assert!(last < 1e-3, "failed to overfit: loss {last}");
    }

    #[test]
    fn zero_epochs_returns_seeded_init() {
        let mut cooc = CoocTable::default();
        cooc.add(1, 2, 1.0);
        let cfg = GloveConfig { dim: 4, epochs: 0, seed: 11, ..Default::default() };
        let (table, losses) = train_glove(&cooc, 3, &cfg).unwrap();
        assert!(losses.is_empty());
        let init = GloveParams::init(3, 4, 11).into_table();
        assert_eq!(table.vectors, init.vectors);
        assert!(table.vectors.row(0).iter().all(|&x| x == 0.0));
    }

    #[test]
    fn training_is_deterministic_per_seed() {
        let c = corpus_from("p1\ta b c a\np2\tb c d\np3\ta d d c\n", 1);
        let cooc = count_cooccurrences(&c, 5);
        let cfg = GloveConfig { dim: 6, epochs: 10, seed: 5, ..Default::default() };
        let (t1, l1) = train_glove(&cooc, c.vocab.size(), &cfg).unwrap();
        let (t2, l2) = train_glove(&cooc, c.vocab.size(), &cfg).unwrap();
        assert_eq!(t1.vectors, t2.vectors);
        assert_eq!(l1, l2);
    }

    #[test]
    fn epoch_loss_non_increasing_within_slack() {
        let c = corpus_from(
            "p1\tgraph node edge graph node\np2\tword vector word space\n\
             p3\tgraph edge node vector\np4\tword space vector graph\n",
            1,
        );
        let cooc = count_cooccurrences(&c, 5);
        let cfg = GloveConfig { dim: 8, epochs: 30, seed: 1, ..Default::default() };
        let (_, losses) = train_glove(&cooc, c.vocab.size(), &cfg).unwrap();
        for w in losses.windows(2) {
            assert!(w[1] <= w[0] * 1.05, "loss rose beyond 5% slack: {} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn save_load_round_trip_is_exact() {
        let c = corpus_from("p1\talpha beta gamma alpha\n", 1);
        let cooc = count_cooccurrences(&c, 5);
        let cfg = GloveConfig { dim: 5, epochs: 3, seed: 2, ..Default::default() };
        let (table, _) = train_glove(&cooc, c.vocab.size(), &cfg).unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        save_embeddings(&table, &c.vocab, f.path()).unwrap();
        let (loaded, skipped) = load_embeddings(f.path(), &c.vocab).unwrap();
        assert_eq!(skipped, 0);
        assert_eq!(table.vectors, loaded.vectors);
    }

    #[test]
    fn load_parses_rows_into_vocab_slots() {
        let c = corpus_from("p1\tgraph learning\n", 1);
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "graph 0.1 -0.2").unwrap();
        let (table, _) = load_embeddings(f.path(), &c.vocab).unwrap();
        let id = c.vocab.id("graph").unwrap() as usize;
        assert_eq!(table.vectors.row(id).to_vec(), vec![0.1, -0.2]);
        // vocab token absent from the file keeps a zero vector
        let other = c.vocab.id("learning").unwrap() as usize;
        assert!(table.vectors.row(other).iter().all(|&x| x == 0.0));
    }

    #[test]
    fn load_rejects_ragged_rows() {
        let c = corpus_from("p1\ta b\n", 1);
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "a 0.1 0.2").unwrap();
        writeln!(f, "b 0.1 0.2 0.3").unwrap();
        assert!(load_embeddings(f.path(), &c.vocab).is_err());
    }

    #[test]
    fn load_skips_unknown_tokens_with_count() {
        let c = corpus_from("p1\ta b\n", 1);
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "a 0.5 0.5").unwrap();
        writeln!(f, "zzz 1.0 1.0").unwrap();
        let (_, skipped) = load_embeddings(f.path(), &c.vocab).unwrap();
        assert_eq!(skipped, 1);
    }
}
