//! Command-line pipeline: prepare | train-glove | train | eval-edges |
//! eval-nodes | score. Every run echoes its effective configuration into
//! the output directory; all artifacts are plain text.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::attention::{load_model, pair_score, save_model, DocMatrix, Pooling};
use crate::config::{parse_seed_list, RunConfig};
use crate::corpus::{load_documents, Corpus};
use crate::error::{MatanError, Result};
use crate::eval::{evaluate_edges_hidden, evaluate_nodes_hidden, EvalConfig};
use crate::glove::{count_cooccurrences, load_embeddings, save_embeddings, train_glove};
use crate::graph::load_edges;
use crate::trainer::{train, PositiveSampling};

#[derive(Parser, Debug)]
#[command(
    name = "matan",
    version,
    about = "Mutual attention link prediction for text-attributed networks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Load and validate the documents and edges files; write the tokenized
    /// corpus and a summary.
    Prepare(CommonArgs),
    /// Train word embeddings on document co-occurrences and save them.
    TrainGlove(CommonArgs),
    /// Train the attention projections on the full graph and save the model.
    Train(CommonArgs),
    /// Edges-hidden link prediction: hide edges, train, report ROC AUC.
    EvalEdges(CommonArgs),
    /// Nodes-hidden link prediction: hide nodes, train, report ROC AUC.
    EvalNodes(CommonArgs),
    /// Score one document pair with a trained model.
    Score(ScoreArgs),
}

#[derive(Args, Debug, Default)]
pub struct CommonArgs {
    /// Flat key=value config file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Documents file: one `<id>\t<text>` per line.
    #[arg(long)]
    pub docs: Option<PathBuf>,
    /// Edges file: one `<id>\t<id>` per line.
    #[arg(long)]
    pub edges: Option<PathBuf>,
    /// Pretrained embeddings file (otherwise trained in-run).
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// Model file to read or write.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Output directory for all artifacts.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub window: Option<usize>,
    #[arg(long)]
    pub x_max: Option<f64>,
    #[arg(long)]
    pub glove_epochs: Option<usize>,
    #[arg(long)]
    pub glove_lr: Option<f64>,
    #[arg(long)]
    pub min_count: Option<usize>,
    #[arg(long)]
    pub max_doc_len: Option<usize>,
    /// Negative samples per positive pair.
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub n_pairs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub train_fraction: Option<f64>,
    /// Comma-separated seed list; single-model commands use the first.
    #[arg(long, alias = "seed")]
    pub seeds: Option<String>,
    /// Train word embeddings on the full corpus even for nodes-hidden runs.
    #[arg(long)]
    pub full_corpus_embeddings: bool,
    /// Pooling of attended word vectors: mean | sum.
    #[arg(long)]
    pub pooling: Option<String>,
    /// Positive link sampling: uniform-edges | m-weighted.
    #[arg(long)]
    pub positive_sampling: Option<String>,
}

#[derive(Args, Debug)]
pub struct ScoreArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// External id of the first document.
    #[arg(long)]
    pub u: String,
    /// External id of the second document.
    #[arg(long)]
    pub v: String,
}

impl CommonArgs {
    /// defaults < config file < flags
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        if let Some(file) = &self.config {
            cfg.apply_file(file)?;
        }
        if let Some(v) = &self.docs {
            cfg.docs = Some(v.clone());
        }
        if let Some(v) = &self.edges {
            cfg.edges = Some(v.clone());
        }
        if let Some(v) = &self.embeddings {
            cfg.embeddings = Some(v.clone());
        }
        if let Some(v) = &self.model {
            cfg.model = Some(v.clone());
        }
        if let Some(v) = &self.out {
            cfg.out = Some(v.clone());
        }
        if let Some(v) = self.dim {
            cfg.dim = v;
        }
        if let Some(v) = self.window {
            cfg.window = v;
        }
        if let Some(v) = self.x_max {
            cfg.x_max = v;
        }
        if let Some(v) = self.glove_epochs {
            cfg.glove_epochs = v;
        }
        if let Some(v) = self.glove_lr {
            cfg.glove_lr = v;
        }
        if let Some(v) = self.min_count {
            cfg.min_count = v;
        }
        if let Some(v) = self.max_doc_len {
            cfg.max_doc_len = v;
        }
        if let Some(v) = self.k {
            cfg.k = v;
        }
        if let Some(v) = self.n_pairs {
            cfg.n_pairs = v;
        }
        if let Some(v) = self.lr {
            cfg.lr = v;
        }
        if let Some(v) = self.batch_size {
            cfg.batch_size = v;
        }
        if let Some(v) = self.train_fraction {
            cfg.train_fraction = v;
        }
        if let Some(v) = &self.seeds {
            cfg.seeds = parse_seed_list(v)?;
        }
        if self.full_corpus_embeddings {
            cfg.full_corpus_embeddings = true;
        }
        if let Some(v) = &self.pooling {
            cfg.pooling = Pooling::parse(v)?;
        }
        if let Some(v) = &self.positive_sampling {
            cfg.positive_sampling = PositiveSampling::parse(v)?;
        }
        Ok(cfg)
    }
}

fn require<'a>(field: &'a Option<PathBuf>, name: &str) -> Result<&'a Path> {
    field
        .as_deref()
        .ok_or_else(|| MatanError::Invalid(format!("missing required path --{name}")))
}

fn load_corpus(cfg: &RunConfig) -> Result<Corpus> {
    let docs = require(&cfg.docs, "docs")?;
    load_documents(docs, cfg.min_count, cfg.max_doc_len)
}

fn write_out(path: &Path, content: &str) -> Result<()> {
    fs::write(path, content).map_err(|e| MatanError::io(path, e))
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Prepare(args) => run_prepare(&args.resolve()?),
        Command::TrainGlove(args) => run_train_glove(&args.resolve()?),
        Command::Train(args) => run_train(&args.resolve()?),
        Command::EvalEdges(args) => run_eval(&args.resolve()?, EvalTask::EdgesHidden),
        Command::EvalNodes(args) => run_eval(&args.resolve()?, EvalTask::NodesHidden),
        Command::Score(args) => run_score(&args),
    }
}

fn run_prepare(cfg: &RunConfig) -> Result<()> {
    let out = require(&cfg.out, "out")?.to_path_buf();
    cfg.echo_to(&out)?;
    let corpus = load_corpus(cfg)?;
    let (graph, report) = load_edges(require(&cfg.edges, "edges")?, &corpus)?;

    let mut tokens = String::new();
    for n in 0..corpus.n_nodes() as u32 {
        writeln!(tokens, "{}\t{}", corpus.external_id(n), corpus.doc_text(n)).unwrap();
    }
    write_out(&out.join("corpus-tokens.tsv"), &tokens)?;

    if report.unknown_ids > 0 {
        eprintln!("warning: skipped {} edge lines with unknown ids", report.unknown_ids);
    }
    println!(
        "nodes={} edges={} vocab={} skipped_unknown={} self_loops={} duplicates={}",
        corpus.n_nodes(),
        graph.n_edges(),
        corpus.vocab.size(),
        report.unknown_ids,
        report.self_loops,
        report.duplicates
    );
    Ok(())
}

fn run_train_glove(cfg: &RunConfig) -> Result<()> {
    let out = require(&cfg.out, "out")?.to_path_buf();
    cfg.echo_to(&out)?;
    let corpus = load_corpus(cfg)?;
    let seed = cfg.seeds[0];
    let cooc = count_cooccurrences(&corpus, cfg.window);
    let (table, losses) = train_glove(&cooc, corpus.vocab.size(), &cfg.glove_config(seed))?;
    save_embeddings(&table, &corpus.vocab, &out.join("embeddings.txt"))?;

    let mut trace = String::from("epoch\tmean_loss\n");
    for (i, l) in losses.iter().enumerate() {
        writeln!(trace, "{i}\t{l}").unwrap();
    }
    write_out(&out.join("glove-loss.tsv"), &trace)?;
    println!(
        "vocab={} cooc_entries={} final_glove_loss={}",
        corpus.vocab.size(),
        cooc.len(),
        losses.last().copied().unwrap_or(f64::NAN)
    );
    Ok(())
}

fn run_train(cfg: &RunConfig) -> Result<()> {
    let out = require(&cfg.out, "out")?.to_path_buf();
    cfg.echo_to(&out)?;
    let corpus = load_corpus(cfg)?;
    let (graph, _) = load_edges(require(&cfg.edges, "edges")?, &corpus)?;
    let seed = cfg.seeds[0];

    let table = match &cfg.embeddings {
        Some(path) => load_embeddings(path, &corpus.vocab)?.0,
        None => {
            let cooc = count_cooccurrences(&corpus, cfg.window);
            let (table, _) = train_glove(&cooc, corpus.vocab.size(), &cfg.glove_config(seed))?;
            save_embeddings(&table, &corpus.vocab, &out.join("embeddings.txt"))?;
            table
        }
    };

    let (params, trace) = train(&corpus, &graph, &table, &cfg.train_config(seed))?;
    let model_path = cfg.model.clone().unwrap_or_else(|| out.join("model.txt"));
    save_model(&params, &model_path)?;

    let mut tsv = String::from("batch_index\tmean_loss\n");
    for (i, l) in trace.losses.iter().enumerate() {
        writeln!(tsv, "{i}\t{l}").unwrap();
    }
    write_out(&out.join("loss-trace.tsv"), &tsv)?;
    println!(
        "final_loss={} batches={} samples={}",
        trace.losses.last().copied().unwrap_or(f64::NAN),
        trace.losses.len(),
        trace.samples_seen
    );
    Ok(())
}

#[derive(Clone, Copy)]
enum EvalTask {
    EdgesHidden,
    NodesHidden,
}

impl EvalTask {
    fn name(self) -> &'static str {
        match self {
            EvalTask::EdgesHidden => "edges-hidden",
            EvalTask::NodesHidden => "nodes-hidden",
        }
    }
}

fn run_eval(cfg: &RunConfig, task: EvalTask) -> Result<()> {
    let out = require(&cfg.out, "out")?.to_path_buf();
    cfg.echo_to(&out)?;
    let corpus = load_corpus(cfg)?;
    let (graph, _) = load_edges(require(&cfg.edges, "edges")?, &corpus)?;

    let eval_cfg = EvalConfig {
        glove: cfg.glove_config(0),
        train: cfg.train_config(0),
        full_corpus_embeddings: cfg.full_corpus_embeddings,
    };

    let mut aucs = Vec::with_capacity(cfg.seeds.len());
    let mut results = String::from("task\ttrain_fraction\tseed\tauc\n");
    for &seed in &cfg.seeds {
        let auc = match task {
            EvalTask::EdgesHidden => {
                evaluate_edges_hidden(&corpus, &graph, cfg.train_fraction, &eval_cfg, seed)?
            }
            EvalTask::NodesHidden => {
                evaluate_nodes_hidden(&corpus, &graph, cfg.train_fraction, &eval_cfg, seed)?
            }
        };
        writeln!(results, "{}\t{}\t{seed}\t{auc}", task.name(), cfg.train_fraction).unwrap();
        aucs.push(auc);
    }
    write_out(&out.join("results.tsv"), &results)?;

    let mean = aucs.iter().sum::<f64>() / aucs.len() as f64;
    let std = if aucs.len() > 1 {
        (aucs.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (aucs.len() - 1) as f64).sqrt()
    } else {
        0.0
    };
    let mut summary = String::from("task\ttrain_fraction\tmean_auc\tstd_auc\tn_seeds\n");
    writeln!(
        summary,
        "{}\t{}\t{mean}\t{std}\t{}",
        task.name(),
        cfg.train_fraction,
        aucs.len()
    )
    .unwrap();
    write_out(&out.join("summary.tsv"), &summary)?;

    println!("auc={mean:.4}");
    Ok(())
}

fn run_score(args: &ScoreArgs) -> Result<()> {
    let cfg = args.common.resolve()?;
    if let Some(out) = &cfg.out {
        cfg.echo_to(out)?;
    }
    let corpus = load_corpus(&cfg)?;
    let table = load_embeddings(require(&cfg.embeddings, "embeddings")?, &corpus.vocab)?.0;
    let params = load_model(require(&cfg.model, "model")?)?;
    if params.dim != table.dim {
        return Err(MatanError::Invalid(format!(
            "model dim {} does not match embedding dim {}",
            params.dim, table.dim
        )));
    }
    let lookup = |ext: &str| -> Result<DocMatrix> {
        let node = corpus
            .node_of(ext)
            .ok_or_else(|| MatanError::Invalid(format!("unknown document id {ext:?}")))?;
        DocMatrix::from_doc(corpus.doc(node), &table)
    };
    let w_u = lookup(&args.u)?;
    let w_v = lookup(&args.v)?;
    let score = pair_score(&w_u, &w_v, &params, cfg.pooling)?;
    println!("{score}");
    Ok(())
}
