//! End-to-end pipeline tests through the library and the CLI binary.

mod common;

use std::process::Command;

use matan::attention::{init_params, load_model, pair_score, DocMatrix, Pooling};
use matan::corpus::load_documents;
use matan::eval::{evaluate_nodes_hidden, EvalConfig};
use matan::glove::{load_embeddings, GloveConfig};
use matan::graph::load_edges;
use matan::trainer::TrainConfig;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_matan"))
}

#[test]
fn prepare_tokenized_corpus_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let (docs, edges) = common::write_planted_corpus(dir.path(), 1);
    let out = dir.path().join("out");
    let status = bin()
        .args(["prepare", "--docs"])
        .arg(&docs)
        .arg("--edges")
        .arg(&edges)
        .arg("--out")
        .arg(&out)
        .args(["--min-count", "1"])
        .output()
        .unwrap();
    assert!(status.status.success());

    let original = load_documents(&docs, 1, 300).unwrap();
    let reloaded = load_documents(&out.join("corpus-tokens.tsv"), 1, 300).unwrap();
    assert_eq!(original.n_nodes(), reloaded.n_nodes());
    for n in 0..original.n_nodes() as u32 {
        assert_eq!(original.external_id(n), reloaded.external_id(n));
        assert_eq!(original.doc_text(n), reloaded.doc_text(n));
    }
}

#[test]
fn train_with_zero_pairs_writes_init_model() {
    let dir = tempfile::tempdir().unwrap();
    let (docs, edges) = common::write_planted_corpus(dir.path(), 2);
    let out = dir.path().join("out");
    let status = bin()
        .args(["train", "--docs"])
        .arg(&docs)
        .arg("--edges")
        .arg(&edges)
        .arg("--out")
        .arg(&out)
        .args(["--min-count", "1", "--dim", "12", "--glove-epochs", "2"])
        .args(["--n-pairs", "0", "--seeds", "9"])
        .output()
        .unwrap();
    assert!(status.status.success());
    let model = load_model(&out.join("model.txt")).unwrap();
    assert_eq!(model, init_params(12, 9));
}

#[test]
fn score_subcommand_prints_library_pair_score() {
    let dir = tempfile::tempdir().unwrap();
    let (docs, edges) = common::write_planted_corpus(dir.path(), 3);
    let out = dir.path().join("out");
    let status = bin()
        .args(["train", "--docs"])
        .arg(&docs)
        .arg("--edges")
        .arg(&edges)
        .arg("--out")
        .arg(&out)
        .args(["--min-count", "1", "--dim", "12", "--glove-epochs", "3"])
        .args(["--n-pairs", "300", "--seeds", "4"])
        .output()
        .unwrap();
    assert!(status.status.success());

    let output = bin()
        .args(["score", "--docs"])
        .arg(&docs)
        .arg("--embeddings")
        .arg(out.join("embeddings.txt"))
        .arg("--model")
        .arg(out.join("model.txt"))
        .args(["--min-count", "1", "--u", "n0", "--v", "n10"])
        .output()
        .unwrap();
    assert!(output.status.success());
    let printed: f64 = String::from_utf8(output.stdout).unwrap().trim().parse().unwrap();

    let corpus = load_documents(&docs, 1, 300).unwrap();
    let (table, _) = load_embeddings(&out.join("embeddings.txt"), &corpus.vocab).unwrap();
    let params = load_model(&out.join("model.txt")).unwrap();
    let u = corpus.node_of("n0").unwrap();
    let v = corpus.node_of("n10").unwrap();
    let wu = DocMatrix::from_doc(corpus.doc(u), &table).unwrap();
    let wv = DocMatrix::from_doc(corpus.doc(v), &table).unwrap();
    let expected = pair_score(&wu, &wv, &params, Pooling::Mean).unwrap();
    assert_eq!(printed, expected, "score output must equal the library value");
}

#[test]
fn eval_edges_writes_per_seed_results_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let (docs, edges) = common::write_planted_corpus(dir.path(), 4);
    let out = dir.path().join("out");
    let output = bin()
        .args(["eval-edges", "--docs"])
        .arg(&docs)
        .arg("--edges")
        .arg(&edges)
        .arg("--out")
        .arg(&out)
        .args(["--min-count", "1", "--dim", "12", "--glove-epochs", "3"])
        .args(["--n-pairs", "400", "--seeds", "0,1,2", "--train-fraction", "0.5"])
        .output()
        .unwrap();
    assert!(output.status.success());
    let stdout = String::from_utf8(output.stdout).unwrap();
    assert!(stdout.starts_with("auc="), "summary line: {stdout:?}");

    let results = std::fs::read_to_string(out.join("results.tsv")).unwrap();
    let rows: Vec<&str> = results.lines().collect();
    assert_eq!(rows[0], "task\ttrain_fraction\tseed\tauc");
    assert_eq!(rows.len(), 4, "header + one row per seed");
    let aucs: Vec<f64> = rows[1..]
        .iter()
        .map(|r| r.rsplit('\t').next().unwrap().parse().unwrap())
        .collect();

    let summary = std::fs::read_to_string(out.join("summary.tsv")).unwrap();
    let srow: Vec<&str> = summary.lines().nth(1).unwrap().split('\t').collect();
    let mean: f64 = srow[2].parse().unwrap();
    let want = aucs.iter().sum::<f64>() / aucs.len() as f64;
    assert_eq!(mean, want);
    assert_eq!(srow[4], "3");
}

#[test]
fn nodes_hidden_runs_deterministically_on_synthetic_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let (corpus, graph) = common::load_planted_corpus(dir.path(), 5);
    let cfg = EvalConfig {
        glove: GloveConfig { dim: 16, epochs: 8, ..Default::default() },
        train: TrainConfig { n_pairs: 2_000, lr: 3e-3, ..Default::default() },
        full_corpus_embeddings: false,
    };
    let a = evaluate_nodes_hidden(&corpus, &graph, 0.5, &cfg, 3).unwrap();
    let b = evaluate_nodes_hidden(&corpus, &graph, 0.5, &cfg, 3).unwrap();
    assert_eq!(a, b, "same seed must give the identical AUC");
    assert!((0.0..=1.0).contains(&a));

    let leaky = EvalConfig { full_corpus_embeddings: true, ..cfg };
    let c = evaluate_nodes_hidden(&corpus, &graph, 0.5, &leaky, 3).unwrap();
    assert!((0.0..=1.0).contains(&c));
    assert_ne!(a, c, "leakage flag must change the embedding corpus");
}

#[test]
fn linqs_format_conversion_and_pipeline_run() {
    use matan::eval::evaluate_edges_hidden;
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(12);

    // miniature dataset in the LINQS layout: binary feature rows + cites
    let n_nodes = 60;
    let n_features = 30;
    let mut content = String::new();
    for n in 0..n_nodes {
        let feats: Vec<&str> = (0..n_features)
            .map(|_| if rng.random_bool(0.2) { "1" } else { "0" })
            .collect();
        content.push_str(&format!("paper{n}\t{}\tlabel\n", feats.join("\t")));
    }
    let converted = common::convert_content(&content);
    assert_eq!(converted.lines().count(), n_nodes);
    let first = converted.lines().next().unwrap();
    assert!(first.starts_with("paper0\t"));
    for tok in first.split('\t').nth(1).unwrap().split_whitespace() {
        assert!(tok.starts_with('w'), "converted token {tok:?}");
    }

    let dir = tempfile::tempdir().unwrap();
    let docs = dir.path().join("documents.tsv");
    let edges = dir.path().join("edges.tsv");
    std::fs::write(&docs, &converted).unwrap();
    let mut cites = String::new();
    for n in 0..n_nodes {
        cites.push_str(&format!("paper{n}\tpaper{}\n", (n + 1) % n_nodes));
        cites.push_str(&format!("paper{n}\tpaper{}\n", (n + 7) % n_nodes));
    }
    std::fs::write(&edges, cites).unwrap();

    let corpus = load_documents(&docs, 1, 300).unwrap();
    let (graph, _) = load_edges(&edges, &corpus).unwrap();
    assert_eq!(corpus.n_nodes(), n_nodes);
    assert_eq!(graph.n_edges(), 2 * n_nodes);

    let cfg = EvalConfig {
        glove: GloveConfig { dim: 8, epochs: 3, ..Default::default() },
        train: TrainConfig { n_pairs: 200, ..Default::default() },
        full_corpus_embeddings: false,
    };
    let auc = evaluate_edges_hidden(&corpus, &graph, 0.5, &cfg, 0).unwrap();
    assert!((0.0..=1.0).contains(&auc), "auc {auc}");
}

#[test]
fn loss_trace_tail_below_head_on_planted_corpus() {
    use matan::trainer::train;
    let dir = tempfile::tempdir().unwrap();
    let (corpus, graph) = common::load_planted_corpus(dir.path(), 7);
    let table = common::random_embeddings(corpus.vocab.size(), 32, 7);
    let cfg = TrainConfig { n_pairs: 10_000, lr: 3e-3, seed: 7, ..Default::default() };
    let (_, trace) = train(&corpus, &graph, &table, &cfg).unwrap();

    let tenth = trace.losses.len() / 10;
    let head: f64 = trace.losses[..tenth].iter().sum::<f64>() / tenth as f64;
    let tail: f64 =
        trace.losses[trace.losses.len() - tenth..].iter().sum::<f64>() / tenth as f64;
    assert!(
        tail < head,
        "loss did not decrease: first 10% mean {head:.4}, last 10% mean {tail:.4}"
    );
}

#[test]
fn unknown_flag_and_subcommand_fail_with_usage() {
    let out = bin().args(["frobnicate"]).output().unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("Usage") || err.contains("usage"), "stderr: {err}");

    let out = bin().args(["train", "--no-such-flag"]).output().unwrap();
    assert!(!out.status.success());
}

#[test]
fn missing_input_file_names_the_path() {
    let out = bin()
        .args(["prepare", "--docs", "/nonexistent/docs.tsv", "--edges", "/nonexistent/e.tsv"])
        .args(["--out", "/tmp/matan-missing-input-test"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("/nonexistent/docs.tsv"), "stderr: {err}");
}

#[test]
fn config_file_applies_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let (docs, edges) = common::write_planted_corpus(dir.path(), 6);
    let cfg_file = dir.path().join("run.cfg");
    std::fs::write(&cfg_file, "dim=24\nglove_epochs=2\nmin_count=1\nn_pairs=0\nseeds=5\n")
        .unwrap();
    let out = dir.path().join("out");
    let status = bin()
        .args(["train", "--config"])
        .arg(&cfg_file)
        .arg("--docs")
        .arg(&docs)
        .arg("--edges")
        .arg(&edges)
        .arg("--out")
        .arg(&out)
        .args(["--dim", "8"]) // flag overrides the file
        .output()
        .unwrap();
    assert!(status.status.success());
    let echoed = std::fs::read_to_string(out.join("effective-config.txt")).unwrap();
    assert!(echoed.contains("dim=8"), "flag must win: {echoed}");
    assert!(echoed.contains("glove_epochs=2"), "file must win over default");
    let model = load_model(&out.join("model.txt")).unwrap();
    assert_eq!(model.dim, 8);

    let bad = dir.path().join("bad.cfg");
    std::fs::write(&bad, "no_such_key=1\n").unwrap();
    let out2 = bin()
        .args(["train", "--config"])
        .arg(&bad)
        .output()
        .unwrap();
    assert!(!out2.status.success());
    let err = String::from_utf8(out2.stderr).unwrap();
    assert!(err.contains("no_such_key"), "stderr: {err}");
}
