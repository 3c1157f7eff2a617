//! End-to-end tests of the command-line interface.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

fn arcparse(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_arcparse"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn micro_config(dir: &Path, extra: serde_json::Value) -> PathBuf {
    let mut config = serde_json::json!({
        "epochs": 2,
        "seed": 5,
        "dims": {"word_emb": 8, "pos_emb": 8, "lstm": 12, "hidden": 12}
    });
    config
        .as_object_mut()
        .unwrap()
        .extend(extra.as_object().cloned().unwrap_or_default());
    let path = dir.join("config.json");
    std::fs::write(&path, config.to_string()).unwrap();
    path
}

fn train_micro_model(dir: &Path) -> PathBuf {
    let config = micro_config(
        dir,
        serde_json::json!({"oracle": "hybrid", "explore": true, "epochs": 12}),
    );
    let model = dir.join("model.bin");
    let out = arcparse(&[
        "train",
        "--train",
        fixture("train50.conllu").to_str().unwrap(),
        "--dev",
        fixture("train50.conllu").to_str().unwrap(),
        "--model",
        model.to_str().unwrap(),
        "--config",
        config.to_str().unwrap(),
        "--threads",
        "2",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    model
}

#[test]
fn train_emits_model_metrics_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let model = train_micro_model(dir.path());
    assert!(model.exists());

    let manifest: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("model.bin.manifest.json")).unwrap(),
    )
    .unwrap();
    let epochs = manifest["config"]["epochs"].as_u64().unwrap() as usize;

    let metrics = std::fs::read_to_string(dir.path().join("model.bin.metrics.jsonl")).unwrap();
    let lines: Vec<&str> = metrics.lines().collect();
    assert_eq!(lines.len(), epochs, "one JSONL line per epoch");
    for line in lines {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(v["train_loss"].as_f64().unwrap().is_finite());
        assert!(v["dev_uas"].as_f64().unwrap() <= 100.0);
    }

    assert_eq!(manifest["command"], "train");
    assert_eq!(manifest["inputs"].as_array().unwrap().len(), 2);
    assert_eq!(
        manifest["inputs"][0]["sha256"], manifest["inputs"][1]["sha256"],
        "train and dev are the same file here"
    );
}

#[test]
fn flags_override_config_file_values() {
    let dir = tempfile::tempdir().unwrap();
    let config = micro_config(dir.path(), serde_json::json!({}));
    let model = dir.path().join("model.bin");
    let out = arcparse(&[
        "train",
        "--train",
        fixture("train50.conllu").to_str().unwrap(),
        "--dev",
        fixture("train50.conllu").to_str().unwrap(),
        "--model",
        model.to_str().unwrap(),
        "--config",
        config.to_str().unwrap(),
        "--epochs",
        "1",
        "--threads",
        "1",
    ]);
    assert!(out.status.success());
    let manifest: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("model.bin.manifest.json")).unwrap(),
    )
    .unwrap();
    // Flag beats file; untouched file values survive; defaults fill the rest.
    assert_eq!(manifest["config"]["epochs"], 1);
    assert_eq!(manifest["config"]["seed"], 5);
    assert_eq!(manifest["config"]["oracle"], "standard");
    assert_eq!(manifest["config"]["p_shift"], 0.5);
}

#[test]
fn explore_with_standard_oracle_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = arcparse(&[
        "train",
        "--train",
        fixture("train50.conllu").to_str().unwrap(),
        "--dev",
        fixture("train50.conllu").to_str().unwrap(),
        "--model",
        dir.path().join("m.bin").to_str().unwrap(),
        "--oracle",
        "standard",
        "--explore",
    ]);
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("hybrid"), "{stderr}");
}

#[test]
fn missing_input_fails_nonzero() {
    let out = arcparse(&["stats", "--input", "/nonexistent/file.conllu"]);
    assert!(!out.status.success());
}

#[test]
fn parse_replaces_heads_and_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let model = train_micro_model(dir.path());
    let parsed = dir.path().join("parsed.conllu");
    let out = arcparse(&[
        "parse",
        "--model",
        model.to_str().unwrap(),
        "--input",
        fixture("train50.conllu").to_str().unwrap(),
        "--output",
        parsed.to_str().unwrap(),
        "--threads",
        "2",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    // Output is valid CoNLL-U with the same shape as the input.
    let trees =
        arcparse::treebank::read_conllu(&parsed, arcparse::treebank::PosSource::Xpos).unwrap();
    assert_eq!(trees.len(), 50);
    // Non-HEAD/DEPREL columns are untouched.
    let original = std::fs::read_to_string(fixture("train50.conllu")).unwrap();
    let rewritten = std::fs::read_to_string(&parsed).unwrap();
    for (a, b) in original.lines().zip(rewritten.lines()) {
        if a.starts_with('#') || a.is_empty() {
            assert_eq!(a, b);
            continue;
        }
        let fa: Vec<&str> = a.split('\t').collect();
        let fb: Vec<&str> = b.split('\t').collect();
        for col in [0, 1, 2, 3, 4, 5, 8, 9] {
            assert_eq!(fa[col], fb[col], "column {col} changed");
        }
    }
    assert!(dir.path().join("parsed.conllu.manifest.json").exists());

    // The model overfits the fixture, so parsing its own training data and
    // evaluating against it scores 100.
    let eval = arcparse(&[
        "eval",
        "--gold",
        fixture("train50.conllu").to_str().unwrap(),
        "--pred",
        parsed.to_str().unwrap(),
    ]);
    assert!(eval.status.success());
    let report: serde_json::Value =
        serde_json::from_slice(&eval.stdout).expect("JSON report on stdout");
    assert_eq!(report["report"]["uas"], 100.0);
    assert_eq!(report["report"]["uem"], 100.0);
}

#[test]
fn parse_keeps_multiword_ranges_and_comments_untouched() {
    let dir = tempfile::tempdir().unwrap();
    let model = train_micro_model(dir.path());
    let out = arcparse(&[
        "parse",
        "--model",
        model.to_str().unwrap(),
        "--input",
        fixture("tiny.conllu").to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = String::from_utf8(out.stdout).unwrap();
    // The range line and comments survive verbatim, in place.
    assert!(text.contains("# sent_id = chain\n1-2\tdel\t_\t_\t_\t_\t_\t_\t_\t_\n1\tde"));
    // Every word row got an integer head within its sentence.
    let reread =
        arcparse::evaluator::read_predictions(&{
            let p = dir.path().join("reread.conllu");
            std::fs::write(&p, &text).unwrap();
            p
        })
        .unwrap();
    assert_eq!(reread.len(), 3);
    assert_eq!(reread[1].heads.len(), 3);
}

#[test]
fn parse_of_empty_input_is_empty_output() {
    let dir = tempfile::tempdir().unwrap();
    let model = train_micro_model(dir.path());
    let empty = dir.path().join("empty.conllu");
    std::fs::write(&empty, "").unwrap();
    let out = arcparse(&[
        "parse",
        "--model",
        model.to_str().unwrap(),
        "--input",
        empty.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
}

#[test]
fn eval_of_gold_against_itself_is_perfect() {
    let out = arcparse(&[
        "eval",
        "--gold",
        fixture("ambig3.conllu").to_str().unwrap(),
        "--pred",
        fixture("ambig3.conllu").to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["report"]["uas"], 100.0);
    assert_eq!(v["report"]["las"], 100.0);
    assert_eq!(v["report"]["uem"], 100.0);
    assert_eq!(v["report"]["evaluated_tokens"], 3);
}

#[test]
fn eval_reports_one_head_error_in_three_tokens() {
    let dir = tempfile::tempdir().unwrap();
    let gold = std::fs::read_to_string(fixture("ambig3.conllu")).unwrap();
    // Point 在 at the wrong head.
    let pred = gold.replace(
        "1\t在\t_\tADP\tP\t_\t2\tcase",
        "1\t在\t_\tADP\tP\t_\t3\tcase",
    );
    assert_ne!(gold, pred);
    let pred_path = dir.path().join("pred.conllu");
    std::fs::write(&pred_path, pred).unwrap();
    let out = arcparse(&[
        "eval",
        "--gold",
        fixture("ambig3.conllu").to_str().unwrap(),
        "--pred",
        pred_path.to_str().unwrap(),
        "--tsv",
        dir.path().join("buckets.tsv").to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let uas = v["report"]["uas"].as_f64().unwrap();
    assert!((uas - 66.66666666666667).abs() < 1e-9);
    assert_eq!(v["report"]["uem"], 0.0);

    // Bucket TSV exists and its gold counts sum to the evaluated tokens.
    let tsv = std::fs::read_to_string(dir.path().join("buckets.tsv")).unwrap();
    let total: u64 = tsv
        .lines()
        .skip(1)
        .map(|l| l.split('\t').nth(1).unwrap().parse::<u64>().unwrap())
        .sum();
    assert_eq!(total, 3);
}

#[test]
fn stats_rows_match_the_table_identities() {
    let out = arcparse(&[
        "stats",
        "--input",
        fixture("ambig3.conllu").to_str().unwrap(),
        fixture("train50.conllu").to_str().unwrap(),
        "--threads",
        "2",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "file\tsentences\ttokens\tleft_dep\tright_dep\tamb_sentences\tamb_heads\tamb_tokens"
    );
    let ambig3: Vec<&str> = lines.next().unwrap().split('\t').collect();
    assert_eq!(&ambig3[1..], &["1", "3", "1", "1", "1", "1", "3"]);
    let t50: Vec<&str> = lines.next().unwrap().split('\t').collect();
    let num = |i: usize| t50[i].parse::<u64>().unwrap();
    assert_eq!(
        num(3) + num(4),
        num(2) - num(1),
        "left + right = tokens - sentences"
    );
}

#[test]
fn enumerate_lists_sequences_with_counts() {
    let out = arcparse(&[
        "enumerate",
        "--input",
        fixture("ambig3.conllu").to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].starts_with("1\t2\tshift shift shift larc:case"));
    assert!(lines[1].starts_with("1\t2\tshift shift shift shift rarc:case"));

    let flat = arcparse(&[
        "enumerate",
        "--input",
        fixture("flat_l2r2.conllu").to_str().unwrap(),
    ]);
    let text = String::from_utf8(flat.stdout).unwrap();
    assert_eq!(text.lines().count(), 6);
    assert!(text.lines().all(|l| l.starts_with("1\t6\t")));

    let nonproj = arcparse(&[
        "enumerate",
        "--input",
        fixture("nonprojective.conllu").to_str().unwrap(),
    ]);
    let text = String::from_utf8(nonproj.stdout).unwrap();
    assert_eq!(text.trim(), "1\t0 sequences (non-projective)");

    // Limit truncates the listing but keeps the true count in the prefix.
    let limited = arcparse(&[
        "enumerate",
        "--input",
        fixture("flat_l2r2.conllu").to_str().unwrap(),
        "--limit",
        "2",
    ]);
    let text = String::from_utf8(limited.stdout).unwrap();
    assert_eq!(text.lines().count(), 2);
    assert!(text.lines().all(|l| l.starts_with("1\t6\t")));
}
