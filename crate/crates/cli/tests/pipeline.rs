use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use union_cli::config::ExperimentConfig;
use union_cli::pipeline::{self, conditions, is_eval_statement, Prepared};
use union_core::corpus::Dataset;

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

fn config(out: &Path) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::load(Some(&fixtures().join("config.json")), &[]).unwrap();
    cfg.out = out.to_path_buf();
    cfg.resolve().unwrap()
}

fn read_all(dir: &Path) -> Vec<Vec<u8>> {
    [pipeline::TRAIN_FILE, pipeline::REFERENCES_FILE, pipeline::VOCAB_FILE]
        .iter()
        .map(|f| fs::read(dir.join(f)).unwrap())
        .collect()
}

#[test]
fn prepare_is_idempotent_and_counts_flattened_examples() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path());
    let counts = pipeline::prepare(&cfg, &BTreeSet::new()).unwrap();
    let first = read_all(&pipeline::data_dir(&cfg));
    pipeline::prepare(&cfg, &BTreeSet::new()).unwrap();
    assert_eq!(first, read_all(&pipeline::data_dir(&cfg)));

    let data = Prepared::load(&cfg).unwrap();
    let held_out = data.references.len();
    assert!(held_out > 0);
    // 40 Task C statements, three explanations each, minus the held-out ones.
    assert_eq!(counts[&Dataset::Comve].0, 3 * (40 - held_out));
    assert_eq!(counts[&Dataset::Cose], (24, 24));
    assert_eq!(counts[&Dataset::Openbook], (24, 24));
    assert_eq!(counts[&Dataset::Omcs].0, 81);
    for r in &data.references {
        assert!(is_eval_statement(&r.source, cfg.eval_percent));
        assert!(data.train.iter().all(|e| e.source != r.source));
    }
}

#[test]
fn excluded_corpora_need_no_path() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(dir.path());
    cfg.data.cose = None;
    assert!(pipeline::prepare(&cfg, &BTreeSet::new()).is_err());
    let counts = pipeline::prepare(&cfg, &[Dataset::Cose].into()).unwrap();
    assert!(!counts.contains_key(&Dataset::Cose));
}

#[test]
fn split_depends_only_on_the_normalized_statement() {
    let s = "We use a book to tell the time.";
    assert_eq!(is_eval_statement(s, 10), is_eval_statement("we use a BOOK to tell the time", 10));
    let held = (0..1000).filter(|i| is_eval_statement(&format!("statement {i}"), 10)).count();
    assert!((60..140).contains(&held), "{held}");
}

#[test]
fn ablation_matrix_matches_the_table_layout() {
    let rows = conditions();
    let included: Vec<usize> = rows.iter().map(|c| Dataset::ALL.len() - c.ablation.len()).collect();
    assert_eq!(included, [1, 1, 3, 3, 3, 4]);
    assert!(!rows[0].classification && rows[1..].iter().all(|c| c.classification));
    assert_eq!(rows[0].ablation, rows[1].ablation);
}

fn union_bin(out: &Path, args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_union"))
        .arg("--config")
        .arg(fixtures().join("config.json"))
        .arg("--out")
        .arg(out)
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

#[test]
fn stages_run_one_by_one_from_the_command_line() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    assert!(!union_bin(out, &["train"]).status.success(), "train before prepare must fail");
    for stage in ["prepare", "pretrain", "train", "generate", "evaluate"] {
        let run = union_bin(out, &[stage]);
        assert!(run.status.success(), "{stage}: {}", String::from_utf8_lossy(&run.stderr));
    }
    for f in [pipeline::CONFIG_SNAPSHOT, pipeline::MODEL_FILE, pipeline::GENERATIONS_FILE, pipeline::REPORT_CSV] {
        assert!(out.join(f).exists(), "{f}");
    }
    let snapshot: ExperimentConfig =
        serde_json::from_str(&fs::read_to_string(out.join(pipeline::CONFIG_SNAPSHOT)).unwrap()).unwrap();
    assert_eq!(snapshot.seed, 7);
    assert_eq!(snapshot.train.seed, 7);
    let report = union_bin(out, &["report"]);
    assert!(report.status.success());
    assert!(String::from_utf8_lossy(&report.stdout).contains("UNION"));
}

#[test]
fn bad_invocations_exit_non_zero() {
    let dir = tempfile::tempdir().unwrap();
    assert!(!union_bin(dir.path(), &["prepare", "--exclude", "comve"]).status.success());
    assert!(!union_bin(dir.path(), &["prepare", "--exclude", "nope"]).status.success());
    assert!(!union_bin(dir.path(), &["prepare", "--set", "model.bogus=1"]).status.success());
    assert!(!union_bin(dir.path(), &["generate"]).status.success());
}
