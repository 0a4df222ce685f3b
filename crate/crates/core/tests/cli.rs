use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use curate::cli::Comparison;
use tempfile::TempDir;

const BASE: &str = "\
C entity entity
C animal animal
C cat cat
C orangutan orangutan
E animal entity
E cat animal
E orangutan animal
";

fn curate(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_curate")).current_dir(dir).args(args).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &TempDir, name: &str, text: &str) {
    fs::write(dir.path().join(name), text).unwrap();
}

#[test]
fn taxonomy_build_links_and_reports() {
    let d = TempDir::new().unwrap();
    write(&d, "base.txt", BASE);
    write(
        &d,
        "ext.jsonl",
        "{\"name\": \"British Shorthair\", \"subclass_of\": [\"cat\"]}\n\n{\"name\": \"Sumatran Orangutan\"}\n{\"name\": \"kitten\", \"embedding_key\": \"kitten\"}\n",
    );
    write(&d, "emb.txt", "3 2\ncat 1 0\nkitten 0.9 0.1\norangutan 0 1\n");
    let o = curate(
        d.path(),
        &["taxonomy", "build", "--base", "base.txt", "--external", "ext.jsonl", "--embeddings", "emb.txt", "--out", "tx"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert!(stdout.contains("linked 3 (subclass_of 1, head 1, embedding 1)"), "{stdout}");
    let saved = fs::read_to_string(d.path().join("tx/taxonomy.txt")).unwrap();
    assert!(saved.contains("E british_shorthair cat"));
    assert!(saved.contains("E sumatran_orangutan orangutan"));
    assert!(saved.contains("E kitten cat"));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.path().join("tx/report.json")).unwrap()).unwrap();
    assert_eq!(report["counts"]["embedding"], 1);
}

#[test]
fn taxonomy_build_missing_embedding_fails() {
    let d = TempDir::new().unwrap();
    write(&d, "base.txt", BASE);
    write(&d, "ext.jsonl", "{\"name\": \"zebra\", \"embedding_key\": \"zebra\"}\n");
    let o = curate(d.path(), &["taxonomy", "build", "--base", "base.txt", "--external", "ext.jsonl", "--out", "tx"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("zebra"), "{}", stderr(&o));
    // the report is still written for inspection
    assert!(d.path().join("tx/report.json").exists());
}

#[test]
fn taxonomy_build_rejects_cyclic_base() {
    let d = TempDir::new().unwrap();
    write(&d, "base.txt", "C a a\nC b b\nE a b\nE b a\n");
    write(&d, "ext.jsonl", "");
    let o = curate(d.path(), &["taxonomy", "build", "--base", "base.txt", "--external", "ext.jsonl", "--out", "tx"]);
    assert!(!o.status.success());
    assert!(stderr(&o).to_lowercase().contains("cycle"), "{}", stderr(&o));
}

#[test]
fn dedup_and_hash() {
    let d = TempDir::new().unwrap();
    let mut img = b"P5\n9 8\n255\n".to_vec();
    img.extend((0..72u8).map(|i| 255 - 3 * (i % 9)));
    fs::write(d.path().join("ramp.pgm"), img).unwrap();
    let o = curate(d.path(), &["hash", "ramp.pgm", "--first-id", "4"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(String::from_utf8(o.stdout).unwrap(), "4 ffffffffffffffff\n");

    write(&d, "crawled.txt", "1 ffffffffffffffff\n2 0000000000000001\n3 00000000000000ff\n");
    write(&d, "down.txt", "# eval\n9 00000000000000ff\n10 ffffffffffffffff\n");
    let o = curate(d.path(), &["--quiet", "dedup", "crawled.txt", "down.txt", "--out", "kept.txt"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(String::from_utf8(o.stdout).unwrap(), "2\n");
    assert_eq!(fs::read_to_string(d.path().join("kept.txt")).unwrap(), "2\n");

    write(&d, "bad.txt", "1 xyz\n");
    assert!(!curate(d.path(), &["dedup", "bad.txt", "down.txt"]).status.success());
}

fn small_config(strategies: &str) -> String {
    format!(
        "\
name = \"small\"
taxonomy = \"tax.txt\"
strategies = {strategies}
repeat = 3
seed = 4
cold_start_quota = 5

[loop]
rounds = 2
batch = 10
top_k = 1
related_levels = 0

[pool]
dim = 4
classes = [\"cat\", \"orangutan\"]
outside_classes = [\"animal\"]
in_distribution = 60
noisy = 20
covariate = 20
semantic = 20
eval_per_class = 20
"
    )
}

#[test]
fn simulate_writes_every_run_and_cell() {
    let d = TempDir::new().unwrap();
    write(&d, "tax.txt", BASE);
    write(&d, "run.toml", &small_config("[\"random\", \"margin\"]"));
    let o = curate(d.path(), &["simulate", "--config", "run.toml", "--out", "out"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let cmp = Comparison::load(&d.path().join("out/comparison.json")).unwrap();
    assert_eq!(cmp.cells.len(), 4);
    assert!(cmp.cells.iter().all(|c| c.valid.len() == 3 && c.final_accuracy.len() == 3));
    let runs: Vec<_> = fs::read_dir(d.path().join("out/runs")).unwrap().collect();
    assert_eq!(runs.len(), 12);
    let csv = fs::read_to_string(d.path().join("out/runs/margin-rectified-2/rounds.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("round,rectified,sampled,valid,labeled_total,accuracy,ms"));
    assert_eq!(csv.lines().count(), 3);
    assert!(d.path().join("out/runs/random-plain-0/round_2.json").exists());

    let o = curate(d.path(), &["report", "out/comparison.json"]);
    assert!(o.status.success());
    let table = String::from_utf8(o.stdout).unwrap();
    assert!(table.starts_with("small (T=2, B=10, repeats=3)"));
    assert_eq!(table.lines().count(), 6);
}

#[test]
fn simulate_rejects_unknown_strategy() {
    let d = TempDir::new().unwrap();
    write(&d, "tax.txt", BASE);
    write(&d, "run.toml", &small_config("[\"random\", \"bald\"]"));
    let o = curate(d.path(), &["simulate", "--config", "run.toml"]);
    assert!(!o.status.success());
    let err = stderr(&o);
    assert!(err.contains("strategies"), "{err}");
    assert!(!d.path().join("out").exists());
}
