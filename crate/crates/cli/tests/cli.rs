//! End-to-end tests of the binary: exit codes, determinism, and the CSV
//! artifacts of each subcommand.

use std::path::Path;
use std::process::{Command, Output};

use rdindex::workload::load_relation;
use rdindex::Query;

fn rdindex_bin(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rdindex"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn assert_success(out: &Output) {
    assert_eq!(
        out.status.code(),
        Some(0),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn generate_is_deterministic_and_loadable() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "generate",
        "--n",
        "1000",
        "--durations",
        "zipf(1,100)",
        "--seed",
        "9",
        "--out",
        "a.csv",
    ];
    assert_success(&rdindex_bin(&args, dir.path()));
    let mut again = args;
    again[args.len() - 1] = "b.csv";
    assert_success(&rdindex_bin(&again, dir.path()));

    let a = std::fs::read(dir.path().join("a.csv")).unwrap();
    let b = std::fs::read(dir.path().join("b.csv")).unwrap();
    assert_eq!(a, b, "same spec and seed must produce identical files");

    let relation = load_relation(dir.path().join("a.csv")).unwrap();
    assert_eq!(relation.len(), 1000);
}

#[test]
fn query_counts_match_the_oracle() {
    let dir = tempfile::tempdir().unwrap();
    assert_success(&rdindex_bin(
        &["generate", "--n", "500", "--durations", "uniform(1,40)", "--seed", "3", "--out", "d.csv"],
        dir.path(),
    ));
    let relation = load_relation(dir.path().join("d.csv")).unwrap();
    let expected = relation
        .iter()
        .filter(|(iv, _)| iv.matches(&Query::range_duration(100, 300, 5, 20)))
        .count();

    for backend in ["rd-index", "linear-scan", "btree", "interval-tree", "grid-file"] {
        let out = rdindex_bin(
            &[
                "query", "--data", "d.csv", "--range", "100:300", "--duration", "5:20",
                "--backend", backend, "--s", "8", "--verify",
            ],
            dir.path(),
        );
        assert_success(&out);
        let count: usize = String::from_utf8_lossy(&out.stdout).trim().parse().unwrap();
        assert_eq!(count, expected, "{backend}");
    }
}

#[test]
fn query_requires_a_constraint() {
    let dir = tempfile::tempdir().unwrap();
    assert_success(&rdindex_bin(
        &["generate", "--n", "10", "--durations", "uniform(1,5)", "--out", "d.csv"],
        dir.path(),
    ));
    let out = rdindex_bin(&["query", "--data", "d.csv"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn config_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = rdindex_bin(&["bench", "--experiment", "missing.toml"], dir.path());
    assert_eq!(out.status.code(), Some(1));

    let out = rdindex_bin(
        &["generate", "--n", "5", "--durations", "gauss(0,1)", "--out", "x.csv"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));

    std::fs::write(dir.path().join("broken.toml"), "datasets = 3\n").unwrap();
    let out = rdindex_bin(&["bench", "--experiment", "broken.toml"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

const EXPERIMENT: &str = r#"
seed = 11
repetitions = 1
warmup = 0
output = "results.csv"

[[datasets]]
name = "synth"
n = 2000
starts = "uniform(1,2000)"
durations = "zipf(1,100)"

[[backends]]
kind = "rd-index"
s = [4, 16]
order = ["td", "dt"]

[[backends]]
kind = "linear-scan"

[[backends]]
kind = "btree"

[[backends]]
kind = "interval-tree"

[[backends]]
kind = "grid-file"

[[workloads]]
name = "mixed"
kind = "mixed"
count = 60
range_len = "uniform(1,500)"
duration_width = "uniform(0,20)"

[[workloads]]
name = "ranges"
kind = "range-only"
count = 20
range_len = "uniform(1,800)"

[[workloads]]
name = "grid"
kind = "selectivity-grid"
g = 4
"#;

#[test]
fn bench_runs_the_matrix_with_verification() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("exp.toml"), EXPERIMENT).unwrap();
    let out = rdindex_bin(&["bench", "--experiment", "exp.toml", "--verify"], dir.path());
    assert_success(&out);

    let csv = std::fs::read_to_string(dir.path().join("results.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "backend,params,dataset,workload,query_id,kind,k,examined,latency_ns,qps,build_ms,bytes_per_interval"
    );
    // 4 rd-index sweeps + 4 other backends, 3 workloads each
    let summaries = csv.lines().filter(|l| l.contains(",summary,")).count();
    assert_eq!(summaries, 8 * 3);

    // deterministic non-timing columns across runs
    let non_timing = |text: &str| -> Vec<String> {
        text.lines()
            .skip(1)
            .map(|line| {
                let cols: Vec<&str> = line.split(',').collect();
                format!("{}|{}|{}|{}|{}|{}", cols[0], cols[1], cols[3], cols[4], cols[6], cols[7])
            })
            .collect()
    };
    let first = non_timing(&csv);
    let out = rdindex_bin(
        &["bench", "--experiment", "exp.toml", "--verify", "--out", "again.csv"],
        dir.path(),
    );
    assert_success(&out);
    let again = std::fs::read_to_string(dir.path().join("again.csv")).unwrap();
    assert_eq!(first, non_timing(&again));
}

#[test]
fn update_bench_inserts_and_drains() {
    let dir = tempfile::tempdir().unwrap();
    let experiment = r#"
seed = 5
output = "updates.csv"

[[datasets]]
name = "synth"
n = 3000
starts = "uniform(1,3000)"
durations = "uniform(1,60)"

[[backends]]
kind = "rd-index"
s = [8]
order = ["td"]

[[backends]]
kind = "btree"

[update]
batch_size = 500
order = "random"
drain = true

[[workloads]]
name = "probe"
kind = "mixed"
count = 30
range_len = "uniform(1,400)"
duration_width = "uniform(0,10)"
"#;
    std::fs::write(dir.path().join("upd.toml"), experiment).unwrap();
    let out = rdindex_bin(
        &["update-bench", "--experiment", "upd.toml", "--verify"],
        dir.path(),
    );
    assert_success(&out);

    let csv = std::fs::read_to_string(dir.path().join("updates.csv")).unwrap();
    assert!(csv.lines().any(|l| l.contains("insert-random")));
    assert!(csv.lines().any(|l| l.contains("drain")));
    // 3000 intervals in batches of 500 → 6 insert rows + summary, per backend
    let insert_rows = csv
        .lines()
        .filter(|l| l.contains("insert-random") && !l.contains(",summary,"))
        .count();
    assert_eq!(insert_rows, 6 * 2);
}

#[test]
fn update_bench_rejects_static_backends() {
    let dir = tempfile::tempdir().unwrap();
    let experiment = r#"
[[datasets]]
name = "synth"
n = 100
durations = "uniform(1,10)"

[[backends]]
kind = "grid-file"
"#;
    std::fs::write(dir.path().join("upd.toml"), experiment).unwrap();
    let out = rdindex_bin(&["update-bench", "--experiment", "upd.toml"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("does not support updates"));
}
