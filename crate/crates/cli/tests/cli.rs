//! End-to-end tests of the `archsearch` binary: every subcommand, the
//! documented exit codes, and the transcript-replay guarantee.

use std::path::Path;
use std::process::{Command, Output};

fn archsearch(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_archsearch"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn assert_success(out: &Output) {
    assert!(
        out.status.success(),
        "expected success, got {:?}\nstdout: {}\nstderr: {}",
        out.status.code(),
        stdout(out),
        stderr(out)
    );
}

fn assert_exit_code(out: &Output, code: i32) {
    assert_eq!(
        out.status.code(),
        Some(code),
        "stdout: {}\nstderr: {}",
        stdout(out),
        stderr(out)
    );
}

fn path_str(path: &Path) -> &str {
    path.to_str().expect("utf-8 path")
}

#[test]
fn synth_then_ingest_round_trips_the_digest() {
    let dir = tempfile::tempdir().unwrap();
    let bench = dir.path().join("bench.jsonl");
    let copy = dir.path().join("copy.jsonl");

    let out = archsearch(&["synth", "--seed", "7", "--out", path_str(&bench)]);
    assert_success(&out);
    let synth_line = stdout(&out);
    assert!(
        synth_line.contains("15625 entries"),
        "unexpected synth output: {synth_line}"
    );

    let out = archsearch(&[
        "ingest",
        "--input",
        path_str(&bench),
        "--out",
        path_str(&copy),
    ]);
    assert_success(&out);
    assert_eq!(stdout(&out), synth_line, "digest changed across ingest");

    let out = archsearch(&["ingest", "--input", path_str(&copy)]);
    assert_success(&out);
    assert_eq!(stdout(&out), synth_line, "digest changed across re-ingest");
}

#[test]
fn truncated_bench_file_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let bench = dir.path().join("bench.jsonl");
    assert_success(&archsearch(&[
        "synth",
        "--seed",
        "0",
        "--out",
        path_str(&bench),
    ]));
    let full = std::fs::read_to_string(&bench).unwrap();
    let truncated: String = full.lines().take(100).map(|l| format!("{l}\n")).collect();
    let partial = dir.path().join("partial.jsonl");
    std::fs::write(&partial, truncated).unwrap();

    let out = archsearch(&["ingest", "--input", path_str(&partial)]);
    assert_exit_code(&out, 2);

    let out = archsearch(&["ingest", "--input", path_str(&partial), "--allow-partial"]);
    assert_success(&out);
    assert!(stdout(&out).contains("100 entries"));
}

#[test]
fn random_search_writes_the_run_directory() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    let out = archsearch(&[
        "search",
        "--method",
        "rs",
        "--synth-bench",
        "5",
        "--budget",
        "30",
        "--seeds",
        "2",
        "--out",
        path_str(&run),
    ]);
    assert_success(&out);

    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(run.join("manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["space"], "nb201");
    assert_eq!(manifest["seeds"], serde_json::json!([0, 1]));
    assert!(manifest["bench_digest"].is_string());

    for seed in ["seed_0", "seed_1"] {
        for file in [
            "result.json",
            "trajectory.csv",
            "trajectory.jsonl",
            "curve.csv",
        ] {
            assert!(
                run.join(seed).join(file).is_file(),
                "missing {seed}/{file}"
            );
        }
        let result: serde_json::Value = serde_json::from_str(
            &std::fs::read_to_string(run.join(seed).join("result.json")).unwrap(),
        )
        .unwrap();
        assert!(result["evaluations"].as_u64().unwrap() <= 30);
        assert_eq!(result["partial"], false);
    }

    let summary = std::fs::read_to_string(run.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 3, "header plus one row per seed");
    assert!(stdout(&out).contains("rs on nb201"));
}

#[test]
fn macro_space_search_uses_the_surrogate() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    let out = archsearch(&[
        "search",
        "--method",
        "rs",
        "--space",
        "mobilenet",
        "--budget",
        "20",
        "--seeds",
        "1",
        "--out",
        path_str(&run),
    ]);
    assert_success(&out);
    assert!(stdout(&out).contains("surrogate accuracy"));
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(run.join("manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["space"], "mobilenet");
    assert!(manifest["bench_digest"].is_null());
}

#[test]
fn llm_methods_require_a_backend() {
    let dir = tempfile::tempdir().unwrap();
    let out = archsearch(&[
        "search",
        "--method",
        "collm",
        "--synth-bench",
        "0",
        "--out",
        path_str(&dir.path().join("run")),
    ]);
    assert_exit_code(&out, 1);
    assert!(stderr(&out).contains("--backend"));
}

#[test]
fn unknown_space_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = archsearch(&[
        "search",
        "--method",
        "rs",
        "--space",
        "nb999",
        "--out",
        path_str(&dir.path().join("run")),
    ]);
    assert_exit_code(&out, 1);
}

#[test]
fn oracle_run_replays_byte_identically_from_its_transcript() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first");
    let replay = dir.path().join("replay");
    let common = [
        "search",
        "--method",
        "collm",
        "--synth-bench",
        "11",
        "--budget",
        "40",
        "--iters",
        "5",
        "--seeds",
        "1",
        "--seed-base",
        "3",
    ];

    let mut args: Vec<&str> = common.to_vec();
    args.extend(["--backend", "oracle:greedy-hill-climb", "--out", path_str(&first)]);
    assert_success(&archsearch(&args));

    let transcript = first.join("seed_3").join("transcript.jsonl");
    let scripted = format!("scripted:{}", path_str(&transcript));
    let mut args: Vec<&str> = common.to_vec();
    args.extend(["--backend", &scripted, "--out", path_str(&replay)]);
    assert_success(&archsearch(&args));

    let original = std::fs::read(first.join("seed_3").join("result.json")).unwrap();
    let replayed = std::fs::read(replay.join("seed_3").join("result.json")).unwrap();
    assert_eq!(original, replayed, "replay diverged from the live run");

    let original = std::fs::read(&transcript).unwrap();
    let replayed = std::fs::read(replay.join("seed_3").join("transcript.jsonl")).unwrap();
    assert_eq!(original, replayed, "replayed transcript diverged");
}

#[test]
fn memory_ablation_covers_all_four_cells() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("ablate");
    let out = archsearch(&[
        "ablate",
        "--kind",
        "memory",
        "--method",
        "collm",
        "--backend",
        "oracle:greedy-hill-climb",
        "--synth-bench",
        "2",
        "--budget",
        "20",
        "--iters",
        "3",
        "--seeds",
        "1",
        "--out",
        path_str(&out_dir),
    ]);
    assert_success(&out);

    let grid = std::fs::read_to_string(out_dir.join("memory_grid.csv")).unwrap();
    assert_eq!(grid.lines().count(), 5, "header plus four cells");
    for cell in [
        "memory_nav-on_gen-on",
        "memory_nav-on_gen-off",
        "memory_nav-off_gen-on",
        "memory_nav-off_gen-off",
    ] {
        assert!(
            out_dir.join(cell).join("seed_0").join("result.json").is_file(),
            "missing cell {cell}"
        );
    }
}

#[test]
fn temperature_ablation_reports_zero_variation_for_a_deterministic_backend() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("ablate");
    let out = archsearch(&[
        "ablate",
        "--kind",
        "temperature",
        "--method",
        "collm",
        "--backend",
        "oracle:greedy-hill-climb",
        "--grid",
        "0.0,1.0",
        "--synth-bench",
        "2",
        "--budget",
        "20",
        "--iters",
        "3",
        "--seeds",
        "1",
        "--out",
        path_str(&out_dir),
    ]);
    assert_success(&out);

    let grid = std::fs::read_to_string(out_dir.join("temperature_grid.csv")).unwrap();
    assert_eq!(grid.lines().count(), 5, "header plus a 2x2 grid");
    assert!(
        stdout(&out).contains("coefficient of variation 0.0000%"),
        "oracle ignores temperature, so cells must agree: {}",
        stdout(&out)
    );
}

#[test]
fn poc_runs_from_a_handwritten_transcript() {
    let dir = tempfile::tempdir().unwrap();
    let replies = dir.path().join("replies.jsonl");
    let lines: String = (1..=3)
        .map(|seq| {
            serde_json::json!({
                "seq": seq,
                "messages": [],
                "params": {"temperature": 0.6, "max_tokens": null, "reasoning": false},
                "response": "Ranking: 1, 2, 3, 4, 5, 6, 7, 8, 9, 10",
            })
            .to_string()
                + "\n"
        })
        .collect();
    std::fs::write(&replies, lines).unwrap();

    let out_dir = dir.path().join("poc");
    let scripted = format!("scripted:{}", path_str(&replies));
    let out = archsearch(&[
        "poc",
        "--synth-bench",
        "4",
        "--backend",
        &scripted,
        "--trials",
        "3",
        "--n",
        "10",
        "--out",
        path_str(&out_dir),
    ]);
    assert_success(&out);
    assert!(stdout(&out).contains("3/3 usable"), "{}", stdout(&out));

    let trials = std::fs::read_to_string(out_dir.join("trials.csv")).unwrap();
    assert_eq!(trials.lines().count(), 4, "header plus one row per trial");
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("report.json")).unwrap())
            .unwrap();
    assert_eq!(report["failed"], 0);
    assert!(report["mean_tau"].is_number());
}
