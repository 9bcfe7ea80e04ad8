use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use fsearch_core::semantic::read_vector_file;
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fsearch"))
}

fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/desk")
}

fn golden(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn fsearch")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[track_caller]
fn ok(out: Output) -> Output {
    assert_eq!(
        code(&out),
        0,
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

/// Runs ingest, train, embed, search and evaluate on the desk fixture.
fn desk_pipeline(dir: &Path, threads: &str) -> (PathBuf, PathBuf) {
    let cfg = fixture_dir().join("desk.toml");
    let cfg = s(&cfg);
    let p = |n: &str| dir.join(n);
    ok(run(&["--config", cfg, "--threads", threads, "ingest", "--out", s(&p("store.jsonl"))]));
    ok(run(&[
        "--config", cfg, "--threads", threads, "train",
        "--store", s(&p("store.jsonl")),
        "--out", s(&p("model.ckpt")),
        "--log", s(&p("train.jsonl")),
    ]));
    ok(run(&[
        "--config", cfg, "--threads", threads, "embed",
        "--store", s(&p("store.jsonl")),
        "--model", s(&p("model.ckpt")),
        "--out", s(&p("struct.vec")),
        "--semantic-out", s(&p("sem.vec")),
    ]));
    ok(run(&[
        "--config", cfg, "--threads", threads, "search",
        "--store", s(&p("store.jsonl")),
        "--model", s(&p("model.ckpt")),
        "--structural", s(&p("struct.vec")),
        "--semantic-vectors", s(&p("sem.vec")),
        "--out", s(&p("run.tsv")),
    ]));
    ok(run(&[
        "--config", cfg, "--threads", threads, "evaluate",
        "--run", s(&p("run.tsv")),
        "--json", s(&p("report.json")),
    ]));
    (p("run.tsv"), p("report.json"))
}

#[test]
fn desk_pipeline_reproduces_the_golden_files() {
    let dir = TempDir::new().unwrap();
    let (run_file, report) = desk_pipeline(dir.path(), "1");
    assert!(fs::read(&run_file).unwrap() == fs::read(golden("desk_run.tsv")).unwrap(), "run file differs");
    assert!(fs::read(&report).unwrap() == fs::read(golden("desk_report.json")).unwrap(), "report differs");

    let log = fs::read_to_string(dir.path().join("train.jsonl")).unwrap();
    assert_eq!(log.lines().count(), 10);
    for line in log.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        for key in ["epoch", "mean_loss", "pos_cos", "neg_cos", "wallclock_s"] {
            assert!(v.get(key).is_some(), "missing {key} in {line}");
        }
    }
}

#[test]
fn run_file_does_not_depend_on_thread_count() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    let (ra, ja) = desk_pipeline(a.path(), "1");
    let (rb, jb) = desk_pipeline(b.path(), "4");
    assert_eq!(fs::read(ra).unwrap(), fs::read(rb).unwrap());
    assert_eq!(fs::read(ja).unwrap(), fs::read(jb).unwrap());
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(code(&run(&["no-such-command"])), 2);
    assert_eq!(code(&run(&["evaluate", "--bogus"])), 2);
    assert_eq!(code(&run(&["--threads", "0", "config", "validate"])), 2);
    assert_eq!(code(&run(&["--set", "train.nonsense=1", "config", "validate"])), 2);
    assert_eq!(code(&run(&["--set", "search.lambda=1.5", "config", "validate"])), 2);
    assert_eq!(code(&run(&["--set", "no_equals_sign", "config", "validate"])), 2);

    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "profile = \"desk\"\n[train]\nepochz = 3\n").unwrap();
    assert_eq!(code(&run(&["--config", s(&cfg), "config", "validate"])), 2);

    // No corpus anywhere: a missing flag, not missing data.
    assert_eq!(code(&run(&["--profile", "desk", "ingest"])), 2);
    assert_eq!(code(&run(&["--profile", "desk", "embed", "--semantic", "bogus"])), 2);
}

#[test]
fn data_errors_exit_with_one() {
    let dir = TempDir::new().unwrap();
    let p = |n: &str| dir.path().join(n);
    let missing = p("absent.tsv");
    assert_eq!(
        code(&run(&["--profile", "desk", "ingest", "--corpus", s(&missing), "--out", s(&p("s.jsonl"))])),
        1
    );

    fs::write(p("empty.tsv"), "").unwrap();
    assert_eq!(
        code(&run(&["--profile", "desk", "ingest", "--corpus", s(&p("empty.tsv")), "--out", s(&p("s.jsonl"))])),
        1
    );

    fs::write(p("garbage.tsv"), "f1\tp1\t(+ a\tctx\nf2\tp1\t(f)\tctx\nf3\tp2\t(* x y)\tctx\n").unwrap();
    assert_eq!(
        code(&run(&["--profile", "desk", "ingest", "--corpus", s(&p("garbage.tsv")), "--out", s(&p("s.jsonl"))])),
        1
    );

    fs::write(p("run.tsv"), "T1\tf1\tp1\tone\t0.5\ttag\n").unwrap();
    fs::write(p("qrels.tsv"), "T1\tf1\t0\t3\n").unwrap();
    assert_eq!(
        code(&run(&["evaluate", "--run", s(&p("run.tsv")), "--qrels", s(&p("qrels.tsv"))])),
        1
    );
    fs::write(p("qrels.tsv"), "T1\tf1\t0\t7\n").unwrap();
    fs::write(p("run.tsv"), "T1\tf1\tp1\t1\t0.5\ttag\n").unwrap();
    assert_eq!(
        code(&run(&["evaluate", "--run", s(&p("run.tsv")), "--qrels", s(&p("qrels.tsv"))])),
        1
    );
}

#[test]
fn small_graphs_stay_in_the_store() {
    let dir = TempDir::new().unwrap();
    let p = |n: &str| dir.path().join(n);
    fs::write(p("c.tsv"), "f1\tp1\tx\tjust a symbol\nf2\tp1\t(neg x)\ttwo nodes\nf3\tp2\t(+ a (* b c))\tfive nodes\n")
        .unwrap();
    let out = ok(run(&["--profile", "desk", "ingest", "--corpus", s(&p("c.tsv")), "--out", s(&p("s.jsonl"))]));
    let summary: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(summary["stored"], 3, "{summary}");
    assert_eq!(summary["trainable"], 1, "{summary}");
    let store = fs::read_to_string(p("s.jsonl")).unwrap();
    assert_eq!(store.lines().count(), 3);
}

#[test]
fn fuse_combines_runs_and_rejects_a_single_one() {
    let dir = TempDir::new().unwrap();
    let p = |n: &str| dir.path().join(n);
    fs::write(p("a.tsv"), "T1\tf1\tp1\t1\t0.9\ta\nT1\tf2\tp1\t2\t0.8\ta\n").unwrap();
    fs::write(p("b.tsv"), "T1\tf2\tp1\t1\t0.9\tb\nT1\tf3\tp2\t2\t0.1\tb\n").unwrap();
    ok(run(&["fuse", s(&p("a.tsv")), s(&p("b.tsv")), "--out", s(&p("f.tsv"))]));
    let fused = fs::read_to_string(p("f.tsv")).unwrap();
    let ids: Vec<&str> = fused.lines().map(|l| l.split('\t').nth(1).unwrap()).collect();
    assert_eq!(ids, ["f2", "f1", "f3"]);
    assert!(fused.lines().all(|l| l.ends_with("\trrf")));

    assert_eq!(code(&run(&["fuse", s(&p("a.tsv")), "--out", s(&p("g.tsv"))])), 2);
    assert_eq!(code(&run(&["fuse", s(&p("a.tsv")), s(&p("b.tsv")), "--k-rrf", "-1", "--out", s(&p("g.tsv"))])), 2);
}

#[test]
fn paper_profile_validates_and_plans() {
    let out = ok(run(&["--profile", "paper", "config", "validate"]));
    let text = String::from_utf8(out.stdout).unwrap();
    let v: toml::Value = toml::from_str(&text).unwrap();
    assert_eq!(v["model"]["dim"].as_integer(), Some(400));
    assert_eq!(v["model"]["layers"].as_integer(), Some(2));
    assert_eq!(v["model"]["min_frequency"].as_integer(), Some(11));
    assert_eq!(v["train"]["epochs"].as_integer(), Some(25));
    assert_eq!(v["train"]["batch_size"].as_integer(), Some(2560));
    assert_eq!(v["train"]["learning_rate"].as_float(), Some(1e-4));
    assert_eq!(v["train"]["temperature"].as_float(), Some(0.2));
    assert_eq!(v["search"]["lambda"].as_float(), Some(0.5));
    assert_eq!(v["search"]["stage1_k"].as_integer(), Some(500_000));
    assert_eq!(v["search"]["final_n"].as_integer(), Some(1000));

    let out = ok(run(&["--profile", "paper", "config", "dry-run"]));
    let plan = String::from_utf8(out.stdout).unwrap();
    assert!(plan.contains("25 epochs"), "{plan}");
    assert!(plan.contains("batch 2560 formulas (5120 views)"), "{plan}");
    assert!(plan.contains("stage-1 top 500000"), "{plan}");
}

#[test]
fn validated_config_round_trips_through_a_file() {
    let dir = TempDir::new().unwrap();
    let out = ok(run(&["--profile", "desk", "--set", "train.epochs=3", "config", "validate"]));
    let path = dir.path().join("echo.toml");
    fs::write(&path, &out.stdout).unwrap();
    let again = ok(run(&["--config", s(&path), "config", "validate"]));
    assert_eq!(out.stdout, again.stdout);
}

#[test]
fn imported_vectors_match_the_fallback_they_were_built_from() {
    let dir = TempDir::new().unwrap();
    let p = |n: &str| dir.path().join(n);
    let cfg = fixture_dir().join("desk.toml");
    let cfg = s(&cfg);
    let common = ["--config", cfg, "--threads", "1", "--set", "train.epochs=2"];
    let with = |rest: &[&str]| {
        let mut v: Vec<&str> = common.to_vec();
        v.extend_from_slice(rest);
        ok(run(&v))
    };
    with(&["ingest", "--out", s(&p("store.jsonl"))]);
    let topics = fixture_dir().join("topics.tsv");
    with(&["ingest", "--corpus", s(&topics), "--out", s(&p("topics.jsonl"))]);
    with(&["train", "--store", s(&p("store.jsonl")), "--out", s(&p("m.ckpt"))]);
    with(&[
        "embed", "--store", s(&p("store.jsonl")), "--model", s(&p("m.ckpt")),
        "--out", s(&p("struct.vec")), "--semantic-out", s(&p("sem.vec")),
    ]);
    with(&[
        "embed", "--store", s(&p("topics.jsonl")), "--model", s(&p("m.ckpt")),
        "--out", s(&p("tstruct.vec")), "--semantic-out", s(&p("qsem.vec")),
    ]);
    let import = format!("import:{}", s(&p("sem.vec")));
    with(&[
        "embed", "--store", s(&p("store.jsonl")), "--model", s(&p("m.ckpt")),
        "--out", s(&p("struct2.vec")), "--semantic", &import, "--semantic-out", s(&p("sem2.vec")),
    ]);
    let read = |n: &str| read_vector_file(fs::File::open(p(n)).unwrap()).unwrap();
    let (a, b) = (read("sem.vec"), read("sem2.vec"));
    assert_eq!(a.dim, b.dim);
    assert_eq!(a.entries.len(), b.entries.len());
    for ((ia, va), (ib, vb)) in a.entries.iter().zip(&b.entries) {
        assert_eq!(ia, ib);
        assert!(va.iter().zip(vb).all(|(x, y)| (x - y).abs() <= 1e-6), "{ia} drifted on import");
    }

    let search = |mode: &[&str], out: &Path| {
        let mut v: Vec<String> = common.iter().chain(mode).map(|a| a.to_string()).collect();
        v.push("search".into());
        for (flag, file) in [
            ("--store", p("store.jsonl")),
            ("--model", p("m.ckpt")),
            ("--structural", p("struct.vec")),
            ("--semantic-vectors", p("sem.vec")),
            ("--query-vectors", p("qsem.vec")),
            ("--out", out.to_path_buf()),
        ] {
            v.push(flag.into());
            v.push(s(&file).into());
        }
        ok(bin().args(&v).output().unwrap())
    };
    let fb = p("fallback.tsv");
    let im = p("import.tsv");
    search(&[], &fb);
    search(&["--set", "semantic.mode=\"import\"", "--set", "semantic.dim=256"], &im);
    let scores = |path: &Path| -> BTreeMap<(String, String), f64> {
        fs::read_to_string(path)
            .unwrap()
            .lines()
            .map(|l| {
                let c: Vec<&str> = l.split('\t').collect();
                ((c[0].to_string(), c[1].to_string()), c[4].parse().unwrap())
            })
            .collect()
    };
    let (a, b) = (scores(&fb), scores(&im));
    assert_eq!(a.keys().collect::<Vec<_>>(), b.keys().collect::<Vec<_>>());
    for (k, x) in &a {
        assert!((x - b[k]).abs() <= 1e-6, "{k:?}: {x} vs {}", b[k]);
    }

    // Import mode without query vectors is a configuration problem.
    let out = run(&[
        "--config", cfg, "--set", "semantic.mode=\"import\"", "--set", "semantic.dim=256", "search",
        "--store", s(&p("store.jsonl")), "--model", s(&p("m.ckpt")),
        "--structural", s(&p("struct.vec")), "--out", s(&p("x.tsv")),
    ]);
    assert_eq!(code(&out), 2);
}

#[test]
fn synth_is_deterministic_and_matches_the_fixture() {
    let dir = TempDir::new().unwrap();
    ok(run(&["synth", "--out-dir", s(dir.path()), "--formulas", "1000", "--topics", "20", "--seed", "7"]));
    for f in ["corpus.tsv", "topics.tsv", "qrels.tsv", "visual_map.tsv"] {
        assert_eq!(
            fs::read(dir.path().join(f)).unwrap(),
            fs::read(fixture_dir().join(f)).unwrap(),
            "{f} differs from the shipped fixture"
        );
    }
}
