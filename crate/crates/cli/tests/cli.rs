use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sha2::{Digest, Sha256};
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_formulakit"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

const FORMULAS: [&str; 12] = [
    "=SUM(A1:A10)",
    "=SUM(B1:B3)",
    "=IF(A2>10, True, False)",
    "=VLOOKUP(A1,Sheet2!A:B,2,FALSE)",
    "=A1+B1",
    "=A2+B2",
    "=MAX(C1:C9)*2",
    "=IF(ISERROR(G6*1.2),\"\")",
    "=B2<=EDATE(TODAY(),-33)",
    "=ROUND(D4/3, 2)",
    "=CONCATENATE(A1,\" \",B1)",
    "=AVERAGE(E1:E20)",
];

fn corpus(dir: &TempDir, n: usize) -> PathBuf {
    let path = dir.path().join("corpus.jsonl");
    let mut text = String::new();
    for i in 0..n {
        let line = serde_json::json!({
            "workbook_id": format!("wb{}", i % 7),
            "sheet_id": "Sheet1",
            "formula": FORMULAS[(i * 5 + i / 3) % FORMULAS.len()],
        });
        text.push_str(&line.to_string());
        text.push('\n');
    }
    fs::write(&path, text).unwrap();
    path
}

fn lines(path: &Path) -> usize {
    fs::read_to_string(path).unwrap().lines().count()
}

#[test]
fn dedup_global_not_larger_than_per_workbook() {
    let dir = TempDir::new().unwrap();
    let input = corpus(&dir, 200);
    let per = dir.path().join("per.jsonl");
    let global = dir.path().join("global.jsonl");
    ok(&["dedup", p(&input), "--mode", "per-workbook", "-o", p(&per)]);
    ok(&["dedup", p(&input), "--mode", "global", "-o", p(&global)]);
    let (n_per, n_global) = (lines(&per), lines(&global));
    assert!(n_global <= n_per && n_per <= 200, "{n_global} {n_per}");
    assert!(n_global < n_per);
}

#[test]
fn gen_pretrain_is_reproducible_and_worker_independent() {
    let dir = TempDir::new().unwrap();
    let input = corpus(&dir, 300);
    let outs: Vec<Vec<u8>> = [("a", "1"), ("b", "1"), ("c", "8")]
        .iter()
        .map(|(name, workers)| {
            let out = dir.path().join(format!("{name}.jsonl"));
            ok(&[
                "gen-pretrain",
                p(&input),
                "--seed",
                "7",
                "--workers",
                workers,
                "-o",
                p(&out),
            ]);
            fs::read(out).unwrap()
        })
        .collect();
    assert_eq!(outs[0], outs[1]);
    assert_eq!(outs[0], outs[2]);
    assert_eq!(outs[0].iter().filter(|&&b| b == b'\n').count(), 300);
    let other = dir.path().join("other.jsonl");
    ok(&["gen-pretrain", p(&input), "--seed", "8", "-o", p(&other)]);
    assert_ne!(fs::read(other).unwrap(), outs[0]);
}

#[test]
fn flags_override_config_file() {
    let dir = TempDir::new().unwrap();
    let input = corpus(&dir, 50);
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"seed": 3, "objectives": {"rn_rate": 0.2}}"#).unwrap();
    let (a, b, c) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("c"));
    ok(&["gen-pretrain", p(&input), "--config", p(&cfg), "-o", p(&a)]);
    ok(&[
        "gen-pretrain",
        p(&input),
        "--config",
        p(&cfg),
        "--seed",
        "7",
        "-o",
        p(&b),
    ]);
    fs::write(&cfg, r#"{"seed": 7, "objectives": {"rn_rate": 0.2}}"#).unwrap();
    ok(&["gen-pretrain", p(&input), "--config", p(&cfg), "-o", p(&c)]);
    assert_ne!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_eq!(fs::read(&b).unwrap(), fs::read(&c).unwrap());
}

#[test]
fn invalid_config_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    let input = corpus(&dir, 5);
    let cfg = dir.path().join("cfg.json");
    fs::write(
        &cfg,
        r#"{"objectives": {"weights": {"laMSP": 0.9, "TM": 0.2, "UN": 0.2, "RN": 0.05, "identity": 0.05}}}"#,
    )
    .unwrap();
    let out = run(&["gen-pretrain", p(&input), "--config", p(&cfg)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("objectives"));
    fs::write(&cfg, r#"{"sead": 1}"#).unwrap();
    let out = run(&["gen-pretrain", p(&input), "--config", p(&cfg)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("sead"));
}

fn write_jsonl(path: &Path, rows: &[serde_json::Value]) {
    let text: String = rows.iter().map(|r| format!("{r}\n")).collect();
    fs::write(path, text).unwrap();
}

#[test]
fn eval_repair_four_task_fixture() {
    let dir = TempDir::new().unwrap();
    let truths = ["=SUM(A1:A3)", "=A1+B1", "=IF(A1>0,1,0)", "=MAX(C1:C9)"];
    let bench = dir.path().join("bench.jsonl");
    let preds = dir.path().join("preds.jsonl");
    let tasks: Vec<_> = truths
        .iter()
        .enumerate()
        .map(|(i, t)| serde_json::json!({"buggy": format!("{t}+"), "ground_truth": t, "source_id": format!("t{i}")}))
        .collect();
    write_jsonl(&bench, &tasks);
    // truth at rank 1, 3, 5 and absent
    let filler = |i: usize| format!("=Z{i}*0");
    let mut rows = Vec::new();
    for (i, t) in truths.iter().enumerate() {
        let mut c: Vec<String> = (0..4).map(filler).collect();
        match i {
            0 => c.insert(0, t.to_string()),
            1 => c.insert(2, t.to_string()),
            2 => c.push(t.to_lowercase()),
            _ => c.push("=MIN(C1:C9)".into()),
        }
        rows.push(serde_json::json!({"source_id": format!("t{i}"), "candidates": c}));
    }
    write_jsonl(&preds, &rows);
    let report_path = dir.path().join("report.json");
    ok(&[
        "eval-repair",
        "--predictions",
        p(&preds),
        "--benchmark",
        p(&bench),
        "-k",
        "1",
        "-k",
        "5",
        "-o",
        p(&report_path),
    ]);
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(&report_path).unwrap()).unwrap();
    let value = |k: u64| {
        report["results"]
            .as_array()
            .unwrap()
            .iter()
            .find(|r| r["k"] == k && r["metric"] == "exact_match")
            .unwrap()["value"]
            .as_f64()
            .unwrap()
    };
    assert_eq!(value(1), 0.25);
    assert_eq!(value(5), 0.75);
    assert_eq!(report["per_task"].as_array().unwrap().len(), 4);
}

#[test]
fn data_errors_name_file_and_line_and_leave_no_output() {
    let dir = TempDir::new().unwrap();
    let bench = dir.path().join("bench.jsonl");
    write_jsonl(
        &bench,
        &[serde_json::json!({"buggy": "=A1+", "ground_truth": "=A1", "source_id": "t0"})],
    );
    let preds = dir.path().join("preds.jsonl");
    fs::write(&preds, "{\"source_id\":\"t0\",\"candidates\":[]}\n{oops\n").unwrap();
    let report = dir.path().join("report.json");
    let out = run(&[
        "eval-repair",
        "--predictions",
        p(&preds),
        "--benchmark",
        p(&bench),
        "-o",
        p(&report),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains(&format!("{}:2:", p(&preds))), "{err}");
    assert!(!report.exists());
    let out = run(&["dedup", p(&dir.path().join("missing.jsonl"))]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn usage_and_help_exit_codes() {
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    let help = String::from_utf8(run(&["--help"]).stdout).unwrap();
    for format in [
        "corpus record",
        "pretrain example",
        "predictions",
        "embedding",
        "baseline index",
    ] {
        assert!(help.contains(format), "{format}");
    }
    assert_eq!(run(&["no-such-command"]).status.code(), Some(1));
    assert_eq!(run(&["dedup", "x.jsonl", "--mode", "sideways"]).status.code(), Some(1));
    assert_eq!(
        run(&["eval-repair", "--benchmark", "b.jsonl", "-k", "0", "--index", "i"])
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn manifest_records_hashes() {
    let dir = TempDir::new().unwrap();
    let input = corpus(&dir, 20);
    let out = dir.path().join("out.jsonl");
    let manifest = dir.path().join("manifest.json");
    ok(&["dedup", p(&input), "-o", p(&out), "--manifest", p(&manifest)]);
    let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(&manifest).unwrap()).unwrap();
    let sha = |path: &Path| hex::encode(Sha256::digest(fs::read(path).unwrap()));
    assert_eq!(m["inputs"][0]["sha256"], sha(&input));
    assert_eq!(m["artifacts"][0]["sha256"], sha(&out));
    assert_eq!(m["command"], "dedup");
    // the worker count does not change the config hash
    let m2 = dir.path().join("m2.json");
    ok(&[
        "dedup",
        p(&input),
        "-o",
        p(&out),
        "--workers",
        "3",
        "--manifest",
        p(&m2),
    ]);
    let m2: serde_json::Value = serde_json::from_str(&fs::read_to_string(&m2).unwrap()).unwrap();
    assert_eq!(m["config_sha256"], m2["config_sha256"]);
    assert_eq!(m["artifacts"], m2["artifacts"]);
}

#[test]
fn repair_pipeline_with_baseline() {
    let dir = TempDir::new().unwrap();
    let input = corpus(&dir, 120);
    let (train, bench, index) = (
        dir.path().join("train.jsonl"),
        dir.path().join("bench.jsonl"),
        dir.path().join("index.json"),
    );
    ok(&[
        "gen-finetune-repair",
        p(&input),
        "--seed",
        "5",
        "--reserve",
        "30",
        "-o",
        p(&train),
        "--benchmark-out",
        p(&bench),
    ]);
    let ids = |path: &Path| -> Vec<String> {
        fs::read_to_string(path)
            .unwrap()
            .lines()
            .map(|l| {
                serde_json::from_str::<serde_json::Value>(l).unwrap()["source_id"]
                    .as_str()
                    .unwrap()
                    .to_owned()
            })
            .collect()
    };
    let (train_ids, bench_ids) = (ids(&train), ids(&bench));
    assert!(!bench_ids.is_empty() && bench_ids.len() <= 30);
    assert!(bench_ids.iter().all(|b| !train_ids.contains(b)));

    ok(&["baseline", "index", p(&input), "-o", p(&index)]);
    let report = dir.path().join("report.json");
    ok(&[
        "eval-repair",
        "--benchmark",
        p(&bench),
        "--index",
        p(&index),
        "-k",
        "1",
        "-k",
        "120",
        "-o",
        p(&report),
    ]);
    let r: serde_json::Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    let results = r["results"].as_array().unwrap();
    let (at1, at_all) = (
        results[0]["value"].as_f64().unwrap(),
        results[1]["value"].as_f64().unwrap(),
    );
    assert_eq!(at_all, 1.0);
    assert!(at1 <= at_all);
}

#[test]
fn completion_pipeline() {
    let dir = TempDir::new().unwrap();
    let input = corpus(&dir, 60);
    let model = dir.path().join("tok.json");
    ok(&["train-tokenizer", p(&input), "--budget", "400", "-o", p(&model)]);
    let (train, bench) = (dir.path().join("train.jsonl"), dir.path().join("bench.jsonl"));
    ok(&[
        "gen-finetune-complete",
        p(&input),
        "--model",
        p(&model),
        "--reserve",
        "10",
        "-o",
        p(&train),
        "--benchmark-out",
        p(&bench),
    ]);
    assert!(lines(&train) >= 45);
    assert!(lines(&bench) >= 20);
    let index = dir.path().join("index.json");
    ok(&["baseline", "index", p(&input), "-o", p(&index)]);
    let report = dir.path().join("report.json");
    ok(&[
        "eval-complete",
        "--benchmark",
        p(&bench),
        "--index",
        p(&index),
        "-o",
        p(&report),
    ]);
    let r: serde_json::Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    for m in r["results"].as_array().unwrap() {
        assert!(m["value"].as_f64().unwrap() > 0.0, "{m}");
    }
}

#[test]
fn retrieval_round_trip() {
    let dir = TempDir::new().unwrap();
    let input = corpus(&dir, 40);
    let pairs = dir.path().join("pairs.jsonl");
    ok(&[
        "eval-retrieval",
        "--corpus",
        p(&input),
        "--count",
        "25",
        "--seed",
        "1",
        "--pairs-out",
        p(&pairs),
    ]);
    let rows: Vec<serde_json::Value> = fs::read_to_string(&pairs)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(rows.len(), 25);
    let formulas: std::collections::BTreeSet<String> = rows
        .iter()
        .flat_map(|r| {
            [
                r["formula_a"].as_str().unwrap().to_owned(),
                r["formula_b"].as_str().unwrap().to_owned(),
            ]
        })
        .collect();
    let emb_path = dir.path().join("emb.jsonl");
    let write_emb = |vector: &dyn Fn(usize) -> Vec<f64>| {
        let rows: Vec<_> = formulas
            .iter()
            .enumerate()
            .map(|(i, f)| serde_json::json!({"formula": f, "vector": vector(i)}))
            .collect();
        write_jsonl(&emb_path, &rows);
    };

    // identical vectors: cosine is constant, which must be reported, not NaN
    write_emb(&|_| vec![1.0, 2.0]);
    let out = run(&["eval-retrieval", "--pairs", p(&pairs), "--embeddings", p(&emb_path)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("constant"));

    write_emb(&|i| vec![1.0, (i as f64 * 0.7).sin(), (i as f64).cos()]);
    let report = dir.path().join("r.json");
    ok(&[
        "eval-retrieval",
        "--pairs",
        p(&pairs),
        "--embeddings",
        p(&emb_path),
        "-o",
        p(&report),
    ]);
    let r: serde_json::Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    let v = r["value"].as_f64().unwrap();
    assert!((-1.0..=1.0).contains(&v));
}

#[test]
fn line_tools() {
    let out = ok(&["sketch", "=SUM(A1:A10)", "=IF(A1>0,\"x\",1)"]);
    assert_eq!(
        String::from_utf8(out.stdout).unwrap(),
        "=SUM(cell:cell)\n=IF(cell>number,string,number)\n"
    );
    let out = ok(&["check", "=SUM(A1"]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["ok"], false);
    let out = bin()
        .arg("lex")
        .stdin(std::process::Stdio::piped())
        .stdout(std::process::Stdio::piped())
        .spawn()
        .and_then(|mut c| {
            use std::io::Write;
            c.stdin.take().unwrap().write_all(b"=A1\n\n=B2+1\n")?;
            c.wait_with_output()
        })
        .unwrap();
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), 2);
}

#[test]
fn closed_stdout_is_not_an_error() {
    let dir = TempDir::new().unwrap();
    let input = corpus(&dir, 20_000);
    let mut child = bin()
        .args(["gen-pretrain", p(&input)])
        .stdout(std::process::Stdio::piped())
        .stderr(std::process::Stdio::piped())
        .spawn()
        .unwrap();
    drop(child.stdout.take());
    let out = child.wait_with_output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(!String::from_utf8_lossy(&out.stderr).contains("error"));
}
