use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use cadreward::review::mock::{MockResponse, MockServer};
use cadreward::seq::GOLDEN_SQUARE;
use serde_json::Value;
use tempfile::TempDir;

const FLAT_PLATE: &str = "SKETCH\nLOOP 0 0\nLINE 255 0\nLINE 255 255\nLINE 0 255\nLINE 0 0\nENDLOOP\nENDSKETCH\nEXTRUDE 0 128 128 128 0 0 0 20 0 255 NEW\nEND\n";

struct Run {
    code: i32,
    json: Value,
    stdout: String,
    stderr: String,
}

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_cadreward"));
    // Keep the host environment from leaking into the resolved configuration.
    for (k, _) in std::env::vars() {
        if k.starts_with("CADREWARD_") {
            c.env_remove(k);
        }
    }
    c
}

fn finish(out: Output) -> Run {
    let stdout = String::from_utf8_lossy(&out.stdout).into_owned();
    Run {
        code: out.status.code().unwrap_or(-1),
        json: serde_json::from_str(&stdout).unwrap_or(Value::Null),
        stdout,
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
    }
}

fn run(args: &[&str]) -> Run {
    finish(bin().args(args).output().unwrap())
}

fn s(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    if let Some(parent) = p.parent() {
        std::fs::create_dir_all(parent).unwrap();
    }
    std::fs::write(&p, text).unwrap();
    p
}

fn tmp() -> TempDir {
    tempfile::tempdir().unwrap()
}

fn read_ply(path: &Path) -> Vec<[f64; 3]> {
    let text = std::fs::read_to_string(path).unwrap();
    let body = text.split("end_header\n").nth(1).unwrap();
    body.lines()
        .map(|l| {
            let v: Vec<f64> = l.split_whitespace().map(|x| x.parse().unwrap()).collect();
            [v[0], v[1], v[2]]
        })
        .collect()
}

fn brute_chamfer(a: &[[f64; 3]], b: &[[f64; 3]]) -> f64 {
    let dir = |x: &[[f64; 3]], y: &[[f64; 3]]| {
        x.iter()
            .map(|p| {
                y.iter()
                    .map(|q| (0..3).map(|k| (p[k] - q[k]).powi(2)).sum::<f64>())
                    .fold(f64::INFINITY, f64::min)
            })
            .sum::<f64>()
            / x.len() as f64
    };
    dir(a, b) + dir(b, a)
}

#[test]
fn compile_golden_writes_cuboid_mesh_and_points() {
    let d = tmp();
    let seq = write(d.path(), "cube.cad", GOLDEN_SQUARE);
    let (obj, ply) = (d.path().join("cube.obj"), d.path().join("cube.ply"));
    let r = run(&[
        "compile",
        &s(&seq),
        "--mesh-out",
        &s(&obj),
        "--points-out",
        &s(&ply),
        "-n",
        "100",
    ]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let faces = std::fs::read_to_string(&obj)
        .unwrap()
        .lines()
        .filter(|l| l.starts_with("f "))
        .count();
    assert_eq!(faces, 12);
    assert_eq!(r.json["triangles"], 12);
    assert!((r.json["surface_area"].as_f64().unwrap() - 24.0).abs() < 1e-9);
    assert_eq!(read_ply(&ply).len(), 100);
    assert_eq!(r.json["config"]["seed"], 0);
}

#[test]
fn compile_missing_end_exits_2_with_json_diagnostics() {
    let d = tmp();
    let seq = write(
        d.path(),
        "bad.cad",
        GOLDEN_SQUARE.trim_end().trim_end_matches("END"),
    );
    let r = run(&["compile", &s(&seq)]);
    assert_eq!(r.code, 2);
    let line = r
        .stderr
        .lines()
        .find(|l| l.starts_with('{'))
        .expect("JSON diagnostics on stderr");
    let diags: Value = serde_json::from_str(line).unwrap();
    assert_eq!(diags["diagnostics"][0]["code"], "MissingEndToken");
    assert!(r.stdout.is_empty());
}

#[test]
fn compile_missing_file_exits_1() {
    let r = run(&["compile", "/definitely/not/here.cad"]);
    assert_eq!(r.code, 1);
    assert!(r.stderr.contains("here.cad"));
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(run(&["compile"]).code, 1);
    assert_eq!(run(&["frobnicate"]).code, 1);
    assert_eq!(run(&["--help"]).code, 0);
}

#[test]
fn judge_exit_codes() {
    let d = tmp();
    let gt = write(d.path(), "gt.cad", GOLDEN_SQUARE);
    let r = run(&["judge", &s(&gt), &s(&gt)]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_eq!(r.json["verdict"]["chamfer"], 0.0);
    assert_eq!(r.json["verdict"]["desirable"], true);

    let bad = write(d.path(), "bad.cad", "SKETCH\n");
    assert_eq!(run(&["judge", &s(&bad), &s(&gt)]).code, 2);
    assert_eq!(run(&["judge", &s(&gt), &s(&bad)]).code, 4);
}

#[test]
fn judge_rejects_prediction_far_from_ground_truth() {
    let d = tmp();
    let gt = write(d.path(), "gt.cad", GOLDEN_SQUARE);
    let pred = write(d.path(), "plate.cad", FLAT_PLATE);
    // Brute-force Chamfer over independently exported surface samples.
    let clouds: Vec<Vec<[f64; 3]>> = [&gt, &pred]
        .iter()
        .map(|p| {
            let ply = p.with_extension("ply");
            let r = run(&["compile", &s(p), "--points-out", &s(&ply), "-n", "512"]);
            assert_eq!(r.code, 0, "{}", r.stderr);
            read_ply(&ply)
        })
        .collect();
    let oracle = brute_chamfer(&clouds[0], &clouds[1]);
    assert!(oracle > 0.05, "oracle CD {oracle}");

    let r = run(&["judge", &s(&pred), &s(&gt), "--n-points", "512"]);
    assert_eq!(r.code, 3, "{}", r.stderr);
    let cd = r.json["verdict"]["chamfer"].as_f64().unwrap();
    assert!(cd > 0.05);
    assert!(
        (cd - oracle).abs() / oracle < 0.2,
        "judge CD {cd} vs oracle {oracle}"
    );
}

fn corpus(d: &Path, preds: &[(&str, &str)], gts: &[(&str, &str)]) -> (PathBuf, PathBuf) {
    let (p, g) = (d.join("pred"), d.join("gt"));
    for (n, t) in preds {
        write(&p, n, t);
    }
    for (n, t) in gts {
        write(&g, n, t);
    }
    (p, g)
}

#[test]
fn dataset_labels_alpha_and_determinism() {
    let d = tmp();
    let (p, g) = corpus(
        d.path(),
        &[
            ("a.cad", GOLDEN_SQUARE),
            ("b.cad", GOLDEN_SQUARE),
            ("c.cad", FLAT_PLATE),
        ],
        &[
            ("a.cad", GOLDEN_SQUARE),
            ("b.cad", GOLDEN_SQUARE),
            ("c.cad", GOLDEN_SQUARE),
        ],
    );
    let out = d.path().join("out.jsonl");
    let r = run(&[
        "dataset",
        &s(&p),
        &s(&g),
        &s(&out),
        "--alpha",
        "1",
        "--n-points",
        "256",
    ]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_eq!(r.json["records"], 3);
    assert_eq!(r.json["labels"]["true"], 2);
    let first = std::fs::read(&out).unwrap();
    let rows: Vec<Value> = String::from_utf8_lossy(&first)
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(
        rows.iter()
            .map(|r| r["prompt"].as_str().unwrap())
            .collect::<Vec<_>>(),
        ["a", "b", "c"]
    );
    assert_eq!(rows[2]["label"], false);

    let out2 = d.path().join("out2.jsonl");
    for o in [&out, &out2] {
        let r = run(&[
            "dataset",
            &s(&p),
            &s(&g),
            &s(o),
            "--alpha",
            "0.5",
            "--seed",
            "4",
            "--n-points",
            "256",
        ]);
        assert_eq!(r.code, 0, "{}", r.stderr);
    }
    assert_eq!(std::fs::read(&out).unwrap(), std::fs::read(&out2).unwrap());

    let r = run(&[
        "dataset",
        &s(&p),
        &s(&g),
        &s(&out),
        "--alpha",
        "0",
        "--n-points",
        "256",
    ]);
    assert_eq!(r.code, 0);
    assert_eq!(r.json["labels"]["true"], 0);
    assert!(std::fs::read_to_string(&out)
        .unwrap()
        .lines()
        .all(|l| l.contains("\"label\":false")));
}

#[test]
fn dataset_uses_prompt_files_and_reports_unpaired() {
    let d = tmp();
    let (p, g) = corpus(
        d.path(),
        &[("a.cad", GOLDEN_SQUARE)],
        &[("a.cad", GOLDEN_SQUARE)],
    );
    let prompts = d.path().join("prompts");
    write(&prompts, "a.txt", "A cube.\n");
    let out = d.path().join("out.jsonl");
    let r = run(&[
        "dataset",
        &s(&p),
        &s(&g),
        &s(&out),
        "--prompt-dir",
        &s(&prompts),
        "--n-points",
        "128",
    ]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert!(std::fs::read_to_string(&out)
        .unwrap()
        .contains("\"prompt\":\"A cube.\""));

    write(&p, "orphan.cad", GOLDEN_SQUARE);
    let r = run(&["dataset", &s(&p), &s(&g), &s(&out)]);
    assert_eq!(r.code, 1);
    assert!(r.stderr.contains("orphan.cad"));
}

#[test]
fn eval_self_pairs_and_invalidity() {
    let d = tmp();
    let (p, g) = corpus(
        d.path(),
        &[
            ("1.cad", GOLDEN_SQUARE),
            ("2.cad", FLAT_PLATE),
            ("3.cad", GOLDEN_SQUARE),
            ("4.cad", "SKETCH\n"),
        ],
        &[
            ("1.cad", GOLDEN_SQUARE),
            ("2.cad", FLAT_PLATE),
            ("3.cad", GOLDEN_SQUARE),
            ("4.cad", GOLDEN_SQUARE),
        ],
    );
    let report = d.path().join("report.json");
    let r = run(&["eval", &s(&p), &s(&g), &s(&report), "--n-points", "256"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_eq!(r.json["ir_percent"], 25.0);
    assert_eq!(r.json["f1"]["line"], 1.0);
    assert_eq!(r.json["cd_median"], 0.0);
    let on_disk: Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(on_disk, r.json);

    // The aggregate agrees with a recomputation from the CSV rows.
    let mut rdr = csv::Reader::from_path(report.with_extension("csv")).unwrap();
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 4);
    let invalid = rows.iter().filter(|r| &r[1] == "false").count();
    assert_eq!(100.0 * invalid as f64 / rows.len() as f64, 25.0);
    let lines: Vec<f64> = rows
        .iter()
        .filter(|r| !r[2].is_empty())
        .map(|r| r[2].parse().unwrap())
        .collect();
    assert_eq!(
        lines.iter().sum::<f64>() / lines.len() as f64,
        r.json["f1"]["line"].as_f64().unwrap()
    );
    assert!(rows[3][7].contains("MissingEndToken") || rows[3][7].contains("LOOP"));
}

#[test]
fn eval_invalid_ground_truth_exits_4() {
    let d = tmp();
    let (p, g) = corpus(
        d.path(),
        &[("x.cad", GOLDEN_SQUARE)],
        &[("x.cad", "EXTRUDE\n")],
    );
    let r = run(&["eval", &s(&p), &s(&g), &s(&d.path().join("r.json"))]);
    assert_eq!(r.code, 4);
    assert!(r.stderr.contains("x.cad"));
}

#[test]
fn review_with_deterministic_stub() {
    let d = tmp();
    let prompt = write(d.path(), "p.txt", "A cube.\n");
    let r = run(&[
        "review",
        &s(&prompt),
        "--fail-first-k",
        "1",
        "--max-iters",
        "1",
    ]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_eq!(r.json["trace"]["attempts"].as_array().unwrap().len(), 2);
    assert_eq!(r.json["trace"]["final_valid"], true);
    let second = r.json["trace"]["attempts"][1]["prompt"].as_str().unwrap();
    assert!(second.starts_with("A cube.") && second.contains("MissingEndToken"));

    let r = run(&[
        "review",
        &s(&prompt),
        "--fail-first-k",
        "3",
        "--max-iters",
        "1",
    ]);
    assert_ne!(r.code, 0);
    assert_eq!(r.json["trace"]["attempts"].as_array().unwrap().len(), 2);
    assert_eq!(r.json["trace"]["final_valid"], false);
}

#[test]
fn review_against_mock_endpoint() {
    let d = tmp();
    let prompt = write(d.path(), "p.txt", "A cube.\n");
    let server = MockServer::start(vec![MockResponse::completion(GOLDEN_SQUARE)]).unwrap();
    let trace = d.path().join("trace.json");
    let r = run(&[
        "review",
        &s(&prompt),
        "--generator",
        "remote",
        "--endpoint",
        &server.url(),
        "--trace-out",
        &s(&trace),
    ]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_eq!(r.json["trace"]["final_valid"], true);
    let saved: Value = serde_json::from_str(&std::fs::read_to_string(&trace).unwrap()).unwrap();
    assert_eq!(saved, r.json);
    let req: Value = serde_json::from_str(&server.requests()[0]).unwrap();
    assert_eq!(req["messages"][0]["content"], "A cube.");
}

#[test]
fn review_unavailable_endpoint_exits_5() {
    let d = tmp();
    let prompt = write(d.path(), "p.txt", "A cube.\n");
    let server = MockServer::start(vec![MockResponse::error(503)]).unwrap();
    let r = run(&[
        "review",
        &s(&prompt),
        "--generator",
        "remote",
        "--endpoint",
        &server.url(),
        "--max-retries",
        "1",
        "--backoff-ms",
        "1",
    ]);
    assert_eq!(r.code, 5, "{}", r.stderr);
    assert_eq!(server.request_count(), 2);
    assert!(r.json["error"].as_str().unwrap().contains("unavailable"));
}

#[test]
fn kto_batches() {
    let d = tmp();
    let balanced = write(
        d.path(),
        "b.jsonl",
        "{\"policy_logprob\": -2.0, \"ref_logprob\": -2.0, \"desirable\": true}\n\
         {\"policy_logprob\": -4.0, \"ref_logprob\": -4.0, \"desirable\": false}\n",
    );
    let r = run(&["kto", &s(&balanced)]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_eq!(r.json["z0"], 0.0);
    assert_eq!(r.json["loss"], 0.5);

    // Rewards +1 (desirable) and -1 (undesirable) at z0 = 0, beta = 1:
    // each term is sigmoid(-1); gradients are -/+ sigmoid(1) sigmoid(-1) / 2.
    let fixture = write(
        d.path(),
        "f.jsonl",
        "{\"policy_logprob\": -1.0, \"ref_logprob\": -2.0, \"desirable\": true}\n\
         {\"policy_logprob\": -3.0, \"ref_logprob\": -2.0, \"desirable\": false}\n",
    );
    let r = run(&["kto", &s(&fixture), "--beta", "1"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let s1 = 1.0 / (1.0 + 1f64.exp());
    assert!((r.json["loss"].as_f64().unwrap() - s1).abs() < 1e-12);
    let g = s1 * (1.0 - s1) / 2.0;
    assert!((r.json["grads"][0].as_f64().unwrap() + g).abs() < 1e-12);
    assert!((r.json["grads"][1].as_f64().unwrap() - g).abs() < 1e-12);

    let empty = write(d.path(), "e.jsonl", "");
    assert_eq!(run(&["kto", &s(&empty)]).code, 1);

    let bad = write(
        d.path(),
        "bad.jsonl",
        "{\"policy_logprob\": -1.0, \"ref_logprob\": -2.0, \"desirable\": true}\nnot json\n{\"policy_logprob\": 3.0, \"ref_logprob\": -2.0, \"desirable\": true}\n",
    );
    let r = run(&["kto", &s(&bad)]);
    assert_eq!(r.code, 1);
    assert!(
        r.stderr.contains("row 2") && r.stderr.contains("row 3"),
        "{}",
        r.stderr
    );
}

#[test]
fn sft_and_import() {
    let d = tmp();
    let batch = write(d.path(), "s.jsonl", "[1.0, 1.0]\n[0.5]\n");
    let r = run(&["sft", &s(&batch)]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert!((r.json["loss"].as_f64().unwrap() - 0.5 * 2f64.ln()).abs() < 1e-12);

    let fixture =
        Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures/deepcad/plate_with_hole.json");
    let out = d.path().join("plate.cad");
    let r = run(&["import", &s(&fixture), &s(&out)]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_eq!(r.json["compiles"], true);
    assert!(std::fs::read_to_string(&out).unwrap().contains("CIRCLE"));

    let junk = write(
        d.path(),
        "junk.json",
        "{\"entities\": {}, \"sequence\": [{\"entity\": \"X\"}]}",
    );
    assert_eq!(run(&["import", &s(&junk), &s(&out)]).code, 2);
}

#[test]
fn configuration_layers() {
    let d = tmp();
    let seq = write(d.path(), "cube.cad", GOLDEN_SQUARE);
    let cfg = write(d.path(), "run.toml", "seed = 11\nn_points = 64\n");
    let r = finish(
        bin()
            .args(["compile", &s(&seq), "--config", &s(&cfg)])
            .env("CADREWARD_SEED", "5")
            .env("CADREWARD_ALPHA", "0.25")
            .output()
            .unwrap(),
    );
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_eq!(r.json["config"]["seed"], 11);
    assert_eq!(r.json["config"]["alpha"], 0.25);
    assert_eq!(r.json["config"]["n_points"], 64);

    let r = finish(
        bin()
            .args(["compile", &s(&seq), "--config", &s(&cfg), "--seed", "2"])
            .output()
            .unwrap(),
    );
    assert_eq!(r.json["config"]["seed"], 2);

    let bad = write(d.path(), "bad.toml", "no_such_key = 1\n");
    assert_eq!(run(&["compile", &s(&seq), "--config", &s(&bad)]).code, 1);
}
