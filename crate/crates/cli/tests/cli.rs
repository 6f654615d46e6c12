use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hardreject"))
}

fn run(args: &[&str]) -> Output {
    let out = bin().args(args).output().expect("binary runs");
    if !out.status.success() {
        eprintln!("stderr: {}", String::from_utf8_lossy(&out.stderr));
    }
    out
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(out.status.success(), "{args:?} failed");
    String::from_utf8(out.stdout).unwrap()
}

// Two noisy clusters, deterministic without an RNG.
fn write_data(path: &Path, n: usize, phase: f64) {
    let mut s = String::from("id,x0,x1,colour,label\n");
    for i in 0..n {
        let y = usize::from(i % 3 == 0);
        let t = i as f64 + phase;
        let centre = if y == 1 { 1.0 } else { -1.0 };
        let x0 = centre + 1.3 * (t * 1.7).sin();
        let x1 = (t * 0.9).cos();
        let colour = ["red", "green", "blue"][i % 3 * (i % 2)];
        s.push_str(&format!(
            "r{phase}_{i},{x0},{x1},{colour},{}\n",
            if y == 1 { "yes" } else { "no" }
        ));
    }
    std::fs::write(path, s).unwrap();
}

struct Fixture {
    _dir: tempfile::TempDir,
    root: PathBuf,
    config: PathBuf,
}

fn fixture(filter: &str, reject: &str) -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().to_path_buf();
    write_data(&root.join("train.csv"), 90, 0.0);
    write_data(&root.join("test.csv"), 45, 0.5);
    let config = serde_json::json!({
        "schema_version": 1,
        "train_path": "train.csv",
        "test_path": "test.csv",
        "label_column": "label",
        "positive_value": "yes",
        "id_column": "id",
        "categorical_columns": ["colour"],
        "filter_method": filter,
        "reject_method": reject,
        "seeds": [0, 1],
        "search": {"strategy": "grid_heuristic", "grid": [0.0, 0.2, 0.4], "max_bisections": 1},
        "hardness_cv": {"folds": 3, "repeats": 1, "seeds": [11]},
        "pool": [{"kind": "logistic", "seed": 0}, {"kind": "naive_bayes", "seed": 1}],
        "main_model": {"n_estimators": 15},
        "ensemble": {"n_estimators": 5},
        "output_dir": "unused"
    });
    let path = root.join("config.json");
    std::fs::write(&path, serde_json::to_string_pretty(&config).unwrap()).unwrap();
    Fixture {
        _dir: dir,
        root,
        config: path,
    }
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn run_twice_from_manifest_is_byte_identical() {
    let f = fixture("IH", "confidence");
    let a = f.root.join("a");
    ok(&["run", "--config", s(&f.config), "--out", s(&a)]);
    let manifest = a.join("manifest.json");
    let b = f.root.join("b");
    let c = f.root.join("c");
    ok(&["run", "--config", s(&manifest), "--out", s(&b)]);
    ok(&["run", "--config", s(&manifest), "--out", s(&c)]);
    let rb = std::fs::read(b.join("results.csv")).unwrap();
    assert_eq!(rb, std::fs::read(c.join("results.csv")).unwrap());
    assert_eq!(rb, std::fs::read(a.join("results.csv")).unwrap());
    assert_eq!(
        std::fs::read(b.join("scores.csv")).unwrap(),
        std::fs::read(c.join("scores.csv")).unwrap()
    );
}

#[test]
fn run_equals_search_train_evaluate() {
    let f = fixture("IF", "confidence");
    let whole = f.root.join("whole");
    ok(&["run", "--config", s(&f.config), "--out", s(&whole)]);

    let steps = f.root.join("steps");
    ok(&["search", "--config", s(&f.config), "--out", s(&steps)]);
    let manifest = steps.join("manifest.json");
    ok(&["train", "--config", s(&manifest), "--out", s(&steps)]);
    ok(&[
        "evaluate",
        "--config",
        s(&manifest),
        "--model",
        s(&steps.join("model.json")),
        "--out",
        s(&steps),
    ]);
    assert_eq!(
        std::fs::read_to_string(whole.join("results.csv")).unwrap(),
        std::fs::read_to_string(steps.join("results.csv")).unwrap()
    );
    assert_eq!(
        std::fs::read_to_string(whole.join("predictions.csv")).unwrap(),
        std::fs::read_to_string(steps.join("predictions.csv")).unwrap()
    );
}

#[test]
fn hardness_and_curve_outputs() {
    let f = fixture("IH", "confidence");
    let out = f.root.join("h");
    ok(&["hardness", "--config", s(&f.config), "--out", s(&out)]);
    let scores = std::fs::read_to_string(out.join("scores.csv")).unwrap();
    assert!(scores.starts_with("instance_id,score,method,n_rounds"));
    assert_eq!(scores.lines().count(), 91);
    assert!(out.join("scores.csv.provenance.json").exists());

    ok(&[
        "hardness",
        "--config",
        s(&f.config),
        "--out",
        s(&out),
        "--method",
        "IF",
    ]);
    let scores = std::fs::read_to_string(out.join("scores.csv")).unwrap();
    assert!(scores.lines().nth(1).unwrap().contains(",IF,"));

    ok(&[
        "curve",
        "--config",
        s(&f.config),
        "--out",
        s(&out),
        "--t-f",
        "0.2",
    ]);
    let curve = std::fs::read_to_string(out.join("curve.csv")).unwrap();
    assert_eq!(curve.lines().count(), 27);
    assert!(curve.lines().nth(1).unwrap().starts_with("0.2,0.5,"));
}

#[test]
fn seed_list_and_mode_flags() {
    let f = fixture("IH", "none");
    let mut config: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&f.config).unwrap()).unwrap();
    config["search"] = serde_json::json!({"strategy": "grid_heuristic", "max_bisections": 1});
    std::fs::write(&f.config, config.to_string()).unwrap();
    let out = f.root.join("m");
    ok(&[
        "search",
        "--config",
        s(&f.config),
        "--out",
        s(&out),
        "--seed-list",
        "4,5,6",
        "--mode",
        "score",
    ]);
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["seeds"], serde_json::json!([4, 5, 6]));
    assert_eq!(manifest["config"]["t_f_mode"], "score_threshold");
    assert_eq!(
        manifest["selection"]["per_split"].as_array().unwrap().len(),
        3
    );
    assert!(manifest["selection"]["t_r"].is_null());
}

#[test]
fn compare_emits_thirteen_rows_with_stable_standard_row() {
    let f = fixture("IH", "confidence");
    let out = f.root.join("cmp");
    ok(&["compare", "--config", s(&f.config), "--out", s(&out)]);
    let table = std::fs::read_to_string(out.join("compare.csv")).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(
        lines[0],
        "F,R,T_f,T_r,PRC_0,PRC_1,RCL_0,RCL_1,ACP_0,ACP_1,score,annotation"
    );
    assert_eq!(lines.len(), 14);
    let standard = lines[13];
    assert!(standard.starts_with("--,--,--,--,"));

    // The standard row does not depend on the configured methods.
    let g = fixture("none", "certainty");
    let out2 = g.root.join("cmp");
    ok(&["compare", "--config", s(&g.config), "--out", s(&out2)]);
    let table2 = std::fs::read_to_string(out2.join("compare.csv")).unwrap();
    assert_eq!(table2.lines().nth(13).unwrap(), standard);
    assert!(out.join("standard").join("manifest.json").exists());
}

#[test]
fn exit_codes() {
    let f = fixture("IH", "confidence");
    let out = f.root.join("e");

    let missing = run(&[
        "run",
        "--config",
        s(&f.root.join("nope.json")),
        "--out",
        s(&out),
    ]);
    assert_eq!(missing.status.code(), Some(1));

    let bad = f.root.join("bad.json");
    std::fs::write(&bad, r#"{"schema_version": 9}"#).unwrap();
    assert_eq!(run(&["search", "--config", s(&bad)]).status.code(), Some(1));

    assert_eq!(run(&["search", "--nonsense"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));

    std::fs::write(
        f.root.join("train.csv"),
        "id,x0,label\na,1,x\nb,2,y\nc,3,z\n",
    )
    .unwrap();
    let data = run(&["search", "--config", s(&f.config), "--out", s(&out)]);
    assert_eq!(data.status.code(), Some(2));
}

#[test]
fn train_requires_manifest() {
    let f = fixture("IH", "confidence");
    let out = run(&[
        "train",
        "--config",
        s(&f.config),
        "--out",
        s(&f.root.join("t")),
    ]);
    assert_eq!(out.status.code(), Some(1));
}
