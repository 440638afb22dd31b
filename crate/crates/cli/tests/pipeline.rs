use std::path::Path;
use std::process::{Command, Output};

fn skelshap(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_skelshap"))
        .args(args)
        .arg("--out")
        .arg(dir)
        .env_remove("SHAPGCN_THREADS")
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = skelshap(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}\n{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn error_json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stderr)
        .unwrap_or_else(|_| panic!("stderr is not JSON: {}", String::from_utf8_lossy(&out.stderr)))
}

/// Small explain stage so the pipeline runs in seconds.
const CONFIG: &str = r#"{ "seed": 3, "explain": { "background": 10, "max_samples": 16 } }"#;

fn run_pipeline(root: &Path, name: &str) -> std::path::PathBuf {
    let dir = root.join(name);
    let config = root.join("config.json");
    std::fs::write(&config, CONFIG).unwrap();
    let c = config.to_str().unwrap();
    for stage in ["gen", "train", "explain", "perturb", "sweep"] {
        ok(&dir, &[stage, "--config", c]);
    }
    dir
}

fn read_csv(path: &Path) -> (String, Vec<csv::StringRecord>, csv::StringRecord) {
    let text = std::fs::read_to_string(path).unwrap();
    let (first, body) = text.split_once('\n').unwrap();
    let mut r = csv::Reader::from_reader(body.as_bytes());
    let header = r.headers().unwrap().clone();
    (first.to_string(), r.records().map(|r| r.unwrap()).collect(), header)
}

#[test]
fn synthetic_pipeline_is_faithful_reproducible_and_hash_checked() {
    let root = tempfile::tempdir().unwrap();
    let a = run_pipeline(root.path(), "a");

    let (tag, rows, header) = read_csv(&a.join("perturb_informed.csv"));
    assert!(tag.starts_with("# config_hash="));
    let col = |name: &str| header.iter().position(|h| h == name).unwrap();
    let (class, k, sel) = (col("class"), col("k"), col("selection"));
    let (pgi, pgu) = (col("pgi_sensitivity"), col("pgu_sensitivity"));
    let target: Vec<_> = rows.iter().filter(|r| &r[class] == "1").collect();
    let mut checked = 0;
    for kk in 1..=6 {
        let find = |s: &str, c: usize| -> f64 {
            let row = target.iter().find(|r| r[k] == kk.to_string() && &r[sel] == s).unwrap();
            row[c].parse().unwrap()
        };
        assert!(find("important", pgi) >= find("unimportant", pgu), "k = {kk}");
        checked += 1;
    }
    assert_eq!(checked, 6);

    let verify = ok(&a, &["verify", "--config", root.path().join("config.json").to_str().unwrap()]);
    assert!(verify.contains("single config hash"), "{verify}");
    assert!(!verify.contains("[FAIL]"));

    let manifest: serde_json::Value = serde_json::from_slice(&std::fs::read(a.join("manifest.json")).unwrap()).unwrap();
    for stage in ["gen", "train", "explain", "perturb", "sweep"] {
        assert!(manifest["stages"][stage]["config_hash"].is_string(), "{stage} missing");
    }
    assert_eq!(manifest["stages"]["gen"]["seeds"]["train_split"], 6);

    // Same config into another directory gives byte-identical reports.
    let b = run_pipeline(root.path(), "b");
    for file in
        ["perturb_informed.csv", "perturb_random.csv", "sweep.csv", "keypoint_scores.csv", "beeswarm.csv", "local.csv"]
    {
        assert_eq!(std::fs::read(a.join(file)).unwrap(), std::fs::read(b.join(file)).unwrap(), "{file}");
    }

    // No temporary files are left behind by the atomic writes.
    for entry in std::fs::read_dir(&a).unwrap() {
        let name = entry.unwrap().file_name().into_string().unwrap();
        assert!(!name.starts_with(".tmp"), "{name}");
    }

    // k = 0 reports only the baseline; the override changes the config
    // hash, so the directory then mixes hashes and verify rejects it.
    let out = skelshap(&b, &["perturb", "--config", root.path().join("config.json").to_str().unwrap(), "--k", "0"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (_, base_rows, base_header) = read_csv(&b.join("perturb_baseline.csv"));
    assert!(base_header.iter().all(|h| !h.starts_with("pgi") && !h.starts_with("pgu")));
    let baseline: Vec<_> = rows.iter().filter(|r| &r[sel] == "baseline").collect();
    assert_eq!(base_rows.len(), baseline.len());
    for (b_row, full) in base_rows.iter().zip(&baseline) {
        assert_eq!(b_row[0], full[class]);
        assert_eq!(b_row[1], full[col("sensitivity")]);
        assert_eq!(b_row[2], full[col("specificity")]);
    }
    let out = skelshap(&b, &["verify"]);
    assert_eq!(out.status.code(), Some(3));
    let err = error_json(&out);
    assert_eq!(err["error"], "data");
    assert!(err["message"].as_str().unwrap().contains("mixed config hashes"));
}

#[test]
fn errors_map_to_exit_codes_with_json() {
    let root = tempfile::tempdir().unwrap();
    let dir = root.path().join("run");

    let bad = root.path().join("bad.json");
    std::fs::write(&bad, r#"{ "seed": 1, "no_such_field": true }"#).unwrap();
    let out = skelshap(&dir, &["gen", "--config", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_json(&out)["error"], "config");

    let out = skelshap(&dir, &["gen", "--config", root.path().join("missing.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));

    let out = skelshap(&dir, &["perturb", "--mode", "scale"]);
    assert_eq!(out.status.code(), Some(2));
    let out = skelshap(&dir, &["perturb", "--epsilon", "1.5"]);
    assert_eq!(out.status.code(), Some(2));

    let out = skelshap(&dir, &["train"]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(error_json(&out)["exit_code"], 3);

    let recorded = root.path().join("recorded.json");
    std::fs::write(&recorded, r#"{ "dataset": { "mode": "cp_like" } }"#).unwrap();
    let out = skelshap(&dir, &["gen", "--config", recorded.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));

    let out = Command::new(env!("CARGO_BIN_EXE_skelshap"))
        .args(["verify", "--out"])
        .arg(&dir)
        .env("SHAPGCN_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn recorded_data_imports_with_the_builtin_skeleton() {
    let root = tempfile::tempdir().unwrap();
    let mut records = Vec::new();
    for i in 0..4 {
        let coords: Vec<Vec<Vec<Vec<f64>>>> =
            (0..6).map(|t| (0..29).map(|n| vec![vec![(t * n + i) as f64 * 0.01, n as f64 * 0.1]]).collect()).collect();
        records.push(serde_json::json!({
            "frame_rate": 30.0, "labels": [i % 2], "persons": 1, "dims": 2,
            "subject_id": format!("s{i}"), "coords": coords
        }));
    }
    let data = root.path().join("data.json");
    std::fs::write(&data, serde_json::to_vec(&serde_json::json!({ "sequences": records })).unwrap()).unwrap();
    let config = root.path().join("cp.json");
    let cfg = serde_json::json!({
        "dataset": { "mode": "cp_like", "train_path": data, "val_path": data },
        "features": { "dual_timescale": true }
    });
    std::fs::write(&config, serde_json::to_vec(&cfg).unwrap()).unwrap();
    let dir = root.path().join("run");
    let out = ok(&dir, &["gen", "--config", config.to_str().unwrap()]);
    assert!(out.contains("4 training and 4 validation"), "{out}");
    let topo: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.join("topology.json")).unwrap()).unwrap();
    assert_eq!(topo["n"], 29);
}
