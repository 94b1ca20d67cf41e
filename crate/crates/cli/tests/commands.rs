use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use tempfile::TempDir;

const QUICK_GP: &str = r#"{"pop_size": 20, "generations": 4, "max_size": 24, "max_depth": 5, "lm_iterations": 5}"#;
const QUICK_ITEA: &str = r#"{"engine": "itea", "itea_popsize": 10, "itea_generations": 3}"#;

fn symreg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_symreg"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// y = 2·a + b over a small grid; header "a,b,y".
fn write_dataset(path: &Path, rows: usize) {
    let mut text = String::from("a,b,y\n");
    for i in 0..rows {
        let a = i as f64 / 10.0;
        let b = ((i * 7) % 13) as f64 - 6.0;
        text.push_str(&format!("{a},{b},{}\n", 2.0 * a + b));
    }
    fs::write(path, text).unwrap();
}

struct Fixture {
    dir: TempDir,
}

impl Fixture {
    fn new() -> Self {
        let f = Self { dir: TempDir::new().unwrap() };
        fs::write(f.path("gp.json"), QUICK_GP).unwrap();
        write_dataset(&f.path("data.csv"), 60);
        f
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn fit(&self, model: &str, extra: &[&str]) -> Output {
        let (c, d, m, l) = (self.path("gp.json"), self.path("data.csv"), self.path(model), self.path("log.csv"));
        let mut args = vec!["fit", "--config", s(&c), "--data", s(&d), "--target", "y", "--out", s(&m), "--log", s(&l)];
        args.extend_from_slice(extra);
        symreg(&args)
    }
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn fit_writes_model_and_log() {
    let f = Fixture::new();
    let out = f.fit("model.json", &[]);
    assert!(out.status.success(), "{}", stderr(&out));
    let model: serde_json::Value = serde_json::from_str(&fs::read_to_string(f.path("model.json")).unwrap()).unwrap();
    assert_eq!(model["format"], "symreg-model");
    assert_eq!(model["features"], serde_json::json!(["a", "b"]));
    assert_eq!(model["config_digest"].as_str().unwrap().len(), 64);
    assert!(model["metrics"]["test_r2"].is_number());
    let log = fs::read_to_string(f.path("log.csv")).unwrap();
    let mut lines = log.lines();
    assert_eq!(
        lines.next().unwrap(),
        "generation,best_train_loss,best_val_loss,median_size,median_complexity,n_simplifications,elapsed_ms"
    );
    assert_eq!(lines.count(), 5, "generation 0 plus four generations");
}

#[test]
fn missing_dataset_exits_3_naming_the_path() {
    let f = Fixture::new();
    let c = f.path("gp.json");
    let out = symreg(&["fit", "--config", s(&c), "--data", "/nonexistent/dir/data.csv"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("/nonexistent/dir/data.csv"), "{}", stderr(&out));
}

#[test]
fn config_errors_exit_2() {
    let f = Fixture::new();
    fs::write(f.path("bad.json"), r#"{"popsize": 10}"#).unwrap();
    let (c, d) = (f.path("bad.json"), f.path("data.csv"));
    let out = symreg(&["fit", "--config", s(&c), "--data", s(&d)]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    assert_eq!(symreg(&["fit", "--bogus-flag"]).status.code(), Some(2));
    fs::write(f.path("odd.json"), r#"{"pop_size": 7}"#).unwrap();
    let c = f.path("odd.json");
    assert_eq!(symreg(&["fit", "--config", s(&c), "--data", s(&d)]).status.code(), Some(2));
}

#[test]
fn unknown_target_is_a_data_error() {
    let f = Fixture::new();
    let (c, d) = (f.path("gp.json"), f.path("data.csv"));
    let out = symreg(&["fit", "--config", s(&c), "--data", s(&d), "--target", "zzz"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn same_seed_gives_byte_identical_models() {
    let f = Fixture::new();
    assert!(f.fit("m1.json", &[]).status.success());
    assert!(f.fit("m2.json", &[]).status.success());
    assert_eq!(fs::read(f.path("m1.json")).unwrap(), fs::read(f.path("m2.json")).unwrap());
}

#[test]
fn itea_engine_fits_too() {
    let f = Fixture::new();
    fs::write(f.path("itea.json"), QUICK_ITEA).unwrap();
    let (c, d, m, l) = (f.path("itea.json"), f.path("data.csv"), f.path("it.json"), f.path("it.csv"));
    let out = symreg(&["fit", "--config", s(&c), "--data", s(&d), "--out", s(&m), "--log", s(&l)]);
    assert!(out.status.success(), "{}", stderr(&out));
    let model: serde_json::Value = serde_json::from_str(&fs::read_to_string(&m).unwrap()).unwrap();
    assert_eq!(model["engine"], "itea");
    assert!(fs::read_to_string(&l).unwrap().starts_with("generation,best_train_nmse\n"));
}

fn hand_model(dir: &Path, tree: &str, features: &[&str]) -> PathBuf {
    let doc = serde_json::json!({
        "format": "symreg-model",
        "version": 1,
        "engine": "gp",
        "seed": 0,
        "config_digest": "",
        "features": features,
        "target": "y",
        "standardization": null,
        "expression": "",
        "tree": serde_json::from_str::<serde_json::Value>(tree).unwrap(),
    });
    let p = dir.join("hand.json");
    fs::write(&p, serde_json::to_string(&doc).unwrap()).unwrap();
    p
}

fn predictions(path: &Path) -> Vec<f64> {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("prediction"));
    lines.map(|l| l.parse().unwrap()).collect()
}

#[test]
fn predict_variable_model_echoes_the_column() {
    let dir = TempDir::new().unwrap();
    let model = hand_model(dir.path(), r#"{"op": "var", "index": 0}"#, &["x0"]);
    let data = dir.path().join("x.csv");
    fs::write(&data, "x0\n1.5\n-2\n0.25\n").unwrap();
    let out = dir.path().join("p.csv");
    let o = symreg(&["predict", "--model", s(&model), "--data", s(&data), "--out", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(predictions(&out), vec![1.5, -2.0, 0.25]);
}

#[test]
fn predict_constant_model_gives_a_constant_column() {
    let dir = TempDir::new().unwrap();
    let model = hand_model(dir.path(), r#"{"op": "const", "value": 4.5}"#, &["x0"]);
    let data = dir.path().join("x.csv");
    fs::write(&data, "x0\n1\n2\n3\n").unwrap();
    let out = dir.path().join("p.csv");
    assert!(symreg(&["predict", "--model", s(&model), "--data", s(&data), "--out", s(&out)]).status.success());
    assert_eq!(predictions(&out), vec![4.5; 3]);
}

#[test]
fn predict_feature_mismatch_exits_3() {
    let dir = TempDir::new().unwrap();
    let model = hand_model(dir.path(), r#"{"op": "var", "index": 1}"#, &["a", "b"]);
    let data = dir.path().join("x.csv");
    fs::write(&data, "c\n1\n2\n").unwrap();
    let out = dir.path().join("p.csv");
    let o = symreg(&["predict", "--model", s(&model), "--data", s(&data), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn predict_matches_fitted_model_by_name() {
    let f = Fixture::new();
    assert!(f.fit("model.json", &[]).status.success());
    // columns reordered and the target kept: matching is by name
    let data = f.path("shuffled.csv");
    fs::write(&data, "y,b,a\n0,1,2\n0,-3,0.5\n").unwrap();
    let (m, out) = (f.path("model.json"), f.path("p.csv"));
    let o = symreg(&["predict", "--model", s(&m), "--data", s(&data), "--out", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(predictions(&out).len(), 2);
}

fn bench_fixture() -> (TempDir, PathBuf, PathBuf) {
    let dir = TempDir::new().unwrap();
    let configs = dir.path().join("configs");
    let data = dir.path().join("data");
    fs::create_dir_all(&configs).unwrap();
    fs::create_dir_all(&data).unwrap();
    fs::write(configs.join("quick.json"), QUICK_GP).unwrap();
    fs::write(
        configs.join("mvt.json"),
        r#"{"pop_size": 20, "generations": 4, "max_size": 24, "max_depth": 5, "lm_iterations": 5, "selector": "lex-mvt-dynamic"}"#,
    )
    .unwrap();
    write_dataset(&data.join("lin.csv"), 60);
    (dir, configs, data)
}

fn table(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn bench_is_a_sorted_resumable_cartesian_product() {
    let (dir, configs, data) = bench_fixture();
    let out = dir.path().join("results.csv");
    let args = ["bench", "--configs", s(&configs), "--data", s(&data), "--seeds", "3", "--out", s(&out)];
    let o = symreg(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = table(&out);
    assert_eq!(
        rows[0].join(","),
        "dataset,method,seed,train_r2,val_r2,test_r2,train_nmse,test_nmse,size,complexity,runtime_ms"
    );
    assert_eq!(rows.len(), 1 + 6);
    let keys: Vec<(String, String, String)> = rows[1..].iter().map(|r| (r[0].clone(), r[1].clone(), r[2].clone())).collect();
    let mut sorted = keys.clone();
    sorted.sort();
    assert_eq!(keys, sorted);
    assert_eq!(keys[0], ("lin".into(), "mvt".into(), "0".into()));

    // simulate an interrupted run: drop the last two rows, then resume
    let text = fs::read_to_string(&out).unwrap();
    let kept: Vec<&str> = text.lines().take(5).collect();
    fs::write(&out, kept.join("\n") + "\n").unwrap();
    let o = symreg(&args);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).contains("ran 2 runs, skipped 4"));
    let resumed = table(&out);
    assert_eq!(resumed.len(), 7);
    let strip = |t: &[Vec<String>]| t.iter().map(|r| r[..10].to_vec()).collect::<Vec<_>>();
    assert_eq!(strip(&resumed), strip(&rows), "resumed rows reproduce the originals except runtime");

    // nothing left to do
    let o = symreg(&args);
    assert!(String::from_utf8_lossy(&o.stdout).contains("ran 0 runs, skipped 6"));
    assert_eq!(table(&out).len(), 7);
}

#[test]
fn bench_test_r2_matches_fit() {
    let (dir, configs, data) = bench_fixture();
    let out = dir.path().join("results.csv");
    fs::remove_file(configs.join("mvt.json")).unwrap();
    assert!(symreg(&["bench", "--configs", s(&configs), "--data", s(&data), "--seeds", "2", "--out", s(&out)])
        .status
        .success());
    let rows = table(&out);
    let model = dir.path().join("m.json");
    let (c, d) = (configs.join("quick.json"), data.join("lin.csv"));
    let o = symreg(&["fit", "--config", s(&c), "--data", s(&d), "--seed", "1", "--out", s(&model)]);
    assert!(o.status.success());
    let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(&model).unwrap()).unwrap();
    let bench_r2: f64 = rows[2][5].parse().unwrap();
    assert_eq!(rows[2][2], "1");
    assert_eq!(m["metrics"]["test_r2"].as_f64().unwrap(), bench_r2);
}

#[test]
fn profile_writes_curves_and_prints_auc() {
    let dir = TempDir::new().unwrap();
    let results = dir.path().join("results.csv");
    fs::write(
        &results,
        "dataset,method,seed,train_r2,val_r2,test_r2,train_nmse,test_nmse,size,complexity,runtime_ms\n\
         d1,good,0,1,1,1,0,0,3,9,1\n\
         d2,good,0,1,1,1,0,0,3,9,1\n\
         d1,bad,0,0,0,-4,1,1,3,9,1\n\
         d2,bad,0,0,0,,1,1,3,9,1\n\
         d1,half,0,1,1,1,0,0,3,9,1\n\
         d2,half,0,1,1,0,0,0,3,9,1\n\
         d2,half,1,1,1,-1,0,0,3,9,1\n",
    )
    .unwrap();
    let out = dir.path().join("curves.csv");
    let o = symreg(&["profile", "--results", s(&results), "--agg", "max", "--out", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("good\tauc=1.000000"), "{stdout}");
    assert!(stdout.contains("bad\tauc=0.000000"), "{stdout}");
    assert!(stdout.contains("half\tauc=0.500000"), "{stdout}");
    let rows = table(&out);
    assert_eq!(rows[0].join(","), "method,n_datasets,auc,threshold,probability");
    assert_eq!(rows.len(), 1 + 3 * 1001);
    assert_eq!(symreg(&["profile", "--results", s(&results), "--agg", "mean", "--out", s(&out)]).status.code(), Some(2));
}

#[test]
fn profile_of_empty_results_fails() {
    let dir = TempDir::new().unwrap();
    let results = dir.path().join("results.csv");
    fs::write(
        &results,
        "dataset,method,seed,train_r2,val_r2,test_r2,train_nmse,test_nmse,size,complexity,runtime_ms\n",
    )
    .unwrap();
    let out = dir.path().join("curves.csv");
    let o = symreg(&["profile", "--results", s(&results), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(3));
}
