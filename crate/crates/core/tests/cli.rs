use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

fn tabtext(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tabtext")).args(args).output().expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// A 150-row binary dataset with numeric, categorical and text columns.
fn dataset(dir: &Path) -> PathBuf {
    let mut csv = String::from("x1,x2,note,label\n");
    for i in 0..150 {
        let yes = i % 3 != 0;
        csv.push_str(&format!(
            "{},{},\"{} item {} from lot {}\",{}\n",
            (i * 37 % 101) as f64 / 10.0,
            ["red", "green", "blue", "grey"][i % 4],
            if yes { "great" } else { "broken" },
            i,
            i * 13 % 29,
            if yes { "yes" } else { "no" }
        ));
    }
    fs::write(dir.join("toy.csv"), csv).unwrap();
    let manifest = dir.join("toy.toml");
    fs::write(&manifest, "name = \"toy\"\ncsv_path = \"toy.csv\"\ntarget_column = \"label\"\ntask = \"binary\"\n").unwrap();
    manifest
}

fn grid(dir: &Path, extra: &str) -> PathBuf {
    dataset(dir);
    let cfg = dir.join("grid.toml");
    fs::write(
        &cfg,
        format!(
            "manifests = [\"toy.toml\"]\nembedders = [{{ kind = \"tf_idf\" }}, {{ kind = \"hashed_ngram\" }}]\nmodels = [{{ kind = \"gbdt\", n_rounds = 20 }}]\nk_folds = 3\n{extra}"
        ),
    )
    .unwrap();
    cfg
}

#[test]
fn ingest_prints_report_and_caches_snapshot() {
    let dir = tempfile::tempdir().unwrap();
    let m = dataset(dir.path());
    let out = dir.path().join("cache");
    let o = tabtext(&["ingest", s(&m), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("roles: # Cat 1 / # Num 1 / # Text 1"), "{text}");
    let snapshot = fs::read_to_string(out.join("toy.csv")).unwrap();
    assert_eq!(snapshot.lines().count(), 151);
    let roles: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("toy.roles.json")).unwrap()).unwrap();
    assert_eq!(roles["roles"]["note"], "textual");
    assert_eq!(roles["task"], "binary");
}

#[test]
fn ingest_missing_file_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("gone.toml");
    fs::write(&m, "name = \"gone\"\ncsv_path = \"gone.csv\"\ntarget_column = \"y\"\ntask = \"regression\"\n").unwrap();
    assert_eq!(tabtext(&["ingest", s(&m)]).status.code(), Some(2));
    assert_eq!(tabtext(&["ingest", s(&dir.path().join("no-manifest.toml"))]).status.code(), Some(2));
}

#[test]
fn eval_grid_writes_paired_rows_and_reruns_identically() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = grid(dir.path(), "seed = 4\n");
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let o = tabtext(&["eval", s(&cfg), "--out", s(&a)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(tabtext(&["eval", s(&cfg), "--out", s(&b), "--jobs", "3"]).status.code(), Some(0));
    let csv = fs::read_to_string(a.join("results.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5, "{csv}");
    assert_eq!(csv, fs::read_to_string(b.join("results.csv")).unwrap());
    assert!(a.join("results.txt").is_file() && a.join("manifest-lock").is_file());
    let lock: serde_json::Value = serde_json::from_str(&fs::read_to_string(a.join("manifest-lock")).unwrap()).unwrap();
    assert_eq!(lock["cells"].as_array().unwrap().len(), 4);
}

#[test]
fn global_seed_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = grid(dir.path(), "seed = 4\n");
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    tabtext(&["eval", s(&cfg), "--out", s(&a)]);
    tabtext(&["eval", s(&cfg), "--out", s(&b), "--seed", "9"]);
    let lock = |d: &Path| -> serde_json::Value { serde_json::from_str(&fs::read_to_string(d.join("manifest-lock")).unwrap()).unwrap() };
    assert_eq!(lock(&a)["cells"][0]["seed"], 4);
    assert_eq!(lock(&b)["cells"][0]["seed"], 9);
}

#[test]
fn inapplicable_selector_is_rejected_before_any_compute() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = grid(dir.path(), "selectors = [\"correlation\"]\n");
    let out = dir.path().join("out");
    let o = tabtext(&["eval", s(&cfg), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("before any run"));
    assert!(!out.exists());
}

#[test]
fn skip_inapplicable_reports_dashes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = grid(dir.path(), "selectors = [\"correlation\", \"anova\"]\nwith_text = [true]\nskip_inapplicable = true\n");
    let out = dir.path().join("out");
    assert_eq!(tabtext(&["eval", s(&cfg), "--out", s(&out)]).status.code(), Some(0));
    let csv = fs::read_to_string(out.join("results.csv")).unwrap();
    assert_eq!(csv.matches(",inapplicable,").count(), 2, "{csv}");
}

#[test]
fn failing_cell_keeps_partial_results_and_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = grid(dir.path(), "");
    let text = fs::read_to_string(&cfg).unwrap().replace(
        "models = [{ kind = \"gbdt\", n_rounds = 20 }]",
        "models = [{ kind = \"gbdt\", n_rounds = 20 }, { kind = \"external\", command = [\"false\"] }]",
    );
    fs::write(&cfg, text).unwrap();
    let out = dir.path().join("out");
    let o = tabtext(&["eval", s(&cfg), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(3));
    let csv = fs::read_to_string(out.join("results.csv")).unwrap();
    assert_eq!(csv.matches(",ok,").count(), 4);
    assert_eq!(csv.matches(",failed,").count(), 4);
    assert!(fs::read_to_string(out.join("results.txt")).unwrap().contains("failures"));
}

#[test]
fn report_rerenders_results_text() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = grid(dir.path(), "");
    let out = dir.path().join("out");
    tabtext(&["eval", s(&cfg), "--out", s(&out)]);
    let o = tabtext(&["report", s(&out)]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(String::from_utf8(o.stdout).unwrap(), fs::read_to_string(out.join("results.txt")).unwrap());
}

#[test]
fn default_break_run_prints_grid() {
    let dir = tempfile::tempdir().unwrap();
    let o = tabtext(&["break", "--out", s(dir.path())]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    let header = text.lines().next().unwrap();
    for col in ["scenario", "dataset", "tfidf", "wordvec", "hashed"] {
        assert!(header.contains(col), "{header}");
    }
    for row in ["no-text", "complete-leak", "synonym-ood", "noise-dilution:3", "ambiguity-dilution:3", "Average"] {
        assert!(text.contains(row), "{row} missing");
    }
    assert!(dir.path().join("break.csv").is_file());
}

#[test]
fn break_rejects_regression_tables_with_exit_4() {
    let dir = tempfile::tempdir().unwrap();
    let ing = fixtures().join("ingest/beers.toml");
    let cfg = dir.path().join("b.toml");
    fs::write(&cfg, format!("[break]\nsynthetic_tables = 0\nmanifests = [{:?}]\n", s(&ing))).unwrap();
    assert_eq!(tabtext(&["break", s(&cfg)]).status.code(), Some(4));
}

#[test]
fn vet_single_manifest_runs_rule_checks_only() {
    let dir = tempfile::tempdir().unwrap();
    let m = fixtures().join("vet/bikedekho.toml");
    let o = tabtext(&["vet", s(&m), "--mock", "--out", s(dir.path())]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("HasFreeText: PASS"));
    assert!(text.contains("DualSignalProxy:") && text.contains("(heuristic, advisory)"));
    assert!(text.contains("Accessible: MANUAL") && text.contains("DomainDiversity: MANUAL"));
    assert!(!dir.path().join("coverage.csv").exists());
}

#[test]
fn vet_missing_fixture_exits_5() {
    let dir = tempfile::tempdir().unwrap();
    let vet = fixtures().join("vet");
    let o = tabtext(&[
        "vet",
        s(&vet.join("cars_24.toml")),
        s(&vet.join("bikedekho.toml")),
        "--pair",
        "cars_24",
        "bikedekho",
        "--no-signal",
        "--fixtures",
        s(&vet.join("llm")),
        "--out",
        s(dir.path()),
    ]);
    assert_eq!(o.status.code(), Some(5));
    assert!(String::from_utf8_lossy(&o.stderr).contains("match_cars_24__bikedekho"));
}

#[test]
fn vet_fitness_replay() {
    let dir = tempfile::tempdir().unwrap();
    let vet = fixtures().join("vet");
    let o = tabtext(&["vet", s(&vet.join("cars_24.toml")), "--fitness", "--no-signal", "--fixtures", s(&vet.join("llm")), "--out", s(dir.path())]);
    assert_eq!(o.status.code(), Some(0));
    let checks: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("checks.json")).unwrap()).unwrap();
    assert_eq!(checks["cars_24"]["fitness"]["color"], "Yellow");
}

#[test]
fn live_without_key_fails_with_exit_5() {
    let dir = tempfile::tempdir().unwrap();
    let vet = fixtures().join("vet");
    let o = Command::new(env!("CARGO_BIN_EXE_tabtext"))
        .args(["vet", s(&vet.join("cars_24.toml")), "--fitness", "--live", "--no-signal", "--api-key-env", "TABTEXT_TEST_NO_SUCH_KEY"])
        .arg("--out")
        .arg(dir.path())
        .env_remove("TABTEXT_TEST_NO_SUCH_KEY")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(5));
}

#[test]
fn usage_errors_do_not_collide_with_command_codes() {
    assert_eq!(tabtext(&["frobnicate"]).status.code(), Some(64));
    assert_eq!(tabtext(&["vet", "a.toml", "--mock", "--live"]).status.code(), Some(64));
    assert_eq!(tabtext(&["--help"]).status.code(), Some(0));
}
