use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use lattice_clt_cli::schema::validate_dir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_lattice-clt"))
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn lattice-clt")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

const SMALL_CONFIG: &str = r#"{
  "field": {
    "variant": "MovingAverage",
    "kernel": [{ "offset": [0], "weight": 1.0 }, { "offset": [1], "weight": 1.0 }],
    "innovation": { "law": "Rademacher" }
  },
  "set": { "variant": "Periodic", "moduli": [2], "residues": [[0]] },
  "d": 1,
  "n_grid": [8, 20],
  "j_grid": [1.0, 2.0],
  "replications": 300,
  "seed": 5,
  "rates": "default"
}"#;

#[test]
fn correlogram_evens_writes_fifteen_rows() {
    let dir = tempfile::tempdir().unwrap();
    let set = configs().join("evens.json");
    let o = run(&[
        "correlogram",
        "--set",
        set.to_str().unwrap(),
        "--lags",
        "0..4",
        "--N",
        "10,100,1000",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("correlogram.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 16);
    assert_eq!(lines[0], "N,k_1,numerator,denominator,value");
    assert_eq!(lines[1], "10,0,11,21,0.5238095238095238");
    assert_eq!(lines[2], "10,1,0,21,0");
    assert!(dir.path().join("am_diagnostic.json").exists());
    let checked = validate_dir(dir.path()).unwrap();
    assert_eq!(checked.len(), 3);
}

#[test]
fn invalid_json_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let bad =
        write(dir.path(), "bad.json", &SMALL_CONFIG.replace("\"replications\": 300", "\"replications\": \"many\""));
    let o = run(&["verify-clt", "--config", bad.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("field `replications`"), "{}", stderr(&o));

    let o = run(&[
        "correlogram",
        "--set",
        write(dir.path(), "trunc.json", "{\"variant\": ").to_str().unwrap(),
        "--N",
        "10",
    ]);
    assert_eq!(code(&o), 2);

    let missing = write(dir.path(), "missing.json", r#"{"variant": "HalfSpace", "axis": 0}"#);
    let o = run(&["correlogram", "--set", missing.to_str().unwrap(), "--N", "10"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("threshold"), "{}", stderr(&o));

    let cfg = write(dir.path(), "cfg.json", &SMALL_CONFIG.replacen("\"d\": 1,", "\"d\": 1, \"bogus\": 3,", 1));
    let o = run(&["verify-clt", "--config", cfg.to_str().unwrap(), "--dry-run"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("bogus"), "{}", stderr(&o));
}

#[test]
fn cross_correlogram_mode() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (configs().join("evens.json"), configs().join("odds.json"));
    let o = run(&[
        "correlogram",
        "--set",
        a.to_str().unwrap(),
        "--cross",
        b.to_str().unwrap(),
        "--lags",
        "-1..1",
        "--N",
        "10",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("correlogram.csv")).unwrap();
    // card{evens ∩ (k + odds)} in [-10, 10]: 10 at k = ±1, none at 0
    assert_eq!(csv, "N,k_1,numerator,denominator,value\n10,-1,10,21,0.47619047619047616\n10,0,0,21,0\n10,1,10,21,0.47619047619047616\n");
    assert!(!dir.path().join("am_diagnostic.json").exists());
}

fn primary_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap() != "metadata.json")
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    v.sort();
    v
}

#[test]
fn verify_clt_is_byte_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "cfg.json", SMALL_CONFIG);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let o = run(&["verify-clt", "--config", cfg.to_str().unwrap(), "--out", a.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let o = bin()
        .env("LATTICE_CLT_THREADS", "1")
        .args(["verify-clt", "--config", cfg.to_str().unwrap(), "--out", b.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let (fa, fb) = (primary_files(&a), primary_files(&b));
    let names: Vec<&str> = fa.iter().map(|(n, _)| n.as_str()).collect();
    assert_eq!(names, ["hist_N20.csv", "hist_N8.csv", "qq_N20.csv", "qq_N8.csv", "report.json", "table.csv"]);
    assert_eq!(fa, fb);
    assert!(a.join("metadata.json").exists());
    assert_eq!(validate_dir(&a).unwrap().len(), 7);

    let o = run(&["report", "--input", a.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let table = std::fs::read_to_string(a.join("table.csv")).unwrap();
    assert!(String::from_utf8_lossy(&o.stdout).contains(&table));
}

#[test]
fn dry_run_computes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "cfg.json", SMALL_CONFIG);
    let out = dir.path().join("out");
    let o = run(&["--dry-run", "verify-clt", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let plan: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(plan["plans"][1]["rates"], serde_json::json!([7, 2]));
    assert!(!out.exists());
}

#[test]
fn budget_guard_and_force() {
    let dir = tempfile::tempdir().unwrap();
    let big = SMALL_CONFIG
        .replace("\"n_grid\": [8, 20]", "\"n_grid\": [1000000]")
        .replace("\"replications\": 300", "\"replications\": 1000");
    let cfg = write(dir.path(), "big.json", &big);
    let o = run(&["verify-clt", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    let o = run(&["--force", "--dry-run", "verify-clt", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
}

#[test]
fn blocks_worked_example() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "blocks",
        "--N",
        "10",
        "--p",
        "4",
        "--q",
        "2",
        "--replications",
        "500",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let plan: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("plan.json")).unwrap()).unwrap();
    assert_eq!(plan["k_n"], 3);
    let corners: Vec<i64> =
        plan["blocks"].as_array().unwrap().iter().map(|b| b["corner"][0].as_i64().unwrap()).collect();
    assert_eq!(corners, [-10, -4, 2]);
    assert_eq!(plan["complement_points"], 6);
    let rem = std::fs::read_to_string(dir.path().join("remainder.csv")).unwrap();
    assert!(rem.lines().nth(1).unwrap().starts_with("10,4,2,3,6,"), "{rem}");
    let dep = std::fs::read_to_string(dir.path().join("dependence.csv")).unwrap();
    assert_eq!(dep.lines().count(), 1 + 2 * 21);
    assert_eq!(validate_dir(dir.path()).unwrap().len(), 4);
}

#[test]
fn blocks_default_rates_and_errors() {
    let o = run(&["--dry-run", "blocks", "--N", "1000"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let plan: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!((plan["p"].as_u64(), plan["q"].as_u64()), (Some(100), Some(10)));

    let o = run(&["blocks", "--N", "10", "--p", "20", "--q", "2"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("exceeds"));
}

#[test]
fn simulate_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let field = configs().join("ma_rademacher.json");
    let (c, b) = (dir.path().join("csv"), dir.path().join("bin"));
    let o =
        run(&["simulate", "--field", field.to_str().unwrap(), "--N", "4", "--seed", "9", "--out", c.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let o = run(&[
        "simulate",
        "--field",
        field.to_str().unwrap(),
        "--N",
        "4",
        "--seed",
        "9",
        "--format",
        "binary",
        "--out",
        b.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(validate_dir(&c).unwrap().len(), 2);
    assert_eq!(validate_dir(&b).unwrap().len(), 3);
    let csv = std::fs::read_to_string(c.join("field.csv")).unwrap();
    let bytes = std::fs::read(b.join("field.bin")).unwrap();
    for (line, chunk) in csv.lines().skip(1).zip(bytes.chunks_exact(8)) {
        let v: f64 = line.rsplit(',').next().unwrap().parse().unwrap();
        assert_eq!(v, f64::from_le_bytes(chunk.try_into().unwrap()));
        assert!([-2.0, 0.0, 2.0].contains(&v));
    }

    let o = run(&["simulate", "--field", field.to_str().unwrap(), "--N", "4", "--d", "2"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn report_rejects_tampered_or_missing_files() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["report", "--input", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    write(
        dir.path(),
        "table.csv",
        "N,cardAN,empVar,lemma1Var,sigma2,ksStat,lyapunov,remainderFrac\n10,11,1.0000,,1,,,\n",
    );
    let o = run(&["report", "--input", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("empVar"), "{}", stderr(&o));
}
