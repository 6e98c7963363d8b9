use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::Instant;

use slabnop::FluxField;
use slabnop_bench::case::CaseReport;
use slabnop_bench::output::{read_flux_csv, write_flux_csv};

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn slabnop(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_slabnop"))
        .arg("--out-dir")
        .arg(out)
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SMALL_CASE: &str = r#"{
  "id": "small",
  "kind": "eigen_1g",
  "algorithm": "model_based",
  "problem": {
    "grid": {"length_cm": 10.0, "n_cells": 40},
    "quadrature": {"order": 8},
    "materials": {"sigma_t": [1.0], "sigma_s0": [[0.5]], "nu_sigma_f": [NSF]},
    "solver": {"tolerance": 1e-6, "max_inner_iterations": MAXIN}
  }
}"#;

fn small_case(nsf: &str, max_inner: usize) -> String {
    SMALL_CASE
        .replace("NSF", nsf)
        .replace("MAXIN", &max_inner.to_string())
}

#[test]
fn flux_csv_reparses_bit_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let grid = slabnop::Grid1D::new(3.0, 7).unwrap();
    let flux = FluxField {
        phi: vec![
            vec![0.1, 1.0 / 3.0, 2.0f64.sqrt(), 1e-300, 5e300, -0.0, f64::EPSILON],
            vec![std::f64::consts::PI, 1e-17, 123456789.123456789, 0.7, 1.0 - f64::EPSILON, 2.5e-8, 9.87654321e10],
        ],
        current: None,
    };
    let path = dir.path().join("flux.csv");
    write_flux_csv(&path, &grid, &flux).unwrap();
    let (x, phi) = read_flux_csv(&path).unwrap();
    assert_eq!(x, grid.centers());
    for (a, b) in phi.iter().flatten().zip(flux.phi.iter().flatten()) {
        assert_eq!(a.to_bits(), b.to_bits(), "{a} vs {b}");
    }
}

#[test]
fn three_group_solve_writes_report_and_flux() {
    let out = tempfile::tempdir().unwrap();
    let case = configs().join("eigen3g.json");
    let text = fs::read_to_string(&case).unwrap().replace("\"sp\"", "\"model_based\"");
    let spec = write(out.path(), "eigen3g_mb.json", &text);
    let o = slabnop(out.path(), &["solve", spec.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let report: CaseReport =
        serde_json::from_str(&fs::read_to_string(out.path().join("eigen3g/report.json")).unwrap()).unwrap();
    let k = report.k.unwrap();
    assert!((k - 1.30621).abs() < 5e-3, "k {k}");
    let (x, phi) = read_flux_csv(&out.path().join("eigen3g/flux.csv")).unwrap();
    assert_eq!(x.len(), 100);
    assert_eq!(phi.len(), 3);
    assert!(out.path().join("eigen3g/report.txt").exists());
}

#[test]
fn zero_fission_is_a_numerical_error() {
    let out = tempfile::tempdir().unwrap();
    let spec = write(out.path(), "c.json", &small_case("0.0", 10_000));
    let o = slabnop(out.path(), &["solve", spec.to_str().unwrap()]);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("degenerate"), "{}", stderr(&o));
}

#[test]
fn non_convergence_exits_two_with_partial_results() {
    let out = tempfile::tempdir().unwrap();
    let text = small_case("0.9", 10_000).replace("\"max_inner_iterations\": 10000", "\"max_outer_iterations\": 2");
    let spec = write(out.path(), "c.json", &text);
    let o = slabnop(out.path(), &["solve", spec.to_str().unwrap()]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    let report: CaseReport =
        serde_json::from_str(&fs::read_to_string(out.path().join("small/report.json")).unwrap()).unwrap();
    assert!(!report.converged);
    assert!(out.path().join("small/flux.csv").exists());
}

#[test]
fn usage_and_config_errors_exit_one() {
    let out = tempfile::tempdir().unwrap();
    assert_eq!(code(&slabnop(out.path(), &["no-such-command"])), 1);
    let bad = write(out.path(), "bad.json", "{\"id\": \"x\",\n \"kind\": \"fixed_source\", \"bogus\": 1}");
    let o = slabnop(out.path(), &["solve", bad.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("line"), "{}", stderr(&o));
    let missing = slabnop(out.path(), &["solve", "/nonexistent/case.json"]);
    assert_eq!(code(&missing), 1);
}

#[test]
fn empty_suite_gives_empty_table() {
    let out = tempfile::tempdir().unwrap();
    let suite = write(out.path(), "empty.json", r#"{"cases": []}"#);
    let o = slabnop(out.path(), &["benchmark", suite.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let table = fs::read_to_string(out.path().join("empty.csv")).unwrap();
    assert_eq!(table.lines().count(), 1);
}

#[test]
fn failing_case_is_marked_and_suite_continues() {
    let out = tempfile::tempdir().unwrap();
    write(out.path(), "good.json", &small_case("0.9", 10_000));
    write(out.path(), "degenerate.json", &small_case("0.0", 10_000).replace("\"small\"", "\"degenerate\""));
    let suite = write(
        out.path(),
        "suite.json",
        r#"{"cases": [
            {"case": "good.json", "runs": [{"algorithm": "sp", "operator": {"exact": {}}}]},
            {"case": "missing.json"},
            {"case": "degenerate.json"},
            {"case": "good.json", "runs": [{"algorithm": "hybrid_pre", "operator": {"exact": {}}}]}
        ]}"#,
    );
    let o = slabnop(out.path(), &["benchmark", suite.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    let mut r = csv::Reader::from_path(out.path().join("suite.csv")).unwrap();
    let rows: Vec<csv::StringRecord> = r.records().map(|r| r.unwrap()).collect();
    let status: Vec<&str> = rows.iter().map(|r| &r[2]).collect();
    assert_eq!(rows.len(), 6, "{status:?}");
    assert_eq!(status[0], "ok");
    assert_eq!(status[1], "ok");
    assert!(status[2].starts_with("failed"));
    assert!(status[3].starts_with("failed: degenerate"));
    assert_eq!(status[4], "ok");
    assert!(status[5].starts_with("failed"), "hybrid_pre on an eigen case");
    let k_base: f64 = rows[0][9].parse().unwrap();
    let k_sp: f64 = rows[1][9].parse().unwrap();
    assert!((k_base - k_sp).abs() < 1e-5);
}

#[test]
fn parallel_suite_matches_sequential() {
    let out = tempfile::tempdir().unwrap();
    write(out.path(), "a.json", &small_case("0.9", 10_000));
    write(out.path(), "b.json", &small_case("0.7", 10_000).replace("\"small\"", "\"b\""));
    let body = r#"{"parallel": PAR, "cases": [
        {"case": "a.json", "runs": [{"algorithm": "cp", "operator": {"exact": {}}}]},
        {"case": "b.json", "runs": [{"algorithm": "sp", "operator": {"exact": {}}}]}
    ]}"#;
    let seq = write(out.path(), "seq.json", &body.replace("PAR", "false"));
    let par = write(out.path(), "par.json", &body.replace("PAR", "true"));
    assert_eq!(code(&slabnop(out.path(), &["benchmark", seq.to_str().unwrap()])), 0);
    assert_eq!(code(&slabnop(out.path(), &["benchmark", par.to_str().unwrap()])), 0);
    let strip = |name: &str| -> Vec<Vec<String>> {
        let mut r = csv::Reader::from_path(out.path().join(name)).unwrap();
        r.records()
            .map(|rec| {
                let rec = rec.unwrap();
                rec.iter()
                    .enumerate()
                    .filter(|(i, _)| *i != 6 && *i != 7)
                    .map(|(_, v)| v.to_string())
                    .collect()
            })
            .collect()
    };
    assert_eq!(strip("seq.csv"), strip("par.csv"));
}

const SMOKE_DATA: &str = r#"{"output": "data/smoke.snopd", "n_samples": N, "grid": {"length_cm": 10.0, "n_cells": 32}, "quadrature_order": 8}"#;

#[test]
fn smoke_dataset_is_fast_and_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = configs().join("data_smoke.json");
    let t = Instant::now();
    let o = slabnop(a.path(), &["generate-data", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(t.elapsed().as_secs_f64() < 5.0);
    assert!(String::from_utf8_lossy(&o.stdout).contains("negative source points"));
    let o = Command::new(env!("CARGO_BIN_EXE_slabnop"))
        .args(["generate-data", cfg.to_str().unwrap()])
        .env("SLABNOP_OUTPUT_DIR", b.path())
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    let fa = fs::read(a.path().join("data/smoke.snopd")).unwrap();
    let fb = fs::read(b.path().join("data/smoke.snopd")).unwrap();
    assert_eq!(fa, fb);
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(a.path().join("data/smoke.snopd.json")).unwrap()).unwrap();
    assert_eq!(manifest["n_samples"], 2);
    assert_eq!(manifest["reference"]["sigma_t"], 1.0);
    assert_eq!(manifest["reference"]["sigma_s0"], 0.5);
}

fn loss_column(path: &Path) -> Vec<(u64, f64)> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records()
        .map(|rec| {
            let rec = rec.unwrap();
            (rec[0].parse().unwrap(), rec[1].parse().unwrap())
        })
        .collect()
}

#[test]
fn training_smoke_resume_and_inspect() {
    let out = tempfile::tempdir().unwrap();
    let data = write(out.path(), "data.json", &SMOKE_DATA.replace("N", "20"));
    assert_eq!(code(&slabnop(out.path(), &["generate-data", data.to_str().unwrap()])), 0);
    let job = |epochs: usize, output: &str| {
        format!(
            r#"{{"dataset": "data/smoke.snopd", "output": "{output}",
                "model": {{"architecture": "fno", "width": 8, "modes": 6, "layers": 2, "head_hidden": 16}},
                "init_seed": 3,
                "train": {{"epochs": {epochs}, "batch_size": 5, "learning_rate": 1e-3, "seed": 11}}}}"#
        )
    };
    let ten = write(out.path(), "ten.json", &job(10, "models/split.snopm"));
    let o = slabnop(out.path(), &["train", ten.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let loss = loss_column(&out.path().join("models/split.snopm.loss.csv"));
    assert_eq!(loss.len(), 10);
    assert!(loss[9].1 < loss[0].1, "{loss:?}");

    let five = write(out.path(), "five.json", &job(5, "models/split.snopm"));
    let o = slabnop(out.path(), &["train", five.to_str().unwrap(), "--resume"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let loss = loss_column(&out.path().join("models/split.snopm.loss.csv"));
    assert_eq!(loss.len(), 15);
    assert_eq!(loss.iter().map(|r| r.0).collect::<Vec<_>>(), (1..=15).collect::<Vec<_>>());
    assert!(loss[10].1 < 10.0 * loss[9].1 && loss[9].1 < 10.0 * loss[10].1);

    // Ten plus five resumed epochs replay fifteen uninterrupted ones.
    let fifteen = write(out.path(), "fifteen.json", &job(15, "models/whole.snopm"));
    assert_eq!(code(&slabnop(out.path(), &["train", fifteen.to_str().unwrap()])), 0);
    let whole = loss_column(&out.path().join("models/whole.snopm.loss.csv"));
    assert_eq!(whole, loss);
    let params = |name: &str| {
        let m = slabnop::neural::load_model(&out.path().join(name)).unwrap().model;
        m.network().params().to_vec()
    };
    assert_eq!(params("models/split.snopm"), params("models/whole.snopm"));

    let o = slabnop(out.path(), &["inspect-model", out.path().join("models/whole.snopm").to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("architecture: fno"));
    assert!(text.contains("grid: 10 cm, 32 cells"));

    let mut bytes = fs::read(out.path().join("models/whole.snopm")).unwrap();
    let mid = bytes.len() / 2;
    bytes[mid] ^= 1;
    let tampered = write(out.path(), "tampered.snopm", "");
    fs::write(&tampered, bytes).unwrap();
    assert_eq!(code(&slabnop(out.path(), &["inspect-model", tampered.to_str().unwrap()])), 1);
}

#[test]
fn operator_grid_must_match_case() {
    let out = tempfile::tempdir().unwrap();
    let data = write(out.path(), "data.json", &SMOKE_DATA.replace("N", "5"));
    assert_eq!(code(&slabnop(out.path(), &["generate-data", data.to_str().unwrap()])), 0);
    let job = write(
        out.path(),
        "job.json",
        r#"{"dataset": "data/smoke.snopd", "output": "m.snopm",
            "model": {"architecture": "deeponet", "branch_hidden": [8], "trunk_hidden": [8], "latent": 4},
            "train": {"epochs": 1, "batch_size": 5}}"#,
    );
    assert_eq!(code(&slabnop(out.path(), &["train", job.to_str().unwrap()])), 0);
    let case = fs::read_to_string(configs().join("fixed_case1.json"))
        .unwrap()
        .replace("models/fno.snopm", "m.snopm");
    let spec = write(out.path(), "case.json", &case);
    let o = slabnop(out.path(), &["solve", spec.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("grid"), "{}", stderr(&o));
    let ok = case.replace("\"n_cells\": 100", "\"n_cells\": 32").replace("\"order\": 32", "\"order\": 8");
    let spec = write(out.path(), "case32.json", &ok);
    let o = slabnop(out.path(), &["solve", spec.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
}

#[test]
fn shipped_templates_parse() {
    for entry in fs::read_dir(configs()).unwrap() {
        let path = entry.unwrap().path();
        let name = path.file_name().unwrap().to_string_lossy().into_owned();
        let text = fs::read_to_string(&path).unwrap();
        if name.starts_with("data_") {
            serde_json::from_str::<slabnop_bench::jobs::DataConfig>(&text).unwrap();
        } else if name.starts_with("train_") {
            serde_json::from_str::<slabnop_bench::jobs::TrainJob>(&text).unwrap();
        } else if name.starts_with("suite_") {
            let s: slabnop_bench::suite::SuiteSpec = serde_json::from_str(&text).unwrap();
            for e in s.cases {
                assert!(configs().join(&e.case).exists(), "{name}: {}", e.case.display());
            }
        } else {
            let c: slabnop_bench::case::CaseSpec = serde_json::from_str(&text).unwrap();
            c.resolve().unwrap_or_else(|e| panic!("{name}: {e}"));
        }
    }
}
