use std::path::Path;
use std::process::{Command, Output};

use num_complex::Complex64;
use qcdist::beltrami::solve_principal;
use qcdist::distortion::{disk_coefficient, ExperimentReport, MuPhase};
use qcdist::dyadic::dilate;
use qcdist::packing::{squares_pairwise_disjoint, CompactMask, PackingFamily};
use qcdist::{GridField, GridSpec};
use serde_json::Value;

fn qcdist(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qcdist"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn summary(out: &Output) -> Value {
    let stdout = String::from_utf8_lossy(&out.stdout);
    let line = stdout.lines().last().expect("a summary line");
    serde_json::from_str(line).expect("summary is JSON")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn two_corner_mask(dir: &Path) -> std::path::PathBuf {
    let mask = CompactMask::from_cells(3, [[2, 2], [5, 5]]).unwrap();
    let path = dir.join("mask.json");
    std::fs::write(&path, mask.to_json().unwrap()).unwrap();
    path
}

#[test]
fn pack_happy_path() {
    let tmp = tempfile::tempdir().unwrap();
    let mask = two_corner_mask(tmp.path());
    let out = tmp.path().join("run");
    let o = qcdist(&["pack", "--t", "1.0", "--m", "2", "--mask", p(&mask), "--out", p(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s = summary(&o);
    assert_eq!(s["status"], "ok");
    assert_eq!(s["result"]["properties_hold"], true);

    let text = std::fs::read_to_string(out.join("family.json")).unwrap();
    let file: Value = serde_json::from_str(&text).unwrap();
    for key in ["dilates_disjoint", "covered_by_dilates", "norm_at_most_one", "mass_bounded"] {
        assert_eq!(file["checks"][key], true, "{key}");
    }
    let fam = PackingFamily::from_json(&text).unwrap();
    assert_eq!(fam.len(), 2);
    let dilates: Vec<_> = fam.cubes().iter().map(|c| dilate(*c, 4.0)).collect();
    assert!(squares_pairwise_disjoint(&dilates));

    let manifest: Value = serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    let listed: Vec<&str> = manifest["outputs"].as_array().unwrap().iter().map(|e| e["path"].as_str().unwrap()).collect();
    assert_eq!(listed, ["family.json", "mask.json"]);
    let back = CompactMask::from_json(&std::fs::read_to_string(out.join("mask.json")).unwrap()).unwrap();
    assert_eq!(back.cells().collect::<Vec<_>>(), vec![[2, 2], [5, 5]]);
}

#[test]
fn pack_reads_png_masks() {
    let tmp = tempfile::tempdir().unwrap();
    let mask = CompactMask::from_cells(4, [[3, 4], [12, 11], [12, 12]]).unwrap();
    let png = tmp.path().join("mask.png");
    mask.write_png(&png).unwrap();
    let out = tmp.path().join("run");
    let o = qcdist(&["pack", "--t", "0.7", "--mask", p(&png), "--out", p(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let back = CompactMask::from_json(&std::fs::read_to_string(out.join("mask.json")).unwrap()).unwrap();
    assert_eq!(back.cells().collect::<Vec<_>>(), mask.cells().collect::<Vec<_>>());
}

#[test]
fn solve_rejects_kappa_one() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = GridSpec::origin_centered(32).unwrap();
    let mu = GridField::from_fn(spec, |z| {
        if z.norm() < 0.1 {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
    .unwrap();
    let mu_path = tmp.path().join("mu.json");
    mu.write(&mu_path).unwrap();
    let out = tmp.path().join("run");
    let o = qcdist(&["solve", "--mu", p(&mu_path), "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("kappa must be < 1"));
    assert_eq!(summary(&o)["code"], 1);
}

#[test]
fn solve_writes_readable_fields() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let o = qcdist(&["solve", "--K", "1.5", "--n", "64", "--out", p(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let f = GridField::read(out.join("f.json")).unwrap();
    let fzbar = GridField::read(out.join("fzbar.json")).unwrap();
    assert_eq!(f.n(), 64);
    let mu = disk_coefficient(GridSpec::origin_centered(64).unwrap(), 0.2, 0.25, MuPhase::Radial, 1).unwrap();
    let sol = solve_principal(&mu, 400, 1e-10).unwrap();
    assert_eq!(f.data(), sol.f.data());
    assert_eq!(fzbar.data(), sol.fzbar.data());
    assert!(summary(&o)["result"]["identity_defect"].as_f64().unwrap() < 1e-10);
}

#[test]
fn numerical_failure_exits_two_with_diagnostics() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let o = qcdist(&["solve", "--K", "4", "--n", "64", "--max-terms", "3", "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(2));
    let diag: Value = serde_json::from_str(&std::fs::read_to_string(out.join("diagnostics.json")).unwrap()).unwrap();
    assert_eq!(diag["diagnostics"]["iterations"], 3);
}

#[test]
fn validation_failures_exit_one() {
    let tmp = tempfile::tempdir().unwrap();
    let mask = two_corner_mask(tmp.path());
    let out = tmp.path().join("run");
    let bad_t = qcdist(&["pack", "--t", "3", "--mask", p(&mask), "--out", p(&out)]);
    assert_eq!(bad_t.status.code(), Some(1));
    let no_out = qcdist(&["pack", "--t", "1", "--mask", p(&mask)]);
    assert_eq!(no_out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&no_out.stderr).contains("--out"));
    let bad_threads = qcdist(&["--threads", "0", "selftest"]);
    assert_eq!(bad_threads.status.code(), Some(1));
}

#[test]
fn transform_matches_library() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let o = qcdist(&["transform", "--op", "beurling", "--disk-radius", "0.25", "--n", "64", "--out", p(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let got = GridField::read(out.join("output.json")).unwrap();
    let spec = GridSpec::origin_centered(64).unwrap();
    let disk = GridField::from_fn(spec, |z| Complex64::new(if z.norm() < 0.25 { 1.0 } else { 0.0 }, 0.0)).unwrap();
    let want = qcdist::beurling::beurling_apply(&disk);
    assert_eq!(got.data(), want.data());
}

fn conformal_run(dir: &Path, threads: &str) -> Output {
    qcdist(&[
        "--threads",
        threads,
        "experiment",
        "conformal-outside",
        "--K",
        "1.2",
        "--t",
        "1.0",
        "--n",
        "256",
        "--out",
        p(dir),
    ])
}

#[test]
fn experiment_reports_are_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let oa = conformal_run(&a, "1");
    assert!(oa.status.success(), "{}", String::from_utf8_lossy(&oa.stderr));
    let ob = conformal_run(&b, "3");
    assert!(ob.status.success());
    for name in ["report.json", "report.csv", "mask.json", "manifest.json"] {
        let (x, y) = (std::fs::read(a.join(name)).unwrap(), std::fs::read(b.join(name)).unwrap());
        assert!(x == y, "{name} differs between runs");
    }
    let rep = ExperimentReport::from_json(&std::fs::read_to_string(a.join("report.json")).unwrap()).unwrap();
    assert_eq!(rep.experiment, "conformal-outside");
    assert!(rep.measured["diam_ratio"].is_finite());
    assert!(rep.runtime_ms.is_none());
    assert_eq!(summary(&oa)["result"]["passed"], rep.passed());
}

#[test]
fn config_file_supplies_defaults() {
    let tmp = tempfile::tempdir().unwrap();
    let mask = two_corner_mask(tmp.path());
    let out = tmp.path().join("run");
    let cfg = tmp.path().join("run.conf");
    std::fs::write(
        &cfg,
        format!("# pack settings\nt = 1.5\nm = 1\nmask = {}\nout = {}\n", p(&mask), p(&out)),
    )
    .unwrap();
    let o = qcdist(&["--config", p(&cfg), "pack", "--t", "0.5"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let manifest: Value = serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["t"], 0.5);
    assert_eq!(manifest["config"]["m"], 1);

    let json_cfg = tmp.path().join("run.json");
    std::fs::write(&json_cfg, format!(r#"{{"t": 1.0, "mask": "{}", "out": "{}"}}"#, p(&mask), p(&out))).unwrap();
    let o = qcdist(&["--config", p(&json_cfg), "pack"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn timing_is_opt_in() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let o = qcdist(&["--timing", "transform", "--op", "dz", "--disk-radius", "0.3", "--n", "32", "--out", p(&out)]);
    assert!(o.status.success());
    assert!(summary(&o)["result"]["runtime_ms"].is_u64());
}

#[test]
fn selftest_passes() {
    let o = qcdist(&["selftest"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(summary(&o)["result"]["failed"], serde_json::json!([]));
}
