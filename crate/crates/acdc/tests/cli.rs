mod support;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

struct Fixture {
    _dir: tempfile::TempDir,
    root: PathBuf,
    bundle: PathBuf,
    db: PathBuf,
}

fn fixture() -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().to_path_buf();
    let (bundle, db) = support::write_fixture(&root);
    Fixture {
        _dir: dir,
        root,
        bundle,
        db,
    }
}

fn acdc(args: &[&dyn AsRef<std::ffi::OsStr>]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_acdc"))
        .args(args.iter().map(|a| a.as_ref()))
        .env_remove("ACDC_ASSET_DB")
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn json(p: &Path) -> Value {
    serde_json::from_slice(&fs::read(p).unwrap()).unwrap()
}

fn run_match(f: &Fixture) -> PathBuf {
    let out = f.root.join("matches.json");
    let o = acdc(&[&"--assets", &f.db, &"match", &"--bundle", &f.bundle, &"-o", &out]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    out
}

#[test]
fn match_recovers_twins_at_distance_zero() {
    let f = fixture();
    let out = run_match(&f);
    let m = json(&out);
    let matches = m["matches"].as_array().unwrap();
    assert_eq!(matches.len(), 6);
    for (obj, gt) in matches.iter().zip(support::gt_objects()) {
        let top = &obj["cousins"][0];
        assert_eq!(top["asset_id"], support::twin_id(&gt).as_str());
        assert_eq!(top["distance"].as_f64().unwrap(), 0.0);
        assert_eq!(top["snapshot_index"], support::snapshot_index(gt.yaw_deg));
    }
    let run = json(&acdc::cli::sibling(&out, ".run.json"));
    assert_eq!(run["command"], "match");
    assert_eq!(run["seed"], 0);
    assert_eq!(run["inputs"]["bundle"], m["bundle_hash"]);
    assert!(run["outputs"]["matches"].is_string());
    assert!(run["wall_clock"]["elapsed_ms"].is_u64());
}

#[test]
fn generate_with_a_rank_beyond_the_cousin_list_is_a_pipeline_error() {
    let f = fixture();
    let matches = f.root.join("matches.json");
    let o = acdc(&[&"--assets", &f.db, &"match", &"--bundle", &f.bundle, &"--k-cous", &"8", &"-o", &matches]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let scene = f.root.join("scene.json");
    let o = acdc(&[
        &"--assets", &f.db, &"generate", &"--bundle", &f.bundle, &"--matches", &matches, &"--cousin-rank", &"9",
        &"-o", &scene,
    ]);
    assert_eq!(code(&o), acdc::cli::EXIT_PIPELINE);
    let e = stderr(&o);
    assert!(e.contains("stage generate") && e.contains("table_0") && e.contains("cousin rank 9"), "{e}");
    assert!(!scene.exists());
}

#[test]
fn eval_of_ground_truth_against_itself_is_perfect() {
    let f = fixture();
    let gt = f.root.join("gt.scene.json");
    acdc::write_scene(&support::gt_scene(), &gt).unwrap();
    let out = f.root.join("metrics.json");
    let o = acdc(&[&"--assets", &f.db, &"eval", &"--gt", &gt, &"--rec", &gt, &"-o", &out]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let s = &json(&out)["summary"];
    assert_eq!(s["category_accuracy"], 1.0);
    assert_eq!(s["model_accuracy"], 1.0);
    assert_eq!(s["center_l2_cm"]["mean"], 0.0);
    assert_eq!(s["orientation_diff"]["mean"], 0.0);
    assert_eq!(s["bbox_iou"]["mean"], 1.0);
    assert_eq!(s["center_aligned_iou"]["mean"], 1.0);
    let table = fs::read_to_string(f.root.join("metrics.table.txt")).unwrap();
    assert!(table.contains("6/6"), "{table}");
    assert_eq!(String::from_utf8_lossy(&o.stdout), table);
}

#[test]
fn full_pipeline_through_the_binary() {
    let f = fixture();
    let cfg = f.root.join("run.toml");
    fs::write(&cfg, "assets = \"db\"\nseed = 3\n[compile]\ndbscan_eps = 0.03\n").unwrap();
    let matches = f.root.join("matches.json");
    let o = acdc(&[&"--config", &cfg, &"match", &"--bundle", &f.bundle, &"-o", &matches]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let scene = f.root.join("scene.json");
    let o = acdc(&[&"--config", &cfg, &"generate", &"--bundle", &f.bundle, &"--matches", &matches, &"-o", &scene]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let s = json(&scene);
    assert_eq!(s["objects"].as_array().unwrap().len(), 6);
    assert_eq!(s["provenance"]["seed"], 3);
    assert_eq!(s["provenance"]["bundle_hash"], json(&matches)["bundle_hash"]);
    let report = json(&f.root.join("scene.report.json"));
    assert_eq!(report["cousin_rank"], 1);
    let run = json(&f.root.join("scene.run.json"));
    assert_eq!(run["config"]["compile"]["dbscan_eps"], 0.03);
    assert_eq!(run["config"]["compile"]["ransac"]["seed"], 3);

    let o = acdc(&[&"validate", &scene]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["kind"], "scene");
    assert_eq!(v["valid"], true);

    let rnd = f.root.join("random.json");
    let o = acdc(&[
        &"--config", &cfg, &"--seed", &"11", &"randomize", &"--scene", &scene, &"--matches", &matches, &"--swap",
        &"--xy-jitter", &"0.1", &"-o", &rnd,
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r = json(&f.root.join("random.report.json"));
    assert_eq!(r["spec"]["seed"], 11);
    assert_eq!(r["spec"]["xy_jitter"], 0.1);
    assert_eq!(r["spec"]["instance_swap"], true);

    let mesh = f.root.join("scene.obj");
    let o = acdc(&[&"--config", &cfg, &"export-obj", &"--scene", &rnd, &"-o", &mesh]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let tris = acdc::obj::parse_obj(&fs::read_to_string(&mesh).unwrap()).unwrap();
    assert_eq!(tris.len(), 6 * 12);

    let metrics = f.root.join("metrics.json");
    let gt = f.root.join("gt.scene.json");
    acdc::write_scene(&support::gt_scene(), &gt).unwrap();
    let o = acdc(&[
        &"--config", &cfg, &"eval", &"--gt", &gt, &"--rec", &scene, &"--name", &"room", &"--centrosymmetric",
        &"bin", &"-o", &metrics,
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let s = &json(&metrics)["summary"];
    assert_eq!(s["model_accuracy"], 1.0);
    assert!(s["center_l2_cm"]["mean"].as_f64().unwrap() < 1.0);
}

#[test]
fn traj_writes_a_trajectory_for_the_door() {
    let f = fixture();
    let out = f.root.join("traj.json");
    let o = acdc(&[
        &"--assets", &f.db, &"traj", &"--asset", &"cabinet_twin", &"--link", &"door", &"--skill", &"open",
        &"--waypoints", &"16", &"-o", &out,
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let t = json(&out);
    assert_eq!(t["skill"], "open");
    assert_eq!(t["trajectory"]["waypoints"].as_array().unwrap().len(), 16);
    let o = acdc(&[&"--assets", &f.db, &"traj", &"--asset", &"cabinet_twin", &"--link", &"lid", &"--skill", &"open", &"-o", &out]);
    assert_eq!(code(&o), acdc::cli::EXIT_MISSING_INPUT);
    let o = acdc(&[&"--assets", &f.db, &"traj", &"--asset", &"table_twin", &"--link", &"door", &"--skill", &"open", &"-o", &out]);
    assert_eq!(code(&o), acdc::cli::EXIT_MISSING_INPUT);
}

#[test]
fn asset_db_comes_from_the_environment_when_not_given() {
    let f = fixture();
    let out = f.root.join("m.json");
    let o = acdc(&[&"match", &"--bundle", &f.bundle, &"-o", &out]);
    assert_eq!(code(&o), acdc::cli::EXIT_MISSING_INPUT, "{}", stderr(&o));
    assert!(stderr(&o).contains("ACDC_ASSET_DB"));
    let o = Command::new(env!("CARGO_BIN_EXE_acdc"))
        .args(["match", "--bundle"])
        .arg(&f.bundle)
        .arg("-o")
        .arg(&out)
        .env("ACDC_ASSET_DB", &f.db)
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", stderr(&o));
}

#[test]
fn validation_failures_exit_with_two() {
    let f = fixture();
    let mut s = support::gt_scene();
    s.objects[0].orientation = acdc_core::Quat::new(2.0, 0.0, 0.0, 0.0);
    let bad = f.root.join("bad.scene.json");
    acdc::write_scene(&s, &bad).unwrap();
    let report = f.root.join("report.json");
    let o = acdc(&[&"validate", &bad, &"-o", &report]);
    assert_eq!(code(&o), acdc::cli::EXIT_VALIDATION);
    let v = json(&report);
    assert_eq!(v["valid"], false);
    assert_eq!(v["violations"][0]["code"], "NonUnitQuaternion");
    assert_eq!(v["violations"][0]["path"], "objects[0]");

    for (path, kind) in [(&f.bundle, "bundle"), (&f.db, "db")] {
        let o = acdc(&[&"--assets", &f.db, &"validate", path]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        let v: Value = serde_json::from_slice(&o.stdout).unwrap();
        assert_eq!(v["kind"], kind);
        assert_eq!(v["violations"], Value::Array(vec![]));
    }

    // a scene that does not validate cannot be compiled further
    let out = f.root.join("r.json");
    let o = acdc(&[&"--assets", &f.db, &"randomize", &"--scene", &bad, &"-o", &out]);
    assert_eq!(code(&o), acdc::cli::EXIT_VALIDATION, "{}", stderr(&o));
    assert!(stderr(&o).contains("NonUnitQuaternion@objects[0]"), "{}", stderr(&o));
}

#[test]
fn usage_and_missing_inputs() {
    let f = fixture();
    assert_eq!(code(&acdc(&[&"match"])), acdc::cli::EXIT_VALIDATION);
    assert_eq!(code(&acdc(&[&"--help"])), 0);
    assert_eq!(code(&acdc(&[&"frobnicate"])), acdc::cli::EXIT_VALIDATION);
    let out = f.root.join("m.json");
    let missing = f.root.join("absent");
    let o = acdc(&[&"--assets", &f.db, &"match", &"--bundle", &missing, &"-o", &out]);
    assert_eq!(code(&o), acdc::cli::EXIT_MISSING_INPUT);
    let o = acdc(&[&"--assets", &missing, &"match", &"--bundle", &f.bundle, &"-o", &out]);
    assert_eq!(code(&o), acdc::cli::EXIT_MISSING_INPUT);
    let o = acdc(&[&"--assets", &f.db, &"match", &"--bundle", &f.bundle, &"--trim", &"1.5", &"-o", &out]);
    assert_eq!(code(&o), acdc::cli::EXIT_VALIDATION);
    let o = acdc(&[&"--config", &missing, &"match", &"--bundle", &f.bundle, &"-o", &out]);
    assert_eq!(code(&o), acdc::cli::EXIT_MISSING_INPUT);
}

#[test]
fn matches_from_another_bundle_are_refused() {
    let f = fixture();
    let matches = run_match(&f);
    let other = f.root.join("other");
    let mut b = support::gt_bundle(&support::twin_db());
    b.depth.values[0] *= 1.01;
    acdc::write_bundle(&other, &b).unwrap();
    let out = f.root.join("s.json");
    let o = acdc(&[&"--assets", &f.db, &"generate", &"--bundle", &other, &"--matches", &matches, &"-o", &out]);
    assert_eq!(code(&o), acdc::cli::EXIT_VALIDATION);
    assert!(stderr(&o).contains("different bundle"), "{}", stderr(&o));
}
