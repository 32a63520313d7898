use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use realscale::eval::{load_predictions, save_predictions, MetricsReport, Prediction};
use realscale::geometry::{generate_primitive, load_mesh, save_obj, signed_volume, Primitive};
use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_realscale"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(args: &[&str]) -> i32 {
    run(args).status.code().unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn json(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

fn unit_cube(dir: &Path) -> PathBuf {
    let path = dir.join("cube.obj");
    save_obj(&generate_primitive(&Primitive::Cube { edge: 1.0 }, 0).unwrap(), &path).unwrap();
    path
}

fn corpus(dir: &Path) -> PathBuf {
    let out = dir.join("corpus");
    ok(&["gen-synthetic", "--n", "12", "--dim", "8", "--views", "6", "--frames", "2", "--seed", "4", "--out", s(&out)]);
    out.join("manifest.json")
}

#[test]
fn poses() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("poses.json");
    ok(&["poses", "--out", s(&out)]);
    assert_eq!(json(&out).as_array().unwrap().len(), 75);
    assert!(dir.path().join("run.json").is_file());

    let err = run(&["poses", "--count", "74", "--out", s(&out)]);
    assert_eq!(err.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&err.stderr).contains("divisible"));

    let cube = unit_cube(dir.path());
    ok(&["poses", "--radius-mult", "2.5", "--mesh", s(&cube), "--out", s(&out)]);
    let r = json(&out)[0]["radius"].as_f64().unwrap();
    assert!((r - 2.5 * 3f64.sqrt() / 2.0).abs() < 1e-12);
}

#[test]
fn volume_and_rescale() {
    let dir = tempfile::tempdir().unwrap();
    let cube = unit_cube(dir.path());
    let out = ok(&["volume", s(&cube)]);
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "1.000000 mL");
    assert_eq!(code(&["volume", s(&dir.path().join("missing.obj"))]), 2);

    let big = dir.path().join("big.obj");
    ok(&["rescale", "--mesh", s(&cube), "--factor", "27", "--out", s(&big)]);
    assert!((signed_volume(&load_mesh(&big).unwrap()) - 27.0).abs() < 1e-9);
    assert_eq!(code(&["rescale", "--mesh", s(&cube), "--factor", "-1", "--out", s(&big)]), 2);
    assert_eq!(code(&["rescale", "--mesh", s(&cube), "--out", s(&big)]), 2);

    let preds = dir.path().join("p.json");
    save_predictions(
        &[Prediction { item_id: "x".into(), v_scale_hat: 8.0, est_volume_ml: 8.0, m_views_used: 1 }],
        &preds,
    )
    .unwrap();
    ok(&["rescale", "--mesh", s(&cube), "--prediction", s(&preds), "--item", "x", "--out", s(&big)]);
    assert!((signed_volume(&load_mesh(&big).unwrap()) - 8.0).abs() < 1e-9);
}

#[test]
fn train_predict_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = corpus(dir.path());
    let run_dir = dir.path().join("run");
    let ckpt = run_dir.join("a.srk");
    let train = |out: &Path| {
        ok(&["train", "--manifest", s(&manifest), "--epochs", "3", "--hidden", "8,4", "--seed", "2", "--out", s(out)])
    };
    train(&ckpt);
    let log = json(&run_dir.join("run.json"));
    assert_eq!(log["command"], "train");
    assert_eq!(log["config"]["batch"], 64);
    assert_eq!(log["config"]["lr_decay"], 0.7);
    let again = run_dir.join("b.srk");
    train(&again);
    assert_eq!(fs::read(&ckpt).unwrap(), fs::read(&again).unwrap());

    let missing = dir.path().join("nope.emb");
    assert_eq!(
        code(&[
            "train",
            "--manifest",
            s(&manifest),
            "--mode",
            "render-only",
            "--render-emb",
            s(&missing),
            "--out",
            s(&ckpt)
        ]),
        2
    );

    let preds = run_dir.join("pred.json");
    ok(&["predict", "--ckpt", s(&ckpt), "--manifest", s(&manifest), "--m", "3", "--out", s(&preds)]);
    let p = load_predictions(&preds).unwrap();
    assert!(!p.is_empty());
    for rec in &p {
        assert_eq!(rec.m_views_used, 3);
    }
    assert_eq!(code(&["predict", "--ckpt", s(&ckpt), "--manifest", s(&manifest), "--m", "0", "--out", s(&preds)]), 2);
    assert_eq!(code(&["predict", "--ckpt", s(&ckpt), "--manifest", s(&manifest), "--m", "7", "--out", s(&preds)]), 2);

    let report = run_dir.join("report.json");
    let scatter = run_dir.join("scatter.csv");
    ok(&[
        "evaluate",
        "--predictions",
        s(&preds),
        "--manifest",
        s(&manifest),
        "--out",
        s(&report),
        "--scatter",
        s(&scatter),
    ]);
    let r: MetricsReport = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(r.n, p.len());
    assert_eq!(fs::read_to_string(&scatter).unwrap().lines().count(), p.len() + 2);
}

#[test]
fn evaluate_baseline_energy() {
    let dir = tempfile::tempdir().unwrap();
    let manifest_path = corpus(dir.path());
    let manifest = realscale::corpus::load_manifest(&manifest_path).unwrap();

    let perfect: Vec<Prediction> = manifest
        .items
        .iter()
        .map(|it| Prediction {
            item_id: it.item_id.clone(),
            v_scale_hat: it.gt_volume_ml / it.recon_volume_ml,
            est_volume_ml: it.gt_volume_ml,
            m_views_used: 6,
        })
        .collect();
    let preds = dir.path().join("perfect.json");
    save_predictions(&perfect, &preds).unwrap();
    let report = dir.path().join("r.json");
    ok(&["evaluate", "--predictions", s(&preds), "--manifest", s(&manifest_path), "--out", s(&report)]);
    assert_eq!(json(&report)["mae_ml"], 0.0);

    let base = dir.path().join("base.json");
    ok(&["baseline", "--manifest", s(&manifest_path), "--method", "dataset-mean", "--out", s(&base)]);
    ok(&["evaluate", "--predictions", s(&base), "--manifest", s(&manifest_path), "--out", s(&report)]);
    assert_eq!(json(&report)["pearson_r"], 0.0);
    ok(&["baseline", "--manifest", s(&manifest_path), "--method", "category-mean", "--out", s(&base)]);

    let energy = dir.path().join("e.json");
    ok(&["energy", "--predictions", s(&preds), "--manifest", s(&manifest_path), "--out", s(&energy)]);
    let e: MetricsReport = serde_json::from_str(&fs::read_to_string(&energy).unwrap()).unwrap();
    assert_eq!(e.mae_ml, 0.0);
    let bad_table = dir.path().join("t.json");
    fs::write(&bad_table, r#"{"apple": 0}"#).unwrap();
    assert_eq!(
        code(&[
            "energy",
            "--predictions",
            s(&preds),
            "--manifest",
            s(&manifest_path),
            "--table",
            s(&bad_table),
            "--out",
            s(&energy)
        ]),
        2
    );
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(code(&["train"]), 2);
    assert_eq!(code(&["no-such-command"]), 2);
}
