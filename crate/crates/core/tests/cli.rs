mod common;

use std::fs;
use std::path::Path;

use affattn::cli::exit;
use affattn::*;
use common::run_bin;

const BIN: &str = env!("CARGO_BIN_EXE_affattn");

fn s(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

fn synth(out: &Path, extra: &[&str]) {
    let out = s(out);
    let mut args = vec!["synth", "--out", out.as_str()];
    args.extend_from_slice(extra);
    let o = run_bin(BIN, &args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn printed_auc(stdout: &[u8]) -> f64 {
    let text = String::from_utf8_lossy(stdout);
    text.split_whitespace()
        .nth(1)
        .and_then(|v| v.parse().ok())
        .unwrap_or_else(|| panic!("no AUC in {text:?}"))
}

#[test]
fn reruns_are_byte_identical() {
    let (checked, differing) = common::cli_determinism(BIN);
    assert_eq!(checked, ["synth", "roc", "spread", "eval"]);
    assert!(differing.is_empty(), "{differing:?}");
}

#[test]
fn default_synth_has_dataset_shape_and_rereads() {
    let tmp = tempfile::tempdir().unwrap();
    synth(tmp.path(), &[]);
    let summary = json(&tmp.path().join("synth_summary.json"));
    assert_eq!(summary["scenes"], 255);
    assert_eq!(summary["trials"], 1020);
    assert_eq!(summary["subjects"], 72);

    let manifest = load_manifest(tmp.path().join("manifest.csv")).unwrap();
    assert_eq!(manifest.len(), 1020);
    let responses = load_responses(tmp.path().join("responses.csv"), &manifest).unwrap();
    responses.validate(&manifest).unwrap();
    for t in manifest.iter().step_by(97) {
        let grid = read_feature_file(tmp.path().join(format!("features/{}.aftn", t.image_id))).unwrap();
        let mask = read_mask_file(tmp.path().join(format!("masks/{}.afmsk", t.image_id))).unwrap();
        let g = grid.geometry;
        let labels = rasterize_mask(&mask, g.grid_h, g.grid_w, g.proc_h, g.proc_w).unwrap();
        assert_eq!(labels.get(pixel_to_patch(t.center_xy, &g).unwrap()), t.center_obj);
        assert_eq!(labels.get(pixel_to_patch(t.periph_xy, &g).unwrap()), t.periph_obj);
    }
}

#[test]
fn roc_prints_auc_for_ideal_and_noise_suites() {
    let tmp = tempfile::tempdir().unwrap();
    for (name, flags, lo, hi) in [
        ("ideal", ["--noise-sigma", "0"], 0.99, 1.0),
        ("noise", ["--separability", "0"], 0.45, 0.55),
    ] {
        let data = tmp.path().join(name);
        let mut extra = vec!["--scenes", "55", "--subjects", "4"];
        extra.extend_from_slice(&flags);
        if name == "noise" {
            extra.extend_from_slice(&["--noise-sigma", "1"]);
        }
        synth(&data, &extra);
        let out = tmp.path().join(format!("{name}_roc"));
        let o = run_bin(BIN, &["roc", "--data", &s(&data), "--out", &s(&out)]);
        assert!(o.status.success());
        let auc = printed_auc(&o.stdout);
        assert!((lo..=hi).contains(&auc), "{name}: AUC {auc}");
        let csv = fs::read_to_string(out.join("roc.csv")).unwrap();
        assert!(csv.starts_with("threshold,mean_tpr,mean_fpr\n1,"));
        assert_eq!(csv.lines().count(), 22);
    }
}

#[test]
fn spread_defaults_and_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    synth(&data, &["--scenes", "50", "--subjects", "4"]);
    let out = tmp.path().join("spread");
    let o = run_bin(
        BIN,
        &["spread", "--data", &s(&data), "--out", &s(&out), "--traces", "--pgm"],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary = json(&out.join("spread_summary.json"));
    assert_eq!(summary["config"]["tau"], 0.8);
    assert_eq!(summary["config"]["tau_step"], 0.2);
    assert_eq!(summary["config"]["schedule"], "multiplicative");
    assert_eq!(summary["config"]["connectivity"], "four");
    let mean = |i: usize| summary["conditions"][i]["mean_steps"].as_f64().unwrap();
    assert_eq!(summary["conditions"][0]["condition"], "same_close");
    assert!(mean(0) < mean(1));

    let hist = fs::read_to_string(out.join("histogram.csv")).unwrap();
    assert_eq!(hist.lines().count(), 1 + 4 * 21);
    let preds = fs::read_to_string(out.join("predictions.csv")).unwrap();
    assert_eq!(preds.lines().count(), 201);
    let traces = fs::read_to_string(out.join("traces.csv")).unwrap();
    assert!(traces.starts_with("trial_id,step,threshold,added\n"));
    let first = preds.lines().nth(1).unwrap().split(',').next().unwrap().to_string();
    let step1 = fs::read(out.join(format!("pgm/{first}/step_01.pgm"))).unwrap();
    assert!(step1.starts_with(b"P5\n32 32\n255\n"));
}

#[test]
fn eval_with_human_rts_as_predictions() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    synth(&data, &["--scenes", "20", "--subjects", "16"]);
    let manifest = load_manifest(data.join("manifest.csv")).unwrap();
    let mut csv = String::from("trial_id,prediction\n");
    for t in &manifest {
        csv.push_str(&format!("{},{}\n", t.trial_id, t.mean_rt_ms.unwrap()));
    }
    let preds = tmp.path().join("human.csv");
    fs::write(&preds, csv).unwrap();
    let out = tmp.path().join("eval");
    let o = run_bin(
        BIN,
        &[
            "eval",
            "--data",
            &s(&data),
            "--predictions",
            &s(&preds),
            "--out",
            &s(&out),
        ],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report = fs::read_to_string(out.join("eval_report.csv")).unwrap();
    assert!(report.contains("spearman_rho,1\n"), "{report}");
    assert!(report.contains("baseline_rho,"));
    assert!(out.join("eval_summary.txt").exists() && out.join("conditions.csv").exists());
    assert!(!out.join("histogram.csv").exists());
    let summary = json(&out.join("eval_summary.json"));
    assert_eq!(summary["report"]["spearman_rho"], 1.0);
    assert!(summary["report"]["ceiling_rho"].is_f64());
}

#[test]
fn exit_codes_distinguish_failures() {
    let tmp = tempfile::tempdir().unwrap();
    let out = s(&tmp.path().join("out"));
    assert_eq!(run_bin(BIN, &["roc", "--out", &out]).status.code(), Some(exit::USAGE));
    assert_eq!(run_bin(BIN, &["frobnicate"]).status.code(), Some(exit::USAGE));
    assert_eq!(
        run_bin(BIN, &["--threads", "0", "synth", "--out", &out]).status.code(),
        Some(exit::USAGE)
    );

    let missing = s(&tmp.path().join("nope"));
    assert_eq!(
        run_bin(BIN, &["spread", "--data", &missing, "--out", &out])
            .status
            .code(),
        Some(exit::IO)
    );

    let data = tmp.path().join("data");
    synth(&data, &["--scenes", "2", "--subjects", "4"]);
    let bad = tmp.path().join("bad.csv");
    let header = fs::read_to_string(data.join("manifest.csv"))
        .unwrap()
        .lines()
        .next()
        .unwrap()
        .to_string();
    fs::write(&bad, format!("{header}\nt1,img_000,sideways,1,1,2,2,1,1,\n")).unwrap();
    let feats = s(&data.join("features"));
    let args = ["spread", "--features", &feats, "--manifest", &s(&bad), "--out", &out];
    let o = run_bin(BIN, &args);
    assert_eq!(
        o.status.code(),
        Some(exit::VALIDATION),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );

    let far = tmp.path().join("far.csv");
    fs::write(&far, format!("{header}\nt1,img_000,same_close,9999,1,9999,2,1,1,\n")).unwrap();
    let args = ["spread", "--features", &feats, "--manifest", &s(&far), "--out", &out];
    assert_eq!(run_bin(BIN, &args).status.code(), Some(exit::EMPTY));
}

#[test]
fn thread_count_does_not_change_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    synth(&data, &["--scenes", "6", "--subjects", "4"]);
    let mut trees = Vec::new();
    for threads in ["1", "3"] {
        let out = tmp.path().join(format!("t{threads}"));
        let o = std::process::Command::new(BIN)
            .args(["spread", "--data", &s(&data), "--out", &s(&out), "--traces"])
            .env("AFFATTN_THREADS", threads)
            .output()
            .unwrap();
        assert!(o.status.success());
        trees.push(common::read_tree(&out));
    }
    assert_eq!(trees[0], trees[1]);
}
