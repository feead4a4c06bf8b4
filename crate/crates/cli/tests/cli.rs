use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn rrpipe(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rrpipe"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_spec(dir: &Path, name: &str, rr: f64, duration: f64, seed: u64) -> PathBuf {
    let p = dir.join(format!("{name}.spec.json"));
    let spec = serde_json::json!({
        "duration_s": duration,
        "sample_rate_hz": 30.0,
        "hr0_bpm": 72.0,
        "rsa_amp_bpm": 3.0,
        "rr_brpm": rr,
        "snr_db": 18.0,
        "seed": seed,
        "pulse_strength": 0.01,
    });
    std::fs::write(&p, spec.to_string()).unwrap();
    p
}

/// Writes `<name>.csv` and `<name>.truth.json` into `dir` via `synth`.
fn synth(dir: &Path, name: &str, rr: f64, duration: f64, seed: u64) -> PathBuf {
    let spec = write_spec(dir, name, rr, duration, seed);
    let trace = dir.join(format!("{name}.csv"));
    let truth = dir.join(format!("{name}.truth.json"));
    let out = rrpipe(&["synth", "--spec", s(&spec), "--out-trace", s(&trace), "--out-truth", s(&truth)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    std::fs::remove_file(spec).unwrap();
    trace
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn synth_then_estimate() {
    let dir = tempfile::tempdir().unwrap();
    let trace = synth(dir.path(), "seg", 15.0, 30.0, 1);
    let truth = read_json(&dir.path().join("seg.truth.json"));
    assert_eq!(truth["rr_brpm"], 15.0);
    assert!(truth["beat_times"].as_array().unwrap().len() > 30);
    assert_eq!(truth["hr_curve"]["t_s"].as_array().unwrap().len(), 900);

    let dump = dir.path().join("dump");
    let out = rrpipe(&["estimate", "--trace", s(&trace), "--dump-intermediates", s(&dump)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let summary: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((summary["rr_brpm"].as_f64().unwrap() - 15.0).abs() <= 1.0, "{summary}");
    assert_eq!(summary["n_samples"], 900);
    for f in ["pulse.csv", "hr_curve.csv", "filtered.csv", "peaks.csv", "detrended.csv", "pruned.csv", "psd.csv", "stages.json"] {
        assert!(dump.join(f).is_file(), "missing {f}");
    }

    let out = rrpipe(&["estimate", "--trace", s(&trace), "--no-interp", "--no-outlier-removal"]);
    assert_eq!(code(&out), 0);
    let ablated: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(ablated["n_outliers_removed"], 0);
}

#[test]
fn config_file_overrides_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let trace = synth(dir.path(), "seg", 12.0, 30.0, 2);
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"rr_band_brpm": [5.0, 10.0]}"#).unwrap();
    let out = rrpipe(&["estimate", "--trace", s(&trace), "--config", s(&cfg)]);
    assert_eq!(code(&out), 0);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["rr_brpm"].as_f64().unwrap() <= 10.0);

    std::fs::write(&cfg, r#"{"no_such_key": 1}"#).unwrap();
    assert_eq!(code(&rrpipe(&["estimate", "--trace", s(&trace), "--config", s(&cfg)])), 2);
}

#[test]
fn evaluate_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus");
    std::fs::create_dir(&corpus).unwrap();
    for (i, rr) in [10.0, 14.0, 20.0].into_iter().enumerate() {
        synth(&corpus, &format!("s{i}"), rr, 30.0, 10 + i as u64);
    }
    let report = dir.path().join("report.json");
    let ba = dir.path().join("ba.csv");
    let out = rrpipe(&["evaluate", "--corpus", s(&corpus), "--report", s(&report), "--bland-altman", s(&ba)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let r = read_json(&report);
    for key in ["mean_error", "sd_error", "rmse", "mean_error_rate", "pct_within_1", "n_segments"] {
        assert!(r.get(key).is_some(), "missing {key}");
    }
    assert_eq!(r["n_segments"], 3);
    assert_eq!(r["segments"].as_array().unwrap().len(), 3);
    assert_eq!(std::fs::read_to_string(&ba).unwrap().lines().count(), 4);

    // explicit ground truth table
    let gt = dir.path().join("gt.csv");
    std::fs::write(&gt, "segment_id,rr_brpm\ns0,10\ns1,14\ns2,20\n").unwrap();
    let out = rrpipe(&["evaluate", "--corpus", s(&corpus), "--gt", s(&gt), "--report", s(&report)]);
    assert_eq!(code(&out), 0);
    std::fs::write(&gt, "segment_id,rr_brpm\ns0,10\n").unwrap();
    assert_eq!(code(&rrpipe(&["evaluate", "--corpus", s(&corpus), "--gt", s(&gt), "--report", s(&report)])), 2);
}

#[test]
fn failed_segments_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "good", 15.0, 30.0, 3);
    synth(dir.path(), "short", 15.0, 5.0, 4);
    let report = dir.path().join("report.json");
    let out = rrpipe(&["evaluate", "--corpus", s(dir.path()), "--report", s(&report)]);
    assert_eq!(code(&out), 0);
    let r = read_json(&report);
    assert_eq!(r["n_segments"], 1);
    assert_eq!(r["failed"][0]["segment_id"], "short");
    assert_eq!(r["failed"][0]["stage"], "spectrogram");

    std::fs::remove_file(dir.path().join("good.csv")).unwrap();
    assert_eq!(code(&rrpipe(&["evaluate", "--corpus", s(dir.path()), "--report", s(&report)])), 3);
}

#[test]
fn stage_by_stage_chain() {
    let dir = tempfile::tempdir().unwrap();
    let trace = synth(dir.path(), "seg", 15.0, 30.0, 5);
    let p = |n: &str| dir.path().join(n).to_str().unwrap().to_string();
    let trace = s(&trace).to_string();
    let steps = [
        vec!["rppg".into(), "--in".into(), trace.clone(), "--out".into(), p("pulse.csv")],
        vec!["hr".into(), "--in".into(), p("pulse.csv"), "--out".into(), p("hr.csv")],
        vec!["hrv".into(), "--pulse".into(), p("pulse.csv"), "--hr".into(), p("hr.csv"), "--out".into(), p("detrended.csv")],
        vec!["prune".into(), "--in".into(), p("detrended.csv"), "--out".into(), p("pruned.csv")],
        vec!["rr".into(), "--in".into(), p("pruned.csv"), "--out".into(), p("rr.json"), "--psd".into(), p("psd.csv")],
    ];
    for args in &steps {
        let args: Vec<&str> = args.iter().map(String::as_str).collect();
        let out = rrpipe(&args);
        assert_eq!(code(&out), 0, "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
    let rr = read_json(Path::new(&p("rr.json")));
    assert!((rr["rr_brpm"].as_f64().unwrap() - 15.0).abs() <= 1.0, "{rr}");
    assert!(rr["n_samples"].as_u64().unwrap() >= 20);

    // the chain agrees with the one-shot estimate
    let out = rrpipe(&["estimate", "--trace", &trace]);
    let summary: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(summary["rr_brpm"], rr["rr_brpm"]);
    assert_eq!(std::fs::read_to_string(p("psd.csv")).unwrap().lines().count(), 502);
}

fn write_tracks(path: &Path, frames: usize, collinear_at: Option<usize>) {
    let base = [[0.0, 0.0], [10.0, 0.0], [0.0, 10.0], [10.0, 10.0], [5.0, 3.0]];
    let mut text = String::from("frame,point_id,x,y\n");
    for f in 0..frames {
        for (id, p) in base.iter().enumerate() {
            let (x, y) = if collinear_at == Some(f) {
                (id as f64, 2.0 * id as f64)
            } else {
                (p[0] + f as f64, p[1])
            };
            text.push_str(&format!("{f},{id},{x},{y}\n"));
        }
    }
    std::fs::write(path, text).unwrap();
}

#[test]
fn track_roi_propagates_and_rejects_degenerate() {
    let dir = tempfile::tempdir().unwrap();
    let tracks = dir.path().join("tracks.csv");
    let roi = dir.path().join("roi0.csv");
    let out = dir.path().join("roi.csv");
    std::fs::write(&roi, "frame,vertex_id,x,y\n0,0,1,1\n0,1,8,1\n0,2,8,8\n0,3,1,8\n").unwrap();
    write_tracks(&tracks, 4, None);
    let res = rrpipe(&["track-roi", "--tracks", s(&tracks), "--roi", s(&roi), "--out", s(&out)]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 1 + 4 * 4);
    let last: Vec<f64> = text.lines().last().unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert_eq!(last[0], 3.0);
    assert!((last[2] - 4.0).abs() < 1e-9 && (last[3] - 8.0).abs() < 1e-9);

    // frame 2 collapses onto a line: the (1, 2) pair is degenerate
    write_tracks(&tracks, 4, Some(2));
    let res = rrpipe(&["track-roi", "--tracks", s(&tracks), "--roi", s(&roi), "--out", s(&out)]);
    assert_eq!(code(&res), 2);
}

#[test]
fn validation_failures_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "frame,t_s,r,g,b\n0,0,1,1,1\n1,0,1,1,1\n").unwrap();
    assert_eq!(code(&rrpipe(&["estimate", "--trace", s(&bad)])), 2);
    assert_eq!(code(&rrpipe(&["estimate", "--trace", "/nonexistent/t.csv"])), 2);
    assert_eq!(code(&rrpipe(&["estimate"])), 2);
    let series = dir.path().join("s.csv");
    std::fs::write(&series, "t_s,value\n0,1\n1,2\n2,1\n").unwrap();
    let out = dir.path().join("o.csv");
    assert_eq!(code(&rrpipe(&["prune", "--in", s(&series), "--out", s(&out), "--alpha", "0"])), 2);
    let spec = dir.path().join("spec.json");
    std::fs::write(&spec, r#"{"duration_s": 30, "sample_rate_hz": 30, "hr0_bpm": 70, "rsa_amp_bpm": 80, "rr_brpm": 15}"#)
        .unwrap();
    let res = rrpipe(&["synth", "--spec", s(&spec), "--out-trace", s(&out), "--out-truth", s(&series)]);
    assert_eq!(code(&res), 2);
}

#[test]
fn stage_failures_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let trace = synth(dir.path(), "short", 15.0, 5.0, 6);
    let res = rrpipe(&["estimate", "--trace", s(&trace)]);
    assert_eq!(code(&res), 3);
    assert!(String::from_utf8_lossy(&res.stderr).contains("spectrogram"));

    let flat = dir.path().join("flat.csv");
    std::fs::write(&flat, "t_s,value\n0,1\n1,1\n2,1\n3,1\n4,1\n").unwrap();
    let out = dir.path().join("rr.json");
    assert_eq!(code(&rrpipe(&["rr", "--in", s(&flat), "--out", s(&out)])), 3);
}
