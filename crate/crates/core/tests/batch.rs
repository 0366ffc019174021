use std::fs;
use std::path::Path;

use gapflight::harness::{
    emit_trajectory_csv, read_trajectory_csv, recompute_stats, run_batch, BatchSpec, Orientation, CSV_HEADER,
    SUMMARY_FILE, TRIALS_DIR,
};
use gapflight::trial::{run_trial, Phase, TrialConfig};
use serde_json::Value;

fn small_spec(dir: &Path, noiseless: bool) -> BatchSpec {
    let trial = if noiseless {
        TrialConfig::default().noiseless()
    } else {
        TrialConfig::default()
    };
    BatchSpec {
        orientations: vec![
            Orientation {
                roll_deg: 45.0,
                pitch_deg: 0.0,
            },
            Orientation {
                roll_deg: 15.0,
                pitch_deg: 20.0,
            },
        ],
        trials_per_orientation: 3,
        output_dir: dir.to_path_buf(),
        trial,
        ..BatchSpec::default()
    }
}

#[test]
fn single_noiseless_trial_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let spec = BatchSpec {
        orientations: vec![Orientation {
            roll_deg: 45.0,
            pitch_deg: 0.0,
        }],
        trials_per_orientation: 1,
        output_dir: dir.path().to_path_buf(),
        trial: TrialConfig::default().noiseless(),
        ..BatchSpec::default()
    };
    let stats = run_batch(&spec).unwrap();
    assert_eq!(stats.success_rate, 1.0);
    let e = stats.errors.unwrap();
    assert!(e.position_norm.mean < 0.02);
    assert!(e.position.iter().all(|p| p.mean < 0.02));
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn close(a: &Value, b: f64) -> bool {
    (a.as_f64().unwrap() - b).abs() <= 1e-9
}

#[test]
fn summary_matches_recomputation_from_trial_files() {
    let dir = tempfile::tempdir().unwrap();
    run_batch(&small_spec(dir.path(), false)).unwrap();
    let summary: Value = serde_json::from_str(&fs::read_to_string(dir.path().join(SUMMARY_FILE)).unwrap()).unwrap();

    let mut reports: Vec<Value> = fs::read_dir(dir.path().join(TRIALS_DIR))
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .map(|p| serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap())
        .collect();
    reports.sort_by_key(|r| r["seed"].as_u64().unwrap());
    assert_eq!(reports.len(), 6);

    let successes = reports.iter().filter(|r| r["success"].as_bool().unwrap()).count();
    assert_eq!(summary["trials"].as_u64().unwrap(), 6);
    assert!(close(&summary["success_rate"], successes as f64 / 6.0));

    let errs: Vec<&Value> = reports.iter().map(|r| &r["error_at_tc"]).filter(|e| !e.is_null()).collect();
    let pos = |e: &Value, k: usize| e["position"][k].as_f64().unwrap();
    let norms: Vec<f64> = errs
        .iter()
        .map(|e| (pos(e, 0).powi(2) + pos(e, 1).powi(2) + pos(e, 2).powi(2)).sqrt())
        .collect();
    let (m, s) = mean_std(&norms);
    let table = &summary["errors"];
    assert!(close(&table["position_norm"]["mean"], m));
    assert!(close(&table["position_norm"]["std"], s));
    for k in 0..3 {
        let (m, s) = mean_std(&errs.iter().map(|e| pos(e, k).abs()).collect::<Vec<_>>());
        assert!(close(&table["position"][k]["mean"], m));
        assert!(close(&table["position"][k]["std"], s));
        let vel: Vec<f64> = errs.iter().map(|e| e["velocity"][k].as_f64().unwrap().abs()).collect();
        assert!(close(&table["velocity"][k]["mean"], mean_std(&vel).0));
    }
    let roll: Vec<f64> = errs.iter().map(|e| e["roll"].as_f64().unwrap().abs().to_degrees()).collect();
    let pitch: Vec<f64> = errs.iter().map(|e| e["pitch"].as_f64().unwrap().abs().to_degrees()).collect();
    assert!(close(&table["roll_deg"]["mean"], mean_std(&roll).0));
    assert!(close(&table["pitch_deg"]["std"], mean_std(&pitch).1));

    let per = summary["per_orientation"].as_array().unwrap();
    assert_eq!(per.len(), 2);
    assert_eq!(per[0]["roll_deg"].as_f64(), Some(45.0));
    assert_eq!(per[0]["trials"].as_u64(), Some(3));

    let recomputed = recompute_stats(dir.path()).unwrap();
    let rv = serde_json::to_value(&recomputed).unwrap();
    assert_eq!(rv, summary);
}

#[test]
fn summary_is_byte_identical_across_runs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run_batch(&small_spec(a.path(), false)).unwrap();
    run_batch(&small_spec(b.path(), false)).unwrap();
    assert_eq!(
        fs::read(a.path().join(SUMMARY_FILE)).unwrap(),
        fs::read(b.path().join(SUMMARY_FILE)).unwrap()
    );
}

#[test]
fn csv_has_one_row_per_step_and_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = TrialConfig {
        seed: 9,
        ..TrialConfig::default()
    };
    cfg.gap.roll_deg = 30.0;
    cfg.gap.pitch_deg = 10.0;
    let report = run_trial(&cfg).unwrap();
    let path = dir.path().join("series.csv");
    emit_trajectory_csv(&report, &path, 1).unwrap();

    let text = fs::read_to_string(&path).unwrap();
    assert!(text.ends_with('\n'));
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], CSV_HEADER.join(","));
    assert_eq!(lines.len(), report.samples.len() + 1);

    // steps tile [0, t_end] with no gap
    let s = &report.samples;
    assert_eq!(s[0].t, 0.0);
    assert!(s.windows(2).all(|w| w[1].t > w[0].t && w[1].t - w[0].t <= 1e-3 + 1e-12));
    assert!(report.t0 + report.t_end - s.last().unwrap().t <= 1e-3 + 1e-12);

    let rows = read_trajectory_csv(&path).unwrap();
    assert_eq!(rows.len(), s.len());
    let switch = rows.iter().position(|r| r.phase == Phase::Traverse).unwrap();
    assert_eq!(rows[switch].values[0], report.t0);
    assert!(rows[..switch].iter().all(|r| r.phase == Phase::Approach));
    assert!(rows[switch..].iter().all(|r| r.phase == Phase::Traverse));
    for (row, sample) in rows.iter().zip(s) {
        let expected: Vec<f64> = std::iter::once(sample.t)
            .chain(sample.true_p.iter().copied())
            .chain(sample.true_v.iter().copied())
            .chain(sample.true_rpy.iter().copied())
            .chain(sample.est_p.iter().copied())
            .chain(sample.est_v.iter().copied())
            .chain(sample.est_rpy.iter().copied())
            .chain(sample.ref_p.iter().copied())
            .chain(sample.ref_v.iter().copied())
            .collect();
        for (a, b) in row.values.iter().zip(&expected) {
            assert!((a - b).abs() <= 1e-15 * b.abs().max(1.0), "{a} vs {b}");
        }
        assert_eq!(row.detection, sample.detection);
    }

    let strided = dir.path().join("strided.csv");
    emit_trajectory_csv(&report, &strided, 10).unwrap();
    let rows = read_trajectory_csv(&strided).unwrap();
    assert!(rows.len() < s.len() / 5);
    assert!(rows.iter().any(|r| r.phase == Phase::Traverse && r.values[0] == report.t0));
    assert_eq!(rows.last().unwrap().values[0], s.last().unwrap().t);
}

#[test]
fn invalid_batches_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = small_spec(dir.path(), true);
    spec.orientations.clear();
    assert!(run_batch(&spec).is_err());
    let mut spec = small_spec(dir.path(), true);
    spec.trials_per_orientation = 0;
    assert!(run_batch(&spec).is_err());
    assert!(BatchSpec::from_toml("orientations = []").is_err());
    assert!(BatchSpec::from_toml("unknown_key = 1").is_err());
}
