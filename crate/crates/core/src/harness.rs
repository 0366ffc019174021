//! Batch Monte-Carlo runs, error statistics and on-disk artifacts.
//!
//! A batch directory holds one JSON report and one CSV time series per trial
//! under `trials/`, the aggregated `summary.json` and a `manifest.json`
//! listing every file together with the spec that produced it. Nothing that
//! depends on wall-clock time is written, so equal specs give equal bytes.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trial::{run_trial, Phase, TrialConfig, TrialPlan, TrialReport};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Orientation {
    pub roll_deg: f64,
    pub pitch_deg: f64,
}

/// Admissible gap orientations, degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Envelope {
    pub roll_deg: [f64; 2],
    pub pitch_deg: [f64; 2],
}

impl Default for Envelope {
    fn default() -> Self {
        Self {
            roll_deg: [0.0, 45.0],
            pitch_deg: [0.0, 30.0],
        }
    }
}

impl Envelope {
    pub fn contains(&self, o: &Orientation) -> bool {
        (self.roll_deg[0]..=self.roll_deg[1]).contains(&o.roll_deg)
            && (self.pitch_deg[0]..=self.pitch_deg[1]).contains(&o.pitch_deg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BatchSpec {
    pub orientations: Vec<Orientation>,
    pub trials_per_orientation: usize,
    /// Trial `i` (orientation-major order) runs with seed `base_seed + i`.
    pub base_seed: u64,
    pub output_dir: PathBuf,
    /// Every n-th simulation step is written to the time series files.
    pub csv_stride: usize,
    pub envelope: Envelope,
    /// Settings shared by every trial; gap orientation and seed are overridden.
    pub trial: TrialConfig,
}

impl Default for BatchSpec {
    /// 4 x 4 orientation grid over the envelope, 13 trials each.
    fn default() -> Self {
        let mut orientations = Vec::new();
        for roll_deg in [0.0, 15.0, 30.0, 45.0] {
            for pitch_deg in [0.0, 10.0, 20.0, 30.0] {
                orientations.push(Orientation { roll_deg, pitch_deg });
            }
        }
        Self {
            orientations,
            trials_per_orientation: 13,
            base_seed: 1,
            output_dir: PathBuf::from("gapflight-out"),
            csv_stride: 10,
            envelope: Envelope::default(),
            trial: TrialConfig::default(),
        }
    }
}

impl BatchSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.orientations.is_empty() {
            return Err(Error::Config("batch has no gap orientations".into()));
        }
        if self.trials_per_orientation == 0 {
            return Err(Error::Config("trials_per_orientation must be at least 1".into()));
        }
        if self.csv_stride == 0 {
            return Err(Error::Config("csv_stride must be at least 1".into()));
        }
        if let Some(o) = self.orientations.iter().find(|o| !self.envelope.contains(o)) {
            return Err(Error::Config(format!(
                "orientation roll {} pitch {} outside the envelope",
                o.roll_deg, o.pitch_deg
            )));
        }
        self.trial.validate()
    }

    pub fn trial_count(&self) -> usize {
        self.orientations.len() * self.trials_per_orientation
    }

    pub fn trial_config(&self, index: usize) -> TrialConfig {
        let o = self.orientations[index / self.trials_per_orientation];
        let mut cfg = self.trial;
        cfg.gap.roll_deg = o.roll_deg;
        cfg.gap.pitch_deg = o.pitch_deg;
        cfg.seed = self.base_seed.wrapping_add(index as u64);
        cfg
    }
}

pub fn load_trial_config(path: &Path) -> Result<TrialConfig> {
    let cfg: TrialConfig = toml::from_str(&fs::read_to_string(path)?).map_err(|e| Error::Config(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

/// Mean and sample standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self { mean: 0.0, std: 0.0 };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Self { mean, std }
    }
}

/// Statistics of absolute errors at the gap center, one entry per axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorTable {
    pub samples: usize,
    /// x, y, z, meters.
    pub position: [MeanStd; 3],
    /// x, y, z, m/s.
    pub velocity: [MeanStd; 3],
    pub roll_deg: MeanStd,
    pub pitch_deg: MeanStd,
    /// Norm of the position error, meters.
    pub position_norm: MeanStd,
}

impl ErrorTable {
    pub fn from_reports<'a>(reports: impl IntoIterator<Item = &'a TrialReport>) -> Option<Self> {
        let errors: Vec<_> = reports.into_iter().filter_map(|r| r.error_at_tc).collect();
        if errors.is_empty() {
            return None;
        }
        let col = |f: &dyn Fn(&crate::trial::CenterError) -> f64| {
            MeanStd::of(&errors.iter().map(|e| f(e).abs()).collect::<Vec<_>>())
        };
        Some(Self {
            samples: errors.len(),
            position: [col(&|e| e.position[0]), col(&|e| e.position[1]), col(&|e| e.position[2])],
            velocity: [col(&|e| e.velocity[0]), col(&|e| e.velocity[1]), col(&|e| e.velocity[2])],
            roll_deg: col(&|e| e.roll.to_degrees()),
            pitch_deg: col(&|e| e.pitch.to_degrees()),
            position_norm: col(&|e| e.position_norm()),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrientationStats {
    pub roll_deg: f64,
    pub pitch_deg: f64,
    pub trials: usize,
    pub successes: usize,
    pub success_rate: f64,
    pub errors: Option<ErrorTable>,
}

/// Aggregate over all trials, successful or not. Trials whose planning
/// failed count against the success rate but have no error at the gap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchStats {
    pub trials: usize,
    pub successes: usize,
    pub success_rate: f64,
    pub planning_failures: usize,
    pub errors: Option<ErrorTable>,
    pub per_orientation: Vec<OrientationStats>,
}

impl BatchStats {
    /// Groups by gap orientation in order of first appearance.
    pub fn from_reports(reports: &[TrialReport]) -> Self {
        let mut keys: Vec<(f64, f64)> = Vec::new();
        for r in reports {
            let k = (r.gap_roll_deg, r.gap_pitch_deg);
            if !keys.contains(&k) {
                keys.push(k);
            }
        }
        let per_orientation = keys
            .iter()
            .map(|&(roll, pitch)| {
                let group: Vec<&TrialReport> = reports
                    .iter()
                    .filter(|r| r.gap_roll_deg == roll && r.gap_pitch_deg == pitch)
                    .collect();
                let successes = group.iter().filter(|r| r.success).count();
                OrientationStats {
                    roll_deg: roll,
                    pitch_deg: pitch,
                    trials: group.len(),
                    successes,
                    success_rate: successes as f64 / group.len() as f64,
                    errors: ErrorTable::from_reports(group.iter().copied()),
                }
            })
            .collect();
        let successes = reports.iter().filter(|r| r.success).count();
        Self {
            trials: reports.len(),
            successes,
            success_rate: if reports.is_empty() { 0.0 } else { successes as f64 / reports.len() as f64 },
            planning_failures: reports.iter().filter(|r| r.planning_error.is_some()).count(),
            errors: ErrorTable::from_reports(reports),
            per_orientation,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub index: usize,
    pub seed: u64,
    pub roll_deg: f64,
    pub pitch_deg: f64,
    pub success: bool,
    pub report: String,
    pub timeseries: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub spec: BatchSpec,
    pub summary: String,
    pub trials: Vec<ManifestEntry>,
}

pub const SUMMARY_FILE: &str = "summary.json";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const TRIALS_DIR: &str = "trials";

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Io(e.to_string()))?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    serde_json::from_str(&fs::read_to_string(path)?).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

/// Runs every trial of the batch and writes the artifacts under the output
/// directory. A trial that cannot be planned is recorded as failed.
pub fn run_batch(spec: &BatchSpec) -> Result<BatchStats> {
    spec.validate()?;
    let dir = &spec.output_dir;
    fs::create_dir_all(dir.join(TRIALS_DIR))?;

    let results: Vec<Result<(TrialReport, ManifestEntry)>> = (0..spec.trial_count())
        .into_par_iter()
        .map(|i| {
            let cfg = spec.trial_config(i);
            let report = run_trial(&cfg)?;
            let stem = format!("trial_{i:05}");
            let report_rel = format!("{TRIALS_DIR}/{stem}.json");
            let series_rel = format!("{TRIALS_DIR}/{stem}.csv");
            write_json(&dir.join(&report_rel), &report)?;
            emit_trajectory_csv(&report, &dir.join(&series_rel), spec.csv_stride)?;
            let entry = ManifestEntry {
                index: i,
                seed: cfg.seed,
                roll_deg: cfg.gap.roll_deg,
                pitch_deg: cfg.gap.pitch_deg,
                success: report.success,
                report: report_rel,
                timeseries: series_rel,
            };
            Ok((report, entry))
        })
        .collect();

    let mut reports = Vec::with_capacity(results.len());
    let mut entries = Vec::with_capacity(results.len());
    for r in results {
        let (report, entry) = r?;
        reports.push(report);
        entries.push(entry);
    }
    let stats = BatchStats::from_reports(&reports);
    write_json(&dir.join(SUMMARY_FILE), &stats)?;
    write_json(
        &dir.join(MANIFEST_FILE),
        &Manifest {
            format_version: 1,
            spec: spec.clone(),
            summary: SUMMARY_FILE.into(),
            trials: entries,
        },
    )?;
    Ok(stats)
}

/// Recomputes the batch statistics from the per-trial reports listed in the
/// manifest of a batch directory.
pub fn recompute_stats(dir: &Path) -> Result<BatchStats> {
    let manifest: Manifest = read_json(&dir.join(MANIFEST_FILE))?;
    let reports = manifest
        .trials
        .iter()
        .map(|e| read_json::<TrialReport>(&dir.join(&e.report)))
        .collect::<Result<Vec<_>>>()?;
    Ok(BatchStats::from_reports(&reports))
}

pub fn read_summary(dir: &Path) -> Result<BatchStats> {
    read_json(&dir.join(SUMMARY_FILE))
}

pub const CSV_HEADER: [&str; 27] = [
    "t", "true_px", "true_py", "true_pz", "true_vx", "true_vy", "true_vz", "true_roll", "true_pitch", "true_yaw",
    "est_px", "est_py", "est_pz", "est_vx", "est_vy", "est_vz", "est_roll", "est_pitch", "est_yaw", "ref_px",
    "ref_py", "ref_pz", "ref_vx", "ref_vy", "ref_vz", "phase", "detection",
];

/// One parsed time-series row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub values: [f64; 25],
    pub phase: Phase,
    pub detection: bool,
}

/// Writes the time series of a trial. With `stride > 1` only every
/// `stride`-th step is kept, plus the first step of each phase and the last.
pub fn emit_trajectory_csv(report: &TrialReport, path: &Path, stride: usize) -> Result<()> {
    let stride = stride.max(1);
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(|e| Error::Io(e.to_string()))?;
    let io = |e: csv::Error| Error::Io(e.to_string());
    w.write_record(CSV_HEADER).map_err(io)?;
    let n = report.samples.len();
    let mut prev_phase = None;
    for (i, s) in report.samples.iter().enumerate() {
        let keep = i % stride == 0 || prev_phase != Some(s.phase) || i + 1 == n;
        prev_phase = Some(s.phase);
        if !keep {
            continue;
        }
        let mut row: Vec<String> = Vec::with_capacity(CSV_HEADER.len());
        row.push(s.t.to_string());
        for v in [s.true_p, s.true_v, s.true_rpy, s.est_p, s.est_v, s.est_rpy, s.ref_p, s.ref_v] {
            row.extend(v.iter().map(|x| x.to_string()));
        }
        row.push(s.phase.as_str().into());
        row.push(if s.detection { "1" } else { "0" }.into());
        w.write_record(&row).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trajectory_csv(path: &Path) -> Result<Vec<CsvRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::Io(e.to_string()))?;
    let header = r.headers().map_err(|e| Error::Io(e.to_string()))?.clone();
    if header.iter().ne(CSV_HEADER.iter().copied()) {
        return Err(Error::Io(format!("{}: unexpected header", path.display())));
    }
    let bad = |what: &str| Error::Io(format!("{}: bad {what}", path.display()));
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| Error::Io(e.to_string()))?;
        let mut values = [0.0; 25];
        for (k, v) in values.iter_mut().enumerate() {
            *v = rec[k].parse().map_err(|_| bad("number"))?;
        }
        let phase = match &rec[25] {
            "approach" => Phase::Approach,
            "traverse" => Phase::Traverse,
            _ => return Err(bad("phase")),
        };
        let detection = match &rec[26] {
            "0" => false,
            "1" => true,
            _ => return Err(bad("detection flag")),
        };
        rows.push(CsvRow {
            values,
            phase,
            detection,
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraverseSummary {
    pub kind: String,
    pub gamma: f64,
    pub d: f64,
    pub t_c: f64,
    pub t_end: f64,
    pub p0: [f64; 3],
    pub v0: [f64; 3],
    pub thrust: f64,
    pub thrust_axis: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproachSummary {
    pub candidate_index: usize,
    pub cost: f64,
    pub start: [f64; 3],
    pub duration: f64,
    /// Per axis, ascending powers of time.
    pub coefficients: [[f64; 6]; 3],
    pub yaw_profile: Vec<f64>,
}

/// Serializable view of a trial plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanSummary {
    pub gap_roll_deg: f64,
    pub gap_pitch_deg: f64,
    pub traverse: TraverseSummary,
    pub approach: ApproachSummary,
}

impl PlanSummary {
    pub fn new(cfg: &TrialConfig, plan: &TrialPlan) -> Self {
        let tr = &plan.traverse;
        let v3 = |v: &Vector3<f64>| [v.x, v.y, v.z];
        Self {
            gap_roll_deg: cfg.gap.roll_deg,
            gap_pitch_deg: cfg.gap.pitch_deg,
            traverse: TraverseSummary {
                kind: format!("{:?}", tr.kind).to_lowercase(),
                gamma: tr.params.gamma,
                d: tr.params.d,
                t_c: tr.t_c,
                t_end: tr.t_end,
                p0: v3(&tr.p0),
                v0: v3(&tr.v0),
                thrust: tr.thrust_mag,
                thrust_axis: v3(&tr.thrust_axis(&cfg.gravity())),
            },
            approach: ApproachSummary {
                candidate_index: plan.candidate_index,
                cost: plan.cost,
                start: v3(&plan.approach.start.p),
                duration: plan.approach.duration,
                coefficients: plan.approach.coeffs,
                yaw_profile: plan.yaw_profile.clone(),
            },
        }
    }
}
