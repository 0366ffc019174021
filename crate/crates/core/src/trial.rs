//! Closed-loop execution of one gap traversal.
//!
//! A trial plans the traverse and the perception-aware approach against the
//! nominal gap, places the vehicle hovering at the chosen start, then flies the
//! approach with the estimator in the loop and a replan at every control step.
//! At the traverse start the inputs freeze to the constant traverse thrust
//! with zero body rates and stay there until the trial ends.
//!
//! The world frame is anchored to the gap: gap detections are relative poses,
//! and the estimator expresses them in the world frame through the nominal
//! gap pose.

use nalgebra::{Matrix3, Rotation3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::control::{attitude_for_heading, track, TrackingGains, TrackingReference};
use crate::dynamics::{ideal_imu, step_dynamics, BodyCommand, QuadState, VehicleSpec};
use crate::error::{Error, Result};
use crate::geometry::{matrix_to_rpy, plane_basis, so3_exp, ApproachSide, GapSpec, PlaneBasis};
use crate::perception::{
    plan_approach, replan, unwrap_angle, yaw_for_sample, CameraMount, PlanningContext, ReplanOutcome, SamplingConfig,
};
use crate::primitive::{FlatState, MotionPrimitive};
use crate::sensor::{
    estimator_step, gap_visible, measure_gap_pose, ImuNoise, ImuSample, MeasurementModel, PoseMeasurement,
    RelativePose, StateEstimate,
};
use crate::traverse::{optimize_traverse, TraverseSettings, TraverseTrajectory};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GapConfig {
    pub position: [f64; 3],
    pub roll_deg: f64,
    pub pitch_deg: f64,
    pub yaw_deg: f64,
    pub width: f64,
    pub height: f64,
}

impl Default for GapConfig {
    fn default() -> Self {
        Self {
            position: [0.0, 0.0, 2.0],
            roll_deg: 45.0,
            pitch_deg: 0.0,
            yaw_deg: 0.0,
            width: 0.8,
            height: 0.28,
        }
    }
}

impl GapConfig {
    pub fn spec(&self) -> Result<GapSpec<f64>> {
        GapSpec::from_rpy(
            Vector3::from(self.position),
            self.roll_deg.to_radians(),
            self.pitch_deg.to_radians(),
            self.yaw_deg.to_radians(),
            self.width,
            self.height,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CameraConfig {
    /// Cosine of the angle between body z-axis and optical axis.
    pub k: f64,
    pub fov_half_deg: f64,
}

impl Default for CameraConfig {
    fn default() -> Self {
        Self { k: 0.0, fov_half_deg: 90.0 }
    }
}

impl CameraConfig {
    pub fn mount(&self) -> CameraMount<f64> {
        CameraMount {
            k: self.k,
            fov_half: self.fov_half_deg.to_radians(),
        }
    }
}

/// Approach candidate grid, placed behind the gap along the direction of travel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ApproachConfig {
    pub distance: f64,
    pub half_extents: [f64; 3],
    pub counts: [usize; 3],
    pub duration_range: [f64; 2],
    pub duration_count: usize,
    pub theta_bar_deg: f64,
    pub d_bar: f64,
    pub cost_samples: usize,
    pub dt_check: f64,
    /// Replan at every control step.
    pub replan: bool,
}

impl Default for ApproachConfig {
    fn default() -> Self {
        Self {
            distance: 3.5,
            half_extents: [1.0, 1.0, 0.5],
            counts: [10, 10, 5],
            duration_range: [1.5, 4.0],
            duration_count: 8,
            theta_bar_deg: 10.0,
            d_bar: 4.0,
            cost_samples: 20,
            dt_check: crate::primitive::DEFAULT_DT_CHECK,
            replan: true,
        }
    }
}

impl ApproachConfig {
    pub fn sampling(&self, gap: &GapSpec<f64>, basis: &PlaneBasis<f64>) -> SamplingConfig<f64> {
        SamplingConfig::behind_gap(
            &gap.position,
            &basis.e2,
            self.distance,
            self.half_extents,
            self.counts,
            (self.duration_range[0], self.duration_range[1]),
            self.duration_count,
            self.theta_bar_deg.to_radians(),
            self.d_bar,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorMode {
    #[default]
    Ekf,
    /// The controller sees the true state.
    Perfect,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrialConfig {
    pub seed: u64,
    pub gap: GapConfig,
    pub vehicle: VehicleSpec,
    pub camera: CameraConfig,
    pub measurement: MeasurementModel,
    pub imu: ImuNoise,
    pub estimator: EstimatorMode,
    pub approach: ApproachConfig,
    pub traverse: TraverseSettings<f64>,
    pub approach_side: ApproachSide,
    pub gains: TrackingGains,
    pub control_rate: f64,
    pub sim_rate: f64,
    pub gravity: [f64; 3],
    /// Seconds before the traverse start during which every detection drops.
    pub blackout: f64,
    /// Speed at the end of the trial above which the run counts as failed, m/s.
    pub max_terminal_speed: f64,
}

impl Default for TrialConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            gap: GapConfig::default(),
            vehicle: VehicleSpec::default(),
            camera: CameraConfig::default(),
            measurement: MeasurementModel::default(),
            imu: ImuNoise::default(),
            estimator: EstimatorMode::Ekf,
            approach: ApproachConfig::default(),
            traverse: TraverseSettings::default(),
            approach_side: ApproachSide::default(),
            gains: TrackingGains::default(),
            control_rate: 50.0,
            sim_rate: 1000.0,
            gravity: [0.0, 0.0, -9.81],
            blackout: 0.0,
            max_terminal_speed: 10.0,
        }
    }
}

impl TrialConfig {
    /// Noise-free sensing with the controller fed the true state.
    pub fn noiseless(mut self) -> Self {
        self.measurement = MeasurementModel::noiseless();
        self.imu = ImuNoise {
            accel_std: 0.0,
            gyro_std: 0.0,
            accel_bias_std: 0.0,
            gyro_bias_std: 0.0,
        };
        self.estimator = EstimatorMode::Perfect;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.gap.spec()?;
        self.vehicle.validate()?;
        self.camera.mount().validate()?;
        self.measurement.validate()?;
        if self.gap.width - self.vehicle.size <= 0.0 || self.gap.height - self.vehicle.height <= 0.0 {
            return Err(Error::Config("vehicle does not fit through the gap".into()));
        }
        if !(self.control_rate > 0.0 && self.sim_rate >= self.control_rate) {
            return Err(Error::Config("need 0 < control_rate <= sim_rate".into()));
        }
        if self.sim_rate < 500.0 {
            return Err(Error::Config("sim_rate must be at least 500 Hz".into()));
        }
        let ratio = self.sim_rate / self.control_rate;
        if (ratio - ratio.round()).abs() > 1e-9 {
            return Err(Error::Config("sim_rate must be a multiple of control_rate".into()));
        }
        if !(self.blackout >= 0.0 && self.max_terminal_speed > 0.0) {
            return Err(Error::Config("blackout and terminal speed bound must be non-negative".into()));
        }
        if self.imu.accel_std < 0.0 || self.imu.gyro_std < 0.0 {
            return Err(Error::Config("IMU noise must be non-negative".into()));
        }
        if self.approach.cost_samples < 2 || self.approach.dt_check <= 0.0 {
            return Err(Error::Config("approach needs cost_samples >= 2 and dt_check > 0".into()));
        }
        Ok(())
    }

    pub fn gravity(&self) -> Vector3<f64> {
        Vector3::from(self.gravity)
    }

    pub fn planning_context(&self) -> PlanningContext<f64> {
        PlanningContext {
            mount: self.camera.mount(),
            limits: self.vehicle.limits,
            gravity: self.gravity(),
            dt_check: self.approach.dt_check,
            cost_samples: self.approach.cost_samples,
        }
    }
}

/// Traverse and approach chosen before take-off.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialPlan {
    pub gap: GapSpec<f64>,
    pub basis: PlaneBasis<f64>,
    pub traverse: TraverseTrajectory<f64>,
    pub approach: MotionPrimitive<f64>,
    pub yaw_profile: Vec<f64>,
    pub cost: f64,
    pub candidate_index: usize,
}

pub fn plan_trial(cfg: &TrialConfig) -> Result<TrialPlan> {
    let g = cfg.gravity();
    let gap = cfg.gap.spec()?;
    let basis = plane_basis(&gap, &g, cfg.approach_side)?;
    let (_, traverse) = optimize_traverse(&gap, &basis, &cfg.traverse, &g)?;
    let sampling = cfg.approach.sampling(&gap, &basis);
    let best = plan_approach(&sampling, &traverse, &gap, &cfg.planning_context())?;
    Ok(TrialPlan {
        gap,
        basis,
        traverse,
        approach: best.primitive,
        yaw_profile: best.yaw_profile,
        cost: best.cost,
        candidate_index: best.index,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Approach,
    Traverse,
}

impl Phase {
    pub fn as_str(&self) -> &'static str {
        match self {
            Phase::Approach => "approach",
            Phase::Traverse => "traverse",
        }
    }
}

/// State of the trial at the start of one simulation step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialSample {
    pub t: f64,
    pub true_p: Vector3<f64>,
    pub true_v: Vector3<f64>,
    pub true_rpy: Vector3<f64>,
    pub est_p: Vector3<f64>,
    pub est_v: Vector3<f64>,
    pub est_rpy: Vector3<f64>,
    pub ref_p: Vector3<f64>,
    pub ref_v: Vector3<f64>,
    pub phase: Phase,
    /// A gap detection was fused during this step.
    pub detection: bool,
    pub command: BodyCommand,
}

/// Deviation from the traverse when the gap center should be reached.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CenterError {
    pub position: [f64; 3],
    pub velocity: [f64; 3],
    /// Tilt of the body z-axis from the traverse thrust axis about `e1`, radians.
    pub roll: f64,
    /// Tilt about the in-plane axis orthogonal to `e1`, radians.
    pub pitch: f64,
}

impl CenterError {
    pub fn position_norm(&self) -> f64 {
        Vector3::from(self.position).norm()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub seed: u64,
    pub gap_roll_deg: f64,
    pub gap_pitch_deg: f64,
    pub success: bool,
    /// Why planning failed, when it did.
    pub planning_error: Option<String>,
    pub collision: bool,
    pub crossed_plane: bool,
    pub completed: bool,
    pub terminal_speed: f64,
    pub error_at_tc: Option<CenterError>,
    /// Position error when the traverse starts, meters.
    pub entry_error: Option<f64>,
    /// Smallest margin between the vehicle footprint and the gap edges at the
    /// plane crossing, meters; negative on collision.
    pub min_clearance: Option<f64>,
    pub t0: f64,
    pub t_c: f64,
    pub t_end: f64,
    pub replan_count: usize,
    pub replan_skipped: usize,
    pub detection_count: usize,
    pub traverse_commands_constant: bool,
    #[serde(skip)]
    pub samples: Vec<TrialSample>,
}

impl TrialReport {
    fn planning_failed(cfg: &TrialConfig, err: &Error) -> Self {
        Self {
            seed: cfg.seed,
            gap_roll_deg: cfg.gap.roll_deg,
            gap_pitch_deg: cfg.gap.pitch_deg,
            success: false,
            planning_error: Some(err.to_string()),
            collision: false,
            crossed_plane: false,
            completed: false,
            terminal_speed: 0.0,
            error_at_tc: None,
            entry_error: None,
            min_clearance: None,
            t0: 0.0,
            t_c: 0.0,
            t_end: 0.0,
            replan_count: 0,
            replan_skipped: 0,
            detection_count: 0,
            traverse_commands_constant: true,
            samples: Vec::new(),
        }
    }
}

/// Signed margin between a vehicle crossing the gap plane at `p` with body
/// z-axis `z_b` and the gap edges, along the long and short sides.
///
/// The vehicle is a disc of diameter `size` and thickness `height`; its extent
/// along a unit direction `n` is `size/2 * sqrt(1 - <z_b,n>^2) + height/2 * |<z_b,n>|`.
pub fn gap_clearance(gap: &GapSpec<f64>, vehicle: &VehicleSpec, p: &Vector3<f64>, z_b: &Vector3<f64>) -> (f64, f64) {
    let support = |n: &Vector3<f64>| {
        let c = z_b.dot(n).clamp(-1.0, 1.0);
        0.5 * vehicle.size * (1.0 - c * c).sqrt() + 0.5 * vehicle.height * c.abs()
    };
    let rel = p - gap.position;
    let (long, short) = (gap.long_axis(), gap.short_axis());
    (
        0.5 * gap.width - rel.dot(&long).abs() - support(&long),
        0.5 * gap.height - rel.dot(&short).abs() - support(&short),
    )
}

fn gaussian3(rng: &mut ChaCha8Rng, std: f64) -> Vector3<f64> {
    let mut draw = || -> f64 { StandardNormal.sample(&mut *rng) };
    Vector3::new(draw(), draw(), draw()) * std
}

fn rpy(r: &Matrix3<f64>) -> Vector3<f64> {
    let (a, b, c) = matrix_to_rpy(r);
    Vector3::new(a, b, c)
}

struct ApproachReference<'a> {
    primitive: MotionPrimitive<f64>,
    start: f64,
    gap: &'a GapSpec<f64>,
    k: f64,
    g: Vector3<f64>,
    yaw: f64,
}

impl ApproachReference<'_> {
    fn flat(&self, t: f64) -> (FlatState<f64>, Vector3<f64>) {
        let s = self.primitive.eval((t - self.start).clamp(0.0, self.primitive.duration));
        (FlatState { p: s.p, v: s.v, a: s.a }, s.j)
    }

    fn yaw_at(&self, t: f64, near: f64) -> f64 {
        let (f, _) = self.flat(t);
        yaw_for_sample(&f.p, &f.a, &self.gap.position, self.k, &self.g).map_or(near, |(y, _)| unwrap_angle(near, y))
    }

    fn reference(&mut self, t: f64, dt: f64) -> TrackingReference {
        let (flat, jerk) = self.flat(t);
        self.yaw = self.yaw_at(t, self.yaw);
        let ahead = self.yaw_at(t + dt, self.yaw);
        TrackingReference {
            flat,
            jerk,
            yaw: self.yaw,
            yaw_rate: (ahead - self.yaw) / dt,
        }
    }
}

/// Runs one closed-loop trial. Planning failures are reported, not returned
/// as errors; only an invalid configuration is.
pub fn run_trial(cfg: &TrialConfig) -> Result<TrialReport> {
    cfg.validate()?;
    let plan = match plan_trial(cfg) {
        Ok(p) => p,
        Err(e @ (Error::NoFeasibleCandidate | Error::Infeasible | Error::DegenerateGap(_))) => {
            return Ok(TrialReport::planning_failed(cfg, &e));
        }
        Err(e) => return Err(e),
    };
    Ok(execute(cfg, &plan))
}

/// Flies a precomputed plan.
pub fn execute(cfg: &TrialConfig, plan: &TrialPlan) -> TrialReport {
    let g = cfg.gravity();
    let gap = &plan.gap;
    let traverse = &plan.traverse;
    let mount = cfg.camera.mount();
    let ctx = cfg.planning_context();
    let model = cfg.measurement;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let sim_dt = 1.0 / cfg.sim_rate;
    let ctrl_every = (cfg.sim_rate / cfg.control_rate).round() as u64;
    let ctrl_dt = ctrl_every as f64 * sim_dt;
    let det_dt = if model.rate > 0.0 { 1.0 / model.rate } else { f64::INFINITY };
    let t0 = plan.approach.duration;
    let t_cross = t0 + traverse.t_c;
    let t_stop = t0 + traverse.t_end;

    let mut reference = ApproachReference {
        primitive: plan.approach.clone(),
        start: 0.0,
        gap,
        k: mount.k,
        g,
        yaw: plan.yaw_profile.first().copied().unwrap_or(0.0),
    };
    let start_att = attitude_for_heading(&Vector3::z(), reference.yaw, mount.k, &Vector3::x());
    let mut state = QuadState::hover(plan.approach.start.p, Rotation3::from_matrix_unchecked(start_att));

    // Initial estimate: one second of hover detections at the start point.
    let d_start = (gap.position - state.p).norm();
    let n_pre = model.rate.max(1.0).sqrt();
    let sig = [
        model.position_std(d_start) / n_pre,
        0.01,
        model.rotation_std(d_start) / n_pre,
    ];
    let truth_estimate = |s: &QuadState, age: f64| {
        let mut e = StateEstimate::new(s.p, s.v, *s.rotation.matrix(), [0.0; 3]);
        e.last_detection_age = age;
        e
    };
    let mut est = match cfg.estimator {
        EstimatorMode::Perfect => truth_estimate(&state, 0.0),
        EstimatorMode::Ekf => {
            let mut e = StateEstimate::new(
                state.p + gaussian3(&mut rng, sig[0]),
                gaussian3(&mut rng, sig[1]),
                state.rotation.matrix() * so3_exp(&gaussian3(&mut rng, sig[2])),
                sig,
            );
            for i in 0..9 {
                e.covariance[(i, i)] = e.covariance[(i, i)].max(1e-12);
            }
            e
        }
    };

    let accel_bias = gaussian3(&mut rng, cfg.imu.accel_bias_std);
    let gyro_bias = gaussian3(&mut rng, cfg.imu.gyro_bias_std);

    let traverse_cmd = BodyCommand {
        thrust: traverse.thrust_mag,
        rates: Vector3::zeros(),
    };
    let mut cmd = BodyCommand {
        thrust: -g.z,
        rates: Vector3::zeros(),
    };
    let mut report = TrialReport {
        seed: cfg.seed,
        gap_roll_deg: cfg.gap.roll_deg,
        gap_pitch_deg: cfg.gap.pitch_deg,
        success: false,
        planning_error: None,
        collision: false,
        crossed_plane: false,
        completed: false,
        terminal_speed: 0.0,
        error_at_tc: None,
        entry_error: None,
        min_clearance: None,
        t0,
        t_c: traverse.t_c,
        t_end: traverse.t_end,
        replan_count: 0,
        replan_skipped: 0,
        detection_count: 0,
        traverse_commands_constant: true,
        samples: Vec::with_capacity((t_stop * cfg.sim_rate) as usize + 8),
    };

    let normal = gap.normal();
    let mut t = 0.0;
    let mut step: u64 = 0;
    let mut next_detection = det_dt;
    let mut phase = Phase::Approach;
    let mut tc_done = false;

    while t < t_stop {
        if phase == Phase::Approach && t >= t0 {
            phase = Phase::Traverse;
            report.entry_error = Some((state.p - traverse.p0).norm());
        }
        match phase {
            Phase::Approach => {
                if step.is_multiple_of(ctrl_every) {
                    if cfg.approach.replan && step > 0 {
                        let current = FlatState {
                            p: est.p,
                            v: est.v,
                            a: reference.flat(t).0.a,
                        };
                        match replan(&current, traverse, t0 - t, &ctx) {
                            ReplanOutcome::NewPrimitive(p) => {
                                reference.primitive = p;
                                reference.start = t;
                                report.replan_count += 1;
                            }
                            ReplanOutcome::KeepLast(_) => report.replan_skipped += 1,
                        }
                    }
                    let ref_now = reference.reference(t, ctrl_dt);
                    cmd = track(&ref_now, &est, &cfg.gains, mount.k, &cfg.vehicle.actuator_limits, &g);
                }
            }
            Phase::Traverse => cmd = traverse_cmd,
        }

        // Land exactly on the phase switch and the traverse events.
        let mut t_next = match phase {
            Phase::Approach => ((step + 1) as f64 * sim_dt).min(t0),
            Phase::Traverse => t + sim_dt,
        };
        for event in [t0, t_cross, t_stop] {
            if event > t && (event < t_next || event - t_next < 1e-9) {
                t_next = event;
                break;
            }
        }
        let dt = t_next - t;
        let (ref_p, ref_v) = match phase {
            Phase::Approach => {
                let (f, _) = reference.flat(t);
                (f.p, f.v)
            }
            Phase::Traverse => (traverse.position(t - t0), traverse.velocity(t - t0)),
        };

        let next = step_dynamics(&state, &cmd, dt, cfg.vehicle.rate_time_constant, &g);

        let s_before = (state.p - gap.position).dot(&normal);
        let s_after = (next.p - gap.position).dot(&normal);
        if !report.crossed_plane && s_before.signum() != s_after.signum() && s_after != 0.0 {
            report.crossed_plane = true;
            let lambda = s_before / (s_before - s_after);
            let p = state.p + (next.p - state.p) * lambda;
            let z = state.rotation.slerp(&next.rotation, lambda).matrix().column(2).into_owned();
            let (long, short) = gap_clearance(gap, &cfg.vehicle, &p, &z);
            let clearance = long.min(short);
            report.min_clearance = Some(clearance);
            report.collision = clearance < 0.0;
        }

        let mut detection = false;
        let mut meas = None;
        if t_next + 1e-12 >= next_detection {
            next_detection += det_dt;
            let blackout = phase == Phase::Approach && t_next > t0 - cfg.blackout;
            let dropped = rng.random::<f64>() < model.p_dropout;
            let m = next.rotation.matrix();
            let dist = (gap.position - next.p).norm();
            if !blackout && !dropped && gap_visible(&next.p, m, gap, &mount, next.omega.norm(), &model) {
                let rel = RelativePose::from_world(&next.p, m, gap);
                if let Ok(z) = measure_gap_pose(&rel, dist, &model, &mut rng) {
                    let (position, rotation, covariance) = z.to_world(gap);
                    meas = Some(PoseMeasurement {
                        position,
                        rotation,
                        covariance,
                    });
                    detection = true;
                    report.detection_count += 1;
                }
            }
        }

        report.samples.push(TrialSample {
            t,
            true_p: state.p,
            true_v: state.v,
            true_rpy: rpy(state.rotation.matrix()),
            est_p: est.p,
            est_v: est.v,
            est_rpy: rpy(&est.rotation),
            ref_p,
            ref_v,
            phase,
            detection,
            command: cmd,
        });

        est = match cfg.estimator {
            EstimatorMode::Perfect => {
                truth_estimate(&next, if detection { 0.0 } else { est.last_detection_age + dt })
            }
            EstimatorMode::Ekf => {
                let (accel, gyro) = ideal_imu(&cmd, &state, &next, dt);
                let imu = ImuSample::noisy(accel + accel_bias, gyro + gyro_bias, &cfg.imu, &mut rng);
                estimator_step(&est, &imu, meas.as_ref(), dt, &cfg.imu, &g)
            }
        };
        state = next;
        t = t_next;
        step += 1;

        if !tc_done && t == t_cross {
            tc_done = true;
            report.error_at_tc = Some(center_error(&state, traverse, &plan.basis, &g));
        }
    }

    let mut traverse_cmds = report.samples.iter().filter(|s| s.phase == Phase::Traverse).map(|s| s.command);
    let first = traverse_cmds.next();
    report.traverse_commands_constant = traverse_cmds.all(|c| Some(c) == first);
    report.completed = tc_done && t == t_stop;
    report.terminal_speed = state.v.norm();
    report.success = report.completed
        && report.crossed_plane
        && !report.collision
        && report.terminal_speed <= cfg.max_terminal_speed;
    report
}

fn center_error(
    s: &QuadState,
    traverse: &TraverseTrajectory<f64>,
    basis: &PlaneBasis<f64>,
    g: &Vector3<f64>,
) -> CenterError {
    let z_des = traverse.thrust_axis(g);
    let side = z_des.cross(&basis.e1);
    let z_b = s.z_b();
    CenterError {
        position: (s.p - traverse.gap_center).into(),
        velocity: (s.v - traverse.velocity(traverse.t_c)).into(),
        roll: (-z_b.dot(&side)).atan2(z_b.dot(&z_des)),
        pitch: z_b.dot(&basis.e1).atan2(z_b.dot(&z_des)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clearance_margins_match_paper_geometry() {
        let gap = GapConfig::default().spec().unwrap();
        let vehicle = VehicleSpec::default();
        let z = gap.short_axis();
        let (long, short) = gap_clearance(&gap, &vehicle, &gap.position, &z);
        assert!((long - 0.125).abs() < 1e-12);
        assert!((short - 0.08).abs() < 1e-12);
    }

    #[test]
    fn grazing_the_edge_flips_the_verdict() {
        let gap = GapConfig::default().spec().unwrap();
        let vehicle = VehicleSpec::default();
        let z = gap.short_axis();
        for (axis, margin) in [(gap.long_axis(), 0.125), (gap.short_axis(), 0.08)] {
            for sign in [1.0, -1.0] {
                let inside = gap.position + axis * sign * (margin - 1e-3);
                let outside = gap.position + axis * sign * (margin + 1e-3);
                let (a, b) = gap_clearance(&gap, &vehicle, &inside, &z);
                assert!(a.min(b) > 0.0);
                let (a, b) = gap_clearance(&gap, &vehicle, &outside, &z);
                assert!(a.min(b) < 0.0);
            }
        }
    }

    #[test]
    fn vehicle_that_does_not_fit_is_rejected() {
        let mut cfg = TrialConfig::default();
        cfg.gap.height = 0.1;
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        let cfg = TrialConfig {
            sim_rate: 10.0,
            ..TrialConfig::default()
        };
        assert!(cfg.validate().is_err());
    }
}
