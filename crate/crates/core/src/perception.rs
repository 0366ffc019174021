//! Perception-aware approach planning.
//!
//! The camera is rigidly mounted so that its optical axis makes a fixed angle
//! with the body z-axis (`<r3, z_b> = k`). Given the thrust direction imposed
//! by the trajectory, the only free rotation is yaw; it is chosen to bring the
//! optical axis as close as possible to the bearing of the gap center.
//! Approach candidates are scored by how well the gap stays centered and how
//! far from the gap they start.

use nalgebra::Vector3;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::GapSpec;
use crate::primitive::{check_feasibility, min_jerk_primitive, FeasibilityVerdict, FlatState, InputLimits, MotionPrimitive};
use crate::scalar::Real;
use crate::traverse::TraverseTrajectory;

const DEGENERATE_NORM: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraMount<T: Real> {
    /// Cosine of the angle between the body z-axis and the optical axis.
    pub k: T,
    /// Half field of view, radians.
    pub fov_half: T,
}

impl<T: Real> Default for CameraMount<T> {
    /// Forward-facing fisheye with a 180 degree lens.
    fn default() -> Self {
        Self {
            k: T::zero(),
            fov_half: T::frac_pi_2(),
        }
    }
}

impl<T: Real> CameraMount<T> {
    pub fn validate(&self) -> Result<()> {
        if self.k.abs() > T::one() {
            return Err(Error::Config(format!("camera k = {} outside [-1, 1]", self.k)));
        }
        if !(self.fov_half > T::zero() && self.fov_half <= T::frac_pi_2() + T::lit(1e-6)) {
            return Err(Error::Config(format!("camera half field of view {} outside (0, pi/2]", self.fov_half)));
        }
        Ok(())
    }

    /// Optical axis for a body frame given by its x and z axes.
    pub fn optical_axis(&self, x_b: &Vector3<T>, z_b: &Vector3<T>) -> Vector3<T> {
        x_b * (T::one() - self.k * self.k).max(T::zero()).sqrt() + z_b * self.k
    }
}

/// Unit vector closest to the bearing `p_g - p_c` among those making
/// `<x, z_b> = k`.
pub fn ideal_optical_axis<T: Real>(p_c: &Vector3<T>, z_b: &Vector3<T>, p_g: &Vector3<T>, k: T) -> Result<Vector3<T>> {
    let d = p_g - p_c;
    let d_perp = d - z_b * d.dot(z_b);
    let n = d_perp.norm();
    if n < T::lit(DEGENERATE_NORM) {
        return Err(Error::DegenerateBearing);
    }
    Ok(d_perp * ((T::one() - k * k).max(T::zero()).sqrt() / n) + z_b * k)
}

/// Smallest angle achievable between the optical axis and the gap bearing.
///
/// Evaluated as the difference between the polar angle of the bearing and the
/// fixed polar angle of the optical axis, both measured from `z_b`; its cosine
/// is `(sqrt(1 - k^2) |d_perp| + k <d, z_b>) / |d|`.
pub fn min_view_angle<T: Real>(p_c: &Vector3<T>, z_b: &Vector3<T>, p_g: &Vector3<T>, k: T) -> Result<T> {
    let d = p_g - p_c;
    let along = d.dot(z_b);
    let perp = (d - z_b * along).norm();
    if perp < T::lit(DEGENERATE_NORM) {
        return Err(Error::DegenerateBearing);
    }
    let bearing_polar = perp.atan2(along);
    let axis_polar = (T::one() - k * k).max(T::zero()).sqrt().atan2(k);
    let theta = (bearing_polar - axis_polar).abs();
    // Sub-ulp differences of the two polar angles are rounding, not geometry.
    if theta <= T::default_epsilon() * T::lit(8.0) {
        Ok(T::zero())
    } else {
        Ok(theta.min(T::pi()))
    }
}

/// Heading of the horizontal projection of the axis.
pub fn yaw_from_axis<T: Real>(axis: &Vector3<T>) -> Result<T> {
    if axis.x.hypot(axis.y) < T::lit(DEGENERATE_NORM) {
        return Err(Error::DegenerateHeading);
    }
    Ok(axis.y.atan2(axis.x))
}

/// Shifts `angle` by multiples of 2 pi to lie within pi of `reference`.
pub fn unwrap_angle<T: Real>(reference: T, angle: T) -> T {
    let two_pi = T::two_pi();
    let mut a = angle;
    while a - reference > T::pi() {
        a -= two_pi;
    }
    while a - reference < -T::pi() {
        a += two_pi;
    }
    a
}

/// Desired yaw for a flat-output sample; `None` when the bearing or heading
/// is degenerate.
pub fn yaw_for_sample<T: Real>(
    p: &Vector3<T>,
    a: &Vector3<T>,
    p_g: &Vector3<T>,
    k: T,
    g: &Vector3<T>,
) -> Option<(T, T)> {
    let f = a - g;
    let fn_ = f.norm();
    if fn_ <= T::zero() {
        return None;
    }
    let z_b = f / fn_;
    let axis = ideal_optical_axis(p, &z_b, p_g, k).ok()?;
    let theta = min_view_angle(p, &z_b, p_g, k).ok()?;
    let yaw = yaw_from_axis(&axis).ok()?;
    Some((yaw, theta))
}

/// Grid of approach start positions and durations, and the cost normalizers.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingConfig<T: Real> {
    pub start_box: [(T, T); 3],
    pub duration_range: (T, T),
    pub position_counts: [usize; 3],
    pub duration_count: usize,
    /// Angle normalizer, radians.
    pub theta_bar: T,
    /// Distance normalizer, meters.
    pub d_bar: T,
}

fn grid<T: Real>(range: (T, T), count: usize, i: usize) -> T {
    if count == 1 {
        T::lit(0.5) * (range.0 + range.1)
    } else {
        range.0 + (range.1 - range.0) * T::from_usize_lossy(i) / T::from_usize_lossy(count - 1)
    }
}

impl<T: Real> SamplingConfig<T> {
    /// Box of the given half extents centered `distance` behind the gap along
    /// the direction of travel.
    pub fn behind_gap(
        gap_center: &Vector3<T>,
        travel_dir: &Vector3<T>,
        distance: T,
        half_extents: [T; 3],
        position_counts: [usize; 3],
        duration_range: (T, T),
        duration_count: usize,
        theta_bar: T,
        d_bar: T,
    ) -> Self {
        let c = gap_center - travel_dir * distance;
        Self {
            start_box: [
                (c.x - half_extents[0], c.x + half_extents[0]),
                (c.y - half_extents[1], c.y + half_extents[1]),
                (c.z - half_extents[2], c.z + half_extents[2]),
            ],
            duration_range,
            position_counts,
            duration_count,
            theta_bar,
            d_bar,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok_box = self.start_box.iter().all(|(lo, hi)| lo <= hi);
        let ok_dur = self.duration_range.0 > T::zero() && self.duration_range.0 <= self.duration_range.1;
        let ok_counts = self.position_counts.iter().all(|&c| c >= 1) && self.duration_count >= 1;
        if ok_box && ok_dur && ok_counts && self.theta_bar > T::zero() && self.d_bar > T::zero() {
            Ok(())
        } else {
            Err(Error::Config("invalid sampling configuration".into()))
        }
    }

    pub fn candidate_count(&self) -> usize {
        self.position_counts.iter().product::<usize>() * self.duration_count
    }

    /// Start position and duration of candidate `index`, enumerated
    /// lexicographically in (x, y, z, duration).
    pub fn candidate(&self, index: usize) -> (Vector3<T>, T) {
        let [nx, ny, nz] = self.position_counts;
        let nt = self.duration_count;
        let it = index % nt;
        let rest = index / nt;
        let iz = rest % nz;
        let rest = rest / nz;
        let iy = rest % ny;
        let ix = rest / ny;
        debug_assert!(ix < nx);
        (
            Vector3::new(
                grid(self.start_box[0], nx, ix),
                grid(self.start_box[1], ny, iy),
                grid(self.start_box[2], nz, iz),
            ),
            grid(self.duration_range, nt, it),
        )
    }
}

/// Everything the approach planner needs besides the grid and the traverse.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanningContext<T: Real> {
    pub mount: CameraMount<T>,
    pub limits: InputLimits<T>,
    pub gravity: Vector3<T>,
    pub dt_check: T,
    /// Samples used for the RMS view angle of a candidate.
    pub cost_samples: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateCost<T: Real> {
    pub theta_rms: T,
    pub d0: T,
    pub cost: T,
    pub yaw_profile: Vec<T>,
    /// Samples dropped because the bearing or heading was degenerate.
    pub excluded: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateTrajectory<T: Real> {
    pub primitive: MotionPrimitive<T>,
    pub yaw_profile: Vec<T>,
    pub theta_rms: T,
    pub d0: T,
    pub cost: T,
    pub feasibility: FeasibilityVerdict<T>,
    /// Position of the candidate in the sampling grid.
    pub index: usize,
}

/// Perception cost `theta_rms / theta_bar + d0 / d_bar` of a primitive.
pub fn candidate_cost<T: Real>(
    prim: &MotionPrimitive<T>,
    gap: &GapSpec<T>,
    mount: &CameraMount<T>,
    cfg: &SamplingConfig<T>,
    n_samples: usize,
    g: &Vector3<T>,
) -> Result<CandidateCost<T>> {
    if n_samples < 2 {
        return Err(Error::Config("need at least two cost samples".into()));
    }
    let last = T::from_usize_lossy(n_samples - 1);
    let mut sum_sq = T::zero();
    let mut used = 0usize;
    let mut yaw_profile = Vec::with_capacity(n_samples);
    let mut prev_yaw: Option<T> = None;
    for i in 0..n_samples {
        let t = prim.duration * T::from_usize_lossy(i) / last;
        let s = prim.eval(t);
        match yaw_for_sample(&s.p, &s.a, &gap.position, mount.k, g) {
            Some((yaw, theta)) => {
                sum_sq += theta * theta;
                used += 1;
                let yaw = prev_yaw.map_or(yaw, |p| unwrap_angle(p, yaw));
                prev_yaw = Some(yaw);
                yaw_profile.push(yaw);
            }
            None => yaw_profile.push(prev_yaw.unwrap_or(T::zero())),
        }
    }
    let excluded = n_samples - used;
    if used == 0 || excluded * 10 > n_samples {
        return Err(Error::DegenerateBearing);
    }
    let theta_rms = (sum_sq / T::from_usize_lossy(used)).sqrt();
    let d0 = (prim.start.p - gap.position).norm();
    Ok(CandidateCost {
        theta_rms,
        d0,
        cost: theta_rms / cfg.theta_bar + d0 / cfg.d_bar,
        yaw_profile,
        excluded,
    })
}

/// Entry state of the traverse: the state the approach must end in.
pub fn traverse_entry<T: Real>(traverse: &TraverseTrajectory<T>) -> FlatState<T> {
    FlatState {
        p: traverse.p0,
        v: traverse.v0,
        a: traverse.g_pi,
    }
}

fn evaluate_candidate<T: Real>(
    index: usize,
    sampling: &SamplingConfig<T>,
    entry: &FlatState<T>,
    gap: &GapSpec<T>,
    ctx: &PlanningContext<T>,
) -> Option<CandidateTrajectory<T>> {
    let (start, duration) = sampling.candidate(index);
    let prim = min_jerk_primitive(&FlatState::rest(start), entry, duration).ok()?;
    let feasibility = check_feasibility(&prim, &ctx.limits, &ctx.gravity, ctx.dt_check);
    if !feasibility.is_feasible() {
        return None;
    }
    let cost = candidate_cost(&prim, gap, &ctx.mount, sampling, ctx.cost_samples, &ctx.gravity).ok()?;
    if !cost.cost.is_finite() {
        return None;
    }
    Some(CandidateTrajectory {
        primitive: prim,
        yaw_profile: cost.yaw_profile,
        theta_rms: cost.theta_rms,
        d0: cost.d0,
        cost: cost.cost,
        feasibility,
        index,
    })
}

/// Exhaustively scores the sampling grid and returns the feasible candidate
/// of least cost. Ties go to the lexicographically smallest grid entry, so the
/// result does not depend on evaluation order.
pub fn plan_approach<T: Real>(
    sampling: &SamplingConfig<T>,
    traverse: &TraverseTrajectory<T>,
    gap: &GapSpec<T>,
    ctx: &PlanningContext<T>,
) -> Result<CandidateTrajectory<T>> {
    sampling.validate()?;
    let entry = traverse_entry(traverse);
    (0..sampling.candidate_count())
        .into_par_iter()
        .filter_map(|i| evaluate_candidate(i, sampling, &entry, gap, ctx))
        .reduce_with(|a, b| {
            if b.cost < a.cost || (b.cost == a.cost && b.index < a.index) {
                b
            } else {
                a
            }
        })
        .ok_or(Error::NoFeasibleCandidate)
}

#[derive(Debug, Clone, PartialEq)]
pub enum ReplanOutcome<T: Real> {
    NewPrimitive(MotionPrimitive<T>),
    /// Verification failed; keep flying the previous approach.
    KeepLast(FeasibilityVerdict<T>),
}

/// Re-plans the rest of the approach from the current state to the traverse
/// entry state.
pub fn replan<T: Real>(
    current: &FlatState<T>,
    traverse: &TraverseTrajectory<T>,
    t_remaining: T,
    ctx: &PlanningContext<T>,
) -> ReplanOutcome<T> {
    let Ok(prim) = min_jerk_primitive(current, &traverse_entry(traverse), t_remaining) else {
        return ReplanOutcome::KeepLast(FeasibilityVerdict::Indeterminate);
    };
    match check_feasibility(&prim, &ctx.limits, &ctx.gravity, ctx.dt_check) {
        FeasibilityVerdict::Feasible => ReplanOutcome::NewPrimitive(prim),
        other => ReplanOutcome::KeepLast(other),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{plane_basis, ApproachSide};
    use crate::primitive::DEFAULT_DT_CHECK;
    use crate::traverse::{optimize_traverse, TraverseSettings};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    fn g() -> Vector3<f64> {
        Vector3::new(0.0, 0.0, -9.81)
    }

    fn ctx() -> PlanningContext<f64> {
        PlanningContext {
            mount: CameraMount::default(),
            limits: InputLimits::default(),
            gravity: g(),
            dt_check: DEFAULT_DT_CHECK,
            cost_samples: 20,
        }
    }

    #[test]
    fn horizontal_camera_horizontal_bearing() {
        let z = Vector3::z();
        let r = ideal_optical_axis(&Vector3::zeros(), &z, &Vector3::new(1.0, 1.0, 0.0), 0.0).unwrap();
        assert_abs_diff_eq!(r, Vector3::new(1.0, 1.0, 0.0) / 2f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(yaw_from_axis(&r).unwrap(), FRAC_PI_4, epsilon = 1e-15);
    }

    #[test]
    fn alignment_case_gives_zero_angle() {
        let z = Vector3::z();
        let d = Vector3::new(2.0, -1.0, 0.0);
        assert_eq!(min_view_angle(&Vector3::zeros(), &z, &d, 0.0).unwrap(), 0.0);
        let r = ideal_optical_axis(&Vector3::zeros(), &z, &d, 0.0).unwrap();
        assert_abs_diff_eq!(r, d.normalize(), epsilon = 1e-15);
        // tilted camera, bearing on the mount cone
        let k = 0.6;
        let d = Vector3::new(0.8, 0.0, 0.6) * 3.0;
        assert_eq!(min_view_angle(&Vector3::zeros(), &z, &d, k).unwrap(), 0.0);
        assert_abs_diff_eq!(ideal_optical_axis(&Vector3::zeros(), &z, &d, k).unwrap(), d.normalize(), epsilon = 1e-12);
    }

    #[test]
    fn forty_five_degree_bearing() {
        let theta = min_view_angle(&Vector3::zeros(), &Vector3::z(), &Vector3::new(1.0, 0.0, 1.0), 0.0).unwrap();
        assert_abs_diff_eq!(theta, FRAC_PI_4, epsilon = 1e-15);
    }

    #[test]
    fn degenerate_bearing_and_heading() {
        let z = Vector3::z();
        let above = Vector3::new(0.0, 0.0, 2.0);
        assert_eq!(ideal_optical_axis(&Vector3::zeros(), &z, &above, 0.0), Err(Error::DegenerateBearing));
        assert_eq!(min_view_angle(&Vector3::zeros(), &z, &above, 0.0), Err(Error::DegenerateBearing));
        assert_eq!(yaw_from_axis(&Vector3::new(0.0, 0.0, 1.0)), Err(Error::DegenerateHeading));
    }

    #[test]
    fn yaw_anchors_and_unwrap() {
        assert_eq!(yaw_from_axis(&Vector3::new(1.0, 0.0, 0.0)).unwrap(), 0.0);
        assert_abs_diff_eq!(yaw_from_axis(&Vector3::new(0.0, 1.0, 0.0)).unwrap(), FRAC_PI_2, epsilon = 1e-15);
        // sequence crossing the +-pi seam
        let raw: Vec<f64> = (0..40)
            .map(|i| {
                let a = 2.8 + 0.02 * i as f64;
                yaw_from_axis(&Vector3::new(a.cos(), a.sin(), 0.3)).unwrap()
            })
            .collect();
        assert!(raw.windows(2).any(|w| (w[1] - w[0]).abs() > PI));
        let mut unwrapped = vec![raw[0]];
        for &y in &raw[1..] {
            unwrapped.push(unwrap_angle(*unwrapped.last().unwrap(), y));
        }
        assert!(unwrapped.windows(2).all(|w| (w[1] - w[0]).abs() < PI));
        assert_abs_diff_eq!(unwrapped[39], 2.8 + 0.78, epsilon = 1e-12);
    }

    fn straight_level_primitive(start: Vector3<f64>, end: Vector3<f64>) -> MotionPrimitive<f64> {
        // constant velocity, zero acceleration: level flight straight at the gap
        let v = (end - start) / 2.0;
        min_jerk_primitive(
            &FlatState { p: start, v, a: Vector3::zeros() },
            &FlatState { p: end, v, a: Vector3::zeros() },
            2.0,
        )
        .unwrap()
    }

    fn sampling_cfg() -> SamplingConfig<f64> {
        SamplingConfig {
            start_box: [(-4.0, -3.0), (-0.5, 0.5), (-0.2, 0.2)],
            duration_range: (1.5, 3.0),
            position_counts: [2, 2, 2],
            duration_count: 2,
            theta_bar: 10f64.to_radians(),
            d_bar: 4.0,
        }
    }

    #[test]
    fn straight_approach_has_zero_view_angle() {
        let gap = GapSpec::from_rpy(Vector3::zeros(), 0.0, 0.0, 0.0, 0.8, 0.28).unwrap();
        let prim = straight_level_primitive(Vector3::new(-3.0, 0.0, 0.0), Vector3::new(-0.5, 0.0, 0.0));
        let cfg = sampling_cfg();
        let c = candidate_cost(&prim, &gap, &CameraMount::default(), &cfg, 25, &g()).unwrap();
        assert!(c.theta_rms < 1e-12);
        assert_abs_diff_eq!(c.d0, 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(c.cost, 3.0 / 4.0, epsilon = 1e-12);
        assert_eq!(c.excluded, 0);
        assert!(c.yaw_profile.iter().all(|y| y.abs() < 1e-12));

        // doubling d0 doubles the distance term
        let far = straight_level_primitive(Vector3::new(-6.0, 0.0, 0.0), Vector3::new(-0.5, 0.0, 0.0));
        let c2 = candidate_cost(&far, &gap, &CameraMount::default(), &cfg, 25, &g()).unwrap();
        assert_abs_diff_eq!(c2.d0 / cfg.d_bar, 2.0 * c.d0 / cfg.d_bar, epsilon = 1e-12);
    }

    #[test]
    fn cost_matches_two_pass_evaluation() {
        let gap = GapSpec::from_rpy(Vector3::zeros(), 0.5, 0.2, 0.0, 0.8, 0.28).unwrap();
        let prim = min_jerk_primitive(
            &FlatState::rest(Vector3::new(-3.2, 0.4, 0.3)),
            &FlatState {
                p: Vector3::new(-0.3, 0.05, 0.1),
                v: Vector3::new(2.5, 0.2, -0.5),
                a: Vector3::new(1.0, -3.0, -2.0),
            },
            2.2,
        )
        .unwrap();
        let cfg = sampling_cfg();
        let c = candidate_cost(&prim, &gap, &CameraMount::default(), &cfg, 30, &g()).unwrap();
        // separate angle list from the cosine law, then RMS
        let angles: Vec<f64> = (0..30)
            .map(|i| {
                let s = prim.eval(2.2 * i as f64 / 29.0);
                let z = (s.a - g()).normalize();
                let d = gap.position - s.p;
                let perp = (d - z * d.dot(&z)).norm();
                (perp / d.norm()).clamp(-1.0, 1.0).acos()
            })
            .collect();
        let rms = (angles.iter().map(|a| a * a).sum::<f64>() / angles.len() as f64).sqrt();
        let j = rms / cfg.theta_bar + (prim.start.p - gap.position).norm() / cfg.d_bar;
        assert_abs_diff_eq!(c.cost, j, epsilon = 1e-9);
    }

    #[test]
    fn too_few_samples_rejected() {
        let gap = GapSpec::from_rpy(Vector3::zeros(), 0.0, 0.0, 0.0, 0.8, 0.28).unwrap();
        let prim = straight_level_primitive(Vector3::new(-3.0, 0.0, 0.0), Vector3::new(-0.5, 0.0, 0.0));
        assert!(candidate_cost(&prim, &gap, &CameraMount::default(), &sampling_cfg(), 1, &g()).is_err());
    }

    #[test]
    fn grid_enumeration_is_lexicographic() {
        let cfg = sampling_cfg();
        assert_eq!(cfg.candidate_count(), 16);
        let all: Vec<_> = (0..16).map(|i| cfg.candidate(i)).collect();
        for w in all.windows(2) {
            let a = (w[0].0.x, w[0].0.y, w[0].0.z, w[0].1);
            let b = (w[1].0.x, w[1].0.y, w[1].0.z, w[1].1);
            assert!(a < b);
        }
        let single = SamplingConfig {
            position_counts: [1, 1, 1],
            duration_count: 1,
            ..cfg
        };
        let (p, t) = single.candidate(0);
        assert_abs_diff_eq!(p, Vector3::new(-3.5, 0.0, 0.0), epsilon = 1e-15);
        assert_abs_diff_eq!(t, 2.25, epsilon = 1e-15);
    }

    fn rolled_traverse() -> (GapSpec<f64>, TraverseTrajectory<f64>) {
        let gap = GapSpec::from_rpy(Vector3::new(0.0, 0.0, 1.5), 30f64.to_radians(), 0.0, 0.0, 0.8, 0.28).unwrap();
        let basis = plane_basis(&gap, &g(), ApproachSide::NegativeNormal).unwrap();
        let (_, tr) = optimize_traverse(&gap, &basis, &TraverseSettings::default(), &g()).unwrap();
        (gap, tr)
    }

    #[test]
    fn singleton_grid_returns_its_candidate() {
        let (gap, tr) = rolled_traverse();
        let cfg = SamplingConfig::behind_gap(
            &gap.position,
            &tr.basis.e2,
            3.5,
            [0.0; 3],
            [1, 1, 1],
            (3.0, 3.0),
            1,
            10f64.to_radians(),
            4.0,
        );
        let best = plan_approach(&cfg, &tr, &gap, &ctx()).unwrap();
        assert_eq!(best.index, 0);
        assert!(best.feasibility.is_feasible());
        assert_abs_diff_eq!(best.primitive.end.p, tr.p0, epsilon = 1e-12);
    }

    #[test]
    fn selection_is_exhaustive_argmin() {
        let (gap, tr) = rolled_traverse();
        let cfg = SamplingConfig::behind_gap(
            &gap.position,
            &tr.basis.e2,
            3.5,
            [1.0, 1.0, 0.5],
            [4, 4, 3],
            (1.5, 4.0),
            4,
            10f64.to_radians(),
            4.0,
        );
        let c = ctx();
        let best = plan_approach(&cfg, &tr, &gap, &c).unwrap();
        let entry = traverse_entry(&tr);
        let mut oracle: Option<(f64, usize)> = None;
        for i in 0..cfg.candidate_count() {
            let (p, t) = cfg.candidate(i);
            let prim = min_jerk_primitive(&FlatState::rest(p), &entry, t).unwrap();
            if !check_feasibility(&prim, &c.limits, &g(), c.dt_check).is_feasible() {
                continue;
            }
            let cost = candidate_cost(&prim, &gap, &c.mount, &cfg, c.cost_samples, &g()).unwrap().cost;
            if oracle.is_none_or(|(j, _)| cost < j) {
                oracle = Some((cost, i));
            }
        }
        let (j, i) = oracle.unwrap();
        assert_eq!(best.index, i);
        assert_eq!(best.cost, j);
    }

    #[test]
    fn nothing_feasible() {
        let (gap, tr) = rolled_traverse();
        let cfg = SamplingConfig::behind_gap(
            &gap.position,
            &tr.basis.e2,
            3.5,
            [0.0; 3],
            [1, 1, 1],
            (0.2, 0.2),
            1,
            10f64.to_radians(),
            4.0,
        );
        assert_eq!(plan_approach(&cfg, &tr, &gap, &ctx()), Err(Error::NoFeasibleCandidate));
    }

    #[test]
    fn replan_on_plan_reproduces_remaining_segment() {
        let (gap, tr) = rolled_traverse();
        let start = gap.position - tr.basis.e2 * 3.5;
        let prim = min_jerk_primitive(&FlatState::rest(start), &traverse_entry(&tr), 3.0).unwrap();
        let t = 1.0;
        let here = prim.state_at(t);
        match replan(&here, &tr, 2.0, &ctx()) {
            ReplanOutcome::NewPrimitive(new) => {
                for i in 0..=20 {
                    let s = 2.0 * i as f64 / 20.0;
                    assert!((new.eval(s).p - prim.eval(t + s).p).norm() < 1e-6);
                }
            }
            other => panic!("expected a new primitive, got {other:?}"),
        }
    }

    #[test]
    fn replan_keeps_last_when_too_short() {
        let (gap, tr) = rolled_traverse();
        let off = FlatState::rest(tr.p0 - tr.basis.e2 * 0.4 + Vector3::new(0.0, 0.2, 0.1));
        let out = replan(&off, &tr, 0.02, &ctx());
        assert!(matches!(out, ReplanOutcome::KeepLast(v) if v.is_infeasible()));
        let out = replan(&off, &tr, 0.005, &ctx());
        assert_eq!(out, ReplanOutcome::KeepLast(FeasibilityVerdict::Indeterminate));
        let _ = gap;
    }
}
