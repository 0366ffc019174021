//! Ballistic traverse through the gap center and optimization of its
//! parameters.
//!
//! During the traverse the vehicle applies a constant thrust that cancels the
//! gravity component normal to the traverse plane, so its motion inside the
//! plane is a parabola driven by the in-plane gravity `g_pi`. The trajectory
//! is parametrized by `gamma` (distance to the gap center along `e1`) and `d`
//! (distance along `e2`); the apex of the parabola along `e1` is placed at the
//! gap center.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{gravity_in_plane, GapSpec, PlaneBasis};
use crate::scalar::Real;

/// In-plane gravity magnitudes along `e1` at or below this are treated as zero.
pub const BALLISTIC_EPS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraverseParams<T: Real> {
    /// Distance from the start point to the gap center along `e1`.
    pub gamma: T,
    /// Distance from the start point to the gap center along `e2`.
    pub d: T,
    pub v0_max: T,
    pub d_min: T,
    /// Speed of the straight-line traverse used when in-plane gravity along
    /// `e1` vanishes; the actual speed is `min(v0_max, straight_speed)`.
    pub straight_speed: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraverseKind {
    Ballistic,
    /// No in-plane gravity along `e1`: constant thrust, start velocity along `e2`.
    Straight,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraverseTrajectory<T: Real> {
    pub kind: TraverseKind,
    pub params: TraverseParams<T>,
    pub gap_center: Vector3<T>,
    pub p0: Vector3<T>,
    pub v0: Vector3<T>,
    pub g_pi: Vector3<T>,
    /// Time from traverse start to the gap center.
    pub t_c: T,
    /// Time at which the vehicle is `d` past the gap along `e2`.
    pub t_end: T,
    /// Magnitude of the constant mass-normalized thrust, `|<g, e3>|`.
    pub thrust_mag: T,
    pub basis: PlaneBasis<T>,
}

impl<T: Real> TraverseTrajectory<T> {
    /// Unit thrust direction held during the traverse (the body z-axis).
    pub fn thrust_axis(&self, g: &Vector3<T>) -> Vector3<T> {
        let f = self.g_pi - g;
        let n = f.norm();
        if n > T::zero() {
            f / n
        } else {
            self.basis.e3
        }
    }

    pub fn position(&self, t: T) -> Vector3<T> {
        self.p0 + self.v0 * t + self.g_pi * (T::lit(0.5) * t * t)
    }

    pub fn velocity(&self, t: T) -> Vector3<T> {
        self.v0 + self.g_pi * t
    }
}

/// Smallest `tau > 0` solving `0.5 * a * tau^2 + v * tau = dist` with `dist > 0`.
fn first_crossing<T: Real>(a: T, v: T, dist: T) -> Option<T> {
    let disc = v * v + T::lit(2.0) * a * dist;
    if disc < T::zero() {
        return None;
    }
    let den = v + disc.sqrt();
    if den <= T::zero() {
        return None;
    }
    Some(T::lit(2.0) * dist / den)
}

/// Closed-form traverse for the given parameters.
pub fn traverse_closed_form<T: Real>(
    gap: &GapSpec<T>,
    basis: &PlaneBasis<T>,
    params: &TraverseParams<T>,
    g: &Vector3<T>,
) -> Result<TraverseTrajectory<T>> {
    if !(params.d_min > T::zero()) || params.d < params.d_min {
        return Err(Error::InvalidParams(format!(
            "need d >= d_min > 0, got d = {}, d_min = {}",
            params.d, params.d_min
        )));
    }
    if !(params.v0_max > T::zero()) {
        return Err(Error::InvalidParams("v0_max must be positive".into()));
    }
    let gp = gravity_in_plane(basis, g);
    let half = T::lit(0.5);
    let d = params.d;

    let (kind, gamma, v0, t_c) = if gp.g1 < -T::lit(BALLISTIC_EPS) {
        if !(params.gamma > T::zero()) {
            return Err(Error::InvalidParams(format!("gamma must be positive, got {}", params.gamma)));
        }
        let gamma = params.gamma;
        let t_c = (-T::lit(2.0) * gamma / gp.g1).sqrt();
        let v1 = gamma / t_c - half * gp.g1 * t_c;
        let v2 = d / t_c - half * gp.g2 * t_c;
        (TraverseKind::Ballistic, gamma, basis.e1 * v1 + basis.e2 * v2, t_c)
    } else {
        let speed = params.v0_max.min(params.straight_speed);
        if !(speed > T::zero()) {
            return Err(Error::InvalidParams("straight traverse speed must be positive".into()));
        }
        let t_c = first_crossing(gp.g2, speed, d)
            .ok_or_else(|| Error::InvalidParams("straight traverse never reaches the gap".into()))?;
        (TraverseKind::Straight, T::zero(), basis.e2 * speed, t_c)
    };

    let v2c = v0.dot(&basis.e2) + gp.g2 * t_c;
    let after = first_crossing(gp.g2, v2c, d)
        .ok_or_else(|| Error::InvalidParams("traverse never clears the gap by d".into()))?;

    Ok(TraverseTrajectory {
        kind,
        params: TraverseParams { gamma, ..*params },
        gap_center: gap.position,
        p0: gap.position - basis.e1 * gamma - basis.e2 * d,
        v0,
        g_pi: gp.g_pi,
        t_c,
        t_end: t_c + after,
        thrust_mag: gp.normal.abs(),
        basis: *basis,
    })
}

/// Position, velocity and acceleration on the traverse at time `t`.
pub fn evaluate_traverse<T: Real>(
    traj: &TraverseTrajectory<T>,
    t: T,
) -> Result<(Vector3<T>, Vector3<T>, Vector3<T>)> {
    if t < T::zero() || t > traj.t_end {
        return Err(Error::OutOfRange {
            t: t.as_f64(),
            end: traj.t_end.as_f64(),
        });
    }
    Ok((traj.position(t), traj.velocity(t), traj.g_pi))
}

/// Bounds and constraints of the traverse optimization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TraverseSettings<T: Real> {
    pub v0_max: T,
    pub d_min: T,
    pub d_max: T,
    pub gamma_min: T,
    pub gamma_max: T,
    pub straight_speed: T,
}

impl<T: Real> Default for TraverseSettings<T> {
    fn default() -> Self {
        Self {
            v0_max: T::lit(3.0),
            d_min: T::lit(0.25),
            d_max: T::lit(2.0),
            gamma_min: T::lit(1e-6),
            gamma_max: T::lit(2.0),
            straight_speed: T::lit(1.5),
        }
    }
}

/// Minimizes the time to the gap center subject to `|v0| <= v0_max` and
/// `d >= d_min` over the box `[gamma_min, gamma_max] x [d_min, d_max]`.
///
/// `t_c` grows monotonically with `gamma`, so the problem is solved in `t_c`:
/// for a fixed `t_c` the best `d` is the one closest to `g2 * t_c^2 / 2`
/// (which zeroes the `e2` start velocity), and the answer is the smallest
/// `t_c` whose best `d` meets the speed bound. The smallest feasible `t_c` is
/// bracketed on a log-spaced scan and refined by bisection, keeping the
/// feasible end of the bracket so the constraints hold exactly.
///
/// When in-plane gravity along `e1` vanishes the straight traverse with
/// `d = d_min` is returned.
pub fn optimize_traverse<T: Real>(
    gap: &GapSpec<T>,
    basis: &PlaneBasis<T>,
    settings: &TraverseSettings<T>,
    g: &Vector3<T>,
) -> Result<(TraverseParams<T>, TraverseTrajectory<T>)> {
    let s = settings;
    if !(s.v0_max > T::zero() && s.d_min > T::zero() && s.d_max >= s.d_min) {
        return Err(Error::InvalidParams("need v0_max > 0 and 0 < d_min <= d_max".into()));
    }
    if !(s.gamma_min > T::zero() && s.gamma_max >= s.gamma_min) {
        return Err(Error::InvalidParams("need 0 < gamma_min <= gamma_max".into()));
    }
    let gp = gravity_in_plane(basis, g);
    let mut params = TraverseParams {
        gamma: T::zero(),
        d: s.d_min,
        v0_max: s.v0_max,
        d_min: s.d_min,
        straight_speed: s.straight_speed,
    };
    if gp.g1 >= -T::lit(BALLISTIC_EPS) {
        let traj = traverse_closed_form(gap, basis, &params, g)?;
        return Ok((traj.params, traj));
    }

    let k = -gp.g1;
    let g2 = gp.g2;
    let half = T::lit(0.5);
    let two = T::lit(2.0);
    let vmax2 = s.v0_max * s.v0_max;
    let best_d = |t: T| (half * g2 * t * t).max(s.d_min).min(s.d_max);
    let feasible = |t: T| -> bool {
        let d = best_d(t);
        let v1 = k * t;
        let v2 = d / t - half * g2 * t;
        if v1 * v1 + v2 * v2 > vmax2 {
            return false;
        }
        first_crossing(g2, d / t + half * g2 * t, d).is_some()
    };

    let t_lo = (two * s.gamma_min / k).sqrt();
    let t_hi = (two * s.gamma_max / k).sqrt();
    let mut t_star = None;
    if feasible(t_lo) {
        t_star = Some(t_lo);
    } else {
        const SCAN: usize = 2000;
        let ratio = (t_hi / t_lo).ln() / T::from_usize_lossy(SCAN);
        let mut prev = t_lo;
        for i in 1..=SCAN {
            let t = if i == SCAN {
                t_hi
            } else {
                t_lo * (ratio * T::from_usize_lossy(i)).exp()
            };
            if feasible(t) {
                let (mut bad, mut good) = (prev, t);
                for _ in 0..200 {
                    let mid = half * (bad + good);
                    if mid <= bad || mid >= good {
                        break;
                    }
                    if feasible(mid) {
                        good = mid;
                    } else {
                        bad = mid;
                    }
                }
                t_star = Some(good);
                break;
            }
            prev = t;
        }
    }
    let mut t = t_star.ok_or(Error::Infeasible)?;

    // Rounding in the closed form can push |v0| a few ulps past the bound.
    for _ in 0..64 {
        params.gamma = (half * k * t * t).max(s.gamma_min).min(s.gamma_max);
        params.d = best_d(t);
        let traj = traverse_closed_form(gap, basis, &params, g)?;
        if traj.v0.norm() <= s.v0_max {
            return Ok((traj.params, traj));
        }
        t *= T::one() + T::default_epsilon() * T::lit(16.0);
    }
    Err(Error::Infeasible)
}
