//! Trajectory tracking with collective thrust and body-rate commands.
//!
//! Position and velocity errors are turned into a desired acceleration; the
//! thrust direction follows it and the heading places the camera optical axis
//! at the reference yaw. Body rates combine the flatness feed-forward from jerk
//! with a proportional attitude correction on the rotation group.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::dynamics::BodyCommand;
use crate::primitive::{FlatState, InputLimits};
use crate::sensor::StateEstimate;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackingReference {
    pub flat: FlatState<f64>,
    pub jerk: Vector3<f64>,
    /// Heading of the camera optical axis, radians.
    pub yaw: f64,
    pub yaw_rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrackingGains {
    pub position: f64,
    pub velocity: f64,
    pub attitude: f64,
}

impl Default for TrackingGains {
    fn default() -> Self {
        Self {
            position: 16.0,
            velocity: 8.0,
            attitude: 10.0,
        }
    }
}

/// Body attitude with z-axis `z` whose camera optical axis (tilted so that
/// `<axis, z> = k`) has horizontal heading `yaw`.
///
/// Falls back to keeping `fallback_x` when the heading is undefined for this
/// thrust direction.
pub fn attitude_for_heading(z: &Vector3<f64>, yaw: f64, k: f64, fallback_x: &Vector3<f64>) -> Matrix3<f64> {
    let heading = Vector3::new(yaw.cos(), yaw.sin(), 0.0);
    // The optical axis must lie in the vertical plane through `heading`.
    let n = Vector3::new(-yaw.sin(), yaw.cos(), 0.0);
    let n_perp = n - z * n.dot(z);
    let m = n_perp.norm();
    let s = (1.0 - k * k).max(0.0).sqrt();
    let x = if m > 1e-6 && s > 1e-9 {
        let u = n_perp / m;
        let w = z.cross(&u);
        let alpha = (-k * z.dot(&n) / (s * m)).clamp(-1.0, 1.0);
        let beta = (1.0 - alpha * alpha).sqrt();
        let x = u * alpha + w * beta;
        if (x * s + z * k).dot(&heading) >= 0.0 {
            x
        } else {
            u * alpha - w * beta
        }
    } else {
        let f = fallback_x - z * fallback_x.dot(z);
        if f.norm() > 1e-9 {
            f.normalize()
        } else {
            z.cross(&Vector3::x()).try_normalize(1e-9).unwrap_or_else(Vector3::y).cross(z)
        }
    };
    let y = z.cross(&x);
    Matrix3::from_columns(&[x, y, *z])
}

fn vee(m: &Matrix3<f64>) -> Vector3<f64> {
    Vector3::new(m[(2, 1)], m[(0, 2)], m[(1, 0)])
}

fn clamp_command(thrust: f64, rates: Vector3<f64>, limits: &InputLimits<f64>) -> BodyCommand {
    let n = rates.norm();
    BodyCommand {
        thrust: thrust.clamp(limits.f_min, limits.f_max),
        rates: if n > limits.omega_max { rates * (limits.omega_max / n) } else { rates },
    }
}

/// Thrust and body-rate command tracking `reference` from the estimated state.
pub fn track(
    reference: &TrackingReference,
    estimate: &StateEstimate,
    gains: &TrackingGains,
    camera_k: f64,
    limits: &InputLimits<f64>,
    g: &Vector3<f64>,
) -> BodyCommand {
    let r = estimate.rotation;
    let a_des = reference.flat.a
        + (reference.flat.p - estimate.p) * gains.position
        + (reference.flat.v - estimate.v) * gains.velocity;
    let f_des = a_des - g;
    let f_norm = f_des.norm();
    let z_b = r.column(2).into_owned();
    let z_des = if f_norm > 1e-9 { f_des / f_norm } else { z_b };
    let r_des = attitude_for_heading(&z_des, reference.yaw, camera_k, &r.column(0).into_owned());

    let x_des = r_des.column(0).into_owned();
    let y_des = r_des.column(1).into_owned();
    let h = if f_norm > 1e-9 {
        (reference.jerk - z_des * z_des.dot(&reference.jerk)) / f_norm
    } else {
        Vector3::zeros()
    };
    let omega_des = Vector3::new(-h.dot(&y_des), h.dot(&x_des), reference.yaw_rate * z_des.z);

    let e_r = vee(&(r_des.transpose() * r - r.transpose() * r_des)) * 0.5;
    let rates = r.transpose() * r_des * omega_des - e_r * gains.attitude;
    clamp_command(f_des.dot(&z_b), rates, limits)
}
