//! Simulated gap detection and IMU fusion.
//!
//! Gap detections are modeled statistically: a detection is available when
//! the whole opening is inside the camera field of view, within range and
//! the vehicle is not rotating fast enough to blur the image. The returned
//! relative pose carries zero-mean Gaussian noise whose standard deviation
//! grows with the square of the distance to the gap.
//!
//! The estimator is an error-state Kalman filter over position, velocity and
//! attitude, propagated with IMU specific force and body rates and corrected
//! with pose measurements.

use nalgebra::{Matrix3, SMatrix, SVector, Vector3};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{skew, so3_exp, so3_log, GapSpec};
use crate::perception::CameraMount;

pub type Matrix9 = SMatrix<f64, 9, 9>;
pub type Matrix6 = SMatrix<f64, 6, 6>;
type Matrix6x9 = SMatrix<f64, 6, 9>;
type Vector6 = SVector<f64, 6>;
type Vector9 = SVector<f64, 9>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeasurementModel {
    /// Per-axis position noise std at 1 m, meters.
    pub sigma_pos0: f64,
    /// Per-axis rotation noise std at 1 m, radians.
    pub sigma_rot0: f64,
    /// Detection rate, Hz.
    pub rate: f64,
    pub p_dropout: f64,
    /// Body-rate magnitude at or above which detection fails, rad/s.
    pub omega_blur: f64,
    /// Valid detection distances to the gap center, meters.
    pub range: (f64, f64),
}

impl Default for MeasurementModel {
    fn default() -> Self {
        Self {
            sigma_pos0: 0.005,
            sigma_rot0: 0.01,
            rate: 30.0,
            p_dropout: 0.05,
            omega_blur: 7.0,
            range: (0.3, 8.0),
        }
    }
}

impl MeasurementModel {
    /// No noise, no dropouts.
    pub fn noiseless() -> Self {
        Self {
            sigma_pos0: 0.0,
            sigma_rot0: 0.0,
            p_dropout: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let non_neg = [self.sigma_pos0, self.sigma_rot0, self.rate, self.omega_blur, self.range.0]
            .iter()
            .all(|x| *x >= 0.0);
        if !non_neg || self.range.0 >= self.range.1 || !(0.0..=1.0).contains(&self.p_dropout) {
            return Err(Error::Config("invalid measurement model".into()));
        }
        Ok(())
    }

    pub fn position_std(&self, distance: f64) -> f64 {
        self.sigma_pos0 * distance * distance
    }

    pub fn rotation_std(&self, distance: f64) -> f64 {
        self.sigma_rot0 * distance * distance
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImuNoise {
    /// Accelerometer noise std per sample, m/s^2.
    pub accel_std: f64,
    /// Gyroscope noise std per sample, rad/s.
    pub gyro_std: f64,
    /// Per-axis std of the constant accelerometer bias drawn per trial, m/s^2.
    pub accel_bias_std: f64,
    /// Per-axis std of the constant gyroscope bias drawn per trial, rad/s.
    pub gyro_bias_std: f64,
}

impl Default for ImuNoise {
    fn default() -> Self {
        Self {
            accel_std: 0.05,
            gyro_std: 0.005,
            accel_bias_std: 0.1,
            gyro_bias_std: 0.0,
        }
    }
}

/// Vehicle pose expressed in the gap frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelativePose {
    pub position: Vector3<f64>,
    pub rotation: Matrix3<f64>,
}

impl RelativePose {
    pub fn from_world(p: &Vector3<f64>, r: &Matrix3<f64>, gap: &GapSpec<f64>) -> Self {
        let rt = gap.rotation.transpose();
        Self {
            position: rt * (p - gap.position),
            rotation: rt * r,
        }
    }

    pub fn to_world(&self, gap: &GapSpec<f64>) -> (Vector3<f64>, Matrix3<f64>) {
        (gap.position + gap.rotation * self.position, gap.rotation * self.rotation)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapMeasurement {
    pub pose: RelativePose,
    /// Covariance of (position, body-frame rotation vector) noise.
    pub covariance: Matrix6,
}

impl GapMeasurement {
    /// Pose and covariance in the world frame.
    pub fn to_world(&self, gap: &GapSpec<f64>) -> (Vector3<f64>, Matrix3<f64>, Matrix6) {
        let (p, r) = self.pose.to_world(gap);
        let mut cov = self.covariance;
        let rg = gap.rotation;
        let pos = rg * self.covariance.fixed_view::<3, 3>(0, 0) * rg.transpose();
        cov.fixed_view_mut::<3, 3>(0, 0).copy_from(&pos);
        let cross = rg * self.covariance.fixed_view::<3, 3>(0, 3);
        cov.fixed_view_mut::<3, 3>(0, 3).copy_from(&cross);
        cov.fixed_view_mut::<3, 3>(3, 0).copy_from(&cross.transpose());
        (p, r, cov)
    }
}

fn inside_cone(axis: &Vector3<f64>, dir: &Vector3<f64>, half_angle: f64) -> bool {
    let n = dir.norm();
    n > 0.0 && axis.dot(dir) / n > half_angle.cos()
}

/// Whether the detector can return a pose for a camera at `p` with body
/// attitude `r`.
pub fn gap_visible(
    p: &Vector3<f64>,
    r: &Matrix3<f64>,
    gap: &GapSpec<f64>,
    mount: &CameraMount<f64>,
    body_rate: f64,
    model: &MeasurementModel,
) -> bool {
    let axis = mount.optical_axis(&r.column(0).into_owned(), &r.column(2).into_owned());
    let bearing = gap.position - p;
    let dist = bearing.norm();
    if dist < model.range.0 || dist > model.range.1 || body_rate >= model.omega_blur {
        return false;
    }
    inside_cone(&axis, &bearing, mount.fov_half)
        && gap
            .corners()
            .iter()
            .all(|c| inside_cone(&axis, &(c - p), mount.fov_half))
}

fn gaussian3<R: Rng + ?Sized>(rng: &mut R, std: f64) -> Vector3<f64> {
    let mut draw = || -> f64 { StandardNormal.sample(rng) };
    Vector3::new(draw(), draw(), draw()) * std
}

/// Noisy relative pose of a gap seen from `distance` meters.
pub fn measure_gap_pose<R: Rng + ?Sized>(
    truth: &RelativePose,
    distance: f64,
    model: &MeasurementModel,
    rng: &mut R,
) -> Result<GapMeasurement> {
    if !(model.range.0..=model.range.1).contains(&distance) {
        return Err(Error::NotVisible);
    }
    let sp = model.position_std(distance);
    let sr = model.rotation_std(distance);
    let dp = gaussian3(rng, sp);
    let dr = gaussian3(rng, sr);
    let mut covariance = Matrix6::zeros();
    for i in 0..3 {
        covariance[(i, i)] = sp * sp;
        covariance[(i + 3, i + 3)] = sr * sr;
    }
    Ok(GapMeasurement {
        pose: RelativePose {
            position: truth.position + dp,
            rotation: truth.rotation * so3_exp(&dr),
        },
        covariance,
    })
}

/// One IMU reading: specific force and body rates in the body frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImuSample {
    pub accel: Vector3<f64>,
    pub gyro: Vector3<f64>,
}

impl ImuSample {
    pub fn noisy<R: Rng + ?Sized>(accel: Vector3<f64>, gyro: Vector3<f64>, noise: &ImuNoise, rng: &mut R) -> Self {
        Self {
            accel: accel + gaussian3(rng, noise.accel_std),
            gyro: gyro + gaussian3(rng, noise.gyro_std),
        }
    }
}

/// World-frame pose measurement fed to the estimator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseMeasurement {
    pub position: Vector3<f64>,
    pub rotation: Matrix3<f64>,
    pub covariance: Matrix6,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateEstimate {
    pub p: Vector3<f64>,
    pub v: Vector3<f64>,
    pub rotation: Matrix3<f64>,
    /// Error-state covariance ordered (position, velocity, body-frame attitude).
    pub covariance: Matrix9,
    pub last_detection_age: f64,
}

impl StateEstimate {
    pub fn new(p: Vector3<f64>, v: Vector3<f64>, rotation: Matrix3<f64>, sigmas: [f64; 3]) -> Self {
        let mut covariance = Matrix9::zeros();
        for block in 0..3 {
            for i in 0..3 {
                covariance[(3 * block + i, 3 * block + i)] = sigmas[block] * sigmas[block];
            }
        }
        Self {
            p,
            v,
            rotation,
            covariance,
            last_detection_age: 0.0,
        }
    }

    /// Error of `self` relative to a true state, in the filter's error coordinates.
    pub fn error_to(&self, p: &Vector3<f64>, v: &Vector3<f64>, r: &Matrix3<f64>) -> Vector9 {
        let dtheta = so3_log(&(self.rotation.transpose() * r));
        let mut e = Vector9::zeros();
        e.fixed_rows_mut::<3>(0).copy_from(&(p - self.p));
        e.fixed_rows_mut::<3>(3).copy_from(&(v - self.v));
        e.fixed_rows_mut::<3>(6).copy_from(&dtheta);
        e
    }

    /// Normalized estimation error squared against a true state.
    pub fn nees(&self, p: &Vector3<f64>, v: &Vector3<f64>, r: &Matrix3<f64>) -> f64 {
        let e = self.error_to(p, v, r);
        match self.covariance.try_inverse() {
            Some(inv) => (e.transpose() * inv * e)[(0, 0)],
            None => f64::INFINITY,
        }
    }
}

fn symmetrize(p: &mut Matrix9) {
    let s = (*p + p.transpose()) * 0.5;
    *p = s;
}

/// IMU propagation followed by an optional pose correction.
pub fn estimator_step(
    est: &StateEstimate,
    imu: &ImuSample,
    meas: Option<&PoseMeasurement>,
    dt: f64,
    noise: &ImuNoise,
    g: &Vector3<f64>,
) -> StateEstimate {
    assert!(dt > 0.0, "estimator step needs dt > 0");
    let r = est.rotation;
    let acc_world = r * imu.accel + g;
    let mut next = StateEstimate {
        p: est.p + est.v * dt + acc_world * (0.5 * dt * dt),
        v: est.v + acc_world * dt,
        rotation: r * so3_exp(&(imu.gyro * dt)),
        covariance: est.covariance,
        last_detection_age: est.last_detection_age + dt,
    };

    let mut f = Matrix9::identity();
    f.fixed_view_mut::<3, 3>(0, 3).copy_from(&(Matrix3::identity() * dt));
    f.fixed_view_mut::<3, 3>(0, 6).copy_from(&(-r * skew(&imu.accel) * (0.5 * dt * dt)));
    f.fixed_view_mut::<3, 3>(3, 6).copy_from(&(-r * skew(&imu.accel) * dt));
    f.fixed_view_mut::<3, 3>(6, 6).copy_from(&so3_exp(&(-imu.gyro * dt)));
    let mut q = Matrix9::zeros();
    let qa = (noise.accel_std * dt).powi(2);
    let qg = (noise.gyro_std * dt).powi(2);
    for i in 0..3 {
        q[(3 + i, 3 + i)] = qa;
        q[(6 + i, 6 + i)] = qg;
    }
    next.covariance = f * est.covariance * f.transpose() + q;
    symmetrize(&mut next.covariance);

    if let Some(m) = meas {
        correct(&mut next, m);
    }
    next
}

fn correct(est: &mut StateEstimate, m: &PoseMeasurement) {
    let mut h = Matrix6x9::zeros();
    h.fixed_view_mut::<3, 3>(0, 0).copy_from(&Matrix3::identity());
    h.fixed_view_mut::<3, 3>(3, 6).copy_from(&Matrix3::identity());
    let mut y = Vector6::zeros();
    y.fixed_rows_mut::<3>(0).copy_from(&(m.position - est.p));
    y.fixed_rows_mut::<3>(3).copy_from(&so3_log(&(est.rotation.transpose() * m.rotation)));

    let p = est.covariance;
    let s = h * p * h.transpose() + m.covariance;
    let Some(s_inv) = s.try_inverse() else {
        return;
    };
    let k = p * h.transpose() * s_inv;
    let dx = k * y;
    let ikh = Matrix9::identity() - k * h;
    est.covariance = ikh * p * ikh.transpose() + k * m.covariance * k.transpose();
    symmetrize(&mut est.covariance);

    est.p += dx.fixed_rows::<3>(0);
    est.v += dx.fixed_rows::<3>(3);
    est.rotation *= so3_exp(&dx.fixed_rows::<3>(6).into_owned());
    est.last_detection_age = 0.0;
}
