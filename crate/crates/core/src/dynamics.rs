//! Rigid-body quadrotor model driven by collective thrust and body rates.

use nalgebra::{Rotation3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::primitive::InputLimits;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadState {
    pub p: Vector3<f64>,
    pub v: Vector3<f64>,
    pub rotation: Rotation3<f64>,
    /// Body rates, rad/s.
    pub omega: Vector3<f64>,
}

impl QuadState {
    pub fn hover(p: Vector3<f64>, rotation: Rotation3<f64>) -> Self {
        Self {
            p,
            v: Vector3::zeros(),
            rotation,
            omega: Vector3::zeros(),
        }
    }

    pub fn z_b(&self) -> Vector3<f64> {
        self.rotation.matrix().column(2).into_owned()
    }
}

/// Mass-normalized collective thrust (m/s^2) and body-rate setpoint (rad/s).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BodyCommand {
    pub thrust: f64,
    pub rates: Vector3<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VehicleSpec {
    /// Tip-to-tip size, meters.
    pub size: f64,
    /// Body height, meters.
    pub height: f64,
    /// Limits the planner verifies trajectories against.
    pub limits: InputLimits<f64>,
    /// Limits the commands are clamped to.
    pub actuator_limits: InputLimits<f64>,
    /// Time constant of the body-rate response, seconds.
    pub rate_time_constant: f64,
}

impl Default for VehicleSpec {
    fn default() -> Self {
        Self {
            size: 0.55,
            height: 0.12,
            limits: InputLimits::default(),
            actuator_limits: InputLimits {
                f_min: 0.5,
                f_max: 25.0,
                omega_max: 12.0,
            },
            rate_time_constant: 0.02,
        }
    }
}

impl VehicleSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.size > 0.0 && self.height > 0.0 && self.rate_time_constant >= 0.0) {
            return Err(Error::Config("vehicle size, height and time constant must be positive".into()));
        }
        self.limits.validate()?;
        self.actuator_limits.validate()
    }
}

/// Advances the state by `dt` under a constant command.
///
/// Body rates approach the setpoint exponentially; attitude is integrated on
/// the rotation group with the mean rate over the step and the thrust acts
/// along the mid-step body z-axis, so free fall, hover and constant-input
/// flight with steady rates are reproduced exactly.
pub fn step_dynamics(s: &QuadState, cmd: &BodyCommand, dt: f64, tau: f64, g: &Vector3<f64>) -> QuadState {
    assert!(dt > 0.0, "dynamics step needs dt > 0");
    let (omega, turned) = if tau > 0.0 {
        let decay = (-dt / tau).exp();
        let diff = s.omega - cmd.rates;
        (cmd.rates + diff * decay, cmd.rates * dt + diff * (tau * (1.0 - decay)))
    } else {
        (cmd.rates, cmd.rates * dt)
    };
    let half = s.rotation * Rotation3::new(turned * 0.5);
    let mut rotation = s.rotation * Rotation3::new(turned);
    rotation.renormalize();
    let a = half * Vector3::new(0.0, 0.0, cmd.thrust) + g;
    QuadState {
        p: s.p + s.v * dt + a * (0.5 * dt * dt),
        v: s.v + a * dt,
        rotation,
        omega,
    }
}

/// Specific force and mean body rate an ideal IMU would report over a step,
/// both in the body frame at the start of the step.
pub fn ideal_imu(cmd: &BodyCommand, before: &QuadState, after: &QuadState, dt: f64) -> (Vector3<f64>, Vector3<f64>) {
    let turned = (before.rotation.inverse() * after.rotation).scaled_axis();
    let half = Rotation3::new(turned * 0.5);
    (half * Vector3::new(0.0, 0.0, cmd.thrust), turned / dt)
}
