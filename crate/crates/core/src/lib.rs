//! Perception-aware planning and closed-loop simulation of aggressive
//! quadrotor flight through narrow inclined gaps.
//!
//! The planning math (`geometry`, `traverse`, `primitive`, `perception`) is
//! generic over the scalar type; the aliases below fix it to `f64` or `f32`.
//! Sensing, simulation and the batch harness work in `f64`.

pub mod control;
pub mod dynamics;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod perception;
pub mod primitive;
pub mod scalar;
pub mod sensor;
pub mod traverse;
pub mod trial;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Gap = geometry::GapSpec<f64>;
pub type Basis = geometry::PlaneBasis<f64>;
pub type Traverse = traverse::TraverseTrajectory<f64>;
pub type Primitive = primitive::MotionPrimitive<f64>;
pub type Limits = primitive::InputLimits<f64>;

pub type Gap32 = geometry::GapSpec<f32>;
pub type Basis32 = geometry::PlaneBasis<f32>;
pub type Traverse32 = traverse::TraverseTrajectory<f32>;
pub type Primitive32 = primitive::MotionPrimitive<f32>;
pub type Limits32 = primitive::InputLimits<f32>;
