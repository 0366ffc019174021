//! Frames, rotations, the gap model and the plane the traverse lives in.
//!
//! A gap is described by its center and a rotation whose columns are, in
//! order, the gap normal, the long-side direction and the short-side
//! direction. With the identity rotation the gap faces world `x` and its long
//! side is horizontal along world `y`. Roll and pitch of a gap are rotations
//! about the world `x` and `y` axes, composed as `Rz(yaw) * Ry(pitch) * Rx(roll)`.

use nalgebra::{Matrix3, Rotation3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Which side of the gap the vehicle starts on, relative to the gap normal
/// (first column of the gap rotation).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApproachSide {
    /// Start where `<p - p_G, n> < 0` and fly along `+n`.
    #[default]
    NegativeNormal,
    /// Start where `<p - p_G, n> > 0` and fly along `-n`.
    PositiveNormal,
}

impl ApproachSide {
    fn sign<T: Real>(self) -> T {
        match self {
            ApproachSide::NegativeNormal => T::one(),
            ApproachSide::PositiveNormal => -T::one(),
        }
    }
}

/// Pose and size of a rectangular gap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapSpec<T: Real> {
    pub position: Vector3<T>,
    /// Columns: normal, long side, short side.
    pub rotation: Matrix3<T>,
    /// Length of the long side.
    pub width: T,
    /// Length of the short side.
    pub height: T,
}

impl<T: Real> GapSpec<T> {
    pub fn new(position: Vector3<T>, rotation: Matrix3<T>, width: T, height: T) -> Result<Self> {
        let gap = Self {
            position,
            rotation,
            width,
            height,
        };
        gap.validate()?;
        Ok(gap)
    }

    /// Builds a gap from roll/pitch/yaw angles in radians.
    pub fn from_rpy(position: Vector3<T>, roll: T, pitch: T, yaw: T, width: T, height: T) -> Result<Self> {
        Self::new(position, rpy_to_matrix(roll, pitch, yaw), width, height)
    }

    pub fn validate(&self) -> Result<()> {
        let tol = T::lit(1e-9).max(T::default_epsilon() * T::lit(64.0));
        let orth = self.rotation.transpose() * self.rotation - Matrix3::identity();
        if orth.iter().any(|x| x.abs() > tol) {
            return Err(Error::InvalidGap("rotation is not orthonormal".into()));
        }
        if (self.rotation.determinant() - T::one()).abs() > tol {
            return Err(Error::InvalidGap("rotation determinant is not +1".into()));
        }
        if !(self.height > T::zero() && self.width >= self.height) {
            return Err(Error::InvalidGap(format!(
                "need width >= height > 0, got {} x {}",
                self.width, self.height
            )));
        }
        Ok(())
    }

    pub fn normal(&self) -> Vector3<T> {
        self.rotation.column(0).into_owned()
    }

    pub fn long_axis(&self) -> Vector3<T> {
        self.rotation.column(1).into_owned()
    }

    pub fn short_axis(&self) -> Vector3<T> {
        self.rotation.column(2).into_owned()
    }

    /// The four corners of the opening, in world coordinates.
    pub fn corners(&self) -> [Vector3<T>; 4] {
        let hw = self.long_axis() * (self.width * T::lit(0.5));
        let hh = self.short_axis() * (self.height * T::lit(0.5));
        let c = self.position;
        [c + hw + hh, c - hw + hh, c - hw - hh, c + hw - hh]
    }
}

/// Orthonormal basis of the traverse plane.
///
/// `e2` is the gap normal oriented along the direction of travel, `e1` runs
/// along the long side with `<g, e1> <= 0`, and `e3 = e1 x e2` is the plane
/// normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneBasis<T: Real> {
    pub e1: Vector3<T>,
    pub e2: Vector3<T>,
    pub e3: Vector3<T>,
}

impl<T: Real> PlaneBasis<T> {
    /// Coordinates of a world vector in the basis.
    pub fn coords(&self, v: &Vector3<T>) -> Vector3<T> {
        Vector3::new(v.dot(&self.e1), v.dot(&self.e2), v.dot(&self.e3))
    }

    pub fn to_world(&self, c: &Vector3<T>) -> Vector3<T> {
        self.e1 * c.x + self.e2 * c.y + self.e3 * c.z
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorldConstants<T: Real> {
    pub gravity: Vector3<T>,
}

impl<T: Real> Default for WorldConstants<T> {
    fn default() -> Self {
        Self {
            gravity: Vector3::new(T::zero(), T::zero(), T::lit(-9.81)),
        }
    }
}

impl<T: Real> WorldConstants<T> {
    /// Rejects gravity magnitudes outside `[9.5, 10.0]` unless `allow_override`.
    pub fn new(gravity: Vector3<T>, allow_override: bool) -> Result<Self> {
        let n = gravity.norm();
        if !allow_override && (n < T::lit(9.5) || n > T::lit(10.0)) {
            return Err(Error::Config(format!("gravity magnitude {n} outside [9.5, 10]")));
        }
        Ok(Self { gravity })
    }
}

/// Gravity decomposed in the traverse plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InPlaneGravity<T: Real> {
    /// `g - <g, e3> e3`.
    pub g_pi: Vector3<T>,
    pub g1: T,
    pub g2: T,
    /// `<g, e3>`; its magnitude is the thrust that keeps the motion in the plane.
    pub normal: T,
}

/// Builds the basis of the plane orthogonal to the gap, through its center and
/// parallel to its long side.
pub fn plane_basis<T: Real>(gap: &GapSpec<T>, g: &Vector3<T>, side: ApproachSide) -> Result<PlaneBasis<T>> {
    let n = gap.normal().normalize();
    let l = gap.long_axis().normalize();
    let dot = n.dot(&l);
    if dot.abs() > T::lit(1e-6) {
        return Err(Error::DegenerateGap(dot.as_f64()));
    }
    let e2 = n * side.sign::<T>();
    // Remove any residual normal component so the basis is exactly orthogonal.
    let l = (l - e2 * l.dot(&e2)).normalize();
    let along = g.dot(&l);
    let tie = g.norm() * T::lit(1e-12);
    let e1 = if along.abs() <= tie {
        l * side.sign::<T>()
    } else if along < T::zero() {
        l
    } else {
        -l
    };
    let e3 = e1.cross(&e2).normalize();
    Ok(PlaneBasis { e1, e2, e3 })
}

pub fn gravity_in_plane<T: Real>(basis: &PlaneBasis<T>, g: &Vector3<T>) -> InPlaneGravity<T> {
    let normal = g.dot(&basis.e3);
    let g_pi = g - basis.e3 * normal;
    InPlaneGravity {
        g_pi,
        g1: g_pi.dot(&basis.e1),
        g2: g_pi.dot(&basis.e2),
        normal,
    }
}

pub fn rpy_to_matrix<T: Real>(roll: T, pitch: T, yaw: T) -> Matrix3<T> {
    Rotation3::from_euler_angles(roll, pitch, yaw).into_inner()
}

/// Inverse of [`rpy_to_matrix`], returning `(roll, pitch, yaw)`.
pub fn matrix_to_rpy<T: Real>(r: &Matrix3<T>) -> (T, T, T) {
    Rotation3::from_matrix_unchecked(*r).euler_angles()
}

pub fn skew<T: Real>(v: &Vector3<T>) -> Matrix3<T> {
    Matrix3::new(
        T::zero(),
        -v.z,
        v.y,
        v.z,
        T::zero(),
        -v.x,
        -v.y,
        v.x,
        T::zero(),
    )
}

/// Rotation matrix of the rotation vector `w`.
pub fn so3_exp<T: Real>(w: &Vector3<T>) -> Matrix3<T> {
    Rotation3::new(*w).into_inner()
}

/// Rotation vector of an orthonormal matrix.
pub fn so3_log<T: Real>(r: &Matrix3<T>) -> Vector3<T> {
    Rotation3::from_matrix_unchecked(*r).scaled_axis()
}
