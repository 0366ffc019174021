//! Minimum-jerk state-to-state motion primitives and their input feasibility.
//!
//! Each axis is an independent quintic fixed by position, velocity and
//! acceleration at both ends. Feasibility is checked on the flat outputs:
//! mass-normalized thrust `f = |a - g|` and the body-rate proxy
//! `w = |j_perp| / f`, where `j_perp` is the jerk component orthogonal to the
//! thrust direction.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Position and its first two derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlatState<T: Real> {
    pub p: Vector3<T>,
    pub v: Vector3<T>,
    pub a: Vector3<T>,
}

impl<T: Real> FlatState<T> {
    pub fn rest(p: Vector3<T>) -> Self {
        Self {
            p,
            v: Vector3::zeros(),
            a: Vector3::zeros(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.p
            .iter()
            .chain(self.v.iter())
            .chain(self.a.iter())
            .all(|x| x.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputLimits<T: Real> {
    /// Minimum mass-normalized collective thrust, m/s^2.
    pub f_min: T,
    pub f_max: T,
    /// Maximum body-rate magnitude, rad/s.
    pub omega_max: T,
}

impl<T: Real> Default for InputLimits<T> {
    fn default() -> Self {
        Self {
            f_min: T::lit(1.0),
            f_max: T::lit(20.0),
            omega_max: T::lit(7.0),
        }
    }
}

impl<T: Real> InputLimits<T> {
    pub fn validate(&self) -> Result<()> {
        if self.f_min >= T::zero() && self.f_min < self.f_max && self.omega_max > T::zero() {
            Ok(())
        } else {
            Err(Error::Config("input limits need 0 <= f_min < f_max and omega_max > 0".into()))
        }
    }
}

/// Per-axis quintic, coefficients in ascending powers of time.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionPrimitive<T: Real> {
    pub coeffs: [[T; 6]; 3],
    pub duration: T,
    pub start: FlatState<T>,
    pub end: FlatState<T>,
}

/// Position, velocity, acceleration and jerk at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrimitiveSample<T: Real> {
    pub p: Vector3<T>,
    pub v: Vector3<T>,
    pub a: Vector3<T>,
    pub j: Vector3<T>,
}

/// Builds the jerk-optimal quintic between two full states in closed form.
pub fn min_jerk_primitive<T: Real>(s0: &FlatState<T>, s1: &FlatState<T>, duration: T) -> Result<MotionPrimitive<T>> {
    if !(duration > T::zero()) || !duration.is_finite() {
        return Err(Error::InvalidDuration(duration.as_f64()));
    }
    if !s0.is_finite() || !s1.is_finite() {
        return Err(Error::InvalidParams("boundary states must be finite".into()));
    }
    let t = duration;
    let t2 = t * t;
    let t3 = t2 * t;
    let t4 = t3 * t;
    let t5 = t4 * t;
    let half = T::lit(0.5);
    let mut coeffs = [[T::zero(); 6]; 3];
    for (axis, c) in coeffs.iter_mut().enumerate() {
        let (p0, v0, a0) = (s0.p[axis], s0.v[axis], s0.a[axis]);
        let dp = s1.p[axis] - (p0 + v0 * t + half * a0 * t2);
        let dv = s1.v[axis] - (v0 + a0 * t);
        let da = s1.a[axis] - a0;
        // jerk(t) = alpha/2 t^2 + beta t + gamma
        let alpha = (T::lit(720.0) * dp - T::lit(360.0) * t * dv + T::lit(60.0) * t2 * da) / t5;
        let beta = (-T::lit(360.0) * t * dp + T::lit(168.0) * t2 * dv - T::lit(24.0) * t3 * da) / t5;
        let gamma = (T::lit(60.0) * t2 * dp - T::lit(24.0) * t3 * dv + T::lit(3.0) * t4 * da) / t5;
        *c = [
            p0,
            v0,
            half * a0,
            gamma / T::lit(6.0),
            beta / T::lit(24.0),
            alpha / T::lit(120.0),
        ];
    }
    Ok(MotionPrimitive {
        coeffs,
        duration,
        start: *s0,
        end: *s1,
    })
}

impl<T: Real> MotionPrimitive<T> {
    /// Evaluates without range checking.
    pub fn eval(&self, t: T) -> PrimitiveSample<T> {
        let mut out = PrimitiveSample {
            p: Vector3::zeros(),
            v: Vector3::zeros(),
            a: Vector3::zeros(),
            j: Vector3::zeros(),
        };
        for axis in 0..3 {
            let c = &self.coeffs[axis];
            let (k2, k3, k4, k5) = (T::lit(2.0), T::lit(3.0), T::lit(4.0), T::lit(5.0));
            out.p[axis] = c[0] + t * (c[1] + t * (c[2] + t * (c[3] + t * (c[4] + t * c[5]))));
            out.v[axis] = c[1] + t * (k2 * c[2] + t * (k3 * c[3] + t * (k4 * c[4] + t * k5 * c[5])));
            out.a[axis] = k2 * c[2] + t * (T::lit(6.0) * c[3] + t * (T::lit(12.0) * c[4] + t * T::lit(20.0) * c[5]));
            out.j[axis] = T::lit(6.0) * c[3] + t * (T::lit(24.0) * c[4] + t * T::lit(60.0) * c[5]);
        }
        out
    }

    pub fn state_at(&self, t: T) -> FlatState<T> {
        let s = self.eval(t);
        FlatState { p: s.p, v: s.v, a: s.a }
    }

    /// `integral_0^T |jerk|^2 dt`, exact.
    pub fn jerk_cost(&self) -> T {
        let t = self.duration;
        self.coeffs
            .iter()
            .map(|c| {
                let j = [T::lit(6.0) * c[3], T::lit(24.0) * c[4], T::lit(60.0) * c[5]];
                let sq = poly_mul::<T, 3, 3, 5>(&j, &j);
                sq.iter()
                    .enumerate()
                    .map(|(k, &ck)| ck * t.powi(k as i32 + 1) / T::from_usize_lossy(k + 1))
                    .fold(T::zero(), |acc, x| acc + x)
            })
            .fold(T::zero(), |acc, x| acc + x)
    }
}

/// Samples the primitive at `t` in `[0, T]`.
pub fn sample_primitive<T: Real>(prim: &MotionPrimitive<T>, t: T) -> Result<PrimitiveSample<T>> {
    if t < T::zero() || t > prim.duration {
        return Err(Error::OutOfRange {
            t: t.as_f64(),
            end: prim.duration.as_f64(),
        });
    }
    Ok(prim.eval(t))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FeasibilityVerdict<T: Real> {
    Feasible,
    /// Thrust leaves `[f_min, f_max]` at the given time.
    InfeasibleThrust(T),
    /// Body-rate proxy exceeds `omega_max` at the given time.
    InfeasibleRate(T),
    /// Neither feasibility nor infeasibility could be certified.
    Indeterminate,
}

impl<T: Real> FeasibilityVerdict<T> {
    pub fn is_feasible(&self) -> bool {
        matches!(self, FeasibilityVerdict::Feasible)
    }

    pub fn is_infeasible(&self) -> bool {
        matches!(
            self,
            FeasibilityVerdict::InfeasibleThrust(_) | FeasibilityVerdict::InfeasibleRate(_)
        )
    }
}

/// Default resolution of the feasibility check, seconds.
pub const DEFAULT_DT_CHECK: f64 = 2e-3;

/// Primitives shorter than this many check intervals are not verified.
const MIN_CHECK_INTERVALS: f64 = 5.0;

fn poly_mul<T: Real, const A: usize, const B: usize, const C: usize>(a: &[T; A], b: &[T; B]) -> [T; C] {
    debug_assert_eq!(A + B - 1, C);
    let mut out = [T::zero(); C];
    for (i, &ai) in a.iter().enumerate() {
        for (j, &bj) in b.iter().enumerate() {
            out[i + j] += ai * bj;
        }
    }
    out
}

/// Re-expands `c(t)` around `m`: returns `q` with `q(s) = c(m + s)`.
fn taylor_shift<T: Real, const N: usize>(c: &[T; N], m: T) -> [T; N] {
    let mut q = *c;
    for i in 0..N.saturating_sub(1) {
        for j in (i..N - 1).rev() {
            let hi = q[j + 1];
            q[j] += m * hi;
        }
    }
    q
}

/// Range enclosure of `q(s)` for `|s| <= h`.
fn enclose<T: Real, const N: usize>(q: &[T; N], h: T) -> (T, T) {
    let mut r = T::zero();
    let mut hk = T::one();
    for &c in q.iter().skip(1) {
        hk *= h;
        r += c.abs() * hk;
    }
    (q[0] - r, q[0] + r)
}

/// Squared thrust `|a - g|^2` (degree 6) and `|j x (a - g)|^2` (degree 10)
/// as polynomials in time.
fn flat_input_polys<T: Real>(prim: &MotionPrimitive<T>, g: &Vector3<T>) -> ([T; 7], [T; 11]) {
    let mut acc = [[T::zero(); 4]; 3];
    let mut jerk = [[T::zero(); 3]; 3];
    for axis in 0..3 {
        let c = &prim.coeffs[axis];
        acc[axis] = [
            T::lit(2.0) * c[2] - g[axis],
            T::lit(6.0) * c[3],
            T::lit(12.0) * c[4],
            T::lit(20.0) * c[5],
        ];
        jerk[axis] = [T::lit(6.0) * c[3], T::lit(24.0) * c[4], T::lit(60.0) * c[5]];
    }
    let mut f2 = [T::zero(); 7];
    for a in &acc {
        let sq = poly_mul::<T, 4, 4, 7>(a, a);
        for (o, s) in f2.iter_mut().zip(sq) {
            *o += s;
        }
    }
    let mut n2 = [T::zero(); 11];
    for (i, k) in [(1usize, 2usize), (2, 0), (0, 1)] {
        let lhs = poly_mul::<T, 3, 4, 6>(&jerk[i], &acc[k]);
        let rhs = poly_mul::<T, 3, 4, 6>(&jerk[k], &acc[i]);
        let mut cross = [T::zero(); 6];
        for m in 0..6 {
            cross[m] = lhs[m] - rhs[m];
        }
        let sq = poly_mul::<T, 6, 6, 11>(&cross, &cross);
        for (o, s) in n2.iter_mut().zip(sq) {
            *o += s;
        }
    }
    (f2, n2)
}

/// Verifies the thrust and body-rate limits over the whole primitive.
///
/// Thrust is verified over the whole primitive before body rates. Intervals
/// are bisected until the polynomial range enclosures either certify the
/// limits or the interval midpoint violates them. Intervals still ambiguous at
/// `dt_check` width make the verdict `Indeterminate` unless a violation is
/// found elsewhere; primitives shorter than five check intervals are not
/// verified at all.
pub fn check_feasibility<T: Real>(
    prim: &MotionPrimitive<T>,
    limits: &InputLimits<T>,
    g: &Vector3<T>,
    dt_check: T,
) -> FeasibilityVerdict<T> {
    if !(dt_check > T::zero()) || prim.duration < T::lit(MIN_CHECK_INTERVALS) * dt_check {
        return FeasibilityVerdict::Indeterminate;
    }
    let (f2, n2) = flat_input_polys(prim, g);
    let fmin2 = limits.f_min * limits.f_min;
    let fmax2 = limits.f_max * limits.f_max;
    let wmax2 = limits.omega_max * limits.omega_max;
    let half = T::lit(0.5);

    let mut ambiguous = false;
    for pass in [Pass::Thrust, Pass::Rate] {
        let mut stack = vec![(T::zero(), prim.duration)];
        while let Some((t0, t1)) = stack.pop() {
            let m = half * (t0 + t1);
            let h = half * (t1 - t0);
            let fq = taylor_shift(&f2, m);
            let (f2_lo, f2_hi) = enclose(&fq, h);
            let f2_m = fq[0];
            let certified = match pass {
                Pass::Thrust => {
                    if f2_hi < fmin2 || f2_lo > fmax2 || f2_m < fmin2 || f2_m > fmax2 {
                        return FeasibilityVerdict::InfeasibleThrust(m);
                    }
                    f2_lo >= fmin2 && f2_hi <= fmax2
                }
                Pass::Rate => {
                    let nq = taylor_shift(&n2, m);
                    let (_, n2_hi) = enclose(&nq, h);
                    if nq[0] > wmax2 * f2_m * f2_m {
                        return FeasibilityVerdict::InfeasibleRate(m);
                    }
                    f2_lo > T::zero() && n2_hi <= wmax2 * f2_lo * f2_lo
                }
            };
            if certified {
                continue;
            }
            if t1 - t0 <= dt_check {
                ambiguous = true;
                continue;
            }
            stack.push((m, t1));
            stack.push((t0, m));
        }
    }
    if ambiguous {
        FeasibilityVerdict::Indeterminate
    } else {
        FeasibilityVerdict::Feasible
    }
}

#[derive(Clone, Copy)]
enum Pass {
    Thrust,
    Rate,
}
