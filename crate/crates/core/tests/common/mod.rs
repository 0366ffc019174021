//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use gapflight::geometry::{plane_basis, ApproachSide, GapSpec, PlaneBasis};
use gapflight::primitive::{FlatState, InputLimits, MotionPrimitive};
use nalgebra::Vector3;
use rand::Rng;

pub fn g() -> Vector3<f64> {
    Vector3::new(0.0, 0.0, -9.81)
}

pub fn random_gap<R: Rng>(rng: &mut R, roll_deg: (f64, f64), pitch_deg: (f64, f64)) -> (GapSpec<f64>, PlaneBasis<f64>) {
    let roll = rng.random_range(roll_deg.0..=roll_deg.1).to_radians();
    let pitch = rng.random_range(pitch_deg.0..=pitch_deg.1).to_radians();
    let yaw = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
    let pos = Vector3::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0), rng.random_range(1.0..3.0));
    let gap = GapSpec::from_rpy(pos, roll, pitch, yaw, 0.8, 0.28).unwrap();
    let basis = plane_basis(&gap, &g(), ApproachSide::NegativeNormal).unwrap();
    (gap, basis)
}

/// Smallest time to the gap center over a uniform `n x n` grid of
/// `(gamma, d)` in `(0, gamma_max] x [d_min, d_max]`, from the ballistic
/// equations written out directly.
pub fn grid_min_tc(basis: &PlaneBasis<f64>, v0_max: f64, d_min: f64, d_max: f64, gamma_max: f64, n: usize) -> Option<f64> {
    let g1 = g().dot(&basis.e1);
    let g2 = g().dot(&basis.e2);
    assert!(g1 < 0.0);
    let mut best: Option<f64> = None;
    for i in 1..=n {
        let gamma = gamma_max * i as f64 / n as f64;
        let t = (-2.0 * gamma / g1).sqrt();
        for j in 0..n {
            let d = d_min + (d_max - d_min) * j as f64 / (n - 1) as f64;
            let v1 = gamma / t - 0.5 * g1 * t;
            let v2 = d / t - 0.5 * g2 * t;
            if v1.hypot(v2) > v0_max {
                continue;
            }
            // must also clear the gap by d on the far side
            let v2c = v2 + g2 * t;
            if v2c * v2c + 2.0 * g2 * d < 0.0 || (v2c <= 0.0 && g2 <= 0.0) {
                continue;
            }
            best = Some(best.map_or(t, |b: f64| b.min(t)));
        }
    }
    best
}

/// Thrust magnitude and body-rate proxy at `t`, from position derivatives.
pub fn inputs_at(prim: &MotionPrimitive<f64>, t: f64) -> (f64, f64) {
    let s = prim.eval(t);
    let f = s.a - g();
    let fn_ = f.norm();
    let z = f / fn_;
    let j_perp = s.j - z * z.dot(&s.j);
    (fn_, j_perp.norm() / fn_)
}

/// Whether all `n` uniformly spaced samples respect the limits.
pub fn dense_feasible(prim: &MotionPrimitive<f64>, limits: &InputLimits<f64>, n: usize) -> bool {
    (0..n).all(|i| {
        let t = prim.duration * i as f64 / (n - 1) as f64;
        let (f, w) = inputs_at(prim, t);
        f >= limits.f_min && f <= limits.f_max && w <= limits.omega_max
    })
}

pub fn random_state<R: Rng>(rng: &mut R, scale: [f64; 3]) -> FlatState<f64> {
    let mut v = |s: f64| Vector3::new(rng.random_range(-s..s), rng.random_range(-s..s), rng.random_range(-s..s));
    FlatState {
        p: v(scale[0]),
        v: v(scale[1]),
        a: v(scale[2]),
    }
}

/// Largest `<x, d>` over `n` unit vectors evenly spaced on the cone
/// `<x, z> = k`.
pub fn cone_sweep_max(z: &Vector3<f64>, d: &Vector3<f64>, k: f64, n: usize) -> f64 {
    let helper = if z.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
    let u = z.cross(&helper).normalize();
    let w = z.cross(&u);
    let s = (1.0 - k * k).sqrt();
    (0..n)
        .map(|i| {
            let phi = std::f64::consts::TAU * i as f64 / n as f64;
            let x = (u * phi.cos() + w * phi.sin()) * s + z * k;
            x.dot(d)
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

pub fn angle_between(a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    a.cross(b).norm().atan2(a.dot(b))
}

fn poly_derivative(c: &[f64]) -> Vec<f64> {
    c.iter().enumerate().skip(1).map(|(i, x)| x * i as f64).collect()
}

fn poly_square_integral(c: &[f64], t: f64) -> f64 {
    let mut sum = 0.0;
    for (i, a) in c.iter().enumerate() {
        for (j, b) in c.iter().enumerate() {
            sum += a * b * t.powi((i + j + 1) as i32) / (i + j + 1) as f64;
        }
    }
    sum
}

/// Integrated squared jerk of per-axis monomial coefficients over `[0, t]`.
pub fn jerk_cost_of(coeffs: &[Vec<f64>], t: f64) -> f64 {
    coeffs
        .iter()
        .map(|c| poly_square_integral(&poly_derivative(&poly_derivative(&poly_derivative(c))), t))
        .sum()
}

/// `t^3 (T - t)^3 q(t)` expanded; zero with its first two derivatives at both
/// ends, so adding it keeps every boundary condition.
pub fn boundary_bump(duration: f64, q: [f64; 3]) -> Vec<f64> {
    let mut poly = vec![0.0, 0.0, 0.0, 1.0];
    for _ in 0..3 {
        // multiply by (T - t)
        let mut next = vec![0.0; poly.len() + 1];
        for (i, a) in poly.iter().enumerate() {
            next[i] += a * duration;
            next[i + 1] -= a;
        }
        poly = next;
    }
    let mut out = vec![0.0; poly.len() + 2];
    for (i, a) in poly.iter().enumerate() {
        for (j, b) in q.iter().enumerate() {
            out[i + j] += a * b;
        }
    }
    out
}

pub fn add_poly(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len().max(b.len())];
    for (i, x) in a.iter().enumerate() {
        out[i] += x;
    }
    for (i, x) in b.iter().enumerate() {
        out[i] += x;
    }
    out
}
