//! Seeded random points and tangent vectors.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::hyperboloid::{exp, tangent_frame, HPoint, HTangent};

/// Uniform on the unit sphere of `T_x`.
pub fn unit_tangent<R: Rng + ?Sized>(rng: &mut R, x: &HPoint) -> HTangent {
    let frame = tangent_frame(x);
    unit_in_frame(rng, x, &frame)
}

/// Same as [`unit_tangent`] with a precomputed frame at `x`.
pub fn unit_in_frame<R: Rng + ?Sized>(rng: &mut R, x: &HPoint, frame: &[HTangent]) -> HTangent {
    loop {
        let xi: Vec<f64> = (0..frame.len()).map(|_| rng.sample(StandardNormal)).collect();
        let n = xi.iter().map(|a| a * a).sum::<f64>().sqrt();
        if n < 1e-12 {
            continue;
        }
        let mut v = HTangent::zero(x);
        for (c, f) in xi.iter().zip(frame) {
            v = v.add_scaled(c / n, f);
        }
        return v;
    }
}

/// Random direction at `center`, distance uniform in `[0, radius]`.
pub fn point_in_ball<R: Rng + ?Sized>(rng: &mut R, center: &HPoint, radius: f64) -> HPoint {
    let u = unit_tangent(rng, center);
    let t = rng.random::<f64>() * radius;
    exp(center, &u.scale(t)).expect("radius within R_MAX")
}

/// Volume-uniform point of `B(center, radius)` in `H^d`: the radius has
/// density proportional to `sinh(t)^(d-1)`.
pub fn uniform_in_ball<R: Rng + ?Sized>(
    rng: &mut R,
    center: &HPoint,
    frame: &[HTangent],
    radius: f64,
) -> HPoint {
    let t = ball_radius(rng, center.dim(), radius);
    let u = unit_in_frame(rng, center, frame);
    exp(center, &u.scale(t)).expect("radius within R_MAX")
}

/// Radius with density proportional to `sinh(t)^(d-1)` on `[0, radius]`.
/// Proposes from `e^{(d-1)t}` and accepts with `(1 - e^{-2t})^(d-1)`.
pub fn ball_radius<R: Rng + ?Sized>(rng: &mut R, d: usize, radius: f64) -> f64 {
    if d < 2 || radius == 0.0 {
        return rng.random::<f64>() * radius;
    }
    let k = (d - 1) as f64;
    let floor = (-k * radius).exp();
    loop {
        let u: f64 = rng.random();
        let t = (radius + (u + (1.0 - u) * floor).ln() / k).max(0.0);
        let accept = (-(-2.0 * t).exp_m1()).powi(d as i32 - 1);
        if rng.random::<f64>() <= accept {
            return t;
        }
    }
}
