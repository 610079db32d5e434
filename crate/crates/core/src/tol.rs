//! Numerical tolerances shared across modules.

/// Allowed drift of `<x,x>_M + 1`, relative to `max(1, |x|^2)`.
pub const ON_MANIFOLD: f64 = 1e-10;
/// Allowed `<base, v>_M`, relative to `|base| |v|`.
pub const TANGENT: f64 = 1e-10;
/// `-<x,y>_M` may dip this far below one before we call it a bug.
pub const DIST_FLOOR: f64 = 1e-8;
/// Below this `u - 1` the arccosh series branch takes over.
pub const ACOSH_SERIES: f64 = 1e-8;
/// Largest tangent norm `exp` accepts.
pub const R_MAX: f64 = 30.0;
/// Relative rank cutoff in Minkowski Gram-Schmidt.
pub const RANK: f64 = 1e-9;
/// Ties in a shifted max.
pub const TIE: f64 = 1e-12;
/// Slack for sampled subgradient inequalities.
pub const SUBGRAD: f64 = 1e-8;
/// Slack on `cos(theta) <= 1` in the Polyak step.
pub const POLYAK_COS: f64 = 1e-12;
/// Polyak stops once `s_k` is below this: the ball is a point up to the
/// resolution of `dist`.
pub const POLYAK_COLLAPSE: f64 = 1e-8;
/// Membership slack for half-spaces, in distance units.
pub const HALFSPACE: f64 = 1e-12;
