//! First-order interpolation by g-convex functions: the pairwise necessary
//! conditions, a sufficient construction for small gradients, the
//! three-point obstruction, and the minimal function through one sample.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hyperboloid::{dist, exp, gspan, log, HPoint, HTangent};
use crate::sample;
use crate::zoo::{
    fn_dist_point, fn_dist_sub, fn_pseudo_affine, fn_shifted_max, fn_sqdist_point, fn_sum,
    Oracle, OracleSample,
};

const NECESSARY_SLACK: f64 = -1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawData", into = "RawData")]
pub struct InterpData {
    pub mu: f64,
    pub items: Vec<OracleSample>,
}

#[derive(Serialize, Deserialize)]
struct RawData {
    d: usize,
    mu: f64,
    items: Vec<OracleSample>,
}

impl TryFrom<RawData> for InterpData {
    type Error = Error;
    fn try_from(r: RawData) -> Result<Self> {
        for it in &r.items {
            if it.x.dim() != r.d {
                return Err(Error::Dimension {
                    expected: r.d + 1,
                    got: it.x.coords().len(),
                });
            }
        }
        InterpData::new(r.mu, r.items)
    }
}

impl From<InterpData> for RawData {
    fn from(d: InterpData) -> Self {
        RawData {
            d: d.dim().unwrap_or(0),
            mu: d.mu,
            items: d.items,
        }
    }
}

impl InterpData {
    pub fn new(mu: f64, items: Vec<OracleSample>) -> Result<Self> {
        if !(mu >= 0.0) {
            return Err(Error::Domain(format!("mu = {mu} must be >= 0")));
        }
        if let Some(first) = items.first() {
            let d = first.x.dim();
            for it in &items {
                if it.x.dim() != d {
                    return Err(Error::Dimension {
                        expected: d + 1,
                        got: it.x.coords().len(),
                    });
                }
                if it.g.base() != &it.x {
                    return Err(Error::Geometry("g_i must be based at x_i".into()));
                }
            }
        }
        Ok(InterpData { mu, items })
    }

    pub fn dim(&self) -> Option<usize> {
        self.items.first().map(|s| s.x.dim())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NecessaryReport {
    pub pass: bool,
    /// Ordered pair `(i, j)` with the smallest slack.
    pub worst: Option<(usize, usize)>,
    pub slack: f64,
}

/// `F_j - F_i - <g_i, log_{x_i} x_j> - mu/2 dist^2` over all ordered pairs.
pub fn check_necessary(data: &InterpData) -> Result<NecessaryReport> {
    let mut worst = None;
    let mut slack = f64::INFINITY;
    for (i, a) in data.items.iter().enumerate() {
        for (j, b) in data.items.iter().enumerate() {
            let v = log(&a.x, &b.x)?;
            let n = v.norm();
            let s = b.value - a.value - a.g.inner(&v) - 0.5 * data.mu * n * n;
            if s < slack {
                slack = s;
                worst = Some((i, j));
            }
        }
    }
    if data.items.is_empty() {
        slack = 0.0;
    }
    Ok(NecessaryReport {
        pass: slack >= NECESSARY_SLACK,
        worst,
        slack,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InterpVerification {
    /// `max_i |f(x_i) - F_i|`.
    pub value_error: f64,
    /// `min` over samples of `f(z) - F_i - <g_i, log_{x_i} z>`.
    pub subgradient_slack: f64,
    pub samples: usize,
    pub pass: bool,
}

#[derive(Debug, Clone)]
pub struct Interpolant {
    pub f: Oracle,
    pub verification: InterpVerification,
}

/// `max_i {F_i + <g_i, log_{x_i} x> + mu/2 dist(x_i, x)^2}`, valid when
/// every `|g_i| <= mu/2`.
pub fn construct_sufficient(data: &InterpData, seed: u64) -> Result<Interpolant> {
    if data.items.is_empty() {
        return Err(Error::NotApplicable("no data".into()));
    }
    for (i, it) in data.items.iter().enumerate() {
        let n = it.g.norm();
        if n > 0.5 * data.mu * (1.0 + 1e-12) {
            return Err(Error::NotApplicable(format!(
                "|g_{i}| = {n} exceeds mu/2 = {}",
                0.5 * data.mu
            )));
        }
    }
    let nec = check_necessary(data)?;
    if !nec.pass {
        return Err(Error::NotApplicable(format!(
            "necessary conditions fail at pair {:?} (slack {:e})",
            nec.worst, nec.slack
        )));
    }
    let parts: Vec<(Oracle, f64)> = data
        .items
        .iter()
        .map(|it| {
            let piece = fn_sum(
                vec![
                    (1.0, fn_pseudo_affine(it.x.clone(), it.g.clone())),
                    (data.mu, fn_sqdist_point(it.x.clone())),
                ],
                it.value,
            );
            (piece, 0.0)
        })
        .collect();
    let f = fn_shifted_max(parts)?;
    let verification = verify_interpolant(f.as_ref(), data, 100, seed)?;
    Ok(Interpolant { f, verification })
}

/// Exact values at the nodes and the subgradient inequality on random
/// points around each node.
pub fn verify_interpolant(
    f: &dyn crate::zoo::FnOracle,
    data: &InterpData,
    samples: usize,
    seed: u64,
) -> Result<InterpVerification> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut value_error: f64 = 0.0;
    let mut slack = f64::INFINITY;
    for it in &data.items {
        value_error = value_error.max((f.value(&it.x)? - it.value).abs());
    }
    for k in 0..samples {
        let it = &data.items[k % data.items.len()];
        let z = sample::point_in_ball(&mut rng, &it.x, 2.0);
        let fz = f.value(&z)?;
        for jt in &data.items {
            let lower = jt.value + jt.g.inner(&log(&jt.x, &z)?);
            slack = slack.min(fz - lower);
        }
    }
    Ok(InterpVerification {
        value_error,
        subgradient_slack: slack,
        samples,
        pass: value_error <= 1e-9 && slack >= -1e-9,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Obstruction {
    pub theta: f64,
    pub data: InterpData,
    /// The altitude foot on `[x_2, x_3]`.
    pub p: HPoint,
    pub h: f64,
    /// `1 - h / cos(theta)`, forced at `p` by convexity along `[x_1, p]`.
    pub lower: f64,
    /// `max(F_2, F_3)`, forced at `p` by convexity along `[x_2, x_3]`.
    pub upper: f64,
    pub valid: bool,
}

/// Three points in `H^2`: apex `x_1` with legs of length 1 and apex angle
/// `2 theta`. With `perpendicular`, `g_2, g_3` have length `1/sin(alpha)`
/// and are normal to the base, pointing toward the apex; otherwise zero.
pub fn obstruction_certificate(theta: f64) -> Result<Obstruction> {
    obstruction_with(theta, false)
}

pub fn obstruction_with(theta: f64, perpendicular: bool) -> Result<Obstruction> {
    if !(theta > 0.0 && theta < std::f64::consts::FRAC_PI_2) {
        return Err(Error::Domain(format!("theta = {theta} not in (0, pi/2)")));
    }
    let x1 = HPoint::origin(2);
    let leg = |s: f64| -> Result<HPoint> {
        exp(
            &x1,
            &HTangent::new(x1.clone(), vec![0.0, theta.cos(), s * theta.sin()])?,
        )
    };
    let (x2, x3) = (leg(1.0)?, leg(-1.0)?);
    let h = (theta.cos() * 1f64.tanh()).atanh();
    let p = exp(&x1, &HTangent::new(x1.clone(), vec![0.0, h, 0.0])?)?;
    let to_p = log(&x1, &p)?;
    let g1 = to_p.scale(-1.0 / (theta.cos() * to_p.norm()));
    let side = |x: &HPoint, other: &HPoint| -> Result<HTangent> {
        if !perpendicular {
            return Ok(HTangent::zero(x));
        }
        let along = log(x, other)?;
        let along = along.scale(1.0 / along.norm());
        let up = log(x, &x1)?;
        let cos_a = up.inner(&along) / up.norm();
        let sin_a = (1.0 - cos_a * cos_a).sqrt();
        let normal = up.add_scaled(-up.inner(&along), &along);
        Ok(normal.scale(1.0 / (normal.norm() * sin_a)))
    };
    let g2 = side(&x2, &x3)?;
    let g3 = side(&x3, &x2)?;
    let items = vec![
        OracleSample {
            value: 1.0,
            x: x1,
            g: g1,
        },
        OracleSample {
            value: 0.0,
            x: x2,
            g: g2,
        },
        OracleSample {
            value: 0.0,
            x: x3,
            g: g3,
        },
    ];
    let data = InterpData::new(0.0, items)?;
    let lower = 1.0 - h / theta.cos();
    let upper = 0.0;
    Ok(Obstruction {
        theta,
        data,
        p,
        h,
        lower,
        upper,
        valid: lower > upper,
    })
}

#[derive(Debug, Clone)]
pub struct MinimalFunction {
    pub f: Oracle,
    pub value_at_x: f64,
    /// `F + <g, log_y x>`.
    pub target: f64,
}

/// The g-convex `f` with `f(y) = F`, `g` in `df(y)` and the least value at
/// `x`: distance to `x'` along the line through `y, x`, plus `|g_perp|`
/// times the distance to that line.
pub fn minimal_function(fval: f64, y: &HPoint, g: &HTangent, x: &HPoint) -> Result<MinimalFunction> {
    let v = log(y, x)?;
    let dxy = v.norm();
    if dxy == 0.0 {
        return Err(Error::Domain("x = y".into()));
    }
    let ip = g.inner(&v);
    let g_par = v.scale(ip / (dxy * dxy));
    let g_perp = g.add_scaled(-1.0, &g_par);
    let xp = if ip <= 0.0 {
        x.clone()
    } else {
        exp(y, &v.scale(-1.0))?
    };
    let (a, b) = (g_par.norm(), g_perp.norm());
    let line = gspan(&[y.clone(), x.clone()], &[])?;
    let f_par = fn_sum(
        vec![(a, fn_dist_point(xp.clone()))],
        fval - a * dist(&xp, y)?,
    );
    let f_perp = fn_sum(vec![(b, fn_dist_sub(line, 0.0))], 0.0);
    let f = fn_sum(vec![(1.0, f_par), (1.0, f_perp)], 0.0);
    let value_at_x = f.value(x)?;
    Ok(MinimalFunction {
        f,
        value_at_x,
        target: fval + ip,
    })
}
