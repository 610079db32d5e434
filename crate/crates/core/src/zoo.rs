//! First-order oracles: distances, squared distances, shifted maxima,
//! Moreau envelopes, pseudo-affine functions and the `u_R` scaling.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hyperboloid::{
    dexp_adjoint, dist, exp, log, minner, ptransport, HPoint, HTangent,
    TotallyGeodesicSub,
};
use crate::qp::simplex_qp;
use crate::tol;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSample", into = "RawSample")]
pub struct OracleSample {
    pub value: f64,
    pub x: HPoint,
    pub g: HTangent,
}

#[derive(Serialize, Deserialize)]
struct RawSample {
    #[serde(rename = "F")]
    value: f64,
    x: Vec<f64>,
    g: Vec<f64>,
}

impl TryFrom<RawSample> for OracleSample {
    type Error = Error;
    fn try_from(r: RawSample) -> Result<Self> {
        let x = HPoint::new(r.x)?;
        let g = HTangent::new(x.clone(), r.g)?;
        Ok(OracleSample {
            value: r.value,
            x,
            g,
        })
    }
}

impl From<OracleSample> for RawSample {
    fn from(s: OracleSample) -> Self {
        RawSample {
            value: s.value,
            x: s.x.coords().to_vec(),
            g: s.g.into_vec(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FnMeta {
    pub lipschitz: Option<f64>,
    pub smoothness: Option<f64>,
    pub minimizer: Option<HPoint>,
    pub minimum: Option<f64>,
    pub gconvex: bool,
    /// Modulus of strong g-convexity, when known.
    pub strong_convexity: Option<f64>,
}

pub trait FnOracle: Send + Sync + fmt::Debug {
    fn eval(&self, x: &HPoint) -> Result<OracleSample>;
    fn meta(&self) -> FnMeta;

    fn value(&self, x: &HPoint) -> Result<f64> {
        Ok(self.eval(x)?.value)
    }
}

pub type Oracle = Arc<dyn FnOracle>;

#[derive(Debug, Clone)]
struct DistPoint {
    z: HPoint,
}

impl FnOracle for DistPoint {
    fn eval(&self, x: &HPoint) -> Result<OracleSample> {
        let v = log(x, &self.z)?;
        let n = v.norm();
        let g = if n == 0.0 {
            HTangent::zero(x)
        } else {
            v.scale(-1.0 / n)
        };
        Ok(OracleSample {
            value: dist(x, &self.z)?,
            x: x.clone(),
            g,
        })
    }

    fn meta(&self) -> FnMeta {
        FnMeta {
            lipschitz: Some(1.0),
            minimizer: Some(self.z.clone()),
            minimum: Some(0.0),
            gconvex: true,
            ..Default::default()
        }
    }
}

pub fn fn_dist_point(z: HPoint) -> Oracle {
    Arc::new(DistPoint { z })
}

#[derive(Debug, Clone)]
struct SqDistPoint {
    z: HPoint,
}

impl FnOracle for SqDistPoint {
    fn eval(&self, x: &HPoint) -> Result<OracleSample> {
        let v = log(x, &self.z)?;
        let n = v.norm();
        Ok(OracleSample {
            value: 0.5 * n * n,
            x: x.clone(),
            g: v.scale(-1.0),
        })
    }

    fn meta(&self) -> FnMeta {
        FnMeta {
            minimizer: Some(self.z.clone()),
            minimum: Some(0.0),
            gconvex: true,
            strong_convexity: Some(1.0),
            ..Default::default()
        }
    }
}

pub fn fn_sqdist_point(z: HPoint) -> Oracle {
    Arc::new(SqDistPoint { z })
}

#[derive(Debug, Clone)]
struct DistSub {
    s: TotallyGeodesicSub,
    shift: f64,
}

impl FnOracle for DistSub {
    fn eval(&self, x: &HPoint) -> Result<OracleSample> {
        if x.coords().len() != self.s.basis()[0].len() {
            return Err(Error::Dimension {
                expected: self.s.basis()[0].len(),
                got: x.coords().len(),
            });
        }
        // grad asinh(s) with s^2 = sum_j <x,n_j>^2, projected onto T_x
        let mut acc = vec![0.0; x.coords().len()];
        let mut s2 = 0.0;
        for n in self.s.normals() {
            let c = minner(x.coords(), n);
            s2 += c * c;
            for (a, b) in acc.iter_mut().zip(n) {
                *a += c * b;
            }
        }
        let s = s2.sqrt();
        // on S up to rounding: use the zero subgradient
        let g = if s <= 1e-13 * crate::hyperboloid::euclid_norm(x.coords()) {
            HTangent::zero(x)
        } else {
            let k = 1.0 / (s * (1.0 + s2).sqrt());
            let v: Vec<f64> = acc
                .iter()
                .zip(x.coords())
                .map(|(a, b)| k * (a + s2 * b))
                .collect();
            HTangent::project(x, v)
        };
        Ok(OracleSample {
            value: s.asinh() - self.shift,
            x: x.clone(),
            g,
        })
    }

    fn meta(&self) -> FnMeta {
        FnMeta {
            lipschitz: Some(1.0),
            minimum: Some(-self.shift),
            minimizer: Some(self.s.point()),
            gconvex: true,
            ..Default::default()
        }
    }
}

/// `x -> dist(x, S) - shift`.
pub fn fn_dist_sub(s: TotallyGeodesicSub, shift: f64) -> Oracle {
    Arc::new(DistSub { s, shift })
}

/// Result of evaluating a shifted max with bookkeeping.
#[derive(Debug, Clone)]
pub struct MaxEval {
    pub sample: OracleSample,
    /// Index of the part whose subgradient was returned.
    pub active: usize,
    /// More than one part within `tol::TIE` of the max.
    pub tie: bool,
    /// Value of each part, offsets applied.
    pub part_values: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ShiftedMax {
    parts: Vec<(Oracle, f64)>,
}

impl ShiftedMax {
    pub fn new(parts: Vec<(Oracle, f64)>) -> Result<Self> {
        if parts.is_empty() {
            return Err(Error::Domain("shifted max needs at least one part".into()));
        }
        Ok(ShiftedMax { parts })
    }

    pub fn parts(&self) -> &[(Oracle, f64)] {
        &self.parts
    }

    pub fn eval_detailed(&self, x: &HPoint) -> Result<MaxEval> {
        let mut samples = Vec::with_capacity(self.parts.len());
        let mut part_values = Vec::with_capacity(self.parts.len());
        for (f, off) in &self.parts {
            let s = f.eval(x)?;
            part_values.push(s.value - off);
            samples.push(s);
        }
        let mut active = 0;
        for (i, v) in part_values.iter().enumerate() {
            if *v > part_values[active] {
                active = i;
            }
        }
        let top = part_values[active];
        let tie = part_values
            .iter()
            .enumerate()
            .any(|(i, v)| i != active && (top - v) <= tol::TIE);
        if tie {
            log::warn!("shifted max tie at part {active} (value {top})");
        }
        let g = samples.swap_remove(active).g;
        Ok(MaxEval {
            sample: OracleSample {
                value: top,
                x: x.clone(),
                g,
            },
            active,
            tie,
            part_values,
        })
    }
}

impl FnOracle for ShiftedMax {
    fn eval(&self, x: &HPoint) -> Result<OracleSample> {
        Ok(self.eval_detailed(x)?.sample)
    }

    fn meta(&self) -> FnMeta {
        let metas: Vec<FnMeta> = self.parts.iter().map(|(f, _)| f.meta()).collect();
        let lipschitz = metas
            .iter()
            .map(|m| m.lipschitz)
            .try_fold(0.0f64, |acc, l| l.map(|l| acc.max(l)));
        FnMeta {
            lipschitz,
            gconvex: metas.iter().all(|m| m.gconvex),
            ..Default::default()
        }
    }
}

/// `x -> max_i (f_i(x) - offset_i)`; ties go to the lowest index.
pub fn fn_shifted_max(parts: Vec<(Oracle, f64)>) -> Result<Oracle> {
    Ok(Arc::new(ShiftedMax::new(parts)?))
}

#[derive(Debug, Clone)]
struct WeightedSum {
    parts: Vec<(f64, Oracle)>,
    constant: f64,
}

impl FnOracle for WeightedSum {
    fn eval(&self, x: &HPoint) -> Result<OracleSample> {
        let mut value = self.constant;
        let mut g = HTangent::zero(x);
        for (w, f) in &self.parts {
            let s = f.eval(x)?;
            value += w * s.value;
            g = g.add_scaled(*w, &s.g);
        }
        Ok(OracleSample {
            value,
            x: x.clone(),
            g,
        })
    }

    fn meta(&self) -> FnMeta {
        let metas: Vec<FnMeta> = self.parts.iter().map(|(_, f)| f.meta()).collect();
        let lipschitz = self
            .parts
            .iter()
            .zip(&metas)
            .try_fold(0.0, |acc, ((w, _), m)| m.lipschitz.map(|l| acc + w.abs() * l));
        let smoothness = self
            .parts
            .iter()
            .zip(&metas)
            .try_fold(0.0, |acc, ((w, _), m)| m.smoothness.map(|l| acc + w.abs() * l));
        let strong = self
            .parts
            .iter()
            .zip(&metas)
            .map(|((w, _), m)| w * m.strong_convexity.unwrap_or(0.0))
            .sum::<f64>();
        FnMeta {
            lipschitz,
            smoothness,
            gconvex: self.parts.iter().zip(&metas).all(|((w, _), m)| *w >= 0.0 && m.gconvex),
            strong_convexity: (strong > 0.0).then_some(strong),
            ..Default::default()
        }
    }
}

/// `constant + sum_i w_i f_i`.
pub fn fn_sum(parts: Vec<(f64, Oracle)>, constant: f64) -> Oracle {
    Arc::new(WeightedSum { parts, constant })
}

#[derive(Debug, Clone)]
struct Constant {
    c: f64,
}

impl FnOracle for Constant {
    fn eval(&self, x: &HPoint) -> Result<OracleSample> {
        Ok(OracleSample {
            value: self.c,
            x: x.clone(),
            g: HTangent::zero(x),
        })
    }

    fn meta(&self) -> FnMeta {
        FnMeta {
            lipschitz: Some(0.0),
            smoothness: Some(0.0),
            minimum: Some(self.c),
            gconvex: true,
            ..Default::default()
        }
    }
}

pub fn fn_constant(c: f64) -> Oracle {
    Arc::new(Constant { c })
}

#[derive(Debug, Clone)]
struct PseudoAffine {
    y: HPoint,
    g: HTangent,
}

impl FnOracle for PseudoAffine {
    fn eval(&self, x: &HPoint) -> Result<OracleSample> {
        let s = log(&self.y, x)?;
        let value = self.g.inner(&s);
        let n = s.norm();
        if n == 0.0 {
            return Ok(OracleSample {
                value,
                x: x.clone(),
                g: HTangent::project(x, self.g.vec().to_vec()),
            });
        }
        let pg = ptransport(&self.y, x, &self.g)?;
        let back = log(x, &self.y)?;
        let u = back.scale(1.0 / back.norm());
        let par = pg.inner(&u);
        let perp = pg.add_scaled(-par, &u);
        let grad = u.scale(par).add_scaled(n / n.sinh(), &perp);
        Ok(OracleSample {
            value,
            x: x.clone(),
            g: grad,
        })
    }

    fn meta(&self) -> FnMeta {
        let gn = self.g.norm();
        FnMeta {
            lipschitz: Some(gn),
            smoothness: Some(gn),
            gconvex: false,
            ..Default::default()
        }
    }
}

/// `x -> <g, log_y(x)>`. Not g-convex.
pub fn fn_pseudo_affine(y: HPoint, g: HTangent) -> Oracle {
    Arc::new(PseudoAffine { y, g })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MoreauParams {
    pub lambda: f64,
    pub prox_tol: f64,
    pub prox_max_iter: usize,
}

impl MoreauParams {
    pub fn new(lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda <= tol::R_MAX) {
            return Err(Error::Domain(format!("lambda = {lambda} not in (0, R_MAX]")));
        }
        Ok(MoreauParams {
            lambda,
            prox_tol: 1e-10,
            prox_max_iter: 10_000,
        })
    }
}

#[derive(Debug, Clone)]
pub struct ProxResult {
    pub y: HPoint,
    /// `log_x(y)`.
    pub step: HTangent,
    pub value: f64,
    pub iters: usize,
}

#[derive(Debug, Clone)]
pub struct Moreau {
    f: Oracle,
    p: MoreauParams,
}

/// Bundle size beyond which cuts are aggregated.
const BUNDLE_CAP: usize = 24;

struct Cut {
    offset: f64,
    grad: HTangent,
}

impl Moreau {
    pub fn params(&self) -> &MoreauParams {
        &self.p
    }

    /// The function being smoothed.
    pub fn inner(&self) -> &Oracle {
        &self.f
    }

    /// Minimizes `f(y) + dist(x,y)^2/(2 lambda)`.
    ///
    /// In normal coordinates `y = exp_x(w)` the quadratic is exactly
    /// `|w|^2/(2 lambda)`, so a cutting-plane model of `f o exp_x` plus the
    /// exact quadratic is minimized through its simplex dual. Cuts that lose
    /// their weight are dropped, which keeps stale linearizations of the
    /// (only nearly convex) pullback from biasing the limit.
    pub fn prox(&self, x: &HPoint) -> Result<ProxResult> {
        let lam = self.p.lambda;
        let mut w = HTangent::zero(x);
        let first = self.f.eval(x)?;
        let mut cuts = vec![Cut {
            offset: first.value,
            grad: first.g.clone(),
        }];
        let mut current = (first.value, x.clone());
        let mut best = (first.value, w.clone(), x.clone());
        let noise = 1e2 * f64::EPSILON * crate::hyperboloid::euclid_norm(x.coords());
        let mut last_disp = f64::INFINITY;
        for it in 1..=self.p.prox_max_iter {
            let m = cuts.len();
            let q = DMatrix::from_fn(m, m, |i, j| lam * cuts[i].grad.inner(&cuts[j].grad));
            let c = DVector::from_fn(m, |i, _| cuts[i].offset);
            let alpha = simplex_qp(&q, &c);
            let mut next = HTangent::zero(x);
            for (a, cut) in alpha.iter().zip(&cuts) {
                if *a != 0.0 {
                    next = next.add_scaled(-lam * a, &cut.grad);
                }
            }
            let disp = next.add_scaled(-1.0, &w).norm();
            let y = exp(x, &next)?;
            let s = self.f.eval(&y)?;
            let nn = next.norm();
            let psi = s.value + nn * nn / (2.0 * lam);
            if psi < best.0 + best.1.norm().powi(2) / (2.0 * lam) {
                best = (s.value, next.clone(), y.clone());
            }
            w = next;
            current = (s.value, y.clone());
            if disp <= self.p.prox_tol * lam || (disp <= noise && last_disp <= noise) {
                return Ok(ProxResult {
                    value: current.0 + nn * nn / (2.0 * lam),
                    y: current.1,
                    step: w,
                    iters: it,
                });
            }
            last_disp = disp;
            let mut kept: Vec<(Cut, f64)> = cuts
                .into_iter()
                .zip(alpha.iter().copied())
                .filter(|(_, a)| *a > 0.0)
                .collect();
            let cap = BUNDLE_CAP.max(x.dim() + 2);
            if kept.len() > cap {
                // fold the lightest cuts into their weighted average; the
                // model minimizer does not move
                kept.sort_by(|a, b| b.1.total_cmp(&a.1));
                let rest = kept.split_off(cap - 1);
                let total: f64 = rest.iter().map(|r| r.1).sum();
                let mut agg = Cut {
                    offset: 0.0,
                    grad: HTangent::zero(x),
                };
                for (c, a) in &rest {
                    agg.offset += a / total * c.offset;
                    agg.grad = agg.grad.add_scaled(a / total, &c.grad);
                }
                kept.push((agg, total));
            }
            let mut kept: Vec<Cut> = kept.into_iter().map(|(c, _)| c).collect();
            let g = dexp_adjoint(x, &w, &y, &s.g)?;
            kept.push(Cut {
                offset: s.value - g.inner(&w),
                grad: g,
            });
            cuts = kept;
        }
        let _ = current;
        Err(Error::Convergence {
            iters: self.p.prox_max_iter,
            residual: last_disp,
            best: best.2.coords().to_vec(),
        })
    }
}

impl FnOracle for Moreau {
    fn eval(&self, x: &HPoint) -> Result<OracleSample> {
        let p = self.prox(x)?;
        Ok(OracleSample {
            value: p.value,
            x: x.clone(),
            g: p.step.scale(-1.0 / self.p.lambda),
        })
    }

    fn meta(&self) -> FnMeta {
        let m = self.f.meta();
        FnMeta {
            lipschitz: Some(1.0),
            smoothness: Some(1.0 / self.p.lambda.tanh()),
            minimizer: m.minimizer,
            minimum: m.minimum,
            gconvex: m.gconvex,
            strong_convexity: None,
        }
    }
}

/// Moreau envelope of a 1-Lipschitz g-convex function.
pub fn fn_moreau(f: Oracle, p: MoreauParams) -> Result<Oracle> {
    Ok(Arc::new(moreau(f, p)?))
}

pub fn moreau(f: Oracle, p: MoreauParams) -> Result<Moreau> {
    match f.meta().lipschitz {
        Some(l) if l <= 1.0 + 1e-12 => {}
        other => {
            return Err(Error::Domain(format!(
                "Moreau envelope needs a 1-Lipschitz function, got {other:?}"
            )))
        }
    }
    MoreauParams::new(p.lambda)?;
    Ok(Moreau { f, p })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct URValue {
    pub value: f64,
    pub d1: f64,
    pub d2: f64,
}

/// `u_R(D) = 1 - exp(-4/sqrt(2D/R^2 - 1))` for `D > R^2/2`, else 1.
pub fn u_r(d: f64, r: f64) -> Result<URValue> {
    if !(r > 0.0) {
        return Err(Error::Domain(format!("R = {r} must be positive")));
    }
    let z = 2.0 * d / (r * r) - 1.0;
    if z <= 0.0 {
        return Ok(URValue {
            value: 1.0,
            d1: 0.0,
            d2: 0.0,
        });
    }
    let tau = 1.0 / z.sqrt();
    let e = (-4.0 * tau).exp();
    let (r2, r4) = (r * r, r.powi(4));
    Ok(URValue {
        value: -(-4.0 * tau).exp_m1(),
        d1: -4.0 * tau.powi(3) * e / r2,
        d2: 4.0 * tau.powi(5) * (3.0 - 4.0 * tau) * e / r4,
    })
}

/// Worst margins of the four scalar inequalities behind the `u_R` wrapper
/// over a log grid of `D - R^2/2` in `[1e-6 R^2, 1e6 R^2]`. Each margin is
/// oriented so that `>= 0` (strictly `> 0` for `positivity`) means it holds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ULemmaReport {
    pub r: f64,
    pub points: usize,
    /// `u + D u'`
    pub first_order: f64,
    /// `-(2u' + D u'')`
    pub second_order: f64,
    /// `(u + D u') + (2u' + D u'') 2D`
    pub positivity: f64,
    /// `4R - (u + D u') 2 sqrt(2D)`, relative to `4R`
    pub lipschitz: f64,
    /// Largest gap between the derivative-based and the closed forms in `tau`.
    pub closed_form_residual: f64,
    pub pass: bool,
}

pub fn u_r_lemmas(r: f64, points: usize) -> Result<ULemmaReport> {
    let mut rep = ULemmaReport {
        r,
        points,
        first_order: f64::INFINITY,
        second_order: f64::INFINITY,
        positivity: f64::INFINITY,
        lipschitz: f64::INFINITY,
        closed_form_residual: 0.0,
        pass: false,
    };
    let r2 = r * r;
    for j in 0..points {
        let s = -6.0 + 12.0 * j as f64 / (points.max(2) - 1) as f64;
        let dd = 0.5 * r2 + r2 * 10f64.powf(s);
        let u = u_r(dd, r)?;
        let a = u.value + dd * u.d1;
        let b = 2.0 * u.d1 + dd * u.d2;
        let c = a + b * 2.0 * dd;
        let tau = 1.0 / (2.0 * dd / r2 - 1.0).sqrt();
        let e = (-4.0 * tau).exp();
        let t2 = tau * tau;
        let a_cf = 1.0 - e * (1.0 + 2.0 * tau + 2.0 * t2 * tau);
        let b_cf = 2.0 / r2 * e * t2 * tau * (-1.0 - 4.0 * tau + 3.0 * t2 - 4.0 * t2 * tau);
        let poly = 1.0 + 4.0 * tau + 8.0 * t2 - 2.0 * t2 * tau + 16.0 * t2 * t2
            - 6.0 * t2 * t2 * tau
            + 8.0 * t2 * t2 * t2;
        let c_cf = 1.0 - e * poly;
        let res = (a - a_cf)
            .abs()
            .max((b - b_cf).abs() * r2)
            .max((c - c_cf).abs());
        rep.closed_form_residual = rep.closed_form_residual.max(res);
        rep.first_order = rep.first_order.min(a);
        rep.second_order = rep.second_order.min(-b);
        rep.positivity = rep.positivity.min(c);
        rep.lipschitz = rep
            .lipschitz
            .min((4.0 * r - a * 2.0 * (2.0 * dd).sqrt()) / (4.0 * r));
    }
    // the last two are tight as D grows; allow rounding only
    rep.pass = rep.first_order >= 0.0
        && rep.second_order >= 0.0
        && rep.positivity > 0.0
        && rep.lipschitz >= -1e-9
        && rep.closed_form_residual <= 1e-9;
    Ok(rep)
}
