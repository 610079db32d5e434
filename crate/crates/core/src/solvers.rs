//! Subgradient descent with the hyperbolic Polyak step, fixed-step RGD and
//! the strongly convex regularization used by the reduction argument.

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hyperboloid::{dist, exp, zeta, HPoint};
use crate::sample;
use crate::tol;
use crate::zoo::{fn_sqdist_point, fn_sum, FnMeta, FnOracle, Oracle, OracleSample};

/// One Polyak update.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PolyakRecord {
    pub k: usize,
    pub s: f64,
    pub gap: f64,
    pub gnorm: f64,
    pub cos_theta: f64,
    /// `eta_k |g_k|`, the geodesic length of the step.
    pub step_len: f64,
    pub s_next: f64,
    /// `cosh(s_{k+1}) - cosh(s_k) sqrt(1 - (gap / (zeta(s_k) |g|))^2)`, relative.
    pub cosh_residual: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Trace {
    pub samples: Vec<OracleSample>,
    /// `f(x_k) - f*`, empty when `f*` is unknown.
    pub gaps: Vec<f64>,
    pub polyak: Vec<PolyakRecord>,
}

impl Trace {
    pub fn min_gap(&self) -> Option<f64> {
        self.gaps.iter().copied().reduce(f64::min)
    }
}

/// Step multiplier `eta_k` so that `x_{k+1} = exp(x_k, -eta_k g_k)`.
/// `None` stops the run.
pub trait StepRule: Send {
    fn eta(&mut self, k: usize, sample: &OracleSample) -> Result<Option<f64>>;

    fn polyak_records(&self) -> &[PolyakRecord] {
        &[]
    }
}

#[derive(Debug, Clone)]
pub struct FixedStep(pub f64);

impl StepRule for FixedStep {
    fn eta(&mut self, _k: usize, _s: &OracleSample) -> Result<Option<f64>> {
        Ok(Some(self.0))
    }
}

/// Minimal-ball Polyak step with exact `f*`.
#[derive(Debug, Clone)]
pub struct PolyakStep {
    pub fstar: f64,
    pub s: f64,
    records: Vec<PolyakRecord>,
}

impl PolyakStep {
    pub fn new(fstar: f64, s0: f64) -> Result<Self> {
        if !(s0 >= 0.0 && s0.is_finite()) {
            return Err(Error::Domain(format!("s0 = {s0} must be finite and >= 0")));
        }
        Ok(PolyakStep {
            fstar,
            s: s0,
            records: Vec::new(),
        })
    }
}

/// `atanh(c tanh(s))` without forming `tanh(s)` near one.
fn atanh_scaled(c: f64, s: f64) -> f64 {
    let one_minus_t = 2.0 / ((2.0 * s).exp() + 1.0);
    let t = s.tanh();
    let lo = (1.0 - c) + c * one_minus_t;
    0.5 * ((1.0 + c * t) / lo).ln()
}

impl StepRule for PolyakStep {
    fn eta(&mut self, k: usize, sample: &OracleSample) -> Result<Option<f64>> {
        let gnorm = sample.g.norm();
        let gap = sample.value - self.fstar;
        if gnorm == 0.0 || gap == 0.0 {
            return Ok(None);
        }
        if gap < 0.0 {
            return Err(Error::Certificate(format!(
                "f(x_{k}) - f* = {gap} < 0: f* is not the minimum"
            )));
        }
        let s = self.s;
        if s < tol::POLYAK_COLLAPSE {
            log::debug!("polyak: ball collapsed at k = {k}, gap {gap}");
            return Ok(None);
        }
        let mut c = gap / (s * gnorm);
        if !(c <= 1.0 + tol::POLYAK_COS) {
            return Err(Error::Certificate(format!(
                "cos(theta_{k}) = {c} > 1: minimizer is not within s_k = {s}"
            )));
        }
        c = c.min(1.0);
        let step_len = atanh_scaled(c, s);
        let sin = ((1.0 - c) * (1.0 + c)).sqrt();
        let s_next = (sin * s.sinh()).asinh();
        let ratio = gap / (zeta(s)? * gnorm);
        let want = s.cosh() * (1.0 - ratio * ratio).max(0.0).sqrt();
        let cosh_residual = (s_next.cosh() - want) / want.max(1.0);
        self.records.push(PolyakRecord {
            k,
            s,
            gap,
            gnorm,
            cos_theta: c,
            step_len,
            s_next,
            cosh_residual,
        });
        self.s = s_next;
        Ok(Some(step_len / gnorm))
    }

    fn polyak_records(&self) -> &[PolyakRecord] {
        &self.records
    }
}

/// A query policy: proposes the next point from the last answer.
pub trait Player: Send {
    fn first(&mut self) -> HPoint;
    fn observe(&mut self, sample: &OracleSample) -> Result<Option<HPoint>>;

    fn polyak_records(&self) -> &[PolyakRecord] {
        &[]
    }
}

pub struct DescentPlayer<R: StepRule> {
    x0: HPoint,
    k: usize,
    pub rule: R,
}

impl<R: StepRule> DescentPlayer<R> {
    pub fn new(x0: HPoint, rule: R) -> Self {
        DescentPlayer { x0, k: 0, rule }
    }
}

impl<R: StepRule> Player for DescentPlayer<R> {
    fn first(&mut self) -> HPoint {
        self.x0.clone()
    }

    fn observe(&mut self, s: &OracleSample) -> Result<Option<HPoint>> {
        let k = self.k;
        self.k += 1;
        match self.rule.eta(k, s)? {
            None => Ok(None),
            Some(eta) => Ok(Some(exp(&s.x, &s.g.scale(-eta))?)),
        }
    }

    fn polyak_records(&self) -> &[PolyakRecord] {
        self.rule.polyak_records()
    }
}

/// Queries points with a uniform direction and uniform distance from `center`.
pub struct RandomPlayer<G: Rng + Send> {
    pub rng: G,
    pub center: HPoint,
    pub radius: f64,
}

impl<G: Rng + Send> Player for RandomPlayer<G> {
    fn first(&mut self) -> HPoint {
        self.center.clone()
    }

    fn observe(&mut self, _s: &OracleSample) -> Result<Option<HPoint>> {
        Ok(Some(sample::point_in_ball(
            &mut self.rng,
            &self.center,
            self.radius,
        )))
    }
}

/// Drives `player` against an answer function for at most `t` queries.
pub fn play<P, A>(player: &mut P, mut answer: A, t: usize, fstar: Option<f64>) -> Result<Trace>
where
    P: Player + ?Sized,
    A: FnMut(&HPoint) -> Result<OracleSample>,
{
    let mut trace = Trace::default();
    let mut x = player.first();
    for _ in 0..t {
        let s = answer(&x)?;
        if let Some(fs) = fstar {
            trace.gaps.push(s.value - fs);
        }
        let next = player.observe(&s)?;
        trace.samples.push(s);
        match next {
            Some(n) => x = n,
            None => break,
        }
    }
    trace.polyak = player.polyak_records().to_vec();
    Ok(trace)
}

pub fn polyak_sgd(f: &dyn FnOracle, fstar: f64, x0: HPoint, s0: f64, t: usize) -> Result<Trace> {
    let mut p = DescentPlayer::new(x0, PolyakStep::new(fstar, s0)?);
    play(&mut p, |x| f.eval(x), t, Some(fstar))
}

pub fn rgd(f: &dyn FnOracle, step: f64, x0: HPoint, t: usize) -> Result<Trace> {
    let mut p = DescentPlayer::new(x0, FixedStep(step));
    let fstar = f.meta().minimum;
    play(&mut p, |x| f.eval(x), t, fstar)
}

/// `min-gap^2 <= 2 zeta(s0) s0^2 M^2 / T`.
pub fn polyak_guarantee(s0: f64, m: f64, t: usize) -> Result<f64> {
    Ok(2.0 * zeta(s0)? * s0 * s0 * m * m / t as f64)
}

/// `f/sigma + dist(., x_ref)^2 / 2`.
#[derive(Debug, Clone)]
pub struct Regularized {
    inner: Oracle,
    lipschitz_smooth: Option<f64>,
    sigma: f64,
    xref: HPoint,
}

impl Regularized {
    /// `L/sigma + zeta(r')` on `B(x_ref, r')`, when `f` is `L`-smooth.
    pub fn smoothness_in_ball(&self, r_prime: f64) -> Result<Option<f64>> {
        match self.lipschitz_smooth {
            Some(l) => Ok(Some(l / self.sigma + zeta(r_prime)?)),
            None => Ok(None),
        }
    }

    pub fn xref(&self) -> &HPoint {
        &self.xref
    }
}

impl FnOracle for Regularized {
    fn eval(&self, x: &HPoint) -> Result<OracleSample> {
        self.inner.eval(x)
    }

    fn meta(&self) -> FnMeta {
        FnMeta {
            gconvex: true,
            strong_convexity: Some(1.0),
            ..Default::default()
        }
    }
}

pub fn regularize(f: Oracle, sigma: f64, xref: HPoint) -> Result<Regularized> {
    if !(sigma > 0.0) {
        return Err(Error::Domain(format!("sigma = {sigma} must be positive")));
    }
    let lipschitz_smooth = f.meta().smoothness;
    let inner = fn_sum(
        vec![(1.0 / sigma, f), (1.0, fn_sqdist_point(xref.clone()))],
        0.0,
    );
    Ok(Regularized {
        inner,
        lipschitz_smooth,
        sigma,
        xref,
    })
}

/// Distance-based helper used by tests and the harness: Polyak radius
/// certificate `dist(x_k, x*) <= s_k`.
pub fn radius_certificate(trace: &Trace, xstar: &HPoint) -> Result<f64> {
    let mut worst = f64::NEG_INFINITY;
    for (s, rec) in trace.samples.iter().zip(&trace.polyak) {
        worst = worst.max(dist(&s.x, xstar)? - rec.s);
    }
    Ok(worst)
}
