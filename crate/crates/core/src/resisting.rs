//! Resisting oracles: the nonsmooth game built from hyperplane distances,
//! its Moreau-smoothed twin, and the ladder instance on which Polyak steps
//! follow a prescribed zigzag.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::hyperboloid::{
    dist, exp, gspan, log, minner, ptransport, right_triangle, sub_dist, zeta, HPoint, HTangent,
    HalfSpace, TotallyGeodesicSub,
};
use crate::solvers::Trace;
use crate::tol;
use crate::zoo::{
    fn_dist_sub, moreau, FnMeta, FnOracle, Moreau, MoreauParams, Oracle, OracleSample, ShiftedMax,
};

fn coord(d: usize, i: usize) -> Vec<f64> {
    let mut v = vec![0.0; d + 1];
    v[i] = 1.0;
    v
}

/// Per-query bookkeeping of the adversary.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Margins {
    /// `h_{i_k}^{s_k}(x_k)`; nonnegative by construction.
    pub h_chosen: f64,
    /// Best `h` among the other remaining indices.
    pub h_runner_up: Option<f64>,
    /// Part of `f_k` achieving the max at `x_k`.
    pub active_part: usize,
    pub tie: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QueryRecord {
    pub k: usize,
    pub x: Vec<f64>,
    #[serde(rename = "F")]
    pub value: f64,
    pub g: Vec<f64>,
    pub chosen_i: usize,
    pub chosen_s: i8,
    pub margins: Margins,
}

/// One JSON object per line.
pub fn transcript_jsonl(records: &[QueryRecord]) -> Result<String> {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r)?);
        out.push('\n');
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct NonsmoothGame {
    pub d: usize,
    pub t: usize,
    pub r: f64,
    pub a: f64,
    pub delta: f64,
    xref: HPoint,
    /// `subs[i-1][0]` is `S_i^+`, `subs[i-1][1]` is `S_i^-`.
    subs: Vec<[TotallyGeodesicSub; 2]>,
    remaining: Vec<usize>,
    chosen: Vec<(usize, i8)>,
    parts: Vec<(Oracle, f64)>,
    history: Vec<OracleSample>,
    records: Vec<QueryRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NonsmoothCertificate {
    pub dist_ref_xstar: f64,
    pub r: f64,
    pub f_at_xstar: f64,
    pub fstar: f64,
    /// `max_k dist(x*, S_{i_k}^{s_k})`.
    pub max_sub_dist: f64,
    /// `max_k |cosh(dist(x*, z_k)) - cosh(r)/cosh(a)|`.
    pub law_of_cosines_residual: f64,
}

#[derive(Debug, Clone)]
pub struct Finalized {
    pub f: Arc<ShiftedMax>,
    pub xstar: HPoint,
    pub fstar: f64,
    pub chosen: Vec<(usize, i8)>,
    pub certificate: NonsmoothCertificate,
}

impl NonsmoothGame {
    pub fn new(t: usize, r: f64) -> Result<Self> {
        if t < 2 {
            return Err(Error::Domain(format!("T = {t}: dimension d = T must be >= 2")));
        }
        if !(r > 0.0) {
            return Err(Error::Domain(format!("r = {r} must be positive")));
        }
        if r > tol::R_MAX {
            return Err(Error::Range(format!("r = {r} exceeds R_MAX")));
        }
        let d = t;
        let a = (r.tanh() / (d as f64).sqrt()).atanh();
        let delta = a / (2.0 * t as f64);
        let xref = HPoint::origin(d);
        let mut subs = Vec::with_capacity(d);
        for i in 1..=d {
            let mk = |s: f64| -> Result<TotallyGeodesicSub> {
                let mut z = coord(d, 0);
                z[0] = a.cosh();
                z[i] = s * a.sinh();
                let z = HPoint::new(z)?;
                let mut n = vec![0.0; d + 1];
                n[0] = a.sinh();
                n[i] = s * a.cosh();
                TotallyGeodesicSub::hyperplane(&z, &HTangent::new(z.clone(), n)?)
            };
            subs.push([mk(1.0)?, mk(-1.0)?]);
        }
        Ok(NonsmoothGame {
            d,
            t,
            r,
            a,
            delta,
            xref,
            subs,
            remaining: (1..=d).collect(),
            chosen: Vec::new(),
            parts: Vec::new(),
            history: Vec::new(),
            records: Vec::new(),
        })
    }

    pub fn xref(&self) -> &HPoint {
        &self.xref
    }

    pub fn sub(&self, i: usize, s: i8) -> &TotallyGeodesicSub {
        &self.subs[i - 1][if s > 0 { 0 } else { 1 }]
    }

    /// `z_i^s = exp_{x_ref}(a s e_i)`.
    pub fn z(&self, i: usize, s: i8) -> HPoint {
        let mut z = coord(self.d, 0);
        z[0] = self.a.cosh();
        z[i] = s as f64 * self.a.sinh();
        HPoint::from_raw(z)
    }

    pub fn h(&self, i: usize, s: i8) -> Oracle {
        fn_dist_sub(self.sub(i, s).clone(), self.a)
    }

    pub fn chosen(&self) -> &[(usize, i8)] {
        &self.chosen
    }

    pub fn history(&self) -> &[OracleSample] {
        &self.history
    }

    pub fn records(&self) -> &[QueryRecord] {
        &self.records
    }

    /// `f_k` after `k+1` selections.
    pub fn current(&self) -> Result<ShiftedMax> {
        ShiftedMax::new(self.parts.clone())
    }

    /// Picks `(i_k, s_k)` maximizing `h` at `x` and extends `f`.
    fn select(&mut self, x: &HPoint) -> Result<(usize, i8, f64, Option<f64>)> {
        if self.history.len() >= self.t {
            return Err(Error::State(format!("query budget T = {} exhausted", self.t)));
        }
        if x.dim() != self.d {
            return Err(Error::Dimension {
                expected: self.d + 1,
                got: x.coords().len(),
            });
        }
        let mut best: Option<(usize, i8, f64)> = None;
        let mut per_index = Vec::new();
        for &i in &self.remaining {
            let mut top = f64::NEG_INFINITY;
            for s in [1i8, -1] {
                let (dd, _) = sub_dist(x, self.sub(i, s))?;
                let h = dd - self.a;
                top = top.max(h);
                if best.is_none_or(|b| h > b.2) {
                    best = Some((i, s, h));
                }
            }
            per_index.push((i, top));
        }
        let (i, s, h) = best.expect("remaining indices nonempty before T queries");
        let runner = per_index
            .iter()
            .filter(|(j, _)| *j != i)
            .map(|(_, v)| *v)
            .reduce(f64::max);
        let k = self.chosen.len();
        self.remaining.retain(|&j| j != i);
        self.chosen.push((i, s));
        self.parts.push((self.h(i, s), k as f64 * self.delta));
        Ok((i, s, h, runner))
    }

    /// Past the budget the frozen `f_{T-1}` answers; such queries are not
    /// recorded.
    pub fn respond(&mut self, x: &HPoint) -> Result<OracleSample> {
        if self.history.len() >= self.t {
            return self.current()?.eval(x);
        }
        let (i, s, h, runner) = self.select(x)?;
        let e = self.current()?.eval_detailed(x)?;
        self.push_record(i, s, h, runner, e.active, e.tie, &e.sample);
        Ok(e.sample)
    }

    #[allow(clippy::too_many_arguments)]
    fn push_record(
        &mut self,
        i: usize,
        s: i8,
        h: f64,
        runner: Option<f64>,
        active: usize,
        tie: bool,
        sample: &OracleSample,
    ) {
        self.records.push(QueryRecord {
            k: self.history.len(),
            x: sample.x.coords().to_vec(),
            value: sample.value,
            g: sample.g.vec().to_vec(),
            chosen_i: i,
            chosen_s: s,
            margins: Margins {
                h_chosen: h,
                h_runner_up: runner,
                active_part: active,
                tie,
            },
        });
        self.history.push(sample.clone());
    }

    /// Fixes the remaining choices and certifies the minimizer.
    pub fn finalize(&self) -> Result<Finalized> {
        let mut chosen = self.chosen.clone();
        let mut parts = self.parts.clone();
        for &i in &self.remaining {
            let k = chosen.len();
            chosen.push((i, 1));
            parts.push((self.h(i, 1), k as f64 * self.delta));
        }
        let f = Arc::new(ShiftedMax::new(parts)?);
        let c = self.r / (self.d as f64).sqrt();
        let mut v = vec![0.0; self.d + 1];
        for &(i, s) in &chosen {
            v[i] = s as f64 * c;
        }
        let xstar = exp(&self.xref, &HTangent::new(self.xref.clone(), v)?)?;
        let fstar = -self.a;
        let mut max_sub: f64 = 0.0;
        let mut loc: f64 = 0.0;
        let target = self.r.cosh() / self.a.cosh();
        for &(i, s) in &chosen {
            max_sub = max_sub.max(sub_dist(&xstar, self.sub(i, s))?.0);
            let b = dist(&xstar, &self.z(i, s))?;
            loc = loc.max((b.cosh() - target).abs());
        }
        let certificate = NonsmoothCertificate {
            dist_ref_xstar: dist(&self.xref, &xstar)?,
            r: self.r,
            f_at_xstar: f.value(&xstar)?,
            fstar,
            max_sub_dist: max_sub,
            law_of_cosines_residual: loc,
        };
        Ok(Finalized {
            f,
            xstar,
            fstar,
            chosen,
            certificate,
        })
    }

    /// `r / (2 zeta_r sqrt(T))`.
    pub fn gap_bound(&self) -> Result<f64> {
        Ok(self.r / (2.0 * zeta(self.r)? * (self.t as f64).sqrt()))
    }
}

/// Moreau-smoothed twin with `lambda = delta/4`.
#[derive(Debug, Clone)]
pub struct SmoothGame {
    inner: NonsmoothGame,
    pub lambda: f64,
    /// Nonsmooth twin values `f_k(x_k)`.
    pub twin_values: Vec<f64>,
    envelopes: Vec<Arc<Moreau>>,
}

#[derive(Debug, Clone)]
pub struct SmoothFinalized {
    pub f: Arc<Moreau>,
    pub nonsmooth: Finalized,
    pub xstar: HPoint,
    pub fstar: f64,
    pub smoothness: f64,
}

impl SmoothGame {
    pub fn new(t: usize, r: f64) -> Result<Self> {
        let inner = NonsmoothGame::new(t, r)?;
        let lambda = inner.delta / 4.0;
        Ok(SmoothGame {
            inner,
            lambda,
            twin_values: Vec::new(),
            envelopes: Vec::new(),
        })
    }

    pub fn game(&self) -> &NonsmoothGame {
        &self.inner
    }

    /// `f_{lambda,k}` used to answer query `k`.
    pub fn envelope(&self, k: usize) -> Option<&Arc<Moreau>> {
        self.envelopes.get(k)
    }

    pub fn smoothness(&self) -> f64 {
        1.0 / self.lambda.tanh()
    }

    pub fn respond(&mut self, x: &HPoint) -> Result<OracleSample> {
        if let (true, Some(env)) = (self.inner.history.len() >= self.inner.t, self.envelopes.last()) {
            return env.eval(x);
        }
        let (i, s, h, runner) = self.inner.select(x)?;
        let fk = self.inner.current()?;
        let e = fk.eval_detailed(x)?;
        let env = Arc::new(moreau(Arc::new(fk), MoreauParams::new(self.lambda)?)?);
        let sample = env.eval(x)?;
        self.twin_values.push(e.sample.value);
        self.envelopes.push(env);
        self.inner.push_record(i, s, h, runner, e.active, e.tie, &sample);
        Ok(sample)
    }

    pub fn finalize(&self) -> Result<SmoothFinalized> {
        let nonsmooth = self.inner.finalize()?;
        let f = Arc::new(moreau(
            nonsmooth.f.clone(),
            MoreauParams::new(self.lambda)?,
        )?);
        Ok(SmoothFinalized {
            xstar: nonsmooth.xstar.clone(),
            fstar: nonsmooth.fstar,
            f,
            nonsmooth,
            smoothness: self.smoothness(),
        })
    }

    /// `1/2 (L r^2 / T^2) / (8 zeta_r^2)`.
    pub fn gap_bound(&self) -> Result<f64> {
        let (r, t) = (self.inner.r, self.inner.t as f64);
        let z = zeta(r)?;
        Ok(0.5 * self.smoothness() * r * r / (t * t) / (8.0 * z * z))
    }
}

/// Ladder instance on which Polyak steps walk `y_0, y_1, ...`.
#[derive(Debug, Clone)]
pub struct WorstInstance {
    pub eps: f64,
    pub theta: f64,
    pub r: f64,
    pub d: usize,
    pub y: Vec<HPoint>,
    pub radii: Vec<f64>,
    pub deltas: Vec<f64>,
    /// `frames[k][i-1]` is `e_i^{(k)}`, tangent at `y_k`.
    pub frames: Vec<Vec<HTangent>>,
    pub xstar: HPoint,
    pub halfspaces: Vec<HalfSpace>,
    pub m: f64,
    pub invariants: LadderInvariants,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LadderInvariants {
    pub min_radius: f64,
    /// `max |cosh(r_{k-1}) - cosh(r_k) cosh(Delta_{k-1})| / cosh(r_{k-1})`.
    pub pythagoras: f64,
    /// `max |sinh(r_k) - sin(theta) sinh(r_{k-1})| / sinh(r_{k-1})`.
    pub sine_law: f64,
    /// `max |tanh(Delta_{k-1}) - cos(theta) tanh(r_{k-1})|`.
    pub cosine_law: f64,
    pub frame_orthonormality: f64,
    /// `e_i^{(k)} - e_i` for `i > k`.
    pub frame_fixed: f64,
    /// `e_k^{(k)}` against the closed form of the ladder step.
    pub frame_closed_form: f64,
    /// `|dist(y_k, x*) - r_k|`.
    pub sphere: f64,
    /// `<log_{y_k} x*, e_i^{(k)}>` for `i <= k`.
    pub closest_point: f64,
    /// `|<V_k, x*>_M| / (|V_k| |x*|)` in ambient Euclidean norms.
    pub xstar_on_boundaries: f64,
}

fn check(name: &str, value: f64, limit: f64) -> Result<()> {
    if value <= limit {
        Ok(())
    } else {
        Err(Error::Certificate(format!("{name} = {value:e} exceeds {limit:e}")))
    }
}

impl WorstInstance {
    pub fn build(eps: f64, r: f64, pick: i8) -> Result<Self> {
        let emax = 1.0 / (4.0 * 2f64.sqrt());
        if !(eps > 0.0 && eps <= emax * (1.0 + 1e-12)) {
            return Err(Error::Domain(format!("eps = {eps} not in (0, 1/(4 sqrt 2)]")));
        }
        if !(r > 0.0) {
            return Err(Error::Domain(format!("r = {r} must be positive")));
        }
        if r > tol::R_MAX {
            return Err(Error::Range(format!("r = {r} exceeds R_MAX")));
        }
        let cos = 4.0 * eps;
        let theta = cos.acos();
        let d = (zeta(r)? / (32.0 * eps * eps)).floor() as usize;
        if d < 2 {
            return Err(Error::Domain(format!(
                "d = floor(zeta_r / (32 eps^2)) = {d} < 2"
            )));
        }
        let mut radii = vec![r];
        let mut deltas = Vec::new();
        for k in 1..d {
            let (dl, rk) = right_triangle(radii[k - 1], theta)?;
            deltas.push(dl);
            radii.push(rk);
        }
        let mut y = vec![HPoint::origin(d)];
        let mut frames = vec![(1..=d)
            .map(|i| HTangent::new(y[0].clone(), coord(d, i)))
            .collect::<Result<Vec<_>>>()?];
        let mut frame_closed_form: f64 = 0.0;
        for k in 1..d {
            let dl = deltas[k - 1];
            let prev = &y[k - 1];
            let ek = coord(d, k);
            let yk: Vec<f64> = prev
                .coords()
                .iter()
                .zip(&ek)
                .map(|(a, b)| dl.cosh() * a + dl.sinh() * b)
                .collect();
            let yk = HPoint::from_raw(yk);
            let fr = frames[k - 1]
                .iter()
                .map(|e| ptransport(prev, &yk, e))
                .collect::<Result<Vec<_>>>()?;
            let closed: Vec<f64> = prev
                .coords()
                .iter()
                .zip(&ek)
                .map(|(a, b)| dl.sinh() * a + dl.cosh() * b)
                .collect();
            let scale = crate::hyperboloid::euclid_norm(&closed);
            for (a, b) in fr[k - 1].vec().iter().zip(&closed) {
                frame_closed_form = frame_closed_form.max((a - b).abs() / scale);
            }
            y.push(yk);
            frames.push(fr);
        }
        let last = &y[d - 1];
        let dir = HTangent::new(last.clone(), coord(d, d))?;
        let xstar = exp(last, &dir.scale(pick.signum() as f64 * radii[d - 1]))?;

        let mut halfspaces = Vec::new();
        for k in 0..d.saturating_sub(1) {
            let u = log(&y[k], &xstar)?;
            let u = u.scale(1.0 / u.norm());
            // V_k = -g~_k - u_k with g~_k = -(1/cos) e_{k+1}^{(k)}
            let v = frames[k][k].scale(1.0 / cos).add_scaled(-1.0, &u);
            halfspaces.push(HalfSpace::new(y[k].clone(), &v)?);
        }

        let mut inv = LadderInvariants {
            min_radius: radii.iter().copied().fold(f64::INFINITY, f64::min),
            pythagoras: 0.0,
            sine_law: 0.0,
            cosine_law: 0.0,
            frame_orthonormality: 0.0,
            frame_fixed: 0.0,
            frame_closed_form,
            sphere: 0.0,
            closest_point: 0.0,
            xstar_on_boundaries: 0.0,
        };
        for k in 1..d {
            let (rp, rk, dl) = (radii[k - 1], radii[k], deltas[k - 1]);
            inv.pythagoras = inv
                .pythagoras
                .max((rp.cosh() - rk.cosh() * dl.cosh()).abs() / rp.cosh());
            inv.sine_law = inv
                .sine_law
                .max((rk.sinh() - theta.sin() * rp.sinh()).abs() / rp.sinh());
            inv.cosine_law = inv.cosine_law.max((dl.tanh() - cos * rp.tanh()).abs());
        }
        for k in 0..d {
            for (i, a) in frames[k].iter().enumerate() {
                for (j, b) in frames[k].iter().enumerate() {
                    let want = if i == j { 1.0 } else { 0.0 };
                    inv.frame_orthonormality = inv.frame_orthonormality.max((a.inner(b) - want).abs());
                }
                if i + 1 > k {
                    let e = coord(d, i + 1);
                    for (p, q) in a.vec().iter().zip(&e) {
                        inv.frame_fixed = inv.frame_fixed.max((p - q).abs());
                    }
                }
            }
            let u = log(&y[k], &xstar)?;
            inv.sphere = inv.sphere.max((u.norm() - radii[k]).abs());
            let un = u.scale(1.0 / u.norm());
            for e in frames[k].iter().take(k) {
                inv.closest_point = inv.closest_point.max(un.inner(e).abs());
            }
        }
        for l in &halfspaces {
            let n = l.normal().vec();
            let rel = minner(n, xstar.coords()).abs()
                / (crate::hyperboloid::euclid_norm(n) * crate::hyperboloid::euclid_norm(xstar.coords()));
            inv.xstar_on_boundaries = inv.xstar_on_boundaries.max(rel);
        }
        check("r_k >= r/2", r / 2.0 - inv.min_radius, 0.0)?;
        check("pythagoras", inv.pythagoras, 1e-9)?;
        check("sine law", inv.sine_law, 1e-9)?;
        check("cosine law", inv.cosine_law, 1e-9)?;
        check("frame orthonormality", inv.frame_orthonormality, 1e-9)?;
        check("frame fixed", inv.frame_fixed, 1e-9)?;
        check("frame closed form", inv.frame_closed_form, 1e-9)?;
        check("sphere radius", inv.sphere, 1e-8)?;
        check("closest point", inv.closest_point, 1e-8)?;
        check("x* on boundaries", inv.xstar_on_boundaries, 1e-13)?;

        Ok(WorstInstance {
            eps,
            theta,
            r,
            d,
            y,
            radii,
            deltas,
            frames,
            xstar,
            halfspaces,
            m: 2.0 / cos,
            invariants: inv,
        })
    }

    pub fn t(&self) -> usize {
        self.d
    }

    /// `g~_k = -(1/cos theta) e_{k+1}^{(k)}`.
    pub fn g_tilde(&self, k: usize) -> HTangent {
        self.frames[k][k].scale(-1.0 / self.theta.cos())
    }

    /// Smallest `k` with `x` in `I_k = M ∩ span(e_0..e_k)`.
    pub fn level(&self, x: &HPoint) -> usize {
        let c = x.coords();
        let scale = 1e-12 * crate::hyperboloid::euclid_norm(c);
        (0..=self.d)
            .find(|&k| c[k + 1..].iter().all(|v| v.abs() <= scale))
            .unwrap_or(self.d)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SubgradientRule {
    Minimizer,
    LadderVertex(usize),
    /// Tangent selection at a point of `I_k` inside every earlier half-space.
    Tangent(usize),
    /// On `I_{d-1}` inside every half-space: only the distance term.
    Terminal,
    /// Max-rule subgradient; the query violates the ladder assumption.
    Default { a2_violation: bool },
}

/// Relative rounding allowance for half-space membership.
const MEMBERSHIP: f64 = 1e-15;
/// Queries this close to `y_k` get the ladder subgradient.
const VERTEX: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct WorstOracle {
    inst: Arc<WorstInstance>,
    bounds: Vec<Oracle>,
}

pub fn worst_oracle(inst: Arc<WorstInstance>) -> Result<WorstOracle> {
    let bounds = inst
        .halfspaces
        .iter()
        .map(|l| fn_dist_sub(l.boundary().clone(), 0.0))
        .collect();
    Ok(WorstOracle { inst, bounds })
}

impl WorstOracle {
    pub fn instance(&self) -> &WorstInstance {
        &self.inst
    }

    pub fn eval_flagged(&self, x: &HPoint) -> Result<(OracleSample, SubgradientRule)> {
        let inst = &self.inst;
        let cos = inst.theta.cos();
        let dx = dist(x, &inst.xstar)?;
        // the normals inherit the rounding of x*, whose coordinates grow
        // like e^r; outside amounts below that count as inside
        let slack = (MEMBERSHIP
            * crate::hyperboloid::euclid_norm(x.coords())
            * crate::hyperboloid::euclid_norm(inst.xstar.coords()))
        .max(tol::HALFSPACE);
        let hd: Vec<f64> = inst
            .halfspaces
            .iter()
            .map(|l| {
                let v = -l.signed_dist(x);
                if v <= slack {
                    0.0
                } else {
                    v
                }
            })
            .collect();
        let (mut top, mut arg) = (0.0, None);
        for (i, v) in hd.iter().enumerate() {
            if *v > top {
                top = *v;
                arg = Some(i);
            }
        }
        let value = dx + top / cos;
        let mk = |g: HTangent| OracleSample {
            value,
            x: x.clone(),
            g,
        };
        if dx == 0.0 {
            return Ok((mk(HTangent::zero(x)), SubgradientRule::Minimizer));
        }
        let u = log(x, &inst.xstar)?.scale(1.0 / dx);
        let k = inst.level(x);
        if k + 2 <= inst.d && arg.is_none() {
            if dist(x, &inst.y[k])? <= VERTEX {
                let g = HTangent::project(x, inst.g_tilde(k).vec().to_vec());
                return Ok((mk(g), SubgradientRule::LadderVertex(k)));
            }
            let to_next = log(x, &inst.y[k + 1])?;
            let c_y = (to_next.inner(&u) / to_next.norm()).clamp(-1.0, 1.0);
            let sin_y = ((1.0 - c_y) * (1.0 + c_y)).sqrt();
            let vk = inst.halfspaces[k].normal();
            let vy = ptransport(&inst.y[k], x, vk)?;
            let ghat = vy.scale(-sin_y / cos);
            return Ok((mk(ghat.add_scaled(-1.0, &u)), SubgradientRule::Tangent(k)));
        }
        if k + 1 == inst.d && arg.is_none() {
            return Ok((mk(u.scale(-1.0)), SubgradientRule::Terminal));
        }
        let mut g = u.scale(-1.0);
        if let Some(i) = arg {
            let b = self.bounds[i].eval(x)?;
            g = g.add_scaled(1.0 / cos, &b.g);
        }
        Ok((mk(g), SubgradientRule::Default { a2_violation: true }))
    }
}

impl FnOracle for WorstOracle {
    fn eval(&self, x: &HPoint) -> Result<OracleSample> {
        Ok(self.eval_flagged(x)?.0)
    }

    fn meta(&self) -> FnMeta {
        FnMeta {
            lipschitz: Some(self.inst.m),
            minimizer: Some(self.inst.xstar.clone()),
            minimum: Some(0.0),
            gconvex: true,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct A2Row {
    pub k: usize,
    /// `min_{l<k} <V_l, log_{y_l}(x_k)>`, `None` for `k = 0`.
    pub a2_margin: Option<f64>,
    pub a2_ok: bool,
    /// Distance from `x_k` to the span of the history.
    pub a1_residual: f64,
    pub a1_ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct A2Report {
    pub rows: Vec<A2Row>,
    pub pass: bool,
    pub first_a1_failure: Option<usize>,
    pub first_a2_failure: Option<usize>,
}

/// Membership of each query in the earlier half-spaces and in the span of
/// the history.
pub fn a2_check(inst: &WorstInstance, trace: &Trace) -> Result<A2Report> {
    let mut rows = Vec::new();
    let xref = &inst.y[0];
    for (k, s) in trace.samples.iter().enumerate() {
        let mut margin: Option<f64> = None;
        for l in inst.halfspaces.iter().take(k) {
            let m = l.margin(&s.x)?;
            margin = Some(margin.map_or(m, |p| p.min(m)));
        }
        let a2_ok = margin.is_none_or(|m| m >= -1e-9);
        let a1_residual = if k == 0 {
            dist(&s.x, xref)?
        } else {
            let pts: Vec<HPoint> = trace.samples[..k].iter().map(|p| p.x.clone()).collect();
            let vs: Vec<HTangent> = trace.samples[..k].iter().map(|p| p.g.clone()).collect();
            let span = gspan(&pts, &vs)?;
            sub_dist(&s.x, &span)?.0
        };
        rows.push(A2Row {
            k,
            a2_margin: margin,
            a2_ok,
            a1_residual,
            a1_ok: a1_residual <= 1e-7,
        });
    }
    let first_a1_failure = rows.iter().find(|r| !r.a1_ok).map(|r| r.k);
    let first_a2_failure = rows.iter().find(|r| !r.a2_ok).map(|r| r.k);
    Ok(A2Report {
        pass: first_a1_failure.is_none() && first_a2_failure.is_none(),
        rows,
        first_a1_failure,
        first_a2_failure,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GapBoundReport {
    pub gap: f64,
    pub bound: f64,
    pub pass: bool,
}

/// `f(x_ref) - f* <= 1/2 L r^2 (8 / zeta_r)`.
pub fn gap_bound_check(
    f: &dyn FnOracle,
    xref: &HPoint,
    r: f64,
    smoothness: f64,
    fstar: f64,
) -> Result<GapBoundReport> {
    let gap = f.value(xref)? - fstar;
    let bound = 0.5 * smoothness * r * r * 8.0 / zeta(r)?;
    Ok(GapBoundReport {
        gap,
        bound,
        pass: gap <= bound + 1e-6,
    })
}

/// `sup |<x, n>|` style helper: signed Minkowski coordinate of `x`
/// against the normal of `S_i^s`.
pub fn side(game: &NonsmoothGame, x: &HPoint, i: usize, s: i8) -> f64 {
    minner(x.coords(), &game.sub(i, s).normals()[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sample;
    use crate::solvers::{play, polyak_sgd, DescentPlayer, PolyakStep};
    use crate::zoo::fn_sqdist_point;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn new_examples() {
        assert!(matches!(NonsmoothGame::new(1, 1.0), Err(Error::Domain(_))));
        assert!(matches!(NonsmoothGame::new(4, 31.0), Err(Error::Range(_))));
        let g = NonsmoothGame::new(4, 1.0).unwrap();
        let x = 1f64.tanh() / 2.0;
        let want = 0.5 * ((1.0 + x) / (1.0 - x)).ln();
        assert!((g.a - want).abs() < 1e-12);
        assert_eq!(g.delta, g.a / 8.0);
        assert!(g.delta * 3.0 <= g.a / 2.0);
    }

    #[test]
    fn first_answer_at_xref_is_zero() {
        let mut g = NonsmoothGame::new(5, 2.0).unwrap();
        let x = g.xref().clone();
        let s = g.respond(&x).unwrap();
        assert!(s.value.abs() < 1e-12);
        assert_eq!(g.chosen()[0], (1, 1));
    }

    #[test]
    fn polyak_against_nonsmooth_game() {
        for (t, r) in [(4, 1.0), (8, 2.0)] {
            let mut g = NonsmoothGame::new(t, r).unwrap();
            let a = g.a;
            let mut p = DescentPlayer::new(g.xref().clone(), PolyakStep::new(-a, r).unwrap());
            let tr = play(&mut p, |x| g.respond(x), t, Some(-a)).unwrap();
            assert_eq!(tr.samples.len(), t);
            let fin = g.finalize().unwrap();
            let c = &fin.certificate;
            assert!((c.dist_ref_xstar - r).abs() < 1e-9);
            assert!((c.f_at_xstar - fin.fstar).abs() < 1e-8);
            assert!(c.max_sub_dist < 1e-8);
            assert!(c.law_of_cosines_residual < 1e-9);
            let bound = g.gap_bound().unwrap();
            for (k, s) in tr.samples.iter().enumerate() {
                let replay = fin.f.value(&s.x).unwrap();
                assert!((replay - s.value).abs() < 1e-9);
                assert!(s.value - fin.fstar >= bound - 1e-9);
                assert!(g.records()[k].margins.h_chosen >= -1e-9);
            }
            let frozen = g.respond(&fin.xstar).unwrap();
            assert!((frozen.value - fin.fstar).abs() < 1e-8);
            assert_eq!(g.history().len(), t);
        }
    }

    #[test]
    fn smooth_game_sandwich_and_gap() {
        let (t, r) = (4, 1.0);
        let mut g = SmoothGame::new(t, r).unwrap();
        assert_eq!(g.lambda, g.game().delta / 4.0);
        let a = g.game().a;
        let mut p = DescentPlayer::new(g.game().xref().clone(), PolyakStep::new(-a, r).unwrap());
        let tr = play(&mut p, |x| g.respond(x), t, Some(-a)).unwrap();
        let fin = g.finalize().unwrap();
        let bound = g.gap_bound().unwrap();
        for (k, s) in tr.samples.iter().enumerate() {
            let twin = g.twin_values[k];
            assert!(s.value <= twin + 1e-9);
            assert!(s.value >= twin - g.lambda - 1e-9);
            assert!(s.value - fin.fstar >= bound - 1e-6);
        }
        assert_eq!(fin.xstar, fin.nonsmooth.xstar);
        assert!((fin.f.value(&fin.xstar).unwrap() - fin.fstar).abs() < 1e-8);
        assert!((fin.smoothness - 1.0 / (a / (8.0 * t as f64)).tanh()).abs() < 1e-9);
    }

    #[test]
    fn locality_on_balls() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let t = 6;
        let mut g = NonsmoothGame::new(t, 2.0).unwrap();
        let mut x = g.xref().clone();
        let mut pts = Vec::new();
        for _ in 0..t {
            g.respond(&x).unwrap();
            pts.push(x.clone());
            x = sample::point_in_ball(&mut rng, g.xref(), 1.0);
        }
        let fin = g.finalize().unwrap();
        for (k, xk) in pts.iter().enumerate() {
            let fk = ShiftedMax::new(fin.f.parts()[..=k].to_vec()).unwrap();
            for _ in 0..100 {
                let y = sample::point_in_ball(&mut rng, xk, g.delta / 2.0);
                let a = fin.f.eval(&y).unwrap();
                let b = fk.eval(&y).unwrap();
                assert!((a.value - b.value).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn worst_build_examples() {
        let inst = WorstInstance::build(0.15, 20.0, 1).unwrap();
        assert_eq!(inst.d, 27);
        let inst10 = WorstInstance::build(0.15, 10.0, 1).unwrap();
        assert_eq!(inst10.d, 13);
        assert!(WorstInstance::build(0.2, 10.0, 1).is_err());
        // eps close to the cap leaves d < 2 for small r
        assert!(matches!(
            WorstInstance::build(0.17, 0.5, 1),
            Err(Error::Domain(_))
        ));
        let last = dist(&inst.xstar, &inst.y[inst.d - 1]).unwrap();
        assert!((last - inst.radii[inst.d - 1]).abs() < 1e-8);
        assert!(last >= 10.0);
    }

    #[test]
    fn worst_oracle_examples() {
        let inst = Arc::new(WorstInstance::build(0.15, 10.0, 1).unwrap());
        let o = worst_oracle(inst.clone()).unwrap();
        let (s, rule) = o.eval_flagged(&inst.xstar).unwrap();
        assert_eq!(s.value, 0.0);
        assert_eq!(rule, SubgradientRule::Minimizer);
        let cos = inst.theta.cos();
        for k in 0..inst.d - 1 {
            let (s, rule) = o.eval_flagged(&inst.y[k]).unwrap();
            assert_eq!(rule, SubgradientRule::LadderVertex(k));
            assert!((s.value - inst.radii[k]).abs() < 1e-8);
            assert!((s.g.norm() - 1.0 / cos).abs() < 1e-9);
            assert!(s.g.norm() <= inst.m);
        }
    }

    #[test]
    fn tangent_rule_keeps_the_next_level() {
        // at a point of I_k between y_k and y_{k+1}, -g + log(x*)/dist lies
        // in I_{k+1}
        let inst = Arc::new(WorstInstance::build(0.15, 10.0, 1).unwrap());
        let o = worst_oracle(inst.clone()).unwrap();
        let mut tangent_hits = 0;
        for k in 1..inst.d - 2 {
            // step from y_k back toward y_{k-1}, staying in I_k
            let w = inst.frames[k][k - 1].scale(-0.01);
            let x = exp(&inst.y[k], &w).unwrap();
            let (s, rule) = o.eval_flagged(&x).unwrap();
            if let SubgradientRule::Tangent(kk) = rule {
                assert_eq!(kk, k);
                let m = s.g.scale(-1.0);
                for c in &m.vec()[k + 2..] {
                    assert!(c.abs() < 1e-9, "{c}");
                }
                tangent_hits += 1;
            }
        }
        assert!(tangent_hits > 0);
    }

    #[test]
    fn polyak_follows_the_ladder() {
        for (eps, r) in [(0.15, 10.0), (0.17, 10.0), (0.15, 20.0), (0.17, 20.0)] {
            let inst = Arc::new(WorstInstance::build(eps, r, 1).unwrap());
            let o = worst_oracle(inst.clone()).unwrap();
            let tr = polyak_sgd(&o, 0.0, inst.y[0].clone(), r, inst.d).unwrap();
            assert_eq!(tr.samples.len(), inst.d);
            for (k, s) in tr.samples.iter().enumerate() {
                assert!(dist(&s.x, &inst.y[k]).unwrap() <= 1e-6);
                assert!((tr.polyak[k].s - inst.radii[k]).abs() <= 1e-8);
                assert!((tr.gaps[k] - inst.radii[k]).abs() <= 1e-8);
                if k + 1 < inst.d {
                    assert!((tr.polyak[k].step_len - inst.deltas[k]).abs() <= 1e-8);
                }
            }
            let rep = a2_check(&inst, &tr).unwrap();
            assert!(rep.pass, "{rep:?}");
        }
    }

    #[test]
    fn a2_check_examples() {
        let inst = Arc::new(WorstInstance::build(0.15, 10.0, 1).unwrap());
        let o = worst_oracle(inst.clone()).unwrap();
        let empty = a2_check(&inst, &Trace::default()).unwrap();
        assert!(empty.pass && empty.rows.is_empty());
        let s0 = o.eval(&inst.y[0]).unwrap();
        let s1 = o.eval(&inst.xstar).unwrap();
        let tr = Trace {
            samples: vec![s0, s1],
            ..Default::default()
        };
        let rep = a2_check(&inst, &tr).unwrap();
        assert_eq!(rep.first_a1_failure, Some(1));
    }

    #[test]
    fn gap_bound_examples() {
        let r = 3.0;
        let xref = HPoint::origin(3);
        let z = exp(
            &xref,
            &HTangent::new(xref.clone(), vec![0.0, r, 0.0, 0.0]).unwrap(),
        )
        .unwrap();
        let f = fn_sqdist_point(z);
        let rep = gap_bound_check(f.as_ref(), &xref, r, zeta(r).unwrap(), 0.0).unwrap();
        assert!((rep.gap - 0.5 * r * r).abs() < 1e-9);
        assert!((rep.bound - 4.0 * r * r).abs() < 1e-9);
        assert!(rep.pass);
        let c = crate::zoo::fn_constant(2.0);
        let rep = gap_bound_check(c.as_ref(), &xref, r, 0.0, 2.0).unwrap();
        assert!(rep.pass && rep.gap == 0.0);
    }

    #[test]
    fn transcript_lines() {
        let mut g = NonsmoothGame::new(3, 1.0).unwrap();
        let x = g.xref().clone();
        g.respond(&x).unwrap();
        let s = transcript_jsonl(g.records()).unwrap();
        assert_eq!(s.lines().count(), 1);
        let v: serde_json::Value = serde_json::from_str(s.lines().next().unwrap()).unwrap();
        assert_eq!(v["chosen_i"], 1);
        assert_eq!(v["x"].as_array().unwrap().len(), 4);
    }
}
