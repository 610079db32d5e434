//! Cutting-planes game: the adversary keeps a packing of candidate
//! minimizers and answers each query with a hyperplane that spares as many
//! of them as it can.

use std::collections::HashMap;
use std::hash::{BuildHasherDefault, Hasher};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hyperboloid::{minner, sub_dist, tangent_frame, HPoint, HTangent, HalfSpace};
use crate::qp::simplex_qp;
use crate::sample;
use crate::tol;

fn default_normals() -> usize {
    512
}

fn default_rounds() -> usize {
    64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutConfig {
    pub d: usize,
    pub r: f64,
    /// Defaults to `1/(320(d-1))`.
    #[serde(default)]
    pub eps: Option<f64>,
    #[serde(default = "default_normals")]
    pub n_normal_samples: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_rounds")]
    pub max_rounds: usize,
}

impl CutConfig {
    pub fn new(d: usize, r: f64, eps: f64, seed: u64) -> Self {
        CutConfig {
            d,
            r,
            eps: Some(eps),
            n_normal_samples: default_normals(),
            seed,
            max_rounds: default_rounds(),
        }
    }

    pub fn eps(&self) -> f64 {
        self.eps
            .unwrap_or(1.0 / (320.0 * (self.d as f64 - 1.0)))
    }

    pub fn validate(&self) -> Result<()> {
        if self.d < 3 {
            return Err(Error::Domain(format!("d = {} must be >= 3", self.d)));
        }
        if !(self.r > 0.0) || self.r > tol::R_MAX {
            return Err(Error::Range(format!("r = {} not in (0, R_MAX]", self.r)));
        }
        if !(self.eps() > 0.0) {
            return Err(Error::Domain(format!("eps = {} must be positive", self.eps())));
        }
        if self.n_normal_samples == 0 {
            return Err(Error::Domain("n_normal_samples must be positive".into()));
        }
        Ok(())
    }

    fn clearance(&self) -> f64 {
        self.eps() * self.r
    }
}

/// Neighbor lookup for points around the origin: shells of width `w` in
/// the distance to the origin, and inside each shell a grid on the unit
/// direction whose cells are wide enough that any point within `w` of a
/// query sits in an adjacent cell.
struct Index {
    d: usize,
    w: f64,
    cosh_w: f64,
    coords: Vec<f64>,
    shells: Vec<Shell>,
}

struct Shell {
    /// `None`: one bucket, linear scan.
    cell: Option<f64>,
    buckets: HashMap<u64, Vec<u32>, BuildHasherDefault<KeyHasher>>,
}

/// Keys are already mixed; hashing passes them through.
#[derive(Default)]
struct KeyHasher(u64);

impl Hasher for KeyHasher {
    fn finish(&self) -> u64 {
        self.0
    }

    fn write(&mut self, bytes: &[u8]) {
        for b in bytes {
            self.0 = (self.0 ^ *b as u64).wrapping_mul(0x100000001b3);
        }
    }

    fn write_u64(&mut self, v: u64) {
        self.0 = v;
    }
}

const GRID_MAX_DIM: usize = 6;

fn cell_key(cells: &[i64]) -> u64 {
    let h = cells.iter().fold(0xcbf29ce484222325u64, |h, c| {
        (h ^ (*c as u64)).wrapping_mul(0x100000001b3)
    });
    h ^ (h >> 29)
}

/// Minkowski product without compensation, for hot loops on thresholds.
fn fast_minner(a: &[f64], b: &[f64]) -> f64 {
    let mut s = -a[0] * b[0];
    for i in 1..a.len() {
        s += a[i] * b[i];
    }
    s
}

impl Index {
    fn new(d: usize, w: f64) -> Self {
        Index {
            d,
            w,
            cosh_w: w.cosh(),
            coords: Vec::new(),
            shells: Vec::new(),
        }
    }

    fn len(&self) -> usize {
        self.coords.len() / (self.d + 1)
    }

    fn point(&self, id: usize) -> &[f64] {
        &self.coords[id * (self.d + 1)..(id + 1) * (self.d + 1)]
    }

    fn rho(x: &[f64]) -> (f64, f64) {
        let s = crate::hyperboloid::euclid_norm(&x[1..]);
        (s.asinh(), s)
    }

    fn shell(&mut self, j: usize) -> &mut Shell {
        while self.shells.len() <= j {
            let k = self.shells.len();
            let cell = if k < 2 || self.d > GRID_MAX_DIM {
                None
            } else {
                // chord between directions of points within w, one of them
                // at distance >= k w and the other >= (k-1) w
                let a = (k as f64 * self.w).sinh();
                let b = ((k - 1) as f64 * self.w).sinh();
                let h = (2.0 * (self.cosh_w - 1.0) / (a * b)).sqrt();
                // cells of width 2h: the chord ball meets at most two per axis
                (h < 0.5).then_some(2.0 * h)
            };
            self.shells.push(Shell {
                cell,
                buckets: HashMap::default(),
            });
        }
        &mut self.shells[j]
    }

    fn cells(x: &[f64], s: f64, h: f64, out: &mut [i64]) {
        for (o, v) in out.iter_mut().zip(&x[1..]) {
            *o = if s > 0.0 { (v / s / h).floor() as i64 } else { 0 };
        }
    }

    fn insert(&mut self, x: &[f64]) {
        let (rho, s) = Index::rho(x);
        let j = (rho / self.w) as usize;
        let id = self.len() as u32;
        self.coords.extend_from_slice(x);
        let d = self.d;
        let sh = self.shell(j);
        let key = match sh.cell {
            Some(h) => {
                let mut c = [0i64; GRID_MAX_DIM];
                Index::cells(x, s, h, &mut c[..d]);
                cell_key(&c[..d])
            }
            None => 0,
        };
        sh.buckets.entry(key).or_default().push(id);
    }

    /// Whether some stored point has `-<x, p>_M < cosh(w)`.
    fn has_near(&self, x: &[f64]) -> bool {
        let close = |id: u32| -fast_minner(x, self.point(id as usize)) < self.cosh_w;
        self.visit(x, close)
    }

    /// Calls `f` on every point of the cells a `w`-ball around `x` can
    /// touch, stopping once it returns true. The shell and cell of `x` go
    /// first since that is where a near point usually sits.
    fn visit(&self, x: &[f64], mut f: impl FnMut(u32) -> bool) -> bool {
        let (rho, s) = Index::rho(x);
        let own = (rho / self.w) as usize;
        let lo = ((rho - self.w).max(0.0) / self.w) as usize;
        let hi = ((rho + self.w) / self.w) as usize;
        let d = self.d;
        let order = std::iter::once(own).chain((lo..=hi).filter(|&j| j != own));
        for sh in order.filter_map(|j| self.shells.get(j)) {
            match sh.cell {
                None => {
                    if sh.buckets.values().flatten().any(|id| f(*id)) {
                        return true;
                    }
                }
                Some(h) => {
                    // per axis the own cell and the neighbour on the near side
                    let mut mine = [0i64; GRID_MAX_DIM];
                    let mut other = [0i64; GRID_MAX_DIM];
                    for (i, v) in x[1..].iter().enumerate() {
                        let u = if s > 0.0 { v / s / h } else { 0.0 };
                        mine[i] = u.floor() as i64;
                        other[i] = if u - u.floor() < 0.5 { mine[i] - 1 } else { mine[i] + 1 };
                    }
                    let mut c = [0i64; GRID_MAX_DIM];
                    for mask in 0u32..(1 << d) {
                        for i in 0..d {
                            c[i] = if mask >> i & 1 == 0 { mine[i] } else { other[i] };
                        }
                        if let Some(b) = sh.buckets.get(&cell_key(&c[..d])) {
                            if b.iter().any(|id| f(*id)) {
                                return true;
                            }
                        }
                    }
                }
            }
        }
        false
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Packing {
    pub centers: Vec<HPoint>,
    /// `1/4 e^{(d-1) r / 4}`, for comparison only.
    pub theoretical_floor: f64,
    pub samples_drawn: u64,
}

/// Attempts around each active point in the seeding phase.
const SEED_TRIES: usize = 300;

/// Maximal `2 eps r`-separated set in `B(x_ref, r - eps r)`.
///
/// Points are first thrown on spheres around already accepted ones, then
/// hill climbs toward Voronoi vertices fill the leftover holes, and last the
/// greedy rule runs on volume-uniform samples until `200 * size`
/// consecutive rejections.
pub fn packing_build(cfg: &CutConfig) -> Result<Packing> {
    cfg.validate()?;
    let (d, r) = (cfg.d, cfg.r);
    let floor = 0.25 * ((d as f64 - 1.0) * r / 4.0).exp();
    let rad = cfg.clearance();
    let xref = HPoint::origin(d);
    if rad >= r {
        return Ok(Packing {
            centers: vec![xref],
            theoretical_floor: floor,
            samples_drawn: 0,
        });
    }
    let big = r - rad;
    let cosh_big = big.cosh();
    let sep = 2.0 * rad;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut index = Index::new(d, sep);
    let mut drawn = 0u64;
    let mut x = vec![0.0; d + 1];

    random_point(&mut rng, big, &mut x);
    drawn += 1;
    index.insert(&x);
    let mut active = vec![0usize];
    let mut v = vec![0.0; d + 1];
    while !active.is_empty() {
        let slot = rng.random_range(0..active.len());
        let p = index.point(active[slot]).to_vec();
        let mut placed = false;
        for _ in 0..SEED_TRIES {
            let t = sep * (1.0 + 1e-9);
            annulus_point(&mut rng, &p, t, &mut v, &mut x);
            drawn += 1;
            if x[0] > cosh_big {
                // onto the boundary sphere, where the last holes sit
                let sp = crate::hyperboloid::euclid_norm(&x[1..]);
                let k = big.sinh() / sp;
                for a in x[1..].iter_mut() {
                    *a *= k;
                }
                x[0] = cosh_big;
            }
            if index.has_near(&x) {
                continue;
            }
            active.push(index.len());
            index.insert(&x);
            placed = true;
            break;
        }
        if !placed {
            active.swap_remove(slot);
        }
    }

    log::debug!("packing: {} seeded", index.len());
    let mut climber = Climber::new(d, big, sep);
    for _ in 0..REPAIR_ROUNDS {
        let starts = REPAIR_STARTS * index.len();
        let before = index.len();
        for _ in 0..starts {
            let rho = big - 0.5 * sep * rng.random::<f64>();
            sphere_point(&mut rng, rho, &mut x);
            drawn += 1;
            if let Some(hole) = climber.run(&index, &x) {
                index.insert(&hole);
            }
        }
        log::debug!("packing: repair round added {}", index.len() - before);
        // stragglers are left to the rejection pass below
        if (index.len() - before) * REPAIR_MIN_YIELD < before {
            break;
        }
    }
    let mut fails = 0u64;
    loop {
        let limit = 200 * (index.len() as u64);
        if fails >= limit {
            break;
        }
        random_point(&mut rng, big, &mut x);
        drawn += 1;
        if index.has_near(&x) {
            fails += 1;
        } else {
            index.insert(&x);
            fails = 0;
        }
    }
    let centers: Vec<HPoint> = (0..index.len())
        .map(|i| HPoint::from_raw(index.point(i).to_vec()))
        .collect();
    log::debug!("packing: {} centers from {drawn} samples", centers.len());
    Ok(Packing {
        centers,
        theoretical_floor: floor,
        samples_drawn: drawn,
    })
}

const REPAIR_ROUNDS: usize = 20;
const REPAIR_STARTS: usize = 1;
/// Repair stops once a round adds under `1 / REPAIR_MIN_YIELD` of the size.
const REPAIR_MIN_YIELD: usize = 500;
const CLIMB_STEPS: usize = 40;

/// Ascent of the distance to the nearest stored point, kept inside
/// `B(origin, big)`. Local maxima are Voronoi vertices, so a hole is found
/// with the probability of its basin rather than of its volume.
struct Climber {
    big_sinh: f64,
    sep: f64,
    /// `(id, -<q, p>)` for stored points within `sep`
    near: Vec<(u32, f64)>,
    dirs: Vec<f64>,
    v: Vec<f64>,
    y: Vec<f64>,
}

impl Climber {
    fn new(d: usize, big: f64, sep: f64) -> Self {
        Climber {
            big_sinh: big.sinh(),
            sep,
            near: Vec::new(),
            dirs: Vec::new(),
            v: vec![0.0; d + 1],
            y: vec![0.0; d + 1],
        }
    }

    /// Cosh of the distance to the nearest stored point, `None` if all are
    /// farther than `sep`. Fills `near`.
    fn nearest(index: &Index, q: &[f64], near: &mut Vec<(u32, f64)>) -> Option<f64> {
        near.clear();
        index.visit(q, |id| {
            let c = -fast_minner(q, index.point(id as usize));
            if c < index.cosh_w {
                near.push((id, c));
            }
            false
        });
        near.iter().map(|e| e.1).min_by(f64::total_cmp)
    }

    /// Least-norm point of the hull of `dirs`, into `v`.
    fn min_norm(&mut self) {
        let n1 = self.v.len();
        let k = self.dirs.len() / n1;
        let dirs = &self.dirs;
        let gram = DMatrix::from_fn(k, k, |i, j| {
            fast_minner(&dirs[i * n1..(i + 1) * n1], &dirs[j * n1..(j + 1) * n1])
        });
        let w = simplex_qp(&gram, &DVector::zeros(k));
        self.v.iter_mut().for_each(|a| *a = 0.0);
        for (i, wi) in w.iter().enumerate() {
            for (a, b) in self.v.iter_mut().zip(&dirs[i * n1..(i + 1) * n1]) {
                *a += wi * b;
            }
        }
    }

    /// The endpoint if it clears every stored point by `sep`.
    fn run(&mut self, index: &Index, start: &[f64]) -> Option<Vec<f64>> {
        let n1 = start.len();
        let mut q = start.to_vec();
        let mut cm = Climber::nearest(index, &q, &mut self.near)?;
        for _ in 0..CLIMB_STEPS {
            let m = cm.max(1.0).acosh();
            let cut = (m + 0.1 * self.sep).cosh();
            self.dirs.clear();
            for &(id, c) in &self.near {
                if c > cut {
                    continue;
                }
                // unit tangent at q pointing away from p
                let p = index.point(id as usize);
                let n = (c * c - 1.0).max(0.0).sqrt();
                if n < 1e-12 {
                    return None;
                }
                self.dirs.extend(p.iter().zip(&q).map(|(a, b)| (c * b - a) / n));
            }
            self.min_norm();
            let sp = crate::hyperboloid::euclid_norm(&q[1..]);
            if sp >= self.big_sinh * (1.0 - 1e-12) {
                // on the outer sphere: outward moves are clipped, so climb
                // along it instead
                let out: Vec<f64> = q
                    .iter()
                    .enumerate()
                    .map(|(i, a)| (q[0] * a - if i == 0 { 1.0 } else { 0.0 }) / sp)
                    .collect();
                if fast_minner(&self.v, &out) > 0.0 {
                    for u in self.dirs.chunks_mut(n1) {
                        let c = fast_minner(u, &out);
                        u.iter_mut().zip(&out).for_each(|(a, b)| *a -= c * b);
                    }
                    self.min_norm();
                }
            }
            let vn = fast_minner(&self.v, &self.v).max(0.0).sqrt();
            if vn < 1e-9 {
                return None;
            }
            let mut alpha = (self.sep - m).max(0.05 * self.sep);
            let mut moved = false;
            for _ in 0..8 {
                let (ch, sh) = (alpha.cosh(), alpha.sinh() / vn);
                for ((y, a), b) in self.y.iter_mut().zip(&q).zip(&self.v) {
                    *y = ch * a + sh * b;
                }
                let sp = crate::hyperboloid::euclid_norm(&self.y[1..]);
                if sp > self.big_sinh {
                    let f = self.big_sinh / sp;
                    self.y[1..].iter_mut().for_each(|a| *a *= f);
                }
                let sp2: f64 = self.y[1..].iter().map(|a| a * a).sum();
                self.y[0] = (1.0 + sp2).sqrt();
                match Climber::nearest(index, &self.y, &mut self.near) {
                    None => return Some(self.y.clone()),
                    Some(c2) if c2 > cm * (1.0 + 1e-14) => {
                        std::mem::swap(&mut q, &mut self.y);
                        cm = c2;
                        moved = true;
                        break;
                    }
                    _ => alpha *= 0.5,
                }
            }
            if !moved {
                return None;
            }
        }
        None
    }
}

/// Point at distance `rho` from the origin in a uniform direction.
fn sphere_point<R: Rng + ?Sized>(rng: &mut R, rho: f64, x: &mut [f64]) {
    let n = loop {
        for v in x[1..].iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        let n = crate::hyperboloid::euclid_norm(&x[1..]);
        if n > 1e-12 {
            break n;
        }
    };
    let k = rho.sinh() / n;
    x[1..].iter_mut().for_each(|a| *a *= k);
    x[0] = rho.cosh();
}

/// `exp_p(t u)` for a uniform unit `u` in `T_p`.
fn annulus_point<R: Rng + ?Sized>(rng: &mut R, p: &[f64], t: f64, v: &mut [f64], out: &mut [f64]) {
    let n = loop {
        for a in v.iter_mut() {
            *a = rng.sample(StandardNormal);
        }
        // project onto T_p; the Minkowski norm there is Euclidean-like
        let ip = minner(p, v);
        for (a, b) in v.iter_mut().zip(p) {
            *a += ip * b;
        }
        let n2 = minner(v, v);
        if n2 > 1e-20 {
            break n2.sqrt();
        }
    };
    let (c, s) = (t.cosh(), t.sinh() / n);
    for i in 0..out.len() {
        out[i] = c * p[i] + s * v[i];
    }
    let sp: f64 = out[1..].iter().map(|a| a * a).sum();
    out[0] = (1.0 + sp).sqrt();
}

/// Volume-uniform point of `B(origin, radius)` written into `x`.
fn random_point<R: Rng + ?Sized>(rng: &mut R, radius: f64, x: &mut [f64]) {
    let d = x.len() - 1;
    let t = sample::ball_radius(rng, d, radius);
    let n = loop {
        for v in x[1..].iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        let n = crate::hyperboloid::euclid_norm(&x[1..]);
        if n > 1e-12 {
            break n;
        }
    };
    let s = t.sinh() / n;
    for v in x[1..].iter_mut() {
        *v *= s;
    }
    x[0] = t.cosh();
}

/// Simpson on `[a, b]` refined until the local estimate moves by less than
/// `15 tol`.
fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    #[allow(clippy::too_many_arguments)]
    fn rec(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
            + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, 50)
}

/// Area of the unit sphere `S^{d-1}` in `R^d`.
pub fn sphere_area(d: usize) -> f64 {
    // sigma_{d-1} = 2 pi^{d/2} / Gamma(d/2) via sigma_{d+1} = 2 pi sigma_{d-1} / d
    let mut s = if d.is_multiple_of(2) { 2.0 * std::f64::consts::PI } else { 2.0 };
    let mut k = if d.is_multiple_of(2) { 2 } else { 1 };
    while k < d {
        s *= 2.0 * std::f64::consts::PI / k as f64;
        k += 2;
    }
    s
}

/// Volume of a radius-`r` ball in `H^d`, `sigma_{d-1} int_0^r sinh^{d-1}`.
pub fn volume_ball(d: usize, r: f64) -> Result<f64> {
    if d < 2 {
        return Err(Error::Domain(format!("d = {d} must be >= 2")));
    }
    if !(r >= 0.0) {
        return Err(Error::Domain(format!("r = {r} must be >= 0")));
    }
    if r == 0.0 {
        return Ok(0.0);
    }
    let k = (d - 1) as i32;
    let f = |t: f64| t.sinh().powi(k);
    // scale the absolute tolerance to the integral's size
    let rough = (f(r) + f(0.5 * r)) * r;
    let integral = adaptive_simpson(&f, 0.0, r, 1e-10 * rough);
    Ok(sphere_area(d) * integral)
}

/// `(lower, upper)` with `upper = sigma e^{r(d-1)} / ((d-1) 2^{d-1})` and
/// `lower = upper / 4` (valid for `r >= 4 log d`).
pub fn volume_bounds(d: usize, r: f64) -> (f64, f64) {
    let k = (d - 1) as f64;
    let upper = sphere_area(d) * (r * k).exp() / (k * 2f64.powi(d as i32 - 1));
    (upper / 4.0, upper)
}

/// One adversary answer.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundReport {
    pub k: usize,
    pub x: Vec<f64>,
    /// Unit normal returned as the subgradient direction; `None` when the
    /// adversary is exhausted.
    pub g: Option<Vec<f64>>,
    pub before: usize,
    pub after: usize,
    /// Candidates whose clearance ball meets the chosen hyperplane.
    pub intersecting: usize,
    pub fraction: f64,
    pub quarter_ok: bool,
    pub fallback: bool,
    pub consistent: bool,
}

#[derive(Debug, Clone)]
pub struct CutGameState {
    pub cfg: CutConfig,
    pub centers: Vec<HPoint>,
    /// Indices into `centers`.
    pub candidates: Vec<usize>,
    pub history: Vec<(HPoint, HTangent)>,
    pub round: usize,
    rng: ChaCha8Rng,
    sinh_clear: f64,
    /// Coordinates of the candidates, in order, flattened for the scoring loop.
    live: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Answer {
    Cut(HTangent),
    Exhausted,
}

/// Candidates strictly on the negative and on the positive side of `w`
/// with clearance; fixed width so the loop unrolls. Branch-free, since
/// the side is a coin flip per candidate.
fn sides<const N: usize>(live: &[f64], w: &[f64], sc: f64) -> (usize, usize) {
    let w: [f64; N] = w.try_into().expect("width matches");
    let (mut plus, mut minus) = (0, 0);
    for c in live.chunks_exact(N) {
        let mut m = -c[0] * w[0];
        for i in 1..N {
            m += c[i] * w[i];
        }
        plus += (m < -sc) as usize;
        minus += (m > sc) as usize;
    }
    (plus, minus)
}

/// `s <g, c>_M < -sinh(eps r)`: `c` lies strictly on the negative side and
/// its clearance ball misses the hyperplane.
fn keeps(g: &[f64], c: &[f64], sinh_clear: f64) -> bool {
    fast_minner(g, c) < -sinh_clear
}

impl CutGameState {
    pub fn new(cfg: CutConfig, centers: Vec<HPoint>) -> Result<Self> {
        cfg.validate()?;
        let rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9e37_79b9_7f4a_7c15);
        let sinh_clear = cfg.clearance().sinh();
        let live = centers.iter().flat_map(|c| c.coords().iter().copied()).collect();
        Ok(CutGameState {
            live,
            candidates: (0..centers.len()).collect(),
            centers,
            cfg,
            history: Vec::new(),
            round: 0,
            rng,
            sinh_clear,
        })
    }

    pub fn start(cfg: CutConfig) -> Result<Self> {
        let p = packing_build(&cfg)?;
        CutGameState::new(cfg, p.centers)
    }

    fn count(&self, w: &[f64]) -> (usize, usize, usize) {
        let (plus, minus) = match w.len() {
            4 => sides::<4>(&self.live, w, self.sinh_clear),
            5 => sides::<5>(&self.live, w, self.sinh_clear),
            6 => sides::<6>(&self.live, w, self.sinh_clear),
            7 => sides::<7>(&self.live, w, self.sinh_clear),
            8 => sides::<8>(&self.live, w, self.sinh_clear),
            9 => sides::<9>(&self.live, w, self.sinh_clear),
            _ => {
                let (mut plus, mut minus) = (0, 0);
                for c in self.live.chunks_exact(w.len()) {
                    let m = fast_minner(w, c);
                    plus += (m < -self.sinh_clear) as usize;
                    minus += (m > self.sinh_clear) as usize;
                }
                (plus, minus)
            }
        };
        (self.candidates.len() - plus - minus, plus, minus)
    }

    pub fn respond(&mut self, x: &HPoint) -> Result<(Answer, RoundReport)> {
        if x.dim() != self.cfg.d {
            return Err(Error::Dimension {
                expected: self.cfg.d + 1,
                got: x.coords().len(),
            });
        }
        let before = self.candidates.len();
        let k = self.round;
        self.round += 1;
        let exhausted = |fallback| RoundReport {
            k,
            x: x.coords().to_vec(),
            g: None,
            before,
            after: 0,
            intersecting: before,
            fraction: 0.0,
            quarter_ok: before == 0,
            fallback,
            consistent: true,
        };
        if before == 0 {
            return Ok((Answer::Exhausted, exhausted(false)));
        }
        let frame = tangent_frame(x);
        let normals: Vec<HTangent> = (0..self.cfg.n_normal_samples)
            .map(|_| sample::unit_in_frame(&mut self.rng, x, &frame))
            .collect();
        let scores: Vec<(usize, usize, usize)> =
            normals.par_iter().map(|w| self.count(w.vec())).collect();
        // fewest intersections; first sample on ties
        let mut pick = 0;
        for (i, s) in scores.iter().enumerate() {
            if s.0 < scores[pick].0 {
                pick = i;
            }
        }
        let mut fallback = false;
        if scores[pick].1.max(scores[pick].2) == 0 {
            fallback = true;
            let mut best = 0;
            for (i, s) in scores.iter().enumerate() {
                if s.1.max(s.2) > scores[best].1.max(scores[best].2) {
                    best = i;
                }
            }
            if scores[best].1.max(scores[best].2) == 0 {
                return Ok((Answer::Exhausted, exhausted(true)));
            }
            pick = best;
        }
        let (hit, plus, minus) = scores[pick];
        let g = if plus >= minus {
            normals[pick].clone()
        } else {
            normals[pick].scale(-1.0)
        };
        let sc = self.sinh_clear;
        let centers = &self.centers;
        self.candidates
            .retain(|&i| keeps(g.vec(), centers[i].coords(), sc));
        self.live = self
            .candidates
            .iter()
            .flat_map(|&i| centers[i].coords().iter().copied())
            .collect();
        self.history.push((x.clone(), g.clone()));
        let after = self.candidates.len();
        let consistent = self.consistent_latest()?;
        Ok((
            Answer::Cut(g.clone()),
            RoundReport {
                k,
                x: x.coords().to_vec(),
                g: Some(g.vec().to_vec()),
                before,
                after,
                intersecting: hit,
                fraction: after as f64 / before as f64,
                quarter_ok: 4 * after >= before,
                fallback,
                consistent,
            },
        ))
    }

    /// Survivors against the newest cut only, through the half-space margin
    /// and the hyperplane distance. Earlier cuts were checked on a superset
    /// of the current survivors and nothing they involve changes.
    pub fn consistent_latest(&self) -> Result<bool> {
        let Some(last) = self.history.last() else {
            return Ok(true);
        };
        let last = cut_halfspaces(std::slice::from_ref(last))?;
        for &i in &self.candidates {
            if !consistent_in(&self.centers[i], &last, self.cfg.clearance())? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Re-checks every survivor against the whole history through the
    /// half-space margin and the hyperplane distance.
    pub fn consistent(&self) -> Result<bool> {
        let cuts = cut_halfspaces(&self.history)?;
        for &i in &self.candidates {
            if !consistent_in(&self.centers[i], &cuts, self.cfg.clearance())? {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// `<g, log_x c> < 0` and `dist(c, S) > eps r` for every past cut.
pub fn consistent_with(c: &HPoint, history: &[(HPoint, HTangent)], clearance: f64) -> Result<bool> {
    consistent_in(c, &cut_halfspaces(history)?, clearance)
}

/// The kept side `{<g, log_x .> < 0}` of each cut.
pub fn cut_halfspaces(history: &[(HPoint, HTangent)]) -> Result<Vec<HalfSpace>> {
    history
        .iter()
        .map(|(x, g)| HalfSpace::new(x.clone(), g))
        .collect()
}

pub fn consistent_in(c: &HPoint, cuts: &[HalfSpace], clearance: f64) -> Result<bool> {
    for h in cuts {
        if h.margin(c)? >= 0.0 || sub_dist(c, h.boundary())?.0 <= clearance {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Query policy of the cutting-planes player.
pub trait CutPlayer {
    fn name(&self) -> &'static str;
    fn next(&mut self, history: &[(HPoint, HTangent)]) -> HPoint;
}

/// Always queries `x_ref`.
pub struct RefPlayer {
    pub xref: HPoint,
}

impl CutPlayer for RefPlayer {
    fn name(&self) -> &'static str {
        "ref"
    }

    fn next(&mut self, _: &[(HPoint, HTangent)]) -> HPoint {
        self.xref.clone()
    }
}

/// Volume-uniform queries in `B(x_ref, r)`.
pub struct UniformPlayer {
    pub xref: HPoint,
    pub r: f64,
    pub rng: ChaCha8Rng,
}

impl CutPlayer for UniformPlayer {
    fn name(&self) -> &'static str {
        "uniform"
    }

    fn next(&mut self, _: &[(HPoint, HTangent)]) -> HPoint {
        let frame = tangent_frame(&self.xref);
        sample::uniform_in_ball(&mut self.rng, &self.xref, &frame, self.r)
    }
}

/// Queries the normalized ambient mean of sampled points of
/// `B(x_ref, r)` that satisfy every past cut.
pub struct CenterPlayer {
    pub xref: HPoint,
    pub r: f64,
    pub samples: usize,
    pub rng: ChaCha8Rng,
}

impl CutPlayer for CenterPlayer {
    fn name(&self) -> &'static str {
        "center"
    }

    fn next(&mut self, history: &[(HPoint, HTangent)]) -> HPoint {
        let frame = tangent_frame(&self.xref);
        let mut sum = vec![0.0; self.xref.coords().len()];
        let mut hits = 0;
        for _ in 0..self.samples {
            let p = sample::uniform_in_ball(&mut self.rng, &self.xref, &frame, self.r);
            if history.iter().all(|(x, g)| minner(g.vec(), p.coords()) - minner(g.vec(), x.coords()) <= 0.0) {
                for (s, v) in sum.iter_mut().zip(p.coords()) {
                    *s += v;
                }
                hits += 1;
            }
        }
        if hits == 0 {
            return history.last().map_or(self.xref.clone(), |h| h.0.clone());
        }
        let q = -minner(&sum, &sum);
        let scale = 1.0 / q.sqrt();
        HPoint::from_raw(sum.iter().map(|v| v * scale).collect())
    }
}

pub fn make_player(name: &str, cfg: &CutConfig) -> Result<Box<dyn CutPlayer>> {
    let xref = HPoint::origin(cfg.d);
    let rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));
    Ok(match name {
        "ref" => Box::new(RefPlayer { xref }),
        "uniform" => Box::new(UniformPlayer { xref, r: cfg.r, rng }),
        "center" => Box::new(CenterPlayer {
            xref,
            r: cfg.r,
            samples: 2000,
            rng,
        }),
        other => return Err(Error::Config(format!("unknown cut player {other:?}"))),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct CutTranscript {
    pub seed: u64,
    pub d: usize,
    pub r: f64,
    pub eps: f64,
    pub player: String,
    pub initial_candidates: usize,
    pub theoretical_floor: f64,
    pub rounds: Vec<RoundReport>,
    /// Rounds answered with at least one survivor left.
    pub rounds_survived: usize,
    pub quarter_law_violations: usize,
    pub exhausted: bool,
    /// `(d-1) r / 32`, reported only.
    pub target_rounds: f64,
    pub xstar: Option<Vec<f64>>,
    pub replay_ok: bool,
}

pub fn play_game(cfg: &CutConfig, player: &mut dyn CutPlayer) -> Result<CutTranscript> {
    let packing = packing_build(cfg)?;
    play_on(cfg, packing, player)
}

pub fn play_on(cfg: &CutConfig, packing: Packing, player: &mut dyn CutPlayer) -> Result<CutTranscript> {
    let initial = packing.centers.len();
    let mut st = CutGameState::new(cfg.clone(), packing.centers)?;
    let mut rounds = Vec::new();
    let mut last_nonempty = st.candidates.clone();
    let mut exhausted = initial == 0;
    while !exhausted && rounds.len() < cfg.max_rounds {
        let x = player.next(&st.history);
        let (ans, rep) = st.respond(&x)?;
        rounds.push(rep);
        match ans {
            Answer::Exhausted => exhausted = true,
            Answer::Cut(_) => last_nonempty = st.candidates.clone(),
        }
    }
    let xstar = last_nonempty.first().map(|&i| st.centers[i].clone());
    let replay_ok = match &xstar {
        Some(c) => st
            .history
            .iter()
            .all(|(_, g)| keeps(g.vec(), c.coords(), st.sinh_clear))
            && consistent_with(c, &st.history, cfg.clearance())?,
        None => initial == 0,
    };
    let rounds_survived = rounds.iter().filter(|r| r.g.is_some() && r.after > 0).count();
    let quarter_law_violations = rounds.iter().filter(|r| !r.quarter_ok).count();
    Ok(CutTranscript {
        seed: cfg.seed,
        d: cfg.d,
        r: cfg.r,
        eps: cfg.eps(),
        player: player.name().to_string(),
        initial_candidates: initial,
        theoretical_floor: packing.theoretical_floor,
        rounds,
        rounds_survived,
        quarter_law_violations,
        exhausted,
        target_rounds: (cfg.d as f64 - 1.0) * cfg.r / 32.0,
        xstar: xstar.map(|p| p.coords().to_vec()),
        replay_ok,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hyperboloid::dist;

    #[test]
    fn sphere_area_values() {
        let pi = std::f64::consts::PI;
        assert!((sphere_area(2) - 2.0 * pi).abs() < 1e-12);
        assert!((sphere_area(3) - 4.0 * pi).abs() < 1e-12);
        assert!((sphere_area(4) - 2.0 * pi * pi).abs() < 1e-12);
        assert!((sphere_area(5) - 8.0 * pi * pi / 3.0).abs() < 1e-12);
    }

    #[test]
    fn volume_closed_forms() {
        let pi = std::f64::consts::PI;
        assert_eq!(volume_ball(3, 0.0).unwrap(), 0.0);
        for r in [0.1, 1.0, 4.0, 12.0] {
            let v2 = volume_ball(2, r).unwrap();
            let w2 = 2.0 * pi * (r.cosh() - 1.0);
            assert!((v2 - w2).abs() <= 1e-8 * w2);
            let v3 = volume_ball(3, r).unwrap();
            let w3 = pi * ((2.0 * r).sinh() - 2.0 * r);
            assert!((v3 - w3).abs() <= 1e-8 * w3);
        }
        assert!(volume_ball(1, 1.0).is_err());
    }

    #[test]
    fn volume_bounds_grid() {
        for d in 3..=8 {
            let lo = 4.0 * (d as f64).ln();
            for i in 0..=10 {
                let r = lo + (20.0 - lo) * i as f64 / 10.0;
                let v = volume_ball(d, r).unwrap();
                let (l, u) = volume_bounds(d, r);
                assert!(v <= u * (1.0 + 1e-6));
                assert!(v >= l * (1.0 - 1e-6));
            }
        }
    }

    #[test]
    fn packing_small_cases() {
        let cfg = CutConfig::new(3, 1.0, 1.5, 0);
        let p = packing_build(&cfg).unwrap();
        assert_eq!(p.centers, vec![HPoint::origin(3)]);

        let cfg = CutConfig::new(3, 3.0, 0.2, 5);
        let p = packing_build(&cfg).unwrap();
        let sep = 2.0 * cfg.eps() * cfg.r;
        for (i, a) in p.centers.iter().enumerate() {
            assert!(dist(a, &HPoint::origin(3)).unwrap() <= cfg.r * (1.0 - cfg.eps()) + 1e-12);
            for b in &p.centers[..i] {
                assert!(dist(a, b).unwrap() >= sep - 1e-12);
            }
        }
        // maximality: no fresh sample fits
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut x = vec![0.0; 4];
        let mut fits = 0;
        for _ in 0..2000 {
            random_point(&mut rng, cfg.r * (1.0 - cfg.eps()), &mut x);
            let y = HPoint::from_raw(x.clone());
            if p.centers.iter().all(|c| dist(c, &y).unwrap() >= sep) {
                fits += 1;
            }
        }
        assert!(fits <= 2, "{fits}");
        let again = packing_build(&cfg).unwrap();
        assert_eq!(again.centers, p.centers);
    }

    #[test]
    fn index_agrees_with_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for d in [3, 4, 7] {
            let w = 0.7;
            let mut idx = Index::new(d, w);
            let mut pts: Vec<Vec<f64>> = Vec::new();
            let mut x = vec![0.0; d + 1];
            for _ in 0..400 {
                random_point(&mut rng, 6.0, &mut x);
                let scan = pts.iter().any(|p| -minner(&x, p) < w.cosh());
                assert_eq!(idx.has_near(&x), scan);
                if !scan {
                    idx.insert(&x);
                    pts.push(x.clone());
                }
            }
        }
    }

    #[test]
    fn single_far_candidate_keeps_its_side() {
        let cfg = CutConfig::new(3, 4.0, 0.05, 2);
        let xref = HPoint::origin(3);
        let c = HPoint::from_spatial(&[3.0, 0.0, 0.0]);
        let mut st = CutGameState::new(cfg, vec![c.clone()]).unwrap();
        let (ans, rep) = st.respond(&xref).unwrap();
        let Answer::Cut(g) = ans else { panic!("exhausted") };
        assert_eq!(rep.after, 1);
        assert!(minner(g.vec(), c.coords()) < 0.0);
        assert!(rep.consistent);
    }

    #[test]
    fn empty_packing_is_an_immediate_win() {
        let cfg = CutConfig::new(3, 2.0, 0.1, 0);
        let mut p = RefPlayer {
            xref: HPoint::origin(3),
        };
        let packing = Packing {
            centers: vec![],
            theoretical_floor: 0.0,
            samples_drawn: 0,
        };
        let t = play_on(&cfg, packing, &mut p).unwrap();
        assert!(t.exhausted && t.rounds.is_empty() && t.replay_ok);
    }

    #[test]
    fn game_invariants() {
        let cfg = CutConfig::new(3, 4.0, 0.1, 7);
        for name in ["ref", "uniform", "center"] {
            let mut p = make_player(name, &cfg).unwrap();
            let t = play_game(&cfg, p.as_mut()).unwrap();
            assert!(t.replay_ok, "{name}");
            let mut prev = t.initial_candidates;
            for r in &t.rounds {
                assert!(r.consistent);
                assert!(r.after <= prev);
                prev = r.after;
            }
        }
    }
}
