//! `zoo-validate` suites. Each returns the worst normalized error (or the
//! worst margin) over its randomized cases.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use super::{Cell, Checks, Outcome, Relation};
use crate::cutting_planes::{volume_ball, volume_bounds};
use crate::error::Result;
use crate::hyperboloid::{dist, exp, gspan, log, minner, ptransport, zeta, HPoint};
use crate::resisting::{gap_bound_check, SmoothGame};
use crate::sample;
use crate::solvers::{play, polyak_guarantee, polyak_sgd, RandomPlayer};
use crate::zoo::{
    fn_dist_point, fn_dist_sub, fn_moreau, fn_shifted_max, fn_sqdist_point, fn_sum, u_r_lemmas,
    MoreauParams, Oracle,
};
use crate::TotallyGeodesicSub;

pub const SUITES: &[&str] = &[
    "manifold",
    "oracles",
    "u-lemmas",
    "zeta",
    "gap-bound",
    "polyak-upper",
    "volume",
];

pub(super) fn run(c: &Cell) -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(c.seed());
    let (d, n) = (c.usize("d"), c.usize("samples"));
    match c.str("suite") {
        "manifold" => manifold(&mut rng, d, n),
        "oracles" => oracles(&mut rng, d, n),
        "u-lemmas" => u_lemmas(n),
        "zeta" => zeta_suite(n),
        "gap-bound" => gap_bound(&mut rng, d, n),
        "polyak-upper" => polyak_upper(c.seed(), d),
        _ => volume(),
    }
}

/// Tracks `max(err / tol)` per named check.
#[derive(Default)]
struct Ratios(Vec<(&'static str, f64)>);

impl Ratios {
    fn add(&mut self, name: &'static str, err: f64, tol: f64) {
        let r = if err.is_nan() { f64::INFINITY } else { err / tol };
        match self.0.iter_mut().find(|e| e.0 == name) {
            Some(e) => e.1 = e.1.max(r),
            None => self.0.push((name, r)),
        }
    }

    fn finish(self, extra: serde_json::Value) -> Outcome {
        let mut ck = Checks::default();
        let mut worst: f64 = 0.0;
        let mut table = serde_json::Map::new();
        for (name, r) in &self.0 {
            ck.check(*r <= 1.0, *name);
            worst = worst.max(*r);
            table.insert(name.to_string(), json!(r));
        }
        ck.finish(
            worst,
            1.0,
            Relation::Le,
            json!({"error_over_tolerance": table, "details": extra}),
        )
    }
}

fn manifold(rng: &mut ChaCha8Rng, d: usize, n: usize) -> Result<Outcome> {
    let o = HPoint::origin(d);
    let mut q = Ratios::default();
    for _ in 0..n {
        let x = sample::point_in_ball(rng, &o, 2.0);
        let t = 20.0 * rng.random::<f64>();
        let v = sample::unit_tangent(rng, &x).scale(t);
        let y = exp(&x, &v)?;
        q.add("dist(x, exp v) = |v|", (dist(&x, &y)? - t).abs() / t.max(1.0), 1e-9);
        let back = log(&x, &y)?;
        q.add("log(exp v) = v", back.add_scaled(-1.0, &v).norm() / t.max(1.0), 1e-7);

        let y = sample::point_in_ball(rng, &x, 5.0);
        let u = sample::unit_tangent(rng, &x).scale(2.0 * rng.random::<f64>());
        let w = sample::unit_tangent(rng, &x).scale(2.0 * rng.random::<f64>());
        let (pu, pw) = (ptransport(&x, &y, &u)?, ptransport(&x, &y, &w)?);
        let scale = (u.norm() * w.norm()).max(1.0);
        q.add("transport isometry", (pu.inner(&pw) - u.inner(&w)).abs() / scale, 1e-9);
        q.add(
            "transport tangency",
            minner(pu.vec(), y.coords()).abs() / u.norm().max(1.0),
            1e-9,
        );

        let s = gspan(&[x.clone(), y.clone()], std::slice::from_ref(&u))?;
        let k = s.dim();
        let c1: Vec<f64> = (0..k).map(|_| 2.0 * rng.random::<f64>() - 1.0).collect();
        let c2: Vec<f64> = (0..k).map(|_| 2.0 * rng.random::<f64>() - 1.0).collect();
        let (p1, p2) = (s.sub_exp(&c1)?, s.sub_exp(&c2)?);
        let l = log(&p1, &p2)?;
        let mut res = s.span_residual(x.coords()).max(s.span_residual(y.coords()));
        for t in [0.25, 0.5, 0.75] {
            res = res.max(s.span_residual(exp(&p1, &l.scale(t))?.coords()));
        }
        q.add("gspan contains geodesics", res, 1e-9);
    }
    Ok(q.finish(json!({"d": d, "cases": n})))
}

fn oracles(rng: &mut ChaCha8Rng, d: usize, n: usize) -> Result<Outcome> {
    let o = HPoint::origin(d);
    let z = sample::point_in_ball(rng, &o, 1.0);
    let mut subs = Vec::new();
    for _ in 0..3 {
        let a = sample::point_in_ball(rng, &o, 1.5);
        let nrm = sample::unit_tangent(rng, &a);
        subs.push(TotallyGeodesicSub::hyperplane(&a, &nrm)?);
    }
    let max = fn_shifted_max(
        subs.iter()
            .enumerate()
            .map(|(i, s)| (fn_dist_sub(s.clone(), 0.0), 0.1 * i as f64))
            .collect(),
    )?;
    let zoo: Vec<(&'static str, Oracle, usize)> = vec![
        ("dist_point", fn_dist_point(z.clone()), n),
        ("sqdist_point", fn_sqdist_point(z.clone()), n),
        ("dist_sub", fn_dist_sub(subs[0].clone(), 0.3), n),
        ("shifted_max", max.clone(), n),
        (
            "sum",
            fn_sum(vec![(0.5, fn_sqdist_point(z.clone())), (1.0, max.clone())], 0.2),
            n,
        ),
        ("moreau", fn_moreau(max, MoreauParams::new(0.1)?)?, n.div_ceil(10)),
    ];
    let mut q = Ratios::default();
    let mut per = serde_json::Map::new();
    for (name, f, m) in &zoo {
        let meta = f.meta();
        let mut slack = f64::INFINITY;
        let mut mid = f64::INFINITY;
        let mut gmax: f64 = 0.0;
        for i in 0..*m {
            let x = sample::point_in_ball(rng, &o, 3.0);
            let y = sample::point_in_ball(rng, &o, 3.0);
            let sx = f.eval(&x)?;
            gmax = gmax.max(sx.g.norm());
            let fy = f.value(&y)?;
            slack = slack.min(fy - sx.value - sx.g.inner(&log(&x, &y)?));
            if i < 100 {
                let l = log(&x, &y)?;
                let fm = f.value(&exp(&x, &l.scale(0.5))?)?;
                mid = mid.min(0.5 * (sx.value + fy) - fm);
            }
        }
        if meta.gconvex {
            q.add("subgradient inequality", (-slack).max(0.0), 1e-8);
            q.add("midpoint convexity", (-mid).max(0.0), 1e-9);
        }
        if let Some(l) = meta.lipschitz {
            q.add("|g| <= M", (gmax - l).max(0.0), 1e-9);
        }
        per.insert(
            name.to_string(),
            json!({"samples": m, "subgradient_slack": slack, "midpoint_margin": mid, "max_grad": gmax}),
        );
    }
    Ok(q.finish(json!({"d": d, "oracles": per})))
}

fn u_lemmas(n: usize) -> Result<Outcome> {
    let mut ck = Checks::default();
    let mut worst = f64::INFINITY;
    let mut reports = Vec::new();
    for r in [1.0, 10.0] {
        let rep = u_r_lemmas(r, n)?;
        ck.check(rep.first_order >= 0.0, format!("R={r}: u + D u' >= 0"));
        ck.check(rep.second_order >= 0.0, format!("R={r}: 2u' + D u'' <= 0"));
        ck.check(rep.positivity > 0.0, format!("R={r}: positivity"));
        ck.check(rep.lipschitz >= -1e-9, format!("R={r}: Lipschitz"));
        ck.check(rep.closed_form_residual <= 1e-9, format!("R={r}: closed forms"));
        worst = worst
            .min(rep.first_order)
            .min(rep.second_order)
            .min(rep.positivity)
            .min(rep.lipschitz + 1e-9);
        reports.push(rep);
    }
    Ok(ck.finish(worst, 0.0, Relation::Ge, json!({"reports": reports})))
}

fn zeta_suite(n: usize) -> Result<Outcome> {
    let hi = 30f64.log10();
    let mut worst = f64::NEG_INFINITY;
    let mut below = f64::INFINITY;
    let ts = std::iter::once(0.0).chain(
        (0..n).map(|j| 10f64.powf(-8.0 + (hi + 8.0) * j as f64 / (n.max(2) - 1) as f64)),
    );
    for t in ts {
        let z = zeta(t)?;
        worst = worst.max(z - (1.0 + t));
        below = below.min(z - t.max(1.0));
    }
    let mut ck = Checks::default();
    ck.check(worst <= 0.0, "zeta_t <= 1 + t");
    ck.check(below >= -1e-12, "zeta_t >= max(1, t)");
    Ok(ck.finish(worst, 0.0, Relation::Le, json!({"points": n + 1, "lower_margin": below})))
}

/// Gap bound `f(x_ref) - f* <= 4 L r^2 / zeta_r` on finalized smooth
/// games and on squared distances.
fn gap_bound(rng: &mut ChaCha8Rng, d: usize, n: usize) -> Result<Outcome> {
    let mut worst: f64 = 0.0;
    let mut rows = Vec::new();
    let mut ck = Checks::default();
    for t in [2usize, 4, 8] {
        for r in [1.0, 2.0, 5.0] {
            let mut g = SmoothGame::new(t, r)?;
            let xref = g.game().xref().clone();
            let mut p = RandomPlayer {
                rng: ChaCha8Rng::seed_from_u64(rng.random()),
                center: xref.clone(),
                radius: r,
            };
            play(&mut p, |x| g.respond(x), t, None)?;
            let fin = g.finalize()?;
            let rep = gap_bound_check(fin.f.as_ref(), &xref, r, fin.smoothness, fin.fstar)?;
            ck.check(rep.pass, format!("smooth game T={t} r={r}"));
            worst = worst.max(rep.gap / rep.bound);
            rows.push(json!({"kind": "smooth-game", "T": t, "r": r, "gap": rep.gap, "bound": rep.bound}));
        }
    }
    let o = HPoint::origin(d);
    for i in 0..n.min(100) {
        let r = 0.1 + 9.9 * rng.random::<f64>();
        let z = exp(&o, &sample::unit_tangent(rng, &o).scale(r))?;
        let f = fn_sqdist_point(z);
        // the Hessian of dist^2/2 is at most zeta(dist) on the segment
        let rep = gap_bound_check(f.as_ref(), &o, r, zeta(r)?, 0.0)?;
        ck.check(rep.pass, format!("sqdist instance {i}"));
        worst = worst.max(rep.gap / rep.bound);
        rows.push(json!({"kind": "sqdist", "r": r, "gap": rep.gap, "bound": rep.bound}));
    }
    Ok(ck.finish(worst, 1.0, Relation::Le, json!({"instances": rows})))
}

/// Maxima of distances whose minimizer is known: two antipodal pairs
/// through `c` pin `f* = rho` at `c`, a few points inside `B(c, rho)` do
/// not change that.
fn polyak_upper(seed: u64, d: usize) -> Result<Outcome> {
    let mut worst: f64 = 0.0;
    let mut radius_violation: f64 = 0.0;
    let mut rows = Vec::new();
    let mut ck = Checks::default();
    for inst in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(inst));
        let c = sample::point_in_ball(&mut rng, &HPoint::origin(d), 1.0);
        let rho = 0.5 + 2.0 * rng.random::<f64>();
        let mut parts = Vec::new();
        for _ in 0..2 {
            let u = sample::unit_tangent(&mut rng, &c);
            parts.push((fn_dist_point(exp(&c, &u.scale(rho))?), 0.0));
            parts.push((fn_dist_point(exp(&c, &u.scale(-rho))?), 0.0));
        }
        for _ in 0..3 {
            let p = sample::point_in_ball(&mut rng, &c, rho);
            parts.push((fn_dist_point(p), 0.0));
        }
        let f = fn_shifted_max(parts)?;
        let s0 = 1.0 + 4.0 * rng.random::<f64>();
        let x0 = exp(&c, &sample::unit_tangent(&mut rng, &c).scale(s0))?;
        for t in [10usize, 100] {
            let tr = polyak_sgd(f.as_ref(), rho, x0.clone(), s0, t)?;
            let min_gap = tr.min_gap().unwrap_or(f64::NAN);
            let bound = polyak_guarantee(s0, 1.0, t)?;
            let ratio = min_gap * min_gap / bound;
            for (p, s) in tr.polyak.iter().zip(&tr.samples) {
                radius_violation = radius_violation.max(dist(&s.x, &c)? - p.s);
            }
            ck.check(ratio <= 1.0, format!("instance {inst} T={t}"));
            worst = worst.max(ratio);
            rows.push(json!({"instance": inst, "T": t, "rho": rho, "s0": s0, "min_gap": min_gap, "bound_sq": bound}));
        }
    }
    ck.check(radius_violation <= 1e-6, "dist(x_k, x*) <= s_k");
    Ok(ck.finish(
        worst,
        1.0,
        Relation::Le,
        json!({"radius_violation": radius_violation, "runs": rows}),
    ))
}

fn volume() -> Result<Outcome> {
    let pi = std::f64::consts::PI;
    let mut worst: f64 = 0.0;
    let mut rows = Vec::new();
    let mut ck = Checks::default();
    for d in 3..=8usize {
        let lo = 4.0 * (d as f64).ln();
        for i in 0..=10 {
            let r = lo + (20.0 - lo) * i as f64 / 10.0;
            let v = volume_ball(d, r)?;
            let (l, u) = volume_bounds(d, r);
            let ratio = (v / u).max(l / v);
            ck.check(v <= u * (1.0 + 1e-6), format!("upper d={d} r={r}"));
            ck.check(v >= l * (1.0 - 1e-6), format!("lower d={d} r={r}"));
            worst = worst.max(ratio);
            rows.push(json!({"d": d, "r": r, "volume": v, "lower": l, "upper": u}));
        }
    }
    // quadrature against the closed form in H^3
    let mut quad: f64 = 0.0;
    for r in [0.5f64, 4.0, 12.0, 20.0] {
        let exact = pi * ((2.0 * r).sinh() - 2.0 * r);
        quad = quad.max((volume_ball(3, r)? - exact).abs() / exact);
    }
    ck.check(quad <= 1e-8, "quadrature in H^3");
    Ok(ck.finish(
        worst,
        1.0 + 1e-6,
        Relation::Le,
        json!({"quadrature_error_h3": quad, "grid": rows}),
    ))
}
