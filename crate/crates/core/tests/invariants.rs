use proptest::prelude::*;

use hypergconv::harness::{ExperimentConfig, Kind};
use hypergconv::hyperboloid::{dist, exp, log, mink_inner, ptransport, zeta};
use hypergconv::solvers::{polyak_sgd, radius_certificate};
use hypergconv::zoo::{fn_dist_point, fn_sqdist_point};
use hypergconv::{HPoint, HTangent};

fn point(d: usize) -> impl Strategy<Value = HPoint> {
    prop::collection::vec(-3.0..3.0f64, d).prop_map(|s| HPoint::from_spatial(&s))
}

/// Tangent at `x` from an ambient vector, rescaled to norm `len`.
fn tangent(x: &HPoint, raw: Vec<f64>, len: f64) -> Option<HTangent> {
    let v = HTangent::project(x, raw);
    let n = v.norm();
    (n > 1e-3).then(|| v.scale(len / n))
}

fn dim_and_two_points() -> impl Strategy<Value = (HPoint, HPoint)> {
    (2usize..7).prop_flat_map(|d| (point(d), point(d)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn log_inverts_exp(
        (x, raw) in (2usize..7).prop_flat_map(|d| (point(d), prop::collection::vec(-1.0..1.0f64, d + 1))),
        len in 0.0..8.0f64,
    ) {
        let Some(v) = tangent(&x, raw, len) else { return Ok(()) };
        let y = exp(&x, &v).unwrap();
        prop_assert!((dist(&x, &y).unwrap() - len).abs() <= 1e-9 * (1.0 + len));
        let back = log(&x, &y).unwrap();
        let err = back.add_scaled(-1.0, &v).norm();
        prop_assert!(err <= 1e-7 * (1.0 + len), "err {err} at len {len}");
    }

    #[test]
    fn dist_is_a_metric(
        (x, y, z) in (2usize..7).prop_flat_map(|d| (point(d), point(d), point(d))),
    ) {
        let xy = dist(&x, &y).unwrap();
        let yx = dist(&y, &x).unwrap();
        let xz = dist(&x, &z).unwrap();
        let zy = dist(&z, &y).unwrap();
        prop_assert!(xy >= 0.0);
        prop_assert!((xy - yx).abs() <= 1e-12 * (1.0 + xy));
        prop_assert!(xy <= xz + zy + 1e-9 * (1.0 + xy));
        prop_assert!(dist(&x, &x).unwrap() <= 1e-7);
    }

    #[test]
    fn transport_is_an_isometry(
        ((x, y), (a, b)) in (2usize..7).prop_flat_map(|d| (
            (point(d), point(d)),
            (prop::collection::vec(-1.0..1.0f64, d + 1), prop::collection::vec(-1.0..1.0f64, d + 1)),
        )),
    ) {
        let u = HTangent::project(&x, a);
        let w = HTangent::project(&x, b);
        let pu = ptransport(&x, &y, &u).unwrap();
        let pw = ptransport(&x, &y, &w).unwrap();
        let scale = 1.0 + u.norm() * w.norm();
        prop_assert!((pu.inner(&pw) - u.inner(&w)).abs() <= 1e-9 * scale);
        let tangency = mink_inner(y.coords(), pu.vec()).unwrap();
        let size: f64 = y.coords().iter().map(|c| c * c).sum::<f64>().sqrt()
            * pu.vec().iter().map(|c| c * c).sum::<f64>().sqrt();
        prop_assert!(tangency.abs() <= 1e-9 * (1.0 + size));
        // the geodesic direction goes to minus itself
        let l = log(&x, &y).unwrap();
        let back = ptransport(&x, &y, &l).unwrap();
        let want = log(&y, &x).unwrap().scale(-1.0);
        prop_assert!(back.add_scaled(-1.0, &want).norm() <= 1e-7 * (1.0 + l.norm()));
    }

    #[test]
    fn zeta_sandwich(t in 0.0..30.0f64, dt in 0.0..5.0f64) {
        let z = zeta(t).unwrap();
        prop_assert!(z >= 1.0 && z <= 1.0 + t + 1e-12);
        prop_assert!(zeta(t + dt).unwrap() >= z - 1e-12);
    }

    #[test]
    fn distance_oracles_satisfy_the_subgradient_inequality(
        (z, x, y) in (2usize..7).prop_flat_map(|d| (point(d), point(d), point(d))),
    ) {
        for f in [fn_dist_point(z.clone()), fn_sqdist_point(z.clone())] {
            let sx = f.eval(&x).unwrap();
            let fy = f.eval(&y).unwrap().value;
            let lin = sx.value + sx.g.inner(&log(&x, &y).unwrap());
            prop_assert!(fy >= lin - 1e-8 * (1.0 + fy.abs()), "{f:?}: {fy} < {lin}");
        }
    }

    #[test]
    fn polyak_ball_always_holds_the_minimizer((z, x0) in dim_and_two_points(), t in 1usize..40) {
        let f = fn_dist_point(z.clone());
        let s0 = dist(&x0, &z).unwrap();
        let trace = polyak_sgd(f.as_ref(), 0.0, x0, s0, t).unwrap();
        let worst = radius_certificate(&trace, &z).unwrap();
        prop_assert!(worst <= 1e-7 * (1.0 + s0), "dist - s = {worst}");
        // gaps never grow past the starting radius
        prop_assert!(trace.gaps.iter().all(|&g| g <= s0 + 1e-9 * (1.0 + s0)));
    }

    #[test]
    fn grid_size_is_the_product_of_axes(
        t in prop::collection::vec(2i64..8, 0..4),
        r in prop::collection::vec(0.1..5.0f64, 0..4),
        players in prop::sample::subsequence(vec!["polyak", "rgd", "random"], 1..=3),
    ) {
        let text = serde_json::json!({"T": t, "r": r, "player": players}).to_string();
        let cfg = ExperimentConfig::parse(Kind::LbNonsmooth, &text, None).unwrap();
        let cells = cfg.cells();
        prop_assert_eq!(cells.len(), t.len() * r.len() * players.len());
        // last axis fastest
        if cells.len() >= 2 && players.len() >= 2 {
            prop_assert_eq!(cells[0].int("T"), cells[1].int("T"));
            prop_assert_ne!(cells[0].str("player"), cells[1].str("player"));
        }
    }
}
