//! Parameter tables and per-cell runners.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use super::{suites, Cell, Checks, Kind, Outcome, Param, ParamType, Relation};
use crate::cutting_planes::{make_player, packing_build, play_on, CutConfig};
use crate::error::{Error, Result};
use crate::hyperboloid::{dist, exp, log, ptransport, zeta, HPoint};
use crate::interpolation::{
    check_necessary, construct_sufficient, minimal_function, obstruction_certificate, InterpData,
};
use crate::resisting::{a2_check, worst_oracle, NonsmoothGame, SmoothGame, WorstInstance};
use crate::sample;
use crate::solvers::{play, polyak_sgd, DescentPlayer, FixedStep, Player, PolyakStep, RandomPlayer};
use crate::tol;
use crate::zoo::{fn_dist_sub, fn_sqdist_point, fn_sum, FnOracle, OracleSample};
use crate::TotallyGeodesicSub;

const SEED: Param = Param {
    name: "seed",
    ty: ParamType::Int { min: 0, max: i64::MAX },
    default: Some("0"),
};

const RADIUS: ParamType = ParamType::Float {
    min: 0.0,
    min_open: true,
    max: tol::R_MAX,
};

const PLAYERS: &[&str] = &["polyak", "rgd", "random"];

const LB_NONSMOOTH: &[Param] = &[
    Param {
        name: "T",
        ty: ParamType::Int { min: 2, max: 4096 },
        default: None,
    },
    Param {
        name: "r",
        ty: RADIUS,
        default: None,
    },
    Param {
        name: "player",
        ty: ParamType::Choice(PLAYERS),
        default: Some(r#"["polyak", "rgd", "random"]"#),
    },
    SEED,
];

const LB_SMOOTH: &[Param] = &[
    Param {
        name: "T",
        ty: ParamType::Int { min: 2, max: 4096 },
        default: None,
    },
    Param {
        name: "r",
        ty: RADIUS,
        default: None,
    },
    Param {
        name: "player",
        ty: ParamType::Choice(PLAYERS),
        default: Some(r#"["polyak", "rgd", "random"]"#),
    },
    Param {
        name: "samples",
        ty: ParamType::Int { min: 1, max: 1_000_000 },
        default: Some("100"),
    },
    SEED,
];

const POLYAK_WORST: &[Param] = &[
    Param {
        name: "eps",
        ty: ParamType::Float {
            min: 0.0,
            min_open: true,
            max: 0.1767766952966369,
        },
        default: None,
    },
    Param {
        name: "r",
        ty: RADIUS,
        default: None,
    },
];

const CUT_GAME: &[Param] = &[
    Param {
        name: "d",
        ty: ParamType::Int { min: 3, max: 64 },
        default: Some("3"),
    },
    Param {
        name: "r",
        ty: RADIUS,
        default: None,
    },
    Param {
        name: "eps",
        ty: ParamType::OptFloat { min: 0.0, max: 1e6 },
        default: Some("null"),
    },
    Param {
        name: "player",
        ty: ParamType::Choice(&["ref", "uniform", "center"]),
        default: Some(r#""center""#),
    },
    Param {
        name: "games",
        ty: ParamType::Int { min: 1, max: 100_000 },
        default: Some("1"),
    },
    Param {
        name: "normals",
        ty: ParamType::Int { min: 1, max: 1_000_000 },
        default: Some("512"),
    },
    Param {
        name: "max_rounds",
        ty: ParamType::Int { min: 1, max: 1_000_000 },
        default: Some("64"),
    },
    SEED,
];

const INTERP: &[Param] = &[
    Param {
        name: "mode",
        ty: ParamType::Choice(&["obstruction", "sufficient", "minimal"]),
        default: None,
    },
    Param {
        name: "theta",
        ty: ParamType::Float {
            min: 0.0,
            min_open: true,
            max: std::f64::consts::FRAC_PI_2,
        },
        default: Some("0.8"),
    },
    Param {
        name: "n",
        ty: ParamType::Int { min: 1, max: 100_000 },
        default: Some("20"),
    },
    Param {
        name: "d",
        ty: ParamType::Int { min: 2, max: 64 },
        default: Some("3"),
    },
    SEED,
];

const ZOO: &[Param] = &[
    Param {
        name: "suite",
        ty: ParamType::Choice(suites::SUITES),
        default: Some(
            r#"["manifold", "oracles", "u-lemmas", "zeta", "gap-bound", "polyak-upper", "volume"]"#,
        ),
    },
    Param {
        name: "d",
        ty: ParamType::Int { min: 2, max: 64 },
        default: Some("5"),
    },
    Param {
        name: "samples",
        ty: ParamType::Int { min: 1, max: 10_000_000 },
        default: Some("1000"),
    },
    SEED,
];

pub(super) fn params(kind: Kind) -> &'static [Param] {
    match kind {
        Kind::LbNonsmooth => LB_NONSMOOTH,
        Kind::LbSmooth => LB_SMOOTH,
        Kind::PolyakWorst => POLYAK_WORST,
        Kind::CutGame => CUT_GAME,
        Kind::Interp => INTERP,
        Kind::ZooValidate => ZOO,
    }
}

/// Cross-parameter preconditions, checked before anything runs.
pub(super) fn precheck(kind: Kind, c: &Cell) -> Result<()> {
    match kind {
        Kind::LbNonsmooth | Kind::LbSmooth => {
            NonsmoothGame::new(c.usize("T"), c.float("r"))?;
        }
        Kind::PolyakWorst => {
            let (eps, r) = (c.float("eps"), c.float("r"));
            let t = (zeta(r)? / (32.0 * eps * eps)).floor();
            if t < 2.0 {
                return Err(Error::Config(format!(
                    "polyak-worst eps={eps} r={r}: floor(zeta_r / (32 eps^2)) = {t} < 2"
                )));
            }
        }
        Kind::CutGame => cut_config(c, c.seed()).validate()?,
        Kind::Interp | Kind::ZooValidate => {}
    }
    Ok(())
}

pub(super) fn run(kind: Kind, c: &Cell) -> Result<Outcome> {
    match kind {
        Kind::LbNonsmooth => lb_nonsmooth(c),
        Kind::LbSmooth => lb_smooth(c),
        Kind::PolyakWorst => polyak_worst(c),
        Kind::CutGame => cut_game(c),
        Kind::Interp => match c.str("mode") {
            "obstruction" => interp_obstruction(c),
            "sufficient" => interp_sufficient(c),
            _ => interp_minimal(c),
        },
        Kind::ZooValidate => suites::run(c),
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// The query policy named by `player`, started at `xref`.
fn lb_player(c: &Cell, xref: &HPoint, a: f64) -> Result<Box<dyn Player>> {
    let (t, r) = (c.usize("T"), c.float("r"));
    Ok(match c.str("player") {
        "polyak" => Box::new(DescentPlayer::new(xref.clone(), PolyakStep::new(-a, r)?)),
        "rgd" => Box::new(DescentPlayer::new(
            xref.clone(),
            FixedStep(r / (t as f64).sqrt()),
        )),
        _ => Box::new(RandomPlayer {
            rng: rng(c.seed()),
            center: xref.clone(),
            radius: r,
        }),
    })
}

fn lb_nonsmooth(c: &Cell) -> Result<Outcome> {
    let (t, r) = (c.usize("T"), c.float("r"));
    let mut game = NonsmoothGame::new(t, r)?;
    let a = game.a;
    let xref = game.xref().clone();
    let mut player = lb_player(c, &xref, a)?;
    let trace = play(player.as_mut(), |x| game.respond(x), t, Some(-a))?;
    let fin = game.finalize()?;
    let cert = &fin.certificate;
    let bound = game.gap_bound()?;

    let mut ck = Checks::default();
    ck.check(trace.samples.len() == t, "query count");
    ck.check((cert.dist_ref_xstar - r).abs() <= 1e-9, "dist(x_ref, x*) = r");
    ck.check((fin.fstar + a).abs() <= 1e-8, "f* = -a");
    ck.check((cert.f_at_xstar - fin.fstar).abs() <= 1e-8, "f(x*) = f*");
    ck.check(cert.max_sub_dist <= 1e-8, "x* on chosen S");
    ck.check(cert.law_of_cosines_residual <= 1e-9, "law of cosines");
    let mut gaps = Vec::with_capacity(t);
    let mut replay: f64 = 0.0;
    for s in &trace.samples {
        let v = fin.f.value(&s.x)?;
        replay = replay.max((v - s.value).abs());
        gaps.push(v - fin.fstar);
    }
    ck.check(replay <= 1e-9, "replay");
    let h_min = game
        .records()
        .iter()
        .map(|q| q.margins.h_chosen)
        .fold(f64::INFINITY, f64::min);
    ck.check(h_min >= -1e-9, "h nonnegative");
    let measured = gaps.iter().copied().fold(f64::INFINITY, f64::min);
    ck.check(measured >= bound - 1e-9, "gap >= bound");
    Ok(ck.finish(
        measured,
        bound,
        Relation::Ge,
        json!({
            "a": a,
            "delta": game.delta,
            "fstar": fin.fstar,
            "xstar": fin.xstar.coords(),
            "gaps": gaps,
            "replay_error": replay,
            "certificate": cert,
            "queries": game.records(),
        }),
    ))
}

fn lb_smooth(c: &Cell) -> Result<Outcome> {
    let (t, r, n) = (c.usize("T"), c.float("r"), c.usize("samples"));
    let mut game = SmoothGame::new(t, r)?;
    let a = game.game().a;
    let delta = game.game().delta;
    let lam = game.lambda;
    let xref = game.game().xref().clone();
    let mut player = lb_player(c, &xref, a)?;
    let trace = play(player.as_mut(), |x| game.respond(x), t, Some(-a))?;
    let fin = game.finalize()?;
    let bound = game.gap_bound()?;
    let big_l = game.smoothness();
    let mut rng = rng(c.seed() ^ 0x5eed);

    let mut ck = Checks::default();
    ck.check(trace.samples.len() == t, "query count");
    ck.check((fin.fstar + a).abs() <= 1e-8, "f* = -a");
    let fx = fin.f.value(&fin.xstar)?;
    ck.check((fx - fin.fstar).abs() <= 1e-8, "f(x*) = f*");

    // f_k - lambda <= f_{lambda,k} <= f_k, half the samples near x_k
    let mut sandwich_low = f64::INFINITY;
    let mut sandwich_high = f64::INFINITY;
    for (k, s) in trace.samples.iter().enumerate() {
        let env = game.envelope(k).expect("one envelope per answered query");
        for j in 0..n {
            let y = if j % 2 == 0 {
                sample::point_in_ball(&mut rng, &s.x, delta)
            } else {
                sample::point_in_ball(&mut rng, &xref, r)
            };
            let smooth = env.value(&y)?;
            let plain = env.inner().value(&y)?;
            sandwich_low = sandwich_low.min(smooth - (plain - lam));
            sandwich_high = sandwich_high.min(plain - smooth);
        }
    }
    ck.check(sandwich_low >= -1e-9, "f - lambda <= f_lambda");
    ck.check(sandwich_high >= -1e-9, "f_lambda <= f");

    let mut gaps = Vec::with_capacity(t);
    let mut replay: f64 = 0.0;
    for s in &trace.samples {
        let v = fin.f.value(&s.x)?;
        replay = replay.max((v - s.value).abs());
        gaps.push(v - fin.fstar);
    }
    ck.check(replay <= 1e-8, "replay");

    // chord slopes of the gradient at scale lambda around each query
    let mut lip: f64 = 0.0;
    for s in &trace.samples {
        for _ in 0..n.div_ceil(10) {
            let p = sample::point_in_ball(&mut rng, &s.x, delta);
            let u = sample::unit_tangent(&mut rng, &p);
            let q = exp(&p, &u.scale(lam))?;
            let gp = fin.f.eval(&p)?.g;
            let gq = fin.f.eval(&q)?.g;
            let back = ptransport(&q, &p, &gq)?;
            let slope = back.add_scaled(-1.0, &gp).norm() / dist(&p, &q)?;
            lip = lip.max(slope);
        }
    }
    ck.check(lip <= big_l + 1e-3, "chord Lipschitz <= L");

    let measured = gaps.iter().copied().fold(f64::INFINITY, f64::min);
    ck.check(measured >= bound - 1e-6, "gap >= bound");
    Ok(ck.finish(
        measured,
        bound,
        Relation::Ge,
        json!({
            "a": a,
            "lambda": lam,
            "smoothness": big_l,
            "fstar": fin.fstar,
            "gaps": gaps,
            "twin_values": game.twin_values,
            "replay_error": replay,
            "sandwich_low_margin": sandwich_low,
            "sandwich_high_margin": sandwich_high,
            "chord_lipschitz": lip,
            "queries": game.game().records(),
        }),
    ))
}

fn polyak_worst(c: &Cell) -> Result<Outcome> {
    let (eps, r) = (c.float("eps"), c.float("r"));
    let inst = Arc::new(WorstInstance::build(eps, r, 1)?);
    let t = inst.t();
    let oracle = worst_oracle(inst.clone())?;
    let trace = polyak_sgd(&oracle, 0.0, inst.y[0].clone(), r, t)?;

    let mut ck = Checks::default();
    ck.check(
        t == (zeta(r)? / (32.0 * eps * eps)).floor() as usize,
        "T = floor(zeta_r / (32 eps^2))",
    );
    ck.check(trace.samples.len() == t, "query count");
    ck.check(trace.polyak.len() == trace.samples.len(), "one Polyak record per query");
    let mut steps = Vec::new();
    let mut worst = [0.0f64; 4];
    for (k, s) in trace.samples.iter().enumerate() {
        let Some(p) = trace.polyak.get(k) else { break };
        let off = dist(&s.x, &inst.y[k])?;
        let ds = (p.s - inst.radii[k]).abs();
        let dg = (trace.gaps[k] - inst.radii[k]).abs();
        let dl = inst
            .deltas
            .get(k)
            .map_or(0.0, |delta| (p.step_len - delta).abs());
        for (w, v) in worst.iter_mut().zip([off, ds, dl, dg]) {
            *w = w.max(v);
        }
        steps.push(json!({
            "k": k,
            "dist_to_ladder": off,
            "s": p.s,
            "r_k": inst.radii[k],
            "step_len": p.step_len,
            "delta_k": inst.deltas.get(k),
            "gap": trace.gaps[k],
            "cosh_residual": p.cosh_residual,
        }));
    }
    ck.check(worst[0] <= 1e-6, "dist(x_k, y_k)");
    ck.check(worst[1] <= 1e-8, "s_k = r_k");
    ck.check(worst[2] <= 1e-8, "step = Delta_k");
    ck.check(worst[3] <= 1e-8, "gap = r_k");
    let a2 = a2_check(&inst, &trace)?;
    ck.check(a2.pass, "span and half-space membership");
    let measured = trace.min_gap().unwrap_or(f64::NAN);
    let bound = r / 2.0;
    ck.check(measured >= bound, "gap >= r/2");
    Ok(ck.finish(
        measured,
        bound,
        Relation::Ge,
        json!({
            "T": t,
            "theta": inst.theta,
            "M": inst.m,
            "max_dist_to_ladder": worst[0],
            "max_s_error": worst[1],
            "max_step_error": worst[2],
            "max_gap_error": worst[3],
            "ladder": inst.invariants,
            "steps": steps,
            "membership": a2,
        }),
    ))
}

fn cut_config(c: &Cell, seed: u64) -> CutConfig {
    CutConfig {
        d: c.usize("d"),
        r: c.float("r"),
        eps: c.opt_float("eps"),
        n_normal_samples: c.usize("normals"),
        seed,
        max_rounds: c.usize("max_rounds"),
    }
}

/// One packing per cell; game `g` reseeds the adversary and the player
/// with `seed + 1 + g`.
fn cut_game(c: &Cell) -> Result<Outcome> {
    let base = cut_config(c, c.seed());
    let packing = packing_build(&base)?;
    let games = c.usize("games");
    let mut rounds = 0usize;
    let mut quarter = 0usize;
    let mut inconsistent = 0usize;
    let mut replay_failures = Vec::new();
    let mut transcripts = Vec::with_capacity(games);
    for g in 0..games {
        let cfg = cut_config(c, c.seed().wrapping_add(1 + g as u64));
        let mut player = make_player(c.str("player"), &cfg)?;
        let tr = play_on(&cfg, packing.clone(), player.as_mut())?;
        rounds += tr.rounds.len();
        quarter += tr.rounds.iter().filter(|r| r.quarter_ok).count();
        inconsistent += tr.rounds.iter().filter(|r| !r.consistent).count();
        if !tr.replay_ok {
            replay_failures.push(g);
        }
        transcripts.push(tr);
    }
    let measured = if rounds == 0 {
        1.0
    } else {
        quarter as f64 / rounds as f64
    };
    let bound = 0.9;
    let mut ck = Checks::default();
    ck.check(measured >= bound, "quarter law in 90% of rounds");
    ck.check(inconsistent == 0, format!("{inconsistent} inconsistent rounds"));
    ck.check(
        replay_failures.is_empty(),
        format!("replay failed in games {replay_failures:?}"),
    );
    Ok(ck.finish(
        measured,
        bound,
        Relation::Ge,
        json!({
            "centers": packing.centers.len(),
            "theoretical_floor": packing.theoretical_floor,
            "samples_drawn": packing.samples_drawn,
            "rounds": rounds,
            "quarter_ok_rounds": quarter,
            "inconsistent_rounds": inconsistent,
            "games": transcripts,
        }),
    ))
}

fn interp_obstruction(c: &Cell) -> Result<Outcome> {
    let theta = c.float("theta");
    let o = obstruction_certificate(theta)?;
    let nec = check_necessary(&o.data)?;
    // altitude of the isosceles triangle, from the right-triangle relation
    let h = (theta.cos() * 1f64.tanh()).atanh();
    let mut ck = Checks::default();
    ck.check(nec.pass, "necessary conditions pass");
    ck.check(o.lower > o.upper, "lower > upper");
    ck.check((o.h - h).abs() <= 1e-12, "altitude");
    ck.check((o.lower - (1.0 - h / theta.cos())).abs() <= 1e-12, "forced value");
    ck.check(o.valid, "certificate flag");
    Ok(ck.finish(
        o.lower - o.upper,
        0.0,
        Relation::Ge,
        json!({
            "theta": theta,
            "h": o.h,
            "lower": o.lower,
            "upper": o.upper,
            "p": o.p.coords(),
            "necessary": {"pass": nec.pass, "worst": nec.worst, "slack": nec.slack},
            "data": o.data,
        }),
    ))
}

/// Data read off `c/2 dist(z, .)^2 + w dist(., S)` near `z`, where every
/// gradient stays under `c/2`.
fn interp_sufficient(c: &Cell) -> Result<Outcome> {
    let (n, d) = (c.usize("n"), c.usize("d"));
    let mut rng = rng(c.seed());
    let z = sample::point_in_ball(&mut rng, &HPoint::origin(d), 1.0);
    let anchor = sample::point_in_ball(&mut rng, &z, 1.0);
    let normal = sample::unit_tangent(&mut rng, &anchor);
    let s = TotallyGeodesicSub::hyperplane(&anchor, &normal)?;
    let (cc, w, rad) = (2.0, 0.2, 0.35);
    let f = fn_sum(
        vec![(cc, fn_sqdist_point(z.clone())), (w, fn_dist_sub(s, 0.0))],
        0.0,
    );
    let items: Vec<OracleSample> = (0..n)
        .map(|_| f.eval(&sample::point_in_ball(&mut rng, &z, rad)))
        .collect::<Result<_>>()?;
    let data = InterpData::new(cc, items)?;
    let nec = check_necessary(&data)?;
    let it = construct_sufficient(&data, c.seed())?;
    let v = &it.verification;
    // mu/2-strong convexity along random chords
    let m = data.mu / 2.0;
    let mut midpoint: f64 = f64::INFINITY;
    for _ in 0..100 {
        let p = sample::point_in_ball(&mut rng, &z, 2.0);
        let q = sample::point_in_ball(&mut rng, &z, 2.0);
        let u = log(&p, &q)?;
        let mid = exp(&p, &u.scale(0.5))?;
        let dd = u.norm();
        let rhs = 0.5 * (it.f.value(&p)? + it.f.value(&q)?) - m / 8.0 * dd * dd;
        midpoint = midpoint.min(rhs - it.f.value(&mid)?);
    }
    let mut ck = Checks::default();
    ck.check(nec.pass, "necessary conditions pass");
    ck.check(v.value_error <= 1e-9, "values reproduced");
    ck.check(v.subgradient_slack >= -1e-9, "subgradient inequality");
    ck.check(v.pass, "verification");
    ck.check(midpoint >= -1e-9, "strong convexity midpoint");
    Ok(ck.finish(
        v.value_error,
        1e-9,
        Relation::Le,
        json!({
            "verification": v,
            "midpoint_margin": midpoint,
            "necessary_slack": nec.slack,
            "data": data,
        }),
    ))
}

fn interp_minimal(c: &Cell) -> Result<Outcome> {
    let (n, d) = (c.usize("n"), c.usize("d"));
    let mut rng = rng(c.seed());
    let mut worst: f64 = 0.0;
    let mut at_y: f64 = 0.0;
    let mut slack: f64 = f64::INFINITY;
    let mut midpoint: f64 = f64::INFINITY;
    for _ in 0..n {
        let y = sample::point_in_ball(&mut rng, &HPoint::origin(d), 2.0);
        let x = sample::point_in_ball(&mut rng, &y, 3.0);
        if dist(&x, &y)? < 1e-6 {
            continue;
        }
        let g = sample::unit_tangent(&mut rng, &y).scale(3.0 * rng.random::<f64>());
        let fv = rng.random::<f64>() - 0.5;
        let m = minimal_function(fv, &y, &g, &x)?;
        let target = fv + g.inner(&log(&y, &x)?);
        worst = worst
            .max((m.value_at_x - target).abs())
            .max((m.f.value(&x)? - target).abs());
        at_y = at_y.max((m.f.value(&y)? - fv).abs());
        let p = sample::point_in_ball(&mut rng, &y, 3.0);
        slack = slack.min(m.f.value(&p)? - fv - g.inner(&log(&y, &p)?));
        let q = sample::point_in_ball(&mut rng, &y, 3.0);
        let u = log(&p, &q)?;
        let mid = exp(&p, &u.scale(0.5))?;
        midpoint = midpoint.min(0.5 * (m.f.value(&p)? + m.f.value(&q)?) - m.f.value(&mid)?);
    }
    let mut ck = Checks::default();
    ck.check(worst <= 1e-8, "value at x");
    ck.check(at_y <= 1e-9, "value at y");
    ck.check(slack >= -1e-9, "subgradient at y");
    ck.check(midpoint >= -1e-9, "midpoint convexity");
    Ok(ck.finish(
        worst,
        1e-8,
        Relation::Le,
        json!({
            "triples": n,
            "max_value_error": worst,
            "max_error_at_y": at_y,
            "subgradient_slack": slack,
            "midpoint_margin": midpoint,
        }),
    ))
}

#[cfg(test)]
mod tests {
    use super::super::{run_cell, ExperimentConfig};
    use super::*;

    fn one(kind: Kind, text: &str) -> Outcome {
        let cfg = ExperimentConfig::parse(kind, text, None).unwrap();
        let cells = cfg.cells();
        assert_eq!(cells.len(), 1);
        run_cell(kind, &cells[0])
    }

    #[test]
    fn nonsmooth_players() {
        for p in PLAYERS {
            let o = one(Kind::LbNonsmooth, &format!(r#"{{"T": 4, "r": 2, "player": "{p}"}}"#));
            assert!(o.pass, "{p}: {}", o.note);
            assert!(o.measured >= o.bound - 1e-9);
        }
    }

    #[test]
    fn polyak_worst_small() {
        let o = one(Kind::PolyakWorst, r#"{"eps": 0.17, "r": 10}"#);
        assert!(o.pass, "{}", o.note);
        assert_eq!(o.transcript["T"], 10);
    }

    #[test]
    fn polyak_worst_precheck() {
        let e = ExperimentConfig::parse(Kind::PolyakWorst, r#"{"eps": 0.17, "r": 0.5}"#, None);
        assert!(matches!(e, Err(Error::Config(_))));
    }

    #[test]
    fn interp_modes() {
        for mode in ["obstruction", "sufficient", "minimal"] {
            let o = one(Kind::Interp, &format!(r#"{{"mode": "{mode}", "n": 10}}"#));
            assert!(o.pass, "{mode}: {}", o.note);
        }
    }

    #[test]
    fn cut_game_small() {
        let o = one(
            Kind::CutGame,
            r#"{"r": 3, "eps": 0.2, "games": 2, "normals": 64, "max_rounds": 8}"#,
        );
        assert!(o.note.is_empty() || o.note.starts_with("quarter"), "{}", o.note);
        assert_eq!(o.transcript["games"].as_array().unwrap().len(), 2);
    }
}
