//! One line per acceptance criterion, plus the frozen open-map optimizer
//! regression. Runs without the libtest harness so every line prints even
//! when an earlier check fails.

use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use baseplace::baselines::{astar, dijkstra, octile, rrt_star_plan, PathPlanQuery, RrtConfig};
use baseplace::geom::Vec2;
use baseplace::gridmap::{compute_free_set, Cell, CellState, OccupancyGrid};
use baseplace::optimizer::optimize;
use baseplace::oracle::{GroundTruth, ScriptedOracle, ScriptedOracleConfig};
use baseplace::projection::AffordanceContext;
use baseplace::harness::{ablate_alpha, load_suite, run_suite, run_trial, EvalReport, LoadedTask, Method, Settings, Trial};
use baseplace::keypoints::{prune, KeypointProposal, PRUNE_DISTANCE};
use baseplace::optimizer::{alpha_schedule, draw_candidates, finalize, window_mass, AlphaMode, PlannerConfig};
use baseplace::projection::{in_fan, FAN_HALF_ANGLE};
use baseplace::scene::camera::dist3;
use baseplace::trace::PlanTrace;
use baseplace::{rng, Point, Pose};
use rand::RngExt;
use statrs::distribution::{ChiSquared, ContinuousCDF};

const BASE_SEED: u64 = 7;
const TRIALS: usize = 20;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let t0 = Instant::now();
    let v = f();
    (v, t0.elapsed())
}

/// Composite Simpson rule over the Gaussian density.
fn gaussian_mass(a: f64, b: f64, mu: f64, s: f64) -> f64 {
    let n = 10_000;
    let h = (b - a) / n as f64;
    let f = |x: f64| (-(x - mu).powi(2) / (2.0 * s * s)).exp() / (s * (2.0 * std::f64::consts::PI).sqrt());
    let mut acc = f(a) + f(b);
    for k in 1..n {
        acc += f(a + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    acc * h / 3.0
}

fn c1_window_mass() -> Verdict {
    let ((a, b, ra, rb), dt) = timed(|| {
        (window_mass(0.7, 0.7, 0.1, 0.05), window_mass(0.8, 0.7, 0.1, 0.05), gaussian_mass(0.65, 0.75, 0.7, 0.1), gaussian_mass(0.75, 0.85, 0.7, 0.1))
    });
    let pass = (a - ra).abs() <= 1e-4 && (b - rb).abs() <= 1e-4 && (a - 0.382925).abs() <= 1e-4 && (b - 0.241731).abs() <= 1e-4 && dt < Duration::from_secs(1);
    verdict(pass, format!("Φ(0.7)={a:.6} (quadrature {ra:.6}), Φ(0.8)={b:.6} (quadrature {rb:.6}), {dt:.2?}"))
}

fn c2_schedule() -> Verdict {
    let a = |t: f64| alpha_schedule(t, 4.0, 0.6, 2.0);
    let mid = a(2.0);
    let grid: Vec<f64> = (0..=4000).map(|k| a(k as f64 / 1000.0)).collect();
    let monotone = grid.windows(2).all(|w| w[1] >= w[0]);
    let (a0, at) = (a(0.0), a(4.0));
    let pass = mid == 0.3 && monotone && (a0 - 0.010792).abs() <= 1e-6 && (at - 0.589208).abs() <= 1e-6;
    verdict(pass, format!("α_2={mid}, α_0={a0:.6}, α_4={at:.6}, monotone={monotone}"))
}

fn c3_sampling() -> Verdict {
    let ((pass, detail), dt) = timed(|| {
        let map = OccupancyGrid::<f64>::new(200, 200, 0.05, Vec2::zero());
        let free = compute_free_set(&map, 0.4);
        let g = Point::new(5.0, 5.0);
        let config = PlannerConfig::<f64> { n: 100_000, ..Default::default() };
        let pts = draw_candidates(g, &free, &config, &mut rng::stream(BASE_SEED, "acceptance-sampling")).expect("open map");
        let bad = pts.iter().filter(|p| p.dist(g) > config.r_max || !free.contains(**p)).count();
        // radial law of an isotropic unit Gaussian cut at r_max
        let bins = 24;
        let cdf = |r: f64| (1.0 - (-r * r / 2.0).exp()) / (1.0 - (-config.r_max * config.r_max / 2.0).exp());
        let mut counts = vec![0usize; bins];
        for p in &pts {
            counts[((p.dist(g) / config.r_max * bins as f64) as usize).min(bins - 1)] += 1;
        }
        let n = pts.len() as f64;
        let chi2: f64 = (0..bins)
            .map(|k| {
                let e = n * (cdf((k + 1) as f64 * config.r_max / bins as f64) - cdf(k as f64 * config.r_max / bins as f64));
                (counts[k] as f64 - e).powi(2) / e
            })
            .sum();
        let p = 1.0 - ChiSquared::new((bins - 1) as f64).expect("dof").cdf(chi2);
        (bad == 0 && p > 0.01 && pts.len() == 100_000, format!("{} draws, {bad} violations, χ²={chi2:.2} p={p:.3}", pts.len()))
    });
    verdict(pass && dt < Duration::from_secs(10), format!("{detail}, {dt:.2?}"))
}

fn c4_normalization(traces: &[&PlanTrace]) -> Verdict {
    let mut iterations = 0;
    let mut worst: f64 = 0.0;
    for t in traces {
        for it in &t.iterations {
            worst = worst.max((it.p.iter().sum::<f64>() - 1.0).abs());
            iterations += 1;
        }
    }
    verdict(iterations > 0 && worst <= 1e-9, format!("{iterations} iterations over {} traces, max |Σp−1|={worst:.1e}", traces.len()))
}

fn random_grid(seed: u64, w: usize, h: usize, density: f64) -> OccupancyGrid<f64> {
    let mut r = rng::stream(seed, "acceptance-grid");
    let mut g = OccupancyGrid::new(w, h, 1.0, Vec2::zero());
    for c in g.cells().collect::<Vec<_>>() {
        if r.random_bool(density) {
            g.set(c, CellState::Occupied);
        }
    }
    g
}

fn c5_planners() -> Verdict {
    let mut equal = 0;
    let mut reachable = 0;
    for seed in 0..50 {
        let mut g = random_grid(seed, 50, 50, 0.25);
        g.set(Cell::new(0, 0), CellState::Free);
        g.set(Cell::new(49, 49), CellState::Free);
        let f = compute_free_set(&g, 0.0);
        let goal = Cell::new(49, 49);
        let a = astar(&f, Cell::new(0, 0), |c| c == goal, |c| octile(c, goal)).map(|p| p.cost);
        let d = dijkstra(&f, Cell::new(0, 0), |c| c == goal).map(|p| p.cost);
        reachable += usize::from(d.is_some());
        equal += usize::from(a == d);
    }
    let map = OccupancyGrid::<f64>::new(200, 200, 0.05, Vec2::zero());
    let free = compute_free_set(&map, 0.4);
    let q = PathPlanQuery { start: Pose::new(1.5, 5.0, 0.0), target: Point::new(8.0, 5.0), radius: 0.7, tolerance: 0.05 };
    let straight = q.start.position().dist(q.target) - q.radius;
    let ok = (0..100)
        .filter(|s| rrt_star_plan(&q, &free, &RrtConfig::default(), &mut rng::stream(*s, "rrt")).is_ok_and(|o| o.cost <= 1.2 * straight && q.in_band(o.placement.position())))
        .count();
    verdict(equal == 50 && ok >= 95, format!("A* = Dijkstra on {equal}/50 grids ({reachable} reachable), RRT* {ok}/100 within 1.2× straight line"))
}

fn c6_geometry() -> Verdict {
    let mut grids = 0;
    let mut mismatched = 0;
    for w in 1..=32usize {
        for h in 1..=32usize {
            let seed = (w * 100 + h) as u64;
            let mut g = random_grid(seed, w, h, 0.15);
            g.resolution = 0.05;
            let clearance = [0.0, 0.05, 0.1, 0.2][(w + h) % 4];
            let fs = compute_free_set(&g, clearance);
            let blocked: Vec<Cell> = g.cells().filter(|c| g.get(*c).blocks()).collect();
            let ok = g.cells().all(|c| {
                let d = blocked.iter().map(|o| (((c.i as f64 - o.i as f64).powi(2) + (c.j as f64 - o.j as f64).powi(2)).sqrt()) * 0.05).fold(f64::INFINITY, f64::min);
                fs.contains_cell(c) == (g.get(c) == CellState::Free && d >= clearance)
            });
            grids += 1;
            mismatched += usize::from(!ok);
        }
    }
    let apex = Point::new(1.0, 2.0);
    let dir = Vec2::from_angle(0.3);
    let at = |deg: f64| apex + Vec2::from_angle(0.3 + deg.to_radians());
    let boundary = in_fan(apex, dir, FAN_HALF_ANGLE, at(60.0)) && in_fan(apex, dir, FAN_HALF_ANGLE, at(-60.0)) && !in_fan(apex, dir, FAN_HALF_ANGLE, at(60.0 + 1e-6)) && !in_fan(apex, dir, FAN_HALF_ANGLE, at(-60.0 - 1e-6));
    let mut r = rng::stream(BASE_SEED, "acceptance-prune");
    let mut close_pairs = 0;
    for _ in 0..200 {
        let ps: Vec<KeypointProposal> = (0..30).map(|k| KeypointProposal { pixel: (k, 0), point3d: [r.random_range(0.0..0.3), r.random_range(0.0..0.3), r.random_range(0.0..0.3)], cluster_id: k }).collect();
        let kept = prune(ps, PRUNE_DISTANCE);
        for a in 0..kept.len() {
            for b in a + 1..kept.len() {
                close_pairs += usize::from(dist3(kept[a].point3d, kept[b].point3d) < PRUNE_DISTANCE);
            }
        }
    }
    verdict(mismatched == 0 && boundary && close_pairs == 0, format!("free set matches brute force on {}/{grids} grids, 60° boundary ok={boundary}, close pairs after pruning={close_pairs}", grids - mismatched))
}

fn c7_trend(report: &EvalReport, dt: Duration) -> Verdict {
    let ours = report.method("ours").expect("ours row");
    let oc = report.method("object_center+astar").expect("oc row");
    let best_other = report.methods.iter().filter(|m| m.method != "ours").max_by(|a, b| a.rate().total_cmp(&b.rate())).expect("baselines");
    let pass = ours.rate() >= 0.8 && oc.constrained_rate() <= 0.6 && ours.rate() > best_other.rate() && dt < Duration::from_secs(300);
    let rows: Vec<String> = report.methods.iter().map(|m| format!("{} {:.0}%", m.method, 100.0 * m.rate())).collect();
    verdict(
        pass,
        format!(
            "ours {:.0}% (need ≥80%), OC+A* constrained {:.0}% (need ≤60%), best baseline {} {:.0}% (ours must exceed); [{}], {dt:.1?}",
            100.0 * ours.rate(),
            100.0 * oc.constrained_rate(),
            best_other.method,
            100.0 * best_other.rate(),
            rows.join(", ")
        ),
    )
}

fn planar_variance(pts: &[Point]) -> f64 {
    let m = baseplace::geom::mean(pts).expect("non-empty");
    pts.iter().map(|p| p.dist(m).powi(2)).sum::<f64>() / pts.len() as f64
}

/// Per-method averages over traces with a full optimizer history.
fn spread(traces: &[PlanTrace], tag: &str, f: impl Fn(&baseplace::optimizer::IterationTrace, Point) -> f64) -> f64 {
    let vals: Vec<f64> = traces
        .iter()
        .filter(|t| t.method == tag && t.error.is_none())
        .filter_map(|t| Some(f(t.iterations.last()?, t.truth?.keypoint)))
        .collect();
    vals.iter().sum::<f64>() / vals.len().max(1) as f64
}

fn c8_alpha(report: &EvalReport, traces: &[PlanTrace]) -> Verdict {
    let tags = ["ours", "ours[alpha=0]", "ours[alpha=0.5]", "ours[alpha=1]"];
    let rate = |t: &str| report.method(t).expect("ablation row").rate();
    let ordering = tags[1..].iter().all(|t| rate("ours") >= rate(t));
    let markers: Vec<f64> = tags.iter().map(|t| spread(traces, t, |it, _| planar_variance(&it.marker_positions().iter().map(|m| m.1).collect::<Vec<_>>()))).collect();
    let top5: Vec<f64> = tags.iter().map(|t| spread(traces, t, |it, _| planar_variance(&it.ranked_positions()))).collect();
    let radial: Vec<f64> = tags.iter().map(|t| spread(traces, t, |it, g| it.positions.iter().zip(&it.p).map(|(x, p)| p * (x.dist(g) - 0.7).powi(2)).sum())).collect();
    let widest = [0, 2, 3].iter().all(|k| markers[1] > markers[*k]);
    let fmt = |v: &[f64]| tags.iter().zip(v).map(|(t, x)| format!("{t} {x:.4}")).collect::<Vec<_>>().join(", ");
    verdict(
        ordering && widest,
        format!(
            "success [{}]; final-candidate variance [{}]; top-5 variance [{}]; p-weighted (d−r*)² [{}]",
            tags.iter().map(|t| format!("{t} {:.0}%", 100.0 * rate(t))).collect::<Vec<_>>().join(", "),
            fmt(&markers),
            fmt(&top5),
            fmt(&radial)
        ),
    )
}

fn c9_determinism(tasks: &[LoadedTask], methods: &[Method], report: &EvalReport, first: &[PlanTrace], settings: &Settings) -> Verdict {
    let mut compared = 0;
    let mut differing = 0;
    for m in methods {
        for lt in tasks {
            for k in 0..2 {
                let seed = rng::derive_seed(rng::trial_seed(BASE_SEED, k as u64), &lt.task_name);
                let trial = Trial { scene: &lt.scene, scene_name: &lt.scene_name, task: &lt.task, task_name: &lt.task_name, base_seed: BASE_SEED, trial_index: k, seed };
                let replay = run_trial(m, &trial, settings).to_json();
                let original = first.iter().find(|t| t.method == m.tag() && t.task == lt.task_name && t.trial_index == k).expect("trace from the suite run");
                compared += 1;
                differing += usize::from(replay != original.to_json());
            }
        }
    }
    let (a, _) = run_suite(methods, tasks, 2, BASE_SEED + 1, settings);
    let (b, _) = run_suite(methods, tasks, 2, BASE_SEED + 1, settings);
    let recomputed = EvalReport::from_traces(first).hash() == report.hash();
    let pass = differing == 0 && a.hash() == b.hash() && recomputed;
    verdict(pass, format!("{compared} replayed traces, {differing} differ; report hashes {} / {}", &a.hash()[..12], &b.hash()[..12]))
}

fn c10_finalize() -> Verdict {
    let pts = [(0.0, 0.0), (0.1, 0.0), (0.0, 0.1), (1.0, 1.0), (-1.0, 1.0)].map(|(x, y)| Point::new(x, y));
    let r = finalize(&pts);
    let want = 0.1 / 3.0;
    verdict((r.x - want).abs() <= 1e-6 && (r.y - want).abs() <= 1e-6, format!("({:.6}, {:.6})", r.x, r.y))
}

/// ε = 0 scripted oracle, 10 m open map, one-cell object with g 0.1 m north.
fn open_map_regression() -> Verdict {
    let map = OccupancyGrid::new(200, 200, 0.05, Vec2::zero());
    let free = compute_free_set(&map, 0.4);
    let mut ctx = AffordanceContext::new(vec![Cell::new(100, 100)], &map, 0.0, &free).expect("footprint");
    ctx.set_direction(4, FAN_HALF_ANGLE);
    let g = ctx.centroid + Vec2::new(0.0, 0.1);
    ctx.keypoint = Some(g);
    let truth = GroundTruth { object_center: ctx.centroid, keypoint: g, direction: std::f64::consts::FRAC_PI_2, half_angle: FAN_HALF_ANGLE };
    let mut hits = 0;
    let mut dists = Vec::new();
    for seed in 0..20 {
        let mut oracle = ScriptedOracle::new(ScriptedOracleConfig { noise_epsilon: 0.0, seed, ..Default::default() }, truth);
        let none = |_: &[(i32, Point)]| Vec::new();
        let out = optimize(&ctx, &free, "approach", &mut oracle, &PlannerConfig::default(), &mut rng::stream(seed, "optimizer"), &none, &mut Vec::new(), &mut Vec::new()).expect("open map");
        let d = out.position.dist(g);
        dists.push(d);
        hits += usize::from(truth.in_fan(out.position, truth.direction) && (d - 0.7).abs() <= 0.15);
    }
    let (lo, hi) = dists.iter().fold((f64::INFINITY, 0.0f64), |(a, b), d| (a.min(*d), b.max(*d)));
    verdict(hits >= 19, format!("{hits}/20 in fan with |d−r*| ≤ 0.15 (need 19), distances to g {lo:.2}..{hi:.2}"))
}

fn main() -> ExitCode {
    let tasks = load_suite(&Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/assets/suite.json")).expect("shipped suite");
    let settings = Settings::default();
    let methods = Method::standard();
    let ((report, traces), dt) = timed(|| run_suite(&methods, &tasks, TRIALS, BASE_SEED, &settings));
    let alphas = [AlphaMode::Schedule, AlphaMode::Fixed(0.0), AlphaMode::Fixed(0.5), AlphaMode::Fixed(1.0)];
    let (ablation, ablation_traces) = ablate_alpha(&alphas, &tasks, TRIALS, BASE_SEED, &settings);
    let stored: Vec<&PlanTrace> = traces.iter().chain(&ablation_traces).collect();

    let results = [
        ("window mass", c1_window_mass()),
        ("α schedule", c2_schedule()),
        ("sampling contract", c3_sampling()),
        ("normalization", c4_normalization(&stored)),
        ("planner correctness", c5_planners()),
        ("geometry", c6_geometry()),
        ("end-to-end trend", c7_trend(&report, dt)),
        ("α-ablation trend", c8_alpha(&ablation, &ablation_traces)),
        ("determinism", c9_determinism(&tasks, &methods, &report, &traces, &settings)),
        ("finalize example", c10_finalize()),
    ];
    println!();
    for (k, (name, v)) in results.iter().enumerate() {
        println!("criterion {:>2} {name}: {} | {}", k + 1, if v.pass { "PASS" } else { "FAIL" }, v.detail);
    }
    let regression = open_map_regression();
    println!("optimizer open-map regression: {} | {}", if regression.pass { "PASS" } else { "FAIL" }, regression.detail);
    let failed = results.iter().filter(|r| !r.1.pass).count();
    println!("\n{} of {} criteria passed\n", results.len() - failed, results.len());
    if failed == 0 && regression.pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
