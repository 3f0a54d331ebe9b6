//! Acceptance suite: one pass/fail line per criterion.
//!
//! Run with `cargo test -p extruplan --test acceptance -- --nocapture` to see
//! the report.

mod common;

use std::collections::HashMap;
use std::time::{Duration, Instant};

use extruplan::bench::{run_bench, write_csv, BenchConfig};
use extruplan::frame::{ElementId, ElementSet, Material, PartialStructure, Tolerances, Vec3};
use extruplan::generate::{desk_suite, generate, trap_suite, Family};
use extruplan::geometry::{orientation_with_axis, sample_any_orientation, CollisionWorld};
use extruplan::heuristics::{
    euclidean_dist, graph_dist, plan_stiffness_with, stiffness_only_search, Direction, HeuristicKind,
    StiffnessPlanOutcome,
};
use extruplan::kinematics::{Configuration, FreeFlyingExtruder};
use extruplan::search::{
    geometry_only_solution_valid, heuristic_table, plan, regression_geometry_only, Algorithm, GeometryOnlyInstance,
    SearchConfig, SearchLimits, TraceEvent,
};
use extruplan::stiffness::{analyze, StiffnessChecker};
use extruplan::validate::{validate_plan, Clause};
use extruplan::{FrameProblem, Plan};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Report {
    lines: Vec<(usize, bool, String)>,
}

impl Report {
    fn record(&mut self, id: usize, pass: bool, detail: String) {
        println!("criterion {id:>2}: {} {detail}", if pass { "PASS" } else { "FAIL" });
        self.lines.push((id, pass, detail));
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn all_elements(p: &FrameProblem) -> PartialStructure {
    PartialStructure::full(p)
}

// ---------------------------------------------------------------------------
// 1. sparse solver against a dense oracle

fn fea_oracle() -> (bool, String) {
    let clock = Instant::now();
    let mut r = rng(1);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let p = common::random_frame(&mut r, 30);
        let all: Vec<usize> = (0..p.num_elements()).collect();
        let dense = common::max_translation(&common::dense_displacements(&p, &all));
        let sparse = analyze(&p, &all_elements(&p)).expect("random frames are solvable").max_trans;
        worst = worst.max((sparse - dense).abs() / dense.abs().max(f64::MIN_POSITIVE));
    }
    let secs = clock.elapsed().as_secs_f64();
    (worst <= 1e-9 && secs < 30.0, format!("max relative error {worst:.2e} over 200 frames in {secs:.1}s"))
}

// ---------------------------------------------------------------------------
// 2. analytic checks

fn unit_column() -> FrameProblem {
    let m = Material { youngs_modulus: 1.0, shear_modulus: 1.0, density: 1.0, area: 1.0, iy: 1.0, iz: 1.0, torsion: 1.0, g: 1.0 };
    FrameProblem::new(
        vec![Vec3::zeros(), Vec3::new(0.0, 0.0, 1.0)],
        vec![[0, 1]],
        vec![0],
        m,
        0.01,
        Configuration::pointing_down(Vec3::new(0.0, 0.0, 2.0)),
        Tolerances { trans: 10.0, rot: None, eps: 1e-6, retraction: 0.01 },
        None,
    )
    .expect("unit column is valid")
}

fn analytic() -> (bool, String) {
    let col = unit_column();
    let u = analyze(&col, &all_elements(&col)).unwrap().displacements[1];
    let axial_ok = (u[2].abs() - 0.5).abs() <= 1e-12 && u[2] < 0.0;

    let mut r = rng(2);
    let mut scale_err = 0.0f64;
    let mut mirror_err = 0.0f64;
    for _ in 0..50 {
        let p = common::random_frame(&mut r, 30);
        let base = analyze(&p, &all_elements(&p)).unwrap().displacements;
        // stiffer material: both moduli doubled, Poisson ratio unchanged
        let mut stiff = p.clone();
        stiff.material.youngs_modulus *= 2.0;
        stiff.material.shear_modulus *= 2.0;
        let half = analyze(&stiff, &all_elements(&stiff)).unwrap().displacements;
        let scale = base.iter().flatten().fold(0.0f64, |a, x| a.max(x.abs()));
        for (a, b) in base.iter().zip(&half) {
            for k in 0..6 {
                scale_err = scale_err.max((a[k] - 2.0 * b[k]).abs() / scale);
            }
        }
        // mirror through the plane x = 0
        let mut mirrored = p.clone();
        for n in mirrored.nodes.iter_mut() {
            n.x = -n.x;
        }
        let m = analyze(&mirrored, &all_elements(&mirrored)).unwrap().displacements;
        let flip = [-1.0, 1.0, 1.0, 1.0, -1.0, -1.0];
        for (a, b) in base.iter().zip(&m) {
            for k in 0..6 {
                mirror_err = mirror_err.max((a[k] - flip[k] * b[k]).abs() / scale);
            }
        }
    }
    (
        axial_ok && scale_err <= 1e-12 && mirror_err <= 1e-9,
        format!(
            "column tip uz={:.15} (|uz| vs 0.5), doubled-modulus error {scale_err:.1e}, mirror error {mirror_err:.1e}",
            u[2]
        ),
    )
}

// ---------------------------------------------------------------------------
// 3. heuristic oracles

/// Random connected graph on integer points whose edges all have integer
/// lengths, so path sums are exact in floating point.
fn integer_graph(r: &mut ChaCha8Rng) -> FrameProblem {
    const STEPS: [[i64; 3]; 10] =
        [[1, 0, 0], [0, 1, 0], [0, 0, 1], [3, 4, 0], [0, 3, 4], [4, 0, 3], [1, 2, 2], [2, 3, 6], [2, 1, 2], [6, 2, 3]];
    loop {
        let n = r.random_range(5..=50);
        let mut pts: Vec<[i64; 3]> = vec![[0, 0, 0]];
        let mut edges: Vec<[usize; 2]> = Vec::new();
        while pts.len() < n {
            let from = r.random_range(0..pts.len());
            let s = STEPS[r.random_range(0..STEPS.len())];
            let sign = |x: i64, r: &mut ChaCha8Rng| if r.random::<bool>() { x } else { -x };
            let mut q = pts[from];
            for k in 0..2 {
                q[k] += sign(s[k], r);
            }
            q[2] += s[2];
            if pts.contains(&q) {
                continue;
            }
            pts.push(q);
            edges.push([from, pts.len() - 1]);
        }
        // chords with integer lengths
        for _ in 0..n {
            let a = r.random_range(0..n);
            let b = r.random_range(0..n);
            if a == b || edges.iter().any(|e| (e[0] == a && e[1] == b) || (e[0] == b && e[1] == a)) {
                continue;
            }
            let d2: i64 = (0..3).map(|k| (pts[a][k] - pts[b][k]).pow(2)).sum();
            let root = (d2 as f64).sqrt().round() as i64;
            if root * root == d2 {
                edges.push([a, b]);
            }
        }
        let ground = vec![0];
        let nodes: Vec<Vec3> = pts.iter().map(|p| Vec3::new(p[0] as f64, p[1] as f64, p[2] as f64)).collect();
        let top = nodes.iter().map(|p| p.z).fold(0.0, f64::max);
        if let Ok(p) = FrameProblem::new(
            nodes,
            edges,
            ground,
            Material::circular(1e9, 4e8, 1000.0, 0.01),
            0.01,
            Configuration::pointing_down(Vec3::new(0.0, 0.0, top + 1.0)),
            common::loose_tolerances(),
            None,
        ) {
            return p;
        }
    }
}

fn heuristic_oracles() -> (bool, String) {
    let mut r = rng(3);
    let mut mismatches = 0;
    let mut euclid_mismatches = 0;
    for _ in 0..50 {
        let p = integer_graph(&mut r);
        let edges: Vec<(usize, usize, f64)> =
            p.elements.iter().enumerate().map(|(e, el)| (el.nodes[0].0, el.nodes[1].0, p.length(ElementId(e)))).collect();
        let fw = common::floyd_warshall(p.num_nodes(), &edges);
        let dist: Vec<f64> =
            (0..p.num_nodes()).map(|v| p.ground.iter().map(|g| fw[g.0][v]).fold(f64::INFINITY, f64::min)).collect();
        let table = graph_dist(&p);
        for (e, el) in p.elements.iter().enumerate() {
            let want = dist[el.nodes[0].0].min(dist[el.nodes[1].0]) + p.length(ElementId(e)) / 2.0;
            if table.values[e] != want {
                mismatches += 1;
            }
        }
        let eu = euclidean_dist(&p);
        for (e, el) in p.elements.iter().enumerate() {
            let want = (p.nodes[el.nodes[0].0].z + p.nodes[el.nodes[1].0].z) / 2.0;
            if eu.values[e] != want {
                euclid_mismatches += 1;
            }
        }
    }
    (
        mismatches == 0 && euclid_mismatches == 0,
        format!("graph_dist mismatches {mismatches}, euclidean_dist mismatches {euclid_mismatches} over 50 graphs"),
    )
}

// ---------------------------------------------------------------------------
// 4. geometry-only sequencing

fn random_set(r: &mut ChaCha8Rng, m: usize, pool: &[usize], density: f64) -> ElementSet {
    let mut s = ElementSet::empty(m);
    for &e in pool {
        if r.random::<f64>() < density {
            s.insert(e);
        }
    }
    s
}

#[derive(Clone, Copy)]
enum Blockers {
    /// Each trajectory collides with a fixed fraction of all elements.
    Dense(f64),
    /// Each element has this many neighbours and trajectories only collide
    /// with neighbours, as swept volumes do in a frame of bounded degree.
    Local(usize),
}

/// Feasible by construction: a hidden order, and for each element one
/// candidate that only collides with elements printed after it.
fn planted_instance(r: &mut ChaCha8Rng, m: usize, blockers: Blockers) -> GeometryOnlyInstance {
    let mut order: Vec<usize> = (0..m).collect();
    order.shuffle(r);
    let mut position = vec![0; m];
    for (pos, &e) in order.iter().enumerate() {
        position[e] = pos;
    }
    let mut candidates = vec![Vec::new(); m];
    for e in 0..m {
        let mut near: Vec<usize> = (0..m).filter(|&f| f != e).collect();
        let density = match blockers {
            Blockers::Dense(d) => d,
            Blockers::Local(k) => {
                near.shuffle(r);
                near.truncate(k);
                0.5
            }
        };
        let later: Vec<usize> = near.iter().copied().filter(|&f| position[f] > position[e]).collect();
        let t = r.random_range(1..=5);
        let planted = r.random_range(0..t);
        for c in 0..t {
            let set = if c == planted { random_set(r, m, &later, density) } else { random_set(r, m, &near, density) };
            candidates[e].push(set);
        }
    }
    GeometryOnlyInstance { candidates }
}

/// Exhaustive search over every ordering and the first safe candidate.
fn brute_force_feasible(inst: &GeometryOnlyInstance) -> bool {
    fn go(inst: &GeometryOnlyInstance, printed: &mut ElementSet) -> bool {
        let m = inst.num_elements();
        if printed.is_full() {
            return true;
        }
        for e in 0..m {
            if printed.contains(e) {
                continue;
            }
            if inst.candidates[e].iter().any(|c| !c.intersects(printed)) {
                printed.insert(e);
                if go(inst, printed) {
                    return true;
                }
                printed.remove(e);
            }
        }
        false
    }
    go(inst, &mut ElementSet::empty(inst.num_elements()))
}

fn geometry_only() -> (bool, String) {
    let clock = Instant::now();
    let mut r = rng(4);
    let mut solved = 0;
    for k in 0..100 {
        let m = 10 + (k * 90) / 99;
        let blockers = if k % 2 == 0 { Blockers::Dense(0.3) } else { Blockers::Local(8) };
        let inst = planted_instance(&mut r, m, blockers);
        let h: Vec<f64> = (0..m).map(|_| r.random()).collect();
        let (sol, _) = regression_geometry_only(&inst, &h, &mut r);
        if sol.is_some_and(|s| geometry_only_solution_valid(&inst, &s)) {
            solved += 1;
        }
    }
    let mut infeasible = 0;
    let mut wrongly_solved = 0;
    while infeasible < 100 {
        let m = r.random_range(2..=8);
        let all: Vec<usize> = (0..m).collect();
        let candidates = (0..m)
            .map(|e| {
                let others: Vec<usize> = all.iter().copied().filter(|&f| f != e).collect();
                (0..r.random_range(1..=3)).map(|_| random_set(&mut r, m, &others, 0.6)).collect()
            })
            .collect();
        let inst = GeometryOnlyInstance { candidates };
        if brute_force_feasible(&inst) {
            continue;
        }
        infeasible += 1;
        let h: Vec<f64> = (0..m).map(|_| r.random()).collect();
        if regression_geometry_only(&inst, &h, &mut r).0.is_some() {
            wrongly_solved += 1;
        }
    }
    let (local_slope, local_pairs) = operation_slope(&mut r, Blockers::Local(8));
    let (dense_slope, dense_pairs) = operation_slope(&mut r, Blockers::Dense(0.3));
    let slope = local_slope.max(dense_slope);
    let secs = clock.elapsed().as_secs_f64();
    (
        solved == 100 && wrongly_solved == 0 && slope <= 2.3 && secs < 60.0,
        format!(
            "feasible solved {solved}/100, infeasible failed {}/100, query log-log slope {local_slope:.2} local / {dense_slope:.2} dense (element pairs {local_pairs:.2} / {dense_pairs:.2}), {secs:.1}s",
            100 - wrongly_solved
        ),
    )
}

/// Log-log slopes against |E| of safety queries and of the element pairs
/// they cover, over random planted instances.
fn operation_slope(r: &mut ChaCha8Rng, blockers: Blockers) -> (f64, f64) {
    let sizes = [10usize, 20, 40, 70, 100];
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut zs = Vec::new();
    for &m in &sizes {
        let reps = 10;
        let (mut ops, mut pairs) = (0u64, 0u64);
        for _ in 0..reps {
            let inst = planted_instance(r, m, blockers);
            let h: Vec<f64> = (0..m).map(|_| r.random()).collect();
            let stats = regression_geometry_only(&inst, &h, r).1;
            ops += stats.operations;
            pairs += stats.pair_tests;
        }
        xs.push((m as f64).ln());
        ys.push((ops as f64 / reps as f64).ln());
        zs.push((pairs as f64 / reps as f64).ln());
    }
    (least_squares_slope(&xs, &ys), least_squares_slope(&xs, &zs))
}

fn least_squares_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let num: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    num / den
}

// ---------------------------------------------------------------------------
// 5. collision checking

fn collision() -> (bool, String) {
    let mut r = rng(5);
    let problems: Vec<FrameProblem> = [
        generate(Family::Tower, &[3, 3, 3], &mut r).unwrap().problem,
        generate(Family::Pyramid, &[4], &mut r).unwrap().problem,
        generate(Family::Arch, &[3, 10], &mut r).unwrap().problem,
        generate(Family::Cage, &[2], &mut r).unwrap().problem,
    ]
    .into();
    let worlds: Vec<CollisionWorld> = problems.iter().map(CollisionWorld::new).collect();
    let mut mismatches = 0;
    let mut hits = 0;
    let queries = 100_000;
    for k in 0..queries {
        let p = &problems[k % problems.len()];
        let world = &worlds[k % problems.len()];
        let m = p.num_elements();
        let frac: f64 = r.random();
        let printed = random_set(&mut r, m, &(0..m).collect::<Vec<_>>(), frac);
        let bounds = p.node_bounds().inflate(p.tool.length * 0.5);
        let q = Configuration::new(bounds.sample(&mut r), sample_any_orientation(&mut r));
        let exempt = (r.random::<f64>() < 0.3).then(|| ElementId(r.random_range(0..m)));
        let fast = world.tool_collides_except(&q, &printed, exempt);
        let slow = world.brute_force_collides(&q, &printed, exempt);
        hits += fast as usize;
        if fast != slow {
            mismatches += 1;
        }
    }
    let mut violations = 0;
    for k in 0..1000 {
        let p = &problems[k % problems.len()];
        let world = &worlds[k % problems.len()];
        let model = FreeFlyingExtruder::for_problem(p);
        let m = p.num_elements();
        let frac: f64 = r.random();
        let big = random_set(&mut r, m, &(0..m).collect::<Vec<_>>(), frac);
        let small_pool: Vec<usize> = big.iter().collect();
        let frac: f64 = r.random();
        let small = random_set(&mut r, m, &small_pool, frac);
        let a = Configuration::new(p.workspace.sample(&mut r), sample_any_orientation(&mut r));
        let b = Configuration::new(p.workspace.sample(&mut r), sample_any_orientation(&mut r));
        let waypoints = [a, b];
        if world.trajectory_safe(&model, &waypoints, &big, None) && !world.trajectory_safe(&model, &waypoints, &small, None) {
            violations += 1;
        }
        if !world.tool_collides(&a, &big) && world.tool_collides(&a, &small) {
            violations += 1;
        }
    }
    (
        mismatches == 0 && violations == 0,
        format!("{mismatches} BVH/brute-force mismatches in {queries} queries ({hits} colliding), {violations} monotonicity violations in 1000 pairs"),
    )
}

// ---------------------------------------------------------------------------
// 6. desk benchmark

fn desk_benchmark() -> (bool, String) {
    let suite: Vec<(String, FrameProblem)> = desk_suite(0).into_iter().map(|g| (g.name, g.problem)).collect();
    let families: std::collections::BTreeSet<&str> =
        suite.iter().map(|(n, _)| n.split('_').nth(1).unwrap_or("")).collect();
    let sizes_ok = suite.iter().all(|(_, p)| (20..=200).contains(&p.num_elements()));
    let mut config = BenchConfig::new(vec![Algorithm::Regression], vec![HeuristicKind::Euclidean, HeuristicKind::StiffPlan]);
    config.limits = SearchLimits::timeout(60.0);
    let rows = run_bench(&suite, &config);
    let mut detail = format!("{} problems, {} families; ", suite.len(), families.len());
    let mut pass = suite.len() >= 20 && families.len() >= 4 && sizes_ok;
    for h in [HeuristicKind::Euclidean, HeuristicKind::StiffPlan] {
        let sel: Vec<_> = rows.iter().filter(|r| r.heuristic == h).collect();
        let ok = sel.iter().filter(|r| r.success && r.runtime <= 60.0).count();
        let rate = ok as f64 / sel.len() as f64;
        pass &= rate >= 0.9;
        detail += &format!("regression+{h}: {ok}/{} ({:.0}%) ", sel.len(), 100.0 * rate);
    }
    // run_trial counts a success only after the independent validator passes
    (pass, detail + "(successes validated)")
}

// ---------------------------------------------------------------------------
// 7. trends

fn stiffness_trend() -> (bool, String) {
    let mut r = rng(7);
    let problems: Vec<FrameProblem> =
        [[2usize, 3], [4, 3], [6, 3], [10, 3]].iter().map(|s| generate(Family::CantileverTies, s, &mut r).unwrap().problem).collect();
    let trials = 5;
    let limits = SearchLimits { timeout: Some(Duration::from_secs(60)), max_expansions: Some(20_000) };
    let mut forward = 0;
    let mut regression = 0;
    for p in &problems {
        let mut checker = StiffnessChecker::new(p);
        if matches!(plan_stiffness_with(p, &mut checker, &limits).0, StiffnessPlanOutcome::Found(_)) {
            forward += 1;
        }
        for seed in 0..trials {
            let mut checker = StiffnessChecker::new(p);
            let table = heuristic_table(p, HeuristicKind::Random, seed, &mut checker, &limits).unwrap();
            let (out, _) = stiffness_only_search(p, Direction::Backward, &table, &mut checker, &limits);
            if matches!(out, StiffnessPlanOutcome::Found(_)) {
                regression += 1;
            }
        }
    }
    let n = problems.len();
    let fr = forward as f64 / n as f64;
    let rr = regression as f64 / (n * trials as usize) as f64;
    (
        fr == 1.0 && rr < fr,
        format!("cantilever-with-ties: forward {forward}/{n}, regression-random {regression}/{}", n * trials as usize),
    )
}

fn trends() -> (bool, String) {
    let (a, da) = stiffness_trend();
    let (b, db) = lookahead_trend();
    (a && b, format!("(a) {} {da}; (b) {} {db}", verdict(a), verdict(b)))
}

fn verdict(pass: bool) -> &'static str {
    if pass {
        "pass"
    } else {
        "fail"
    }
}

fn lookahead_trend() -> (bool, String) {
    let suite = trap_suite(0, 4);
    let seeds = 0..3u64;
    let mut totals = HashMap::new();
    let mut solved = HashMap::new();
    for alg in [Algorithm::Progression, Algorithm::ForwardCheck] {
        for g in &suite {
            for seed in seeds.clone() {
                let mut c = SearchConfig::new(alg, HeuristicKind::Euclidean, seed);
                c.limits = SearchLimits::timeout(60.0);
                let out = plan(&g.problem, &c);
                *totals.entry(alg).or_insert(0u64) += out.stats.backtracks;
                *solved.entry(alg).or_insert(0usize) += out.plan.is_some() as usize;
            }
        }
    }
    let (p, f) = (totals[&Algorithm::Progression], totals[&Algorithm::ForwardCheck]);
    (
        f < p,
        format!(
            "geometric trap: progression {p} backtracks ({} solved), forward_check {f} backtracks ({} solved)",
            solved[&Algorithm::Progression],
            solved[&Algorithm::ForwardCheck]
        ),
    )
}

// ---------------------------------------------------------------------------
// 8. validator mutations

fn valid_plans() -> Vec<(FrameProblem, Plan)> {
    let mut r = rng(8);
    let mut out = Vec::new();
    let shapes: [(Family, &[usize]); 5] = [
        (Family::Tower, &[2, 1, 2]),
        (Family::Tower, &[2, 2, 1]),
        (Family::Pyramid, &[3]),
        (Family::Arch, &[1, 4]),
        (Family::CantileverTies, &[1, 2]),
    ];
    let mut seed = 0;
    while out.len() < 20 {
        let (fam, size) = shapes[out.len() % shapes.len()];
        let g = generate(fam, size, &mut r).unwrap();
        let mut c = SearchConfig::new(Algorithm::Regression, HeuristicKind::Euclidean, seed);
        c.limits = SearchLimits::timeout(60.0);
        seed += 1;
        if let Some(p) = plan(&g.problem, &c).plan {
            if validate_plan(&g.problem, &p).valid {
                out.push((g.problem, p));
            }
        }
    }
    out
}

fn swap_extrusions(problem: &FrameProblem, plan: &Plan) -> Option<Plan> {
    let last = (1..plan.sequence.len()).rev().find(|&k| !problem.touches_ground(plan.sequence[k].element))?;
    let mut p = plan.clone();
    let (a, b) = (Plan::extrusion_index(0), Plan::extrusion_index(last));
    p.trajectories.swap(a, b);
    p.sequence.swap(0, last);
    p.orientations.swap(0, last);
    Some(p)
}

fn displace_waypoint(problem: &FrameProblem, plan: &Plan) -> Option<Plan> {
    let mut p = plan.clone();
    let t = 2;
    let target = problem.midpoint(plan.sequence[0].element);
    let traj = p.trajectories.get_mut(t)?;
    let at = traj.waypoints.len() / 2;
    let o = traj.waypoints[at.saturating_sub(1)].orientation;
    traj.waypoints.insert(at.max(1), Configuration::new(target, o));
    Some(p)
}

fn flip_orientation(problem: &FrameProblem, plan: &Plan) -> Option<Plan> {
    let mut p = plan.clone();
    let k = plan.sequence.len() / 2;
    let de = plan.sequence[k];
    let dir = problem.position(de.end) - problem.position(de.start);
    let sigma = orientation_with_axis(&dir, 0.3);
    p.orientations[k] = sigma;
    let traj = &mut p.trajectories[Plan::extrusion_index(k)];
    traj.orientation = Some(sigma);
    for q in traj.waypoints.iter_mut() {
        q.orientation = sigma;
    }
    Some(p)
}

fn drop_element(plan: &Plan) -> Option<Plan> {
    let mut p = plan.clone();
    let k = plan.sequence.len() / 2;
    let i = Plan::extrusion_index(k);
    p.trajectories.drain(i..i + 2);
    p.sequence.remove(k);
    p.orientations.remove(k);
    Some(p)
}

fn mutations() -> (bool, String) {
    let plans = valid_plans();
    let mut detected = [0usize; 4];
    let mut false_passes = 0;
    let mut tried = [0usize; 4];
    for (problem, plan) in &plans {
        let cases: [(Option<Plan>, Clause); 4] = [
            (swap_extrusions(problem, plan), Clause::Sequence),
            (displace_waypoint(problem, plan), Clause::Safety),
            (flip_orientation(problem, plan), Clause::Mode),
            (drop_element(plan), Clause::Sequence),
        ];
        for (k, (mutant, clause)) in cases.into_iter().enumerate() {
            let Some(m) = mutant else { continue };
            tried[k] += 1;
            let v = validate_plan(problem, &m);
            if v.valid {
                false_passes += 1;
            } else if v.has(clause) {
                detected[k] += 1;
            }
        }
    }
    let all = tried.iter().all(|&t| t == plans.len()) && detected == tried && false_passes == 0;
    (
        all,
        format!(
            "{} plans; swap {}/{}, displace {}/{}, orientation {}/{}, drop {}/{}; {false_passes} false passes",
            plans.len(),
            detected[0],
            tried[0],
            detected[1],
            tried[1],
            detected[2],
            tried[2],
            detected[3],
            tried[3]
        ),
    )
}

// ---------------------------------------------------------------------------
// 9. determinism

fn determinism() -> (bool, String) {
    let mut r = rng(9);
    let g = generate(Family::Pyramid, &[3], &mut r).unwrap();
    let run = || {
        let mut c = SearchConfig::new(Algorithm::Regression, HeuristicKind::Euclidean, 17);
        c.limits = SearchLimits::unlimited();
        let mut out = plan(&g.problem, &c);
        out.stats.wall_time = 0.0;
        (out.plan.map(|p| p.to_json()), serde_json::to_string(&out.stats).unwrap())
    };
    let (p1, s1) = run();
    let (p2, s2) = run();
    let suite: Vec<(String, FrameProblem)> = [(Family::Tower, &[2usize, 2, 2][..]), (Family::Pyramid, &[3][..])]
        .iter()
        .map(|(f, s)| {
            let g = generate(*f, s, &mut rng(10)).unwrap();
            (g.name, g.problem)
        })
        .collect();
    let csv = || {
        let mut c = BenchConfig::new(vec![Algorithm::Progression, Algorithm::Regression], vec![HeuristicKind::Euclidean]);
        c.trials = 2;
        c.seed = 5;
        c.timing = false;
        let mut buf = Vec::new();
        write_csv(&run_bench(&suite, &c), &mut buf).unwrap();
        buf
    };
    let (c1, c2) = (csv(), csv());
    let ok = p1.is_some() && p1 == p2 && s1 == s2 && c1 == c2;
    (ok, format!("plan equal {}, stats equal {}, csv equal {} ({} bytes)", p1 == p2, s1 == s2, c1 == c2, c1.len()))
}

// ---------------------------------------------------------------------------
// 10. persistence fairness

fn fairness() -> (bool, String) {
    let g = trap_suite(0, 1).remove(0);
    let mut c = SearchConfig::new(Algorithm::Progression, HeuristicKind::Euclidean, 3);
    c.trace = true;
    c.limits = SearchLimits { timeout: Some(Duration::from_secs(60)), max_expansions: Some(400) };
    let out = plan(&g.problem, &c);
    // for every re-queue of X with key K, until X pops again every pop is
    // keyed below K: nothing at a higher attempt level, or later in X's
    // own level, jumps the queue
    let events = &out.trace;
    let mut seen = std::collections::HashSet::new();
    let mut checked = 0;
    let mut violations = 0;
    for (i, ev) in events.iter().enumerate() {
        let TraceEvent::Push { node, key } = *ev else { continue };
        if !seen.insert(node) {
            checked += 1;
            for later in &events[i + 1..] {
                if let TraceEvent::Pop { node: y, key: ky } = *later {
                    if y == node {
                        break;
                    }
                    if ky >= key {
                        violations += 1;
                    }
                }
            }
        }
    }
    (
        out.stats.backtracks > 0 && checked > 0 && violations == 0,
        format!(
            "{} backtracks, {} re-queues checked, {violations} fairness violations",
            out.stats.backtracks, checked
        ),
    )
}

#[test]
fn acceptance() {
    let mut report = Report { lines: Vec::new() };
    let criteria: [(usize, fn() -> (bool, String)); 10] = [
        (1, fea_oracle),
        (2, analytic),
        (3, heuristic_oracles),
        (4, geometry_only),
        (5, collision),
        (6, desk_benchmark),
        (7, trends),
        (8, mutations),
        (9, determinism),
        (10, fairness),
    ];
    // ACCEPTANCE_ONLY=4,10 runs a subset while iterating
    let only: Option<Vec<usize>> =
        std::env::var("ACCEPTANCE_ONLY").ok().map(|v| v.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    for (id, f) in criteria {
        if only.as_ref().is_some_and(|o| !o.contains(&id)) {
            continue;
        }
        let (pass, detail) = f();
        report.record(id, pass, detail);
    }
    let failed: Vec<_> = report.lines.iter().filter(|l| !l.1).map(|l| l.0).collect();
    assert!(failed.is_empty(), "failing criteria: {failed:?}");
}
