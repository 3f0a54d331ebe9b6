//! Synthetic benchmark families with witness sequences.
//!
//! Every generated problem is feasible by construction: the generator also
//! emits a witness order, and the translational tolerance is derived from
//! the deflections along that order, so the witness is always stiff.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::frame::{ElementId, FrameError, FrameProblem, Material, PartialStructure, Tolerances, Vec3};
use crate::geometry::ToolSpec;
use crate::kinematics::Configuration;
use crate::stiffness::analyze;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Tower,
    Pyramid,
    #[serde(rename = "cantilever")]
    CantileverTies,
    Arch,
    /// Geometric trap: a short element hanging inside a closable cage.
    Cage,
}

impl Family {
    pub const DESK: [Family; 4] = [Family::Tower, Family::Pyramid, Family::CantileverTies, Family::Arch];

    pub fn name(&self) -> &'static str {
        match self {
            Family::Tower => "tower",
            Family::Pyramid => "pyramid",
            Family::CantileverTies => "cantilever",
            Family::Arch => "arch",
            Family::Cage => "cage",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "tower" => Ok(Family::Tower),
            "pyramid" => Ok(Family::Pyramid),
            "cantilever" | "cantilever_ties" => Ok(Family::CantileverTies),
            "arch" => Ok(Family::Arch),
            "cage" => Ok(Family::Cage),
            _ => Err(format!("unknown family '{s}' (tower|pyramid|cantilever|arch|cage)")),
        }
    }
}

/// Family plus size parameters:
/// tower `[nx, ny, nz]`, pyramid `[n]`, cantilever `[gadgets, beam_segments]`,
/// arch `[arches, segments]`, cage `[levels]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchmarkSpec {
    pub family: Family,
    pub size: Vec<usize>,
    pub count: usize,
    pub seed: u64,
}

#[derive(Clone, Debug)]
pub struct GeneratedProblem {
    pub name: String,
    pub family: Family,
    pub problem: FrameProblem,
    /// Known-valid forward order (used by tests, never by the planners).
    pub witness: Vec<ElementId>,
}

/// Nominal element spacing in metres.
pub const SPACING: f64 = 0.05;
pub const ELEMENT_RADIUS: f64 = 0.002;

pub fn default_material() -> Material {
    // PLA-like rod
    Material::circular(3.5e9, 1.3e9, 1240.0, ELEMENT_RADIUS)
}

struct Draft {
    nodes: Vec<Vec3>,
    elements: Vec<[usize; 2]>,
    ground: Vec<usize>,
    witness: Vec<usize>,
    tool: Option<ToolSpec>,
}

impl Draft {
    fn new() -> Self {
        Draft { nodes: Vec::new(), elements: Vec::new(), ground: Vec::new(), witness: Vec::new(), tool: None }
    }

    fn node(&mut self, p: Vec3) -> usize {
        self.nodes.push(p);
        self.nodes.len() - 1
    }

    fn ground_node(&mut self, p: Vec3) -> usize {
        let n = self.node(p);
        self.ground.push(n);
        n
    }

    fn element(&mut self, a: usize, b: usize) -> usize {
        self.elements.push([a, b]);
        self.elements.len() - 1
    }

    /// Finish: start pose above the structure, tolerance `slack` times the
    /// worst deflection along the witness.
    fn build(self, slack: f64) -> Result<(FrameProblem, Vec<ElementId>), FrameError> {
        let top = self.nodes.iter().map(|p| p.z).fold(0.0, f64::max);
        let n = self.nodes.len() as f64;
        let cx = self.nodes.iter().map(|p| p.x).sum::<f64>() / n;
        let cy = self.nodes.iter().map(|p| p.y).sum::<f64>() / n;
        let q0 = Configuration::pointing_down(Vec3::new(cx, cy, top + 2.0 * SPACING));
        let tol = Tolerances { trans: 1.0, rot: None, eps: 1e-6, retraction: SPACING / 2.0 };
        let mut problem = FrameProblem::new(
            self.nodes,
            self.elements,
            self.ground,
            default_material(),
            ELEMENT_RADIUS,
            q0,
            tol,
            self.tool,
        )?;
        let witness: Vec<ElementId> = self.witness.into_iter().map(ElementId).collect();
        let worst = witness_deflection(&problem, &witness);
        problem.tolerances.trans = slack * worst.max(1e-12);
        Ok((problem, witness))
    }
}

/// Largest translational deflection over the prefixes of `order`.
pub fn witness_deflection(problem: &FrameProblem, order: &[ElementId]) -> f64 {
    let mut partial = PartialStructure::empty(problem);
    let mut worst = 0.0f64;
    for &e in order {
        partial = partial.with(problem, e);
        match analyze(problem, &partial) {
            Ok(r) => worst = worst.max(r.max_trans),
            Err(_) => return f64::INFINITY,
        }
    }
    worst
}

fn jitter(rng: &mut ChaCha8Rng, amount: f64) -> f64 {
    if amount == 0.0 {
        0.0
    } else {
        rng.random_range(-amount..amount)
    }
}

/// Grid tower: `nx·ny·nz` vertical members and a horizontal lattice at every
/// level above the ground.
pub fn tower(nx: usize, ny: usize, nz: usize, rng: &mut ChaCha8Rng) -> Result<GeneratedProblem, FrameError> {
    assert!(nx >= 1 && ny >= 1 && nz >= 1);
    let mut d = Draft::new();
    let s = SPACING;
    let mut id = vec![vec![vec![0; nx]; ny]; nz + 1];
    for (k, level) in id.iter_mut().enumerate() {
        for (j, row) in level.iter_mut().enumerate() {
            for (i, slot) in row.iter_mut().enumerate() {
                let p = Vec3::new(i as f64 * s, j as f64 * s, k as f64 * s);
                *slot = if k == 0 {
                    d.ground_node(p)
                } else {
                    let dz = jitter(rng, 0.1 * s);
                    d.node(p + Vec3::new(jitter(rng, 0.1 * s), jitter(rng, 0.1 * s), dz))
                };
            }
        }
    }
    for k in 1..=nz {
        let mut level = Vec::new();
        for j in 0..ny {
            for i in 0..nx {
                level.push(d.element(id[k - 1][j][i], id[k][j][i]));
            }
        }
        d.witness.extend(level);
        let mut ring = Vec::new();
        for j in 0..ny {
            for i in 0..nx {
                if i + 1 < nx {
                    ring.push(d.element(id[k][j][i], id[k][j][i + 1]));
                }
                if j + 1 < ny {
                    ring.push(d.element(id[k][j][i], id[k][j + 1][i]));
                }
            }
        }
        d.witness.extend(ring);
    }
    let (problem, witness) = d.build(4.0)?;
    Ok(GeneratedProblem { name: format!("tower_{nx}x{ny}x{nz}"), family: Family::Tower, problem, witness })
}

/// Stepped pyramid on an `n×n` ground grid: level `k` has `(n−k)²` nodes,
/// each braced by four legs to the level below and tied to its neighbours.
pub fn pyramid(n: usize, rng: &mut ChaCha8Rng) -> Result<GeneratedProblem, FrameError> {
    assert!(n >= 2);
    let mut d = Draft::new();
    let s = SPACING;
    let h = 0.8 * s;
    let mut below: Vec<Vec<usize>> = (0..n)
        .map(|j| (0..n).map(|i| d.ground_node(Vec3::new(i as f64 * s, j as f64 * s, 0.0))).collect())
        .collect();
    for k in 1..n {
        let m = n - k;
        let off = k as f64 * s / 2.0;
        let z = k as f64 * h + jitter(rng, 0.05 * h);
        let level: Vec<Vec<usize>> = (0..m)
            .map(|j| {
                (0..m).map(|i| d.node(Vec3::new(off + i as f64 * s, off + j as f64 * s, z))).collect()
            })
            .collect();
        for j in 0..m {
            for i in 0..m {
                for (dj, di) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                    let e = d.element(below[j + dj][i + di], level[j][i]);
                    d.witness.push(e);
                }
            }
        }
        for j in 0..m {
            for i in 0..m {
                if i + 1 < m {
                    let e = d.element(level[j][i], level[j][i + 1]);
                    d.witness.push(e);
                }
                if j + 1 < m {
                    let e = d.element(level[j][i], level[j + 1][i]);
                    d.witness.push(e);
                }
            }
        }
        below = level;
    }
    let (problem, witness) = d.build(4.0)?;
    Ok(GeneratedProblem { name: format!("pyramid_{n}"), family: Family::Pyramid, problem, witness })
}

/// One cantilever gadget: a main column carrying a `k`-segment beam at
/// height `beam_h` and a 45° tie from the column top (`beam_h + k`) to the
/// beam tip, with a second column under the tip. Two 45° braces from ground
/// nodes behind the main column stiffen it at the beam and one node below the
/// top, so the top segment and the tie never stand on their own. Heights are
/// in spacings; every joint angle is at least 45° so the tool can reach each
/// element.
struct Gadget {
    col1: Vec<usize>,
    col2: Vec<usize>,
    beam: Vec<usize>,
    tie: usize,
}

fn add_gadget(d: &mut Draft, origin: Vec3, k: usize, beam_h: usize) -> Gadget {
    let s = SPACING;
    let top_h = beam_h + k;
    let base1 = d.ground_node(origin);
    let back_low = d.ground_node(origin + Vec3::new(-(beam_h as f64) * s, 0.0, 0.0));
    // one long segment between the beam and the upper brace keeps every
    // column midpoint except the top one below the tie midpoint
    let mut levels: Vec<usize> = (1..=beam_h).collect();
    if top_h - 1 > beam_h {
        levels.push(top_h - 1);
    }
    levels.push(top_h);
    let c1: Vec<usize> =
        std::iter::once(base1).chain(levels.iter().map(|&z| d.node(origin + Vec3::new(0.0, 0.0, z as f64 * s)))).collect();
    let (upper, top) = (c1[c1.len() - 2], c1[c1.len() - 1]);
    let tip_x = k as f64 * s;
    let base2 = d.ground_node(origin + Vec3::new(tip_x, 0.0, 0.0));
    let c2: Vec<usize> = std::iter::once(base2)
        .chain((1..beam_h).map(|z| d.node(origin + Vec3::new(tip_x, 0.0, z as f64 * s))))
        .collect();
    let beam_nodes: Vec<usize> = std::iter::once(c1[beam_h])
        .chain((1..k).map(|i| d.node(origin + Vec3::new(i as f64 * s, 0.0, beam_h as f64 * s))))
        .collect();
    let tip = d.node(origin + Vec3::new(tip_x, 0.0, beam_h as f64 * s));
    let mut col1: Vec<usize> = c1.windows(2).map(|w| d.element(w[0], w[1])).collect();
    col1.push(d.element(back_low, c1[beam_h]));
    let back_high = d.ground_node(origin + Vec3::new(-((top_h - 1) as f64) * s, 0.0, 0.0));
    col1.push(d.element(back_high, upper));
    let mut col2: Vec<usize> = c2.windows(2).map(|w| d.element(w[0], w[1])).collect();
    col2.push(d.element(c2[beam_h - 1], tip));
    let mut beam: Vec<usize> = beam_nodes.windows(2).map(|w| d.element(w[0], w[1])).collect();
    beam.push(d.element(beam_nodes[k - 1], tip));
    let tie = d.element(top, tip);
    Gadget { col1, col2, beam, tie }
}

/// Beam height of the cantilever gadget, in spacings.
pub const GADGET_BEAM_H: usize = 2;

fn gadget_witness(g: &Gadget) -> Vec<usize> {
    let mut w = g.col1.clone();
    w.extend(&g.col2);
    // grow the beam from both ends toward the middle, then tie it
    let k = g.beam.len();
    let (mut lo, mut hi) = (0usize, k);
    let mut from_left = true;
    while lo < hi {
        if from_left {
            w.push(g.beam[lo]);
            lo += 1;
        } else {
            hi -= 1;
            w.push(g.beam[hi]);
        }
        from_left = !from_left;
    }
    w.push(g.tie);
    w
}

/// Cantilevers with ties: forward construction is easy, but deconstruction
/// that removes the tip column before the tie strands a beam-and-tie core
/// that cannot be dismantled.
pub fn cantilever_ties(gadgets: usize, k: usize, rng: &mut ChaCha8Rng) -> Result<GeneratedProblem, FrameError> {
    assert!(gadgets >= 1 && k >= 2);
    let mut d = Draft::new();
    let gap = 4.0 * SPACING;
    let mut parts = Vec::new();
    for g in 0..gadgets {
        let origin = Vec3::new(jitter(rng, 0.5 * SPACING), g as f64 * gap, 0.0);
        parts.push(add_gadget(&mut d, origin, k, GADGET_BEAM_H));
    }
    for p in &parts {
        let w = gadget_witness(p);
        d.witness.extend(w);
    }
    let (tol, _, _) = gadget_probe(k, GADGET_BEAM_H)?;
    let (mut problem, witness) = d.build(1.0)?;
    problem.tolerances.trans = tol;
    debug_assert!(witness_deflection(&problem, &witness) <= tol);
    Ok(GeneratedProblem {
        name: format!("cantilever_{gadgets}x{k}"),
        family: Family::CantileverTies,
        problem,
        witness,
    })
}

/// Smallest tolerance under which `set` can be built one element at a time
/// from nothing, every intermediate state grounded (minimax over orders).
fn build_bottleneck(problem: &FrameProblem, set: &[usize]) -> f64 {
    let m = set.len();
    assert!(m < 20, "exhaustive bottleneck is exponential");
    let mut best = vec![f64::INFINITY; 1 << m];
    best[0] = 0.0;
    for mask in 1usize..1 << m {
        let elems = (0..m).filter(|i| mask >> i & 1 == 1).map(|i| ElementId(set[i]));
        let p = PartialStructure::from_elements(problem, elems);
        if !problem.is_grounded(p.printed()) {
            continue;
        }
        let via = (0..m).filter(|i| mask >> i & 1 == 1).map(|i| best[mask & !(1 << i)]).fold(f64::INFINITY, f64::min);
        if via.is_finite() {
            let own = analyze(problem, &p).map_or(f64::INFINITY, |r| r.max_trans);
            best[mask] = via.max(own);
        }
    }
    best[(1 << m) - 1]
}

/// Tolerance for a single gadget, with the deflection it must admit (the
/// witness and the stranded core) and the bottleneck of building the core
/// without the tip column, which it must reject.
fn gadget_probe(k: usize, beam_h: usize) -> Result<(f64, f64, f64), FrameError> {
    let mut d = Draft::new();
    let g = add_gadget(&mut d, Vec3::zeros(), k, beam_h);
    let all: Vec<usize> = (0..d.elements.len()).collect();
    d.witness = gadget_witness(&g);
    let (problem, witness) = d.build(1.0)?;
    let core: Vec<usize> = all.iter().copied().filter(|e| !g.col2.contains(e)).collect();
    let core_state = PartialStructure::from_elements(&problem, core.iter().map(|&e| ElementId(e)));
    let core_defl = analyze(&problem, &core_state).map_or(f64::INFINITY, |r| r.max_trans);
    let pass = witness_deflection(&problem, &witness).max(core_defl);
    let fail = build_bottleneck(&problem, &core);
    let tol = if fail > pass { (pass * fail).sqrt() } else { pass * 1.01 };
    Ok((tol, pass, fail))
}

/// Pass/fail deflections of the cantilever gadget used for its tolerance.
pub fn cantilever_margins(k: usize) -> (f64, f64, f64) {
    gadget_probe(k, GADGET_BEAM_H).expect("gadget is a valid frame")
}

#[doc(hidden)]
pub fn cantilever_margins_with(k: usize, beam_h: usize) -> (f64, f64, f64) {
    gadget_probe(k, beam_h).expect("gadget is a valid frame")
}

/// Barrel of semicircular arches joined by transverse beams.
pub fn arch(arches: usize, segments: usize, rng: &mut ChaCha8Rng) -> Result<GeneratedProblem, FrameError> {
    assert!(arches >= 1 && segments >= 2);
    let mut d = Draft::new();
    let radius = segments as f64 * SPACING / std::f64::consts::PI * (1.0 + jitter(rng, 0.05));
    let gap = 1.5 * SPACING;
    let mut rows = Vec::new();
    for a in 0..arches {
        let y = a as f64 * gap;
        let row: Vec<usize> = (0..=segments)
            .map(|i| {
                let t = std::f64::consts::PI * i as f64 / segments as f64;
                let p = Vec3::new(radius * (1.0 - t.cos()), y, radius * t.sin());
                if i == 0 || i == segments {
                    d.ground_node(Vec3::new(p.x, p.y, 0.0))
                } else {
                    d.node(p)
                }
            })
            .collect();
        rows.push(row);
    }
    let mut ribs = Vec::new();
    for row in &rows {
        ribs.push((0..segments).map(|i| d.element(row[i], row[i + 1])).collect::<Vec<_>>());
    }
    let mut ties = Vec::new();
    for a in 1..arches {
        ties.push((1..segments).map(|i| d.element(rows[a - 1][i], rows[a][i])).collect::<Vec<_>>());
    }
    // build every arch from both feet toward the crown, tying as we go
    let mut placed = vec![vec![false; segments + 1]; arches];
    for row in placed.iter_mut() {
        row[0] = true;
        row[segments] = true;
    }
    let (mut lo, mut hi) = (0usize, segments);
    let mut from_left = true;
    while lo < hi {
        let seg = if from_left {
            lo += 1;
            lo - 1
        } else {
            hi -= 1;
            hi
        };
        let node = if from_left { seg + 1 } else { seg };
        for a in 0..arches {
            d.witness.push(ribs[a][seg]);
            if !placed[a][node] {
                placed[a][node] = true;
                if a > 0 {
                    d.witness.push(ties[a - 1][node - 1]);
                }
            }
        }
        from_left = !from_left;
    }
    let (problem, witness) = d.build(4.0)?;
    Ok(GeneratedProblem { name: format!("arch_{arches}x{segments}"), family: Family::Arch, problem, witness })
}

/// Vertical ring spacing of the cage.
const CAGE_LEVEL: f64 = SPACING;

/// Square cage of corner columns and rings with an X-shaped lid and a short
/// element hanging from the lid centre. The tool is fat enough that a closed
/// wall stops it, so the hanging element must be extruded through a gap in
/// the top ring, before that ring is closed.
pub fn cage(levels: usize, rng: &mut ChaCha8Rng) -> Result<GeneratedProblem, FrameError> {
    assert!(levels >= 2);
    let mut d = Draft::new();
    let a = 3.0 * SPACING;
    let h = levels as f64 * CAGE_LEVEL;
    let clearance = 0.55 * CAGE_LEVEL;
    let hang = 0.1 * CAGE_LEVEL;
    let corners = [(0.0, 0.0), (a, 0.0), (a, a), (0.0, a)];
    let mut prev: Vec<usize> = corners.iter().map(|&(x, y)| d.ground_node(Vec3::new(x, y, 0.0))).collect();
    let mut columns = Vec::new();
    let mut rings = Vec::new();
    let mut top = Vec::new();
    for k in 1..=levels {
        let z = k as f64 * CAGE_LEVEL;
        let cur: Vec<usize> = corners.iter().map(|&(x, y)| d.node(Vec3::new(x, y, z))).collect();
        columns.push((0..4).map(|c| d.element(prev[c], cur[c])).collect::<Vec<_>>());
        rings.push((0..4).map(|c| d.element(cur[c], cur[(c + 1) % 4])).collect::<Vec<_>>());
        top = cur.clone();
        prev = cur;
    }
    let centre = d.node(Vec3::new(a / 2.0, a / 2.0, h));
    let lid: Vec<usize> = (0..4).map(|c| d.element(top[c], centre)).collect();
    let tail = d.node(Vec3::new(a / 2.0, a / 2.0, h - hang));
    let hanging = d.element(centre, tail);
    let open = rng.random_range(0..4usize);
    for k in 0..levels {
        d.witness.extend(&columns[k]);
        let last = k + 1 == levels;
        d.witness.extend(rings[k].iter().enumerate().filter(|(c, _)| !(last && *c == open)).map(|(_, e)| *e));
    }
    d.witness.extend(&lid);
    d.witness.push(hanging);
    d.witness.push(rings[levels - 1][open]);
    let tool_radius = clearance - ELEMENT_RADIUS;
    d.tool = Some(ToolSpec { length: 2.0 * (a + h), radius: tool_radius, contact_radius: 2.0 * clearance });
    let (problem, witness) = d.build(4.0)?;
    Ok(GeneratedProblem { name: format!("cage_{levels}"), family: Family::Cage, problem, witness })
}

/// Generate one problem of `family` with the given size parameters.
pub fn generate(family: Family, size: &[usize], rng: &mut ChaCha8Rng) -> Result<GeneratedProblem, FrameError> {
    let arg = |i: usize, default: usize| size.get(i).copied().unwrap_or(default);
    match family {
        Family::Tower => tower(arg(0, 3), arg(1, 3), arg(2, 4), rng),
        Family::Pyramid => pyramid(arg(0, 4), rng),
        Family::CantileverTies => cantilever_ties(arg(0, 4), arg(1, 3), rng),
        Family::Arch => arch(arg(0, 3), arg(1, 10), rng),
        Family::Cage => cage(arg(0, 3), rng),
    }
}

pub fn generate_benchmark(spec: &BenchmarkSpec) -> Result<Vec<GeneratedProblem>, FrameError> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    (0..spec.count)
        .map(|i| {
            let mut g = generate(spec.family, &spec.size, &mut rng)?;
            if spec.count > 1 {
                g.name = format!("{}_{i}", g.name);
            }
            Ok(g)
        })
        .collect()
}

/// Size parameters of the desk suite: five problems per family, 20 to 200
/// elements.
pub const DESK_SIZES: [(Family, &[usize]); 20] = [
    (Family::Tower, &[2, 2, 3]),
    (Family::Tower, &[3, 3, 2]),
    (Family::Tower, &[3, 3, 4]),
    (Family::Tower, &[3, 4, 5]),
    (Family::Tower, &[4, 4, 4]),
    (Family::Pyramid, &[3]),
    (Family::Pyramid, &[4]),
    (Family::Pyramid, &[4]),
    (Family::Pyramid, &[5]),
    (Family::Pyramid, &[5]),
    (Family::CantileverTies, &[2, 3]),
    (Family::CantileverTies, &[4, 3]),
    (Family::CantileverTies, &[6, 3]),
    (Family::CantileverTies, &[10, 3]),
    (Family::CantileverTies, &[14, 3]),
    (Family::Arch, &[2, 8]),
    (Family::Arch, &[3, 10]),
    (Family::Arch, &[4, 12]),
    (Family::Arch, &[5, 14]),
    (Family::Arch, &[6, 16]),
];

/// The desk benchmark suite.
pub fn desk_suite(seed: u64) -> Vec<GeneratedProblem> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DESK_SIZES
        .iter()
        .enumerate()
        .map(|(i, (family, size))| {
            let mut g = generate(*family, size, &mut rng).expect("desk suite generators produce valid frames");
            g.name = format!("{:02}_{}", i, g.name);
            g
        })
        .collect()
}

/// Geometric-trap problems for the lookahead comparison.
pub fn trap_suite(seed: u64, count: usize) -> Vec<GeneratedProblem> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let mut g = cage(2 + i % 2, &mut rng).expect("cage is a valid frame");
            g.name = format!("{:02}_{}", i, g.name);
            g
        })
        .collect()
}
