//! Distances, the extruder tool model, collision checking against printed
//! elements, and extrusion orientation sampling.

use nalgebra::{UnitQuaternion, Vector3};
use rand::Rng;
use rand_distr::{Distribution, UnitSphere};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::frame::{DirectedElement, ElementId, ElementSet, FrameError, FrameProblem, NodeId, Vec3};
use crate::kinematics::{Configuration, KinematicModel};

/// World-from-tool rotation; the tool z-axis in world is `x_o·(0,0,1)`.
pub type Orientation = UnitQuaternion<f64>;

/// Axis-aligned box.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AabbRecord {
    min: [f64; 3],
    max: [f64; 3],
}

impl Serialize for Aabb {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        AabbRecord { min: self.min.into(), max: self.max.into() }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Aabb {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let r = AabbRecord::deserialize(d)?;
        let b = Aabb { min: r.min.into(), max: r.max.into() };
        if !(b.min.iter().chain(b.max.iter()).all(|c| c.is_finite()) && b.min.iter().zip(b.max.iter()).all(|(a, c)| a <= c)) {
            return Err(serde::de::Error::custom("box needs finite min <= max"));
        }
        Ok(b)
    }
}

impl Aabb {
    pub fn new(min: Vec3, max: Vec3) -> Self {
        Aabb { min, max }
    }

    pub fn empty() -> Self {
        Aabb { min: Vec3::repeat(f64::INFINITY), max: Vec3::repeat(f64::NEG_INFINITY) }
    }

    pub fn from_points<'a>(points: impl IntoIterator<Item = &'a Vec3>) -> Self {
        let mut b = Self::empty();
        for p in points {
            b.grow_to(p);
        }
        b
    }

    pub fn grow_to(&mut self, p: &Vec3) {
        self.min = self.min.inf(p);
        self.max = self.max.sup(p);
    }

    pub fn union(&self, other: &Aabb) -> Aabb {
        Aabb { min: self.min.inf(&other.min), max: self.max.sup(&other.max) }
    }

    pub fn inflate(&self, r: f64) -> Aabb {
        Aabb { min: self.min - Vec3::repeat(r), max: self.max + Vec3::repeat(r) }
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        (0..3).all(|k| self.min[k] <= p[k] && p[k] <= self.max[k])
    }

    pub fn contains_box(&self, other: &Aabb) -> bool {
        (0..3).all(|k| self.min[k] <= other.min[k] && other.max[k] <= self.max[k])
    }

    pub fn overlaps(&self, other: &Aabb) -> bool {
        (0..3).all(|k| self.min[k] <= other.max[k] && other.min[k] <= self.max[k])
    }

    pub fn center(&self) -> Vec3 {
        (self.min + self.max) * 0.5
    }

    pub fn extent(&self) -> Vec3 {
        self.max - self.min
    }

    pub fn distance_to_point(&self, p: &Vec3) -> f64 {
        let mut d2 = 0.0;
        for k in 0..3 {
            let v = if p[k] < self.min[k] {
                self.min[k] - p[k]
            } else if p[k] > self.max[k] {
                p[k] - self.max[k]
            } else {
                0.0
            };
            d2 += v * v;
        }
        d2.sqrt()
    }

    pub fn sample(&self, rng: &mut (impl Rng + ?Sized)) -> Vec3 {
        Vec3::from_fn(|k, _| {
            if self.max[k] > self.min[k] {
                rng.random_range(self.min[k]..=self.max[k])
            } else {
                self.min[k]
            }
        })
    }
}

/// Segment with a radius: a cylinder with hemispherical caps.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Capsule {
    pub a: Vec3,
    pub b: Vec3,
    pub radius: f64,
}

impl Capsule {
    pub fn new(a: Vec3, b: Vec3, radius: f64) -> Self {
        Capsule { a, b, radius }
    }

    pub fn aabb(&self) -> Aabb {
        Aabb { min: self.a.inf(&self.b), max: self.a.sup(&self.b) }.inflate(self.radius)
    }

    /// Surface distance; zero when the capsules touch or overlap.
    pub fn distance(&self, other: &Capsule) -> f64 {
        (segment_distance(self.a, self.b, other.a, other.b) - self.radius - other.radius).max(0.0)
    }

    pub fn intersects(&self, other: &Capsule) -> bool {
        segment_distance(self.a, self.b, other.a, other.b) < self.radius + other.radius
    }

    pub fn intersects_box(&self, b: &Aabb) -> bool {
        segment_box_distance(self.a, self.b, b) < self.radius
    }

    pub fn point_at(&self, t: f64) -> Vec3 {
        self.a + (self.b - self.a) * t
    }
}

/// Parameters `(s, t)` of the closest points `p1 + s(q1 − p1)` and
/// `p2 + t(q2 − p2)` between two segments.
pub fn closest_segment_params(p1: Vec3, q1: Vec3, p2: Vec3, q2: Vec3) -> (f64, f64) {
    const TINY: f64 = 1e-30;
    let d1 = q1 - p1;
    let d2 = q2 - p2;
    let r = p1 - p2;
    let a = d1.dot(&d1);
    let e = d2.dot(&d2);
    let f = d2.dot(&r);
    if a <= TINY && e <= TINY {
        return (0.0, 0.0);
    }
    if a <= TINY {
        return (0.0, (f / e).clamp(0.0, 1.0));
    }
    let c = d1.dot(&r);
    if e <= TINY {
        return ((-c / a).clamp(0.0, 1.0), 0.0);
    }
    let b = d1.dot(&d2);
    let denom = a * e - b * b;
    let mut s = if denom > TINY * a * e { ((b * f - c * e) / denom).clamp(0.0, 1.0) } else { 0.0 };
    let mut t = (b * s + f) / e;
    if t < 0.0 {
        t = 0.0;
        s = (-c / a).clamp(0.0, 1.0);
    } else if t > 1.0 {
        t = 1.0;
        s = ((b - c) / a).clamp(0.0, 1.0);
    }
    (s, t)
}

pub fn segment_distance(p1: Vec3, q1: Vec3, p2: Vec3, q2: Vec3) -> f64 {
    let (s, t) = closest_segment_params(p1, q1, p2, q2);
    ((p1 + (q1 - p1) * s) - (p2 + (q2 - p2) * t)).norm()
}

pub fn point_segment_distance(p: Vec3, a: Vec3, b: Vec3) -> f64 {
    let d = b - a;
    let len2 = d.norm_squared();
    let t = if len2 > 0.0 { ((p - a).dot(&d) / len2).clamp(0.0, 1.0) } else { 0.0 };
    (p - (a + d * t)).norm()
}

/// Distance from a segment to a box. The point-to-box distance is convex
/// along the segment, so a golden-section search finds its minimum.
pub fn segment_box_distance(a: Vec3, b: Vec3, bx: &Aabb) -> f64 {
    let f = |t: f64| bx.distance_to_point(&(a + (b - a) * t));
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (mut lo, mut hi) = (0.0, 1.0);
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..90 {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2);
        }
        if f1 == 0.0 || f2 == 0.0 {
            return 0.0;
        }
    }
    f(0.0).min(f(1.0)).min(f1).min(f2)
}

/// Extruder tool body: a capsule from the nozzle tip back along the tool −z axis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToolSpec {
    pub length: f64,
    pub radius: f64,
    /// Radius around the endpoints of the element being extruded inside
    /// which contact with incident printed elements is allowed.
    pub contact_radius: f64,
}

impl ToolSpec {
    /// Desk-scale defaults sized from the element radius.
    pub fn default_for(element_radius: f64) -> Self {
        let radius = 4.0 * element_radius;
        ToolSpec { length: 60.0 * element_radius, radius, contact_radius: 1.5 * (radius + element_radius) }
    }

    pub fn check(&self) -> Result<(), FrameError> {
        if !(self.length.is_finite() && self.length > 0.0) {
            return Err(FrameError::NonPositive("tool.length".into()));
        }
        if !(self.radius.is_finite() && self.radius > 0.0) {
            return Err(FrameError::NonPositive("tool.radius".into()));
        }
        if !(self.contact_radius.is_finite() && self.contact_radius >= 0.0) {
            return Err(FrameError::NonPositive("tool.contact_radius (nonnegative)".into()));
        }
        Ok(())
    }
}

pub fn tool_axis(x_o: &Orientation) -> Vec3 {
    x_o * Vector3::z()
}

/// True iff `(p_end − p_start) · z_tool ≤ 0`.
pub fn orientation_feasible(problem: &FrameProblem, e: &DirectedElement, x_o: &Orientation) -> bool {
    direction_feasible(&(problem.position(e.end) - problem.position(e.start)), x_o)
}

pub fn direction_feasible(direction: &Vec3, x_o: &Orientation) -> bool {
    direction.dot(&tool_axis(x_o)) <= 0.0
}

/// Orientation whose z-axis is `axis`, rolled by `roll` about it.
pub fn orientation_with_axis(axis: &Vec3, roll: f64) -> Orientation {
    let z = axis.normalize();
    let base = UnitQuaternion::rotation_between(&Vector3::z(), &z)
        .unwrap_or_else(|| UnitQuaternion::from_axis_angle(&Vector3::x_axis(), std::f64::consts::PI));
    UnitQuaternion::from_axis_angle(&nalgebra::Unit::new_unchecked(z), roll) * base
}

/// Uniform sample from the orientations whose tool axis lies in the closed
/// hemisphere opposite the extrusion direction (uniform axis on the
/// hemisphere, uniform roll about it).
pub fn sample_orientation(problem: &FrameProblem, e: &DirectedElement, rng: &mut (impl Rng + ?Sized)) -> Orientation {
    sample_orientation_dir(&(problem.position(e.end) - problem.position(e.start)), rng)
}

pub fn sample_orientation_dir(direction: &Vec3, rng: &mut (impl Rng + ?Sized)) -> Orientation {
    let v: [f64; 3] = UnitSphere.sample(rng);
    let mut axis = Vec3::from(v);
    if axis.dot(direction) > 0.0 {
        axis = -axis;
    }
    let roll = rng.random_range(0.0..std::f64::consts::TAU);
    orientation_with_axis(&axis, roll)
}

/// Uniform orientation over SO(3).
pub fn sample_any_orientation(rng: &mut (impl Rng + ?Sized)) -> Orientation {
    loop {
        let q: [f64; 4] = std::array::from_fn(|_| rng.sample(rand_distr::StandardNormal));
        let n = q.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-6 {
            return UnitQuaternion::from_quaternion(nalgebra::Quaternion::new(q[0], q[1], q[2], q[3]));
        }
    }
}

/// `r(n, x_o) = p_n + x_o·(0, 0, −ρ)`.
pub fn retraction_point(p: &Vec3, x_o: &Orientation, rho: f64) -> Vec3 {
    p + x_o * Vector3::new(0.0, 0.0, -rho)
}

pub fn retraction_of(problem: &FrameProblem, n: NodeId, x_o: &Orientation) -> Vec3 {
    retraction_point(&problem.position(n), x_o, problem.tolerances.retraction)
}

#[derive(Clone, Debug)]
struct BvhNode {
    bounds: Aabb,
    /// Children for inner nodes, element range for leaves.
    left: usize,
    right: usize,
    start: usize,
    count: usize,
}

/// Static AABB tree over all element capsules.
#[derive(Clone, Debug)]
pub struct StaticBvh {
    nodes: Vec<BvhNode>,
    order: Vec<usize>,
    boxes: Vec<Aabb>,
}

const LEAF_SIZE: usize = 2;

impl StaticBvh {
    pub fn build(boxes: Vec<Aabb>) -> Self {
        let mut bvh = StaticBvh { nodes: Vec::new(), order: (0..boxes.len()).collect(), boxes };
        if !bvh.boxes.is_empty() {
            bvh.build_node(0, bvh.boxes.len());
        }
        bvh
    }

    fn build_node(&mut self, start: usize, end: usize) -> usize {
        let bounds = self.order[start..end].iter().fold(Aabb::empty(), |b, &i| b.union(&self.boxes[i]));
        let idx = self.nodes.len();
        self.nodes.push(BvhNode { bounds, left: 0, right: 0, start, count: end - start });
        if end - start > LEAF_SIZE {
            let centers = Aabb::from_points(self.order[start..end].iter().map(|&i| self.boxes[i].center()).collect::<Vec<_>>().iter());
            let ext = centers.extent();
            let axis = if ext.x >= ext.y && ext.x >= ext.z { 0 } else if ext.y >= ext.z { 1 } else { 2 };
            let boxes = &self.boxes;
            self.order[start..end].sort_by(|&a, &b| {
                boxes[a].center()[axis].total_cmp(&boxes[b].center()[axis]).then(a.cmp(&b))
            });
            let mid = (start + end) / 2;
            let left = self.build_node(start, mid);
            let right = self.build_node(mid, end);
            let node = &mut self.nodes[idx];
            node.left = left;
            node.right = right;
            node.count = 0;
        }
        idx
    }

    pub fn len(&self) -> usize {
        self.boxes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.boxes.is_empty()
    }

    pub fn root_bounds(&self) -> Option<Aabb> {
        self.nodes.first().map(|n| n.bounds)
    }

    pub fn leaf_box(&self, i: usize) -> &Aabb {
        &self.boxes[i]
    }

    /// Visit every item whose box overlaps `query` until `hit` returns true.
    pub fn any(&self, query: &Aabb, mut hit: impl FnMut(usize) -> bool) -> bool {
        if self.nodes.is_empty() {
            return false;
        }
        let mut stack = vec![0usize];
        while let Some(k) = stack.pop() {
            let node = &self.nodes[k];
            if !node.bounds.overlaps(query) {
                continue;
            }
            if node.count > 0 {
                for &i in &self.order[node.start..node.start + node.count] {
                    if self.boxes[i].overlaps(query) && hit(i) {
                        return true;
                    }
                }
            } else {
                stack.push(node.right);
                stack.push(node.left);
            }
        }
        false
    }

    /// Check that every item box lies inside its leaf and all ancestors.
    pub fn is_consistent(&self) -> bool {
        fn walk(b: &StaticBvh, k: usize, ancestors: &mut Vec<Aabb>) -> bool {
            let node = &b.nodes[k];
            ancestors.push(node.bounds);
            let ok = if node.count > 0 {
                b.order[node.start..node.start + node.count]
                    .iter()
                    .all(|&i| ancestors.iter().all(|a| a.contains_box(&b.boxes[i])))
            } else {
                walk(b, node.left, ancestors) && walk(b, node.right, ancestors)
            };
            ancestors.pop();
            ok
        }
        self.nodes.is_empty() || walk(self, 0, &mut Vec::new())
    }
}

/// Height below which the tool axis is considered to penetrate the ground.
pub const GROUND_TOLERANCE: f64 = 1e-9;

/// Collision model for one problem: element capsules, their BVH, the tool
/// and the static environment.
pub struct CollisionWorld<'a> {
    problem: &'a FrameProblem,
    capsules: Vec<Capsule>,
    bvh: StaticBvh,
    /// Maximum motion of any tool point between consecutive checked poses.
    pub step: f64,
}

impl<'a> CollisionWorld<'a> {
    pub fn new(problem: &'a FrameProblem) -> Self {
        let capsules: Vec<Capsule> = problem
            .element_ids()
            .map(|e| {
                let (a, b) = problem.endpoints(e);
                Capsule::new(a, b, problem.element_radius(e))
            })
            .collect();
        let bvh = StaticBvh::build(capsules.iter().map(Capsule::aabb).collect());
        let step = problem.min_element_radius().min(problem.tool.radius) / 2.0;
        CollisionWorld { problem, capsules, bvh, step }
    }

    pub fn problem(&self) -> &'a FrameProblem {
        self.problem
    }

    pub fn bvh(&self) -> &StaticBvh {
        &self.bvh
    }

    pub fn capsule(&self, e: ElementId) -> &Capsule {
        &self.capsules[e.0]
    }

    pub fn tool_capsule(&self, q: &Configuration) -> Capsule {
        let tip = q.position;
        let back = tip - tool_axis(&q.orientation) * self.problem.tool.length;
        Capsule::new(tip, back, self.problem.tool.radius)
    }

    /// Ground plane and static obstacles.
    pub fn environment_collides(&self, tool: &Capsule) -> bool {
        if tool.a.z.min(tool.b.z) < -GROUND_TOLERANCE {
            return true;
        }
        self.problem.obstacles.iter().any(|o| tool.intersects_box(o))
    }

    /// Element capsule as seen by the tool while `exempt` is being
    /// extruded: `exempt` itself vanishes and printed elements sharing one
    /// of its nodes lose the part within the contact radius of that node.
    fn effective_capsule(&self, f: usize, exempt: Option<ElementId>) -> Option<Capsule> {
        let cap = self.capsules[f];
        let Some(e) = exempt else { return Some(cap) };
        if e.0 == f {
            return None;
        }
        let en = self.problem.element(e).nodes;
        let fnodes = self.problem.element(ElementId(f)).nodes;
        let rc = self.problem.tool.contact_radius;
        let len = (cap.b - cap.a).norm();
        let dir = (cap.b - cap.a) / len;
        let (mut a, mut b) = (cap.a, cap.b);
        if en.contains(&fnodes[0]) {
            if len <= rc {
                return None;
            }
            a += dir * rc;
        }
        if en.contains(&fnodes[1]) {
            if len <= rc {
                return None;
            }
            b -= dir * rc;
        }
        Some(Capsule::new(a, b, cap.radius))
    }

    pub fn tool_collides(&self, q: &Configuration, printed: &ElementSet) -> bool {
        self.tool_collides_except(q, printed, None)
    }

    pub fn tool_collides_except(&self, q: &Configuration, printed: &ElementSet, exempt: Option<ElementId>) -> bool {
        let tool = self.tool_capsule(q);
        if self.environment_collides(&tool) {
            return true;
        }
        self.bvh.any(&tool.aabb(), |f| {
            printed.contains(f) && self.effective_capsule(f, exempt).is_some_and(|c| tool.intersects(&c))
        })
    }

    /// Reference implementation without the BVH.
    pub fn brute_force_collides(&self, q: &Configuration, printed: &ElementSet, exempt: Option<ElementId>) -> bool {
        let tool = self.tool_capsule(q);
        if self.environment_collides(&tool) {
            return true;
        }
        printed.iter().any(|f| self.effective_capsule(f, exempt).is_some_and(|c| tool.intersects(&c)))
    }

    /// Upper bound on the distance any tool point moves between two poses.
    pub fn pose_motion(&self, q1: &Configuration, q2: &Configuration) -> f64 {
        (q2.position - q1.position).norm() + self.problem.tool.length * q1.orientation.angle_to(&q2.orientation)
    }

    /// Sample each segment of `waypoints` so consecutive poses move at most
    /// `step`; every sample must be reachable and collision-free against
    /// `printed` (minus the exemption).
    pub fn trajectory_safe(
        &self,
        model: &dyn KinematicModel,
        waypoints: &[Configuration],
        printed: &ElementSet,
        ignore: Option<ElementId>,
    ) -> bool {
        let Some(first) = waypoints.first() else { return false };
        if !self.config_safe(model, first, printed, ignore) {
            return false;
        }
        waypoints.windows(2).all(|w| self.segment_safe(model, &w[0], &w[1], printed, ignore))
    }

    fn config_safe(&self, model: &dyn KinematicModel, q: &Configuration, printed: &ElementSet, ignore: Option<ElementId>) -> bool {
        model.is_valid(q) && !self.tool_collides_except(q, printed, ignore)
    }

    /// Checks the interior and the far end of one segment.
    pub fn segment_safe(
        &self,
        model: &dyn KinematicModel,
        a: &Configuration,
        b: &Configuration,
        printed: &ElementSet,
        ignore: Option<ElementId>,
    ) -> bool {
        let steps = (self.pose_motion(a, b) / self.step).ceil().max(1.0) as usize;
        (1..=steps).all(|k| {
            let q = model.interpolate(a, b, k as f64 / steps as f64);
            self.config_safe(model, &q, printed, ignore)
        })
    }
}
