//! Frame problem model: nodes, elements, ground, material, tolerances, and the
//! structural-graph utilities shared by the planners.

use std::collections::{HashSet, VecDeque};
use std::fmt;
use std::path::Path;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Aabb, ToolSpec};
use crate::kinematics::Configuration;
use crate::stiffness::{StiffnessChecker, StiffnessVerdict};

pub type Vec3 = Vector3<f64>;

/// Index of a node in [`FrameProblem::nodes`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub usize);

/// Index of an element in [`FrameProblem::elements`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ElementId(pub usize);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

impl fmt::Display for ElementId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "e{}", self.0)
    }
}

/// Fixed-capacity bit set over dense ids. Used as the canonical key for
/// partial structures (sorted, hashable, cheap to compare).
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BitSet {
    words: Vec<u64>,
    capacity: usize,
}

impl BitSet {
    pub fn empty(capacity: usize) -> Self {
        BitSet { words: vec![0; capacity.div_ceil(64)], capacity }
    }

    pub fn full(capacity: usize) -> Self {
        let mut s = Self::empty(capacity);
        for i in 0..capacity {
            s.insert(i);
        }
        s
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn insert(&mut self, i: usize) -> bool {
        assert!(i < self.capacity, "bit {i} out of range {}", self.capacity);
        let (w, b) = (i / 64, i % 64);
        let was = self.words[w] >> b & 1 == 1;
        self.words[w] |= 1 << b;
        !was
    }

    pub fn remove(&mut self, i: usize) -> bool {
        if i >= self.capacity {
            return false;
        }
        let (w, b) = (i / 64, i % 64);
        let was = self.words[w] >> b & 1 == 1;
        self.words[w] &= !(1 << b);
        was
    }

    #[inline]
    pub fn contains(&self, i: usize) -> bool {
        i < self.capacity && self.words[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn len(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn is_full(&self) -> bool {
        self.len() == self.capacity
    }

    pub fn is_subset(&self, other: &BitSet) -> bool {
        self.words.iter().zip(&other.words).all(|(a, b)| a & !b == 0)
    }

    pub fn intersects(&self, other: &BitSet) -> bool {
        self.words.iter().zip(&other.words).any(|(a, b)| a & b != 0)
    }

    pub fn with(&self, i: usize) -> Self {
        let mut s = self.clone();
        s.insert(i);
        s
    }

    pub fn without(&self, i: usize) -> Self {
        let mut s = self.clone();
        s.remove(i);
        s
    }

    /// Ascending iteration over members.
    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut bits = w;
            std::iter::from_fn(move || {
                if bits == 0 {
                    return None;
                }
                let b = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                Some(wi * 64 + b)
            })
        })
    }
}

impl fmt::Debug for BitSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

/// Set of element ids; the printed set `P` of a partial structure.
pub type ElementSet = BitSet;

/// Linear elastic material and cross-section shared by the frame's elements.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Material {
    /// Young's modulus (Pa).
    #[serde(rename = "E")]
    pub youngs_modulus: f64,
    /// Shear modulus (Pa).
    #[serde(rename = "G")]
    pub shear_modulus: f64,
    /// Mass density (kg/m³).
    pub density: f64,
    /// Cross-section area (m²).
    pub area: f64,
    #[serde(rename = "Iy")]
    pub iy: f64,
    #[serde(rename = "Iz")]
    pub iz: f64,
    /// Torsion constant (m⁴).
    #[serde(rename = "J")]
    pub torsion: f64,
    /// Gravitational acceleration (m/s²).
    pub g: f64,
}

impl Material {
    /// Solid circular section of the given radius.
    pub fn circular(youngs_modulus: f64, shear_modulus: f64, density: f64, radius: f64) -> Self {
        let area = std::f64::consts::PI * radius * radius;
        let i = std::f64::consts::PI * radius.powi(4) / 4.0;
        Material {
            youngs_modulus,
            shear_modulus,
            density,
            area,
            iy: i,
            iz: i,
            torsion: 2.0 * i,
            g: 9.81,
        }
    }

    fn check(&self) -> Result<(), FrameError> {
        let fields = [
            ("E", self.youngs_modulus),
            ("G", self.shear_modulus),
            ("density", self.density),
            ("area", self.area),
            ("Iy", self.iy),
            ("Iz", self.iz),
            ("J", self.torsion),
            ("g", self.g),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return Err(FrameError::NonPositive(format!("material.{name}")));
            }
        }
        Ok(())
    }
}

/// Planning tolerances.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Maximum nodal translation (m).
    pub trans: f64,
    /// Maximum nodal rotation (rad); absent means unlimited.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rot: Option<f64>,
    /// Maximum constraint violation of extrusion trajectories.
    pub eps: f64,
    /// Retraction distance ρ (m).
    pub retraction: f64,
}

impl Tolerances {
    pub fn rot_limit(&self) -> f64 {
        self.rot.unwrap_or(f64::INFINITY)
    }
}

/// A straight element between two distinct nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct Element {
    pub nodes: [NodeId; 2],
    /// Per-element cylinder radius override.
    pub radius: Option<f64>,
    /// Per-element material override.
    pub material: Option<Material>,
}

impl Element {
    pub fn touches(&self, n: NodeId) -> bool {
        self.nodes[0] == n || self.nodes[1] == n
    }

    pub fn other(&self, n: NodeId) -> NodeId {
        if self.nodes[0] == n {
            self.nodes[1]
        } else {
            self.nodes[0]
        }
    }
}

/// Element extruded from `start` to `end`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DirectedElement {
    pub element: ElementId,
    pub start: NodeId,
    pub end: NodeId,
}

#[derive(Debug, Error)]
pub enum FrameError {
    #[error("i/o error reading {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("problem has no nodes")]
    NoNodes,
    #[error("node {0} has a non-finite coordinate")]
    NonFinite(usize),
    #[error("{0} must be strictly positive")]
    NonPositive(String),
    #[error("problem has no ground nodes")]
    NoGround,
    #[error("ground references unknown node {0}")]
    UnknownGroundNode(usize),
    #[error("element {element} references unknown node {node} (problem has {count} nodes)")]
    UnknownNode { element: usize, node: usize, count: usize },
    #[error("element {0} connects a node to itself")]
    SelfLoop(usize),
    #[error("element {element} duplicates element {first}")]
    DuplicateElement { element: usize, first: usize },
    #[error("element {0} has nonpositive length")]
    ZeroLength(usize),
    #[error("element {0} is not grounded: not transitively connected to any ground node")]
    NotGrounded(usize),
    #[error("start configuration lies outside the workspace")]
    StartOutsideWorkspace,
}

/// A validated extrusion planning problem. Immutable after construction.
#[derive(Clone, Debug)]
pub struct FrameProblem {
    pub nodes: Vec<Vec3>,
    pub elements: Vec<Element>,
    pub ground: Vec<NodeId>,
    pub material: Material,
    pub radius: f64,
    pub q0: Configuration,
    pub tolerances: Tolerances,
    pub tool: ToolSpec,
    pub workspace: Aabb,
    pub obstacles: Vec<Aabb>,
    /// Weight (m/rad) of orientation in the configuration distance.
    pub rot_weight: f64,
    ground_mask: Vec<bool>,
    incidence: Vec<Vec<ElementId>>,
    workspace_given: bool,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum ElementRecord {
    Pair([usize; 2]),
    Detailed {
        nodes: [usize; 2],
        #[serde(default, skip_serializing_if = "Option::is_none")]
        radius: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        material: Option<Material>,
    },
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProblemFile {
    nodes: Vec<[f64; 3]>,
    elements: Vec<ElementRecord>,
    ground: Vec<usize>,
    material: Material,
    radius: f64,
    q0: Configuration,
    tolerances: Tolerances,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tool: Option<ToolSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    workspace: Option<Aabb>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    obstacles: Vec<Aabb>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rot_weight: Option<f64>,
}

pub const DEFAULT_ROT_WEIGHT: f64 = 0.1;

/// Read and validate a problem file.
pub fn load_problem(path: impl AsRef<Path>) -> Result<FrameProblem, FrameError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|source| FrameError::Io { path: path.display().to_string(), source })?;
    FrameProblem::from_json(&text)
}

impl FrameProblem {
    /// Parse and validate the problem JSON schema.
    pub fn from_json(text: &str) -> Result<Self, FrameError> {
        let file: ProblemFile = serde_json::from_str(text)?;
        Self::from_file(file)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("problem serializes")
    }

    /// Build and validate a problem from raw parts; `tool` and `workspace`
    /// fall back to defaults derived from the geometry.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        nodes: Vec<Vec3>,
        elements: Vec<[usize; 2]>,
        ground: Vec<usize>,
        material: Material,
        radius: f64,
        q0: Configuration,
        tolerances: Tolerances,
        tool: Option<ToolSpec>,
    ) -> Result<Self, FrameError> {
        Self::from_file(ProblemFile {
            nodes: nodes.iter().map(|p| [p.x, p.y, p.z]).collect(),
            elements: elements.into_iter().map(ElementRecord::Pair).collect(),
            ground,
            material,
            radius,
            q0,
            tolerances,
            tool,
            workspace: None,
            obstacles: Vec::new(),
            rot_weight: None,
        })
    }

    fn from_file(file: ProblemFile) -> Result<Self, FrameError> {
        if file.nodes.is_empty() {
            return Err(FrameError::NoNodes);
        }
        let nodes: Vec<Vec3> = file.nodes.iter().map(|p| Vec3::new(p[0], p[1], p[2])).collect();
        for (i, p) in nodes.iter().enumerate() {
            if !p.iter().all(|c| c.is_finite()) {
                return Err(FrameError::NonFinite(i));
            }
        }
        file.material.check()?;
        if !(file.radius.is_finite() && file.radius > 0.0) {
            return Err(FrameError::NonPositive("radius".into()));
        }
        let tol = file.tolerances;
        if !(tol.trans > 0.0) {
            return Err(FrameError::NonPositive("tolerances.trans".into()));
        }
        if let Some(r) = tol.rot {
            if !(r > 0.0) {
                return Err(FrameError::NonPositive("tolerances.rot".into()));
            }
        }
        if !(tol.eps.is_finite() && tol.eps > 0.0) {
            return Err(FrameError::NonPositive("tolerances.eps".into()));
        }
        if !(tol.retraction.is_finite() && tol.retraction >= 0.0) {
            return Err(FrameError::NonPositive("tolerances.retraction (nonnegative)".into()));
        }
        let n = nodes.len();
        if file.ground.is_empty() {
            return Err(FrameError::NoGround);
        }
        let mut ground_mask = vec![false; n];
        for &g in &file.ground {
            if g >= n {
                return Err(FrameError::UnknownGroundNode(g));
            }
            ground_mask[g] = true;
        }
        let ground: Vec<NodeId> = (0..n).filter(|&i| ground_mask[i]).map(NodeId).collect();

        let mut elements = Vec::with_capacity(file.elements.len());
        let mut seen = std::collections::HashMap::new();
        for (k, rec) in file.elements.iter().enumerate() {
            let (pair, radius, material) = match rec {
                ElementRecord::Pair(p) => (*p, None, None),
                ElementRecord::Detailed { nodes, radius, material } => (*nodes, *radius, *material),
            };
            for &v in &pair {
                if v >= n {
                    return Err(FrameError::UnknownNode { element: k, node: v, count: n });
                }
            }
            if pair[0] == pair[1] {
                return Err(FrameError::SelfLoop(k));
            }
            let key = (pair[0].min(pair[1]), pair[0].max(pair[1]));
            if let Some(&first) = seen.get(&key) {
                return Err(FrameError::DuplicateElement { element: k, first });
            }
            seen.insert(key, k);
            if (nodes[pair[0]] - nodes[pair[1]]).norm() <= 0.0 {
                return Err(FrameError::ZeroLength(k));
            }
            if let Some(r) = radius {
                if !(r.is_finite() && r > 0.0) {
                    return Err(FrameError::NonPositive(format!("elements[{k}].radius")));
                }
            }
            if let Some(m) = &material {
                m.check()?;
            }
            elements.push(Element { nodes: [NodeId(pair[0]), NodeId(pair[1])], radius, material });
        }

        let mut incidence = vec![Vec::new(); n];
        for (k, e) in elements.iter().enumerate() {
            incidence[e.nodes[0].0].push(ElementId(k));
            incidence[e.nodes[1].0].push(ElementId(k));
        }

        let tool = file.tool.unwrap_or_else(|| ToolSpec::default_for(file.radius));
        tool.check()?;
        let workspace_given = file.workspace.is_some();
        let workspace = match file.workspace {
            Some(w) => w,
            None => default_workspace(&nodes, &tool, tol.retraction, &file.q0),
        };
        let rot_weight = file.rot_weight.unwrap_or(DEFAULT_ROT_WEIGHT);
        if !(rot_weight.is_finite() && rot_weight >= 0.0) {
            return Err(FrameError::NonPositive("rot_weight (nonnegative)".into()));
        }

        let problem = FrameProblem {
            nodes,
            elements,
            ground,
            material: file.material,
            radius: file.radius,
            q0: file.q0,
            tolerances: tol,
            tool,
            workspace,
            obstacles: file.obstacles,
            rot_weight,
            ground_mask,
            incidence,
            workspace_given,
        };
        if let Some(e) = problem.first_ungrounded(&ElementSet::full(problem.elements.len())) {
            return Err(FrameError::NotGrounded(e.0));
        }
        if !problem.workspace.contains(&problem.q0.position) {
            return Err(FrameError::StartOutsideWorkspace);
        }
        if problem.ground.iter().any(|g| problem.position(*g).z.abs() > 1e-9) {
            log::warn!("ground nodes do not lie on the z = 0 plane; height heuristics assume they do");
        }
        Ok(problem)
    }

    fn to_file(&self) -> ProblemFile {
        ProblemFile {
            nodes: self.nodes.iter().map(|p| [p.x, p.y, p.z]).collect(),
            elements: self
                .elements
                .iter()
                .map(|e| {
                    let pair = [e.nodes[0].0, e.nodes[1].0];
                    if e.radius.is_none() && e.material.is_none() {
                        ElementRecord::Pair(pair)
                    } else {
                        ElementRecord::Detailed { nodes: pair, radius: e.radius, material: e.material }
                    }
                })
                .collect(),
            ground: self.ground.iter().map(|g| g.0).collect(),
            material: self.material,
            radius: self.radius,
            q0: self.q0,
            tolerances: self.tolerances,
            tool: Some(self.tool),
            workspace: self.workspace_given.then_some(self.workspace),
            obstacles: self.obstacles.clone(),
            rot_weight: (self.rot_weight != DEFAULT_ROT_WEIGHT).then_some(self.rot_weight),
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn element_ids(&self) -> impl Iterator<Item = ElementId> {
        (0..self.elements.len()).map(ElementId)
    }

    pub fn element(&self, e: ElementId) -> &Element {
        &self.elements[e.0]
    }

    pub fn position(&self, n: NodeId) -> Vec3 {
        self.nodes[n.0]
    }

    pub fn is_ground(&self, n: NodeId) -> bool {
        self.ground_mask[n.0]
    }

    pub fn incident(&self, n: NodeId) -> &[ElementId] {
        &self.incidence[n.0]
    }

    pub fn endpoints(&self, e: ElementId) -> (Vec3, Vec3) {
        let el = self.element(e);
        (self.position(el.nodes[0]), self.position(el.nodes[1]))
    }

    pub fn length(&self, e: ElementId) -> f64 {
        let (a, b) = self.endpoints(e);
        (b - a).norm()
    }

    pub fn midpoint(&self, e: ElementId) -> Vec3 {
        let (a, b) = self.endpoints(e);
        (a + b) * 0.5
    }

    pub fn element_radius(&self, e: ElementId) -> f64 {
        self.element(e).radius.unwrap_or(self.radius)
    }

    pub fn element_material(&self, e: ElementId) -> &Material {
        self.element(e).material.as_ref().unwrap_or(&self.material)
    }

    pub fn max_element_radius(&self) -> f64 {
        self.element_ids().map(|e| self.element_radius(e)).fold(self.radius, f64::max)
    }

    pub fn min_element_radius(&self) -> f64 {
        self.element_ids().map(|e| self.element_radius(e)).fold(self.radius, f64::min)
    }

    pub fn touches_ground(&self, e: ElementId) -> bool {
        let el = self.element(e);
        self.is_ground(el.nodes[0]) || self.is_ground(el.nodes[1])
    }

    /// Direct `e` from `start`; `None` if `start` is not an endpoint.
    pub fn direct(&self, e: ElementId, start: NodeId) -> Option<DirectedElement> {
        let el = self.element(e);
        el.touches(start).then(|| DirectedElement { element: e, start, end: el.other(start) })
    }

    /// First element of `printed` that is not transitively connected to a
    /// ground node through elements of `printed`.
    pub fn first_ungrounded(&self, printed: &ElementSet) -> Option<ElementId> {
        let mut reached = vec![false; self.nodes.len()];
        let mut queue: VecDeque<NodeId> = self.ground.iter().copied().collect();
        for g in &self.ground {
            reached[g.0] = true;
        }
        let mut covered = ElementSet::empty(self.elements.len());
        while let Some(n) = queue.pop_front() {
            for &e in self.incident(n) {
                if !printed.contains(e.0) || covered.contains(e.0) {
                    continue;
                }
                covered.insert(e.0);
                let other = self.element(e).other(n);
                if !reached[other.0] {
                    reached[other.0] = true;
                    queue.push_back(other);
                }
            }
        }
        printed.iter().find(|&e| !covered.contains(e)).map(ElementId)
    }

    pub fn is_grounded(&self, printed: &ElementSet) -> bool {
        self.first_ungrounded(printed).is_none()
    }

    /// Axis-aligned bounds of the node positions.
    pub fn node_bounds(&self) -> Aabb {
        Aabb::from_points(self.nodes.iter())
    }
}

fn default_workspace(nodes: &[Vec3], tool: &ToolSpec, retraction: f64, q0: &Configuration) -> Aabb {
    let mut b = Aabb::from_points(nodes.iter());
    let margin = tool.length + retraction + tool.radius;
    b.min -= Vec3::repeat(margin);
    b.max += Vec3::repeat(margin);
    b.min.z = b.min.z.max(nodes.iter().map(|p| p.z).fold(f64::INFINITY, f64::min));
    b.grow_to(&q0.position);
    b
}

/// A set of printed elements together with the printed-node set
/// `N_P = G ∪ endpoints(P)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PartialStructure {
    printed: ElementSet,
    nodes: BitSet,
}

impl PartialStructure {
    pub fn empty(problem: &FrameProblem) -> Self {
        Self::from_set(problem, ElementSet::empty(problem.num_elements()))
    }

    pub fn full(problem: &FrameProblem) -> Self {
        Self::from_set(problem, ElementSet::full(problem.num_elements()))
    }

    pub fn from_set(problem: &FrameProblem, printed: ElementSet) -> Self {
        let mut nodes = BitSet::empty(problem.num_nodes());
        for g in &problem.ground {
            nodes.insert(g.0);
        }
        for e in printed.iter() {
            for n in problem.elements[e].nodes {
                nodes.insert(n.0);
            }
        }
        PartialStructure { printed, nodes }
    }

    pub fn from_elements(problem: &FrameProblem, elements: impl IntoIterator<Item = ElementId>) -> Self {
        let mut set = ElementSet::empty(problem.num_elements());
        for e in elements {
            set.insert(e.0);
        }
        Self::from_set(problem, set)
    }

    pub fn printed(&self) -> &ElementSet {
        &self.printed
    }

    pub fn contains(&self, e: ElementId) -> bool {
        self.printed.contains(e.0)
    }

    pub fn has_node(&self, n: NodeId) -> bool {
        self.nodes.contains(n.0)
    }

    pub fn len(&self) -> usize {
        self.printed.len()
    }

    pub fn is_empty(&self) -> bool {
        self.printed.is_empty()
    }

    pub fn elements(&self) -> impl Iterator<Item = ElementId> + '_ {
        self.printed.iter().map(ElementId)
    }

    pub fn with(&self, problem: &FrameProblem, e: ElementId) -> Self {
        let mut next = self.clone();
        next.printed.insert(e.0);
        for n in problem.element(e).nodes {
            next.nodes.insert(n.0);
        }
        next
    }

    pub fn without(&self, problem: &FrameProblem, e: ElementId) -> Self {
        Self::from_set(problem, self.printed.without(e.0))
    }

    /// True when at least one endpoint of `e` is a printed or ground node.
    pub fn reaches(&self, problem: &FrameProblem, e: ElementId) -> bool {
        problem.element(e).nodes.iter().any(|n| self.has_node(*n))
    }
}

/// Unprinted elements with at least one endpoint on a printed or ground node.
pub fn printable_elements(problem: &FrameProblem, partial: &PartialStructure) -> Vec<ElementId> {
    problem
        .element_ids()
        .filter(|&e| !partial.contains(e) && partial.reaches(problem, e))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SequenceFailureKind {
    UnknownElement,
    /// Start/end nodes do not match the element's endpoints.
    BadDirection,
    Duplicate,
    Omission,
    Connectivity,
    Stiffness,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequenceFailure {
    pub index: usize,
    pub kind: SequenceFailureKind,
    pub detail: String,
}

/// Check that `seq` is a valid extrusion sequence: it covers every element
/// exactly once, each start node is already printed (or ground), and every
/// prefix passes the stiffness test. Returns the first failure.
pub fn is_valid_sequence(
    problem: &FrameProblem,
    seq: &[DirectedElement],
    checker: &mut StiffnessChecker,
) -> Result<(), SequenceFailure> {
    let m = problem.num_elements();
    let mut partial = PartialStructure::empty(problem);
    let mut seen = HashSet::new();
    for (i, de) in seq.iter().enumerate() {
        let fail = |kind, detail: String| Err(SequenceFailure { index: i, kind, detail });
        if de.element.0 >= m {
            return fail(SequenceFailureKind::UnknownElement, format!("{} does not exist", de.element));
        }
        let el = problem.element(de.element);
        if !(el.touches(de.start) && el.other(de.start) == de.end && de.start != de.end) {
            return fail(
                SequenceFailureKind::BadDirection,
                format!("{} is not an orientation of {}", format_directed(de), de.element),
            );
        }
        if !seen.insert(de.element) {
            return fail(SequenceFailureKind::Duplicate, format!("{} extruded twice", de.element));
        }
        if !partial.has_node(de.start) {
            return fail(
                SequenceFailureKind::Connectivity,
                format!("start node {} is neither printed nor ground", de.start),
            );
        }
        partial = partial.with(problem, de.element);
        match checker.verdict(&partial) {
            StiffnessVerdict::Stiff | StiffnessVerdict::Empty => {}
            other => {
                return fail(SequenceFailureKind::Stiffness, format!("prefix 0..={i} fails stiffness: {other:?}"))
            }
        }
    }
    if seq.len() != m || seen.len() != m {
        let missing = problem.element_ids().find(|e| !seen.contains(e));
        return Err(SequenceFailure {
            index: seq.len(),
            kind: SequenceFailureKind::Omission,
            detail: match missing {
                Some(e) => format!("{e} is never extruded"),
                None => "sequence length mismatch".into(),
            },
        });
    }
    Ok(())
}

fn format_directed(de: &DirectedElement) -> String {
    format!("<{},{}>", de.start, de.end)
}

/// Orient an undirected order by extruding each element from an endpoint
/// already present in the prefix (the lower id when both are).
pub fn orient_sequence(problem: &FrameProblem, order: &[ElementId]) -> Option<Vec<DirectedElement>> {
    let mut partial = PartialStructure::empty(problem);
    let mut out = Vec::with_capacity(order.len());
    for &e in order {
        let el = problem.element(e);
        let start = el.nodes.iter().copied().find(|n| partial.has_node(*n))?;
        out.push(problem.direct(e, start)?);
        partial = partial.with(problem, e);
    }
    Some(out)
}
