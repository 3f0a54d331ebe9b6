//! Per-element tiebreaker heuristics and the robot-free stiffness planner.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::fmt;
use std::str::FromStr;

use ordered_float::OrderedFloat;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::frame::{ElementId, FrameProblem, PartialStructure};
use crate::search::{ConsList, SearchLimits, StopWatch};
use crate::stiffness::StiffnessChecker;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeuristicKind {
    Random,
    Euclidean,
    Graph,
    #[serde(rename = "stiffplan")]
    StiffPlan,
}

impl HeuristicKind {
    pub const ALL: [HeuristicKind; 4] =
        [HeuristicKind::Random, HeuristicKind::Euclidean, HeuristicKind::Graph, HeuristicKind::StiffPlan];

    pub fn name(&self) -> &'static str {
        match self {
            HeuristicKind::Random => "random",
            HeuristicKind::Euclidean => "euclidean",
            HeuristicKind::Graph => "graph",
            HeuristicKind::StiffPlan => "stiffplan",
        }
    }
}

impl fmt::Display for HeuristicKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for HeuristicKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "random" => Ok(HeuristicKind::Random),
            "euclidean" => Ok(HeuristicKind::Euclidean),
            "graph" => Ok(HeuristicKind::Graph),
            "stiffplan" => Ok(HeuristicKind::StiffPlan),
            _ => Err(format!("unknown heuristic '{s}' (random|euclidean|graph|stiffplan)")),
        }
    }
}

/// Frozen per-element heuristic values.
#[derive(Clone, Debug, PartialEq)]
pub struct HeuristicTable {
    pub kind: HeuristicKind,
    pub values: Vec<f64>,
}

impl HeuristicTable {
    pub fn get(&self, e: ElementId) -> f64 {
        self.values[e.0]
    }
}

pub fn random_heuristic(problem: &FrameProblem, rng: &mut impl Rng) -> HeuristicTable {
    HeuristicTable { kind: HeuristicKind::Random, values: problem.element_ids().map(|_| rng.random::<f64>()).collect() }
}

/// Height of the element midpoint above the ground plane.
pub fn euclidean_dist(problem: &FrameProblem) -> HeuristicTable {
    HeuristicTable { kind: HeuristicKind::Euclidean, values: problem.element_ids().map(|e| problem.midpoint(e).z).collect() }
}

/// Shortest path length from any ground node to each node, over the frame
/// graph weighted by element length.
pub fn ground_distances(problem: &FrameProblem) -> Vec<f64> {
    let mut dist = vec![f64::INFINITY; problem.num_nodes()];
    let mut heap = BinaryHeap::new();
    for g in &problem.ground {
        dist[g.0] = 0.0;
        heap.push(Reverse((OrderedFloat(0.0), g.0)));
    }
    while let Some(Reverse((OrderedFloat(d), n))) = heap.pop() {
        if d > dist[n] {
            continue;
        }
        for &e in problem.incident(crate::frame::NodeId(n)) {
            let m = problem.element(e).other(crate::frame::NodeId(n)).0;
            let nd = d + problem.length(e);
            if nd < dist[m] {
                dist[m] = nd;
                heap.push(Reverse((OrderedFloat(nd), m)));
            }
        }
    }
    dist
}

/// Graph distance to the element midpoint, reached through the nearer endpoint.
pub fn graph_dist(problem: &FrameProblem) -> HeuristicTable {
    let dist = ground_distances(problem);
    let values = problem
        .element_ids()
        .map(|e| {
            let half = problem.length(e) / 2.0;
            let [a, b] = problem.element(e).nodes;
            dist[a.0].min(dist[b.0]) + half
        })
        .collect();
    HeuristicTable { kind: HeuristicKind::Graph, values }
}

/// Result of a robot-free stiffness sequencing search.
#[derive(Clone, Debug, PartialEq)]
pub enum StiffnessPlanOutcome {
    /// Forward element order.
    Found(Vec<ElementId>),
    /// The open list emptied: no valid sequence exists.
    Infeasible,
    /// The expansion or time limit was hit first.
    Exhausted,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct StiffnessSearchStats {
    pub expansions: u64,
    pub backtracks: u64,
    pub stiffness_checks: u64,
    pub cache_hits: u64,
    pub pruned: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

/// Greedy robot-free search keyed `(r, ±h)`, pruning on the stiffness
/// predicate. Forward mode seeds with grounded elements and adds elements;
/// backward mode starts from the full structure and removes them.
pub fn stiffness_only_search(
    problem: &FrameProblem,
    direction: Direction,
    table: &HeuristicTable,
    checker: &mut StiffnessChecker,
    limits: &SearchLimits,
) -> (StiffnessPlanOutcome, StiffnessSearchStats) {
    struct Node {
        state: std::rc::Rc<PartialStructure>,
        element: ElementId,
        order: ConsList<ElementId>,
        parent: u64,
    }
    let m = problem.num_elements();
    let sign = if direction == Direction::Forward { 1.0 } else { -1.0 };
    let mut heap: BinaryHeap<Reverse<(usize, OrderedFloat<f64>, u64)>> = BinaryHeap::new();
    let mut nodes: Vec<Option<Node>> = Vec::new();
    let push = |heap: &mut BinaryHeap<_>, nodes: &mut Vec<Option<Node>>, r: usize, node: Node| {
        let key = Reverse((r, OrderedFloat(sign * table.get(node.element)), nodes.len() as u64));
        nodes.push(Some(node));
        heap.push(key);
    };
    let mut stats = StiffnessSearchStats::default();
    let checks_before = (checker.checks, checker.hits);
    let root = std::rc::Rc::new(match direction {
        Direction::Forward => PartialStructure::empty(problem),
        Direction::Backward => PartialStructure::full(problem),
    });
    for e in problem.element_ids() {
        if direction == Direction::Backward || problem.touches_ground(e) {
            push(&mut heap, &mut nodes, m, Node { state: root.clone(), element: e, order: ConsList::new(), parent: 0 });
        }
    }
    let clock = StopWatch::start();
    let mut last_expanded = 0u64;
    let outcome = loop {
        let Some(Reverse((r, _, id))) = heap.pop() else { break StiffnessPlanOutcome::Infeasible };
        if limits.exceeded(&clock, stats.expansions) {
            break StiffnessPlanOutcome::Exhausted;
        }
        let node = nodes[id as usize].take().expect("each node pops once");
        if node.parent != last_expanded {
            stats.backtracks += 1;
        }
        let next = match direction {
            Direction::Forward => node.state.with(problem, node.element),
            Direction::Backward => node.state.without(problem, node.element),
        };
        if !checker.is_stiff(&next) {
            stats.pruned += 1;
            continue;
        }
        stats.expansions += 1;
        let order = node.order.push(node.element);
        let done = match direction {
            Direction::Forward => next.len() == m,
            Direction::Backward => next.is_empty(),
        };
        if done {
            let mut seq = order.to_vec();
            if direction == Direction::Forward {
                seq.reverse();
            }
            break StiffnessPlanOutcome::Found(seq);
        }
        let this = id + 1;
        last_expanded = this;
        let state = std::rc::Rc::new(next);
        let successors: Vec<ElementId> = match direction {
            Direction::Forward => problem.element_ids().filter(|e| !state.contains(*e)).collect(),
            Direction::Backward => state.elements().collect(),
        };
        for e in successors {
            push(&mut heap, &mut nodes, r - 1, Node { state: state.clone(), element: e, order: order.clone(), parent: this });
        }
    };
    stats.stiffness_checks = checker.checks - checks_before.0;
    stats.cache_hits = checker.hits - checks_before.1;
    (outcome, stats)
}

/// Robot-free forward stiffness planner tiebroken by element height.
pub fn plan_stiffness(problem: &FrameProblem) -> StiffnessPlanOutcome {
    let mut checker = StiffnessChecker::new(problem);
    plan_stiffness_with(problem, &mut checker, &SearchLimits::unlimited()).0
}

pub fn plan_stiffness_with(
    problem: &FrameProblem,
    checker: &mut StiffnessChecker,
    limits: &SearchLimits,
) -> (StiffnessPlanOutcome, StiffnessSearchStats) {
    stiffness_only_search(problem, Direction::Forward, &euclidean_dist(problem), checker, limits)
}

/// Index of each element in a stiff forward sequence.
pub fn stiffplan_heuristic(problem: &FrameProblem, sequence: &[ElementId]) -> HeuristicTable {
    let mut values = vec![f64::NAN; problem.num_elements()];
    for (j, e) in sequence.iter().enumerate() {
        values[e.0] = j as f64;
    }
    HeuristicTable { kind: HeuristicKind::StiffPlan, values }
}
