//! Progression, ForwardCheck and Regression: greedy best-first searches over
//! (partial structure, configuration) states with deferred evaluation,
//! lexicographic keys and persistence. Also the geometry-only regression.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::fmt;
use std::rc::Rc;
use std::str::FromStr;
use std::time::{Duration, Instant};

use ordered_float::OrderedFloat;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::frame::{ElementId, ElementSet, FrameProblem, PartialStructure};
use crate::geometry::CollisionWorld;
use crate::heuristics::{
    euclidean_dist, graph_dist, plan_stiffness_with, random_heuristic, stiffplan_heuristic, stiffness_only_search,
    Direction, HeuristicKind, HeuristicTable, StiffnessPlanOutcome, StiffnessSearchStats,
};
use crate::kinematics::{Configuration, FreeFlyingExtruder, KinematicModel};
use crate::motion::{MotionPlanner, Trajectory};
use crate::plan::Plan;
use crate::stiffness::StiffnessChecker;

/// Immutable singly linked list sharing tails between search nodes.
#[derive(Debug)]
pub struct ConsList<T>(Option<Rc<(T, ConsList<T>)>>);

impl<T> Clone for ConsList<T> {
    fn clone(&self) -> Self {
        ConsList(self.0.clone())
    }
}

impl<T> Default for ConsList<T> {
    fn default() -> Self {
        ConsList(None)
    }
}

impl<T: Clone> ConsList<T> {
    pub fn new() -> Self {
        ConsList(None)
    }

    pub fn push(&self, head: T) -> Self {
        ConsList(Some(Rc::new((head, self.clone()))))
    }

    /// Elements from the head.
    pub fn to_vec(&self) -> Vec<T> {
        let mut out = Vec::new();
        let mut cur = &self.0;
        while let Some(cell) = cur {
            out.push(cell.0.clone());
            cur = &cell.1 .0;
        }
        out
    }
}

pub struct StopWatch(Instant);

impl StopWatch {
    pub fn start() -> Self {
        StopWatch(Instant::now())
    }

    pub fn elapsed(&self) -> Duration {
        self.0.elapsed()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SearchLimits {
    pub timeout: Option<Duration>,
    pub max_expansions: Option<u64>,
}

impl SearchLimits {
    pub fn unlimited() -> Self {
        SearchLimits::default()
    }

    pub fn timeout(secs: f64) -> Self {
        SearchLimits { timeout: Some(Duration::from_secs_f64(secs)), max_expansions: None }
    }

    pub fn exceeded(&self, clock: &StopWatch, expansions: u64) -> bool {
        self.timeout.is_some_and(|t| clock.elapsed() >= t) || self.max_expansions.is_some_and(|m| expansions >= m)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Progression,
    ForwardCheck,
    Regression,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::Progression, Algorithm::ForwardCheck, Algorithm::Regression];

    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Progression => "progression",
            Algorithm::ForwardCheck => "forward_check",
            Algorithm::Regression => "regression",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "progression" => Ok(Algorithm::Progression),
            "forward_check" | "forwardcheck" => Ok(Algorithm::ForwardCheck),
            "regression" => Ok(Algorithm::Regression),
            _ => Err(format!("unknown algorithm '{s}' (progression|forward_check|regression)")),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SearchConfig {
    pub algorithm: Algorithm,
    pub heuristic: HeuristicKind,
    pub seed: u64,
    pub limits: SearchLimits,
    pub smooth: bool,
    /// Record push/pop events for instrumentation.
    pub trace: bool,
}

impl SearchConfig {
    pub fn new(algorithm: Algorithm, heuristic: HeuristicKind, seed: u64) -> Self {
        SearchConfig { algorithm, heuristic, seed, limits: SearchLimits::unlimited(), smooth: true, trace: false }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SearchStats {
    pub expansions: u64,
    /// Pops of a node that is not a successor of the most recently expanded node.
    pub backtracks: u64,
    /// Persistence re-queues.
    pub requeues: u64,
    pub extrusion_calls: u64,
    pub transit_calls: u64,
    pub stiffness_checks: u64,
    pub cache_hits: u64,
    /// Nodes discarded by the stiffness test.
    pub pruned: u64,
    /// Nodes rejected by forward checking.
    pub forward_check_rejections: u64,
    /// Most elements decided in any expanded state.
    pub max_depth: usize,
    /// Seconds; zero when timing is suppressed.
    pub wall_time: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchStatus {
    Solved,
    Timeout,
    /// The open list emptied (every branch was pruned).
    Exhausted,
    /// The stiffness planner proved the sequencing problem infeasible.
    Infeasible,
}

/// Open-list key `(i, r, h, insertion counter)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Key {
    pub attempt: u32,
    pub remaining: usize,
    pub h: OrderedFloat<f64>,
    pub counter: u64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TraceEvent {
    Push { node: u64, key: Key },
    Pop { node: u64, key: Key },
    /// An extrusion or transit planner call made while handling `node`.
    Planner { node: u64 },
}

#[derive(Clone, Debug)]
pub struct SearchOutcome {
    pub status: SearchStatus,
    pub plan: Option<Plan>,
    pub stats: SearchStats,
    pub heuristic: Option<HeuristicTable>,
    pub trace: Vec<TraceEvent>,
}

struct State {
    partial: PartialStructure,
    q: Configuration,
}

struct Node {
    /// Identity kept across persistence re-queues.
    id: u64,
    attempt: u32,
    remaining: usize,
    h: f64,
    state: Rc<State>,
    element: ElementId,
    plan: ConsList<Trajectory>,
    /// Expansion that generated this node (0 for the initial nodes).
    parent: u64,
}

/// Compute the heuristic table for a run; StiffPlan runs the stiffness planner.
pub fn heuristic_table(
    problem: &FrameProblem,
    kind: HeuristicKind,
    seed: u64,
    checker: &mut StiffnessChecker,
    limits: &SearchLimits,
) -> Result<HeuristicTable, SearchStatus> {
    Ok(match kind {
        HeuristicKind::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(1);
            random_heuristic(problem, &mut rng)
        }
        HeuristicKind::Euclidean => euclidean_dist(problem),
        HeuristicKind::Graph => graph_dist(problem),
        HeuristicKind::StiffPlan => match plan_stiffness_with(problem, checker, limits).0 {
            StiffnessPlanOutcome::Found(seq) => stiffplan_heuristic(problem, &seq),
            StiffnessPlanOutcome::Infeasible => return Err(SearchStatus::Infeasible),
            StiffnessPlanOutcome::Exhausted => return Err(SearchStatus::Timeout),
        },
    })
}

/// Run the configured algorithm with the default free-flying extruder.
pub fn plan(problem: &FrameProblem, config: &SearchConfig) -> SearchOutcome {
    let model = FreeFlyingExtruder::for_problem(problem);
    plan_with_model(problem, &model, config)
}

pub fn plan_with_model(problem: &FrameProblem, model: &dyn KinematicModel, config: &SearchConfig) -> SearchOutcome {
    let clock = StopWatch::start();
    let mut checker = StiffnessChecker::new(problem);
    let table = match heuristic_table(problem, config.heuristic, config.seed, &mut checker, &config.limits) {
        Ok(t) => t,
        Err(status) => {
            let stats = SearchStats {
                stiffness_checks: checker.checks,
                cache_hits: checker.hits,
                wall_time: clock.elapsed().as_secs_f64(),
                ..Default::default()
            };
            return SearchOutcome { status, plan: None, stats, heuristic: None, trace: Vec::new() };
        }
    };
    let remaining = config.limits.timeout.map(|t| t.saturating_sub(clock.elapsed()));
    let limits = SearchLimits { timeout: remaining, ..config.limits };
    let world = CollisionWorld::new(problem);
    let mut motion = MotionPlanner::new(&world, model);
    motion.smooth = config.smooth;
    let mut search = Search {
        problem,
        motion,
        checker,
        rng: ChaCha8Rng::seed_from_u64(config.seed),
        table: &table,
        forward_check: config.algorithm == Algorithm::ForwardCheck,
        fc_cache: vec![Vec::new(); problem.num_elements()],
        stats: SearchStats::default(),
        heap: BinaryHeap::new(),
        slots: Vec::new(),
        counter: 0,
        next_id: 0,
        trace: config.trace.then(Vec::new),
    };
    let (status, plan) = match config.algorithm {
        Algorithm::Progression | Algorithm::ForwardCheck => search.progression(&limits),
        Algorithm::Regression => search.regression(&limits),
    };
    #[cfg(feature = "fault-injection")]
    let plan = match crate::fault::Fault::from_env() {
        Some(f) => plan.map(|p| crate::fault::corrupt(problem, p, f)),
        None => plan,
    };
    let mut stats = search.stats;
    stats.stiffness_checks = search.checker.checks;
    stats.cache_hits = search.checker.hits;
    stats.wall_time = clock.elapsed().as_secs_f64();
    let trace = search.trace.unwrap_or_default();
    SearchOutcome { status, plan, stats, heuristic: Some(table.clone()), trace }
}

struct Search<'a, 'w, 'p> {
    problem: &'a FrameProblem,
    motion: MotionPlanner<'w, 'p>,
    checker: StiffnessChecker<'a>,
    rng: ChaCha8Rng,
    table: &'a HeuristicTable,
    forward_check: bool,
    fc_cache: Vec<Vec<Trajectory>>,
    stats: SearchStats,
    heap: BinaryHeap<Reverse<(Key, usize)>>,
    slots: Vec<Option<Node>>,
    counter: u64,
    next_id: u64,
    trace: Option<Vec<TraceEvent>>,
}

impl Search<'_, '_, '_> {
    fn push(&mut self, node: Node) {
        let key = Key { attempt: node.attempt, remaining: node.remaining, h: OrderedFloat(node.h), counter: self.counter };
        self.counter += 1;
        if let Some(t) = &mut self.trace {
            t.push(TraceEvent::Push { node: node.id, key });
        }
        self.slots.push(Some(node));
        self.heap.push(Reverse((key, self.slots.len() - 1)));
    }

    fn new_node(&mut self, attempt: u32, remaining: usize, h: f64, state: Rc<State>, element: ElementId, plan: ConsList<Trajectory>, parent: u64) {
        self.next_id += 1;
        let node = Node { id: self.next_id, attempt, remaining, h, state, element, plan, parent };
        self.push(node);
    }

    fn pop(&mut self) -> Option<Node> {
        let Reverse((key, slot)) = self.heap.pop()?;
        let node = self.slots[slot].take().expect("slot popped once");
        if let Some(t) = &mut self.trace {
            t.push(TraceEvent::Pop { node: node.id, key });
        }
        Some(node)
    }

    fn requeue(&mut self, mut node: Node) {
        node.attempt += 1;
        self.stats.requeues += 1;
        self.push(node);
    }

    fn note_planner(&mut self, node: u64) {
        if let Some(t) = &mut self.trace {
            t.push(TraceEvent::Planner { node });
        }
    }

    fn sample_extrusion(&mut self, node: u64, e: ElementId, partial: &PartialStructure, i: u32) -> Option<Trajectory> {
        self.stats.extrusion_calls += 1;
        self.note_planner(node);
        self.motion.sample_extrusion(e, partial, i, &mut self.rng)
    }

    fn plan_motion(&mut self, node: u64, a: &Configuration, b: &Configuration, printed: &ElementSet, i: u32) -> Option<Trajectory> {
        self.stats.transit_calls += 1;
        self.note_planner(node);
        self.motion.plan_motion(a, b, printed, i, &mut self.rng)
    }

    /// One-step lookahead: every currently printable element must still
    /// admit a safe extrusion against `partial`.
    fn forward_check_ok(&mut self, node: u64, partial: &PartialStructure, i: u32) -> bool {
        for e in self.problem.element_ids() {
            if partial.contains(e) || !partial.reaches(self.problem, e) {
                continue;
            }
            let world = self.motion.world;
            let model = self.motion.model;
            let reusable = self.fc_cache[e.0].iter().any(|t| {
                t.element.is_some_and(|d| partial.has_node(d.start))
                    && world.trajectory_safe(model, &t.waypoints, partial.printed(), Some(e))
            });
            if reusable {
                continue;
            }
            match self.sample_extrusion(node, e, partial, i) {
                Some(t) => self.fc_cache[e.0].push(t),
                None => return false,
            }
        }
        true
    }

    fn note_pop(&mut self, node: &Node, last_expanded: u64) {
        if node.parent != last_expanded {
            self.stats.backtracks += 1;
        }
    }

    fn progression(&mut self, limits: &SearchLimits) -> (SearchStatus, Option<Plan>) {
        let problem = self.problem;
        let m = problem.num_elements();
        let root = Rc::new(State { partial: PartialStructure::empty(problem), q: problem.q0 });
        for e in problem.element_ids().filter(|e| problem.touches_ground(*e)) {
            self.new_node(0, m, self.table.get(e), root.clone(), e, ConsList::new(), 0);
        }
        let clock = StopWatch::start();
        let mut last_expanded = 0;
        loop {
            if limits.exceeded(&clock, self.stats.expansions) {
                return (SearchStatus::Timeout, None);
            }
            let Some(node) = self.pop() else { return (SearchStatus::Exhausted, None) };
            self.note_pop(&node, last_expanded);
            let i = node.attempt;
            let next = node.state.partial.with(problem, node.element);
            if !self.checker.is_stiff(&next) {
                self.stats.pruned += 1;
                continue;
            }
            self.stats.expansions += 1;
            let mut extrusion = None;
            if !self.forward_check || self.forward_check_ok(node.id, &next, i) {
                extrusion = self.sample_extrusion(node.id, node.element, &node.state.partial, i);
            } else {
                self.stats.forward_check_rejections += 1;
            }
            if let Some(te) = extrusion {
                let printed = node.state.partial.printed().clone();
                if let Some(tt) = self.plan_motion(node.id, &node.state.q, te.start(), &printed, i) {
                    let plan = node.plan.push(tt).push(te.clone());
                    self.stats.max_depth = self.stats.max_depth.max(next.len());
                    if next.len() == m {
                        let q0 = problem.q0;
                        if let Some(home) = self.plan_motion(node.id, te.end(), &q0, next.printed(), i) {
                            let mut trajs = plan.push(home).to_vec();
                            trajs.reverse();
                            return (SearchStatus::Solved, Some(Plan::from_trajectories(trajs)));
                        }
                    }
                    let state = Rc::new(State { q: *te.end(), partial: next });
                    last_expanded = node.id;
                    let successors: Vec<ElementId> =
                        problem.element_ids().filter(|e| !state.partial.contains(*e)).collect();
                    for e in successors {
                        self.new_node(0, node.remaining - 1, self.table.get(e), state.clone(), e, plan.clone(), node.id);
                    }
                }
            }
            self.requeue(node);
        }
    }

    fn regression(&mut self, limits: &SearchLimits) -> (SearchStatus, Option<Plan>) {
        let problem = self.problem;
        let m = problem.num_elements();
        let root = Rc::new(State { partial: PartialStructure::full(problem), q: problem.q0 });
        for e in problem.element_ids() {
            self.new_node(0, m, -self.table.get(e), root.clone(), e, ConsList::new(), 0);
        }
        let clock = StopWatch::start();
        let mut last_expanded = 0;
        loop {
            if limits.exceeded(&clock, self.stats.expansions) {
                return (SearchStatus::Timeout, None);
            }
            let Some(node) = self.pop() else { return (SearchStatus::Exhausted, None) };
            self.note_pop(&node, last_expanded);
            let i = node.attempt;
            let next = node.state.partial.without(problem, node.element);
            if !self.checker.is_stiff(&next) {
                self.stats.pruned += 1;
                continue;
            }
            self.stats.expansions += 1;
            if let Some(te) = self.sample_extrusion(node.id, node.element, &next, i) {
                let printed = node.state.partial.printed().clone();
                if let Some(tt) = self.plan_motion(node.id, te.end(), &node.state.q, &printed, i) {
                    let plan = node.plan.push(tt).push(te.clone());
                    self.stats.max_depth = self.stats.max_depth.max(m - next.len());
                    if next.is_empty() {
                        let q0 = problem.q0;
                        if let Some(first) = self.plan_motion(node.id, &q0, te.start(), next.printed(), i) {
                            let trajs = plan.push(first).to_vec();
                            return (SearchStatus::Solved, Some(Plan::from_trajectories(trajs)));
                        }
                    }
                    let state = Rc::new(State { q: *te.start(), partial: next });
                    last_expanded = node.id;
                    let successors: Vec<ElementId> = state.partial.elements().collect();
                    for e in successors {
                        self.new_node(0, node.remaining - 1, -self.table.get(e), state.clone(), e, plan.clone(), node.id);
                    }
                }
            }
            self.requeue(node);
        }
    }
}

/// Robot-free regression (stiffness constraint only), used for the
/// stiffness-only experiments. Finite: no persistence, stops on the limits.
pub fn regression_stiffness_only(
    problem: &FrameProblem,
    table: &HeuristicTable,
    limits: &SearchLimits,
) -> (StiffnessPlanOutcome, StiffnessSearchStats) {
    let mut checker = StiffnessChecker::new(problem);
    stiffness_only_search(problem, Direction::Backward, table, &mut checker, limits)
}

/// Geometry-only instance: each element has a finite set of candidate
/// trajectories, each described by the elements it collides with.
#[derive(Clone, Debug)]
pub struct GeometryOnlyInstance {
    pub candidates: Vec<Vec<ElementSet>>,
}

impl GeometryOnlyInstance {
    pub fn num_elements(&self) -> usize {
        self.candidates.len()
    }

    pub fn num_trajectories(&self) -> usize {
        self.candidates.iter().map(Vec::len).sum()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GeometryOnlySolution {
    /// Forward extrusion order.
    pub order: Vec<usize>,
    /// Chosen candidate per element.
    pub assignment: Vec<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct GeometryOnlyStats {
    /// Safety queries of one candidate trajectory against the remaining
    /// structure.
    pub operations: u64,
    /// Elements those queries covered.
    pub pair_tests: u64,
    pub pops: u64,
    pub expansions: u64,
    pub backtracks: u64,
}

/// Regression with stiffness always true, direct-hop transits and
/// extrusion sampling that picks a safe candidate trajectory at random.
/// The candidate set is finite, so failed nodes are not re-queued and the
/// search fails exactly when the open list empties.
pub fn regression_geometry_only(
    instance: &GeometryOnlyInstance,
    heuristic: &[f64],
    rng: &mut impl Rng,
) -> (Option<GeometryOnlySolution>, GeometryOnlyStats) {
    struct GNode {
        remaining: Rc<ElementSet>,
        element: usize,
        suffix: ConsList<(usize, usize)>,
        parent: u64,
    }
    let m = instance.num_elements();
    let mut stats = GeometryOnlyStats::default();
    let mut heap: BinaryHeap<Reverse<(usize, OrderedFloat<f64>, usize)>> = BinaryHeap::new();
    let mut slots: Vec<Option<GNode>> = Vec::new();
    let full = Rc::new(ElementSet::full(m));
    for e in 0..m {
        heap.push(Reverse((m, OrderedFloat(-heuristic[e]), slots.len())));
        slots.push(Some(GNode { remaining: full.clone(), element: e, suffix: ConsList::new(), parent: 0 }));
    }
    let mut last_expanded = 0u64;
    while let Some(Reverse((r, _, slot))) = heap.pop() {
        stats.pops += 1;
        let node = slots[slot].take().expect("slot popped once");
        if node.parent != last_expanded {
            stats.backtracks += 1;
        }
        let rest = node.remaining.without(node.element);
        let mut order: Vec<usize> = (0..instance.candidates[node.element].len()).collect();
        order.shuffle(rng);
        let chosen = order.into_iter().find(|&c| {
            stats.operations += 1;
            stats.pair_tests += rest.len() as u64;
            !instance.candidates[node.element][c].intersects(&rest)
        });
        let Some(c) = chosen else { continue };
        stats.expansions += 1;
        let suffix = node.suffix.push((node.element, c));
        if rest.is_empty() {
            let steps = suffix.to_vec();
            let mut assignment = vec![0; m];
            for &(e, c) in &steps {
                assignment[e] = c;
            }
            return (Some(GeometryOnlySolution { order: steps.iter().map(|s| s.0).collect(), assignment }), stats);
        }
        let this = slot as u64 + 1;
        last_expanded = this;
        let rest = Rc::new(rest);
        for e in rest.iter() {
            heap.push(Reverse((r - 1, OrderedFloat(-heuristic[e]), slots.len())));
            slots.push(Some(GNode { remaining: rest.clone(), element: e, suffix: suffix.clone(), parent: this }));
        }
    }
    (None, stats)
}

/// Check a geometry-only solution: every element once, each chosen
/// trajectory free of the elements printed before it.
pub fn geometry_only_solution_valid(instance: &GeometryOnlyInstance, sol: &GeometryOnlySolution) -> bool {
    let m = instance.num_elements();
    let mut printed = ElementSet::empty(m);
    for &e in &sol.order {
        if e >= m || printed.contains(e) {
            return false;
        }
        let Some(blockers) = instance.candidates[e].get(sol.assignment[e]) else { return false };
        if blockers.intersects(&printed) {
            return false;
        }
        printed.insert(e);
    }
    printed.is_full()
}
