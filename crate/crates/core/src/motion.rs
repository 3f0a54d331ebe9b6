//! Extrusion sampling, constrained extrusion trajectories and RRT-Connect
//! transit planning, budgeted by the persistence attempt index.

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::frame::{DirectedElement, ElementId, ElementSet, FrameProblem, PartialStructure};
use crate::geometry::{retraction_of, sample_orientation, CollisionWorld, Orientation};
use crate::kinematics::{Configuration, KinematicModel};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrajectoryKind {
    Transit,
    Extrusion,
}

/// Piecewise-interpolated path through configuration space.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub kind: TrajectoryKind,
    pub waypoints: Vec<Configuration>,
    /// Extruded element (extrusion only).
    pub element: Option<DirectedElement>,
    /// Mode coparameter: the constant tool orientation (extrusion only).
    pub orientation: Option<Orientation>,
}

impl Trajectory {
    pub fn transit(waypoints: Vec<Configuration>) -> Self {
        Trajectory { kind: TrajectoryKind::Transit, waypoints, element: None, orientation: None }
    }

    pub fn start(&self) -> &Configuration {
        &self.waypoints[0]
    }

    pub fn end(&self) -> &Configuration {
        self.waypoints.last().expect("trajectory has waypoints")
    }

    pub fn length(&self, model: &dyn KinematicModel) -> f64 {
        self.waypoints.windows(2).map(|w| model.distance(&w[0], &w[1])).sum()
    }

    pub fn reversed(&self) -> Self {
        let mut t = self.clone();
        t.waypoints.reverse();
        t
    }
}

/// Concrete sampling budgets for attempt index `i`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SampleBudget {
    pub orientations: usize,
    pub ik_samples: usize,
    pub rrt_iterations: usize,
    pub shortcut_attempts: usize,
}

impl SampleBudget {
    pub fn for_attempt(i: u32) -> Self {
        let scale = 1usize << i.min(20);
        SampleBudget { orientations: 8 * scale, ik_samples: 4, rrt_iterations: 200 * scale, shortcut_attempts: 50 }
    }
}

/// Motion planning primitives bound to one problem.
pub struct MotionPlanner<'w, 'p> {
    pub world: &'w CollisionWorld<'p>,
    pub model: &'w dyn KinematicModel,
    pub smooth: bool,
}

impl<'w, 'p> MotionPlanner<'w, 'p> {
    pub fn new(world: &'w CollisionWorld<'p>, model: &'w dyn KinematicModel) -> Self {
        MotionPlanner { world, model, smooth: true }
    }

    fn problem(&self) -> &'p FrameProblem {
        self.world.problem()
    }

    /// SampleExtrusion: pick a start node already in `N_P`, a hemisphere
    /// orientation and IK solutions for both end poses, then build the
    /// constrained trajectory. Repeats up to the budget's orientation count.
    pub fn sample_extrusion(
        &self,
        e: ElementId,
        partial: &PartialStructure,
        i: u32,
        rng: &mut dyn RngCore,
    ) -> Option<Trajectory> {
        let problem = self.problem();
        let starts: Vec<_> = problem.element(e).nodes.iter().copied().filter(|n| partial.has_node(*n)).collect();
        if starts.is_empty() || partial.contains(e) {
            return None;
        }
        let budget = SampleBudget::for_attempt(i);
        for _ in 0..budget.orientations {
            let n1 = starts[rng.random_range(0..starts.len())];
            let de = problem.direct(e, n1).expect("start node is an endpoint");
            let x_o = sample_orientation(problem, &de, &mut *rng);
            let q1 = (0..budget.ik_samples).find_map(|_| self.model.sample_ik(&problem.position(de.start), &x_o, rng));
            let q2 = (0..budget.ik_samples).find_map(|_| self.model.sample_ik(&problem.position(de.end), &x_o, rng));
            if let (Some(q1), Some(q2)) = (q1, q2) {
                if let Some(t) = self.plan_constrained(&q1, &q2, &x_o, &de, partial.printed(), rng) {
                    return Some(t);
                }
            }
        }
        None
    }

    /// Straight tip path from `q1` to `q2` at constant orientation, wrapped
    /// by the approach and departure retractions.
    pub fn plan_constrained(
        &self,
        q1: &Configuration,
        q2: &Configuration,
        x_o: &Orientation,
        de: &DirectedElement,
        printed: &ElementSet,
        rng: &mut dyn RngCore,
    ) -> Option<Trajectory> {
        let problem = self.problem();
        let r1 = retraction_of(problem, de.start, x_o);
        let r2 = retraction_of(problem, de.end, x_o);
        let a = self.model.sample_ik(&r1, x_o, rng)?;
        let b = self.model.sample_ik(&r2, x_o, rng)?;
        let waypoints = vec![a, *q1, *q2, b];
        self.world
            .trajectory_safe(self.model, &waypoints, printed, Some(de.element))
            .then(|| Trajectory {
                kind: TrajectoryKind::Extrusion,
                waypoints,
                element: Some(*de),
                orientation: Some(*x_o),
            })
    }

    fn edge_free(&self, a: &Configuration, b: &Configuration, printed: &ElementSet) -> bool {
        self.world.segment_safe(self.model, a, b, printed, None)
    }

    fn config_free(&self, q: &Configuration, printed: &ElementSet) -> bool {
        self.model.is_valid(q) && !self.world.tool_collides(q, printed)
    }

    /// Transit between two configurations: the direct edge if it is free,
    /// otherwise RRT-Connect with `200·2^i` iterations, then shortcutting.
    pub fn plan_motion(
        &self,
        start: &Configuration,
        goal: &Configuration,
        printed: &ElementSet,
        i: u32,
        rng: &mut dyn RngCore,
    ) -> Option<Trajectory> {
        if !self.config_free(start, printed) || !self.config_free(goal, printed) {
            return None;
        }
        if start == goal {
            return Some(Trajectory::transit(vec![*start, *goal]));
        }
        if self.edge_free(start, goal, printed) {
            return Some(Trajectory::transit(vec![*start, *goal]));
        }
        let budget = SampleBudget::for_attempt(i);
        let mut path = self.rrt_connect(start, goal, printed, budget.rrt_iterations, rng)?;
        if self.smooth {
            self.shortcut(&mut path, printed, budget.shortcut_attempts, rng);
        }
        debug_assert!(self.world.trajectory_safe(self.model, &path, printed, None));
        Some(Trajectory::transit(path))
    }

    fn extend_step(&self) -> f64 {
        let ext = self.model_workspace_diagonal();
        (ext * 0.1).max(self.world.step * 4.0)
    }

    fn model_workspace_diagonal(&self) -> f64 {
        self.problem().workspace.extent().norm()
    }

    fn rrt_connect(
        &self,
        start: &Configuration,
        goal: &Configuration,
        printed: &ElementSet,
        iterations: usize,
        rng: &mut dyn RngCore,
    ) -> Option<Vec<Configuration>> {
        let step = self.extend_step();
        // Each tree stores (configuration, parent index).
        let mut trees: [Vec<(Configuration, usize)>; 2] = [vec![(*start, usize::MAX)], vec![(*goal, usize::MAX)]];
        let mut from_start = true;
        for _ in 0..iterations {
            let target = self.model.sample_configuration(rng);
            let (a, b) = if from_start { (0, 1) } else { (1, 0) };
            if let Some(new_idx) = self.extend(&mut trees[a], &target, step, printed) {
                let q_new = trees[a][new_idx].0;
                if let Some(meet) = self.connect(&mut trees[b], &q_new, step, printed) {
                    let mut pa = trace(&trees[a], new_idx);
                    let mut pb = trace(&trees[b], meet);
                    pa.reverse();
                    pa.extend(pb.drain(1..));
                    if !from_start {
                        pa.reverse();
                    }
                    return Some(pa);
                }
            }
            from_start = !from_start;
        }
        None
    }

    fn nearest(&self, tree: &[(Configuration, usize)], q: &Configuration) -> usize {
        let mut best = (f64::INFINITY, 0);
        for (k, (c, _)) in tree.iter().enumerate() {
            let d = self.model.distance(c, q);
            if d < best.0 {
                best = (d, k);
            }
        }
        best.1
    }

    fn steer(&self, from: &Configuration, to: &Configuration, step: f64) -> Configuration {
        let d = self.model.distance(from, to);
        if d <= step {
            *to
        } else {
            self.model.interpolate(from, to, step / d)
        }
    }

    fn extend(&self, tree: &mut Vec<(Configuration, usize)>, target: &Configuration, step: f64, printed: &ElementSet) -> Option<usize> {
        let near = self.nearest(tree, target);
        let q = self.steer(&tree[near].0, target, step);
        if q == tree[near].0 || !self.config_free(&q, printed) || !self.edge_free(&tree[near].0, &q, printed) {
            return None;
        }
        tree.push((q, near));
        Some(tree.len() - 1)
    }

    /// Greedily extend `tree` toward `target`; index of the node equal to
    /// `target` when it is reached.
    fn connect(&self, tree: &mut Vec<(Configuration, usize)>, target: &Configuration, step: f64, printed: &ElementSet) -> Option<usize> {
        loop {
            let idx = self.extend(tree, target, step, printed)?;
            if tree[idx].0 == *target {
                return Some(idx);
            }
        }
    }

    fn shortcut(&self, path: &mut Vec<Configuration>, printed: &ElementSet, attempts: usize, rng: &mut dyn RngCore) {
        for _ in 0..attempts {
            if path.len() <= 2 {
                return;
            }
            let a = rng.random_range(0..path.len() - 2);
            let b = rng.random_range(a + 2..path.len());
            if self.edge_free(&path[a], &path[b], printed) {
                path.drain(a + 1..b);
            }
        }
    }
}

fn trace(tree: &[(Configuration, usize)], mut k: usize) -> Vec<Configuration> {
    let mut out = Vec::new();
    loop {
        out.push(tree[k].0);
        if tree[k].1 == usize::MAX {
            return out;
        }
        k = tree[k].1;
    }
}
