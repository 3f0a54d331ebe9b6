//! Independent end-to-end plan checker.
//!
//! Shares only geometry and stiffness primitives with the planners; no
//! search state, caches or trajectories are reused.

use serde::{Deserialize, Serialize};

use crate::frame::{is_valid_sequence, ElementSet, FrameProblem, Vec3};
use crate::geometry::{orientation_feasible, point_segment_distance, retraction_of, CollisionWorld, Orientation};
use crate::kinematics::{Configuration, FreeFlyingExtruder, KinematicModel};
use crate::motion::TrajectoryKind;
use crate::plan::Plan;
use crate::stiffness::StiffnessChecker;

/// Endpoint chaining and waypoint placement tolerance.
pub const CHAIN_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Clause {
    /// Trajectory count, kind alternation, sequence/orientation agreement.
    Structure,
    /// Consecutive trajectories meet; the plan starts and ends at `q0`.
    Chaining,
    /// A trajectory collides with the prefix printed before it.
    Safety,
    /// An extrusion leaves its mode: orientation, retraction or segment.
    Mode,
    /// The extrusion sequence is not a valid sequence.
    Sequence,
    /// The return transit collides with the finished structure.
    FinalSafety,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub clause: Clause,
    /// Trajectory index, or sequence index for the sequence clause.
    pub index: Option<usize>,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub valid: bool,
    pub violations: Vec<Violation>,
}

impl Verdict {
    pub fn has(&self, clause: Clause) -> bool {
        self.violations.iter().any(|v| v.clause == clause)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("verdict serializes")
    }
}

fn same_orientation(a: &Orientation, b: &Orientation) -> bool {
    let (qa, qb) = (a.quaternion().coords, b.quaternion().coords);
    (qa - qb).norm().min((qa + qb).norm()) <= CHAIN_TOLERANCE
}

fn same_configuration(a: &Configuration, b: &Configuration) -> bool {
    (a.position - b.position).norm() <= CHAIN_TOLERANCE && same_orientation(&a.orientation, &b.orientation)
}

fn near(a: &Vec3, b: &Vec3) -> bool {
    (a - b).norm() <= CHAIN_TOLERANCE
}

pub fn validate_plan(problem: &FrameProblem, plan: &Plan) -> Verdict {
    validate_plan_with_model(problem, plan, &FreeFlyingExtruder::for_problem(problem))
}

pub fn validate_plan_with_model(problem: &FrameProblem, plan: &Plan, model: &dyn KinematicModel) -> Verdict {
    let mut out = Vec::new();
    let mut flag = |clause, index, detail: String| out.push(Violation { clause, index, detail });
    let m = problem.num_elements();
    let trajs = &plan.trajectories;
    let k = plan.sequence.len();

    // structure
    if trajs.len() != 2 * k + 1 {
        flag(Clause::Structure, None, format!("{} trajectories for {k} extrusions, expected {}", trajs.len(), 2 * k + 1));
    }
    if plan.orientations.len() != k {
        flag(Clause::Structure, None, format!("{} orientations for {k} extrusions", plan.orientations.len()));
    }
    let mut ext_count = 0;
    for (j, t) in trajs.iter().enumerate() {
        let expect = if j % 2 == 0 { TrajectoryKind::Transit } else { TrajectoryKind::Extrusion };
        if t.kind != expect {
            flag(Clause::Structure, Some(j), format!("expected a {expect:?} trajectory"));
        }
        if t.waypoints.is_empty() {
            flag(Clause::Structure, Some(j), "no waypoints".into());
        }
        if t.kind == TrajectoryKind::Extrusion {
            if plan.sequence.get(ext_count) != t.element.as_ref() {
                flag(Clause::Structure, Some(j), format!("extrusion {ext_count} disagrees with the sequence"));
            }
            match (plan.orientations.get(ext_count), t.orientation.as_ref()) {
                (Some(a), Some(b)) if same_orientation(a, b) => {}
                _ => flag(Clause::Structure, Some(j), format!("orientation {ext_count} disagrees with the trajectory")),
            }
            ext_count += 1;
        }
    }
    if trajs.iter().any(|t| t.waypoints.is_empty()) || trajs.is_empty() {
        out.push(Violation { clause: Clause::Structure, index: None, detail: "plan cannot be traversed".into() });
        return Verdict { valid: false, violations: out };
    }

    // chaining
    if !same_configuration(trajs[0].start(), &problem.q0) {
        flag(Clause::Chaining, Some(0), "plan does not start at q0".into());
    }
    if !same_configuration(trajs[trajs.len() - 1].end(), &problem.q0) {
        flag(Clause::Chaining, Some(trajs.len() - 1), "plan does not end at q0".into());
    }
    for j in 1..trajs.len() {
        if !same_configuration(trajs[j - 1].end(), trajs[j].start()) {
            flag(Clause::Chaining, Some(j), format!("trajectory {} ends away from where {j} starts", j - 1));
        }
    }

    // safety and mode, walking the prefix
    let world = CollisionWorld::new(problem);
    let mut printed = ElementSet::empty(m);
    let last = trajs.len() - 1;
    for (j, t) in trajs.iter().enumerate() {
        match (t.kind, t.element) {
            (TrajectoryKind::Extrusion, Some(de)) if de.element.0 < m => {
                if !world.trajectory_safe(model, &t.waypoints, &printed, Some(de.element)) {
                    flag(Clause::Safety, Some(j), format!("extrusion of {} collides or leaves the workspace", de.element));
                }
                let sigma = t.orientation.unwrap_or_else(|| t.waypoints[0].orientation);
                if let Some(detail) = mode_violation(problem, &world, model, &t.waypoints, &de, &sigma) {
                    flag(Clause::Mode, Some(j), detail);
                }
                printed.insert(de.element.0);
            }
            (TrajectoryKind::Extrusion, _) => {
                flag(Clause::Structure, Some(j), "extrusion names no valid element".into());
            }
            (TrajectoryKind::Transit, _) if j == last && j > 0 => {
                if !world.trajectory_safe(model, &t.waypoints, &ElementSet::full(m), None) {
                    flag(Clause::FinalSafety, Some(j), "return transit collides with the finished structure".into());
                }
            }
            (TrajectoryKind::Transit, _) => {
                if !world.trajectory_safe(model, &t.waypoints, &printed, None) {
                    flag(Clause::Safety, Some(j), format!("transit collides with the {} printed elements", printed.len()));
                }
            }
        }
    }

    // sequence
    let mut checker = StiffnessChecker::new(problem);
    if let Err(f) = is_valid_sequence(problem, &plan.sequence, &mut checker) {
        let kind = serde_json::to_value(f.kind).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
        flag(Clause::Sequence, Some(f.index), format!("{kind}: {}", f.detail));
    }

    Verdict { valid: out.is_empty(), violations: out }
}

/// First way the extrusion waypoints leave the mode of `de` at `sigma`.
fn mode_violation(
    problem: &FrameProblem,
    world: &CollisionWorld,
    model: &dyn KinematicModel,
    waypoints: &[Configuration],
    de: &crate::frame::DirectedElement,
    sigma: &Orientation,
) -> Option<String> {
    let el = problem.element(de.element);
    if !(el.touches(de.start) && el.other(de.start) == de.end && de.start != de.end) {
        return Some("direction does not match the element".into());
    }
    if !orientation_feasible(problem, de, sigma) {
        return Some("orientation outside the feasible hemisphere".into());
    }
    if waypoints.len() < 4 {
        return Some(format!("{} waypoints, expected approach, extrusion and departure", waypoints.len()));
    }
    let n = waypoints.len();
    let ps = problem.position(de.start);
    let pe = problem.position(de.end);
    let tip = |q: &Configuration| model.forward_position(q);
    if !near(&tip(&waypoints[0]), &retraction_of(problem, de.start, sigma)) {
        return Some("approach is not the start retraction".into());
    }
    if !near(&tip(&waypoints[n - 1]), &retraction_of(problem, de.end, sigma)) {
        return Some("departure is not the end retraction".into());
    }
    if !near(&tip(&waypoints[1]), &ps) || !near(&tip(&waypoints[n - 2]), &pe) {
        return Some("extrusion does not span the element endpoints".into());
    }
    // constraint violation over the discretized extrusion segment
    let mut gamma = 0.0f64;
    for q in waypoints {
        gamma = gamma.max(model.forward_orientation(q).angle_to(sigma));
    }
    for w in waypoints[1..n - 1].windows(2) {
        let steps = (world.pose_motion(&w[0], &w[1]) / world.step).ceil().max(1.0) as usize;
        for s in 0..=steps {
            let q = model.interpolate(&w[0], &w[1], s as f64 / steps as f64);
            gamma = gamma.max(point_segment_distance(tip(&q), ps, pe));
            gamma = gamma.max(model.forward_orientation(&q).angle_to(sigma));
        }
    }
    (gamma >= problem.tolerances.eps).then(|| format!("constraint violation {gamma:e} is not below {:e}", problem.tolerances.eps))
}
