//! Deliberate planner corruption for exercising the validator. Compiled only
//! with the `fault-injection` feature; `EXTRUPLAN_FAULT` picks the fault at
//! run time and an unset variable leaves plans untouched.

use crate::plan::Plan;
use crate::FrameProblem;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Fault {
    /// Exchange the first extrusion with the last one that does not touch
    /// ground.
    Swap,
    /// Remove the final extrusion and the transit after it.
    Drop,
    /// Move the first transit's middle waypoint onto the first element.
    Teleport,
}

impl Fault {
    pub fn from_env() -> Option<Fault> {
        match std::env::var("EXTRUPLAN_FAULT").ok()?.as_str() {
            "swap" => Some(Fault::Swap),
            "drop" => Some(Fault::Drop),
            "teleport" => Some(Fault::Teleport),
            _ => None,
        }
    }
}

pub fn corrupt(problem: &FrameProblem, mut plan: Plan, fault: Fault) -> Plan {
    let m = plan.sequence.len();
    match fault {
        Fault::Swap => {
            if let Some(last) = (1..m).rev().find(|&k| !problem.touches_ground(plan.sequence[k].element)) {
                plan.trajectories.swap(Plan::extrusion_index(0), Plan::extrusion_index(last));
                plan.sequence.swap(0, last);
                plan.orientations.swap(0, last);
            }
        }
        Fault::Drop => {
            if m > 0 {
                plan.sequence.pop();
                plan.orientations.pop();
                plan.trajectories.truncate(Plan::extrusion_index(m - 1));
            }
        }
        Fault::Teleport => {
            if m > 1 {
                let target = problem.midpoint(plan.sequence[0].element);
                let t = &mut plan.trajectories[2];
                let at = (t.waypoints.len() / 2).max(1);
                let o = t.waypoints[at - 1].orientation;
                t.waypoints.insert(at, crate::Configuration::new(target, o));
            }
        }
    }
    plan
}
