//! Plans: alternating transit and extrusion trajectories, and their JSON form.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frame::{DirectedElement, ElementId, NodeId};
use crate::geometry::Orientation;
use crate::kinematics::{orientation_from_array, orientation_to_array, Configuration};
use crate::motion::{Trajectory, TrajectoryKind};

#[derive(Debug, Error)]
pub enum PlanError {
    #[error("i/o error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("plan parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid plan: {0}")]
    Invalid(String),
}

/// Extrusion sequence, its orientations, and the full trajectory list
/// `[τ_t1, τ_e1, …, τ_em, τ_t(m+1)]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Plan {
    pub sequence: Vec<DirectedElement>,
    pub orientations: Vec<Orientation>,
    pub trajectories: Vec<Trajectory>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PlanFile {
    sequence: Vec<DirectedElement>,
    orientations: Vec<[f64; 4]>,
    trajectories: Vec<TrajectoryRecord>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrajectoryRecord {
    kind: TrajectoryKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    element: Option<ElementId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    start: Option<NodeId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    end: Option<NodeId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    orientation: Option<[f64; 4]>,
    waypoints: Vec<Configuration>,
}

impl Plan {
    /// Derive the sequence and orientations from the extrusion trajectories.
    pub fn from_trajectories(trajectories: Vec<Trajectory>) -> Self {
        let extrusions = trajectories.iter().filter(|t| t.kind == TrajectoryKind::Extrusion);
        let sequence = extrusions.clone().filter_map(|t| t.element).collect();
        let orientations = extrusions.filter_map(|t| t.orientation).collect();
        Plan { sequence, orientations, trajectories }
    }

    pub fn extrusions(&self) -> impl Iterator<Item = &Trajectory> {
        self.trajectories.iter().filter(|t| t.kind == TrajectoryKind::Extrusion)
    }

    pub fn from_json(text: &str) -> Result<Self, PlanError> {
        let file: PlanFile = serde_json::from_str(text)?;
        let orientations = file
            .orientations
            .into_iter()
            .map(orientation_from_array)
            .collect::<Result<Vec<_>, _>>()
            .map_err(PlanError::Invalid)?;
        let mut trajectories = Vec::with_capacity(file.trajectories.len());
        for (k, r) in file.trajectories.into_iter().enumerate() {
            if r.waypoints.is_empty() {
                return Err(PlanError::Invalid(format!("trajectory {k} has no waypoints")));
            }
            let t = match r.kind {
                TrajectoryKind::Transit => {
                    if r.element.is_some() || r.orientation.is_some() {
                        return Err(PlanError::Invalid(format!("transit {k} carries extrusion fields")));
                    }
                    Trajectory::transit(r.waypoints)
                }
                TrajectoryKind::Extrusion => {
                    let (Some(element), Some(start), Some(end), Some(o)) = (r.element, r.start, r.end, r.orientation)
                    else {
                        return Err(PlanError::Invalid(format!(
                            "extrusion {k} needs element, start, end and orientation"
                        )));
                    };
                    Trajectory {
                        kind: TrajectoryKind::Extrusion,
                        waypoints: r.waypoints,
                        element: Some(DirectedElement { element, start, end }),
                        orientation: Some(orientation_from_array(o).map_err(PlanError::Invalid)?),
                    }
                }
            };
            trajectories.push(t);
        }
        Ok(Plan { sequence: file.sequence, orientations, trajectories })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, PlanError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|source| PlanError::Io { path: path.display().to_string(), source })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        let file = PlanFile {
            sequence: self.sequence.clone(),
            orientations: self.orientations.iter().map(orientation_to_array).collect(),
            trajectories: self
                .trajectories
                .iter()
                .map(|t| TrajectoryRecord {
                    kind: t.kind,
                    element: t.element.map(|d| d.element),
                    start: t.element.map(|d| d.start),
                    end: t.element.map(|d| d.end),
                    orientation: t.orientation.as_ref().map(orientation_to_array),
                    waypoints: t.waypoints.clone(),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("plan serializes")
    }

    /// Index of the trajectory that extrudes `sequence[k]`.
    pub fn extrusion_index(k: usize) -> usize {
        2 * k + 1
    }
}
