//! Sequence and motion planning for robotic spatial extrusion of frame
//! structures.
//!
//! A [`FrameProblem`](frame::FrameProblem) describes a 3D frame (nodes,
//! straight cylindrical elements, ground nodes), its material, the robot's
//! start configuration and the planning tolerances. The planners in
//! [`search`] compute an ordered sequence of directed element extrusions
//! interleaved with collision-free transit motions such that every partial
//! structure stays within the displacement tolerance computed by the linear
//! frame analysis in [`stiffness`]. Every plan can be re-checked end to end
//! by [`validate`].

pub mod bench;
pub mod export;
#[cfg(feature = "fault-injection")]
pub mod fault;
pub mod frame;
pub mod generate;
pub mod geometry;
pub mod heuristics;
pub mod kinematics;
pub mod motion;
pub mod plan;
pub mod search;
pub mod sparse;
pub mod stiffness;
pub mod validate;

pub use frame::{DirectedElement, ElementId, ElementSet, FrameProblem, NodeId, PartialStructure};
pub use kinematics::Configuration;
pub use plan::Plan;
