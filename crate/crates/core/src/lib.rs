//! Multi-agent scalar-field mapping with Gaussian-process regression and
//! Hough-transform avoidance of high-intensity regions.
//!
//! Agents measure an unknown field at planned locations, fit a GP to their own
//! data, threshold the posterior mean into a binary map, fit circles to its
//! foreground, and move planned points out of those circles. Agents that come
//! within a communication radius of each other average their estimates.

pub mod diagnostics;
pub mod error;
pub mod field;
pub mod gp;
pub mod hough;
pub mod pgm;
pub mod planner;
pub mod swarm;

pub use error::{Error, Result};
pub use field::{DomainBox, FieldSpec, Point, TestGrid};
pub use gp::{GpModel, KernelParams, Posterior, TrainSet};
pub use hough::{BinaryMap, Circle, CircleSet, HoughConfig};
pub use swarm::{run_mission, MissionConfig, MissionResult};
