// `!(x > y)` is used on purpose so NaN falls into the rejecting branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod evaluation;
pub mod findings;
pub mod geometry;
pub mod jig;
pub mod planning;
pub mod registration;
pub mod scalar;
pub mod schema;
pub mod simulation;
pub mod study;

pub use error::{Error, Result};
pub use findings::{Finding, FindingKind};
pub use planning::{CutLabel, Side};

/// `f64` instantiations of the generic types, for applications that do not
/// need to choose a scalar.
pub type Plane = geometry::Plane<f64>;
pub type Point = geometry::Point3<f64>;
pub type Vector = geometry::Vec3<f64>;
pub type Transform = geometry::RigidTransform<f64>;
pub type Mesh = geometry::TriangleMesh<f64>;
pub type Frame = geometry::PelvicFrame<f64>;
pub type Tumor = planning::TumorModel<f64>;
pub type Cut = planning::PlannedCut<f64>;
pub type Plan = planning::ResectionPlan<f64>;
pub type Trial = simulation::TrialResult<f64>;
pub type Deviation = evaluation::PlaneDeviation<f64>;
