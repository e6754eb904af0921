//! Modular cutting jig: component stock, assembly, pose fit and the
//! four-step resection sequence.

mod assembly;
mod catalog;
mod fit;
mod sequence;

pub use assembly::{assemble, Axis, FinalChoice, JigAssembly, JigConfig, Mount, PinHole, ResectionChoice, SlotPlane};
pub use catalog::{
    BaseSpec, Catalog, ExtensionSpec, FinalSeries, FrameSpec, HoleSpec, PatternSpec, PinSpec, ResectionSeries,
    CATALOG_SCHEMA_VERSION,
};
pub use fit::{
    fit_jig_pose, fit_slots, select_pins, slot_objective, slot_residual, slot_residuals, FitOptions, JigPlacement,
    PinSelection, SlotResidual,
};
pub use sequence::{resection_sequence, ResectionSequence, Stage};
