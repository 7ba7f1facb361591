//! DRAM organization, error model, mapping policies, and energy accounting.

pub mod energy;
pub mod errors;
pub mod geometry;
pub mod mapping;

pub use energy::{compare_reports, simulate_trace, Comparison, EnergyReport, RowBufferState};
pub use errors::{
    apply_mask, generate_weak_cells, inject_errors, sample_error_mask, ErrorMask, MaskEntry,
    WeakCellMap,
};
pub use geometry::{AccessCondition, DramAddress, DramGeometry, VoltageConfig};
pub use mapping::{
    generate_trace, map_baseline, map_enforcesnn, AccessOp, AccessTrace, LayoutSlot,
    MappingPolicy, MappingVariant, PhysicalLayout, TracePattern,
};
