//! Behavioural relations between SMDPs.

pub mod faster;
pub mod simulation;

pub use faster::{
    equally_fast_bounded, faster_than_bounded, FasterThanBounds, FasterThanVerdict, FasterThanWitness,
    SchedulerSearch,
};
pub use simulation::{bisimilar, simulates, RelationResult};
