//! An executable model of phasers with dynamic membership.
//!
//! [`semantics`] is the small-step reduction of a single phaser,
//! [`ordering`] the happens-before family of relations over views and
//! states, [`tracekit`] and [`racecheck`] apply both to recorded programs,
//! [`runtime`] is a blocking phaser for real threads and [`oracles`] checks
//! the properties the model must satisfy.

pub mod cli;
pub mod oracles;
pub mod ordering;
pub mod racecheck;
pub mod runtime;
pub mod semantics;
pub mod tracekit;

pub use ordering::{
    phaser_chb, phaser_hb, phaser_mhp, view_chb, view_hb, view_mhp, well_ordered, OrderingWitness,
};
pub use semantics::{
    apply, await_phase, can_signal, can_wait, new_phaser, sync, well_formed_view, Mode, PhaserOp,
    PhaserState, SemanticsVariant, StepError, TaskId, TaskView,
};
