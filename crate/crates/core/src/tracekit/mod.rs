//! Textual traces of phaser programs: parsing, sequential replay and
//! bounded exploration of interleavings.

pub mod explore;
pub mod replay;
pub mod trace;

pub use explore::{
    explore, explore_with, programs_from_trace, BlockedTask, ExploreOptions, ExploreResult,
    Outcome, TaskProgram, DEFAULT_MAX_INTERLEAVINGS,
};
pub use replay::{
    replay, Machine, PhaserMap, ReplayError, ReplayErrorKind, ReplayResult, ReplayStep,
};
pub use trace::{
    parse, parse_bytes, render, AccessKind, EventKind, ParseError, ParseErrorKind, Trace,
    TraceEvent,
};
