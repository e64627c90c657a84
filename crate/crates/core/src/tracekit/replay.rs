//! Sequential replay of a trace through the small-step semantics.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::racecheck::AccessSnapshot;
use crate::semantics::{self, PhaserState, SemanticsVariant, StepError, TaskId, TaskView};
use crate::tracekit::trace::{EventKind, Trace, TraceEvent};

/// States of every live phaser, by name.
pub type PhaserMap = BTreeMap<String, PhaserState>;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Error, Serialize)]
pub enum ReplayErrorKind {
    #[error("unknown phaser `{0}`")]
    UnknownPhaser(String),
    #[error("phaser `{0}` already exists")]
    DuplicatePhaser(String),
    #[error(transparent)]
    Step(StepError),
}

impl ReplayErrorKind {
    pub fn is_would_block(&self) -> bool {
        matches!(self, ReplayErrorKind::Step(e) if e.is_would_block())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize)]
#[error("line {line}: {kind}")]
pub struct ReplayError {
    pub line: usize,
    pub kind: ReplayErrorKind,
}

/// The phasers of a running program. Executing an event either commits its
/// effect or leaves the machine untouched.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Machine {
    pub phasers: PhaserMap,
}

impl Machine {
    pub fn new() -> Self {
        Self::default()
    }

    /// Views `task` holds on every phaser it is registered with.
    pub fn views_of(&self, task: &TaskId) -> BTreeMap<String, TaskView> {
        self.phasers
            .iter()
            .filter_map(|(name, state)| state.get(task).map(|v| (name.clone(), *v)))
            .collect()
    }

    /// Executes one event. Accesses return the snapshot taken just before
    /// them.
    pub fn execute(
        &mut self,
        event: &TraceEvent,
        variant: SemanticsVariant,
    ) -> Result<Option<AccessSnapshot>, ReplayErrorKind> {
        match &event.kind {
            EventKind::New { task, phaser, mode } => {
                if self.phasers.contains_key(phaser) {
                    return Err(ReplayErrorKind::DuplicatePhaser(phaser.clone()));
                }
                let state = semantics::new_phaser(task.clone(), *mode, variant)
                    .map_err(ReplayErrorKind::Step)?;
                self.phasers.insert(phaser.clone(), state);
                Ok(None)
            }
            EventKind::Op { task, phaser, op } => {
                let state = self
                    .phasers
                    .get(phaser)
                    .ok_or_else(|| ReplayErrorKind::UnknownPhaser(phaser.clone()))?;
                let next =
                    semantics::apply(state, task, op, variant).map_err(ReplayErrorKind::Step)?;
                self.phasers.insert(phaser.clone(), next);
                Ok(None)
            }
            EventKind::Access { task, var, kind } => Ok(Some(AccessSnapshot {
                task: task.clone(),
                var: var.clone(),
                kind: *kind,
                line: event.line,
                views: self.views_of(task),
            })),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReplayStep {
    pub event: TraceEvent,
    /// Every phaser after the event.
    pub states: PhaserMap,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ReplayResult {
    /// One entry per successfully executed event.
    pub steps: Vec<ReplayStep>,
    /// The error that stopped replay, if any.
    pub error: Option<ReplayError>,
    pub final_states: PhaserMap,
    pub accesses: Vec<AccessSnapshot>,
}

impl ReplayResult {
    pub fn completed(&self) -> bool {
        self.error.is_none()
    }

    /// View of `task` on `phaser` after each step where it is a member.
    pub fn view_history(&self, phaser: &str, task: &TaskId) -> Vec<TaskView> {
        let mut history: Vec<TaskView> = Vec::new();
        for step in &self.steps {
            if let Some(v) = step.states.get(phaser).and_then(|s| s.get(task)) {
                if history.last() != Some(v) {
                    history.push(*v);
                }
            }
        }
        history
    }
}

/// Applies the events in order. WouldBlock is an error here: the given order
/// is claimed to be a schedule and a blocked wait means it is not one.
pub fn replay(trace: &Trace, variant: SemanticsVariant) -> ReplayResult {
    let mut machine = Machine::new();
    let mut result = ReplayResult::default();
    for event in &trace.events {
        match machine.execute(event, variant) {
            Ok(access) => {
                result.accesses.extend(access);
                result.steps.push(ReplayStep {
                    event: event.clone(),
                    states: machine.phasers.clone(),
                });
            }
            Err(kind) => {
                result.error = Some(ReplayError {
                    line: event.line,
                    kind,
                });
                break;
            }
        }
    }
    result.final_states = machine.phasers;
    result
}
