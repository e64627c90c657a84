//! The semantics under test, as a trait, so the property suites can be run
//! against deliberately broken variants.

use crate::ordering;
use crate::semantics::TaskView;
use crate::semantics::{self, PhaserOp, PhaserState, SemanticsVariant, StepError, TaskId};

pub trait Model {
    fn apply(
        &self,
        state: &PhaserState,
        task: &TaskId,
        op: &PhaserOp,
        variant: SemanticsVariant,
    ) -> Result<PhaserState, StepError>;

    fn view_hb(&self, first: &TaskView, second: &TaskView) -> bool;

    fn view_chb(&self, first: &TaskView, second: &TaskView) -> bool;

    fn phaser_hb(&self, p: &PhaserState, q: &PhaserState) -> bool {
        p.views().any(|v1| q.views().any(|v2| self.view_hb(v1, v2)))
    }

    fn phaser_chb(&self, p: &PhaserState, q: &PhaserState) -> bool {
        p.views()
            .all(|v1| q.views().all(|v2| self.view_chb(v1, v2)))
    }

    fn phaser_mhp(&self, p: &PhaserState, q: &PhaserState) -> bool {
        self.phaser_chb(p, q) && self.phaser_chb(q, p)
    }

    fn well_ordered(&self, p: &PhaserState) -> bool {
        self.phaser_mhp(p, p)
    }
}

/// The crate's own semantics and ordering relations.
#[derive(Debug, Clone, Copy, Default)]
pub struct Reference;

impl Model for Reference {
    fn apply(
        &self,
        state: &PhaserState,
        task: &TaskId,
        op: &PhaserOp,
        variant: SemanticsVariant,
    ) -> Result<PhaserState, StepError> {
        semantics::apply(state, task, op, variant)
    }

    fn view_hb(&self, first: &TaskView, second: &TaskView) -> bool {
        ordering::view_hb(first, second)
    }

    fn view_chb(&self, first: &TaskView, second: &TaskView) -> bool {
        ordering::view_chb(first, second)
    }

    fn phaser_hb(&self, p: &PhaserState, q: &PhaserState) -> bool {
        ordering::phaser_hb(p, q).is_some()
    }

    fn phaser_chb(&self, p: &PhaserState, q: &PhaserState) -> bool {
        ordering::phaser_chb(p, q)
    }

    fn well_ordered(&self, p: &PhaserState) -> bool {
        ordering::well_ordered(p)
    }
}

/// Known-bad variants of the reference semantics. Each one must be caught by
/// at least one property suite.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mutant {
    /// Signal advances the signal phase by two.
    SignalAddsTwo,
    /// Cannot-happen-before forgets its wait-only disjunct.
    ChbWithoutWaitOnly,
    /// Register admits any child mode regardless of the registrar's.
    RegisterSkipsCapability,
}

impl Mutant {
    pub const ALL: [Mutant; 3] = [
        Mutant::SignalAddsTwo,
        Mutant::ChbWithoutWaitOnly,
        Mutant::RegisterSkipsCapability,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Mutant::SignalAddsTwo => "signal-adds-two",
            Mutant::ChbWithoutWaitOnly => "chb-without-wait-only",
            Mutant::RegisterSkipsCapability => "register-skips-capability",
        }
    }
}

impl Model for Mutant {
    fn apply(
        &self,
        state: &PhaserState,
        task: &TaskId,
        op: &PhaserOp,
        variant: SemanticsVariant,
    ) -> Result<PhaserState, StepError> {
        match (self, op) {
            (Mutant::SignalAddsTwo, PhaserOp::Signal) => {
                let next = semantics::apply(state, task, op, variant)?;
                let mut view = *next.get(task).expect("signal keeps the issuer");
                view.signal_phase += 1;
                Ok(next.with(task.clone(), view))
            }
            (Mutant::RegisterSkipsCapability, PhaserOp::Register { new_task, mode }) => {
                let view = *state
                    .get(task)
                    .ok_or_else(|| StepError::MemberAbsent(task.clone()))?;
                if state.contains(new_task) {
                    return Err(StepError::AlreadyRegistered(new_task.clone()));
                }
                Ok(state.with(
                    new_task.clone(),
                    TaskView {
                        mode: *mode,
                        ..view
                    },
                ))
            }
            _ => semantics::apply(state, task, op, variant),
        }
    }

    fn view_hb(&self, first: &TaskView, second: &TaskView) -> bool {
        ordering::view_hb(first, second)
    }

    fn view_chb(&self, first: &TaskView, second: &TaskView) -> bool {
        match self {
            Mutant::ChbWithoutWaitOnly => {
                first.signal_phase >= second.wait_phase
                    || second.mode == semantics::Mode::SignalOnly
            }
            _ => ordering::view_chb(first, second),
        }
    }
}
