//! Phase ordering: happens-before, cannot-happen-before and
//! may-happen-in-parallel, on single views and on whole phaser states.

use serde::Serialize;

use crate::semantics::{Mode, PhaserState, TaskId, TaskView};

/// The member pair that makes one state happen before another.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct OrderingWitness {
    /// Member of the earlier state.
    pub earlier: TaskId,
    /// Member of the later state.
    pub later: TaskId,
}

/// `first` must have happened before `second`: `first` gates phases, `second`
/// observes them, and `second` has observed a phase `first` had not yet
/// signalled.
pub fn view_hb(first: &TaskView, second: &TaskView) -> bool {
    first.can_signal() && first.signal_phase < second.wait_phase && second.can_wait()
}

/// `first` cannot happen before `second`.
pub fn view_chb(first: &TaskView, second: &TaskView) -> bool {
    first.mode == Mode::WaitOnly
        || first.signal_phase >= second.wait_phase
        || second.mode == Mode::SignalOnly
}

pub fn view_mhp(first: &TaskView, second: &TaskView) -> bool {
    view_chb(first, second) && view_chb(second, first)
}

/// Some member of `p` happened before some member of `q`. Returns the first
/// such pair in task order.
pub fn phaser_hb(p: &PhaserState, q: &PhaserState) -> Option<OrderingWitness> {
    p.iter().find_map(|(earlier, v1)| {
        q.iter()
            .find(|(_, v2)| view_hb(v1, v2))
            .map(|(later, _)| OrderingWitness {
                earlier: earlier.clone(),
                later: later.clone(),
            })
    })
}

/// No member of `p` can happen before any member of `q`. Vacuously true when
/// either state is empty.
pub fn phaser_chb(p: &PhaserState, q: &PhaserState) -> bool {
    p.views().all(|v1| q.views().all(|v2| view_chb(v1, v2)))
}

pub fn phaser_mhp(p: &PhaserState, q: &PhaserState) -> bool {
    phaser_chb(p, q) && phaser_chb(q, p)
}

/// A state with no scheduling constraint among its own members.
pub fn well_ordered(p: &PhaserState) -> bool {
    phaser_mhp(p, p)
}
