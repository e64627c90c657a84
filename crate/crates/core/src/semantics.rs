//! Registration modes, task views, phaser states and the four small-step
//! transition rules (signal, wait, register, drop).
//!
//! A phaser state is an immutable value: [`apply`] never mutates its input
//! and returns the successor state or a [`StepError`] naming the rule
//! precondition that failed.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Registration mode of a phaser member.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Mode {
    /// Signal and wait.
    #[serde(rename = "SW")]
    SignalWait,
    /// Wait only: observes phases, never gates them.
    #[serde(rename = "WO")]
    WaitOnly,
    /// Signal only: gates phases, never waits.
    #[serde(rename = "SO")]
    SignalOnly,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::SignalWait, Mode::WaitOnly, Mode::SignalOnly];

    pub fn can_signal(self) -> bool {
        matches!(self, Mode::SignalOnly | Mode::SignalWait)
    }

    pub fn can_wait(self) -> bool {
        matches!(self, Mode::WaitOnly | Mode::SignalWait)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::SignalWait => "SW",
            Mode::WaitOnly => "WO",
            Mode::SignalOnly => "SO",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown registration mode `{0}` (expected SW, WO or SO)")]
pub struct ParseModeError(pub String);

impl FromStr for Mode {
    type Err = ParseModeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "SW" => Ok(Mode::SignalWait),
            "WO" => Ok(Mode::WaitOnly),
            "SO" => Ok(Mode::SignalOnly),
            other => Err(ParseModeError(other.to_string())),
        }
    }
}

pub fn can_signal(mode: Mode) -> bool {
    mode.can_signal()
}

pub fn can_wait(mode: Mode) -> bool {
    mode.can_wait()
}

/// Opaque task identifier. Ordered lexicographically so that every map keyed
/// by tasks iterates in the same order on every run.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TaskId(String);

impl TaskId {
    pub fn new(name: impl Into<String>) -> Self {
        TaskId(name.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl From<&str> for TaskId {
    fn from(name: &str) -> Self {
        TaskId(name.to_string())
    }
}

impl From<String> for TaskId {
    fn from(name: String) -> Self {
        TaskId(name)
    }
}

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// A member's local view of one phaser: how many signals it issued, how many
/// waits it completed, and its registration mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TaskView {
    #[serde(rename = "sp")]
    pub signal_phase: u64,
    #[serde(rename = "wp")]
    pub wait_phase: u64,
    pub mode: Mode,
}

impl TaskView {
    pub const fn new(signal_phase: u64, wait_phase: u64, mode: Mode) -> Self {
        TaskView {
            signal_phase,
            wait_phase,
            mode,
        }
    }

    /// The view every member of a fresh phaser starts from.
    pub const fn zero(mode: Mode) -> Self {
        TaskView::new(0, 0, mode)
    }

    pub fn can_signal(&self) -> bool {
        self.mode.can_signal()
    }

    pub fn can_wait(&self) -> bool {
        self.mode.can_wait()
    }

    pub fn is_well_formed(&self) -> bool {
        well_formed_view(self)
    }

    fn signalled(self) -> Self {
        TaskView {
            signal_phase: bump(self.signal_phase),
            ..self
        }
    }

    fn waited(self) -> Self {
        let wait_phase = bump(self.wait_phase);
        // A wait-only member cannot signal, so its signal count follows the
        // phase it has observed; otherwise the wait would leave it behind its
        // own wait count.
        let signal_phase = if self.mode == Mode::WaitOnly {
            self.signal_phase.max(wait_phase)
        } else {
            self.signal_phase
        };
        TaskView {
            signal_phase,
            wait_phase,
            mode: self.mode,
        }
    }
}

impl fmt::Display for TaskView {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "({},{},{})",
            self.signal_phase, self.wait_phase, self.mode
        )
    }
}

fn bump(phase: u64) -> u64 {
    phase.checked_add(1).expect("phase counter overflow")
}

/// Wait count never exceeds signal count, and a member that can wait is at
/// most one signal ahead of its waits.
pub fn well_formed_view(view: &TaskView) -> bool {
    view.wait_phase <= view.signal_phase
        && (!view.can_wait() || view.signal_phase - view.wait_phase <= 1)
}

/// State of one phaser: the views of its current members.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PhaserState {
    members: BTreeMap<TaskId, TaskView>,
}

impl PhaserState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, task: &TaskId) -> Option<&TaskView> {
        self.members.get(task)
    }

    pub fn contains(&self, task: &TaskId) -> bool {
        self.members.contains_key(task)
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Members in task order.
    pub fn iter(&self) -> impl Iterator<Item = (&TaskId, &TaskView)> {
        self.members.iter()
    }

    pub fn views(&self) -> impl Iterator<Item = &TaskView> {
        self.members.values()
    }

    pub fn tasks(&self) -> impl Iterator<Item = &TaskId> {
        self.members.keys()
    }

    /// Copy of this state with `task` mapped to `view`.
    pub fn with(&self, task: TaskId, view: TaskView) -> Self {
        let mut next = self.clone();
        next.members.insert(task, view);
        next
    }

    /// Copy of this state without `task`.
    pub fn without(&self, task: &TaskId) -> Self {
        let mut next = self.clone();
        next.members.remove(task);
        next
    }

    pub fn is_well_formed(&self) -> bool {
        self.views().all(well_formed_view)
    }

    /// In-place insert, for callers that own their state.
    pub fn insert(&mut self, task: TaskId, view: TaskView) -> Option<TaskView> {
        self.members.insert(task, view)
    }

    pub fn remove(&mut self, task: &TaskId) -> Option<TaskView> {
        self.members.remove(task)
    }
}

impl FromIterator<(TaskId, TaskView)> for PhaserState {
    fn from_iter<I: IntoIterator<Item = (TaskId, TaskView)>>(iter: I) -> Self {
        PhaserState {
            members: iter.into_iter().collect(),
        }
    }
}

impl fmt::Display for PhaserState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, (task, view)) in self.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{task}:{view}")?;
        }
        f.write_str("}")
    }
}

/// One phaser operation, issued by some member.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "lowercase")]
pub enum PhaserOp {
    Signal,
    Wait,
    Register { new_task: TaskId, mode: Mode },
    Drop,
}

impl fmt::Display for PhaserOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PhaserOp::Signal => f.write_str("signal"),
            PhaserOp::Wait => f.write_str("wait"),
            PhaserOp::Register { new_task, mode } => write!(f, "register {new_task} {mode}"),
            PhaserOp::Drop => f.write_str("drop"),
        }
    }
}

/// Which registration modes are admitted.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SemanticsVariant {
    /// Full Habanero phasers: SW, WO and SO members.
    #[default]
    Habanero,
    /// Java phasers and X10 clocks: every member is SW.
    SwOnly,
}

impl SemanticsVariant {
    pub fn admits(self, mode: Mode) -> bool {
        match self {
            SemanticsVariant::Habanero => true,
            SemanticsVariant::SwOnly => mode == Mode::SignalWait,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Error, Serialize)]
pub enum StepError {
    #[error("task {0} is not registered with the phaser")]
    MemberAbsent(TaskId),
    #[error("task {0} is already registered with the phaser")]
    AlreadyRegistered(TaskId),
    #[error("mode {mode} of task {task} does not permit {op}")]
    ModeForbidden {
        task: TaskId,
        mode: Mode,
        op: &'static str,
    },
    #[error("task {task} must {expected} next (view {view})")]
    PhaseProtocol {
        task: TaskId,
        view: TaskView,
        expected: &'static str,
    },
    #[error("task {task} would block awaiting phase {phase}")]
    WouldBlock { task: TaskId, phase: u64 },
    #[error("mode {0} is not admitted by the SW-only semantics")]
    VariantForbidden(Mode),
}

impl StepError {
    pub fn is_would_block(&self) -> bool {
        matches!(self, StepError::WouldBlock { .. })
    }
}

/// `new_phaser`: a fresh phaser whose only member is its creator.
pub fn new_phaser(
    creator: TaskId,
    mode: Mode,
    variant: SemanticsVariant,
) -> Result<PhaserState, StepError> {
    if !variant.admits(mode) {
        return Err(StepError::VariantForbidden(mode));
    }
    Ok(PhaserState::new().with(creator, TaskView::zero(mode)))
}

/// Phase `n` is observable: every member that can signal has issued at least
/// `n` signals.
pub fn await_phase(state: &PhaserState, n: u64) -> bool {
    state
        .views()
        .filter(|v| v.can_signal())
        .all(|v| v.signal_phase >= n)
}

/// Whether `task` may complete its next wait.
pub fn sync(state: &PhaserState, task: &TaskId) -> Result<bool, StepError> {
    let view = state
        .get(task)
        .ok_or_else(|| StepError::MemberAbsent(task.clone()))?;
    Ok(view.mode == Mode::SignalOnly
        || (view.can_wait() && await_phase(state, view.wait_phase + 1)))
}

/// Reduce `state` by member `task` issuing `op`.
pub fn apply(
    state: &PhaserState,
    task: &TaskId,
    op: &PhaserOp,
    variant: SemanticsVariant,
) -> Result<PhaserState, StepError> {
    if variant == SemanticsVariant::SwOnly {
        if let PhaserOp::Register { mode, .. } = op {
            if !variant.admits(*mode) {
                return Err(StepError::VariantForbidden(*mode));
            }
        }
        if let Some(view) = state.views().find(|v| !variant.admits(v.mode)) {
            return Err(StepError::VariantForbidden(view.mode));
        }
    }

    let view = *state
        .get(task)
        .ok_or_else(|| StepError::MemberAbsent(task.clone()))?;
    let forbidden = |op: &'static str| StepError::ModeForbidden {
        task: task.clone(),
        mode: view.mode,
        op,
    };

    match op {
        PhaserOp::Signal => {
            if !view.can_signal() {
                return Err(forbidden("signal"));
            }
            if view.mode == Mode::SignalWait && view.wait_phase != view.signal_phase {
                return Err(StepError::PhaseProtocol {
                    task: task.clone(),
                    view,
                    expected: "wait",
                });
            }
            Ok(state.with(task.clone(), view.signalled()))
        }
        PhaserOp::Wait => {
            if !view.can_wait() {
                return Err(forbidden("wait"));
            }
            if view.mode == Mode::SignalWait && view.wait_phase + 1 != view.signal_phase {
                return Err(StepError::PhaseProtocol {
                    task: task.clone(),
                    view,
                    expected: "signal",
                });
            }
            if !sync(state, task)? {
                return Err(StepError::WouldBlock {
                    task: task.clone(),
                    phase: view.wait_phase + 1,
                });
            }
            Ok(state.with(task.clone(), view.waited()))
        }
        PhaserOp::Register { new_task, mode } => {
            if state.contains(new_task) {
                return Err(StepError::AlreadyRegistered(new_task.clone()));
            }
            if mode.can_wait() && !view.can_wait() {
                return Err(forbidden("registering a waiter"));
            }
            if mode.can_signal() && !view.can_signal() {
                return Err(forbidden("registering a signaler"));
            }
            let child = TaskView {
                mode: *mode,
                ..view
            };
            Ok(state.with(new_task.clone(), child))
        }
        PhaserOp::Drop => Ok(state.without(task)),
    }
}
