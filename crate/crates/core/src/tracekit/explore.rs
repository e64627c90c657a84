//! Bounded depth-first enumeration of the interleavings of per-task programs.
//!
//! A task's next event runs only when it is enabled: a wait whose sync
//! condition fails defers the task instead of failing. Tasks named as the
//! target of some `reg` start once every such `reg` has executed; all other
//! tasks start immediately.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::ordering::phaser_chb;
use crate::racecheck::{ordered, AccessSnapshot, RacePair};
use crate::semantics::{PhaserOp, PhaserState, SemanticsVariant, StepError, TaskId};
use crate::tracekit::replay::{Machine, PhaserMap, ReplayErrorKind};
use crate::tracekit::trace::{EventKind, Trace, TraceEvent};

pub const DEFAULT_MAX_INTERLEAVINGS: usize = 100_000;

/// The events of one task, in program order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskProgram {
    pub task: TaskId,
    pub events: Vec<TraceEvent>,
}

/// Splits a trace into per-task programs, ordered by task id.
pub fn programs_from_trace(trace: &Trace) -> Vec<TaskProgram> {
    let mut by_task: BTreeMap<TaskId, Vec<TraceEvent>> = BTreeMap::new();
    for event in &trace.events {
        by_task
            .entry(event.task().clone())
            .or_default()
            .push(event.clone());
    }
    by_task
        .into_iter()
        .map(|(task, events)| TaskProgram { task, events })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct BlockedTask {
    pub task: TaskId,
    pub phaser: String,
    pub line: usize,
    /// The phase the wait is waiting to observe.
    pub phase: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum Outcome {
    /// Every program ran to its end.
    Completed { finals: PhaserMap },
    /// Every unfinished task is blocked on a wait.
    Deadlock { blocked: Vec<BlockedTask> },
    /// Some tasks never started because a `reg` naming them never ran.
    Orphaned {
        tasks: Vec<TaskId>,
        blocked: Vec<BlockedTask>,
    },
    /// An event failed with a non-blocking error.
    IllegalOp { line: usize, error: ReplayErrorKind },
}

impl Outcome {
    pub fn is_completed(&self) -> bool {
        matches!(self, Outcome::Completed { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExploreOptions {
    pub max_interleavings: usize,
    /// How many completed schedules to keep in the result.
    pub keep_schedules: usize,
    pub variant: SemanticsVariant,
}

impl Default for ExploreOptions {
    fn default() -> Self {
        ExploreOptions {
            max_interleavings: DEFAULT_MAX_INTERLEAVINGS,
            keep_schedules: 16,
            variant: SemanticsVariant::Habanero,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ExploreResult {
    /// Terminal paths visited.
    pub interleavings: usize,
    /// The bound was hit before the search finished.
    pub truncated: bool,
    pub outcomes: BTreeSet<Outcome>,
    /// Conflicting pairs left unordered by phaser views in some interleaving.
    pub races: BTreeSet<RacePair>,
    /// Conflicting pairs that were both next-enabled in some reached state.
    pub coenabled: BTreeSet<RacePair>,
    /// Reached states that could happen before their phaser's initial state.
    pub ordering_violations: usize,
    /// The first completed schedules, as flat traces.
    #[serde(skip)]
    pub schedules: Vec<Trace>,
}

impl ExploreResult {
    pub fn has_problems(&self) -> bool {
        !self.races.is_empty()
            || self.ordering_violations > 0
            || self.outcomes.iter().any(|o| !o.is_completed())
    }
}

#[derive(Clone)]
struct Node {
    machine: Machine,
    initial: BTreeMap<String, PhaserState>,
    pc: Vec<usize>,
    regs_left: Vec<usize>,
    accesses: Vec<AccessSnapshot>,
    schedule: Vec<(usize, usize)>,
}

pub fn explore(programs: &[TaskProgram], max_interleavings: usize) -> ExploreResult {
    explore_with(
        programs,
        &ExploreOptions {
            max_interleavings,
            ..ExploreOptions::default()
        },
    )
}

pub fn explore_with(programs: &[TaskProgram], opts: &ExploreOptions) -> ExploreResult {
    let index: BTreeMap<&TaskId, usize> = programs
        .iter()
        .enumerate()
        .map(|(i, p)| (&p.task, i))
        .collect();
    let mut regs_left = vec![0; programs.len()];
    for program in programs {
        for event in &program.events {
            if let Some(target) = reg_target(event) {
                if target != &program.task {
                    if let Some(&i) = index.get(target) {
                        regs_left[i] += 1;
                    }
                }
            }
        }
    }

    let mut result = ExploreResult::default();
    let mut stack = vec![Node {
        machine: Machine::new(),
        initial: BTreeMap::new(),
        pc: vec![0; programs.len()],
        regs_left,
        accesses: Vec::new(),
        schedule: Vec::new(),
    }];

    while let Some(node) = stack.pop() {
        if result.interleavings >= opts.max_interleavings {
            result.truncated = true;
            break;
        }
        record_coenabled(programs, &node, &mut result.coenabled);

        let mut children = Vec::new();
        let mut blocked = Vec::new();
        let mut illegal = false;
        for (p, program) in programs.iter().enumerate() {
            if node.pc[p] == program.events.len() || node.regs_left[p] > 0 {
                continue;
            }
            let event = &program.events[node.pc[p]];
            let mut machine = node.machine.clone();
            match machine.execute(event, opts.variant) {
                Ok(access) => {
                    let mut child = Node {
                        machine,
                        ..node.clone()
                    };
                    child.pc[p] += 1;
                    child.schedule.push((p, node.pc[p]));
                    advance(programs, &index, event, &mut child, &mut result, access);
                    children.push(child);
                }
                Err(ReplayErrorKind::Step(StepError::WouldBlock { phase, .. })) => {
                    blocked.push(BlockedTask {
                        task: program.task.clone(),
                        phaser: event.kind.phaser().unwrap_or_default().to_string(),
                        line: event.line,
                        phase,
                    });
                }
                Err(error) => {
                    illegal = true;
                    result.interleavings += 1;
                    result.outcomes.insert(Outcome::IllegalOp {
                        line: event.line,
                        error,
                    });
                }
            }
        }

        if children.is_empty() && !illegal {
            result.interleavings += 1;
            let unstarted: Vec<TaskId> = programs
                .iter()
                .enumerate()
                .filter(|&(p, prog)| node.regs_left[p] > 0 && node.pc[p] < prog.events.len())
                .map(|(_, prog)| prog.task.clone())
                .collect();
            let outcome = if blocked.is_empty() && unstarted.is_empty() {
                if result.schedules.len() < opts.keep_schedules {
                    result.schedules.push(flatten(programs, &node.schedule));
                }
                Outcome::Completed {
                    finals: node.machine.phasers.clone(),
                }
            } else if unstarted.is_empty() {
                Outcome::Deadlock { blocked }
            } else {
                Outcome::Orphaned {
                    tasks: unstarted,
                    blocked,
                }
            };
            result.outcomes.insert(outcome);
        }
        stack.extend(children.into_iter().rev());
    }
    result
}

fn reg_target(event: &TraceEvent) -> Option<&TaskId> {
    match &event.kind {
        EventKind::Op {
            op: PhaserOp::Register { new_task, .. },
            ..
        } => Some(new_task),
        _ => None,
    }
}

/// Bookkeeping after `event` ran in `child`.
fn advance(
    programs: &[TaskProgram],
    index: &BTreeMap<&TaskId, usize>,
    event: &TraceEvent,
    child: &mut Node,
    result: &mut ExploreResult,
    access: Option<AccessSnapshot>,
) {
    match &event.kind {
        EventKind::New { phaser, .. } => {
            let state = child.machine.phasers[phaser].clone();
            child.initial.insert(phaser.clone(), state);
        }
        EventKind::Op { phaser, .. } => {
            if let Some(target) = reg_target(event) {
                if let Some(&i) = index.get(target) {
                    if &programs[i].task != event.task() {
                        child.regs_left[i] = child.regs_left[i].saturating_sub(1);
                    }
                }
            }
            let now = &child.machine.phasers[phaser];
            if let Some(initial) = child.initial.get(phaser) {
                if !phaser_chb(now, initial) {
                    result.ordering_violations += 1;
                }
            }
        }
        EventKind::Access { .. } => {}
    }
    if let Some(snapshot) = access {
        for prior in &child.accesses {
            if prior.conflicts_with(&snapshot) && ordered(prior, &snapshot).is_none() {
                result.races.insert(RacePair::of(prior, &snapshot));
            }
        }
        child.accesses.push(snapshot);
    }
}

fn record_coenabled(programs: &[TaskProgram], node: &Node, out: &mut BTreeSet<RacePair>) {
    let frontier: Vec<AccessSnapshot> = programs
        .iter()
        .enumerate()
        .filter(|&(p, prog)| node.regs_left[p] == 0 && node.pc[p] < prog.events.len())
        .filter_map(|(p, prog)| {
            let event = &prog.events[node.pc[p]];
            match &event.kind {
                EventKind::Access { task, var, kind } => Some(AccessSnapshot {
                    task: task.clone(),
                    var: var.clone(),
                    kind: *kind,
                    line: event.line,
                    views: BTreeMap::new(),
                }),
                _ => None,
            }
        })
        .collect();
    for (i, x) in frontier.iter().enumerate() {
        for y in &frontier[i + 1..] {
            if x.conflicts_with(y) {
                out.insert(RacePair::of(x, y));
            }
        }
    }
}

fn flatten(programs: &[TaskProgram], schedule: &[(usize, usize)]) -> Trace {
    Trace {
        events: schedule
            .iter()
            .map(|&(p, i)| programs[p].events[i].clone())
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tracekit::trace::parse;

    fn programs(text: &str) -> Vec<TaskProgram> {
        programs_from_trace(&parse(text).unwrap())
    }

    #[test]
    fn single_program_has_one_interleaving() {
        let res = explore(&programs("new t1 ph SW\nsignal t1 ph\nwait t1 ph\n"), 100);
        assert_eq!(res.interleavings, 1);
        assert_eq!(res.outcomes.len(), 1);
        assert!(res.outcomes.iter().next().unwrap().is_completed());
        assert!(!res.truncated);
    }

    #[test]
    fn missing_signaler_deadlocks() {
        let progs = programs("new t1 ph SW\nreg t1 t2 ph SW\nsignal t1 ph\nwait t1 ph\n");
        // t2 has no events of its own here, so it is not a program at all;
        // add it as an empty one.
        let mut progs = progs;
        progs.push(TaskProgram {
            task: TaskId::from("t2"),
            events: vec![],
        });
        let res = explore(&progs, 100);
        assert_eq!(res.interleavings, 1);
        let outcome = res.outcomes.iter().next().unwrap();
        assert_eq!(
            outcome,
            &Outcome::Deadlock {
                blocked: vec![BlockedTask {
                    task: TaskId::from("t1"),
                    phaser: "ph".into(),
                    line: 4,
                    phase: 1
                }]
            }
        );
    }

    #[test]
    fn illegal_op_is_reported() {
        let res = explore(&programs("new t1 ph SO\nwait t1 ph\n"), 100);
        assert!(matches!(
            res.outcomes.iter().next().unwrap(),
            Outcome::IllegalOp { line: 2, .. }
        ));
    }

    #[test]
    fn bound_truncates() {
        let text = "new a p SO\nnew b q SO\nsignal a p\nsignal a p\nsignal b q\nsignal b q\n";
        let full = explore(&programs(text), 1_000);
        assert_eq!(full.interleavings, 20); // C(6,3)
        let cut = explore(&programs(text), 5);
        assert!(cut.truncated);
        assert_eq!(cut.interleavings, 5);
    }

    #[test]
    fn unstarted_task_is_orphaned() {
        // t3 is registered but has no program, so t1's wait never returns and
        // the reg that would start t2 never runs.
        let text = "new t1 ph SW\nreg t1 t3 ph SW\nsignal t1 ph\nwait t1 ph\n\
                    reg t1 t2 ph SW\nsignal t2 ph\n";
        let res = explore(&programs(text), 100);
        assert_eq!(res.interleavings, 1);
        assert_eq!(
            res.outcomes.iter().next().unwrap(),
            &Outcome::Orphaned {
                tasks: vec![TaskId::from("t2")],
                blocked: vec![BlockedTask {
                    task: TaskId::from("t1"),
                    phaser: "ph".into(),
                    line: 4,
                    phase: 1
                }]
            }
        );
    }
}
