//! Data-race detection over replayed traces.
//!
//! Two accesses to the same variable from different tasks, at least one of
//! them a write, are ordered when some phaser both tasks hold makes one
//! access's view happen before the other's. Every other such pair is a race.
//! Spawn edges are not ordering evidence: only phaser views are compared.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

use crate::ordering::view_hb;
use crate::semantics::{TaskId, TaskView};
use crate::tracekit::replay::{ReplayError, ReplayResult};
use crate::tracekit::trace::AccessKind;

/// A memory access tagged with the issuing task's views at access time.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AccessSnapshot {
    pub task: TaskId,
    pub var: String,
    pub kind: AccessKind,
    pub line: usize,
    /// Views on every phaser the task was registered with.
    pub views: BTreeMap<String, TaskView>,
}

impl AccessSnapshot {
    pub fn access_ref(&self) -> AccessRef {
        AccessRef {
            task: self.task.clone(),
            line: self.line,
            kind: self.kind,
        }
    }

    /// Same variable, different tasks, at least one write.
    pub fn conflicts_with(&self, other: &AccessSnapshot) -> bool {
        self.var == other.var
            && self.task != other.task
            && (self.kind == AccessKind::Write || other.kind == AccessKind::Write)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Direction {
    #[serde(rename = "a->b")]
    AToB,
    #[serde(rename = "b->a")]
    BToA,
}

impl Direction {
    pub fn arrow(self) -> &'static str {
        match self {
            Direction::AToB => "->",
            Direction::BToA => "<-",
        }
    }
}

/// Returns the first shared phaser (by name) whose views order `a` and `b`,
/// with the direction of the order.
pub fn ordered(a: &AccessSnapshot, b: &AccessSnapshot) -> Option<(String, Direction)> {
    a.views.iter().find_map(|(phaser, va)| {
        let vb = b.views.get(phaser)?;
        if view_hb(va, vb) {
            Some((phaser.clone(), Direction::AToB))
        } else if view_hb(vb, va) {
            Some((phaser.clone(), Direction::BToA))
        } else {
            None
        }
    })
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct AccessRef {
    pub task: TaskId,
    pub line: usize,
    pub kind: AccessKind,
}

/// An unordered conflicting pair; `a` is the access on the earlier line.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct RacePair {
    pub var: String,
    pub a: AccessRef,
    pub b: AccessRef,
}

impl RacePair {
    /// Canonical pair for two conflicting accesses.
    pub fn of(x: &AccessSnapshot, y: &AccessSnapshot) -> Self {
        let (a, b) = if (x.line, &x.task) <= (y.line, &y.task) {
            (x, y)
        } else {
            (y, x)
        };
        RacePair {
            var: a.var.clone(),
            a: a.access_ref(),
            b: b.access_ref(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct OrderedPair {
    pub var: String,
    pub a: AccessRef,
    pub b: AccessRef,
    pub phaser: String,
    pub direction: Direction,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct RaceReport {
    pub races: Vec<RacePair>,
    pub ordered: Vec<OrderedPair>,
}

impl RaceReport {
    pub fn has_races(&self) -> bool {
        !self.races.is_empty()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "races: {}", self.races.len());
        for r in &self.races {
            let _ = writeln!(
                out,
                "  {}: {} {} line {} || {} {} line {}",
                r.var, r.a.kind, r.a.task, r.a.line, r.b.kind, r.b.task, r.b.line
            );
        }
        let _ = writeln!(out, "ordered: {}", self.ordered.len());
        for o in &self.ordered {
            let _ = writeln!(
                out,
                "  {}: {} {} line {} {} {} {} line {} (via {})",
                o.var,
                o.a.kind,
                o.a.task,
                o.a.line,
                o.direction.arrow(),
                o.b.kind,
                o.b.task,
                o.b.line,
                o.phaser
            );
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RaceError {
    #[error("replay did not complete ({0})")]
    IncompleteReplay(ReplayError),
}

/// Classifies every conflicting cross-task pair of a completed replay.
pub fn detect(result: &ReplayResult) -> Result<RaceReport, RaceError> {
    if let Some(err) = &result.error {
        return Err(RaceError::IncompleteReplay(err.clone()));
    }
    Ok(classify(&result.accesses))
}

pub fn classify(accesses: &[AccessSnapshot]) -> RaceReport {
    let mut report = RaceReport::default();
    for (i, x) in accesses.iter().enumerate() {
        for y in &accesses[i + 1..] {
            if !x.conflicts_with(y) {
                continue;
            }
            let pair = RacePair::of(x, y);
            let (first, second) = if pair.a.line == x.line && pair.a.task == x.task {
                (x, y)
            } else {
                (y, x)
            };
            match ordered(first, second) {
                Some((phaser, direction)) => report.ordered.push(OrderedPair {
                    var: pair.var,
                    a: pair.a,
                    b: pair.b,
                    phaser,
                    direction,
                }),
                None => report.races.push(pair),
            }
        }
    }
    report.races.sort();
    report.ordered.sort();
    report
}
