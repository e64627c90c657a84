//! Line-oriented trace format.
//!
//! ```text
//! new <task> <phaser> <SW|WO|SO>
//! signal <task> <phaser>
//! wait <task> <phaser>
//! reg <task> <newtask> <phaser> <SW|WO|SO>
//! drop <task> <phaser>
//! read <task> <var>
//! write <task> <var>
//! ```
//!
//! One event per line; `#` starts a comment and blank lines are ignored.

use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::semantics::{Mode, PhaserOp, TaskId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum AccessKind {
    Read,
    Write,
}

impl AccessKind {
    pub fn as_str(self) -> &'static str {
        match self {
            AccessKind::Read => "read",
            AccessKind::Write => "write",
        }
    }
}

impl fmt::Display for AccessKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum EventKind {
    /// Create a phaser; the creator becomes its first member.
    New {
        task: TaskId,
        phaser: String,
        mode: Mode,
    },
    /// A phaser operation issued by `task`.
    Op {
        task: TaskId,
        phaser: String,
        op: PhaserOp,
    },
    /// A shared-memory access.
    Access {
        task: TaskId,
        var: String,
        kind: AccessKind,
    },
}

impl EventKind {
    /// The task issuing the event.
    pub fn task(&self) -> &TaskId {
        match self {
            EventKind::New { task, .. }
            | EventKind::Op { task, .. }
            | EventKind::Access { task, .. } => task,
        }
    }

    pub fn phaser(&self) -> Option<&str> {
        match self {
            EventKind::New { phaser, .. } | EventKind::Op { phaser, .. } => Some(phaser),
            EventKind::Access { .. } => None,
        }
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EventKind::New { task, phaser, mode } => write!(f, "new {task} {phaser} {mode}"),
            EventKind::Op { task, phaser, op } => match op {
                PhaserOp::Signal => write!(f, "signal {task} {phaser}"),
                PhaserOp::Wait => write!(f, "wait {task} {phaser}"),
                PhaserOp::Register { new_task, mode } => {
                    write!(f, "reg {task} {new_task} {phaser} {mode}")
                }
                PhaserOp::Drop => write!(f, "drop {task} {phaser}"),
            },
            EventKind::Access { task, var, kind } => write!(f, "{kind} {task} {var}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TraceEvent {
    /// 1-based source line.
    pub line: usize,
    pub kind: EventKind,
}

impl TraceEvent {
    pub fn task(&self) -> &TaskId {
        self.kind.task()
    }
}

impl fmt::Display for TraceEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.kind.fmt(f)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct Trace {
    pub events: Vec<TraceEvent>,
}

impl Trace {
    /// Builds a trace whose events sit on consecutive lines 1, 2, ...
    pub fn from_kinds(kinds: impl IntoIterator<Item = EventKind>) -> Self {
        Trace {
            events: kinds
                .into_iter()
                .enumerate()
                .map(|(i, kind)| TraceEvent { line: i + 1, kind })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Canonical text form: one event per line, single spaces, `\n` endings.
    pub fn render(&self) -> String {
        render(self)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseErrorKind {
    #[error("unknown keyword `{0}`")]
    UnknownKeyword(String),
    #[error("`{keyword}` takes {expected} arguments, found {found}")]
    Arity {
        keyword: String,
        expected: usize,
        found: usize,
    },
    #[error("bad mode `{0}` (expected SW, WO or SO)")]
    BadMode(String),
    #[error("input is not valid UTF-8")]
    NotUtf8,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub kind: ParseErrorKind,
}

impl ParseError {
    /// The token the parser rejected.
    pub fn token(&self) -> Option<&str> {
        match &self.kind {
            ParseErrorKind::UnknownKeyword(t) | ParseErrorKind::BadMode(t) => Some(t),
            ParseErrorKind::Arity { keyword, .. } => Some(keyword),
            ParseErrorKind::NotUtf8 => None,
        }
    }
}

pub fn parse_bytes(bytes: &[u8]) -> Result<Trace, ParseError> {
    match std::str::from_utf8(bytes) {
        Ok(text) => parse(text),
        Err(e) => {
            let line = bytes[..e.valid_up_to()]
                .iter()
                .filter(|&&b| b == b'\n')
                .count()
                + 1;
            Err(ParseError {
                line,
                kind: ParseErrorKind::NotUtf8,
            })
        }
    }
}

pub fn parse(text: &str) -> Result<Trace, ParseError> {
    let mut events = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("");
        let tokens: Vec<&str> = content.split_whitespace().collect();
        let Some((&keyword, args)) = tokens.split_first() else {
            continue;
        };
        let kind = parse_event(keyword, args).map_err(|kind| ParseError { line, kind })?;
        events.push(TraceEvent { line, kind });
    }
    Ok(Trace { events })
}

fn parse_event(keyword: &str, args: &[&str]) -> Result<EventKind, ParseErrorKind> {
    let expected = match keyword {
        "new" => 3,
        "signal" | "wait" | "drop" | "read" | "write" => 2,
        "reg" => 4,
        other => return Err(ParseErrorKind::UnknownKeyword(other.to_string())),
    };
    if args.len() != expected {
        return Err(ParseErrorKind::Arity {
            keyword: keyword.to_string(),
            expected,
            found: args.len(),
        });
    }
    let mode = |token: &str| {
        token
            .parse::<Mode>()
            .map_err(|_| ParseErrorKind::BadMode(token.to_string()))
    };
    let task = TaskId::from(args[0]);
    let op = |op| EventKind::Op {
        task: task.clone(),
        phaser: args[1].to_string(),
        op,
    };
    Ok(match keyword {
        "new" => EventKind::New {
            task: task.clone(),
            phaser: args[1].to_string(),
            mode: mode(args[2])?,
        },
        "signal" => op(PhaserOp::Signal),
        "wait" => op(PhaserOp::Wait),
        "drop" => op(PhaserOp::Drop),
        "reg" => EventKind::Op {
            task: task.clone(),
            phaser: args[2].to_string(),
            op: PhaserOp::Register {
                new_task: TaskId::from(args[1]),
                mode: mode(args[3])?,
            },
        },
        "read" | "write" => EventKind::Access {
            task: task.clone(),
            var: args[1].to_string(),
            kind: if keyword == "read" {
                AccessKind::Read
            } else {
                AccessKind::Write
            },
        },
        _ => unreachable!("keyword checked above"),
    })
}

pub fn render(trace: &Trace) -> String {
    let mut out = String::new();
    for event in &trace.events {
        out.push_str(&event.kind.to_string());
        out.push('\n');
    }
    out
}
