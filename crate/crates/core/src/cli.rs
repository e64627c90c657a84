//! Command-line front end. [`run`] does all the work and returns the exit
//! code with the rendered output, so it can be tested without a process.

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Read as _;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::oracles::{self, CheckReport, EnumBound, TraceGenConfig};
use crate::racecheck::{self, RaceError};
use crate::semantics::{SemanticsVariant, TaskId};
use crate::tracekit::explore::{self, ExploreOptions, ExploreResult, Outcome};
use crate::tracekit::replay::{self, ReplayResult};
use crate::tracekit::trace::{self, Trace};

/// Largest phase bound used for the exhaustive check over phaser states.
pub const STATE_PHASE_CAP: u64 = 2;
/// Members per state in the exhaustive check over phaser states.
pub const STATE_MEMBERS: usize = 2;
/// Steps per generated trace in the single-step suites.
pub const STEPS_PER_TRACE: usize = 100;
/// Steps per generated trace in the multi-step suite.
pub const MULTI_STEP_LENGTH: usize = 20;

#[derive(Debug, Parser)]
#[command(
    name = "phasekit",
    version,
    about = "Replay, race-check and explore phaser traces"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Replay a trace and print every member's view after each event.
    Replay(InputArgs),
    /// Replay a trace and report racy and ordered access pairs.
    Race(InputArgs),
    /// Enumerate the interleavings of the trace's per-task programs.
    Explore {
        #[command(flatten)]
        input: InputArgs,
        /// Stop after this many terminal interleavings.
        #[arg(long, default_value_t = explore::DEFAULT_MAX_INTERLEAVINGS as u64, value_parser = clap::value_parser!(u64).range(1..))]
        interleavings: u64,
    },
    /// Run the exhaustive and randomized property suites.
    Prop(PropArgs),
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// Trace file, or `-` for standard input.
    pub input: PathBuf,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
    /// Admit only SW registrations (Java phasers, X10 clocks).
    #[arg(long)]
    pub sw_only: bool,
}

impl CommonArgs {
    fn variant(&self) -> SemanticsVariant {
        if self.sw_only {
            SemanticsVariant::SwOnly
        } else {
            SemanticsVariant::Habanero
        }
    }
}

#[derive(Debug, Args)]
pub struct PropArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Phase bound for the exhaustive view checks; the state check uses at
    /// most 2.
    #[arg(long, default_value_t = EnumBound::DEFAULT.max_phase, value_parser = clap::value_parser!(u64).range(1..))]
    pub max_phase: u64,
    /// Random reduction steps for each single-step suite.
    #[arg(long, default_value_t = 10_000, value_parser = clap::value_parser!(u64).range(1..))]
    pub steps: u64,
    /// Traces for the multi-step suite, all state pairs checked.
    #[arg(long, default_value_t = 1_000, value_parser = clap::value_parser!(u64).range(1..))]
    pub traces: u64,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliOutput {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

impl CliOutput {
    fn ok(code: i32, stdout: String) -> Self {
        CliOutput {
            code,
            stdout,
            stderr: String::new(),
        }
    }

    fn usage(stderr: String) -> Self {
        CliOutput {
            code: 2,
            stdout: String::new(),
            stderr,
        }
    }
}

/// Parses `argv` (program name first) and runs the command, reading `-`
/// from the process's standard input.
pub fn run<I, T>(argv: I) -> CliOutput
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    run_with_stdin(argv, || {
        let mut buf = Vec::new();
        std::io::stdin().read_to_end(&mut buf).map(|_| buf)
    })
}

/// Like [`run`], with standard input supplied by `stdin`.
pub fn run_with_stdin<I, T>(argv: I, stdin: impl FnOnce() -> std::io::Result<Vec<u8>>) -> CliOutput
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    CliOutput::ok(0, text)
                }
                _ => CliOutput::usage(text),
            };
        }
    };
    match cli.command {
        Command::Replay(args) => with_trace(&args, stdin, |t| cmd_replay(t, &args.common)),
        Command::Race(args) => with_trace(&args, stdin, |t| cmd_race(t, &args.common)),
        Command::Explore {
            input,
            interleavings,
        } => with_trace(&input, stdin, |t| {
            cmd_explore(t, &input.common, interleavings as usize)
        }),
        Command::Prop(args) => cmd_prop(&args),
    }
}

fn with_trace(
    args: &InputArgs,
    stdin: impl FnOnce() -> std::io::Result<Vec<u8>>,
    body: impl FnOnce(&Trace) -> CliOutput,
) -> CliOutput {
    let name = args.input.display().to_string();
    let bytes = if name == "-" {
        stdin()
    } else {
        std::fs::read(&args.input)
    };
    let bytes = match bytes {
        Ok(b) => b,
        Err(e) => return CliOutput::usage(format!("error: cannot read {name}: {e}\n")),
    };
    match trace::parse_bytes(&bytes) {
        Ok(t) => body(&t),
        Err(e) => CliOutput::usage(format!("error: {name}: {e}\n")),
    }
}

fn to_json(value: &impl serde::Serialize) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("output serializes");
    s.push('\n');
    s
}

fn cmd_replay(trace: &Trace, common: &CommonArgs) -> CliOutput {
    let result = replay::replay(trace, common.variant());
    let code = if result.completed() { 0 } else { 1 };
    let stdout = match common.format {
        Format::Text => render_replay_table(&result),
        Format::Json => to_json(&json!({
            "steps": result.steps.iter().map(|s| json!({
                "line": s.event.line,
                "event": s.event.to_string(),
                "states": s.states,
            })).collect::<Vec<_>>(),
            "error": result.error.as_ref().map(|e| json!({
                "line": e.line,
                "message": e.kind.to_string(),
            })),
        })),
    };
    CliOutput::ok(code, stdout)
}

/// One row per executed event and one column per (phaser, task) membership
/// ever seen; cells read `sp:<n>,wp:<n>` and `-` for non-members.
pub fn render_replay_table(result: &ReplayResult) -> String {
    let columns: BTreeSet<(String, TaskId)> = result
        .steps
        .iter()
        .flat_map(|s| {
            s.states
                .iter()
                .flat_map(|(ph, st)| st.tasks().map(move |t| (ph.clone(), t.clone())))
        })
        .collect();
    let mut rows: Vec<Vec<String>> = vec![std::iter::once("line".to_string())
        .chain(std::iter::once("event".to_string()))
        .chain(columns.iter().map(|(ph, t)| format!("{ph}/{t}")))
        .collect()];
    for step in &result.steps {
        let mut row = vec![step.event.line.to_string(), step.event.to_string()];
        for (ph, t) in &columns {
            row.push(match step.states.get(ph).and_then(|s| s.get(t)) {
                Some(v) => format!("sp:{},wp:{}", v.signal_phase, v.wait_phase),
                None => "-".to_string(),
            });
        }
        rows.push(row);
    }
    let widths: Vec<usize> = (0..rows[0].len())
        .map(|c| rows.iter().map(|r| r[c].len()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for row in &rows {
        let cells: Vec<String> = row
            .iter()
            .zip(&widths)
            .map(|(cell, w)| format!("{cell:<w$}"))
            .collect();
        let _ = writeln!(out, "{}", cells.join("  ").trim_end());
    }
    if let Some(e) = &result.error {
        let _ = writeln!(out, "error: {e}");
    }
    out
}

fn cmd_race(trace: &Trace, common: &CommonArgs) -> CliOutput {
    let result = replay::replay(trace, common.variant());
    match racecheck::detect(&result) {
        Ok(report) => {
            let code = if report.has_races() { 1 } else { 0 };
            let stdout = match common.format {
                Format::Text => report.render_text(),
                Format::Json => {
                    let mut s = report.to_json();
                    s.push('\n');
                    s
                }
            };
            CliOutput::ok(code, stdout)
        }
        Err(RaceError::IncompleteReplay(e)) => CliOutput::usage(format!(
            "error: replay did not complete: {e}; race detection needs a completed schedule\n"
        )),
    }
}

fn cmd_explore(trace: &Trace, common: &CommonArgs, interleavings: usize) -> CliOutput {
    let programs = explore::programs_from_trace(trace);
    let result = explore::explore_with(
        &programs,
        &ExploreOptions {
            max_interleavings: interleavings,
            keep_schedules: 0,
            variant: common.variant(),
        },
    );
    let code = if result.has_problems() { 1 } else { 0 };
    let stdout = match common.format {
        Format::Text => render_explore(&result),
        Format::Json => to_json(&result),
    };
    CliOutput::ok(code, stdout)
}

pub fn render_explore(result: &ExploreResult) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "interleavings: {}", result.interleavings);
    let _ = writeln!(out, "truncated: {}", result.truncated);
    let _ = writeln!(out, "outcomes: {}", result.outcomes.len());
    for outcome in &result.outcomes {
        let _ = writeln!(out, "  {}", render_outcome(outcome));
    }
    for (label, pairs) in [("races", &result.races), ("coenabled", &result.coenabled)] {
        let _ = writeln!(out, "{label}: {}", pairs.len());
        for r in pairs {
            let _ = writeln!(
                out,
                "  {}: {} {} line {} || {} {} line {}",
                r.var, r.a.kind, r.a.task, r.a.line, r.b.kind, r.b.task, r.b.line
            );
        }
    }
    let _ = writeln!(out, "ordering violations: {}", result.ordering_violations);
    out
}

fn render_outcome(outcome: &Outcome) -> String {
    let blocked = |tasks: &[explore::BlockedTask]| {
        tasks
            .iter()
            .map(|b| {
                format!(
                    "{} on {} line {} for phase {}",
                    b.task, b.phaser, b.line, b.phase
                )
            })
            .collect::<Vec<_>>()
            .join(", ")
    };
    match outcome {
        Outcome::Completed { finals } => {
            let states: Vec<String> = finals.iter().map(|(ph, s)| format!("{ph}={s}")).collect();
            format!("completed: {}", states.join(" "))
        }
        Outcome::Deadlock { blocked: b } => format!("deadlock: {}", blocked(b)),
        Outcome::Orphaned { tasks, blocked: b } => {
            let names: Vec<&str> = tasks.iter().map(TaskId::as_str).collect();
            format!(
                "orphaned: {} never started; blocked: {}",
                names.join(", "),
                blocked(b)
            )
        }
        Outcome::IllegalOp { line, error } => format!("illegal: line {line}: {error}"),
    }
}

fn cmd_prop(args: &PropArgs) -> CliOutput {
    let variant = args.common.variant();
    let bound = EnumBound::new(args.max_phase);
    let state_bound = EnumBound::new(args.max_phase.min(STATE_PHASE_CAP));
    let step_cfg = TraceGenConfig {
        seed: args.seed,
        max_steps: STEPS_PER_TRACE,
        variant,
        ..TraceGenConfig::default()
    };
    let step_traces = (args.steps as usize).div_ceil(STEPS_PER_TRACE);
    let multi_cfg = TraceGenConfig {
        max_steps: MULTI_STEP_LENGTH,
        ..step_cfg
    };
    let random =
        |r: Result<CheckReport, oracles::ConfigError>| r.expect("built-in config is valid");
    let reports = vec![
        oracles::check_duality(bound),
        oracles::check_view_causality(bound),
        oracles::check_phaser_causality(state_bound, STATE_MEMBERS),
        random(oracles::check_wf_preservation(&step_cfg, step_traces)),
        random(oracles::check_wo_preservation(&step_cfg, step_traces)),
        random(oracles::check_step_ordering(&step_cfg, step_traces)),
        random(oracles::check_multi_step_ordering(
            &multi_cfg,
            args.traces as usize,
        )),
    ];
    let code = if reports.iter().all(CheckReport::passed) {
        0
    } else {
        1
    };
    let stdout = match args.common.format {
        Format::Text => reports.iter().map(CheckReport::render_text).collect(),
        Format::Json => to_json(&reports),
    };
    CliOutput::ok(code, stdout)
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO_TASK: &str = include_str!("../tests/fixtures/two_task_race.trace");

    fn run_on(args: &[&str], input: &str) -> CliOutput {
        let owned = input.as_bytes().to_vec();
        run_with_stdin(
            std::iter::once("phasekit").chain(args.iter().copied()),
            move || Ok(owned),
        )
    }

    #[test]
    fn replay_table_final_row() {
        let out = run_on(&["replay", "-"], TWO_TASK);
        assert_eq!(out.code, 0, "{}", out.stderr);
        let last = out.stdout.lines().last().unwrap();
        assert!(last.contains("drop t1 ph"));
        let wait_row = out
            .stdout
            .lines()
            .find(|l| l.contains("wait t2 ph"))
            .unwrap();
        assert_eq!(wait_row.matches("sp:1,wp:1").count(), 2);
    }

    #[test]
    fn race_json_exit_one() {
        let out = run_on(&["race", "-", "--format", "json"], TWO_TASK);
        assert_eq!(out.code, 1);
        let v: serde_json::Value = serde_json::from_str(&out.stdout).unwrap();
        assert_eq!(v["races"].as_array().unwrap().len(), 1);
        assert_eq!(v["races"][0]["var"], "y");
        assert_eq!(v["ordered"][0]["var"], "x");
    }

    #[test]
    fn parse_error_is_usage() {
        let out = run_on(&["replay", "-"], "frobnicate t1 ph\n");
        assert_eq!(out.code, 2);
        assert!(out.stderr.contains("line 1"));
        assert!(out.stdout.is_empty());
    }

    #[test]
    fn bad_flags_are_usage() {
        assert_eq!(run_on(&["prop", "--steps", "0"], "").code, 2);
        assert_eq!(run_on(&["replay"], "").code, 2);
        assert_eq!(run_on(&["nonsense"], "").code, 2);
        assert_eq!(run_on(&["--help"], "").code, 0);
    }

    #[test]
    fn replay_failure_exits_one() {
        let out = run_on(&["replay", "-"], "new t1 ph SW\nwait t1 ph\n");
        assert_eq!(out.code, 1);
        assert!(out.stdout.contains("error: line 2"));
    }

    #[test]
    fn race_on_incomplete_replay_is_usage() {
        let out = run_on(&["race", "-"], "signal t1 ph\n");
        assert_eq!(out.code, 2);
    }

    #[test]
    fn sw_only_flag_applies() {
        let out = run_on(&["replay", "-", "--sw-only"], "new t1 ph SO\n");
        assert_eq!(out.code, 1);
    }

    #[test]
    fn explore_is_deterministic() {
        let a = run_on(&["explore", "-", "--format", "json"], TWO_TASK);
        let b = run_on(&["explore", "-", "--format", "json"], TWO_TASK);
        assert_eq!(a, b);
        assert_eq!(a.code, 1);
        let v: serde_json::Value = serde_json::from_str(&a.stdout).unwrap();
        assert_eq!(v["races"].as_array().unwrap().len(), 1);
    }

    #[test]
    fn prop_small_run_passes() {
        let out = run_on(
            &[
                "prop",
                "--seed",
                "7",
                "--steps",
                "500",
                "--traces",
                "20",
                "--max-phase",
                "2",
            ],
            "",
        );
        assert_eq!(out.code, 0, "{}", out.stdout);
        assert_eq!(
            out.stdout.lines().filter(|l| l.starts_with("PASS")).count(),
            7
        );
    }
}
