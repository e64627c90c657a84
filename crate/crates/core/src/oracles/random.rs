use std::time::Instant;

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::oracles::{CheckReport, Model, Reference};
use crate::semantics::{Mode, PhaserOp, PhaserState, SemanticsVariant, TaskId, TaskView};

/// Relative chance of each mode when the generator picks one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModeWeights {
    pub sw: f64,
    pub wo: f64,
    pub so: f64,
}

impl ModeWeights {
    pub fn of(&self, mode: Mode) -> f64 {
        match mode {
            Mode::SignalWait => self.sw,
            Mode::WaitOnly => self.wo,
            Mode::SignalOnly => self.so,
        }
    }
}

impl Default for ModeWeights {
    fn default() -> Self {
        ModeWeights {
            sw: 2.0,
            wo: 1.0,
            so: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceGenConfig {
    pub seed: u64,
    /// Upper bound on the phaser's membership at any point.
    pub max_tasks: usize,
    pub max_steps: usize,
    pub mode_weights: ModeWeights,
    pub variant: SemanticsVariant,
}

impl Default for TraceGenConfig {
    fn default() -> Self {
        TraceGenConfig {
            seed: 0,
            max_tasks: 4,
            max_steps: 100,
            mode_weights: ModeWeights::default(),
            variant: SemanticsVariant::Habanero,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("max_tasks must be at least 1")]
    NoTasks,
    #[error("mode weights must be finite and non-negative with at least one positive")]
    BadWeights,
}

impl TraceGenConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.max_tasks == 0 {
            return Err(ConfigError::NoTasks);
        }
        let w = [
            self.mode_weights.sw,
            self.mode_weights.wo,
            self.mode_weights.so,
        ];
        if w.iter().any(|x| !x.is_finite() || *x < 0.0) || w.iter().all(|x| *x == 0.0) {
            return Err(ConfigError::BadWeights);
        }
        Ok(())
    }
}

/// One reduction P ⇝ Q by `task` performing `op`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Step {
    pub before: PhaserState,
    pub task: TaskId,
    pub op: PhaserOp,
    pub after: PhaserState,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TraceEnd {
    /// `max_steps` steps were taken.
    StepBudget,
    /// No operation was enabled: every member is a blocked waiter.
    Stuck,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GeneratedTrace {
    pub initial: PhaserState,
    pub steps: Vec<Step>,
    pub end: TraceEnd,
}

impl GeneratedTrace {
    /// The initial state followed by every post-state.
    pub fn states(&self) -> impl Iterator<Item = &PhaserState> {
        std::iter::once(&self.initial).chain(self.steps.iter().map(|s| &s.after))
    }
}

pub fn random_trace(cfg: &TraceGenConfig) -> Result<GeneratedTrace, ConfigError> {
    random_trace_with(&Reference, cfg)
}

/// A random reduction sequence under `model`, reproducible from `cfg.seed`.
pub fn random_trace_with(
    model: &impl Model,
    cfg: &TraceGenConfig,
) -> Result<GeneratedTrace, ConfigError> {
    cfg.validate()?;
    Ok(generate(
        model,
        cfg,
        &mut ChaCha8Rng::seed_from_u64(cfg.seed),
    ))
}

/// Generator for trace number `index` of a check run.
fn trace_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Picks among `modes` by weight; `None` if every weight is zero.
fn pick_mode(rng: &mut impl Rng, weights: &ModeWeights, modes: &[Mode]) -> Option<Mode> {
    let dist = WeightedIndex::new(modes.iter().map(|m| weights.of(*m))).ok()?;
    Some(modes[dist.sample(rng)])
}

#[derive(Clone, Copy)]
enum Candidate {
    Signal,
    Wait,
    Drop,
    Register,
}

fn generate(model: &impl Model, cfg: &TraceGenConfig, rng: &mut ChaCha8Rng) -> GeneratedTrace {
    let signalers: Vec<Mode> = Mode::ALL
        .into_iter()
        .filter(|m| m.can_signal() && cfg.variant.admits(*m))
        .collect();
    let creator_mode = pick_mode(rng, &cfg.mode_weights, &signalers).unwrap_or(Mode::SignalWait);
    let initial = PhaserState::new().with(TaskId::new("t0"), TaskView::zero(creator_mode));
    let mut next_id = 1usize;
    let mut state = initial.clone();
    let mut steps = Vec::new();
    let mut end = TraceEnd::StepBudget;

    while steps.len() < cfg.max_steps {
        let fresh = TaskId::new(format!("t{next_id}"));
        let mut candidates: Vec<(TaskId, Candidate, Vec<Mode>)> = Vec::new();
        for task in state.tasks() {
            let enabled = |op: &PhaserOp| model.apply(&state, task, op, cfg.variant).is_ok();
            if enabled(&PhaserOp::Signal) {
                candidates.push((task.clone(), Candidate::Signal, Vec::new()));
            }
            if enabled(&PhaserOp::Wait) {
                candidates.push((task.clone(), Candidate::Wait, Vec::new()));
            }
            if state.len() > 1 && enabled(&PhaserOp::Drop) {
                candidates.push((task.clone(), Candidate::Drop, Vec::new()));
            }
            if state.len() < cfg.max_tasks {
                let modes: Vec<Mode> = Mode::ALL
                    .into_iter()
                    .filter(|m| cfg.mode_weights.of(*m) > 0.0)
                    .filter(|m| {
                        enabled(&PhaserOp::Register {
                            new_task: fresh.clone(),
                            mode: *m,
                        })
                    })
                    .collect();
                if !modes.is_empty() {
                    candidates.push((task.clone(), Candidate::Register, modes));
                }
            }
        }
        let Some((task, candidate, modes)) = candidates.choose(rng).cloned() else {
            end = TraceEnd::Stuck;
            break;
        };
        let op = match candidate {
            Candidate::Signal => PhaserOp::Signal,
            Candidate::Wait => PhaserOp::Wait,
            Candidate::Drop => PhaserOp::Drop,
            Candidate::Register => {
                next_id += 1;
                PhaserOp::Register {
                    new_task: fresh,
                    mode: pick_mode(rng, &cfg.mode_weights, &modes)
                        .expect("candidate modes have positive weight"),
                }
            }
        };
        let after = model
            .apply(&state, &task, &op, cfg.variant)
            .expect("candidate was enabled");
        steps.push(Step {
            before: state,
            task,
            op,
            after: after.clone(),
        });
        state = after;
    }
    GeneratedTrace {
        initial,
        steps,
        end,
    }
}

/// Runs `body` over `traces` generated traces, trace `i` drawn from stream
/// `i` of `cfg.seed`.
fn over_traces<M: Model>(
    property: &str,
    model: &M,
    cfg: &TraceGenConfig,
    traces: usize,
    mut body: impl FnMut(&mut CheckReport, &M, usize, &GeneratedTrace),
) -> Result<CheckReport, ConfigError> {
    cfg.validate()?;
    let start = Instant::now();
    let mut report = CheckReport::new(property);
    for i in 0..traces {
        let trace = generate(model, cfg, &mut trace_rng(cfg.seed, i as u64));
        body(&mut report, model, i, &trace);
    }
    report.elapsed = start.elapsed();
    Ok(report)
}

fn describe_step(seed: u64, trace: usize, index: usize, step: &Step) -> String {
    format!(
        "seed={seed} trace={trace} step={index}: {} --{} {}--> {}",
        step.before, step.task, step.op, step.after
    )
}

pub fn check_wf_preservation(
    cfg: &TraceGenConfig,
    traces: usize,
) -> Result<CheckReport, ConfigError> {
    check_wf_preservation_with(&Reference, cfg, traces)
}

/// Every step from an all-well-formed state lands in an all-well-formed
/// state. One instance per step; steps from ill-formed states hold vacuously.
pub fn check_wf_preservation_with(
    model: &impl Model,
    cfg: &TraceGenConfig,
    traces: usize,
) -> Result<CheckReport, ConfigError> {
    over_traces(
        "wf-preservation",
        model,
        cfg,
        traces,
        |report, _, i, trace| {
            for (k, step) in trace.steps.iter().enumerate() {
                report.check(
                    !step.before.is_well_formed() || step.after.is_well_formed(),
                    || describe_step(cfg.seed, i, k, step),
                    "well-formed post-state",
                    "ill-formed view",
                );
            }
        },
    )
}

pub fn check_wo_preservation(
    cfg: &TraceGenConfig,
    traces: usize,
) -> Result<CheckReport, ConfigError> {
    check_wo_preservation_with(&Reference, cfg, traces)
}

/// Every post-state of a trace whose initial state is well-ordered is
/// well-ordered. One instance per step.
pub fn check_wo_preservation_with(
    model: &impl Model,
    cfg: &TraceGenConfig,
    traces: usize,
) -> Result<CheckReport, ConfigError> {
    over_traces(
        "wo-preservation",
        model,
        cfg,
        traces,
        |report, m, i, trace| {
            let from_wo = m.well_ordered(&trace.initial);
            for (k, step) in trace.steps.iter().enumerate() {
                report.check(
                    !from_wo || m.well_ordered(&step.after),
                    || describe_step(cfg.seed, i, k, step),
                    "well-ordered post-state",
                    "post-state not well-ordered",
                );
            }
        },
    )
}

pub fn check_step_ordering(
    cfg: &TraceGenConfig,
    traces: usize,
) -> Result<CheckReport, ConfigError> {
    check_step_ordering_with(&Reference, cfg, traces)
}

/// For each single step P ⇝ Q from a well-ordered P: Q cannot happen before
/// P, and P and Q may happen in parallel. One instance per step.
pub fn check_step_ordering_with(
    model: &impl Model,
    cfg: &TraceGenConfig,
    traces: usize,
) -> Result<CheckReport, ConfigError> {
    over_traces(
        "step-ordering",
        model,
        cfg,
        traces,
        |report, m, i, trace| {
            for (k, step) in trace.steps.iter().enumerate() {
                let guarded = m.well_ordered(&step.before);
                let chb = m.phaser_chb(&step.after, &step.before);
                let mhp = m.phaser_mhp(&step.before, &step.after);
                report.check(
                    !guarded || (chb && mhp),
                    || describe_step(cfg.seed, i, k, step),
                    "chb(Q,P) and mhp(P,Q)",
                    &format!("chb(Q,P)={chb} mhp(P,Q)={mhp}"),
                );
            }
        },
    )
}

pub fn check_multi_step_ordering(
    cfg: &TraceGenConfig,
    traces: usize,
) -> Result<CheckReport, ConfigError> {
    check_multi_step_ordering_with(&Reference, cfg, traces)
}

/// For every pair of states S_i, S_j with i <= j along a trace and S_i
/// well-ordered, S_j cannot happen before S_i. One instance per pair.
pub fn check_multi_step_ordering_with(
    model: &impl Model,
    cfg: &TraceGenConfig,
    traces: usize,
) -> Result<CheckReport, ConfigError> {
    over_traces(
        "multi-step-ordering",
        model,
        cfg,
        traces,
        |report, m, i, trace| {
            let states: Vec<&PhaserState> = trace.states().collect();
            for (a, p) in states.iter().enumerate() {
                let guarded = m.well_ordered(p);
                for (b, q) in states.iter().enumerate().skip(a) {
                    report.check(
                        !guarded || m.phaser_chb(q, p),
                        || format!("seed={} trace={i} from={a} to={b}: P={p} Q={q}", cfg.seed),
                        "chb(Q,P)",
                        "Q happens before P",
                    );
                }
            }
        },
    )
}
