use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::semantics::{Mode, PhaserOp, SemanticsVariant, TaskId};
use crate::tracekit::replay::Machine;
use crate::tracekit::trace::{AccessKind, EventKind, Trace, TraceEvent};

/// Events per task, including its phaser setup and final drops.
const MAX_TASK_EVENTS: usize = 10;

/// A random program of two tasks sharing variables `x` and `y`, returned as
/// one of its own completed schedules.
///
/// `t1` creates one or two phasers in SW mode and registers `t2` on each in
/// a random mode. Both tasks then interleave accesses with signals and waits
/// that are enabled at that point, and finish by dropping every phaser. Each
/// task issues at most ten events.
pub fn random_two_task_program(seed: u64) -> Trace {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let t1 = TaskId::new("t1");
    let t2 = TaskId::new("t2");
    let phasers: Vec<String> = (0..rng.gen_range(1..=2))
        .map(|i| format!("ph{i}"))
        .collect();

    let mut kinds = Vec::new();
    for ph in &phasers {
        kinds.push(EventKind::New {
            task: t1.clone(),
            phaser: ph.clone(),
            mode: Mode::SignalWait,
        });
    }
    for ph in &phasers {
        kinds.push(EventKind::Op {
            task: t1.clone(),
            phaser: ph.clone(),
            op: PhaserOp::Register {
                new_task: t2.clone(),
                mode: *Mode::ALL.choose(&mut rng).expect("three modes"),
            },
        });
    }

    let mut machine = Machine::new();
    for kind in &kinds {
        machine
            .execute(&event(kind.clone()), SemanticsVariant::Habanero)
            .expect("setup is legal");
    }

    let t1_body = MAX_TASK_EVENTS - 3 * phasers.len();
    let t2_body = MAX_TASK_EVENTS - phasers.len();
    let mut budget = [
        (t1.clone(), rng.gen_range(1..=t1_body)),
        (t2.clone(), rng.gen_range(1..=t2_body)),
    ];

    loop {
        let open: Vec<usize> = (0..budget.len()).filter(|&i| budget[i].1 > 0).collect();
        let Some(&who) = open.choose(&mut rng) else {
            break;
        };
        let task = budget[who].0.clone();
        let mut candidates: Vec<EventKind> = Vec::new();
        for var in ["x", "y"] {
            for kind in [AccessKind::Read, AccessKind::Write] {
                candidates.push(EventKind::Access {
                    task: task.clone(),
                    var: var.to_string(),
                    kind,
                });
            }
        }
        for ph in &phasers {
            for op in [PhaserOp::Signal, PhaserOp::Wait] {
                let kind = EventKind::Op {
                    task: task.clone(),
                    phaser: ph.clone(),
                    op,
                };
                let mut probe = machine.clone();
                if probe
                    .execute(&event(kind.clone()), SemanticsVariant::Habanero)
                    .is_ok()
                {
                    candidates.push(kind);
                }
            }
        }
        let chosen = candidates
            .choose(&mut rng)
            .expect("accesses are always enabled")
            .clone();
        machine
            .execute(&event(chosen.clone()), SemanticsVariant::Habanero)
            .expect("candidate was enabled");
        kinds.push(chosen);
        budget[who].1 -= 1;
    }

    for task in [&t2, &t1] {
        for ph in &phasers {
            kinds.push(EventKind::Op {
                task: task.clone(),
                phaser: ph.clone(),
                op: PhaserOp::Drop,
            });
        }
    }
    Trace::from_kinds(kinds)
}

fn event(kind: EventKind) -> TraceEvent {
    TraceEvent { line: 0, kind }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tracekit::explore::programs_from_trace;
    use crate::tracekit::replay::replay;

    #[test]
    fn programs_are_bounded_completed_schedules() {
        for seed in 0..200 {
            let trace = random_two_task_program(seed);
            let res = replay(&trace, SemanticsVariant::Habanero);
            assert!(res.completed(), "seed {seed}: {:?}", res.error);
            assert!(res.final_states.values().all(|s| s.is_empty()));
            let programs = programs_from_trace(&trace);
            assert_eq!(programs.len(), 2);
            for p in &programs {
                assert!(p.events.len() <= MAX_TASK_EVENTS, "seed {seed}");
            }
        }
    }

    #[test]
    fn deterministic_per_seed() {
        assert_eq!(random_two_task_program(4), random_two_task_program(4));
        let distinct: std::collections::BTreeSet<String> = (0..20)
            .map(|s| random_two_task_program(s).render())
            .collect();
        assert!(distinct.len() > 10);
    }
}
