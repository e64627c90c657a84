use std::collections::BTreeMap;

use phasekit::ordering::{phaser_chb, phaser_hb, phaser_mhp, view_chb, view_hb, well_ordered};
use phasekit::semantics::{
    apply, await_phase, sync, Mode, PhaserOp, PhaserState, SemanticsVariant, StepError, TaskId,
    TaskView,
};
use phasekit::tracekit::trace::{parse, AccessKind, EventKind, Trace};
use proptest::prelude::*;

const H: SemanticsVariant = SemanticsVariant::Habanero;

fn mode() -> impl Strategy<Value = Mode> {
    prop_oneof![
        Just(Mode::SignalWait),
        Just(Mode::WaitOnly),
        Just(Mode::SignalOnly)
    ]
}

fn view() -> impl Strategy<Value = TaskView> {
    (0u64..6, 0u64..6, mode()).prop_map(|(sp, wp, m)| TaskView::new(sp, wp, m))
}

/// Well-formed views built directly from the definition rather than by
/// filtering through the crate's own predicate.
fn wf_view() -> impl Strategy<Value = TaskView> {
    prop_oneof![
        (
            0u64..6,
            0u64..2,
            prop_oneof![Just(Mode::SignalWait), Just(Mode::WaitOnly)]
        )
            .prop_map(|(wp, gap, m)| TaskView::new(wp + gap, wp, m)),
        (0u64..6, 0u64..6).prop_map(|(wp, extra)| TaskView::new(wp + extra, wp, Mode::SignalOnly)),
    ]
}

fn task() -> impl Strategy<Value = TaskId> {
    (1u8..6).prop_map(|i| TaskId::new(format!("t{i}")))
}

fn state_of(views: impl Strategy<Value = TaskView>) -> impl Strategy<Value = PhaserState> {
    proptest::collection::btree_map(task(), views, 1..5).prop_map(|m| m.into_iter().collect())
}

fn op() -> impl Strategy<Value = PhaserOp> {
    prop_oneof![
        Just(PhaserOp::Signal),
        Just(PhaserOp::Wait),
        Just(PhaserOp::Drop),
        (task(), mode()).prop_map(|(new_task, mode)| PhaserOp::Register { new_task, mode }),
    ]
}

/// The transition rules restated from scratch, for differential testing.
fn oracle_apply(state: &PhaserState, t: &TaskId, op: &PhaserOp) -> Option<PhaserState> {
    let v = *state.get(t)?;
    let signals = matches!(v.mode, Mode::SignalWait | Mode::SignalOnly);
    let waits = matches!(v.mode, Mode::SignalWait | Mode::WaitOnly);
    let mut members: BTreeMap<TaskId, TaskView> =
        state.iter().map(|(k, v)| (k.clone(), *v)).collect();
    match op {
        PhaserOp::Signal => {
            if !signals || (v.mode == Mode::SignalWait && v.wait_phase != v.signal_phase) {
                return None;
            }
            members.get_mut(t)?.signal_phase += 1;
        }
        PhaserOp::Wait => {
            if !waits || (v.mode == Mode::SignalWait && v.wait_phase + 1 != v.signal_phase) {
                return None;
            }
            let n = v.wait_phase + 1;
            let all_signalled = state
                .views()
                .filter(|u| u.mode != Mode::WaitOnly)
                .all(|u| u.signal_phase >= n);
            if !all_signalled {
                return None;
            }
            let me = members.get_mut(t)?;
            me.wait_phase = n;
            if me.mode == Mode::WaitOnly && me.signal_phase < n {
                me.signal_phase = n;
            }
        }
        PhaserOp::Register { new_task, mode } => {
            let child_waits = *mode != Mode::SignalOnly;
            let child_signals = *mode != Mode::WaitOnly;
            if members.contains_key(new_task)
                || (child_waits && !waits)
                || (child_signals && !signals)
            {
                return None;
            }
            members.insert(
                new_task.clone(),
                TaskView::new(v.signal_phase, v.wait_phase, *mode),
            );
        }
        PhaserOp::Drop => {
            members.remove(t);
        }
    }
    Some(members.into_iter().collect())
}

fn event_kind() -> impl Strategy<Value = EventKind> {
    let name = "[a-z][a-z0-9_]{0,4}";
    prop_oneof![
        (name, name, mode()).prop_map(|(t, p, m)| EventKind::New {
            task: TaskId::new(t),
            phaser: p,
            mode: m
        }),
        (name, name, op()).prop_map(|(t, p, op)| EventKind::Op {
            task: TaskId::new(t),
            phaser: p,
            op
        }),
        (
            name,
            name,
            prop_oneof![Just(AccessKind::Read), Just(AccessKind::Write)]
        )
            .prop_map(|(t, v, k)| EventKind::Access {
                task: TaskId::new(t),
                var: v,
                kind: k
            }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn hb_is_the_negation_of_chb(v1 in view(), v2 in view()) {
        prop_assert_eq!(view_hb(&v1, &v2), !view_chb(&v1, &v2));
    }

    #[test]
    fn phaser_hb_is_the_negation_of_phaser_chb(p in state_of(view()), q in state_of(view())) {
        prop_assert_eq!(phaser_hb(&p, &q).is_some(), !phaser_chb(&p, &q));
    }

    #[test]
    fn hb_witness_is_an_actual_member_pair(p in state_of(view()), q in state_of(view())) {
        if let Some(w) = phaser_hb(&p, &q) {
            let v1 = p.get(&w.earlier).expect("witness in P");
            let v2 = q.get(&w.later).expect("witness in Q");
            prop_assert!(view_hb(v1, v2));
        }
    }

    #[test]
    fn hb_irreflexive_on_well_formed(v in wf_view()) {
        prop_assert!(v.is_well_formed());
        prop_assert!(!view_hb(&v, &v));
    }

    #[test]
    fn await_is_antitone(p in state_of(view()), n in 0u64..8, m in 0u64..8) {
        let (lo, hi) = if n <= m { (n, m) } else { (m, n) };
        prop_assert!(!await_phase(&p, hi) || await_phase(&p, lo));
        prop_assert!(await_phase(&p, 0));
    }

    #[test]
    fn apply_matches_restated_rules(p in state_of(view()), t in task(), o in op()) {
        prop_assert_eq!(apply(&p, &t, &o, H).ok(), oracle_apply(&p, &t, &o));
    }

    #[test]
    fn apply_is_deterministic_and_pure(p in state_of(view()), t in task(), o in op()) {
        let copy = p.clone();
        let a = apply(&p, &t, &o, H);
        let b = apply(&p, &t, &o, H);
        prop_assert_eq!(a, b);
        prop_assert_eq!(p, copy);
    }

    #[test]
    fn apply_only_touches_the_issuer(p in state_of(view()), t in task(), o in op()) {
        if let Ok(q) = apply(&p, &t, &o, H) {
            let touched: Vec<&TaskId> = match &o {
                PhaserOp::Register { new_task, .. } => vec![new_task],
                _ => vec![&t],
            };
            for (u, v) in p.iter() {
                if !touched.contains(&u) {
                    prop_assert_eq!(q.get(u), Some(v));
                }
            }
            for u in q.tasks() {
                prop_assert!(p.contains(u) || touched.contains(&u));
            }
        }
    }

    #[test]
    fn would_block_exactly_when_sync_fails(p in state_of(wf_view()), t in task()) {
        match apply(&p, &t, &PhaserOp::Wait, H) {
            Err(StepError::WouldBlock { phase, .. }) => {
                prop_assert_eq!(sync(&p, &t), Ok(false));
                prop_assert_eq!(phase, p.get(&t).unwrap().wait_phase + 1);
            }
            Ok(_) => prop_assert_eq!(sync(&p, &t), Ok(true)),
            Err(_) => {}
        }
    }

    #[test]
    fn steps_preserve_well_formedness(p in state_of(wf_view()), t in task(), o in op()) {
        if let Ok(q) = apply(&p, &t, &o, H) {
            prop_assert!(q.is_well_formed(), "{} -> {}", p, q);
        }
    }

    #[test]
    fn steps_from_well_ordered_states(p in state_of(wf_view()), t in task(), o in op()) {
        if well_ordered(&p) {
            if let Ok(q) = apply(&p, &t, &o, H) {
                prop_assert!(well_ordered(&q), "{} -> {}", p, q);
                prop_assert!(phaser_chb(&q, &p));
                prop_assert!(phaser_mhp(&p, &q));
            }
        }
    }

    #[test]
    fn sw_only_rejects_other_modes(p in state_of(view()), t in task(), o in op()) {
        let mixed = p.views().any(|v| v.mode != Mode::SignalWait);
        let registers_other = matches!(&o, PhaserOp::Register { mode, .. } if *mode != Mode::SignalWait);
        let r = apply(&p, &t, &o, SemanticsVariant::SwOnly);
        if mixed || registers_other {
            prop_assert!(matches!(r, Err(StepError::VariantForbidden(_))), "{:?}", r);
        } else {
            prop_assert_eq!(r, apply(&p, &t, &o, H));
        }
    }

    #[test]
    fn trace_text_round_trips(kinds in proptest::collection::vec(event_kind(), 0..20)) {
        let trace = Trace::from_kinds(kinds);
        let text = trace.render();
        prop_assert_eq!(parse(&text).unwrap(), trace.clone());
        let spaced: String = text.lines().map(|l| format!("  {}  # note\n\n", l.replace(' ', "\t "))).collect();
        let reparsed = parse(&spaced).unwrap();
        prop_assert_eq!(reparsed.render(), text);
    }

    #[test]
    fn state_json_round_trips(p in state_of(view())) {
        let json = serde_json::to_string(&p).unwrap();
        let back: PhaserState = serde_json::from_str(&json).unwrap();
        prop_assert_eq!(back, p);
    }
}

fn state(members: &[(&str, u64, u64, Mode)]) -> PhaserState {
    members
        .iter()
        .map(|&(t, sp, wp, m)| (TaskId::new(t), TaskView::new(sp, wp, m)))
        .collect()
}

#[test]
fn final_barrier_state_cannot_precede_initial() {
    let initial = state(&[
        ("t1", 0, 0, Mode::SignalWait),
        ("t2", 0, 0, Mode::SignalWait),
    ]);
    let last = state(&[
        ("t1", 1, 1, Mode::SignalWait),
        ("t2", 1, 1, Mode::SignalWait),
    ]);
    assert!(phaser_chb(&last, &initial));
    assert!(phaser_hb(&initial, &last).is_some());
}

#[test]
fn single_signal_step_is_parallel_both_ways() {
    let p = state(&[("t", 0, 0, Mode::SignalWait)]);
    let q = apply(&p, &TaskId::new("t"), &PhaserOp::Signal, H).unwrap();
    assert!(phaser_chb(&q, &p) && phaser_chb(&p, &q));
}

#[test]
fn zero_step_closure_on_well_ordered_state() {
    let p = state(&[
        ("a", 2, 1, Mode::SignalWait),
        ("b", 3, 1, Mode::SignalOnly),
        ("c", 1, 1, Mode::WaitOnly),
    ]);
    assert!(well_ordered(&p));
    assert!(phaser_chb(&p, &p));
}
