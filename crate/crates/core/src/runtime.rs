//! A blocking phaser for real threads.
//!
//! Every operation runs [`semantics::apply`] on the shared state under a
//! mutex. A wait that would block sleeps on a condition variable and
//! re-evaluates after every signal, register or drop, so the completed
//! operations form a legal reduction sequence of the model. That sequence is
//! kept in an [`OperationLog`] for checking.

use std::sync::{Arc, Condvar, Mutex, MutexGuard};

use serde::Serialize;
use thiserror::Error;

use crate::semantics::{
    self, Mode, PhaserOp, PhaserState, SemanticsVariant, StepError, TaskId, TaskView,
};

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize)]
pub enum RuntimeError {
    #[error(transparent)]
    Step(StepError),
    #[error("handle of task {0} was already dropped")]
    HandleDropped(TaskId),
}

/// One completed operation and the state it produced.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LogEntry {
    pub task: TaskId,
    pub op: PhaserOp,
    pub after: PhaserState,
}

/// Every completed operation on a phaser, in completion order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OperationLog {
    pub initial: PhaserState,
    pub entries: Vec<LogEntry>,
    pub variant: SemanticsVariant,
}

impl OperationLog {
    /// The state before entry `index`.
    pub fn before(&self, index: usize) -> &PhaserState {
        match index {
            0 => &self.initial,
            i => &self.entries[i - 1].after,
        }
    }

    /// Replays the log through the model. Fails with the index of the first
    /// entry that the model rejects or whose recorded state differs.
    pub fn verify(&self) -> Result<(), (usize, Option<StepError>)> {
        for (i, entry) in self.entries.iter().enumerate() {
            match semantics::apply(self.before(i), &entry.task, &entry.op, self.variant) {
                Ok(next) if next == entry.after => {}
                Ok(_) => return Err((i, None)),
                Err(e) => return Err((i, Some(e))),
            }
        }
        Ok(())
    }
}

struct Inner {
    state: PhaserState,
    next_id: u64,
    log: OperationLog,
}

struct Shared {
    inner: Mutex<Inner>,
    wakeup: Condvar,
}

impl Shared {
    fn lock(&self) -> MutexGuard<'_, Inner> {
        self.inner
            .lock()
            .unwrap_or_else(|poisoned| poisoned.into_inner())
    }
}

/// One task's membership in a shared phaser.
///
/// Dropping the handle deregisters the task if [`PhaserHandle::deregister`]
/// was not called.
pub struct PhaserHandle {
    shared: Arc<Shared>,
    task: TaskId,
    dropped: bool,
}

impl PhaserHandle {
    /// A fresh phaser whose only member, `t0`, holds the returned handle.
    pub fn create(mode: Mode) -> Result<PhaserHandle, RuntimeError> {
        Self::create_with_variant(mode, SemanticsVariant::Habanero)
    }

    pub fn create_with_variant(
        mode: Mode,
        variant: SemanticsVariant,
    ) -> Result<PhaserHandle, RuntimeError> {
        let task = TaskId::new("t0");
        let state =
            semantics::new_phaser(task.clone(), mode, variant).map_err(RuntimeError::Step)?;
        let inner = Inner {
            state: state.clone(),
            next_id: 1,
            log: OperationLog {
                initial: state,
                entries: Vec::new(),
                variant,
            },
        };
        Ok(PhaserHandle {
            shared: Arc::new(Shared {
                inner: Mutex::new(inner),
                wakeup: Condvar::new(),
            }),
            task,
            dropped: false,
        })
    }

    pub fn task(&self) -> &TaskId {
        &self.task
    }

    /// This task's current view, or `None` after deregistering.
    pub fn view(&self) -> Option<TaskView> {
        self.shared.lock().state.get(&self.task).copied()
    }

    pub fn state(&self) -> PhaserState {
        self.shared.lock().state.clone()
    }

    pub fn log(&self) -> OperationLog {
        self.shared.lock().log.clone()
    }

    pub fn monitor(&self) -> PhaserMonitor {
        PhaserMonitor {
            shared: Arc::clone(&self.shared),
        }
    }

    pub fn signal(&self) -> Result<(), RuntimeError> {
        self.commit(PhaserOp::Signal)
    }

    /// Blocks until every signaler has reached this task's next phase.
    /// Protocol and mode errors are returned without blocking.
    pub fn wait(&self) -> Result<(), RuntimeError> {
        self.live()?;
        let mut inner = self.shared.lock();
        loop {
            match self.step(&mut inner, PhaserOp::Wait) {
                Err(RuntimeError::Step(e)) if e.is_would_block() => {
                    inner = self
                        .shared
                        .wakeup
                        .wait(inner)
                        .unwrap_or_else(|poisoned| poisoned.into_inner());
                }
                other => return other,
            }
        }
    }

    /// Registers a new task, named by the phaser, and returns its handle.
    pub fn register(&self, mode: Mode) -> Result<PhaserHandle, RuntimeError> {
        self.live()?;
        let mut inner = self.shared.lock();
        let child = TaskId::new(format!("t{}", inner.next_id));
        self.step(
            &mut inner,
            PhaserOp::Register {
                new_task: child.clone(),
                mode,
            },
        )?;
        inner.next_id += 1;
        Ok(PhaserHandle {
            shared: Arc::clone(&self.shared),
            task: child,
            dropped: false,
        })
    }

    /// Leaves the phaser. Every later operation on this handle fails.
    pub fn deregister(&mut self) -> Result<(), RuntimeError> {
        self.commit(PhaserOp::Drop)?;
        self.dropped = true;
        Ok(())
    }

    fn live(&self) -> Result<(), RuntimeError> {
        if self.dropped {
            Err(RuntimeError::HandleDropped(self.task.clone()))
        } else {
            Ok(())
        }
    }

    fn commit(&self, op: PhaserOp) -> Result<(), RuntimeError> {
        self.live()?;
        let mut inner = self.shared.lock();
        self.step(&mut inner, op)
    }

    fn step(&self, inner: &mut Inner, op: PhaserOp) -> Result<(), RuntimeError> {
        let next = semantics::apply(&inner.state, &self.task, &op, inner.log.variant)
            .map_err(RuntimeError::Step)?;
        inner.log.entries.push(LogEntry {
            task: self.task.clone(),
            op,
            after: next.clone(),
        });
        inner.state = next;
        self.shared.wakeup.notify_all();
        Ok(())
    }
}

/// Read-only access to a phaser that outlives every handle.
#[derive(Clone)]
pub struct PhaserMonitor {
    shared: Arc<Shared>,
}

impl PhaserMonitor {
    pub fn state(&self) -> PhaserState {
        self.shared.lock().state.clone()
    }

    pub fn log(&self) -> OperationLog {
        self.shared.lock().log.clone()
    }
}

impl Drop for PhaserHandle {
    fn drop(&mut self) {
        if !self.dropped {
            let _ = self.deregister();
        }
    }
}

impl std::fmt::Debug for PhaserHandle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PhaserHandle")
            .field("task", &self.task)
            .field("dropped", &self.dropped)
            .finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ordering::well_ordered;
    use crate::semantics::await_phase;
    use std::sync::mpsc;
    use std::thread;
    use std::time::{Duration, Instant};

    #[test]
    fn sole_member_does_not_block() {
        let h = PhaserHandle::create(Mode::SignalWait).unwrap();
        h.signal().unwrap();
        h.wait().unwrap();
        assert_eq!(h.view(), Some(TaskView::new(1, 1, Mode::SignalWait)));
    }

    #[test]
    fn mode_errors_are_immediate() {
        let wo = PhaserHandle::create(Mode::WaitOnly).unwrap();
        assert!(matches!(
            wo.signal(),
            Err(RuntimeError::Step(StepError::ModeForbidden { .. }))
        ));
        let so = PhaserHandle::create(Mode::SignalOnly).unwrap();
        assert!(matches!(
            so.wait(),
            Err(RuntimeError::Step(StepError::ModeForbidden { .. }))
        ));
    }

    #[test]
    fn early_wait_fails_fast() {
        let h = PhaserHandle::create(Mode::SignalWait).unwrap();
        let _other = h.register(Mode::SignalWait).unwrap();
        assert!(matches!(
            h.wait(),
            Err(RuntimeError::Step(StepError::PhaseProtocol { .. }))
        ));
    }

    #[test]
    fn dropped_handle_is_inert() {
        let mut h = PhaserHandle::create(Mode::SignalWait).unwrap();
        h.deregister().unwrap();
        assert_eq!(
            h.signal(),
            Err(RuntimeError::HandleDropped(TaskId::new("t0")))
        );
        assert!(h.register(Mode::SignalWait).is_err());
        assert!(h.deregister().is_err());
        assert!(h.state().is_empty());
    }

    #[test]
    fn two_members_barrier() {
        let a = PhaserHandle::create(Mode::SignalWait).unwrap();
        let b = a.register(Mode::SignalWait).unwrap();
        assert_eq!(b.task(), &TaskId::new("t1"));
        let worker = thread::spawn(move || {
            b.signal().unwrap();
            b.wait().unwrap();
            b.view().unwrap()
        });
        a.signal().unwrap();
        a.wait().unwrap();
        assert_eq!(
            worker.join().unwrap(),
            TaskView::new(1, 1, Mode::SignalWait)
        );
        assert_eq!(a.view(), Some(TaskView::new(1, 1, Mode::SignalWait)));
    }

    #[test]
    fn implicit_drop_releases_waiters() {
        let a = PhaserHandle::create(Mode::SignalWait).unwrap();
        let b = a.register(Mode::SignalWait).unwrap();
        a.signal().unwrap();
        let waiter = thread::spawn(move || a.wait());
        thread::sleep(Duration::from_millis(20));
        drop(b);
        waiter.join().unwrap().unwrap();
    }

    #[test]
    fn stress_log_is_a_legal_reduction() {
        let start = Instant::now();
        let root = PhaserHandle::create(Mode::SignalWait).unwrap();
        let mut handles: Vec<PhaserHandle> = (0..7)
            .map(|_| root.register(Mode::SignalWait).unwrap())
            .collect();
        handles.push(root);
        let monitor = handles[0].monitor();
        let workers: Vec<_> = handles
            .into_iter()
            .map(|mut h| {
                thread::spawn(move || {
                    for _ in 0..100 {
                        h.signal().unwrap();
                        h.wait().unwrap();
                    }
                    h.deregister().unwrap();
                })
            })
            .collect();
        for w in workers {
            w.join().unwrap();
        }
        assert!(start.elapsed() < Duration::from_secs(10));
        let log = monitor.log();
        assert_eq!(log.entries.len(), 7 + 8 * 200 + 8);
        log.verify().unwrap();
        for (i, entry) in log.entries.iter().enumerate() {
            assert!(entry.after.is_well_formed() && well_ordered(&entry.after));
            if entry.op == PhaserOp::Wait {
                let k = entry.after.get(&entry.task).unwrap().wait_phase;
                assert!(await_phase(log.before(i), k));
            }
        }
    }

    #[test]
    fn observer_waits_for_lagging_signalers_to_drop() {
        let mut root = PhaserHandle::create(Mode::SignalWait).unwrap();
        let observer = root.register(Mode::WaitOnly).unwrap();
        let mut t1 = root.register(Mode::SignalOnly).unwrap();
        let t2 = root.register(Mode::SignalOnly).unwrap();
        let t3 = root.register(Mode::SignalOnly).unwrap();
        root.deregister().unwrap();
        for (h, n) in [(&t1, 3), (&t2, 4), (&t3, 10)] {
            for _ in 0..n {
                h.signal().unwrap();
            }
        }
        let mut t4 = t1.register(Mode::SignalOnly).unwrap();
        assert_eq!(t4.view(), Some(TaskView::new(3, 0, Mode::SignalOnly)));

        let (tx, rx) = mpsc::channel();
        let watcher = thread::spawn(move || {
            for k in 1..=4u64 {
                observer.wait().unwrap();
                tx.send(k).unwrap();
            }
        });
        for k in 1..=3 {
            assert_eq!(rx.recv_timeout(Duration::from_secs(5)), Ok(k));
        }
        assert!(rx.recv_timeout(Duration::from_millis(50)).is_err());
        t1.deregister().unwrap();
        assert!(rx.recv_timeout(Duration::from_millis(50)).is_err());
        t4.deregister().unwrap();
        assert_eq!(rx.recv_timeout(Duration::from_secs(5)), Ok(4));
        watcher.join().unwrap();
    }
}
