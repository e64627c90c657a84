//! Executable checks for the properties the semantics must satisfy.
//!
//! Two styles: exhaustive enumeration of every view (or small phaser state)
//! within a phase bound, and randomized generation of genuine reduction
//! sequences. Every check returns a [`CheckReport`]; a property holds iff
//! the report has no violations. Reports are deterministic for a fixed
//! configuration.

mod exhaustive;
mod model;
mod programs;
mod random;

use std::fmt::Write as _;
use std::time::Duration;

use serde::Serialize;

pub use exhaustive::{
    check_duality, check_duality_with, check_phaser_causality, check_phaser_causality_with,
    check_view_causality, check_view_causality_with, enumerate_states, enumerate_views,
};
pub use model::{Model, Mutant, Reference};
pub use programs::random_two_task_program;
pub use random::{
    check_multi_step_ordering, check_multi_step_ordering_with, check_step_ordering,
    check_step_ordering_with, check_wf_preservation, check_wf_preservation_with,
    check_wo_preservation, check_wo_preservation_with, random_trace, random_trace_with,
    ConfigError, GeneratedTrace, ModeWeights, Step, TraceEnd, TraceGenConfig,
};

/// Inclusive bound on signal and wait phases during enumeration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct EnumBound {
    pub max_phase: u64,
}

impl EnumBound {
    pub const DEFAULT: EnumBound = EnumBound { max_phase: 4 };

    pub const fn new(max_phase: u64) -> Self {
        EnumBound { max_phase }
    }
}

/// Only this many violations are kept; the count is always exact.
pub const MAX_RECORDED_VIOLATIONS: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    /// Index of the failing instance in check order.
    pub instance: u64,
    /// Enough to rebuild the failing input by hand.
    pub input: String,
    pub expected: String,
    pub actual: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CheckReport {
    pub property: String,
    pub instances: u64,
    pub violation_count: u64,
    pub violations: Vec<Violation>,
    #[serde(skip)]
    pub elapsed: Duration,
}

impl CheckReport {
    pub fn new(property: impl Into<String>) -> Self {
        CheckReport {
            property: property.into(),
            instances: 0,
            violation_count: 0,
            violations: Vec::new(),
            elapsed: Duration::ZERO,
        }
    }

    pub fn passed(&self) -> bool {
        self.violation_count == 0
    }

    /// Counts one instance; records a violation when `holds` is false.
    pub(crate) fn check(
        &mut self,
        holds: bool,
        input: impl FnOnce() -> String,
        expected: &str,
        actual: &str,
    ) {
        let instance = self.instances;
        self.instances += 1;
        if !holds {
            self.violation_count += 1;
            if self.violations.len() < MAX_RECORDED_VIOLATIONS {
                self.violations.push(Violation {
                    instance,
                    input: input(),
                    expected: expected.to_string(),
                    actual: actual.to_string(),
                });
            }
        }
    }

    /// One line, then up to three violations. Timing is left out so the
    /// output is identical across runs.
    pub fn render_text(&self) -> String {
        let mut out = format!(
            "{} {}: {} instances, {} violations\n",
            if self.passed() { "PASS" } else { "FAIL" },
            self.property,
            self.instances,
            self.violation_count
        );
        for v in self.violations.iter().take(3) {
            let _ = writeln!(
                out,
                "  #{}: {} (expected {}, got {})",
                v.instance, v.input, v.expected, v.actual
            );
        }
        out
    }
}
