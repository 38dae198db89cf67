//! Forced-execution interpreter.
//!
//! One call to [`execute`] is one forced run: the program is evaluated with the
//! given switches, missing references are faked, callbacks are drained after
//! the top-level code, and everything observed along the way is returned in
//! an [`ExecutionOutcome`].

mod call;
mod engine;
mod exec;
mod expr;
mod ops;

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::config::EngineConfig;
use crate::syntax::{Program, SourceAnchor};
use crate::values::{Rule, TypeTag};
pub(crate) use engine::{Abort, CbTarget, Interp, MAX_STRING_LEN, R};
pub(crate) use ops::MAX_ARRAY_LEN;

/// Stack size for threads that run the evaluator. Deep expression nesting
/// and the recursion cap both translate into native recursion.
pub const EVAL_STACK_BYTES: usize = 1 << 30;

/// An ordered list of forced branch directions; one forced execution.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SwitchSequence {
    pub entries: Vec<(SourceAnchor, bool)>,
}

impl SwitchSequence {
    pub fn empty() -> Self {
        SwitchSequence::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// This sequence followed by one more forced direction.
    pub fn extended(&self, anchor: SourceAnchor, direction: bool) -> Self {
        let mut entries = self.entries.clone();
        entries.push((anchor, direction));
        SwitchSequence { entries }
    }
}

/// One executed branch instance.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PredicateRecord {
    pub anchor: SourceAnchor,
    pub taken: bool,
    pub forced: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminatedBy {
    Normal,
    LoopBudget,
    RecursionCap,
    GlobalTimeout,
    SyntaxErrorInDynamicUnit,
}

impl TerminatedBy {
    pub fn as_str(self) -> &'static str {
        match self {
            TerminatedBy::Normal => "normal",
            TerminatedBy::LoopBudget => "loop_budget",
            TerminatedBy::RecursionCap => "recursion_cap",
            TerminatedBy::GlobalTimeout => "global_timeout",
            TerminatedBy::SyntaxErrorInDynamicUnit => "syntax_error_in_dynamic_unit",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    EvalString,
    DocumentWrite,
    FakedFunctionStringArg,
    CallbackRegistered,
    TimerRegistered,
    ShellcodePolicyHit,
    ActivexProbe,
    /// `unescape`, `atob`, `String.fromCharCode` and similar decoders.
    DecodeCall,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectionEvent {
    pub kind: EventKind,
    pub payload: String,
    pub anchor: SourceAnchor,
    /// Emitted while a catch block was executing.
    pub in_catch: bool,
}

/// One step of the recovery log: what happened to which expression, and why.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceAction {
    pub anchor: SourceAnchor,
    pub subject: String,
    pub rule: Rule,
    /// Type the subject holds afterwards, where that is meaningful.
    pub becomes: Option<TypeTag>,
    /// Length given to a faked array.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub array_length: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DynamicOrigin {
    Eval,
    FunctionConstructor,
    Timer,
    FakedFunctionArg,
    DocumentWrite,
}

/// Code produced at runtime.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DynamicUnit {
    pub name: String,
    pub text: String,
    pub origin: DynamicOrigin,
    pub anchor: SourceAnchor,
}

/// A callback that was drained from the queue after the top-level code.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallbackRecord {
    pub api: String,
    pub registered_at: SourceAnchor,
    pub target: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoopStats {
    pub anchor: Option<SourceAnchor>,
    pub iterations: u64,
    /// Strings stored into indexed slots while this loop ran, bucketed by
    /// `floor(log2(length in code units))`.
    pub indexed_string_writes: BTreeMap<u32, u64>,
    pub cutoffs: u64,
}

impl LoopStats {
    /// Indexed writes of strings whose length is at least `min_units`, counting
    /// whole buckets whose lower bound reaches the threshold.
    pub fn writes_at_least(&self, min_units: u64) -> u64 {
        self.indexed_string_writes
            .iter()
            .filter(|(b, _)| (1u64 << **b) >= min_units)
            .map(|(_, n)| *n)
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionOutcome {
    pub unit: String,
    pub preds: Vec<PredicateRecord>,
    pub new_js: Vec<DynamicUnit>,
    pub events: Vec<DetectionEvent>,
    pub recoveries: Vec<TraceAction>,
    pub terminated_by: TerminatedBy,
    pub callbacks_invoked: Vec<CallbackRecord>,
    pub loop_stats: Vec<LoopStats>,
    /// Some forced switch was never reached.
    pub prefix_mismatch: bool,
    pub unconsumed_switches: Vec<(SourceAnchor, bool)>,
    pub loop_cutoffs: u64,
    pub recursion_cutoffs: u64,
    pub events_dropped: u64,
    pub recoveries_dropped: u64,
    pub wall_time_ms: u64,
}

impl ExecutionOutcome {
    /// Branch directions that actually executed in this run.
    pub fn executed_directions(&self) -> impl Iterator<Item = (&SourceAnchor, bool)> {
        self.preds
            .iter()
            .filter(|p| {
                !(p.forced
                    && self
                        .unconsumed_switches
                        .iter()
                        .any(|(a, d)| *a == p.anchor && *d == p.taken))
            })
            .map(|p| (&p.anchor, p.taken))
    }

    pub(crate) fn syntax_error(unit: &str, anchor: SourceAnchor, message: String) -> Self {
        ExecutionOutcome {
            unit: unit.to_string(),
            preds: Vec::new(),
            new_js: Vec::new(),
            events: Vec::new(),
            recoveries: vec![TraceAction {
                anchor,
                subject: unit.to_string(),
                rule: Rule::ErrorRecovered,
                becomes: None,
                array_length: None,
                detail: Some(format!("SyntaxError: {message}")),
            }],
            terminated_by: TerminatedBy::SyntaxErrorInDynamicUnit,
            callbacks_invoked: Vec::new(),
            loop_stats: Vec::new(),
            prefix_mismatch: false,
            unconsumed_switches: Vec::new(),
            loop_cutoffs: 0,
            recursion_cutoffs: 0,
            events_dropped: 0,
            recoveries_dropped: 0,
            wall_time_ms: 0,
        }
    }
}

const EVAL_THREAD: &str = "forcex-eval";

/// Runs `f` on a thread with a stack large enough for the evaluator, or
/// directly when already on one.
pub fn run_on_big_stack<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    if std::thread::current().name() == Some(EVAL_THREAD) {
        return f();
    }
    std::thread::scope(|s| {
        std::thread::Builder::new()
            .name(EVAL_THREAD.into())
            .stack_size(EVAL_STACK_BYTES)
            .spawn_scoped(s, f)
            .expect("spawn evaluator thread")
            .join()
            .unwrap_or_else(|e| std::panic::resume_unwind(e))
    })
}

/// One forced execution of `program` under `switches`.
pub fn execute(
    program: &Program,
    switches: &SwitchSequence,
    config: &EngineConfig,
) -> ExecutionOutcome {
    let deadline = Instant::now() + config.budgets.sample_timeout;
    run_on_big_stack(|| execute_until(program, switches, config, Some(deadline)))
}

/// Like [`execute`] but on the calling thread and with an explicit deadline.
pub(crate) fn execute_until(
    program: &Program,
    switches: &SwitchSequence,
    config: &EngineConfig,
    deadline: Option<Instant>,
) -> ExecutionOutcome {
    let start = Instant::now();
    let mut interp = Interp::new(config.clone(), deadline);
    let mut outcome = interp.run_program(program, switches);
    outcome.wall_time_ms = start.elapsed().as_millis() as u64;
    outcome
}

pub(crate) fn duration_ms(d: Duration) -> u64 {
    d.as_millis() as u64
}
