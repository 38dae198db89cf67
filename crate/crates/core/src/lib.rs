//! Forced-execution engine for triaging malicious JavaScript.
//!
//! Scripts run in a tree-walking interpreter that never stops on a missing
//! reference: absent objects are faked and retyped on first use, and branch
//! predicates are flipped across repeated runs until every reachable arm has
//! executed. Dynamically generated code, callbacks and suspicious host calls
//! are collected for the detection policies.
//!
//! ```
//! use forcex::{explore, EngineConfig};
//!
//! let result = explore("if (navigator.appName == 'x') { eval('alert(1)') }", &EngineConfig::default());
//! assert_eq!(result.units[0].runs.len(), 2);
//! ```

pub mod config;
pub mod detect;
pub mod explorer;
pub mod hostenv;
pub mod interp;
pub mod syntax;
pub mod values;

pub use config::{ActiveXMode, Budgets, EngineConfig, Strategy, DEFAULT_SEED};
pub use detect::{
    analyze_document, analyze_source, builtin_policies, Finding, PolicyConfig, Report, Severity,
};
pub use explorer::{explore, explore_units, CoverageMap, ExplorationResult, SwitchSequence};
pub use interp::{execute, ExecutionOutcome, PredicateRecord, TerminatedBy};
