//! Detection policies over exploration results, and the per-sample report.

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{self, AssertUnwindSafe};

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::config::{ActiveXMode, Budgets, EngineConfig, Strategy};
use crate::explorer::{explore_units, ExplorationResult};
use crate::hostenv::extract_scripts;
use crate::interp::{DynamicOrigin, EventKind, TerminatedBy};
use crate::syntax::{dynamic_depth, SourceAnchor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Info,
    Suspicious,
    Malicious,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Finding {
    pub policy: String,
    pub severity: Severity,
    pub evidence: String,
    pub anchor: Option<SourceAnchor>,
    /// Unit and run (index into that unit's runs) that exposed the finding.
    pub unit: String,
    pub run_index: usize,
}

pub trait Policy: Send + Sync {
    fn name(&self) -> &'static str;
    fn evaluate(&self, result: &ExplorationResult) -> Vec<Finding>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShellcodeConfig {
    pub enabled: bool,
    /// Consecutive `%uXXXX` / `\uXXXX` escapes needed to flag a string.
    pub min_escapes: usize,
}

impl Default for ShellcodeConfig {
    fn default() -> Self {
        ShellcodeConfig {
            enabled: true,
            min_escapes: 32,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalChainConfig {
    pub enabled: bool,
    pub min_depth: usize,
}

impl Default for EvalChainConfig {
    fn default() -> Self {
        EvalChainConfig {
            enabled: true,
            min_depth: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HeapSprayConfig {
    pub enabled: bool,
    /// Minimum string length, in UTF-16 code units.
    pub min_string_units: u64,
    pub min_writes: u64,
}

impl Default for HeapSprayConfig {
    fn default() -> Self {
        HeapSprayConfig {
            enabled: true,
            min_string_units: 64 * 1024,
            min_writes: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ActivexCatchConfig {
    pub enabled: bool,
}

impl Default for ActivexCatchConfig {
    fn default() -> Self {
        ActivexCatchConfig { enabled: true }
    }
}

/// Thresholds of the built-in policies. Loadable from TOML.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolicyConfig {
    pub shellcode: ShellcodeConfig,
    pub eval_chain: EvalChainConfig,
    pub heap_spray: HeapSprayConfig,
    pub activex_catch: ActivexCatchConfig,
}

pub fn builtin_policies(config: &PolicyConfig) -> Vec<Box<dyn Policy>> {
    let mut out: Vec<Box<dyn Policy>> = Vec::new();
    if config.shellcode.enabled {
        out.push(Box::new(ShellcodeDensity::new(
            config.shellcode.min_escapes,
        )));
    }
    if config.eval_chain.enabled {
        out.push(Box::new(EvalChain {
            min_depth: config.eval_chain.min_depth,
        }));
    }
    if config.heap_spray.enabled {
        out.push(Box::new(HeapSpray {
            min_units: config.heap_spray.min_string_units,
            min_writes: config.heap_spray.min_writes,
        }));
    }
    if config.activex_catch.enabled {
        out.push(Box::new(ActivexCatch));
    }
    out
}

fn excerpt(s: &str, max: usize) -> String {
    match s.char_indices().nth(max) {
        Some((i, _)) => format!("{}...", &s[..i]),
        None => s.to_string(),
    }
}

/// Unicode-escape shellcode in decoded, evaluated or written strings.
pub struct ShellcodeDensity {
    min_escapes: usize,
    re: Regex,
}

impl ShellcodeDensity {
    pub fn new(min_escapes: usize) -> Self {
        let n = min_escapes.max(1);
        let re = Regex::new(&format!(r"(?:[%\\]u[0-9a-fA-F]{{4}}){{{n},}}")).expect("valid regex");
        ShellcodeDensity { min_escapes: n, re }
    }
}

impl Policy for ShellcodeDensity {
    fn name(&self) -> &'static str {
        "shellcode_density"
    }

    fn evaluate(&self, result: &ExplorationResult) -> Vec<Finding> {
        let mut out = Vec::new();
        let mut seen = BTreeSet::new();
        for ev in &result.events {
            let e = &ev.event;
            if !matches!(
                e.kind,
                EventKind::DecodeCall
                    | EventKind::ShellcodePolicyHit
                    | EventKind::EvalString
                    | EventKind::DocumentWrite
                    | EventKind::FakedFunctionStringArg
            ) {
                continue;
            }
            let Some(m) = self.re.find(&e.payload) else {
                continue;
            };
            if !seen.insert(e.anchor.clone()) {
                continue;
            }
            let escapes = m.len() / 6;
            out.push(Finding {
                policy: self.name().into(),
                severity: Severity::Malicious,
                evidence: format!(
                    "{escapes} consecutive unicode escapes (>= {}): {}",
                    self.min_escapes,
                    excerpt(m.as_str(), 48)
                ),
                anchor: Some(e.anchor.clone()),
                unit: result.units[ev.unit].name.clone(),
                run_index: ev.run,
            });
        }
        out
    }
}

/// Code generated by code generated by code.
pub struct EvalChain {
    min_depth: usize,
}

impl Policy for EvalChain {
    fn name(&self) -> &'static str {
        "eval_chain"
    }

    fn evaluate(&self, result: &ExplorationResult) -> Vec<Finding> {
        let deepest = result
            .units
            .iter()
            .filter(|u| u.origin.is_some())
            .map(|u| (dynamic_depth(&u.name), u))
            .max_by_key(|(d, _)| *d);
        match deepest {
            Some((depth, unit)) if depth >= self.min_depth => vec![Finding {
                policy: self.name().into(),
                severity: Severity::Suspicious,
                evidence: format!(
                    "{depth} nested generations of dynamic code, deepest unit {}",
                    unit.name
                ),
                anchor: unit.discovered_at.clone(),
                unit: unit.name.clone(),
                run_index: 0,
            }],
            _ => Vec::new(),
        }
    }
}

/// Loops storing many large strings into indexed slots.
pub struct HeapSpray {
    min_units: u64,
    min_writes: u64,
}

impl Policy for HeapSpray {
    fn name(&self) -> &'static str {
        "heap_spray"
    }

    fn evaluate(&self, result: &ExplorationResult) -> Vec<Finding> {
        let mut out = Vec::new();
        let mut seen = BTreeSet::new();
        for (u, r, run) in result.runs() {
            for stats in &run.outcome.loop_stats {
                let writes = stats.writes_at_least(self.min_units);
                if writes < self.min_writes || !seen.insert(stats.anchor.clone()) {
                    continue;
                }
                out.push(Finding {
                    policy: self.name().into(),
                    severity: Severity::Malicious,
                    evidence: format!(
                        "loop wrote {writes} strings of at least {} code units into indexed slots ({} iterations)",
                        self.min_units, stats.iterations
                    ),
                    anchor: stats.anchor.clone(),
                    unit: result.units[u].name.clone(),
                    run_index: r,
                });
            }
        }
        out
    }
}

/// An ActiveX probe in a unit whose catch arms decode, evaluate or write code.
pub struct ActivexCatch;

impl Policy for ActivexCatch {
    fn name(&self) -> &'static str {
        "activex_probe_catch_payload"
    }

    fn evaluate(&self, result: &ExplorationResult) -> Vec<Finding> {
        let mut out = Vec::new();
        for unit in &result.units {
            let events = || {
                unit.runs
                    .iter()
                    .enumerate()
                    .flat_map(|(i, r)| r.outcome.events.iter().map(move |e| (i, e)))
            };
            let Some((_, probe)) = events().find(|(_, e)| e.kind == EventKind::ActivexProbe) else {
                continue;
            };
            let payload = events().find(|(_, e)| {
                e.in_catch
                    && matches!(
                        e.kind,
                        EventKind::EvalString
                            | EventKind::DecodeCall
                            | EventKind::DocumentWrite
                            | EventKind::ShellcodePolicyHit
                    )
            });
            if let Some((run, e)) = payload {
                out.push(Finding {
                    policy: self.name().into(),
                    severity: Severity::Malicious,
                    evidence: format!(
                        "ActiveX probe \"{}\" at {} with catch-arm {:?} payload: {}",
                        excerpt(&probe.payload, 40),
                        probe.anchor,
                        e.kind,
                        excerpt(&e.payload, 64)
                    ),
                    anchor: Some(e.anchor.clone()),
                    unit: unit.name.clone(),
                    run_index: run,
                });
            }
        }
        out
    }
}

/// Runs every policy, turning a panicking policy into an info finding.
pub fn run_policies(policies: &[Box<dyn Policy>], result: &ExplorationResult) -> Vec<Finding> {
    let mut out = Vec::new();
    for p in policies {
        match panic::catch_unwind(AssertUnwindSafe(|| p.evaluate(result))) {
            Ok(found) => out.extend(found),
            Err(e) => {
                let msg = e
                    .downcast_ref::<&str>()
                    .map(|s| s.to_string())
                    .or_else(|| e.downcast_ref::<String>().cloned())
                    .unwrap_or_else(|| "unknown panic".into());
                out.push(Finding {
                    policy: p.name().into(),
                    severity: Severity::Info,
                    evidence: format!("policy failed: {msg}"),
                    anchor: None,
                    unit: String::new(),
                    run_index: 0,
                });
            }
        }
    }
    out
}

/// Runs per termination reason.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TerminationHistogram {
    pub normal: u64,
    pub loop_budget: u64,
    pub recursion_cap: u64,
    pub global_timeout: u64,
    pub syntax_error_in_dynamic_unit: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub runs: u64,
    /// Runs with a non-empty switch sequence.
    pub predicates_flipped: u64,
    pub units: u64,
    pub units_discovered: u64,
    pub branch_points: u64,
    pub coverage_percent: f64,
    pub events: u64,
    pub wall_time_ms: u64,
    pub exhausted: bool,
    pub terminated_by: TerminationHistogram,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitSummary {
    pub name: String,
    pub origin: Option<DynamicOrigin>,
    pub sha256: String,
    pub runs: u64,
    pub syntax_error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub seed: u64,
    pub budgets: Budgets,
    pub activex: ActiveXMode,
    pub strategy: Strategy,
    pub ternary_as_branch: bool,
    pub policies: PolicyConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub sample: String,
    pub verdict: Severity,
    /// Operational failure; the sample was not (fully) analyzed.
    pub error: Option<String>,
    pub findings: Vec<Finding>,
    pub stats: Stats,
    pub units: Vec<UnitSummary>,
    /// `src` URLs of external scripts; reported, never fetched.
    pub external_scripts: Vec<String>,
    pub config: ConfigEcho,
}

impl Report {
    pub fn from_exploration(
        sample: &str,
        result: &ExplorationResult,
        engine: &EngineConfig,
        policies: &PolicyConfig,
    ) -> Report {
        let findings = run_policies(&builtin_policies(policies), result);
        let verdict = findings
            .iter()
            .map(|f| f.severity)
            .max()
            .unwrap_or(Severity::Info);
        let mut hist = TerminationHistogram::default();
        for (t, n) in result.terminations() {
            *match t {
                TerminatedBy::Normal => &mut hist.normal,
                TerminatedBy::LoopBudget => &mut hist.loop_budget,
                TerminatedBy::RecursionCap => &mut hist.recursion_cap,
                TerminatedBy::GlobalTimeout => &mut hist.global_timeout,
                TerminatedBy::SyntaxErrorInDynamicUnit => &mut hist.syntax_error_in_dynamic_unit,
            } += n;
        }
        let roots: Vec<_> = result.units.iter().filter(|u| u.origin.is_none()).collect();
        let error = if !roots.is_empty() && roots.iter().all(|u| u.syntax_error.is_some()) {
            roots[0]
                .syntax_error
                .as_ref()
                .map(|m| format!("SyntaxError: {m}"))
        } else {
            None
        };
        let stats = Stats {
            runs: result.run_count() as u64,
            predicates_flipped: result
                .runs()
                .filter(|(_, _, r)| !r.switches.is_empty())
                .count() as u64,
            units: result.units.len() as u64,
            units_discovered: result.units.iter().filter(|u| u.origin.is_some()).count() as u64,
            branch_points: result.coverage.branch_points() as u64,
            coverage_percent: (result.coverage.ratio() * 10000.0).round() / 100.0,
            events: result.events.len() as u64,
            wall_time_ms: result.wall_time_ms,
            exhausted: result.exhausted,
            terminated_by: hist,
        };
        Report {
            sample: sample.to_string(),
            verdict,
            error,
            findings,
            stats,
            units: result
                .units
                .iter()
                .map(|u| UnitSummary {
                    name: u.name.clone(),
                    origin: u.origin,
                    sha256: u.sha256.clone(),
                    runs: u.runs.len() as u64,
                    syntax_error: u.syntax_error.clone(),
                })
                .collect(),
            external_scripts: Vec::new(),
            config: echo(engine, policies),
        }
    }

    /// Report for a sample that could not be analyzed at all.
    pub fn failed(
        sample: &str,
        error: String,
        engine: &EngineConfig,
        policies: &PolicyConfig,
    ) -> Report {
        Report {
            sample: sample.to_string(),
            verdict: Severity::Info,
            error: Some(error),
            findings: Vec::new(),
            stats: Stats {
                runs: 0,
                predicates_flipped: 0,
                units: 0,
                units_discovered: 0,
                branch_points: 0,
                coverage_percent: 0.0,
                events: 0,
                wall_time_ms: 0,
                exhausted: false,
                terminated_by: TerminationHistogram::default(),
            },
            units: Vec::new(),
            external_scripts: Vec::new(),
            config: echo(engine, policies),
        }
    }

    /// Findings per policy name.
    pub fn by_policy(&self) -> BTreeMap<&str, Vec<&Finding>> {
        let mut m: BTreeMap<&str, Vec<&Finding>> = BTreeMap::new();
        for f in &self.findings {
            m.entry(f.policy.as_str()).or_default().push(f);
        }
        m
    }
}

fn echo(engine: &EngineConfig, policies: &PolicyConfig) -> ConfigEcho {
    ConfigEcho {
        seed: engine.seed,
        budgets: engine.budgets.clone(),
        activex: engine.activex,
        strategy: engine.strategy,
        ternary_as_branch: engine.ternary_as_branch,
        policies: policies.clone(),
    }
}

/// Explores `units` (name, text) and applies the built-in policies.
pub fn analyze_source(
    sample: &str,
    units: Vec<(String, String)>,
    engine: &EngineConfig,
    policies: &PolicyConfig,
) -> Report {
    let result = explore_units(units, engine);
    Report::from_exploration(sample, &result, engine, policies)
}

/// Root units of a document: the whole text for scripts, the inline scripts
/// and handlers for HTML. Unit names are prefixed with `file_name`.
pub fn document_units(
    file_name: &str,
    text: &str,
    html: bool,
) -> (Vec<(String, String)>, Vec<String>) {
    if !html {
        return (vec![(file_name.to_string(), text.to_string())], Vec::new());
    }
    let mut units = Vec::new();
    let mut external = Vec::new();
    for s in extract_scripts(text) {
        match s.src {
            Some(src) => external.push(src),
            None => units.push((format!("{file_name}:{}", s.name), s.text)),
        }
    }
    (units, external)
}

/// Analyzes one document, script or HTML.
pub fn analyze_document(
    sample: &str,
    file_name: &str,
    text: &str,
    html: bool,
    engine: &EngineConfig,
    policies: &PolicyConfig,
) -> Report {
    let (units, external) = document_units(file_name, text, html);
    let mut report = analyze_source(sample, units, engine, policies);
    report.external_scripts = external;
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::explorer::{CoverageMap, LocatedEvent, Run, UnitResult};
    use crate::interp::DetectionEvent;

    fn empty() -> ExplorationResult {
        ExplorationResult {
            units: Vec::new(),
            coverage: CoverageMap::default(),
            events: Vec::new(),
            wall_time_ms: 0,
            exhausted: true,
            units_dropped: 0,
        }
    }

    #[test]
    fn empty_result_is_info() {
        let r = Report::from_exploration(
            "x",
            &empty(),
            &EngineConfig::default(),
            &PolicyConfig::default(),
        );
        assert_eq!(r.verdict, Severity::Info);
        assert!(r.findings.is_empty());
    }

    #[test]
    fn shellcode_threshold() {
        let mk = |n: usize| {
            let mut r = empty();
            r.units.push(UnitResult {
                name: "main".into(),
                sha256: String::new(),
                origin: None,
                discovered_at: None,
                syntax_error: None,
                runs: Vec::<Run>::new(),
            });
            r.events.push(LocatedEvent {
                unit: 0,
                run: 0,
                event: DetectionEvent {
                    kind: EventKind::DecodeCall,
                    payload: "%u9090".repeat(n),
                    anchor: SourceAnchor::new("main", 0),
                    in_catch: false,
                },
            });
            r
        };
        let p = ShellcodeDensity::new(32);
        assert!(p.evaluate(&mk(31)).is_empty());
        let f = p.evaluate(&mk(32));
        assert_eq!(f.len(), 1);
        assert_eq!(f[0].severity, Severity::Malicious);
    }

    struct Boom;
    impl Policy for Boom {
        fn name(&self) -> &'static str {
            "boom"
        }
        fn evaluate(&self, _: &ExplorationResult) -> Vec<Finding> {
            panic!("kaboom")
        }
    }

    #[test]
    fn panicking_policy_is_isolated() {
        let policies: Vec<Box<dyn Policy>> =
            vec![Box::new(Boom), Box::new(EvalChain { min_depth: 0 })];
        let mut r = empty();
        r.units.push(UnitResult {
            name: "main:eval@0#0".into(),
            sha256: String::new(),
            origin: Some(DynamicOrigin::Eval),
            discovered_at: None,
            syntax_error: None,
            runs: Vec::new(),
        });
        let f = run_policies(&policies, &r);
        assert_eq!(f.len(), 2);
        assert_eq!(f[0].policy, "boom");
        assert!(f[0].evidence.contains("kaboom"));
        assert_eq!(f[1].policy, "eval_chain");
    }

    #[test]
    fn policy_config_from_partial_toml_shape() {
        let c: PolicyConfig = serde_json::from_str(r#"{"shellcode":{"min_escapes":8}}"#).unwrap();
        assert_eq!(c.shellcode.min_escapes, 8);
        assert!(c.shellcode.enabled);
        assert_eq!(c.heap_spray, HeapSprayConfig::default());
    }
}
