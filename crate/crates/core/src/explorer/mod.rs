//! Path exploration over script units.
//!
//! Every unit starts with one natural run. Each run reports the predicates it
//! executed after its forced prefix; every direction not yet covered becomes a
//! new run with one more switch. Code discovered at runtime joins the unit
//! queue, deduplicated by content hash.

use std::collections::{BTreeMap, HashSet, VecDeque};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{EngineConfig, Strategy};
use crate::interp::{self, DetectionEvent, DynamicOrigin, ExecutionOutcome, TerminatedBy};
use crate::syntax::{self, SourceAnchor};

pub use crate::interp::SwitchSequence;

/// Upper bound on distinct units explored for one sample.
pub const MAX_UNITS: usize = 4096;

/// Directions of one branch point that have executed.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Directions {
    #[serde(rename = "true")]
    pub taken_true: bool,
    #[serde(rename = "false")]
    pub taken_false: bool,
}

impl Directions {
    pub fn get(&self, b: bool) -> bool {
        if b {
            self.taken_true
        } else {
            self.taken_false
        }
    }

    fn set(&mut self, b: bool) {
        if b {
            self.taken_true = true;
        } else {
            self.taken_false = true;
        }
    }
}

/// Covered branch directions, keyed by unit name and then byte offset.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverageMap {
    pub units: BTreeMap<String, BTreeMap<usize, Directions>>,
}

impl CoverageMap {
    pub fn covered(&self, p: &SourceAnchor, b: bool) -> bool {
        self.units
            .get(&*p.source_name)
            .and_then(|m| m.get(&p.offset))
            .is_some_and(|d| d.get(b))
    }

    pub fn mark(&mut self, p: &SourceAnchor, b: bool) {
        self.units
            .entry(p.source_name.to_string())
            .or_default()
            .entry(p.offset)
            .or_default()
            .set(b);
    }

    /// Number of branch points seen in any direction.
    pub fn branch_points(&self) -> usize {
        self.units.values().map(|m| m.len()).sum()
    }

    /// Number of covered (point, direction) pairs.
    pub fn covered_directions(&self) -> usize {
        self.units
            .values()
            .flat_map(|m| m.values())
            .map(|d| d.taken_true as usize + d.taken_false as usize)
            .sum()
    }

    /// Fraction of directions covered among the branch points seen.
    pub fn ratio(&self) -> f64 {
        let n = self.branch_points();
        if n == 0 {
            1.0
        } else {
            self.covered_directions() as f64 / (2 * n) as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Run {
    pub switches: SwitchSequence,
    pub outcome: ExecutionOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitResult {
    pub name: String,
    /// Hex SHA-256 of the unit text.
    pub sha256: String,
    /// None for root units.
    pub origin: Option<DynamicOrigin>,
    pub discovered_at: Option<SourceAnchor>,
    pub syntax_error: Option<String>,
    pub runs: Vec<Run>,
}

/// An event together with where it was first seen.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocatedEvent {
    pub unit: usize,
    pub run: usize,
    #[serde(flatten)]
    pub event: DetectionEvent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplorationResult {
    pub units: Vec<UnitResult>,
    pub coverage: CoverageMap,
    /// Distinct events over all runs, in order of first appearance.
    pub events: Vec<LocatedEvent>,
    pub wall_time_ms: u64,
    /// False when the sample timeout cut exploration short.
    pub exhausted: bool,
    /// Dynamic units discarded after [`MAX_UNITS`] was reached.
    pub units_dropped: u64,
}

impl ExplorationResult {
    pub fn run_count(&self) -> usize {
        self.units.iter().map(|u| u.runs.len()).sum()
    }

    pub fn runs(&self) -> impl Iterator<Item = (usize, usize, &Run)> {
        self.units.iter().enumerate().flat_map(|(u, unit)| {
            unit.runs
                .iter()
                .enumerate()
                .map(move |(r, run)| (u, r, run))
        })
    }

    /// Runs whose termination reason was `t`, over all units.
    pub fn terminations(&self) -> BTreeMap<TerminatedBy, u64> {
        let mut h = BTreeMap::new();
        for (_, _, run) in self.runs() {
            *h.entry(run.outcome.terminated_by).or_insert(0) += 1;
        }
        h
    }
}

struct PendingUnit {
    name: String,
    text: String,
    sha256: String,
    origin: Option<DynamicOrigin>,
    discovered_at: Option<SourceAnchor>,
}

fn digest(text: &str) -> String {
    Sha256::digest(text.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Explores a single script named `"main"`.
pub fn explore(root_js: &str, config: &EngineConfig) -> ExplorationResult {
    explore_units(vec![("main".to_string(), root_js.to_string())], config)
}

/// Explores several root units, e.g. the scripts of one HTML page, in order.
pub fn explore_units(roots: Vec<(String, String)>, config: &EngineConfig) -> ExplorationResult {
    interp::run_on_big_stack(move || Explorer::new(config).run(roots))
}

struct Explorer<'a> {
    config: &'a EngineConfig,
    start: Instant,
    deadline: Instant,
    src: VecDeque<PendingUnit>,
    seen_text: HashSet<String>,
    seen_events: HashSet<(interp::EventKind, String, SourceAnchor)>,
    result: ExplorationResult,
}

impl<'a> Explorer<'a> {
    fn new(config: &'a EngineConfig) -> Self {
        let start = Instant::now();
        Explorer {
            config,
            start,
            deadline: start + config.budgets.sample_timeout,
            src: VecDeque::new(),
            seen_text: HashSet::new(),
            seen_events: HashSet::new(),
            result: ExplorationResult {
                units: Vec::new(),
                coverage: CoverageMap::default(),
                events: Vec::new(),
                wall_time_ms: 0,
                exhausted: true,
                units_dropped: 0,
            },
        }
    }

    fn schedule(
        &mut self,
        name: String,
        text: String,
        origin: Option<DynamicOrigin>,
        at: Option<SourceAnchor>,
    ) {
        let sha256 = digest(&text);
        if !self.seen_text.insert(sha256.clone()) {
            return;
        }
        if self.result.units.len() + self.src.len() >= MAX_UNITS {
            self.result.units_dropped += 1;
            return;
        }
        self.src.push_back(PendingUnit {
            name,
            text,
            sha256,
            origin,
            discovered_at: at,
        });
    }

    fn run(mut self, roots: Vec<(String, String)>) -> ExplorationResult {
        for (name, text) in roots {
            self.schedule(name, text, None, None);
        }
        while let Some(unit) = self.src.pop_front() {
            if Instant::now() >= self.deadline {
                self.result.exhausted = false;
                break;
            }
            if !self.explore_unit(unit) {
                self.result.exhausted = false;
                break;
            }
        }
        self.result.wall_time_ms = interp::duration_ms(self.start.elapsed());
        self.result
    }

    /// Returns false when the deadline interrupted the unit.
    fn explore_unit(&mut self, unit: PendingUnit) -> bool {
        let index = self.result.units.len();
        let mut entry = UnitResult {
            name: unit.name.clone(),
            sha256: unit.sha256,
            origin: unit.origin,
            discovered_at: unit.discovered_at,
            syntax_error: None,
            runs: Vec::new(),
        };
        let program = match syntax::parse(&unit.text, &unit.name) {
            Ok(p) => p,
            Err(e) => {
                entry.syntax_error = Some(e.to_string());
                let outcome =
                    ExecutionOutcome::syntax_error(&unit.name, e.anchor.clone(), e.message.clone());
                entry.runs.push(Run {
                    switches: SwitchSequence::empty(),
                    outcome,
                });
                self.result.units.push(entry);
                return true;
            }
        };
        self.result.units.push(entry);

        let mut worklist = VecDeque::from([SwitchSequence::empty()]);
        let mut pending: HashSet<(SourceAnchor, bool)> = HashSet::new();
        while let Some(switches) = worklist.pop_front() {
            if Instant::now() >= self.deadline {
                return false;
            }
            let outcome =
                interp::execute_until(&program, &switches, self.config, Some(self.deadline));
            for (p, b) in outcome.executed_directions() {
                self.result.coverage.mark(p, b);
            }
            for js in &outcome.new_js {
                self.schedule(
                    js.name.clone(),
                    js.text.clone(),
                    Some(js.origin),
                    Some(js.anchor.clone()),
                );
            }
            let t = switches.len().min(outcome.preds.len());
            for rec in &outcome.preds[t..] {
                if switches.entries.iter().any(|(a, _)| *a == rec.anchor) {
                    continue;
                }
                let flip = !rec.taken;
                if self.result.coverage.covered(&rec.anchor, flip) {
                    continue;
                }
                if self.config.strategy == Strategy::Linear
                    && !pending.insert((rec.anchor.clone(), flip))
                {
                    continue;
                }
                worklist.push_back(switches.extended(rec.anchor.clone(), flip));
            }
            let run = self.result.units[index].runs.len();
            for ev in &outcome.events {
                if self
                    .seen_events
                    .insert((ev.kind, ev.payload.clone(), ev.anchor.clone()))
                {
                    self.result.events.push(LocatedEvent {
                        unit: index,
                        run,
                        event: ev.clone(),
                    });
                }
            }
            let timed_out = outcome.terminated_by == TerminatedBy::GlobalTimeout;
            self.result.units[index]
                .runs
                .push(Run { switches, outcome });
            if timed_out {
                return false;
            }
        }
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn runs(src: &str, strategy: Strategy) -> Vec<Vec<(usize, bool)>> {
        let config = EngineConfig {
            strategy,
            ..EngineConfig::default()
        };
        let r = explore(src, &config);
        r.units[0]
            .runs
            .iter()
            .map(|run| {
                run.switches
                    .entries
                    .iter()
                    .map(|(a, b)| (a.offset, *b))
                    .collect()
            })
            .collect()
    }

    #[test]
    fn straight_line_is_one_run() {
        let r = explore("var x = 1; x = x + 2;", &EngineConfig::default());
        assert_eq!(r.units.len(), 1);
        assert_eq!(r.units[0].runs.len(), 1);
        assert!(r.units[0].runs[0].switches.is_empty());
        assert!(r.exhausted);
    }

    #[test]
    fn single_if_two_runs() {
        let r = runs("var q = 0; if (q) { x = 1 }", Strategy::Linear);
        assert_eq!(r, vec![vec![], vec![(11, true)]]);
    }

    #[test]
    fn two_ifs_as_written_needs_four_runs() {
        let src = "var p = 0, q = 0; if (p) { a = 1 } if (q) { b = 1 }";
        let first = src.find("if").unwrap();
        let second = src.rfind("if").unwrap();
        let r = runs(src, Strategy::AsWritten);
        assert_eq!(
            r,
            vec![
                vec![],
                vec![(first, true)],
                vec![(second, true)],
                vec![(first, true), (second, true)]
            ]
        );
    }

    #[test]
    fn two_ifs_linear_three_runs() {
        let src = "var p = 0, q = 0; if (p) { a = 1 } if (q) { b = 1 }";
        let r = runs(src, Strategy::Linear);
        assert_eq!(r.len(), 3);
    }

    #[test]
    fn coverage_monotone_and_complete() {
        let r = explore("if (p) { a = 1 } else { a = 2 }", &EngineConfig::default());
        let p = SourceAnchor::new("main", 0);
        assert!(r.coverage.covered(&p, true));
        assert!(r.coverage.covered(&p, false));
        assert!(!CoverageMap::default().covered(&p, true));
    }

    #[test]
    fn same_eval_text_scheduled_once() {
        let r = explore(
            "if (p) { eval('var z = 1;') } else { eval('var z = 1;') }",
            &EngineConfig::default(),
        );
        assert_eq!(r.units.len(), 2);
        assert_eq!(r.units[1].origin, Some(DynamicOrigin::Eval));
    }

    #[test]
    fn distinct_writes_make_distinct_units() {
        let r = explore(
            "document.write('<script>var a = 1;</script>'); document.write('<script>var b = 2;</script>');",
            &EngineConfig::default(),
        );
        assert_eq!(r.units.len(), 3);
    }

    #[test]
    fn syntax_error_root_is_recorded() {
        let r = explore("var ifrm.style = 1", &EngineConfig::default());
        assert!(r.units[0].syntax_error.is_some());
        assert_eq!(
            r.units[0].runs[0].outcome.terminated_by,
            TerminatedBy::SyntaxErrorInDynamicUnit
        );
    }

    #[test]
    fn bad_dynamic_unit_does_not_stop_exploration() {
        let r = explore(
            "setTimeout('var = ;', 10); var ok = 1;",
            &EngineConfig::default(),
        );
        assert_eq!(r.units.len(), 1);
        assert!(r.exhausted);
    }
}
