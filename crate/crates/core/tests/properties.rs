mod common;

use std::collections::{BTreeSet, HashSet};
use std::time::Duration;

use forcex::interp::{EventKind, PredicateRecord};
use forcex::syntax::parse;
use forcex::values::Rule;
use forcex::{
    execute, explore, CoverageMap, EngineConfig, ExecutionOutcome, Strategy, SwitchSequence,
    TerminatedBy,
};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{nested_dag, sequential_dag, Fuzz};

fn fuzz_source(seed: u64) -> String {
    Fuzz::new(&mut ChaCha8Rng::seed_from_u64(seed)).program()
}

fn fast_config() -> EngineConfig {
    let mut config = EngineConfig::default();
    config.budgets.loop_budget = Duration::from_millis(5);
    config
}

fn run(src: &str, switches: &SwitchSequence, config: &EngineConfig) -> ExecutionOutcome {
    let program = parse(src, "main").unwrap_or_else(|e| panic!("{e}\n{src}"));
    execute(&program, switches, config)
}

fn leaked_engine_error(out: &ExecutionOutcome) -> Option<&str> {
    out.recoveries
        .iter()
        .filter(|r| r.rule == Rule::UncaughtThrow)
        .filter_map(|r| r.detail.as_deref())
        .find(|d| d.starts_with("ReferenceError") || d.starts_with("TypeError"))
}

fn document_writes(out: &ExecutionOutcome) -> Vec<&str> {
    out.events
        .iter()
        .filter(|e| e.kind == EventKind::DocumentWrite)
        .map(|e| e.payload.as_str())
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn branch_anchors_are_unique(seed in any::<u64>()) {
        let src = fuzz_source(seed);
        let program = parse(&src, "main").unwrap();
        let anchors: Vec<_> = program.branch_points().into_iter().map(|(a, _)| a).collect();
        let distinct: HashSet<_> = anchors.iter().collect();
        prop_assert_eq!(distinct.len(), anchors.len());
    }

    #[test]
    fn parsing_is_deterministic(seed in any::<u64>()) {
        let src = fuzz_source(seed);
        prop_assert_eq!(parse(&src, "main").unwrap(), parse(&src, "main").unwrap());
    }

    #[test]
    fn fuzzed_programs_always_produce_an_outcome(seed in any::<u64>()) {
        let src = fuzz_source(seed);
        let out = run(&src, &SwitchSequence::empty(), &fast_config());
        prop_assert!(
            matches!(out.terminated_by, TerminatedBy::Normal | TerminatedBy::LoopBudget | TerminatedBy::RecursionCap),
            "{:?}\n{}", out.terminated_by, src
        );
        prop_assert_eq!(leaked_engine_error(&out), None);
    }

    #[test]
    fn a_deleted_global_heals_itself(seed in any::<u64>(), pick in any::<prop::sample::Index>()) {
        let globals: Vec<&str> = forcex::hostenv::builtin_names()
            .filter_map(|n| n.split('.').next())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let victim = globals[pick.index(globals.len())];
        let src = format!("delete window.{victim};\n{}", fuzz_source(seed));
        let out = run(&src, &SwitchSequence::empty(), &fast_config());
        prop_assert!(
            matches!(out.terminated_by, TerminatedBy::Normal | TerminatedBy::LoopBudget | TerminatedBy::RecursionCap),
            "{:?}\n{}", out.terminated_by, src
        );
        prop_assert_eq!(leaked_engine_error(&out), None);
    }

    #[test]
    fn replay_is_deterministic(seed in any::<u64>()) {
        let src = fuzz_source(seed);
        let config = fast_config();
        let a = run(&src, &SwitchSequence::empty(), &config);
        let b = run(&src, &SwitchSequence::empty(), &config);
        // wall-clock cutoffs legitimately vary between runs
        prop_assume!(a.loop_cutoffs == 0 && b.loop_cutoffs == 0);
        prop_assert_eq!(&a.preds, &b.preds);
        prop_assert_eq!(&a.events, &b.events);
        prop_assert_eq!(&a.recoveries, &b.recoveries);
    }

    #[test]
    fn forced_switches_lead_the_predicate_log(seed in any::<u64>(), pick in any::<u64>()) {
        let src = fuzz_source(seed);
        let config = fast_config();
        let natural = run(&src, &SwitchSequence::empty(), &config);
        let mut rng = ChaCha8Rng::seed_from_u64(pick);
        let mut seen = HashSet::new();
        let mut anchors: Vec<_> = natural.preds.iter().map(|p| p.anchor.clone()).filter(|a| seen.insert(a.clone())).collect();
        anchors.shuffle(&mut rng);
        let n = rng.gen_range(0..=anchors.len().min(4));
        let switches = SwitchSequence { entries: anchors[..n].iter().map(|a| (a.clone(), rng.gen())).collect() };
        let out = run(&src, &switches, &config);
        let expected: Vec<PredicateRecord> = switches
            .entries
            .iter()
            .map(|(anchor, taken)| PredicateRecord { anchor: anchor.clone(), taken: *taken, forced: true })
            .collect();
        prop_assert!(out.preds.len() >= n);
        prop_assert_eq!(&out.preds[..n], &expected[..]);
    }

    #[test]
    fn natural_runs_agree_with_the_reference_evaluator(seed in any::<u64>(), k in 1usize..=10, nested in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dag = if nested { nested_dag(&mut rng, k) } else { sequential_dag(&mut rng, k) };
        let out = run(&dag.source, &SwitchSequence::empty(), &EngineConfig::default());
        let path: Vec<(usize, bool)> = out
            .preds
            .iter()
            .map(|p| (dag.id_of_offset(p.anchor.offset).expect("generated branch"), p.taken))
            .collect();
        prop_assert_eq!(path, dag.natural_path());
        prop_assert!(out.recoveries.is_empty(), "{:?}", out.recoveries);
    }

    #[test]
    fn exploration_covers_every_reachable_arm(seed in any::<u64>(), k in 1usize..=10, nested in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dag = if nested { nested_dag(&mut rng, k) } else { sequential_dag(&mut rng, k) };
        let result = explore(&dag.source, &EngineConfig::default());
        prop_assert_eq!(dag.covered_arms(&result.coverage), dag.reachable_arms());
        prop_assert!(result.exhausted);
    }

    #[test]
    fn linear_bound_on_sequential_branches(seed in any::<u64>(), k in 1usize..=10) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dag = sequential_dag(&mut rng, k);
        let result = explore(&dag.source, &EngineConfig::default());
        prop_assert!(result.run_count() <= dag.natural_path().len() + 1);
    }

    #[test]
    fn scheduled_runs_start_with_their_switches(seed in any::<u64>()) {
        let src = fuzz_source(seed);
        let mut config = fast_config();
        config.budgets.sample_timeout = Duration::from_secs(20);
        let result = explore(&src, &config);
        for unit in &result.units {
            prop_assert!(unit.runs[0].switches.is_empty());
            for r in &unit.runs {
                let n = r.switches.len();
                prop_assert!(r.outcome.preds.len() >= n);
                for (p, (anchor, dir)) in r.outcome.preds.iter().zip(&r.switches.entries) {
                    prop_assert!(p.forced && p.anchor == *anchor && p.taken == *dir);
                }
                prop_assert_eq!(r.outcome.prefix_mismatch, !r.outcome.unconsumed_switches.is_empty());
                for (anchor, dir) in r.outcome.executed_directions() {
                    prop_assert!(result.coverage.covered(anchor, dir));
                }
            }
        }
    }

    #[test]
    fn coverage_is_monotone(marks in prop::collection::vec((0usize..3, 0usize..20, any::<bool>()), 0..60)) {
        let mut map = CoverageMap::default();
        let mut seen: Vec<(forcex::syntax::SourceAnchor, bool)> = Vec::new();
        for (unit, offset, b) in marks {
            let anchor = forcex::syntax::SourceAnchor::new(format!("u{unit}"), offset);
            map.mark(&anchor, b);
            seen.push((anchor, b));
            for (a, d) in &seen {
                prop_assert!(map.covered(a, *d));
            }
        }
        prop_assert_eq!(map.covered_directions(), seen.iter().collect::<HashSet<_>>().len());
    }

    #[test]
    fn callbacks_are_queued_and_invoked_once(
        sinks in prop::collection::vec(prop::sample::select(vec!["u1", "obj.method", "navigator.hook", "setTimeout", "window.addEvent"]), 1..6),
        reuse in any::<bool>(),
    ) {
        let mut src = String::new();
        for (i, sink) in sinks.iter().enumerate() {
            src.push_str(&format!("var cb{i} = function () {{ document.write(\"cb{i};\"); }};\n{sink}(cb{i}, 1);\n"));
            if reuse {
                src.push_str(&format!("{sink}(cb{i});\n"));
            }
        }
        let out = run(&src, &SwitchSequence::empty(), &EngineConfig::default());
        prop_assert_eq!(out.callbacks_invoked.len(), sinks.len());
        let writes = document_writes(&out);
        for i in 0..sinks.len() {
            let tag = format!("cb{i};");
            prop_assert_eq!(writes.iter().filter(|w| **w == tag).count(), 1, "{:?}", writes);
        }
    }

    #[test]
    fn retyping_reaches_every_alias_and_sticks(
        ops in prop::collection::vec((0usize..3, 0usize..4), 1..6),
    ) {
        let mut src = String::from("var a;\nvar b = a;\nvar c = b;\n");
        let names = ["a", "b", "c"];
        for (i, (who, op)) in ops.iter().enumerate() {
            let x = names[*who];
            let e = match op {
                0 => format!("{x} * 2"),
                1 => format!("{x} + \"s\""),
                2 => format!("{x}[3]"),
                _ => format!("-{x}"),
            };
            src.push_str(&format!("var r{i} = {e};\n"));
        }
        src.push_str("document.write(typeof a + \",\" + typeof b + \",\" + typeof c);\n");
        let expected = match ops[0].1 {
            1 => "string",
            2 => "object",
            _ => "number",
        };
        let out = run(&src, &SwitchSequence::empty(), &EngineConfig::default());
        let writes = document_writes(&out);
        let want = format!("{expected},{expected},{expected}");
        prop_assert_eq!(writes, vec![want.as_str()]);
        let retypes = out.recoveries.iter().filter(|r| r.rule.is_typing_rule() && r.rule != Rule::Er2).count();
        prop_assert_eq!(retypes, 1, "{:?}", out.recoveries);
    }
}

#[test]
fn two_independent_ifs_as_written_take_four_runs() {
    let src = "var p = 0; var q = 0;\nif (p) { p = 1; }\nif (q) { q = 1; }\n";
    let config = EngineConfig {
        strategy: Strategy::AsWritten,
        ..EngineConfig::default()
    };
    let result = explore(src, &config);
    let seqs: Vec<Vec<bool>> = result.units[0]
        .runs
        .iter()
        .map(|r| r.switches.entries.iter().map(|(_, d)| *d).collect())
        .collect();
    assert_eq!(seqs, vec![vec![], vec![true], vec![true], vec![true, true]]);
    let offsets: Vec<Vec<usize>> = result.units[0]
        .runs
        .iter()
        .map(|r| r.switches.entries.iter().map(|(a, _)| a.offset).collect())
        .collect();
    let (p1, p2) = (src.find("if (p)").unwrap(), src.find("if (q)").unwrap());
    assert_eq!(offsets, vec![vec![], vec![p1], vec![p2], vec![p1, p2]]);
}

#[test]
fn nested_branches_keep_full_coverage_with_many_programs() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5e5e);
    for _ in 0..100 {
        let k = rng.gen_range(1..=10);
        let dag = nested_dag(&mut rng, k);
        let result = explore(&dag.source, &EngineConfig::default());
        assert_eq!(
            dag.covered_arms(&result.coverage),
            dag.reachable_arms(),
            "{}",
            dag.source
        );
    }
}
