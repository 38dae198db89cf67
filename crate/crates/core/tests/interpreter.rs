mod common;

use std::time::{Duration, Instant};

use forcex::interp::{DynamicOrigin, EventKind};
use forcex::syntax::parse;
use forcex::values::{Rule, TypeTag};
use forcex::{
    execute, explore, ActiveXMode, EngineConfig, ExecutionOutcome, SwitchSequence, TerminatedBy,
};

use common::read_fixture;

fn run_with(src: &str, switches: &SwitchSequence, config: &EngineConfig) -> ExecutionOutcome {
    let program = parse(src, "main").unwrap_or_else(|e| panic!("{e}"));
    execute(&program, switches, config)
}

fn run(src: &str) -> ExecutionOutcome {
    run_with(src, &SwitchSequence::empty(), &EngineConfig::default())
}

fn writes(out: &ExecutionOutcome) -> Vec<String> {
    out.events
        .iter()
        .filter(|e| e.kind == EventKind::DocumentWrite)
        .map(|e| e.payload.clone())
        .collect()
}

fn force(src: &str, needle: &str, direction: bool) -> SwitchSequence {
    let offset = src
        .find(needle)
        .unwrap_or_else(|| panic!("{needle} not in source"));
    SwitchSequence::empty().extended(forcex::syntax::SourceAnchor::new("main", offset), direction)
}

#[test]
fn golden_sample_rules_in_order() {
    let out = run(&read_fixture("golden.js"));
    let rules: Vec<&str> = out.recoveries.iter().map(|r| r.rule.as_str()).collect();
    assert_eq!(
        rules,
        [
            "ER_2",
            "ER_1",
            "R_BINOPERATOR1",
            "ER_1",
            "ER_2",
            "R_ASSIGN",
            "ER_1",
            "R_NEW",
            "R_CALL1",
            "R_ASSIGN",
            "R_CALL2",
            "ER_1",
            "R_INDEX1",
            "R_ASSIGN"
        ]
    );
    assert_eq!(out.terminated_by, TerminatedBy::Normal);
}

#[test]
fn infinite_loop_stops_at_budget_and_continues() {
    let mut config = EngineConfig::default();
    config.budgets.loop_budget = Duration::from_millis(100);
    let start = Instant::now();
    let out = run_with(
        "while (true) {}\ndocument.write('after');",
        &SwitchSequence::empty(),
        &config,
    );
    let elapsed = start.elapsed();
    assert!(
        elapsed >= Duration::from_millis(100) && elapsed < Duration::from_millis(600),
        "{elapsed:?}"
    );
    assert_eq!(out.terminated_by, TerminatedBy::LoopBudget);
    assert_eq!(out.loop_cutoffs, 1);
    assert_eq!(writes(&out), ["after"]);
    assert!(out.recoveries.iter().any(|r| r.rule == Rule::LoopBudget));
}

#[test]
fn heap_spray_loop_runs_to_its_bound() {
    let out = run(&read_fixture("heap_spray.js"));
    let iterations = out.loop_stats.iter().map(|s| s.iterations).max().unwrap();
    assert!(iterations >= 9000, "{iterations}");
    assert_eq!(out.loop_cutoffs, 0);
    assert!(out
        .recoveries
        .iter()
        .any(|r| r.subject == "a" && r.becomes == Some(TypeTag::Number)));
}

#[test]
fn for_in_over_one_key_runs_once() {
    let out = run("var n = 0; for (var k in {a: 1}) { n++; document.write(k); }");
    assert_eq!(writes(&out), ["a"]);
    assert_eq!(out.loop_cutoffs, 0);
}

#[test]
fn forced_condition_is_still_evaluated() {
    let src = "var n = 0;\nif (n++ > 5) { document.write('then ' + n); } else { document.write('else'); }";
    let out = run_with(src, &force(src, "if (", true), &EngineConfig::default());
    assert_eq!(writes(&out), ["then 1"]);
    assert!(out.preds[0].forced && out.preds[0].taken);
}

#[test]
fn forcing_the_catch_arm_binds_a_faked_error() {
    let src = "try { document.write('try'); } catch (e) { document.write(typeof e); }";
    let out = run_with(src, &force(src, "try", true), &EngineConfig::default());
    assert_eq!(writes(&out), ["object"]);
    assert!(out.events.iter().all(|e| e.in_catch));
}

#[test]
fn plain_null_assignment_is_kept() {
    let out = run("var y = 1; y = null; document.write(String(y === null));");
    assert_eq!(writes(&out), ["true"]);
    assert!(out.recoveries.is_empty());
}

#[test]
fn activex_probe_throws_into_catch() {
    let src = "try { var o = new ActiveXObject(\"UM0QS4dD\"); document.write('no'); } catch (e) { document.write('caught'); }";
    let out = run(src);
    let probe = out
        .events
        .iter()
        .find(|e| e.kind == EventKind::ActivexProbe)
        .expect("probe event");
    assert_eq!(probe.payload, "UM0QS4dD");
    assert_eq!(writes(&out), ["caught"]);

    let config = EngineConfig {
        activex: ActiveXMode::Fake,
        ..EngineConfig::default()
    };
    assert_eq!(
        writes(&run_with(src, &SwitchSequence::empty(), &config)),
        ["no"]
    );
}

#[test]
fn unescape_matches_code_unit_decoding() {
    let out = run("document.write(unescape('%u9090%41%zz'));");
    let expected: String = [
        char::from_u32(u32::from_str_radix("9090", 16).unwrap()).unwrap(),
        'A',
        '%',
        'z',
        'z',
    ]
    .iter()
    .collect();
    assert_eq!(writes(&out), [expected]);
}

#[test]
fn environment_probes_are_faked() {
    let out = run("var n = navigator.appName; document.write(typeof n);");
    assert_eq!(writes(&out), ["object"]);
    let heal = out
        .recoveries
        .iter()
        .find(|r| r.subject == "navigator.appName")
        .expect("ER_1 on appName");
    assert_eq!((heal.rule, heal.becomes), (Rule::Er1, Some(TypeTag::FObj)));
}

#[test]
fn timers_fire_immediately_after_the_script() {
    let out = run(
        "setTimeout(function () { document.write('late'); }, 100000); document.write('first');",
    );
    assert_eq!(writes(&out), ["first", "late"]);
    assert_eq!(out.callbacks_invoked.len(), 1);
    assert_eq!(out.callbacks_invoked[0].api, "setTimeout");
}

#[test]
fn set_interval_fires_once() {
    let out = run("setInterval(function () { document.write('tick'); }, 10);");
    assert_eq!(writes(&out), ["tick"]);
}

#[test]
fn timer_strings_become_code_units() {
    let out = run("setTimeout(\"redir()\", 3000);");
    assert_eq!(out.new_js.len(), 1);
    assert_eq!(out.new_js[0].text, "redir()");
    assert_eq!(out.new_js[0].origin, DynamicOrigin::Timer);
}

#[test]
fn faked_callees_run_function_arguments() {
    let out = run("jQuery(function () { document.write('ready'); });");
    assert_eq!(writes(&out), ["ready"]);
    assert_eq!(out.callbacks_invoked.len(), 1);
}

#[test]
fn split_script_tags_are_joined_before_extraction() {
    let out =
        run("document.write('<scr'); document.write('ipt>var z = 1; eval(\"z\");</scr' + 'ipt>');");
    let units: Vec<_> = out
        .new_js
        .iter()
        .filter(|u| u.origin == DynamicOrigin::DocumentWrite)
        .collect();
    assert_eq!(units.len(), 1);
    assert_eq!(units[0].text, "var z = 1; eval(\"z\");");
}

#[test]
fn direct_eval_sees_the_callers_scope() {
    let out =
        run("function f() { var local = 'inner'; return eval('local'); } document.write(f());");
    assert_eq!(writes(&out), ["inner"]);
    assert_eq!(out.new_js.len(), 1);
}

#[test]
fn unbounded_recursion_hits_the_cap() {
    let out = run("function f(n) { return f(n + 1); } f(0); document.write('done');");
    assert_eq!(out.terminated_by, TerminatedBy::RecursionCap);
    assert!(out.recursion_cutoffs >= 1);
    assert_eq!(writes(&out), ["done"]);
}

#[test]
fn branching_recursion_stays_linear() {
    let start = Instant::now();
    let out = run("function f(n) { f(n + 1); f(n + 1); f(n + 1); } f(0); document.write('done');");
    assert!(start.elapsed() < Duration::from_secs(5));
    assert_eq!(out.terminated_by, TerminatedBy::RecursionCap);
    assert_eq!(writes(&out), ["done"]);
}

#[test]
fn uncaught_throw_skips_to_the_next_top_level_statement() {
    let out = run("document.write('a'); if (true) { throw 'boom'; document.write('x'); } document.write('b');");
    assert_eq!(writes(&out), ["a", "b"]);
    let thrown = out
        .recoveries
        .iter()
        .find(|r| r.rule == Rule::UncaughtThrow)
        .expect("logged");
    assert_eq!(thrown.detail.as_deref(), Some("boom"));
}

#[test]
fn faked_divisor_never_divides_by_zero() {
    let out = run("var q = 10 / u; document.write(String(isFinite(q)));");
    assert_eq!(writes(&out), ["true"]);
}

#[test]
fn typeof_undeclared_is_undefined() {
    let out = run("document.write(typeof nothingHere);");
    assert_eq!(writes(&out), ["undefined"]);
}

#[test]
fn builtins_accept_faked_arguments() {
    let config = EngineConfig {
        activex: ActiveXMode::Fake,
        ..EngineConfig::default()
    };
    for name in forcex::hostenv::builtin_names() {
        let src = match name.split_once(".prototype.") {
            Some((owner, _)) => {
                let receiver = match owner {
                    "Object" => "{}",
                    "Function" => "function () {}",
                    "Array" => "[1, 2]",
                    "String" => "'abc'",
                    "Number" => "5",
                    "Boolean" => "true",
                    "Date" => "new Date()",
                    "RegExp" => "/a/g",
                    "Error" => "new Error('x')",
                    other => panic!("no receiver for {other}"),
                };
                format!("var r = {name}.call({receiver}, u1, u2, u3);")
            }
            None => format!("var r = {name}(u1, u2, u3);"),
        };
        let out = run_with(&src, &SwitchSequence::empty(), &config);
        let raised: Vec<_> = out
            .recoveries
            .iter()
            .filter(|r| matches!(r.rule, Rule::ErrorRecovered | Rule::UncaughtThrow))
            .collect();
        assert!(raised.is_empty(), "{name}: {raised:?}");
    }
}

#[test]
fn straight_line_explores_once() {
    let result = explore("var a = 1; a = a + 2;", &EngineConfig::default());
    assert_eq!(result.run_count(), 1);
    assert!(result.units[0].runs[0].switches.is_empty());
}

#[test]
fn one_if_explores_twice() {
    let result = explore("var q = 0; if (q) { q = 2; }", &EngineConfig::default());
    assert_eq!(result.run_count(), 2);
    assert_eq!(result.coverage.covered_directions(), 2);
}

#[test]
fn eval_text_seen_on_both_arms_is_one_unit() {
    let result = explore(
        "var q = 0; if (q) { eval('var z = 1;'); } else { eval('var z = 1;'); }",
        &EngineConfig::default(),
    );
    assert_eq!(result.units.len(), 2);
    assert_eq!(result.units[1].origin, Some(DynamicOrigin::Eval));
}

#[test]
fn eval_bomb_respects_a_short_sample_timeout() {
    let mut config = EngineConfig::default();
    config.budgets.sample_timeout = Duration::from_secs(3);
    let start = Instant::now();
    let result = explore(&read_fixture("eval_bomb.js"), &config);
    let elapsed = start.elapsed();
    assert!(!result.exhausted);
    assert!(elapsed < Duration::from_secs(5), "{elapsed:?}");
}

#[test]
#[ignore = "runs for the full five-minute default sample timeout"]
fn eval_bomb_respects_the_default_sample_timeout() {
    let config = EngineConfig::default();
    let start = Instant::now();
    let result = explore(&read_fixture("eval_bomb.js"), &config);
    let elapsed = start.elapsed();
    assert!(!result.exhausted);
    assert!(
        elapsed < config.budgets.sample_timeout + Duration::from_secs(2),
        "{elapsed:?}"
    );
}
