//! Acceptance suite: one PASS/FAIL line per criterion.

mod common;

use std::path::PathBuf;
use std::process::{Command, Output};
use std::time::{Duration, Instant};

use common::{Gen, World};
use pmx_core::compile::Node;
use pmx_core::runtime::{naive_first_match, run_match, MatchOutcome, TraceKind};
use pmx_core::sexpr::{Symbol, Value};
use pmx_core::values_equal;
use rand::Rng;

fn program(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/programs").join(name)
}

fn pmx(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pmx")).args(args).output().expect("pmx runs")
}

fn run_file(name: &str) -> Output {
    pmx(&["run", program(name).to_str().unwrap()])
}

fn ir_file(name: &str) -> String {
    let out = pmx(&["ir", program(name).to_str().unwrap()]);
    assert!(out.status.success(), "ir {name} failed");
    String::from_utf8(out.stdout).unwrap()
}

type Outcome = Result<String, String>;

fn golden_examples() -> Outcome {
    let files = [
        "magnitude_cond.pm",
        "magnitude_list.pm",
        "magnitude_ellipsis.pm",
        "magnitude_expander.pm",
        "polar_expander.pm",
        "list_patterns.pm",
        "app_patterns.pm",
        "structs.pm",
        "num_expander.pm",
        "number_or_default.pm",
    ];
    for f in files {
        let out = run_file(f);
        if out.status.code() != Some(0) || !out.stderr.is_empty() {
            return Err(format!("{f}: exit {:?}, stderr {}", out.status.code(), String::from_utf8_lossy(&out.stderr)));
        }
    }
    Ok(format!("{} programs, all checks pass", files.len()))
}

fn oracle_equivalence() -> Outcome {
    let world = World::new();
    let mut gen = Gen::new(0x5eed);
    let (mut cases, mut matched) = (0, 0);
    while cases < 10_000 {
        let patterns = gen.pattern_set(4);
        let cm = world.compile(&patterns);
        for _ in 0..4 {
            let v = gen.value(4, &world.pt);
            let fast = run_match(&cm, &v, &world.env, None).map_err(|e| format!("{patterns:?} on {v}: {e}"))?;
            let slow = naive_first_match(&cm.patterns, &v, &world.env).map_err(|e| e.to_string())?;
            if fast != slow {
                return Err(format!("{patterns:?} on {v}: compiled {fast:?}, naive {slow:?}\n{}", cm.dump()));
            }
            matched += matches!(fast, MatchOutcome::Matched { .. }) as usize;
            cases += 1;
        }
    }
    Ok(format!("{cases} cases, {matched} matched, 0 disagreements"))
}

fn pred_once() -> Outcome {
    let world = World::new();
    let mut gen = Gen::new(7);
    let mut reached = 0;
    for placement in 0..100 {
        let mut patterns = gen.pattern_set(3);
        let target = gen.rng.gen_range(0..patterns.len());
        let inner = gen.pattern(1, false);
        patterns[target] = if gen.rng.gen_bool(0.5) {
            format!("(list (? (counted) {inner}) ...)")
        } else {
            format!("(cons (? (counted) {inner}) {})", patterns[target])
        };
        // the wrapper adds no variables, so the clause stays well formed
        let cm = world.compile(&patterns);
        let counted_ids: Vec<usize> =
            cm.preds.iter().enumerate().filter(|(_, e)| e.to_string() == "(counted)").map(|(i, _)| i).collect();
        for _ in 0..5 {
            let v = if gen.rng.gen_bool(0.5) {
                Value::list((0..gen.rng.gen_range(0..6)).map(|i| Value::Int(i)).collect::<Vec<_>>())
            } else {
                gen.value(3, &world.pt)
            };
            let before = world.count();
            let mut trace = Vec::new();
            run_match(&cm, &v, &world.env, Some(&mut trace)).map_err(|e| e.to_string())?;
            let evaluations = world.count() - before;
            let tested = trace.iter().any(|e| {
                e.kind == TraceKind::PredApply
                    && matches!(&cm.automaton.nodes[e.node], Node::TestPred { pred, .. } if counted_ids.contains(pred))
            });
            let expected = tested as usize;
            if evaluations != expected {
                return Err(format!("placement {placement}: {patterns:?} on {v}: {evaluations} evaluations, expected {expected}"));
            }
            reached += tested as usize;
        }
    }
    Ok(format!("100 placements, 500 executions, {reached} reached the test"))
}

fn count_lines(dump: &str, prefix: &str) -> usize {
    dump.lines().filter(|l| l.split_once(' ').is_some_and(|(_, rest)| rest.starts_with(prefix))).count()
}

fn residual_shape() -> Outcome {
    let dump = ir_file("number_or_default.pm");
    let counts = (
        count_lines(&dump, "TestPred"),
        count_lines(&dump, "Bind"),
        count_lines(&dump, "Success"),
        count_lines(&dump, "Join"),
    );
    let rhs_lines = dump.lines().filter(|l| l.starts_with(";; rhs")).count();
    let success_targets: Vec<&str> = dump.lines().filter(|l| l.contains(" Success ")).collect();
    let distinct = success_targets.iter().map(|l| l.rsplit(' ').next().unwrap()).collect::<std::collections::BTreeSet<_>>();
    if counts == (1, 1, 2, 1) && rhs_lines == 2 && distinct.len() == 2 {
        Ok("1 TestPred, 1 Bind, 2 Success, each rhs once, 1 Join".into())
    } else {
        Err(format!("census {counts:?}, rhs {rhs_lines}\n{dump}"))
    }
}

fn coalescing_census() -> Outcome {
    let dump = ir_file("magnitude_list.pm");
    let root_pairs = dump.lines().filter(|l| l.contains(" TestType @r pair ")).count();
    if root_pairs == 1 {
        Ok("one root pair test".into())
    } else {
        Err(format!("{root_pairs} root pair tests\n{dump}"))
    }
}

fn fuel() -> Outcome {
    let start = Instant::now();
    let out = run_file("fuel_loop.pm");
    let elapsed = start.elapsed();
    let stderr = String::from_utf8_lossy(&out.stderr);
    if out.status.code() == Some(2) && stderr.starts_with("FuelExhausted") && elapsed < Duration::from_secs(1) {
        Ok(format!("FuelExhausted in {:?}", elapsed))
    } else {
        Err(format!("exit {:?} after {:?}: {}", out.status.code(), elapsed, stderr))
    }
}

fn static_errors() -> Outcome {
    let cases = [
        ("or_binding_mismatch.pm", "OrBindingMismatch"),
        ("struct_arity.pm", "StructArityError"),
        ("duplicate_variable.pm", "DuplicateVariable"),
        ("unknown_head.pm", "UnknownPatternHead"),
        ("empty_match.pm", "EmptyMatch"),
    ];
    for (file, kind) in cases {
        let out = run_file(file);
        let stderr = String::from_utf8_lossy(&out.stderr);
        if out.status.code() != Some(2) || !stderr.starts_with(kind) {
            return Err(format!("{file}: exit {:?}, stderr {stderr}", out.status.code()));
        }
    }
    Ok("5 files, each exit 2 with its error".into())
}

fn seq_property() -> Outcome {
    let world = World::new();
    let mut gen = Gen::new(99);
    for case in 0..1_000 {
        let n: usize = gen.rng.gen_range(0..=50);
        let k: usize = gen.rng.gen_range(0..=3);
        let tail: Vec<String> = (1..=k).map(|i| format!("r{}", i)).collect();
        let pattern = format!("(list (? number? p) ...{})", tail.iter().map(|t| format!(" {}", t)).collect::<String>());
        let bad = if gen.rng.gen_bool(0.3) && n > 0 { Some(gen.rng.gen_range(0..n)) } else { None };
        let items: Vec<Value> =
            (0..n).map(|i| if Some(i) == bad { Value::sym("z") } else { Value::Int(i as i64) }).collect();
        let v = Value::list(items.clone());
        let cm = world.compile(&[pattern.clone()]);
        let outcome = run_match(&cm, &v, &world.env, None).map_err(|e| e.to_string())?;
        let should_match = n >= k && bad.map_or(true, |b| b >= n - k);
        let ok = match (&outcome, should_match) {
            (MatchOutcome::NoMatch, false) => true,
            (MatchOutcome::Matched { bindings, .. }, true) => {
                let p = &bindings[0];
                p.0 == Symbol::new("p")
                    && p.1.proper_length() == Some(n - k)
                    && values_equal(&p.1, &Value::list(items[..n - k].to_vec()))
                    && bindings[1..].iter().zip(&items[n - k..]).all(|((_, b), item)| values_equal(b, item))
                    && bindings.len() == k + 1
            }
            _ => false,
        };
        if !ok {
            return Err(format!("case {case}: {pattern} on {v}: {outcome:?}"));
        }
    }
    Ok("1000 cases, 0 failures".into())
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("example programs", golden_examples),
        ("compiled matcher agrees with the naive matcher", oracle_equivalence),
        ("predicate expressions evaluated once", pred_once),
        ("residual shape of the number-or-default match", residual_shape),
        ("root pair test coalescing", coalescing_census),
        ("expansion fuel", fuel),
        ("static errors", static_errors),
        ("sequence length arithmetic", seq_property),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("PASS {} {}: {}", i + 1, name, detail),
            Err(why) => {
                failed += 1;
                println!("FAIL {} {}: {}", i + 1, name, why);
            }
        }
    }
    println!("acceptance: {} passed, {} failed", criteria.len() - failed, failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
