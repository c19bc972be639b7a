use krlf_core::engine::{Outcome, RunOptions};
use krlf_core::runtime::{EventKind, IoScript, ScriptRecord, Status};
use krlf_core::semantics::check_source;
use krlf_core::tree;
use krlf_core::value::Value;

const EXAMPLE: &str = include_str!("../corpus/example.src");

fn run_with(src: &str, opts: RunOptions) -> Outcome {
    let prog = check_source(src).unwrap_or_else(|e| panic!("{e:?}"));
    tree::run(&prog, &opts).expect("runnable")
}

fn run(src: &str) -> Outcome {
    run_with(src, RunOptions::default())
}

fn events(o: &Outcome) -> Vec<(u64, String)> {
    o.trace
        .iter()
        .filter(|e| !matches!(e.kind, EventKind::Sample { .. }))
        .map(|e| (e.t_ms, e.kind.name().to_string()))
        .collect()
}

fn error_message(o: &Outcome) -> String {
    match &o.status {
        Status::Failed(e) => e.message.clone(),
        s => panic!("expected failure, got {s:?}"),
    }
}

#[test]
fn empty_program_only_ends() {
    let o = run("DEF p()\nEND\n");
    assert_eq!(o.status, Status::Ok);
    assert_eq!(events(&o), vec![(0, "program_end".to_string())]);
}

#[test]
fn example_program_trace() {
    let script = vec![
        ScriptRecord { t_ms: 0, index: 1, value: true },
        ScriptRecord { t_ms: 0, index: 2, value: true },
    ];
    let o = run_with(
        EXAMPLE,
        RunOptions {
            script: IoScript::new(script),
            ..RunOptions::default()
        },
    );
    assert_eq!(o.status, Status::Ok);
    assert_eq!(o.snapshot.local("I"), Some(&Value::Int(7)));
    assert_eq!(
        o.snapshot.global("$VEL_AXIS"),
        Some(&Value::Array(vec![Value::Int(60); 6]))
    );
    let starts: Vec<u64> = o
        .trace
        .iter()
        .filter(|e| matches!(e.kind, EventKind::MotionStart { .. }))
        .map(|e| e.t_ms)
        .collect();
    assert_eq!(starts.len(), 4);
    // The first PTP is a barrier-flushed single motion.
    assert_eq!(starts[0], 0);
    let first_end = o
        .trace
        .iter()
        .find(|e| matches!(e.kind, EventKind::MotionEnd { motion: 0 }))
        .unwrap()
        .t_ms;
    assert_eq!(first_end, 1250);
    let lin_start = starts[1];
    let out = o
        .trace
        .iter()
        .find(|e| matches!(e.kind, EventKind::OutputSet { index: 2, value: true }))
        .expect("trigger sets $OUT[2]");
    assert_eq!(out.t_ms, lin_start + 20);
    assert!(o
        .trace
        .iter()
        .any(|e| matches!(e.kind, EventKind::BlendStart { from: 2, to: 3 })));
    assert_eq!(o.snapshot.outputs, vec![2]);
}

#[test]
fn for_loop_and_locals() {
    let o = run("DEF p()\nDECL INT i, s\ns = 0\nFOR i = 1 TO 10 STEP 3\ns = s + i\nENDFOR\nEND\n");
    assert_eq!(o.snapshot.local("S"), Some(&Value::Int(22)));
    assert_eq!(o.snapshot.local("I"), Some(&Value::Int(13)));
}

#[test]
fn goto_out_of_loop() {
    let src = "DEF p()\nDECL INT n\nn = 0\nLOOP\nn = n + 1\nIF n == 5 THEN\nGOTO done\nENDIF\nENDLOOP\ndone:\nn = n * 10\nEND\n";
    let o = run_with(
        src,
        RunOptions {
            record_jumps: true,
            ..RunOptions::default()
        },
    );
    assert_eq!(o.snapshot.local("N"), Some(&Value::Int(50)));
    assert_eq!(o.jumps.len(), 1);
    assert_eq!(o.jumps[0].before, o.jumps[0].after);
}

#[test]
fn index_zero_is_error() {
    let o = run("DEF p()\nDECL INT a[3]\na[0] = 1\nEND\n");
    assert_eq!(error_message(&o), "array index 0 outside 1..3");
    let names = events(&o);
    assert_eq!(names.last().unwrap().1, "program_end");
    assert_eq!(names[names.len() - 2].1, "error");
}

#[test]
fn integer_overflow_is_error() {
    let o = run("DEF p()\nDECL INT a\na = 2147483647\na = a + 1\nEND\n");
    assert_eq!(error_message(&o), "integer overflow");
}

#[test]
fn functions_and_out_params() {
    let src = "DEF p()\nDECL INT a, b\na = 3\nswap(a, b)\nb = b + sq(4)\nEND\n\
               DEF swap(x:IN, y:OUT)\nDECL INT x, y\ny = x * 2\nEND\n\
               DEFFCT INT sq(v:IN)\nDECL INT v\nRETURN v * v\nENDFCT\n";
    let o = run(src);
    assert_eq!(o.status, Status::Ok);
    assert_eq!(o.snapshot.local("B"), Some(&Value::Int(22)));
}

#[test]
fn recursion_depth_limit() {
    let src = "DEF p()\nr()\nEND\nDEF r()\nr()\nEND\n";
    let o = run(src);
    assert_eq!(error_message(&o), "call depth limit of 200 exceeded");
}

#[test]
fn halt_stops_program() {
    let o = run("DEF p()\n$OUT[4] = TRUE\nHALT\n$OUT[5] = TRUE\nEND\n");
    assert_eq!(o.status, Status::Halted);
    assert_eq!(o.snapshot.outputs, vec![4]);
    assert_eq!(o.exit_code(), 1);
}

#[test]
fn wait_for_input_advances_time() {
    let script = IoScript::new(vec![ScriptRecord {
        t_ms: 37,
        index: 5,
        value: true,
    }]);
    let o = run_with(
        "DEF p()\nWAIT FOR $IN[5]\n$OUT[1] = TRUE\nEND\n",
        RunOptions {
            script,
            ..RunOptions::default()
        },
    );
    let set = o
        .trace
        .iter()
        .find(|e| matches!(e.kind, EventKind::OutputSet { .. }))
        .unwrap();
    assert_eq!(set.t_ms, 37);
}

#[test]
fn interrupt_fires_on_edge_during_wait() {
    let src = "DEF p()\nDECL INT n\nINTERRUPT DECL 5 WHEN $IN[3] DO bump()\nINTERRUPT ON 5\nWAIT SEC 0.1\nEND\n\
               DEF bump()\n$OUT[9] = TRUE\nEND\n";
    let script = IoScript::new(vec![ScriptRecord {
        t_ms: 40,
        index: 3,
        value: true,
    }]);
    let o = run_with(
        src,
        RunOptions {
            script,
            ..RunOptions::default()
        },
    );
    assert_eq!(o.status, Status::Ok);
    let ev = events(&o);
    let fired = ev.iter().position(|e| e.1 == "interrupt_fired").unwrap();
    assert_eq!(ev[fired].0, 40);
    assert_eq!(ev[fired + 1].1, "output_set");
    assert_eq!(ev[fired + 2].1, "interrupt_done");
}

#[test]
fn switch_selects_case() {
    let src = "DEF p()\nDECL INT k, r\nk = 2\nSWITCH k\nCASE 1\nr = 10\nCASE 2, 3\nr = 20\nDEFAULT\nr = 30\nENDSWITCH\nEND\n";
    assert_eq!(run(src).snapshot.local("R"), Some(&Value::Int(20)));
}
