use std::collections::BTreeMap;

use krlf_core::bytecode;
use krlf_core::engine::Outcome;
use krlf_core::gen::{goto_program, program};
use krlf_core::runtime::{RtError, Status};
use krlf_core::semantics::check_source;
use krlf_core::tree;

fn strip(s: &Status) -> Status {
    match s {
        Status::Failed(e) => Status::Failed(RtError {
            location: None,
            ..e.clone()
        }),
        s => s.clone(),
    }
}

fn both(src: &str, opts: &krlf_core::engine::RunOptions) -> (Outcome, Outcome) {
    let prog = check_source(src).unwrap_or_else(|e| panic!("{e:?}\n{src}"));
    let t = tree::run(&prog, opts).expect("runnable");
    let v = bytecode::run(&bytecode::load(&prog), opts).expect("runnable");
    (t, v)
}

#[test]
fn generated_programs_agree() {
    let mut statuses: BTreeMap<String, usize> = BTreeMap::new();
    for seed in 0..300 {
        let g = program(seed);
        let (t, v) = both(&g.source, &g.options());
        assert_eq!(strip(&t.status), strip(&v.status), "seed {seed}\n{}", g.source);
        assert_eq!(t.trace, v.trace, "seed {seed}\n{}", g.source);
        assert_eq!(t.snapshot, v.snapshot, "seed {seed}\n{}", g.source);
        let key = match &t.status {
            Status::Failed(e) => e.message.split(' ').take(2).collect::<Vec<_>>().join(" "),
            s => format!("{s:?}"),
        };
        *statuses.entry(key).or_default() += 1;
    }
    eprintln!("{statuses:#?}");
    // Most programs should run to completion rather than trip an error.
    assert!(statuses.get("Ok").copied().unwrap_or(0) >= 150, "{statuses:#?}");
}

#[test]
fn goto_keeps_stack_depth() {
    let mut jumps = 0;
    let mut seed = 0;
    while jumps < 1000 {
        let g = goto_program(seed);
        let (t, v) = both(&g.source, &g.options());
        assert_eq!(t.status, Status::Ok, "seed {seed}\n{}", g.source);
        assert_eq!(t.jumps, v.jumps, "seed {seed}");
        for j in &t.jumps {
            assert_eq!(j.before, j.after, "seed {seed}");
        }
        jumps += t.jumps.len();
        seed += 1;
    }
}

#[test]
fn generated_programs_exercise_the_runtime() {
    let mut kinds: BTreeMap<String, usize> = BTreeMap::new();
    for seed in 0..300 {
        let g = program(seed);
        let prog = check_source(&g.source).unwrap();
        let o = tree::run(&prog, &g.options()).unwrap();
        let mut seen: Vec<String> = o
            .trace
            .iter()
            .map(|e| {
                let j = serde_json::to_value(e).unwrap();
                j["event"].as_str().unwrap_or("?").to_string()
            })
            .collect();
        seen.sort();
        seen.dedup();
        for k in seen {
            *kinds.entry(k).or_default() += 1;
        }
    }
    eprintln!("{kinds:#?}");
    for k in ["blend_start", "trigger_fired", "interrupt_fired", "brake", "input_read"] {
        assert!(kinds.get(k).copied().unwrap_or(0) >= 5, "{k}: {kinds:#?}");
    }
}
