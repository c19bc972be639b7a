//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line
//! on stdout (past the test harness's capture) and the test fails if any
//! criterion does.

use std::collections::BTreeSet;
use std::io::Write;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use krlf_core::batch;
use krlf_core::bench;
use krlf_core::bytecode::{self, assemble, disassemble, Image, Listing};
use krlf_core::corpus;
use krlf_core::engine::{Outcome, RunOptions};
use krlf_core::fuzz::{self, run_both};
use krlf_core::gen;
use krlf_core::runtime::kinematics as kin;
use krlf_core::runtime::{
    BlendCriterion, BrakeState, EventKind, Frame, IoScript, MotionCommand, MotionKind, Path, RuntimeConfig,
    ScriptRecord, Status,
};
use krlf_core::semantics::check_source;

type Verdict = Result<String, String>;

fn script(records: &[(u64, u32, bool)]) -> IoScript {
    IoScript::new(
        records
            .iter()
            .map(|&(t_ms, index, value)| ScriptRecord { t_ms, index, value })
            .collect(),
    )
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn example_trace_ok(o: &Outcome) -> Result<(), String> {
    ensure(o.status == Status::Ok, || format!("status {:?}", o.status))?;
    let starts: Vec<(u64, u32, &str, Frame, [f64; 6])> = o
        .trace
        .iter()
        .filter_map(|e| match &e.kind {
            EventKind::MotionStart {
                motion,
                kind,
                frame,
                target,
                ..
            } => Some((e.t_ms, *motion, *kind, *frame, *target)),
            _ => None,
        })
        .collect();
    let expected: [(&str, Frame, [f64; 6]); 4] = [
        ("PTP", Frame::Axis, [0.0, -90.0, 90.0, 0.0, 0.0, 0.0]),
        ("LIN", Frame::Pos, [300.0, -100.0, 1500.0, 0.0, 90.0, 0.0]),
        ("LIN", Frame::Pos, [250.0, -100.0, 1400.0, 0.0, 90.0, 0.0]),
        ("PTP", Frame::Axis, [0.0, -90.0, 90.0, 0.0, 0.0, 0.0]),
    ];
    ensure(starts.len() == 4, || format!("{} motions", starts.len()))?;
    for (i, ((_, ordinal, kind, frame, target), (ek, ef, et))) in starts.iter().zip(&expected).enumerate() {
        ensure(*ordinal == i as u32 && kind == ek && frame == ef && target == et, || {
            format!("motion {i} is {kind} {frame:?} {target:?}")
        })?;
    }
    let blends: Vec<(u32, u32)> = o
        .trace
        .iter()
        .filter_map(|e| match e.kind {
            EventKind::BlendStart { from, to } => Some((from, to)),
            _ => None,
        })
        .collect();
    ensure(blends == [(2, 3)], || format!("blends {blends:?}"))?;
    // The trigger is written just before `LIN cpos`, the second motion.
    let out2: Vec<u64> = o
        .trace
        .iter()
        .filter(|e| matches!(e.kind, EventKind::OutputSet { index: 2, value: true }))
        .map(|e| e.t_ms)
        .collect();
    let lin_start = starts[1].0;
    ensure(out2 == [lin_start + 20], || format!("$OUT[2] set at {out2:?}, LIN started at {lin_start}"))?;
    Ok(())
}

fn fig2_end_to_end() -> Verdict {
    let started = Instant::now();
    let src = std::fs::read_to_string(corpus::example_path()).map_err(|e| e.to_string())?;
    let prog = check_source(&src).map_err(|d| format!("check failed: {d:?}"))?;
    let opts = RunOptions {
        script: script(&[(0, 1, true), (0, 2, true)]),
        ..RunOptions::default()
    };
    let (t, v) = run_both(&prog, &opts)?;
    example_trace_ok(&t).map_err(|e| format!("tree: {e}"))?;
    example_trace_ok(&v).map_err(|e| format!("vm: {e}"))?;
    let secs = started.elapsed().as_secs_f64();
    ensure(secs < 5.0, || format!("took {secs:.2} s"))?;
    Ok(format!("4 motions, blend 2->3, $OUT[2] at LIN start + 20 ms, {secs:.2} s"))
}

fn engine_equivalence() -> Verdict {
    let started = Instant::now();
    let mut jobs: Vec<(String, String, RunOptions)> = corpus::load(&corpus::programs_dir())
        .map_err(|e| e.to_string())?
        .into_iter()
        .map(|e| {
            let opts = RunOptions {
                script: e.script,
                ..RunOptions::default()
            };
            (e.name, e.source, opts)
        })
        .collect();
    let hand_written = jobs.len();
    ensure(hand_written >= 50, || format!("only {hand_written} corpus programs"))?;
    for seed in 0..500 {
        let g = gen::program(seed);
        let opts = g.options();
        jobs.push((format!("generated #{seed}"), g.source, opts));
    }
    let failures: Vec<String> = batch::map(&jobs, |(name, src, opts)| {
        let prog = match check_source(src) {
            Ok(p) => p,
            Err(d) => return Some(format!("{name}: rejected: {d:?}")),
        };
        let (t, v) = match run_both(&prog, opts) {
            Ok(pair) => pair,
            Err(e) => return Some(format!("{name}: {e}")),
        };
        if t.trace_jsonl() != v.trace_jsonl() {
            return Some(format!("{name}: traces differ"));
        }
        if t.snapshot.to_json() != v.snapshot.to_json() {
            return Some(format!("{name}: snapshots differ"));
        }
        None
    })
    .into_iter()
    .flatten()
    .collect();
    ensure(failures.is_empty(), || failures.join("; "))?;
    let secs = started.elapsed().as_secs_f64();
    ensure(secs < 120.0, || format!("took {secs:.1} s"))?;
    Ok(format!("{hand_written} hand-written + 500 generated programs identical, {secs:.1} s"))
}

fn performance_ordering() -> Verdict {
    let src = std::fs::read_to_string(corpus::compute_path()).map_err(|e| e.to_string())?;
    let prog = check_source(&src).map_err(|d| format!("{d:?}"))?;
    // The run must outlast a budget of ten million poll points, each of
    // which precedes at least one operation.
    let budget = 10_000_000;
    let opts = RunOptions {
        config: RuntimeConfig {
            step_budget: Some(budget),
            ..RuntimeConfig::default()
        },
        ..RunOptions::default()
    };
    let capped = bytecode::run(&bytecode::load(&prog), &opts).map_err(|e| e.to_string())?;
    ensure(matches!(&capped.status, Status::Failed(e) if e.message.contains("step budget")), || {
        format!("benchmark finished within {budget} statements: {:?}", capped.status)
    })?;
    let rep = bench::run(&prog, bench::DEFAULT_ITERS).map_err(|e| e.to_string())?;
    let detail = format!(
        "tree median {:.1} ms, vm median {:.1} ms, ratio {:.2}x over {} runs",
        rep.tree.median_ms, rep.vm.median_ms, rep.ratio, rep.iters
    );
    ensure(rep.ratio >= 2.0, || detail.clone())?;
    Ok(detail)
}

fn lin(ordinal: u32, pose: [f64; 6], blend: BlendCriterion) -> MotionCommand {
    MotionCommand {
        ordinal,
        kind: MotionKind::Lin,
        frame: Frame::Pos,
        target: pose,
        blend,
        vel_axis: [100; 6],
        vel_cp: 2.0,
        triggers: Vec::new(),
    }
}

fn blend_containment() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let point = |rng: &mut ChaCha8Rng| -> [f64; 6] {
        [
            rng.gen_range(-800.0..800.0),
            rng.gen_range(-800.0..800.0),
            rng.gen_range(600.0..1800.0),
            rng.gen_range(-20.0..20.0),
            rng.gen_range(70.0..110.0),
            rng.gen_range(-20.0..20.0),
        ]
    };
    let (mut corners, mut samples, mut worst) = (0, 0u64, f64::NEG_INFINITY);
    for case in 0..2000 {
        let (a, b, c) = (point(&mut rng), point(&mut rng), point(&mut rng));
        let radius: f64 = rng.gen_range(0.0..600.0);
        let start = kin::inverse(&a);
        let clamped = radius.min(kin::dist(&a, &b) / 2.0).min(kin::dist(&b, &c) / 2.0);

        let blended = Path::plan(&start, &[lin(0, b, BlendCriterion::Dis(radius)), lin(1, c, BlendCriterion::None)]);
        for k in &blended.corners {
            corners += 1;
            ensure(k.radius <= clamped + 1e-12, || format!("case {case}: radius {} not clamped", k.radius))?;
            for t in k.start..=k.end {
                let d = kin::dist(&kin::forward(&blended.position(t)), &b);
                samples += 1;
                worst = worst.max(d - k.radius);
                ensure(d <= k.radius + 1e-9, || format!("case {case} t={t}: {d} > r={}", k.radius))?;
            }
        }

        let exact = Path::plan(&start, &[lin(0, b, BlendCriterion::None), lin(1, c, BlendCriterion::None)]);
        let at = kin::forward(&exact.position(exact.motions[0].end));
        ensure(exact.corners.is_empty() && kin::dist(&at, &b) <= 1e-9, || {
            format!("case {case}: unblended path misses the corner by {}", kin::dist(&at, &b))
        })?;
    }
    ensure(corners >= 1500, || format!("only {corners} blended corners"))?;
    Ok(format!(
        "{corners} corners, {samples} in-blend samples, max excess over r {worst:.3e} mm"
    ))
}

fn interrupt_outcome_ok(o: &Outcome) -> Result<String, String> {
    ensure(o.status == Status::Ok, || format!("status {:?}", o.status))?;
    let mut stack = Vec::new();
    let mut order = Vec::new();
    let (mut engaged, mut released, mut start, mut end) = (None, None, None, None);
    for e in &o.trace {
        match e.kind {
            EventKind::InterruptFired { priority } => {
                stack.push(priority);
                order.push(format!("+{priority}"));
            }
            EventKind::InterruptDone { priority } => {
                ensure(stack.pop() == Some(priority), || format!("interrupt {priority} done out of order"))?;
                order.push(format!("-{priority}"));
            }
            EventKind::Brake { state: BrakeState::Engaged } => engaged = Some(e.t_ms),
            EventKind::Brake { state: BrakeState::Released } => released = Some(e.t_ms),
            EventKind::MotionStart { .. } => start = Some(e.t_ms),
            EventKind::MotionEnd { .. } => end = Some(e.t_ms),
            _ => {}
        }
    }
    ensure(stack.is_empty(), || "interrupt left running".into())?;
    ensure(order == ["+10", "+4", "-4", "-10"], || format!("sequence {order:?}"))?;
    let (Some(engaged), Some(released), Some(start), Some(end)) = (engaged, released, start, end) else {
        return Err("brake or motion events missing".into());
    };
    // A1 by 120 degrees at 100 % axis velocity (120 deg/s).
    let nominal = 1000;
    let paused = released - engaged;
    ensure(paused > 0 && start < engaged && released < end, || {
        format!("brake {engaged}..{released} not inside motion {start}..{end}")
    })?;
    ensure(end - start == nominal + paused, || {
        format!("duration {} != {nominal} + {paused}", end - start)
    })?;
    Ok(format!("nesting {order:?}, duration {} ms = {nominal} + paused {paused}", end - start))
}

fn interrupt_scenario() -> Verdict {
    let entry = corpus::load(&corpus::programs_dir())
        .map_err(|e| e.to_string())?
        .into_iter()
        .find(|e| e.name == "interrupt_scenario")
        .ok_or("interrupt_scenario missing from the corpus")?;
    let prog = check_source(&entry.source).map_err(|d| format!("{d:?}"))?;
    let opts = RunOptions {
        script: entry.script,
        ..RunOptions::default()
    };
    let (t, v) = run_both(&prog, &opts)?;
    let detail = interrupt_outcome_ok(&t).map_err(|e| format!("tree: {e}"))?;
    interrupt_outcome_ok(&v).map_err(|e| format!("vm: {e}"))?;
    ensure(t.trace == v.trace, || "engines disagree".into())?;
    Ok(detail)
}

fn type_rules() -> Verdict {
    let accepted = "DEF p()\nDECL REAL r\nr = 3\nEND\n";
    check_source(accepted).map_err(|d| format!("INT->REAL rejected: {d:?}"))?;
    // (source, line, column) of the one expected diagnostic.
    let rejected = [
        ("REAL->INT", "DEF p()\nDECL INT i\ni = 2.5\nEND\n", 3, 5),
        ("BOOL arithmetic", "DEF p()\nDECL INT i\ni = 1 + TRUE\nEND\n", 3, 5),
        ("INT condition in IF", "DEF p()\nDECL INT i\nIF i THEN\nENDIF\nEND\n", 3, 4),
        ("REAL condition in WHILE", "DEF p()\nWHILE 1.5\nENDWHILE\nEND\n", 2, 7),
        ("INT condition in UNTIL", "DEF p()\nDECL INT i\nREPEAT\nUNTIL i + 1\nEND\n", 4, 7),
    ];
    for (what, src, line, col) in rejected {
        match check_source(src) {
            Ok(_) => return Err(format!("{what} accepted")),
            Err(d) => {
                let at: Vec<(u32, u32)> = d.iter().map(|d| (d.span.line, d.span.col)).collect();
                ensure(at.contains(&(line, col)), || format!("{what}: diagnostics at {at:?}, wanted {line}:{col}"))?;
            }
        }
    }
    let rep = fuzz::type_fuzz(7, 1500);
    ensure(rep.type_errors.is_empty(), || format!("type errors at run time: {:?}", rep.type_errors))?;
    ensure(rep.disagreements.is_empty(), || format!("engines disagree: {:?}", rep.disagreements))?;
    ensure(rep.accepted >= 200, || format!("only {} mutants accepted", rep.accepted))?;
    Ok(format!(
        "5 rejections positioned; {} of {} fuzz mutants accepted, none raised a type error",
        rep.accepted, rep.mutants
    ))
}

fn goto_conservation() -> Verdict {
    let (mut jumps, mut programs, mut depths) = (0usize, 0, BTreeSet::new());
    let mut seed = 0;
    while jumps < 1000 || depths.len() < 4 {
        let g = gen::goto_program(seed);
        seed += 1;
        let prog = check_source(&g.source).map_err(|d| format!("seed {}: {d:?}", g.seed))?;
        let (t, v) = run_both(&prog, &g.options())?;
        ensure(t.status == Status::Ok && v.status == Status::Ok, || format!("seed {}: {:?}", g.seed, t.status))?;
        ensure(t.jumps == v.jumps, || format!("seed {}: jump records differ", g.seed))?;
        for j in &t.jumps {
            ensure(j.before == j.after, || format!("seed {}: depth {} -> {}", g.seed, j.before, j.after))?;
        }
        if !t.jumps.is_empty() {
            depths.insert(g.nesting);
        }
        jumps += t.jumps.len();
        programs += 1;
    }
    Ok(format!(
        "{jumps} jumps across {programs} programs, loop nesting {depths:?}, depth unchanged in both engines"
    ))
}

fn bytecode_round_trip() -> Verdict {
    let mut sources: Vec<String> = corpus::load(&corpus::programs_dir())
        .map_err(|e| e.to_string())?
        .into_iter()
        .map(|e| e.source)
        .collect();
    for p in [corpus::example_path(), corpus::compute_path()] {
        sources.push(std::fs::read_to_string(p).map_err(|e| e.to_string())?);
    }
    sources.extend((0..500).map(|s| gen::program(s).source));
    sources.extend((0..100).map(|s| gen::goto_program(s).source));
    let images: Vec<Image> = sources
        .iter()
        .map(|s| bytecode::build(&check_source(s).expect("corpus checks")))
        .collect();
    for (i, img) in images.iter().enumerate() {
        let text = disassemble(img).map_err(|e| e.to_string())?.to_string();
        let once = assemble(&Listing::parse(&text).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        let again = disassemble(&once).map_err(|e| e.to_string())?.to_string();
        let twice = assemble(&Listing::parse(&again).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        ensure(once.to_bytes() == img.to_bytes() && twice.to_bytes() == once.to_bytes(), || {
            format!("program {i} is not a fixpoint")
        })?;
    }
    let rep = fuzz::image_fuzz(&images, 99, 10);
    ensure(rep.escaped.is_empty(), || format!("verifier accepted: {:?}", rep.escaped))?;
    ensure(rep.violations.is_empty(), || format!("stack violations: {:?}", rep.violations))?;
    let invalid: usize = rep
        .kinds
        .iter()
        .filter(|(k, _)| **k != fuzz::MutantKind::RandomBytes)
        .map(|(_, s)| s.generated)
        .sum();
    let random = &rep.kinds[&fuzz::MutantKind::RandomBytes];
    Ok(format!(
        "{} images fixpoint; {invalid} invalid mutants {:.0}% rejected; {} of {} byte mutants accepted and ran clean",
        images.len(),
        rep.invalid_rejection_rate() * 100.0,
        random.generated - random.rejected,
        random.generated
    ))
}

#[test]
fn acceptance() {
    let criteria: [(&str, fn() -> Verdict); 8] = [
        ("example program end-to-end", fig2_end_to_end),
        ("engine equivalence", engine_equivalence),
        ("performance ordering", performance_ordering),
        ("blend containment", blend_containment),
        ("interrupt scenario", interrupt_scenario),
        ("type rules", type_rules),
        ("GOTO stack conservation", goto_conservation),
        ("bytecode round trip and verifier", bytecode_round_trip),
    ];
    let mut failed = Vec::new();
    for (name, check) in criteria {
        let line = match check() {
            Ok(detail) => format!("PASS {name}: {detail}"),
            Err(why) => {
                failed.push(name);
                format!("FAIL {name}: {why}")
            }
        };
        // Straight to stdout so the lines show without --nocapture.
        let mut out = std::io::stdout().lock();
        let _ = writeln!(out, "{line}");
        let _ = out.flush();
    }
    assert!(failed.is_empty(), "failed: {failed:?}");
}
