//! Fuzz drivers: engine differential, source mutation against the type
//! rules, and image mutation against the verifier.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::batch;
use crate::bytecode::asm::{decode_routine, Decoded};
use crate::bytecode::listing::{Arg, Line};
use crate::bytecode::opcode::Op;
use crate::bytecode::{self, assemble, disassemble, Image, Loaded};
use crate::engine::{Outcome, RunOptions};
use crate::gen;
use crate::runtime::{RtError, RuntimeConfig, Status};
use crate::semantics::{check_source, CheckedProgram};
use crate::tree;

/// Messages the VM raises when the operand stack is misused. Verified
/// images must never produce them.
pub const STACK_VIOLATIONS: &[&str] = &["operand stack underflow", "operand stack imbalance at return"];

fn without_location(s: &Status) -> Status {
    match s {
        Status::Failed(e) => Status::Failed(RtError {
            location: None,
            ..e.clone()
        }),
        s => s.clone(),
    }
}

/// Describe the first difference between two outcomes, if any. Error
/// locations are ignored since the engines name them differently.
pub fn compare(tree: &Outcome, vm: &Outcome) -> Option<String> {
    if without_location(&tree.status) != without_location(&vm.status) {
        return Some(format!("status: tree {:?}, vm {:?}", tree.status, vm.status));
    }
    if tree.trace != vm.trace {
        let i = tree.trace.iter().zip(&vm.trace).take_while(|(a, b)| a == b).count();
        return Some(format!(
            "trace differs at event {i}: tree {:?}, vm {:?}",
            tree.trace.get(i),
            vm.trace.get(i)
        ));
    }
    if tree.snapshot != vm.snapshot {
        return Some("final memory differs".into());
    }
    if tree.jumps != vm.jumps {
        return Some("jump records differ".into());
    }
    None
}

/// Run a checked program on both engines.
pub fn run_both(prog: &CheckedProgram, opts: &RunOptions) -> Result<(Outcome, Outcome), String> {
    let t = tree::run(prog, opts).map_err(|e| e.to_string())?;
    let loaded = Loaded::load(bytecode::build(prog)).map_err(|e| e.to_string())?;
    let v = bytecode::run(&loaded, opts).map_err(|e| e.to_string())?;
    Ok((t, v))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Mismatch {
    pub seed: u64,
    pub detail: String,
}

/// Differential check of the generated program for `seed`.
pub fn differential(seed: u64) -> Option<Mismatch> {
    let g = gen::program(seed);
    let fail = |detail: String| Some(Mismatch { seed, detail });
    let prog = match check_source(&g.source) {
        Ok(p) => p,
        Err(e) => return fail(format!("generated program rejected: {e:?}")),
    };
    match run_both(&prog, &g.options()) {
        Ok((t, v)) => compare(&t, &v).and_then(fail),
        Err(e) => fail(e),
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct TypeFuzzReport {
    pub mutants: usize,
    pub accepted: usize,
    pub rejected: usize,
    /// Accepted mutants whose run raised a type-mismatch error, by seed.
    pub type_errors: Vec<Mismatch>,
    /// Accepted mutants on which the engines disagreed.
    pub disagreements: Vec<Mismatch>,
}

const SWAPS: &[&str] = &[
    "1", "0", "2.5", "-1.5", "TRUE", "FALSE", "V1", "R1", "B1", "P1", "X1", "A", "A[1]", "G1",
    "$IN[2]", "$OUT[3]", "$POS_ACT", "$AXIS_ACT", "$VEL_CP", "\"Q\"", "P1.X", "+", "-", "*", "/",
    "AND", "OR", "NOT", "EXOR", "<", "==", "<>", ">=",
];

/// Replacements of roughly the same type as `token`, so a fair share of
/// mutants survive the checker.
fn similar(token: &str) -> Option<&'static [&'static str]> {
    const INT: &[&str] = &["0", "1", "7", "V2", "V3", "G1", "G2", "A[2]"];
    const REAL: &[&str] = &["0.5", "2.5", "R1", "R2", "V1", "P1.Y", "$VEL_CP"];
    const BOOL: &[&str] = &["TRUE", "FALSE", "B1", "B2", "$IN[4]", "$OUT[1]"];
    const ARITH: &[&str] = &["+", "-", "*", "/"];
    const CMP: &[&str] = &["<", ">", "=", "<>"];
    let first = token.chars().next()?;
    Some(match token {
        "+" | "-" | "*" | "/" => ARITH,
        "<" | ">" | "=" => CMP,
        "TRUE" | "FALSE" | "B1" | "B2" => BOOL,
        _ if token.starts_with("$IN") || token.starts_with("$OUT") => BOOL,
        _ if first.is_ascii_digit() && token.contains('.') => REAL,
        _ if token.starts_with('R') && token.len() == 2 => REAL,
        _ if first.is_ascii_digit() => INT,
        _ if matches!(first, 'V' | 'G' | 'K') && token[1..].chars().all(|c| c.is_ascii_digit()) => INT,
        _ => return None,
    })
}

/// Replace one token on a random statement line of `source`.
fn mutate_source(source: &str, rng: &mut ChaCha8Rng) -> String {
    let lines: Vec<&str> = source.lines().collect();
    let candidates: Vec<usize> = (0..lines.len())
        .filter(|&i| {
            let l = lines[i].trim_start();
            !(l.is_empty() || l.starts_with("DECL") || l.starts_with("DEF") || l.starts_with("END"))
        })
        .collect();
    let Some(&at) = candidates.choose(rng) else {
        return source.to_string();
    };
    let line = lines[at];
    // Token boundaries: runs of identifier characters, or single symbols.
    let mut spans = Vec::new();
    let bytes = line.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_alphanumeric() || c == '_' || c == '$' || c == '.' {
            let start = i;
            while i < bytes.len() && {
                let c = bytes[i] as char;
                c.is_ascii_alphanumeric() || c == '_' || c == '$' || c == '.'
            } {
                i += 1;
            }
            spans.push((start, i));
        } else {
            if !c.is_whitespace() && c != '(' && c != ')' && c != ',' {
                spans.push((i, i + 1));
            }
            i += 1;
        }
    }
    let Some(&(s, e)) = spans.choose(rng) else {
        return source.to_string();
    };
    let token = &line[s..e];
    let with = match similar(token) {
        Some(pool) if rng.gen_bool(0.6) => pool.choose(rng).expect("non-empty"),
        _ => SWAPS.choose(rng).expect("non-empty"),
    };
    let mut out = String::with_capacity(source.len() + 8);
    for (i, l) in lines.iter().enumerate() {
        if i == at {
            out.push_str(&l[..s]);
            out.push_str(with);
            out.push_str(&l[e..]);
        } else {
            out.push_str(l);
        }
        out.push('\n');
    }
    out
}

/// Mutate generated programs at the source level; every mutant that passes
/// `check` is run on both engines and must never fail with a type error.
pub fn type_fuzz(seed: u64, count: usize) -> TypeFuzzReport {
    let seeds: Vec<u64> = (0..count as u64).map(|i| seed.wrapping_mul(1_000_003).wrapping_add(i)).collect();
    let results = batch::map(&seeds, |&s| {
        let mut rng = ChaCha8Rng::seed_from_u64(s);
        let g = gen::program(rng.gen_range(0..10_000));
        let mut src = g.source.clone();
        for _ in 0..rng.gen_range(1..=2) {
            src = mutate_source(&src, &mut rng);
        }
        let Ok(prog) = check_source(&src) else {
            return (false, None, None);
        };
        let mut opts = g.options();
        // Mutated loop bounds can make programs long; a short budget keeps
        // the sweep fast without hiding type errors early in the run.
        opts.config.step_budget = Some(50_000);
        let (t, v) = match run_both(&prog, &opts) {
            Ok(pair) => pair,
            Err(e) => return (true, None, Some(Mismatch { seed: s, detail: e })),
        };
        let type_error = [&t.status, &v.status].iter().find_map(|st| match st {
            Status::Failed(e) if e.message.starts_with("type mismatch") => Some(Mismatch {
                seed: s,
                detail: e.to_string(),
            }),
            _ => None,
        });
        let differs = compare(&t, &v).map(|detail| Mismatch { seed: s, detail });
        (true, type_error, differs)
    });
    let mut report = TypeFuzzReport {
        mutants: count,
        ..TypeFuzzReport::default()
    };
    for (accepted, type_error, differs) in results {
        if accepted {
            report.accepted += 1;
        } else {
            report.rejected += 1;
        }
        report.type_errors.extend(type_error);
        report.disagreements.extend(differs);
    }
    report
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MutantKind {
    /// A jump retargeted outside its routine or into an instruction.
    OobJump,
    /// A reachable path whose stack depth no longer balances.
    Unbalanced,
    /// One to three random byte changes in the code section.
    RandomBytes,
}

pub struct Mutant {
    pub kind: MutantKind,
    pub image: Image,
    pub note: String,
}

/// Instruction indexes reachable from a routine's entry.
fn reachable(code: &[Decoded]) -> Vec<bool> {
    let index: BTreeMap<usize, usize> = code.iter().enumerate().map(|(i, d)| (d.at, i)).collect();
    let mut seen = vec![false; code.len()];
    let mut work = vec![0];
    while let Some(i) = work.pop() {
        if i >= code.len() || seen[i] {
            continue;
        }
        seen[i] = true;
        let d = code[i];
        if d.op.is_jump() {
            if let Some(&t) = usize::try_from(d.jump_target()).ok().and_then(|t| index.get(&t)) {
                work.push(t);
            }
        }
        if !matches!(d.op, Op::JMP | Op::JMPG | Op::RET | Op::RETV | Op::NORET) {
            work.push(i + 1);
        }
    }
    seen
}

/// Retarget a random jump to an offset that is not an instruction start of
/// its routine.
pub fn oob_jump(img: &Image, rng: &mut ChaCha8Rng) -> Option<Mutant> {
    let mut jumps = Vec::new();
    for r in &img.routines {
        let code = decode_routine(img, r).ok()?;
        let starts: Vec<usize> = code.iter().map(|d| d.at).collect();
        for d in code.iter().filter(|d| d.op.is_jump()) {
            jumps.push((*d, r.entry as usize, r.entry as usize + r.len as usize, starts.clone()));
        }
    }
    let (d, start, end, starts) = jumps.choose(rng)?.clone();
    let next = d.next() as i64;
    let (target, note) = match rng.gen_range(0..4) {
        0 => (start as i64 - rng.gen_range(1..1000), "before the routine"),
        1 => (end as i64 + rng.gen_range(0..1000), "past the routine"),
        2 => (-(rng.gen_range(1..=i32::MAX as i64)), "far negative"),
        _ => {
            let inside: Vec<usize> = (start..end).filter(|o| !starts.contains(o)).collect();
            match inside.choose(rng) {
                Some(&o) => (o as i64, "inside an instruction"),
                None => (end as i64, "past the routine"),
            }
        }
    };
    let rel = i32::try_from(target - next).ok()?;
    let mut image = img.clone();
    image.code[d.at + 1..d.at + 5].copy_from_slice(&rel.to_le_bytes());
    Some(Mutant {
        kind: MutantKind::OobJump,
        image,
        note: format!("{} at {} now targets {target} ({note})", d.op, d.at),
    })
}

/// Break the stack balance on a reachable path, through the listing so
/// every other jump stays correct.
pub fn unbalanced(img: &Image, rng: &mut ChaCha8Rng) -> Option<Mutant> {
    let mut listing = disassemble(img).ok()?;
    let ri = rng.gen_range(0..img.routines.len());
    let code = decode_routine(img, &img.routines[ri]).ok()?;
    let live = reachable(&code);
    // Line index of each instruction in the listing body.
    let body = &mut listing.routines[ri].body;
    let lines: Vec<usize> = body
        .iter()
        .enumerate()
        .filter(|(_, l)| matches!(l, Line::Instr(..)))
        .map(|(i, _)| i)
        .collect();
    let rets: Vec<usize> = (0..code.len())
        .filter(|&i| live[i] && matches!(code[i].op, Op::RET | Op::RETV))
        .collect();
    let drops: Vec<usize> = (1..code.len())
        .filter(|&i| {
            live[i - 1]
                && code[i].op == Op::RETV
                && matches!(code[i - 1].op, Op::LD | Op::LDC_I | Op::LDC_R | Op::LDC_B | Op::LDC_C)
        })
        .collect();
    let note = match rng.gen_range(0..3) {
        0 if !rets.is_empty() => {
            let i = *rets.choose(rng).expect("non-empty");
            body.insert(lines[i], Line::Instr(Op::LDC_I, Arg::Int(rng.gen_range(-9..9))));
            format!("extra push before {} at {}", code[i].op, code[i].at)
        }
        1 if !drops.is_empty() => {
            let i = *drops.choose(rng).expect("non-empty");
            body.remove(lines[i - 1]);
            format!("removed the result push at {}", code[i - 1].at)
        }
        _ => {
            body.insert(0, Line::Instr(Op::POP, Arg::None));
            "POP on entry".to_string()
        }
    };
    let image = assemble(&listing).ok()?;
    Some(Mutant {
        kind: MutantKind::Unbalanced,
        image,
        note: format!("{}: {note}", img.routines[ri].name),
    })
}

/// Overwrite or bit-flip one to three random code bytes.
pub fn random_bytes(img: &Image, rng: &mut ChaCha8Rng) -> Option<Mutant> {
    if img.code.is_empty() {
        return None;
    }
    let mut image = img.clone();
    let mut changes = Vec::new();
    for _ in 0..rng.gen_range(1..=3) {
        let at = rng.gen_range(0..image.code.len());
        let old = image.code[at];
        image.code[at] = if rng.gen_bool(0.5) {
            old ^ (1 << rng.gen_range(0..8))
        } else {
            rng.gen()
        };
        changes.push(format!("{at}: {old:#04x}->{:#04x}", image.code[at]));
    }
    Some(Mutant {
        kind: MutantKind::RandomBytes,
        image,
        note: changes.join(", "),
    })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct KindStats {
    pub generated: usize,
    pub rejected: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ImageFuzzReport {
    pub kinds: BTreeMap<MutantKind, KindStats>,
    /// Accepted mutants that were run.
    pub executed: usize,
    /// Invalid mutants the verifier let through.
    pub escaped: Vec<String>,
    /// Accepted mutants that misused the operand stack or panicked.
    pub violations: Vec<String>,
}

impl ImageFuzzReport {
    /// Share of deliberately invalid mutants the verifier rejected.
    pub fn invalid_rejection_rate(&self) -> f64 {
        let (mut generated, mut rejected) = (0, 0);
        for (k, s) in &self.kinds {
            if *k != MutantKind::RandomBytes {
                generated += s.generated;
                rejected += s.rejected;
            }
        }
        if generated == 0 {
            1.0
        } else {
            rejected as f64 / generated as f64
        }
    }
}

enum Verdict {
    Rejected,
    Ran(Option<String>),
}

fn try_mutant(m: &Mutant) -> Verdict {
    let outcome = catch_unwind(AssertUnwindSafe(|| {
        let loaded = match Loaded::load(m.image.clone()) {
            Ok(l) => l,
            Err(_) => return Verdict::Rejected,
        };
        let opts = RunOptions {
            config: RuntimeConfig {
                step_budget: Some(20_000),
                time_limit_ms: 60_000,
                ..RuntimeConfig::default()
            },
            ..RunOptions::default()
        };
        match bytecode::run(&loaded, &opts) {
            Ok(Outcome {
                status: Status::Failed(e),
                ..
            }) if STACK_VIOLATIONS.iter().any(|v| e.message.starts_with(v)) => {
                Verdict::Ran(Some(e.to_string()))
            }
            _ => Verdict::Ran(None),
        }
    }));
    outcome.unwrap_or_else(|p| {
        let msg = p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        Verdict::Ran(Some(format!("panic: {msg}")))
    })
}

/// Mutate each base image `per_image` times with every mutant kind and
/// check the verifier against the results.
pub fn image_fuzz(bases: &[Image], seed: u64, per_image: usize) -> ImageFuzzReport {
    let jobs: Vec<(usize, u64)> = (0..bases.len())
        .flat_map(|b| (0..per_image as u64).map(move |i| (b, i)))
        .collect();
    let results = batch::map(&jobs, |&(b, i)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ ((b as u64) << 32) ^ i);
        let mut out = Vec::new();
        for m in [
            oob_jump(&bases[b], &mut rng),
            unbalanced(&bases[b], &mut rng),
            random_bytes(&bases[b], &mut rng),
        ]
        .into_iter()
        .flatten()
        {
            let verdict = try_mutant(&m);
            out.push((m.kind, m.note, verdict));
        }
        out
    });
    let mut report = ImageFuzzReport::default();
    for (kind, note, verdict) in results.into_iter().flatten() {
        let stats = report.kinds.entry(kind).or_default();
        stats.generated += 1;
        match verdict {
            Verdict::Rejected => stats.rejected += 1,
            Verdict::Ran(problem) => {
                report.executed += 1;
                if kind != MutantKind::RandomBytes {
                    report.escaped.push(note.clone());
                }
                if let Some(p) = problem {
                    report.violations.push(format!("{note}: {p}"));
                }
            }
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mutated_sources_differ() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let src = gen::program(3).source;
        let changed = (0..20).filter(|_| mutate_source(&src, &mut rng) != src).count();
        assert!(changed >= 15);
    }

    #[test]
    fn small_image_fuzz() {
        let prog = check_source("DEF p()\nDECL INT i, s\nFOR i = 1 TO 3\ns = s + f(i)\nENDFOR\nEND\nDEFFCT INT f(x:IN)\nDECL INT x\nRETURN x * 2\nENDFCT\n").unwrap();
        let img = bytecode::build(&prog);
        let r = image_fuzz(&[img], 5, 50);
        assert!(r.escaped.is_empty(), "{:?}", r.escaped);
        assert!(r.violations.is_empty(), "{:?}", r.violations);
        assert_eq!(r.invalid_rejection_rate(), 1.0);
        assert!(r.kinds[&MutantKind::OobJump].generated > 0);
        assert!(r.kinds[&MutantKind::Unbalanced].generated > 0);
    }
}
