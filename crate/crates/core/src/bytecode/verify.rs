//! Load-time verification.
//!
//! Beyond cross-reference checks, each routine is abstractly interpreted
//! over operand-stack depth: every reachable instruction gets exactly one
//! depth, jumps land on instruction boundaries inside the routine, no
//! instruction pops below the frame's base, and returns leave the stack
//! empty (or holding just the result). Code that passes cannot underflow or
//! overflow the operand stack at run time. Backward jumps must land on a
//! POLL or a WAIT FOR tick, so every loop passes a poll point.

use std::collections::HashMap;

use super::asm::{decode_routine, Decoded};
use super::image::*;
use super::opcode::{Op, Sys, GLOBAL_BIT};
use crate::frontend::ast::ParamMode;

/// Deepest operand stack a routine may use.
pub const MAX_STACK: usize = 1024;
/// Largest array an image may declare, in elements.
pub const MAX_ARRAY: u64 = 1 << 20;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("verification failed in {routine} at offset {offset}: {message}")]
pub struct VerifyError {
    pub routine: String,
    pub offset: usize,
    pub message: String,
}

/// Facts established by verification.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Verified {
    /// Maximum operand-stack depth per routine.
    pub max_stack: Vec<usize>,
}

fn check_type(img: &Image, t: &TypeDesc, below: usize) -> Result<u64, String> {
    Ok(match t {
        TypeDesc::Array(e, n) => {
            let inner = check_type(img, e, below)?;
            let total = inner.saturating_mul(*n as u64);
            if *n == 0 || total > MAX_ARRAY {
                return Err(format!("array of {n} elements is not allowed"));
            }
            total
        }
        TypeDesc::Struct(i) if (*i as usize) >= below => {
            return Err(format!("struct index {i} is undefined here"))
        }
        TypeDesc::Struct(i) => img.structs[*i as usize]
            .fields
            .iter()
            .map(|(_, t)| check_type(img, t, *i as usize))
            .sum::<Result<u64, String>>()?
            .max(1),
        _ => 1,
    })
}

pub fn verify(img: &Image) -> Result<Verified, VerifyError> {
    let header = |message: String| VerifyError {
        routine: "<image>".into(),
        offset: 0,
        message,
    };
    for (i, s) in img.structs.iter().enumerate() {
        for (_, t) in &s.fields {
            check_type(img, t, i).map_err(header)?;
        }
    }
    for c in &img.consts {
        match c {
            Const::Type(t) => {
                check_type(img, t, img.structs.len()).map_err(header)?;
            }
            Const::Str(s, n) if s.len() as u64 > *n as u64 || *n as u64 > MAX_ARRAY => {
                return Err(header(format!("string constant does not fit CHAR[{n}]")))
            }
            _ => {}
        }
    }
    for g in &img.globals {
        check_type(img, &g.ty, img.structs.len()).map_err(header)?;
    }
    for r in &img.routines {
        for s in &r.slots {
            check_type(img, &s.ty, img.structs.len()).map_err(header)?;
        }
        if r.params.len() > r.slots.len() {
            return Err(header(format!("routine {} has more parameters than slots", r.name)));
        }
    }
    for (c, a) in &img.interrupts {
        let (Some(cr), Some(ar)) = (img.routines.get(*c as usize), img.routines.get(*a as usize)) else {
            return Err(header("interrupt table names a missing routine".into()));
        };
        if !cr.func || !cr.params.is_empty() || ar.func || !ar.params.is_empty() {
            return Err(header("interrupt routines must take no parameters".into()));
        }
    }
    let max_stack = img
        .routines
        .iter()
        .map(|r| verify_routine(img, r))
        .collect::<Result<_, _>>()?;
    Ok(Verified { max_stack })
}

fn verify_routine(img: &Image, r: &RoutineEntry) -> Result<usize, VerifyError> {
    let fail = |offset: usize, message: String| VerifyError {
        routine: r.name.clone(),
        offset: offset.saturating_sub(r.entry as usize),
        message,
    };
    let code = decode_routine(img, r).map_err(|e| fail(e.offset, e.message))?;
    if code.is_empty() {
        return Err(fail(r.entry as usize, "empty routine".into()));
    }
    let index: HashMap<usize, usize> = code.iter().enumerate().map(|(i, d)| (d.at, i)).collect();

    // Operand checks.
    for d in &code {
        let operand_err = |m: String| Err(fail(d.at, m));
        match d.op {
            Op::LD | Op::ST | Op::LD_IDX | Op::ST_IDX => {
                let v = d.operand as u16;
                let (global, idx) = (v & GLOBAL_BIT != 0, (v & !GLOBAL_BIT) as usize);
                let limit = if global { img.globals.len() } else { r.slots.len() };
                if idx >= limit {
                    return operand_err(format!("slot {idx} out of range"));
                }
            }
            Op::LDC_I | Op::LDC_R | Op::LDC_S | Op::LDC_AGG => {
                let ok = matches!(
                    (d.op, img.consts.get(d.operand as usize)),
                    (Op::LDC_I, Some(Const::Int(_)))
                        | (Op::LDC_R, Some(Const::Real(_)))
                        | (Op::LDC_S, Some(Const::Str(..)))
                        | (Op::LDC_AGG, Some(Const::Type(_)))
                );
                if !ok {
                    return operand_err("constant index out of range or of the wrong kind".into());
                }
            }
            Op::CALL if d.operand as usize >= img.routines.len() => {
                return operand_err("routine index out of range".into());
            }
            Op::RET if r.func => return operand_err("RET in a function".into()),
            Op::RETV if !r.func => return operand_err("RETV in a procedure".into()),
            _ if d.op.is_jump() => {
                let t = d.jump_target();
                let Some(&ti) = (t >= 0).then(|| index.get(&(t as usize))).flatten() else {
                    return operand_err(format!("jump target {t} is not an instruction of this routine"));
                };
                // Every cycle crosses a backward jump; landing on a poll
                // point (or a wait, which advances time) keeps interrupts
                // and the step and time limits live in loops.
                let t_op = code[ti];
                let live = matches!(t_op.op, Op::POLL | Op::RET | Op::RETV | Op::NORET)
                    || (t_op.op == Op::SYS && t_op.operand == Sys::WAIT_FOR as i64);
                if t as usize <= d.at && !live {
                    return operand_err(format!("backward jump to {t} does not land on POLL"));
                }
            }
            _ => {}
        }
    }

    // Depth analysis.
    let mut depth: Vec<Option<usize>> = vec![None; code.len()];
    let mut work = vec![(0usize, 0usize)];
    let mut max = 0;
    while let Some((i, h)) = work.pop() {
        match depth[i] {
            Some(seen) if seen == h => continue,
            Some(seen) => {
                return Err(fail(
                    code[i].at,
                    format!("stack depth {h} disagrees with {seen} at a join"),
                ))
            }
            None => depth[i] = Some(h),
        }
        let d: &Decoded = &code[i];
        let (need, pop, push, falls, terminal) = effect(img, d);
        if h < need {
            return Err(fail(d.at, format!("{} needs {need} operands, found {h}", d.op)));
        }
        let after = h - pop + push;
        if after > MAX_STACK {
            return Err(fail(d.at, "operand stack overflow".into()));
        }
        max = max.max(after).max(h);
        match d.op {
            Op::RET | Op::RETV if h != need => {
                return Err(fail(d.at, format!("{} with {h} operands on the stack", d.op)));
            }
            _ => {}
        }
        if terminal {
            continue;
        }
        if d.op.is_jump() {
            work.push((index[&(d.jump_target() as usize)], after));
        }
        if falls {
            if i + 1 >= code.len() {
                return Err(fail(d.at, "control falls off the end of the routine".into()));
            }
            work.push((i + 1, after));
        }
    }
    Ok(max)
}

/// `(required, pops, pushes, falls through, terminal)`.
fn effect(img: &Image, d: &Decoded) -> (usize, usize, usize, bool, bool) {
    match d.op {
        Op::CALL => {
            let callee = &img.routines[d.operand as usize];
            let n = callee.params.len();
            let outs = callee.params.iter().filter(|m| **m == ParamMode::Out).count();
            (n, n, outs + callee.func as usize, true, false)
        }
        Op::SYS => {
            let (pop, push) = Sys::from_byte(d.operand as u8).expect("decoded").stack_effect();
            (pop, pop, push, true, false)
        }
        Op::RET => (0, 0, 0, false, true),
        Op::RETV => (1, 1, 0, false, true),
        Op::NORET => (0, 0, 0, false, true),
        Op::JMP | Op::JMPG => (0, 0, 0, false, false),
        op => {
            let (need, pop, push) = op.stack_effect(d.operand as u32);
            (need, pop, push, true, false)
        }
    }
}
