//! Load-time lowering of verified code into the VM's internal form.
//!
//! Instructions are decoded once, jump offsets become instruction indexes,
//! and a few hot sequences the compiler emits for loops and integer
//! arithmetic are fused into single instructions. Fusion never spans a
//! jump target, so control can only enter a fused group at its start.
//! Each fused instruction does exactly what its sequence did, including
//! which errors it raises; errors are located at the sequence's faulting
//! instruction.

use std::collections::{HashMap, HashSet};

use super::asm::{decode_routine, Decoded};
use super::image::{Const, Image};
use super::opcode::Op;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(super) enum Cmp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl Cmp {
    fn of(op: Op) -> Option<Cmp> {
        Some(match op {
            Op::CEQ_I => Cmp::Eq,
            Op::CNE_I => Cmp::Ne,
            Op::CLT_I => Cmp::Lt,
            Op::CLE_I => Cmp::Le,
            Op::CGT_I => Cmp::Gt,
            Op::CGE_I => Cmp::Ge,
            _ => return None,
        })
    }

    #[inline(always)]
    pub(super) fn test(self, a: i32, b: i32) -> bool {
        match self {
            Cmp::Eq => a == b,
            Cmp::Ne => a != b,
            Cmp::Lt => a < b,
            Cmp::Le => a <= b,
            Cmp::Gt => a > b,
            Cmp::Ge => a >= b,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(super) enum Arith {
    Add,
    Sub,
    Mul,
    Div,
}

impl Arith {
    fn of(op: Op) -> Option<Arith> {
        Some(match op {
            Op::ADD_I => Arith::Add,
            Op::SUB_I => Arith::Sub,
            Op::MUL_I => Arith::Mul,
            Op::DIV_I => Arith::Div,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(super) enum Code {
    Base(Op),
    /// `LD s; LDC_I k; ADD_I; ST s`: slot `a` += `k`.
    AddSlot,
    /// `LDC_I k; <arith>`: top = top op `k`.
    ArithK(Arith),
    /// `LD a; LD b; <cmp>; JZ t`: jump unless `a cmp b`.
    JumpUnlessSS(Cmp),
    /// `LD a; LDC_I k; <cmp>; JZ t`: jump unless `a cmp k`.
    JumpUnlessSK(Cmp),
    /// `LD b; LD_IDX a`: push `a[b]`.
    LoadIndexS,
}

/// One internal instruction. `a` is the raw operand of base instructions
/// and the first slot of fused ones; `t` is the jump target index.
#[derive(Debug, Clone, Copy)]
pub(super) struct Ins {
    pub code: Code,
    pub a: u32,
    pub b: u32,
    pub k: i32,
    pub t: u32,
}

pub(super) struct Lowered {
    pub ins: Vec<Ins>,
    /// Byte offset reported for an error raised by each instruction.
    pub offsets: Vec<u32>,
    /// Index of each routine's first instruction.
    pub entries: Vec<usize>,
}

fn int_const(img: &Image, d: &Decoded) -> Option<i32> {
    match (d.op, img.consts.get(d.operand as usize)) {
        (Op::LDC_I, Some(Const::Int(k))) => Some(*k),
        _ => None,
    }
}

/// Try to fuse the group starting at `code[0]`: `(instruction, length,
/// faulting member)`.
fn fuse(img: &Image, code: &[Decoded]) -> Option<(Ins, usize, usize)> {
    let op = |i: usize| code.get(i).map(|d| d.op);
    let ins = |code, a: i64, b: i64, k: i32| Ins {
        code,
        a: a as u32,
        b: b as u32,
        k,
        t: 0,
    };
    let d0 = code.first()?;
    if d0.op == Op::LD {
        if let (Some(k), Some(Op::ADD_I), Some(Op::ST)) = (code.get(1).and_then(|d| int_const(img, d)), op(2), op(3)) {
            if code[3].operand == d0.operand {
                return Some((ins(Code::AddSlot, d0.operand, 0, k), 4, 2));
            }
        }
        if let (Some(c), Some(Op::JZ)) = (op(2).and_then(Cmp::of), op(3)) {
            if op(1) == Some(Op::LD) {
                return Some((ins(Code::JumpUnlessSS(c), d0.operand, code[1].operand, 0), 4, 2));
            }
            if let Some(k) = code.get(1).and_then(|d| int_const(img, d)) {
                return Some((ins(Code::JumpUnlessSK(c), d0.operand, 0, k), 4, 2));
            }
        }
        if op(1) == Some(Op::LD_IDX) {
            return Some((ins(Code::LoadIndexS, code[1].operand, d0.operand, 0), 2, 1));
        }
    }
    if let (Some(k), Some(a)) = (int_const(img, d0), op(1).and_then(Arith::of)) {
        return Some((ins(Code::ArithK(a), 0, 0, k), 2, 1));
    }
    None
}

/// Lower a verified image.
pub(super) fn lower(img: &Image) -> Lowered {
    let mut ins = Vec::new();
    let mut offsets = Vec::new();
    let mut entries = Vec::new();
    let mut index: HashMap<usize, usize> = HashMap::new();
    let mut fixups = Vec::new();
    for r in &img.routines {
        let code = decode_routine(img, r).expect("verified image decodes");
        let targets: HashSet<i64> = code
            .iter()
            .filter(|d| d.op.is_jump())
            .map(|d| d.jump_target())
            .collect();
        entries.push(ins.len());
        let mut i = 0;
        while i < code.len() {
            let fused = fuse(img, &code[i..]).filter(|(_, n, _)| {
                code[i + 1..i + n]
                    .iter()
                    .all(|d| !targets.contains(&(d.at as i64)))
            });
            let (x, n, fault) = fused.unwrap_or((
                Ins {
                    code: Code::Base(code[i].op),
                    a: code[i].operand as u32,
                    b: 0,
                    k: 0,
                    t: 0,
                },
                1,
                0,
            ));
            let last = &code[i + n - 1];
            if last.op.is_jump() {
                fixups.push((ins.len(), last.jump_target() as usize));
            }
            index.insert(code[i].at, ins.len());
            offsets.push(code[i + fault].at as u32);
            ins.push(x);
            i += n;
        }
    }
    for (at, target) in fixups {
        ins[at].t = index[&target] as u32;
    }
    Lowered {
        ins,
        offsets,
        entries,
    }
}
