//! Stack virtual machine.
//!
//! Calls between KRL routines stay inside one dispatch loop; the host
//! stack only grows when the runtime calls back in to evaluate an interrupt
//! condition or run an interrupt routine, which re-enters [`Vm::call`] on
//! top of the current frame.

use super::fuse::{lower, Arith, Code, Ins, Lowered};
use super::image::{Const, Image, TypeContext};
use super::opcode::{Op, Sys, GLOBAL_BIT};
use super::verify::{verify, VerifyError};
use crate::engine::{JumpRecord, Outcome, RunOptions, SetupError, Snapshot, MAX_CALL_DEPTH};
use crate::frontend::ast::{Blend, ParamMode};
use crate::runtime::{
    Executor, FlushReason, MotionKind, MotionParams, RtError, RtResult, Runtime,
};
use crate::semantics::{sysvar_default, SlotInfo};
use crate::tree::{bounds, depth_exceeded, div_zero, overflow, real_op};
use crate::value::Value;

/// A verified image with its constants and frame templates materialized.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub image: Image,
    ins: Vec<Ins>,
    /// Byte offset of each instruction, for error locations.
    offsets: Vec<u32>,
    /// Index of each routine's first instruction.
    entries: Vec<usize>,
    pool: Vec<Value>,
    /// Zeroed frame per routine.
    templates: Vec<Vec<Value>>,
    /// Slots of OUT parameters per routine, in parameter order.
    outs: Vec<Vec<usize>>,
    globals: Vec<SlotInfo>,
    locals: Vec<Vec<SlotInfo>>,
}

impl Loaded {
    pub fn load(image: Image) -> Result<Loaded, VerifyError> {
        verify(&image)?;
        let Lowered {
            ins,
            offsets,
            entries,
        } = lower(&image);
        let types = TypeContext::new(&image);
        let pool = image
            .consts
            .iter()
            .map(|c| match c {
                Const::Int(i) => Value::Int(*i),
                Const::Real(r) => Value::Real(*r),
                Const::Str(s, n) => Value::char_array(s, *n as usize),
                Const::Type(t) => types.zero(t),
            })
            .collect();
        let infos = |slots: &[super::image::SlotEntry]| -> Vec<SlotInfo> {
            slots
                .iter()
                .map(|s| SlotInfo {
                    name: s.name.clone(),
                    ty: types.krl_type(&s.ty),
                    hidden: s.hidden,
                })
                .collect()
        };
        let globals = infos(&image.globals);
        let locals: Vec<Vec<SlotInfo>> = image.routines.iter().map(|r| infos(&r.slots)).collect();
        let templates = locals
            .iter()
            .map(|slots| slots.iter().map(|s| Value::zero(&s.ty)).collect())
            .collect();
        let outs = image
            .routines
            .iter()
            .map(|r| {
                r.params
                    .iter()
                    .enumerate()
                    .filter(|(_, m)| **m == ParamMode::Out)
                    .map(|(i, _)| i)
                    .collect()
            })
            .collect();
        Ok(Loaded {
            image,
            ins,
            offsets,
            entries,
            pool,
            templates,
            outs,
            globals,
            locals,
        })
    }

    fn entry(&self, entry: Option<&str>) -> Result<usize, SetupError> {
        let idx = match entry {
            Some(name) => {
                let upper = name.to_ascii_uppercase();
                self.image
                    .routine_index(&upper)
                    .ok_or(SetupError::UnknownEntry(upper))?
            }
            None if self.image.routines.is_empty() => return Err(SetupError::Empty),
            None => 0,
        };
        let r = &self.image.routines[idx];
        if !r.params.is_empty() {
            return Err(SetupError::EntryHasParams(r.name.clone()));
        }
        Ok(idx)
    }
}

#[derive(Debug, Clone, Copy)]
struct Frame {
    routine: usize,
    /// Caller's resume point.
    ret_pc: usize,
    base: usize,
    sbase: usize,
    /// Keep the locals when the frame returns (the entry routine).
    keep: bool,
}

/// Registers of the running frame.
#[derive(Debug, Clone, Copy)]
struct Regs {
    pc: usize,
    routine: usize,
    base: usize,
    sbase: usize,
}

pub struct Vm<'l> {
    prog: &'l Loaded,
    ins: &'l [Ins],
    globals: Vec<Value>,
    locals: Vec<Value>,
    stack: Vec<Value>,
    frames: Vec<Frame>,
    record_jumps: bool,
    jumps: Vec<JumpRecord>,
}

/// Run `prog` on the VM.
pub fn run(prog: &Loaded, opts: &RunOptions) -> Result<Outcome, SetupError> {
    let entry = prog.entry(opts.entry.as_deref())?;
    let mut vm = Vm::new(prog, opts);
    let mut rt = Runtime::new(opts.script.clone(), opts.config.clone());
    let result = vm.call(&mut rt, entry, true, true);
    let status = rt.finish(&mut vm, result);
    let n = prog.locals[entry].len().min(vm.locals.len());
    let snapshot = Snapshot::capture(
        &prog.globals,
        &vm.globals,
        &prog.locals[entry],
        &vm.locals[..n],
        rt.outputs(),
    );
    Ok(Outcome {
        status,
        trace: rt.into_trace(),
        snapshot,
        jumps: vm.jumps,
    })
}

/// Errors inside the dispatch loop are boxed to keep results small.
type VmResult<T> = Result<T, Box<RtError>>;

#[cold]
fn underflow() -> RtError {
    RtError::new("operand stack underflow")
}

#[cold]
fn mismatch(expected: &str, found: &Value) -> RtError {
    RtError::new(format!(
        "type mismatch: expected {expected}, found {}",
        found.type_name()
    ))
}

impl<'l> Vm<'l> {
    pub fn new(prog: &'l Loaded, opts: &RunOptions) -> Self {
        let globals = prog
            .globals
            .iter()
            .map(|g| sysvar_default(&g.name, opts.advance).unwrap_or_else(|| Value::zero(&g.ty)))
            .collect();
        Vm {
            prog,
            ins: &prog.ins,
            globals,
            locals: Vec::new(),
            stack: Vec::with_capacity(64),
            frames: Vec::new(),
            record_jumps: opts.record_jumps,
            jumps: Vec::new(),
        }
    }

    /// Call `routine` with its arguments already on the operand stack and
    /// run until it returns; results are left on the stack.
    fn call(&mut self, rt: &mut Runtime, routine: usize, keep: bool, check_depth: bool) -> RtResult<()> {
        if check_depth && self.frames.len() >= MAX_CALL_DEPTH {
            return Err(depth_exceeded());
        }
        let stop = self.frames.len();
        let regs = self.push_frame(routine, 0, keep)?;
        self.run(rt, regs, stop)
    }

    fn push_frame(&mut self, routine: usize, ret_pc: usize, keep: bool) -> RtResult<Regs> {
        let r = &self.prog.image.routines[routine];
        let n = r.params.len();
        if self.stack.len() < n + self.frames.last().map_or(0, |f| f.sbase) {
            return Err(underflow());
        }
        let base = self.locals.len();
        self.locals.extend_from_slice(&self.prog.templates[routine]);
        let args = self.stack.len() - n;
        for (i, v) in self.stack.drain(args..).enumerate() {
            self.locals[base + i] = v;
        }
        let sbase = self.stack.len();
        self.frames.push(Frame {
            routine,
            ret_pc,
            base,
            sbase,
            keep,
        });
        Ok(Regs {
            pc: self.prog.entries[routine],
            routine,
            base,
            sbase,
        })
    }

    fn run(&mut self, rt: &mut Runtime, mut regs: Regs, stop: usize) -> RtResult<()> {
        loop {
            let at = regs.pc;
            match self.step(rt, &mut regs, stop) {
                Ok(false) => {}
                Ok(true) => return Ok(()),
                Err(e) => {
                    let r = &self.prog.image.routines[regs.routine];
                    let offset = self.prog.offsets[at] - r.entry;
                    return Err(e.at(|| format!("{}+{offset}", r.name)));
                }
            }
        }
    }

    #[inline(always)]
    fn pop(&mut self, regs: &Regs) -> VmResult<Value> {
        if self.stack.len() <= regs.sbase {
            return Err(underflow().into());
        }
        Ok(self.stack.pop().expect("checked depth"))
    }

    // Scalar pops skip `Value`'s out-of-line drop glue: the popped value
    // is known to own nothing, so forgetting it is free and leak-free.
    #[inline(always)]
    fn pop_int(&mut self, regs: &Regs) -> VmResult<i32> {
        let v = self.pop(regs)?;
        if let Value::Int(i) = v {
            std::mem::forget(v);
            Ok(i)
        } else {
            Err(mismatch("INT", &v).into())
        }
    }

    #[inline(always)]
    fn pop_real(&mut self, regs: &Regs) -> VmResult<f64> {
        let v = self.pop(regs)?;
        if let Value::Real(r) = v {
            std::mem::forget(v);
            Ok(r)
        } else {
            Err(mismatch("REAL", &v).into())
        }
    }

    #[inline(always)]
    fn pop_bool(&mut self, regs: &Regs) -> VmResult<bool> {
        let v = self.pop(regs)?;
        if let Value::Bool(b) = v {
            std::mem::forget(v);
            Ok(b)
        } else {
            Err(mismatch("BOOL", &v).into())
        }
    }

    #[inline(always)]
    fn pop_char(&mut self, regs: &Regs) -> VmResult<u8> {
        let v = self.pop(regs)?;
        if let Value::Char(c) = v {
            std::mem::forget(v);
            Ok(c)
        } else {
            Err(mismatch("CHAR", &v).into())
        }
    }

    #[inline]
    fn slot(&mut self, regs: &Regs, operand: u16) -> &mut Value {
        if operand & GLOBAL_BIT != 0 {
            &mut self.globals[(operand & !GLOBAL_BIT) as usize]
        } else {
            &mut self.locals[regs.base + operand as usize]
        }
    }

    /// Read an INT slot as the fused sequence `LD s; ...` would consume it.
    #[inline(always)]
    fn int_slot(&mut self, regs: &Regs, s: u16) -> VmResult<i32> {
        match self.slot(regs, s) {
            Value::Int(i) => Ok(*i),
            v => Err(mismatch("INT", v).into()),
        }
    }

    /// Execute one instruction; true once the frame at depth `stop` returned.
    #[inline(always)]
    fn step(&mut self, rt: &mut Runtime, regs: &mut Regs, stop: usize) -> VmResult<bool> {
        let ins = self.ins[regs.pc];
        let arg = ins.a;
        regs.pc += 1;
        macro_rules! int2 {
            ($f:expr) => {{
                let b = self.pop_int(regs)?;
                let a = self.pop_int(regs)?;
                self.stack.push($f(a, b)?);
            }};
        }
        macro_rules! real2 {
            ($f:expr) => {{
                let b = self.pop_real(regs)?;
                let a = self.pop_real(regs)?;
                self.stack.push($f(a, b)?);
            }};
        }
        macro_rules! cmp {
            ($pop:ident, $f:expr) => {{
                let b = self.$pop(regs)?;
                let a = self.$pop(regs)?;
                self.stack.push(Value::Bool($f(&a, &b)));
            }};
        }
        match ins.code {
            Code::Base(Op::NOP) => {}
            Code::AddSlot => match self.slot(regs, arg as u16) {
                Value::Int(v) => *v = v.checked_add(ins.k).ok_or_else(overflow)?,
                v => return Err(mismatch("INT", v).into()),
            },
            Code::ArithK(op) => {
                let a = self.pop_int(regs)?;
                let k = ins.k;
                let r = match op {
                    Arith::Add => a.checked_add(k),
                    Arith::Sub => a.checked_sub(k),
                    Arith::Mul => a.checked_mul(k),
                    Arith::Div if k == 0 => return Err(div_zero().into()),
                    Arith::Div => a.checked_div(k),
                };
                self.stack.push(Value::Int(r.ok_or_else(overflow)?));
            }
            Code::JumpUnlessSS(c) => {
                // The comparison pops its right operand first.
                let b = self.int_slot(regs, ins.b as u16)?;
                let a = self.int_slot(regs, arg as u16)?;
                if !c.test(a, b) {
                    regs.pc = ins.t as usize;
                }
            }
            Code::JumpUnlessSK(c) => {
                if !c.test(self.int_slot(regs, arg as u16)?, ins.k) {
                    regs.pc = ins.t as usize;
                }
            }
            Code::LoadIndexS => {
                let i = self.int_slot(regs, ins.b as u16)?;
                let v = match self.slot(regs, arg as u16) {
                    Value::Array(items) => {
                        if i < 1 || i as usize > items.len() {
                            return Err(bounds(i, items.len()).into());
                        }
                        match &items[i as usize - 1] {
                            Value::Int(x) => Value::Int(*x),
                            v => v.clone(),
                        }
                    }
                    v => return Err(mismatch("array", v).into()),
                };
                self.stack.push(v);
            }
            Code::Base(Op::LDC_I) | Code::Base(Op::LDC_R) | Code::Base(Op::LDC_S) | Code::Base(Op::LDC_AGG) => {
                let c = arg as usize;
                self.stack.push(self.prog.pool[c].clone());
            }
            Code::Base(Op::LDC_B) => self.stack.push(Value::Bool(arg as u8 != 0)),
            Code::Base(Op::LDC_C) => self.stack.push(Value::Char(arg as u8)),
            Code::Base(Op::LD) => {
                let v = match self.slot(regs, arg as u16) {
                    Value::Int(i) => Value::Int(*i),
                    Value::Real(r) => Value::Real(*r),
                    v => v.clone(),
                };
                self.stack.push(v);
            }
            Code::Base(Op::ST) => {
                let v = self.pop(regs)?;
                let dst = self.slot(regs, arg as u16);
                match (&mut *dst, &v) {
                    (Value::Int(d), Value::Int(x)) => *d = *x,
                    (Value::Real(d), Value::Real(x)) => *d = *x,
                    _ => {
                        *dst = v;
                        return Ok(false);
                    }
                }
                std::mem::forget(v);
            }
            Code::Base(Op::LD_IDX) => {
                let s = arg as u16;
                let i = self.pop_int(regs)?;
                let v = match self.slot(regs, s) {
                    Value::Array(items) => {
                        if i < 1 || i as usize > items.len() {
                            return Err(bounds(i, items.len()).into());
                        }
                        items[i as usize - 1].clone()
                    }
                    v => return Err(mismatch("array", v).into()),
                };
                self.stack.push(v);
            }
            Code::Base(Op::ST_IDX) => {
                let s = arg as u16;
                let i = self.pop_int(regs)?;
                let v = self.pop(regs)?;
                match self.slot(regs, s) {
                    Value::Array(items) => {
                        if i < 1 || i as usize > items.len() {
                            return Err(bounds(i, items.len()).into());
                        }
                        items[i as usize - 1] = v;
                    }
                    v => return Err(mismatch("array", v).into()),
                }
            }
            Code::Base(Op::IDX) => {
                let i = self.pop_int(regs)?;
                match self.pop(regs)? {
                    Value::Array(mut items) => {
                        if i < 1 || i as usize > items.len() {
                            return Err(bounds(i, items.len()).into());
                        }
                        self.stack.push(items.swap_remove(i as usize - 1));
                    }
                    v => return Err(mismatch("array", &v).into()),
                }
            }
            Code::Base(Op::LD_FLD) => {
                let f = arg as usize;
                match self.pop(regs)? {
                    Value::Struct(_, mut vals) if f < vals.len() => {
                        self.stack.push(vals.swap_remove(f))
                    }
                    v => return Err(mismatch("struct", &v).into()),
                }
            }
            Code::Base(Op::SET_FLD) => {
                let f = arg as usize;
                let v = self.pop(regs)?;
                if self.stack.len() <= regs.sbase {
                    return Err(underflow().into());
                }
                match self.stack.last_mut().expect("checked depth") {
                    Value::Struct(_, vals) if f < vals.len() => vals[f] = v,
                    s => return Err(mismatch("struct", s).into()),
                }
            }
            Code::Base(Op::DUP) => {
                let v = self.pop(regs)?;
                self.stack.push(v.clone());
                self.stack.push(v);
            }
            Code::Base(Op::SWAP) => {
                let b = self.pop(regs)?;
                let a = self.pop(regs)?;
                self.stack.push(b);
                self.stack.push(a);
            }
            Code::Base(Op::PICK) => {
                let n = arg as usize;
                if self.stack.len() <= regs.sbase + n {
                    return Err(underflow().into());
                }
                let v = self.stack[self.stack.len() - 1 - n].clone();
                self.stack.push(v);
            }
            Code::Base(Op::POP) => {
                self.pop(regs)?;
            }
            Code::Base(Op::ADD_I) => int2!(|a: i32, b: i32| a.checked_add(b).map(Value::Int).ok_or_else(overflow)),
            Code::Base(Op::SUB_I) => int2!(|a: i32, b: i32| a.checked_sub(b).map(Value::Int).ok_or_else(overflow)),
            Code::Base(Op::MUL_I) => int2!(|a: i32, b: i32| a.checked_mul(b).map(Value::Int).ok_or_else(overflow)),
            Code::Base(Op::DIV_I) => int2!(|a: i32, b: i32| {
                if b == 0 {
                    Err(div_zero())
                } else {
                    a.checked_div(b).map(Value::Int).ok_or_else(overflow)
                }
            }),
            Code::Base(Op::NEG_I) => {
                let a = self.pop_int(regs)?;
                self.stack.push(Value::Int(a.checked_neg().ok_or_else(overflow)?));
            }
            Code::Base(Op::ADD_R) => real2!(|a, b| real_op(crate::frontend::ast::BinOp::Add, a, b)),
            Code::Base(Op::SUB_R) => real2!(|a, b| real_op(crate::frontend::ast::BinOp::Sub, a, b)),
            Code::Base(Op::MUL_R) => real2!(|a, b| real_op(crate::frontend::ast::BinOp::Mul, a, b)),
            Code::Base(Op::DIV_R) => real2!(|a, b| real_op(crate::frontend::ast::BinOp::Div, a, b)),
            Code::Base(Op::NEG_R) => {
                let a = self.pop_real(regs)?;
                self.stack.push(Value::Real(-a));
            }
            Code::Base(Op::I2R) => {
                let a = self.pop_int(regs)?;
                self.stack.push(Value::Real(a as f64));
            }
            Code::Base(Op::NOT) => {
                let a = self.pop_bool(regs)?;
                self.stack.push(Value::Bool(!a));
            }
            Code::Base(Op::AND) => cmp!(pop_bool, |a: &bool, b: &bool| *a && *b),
            Code::Base(Op::OR) => cmp!(pop_bool, |a: &bool, b: &bool| *a || *b),
            Code::Base(Op::EXOR) => cmp!(pop_bool, |a: &bool, b: &bool| a != b),
            Code::Base(Op::CEQ_I) => cmp!(pop_int, |a: &i32, b: &i32| a == b),
            Code::Base(Op::CNE_I) => cmp!(pop_int, |a: &i32, b: &i32| a != b),
            Code::Base(Op::CLT_I) => cmp!(pop_int, |a: &i32, b: &i32| a < b),
            Code::Base(Op::CLE_I) => cmp!(pop_int, |a: &i32, b: &i32| a <= b),
            Code::Base(Op::CGT_I) => cmp!(pop_int, |a: &i32, b: &i32| a > b),
            Code::Base(Op::CGE_I) => cmp!(pop_int, |a: &i32, b: &i32| a >= b),
            Code::Base(Op::CEQ_R) => cmp!(pop_real, |a: &f64, b: &f64| a == b),
            Code::Base(Op::CNE_R) => cmp!(pop_real, |a: &f64, b: &f64| a != b),
            Code::Base(Op::CLT_R) => cmp!(pop_real, |a: &f64, b: &f64| a < b),
            Code::Base(Op::CLE_R) => cmp!(pop_real, |a: &f64, b: &f64| a <= b),
            Code::Base(Op::CGT_R) => cmp!(pop_real, |a: &f64, b: &f64| a > b),
            Code::Base(Op::CGE_R) => cmp!(pop_real, |a: &f64, b: &f64| a >= b),
            Code::Base(Op::CEQ_C) => cmp!(pop_char, |a: &u8, b: &u8| a == b),
            Code::Base(Op::CNE_C) => cmp!(pop_char, |a: &u8, b: &u8| a != b),
            Code::Base(Op::CLT_C) => cmp!(pop_char, |a: &u8, b: &u8| a < b),
            Code::Base(Op::CLE_C) => cmp!(pop_char, |a: &u8, b: &u8| a <= b),
            Code::Base(Op::CGT_C) => cmp!(pop_char, |a: &u8, b: &u8| a > b),
            Code::Base(Op::CGE_C) => cmp!(pop_char, |a: &u8, b: &u8| a >= b),
            Code::Base(Op::CEQ_B) => cmp!(pop_bool, |a: &bool, b: &bool| a == b),
            Code::Base(Op::CNE_B) => cmp!(pop_bool, |a: &bool, b: &bool| a != b),
            Code::Base(Op::JMP) => regs.pc = ins.t as usize,
            Code::Base(Op::JZ) => {
                if !self.pop_bool(regs)? {
                    regs.pc = ins.t as usize;
                }
            }
            Code::Base(Op::JMPG) => {
                let before = self.frames.len();
                regs.pc = ins.t as usize;
                if self.record_jumps {
                    self.jumps.push(JumpRecord {
                        before,
                        after: self.frames.len(),
                    });
                }
            }
            Code::Base(Op::CALL) => {
                if self.frames.len() >= MAX_CALL_DEPTH {
                    return Err(depth_exceeded().into());
                }
                let target = arg as usize;
                *regs = self.push_frame(target, regs.pc, false)?;
            }
            Code::Base(Op::RET) | Code::Base(Op::RETV) => {
                let result = if ins.code == Code::Base(Op::RETV) {
                    Some(self.pop(regs)?)
                } else {
                    None
                };
                if self.stack.len() != regs.sbase {
                    return Err(RtError::new("operand stack imbalance at return").into());
                }
                let frame = self.frames.pop().expect("running frame");
                self.stack.extend(result);
                for &p in &self.prog.outs[frame.routine] {
                    let v = std::mem::replace(&mut self.locals[frame.base + p], Value::Bool(false));
                    self.stack.push(v);
                }
                if !frame.keep {
                    self.locals.truncate(frame.base);
                }
                if self.frames.len() == stop {
                    return Ok(true);
                }
                let top = *self.frames.last().expect("caller frame");
                *regs = Regs {
                    pc: frame.ret_pc,
                    routine: top.routine,
                    base: top.base,
                    sbase: top.sbase,
                };
            }
            Code::Base(Op::NORET) => {
                let name = &self.prog.image.routines[regs.routine].name;
                return Err(RtError::new(format!("function {name} ended without RETURN")).into());
            }
            Code::Base(Op::POLL) => rt.poll(self)?,
            Code::Base(Op::CHKSTEP) => match self.stack.last() {
                Some(Value::Int(0)) if self.stack.len() > regs.sbase => {
                    return Err(RtError::new("FOR step must not be zero").into())
                }
                Some(Value::Int(_)) if self.stack.len() > regs.sbase => {}
                Some(v) if self.stack.len() > regs.sbase => return Err(mismatch("INT", v).into()),
                _ => return Err(underflow().into()),
            },
            Code::Base(Op::SYS) => {
                let sys = Sys::from_byte(arg as u8).ok_or_else(|| RtError::new("invalid system call"))?;
                self.sys(rt, regs, sys)?;
            }
        }
        Ok(false)
    }

    fn sys(&mut self, rt: &mut Runtime, regs: &Regs, sys: Sys) -> VmResult<()> {
        match sys {
            Sys::MOTION_PTP | Sys::MOTION_LIN => {
                let blend = match self.pop_int(regs)? {
                    0 => Blend::None,
                    1 => Blend::CDis,
                    2 => Blend::CPtp,
                    b => return Err(RtError::new(format!("invalid blend mode {b}")).into()),
                };
                let target = self.pop(regs)?;
                let params = MotionParams::from_globals(&self.globals)?;
                let kind = if sys == Sys::MOTION_PTP {
                    MotionKind::Ptp
                } else {
                    MotionKind::Lin
                };
                rt.submit_motion(self, kind, &target, blend, params)?;
            }
            Sys::SET_OUT => {
                let i = self.pop_int(regs)?;
                let v = self.pop_bool(regs)?;
                rt.set_output(self, i, v)?;
            }
            Sys::GET_IN | Sys::PEEK_IN | Sys::GET_OUT | Sys::PEEK_OUT => {
                let i = self.pop_int(regs)?;
                let v = match sys {
                    Sys::GET_IN => rt.read_input(self, i)?,
                    Sys::PEEK_IN => rt.peek_input(i)?,
                    Sys::GET_OUT => rt.read_output(self, i)?,
                    _ => rt.peek_output(i)?,
                };
                self.stack.push(Value::Bool(v));
            }
            Sys::TRIGGER_ARM => {
                let index = self.pop_int(regs)?;
                let value = self.pop_bool(regs)?;
                let delay = self.pop_int(regs)?;
                let distance = self.pop_int(regs)?;
                rt.arm_trigger(distance, delay, index, value)?;
            }
            Sys::INT_DECL => {
                let decl = self.pop_int(regs)?;
                let priority = self.pop_int(regs)?;
                if decl < 0 || decl as usize >= self.prog.image.interrupts.len() {
                    return Err(RtError::new(format!("unknown interrupt declaration {decl}")).into());
                }
                rt.declare_interrupt(self, priority, decl as u32)?;
            }
            Sys::INT_ON | Sys::INT_OFF => {
                let priority = self.pop_int(regs)?;
                rt.set_interrupt(self, priority, sys == Sys::INT_ON)?;
            }
            Sys::BRAKE => rt.brake(),
            Sys::WAIT_SEC => {
                let s = self.pop_real(regs)?;
                rt.wait_sec(self, s)?;
            }
            Sys::WAIT_FOR => rt.tick(self)?,
            Sys::FLUSH => rt.flush(self, FlushReason::Barrier)?,
            Sys::HALT => return Err(RtError::halt().into()),
            Sys::GET_POS | Sys::PEEK_POS => {
                let v = rt.read_pose(self, sys == Sys::PEEK_POS)?;
                self.stack.push(v);
            }
            Sys::GET_AXIS | Sys::PEEK_AXIS => {
                let v = rt.read_axes(self, sys == Sys::PEEK_AXIS)?;
                self.stack.push(v);
            }
        }
        Ok(())
    }

    /// Program stack depth (for instrumentation and tests).
    pub fn depth(&self) -> usize {
        self.frames.len()
    }
}

impl Executor for Vm<'_> {
    fn eval_condition(&mut self, rt: &mut Runtime, decl: u32) -> RtResult<bool> {
        let (cond, _) = self.prog.image.interrupts[decl as usize];
        self.call(rt, cond as usize, false, false)?;
        match self.stack.pop() {
            Some(Value::Bool(b)) => Ok(b),
            Some(v) => Err(mismatch("BOOL", &v)),
            None => Err(underflow()),
        }
    }

    fn run_interrupt(&mut self, rt: &mut Runtime, decl: u32) -> RtResult<()> {
        let (_, action) = self.prog.image.interrupts[decl as usize];
        self.call(rt, action as usize, false, true)
    }
}
