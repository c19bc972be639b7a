//! Tree-walking interpreter over the type-annotated AST.
//!
//! The program call stack (`frames`) is kept apart from the walker's own
//! recursion. GOTO, EXIT and RETURN travel outward as [`Flow`] values: each
//! statement list that receives a `Jump` looks for the label among its own
//! statements and resumes there, or passes the signal up. Semantic checks
//! guarantee the label lives in an enclosing list of the same routine, so
//! the program stack never changes during a jump.

use crate::engine::{
    entry_routine, initial_globals, JumpRecord, Outcome, RunOptions, SetupError, Snapshot,
    MAX_CALL_DEPTH,
};
use crate::frontend::ast::*;
use crate::frontend::Span;
use crate::runtime::{
    Executor, MotionKind as RtMotion, MotionParams, RtError, RtResult, Runtime,
};
use crate::semantics::{CheckedProgram, KrlType};
use crate::value::Value;

/// Non-local control transfer travelling up the walker.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Flow {
    Normal,
    Exit,
    Jump(u32),
    Return,
}

/// Storage root of a place expression.
#[derive(Debug, Clone, Copy)]
enum Root {
    Local(u16),
    Global(u16),
}

pub struct TreeEngine<'p> {
    prog: &'p CheckedProgram,
    globals: Vec<Value>,
    frames: Vec<Vec<Value>>,
    /// Interrupt declarations by program-wide id.
    interrupts: Vec<&'p Stmt>,
    ret_val: Option<Value>,
    /// Device reads skip barriers and events (polled conditions).
    peek: bool,
    record_jumps: bool,
    jump_from: Vec<usize>,
    jumps: Vec<JumpRecord>,
}

/// Run `prog` on the tree engine.
pub fn run(prog: &CheckedProgram, opts: &RunOptions) -> Result<Outcome, SetupError> {
    let entry = entry_routine(&prog.info, opts.entry.as_deref())?;
    // Deep KRL recursion nests many host frames; give the walker its own stack.
    Ok(with_stack(|| run_entry(prog, opts, entry)))
}

/// Run `f` on a thread with room for `MAX_CALL_DEPTH` nested calls.
pub(crate) fn with_stack<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    std::thread::scope(|s| {
        std::thread::Builder::new()
            .stack_size(ENGINE_STACK)
            .spawn_scoped(s, f)
            .expect("spawn engine thread")
            .join()
            .unwrap_or_else(|p| std::panic::resume_unwind(p))
    })
}

const ENGINE_STACK: usize = 256 << 20;

fn run_entry(prog: &CheckedProgram, opts: &RunOptions, entry: usize) -> Outcome {
    let mut engine = TreeEngine::new(prog, opts);
    let mut rt = Runtime::new(opts.script.clone(), opts.config.clone());
    let result = engine.call_routine(&mut rt, entry, Vec::new()).map(|_| ());
    let status = rt.finish(&mut engine, result);
    let info = &prog.info;
    let empty = Vec::new();
    let locals = engine.frames.first().unwrap_or(&empty);
    let snapshot = Snapshot::capture(
        &info.globals,
        &engine.globals,
        &info.routines[entry].slots,
        locals,
        rt.outputs(),
    );
    Outcome {
        status,
        trace: rt.into_trace(),
        snapshot,
        jumps: engine.jumps,
    }
}

fn collect_interrupts<'p>(stmts: &'p [Stmt], out: &mut Vec<&'p Stmt>) {
    for s in stmts {
        if let StmtKind::InterruptDecl { id: Some(id), .. } = &s.kind {
            let id = *id as usize;
            if out.len() <= id {
                out.resize(id + 1, s);
            }
            out[id] = s;
        }
        for b in s.child_blocks() {
            collect_interrupts(b, out);
        }
    }
}

fn type_error(what: &str) -> RtError {
    RtError::new(format!("type mismatch: {what}"))
}

fn as_int(v: Value) -> RtResult<i32> {
    match v {
        Value::Int(i) => Ok(i),
        other => Err(type_error(&format!("expected INT, found {}", other.type_name()))),
    }
}

fn as_bool(v: Value) -> RtResult<bool> {
    match v {
        Value::Bool(b) => Ok(b),
        other => Err(type_error(&format!("expected BOOL, found {}", other.type_name()))),
    }
}

fn as_real(v: Value) -> RtResult<f64> {
    match v {
        Value::Real(r) => Ok(r),
        other => Err(type_error(&format!("expected REAL, found {}", other.type_name()))),
    }
}

pub(crate) fn overflow() -> RtError {
    RtError::new("integer overflow")
}

pub(crate) fn div_zero() -> RtError {
    RtError::new("division by zero")
}

pub(crate) fn bounds(index: i32, len: usize) -> RtError {
    RtError::new(format!("array index {index} outside 1..{len}"))
}

pub(crate) fn depth_exceeded() -> RtError {
    RtError::new(format!("call depth limit of {MAX_CALL_DEPTH} exceeded"))
}

/// Shared binary-operator semantics; both engines route through these.
pub(crate) fn int_op(op: BinOp, a: i32, b: i32) -> RtResult<Value> {
    Ok(match op {
        BinOp::Add => Value::Int(a.checked_add(b).ok_or_else(overflow)?),
        BinOp::Sub => Value::Int(a.checked_sub(b).ok_or_else(overflow)?),
        BinOp::Mul => Value::Int(a.checked_mul(b).ok_or_else(overflow)?),
        BinOp::Div => {
            if b == 0 {
                return Err(div_zero());
            }
            Value::Int(a.checked_div(b).ok_or_else(overflow)?)
        }
        BinOp::Eq => Value::Bool(a == b),
        BinOp::Ne => Value::Bool(a != b),
        BinOp::Lt => Value::Bool(a < b),
        BinOp::Le => Value::Bool(a <= b),
        BinOp::Gt => Value::Bool(a > b),
        BinOp::Ge => Value::Bool(a >= b),
        _ => return Err(type_error("logical operator on INT")),
    })
}

pub(crate) fn real_op(op: BinOp, a: f64, b: f64) -> RtResult<Value> {
    Ok(match op {
        BinOp::Add => Value::Real(a + b),
        BinOp::Sub => Value::Real(a - b),
        BinOp::Mul => Value::Real(a * b),
        BinOp::Div => {
            if b == 0.0 {
                return Err(div_zero());
            }
            Value::Real(a / b)
        }
        BinOp::Eq => Value::Bool(a == b),
        BinOp::Ne => Value::Bool(a != b),
        BinOp::Lt => Value::Bool(a < b),
        BinOp::Le => Value::Bool(a <= b),
        BinOp::Gt => Value::Bool(a > b),
        BinOp::Ge => Value::Bool(a >= b),
        _ => return Err(type_error("logical operator on REAL")),
    })
}

fn binary(op: BinOp, a: Value, b: Value) -> RtResult<Value> {
    match (a, b) {
        (Value::Int(x), Value::Int(y)) => int_op(op, x, y),
        (Value::Real(x), Value::Real(y)) => real_op(op, x, y),
        (Value::Bool(x), Value::Bool(y)) => Ok(Value::Bool(match op {
            BinOp::And => x && y,
            BinOp::Or => x || y,
            BinOp::Exor => x != y,
            BinOp::Eq => x == y,
            BinOp::Ne => x != y,
            _ => return Err(type_error("arithmetic on BOOL")),
        })),
        (Value::Char(x), Value::Char(y)) => Ok(Value::Bool(match op {
            BinOp::Eq => x == y,
            BinOp::Ne => x != y,
            BinOp::Lt => x < y,
            BinOp::Le => x <= y,
            BinOp::Gt => x > y,
            BinOp::Ge => x >= y,
            _ => return Err(type_error("arithmetic on CHAR")),
        })),
        (a, b) => Err(type_error(&format!(
            "{} {} {}",
            a.type_name(),
            op.symbol(),
            b.type_name()
        ))),
    }
}

fn element<'v>(v: &'v Value, index: i32) -> RtResult<&'v Value> {
    match v {
        Value::Array(items) => {
            if index < 1 || index as usize > items.len() {
                return Err(bounds(index, items.len()));
            }
            Ok(&items[index as usize - 1])
        }
        other => Err(type_error(&format!("indexing {}", other.type_name()))),
    }
}

fn element_mut(v: &mut Value, index: i32) -> RtResult<&mut Value> {
    match v {
        Value::Array(items) => {
            if index < 1 || index as usize > items.len() {
                return Err(bounds(index, items.len()));
            }
            Ok(&mut items[index as usize - 1])
        }
        other => Err(type_error(&format!("indexing {}", other.type_name()))),
    }
}

fn field(v: &Value, ordinal: usize) -> RtResult<&Value> {
    match v {
        Value::Struct(_, vals) => vals.get(ordinal).ok_or_else(|| type_error("field")),
        other => Err(type_error(&format!("field of {}", other.type_name()))),
    }
}

fn field_mut(v: &mut Value, ordinal: usize) -> RtResult<&mut Value> {
    match v {
        Value::Struct(_, vals) => vals.get_mut(ordinal).ok_or_else(|| type_error("field")),
        other => Err(type_error(&format!("field of {}", other.type_name()))),
    }
}

/// One step of a place path: 1-based index or field ordinal.
#[derive(Debug, Clone, Copy)]
enum Step {
    Index(i32),
    Field(usize),
}

fn location(span: Span) -> String {
    format!("{}:{}", span.line, span.col)
}


impl<'p> TreeEngine<'p> {
    pub fn new(prog: &'p CheckedProgram, opts: &RunOptions) -> Self {
        let mut interrupts = Vec::new();
        for r in &prog.ast.routines {
            for d in &r.decls {
                if let Decl::Interrupt(s) = d {
                    collect_interrupts(std::slice::from_ref(s), &mut interrupts);
                }
            }
            collect_interrupts(&r.body, &mut interrupts);
        }
        TreeEngine {
            prog,
            globals: initial_globals(&prog.info.globals, opts.advance),
            frames: Vec::new(),
            interrupts,
            ret_val: None,
            peek: false,
            record_jumps: opts.record_jumps,
            jump_from: Vec::new(),
            jumps: Vec::new(),
        }
    }

    fn frame(&self) -> &[Value] {
        self.frames.last().map(|f| f.as_slice()).unwrap_or(&[])
    }

    fn root_ref(&self, root: Root) -> &Value {
        match root {
            Root::Local(s) => &self.frames.last().expect("frame")[s as usize],
            Root::Global(s) => &self.globals[s as usize],
        }
    }

    fn root_mut(&mut self, root: Root) -> &mut Value {
        match root {
            Root::Local(s) => &mut self.frames.last_mut().expect("frame")[s as usize],
            Root::Global(s) => &mut self.globals[s as usize],
        }
    }

    /// Resolve a memory place, evaluating index expressions left to right.
    fn place(&mut self, rt: &mut Runtime, e: &Expr, path: &mut Vec<Step>) -> RtResult<Root> {
        match &e.kind {
            ExprKind::Var(v) => match v.resolved {
                Some(Resolved::Local(s)) => Ok(Root::Local(s)),
                Some(Resolved::Global(s)) => Ok(Root::Global(s)),
                _ => Err(type_error("device used as memory")),
            },
            ExprKind::Index(b, i) => {
                let root = self.place(rt, b, path)?;
                let idx = as_int(self.eval(rt, i)?)?;
                path.push(Step::Index(idx));
                Ok(root)
            }
            ExprKind::Field(b, _, ord) => {
                let root = self.place(rt, b, path)?;
                path.push(Step::Field(ord.expect("checked field")));
                Ok(root)
            }
            _ => Err(type_error("not a place")),
        }
    }

    fn read_place(&self, root: Root, path: &[Step]) -> RtResult<Value> {
        let mut v = self.root_ref(root);
        for step in path {
            v = match *step {
                Step::Index(i) => element(v, i)?,
                Step::Field(f) => field(v, f)?,
            };
        }
        Ok(v.clone())
    }

    fn write_place(&mut self, root: Root, path: &[Step], value: Value) -> RtResult<()> {
        let mut v = self.root_mut(root);
        for step in path {
            v = match *step {
                Step::Index(i) => element_mut(v, i)?,
                Step::Field(f) => field_mut(v, f)?,
            };
        }
        *v = value;
        Ok(())
    }

    fn is_memory_place(e: &Expr) -> bool {
        match &e.kind {
            ExprKind::Var(v) => matches!(v.resolved, Some(Resolved::Local(_) | Resolved::Global(_))),
            ExprKind::Index(b, _) | ExprKind::Field(b, _, _) => Self::is_memory_place(b),
            _ => false,
        }
    }

    pub fn eval(&mut self, rt: &mut Runtime, e: &Expr) -> RtResult<Value> {
        match &e.kind {
            ExprKind::Int(i) => Ok(Value::Int(*i)),
            ExprKind::Real(r) => Ok(Value::Real(*r)),
            ExprKind::Bool(b) => Ok(Value::Bool(*b)),
            ExprKind::Str(s) => Ok(match e.ty() {
                KrlType::Char => Value::Char(s.as_bytes()[0]),
                KrlType::Array(_, n) => Value::char_array(s, *n as usize),
                _ => return Err(type_error("string literal")),
            }),
            ExprKind::Var(v) => match v.resolved {
                Some(Resolved::Local(s)) => Ok(self.frame()[s as usize].clone()),
                Some(Resolved::Global(s)) => Ok(self.globals[s as usize].clone()),
                Some(Resolved::Device(Device::PosAct)) => {
                    let peek = self.peek;
                    rt.read_pose(self, peek)
                }
                Some(Resolved::Device(Device::AxisAct)) => {
                    let peek = self.peek;
                    rt.read_axes(self, peek)
                }
                _ => Err(type_error("unindexed I/O array")),
            },
            ExprKind::Index(base, idx) => {
                if let ExprKind::Var(VarRef {
                    resolved: Some(Resolved::Device(d)),
                    ..
                }) = &base.kind
                {
                    let i = as_int(self.eval(rt, idx)?)?;
                    let value = match (d, self.peek) {
                        (Device::In, false) => rt.read_input(self, i)?,
                        (Device::In, true) => rt.peek_input(i)?,
                        (Device::Out, false) => rt.read_output(self, i)?,
                        (Device::Out, true) => rt.peek_output(i)?,
                        _ => return Err(type_error("indexing a pose")),
                    };
                    return Ok(Value::Bool(value));
                }
                if Self::is_memory_place(e) {
                    let mut path = Vec::new();
                    let root = self.place(rt, e, &mut path)?;
                    return self.read_place(root, &path);
                }
                let b = self.eval(rt, base)?;
                let i = as_int(self.eval(rt, idx)?)?;
                element(&b, i).cloned()
            }
            ExprKind::Field(base, _, ord) => {
                let ord = ord.expect("checked field");
                if Self::is_memory_place(e) {
                    let mut path = Vec::new();
                    let root = self.place(rt, e, &mut path)?;
                    return self.read_place(root, &path);
                }
                let b = self.eval(rt, base)?;
                field(&b, ord).cloned()
            }
            ExprKind::Unary(UnOp::Neg, x) => match self.eval(rt, x)? {
                Value::Int(i) => Ok(Value::Int(i.checked_neg().ok_or_else(overflow)?)),
                Value::Real(r) => Ok(Value::Real(-r)),
                other => Err(type_error(&format!("negating {}", other.type_name()))),
            },
            ExprKind::Unary(UnOp::Not, x) => Ok(Value::Bool(!as_bool(self.eval(rt, x)?)?)),
            ExprKind::Binary(op, a, b) => {
                let a = self.eval(rt, a)?;
                let b = self.eval(rt, b)?;
                binary(*op, a, b)
            }
            ExprKind::Call(c) => {
                let v = self.call(rt, c)?;
                v.ok_or_else(|| type_error("procedure used as function"))
            }
            ExprKind::Aggregate { fields, .. } => {
                let mut v = Value::zero(e.ty());
                for f in fields {
                    let fv = self.eval(rt, &f.value)?;
                    *field_mut(&mut v, f.ordinal.expect("checked aggregate"))? = fv;
                }
                Ok(v)
            }
            ExprKind::IntToReal(x) => Ok(Value::Real(as_int(self.eval(rt, x)?)? as f64)),
        }
    }

    /// Evaluate a call's arguments, run the routine and copy OUT
    /// arguments back.
    fn call(&mut self, rt: &mut Runtime, c: &CallExpr) -> RtResult<Option<Value>> {
        let target = c.target.expect("resolved call");
        let info = &self.prog.info.routines[target];
        let mut args = Vec::with_capacity(c.args.len());
        for a in &c.args {
            args.push(self.eval(rt, a)?);
        }
        let (ret, frame) = self.invoke(rt, target, args)?;
        let mut out = frame;
        for (i, (mode, _)) in info.params.iter().enumerate().rev() {
            if *mode == ParamMode::Out {
                let mut path = Vec::new();
                let root = self.place(rt, &c.args[i], &mut path)?;
                let v = std::mem::replace(&mut out[i], Value::Bool(false));
                self.write_place(root, &path, v)?;
            }
        }
        Ok(ret)
    }

    /// Run routine `target` with evaluated arguments; returns the result
    /// and the final frame.
    fn invoke(
        &mut self,
        rt: &mut Runtime,
        target: usize,
        args: Vec<Value>,
    ) -> RtResult<(Option<Value>, Vec<Value>)> {
        if self.frames.len() >= MAX_CALL_DEPTH {
            return Err(depth_exceeded());
        }
        let info = &self.prog.info.routines[target];
        let mut frame: Vec<Value> = info.slots.iter().map(|s| Value::zero(&s.ty)).collect();
        for (slot, a) in frame.iter_mut().zip(args) {
            *slot = a;
        }
        self.frames.push(frame);
        self.ret_val = None;
        let routine = &self.prog.ast.routines[target];
        for d in &routine.decls {
            if let Decl::Interrupt(s) = d {
                rt.poll(self)?;
                self.exec(rt, s)?;
            }
        }
        let flow = self.block(rt, &routine.body)?;
        debug_assert!(matches!(flow, Flow::Normal | Flow::Return));
        let ret = self.ret_val.take();
        if info.ret.is_some() && ret.is_none() {
            return Err(RtError::new(format!("function {} ended without RETURN", info.name)));
        }
        let frame = self.frames.pop().expect("frame");
        Ok((ret, frame))
    }

    fn call_routine(&mut self, rt: &mut Runtime, target: usize, args: Vec<Value>) -> RtResult<Option<Value>> {
        // The entry routine's frame stays on the stack for the snapshot.
        let (ret, frame) = self.invoke(rt, target, args)?;
        self.frames.push(frame);
        Ok(ret)
    }

    fn block(&mut self, rt: &mut Runtime, stmts: &[Stmt]) -> RtResult<Flow> {
        let mut i = 0;
        while i < stmts.len() {
            let s = &stmts[i];
            if !matches!(s.kind, StmtKind::Label { .. }) {
                rt.poll(self)?;
            }
            match self.exec(rt, s)? {
                Flow::Normal => i += 1,
                Flow::Jump(id) => {
                    let found = stmts.iter().position(
                        |s| matches!(s.kind, StmtKind::Label { id: Some(l), .. } if l == id),
                    );
                    match found {
                        Some(pos) => {
                            if self.record_jumps {
                                let before = self.jump_from.pop().unwrap_or_default();
                                self.jumps.push(JumpRecord {
                                    before,
                                    after: self.frames.len(),
                                });
                            }
                            i = pos + 1;
                        }
                        None => return Ok(Flow::Jump(id)),
                    }
                }
                other => return Ok(other),
            }
        }
        Ok(Flow::Normal)
    }

    /// Loop body: EXIT ends the loop, other signals travel outward.
    fn loop_body(&mut self, rt: &mut Runtime, body: &[Stmt]) -> RtResult<Option<Flow>> {
        match self.block(rt, body)? {
            Flow::Normal => Ok(None),
            Flow::Exit => Ok(Some(Flow::Normal)),
            other => Ok(Some(other)),
        }
    }

    fn exec(&mut self, rt: &mut Runtime, s: &Stmt) -> RtResult<Flow> {
        self.exec_inner(rt, s).map_err(|e| e.at(|| location(s.span)))
    }

    fn assign(&mut self, rt: &mut Runtime, target: &Expr, value: &Expr) -> RtResult<()> {
        let v = self.eval(rt, value)?;
        if let ExprKind::Index(b, idx) = &target.kind {
            if matches!(&b.kind, ExprKind::Var(VarRef { resolved: Some(Resolved::Device(Device::Out)), .. })) {
                let i = as_int(self.eval(rt, idx)?)?;
                return rt.set_output(self, i, as_bool(v)?);
            }
        }
        let mut path = Vec::new();
        let root = self.place(rt, target, &mut path)?;
        self.write_place(root, &path, v)
    }

    fn exec_inner(&mut self, rt: &mut Runtime, s: &Stmt) -> RtResult<Flow> {
        match &s.kind {
            StmtKind::Assign { target, value } => self.assign(rt, target, value)?,
            StmtKind::Call(c) => {
                self.call(rt, c)?;
            }
            StmtKind::If {
                cond,
                then_body,
                else_body,
            } => {
                if as_bool(self.eval(rt, cond)?)? {
                    return self.block(rt, then_body);
                } else if let Some(e) = else_body {
                    return self.block(rt, e);
                }
            }
            StmtKind::Switch {
                selector,
                cases,
                default,
                ..
            } => {
                let sel = self.eval(rt, selector)?;
                for c in cases {
                    for v in &c.values {
                        if self.eval(rt, v)? == sel {
                            return self.block(rt, &c.body);
                        }
                    }
                }
                if let Some(d) = default {
                    return self.block(rt, d);
                }
            }
            StmtKind::For {
                var,
                from,
                to,
                step,
                body,
                ..
            } => {
                let root = self.place(rt, var, &mut Vec::new())?;
                let start = self.eval(rt, from)?;
                let bound = as_int(self.eval(rt, to)?)?;
                let stride = match step {
                    Some(st) => as_int(self.eval(rt, st)?)?,
                    None => 1,
                };
                if stride == 0 {
                    return Err(RtError::new("FOR step must not be zero"));
                }
                *self.root_mut(root) = start;
                loop {
                    rt.poll(self)?;
                    let v = as_int(self.root_ref(root).clone())?;
                    if (stride > 0 && v > bound) || (stride < 0 && v < bound) {
                        break;
                    }
                    if let Some(flow) = self.loop_body(rt, body)? {
                        return Ok(flow);
                    }
                    let v = as_int(self.root_ref(root).clone())?;
                    *self.root_mut(root) = Value::Int(v.checked_add(stride).ok_or_else(overflow)?);
                }
            }
            StmtKind::While { cond, body } => loop {
                rt.poll(self)?;
                if !as_bool(self.eval(rt, cond)?)? {
                    break;
                }
                if let Some(flow) = self.loop_body(rt, body)? {
                    return Ok(flow);
                }
            },
            StmtKind::Repeat { body, cond } => loop {
                rt.poll(self)?;
                if let Some(flow) = self.loop_body(rt, body)? {
                    return Ok(flow);
                }
                if as_bool(self.eval(rt, cond)?)? {
                    break;
                }
            },
            StmtKind::Loop { body } => loop {
                rt.poll(self)?;
                if let Some(flow) = self.loop_body(rt, body)? {
                    return Ok(flow);
                }
            },
            StmtKind::Exit => return Ok(Flow::Exit),
            StmtKind::Goto { target, .. } => {
                if self.record_jumps {
                    self.jump_from.push(self.frames.len());
                }
                return Ok(Flow::Jump(target.expect("resolved label")));
            }
            StmtKind::Label { .. } => {}
            StmtKind::Return(v) => {
                self.ret_val = match v {
                    Some(e) => Some(self.eval(rt, e)?),
                    None => None,
                };
                return Ok(Flow::Return);
            }
            StmtKind::Motion {
                kind,
                target,
                blend,
            } => {
                let v = self.eval(rt, target)?;
                let params = MotionParams::from_globals(&self.globals)?;
                let kind = match kind {
                    MotionKind::Ptp => RtMotion::Ptp,
                    MotionKind::Lin => RtMotion::Lin,
                };
                rt.submit_motion(self, kind, &v, *blend, params)?;
            }
            StmtKind::Trigger {
                distance,
                delay,
                action,
            } => {
                let d = as_int(self.eval(rt, delay)?)?;
                let StmtKind::Assign { target, value } = &action.kind else {
                    return Err(type_error("trigger action"));
                };
                let v = as_bool(self.eval(rt, value)?)?;
                let ExprKind::Index(_, idx) = &target.kind else {
                    return Err(type_error("trigger target"));
                };
                let i = as_int(self.eval(rt, idx)?)?;
                rt.arm_trigger(*distance, d, i, v)?;
            }
            StmtKind::InterruptDecl { priority, id, .. } => {
                rt.declare_interrupt(self, *priority, id.expect("numbered interrupt"))?;
            }
            StmtKind::InterruptSwitch { priority, on } => rt.set_interrupt(self, *priority, *on)?,
            StmtKind::Brake => rt.brake(),
            StmtKind::WaitSec(e) => {
                let secs = as_real(self.eval(rt, e)?)?;
                rt.wait_sec(self, secs)?;
            }
            StmtKind::WaitFor(cond) => {
                rt.flush(self, crate::runtime::FlushReason::Barrier)?;
                loop {
                    let saved = std::mem::replace(&mut self.peek, true);
                    let v = self.eval(rt, cond);
                    self.peek = saved;
                    if as_bool(v?)? {
                        break;
                    }
                    rt.tick(self)?;
                }
            }
            StmtKind::Halt => return Err(RtError::halt()),
        }
        Ok(Flow::Normal)
    }

    /// Program stack depth (for instrumentation and tests).
    pub fn depth(&self) -> usize {
        self.frames.len()
    }
}

impl Executor for TreeEngine<'_> {
    fn eval_condition(&mut self, rt: &mut Runtime, decl: u32) -> RtResult<bool> {
        let StmtKind::InterruptDecl { cond, .. } = &self.interrupts[decl as usize].kind else {
            unreachable!("interrupt table holds declarations")
        };
        let saved = std::mem::replace(&mut self.peek, true);
        let v = self.eval(rt, cond);
        self.peek = saved;
        as_bool(v?)
    }

    fn run_interrupt(&mut self, rt: &mut Runtime, decl: u32) -> RtResult<()> {
        let stmt = self.interrupts[decl as usize];
        let StmtKind::InterruptDecl { action, .. } = &stmt.kind else {
            unreachable!("interrupt table holds declarations")
        };
        // Interrupt actions see no locals of the interrupted routine.
        self.frames.push(Vec::new());
        let r = self.exec(rt, action);
        self.frames.pop();
        r.map(|_| ())
    }
}
