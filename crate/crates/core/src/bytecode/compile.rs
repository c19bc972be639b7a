//! Lowering of the annotated AST to an assembly listing.
//!
//! The operand stack is empty at every statement boundary, so jumps (GOTO,
//! EXIT) never need to adjust it, and loop state lives in hidden frame
//! slots. Each interrupt declaration gets two extra routines: a BOOL
//! function for its condition and a procedure for its action.

use std::sync::Arc;

use super::listing::*;
use super::opcode::{Op, Sys};
use crate::frontend::ast::*;
use crate::semantics::{CheckedProgram, KrlType, SlotInfo, StructDef};

/// Compile a checked program. Routine `i` of the program is routine `i` of
/// the listing; interrupt routines follow.
pub fn compile(prog: &CheckedProgram) -> Listing {
    let mut types = TypeTable::default();
    let globals = slot_decls(&mut types, &prog.info.globals);
    let mut routines = Vec::new();
    let mut interrupts: Vec<Option<&Stmt>> = vec![None; prog.info.interrupt_count as usize];
    for (ri, r) in prog.ast.routines.iter().enumerate() {
        let info = &prog.info.routines[ri];
        let mut cx = Cx::new(prog, &mut types);
        for d in &r.decls {
            if let Decl::Interrupt(s) = d {
                cx.emit(Op::POLL, Arg::None);
                cx.stmt(s);
            }
        }
        cx.block(&r.body);
        if info.ret.is_some() {
            cx.emit(Op::NORET, Arg::None);
        } else {
            cx.emit(Op::RET, Arg::None);
        }
        let body = cx.body;
        for d in &r.decls {
            if let Decl::Interrupt(s) = d {
                note_interrupts(std::slice::from_ref(s), &mut interrupts);
            }
        }
        note_interrupts(&r.body, &mut interrupts);
        routines.push(RoutineListing {
            name: info.name.clone(),
            params: info.params.iter().map(|(m, _)| *m).collect(),
            func: info.ret.is_some(),
            slots: slot_decls(&mut types, &info.slots),
            body,
        });
    }
    let mut table = Vec::new();
    for (id, entry) in interrupts.into_iter().enumerate() {
        let stmt = entry.expect("every interrupt id is declared once");
        let StmtKind::InterruptDecl { cond, action, .. } = &stmt.kind else {
            unreachable!()
        };
        let (c, a) = (format!("#C{id}"), format!("#A{id}"));

        let mut cx = Cx::new(prog, &mut types);
        cx.peek = true;
        cx.expr(cond);
        cx.emit(Op::RETV, Arg::None);
        routines.push(RoutineListing {
            name: c.clone(),
            params: Vec::new(),
            func: true,
            slots: Vec::new(),
            body: cx.body,
        });

        let mut cx = Cx::new(prog, &mut types);
        cx.stmt(action);
        cx.emit(Op::RET, Arg::None);
        routines.push(RoutineListing {
            name: a.clone(),
            params: Vec::new(),
            func: false,
            slots: Vec::new(),
            body: cx.body,
        });
        table.push((c, a));
    }
    Listing {
        structs: types.items,
        globals,
        interrupts: table,
        routines,
    }
}

fn note_interrupts<'a>(stmts: &'a [Stmt], out: &mut [Option<&'a Stmt>]) {
    for s in stmts {
        if let StmtKind::InterruptDecl { id: Some(id), .. } = &s.kind {
            out[*id as usize] = Some(s);
        }
        for b in s.child_blocks() {
            note_interrupts(b, out);
        }
    }
}

fn slot_decls(types: &mut TypeTable, slots: &[SlotInfo]) -> Vec<SlotDecl> {
    slots
        .iter()
        .map(|s| SlotDecl {
            name: s.name.clone(),
            ty: types.type_ref(&s.ty),
            hidden: s.hidden,
        })
        .collect()
}

/// Struct definitions by listing name. Distinct definitions that share a
/// source name (possible with routine-local structs) get `@n` suffixes.
#[derive(Default)]
struct TypeTable {
    defs: Vec<Arc<StructDef>>,
    items: Vec<StructItem>,
}

impl TypeTable {
    fn type_ref(&mut self, ty: &KrlType) -> TypeRef {
        match ty {
            KrlType::Int => TypeRef::Int,
            KrlType::Real => TypeRef::Real,
            KrlType::Bool => TypeRef::Bool,
            KrlType::Char => TypeRef::Char,
            KrlType::Array(t, n) => TypeRef::Array(Box::new(self.type_ref(t)), *n),
            KrlType::Struct(def) => TypeRef::Struct(self.struct_name(def)),
        }
    }

    fn struct_name(&mut self, def: &Arc<StructDef>) -> String {
        if let Some(i) = self.defs.iter().position(|d| **d == **def) {
            return self.items[i].name.clone();
        }
        // Fields first so every definition only refers back.
        let fields = def
            .fields
            .iter()
            .map(|(n, t)| (n.clone(), self.type_ref(t)))
            .collect();
        let same = self.defs.iter().filter(|d| d.name == def.name).count();
        let name = if same == 0 {
            def.name.clone()
        } else {
            format!("{}@{same}", def.name)
        };
        self.defs.push(def.clone());
        self.items.push(StructItem {
            name: name.clone(),
            fields,
        });
        name
    }
}

struct Cx<'a> {
    prog: &'a CheckedProgram,
    types: &'a mut TypeTable,
    body: Vec<Line>,
    next_label: u32,
    /// Listing labels of KRL labels, by label id.
    user_labels: Vec<(u32, String)>,
    loop_exits: Vec<String>,
    /// Device reads do not act as barriers (polled conditions).
    peek: bool,
}

fn slot_of(r: Resolved) -> Slot {
    match r {
        Resolved::Local(i) => Slot {
            global: false,
            index: i,
        },
        Resolved::Global(i) => Slot {
            global: true,
            index: i,
        },
        Resolved::Device(_) => unreachable!("devices are not memory"),
    }
}

fn var_resolved(e: &Expr) -> Option<Resolved> {
    match &e.kind {
        ExprKind::Var(v) => v.resolved,
        _ => None,
    }
}

fn memory_var(e: &Expr) -> Option<Slot> {
    match var_resolved(e)? {
        r @ (Resolved::Local(_) | Resolved::Global(_)) => Some(slot_of(r)),
        Resolved::Device(_) => None,
    }
}

/// Static sign of a FOR step written as a (possibly negated) literal.
fn literal_step(e: &Expr) -> Option<i32> {
    match &e.kind {
        ExprKind::Int(k) => Some(*k),
        ExprKind::Unary(UnOp::Neg, x) => match x.kind {
            ExprKind::Int(k) => k.checked_neg(),
            _ => None,
        },
        _ => None,
    }
}

impl<'a> Cx<'a> {
    fn new(prog: &'a CheckedProgram, types: &'a mut TypeTable) -> Self {
        Cx {
            prog,
            types,
            body: Vec::new(),
            next_label: 0,
            user_labels: Vec::new(),
            loop_exits: Vec::new(),
            peek: false,
        }
    }

    fn emit(&mut self, op: Op, arg: Arg) {
        self.body.push(Line::Instr(op, arg));
    }

    fn fresh(&mut self) -> String {
        let l = format!("L{}", self.next_label);
        self.next_label += 1;
        l
    }

    fn place_label(&mut self, l: &str) {
        self.body.push(Line::Label(l.to_string()));
    }

    fn user_label(&mut self, id: u32) -> String {
        if let Some((_, l)) = self.user_labels.iter().find(|(i, _)| *i == id) {
            return l.clone();
        }
        let l = self.fresh();
        self.user_labels.push((id, l.clone()));
        l
    }

    fn jump(&mut self, op: Op, l: &str) {
        self.emit(op, Arg::Label(l.to_string()));
    }

    fn sys(&mut self, s: Sys) {
        self.emit(Op::SYS, Arg::Sys(s));
    }

    fn int(&mut self, v: i32) {
        self.emit(Op::LDC_I, Arg::Int(v));
    }

    fn block(&mut self, stmts: &[Stmt]) {
        for s in stmts {
            if !matches!(s.kind, StmtKind::Label { .. }) {
                self.emit(Op::POLL, Arg::None);
            }
            self.stmt(s);
        }
    }

    fn stmt(&mut self, s: &Stmt) {
        match &s.kind {
            StmtKind::Assign { target, value } => self.assign(target, value),
            StmtKind::Call(c) => {
                if self.call(c) {
                    self.emit(Op::POP, Arg::None);
                }
            }
            StmtKind::If {
                cond,
                then_body,
                else_body,
            } => {
                let skip = self.fresh();
                self.expr(cond);
                self.jump(Op::JZ, &skip);
                self.block(then_body);
                match else_body {
                    Some(e) => {
                        let end = self.fresh();
                        self.jump(Op::JMP, &end);
                        self.place_label(&skip);
                        self.block(e);
                        self.place_label(&end);
                    }
                    None => self.place_label(&skip),
                }
            }
            StmtKind::Switch {
                selector,
                cases,
                default,
                temp,
            } => {
                let temp = Slot {
                    global: false,
                    index: temp.expect("switch temporary"),
                };
                let ne = match selector.ty() {
                    KrlType::Char => Op::CNE_C,
                    _ => Op::CNE_I,
                };
                self.expr(selector);
                self.emit(Op::ST, Arg::Slot(temp));
                let labels: Vec<String> = cases.iter().map(|_| self.fresh()).collect();
                for (c, l) in cases.iter().zip(&labels) {
                    for v in &c.values {
                        self.emit(Op::LD, Arg::Slot(temp));
                        self.expr(v);
                        self.emit(ne, Arg::None);
                        self.jump(Op::JZ, l);
                    }
                }
                let end = self.fresh();
                let fallback = if default.is_some() { self.fresh() } else { end.clone() };
                self.jump(Op::JMP, &fallback);
                for (c, l) in cases.iter().zip(&labels) {
                    self.place_label(l);
                    self.block(&c.body);
                    self.jump(Op::JMP, &end);
                }
                if let Some(d) = default {
                    self.place_label(&fallback);
                    self.block(d);
                }
                self.place_label(&end);
            }
            StmtKind::For {
                var,
                from,
                to,
                step,
                body,
                temps,
            } => self.for_loop(var, from, to, step.as_ref(), body, temps.expect("FOR temporaries")),
            StmtKind::While { cond, body } => {
                let (head, exit) = (self.fresh(), self.fresh());
                self.place_label(&head);
                self.emit(Op::POLL, Arg::None);
                self.expr(cond);
                self.jump(Op::JZ, &exit);
                self.loop_body(body, &exit);
                self.jump(Op::JMP, &head);
                self.place_label(&exit);
            }
            StmtKind::Repeat { body, cond } => {
                let (head, exit) = (self.fresh(), self.fresh());
                self.place_label(&head);
                self.emit(Op::POLL, Arg::None);
                self.loop_body(body, &exit);
                self.expr(cond);
                self.jump(Op::JZ, &head);
                self.place_label(&exit);
            }
            StmtKind::Loop { body } => {
                let (head, exit) = (self.fresh(), self.fresh());
                self.place_label(&head);
                self.emit(Op::POLL, Arg::None);
                self.loop_body(body, &exit);
                self.jump(Op::JMP, &head);
                self.place_label(&exit);
            }
            StmtKind::Exit => {
                let exit = self.loop_exits.last().expect("EXIT inside a loop").clone();
                self.jump(Op::JMP, &exit);
            }
            StmtKind::Goto { target, .. } => {
                let l = self.user_label(target.expect("resolved label"));
                self.jump(Op::JMPG, &l);
            }
            StmtKind::Label { id, .. } => {
                let l = self.user_label(id.expect("numbered label"));
                self.place_label(&l);
            }
            StmtKind::Return(v) => match v {
                Some(e) => {
                    self.expr(e);
                    self.emit(Op::RETV, Arg::None);
                }
                None => self.emit(Op::RET, Arg::None),
            },
            StmtKind::Motion {
                kind,
                target,
                blend,
            } => {
                self.expr(target);
                self.int(match blend {
                    Blend::None => 0,
                    Blend::CDis => 1,
                    Blend::CPtp => 2,
                });
                self.sys(match kind {
                    MotionKind::Ptp => Sys::MOTION_PTP,
                    MotionKind::Lin => Sys::MOTION_LIN,
                });
            }
            StmtKind::Trigger {
                distance,
                delay,
                action,
            } => {
                let StmtKind::Assign { target, value } = &action.kind else {
                    unreachable!("trigger action is an output assignment")
                };
                let ExprKind::Index(_, index) = &target.kind else {
                    unreachable!("trigger action is an output assignment")
                };
                self.int(*distance);
                self.expr(delay);
                self.expr(value);
                self.expr(index);
                self.sys(Sys::TRIGGER_ARM);
            }
            StmtKind::InterruptDecl { priority, id, .. } => {
                self.int(*priority);
                self.int(id.expect("numbered interrupt") as i32);
                self.sys(Sys::INT_DECL);
            }
            StmtKind::InterruptSwitch { priority, on } => {
                self.int(*priority);
                self.sys(if *on { Sys::INT_ON } else { Sys::INT_OFF });
            }
            StmtKind::Brake => self.sys(Sys::BRAKE),
            StmtKind::WaitSec(e) => {
                self.expr(e);
                self.sys(Sys::WAIT_SEC);
            }
            StmtKind::WaitFor(cond) => {
                let (wait, test) = (self.fresh(), self.fresh());
                self.sys(Sys::FLUSH);
                self.jump(Op::JMP, &test);
                self.place_label(&wait);
                self.sys(Sys::WAIT_FOR);
                self.place_label(&test);
                let saved = std::mem::replace(&mut self.peek, true);
                self.expr(cond);
                self.peek = saved;
                self.jump(Op::JZ, &wait);
            }
            StmtKind::Halt => self.sys(Sys::HALT),
        }
    }

    fn loop_body(&mut self, body: &[Stmt], exit: &str) {
        self.loop_exits.push(exit.to_string());
        self.block(body);
        self.loop_exits.pop();
    }

    fn for_loop(
        &mut self,
        var: &Expr,
        from: &Expr,
        to: &Expr,
        step: Option<&Expr>,
        body: &[Stmt],
        (to_slot, step_slot): (u16, u16),
    ) {
        let var = memory_var(var).expect("FOR counter is a variable");
        let to_slot = Slot {
            global: false,
            index: to_slot,
        };
        let step_slot = Slot {
            global: false,
            index: step_slot,
        };
        let fixed = match step {
            None => Some(1),
            Some(e) => literal_step(e).filter(|k| *k != 0),
        };
        self.expr(from);
        self.expr(to);
        self.emit(Op::ST, Arg::Slot(to_slot));
        if let (Some(e), None) = (step, fixed) {
            self.expr(e);
            self.emit(Op::CHKSTEP, Arg::None);
            self.emit(Op::ST, Arg::Slot(step_slot));
        }
        self.emit(Op::ST, Arg::Slot(var));
        let (head, exit) = (self.fresh(), self.fresh());
        self.place_label(&head);
        self.emit(Op::POLL, Arg::None);
        let test = |cx: &mut Self, cmp: Op| {
            cx.emit(Op::LD, Arg::Slot(var));
            cx.emit(Op::LD, Arg::Slot(to_slot));
            cx.emit(cmp, Arg::None);
            cx.jump(Op::JZ, &exit);
        };
        match fixed {
            Some(k) if k > 0 => test(self, Op::CLE_I),
            Some(_) => test(self, Op::CGE_I),
            None => {
                let (down, run) = (self.fresh(), self.fresh());
                self.emit(Op::LD, Arg::Slot(step_slot));
                self.int(0);
                self.emit(Op::CGT_I, Arg::None);
                self.jump(Op::JZ, &down);
                test(self, Op::CLE_I);
                self.jump(Op::JMP, &run);
                self.place_label(&down);
                test(self, Op::CGE_I);
                self.place_label(&run);
            }
        }
        self.loop_body(body, &exit);
        self.emit(Op::LD, Arg::Slot(var));
        match fixed {
            Some(k) => self.int(k),
            None => self.emit(Op::LD, Arg::Slot(step_slot)),
        }
        self.emit(Op::ADD_I, Arg::None);
        self.emit(Op::ST, Arg::Slot(var));
        self.jump(Op::JMP, &head);
        self.place_label(&exit);
    }

    /// Value first, then the target's index, then the store.
    fn assign(&mut self, target: &Expr, value: &Expr) {
        self.expr(value);
        if let Some(slot) = memory_var(target) {
            self.emit(Op::ST, Arg::Slot(slot));
            return;
        }
        if let ExprKind::Index(base, index) = &target.kind {
            match var_resolved(base) {
                Some(Resolved::Device(Device::Out)) => {
                    self.expr(index);
                    self.sys(Sys::SET_OUT);
                }
                Some(r) => {
                    self.expr(index);
                    self.emit(Op::ST_IDX, Arg::Slot(slot_of(r)));
                }
                None => unreachable!("arrays are whole variables"),
            }
            return;
        }
        // Field store: load the enclosing aggregates, patch them from the
        // inside out and store the root back.
        let mut fields = Vec::new();
        let mut root = target;
        while let ExprKind::Field(base, _, ord) = &root.kind {
            fields.push(ord.expect("checked field") as u16);
            root = base;
        }
        fields.reverse();
        let indexed = match &root.kind {
            ExprKind::Index(base, index) => {
                let slot = memory_var(base).expect("memory array");
                self.expr(index);
                self.emit(Op::DUP, Arg::None);
                self.emit(Op::LD_IDX, Arg::Slot(slot));
                Some(slot)
            }
            _ => {
                let slot = memory_var(root).expect("memory variable");
                self.emit(Op::LD, Arg::Slot(slot));
                None
            }
        };
        for f in &fields[..fields.len() - 1] {
            self.emit(Op::DUP, Arg::None);
            self.emit(Op::LD_FLD, Arg::Field(*f));
        }
        let depth = fields.len() + indexed.is_some() as usize;
        self.emit(Op::PICK, Arg::Byte(depth as u8));
        for f in fields.iter().rev() {
            self.emit(Op::SET_FLD, Arg::Field(*f));
        }
        match indexed {
            Some(slot) => {
                self.emit(Op::SWAP, Arg::None);
                self.emit(Op::ST_IDX, Arg::Slot(slot));
            }
            None => {
                let slot = memory_var(root).expect("memory variable");
                self.emit(Op::ST, Arg::Slot(slot));
            }
        }
        self.emit(Op::POP, Arg::None);
    }

    /// Emit a call; returns whether a result is left on the stack.
    fn call(&mut self, c: &CallExpr) -> bool {
        let target = c.target.expect("resolved call");
        let info = &self.prog.info.routines[target];
        for a in &c.args {
            self.expr(a);
        }
        self.emit(Op::CALL, Arg::Routine(info.name.clone()));
        for (i, (mode, _)) in info.params.iter().enumerate().rev() {
            if *mode == ParamMode::Out {
                let slot = memory_var(&c.args[i]).expect("OUT argument is a variable");
                self.emit(Op::ST, Arg::Slot(slot));
            }
        }
        info.ret.is_some()
    }

    fn expr(&mut self, e: &Expr) {
        match &e.kind {
            ExprKind::Int(i) => self.int(*i),
            ExprKind::Real(r) => self.emit(Op::LDC_R, Arg::Real(*r)),
            ExprKind::Bool(b) => self.emit(Op::LDC_B, Arg::Byte(*b as u8)),
            ExprKind::Str(s) => match e.ty() {
                KrlType::Char => self.emit(Op::LDC_C, Arg::Byte(s.as_bytes()[0])),
                KrlType::Array(_, n) => self.emit(Op::LDC_S, Arg::Str(s.clone(), *n)),
                t => unreachable!("string literal typed {t}"),
            },
            ExprKind::Var(v) => match v.resolved.expect("resolved name") {
                Resolved::Device(Device::PosAct) => {
                    self.sys(if self.peek { Sys::PEEK_POS } else { Sys::GET_POS })
                }
                Resolved::Device(Device::AxisAct) => {
                    self.sys(if self.peek { Sys::PEEK_AXIS } else { Sys::GET_AXIS })
                }
                Resolved::Device(_) => unreachable!("I/O arrays are always indexed"),
                r => self.emit(Op::LD, Arg::Slot(slot_of(r))),
            },
            ExprKind::Index(base, index) => {
                self.expr_index(base, index);
            }
            ExprKind::Field(base, _, ord) => {
                self.expr(base);
                self.emit(Op::LD_FLD, Arg::Field(ord.expect("checked field") as u16));
            }
            ExprKind::Unary(UnOp::Neg, x) => {
                self.expr(x);
                self.emit(
                    if *x.ty() == KrlType::Real {
                        Op::NEG_R
                    } else {
                        Op::NEG_I
                    },
                    Arg::None,
                );
            }
            ExprKind::Unary(UnOp::Not, x) => {
                self.expr(x);
                self.emit(Op::NOT, Arg::None);
            }
            ExprKind::Binary(op, a, b) => {
                self.expr(a);
                self.expr(b);
                self.emit(binary_op(*op, a.ty()), Arg::None);
            }
            ExprKind::Call(c) => {
                self.call(c);
            }
            ExprKind::Aggregate { fields, .. } => {
                let ty = self.types.type_ref(e.ty());
                self.emit(Op::LDC_AGG, Arg::Type(ty));
                for f in fields {
                    self.expr(&f.value);
                    self.emit(Op::SET_FLD, Arg::Field(f.ordinal.expect("checked aggregate") as u16));
                }
            }
            ExprKind::IntToReal(x) => {
                self.expr(x);
                self.emit(Op::I2R, Arg::None);
            }
        }
    }

    fn expr_index(&mut self, base: &Expr, index: &Expr) {
        match var_resolved(base) {
            Some(Resolved::Device(d)) => {
                self.expr(index);
                self.sys(match (d, self.peek) {
                    (Device::In, false) => Sys::GET_IN,
                    (Device::In, true) => Sys::PEEK_IN,
                    (Device::Out, false) => Sys::GET_OUT,
                    (Device::Out, true) => Sys::PEEK_OUT,
                    _ => unreachable!("only I/O devices are indexed"),
                });
            }
            Some(r) => {
                self.expr(index);
                self.emit(Op::LD_IDX, Arg::Slot(slot_of(r)));
            }
            None => {
                self.expr(base);
                self.expr(index);
                self.emit(Op::IDX, Arg::None);
            }
        }
    }
}

fn binary_op(op: BinOp, operand: &KrlType) -> Op {
    use BinOp::*;
    match (op, operand) {
        (And, _) => Op::AND,
        (Or, _) => Op::OR,
        (Exor, _) => Op::EXOR,
        (Add, KrlType::Real) => Op::ADD_R,
        (Sub, KrlType::Real) => Op::SUB_R,
        (Mul, KrlType::Real) => Op::MUL_R,
        (Div, KrlType::Real) => Op::DIV_R,
        (Add, _) => Op::ADD_I,
        (Sub, _) => Op::SUB_I,
        (Mul, _) => Op::MUL_I,
        (Div, _) => Op::DIV_I,
        (Eq, KrlType::Bool) => Op::CEQ_B,
        (Ne, KrlType::Bool) => Op::CNE_B,
        (Eq, KrlType::Real) => Op::CEQ_R,
        (Ne, KrlType::Real) => Op::CNE_R,
        (Lt, KrlType::Real) => Op::CLT_R,
        (Le, KrlType::Real) => Op::CLE_R,
        (Gt, KrlType::Real) => Op::CGT_R,
        (Ge, KrlType::Real) => Op::CGE_R,
        (Eq, KrlType::Char) => Op::CEQ_C,
        (Ne, KrlType::Char) => Op::CNE_C,
        (Lt, KrlType::Char) => Op::CLT_C,
        (Le, KrlType::Char) => Op::CLE_C,
        (Gt, KrlType::Char) => Op::CGT_C,
        (Ge, KrlType::Char) => Op::CGE_C,
        (Eq, _) => Op::CEQ_I,
        (Ne, _) => Op::CNE_I,
        (Lt, _) => Op::CLT_I,
        (Le, _) => Op::CLE_I,
        (Gt, _) => Op::CGT_I,
        (Ge, _) => Op::CGE_I,
    }
}
