use crate::diag::Diagnostic;
use crate::frontend::ast::*;
use crate::frontend::Span;

use super::scope::{Symbol, SymbolKind};
use super::{device_type, Analysis, KrlType};

/// Annotate every expression with its type and enforce the type rules.
///
/// The only implicit conversion is INT to REAL, made explicit as an
/// `IntToReal` node. String literals take the length of the CHAR array
/// they are assigned to.
pub fn check_types(program: &mut Program, info: &mut Analysis) -> Result<(), Vec<Diagnostic>> {
    let mut c = Checker {
        info,
        errors: Vec::new(),
        routine: 0,
    };
    for (i, r) in program.routines.iter_mut().enumerate() {
        c.routine = i;
        for d in &mut r.decls {
            if let Decl::Interrupt(s) = d {
                c.stmt(s);
            }
        }
        for s in &mut r.body {
            c.stmt(s);
        }
    }
    if c.errors.is_empty() {
        Ok(())
    } else {
        c.errors.sort_by_key(|d| (d.span.line, d.span.col));
        Err(c.errors)
    }
}

/// Restrictions on where an expression is evaluated.
#[derive(Debug, Clone, Copy, Default)]
struct Ctx {
    /// Interrupt conditions and actions run outside any routine frame.
    globals_only: bool,
    /// Polled conditions must be free of side effects.
    no_calls: bool,
    what: &'static str,
}

const PLAIN: Ctx = Ctx {
    globals_only: false,
    no_calls: false,
    what: "",
};

struct Checker<'a> {
    info: &'a mut Analysis,
    errors: Vec<Diagnostic>,
    routine: usize,
}

fn is_device(e: &Expr, dev: &[Device]) -> bool {
    matches!(&e.kind, ExprKind::Var(VarRef { resolved: Some(Resolved::Device(d)), .. }) if dev.contains(d))
}

fn root_var(e: &Expr) -> Option<&VarRef> {
    match &e.kind {
        ExprKind::Var(v) => Some(v),
        ExprKind::Index(b, _) | ExprKind::Field(b, _, _) => root_var(b),
        _ => None,
    }
}

impl Checker<'_> {
    fn error(&mut self, span: Span, msg: impl Into<String>) {
        self.errors.push(Diagnostic::error(span, msg));
    }

    fn lookup(&self, name: &str) -> Option<&Symbol> {
        let scope = self.info.scopes.routine_scope(self.routine);
        self.info.scopes.lookup(scope, name)
    }

    /// Make `e` have type `target`, inserting a widening node if needed.
    fn coerce(&mut self, e: &mut Expr, target: &KrlType, what: &str) -> bool {
        let Some(ty) = e.ty.clone() else {
            return false;
        };
        if ty == *target {
            return true;
        }
        if ty == KrlType::Int && *target == KrlType::Real {
            let span = e.span;
            let inner = std::mem::replace(e, Expr::new(ExprKind::Bool(false), span));
            *e = Expr {
                kind: ExprKind::IntToReal(Box::new(inner)),
                span,
                ty: Some(KrlType::Real),
            };
            return true;
        }
        if let (ExprKind::Str(s), KrlType::Array(elem, n)) = (&e.kind, target) {
            if **elem == KrlType::Char && s.len() <= *n as usize {
                e.ty = Some(target.clone());
                return true;
            }
        }
        self.error(
            e.span,
            format!("type mismatch in {what}: expected {target}, found {ty}"),
        );
        false
    }

    fn expect(&mut self, e: &mut Expr, ctx: Ctx, target: &KrlType, what: &str) -> bool {
        if self.expr(e, ctx).is_none() {
            return false;
        }
        self.coerce(e, target, what)
    }

    fn condition(&mut self, e: &mut Expr, ctx: Ctx) {
        if let Some(ty) = self.expr(e, ctx) {
            if ty != KrlType::Bool {
                self.error(e.span, format!("condition must be BOOL, found {ty}"));
            }
        }
    }

    fn var_type(&mut self, v: &VarRef, span: Span, ctx: Ctx) -> Option<KrlType> {
        match v.resolved? {
            Resolved::Local(slot) => {
                if ctx.globals_only {
                    self.error(
                        span,
                        format!("{} may only use global variables, found local {}", ctx.what, v.name),
                    );
                    return None;
                }
                Some(self.info.local_type(self.routine, slot).clone())
            }
            Resolved::Global(slot) => Some(self.info.global_type(slot).clone()),
            Resolved::Device(d) => Some(device_type(d)),
        }
    }

    fn expr(&mut self, e: &mut Expr, ctx: Ctx) -> Option<KrlType> {
        let ty = self.expr_inner(e, ctx);
        e.ty = ty.clone();
        ty
    }

    fn expr_inner(&mut self, e: &mut Expr, ctx: Ctx) -> Option<KrlType> {
        let span = e.span;
        match &mut e.kind {
            ExprKind::Int(_) => Some(KrlType::Int),
            ExprKind::Real(_) => Some(KrlType::Real),
            ExprKind::Bool(_) => Some(KrlType::Bool),
            ExprKind::Str(s) => {
                if s.len() == 1 {
                    Some(KrlType::Char)
                } else {
                    Some(KrlType::Array(Box::new(KrlType::Char), s.len() as u32))
                }
            }
            ExprKind::Var(v) => {
                if matches!(v.resolved, Some(Resolved::Device(Device::In | Device::Out))) {
                    self.error(span, format!("{} must be indexed", v.name));
                    return None;
                }
                self.var_type(v, span, ctx)
            }
            ExprKind::Index(base, idx) => {
                let bty = if is_device(base, &[Device::In, Device::Out]) {
                    let ExprKind::Var(v) = &base.kind else {
                        unreachable!()
                    };
                    let t = self.var_type(v, base.span, ctx);
                    base.ty = t.clone();
                    t
                } else {
                    self.expr(base, ctx)
                };
                let ity = self.expr(idx, ctx);
                if let Some(it) = &ity {
                    if *it != KrlType::Int {
                        self.error(idx.span, format!("array index must be INT, found {it}"));
                    }
                }
                match bty? {
                    KrlType::Array(elem, _) => {
                        ity?;
                        Some(*elem)
                    }
                    other => {
                        self.error(span, format!("cannot index a value of type {other}"));
                        None
                    }
                }
            }
            ExprKind::Field(base, name, ordinal) => {
                let bty = self.expr(base, ctx)?;
                match &bty {
                    KrlType::Struct(def) => match def.field_index(name) {
                        Some(i) => {
                            *ordinal = Some(i);
                            Some(def.fields[i].1.clone())
                        }
                        None => {
                            self.error(span, format!("{} has no field {name}", def.name));
                            None
                        }
                    },
                    other => {
                        self.error(span, format!("field access on non-struct type {other}"));
                        None
                    }
                }
            }
            ExprKind::Unary(op, x) => {
                let t = self.expr(x, ctx)?;
                match op {
                    UnOp::Neg if t.is_numeric() => Some(t),
                    UnOp::Not if t == KrlType::Bool => Some(t),
                    UnOp::Neg => {
                        self.error(span, format!("unary minus requires a numeric operand, found {t}"));
                        None
                    }
                    UnOp::Not => {
                        self.error(span, format!("NOT requires a BOOL operand, found {t}"));
                        None
                    }
                }
            }
            ExprKind::Binary(op, a, b) => {
                let op = *op;
                let ta = self.expr(a, ctx);
                let tb = self.expr(b, ctx);
                let (ta, tb) = (ta?, tb?);
                self.binary(op, a, b, ta, tb, span)
            }
            ExprKind::Call(call) => {
                if ctx.no_calls {
                    self.error(span, format!("{} must not call routines", ctx.what));
                    return None;
                }
                let ret = self.call(call, span, ctx)?;
                match ret {
                    Some(t) => Some(t),
                    None => {
                        self.error(span, format!("{} is a procedure and returns no value", call.name));
                        None
                    }
                }
            }
            ExprKind::Aggregate { tag, fields } => {
                let def = match self.lookup(tag) {
                    Some(Symbol {
                        kind: SymbolKind::Type,
                        ty: Some(KrlType::Struct(def)),
                        ..
                    }) => def.clone(),
                    _ => {
                        self.error(span, format!("unknown struct type {tag}"));
                        return None;
                    }
                };
                let mut ok = true;
                for i in 0..fields.len() {
                    let f = &mut fields[i];
                    f.ordinal = None;
                    let fname = f.name.clone();
                    let fspan = f.span;
                    let Some(ord) = def.field_index(&fname) else {
                        self.error(fspan, format!("{} has no field {fname}", def.name));
                        ok = false;
                        continue;
                    };
                    if fields[..i].iter().any(|g| g.name == fname) {
                        self.error(fspan, format!("field {fname} given twice"));
                        ok = false;
                        continue;
                    }
                    let f = &mut fields[i];
                    f.ordinal = Some(ord);
                    let fty = def.fields[ord].1.clone();
                    let what = format!("field {fname}");
                    ok &= self.expect(&mut f.value, ctx, &fty, &what);
                }
                ok.then_some(KrlType::Struct(def))
            }
            ExprKind::IntToReal(x) => {
                let t = self.expr(x, ctx)?;
                if t == KrlType::Int {
                    Some(KrlType::Real)
                } else {
                    self.error(span, format!("cannot widen {t} to REAL"));
                    None
                }
            }
        }
    }

    fn binary(
        &mut self,
        op: BinOp,
        a: &mut Expr,
        b: &mut Expr,
        ta: KrlType,
        tb: KrlType,
        span: Span,
    ) -> Option<KrlType> {
        if op.is_logical() {
            if ta == KrlType::Bool && tb == KrlType::Bool {
                return Some(KrlType::Bool);
            }
            self.error(
                span,
                format!("{} requires BOOL operands, found {ta} and {tb}", op.symbol()),
            );
            return None;
        }
        if ta.is_numeric() && tb.is_numeric() {
            let common = if ta == KrlType::Real || tb == KrlType::Real {
                KrlType::Real
            } else {
                KrlType::Int
            };
            self.coerce(a, &common, "operand");
            self.coerce(b, &common, "operand");
            return Some(if op.is_relational() {
                KrlType::Bool
            } else {
                common
            });
        }
        if op.is_relational() {
            let same = ta == tb;
            let ordered = matches!(op, BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge);
            if same && ta == KrlType::Char {
                return Some(KrlType::Bool);
            }
            if same && ta == KrlType::Bool && !ordered {
                return Some(KrlType::Bool);
            }
            self.error(
                span,
                format!("cannot apply {} to {ta} and {tb}", op.symbol()),
            );
            return None;
        }
        self.error(
            span,
            format!("arithmetic requires numeric operands, found {ta} and {tb}"),
        );
        None
    }

    /// Check a call's arguments; returns the routine's return type.
    fn call(&mut self, c: &mut CallExpr, span: Span, ctx: Ctx) -> Option<Option<KrlType>> {
        let target = c.target?;
        let params = self.info.routines[target].params.clone();
        let ret = self.info.routines[target].ret.clone();
        if params.len() != c.args.len() {
            self.error(
                span,
                format!(
                    "{} expects {} argument(s), found {}",
                    c.name,
                    params.len(),
                    c.args.len()
                ),
            );
            for a in &mut c.args {
                self.expr(a, ctx);
            }
            return None;
        }
        let mut ok = true;
        for (a, (mode, pty)) in c.args.iter_mut().zip(&params) {
            match mode {
                ParamMode::In => ok &= self.expect(a, ctx, pty, "argument"),
                ParamMode::Out => {
                    let Some(aty) = self.expr(a, ctx) else {
                        ok = false;
                        continue;
                    };
                    let whole_var = matches!(
                        &a.kind,
                        ExprKind::Var(VarRef {
                            resolved: Some(Resolved::Local(_) | Resolved::Global(_)),
                            ..
                        })
                    );
                    if !whole_var {
                        self.error(a.span, "OUT argument must be a variable");
                        ok = false;
                    } else if aty != *pty {
                        self.error(
                            a.span,
                            format!("OUT argument must have type {pty}, found {aty}"),
                        );
                        ok = false;
                    }
                }
            }
        }
        ok.then_some(ret)
    }

    /// Type a store target and reject read-only storage.
    fn target(&mut self, t: &mut Expr, ctx: Ctx) -> Option<KrlType> {
        if !t.is_lvalue() {
            self.error(t.span, "cannot assign to this expression");
            return None;
        }
        let root = root_var(t).cloned();
        let ty = self.expr(t, ctx)?;
        if let Some(VarRef {
            name,
            resolved: Some(Resolved::Device(d)),
        }) = root
        {
            let indexed_out = d == Device::Out
                && matches!(&t.kind, ExprKind::Index(b, _) if matches!(b.kind, ExprKind::Var(_)));
            if !indexed_out {
                self.error(t.span, format!("{name} is read-only"));
                return None;
            }
        }
        Some(ty)
    }

    fn assign(&mut self, target: &mut Expr, value: &mut Expr, ctx: Ctx) {
        let tt = self.target(target, ctx);
        let vt = self.expr(value, ctx);
        if let (Some(tt), Some(_)) = (tt, vt) {
            self.coerce(value, &tt, "assignment");
        }
    }

    fn block(&mut self, stmts: &mut [Stmt]) {
        for s in stmts {
            self.stmt(s);
        }
    }

    fn stmt(&mut self, s: &mut Stmt) {
        let span = s.span;
        match &mut s.kind {
            StmtKind::Assign { target, value } => self.assign(target, value, PLAIN),
            StmtKind::Call(c) => {
                self.call(c, span, PLAIN);
            }
            StmtKind::If {
                cond,
                then_body,
                else_body,
            } => {
                self.condition(cond, PLAIN);
                self.block(then_body);
                if let Some(e) = else_body {
                    self.block(e);
                }
            }
            StmtKind::Switch {
                selector,
                cases,
                default,
                temp,
            } => {
                let sel = self.expr(selector, PLAIN);
                let sel = match sel {
                    Some(t @ (KrlType::Int | KrlType::Char)) => Some(t),
                    Some(t) => {
                        self.error(selector.span, format!("SWITCH selector must be INT or CHAR, found {t}"));
                        None
                    }
                    None => None,
                };
                if let (Some(t), Some(slot)) = (&sel, temp) {
                    self.info.routines[self.routine].slots[*slot as usize].ty = t.clone();
                }
                for c in cases.iter_mut() {
                    for v in &mut c.values {
                        match &sel {
                            Some(t) => {
                                self.expect(v, PLAIN, t, "CASE value");
                            }
                            None => {
                                self.expr(v, PLAIN);
                            }
                        }
                    }
                    self.block(&mut c.body);
                }
                if let Some(d) = default {
                    self.block(d);
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
                let plain_var = matches!(
                    &var.kind,
                    ExprKind::Var(VarRef {
                        resolved: Some(Resolved::Local(_) | Resolved::Global(_)),
                        ..
                    })
                );
                if let Some(t) = self.expr(var, PLAIN) {
                    if !plain_var || t != KrlType::Int {
                        self.error(var.span, format!("FOR counter must be an INT variable, found {t}"));
                    }
                }
                self.expect(from, PLAIN, &KrlType::Int, "FOR bound");
                self.expect(to, PLAIN, &KrlType::Int, "FOR bound");
                if let Some(st) = step {
                    self.expect(st, PLAIN, &KrlType::Int, "FOR step");
                }
                self.block(body);
            }
            StmtKind::While { cond, body } | StmtKind::Repeat { body, cond } => {
                self.condition(cond, PLAIN);
                self.block(body);
            }
            StmtKind::Loop { body } => self.block(body),
            StmtKind::Return(v) => {
                let ret = self.info.routines[self.routine].ret.clone();
                match (v, ret) {
                    (None, None) => {}
                    (Some(e), Some(t)) => {
                        self.expect(e, PLAIN, &t, "RETURN");
                    }
                    (Some(e), None) => {
                        self.expr(e, PLAIN);
                        self.error(span, "RETURN with a value in a procedure");
                    }
                    (None, Some(t)) => self.error(span, format!("RETURN needs a {t} value")),
                }
            }
            StmtKind::Motion {
                kind,
                target,
                blend,
            } => {
                if let Some(t) = self.expr(target, PLAIN) {
                    let ok = match kind {
                        MotionKind::Lin => t.is_struct("POS"),
                        MotionKind::Ptp => t.is_struct("POS") || t.is_struct("AXIS"),
                    };
                    if !ok {
                        let want = match kind {
                            MotionKind::Lin => "POS",
                            MotionKind::Ptp => "AXIS or POS",
                        };
                        self.error(target.span, format!("motion target must be {want}, found {t}"));
                    }
                }
                if *kind == MotionKind::Lin && *blend == Blend::CPtp {
                    self.error(span, "C_PTP blending applies to PTP motions only");
                }
            }
            StmtKind::Trigger { delay, action, .. } => {
                self.expect(delay, PLAIN, &KrlType::Int, "DELAY");
                let action_span = action.span;
                match &mut action.kind {
                    StmtKind::Assign { target, value }
                        if matches!(&target.kind, ExprKind::Index(b, _) if is_device(b, &[Device::Out])) =>
                    {
                        self.assign(target, value, PLAIN);
                    }
                    _ => self.error(action_span, "TRIGGER action must be an assignment to $OUT[...]"),
                }
            }
            StmtKind::InterruptDecl {
                priority,
                cond,
                action,
                ..
            } => {
                if !(1..=32).contains(priority) {
                    self.error(span, format!("interrupt priority must be in 1..32, found {priority}"));
                }
                let ctx = Ctx {
                    globals_only: true,
                    no_calls: true,
                    what: "interrupt condition",
                };
                self.condition(cond, ctx);
                let actx = Ctx {
                    globals_only: true,
                    no_calls: false,
                    what: "interrupt action",
                };
                let action_span = action.span;
                match &mut action.kind {
                    StmtKind::Brake => {}
                    StmtKind::Call(c) => {
                        self.call(c, action_span, actx);
                    }
                    StmtKind::Assign { target, value } => self.assign(target, value, actx),
                    _ => self.error(action_span, "unsupported interrupt action"),
                }
            }
            StmtKind::InterruptSwitch { priority, .. } => {
                if !(1..=32).contains(priority) {
                    self.error(span, format!("interrupt priority must be in 1..32, found {priority}"));
                }
            }
            StmtKind::WaitSec(e) => {
                self.expect(e, PLAIN, &KrlType::Real, "WAIT SEC");
            }
            StmtKind::WaitFor(e) => {
                let ctx = Ctx {
                    globals_only: false,
                    no_calls: true,
                    what: "WAIT FOR condition",
                };
                self.condition(e, ctx);
            }
            StmtKind::Exit
            | StmtKind::Goto { .. }
            | StmtKind::Label { .. }
            | StmtKind::Brake
            | StmtKind::Halt => {}
        }
    }
}
