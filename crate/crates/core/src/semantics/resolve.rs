use crate::diag::Diagnostic;
use crate::frontend::ast::*;
use crate::frontend::Span;

use super::scope::{ScopeId, ScopeOwner, ScopeTree, Symbol, SymbolKind, ROOT};
use super::types::{axis_def, pos_def, KrlType, StructDef};
use super::{system_variables, Analysis, RoutineInfo, SlotInfo, SysStorage, FIRST_USER_GLOBAL};

use std::sync::Arc;

/// Build the scope hierarchy, assign slots and resolve every name.
pub fn build_scopes(program: &mut Program) -> Result<Analysis, Vec<Diagnostic>> {
    let mut b = Builder {
        tree: ScopeTree::new(),
        errors: Vec::new(),
        globals: Vec::new(),
        routines: Vec::new(),
        interrupt_count: 0,
        labels: Vec::new(),
    };
    b.seed_root();
    b.global_decls(&program.decls);
    write_decl_slots(&mut program.decls, &b.tree, ROOT);

    for (i, r) in program.routines.iter().enumerate() {
        let sym = Symbol {
            name: r.name.clone(),
            kind: SymbolKind::Routine(i),
            ty: None,
            storage: None,
            scope: ROOT,
            span: r.span,
        };
        b.insert(ROOT, sym);
    }
    for (i, r) in program.routines.iter_mut().enumerate() {
        let scope = b.tree.add_scope(ROOT, ScopeOwner::Routine(i));
        debug_assert_eq!(scope, b.tree.routine_scope(i));
        b.routine_header(i, r, scope);
        write_decl_slots(&mut r.decls, &b.tree, scope);
    }
    // Return types are known only now; patch them into the routine symbols.
    for (i, r) in program.routines.iter().enumerate() {
        if let Some(ret) = b.routines[i].ret.clone() {
            if let Some(sym) = b.tree.entry_mut(ROOT, &r.name) {
                if sym.kind == SymbolKind::Routine(i) {
                    sym.ty = Some(ret);
                }
            }
        }
    }
    for (i, r) in program.routines.iter_mut().enumerate() {
        let scope = b.tree.routine_scope(i);
        let mut cx = BodyCx {
            routine: i,
            scope,
            loop_depth: 0,
            open_blocks: vec![0],
            next_block: 1,
            temp_counter: 0,
        };
        for d in &mut r.decls {
            if let Decl::Interrupt(s) = d {
                b.stmt(&mut cx, s);
            }
        }
        b.block(&mut cx, &mut r.body, 0);
        r.slot_count = Some(b.routines[i].slots.len() as u16);
    }

    if b.errors.is_empty() {
        Ok(Analysis {
            scopes: b.tree,
            globals: b.globals,
            routines: b.routines,
            interrupt_count: b.interrupt_count,
        })
    } else {
        b.errors.sort_by_key(|d| (d.span.line, d.span.col));
        Err(b.errors)
    }
}

/// Copy slot numbers from the symbol table into declaration nodes.
fn write_decl_slots(decls: &mut [Decl], tree: &ScopeTree, scope: ScopeId) {
    for d in decls {
        if let Decl::Var(v) = d {
            for n in &mut v.names {
                n.slot = tree
                    .get_local(scope, &n.name)
                    .filter(|s| s.span == n.span)
                    .and_then(Symbol::slot);
            }
        }
    }
}

struct LabelSite {
    name: String,
    id: u32,
    block: u32,
    span: Span,
}

struct Builder {
    tree: ScopeTree,
    errors: Vec<Diagnostic>,
    globals: Vec<SlotInfo>,
    routines: Vec<RoutineInfo>,
    interrupt_count: u32,
    /// Per-routine label sites, indexed by routine.
    labels: Vec<Vec<LabelSite>>,
}

struct BodyCx {
    routine: usize,
    scope: ScopeId,
    loop_depth: u32,
    open_blocks: Vec<u32>,
    next_block: u32,
    temp_counter: u32,
}

impl Builder {
    fn error(&mut self, span: Span, msg: impl Into<String>) {
        self.errors.push(Diagnostic::error(span, msg));
    }

    fn insert(&mut self, scope: ScopeId, sym: Symbol) -> bool {
        let span = sym.span;
        let name = sym.name.clone();
        match self.tree.insert(scope, sym) {
            Ok(()) => true,
            Err(prev) => {
                let msg = if prev.span.line > 0 {
                    format!(
                        "duplicate declaration of {name} (previously declared at line {})",
                        prev.span.line
                    )
                } else {
                    format!("duplicate declaration of {name}")
                };
                self.error(span, msg);
                false
            }
        }
    }

    fn seed_root(&mut self) {
        for sv in system_variables() {
            let storage = match sv.storage {
                SysStorage::Memory(slot) => {
                    debug_assert_eq!(slot as usize, self.globals.len());
                    self.globals.push(SlotInfo {
                        name: sv.name.to_string(),
                        ty: sv.ty.clone(),
                        hidden: false,
                    });
                    Resolved::Global(slot)
                }
                SysStorage::Device(d) => Resolved::Device(d),
            };
            self.insert(
                ROOT,
                Symbol {
                    name: sv.name.to_string(),
                    kind: SymbolKind::SystemVariable,
                    ty: Some(sv.ty),
                    storage: Some(storage),
                    scope: ROOT,
                    span: Span::default(),
                },
            );
        }
        debug_assert_eq!(self.globals.len(), FIRST_USER_GLOBAL as usize);
        for def in [axis_def(), pos_def()] {
            self.insert(
                ROOT,
                Symbol {
                    name: def.name.clone(),
                    kind: SymbolKind::Type,
                    ty: Some(KrlType::Struct(def)),
                    storage: None,
                    scope: ROOT,
                    span: Span::default(),
                },
            );
        }
    }

    fn resolve_type(&mut self, scope: ScopeId, t: &TypeExpr, span: Span) -> Option<KrlType> {
        Some(match t {
            TypeExpr::Int => KrlType::Int,
            TypeExpr::Real => KrlType::Real,
            TypeExpr::Bool => KrlType::Bool,
            TypeExpr::Char => KrlType::Char,
            TypeExpr::Named(n) => match self.tree.lookup(scope, n) {
                Some(Symbol {
                    kind: SymbolKind::Type,
                    ty: Some(ty),
                    ..
                }) => ty.clone(),
                Some(_) => {
                    self.error(span, format!("{n} is not a type"));
                    return None;
                }
                None => {
                    self.error(span, format!("unknown type {n}"));
                    return None;
                }
            },
        })
    }

    fn struct_decl(&mut self, scope: ScopeId, s: &StructDecl) {
        let mut fields: Vec<(String, KrlType)> = Vec::new();
        for f in &s.fields {
            let Some(ty) = self.resolve_type(scope, &f.ty, f.span) else {
                continue;
            };
            if fields.iter().any(|(n, _)| *n == f.name) {
                self.error(f.span, format!("duplicate field {} in {}", f.name, s.name));
                continue;
            }
            fields.push((f.name.clone(), ty));
        }
        let def = Arc::new(StructDef {
            name: s.name.clone(),
            fields,
        });
        self.insert(
            scope,
            Symbol {
                name: s.name.clone(),
                kind: SymbolKind::Type,
                ty: Some(KrlType::Struct(def)),
                storage: None,
                scope,
                span: s.span,
            },
        );
    }

    fn var_type(&mut self, scope: ScopeId, v: &VarDecl, n: &DeclName) -> Option<KrlType> {
        let base = self.resolve_type(scope, &v.ty, v.span)?;
        match n.array_len {
            None => Some(base),
            Some(len) if len > 0 => Some(KrlType::Array(Box::new(base), len as u32)),
            Some(len) => {
                self.error(n.span, format!("array length must be positive, found {len}"));
                None
            }
        }
    }

    fn global_decls(&mut self, decls: &[Decl]) {
        for d in decls {
            match d {
                Decl::Struct(s) => self.struct_decl(ROOT, s),
                Decl::Var(v) => {
                    for n in &v.names {
                        let Some(ty) = self.var_type(ROOT, v, n) else {
                            continue;
                        };
                        let slot = self.globals.len() as u16;
                        let ok = self.insert(
                            ROOT,
                            Symbol {
                                name: n.name.clone(),
                                kind: SymbolKind::Variable,
                                ty: Some(ty.clone()),
                                storage: Some(Resolved::Global(slot)),
                                scope: ROOT,
                                span: n.span,
                            },
                        );
                        if ok {
                            self.globals.push(SlotInfo {
                                name: n.name.clone(),
                                ty,
                                hidden: false,
                            });
                        }
                    }
                }
                Decl::Interrupt(s) => {
                    self.error(s.span, "INTERRUPT DECL must appear inside a routine")
                }
            }
        }
    }

    fn routine_header(&mut self, index: usize, r: &Routine, scope: ScopeId) {
        let mut slots: Vec<Option<SlotInfo>> = vec![None; r.params.len()];
        let mut modes = Vec::new();
        for (i, p) in r.params.iter().enumerate() {
            if r.params[..i].iter().any(|q| q.name == p.name) {
                self.error(p.span, format!("duplicate parameter {}", p.name));
            }
            modes.push(p.mode);
        }
        for d in &r.decls {
            match d {
                Decl::Struct(s) => self.struct_decl(scope, s),
                Decl::Var(v) => {
                    for n in &v.names {
                        let Some(ty) = self.var_type(scope, v, n) else {
                            continue;
                        };
                        let param = r.params.iter().position(|p| p.name == n.name);
                        let slot = param.unwrap_or(slots.len());
                        let kind = match param {
                            Some(i) => SymbolKind::Parameter(r.params[i].mode),
                            None => SymbolKind::Variable,
                        };
                        let ok = self.insert(
                            scope,
                            Symbol {
                                name: n.name.clone(),
                                kind,
                                ty: Some(ty.clone()),
                                storage: Some(Resolved::Local(slot as u16)),
                                scope,
                                span: n.span,
                            },
                        );
                        if !ok {
                            continue;
                        }
                        let info = SlotInfo {
                            name: n.name.clone(),
                            ty,
                            hidden: false,
                        };
                        if param.is_some() {
                            slots[slot] = Some(info);
                        } else {
                            slots.push(Some(info));
                        }
                    }
                }
                Decl::Interrupt(_) => {}
            }
        }
        let mut params = Vec::new();
        for (i, p) in r.params.iter().enumerate() {
            match &slots[i] {
                Some(info) => params.push((p.mode, info.ty.clone())),
                None => {
                    self.error(p.span, format!("parameter {} has no DECL", p.name));
                    slots[i] = Some(SlotInfo {
                        name: p.name.clone(),
                        ty: KrlType::Int,
                        hidden: false,
                    });
                    params.push((p.mode, KrlType::Int));
                }
            }
        }
        let ret = match &r.kind {
            RoutineKind::Proc => None,
            RoutineKind::Func(t) => self.resolve_type(scope, t, r.span),
        };
        self.routines.push(RoutineInfo {
            name: r.name.clone(),
            params,
            ret,
            slots: slots.into_iter().map(|s| s.expect("slot filled")).collect(),
        });
        debug_assert_eq!(self.routines.len(), index + 1);

        let mut sites = Vec::new();
        let mut counter = 1;
        collect_labels(&r.body, 0, &mut counter, &mut sites);
        for site in &sites {
            let span = site.span;
            self.insert(
                scope,
                Symbol {
                    name: site.name.clone(),
                    kind: SymbolKind::Label(site.id),
                    ty: None,
                    storage: None,
                    scope,
                    span,
                },
            );
        }
        self.labels.push(sites);
    }

    fn new_temp(&mut self, cx: &mut BodyCx, what: &str) -> u16 {
        let slots = &mut self.routines[cx.routine].slots;
        let slot = slots.len() as u16;
        slots.push(SlotInfo {
            name: format!("#{what}{}", cx.temp_counter),
            ty: KrlType::Int,
            hidden: true,
        });
        slot
    }

    fn block(&mut self, cx: &mut BodyCx, stmts: &mut [Stmt], id: u32) {
        cx.open_blocks.push(id);
        for s in stmts {
            self.stmt(cx, s);
        }
        cx.open_blocks.pop();
    }

    fn child(&mut self, cx: &mut BodyCx, stmts: &mut [Stmt]) {
        let id = cx.next_block;
        cx.next_block += 1;
        self.block(cx, stmts, id);
    }

    fn loop_body(&mut self, cx: &mut BodyCx, stmts: &mut [Stmt]) {
        cx.loop_depth += 1;
        self.child(cx, stmts);
        cx.loop_depth -= 1;
    }

    fn stmt(&mut self, cx: &mut BodyCx, s: &mut Stmt) {
        let span = s.span;
        match &mut s.kind {
            StmtKind::Assign { target, value } => {
                self.expr(cx, target);
                self.expr(cx, value);
            }
            StmtKind::Call(c) => self.call(cx, c, span),
            StmtKind::If {
                cond,
                then_body,
                else_body,
            } => {
                self.expr(cx, cond);
                self.child(cx, then_body);
                if let Some(e) = else_body {
                    self.child(cx, e);
                }
            }
            StmtKind::Switch {
                selector,
                cases,
                default,
                temp,
            } => {
                self.expr(cx, selector);
                *temp = Some(self.new_temp(cx, "SWITCH"));
                cx.temp_counter += 1;
                for c in cases.iter_mut() {
                    for v in &mut c.values {
                        self.expr(cx, v);
                    }
                    self.child(cx, &mut c.body);
                }
                if let Some(d) = default {
                    self.child(cx, d);
                }
            }
            StmtKind::For {
                var,
                from,
                to,
                step,
                body,
                temps,
            } => {
                self.expr(cx, var);
                self.expr(cx, from);
                self.expr(cx, to);
                if let Some(st) = step {
                    self.expr(cx, st);
                }
                let bound = self.new_temp(cx, "FOR_TO");
                let stride = self.new_temp(cx, "FOR_STEP");
                cx.temp_counter += 1;
                *temps = Some((bound, stride));
                self.loop_body(cx, body);
            }
            StmtKind::While { cond, body } | StmtKind::Repeat { body, cond } => {
                self.expr(cx, cond);
                self.loop_body(cx, body);
            }
            StmtKind::Loop { body } => self.loop_body(cx, body),
            StmtKind::Exit => {
                if cx.loop_depth == 0 {
                    self.error(span, "EXIT outside of a loop");
                }
            }
            StmtKind::Goto { label, target } => {
                *target = None;
                let site = self.labels[cx.routine]
                    .iter()
                    .find(|l| l.name == *label)
                    .map(|l| (l.id, l.block));
                match site {
                    Some((id, block)) if cx.open_blocks.contains(&block) => *target = Some(id),
                    Some(_) => self.error(
                        span,
                        format!("GOTO {label} jumps into a nested block"),
                    ),
                    None => {
                        let elsewhere = self
                            .labels
                            .iter()
                            .enumerate()
                            .any(|(i, ls)| i != cx.routine && ls.iter().any(|l| l.name == *label));
                        if elsewhere {
                            self.error(
                                span,
                                format!("GOTO target {label} is a label in a different routine"),
                            );
                        } else {
                            self.error(span, format!("undefined label {label}"));
                        }
                    }
                }
            }
            StmtKind::Label { name, id } => {
                *id = self.labels[cx.routine]
                    .iter()
                    .find(|l| l.name == *name)
                    .map(|l| l.id);
            }
            StmtKind::Return(v) => {
                if let Some(e) = v {
                    self.expr(cx, e);
                }
            }
            StmtKind::Motion { target, .. } => self.expr(cx, target),
            StmtKind::Trigger { delay, action, .. } => {
                self.expr(cx, delay);
                self.stmt(cx, action);
            }
            StmtKind::InterruptDecl {
                cond, action, id, ..
            } => {
                self.expr(cx, cond);
                self.stmt(cx, action);
                *id = Some(self.interrupt_count);
                self.interrupt_count += 1;
            }
            StmtKind::WaitSec(e) | StmtKind::WaitFor(e) => self.expr(cx, e),
            StmtKind::InterruptSwitch { .. } | StmtKind::Brake | StmtKind::Halt => {}
        }
    }

    fn call(&mut self, cx: &mut BodyCx, c: &mut CallExpr, span: Span) {
        c.target = None;
        match self.tree.lookup(cx.scope, &c.name) {
            Some(Symbol {
                kind: SymbolKind::Routine(i),
                ..
            }) => c.target = Some(*i),
            Some(_) => self.error(span, format!("{} is not a routine", c.name)),
            None => self.error(span, format!("undeclared routine {}", c.name)),
        }
        for a in &mut c.args {
            self.expr(cx, a);
        }
    }

    fn expr(&mut self, cx: &mut BodyCx, e: &mut Expr) {
        let span = e.span;
        match &mut e.kind {
            ExprKind::Var(v) => {
                v.resolved = None;
                match self.tree.lookup(cx.scope, &v.name) {
                    Some(sym) if sym.is_variable() => v.resolved = sym.storage,
                    Some(_) => self.error(span, format!("{} is not a variable", v.name)),
                    None => self.error(span, format!("undeclared identifier {}", v.name)),
                }
            }
            ExprKind::Index(a, b) | ExprKind::Binary(_, a, b) => {
                self.expr(cx, a);
                self.expr(cx, b);
            }
            ExprKind::Field(a, _, _) | ExprKind::Unary(_, a) | ExprKind::IntToReal(a) => {
                self.expr(cx, a)
            }
            ExprKind::Call(c) => self.call(cx, c, span),
            ExprKind::Aggregate { fields, .. } => {
                for f in fields {
                    self.expr(cx, &mut f.value);
                }
            }
            ExprKind::Int(_) | ExprKind::Real(_) | ExprKind::Bool(_) | ExprKind::Str(_) => {}
        }
    }
}

/// Record every label occurrence with the block that holds it; repeated
/// names share the first id and are rejected when inserted. Blocks are
/// numbered in the same preorder the resolver walks them.
fn collect_labels(stmts: &[Stmt], block: u32, counter: &mut u32, out: &mut Vec<LabelSite>) {
    for s in stmts {
        if let StmtKind::Label { name, .. } = &s.kind {
            let id = match out.iter().find(|l| l.name == *name) {
                Some(l) => l.id,
                None => out.iter().map(|l| l.id + 1).max().unwrap_or(0),
            };
            out.push(LabelSite {
                name: name.clone(),
                id,
                block,
                span: s.span,
            });
        }
        for child in s.child_blocks() {
            let id = *counter;
            *counter += 1;
            collect_labels(child, id, counter, out);
        }
    }
}
