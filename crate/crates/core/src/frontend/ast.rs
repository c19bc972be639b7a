//! Abstract syntax tree. The `ty`/`resolved`/slot fields start out empty and
//! are filled in by the semantic passes; both engines consume the annotated tree.

use super::token::Span;
use crate::semantics::KrlType;

#[derive(Debug, Clone, PartialEq)]
pub struct Program {
    /// Top-level (global) declarations.
    pub decls: Vec<Decl>,
    pub routines: Vec<Routine>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Decl {
    Var(VarDecl),
    Struct(StructDecl),
    /// `INTERRUPT DECL` placed in a declaration section.
    Interrupt(Stmt),
}

#[derive(Debug, Clone, PartialEq)]
pub enum TypeExpr {
    Int,
    Real,
    Bool,
    Char,
    Named(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarDecl {
    pub ty: TypeExpr,
    pub names: Vec<DeclName>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeclName {
    pub name: String,
    pub array_len: Option<i32>,
    pub span: Span,
    /// Frame slot, assigned by scope building.
    pub slot: Option<u16>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StructDecl {
    pub name: String,
    pub fields: Vec<StructField>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StructField {
    pub ty: TypeExpr,
    pub name: String,
    pub span: Span,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamMode {
    In,
    Out,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub mode: ParamMode,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RoutineKind {
    Proc,
    Func(TypeExpr),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Routine {
    pub kind: RoutineKind,
    pub global: bool,
    pub name: String,
    pub params: Vec<Param>,
    pub decls: Vec<Decl>,
    pub body: Vec<Stmt>,
    pub span: Span,
    /// Number of frame slots (locals, params, hidden temporaries).
    pub slot_count: Option<u16>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnOp {
    Neg,
    Not,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Or,
    Exor,
    And,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    Add,
    Sub,
    Mul,
    Div,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Or => "OR",
            BinOp::Exor => "EXOR",
            BinOp::And => "AND",
            BinOp::Eq => "==",
            BinOp::Ne => "<>",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
        }
    }

    pub fn is_relational(self) -> bool {
        matches!(self, BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge)
    }

    pub fn is_logical(self) -> bool {
        matches!(self, BinOp::Or | BinOp::Exor | BinOp::And)
    }
}

/// I/O and robot-state variables served by the runtime instead of memory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Device {
    In,
    Out,
    PosAct,
    AxisAct,
}

/// Storage a name resolved to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Resolved {
    Local(u16),
    Global(u16),
    Device(Device),
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarRef {
    pub name: String,
    pub resolved: Option<Resolved>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CallExpr {
    pub name: String,
    pub args: Vec<Expr>,
    /// Index into `Program::routines`.
    pub target: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggField {
    pub name: String,
    pub value: Expr,
    pub span: Span,
    pub ordinal: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExprKind {
    Int(i32),
    Real(f64),
    Bool(bool),
    Str(String),
    Var(VarRef),
    Index(Box<Expr>, Box<Expr>),
    /// Field access; the ordinal is filled in by the checker.
    Field(Box<Expr>, String, Option<usize>),
    Unary(UnOp, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(CallExpr),
    Aggregate { tag: String, fields: Vec<AggField> },
    /// Implicit INT -> REAL widening inserted by the checker.
    IntToReal(Box<Expr>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    pub kind: ExprKind,
    pub span: Span,
    pub ty: Option<KrlType>,
}

impl Expr {
    pub fn new(kind: ExprKind, span: Span) -> Self {
        Expr { kind, span, ty: None }
    }

    /// Type annotation; panics if the checker has not run.
    pub fn ty(&self) -> &KrlType {
        self.ty.as_ref().expect("expression not type-checked")
    }

    pub fn is_lvalue(&self) -> bool {
        match &self.kind {
            ExprKind::Var(_) => true,
            ExprKind::Index(base, _) | ExprKind::Field(base, _, _) => base.is_lvalue(),
            _ => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MotionKind {
    Ptp,
    Lin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Blend {
    None,
    CDis,
    CPtp,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SwitchCase {
    pub values: Vec<Expr>,
    pub body: Vec<Stmt>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StmtKind {
    Assign {
        target: Expr,
        value: Expr,
    },
    Call(CallExpr),
    If {
        cond: Expr,
        then_body: Vec<Stmt>,
        else_body: Option<Vec<Stmt>>,
    },
    Switch {
        selector: Expr,
        cases: Vec<SwitchCase>,
        default: Option<Vec<Stmt>>,
        /// Hidden slot holding the evaluated selector.
        temp: Option<u16>,
    },
    For {
        var: Expr,
        from: Expr,
        to: Expr,
        step: Option<Expr>,
        body: Vec<Stmt>,
        /// Hidden slots holding the bound and step.
        temps: Option<(u16, u16)>,
    },
    While {
        cond: Expr,
        body: Vec<Stmt>,
    },
    Repeat {
        body: Vec<Stmt>,
        cond: Expr,
    },
    Loop {
        body: Vec<Stmt>,
    },
    Exit,
    Goto {
        label: String,
        target: Option<u32>,
    },
    Label {
        name: String,
        id: Option<u32>,
    },
    Return(Option<Expr>),
    Motion {
        kind: MotionKind,
        target: Expr,
        blend: Blend,
    },
    Trigger {
        distance: i32,
        delay: Expr,
        action: Box<Stmt>,
    },
    InterruptDecl {
        priority: i32,
        cond: Expr,
        action: Box<Stmt>,
        /// Program-wide interrupt declaration id.
        id: Option<u32>,
    },
    InterruptSwitch {
        priority: i32,
        on: bool,
    },
    Brake,
    WaitSec(Expr),
    WaitFor(Expr),
    Halt,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stmt {
    pub kind: StmtKind,
    pub span: Span,
}

impl Stmt {
    pub fn new(kind: StmtKind, span: Span) -> Self {
        Stmt { kind, span }
    }

    /// Nested statement lists, in source order.
    pub fn child_blocks(&self) -> Vec<&Vec<Stmt>> {
        match &self.kind {
            StmtKind::If { then_body, else_body, .. } => {
                let mut v = vec![then_body];
                if let Some(e) = else_body {
                    v.push(e);
                }
                v
            }
            StmtKind::Switch { cases, default, .. } => {
                let mut v: Vec<&Vec<Stmt>> = cases.iter().map(|c| &c.body).collect();
                if let Some(d) = default {
                    v.push(d);
                }
                v
            }
            StmtKind::For { body, .. }
            | StmtKind::While { body, .. }
            | StmtKind::Repeat { body, .. }
            | StmtKind::Loop { body } => vec![body],
            _ => Vec::new(),
        }
    }
}
