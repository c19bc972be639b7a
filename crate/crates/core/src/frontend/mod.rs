//! Lexer, parser and printer for the supported KRL subset.

pub mod ast;
mod lexer;
mod parser;
pub mod pretty;
mod token;

pub use lexer::tokenize;
pub use parser::{parse, parse_expression};
pub use pretty::print_program;
pub use token::{Keyword, Span, Sym, Token, TokenKind};

use crate::diag::Diagnostic;

/// Tokenize and parse in one step.
pub fn parse_source(source: &str) -> Result<ast::Program, Vec<Diagnostic>> {
    let tokens = tokenize(source).map_err(|e| vec![e])?;
    parse(&tokens)
}

/// Reset every span so trees can be compared structurally.
pub fn strip_spans(p: &mut ast::Program) {
    use ast::*;

    fn expr(e: &mut Expr) {
        e.span = Span::default();
        match &mut e.kind {
            ExprKind::Index(a, b) | ExprKind::Binary(_, a, b) => {
                expr(a);
                expr(b);
            }
            ExprKind::Field(a, _, _) | ExprKind::Unary(_, a) | ExprKind::IntToReal(a) => expr(a),
            ExprKind::Call(c) => c.args.iter_mut().for_each(expr),
            ExprKind::Aggregate { fields, .. } => {
                for f in fields {
                    f.span = Span::default();
                    expr(&mut f.value);
                }
            }
            _ => {}
        }
    }
    fn block(b: &mut [Stmt]) {
        b.iter_mut().for_each(stmt);
    }
    fn stmt(s: &mut Stmt) {
        s.span = Span::default();
        match &mut s.kind {
            StmtKind::Assign { target, value } => {
                expr(target);
                expr(value);
            }
            StmtKind::Call(c) => c.args.iter_mut().for_each(expr),
            StmtKind::If {
                cond,
                then_body,
                else_body,
            } => {
                expr(cond);
                block(then_body);
                if let Some(e) = else_body {
                    block(e);
                }
            }
            StmtKind::Switch {
                selector,
                cases,
                default,
                ..
            } => {
                expr(selector);
                for c in cases {
                    c.span = Span::default();
                    c.values.iter_mut().for_each(expr);
                    block(&mut c.body);
                }
                if let Some(d) = default {
                    block(d);
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
                expr(var);
                expr(from);
                expr(to);
                if let Some(st) = step {
                    expr(st);
                }
                block(body);
            }
            StmtKind::While { cond, body } | StmtKind::Repeat { body, cond } => {
                expr(cond);
                block(body);
            }
            StmtKind::Loop { body } => block(body),
            StmtKind::Return(Some(e)) | StmtKind::WaitSec(e) | StmtKind::WaitFor(e) => expr(e),
            StmtKind::Motion { target, .. } => expr(target),
            StmtKind::Trigger { delay, action, .. } => {
                expr(delay);
                stmt(action);
            }
            StmtKind::InterruptDecl { cond, action, .. } => {
                expr(cond);
                stmt(action);
            }
            _ => {}
        }
    }
    fn decl(d: &mut Decl) {
        match d {
            Decl::Var(v) => {
                v.span = Span::default();
                for n in &mut v.names {
                    n.span = Span::default();
                }
            }
            Decl::Struct(s) => {
                s.span = Span::default();
                for f in &mut s.fields {
                    f.span = Span::default();
                }
            }
            Decl::Interrupt(s) => stmt(s),
        }
    }

    p.span = Span::default();
    p.decls.iter_mut().for_each(decl);
    for r in &mut p.routines {
        r.span = Span::default();
        for prm in &mut r.params {
            prm.span = Span::default();
        }
        r.decls.iter_mut().for_each(decl);
        block(&mut r.body);
    }
}
