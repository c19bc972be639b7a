//! Recursive-descent parser. Statements end at end-of-line; after a syntax
//! error the parser skips to the next line and keeps going, so one pass
//! reports every error it can find.

use super::ast::*;
use super::token::{Keyword, Span, Sym, Token, TokenKind};
use crate::diag::Diagnostic;

type PResult<T> = Result<T, Diagnostic>;

/// Keywords that close a statement list.
const BLOCK_END: &[Keyword] = &[
    Keyword::End,
    Keyword::EndFct,
    Keyword::EndIf,
    Keyword::Else,
    Keyword::EndFor,
    Keyword::EndWhile,
    Keyword::Until,
    Keyword::EndLoop,
    Keyword::EndSwitch,
    Keyword::Case,
    Keyword::Default,
];

pub struct Parser<'t> {
    toks: &'t [Token],
    pos: usize,
    errors: Vec<Diagnostic>,
    /// Set when a block terminator was missing; the construct then ends
    /// without an end-of-line of its own.
    unclosed: bool,
}

/// Parse a token stream (as produced by [`tokenize`](super::tokenize)) into a program.
pub fn parse(tokens: &[Token]) -> Result<Program, Vec<Diagnostic>> {
    let mut p = Parser::new(tokens);
    let prog = p.program();
    if p.errors.is_empty() {
        Ok(prog)
    } else {
        Err(p.errors)
    }
}

/// Parse a standalone expression (the whole token stream must be one expression).
pub fn parse_expression(tokens: &[Token]) -> Result<Expr, Diagnostic> {
    let mut p = Parser::new(tokens);
    let e = p.expr()?;
    p.skip_eols();
    if !p.at_eof() {
        return Err(p.unexpected(&["end of expression"]));
    }
    Ok(e)
}

fn found_text(t: &Token) -> String {
    match &t.kind {
        TokenKind::Eol => "end of line".into(),
        TokenKind::Eof => "end of file".into(),
        _ => t.lexeme.clone(),
    }
}

impl<'t> Parser<'t> {
    pub fn new(toks: &'t [Token]) -> Self {
        assert!(
            toks.last().is_some_and(|t| t.kind == TokenKind::Eof),
            "token stream must end with Eof"
        );
        Parser {
            toks,
            pos: 0,
            errors: Vec::new(),
            unclosed: false,
        }
    }

    fn peek(&self) -> &'t Token {
        &self.toks[self.pos.min(self.toks.len() - 1)]
    }

    fn peek_at(&self, n: usize) -> &'t Token {
        &self.toks[(self.pos + n).min(self.toks.len() - 1)]
    }

    fn bump(&mut self) -> &'t Token {
        let t = self.peek();
        if self.pos < self.toks.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn prev_span(&self) -> Span {
        if self.pos == 0 {
            self.peek().span
        } else {
            self.toks[self.pos - 1].span
        }
    }

    fn at_eof(&self) -> bool {
        self.peek().kind == TokenKind::Eof
    }

    fn at_kw(&self, kw: Keyword) -> bool {
        self.peek().is_kw(kw)
    }

    fn at_sym(&self, s: Sym) -> bool {
        self.peek().is_sym(s)
    }

    fn eat_kw(&mut self, kw: Keyword) -> bool {
        if self.at_kw(kw) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn eat_sym(&mut self, s: Sym) -> bool {
        if self.at_sym(s) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn unexpected(&self, expected: &[&str]) -> Diagnostic {
        let t = self.peek();
        Diagnostic::error(
            t.span,
            format!("expected {}, found {}", expected.join(" or "), found_text(t)),
        )
    }

    fn expect_kw(&mut self, kw: Keyword) -> PResult<&'t Token> {
        if self.at_kw(kw) {
            Ok(self.bump())
        } else {
            Err(self.unexpected(&[kw.as_str()]))
        }
    }

    fn expect_sym(&mut self, s: Sym) -> PResult<&'t Token> {
        if self.at_sym(s) {
            Ok(self.bump())
        } else {
            Err(self.unexpected(&[&format!("'{}'", s.as_str())]))
        }
    }

    fn expect_ident(&mut self) -> PResult<&'t Token> {
        if self.peek().kind == TokenKind::Ident {
            Ok(self.bump())
        } else {
            Err(self.unexpected(&["identifier"]))
        }
    }

    fn expect_int(&mut self) -> PResult<(i32, Span)> {
        let neg = self.at_sym(Sym::Minus);
        let start = self.peek().span;
        if neg {
            self.bump();
        }
        match self.peek().kind {
            TokenKind::Int(v) => {
                let span = start.to(self.bump().span);
                Ok((if neg { -v } else { v }, span))
            }
            _ => Err(self.unexpected(&["integer literal"])),
        }
    }

    fn skip_eols(&mut self) {
        while self.peek().kind == TokenKind::Eol {
            self.bump();
        }
    }

    /// Statement terminator: end of line or end of file.
    fn expect_eol(&mut self) -> PResult<()> {
        match self.peek().kind {
            TokenKind::Eol => {
                self.bump();
                Ok(())
            }
            TokenKind::Eof => Ok(()),
            _ => Err(self.unexpected(&["end of line"])),
        }
    }

    fn sync_to_eol(&mut self) {
        while !matches!(self.peek().kind, TokenKind::Eol | TokenKind::Eof) {
            self.bump();
        }
        self.skip_eols();
    }

    fn at_block_end(&self) -> bool {
        self.at_eof() || BLOCK_END.iter().any(|k| self.at_kw(*k))
    }

    // ---- program structure ----

    fn program(&mut self) -> Program {
        let start = self.peek().span;
        let mut decls = Vec::new();
        let mut routines = Vec::new();
        loop {
            self.skip_eols();
            if self.at_eof() {
                break;
            }
            let global = self.at_kw(Keyword::Global)
                && matches!(self.peek_at(1).kind, TokenKind::Keyword(Keyword::Def | Keyword::DefFct));
            if global {
                self.bump();
            }
            if self.at_kw(Keyword::Def) || self.at_kw(Keyword::DefFct) {
                match self.routine(global) {
                    Ok(r) => routines.push(r),
                    Err(e) => {
                        self.errors.push(e);
                        self.recover_routine();
                    }
                }
            } else if self.at_decl_start() {
                match self.decl() {
                    Ok(d) => decls.push(d),
                    Err(e) => {
                        self.errors.push(e);
                        self.sync_to_eol();
                    }
                }
            } else {
                self.errors.push(self.unexpected(&["DEF", "DEFFCT", "DECL"]));
                self.sync_to_eol();
            }
        }
        if routines.is_empty() && self.errors.is_empty() {
            self.errors.push(Diagnostic::error(
                self.peek().span,
                "expected DEF or DEFFCT, found end of file: a program needs at least one routine",
            ));
        }
        Program {
            decls,
            routines,
            span: start.to(self.peek().span),
        }
    }

    /// After a broken routine header: skip to the matching END/ENDFCT.
    fn recover_routine(&mut self) {
        while !self.at_eof() && !self.at_kw(Keyword::End) && !self.at_kw(Keyword::EndFct) {
            self.bump();
        }
        if !self.at_eof() {
            self.bump();
        }
        self.sync_to_eol();
    }

    fn at_decl_start(&self) -> bool {
        let t = self.peek();
        match &t.kind {
            TokenKind::Keyword(Keyword::Decl | Keyword::Struc) => true,
            TokenKind::Keyword(Keyword::Int | Keyword::Real | Keyword::Bool | Keyword::Char) => true,
            TokenKind::Keyword(Keyword::Global) => true,
            TokenKind::Ident => self.peek_at(1).kind == TokenKind::Ident,
            _ => false,
        }
    }

    fn routine(&mut self, global: bool) -> PResult<Routine> {
        let start = self.peek().span;
        let is_fct = self.at_kw(Keyword::DefFct);
        self.bump();
        let kind = if is_fct {
            RoutineKind::Func(self.type_expr()?)
        } else {
            RoutineKind::Proc
        };
        let name = self.expect_ident()?.lexeme.clone();
        self.expect_sym(Sym::LParen)?;
        let mut params = Vec::new();
        if !self.at_sym(Sym::RParen) {
            loop {
                let t = self.expect_ident()?;
                let mut span = t.span;
                let mut mode = ParamMode::In;
                if self.eat_sym(Sym::Colon) {
                    if self.eat_kw(Keyword::In) {
                        mode = ParamMode::In;
                    } else if self.eat_kw(Keyword::Out) {
                        mode = ParamMode::Out;
                    } else {
                        return Err(self.unexpected(&["IN", "OUT"]));
                    }
                    span = span.to(self.prev_span());
                }
                params.push(Param {
                    name: t.lexeme.clone(),
                    mode,
                    span,
                });
                if !self.eat_sym(Sym::Comma) {
                    break;
                }
            }
        }
        self.expect_sym(Sym::RParen)?;
        self.expect_eol()?;

        let mut decls = Vec::new();
        loop {
            self.skip_eols();
            let interrupt_decl =
                self.at_kw(Keyword::Interrupt) && self.peek_at(1).is_kw(Keyword::Decl);
            if interrupt_decl {
                match self.statement() {
                    Ok(s) => decls.push(Decl::Interrupt(s)),
                    Err(e) => {
                        self.errors.push(e);
                        self.sync_to_eol();
                    }
                }
            } else if self.at_decl_start() {
                match self.decl() {
                    Ok(d) => decls.push(d),
                    Err(e) => {
                        self.errors.push(e);
                        self.sync_to_eol();
                    }
                }
            } else {
                break;
            }
        }
        let body = self.block();
        let end_kw = if is_fct { Keyword::EndFct } else { Keyword::End };
        if !self.at_kw(end_kw) {
            let e = self.unexpected(&[end_kw.as_str()]);
            self.errors.push(e);
            // skip the stray terminator so the outer loop makes progress
            if !self.at_eof() {
                self.bump();
            }
            self.recover_routine();
        } else {
            self.bump();
            if let Err(e) = self.expect_eol() {
                self.errors.push(e);
                self.sync_to_eol();
            }
        }
        Ok(Routine {
            kind,
            global,
            name,
            params,
            decls,
            body,
            span: start.to(self.prev_span()),
            slot_count: None,
        })
    }

    fn type_expr(&mut self) -> PResult<TypeExpr> {
        let t = self.peek();
        let ty = match &t.kind {
            TokenKind::Keyword(Keyword::Int) => TypeExpr::Int,
            TokenKind::Keyword(Keyword::Real) => TypeExpr::Real,
            TokenKind::Keyword(Keyword::Bool) => TypeExpr::Bool,
            TokenKind::Keyword(Keyword::Char) => TypeExpr::Char,
            TokenKind::Ident => TypeExpr::Named(t.lexeme.clone()),
            _ => return Err(self.unexpected(&["type name"])),
        };
        self.bump();
        Ok(ty)
    }

    fn at_type(&self) -> bool {
        matches!(
            self.peek().kind,
            TokenKind::Keyword(Keyword::Int | Keyword::Real | Keyword::Bool | Keyword::Char)
                | TokenKind::Ident
        )
    }

    fn decl(&mut self) -> PResult<Decl> {
        let start = self.peek().span;
        self.eat_kw(Keyword::Global);
        if self.eat_kw(Keyword::Struc) {
            let name = self.expect_ident()?.lexeme.clone();
            let mut fields = Vec::new();
            let mut ty = self.type_expr()?;
            loop {
                let f = self.expect_ident()?;
                fields.push(StructField {
                    ty: ty.clone(),
                    name: f.lexeme.clone(),
                    span: f.span,
                });
                if !self.eat_sym(Sym::Comma) {
                    break;
                }
                // a type followed by a name starts a new field group
                if self.at_type() && self.peek_at(1).kind == TokenKind::Ident {
                    ty = self.type_expr()?;
                }
            }
            let span = start.to(self.prev_span());
            self.expect_eol()?;
            return Ok(Decl::Struct(StructDecl { name, fields, span }));
        }
        self.eat_kw(Keyword::Decl);
        let ty = self.type_expr()?;
        let mut names = Vec::new();
        loop {
            let t = self.expect_ident()?;
            let mut span = t.span;
            let mut array_len = None;
            if self.eat_sym(Sym::LBracket) {
                let (n, _) = self.expect_int()?;
                self.expect_sym(Sym::RBracket)?;
                array_len = Some(n);
                span = span.to(self.prev_span());
            }
            names.push(DeclName {
                name: t.lexeme.clone(),
                array_len,
                span,
                slot: None,
            });
            if !self.eat_sym(Sym::Comma) {
                break;
            }
        }
        let span = start.to(self.prev_span());
        self.expect_eol()?;
        Ok(Decl::Var(VarDecl { ty, names, span }))
    }

    // ---- statements ----

    /// Statements up to (not including) a block-closing keyword.
    fn block(&mut self) -> Vec<Stmt> {
        let mut out = Vec::new();
        loop {
            self.skip_eols();
            if self.at_block_end() {
                return out;
            }
            if self.at_decl_start() {
                let t = self.peek();
                self.errors.push(Diagnostic::error(
                    t.span,
                    format!("declaration '{}' after the first statement", found_text(t)),
                ));
                self.sync_to_eol();
                continue;
            }
            match self.statement() {
                Ok(s) => out.push(s),
                Err(e) => {
                    self.errors.push(e);
                    self.sync_to_eol();
                }
            }
        }
    }

    /// Parse a block and its closing keyword, reporting a missing terminator
    /// at the offending token without consuming it.
    fn block_until(&mut self, end: Keyword) -> (Vec<Stmt>, Span) {
        let body = self.block();
        if self.at_kw(end) {
            let sp = self.bump().span;
            (body, sp)
        } else {
            let e = self.unexpected(&[end.as_str()]);
            self.errors.push(e);
            self.unclosed = true;
            (body, self.prev_span())
        }
    }

    fn statement(&mut self) -> PResult<Stmt> {
        let t = self.peek();
        let start = t.span;
        // label
        if t.kind == TokenKind::Ident && self.peek_at(1).is_sym(Sym::Colon) {
            self.bump();
            self.bump();
            let span = start.to(self.prev_span());
            if self.peek().kind == TokenKind::Eol {
                self.bump();
            }
            return Ok(Stmt::new(
                StmtKind::Label {
                    name: t.lexeme.clone(),
                    id: None,
                },
                span,
            ));
        }
        let kind = match &t.kind {
            TokenKind::Keyword(kw) => *kw,
            TokenKind::Ident | TokenKind::SysVar => {
                let s = self.simple_statement()?;
                self.expect_eol()?;
                return Ok(s);
            }
            _ => return Err(self.unexpected(&["statement"])),
        };
        let stmt = match kind {
            Keyword::If => {
                self.bump();
                let cond = self.expr()?;
                self.expect_kw(Keyword::Then)?;
                self.expect_eol()?;
                let then_body = self.block();
                let else_body = if self.eat_kw(Keyword::Else) {
                    self.expect_eol()?;
                    Some(self.block())
                } else {
                    None
                };
                let (_, end) = self.block_until_terminator(Keyword::EndIf);
                Stmt::new(
                    StmtKind::If {
                        cond,
                        then_body,
                        else_body,
                    },
                    start.to(end),
                )
            }
            Keyword::Switch => {
                self.bump();
                let selector = self.expr()?;
                self.expect_eol()?;
                self.skip_eols();
                let mut cases = Vec::new();
                let mut default = None;
                loop {
                    self.skip_eols();
                    if self.at_kw(Keyword::Case) {
                        let cstart = self.bump().span;
                        let mut values = vec![self.expr()?];
                        while self.eat_sym(Sym::Comma) {
                            values.push(self.expr()?);
                        }
                        self.expect_eol()?;
                        let body = self.block();
                        cases.push(SwitchCase {
                            values,
                            body,
                            span: cstart.to(self.prev_span()),
                        });
                    } else if self.at_kw(Keyword::Default) && default.is_none() {
                        self.bump();
                        self.expect_eol()?;
                        default = Some(self.block());
                    } else {
                        break;
                    }
                }
                let (_, end) = self.block_until_terminator(Keyword::EndSwitch);
                Stmt::new(
                    StmtKind::Switch {
                        selector,
                        cases,
                        default,
                        temp: None,
                    },
                    start.to(end),
                )
            }
            Keyword::For => {
                self.bump();
                let v = self.expect_ident()?;
                let var = Expr::new(
                    ExprKind::Var(VarRef {
                        name: v.lexeme.clone(),
                        resolved: None,
                    }),
                    v.span,
                );
                self.expect_sym(Sym::Assign)?;
                let from = self.expr()?;
                self.expect_kw(Keyword::To)?;
                let to = self.expr()?;
                let step = if self.eat_kw(Keyword::Step) {
                    Some(self.expr()?)
                } else {
                    None
                };
                self.expect_eol()?;
                let (body, end) = self.block_until(Keyword::EndFor);
                Stmt::new(
                    StmtKind::For {
                        var,
                        from,
                        to,
                        step,
                        body,
                        temps: None,
                    },
                    start.to(end),
                )
            }
            Keyword::While => {
                self.bump();
                let cond = self.expr()?;
                self.expect_eol()?;
                let (body, end) = self.block_until(Keyword::EndWhile);
                Stmt::new(StmtKind::While { cond, body }, start.to(end))
            }
            Keyword::Repeat => {
                self.bump();
                self.expect_eol()?;
                let body = self.block();
                self.expect_kw(Keyword::Until)?;
                let cond = self.expr()?;
                Stmt::new(StmtKind::Repeat { body, cond }, start.to(self.prev_span()))
            }
            Keyword::Loop => {
                self.bump();
                self.expect_eol()?;
                let (body, end) = self.block_until(Keyword::EndLoop);
                Stmt::new(StmtKind::Loop { body }, start.to(end))
            }
            Keyword::Exit => {
                self.bump();
                Stmt::new(StmtKind::Exit, start)
            }
            Keyword::Goto => {
                self.bump();
                let l = self.expect_ident()?;
                Stmt::new(
                    StmtKind::Goto {
                        label: l.lexeme.clone(),
                        target: None,
                    },
                    start.to(l.span),
                )
            }
            Keyword::Return => {
                self.bump();
                let value = if matches!(self.peek().kind, TokenKind::Eol | TokenKind::Eof) {
                    None
                } else {
                    Some(self.expr()?)
                };
                Stmt::new(StmtKind::Return(value), start.to(self.prev_span()))
            }
            Keyword::Ptp | Keyword::Lin => {
                self.bump();
                let target = self.expr()?;
                let blend = if self.eat_kw(Keyword::CDis) {
                    Blend::CDis
                } else if self.eat_kw(Keyword::CPtp) {
                    Blend::CPtp
                } else {
                    Blend::None
                };
                let mk = if kind == Keyword::Ptp {
                    MotionKind::Ptp
                } else {
                    MotionKind::Lin
                };
                Stmt::new(
                    StmtKind::Motion {
                        kind: mk,
                        target,
                        blend,
                    },
                    start.to(self.prev_span()),
                )
            }
            Keyword::Trigger => {
                self.bump();
                self.expect_kw(Keyword::When)?;
                self.expect_kw(Keyword::Distance)?;
                self.expect_sym(Sym::Assign)?;
                let (distance, dspan) = self.expect_int()?;
                if distance != 0 && distance != 1 {
                    return Err(Diagnostic::error(dspan, "DISTANCE must be 0 or 1"));
                }
                self.expect_kw(Keyword::Delay)?;
                self.expect_sym(Sym::Assign)?;
                let delay = self.expr()?;
                self.expect_kw(Keyword::Do)?;
                let action = self.simple_statement()?;
                Stmt::new(
                    StmtKind::Trigger {
                        distance,
                        delay,
                        action: Box::new(action),
                    },
                    start.to(self.prev_span()),
                )
            }
            Keyword::Interrupt => {
                self.bump();
                if self.eat_kw(Keyword::Decl) {
                    let (priority, _) = self.expect_int()?;
                    self.expect_kw(Keyword::When)?;
                    let cond = self.expr()?;
                    self.expect_kw(Keyword::Do)?;
                    let action = if self.at_kw(Keyword::Brake) {
                        Stmt::new(StmtKind::Brake, self.bump().span)
                    } else {
                        self.simple_statement()?
                    };
                    Stmt::new(
                        StmtKind::InterruptDecl {
                            priority,
                            cond,
                            action: Box::new(action),
                            id: None,
                        },
                        start.to(self.prev_span()),
                    )
                } else {
                    let on = if self.eat_kw(Keyword::On) {
                        true
                    } else if self.eat_kw(Keyword::Off) {
                        false
                    } else {
                        return Err(self.unexpected(&["DECL", "ON", "OFF"]));
                    };
                    let (priority, _) = self.expect_int()?;
                    Stmt::new(
                        StmtKind::InterruptSwitch { priority, on },
                        start.to(self.prev_span()),
                    )
                }
            }
            Keyword::Brake => {
                self.bump();
                Stmt::new(StmtKind::Brake, start)
            }
            Keyword::Wait => {
                self.bump();
                if self.eat_kw(Keyword::Sec) {
                    let e = self.expr()?;
                    Stmt::new(StmtKind::WaitSec(e), start.to(self.prev_span()))
                } else if self.eat_kw(Keyword::For) {
                    let e = self.expr()?;
                    Stmt::new(StmtKind::WaitFor(e), start.to(self.prev_span()))
                } else {
                    return Err(self.unexpected(&["SEC", "FOR"]));
                }
            }
            Keyword::Halt => {
                self.bump();
                Stmt::new(StmtKind::Halt, start)
            }
            _ => return Err(self.unexpected(&["statement"])),
        };
        if std::mem::take(&mut self.unclosed) {
            return Ok(stmt);
        }
        self.expect_eol()?;
        Ok(stmt)
    }

    fn block_until_terminator(&mut self, end: Keyword) -> ((), Span) {
        if self.at_kw(end) {
            let sp = self.bump().span;
            ((), sp)
        } else {
            let e = self.unexpected(&[end.as_str()]);
            self.errors.push(e);
            self.unclosed = true;
            ((), self.prev_span())
        }
    }

    /// Assignment or routine call.
    fn simple_statement(&mut self) -> PResult<Stmt> {
        let start = self.peek().span;
        if self.peek().kind == TokenKind::Ident && self.peek_at(1).is_sym(Sym::LParen) {
            let name = self.bump().lexeme.clone();
            let args = self.call_args()?;
            return Ok(Stmt::new(
                StmtKind::Call(CallExpr {
                    name,
                    args,
                    target: None,
                }),
                start.to(self.prev_span()),
            ));
        }
        if !matches!(self.peek().kind, TokenKind::Ident | TokenKind::SysVar) {
            return Err(self.unexpected(&["identifier", "system variable"]));
        }
        let target = self.postfix()?;
        self.expect_sym(Sym::Assign)?;
        let value = self.expr()?;
        Ok(Stmt::new(
            StmtKind::Assign { target, value },
            start.to(self.prev_span()),
        ))
    }

    fn call_args(&mut self) -> PResult<Vec<Expr>> {
        self.expect_sym(Sym::LParen)?;
        let mut args = Vec::new();
        if !self.at_sym(Sym::RParen) {
            loop {
                args.push(self.expr()?);
                if !self.eat_sym(Sym::Comma) {
                    break;
                }
            }
        }
        self.expect_sym(Sym::RParen)?;
        Ok(args)
    }

    // ---- expressions ----
    // OR < EXOR < AND < NOT < relational < additive < multiplicative < unary minus

    pub fn expr(&mut self) -> PResult<Expr> {
        self.binary_level(0)
    }

    fn level_op(&self, level: usize) -> Option<BinOp> {
        let t = self.peek();
        match (level, &t.kind) {
            (0, TokenKind::Keyword(Keyword::Or)) => Some(BinOp::Or),
            (1, TokenKind::Keyword(Keyword::Exor)) => Some(BinOp::Exor),
            (2, TokenKind::Keyword(Keyword::And)) => Some(BinOp::And),
            (3, TokenKind::Sym(s)) => match s {
                Sym::EqEq => Some(BinOp::Eq),
                Sym::Ne => Some(BinOp::Ne),
                Sym::Lt => Some(BinOp::Lt),
                Sym::Le => Some(BinOp::Le),
                Sym::Gt => Some(BinOp::Gt),
                Sym::Ge => Some(BinOp::Ge),
                _ => None,
            },
            (4, TokenKind::Sym(Sym::Plus)) => Some(BinOp::Add),
            (4, TokenKind::Sym(Sym::Minus)) => Some(BinOp::Sub),
            (5, TokenKind::Sym(Sym::Star)) => Some(BinOp::Mul),
            (5, TokenKind::Sym(Sym::Slash)) => Some(BinOp::Div),
            _ => None,
        }
    }

    fn binary_level(&mut self, level: usize) -> PResult<Expr> {
        if level == 6 {
            return self.unary_minus();
        }
        let mut lhs = self.operand(level)?;
        while let Some(op) = self.level_op(level) {
            self.bump();
            let rhs = self.operand(level)?;
            let span = lhs.span.to(rhs.span);
            lhs = Expr::new(ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)), span);
        }
        Ok(lhs)
    }

    fn operand(&mut self, level: usize) -> PResult<Expr> {
        if level == 2 {
            self.not_level()
        } else {
            self.binary_level(level + 1)
        }
    }

    /// Prefix NOT sits between AND and the relational operators.
    fn not_level(&mut self) -> PResult<Expr> {
        if self.at_kw(Keyword::Not) {
            let start = self.bump().span;
            let inner = self.not_level()?;
            let span = start.to(inner.span);
            return Ok(Expr::new(ExprKind::Unary(UnOp::Not, Box::new(inner)), span));
        }
        self.binary_level(3)
    }

    fn unary_minus(&mut self) -> PResult<Expr> {
        if self.at_sym(Sym::Minus) {
            let start = self.bump().span;
            let inner = self.unary_minus()?;
            let span = start.to(inner.span);
            return Ok(Expr::new(ExprKind::Unary(UnOp::Neg, Box::new(inner)), span));
        }
        self.postfix()
    }

    fn postfix(&mut self) -> PResult<Expr> {
        let mut e = self.primary()?;
        loop {
            if self.eat_sym(Sym::LBracket) {
                let idx = self.expr()?;
                let end = self.expect_sym(Sym::RBracket)?.span;
                let span = e.span.to(end);
                e = Expr::new(ExprKind::Index(Box::new(e), Box::new(idx)), span);
            } else if self.at_sym(Sym::Dot) {
                self.bump();
                let f = self.expect_ident()?;
                let span = e.span.to(f.span);
                e = Expr::new(ExprKind::Field(Box::new(e), f.lexeme.clone(), None), span);
            } else {
                return Ok(e);
            }
        }
    }

    fn primary(&mut self) -> PResult<Expr> {
        let t = self.peek();
        let span = t.span;
        let kind = match &t.kind {
            TokenKind::Int(v) => {
                self.bump();
                ExprKind::Int(*v)
            }
            TokenKind::Real(v) => {
                self.bump();
                ExprKind::Real(*v)
            }
            TokenKind::Str(s) => {
                self.bump();
                ExprKind::Str(s.clone())
            }
            TokenKind::Keyword(Keyword::True) => {
                self.bump();
                ExprKind::Bool(true)
            }
            TokenKind::Keyword(Keyword::False) => {
                self.bump();
                ExprKind::Bool(false)
            }
            TokenKind::Sym(Sym::LParen) => {
                self.bump();
                let inner = self.expr()?;
                let end = self.expect_sym(Sym::RParen)?.span;
                let mut inner = inner;
                inner.span = span.to(end);
                return Ok(inner);
            }
            TokenKind::Sym(Sym::LBrace) => return self.aggregate(),
            TokenKind::Ident => {
                self.bump();
                if self.at_sym(Sym::LParen) {
                    let args = self.call_args()?;
                    return Ok(Expr::new(
                        ExprKind::Call(CallExpr {
                            name: t.lexeme.clone(),
                            args,
                            target: None,
                        }),
                        span.to(self.prev_span()),
                    ));
                }
                ExprKind::Var(VarRef {
                    name: t.lexeme.clone(),
                    resolved: None,
                })
            }
            TokenKind::SysVar => {
                self.bump();
                ExprKind::Var(VarRef {
                    name: t.lexeme.clone(),
                    resolved: None,
                })
            }
            _ => return Err(self.unexpected(&["expression"])),
        };
        Ok(Expr::new(kind, span))
    }

    fn aggregate(&mut self) -> PResult<Expr> {
        let start = self.expect_sym(Sym::LBrace)?.span;
        let tag = self.expect_ident()?.lexeme.clone();
        self.expect_sym(Sym::Colon)?;
        let mut fields = Vec::new();
        if !self.at_sym(Sym::RBrace) {
            loop {
                let f = self.expect_ident()?;
                let value = self.expr()?;
                let span = f.span.to(value.span);
                fields.push(AggField {
                    name: f.lexeme.clone(),
                    value,
                    span,
                    ordinal: None,
                });
                if !self.eat_sym(Sym::Comma) {
                    break;
                }
            }
        }
        let end = self.expect_sym(Sym::RBrace)?.span;
        Ok(Expr::new(ExprKind::Aggregate { tag, fields }, start.to(end)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::tokenize;

    fn parse_src(src: &str) -> Result<Program, Vec<Diagnostic>> {
        parse(&tokenize(src).unwrap())
    }

    fn pexpr(src: &str) -> Expr {
        parse_expression(&tokenize(src).unwrap()).unwrap()
    }

    fn show(e: &Expr) -> String {
        match &e.kind {
            ExprKind::Int(v) => v.to_string(),
            ExprKind::Bool(b) => if *b { "TRUE" } else { "FALSE" }.into(),
            ExprKind::Var(v) => v.name.clone(),
            ExprKind::Index(b, i) => format!("Index({},{})", show(b), show(i)),
            ExprKind::Unary(UnOp::Not, x) => format!("Not({})", show(x)),
            ExprKind::Unary(UnOp::Neg, x) => format!("Neg({})", show(x)),
            ExprKind::Binary(op, a, b) => format!("{:?}({},{})", op, show(a), show(b)),
            other => format!("{other:?}"),
        }
    }

    #[test]
    fn precedence_basic() {
        assert_eq!(show(&pexpr("2+3*4")), "Add(2,Mul(3,4))");
        assert_eq!(show(&pexpr("$IN[1] == TRUE")), "Eq(Index($IN,1),TRUE)");
        assert_eq!(show(&pexpr("NOT a AND b")), "And(Not(A),B)");
        assert_eq!(show(&pexpr("a - b - c")), "Sub(Sub(A,B),C)");
        assert_eq!(show(&pexpr("-a * b")), "Mul(Neg(A),B)");
        assert_eq!(show(&pexpr("(2+3)*4")), "Mul(Add(2,3),4)");
        assert_eq!(show(&pexpr("NOT a == b")), "Not(Eq(A,B))");
    }

    #[test]
    fn dangling_operator_and_parens() {
        assert!(parse_expression(&tokenize("1 +").unwrap()).is_err());
        assert!(parse_expression(&tokenize("(1 + 2").unwrap()).is_err());
        assert!(parse_expression(&tokenize("1 + 2)").unwrap()).is_err());
    }

    #[test]
    fn minimal_routine() {
        let p = parse_src("DEF p()\nEND").unwrap();
        assert_eq!(p.routines.len(), 1);
        assert!(p.routines[0].decls.is_empty());
        assert!(p.routines[0].body.is_empty());
    }

    #[test]
    fn missing_endfor_reported_at_end_token() {
        let src = "DEF p()\nFOR i=1 TO 3\nEND";
        let errs = parse_src(src).unwrap_err();
        assert_eq!(errs.len(), 1);
        assert!(errs[0].message.contains("expected ENDFOR"), "{}", errs[0].message);
        assert_eq!(errs[0].span.line, 3);
        assert_eq!(errs[0].span.col, 1);
    }

    #[test]
    fn multiple_errors_reported() {
        let src = "DEF p()\nDECL INT i\ni = = 2\ni = 3 +\nEND";
        let errs = parse_src(src).unwrap_err();
        assert_eq!(errs.len(), 2);
        assert_eq!(errs[0].span.line, 3);
        assert_eq!(errs[1].span.line, 4);
    }

    #[test]
    fn params_functions_and_labels() {
        let src = "DEFFCT INT twice(x:IN, y:OUT)\nDECL INT x, y\ny = x\nRETURN x*2\nENDFCT\nDEF m()\nDECL INT k\nk = twice(2, k)\nagain:\nGOTO again\nEND";
        let p = parse_src(src).unwrap();
        assert_eq!(p.routines.len(), 2);
        assert_eq!(p.routines[0].params[1].mode, ParamMode::Out);
        assert!(matches!(p.routines[1].body[1].kind, StmtKind::Label { .. }));
    }

    #[test]
    fn struc_groups() {
        let p = parse_src("STRUC PAIR INT a, b, REAL c\nDEF m()\nEND").unwrap();
        let Decl::Struct(s) = &p.decls[0] else { panic!() };
        let names: Vec<_> = s.fields.iter().map(|f| (f.name.as_str(), f.ty.clone())).collect();
        assert_eq!(
            names,
            vec![("A", TypeExpr::Int), ("B", TypeExpr::Int), ("C", TypeExpr::Real)]
        );
    }

    #[test]
    fn declaration_after_statement_rejected() {
        let errs = parse_src("DEF m()\nDECL INT a\na = 1\nDECL INT b\nEND").unwrap_err();
        assert!(errs[0].message.contains("after the first statement"));
    }
}
