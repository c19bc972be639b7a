//! Source printer. Output re-parses to a structurally identical tree.

use std::fmt::Write;

use super::ast::*;

pub fn print_program(p: &Program) -> String {
    let mut out = String::new();
    for d in &p.decls {
        print_decl(&mut out, d, 0);
    }
    for r in &p.routines {
        if !out.is_empty() {
            out.push('\n');
        }
        print_routine(&mut out, r);
    }
    out
}

fn indent(out: &mut String, level: usize) {
    for _ in 0..level {
        out.push_str("  ");
    }
}

pub fn type_name(t: &TypeExpr) -> &str {
    match t {
        TypeExpr::Int => "INT",
        TypeExpr::Real => "REAL",
        TypeExpr::Bool => "BOOL",
        TypeExpr::Char => "CHAR",
        TypeExpr::Named(n) => n,
    }
}

fn print_decl(out: &mut String, d: &Decl, level: usize) {
    match d {
        Decl::Var(v) => {
            indent(out, level);
            let names: Vec<String> = v
                .names
                .iter()
                .map(|n| match n.array_len {
                    Some(len) => format!("{}[{}]", n.name, len),
                    None => n.name.clone(),
                })
                .collect();
            let _ = writeln!(out, "DECL {} {}", type_name(&v.ty), names.join(", "));
        }
        Decl::Struct(s) => {
            indent(out, level);
            let fields: Vec<String> = s
                .fields
                .iter()
                .map(|f| format!("{} {}", type_name(&f.ty), f.name))
                .collect();
            let _ = writeln!(out, "STRUC {} {}", s.name, fields.join(", "));
        }
        Decl::Interrupt(s) => print_stmt(out, s, level),
    }
}

fn print_routine(out: &mut String, r: &Routine) {
    if r.global {
        out.push_str("GLOBAL ");
    }
    match &r.kind {
        RoutineKind::Proc => out.push_str("DEF "),
        RoutineKind::Func(t) => {
            let _ = write!(out, "DEFFCT {} ", type_name(t));
        }
    }
    let params: Vec<String> = r
        .params
        .iter()
        .map(|p| match p.mode {
            ParamMode::In => format!("{}:IN", p.name),
            ParamMode::Out => format!("{}:OUT", p.name),
        })
        .collect();
    let _ = writeln!(out, "{}({})", r.name, params.join(", "));
    for d in &r.decls {
        print_decl(out, d, 1);
    }
    print_block(out, &r.body, 1);
    match r.kind {
        RoutineKind::Proc => out.push_str("END\n"),
        RoutineKind::Func(_) => out.push_str("ENDFCT\n"),
    }
}

fn print_block(out: &mut String, stmts: &[Stmt], level: usize) {
    for s in stmts {
        print_stmt(out, s, level);
    }
}

/// Print a statement that fits on one line (assignment, call, BRAKE).
fn simple(s: &Stmt) -> String {
    match &s.kind {
        StmtKind::Assign { target, value } => format!("{} = {}", expr(target), expr(value)),
        StmtKind::Call(c) => call(c),
        StmtKind::Brake => "BRAKE".into(),
        other => panic!("not a simple statement: {other:?}"),
    }
}

fn print_stmt(out: &mut String, s: &Stmt, level: usize) {
    if let StmtKind::Label { name, .. } = &s.kind {
        indent(out, level.saturating_sub(1));
        let _ = writeln!(out, "{name}:");
        return;
    }
    indent(out, level);
    match &s.kind {
        StmtKind::Assign { .. } | StmtKind::Call(_) | StmtKind::Brake => {
            out.push_str(&simple(s));
            out.push('\n');
        }
        StmtKind::If {
            cond,
            then_body,
            else_body,
        } => {
            let _ = writeln!(out, "IF {} THEN", expr(cond));
            print_block(out, then_body, level + 1);
            if let Some(e) = else_body {
                indent(out, level);
                out.push_str("ELSE\n");
                print_block(out, e, level + 1);
            }
            indent(out, level);
            out.push_str("ENDIF\n");
        }
        StmtKind::Switch {
            selector,
            cases,
            default,
            ..
        } => {
            let _ = writeln!(out, "SWITCH {}", expr(selector));
            for c in cases {
                indent(out, level);
                let vals: Vec<String> = c.values.iter().map(expr).collect();
                let _ = writeln!(out, "CASE {}", vals.join(", "));
                print_block(out, &c.body, level + 1);
            }
            if let Some(d) = default {
                indent(out, level);
                out.push_str("DEFAULT\n");
                print_block(out, d, level + 1);
            }
            indent(out, level);
            out.push_str("ENDSWITCH\n");
        }
        StmtKind::For {
            var,
            from,
            to,
            step,
            body,
            ..
        } => {
            let _ = write!(out, "FOR {} = {} TO {}", expr(var), expr(from), expr(to));
            if let Some(st) = step {
                let _ = write!(out, " STEP {}", expr(st));
            }
            out.push('\n');
            print_block(out, body, level + 1);
            indent(out, level);
            out.push_str("ENDFOR\n");
        }
        StmtKind::While { cond, body } => {
            let _ = writeln!(out, "WHILE {}", expr(cond));
            print_block(out, body, level + 1);
            indent(out, level);
            out.push_str("ENDWHILE\n");
        }
        StmtKind::Repeat { body, cond } => {
            out.push_str("REPEAT\n");
            print_block(out, body, level + 1);
            indent(out, level);
            let _ = writeln!(out, "UNTIL {}", expr(cond));
        }
        StmtKind::Loop { body } => {
            out.push_str("LOOP\n");
            print_block(out, body, level + 1);
            indent(out, level);
            out.push_str("ENDLOOP\n");
        }
        StmtKind::Exit => out.push_str("EXIT\n"),
        StmtKind::Goto { label, .. } => {
            let _ = writeln!(out, "GOTO {label}");
        }
        StmtKind::Label { .. } => unreachable!(),
        StmtKind::Return(v) => match v {
            Some(e) => {
                let _ = writeln!(out, "RETURN {}", expr(e));
            }
            None => out.push_str("RETURN\n"),
        },
        StmtKind::Motion {
            kind,
            target,
            blend,
        } => {
            let k = match kind {
                MotionKind::Ptp => "PTP",
                MotionKind::Lin => "LIN",
            };
            let b = match blend {
                Blend::None => "",
                Blend::CDis => " C_DIS",
                Blend::CPtp => " C_PTP",
            };
            let _ = writeln!(out, "{} {}{}", k, expr(target), b);
        }
        StmtKind::Trigger {
            distance,
            delay,
            action,
        } => {
            let _ = writeln!(
                out,
                "TRIGGER WHEN DISTANCE={} DELAY={} DO {}",
                distance,
                expr(delay),
                simple(action)
            );
        }
        StmtKind::InterruptDecl {
            priority,
            cond,
            action,
            ..
        } => {
            let _ = writeln!(
                out,
                "INTERRUPT DECL {} WHEN {} DO {}",
                priority,
                expr(cond),
                simple(action)
            );
        }
        StmtKind::InterruptSwitch { priority, on } => {
            let _ = writeln!(out, "INTERRUPT {} {}", if *on { "ON" } else { "OFF" }, priority);
        }
        StmtKind::WaitSec(e) => {
            let _ = writeln!(out, "WAIT SEC {}", expr(e));
        }
        StmtKind::WaitFor(e) => {
            let _ = writeln!(out, "WAIT FOR {}", expr(e));
        }
        StmtKind::Halt => out.push_str("HALT\n"),
    }
}

fn call(c: &CallExpr) -> String {
    let args: Vec<String> = c.args.iter().map(expr).collect();
    format!("{}({})", c.name, args.join(", "))
}

fn prec(e: &Expr) -> u8 {
    match &e.kind {
        ExprKind::Binary(op, _, _) => match op {
            BinOp::Or => 0,
            BinOp::Exor => 1,
            BinOp::And => 2,
            BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => 4,
            BinOp::Add | BinOp::Sub => 5,
            BinOp::Mul | BinOp::Div => 6,
        },
        ExprKind::Unary(UnOp::Not, _) => 3,
        ExprKind::Unary(UnOp::Neg, _) => 7,
        ExprKind::IntToReal(inner) => prec(inner),
        ExprKind::Int(v) if *v < 0 => 7,
        ExprKind::Real(v) if v.is_sign_negative() => 7,
        _ => 8,
    }
}

fn wrap(e: &Expr, paren: bool) -> String {
    if paren {
        format!("({})", expr(e))
    } else {
        expr(e)
    }
}

pub fn real_literal(v: f64) -> String {
    let s = format!("{v:?}");
    if s.contains('.') || s.contains('e') || s.contains('E') {
        s
    } else {
        format!("{s}.0")
    }
}

pub fn expr(e: &Expr) -> String {
    match &e.kind {
        ExprKind::Int(v) => v.to_string(),
        ExprKind::Real(v) => real_literal(*v),
        ExprKind::Bool(b) => if *b { "TRUE" } else { "FALSE" }.into(),
        ExprKind::Str(s) => format!("\"{s}\""),
        ExprKind::Var(v) => v.name.clone(),
        ExprKind::Index(b, i) => format!("{}[{}]", wrap(b, prec(b) < 8), expr(i)),
        ExprKind::Field(b, f, _) => format!("{}.{}", wrap(b, prec(b) < 8), f),
        ExprKind::Unary(UnOp::Neg, x) => format!("-{}", wrap(x, prec(x) < 7)),
        ExprKind::Unary(UnOp::Not, x) => format!("NOT {}", wrap(x, prec(x) < 3)),
        ExprKind::Binary(op, a, b) => {
            let p = prec(e);
            format!(
                "{} {} {}",
                wrap(a, prec(a) < p),
                op.symbol(),
                wrap(b, prec(b) <= p)
            )
        }
        ExprKind::Call(c) => call(c),
        ExprKind::Aggregate { tag, fields } => {
            let fs: Vec<String> = fields
                .iter()
                .map(|f| format!("{} {}", f.name, expr(&f.value)))
                .collect();
            format!("{{{}: {}}}", tag, fs.join(", "))
        }
        ExprKind::IntToReal(inner) => expr(inner),
    }
}
