use krlf_core::frontend::ast::*;
use krlf_core::frontend::parse_source;
use krlf_core::semantics::{analyze, build_scopes, check_source, check_types, KrlType, SymbolKind};

const EXAMPLE: &str = include_str!("../corpus/example.src");

fn errors(src: &str) -> Vec<String> {
    match check_source(src) {
        Ok(_) => Vec::new(),
        Err(es) => es.iter().map(|d| d.render("t.src")).collect(),
    }
}

fn first_assign_value(p: &Program, routine: usize) -> &Expr {
    p.routines[routine]
        .body
        .iter()
        .find_map(|s| match &s.kind {
            StmtKind::Assign { value, .. } => Some(value),
            _ => None,
        })
        .expect("assignment")
}

#[test]
fn example_checks_clean() {
    let checked = check_source(EXAMPLE).expect("example program must type-check");
    assert_eq!(checked.ast.routines.len(), 1);
    assert_eq!(checked.info.routines[0].name, "EXAMPLE");
}

#[test]
fn global_visible_from_routine() {
    let src = "DECL INT a\nDEF m()\n  a = 5\nEND\n";
    let checked = check_source(src).unwrap();
    let scope = checked.info.scopes.routine_scope(0);
    let sym = checked.info.scopes.lookup(scope, "A").expect("A visible in m");
    assert_eq!(sym.scope, krlf_core::semantics::ROOT);
    assert_eq!(sym.kind, SymbolKind::Variable);
    match &checked.ast.routines[0].body[0].kind {
        StmtKind::Assign { target, .. } => match &target.kind {
            ExprKind::Var(v) => assert!(matches!(v.resolved, Some(Resolved::Global(_)))),
            other => panic!("{other:?}"),
        },
        other => panic!("{other:?}"),
    }
}

#[test]
fn duplicate_declaration_rejected() {
    let errs = errors("DEF p()\n  DECL INT x\n  DECL INT x\nEND\n");
    assert_eq!(errs.len(), 1, "{errs:?}");
    assert!(errs[0].starts_with("t.src:3:"), "{errs:?}");
    assert!(errs[0].contains("duplicate declaration of X"));
}

#[test]
fn out_resolves_to_root_system_variable() {
    let src = "DEF p()\n  $OUT[1] = TRUE\nEND\nDEF q()\n  $OUT[2] = FALSE\nEND\n";
    let checked = check_source(src).unwrap();
    for i in 0..2 {
        let scope = checked.info.scopes.routine_scope(i);
        let sym = checked.info.scopes.lookup(scope, "$OUT").unwrap();
        assert_eq!(sym.kind, SymbolKind::SystemVariable);
        assert_eq!(sym.scope, krlf_core::semantics::ROOT);
    }
}

#[test]
fn int_to_real_assignment_is_widened() {
    let checked = check_source("DEF p()\n  DECL REAL r\n  r = 3\nEND\n").unwrap();
    let v = first_assign_value(&checked.ast, 0);
    assert_eq!(v.ty, Some(KrlType::Real));
    match &v.kind {
        ExprKind::IntToReal(inner) => assert_eq!(inner.kind, ExprKind::Int(3)),
        other => panic!("expected widening node, got {other:?}"),
    }
}

#[test]
fn real_to_int_rejected() {
    let errs = errors("DEF p()\n  DECL INT i\n  i = 1.5\nEND\n");
    assert_eq!(errs.len(), 1, "{errs:?}");
    assert!(errs[0].starts_with("t.src:3:7: error:"), "{errs:?}");
    assert!(errs[0].contains("INT") && errs[0].contains("REAL"), "{errs:?}");
}

#[test]
fn non_bool_condition_rejected() {
    let errs = errors("DEF p()\n  IF 1 THEN\n  ENDIF\nEND\n");
    assert_eq!(errs.len(), 1);
    assert!(errs[0].contains("condition must be BOOL, found INT"), "{errs:?}");
    assert!(errs[0].starts_with("t.src:2:6:"), "{errs:?}");
}

#[test]
fn bool_arithmetic_rejected() {
    let errs = errors("DEF p()\n  DECL BOOL b\n  DECL INT i\n  i = b + 1\nEND\n");
    assert_eq!(errs.len(), 1);
    assert!(errs[0].contains("BOOL"), "{errs:?}");
}

#[test]
fn char_conversions_rejected() {
    assert_eq!(errors("DEF p()\n  DECL CHAR c\n  DECL INT i\n  i = c\nEND\n").len(), 1);
    assert_eq!(errors("DEF p()\n  DECL CHAR c\n  c = 65\nEND\n").len(), 1);
    assert!(errors("DEF p()\n  DECL CHAR c\n  c = \"A\"\n  IF c == \"B\" THEN\n  ENDIF\nEND\n").is_empty());
    assert!(errors("DEF p()\n  DECL CHAR s[8]\n  s = \"HELLO\"\nEND\n").is_empty());
    assert_eq!(errors("DEF p()\n  DECL CHAR s[3]\n  s = \"HELLO\"\nEND\n").len(), 1);
}

#[test]
fn local_shadows_global() {
    let src = "DECL INT x\nDEF p()\n  DECL REAL x\n  x = 1.5\nEND\nDEF q()\n  x = 2\nEND\n";
    let checked = check_source(src).unwrap();
    let target = |r: usize| match &checked.ast.routines[r].body[0].kind {
        StmtKind::Assign { target, .. } => match &target.kind {
            ExprKind::Var(v) => v.resolved,
            _ => None,
        },
        _ => None,
    };
    assert!(matches!(target(0), Some(Resolved::Local(_))));
    assert!(matches!(target(1), Some(Resolved::Global(_))));
}

#[test]
fn analysis_is_idempotent() {
    let once = check_source(EXAMPLE).unwrap();
    let mut again = once.ast.clone();
    let mut info = build_scopes(&mut again).unwrap();
    check_types(&mut again, &mut info).unwrap();
    assert_eq!(once.ast, again);
    assert_eq!(once.info, info);
}

#[test]
fn undeclared_identifier_positioned() {
    let errs = errors("DEF p()\n  y = 1\nEND\n");
    assert_eq!(errs, vec!["t.src:2:3: error: undeclared identifier Y"]);
}

#[test]
fn goto_rules() {
    assert!(errors("DEF p()\n  DECL INT i\n  LOOP\n    GOTO done\n  ENDLOOP\ndone:\n  i = 1\nEND\n").is_empty());
    let into_block = errors("DEF p()\n  GOTO inner\n  LOOP\ninner:\n  ENDLOOP\nEND\n");
    assert_eq!(into_block.len(), 1);
    assert!(into_block[0].contains("nested block"));
    let other = errors("DEF p()\n  GOTO there\nEND\nDEF q()\nthere:\nEND\n");
    assert_eq!(other.len(), 1);
    assert!(other[0].contains("different routine"), "{other:?}");
    let collide = errors("DEF p()\n  DECL INT a\na:\nEND\n");
    assert_eq!(collide.len(), 1);
}

#[test]
fn exit_outside_loop_rejected() {
    assert_eq!(errors("DEF p()\n  EXIT\nEND\n").len(), 1);
}

#[test]
fn aggregate_rules() {
    assert!(errors("DEF p()\n  DECL POS p1\n  p1 = {POS: X 1, Y 2.5}\nEND\n").is_empty());
    let bad = errors("DEF p()\n  DECL POS p1\n  p1 = {POS: Q 1}\nEND\n");
    assert_eq!(bad.len(), 1);
    assert!(bad[0].contains("no field Q"));
    let wrong_tag = errors("DEF p()\n  DECL POS p1\n  p1 = {AXIS: A1 1}\nEND\n");
    assert_eq!(wrong_tag.len(), 1);
}

#[test]
fn interrupt_restrictions() {
    let ok = "DECL BOOL flag\nDEF p()\n  INTERRUPT DECL 3 WHEN $IN[2] == FALSE DO BRAKE\n  INTERRUPT DECL 4 WHEN flag DO h()\nEND\nDEF h()\nEND\n";
    assert!(errors(ok).is_empty(), "{:?}", errors(ok));
    let local = errors("DEF p()\n  DECL BOOL f\n  INTERRUPT DECL 3 WHEN f DO BRAKE\nEND\n");
    assert_eq!(local.len(), 1);
    assert!(local[0].contains("global"));
    let prio = errors("DEF p()\n  INTERRUPT DECL 33 WHEN $IN[1] DO BRAKE\nEND\n");
    assert_eq!(prio.len(), 1);
}

#[test]
fn motion_and_trigger_rules() {
    assert_eq!(errors("DEF p()\n  DECL AXIS a\n  LIN a\nEND\n").len(), 1);
    assert!(errors("DEF p()\n  DECL AXIS a\n  PTP a C_PTP\nEND\n").is_empty());
    assert_eq!(errors("DEF p()\n  DECL INT i\n  TRIGGER WHEN DISTANCE=1 DELAY=0 DO i = 1\nEND\n").len(), 1);
    assert_eq!(errors("DEF p()\n  $IN[1] = TRUE\nEND\n").len(), 1);
}

#[test]
fn parameters_and_calls() {
    let src = "DEF main()\n  DECL INT a\n  DECL REAL r\n  twice(3, a)\n  r = half(a)\nEND\nDEF twice(x:IN, y:OUT)\n  DECL INT x, y\n  y = 2 * x\nEND\nDEFFCT REAL half(v:IN)\n  DECL REAL v\n  RETURN v / 2\nENDFCT\n";
    let checked = check_source(src).unwrap();
    let info = &checked.info.routines[1];
    assert_eq!(info.params.len(), 2);
    assert_eq!(info.slots[0].name, "X");
    let bad = errors("DEF main()\n  twice(1, 2)\nEND\nDEF twice(x:IN, y:OUT)\n  DECL INT x, y\nEND\n");
    assert_eq!(bad.len(), 1);
    assert!(bad[0].contains("OUT argument"));
}

#[test]
fn analyze_consumes_parsed_program() {
    let p = parse_source("DEF p()\nEND\n").unwrap();
    let checked = analyze(p).unwrap();
    assert_eq!(checked.ast.routines[0].slot_count, Some(0));
}
