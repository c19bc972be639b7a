use krlf_core::bytecode;
use krlf_core::fuzz::{image_fuzz, type_fuzz, MutantKind};
use krlf_core::gen;
use krlf_core::semantics::check_source;

#[test]
fn accepted_mutants_never_hit_type_errors() {
    let r = type_fuzz(11, 600);
    eprintln!("accepted {} rejected {}", r.accepted, r.rejected);
    assert!(r.type_errors.is_empty(), "{:#?}", r.type_errors);
    assert!(r.disagreements.is_empty(), "{:#?}", r.disagreements);
    assert!(r.accepted >= 100, "{r:?}");
    assert!(r.rejected >= 100, "{r:?}");
}

#[test]
fn verifier_rejects_invalid_mutants() {
    let bases: Vec<_> = (0..40)
        .map(|s| bytecode::build(&check_source(&gen::program(s).source).unwrap()))
        .collect();
    let r = image_fuzz(&bases, 3, 25);
    eprintln!("{:?} executed {}", r.kinds, r.executed);
    assert!(r.escaped.is_empty(), "{:#?}", r.escaped);
    assert!(r.violations.is_empty(), "{:#?}", r.violations);
    assert_eq!(r.invalid_rejection_rate(), 1.0);
    assert!(r.kinds[&MutantKind::OobJump].generated >= 500);
    assert!(r.kinds[&MutantKind::Unbalanced].generated >= 500);
}
