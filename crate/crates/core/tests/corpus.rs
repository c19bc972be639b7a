use krlf_core::bytecode::{self, assemble, disassemble, Listing};
use krlf_core::corpus;
use krlf_core::engine::RunOptions;
use krlf_core::fuzz::{compare, run_both};
use krlf_core::runtime::Status;
use krlf_core::semantics::check_source;

#[test]
fn corpus_runs_identically_on_both_engines() {
    let entries = corpus::load(&corpus::programs_dir()).unwrap();
    assert!(entries.len() >= 50, "{}", entries.len());
    let mut failures = 0;
    for e in &entries {
        let prog = check_source(&e.source).unwrap_or_else(|d| panic!("{}: {d:?}", e.name));
        let opts = RunOptions {
            script: e.script.clone(),
            record_jumps: true,
            ..RunOptions::default()
        };
        let (t, v) = run_both(&prog, &opts).unwrap();
        if let Some(d) = compare(&t, &v) {
            panic!("{}: {d}", e.name);
        }
        let expect_error = e.name.starts_with("err_");
        match &t.status {
            Status::Failed(err) => {
                assert!(expect_error, "{}: {err}", e.name);
                failures += 1;
            }
            _ => assert!(!expect_error, "{} should fail", e.name),
        }
    }
    assert!(failures >= 5);
}

#[test]
fn corpus_listings_round_trip() {
    for e in corpus::load(&corpus::programs_dir()).unwrap() {
        let img = bytecode::build(&check_source(&e.source).unwrap());
        let text = disassemble(&img).unwrap().to_string();
        let again = assemble(&Listing::parse(&text).unwrap()).unwrap();
        assert_eq!(again.to_bytes(), img.to_bytes(), "{}", e.name);
    }
}
