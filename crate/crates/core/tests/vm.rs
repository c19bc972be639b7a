use krlf_core::bytecode::{self, assemble, compile, disassemble, Image, Listing, Loaded};
use krlf_core::engine::{Outcome, RunOptions};
use krlf_core::runtime::{IoScript, RtError, ScriptRecord, Status};
use krlf_core::semantics::check_source;
use krlf_core::tree;

const EXAMPLE: &str = include_str!("../corpus/example.src");

fn both(src: &str, opts: &RunOptions) -> (Outcome, Outcome) {
    let prog = check_source(src).unwrap_or_else(|e| panic!("{e:?}"));
    let t = tree::run(&prog, opts).expect("runnable");
    let v = bytecode::run(&bytecode::load(&prog), opts).expect("runnable");
    (t, v)
}

fn assert_same(src: &str, opts: RunOptions) -> Outcome {
    let (t, v) = both(src, &opts);
    // Error locations differ by design ("line:col" versus "ROUTINE+offset").
    assert_eq!(strip(&t.status), strip(&v.status), "status differs for\n{src}");
    assert_eq!(t.trace, v.trace, "trace differs for\n{src}");
    assert_eq!(t.snapshot, v.snapshot, "snapshot differs for\n{src}");
    assert_eq!(t.jumps, v.jumps, "jumps differ for\n{src}");
    v
}

fn strip(s: &Status) -> Status {
    match s {
        Status::Failed(e) => Status::Failed(RtError {
            location: None,
            ..e.clone()
        }),
        s => s.clone(),
    }
}

fn script(records: &[(u64, u32, bool)]) -> IoScript {
    IoScript::new(
        records
            .iter()
            .map(|&(t_ms, index, value)| ScriptRecord { t_ms, index, value })
            .collect(),
    )
}

fn listing_of(src: &str) -> String {
    compile(&check_source(src).unwrap()).to_string()
}

#[test]
fn golden_assignment() {
    let text = listing_of("DEF p()\nDECL INT a\na = 1\nEND\n");
    assert!(text.contains("    POLL\n    LDC_I 1\n    ST 0\n"), "{text}");
}

#[test]
fn golden_empty_procedure() {
    let l = Listing::parse(".routine P slots=0\n    RET\n").unwrap();
    let img = assemble(&l).unwrap();
    assert_eq!(img.code, vec![64]);
    Loaded::load(img).unwrap();
}

#[test]
fn golden_for_lowering() {
    let text = listing_of("DEF p()\nDECL INT i\nFOR i = 1 TO 3\nENDFOR\nEND\n");
    let body: Vec<&str> = text
        .lines()
        .skip_while(|l| !l.starts_with(".routine P"))
        .filter(|l| l.starts_with("    ") || l.ends_with(':'))
        .map(str::trim)
        .collect();
    let ops: Vec<&str> = body.iter().map(|l| l.split(' ').next().unwrap()).collect();
    assert_eq!(
        ops,
        vec![
            "POLL", "LDC_I", "LDC_I", "ST", "ST", body[5], "POLL", "LD", "LD", "CLE_I", "JZ", "LD",
            "LDC_I", "ADD_I", "ST", "JMP", body[16], "RET"
        ],
        "{text}"
    );
}

#[test]
fn listing_round_trip_is_a_fixpoint() {
    let img = bytecode::build(&check_source(EXAMPLE).unwrap());
    let text = disassemble(&img).unwrap().to_string();
    let again = assemble(&Listing::parse(&text).unwrap()).unwrap();
    assert_eq!(img, again);
    assert_eq!(disassemble(&again).unwrap().to_string(), text);
    assert_eq!(Image::from_bytes(&img.to_bytes()).unwrap(), img);
}

#[test]
fn truncated_image_names_offset() {
    let bytes = bytecode::build(&check_source(EXAMPLE).unwrap()).to_bytes();
    let cut = bytes.len() - 3;
    let err = Image::from_bytes(&bytes[..cut]).unwrap_err();
    assert!(err.to_string().starts_with("malformed image at offset "), "{err}");
    assert!(err.offset <= cut);
}

#[test]
fn example_image_is_compact() {
    let prog = check_source(EXAMPLE).unwrap();
    let img = bytecode::build(&prog);
    Loaded::load(img.clone()).unwrap();
    let ast = format!("{:?}", prog.ast);
    assert!(img.code.len() < ast.len(), "{} >= {}", img.code.len(), ast.len());
}

#[test]
fn division_by_zero_has_vm_location() {
    let prog = check_source("DEF p()\nDECL INT a, b\na = 1 / b\nEND\n").unwrap();
    let o = bytecode::run(&bytecode::load(&prog), &RunOptions::default()).unwrap();
    match o.status {
        Status::Failed(e) => {
            assert_eq!(e.message, "division by zero");
            assert!(e.location.unwrap().starts_with("P+"));
        }
        s => panic!("{s:?}"),
    }
}

#[test]
fn example_matches_tree() {
    for inputs in [[true, true], [false, true], [true, false], [false, false]] {
        let opts = RunOptions {
            script: script(&[(0, 1, inputs[0]), (0, 2, inputs[1])]),
            ..RunOptions::default()
        };
        assert_same(EXAMPLE, opts);
    }
    // Input 2 drops mid-motion and the interrupt brakes.
    assert_same(
        EXAMPLE,
        RunOptions {
            script: script(&[(0, 1, true), (0, 2, true), (1400, 2, false)]),
            ..RunOptions::default()
        },
    );
}

const PROGRAMS: &[&str] = &[
    "DEF p()\nEND\n",
    "DEF p()\nDECL INT i, s\ns = 0\nFOR i = 1 TO 10 STEP 3\ns = s + i\nENDFOR\nEND\n",
    "DEF p()\nDECL INT i, s\nFOR i = 10 TO 1 STEP -2\ns = s * 2 + i\nENDFOR\nEND\n",
    "DEF p()\nDECL INT i, s, k\nk = -1\nFOR i = 5 TO 0 STEP k\ns = s + i\nENDFOR\nEND\n",
    "DEF p()\nDECL INT i, k\nFOR i = 1 TO 3 STEP k\nENDFOR\nEND\n",
    "DEF p()\nDECL INT n\nn = 0\nLOOP\nn = n + 1\nIF n == 5 THEN\nGOTO done\nENDIF\nENDLOOP\ndone:\nn = n * 10\nEND\n",
    "DEF p()\nDECL INT a[3]\na[0] = 1\nEND\n",
    "DEF p()\nDECL INT a\na = 2147483647\na = a + 1\nEND\n",
    "DEF p()\nDECL INT a, b\na = 3\nswap(a, b)\nb = b + sq(4)\nEND\n\
     DEF swap(x:IN, y:OUT)\nDECL INT x, y\ny = x * 2\nEND\n\
     DEFFCT INT sq(v:IN)\nDECL INT v\nRETURN v * v\nENDFCT\n",
    "DEF p()\nr()\nEND\nDEF r()\nr()\nEND\n",
    "DEF p()\n$OUT[4] = TRUE\nHALT\n$OUT[5] = TRUE\nEND\n",
    "DEF p()\nDECL INT k, r\nk = 2\nSWITCH k\nCASE 1\nr = 10\nCASE 2, 3\nr = 20\nDEFAULT\nr = 30\nENDSWITCH\nEND\n",
    "DEF p()\nDECL INT k, r\nk = 9\nSWITCH k\nCASE 1\nr = 10\nDEFAULT\nr = 30\nENDSWITCH\nEND\n",
    "DEF p()\nDECL INT n\nWHILE n < 7\nn = n + 2\nENDWHILE\nREPEAT\nn = n - 1\nUNTIL n < 3\nEND\n",
    "DEF p()\nDECL REAL x\nDECL BOOL b\nx = 1.5 * 4 - 2\nb = (x > 3.5) AND NOT (x == 4.5) EXOR FALSE\nEND\n",
    "DEF p()\nDECL POS q\nq = $POS_ACT\nq.X = q.X + 10\nLIN q\nq.Z = q.Z - 5\nPTP q C_PTP\nEND\n",
    "DEF p()\nDECL AXIS a\na = {AXIS: A1 10,A2 -80,A3 80,A4 0,A5 20,A6 0}\nPTP a\nEND\n",
    "DEF p()\nDECL INT n\nn = f(3)\nEND\nDEFFCT INT f(x:IN)\nDECL INT x\nIF x > 0 THEN\nRETURN x + f(x - 1)\nENDIF\nEND\n",
    "DEF p()\nDECL INT n\nn = f(3)\nEND\nDEFFCT INT f(x:IN)\nDECL INT x\nIF x > 0 THEN\nRETURN x + f(x - 1)\nENDIF\nRETURN 0\nENDFCT\n",
    "DEF p()\nDECL INT a[4], i\nFOR i = 1 TO 4\na[i] = i * i\nENDFOR\ni = a[2] + a[4]\nEND\n",
    "DEF p()\nDECL CHAR c[5]\nc[1] = \"A\"\nEND\n",
    "DEF p()\n$OUT[3] = TRUE\nWAIT SEC 0.25\n$OUT[3] = $OUT[3] AND $IN[1]\nEND\n",
];

#[test]
fn programs_match_tree() {
    let mut rejected = Vec::new();
    for src in PROGRAMS {
        if check_source(src).is_ok() {
            assert_same(src, RunOptions { record_jumps: true, ..RunOptions::default() });
        } else {
            rejected.push(*src);
        }
    }
    assert!(rejected.len() <= 1, "{rejected:#?}");
}

#[test]
fn interrupts_match_tree() {
    let src = "DEF p()\nDECL INT n\nINTERRUPT DECL 5 WHEN $IN[3] DO bump()\nINTERRUPT DECL 7 WHEN $IN[4] DO BRAKE\n\
               INTERRUPT ON 5\nINTERRUPT ON 7\nPTP {AXIS: A1 90,A2 -90,A3 90,A4 0,A5 0,A6 0}\nWAIT SEC 0.1\nEND\n\
               DEF bump()\n$OUT[9] = TRUE\nEND\n";
    let o = assert_same(
        src,
        RunOptions {
            script: script(&[(40, 3, true), (300, 4, true)]),
            ..RunOptions::default()
        },
    );
    assert_eq!(o.status, Status::Ok);
}

#[test]
fn wait_for_matches_tree() {
    assert_same(
        "DEF p()\nWAIT FOR $IN[5]\n$OUT[1] = TRUE\nEND\n",
        RunOptions {
            script: script(&[(37, 5, true)]),
            ..RunOptions::default()
        },
    );
}
