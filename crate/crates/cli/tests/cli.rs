use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn krlf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_krlf"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn corpus(rel: &str) -> String {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/corpus");
    root.join(rel).to_string_lossy().into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p: PathBuf = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

const FIG_IO: &str = "{\"t_ms\":0,\"in\":1,\"value\":true}\n{\"t_ms\":0,\"in\":2,\"value\":true}\n";

#[test]
fn check_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(krlf(&["check", &corpus("example.src")]).status.code(), Some(0));

    let bad = write(dir.path(), "bad.src", "DEF p()\nDECL INT i\ni = 1.5\nEND\n");
    let out = krlf(&["check", &bad]);
    assert_eq!(out.status.code(), Some(2));
    assert!(out.stdout.is_empty());
    let err = String::from_utf8(out.stderr).unwrap();
    assert_eq!(err.lines().count(), 1, "{err}");
    assert!(err.contains(":3:5: error:"), "{err}");

    let missing = dir.path().join("missing.src");
    assert_eq!(krlf(&["check", missing.to_str().unwrap()]).status.code(), Some(64));
}

#[test]
fn check_json_lists_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.src", "DEF p()\nDECL BOOL b\nb = 1 + TRUE\nIF 3 THEN\nENDIF\nEND\n");
    let out = krlf(&["check", "--json", &bad]);
    assert_eq!(out.status.code(), Some(2));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let lines: Vec<u64> = v.as_array().unwrap().iter().map(|d| d["line"].as_u64().unwrap()).collect();
    assert!(lines.contains(&3) && lines.contains(&4), "{v}");
}

#[test]
fn engines_write_identical_traces() {
    let dir = tempfile::tempdir().unwrap();
    let io = write(dir.path(), "in.jsonl", FIG_IO);
    let (a, b) = (dir.path().join("tree.jsonl"), dir.path().join("vm.jsonl"));
    for (engine, path) in [("tree", &a), ("vm", &b)] {
        let out = krlf(&["run", &corpus("example.src"), "--engine", engine, "--io-script", &io, "--trace", path.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        assert!(out.stdout.is_empty());
    }
    let (ta, tb) = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert!(!ta.is_empty());
    assert_eq!(ta, tb);
    // Bit-stable across runs.
    let again = krlf(&["run", &corpus("example.src"), "--io-script", &io]);
    assert_eq!(again.stdout, ta);
}

#[test]
fn empty_program_trace() {
    let out = krlf(&["run", &corpus("programs/empty.src")]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(String::from_utf8(out.stdout).unwrap(), "{\"t_ms\":0,\"event\":\"program_end\",\"status\":\"ok\"}\n");
}

#[test]
fn runtime_errors_exit_one() {
    for engine in ["tree", "vm"] {
        let out = krlf(&["run", &corpus("programs/err_division.src"), "--engine", engine]);
        assert_eq!(out.status.code(), Some(1));
        assert!(String::from_utf8_lossy(&out.stderr).contains("division by zero"));
    }
}

#[test]
fn smaller_advance_flushes_more() {
    let count = |args: &[&str]| {
        let out = krlf(args);
        String::from_utf8(out.stdout).unwrap().matches("\"event\":\"flush\"").count()
    };
    let src = corpus("programs/blend_cdis_chain.src");
    let default = count(&["run", &src]);
    let one = count(&["run", &src, "--advance", "1"]);
    assert!(one > default, "{one} <= {default}");
    assert_eq!(krlf(&["run", &src, "--advance", "0"]).status.code(), Some(64));
}

#[test]
fn sample_interval_from_environment() {
    let src = corpus("programs/ptp_single.src");
    let samples = |env: Option<&str>| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_krlf"));
        cmd.args(["run", &src]);
        if let Some(v) = env {
            cmd.env("KRLF_TRACE_SAMPLES", v);
        }
        String::from_utf8(cmd.output().unwrap().stdout).unwrap().matches("\"sample\"").count()
    };
    let (fine, coarse) = (samples(None), samples(Some("100")));
    assert!(fine > 5 * coarse && coarse > 0, "{fine} {coarse}");
}

#[test]
fn compile_and_disassemble() {
    let dir = tempfile::tempdir().unwrap();
    let img = dir.path().join("ex.krlb");
    let out = krlf(&["compile", &corpus("example.src"), "-o", img.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let listing = krlf(&["compile", &corpus("example.src"), "--listing"]).stdout;
    let dis = krlf(&["disasm", img.to_str().unwrap()]);
    assert_eq!(dis.status.code(), Some(0));
    assert_eq!(dis.stdout, listing);
    let golden = std::fs::read_to_string(corpus("example.lst")).unwrap();
    assert_eq!(String::from_utf8(listing).unwrap(), golden);

    let bad = write(dir.path(), "bad.src", "DEF p()\nDECL INT i\ni = TRUE\nEND\n");
    let out_img = dir.path().join("bad.krlb");
    let out = krlf(&["compile", &bad, "-o", out_img.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out_img.exists());

    let junk = write(dir.path(), "junk.krlb", "KRLBgarbage");
    assert_eq!(krlf(&["disasm", &junk]).status.code(), Some(2));
}

#[test]
fn bench_usage_and_report() {
    assert_eq!(krlf(&["bench", &corpus("programs/compute_small.src"), "--iters", "0"]).status.code(), Some(64));
    let out = krlf(&["bench", &corpus("programs/compute_small.src"), "--iters", "10"]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["tree"]["runs_ms"].as_array().unwrap().len(), 10);
    assert!(v["ratio"].as_f64().unwrap() > 0.0);
    let moving = krlf(&["bench", &corpus("programs/ptp_single.src"), "--iters", "10"]);
    assert_eq!(moving.status.code(), Some(1));
}

#[test]
fn fuzz_reports_json() {
    let out = krlf(&["fuzz", "--count", "40", "--seed", "9"]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["mismatches"].as_array().unwrap().len(), 0);
    let out = krlf(&["fuzz", "--mode", "images", "--count", "40"]);
    assert_eq!(out.status.code(), Some(0));
}
