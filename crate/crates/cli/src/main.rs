use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use krlf_core::batch;
use krlf_core::bench;
use krlf_core::bytecode::{self, disassemble, Image, Loaded};
use krlf_core::diag::Diagnostic;
use krlf_core::engine::{Outcome, RunOptions};
use krlf_core::fuzz;
use krlf_core::gen;
use krlf_core::runtime::{IoScript, RuntimeConfig, Status};
use krlf_core::semantics::{check_source, CheckedProgram, DEFAULT_ADVANCE};
use krlf_core::tree;

const OK: u8 = 0;
const RUNTIME_ERROR: u8 = 1;
const STATIC_ERROR: u8 = 2;
const USAGE: u8 = 64;

/// Check, run, compile and benchmark KRL programs.
#[derive(Parser)]
#[command(name = "krlf", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Engine {
    Tree,
    Vm,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FuzzMode {
    /// Generated programs on both engines.
    Diff,
    /// Source mutants against the type rules.
    Types,
    /// Image mutants against the verifier.
    Images,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and type-check a source file.
    Check {
        source: PathBuf,
        /// Print diagnostics as JSON on stdout.
        #[arg(long)]
        json: bool,
    },
    /// Execute a program and write its JSONL trace.
    Run {
        /// A `.src` file, or a compiled image with `--engine vm`.
        source: PathBuf,
        #[arg(long, value_enum, default_value = "tree")]
        engine: Engine,
        /// JSONL input script of `{"t_ms", "in", "value"}` records.
        #[arg(long)]
        io_script: Option<PathBuf>,
        /// Trace destination; stdout when absent.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Write the final memory snapshot here as JSON.
        #[arg(long)]
        snapshot: Option<PathBuf>,
        /// Initial `$ADVANCE`.
        #[arg(long, default_value_t = DEFAULT_ADVANCE, value_parser = clap::value_parser!(i32).range(1..))]
        advance: i32,
        /// Routine to start in; defaults to the first one.
        #[arg(long)]
        entry: Option<String>,
    },
    /// Compile a source file to a bytecode image.
    Compile {
        source: PathBuf,
        /// Image path; defaults to the source path with a `.krlb` extension.
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Print the listing on stdout instead of writing an image.
        #[arg(long)]
        listing: bool,
    },
    /// Print the listing of a bytecode image.
    Disasm { image: PathBuf },
    /// Time both engines on a compute-only program.
    Bench {
        source: PathBuf,
        #[arg(long, default_value_t = bench::DEFAULT_ITERS)]
        iters: usize,
    },
    /// Differential and mutation fuzzing.
    Fuzz {
        #[arg(long, value_enum, default_value = "diff")]
        mode: FuzzMode,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 500)]
        count: usize,
    },
}

/// A failure carrying its exit code; the message goes to stderr.
struct Fail(u8, String);

type CmdResult = Result<u8, Fail>;

fn usage(msg: impl Into<String>) -> Fail {
    Fail(USAGE, msg.into())
}

fn read(path: &Path) -> Result<String, Fail> {
    fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn write_out(path: Option<&Path>, bytes: &[u8]) -> Result<(), Fail> {
    match path {
        Some(p) => fs::write(p, bytes).map_err(|e| usage(format!("{}: {e}", p.display()))),
        None => io::stdout()
            .write_all(bytes)
            .map_err(|e| usage(format!("stdout: {e}"))),
    }
}

fn print_json(v: &impl serde::Serialize) -> Result<(), Fail> {
    let text = serde_json::to_string_pretty(v).expect("report serializes");
    write_out(None, format!("{text}\n").as_bytes())
}

fn report(file: &str, diags: &[Diagnostic]) {
    for d in diags {
        eprintln!("{}", d.render(file));
    }
}

fn checked(path: &Path) -> Result<CheckedProgram, Fail> {
    let src = read(path)?;
    check_source(&src).map_err(|diags| {
        report(&path.display().to_string(), &diags);
        Fail(STATIC_ERROR, String::new())
    })
}

fn cmd_check(path: &Path, json: bool) -> CmdResult {
    let src = read(path)?;
    let file = path.display().to_string();
    let diags = check_source(&src).err().unwrap_or_default();
    if json {
        let list: Vec<_> = diags.iter().map(|d| d.to_json(&file)).collect();
        print_json(&list)?;
    } else {
        report(&file, &diags);
    }
    Ok(if diags.is_empty() { OK } else { STATIC_ERROR })
}

fn sample_interval() -> Result<u64, Fail> {
    match std::env::var("KRLF_TRACE_SAMPLES") {
        Ok(v) => match v.trim().parse::<u64>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(usage(format!("KRLF_TRACE_SAMPLES must be a positive integer, found {v:?}"))),
        },
        Err(_) => Ok(RuntimeConfig::default().sample_interval),
    }
}

fn is_image(path: &Path, bytes: &[u8]) -> bool {
    bytes.starts_with(b"KRLB") || path.extension().is_some_and(|e| e == "krlb")
}

#[allow(clippy::too_many_arguments)]
fn cmd_run(
    path: &Path,
    engine: Engine,
    io_script: Option<&Path>,
    trace: Option<&Path>,
    snapshot: Option<&Path>,
    advance: i32,
    entry: Option<String>,
) -> CmdResult {
    let script = match io_script {
        Some(p) => IoScript::parse_jsonl(&read(p)?).map_err(|e| usage(format!("{}: {e}", p.display())))?,
        None => IoScript::default(),
    };
    let opts = RunOptions {
        entry,
        script,
        config: RuntimeConfig {
            sample_interval: sample_interval()?,
            ..RuntimeConfig::default()
        },
        advance,
        record_jumps: false,
    };
    let bytes = fs::read(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    let outcome: Outcome = if is_image(path, &bytes) {
        if engine != Engine::Vm {
            return Err(usage("compiled images run only with --engine vm"));
        }
        let img = Image::from_bytes(&bytes).map_err(|e| Fail(STATIC_ERROR, format!("{}: {e}", path.display())))?;
        let loaded = Loaded::load(img).map_err(|e| Fail(STATIC_ERROR, format!("{}: {e}", path.display())))?;
        bytecode::run(&loaded, &opts).map_err(|e| usage(e.to_string()))?
    } else {
        let prog = checked(path)?;
        match engine {
            Engine::Tree => tree::run(&prog, &opts),
            Engine::Vm => bytecode::run(&bytecode::load(&prog), &opts),
        }
        .map_err(|e| usage(e.to_string()))?
    };
    write_out(trace, outcome.trace_jsonl().as_bytes())?;
    if let Some(p) = snapshot {
        write_out(Some(p), format!("{}\n", outcome.snapshot.to_json()).as_bytes())?;
    }
    match &outcome.status {
        Status::Ok => Ok(OK),
        Status::Halted => Err(Fail(RUNTIME_ERROR, "program halted".into())),
        Status::Failed(e) => Err(Fail(RUNTIME_ERROR, format!("runtime error: {e}"))),
    }
}

fn cmd_compile(path: &Path, output: Option<&Path>, listing: bool) -> CmdResult {
    let prog = checked(path)?;
    let img = bytecode::build(&prog);
    if listing {
        let text = disassemble(&img).expect("compiled images decode").to_string();
        write_out(None, text.as_bytes())?;
    } else {
        let out = output.map(Path::to_path_buf).unwrap_or_else(|| path.with_extension("krlb"));
        write_out(Some(&out), &img.to_bytes())?;
    }
    Ok(OK)
}

fn cmd_disasm(path: &Path) -> CmdResult {
    let bytes = fs::read(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    let img = Image::from_bytes(&bytes).map_err(|e| Fail(STATIC_ERROR, format!("{}: {e}", path.display())))?;
    let listing = disassemble(&img).map_err(|e| Fail(STATIC_ERROR, format!("{}: {e}", path.display())))?;
    write_out(None, listing.to_string().as_bytes())?;
    Ok(OK)
}

fn cmd_bench(path: &Path, iters: usize) -> CmdResult {
    if iters == 0 {
        return Err(usage("--iters must be at least 1"));
    }
    let prog = checked(path)?;
    let rep = bench::run(&prog, iters).map_err(|e| match e {
        bench::BenchError::NoIterations => usage(e.to_string()),
        _ => Fail(RUNTIME_ERROR, e.to_string()),
    })?;
    print_json(&rep)?;
    Ok(OK)
}

fn cmd_fuzz(mode: FuzzMode, seed: u64, count: usize) -> CmdResult {
    if count == 0 {
        return Err(usage("--count must be at least 1"));
    }
    let clean = match mode {
        FuzzMode::Diff => {
            let seeds: Vec<u64> = (seed..seed + count as u64).collect();
            let mismatches: Vec<_> = batch::map(&seeds, |&s| fuzz::differential(s)).into_iter().flatten().collect();
            print_json(&serde_json::json!({
                "programs": count,
                "first_seed": seed,
                "mismatches": mismatches,
            }))?;
            mismatches.is_empty()
        }
        FuzzMode::Types => {
            let rep = fuzz::type_fuzz(seed, count);
            print_json(&rep)?;
            rep.type_errors.is_empty() && rep.disagreements.is_empty()
        }
        FuzzMode::Images => {
            let bases: Vec<Image> = (seed..seed + count.div_ceil(20) as u64)
                .map(|s| bytecode::build(&check_source(&gen::program(s).source).expect("generated programs check")))
                .collect();
            let rep = fuzz::image_fuzz(&bases, seed, 20);
            print_json(&serde_json::json!({
                "report": rep,
                "invalid_rejection_rate": rep.invalid_rejection_rate(),
            }))?;
            rep.escaped.is_empty() && rep.violations.is_empty()
        }
    };
    if clean {
        Ok(OK)
    } else {
        Err(Fail(RUNTIME_ERROR, "fuzzing found failures".into()))
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { USAGE } else { OK };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Check { source, json } => cmd_check(&source, json),
        Command::Run {
            source,
            engine,
            io_script,
            trace,
            snapshot,
            advance,
            entry,
        } => cmd_run(
            &source,
            engine,
            io_script.as_deref(),
            trace.as_deref(),
            snapshot.as_deref(),
            advance,
            entry,
        ),
        Command::Compile { source, output, listing } => cmd_compile(&source, output.as_deref(), listing),
        Command::Disasm { image } => cmd_disasm(&image),
        Command::Bench { source, iters } => cmd_bench(&source, iters),
        Command::Fuzz { mode, seed, count } => cmd_fuzz(mode, seed, count),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(Fail(code, msg)) => {
            if !msg.is_empty() {
                eprintln!("krlf: {msg}");
            }
            ExitCode::from(code)
        }
    }
}
