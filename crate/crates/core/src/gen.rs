//! Seeded random program generators for differential testing.
//!
//! [`program`] builds well-typed programs that exercise most of the
//! language: arithmetic on every scalar type, arrays, all loop forms,
//! SWITCH, helper functions and procedures with OUT parameters, motions
//! with blending and triggers, I/O, waits and interrupts. Every loop is
//! bounded by a dedicated counter, so programs terminate; runtime errors
//! such as overflow or division by zero are allowed and must simply be
//! reported identically by both engines.
//!
//! [`goto_program`] builds nests of loops whose innermost bodies jump
//! outward with GOTO, for checking that jumps never change the depth of
//! the program call stack.

use std::fmt::Write;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::engine::RunOptions;
use crate::runtime::{IoScript, RuntimeConfig, ScriptRecord};

/// A generated source with the I/O script it should run against.
#[derive(Debug, Clone, PartialEq)]
pub struct Generated {
    pub seed: u64,
    pub source: String,
    pub script: Vec<ScriptRecord>,
}

impl Generated {
    /// Run options for this program: its script, a step budget as a
    /// safety net, and jump recording.
    pub fn options(&self) -> RunOptions {
        RunOptions {
            script: IoScript::new(self.script.clone()),
            config: RuntimeConfig {
                step_budget: Some(2_000_000),
                time_limit_ms: 600_000,
                ..RuntimeConfig::default()
            },
            record_jumps: true,
            ..RunOptions::default()
        }
    }
}

const INTS: &[&str] = &["V1", "V2", "V3", "V4"];
const REALS: &[&str] = &["R1", "R2"];
const BOOLS: &[&str] = &["B1", "B2"];
const ARRAY_LEN: i32 = 8;
/// Inputs the script drives; WAIT FOR only waits on inputs the script
/// eventually raises.
const INPUTS: u32 = 8;

struct Helper {
    name: String,
    func: bool,
}

struct Gen {
    rng: ChaCha8Rng,
    out: String,
    indent: usize,
    /// Fresh loop-counter names.
    counters: usize,
    /// Names of counters declared so far in the current routine.
    declared: Vec<String>,
    helpers: Vec<Helper>,
    /// Index of the first helper the current routine may call.
    callable_from: usize,
    in_main: bool,
    /// Inputs raised by the script at some point.
    raised: Vec<u32>,
    interrupts: Vec<i32>,
}

impl Gen {
    fn new(seed: u64) -> Self {
        Gen {
            rng: ChaCha8Rng::seed_from_u64(seed),
            out: String::new(),
            indent: 0,
            counters: 0,
            declared: Vec::new(),
            helpers: Vec::new(),
            callable_from: 0,
            in_main: false,
            raised: Vec::new(),
            interrupts: Vec::new(),
        }
    }

    fn line(&mut self, text: &str) {
        for _ in 0..self.indent {
            self.out.push('\t');
        }
        self.out.push_str(text);
        self.out.push('\n');
    }

    fn chance(&mut self, p: f64) -> bool {
        self.rng.gen_bool(p)
    }

    fn pick<'a>(&mut self, xs: &'a [&'a str]) -> &'a str {
        xs.choose(&mut self.rng).expect("non-empty")
    }

    fn counter(&mut self) -> String {
        self.counters += 1;
        let name = format!("K{}", self.counters);
        self.declared.push(name.clone());
        name
    }

    fn callable(&self, func: bool) -> Vec<usize> {
        (self.callable_from..self.helpers.len())
            .filter(|&i| self.helpers[i].func == func)
            .collect()
    }

    // ---- expressions ----

    fn int_expr(&mut self, depth: u32) -> String {
        let leaf = depth == 0 || self.chance(0.35);
        if leaf {
            return match self.rng.gen_range(0..6) {
                0 | 1 => self.rng.gen_range(-20..60).to_string(),
                2 => format!("A[{}]", self.rng.gen_range(1..=ARRAY_LEN)),
                _ => self.pick(INTS).to_string(),
            };
        }
        match self.rng.gen_range(0..10) {
            0..=3 => {
                let op = self.pick(&["+", "-", "+", "-", "*"]);
                let a = self.int_expr(depth - 1);
                let b = if op == "*" {
                    self.rng.gen_range(-3..4).to_string()
                } else {
                    self.int_expr(depth - 1)
                };
                format!("({a} {op} {b})")
            }
            4 => {
                let a = self.int_expr(depth - 1);
                // Mostly nonzero literal divisors; occasionally a variable,
                // which may be zero.
                let b = if self.chance(0.85) {
                    self.rng.gen_range(1..9).to_string()
                } else {
                    self.pick(INTS).to_string()
                };
                format!("({a} / {b})")
            }
            5 => format!("-{}", self.int_expr(depth - 1)),
            6 => {
                let i = self.index_expr(depth - 1);
                format!("A[{i}]")
            }
            7 if !self.callable(true).is_empty() => {
                let fs = self.callable(true);
                let f = self.helpers[*fs.choose(&mut self.rng).expect("non-empty")].name.clone();
                let a = self.int_expr(depth - 1);
                format!("{f}({a})")
            }
            _ => self.pick(INTS).to_string(),
        }
    }

    /// An index expression that is usually, but not always, in range.
    fn index_expr(&mut self, depth: u32) -> String {
        if self.chance(0.9) {
            self.rng.gen_range(1..=ARRAY_LEN).to_string()
        } else {
            self.int_expr(depth)
        }
    }

    fn real_expr(&mut self, depth: u32) -> String {
        if depth == 0 || self.chance(0.4) {
            return match self.rng.gen_range(0..4) {
                0 => format!("{}.{}", self.rng.gen_range(-9..30), self.rng.gen_range(0..10)),
                1 => self.int_expr(0),
                _ => self.pick(REALS).to_string(),
            };
        }
        let op = self.pick(&["+", "-", "*", "/"]);
        let a = self.real_expr(depth - 1);
        let b = if op == "/" {
            format!("{}.5", self.rng.gen_range(0..4))
        } else {
            self.real_expr(depth - 1)
        };
        format!("({a} {op} {b})")
    }

    fn bool_expr(&mut self, depth: u32) -> String {
        if depth == 0 || self.chance(0.3) {
            return match self.rng.gen_range(0..5) {
                0 => self.pick(&["TRUE", "FALSE"]).to_string(),
                1 => format!("$IN[{}]", self.rng.gen_range(1..=INPUTS)),
                _ => self.pick(BOOLS).to_string(),
            };
        }
        match self.rng.gen_range(0..6) {
            0 | 1 => {
                let op = self.pick(&["==", "<>", "<", "<=", ">", ">="]);
                let a = self.int_expr(depth - 1);
                let b = self.int_expr(depth - 1);
                format!("({a} {op} {b})")
            }
            2 => {
                let op = self.pick(&["<", ">", "<=", ">="]);
                let a = self.real_expr(depth - 1);
                let b = self.real_expr(depth - 1);
                format!("({a} {op} {b})")
            }
            3 => format!("NOT {}", self.bool_expr(depth - 1)),
            _ => {
                let op = self.pick(&["AND", "OR", "EXOR"]);
                let a = self.bool_expr(depth - 1);
                let b = self.bool_expr(depth - 1);
                format!("({a} {op} {b})")
            }
        }
    }

    fn pos_literal(&mut self) -> String {
        let r = &mut self.rng;
        format!(
            "{{POS: X {},Y {},Z {},A {},B {},C {}}}",
            r.gen_range(150..400),
            r.gen_range(-250..150),
            r.gen_range(1200..1600),
            r.gen_range(-10..10),
            r.gen_range(80..100),
            r.gen_range(-10..10)
        )
    }

    fn axis_literal(&mut self) -> String {
        let r = &mut self.rng;
        format!(
            "{{AXIS: A1 {},A2 {},A3 {},A4 {},A5 {},A6 {}}}",
            r.gen_range(-30..30),
            r.gen_range(-100..-60),
            r.gen_range(60..100),
            r.gen_range(-20..20),
            r.gen_range(-20..20),
            r.gen_range(-20..20)
        )
    }

    // ---- statements ----

    fn block(&mut self, depth: u32, len: usize) {
        self.indent += 1;
        for _ in 0..len {
            self.stmt(depth);
        }
        self.indent -= 1;
    }

    fn stmt(&mut self, depth: u32) {
        let nest = depth > 0;
        let roll = self.rng.gen_range(0..100);
        match roll {
            0..=24 => {
                let v = self.pick(INTS);
                let e = self.int_expr(3);
                self.line(&format!("{v} = {e}"));
            }
            25..=31 => {
                let i = self.index_expr(1);
                let e = self.int_expr(2);
                self.line(&format!("A[{i}] = {e}"));
            }
            32..=37 => {
                let v = self.pick(REALS);
                let e = self.real_expr(2);
                self.line(&format!("{v} = {e}"));
            }
            38..=42 => {
                let v = self.pick(BOOLS);
                let e = self.bool_expr(2);
                self.line(&format!("{v} = {e}"));
            }
            43..=50 if nest => {
                let c = self.bool_expr(2);
                self.line(&format!("IF {c} THEN"));
                let n = self.rng.gen_range(1..4);
                self.block(depth - 1, n);
                if self.chance(0.5) {
                    self.line("ELSE");
                    let n = self.rng.gen_range(1..3);
                    self.block(depth - 1, n);
                }
                self.line("ENDIF");
            }
            51..=56 if nest => {
                let v = self.counter();
                let from = self.rng.gen_range(-3..4);
                let to = from + self.rng.gen_range(-2..6);
                let step = *[1, 1, 2, -1, 3, -2].choose(&mut self.rng).expect("non-empty");
                let head = if step == 1 && self.chance(0.5) {
                    format!("FOR {v} = {from} TO {to}")
                } else {
                    format!("FOR {v} = {from} TO {to} STEP {step}")
                };
                self.line(&head);
                let n = self.rng.gen_range(1..4);
                self.block(depth - 1, n);
                self.line("ENDFOR");
                if self.chance(0.3) {
                    let w = self.pick(INTS);
                    self.line(&format!("{w} = {w} + {v}"));
                }
            }
            57..=60 if nest => {
                let k = self.counter();
                let bound = self.rng.gen_range(1..6);
                let c = self.bool_expr(1);
                self.line(&format!("{k} = 0"));
                self.line(&format!("WHILE ({k} < {bound}) AND {c}"));
                self.indent += 1;
                self.line(&format!("{k} = {k} + 1"));
                self.indent -= 1;
                let n = self.rng.gen_range(1..3);
                self.block(depth - 1, n);
                self.line("ENDWHILE");
            }
            61..=63 if nest => {
                let k = self.counter();
                let bound = self.rng.gen_range(1..5);
                let c = self.bool_expr(1);
                self.line(&format!("{k} = 0"));
                self.line("REPEAT");
                self.indent += 1;
                self.line(&format!("{k} = {k} + 1"));
                self.indent -= 1;
                let n = self.rng.gen_range(1..3);
                self.block(depth - 1, n);
                self.line(&format!("UNTIL ({k} >= {bound}) OR {c}"));
            }
            64..=66 if nest => {
                let k = self.counter();
                let bound = self.rng.gen_range(1..5);
                self.line(&format!("{k} = 0"));
                self.line("LOOP");
                self.indent += 1;
                self.line(&format!("{k} = {k} + 1"));
                self.line(&format!("IF {k} > {bound} THEN"));
                self.indent += 1;
                self.line("EXIT");
                self.indent -= 1;
                self.line("ENDIF");
                self.indent -= 1;
                let n = self.rng.gen_range(1..3);
                self.block(depth - 1, n);
                self.line("ENDLOOP");
            }
            67..=70 if nest => {
                let sel = self.int_expr(1);
                self.line(&format!("SWITCH {sel}"));
                let mut used = Vec::new();
                for _ in 0..self.rng.gen_range(1..4) {
                    let mut vals = Vec::new();
                    for _ in 0..self.rng.gen_range(1..3) {
                        let v = self.rng.gen_range(-5..10);
                        if !used.contains(&v) {
                            used.push(v);
                            vals.push(v.to_string());
                        }
                    }
                    if vals.is_empty() {
                        continue;
                    }
                    self.line(&format!("CASE {}", vals.join(", ")));
                    self.block(depth - 1, 1);
                }
                if self.chance(0.6) {
                    self.line("DEFAULT");
                    self.block(depth - 1, 1);
                }
                self.line("ENDSWITCH");
            }
            71..=74 if !self.callable(false).is_empty() => {
                let ps = self.callable(false);
                let p = self.helpers[*ps.choose(&mut self.rng).expect("non-empty")].name.clone();
                let a = self.int_expr(2);
                let out = self.pick(INTS);
                self.line(&format!("{p}({a}, {out})"));
            }
            75..=79 => {
                let i = self.rng.gen_range(1..=16);
                let e = self.bool_expr(1);
                self.line(&format!("$OUT[{i}] = {e}"));
            }
            80..=89 if self.in_main => self.motion(),
            90..=92 if self.in_main => {
                let ms = self.rng.gen_range(0..8) * 10;
                self.line(&format!("WAIT SEC {}.{:02}", ms / 100, ms % 100));
            }
            93 if self.in_main && !self.raised.is_empty() => {
                let i = *self.raised.choose(&mut self.rng).expect("non-empty");
                self.line(&format!("WAIT FOR $IN[{i}]"));
            }
            94..=96 if self.in_main && !self.interrupts.is_empty() => {
                let p = *self.interrupts.choose(&mut self.rng).expect("non-empty");
                let on = if self.chance(0.7) { "ON" } else { "OFF" };
                self.line(&format!("INTERRUPT {on} {p}"));
            }
            97 if self.in_main && depth == 0 && self.chance(0.2) => self.line("HALT"),
            _ if self.in_main && self.chance(0.3) => self.line("G1 = G1 + 1"),
            _ => {
                let v = self.pick(INTS);
                let e = self.int_expr(1);
                self.line(&format!("{v} = {v} + {e}"));
            }
        }
    }

    fn motion(&mut self) {
        if self.chance(0.3) {
            let dist = self.rng.gen_range(0..2);
            let delay = self.rng.gen_range(-30..60);
            let i = self.rng.gen_range(1..=16);
            let v = self.pick(&["TRUE", "FALSE"]);
            self.line(&format!("TRIGGER WHEN DISTANCE={dist} DELAY={delay} DO $OUT[{i}]={v}"));
        }
        let lin = self.chance(0.5);
        let target = match self.rng.gen_range(0..4) {
            0 => "P1".to_string(),
            1 if !lin => "X1".to_string(),
            _ if lin => self.pos_literal(),
            _ => self.axis_literal(),
        };
        let blend = match self.rng.gen_range(0..3) {
            0 => "",
            _ if lin => " C_DIS",
            _ => " C_PTP",
        };
        let kind = if lin { "LIN" } else { "PTP" };
        self.line(&format!("{kind} {target}{blend}"));
        if self.chance(0.2) {
            let f = self.pick(&["X", "Y", "Z"]);
            let d = self.rng.gen_range(-40..40);
            self.line(&format!("P1.{f} = P1.{f} + {d}"));
        }
    }

    fn locals(&mut self, params: &[&str]) -> String {
        let mut names: Vec<String> = INTS.iter().map(|s| s.to_string()).collect();
        names.extend(params.iter().map(|s| s.to_string()));
        names.extend(self.declared.drain(..));
        let mut d = format!("\tDECL INT {}\n", names.join(", "));
        d.push_str(&format!("\tDECL INT A[{ARRAY_LEN}]\n"));
        d.push_str(&format!("\tDECL REAL {}\n", REALS.join(", ")));
        d.push_str(&format!("\tDECL BOOL {}\n", BOOLS.join(", ")));
        d
    }

    fn routine_body(&mut self, len: usize, depth: u32) -> String {
        let saved = std::mem::take(&mut self.out);
        self.indent = 0;
        self.block(depth, len);
        std::mem::replace(&mut self.out, saved)
    }

    fn helper_func(&mut self, index: usize) -> String {
        self.callable_from = index + 1;
        self.in_main = false;
        let name = self.helpers[index].name.clone();
        let len = self.rng.gen_range(1..4);
        let body = self.routine_body(len, 1);
        let ret = self.int_expr(2);
        let decls = self.locals(&["X"]);
        format!("DEFFCT INT {name}(X:IN)\n{decls}\tV1 = X\n{body}\tRETURN {ret}\nENDFCT\n")
    }

    fn helper_proc(&mut self, index: usize) -> String {
        self.callable_from = index + 1;
        self.in_main = false;
        let name = self.helpers[index].name.clone();
        let len = self.rng.gen_range(1..5);
        let body = self.routine_body(len, 2);
        let decls = self.locals(&["X", "Y"]);
        format!("DEF {name}(X:IN, Y:OUT)\n{decls}\tV2 = X\n{body}\tY = V1 + V2\nEND\n")
    }
}

/// Generate the program for `seed`.
pub fn program(seed: u64) -> Generated {
    let mut g = Gen::new(seed);

    // Script: a few input edges in the first seconds.
    let mut script = Vec::new();
    for _ in 0..g.rng.gen_range(0..10) {
        let t = g.rng.gen_range(0..1500u64);
        let index = g.rng.gen_range(1..=INPUTS);
        let value = g.rng.gen_bool(0.6);
        script.push(ScriptRecord { t_ms: t, index, value });
        if value {
            g.raised.push(index);
        }
    }
    let rising: Vec<u32> = script.iter().filter(|r| r.value && r.t_ms > 0).map(|r| r.index).collect();
    g.raised.sort_unstable();
    g.raised.dedup();

    // Helpers: calls only go to later helpers, so there is no recursion.
    let helpers = g.rng.gen_range(0..4);
    for i in 0..helpers {
        let func = g.rng.gen_bool(0.5);
        let name = if func { format!("FN{i}") } else { format!("PR{i}") };
        g.helpers.push(Helper { name, func });
    }
    let mut helper_src = String::new();
    for i in (0..helpers).rev() {
        let text = if g.helpers[i].func {
            g.helper_func(i)
        } else {
            g.helper_proc(i)
        };
        helper_src = text + &helper_src;
    }

    // Interrupt service routines touch only globals and outputs.
    let mut isr_src = String::new();
    let mut decl_lines = String::new();
    let mut enable_lines = String::new();
    for n in 0..g.rng.gen_range(0..3) {
        let prio = [2, 5, 9][n];
        // Prefer inputs the script raises later on, so the condition edges
        // while the program runs.
        let input = match rising.choose(&mut g.rng) {
            Some(&i) if g.rng.gen_bool(0.8) => i,
            _ => g.rng.gen_range(1..=INPUTS),
        };
        let cond = match g.rng.gen_range(0..3) {
            0 => format!("$IN[{input}]"),
            1 => format!("$IN[{input}] == FALSE"),
            _ => format!("G1 > {}", g.rng.gen_range(0..4)),
        };
        let action = if g.rng.gen_bool(0.25) {
            "BRAKE".to_string()
        } else {
            let name = format!("ISR{n}");
            let out = g.rng.gen_range(17..=24);
            let _ = write!(
                isr_src,
                "DEF {name}()\n\tG2 = G2 + 1\n\t$OUT[{out}] = NOT $OUT[{out}]\nEND\n"
            );
            format!("{name}()")
        };
        let _ = writeln!(decl_lines, "\tINTERRUPT DECL {prio} WHEN {cond} DO {action}");
        if g.rng.gen_bool(0.8) {
            let _ = writeln!(enable_lines, "\tINTERRUPT ON {prio}");
        }
        g.interrupts.push(prio);
    }

    g.callable_from = 0;
    g.in_main = true;
    let mut prologue = enable_lines;
    prologue.push_str("\tV1 = 1\n\tV2 = 2\n\tR1 = 0.5\n");
    if g.rng.gen_bool(0.5) {
        let a = g.axis_literal();
        let _ = writeln!(prologue, "\tX1 = {a}");
    } else {
        prologue.push_str("\tX1 = $AXIS_ACT\n");
    }
    let p = g.pos_literal();
    let _ = writeln!(prologue, "\tP1 = {p}");
    let len = g.rng.gen_range(4..14);
    let body = g.routine_body(len, 3);
    let mut tail = String::new();
    if g.rng.gen_bool(0.5) {
        tail.push_str("\tG1 = G1 + V1\n");
    }
    let decls = g.locals(&[]);
    let source = format!(
        "DECL INT G1, G2\n\
         DEF main()\n{decls}\tDECL POS P1\n\tDECL AXIS X1\n{decl_lines}{prologue}{body}{tail}END\n\
         {helper_src}{isr_src}"
    );
    Generated { seed, source, script }
}

/// A generated GOTO stress program.
#[derive(Debug, Clone, PartialEq)]
pub struct GotoProgram {
    pub seed: u64,
    pub source: String,
    /// Deepest loop nesting in the program.
    pub nesting: usize,
}

impl GotoProgram {
    pub fn options(&self) -> RunOptions {
        RunOptions {
            config: RuntimeConfig {
                step_budget: Some(5_000_000),
                ..RuntimeConfig::default()
            },
            record_jumps: true,
            ..RunOptions::default()
        }
    }
}

struct GotoGen {
    rng: ChaCha8Rng,
    labels: usize,
    vars: Vec<String>,
}

impl GotoGen {
    fn var(&mut self) -> String {
        let v = format!("L{}", self.vars.len());
        self.vars.push(v.clone());
        v
    }

    /// A loop nest of `depth` levels. `exits` holds labels placed after
    /// each enclosing loop, outermost first; the innermost body jumps to
    /// a random one of them every few iterations.
    fn nest(&mut self, depth: usize, exits: &mut Vec<String>, helper: Option<&str>, out: &mut String, indent: usize) {
        let pad = "\t".repeat(indent);
        if depth == 0 {
            let _ = writeln!(out, "{pad}C = C + 1");
            if let Some(h) = helper {
                if self.rng.gen_bool(0.5) {
                    let _ = writeln!(out, "{pad}{h}(C)");
                }
            }
            let period = self.rng.gen_range(1..5);
            let target = exits.choose(&mut self.rng).expect("at least one exit").clone();
            let _ = writeln!(out, "{pad}IF C >= {period} THEN");
            let _ = writeln!(out, "{pad}\tC = 0");
            let _ = writeln!(out, "{pad}\tGOTO {target}");
            let _ = writeln!(out, "{pad}ENDIF");
            return;
        }
        let label = format!("OUT{}", self.labels);
        self.labels += 1;
        let v = self.var();
        let n = self.rng.gen_range(2..5);
        match self.rng.gen_range(0..4) {
            0 => {
                let _ = writeln!(out, "{pad}FOR {v} = 1 TO {n}");
                self.inner(depth, exits, &label, helper, out, indent);
                let _ = writeln!(out, "{pad}ENDFOR");
            }
            1 => {
                let _ = writeln!(out, "{pad}{v} = 0");
                let _ = writeln!(out, "{pad}WHILE {v} < {n}");
                let _ = writeln!(out, "{pad}\t{v} = {v} + 1");
                self.inner(depth, exits, &label, helper, out, indent);
                let _ = writeln!(out, "{pad}ENDWHILE");
            }
            2 => {
                let _ = writeln!(out, "{pad}{v} = 0");
                let _ = writeln!(out, "{pad}REPEAT");
                let _ = writeln!(out, "{pad}\t{v} = {v} + 1");
                self.inner(depth, exits, &label, helper, out, indent);
                let _ = writeln!(out, "{pad}UNTIL {v} >= {n}");
            }
            _ => {
                let _ = writeln!(out, "{pad}{v} = 0");
                let _ = writeln!(out, "{pad}LOOP");
                let _ = writeln!(out, "{pad}\t{v} = {v} + 1");
                let _ = writeln!(out, "{pad}\tIF {v} > {n} THEN");
                let _ = writeln!(out, "{pad}\t\tEXIT");
                let _ = writeln!(out, "{pad}\tENDIF");
                self.inner(depth, exits, &label, helper, out, indent);
                let _ = writeln!(out, "{pad}ENDLOOP");
            }
        }
        let _ = writeln!(out, "{label}:");
        let _ = writeln!(out, "{pad}D = D + 1");
    }

    fn inner(&mut self, depth: usize, exits: &mut Vec<String>, label: &str, helper: Option<&str>, out: &mut String, indent: usize) {
        exits.push(label.to_string());
        self.nest(depth - 1, exits, helper, out, indent + 1);
        exits.pop();
    }

    fn routine(&mut self, name: &str, depth: usize, helper: Option<&str>, param: bool) -> String {
        self.vars.clear();
        let mut body = String::new();
        let mut exits = Vec::new();
        // A backward jump re-runs the whole nest a few times.
        let rounds = self.rng.gen_range(1..4);
        body.push_str("TOP:\n\tR = R + 1\n");
        self.nest(depth, &mut exits, helper, &mut body, 1);
        let _ = writeln!(body, "\tIF R < {rounds} THEN\n\t\tGOTO TOP\n\tENDIF");
        let mut vars = vec!["C".to_string(), "D".to_string(), "R".to_string()];
        vars.extend(self.vars.iter().cloned());
        if param {
            vars.push("P".to_string());
            format!("DEF {name}(P:IN)\n\tDECL INT {}\n{body}END\n", vars.join(", "))
        } else {
            format!("DEF {name}()\n\tDECL INT {}\n{body}END\n", vars.join(", "))
        }
    }
}

/// Generate the GOTO stress program for `seed`: loop nests 1 to 4 deep,
/// optionally calling a helper that runs its own nest, so jumps happen at
/// call depths one and two.
pub fn goto_program(seed: u64) -> GotoProgram {
    let mut g = GotoGen {
        rng: ChaCha8Rng::seed_from_u64(seed),
        labels: 0,
        vars: Vec::new(),
    };
    let nesting = g.rng.gen_range(1..=4);
    let with_helper = g.rng.gen_bool(0.5);
    let helper_depth = g.rng.gen_range(1..=2);
    let main = g.routine("main", nesting, with_helper.then_some("hop"), false);
    let mut source = main;
    if with_helper {
        source.push_str(&g.routine("hop", helper_depth, None, true));
    }
    GotoProgram {
        seed,
        source,
        nesting: nesting.max(if with_helper { helper_depth } else { 0 }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::semantics::check_source;

    #[test]
    fn generated_programs_check() {
        for seed in 0..200 {
            let g = program(seed);
            if let Err(e) = check_source(&g.source) {
                panic!("seed {seed}: {e:?}\n{}", g.source);
            }
        }
    }

    #[test]
    fn goto_programs_check() {
        for seed in 0..100 {
            let g = goto_program(seed);
            if let Err(e) = check_source(&g.source) {
                panic!("seed {seed}: {e:?}\n{}", g.source);
            }
        }
    }

    #[test]
    fn generation_is_deterministic() {
        assert_eq!(program(7), program(7));
        assert_ne!(program(7).source, program(8).source);
    }
}
