//! Human-readable assembly: the compiler's output and the assembler's input.
//!
//! ```text
//! .struct AXIS A1:REAL A2:REAL A3:REAL A4:REAL A5:REAL A6:REAL
//! .global $VEL_AXIS INT[6]
//! .interrupt #C0 #A0
//! .routine MAIN slots=1
//! .local I INT
//!     POLL
//!     LDC_I 1
//!     ST 0
//! L0:
//!     JMP L0
//! ```
//!
//! Slot operands are local frame indices, or `@n` for global memory. Jump
//! operands name labels of the same routine, `CALL` names a routine, and
//! constants are written as literal values. `;` starts a comment.

use std::fmt::{self, Write as _};

use super::opcode::{Op, Operand, Sys};
use crate::frontend::ast::ParamMode;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum TypeRef {
    Int,
    Real,
    Bool,
    Char,
    Array(Box<TypeRef>, u32),
    /// Struct by listing name.
    Struct(String),
}

impl fmt::Display for TypeRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TypeRef::Int => f.write_str("INT"),
            TypeRef::Real => f.write_str("REAL"),
            TypeRef::Bool => f.write_str("BOOL"),
            TypeRef::Char => f.write_str("CHAR"),
            TypeRef::Array(t, n) => write!(f, "{t}[{n}]"),
            TypeRef::Struct(s) => f.write_str(s),
        }
    }
}

impl TypeRef {
    pub fn parse(text: &str) -> Option<TypeRef> {
        if let Some(open) = text.rfind('[') {
            let len = text.strip_suffix(']')?[open + 1..].parse().ok()?;
            return Some(TypeRef::Array(Box::new(TypeRef::parse(&text[..open])?), len));
        }
        Some(match text {
            "INT" => TypeRef::Int,
            "REAL" => TypeRef::Real,
            "BOOL" => TypeRef::Bool,
            "CHAR" => TypeRef::Char,
            "" => return None,
            name => TypeRef::Struct(name.to_string()),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Slot {
    pub global: bool,
    pub index: u16,
}

impl fmt::Display for Slot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.global {
            write!(f, "@{}", self.index)
        } else {
            write!(f, "{}", self.index)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Arg {
    None,
    Int(i32),
    Real(f64),
    Byte(u8),
    /// Character array literal with its declared length.
    Str(String, u32),
    Type(TypeRef),
    Slot(Slot),
    Field(u16),
    Label(String),
    Routine(String),
    Sys(Sys),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Line {
    Label(String),
    Instr(Op, Arg),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlotDecl {
    pub name: String,
    pub ty: TypeRef,
    pub hidden: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StructItem {
    pub name: String,
    pub fields: Vec<(String, TypeRef)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoutineListing {
    pub name: String,
    pub params: Vec<ParamMode>,
    pub func: bool,
    pub slots: Vec<SlotDecl>,
    pub body: Vec<Line>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Listing {
    pub structs: Vec<StructItem>,
    pub globals: Vec<SlotDecl>,
    /// Condition and action routine per interrupt declaration id.
    pub interrupts: Vec<(String, String)>,
    pub routines: Vec<RoutineListing>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("line {line}: {message}")]
pub struct ListingError {
    pub line: usize,
    pub message: String,
}

fn write_slot_decl(out: &mut String, directive: &str, d: &SlotDecl) {
    let _ = write!(out, "{directive} {} {}", d.name, d.ty);
    if d.hidden {
        out.push_str(" hidden");
    }
    out.push('\n');
}

fn format_arg(op: Op, arg: &Arg) -> String {
    match arg {
        Arg::None => String::new(),
        Arg::Int(i) => i.to_string(),
        Arg::Real(r) => format!("{r:?}"),
        Arg::Byte(b) => b.to_string(),
        Arg::Str(s, n) => format!("{} {n}", serde_json::to_string(s).expect("string")),
        Arg::Type(t) => t.to_string(),
        Arg::Slot(s) => s.to_string(),
        Arg::Field(f) => f.to_string(),
        Arg::Label(l) | Arg::Routine(l) => l.clone(),
        Arg::Sys(s) => {
            debug_assert_eq!(op, Op::SYS);
            s.name().to_string()
        }
    }
}

impl fmt::Display for Listing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut out = String::new();
        for s in &self.structs {
            let _ = write!(out, ".struct {}", s.name);
            for (name, ty) in &s.fields {
                let _ = write!(out, " {name}:{ty}");
            }
            out.push('\n');
        }
        for g in &self.globals {
            write_slot_decl(&mut out, ".global", g);
        }
        for (c, a) in &self.interrupts {
            let _ = writeln!(out, ".interrupt {c} {a}");
        }
        for r in &self.routines {
            let _ = write!(out, ".routine {} slots={}", r.name, r.slots.len());
            if !r.params.is_empty() {
                let modes: Vec<&str> = r
                    .params
                    .iter()
                    .map(|m| match m {
                        ParamMode::In => "IN",
                        ParamMode::Out => "OUT",
                    })
                    .collect();
                let _ = write!(out, " params={}", modes.join(","));
            }
            if r.func {
                out.push_str(" func");
            }
            out.push('\n');
            for s in &r.slots {
                write_slot_decl(&mut out, ".local", s);
            }
            for line in &r.body {
                match line {
                    Line::Label(l) => {
                        let _ = writeln!(out, "{l}:");
                    }
                    Line::Instr(op, Arg::None) => {
                        let _ = writeln!(out, "    {op}");
                    }
                    Line::Instr(op, arg) => {
                        let _ = writeln!(out, "    {op} {}", format_arg(*op, arg));
                    }
                }
            }
        }
        f.write_str(&out)
    }
}

/// Drop a trailing `;` comment that is not inside a string literal.
fn strip_comment(line: &str) -> &str {
    let mut in_str = false;
    let mut escaped = false;
    for (i, c) in line.char_indices() {
        match c {
            _ if escaped => escaped = false,
            '\\' if in_str => escaped = true,
            '"' => in_str = !in_str,
            ';' if !in_str => return &line[..i],
            _ => {}
        }
    }
    line
}

fn parse_slot_decl(line: usize, rest: &[&str]) -> Result<SlotDecl, ListingError> {
    let err = |m: &str| ListingError {
        line,
        message: m.to_string(),
    };
    match rest {
        [name, ty] | [name, ty, "hidden"] => Ok(SlotDecl {
            name: name.to_string(),
            ty: TypeRef::parse(ty).ok_or_else(|| err("bad type"))?,
            hidden: rest.len() == 3,
        }),
        _ => Err(err("expected NAME TYPE [hidden]")),
    }
}

fn parse_arg(op: Op, text: &str) -> Option<Arg> {
    let text = text.trim();
    Some(match op.operand() {
        Operand::None if text.is_empty() => Arg::None,
        Operand::None => return None,
        Operand::Slot => match text.strip_prefix('@') {
            Some(g) => Arg::Slot(Slot {
                global: true,
                index: g.parse().ok()?,
            }),
            None => Arg::Slot(Slot {
                global: false,
                index: text.parse().ok()?,
            }),
        },
        Operand::Field => Arg::Field(text.parse().ok()?),
        Operand::Byte => Arg::Byte(text.parse().ok()?),
        Operand::Jump => Arg::Label(ident(text)?),
        Operand::Routine => Arg::Routine(ident(text)?),
        Operand::Sys => Arg::Sys(Sys::parse(text)?),
        Operand::Const => match op {
            Op::LDC_I => Arg::Int(text.parse().ok()?),
            Op::LDC_R => Arg::Real(text.parse().ok()?),
            Op::LDC_AGG => Arg::Type(TypeRef::parse(text)?),
            Op::LDC_S => {
                let close = text.rfind('"')?;
                let s: String = serde_json::from_str(&text[..=close]).ok()?;
                Arg::Str(s, text[close + 1..].trim().parse().ok()?)
            }
            _ => return None,
        },
    })
}

fn ident(text: &str) -> Option<String> {
    (!text.is_empty() && !text.contains(char::is_whitespace)).then(|| text.to_string())
}

impl Listing {
    pub fn parse(text: &str) -> Result<Listing, ListingError> {
        let mut listing = Listing::default();
        let mut declared_slots = 0usize;
        let check_slots = |r: Option<&RoutineListing>, declared: usize, line: usize| match r {
            Some(r) if r.slots.len() != declared => Err(ListingError {
                line,
                message: format!(
                    "routine {} declares slots={declared} but lists {} locals",
                    r.name,
                    r.slots.len()
                ),
            }),
            _ => Ok(()),
        };
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let err = |m: String| ListingError { line, message: m };
            let content = strip_comment(raw).trim();
            if content.is_empty() {
                continue;
            }
            if let Some(directive) = content.strip_prefix('.') {
                let words: Vec<&str> = directive.split_whitespace().collect();
                match words.as_slice() {
                    ["struct", name, fields @ ..] => {
                        let fields = fields
                            .iter()
                            .map(|f| {
                                let (n, t) = f.split_once(':')?;
                                Some((n.to_string(), TypeRef::parse(t)?))
                            })
                            .collect::<Option<Vec<_>>>()
                            .ok_or_else(|| err("bad struct field".into()))?;
                        listing.structs.push(StructItem {
                            name: name.to_string(),
                            fields,
                        });
                    }
                    ["global", rest @ ..] => listing.globals.push(parse_slot_decl(line, rest)?),
                    ["interrupt", cond, action] => {
                        listing.interrupts.push((cond.to_string(), action.to_string()))
                    }
                    ["routine", name, rest @ ..] => {
                        check_slots(listing.routines.last(), declared_slots, line)?;
                        let mut r = RoutineListing {
                            name: name.to_string(),
                            params: Vec::new(),
                            func: false,
                            slots: Vec::new(),
                            body: Vec::new(),
                        };
                        declared_slots = 0;
                        for w in rest {
                            if let Some(n) = w.strip_prefix("slots=") {
                                declared_slots = n.parse().map_err(|_| err("bad slot count".into()))?;
                            } else if let Some(p) = w.strip_prefix("params=") {
                                for m in p.split(',') {
                                    r.params.push(match m {
                                        "IN" => ParamMode::In,
                                        "OUT" => ParamMode::Out,
                                        _ => return Err(err(format!("bad parameter mode {m}"))),
                                    });
                                }
                            } else if *w == "func" {
                                r.func = true;
                            } else {
                                return Err(err(format!("unknown routine attribute {w}")));
                            }
                        }
                        listing.routines.push(r);
                    }
                    ["local", rest @ ..] => {
                        let decl = parse_slot_decl(line, rest)?;
                        listing
                            .routines
                            .last_mut()
                            .ok_or_else(|| err(".local outside a routine".into()))?
                            .slots
                            .push(decl);
                    }
                    _ => return Err(err(format!("unknown directive .{directive}"))),
                }
                continue;
            }
            let routine = listing
                .routines
                .last_mut()
                .ok_or_else(|| err("code before the first .routine".into()))?;
            if let Some(label) = content.strip_suffix(':') {
                let label = ident(label).ok_or_else(|| err("bad label".into()))?;
                routine.body.push(Line::Label(label));
                continue;
            }
            let (mnemonic, rest) = content
                .split_once(char::is_whitespace)
                .unwrap_or((content, ""));
            let op = Op::parse(mnemonic).ok_or_else(|| err(format!("unknown mnemonic {mnemonic}")))?;
            let arg = parse_arg(op, rest).ok_or_else(|| err(format!("bad operand for {op}: {}", rest.trim())))?;
            routine.body.push(Line::Instr(op, arg));
        }
        check_slots(listing.routines.last(), declared_slots, text.lines().count())?;
        Ok(listing)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        let text = ".struct P X:REAL Y:INT[3]\n.global G P[2] hidden\n.interrupt #C0 #A0\n\
                    .routine M slots=1 params=IN,OUT func\n.local I INT\n\
                    L0:\n    LDC_S \"a;b\" 5\n    LD @3\n    JZ L0\n    SYS GET_IN\n    LDC_R 0.1\n";
        let l = Listing::parse(text).unwrap();
        assert_eq!(l.to_string(), text);
    }

    #[test]
    fn slot_count_mismatch() {
        let e = Listing::parse(".routine M slots=2\n.local I INT\n    RET\n").unwrap_err();
        assert!(e.message.contains("slots=2"), "{e}");
    }
}
