//! Two-pass assembler and the matching disassembler.

use std::collections::HashMap;

use super::image::*;
use super::listing::*;
use super::opcode::{Op, Operand, Sys, GLOBAL_BIT};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AsmError {
    #[error("routine {routine}: undefined label {label}")]
    UndefinedLabel { routine: String, label: String },
    #[error("routine {routine}: duplicate label {label}")]
    DuplicateLabel { routine: String, label: String },
    #[error("undefined routine {0}")]
    UndefinedRoutine(String),
    #[error("duplicate routine {0}")]
    DuplicateRoutine(String),
    #[error("undefined or forward struct {0}")]
    UndefinedStruct(String),
    #[error("{0} out of range")]
    OutOfRange(String),
    #[error("operand of {op} has the wrong kind")]
    BadOperand { op: Op },
}

struct Assembler {
    structs: HashMap<String, u16>,
    consts: Vec<Const>,
}

impl Assembler {
    fn ty(&self, t: &TypeRef) -> Result<TypeDesc, AsmError> {
        Ok(match t {
            TypeRef::Int => TypeDesc::Int,
            TypeRef::Real => TypeDesc::Real,
            TypeRef::Bool => TypeDesc::Bool,
            TypeRef::Char => TypeDesc::Char,
            TypeRef::Array(e, n) => TypeDesc::Array(Box::new(self.ty(e)?), *n),
            TypeRef::Struct(s) => TypeDesc::Struct(
                *self
                    .structs
                    .get(s)
                    .ok_or_else(|| AsmError::UndefinedStruct(s.clone()))?,
            ),
        })
    }

    fn slot(&self, d: &SlotDecl) -> Result<SlotEntry, AsmError> {
        Ok(SlotEntry {
            name: d.name.clone(),
            ty: self.ty(&d.ty)?,
            hidden: d.hidden,
        })
    }

    fn intern(&mut self, c: Const) -> Result<u16, AsmError> {
        let i = match self.consts.iter().position(|x| *x == c) {
            Some(i) => i,
            None => {
                self.consts.push(c);
                self.consts.len() - 1
            }
        };
        u16::try_from(i).map_err(|_| AsmError::OutOfRange("constant pool".into()))
    }
}

fn size_of(line: &Line) -> usize {
    match line {
        Line::Label(_) => 0,
        Line::Instr(op, _) => op.size(),
    }
}

pub fn assemble(listing: &Listing) -> Result<Image, AsmError> {
    let mut asm = Assembler {
        structs: HashMap::new(),
        consts: Vec::new(),
    };
    let mut img = Image::default();
    for s in &listing.structs {
        let fields = s
            .fields
            .iter()
            .map(|(n, t)| Ok((n.clone(), asm.ty(t)?)))
            .collect::<Result<Vec<_>, AsmError>>()?;
        let idx = u16::try_from(img.structs.len()).map_err(|_| AsmError::OutOfRange("struct table".into()))?;
        asm.structs.insert(s.name.clone(), idx);
        img.structs.push(StructEntry {
            name: s.name.clone(),
            fields,
        });
    }
    for g in &listing.globals {
        img.globals.push(asm.slot(g)?);
    }
    let mut routine_ids = HashMap::new();
    for (i, r) in listing.routines.iter().enumerate() {
        if routine_ids.insert(r.name.clone(), i as u16).is_some() {
            return Err(AsmError::DuplicateRoutine(r.name.clone()));
        }
    }
    let routine_id = |name: &str| {
        routine_ids
            .get(name)
            .copied()
            .ok_or_else(|| AsmError::UndefinedRoutine(name.to_string()))
    };
    for (c, a) in &listing.interrupts {
        img.interrupts.push((routine_id(c)?, routine_id(a)?));
    }

    for r in &listing.routines {
        let entry = img.code.len();
        // Pass 1: label offsets relative to the routine start.
        let mut labels = HashMap::new();
        let mut at = 0usize;
        for line in &r.body {
            if let Line::Label(l) = line {
                if labels.insert(l.as_str(), at).is_some() {
                    return Err(AsmError::DuplicateLabel {
                        routine: r.name.clone(),
                        label: l.clone(),
                    });
                }
            }
            at += size_of(line);
        }
        // Pass 2: encoding.
        let mut at = 0usize;
        for line in &r.body {
            let Line::Instr(op, arg) = line else { continue };
            let op = *op;
            let next = at + op.size();
            let code = &mut img.code;
            code.push(op as u8);
            let bad = || AsmError::BadOperand { op };
            match (op.operand(), arg) {
                (Operand::None, Arg::None) => {}
                (Operand::Slot, Arg::Slot(s)) => {
                    if s.index >= GLOBAL_BIT {
                        return Err(AsmError::OutOfRange(format!("slot {s}")));
                    }
                    let v = if s.global { s.index | GLOBAL_BIT } else { s.index };
                    code.extend_from_slice(&v.to_le_bytes());
                }
                (Operand::Field, Arg::Field(f)) => code.extend_from_slice(&f.to_le_bytes()),
                (Operand::Byte, Arg::Byte(b)) => code.push(*b),
                (Operand::Sys, Arg::Sys(s)) => code.push(*s as u8),
                (Operand::Routine, Arg::Routine(name)) => {
                    code.extend_from_slice(&routine_id(name)?.to_le_bytes())
                }
                (Operand::Jump, Arg::Label(l)) => {
                    let target = *labels.get(l.as_str()).ok_or_else(|| AsmError::UndefinedLabel {
                        routine: r.name.clone(),
                        label: l.clone(),
                    })?;
                    let off = target as i64 - next as i64;
                    code.extend_from_slice(&(off as i32).to_le_bytes());
                }
                (Operand::Const, arg) => {
                    let c = match (op, arg) {
                        (Op::LDC_I, Arg::Int(i)) => Const::Int(*i),
                        (Op::LDC_R, Arg::Real(x)) => Const::Real(*x),
                        (Op::LDC_S, Arg::Str(s, n)) => Const::Str(s.clone(), *n),
                        (Op::LDC_AGG, Arg::Type(t)) => Const::Type(asm.ty(t)?),
                        _ => return Err(bad()),
                    };
                    let idx = asm.intern(c)?;
                    img.code.extend_from_slice(&idx.to_le_bytes());
                }
                _ => return Err(bad()),
            }
            at = next;
        }
        img.routines.push(RoutineEntry {
            name: r.name.clone(),
            entry: entry as u32,
            len: (img.code.len() - entry) as u32,
            params: r.params.clone(),
            func: r.func,
            slots: r.slots.iter().map(|s| asm.slot(s)).collect::<Result<_, _>>()?,
        });
    }
    img.consts = asm.consts;
    Ok(img)
}

/// One decoded instruction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Decoded {
    pub at: usize,
    pub op: Op,
    /// Raw operand (sign-extended for jumps).
    pub operand: i64,
}

impl Decoded {
    pub fn next(&self) -> usize {
        self.at + self.op.size()
    }

    pub fn jump_target(&self) -> i64 {
        self.next() as i64 + self.operand
    }
}

/// Decode the instruction at `at`, which must end by `end`.
pub fn decode(code: &[u8], at: usize, end: usize) -> Result<Decoded, ImageError> {
    let fail = |offset, message: String| Err(ImageError { offset, message });
    let Some(op) = code.get(at).and_then(|b| Op::from_byte(*b)) else {
        return fail(at, format!("invalid opcode {:?}", code.get(at)));
    };
    let end = end.min(code.len());
    if at + op.size() > end {
        return fail(at, format!("truncated operand of {op}"));
    }
    let b = &code[at + 1..at + op.size()];
    let operand = match op.operand().width() {
        0 => 0,
        1 => b[0] as i64,
        2 => u16::from_le_bytes([b[0], b[1]]) as i64,
        _ => i32::from_le_bytes([b[0], b[1], b[2], b[3]]) as i64,
    };
    if op == Op::SYS && Sys::from_byte(operand as u8).is_none() {
        return fail(at, format!("unknown system call {operand}"));
    }
    Ok(Decoded { at, op, operand })
}

/// Decode a routine's code range into instructions.
pub fn decode_routine(img: &Image, r: &RoutineEntry) -> Result<Vec<Decoded>, ImageError> {
    let start = r.entry as usize;
    let end = start
        .checked_add(r.len as usize)
        .filter(|e| *e <= img.code.len())
        .ok_or_else(|| ImageError {
            offset: start,
            message: format!("routine {} extends past the code section", r.name),
        })?;
    let mut out = Vec::new();
    let mut at = start;
    while at < end {
        let d = decode(&img.code, at, end)?;
        at = d.next();
        out.push(d);
    }
    Ok(out)
}

fn type_ref(img: &Image, t: &TypeDesc) -> Result<TypeRef, ImageError> {
    Ok(match t {
        TypeDesc::Int => TypeRef::Int,
        TypeDesc::Real => TypeRef::Real,
        TypeDesc::Bool => TypeRef::Bool,
        TypeDesc::Char => TypeRef::Char,
        TypeDesc::Array(e, n) => TypeRef::Array(Box::new(type_ref(img, e)?), *n),
        TypeDesc::Struct(i) => TypeRef::Struct(
            img.structs
                .get(*i as usize)
                .ok_or_else(|| ImageError {
                    offset: 0,
                    message: format!("struct index {i} out of range"),
                })?
                .name
                .clone(),
        ),
    })
}

fn slot_decl(img: &Image, s: &SlotEntry) -> Result<SlotDecl, ImageError> {
    Ok(SlotDecl {
        name: s.name.clone(),
        ty: type_ref(img, &s.ty)?,
        hidden: s.hidden,
    })
}

/// Canonical listing with labels `L0, L1, ...` numbered through the image.
pub fn disassemble(img: &Image) -> Result<Listing, ImageError> {
    let mut listing = Listing::default();
    for s in &img.structs {
        listing.structs.push(StructItem {
            name: s.name.clone(),
            fields: s
                .fields
                .iter()
                .map(|(n, t)| Ok((n.clone(), type_ref(img, t)?)))
                .collect::<Result<_, ImageError>>()?,
        });
    }
    for g in &img.globals {
        listing.globals.push(slot_decl(img, g)?);
    }
    let routine_name = |i: u16, at: usize| {
        img.routines
            .get(i as usize)
            .map(|r| r.name.clone())
            .ok_or_else(|| ImageError {
                offset: at,
                message: format!("routine index {i} out of range"),
            })
    };
    for (c, a) in &img.interrupts {
        listing.interrupts.push((routine_name(*c, 0)?, routine_name(*a, 0)?));
    }
    let mut next_label = 0;
    for r in &img.routines {
        let code = decode_routine(img, r)?;
        let mut targets: Vec<usize> = Vec::new();
        for d in code.iter().filter(|d| d.op.is_jump()) {
            let t = d.jump_target();
            let start = r.entry as i64;
            if t < start || t >= start + r.len as i64 || !code.iter().any(|x| x.at as i64 == t) {
                return Err(ImageError {
                    offset: d.at,
                    message: format!("jump target {t} is not an instruction of {}", r.name),
                });
            }
            targets.push(t as usize);
        }
        targets.sort_unstable();
        targets.dedup();
        let labels: HashMap<usize, String> = targets
            .into_iter()
            .map(|t| {
                let l = format!("L{next_label}");
                next_label += 1;
                (t, l)
            })
            .collect();
        let mut body = Vec::new();
        for d in &code {
            if let Some(l) = labels.get(&d.at) {
                body.push(Line::Label(l.clone()));
            }
            let arg = match d.op.operand() {
                Operand::None => Arg::None,
                Operand::Slot => {
                    let v = d.operand as u16;
                    Arg::Slot(Slot {
                        global: v & GLOBAL_BIT != 0,
                        index: v & !GLOBAL_BIT,
                    })
                }
                Operand::Field => Arg::Field(d.operand as u16),
                Operand::Byte => Arg::Byte(d.operand as u8),
                Operand::Sys => Arg::Sys(Sys::from_byte(d.operand as u8).expect("decoded")),
                Operand::Routine => Arg::Routine(routine_name(d.operand as u16, d.at)?),
                Operand::Jump => Arg::Label(labels[&(d.jump_target() as usize)].clone()),
                Operand::Const => {
                    let bad = |m: &str| ImageError {
                        offset: d.at,
                        message: m.to_string(),
                    };
                    let c = img
                        .consts
                        .get(d.operand as usize)
                        .ok_or_else(|| bad("constant index out of range"))?;
                    match (d.op, c) {
                        (Op::LDC_I, Const::Int(i)) => Arg::Int(*i),
                        (Op::LDC_R, Const::Real(x)) => Arg::Real(*x),
                        (Op::LDC_S, Const::Str(s, n)) => Arg::Str(s.clone(), *n),
                        (Op::LDC_AGG, Const::Type(t)) => Arg::Type(type_ref(img, t)?),
                        _ => return Err(bad("constant kind does not match the opcode")),
                    }
                }
            };
            body.push(Line::Instr(d.op, arg));
        }
        listing.routines.push(RoutineListing {
            name: r.name.clone(),
            params: r.params.clone(),
            func: r.func,
            slots: r.slots.iter().map(|s| slot_decl(img, s)).collect::<Result<_, _>>()?,
            body,
        });
    }
    Ok(listing)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forward_jump_lands_on_target() {
        let l = Listing::parse(".routine P slots=0\n    JMP L9\n    NOP\nL9:\n    RET\n").unwrap();
        let img = assemble(&l).unwrap();
        let d = decode(&img.code, 0, img.code.len()).unwrap();
        assert_eq!(d.op, Op::JMP);
        assert_eq!(d.operand, 1);
        assert_eq!(img.code[d.jump_target() as usize], Op::RET as u8);
    }

    #[test]
    fn label_errors() {
        let undefined = Listing::parse(".routine P slots=0\n    JMP X\n").unwrap();
        assert!(matches!(assemble(&undefined), Err(AsmError::UndefinedLabel { .. })));
        let dup = Listing::parse(".routine P slots=0\nX:\nX:\n    RET\n").unwrap();
        assert!(matches!(assemble(&dup), Err(AsmError::DuplicateLabel { .. })));
    }

    #[test]
    fn constants_are_interned() {
        let l = Listing::parse(".routine P slots=0\n    LDC_I 7\n    LDC_I 7\n    LDC_R 7.0\n    RET\n").unwrap();
        assert_eq!(assemble(&l).unwrap().consts, vec![Const::Int(7), Const::Real(7.0)]);
    }
}
