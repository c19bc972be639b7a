//! Binary image: `KRLB` magic, a u16 version, then the struct table,
//! constant pool, global layout, routine table, interrupt table and code.
//! All integers are little-endian; strings are u16-length-prefixed UTF-8.

use std::sync::Arc;

use crate::frontend::ast::ParamMode;
use crate::semantics::{KrlType, StructDef};
use crate::value::Value;

pub const MAGIC: &[u8; 4] = b"KRLB";
pub const VERSION: u16 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum TypeDesc {
    Int,
    Real,
    Bool,
    Char,
    Array(Box<TypeDesc>, u32),
    /// Index into the struct table.
    Struct(u16),
}

#[derive(Debug, Clone, PartialEq)]
pub struct StructEntry {
    /// Listing name; a `@n` suffix keeps same-named definitions apart.
    pub name: String,
    pub fields: Vec<(String, TypeDesc)>,
}

impl StructEntry {
    /// Name the definition carries at run time.
    pub fn source_name(&self) -> &str {
        self.name.split('@').next().unwrap_or(&self.name)
    }
}

#[derive(Debug, Clone)]
pub enum Const {
    Int(i32),
    Real(f64),
    /// Character array text and declared length.
    Str(String, u32),
    /// Aggregate template: the zero value of a type.
    Type(TypeDesc),
}

impl PartialEq for Const {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Const::Int(a), Const::Int(b)) => a == b,
            // Bitwise, so interning keeps -0.0 and 0.0 apart.
            (Const::Real(a), Const::Real(b)) => a.to_bits() == b.to_bits(),
            (Const::Str(a, n), Const::Str(b, m)) => a == b && n == m,
            (Const::Type(a), Const::Type(b)) => a == b,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlotEntry {
    pub name: String,
    pub ty: TypeDesc,
    pub hidden: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoutineEntry {
    pub name: String,
    /// Code range `[entry, entry + len)`.
    pub entry: u32,
    pub len: u32,
    pub params: Vec<ParamMode>,
    pub func: bool,
    pub slots: Vec<SlotEntry>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Image {
    pub structs: Vec<StructEntry>,
    pub consts: Vec<Const>,
    pub globals: Vec<SlotEntry>,
    pub routines: Vec<RoutineEntry>,
    /// `(condition routine, action routine)` per interrupt declaration.
    pub interrupts: Vec<(u16, u16)>,
    pub code: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("malformed image at offset {offset}: {message}")]
pub struct ImageError {
    pub offset: usize,
    pub message: String,
}

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u16(&mut self, v: u16) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn str(&mut self, s: &str) {
        self.u16(s.len() as u16);
        self.0.extend_from_slice(s.as_bytes());
    }
    fn ty(&mut self, t: &TypeDesc) {
        match t {
            TypeDesc::Int => self.u8(0),
            TypeDesc::Real => self.u8(1),
            TypeDesc::Bool => self.u8(2),
            TypeDesc::Char => self.u8(3),
            TypeDesc::Array(e, n) => {
                self.u8(4);
                self.u32(*n);
                self.ty(e);
            }
            TypeDesc::Struct(i) => {
                self.u8(5);
                self.u16(*i);
            }
        }
    }
    fn slot(&mut self, s: &SlotEntry) {
        self.str(&s.name);
        self.ty(&s.ty);
        self.u8(s.hidden as u8);
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn fail<T>(&self, message: impl Into<String>) -> Result<T, ImageError> {
        Err(ImageError {
            offset: self.pos,
            message: message.into(),
        })
    }
    fn take(&mut self, n: usize) -> Result<&'a [u8], ImageError> {
        if self.bytes.len() - self.pos < n {
            return self.fail("truncated");
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8, ImageError> {
        Ok(self.take(1)?[0])
    }
    fn u16(&mut self) -> Result<u16, ImageError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }
    fn u32(&mut self) -> Result<u32, ImageError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
    fn str(&mut self) -> Result<String, ImageError> {
        let n = self.u16()? as usize;
        let start = self.pos;
        let bytes = self.take(n)?;
        String::from_utf8(bytes.to_vec()).map_err(|_| ImageError {
            offset: start,
            message: "invalid UTF-8".into(),
        })
    }
    fn ty(&mut self, depth: u32) -> Result<TypeDesc, ImageError> {
        if depth > 8 {
            return self.fail("type nested too deeply");
        }
        Ok(match self.u8()? {
            0 => TypeDesc::Int,
            1 => TypeDesc::Real,
            2 => TypeDesc::Bool,
            3 => TypeDesc::Char,
            4 => {
                let n = self.u32()?;
                TypeDesc::Array(Box::new(self.ty(depth + 1)?), n)
            }
            5 => TypeDesc::Struct(self.u16()?),
            t => {
                self.pos -= 1;
                return self.fail(format!("unknown type tag {t}"));
            }
        })
    }
    fn slot(&mut self) -> Result<SlotEntry, ImageError> {
        Ok(SlotEntry {
            name: self.str()?,
            ty: self.ty(0)?,
            hidden: self.u8()? != 0,
        })
    }
    fn count(&mut self) -> Result<usize, ImageError> {
        Ok(self.u16()? as usize)
    }
}

impl Image {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer(Vec::with_capacity(64 + self.code.len()));
        w.0.extend_from_slice(MAGIC);
        w.u16(VERSION);
        w.u16(self.structs.len() as u16);
        for s in &self.structs {
            w.str(&s.name);
            w.u16(s.fields.len() as u16);
            for (n, t) in &s.fields {
                w.str(n);
                w.ty(t);
            }
        }
        w.u16(self.consts.len() as u16);
        for c in &self.consts {
            match c {
                Const::Int(i) => {
                    w.u8(0);
                    w.0.extend_from_slice(&i.to_le_bytes());
                }
                Const::Real(r) => {
                    w.u8(1);
                    w.0.extend_from_slice(&r.to_le_bytes());
                }
                Const::Str(s, n) => {
                    w.u8(2);
                    w.str(s);
                    w.u32(*n);
                }
                Const::Type(t) => {
                    w.u8(3);
                    w.ty(t);
                }
            }
        }
        w.u16(self.globals.len() as u16);
        for g in &self.globals {
            w.slot(g);
        }
        w.u16(self.routines.len() as u16);
        for r in &self.routines {
            w.str(&r.name);
            w.u32(r.entry);
            w.u32(r.len);
            w.u8(r.params.len() as u8);
            for m in &r.params {
                w.u8(matches!(m, ParamMode::Out) as u8);
            }
            w.u8(r.func as u8);
            w.u16(r.slots.len() as u16);
            for s in &r.slots {
                w.slot(s);
            }
        }
        w.u16(self.interrupts.len() as u16);
        for (c, a) in &self.interrupts {
            w.u16(*c);
            w.u16(*a);
        }
        w.u32(self.code.len() as u32);
        w.0.extend_from_slice(&self.code);
        w.0
    }

    /// Decode the container. Cross-references are checked by the verifier.
    pub fn from_bytes(bytes: &[u8]) -> Result<Image, ImageError> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            r.pos = 0;
            return r.fail("bad magic");
        }
        let version = r.u16()?;
        if version != VERSION {
            r.pos -= 2;
            return r.fail(format!("unsupported version {version}"));
        }
        let mut img = Image::default();
        for _ in 0..r.count()? {
            let name = r.str()?;
            let mut fields = Vec::new();
            for _ in 0..r.count()? {
                fields.push((r.str()?, r.ty(0)?));
            }
            img.structs.push(StructEntry { name, fields });
        }
        for _ in 0..r.count()? {
            let at = r.pos;
            img.consts.push(match r.u8()? {
                0 => Const::Int(i32::from_le_bytes(r.take(4)?.try_into().expect("4 bytes"))),
                1 => Const::Real(f64::from_le_bytes(r.take(8)?.try_into().expect("8 bytes"))),
                2 => {
                    let s = r.str()?;
                    Const::Str(s, r.u32()?)
                }
                3 => Const::Type(r.ty(0)?),
                t => {
                    r.pos = at;
                    return r.fail(format!("unknown constant tag {t}"));
                }
            });
        }
        for _ in 0..r.count()? {
            img.globals.push(r.slot()?);
        }
        for _ in 0..r.count()? {
            let name = r.str()?;
            let entry = r.u32()?;
            let len = r.u32()?;
            let mut params = Vec::new();
            for _ in 0..r.u8()? {
                params.push(if r.u8()? != 0 { ParamMode::Out } else { ParamMode::In });
            }
            let func = r.u8()? != 0;
            let mut slots = Vec::new();
            for _ in 0..r.count()? {
                slots.push(r.slot()?);
            }
            img.routines.push(RoutineEntry {
                name,
                entry,
                len,
                params,
                func,
                slots,
            });
        }
        for _ in 0..r.count()? {
            img.interrupts.push((r.u16()?, r.u16()?));
        }
        let n = r.u32()? as usize;
        img.code = r.take(n)?.to_vec();
        if r.pos != bytes.len() {
            return r.fail("trailing bytes");
        }
        Ok(img)
    }

    pub fn routine_index(&self, name: &str) -> Option<usize> {
        self.routines.iter().position(|r| r.name == name)
    }
}

/// Struct definitions and types rebuilt from a verified image.
#[derive(Debug, Clone)]
pub struct TypeContext {
    pub defs: Vec<Arc<StructDef>>,
}

impl TypeContext {
    /// Requires every struct to refer only to earlier structs.
    pub fn new(img: &Image) -> Self {
        let mut defs: Vec<Arc<StructDef>> = Vec::with_capacity(img.structs.len());
        for s in &img.structs {
            let fields = s
                .fields
                .iter()
                .map(|(n, t)| (n.clone(), krl_type(&defs, t)))
                .collect();
            defs.push(Arc::new(StructDef {
                name: s.source_name().to_string(),
                fields,
            }));
        }
        TypeContext { defs }
    }

    pub fn krl_type(&self, t: &TypeDesc) -> KrlType {
        krl_type(&self.defs, t)
    }

    pub fn zero(&self, t: &TypeDesc) -> Value {
        Value::zero(&self.krl_type(t))
    }
}

fn krl_type(defs: &[Arc<StructDef>], t: &TypeDesc) -> KrlType {
    match t {
        TypeDesc::Int => KrlType::Int,
        TypeDesc::Real => KrlType::Real,
        TypeDesc::Bool => KrlType::Bool,
        TypeDesc::Char => KrlType::Char,
        TypeDesc::Array(e, n) => KrlType::Array(Box::new(krl_type(defs, e)), *n),
        TypeDesc::Struct(i) => KrlType::Struct(defs[*i as usize].clone()),
    }
}
