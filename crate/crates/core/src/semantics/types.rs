use std::fmt;
use std::sync::Arc;

#[derive(Debug, Clone, PartialEq)]
pub struct StructDef {
    pub name: String,
    pub fields: Vec<(String, KrlType)>,
}

impl StructDef {
    pub fn field_index(&self, name: &str) -> Option<usize> {
        self.fields.iter().position(|(n, _)| n == name)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum KrlType {
    Int,
    Real,
    Bool,
    Char,
    Array(Box<KrlType>, u32),
    Struct(Arc<StructDef>),
}

impl KrlType {
    pub fn is_numeric(&self) -> bool {
        matches!(self, KrlType::Int | KrlType::Real)
    }

    pub fn is_scalar(&self) -> bool {
        matches!(self, KrlType::Int | KrlType::Real | KrlType::Bool | KrlType::Char)
    }

    pub fn struct_def(&self) -> Option<&Arc<StructDef>> {
        match self {
            KrlType::Struct(d) => Some(d),
            _ => None,
        }
    }

    pub fn is_struct(&self, name: &str) -> bool {
        matches!(self, KrlType::Struct(d) if d.name == name)
    }

    /// Lossless conversion: identity, or INT widening to REAL.
    pub fn converts_to(&self, target: &KrlType) -> bool {
        self == target || (*self == KrlType::Int && *target == KrlType::Real)
    }
}

impl fmt::Display for KrlType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KrlType::Int => f.write_str("INT"),
            KrlType::Real => f.write_str("REAL"),
            KrlType::Bool => f.write_str("BOOL"),
            KrlType::Char => f.write_str("CHAR"),
            KrlType::Array(elem, n) => write!(f, "{elem}[{n}]"),
            KrlType::Struct(d) => f.write_str(&d.name),
        }
    }
}

fn real_struct(name: &str, fields: &[&str]) -> Arc<StructDef> {
    Arc::new(StructDef {
        name: name.to_string(),
        fields: fields
            .iter()
            .map(|f| (f.to_string(), KrlType::Real))
            .collect(),
    })
}

/// AXIS {A1..A6: REAL}
pub fn axis_def() -> Arc<StructDef> {
    real_struct("AXIS", &["A1", "A2", "A3", "A4", "A5", "A6"])
}

/// POS {X,Y,Z,A,B,C: REAL}
pub fn pos_def() -> Arc<StructDef> {
    real_struct("POS", &["X", "Y", "Z", "A", "B", "C"])
}

pub fn axis_type() -> KrlType {
    KrlType::Struct(axis_def())
}

pub fn pos_type() -> KrlType {
    KrlType::Struct(pos_def())
}

/// Number of digital inputs and outputs.
pub const IO_SIZE: u32 = 256;
