//! Runtime values shared by both engines.

use std::sync::Arc;

use serde::ser::{SerializeMap, SerializeSeq};
use serde::{Serialize, Serializer};

use crate::semantics::{KrlType, StructDef};

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Int(i32),
    Real(f64),
    Bool(bool),
    Char(u8),
    Array(Vec<Value>),
    Struct(Arc<StructDef>, Vec<Value>),
}

impl Value {
    /// Zero / 0.0 / FALSE / NUL, recursively for aggregates.
    pub fn zero(ty: &KrlType) -> Value {
        match ty {
            KrlType::Int => Value::Int(0),
            KrlType::Real => Value::Real(0.0),
            KrlType::Bool => Value::Bool(false),
            KrlType::Char => Value::Char(0),
            KrlType::Array(elem, n) => Value::Array(vec![Value::zero(elem); *n as usize]),
            KrlType::Struct(def) => Value::Struct(
                def.clone(),
                def.fields.iter().map(|(_, t)| Value::zero(t)).collect(),
            ),
        }
    }

    pub fn type_name(&self) -> &'static str {
        match self {
            Value::Int(_) => "INT",
            Value::Real(_) => "REAL",
            Value::Bool(_) => "BOOL",
            Value::Char(_) => "CHAR",
            Value::Array(_) => "array",
            Value::Struct(..) => "struct",
        }
    }

    /// CHAR array padded with NUL to `len`.
    pub fn char_array(text: &str, len: usize) -> Value {
        let mut v: Vec<Value> = text.bytes().map(Value::Char).collect();
        v.resize(len, Value::Char(0));
        Value::Array(v)
    }

    /// Does this value inhabit `ty`?
    pub fn matches(&self, ty: &KrlType) -> bool {
        match (self, ty) {
            (Value::Int(_), KrlType::Int)
            | (Value::Real(_), KrlType::Real)
            | (Value::Bool(_), KrlType::Bool)
            | (Value::Char(_), KrlType::Char) => true,
            (Value::Array(items), KrlType::Array(elem, n)) => {
                items.len() == *n as usize && items.iter().all(|v| v.matches(elem))
            }
            (Value::Struct(d, vals), KrlType::Struct(td)) => {
                d.name == td.name
                    && vals.len() == td.fields.len()
                    && vals.iter().zip(&td.fields).all(|(v, (_, t))| v.matches(t))
            }
            _ => false,
        }
    }

    /// Six REAL components of an AXIS or POS value.
    pub fn six(&self) -> Option<[f64; 6]> {
        match self {
            Value::Struct(_, vals) if vals.len() == 6 => {
                let mut out = [0.0; 6];
                for (o, v) in out.iter_mut().zip(vals) {
                    match v {
                        Value::Real(r) => *o = *r,
                        _ => return None,
                    }
                }
                Some(out)
            }
            _ => None,
        }
    }

    pub fn from_six(def: Arc<StructDef>, v: [f64; 6]) -> Value {
        Value::Struct(def, v.iter().map(|x| Value::Real(*x)).collect())
    }
}

impl Serialize for Value {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Value::Int(v) => s.serialize_i32(*v),
            Value::Real(v) => s.serialize_f64(*v),
            Value::Bool(v) => s.serialize_bool(*v),
            Value::Char(c) => s.serialize_str(&(*c as char).to_string()),
            Value::Array(items) => {
                let mut seq = s.serialize_seq(Some(items.len()))?;
                for it in items {
                    seq.serialize_element(it)?;
                }
                seq.end()
            }
            Value::Struct(def, vals) => {
                let mut m = s.serialize_map(Some(vals.len()))?;
                for ((name, _), v) in def.fields.iter().zip(vals) {
                    m.serialize_entry(name, v)?;
                }
                m.end()
            }
        }
    }
}
