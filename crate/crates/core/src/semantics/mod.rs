//! Symbol tables, name resolution and type checking.
//!
//! `build_scopes` creates one table for the program and one per routine,
//! assigns frame slots and resolves every name. `check_types` then annotates
//! each expression with its type and inserts the implicit INT to REAL
//! conversions. Both passes are idempotent.

mod check;
mod resolve;
mod scope;
mod types;

pub use check::check_types;
pub use resolve::build_scopes;
pub use scope::{Scope, ScopeId, ScopeOwner, ScopeTree, Symbol, SymbolKind, ROOT};
pub use types::{axis_def, axis_type, pos_def, pos_type, KrlType, StructDef, IO_SIZE};

use crate::diag::Diagnostic;
use crate::frontend::ast::{Device, ParamMode, Program};
use crate::value::Value;

/// Global slots of the memory-backed system variables.
pub const G_VEL_AXIS: u16 = 0;
pub const G_VEL_CP: u16 = 1;
pub const G_ADVANCE: u16 = 2;
pub const G_APO_CDIS: u16 = 3;
pub const G_APO_CPTP: u16 = 4;
/// First global slot available to user declarations.
pub const FIRST_USER_GLOBAL: u16 = 5;

pub const DEFAULT_ADVANCE: i32 = 3;

/// Where a system variable lives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SysStorage {
    Memory(u16),
    Device(Device),
}

#[derive(Debug, Clone)]
pub struct SysVar {
    pub name: &'static str,
    pub ty: KrlType,
    pub storage: SysStorage,
    pub writable: bool,
}

pub fn system_variables() -> Vec<SysVar> {
    let bools = KrlType::Array(Box::new(KrlType::Bool), IO_SIZE);
    let mem = |name, ty, slot| SysVar {
        name,
        ty,
        storage: SysStorage::Memory(slot),
        writable: true,
    };
    vec![
        mem("$VEL_AXIS", KrlType::Array(Box::new(KrlType::Int), 6), G_VEL_AXIS),
        mem("$VEL_CP", KrlType::Real, G_VEL_CP),
        mem("$ADVANCE", KrlType::Int, G_ADVANCE),
        mem("$APO_CDIS", KrlType::Real, G_APO_CDIS),
        mem("$APO_CPTP", KrlType::Real, G_APO_CPTP),
        SysVar {
            name: "$IN",
            ty: bools.clone(),
            storage: SysStorage::Device(Device::In),
            writable: false,
        },
        SysVar {
            name: "$OUT",
            ty: bools,
            storage: SysStorage::Device(Device::Out),
            writable: true,
        },
        SysVar {
            name: "$POS_ACT",
            ty: pos_type(),
            storage: SysStorage::Device(Device::PosAct),
            writable: false,
        },
        SysVar {
            name: "$AXIS_ACT",
            ty: axis_type(),
            storage: SysStorage::Device(Device::AxisAct),
            writable: false,
        },
    ]
}

/// Power-on value of a memory-backed system variable.
pub fn sysvar_default(name: &str, advance: i32) -> Option<Value> {
    Some(match name {
        "$VEL_AXIS" => Value::Array(vec![Value::Int(100); 6]),
        // mm per ms, i.e. 2 m/s
        "$VEL_CP" => Value::Real(2.0),
        "$ADVANCE" => Value::Int(advance),
        "$APO_CDIS" => Value::Real(100.0),
        "$APO_CPTP" => Value::Real(10.0),
        _ => return None,
    })
}

pub fn device_type(d: Device) -> KrlType {
    match d {
        Device::In | Device::Out => KrlType::Array(Box::new(KrlType::Bool), IO_SIZE),
        Device::PosAct => pos_type(),
        Device::AxisAct => axis_type(),
    }
}

/// One frame slot.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotInfo {
    pub name: String,
    pub ty: KrlType,
    /// Compiler temporaries (`#...`), excluded from snapshots.
    pub hidden: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoutineInfo {
    pub name: String,
    pub params: Vec<(ParamMode, KrlType)>,
    pub ret: Option<KrlType>,
    /// Params first, then locals, then hidden temporaries.
    pub slots: Vec<SlotInfo>,
}

/// Tables produced by `build_scopes`.
#[derive(Debug, Clone, PartialEq)]
pub struct Analysis {
    pub scopes: ScopeTree,
    pub globals: Vec<SlotInfo>,
    pub routines: Vec<RoutineInfo>,
    pub interrupt_count: u32,
}

impl Analysis {
    pub fn local_type(&self, routine: usize, slot: u16) -> &KrlType {
        &self.routines[routine].slots[slot as usize].ty
    }

    pub fn global_type(&self, slot: u16) -> &KrlType {
        &self.globals[slot as usize].ty
    }
}

/// A type-checked program, ready for either engine.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckedProgram {
    pub ast: Program,
    pub info: Analysis,
}

/// Run both passes.
pub fn analyze(mut program: Program) -> Result<CheckedProgram, Vec<Diagnostic>> {
    let mut info = build_scopes(&mut program)?;
    check_types(&mut program, &mut info)?;
    Ok(CheckedProgram { ast: program, info })
}

/// Parse and analyze source text.
pub fn check_source(source: &str) -> Result<CheckedProgram, Vec<Diagnostic>> {
    analyze(crate::frontend::parse_source(source)?)
}
