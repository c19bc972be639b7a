//! Engine-neutral run options and results.

use serde::ser::SerializeMap;
use serde::{Serialize, Serializer};

use crate::runtime::{IoScript, RuntimeConfig, Status, TraceEvent};
use crate::semantics::{sysvar_default, Analysis, SlotInfo, DEFAULT_ADVANCE};
use crate::value::Value;

/// Maximum program call depth in both engines.
pub const MAX_CALL_DEPTH: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EngineKind {
    #[default]
    Tree,
    Vm,
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    /// Entry routine; defaults to the first routine in the file.
    pub entry: Option<String>,
    pub script: IoScript,
    pub config: RuntimeConfig,
    /// Initial value of `$ADVANCE`.
    pub advance: i32,
    /// Record program-stack depth around every GOTO.
    pub record_jumps: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            entry: None,
            script: IoScript::default(),
            config: RuntimeConfig::default(),
            advance: DEFAULT_ADVANCE,
            record_jumps: false,
        }
    }
}

/// Depth of the program call stack when a GOTO left and where it landed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct JumpRecord {
    pub before: usize,
    pub after: usize,
}

/// Final memory: globals (system variables included), locals of the entry
/// routine without compiler temporaries, and the outputs that are set.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Snapshot {
    pub globals: Vec<(String, Value)>,
    pub locals: Vec<(String, Value)>,
    pub outputs: Vec<u32>,
}

struct Named<'a>(&'a [(String, Value)]);

impl Serialize for Named<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut m = s.serialize_map(Some(self.0.len()))?;
        for (k, v) in self.0 {
            m.serialize_entry(k, v)?;
        }
        m.end()
    }
}

impl Serialize for Snapshot {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut m = s.serialize_map(Some(3))?;
        m.serialize_entry("globals", &Named(&self.globals))?;
        m.serialize_entry("locals", &Named(&self.locals))?;
        m.serialize_entry("outputs", &self.outputs)?;
        m.end()
    }
}

impl Snapshot {
    pub fn capture(globals: &[SlotInfo], gvals: &[Value], locals: &[SlotInfo], lvals: &[Value], outputs: &[bool]) -> Self {
        let pairs = |infos: &[SlotInfo], vals: &[Value]| {
            infos
                .iter()
                .zip(vals)
                .filter(|(i, _)| !i.hidden)
                .map(|(i, v)| (i.name.clone(), v.clone()))
                .collect()
        };
        Snapshot {
            globals: pairs(globals, gvals),
            locals: pairs(locals, lvals),
            outputs: outputs
                .iter()
                .enumerate()
                .filter(|(_, on)| **on)
                .map(|(i, _)| i as u32 + 1)
                .collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("snapshot serializes")
    }

    pub fn global(&self, name: &str) -> Option<&Value> {
        self.globals.iter().find(|(n, _)| n == name).map(|(_, v)| v)
    }

    pub fn local(&self, name: &str) -> Option<&Value> {
        self.locals.iter().find(|(n, _)| n == name).map(|(_, v)| v)
    }
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub status: Status,
    pub trace: Vec<TraceEvent>,
    pub snapshot: Snapshot,
    pub jumps: Vec<JumpRecord>,
}

impl Outcome {
    /// 0 on success, 1 on a runtime error or HALT.
    pub fn exit_code(&self) -> i32 {
        match self.status {
            Status::Ok => 0,
            _ => 1,
        }
    }

    pub fn trace_jsonl(&self) -> String {
        crate::runtime::to_jsonl(&self.trace)
    }
}

/// A run could not start.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SetupError {
    #[error("no routine named {0}")]
    UnknownEntry(String),
    #[error("program has no routines")]
    Empty,
    #[error("entry routine {0} must not take parameters")]
    EntryHasParams(String),
}

/// Pick the entry routine and check it can be started.
pub fn entry_routine(info: &Analysis, entry: Option<&str>) -> Result<usize, SetupError> {
    let idx = match entry {
        Some(name) => {
            let upper = name.to_ascii_uppercase();
            info.routines
                .iter()
                .position(|r| r.name == upper)
                .ok_or(SetupError::UnknownEntry(upper))?
        }
        None if info.routines.is_empty() => return Err(SetupError::Empty),
        None => 0,
    };
    if !info.routines[idx].params.is_empty() {
        return Err(SetupError::EntryHasParams(info.routines[idx].name.clone()));
    }
    Ok(idx)
}

/// Zeroed global memory with system variables at their power-on values.
pub fn initial_globals(globals: &[SlotInfo], advance: i32) -> Vec<Value> {
    globals
        .iter()
        .map(|g| sysvar_default(&g.name, advance).unwrap_or_else(|| Value::zero(&g.ty)))
        .collect()
}
