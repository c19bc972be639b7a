use serde::Deserialize;
use thiserror::Error;

use crate::semantics::IO_SIZE;

/// One scripted input change.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
pub struct ScriptRecord {
    pub t_ms: u64,
    #[serde(rename = "in")]
    pub index: u32,
    pub value: bool,
}

#[derive(Debug, Error, PartialEq)]
pub enum ScriptError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: input index {index} outside 1..{max}")]
    Index { line: usize, index: u32, max: u32 },
}

/// Time-indexed input script. Reads at time `t` see every record with
/// `t_ms <= t`; later records for the same input win.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct IoScript {
    /// Per input, (t_ms, value) sorted by time; stable for equal times.
    by_input: Vec<Vec<(u64, bool)>>,
}

impl IoScript {
    pub fn new(mut records: Vec<ScriptRecord>) -> Self {
        records.sort_by_key(|r| r.t_ms);
        let mut by_input = vec![Vec::new(); IO_SIZE as usize];
        for r in records {
            if (1..=IO_SIZE).contains(&r.index) {
                by_input[(r.index - 1) as usize].push((r.t_ms, r.value));
            }
        }
        IoScript { by_input }
    }

    /// Parse JSON Lines; blank lines are ignored.
    pub fn parse_jsonl(text: &str) -> Result<Self, ScriptError> {
        let mut records = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let rec: ScriptRecord = serde_json::from_str(line).map_err(|e| ScriptError::Parse {
                line: i + 1,
                message: e.to_string(),
            })?;
            if !(1..=IO_SIZE).contains(&rec.index) {
                return Err(ScriptError::Index {
                    line: i + 1,
                    index: rec.index,
                    max: IO_SIZE,
                });
            }
            records.push(rec);
        }
        Ok(IoScript::new(records))
    }

    /// Value of input `index` (1-based) at time `t`.
    pub fn input(&self, index: u32, t: u64) -> bool {
        let Some(list) = self.by_input.get(index as usize - 1) else {
            return false;
        };
        let n = list.partition_point(|(rt, _)| *rt <= t);
        n > 0 && list[n - 1].1
    }
}
