use serde::Serialize;

/// One observable event, stamped with virtual time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceEvent {
    pub t_ms: u64,
    #[serde(flatten)]
    pub kind: EventKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Frame {
    #[serde(rename = "AXIS")]
    Axis,
    #[serde(rename = "POS")]
    Pos,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FlushReason {
    Barrier,
    Capacity,
    NonBlendable,
    ProgramEnd,
    InterruptEnd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BrakeState {
    /// The active motion was paused.
    Engaged,
    /// The braking interrupt finished; motion resumes.
    Released,
    /// Nothing was moving.
    Idle,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum EventKind {
    Flush {
        reason: FlushReason,
        motions: u32,
    },
    MotionStart {
        motion: u32,
        kind: &'static str,
        frame: Frame,
        target: [f64; 6],
        blend: &'static str,
    },
    BlendStart {
        from: u32,
        to: u32,
    },
    BlendEnd {
        from: u32,
        to: u32,
    },
    MotionEnd {
        motion: u32,
    },
    Sample {
        joints: [f64; 6],
        pose: [f64; 6],
    },
    OutputSet {
        index: u32,
        value: bool,
    },
    InputRead {
        index: u32,
        value: bool,
    },
    TriggerFired {
        motion: u32,
        distance: u8,
        delay: i32,
    },
    InterruptFired {
        priority: u8,
    },
    InterruptDone {
        priority: u8,
    },
    Brake {
        state: BrakeState,
    },
    ProgramEnd {
        status: &'static str,
    },
    Error {
        message: String,
    },
}

impl EventKind {
    pub fn name(&self) -> &'static str {
        match self {
            EventKind::Flush { .. } => "flush",
            EventKind::MotionStart { .. } => "motion_start",
            EventKind::BlendStart { .. } => "blend_start",
            EventKind::BlendEnd { .. } => "blend_end",
            EventKind::MotionEnd { .. } => "motion_end",
            EventKind::Sample { .. } => "sample",
            EventKind::OutputSet { .. } => "output_set",
            EventKind::InputRead { .. } => "input_read",
            EventKind::TriggerFired { .. } => "trigger_fired",
            EventKind::InterruptFired { .. } => "interrupt_fired",
            EventKind::InterruptDone { .. } => "interrupt_done",
            EventKind::Brake { .. } => "brake",
            EventKind::ProgramEnd { .. } => "program_end",
            EventKind::Error { .. } => "error",
        }
    }
}

/// Serialize events as JSON Lines, one event per line.
pub fn to_jsonl(events: &[TraceEvent]) -> String {
    let mut out = String::new();
    for e in events {
        out.push_str(&serde_json::to_string(e).expect("trace events serialize"));
        out.push('\n');
    }
    out
}
