//! Deterministic virtual-time robot simulator shared by both engines.
//!
//! The runtime owns the clock, the robot state, the I/O board, the motion
//! queues (one per execution context) and the interrupt scheduler. Engines
//! call into it at statement boundaries and for every robot-facing
//! statement; it calls back through [`Executor`] to evaluate interrupt
//! conditions and run interrupt routines.

pub mod io;
pub mod kinematics;
pub mod path;
pub mod trace;

use std::fmt;

use crate::frontend::ast::Blend;
use crate::interrupt::Scheduler;
use crate::semantics::{axis_def, pos_def, IO_SIZE};
use crate::semantics::{G_ADVANCE, G_APO_CDIS, G_APO_CPTP, G_VEL_AXIS, G_VEL_CP};
use crate::value::Value;

pub use io::{IoScript, ScriptError, ScriptRecord};
pub use kinematics::Vec6;
pub use path::{BlendCriterion, MotionCommand, MotionKind, Path, TriggerSpec};
pub use trace::{to_jsonl, BrakeState, EventKind, FlushReason, Frame, TraceEvent};

use path::PathAction;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Runtime,
    Halt,
}

/// A runtime failure. `location` is filled by the engine closest to the
/// fault; it is reported on stderr but kept out of the trace so traces
/// stay identical across engines.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RtError {
    pub kind: ErrorKind,
    pub message: String,
    pub location: Option<String>,
}

impl RtError {
    pub fn new(message: impl Into<String>) -> Self {
        RtError {
            kind: ErrorKind::Runtime,
            message: message.into(),
            location: None,
        }
    }

    pub fn halt() -> Self {
        RtError {
            kind: ErrorKind::Halt,
            message: "HALT".into(),
            location: None,
        }
    }

    pub fn at(mut self, location: impl FnOnce() -> String) -> Self {
        if self.location.is_none() {
            self.location = Some(location());
        }
        self
    }
}

impl fmt::Display for RtError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.location {
            Some(loc) => write!(f, "{} at {}", self.message, loc),
            None => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for RtError {}

pub type RtResult<T> = Result<T, RtError>;

/// Callbacks from the runtime into the engine that owns it.
pub trait Executor {
    /// Evaluate the condition of interrupt declaration `decl` without side
    /// effects.
    fn eval_condition(&mut self, rt: &mut Runtime, decl: u32) -> RtResult<bool>;
    /// Run the action of interrupt declaration `decl` to completion.
    fn run_interrupt(&mut self, rt: &mut Runtime, decl: u32) -> RtResult<()>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct RuntimeConfig {
    /// Emit a sample event every this many ms while moving.
    pub sample_interval: u64,
    /// Abort once virtual time exceeds this.
    pub time_limit_ms: u64,
    /// Abort after this many statement poll points.
    pub step_budget: Option<u64>,
}

impl Default for RuntimeConfig {
    fn default() -> Self {
        RuntimeConfig {
            sample_interval: 10,
            time_limit_ms: 10_000_000,
            step_budget: None,
        }
    }
}

/// Motion-related system variables, read when a motion is submitted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionParams {
    pub vel_axis: [i32; 6],
    pub vel_cp: f64,
    pub advance: i32,
    pub apo_cdis: f64,
    pub apo_cptp: f64,
}

impl MotionParams {
    pub fn from_globals(g: &[Value]) -> RtResult<Self> {
        let real = |slot: u16| match g[slot as usize] {
            Value::Real(r) => r,
            _ => f64::NAN,
        };
        let mut vel_axis = [0; 6];
        if let Value::Array(items) = &g[G_VEL_AXIS as usize] {
            for (v, item) in vel_axis.iter_mut().zip(items) {
                if let Value::Int(i) = item {
                    *v = *i;
                }
            }
        }
        let advance = match g[G_ADVANCE as usize] {
            Value::Int(i) => i,
            _ => 0,
        };
        let p = MotionParams {
            vel_axis,
            vel_cp: real(G_VEL_CP),
            advance,
            apo_cdis: real(G_APO_CDIS),
            apo_cptp: real(G_APO_CPTP),
        };
        p.validate()?;
        Ok(p)
    }

    fn validate(&self) -> RtResult<()> {
        if let Some(v) = self.vel_axis.iter().find(|v| !(1..=100).contains(*v)) {
            return Err(RtError::new(format!("$VEL_AXIS value {v} outside 1..100")));
        }
        if !(self.vel_cp.is_finite() && self.vel_cp > 0.0) {
            return Err(RtError::new(format!("$VEL_CP must be positive, found {}", self.vel_cp)));
        }
        if self.advance < 1 {
            return Err(RtError::new(format!("$ADVANCE must be at least 1, found {}", self.advance)));
        }
        for (name, r) in [("$APO_CDIS", self.apo_cdis), ("$APO_CPTP", self.apo_cptp)] {
            if !(r.is_finite() && r >= 0.0) {
                return Err(RtError::new(format!("{name} must be non-negative, found {r}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
struct Active {
    path: Path,
    progress: u64,
    next_event: usize,
}

impl Active {
    fn done(&self) -> bool {
        self.progress >= self.path.end && self.next_event == self.path.events.len()
    }
}

/// Final status of a run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Status {
    Ok,
    Halted,
    Failed(RtError),
}

pub struct Runtime {
    now: u64,
    joints: Vec6,
    script: IoScript,
    outputs: Vec<bool>,
    trace: Vec<TraceEvent>,
    next_ordinal: u32,
    active: Option<Active>,
    paused: bool,
    /// Context depth of the interrupt whose BRAKE paused the path.
    brake_owner: Option<usize>,
    sched: Scheduler,
    steps: u64,
    config: RuntimeConfig,
}

fn check_io_index(index: i32) -> RtResult<u32> {
    if index >= 1 && index as u32 <= IO_SIZE {
        Ok(index as u32)
    } else {
        Err(RtError::new(format!("I/O index {index} outside 1..{IO_SIZE}")))
    }
}

impl Runtime {
    pub fn new(script: IoScript, config: RuntimeConfig) -> Self {
        Runtime {
            now: 0,
            joints: [0.0; 6],
            script,
            outputs: vec![false; IO_SIZE as usize],
            trace: Vec::new(),
            next_ordinal: 0,
            active: None,
            paused: false,
            brake_owner: None,
            sched: Scheduler::new(),
            steps: 0,
            config,
        }
    }

    pub fn now(&self) -> u64 {
        self.now
    }

    pub fn joints(&self) -> Vec6 {
        self.joints
    }

    pub fn trace(&self) -> &[TraceEvent] {
        &self.trace
    }

    pub fn into_trace(self) -> Vec<TraceEvent> {
        self.trace
    }

    pub fn outputs(&self) -> &[bool] {
        &self.outputs
    }

    pub fn is_moving(&self) -> bool {
        self.active.is_some()
    }

    pub fn is_paused(&self) -> bool {
        self.paused
    }

    /// Number of running execution contexts (1 = main program only).
    pub fn context_depth(&self) -> usize {
        self.sched.depth()
    }

    pub fn scheduler(&self) -> &Scheduler {
        &self.sched
    }

    fn emit(&mut self, kind: EventKind) {
        self.trace.push(TraceEvent { t_ms: self.now, kind });
    }

    /// Statement poll point: counts a step and services interrupts.
    #[inline]
    pub fn poll(&mut self, host: &mut dyn Executor) -> RtResult<()> {
        self.steps += 1;
        if let Some(budget) = self.config.step_budget {
            if self.steps > budget {
                return Err(RtError::new(format!("step budget of {budget} exhausted")));
            }
        }
        if self.sched.any_enabled() {
            self.service_interrupts(host)
        } else {
            Ok(())
        }
    }

    fn service_interrupts(&mut self, host: &mut dyn Executor) -> RtResult<()> {
        if !self.sched.any_enabled() {
            return Ok(());
        }
        for (priority, decl) in self.sched.enabled() {
            let value = host.eval_condition(self, decl)?;
            self.sched.observe(priority, value);
        }
        while let Some((priority, decl)) = self.sched.next_to_fire() {
            self.fire(host, priority, decl)?;
        }
        Ok(())
    }

    fn fire(&mut self, host: &mut dyn Executor, priority: u8, decl: u32) -> RtResult<()> {
        self.emit(EventKind::InterruptFired { priority });
        self.sched.push(priority);
        let depth = self.sched.depth();
        host.run_interrupt(self, decl)?;
        self.flush(host, FlushReason::InterruptEnd)?;
        self.sched.finish(priority);
        if self.brake_owner == Some(depth) {
            self.brake_owner = None;
            self.paused = false;
            self.emit(EventKind::Brake {
                state: BrakeState::Released,
            });
        }
        self.emit(EventKind::InterruptDone { priority });
        Ok(())
    }

    /// Advance virtual time by one millisecond.
    pub fn tick(&mut self, host: &mut dyn Executor) -> RtResult<()> {
        self.now += 1;
        if self.now > self.config.time_limit_ms {
            return Err(RtError::new(format!(
                "virtual time limit of {} ms exceeded",
                self.config.time_limit_ms
            )));
        }
        if !self.paused {
            if let Some(a) = &mut self.active {
                a.progress += 1;
                self.joints = a.path.position(a.progress);
                self.path_events();
            }
        }
        if self.active.is_some() && self.now % self.config.sample_interval == 0 {
            let joints = self.joints;
            self.emit(EventKind::Sample {
                joints,
                pose: kinematics::forward(&joints),
            });
        }
        self.service_interrupts(host)
    }

    /// Emit path events due at the current progress.
    fn path_events(&mut self) {
        loop {
            let Some(a) = &mut self.active else { return };
            let Some(ev) = a.path.events.get(a.next_event) else {
                return;
            };
            if ev.t > a.progress {
                return;
            }
            let action = ev.action.clone();
            a.next_event += 1;
            match action {
                PathAction::Emit(kind) => self.emit(kind),
                PathAction::Trigger { motion, spec } => {
                    self.emit(EventKind::TriggerFired {
                        motion,
                        distance: spec.distance,
                        delay: spec.delay_ms,
                    });
                    self.write_output(spec.index, spec.value);
                }
            }
        }
    }

    fn write_output(&mut self, index: u32, value: bool) {
        self.outputs[index as usize - 1] = value;
        self.emit(EventKind::OutputSet { index, value });
    }

    /// Queue a motion for the current context, flushing when it cannot be
    /// blended or the queue is full.
    pub fn submit_motion(
        &mut self,
        host: &mut dyn Executor,
        kind: MotionKind,
        target: &Value,
        blend: Blend,
        params: MotionParams,
    ) -> RtResult<()> {
        if self.active.is_some() {
            return Err(RtError::new("motion statement while the robot is moving"));
        }
        let frame = match target {
            Value::Struct(def, _) if def.name == "AXIS" => Frame::Axis,
            Value::Struct(def, _) if def.name == "POS" => Frame::Pos,
            other => {
                return Err(RtError::new(format!(
                    "motion target must be AXIS or POS, found {}",
                    other.type_name()
                )))
            }
        };
        let six = target
            .six()
            .ok_or_else(|| RtError::new("malformed motion target"))?;
        if !kinematics::is_finite(&six) {
            return Err(RtError::new("unreachable target: non-finite coordinate"));
        }
        let criterion = match blend {
            Blend::None => BlendCriterion::None,
            Blend::CDis => BlendCriterion::Dis(params.apo_cdis),
            Blend::CPtp => BlendCriterion::Ptp(params.apo_cptp),
        };
        let ordinal = self.next_ordinal;
        self.next_ordinal += 1;
        let ctx = self.sched.top_mut();
        let triggers = std::mem::take(&mut ctx.armed);
        ctx.queue.push(MotionCommand {
            ordinal,
            kind,
            frame,
            target: six,
            blend: criterion,
            vel_axis: params.vel_axis,
            vel_cp: params.vel_cp,
            triggers,
        });
        let queued = ctx.queue.len();
        if criterion == BlendCriterion::None {
            self.flush(host, FlushReason::NonBlendable)
        } else if queued > params.advance as usize {
            self.flush(host, FlushReason::Capacity)
        } else {
            Ok(())
        }
    }

    /// Arm a trigger for the current context's next motion.
    pub fn arm_trigger(&mut self, distance: i32, delay_ms: i32, index: i32, value: bool) -> RtResult<()> {
        let index = check_io_index(index)?;
        if !(0..=1).contains(&distance) {
            return Err(RtError::new(format!("trigger DISTANCE must be 0 or 1, found {distance}")));
        }
        self.sched.top_mut().armed.push(TriggerSpec {
            distance: distance as u8,
            delay_ms,
            index,
            value,
        });
        Ok(())
    }

    /// Plan and execute every motion queued by the current context.
    pub fn flush(&mut self, host: &mut dyn Executor, reason: FlushReason) -> RtResult<()> {
        let cmds = std::mem::take(&mut self.sched.top_mut().queue);
        if cmds.is_empty() {
            return Ok(());
        }
        debug_assert!(self.active.is_none());
        self.emit(EventKind::Flush {
            reason,
            motions: cmds.len() as u32,
        });
        let path = Path::plan(&self.joints, &cmds);
        self.active = Some(Active {
            path,
            progress: 0,
            next_event: 0,
        });
        self.path_events();
        while self.active.as_ref().is_some_and(|a| !a.done()) {
            self.tick(host)?;
        }
        if let Some(a) = self.active.take() {
            self.joints = a.path.position(a.path.end);
        }
        Ok(())
    }

    pub fn read_input(&mut self, host: &mut dyn Executor, index: i32) -> RtResult<bool> {
        let index = check_io_index(index)?;
        self.flush(host, FlushReason::Barrier)?;
        let value = self.script.input(index, self.now);
        self.emit(EventKind::InputRead { index, value });
        Ok(value)
    }

    /// Input value without a barrier or event, for polled conditions.
    pub fn peek_input(&self, index: i32) -> RtResult<bool> {
        let index = check_io_index(index)?;
        Ok(self.script.input(index, self.now))
    }

    pub fn read_output(&mut self, host: &mut dyn Executor, index: i32) -> RtResult<bool> {
        let index = check_io_index(index)?;
        self.flush(host, FlushReason::Barrier)?;
        Ok(self.outputs[index as usize - 1])
    }

    pub fn peek_output(&self, index: i32) -> RtResult<bool> {
        let index = check_io_index(index)?;
        Ok(self.outputs[index as usize - 1])
    }

    pub fn set_output(&mut self, host: &mut dyn Executor, index: i32, value: bool) -> RtResult<()> {
        let index = check_io_index(index)?;
        self.flush(host, FlushReason::Barrier)?;
        self.write_output(index, value);
        Ok(())
    }

    /// `$POS_ACT`; `peek` skips the advance-run barrier.
    pub fn read_pose(&mut self, host: &mut dyn Executor, peek: bool) -> RtResult<Value> {
        if !peek {
            self.flush(host, FlushReason::Barrier)?;
        }
        Ok(Value::from_six(pos_def(), kinematics::forward(&self.joints)))
    }

    /// `$AXIS_ACT`; `peek` skips the advance-run barrier.
    pub fn read_axes(&mut self, host: &mut dyn Executor, peek: bool) -> RtResult<Value> {
        if !peek {
            self.flush(host, FlushReason::Barrier)?;
        }
        Ok(Value::from_six(axis_def(), self.joints))
    }

    pub fn brake(&mut self) {
        let state = if self.active.is_none() {
            BrakeState::Idle
        } else {
            if !self.paused {
                self.paused = true;
                self.brake_owner = Some(self.sched.depth());
            }
            BrakeState::Engaged
        };
        self.emit(EventKind::Brake { state });
    }

    pub fn wait_sec(&mut self, host: &mut dyn Executor, seconds: f64) -> RtResult<()> {
        self.flush(host, FlushReason::Barrier)?;
        if !(seconds.is_finite() && seconds >= 0.0) {
            return Err(RtError::new(format!("WAIT SEC needs a non-negative duration, found {seconds}")));
        }
        // A deadline rather than a tick count: time spent in interrupts
        // that preempt the wait counts toward it.
        let deadline = self.now + (seconds * 1000.0).round() as u64;
        while self.now < deadline {
            self.tick(host)?;
        }
        Ok(())
    }

    pub fn declare_interrupt(&mut self, host: &mut dyn Executor, priority: i32, decl: u32) -> RtResult<()> {
        let p = Scheduler::check_priority(priority).map_err(RtError::new)?;
        let current = host.eval_condition(self, decl)?;
        self.sched.declare(p, decl, current);
        Ok(())
    }

    pub fn set_interrupt(&mut self, host: &mut dyn Executor, priority: i32, on: bool) -> RtResult<()> {
        let p = Scheduler::check_priority(priority).map_err(RtError::new)?;
        let decl = self
            .sched
            .get(p)
            .map(|d| d.decl)
            .ok_or_else(|| RtError::new(format!("interrupt {p} is not declared")))?;
        let current = if on { host.eval_condition(self, decl)? } else { false };
        self.sched.set_enabled(p, on, current).map_err(RtError::new)
    }

    /// Close the run: flush on success, then record the final status.
    pub fn finish(&mut self, host: &mut dyn Executor, result: RtResult<()>) -> Status {
        let result = result.and_then(|()| self.flush(host, FlushReason::ProgramEnd));
        match result {
            Ok(()) => {
                self.emit(EventKind::ProgramEnd { status: "ok" });
                Status::Ok
            }
            Err(e) if e.kind == ErrorKind::Halt => {
                self.emit(EventKind::ProgramEnd { status: "halt" });
                Status::Halted
            }
            Err(e) => {
                self.emit(EventKind::Error {
                    message: e.message.clone(),
                });
                self.emit(EventKind::ProgramEnd { status: "error" });
                Status::Failed(e)
            }
        }
    }
}
