//! Interrupt bookkeeping: declarations per priority, edge detection, and the
//! LIFO stack of execution contexts. The runtime drives it from its poll
//! points; only the context on top of the stack executes.

use crate::runtime::path::{MotionCommand, TriggerSpec};

pub const MIN_PRIORITY: i32 = 1;
pub const MAX_PRIORITY: i32 = 32;

/// Priority assigned to the main program; every interrupt outranks it.
pub const MAIN_PRIORITY: u8 = MAX_PRIORITY as u8 + 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InterruptDecl {
    pub priority: u8,
    /// Program-wide declaration id; names both condition and action.
    pub decl: u32,
    pub enabled: bool,
    pub last: bool,
    /// An edge was seen while a context of equal or higher priority ran.
    pub pending: bool,
}

/// One logical execution context: the main program or a fired interrupt.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Context {
    pub priority: u8,
    /// Motions submitted by this context and not yet executed.
    pub queue: Vec<MotionCommand>,
    /// Triggers armed for this context's next motion.
    pub armed: Vec<TriggerSpec>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scheduler {
    decls: Vec<Option<InterruptDecl>>,
    /// Bit `p` set when priority `p` is declared and enabled. Polls with
    /// nothing enabled return without touching the declarations.
    enabled_mask: u64,
    stack: Vec<Context>,
}

impl Default for Scheduler {
    fn default() -> Self {
        Self::new()
    }
}

impl Scheduler {
    pub fn new() -> Self {
        Scheduler {
            decls: vec![None; MAX_PRIORITY as usize + 1],
            enabled_mask: 0,
            stack: vec![Context {
                priority: MAIN_PRIORITY,
                ..Context::default()
            }],
        }
    }

    pub fn check_priority(priority: i32) -> Result<u8, String> {
        if (MIN_PRIORITY..=MAX_PRIORITY).contains(&priority) {
            Ok(priority as u8)
        } else {
            Err(format!(
                "interrupt priority {priority} outside {MIN_PRIORITY}..{MAX_PRIORITY}"
            ))
        }
    }

    /// Store a declaration, replacing any earlier one of the same priority.
    /// It starts disabled with `last` set to the condition's current value.
    pub fn declare(&mut self, priority: u8, decl: u32, current: bool) {
        self.decls[priority as usize] = Some(InterruptDecl {
            priority,
            decl,
            enabled: false,
            last: current,
            pending: false,
        });
        self.enabled_mask &= !(1 << priority);
    }

    pub fn get(&self, priority: u8) -> Option<&InterruptDecl> {
        self.decls[priority as usize].as_ref()
    }

    /// Enable or disable; enabling re-arms edge detection from `current`.
    pub fn set_enabled(&mut self, priority: u8, on: bool, current: bool) -> Result<(), String> {
        let d = self.decls[priority as usize]
            .as_mut()
            .ok_or_else(|| format!("interrupt {priority} is not declared"))?;
        d.enabled = on;
        d.pending = false;
        if on {
            d.last = current;
            self.enabled_mask |= 1 << priority;
        } else {
            self.enabled_mask &= !(1 << priority);
        }
        Ok(())
    }

    pub fn any_enabled(&self) -> bool {
        self.enabled_mask != 0
    }

    /// Enabled declarations in priority order.
    pub fn enabled(&self) -> Vec<(u8, u32)> {
        self.decls
            .iter()
            .flatten()
            .filter(|d| d.enabled)
            .map(|d| (d.priority, d.decl))
            .collect()
    }

    /// Feed a fresh condition value; returns true on a false-to-true edge.
    pub fn observe(&mut self, priority: u8, value: bool) -> bool {
        let Some(d) = self.decls[priority as usize].as_mut() else {
            return false;
        };
        let edge = value && !d.last;
        d.last = value;
        if edge && d.enabled {
            d.pending = true;
        }
        edge
    }

    /// Highest-priority pending interrupt allowed to preempt the top context.
    pub fn next_to_fire(&self) -> Option<(u8, u32)> {
        let top = self.top().priority;
        self.decls
            .iter()
            .flatten()
            .find(|d| d.enabled && d.pending && d.priority < top)
            .map(|d| (d.priority, d.decl))
    }

    pub fn push(&mut self, priority: u8) {
        if let Some(d) = self.decls[priority as usize].as_mut() {
            d.pending = false;
        }
        self.stack.push(Context {
            priority,
            ..Context::default()
        });
    }

    /// Pop the top context, which must belong to `priority`.
    pub fn finish(&mut self, priority: u8) -> Context {
        assert!(self.stack.len() > 1, "finish with no interrupt running");
        assert_eq!(
            self.top().priority,
            priority,
            "finish must target the top context"
        );
        self.stack.pop().expect("non-empty stack")
    }

    pub fn depth(&self) -> usize {
        self.stack.len()
    }

    pub fn top(&self) -> &Context {
        self.stack.last().expect("main context")
    }

    pub fn top_mut(&mut self) -> &mut Context {
        self.stack.last_mut().expect("main context")
    }

    /// Priorities of the running contexts, bottom to top.
    pub fn priorities(&self) -> Vec<u8> {
        self.stack.iter().map(|c| c.priority).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn priority_bounds() {
        assert!(Scheduler::check_priority(0).is_err());
        assert_eq!(Scheduler::check_priority(32), Ok(32));
        assert!(Scheduler::check_priority(33).is_err());
    }

    #[test]
    fn edge_only_after_enable() {
        let mut s = Scheduler::new();
        s.declare(3, 0, false);
        assert!(s.get(3).is_some_and(|d| !d.enabled));
        s.set_enabled(3, true, true).unwrap();
        // Already true when enabled: no edge until it drops and rises again.
        s.observe(3, true);
        assert_eq!(s.next_to_fire(), None);
        s.observe(3, false);
        s.observe(3, true);
        assert_eq!(s.next_to_fire(), Some((3, 0)));
    }

    #[test]
    fn redeclare_replaces() {
        let mut s = Scheduler::new();
        s.declare(5, 0, false);
        s.set_enabled(5, true, false).unwrap();
        s.declare(5, 7, false);
        assert_eq!(s.get(5).map(|d| (d.decl, d.enabled)), Some((7, false)));
    }

    #[test]
    fn undeclared_enable_is_error() {
        let mut s = Scheduler::new();
        assert!(s.set_enabled(5, true, false).is_err());
    }

    #[test]
    fn only_higher_priority_preempts() {
        let mut s = Scheduler::new();
        s.declare(2, 0, false);
        s.declare(4, 1, false);
        s.set_enabled(2, true, false).unwrap();
        s.set_enabled(4, true, false).unwrap();
        s.observe(4, true);
        assert_eq!(s.next_to_fire(), Some((4, 1)));
        s.push(4);
        s.observe(2, true);
        assert_eq!(s.next_to_fire(), Some((2, 0)));
        s.push(2);
        assert_eq!(s.priorities(), vec![MAIN_PRIORITY, 4, 2]);
        s.finish(2);
        s.finish(4);
        assert_eq!(s.depth(), 1);
    }

    #[test]
    #[should_panic]
    fn finish_non_top_panics() {
        let mut s = Scheduler::new();
        s.declare(2, 0, false);
        s.declare(4, 1, false);
        s.push(4);
        s.push(2);
        s.finish(4);
    }
}
