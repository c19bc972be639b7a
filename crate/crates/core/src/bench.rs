//! Wall-clock comparison of the two engines on a compute-only program.

use std::time::{Duration, Instant};

use serde::Serialize;

use crate::bytecode::{self, Loaded};
use crate::engine::{Outcome, RunOptions};
use crate::runtime::{EventKind, Status};
use crate::semantics::CheckedProgram;
use crate::tree;

/// Runs discarded before timing starts.
pub const WARMUP: usize = 3;
/// Timed runs when the caller does not say.
pub const DEFAULT_ITERS: usize = 10;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BenchError {
    #[error("iteration count must be positive")]
    NoIterations,
    #[error("benchmark programs must not move the robot")]
    Motion,
    #[error("benchmark program failed: {0}")]
    Failed(String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EngineTimes {
    pub median_ms: f64,
    pub runs_ms: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchReport {
    pub iters: usize,
    pub warmup: usize,
    pub tree: EngineTimes,
    pub vm: EngineTimes,
    /// Tree median over VM median.
    pub ratio: f64,
}

/// Median of a non-empty sample; the mean of the middle pair for even
/// sizes.
pub fn median(xs: &[f64]) -> f64 {
    assert!(!xs.is_empty(), "median of an empty sample");
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Time `f` `iters` times after `warmup` untimed calls.
pub fn measure(iters: usize, warmup: usize, mut f: impl FnMut() -> Duration) -> EngineTimes {
    for _ in 0..warmup {
        f();
    }
    let runs_ms: Vec<f64> = (0..iters).map(|_| f().as_secs_f64() * 1e3).collect();
    EngineTimes {
        median_ms: median(&runs_ms),
        runs_ms,
    }
}

fn check(o: &Outcome) -> Result<(), BenchError> {
    if let Status::Failed(e) = &o.status {
        return Err(BenchError::Failed(e.to_string()));
    }
    if o.trace.iter().any(|e| matches!(e.kind, EventKind::MotionStart { .. })) {
        return Err(BenchError::Motion);
    }
    Ok(())
}

fn timed(f: impl FnOnce() -> Outcome) -> (Duration, Outcome) {
    let start = Instant::now();
    let o = f();
    (start.elapsed(), o)
}

/// Benchmark both engines on `prog`. Compilation and loading happen once,
/// outside the timed region; each timed run is a complete execution.
pub fn run(prog: &CheckedProgram, iters: usize) -> Result<BenchReport, BenchError> {
    if iters == 0 {
        return Err(BenchError::NoIterations);
    }
    let opts = RunOptions::default();
    let loaded = Loaded::load(bytecode::build(prog)).map_err(|e| BenchError::Failed(e.to_string()))?;
    let tree_run = || tree::run(prog, &opts).expect("checked program has an entry");
    let vm_run = || bytecode::run(&loaded, &opts).expect("checked program has an entry");
    check(&tree_run())?;
    check(&vm_run())?;
    let tree = measure(iters, WARMUP, || timed(tree_run).0);
    let vm = measure(iters, WARMUP, || timed(vm_run).0);
    Ok(BenchReport {
        iters,
        warmup: WARMUP,
        ratio: tree.median_ms / vm.median_ms,
        tree,
        vm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_is_robust_to_outliers() {
        assert_eq!(median(&[5.0, 1.0, 3.0]), 3.0);
        assert_eq!(median(&[4.0, 1.0, 3.0, 2.0]), 2.5);
        assert_eq!(median(&[1.0, 1.0, 1.0, 1000.0, 1.0]), 1.0);
    }

    #[test]
    fn measure_uses_the_median_of_timed_runs() {
        // A scripted stub instead of a clock: warm-up values must be
        // dropped and one slow outlier must not move the result.
        let mut script = [900u64, 900, 900, 10, 12, 11, 500, 10, 13, 12, 11, 10, 12].into_iter();
        let t = measure(10, 3, || Duration::from_millis(script.next().unwrap()));
        assert_eq!(t.runs_ms.len(), 10);
        assert_eq!(t.median_ms, 11.5);
    }

    #[test]
    fn zero_iterations_is_an_error() {
        let prog = crate::semantics::check_source("DEF p()\nEND\n").unwrap();
        assert_eq!(run(&prog, 0), Err(BenchError::NoIterations));
    }

    #[test]
    fn motions_are_refused() {
        let prog = crate::semantics::check_source("DEF p()\nPTP {AXIS: A1 10}\nEND\n").unwrap();
        assert_eq!(run(&prog, 1), Err(BenchError::Motion));
    }
}
