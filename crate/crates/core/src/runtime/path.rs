//! Composite path planning over a flushed motion queue.
//!
//! Each motion keeps its nominal duration, so motion `i` occupies
//! `[start_i, end_i]` on the path clock. Where motion `i` carries a blend
//! criterion and motion `i + 1` follows in the same flush, the corner at
//! `end_i` is replaced by a quadratic Bezier from the point reached `a` ms
//! before the corner to the point reached `b` ms after it, with the corner
//! itself as control point. `a` and `b` are whole milliseconds chosen so the
//! endpoints lie no farther than the blend radius from the corner, and the
//! radius is clamped to half of each adjacent segment.

use super::kinematics::{self as kin, Vec6};
use super::trace::{EventKind, Frame};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MotionKind {
    Ptp,
    Lin,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BlendCriterion {
    None,
    /// Cartesian radius in mm.
    Dis(f64),
    /// Joint-space radius in degrees.
    Ptp(f64),
}

impl BlendCriterion {
    pub fn label(&self) -> &'static str {
        match self {
            BlendCriterion::None => "none",
            BlendCriterion::Dis(_) => "C_DIS",
            BlendCriterion::Ptp(_) => "C_PTP",
        }
    }
}

/// A path-related switching action: set an output during a motion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TriggerSpec {
    /// 0 = start point, 1 = end point.
    pub distance: u8,
    pub delay_ms: i32,
    pub index: u32,
    pub value: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MotionCommand {
    pub ordinal: u32,
    pub kind: MotionKind,
    pub frame: Frame,
    /// Target as written (AXIS or POS components).
    pub target: Vec6,
    pub blend: BlendCriterion,
    pub vel_axis: [i32; 6],
    /// mm per ms.
    pub vel_cp: f64,
    pub triggers: Vec<TriggerSpec>,
}

impl MotionCommand {
    pub fn target_joints(&self) -> Vec6 {
        match self.frame {
            Frame::Axis => self.target,
            Frame::Pos => kin::inverse(&self.target),
        }
    }

    /// Duration in whole ms of the motion from `from` (joints).
    pub fn duration(&self, from: &Vec6) -> u64 {
        let to = self.target_joints();
        let ms = match self.kind {
            MotionKind::Lin => kin::pose_dist(from, &to) / self.vel_cp,
            // 120 deg/s at 100 %
            MotionKind::Ptp => (0..6)
                .map(|j| (to[j] - from[j]).abs() * 100_000.0 / (120.0 * self.vel_axis[j] as f64))
                .fold(0.0, f64::max),
        };
        ceil_ms(ms)
    }
}

fn ceil_ms(x: f64) -> u64 {
    // Guard against representation error pushing an exact value past an integer.
    (x - 1e-9).ceil().max(0.0) as u64
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlannedMotion {
    pub ordinal: u32,
    pub start: u64,
    pub end: u64,
    pub from: Vec6,
    pub to: Vec6,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corner {
    /// Index of the incoming motion within the plan.
    pub incoming: usize,
    pub start: u64,
    pub end: u64,
    pub p0: Vec6,
    pub c: Vec6,
    pub p2: Vec6,
    /// Blend radius after clamping, in the criterion's metric.
    pub radius: f64,
}

/// Scheduled event on the path clock. `rank` orders events sharing a time.
#[derive(Debug, Clone, PartialEq)]
pub struct PathEvent {
    pub t: u64,
    pub rank: u8,
    pub seq: u32,
    pub action: PathAction,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PathAction {
    Emit(EventKind),
    Trigger { motion: u32, spec: TriggerSpec },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    pub motions: Vec<PlannedMotion>,
    pub corners: Vec<Corner>,
    /// Sorted by (t, rank, seq).
    pub events: Vec<PathEvent>,
    /// Path time after which nothing remains to do.
    pub end: u64,
}

impl Path {
    pub fn plan(start: &Vec6, cmds: &[MotionCommand]) -> Path {
        let mut motions = Vec::with_capacity(cmds.len());
        let mut t = 0u64;
        let mut from = *start;
        for cmd in cmds {
            let to = cmd.target_joints();
            let d = cmd.duration(&from);
            motions.push(PlannedMotion {
                ordinal: cmd.ordinal,
                start: t,
                end: t + d,
                from,
                to,
            });
            t += d;
            from = to;
        }

        let mut corners = Vec::new();
        for i in 0..cmds.len().saturating_sub(1) {
            let (a, b) = (&motions[i], &motions[i + 1]);
            let (r, metric): (f64, fn(&Vec6, &Vec6) -> f64) = match cmds[i].blend {
                BlendCriterion::None => continue,
                BlendCriterion::Dis(r) => (r, kin::pose_dist),
                BlendCriterion::Ptp(r) => (r, kin::dist),
            };
            let len_in = metric(&a.from, &a.to);
            let len_out = metric(&b.from, &b.to);
            let r = r.min(len_in / 2.0).min(len_out / 2.0);
            if r <= 0.0 || len_in == 0.0 || len_out == 0.0 {
                continue;
            }
            let d_in = (a.end - a.start) as f64;
            let d_out = (b.end - b.start) as f64;
            let before = (r / len_in * d_in + 1e-9).floor() as u64;
            let after = (r / len_out * d_out + 1e-9).floor() as u64;
            if before + after == 0 {
                continue;
            }
            let start = a.end - before;
            let end = b.start + after;
            corners.push(Corner {
                incoming: i,
                start,
                end,
                p0: line_point(a, start),
                c: a.to,
                p2: line_point(b, end),
                radius: r,
            });
        }

        let mut events = Vec::new();
        let mut seq = 0;
        let mut push = |t, rank, action| {
            events.push(PathEvent {
                t,
                rank,
                seq,
                action,
            });
            seq += 1;
        };
        for c in &corners {
            let (from, to) = (motions[c.incoming].ordinal, motions[c.incoming + 1].ordinal);
            push(c.start, 0, PathAction::Emit(EventKind::BlendStart { from, to }));
            push(c.end, 3, PathAction::Emit(EventKind::BlendEnd { from, to }));
        }
        let mut end = t;
        // Motion events share rank 1 and keep plan order: start(i), end(i), start(i+1).
        let mut motion_events = Vec::new();
        for (i, (m, cmd)) in motions.iter().zip(cmds).enumerate() {
            motion_events.push((
                m.start,
                2 * i as u32,
                PathAction::Emit(EventKind::MotionStart {
                    motion: m.ordinal,
                    kind: match cmd.kind {
                        MotionKind::Ptp => "PTP",
                        MotionKind::Lin => "LIN",
                    },
                    frame: cmd.frame,
                    target: cmd.target,
                    blend: cmd.blend.label(),
                }),
            ));
            motion_events.push((
                m.end,
                2 * i as u32 + 1,
                PathAction::Emit(EventKind::MotionEnd { motion: m.ordinal }),
            ));
            for spec in &cmd.triggers {
                let at = trigger_time(m.start, m.end, spec);
                end = end.max(at);
                push(
                    at,
                    4,
                    PathAction::Trigger {
                        motion: m.ordinal,
                        spec: *spec,
                    },
                );
            }
        }
        for (t, order, action) in motion_events {
            events.push(PathEvent {
                t,
                rank: 1,
                seq: order,
                action,
            });
        }
        events.sort_by_key(|e| (e.t, e.rank, e.seq));
        Path {
            motions,
            corners,
            events,
            end,
        }
    }

    /// Joint position at path time `t`.
    pub fn position(&self, t: u64) -> Vec6 {
        for c in &self.corners {
            if c.start <= t && t <= c.end {
                let s = (t - c.start) as f64 / (c.end - c.start) as f64;
                return kin::bezier(&c.p0, &c.c, &c.p2, s);
            }
        }
        for m in &self.motions {
            if t <= m.end {
                return line_point(m, t.max(m.start));
            }
        }
        self.motions.last().map(|m| m.to).unwrap_or_default()
    }
}

/// Fire time on the path clock: start or end of the motion plus the delay,
/// clamped into `[start, end + |delay|]`.
pub fn trigger_time(start: u64, end: u64, spec: &TriggerSpec) -> u64 {
    let base = if spec.distance == 0 { start as i64 } else { end as i64 };
    let hi = end as i64 + spec.delay_ms.unsigned_abs() as i64;
    (base + spec.delay_ms as i64).clamp(start as i64, hi) as u64
}

fn line_point(m: &PlannedMotion, t: u64) -> Vec6 {
    if t >= m.end {
        m.to
    } else if t <= m.start {
        m.from
    } else {
        let s = (t - m.start) as f64 / (m.end - m.start) as f64;
        kin::lerp(&m.from, &m.to, s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lin(ordinal: u32, target: Vec6, blend: BlendCriterion) -> MotionCommand {
        MotionCommand {
            ordinal,
            kind: MotionKind::Lin,
            frame: Frame::Pos,
            target,
            blend,
            vel_axis: [100; 6],
            vel_cp: 2.0,
            triggers: Vec::new(),
        }
    }

    #[test]
    fn ptp_duration_at_sixty_percent() {
        let cmd = MotionCommand {
            ordinal: 0,
            kind: MotionKind::Ptp,
            frame: Frame::Axis,
            target: [0.0, -90.0, 90.0, 0.0, 0.0, 0.0],
            blend: BlendCriterion::None,
            vel_axis: [60; 6],
            vel_cp: 2.0,
            triggers: Vec::new(),
        };
        assert_eq!(cmd.duration(&[0.0; 6]), 1250);
    }

    #[test]
    fn lin_duration_is_length_over_speed() {
        let cmd = lin(0, [1000.0, 0.0, 0.0, 0.0, 0.0, 0.0], BlendCriterion::None);
        assert_eq!(cmd.duration(&[0.0; 6]), 500);
    }

    #[test]
    fn blended_corner_window() {
        let cmds = [
            lin(0, [1000.0, 0.0, 0.0, 0.0, 0.0, 0.0], BlendCriterion::Dis(100.0)),
            lin(1, [1000.0, 1000.0, 0.0, 0.0, 0.0, 0.0], BlendCriterion::None),
        ];
        let p = Path::plan(&[0.0; 6], &cmds);
        assert_eq!(p.corners.len(), 1);
        let c = &p.corners[0];
        assert_eq!((c.start, c.end), (450, 550));
        assert_eq!(p.end, 1000);
        for t in c.start..=c.end {
            let pose = kin::forward(&p.position(t));
            let d = kin::dist(&pose, &[1000.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
            assert!(d <= 100.0 + 1e-9, "t={t} d={d}");
        }
    }

    #[test]
    fn trigger_clamping() {
        let spec = |distance, delay_ms| TriggerSpec {
            distance,
            delay_ms,
            index: 1,
            value: true,
        };
        assert_eq!(trigger_time(100, 600, &spec(0, 20)), 120);
        assert_eq!(trigger_time(100, 600, &spec(0, -50)), 100);
        assert_eq!(trigger_time(100, 600, &spec(1, -50)), 550);
        assert_eq!(trigger_time(100, 600, &spec(1, 30)), 630);
    }
}
