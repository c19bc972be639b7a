use proptest::prelude::*;

use krlf_core::bytecode::{self, Loaded};
use krlf_core::corpus;
use krlf_core::engine::RunOptions;
use krlf_core::frontend::{parse_source, pretty::print_program, strip_spans};
use krlf_core::fuzz::STACK_VIOLATIONS;
use krlf_core::gen;
use krlf_core::runtime::kinematics as kin;
use krlf_core::runtime::{BlendCriterion, Frame, MotionCommand, MotionKind, Path, RuntimeConfig, Status};
use krlf_core::semantics::check_source;

fn lin(ordinal: u32, pose: [f64; 6], blend: BlendCriterion) -> MotionCommand {
    MotionCommand {
        ordinal,
        kind: MotionKind::Lin,
        frame: Frame::Pos,
        target: pose,
        blend,
        vel_axis: [100; 6],
        vel_cp: 2.0,
        triggers: Vec::new(),
    }
}

fn point() -> impl Strategy<Value = [f64; 6]> {
    (
        -800.0..800.0f64,
        -800.0..800.0f64,
        600.0..1800.0f64,
        -20.0..20.0f64,
        70.0..110.0f64,
        -20.0..20.0f64,
    )
        .prop_map(|(x, y, z, a, b, c)| [x, y, z, a, b, c])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn blended_corners_stay_within_radius(
        a in point(), b in point(), c in point(), radius in 0.0..600.0f64,
    ) {
        let start = kin::inverse(&a);
        let cmds = [lin(0, b, BlendCriterion::Dis(radius)), lin(1, c, BlendCriterion::None)];
        let path = Path::plan(&start, &cmds);
        let len_in = kin::dist(&a, &b);
        let len_out = kin::dist(&b, &c);
        let clamped = radius.min(len_in / 2.0).min(len_out / 2.0);
        for corner in &path.corners {
            prop_assert!(corner.radius <= clamped + 1e-12);
            for t in corner.start..=corner.end {
                let d = kin::dist(&kin::forward(&path.position(t)), &b);
                prop_assert!(d <= corner.radius + 1e-9, "t={} d={} r={}", t, d, corner.radius);
            }
        }
    }

    #[test]
    fn unblended_corners_are_reached_exactly(a in point(), b in point(), c in point()) {
        let start = kin::inverse(&a);
        let cmds = [lin(0, b, BlendCriterion::None), lin(1, c, BlendCriterion::None)];
        let path = Path::plan(&start, &cmds);
        prop_assert!(path.corners.is_empty());
        let at = path.position(path.motions[0].end);
        prop_assert_eq!(at, cmds[0].target_joints());
        prop_assert!(kin::dist(&kin::forward(&at), &b) <= 1e-9);
    }

    #[test]
    fn pretty_printing_round_trips(seed in 0u64..100_000) {
        let src = gen::program(seed).source;
        let mut first = parse_source(&src).unwrap();
        let printed = print_program(&first);
        let mut second = parse_source(&printed).unwrap();
        strip_spans(&mut first);
        strip_spans(&mut second);
        prop_assert_eq!(&first, &second);
        prop_assert_eq!(print_program(&second), printed);
    }

    #[test]
    fn accepted_byte_mutants_keep_the_stack_sound(
        seed in 0u64..50, flips in prop::collection::vec((any::<prop::sample::Index>(), any::<u8>()), 1..4),
    ) {
        let mut img = bytecode::build(&check_source(&gen::program(seed).source).unwrap());
        for (at, byte) in flips {
            let i = at.index(img.code.len());
            img.code[i] = byte;
        }
        if let Ok(loaded) = Loaded::load(img) {
            let opts = RunOptions {
                config: RuntimeConfig { step_budget: Some(20_000), time_limit_ms: 60_000, ..RuntimeConfig::default() },
                ..RunOptions::default()
            };
            if let Ok(o) = bytecode::run(&loaded, &opts) {
                if let Status::Failed(e) = o.status {
                    prop_assert!(!STACK_VIOLATIONS.iter().any(|v| e.message.starts_with(v)), "{}", e);
                }
            }
        }
    }
}

#[test]
fn corpus_pretty_prints_round_trip() {
    for e in corpus::load(&corpus::programs_dir()).unwrap() {
        let mut first = parse_source(&e.source).unwrap();
        let mut second = parse_source(&print_program(&first)).unwrap();
        strip_spans(&mut first);
        strip_spans(&mut second);
        assert_eq!(first, second, "{}", e.name);
    }
}
