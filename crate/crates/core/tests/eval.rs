use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use retarget_core::eval::*;
use retarget_core::fixtures::{make_fixture, FixtureSpec};
use retarget_core::kinematics::rotation::{Mat3, Quaternion, Vec3};
use retarget_core::kinematics::{JointPositions, Pose};
use retarget_core::motion::MotionClip;
use retarget_core::net::{Domain, DomainSpec, FeatureLayout, RetargetModel};
use retarget_core::skeleton::{JointKind, Skeleton};
use retarget_core::training::compute_norm_stats;

fn skeleton() -> Skeleton {
    make_fixture(&FixtureSpec {
        motions: 1,
        frames: 1,
        ..Default::default()
    })
    .unwrap()
    .human
    .rig()
    .skeleton
}

fn random_quat(rng: &mut ChaCha8Rng) -> Quaternion {
    Quaternion::new(
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
    )
    .normalize()
}

fn random_clip(rng: &mut ChaCha8Rng, sk: &Skeleton, frames: usize) -> MotionClip {
    let poses = (0..frames)
        .map(|_| Pose {
            root_translation: [
                rng.random_range(-50.0..50.0),
                rng.random_range(0.0..100.0),
                rng.random_range(-50.0..50.0),
            ],
            rotations: (0..sk.len()).map(|_| random_quat(rng)).collect(),
        })
        .collect();
    MotionClip::new("random", 0.02, poses)
}

// Independent oracle: explicit matrices, recursion from each joint to the root.
fn quat_matrix(q: Quaternion) -> Mat3 {
    let [w, x, y, z] = q.normalize().to_array();
    [
        [
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - w * z),
            2.0 * (x * z + w * y),
        ],
        [
            2.0 * (x * y + w * z),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - w * x),
        ],
        [
            2.0 * (x * z - w * y),
            2.0 * (y * z + w * x),
            1.0 - 2.0 * (x * x + y * y),
        ],
    ]
}

fn oracle_position(sk: &Skeleton, pose: &Pose, j: usize) -> Vec3 {
    // Walk the chain root → j accumulating rotation of actuated joints.
    let mut chain = vec![j];
    while let Some(p) = sk.joint(*chain.last().unwrap()).parent {
        chain.push(p);
    }
    chain.reverse();
    let mut pos = [0.0; 3];
    let mut rot: Mat3 = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    for (k, &c) in chain.iter().enumerate() {
        if k > 0 {
            let o = sk.joint(c).offset;
            for (r, p) in pos.iter_mut().enumerate() {
                *p += (0..3).map(|s| rot[r][s] * o[s]).sum::<f64>();
            }
        }
        if sk.joint(c).kind == JointKind::Actuated {
            let m = quat_matrix(pose.rotations[c]);
            let mut next = [[0.0; 3]; 3];
            for r in 0..3 {
                for s in 0..3 {
                    next[r][s] = (0..3).map(|u| rot[r][u] * m[u][s]).sum();
                }
            }
            rot = next;
        }
    }
    pos
}

fn oracle_mjpe(sk: &Skeleton, a: &MotionClip, b: &MotionClip, scale: f64) -> f64 {
    let mut sum = 0.0;
    let mut n = 0;
    for f in 0..a.len() {
        for j in 0..sk.len() {
            if j == sk.root_index() {
                continue;
            }
            let (pa, pb) = (
                oracle_position(sk, &a.poses[f], j),
                oracle_position(sk, &b.poses[f], j),
            );
            sum += ((pa[0] - pb[0]).powi(2) + (pa[1] - pb[1]).powi(2) + (pa[2] - pb[2]).powi(2))
                .sqrt();
            n += 1;
        }
    }
    sum / n as f64 * scale
}

#[test]
fn matches_double_loop_oracle() {
    let sk = skeleton();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..100 {
        let (a, b) = (random_clip(&mut rng, &sk, 4), random_clip(&mut rng, &sk, 4));
        let got = mean_joint_position_error(&sk, &a, &b, DEFAULT_UNIT_SCALE_MM).unwrap();
        let want = oracle_mjpe(&sk, &a, &b, DEFAULT_UNIT_SCALE_MM);
        assert!((got - want).abs() < 1e-9, "{got} vs {want}");
    }
}

#[test]
fn identical_clips_have_zero_error() {
    let sk = skeleton();
    let a = random_clip(&mut ChaCha8Rng::seed_from_u64(2), &sk, 5);
    assert_eq!(mean_joint_position_error(&sk, &a, &a, 10.0).unwrap(), 0.0);
}

#[test]
fn constant_displacement_is_reported_in_mm() {
    let a: Vec<JointPositions> = (0..3)
        .map(|f| JointPositions(vec![[0.0; 3], [f as f64, 1.0, 2.0], [3.0, f as f64, 0.5]]))
        .collect();
    let b: Vec<JointPositions> = a
        .iter()
        .map(|p| {
            JointPositions(
                p.0.iter()
                    .enumerate()
                    .map(|(j, v)| if j == 0 { *v } else { [v[0] + 1.0, v[1], v[2]] })
                    .collect(),
            )
        })
        .collect();
    let mm = positions_error(&a, &b, Some(0)).unwrap() * DEFAULT_UNIT_SCALE_MM;
    assert!((mm - 10.0).abs() < 1e-12);
}

#[test]
fn mismatches_are_errors() {
    let sk = skeleton();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (a, b) = (random_clip(&mut rng, &sk, 5), random_clip(&mut rng, &sk, 4));
    assert!(matches!(
        mean_joint_position_error(&sk, &a, &b, 10.0),
        Err(EvalError::FrameCountMismatch { a: 5, b: 4 })
    ));
    let short = MotionClip::new("x", 0.02, vec![Pose::identity(3); 5]);
    assert!(matches!(
        mean_joint_position_error(&sk, &a, &short, 10.0),
        Err(EvalError::SkeletonMismatch(_))
    ));
    let map = vec![(
        "head".to_string(),
        "nope".to_string(),
        "neck_end".to_string(),
    )];
    assert!(matches!(
        end_effector_errors(&sk, &a, &sk, &a, &map, 1.0),
        Err(EvalError::UnknownEndEffector(_))
    ));
}

#[test]
fn end_effector_displacement() {
    let fx = make_fixture(&FixtureSpec {
        motions: 1,
        frames: 10,
        ..Default::default()
    })
    .unwrap();
    let sk = fx.human.rig().skeleton;
    let mut joints = sk.joints().to_vec();
    let hand = sk.find("l_wrist_end").unwrap();
    joints[hand].offset[0] += 5.0;
    let moved = Skeleton::new(joints).unwrap();
    let clip = MotionClip::new("t", 0.02, vec![Pose::identity(sk.len()); 10]);
    let map = ee_map(
        &fx.human.config.end_effectors,
        &fx.human.config.end_effectors,
    );
    let same = end_effector_errors(&sk, &clip, &sk, &clip, &map, 1.0).unwrap();
    assert!(same.values().all(|v| *v == 0.0));
    let e = end_effector_errors(&sk, &clip, &moved, &clip, &map, 1.0).unwrap();
    assert_eq!(
        (e["head"], e["left_hand"], e["right_hand"]),
        (0.0, 5.0, 0.0)
    );
}

#[test]
fn nearest_resampling() {
    let sk = skeleton();
    let clip = random_clip(&mut ChaCha8Rng::seed_from_u64(4), &sk, 10);
    let r = resample_nearest(&clip, 4);
    assert_eq!(r.len(), 4);
    assert_eq!(r.poses[0], clip.poses[0]);
    assert_eq!(r.poses[3], clip.poses[9]);
    assert_eq!(r.poses[1], clip.poses[3]);
    assert_eq!(resample_nearest(&clip, 10), clip);
}

fn identity_model() -> (RetargetModel, Vec<MotionClip>) {
    let fx = make_fixture(&FixtureSpec {
        motions: 3,
        frames: 67,
        ..Default::default()
    })
    .unwrap();
    let rig = fx.human.rig();
    let layout = FeatureLayout::new(&rig);
    let stats = compute_norm_stats(&fx.human.clips, &layout, rig.height()).unwrap();
    let spec = DomainSpec::new(rig, stats).unwrap();
    (
        RetargetModel::identity(spec.clone(), spec).unwrap(),
        fx.human.clips,
    )
}

#[test]
fn identity_cycle_evaluation_is_zero() {
    let (model, clips) = identity_model();
    let report = cycle_evaluate(&model, Domain::Human, &clips, 16, DEFAULT_UNIT_SCALE_MM).unwrap();
    assert_eq!(report.per_motion.len(), 3);
    assert!(report.aggregate.mjpe_mm.unwrap() < 1e-9);
    for m in &report.per_motion {
        assert_eq!(m.frames, 67);
        assert!(m.ee_cm.values().iter().all(|v| *v < 1e-9));
    }
}

#[test]
fn tiled_reconstruction_keeps_length() {
    let (model, clips) = identity_model();
    let t = 32;
    for n in [2 * t, t + 3, t] {
        let clip = clips[0].window(0, n);
        let back = cycle_reconstruct(&model, Domain::Human, &clip, t).unwrap();
        assert_eq!(back.len(), n);
    }
    assert_eq!(tiling_starts(2 * t, t), vec![0, t]);
    assert_eq!(tiling_starts(t + 3, t), vec![0, 3]);
    let short = clips[0].window(0, t - 1);
    assert!(matches!(
        cycle_reconstruct(&model, Domain::Human, &short, t),
        Err(EvalError::ClipTooShort { .. })
    ));
}

#[test]
fn report_round_trips() {
    let mut report = MetricsReport::new(
        vec![
            MotionMetrics {
                name: "a".into(),
                frames: 120,
                mjpe_mm: Some(1.0 / 3.0),
                ee_cm: EeErrors::new(0.1, 0.2, 0.3),
            },
            MotionMetrics {
                name: "b".into(),
                frames: 7,
                mjpe_mm: Some(2.0_f64.sqrt()),
                ee_cm: EeErrors::new(1.5, 1e-17, 3.0),
            },
        ],
        10.0,
        vec!["human:19".into()],
    );
    report.reference = Some(ReferenceConstants::default());
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.json");
    write_report(&report, &path).unwrap();
    assert_eq!(read_report(&path).unwrap(), report);
    let empty = MetricsReport::new(Vec::new(), 10.0, Vec::new());
    write_report(&empty, &path).unwrap();
    assert_eq!(read_report(&path).unwrap(), empty);
    let table = render_report_table(&report);
    assert!(table.contains("Measured") && table.contains("IK-based"));
}

#[test]
fn aggregate_matches_pooled_computation() {
    let sk = skeleton();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let pairs: Vec<(MotionClip, MotionClip)> = (0..4)
        .map(|i| {
            let n = 3 + 2 * i;
            (random_clip(&mut rng, &sk, n), random_clip(&mut rng, &sk, n))
        })
        .collect();
    let motions: Vec<MotionMetrics> = pairs
        .iter()
        .map(|(a, b)| MotionMetrics {
            name: "m".into(),
            frames: a.len(),
            mjpe_mm: Some(mean_joint_position_error(&sk, a, b, 10.0).unwrap()),
            ee_cm: EeErrors::default(),
        })
        .collect();
    let aggregate = Aggregate::from_motions(&motions);
    let pooled_a: Vec<Pose> = pairs.iter().flat_map(|(a, _)| a.poses.clone()).collect();
    let pooled_b: Vec<Pose> = pairs.iter().flat_map(|(_, b)| b.poses.clone()).collect();
    let pooled = mean_joint_position_error(
        &sk,
        &MotionClip::new("a", 0.02, pooled_a),
        &MotionClip::new("b", 0.02, pooled_b),
        10.0,
    )
    .unwrap();
    assert!((aggregate.mjpe_mm.unwrap() - pooled).abs() < 1e-9);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn symmetric_nonnegative_and_root_invariant(seed in any::<u64>(), frames in 1usize..5, shift in prop::array::uniform3(-100.0f64..100.0)) {
        let sk = skeleton();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (a, b) = (random_clip(&mut rng, &sk, frames), random_clip(&mut rng, &sk, frames));
        let ab = mean_joint_position_error(&sk, &a, &b, 10.0).unwrap();
        let ba = mean_joint_position_error(&sk, &b, &a, 10.0).unwrap();
        prop_assert_eq!(ab, ba);
        prop_assert!(ab > 0.0);
        let moved = |c: &MotionClip| {
            let mut c = c.clone();
            for p in &mut c.poses {
                for k in 0..3 {
                    p.root_translation[k] += shift[k];
                }
            }
            c
        };
        prop_assert_eq!(mean_joint_position_error(&sk, &moved(&a), &moved(&b), 10.0).unwrap(), ab);
        prop_assert_eq!(mean_joint_position_error(&sk, &moved(&a), &a, 10.0).unwrap(), 0.0);
    }
}
