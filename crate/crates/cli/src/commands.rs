use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context, Result};
use log::{info, warn};
use retarget_core::bvh::{bvh_files, load_motion_dir, read_bvh_file, write_bvh, BvhDocument};
use retarget_core::eval::{
    cycle_evaluate, ee_map, end_effector_errors, positions_error, resample_nearest, retarget_clip,
    write_report, EeErrors, EndEffectorMap, MetricsReport, MotionMetrics,
};
use retarget_core::fixtures::{self, write_fixture, FixtureSpec};
use retarget_core::gradient_suite::{run_case, SuiteConfig, COMPOSITES, PRIMITIVES};
use retarget_core::kinematics::{forward_kinematics, motion_fk, write_positions_csv, RootMode};
use retarget_core::motion::MotionClip;
use retarget_core::net::{load_checkpoint, Domain, RetargetModel};
use retarget_core::skeleton::{check_tpose_guidelines, EndEffectors, Rig, SkeletonConfig};
use retarget_core::training::{train as run_training, DatasetView, TrainConfig};
use serde_json::Value;

use crate::exit::{self, coded, CodeExt, ExitKind};
use crate::overrides;
use crate::{
    CompareArgs, CycleEvalArgs, FkArgs, GradcheckArgs, MakeFixtureArgs, RetargetArgs, TrainArgs,
    ValidateArgs,
};

const OUTPUT_PRECISION: usize = 6;

fn domain_name(d: Domain) -> &'static str {
    match d {
        Domain::Human => "human",
        Domain::Robot => "robot",
    }
}

fn load_config(path: &Path) -> Result<SkeletonConfig> {
    SkeletonConfig::load(path)
        .with_context(|| format!("skeleton config {}", path.display()))
        .code(ExitKind::Data)
}

fn read_bvh(path: &Path) -> Result<BvhDocument> {
    read_bvh_file(path).map_err(exit::bvh)
}

/// Binds the config to the hierarchy of the first BVH file in `dir`, then
/// loads every clip of the directory against it.
fn load_domain(dir: &Path, config: Option<&Path>) -> Result<(Rig, Vec<MotionClip>)> {
    let config_path = config
        .map(Path::to_path_buf)
        .unwrap_or_else(|| dir.join("skeleton_config.json"));
    let config = load_config(&config_path)?;
    let files = bvh_files(dir).map_err(exit::bvh)?;
    let first = files
        .first()
        .ok_or_else(|| coded(ExitKind::Data, anyhow!("{}: no .bvh files", dir.display())))?;
    let doc = read_bvh(first)?;
    let rig = config
        .bind(&doc.skeleton)
        .with_context(|| format!("binding {}", config_path.display()))
        .code(ExitKind::Data)?;
    let set = load_motion_dir(dir, &rig.skeleton).map_err(exit::bvh)?;
    Ok((rig, set.clips))
}

fn load_model(path: &Path) -> Result<RetargetModel> {
    load_checkpoint(path)
        .with_context(|| format!("checkpoint {}", path.display()))
        .code(ExitKind::Checkpoint)
}

fn effective_config(args: &TrainArgs) -> Result<TrainConfig> {
    let mut tree = serde_json::to_value(TrainConfig::default())?;
    if let Some(path) = &args.config {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("config {}", path.display()))
            .code(ExitKind::Usage)?;
        let patch: Value = serde_json::from_str(&text)
            .with_context(|| format!("config {}", path.display()))
            .code(ExitKind::Usage)?;
        overrides::merge(&mut tree, patch);
    }
    overrides::apply(&mut tree, &args.overrides).code(ExitKind::Usage)?;
    let mut config = TrainConfig::from_json(&tree.to_string()).map_err(exit::train)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    config.validate().map_err(exit::train)?;
    Ok(config)
}

pub fn train(args: TrainArgs) -> Result<()> {
    let config = effective_config(&args)?;
    let (human_rig, human) = load_domain(&args.human_dir, args.human_skel.as_deref())?;
    let (robot_rig, robot) = load_domain(&args.robot_dir, args.robot_skel.as_deref())?;
    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))
        .code(ExitKind::Internal)?;
    let effective = config.to_json();
    info!("effective config:\n{effective}");
    let path = args.out.join("effective_config.json");
    std::fs::write(&path, &effective)
        .with_context(|| format!("writing {}", path.display()))
        .code(ExitKind::Internal)?;

    let view =
        DatasetView::new(&config, &human_rig, &human, &robot_rig, &robot).map_err(exit::train)?;
    info!(
        "{} human and {} robot windows",
        view.human.windows.len(),
        view.robot.windows.len()
    );
    let outcome = run_training(&config, &view, &args.out).map_err(exit::train)?;
    let last = outcome
        .rows
        .last()
        .ok_or_else(|| coded(ExitKind::Internal, anyhow!("training ran no steps")))?;
    println!(
        "final loss: step {} d_h {:.6} d_r {:.6} g_total {:.6} (adv {:.6} cycle {:.6} fk {:.6} latent {:.6})",
        last.step, last.d_h, last.d_r, last.g_total, last.g_adv, last.g_cycle, last.g_fk, last.g_latent
    );
    println!("checkpoint: {}", outcome.final_checkpoint().display());
    Ok(())
}

pub fn retarget(args: RetargetArgs) -> Result<()> {
    let model = load_model(&args.ckpt)?;
    let doc = read_bvh(&args.input)?;
    let source = &model.domain(args.from).rig.skeleton;
    if let Some(joint) = source.topology_difference(&doc.skeleton) {
        return Err(coded(
            ExitKind::Data,
            anyhow!(
                "{}: skeleton does not match the checkpoint's {} domain at joint {joint}",
                args.input.display(),
                domain_name(args.from)
            ),
        ));
    }
    let name = args
        .input
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let clip = MotionClip::from_document(name, &doc);
    let out = retarget_clip(&model, args.from, &clip, args.window).map_err(exit::eval)?;
    let target = &model.domain(args.from.other()).rig.skeleton;
    let (doc, gimbal) = out.to_document(target);
    if gimbal > 0 {
        warn!("{gimbal} rotations hit gimbal lock while converting to Euler angles");
    }
    std::fs::write(&args.output, write_bvh(&doc, OUTPUT_PRECISION))
        .with_context(|| format!("writing {}", args.output.display()))
        .code(ExitKind::Internal)?;
    println!("wrote {} frames to {}", out.len(), args.output.display());
    Ok(())
}

pub fn cycle_eval(args: CycleEvalArgs) -> Result<()> {
    let model = load_model(&args.ckpt)?;
    let set = load_motion_dir(&args.input_dir, &model.domain(args.home).rig.skeleton)
        .map_err(exit::bvh)?;
    if set.clips.is_empty() {
        return Err(coded(
            ExitKind::Data,
            anyhow!("{}: no .bvh files", args.input_dir.display()),
        ));
    }
    let report = cycle_evaluate(&model, args.home, &set.clips, args.window, args.unit_scale)
        .map_err(exit::eval)?;
    write_report(&report, &args.report).map_err(exit::eval)?;
    println!("{}", report.summary());
    Ok(())
}

fn read_ee_map(path: &Path) -> Result<EndEffectorMap> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("ee map {}", path.display()))
        .code(ExitKind::Usage)?;
    let value: Value = serde_json::from_str(&text)
        .with_context(|| format!("ee map {}", path.display()))
        .code(ExitKind::Usage)?;
    EndEffectors::KEYS
        .iter()
        .map(|key| {
            let pair = value
                .get(key)
                .and_then(Value::as_array)
                .filter(|a| a.len() == 2);
            let names =
                pair.and_then(|a| Some((a[0].as_str()?.to_string(), a[1].as_str()?.to_string())));
            names.map(|(a, b)| (key.to_string(), a, b)).ok_or_else(|| {
                coded(
                    ExitKind::Usage,
                    anyhow!(
                        "ee map {}: {key} must be [a_joint, b_joint]",
                        path.display()
                    ),
                )
            })
        })
        .collect()
}

fn root_local(
    rig: &Rig,
    clip: &MotionClip,
) -> Result<Vec<retarget_core::kinematics::JointPositions>> {
    motion_fk(&rig.skeleton, clip, RootMode::RootLocal).code(ExitKind::Data)
}

pub fn compare(args: CompareArgs) -> Result<()> {
    let (rig_a, clips_a) = load_domain(&args.a_dir, args.skel_a.as_deref())?;
    let (rig_b, clips_b) = load_domain(&args.b_dir, args.skel_b.as_deref())?;
    if clips_a.len() != clips_b.len() {
        return Err(coded(
            ExitKind::Data,
            anyhow!(
                "{} has {} motions but {} has {}",
                args.a_dir.display(),
                clips_a.len(),
                args.b_dir.display(),
                clips_b.len()
            ),
        ));
    }
    let map = match &args.ee_map {
        Some(path) => read_ee_map(path)?,
        None => ee_map(&rig_a.config.end_effectors, &rig_b.config.end_effectors),
    };
    let same_topology = rig_a
        .skeleton
        .topology_difference(&rig_b.skeleton)
        .is_none();
    if !same_topology {
        info!("skeletons differ in topology; reporting end-effector errors only");
    }
    let mut per_motion = Vec::with_capacity(clips_a.len());
    for (a, b) in clips_a.iter().zip(&clips_b) {
        let frames = a.len().min(b.len());
        if a.len() != b.len() {
            info!(
                "{} / {}: resampling {} and {} frames to {frames}",
                a.name,
                b.name,
                a.len(),
                b.len()
            );
        }
        let (a, b) = (resample_nearest(a, frames), resample_nearest(b, frames));
        let ee = end_effector_errors(
            &rig_a.skeleton,
            &a,
            &rig_b.skeleton,
            &b,
            &map,
            args.unit_scale / 10.0,
        )
        .map_err(exit::eval)?;
        let mjpe_mm = if same_topology {
            let (pa, pb) = (root_local(&rig_a, &a)?, root_local(&rig_b, &b)?);
            Some(
                positions_error(&pa, &pb, Some(rig_a.skeleton.root_index())).map_err(exit::eval)?
                    * args.unit_scale,
            )
        } else {
            None
        };
        let name = if a.name == b.name {
            a.name.clone()
        } else {
            format!("{}~{}", a.name, b.name)
        };
        per_motion.push(MotionMetrics {
            name,
            frames,
            mjpe_mm,
            ee_cm: EeErrors::from_map(&ee),
        });
    }
    let skeletons = vec![
        dir_label(&args.a_dir, &rig_a),
        dir_label(&args.b_dir, &rig_b),
    ];
    let report = MetricsReport::new(per_motion, args.unit_scale, skeletons);
    write_report(&report, &args.report).map_err(exit::eval)?;
    println!("{}", report.summary());
    Ok(())
}

fn dir_label(dir: &Path, rig: &Rig) -> String {
    format!("{}:{}", dir.display(), rig.skeleton.len())
}

pub fn fk(args: FkArgs) -> Result<()> {
    let doc = read_bvh(&args.input)?;
    if args.frame >= doc.frame_count() {
        return Err(coded(
            ExitKind::Data,
            anyhow!(
                "{}: frame {} out of range ({} frames)",
                args.input.display(),
                args.frame,
                doc.frame_count()
            ),
        ));
    }
    let clip = MotionClip::from_document("fk", &doc);
    let mode = if args.root_local {
        RootMode::RootLocal
    } else {
        RootMode::Global
    };
    let positions =
        forward_kinematics(&doc.skeleton, &clip.poses[args.frame], mode).code(ExitKind::Data)?;
    print!(
        "{}",
        write_positions_csv(&doc.skeleton, &[(args.frame, positions)])
    );
    Ok(())
}

fn bind(bvh: &Path, config: &Path) -> Result<Rig> {
    let doc = read_bvh(bvh)?;
    load_config(config)?
        .bind(&doc.skeleton)
        .with_context(|| format!("binding {} to {}", config.display(), bvh.display()))
        .code(ExitKind::Data)
}

pub fn validate(args: ValidateArgs) -> Result<()> {
    let path: PathBuf = args
        .input
        .clone()
        .or(args.skel.clone())
        .expect("clap requires one source");
    let doc = read_bvh(&path)?;
    println!(
        "ok: {}: {} joints, {} channels, {} frames",
        path.display(),
        doc.skeleton.len(),
        doc.skeleton.channel_count(),
        doc.frame_count()
    );
    let Some(config) = &args.config else {
        return Ok(());
    };
    let rig = bind(&path, config)?;
    let reference = match (&args.reference, &args.reference_config) {
        (Some(bvh), Some(cfg)) => Some(bind(bvh, cfg)?),
        _ => None,
    };
    let findings = check_tpose_guidelines(&rig, reference.as_ref()).code(ExitKind::Data)?;
    for f in &findings {
        println!(
            "{} {} {:.6} {}",
            f.guideline.code(),
            f.joint_name,
            f.value,
            f.message
        );
    }
    println!("{} guideline findings", findings.len());
    if args.strict && !findings.is_empty() {
        return Err(coded(
            ExitKind::Data,
            anyhow!("{} guideline findings", findings.len()),
        ));
    }
    Ok(())
}

pub fn gradcheck(args: GradcheckArgs) -> Result<()> {
    let all: Vec<&str> = PRIMITIVES
        .iter()
        .chain(COMPOSITES.iter())
        .copied()
        .collect();
    let cases: Vec<&str> = if args.cases.is_empty() {
        all.clone()
    } else {
        for c in &args.cases {
            if !all.contains(&c.as_str()) {
                return Err(coded(
                    ExitKind::Usage,
                    anyhow!("unknown case {c:?}; known: {}", all.join(", ")),
                ));
            }
        }
        args.cases.iter().map(String::as_str).collect()
    };
    let config = SuiteConfig {
        draws: args.draws,
        seed: args.seed,
        ..SuiteConfig::default()
    };
    let mut failed = 0;
    for name in &cases {
        let r = run_case(name, &config).code(ExitKind::Internal)?;
        failed += !r.passed() as usize;
        println!(
            "{} {:<22} max_rel {:.3e} tol {:.0e} coords {} excluded {}",
            if r.passed() { "PASS" } else { "FAIL" },
            r.name,
            r.max_rel_error,
            r.tolerance,
            r.coordinates,
            r.excluded
        );
    }
    if failed > 0 {
        return Err(coded(
            ExitKind::Internal,
            anyhow!("{failed} of {} gradient cases failed", cases.len()),
        ));
    }
    println!("all {} gradient cases passed", cases.len());
    Ok(())
}

pub fn make_fixture(args: MakeFixtureArgs) -> Result<()> {
    let mut spec = match &args.spec {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("spec {}", path.display()))
                .code(ExitKind::Usage)?;
            serde_json::from_str::<FixtureSpec>(&text)
                .with_context(|| format!("spec {}", path.display()))
                .code(ExitKind::Usage)?
        }
        None => FixtureSpec::default(),
    };
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    let fixture = fixtures::make_fixture(&spec).code(ExitKind::Usage)?;
    write_fixture(&fixture, &args.out).code(ExitKind::Internal)?;
    println!(
        "wrote {} human and {} robot motions of {} frames to {}",
        fixture.human.clips.len(),
        fixture.robot.clips.len(),
        spec.frames,
        args.out.display()
    );
    Ok(())
}
