use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use retarget_core::bvh::{parse_bvh, read_bvh_file};
use retarget_core::eval::read_report;
use retarget_core::fixtures::{make_fixture, write_fixture, FixtureSpec};
use retarget_core::net::{save_checkpoint, DomainSpec, NormStats, RetargetModel};
use retarget_core::skeleton::SkeletonConfig;
use tempfile::TempDir;

const MINIMAL: &str = "HIERARCHY
ROOT root
{
  OFFSET 0 0 0
  CHANNELS 6 Xposition Yposition Zposition Zrotation Xrotation Yrotation
  JOINT child
  {
    OFFSET 0 10 0
    CHANNELS 3 Zrotation Xrotation Yrotation
    End Site
    {
      OFFSET 0 5 0
    }
  }
}
MOTION
Frames: 1
Frame Time: 0.02
0 0 0 0 0 0 0 0 0
";

fn nmrt<I, S>(args: I) -> Output
where
    I: IntoIterator<Item = S>,
    S: AsRef<std::ffi::OsStr>,
{
    Command::new(env!("CARGO_BIN_EXE_nmrt"))
        .args(args)
        .output()
        .expect("nmrt runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn small_spec() -> FixtureSpec {
    FixtureSpec {
        motions: 3,
        frames: 80,
        ..FixtureSpec::default()
    }
}

fn fixture_dir() -> TempDir {
    let dir = TempDir::new().unwrap();
    write_fixture(&make_fixture(&small_spec()).unwrap(), dir.path()).unwrap();
    dir
}

fn first_bvh(dir: &Path) -> PathBuf {
    retarget_core::bvh::bvh_files(dir).unwrap().remove(0)
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Trains a few steps on the small fixture and returns the output dir.
fn trained(fx: &Path) -> TempDir {
    let out = TempDir::new().unwrap();
    let o = nmrt([
        "-q",
        "train",
        "--human-dir",
        p(&fx.join("human")),
        "--robot-dir",
        p(&fx.join("robot")),
        "--out",
        p(out.path()),
        "window.T=32",
        "batch_size=2",
        "max_steps=3",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    out
}

#[test]
fn make_fixture_writes_both_domains_deterministically() {
    let spec_dir = TempDir::new().unwrap();
    let spec = spec_dir.path().join("spec.json");
    std::fs::write(&spec, r#"{"motions": 2, "frames": 40}"#).unwrap();
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    for out in [&a, &b] {
        let o = nmrt(["make-fixture", "--spec", p(&spec), "--out", p(out.path())]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    for domain in ["human", "robot"] {
        let files = retarget_core::bvh::bvh_files(&a.path().join(domain)).unwrap();
        assert_eq!(files.len(), 2);
        for f in files {
            let other = b.path().join(domain).join(f.file_name().unwrap());
            assert_eq!(std::fs::read(&f).unwrap(), std::fs::read(other).unwrap());
        }
        SkeletonConfig::load(a.path().join(domain).join("skeleton_config.json")).unwrap();
    }
}

#[test]
fn train_writes_artifacts_and_applies_overrides() {
    let fx = fixture_dir();
    let out = TempDir::new().unwrap();
    let o = nmrt([
        "train",
        "--human-dir",
        p(&fx.path().join("human")),
        "--robot-dir",
        p(&fx.path().join("robot")),
        "--out",
        p(out.path()),
        "--seed",
        "7",
        "window.T=32",
        "batch_size=2",
        "max_steps=2",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("final loss: step 1"), "{}", stdout(&o));
    assert!(
        stderr(&o).contains("\"T\": 32"),
        "effective config is logged"
    );
    let effective: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(out.path().join("effective_config.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(effective["window"]["T"], 32);
    assert_eq!(effective["seed"], 7);
    let losses = std::fs::read_to_string(out.path().join("losses.csv")).unwrap();
    assert_eq!(losses.lines().count(), 3);
    assert!(out.path().join("ckpt_2.nmrt").is_file());
}

#[test]
fn config_file_is_overridden_by_key_values() {
    let fx = fixture_dir();
    let out = TempDir::new().unwrap();
    let cfg = out.path().join("cfg.json");
    std::fs::write(
        &cfg,
        r#"{"window": {"T": 48}, "batch_size": 2, "max_steps": 1}"#,
    )
    .unwrap();
    let o = nmrt([
        "-q",
        "train",
        "--config",
        p(&cfg),
        "--human-dir",
        p(&fx.path().join("human")),
        "--robot-dir",
        p(&fx.path().join("robot")),
        "--out",
        p(&out.path().join("run")),
        "window.T=32",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let effective = std::fs::read_to_string(out.path().join("run/effective_config.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&effective).unwrap();
    assert_eq!(
        (v["window"]["T"].as_u64(), v["batch_size"].as_u64()),
        (Some(32), Some(2))
    );
}

#[test]
fn train_usage_and_config_errors_exit_2() {
    let fx = fixture_dir();
    let missing = nmrt([
        "train",
        "--human-dir",
        p(&fx.path().join("human")),
        "--out",
        "/tmp/never",
    ]);
    assert_eq!(missing.status.code(), Some(2));
    assert!(stderr(&missing).contains("--robot-dir"));

    let base = |extra: &str| {
        nmrt([
            "train",
            "--human-dir",
            p(&fx.path().join("human")),
            "--robot-dir",
            p(&fx.path().join("robot")),
            "--out",
            "/tmp/never",
            extra,
        ])
    };
    for bad in ["window.X=3", "window.T=0", "batch_size=-1", "noequals"] {
        let o = base(bad);
        assert_eq!(o.status.code(), Some(2), "{bad}: {}", stderr(&o));
        assert_eq!(
            stderr(&o).lines().count(),
            1,
            "one-line diagnostic for {bad}"
        );
    }
}

#[test]
fn train_data_errors_exit_3() {
    let fx = fixture_dir();
    let o = nmrt([
        "train",
        "--human-dir",
        p(&fx.path().join("human")),
        "--robot-dir",
        p(&fx.path().join("human")),
        "--robot-skel",
        p(&fx.path().join("robot/skeleton_config.json")),
        "--out",
        "/tmp/never",
    ]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn unknown_flag_is_an_error() {
    let o = nmrt(["fk", "--input", "x.bvh", "--bogus"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(nmrt(Vec::<String>::new()).status.code(), Some(2));
}

#[test]
fn retarget_preserves_frames_and_checks_skeletons() {
    let fx = fixture_dir();
    let run = trained(fx.path());
    let ckpt = run.path().join("ckpt_3.nmrt");
    let human = first_bvh(&fx.path().join("human"));
    let output = run.path().join("out.bvh");
    let o = nmrt([
        "retarget",
        "--ckpt",
        p(&ckpt),
        "--input",
        p(&human),
        "--from",
        "h",
        "--output",
        p(&output),
        "--window",
        "32",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let doc = read_bvh_file(&output).unwrap();
    assert_eq!(doc.frame_count(), 80);
    let robot = read_bvh_file(&first_bvh(&fx.path().join("robot"))).unwrap();
    assert!(doc.skeleton.topology_difference(&robot.skeleton).is_none());

    // A robot file fed as human input names the first differing joint.
    let robot_file = first_bvh(&fx.path().join("robot"));
    let o = nmrt([
        "retarget",
        "--ckpt",
        p(&ckpt),
        "--input",
        p(&robot_file),
        "--from",
        "h",
        "--output",
        p(&output),
    ]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("at joint root"), "{}", stderr(&o));

    let junk = run.path().join("junk.nmrt");
    std::fs::write(&junk, b"not a checkpoint at all").unwrap();
    let o = nmrt([
        "retarget",
        "--ckpt",
        p(&junk),
        "--input",
        p(&human),
        "--from",
        "h",
        "--output",
        p(&output),
    ]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
}

#[test]
fn identity_double_retarget_reproduces_input() {
    let fx = make_fixture(&small_spec()).unwrap();
    let dir = TempDir::new().unwrap();
    write_fixture(&fx, dir.path()).unwrap();
    let rig = fx.human.rig();
    let width = retarget_core::net::FeatureLayout::new(&rig).width;
    let spec = DomainSpec::new(rig, NormStats::identity(width)).unwrap();
    let ckpt = dir.path().join("identity.nmrt");
    save_checkpoint(&RetargetModel::identity(spec.clone(), spec).unwrap(), &ckpt).unwrap();

    let input = first_bvh(&dir.path().join("human"));
    let output = dir.path().join("same.bvh");
    let o = nmrt([
        "retarget",
        "--ckpt",
        p(&ckpt),
        "--input",
        p(&input),
        "--from",
        "h",
        "--output",
        p(&output),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (a, b) = (
        read_bvh_file(&input).unwrap(),
        read_bvh_file(&output).unwrap(),
    );
    let diff = a.max_numeric_difference(&b).expect("same shape");
    assert!(diff < 1e-5, "max difference {diff}");
}

#[test]
fn cycle_eval_writes_report() {
    let fx = fixture_dir();
    let run = trained(fx.path());
    let report = run.path().join("cycle.json");
    let o = nmrt([
        "cycle-eval",
        "--ckpt",
        p(&run.path().join("ckpt_3.nmrt")),
        "--input-dir",
        p(&fx.path().join("human")),
        "--report",
        p(&report),
        "--window",
        "32",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("aggregate: mjpe"));
    let r = read_report(&report).unwrap();
    assert_eq!(r.per_motion.len(), 3);
    assert!(r.aggregate.mjpe_mm.unwrap() > 0.0);

    let o = nmrt([
        "cycle-eval",
        "--ckpt",
        p(&run.path().join("ckpt_3.nmrt")),
        "--input-dir",
        p(&fx.path().join("robot")),
        "--report",
        p(&report),
    ]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn compare_identical_dirs_reports_zero() {
    let fx = fixture_dir();
    let out = TempDir::new().unwrap();
    let report = out.path().join("cmp.json");
    let human = fx.path().join("human");
    let o = nmrt([
        "compare",
        "--a-dir",
        p(&human),
        "--b-dir",
        p(&human),
        "--report",
        p(&report),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r = read_report(&report).unwrap();
    assert_eq!(r.aggregate.mjpe_mm, Some(0.0));
    assert_eq!(r.aggregate.ee_cm.values(), [0.0; 3]);
    assert!(stdout(&o).contains("mjpe 0.000 mm"));
}

#[test]
fn compare_across_topologies_reports_end_effectors_only() {
    let fx = fixture_dir();
    let out = TempDir::new().unwrap();
    let report = out.path().join("cmp.json");
    let map = out.path().join("map.json");
    std::fs::write(
        &map,
        r#"{"head": ["neck_end", "neck_end"], "left_hand": ["l_wrist_end", "l_wrist_end"], "right_hand": ["r_wrist_end", "r_wrist_end"]}"#,
    )
    .unwrap();
    let o = nmrt([
        "compare",
        "--a-dir",
        p(&fx.path().join("human")),
        "--b-dir",
        p(&fx.path().join("robot")),
        "--ee-map",
        p(&map),
        "--report",
        p(&report),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r = read_report(&report).unwrap();
    assert_eq!(r.aggregate.mjpe_mm, None);
    assert!(r.aggregate.ee_cm.values().iter().all(|v| *v > 0.0));
}

#[test]
fn fk_dumps_offset_sums() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("min.bvh");
    std::fs::write(&path, MINIMAL).unwrap();
    let o = nmrt(["fk", "--input", p(&path), "--frame", "0"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "frame,joint,x,y,z");
    assert!(lines.contains(&"0,root,0,0,0"), "{out}");
    assert!(lines.contains(&"0,child,0,10,0"), "{out}");
    assert_eq!(
        nmrt(["fk", "--input", p(&path), "--frame", "0"]).stdout,
        o.stdout
    );
    assert_eq!(
        nmrt(["fk", "--input", p(&path), "--frame", "5"])
            .status
            .code(),
        Some(3)
    );
}

#[test]
fn validate_parses_and_lints() {
    let fx = fixture_dir();
    let human = first_bvh(&fx.path().join("human"));
    let robot = first_bvh(&fx.path().join("robot"));
    let o = nmrt(["validate", "--input", p(&human)]);
    assert!(o.status.success());
    assert!(stdout(&o).starts_with("ok:"));

    let o = nmrt([
        "validate",
        "--skel",
        p(&robot),
        "--config",
        p(&fx.path().join("robot/skeleton_config.json")),
        "--reference",
        p(&human),
        "--reference-config",
        p(&fx.path().join("human/skeleton_config.json")),
        "--strict",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("0 guideline findings"));

    assert_eq!(
        nmrt(["validate", "--skel", p(&robot)]).status.code(),
        Some(2)
    );
    let broken = fx.path().join("broken.bvh");
    std::fs::write(&broken, "HIERARCHY\nROOT a\n{\n").unwrap();
    assert_eq!(
        nmrt(["validate", "--input", p(&broken)]).status.code(),
        Some(3)
    );
}

#[test]
fn validate_strict_fails_on_findings() {
    let fx = fixture_dir();
    let text = std::fs::read_to_string(first_bvh(&fx.path().join("human"))).unwrap();
    // Stretch the left hand's end site to 1.6x its parent link.
    let site = text.find("JOINT l_wrist").unwrap()
        + text[text.find("JOINT l_wrist").unwrap()..]
            .find("End Site")
            .unwrap();
    let line_start = site + text[site..].find("OFFSET").unwrap();
    let line_end = line_start + text[line_start..].find('\n').unwrap();
    let values: Vec<f64> = text[line_start..line_end]
        .split_whitespace()
        .skip(1)
        .map(|v| v.parse().unwrap())
        .collect();
    let stretched = format!(
        "OFFSET {} {} {}",
        values[0] * 1.6,
        values[1] * 1.6,
        values[2] * 1.6
    );
    let mut edited = text.clone();
    edited.replace_range(line_start..line_end, &stretched);
    let bad = fx.path().join("bad.bvh");
    std::fs::write(&bad, edited).unwrap();
    assert!(parse_bvh(&std::fs::read_to_string(&bad).unwrap()).is_ok());

    let config = fx.path().join("human/skeleton_config.json");
    let o = nmrt([
        "validate",
        "--skel",
        p(&bad),
        "--config",
        p(&config),
        "--strict",
    ]);
    assert_eq!(o.status.code(), Some(3), "{}{}", stdout(&o), stderr(&o));
    assert!(stdout(&o).contains("G3 l_wrist_end"), "{}", stdout(&o));
    let o = nmrt(["validate", "--skel", p(&bad), "--config", p(&config)]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("1 guideline findings"));
}

#[test]
fn gradcheck_runs_selected_cases() {
    let o = nmrt([
        "gradcheck",
        "--case",
        "add",
        "--case",
        "tanh",
        "--draws",
        "5",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(
        stdout(&o).lines().filter(|l| l.starts_with("PASS")).count(),
        2
    );
    assert_eq!(nmrt(["gradcheck", "--case", "nope"]).status.code(), Some(2));
}
