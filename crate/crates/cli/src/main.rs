//! `nmrt`: train, apply and evaluate skeleton-aware motion retargeting models.

mod commands;
mod exit;
mod overrides;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgGroup, Args, Parser, Subcommand};
use retarget_core::net::Domain;

#[derive(Debug, Parser)]
#[command(
    name = "nmrt",
    version,
    about = "Cycle-consistent motion retargeting between skeletons"
)]
struct Cli {
    /// More log output (-v debug, -vv trace).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    /// Only log errors.
    #[arg(short, long, global = true, conflicts_with = "verbose")]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train a model on two motion directories.
    Train(TrainArgs),
    /// Retarget one BVH file with a checkpoint.
    Retarget(RetargetArgs),
    /// Cycle-reconstruct a directory and report position errors.
    CycleEval(CycleEvalArgs),
    /// Compare paired motions of two directories.
    Compare(CompareArgs),
    /// Dump joint positions of one frame as CSV.
    Fk(FkArgs),
    /// Parse a BVH file and lint its skeleton against the T-pose guidelines.
    Validate(ValidateArgs),
    /// Run the finite-difference gradient suite.
    Gradcheck(GradcheckArgs),
    /// Write a synthetic paired corpus.
    MakeFixture(MakeFixtureArgs),
}

fn parse_domain(s: &str) -> Result<Domain, String> {
    Domain::from_code(s).ok_or_else(|| format!("expected h or r, got {s:?}"))
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Training config JSON; defaults apply to absent keys.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    human_dir: PathBuf,
    #[arg(long)]
    robot_dir: PathBuf,
    /// Human skeleton config; defaults to <human-dir>/skeleton_config.json.
    #[arg(long)]
    human_skel: Option<PathBuf>,
    /// Robot skeleton config; defaults to <robot-dir>/skeleton_config.json.
    #[arg(long)]
    robot_skel: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Config overrides such as `window.T=32`.
    #[arg(value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Debug, Args)]
pub struct RetargetArgs {
    #[arg(long)]
    ckpt: PathBuf,
    #[arg(long)]
    input: PathBuf,
    /// Source domain of the input: h or r.
    #[arg(long, value_parser = parse_domain)]
    from: Domain,
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value_t = 64)]
    window: usize,
}

#[derive(Debug, Args)]
pub struct CycleEvalArgs {
    #[arg(long)]
    ckpt: PathBuf,
    #[arg(long)]
    input_dir: PathBuf,
    #[arg(long)]
    report: PathBuf,
    /// Domain the motions belong to.
    #[arg(long, value_parser = parse_domain, default_value = "h")]
    home: Domain,
    #[arg(long, default_value_t = 64)]
    window: usize,
    /// Millimetres per BVH unit.
    #[arg(long, default_value_t = retarget_core::eval::DEFAULT_UNIT_SCALE_MM)]
    unit_scale: f64,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long)]
    a_dir: PathBuf,
    #[arg(long)]
    b_dir: PathBuf,
    /// Skeleton config of the a side; defaults to <a-dir>/skeleton_config.json.
    #[arg(long)]
    skel_a: Option<PathBuf>,
    #[arg(long)]
    skel_b: Option<PathBuf>,
    /// JSON object mapping head/left_hand/right_hand to [a_joint, b_joint];
    /// defaults to the end-effectors of the two configs.
    #[arg(long)]
    ee_map: Option<PathBuf>,
    #[arg(long)]
    report: PathBuf,
    #[arg(long, default_value_t = retarget_core::eval::DEFAULT_UNIT_SCALE_MM)]
    unit_scale: f64,
}

#[derive(Debug, Args)]
pub struct FkArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = 0)]
    frame: usize,
    /// Place the root at the origin.
    #[arg(long)]
    root_local: bool,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("source").required(true).args(["input", "skel"])))]
pub struct ValidateArgs {
    /// BVH file to parse.
    #[arg(long)]
    input: Option<PathBuf>,
    /// BVH file whose hierarchy is linted; requires --config.
    #[arg(long, requires = "config")]
    skel: Option<PathBuf>,
    /// Skeleton config; enables the guideline checks.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Other domain's BVH file, for the chest-link check.
    #[arg(long, requires = "reference_config")]
    reference: Option<PathBuf>,
    #[arg(long, requires = "reference")]
    reference_config: Option<PathBuf>,
    /// Exit with status 3 when any guideline finding is reported.
    #[arg(long)]
    strict: bool,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    /// Random draws per case.
    #[arg(long, default_value_t = 100)]
    draws: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Restrict to the named cases.
    #[arg(long = "case")]
    cases: Vec<String>,
}

#[derive(Debug, Args)]
pub struct MakeFixtureArgs {
    /// Fixture spec JSON; defaults apply to absent keys.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match (cli.quiet, cli.verbose) {
        (true, _) => log::LevelFilter::Error,
        (_, 0) => log::LevelFilter::Info,
        (_, 1) => log::LevelFilter::Debug,
        _ => log::LevelFilter::Trace,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .parse_default_env()
        .format_timestamp(None)
        .init();

    let result = match cli.command {
        Command::Train(a) => commands::train(a),
        Command::Retarget(a) => commands::retarget(a),
        Command::CycleEval(a) => commands::cycle_eval(a),
        Command::Compare(a) => commands::compare(a),
        Command::Fk(a) => commands::fk(a),
        Command::Validate(a) => commands::validate(a),
        Command::Gradcheck(a) => commands::gradcheck(a),
        Command::MakeFixture(a) => commands::make_fixture(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("nmrt: error: {e:#}");
            ExitCode::from(exit::exit_kind(&e) as u8)
        }
    }
}
