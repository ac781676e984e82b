//! Finite-difference checks of every differentiable building block, from
//! single tape primitives up to the full training losses.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::gradcheck::{check_gradient_with, GradCheckOptions, DEFAULT_STEP};
use crate::autodiff::{AutodiffError, Conv1dSpec, ConvGroup, PadMode, Tape, Tensor, Var};
use crate::kinematics::{fk_differentiable, FkLayout, RootMode};
use crate::net::{ArchConfig, BoundParams, Domain, DomainSpec, NetError, NormStats, RetargetModel};
use crate::skeleton::{ChannelKind, EndEffectors, Joint, JointKind, Skeleton, SkeletonConfig};
use crate::training::{discriminator_loss, generator_loss, LossWeights};

pub const PRIMITIVE_TOLERANCE: f64 = 1e-4;
pub const COMPOSITE_TOLERANCE: f64 = 1e-3;
/// Disagreement between step and half-step differences marking a kink.
pub const KINK_TOLERANCE: f64 = 1e-6;
/// Largest share of coordinates a case may exclude as kinks.
pub const MAX_EXCLUDED_FRACTION: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuiteConfig {
    pub draws: usize,
    pub seed: u64,
    pub step: f64,
    /// Coordinates sampled per parameter tensor in composite cases.
    pub coords_per_param: usize,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            draws: 100,
            seed: 42,
            step: DEFAULT_STEP,
            coords_per_param: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaseResult {
    pub name: String,
    pub draws: usize,
    pub max_rel_error: f64,
    pub tolerance: f64,
    pub coordinates: usize,
    pub excluded: usize,
}

impl CaseResult {
    pub fn passed(&self) -> bool {
        let total = (self.coordinates + self.excluded).max(1) as f64;
        self.max_rel_error < self.tolerance
            && (self.excluded as f64) / total <= MAX_EXCLUDED_FRACTION
    }
}

type Loss = Box<dyn Fn(&mut Tape, &[Var]) -> Result<Var, AutodiffError>>;

/// One randomized instance: inputs, loss builder and coordinate budget.
struct Draw {
    inputs: Vec<Tensor>,
    loss: Loss,
    max_coords: Option<usize>,
}

fn ad(e: NetError) -> AutodiffError {
    match e {
        NetError::Autodiff(a) => a,
        other => AutodiffError::InvalidArgument {
            op: "net",
            message: other.to_string(),
        },
    }
}

fn random(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    let n = shape.iter().product();
    // Kept away from zero so kinks never fall inside the difference step.
    let data = (0..n)
        .map(|_| {
            let v: f64 = rng.random_range(0.05..1.0);
            if rng.random_bool(0.5) {
                v
            } else {
                -v
            }
        })
        .collect();
    Tensor::new(shape.to_vec(), data).expect("sized")
}

/// `Σ y ⊙ r` for a fixed random `r` shaped like `y`.
fn project(tape: &mut Tape, y: Var, r: &Tensor) -> Result<Var, AutodiffError> {
    let r = tape.constant(r.clone().reshaped(tape.shape(y))?);
    let m = tape.mul(y, r)?;
    Ok(tape.sum(m))
}

fn unary(
    rng: &mut ChaCha8Rng,
    shape: &[usize],
    out_len: usize,
    op: impl Fn(&mut Tape, Var) -> Result<Var, AutodiffError> + 'static,
) -> Draw {
    let r = random(rng, &[out_len]);
    Draw {
        inputs: vec![random(rng, shape)],
        loss: Box::new(move |t, v| {
            let y = op(t, v[0])?;
            project(t, y, &r)
        }),
        max_coords: None,
    }
}

fn binary(
    rng: &mut ChaCha8Rng,
    a: &[usize],
    b: &[usize],
    out_len: usize,
    op: impl Fn(&mut Tape, Var, Var) -> Result<Var, AutodiffError> + 'static,
) -> Draw {
    let r = random(rng, &[out_len]);
    Draw {
        inputs: vec![random(rng, a), random(rng, b)],
        loss: Box::new(move |t, v| {
            let y = op(t, v[0], v[1])?;
            project(t, y, &r)
        }),
        max_coords: None,
    }
}

fn primitive(name: &str, rng: &mut ChaCha8Rng) -> Draw {
    match name {
        "add" => binary(rng, &[2, 3], &[2, 3], 6, |t, a, b| t.add(a, b)),
        "sub" => binary(rng, &[2, 3], &[2, 3], 6, |t, a, b| t.sub(a, b)),
        "mul" => binary(rng, &[2, 3], &[2, 3], 6, |t, a, b| t.mul(a, b)),
        "scale" => {
            let c = rng.random_range(-2.0..2.0);
            unary(rng, &[2, 3], 6, move |t, x| Ok(t.scale(x, c)))
        }
        "add_scalar" => {
            let c = rng.random_range(-2.0..2.0);
            unary(rng, &[2, 3], 6, move |t, x| {
                let y = t.add_scalar(x, c);
                Ok(t.square(y))
            })
        }
        "leaky_relu" => unary(rng, &[2, 5], 10, |t, x| Ok(t.leaky_relu(x, 0.2))),
        "tanh" => unary(rng, &[2, 5], 10, |t, x| Ok(t.tanh(x))),
        "square" => unary(rng, &[2, 5], 10, |t, x| Ok(t.square(x))),
        "matmul" => binary(rng, &[2, 3], &[3, 4], 8, |t, a, b| t.matmul(a, b)),
        "conv1d" => {
            let stride = rng.random_range(1..=2);
            let mode = if rng.random_bool(0.5) {
                PadMode::Reflect
            } else {
                PadMode::Zero
            };
            let out = (9 + 2 - 3) / stride + 1;
            binary(rng, &[2, 3, 9], &[4, 3, 3], 2 * 4 * out, move |t, x, k| {
                t.conv1d(x, k, stride, 1, mode)
            })
        }
        "grouped_conv1d" => {
            let mode = if rng.random_bool(0.5) {
                PadMode::Reflect
            } else {
                PadMode::Zero
            };
            let groups = vec![
                ConvGroup {
                    inputs: vec![0, 2],
                    outputs: vec![0, 1, 3],
                },
                ConvGroup {
                    inputs: vec![1, 3],
                    outputs: vec![2],
                },
                ConvGroup {
                    inputs: vec![0, 1, 2, 3],
                    outputs: vec![4],
                },
            ];
            let spec = Arc::new(Conv1dSpec::new(4, 5, 5, 2, 2, mode, groups).expect("valid spec"));
            let wl = spec.weight_len();
            let out = spec.output_len(10).expect("fits");
            binary(rng, &[2, 4, 10], &[wl], 2 * 5 * out, move |t, x, w| {
                t.grouped_conv1d(x, w, spec.clone())
            })
        }
        "sum" => unary(rng, &[2, 3], 1, |t, x| {
            let s = t.sum(x);
            Ok(t.square(s))
        }),
        "mean" => unary(rng, &[2, 3], 1, |t, x| {
            let s = t.mean(x);
            Ok(t.square(s))
        }),
        "sum_axis" => {
            let axis = rng.random_range(0..3);
            let out = 24 / [2, 3, 4][axis];
            unary(rng, &[2, 3, 4], out, move |t, x| t.sum_axis(x, axis))
        }
        "mean_axis" => {
            let axis = rng.random_range(0..3);
            let out = 24 / [2, 3, 4][axis];
            unary(rng, &[2, 3, 4], out, move |t, x| t.mean_axis(x, axis))
        }
        "concat" => {
            let axis = rng.random_range(0..2);
            let b = if axis == 0 { [1, 3] } else { [2, 2] };
            let out = if axis == 0 { 9 } else { 10 };
            binary(rng, &[2, 3], &b, out, move |t, x, y| {
                t.concat(&[x, y], axis)
            })
        }
        "slice" => {
            let axis = rng.random_range(0..3);
            let len = [2, 3, 4][axis];
            let start = rng.random_range(0..len - 1);
            let end = rng.random_range(start + 1..=len);
            let out = 24 / len * (end - start);
            unary(rng, &[2, 3, 4], out, move |t, x| {
                t.slice(x, axis, start, end)
            })
        }
        "broadcast" => unary(rng, &[3, 1], 24, |t, x| t.broadcast(x, &[2, 3, 4])),
        "reshape" => unary(rng, &[2, 6], 12, |t, x| {
            let y = t.reshape(x, &[3, 4])?;
            Ok(t.square(y))
        }),
        "normalize_l2" => {
            let axis = rng.random_range(0..3);
            unary(rng, &[2, 4, 3], 24, move |t, x| t.normalize_l2(x, axis))
        }
        "upsample1d" => unary(rng, &[2, 3, 5], 60, |t, x| t.upsample1d(x, 2)),
        other => unreachable!("unknown primitive {other}"),
    }
}

pub const PRIMITIVES: [&str; 22] = [
    "add",
    "sub",
    "mul",
    "scale",
    "add_scalar",
    "leaky_relu",
    "tanh",
    "square",
    "matmul",
    "conv1d",
    "grouped_conv1d",
    "sum",
    "mean",
    "sum_axis",
    "mean_axis",
    "concat",
    "slice",
    "broadcast",
    "reshape",
    "normalize_l2",
    "upsample1d",
    "custom_fk",
];

pub const COMPOSITES: [&str; 4] = [
    "fk_differentiable",
    "generator_path",
    "generator_loss",
    "discriminator_loss",
];

fn rot_joint(name: &str, parent: usize, offset: [f64; 3]) -> Joint {
    Joint {
        name: name.into(),
        parent: Some(parent),
        offset,
        channels: vec![
            ChannelKind::Zrotation,
            ChannelKind::Xrotation,
            ChannelKind::Yrotation,
        ],
        kind: JointKind::Actuated,
        end_site: false,
    }
}

fn tiny_root() -> Joint {
    Joint {
        name: "root".into(),
        parent: None,
        offset: [0.0; 3],
        channels: vec![
            ChannelKind::Xposition,
            ChannelKind::Yposition,
            ChannelKind::Zposition,
        ],
        kind: JointKind::Fixed,
        end_site: false,
    }
}

/// Four-joint skeletons: the human ends in an end-effector, the robot in an
/// extra actuated joint. Both map onto two body parts.
pub fn tiny_domains(rng: &mut ChaCha8Rng) -> (DomainSpec, DomainSpec) {
    let human = Skeleton::new(vec![
        tiny_root(),
        rot_joint("a", 0, [0.0, 0.4, 0.0]),
        rot_joint("b", 1, [0.3, 0.0, 0.0]),
        Joint {
            channels: vec![],
            kind: JointKind::EndEffector,
            end_site: true,
            ..rot_joint("b_end", 2, [0.3, 0.0, 0.0])
        },
    ])
    .expect("valid");
    let robot = Skeleton::new(vec![
        tiny_root(),
        rot_joint("a", 0, [0.0, 0.5, 0.0]),
        rot_joint("b", 1, [0.2, 0.0, 0.0]),
        rot_joint("c", 2, [0.2, 0.0, 0.0]),
    ])
    .expect("valid");
    let spec = |sk: &Skeleton, last: &str, rng: &mut ChaCha8Rng| {
        let kinds = sk
            .joints()
            .iter()
            .map(|j| (j.name.clone(), j.kind))
            .collect();
        let parts = sk
            .joints()
            .iter()
            .enumerate()
            .map(|(i, j)| (j.name.clone(), (i >= 2) as usize))
            .collect();
        let config = SkeletonConfig {
            kinds,
            parts,
            end_effectors: EndEffectors {
                head: "a".into(),
                left_hand: last.into(),
                right_hand: last.into(),
            },
            height: 1.0,
            tpose_tolerances: Default::default(),
            chest: None,
            link_pairs: Default::default(),
        };
        let rig = config.bind(sk).expect("tiny config binds");
        let width = 4 * (sk.len() - 1 - (last == "b_end") as usize) + 3;
        let stats = NormStats {
            mean: (0..width).map(|_| rng.random_range(-0.2..0.2)).collect(),
            std: (0..width).map(|_| rng.random_range(0.5..1.5)).collect(),
        };
        DomainSpec::new(rig, stats).expect("width matches")
    };
    let h = spec(&human, "b_end", rng);
    let r = spec(&robot, "c", rng);
    (h, r)
}

pub fn tiny_arch() -> ArchConfig {
    ArchConfig {
        latent_channels: 3,
        kernel: 5,
        hidden_channels: 2,
        disc_hidden: 2,
        disc_channels: 3,
        disc_kernel: 3,
        slope: 0.2,
        pad_mode: PadMode::Reflect,
    }
}

/// Model with every parameter (biases included) randomized.
pub fn tiny_model(rng: &mut ChaCha8Rng) -> RetargetModel {
    let (h, r) = tiny_domains(rng);
    let mut model = RetargetModel::new(tiny_arch(), h, r, rng.random()).expect("tiny model");
    for p in model.params_mut() {
        for v in p.data_mut() {
            *v += rng.random_range(-0.1..0.1);
        }
    }
    model
}

/// Random raw `[B, F, T]` window: near-unit quaternions and translations.
pub fn random_window(rng: &mut ChaCha8Rng, spec: &DomainSpec, batch: usize, t: usize) -> Tensor {
    let f = spec.width();
    let rot = spec.layout.rotation_channels();
    let data = (0..batch * f * t)
        .map(|i| {
            let c = (i / t) % f;
            if c < rot && c % 4 == 0 {
                rng.random_range(0.6..1.0)
            } else {
                rng.random_range(-0.4..0.4)
            }
        })
        .collect();
    Tensor::new(vec![batch, f, t], data).expect("sized")
}

/// Binds `trainable` parameters to the leading tape inputs (after `skip`
/// leading non-parameter inputs) and the rest as constants.
fn bind_subset(
    model: &RetargetModel,
    tape: &mut Tape,
    trainable: &[usize],
    inputs: &[Var],
    skip: usize,
) -> BoundParams {
    let mut vars = Vec::with_capacity(model.params().len());
    for (i, p) in model.params().iter().enumerate() {
        match trainable.iter().position(|&k| k == i) {
            Some(pos) => vars.push(inputs[skip + pos]),
            None => vars.push(tape.constant(p.clone())),
        }
    }
    BoundParams { vars }
}

fn composite(name: &str, rng: &mut ChaCha8Rng, coords: usize) -> Draw {
    const T: usize = 8;
    match name {
        "fk_differentiable" | "custom_fk" => {
            let (h, _) = tiny_domains(rng);
            let sk = h.rig.skeleton.clone();
            let layout = if name == "custom_fk" {
                FkLayout::full(&sk)
            } else {
                FkLayout::actuated(&sk)
            };
            let batch = if name == "custom_fk" { 1 } else { 2 };
            let input = random(rng, &[batch, layout.rows, T]);
            let r = random(rng, &[batch * sk.len() * 3 * T]);
            Draw {
                inputs: vec![input],
                loss: Box::new(move |t, v| {
                    let p = fk_differentiable(t, &sk, &layout, v[0], RootMode::Global).map_err(
                        |e| match e {
                            crate::kinematics::KinematicsError::Autodiff(a) => a,
                            other => AutodiffError::InvalidArgument {
                                op: "fk",
                                message: other.to_string(),
                            },
                        },
                    )?;
                    project(t, p, &r)
                }),
                max_coords: None,
            }
        }
        "generator_path" => {
            let model = tiny_model(rng);
            let spec = model.domain(Domain::Human).clone();
            let x = random_window(rng, &spec, 1, T);
            let gen = model.generator_params();
            let mut inputs = vec![x];
            inputs.extend(gen.iter().map(|&i| model.params()[i].clone()));
            let sk = model.domain(Domain::Robot).rig.skeleton.clone();
            let layout = model.domain(Domain::Robot).fk_layout.clone();
            let r = random(rng, &[sk.len() * 3 * T]);
            Draw {
                inputs,
                loss: Box::new(move |t, v| {
                    let bound = bind_subset(&model, t, &gen, v, 1);
                    let y = model
                        .retarget_var(t, &bound, Domain::Human, Domain::Robot, v[0])
                        .map_err(ad)?;
                    let p = fk_differentiable(t, &sk, &layout, y, RootMode::RootLocal)
                        .map_err(|e| ad(e.into()))?;
                    project(t, p, &r)
                }),
                max_coords: Some(coords),
            }
        }
        "generator_loss" => {
            let model = tiny_model(rng);
            let xh = random_window(rng, model.domain(Domain::Human), 2, T);
            let xr = random_window(rng, model.domain(Domain::Robot), 2, T);
            let gen = model.generator_params();
            let mut inputs = vec![xh, xr];
            inputs.extend(gen.iter().map(|&i| model.params()[i].clone()));
            Draw {
                inputs,
                loss: Box::new(move |t, v| {
                    let bound = bind_subset(&model, t, &gen, v, 2);
                    let terms =
                        generator_loss(&model, t, &bound, &LossWeights::default(), v[0], v[1])
                            .map_err(ad)?;
                    Ok(terms.total)
                }),
                max_coords: Some(coords),
            }
        }
        "discriminator_loss" => {
            let model = tiny_model(rng);
            let d = if rng.random_bool(0.5) {
                Domain::Human
            } else {
                Domain::Robot
            };
            let real = random_window(rng, model.domain(d), 2, T);
            let fake = random_window(rng, model.domain(d), 2, T);
            let disc = model.discriminator_params(d);
            let mut inputs = vec![real];
            inputs.extend(disc.iter().map(|&i| model.params()[i].clone()));
            Draw {
                inputs,
                loss: Box::new(move |t, v| {
                    let bound = bind_subset(&model, t, &disc, v, 1);
                    let f = t.constant(fake.clone());
                    discriminator_loss(&model, t, &bound, d, v[0], f).map_err(ad)
                }),
                max_coords: Some(coords),
            }
        }
        other => unreachable!("unknown composite {other}"),
    }
}

/// Runs `draws` random instances of case `name` and records the worst
/// relative error. Composite cases contain kinks (leaky ReLU, the
/// quaternion sign choice), so coordinates straddling one are excluded and
/// counted.
pub fn run_case(name: &str, config: &SuiteConfig) -> Result<CaseResult, AutodiffError> {
    let is_composite = COMPOSITES.contains(&name);
    if !is_composite && !PRIMITIVES.contains(&name) {
        return Err(AutodiffError::InvalidArgument {
            op: "gradient_suite",
            message: format!("unknown case {name}"),
        });
    }
    let mut seed_rng = ChaCha8Rng::seed_from_u64(config.seed);
    let case_seed: u64 = name
        .bytes()
        .fold(seed_rng.random(), |h, b| h.rotate_left(5) ^ b as u64);
    let mut rng = ChaCha8Rng::seed_from_u64(case_seed);
    let mut worst: f64 = 0.0;
    let (mut coordinates, mut excluded) = (0, 0);
    for _ in 0..config.draws {
        let draw = if name == "custom_fk" || is_composite {
            composite(name, &mut rng, config.coords_per_param)
        } else {
            primitive(name, &mut rng)
        };
        let options = GradCheckOptions {
            step: config.step,
            max_coords: draw.max_coords,
            kink_tolerance: is_composite.then_some(KINK_TOLERANCE),
        };
        let check = check_gradient_with(&draw.loss, &draw.inputs, &options, &mut rng)?;
        worst = worst.max(check.rel_error);
        coordinates += check.coordinates;
        excluded += check.excluded;
    }
    let tolerance = if is_composite {
        COMPOSITE_TOLERANCE
    } else {
        PRIMITIVE_TOLERANCE
    };
    Ok(CaseResult {
        name: name.to_string(),
        draws: config.draws,
        max_rel_error: worst,
        tolerance,
        coordinates,
        excluded,
    })
}

/// Every primitive then every composite case.
pub fn run_gradient_suite(config: &SuiteConfig) -> Result<Vec<CaseResult>, AutodiffError> {
    PRIMITIVES
        .iter()
        .chain(COMPOSITES.iter())
        .map(|name| run_case(name, config))
        .collect()
}
