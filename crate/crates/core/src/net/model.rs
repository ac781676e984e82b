//! Skeleton-aware encoder/decoder pairs and discriminators for two domains
//! sharing a part-level latent space.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::layout::{DomainSpec, FeatureLayout};
use super::NetError;
use crate::autodiff::{Conv1dSpec, ConvGroup, PadMode, Tape, Tensor, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Domain {
    Human,
    Robot,
}

impl Domain {
    pub const BOTH: [Domain; 2] = [Domain::Human, Domain::Robot];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn other(self) -> Domain {
        match self {
            Domain::Human => Domain::Robot,
            Domain::Robot => Domain::Human,
        }
    }

    pub fn code(self) -> &'static str {
        match self {
            Domain::Human => "h",
            Domain::Robot => "r",
        }
    }

    pub fn from_code(code: &str) -> Option<Domain> {
        match code {
            "h" | "human" => Some(Domain::Human),
            "r" | "robot" => Some(Domain::Robot),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArchConfig {
    /// Latent channels per body part.
    pub latent_channels: usize,
    pub kernel: usize,
    /// Hidden channels per entity in the generator.
    pub hidden_channels: usize,
    pub disc_hidden: usize,
    pub disc_channels: usize,
    pub disc_kernel: usize,
    pub slope: f64,
    pub pad_mode: PadMode,
}

impl Default for ArchConfig {
    fn default() -> Self {
        Self {
            latent_channels: 16,
            kernel: 15,
            hidden_channels: 8,
            disc_hidden: 4,
            disc_channels: 32,
            disc_kernel: 3,
            slope: 0.2,
            pad_mode: PadMode::Reflect,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelKind {
    SkeletonAware,
    /// Encoders and decoders pass features through; for pipeline tests.
    Identity,
}

/// Convolution layouts of one domain, derived from its feature layout.
#[derive(Debug, Clone)]
struct Layers {
    enc1: Arc<Conv1dSpec>,
    pool: SkeletonPool,
    enc2: Arc<Conv1dSpec>,
    unpool: SkeletonPool,
    dec1: Arc<Conv1dSpec>,
    dec2: Arc<Conv1dSpec>,
    disc1: Arc<Conv1dSpec>,
    disc_pool: SkeletonPool,
    disc2: Arc<Conv1dSpec>,
    disc3: Arc<Conv1dSpec>,
}

fn blocks(first: usize, width: usize) -> Vec<usize> {
    (first..first + width).collect()
}

/// Fixed channel-mixing map between per-entity and per-part features,
/// applied as a kernel-1 convolution.
#[derive(Debug, Clone)]
pub struct SkeletonPool {
    spec: Arc<Conv1dSpec>,
    weights: Tensor,
}

impl SkeletonPool {
    fn mixing(
        rows: usize,
        cols: usize,
        entries: impl Iterator<Item = (usize, usize, f64)>,
    ) -> Result<Self, NetError> {
        let spec = Conv1dSpec::dense(cols, rows, 1, 1, 0, PadMode::Zero)?;
        let mut w = vec![0.0; rows * cols];
        for (r, c, v) in entries {
            w[r * cols + c] = v;
        }
        Ok(Self {
            spec: Arc::new(spec),
            weights: Tensor::vector(w),
        })
    }

    /// `[B, E·C, T] → [B, P·C, T]`: mean over the entities of each part.
    pub fn pool(layout: &FeatureLayout, channels: usize) -> Result<Self, NetError> {
        let ents = &layout.entities;
        let sizes: Vec<usize> = (0..layout.part_count)
            .map(|p| ents.iter().filter(|e| e.part == p).count())
            .collect();
        let entries = ents.iter().enumerate().flat_map(|(i, e)| {
            let share = 1.0 / sizes[e.part] as f64;
            (0..channels).map(move |c| (e.part * channels + c, i * channels + c, share))
        });
        Self::mixing(layout.part_count * channels, ents.len() * channels, entries)
    }

    /// `[B, P·C, T] → [B, E·C, T]`: copies each part's features to its
    /// entities.
    pub fn unpool(layout: &FeatureLayout, channels: usize) -> Result<Self, NetError> {
        let ents = &layout.entities;
        let entries = ents.iter().enumerate().flat_map(|(i, e)| {
            (0..channels).map(move |c| (i * channels + c, e.part * channels + c, 1.0))
        });
        Self::mixing(ents.len() * channels, layout.part_count * channels, entries)
    }

    pub fn apply_var(&self, tape: &mut Tape, x: Var) -> Result<Var, NetError> {
        let w = tape.constant(self.weights.clone());
        Ok(tape.grouped_conv1d(x, w, self.spec.clone())?)
    }

    pub fn apply(&self, x: &Tensor) -> Result<Tensor, NetError> {
        let mut tape = Tape::new();
        let v = tape.constant(x.clone());
        let y = self.apply_var(&mut tape, v)?;
        Ok(tape.value(y).clone())
    }
}

impl Layers {
    fn new(domain: &DomainSpec, arch: &ArchConfig) -> Result<Self, NetError> {
        let ents = &domain.layout.entities;
        let parts = domain.layout.part_count;
        let (h, l, k) = (arch.hidden_channels, arch.latent_channels, arch.kernel);
        let (hd, kd) = (arch.disc_hidden, arch.disc_kernel);
        let e = ents.len();
        let width = domain.width();
        let members: Vec<Vec<usize>> = (0..parts)
            .map(|p| (0..e).filter(|&i| ents[i].part == p).collect())
            .collect();
        if let Some(p) = members.iter().position(Vec::is_empty) {
            return Err(NetError::EmptyPart(p));
        }
        let feature_channels = |p: usize| -> Vec<usize> {
            members[p]
                .iter()
                .flat_map(|&i| blocks(ents[i].first_channel, ents[i].channels))
                .collect()
        };
        let entity_block = |p: usize, per: usize| -> Vec<usize> {
            members[p]
                .iter()
                .flat_map(|&i| blocks(i * per, per))
                .collect()
        };
        let conv = |cin,
                    cout,
                    kernel,
                    stride,
                    groups: Vec<ConvGroup>|
         -> Result<Arc<Conv1dSpec>, NetError> {
            Ok(Arc::new(Conv1dSpec::new(
                cin,
                cout,
                kernel,
                stride,
                kernel / 2,
                arch.pad_mode,
                groups,
            )?))
        };

        let enc1 = conv(
            width,
            e * h,
            k,
            1,
            (0..parts)
                .map(|p| ConvGroup {
                    inputs: feature_channels(p),
                    outputs: entity_block(p, h),
                })
                .collect(),
        )?;
        let pool = SkeletonPool::pool(&domain.layout, h)?;
        let enc2 = conv(
            parts * h,
            parts * l,
            k,
            2,
            (0..parts)
                .map(|p| ConvGroup {
                    inputs: blocks(p * h, h),
                    outputs: blocks(p * l, l),
                })
                .collect(),
        )?;

        let unpool = SkeletonPool::unpool(&domain.layout, l)?;
        let dec1 = conv(
            e * l,
            e * h,
            k,
            1,
            (0..e)
                .map(|i| ConvGroup {
                    inputs: blocks(i * l, l),
                    outputs: blocks(i * h, h),
                })
                .collect(),
        )?;
        let dec2 = conv(
            e * h,
            width,
            k,
            1,
            (0..parts)
                .map(|p| ConvGroup {
                    inputs: entity_block(p, h),
                    outputs: feature_channels(p),
                })
                .collect(),
        )?;

        let disc1 = conv(
            width,
            e * hd,
            kd,
            2,
            (0..parts)
                .map(|p| ConvGroup {
                    inputs: feature_channels(p),
                    outputs: entity_block(p, hd),
                })
                .collect(),
        )?;
        let disc_pool = SkeletonPool::pool(&domain.layout, hd)?;
        let disc2 = conv(
            parts * hd,
            parts * 2 * hd,
            kd,
            2,
            (0..parts)
                .map(|p| ConvGroup {
                    inputs: blocks(p * hd, hd),
                    outputs: blocks(p * 2 * hd, 2 * hd),
                })
                .collect(),
        )?;
        let disc3 = conv(
            parts * 2 * hd,
            arch.disc_channels,
            kd,
            2,
            vec![ConvGroup {
                inputs: (0..parts * 2 * hd).collect(),
                outputs: (0..arch.disc_channels).collect(),
            }],
        )?;
        Ok(Self {
            enc1,
            pool,
            enc2,
            unpool,
            dec1,
            dec2,
            disc1,
            disc_pool,
            disc2,
            disc3,
        })
    }

    /// Trainable convolutions in parameter order, with whether the layer
    /// feeds a leaky ReLU.
    fn trainable(&self) -> [(&'static str, &Arc<Conv1dSpec>, bool); 7] {
        [
            ("enc1", &self.enc1, true),
            ("enc2", &self.enc2, true),
            ("dec1", &self.dec1, true),
            ("dec2", &self.dec2, false),
            ("disc1", &self.disc1, true),
            ("disc2", &self.disc2, true),
            ("disc3", &self.disc3, true),
        ]
    }
}

/// Expected parameter names and shapes for a pair of domains.
fn param_shapes(layers: &[Layers; 2], arch: &ArchConfig) -> Vec<(String, Vec<usize>)> {
    let mut out = Vec::new();
    for d in Domain::BOTH {
        let ly = &layers[d.index()];
        for (name, spec, _) in ly.trainable() {
            out.push((format!("{}.{name}.w", d.code()), vec![spec.weight_len()]));
            out.push((format!("{}.{name}.b", d.code()), vec![spec.out_channels, 1]));
        }
        out.push((format!("{}.head.w", d.code()), vec![arch.disc_channels, 1]));
        out.push((format!("{}.head.b", d.code()), vec![1, 1]));
    }
    out
}

/// Parameters bound onto one tape, by model parameter index.
#[derive(Debug, Clone)]
pub struct BoundParams {
    pub vars: Vec<Var>,
}

#[derive(Debug, Clone)]
pub struct RetargetModel {
    pub kind: ModelKind,
    pub arch: ArchConfig,
    domains: [DomainSpec; 2],
    names: Vec<String>,
    params: Vec<Tensor>,
    index: BTreeMap<String, usize>,
    layers: Option<[Layers; 2]>,
}

impl RetargetModel {
    /// Randomly initialized skeleton-aware model.
    pub fn new(
        arch: ArchConfig,
        human: DomainSpec,
        robot: DomainSpec,
        seed: u64,
    ) -> Result<Self, NetError> {
        let mut model = Self::with_zero_params(ModelKind::SkeletonAware, arch, human, robot)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = model.layers.clone().expect("skeleton-aware");
        for d in Domain::BOTH {
            for (name, spec, leaky) in layers[d.index()].trainable() {
                let gain = if leaky {
                    6.0 / (1.0 + arch.slope * arch.slope)
                } else {
                    3.0
                };
                let w = &mut model.params[model.index[&format!("{}.{name}.w", d.code())]];
                for (g, group) in spec.groups.iter().enumerate() {
                    let fan_in = (group.inputs.len() * spec.kernel).max(1) as f64;
                    let bound = (gain / fan_in).sqrt();
                    for v in &mut w.data_mut()[spec.group_weights(g)] {
                        *v = rng.random_range(-bound..bound);
                    }
                }
            }
            let head = &mut model.params[model.index[&format!("{}.head.w", d.code())]];
            let bound = (3.0 / arch.disc_channels as f64).sqrt();
            for v in head.data_mut() {
                *v = rng.random_range(-bound..bound);
            }
        }
        Ok(model)
    }

    /// Same architecture with every parameter zero.
    pub fn with_zero_params(
        kind: ModelKind,
        arch: ArchConfig,
        human: DomainSpec,
        robot: DomainSpec,
    ) -> Result<Self, NetError> {
        if human.layout.part_count != robot.layout.part_count {
            return Err(NetError::PartCountMismatch {
                human: human.layout.part_count,
                robot: robot.layout.part_count,
            });
        }
        let (layers, shapes) = match kind {
            ModelKind::SkeletonAware => {
                let layers = [Layers::new(&human, &arch)?, Layers::new(&robot, &arch)?];
                let shapes = param_shapes(&layers, &arch);
                (Some(layers), shapes)
            }
            ModelKind::Identity => (None, Vec::new()),
        };
        let names: Vec<String> = shapes.iter().map(|(n, _)| n.clone()).collect();
        let params = shapes.iter().map(|(_, s)| Tensor::zeros(s)).collect();
        let index = names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), i))
            .collect();
        Ok(Self {
            kind,
            arch,
            domains: [human, robot],
            names,
            params,
            index,
            layers,
        })
    }

    /// Pass-through test double; both domains must have the same width.
    pub fn identity(human: DomainSpec, robot: DomainSpec) -> Result<Self, NetError> {
        if human.width() != robot.width() {
            return Err(NetError::LayoutMismatch {
                expected: human.width(),
                found: robot.width(),
            });
        }
        Self::with_zero_params(ModelKind::Identity, ArchConfig::default(), human, robot)
    }

    pub fn domain(&self, d: Domain) -> &DomainSpec {
        &self.domains[d.index()]
    }

    pub fn param_names(&self) -> &[String] {
        &self.names
    }

    pub fn params(&self) -> &[Tensor] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Tensor] {
        &mut self.params
    }

    pub fn param_index(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn expected_shapes(&self) -> Vec<(String, Vec<usize>)> {
        self.names
            .iter()
            .cloned()
            .zip(self.params.iter().map(|p| p.shape().to_vec()))
            .collect()
    }

    pub fn latent_width(&self) -> usize {
        self.domains[0].layout.part_count * self.arch.latent_channels
    }

    /// Indices of encoder and decoder parameters of both domains.
    pub fn generator_params(&self) -> Vec<usize> {
        (0..self.names.len())
            .filter(|&i| !is_disc(&self.names[i]))
            .collect()
    }

    pub fn discriminator_params(&self, d: Domain) -> Vec<usize> {
        let prefix = format!("{}.", d.code());
        (0..self.names.len())
            .filter(|&i| is_disc(&self.names[i]) && self.names[i].starts_with(&prefix))
            .collect()
    }

    /// Puts every parameter on `tape`; those in `trainable` as leaves.
    pub fn bind(&self, tape: &mut Tape, trainable: &[usize]) -> BoundParams {
        let mut train = vec![false; self.params.len()];
        for &i in trainable {
            train[i] = true;
        }
        let vars = self
            .params
            .iter()
            .zip(train)
            .map(|(p, t)| {
                if t {
                    tape.leaf(p.clone())
                } else {
                    tape.constant(p.clone())
                }
            })
            .collect();
        BoundParams { vars }
    }

    fn p(&self, bound: &BoundParams, d: Domain, name: &str) -> Var {
        bound.vars[self.index[&format!("{}.{name}", d.code())]]
    }

    fn layers(&self, d: Domain) -> &Layers {
        &self.layers.as_ref().expect("skeleton-aware model")[d.index()]
    }

    fn conv(
        &self,
        tape: &mut Tape,
        bound: &BoundParams,
        d: Domain,
        name: &str,
        spec: &Arc<Conv1dSpec>,
        x: Var,
    ) -> Result<Var, NetError> {
        let w = self.p(bound, d, &format!("{name}.w"));
        let b = self.p(bound, d, &format!("{name}.b"));
        let y = tape.grouped_conv1d(x, w, spec.clone())?;
        let shape = tape.shape(y).to_vec();
        let bb = tape.broadcast(b, &shape)?;
        Ok(tape.add(y, bb)?)
    }

    fn check_window(&self, tape: &Tape, d: Domain, x: Var) -> Result<(usize, usize), NetError> {
        let shape = tape.shape(x);
        match shape {
            [b, f, t] if *f == self.domain(d).width() && *t >= 8 && t % 2 == 0 => Ok((*b, *t)),
            _ => Err(NetError::WindowShape {
                expected: self.domain(d).width(),
                found: shape.to_vec(),
            }),
        }
    }

    /// Normalized `[B, F, T]` window to `[B, P·L, T/2]` latent.
    pub fn encode_var(
        &self,
        tape: &mut Tape,
        bound: &BoundParams,
        d: Domain,
        x: Var,
    ) -> Result<Var, NetError> {
        self.check_window(tape, d, x)?;
        if self.kind == ModelKind::Identity {
            return Ok(x);
        }
        let ly = self.layers(d);
        let slope = self.arch.slope;
        let h = self.conv(tape, bound, d, "enc1", &ly.enc1, x)?;
        let h = tape.leaky_relu(h, slope);
        let h = ly.pool.apply_var(tape, h)?;
        let z = self.conv(tape, bound, d, "enc2", &ly.enc2, h)?;
        Ok(tape.leaky_relu(z, slope))
    }

    /// Latent to a raw `[B, F, T]` window: denormalized, unit quaternions.
    pub fn decode_var(
        &self,
        tape: &mut Tape,
        bound: &BoundParams,
        d: Domain,
        z: Var,
    ) -> Result<Var, NetError> {
        let out = if self.kind == ModelKind::Identity {
            let shape = tape.shape(z);
            if shape.len() != 3 || shape[1] != self.domain(d).width() {
                return Err(NetError::WindowShape {
                    expected: self.domain(d).width(),
                    found: shape.to_vec(),
                });
            }
            z
        } else {
            let shape = tape.shape(z);
            if shape.len() != 3 || shape[1] != self.latent_width() {
                return Err(NetError::WindowShape {
                    expected: self.latent_width(),
                    found: shape.to_vec(),
                });
            }
            let ly = self.layers(d);
            let slope = self.arch.slope;
            let u = ly.unpool.apply_var(tape, z)?;
            let h = self.conv(tape, bound, d, "dec1", &ly.dec1, u)?;
            let h = tape.leaky_relu(h, slope);
            let h = tape.upsample1d(h, 2)?;
            self.conv(tape, bound, d, "dec2", &ly.dec2, h)?
        };
        self.denormalize_var(tape, d, out)
    }

    fn channel_constant(
        tape: &mut Tape,
        values: Vec<f64>,
        shape: &[usize],
    ) -> Result<Var, NetError> {
        let n = values.len();
        let c = tape.constant(Tensor::new(vec![n, 1], values)?);
        Ok(tape.broadcast(c, shape)?)
    }

    /// `(x − offset) / scale` per channel.
    pub fn normalize_var(&self, tape: &mut Tape, d: Domain, x: Var) -> Result<Var, NetError> {
        let (offset, scale) = self.domain(d).affine();
        let shape = tape.shape(x).to_vec();
        let o = Self::channel_constant(tape, offset, &shape)?;
        let s = Self::channel_constant(tape, scale.iter().map(|s| 1.0 / s).collect(), &shape)?;
        let centered = tape.sub(x, o)?;
        Ok(tape.mul(centered, s)?)
    }

    fn denormalize_var(&self, tape: &mut Tape, d: Domain, z: Var) -> Result<Var, NetError> {
        let dom = self.domain(d);
        let (offset, scale) = dom.affine();
        let shape = tape.shape(z).to_vec();
        let s = Self::channel_constant(tape, scale, &shape)?;
        let o = Self::channel_constant(tape, offset, &shape)?;
        let scaled = tape.mul(z, s)?;
        let raw = tape.add(scaled, o)?;
        let rot = dom.layout.rotation_channels();
        if rot == 0 {
            return Ok(raw);
        }
        let (b, t) = (shape[0], shape[2]);
        let q = tape.slice(raw, 1, 0, rot)?;
        let q = tape.reshape(q, &[b, rot / 4, 4, t])?;
        let q = tape.normalize_l2(q, 2)?;
        let q = tape.reshape(q, &[b, rot, t])?;
        let tr = tape.slice(raw, 1, rot, dom.width())?;
        Ok(tape.concat(&[q, tr], 1)?)
    }

    /// Realness score per batch element, `[B]`, from a normalized window.
    pub fn discriminate_var(
        &self,
        tape: &mut Tape,
        bound: &BoundParams,
        d: Domain,
        x: Var,
    ) -> Result<Var, NetError> {
        let (b, _) = self.check_window(tape, d, x)?;
        if self.kind == ModelKind::Identity {
            return Ok(tape.constant(Tensor::zeros(&[b])));
        }
        let ly = self.layers(d);
        let slope = self.arch.slope;
        let h = self.conv(tape, bound, d, "disc1", &ly.disc1, x)?;
        let h = tape.leaky_relu(h, slope);
        let h = ly.disc_pool.apply_var(tape, h)?;
        let h = self.conv(tape, bound, d, "disc2", &ly.disc2, h)?;
        let h = tape.leaky_relu(h, slope);
        let h = self.conv(tape, bound, d, "disc3", &ly.disc3, h)?;
        let h = tape.leaky_relu(h, slope);
        let pooled = tape.mean_axis(h, 2)?;
        let w = self.p(bound, d, "head.w");
        let hb = self.p(bound, d, "head.b");
        let s = tape.matmul(pooled, w)?;
        let hb = tape.broadcast(hb, &[b, 1])?;
        let s = tape.add(s, hb)?;
        Ok(tape.reshape(s, &[b])?)
    }

    /// Raw window in `from` to raw window in `to` on a tape.
    pub fn retarget_var(
        &self,
        tape: &mut Tape,
        bound: &BoundParams,
        from: Domain,
        to: Domain,
        raw: Var,
    ) -> Result<Var, NetError> {
        let x = self.normalize_var(tape, from, raw)?;
        let z = self.encode_var(tape, bound, from, x)?;
        self.decode_var(tape, bound, to, z)
    }

    fn run<T>(
        &self,
        input: &Tensor,
        f: impl FnOnce(&Self, &mut Tape, &BoundParams, Var) -> Result<Var, NetError>,
        post: impl FnOnce(&Tensor, bool) -> Result<T, NetError>,
    ) -> Result<T, NetError> {
        let mut tape = Tape::new();
        let bound = self.bind(&mut tape, &[]);
        let batched = input.shape().len() == 3;
        let x = if batched {
            tape.constant(input.clone())
        } else {
            let s = input.shape();
            if s.len() != 2 {
                return Err(NetError::WindowShape {
                    expected: 0,
                    found: s.to_vec(),
                });
            }
            tape.constant(input.clone().reshaped(&[1, s[0], s[1]])?)
        };
        let y = f(self, &mut tape, &bound, x)?;
        post(tape.value(y), batched)
    }

    fn unbatch(t: &Tensor, batched: bool) -> Result<Tensor, NetError> {
        if batched {
            Ok(t.clone())
        } else {
            Ok(t.clone().reshaped(&t.shape()[1..])?)
        }
    }

    pub fn encode(&self, d: Domain, window: &Tensor) -> Result<Tensor, NetError> {
        self.run(window, |m, t, b, x| m.encode_var(t, b, d, x), Self::unbatch)
    }

    pub fn decode(&self, d: Domain, latent: &Tensor) -> Result<Tensor, NetError> {
        self.run(latent, |m, t, b, x| m.decode_var(t, b, d, x), Self::unbatch)
    }

    /// `decode(to, encode(from, normalize(window)))` on a raw window.
    pub fn retarget_window(
        &self,
        from: Domain,
        to: Domain,
        window: &Tensor,
    ) -> Result<Tensor, NetError> {
        self.run(
            window,
            |m, t, b, x| m.retarget_var(t, b, from, to, x),
            Self::unbatch,
        )
    }

    /// Home → other → home.
    pub fn cycle_window(&self, home: Domain, window: &Tensor) -> Result<Tensor, NetError> {
        self.run(
            window,
            |m, t, b, x| {
                let y = m.retarget_var(t, b, home, home.other(), x)?;
                m.retarget_var(t, b, home.other(), home, y)
            },
            Self::unbatch,
        )
    }

    /// Score of one normalized `[F, T]` window.
    pub fn discriminate(&self, d: Domain, window: &Tensor) -> Result<f64, NetError> {
        self.run(
            window,
            |m, t, b, x| m.discriminate_var(t, b, d, x),
            |s, _| Ok(s.data()[0]),
        )
    }

    pub(crate) fn replace_params(&mut self, params: Vec<Tensor>) {
        self.params = params;
    }
}

fn is_disc(name: &str) -> bool {
    name.contains(".disc") || name.contains(".head")
}
