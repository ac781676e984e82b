//! Adversarial training with cycle, forward-kinematics and latent
//! consistency terms over unpaired corpora of the two domains.

mod config;
mod data;
mod losses;

pub use config::{LearningRates, LossWeights, TrainConfig, WindowConfig};
pub use data::{compute_norm_stats, make_windows, window_starts, DomainData, WindowIndex};
pub use losses::{
    cycle_error, discriminator_loss, fk_error, generator_loss, lsgan_fake, lsgan_real,
    GeneratorTerms,
};

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::autodiff::{adam_step, AdamConfig, AdamState, Tape, Tensor};
use crate::motion::MotionClip;
use crate::net::{
    save_checkpoint, ArchConfig, BoundParams, Domain, DomainSpec, FeatureLayout, NetError,
    RetargetModel,
};
use crate::skeleton::Rig;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("empty corpus: {0}")]
    EmptyCorpus(String),
    #[error("cannot write {path}: {message}")]
    DiskWrite { path: String, message: String },
    #[error(transparent)]
    Net(#[from] NetError),
}

pub const LOSS_HEADER: &str = "step,d_h,d_r,g_total,g_adv,g_cycle,g_fk,g_latent";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossRow {
    pub step: usize,
    pub d_h: f64,
    pub d_r: f64,
    pub g_total: f64,
    pub g_adv: f64,
    pub g_cycle: f64,
    pub g_fk: f64,
    pub g_latent: f64,
}

impl LossRow {
    pub fn csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.step,
            self.d_h,
            self.d_r,
            self.g_total,
            self.g_adv,
            self.g_cycle,
            self.g_fk,
            self.g_latent
        )
    }
}

/// Windowed corpora of both domains with frozen normalization statistics.
#[derive(Debug, Clone)]
pub struct DatasetView {
    pub human_spec: DomainSpec,
    pub robot_spec: DomainSpec,
    pub human: DomainData,
    pub robot: DomainData,
}

impl DatasetView {
    pub fn new(
        config: &TrainConfig,
        human_rig: &Rig,
        human_clips: &[MotionClip],
        robot_rig: &Rig,
        robot_clips: &[MotionClip],
    ) -> Result<Self, TrainError> {
        config.validate()?;
        let WindowConfig { length, stride } = config.window;
        let mut parts = Vec::with_capacity(2);
        for (name, rig, clips) in [
            ("human", human_rig, human_clips),
            ("robot", robot_rig, robot_clips),
        ] {
            let layout = FeatureLayout::new(rig);
            let data = DomainData::new(clips, &layout, length, stride);
            if data.windows.is_empty() {
                return Err(TrainError::EmptyCorpus(format!(
                    "{name} corpus has no {length}-frame window"
                )));
            }
            let stats = compute_norm_stats(clips, &layout, rig.height())?;
            parts.push((DomainSpec::new(rig.clone(), stats)?, data));
        }
        let (robot_spec, robot) = parts.pop().expect("two domains");
        let (human_spec, human) = parts.pop().expect("two domains");
        Ok(Self {
            human_spec,
            robot_spec,
            human,
            robot,
        })
    }

    pub fn data(&self, d: Domain) -> &DomainData {
        match d {
            Domain::Human => &self.human,
            Domain::Robot => &self.robot,
        }
    }

    pub fn steps_per_epoch(&self, batch: usize) -> usize {
        self.human
            .windows
            .len()
            .max(self.robot.windows.len())
            .div_ceil(batch)
    }
}

/// Freshly initialized model for `view`, seeded from the config.
pub fn initial_model(
    config: &TrainConfig,
    view: &DatasetView,
) -> Result<RetargetModel, TrainError> {
    let arch = ArchConfig {
        pad_mode: config.padding,
        ..ArchConfig::default()
    };
    Ok(RetargetModel::new(
        arch,
        view.human_spec.clone(),
        view.robot_spec.clone(),
        config.seed,
    )?)
}

/// Cycles through window ids, reshuffling each pass.
struct Sampler {
    order: Vec<usize>,
    pos: usize,
}

impl Sampler {
    fn new(n: usize) -> Self {
        Self {
            order: (0..n).collect(),
            pos: n,
        }
    }

    fn take(&mut self, k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
        (0..k)
            .map(|_| {
                if self.pos == self.order.len() {
                    self.order.shuffle(rng);
                    self.pos = 0;
                }
                self.pos += 1;
                self.order[self.pos - 1]
            })
            .collect()
    }
}

#[derive(Debug)]
pub struct TrainOutcome {
    pub model: RetargetModel,
    pub rows: Vec<LossRow>,
    pub checkpoints: Vec<PathBuf>,
    pub losses_csv: PathBuf,
}

impl TrainOutcome {
    pub fn final_checkpoint(&self) -> &Path {
        self.checkpoints
            .last()
            .expect("final checkpoint always written")
    }
}

fn disk(path: &Path) -> impl Fn(std::io::Error) -> TrainError + '_ {
    move |e| TrainError::DiskWrite {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

fn write_ckpt(model: &RetargetModel, path: PathBuf) -> Result<PathBuf, TrainError> {
    save_checkpoint(model, &path).map_err(|e| match e {
        NetError::Io(io) => disk(&path)(io),
        other => other.into(),
    })?;
    Ok(path)
}

/// Applies one Adam update to the parameters in `indices` using their
/// gradients on `tape`.
fn update(
    model: &mut RetargetModel,
    indices: &[usize],
    tape: &Tape,
    bound: &BoundParams,
    state: &mut AdamState,
    cfg: &AdamConfig,
) -> Result<(), TrainError> {
    let mut params: Vec<Tensor> = indices.iter().map(|&i| model.params()[i].clone()).collect();
    let grads: Vec<Tensor> = indices
        .iter()
        .zip(&params)
        .map(|(&i, p)| {
            tape.grad(bound.vars[i])
                .cloned()
                .unwrap_or_else(|| Tensor::zeros(p.shape()))
        })
        .collect();
    adam_step(&mut params, &grads, state, cfg).map_err(NetError::from)?;
    for (&i, p) in indices.iter().zip(params) {
        model.params_mut()[i] = p;
    }
    Ok(())
}

/// Number of optimizer steps `config` asks for on `view`.
pub fn total_steps(config: &TrainConfig, view: &DatasetView) -> usize {
    let by_epochs = config.epochs * view.steps_per_epoch(config.batch_size);
    config.max_steps.map_or(by_epochs, |m| m.min(by_epochs))
}

pub fn train(
    config: &TrainConfig,
    view: &DatasetView,
    out_dir: impl AsRef<Path>,
) -> Result<TrainOutcome, TrainError> {
    let model = initial_model(config, view)?;
    train_model(config, model, view, out_dir)
}

/// Runs the training loop from `model`, writing `losses.csv` and
/// `ckpt_<step>.nmrt` files into `out_dir`.
pub fn train_model(
    config: &TrainConfig,
    mut model: RetargetModel,
    view: &DatasetView,
    out_dir: impl AsRef<Path>,
) -> Result<TrainOutcome, TrainError> {
    config.validate()?;
    let out_dir = out_dir.as_ref();
    std::fs::create_dir_all(out_dir).map_err(disk(out_dir))?;
    let losses_csv = out_dir.join("losses.csv");
    let mut log = BufWriter::new(File::create(&losses_csv).map_err(disk(&losses_csv))?);
    writeln!(log, "{LOSS_HEADER}").map_err(disk(&losses_csv))?;

    let (h, r) = (Domain::Human, Domain::Robot);
    let t = config.window.length;
    let gen_idx = model.generator_params();
    let mut disc_idx = model.discriminator_params(h);
    disc_idx.extend(model.discriminator_params(r));
    let gen_params: Vec<Tensor> = gen_idx.iter().map(|&i| model.params()[i].clone()).collect();
    let disc_params: Vec<Tensor> = disc_idx
        .iter()
        .map(|&i| model.params()[i].clone())
        .collect();
    let mut gen_state = AdamState::for_params(&gen_params);
    let mut disc_state = AdamState::for_params(&disc_params);
    let gen_cfg = AdamConfig::with_lr(config.lr.generator);
    let disc_cfg = AdamConfig::with_lr(config.lr.discriminator);

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut samplers = [
        Sampler::new(view.human.windows.len()),
        Sampler::new(view.robot.windows.len()),
    ];
    let steps = total_steps(config, view);
    let mut rows = Vec::with_capacity(steps);
    let mut checkpoints = Vec::new();

    for step in 0..steps {
        let ids_h = samplers[0].take(config.batch_size, &mut rng);
        let ids_r = samplers[1].take(config.batch_size, &mut rng);
        let xh = view.human.batch(&ids_h, t);
        let xr = view.robot.batch(&ids_r, t);
        let fake_r = model.retarget_window(h, r, &xh)?;
        let fake_h = model.retarget_window(r, h, &xr)?;

        let mut tape = Tape::new();
        let bound = model.bind(&mut tape, &disc_idx);
        let (real_h, real_r) = (tape.constant(xh.clone()), tape.constant(xr.clone()));
        let (fh, fr) = (tape.constant(fake_h), tape.constant(fake_r));
        let d_h = discriminator_loss(&model, &mut tape, &bound, h, real_h, fh)?;
        let d_r = discriminator_loss(&model, &mut tape, &bound, r, real_r, fr)?;
        let (d_h_val, d_r_val) = (tape.value(d_h).item(), tape.value(d_r).item());
        if !disc_idx.is_empty() {
            let d_sum = tape.add(d_h, d_r).map_err(NetError::from)?;
            tape.backward(d_sum).map_err(NetError::from)?;
            update(
                &mut model,
                &disc_idx,
                &tape,
                &bound,
                &mut disc_state,
                &disc_cfg,
            )?;
        }

        let mut tape = Tape::new();
        let bound = model.bind(&mut tape, &gen_idx);
        let (vh, vr) = (tape.constant(xh), tape.constant(xr));
        let terms = generator_loss(&model, &mut tape, &bound, &config.weights, vh, vr)?;
        let item = |v| tape.value(v).item();
        let row = LossRow {
            step,
            d_h: d_h_val,
            d_r: d_r_val,
            g_total: item(terms.total),
            g_adv: item(terms.adv),
            g_cycle: item(terms.cycle),
            g_fk: item(terms.fk),
            g_latent: item(terms.latent),
        };
        if !gen_idx.is_empty() {
            tape.backward(terms.total).map_err(NetError::from)?;
            update(
                &mut model,
                &gen_idx,
                &tape,
                &bound,
                &mut gen_state,
                &gen_cfg,
            )?;
        }
        writeln!(log, "{}", row.csv()).map_err(disk(&losses_csv))?;
        if step % 100 == 0 {
            log::info!(
                "step {step}: d_h {:.5} d_r {:.5} g {:.5} cycle {:.5}",
                row.d_h,
                row.d_r,
                row.g_total,
                row.g_cycle
            );
        }
        rows.push(row);

        let done = step + 1;
        if config.checkpoint_interval > 0 && done % config.checkpoint_interval == 0 && done < steps
        {
            checkpoints.push(write_ckpt(
                &model,
                out_dir.join(format!("ckpt_{done}.nmrt")),
            )?);
        }
    }
    log.flush().map_err(disk(&losses_csv))?;
    checkpoints.push(write_ckpt(
        &model,
        out_dir.join(format!("ckpt_{steps}.nmrt")),
    )?);
    Ok(TrainOutcome {
        model,
        rows,
        checkpoints,
        losses_csv,
    })
}
