use crate::autodiff::{Tape, Tensor, Var};
use crate::kinematics::{fk_differentiable, RootMode};
use crate::net::{BoundParams, Domain, NetError, RetargetModel};

use super::LossWeights;

/// Scalar loss terms; each is already multiplied by its weight.
#[derive(Debug, Clone, Copy)]
pub struct GeneratorTerms {
    pub total: Var,
    pub adv: Var,
    pub cycle: Var,
    pub fk: Var,
    pub latent: Var,
}

/// `mean((s − 1)²)`.
pub fn lsgan_real(tape: &mut Tape, scores: Var) -> Var {
    let d = tape.add_scalar(scores, -1.0);
    let sq = tape.square(d);
    tape.mean(sq)
}

/// `mean(s²)`.
pub fn lsgan_fake(tape: &mut Tape, scores: Var) -> Var {
    let sq = tape.square(scores);
    tape.mean(sq)
}

/// LSGAN critic loss on raw windows; `fake` should be a constant.
pub fn discriminator_loss(
    model: &RetargetModel,
    tape: &mut Tape,
    bound: &BoundParams,
    domain: Domain,
    real: Var,
    fake: Var,
) -> Result<Var, NetError> {
    let real_n = model.normalize_var(tape, domain, real)?;
    let fake_n = model.normalize_var(tape, domain, fake)?;
    let sr = model.discriminate_var(tape, bound, domain, real_n)?;
    let sf = model.discriminate_var(tape, bound, domain, fake_n)?;
    let lr = lsgan_real(tape, sr);
    let lf = lsgan_fake(tape, sf);
    Ok(tape.add(lr, lf)?)
}

fn channel_constant(tape: &mut Tape, values: Vec<f64>, shape: &[usize]) -> Result<Var, NetError> {
    let n = values.len();
    let c = tape.constant(Tensor::new(vec![n, 1], values)?);
    Ok(tape.broadcast(c, shape)?)
}

/// Mean squared reconstruction error in normalized feature space. Each
/// quaternion is compared against whichever of `±q` is nearer.
pub fn cycle_error(
    model: &RetargetModel,
    tape: &mut Tape,
    domain: Domain,
    recon: Var,
    source: Var,
) -> Result<Var, NetError> {
    let dom = model.domain(domain);
    let shape = tape.shape(recon).to_vec();
    if tape.shape(source) != shape.as_slice() {
        return Err(NetError::WindowShape {
            expected: dom.width(),
            found: tape.shape(source).to_vec(),
        });
    }
    let (b, f, t) = (shape[0], shape[1], shape[2]);
    let rot = dom.layout.rotation_channels();
    let (vh, v) = (tape.value(recon).data(), tape.value(source).data());
    let mut signs = vec![1.0; b * f * t];
    for bi in 0..b {
        for a in 0..rot / 4 {
            for ti in 0..t {
                let at = |k: usize| (bi * f + 4 * a + k) * t + ti;
                let dot: f64 = (0..4).map(|k| vh[at(k)] * v[at(k)]).sum();
                if dot < 0.0 {
                    for k in 0..4 {
                        signs[at(k)] = -1.0;
                    }
                }
            }
        }
    }
    let s = tape.constant(Tensor::new(vec![b, f, t], signs)?);
    let aligned = tape.mul(source, s)?;
    let d = tape.sub(recon, aligned)?;
    let (_, scale) = dom.affine();
    let inv = channel_constant(tape, scale.iter().map(|s| 1.0 / s).collect(), &[b, f, t])?;
    let d = tape.mul(d, inv)?;
    let sq = tape.square(d);
    Ok(tape.mean(sq))
}

/// Mean squared distance between root-local joint positions, in skeleton
/// units.
pub fn fk_error(
    model: &RetargetModel,
    tape: &mut Tape,
    domain: Domain,
    recon: Var,
    source: Var,
) -> Result<Var, NetError> {
    let dom = model.domain(domain);
    let ph = fk_differentiable(
        tape,
        &dom.rig.skeleton,
        &dom.fk_layout,
        recon,
        RootMode::RootLocal,
    )?;
    let p = fk_differentiable(
        tape,
        &dom.rig.skeleton,
        &dom.fk_layout,
        source,
        RootMode::RootLocal,
    )?;
    let shape = tape.shape(ph).to_vec();
    let d = tape.sub(ph, p)?;
    let sq = tape.square(d);
    let s = tape.sum(sq);
    let count = (shape[0] * shape[1] * shape[3]) as f64;
    Ok(tape.scale(s, 1.0 / count))
}

fn mse(tape: &mut Tape, a: Var, b: Var) -> Result<Var, NetError> {
    let d = tape.sub(a, b)?;
    let sq = tape.square(d);
    Ok(tape.mean(sq))
}

/// Full generator objective on raw `[B, F, T]` batches of both domains.
pub fn generator_loss(
    model: &RetargetModel,
    tape: &mut Tape,
    bound: &BoundParams,
    weights: &LossWeights,
    human: Var,
    robot: Var,
) -> Result<GeneratorTerms, NetError> {
    let (h, r) = (Domain::Human, Domain::Robot);
    let hr = model.retarget_var(tape, bound, h, r, human)?;
    let rh = model.retarget_var(tape, bound, r, h, robot)?;
    let hrh = model.retarget_var(tape, bound, r, h, hr)?;
    let rhr = model.retarget_var(tape, bound, h, r, rh)?;

    let hr_n = model.normalize_var(tape, r, hr)?;
    let rh_n = model.normalize_var(tape, h, rh)?;
    let s_r = model.discriminate_var(tape, bound, r, hr_n)?;
    let s_h = model.discriminate_var(tape, bound, h, rh_n)?;
    let adv_r = lsgan_real(tape, s_r);
    let adv_h = lsgan_real(tape, s_h);
    let adv = tape.add(adv_r, adv_h)?;

    let cyc_h = cycle_error(model, tape, h, hrh, human)?;
    let cyc_r = cycle_error(model, tape, r, rhr, robot)?;
    let cycle = tape.add(cyc_h, cyc_r)?;

    let fk_h = fk_error(model, tape, h, hrh, human)?;
    let fk_r = fk_error(model, tape, r, rhr, robot)?;
    let fk = tape.add(fk_h, fk_r)?;

    let mut latent_terms = Vec::with_capacity(2);
    for (d, src, rec) in [(h, human, hrh), (r, robot, rhr)] {
        let src_n = model.normalize_var(tape, d, src)?;
        let rec_n = model.normalize_var(tape, d, rec)?;
        let z_src = model.encode_var(tape, bound, d, src_n)?;
        let z_rec = model.encode_var(tape, bound, d, rec_n)?;
        latent_terms.push(mse(tape, z_src, z_rec)?);
    }
    let latent = tape.add(latent_terms[0], latent_terms[1])?;

    let adv = tape.scale(adv, weights.adv);
    let cycle = tape.scale(cycle, weights.cycle);
    let fk = tape.scale(fk, weights.fk);
    let latent = tape.scale(latent, weights.latent);
    let t1 = tape.add(adv, cycle)?;
    let t2 = tape.add(fk, latent)?;
    let total = tape.add(t1, t2)?;
    Ok(GeneratorTerms {
        total,
        adv,
        cycle,
        fk,
        latent,
    })
}
