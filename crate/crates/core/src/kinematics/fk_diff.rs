//! Forward kinematics as a tape operation.

use std::sync::Arc;

use super::fk::{fk_frame, RootMode};
use super::rotation::{mat_mul, mat_transpose, Mat3, Quaternion};
use super::KinematicsError;
use crate::autodiff::{AutodiffError, CustomOp, Tape, Tensor, Var};
use crate::skeleton::{JointKind, Skeleton};

/// Where each joint's quaternion lives in a pose feature vector.
#[derive(Debug, Clone, PartialEq)]
pub struct FkLayout {
    pub rows: usize,
    /// First of four rows `(w, x, y, z)`, for joints that rotate.
    pub rotation_rows: Vec<Option<usize>>,
    pub translation_row: usize,
}

impl FkLayout {
    /// `4·J + 3` rows: every joint's quaternion, then root translation.
    /// Rows of non-actuated joints are present but unused.
    pub fn full(skeleton: &Skeleton) -> Self {
        let j = skeleton.len();
        let rotation_rows = skeleton
            .joints()
            .iter()
            .enumerate()
            .map(|(i, jt)| (jt.kind == JointKind::Actuated).then_some(4 * i))
            .collect();
        Self {
            rows: 4 * j + 3,
            rotation_rows,
            translation_row: 4 * j,
        }
    }

    /// `4·A + 3` rows: quaternions of the `A` actuated joints in joint
    /// order, then root translation.
    pub fn actuated(skeleton: &Skeleton) -> Self {
        let mut next = 0;
        let rotation_rows = skeleton
            .joints()
            .iter()
            .map(|jt| {
                (jt.kind == JointKind::Actuated).then(|| {
                    next += 4;
                    next - 4
                })
            })
            .collect();
        Self {
            rows: next + 3,
            rotation_rows,
            translation_row: next,
        }
    }
}

pub struct FkOp {
    skeleton: Skeleton,
    layout: FkLayout,
    mode: RootMode,
    batch: usize,
    frames: usize,
}

impl FkOp {
    fn quat(&self, x: &[f64], b: usize, t: usize, row: usize) -> Quaternion {
        let at = |r: usize| x[(b * self.layout.rows + row + r) * self.frames + t];
        Quaternion::new(at(0), at(1), at(2), at(3))
    }

    fn frame(
        &self,
        x: &[f64],
        b: usize,
        t: usize,
    ) -> (Vec<[f64; 3]>, Vec<Mat3>, Vec<Option<Mat3>>) {
        let locals: Vec<Option<Mat3>> = self
            .layout
            .rotation_rows
            .iter()
            .map(|r| r.map(|row| self.quat(x, b, t, row).to_matrix()))
            .collect();
        let translation = match self.mode {
            RootMode::Global => {
                let tr = self.layout.translation_row;
                let at = |k: usize| x[(b * self.layout.rows + tr + k) * self.frames + t];
                [at(0), at(1), at(2)]
            }
            RootMode::RootLocal => [0.0; 3],
        };
        let (p, g) = fk_frame(&self.skeleton, |j| locals[j], translation);
        (p, g, locals)
    }
}

/// d(R(q))/dq contracted with `g`, for the polynomial rotation matrix.
fn quat_matrix_vjp(q: Quaternion, g: &Mat3) -> [f64; 4] {
    let Quaternion { w, x, y, z } = q;
    let dw = [
        [0.0, -2.0 * z, 2.0 * y],
        [2.0 * z, 0.0, -2.0 * x],
        [-2.0 * y, 2.0 * x, 0.0],
    ];
    let dx = [
        [0.0, 2.0 * y, 2.0 * z],
        [2.0 * y, -4.0 * x, -2.0 * w],
        [2.0 * z, 2.0 * w, -4.0 * x],
    ];
    let dy = [
        [-4.0 * y, 2.0 * x, 2.0 * w],
        [2.0 * x, 0.0, 2.0 * z],
        [-2.0 * w, 2.0 * z, -4.0 * y],
    ];
    let dz = [
        [-4.0 * z, -2.0 * w, 2.0 * x],
        [2.0 * w, -4.0 * z, 2.0 * y],
        [2.0 * x, 2.0 * y, 0.0],
    ];
    let contract = |d: &Mat3| {
        (0..3)
            .flat_map(|r| (0..3).map(move |c| (r, c)))
            .map(|(r, c)| d[r][c] * g[r][c])
            .sum()
    };
    [contract(&dw), contract(&dx), contract(&dy), contract(&dz)]
}

impl CustomOp for FkOp {
    fn name(&self) -> &'static str {
        "forward_kinematics"
    }

    fn backward(&self, inputs: &[&Tensor], _output: &Tensor, grad: &[f64]) -> Vec<Vec<f64>> {
        let x = inputs[0].data();
        let (nj, rows, frames) = (self.skeleton.len(), self.layout.rows, self.frames);
        let mut dx = vec![0.0; x.len()];
        for b in 0..self.batch {
            for t in 0..frames {
                let (_, global, locals) = self.frame(x, b, t);
                let mut gp: Vec<[f64; 3]> = (0..nj)
                    .map(|j| {
                        let at = |k: usize| grad[((b * nj + j) * 3 + k) * frames + t];
                        [at(0), at(1), at(2)]
                    })
                    .collect();
                let mut gg = vec![[[0.0; 3]; 3]; nj];
                let mut grot: Vec<Option<Mat3>> = vec![None; nj];
                for j in (0..nj).rev() {
                    let joint = self.skeleton.joint(j);
                    match joint.parent {
                        Some(a) => {
                            if let Some(r) = &locals[j] {
                                let via = mat_mul(&gg[j], &mat_transpose(r));
                                grot[j] = Some(mat_mul(&mat_transpose(&global[a]), &gg[j]));
                                add_into(&mut gg[a], &via);
                            } else {
                                let gj = gg[j];
                                add_into(&mut gg[a], &gj);
                            }
                            let gpj = gp[j];
                            for (r, row) in gg[a].iter_mut().enumerate() {
                                for (c, cell) in row.iter_mut().enumerate() {
                                    *cell += gpj[r] * joint.offset[c];
                                }
                            }
                            for k in 0..3 {
                                gp[a][k] += gpj[k];
                            }
                        }
                        None => {
                            if locals[j].is_some() {
                                grot[j] = Some(gg[j]);
                            }
                            if self.mode == RootMode::Global {
                                let tr = self.layout.translation_row;
                                for k in 0..3 {
                                    dx[(b * rows + tr + k) * frames + t] += gp[j][k];
                                }
                            }
                        }
                    }
                }
                for (j, g) in grot.iter().enumerate() {
                    if let (Some(g), Some(row)) = (g, self.layout.rotation_rows[j]) {
                        let dq = quat_matrix_vjp(self.quat(x, b, t, row), g);
                        for (k, v) in dq.iter().enumerate() {
                            dx[(b * rows + row + k) * frames + t] += v;
                        }
                    }
                }
            }
        }
        vec![dx]
    }
}

fn add_into(dst: &mut Mat3, src: &Mat3) {
    for r in 0..3 {
        for c in 0..3 {
            dst[r][c] += src[r][c];
        }
    }
}

/// Records forward kinematics on `tape`. `pose` is `[R]`, `[R, T]` or
/// `[B, R, T]` with `R = layout.rows`; the output is `[J, 3]`, `[J, 3, T]` or
/// `[B, J, 3, T]` respectively. Rotation rows of joints that do not rotate
/// receive exactly zero gradient.
pub fn fk_differentiable(
    tape: &mut Tape,
    skeleton: &Skeleton,
    layout: &FkLayout,
    pose: Var,
    mode: RootMode,
) -> Result<Var, KinematicsError> {
    let shape = tape.shape(pose).to_vec();
    let (batch, rows, frames) = match shape.as_slice() {
        [r] => (1, *r, 1),
        [r, t] => (1, *r, *t),
        [b, r, t] => (*b, *r, *t),
        _ => {
            return Err(AutodiffError::ShapeMismatch {
                op: "fk",
                left: shape,
                right: vec![layout.rows],
            }
            .into())
        }
    };
    if rows != layout.rows || layout.rotation_rows.len() != skeleton.len() {
        return Err(KinematicsError::LengthMismatch {
            expected: layout.rows,
            found: rows,
        });
    }
    let op = FkOp {
        skeleton: skeleton.clone(),
        layout: layout.clone(),
        mode,
        batch,
        frames,
    };
    let nj = skeleton.len();
    let x = tape.value(pose).data();
    let mut out = vec![0.0; batch * nj * 3 * frames];
    for b in 0..batch {
        for t in 0..frames {
            let (p, _, _) = op.frame(x, b, t);
            for (j, pj) in p.iter().enumerate() {
                for k in 0..3 {
                    out[((b * nj + j) * 3 + k) * frames + t] = pj[k];
                }
            }
        }
    }
    let out_shape = match shape.len() {
        1 => vec![nj, 3],
        2 => vec![nj, 3, frames],
        _ => vec![batch, nj, 3, frames],
    };
    let value = Tensor::new(out_shape, out)?;
    Ok(tape.custom(&[pose], value, Arc::new(op)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::gradcheck::{check_gradient, DEFAULT_STEP};
    use crate::kinematics::{forward_kinematics, Pose};
    use crate::skeleton::{ChannelKind, Joint};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn mixed_chain() -> Skeleton {
        let kinds = [
            JointKind::Fixed,
            JointKind::Actuated,
            JointKind::Fixed,
            JointKind::Actuated,
            JointKind::Actuated,
            JointKind::EndEffector,
        ];
        let offsets = [
            [0.0; 3],
            [0.0, 1.0, 0.0],
            [0.0, 0.8, 0.1],
            [0.5, 0.0, 0.0],
            [0.6, 0.0, 0.0],
            [0.6, 0.0, 0.0],
        ];
        let joints = kinds
            .iter()
            .zip(offsets)
            .enumerate()
            .map(|(i, (k, o))| Joint {
                name: format!("j{i}"),
                parent: i.checked_sub(1),
                offset: o,
                channels: vec![
                    ChannelKind::Xrotation,
                    ChannelKind::Yrotation,
                    ChannelKind::Zrotation,
                ],
                kind: *k,
                end_site: false,
            })
            .map(|mut j| {
                if j.kind == JointKind::EndEffector {
                    j.channels.clear();
                }
                j
            })
            .collect();
        Skeleton::new(joints).unwrap()
    }

    fn random_pose_tensor(rng: &mut ChaCha8Rng, rows: usize, frames: usize) -> Tensor {
        Tensor::new(
            vec![rows, frames],
            (0..rows * frames)
                .map(|_| rng.random_range(-1.0..1.0))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn forward_matches_plain_fk() {
        let sk = mixed_chain();
        let layout = FkLayout::full(&sk);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut pose = Pose::identity(sk.len());
        for q in &mut pose.rotations {
            *q =
                Quaternion::new(rng.random(), rng.random(), rng.random(), rng.random()).normalize();
        }
        pose.root_translation = [0.3, -0.2, 1.0];
        let mut flat = vec![0.0; layout.rows];
        for (j, q) in pose.rotations.iter().enumerate() {
            flat[4 * j..4 * j + 4].copy_from_slice(&q.to_array());
        }
        flat[layout.translation_row..].copy_from_slice(&pose.root_translation);
        for mode in [RootMode::Global, RootMode::RootLocal] {
            let mut tape = Tape::new();
            let x = tape.leaf(Tensor::vector(flat.clone()));
            let y = fk_differentiable(&mut tape, &sk, &layout, x, mode).unwrap();
            let plain = forward_kinematics(&sk, &pose, mode).unwrap();
            for (j, p) in plain.0.iter().enumerate() {
                for k in 0..3 {
                    assert!((tape.value(y).data()[j * 3 + k] - p[k]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn identity_pose_translation_gradient_counts_joints() {
        let sk = mixed_chain();
        let layout = FkLayout::full(&sk);
        let mut flat = vec![0.0; layout.rows];
        for j in 0..sk.len() {
            flat[4 * j] = 1.0;
        }
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::vector(flat));
        let y = fk_differentiable(&mut tape, &sk, &layout, x, RootMode::Global).unwrap();
        let s = tape.sum(y);
        tape.backward(s).unwrap();
        let g = tape.grad(x).unwrap().data();
        let j = sk.len() as f64;
        assert_eq!(&g[layout.translation_row..], &[j, j, j]);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let sk = mixed_chain();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for layout in [FkLayout::full(&sk), FkLayout::actuated(&sk)] {
            for mode in [RootMode::Global, RootMode::RootLocal] {
                let input = random_pose_tensor(&mut rng, layout.rows, 3);
                let weights = Tensor::new(
                    vec![sk.len(), 3, 3],
                    (0..sk.len() * 9)
                        .map(|_| rng.random_range(-1.0..1.0))
                        .collect(),
                )
                .unwrap();
                let (sk2, layout2) = (sk.clone(), layout.clone());
                let check = check_gradient(
                    move |tape, v| {
                        let y = fk_differentiable(tape, &sk2, &layout2, v[0], mode).map_err(
                            |e| match e {
                                KinematicsError::Autodiff(a) => a,
                                other => AutodiffError::InvalidArgument {
                                    op: "fk",
                                    message: other.to_string(),
                                },
                            },
                        )?;
                        let w = tape.constant(weights.clone());
                        let p = tape.mul(y, w)?;
                        Ok(tape.sum(p))
                    },
                    &[input],
                    DEFAULT_STEP,
                    None,
                    &mut rng,
                )
                .unwrap();
                assert!(check.rel_error < 1e-4, "{check:?}");
            }
        }
    }

    #[test]
    fn non_actuated_rotations_get_zero_gradient() {
        let sk = mixed_chain();
        let layout = FkLayout::full(&sk);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut tape = Tape::new();
        let x = tape.leaf(random_pose_tensor(&mut rng, layout.rows, 4));
        let y = fk_differentiable(&mut tape, &sk, &layout, x, RootMode::Global).unwrap();
        let sq = tape.square(y);
        let s = tape.sum(sq);
        tape.backward(s).unwrap();
        let g = tape.grad(x).unwrap().data();
        for (j, joint) in sk.joints().iter().enumerate() {
            if joint.kind != JointKind::Actuated {
                assert!(g[4 * j * 4..(4 * j + 4) * 4].iter().all(|v| *v == 0.0));
            }
        }
    }
}
