//! Central finite-difference gradient checking.
//!
//! The relative error of an analytic gradient `a` against the numeric
//! estimate `n` is `‖a − n‖₂ / max(‖a‖₂, ‖n‖₂, 1e-6)`.

use rand::seq::index::sample;
use rand::Rng;

use super::{Result, Tape, Tensor, Var};

pub const DEFAULT_STEP: f64 = 1e-5;

pub fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = analytic.iter().zip(numeric).map(|(a, n)| a - n).collect();
    norm(&diff) / norm(analytic).max(norm(numeric)).max(1e-6)
}

/// Outcome of one check.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheck {
    pub rel_error: f64,
    pub coordinates: usize,
    /// Coordinates dropped because a non-differentiable point lay within
    /// the difference step.
    pub excluded: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckOptions {
    pub step: f64,
    /// Coordinates sampled per input; all when `None`.
    pub max_coords: Option<usize>,
    /// When set, a coordinate whose central differences at `step` and
    /// `step / 2` disagree by more than this (relative to `max(1, |d|)`)
    /// straddles a kink and is excluded. Smooth functions disagree only by
    /// the `O(step²)` truncation error.
    pub kink_tolerance: Option<f64>,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self {
            step: DEFAULT_STEP,
            max_coords: None,
            kink_tolerance: None,
        }
    }
}

/// Compares `backward` against central differences for a scalar function
/// of `inputs`. `f` must build the loss on the supplied tape from the given
/// input handles. When `max_coords` is set, that many coordinates per input
/// are sampled with `rng`; otherwise all are checked.
pub fn check_gradient<F, R>(
    f: F,
    inputs: &[Tensor],
    h: f64,
    max_coords: Option<usize>,
    rng: &mut R,
) -> Result<GradCheck>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
    R: Rng,
{
    check_gradient_with(
        f,
        inputs,
        &GradCheckOptions {
            step: h,
            max_coords,
            kink_tolerance: None,
        },
        rng,
    )
}

pub fn check_gradient_with<F, R>(
    f: F,
    inputs: &[Tensor],
    options: &GradCheckOptions,
    rng: &mut R,
) -> Result<GradCheck>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
    R: Rng,
{
    let h = options.step;
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.leaf(t.clone())).collect();
    let loss = f(&mut tape, &vars)?;
    tape.backward(loss)?;

    let eval = |values: &[Tensor]| -> Result<f64> {
        let mut t = Tape::new();
        let vs: Vec<Var> = values.iter().map(|v| t.constant(v.clone())).collect();
        let l = f(&mut t, &vs)?;
        Ok(t.value(l).item())
    };

    let mut analytic = Vec::new();
    let mut numeric = Vec::new();
    let mut excluded = 0;
    let mut work: Vec<Tensor> = inputs.to_vec();
    for (i, input) in inputs.iter().enumerate() {
        let grad = tape
            .grad(vars[i])
            .map(|g| g.data().to_vec())
            .unwrap_or_else(|| vec![0.0; input.numel()]);
        let coords: Vec<usize> = match options.max_coords {
            Some(k) if k < input.numel() => sample(rng, input.numel(), k).into_vec(),
            _ => (0..input.numel()).collect(),
        };
        for c in coords {
            let orig = input.data()[c];
            let mut central = |step: f64| -> Result<f64> {
                work[i].data_mut()[c] = orig + step;
                let plus = eval(&work)?;
                work[i].data_mut()[c] = orig - step;
                let minus = eval(&work)?;
                work[i].data_mut()[c] = orig;
                Ok((plus - minus) / (2.0 * step))
            };
            let d = central(h)?;
            if let Some(tol) = options.kink_tolerance {
                let half = central(h / 2.0)?;
                if (d - half).abs() > tol * d.abs().max(1.0) {
                    excluded += 1;
                    continue;
                }
            }
            analytic.push(grad[c]);
            numeric.push(d);
        }
    }
    Ok(GradCheck {
        rel_error: relative_error(&analytic, &numeric),
        coordinates: analytic.len(),
        excluded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn kink_straddling_coordinate_is_excluded() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        // |x| at x = 3e-6: the step crosses the kink at 0.
        let x = Tensor::vector(vec![3e-6, 0.5]);
        let f = |t: &mut Tape, v: &[Var]| {
            let y = t.leaky_relu(v[0], -1.0);
            Ok(t.sum(y))
        };
        let plain = check_gradient(f, &[x.clone()], DEFAULT_STEP, None, &mut rng).unwrap();
        assert!(plain.rel_error > 0.1);
        let opts = GradCheckOptions {
            kink_tolerance: Some(1e-6),
            ..Default::default()
        };
        let aware = check_gradient_with(f, &[x], &opts, &mut rng).unwrap();
        assert_eq!((aware.excluded, aware.coordinates), (1, 1));
        assert!(aware.rel_error < 1e-8);
    }

    #[test]
    fn smooth_function_excludes_nothing() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = Tensor::vector(vec![0.3, -1.2, 2.0]);
        let opts = GradCheckOptions {
            kink_tolerance: Some(1e-6),
            ..Default::default()
        };
        let r = check_gradient_with(
            |t, v| {
                let y = t.tanh(v[0]);
                let s = t.square(y);
                Ok(t.sum(s))
            },
            &[x],
            &opts,
            &mut rng,
        )
        .unwrap();
        assert_eq!(r.excluded, 0);
        assert!(r.rel_error < 1e-8);
    }
}
