//! Temporal 1-D convolution with channel groups of arbitrary membership.
//!
//! Each group reads an arbitrary set of input channels and writes an
//! arbitrary set of output channels; its kernel occupies a contiguous slice
//! of the flat weight vector laid out as `[out, in, kernel]`. A plain dense
//! convolution is the single-group case.

use serde::{Deserialize, Serialize};

use super::{AutodiffError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum PadMode {
    #[default]
    Reflect,
    Zero,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvGroup {
    pub inputs: Vec<usize>,
    pub outputs: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Conv1dSpec {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
    pub pad_mode: PadMode,
    pub groups: Vec<ConvGroup>,
    offsets: Vec<usize>,
}

impl Conv1dSpec {
    pub fn new(
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
        pad_mode: PadMode,
        groups: Vec<ConvGroup>,
    ) -> Result<Self> {
        let bad = |message: String| AutodiffError::InvalidArgument {
            op: "conv1d",
            message,
        };
        if kernel == 0 || stride == 0 {
            return Err(bad("kernel and stride must be positive".into()));
        }
        let mut covered = vec![false; out_channels];
        let mut offsets = Vec::with_capacity(groups.len());
        let mut acc = 0;
        for g in &groups {
            if let Some(&c) = g.inputs.iter().find(|&&c| c >= in_channels) {
                return Err(bad(format!("group input channel {c} out of range")));
            }
            for &c in &g.outputs {
                if c >= out_channels || covered[c] {
                    return Err(bad(format!(
                        "output channel {c} out of range or in two groups"
                    )));
                }
                covered[c] = true;
            }
            offsets.push(acc);
            acc += g.inputs.len() * g.outputs.len() * kernel;
        }
        offsets.push(acc);
        Ok(Self {
            in_channels,
            out_channels,
            kernel,
            stride,
            padding,
            pad_mode,
            groups,
            offsets,
        })
    }

    pub fn dense(
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
        pad_mode: PadMode,
    ) -> Result<Self> {
        let group = ConvGroup {
            inputs: (0..in_channels).collect(),
            outputs: (0..out_channels).collect(),
        };
        Self::new(
            in_channels,
            out_channels,
            kernel,
            stride,
            padding,
            pad_mode,
            vec![group],
        )
    }

    pub fn weight_len(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    /// Slice of the flat weight vector used by group `g`.
    pub fn group_weights(&self, g: usize) -> std::ops::Range<usize> {
        self.offsets[g]..self.offsets[g + 1]
    }

    pub fn output_len(&self, t: usize) -> Result<usize> {
        let padded = t + 2 * self.padding;
        if t == 0 || padded < self.kernel {
            return Err(AutodiffError::InvalidArgument {
                op: "conv1d",
                message: format!("input length {t} too short for kernel {}", self.kernel),
            });
        }
        Ok((padded - self.kernel) / self.stride + 1)
    }

    fn source(&self, pos: isize, t: usize) -> Option<usize> {
        if pos >= 0 && (pos as usize) < t {
            return Some(pos as usize);
        }
        match self.pad_mode {
            PadMode::Zero => None,
            PadMode::Reflect => Some(reflect(pos, t)),
        }
    }
}

/// Mirror index without repeating the edge sample; wraps for pads longer
/// than the signal.
pub(crate) fn reflect(pos: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let m = pos.rem_euclid(period);
    if m < n as isize {
        m as usize
    } else {
        (period - m) as usize
    }
}

fn im2col(
    spec: &Conv1dSpec,
    g: &ConvGroup,
    x: &[f64],
    batch: usize,
    t: usize,
    t_out: usize,
    cols: &mut Vec<f64>,
) {
    let k = spec.kernel;
    let width = batch * t_out;
    cols.clear();
    cols.resize(g.inputs.len() * k * width, 0.0);
    for (ci, &c) in g.inputs.iter().enumerate() {
        for kk in 0..k {
            let row = &mut cols[(ci * k + kk) * width..(ci * k + kk + 1) * width];
            for b in 0..batch {
                let xs = &x[(b * spec.in_channels + c) * t..(b * spec.in_channels + c + 1) * t];
                for o in 0..t_out {
                    let pos = (o * spec.stride + kk) as isize - spec.padding as isize;
                    if let Some(s) = spec.source(pos, t) {
                        row[b * t_out + o] = xs[s];
                    }
                }
            }
        }
    }
}

/// `c = a · b` for row-major `a: m×k`, `b: k×n` (or transposed views via
/// the flags), accumulating when `accumulate` is set.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    a_t: bool,
    b: &[f64],
    b_t: bool,
    c: &mut [f64],
    accumulate: bool,
) {
    if m == 0 || n == 0 {
        return;
    }
    let (rsa, csa) = if a_t {
        (1, m as isize)
    } else {
        (k as isize, 1)
    };
    let (rsb, csb) = if b_t {
        (1, k as isize)
    } else {
        (n as isize, 1)
    };
    let beta = if accumulate { 1.0 } else { 0.0 };
    // SAFETY: slice lengths are checked by callers' shape logic; strides
    // describe row-major (or transposed) layouts within those slices.
    assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Forward pass. `x` is `[batch, in_channels, t]` flattened.
pub(crate) fn conv_forward(
    spec: &Conv1dSpec,
    x: &[f64],
    w: &[f64],
    batch: usize,
    t: usize,
) -> Result<Vec<f64>> {
    let t_out = spec.output_len(t)?;
    let width = batch * t_out;
    let mut out = vec![0.0; batch * spec.out_channels * t_out];
    let mut cols = Vec::new();
    let mut tmp = Vec::new();
    for (gi, g) in spec.groups.iter().enumerate() {
        if g.inputs.is_empty() || g.outputs.is_empty() {
            continue;
        }
        im2col(spec, g, x, batch, t, t_out, &mut cols);
        tmp.clear();
        tmp.resize(g.outputs.len() * width, 0.0);
        let kdim = g.inputs.len() * spec.kernel;
        gemm(
            g.outputs.len(),
            kdim,
            width,
            &w[spec.group_weights(gi)],
            false,
            &cols,
            false,
            &mut tmp,
            false,
        );
        for (oi, &c) in g.outputs.iter().enumerate() {
            for b in 0..batch {
                let dst = &mut out
                    [(b * spec.out_channels + c) * t_out..(b * spec.out_channels + c + 1) * t_out];
                dst.copy_from_slice(&tmp[oi * width + b * t_out..oi * width + (b + 1) * t_out]);
            }
        }
    }
    Ok(out)
}

/// Returns `(dx, dw)` given the upstream gradient `gy` (`[batch, out, t_out]`).
pub(crate) fn conv_backward(
    spec: &Conv1dSpec,
    x: &[f64],
    w: &[f64],
    gy: &[f64],
    batch: usize,
    t: usize,
    need_dx: bool,
    need_dw: bool,
) -> (Vec<f64>, Vec<f64>) {
    let t_out = spec.output_len(t).expect("validated in forward");
    let width = batch * t_out;
    let k = spec.kernel;
    let mut dx = if need_dx {
        vec![0.0; x.len()]
    } else {
        Vec::new()
    };
    let mut dw = if need_dw {
        vec![0.0; w.len()]
    } else {
        Vec::new()
    };
    let mut cols = Vec::new();
    let mut gout = Vec::new();
    let mut dcols = Vec::new();
    for (gi, g) in spec.groups.iter().enumerate() {
        if g.inputs.is_empty() || g.outputs.is_empty() {
            continue;
        }
        gout.clear();
        gout.resize(g.outputs.len() * width, 0.0);
        for (oi, &c) in g.outputs.iter().enumerate() {
            for b in 0..batch {
                gout[oi * width + b * t_out..oi * width + (b + 1) * t_out].copy_from_slice(
                    &gy[(b * spec.out_channels + c) * t_out
                        ..(b * spec.out_channels + c + 1) * t_out],
                );
            }
        }
        let kdim = g.inputs.len() * k;
        let range = spec.group_weights(gi);
        if need_dw {
            im2col(spec, g, x, batch, t, t_out, &mut cols);
            gemm(
                g.outputs.len(),
                width,
                kdim,
                &gout,
                false,
                &cols,
                true,
                &mut dw[range.clone()],
                true,
            );
        }
        if need_dx {
            dcols.clear();
            dcols.resize(kdim * width, 0.0);
            gemm(
                kdim,
                g.outputs.len(),
                width,
                &w[range],
                true,
                &gout,
                false,
                &mut dcols,
                false,
            );
            for (ci, &c) in g.inputs.iter().enumerate() {
                for kk in 0..k {
                    let row = &dcols[(ci * k + kk) * width..(ci * k + kk + 1) * width];
                    for b in 0..batch {
                        let base = (b * spec.in_channels + c) * t;
                        for o in 0..t_out {
                            let pos = (o * spec.stride + kk) as isize - spec.padding as isize;
                            if let Some(s) = spec.source(pos, t) {
                                dx[base + s] += row[b * t_out + o];
                            }
                        }
                    }
                }
            }
        }
    }
    (dx, dw)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reflect_indices() {
        let idx: Vec<usize> = (-4..8).map(|p| reflect(p, 4)).collect();
        assert_eq!(idx, vec![2, 3, 2, 1, 0, 1, 2, 3, 2, 1, 0, 1]);
        assert_eq!(reflect(-3, 1), 0);
    }

    #[test]
    fn direct_loop_agreement() {
        // [2 batch, 3 in, 7 t] -> [2 batch, 2 out], kernel 3, stride 2, reflect pad 1
        let spec = Conv1dSpec::dense(3, 2, 3, 2, 1, PadMode::Reflect).unwrap();
        let x: Vec<f64> = (0..42).map(|i| ((i * 37 % 11) as f64) - 5.0).collect();
        let w: Vec<f64> = (0..18).map(|i| ((i * 13 % 7) as f64) * 0.5 - 1.0).collect();
        let out = conv_forward(&spec, &x, &w, 2, 7).unwrap();
        let t_out = 4;
        for b in 0..2 {
            for o in 0..2 {
                for to in 0..t_out {
                    let mut acc = 0.0;
                    for c in 0..3 {
                        for kk in 0..3 {
                            let pos = (to * 2 + kk) as isize - 1;
                            acc += w[(o * 3 + c) * 3 + kk] * x[(b * 3 + c) * 7 + reflect(pos, 7)];
                        }
                    }
                    assert!((out[(b * 2 + o) * t_out + to] - acc).abs() < 1e-12);
                }
            }
        }
    }
}
