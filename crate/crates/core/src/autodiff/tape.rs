use std::sync::Arc;

use super::conv::{conv_backward, conv_forward, gemm, Conv1dSpec, PadMode};
use super::{AutodiffError, Result, Tensor};

/// Handle to a node on a [`Tape`]. Only meaningful for the tape that
/// created it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

/// An operation whose forward value is computed by the caller and whose
/// vector-Jacobian product is supplied here.
pub trait CustomOp: Send + Sync {
    fn name(&self) -> &'static str;
    /// Gradients for each input, given the upstream gradient of the output.
    fn backward(&self, inputs: &[&Tensor], output: &Tensor, grad: &[f64]) -> Vec<Vec<f64>>;
}

enum Op {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    AddScalar(Var),
    Matmul(Var, Var),
    Conv {
        x: Var,
        w: Var,
        spec: Arc<Conv1dSpec>,
        batch: usize,
        t: usize,
    },
    LeakyRelu(Var, f64),
    Tanh(Var),
    Square(Var),
    Sum(Var),
    Mean(Var),
    SumAxis {
        x: Var,
        outer: usize,
        n: usize,
        inner: usize,
    },
    Concat {
        xs: Vec<Var>,
        outer: usize,
        sizes: Vec<usize>,
        inner: usize,
    },
    Slice {
        x: Var,
        outer: usize,
        n: usize,
        inner: usize,
        start: usize,
        len: usize,
    },
    Broadcast {
        x: Var,
        map: Vec<usize>,
    },
    Reshape(Var),
    NormalizeL2 {
        x: Var,
        outer: usize,
        n: usize,
        inner: usize,
        norms: Vec<f64>,
    },
    Upsample {
        x: Var,
        rows: usize,
        t: usize,
        taps: Vec<(usize, usize, f64)>,
    },
    Custom(Vec<Var>, Arc<dyn CustomOp>),
}

struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Append-only record of a computation.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    grads: Vec<Option<Tensor>>,
    consumed: bool,
}

fn mismatch(op: &'static str, a: &[usize], b: &[usize]) -> AutodiffError {
    AutodiffError::ShapeMismatch {
        op,
        left: a.to_vec(),
        right: b.to_vec(),
    }
}

fn split_axis(shape: &[usize], axis: usize, op: &'static str) -> Result<(usize, usize, usize)> {
    if axis >= shape.len() {
        return Err(AutodiffError::InvalidArgument {
            op,
            message: format!("axis {axis} out of range for {shape:?}"),
        });
    }
    Ok((
        shape[..axis].iter().product(),
        shape[axis],
        shape[axis + 1..].iter().product(),
    ))
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// A trainable leaf; its gradient is available after `backward`.
    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, true)
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, false)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.rg(v)
    }

    /// Gradient of the last `backward` loss with respect to `v`.
    pub fn grad(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa != sb {
            return Err(mismatch(op, sa, sb));
        }
        Ok(())
    }

    fn zip(
        &mut self,
        op: &'static str,
        a: Var,
        b: Var,
        f: impl Fn(f64, f64) -> f64,
        node: Op,
    ) -> Result<Var> {
        self.same_shape(op, a, b)?;
        let (va, vb) = (self.value(a), self.value(b));
        let data = va
            .data()
            .iter()
            .zip(vb.data())
            .map(|(x, y)| f(*x, *y))
            .collect();
        let value = Tensor::new(va.shape().to_vec(), data)?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(value, node, rg))
    }

    fn map(&mut self, x: Var, f: impl Fn(f64) -> f64, node: Op) -> Var {
        let v = self.value(x);
        let value =
            Tensor::new(v.shape().to_vec(), v.data().iter().map(|a| f(*a)).collect()).unwrap();
        let rg = self.rg(x);
        self.push(value, node, rg)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip("add", a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip("sub", a, b, |x, y| x - y, Op::Sub(a, b))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip("mul", a, b, |x, y| x * y, Op::Mul(a, b))
    }

    pub fn scale(&mut self, x: Var, c: f64) -> Var {
        self.map(x, |a| a * c, Op::Scale(x, c))
    }

    pub fn add_scalar(&mut self, x: Var, c: f64) -> Var {
        self.map(x, |a| a + c, Op::AddScalar(x))
    }

    pub fn leaky_relu(&mut self, x: Var, slope: f64) -> Var {
        self.map(
            x,
            |a| if a > 0.0 { a } else { slope * a },
            Op::LeakyRelu(x, slope),
        )
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        self.map(x, f64::tanh, Op::Tanh(x))
    }

    pub fn square(&mut self, x: Var) -> Var {
        self.map(x, |a| a * a, Op::Square(x))
    }

    /// `[m, k] · [k, n]`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a).to_vec(), self.shape(b).to_vec());
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
            return Err(mismatch("matmul", &sa, &sb));
        }
        let (m, k, n) = (sa[0], sa[1], sb[1]);
        let mut out = vec![0.0; m * n];
        gemm(
            m,
            k,
            n,
            self.value(a).data(),
            false,
            self.value(b).data(),
            false,
            &mut out,
            false,
        );
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(Tensor::new(vec![m, n], out)?, Op::Matmul(a, b), rg))
    }

    /// Dense convolution: input `[C_in, T]` or `[B, C_in, T]`, kernel
    /// `[C_out, C_in, K]`.
    pub fn conv1d(
        &mut self,
        x: Var,
        kernel: Var,
        stride: usize,
        padding: usize,
        pad_mode: PadMode,
    ) -> Result<Var> {
        let ks = self.shape(kernel).to_vec();
        if ks.len() != 3 {
            return Err(mismatch("conv1d", self.shape(x), &ks));
        }
        let spec = Conv1dSpec::dense(ks[1], ks[0], ks[2], stride, padding, pad_mode)?;
        let flat = self.reshape(kernel, &[spec.weight_len()])?;
        self.grouped_conv1d(x, flat, Arc::new(spec))
    }

    /// Grouped convolution with a flat weight vector of `spec.weight_len()`.
    pub fn grouped_conv1d(&mut self, x: Var, weights: Var, spec: Arc<Conv1dSpec>) -> Result<Var> {
        let xs = self.shape(x).to_vec();
        let (batch, c, t, batched) = match xs.as_slice() {
            [c, t] => (1, *c, *t, false),
            [b, c, t] => (*b, *c, *t, true),
            _ => return Err(mismatch("conv1d", &xs, &[spec.in_channels])),
        };
        if c != spec.in_channels {
            return Err(mismatch(
                "conv1d",
                &xs,
                &[spec.out_channels, spec.in_channels, spec.kernel],
            ));
        }
        if self.shape(weights) != [spec.weight_len()] {
            return Err(mismatch(
                "conv1d",
                self.shape(weights),
                &[spec.weight_len()],
            ));
        }
        let t_out = spec.output_len(t)?;
        let out = conv_forward(
            &spec,
            self.value(x).data(),
            self.value(weights).data(),
            batch,
            t,
        )?;
        let shape = if batched {
            vec![batch, spec.out_channels, t_out]
        } else {
            vec![spec.out_channels, t_out]
        };
        let rg = self.rg(x) || self.rg(weights);
        Ok(self.push(
            Tensor::new(shape, out)?,
            Op::Conv {
                x,
                w: weights,
                spec,
                batch,
                t,
            },
            rg,
        ))
    }

    /// Sum of all elements as a 0-d tensor.
    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).data().iter().sum();
        let rg = self.rg(x);
        self.push(Tensor::scalar(s), Op::Sum(x), rg)
    }

    pub fn mean(&mut self, x: Var) -> Var {
        let v = self.value(x);
        let s = v.data().iter().sum::<f64>() / v.numel().max(1) as f64;
        let rg = self.rg(x);
        self.push(Tensor::scalar(s), Op::Mean(x), rg)
    }

    /// Sums out `axis`.
    pub fn sum_axis(&mut self, x: Var, axis: usize) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        let (outer, n, inner) = split_axis(&shape, axis, "sum_axis")?;
        let src = self.value(x).data();
        let mut out = vec![0.0; outer * inner];
        for o in 0..outer {
            for k in 0..n {
                let row = &src[(o * n + k) * inner..(o * n + k + 1) * inner];
                for (d, s) in out[o * inner..(o + 1) * inner].iter_mut().zip(row) {
                    *d += s;
                }
            }
        }
        let mut new_shape = shape;
        new_shape.remove(axis);
        let rg = self.rg(x);
        Ok(self.push(
            Tensor::new(new_shape, out)?,
            Op::SumAxis { x, outer, n, inner },
            rg,
        ))
    }

    pub fn mean_axis(&mut self, x: Var, axis: usize) -> Result<Var> {
        let n = *self.shape(x).get(axis).unwrap_or(&1);
        let s = self.sum_axis(x, axis)?;
        Ok(self.scale(s, 1.0 / n.max(1) as f64))
    }

    pub fn concat(&mut self, xs: &[Var], axis: usize) -> Result<Var> {
        let first = self
            .shape(*xs.first().ok_or(AutodiffError::InvalidArgument {
                op: "concat",
                message: "no inputs".into(),
            })?)
            .to_vec();
        let (outer, _, inner) = split_axis(&first, axis, "concat")?;
        let mut sizes = Vec::with_capacity(xs.len());
        for &v in xs {
            let s = self.shape(v);
            let ok = s.len() == first.len()
                && s.iter()
                    .zip(&first)
                    .enumerate()
                    .all(|(i, (a, b))| i == axis || a == b);
            if !ok {
                return Err(mismatch("concat", &first, s));
            }
            sizes.push(s[axis]);
        }
        let total: usize = sizes.iter().sum();
        let mut out = vec![0.0; outer * total * inner];
        let mut at = 0;
        for (&v, &n) in xs.iter().zip(&sizes) {
            let src = self.value(v).data();
            for o in 0..outer {
                out[(o * total + at) * inner..(o * total + at + n) * inner]
                    .copy_from_slice(&src[o * n * inner..(o + 1) * n * inner]);
            }
            at += n;
        }
        let mut shape = first;
        shape[axis] = total;
        let rg = xs.iter().any(|&v| self.rg(v));
        Ok(self.push(
            Tensor::new(shape, out)?,
            Op::Concat {
                xs: xs.to_vec(),
                outer,
                sizes,
                inner,
            },
            rg,
        ))
    }

    /// `x[.., start..end, ..]` along `axis`.
    pub fn slice(&mut self, x: Var, axis: usize, start: usize, end: usize) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        let (outer, n, inner) = split_axis(&shape, axis, "slice")?;
        if start > end || end > n {
            return Err(AutodiffError::InvalidArgument {
                op: "slice",
                message: format!("range {start}..{end} out of bounds for axis of {n}"),
            });
        }
        let len = end - start;
        let src = self.value(x).data();
        let mut out = Vec::with_capacity(outer * len * inner);
        for o in 0..outer {
            out.extend_from_slice(&src[(o * n + start) * inner..(o * n + end) * inner]);
        }
        let mut new_shape = shape;
        new_shape[axis] = len;
        let rg = self.rg(x);
        Ok(self.push(
            Tensor::new(new_shape, out)?,
            Op::Slice {
                x,
                outer,
                n,
                inner,
                start,
                len,
            },
            rg,
        ))
    }

    /// Expands size-1 (or missing leading) dimensions to `shape`.
    pub fn broadcast(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let src_shape = self.shape(x).to_vec();
        if src_shape.len() > shape.len() {
            return Err(mismatch("broadcast", &src_shape, shape));
        }
        let lead = shape.len() - src_shape.len();
        let mut src_strides = vec![0usize; shape.len()];
        let mut stride = 1;
        for i in (0..src_shape.len()).rev() {
            let (s, d) = (src_shape[i], shape[lead + i]);
            if s != d && s != 1 {
                return Err(mismatch("broadcast", &src_shape, shape));
            }
            src_strides[lead + i] = if s == 1 { 0 } else { stride };
            stride *= s;
        }
        let total: usize = shape.iter().product();
        let mut map = Vec::with_capacity(total);
        let mut idx = vec![0usize; shape.len()];
        for _ in 0..total {
            map.push(idx.iter().zip(&src_strides).map(|(i, s)| i * s).sum());
            for d in (0..shape.len()).rev() {
                idx[d] += 1;
                if idx[d] < shape[d] {
                    break;
                }
                idx[d] = 0;
            }
        }
        let src = self.value(x).data();
        let out = map.iter().map(|&i| src[i]).collect();
        let rg = self.rg(x);
        Ok(self.push(
            Tensor::new(shape.to_vec(), out)?,
            Op::Broadcast { x, map },
            rg,
        ))
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let value = self.value(x).clone().reshaped(shape)?;
        let rg = self.rg(x);
        Ok(self.push(value, Op::Reshape(x), rg))
    }

    /// Scales every fiber along `axis` to unit Euclidean norm.
    pub fn normalize_l2(&mut self, x: Var, axis: usize) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        let (outer, n, inner) = split_axis(&shape, axis, "normalize_l2")?;
        let src = self.value(x).data();
        let mut out = vec![0.0; src.len()];
        let mut norms = Vec::with_capacity(outer * inner);
        for o in 0..outer {
            for i in 0..inner {
                let idx = |k: usize| (o * n + k) * inner + i;
                let norm = (0..n)
                    .map(|k| src[idx(k)] * src[idx(k)])
                    .sum::<f64>()
                    .sqrt()
                    .max(1e-12);
                for k in 0..n {
                    out[idx(k)] = src[idx(k)] / norm;
                }
                norms.push(norm);
            }
        }
        let rg = self.rg(x);
        Ok(self.push(
            Tensor::new(shape, out)?,
            Op::NormalizeL2 {
                x,
                outer,
                n,
                inner,
                norms,
            },
            rg,
        ))
    }

    /// Linear interpolation along the last axis by an integer factor, with
    /// half-pixel alignment and edge clamping.
    pub fn upsample1d(&mut self, x: Var, factor: usize) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        let t = *shape.last().ok_or(AutodiffError::InvalidArgument {
            op: "upsample1d",
            message: "0-d input".into(),
        })?;
        if factor == 0 || t == 0 {
            return Err(AutodiffError::InvalidArgument {
                op: "upsample1d",
                message: "empty input or factor".into(),
            });
        }
        let rows = shape[..shape.len() - 1].iter().product::<usize>();
        let t_out = t * factor;
        let taps: Vec<(usize, usize, f64)> = (0..t_out)
            .map(|o| {
                let s = ((o as f64 + 0.5) / factor as f64 - 0.5).clamp(0.0, (t - 1) as f64);
                let i0 = s.floor() as usize;
                let i1 = (i0 + 1).min(t - 1);
                (i0, i1, s - i0 as f64)
            })
            .collect();
        let src = self.value(x).data();
        let mut out = Vec::with_capacity(rows * t_out);
        for r in 0..rows {
            let row = &src[r * t..(r + 1) * t];
            out.extend(
                taps.iter()
                    .map(|&(a, b, l)| (1.0 - l) * row[a] + l * row[b]),
            );
        }
        let mut new_shape = shape;
        *new_shape.last_mut().unwrap() = t_out;
        let rg = self.rg(x);
        Ok(self.push(
            Tensor::new(new_shape, out)?,
            Op::Upsample { x, rows, t, taps },
            rg,
        ))
    }

    pub fn custom(&mut self, inputs: &[Var], output: Tensor, op: Arc<dyn CustomOp>) -> Var {
        let rg = inputs.iter().any(|&v| self.rg(v));
        self.push(output, Op::Custom(inputs.to_vec(), op), rg)
    }

    /// Propagates d(loss)/d(node) to every node that requires a gradient.
    /// A tape supports one backward pass.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.consumed {
            return Err(AutodiffError::AlreadyConsumed);
        }
        if !self.shape(loss).is_empty() {
            return Err(AutodiffError::NotScalar(self.shape(loss).to_vec()));
        }
        self.consumed = true;
        let mut grads: Vec<Option<Vec<f64>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(vec![1.0]);
        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            if !self.nodes[i].requires_grad {
                continue;
            }
            self.propagate(i, &g, &mut grads);
            grads[i] = Some(g);
        }
        self.grads = grads
            .into_iter()
            .zip(&self.nodes)
            .map(|(g, n)| {
                g.filter(|_| n.requires_grad)
                    .map(|g| Tensor::new(n.value.shape().to_vec(), g).unwrap())
            })
            .collect();
        Ok(())
    }

    fn propagate(&self, i: usize, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let node = &self.nodes[i];
        let mut acc = |v: Var, f: &mut dyn FnMut(&mut [f64])| {
            if !self.nodes[v.0].requires_grad {
                return;
            }
            let slot = grads[v.0].get_or_insert_with(|| vec![0.0; self.nodes[v.0].value.numel()]);
            f(slot);
        };
        let val = |v: Var| self.nodes[v.0].value.data();
        match &node.op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                acc(*a, &mut |d| d.iter_mut().zip(g).for_each(|(d, g)| *d += g));
                acc(*b, &mut |d| d.iter_mut().zip(g).for_each(|(d, g)| *d += g));
            }
            Op::Sub(a, b) => {
                acc(*a, &mut |d| d.iter_mut().zip(g).for_each(|(d, g)| *d += g));
                acc(*b, &mut |d| d.iter_mut().zip(g).for_each(|(d, g)| *d -= g));
            }
            Op::Mul(a, b) => {
                let (va, vb) = (val(*a), val(*b));
                acc(*a, &mut |d| {
                    d.iter_mut()
                        .zip(g)
                        .zip(vb)
                        .for_each(|((d, g), y)| *d += g * y)
                });
                acc(*b, &mut |d| {
                    d.iter_mut()
                        .zip(g)
                        .zip(va)
                        .for_each(|((d, g), x)| *d += g * x)
                });
            }
            Op::Scale(x, c) => acc(*x, &mut |d| {
                d.iter_mut().zip(g).for_each(|(d, g)| *d += g * c)
            }),
            Op::AddScalar(x) | Op::Reshape(x) => {
                acc(*x, &mut |d| d.iter_mut().zip(g).for_each(|(d, g)| *d += g))
            }
            Op::Matmul(a, b) => {
                let (sa, sb) = (self.shape(*a), self.shape(*b));
                let (m, k, n) = (sa[0], sa[1], sb[1]);
                let (va, vb) = (val(*a), val(*b));
                acc(*a, &mut |d| gemm(m, n, k, g, false, vb, true, d, true));
                acc(*b, &mut |d| gemm(k, m, n, va, true, g, false, d, true));
            }
            Op::Conv {
                x,
                w,
                spec,
                batch,
                t,
            } => {
                let (dx, dw) = conv_backward(
                    spec,
                    val(*x),
                    val(*w),
                    g,
                    *batch,
                    *t,
                    self.rg(*x),
                    self.rg(*w),
                );
                acc(*x, &mut |d| {
                    d.iter_mut().zip(&dx).for_each(|(d, g)| *d += g)
                });
                acc(*w, &mut |d| {
                    d.iter_mut().zip(&dw).for_each(|(d, g)| *d += g)
                });
            }
            Op::LeakyRelu(x, slope) => {
                let vx = val(*x);
                acc(*x, &mut |d| {
                    d.iter_mut()
                        .zip(g)
                        .zip(vx)
                        .for_each(|((d, g), x)| *d += if *x > 0.0 { *g } else { g * slope })
                });
            }
            Op::Tanh(x) => {
                let y = node.value.data();
                acc(*x, &mut |d| {
                    d.iter_mut()
                        .zip(g)
                        .zip(y)
                        .for_each(|((d, g), y)| *d += g * (1.0 - y * y))
                });
            }
            Op::Square(x) => {
                let vx = val(*x);
                acc(*x, &mut |d| {
                    d.iter_mut()
                        .zip(g)
                        .zip(vx)
                        .for_each(|((d, g), x)| *d += 2.0 * g * x)
                });
            }
            Op::Sum(x) => acc(*x, &mut |d| d.iter_mut().for_each(|d| *d += g[0])),
            Op::Mean(x) => {
                let n = self.nodes[x.0].value.numel().max(1) as f64;
                acc(*x, &mut |d| d.iter_mut().for_each(|d| *d += g[0] / n));
            }
            Op::SumAxis { x, outer, n, inner } => acc(*x, &mut |d| {
                for o in 0..*outer {
                    for k in 0..*n {
                        for i in 0..*inner {
                            d[(o * n + k) * inner + i] += g[o * inner + i];
                        }
                    }
                }
            }),
            Op::Concat {
                xs,
                outer,
                sizes,
                inner,
            } => {
                let total: usize = sizes.iter().sum();
                let mut at = 0;
                for (v, &n) in xs.iter().zip(sizes) {
                    acc(*v, &mut |d| {
                        for o in 0..*outer {
                            let src = &g[(o * total + at) * inner..(o * total + at + n) * inner];
                            d[o * n * inner..(o + 1) * n * inner]
                                .iter_mut()
                                .zip(src)
                                .for_each(|(d, g)| *d += g);
                        }
                    });
                    at += n;
                }
            }
            Op::Slice {
                x,
                outer,
                n,
                inner,
                start,
                len,
            } => acc(*x, &mut |d| {
                for o in 0..*outer {
                    let dst = &mut d[(o * n + start) * inner..(o * n + start + len) * inner];
                    dst.iter_mut()
                        .zip(&g[o * len * inner..(o + 1) * len * inner])
                        .for_each(|(d, g)| *d += g);
                }
            }),
            Op::Broadcast { x, map } => {
                acc(*x, &mut |d| map.iter().zip(g).for_each(|(&i, g)| d[i] += g))
            }
            Op::NormalizeL2 {
                x,
                outer,
                n,
                inner,
                norms,
            } => {
                let y = node.value.data();
                acc(*x, &mut |d| {
                    for o in 0..*outer {
                        for i in 0..*inner {
                            let idx = |k: usize| (o * n + k) * inner + i;
                            let norm = norms[o * inner + i];
                            let dot: f64 = (0..*n).map(|k| y[idx(k)] * g[idx(k)]).sum();
                            for k in 0..*n {
                                d[idx(k)] += (g[idx(k)] - y[idx(k)] * dot) / norm;
                            }
                        }
                    }
                });
            }
            Op::Upsample { x, rows, t, taps } => acc(*x, &mut |d| {
                let t_out = taps.len();
                for r in 0..*rows {
                    for (o, &(a, b, l)) in taps.iter().enumerate() {
                        let go = g[r * t_out + o];
                        d[r * t + a] += (1.0 - l) * go;
                        d[r * t + b] += l * go;
                    }
                }
            }),
            Op::Custom(inputs, op) => {
                let values: Vec<&Tensor> = inputs.iter().map(|v| &self.nodes[v.0].value).collect();
                let gs = op.backward(&values, &node.value, g);
                for (v, gi) in inputs.iter().zip(gs) {
                    acc(*v, &mut |d| {
                        d.iter_mut().zip(&gi).for_each(|(d, g)| *d += g)
                    });
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_small_integers() {
        let mut tape = Tape::new();
        let a = tape.constant(Tensor::new(vec![2, 3], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap());
        let b = tape.constant(Tensor::new(vec![3, 1], vec![1.0, 0.0, -1.0]).unwrap());
        let c = tape.matmul(a, b).unwrap();
        assert_eq!(tape.value(c).data(), &[-2.0, -2.0]);
        assert_eq!(tape.shape(c), &[2, 1]);
    }

    #[test]
    fn conv1d_sliding_window() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::new(vec![1, 5], vec![1.0, 0.0, 0.0, 0.0, 1.0]).unwrap());
        let k = tape.constant(Tensor::new(vec![1, 1, 2], vec![1.0, 1.0]).unwrap());
        let y = tape.conv1d(x, k, 1, 0, PadMode::Zero).unwrap();
        assert_eq!(tape.value(y).data(), &[1.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn sum_gradient_is_ones() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::new(vec![2, 2], vec![1.0, -2.0, 3.0, 0.5]).unwrap());
        let s = tape.sum(x);
        tape.backward(s).unwrap();
        assert_eq!(tape.grad(x).unwrap().data(), &[1.0; 4]);
    }

    #[test]
    fn sum_of_squares_gradient() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::vector(vec![1.0, 2.0, 3.0]));
        let sq = tape.mul(x, x).unwrap();
        let s = tape.sum(sq);
        tape.backward(s).unwrap();
        assert_eq!(tape.grad(x).unwrap().data(), &[2.0, 4.0, 6.0]);
    }

    #[test]
    fn backward_errors() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::vector(vec![1.0, 2.0]));
        assert_eq!(tape.backward(x), Err(AutodiffError::NotScalar(vec![2])));
        let s = tape.sum(x);
        tape.backward(s).unwrap();
        assert_eq!(tape.backward(s), Err(AutodiffError::AlreadyConsumed));
    }

    #[test]
    fn shape_mismatch_names_both_shapes() {
        let mut tape = Tape::new();
        let a = tape.constant(Tensor::zeros(&[2, 3]));
        let b = tape.constant(Tensor::zeros(&[3, 2]));
        assert_eq!(
            tape.add(a, b),
            Err(AutodiffError::ShapeMismatch {
                op: "add",
                left: vec![2, 3],
                right: vec![3, 2]
            })
        );
        assert!(matches!(
            tape.matmul(a, a),
            Err(AutodiffError::ShapeMismatch { op: "matmul", .. })
        ));
    }

    #[test]
    fn recorded_values_are_snapshots() {
        let mut tape = Tape::new();
        let mut input = Tensor::vector(vec![1.0, 2.0]);
        let x = tape.leaf(input.clone());
        let y = tape.square(x);
        input.data_mut()[0] = 100.0;
        assert_eq!(tape.value(y).data(), &[1.0, 4.0]);
        assert_eq!(tape.value(x).data(), &[1.0, 2.0]);
    }

    #[test]
    fn constants_get_no_gradient() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::vector(vec![1.0, 2.0]));
        let c = tape.constant(Tensor::vector(vec![3.0, 4.0]));
        let y = tape.mul(x, c).unwrap();
        let s = tape.sum(y);
        tape.backward(s).unwrap();
        assert!(tape.grad(c).is_none());
        assert_eq!(tape.grad(x).unwrap().data(), &[3.0, 4.0]);
    }

    #[test]
    fn upsample_keeps_constants() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::full(&[2, 3], 7.0));
        let y = tape.upsample1d(x, 2).unwrap();
        assert_eq!(tape.shape(y), &[2, 6]);
        assert!(tape
            .value(y)
            .data()
            .iter()
            .all(|v| (*v - 7.0).abs() < 1e-15));
    }

    #[test]
    fn broadcast_bias() {
        let mut tape = Tape::new();
        let b = tape.leaf(Tensor::new(vec![2, 1], vec![1.0, 2.0]).unwrap());
        let y = tape.broadcast(b, &[3, 2, 2]).unwrap();
        assert_eq!(
            tape.value(y).data(),
            &[1.0, 1.0, 2.0, 2.0, 1.0, 1.0, 2.0, 2.0, 1.0, 1.0, 2.0, 2.0]
        );
        let s = tape.sum(y);
        tape.backward(s).unwrap();
        assert_eq!(tape.grad(b).unwrap().data(), &[6.0, 6.0]);
    }
}
