//! Dynamic tape: every op evaluates eagerly and records how to push an
//! adjoint back to its inputs. [`Tape::backward`] replays the record in
//! reverse creation order.

use crate::error::{Error, Result};

use super::kernels::{self, ConvGeom};
use super::tensor::Tensor;

/// Clamp applied to probabilities before taking logs in [`Tape::bernoulli_nll`].
pub const NLL_EPS: f64 = 1e-7;

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Sigmoid,
    Tanh,
    /// Saturating clamp to `[0, 1]`.
    HardClip01,
}

/// Zero padding added before (top/left) and after (bottom/right) each
/// spatial axis. For transposed convolutions the same amounts are cropped
/// from the output instead.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Padding {
    pub before: usize,
    pub after: usize,
}

impl Padding {
    pub fn same(p: usize) -> Self {
        Self {
            before: p,
            after: p,
        }
    }

    pub fn new(before: usize, after: usize) -> Self {
        Self { before, after }
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    Conv2d {
        x: Var,
        w: Var,
        b: Option<Var>,
        geom: ConvGeom,
    },
    ConvTranspose2d {
        x: Var,
        w: Var,
        b: Option<Var>,
        geom: ConvGeom,
    },
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Act(Var, Activation),
    MaxPool2 {
        x: Var,
        argmax: Vec<usize>,
    },
    Upsample2(Var),
    Concat(Vec<Var>),
    SliceChannels {
        x: Var,
        start: usize,
    },
    Sum(Var),
    Mean(Var),
    L1Mean(Var),
    BernoulliNll {
        pred: Var,
        target: Var,
    },
    BceWithLogits {
        logits: Var,
        target: Var,
    },
    Mse(Var, Var),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    needs_grad: bool,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
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

    /// Records an input. Gradients are collected for it iff
    /// `tensor.requires_grad()`.
    pub fn leaf(&mut self, tensor: Tensor) -> Var {
        let needs_grad = tensor.requires_grad();
        self.push(tensor, Op::Leaf, needs_grad)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    pub fn item(&self, v: Var) -> f64 {
        self.nodes[v.0].value.item()
    }

    /// Accumulated gradient of a leaf, if backward has reached it.
    pub fn grad(&self, v: Var) -> Option<&[f64]> {
        self.nodes[v.0].value.grad()
    }

    /// Clears every accumulated leaf gradient.
    pub fn reset_grads(&mut self) {
        for n in &mut self.nodes {
            n.value.zero_grad();
        }
    }

    fn push(&mut self, value: Tensor, op: Op, needs_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    fn record(&mut self, shape: &[usize], data: Vec<f64>, op: Op, inputs: &[Var]) -> Var {
        let needs_grad = inputs.iter().any(|&v| self.needs(v));
        let value = Tensor::new(shape, data).expect("op produced inconsistent shape");
        self.push(value, op, needs_grad)
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::ShapeMismatch {
                op,
                left: self.shape(a).to_vec(),
                right: self.shape(b).to_vec(),
            });
        }
        Ok(())
    }

    fn check_bias(&self, op: &'static str, b: Option<Var>, channels: usize) -> Result<()> {
        if let Some(b) = b {
            if self.shape(b) != [channels] {
                return Err(Error::ShapeMismatch {
                    op,
                    left: self.shape(b).to_vec(),
                    right: vec![channels],
                });
            }
        }
        Ok(())
    }

    /// Strided cross-correlation. `w` is `out × in × k × k`, `x` is NCHW.
    pub fn conv2d(
        &mut self,
        x: Var,
        w: Var,
        b: Option<Var>,
        stride: usize,
        pad: Padding,
    ) -> Result<Var> {
        const OP: &str = "conv2d";
        let [n, c, h, wd] = self.value(x).dims4()?;
        let [o, i, k, k2] = self.value(w).dims4()?;
        if i != c || k != k2 {
            return Err(Error::ShapeMismatch {
                op: OP,
                left: self.shape(x).to_vec(),
                right: self.shape(w).to_vec(),
            });
        }
        if stride == 0 {
            return Err(Error::invalid(OP, "stride must be positive"));
        }
        self.check_bias(OP, b, o)?;
        let (ph, pw) = (h + pad.before + pad.after, wd + pad.before + pad.after);
        if ph < k || pw < k {
            return Err(Error::invalid(
                OP,
                format!("kernel {k} larger than padded input {ph}×{pw}"),
            ));
        }
        let geom = ConvGeom {
            batch: n,
            in_ch: c,
            in_h: h,
            in_w: wd,
            out_ch: o,
            out_h: (ph - k) / stride + 1,
            out_w: (pw - k) / stride + 1,
            kernel: k,
            stride,
            pad_before: pad.before,
        };
        let mut y = kernels::conv_forward(self.value(x).data(), self.value(w).data(), &geom);
        if let Some(b) = b {
            kernels::add_channel_bias(&mut y, self.value(b).data(), n, geom.out_h * geom.out_w);
        }
        let shape = [n, o, geom.out_h, geom.out_w];
        let mut inputs = vec![x, w];
        inputs.extend(b);
        Ok(self.record(&shape, y, Op::Conv2d { x, w, b, geom }, &inputs))
    }

    /// Transposed convolution, the adjoint of [`Tape::conv2d`] with the same
    /// kernel. `w` is `in × out × k × k`; `crop` removes output rows/columns
    /// the way `pad` adds input ones in the forward direction.
    pub fn conv2d_transpose(
        &mut self,
        x: Var,
        w: Var,
        b: Option<Var>,
        stride: usize,
        crop: Padding,
    ) -> Result<Var> {
        const OP: &str = "conv2d_transpose";
        let [n, c, h, wd] = self.value(x).dims4()?;
        let [i, o, k, k2] = self.value(w).dims4()?;
        if i != c || k != k2 {
            return Err(Error::ShapeMismatch {
                op: OP,
                left: self.shape(x).to_vec(),
                right: self.shape(w).to_vec(),
            });
        }
        if stride == 0 {
            return Err(Error::invalid(OP, "stride must be positive"));
        }
        self.check_bias(OP, b, o)?;
        let full_h = (h - 1) * stride + k;
        let full_w = (wd - 1) * stride + k;
        let cut = crop.before + crop.after;
        if full_h <= cut || full_w <= cut {
            return Err(Error::invalid(
                OP,
                format!("crop {cut} leaves no output from {full_h}×{full_w}"),
            ));
        }
        let geom = ConvGeom {
            batch: n,
            in_ch: o,
            in_h: full_h - cut,
            in_w: full_w - cut,
            out_ch: c,
            out_h: h,
            out_w: wd,
            kernel: k,
            stride,
            pad_before: crop.before,
        };
        let mut y = kernels::conv_adjoint_input(self.value(x).data(), self.value(w).data(), &geom);
        if let Some(b) = b {
            kernels::add_channel_bias(&mut y, self.value(b).data(), n, geom.in_h * geom.in_w);
        }
        let shape = [n, o, geom.in_h, geom.in_w];
        let mut inputs = vec![x, w];
        inputs.extend(b);
        Ok(self.record(&shape, y, Op::ConvTranspose2d { x, w, b, geom }, &inputs))
    }

    fn zip_with(
        &mut self,
        op: &'static str,
        a: Var,
        b: Var,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<(Vec<usize>, Vec<f64>)> {
        self.same_shape(op, a, b)?;
        let data = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(&x, &y)| f(x, y))
            .collect();
        Ok((self.shape(a).to_vec(), data))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (shape, data) = self.zip_with("add", a, b, |x, y| x + y)?;
        Ok(self.record(&shape, data, Op::Add(a, b), &[a, b]))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let (shape, data) = self.zip_with("sub", a, b, |x, y| x - y)?;
        Ok(self.record(&shape, data, Op::Sub(a, b), &[a, b]))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (shape, data) = self.zip_with("mul", a, b, |x, y| x * y)?;
        Ok(self.record(&shape, data, Op::Mul(a, b), &[a, b]))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let shape = self.shape(a).to_vec();
        let data = self.value(a).data().iter().map(|x| x * s).collect();
        self.record(&shape, data, Op::Scale(a, s), &[a])
    }

    pub fn activation(&mut self, a: Var, kind: Activation) -> Var {
        let f: fn(f64) -> f64 = match kind {
            Activation::Relu => |x| if x > 0.0 { x } else { 0.0 },
            Activation::Sigmoid => sigmoid,
            Activation::Tanh => f64::tanh,
            Activation::HardClip01 => |x| x.clamp(0.0, 1.0),
        };
        let shape = self.shape(a).to_vec();
        let data = self.value(a).data().iter().map(|&x| f(x)).collect();
        self.record(&shape, data, Op::Act(a, kind), &[a])
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.activation(a, Activation::Relu)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.activation(a, Activation::Sigmoid)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.activation(a, Activation::Tanh)
    }

    pub fn pool_max2(&mut self, a: Var) -> Result<Var> {
        let [n, c, h, w] = self.value(a).dims4()?;
        if h % 2 != 0 || w % 2 != 0 {
            return Err(Error::invalid(
                "pool_max2",
                format!("spatial size {h}×{w} must be even"),
            ));
        }
        let (data, argmax) = kernels::max_pool2(self.value(a).data(), n * c, h, w);
        Ok(self.record(
            &[n, c, h / 2, w / 2],
            data,
            Op::MaxPool2 { x: a, argmax },
            &[a],
        ))
    }

    pub fn upsample_nearest2(&mut self, a: Var) -> Result<Var> {
        let [n, c, h, w] = self.value(a).dims4()?;
        let data = kernels::upsample2(self.value(a).data(), n * c, h, w);
        Ok(self.record(&[n, c, 2 * h, 2 * w], data, Op::Upsample2(a), &[a]))
    }

    /// Concatenates NCHW tensors along the channel axis, in argument order.
    pub fn concat_channels(&mut self, parts: &[Var]) -> Result<Var> {
        const OP: &str = "concat_channels";
        let first = *parts
            .first()
            .ok_or_else(|| Error::invalid(OP, "nothing to concatenate"))?;
        let [n, _, h, w] = self.value(first).dims4()?;
        let mut total = 0;
        for &p in parts {
            let [pn, pc, ph, pw] = self.value(p).dims4()?;
            if (pn, ph, pw) != (n, h, w) {
                return Err(Error::ShapeMismatch {
                    op: OP,
                    left: self.shape(first).to_vec(),
                    right: self.shape(p).to_vec(),
                });
            }
            total += pc;
        }
        let plane = h * w;
        let mut data = Vec::with_capacity(n * total * plane);
        for b in 0..n {
            for &p in parts {
                let c = self.shape(p)[1];
                data.extend_from_slice(&self.value(p).data()[b * c * plane..(b + 1) * c * plane]);
            }
        }
        Ok(self.record(&[n, total, h, w], data, Op::Concat(parts.to_vec()), parts))
    }

    pub fn concat2(&mut self, a: Var, b: Var) -> Result<Var> {
        self.concat_channels(&[a, b])
    }

    /// Channels `start..start + len` of an NCHW tensor.
    pub fn slice_channels(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        let [n, c, h, w] = self.value(a).dims4()?;
        if start + len > c || len == 0 {
            return Err(Error::invalid(
                "slice_channels",
                format!("range {start}..{} outside {c} channels", start + len),
            ));
        }
        let plane = h * w;
        let src = self.value(a).data();
        let mut data = Vec::with_capacity(n * len * plane);
        for b in 0..n {
            data.extend_from_slice(&src[(b * c + start) * plane..(b * c + start + len) * plane]);
        }
        Ok(self.record(
            &[n, len, h, w],
            data,
            Op::SliceChannels { x: a, start },
            &[a],
        ))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).data().iter().sum();
        self.record(&[], vec![s], Op::Sum(a), &[a])
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let t = self.value(a);
        let m = t.data().iter().sum::<f64>() / t.len() as f64;
        self.record(&[], vec![m], Op::Mean(a), &[a])
    }

    pub fn l1_mean(&mut self, a: Var) -> Var {
        let t = self.value(a);
        let m = t.data().iter().map(|v| v.abs()).sum::<f64>() / t.len() as f64;
        self.record(&[], vec![m], Op::L1Mean(a), &[a])
    }

    /// Mean Bernoulli negative log-likelihood of `target` under
    /// probabilities `pred`, clamped to `[NLL_EPS, 1 - NLL_EPS]`.
    pub fn bernoulli_nll(&mut self, pred: Var, target: Var) -> Result<Var> {
        const OP: &str = "bernoulli_nll";
        self.same_shape(OP, pred, target)?;
        let p = self.value(pred).data();
        if let Some(bad) = p.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::invalid(
                OP,
                format!("probability {bad} outside [0, 1]"),
            ));
        }
        let t = self.value(target).data();
        let total: f64 = p
            .iter()
            .zip(t)
            .map(|(&p, &t)| {
                let p = p.clamp(NLL_EPS, 1.0 - NLL_EPS);
                -(t * p.ln() + (1.0 - t) * (1.0 - p).ln())
            })
            .sum();
        let loss = total / p.len() as f64;
        Ok(self.record(
            &[],
            vec![loss],
            Op::BernoulliNll { pred, target },
            &[pred, target],
        ))
    }

    /// Same loss as [`Tape::bernoulli_nll`] of `sigmoid(logits)`, evaluated in
    /// a form that stays finite and keeps its gradient at any logit.
    pub fn bernoulli_nll_with_logits(&mut self, logits: Var, target: Var) -> Result<Var> {
        self.same_shape("bernoulli_nll_with_logits", logits, target)?;
        let z = self.value(logits).data();
        let t = self.value(target).data();
        let total: f64 = z
            .iter()
            .zip(t)
            .map(|(&z, &t)| z.max(0.0) - t * z + (-z.abs()).exp().ln_1p())
            .sum();
        let loss = total / z.len() as f64;
        Ok(self.record(
            &[],
            vec![loss],
            Op::BceWithLogits { logits, target },
            &[logits, target],
        ))
    }

    pub fn mse(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("mse", a, b)?;
        let x = self.value(a).data();
        let y = self.value(b).data();
        let m = x.iter().zip(y).map(|(p, q)| (p - q) * (p - q)).sum::<f64>() / x.len() as f64;
        Ok(self.record(&[], vec![m], Op::Mse(a, b), &[a, b]))
    }

    /// Reverse-mode sweep from a scalar `loss`. Gradients are added to the
    /// `grad` buffer of every reachable leaf that requires one, so repeated
    /// calls accumulate until [`Tape::reset_grads`].
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        let shape = self.shape(loss);
        if self.value(loss).len() != 1 || shape.iter().any(|&d| d != 1) {
            return Err(Error::NotScalar(shape.to_vec()));
        }
        let mut adj: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        adj[loss.0] = Some(vec![1.0]);
        let mut leaf_grads = Vec::new();

        for i in (0..=loss.0).rev() {
            let Some(g) = adj[i].take() else { continue };
            let node = &self.nodes[i];
            if !node.needs_grad {
                continue;
            }
            let mut send = |v: Var, delta: Vec<f64>| {
                if !self.nodes[v.0].needs_grad {
                    return;
                }
                match &mut adj[v.0] {
                    Some(acc) => acc.iter_mut().zip(&delta).for_each(|(a, d)| *a += d),
                    slot @ None => *slot = Some(delta),
                }
            };
            let val = |v: Var| self.nodes[v.0].value.data();
            match &node.op {
                Op::Leaf => leaf_grads.push((i, g)),
                Op::Conv2d { x, w, b, geom } => {
                    if self.needs(*x) {
                        send(*x, kernels::conv_adjoint_input(&g, val(*w), geom));
                    }
                    if self.needs(*w) {
                        send(*w, kernels::conv_adjoint_weight(val(*x), &g, geom));
                    }
                    if let Some(b) = b {
                        let pix = geom.out_h * geom.out_w;
                        send(*b, kernels::channel_sums(&g, geom.out_ch, geom.batch, pix));
                    }
                }
                Op::ConvTranspose2d { x, w, b, geom } => {
                    if self.needs(*x) {
                        send(*x, kernels::conv_forward(&g, val(*w), geom));
                    }
                    if self.needs(*w) {
                        send(*w, kernels::conv_adjoint_weight(&g, val(*x), geom));
                    }
                    if let Some(b) = b {
                        let pix = geom.in_h * geom.in_w;
                        send(*b, kernels::channel_sums(&g, geom.in_ch, geom.batch, pix));
                    }
                }
                Op::Add(a, b) => {
                    send(*b, g.clone());
                    send(*a, g);
                }
                Op::Sub(a, b) => {
                    send(*b, g.iter().map(|v| -v).collect());
                    send(*a, g);
                }
                Op::Mul(a, b) => {
                    let (x, y) = (val(*a), val(*b));
                    send(*a, g.iter().zip(y).map(|(g, y)| g * y).collect());
                    send(*b, g.iter().zip(x).map(|(g, x)| g * x).collect());
                }
                Op::Scale(a, s) => send(*a, g.iter().map(|v| v * s).collect()),
                Op::Act(a, kind) => {
                    let x = val(*a);
                    let y = node.value.data();
                    let d: Vec<f64> = match kind {
                        Activation::Relu => g
                            .iter()
                            .zip(x)
                            .map(|(g, &x)| if x > 0.0 { *g } else { 0.0 })
                            .collect(),
                        Activation::Sigmoid => {
                            g.iter().zip(y).map(|(g, y)| g * y * (1.0 - y)).collect()
                        }
                        Activation::Tanh => {
                            g.iter().zip(y).map(|(g, y)| g * (1.0 - y * y)).collect()
                        }
                        Activation::HardClip01 => g
                            .iter()
                            .zip(x)
                            .map(|(g, &x)| if (0.0..=1.0).contains(&x) { *g } else { 0.0 })
                            .collect(),
                    };
                    send(*a, d);
                }
                Op::MaxPool2 { x, argmax } => {
                    let mut d = vec![0.0; val(*x).len()];
                    for (g, &j) in g.iter().zip(argmax) {
                        d[j] += g;
                    }
                    send(*x, d);
                }
                Op::Upsample2(a) => {
                    let [n, c, h, w] = self.nodes[a.0].value.dims4()?;
                    send(*a, kernels::upsample2_adjoint(&g, n * c, h, w));
                }
                Op::Concat(parts) => {
                    let [n, total, h, w] = node.value.dims4()?;
                    let plane = h * w;
                    let mut offset = 0;
                    for &p in parts {
                        let c = self.nodes[p.0].value.shape()[1];
                        let mut d = Vec::with_capacity(n * c * plane);
                        for b in 0..n {
                            let base = (b * total + offset) * plane;
                            d.extend_from_slice(&g[base..base + c * plane]);
                        }
                        offset += c;
                        send(p, d);
                    }
                }
                Op::SliceChannels { x, start } => {
                    let [n, c, h, w] = self.nodes[x.0].value.dims4()?;
                    let len = node.value.shape()[1];
                    let plane = h * w;
                    let mut d = vec![0.0; n * c * plane];
                    for b in 0..n {
                        let dst = (b * c + start) * plane;
                        d[dst..dst + len * plane]
                            .copy_from_slice(&g[b * len * plane..(b + 1) * len * plane]);
                    }
                    send(*x, d);
                }
                Op::Sum(a) => send(*a, vec![g[0]; val(*a).len()]),
                Op::Mean(a) => {
                    let n = val(*a).len();
                    send(*a, vec![g[0] / n as f64; n]);
                }
                Op::L1Mean(a) => {
                    let x = val(*a);
                    let s = g[0] / x.len() as f64;
                    send(
                        *a,
                        x.iter()
                            .map(|&v| {
                                if v > 0.0 {
                                    s
                                } else if v < 0.0 {
                                    -s
                                } else {
                                    0.0
                                }
                            })
                            .collect(),
                    );
                }
                Op::BernoulliNll { pred, target } => {
                    let (p, t) = (val(*pred), val(*target));
                    let s = g[0] / p.len() as f64;
                    if self.needs(*target) {
                        let d = p
                            .iter()
                            .map(|&p| {
                                let p = p.clamp(NLL_EPS, 1.0 - NLL_EPS);
                                s * ((1.0 - p).ln() - p.ln())
                            })
                            .collect();
                        send(*target, d);
                    }
                    let d = p
                        .iter()
                        .zip(t)
                        .map(|(&p, &t)| {
                            if (NLL_EPS..=1.0 - NLL_EPS).contains(&p) {
                                s * (p - t) / (p * (1.0 - p))
                            } else {
                                0.0
                            }
                        })
                        .collect();
                    send(*pred, d);
                }
                Op::BceWithLogits { logits, target } => {
                    let (z, t) = (val(*logits), val(*target));
                    let s = g[0] / z.len() as f64;
                    if self.needs(*target) {
                        send(*target, z.iter().map(|z| -s * z).collect());
                    }
                    let d = z
                        .iter()
                        .zip(t)
                        .map(|(&z, &t)| s * (sigmoid(z) - t))
                        .collect();
                    send(*logits, d);
                }
                Op::Mse(a, b) => {
                    let (x, y) = (val(*a), val(*b));
                    let s = 2.0 * g[0] / x.len() as f64;
                    let d: Vec<f64> = x.iter().zip(y).map(|(x, y)| s * (x - y)).collect();
                    send(*b, d.iter().map(|v| -v).collect());
                    send(*a, d);
                }
            }
        }

        for (i, g) in leaf_grads {
            self.nodes[i].value.accumulate_grad(&g);
        }
        Ok(())
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
