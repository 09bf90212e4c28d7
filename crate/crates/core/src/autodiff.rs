//! Layer-granular reverse-mode differentiation.
//!
//! A [`Tape`] records one entry per layer application together with whatever
//! the backward rule needs. Trainable values live in a [`ParamStore`] and are
//! referenced by [`ParamId`]; backward accumulates into each tensor's `grad`
//! unless the tensor is frozen. Complex buffers on the tape use the stacked
//! layout `[re; im]`.

use std::sync::Arc;

use crate::butterfly::{ButterflyStack, StackedDiagonalMatrix};
use crate::error::{Error, Result};
use crate::masknet::{self, GruCache, GruParams};
use crate::training::loss::{self, LossConfig};
use crate::butterfly::SplitComplex;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub usize);

/// A named trainable array with its gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
    pub grad: Vec<f64>,
    pub trainable: bool,
}

impl ParamTensor {
    pub fn new(name: impl Into<String>, shape: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        let name = name.into();
        let expected: usize = shape.iter().product();
        if expected != values.len() {
            return Err(Error::shape(format!(
                "tensor '{name}' has shape {shape:?} but {} values",
                values.len()
            )));
        }
        Ok(ParamTensor {
            grad: vec![0.0; values.len()],
            name,
            shape,
            values,
            trainable: true,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Owns every parameter tensor of a model, in registration order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    tensors: Vec<ParamTensor>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, tensor: ParamTensor) -> ParamId {
        self.tensors.push(tensor);
        ParamId(self.tensors.len() - 1)
    }

    pub fn get(&self, id: ParamId) -> &ParamTensor {
        &self.tensors[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut ParamTensor {
        &mut self.tensors[id.0]
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.tensors.iter().position(|t| t.name == name).map(ParamId)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &ParamTensor)> {
        self.tensors.iter().enumerate().map(|(i, t)| (ParamId(i), t))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut ParamTensor> {
        self.tensors.iter_mut()
    }

    /// Total number of real values across all tensors.
    pub fn value_count(&self) -> usize {
        self.tensors.iter().map(|t| t.len()).sum()
    }

    pub fn zero_grad(&mut self) {
        for t in &mut self.tensors {
            t.grad.iter_mut().for_each(|g| *g = 0.0);
        }
    }

    pub fn set_trainable(&mut self, id: ParamId, trainable: bool) {
        self.tensors[id.0].trainable = trainable;
    }

    fn grad_target(&mut self, id: ParamId) -> Option<&mut [f64]> {
        let t = &mut self.tensors[id.0];
        t.trainable.then_some(t.grad.as_mut_slice())
    }
}

/// Where a layer reads its weights from.
#[derive(Debug, Clone)]
pub enum Weights {
    Param(ParamId),
    Fixed(Arc<[f64]>),
}

impl Weights {
    fn values<'a>(&'a self, store: &'a ParamStore) -> &'a [f64] {
        match self {
            Weights::Param(id) => &store.get(*id).values,
            Weights::Fixed(v) => v,
        }
    }
}

#[derive(Debug)]
enum Op {
    Constant,
    Permute { x: NodeId, perm: Arc<[usize]> },
    Stage { x: NodeId, gather: Arc<[usize]>, weights: Weights },
    ConjScale { x: NodeId, scale: f64 },
    RealPart { x: NodeId },
    Window { x: NodeId, weights: Weights },
    Linear { x: NodeId, w: ParamId, b: Option<ParamId> },
    Gru { x: NodeId, h: NodeId, params: GruParams, cache: GruCache },
    Sigmoid { x: NodeId },
    Tanh { x: NodeId },
    Add { a: NodeId, b: NodeId },
    Mul { a: NodeId, b: NodeId },
    Slice { x: NodeId, start: usize },
    OverlapAdd { frames: Vec<NodeId>, hop: usize },
    WeightedSum { x: NodeId, weights: Vec<f64> },
    CompressedLoss { preds: Vec<NodeId>, targets: Vec<SplitComplex>, cfg: LossConfig },
}

#[derive(Debug)]
struct Node {
    value: Vec<f64>,
    op: Op,
}

/// Recording of one forward pass; consumed by exactly one backward pass.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

fn accumulate<'a>(grads: &'a mut [Option<Vec<f64>>], id: NodeId, len: usize) -> &'a mut [f64] {
    grads[id.0].get_or_insert_with(|| vec![0.0; len])
}

fn check_len(what: &str, got: usize, expected: usize) -> Result<()> {
    if got != expected {
        return Err(Error::shape(format!("{what}: expected {expected} values, got {got}")));
    }
    Ok(())
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
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

    pub fn value(&self, id: NodeId) -> &[f64] {
        &self.nodes[id.0].value
    }

    fn push(&mut self, value: Vec<f64>, op: Op) -> NodeId {
        self.nodes.push(Node { value, op });
        NodeId(self.nodes.len() - 1)
    }

    pub fn constant(&mut self, value: Vec<f64>) -> NodeId {
        self.push(value, Op::Constant)
    }

    /// Complex gather `y[i] = x[perm[i]]`; no parameters.
    pub fn permute(&mut self, x: NodeId, perm: &Arc<[usize]>) -> Result<NodeId> {
        let n = perm.len();
        let xv = self.value(x);
        check_len("permute", xv.len(), 2 * n)?;
        let mut y = vec![0.0; 2 * n];
        for (i, &p) in perm.iter().enumerate() {
            y[i] = xv[p];
            y[n + i] = xv[n + p];
        }
        Ok(self.push(y, Op::Permute { x, perm: perm.clone() }))
    }

    /// One sparse butterfly factor. Weights are stacked `[re (2n); im (2n)]`.
    pub fn sparse_stage(
        &mut self,
        store: &ParamStore,
        x: NodeId,
        gather: &Arc<[usize]>,
        weights: Weights,
    ) -> Result<NodeId> {
        let n = gather.len() / 2;
        let xv = self.value(x);
        check_len("sparse stage input", xv.len(), 2 * n)?;
        let w = weights.values(store);
        check_len("sparse stage weights", w.len(), 4 * n)?;
        let (v_re, v_im) = w.split_at(2 * n);
        let (x_re, x_im) = xv.split_at(n);
        let mut y = vec![0.0; 2 * n];
        let (y_re, y_im) = y.split_at_mut(n);
        StackedDiagonalMatrix::apply_into(v_re, v_im, gather, x_re, x_im, y_re, y_im);
        Ok(self.push(
            y,
            Op::Stage {
                x,
                gather: gather.clone(),
                weights,
            },
        ))
    }

    /// `scale · conj(x)`.
    pub fn conj_scale(&mut self, x: NodeId, scale: f64) -> Result<NodeId> {
        let xv = self.value(x);
        if xv.len() % 2 != 0 {
            return Err(Error::shape("complex node must have even length"));
        }
        let n = xv.len() / 2;
        let y = xv
            .iter()
            .enumerate()
            .map(|(i, v)| if i < n { v * scale } else { -v * scale })
            .collect();
        Ok(self.push(y, Op::ConjScale { x, scale }))
    }

    pub fn real_part(&mut self, x: NodeId) -> Result<NodeId> {
        let xv = self.value(x);
        if xv.len() % 2 != 0 {
            return Err(Error::shape("complex node must have even length"));
        }
        let y = xv[..xv.len() / 2].to_vec();
        Ok(self.push(y, Op::RealPart { x }))
    }

    /// Diagonal layer `y = w ⊙ x`.
    pub fn window(&mut self, store: &ParamStore, x: NodeId, weights: Weights) -> Result<NodeId> {
        let xv = self.value(x);
        let w = weights.values(store);
        check_len("window", xv.len(), w.len())?;
        let y = xv.iter().zip(w).map(|(a, b)| a * b).collect();
        Ok(self.push(y, Op::Window { x, weights }))
    }

    /// `y = W x + b` with `W` stored row-major as `[out, in]`.
    pub fn linear(
        &mut self,
        store: &ParamStore,
        x: NodeId,
        w: ParamId,
        b: Option<ParamId>,
    ) -> Result<NodeId> {
        let wt = store.get(w);
        let [rows, cols] = wt.shape[..] else {
            return Err(Error::shape(format!("linear weight '{}' must be 2-D", wt.name)));
        };
        let xv = self.value(x);
        check_len("linear input", xv.len(), cols)?;
        let mut y = vec![0.0; rows];
        masknet::matvec_into(&wt.values, xv, &mut y);
        if let Some(b) = b {
            let bias = &store.get(b).values;
            check_len("linear bias", bias.len(), rows)?;
            y.iter_mut().zip(bias).for_each(|(y, b)| *y += b);
        }
        Ok(self.push(y, Op::Linear { x, w, b }))
    }

    /// One recurrent step; `h` is the previous hidden state node.
    pub fn gru_step(
        &mut self,
        store: &ParamStore,
        x: NodeId,
        h: NodeId,
        params: &GruParams,
    ) -> Result<NodeId> {
        let (out, cache) = masknet::gru_forward(store, params, self.value(x), self.value(h))?;
        Ok(self.push(
            out,
            Op::Gru {
                x,
                h,
                params: params.clone(),
                cache,
            },
        ))
    }

    pub fn sigmoid(&mut self, x: NodeId) -> NodeId {
        let y = self.value(x).iter().map(|&v| sigmoid(v)).collect();
        self.push(y, Op::Sigmoid { x })
    }

    pub fn tanh(&mut self, x: NodeId) -> NodeId {
        let y = self.value(x).iter().map(|v| v.tanh()).collect();
        self.push(y, Op::Tanh { x })
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        check_len("add", self.value(b).len(), self.value(a).len())?;
        let y = self.value(a).iter().zip(self.value(b)).map(|(p, q)| p + q).collect();
        Ok(self.push(y, Op::Add { a, b }))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        check_len("mul", self.value(b).len(), self.value(a).len())?;
        let y = self.value(a).iter().zip(self.value(b)).map(|(p, q)| p * q).collect();
        Ok(self.push(y, Op::Mul { a, b }))
    }

    pub fn slice(&mut self, x: NodeId, start: usize, len: usize) -> Result<NodeId> {
        let xv = self.value(x);
        if start + len > xv.len() {
            return Err(Error::shape(format!(
                "slice {start}..{} out of range for {} values",
                start + len,
                xv.len()
            )));
        }
        let y = xv[start..start + len].to_vec();
        Ok(self.push(y, Op::Slice { x, start }))
    }

    /// Sums frame `f` into `out[f·hop ..]` of a zero buffer of `out_len`.
    pub fn overlap_add(&mut self, frames: Vec<NodeId>, hop: usize, out_len: usize) -> Result<NodeId> {
        let mut y = vec![0.0; out_len];
        for (f, &id) in frames.iter().enumerate() {
            let v = self.value(id);
            let start = f * hop;
            if start + v.len() > out_len {
                return Err(Error::shape(format!(
                    "frame {f} ends at {} past output length {out_len}",
                    start + v.len()
                )));
            }
            y[start..start + v.len()]
                .iter_mut()
                .zip(v)
                .for_each(|(o, s)| *o += s);
        }
        Ok(self.push(y, Op::OverlapAdd { frames, hop }))
    }

    /// Scalar `Σ weights[i] · x[i]`.
    pub fn weighted_sum(&mut self, x: NodeId, weights: Vec<f64>) -> Result<NodeId> {
        check_len("weighted sum", weights.len(), self.value(x).len())?;
        let s = self.value(x).iter().zip(&weights).map(|(a, b)| a * b).sum();
        Ok(self.push(vec![s], Op::WeightedSum { x, weights }))
    }

    /// Scalar compressed spectral loss of `preds` (stacked complex) against `targets`.
    pub fn compressed_loss(
        &mut self,
        preds: Vec<NodeId>,
        targets: Vec<SplitComplex>,
        cfg: LossConfig,
    ) -> Result<NodeId> {
        let pred_values: Vec<&[f64]> = preds.iter().map(|&p| self.value(p)).collect();
        let value = loss::stacked_loss(&pred_values, &targets, &cfg)?;
        Ok(self.push(vec![value], Op::CompressedLoss { preds, targets, cfg }))
    }

    /// Backward from a scalar node with seed 1.
    pub fn backward(&mut self, store: &mut ParamStore, output: NodeId) -> Result<()> {
        self.backward_with(store, output, &[1.0])
    }

    /// Reverse pass seeded with `seed = ∂L/∂output`. Clears the tape.
    pub fn backward_with(&mut self, store: &mut ParamStore, output: NodeId, seed: &[f64]) -> Result<()> {
        if output.0 >= self.nodes.len() {
            return Err(Error::Tape(format!(
                "node {} was not recorded by a forward pass on this tape",
                output.0
            )));
        }
        check_len("backward seed", seed.len(), self.value(output).len())?;

        let nodes = std::mem::take(&mut self.nodes);
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; output.0 + 1];
        grads[output.0] = Some(seed.to_vec());

        for idx in (0..=output.0).rev() {
            let Some(g) = grads[idx].take() else {
                continue;
            };
            let node = &nodes[idx];
            match &node.op {
                Op::Constant => {}
                Op::Permute { x, perm } => {
                    let n = perm.len();
                    let gx = accumulate(&mut grads, *x, 2 * n);
                    for (i, &p) in perm.iter().enumerate() {
                        gx[p] += g[i];
                        gx[n + p] += g[n + i];
                    }
                }
                Op::Stage { x, gather, weights } => {
                    let n = gather.len() / 2;
                    let xv = &nodes[x.0].value;
                    let (g_re, g_im) = g.split_at(n);
                    if let Weights::Param(id) = weights {
                        if let Some(gw) = store.grad_target(*id) {
                            let (gw_re, gw_im) = gw.split_at_mut(2 * n);
                            for (slot, &c) in gather.iter().enumerate() {
                                let r = slot / 2;
                                let (xr, xi) = (xv[c], xv[n + c]);
                                gw_re[slot] += g_re[r] * xr + g_im[r] * xi;
                                gw_im[slot] += -g_re[r] * xi + g_im[r] * xr;
                            }
                        }
                    }
                    let w = weights.values(store);
                    let (v_re, v_im) = w.split_at(2 * n);
                    let gx = accumulate(&mut grads, *x, 2 * n);
                    let (gx_re, gx_im) = gx.split_at_mut(n);
                    StackedDiagonalMatrix::adjoint_accumulate(
                        v_re, v_im, gather, g_re, g_im, gx_re, gx_im,
                    );
                }
                Op::ConjScale { x, scale } => {
                    let n = g.len() / 2;
                    let gx = accumulate(&mut grads, *x, 2 * n);
                    for i in 0..n {
                        gx[i] += scale * g[i];
                        gx[n + i] -= scale * g[n + i];
                    }
                }
                Op::RealPart { x } => {
                    let gx = accumulate(&mut grads, *x, 2 * g.len());
                    gx[..g.len()].iter_mut().zip(&g).for_each(|(a, b)| *a += b);
                }
                Op::Window { x, weights } => {
                    let xv = &nodes[x.0].value;
                    if let Weights::Param(id) = weights {
                        if let Some(gw) = store.grad_target(*id) {
                            for i in 0..g.len() {
                                gw[i] += g[i] * xv[i];
                            }
                        }
                    }
                    let w = weights.values(store);
                    let gx = accumulate(&mut grads, *x, g.len());
                    for i in 0..g.len() {
                        gx[i] += g[i] * w[i];
                    }
                }
                Op::Linear { x, w, b } => {
                    let xv = &nodes[x.0].value;
                    let cols = xv.len();
                    if let Some(gw) = store.grad_target(*w) {
                        for (r, &gr) in g.iter().enumerate() {
                            if gr == 0.0 {
                                continue;
                            }
                            let row = &mut gw[r * cols..(r + 1) * cols];
                            row.iter_mut().zip(xv).for_each(|(a, xi)| *a += gr * xi);
                        }
                    }
                    if let Some(b) = b {
                        if let Some(gb) = store.grad_target(*b) {
                            gb.iter_mut().zip(&g).for_each(|(a, gr)| *a += gr);
                        }
                    }
                    let wv = &store.get(*w).values;
                    let gx = accumulate(&mut grads, *x, cols);
                    masknet::matvec_transpose_accumulate(wv, &g, gx);
                }
                Op::Gru { x, h, params, cache } => {
                    let xv = &nodes[x.0].value;
                    let hv = &nodes[h.0].value;
                    let (gx, gh) = masknet::gru_backward(store, params, cache, xv, hv, &g);
                    accumulate(&mut grads, *x, gx.len())
                        .iter_mut()
                        .zip(&gx)
                        .for_each(|(a, b)| *a += b);
                    accumulate(&mut grads, *h, gh.len())
                        .iter_mut()
                        .zip(&gh)
                        .for_each(|(a, b)| *a += b);
                }
                Op::Sigmoid { x } => {
                    let y = &node.value;
                    let gx = accumulate(&mut grads, *x, g.len());
                    for i in 0..g.len() {
                        gx[i] += g[i] * y[i] * (1.0 - y[i]);
                    }
                }
                Op::Tanh { x } => {
                    let y = &node.value;
                    let gx = accumulate(&mut grads, *x, g.len());
                    for i in 0..g.len() {
                        gx[i] += g[i] * (1.0 - y[i] * y[i]);
                    }
                }
                Op::Add { a, b } => {
                    for id in [a, b] {
                        accumulate(&mut grads, *id, g.len())
                            .iter_mut()
                            .zip(&g)
                            .for_each(|(p, q)| *p += q);
                    }
                }
                Op::Mul { a, b } => {
                    let (av, bv) = (&nodes[a.0].value, &nodes[b.0].value);
                    let ga = accumulate(&mut grads, *a, g.len());
                    for i in 0..g.len() {
                        ga[i] += g[i] * bv[i];
                    }
                    let gb = accumulate(&mut grads, *b, g.len());
                    for i in 0..g.len() {
                        gb[i] += g[i] * av[i];
                    }
                }
                Op::Slice { x, start } => {
                    let len = nodes[x.0].value.len();
                    let gx = accumulate(&mut grads, *x, len);
                    gx[*start..*start + g.len()]
                        .iter_mut()
                        .zip(&g)
                        .for_each(|(a, b)| *a += b);
                }
                Op::OverlapAdd { frames, hop } => {
                    for (f, id) in frames.iter().enumerate() {
                        let len = nodes[id.0].value.len();
                        let start = f * hop;
                        accumulate(&mut grads, *id, len)
                            .iter_mut()
                            .zip(&g[start..start + len])
                            .for_each(|(a, b)| *a += b);
                    }
                }
                Op::WeightedSum { x, weights } => {
                    let gx = accumulate(&mut grads, *x, weights.len());
                    gx.iter_mut().zip(weights).for_each(|(a, w)| *a += g[0] * w);
                }
                Op::CompressedLoss { preds, targets, cfg } => {
                    let pred_values: Vec<&[f64]> = preds.iter().map(|p| nodes[p.0].value.as_slice()).collect();
                    let pred_grads = loss::stacked_loss_grad(&pred_values, targets, cfg);
                    for (p, pg) in preds.iter().zip(pred_grads) {
                        accumulate(&mut grads, *p, pg.len())
                            .iter_mut()
                            .zip(&pg)
                            .for_each(|(a, b)| *a += g[0] * b);
                    }
                }
            }
        }
        Ok(())
    }
}

/// Butterfly stack whose factor values come from [`Weights`], applied on a tape.
#[derive(Debug, Clone)]
pub struct FftLayer {
    template: ButterflyStack,
    permutation: Arc<[usize]>,
    gathers: Vec<Arc<[usize]>>,
    weights: Vec<Weights>,
}

fn stacked_factor_values(factor: &StackedDiagonalMatrix) -> Vec<f64> {
    factor.values.to_stacked()
}

impl FftLayer {
    /// Registers one tensor per factor, named `{prefix}.stage{k}`, shape `[2, 2n]`.
    pub fn trainable(store: &mut ParamStore, prefix: &str, stack: &ButterflyStack) -> Result<Self> {
        let mut weights = Vec::with_capacity(stack.factors.len());
        for factor in &stack.factors {
            let t = ParamTensor::new(
                format!("{prefix}.stage{}", factor.stage()),
                vec![2, factor.entry_count()],
                stacked_factor_values(factor),
            )?;
            weights.push(Weights::Param(store.add(t)));
        }
        Ok(Self::with_weights(stack, weights))
    }

    /// Same stack with constant weights (no parameters, gradients still pass through).
    pub fn fixed(stack: &ButterflyStack) -> Self {
        let weights = stack
            .factors
            .iter()
            .map(|f| Weights::Fixed(stacked_factor_values(f).into()))
            .collect();
        Self::with_weights(stack, weights)
    }

    fn with_weights(stack: &ButterflyStack, weights: Vec<Weights>) -> Self {
        FftLayer {
            template: stack.clone(),
            permutation: stack.permutation().into(),
            gathers: stack.factors.iter().map(|f| f.gather().into()).collect(),
            weights,
        }
    }

    pub fn n(&self) -> usize {
        self.template.n()
    }

    pub fn param_ids(&self) -> Vec<ParamId> {
        self.weights
            .iter()
            .filter_map(|w| match w {
                Weights::Param(id) => Some(*id),
                Weights::Fixed(_) => None,
            })
            .collect()
    }

    /// `W_m ··· W_1 · B_n x` on the tape; `x` is a stacked complex node.
    pub fn forward(&self, store: &ParamStore, tape: &mut Tape, x: NodeId) -> Result<NodeId> {
        let mut cur = tape.permute(x, &self.permutation)?;
        for (gather, w) in self.gathers.iter().zip(&self.weights) {
            cur = tape.sparse_stage(store, cur, gather, w.clone())?;
        }
        Ok(cur)
    }

    /// `conj(forward(conj(X))) / n` with this layer's own weights.
    pub fn inverse(&self, store: &ParamStore, tape: &mut Tape, x: NodeId) -> Result<NodeId> {
        let conj = tape.conj_scale(x, 1.0)?;
        let y = self.forward(store, tape, conj)?;
        tape.conj_scale(y, 1.0 / self.n() as f64)
    }

    /// Snapshot of the current values as a plain stack.
    pub fn to_stack(&self, store: &ParamStore) -> ButterflyStack {
        let mut stack = self.template.clone();
        for (factor, w) in stack.factors.iter_mut().zip(&self.weights) {
            factor.values = SplitComplex::from_stacked(w.values(store))
                .expect("factor weights have even length");
        }
        stack
    }
}

/// Periodic Hann window `0.5·(1 − cos(2πi/n))`.
pub fn periodic_hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 * (1.0 - (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos()))
        .collect()
}

/// Diagonal analysis or synthesis window; unconstrained during training.
#[derive(Debug, Clone)]
pub struct TrainableWindow {
    pub n: usize,
    pub w: ParamId,
}

impl TrainableWindow {
    pub fn hann(store: &mut ParamStore, name: &str, n: usize) -> Result<Self> {
        Self::with_values(store, name, periodic_hann(n))
    }

    pub fn with_values(store: &mut ParamStore, name: &str, values: Vec<f64>) -> Result<Self> {
        let n = values.len();
        let w = store.add(ParamTensor::new(name, vec![n], values)?);
        Ok(TrainableWindow { n, w })
    }

    pub fn forward(&self, store: &ParamStore, tape: &mut Tape, frame: NodeId) -> Result<NodeId> {
        tape.window(store, frame, Weights::Param(self.w))
    }
}

/// Central-difference gradient of a plain function of a vector.
pub fn finite_diff_gradient<F>(mut f: F, point: &[f64], eps: f64) -> Vec<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut probe = point.to_vec();
    (0..point.len())
        .map(|i| {
            probe[i] = point[i] + eps;
            let plus = f(&probe);
            probe[i] = point[i] - eps;
            let minus = f(&probe);
            probe[i] = point[i];
            (plus - minus) / (2.0 * eps)
        })
        .collect()
}

/// Absolute differences at or below this count as agreement.
pub const GRAD_CHECK_ABS_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// `(tensor name, flat index, analytic, numeric)` of the worst coordinate.
    pub worst: Option<(String, usize, f64, f64)>,
    pub checked: usize,
}

/// Relative disagreement between an analytic and a numeric derivative.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let diff = (analytic - numeric).abs();
    if diff <= GRAD_CHECK_ABS_FLOOR {
        0.0
    } else {
        diff / analytic.abs().max(numeric.abs())
    }
}

/// Compares the gradients already stored in `store` against central
/// differences of `loss`, over `coords` (or every trainable coordinate).
pub fn finite_diff_check<F>(
    store: &mut ParamStore,
    coords: Option<&[(ParamId, usize)]>,
    eps: f64,
    mut loss: F,
) -> Result<GradCheckReport>
where
    F: FnMut(&ParamStore) -> Result<f64>,
{
    let all: Vec<(ParamId, usize)>;
    let coords = match coords {
        Some(c) => c,
        None => {
            all = store
                .iter()
                .filter(|(_, t)| t.trainable)
                .flat_map(|(id, t)| (0..t.len()).map(move |i| (id, i)))
                .collect();
            &all
        }
    };

    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: None,
        checked: 0,
    };
    for &(id, i) in coords {
        let analytic = store.get(id).grad[i];
        let original = store.get(id).values[i];
        store.get_mut(id).values[i] = original + eps;
        let plus = loss(store)?;
        store.get_mut(id).values[i] = original - eps;
        let minus = loss(store)?;
        store.get_mut(id).values[i] = original;
        let numeric = (plus - minus) / (2.0 * eps);

        let err = relative_error(analytic, numeric);
        report.checked += 1;
        if report.worst.is_none() || err > report.max_rel_error {
            report.max_rel_error = err;
            report.worst = Some((store.get(id).name.clone(), i, analytic, numeric));
        }
    }
    Ok(report)
}
