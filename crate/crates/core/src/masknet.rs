//! Causal mask estimator: linear → GRU → linear → sigmoid.
//!
//! Input per frame is the transform output with real parts stacked on top of
//! imaginary parts (`2n` values). Output is the real mask stacked on top of the
//! imaginary mask, also `2n` values, each in `(0, 1)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{NodeId, ParamId, ParamStore, ParamTensor, Tape};
use crate::butterfly::SplitComplex;
use crate::error::{Error, Result};

/// Dot product with eight independent partial sums so the loop vectorizes.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 8];
    let (a8, a_rest) = a.split_at(a.len() - a.len() % 8);
    let (b8, b_rest) = b.split_at(a8.len());
    for (ca, cb) in a8.chunks_exact(8).zip(b8.chunks_exact(8)) {
        for k in 0..8 {
            acc[k] += ca[k] * cb[k];
        }
    }
    let tail: f64 = a_rest.iter().zip(b_rest).map(|(p, q)| p * q).sum();
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

/// `y = W x` with `W` row-major `[y.len(), x.len()]`.
pub(crate) fn matvec_into(w: &[f64], x: &[f64], y: &mut [f64]) {
    let cols = x.len();
    for (r, out) in y.iter_mut().enumerate() {
        *out = dot(&w[r * cols..(r + 1) * cols], x);
    }
}

/// `out += Wᵀ g`.
pub(crate) fn matvec_transpose_accumulate(w: &[f64], g: &[f64], out: &mut [f64]) {
    let cols = out.len();
    for (r, &gr) in g.iter().enumerate() {
        if gr == 0.0 {
            continue;
        }
        out.iter_mut()
            .zip(&w[r * cols..(r + 1) * cols])
            .for_each(|(o, a)| *o += gr * a);
    }
}

/// `G += g xᵀ`.
fn outer_accumulate(grad: &mut [f64], g: &[f64], x: &[f64]) {
    let cols = x.len();
    for (r, &gr) in g.iter().enumerate() {
        grad[r * cols..(r + 1) * cols]
            .iter_mut()
            .zip(x)
            .for_each(|(a, xi)| *a += gr * xi);
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Handles to the gate weights of one GRU layer.
///
/// Input weights are `[hidden, input]`, recurrent weights `[hidden, hidden]`,
/// one bias per gate.
#[derive(Debug, Clone, PartialEq)]
pub struct GruParams {
    pub input: usize,
    pub hidden: usize,
    pub w_update: ParamId,
    pub u_update: ParamId,
    pub b_update: ParamId,
    pub w_reset: ParamId,
    pub u_reset: ParamId,
    pub b_reset: ParamId,
    pub w_cand: ParamId,
    pub u_cand: ParamId,
    pub b_cand: ParamId,
}

impl GruParams {
    pub fn ids(&self) -> [ParamId; 9] {
        [
            self.w_update,
            self.u_update,
            self.b_update,
            self.w_reset,
            self.u_reset,
            self.b_reset,
            self.w_cand,
            self.u_cand,
            self.b_cand,
        ]
    }
}

/// Gate activations saved by the forward step.
#[derive(Debug, Clone, PartialEq)]
pub struct GruCache {
    update: Vec<f64>,
    reset: Vec<f64>,
    cand: Vec<f64>,
    reset_h: Vec<f64>,
}

/// Hidden state carried between frames; zeros at sequence start.
#[derive(Debug, Clone, PartialEq)]
pub struct GruState {
    pub h: Vec<f64>,
}

impl GruState {
    pub fn zeros(hidden: usize) -> Self {
        GruState {
            h: vec![0.0; hidden],
        }
    }
}

fn gate_preactivation(store: &ParamStore, w: ParamId, u: ParamId, b: ParamId, x: &[f64], h: &[f64]) -> Vec<f64> {
    let mut a = vec![0.0; h.len()];
    let mut tmp = vec![0.0; h.len()];
    matvec_into(&store.get(w).values, x, &mut a);
    matvec_into(&store.get(u).values, h, &mut tmp);
    a.iter_mut()
        .zip(&tmp)
        .zip(&store.get(b).values)
        .for_each(|((a, t), b)| *a += t + b);
    a
}

/// z = σ(W_z x + U_z h + b_z), r = σ(W_r x + U_r h + b_r),
/// c = tanh(W_c x + U_c (r ⊙ h) + b_c), h' = (1 − z) ⊙ h + z ⊙ c.
pub(crate) fn gru_forward(
    store: &ParamStore,
    p: &GruParams,
    x: &[f64],
    h: &[f64],
) -> Result<(Vec<f64>, GruCache)> {
    if x.len() != p.input || h.len() != p.hidden {
        return Err(Error::shape(format!(
            "GRU expects input {} and state {}, got {} and {}",
            p.input,
            p.hidden,
            x.len(),
            h.len()
        )));
    }
    let update: Vec<f64> = gate_preactivation(store, p.w_update, p.u_update, p.b_update, x, h)
        .into_iter()
        .map(sigmoid)
        .collect();
    let reset: Vec<f64> = gate_preactivation(store, p.w_reset, p.u_reset, p.b_reset, x, h)
        .into_iter()
        .map(sigmoid)
        .collect();
    let reset_h: Vec<f64> = reset.iter().zip(h).map(|(r, h)| r * h).collect();
    let cand: Vec<f64> = gate_preactivation(store, p.w_cand, p.u_cand, p.b_cand, x, &reset_h)
        .into_iter()
        .map(f64::tanh)
        .collect();
    let out = (0..p.hidden)
        .map(|i| (1.0 - update[i]) * h[i] + update[i] * cand[i])
        .collect();
    Ok((
        out,
        GruCache {
            update,
            reset,
            cand,
            reset_h,
        },
    ))
}

/// Returns `(∂L/∂x, ∂L/∂h)` and accumulates parameter gradients.
pub(crate) fn gru_backward(
    store: &mut ParamStore,
    p: &GruParams,
    cache: &GruCache,
    x: &[f64],
    h: &[f64],
    g: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    let d = p.hidden;
    let GruCache {
        update,
        reset,
        cand,
        reset_h,
    } = cache;
    let mut gx = vec![0.0; p.input];
    let mut gh: Vec<f64> = (0..d).map(|i| g[i] * (1.0 - update[i])).collect();

    let d_cand: Vec<f64> = (0..d)
        .map(|i| g[i] * update[i] * (1.0 - cand[i] * cand[i]))
        .collect();
    let d_update: Vec<f64> = (0..d)
        .map(|i| g[i] * (cand[i] - h[i]) * update[i] * (1.0 - update[i]))
        .collect();

    // candidate gate
    let mut d_reset_h = vec![0.0; d];
    matvec_transpose_accumulate(&store.get(p.w_cand).values, &d_cand, &mut gx);
    matvec_transpose_accumulate(&store.get(p.u_cand).values, &d_cand, &mut d_reset_h);
    let d_reset: Vec<f64> = (0..d)
        .map(|i| d_reset_h[i] * h[i] * reset[i] * (1.0 - reset[i]))
        .collect();
    for i in 0..d {
        gh[i] += d_reset_h[i] * reset[i];
    }

    for (w, u, da) in [
        (p.w_update, p.u_update, &d_update),
        (p.w_reset, p.u_reset, &d_reset),
    ] {
        matvec_transpose_accumulate(&store.get(w).values, da, &mut gx);
        matvec_transpose_accumulate(&store.get(u).values, da, &mut gh);
    }

    let grads = [
        (p.w_update, &d_update, x),
        (p.u_update, &d_update, h),
        (p.w_reset, &d_reset, x),
        (p.u_reset, &d_reset, h),
        (p.w_cand, &d_cand, x),
        (p.u_cand, &d_cand, reset_h.as_slice()),
    ];
    for (id, da, input) in grads {
        let t = store.get_mut(id);
        if t.trainable {
            outer_accumulate(&mut t.grad, da, input);
        }
    }
    for (id, da) in [
        (p.b_update, &d_update),
        (p.b_reset, &d_reset),
        (p.b_cand, &d_cand),
    ] {
        let t = store.get_mut(id);
        if t.trainable {
            t.grad.iter_mut().zip(da.iter()).for_each(|(a, b)| *a += b);
        }
    }
    (gx, gh)
}

/// One recurrent step outside of any tape.
pub fn gru_step(store: &ParamStore, params: &GruParams, x: &[f64], state: &GruState) -> Result<GruState> {
    gru_forward(store, params, x, &state.h).map(|(h, _)| GruState { h })
}

/// Handles to every tensor of the mask network.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskNet {
    pub n: usize,
    pub hidden: usize,
    pub linear1_w: ParamId,
    pub linear1_b: ParamId,
    pub gru: GruParams,
    pub linear2_w: ParamId,
    pub linear2_b: ParamId,
}

fn uniform_tensor(rng: &mut ChaCha8Rng, name: String, rows: usize, cols: usize) -> Result<ParamTensor> {
    let bound = 1.0 / (cols as f64).sqrt();
    let values = (0..rows * cols)
        .map(|_| rng.random_range(-bound..=bound))
        .collect();
    ParamTensor::new(name, vec![rows, cols], values)
}

fn zero_tensor(name: String, len: usize) -> Result<ParamTensor> {
    ParamTensor::new(name, vec![len], vec![0.0; len])
}

/// Registers the mask network in `store`. Weights are uniform in
/// `±1/√fan_in`, biases zero; identical seeds give identical values.
pub fn init_masknet(store: &mut ParamStore, n: usize, hidden: usize, seed: u64) -> Result<MaskNet> {
    if n == 0 || hidden == 0 {
        return Err(Error::shape("mask network sizes must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let io = 2 * n;
    let linear1_w = store.add(uniform_tensor(&mut rng, "masknet.linear1.weight".into(), hidden, io)?);
    let linear1_b = store.add(zero_tensor("masknet.linear1.bias".into(), hidden)?);

    let mut gate = |gate: &str| -> Result<(ParamId, ParamId, ParamId)> {
        let w = store.add(uniform_tensor(&mut rng, format!("masknet.gru.{gate}.input"), hidden, hidden)?);
        let u = store.add(uniform_tensor(&mut rng, format!("masknet.gru.{gate}.recurrent"), hidden, hidden)?);
        let b = store.add(zero_tensor(format!("masknet.gru.{gate}.bias"), hidden)?);
        Ok((w, u, b))
    };
    let (w_update, u_update, b_update) = gate("update")?;
    let (w_reset, u_reset, b_reset) = gate("reset")?;
    let (w_cand, u_cand, b_cand) = gate("candidate")?;

    let linear2_w = store.add(uniform_tensor(&mut rng, "masknet.linear2.weight".into(), io, hidden)?);
    let linear2_b = store.add(zero_tensor("masknet.linear2.bias".into(), io)?);

    Ok(MaskNet {
        n,
        hidden,
        linear1_w,
        linear1_b,
        gru: GruParams {
            input: hidden,
            hidden,
            w_update,
            u_update,
            b_update,
            w_reset,
            u_reset,
            b_reset,
            w_cand,
            u_cand,
            b_cand,
        },
        linear2_w,
        linear2_b,
    })
}

impl MaskNet {
    pub fn param_ids(&self) -> Vec<ParamId> {
        let mut ids = vec![self.linear1_w, self.linear1_b];
        ids.extend(self.gru.ids());
        ids.extend([self.linear2_w, self.linear2_b]);
        ids
    }

    pub fn parameter_count(&self, store: &ParamStore) -> usize {
        self.param_ids().iter().map(|&id| store.get(id).len()).sum()
    }

    /// Closed-form count for transform size `n` and hidden size `d`.
    pub fn expected_parameter_count(n: usize, d: usize) -> usize {
        (2 * n * d + d) + 3 * (d * d + d * d + d) + (d * 2 * n + 2 * n)
    }

    /// Masks for one frame; returns `(mask node, new hidden state node)`.
    pub fn step_on_tape(
        &self,
        store: &ParamStore,
        tape: &mut Tape,
        coeffs: NodeId,
        state: NodeId,
    ) -> Result<(NodeId, NodeId)> {
        let hidden_in = tape.linear(store, coeffs, self.linear1_w, Some(self.linear1_b))?;
        let h = tape.gru_step(store, hidden_in, state, &self.gru)?;
        let logits = tape.linear(store, h, self.linear2_w, Some(self.linear2_b))?;
        Ok((tape.sigmoid(logits), h))
    }

    /// Masks for a whole sequence of stacked coefficient nodes, in order.
    pub fn forward_on_tape(&self, store: &ParamStore, tape: &mut Tape, coeffs: &[NodeId]) -> Result<Vec<NodeId>> {
        let mut state = tape.constant(vec![0.0; self.hidden]);
        let mut masks = Vec::with_capacity(coeffs.len());
        for &c in coeffs {
            let (m, h) = self.step_on_tape(store, tape, c, state)?;
            masks.push(m);
            state = h;
        }
        Ok(masks)
    }
}

/// Real and imaginary masks for one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameMasks {
    pub real: Vec<f64>,
    pub imag: Vec<f64>,
}

/// Runs the network over a sequence of spectra (no gradients kept).
pub fn masknet_forward(net: &MaskNet, store: &ParamStore, coeffs: &[SplitComplex]) -> Result<Vec<FrameMasks>> {
    let mut tape = Tape::new();
    let mut nodes = Vec::with_capacity(coeffs.len());
    for c in coeffs {
        if c.len() != net.n {
            return Err(Error::shape(format!(
                "mask network expects {} bins, got {}",
                net.n,
                c.len()
            )));
        }
        nodes.push(tape.constant(c.to_stacked()));
    }
    let masks = net.forward_on_tape(store, &mut tape, &nodes)?;
    Ok(masks
        .into_iter()
        .map(|m| {
            let (real, imag) = tape.value(m).split_at(net.n);
            FrameMasks {
                real: real.to_vec(),
                imag: imag.to_vec(),
            }
        })
        .collect())
}

/// Independent gains on the real and imaginary parts (not a complex product).
pub fn apply_masks(coeffs: &SplitComplex, mask_re: &[f64], mask_im: &[f64]) -> Result<SplitComplex> {
    if mask_re.len() != coeffs.len() || mask_im.len() != coeffs.len() {
        return Err(Error::shape(format!(
            "{} coefficients but masks of {} and {}",
            coeffs.len(),
            mask_re.len(),
            mask_im.len()
        )));
    }
    Ok(SplitComplex {
        re: coeffs.re.iter().zip(mask_re).map(|(c, m)| c * m).collect(),
        im: coeffs.im.iter().zip(mask_im).map(|(c, m)| c * m).collect(),
    })
}
