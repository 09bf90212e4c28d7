//! Framing, trainable analysis/synthesis and overlap-add, plus the complete
//! enhancement model that ties the front-end, mask network and back-end
//! together.

use crate::autodiff::{
    periodic_hann, FftLayer, NodeId, ParamId, ParamStore, Tape, TrainableWindow, Weights,
};
use crate::butterfly::{build_butterfly_stack, ButterflyStack, SplitComplex};
use crate::error::{Error, Result};
use crate::masknet::{init_masknet, MaskNet};
use crate::training::checkpoint::NamedTensor;
use crate::training::TrainableFlags;

/// Number of full frames: `floor((len − n)/hop) + 1`, or 0 when `len < n`.
pub fn frame_count(len: usize, n: usize, hop: usize) -> usize {
    if len < n || hop == 0 {
        0
    } else {
        (len - n) / hop + 1
    }
}

fn check_hop(n: usize, hop: usize) -> Result<()> {
    if hop == 0 || hop > n {
        return Err(Error::shape(format!("hop {hop} must be in 1..={n}")));
    }
    Ok(())
}

/// Overlapping frames of a signal. Frame `f` covers `[f·hop, f·hop + n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameMatrix {
    pub n: usize,
    pub hop: usize,
    pub frames: Vec<Vec<f64>>,
    pub source_length: usize,
}

/// Splits `x` into frames; a trailing partial frame is dropped.
pub fn frame_signal(x: &[f64], n: usize, hop: usize) -> Result<FrameMatrix> {
    check_hop(n, hop)?;
    if x.len() < n {
        return Err(Error::TooShort {
            len: x.len(),
            frame: n,
        });
    }
    let frames = (0..frame_count(x.len(), n, hop))
        .map(|f| x[f * hop..f * hop + n].to_vec())
        .collect();
    Ok(FrameMatrix {
        n,
        hop,
        frames,
        source_length: x.len(),
    })
}

/// Initial values for a trainable window.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowInit {
    Hann,
    Ones,
}

impl WindowInit {
    pub fn values(self, n: usize) -> Vec<f64> {
        match self {
            WindowInit::Hann => periodic_hann(n),
            WindowInit::Ones => vec![1.0; n],
        }
    }
}

/// Analysis window followed by the trainable forward transform.
#[derive(Debug, Clone)]
pub struct FrontEnd {
    pub analysis_window: TrainableWindow,
    pub forward_fft: FftLayer,
}

impl FrontEnd {
    pub fn new(store: &mut ParamStore, n: usize, window: WindowInit) -> Result<Self> {
        let stack = build_butterfly_stack(n)?;
        Ok(FrontEnd {
            analysis_window: TrainableWindow::with_values(store, "front.window", window.values(n))?,
            forward_fft: FftLayer::trainable(store, "front.fft", &stack)?,
        })
    }

    pub fn n(&self) -> usize {
        self.analysis_window.n
    }

    /// Real frame node in, stacked complex spectrum node out.
    pub fn analyze_frame(&self, store: &ParamStore, tape: &mut Tape, frame: NodeId) -> Result<NodeId> {
        let windowed = self.analysis_window.forward(store, tape, frame)?;
        let embedded = embed_real(tape, windowed, self.n())?;
        self.forward_fft.forward(store, tape, embedded)
    }
}

/// `[x; 0]` as a differentiable op built from existing tape primitives.
fn embed_real(tape: &mut Tape, x: NodeId, n: usize) -> Result<NodeId> {
    // a single frame overlap-added into a buffer of twice its length
    tape.overlap_add(vec![x], 0, 2 * n)
}

/// Analyzes every frame of `frames` on the tape.
pub fn analyze(front: &FrontEnd, store: &ParamStore, frames: &FrameMatrix, tape: &mut Tape) -> Result<Vec<NodeId>> {
    if frames.n != front.n() {
        return Err(Error::shape(format!(
            "frames of length {} for a {}-point front-end",
            frames.n,
            front.n()
        )));
    }
    frames
        .frames
        .iter()
        .map(|f| {
            let node = tape.constant(f.clone());
            front.analyze_frame(store, tape, node)
        })
        .collect()
}

/// Spectra of every frame without keeping a tape.
pub fn analyze_spectra(front: &FrontEnd, store: &ParamStore, frames: &FrameMatrix) -> Result<Vec<SplitComplex>> {
    let mut tape = Tape::new();
    let nodes = analyze(front, store, frames, &mut tape)?;
    nodes
        .iter()
        .map(|&id| SplitComplex::from_stacked(tape.value(id)))
        .collect()
}

/// Trainable inverse transform followed by the synthesis window.
#[derive(Debug, Clone)]
pub struct BackEnd {
    pub synthesis_window: TrainableWindow,
    pub inverse_fft: FftLayer,
}

impl BackEnd {
    pub fn new(store: &mut ParamStore, n: usize, window: WindowInit) -> Result<Self> {
        let stack = build_butterfly_stack(n)?;
        Ok(BackEnd {
            synthesis_window: TrainableWindow::with_values(store, "back.window", window.values(n))?,
            inverse_fft: FftLayer::trainable(store, "back.fft", &stack)?,
        })
    }

    pub fn n(&self) -> usize {
        self.synthesis_window.n
    }

    /// Stacked spectrum node in, windowed real frame node out. The imaginary
    /// part of the inverse is discarded.
    pub fn synthesize_frame(&self, store: &ParamStore, tape: &mut Tape, coeffs: NodeId) -> Result<NodeId> {
        let time = self.inverse_fft.inverse(store, tape, coeffs)?;
        let real = tape.real_part(time)?;
        self.synthesis_window.forward(store, tape, real)
    }
}

/// Inverse-transforms each spectrum and overlap-adds the frames at `hop`.
pub fn synthesize(
    back: &BackEnd,
    store: &ParamStore,
    coeffs: &[NodeId],
    hop: usize,
    out_length: usize,
    tape: &mut Tape,
) -> Result<NodeId> {
    check_hop(back.n(), hop)?;
    if let Some(last) = coeffs.len().checked_sub(1) {
        let end = last * hop + back.n();
        if end > out_length {
            return Err(Error::shape(format!(
                "last frame ends at {end} but output length is {out_length}"
            )));
        }
    }
    let frames = coeffs
        .iter()
        .map(|&c| back.synthesize_frame(store, tape, c))
        .collect::<Result<Vec<_>>>()?;
    tape.overlap_add(frames, hop, out_length)
}

/// [`synthesize`] on plain spectra.
pub fn synthesize_spectra(
    back: &BackEnd,
    store: &ParamStore,
    coeffs: &[SplitComplex],
    hop: usize,
    out_length: usize,
) -> Result<Vec<f64>> {
    let mut tape = Tape::new();
    let nodes: Vec<NodeId> = coeffs
        .iter()
        .map(|c| {
            if c.len() != back.n() {
                return Err(Error::shape(format!(
                    "spectrum of {} bins for a {}-point back-end",
                    c.len(),
                    back.n()
                )));
            }
            Ok(tape.constant(c.to_stacked()))
        })
        .collect::<Result<_>>()?;
    let out = synthesize(back, store, &nodes, hop, out_length, &mut tape)?;
    Ok(tape.value(out).to_vec())
}

/// Root-sum-square of the imaginary parts the back-end discards.
pub fn inverse_imag_residue(back: &BackEnd, store: &ParamStore, coeffs: &[SplitComplex]) -> Result<f64> {
    let stack = back.inverse_fft.to_stack(store);
    let mut total = 0.0;
    for c in coeffs {
        let t = stack.apply_inverse(c)?;
        total += t.im.iter().map(|v| v * v).sum::<f64>();
    }
    Ok(total.sqrt())
}

/// Fixed Hann (or custom window) analysis used to define loss targets.
#[derive(Debug, Clone)]
pub struct ReferenceStft {
    pub n: usize,
    pub hop: usize,
    window: Vec<f64>,
    stack: ButterflyStack,
    layer: FftLayer,
    window_weights: Weights,
}

impl ReferenceStft {
    pub fn hann(n: usize, hop: usize) -> Result<Self> {
        Self::with_window(periodic_hann(n), hop)
    }

    pub fn with_window(window: Vec<f64>, hop: usize) -> Result<Self> {
        let n = window.len();
        let stack = build_butterfly_stack(n)?;
        check_hop(n, hop)?;
        Ok(ReferenceStft {
            n,
            hop,
            layer: FftLayer::fixed(&stack),
            window_weights: Weights::Fixed(window.clone().into()),
            window,
            stack,
        })
    }

    pub fn window(&self) -> &[f64] {
        &self.window
    }

    pub fn analyze(&self, x: &[f64]) -> Result<Vec<SplitComplex>> {
        let frames = frame_signal(x, self.n, self.hop)?;
        frames
            .frames
            .iter()
            .map(|f| {
                let windowed: Vec<f64> = f.iter().zip(&self.window).map(|(a, b)| a * b).collect();
                self.stack.apply_forward(&SplitComplex::from_real(&windowed))
            })
            .collect()
    }

    /// Same analysis applied to a signal node; gradients reach the signal.
    pub fn analyze_on_tape(&self, store: &ParamStore, tape: &mut Tape, signal: NodeId) -> Result<Vec<NodeId>> {
        let len = tape.value(signal).len();
        if len < self.n {
            return Err(Error::TooShort { len, frame: self.n });
        }
        (0..frame_count(len, self.n, self.hop))
            .map(|f| {
                let frame = tape.slice(signal, f * self.hop, self.n)?;
                let windowed = tape.window(store, frame, self.window_weights.clone())?;
                let embedded = embed_real(tape, windowed, self.n)?;
                self.layer.forward(store, tape, embedded)
            })
            .collect()
    }
}

/// Where the per-frame masks come from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MaskMode {
    Network,
    /// Every mask value set to this constant, bypassing the network.
    Constant(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub n: usize,
    pub hop: usize,
    pub hidden: usize,
    pub seed: u64,
    pub analysis_window: WindowInit,
    pub synthesis_window: WindowInit,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            n: 256,
            hop: 128,
            hidden: 60,
            seed: 0,
            analysis_window: WindowInit::Hann,
            synthesis_window: WindowInit::Ones,
        }
    }
}

/// Nodes produced by one forward pass of the model.
#[derive(Debug, Clone)]
pub struct PipelineNodes {
    pub spectra: Vec<NodeId>,
    pub masks: Vec<NodeId>,
    pub frames_out: Vec<NodeId>,
    pub signal: NodeId,
}

/// Front-end, mask network and back-end with all parameters in one store.
#[derive(Debug, Clone)]
pub struct EnhancementModel {
    pub config: ModelConfig,
    pub params: ParamStore,
    pub front: FrontEnd,
    pub back: BackEnd,
    pub masknet: MaskNet,
}

impl EnhancementModel {
    pub fn new(config: ModelConfig) -> Result<Self> {
        check_hop(config.n, config.hop)?;
        let mut params = ParamStore::new();
        let front = FrontEnd::new(&mut params, config.n, config.analysis_window)?;
        let back = BackEnd::new(&mut params, config.n, config.synthesis_window)?;
        let masknet = init_masknet(&mut params, config.n, config.hidden, config.seed)?;
        Ok(EnhancementModel {
            config,
            params,
            front,
            back,
            masknet,
        })
    }

    pub fn n(&self) -> usize {
        self.config.n
    }

    pub fn hop(&self) -> usize {
        self.config.hop
    }

    pub fn analysis_window_ids(&self) -> Vec<ParamId> {
        vec![self.front.analysis_window.w]
    }

    pub fn synthesis_window_ids(&self) -> Vec<ParamId> {
        vec![self.back.synthesis_window.w]
    }

    pub fn forward_fft_ids(&self) -> Vec<ParamId> {
        self.front.forward_fft.param_ids()
    }

    pub fn inverse_fft_ids(&self) -> Vec<ParamId> {
        self.back.inverse_fft.param_ids()
    }

    /// Front-end and back-end tensors: both windows and both stacks.
    pub fn transform_ids(&self) -> Vec<ParamId> {
        let mut ids = self.analysis_window_ids();
        ids.extend(self.forward_fft_ids());
        ids.extend(self.synthesis_window_ids());
        ids.extend(self.inverse_fft_ids());
        ids
    }

    /// Freezes or unfreezes each front/back-end group; the mask network is
    /// always trainable.
    pub fn apply_trainable_flags(&mut self, flags: &TrainableFlags) {
        let groups = [
            (self.analysis_window_ids(), flags.window_analysis),
            (self.synthesis_window_ids(), flags.window_synthesis),
            (self.forward_fft_ids(), flags.fft_forward),
            (self.inverse_fft_ids(), flags.fft_inverse),
        ];
        for (ids, trainable) in groups {
            for id in ids {
                self.params.set_trainable(id, trainable);
            }
        }
        for id in self.masknet.param_ids() {
            self.params.set_trainable(id, true);
        }
    }

    /// Frames `x`, analyzes, masks, synthesizes. Frame `t` only sees GRU
    /// state from frames before it.
    pub fn forward_on_tape(&self, tape: &mut Tape, x: &[f64], mode: MaskMode) -> Result<PipelineNodes> {
        let frames = frame_signal(x, self.n(), self.hop())?;
        let spectra = analyze(&self.front, &self.params, &frames, tape)?;
        let masks = match mode {
            MaskMode::Network => self.masknet.forward_on_tape(&self.params, tape, &spectra)?,
            MaskMode::Constant(v) => spectra
                .iter()
                .map(|_| tape.constant(vec![v; 2 * self.n()]))
                .collect(),
        };
        let masked = spectra
            .iter()
            .zip(&masks)
            .map(|(&s, &m)| tape.mul(s, m))
            .collect::<Result<Vec<_>>>()?;
        let frames_out = masked
            .iter()
            .map(|&c| self.back.synthesize_frame(&self.params, tape, c))
            .collect::<Result<Vec<_>>>()?;
        let signal = tape.overlap_add(frames_out.clone(), self.hop(), x.len())?;
        Ok(PipelineNodes {
            spectra,
            masks,
            frames_out,
            signal,
        })
    }

    /// Enhanced waveform, same length as `x`.
    pub fn enhance(&self, x: &[f64], mode: MaskMode) -> Result<Vec<f64>> {
        let mut tape = Tape::new();
        let nodes = self.forward_on_tape(&mut tape, x, mode)?;
        Ok(tape.value(nodes.signal).to_vec())
    }

    /// Windowed time-domain frames before overlap-add.
    pub fn enhance_frames(&self, x: &[f64], mode: MaskMode) -> Result<Vec<Vec<f64>>> {
        let mut tape = Tape::new();
        let nodes = self.forward_on_tape(&mut tape, x, mode)?;
        Ok(nodes
            .frames_out
            .iter()
            .map(|&f| tape.value(f).to_vec())
            .collect())
    }

    pub fn parameter_count(&self) -> usize {
        self.params.value_count()
    }

    pub fn to_tensors(&self) -> Vec<NamedTensor> {
        self.params
            .iter()
            .map(|(_, t)| NamedTensor {
                name: t.name.clone(),
                shape: t.shape.clone(),
                values: t.values.clone(),
            })
            .collect()
    }

    /// Rebuilds a model from checkpoint tensors. Sizes come from the tensor
    /// shapes; every tensor must be present with a matching shape.
    pub fn from_tensors(tensors: &[NamedTensor], hop: Option<usize>) -> Result<Self> {
        let find = |name: &str| {
            tensors
                .iter()
                .find(|t| t.name == name)
                .ok_or_else(|| Error::shape(format!("checkpoint has no tensor '{name}'")))
        };
        let n = find("front.window")?.values.len();
        let hidden = find("masknet.linear1.weight")?
            .shape
            .first()
            .copied()
            .ok_or_else(|| Error::shape("masknet.linear1.weight has no dims"))?;
        let mut model = EnhancementModel::new(ModelConfig {
            n,
            hop: hop.unwrap_or(n / 2),
            hidden,
            ..ModelConfig::default()
        })?;
        if tensors.len() != model.params.len() {
            return Err(Error::shape(format!(
                "checkpoint has {} tensors, model expects {}",
                tensors.len(),
                model.params.len()
            )));
        }
        for t in model.params.iter_mut() {
            let src = find(&t.name)?;
            if src.shape != t.shape {
                return Err(Error::shape(format!(
                    "tensor '{}' has shape {:?}, expected {:?}",
                    t.name, src.shape, t.shape
                )));
            }
            t.values.clone_from(&src.values);
        }
        Ok(model)
    }
}

/// Runs the full model on `x` with the given mask source.
pub fn enhance_signal(model: &EnhancementModel, x: &[f64], mode: MaskMode) -> Result<Vec<f64>> {
    model.enhance(x, mode)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::butterfly::naive_dft;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_signal(seed: u64, len: usize) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..len).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    #[test]
    fn framing_examples() {
        let x: Vec<f64> = (0..6).map(|i| i as f64).collect();
        let f = frame_signal(&x, 4, 2).unwrap();
        assert_eq!(f.frames, vec![vec![0.0, 1.0, 2.0, 3.0], vec![2.0, 3.0, 4.0, 5.0]]);

        let x: Vec<f64> = (0..12).map(|i| i as f64).collect();
        let f = frame_signal(&x, 4, 4).unwrap();
        assert_eq!(f.frames.concat(), x);

        // (16000 - 256) / 128 = 123 exactly, so the last frame ends on the final sample
        assert_eq!(frame_count(16000, 256, 128), 124);
        assert_eq!(frame_signal(&vec![0.0; 16000], 256, 128).unwrap().frames.len(), 124);
        assert_eq!(frame_count(15999, 256, 128), 123);
    }

    #[test]
    fn framing_errors() {
        assert!(matches!(frame_signal(&[0.0; 3], 4, 2), Err(Error::TooShort { len: 3, frame: 4 })));
        assert!(frame_signal(&[0.0; 8], 4, 0).is_err());
        assert!(frame_signal(&[0.0; 8], 4, 5).is_err());
    }

    #[test]
    fn analysis_matches_naive_dft_of_windowed_frame() {
        let mut store = ParamStore::new();
        let front = FrontEnd::new(&mut store, 16, WindowInit::Hann).unwrap();
        let frames = frame_signal(&[1.0; 16], 16, 8).unwrap();
        let spectra = analyze_spectra(&front, &store, &frames).unwrap();
        let expect = naive_dft(&SplitComplex::from_real(&periodic_hann(16)));
        assert!(spectra[0].max_abs_diff(&expect) < 1e-12);

        let zero = analyze_spectra(&front, &store, &frame_signal(&[0.0; 16], 16, 8).unwrap()).unwrap();
        assert!(zero[0].re.iter().chain(&zero[0].im).all(|&v| v == 0.0));
    }

    #[test]
    fn analysis_is_linear_in_the_frame() {
        let mut store = ParamStore::new();
        let front = FrontEnd::new(&mut store, 32, WindowInit::Hann).unwrap();
        let a = random_signal(1, 32);
        let b = random_signal(2, 32);
        let combo: Vec<f64> = a.iter().zip(&b).map(|(p, q)| 2.0 * p - 0.5 * q).collect();
        let sa = &analyze_spectra(&front, &store, &frame_signal(&a, 32, 16).unwrap()).unwrap()[0];
        let sb = &analyze_spectra(&front, &store, &frame_signal(&b, 32, 16).unwrap()).unwrap()[0];
        let sc = &analyze_spectra(&front, &store, &frame_signal(&combo, 32, 16).unwrap()).unwrap()[0];
        let expect = SplitComplex {
            re: sa.re.iter().zip(&sb.re).map(|(p, q)| 2.0 * p - 0.5 * q).collect(),
            im: sa.im.iter().zip(&sb.im).map(|(p, q)| 2.0 * p - 0.5 * q).collect(),
        };
        assert!(sc.max_abs_diff(&expect) < 1e-12);
    }

    #[test]
    fn analysis_rejects_mismatched_frames() {
        let mut store = ParamStore::new();
        let front = FrontEnd::new(&mut store, 16, WindowInit::Hann).unwrap();
        let frames = frame_signal(&[0.0; 32], 8, 4).unwrap();
        assert!(matches!(analyze_spectra(&front, &store, &frames), Err(Error::Shape(_))));
    }

    #[test]
    fn single_frame_roundtrip_with_identity_windows() {
        let mut store = ParamStore::new();
        let front = FrontEnd::new(&mut store, 64, WindowInit::Ones).unwrap();
        let back = BackEnd::new(&mut store, 64, WindowInit::Ones).unwrap();
        let x = random_signal(3, 64);
        let spectra = analyze_spectra(&front, &store, &frame_signal(&x, 64, 17).unwrap()).unwrap();
        let y = synthesize_spectra(&back, &store, &spectra, 17, 64).unwrap();
        let err = x.iter().zip(&y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-9);
        assert!(inverse_imag_residue(&back, &store, &spectra).unwrap() < 1e-9);
    }

    #[test]
    fn hann_analysis_half_overlap_reconstructs_interior() {
        let (n, hop) = (32, 16);
        let mut store = ParamStore::new();
        let front = FrontEnd::new(&mut store, n, WindowInit::Hann).unwrap();
        let back = BackEnd::new(&mut store, n, WindowInit::Ones).unwrap();
        let x = random_signal(4, 20 * hop);
        let spectra = analyze_spectra(&front, &store, &frame_signal(&x, n, hop).unwrap()).unwrap();
        let y = synthesize_spectra(&back, &store, &spectra, hop, x.len()).unwrap();
        for i in n..x.len() - n {
            assert!((x[i] - y[i]).abs() < 1e-9, "sample {i}");
        }
    }

    #[test]
    fn synthesis_edge_cases() {
        let mut store = ParamStore::new();
        let back = BackEnd::new(&mut store, 16, WindowInit::Hann).unwrap();
        let zeros = vec![SplitComplex::zeros(16); 3];
        let y = synthesize_spectra(&back, &store, &zeros, 8, 32).unwrap();
        assert!(y.iter().all(|&v| v == 0.0));
        assert!(matches!(
            synthesize_spectra(&back, &store, &zeros, 8, 31),
            Err(Error::Shape(_))
        ));
        assert!(synthesize_spectra(&back, &store, &[SplitComplex::zeros(8)], 8, 32).is_err());
    }

    fn small_model() -> EnhancementModel {
        EnhancementModel::new(ModelConfig {
            n: 32,
            hop: 16,
            hidden: 6,
            seed: 9,
            ..ModelConfig::default()
        })
        .unwrap()
    }

    #[test]
    fn unit_masks_reconstruct_interior() {
        let model = small_model();
        let x = random_signal(5, 400);
        let y = model.enhance(&x, MaskMode::Constant(1.0)).unwrap();
        assert_eq!(y.len(), x.len());
        let last_frame_end = (frame_count(400, 32, 16) - 1) * 16 + 32;
        for i in 32..last_frame_end - 32 {
            assert!((x[i] - y[i]).abs() < 1e-6, "sample {i}");
        }
    }

    #[test]
    fn zero_masks_silence_the_output() {
        let model = small_model();
        let y = model.enhance(&random_signal(6, 200), MaskMode::Constant(0.0)).unwrap();
        assert!(y.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn later_input_never_changes_earlier_output_frames() {
        let model = small_model();
        let x = random_signal(7, 32 + 16 * 12);
        let base = model.enhance_frames(&x, MaskMode::Network).unwrap();
        for t in [2, 5, 9] {
            let mut y = x.clone();
            // first sample not covered by any frame before t
            let first = (t - 1) * 16 + 32;
            for v in &mut y[first..] {
                *v += 0.37;
            }
            let other = model.enhance_frames(&y, MaskMode::Network).unwrap();
            assert_eq!(base[..t], other[..t], "frame {t}");
            assert_ne!(base[t], other[t]);
        }
    }

    #[test]
    fn flags_freeze_groups() {
        let mut model = small_model();
        model.apply_trainable_flags(&TrainableFlags {
            window_analysis: false,
            window_synthesis: true,
            fft_forward: false,
            fft_inverse: true,
        });
        assert!(!model.params.get(model.front.analysis_window.w).trainable);
        assert!(model.params.get(model.back.synthesis_window.w).trainable);
        assert!(model.forward_fft_ids().iter().all(|&id| !model.params.get(id).trainable));
        assert!(model.inverse_fft_ids().iter().all(|&id| model.params.get(id).trainable));
        assert!(model.masknet.param_ids().iter().all(|&id| model.params.get(id).trainable));
    }

    #[test]
    fn default_model_parameter_budget() {
        let model = EnhancementModel::new(ModelConfig::default()).unwrap();
        let transforms: usize = model
            .forward_fft_ids()
            .iter()
            .chain(&model.inverse_fft_ids())
            .map(|&id| model.params.get(id).len())
            .sum();
        assert_eq!(transforms, 16_384);
        let windows: usize = model.analysis_window_ids().iter().chain(&model.synthesis_window_ids())
            .map(|&id| model.params.get(id).len())
            .sum();
        assert_eq!(windows, 512);
        assert_eq!(model.masknet.parameter_count(&model.params), 83_792);
        assert_eq!(model.parameter_count(), 16_384 + 512 + 83_792);
    }

    #[test]
    fn tensors_roundtrip_through_model() {
        let model = small_model();
        let rebuilt = EnhancementModel::from_tensors(&model.to_tensors(), Some(16)).unwrap();
        assert_eq!(rebuilt.params, model.params);

        let mut broken = model.to_tensors();
        broken.pop();
        assert!(EnhancementModel::from_tensors(&broken, None).is_err());
        let mut reshaped = model.to_tensors();
        reshaped[3].shape = vec![reshaped[3].values.len()];
        assert!(EnhancementModel::from_tensors(&reshaped, None).is_err());
    }

    #[test]
    fn reference_tape_path_matches_plain_analysis() {
        let reference = ReferenceStft::hann(32, 16).unwrap();
        let x = random_signal(8, 300);
        let plain = reference.analyze(&x).unwrap();
        let mut tape = Tape::new();
        let store = ParamStore::new();
        let sig = tape.constant(x.clone());
        let nodes = reference.analyze_on_tape(&store, &mut tape, sig).unwrap();
        assert_eq!(nodes.len(), plain.len());
        for (node, frame) in nodes.iter().zip(&plain) {
            assert_eq!(tape.value(*node), frame.to_stacked().as_slice());
        }
    }
}
