//! Radix-2 decimation-in-time FFT written as a product of sparse matrices.
//!
//! The `n`-point DFT matrix factors as `W_m ··· W_1 · B_n` where `B_n` is the
//! bit-reversal permutation and each `W_k = I_{n/2^k} ⊗ [[I, Ω], [I, -Ω]]` is a
//! stacked-diagonal matrix with exactly two nonzeros per row and per column.
//! Every nonzero of every `W_k` is an ordinary value that may be trained; the
//! permutation is fixed.
//!
//! All complex data is stored split into parallel real and imaginary arrays.

use std::f64::consts::PI;
use std::fmt::Write as _;

use crate::error::{Error, Result};

/// Largest transform size [`ButterflyStack::to_dense`] will materialize.
pub const MAX_DENSE_SIZE: usize = 4096;

/// A complex vector stored as two real arrays of equal length.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SplitComplex {
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl SplitComplex {
    pub fn new(re: Vec<f64>, im: Vec<f64>) -> Result<Self> {
        if re.len() != im.len() {
            return Err(Error::shape(format!(
                "real part has {} values but imaginary part has {}",
                re.len(),
                im.len()
            )));
        }
        Ok(SplitComplex { re, im })
    }

    pub fn zeros(len: usize) -> Self {
        SplitComplex {
            re: vec![0.0; len],
            im: vec![0.0; len],
        }
    }

    pub fn from_real(re: &[f64]) -> Self {
        SplitComplex {
            re: re.to_vec(),
            im: vec![0.0; re.len()],
        }
    }

    /// Builds a buffer from the `[re; im]` stacked layout used on the tape.
    pub fn from_stacked(stacked: &[f64]) -> Result<Self> {
        if stacked.len() % 2 != 0 {
            return Err(Error::shape(format!(
                "stacked complex buffer must have even length, got {}",
                stacked.len()
            )));
        }
        let (re, im) = stacked.split_at(stacked.len() / 2);
        Ok(SplitComplex {
            re: re.to_vec(),
            im: im.to_vec(),
        })
    }

    /// Real part followed by imaginary part.
    pub fn to_stacked(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(2 * self.len());
        out.extend_from_slice(&self.re);
        out.extend_from_slice(&self.im);
        out
    }

    pub fn len(&self) -> usize {
        self.re.len()
    }

    pub fn is_empty(&self) -> bool {
        self.re.is_empty()
    }

    pub fn get(&self, i: usize) -> (f64, f64) {
        (self.re[i], self.im[i])
    }

    pub fn is_finite(&self) -> bool {
        self.re.iter().chain(&self.im).all(|v| v.is_finite())
    }

    pub fn conj(&self) -> Self {
        SplitComplex {
            re: self.re.clone(),
            im: self.im.iter().map(|v| -v).collect(),
        }
    }

    pub fn scale(&self, factor: f64) -> Self {
        SplitComplex {
            re: self.re.iter().map(|v| v * factor).collect(),
            im: self.im.iter().map(|v| v * factor).collect(),
        }
    }

    /// Sum of squared magnitudes.
    pub fn energy(&self) -> f64 {
        self.re
            .iter()
            .zip(&self.im)
            .map(|(r, i)| r * r + i * i)
            .sum()
    }

    /// Largest componentwise absolute difference. Panics on length mismatch.
    pub fn max_abs_diff(&self, other: &SplitComplex) -> f64 {
        assert_eq!(self.len(), other.len(), "length mismatch");
        self.re
            .iter()
            .zip(&other.re)
            .chain(self.im.iter().zip(&other.im))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    fn check_finite(&self) -> Result<()> {
        if let Some(i) = (0..self.len()).find(|&i| !self.re[i].is_finite() || !self.im[i].is_finite()) {
            return Err(Error::Numeric(format!("input element {i} is not finite")));
        }
        Ok(())
    }
}

fn log2_exact(n: usize) -> Result<usize> {
    if n < 2 || !n.is_power_of_two() {
        return Err(Error::InvalidSize(n));
    }
    Ok(n.trailing_zeros() as usize)
}

/// `e^{-2πj·k/size}` with the exponent reduced modulo `size` first.
fn root_of_unity(k: usize, size: usize) -> (f64, f64) {
    let k = k % size;
    // quarter turns are exact
    if (4 * k) % size == 0 {
        return [(1.0, 0.0), (0.0, -1.0), (-1.0, 0.0), (0.0, 1.0)][4 * k / size];
    }
    let angle = -2.0 * PI * k as f64 / size as f64;
    (angle.cos(), angle.sin())
}

/// Bit-reversal of `log2(n)`-bit indices: `out[i] = reverse(i)`.
pub fn bit_reversal_permutation(n: usize) -> Result<Vec<usize>> {
    let bits = log2_exact(n)?;
    Ok((0..n)
        .map(|i| i.reverse_bits() >> (usize::BITS as usize - bits))
        .collect())
}

/// Diagonal `Ω = diag(1, ω_L, …, ω_L^{L/2-1})` with `ω_L = e^{-2πj/L}`.
#[derive(Debug, Clone, PartialEq)]
pub struct TwiddleDiagonal {
    pub size: usize,
    pub values: SplitComplex,
}

pub fn build_twiddle_diagonal(block: usize) -> Result<TwiddleDiagonal> {
    log2_exact(block)?;
    let half = block / 2;
    let (re, im) = (0..half).map(|k| root_of_unity(k, block)).unzip();
    Ok(TwiddleDiagonal {
        size: half,
        values: SplitComplex { re, im },
    })
}

/// One butterfly factor `W_k`.
///
/// Row `r` holds exactly two entries, stored at value slots `2r` and `2r + 1`
/// with column indices `gather[2r]` and `gather[2r + 1]`. The gather indices
/// are fixed at construction; only `values` may change.
#[derive(Debug, Clone, PartialEq)]
pub struct StackedDiagonalMatrix {
    n: usize,
    stage: usize,
    gather: Vec<usize>,
    pub values: SplitComplex,
}

impl StackedDiagonalMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn stage(&self) -> usize {
        self.stage
    }

    /// Column indices, two per row.
    pub fn gather(&self) -> &[usize] {
        &self.gather
    }

    pub fn entry_count(&self) -> usize {
        self.gather.len()
    }

    /// `(row, col, (re, im))` for every stored entry, row-major.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, (f64, f64))> + '_ {
        self.gather
            .iter()
            .enumerate()
            .map(move |(slot, &col)| (slot / 2, col, self.values.get(slot)))
    }

    /// `y = W x`. Both outputs must already have length `n`.
    pub(crate) fn apply_into(
        v_re: &[f64],
        v_im: &[f64],
        gather: &[usize],
        x_re: &[f64],
        x_im: &[f64],
        y_re: &mut [f64],
        y_im: &mut [f64],
    ) {
        let rows = y_re
            .iter_mut()
            .zip(y_im.iter_mut())
            .zip(gather.chunks_exact(2).zip(v_re.chunks_exact(2).zip(v_im.chunks_exact(2))));
        for ((yr, yi), (c, (vr, vi))) in rows {
            let (a_re, a_im, b_re, b_im) = (x_re[c[0]], x_im[c[0]], x_re[c[1]], x_im[c[1]]);
            *yr = vr[0] * a_re - vi[0] * a_im + vr[1] * b_re - vi[1] * b_im;
            *yi = vr[0] * a_im + vi[0] * a_re + vr[1] * b_im + vi[1] * b_re;
        }
    }

    /// Accumulates `W^H g` into `(out_re, out_im)`.
    pub(crate) fn adjoint_accumulate(
        v_re: &[f64],
        v_im: &[f64],
        gather: &[usize],
        g_re: &[f64],
        g_im: &[f64],
        out_re: &mut [f64],
        out_im: &mut [f64],
    ) {
        for (slot, &c) in gather.iter().enumerate() {
            let r = slot / 2;
            let (vr, vi) = (v_re[slot], v_im[slot]);
            out_re[c] += vr * g_re[r] + vi * g_im[r];
            out_im[c] += vr * g_im[r] - vi * g_re[r];
        }
    }

    pub fn apply(&self, x: &SplitComplex) -> Result<SplitComplex> {
        if x.len() != self.n {
            return Err(Error::shape(format!(
                "stage {} expects {} values, got {}",
                self.stage,
                self.n,
                x.len()
            )));
        }
        let mut y = SplitComplex::zeros(self.n);
        Self::apply_into(
            &self.values.re,
            &self.values.im,
            &self.gather,
            &x.re,
            &x.im,
            &mut y.re,
            &mut y.im,
        );
        Ok(y)
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut m = DenseMatrix::zeros(self.n);
        for (r, c, (re, im)) in self.entries() {
            m.re[r * self.n + c] += re;
            m.im[r * self.n + c] += im;
        }
        m
    }
}

/// Builds the exact stage-`stage` factor of an `n`-point transform.
pub fn build_stage_matrix(n: usize, stage: usize) -> Result<StackedDiagonalMatrix> {
    let stages = log2_exact(n)?;
    if stage == 0 || stage > stages {
        return Err(Error::InvalidStage {
            n,
            stage,
            max: stages,
        });
    }
    let block = 1usize << stage;
    let half = block / 2;
    let twiddles = build_twiddle_diagonal(block)?;

    let mut gather = vec![0; 2 * n];
    let mut values = SplitComplex::zeros(2 * n);
    for base in (0..n).step_by(block) {
        for j in 0..half {
            let top = base + j;
            let bottom = top + half;
            let (wr, wi) = twiddles.values.get(j);
            // top row: x[top] + ω x[bottom]
            gather[2 * top] = top;
            gather[2 * top + 1] = bottom;
            values.re[2 * top] = 1.0;
            values.re[2 * top + 1] = wr;
            values.im[2 * top + 1] = wi;
            // bottom row: x[top] - ω x[bottom]
            gather[2 * bottom] = top;
            gather[2 * bottom + 1] = bottom;
            values.re[2 * bottom] = 1.0;
            values.re[2 * bottom + 1] = -wr;
            values.im[2 * bottom + 1] = -wi;
        }
    }
    Ok(StackedDiagonalMatrix {
        n,
        stage,
        gather,
        values,
    })
}

/// The full factorization: a fixed bit-reversal followed by `log2(n)` factors,
/// stage 1 applied first.
#[derive(Debug, Clone, PartialEq)]
pub struct ButterflyStack {
    n: usize,
    permutation: Vec<usize>,
    pub factors: Vec<StackedDiagonalMatrix>,
}

pub fn build_butterfly_stack(n: usize) -> Result<ButterflyStack> {
    let stages = log2_exact(n)?;
    let factors = (1..=stages)
        .map(|k| build_stage_matrix(n, k))
        .collect::<Result<Vec<_>>>()?;
    Ok(ButterflyStack {
        n,
        permutation: bit_reversal_permutation(n)?,
        factors,
    })
}

impl ButterflyStack {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn permutation(&self) -> &[usize] {
        &self.permutation
    }

    fn check_input(&self, x: &SplitComplex) -> Result<()> {
        if x.len() != self.n {
            return Err(Error::shape(format!(
                "{}-point transform got {} values",
                self.n,
                x.len()
            )));
        }
        x.check_finite()
    }

    /// Forward transform; at exact initialization this is the DFT.
    pub fn apply_forward(&self, x: &SplitComplex) -> Result<SplitComplex> {
        self.apply_forward_counted(x).map(|(y, _)| y)
    }

    /// Forward transform plus the number of complex multiply-adds performed.
    pub fn apply_forward_counted(&self, x: &SplitComplex) -> Result<(SplitComplex, u64)> {
        self.check_input(x)?;
        let mut cur = permute(x, &self.permutation);
        let mut next = SplitComplex::zeros(self.n);
        let mut macs = 0u64;
        for factor in &self.factors {
            StackedDiagonalMatrix::apply_into(
                &factor.values.re,
                &factor.values.im,
                &factor.gather,
                &cur.re,
                &cur.im,
                &mut next.re,
                &mut next.im,
            );
            macs += factor.gather.len() as u64;
            std::mem::swap(&mut cur, &mut next);
        }
        Ok((cur, macs))
    }

    /// Inverse via `conj(forward(conj(X))) / n` using this stack's own values.
    pub fn apply_inverse(&self, spectrum: &SplitComplex) -> Result<SplitComplex> {
        let y = self.apply_forward(&spectrum.conj())?;
        let scale = 1.0 / self.n as f64;
        Ok(SplitComplex {
            re: y.re.iter().map(|v| v * scale).collect(),
            im: y.im.iter().map(|v| -v * scale).collect(),
        })
    }

    /// Real trainable values: two per complex entry, permutation excluded.
    pub fn count_parameters(&self) -> usize {
        2 * self.factors.iter().map(|f| f.entry_count()).sum::<usize>()
    }

    /// Dense `W_m ··· W_1 · B_n`, built by multiplying the factors out.
    pub fn to_dense(&self) -> Result<DenseMatrix> {
        if self.n > MAX_DENSE_SIZE {
            return Err(Error::shape(format!(
                "refusing to densify a {}-point stack (limit {MAX_DENSE_SIZE})",
                self.n
            )));
        }
        let mut acc = DenseMatrix::permutation(&self.permutation);
        for factor in &self.factors {
            acc = acc.left_multiply_sparse(factor);
        }
        Ok(acc)
    }
}

/// Output element `i` is input element `perm[i]`.
pub(crate) fn permute(x: &SplitComplex, perm: &[usize]) -> SplitComplex {
    SplitComplex {
        re: perm.iter().map(|&p| x.re[p]).collect(),
        im: perm.iter().map(|&p| x.im[p]).collect(),
    }
}

/// Direct `O(n²)` evaluation of `X[k] = Σ x[m] ω_n^{km}`.
pub fn naive_dft(x: &SplitComplex) -> SplitComplex {
    let n = x.len();
    let mut out = SplitComplex::zeros(n);
    for k in 0..n {
        let (mut acc_re, mut acc_im) = (0.0, 0.0);
        for m in 0..n {
            let (wr, wi) = root_of_unity(k * m, n);
            acc_re += x.re[m] * wr - x.im[m] * wi;
            acc_im += x.re[m] * wi + x.im[m] * wr;
        }
        out.re[k] = acc_re;
        out.im[k] = acc_im;
    }
    out
}

/// Real parameter count of a dense trainable `n`-point DFT matrix.
pub fn dense_parameter_count(n: usize) -> usize {
    2 * n * n
}

/// Row-major square complex matrix, used for verification and benchmarking.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    pub n: usize,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(n: usize) -> Self {
        DenseMatrix {
            n,
            re: vec![0.0; n * n],
            im: vec![0.0; n * n],
        }
    }

    /// Matrix with a one at `(i, perm[i])`, so `P x` gathers `x[perm[i]]`.
    pub fn permutation(perm: &[usize]) -> Self {
        let n = perm.len();
        let mut m = Self::zeros(n);
        for (i, &p) in perm.iter().enumerate() {
            m.re[i * n + p] = 1.0;
        }
        m
    }

    /// The DFT matrix `F[k][m] = ω_n^{km}`.
    pub fn dft(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for k in 0..n {
            for j in 0..n {
                let (wr, wi) = root_of_unity(k * j, n);
                m.re[k * n + j] = wr;
                m.im[k * n + j] = wi;
            }
        }
        m
    }

    pub fn get(&self, row: usize, col: usize) -> (f64, f64) {
        (self.re[row * self.n + col], self.im[row * self.n + col])
    }

    /// Dense product `self · rhs`.
    pub fn matmul(&self, rhs: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.n, rhs.n, "dimension mismatch");
        let n = self.n;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let (ar, ai) = self.get(i, k);
                if ar == 0.0 && ai == 0.0 {
                    continue;
                }
                for j in 0..n {
                    let (br, bi) = rhs.get(k, j);
                    out.re[i * n + j] += ar * br - ai * bi;
                    out.im[i * n + j] += ar * bi + ai * br;
                }
            }
        }
        out
    }

    /// `W · self` for a sparse factor, `O(n²)`.
    fn left_multiply_sparse(&self, w: &StackedDiagonalMatrix) -> DenseMatrix {
        let n = self.n;
        let mut out = Self::zeros(n);
        for (r, c, (vr, vi)) in w.entries() {
            for j in 0..n {
                let (br, bi) = self.get(c, j);
                out.re[r * n + j] += vr * br - vi * bi;
                out.im[r * n + j] += vr * bi + vi * br;
            }
        }
        out
    }

    /// Dense matrix-vector product plus the multiply-add count (`n²`).
    pub fn matvec_counted(&self, x: &SplitComplex) -> (SplitComplex, u64) {
        let n = self.n;
        let mut y = SplitComplex::zeros(n);
        for r in 0..n {
            let row_re = &self.re[r * n..(r + 1) * n];
            let row_im = &self.im[r * n..(r + 1) * n];
            let (mut acc_re, mut acc_im) = (0.0, 0.0);
            for c in 0..n {
                acc_re += row_re[c] * x.re[c] - row_im[c] * x.im[c];
                acc_im += row_re[c] * x.im[c] + row_im[c] * x.re[c];
            }
            y.re[r] = acc_re;
            y.im[r] = acc_im;
        }
        (y, (n * n) as u64)
    }

    pub fn max_abs_diff(&self, other: &DenseMatrix) -> f64 {
        assert_eq!(self.n, other.n, "dimension mismatch");
        self.re
            .iter()
            .zip(&other.re)
            .chain(self.im.iter().zip(&other.im))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Row-major CSV with `a+bj` / `a-bj` cells.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for r in 0..self.n {
            for c in 0..self.n {
                if c > 0 {
                    out.push(',');
                }
                let (re, im) = self.get(r, c);
                let sign = if im.is_sign_negative() { '-' } else { '+' };
                let _ = write!(out, "{re}{sign}{}j", im.abs());
            }
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kron_identity(count: usize, block: &DenseMatrix) -> DenseMatrix {
        let b = block.n;
        let n = count * b;
        let mut out = DenseMatrix::zeros(n);
        for blk in 0..count {
            for i in 0..b {
                for j in 0..b {
                    let (re, im) = block.get(i, j);
                    out.re[(blk * b + i) * n + blk * b + j] = re;
                    out.im[(blk * b + i) * n + blk * b + j] = im;
                }
            }
        }
        out
    }

    /// `[[I, Ω], [I, -Ω]]` assembled entry by entry.
    fn butterfly_block(block: usize) -> DenseMatrix {
        let half = block / 2;
        let tw = build_twiddle_diagonal(block).unwrap();
        let mut m = DenseMatrix::zeros(block);
        for j in 0..half {
            let (wr, wi) = tw.values.get(j);
            m.re[j * block + j] = 1.0;
            m.re[(j + half) * block + j] = 1.0;
            m.re[j * block + j + half] = wr;
            m.im[j * block + j + half] = wi;
            m.re[(j + half) * block + j + half] = -wr;
            m.im[(j + half) * block + j + half] = -wi;
        }
        m
    }

    #[test]
    fn bit_reversal_small_sizes() {
        assert_eq!(bit_reversal_permutation(2).unwrap(), vec![0, 1]);
        assert_eq!(bit_reversal_permutation(4).unwrap(), vec![0, 2, 1, 3]);
        assert_eq!(
            bit_reversal_permutation(8).unwrap(),
            vec![0, 4, 2, 6, 1, 5, 3, 7]
        );
    }

    #[test]
    fn bit_reversal_rejects_bad_sizes() {
        for n in [0, 1, 3, 6, 12, 1000] {
            assert!(matches!(
                bit_reversal_permutation(n),
                Err(Error::InvalidSize(_))
            ));
        }
    }

    #[test]
    fn bit_reversal_is_an_involutive_permutation() {
        for bits in 1..=10 {
            let n = 1 << bits;
            let p = bit_reversal_permutation(n).unwrap();
            let mut seen = vec![false; n];
            for &i in &p {
                seen[i] = true;
            }
            assert!(seen.iter().all(|&s| s));
            assert!((0..n).all(|i| p[p[i]] == i));
        }
    }

    #[test]
    fn twiddles() {
        let t2 = build_twiddle_diagonal(2).unwrap();
        assert_eq!(t2.size, 1);
        assert_eq!(t2.values.get(0), (1.0, 0.0));

        let t4 = build_twiddle_diagonal(4).unwrap();
        assert_eq!(t4.values.get(0), (1.0, 0.0));
        let (re, im) = t4.values.get(1);
        assert!(re.abs() < 1e-15 && (im + 1.0).abs() < 1e-15);

        let (re, im) = build_twiddle_diagonal(8).unwrap().values.get(1);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((re - h).abs() < 1e-15 && (im + h).abs() < 1e-15);

        assert!(build_twiddle_diagonal(6).is_err());
        assert!(build_twiddle_diagonal(1).is_err());
    }

    #[test]
    fn stage_matrices_of_the_four_point_example() {
        let w1 = build_stage_matrix(4, 1).unwrap().to_dense();
        let expect_w1 = [
            [1.0, 1.0, 0.0, 0.0],
            [1.0, -1.0, 0.0, 0.0],
            [0.0, 0.0, 1.0, 1.0],
            [0.0, 0.0, 1.0, -1.0],
        ];
        for r in 0..4 {
            for c in 0..4 {
                assert_eq!(w1.get(r, c), (expect_w1[r][c], 0.0), "W1[{r}][{c}]");
            }
        }

        let w2 = build_stage_matrix(4, 2).unwrap().to_dense();
        // entries as (re, im); -j = (0, -1)
        let expect_w2 = [
            [(1.0, 0.0), (0.0, 0.0), (1.0, 0.0), (0.0, 0.0)],
            [(0.0, 0.0), (1.0, 0.0), (0.0, 0.0), (0.0, -1.0)],
            [(1.0, 0.0), (0.0, 0.0), (-1.0, 0.0), (0.0, 0.0)],
            [(0.0, 0.0), (1.0, 0.0), (0.0, 0.0), (0.0, 1.0)],
        ];
        for r in 0..4 {
            for c in 0..4 {
                let (re, im) = w2.get(r, c);
                assert!((re - expect_w2[r][c].0).abs() < 1e-15, "W2[{r}][{c}]");
                assert!((im - expect_w2[r][c].1).abs() < 1e-15, "W2[{r}][{c}]");
            }
        }
    }

    #[test]
    fn stage_pattern_matches_kronecker_construction() {
        for n in [2usize, 4, 8, 16, 64] {
            let stages = n.trailing_zeros() as usize;
            for k in 1..=stages {
                let w = build_stage_matrix(n, k).unwrap();
                assert_eq!(w.entry_count(), 2 * n);
                let expected = kron_identity(n >> k, &butterfly_block(1 << k));
                assert!(w.to_dense().max_abs_diff(&expected) < 1e-15, "n={n} k={k}");

                let mut per_row = vec![0; n];
                let mut per_col = vec![0; n];
                for (r, c, _) in w.entries() {
                    per_row[r] += 1;
                    per_col[c] += 1;
                }
                assert!(per_row.iter().all(|&c| c == 2));
                assert!(per_col.iter().all(|&c| c == 2));
            }
        }
    }

    #[test]
    fn stage_index_out_of_range() {
        assert!(matches!(
            build_stage_matrix(8, 0),
            Err(Error::InvalidStage { .. })
        ));
        assert!(matches!(
            build_stage_matrix(8, 4),
            Err(Error::InvalidStage { .. })
        ));
        assert_eq!(build_stage_matrix(8, 2).unwrap().entry_count(), 16);
    }

    #[test]
    fn stack_shapes() {
        let s2 = build_butterfly_stack(2).unwrap();
        assert_eq!(s2.factors.len(), 1);
        assert_eq!(s2.permutation(), &[0, 1]);
        let d = s2.to_dense().unwrap();
        assert_eq!(d.get(0, 0), (1.0, 0.0));
        assert_eq!(d.get(0, 1), (1.0, 0.0));
        assert_eq!(d.get(1, 0), (1.0, 0.0));
        assert_eq!(d.get(1, 1), (-1.0, 0.0));

        let s256 = build_butterfly_stack(256).unwrap();
        assert_eq!(s256.factors.len(), 8);
        let entries: usize = s256.factors.iter().map(|f| f.entry_count()).sum();
        assert_eq!(entries, 4096);
        assert!(build_butterfly_stack(12).is_err());
    }

    #[test]
    fn four_point_dense_product_is_the_dft() {
        let d = build_butterfly_stack(4).unwrap().to_dense().unwrap();
        // [[1,1,1,1],[1,-j,-1,j],[1,-1,1,-1],[1,j,-1,-j]]
        let expect = [
            [(1.0, 0.0), (1.0, 0.0), (1.0, 0.0), (1.0, 0.0)],
            [(1.0, 0.0), (0.0, -1.0), (-1.0, 0.0), (0.0, 1.0)],
            [(1.0, 0.0), (-1.0, 0.0), (1.0, 0.0), (-1.0, 0.0)],
            [(1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0)],
        ];
        for r in 0..4 {
            for c in 0..4 {
                let (re, im) = d.get(r, c);
                assert!((re - expect[r][c].0).abs() < 1e-12);
                assert!((im - expect[r][c].1).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn dense_form_matches_naive_dft_columns() {
        let n = 8;
        let d = build_butterfly_stack(n).unwrap().to_dense().unwrap();
        for col in 0..n {
            let mut e = SplitComplex::zeros(n);
            e.re[col] = 1.0;
            let column = naive_dft(&e);
            for row in 0..n {
                let (re, im) = d.get(row, col);
                assert!((re - column.re[row]).abs() < 1e-10);
                assert!((im - column.im[row]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn to_dense_refuses_huge_sizes() {
        let s = build_butterfly_stack(8192).unwrap();
        assert!(matches!(s.to_dense(), Err(Error::Shape(_))));
    }

    #[test]
    fn naive_dft_small_vectors() {
        let y = naive_dft(&SplitComplex::from_real(&[1.0, 0.0, 0.0, 0.0]));
        assert_eq!(y.re, vec![1.0; 4]);
        let y = naive_dft(&SplitComplex::from_real(&[1.0, 1.0, 1.0, 1.0]));
        assert!(y.max_abs_diff(&SplitComplex::from_real(&[4.0, 0.0, 0.0, 0.0])) < 1e-12);
        let y = naive_dft(&SplitComplex::from_real(&[0.0, 1.0, 0.0, 0.0]));
        let expect = SplitComplex::new(vec![1.0, 0.0, -1.0, 0.0], vec![0.0, -1.0, 0.0, 1.0]).unwrap();
        assert!(y.max_abs_diff(&expect) < 1e-12);
    }

    #[test]
    fn forward_examples() {
        let s = build_butterfly_stack(4).unwrap();
        let y = s.apply_forward(&SplitComplex::from_real(&[1.0, 0.0, 0.0, 0.0])).unwrap();
        assert_eq!(y, SplitComplex::from_real(&[1.0; 4]));

        let y = s.apply_forward(&SplitComplex::from_real(&[1.0, 2.0, 3.0, 4.0])).unwrap();
        let expect = SplitComplex::new(vec![10.0, -2.0, -2.0, -2.0], vec![0.0, 2.0, 0.0, -2.0]).unwrap();
        assert!(y.max_abs_diff(&expect) < 1e-12);
    }

    #[test]
    fn forward_rejects_bad_input() {
        let s = build_butterfly_stack(4).unwrap();
        assert!(matches!(
            s.apply_forward(&SplitComplex::zeros(8)),
            Err(Error::Shape(_))
        ));
        let mut x = SplitComplex::zeros(4);
        x.im[2] = f64::NAN;
        assert!(matches!(s.apply_forward(&x), Err(Error::Numeric(_))));
        x.im[2] = f64::INFINITY;
        assert!(matches!(s.apply_inverse(&x), Err(Error::Numeric(_))));
    }

    #[test]
    fn inverse_examples() {
        let s = build_butterfly_stack(4).unwrap();
        let x = s.apply_inverse(&SplitComplex::from_real(&[4.0, 0.0, 0.0, 0.0])).unwrap();
        assert!(x.max_abs_diff(&SplitComplex::from_real(&[1.0; 4])) < 1e-15);

        let spectrum = naive_dft(&SplitComplex::from_real(&[1.0, 2.0, 3.0, 4.0]));
        let x = s.apply_inverse(&spectrum).unwrap();
        assert!(x.max_abs_diff(&SplitComplex::from_real(&[1.0, 2.0, 3.0, 4.0])) < 1e-12);
    }

    #[test]
    fn parameter_counts() {
        assert_eq!(build_butterfly_stack(4).unwrap().count_parameters(), 32);
        assert_eq!(build_butterfly_stack(256).unwrap().count_parameters(), 8192);
        assert_eq!(build_butterfly_stack(512).unwrap().count_parameters(), 18432);
        assert_eq!(dense_parameter_count(512), 524_288);
    }

    #[test]
    fn mac_count_is_two_n_log_n() {
        for bits in 1..=10 {
            let n = 1usize << bits;
            let s = build_butterfly_stack(n).unwrap();
            let (_, macs) = s.apply_forward_counted(&SplitComplex::zeros(n)).unwrap();
            assert_eq!(macs, (2 * n * bits) as u64);
        }
    }

    #[test]
    fn csv_cells() {
        let d = build_butterfly_stack(2).unwrap().to_dense().unwrap();
        assert_eq!(d.to_csv(), "1+0j,1+0j\n1+0j,-1+0j\n");
        let w2 = build_stage_matrix(4, 2).unwrap().to_dense();
        let csv = w2.to_csv();
        assert!(csv.lines().nth(1).unwrap().ends_with("-1j"));
    }

    #[test]
    fn stacked_layout_roundtrip() {
        let x = SplitComplex::new(vec![1.0, 2.0], vec![3.0, 4.0]).unwrap();
        assert_eq!(x.to_stacked(), vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(SplitComplex::from_stacked(&x.to_stacked()).unwrap(), x);
        assert!(SplitComplex::from_stacked(&[1.0, 2.0, 3.0]).is_err());
        assert!(SplitComplex::new(vec![1.0], vec![]).is_err());
    }

    #[test]
    fn stacks_are_shareable_across_threads() {
        fn assert_sync<T: Send + Sync>() {}
        assert_sync::<ButterflyStack>();

        let s = build_butterfly_stack(64).unwrap();
        let x = SplitComplex::from_real(&(0..64).map(|i| (i as f64).sin()).collect::<Vec<_>>());
        let expect = s.apply_forward(&x).unwrap();
        std::thread::scope(|scope| {
            for _ in 0..4 {
                scope.spawn(|| assert_eq!(s.apply_forward(&x).unwrap(), expect));
            }
        });
    }
}
