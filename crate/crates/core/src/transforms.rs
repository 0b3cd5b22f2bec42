//! DFT, chirp and discrete affine Fourier transform (DAFT) operators.
//!
//! Every transform here is unitary: the DFT carries a `1/sqrt(n)` factor so
//! forward/inverse round trips are exact isometries. The DFT uses the
//! positive exponent `exp(+j 2 pi k l / n)`; chirp diagonals use the negative
//! exponent `exp(-j 2 pi c m^2)`.
//!
//! Each operator exists twice: as a dense [`ComplexMatrix`] constructor (the
//! reference) and as an FFT-backed fast path ([`Daft`], [`Synthesis`]).

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Dense complex matrix used for every reference operator.
pub type ComplexMatrix = DMatrix<Complex64>;

/// Digital chirp rates of a DAFT, in cycles per sample squared.
///
/// `c1` scales the left (output-side) chirp of [`daft_matrix`], `c2` the
/// right (input-side) one.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ChirpPair {
    pub c1: f64,
    pub c2: f64,
}

impl ChirpPair {
    pub fn new(c1: f64, c2: f64) -> Result<Self> {
        if !c1.is_finite() || !c2.is_finite() {
            return Err(Error::InvalidArgument(format!("chirp rates must be finite (c1 = {c1}, c2 = {c2})")));
        }
        Ok(Self { c1, c2 })
    }

    pub const fn zero() -> Self {
        Self { c1: 0.0, c2: 0.0 }
    }
}

/// Subcarrier count `L`, chirp length `P` and filter-bank size `N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DaftDims {
    l: usize,
    p: usize,
    n: usize,
}

impl DaftDims {
    /// Validated dimensions: `L % 4 == 0`, all even, `L < P <= N`.
    ///
    /// `P == N` is accepted as a degenerate configuration (no sub-Nyquist
    /// margin); `P > N` and `P <= L` are rejected.
    pub fn new(l: usize, p: usize, n: usize) -> Result<Self> {
        let dims = Self::permissive(l, p, n)?;
        if l == p {
            return Err(Error::InvalidDimension(format!(
                "P = {p} must exceed L = {l} or the precoding DAFT is cancelled by the modulator"
            )));
        }
        Ok(dims)
    }

    /// Like [`DaftDims::new`] but also accepts `L == P`, used for trivial
    /// chains in tests and ablations.
    pub fn permissive(l: usize, p: usize, n: usize) -> Result<Self> {
        if l == 0 || p == 0 || n == 0 {
            return Err(Error::InvalidDimension(format!("dimensions must be positive (L = {l}, P = {p}, N = {n})")));
        }
        if !l.is_multiple_of(4) {
            return Err(Error::InvalidDimension(format!("L = {l} is not divisible by 4")));
        }
        if !p.is_multiple_of(2) || !n.is_multiple_of(2) {
            return Err(Error::InvalidDimension(format!("P = {p} and N = {n} must be even")));
        }
        if l > p {
            return Err(Error::InvalidDimension(format!("L = {l} exceeds P = {p}")));
        }
        if p > n {
            return Err(Error::InvalidDimension(format!(
                "P = {p} exceeds N = {n}: chirps would be sampled above the filter-bank Nyquist rate"
            )));
        }
        Ok(Self { l, p, n })
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn n(&self) -> usize {
        self.n
    }
}

fn check_size(n: usize) -> Result<()> {
    if n == 0 {
        Err(Error::InvalidDimension("transform size must be at least 1".into()))
    } else {
        Ok(())
    }
}

/// Phases `exp(-j 2 pi c m^2)` for `m = 0..n`.
///
/// `m^2` is reduced modulo `1/c`-periodicity only through `rem_euclid` on
/// the product, which keeps the argument small for large `m`.
pub fn chirp_phases(c: f64, n: usize) -> Vec<Complex64> {
    (0..n)
        .map(|m| {
            let m = m as f64;
            let cycles = (c * m * m).rem_euclid(1.0);
            Complex64::from_polar(1.0, -2.0 * PI * cycles)
        })
        .collect()
}

/// Unitary `n`-point DFT matrix with entries `exp(+j 2 pi k l / n) / sqrt(n)`.
pub fn dft_matrix(n: usize) -> Result<ComplexMatrix> {
    check_size(n)?;
    let scale = 1.0 / (n as f64).sqrt();
    Ok(ComplexMatrix::from_fn(n, n, |k, l| {
        let idx = (k * l) % n;
        Complex64::from_polar(scale, 2.0 * PI * idx as f64 / n as f64)
    }))
}

/// Diagonal chirp matrix `diag(exp(-j 2 pi c m^2))`.
pub fn chirp_diag(c: f64, n: usize) -> Result<ComplexMatrix> {
    check_size(n)?;
    if !c.is_finite() {
        return Err(Error::InvalidArgument(format!("chirp rate {c} is not finite")));
    }
    let phases = chirp_phases(c, n);
    Ok(ComplexMatrix::from_diagonal(&nalgebra::DVector::from_vec(phases)))
}

/// DAFT matrix `Lambda_{c1} F_n Lambda_{c2}`.
pub fn daft_matrix(chirps: ChirpPair, n: usize) -> Result<ComplexMatrix> {
    check_size(n)?;
    let left = chirp_phases(chirps.c1, n);
    let right = chirp_phases(chirps.c2, n);
    let f = dft_matrix(n)?;
    Ok(ComplexMatrix::from_fn(n, n, |k, l| left[k] * f[(k, l)] * right[l]))
}

/// First `L` rows of the `P`-point DAFT: `[I_L 0] W_P`.
pub fn truncated_daft(dims: DaftDims, chirps: ChirpPair) -> Result<ComplexMatrix> {
    let w = daft_matrix(chirps, dims.p)?;
    Ok(w.rows(0, dims.l).into_owned())
}

/// Frequency-domain zero padding `T` of shape `N x P`.
///
/// Rows `0..P/2` select the last `P/2` inputs, rows `N-P/2..N` select the
/// first `P/2` inputs, everything in between is zero.
pub fn freq_zero_pad(n: usize, p: usize) -> Result<ComplexMatrix> {
    if p == 0 || n < p || !n.is_multiple_of(2) || !p.is_multiple_of(2) {
        return Err(Error::InvalidDimension(format!("zero padding needs even N >= P > 0 (N = {n}, P = {p})")));
    }
    let half = p / 2;
    let mut t = ComplexMatrix::zeros(n, p);
    for i in 0..half {
        t[(i, half + i)] = Complex64::new(1.0, 0.0);
        t[(n - half + i, i)] = Complex64::new(1.0, 0.0);
    }
    Ok(t)
}

/// Per-block synthesis matrix `Q_P = F_N^H T F_P W~_P^H` of shape `N x L`.
pub fn synthesis_matrix(dims: DaftDims, chirps: ChirpPair) -> Result<ComplexMatrix> {
    let f_n = dft_matrix(dims.n)?;
    let t = freq_zero_pad(dims.n, dims.p)?;
    let f_p = dft_matrix(dims.p)?;
    let w_trunc = truncated_daft(dims, chirps)?;
    Ok(f_n.adjoint() * t * f_p * w_trunc.adjoint())
}

/// Circularly rotates the rows of `m` downward by `shift`.
///
/// Row `i` of the input becomes row `(i + shift) mod rows` of the output,
/// i.e. a circular delay of every column.
pub fn rotate_rows(m: &ComplexMatrix, shift: usize) -> ComplexMatrix {
    let rows = m.nrows();
    ComplexMatrix::from_fn(rows, m.ncols(), |i, j| m[((i + rows - shift % rows) % rows, j)])
}

/// FFT-backed unitary DAFT of a fixed size.
#[derive(Clone)]
pub struct Daft {
    n: usize,
    left: Vec<Complex64>,
    right: Vec<Complex64>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    scale: f64,
}

impl std::fmt::Debug for Daft {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Daft").field("n", &self.n).finish()
    }
}

impl Daft {
    pub fn new(chirps: ChirpPair, n: usize) -> Result<Self> {
        check_size(n)?;
        let mut planner = FftPlanner::new();
        Ok(Self {
            n,
            left: chirp_phases(chirps.c1, n),
            right: chirp_phases(chirps.c2, n),
            fwd: planner.plan_fft_forward(n),
            inv: planner.plan_fft_inverse(n),
            scale: 1.0 / (n as f64).sqrt(),
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// In-place `W x`.
    pub fn apply(&self, x: &mut [Complex64]) {
        debug_assert_eq!(x.len(), self.n);
        for (v, r) in x.iter_mut().zip(&self.right) {
            *v *= r;
        }
        self.inv.process(x);
        for (v, l) in x.iter_mut().zip(&self.left) {
            *v *= l * self.scale;
        }
    }

    /// In-place `W^H y`.
    pub fn apply_adjoint(&self, y: &mut [Complex64]) {
        debug_assert_eq!(y.len(), self.n);
        for (v, l) in y.iter_mut().zip(&self.left) {
            *v *= l.conj();
        }
        self.fwd.process(y);
        for (v, r) in y.iter_mut().zip(&self.right) {
            *v *= r.conj() * self.scale;
        }
    }
}

/// Unitary `F_n` (inverse FFT direction) applied in place.
pub fn dft_apply(x: &mut [Complex64]) {
    let n = x.len();
    if n == 0 {
        return;
    }
    FftPlanner::new().plan_fft_inverse(n).process(x);
    let s = 1.0 / (n as f64).sqrt();
    x.iter_mut().for_each(|v| *v *= s);
}

/// Band-limited interpolation of one period of `x` by an integer factor.
///
/// The spectrum is zero-padded around its centre; the Nyquist bin of an
/// even-length input is split evenly between both halves. Output samples at
/// multiples of `factor` reproduce `x`.
pub fn spectral_interpolate(x: &[Complex64], factor: usize) -> Result<Vec<Complex64>> {
    if factor == 0 {
        return Err(Error::InvalidArgument("interpolation factor must be at least 1".into()));
    }
    let n = x.len();
    if factor == 1 || n == 0 {
        return Ok(x.to_vec());
    }
    let mut planner = FftPlanner::new();
    let mut spec = x.to_vec();
    planner.plan_fft_forward(n).process(&mut spec);
    let big = n * factor;
    let mut out = vec![Complex64::default(); big];
    for (k, v) in spec.into_iter().enumerate() {
        if n.is_multiple_of(2) && k == n / 2 {
            out[k] += v * 0.5;
            out[big - n + k] += v * 0.5;
        } else if 2 * k < n {
            out[k] = v;
        } else {
            out[big - n + k] = v;
        }
    }
    planner.plan_fft_inverse(big).process(&mut out);
    let s = 1.0 / n as f64;
    out.iter_mut().for_each(|v| *v *= s);
    Ok(out)
}

/// Fast application of the synthesis operator `Q_P`, optionally followed
/// by a circular rotation of the `N`-sample output block.
#[derive(Clone)]
pub struct Synthesis {
    dims: DaftDims,
    modulator: Daft,
    f_p: Arc<dyn Fft<f64>>,
    f_p_adj: Arc<dyn Fft<f64>>,
    f_n: Arc<dyn Fft<f64>>,
    f_n_adj: Arc<dyn Fft<f64>>,
    rotation: usize,
}

impl std::fmt::Debug for Synthesis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Synthesis").field("dims", &self.dims).field("rotation", &self.rotation).finish()
    }
}

impl Synthesis {
    pub fn new(dims: DaftDims, chirps: ChirpPair) -> Result<Self> {
        Self::with_rotation(dims, chirps, 0)
    }

    pub fn with_rotation(dims: DaftDims, chirps: ChirpPair, rotation: usize) -> Result<Self> {
        let mut planner = FftPlanner::new();
        Ok(Self {
            dims,
            modulator: Daft::new(chirps, dims.p)?,
            f_p: planner.plan_fft_inverse(dims.p),
            f_p_adj: planner.plan_fft_forward(dims.p),
            f_n: planner.plan_fft_inverse(dims.n),
            f_n_adj: planner.plan_fft_forward(dims.n),
            rotation: rotation % dims.n,
        })
    }

    pub fn dims(&self) -> DaftDims {
        self.dims
    }

    pub fn rotation(&self) -> usize {
        self.rotation
    }

    /// Dense counterpart of this operator (reference path).
    pub fn matrix(&self, chirps: ChirpPair) -> Result<ComplexMatrix> {
        Ok(rotate_rows(&synthesis_matrix(self.dims, chirps)?, self.rotation))
    }

    /// `Q_P x` for a length-`L` input; returns `N` samples.
    pub fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        let DaftDims { l, p, n } = self.dims;
        debug_assert_eq!(x.len(), l);
        let mut u = vec![Complex64::default(); p];
        u[..l].copy_from_slice(x);
        self.modulator.apply_adjoint(&mut u);
        self.f_p.process(&mut u);
        let half = p / 2;
        let mut z = vec![Complex64::default(); n];
        z[..half].copy_from_slice(&u[half..]);
        z[n - half..].copy_from_slice(&u[..half]);
        self.f_n_adj.process(&mut z);
        let s = 1.0 / ((p * n) as f64).sqrt();
        let mut out = vec![Complex64::default(); n];
        for (i, v) in z.into_iter().enumerate() {
            out[(i + self.rotation) % n] = v * s;
        }
        out
    }

    /// `Q_P^H y` for a length-`N` input; returns `L` values.
    pub fn adjoint(&self, y: &[Complex64]) -> Vec<Complex64> {
        let DaftDims { l, p, n } = self.dims;
        debug_assert_eq!(y.len(), n);
        let mut z: Vec<Complex64> = (0..n).map(|i| y[(i + self.rotation) % n]).collect();
        self.f_n.process(&mut z);
        let half = p / 2;
        let mut u = vec![Complex64::default(); p];
        u[half..].copy_from_slice(&z[..half]);
        u[..half].copy_from_slice(&z[n - half..]);
        self.f_p_adj.process(&mut u);
        let s = 1.0 / ((p * n) as f64).sqrt();
        u.iter_mut().for_each(|v| *v *= s);
        self.modulator.apply(&mut u);
        u.truncate(l);
        u
    }
}
