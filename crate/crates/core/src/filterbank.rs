//! Prototype filters, block-Toeplitz synthesis filtering and the
//! compensation vector that restores complex orthogonality.
//!
//! A symbol of `N` samples is filtered by periodically extending it to the
//! prototype length `O*N` and multiplying by the prototype. Consecutive
//! symbols are staggered by `N/2` samples, so a frame of `K` symbols has
//! `M = O*N + (K-1)*N/2` output samples.

use std::f64::consts::PI;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::transforms::{daft_matrix, ChirpPair, ComplexMatrix, Daft, DaftDims, Synthesis};
use crate::{Error, Result};

/// Below this the compensation gain is treated as singular.
pub const SINGULAR_GAIN_TOL: f64 = 1e-12;

const SYMMETRY_TOL: f64 = 1e-12;

// Frequency-domain PHYDYAS coefficients, indexed by overlap factor.
const PHYDYAS_O2: [f64; 2] = [1.0, std::f64::consts::FRAC_1_SQRT_2];
const PHYDYAS_O3: [f64; 3] = [1.0, 0.911_438, 0.411_438];
const PHYDYAS_O4: [f64; 4] = [1.0, 0.971_959_83, std::f64::consts::FRAC_1_SQRT_2, 0.235_146_95];

// Weights of the even-order Hermite functions (orders 0, 4, ..., 20).
const HERMITE_WEIGHTS: [(usize, f64); 6] =
    [(0, 1.412_692_577), (4, -3.0145e-3), (8, -8.8041e-6), (12, -2.2611e-9), (16, -4.4570e-15), (20, 1.8633e-16)];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FilterKind {
    Phydyas,
    Hermite,
    Rect,
    /// Coefficients loaded from a CSV file.
    Custom,
}

impl std::fmt::Display for FilterKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            FilterKind::Phydyas => "phydyas",
            FilterKind::Hermite => "hermite",
            FilterKind::Rect => "rect",
            FilterKind::Custom => "custom",
        };
        f.write_str(s)
    }
}

/// Overlap factor `O`, stored as the integer `2*O`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Overlap(usize);

impl Overlap {
    pub fn from_halves(halves: usize) -> Result<Self> {
        if halves == 0 {
            return Err(Error::UnsupportedFilter("overlap factor must be at least 0.5".into()));
        }
        Ok(Self(halves))
    }

    pub fn from_f64(o: f64) -> Result<Self> {
        let halves = 2.0 * o;
        if !halves.is_finite() || halves < 1.0 || (halves - halves.round()).abs() > 1e-9 {
            return Err(Error::UnsupportedFilter(format!("overlap factor {o} is not a positive multiple of 0.5")));
        }
        Self::from_halves(halves.round() as usize)
    }

    /// Number of `N/2` half-blocks, i.e. `2*O`.
    pub fn halves(self) -> usize {
        self.0
    }

    pub fn value(self) -> f64 {
        self.0 as f64 / 2.0
    }

    fn integer(self) -> Option<usize> {
        self.0.is_multiple_of(2).then_some(self.0 / 2)
    }
}

/// Real, even-symmetric, unit-energy prototype filter of length `O*N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrototypeFilter {
    kind: FilterKind,
    overlap: Overlap,
    n: usize,
    coeffs: Vec<f64>,
}

impl PrototypeFilter {
    pub fn kind(&self) -> FilterKind {
        self.kind
    }

    pub fn overlap(&self) -> Overlap {
        self.overlap
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Wraps user-supplied coefficients after checking length and symmetry.
    /// The coefficients are rescaled to unit energy.
    pub fn custom(coeffs: Vec<f64>, overlap: Overlap, n: usize) -> Result<Self> {
        let expected = filter_len(overlap, n)?;
        if coeffs.len() != expected {
            return Err(Error::LengthMismatch { expected, actual: coeffs.len() });
        }
        let coeffs = normalize(coeffs)?;
        let len = coeffs.len();
        let scale = coeffs.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        for m in 0..len / 2 {
            if (coeffs[m] - coeffs[len - 1 - m]).abs() > SYMMETRY_TOL * scale.max(1.0) {
                return Err(Error::UnsupportedFilter(format!("custom prototype is not even-symmetric at index {m}")));
            }
        }
        Ok(Self { kind: FilterKind::Custom, overlap, n, coeffs })
    }

    /// Loads one coefficient per line; blank lines and `#` comments are
    /// skipped.
    pub fn load_csv(path: impl AsRef<Path>, overlap: Overlap, n: usize) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut coeffs = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let v: f64 = line
                .parse()
                .map_err(|e| Error::Parse { line: i + 1, message: format!("bad coefficient {line:?}: {e}") })?;
            coeffs.push(v);
        }
        Self::custom(coeffs, overlap, n)
    }

    /// Single-column CSV, one coefficient per line at full precision.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.coeffs.len() * 24);
        for c in &self.coeffs {
            out.push_str(&format!("{c:?}\n"));
        }
        out
    }

    /// Power profile `w[i] = sum_p g[i + p*N]^2` of the periodically
    /// extended window. `G~^T G~` equals `diag(w)`.
    pub fn power_profile(&self) -> Vec<f64> {
        let mut w = vec![0.0; self.n];
        for (m, g) in self.coeffs.iter().enumerate() {
            w[m % self.n] += g * g;
        }
        w
    }
}

fn filter_len(overlap: Overlap, n: usize) -> Result<usize> {
    if n == 0 || !n.is_multiple_of(2) {
        return Err(Error::InvalidDimension(format!("filter-bank size N = {n} must be even")));
    }
    Ok(overlap.halves() * n / 2)
}

fn normalize(mut coeffs: Vec<f64>) -> Result<Vec<f64>> {
    if coeffs.iter().any(|v| !v.is_finite()) {
        return Err(Error::UnsupportedFilter("non-finite prototype coefficient".into()));
    }
    let energy: f64 = coeffs.iter().map(|v| v * v).sum();
    if energy <= 0.0 {
        return Err(Error::ZeroEnergy);
    }
    let s = 1.0 / energy.sqrt();
    coeffs.iter_mut().for_each(|v| *v *= s);
    Ok(coeffs)
}

/// Physicists' Hermite polynomial `H_order(x)` by the three-term recurrence.
fn hermite_poly(order: usize, x: f64) -> f64 {
    let (mut prev, mut cur) = (1.0, 2.0 * x);
    if order == 0 {
        return prev;
    }
    for k in 1..order {
        let next = 2.0 * x * cur - 2.0 * k as f64 * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// Builds a prototype filter of the given kind.
///
/// * PHYDYAS: frequency-sampled design, integer `O` in `1..=4`. Samples are
///   taken at half-integer offsets `m + 1/2` so the pulse is exactly
///   symmetric about `(O*N - 1)/2`.
/// * Hermite: Gaussian-weighted sum of Hermite functions with time scale
///   `T0 = N` samples, sampled on `O*N` points centred at `(O*N - 1)/2`.
/// * Rect: constant, `O = 1` only.
pub fn prototype_filter(kind: FilterKind, overlap: Overlap, n: usize) -> Result<PrototypeFilter> {
    let len = filter_len(overlap, n)?;
    let raw: Vec<f64> = match kind {
        FilterKind::Phydyas => {
            let h: &[f64] = match overlap.integer() {
                Some(1) => &[1.0],
                Some(2) => &PHYDYAS_O2,
                Some(3) => &PHYDYAS_O3,
                Some(4) => &PHYDYAS_O4,
                _ => {
                    return Err(Error::UnsupportedFilter(format!(
                        "PHYDYAS needs an integer overlap factor in 1..=4, got {}",
                        overlap.value()
                    )))
                }
            };
            (0..len)
                .map(|m| {
                    let t = (m as f64 + 0.5) / len as f64;
                    h[0] + h
                        .iter()
                        .enumerate()
                        .skip(1)
                        .map(|(k, hk)| {
                            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                            2.0 * sign * hk * (2.0 * PI * k as f64 * t).cos()
                        })
                        .sum::<f64>()
                })
                .collect()
        }
        FilterKind::Hermite => {
            if overlap.halves() < 2 {
                return Err(Error::UnsupportedFilter("Hermite prototype needs O >= 1".into()));
            }
            let centre = (len as f64 - 1.0) / 2.0;
            (0..len)
                .map(|m| {
                    let t = (m as f64 - centre) / n as f64;
                    let x = 2.0 * PI.sqrt() * t;
                    let poly: f64 = HERMITE_WEIGHTS.iter().map(|&(k, a)| a * hermite_poly(k, x)).sum();
                    (-2.0 * PI * t * t).exp() * poly
                })
                .collect()
        }
        FilterKind::Rect => {
            if overlap.halves() != 2 {
                return Err(Error::UnsupportedFilter("rectangular prototype needs O = 1".into()));
            }
            vec![1.0; len]
        }
        FilterKind::Custom => {
            return Err(Error::UnsupportedFilter("custom prototypes are loaded with PrototypeFilter::load_csv".into()))
        }
    };
    Ok(PrototypeFilter { kind, overlap, n, coeffs: normalize(raw)? })
}

/// Diagonals of the `2*O` half-blocks `G_p = diag(g[p*N/2 .. p*N/2 + N/2])`.
pub fn filter_blocks(filter: &PrototypeFilter) -> Vec<Vec<f64>> {
    filter.coeffs.chunks(filter.n / 2).map(|c| c.to_vec()).collect()
}

/// Where the time origin of each synthesized `N`-sample block sits inside
/// the prototype window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BlockOrigin {
    /// Block sample 0 at window sample 0 (plain periodic extension).
    Start,
    /// Block sample 0 at the window centre `O*N/2`.
    #[default]
    Centered,
}

impl BlockOrigin {
    /// Circular rotation applied to each synthesized block.
    pub fn rotation(self, filter: &PrototypeFilter) -> Result<usize> {
        match self {
            BlockOrigin::Start => Ok(0),
            BlockOrigin::Centered => {
                let n = filter.n;
                let twice_shift = filter.overlap.halves() * n / 2;
                if !twice_shift.is_multiple_of(2) {
                    return Err(Error::InvalidDimension(format!(
                        "centred block origin needs O*N/2 to be an integer (N = {n})"
                    )));
                }
                Ok((twice_shift / 2) % n)
            }
        }
    }
}

/// Block-Toeplitz synthesis filter for a frame of `K` symbols.
#[derive(Debug, Clone)]
pub struct FilterBank {
    filter: PrototypeFilter,
    k: usize,
}

/// Builds the filter-bank operator for `K` staggered symbols.
pub fn assemble_filter_matrix(filter: PrototypeFilter, k: usize) -> Result<FilterBank> {
    FilterBank::new(filter, k)
}

impl FilterBank {
    pub fn new(filter: PrototypeFilter, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidDimension("K must be at least 1".into()));
        }
        Ok(Self { filter, k })
    }

    pub fn filter(&self) -> &PrototypeFilter {
        &self.filter
    }

    pub fn symbols(&self) -> usize {
        self.k
    }

    pub fn input_len(&self) -> usize {
        self.filter.n * self.k
    }

    /// `M = O*N + (K-1)*N/2`.
    pub fn output_len(&self) -> usize {
        self.filter.len() + (self.k - 1) * self.filter.n / 2
    }

    /// Dense `M x N*K` matrix laid out block by block: half-block `G_p` of
    /// symbol `k` sits at block row `p + k` and in the first half-column of
    /// the symbol for even `p`, the second for odd `p`.
    pub fn matrix(&self) -> DMatrix<f64> {
        let half = self.filter.n / 2;
        let blocks = filter_blocks(&self.filter);
        let mut g = DMatrix::zeros(self.output_len(), self.input_len());
        for k in 0..self.k {
            for (p, block) in blocks.iter().enumerate() {
                let row0 = (p + k) * half;
                let col0 = k * self.filter.n + (p % 2) * half;
                for (i, v) in block.iter().enumerate() {
                    g[(row0 + i, col0 + i)] = *v;
                }
            }
        }
        g
    }

    /// Overlap-add synthesis `G y` for `y` of length `N*K`.
    pub fn synthesize(&self, input: &[Complex64]) -> Result<Vec<Complex64>> {
        if input.len() != self.input_len() {
            return Err(Error::LengthMismatch { expected: self.input_len(), actual: input.len() });
        }
        let n = self.filter.n;
        let mut out = vec![Complex64::default(); self.output_len()];
        for (k, block) in input.chunks(n).enumerate() {
            self.add_block(k, block, &mut out);
        }
        Ok(out)
    }

    /// Adds the filtered block of symbol `k` into `out`.
    pub fn add_block(&self, k: usize, block: &[Complex64], out: &mut [Complex64]) {
        let n = self.filter.n;
        let offset = k * n / 2;
        for (m, g) in self.filter.coeffs.iter().enumerate() {
            out[offset + m] += block[m % n] * g;
        }
    }

    /// Analysis `G^T r` for `r` of length `M`.
    pub fn analyze(&self, signal: &[Complex64]) -> Result<Vec<Complex64>> {
        if signal.len() != self.output_len() {
            return Err(Error::LengthMismatch { expected: self.output_len(), actual: signal.len() });
        }
        let n = self.filter.n;
        let mut out = vec![Complex64::default(); self.input_len()];
        for (k, block) in out.chunks_mut(n).enumerate() {
            self.analyze_block(k, signal, block);
        }
        Ok(out)
    }

    /// Writes `G_k^T r` (the `N` analysis outputs of symbol `k`) to `block`.
    pub fn analyze_block(&self, k: usize, signal: &[Complex64], block: &mut [Complex64]) {
        let n = self.filter.n;
        let offset = k * n / 2;
        block.iter_mut().for_each(|v| *v = Complex64::default());
        for (m, g) in self.filter.coeffs.iter().enumerate() {
            block[m % n] += signal[offset + m] * g;
        }
    }
}

/// Indices of the data-carrying rows: the first and last `L/4`.
pub fn data_rows(l: usize) -> impl Iterator<Item = usize> + Clone {
    let q = l / 4;
    (0..q).chain(l - q..l)
}

pub fn is_data_row(l: usize, row: usize) -> bool {
    let q = l / 4;
    row < q || row >= l - q
}

/// Per-subcarrier compensation weights `b~`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompensationVector {
    values: Vec<f64>,
}

impl CompensationVector {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Uniform weight on the data rows; used for uncompensated ablations.
    pub fn uniform(l: usize, value: f64) -> Self {
        let values = (0..l).map(|i| if is_data_row(l, i) { value } else { 0.0 }).collect();
        Self { values }
    }

    /// Element-wise square, for one-sided application.
    pub fn squared(&self) -> Self {
        Self { values: self.values.iter().map(|v| v * v).collect() }
    }
}

/// Columns of `S W_L`, where `S` is the (rotated) synthesis operator.
fn spread_columns(dims: DaftDims, precoder: &Daft, synthesis: &Synthesis) -> Vec<Vec<Complex64>> {
    (0..dims.l())
        .map(|l| {
            let mut e = vec![Complex64::default(); dims.l()];
            e[l] = Complex64::new(1.0, 0.0);
            precoder.apply(&mut e);
            synthesis.apply(&e)
        })
        .collect()
}

/// Diagonal `c~ = diag(W_L^H Q_P^H G~^T G~ Q_P W_L)` for all `L` rows.
///
/// Uses `G~^T G~ = diag(w)` so each entry is a weighted column energy.
pub fn compensation_gains(
    dims: DaftDims,
    chirps_pre: ChirpPair,
    chirps_mod: ChirpPair,
    filter: &PrototypeFilter,
    origin: BlockOrigin,
) -> Result<Vec<f64>> {
    check_filter(dims, filter)?;
    let precoder = Daft::new(chirps_pre, dims.l())?;
    let synthesis = Synthesis::with_rotation(dims, chirps_mod, origin.rotation(filter)?)?;
    let w = filter.power_profile();
    Ok(spread_columns(dims, &precoder, &synthesis)
        .iter()
        .map(|col| col.iter().zip(&w).map(|(v, wi)| v.norm_sqr() * wi).sum())
        .collect())
}

/// Compensation vector: `b~[l] = sqrt(1 / c~[l])` on data rows, zero on the
/// middle `L/2` rows.
pub fn compensation_vector(
    dims: DaftDims,
    chirps_pre: ChirpPair,
    chirps_mod: ChirpPair,
    filter: &PrototypeFilter,
    origin: BlockOrigin,
) -> Result<CompensationVector> {
    let gains = compensation_gains(dims, chirps_pre, chirps_mod, filter, origin)?;
    let l = dims.l();
    let mut values = vec![0.0; l];
    for row in data_rows(l) {
        let c = gains[row];
        if !(c > SINGULAR_GAIN_TOL) {
            return Err(Error::SingularCompensation { index: row, value: c });
        }
        values[row] = (1.0 / c).sqrt();
    }
    Ok(CompensationVector { values })
}

fn check_filter(dims: DaftDims, filter: &PrototypeFilter) -> Result<()> {
    if filter.n != dims.n() {
        return Err(Error::InvalidDimension(format!(
            "filter designed for N = {} but dims use N = {}",
            filter.n,
            dims.n()
        )));
    }
    Ok(())
}

/// Single-symbol orthogonality matrix
/// `C_f^H Q_P^H G~^T G~ Q_P C_f` with `C_f = W_L diag(b~)`, built densely.
pub fn orthogonality_matrix(
    dims: DaftDims,
    chirps_pre: ChirpPair,
    chirps_mod: ChirpPair,
    filter: &PrototypeFilter,
    origin: BlockOrigin,
    compensation: &CompensationVector,
) -> Result<ComplexMatrix> {
    check_filter(dims, filter)?;
    let synthesis = Synthesis::with_rotation(dims, chirps_mod, origin.rotation(filter)?)?;
    let q = synthesis.matrix(chirps_mod)?;
    let g = FilterBank::new(filter.clone(), 1)?.matrix().map(|v| Complex64::new(v, 0.0));
    let b = DVector::from_iterator(dims.l(), compensation.values().iter().map(|v| Complex64::new(*v, 0.0)));
    let cf = daft_matrix(chirps_pre, dims.l())? * ComplexMatrix::from_diagonal(&b);
    let gq = g * q * cf;
    Ok(gq.adjoint() * gq)
}
