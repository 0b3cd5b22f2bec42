//! Doubly-dispersive channel model, chirp parameter selection, effective
//! channels and linear equalization.
//!
//! Each path `r` contributes `h_r Phi_r Z^{f_r} Pi^{l_r}`: a circular delay
//! by `l_r` samples, a Doppler ramp `exp(-j 2 pi f_r m / M)` and the prefix
//! phase correction on the first `l_r` samples.

use std::f64::consts::PI;

use nalgebra::DVector;
use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::filterbank::{data_rows, FilterBank};
use crate::modem::{afdm_demodulate, afdm_modulate, AfbmModem, AfdmBaseline, TimeSignal, WaveformParams};
use crate::rng::{complex_normal, trial_rng};
use crate::transforms::{ChirpPair, ComplexMatrix, Synthesis};
use crate::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Relative pivot below which a regularized system counts as singular.
const PIVOT_TOL: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathSpec {
    pub gain: Complex64,
    /// Integer delay in samples.
    pub delay: usize,
    /// Normalized digital Doppler shift.
    pub doppler: f64,
}

impl PathSpec {
    pub fn new(gain: Complex64, delay: usize, doppler: f64) -> Self {
        Self { gain, delay, doppler }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelSpec {
    paths: Vec<PathSpec>,
    m: usize,
    c1: f64,
}

impl ChannelSpec {
    /// Channel over `m`-sample frames; gains are kept as given.
    pub fn new(paths: Vec<PathSpec>, m: usize, c1: f64) -> Result<Self> {
        if paths.is_empty() {
            return Err(Error::InvalidArgument("a channel needs at least one path".into()));
        }
        if m == 0 {
            return Err(Error::InvalidDimension("channel length must be positive".into()));
        }
        for (i, p) in paths.iter().enumerate() {
            if p.delay >= m {
                return Err(Error::InvalidArgument(format!(
                    "path {i}: delay {} must be below the frame length {m}",
                    p.delay
                )));
            }
            if !p.doppler.is_finite() || !p.gain.re.is_finite() || !p.gain.im.is_finite() {
                return Err(Error::InvalidArgument(format!("path {i} has non-finite parameters")));
            }
        }
        if !c1.is_finite() {
            return Err(Error::InvalidArgument("chirp rate must be finite".into()));
        }
        Ok(Self { paths, m, c1 })
    }

    /// Like [`ChannelSpec::new`] with gains rescaled to unit total power.
    pub fn normalized(paths: Vec<PathSpec>, m: usize, c1: f64) -> Result<Self> {
        let mut spec = Self::new(paths, m, c1)?;
        let power: f64 = spec.paths.iter().map(|p| p.gain.norm_sqr()).sum();
        if power <= 0.0 {
            return Err(Error::ZeroEnergy);
        }
        let s = 1.0 / power.sqrt();
        spec.paths.iter_mut().for_each(|p| p.gain *= s);
        Ok(spec)
    }

    pub fn paths(&self) -> &[PathSpec] {
        &self.paths
    }

    pub fn len(&self) -> usize {
        self.m
    }

    pub fn is_empty(&self) -> bool {
        self.m == 0
    }

    pub fn c1(&self) -> f64 {
        self.c1
    }

    pub fn max_delay(&self) -> usize {
        self.paths.iter().map(|p| p.delay).max().unwrap_or(0)
    }

    pub fn max_doppler(&self) -> f64 {
        self.paths.iter().map(|p| p.doppler.abs()).fold(0.0, f64::max)
    }

    /// Same geometry over a different frame length and chirp.
    pub fn with_frame(&self, m: usize, c1: f64) -> Result<Self> {
        Self::new(self.paths.clone(), m, c1)
    }

    /// Keeps delays and Dopplers; each gain becomes `|h_r|` times a unit
    /// complex Gaussian draw.
    pub fn rayleigh<R: Rng + ?Sized>(&self, rng: &mut R) -> Self {
        let mut spec = self.clone();
        for p in &mut spec.paths {
            p.gain = complex_normal(rng, 1.0) * p.gain.norm();
        }
        spec
    }

    /// Diagonal factor of path `p` at sample `m`: `h Phi[m] Z^f[m]`.
    fn tap(&self, p: &PathSpec, m: usize) -> Complex64 {
        let big = self.m as f64;
        let doppler = Complex64::from_polar(1.0, -2.0 * PI * (p.doppler * m as f64 / big).rem_euclid(1.0));
        let prefix = if m < p.delay {
            let back = (p.delay - m) as f64;
            let cycles = (self.c1 * (big * big - 2.0 * big * back)).rem_euclid(1.0);
            Complex64::from_polar(1.0, -2.0 * PI * cycles)
        } else {
            Complex64::new(1.0, 0.0)
        };
        p.gain * prefix * doppler
    }

    /// `H s` without forming `H`.
    pub fn apply(&self, s: &[Complex64]) -> Result<Vec<Complex64>> {
        if s.len() != self.m {
            return Err(Error::LengthMismatch { expected: self.m, actual: s.len() });
        }
        let mut out = vec![ZERO; self.m];
        for p in &self.paths {
            for (m, o) in out.iter_mut().enumerate() {
                *o += self.tap(p, m) * s[(m + self.m - p.delay) % self.m];
            }
        }
        Ok(out)
    }
}

/// Chirp rates meeting `2 (f_max + xi)(l_max + 1) + l_max <= P`.
///
/// Returns `c1 = (2 (ceil(f_max) + xi) + 1) / (2 P)` and `c2 = 0`.
pub fn pick_chirp_params(ell_max: usize, f_max: f64, xi: usize, p: usize) -> Result<ChirpPair> {
    if p == 0 {
        return Err(Error::InvalidArgument("chirp length P must be positive".into()));
    }
    if !f_max.is_finite() || f_max < 0.0 {
        return Err(Error::InvalidArgument(format!("maximum Doppler {f_max} must be finite and nonnegative")));
    }
    let lhs = chirp_condition_lhs(ell_max, f_max, xi);
    if lhs > p as f64 {
        return Err(Error::Infeasible { lhs, p });
    }
    let alpha = f_max.ceil() + xi as f64;
    ChirpPair::new((2.0 * alpha + 1.0) / (2.0 * p as f64), 0.0)
}

/// Left-hand side of the chirp feasibility inequality.
pub fn chirp_condition_lhs(ell_max: usize, f_max: f64, xi: usize) -> f64 {
    2.0 * (f_max + xi as f64) * (ell_max as f64 + 1.0) + ell_max as f64
}

/// Dense `M x M` channel matrix.
pub fn build_channel(spec: &ChannelSpec) -> ComplexMatrix {
    let m = spec.m;
    let mut h = ComplexMatrix::zeros(m, m);
    for p in &spec.paths {
        for row in 0..m {
            h[(row, (row + m - p.delay) % m)] += spec.tap(p, row);
        }
    }
    h
}

/// Adds circular complex Gaussian noise of the given per-sample variance.
pub fn add_noise<R: Rng + ?Sized>(samples: &mut [Complex64], variance: f64, rng: &mut R) {
    if variance > 0.0 {
        samples.iter_mut().for_each(|v| *v += complex_normal(rng, variance));
    }
}

/// `r = H s + n` with the noise variance set from the measured power of
/// `H s`. `snr_db = None` disables noise.
pub fn apply_channel(s: &TimeSignal, spec: &ChannelSpec, snr_db: Option<f64>, seed: u64) -> Result<TimeSignal> {
    let mut samples = spec.apply(&s.samples)?;
    if let Some(snr) = snr_db {
        if snr.is_nan() {
            return Err(Error::InvalidArgument("SNR is NaN".into()));
        }
        if snr.is_finite() {
            let power = samples.iter().map(|v| v.norm_sqr()).sum::<f64>() / samples.len() as f64;
            let mut rng = trial_rng(seed, 0);
            add_noise(&mut samples, power * 10f64.powf(-snr / 10.0), &mut rng);
        }
    }
    Ok(TimeSignal { samples, sample_rate: s.sample_rate })
}

/// Effective channel between spread symbols and demodulated samples of a
/// single symbol.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveChannel {
    pub matrix: ComplexMatrix,
}

impl EffectiveChannel {
    /// Dense magnitude matrix as CSV, one row per line.
    pub fn magnitude_csv(&self) -> String {
        let mut out = String::new();
        for i in 0..self.matrix.nrows() {
            let row: Vec<String> =
                (0..self.matrix.ncols()).map(|j| crate::csv::format_float(self.matrix[(i, j)].norm())).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    /// Energy on each circular diagonal: `E(d) = sum_i |H[(i + d) mod L, i]|^2`.
    pub fn diagonal_energy(&self) -> Vec<f64> {
        diagonal_energy(&self.matrix)
    }
}

fn check_single_symbol(params: &WaveformParams, spec: &ChannelSpec) -> Result<()> {
    if params.k != 1 {
        return Err(Error::InvalidArgument(format!(
            "the effective channel is defined for one symbol, got K = {}",
            params.k
        )));
    }
    if spec.len() != params.frame_len() {
        return Err(Error::LengthMismatch { expected: params.frame_len(), actual: spec.len() });
    }
    Ok(())
}

/// `Q_P^H G^T H G Q_P` built column by column with the fast operators.
pub fn effective_channel(spec: &ChannelSpec, params: &WaveformParams) -> Result<EffectiveChannel> {
    params.validate()?;
    check_single_symbol(params, spec)?;
    let synthesis = Synthesis::with_rotation(params.dims, params.chirps_mod, params.origin.rotation(&params.filter)?)?;
    let bank = FilterBank::new(params.filter.clone(), 1)?;
    let l = params.dims.l();
    let columns: Vec<Vec<Complex64>> = (0..l)
        .into_par_iter()
        .map(|j| {
            let mut e = vec![ZERO; l];
            e[j] = Complex64::new(1.0, 0.0);
            let s = bank.synthesize(&synthesis.apply(&e))?;
            let r = spec.apply(&s)?;
            Ok(synthesis.adjoint(&bank.analyze(&r)?))
        })
        .collect::<Result<_>>()?;
    let matrix = ComplexMatrix::from_fn(l, l, |i, j| columns[j][i]);
    Ok(EffectiveChannel { matrix })
}

/// Dense triple product reference for [`effective_channel`].
pub fn effective_channel_dense(spec: &ChannelSpec, params: &WaveformParams) -> Result<EffectiveChannel> {
    params.validate()?;
    check_single_symbol(params, spec)?;
    let synthesis = Synthesis::with_rotation(params.dims, params.chirps_mod, params.origin.rotation(&params.filter)?)?;
    let q = synthesis.matrix(params.chirps_mod)?;
    let g = FilterBank::new(params.filter.clone(), 1)?.matrix().map(|v| Complex64::new(v, 0.0));
    let gq = g * q;
    let h = build_channel(spec);
    Ok(EffectiveChannel { matrix: gq.adjoint() * h * &gq })
}

/// DAF-domain channel of a single AFDM symbol, obtained by transmitting
/// each unit vector with its prefix through the linear (non-circular)
/// channel and demodulating.
pub fn afdm_effective_channel(paths: &[PathSpec], baseline: &AfdmBaseline) -> Result<EffectiveChannel> {
    let l = baseline.subcarriers();
    let cpp = baseline.cpp_len();
    let chirps = baseline.chirps();
    if let Some(p) = paths.iter().find(|p| p.delay > cpp) {
        return Err(Error::InvalidArgument(format!("path delay {} exceeds the prefix length {cpp}", p.delay)));
    }
    let columns: Vec<Vec<Complex64>> = (0..l)
        .map(|j| {
            let mut x = vec![ZERO; l];
            x[j] = Complex64::new(1.0, 0.0);
            let s = afdm_modulate(&x, chirps, cpp)?;
            let mut r = vec![ZERO; s.len()];
            for p in paths {
                for (n, out) in r.iter_mut().enumerate().skip(p.delay) {
                    let t = n as f64 - cpp as f64;
                    let ramp = Complex64::from_polar(1.0, -2.0 * PI * (p.doppler * t / l as f64).rem_euclid(1.0));
                    *out += p.gain * ramp * s[n - p.delay];
                }
            }
            afdm_demodulate(&r, chirps, cpp)
        })
        .collect::<Result<_>>()?;
    Ok(EffectiveChannel { matrix: ComplexMatrix::from_fn(l, l, |i, j| columns[j][i]) })
}

pub fn diagonal_energy(h: &ComplexMatrix) -> Vec<f64> {
    let l = h.nrows();
    let mut e = vec![0.0; l];
    for j in 0..h.ncols() {
        for i in 0..l {
            e[(i + l - j % l) % l] += h[(i, j)].norm_sqr();
        }
    }
    e
}

/// Diagonal offset carrying the most energy.
pub fn dominant_offset(h: &ComplexMatrix) -> usize {
    let e = diagonal_energy(h);
    (0..e.len()).fold(0, |best, d| if e[d] > e[best] { d } else { best })
}

/// Fraction of the diagonal energy of `h` lying within `guard` diagonals of
/// any of the predicted offsets.
pub fn path_separation_metric(h: &ComplexMatrix, predicted: &[usize], guard: usize) -> f64 {
    let e = diagonal_energy(h);
    let l = e.len() as isize;
    let mut inside = vec![false; e.len()];
    for &d in predicted {
        for g in -(guard as isize)..=guard as isize {
            inside[((d as isize + g).rem_euclid(l)) as usize] = true;
        }
    }
    let total: f64 = e.iter().sum();
    if total == 0.0 {
        return 0.0;
    }
    let captured: f64 = e.iter().zip(&inside).filter(|(_, &i)| i).map(|(v, _)| v).sum();
    captured / total
}

/// Path separation of the AFBM effective channel, with each predicted
/// offset taken from a single-path unit-gain reference run.
pub fn afbm_path_separation(spec: &ChannelSpec, params: &WaveformParams, guard: usize) -> Result<f64> {
    let heff = effective_channel(spec, params)?;
    let mut predicted = Vec::with_capacity(spec.paths().len());
    for p in spec.paths() {
        let single =
            ChannelSpec::new(vec![PathSpec::new(Complex64::new(1.0, 0.0), p.delay, p.doppler)], spec.len(), spec.c1())?;
        predicted.push(dominant_offset(&effective_channel(&single, params)?.matrix));
    }
    predicted.sort_unstable();
    predicted.dedup();
    Ok(path_separation_metric(&heff.matrix, &predicted, guard))
}

/// Same metric for the AFDM baseline.
pub fn afdm_path_separation(paths: &[PathSpec], baseline: &AfdmBaseline, guard: usize) -> Result<f64> {
    let heff = afdm_effective_channel(paths, baseline)?;
    let mut predicted = Vec::with_capacity(paths.len());
    for p in paths {
        let single = [PathSpec::new(Complex64::new(1.0, 0.0), p.delay, p.doppler)];
        predicted.push(dominant_offset(&afdm_effective_channel(&single, baseline)?.matrix));
    }
    predicted.sort_unstable();
    predicted.dedup();
    Ok(path_separation_metric(&heff.matrix, &predicted, guard))
}

/// `(H^H H + noise_var I)^{-1} H^H x` via Cholesky.
pub fn mmse_equalize(x: &[Complex64], h: &ComplexMatrix, noise_var: f64) -> Result<Vec<Complex64>> {
    MmseEqualizer::new(h, noise_var)?.equalize(x)
}

/// Factorized MMSE equalizer for repeated use with one channel.
#[derive(Debug, Clone)]
pub struct MmseEqualizer {
    h_adj: ComplexMatrix,
    chol: nalgebra::linalg::Cholesky<Complex64, nalgebra::Dyn>,
}

impl MmseEqualizer {
    pub fn new(h: &ComplexMatrix, noise_var: f64) -> Result<Self> {
        if !h.is_square() {
            return Err(Error::InvalidDimension(format!("H_d must be square, got {:?}", h.shape())));
        }
        if !(noise_var >= 0.0) {
            return Err(Error::InvalidArgument(format!("noise variance {noise_var} must be nonnegative")));
        }
        let h_adj = h.adjoint();
        let mut a = &h_adj * h;
        for i in 0..a.nrows() {
            a[(i, i)] += noise_var;
        }
        let scale = (0..a.nrows()).map(|i| a[(i, i)].re).fold(0.0, f64::max);
        let chol = a.cholesky().ok_or(Error::SingularSystem)?;
        let l = chol.l_dirty();
        let min_pivot = (0..l.nrows()).map(|i| l[(i, i)].re.powi(2)).fold(f64::MAX, f64::min);
        if scale == 0.0 || min_pivot < PIVOT_TOL * scale {
            return Err(Error::SingularSystem);
        }
        Ok(Self { h_adj, chol })
    }

    pub fn equalize(&self, x: &[Complex64]) -> Result<Vec<Complex64>> {
        if x.len() != self.h_adj.ncols() {
            return Err(Error::LengthMismatch { expected: self.h_adj.ncols(), actual: x.len() });
        }
        let rhs = &self.h_adj * DVector::from_column_slice(x);
        Ok(self.chol.solve(&rhs).iter().cloned().collect())
    }
}

/// Per-symbol data-restricted channels of a full AFBM frame.
///
/// Block `k` maps the `L/2` data symbols of symbol `k` to the despread data
/// outputs of the same symbol; inter-symbol terms are not included.
pub fn data_channel_blocks(modem: &AfbmModem, spec: &ChannelSpec) -> Result<Vec<ComplexMatrix>> {
    let params = modem.params();
    let (l, k) = (params.dims.l(), params.k);
    if spec.len() != modem.frame_len() {
        return Err(Error::LengthMismatch { expected: modem.frame_len(), actual: spec.len() });
    }
    let rows: Vec<usize> = data_rows(l).collect();
    let half = rows.len();
    (0..k)
        .into_par_iter()
        .map(|sym| {
            let mut block = ComplexMatrix::zeros(half, half);
            for (j, &row) in rows.iter().enumerate() {
                let mut frame = crate::modem::GridFrame::zeros(l, k);
                frame.column_mut(sym)[row] = Complex64::new(1.0, 0.0);
                let s = modem.modulate(&frame)?;
                let r = TimeSignal { samples: spec.apply(&s.samples)?, sample_rate: s.sample_rate };
                let out = modem.demodulate(&r)?;
                let col = out.column(sym);
                for (i, &ri) in rows.iter().enumerate() {
                    block[(i, j)] = col[ri];
                }
            }
            Ok(block)
        })
        .collect()
}

/// Normalized delay `round(tau * f_s)` and Doppler `N * nu / f_s`.
pub fn normalize_path(tau: f64, nu: f64, sample_rate: f64, n: usize) -> Result<(usize, f64)> {
    if !(sample_rate > 0.0) || !tau.is_finite() || tau < 0.0 || !nu.is_finite() {
        return Err(Error::InvalidArgument("invalid physical path parameters".into()));
    }
    Ok(((tau * sample_rate).round() as usize, n as f64 * nu / sample_rate))
}
