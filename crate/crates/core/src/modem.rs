//! Constellation mapping, grid placement, the AFBM transceiver and an AFDM
//! baseline.
//!
//! An AFBM frame carries `K` symbols of `L` subcarriers. Only the first and
//! last `L/4` rows of each column hold data. The transmitter computes
//!
//! ```text
//! X = W_L diag(b) A,   s = G (I_K kron Q_P) vec(X)
//! ```
//!
//! and the receiver applies the adjoint chain
//! `A~ = diag(b) W_L^H (I_K kron Q_P^H) G^T r`, discarding the guard rows.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::io::Write;

use nalgebra::DVector;
use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::filterbank::{
    compensation_vector, data_rows, is_data_row, BlockOrigin, CompensationVector, FilterBank, PrototypeFilter,
};
use crate::transforms::{daft_matrix, spectral_interpolate, ChirpPair, ComplexMatrix, Daft, DaftDims, Synthesis};
use crate::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Constellation {
    #[default]
    Qpsk,
    Qam16,
}

impl Constellation {
    pub fn bits_per_symbol(self) -> usize {
        match self {
            Constellation::Qpsk => 2,
            Constellation::Qam16 => 4,
        }
    }

    /// All points, indexed by the bit pattern read MSB first.
    pub fn points(self) -> Vec<Complex64> {
        let bps = self.bits_per_symbol();
        (0..1usize << bps)
            .map(|v| {
                let bits: Vec<u8> = (0..bps).rev().map(|i| ((v >> i) & 1) as u8).collect();
                self.map_one(&bits)
            })
            .collect()
    }

    fn map_one(self, bits: &[u8]) -> Complex64 {
        match self {
            Constellation::Qpsk => {
                let level = |b: u8| if b == 0 { FRAC_1_SQRT_2 } else { -FRAC_1_SQRT_2 };
                Complex64::new(level(bits[0]), level(bits[1]))
            }
            Constellation::Qam16 => {
                // Gray per axis: 00 -> 3, 01 -> 1, 11 -> -1, 10 -> -3.
                let level = |b0: u8, b1: u8| {
                    let mag = if b1 == 0 { 3.0 } else { 1.0 };
                    let sign = if b0 == 0 { 1.0 } else { -1.0 };
                    sign * mag / 10f64.sqrt()
                };
                Complex64::new(level(bits[0], bits[1]), level(bits[2], bits[3]))
            }
        }
    }

    fn demap_one(self, z: Complex64, out: &mut Vec<u8>) {
        match self {
            Constellation::Qpsk => {
                out.push((z.re < 0.0) as u8);
                out.push((z.im < 0.0) as u8);
            }
            Constellation::Qam16 => {
                let threshold = 2.0 / 10f64.sqrt();
                for v in [z.re, z.im] {
                    out.push((v < 0.0) as u8);
                    out.push((v.abs() < threshold) as u8);
                }
            }
        }
    }
}

/// Gray-maps bits (one bit per byte, 0 or 1) to unit-energy symbols.
pub fn map_symbols(bits: &[u8], constellation: Constellation) -> Result<Vec<Complex64>> {
    let bps = constellation.bits_per_symbol();
    if !bits.len().is_multiple_of(bps) {
        return Err(Error::LengthMismatch { expected: bits.len().div_ceil(bps) * bps, actual: bits.len() });
    }
    if bits.iter().any(|&b| b > 1) {
        return Err(Error::InvalidArgument("bits must be 0 or 1".into()));
    }
    Ok(bits.chunks(bps).map(|c| constellation.map_one(c)).collect())
}

/// Hard-decision demapping.
pub fn demap_symbols(symbols: &[Complex64], constellation: Constellation) -> Vec<u8> {
    let mut out = Vec::with_capacity(symbols.len() * constellation.bits_per_symbol());
    for z in symbols {
        constellation.demap_one(*z, &mut out);
    }
    out
}

pub fn random_bits<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<u8> {
    (0..n).map(|_| rng.random_range(0..2u8)).collect()
}

/// `L x K` symbol grid stored column by column.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFrame {
    l: usize,
    k: usize,
    data: Vec<Complex64>,
}

impl GridFrame {
    pub fn zeros(l: usize, k: usize) -> Self {
        Self { l, k, data: vec![ZERO; l * k] }
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn column(&self, k: usize) -> &[Complex64] {
        &self.data[k * self.l..(k + 1) * self.l]
    }

    pub fn column_mut(&mut self, k: usize) -> &mut [Complex64] {
        &mut self.data[k * self.l..(k + 1) * self.l]
    }

    pub fn get(&self, row: usize, k: usize) -> Complex64 {
        self.data[k * self.l + row]
    }

    /// `vec(A)`: columns stacked.
    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_symbols_per_frame(&self) -> usize {
        self.l / 2 * self.k
    }
}

/// Places `(L/2)*K` data symbols in the first and last `L/4` rows of each
/// column.
pub fn place_grid(d: &[Complex64], l: usize, k: usize) -> Result<GridFrame> {
    if l == 0 || !l.is_multiple_of(4) {
        return Err(Error::InvalidDimension(format!("L = {l} is not a positive multiple of 4")));
    }
    let per = l / 2;
    if d.len() != per * k {
        return Err(Error::LengthMismatch { expected: per * k, actual: d.len() });
    }
    let mut frame = GridFrame::zeros(l, k);
    for (col, chunk) in d.chunks(per).enumerate() {
        let column = frame.column_mut(col);
        for (row, v) in data_rows(l).zip(chunk) {
            column[row] = *v;
        }
    }
    Ok(frame)
}

/// Inverse of [`place_grid`].
pub fn extract_grid(frame: &GridFrame) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(frame.data_symbols_per_frame());
    for k in 0..frame.k {
        let column = frame.column(k);
        out.extend(data_rows(frame.l).map(|row| column[row]));
    }
    out
}

/// Physical-unit metadata; does not influence the digital chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    /// Subcarrier spacing `F` in Hz.
    pub subcarrier_spacing: f64,
    /// Symbol duration `T` in seconds.
    pub symbol_duration: f64,
    /// Carrier frequency in Hz.
    pub carrier: f64,
}

impl Default for Metadata {
    fn default() -> Self {
        Self { subcarrier_spacing: 15e3, symbol_duration: 1.0 / 15e3, carrier: 4e9 }
    }
}

/// Static description of one AFBM configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveformParams {
    pub dims: DaftDims,
    pub k: usize,
    pub chirps_pre: ChirpPair,
    pub chirps_mod: ChirpPair,
    pub filter: PrototypeFilter,
    pub constellation: Constellation,
    pub origin: BlockOrigin,
    pub metadata: Metadata,
}

impl WaveformParams {
    /// Both chirp slots set to `chirps`, centred block origin, QPSK.
    pub fn new(dims: DaftDims, k: usize, chirps: ChirpPair, filter: PrototypeFilter) -> Result<Self> {
        let p = Self {
            dims,
            k,
            chirps_pre: chirps,
            chirps_mod: chirps,
            filter,
            constellation: Constellation::Qpsk,
            origin: BlockOrigin::default(),
            metadata: Metadata::default(),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidDimension("K must be at least 1".into()));
        }
        if self.filter.n() != self.dims.n() {
            return Err(Error::InvalidDimension(format!(
                "filter designed for N = {} but dims use N = {}",
                self.filter.n(),
                self.dims.n()
            )));
        }
        self.origin.rotation(&self.filter)?;
        Ok(())
    }

    /// Frame length `M = O*N + (K-1)*N/2`.
    pub fn frame_len(&self) -> usize {
        self.filter.len() + (self.k - 1) * self.dims.n() / 2
    }

    /// Bandwidth `B = L*F` in Hz.
    pub fn bandwidth(&self) -> f64 {
        self.dims.l() as f64 * self.metadata.subcarrier_spacing
    }

    /// Sample rate of the synthesized signal, `N*F`.
    pub fn sample_rate(&self) -> f64 {
        self.dims.n() as f64 * self.metadata.subcarrier_spacing
    }

    pub fn data_symbols_per_frame(&self) -> usize {
        self.dims.l() / 2 * self.k
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeSignal {
    pub samples: Vec<Complex64>,
    pub sample_rate: f64,
}

impl TimeSignal {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|v| v.norm_sqr()).sum()
    }

    /// CSV with columns `index,real,imag`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# sample_rate: {:?}", self.sample_rate)?;
        writeln!(w, "index,real,imag")?;
        for (i, v) in self.samples.iter().enumerate() {
            writeln!(w, "{i},{:?},{:?}", v.re, v.im)?;
        }
        Ok(())
    }
}

/// Precomputed AFBM transmitter/receiver.
#[derive(Debug, Clone)]
pub struct AfbmModem {
    params: WaveformParams,
    precoder: Daft,
    synthesis: Synthesis,
    bank: FilterBank,
    compensation: CompensationVector,
}

impl AfbmModem {
    pub fn new(params: WaveformParams) -> Result<Self> {
        params.validate()?;
        let comp =
            compensation_vector(params.dims, params.chirps_pre, params.chirps_mod, &params.filter, params.origin)?;
        Self::with_compensation(params, comp)
    }

    /// Uses a caller-supplied compensation vector (e.g. uniform, for
    /// ablations).
    pub fn with_compensation(params: WaveformParams, compensation: CompensationVector) -> Result<Self> {
        params.validate()?;
        let l = params.dims.l();
        if compensation.len() != l {
            return Err(Error::LengthMismatch { expected: l, actual: compensation.len() });
        }
        let rotation = params.origin.rotation(&params.filter)?;
        Ok(Self {
            precoder: Daft::new(params.chirps_pre, l)?,
            synthesis: Synthesis::with_rotation(params.dims, params.chirps_mod, rotation)?,
            bank: FilterBank::new(params.filter.clone(), params.k)?,
            compensation,
            params,
        })
    }

    pub fn params(&self) -> &WaveformParams {
        &self.params
    }

    pub fn compensation(&self) -> &CompensationVector {
        &self.compensation
    }

    pub fn synthesis(&self) -> &Synthesis {
        &self.synthesis
    }

    pub fn filter_bank(&self) -> &FilterBank {
        &self.bank
    }

    pub fn frame_len(&self) -> usize {
        self.bank.output_len()
    }

    fn check_frame(&self, frame: &GridFrame) -> Result<()> {
        let (l, k) = (self.params.dims.l(), self.params.k);
        if frame.l != l || frame.k != k {
            return Err(Error::InvalidDimension(format!(
                "grid is {}x{} but the modem expects {l}x{k}",
                frame.l, frame.k
            )));
        }
        Ok(())
    }

    /// `x = vec(W_L diag(b) A)`.
    pub fn spread(&self, frame: &GridFrame) -> Result<Vec<Complex64>> {
        self.check_frame(frame)?;
        let b = self.compensation.values();
        let mut x = Vec::with_capacity(frame.data.len());
        for k in 0..frame.k {
            let mut col: Vec<Complex64> = frame.column(k).iter().zip(b).map(|(a, b)| a * b).collect();
            self.precoder.apply(&mut col);
            x.extend(col);
        }
        Ok(x)
    }

    /// `s = G (I_K kron Q_P) x` for a spread vector of length `L*K`.
    pub fn modulate_spread(&self, x: &[Complex64]) -> Result<Vec<Complex64>> {
        let l = self.params.dims.l();
        if x.len() != l * self.params.k {
            return Err(Error::LengthMismatch { expected: l * self.params.k, actual: x.len() });
        }
        let mut out = vec![ZERO; self.frame_len()];
        for (k, col) in x.chunks(l).enumerate() {
            let block = self.synthesis.apply(col);
            self.bank.add_block(k, &block, &mut out);
        }
        Ok(out)
    }

    pub fn modulate(&self, frame: &GridFrame) -> Result<TimeSignal> {
        let samples = self.modulate_spread(&self.spread(frame)?)?;
        Ok(TimeSignal { samples, sample_rate: self.params.sample_rate() })
    }

    /// `x~ = (I_K kron Q_P^H) G^T r`, length `L*K`.
    pub fn demodulate_spread(&self, r: &[Complex64]) -> Result<Vec<Complex64>> {
        if r.len() != self.frame_len() {
            return Err(Error::LengthMismatch { expected: self.frame_len(), actual: r.len() });
        }
        let n = self.params.dims.n();
        let mut block = vec![ZERO; n];
        let mut out = Vec::with_capacity(self.params.dims.l() * self.params.k);
        for k in 0..self.params.k {
            self.bank.analyze_block(k, r, &mut block);
            out.extend(self.synthesis.adjoint(&block));
        }
        Ok(out)
    }

    /// `A~ = diag(b) W_L^H X~`, guard rows zeroed.
    pub fn despread(&self, x: &[Complex64]) -> Result<GridFrame> {
        let (l, k) = (self.params.dims.l(), self.params.k);
        if x.len() != l * k {
            return Err(Error::LengthMismatch { expected: l * k, actual: x.len() });
        }
        let b = self.compensation.values();
        let mut frame = GridFrame { l, k, data: x.to_vec() };
        for col in 0..k {
            let column = frame.column_mut(col);
            self.precoder.apply_adjoint(column);
            for (i, (v, bi)) in column.iter_mut().zip(b).enumerate() {
                *v = if is_data_row(l, i) { *v * bi } else { ZERO };
            }
        }
        Ok(frame)
    }

    pub fn demodulate(&self, r: &TimeSignal) -> Result<GridFrame> {
        self.despread(&self.demodulate_spread(&r.samples)?)
    }

    /// Random data frame; returns the bits and the placed grid.
    pub fn random_frame<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<(Vec<u8>, GridFrame)> {
        let c = self.params.constellation;
        let bits = random_bits(rng, self.params.data_symbols_per_frame() * c.bits_per_symbol());
        let symbols = map_symbols(&bits, c)?;
        Ok((bits, place_grid(&symbols, self.params.dims.l(), self.params.k)?))
    }

    /// Dense `G_bar = G (I_K kron Q_P)` of shape `M x L*K`.
    pub fn transmit_matrix(&self) -> Result<ComplexMatrix> {
        let q = self.synthesis.matrix(self.params.chirps_mod)?;
        let g = self.bank.matrix().map(|v| Complex64::new(v, 0.0));
        Ok(g * block_diag(&q, self.params.k))
    }

    /// Dense `I_K kron (W_L diag(b))`.
    pub fn spread_matrix(&self) -> Result<ComplexMatrix> {
        let b = DVector::from_iterator(
            self.params.dims.l(),
            self.compensation.values().iter().map(|v| Complex64::new(*v, 0.0)),
        );
        let cf = daft_matrix(self.params.chirps_pre, self.params.dims.l())? * ComplexMatrix::from_diagonal(&b);
        Ok(block_diag(&cf, self.params.k))
    }

    /// Frame-level orthogonality matrix `C^H G_bar^H G_bar C` (size
    /// `L*K`), built column by column with the fast chain. Guard rows and
    /// columns are zero.
    pub fn orthogonality_gram(&self) -> Result<ComplexMatrix> {
        let (l, k) = (self.params.dims.l(), self.params.k);
        let lk = l * k;
        let columns: Vec<(usize, Vec<Complex64>)> = (0..lk)
            .into_par_iter()
            .filter(|j| is_data_row(l, j % l))
            .map(|j| {
                let mut frame = GridFrame::zeros(l, k);
                frame.data[j] = Complex64::new(1.0, 0.0);
                let s = self.modulate(&frame)?;
                Ok((j, self.demodulate(&s)?.data))
            })
            .collect::<Result<_>>()?;
        let mut gram = ComplexMatrix::zeros(lk, lk);
        for (j, col) in columns {
            for (i, v) in col.into_iter().enumerate() {
                gram[(i, j)] = v;
            }
        }
        Ok(gram)
    }

    /// Bins of the `N`-point block spectrum carrying energy from the data
    /// rows.
    pub fn occupied_bins(&self) -> Vec<usize> {
        let (l, n) = (self.params.dims.l(), self.params.dims.n());
        let mut energy = vec![0.0; n];
        for row in data_rows(l) {
            let mut e = vec![ZERO; l];
            e[row] = Complex64::new(1.0, 0.0);
            self.precoder.apply(&mut e);
            let mut block = self.synthesis.apply(&e);
            crate::transforms::dft_apply(&mut block);
            for (acc, v) in energy.iter_mut().zip(&block) {
                *acc += v.norm_sqr();
            }
        }
        let peak = energy.iter().cloned().fold(0.0, f64::max);
        (0..n).filter(|&i| energy[i] > 1e-12 * peak).collect()
    }
}

fn block_diag(block: &ComplexMatrix, k: usize) -> ComplexMatrix {
    let (r, c) = block.shape();
    let mut out = ComplexMatrix::zeros(r * k, c * k);
    for i in 0..k {
        out.view_mut((i * r, i * c), (r, c)).copy_from(block);
    }
    out
}

/// Prefix phase factor for sample `m` of a length-`cpp_len` chirp-periodic
/// prefix: `exp(-j 2 pi c1 (L_a^2 + 2 L_a (m - cpp_len)))`.
pub fn afdm_prefix_phase(c1: f64, l_a: usize, cpp_len: usize, m: usize) -> Complex64 {
    let l = l_a as f64;
    let t = m as f64 - cpp_len as f64;
    let cycles = (c1 * (l * l + 2.0 * l * t)).rem_euclid(1.0);
    Complex64::from_polar(1.0, -2.0 * PI * cycles)
}

fn check_cpp(l_a: usize, cpp_len: usize) -> Result<()> {
    if l_a == 0 {
        return Err(Error::InvalidDimension("AFDM needs at least one subcarrier".into()));
    }
    if cpp_len >= l_a {
        return Err(Error::InvalidArgument(format!(
            "prefix length {cpp_len} must be shorter than the symbol length {l_a}"
        )));
    }
    Ok(())
}

/// One AFDM symbol: `W^H x` preceded by its chirp-periodic prefix.
pub fn afdm_modulate(x: &[Complex64], chirps: ChirpPair, cpp_len: usize) -> Result<Vec<Complex64>> {
    let l_a = x.len();
    check_cpp(l_a, cpp_len)?;
    let mut body = x.to_vec();
    Daft::new(chirps, l_a)?.apply_adjoint(&mut body);
    let mut out = Vec::with_capacity(l_a + cpp_len);
    for m in 0..cpp_len {
        out.push(body[l_a - cpp_len + m] * afdm_prefix_phase(chirps.c1, l_a, cpp_len, m));
    }
    out.extend(body);
    Ok(out)
}

/// Strips the prefix and applies `W`.
pub fn afdm_demodulate(r: &[Complex64], chirps: ChirpPair, cpp_len: usize) -> Result<Vec<Complex64>> {
    if r.len() <= cpp_len {
        return Err(Error::LengthMismatch { expected: cpp_len + 1, actual: r.len() });
    }
    let l_a = r.len() - cpp_len;
    check_cpp(l_a, cpp_len)?;
    let mut body = r[cpp_len..].to_vec();
    Daft::new(chirps, l_a)?.apply(&mut body);
    Ok(body)
}

/// Multi-symbol AFDM reference waveform with `L_a` fully loaded
/// subcarriers per symbol.
#[derive(Debug, Clone)]
pub struct AfdmBaseline {
    l_a: usize,
    k: usize,
    chirps: ChirpPair,
    cpp_len: usize,
    constellation: Constellation,
    daft: Daft,
}

impl AfdmBaseline {
    pub fn new(l_a: usize, k: usize, chirps: ChirpPair, cpp_len: usize, constellation: Constellation) -> Result<Self> {
        check_cpp(l_a, cpp_len)?;
        if k == 0 {
            return Err(Error::InvalidDimension("K must be at least 1".into()));
        }
        Ok(Self { l_a, k, chirps, cpp_len, constellation, daft: Daft::new(chirps, l_a)? })
    }

    pub fn subcarriers(&self) -> usize {
        self.l_a
    }

    pub fn symbols(&self) -> usize {
        self.k
    }

    pub fn chirps(&self) -> ChirpPair {
        self.chirps
    }

    pub fn cpp_len(&self) -> usize {
        self.cpp_len
    }

    pub fn constellation(&self) -> Constellation {
        self.constellation
    }

    pub fn data_symbols_per_frame(&self) -> usize {
        self.l_a * self.k
    }

    /// Frame length at the symbol rate.
    pub fn frame_len(&self) -> usize {
        (self.l_a + self.cpp_len) * self.k
    }

    fn check_symbols(&self, symbols: &[Complex64]) -> Result<()> {
        if symbols.len() != self.data_symbols_per_frame() {
            return Err(Error::LengthMismatch { expected: self.data_symbols_per_frame(), actual: symbols.len() });
        }
        Ok(())
    }

    /// Concatenated symbols at the symbol rate.
    pub fn modulate_frame(&self, symbols: &[Complex64]) -> Result<Vec<Complex64>> {
        self.check_symbols(symbols)?;
        let mut out = Vec::with_capacity(self.frame_len());
        for x in symbols.chunks(self.l_a) {
            out.extend(afdm_modulate(x, self.chirps, self.cpp_len)?);
        }
        Ok(out)
    }

    pub fn demodulate_frame(&self, r: &[Complex64]) -> Result<Vec<Complex64>> {
        if r.len() != self.frame_len() {
            return Err(Error::LengthMismatch { expected: self.frame_len(), actual: r.len() });
        }
        let mut out = Vec::with_capacity(self.data_symbols_per_frame());
        for chunk in r.chunks(self.l_a + self.cpp_len) {
            let mut body = chunk[self.cpp_len..].to_vec();
            self.daft.apply(&mut body);
            out.extend(body);
        }
        Ok(out)
    }

    /// Frame sampled `factor` times faster than the symbol rate.
    ///
    /// Each symbol is generated as a continuous-time waveform: the periodic
    /// core `F^H Lambda_{c1}^H x` is band-limited interpolated, the time
    /// chirp `c2` is evaluated at fractional sample positions and the prefix
    /// continues the core periodically. With `c2 = 0` and an integer
    /// `2*c1*L_a` this matches [`AfdmBaseline::modulate_frame`] on the
    /// symbol-rate grid.
    pub fn modulate_oversampled(&self, symbols: &[Complex64], factor: usize) -> Result<Vec<Complex64>> {
        self.check_symbols(symbols)?;
        if factor == 0 {
            return Err(Error::InvalidArgument("oversampling factor must be at least 1".into()));
        }
        let l = self.l_a;
        let left = crate::transforms::chirp_phases(self.chirps.c1, l);
        let plain = Daft::new(ChirpPair::zero(), l)?;
        let big = l * factor;
        let pre = self.cpp_len * factor;
        let mut out = Vec::with_capacity((big + pre) * self.k);
        for x in symbols.chunks(l) {
            let mut core: Vec<Complex64> = x.iter().zip(&left).map(|(v, c)| v * c.conj()).collect();
            plain.apply_adjoint(&mut core);
            let fine = spectral_interpolate(&core, factor)?;
            for i in 0..big + pre {
                let t = (i as f64 - pre as f64) / factor as f64;
                let idx = (i + big - pre) % big;
                let chirp = Complex64::from_polar(1.0, 2.0 * PI * (self.chirps.c2 * t * t).rem_euclid(1.0));
                out.push(fine[idx] * chirp);
            }
        }
        Ok(out)
    }

    pub fn random_symbols<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<(Vec<u8>, Vec<Complex64>)> {
        let bits = random_bits(rng, self.data_symbols_per_frame() * self.constellation.bits_per_symbol());
        let symbols = map_symbols(&bits, self.constellation)?;
        Ok((bits, symbols))
    }
}
