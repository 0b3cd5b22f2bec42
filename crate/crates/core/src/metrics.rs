//! PAPR, Welch PSD and out-of-band emission, orthogonality SIR and BER
//! Monte Carlo.
//!
//! Monte Carlo routines draw trial `t` from [`trial_rng`]`(seed, t)` and
//! collect results in trial order, so they are independent of the rayon
//! schedule.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::channel::{add_noise, chirp_condition_lhs, data_channel_blocks, ChannelSpec, MmseEqualizer};
use crate::csv::{format_float, Table};
use crate::filterbank::data_rows;
use crate::modem::{demap_symbols, AfbmModem, AfdmBaseline, TimeSignal};
use crate::rng::trial_rng;
use crate::transforms::spectral_interpolate;
use crate::{Error, Result};

/// Reported SIR when the interference is zero or negligible.
pub const SIR_CAP_DB: f64 = 150.0;

/// Peak-to-average power ratio in dB after `oversample`-fold spectral
/// interpolation of the whole frame.
pub fn papr(signal: &[Complex64], oversample: usize) -> Result<f64> {
    let fine = spectral_interpolate(signal, oversample)?;
    let (peak, total) = fine.iter().fold((0.0_f64, 0.0), |(p, t), v| (p.max(v.norm_sqr()), t + v.norm_sqr()));
    if total == 0.0 {
        return Err(Error::ZeroEnergy);
    }
    Ok(10.0 * (peak / (total / fine.len() as f64)).log10())
}

/// Anything that can produce random transmit frames.
pub trait FrameSource: Sync {
    fn frame(&self, rng: &mut crate::rng::TrialRng) -> Result<Vec<Complex64>>;
}

impl FrameSource for AfbmModem {
    fn frame(&self, rng: &mut crate::rng::TrialRng) -> Result<Vec<Complex64>> {
        let (_, grid) = self.random_frame(rng)?;
        Ok(self.modulate(&grid)?.samples)
    }
}

/// AFDM frames generated at `oversample` times the symbol rate.
#[derive(Debug, Clone)]
pub struct AfdmSource {
    pub baseline: AfdmBaseline,
    pub oversample: usize,
}

impl FrameSource for AfdmSource {
    fn frame(&self, rng: &mut crate::rng::TrialRng) -> Result<Vec<Complex64>> {
        let (_, symbols) = self.baseline.random_symbols(rng)?;
        self.baseline.modulate_oversampled(&symbols, self.oversample)
    }
}

/// Empirical complementary CDF of per-frame PAPR.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CcdfCurve {
    pub thresholds: Vec<f64>,
    pub probabilities: Vec<f64>,
    pub trials: usize,
    /// Per-trial PAPR values in trial order.
    pub values: Vec<f64>,
}

impl CcdfCurve {
    pub fn from_values(values: Vec<f64>, thresholds: &[f64]) -> Self {
        let n = values.len().max(1) as f64;
        let probabilities = thresholds.iter().map(|t| values.iter().filter(|v| *v > t).count() as f64 / n).collect();
        Self { thresholds: thresholds.to_vec(), probabilities, trials: values.len(), values }
    }

    /// Smallest observed PAPR `x` with `P(PAPR > x) <= prob`.
    pub fn level_at(&self, prob: f64) -> f64 {
        let mut sorted = self.values.clone();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        if n == 0 {
            return f64::NAN;
        }
        let allowed = (prob * n as f64).floor() as usize;
        sorted[n - 1 - allowed.min(n - 1)]
    }
}

/// PAPR CCDF over `trials` random frames.
pub fn papr_ccdf<S: FrameSource + ?Sized>(
    source: &S,
    trials: usize,
    thresholds: &[f64],
    oversample: usize,
    seed: u64,
) -> Result<CcdfCurve> {
    if trials == 0 {
        return Err(Error::InvalidArgument("at least one trial is required".into()));
    }
    let values = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(seed, t as u64);
            papr(&source.frame(&mut rng)?, oversample)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(CcdfCurve::from_values(values, thresholds))
}

/// Averaged, Hann-windowed periodogram.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsdEstimate {
    /// Normalized frequencies in cycles per sample, ascending from -0.5.
    pub freqs: Vec<f64>,
    /// Power relative to the peak, in dB.
    pub dbr: Vec<f64>,
    /// Unnormalized power per bin; sums to the mean sample power times the
    /// segment length.
    pub linear: Vec<f64>,
    pub segment: usize,
    pub overlap: f64,
    pub segments: usize,
    pub window: String,
}

impl PsdEstimate {
    /// Value at the bin nearest to `freq`.
    pub fn at(&self, freq: f64) -> f64 {
        let idx = ((freq + 0.5) * self.segment as f64).round() as isize;
        self.dbr[idx.rem_euclid(self.segment as isize) as usize]
    }

    /// Two-column `freq,dbr` CSV body.
    pub fn to_table(&self) -> Table {
        let mut t = Table::new(["freq", "dbr"]);
        t.meta("window", &self.window)
            .meta("segment", self.segment)
            .meta("overlap", self.overlap)
            .meta("segments", self.segments);
        for (f, p) in self.freqs.iter().zip(&self.dbr) {
            t.rows.push(vec![format_float(*f), format_float(*p)]);
        }
        t
    }
}

/// Welch PSD with a periodic Hann window.
pub fn psd_welch(s: &[Complex64], segment: usize, overlap: f64) -> Result<PsdEstimate> {
    if segment < 2 || segment > s.len() {
        return Err(Error::InvalidArgument(format!("segment length {segment} must be in 2..={}", s.len())));
    }
    if !(0.0..1.0).contains(&overlap) {
        return Err(Error::InvalidArgument(format!("overlap fraction {overlap} must be in [0, 1)")));
    }
    let hop = (((1.0 - overlap) * segment as f64).round() as usize).max(1);
    let window: Vec<f64> = (0..segment).map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / segment as f64).cos()).collect();
    let wpow: f64 = window.iter().map(|w| w * w).sum();
    let fft = FftPlanner::new().plan_fft_forward(segment);
    let mut acc = vec![0.0; segment];
    let mut count = 0usize;
    let mut buf = vec![Complex64::default(); segment];
    let mut start = 0;
    while start + segment <= s.len() {
        for ((b, x), w) in buf.iter_mut().zip(&s[start..start + segment]).zip(&window) {
            *b = x * w;
        }
        fft.process(&mut buf);
        for (a, v) in acc.iter_mut().zip(&buf) {
            *a += v.norm_sqr();
        }
        count += 1;
        start += hop;
    }
    let scale = 1.0 / (wpow * count as f64);
    // Reorder so frequencies ascend from -1/2.
    let half = segment / 2;
    let order: Vec<usize> = (half..segment).chain(0..half).collect();
    let linear: Vec<f64> = order.iter().map(|&k| acc[k] * scale).collect();
    let freqs = order
        .iter()
        .map(|&k| if k >= half { k as f64 / segment as f64 - 1.0 } else { k as f64 / segment as f64 })
        .collect();
    let peak = linear.iter().cloned().fold(0.0, f64::max);
    if peak == 0.0 {
        return Err(Error::ZeroEnergy);
    }
    let dbr = linear.iter().map(|p| 10.0 * (p / peak).log10()).collect();
    Ok(PsdEstimate { freqs, dbr, linear, segment, overlap, segments: count, window: "hann".into() })
}

/// Welch PSD over `frames` concatenated random frames.
pub fn psd_frames<S: FrameSource + ?Sized>(
    source: &S,
    frames: usize,
    segment: usize,
    overlap: f64,
    seed: u64,
) -> Result<PsdEstimate> {
    if frames == 0 {
        return Err(Error::InvalidArgument("at least one frame is required".into()));
    }
    let chunks = (0..frames)
        .into_par_iter()
        .map(|t| source.frame(&mut trial_rng(seed, t as u64)))
        .collect::<Result<Vec<_>>>()?;
    psd_welch(&chunks.concat(), segment, overlap)
}

/// Allocated band `[lower, upper]` in normalized frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub lower: f64,
    pub upper: f64,
}

impl Band {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        if !(lower < upper) || lower < -0.5 || upper > 0.5 {
            return Err(Error::InvalidArgument(format!("invalid band [{lower}, {upper}]")));
        }
        Ok(Self { lower, upper })
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, f: f64) -> bool {
        f >= self.lower && f <= self.upper
    }

    /// Band spanned by consecutive occupied frequency indices, widened by
    /// half a bin on each side. Index `i` sits at `i / size`.
    fn from_indices(mut idx: Vec<i64>, size: usize) -> Result<Self> {
        idx.sort_unstable();
        idx.dedup();
        let (first, last) = match (idx.first(), idx.last()) {
            (Some(a), Some(b)) => (*a, *b),
            _ => return Err(Error::ZeroEnergy),
        };
        if (last - first + 1) as usize != idx.len() {
            return Err(Error::InvalidArgument("occupied bins are not contiguous".into()));
        }
        let s = size as f64;
        Self::new((first as f64 - 0.5) / s, (last as f64 + 0.5) / s)
    }

    /// Band of an AFBM waveform from its occupied filter-bank bins. Bin
    /// `k` of the block spectrum radiates at frequency `-k/N`.
    pub fn afbm(modem: &AfbmModem) -> Result<Self> {
        let n = modem.params().dims.n() as i64;
        let idx = modem
            .occupied_bins()
            .into_iter()
            .map(|k| {
                let f = (-(k as i64)).rem_euclid(n);
                if f >= n / 2 {
                    f - n
                } else {
                    f
                }
            })
            .collect();
        Self::from_indices(idx, n as usize)
    }

    /// Band of the AFDM baseline generated at `oversample` times its symbol
    /// rate.
    pub fn afdm(baseline: &AfdmBaseline, oversample: usize) -> Result<Self> {
        let l = baseline.subcarriers() as i64;
        let idx = (-(l / 2)..=l / 2).collect();
        Self::from_indices(idx, (l as usize) * oversample.max(1))
    }

    /// Probe frequency `offset` bandwidths beyond the upper edge (positive)
    /// or below the lower edge (negative).
    pub fn probe(&self, offset: f64) -> Result<f64> {
        if offset == 0.0 || !offset.is_finite() {
            return Err(Error::InvalidArgument(format!("probe offset {offset} does not leave the band")));
        }
        let f = if offset > 0.0 { self.upper + offset * self.width() } else { self.lower + offset * self.width() };
        if !(-0.5..0.5).contains(&f) {
            return Err(Error::InvalidArgument(format!("probe frequency {f} is outside the Nyquist range")));
        }
        if self.contains(f) {
            return Err(Error::InvalidArgument(format!("probe frequency {f} lies inside the band")));
        }
        Ok(f)
    }
}

/// PSD level in dBr at `offset` bandwidths beyond the band edge.
pub fn oobe_level(psd: &PsdEstimate, band: &Band, offset: f64) -> Result<f64> {
    Ok(psd.at(band.probe(offset)?))
}

/// Median PSD level over all frequencies at least `margin` bandwidths away
/// from the band, measured circularly.
pub fn oob_floor(psd: &PsdEstimate, band: &Band, margin: f64) -> Result<f64> {
    let w = band.width();
    let mut vals: Vec<f64> = psd
        .freqs
        .iter()
        .zip(&psd.dbr)
        .filter(|(f, _)| {
            let above = (**f - band.upper).rem_euclid(1.0);
            let below = (band.lower - **f).rem_euclid(1.0);
            let inside = (**f - band.lower).rem_euclid(1.0) <= w;
            !inside && above.min(below) >= margin * w
        })
        .map(|(_, p)| *p)
        .collect();
    if vals.is_empty() {
        return Err(Error::InvalidArgument("no frequencies outside the band margin".into()));
    }
    vals.sort_by(f64::total_cmp);
    let n = vals.len();
    Ok(if n % 2 == 1 { vals[n / 2] } else { 0.5 * (vals[n / 2 - 1] + vals[n / 2]) })
}

/// Signal-to-interference ratio of the ideal-channel chain over the whole
/// frame: diagonal energy of the data block of the orthogonality matrix
/// against its off-diagonal energy. Capped at [`SIR_CAP_DB`].
pub fn sir_orthogonality(modem: &AfbmModem) -> Result<f64> {
    Ok(sir_from_gram(&modem.orthogonality_gram()?, modem.params().dims.l()))
}

/// SIR of an orthogonality matrix whose data indices are the data rows of
/// each `L`-sized symbol block.
pub fn sir_from_gram(gram: &crate::transforms::ComplexMatrix, l: usize) -> f64 {
    let data: Vec<usize> = (0..gram.nrows()).filter(|i| crate::filterbank::is_data_row(l, i % l)).collect();
    let (mut sig, mut int) = (0.0, 0.0);
    for &i in &data {
        for &j in &data {
            let p = gram[(i, j)].norm_sqr();
            if i == j {
                sig += p;
            } else {
                int += p;
            }
        }
    }
    if int == 0.0 || sig / int > 10f64.powf(SIR_CAP_DB / 10.0) {
        SIR_CAP_DB
    } else {
        10.0 * (sig / int).log10()
    }
}

/// `Q(x) = P(N(0,1) > x)`.
pub fn q_function(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

/// Gray-coded QPSK bit error rate over AWGN at the given `Es/N0`.
pub fn qpsk_awgn_ber(esn0_db: f64) -> f64 {
    q_function(10f64.powf(esn0_db / 10.0).sqrt())
}

/// Numeric columns with a header.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl ResultTable {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    pub fn to_table(&self) -> Table {
        let mut t = Table::new(self.columns.clone());
        for r in &self.rows {
            t.rows.push(r.iter().map(|v| format_float(*v)).collect());
        }
        t
    }
}

/// Monte Carlo settings for [`ber_experiment`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BerSettings {
    /// `Es/N0` per data symbol in dB; the noise variance per sample is
    /// `10^(-snr/10)`. `+inf` disables noise.
    pub snr_db: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    /// Draw Rayleigh path gains per trial around the given path powers.
    pub fading: bool,
    /// Guard width used in the chirp feasibility check.
    pub xi: usize,
}

/// Bit error rate versus SNR with per-symbol MMSE equalization on the
/// data-restricted effective channel.
///
/// Columns: `snr_db, ber, errors, bits`.
pub fn ber_experiment(modem: &AfbmModem, channel: &ChannelSpec, settings: &BerSettings) -> Result<ResultTable> {
    let params = modem.params();
    if settings.trials == 0 {
        return Err(Error::InvalidArgument("at least one trial is required".into()));
    }
    if settings.snr_db.iter().any(|s| s.is_nan()) {
        return Err(Error::InvalidArgument("SNR grid contains NaN".into()));
    }
    let lhs = chirp_condition_lhs(channel.max_delay(), channel.max_doppler(), settings.xi);
    if lhs > params.dims.p() as f64 {
        return Err(Error::Infeasible { lhs, p: params.dims.p() });
    }
    let channel = channel.with_frame(modem.frame_len(), params.chirps_mod.c1)?;
    let fixed = if settings.fading { None } else { Some(data_channel_blocks(modem, &channel)?) };
    let l = params.dims.l();
    let rows: Vec<usize> = data_rows(l).collect();
    let bps = params.constellation.bits_per_symbol();
    let n_snr = settings.snr_db.len();

    let per_trial = (0..settings.trials)
        .into_par_iter()
        .map(|t| -> Result<Vec<u64>> {
            let mut rng = trial_rng(settings.seed, t as u64);
            let (h, blocks) = if settings.fading {
                let h = channel.rayleigh(&mut rng);
                let b = data_channel_blocks(modem, &h)?;
                (h, b)
            } else {
                (channel.clone(), fixed.clone().unwrap_or_default())
            };
            let (bits, grid) = modem.random_frame(&mut rng)?;
            let tx = modem.modulate(&grid)?;
            let clean = h.apply(&tx.samples)?;
            let mut errors = vec![0u64; n_snr];
            for (i, &snr) in settings.snr_db.iter().enumerate() {
                let var = if snr.is_finite() { 10f64.powf(-snr / 10.0) } else { 0.0 };
                let mut r = clean.clone();
                add_noise(&mut r, var, &mut rng);
                let out = modem.demodulate(&TimeSignal { samples: r, sample_rate: tx.sample_rate })?;
                let mut detected = Vec::with_capacity(bits.len());
                for (k, block) in blocks.iter().enumerate() {
                    let col = out.column(k);
                    let x: Vec<Complex64> = rows.iter().map(|&ri| col[ri]).collect();
                    let est = MmseEqualizer::new(block, var)?.equalize(&x)?;
                    detected.extend(demap_symbols(&est, params.constellation));
                }
                errors[i] = bits.iter().zip(&detected).filter(|(a, b)| a != b).count() as u64;
            }
            Ok(errors)
        })
        .collect::<Result<Vec<_>>>()?;

    let bits_per_trial = (params.data_symbols_per_frame() * bps) as u64;
    let total_bits = bits_per_trial * settings.trials as u64;
    let rows_out = (0..n_snr)
        .map(|i| {
            let e: u64 = per_trial.iter().map(|v| v[i]).sum();
            vec![settings.snr_db[i], e as f64 / total_bits as f64, e as f64, total_bits as f64]
        })
        .collect();
    Ok(ResultTable {
        columns: ["snr_db", "ber", "errors", "bits"].iter().map(|s| s.to_string()).collect(),
        rows: rows_out,
    })
}

/// Draws `n` uniform phases; handy for constant-envelope test signals.
pub fn random_phases<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<Complex64> {
    (0..n).map(|_| Complex64::from_polar(1.0, rng.random::<f64>() * 2.0 * PI)).collect()
}
