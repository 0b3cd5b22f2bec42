//! Experiment configuration: parsing, defaults, validation and hashing.
//!
//! Files are TOML (`key = value` with `[section]` tables) or JSON. Every
//! field is optional; unset fields take the defaults of the reference
//! setup (`L = 128`, `P = 192`, `N = 256`, `K = 8`, Hermite `O = 1.5`).

use std::fmt;
use std::path::{Path, PathBuf};

use afbm_core::channel::{pick_chirp_params, ChannelSpec, PathSpec};
use afbm_core::filterbank::{prototype_filter, BlockOrigin, FilterKind, Overlap, PrototypeFilter};
use afbm_core::modem::{AfbmModem, AfdmBaseline, Constellation, Metadata, WaveformParams};
use afbm_core::transforms::{ChirpPair, DaftDims};
use afbm_core::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Experiment {
    /// PAPR CCDF of AFBM against the AFDM baseline.
    Papr,
    /// Welch PSD and out-of-band levels.
    Oobe,
    /// Orthogonality (SIR) of the ideal-channel chain.
    Orth,
    /// Effective channel magnitude and path separation.
    Effchan,
    /// BER versus SNR with MMSE equalization.
    Ber,
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Experiment::Papr => "papr",
            Experiment::Oobe => "oobe",
            Experiment::Orth => "orth",
            Experiment::Effchan => "effchan",
            Experiment::Ber => "ber",
        };
        f.write_str(s)
    }
}

/// Prototype filter selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterConfig {
    pub kind: FilterKind,
    #[serde(default = "default_overlap")]
    pub overlap: f64,
    /// Coefficient file for `kind = "custom"`, one value per line.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
}

fn default_overlap() -> f64 {
    1.5
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self { kind: FilterKind::Hermite, overlap: 1.5, file: None }
    }
}

impl FilterConfig {
    /// Short identifier used in output rows, e.g. `hermite-o1.5`.
    pub fn id(&self) -> String {
        format!("{}-o{}", self.kind, self.overlap)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WaveformConfig {
    pub l: usize,
    pub p: usize,
    pub n: usize,
    pub k: usize,
    pub filter: FilterConfig,
    /// Modulation chirp rate; chosen from the channel when unset.
    pub c1: Option<f64>,
    pub c2: f64,
    /// Precoder chirps; equal to the modulation chirps when unset.
    pub c1_pre: Option<f64>,
    pub c2_pre: Option<f64>,
    pub origin: BlockOrigin,
    pub constellation: Constellation,
    pub subcarrier_spacing_hz: f64,
    pub carrier_hz: f64,
}

impl Default for WaveformConfig {
    fn default() -> Self {
        let meta = Metadata::default();
        Self {
            l: 128,
            p: 192,
            n: 256,
            k: 8,
            filter: FilterConfig::default(),
            c1: None,
            c2: 0.0,
            c1_pre: None,
            c2_pre: None,
            origin: BlockOrigin::default(),
            constellation: Constellation::Qpsk,
            subcarrier_spacing_hz: meta.subcarrier_spacing,
            carrier_hz: meta.carrier,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathConfig {
    pub delay: usize,
    #[serde(default)]
    pub doppler: f64,
    pub power: f64,
    #[serde(default)]
    pub phase_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelConfig {
    pub paths: Vec<PathConfig>,
    /// Doppler guard width in the chirp feasibility condition.
    pub xi: usize,
    /// Redraw Rayleigh gains around the path powers in every BER trial.
    pub fading: bool,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        let path = |delay, doppler, power| PathConfig { delay, doppler, power, phase_deg: 0.0 };
        Self { paths: vec![path(0, 0.0, 0.5), path(1, 1.0, 0.3), path(2, -1.0, 0.2)], xi: 1, fading: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AfdmConfig {
    pub subcarriers: usize,
    /// Prefix length; the largest path delay when unset.
    pub cpp: Option<usize>,
    /// Generation rate relative to the symbol rate.
    pub oversample: usize,
    pub c1: Option<f64>,
    pub c2: f64,
}

impl Default for AfdmConfig {
    fn default() -> Self {
        Self { subcarriers: 128, cpp: None, oversample: 2, c1: None, c2: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PaprConfig {
    pub oversample: usize,
    /// CCDF thresholds in dB.
    pub thresholds: Vec<f64>,
}

impl Default for PaprConfig {
    fn default() -> Self {
        Self { oversample: 4, thresholds: (0..=56).map(|i| 0.25 * i as f64).collect() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PsdConfig {
    /// Welch segment length; `4 N` when unset.
    pub segment: Option<usize>,
    pub overlap: f64,
}

impl Default for PsdConfig {
    fn default() -> Self {
        Self { segment: None, overlap: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OobeConfig {
    /// Probe offsets in bandwidths beyond the upper (positive) or lower
    /// (negative) band edge.
    pub probes: Vec<f64>,
    /// Minimum distance from the band, in bandwidths, for the floor median.
    pub floor_margin: f64,
}

impl Default for OobeConfig {
    fn default() -> Self {
        Self { probes: vec![0.10, 0.15, 0.20, 0.24, -0.10, -0.15, -0.20, -0.30, -0.40], floor_margin: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BerConfig {
    /// `Es/N0` grid in dB.
    pub snr_db: Vec<f64>,
}

impl Default for BerConfig {
    fn default() -> Self {
        Self { snr_db: (0..=10).map(|i| 2.0 * i as f64).collect() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Option<Experiment>,
    #[serde(skip_serializing)]
    pub seed: u64,
    pub trials: usize,
    #[serde(skip_serializing)]
    pub output: Option<PathBuf>,
    pub waveform: WaveformConfig,
    pub channel: ChannelConfig,
    pub afdm: AfdmConfig,
    pub papr: PaprConfig,
    pub psd: PsdConfig,
    pub oobe: OobeConfig,
    pub ber: BerConfig,
    /// Filters compared by the `papr`, `oobe` and `orth` experiments; the
    /// waveform filter alone when empty.
    pub compare: Vec<FilterConfig>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: None,
            seed: 1,
            trials: 1000,
            output: None,
            waveform: WaveformConfig::default(),
            channel: ChannelConfig::default(),
            afdm: AfdmConfig::default(),
            papr: PaprConfig::default(),
            psd: PsdConfig::default(),
            oobe: OobeConfig::default(),
            ber: BerConfig::default(),
            compare: Vec::new(),
        }
    }
}

/// Parses a config file. JSON is detected by a `.json` extension or a
/// leading `{`; anything else is TOML. An empty file yields the defaults.
pub fn load_config(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })?;
    let mut cfg = parse_config(&text, path.extension().is_some_and(|e| e == "json"))
        .map_err(|message| CliError::Parse { path: path.to_path_buf(), message })?;
    if let Some(dir) = path.parent() {
        for f in std::iter::once(&mut cfg.waveform.filter).chain(cfg.compare.iter_mut()) {
            if let Some(file) = &f.file {
                if file.is_relative() {
                    f.file = Some(dir.join(file));
                }
            }
        }
    }
    Ok(cfg)
}

/// Parses config text; the error message carries line and column.
pub fn parse_config(text: &str, json: bool) -> Result<ExperimentConfig, String> {
    if json || text.trim_start().starts_with('{') {
        serde_json::from_str(text).map_err(|e| e.to_string())
    } else {
        toml::from_str(text).map_err(|e| e.to_string())
    }
}

/// A validated configuration with every derived object built.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub config: ExperimentConfig,
    pub experiment: Experiment,
    pub params: WaveformParams,
    /// Channel normalized to unit power, over one AFBM frame.
    pub channel: ChannelSpec,
    pub afdm: AfdmBaseline,
    pub compare: Vec<(FilterConfig, PrototypeFilter)>,
    pub psd_segment: usize,
    pub hash: String,
}

fn invalid(section: &str, e: impl fmt::Display) -> CliError {
    CliError::Invalid { section: section.to_string(), message: e.to_string() }
}

fn build_filter(f: &FilterConfig, n: usize, section: &str) -> Result<PrototypeFilter, CliError> {
    let overlap = Overlap::from_f64(f.overlap).map_err(|e| invalid(section, e))?;
    match (f.kind, &f.file) {
        (FilterKind::Custom, Some(file)) => PrototypeFilter::load_csv(file, overlap, n)
            .map_err(|e| invalid(section, format!("{}: {e}", file.display()))),
        (FilterKind::Custom, None) => Err(invalid(section, "custom filters need a `file`")),
        (_, Some(_)) => Err(invalid(section, "`file` is only used with kind = \"custom\"")),
        (kind, None) => prototype_filter(kind, overlap, n).map_err(|e| invalid(section, e)),
    }
}

impl ExperimentConfig {
    /// Checks every module-level invariant and builds the derived objects.
    /// `experiment` overrides the file value.
    pub fn resolve(self, experiment: Option<Experiment>) -> Result<Resolved, CliError> {
        let experiment = experiment
            .or(self.experiment)
            .ok_or_else(|| invalid("experiment", "no experiment given on the command line or in the file"))?;
        if self.trials == 0 {
            return Err(invalid("trials", "at least one trial is required"));
        }
        let w = &self.waveform;
        let dims = DaftDims::new(w.l, w.p, w.n).map_err(|e| invalid("waveform", e))?;
        if w.k == 0 {
            return Err(invalid("waveform", "K must be at least 1"));
        }
        let filter = build_filter(&w.filter, w.n, "waveform.filter")?;

        let ch = &self.channel;
        if ch.paths.is_empty() {
            return Err(invalid("channel", "at least one path is required"));
        }
        let mut paths = Vec::with_capacity(ch.paths.len());
        for (i, p) in ch.paths.iter().enumerate() {
            if !(p.power >= 0.0) || !p.power.is_finite() || !p.doppler.is_finite() || !p.phase_deg.is_finite() {
                return Err(invalid("channel", format!("path {i}: power must be finite and nonnegative")));
            }
            let gain = Complex64::from_polar(p.power.sqrt(), p.phase_deg.to_radians());
            paths.push(PathSpec::new(gain, p.delay, p.doppler));
        }
        let max_delay = ch.paths.iter().map(|p| p.delay).max().unwrap_or(0);
        let max_doppler = ch.paths.iter().map(|p| p.doppler.abs()).fold(0.0, f64::max);

        let c1 = match w.c1 {
            Some(c) => c,
            None => pick_chirp_params(max_delay, max_doppler, ch.xi, w.p).map_err(|e| invalid("waveform", e))?.c1,
        };
        let chirps = ChirpPair::new(c1, w.c2).map_err(|e| invalid("waveform", e))?;
        let mut params = WaveformParams::new(dims, w.k, chirps, filter).map_err(|e| invalid("waveform", e))?;
        params.chirps_pre =
            ChirpPair::new(w.c1_pre.unwrap_or(c1), w.c2_pre.unwrap_or(w.c2)).map_err(|e| invalid("waveform", e))?;
        params.origin = w.origin;
        params.constellation = w.constellation;
        if !(w.subcarrier_spacing_hz > 0.0) || !(w.carrier_hz >= 0.0) {
            return Err(invalid("waveform", "subcarrier spacing must be positive and the carrier nonnegative"));
        }
        params.metadata = Metadata {
            subcarrier_spacing: w.subcarrier_spacing_hz,
            symbol_duration: 1.0 / w.subcarrier_spacing_hz,
            carrier: w.carrier_hz,
        };
        params.validate().map_err(|e| invalid("waveform", e))?;
        // Builds the compensation vector, which fails on singular gains.
        AfbmModem::new(params.clone()).map_err(|e| invalid("waveform", e))?;

        let channel = ChannelSpec::normalized(paths, params.frame_len(), c1).map_err(|e| invalid("channel", e))?;

        let a = &self.afdm;
        let cpp = a.cpp.unwrap_or(max_delay);
        if cpp < max_delay {
            return Err(invalid("afdm", format!("prefix length {cpp} is shorter than the largest delay {max_delay}")));
        }
        if a.oversample == 0 {
            return Err(invalid("afdm", "oversample must be at least 1"));
        }
        let afdm_c1 = match a.c1 {
            Some(c) => c,
            None => pick_chirp_params(max_delay, max_doppler, ch.xi, a.subcarriers).map_err(|e| invalid("afdm", e))?.c1,
        };
        let afdm_chirps = ChirpPair::new(afdm_c1, a.c2).map_err(|e| invalid("afdm", e))?;
        let afdm =
            AfdmBaseline::new(a.subcarriers, w.k, afdm_chirps, cpp, w.constellation).map_err(|e| invalid("afdm", e))?;

        if self.papr.oversample == 0 {
            return Err(invalid("papr", "oversample must be at least 1"));
        }
        if self.papr.thresholds.iter().any(|t| !t.is_finite()) {
            return Err(invalid("papr", "thresholds must be finite"));
        }
        let psd_segment = self.psd.segment.unwrap_or(4 * w.n);
        if psd_segment < 2 {
            return Err(invalid("psd", "segment must hold at least two samples"));
        }
        if !(0.0..1.0).contains(&self.psd.overlap) {
            return Err(invalid("psd", "overlap must lie in [0, 1)"));
        }
        if self.oobe.probes.iter().any(|p| *p == 0.0 || !p.is_finite()) {
            return Err(invalid("oobe", "probe offsets must be finite and nonzero"));
        }
        if !(self.oobe.floor_margin >= 0.0) {
            return Err(invalid("oobe", "floor_margin must be nonnegative"));
        }
        if self.ber.snr_db.is_empty() || self.ber.snr_db.iter().any(|s| s.is_nan()) {
            return Err(invalid("ber", "snr_db must be a nonempty list of numbers"));
        }

        let compare = if self.compare.is_empty() {
            vec![(w.filter.clone(), params.filter.clone())]
        } else {
            self.compare
                .iter()
                .enumerate()
                .map(|(i, f)| Ok((f.clone(), build_filter(f, w.n, &format!("compare[{i}]"))?)))
                .collect::<Result<_, CliError>>()?
        };

        let hash = config_hash(&self, experiment)?;
        Ok(Resolved { config: self, experiment, params, channel, afdm, compare, psd_segment, hash })
    }
}

/// SHA-256 over the canonical JSON form of the config (defaults applied,
/// output path and seed excluded) plus the bytes of any custom filter file.
pub fn config_hash(cfg: &ExperimentConfig, experiment: Experiment) -> Result<String, CliError> {
    let mut canonical = cfg.clone();
    canonical.experiment = Some(experiment);
    let mut hasher = Sha256::new();
    hasher.update(serde_json::to_vec(&canonical).map_err(|e| invalid("config", e))?);
    for f in std::iter::once(&cfg.waveform.filter).chain(&cfg.compare) {
        if let Some(file) = &f.file {
            let bytes = std::fs::read(file).map_err(|source| CliError::Io { path: file.clone(), source })?;
            hasher.update(bytes);
        }
    }
    Ok(hex::encode(hasher.finalize()))
}
