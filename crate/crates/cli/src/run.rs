//! Experiment dispatch. Every experiment computes all of its outputs in
//! memory first and writes them in one pass at the end.

use std::path::{Path, PathBuf};

use afbm_core::channel::{afbm_path_separation, afdm_effective_channel, afdm_path_separation, effective_channel};
use afbm_core::csv::{format_float, Table};
use afbm_core::filterbank::{compensation_vector, is_data_row, orthogonality_matrix, PrototypeFilter};
use afbm_core::metrics::{
    ber_experiment, oob_floor, oobe_level, papr_ccdf, psd_frames, qpsk_awgn_ber, sir_from_gram, sir_orthogonality,
    AfdmSource, Band, BerSettings, CcdfCurve, PsdEstimate,
};
use afbm_core::modem::{AfbmModem, Constellation, WaveformParams};
use afbm_core::Complex64;

use crate::config::{Experiment, Resolved};
use crate::CliError;

/// CCDF probabilities at which PAPR levels are reported.
const REPORT_PROBS: [f64; 3] = [1e-1, 1e-2, 1e-3];

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub files: Vec<PathBuf>,
    pub summary: String,
}

/// Main result rows `metric,config,x,y`.
struct Rows(Table);

impl Rows {
    fn new() -> Self {
        Self(Table::new(["metric", "config", "x", "y"]))
    }

    fn push(&mut self, metric: &str, config: &str, x: f64, y: f64) {
        self.0.rows.push(vec![metric.into(), config.into(), format_float(x), format_float(y)]);
    }
}

struct Outputs {
    files: Vec<(String, String)>,
    summary: String,
}

fn header(table: &mut Table, r: &Resolved) {
    table
        .meta("tool", format!("afbm {}", env!("CARGO_PKG_VERSION")))
        .meta("experiment", r.experiment)
        .meta("config_hash", &r.hash)
        .meta("seed", r.config.seed)
        .meta("trials", r.config.trials);
}

fn with_header(r: &Resolved, body: &str) -> String {
    let mut t = Table::default();
    header(&mut t, r);
    let mut s: String = t.metadata.iter().map(|(k, v)| format!("# {k}: {v}\n")).collect();
    s.push_str(body);
    s
}

fn modem_with(r: &Resolved, filter: &PrototypeFilter, k: usize) -> Result<AfbmModem, CliError> {
    let mut params: WaveformParams = r.params.clone();
    params.filter = filter.clone();
    params.k = k;
    Ok(AfbmModem::new(params)?)
}

/// Runs the experiment and writes its files into `out_dir`.
pub fn run(r: &Resolved, out_dir: &Path) -> Result<RunOutput, CliError> {
    let outputs = match r.experiment {
        Experiment::Papr => papr(r)?,
        Experiment::Oobe => oobe(r)?,
        Experiment::Orth => orth(r)?,
        Experiment::Effchan => effchan(r)?,
        Experiment::Ber => ber(r)?,
    };
    std::fs::create_dir_all(out_dir).map_err(|source| CliError::Io { path: out_dir.to_path_buf(), source })?;
    let mut files = Vec::with_capacity(outputs.files.len());
    for (name, body) in outputs.files {
        let path = out_dir.join(name);
        std::fs::write(&path, body).map_err(|source| CliError::Io { path: path.clone(), source })?;
        files.push(path);
    }
    Ok(RunOutput { files, summary: outputs.summary })
}

fn finish(r: &Resolved, mut rows: Rows, mut extra: Vec<(String, String)>, summary: String) -> Outputs {
    header(&mut rows.0, r);
    let mut files = vec![(format!("{}.csv", r.experiment), rows.0.to_csv_string())];
    files.append(&mut extra);
    Outputs { files, summary }
}

fn papr(r: &Resolved) -> Result<Outputs, CliError> {
    let cfg = &r.config;
    let th = &cfg.papr.thresholds;
    let mut rows = Rows::new();
    let mut curves: Vec<(String, CcdfCurve)> = Vec::new();
    for (f, filter) in &r.compare {
        let modem = modem_with(r, filter, r.params.k)?;
        curves.push((format!("afbm-{}", f.id()), papr_ccdf(&modem, cfg.trials, th, cfg.papr.oversample, cfg.seed)?));
    }
    let afdm = AfdmSource { baseline: r.afdm.clone(), oversample: cfg.afdm.oversample };
    let seed = cfg.seed.wrapping_add(1);
    curves.push(("afdm".into(), papr_ccdf(&afdm, cfg.trials, th, cfg.papr.oversample, seed)?));

    for (id, c) in &curves {
        for (t, p) in c.thresholds.iter().zip(&c.probabilities) {
            rows.push("papr_ccdf", id, *t, *p);
        }
        for p in REPORT_PROBS {
            rows.push("papr_level", id, p, c.level_at(p));
        }
    }
    let afdm_level = curves.last().map(|(_, c)| c.level_at(1e-2)).unwrap_or(f64::NAN);
    let parts: Vec<String> = curves[..curves.len() - 1]
        .iter()
        .map(|(id, c)| {
            let l = c.level_at(1e-2);
            format!("{id} {l:.2} dB (gap {:.2} dB)", afdm_level - l)
        })
        .collect();
    let summary =
        format!("papr: PAPR at CCDF 1e-2: {}; afdm {afdm_level:.2} dB; {} frames", parts.join(", "), cfg.trials);
    Ok(finish(r, rows, Vec::new(), summary))
}

fn oobe(r: &Resolved) -> Result<Outputs, CliError> {
    let cfg = &r.config;
    let (segment, overlap) = (r.psd_segment, cfg.psd.overlap);
    let mut rows = Rows::new();
    let mut estimates: Vec<(String, PsdEstimate, Band)> = Vec::new();
    for (f, filter) in &r.compare {
        let modem = modem_with(r, filter, r.params.k)?;
        let psd = psd_frames(&modem, cfg.trials, segment, overlap, cfg.seed)?;
        estimates.push((format!("afbm-{}", f.id()), psd, Band::afbm(&modem)?));
    }
    let afdm = AfdmSource { baseline: r.afdm.clone(), oversample: cfg.afdm.oversample };
    let psd = psd_frames(&afdm, cfg.trials, segment, overlap, cfg.seed)?;
    estimates.push(("afdm".into(), psd, Band::afdm(&r.afdm, cfg.afdm.oversample)?));

    let mut files = Vec::new();
    let mut parts = Vec::new();
    for (id, psd, band) in &estimates {
        for (f, p) in psd.freqs.iter().zip(&psd.dbr) {
            rows.push("psd", id, *f, *p);
        }
        rows.push("band_lower", id, 0.0, band.lower);
        rows.push("band_upper", id, 0.0, band.upper);
        for &off in &cfg.oobe.probes {
            rows.push("oobe_probe", id, off, oobe_level(psd, band, off)?);
        }
        let floor = oob_floor(psd, band, cfg.oobe.floor_margin)?;
        rows.push("oob_floor", id, cfg.oobe.floor_margin, floor);
        parts.push(format!("{id} {floor:.1} dBr"));
        let mut t = psd.to_table();
        header(&mut t, r);
        t.meta("config", id);
        files.push((format!("psd_{id}.csv"), t.to_csv_string()));
    }
    let summary = format!("oobe: out-of-band floor: {}", parts.join(", "));
    Ok(finish(r, rows, files, summary))
}

fn orth(r: &Resolved) -> Result<Outputs, CliError> {
    let p = &r.params;
    let l = p.dims.l();
    let mut rows = Rows::new();
    let mut files = Vec::new();
    let mut parts = Vec::new();
    for (f, filter) in &r.compare {
        let id = format!("afbm-{}", f.id());
        let b = compensation_vector(p.dims, p.chirps_pre, p.chirps_mod, filter, p.origin)?;
        let single = orthogonality_matrix(p.dims, p.chirps_pre, p.chirps_mod, filter, p.origin, &b)?;
        let diag_err = (0..l)
            .filter(|&i| is_data_row(l, i))
            .map(|i| (single[(i, i)] - Complex64::new(1.0, 0.0)).norm())
            .fold(0.0, f64::max);
        let sir_single = sir_from_gram(&single, l);
        let sir_frame = sir_orthogonality(&modem_with(r, filter, p.k)?)?;
        rows.push("diag_error", &id, 1.0, diag_err);
        rows.push("sir", &id, 1.0, sir_single);
        rows.push("sir", &id, p.k as f64, sir_frame);
        parts.push(format!("{id} {sir_frame:.2} dB (single symbol {sir_single:.2} dB)"));
        let mut body = String::new();
        for i in 0..l {
            let line: Vec<String> = (0..l).map(|j| format_float(single[(i, j)].norm())).collect();
            body.push_str(&line.join(","));
            body.push('\n');
        }
        files.push((format!("orth_{id}.csv"), with_header(r, &body)));
    }
    let summary = format!("orth: SIR over K = {}: {}", p.k, parts.join(", "));
    Ok(finish(r, rows, files, summary))
}

fn effchan(r: &Resolved) -> Result<Outputs, CliError> {
    let xi = r.config.channel.xi;
    // The effective channel is a single-symbol quantity.
    let mut params = r.params.clone();
    params.k = 1;
    let channel = r.channel.with_frame(params.frame_len(), params.chirps_mod.c1)?;
    let afbm = effective_channel(&channel, &params)?;
    let afbm_sep = afbm_path_separation(&channel, &params, xi)?;
    let single = afbm_core::modem::AfdmBaseline::new(
        r.afdm.subcarriers(),
        1,
        r.afdm.chirps(),
        r.afdm.cpp_len(),
        Constellation::Qpsk,
    )?;
    let afdm = afdm_effective_channel(channel.paths(), &single)?;
    let afdm_sep = afdm_path_separation(channel.paths(), &single, 0)?;

    let mut rows = Rows::new();
    rows.push("path_separation", "afbm", xi as f64, afbm_sep);
    rows.push("path_separation", "afdm", 0.0, afdm_sep);
    for (d, e) in afbm.diagonal_energy().iter().enumerate() {
        rows.push("diagonal_energy", "afbm", d as f64, *e);
    }
    for (d, e) in afdm.diagonal_energy().iter().enumerate() {
        rows.push("diagonal_energy", "afdm", d as f64, *e);
    }
    let files = vec![
        ("effchan_afbm.csv".to_string(), with_header(r, &afbm.magnitude_csv())),
        ("effchan_afdm.csv".to_string(), with_header(r, &afdm.magnitude_csv())),
    ];
    let summary = format!(
        "effchan: energy within {xi} diagonals of predicted paths: afbm {afbm_sep:.6}, afdm {afdm_sep:.6} ({}x{})",
        params.dims.l(),
        params.dims.l()
    );
    Ok(finish(r, rows, files, summary))
}

fn ber(r: &Resolved) -> Result<Outputs, CliError> {
    let cfg = &r.config;
    let modem = AfbmModem::new(r.params.clone())?;
    let settings = BerSettings {
        snr_db: cfg.ber.snr_db.clone(),
        trials: cfg.trials,
        seed: cfg.seed,
        fading: cfg.channel.fading,
        xi: cfg.channel.xi,
    };
    let table = ber_experiment(&modem, &r.channel, &settings)?;
    let id = format!("afbm-{}", cfg.waveform.filter.id());
    let mut rows = Rows::new();
    let snr = table.column("snr_db").unwrap_or_default();
    let ber = table.column("ber").unwrap_or_default();
    let errors = table.column("errors").unwrap_or_default();
    for i in 0..snr.len() {
        rows.push("ber", &id, snr[i], ber[i]);
        rows.push("bit_errors", &id, snr[i], errors[i]);
    }
    if r.params.constellation == Constellation::Qpsk {
        for s in &snr {
            rows.push("ber_awgn_theory", "qpsk", *s, qpsk_awgn_ber(*s));
        }
    }
    let bits = table.column("bits").and_then(|b| b.first().copied()).unwrap_or(0.0);
    let (last_snr, last_ber) = (snr.last().copied().unwrap_or(f64::NAN), ber.last().copied().unwrap_or(f64::NAN));
    let summary = format!("ber: {id} BER {last_ber:.3e} at {last_snr} dB ({bits} bits per point)");
    Ok(finish(r, rows, Vec::new(), summary))
}
