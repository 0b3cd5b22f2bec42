//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use afbm_core::channel::{
    afbm_path_separation, afdm_path_separation, chirp_condition_lhs, effective_channel, effective_channel_dense,
    pick_chirp_params, ChannelSpec, PathSpec,
};
use afbm_core::filterbank::{is_data_row, prototype_filter, BlockOrigin, FilterKind, Overlap};
use afbm_core::metrics::{
    ber_experiment, oob_floor, oobe_level, papr_ccdf, psd_frames, qpsk_awgn_ber, sir_orthogonality, AfdmSource, Band,
    BerSettings,
};
use afbm_core::modem::{extract_grid, AfbmModem, AfdmBaseline, Constellation, WaveformParams};
use afbm_core::rng::{complex_normal, trial_rng};
use afbm_core::transforms::{ChirpPair, DaftDims};
use afbm_core::{Complex64, Error};
use nalgebra::DVector;
use rand::Rng;

const SEED: u64 = 20_240_601;

/// Id, name, time budget in seconds and check.
type Criterion = (u32, &'static str, u64, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn paper_dims() -> DaftDims {
    DaftDims::new(128, 192, 256).unwrap()
}

/// Three-path channel used for the default setup: delays 0, 1, 2 with
/// Dopplers 0, 1, -1 and powers 0.5, 0.3, 0.2.
fn default_paths() -> Vec<PathSpec> {
    vec![
        PathSpec::new(c(0.5f64.sqrt(), 0.0), 0, 0.0),
        PathSpec::new(c(0.3f64.sqrt(), 0.0), 1, 1.0),
        PathSpec::new(c(0.2f64.sqrt(), 0.0), 2, -1.0),
    ]
}

fn default_chirps() -> ChirpPair {
    pick_chirp_params(2, 1.0, 1, 192).unwrap()
}

fn params(kind: FilterKind, overlap: f64, k: usize) -> WaveformParams {
    let f = prototype_filter(kind, Overlap::from_f64(overlap).unwrap(), 256).unwrap();
    WaveformParams::new(paper_dims(), k, default_chirps(), f).unwrap()
}

fn afdm_baseline(k: usize) -> AfdmBaseline {
    let chirps = pick_chirp_params(2, 1.0, 1, 128).unwrap();
    AfdmBaseline::new(128, k, chirps, 2, Constellation::Qpsk).unwrap()
}

fn criterion_1() -> Outcome {
    let modem = AfbmModem::new(params(FilterKind::Hermite, 1.5, 1)).unwrap();
    let gram = modem.orthogonality_gram().unwrap();
    let worst_diag =
        (0..128).filter(|&i| is_data_row(128, i)).map(|i| (gram[(i, i)] - c(1.0, 0.0)).norm()).fold(0.0, f64::max);
    let sir = sir_orthogonality(&modem).unwrap();
    outcome(
        worst_diag <= 1e-8 && sir >= 60.0,
        format!("max |diag - 1| = {worst_diag:.3e} (<= 1e-8), SIR = {sir:.2} dB (>= 60 dB)"),
    )
}

fn criterion_2() -> Outcome {
    let modem = AfbmModem::new(params(FilterKind::Hermite, 1.5, 8)).unwrap();
    let mut worst = 0.0_f64;
    for t in 0..100 {
        let mut rng = trial_rng(SEED, t);
        let (_, frame) = modem.random_frame(&mut rng).unwrap();
        let back = modem.demodulate(&modem.modulate(&frame).unwrap()).unwrap();
        for (a, b) in extract_grid(&frame).iter().zip(extract_grid(&back)) {
            worst = worst.max((a - b).norm());
        }
    }
    outcome(worst <= 1e-8, format!("max symbol error over 100 frames = {worst:.3e} (<= 1e-8)"))
}

fn random_config(rng: &mut impl Rng) -> WaveformParams {
    let l = 4 * rng.random_range(2..=6);
    let p = l + 2 * rng.random_range(1..=l / 2);
    let n = p + 4 * rng.random_range(0..=3) + if p % 4 == 0 { 0 } else { 2 };
    let (kind, overlap) = match rng.random_range(0..4) {
        0 => (FilterKind::Hermite, 1.5),
        1 => (FilterKind::Phydyas, rng.random_range(2..=4) as f64),
        2 => (FilterKind::Hermite, 1.0),
        _ => (FilterKind::Rect, 1.0),
    };
    let f = prototype_filter(kind, Overlap::from_f64(overlap).unwrap(), n).unwrap();
    let chirps = ChirpPair::new(rng.random::<f64>() * 0.1, rng.random::<f64>() * 0.01).unwrap();
    let mut params = WaveformParams::new(DaftDims::new(l, p, n).unwrap(), rng.random_range(1..=3), chirps, f).unwrap();
    params.chirps_pre = ChirpPair::new(rng.random::<f64>() * 0.1, 0.0).unwrap();
    if rng.random::<bool>() {
        params.origin = BlockOrigin::Start;
    }
    params
}

fn max_diff(a: impl IntoIterator<Item = Complex64>, b: impl IntoIterator<Item = Complex64>) -> f64 {
    a.into_iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

fn criterion_3() -> Outcome {
    let mut rng = trial_rng(SEED, 3);
    let (mut tx, mut rx, mut eff) = (0.0_f64, 0.0_f64, 0.0_f64);
    let configs = 24;
    for _ in 0..configs {
        let params = random_config(&mut rng);
        let modem = AfbmModem::new(params.clone()).unwrap();
        let gbar = modem.transmit_matrix().unwrap();
        let cmat = modem.spread_matrix().unwrap();

        let (_, frame) = modem.random_frame(&mut rng).unwrap();
        let s = modem.modulate(&frame).unwrap();
        let dense = &gbar * (&cmat * DVector::from_column_slice(frame.as_slice()));
        tx = tx.max(max_diff(s.samples.iter().cloned(), dense.iter().cloned()));

        let r: Vec<Complex64> = (0..s.len()).map(|_| complex_normal(&mut rng, 1.0)).collect();
        let fast = modem.demodulate_spread(&r).unwrap();
        let dense_rx = gbar.adjoint() * DVector::from_column_slice(&r);
        rx = rx.max(max_diff(fast, dense_rx.iter().cloned()));
        let grid = modem.despread(&modem.demodulate_spread(&r).unwrap()).unwrap();
        let dense_grid = cmat.adjoint() * dense_rx;
        rx = rx.max(max_diff(grid.as_slice().iter().cloned(), dense_grid.iter().cloned()));

        let mut single = params.clone();
        single.k = 1;
        let paths: Vec<PathSpec> = (0..rng.random_range(1..=3))
            .map(|_| {
                PathSpec::new(
                    complex_normal(&mut rng, 1.0),
                    rng.random_range(0..4),
                    rng.random_range(-20..=20) as f64 / 10.0,
                )
            })
            .collect();
        let spec = ChannelSpec::new(paths, single.frame_len(), single.chirps_mod.c1).unwrap();
        let a = effective_channel(&spec, &single).unwrap();
        let b = effective_channel_dense(&spec, &single).unwrap();
        eff = eff.max(max_diff(a.matrix.iter().cloned(), b.matrix.iter().cloned()));
    }
    outcome(
        tx <= 1e-10 && rx <= 1e-10 && eff <= 1e-10,
        format!("{configs} configs: tx {tx:.2e}, rx {rx:.2e}, effective channel {eff:.2e} (<= 1e-10)"),
    )
}

fn criterion_4() -> Outcome {
    let trials = 10_000;
    let modem = AfbmModem::new(params(FilterKind::Hermite, 1.5, 8)).unwrap();
    let afdm = AfdmSource { baseline: afdm_baseline(8), oversample: 2 };
    let afbm_curve = papr_ccdf(&modem, trials, &[], 4, SEED).unwrap();
    let afdm_curve = papr_ccdf(&afdm, trials, &[], 4, SEED + 1).unwrap();
    let probs: Vec<f64> = (0..=20).map(|i| 10f64.powf(-3.0 + 0.1 * i as f64)).collect();
    let left = probs.iter().all(|&p| afbm_curve.level_at(p) < afdm_curve.level_at(p));
    let gap = afdm_curve.level_at(1e-2) - afbm_curve.level_at(1e-2);
    outcome(
        left && (1.5..=4.0).contains(&gap),
        format!(
            "AFBM left of AFDM on [1e-3, 1e-1]: {left}; gap at 1e-2 = {gap:.2} dB (AFBM {:.2}, AFDM {:.2}; in [1.5, 4])",
            afbm_curve.level_at(1e-2),
            afdm_curve.level_at(1e-2)
        ),
    )
}

fn criterion_5() -> Outcome {
    let frames = 200;
    let (segment, overlap) = (1024, 0.5);
    let phydyas = AfbmModem::new(params(FilterKind::Phydyas, 4.0, 8)).unwrap();
    let hermite = AfbmModem::new(params(FilterKind::Hermite, 1.5, 8)).unwrap();
    let afdm = AfdmSource { baseline: afdm_baseline(8), oversample: 2 };
    let psd_p = psd_frames(&phydyas, frames, segment, overlap, SEED).unwrap();
    let psd_h = psd_frames(&hermite, frames, segment, overlap, SEED).unwrap();
    let psd_a = psd_frames(&afdm, frames, segment, overlap, SEED).unwrap();
    let band_p = Band::afbm(&phydyas).unwrap();
    let band_h = Band::afbm(&hermite).unwrap();
    let band_a = Band::afdm(&afdm.baseline, 2).unwrap();

    let offsets = [0.10, 0.15, 0.20, 0.24, -0.10, -0.15, -0.20, -0.30, -0.40];
    let mut worst_margin = f64::MAX;
    for off in offsets {
        let a = oobe_level(&psd_a, &band_a, off).unwrap();
        let p = oobe_level(&psd_p, &band_p, off).unwrap();
        worst_margin = worst_margin.min(a - p);
    }
    let floor_p = oob_floor(&psd_p, &band_p, 0.1).unwrap();
    let floor_h = oob_floor(&psd_h, &band_h, 0.1).unwrap();
    let floor_a = oob_floor(&psd_a, &band_a, 0.1).unwrap();
    let ordered = floor_h < floor_a && floor_h > floor_p;
    outcome(
        worst_margin >= 40.0 && floor_p <= -80.0 && ordered,
        format!(
            "min AFDM-PHYDYAS margin over probes = {worst_margin:.1} dB (>= 40); floors: PHYDYAS {floor_p:.1}, \
             Hermite {floor_h:.1}, AFDM {floor_a:.1} dBr (PHYDYAS <= -80, Hermite between)"
        ),
    )
}

fn fig2_paths() -> Vec<PathSpec> {
    vec![
        PathSpec::new(c(0.5f64.sqrt(), 0.0), 0, 0.0),
        PathSpec::new(c(0.3f64.sqrt(), 0.0), 2, 1.0),
        PathSpec::new(c(0.2f64.sqrt(), 0.0), 4, -2.0),
    ]
}

fn criterion_6() -> Outcome {
    let xi = 1;
    let dims = DaftDims::new(64, 128, 128).unwrap();
    let f = prototype_filter(FilterKind::Phydyas, Overlap::from_f64(4.0).unwrap(), 128).unwrap();
    let chirps = pick_chirp_params(4, 2.0, xi, 128).unwrap();
    let params = WaveformParams::new(dims, 1, chirps, f).unwrap();
    let spec = ChannelSpec::normalized(fig2_paths(), params.frame_len(), chirps.c1).unwrap();
    let afbm = afbm_path_separation(&spec, &params, xi).unwrap();

    let afdm_chirps = pick_chirp_params(4, 2.0, xi, 64).unwrap();
    let base = AfdmBaseline::new(64, 1, afdm_chirps, 4, Constellation::Qpsk).unwrap();
    let afdm = afdm_path_separation(spec.paths(), &base, 0).unwrap();
    outcome(afbm >= 0.9 && afdm == 1.0, format!("AFBM metric = {afbm:.6} (>= 0.9), AFDM metric = {afdm:?} (== 1.0)"))
}

fn criterion_7() -> Outcome {
    // Cases straddling the boundary: LHS = P - 1, P, P + 1 for a spread of
    // delays, Dopplers and guard widths.
    let mut cases = Vec::new();
    for (ell, f, xi) in
        [(0usize, 0usize, 0usize), (2, 1, 0), (2, 1, 1), (4, 2, 1), (7, 3, 2), (1, 0, 1), (10, 0, 0), (3, 1, 0)]
    {
        let lhs = 2 * (f + xi) * (ell + 1) + ell;
        for p in [lhs.saturating_sub(1), lhs, lhs + 1] {
            if p > 0 {
                cases.push((ell, f, xi, p));
            }
        }
    }
    cases.truncate(20);
    let mut mismatches = 0;
    for &(ell, f, xi, p) in &cases {
        let brute = 2 * (f + xi) * (ell + 1) + ell <= p;
        let got = pick_chirp_params(ell, f as f64, xi, p);
        let agree = match got {
            Ok(ch) => brute && ch.c1 == (2 * (f + xi) + 1) as f64 / (2 * p) as f64,
            Err(Error::Infeasible { lhs, .. }) => !brute && lhs == chirp_condition_lhs(ell, f as f64, xi),
            Err(_) => false,
        };
        if !agree {
            mismatches += 1;
        }
    }
    outcome(
        cases.len() == 20 && mismatches == 0,
        format!("{} boundary cases, {mismatches} disagreements with brute force", cases.len()),
    )
}

/// SNR at which a decreasing BER curve crosses `target`, interpolating
/// `log10(BER)` linearly.
fn crossing(snr: &[f64], ber: &[f64], target: f64) -> Option<f64> {
    for i in 0..snr.len() - 1 {
        if ber[i] >= target && ber[i + 1] < target && ber[i + 1] > 0.0 {
            let (a, b) = (ber[i].log10(), ber[i + 1].log10());
            return Some(snr[i] + (target.log10() - a) / (b - a) * (snr[i + 1] - snr[i]));
        }
    }
    None
}

fn criterion_8() -> Outcome {
    let modem = AfbmModem::new(params(FilterKind::Hermite, 1.5, 8)).unwrap();
    let awgn = ChannelSpec::new(vec![PathSpec::new(c(1.0, 0.0), 0, 0.0)], modem.frame_len(), 0.0).unwrap();
    let grid: Vec<f64> = (0..=12).map(|i| 4.0 + 0.5 * i as f64).collect();
    let settings = BerSettings { snr_db: grid.clone(), trials: 60, seed: SEED, fading: false, xi: 1 };
    let table = ber_experiment(&modem, &awgn, &settings).unwrap();
    let ber = table.column("ber").unwrap();
    let theory: Vec<f64> = grid.iter().map(|s| qpsk_awgn_ber(*s)).collect();
    let sim_x = crossing(&grid, &ber, 1e-2);
    let ref_x = crossing(&grid, &theory, 1e-2).unwrap();
    let awgn_ok = sim_x.is_some_and(|x| (x - ref_x).abs() <= 0.5);

    let multipath = ChannelSpec::normalized(default_paths(), modem.frame_len(), 0.0).unwrap();
    let snr: Vec<f64> = (0..=6).map(|i| 4.0 * i as f64).collect();
    let settings = BerSettings { snr_db: snr, trials: 40, seed: SEED + 8, fading: true, xi: 1 };
    let table = ber_experiment(&modem, &multipath, &settings).unwrap();
    let ber = table.column("ber").unwrap();
    let bits = table.column("bits").unwrap()[0];
    let monotone = ber.windows(2).all(|w| {
        let sd = (w[0] * (1.0 - w[0]) / bits).sqrt();
        w[1] <= w[0] + sd
    });
    let fmt: Vec<String> = ber.iter().map(|b| format!("{b:.2e}")).collect();
    outcome(
        awgn_ok && monotone,
        format!(
            "AWGN 1e-2 crossing {} dB vs analytic {ref_x:.2} dB (within 0.5); 3-path MMSE BER {} monotone: {monotone}",
            sim_x.map_or("none".to_string(), |x| format!("{x:.2}")),
            fmt.join(" ")
        ),
    )
}

/// Not a numbered criterion: the energy isometry invariant fails for the same
/// reason as criteria 1 and 2, so it is reported here rather than hidden in a
/// test binary that would stop `cargo test` before this report runs.
fn energy_isometry() -> Outcome {
    let modem = AfbmModem::new(params(FilterKind::Hermite, 1.5, 8)).unwrap();
    let mut worst = 0.0_f64;
    for t in 0..50 {
        let mut rng = trial_rng(SEED ^ 0xe1, t);
        let (_, frame) = modem.random_frame(&mut rng).unwrap();
        let d: f64 = extract_grid(&frame).iter().map(|z| z.norm_sqr()).sum();
        let s: f64 = modem.modulate(&frame).unwrap().samples.iter().map(|z| z.norm_sqr()).sum();
        worst = worst.max((s / d - 1.0).abs());
    }
    outcome(worst <= 1e-6, format!("max |E_tx / E_data - 1| over 50 frames = {worst:.3e} (<= 1e-6)"))
}

fn main() {
    let criteria: [Criterion; 8] = [
        (1, "orthogonality restoration", 30, criterion_1),
        (2, "round trip", 30, criterion_2),
        (3, "oracle equivalence", 120, criterion_3),
        (4, "PAPR CCDF", 300, criterion_4),
        (5, "out-of-band emission", 300, criterion_5),
        (6, "effective channel structure", 60, criterion_6),
        (7, "chirp feasibility", 1, criterion_7),
        (8, "BER sanity", 300, criterion_8),
    ];
    let filter: Option<u32> = std::env::args().skip(1).find_map(|a| a.parse().ok());
    let mut failed = 0;
    let mut failed_invariants = 0;
    for (id, name, budget, f) in criteria {
        if filter.is_some_and(|only| only != id) {
            continue;
        }
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(f));
        let elapsed = start.elapsed();
        let within = elapsed <= Duration::from_secs(budget);
        let (pass, detail) = match result {
            Ok(o) => (o.pass && within, o.detail),
            Err(_) => (false, "panicked".to_string()),
        };
        if !pass {
            failed += 1;
        }
        println!(
            "criterion {id} [{name}]: {} | {detail} | {:.2} s (budget {budget} s)",
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64()
        );
    }
    if filter.is_none() {
        let o =
            catch_unwind(AssertUnwindSafe(energy_isometry)).unwrap_or_else(|_| outcome(false, "panicked".to_string()));
        println!("invariant [energy isometry]: {} | {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        if !o.pass {
            failed_invariants += 1;
        }
    }
    println!("acceptance: {failed} criteria failed, {failed_invariants} invariants failed");
    if failed + failed_invariants > 0 {
        std::process::exit(1);
    }
}
