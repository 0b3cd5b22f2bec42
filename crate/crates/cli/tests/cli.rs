use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_afbm");

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn afbm(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SMALL: &str = "trials = 20\n[waveform]\nl = 32\np = 48\nn = 64\nk = 2\n[afdm]\nsubcarriers = 32\n[psd]\nsegment = 128\n[oobe]\nprobes = [0.05, -0.05]\n";

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "small.cfg", SMALL);
    for exp in ["papr", "oobe", "orth", "effchan", "ber"] {
        let a = dir.path().join(format!("{exp}_a"));
        let b = dir.path().join(format!("{exp}_b"));
        for out in [&a, &b] {
            let o = afbm(&[exp, "--config", &cfg, "--out", out.to_str().unwrap(), "--seed", "5"]);
            assert!(o.status.success(), "{exp}: {}", stderr(&o));
        }
        let mut names: Vec<_> = std::fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
        names.sort();
        assert!(!names.is_empty());
        for name in names {
            let (x, y) = (std::fs::read(a.join(&name)).unwrap(), std::fs::read(b.join(&name)).unwrap());
            assert!(x == y, "{exp}: {name:?} differs between runs");
            let text = String::from_utf8(x).unwrap();
            assert!(text.contains("# config_hash: "), "{name:?}");
            assert!(text.contains("# seed: 5"), "{name:?}");
        }
    }
}

#[test]
fn seed_changes_monte_carlo_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "small.cfg", SMALL);
    let read = |seed: &str| {
        let out = dir.path().join(format!("s{seed}"));
        assert!(afbm(&["papr", "--config", &cfg, "--out", out.to_str().unwrap(), "--seed", seed]).status.success());
        std::fs::read_to_string(out.join("papr.csv")).unwrap()
    };
    let (a, b) = (read("1"), read("2"));
    let body = |s: &str| s.lines().filter(|l| !l.starts_with('#')).collect::<Vec<_>>().join("\n");
    assert_ne!(body(&a), body(&b));
}

#[test]
fn fig2_config_writes_square_magnitude_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("fig2.cfg");
    let o = afbm(&["effchan", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(dir.path().join("effchan_afbm.csv")).unwrap();
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows.len(), 64);
    for row in rows {
        let vals: Vec<f64> = row.split(',').map(|v| v.parse().unwrap()).collect();
        assert_eq!(vals.len(), 64);
        assert!(vals.iter().all(|v| *v >= 0.0));
    }
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert_eq!(stdout.lines().count(), 1, "{stdout}");
    assert!(stdout.starts_with("effchan:"));
}

#[test]
fn committed_configs_parse_and_validate() {
    for name in ["fig2.cfg", "fig3.cfg", "fig4.cfg", "orth.cfg", "ber.json"] {
        let cfg = afbm_cli::load_config(&configs().join(name)).unwrap();
        cfg.resolve(None).unwrap_or_else(|e| panic!("{name}: {e}"));
    }
}

#[test]
fn zero_trials_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = afbm(&["papr", "--trials", "0", "--out", out.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("trial"), "{}", stderr(&o));
    assert!(!out.exists(), "nothing is written on error");
}

#[test]
fn invalid_files_fail_with_context() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let out = out.to_str().unwrap();

    let cfg = write(dir.path(), "l.cfg", "[waveform]\nl = 130\n");
    let o = afbm(&["orth", "--config", &cfg, "--out", out]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("divisible by 4"), "{}", stderr(&o));

    let cfg = write(dir.path(), "p.cfg", "[waveform]\np = 300\n");
    let o = afbm(&["orth", "--config", &cfg, "--out", out]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("Nyquist"), "{}", stderr(&o));

    let cfg = write(dir.path(), "bad.cfg", "seed = 1\n\n[waveform\nl = 64\n");
    let o = afbm(&["orth", "--config", &cfg, "--out", out]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));

    let cfg = write(dir.path(), "typo.cfg", "[waveform]\nlength = 64\n");
    let o = afbm(&["orth", "--config", &cfg, "--out", out]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("length"), "{}", stderr(&o));

    let o = afbm(&["orth", "--config", dir.path().join("missing.cfg").to_str().unwrap(), "--out", out]);
    assert!(!o.status.success());

    let o = afbm(&["bogus"]);
    assert!(!o.status.success());
}

#[test]
fn custom_filter_file_is_loaded_relative_to_config() {
    let dir = tempfile::tempdir().unwrap();
    // Rectangular O = 1 prototype for N = 64.
    let coeffs: String = (0..64).map(|_| "1.0\n").collect();
    write(dir.path(), "rect.csv", &coeffs);
    let cfg = write(
        dir.path(),
        "custom.cfg",
        "[waveform]\nl = 32\np = 48\nn = 64\nk = 1\nfilter = { kind = \"custom\", overlap = 1.0, file = \"rect.csv\" }\n",
    );
    let out = dir.path().join("out");
    let o = afbm(&["orth", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(out.join("orth.csv")).unwrap();
    let sir: f64 =
        text.lines().find(|l| l.starts_with("sir,")).and_then(|l| l.rsplit(',').next()).unwrap().parse().unwrap();
    assert_eq!(sir, 150.0, "rectangular single symbol is exactly orthogonal");
}
