use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_quasilinear")
}

fn scenario() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/pauli_filter.toml")
}

fn run(cmd: &str, config: &Path, out: &Path, extra: &[&str]) -> Output {
    Command::new(bin())
        .arg(cmd)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(extra)
        .output()
        .unwrap()
}

fn read(p: PathBuf) -> String {
    std::fs::read_to_string(p).unwrap()
}

fn kv(text: &str, key: &str) -> String {
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key} = ")).map(str::to_string))
        .unwrap_or_else(|| panic!("missing {key}"))
}

#[test]
fn validate_pauli_preset_is_clean() {
    let dir = tempfile::tempdir().unwrap();
    let out = run("validate", &scenario(), dir.path(), &[]);
    assert!(out.status.success());
    let summary = read(dir.path().join("summary.kv"));
    assert_eq!(kv(&summary, "violations"), "0");
    assert_eq!(kv(&summary, "con2"), "0.0000000000000000e0");
}

#[test]
fn validate_flags_broken_constants_and_still_reports() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[constants]\nn = 1\nalpha = [1.0]\nbeta_re = [1.0]\nbeta_im = [0.5]\n").unwrap();
    let out = run("validate", &cfg, &dir.path().join("o"), &[]);
    assert!(!out.status.success());
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.starts_with("error: code=INVALID_CONSTANTS msg="), "{err}");
    assert_eq!(err.lines().count(), 1);
    let summary = read(dir.path().join("o/summary.kv"));
    assert_eq!(kv(&summary, "violated"), "section_hermitian");
}

#[test]
fn steady_filter_reports_stable_closed_loop() {
    let dir = tempfile::tempdir().unwrap();
    let out = run("filter", &scenario(), dir.path(), &["--steady"]);
    assert!(out.status.success());
    let summary = read(dir.path().join("summary.kv"));
    let abscissa: f64 = kv(&summary, "closed_loop_abscissa").parse().unwrap();
    assert!(abscissa < 0.0);
    let residual: f64 = kv(&summary, "are_scaled_residual").parse().unwrap();
    assert!(residual <= 1e-8);
}

#[test]
fn uncoupled_plant_at_rest_has_zero_mean() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("rest.toml");
    std::fs::write(
        &cfg,
        "[constants]\npreset = \"pauli\"\n[plant]\ncoupling = [[0.0, 0.0, 0.0], [0.0, 0.0, 0.0]]\n\
         [grid]\nhorizon = 1.0\nstep = 0.25\n",
    )
    .unwrap();
    let out = run("simulate", &cfg, &dir.path().join("o"), &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = read(dir.path().join("o/trajectory.csv"));
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(&header[..4], ["t", "mu_1", "mu_2", "mu_3"]);
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 5);
    for row in rows {
        for cell in &row.split(',').collect::<Vec<_>>()[1..4] {
            assert_eq!(cell.parse::<f64>().unwrap(), 0.0);
        }
    }
}

#[test]
fn every_csv_has_a_header_and_17_digit_floats() {
    let dir = tempfile::tempdir().unwrap();
    for cmd in ["simulate", "invariant", "moments", "filter"] {
        assert!(run(cmd, &scenario(), &dir.path().join(cmd), &[]).status.success());
    }
    let mut seen = 0;
    for cmd in ["simulate", "invariant", "moments", "filter"] {
        for entry in std::fs::read_dir(dir.path().join(cmd)).unwrap() {
            let p = entry.unwrap().path();
            if p.extension().is_some_and(|e| e == "csv") {
                let text = read(p);
                let mut lines = text.lines();
                let header = lines.next().unwrap();
                assert!(header.split(',').all(|h| h.parse::<f64>().is_err()));
                let row = lines.next().unwrap();
                let float = row.split(',').find(|c| c.contains('e') && c.parse::<f64>().is_ok()).unwrap();
                let mantissa = float.trim_start_matches('-').split('e').next().unwrap();
                assert_eq!(mantissa.chars().filter(char::is_ascii_digit).count(), 17);
                seen += 1;
            }
        }
    }
    assert_eq!(seen, 6);
}

#[test]
fn errors_are_single_line_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = run("simulate", &dir.path().join("missing.toml"), dir.path(), &[]);
    assert!(!out.status.success());
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.starts_with("error: code=CONFIG msg="));

    let cfg = dir.path().join("odd.toml");
    std::fs::write(&cfg, "[constants]\npreset = \"pauli\"\n[plant]\ncoupling = [[1.0, 0.0, 0.0]]\n").unwrap();
    let out = run("invariant", &cfg, dir.path(), &[]);
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.starts_with("error: code=ODD_CHANNELS"), "{err}");
}

#[test]
fn seed_flag_selects_the_random_plant() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("rand.toml");
    std::fs::write(&cfg, "seed = 1\n[constants]\npreset = \"pauli\"\n[plant]\nrandom = { channels = 4 }\n").unwrap();
    let a = run("invariant", &cfg, &dir.path().join("a"), &[]);
    let b = run("invariant", &cfg, &dir.path().join("b"), &["--seed", "1"]);
    let c = run("invariant", &cfg, &dir.path().join("c"), &["--seed", "2"]);
    assert!(a.status.success() && b.status.success() && c.status.success());
    let sa = read(dir.path().join("a/summary.kv"));
    assert_eq!(sa, read(dir.path().join("b/summary.kv")));
    assert_ne!(sa, read(dir.path().join("c/summary.kv")));
}
