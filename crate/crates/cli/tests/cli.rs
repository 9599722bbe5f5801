//! End-to-end checks of the CLI surface: exit codes, error classes,
//! default ranges and the printed tables.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn repo_path(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../..")
        .join(rel)
}

fn curref(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_curref"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn size_ptat_summary_lists_design_point_figures() {
    let tmp = tempfile::tempdir().unwrap();
    let out = curref(&[
        "size-ptat",
        "--deck",
        repo_path("decks/xfab180.toml").to_str().unwrap(),
        "--design",
        repo_path("designs/ptat.toml").to_str().unwrap(),
        "--out",
        tmp.path().join("out").to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let stdout = stdout_of(&out);
    // The nominal design point: S_IREF = 5.14 %/mV, predicted LS 1.90 %/V.
    assert!(stdout.contains("5.1372 %/mV"), "{stdout}");
    assert!(stdout.contains("1.900 %/V"), "{stdout}");
    assert!(stdout.contains("V_DD,min"), "{stdout}");
    // Placeholder provenance is surfaced as a warning.
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("placeholder"), "{stderr}");
}

#[test]
fn montecarlo_accepts_all_devices_scope() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("out");
    let out = curref(&[
        "montecarlo",
        "--deck",
        repo_path("decks/xfab180.toml").to_str().unwrap(),
        "--design",
        repo_path("designs/ptat.toml").to_str().unwrap(),
        "--samples",
        "200",
        "--seed",
        "3",
        "--scope",
        "all",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report = std::fs::read_to_string(out_dir.join("montecarlo.toml")).unwrap();
    assert!(report.contains("AllDevices"), "{report}");
}

#[test]
fn missing_deck_is_config_exit_code() {
    let tmp = tempfile::tempdir().unwrap();
    let out = curref(&[
        "sweep",
        "--deck",
        "/nonexistent/deck.toml",
        "--design",
        repo_path("designs/ptat.toml").to_str().unwrap(),
        "--out",
        tmp.path().to_str().unwrap(),
    ]);
    assert_eq!(
        out.status.code(),
        Some(2),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn kind_mismatch_is_config_exit_code() {
    let tmp = tempfile::tempdir().unwrap();
    let out = curref(&[
        "size-cwt",
        "--deck",
        repo_path("decks/xfab180.toml").to_str().unwrap(),
        "--design",
        repo_path("designs/ptat.toml").to_str().unwrap(),
        "--out",
        tmp.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unrealizable_sizing_is_sizing_exit_code() {
    let tmp = tempfile::tempdir().unwrap();
    let design = tmp.path().join("tiny.toml");
    std::fs::write(
        &design,
        r#"
schema = "design/1"
kind = "ptat"
[sizing]
target_iref = "0.001 pA"
s2_over_s1 = 8.0
alpha = 3.0
n_mirror = 2
m_mult = 4
"#,
    )
    .unwrap();
    let out = curref(&[
        "size-ptat",
        "--deck",
        repo_path("decks/xfab180.toml").to_str().unwrap(),
        "--design",
        design.to_str().unwrap(),
        "--out",
        tmp.path().join("out").to_str().unwrap(),
    ]);
    assert_eq!(
        out.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn infeasible_scm_point_is_numeric_exit_code() {
    // alpha above exp(V_REF / (n U_T)) has no SCM solution: domain error.
    let tmp = tempfile::tempdir().unwrap();
    let design = tmp.path().join("infeasible.toml");
    std::fs::write(
        &design,
        r#"
schema = "design/1"
kind = "ptat"
[sizing]
target_iref = "0.1 nA"
s2_over_s1 = 2.0
alpha = 3.0
n_mirror = 2
m_mult = 4
"#,
    )
    .unwrap();
    let out = curref(&[
        "size-ptat",
        "--deck",
        repo_path("decks/xfab180.toml").to_str().unwrap(),
        "--design",
        design.to_str().unwrap(),
        "--out",
        tmp.path().join("out").to_str().unwrap(),
    ]);
    assert_eq!(
        out.status.code(),
        Some(4),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn unwritable_out_is_io_exit_code() {
    let tmp = tempfile::tempdir().unwrap();
    let blocker = tmp.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let out = curref(&[
        "size-ptat",
        "--deck",
        repo_path("decks/xfab180.toml").to_str().unwrap(),
        "--design",
        repo_path("designs/ptat.toml").to_str().unwrap(),
        "--out",
        blocker.join("out").to_str().unwrap(),
    ]);
    assert_eq!(
        out.status.code(),
        Some(5),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn wrong_unit_in_design_is_config_exit_code() {
    let tmp = tempfile::tempdir().unwrap();
    let design = tmp.path().join("bad_unit.toml");
    std::fs::write(
        &design,
        r#"
schema = "design/1"
kind = "ptat"
[sizing]
target_iref = "0.1 V"
s2_over_s1 = 8.0
alpha = 3.0
n_mirror = 2
m_mult = 4
"#,
    )
    .unwrap();
    let out = curref(&[
        "size-ptat",
        "--deck",
        repo_path("decks/xfab180.toml").to_str().unwrap(),
        "--design",
        design.to_str().unwrap(),
        "--out",
        tmp.path().join("out").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("target_iref"), "{stderr}");
}

#[test]
fn default_temperature_sweep_covers_minus40_to_85_step_5() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("out");
    let out = curref(&[
        "sweep",
        "--deck",
        repo_path("decks/xfab180.toml").to_str().unwrap(),
        "--design",
        repo_path("designs/ptat.toml").to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = std::fs::read_to_string(out_dir.join("sweep.csv")).unwrap();
    let data_rows = csv
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with('x') && !l.is_empty())
        .count();
    // -40..85 degC by 5 degC inclusive = 26 points
    assert_eq!(data_rows, 26);
    let xs: Vec<f64> = csv
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with('x') && !l.is_empty())
        .map(|l| l.split(',').next().unwrap().parse().unwrap())
        .collect();
    assert!((xs[0] - 233.15).abs() < 1e-9);
    assert!((xs[25] - 358.15).abs() < 1e-9);
}

#[test]
fn calibrate_prints_full_table_with_selection() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("out");
    let out = curref(&[
        "calibrate",
        "--deck",
        repo_path("decks/xfab180.toml").to_str().unwrap(),
        "--design",
        repo_path("designs/cwt.toml").to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let stdout = stdout_of(&out);
    let code_rows = stdout
        .lines()
        .filter(|l| {
            l.trim_start()
                .chars()
                .next()
                .is_some_and(|c| c.is_ascii_digit())
        })
        .count();
    assert_eq!(code_rows, 16, "{stdout}");
    assert!(stdout.contains("<- selected"), "{stdout}");
    assert!(out_dir.join("calibration.toml").exists());
}

#[test]
fn single_resistor_deck_is_picked_and_named() {
    let tmp = tempfile::tempdir().unwrap();
    let deck = tmp.path().join("one_res.toml");
    // Same transistors as the shipped deck, one flat-TCR resistor only.
    let mut text = std::fs::read_to_string(repo_path("decks/xfab180.toml")).unwrap();
    let cut = text.find("[resistor.").unwrap();
    text.truncate(cut);
    text.push_str(
        "[resistor.flat_only]\nsheet_resistance = \"500 ohm/sq\"\ntcr1 = \"0 ppm/degC\"\n",
    );
    std::fs::write(&deck, text).unwrap();

    let out = curref(&[
        "size-cwt",
        "--deck",
        deck.to_str().unwrap(),
        "--design",
        repo_path("designs/cwt.toml").to_str().unwrap(),
        "--out",
        tmp.path().join("out").to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let stdout = stdout_of(&out);
    assert!(stdout.contains("flat_only"), "{stdout}");
}

#[test]
fn sweep_accepts_sizing_design_and_corner_flag() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("out");
    let out = curref(&[
        "sweep",
        "--deck",
        repo_path("decks/xfab180.toml").to_str().unwrap(),
        "--design",
        repo_path("designs/ptat.toml").to_str().unwrap(),
        "--corner",
        "ff",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let metrics = std::fs::read_to_string(out_dir.join("metrics.toml")).unwrap();
    assert!(metrics.contains("corner = \"ff\""), "{metrics}");
}

#[test]
fn inconsistent_range_is_config_exit_code() {
    let tmp = tempfile::tempdir().unwrap();
    let out = curref(&[
        "sweep",
        "--deck",
        repo_path("decks/xfab180.toml").to_str().unwrap(),
        "--design",
        repo_path("designs/ptat.toml").to_str().unwrap(),
        "--tmin",
        "50",
        "--tmax",
        "10",
        "--out",
        tmp.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_corner_is_config_exit_code() {
    let tmp = tempfile::tempdir().unwrap();
    let out = curref(&[
        "sweep",
        "--deck",
        repo_path("decks/xfab180.toml").to_str().unwrap(),
        "--design",
        repo_path("designs/ptat.toml").to_str().unwrap(),
        "--corner",
        "zz",
        "--out",
        tmp.path().join("out").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
}
