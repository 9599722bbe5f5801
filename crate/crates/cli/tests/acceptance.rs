//! Acceptance suite: one test per release criterion, each printing a
//! `[PASS] criterion N` line on success (run with `-- --nocapture` to see
//! them). Tolerances are pinned in the asserts.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use curref::analysis::{
    box_ls, box_tc, monte_carlo, sweep, Conditions, MismatchScope, SweepAxis, SweepPoint,
    SweepSeries,
};
use curref::circuits::{cwt_optimal_ratio, propagate_ls_and_mismatch, solve_scm, ReferenceDesign};
use curref::device::thermal_voltage;
use curref::numeric::ls_slope;
use curref::sizing::{select_calibration_code, size_cwt, size_ptat, CwtSizingSpec, PtatSizingSpec};
use curref::techdata::TechDeck;

const T0: f64 = 298.15;

fn deck() -> TechDeck {
    TechDeck::example_xfab180().expect("example deck loads")
}

fn ptat_spec() -> PtatSizingSpec {
    PtatSizingSpec {
        target_iref: 0.1e-9,
        target_sensitivity: None,
        s2_over_s1: 8.0,
        alpha: 3.0,
        n_mirror: 2,
        m_mult: 4,
        vref_device: "lvt_pmos".into(),
        scm_device: "lvt_pmos".into(),
        buffer_device: "lvt_pmos".into(),
        mirror_device: "lvt_nmos".into(),
        unit_w: 1.0,
        unit_l: 20.0,
        buffer_l: 10.0,
        buffer_if: 0.12,
        mirror_l: 25.0,
        mirror_series: 2,
        mirror_if: 0.05,
    }
}

fn cwt_spec() -> CwtSizingSpec {
    CwtSizingSpec {
        target_iref: 1e-6,
        m1_device: "rvt_pmos".into(),
        m2_device: "lvt_pmos".into(),
        length: 5.0,
        w1: 2.25,
        m_mult: 4,
        buffer_device: "lvt_pmos".into(),
        buffer_w: 10.0,
        buffer_l: 1.0,
        buffer_mult: 10,
        mirror_device: "lvt_nmos".into(),
        mirror_w: 10.0,
        mirror_l: 1.0,
        mirror_mult: 10,
        calibration: Some(curref::circuits::CalibrationConfig::new(4, 0.37, 0.83).unwrap()),
    }
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a / b - 1.0).abs()
}

#[test]
fn criterion_1_scm_solve() {
    let n = 1.14;
    let ut = thermal_voltage(T0).unwrap();
    let v_ref = n * ut * 8.0f64.ln();

    // warm-up, then time a single solve
    let _ = solve_scm(v_ref, 3.0, n, T0).unwrap();
    let start = Instant::now();
    let (i_f7, i_f6) = solve_scm(v_ref, 3.0, n, T0).unwrap();
    let elapsed = start.elapsed();

    assert!(rel_err(i_f7, 3.80) < 0.01, "i_f7 = {i_f7}");
    assert!(rel_err(i_f6, 11.41) < 0.01, "i_f6 = {i_f6}");
    assert!(elapsed.as_micros() < 1000, "solve took {elapsed:?}");
    println!(
        "[PASS] criterion 1: solve_scm gives i_f7 = {i_f7:.4}, i_f6 = {i_f6:.4} \
         (targets 3.80 / 11.41, 1%) in {elapsed:?}"
    );
}

#[test]
fn criterion_2_sensitivity() {
    let sized = size_ptat(&ptat_spec(), &deck(), 1.2).unwrap();
    let design = match &sized.design {
        ReferenceDesign::Ptat(p) => p.clone(),
        _ => unreachable!(),
    };
    let s = design.sensitivity(T0).unwrap();
    assert!(rel_err(s, 51.4) < 0.01, "S_IREF = {s} 1/V");

    // finite differences through the full evaluation chain, moving V_REF
    // via M1's threshold (dV_REF/dV_T01 = 1)
    let h = 2e-5;
    let i_at = |delta: f64| {
        let mut d = design.clone();
        d.vref.dev1.params.v_t0_ref += delta;
        d.evaluate(T0, 1.2).unwrap().i_ref.ln()
    };
    let fd = (i_at(h) - i_at(-h)) / (2.0 * h);
    assert!(
        rel_err(s, fd) < 0.005,
        "closed form {s} vs finite difference {fd}"
    );
    println!(
        "[PASS] criterion 2: S_IREF = {:.4} %/mV (target 5.14, 1%), matches chain \
         finite-difference {:.4} %/mV within 0.5%",
        s / 10.0,
        fd / 10.0
    );
}

#[test]
fn criterion_3_sizing_closure() {
    let sized = size_ptat(&ptat_spec(), &deck(), 1.2).unwrap();
    let d = match &sized.design {
        ReferenceDesign::Ptat(p) => p,
        _ => unreachable!(),
    };
    let s7 = d.scm7.aspect_ratio();
    let s6 = d.scm6.aspect_ratio();
    assert!(rel_err(s7, 2.20e-3) < 0.01, "S7 = {s7}");
    assert!(rel_err(s6, 1.65e-3) < 0.01, "S6 = {s6}");
    let i = sized.design.evaluate(T0, 1.2).unwrap().i_ref;
    assert!(rel_err(i, 0.1e-9) < 0.01, "re-simulated I_REF = {i}");
    println!(
        "[PASS] criterion 3: size_ptat gives S7 = {s7:.4e}, S6 = {s6:.4e} \
         (targets 2.20e-3 / 1.65e-3, 1%); re-simulation returns {:.4} pA",
        i * 1e12
    );
}

#[test]
fn criterion_4_propagation_identities() {
    // 5.14 %/mV = 51.4 1/V; 0.37 mV/V; 0.42 mV
    let (ls, sigma) = propagate_ls_and_mismatch(51.4, 0.37e-3, 0.42e-3);
    let ls_pct_per_v = format!("{:.2}", ls * 100.0);
    let sigma_pct = format!("{:.2}", sigma * 100.0);
    assert_eq!(ls_pct_per_v, "1.90", "LS = {ls}");
    assert_eq!(sigma_pct, "2.16", "sigma/mu = {sigma}");
    println!(
        "[PASS] criterion 4: 5.14 %/mV x 0.37 mV/V = {ls_pct_per_v} %/V and \
         5.14 %/mV x 0.42 mV = {sigma_pct} %, exact to 3 significant figures"
    );
}

#[test]
fn criterion_5_cwt_zero_tc() {
    let d = deck();
    let p1 = d.transistor("rvt_pmos").unwrap();
    let p2 = d.transistor("lvt_pmos").unwrap();
    let res = d.resistor("p_poly").unwrap();
    let ratio = cwt_optimal_ratio(p1, p2, res, T0).unwrap();
    assert!(
        (0.28..=0.84).contains(&ratio),
        "optimal W2/W1 = {ratio} outside [0.28, 0.84]"
    );

    // Root identity at the exact (unsnapped) optimum.
    let sized = size_cwt(&cwt_spec(), &d, 1.2).unwrap();
    let base = match &sized.design {
        ReferenceDesign::Cwt(c) => c.clone(),
        _ => unreachable!(),
    };
    let exact = base.with_ratio(ratio).unwrap();
    let didt = exact.diref_dt(T0).unwrap();
    assert!(didt.abs() < 1e-15, "dI/dT at optimum = {didt:e} A/K");

    // +-20% ratio perturbations give strictly larger |box TC| over
    // -40..125 degC.
    let cond = Conditions::default();
    let tc_of = |c: &curref::circuits::CwtReference| {
        let s = sweep(
            &ReferenceDesign::Cwt(c.clone()),
            "acc5",
            SweepAxis::TemperatureK,
            233.15,
            398.15,
            5.0,
            &cond,
        )
        .unwrap();
        box_tc(&s).unwrap().abs()
    };
    let tc_opt = tc_of(&exact);
    let tc_lo = tc_of(&exact.with_ratio(ratio * 0.8).unwrap());
    let tc_hi = tc_of(&exact.with_ratio(ratio * 1.2).unwrap());
    assert!(
        tc_lo > tc_opt && tc_hi > tc_opt,
        "box TC not minimal at optimum: {tc_lo} / {tc_opt} / {tc_hi}"
    );
    println!(
        "[PASS] criterion 5: optimal W2/W1 = {ratio:.4} in [0.28, 0.84]; |dI/dT| at \
         optimum = {didt:.2e} A/K < 1e-15; box TC {tc_opt:.3} ppm/degC vs \
         {tc_lo:.1}/{tc_hi:.1} at -/+20% ratio"
    );
}

#[test]
fn criterion_6_calibration_recovery() {
    let d = deck();
    let sized = size_cwt(&cwt_spec(), &d, 1.2).unwrap();
    let mut skewed = match sized.design {
        ReferenceDesign::Cwt(c) => c,
        _ => unreachable!(),
    };
    // Deliberate process-like threshold skew on M1.
    skewed.vref.dev1.params.v_t0_ref += 0.15;

    let cond = Conditions::default();
    let uncal_series = sweep(
        &ReferenceDesign::Cwt(skewed.clone()),
        "acc6",
        SweepAxis::TemperatureK,
        233.15,
        358.15,
        5.0,
        &cond,
    )
    .unwrap();
    let uncal_tc = box_tc(&uncal_series).unwrap().abs();

    let scan = select_calibration_code(&skewed, 233.15, 358.15, 5.0, &cond).unwrap();
    let best_tc = scan.per_code[scan.chosen as usize].tc_ppm_per_degc.abs();
    assert!(
        best_tc * 3.0 <= uncal_tc,
        "calibration only improved {uncal_tc:.2} -> {best_tc:.2} ppm/degC"
    );
    // argmin dominance over the uncalibrated design
    assert!(best_tc <= uncal_tc);
    println!(
        "[PASS] criterion 6: 150-mV V_T0 skew gives {uncal_tc:.1} ppm/degC uncalibrated; \
         code {} recovers {best_tc:.2} ppm/degC ({:.1}x reduction, required 3x)",
        scan.chosen,
        uncal_tc / best_tc
    );
}

#[test]
fn criterion_7_ptat_temperature_law() {
    let d = deck();
    let sized = size_ptat(&ptat_spec(), &d, 1.2).unwrap();
    let m = d.transistor("lvt_pmos").unwrap().m_mob;
    let series = sweep(
        &sized.design,
        "acc7",
        SweepAxis::TemperatureK,
        233.15,
        358.15,
        5.0,
        &Conditions::default(),
    )
    .unwrap();
    let lx: Vec<f64> = series.points.iter().map(|p| p.x.ln()).collect();
    let ly: Vec<f64> = series.points.iter().map(|p| p.i_ref.ln()).collect();
    let slope = ls_slope(&lx, &ly);
    assert!(
        (slope - (2.0 - m)).abs() < 0.001,
        "slope {slope} vs 2 - m = {}",
        2.0 - m
    );
    println!(
        "[PASS] criterion 7: log I_REF vs log T slope = {slope:.6} vs 2 - m = {:.6} \
         (|err| < 0.001 over 233-358 K)",
        2.0 - m
    );
}

#[test]
fn criterion_8_monte_carlo_consistency() {
    let d = deck();
    let cond = Conditions::default();

    let sized = size_ptat(&ptat_spec(), &d, 1.2).unwrap();
    let start = Instant::now();
    let report = monte_carlo(
        &sized.design,
        "acc8",
        10_000,
        20220501,
        MismatchScope::VrefPair,
        &cond,
    )
    .unwrap();
    let elapsed = start.elapsed();
    assert!(
        elapsed.as_secs_f64() < 10.0,
        "10^4 samples took {elapsed:?}"
    );

    let se = report.analytic_sigma_over_mu / (2.0 * report.samples as f64).sqrt();
    let dev = (report.sigma_over_mu - report.analytic_sigma_over_mu).abs();
    assert!(
        dev < 3.0 * se,
        "empirical {} vs analytic {} (3 SE = {})",
        report.sigma_over_mu,
        report.analytic_sigma_over_mu,
        3.0 * se
    );

    // 1/sqrt(m) scaling of the mismatch across the multiplier axis.
    let mut normalized = Vec::new();
    for m in [1u32, 2, 4, 8] {
        let mut spec = ptat_spec();
        spec.m_mult = m;
        let s = size_ptat(&spec, &d, 1.2).unwrap();
        let r = monte_carlo(
            &s.design,
            "acc8m",
            10_000,
            7 + m as u64,
            MismatchScope::VrefPair,
            &cond,
        )
        .unwrap();
        normalized.push(r.sigma_over_mu * (m as f64).sqrt());
    }
    for (k, v) in normalized.iter().enumerate() {
        assert!(
            rel_err(*v, normalized[0]) < 0.05,
            "1/sqrt(m) scaling broken at index {k}: {normalized:?}"
        );
    }
    println!(
        "[PASS] criterion 8: empirical sigma/mu {:.4}% vs analytic {:.4}% within 3 SE; \
         sigma*sqrt(m) spread {:.2}% across m in {{1,2,4,8}}; 10^4 samples in {elapsed:?}",
        report.sigma_over_mu * 100.0,
        report.analytic_sigma_over_mu * 100.0,
        (normalized.iter().cloned().fold(f64::MIN, f64::max)
            / normalized.iter().cloned().fold(f64::MAX, f64::min)
            - 1.0)
            * 100.0
    );
}

#[test]
fn criterion_9_box_metrics() {
    let cond = Conditions::default();
    let series = |axis: SweepAxis, pts: &[(f64, f64)]| {
        SweepSeries::new(
            "acc9".to_string(),
            axis,
            cond.clone(),
            pts.iter()
                .map(|&(x, i)| SweepPoint {
                    x,
                    i_ref: i,
                    v_ref: 0.0,
                    power: 0.0,
                    valid: true,
                })
                .collect(),
        )
        .unwrap()
    };

    // constant series
    let flat = series(SweepAxis::SupplyV, &[(0.8, 1e-6), (1.3, 1e-6), (1.8, 1e-6)]);
    assert_eq!(box_ls(&flat).unwrap(), 0.0);
    let flat_t = series(SweepAxis::TemperatureK, &[(233.15, 1e-6), (358.15, 1e-6)]);
    assert_eq!(box_tc(&flat_t).unwrap(), 0.0);

    // two-point closed form: {1.00, 1.01} uA over 1 V
    let two = series(SweepAxis::SupplyV, &[(0.8, 1.00e-6), (1.8, 1.01e-6)]);
    let expect = (1.01e-6 - 1.00e-6) / ((1.01e-6 + 1.00e-6) / 2.0) / 1.0 * 100.0;
    let got = box_ls(&two).unwrap();
    assert!(rel_err(got, expect) < 1e-14, "{got} vs {expect}");

    // analytic parabola: i(T) = i0 (1 + c (T - T_mid)^2) on a symmetric grid
    let i0 = 1e-6;
    let c = 4e-6;
    let t_mid = 295.65;
    let pts: Vec<(f64, f64)> = (0..=25)
        .map(|k| {
            let t = 233.15 + 5.0 * k as f64;
            (t, i0 * (1.0 + c * (t - t_mid) * (t - t_mid)))
        })
        .collect();
    let par = series(SweepAxis::TemperatureK, &pts);
    let imax = pts.iter().map(|p| p.1).fold(f64::MIN, f64::max);
    let imin = pts.iter().map(|p| p.1).fold(f64::MAX, f64::min);
    let iavg = pts.iter().map(|p| p.1).sum::<f64>() / pts.len() as f64;
    let expect_tc = (imax - imin) / (iavg * 125.0) * 1e6;
    let got_tc = box_tc(&par).unwrap();
    assert!(
        rel_err(got_tc, expect_tc) < 1e-14,
        "{got_tc} vs {expect_tc}"
    );

    // axis-scaling invariance (power-of-two scaling is exact)
    let scaled: Vec<(f64, f64)> = pts.iter().map(|&(x, i)| (x, i * 1024.0)).collect();
    let got_scaled = box_tc(&series(SweepAxis::TemperatureK, &scaled)).unwrap();
    assert_eq!(got_tc.to_bits(), got_scaled.to_bits());

    println!(
        "[PASS] criterion 9: constant -> 0; two-point box = {got:.6} %/V and parabola \
         box = {got_tc:.4} ppm/degC match closed forms to machine precision; \
         scaling-invariant bitwise"
    );
}

fn repo_path(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../..")
        .join(rel)
}

fn run_cli(args: &[&str]) -> (String, Vec<u8>) {
    let out = Command::new(env!("CARGO_BIN_EXE_curref"))
        .args(args)
        .output()
        .expect("binary runs");
    assert!(
        out.status.success(),
        "curref {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    (String::from_utf8(out.stdout).unwrap(), out.stderr)
}

fn dir_snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut entries: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    entries.sort();
    entries
        .into_iter()
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                std::fs::read(&p).unwrap(),
            )
        })
        .collect()
}

#[test]
fn criterion_10_cli_determinism() {
    let deck = repo_path("decks/xfab180.toml");
    let deck = deck.to_str().unwrap();
    let ptat = repo_path("designs/ptat.toml");
    let ptat = ptat.to_str().unwrap();
    let cwt = repo_path("designs/cwt.toml");
    let cwt = cwt.to_str().unwrap();

    let tmp = tempfile::tempdir().unwrap();
    let out = |name: &str| tmp.path().join(name);

    // Sized design feeds the downstream commands.
    let sized_dir = out("sized");
    let sized_dir_s = sized_dir.to_str().unwrap().to_string();
    run_cli(&[
        "size-ptat",
        "--deck",
        deck,
        "--design",
        ptat,
        "--out",
        &sized_dir_s,
    ]);
    let sized_design = sized_dir.join("design_sized.toml");
    let sized_design_s = sized_design.to_str().unwrap().to_string();
    let cwt_dir = out("sized_cwt");
    let cwt_dir_s = cwt_dir.to_str().unwrap().to_string();
    run_cli(&[
        "size-cwt", "--deck", deck, "--design", cwt, "--out", &cwt_dir_s,
    ]);
    let sized_cwt = cwt_dir.join("design_sized.toml");
    let sized_cwt_s = sized_cwt.to_str().unwrap().to_string();

    let invocations: Vec<(&str, Vec<String>)> = vec![
        (
            "size-ptat",
            vec![
                "size-ptat".into(),
                "--deck".into(),
                deck.into(),
                "--design".into(),
                ptat.into(),
            ],
        ),
        (
            "size-cwt",
            vec![
                "size-cwt".into(),
                "--deck".into(),
                deck.into(),
                "--design".into(),
                cwt.into(),
            ],
        ),
        (
            "sweep-temp",
            vec![
                "sweep".into(),
                "--deck".into(),
                deck.into(),
                "--design".into(),
                sized_design_s.clone(),
                "--axis".into(),
                "temp".into(),
            ],
        ),
        (
            "sweep-vdd",
            vec![
                "sweep".into(),
                "--deck".into(),
                deck.into(),
                "--design".into(),
                sized_design_s.clone(),
                "--axis".into(),
                "vdd".into(),
            ],
        ),
        (
            "montecarlo",
            vec![
                "montecarlo".into(),
                "--deck".into(),
                deck.into(),
                "--design".into(),
                sized_design_s.clone(),
                "--samples".into(),
                "500".into(),
                "--seed".into(),
                "11".into(),
            ],
        ),
        (
            "corners",
            vec![
                "corners".into(),
                "--deck".into(),
                deck.into(),
                "--design".into(),
                sized_design_s.clone(),
            ],
        ),
        (
            "calibrate",
            vec![
                "calibrate".into(),
                "--deck".into(),
                deck.into(),
                "--design".into(),
                sized_cwt_s.clone(),
            ],
        ),
    ];

    for (name, args) in &invocations {
        let out_dir = out(&format!("{name}-out"));
        let out_dir_s = out_dir.to_str().unwrap().to_string();
        let mut argv: Vec<&str> = args.iter().map(|s| s.as_str()).collect();
        argv.push("--out");
        argv.push(&out_dir_s);

        let (stdout1, _) = run_cli(&argv);
        let snap1 = dir_snapshot(&out_dir);
        let (stdout2, _) = run_cli(&argv);
        let snap2 = dir_snapshot(&out_dir);

        assert_eq!(stdout1, stdout2, "stdout of {name} not reproducible");
        assert_eq!(
            snap1.len(),
            snap2.len(),
            "file count of {name} not reproducible"
        );
        for ((n1, b1), (n2, b2)) in snap1.iter().zip(&snap2) {
            assert_eq!(n1, n2, "{name}: file set changed");
            assert_eq!(b1, b2, "{name}: {n1} differs between identical runs");
        }
    }
    println!(
        "[PASS] criterion 10: all {} subcommand invocations bitwise-reproducible \
         (files and stdout)",
        invocations.len()
    );
}
