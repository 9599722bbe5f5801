//! `curref`: size, simulate and analyze 2T-voltage-reference-based current
//! references from the command line.
//!
//! Subcommands: size-ptat, size-cwt, sweep, montecarlo, corners, calibrate.
//! Every run is a pure function of (deck, design, flags, seed); all files
//! land under --out. Temperatures are Celsius at the flags and kelvin
//! everywhere else. Exit codes: 0 ok, 2 config, 3 sizing, 4 numeric,
//! 5 i/o.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use curref::analysis::{
    corner_analysis, metrics_from_series, monte_carlo, sweep, Conditions, MismatchScope, SweepAxis,
};
use curref::circuits::ReferenceDesign;
use curref::error::Error;
use curref::sizing::{select_calibration_code, size_cwt, size_ptat, SizingResult};
use curref::techdata::results::{
    metrics_to_toml, save_series, sensitivity_map_to_csv, tc_vs_ratio_to_csv, CalibrationFile,
    CornersFile,
};
use curref::techdata::{load_design, load_tech_deck, DesignContent, DesignFile, TechDeck};

const KELVIN_OFFSET: f64 = 273.15;

#[derive(Parser)]
#[command(
    name = "curref",
    version,
    about = "Sizing and PVT analysis for current references built on 2T voltage references"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Size the nA-range PTAT reference from a [sizing] design file
    SizePtat(CommonArgs),
    /// Size the uA-range constant-with-temperature reference
    SizeCwt(CommonArgs),
    /// Sweep temperature or supply and extract box metrics
    Sweep(SweepArgs),
    /// Monte-Carlo threshold-mismatch analysis
    Montecarlo(McArgs),
    /// Re-evaluate the design across the deck's process corners
    Corners(CornersArgs),
    /// Sweep all TC calibration codes and pick the best
    Calibrate(CalibrateArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Technology deck (TOML)
    #[arg(long)]
    deck: PathBuf,
    /// Design file (TOML)
    #[arg(long)]
    design: PathBuf,
    /// Output directory, created if missing
    #[arg(long)]
    out: PathBuf,
    /// Supply voltage for power and line-sensitivity figures (V)
    #[arg(long, default_value_t = 1.2)]
    vdd: f64,
    /// Nominal temperature (degC)
    #[arg(long, default_value_t = 25.0)]
    temp: f64,
}

#[derive(Args)]
struct TempRangeArgs {
    /// Temperature sweep start (degC)
    #[arg(long, default_value_t = -40.0)]
    tmin: f64,
    /// Temperature sweep end (degC)
    #[arg(long, default_value_t = 85.0)]
    tmax: f64,
    /// Temperature step (degC)
    #[arg(long, default_value_t = 5.0)]
    tstep: f64,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum AxisArg {
    /// Temperature sweep at fixed supply
    Temp,
    /// Supply sweep at fixed temperature
    Vdd,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    trange: TempRangeArgs,
    /// Sweep axis
    #[arg(long, value_enum, default_value_t = AxisArg::Temp)]
    axis: AxisArg,
    /// Supply sweep start (V)
    #[arg(long, default_value_t = 0.4)]
    vmin: f64,
    /// Supply sweep end (V)
    #[arg(long, default_value_t = 1.8)]
    vmax: f64,
    /// Supply step (V)
    #[arg(long, default_value_t = 0.05)]
    vstep: f64,
    /// Process corner to apply
    #[arg(long, default_value = "tt")]
    corner: String,
}

#[derive(Args)]
struct McArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Sample count
    #[arg(long, default_value_t = 10000)]
    samples: usize,
    /// RNG seed
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Perturbation scope: 'vref' (M1/M2 only) or 'all'
    #[arg(long, default_value = "vref")]
    scope: String,
}

#[derive(Args)]
struct CornersArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    trange: TempRangeArgs,
}

#[derive(Args)]
struct CalibrateArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    trange: TempRangeArgs,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

// the negated comparisons also reject NaN flag values
#[allow(clippy::neg_cmp_op_on_partial_ord)]
fn check_range(min: f64, max: f64, step: f64, what: &str) -> curref::Result<()> {
    if !(min < max) || !(step > 0.0) {
        return Err(Error::config(format!(
            "{what} range requires min < max and step > 0 (got {min}..{max} step {step})"
        )));
    }
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Parse { .. } => 2,
        Error::Sizing(_) => 3,
        Error::Domain(_) | Error::Numeric(_) => 4,
        Error::Io(_) => 5,
    }
}

fn run(cli: Cli) -> curref::Result<()> {
    match cli.cmd {
        Cmd::SizePtat(a) => cmd_size(a, "ptat"),
        Cmd::SizeCwt(a) => cmd_size(a, "cwt"),
        Cmd::Sweep(a) => cmd_sweep(a),
        Cmd::Montecarlo(a) => cmd_montecarlo(a),
        Cmd::Corners(a) => cmd_corners(a),
        Cmd::Calibrate(a) => cmd_calibrate(a),
    }
}

fn load_deck_with_warnings(path: &Path) -> curref::Result<TechDeck> {
    let deck = load_tech_deck(path)?;
    if !deck.placeholder_params.is_empty() {
        eprintln!(
            "warning: deck '{}' carries placeholder parameters: {}",
            deck.name,
            deck.placeholder_params.join(", ")
        );
    }
    Ok(deck)
}

fn ensure_out_dir(path: &Path) -> curref::Result<()> {
    std::fs::create_dir_all(path)?;
    Ok(())
}

/// Resolve a design file to a concrete design, running the sizing
/// algorithm when the file carries a [sizing] block.
fn resolve_design(
    file: &DesignFile,
    deck: &TechDeck,
    v_dd: f64,
) -> curref::Result<ReferenceDesign> {
    match &file.content {
        DesignContent::Explicit(d) => Ok(d.as_ref().clone()),
        DesignContent::PtatSizing(spec) => {
            eprintln!("note: sizing '{}' from its [sizing] block", file.name);
            Ok(size_ptat(spec, deck, v_dd)?.design)
        }
        DesignContent::CwtSizing(spec) => {
            eprintln!("note: sizing '{}' from its [sizing] block", file.name);
            Ok(size_cwt(spec, deck, v_dd)?.design)
        }
    }
}

/// Engineering-notation rendering for the human-readable summaries.
fn eng(v: f64, unit: &str) -> String {
    if v == 0.0 {
        return format!("0 {unit}");
    }
    let prefixes: [(f64, &str); 8] = [
        (1e-15, "f"),
        (1e-12, "p"),
        (1e-9, "n"),
        (1e-6, "u"),
        (1e-3, "m"),
        (1.0, ""),
        (1e3, "k"),
        (1e6, "M"),
    ];
    let mag = v.abs();
    let (scale, prefix) = prefixes
        .iter()
        .rev()
        .find(|(s, _)| mag >= *s)
        .copied()
        .unwrap_or(prefixes[0]);
    format!("{:.4} {}{}", v / scale, prefix, unit)
}

fn print_summary(result: &SizingResult, name: &str, deck_name: &str, kind: &str) {
    let p = &result.predictions;
    println!("sized {kind} design '{name}' with deck '{deck_name}'");
    println!("  V_REF          {}", eng(p.v_ref, "V"));
    println!("  I_REF          {}", eng(p.i_ref, "A"));
    if let (Some(i7), Some(i6)) = (p.i_f7, p.i_f6) {
        println!("  i_f7 / i_f6    {:.4} / {:.4}", i7, i6);
    }
    println!(
        "  S_IREF         {:.4} %/mV",
        p.s_iref / 10.0 // 1/V -> %/mV
    );
    println!("  V_REF LS       {:.4} mV/V", p.vref_ls * 1e3);
    println!("  predicted LS   {:.3} %/V", p.ls * 100.0);
    match (p.sigma_vref, p.sigma_over_mu) {
        (Some(sv), Some(sm)) => {
            println!("  sigma_VREF     {}", eng(sv, "V"));
            println!("  sigma/mu       {:.3} %", sm * 100.0);
        }
        _ => println!("  sigma_VREF     unavailable (deck has no a_vt)"),
    }
    println!("  V_DD,min       {:.4} V", p.vdd_min);
    println!("  power          {} @ {} V", eng(p.power, "W"), p.v_dd);
    if let Some(d) = p.diref_dt {
        println!("  dI/dT @ T_ref  {} (A/K)", eng(d, "A"));
    }
    if let Some(tc) = p.tc_box {
        println!("  box TC         {:.3} ppm/degC (233.15..398.15 K)", tc);
    }
    match &result.design {
        ReferenceDesign::Ptat(d) => {
            println!(
                "  M6 {}x{:.2}/{:.0}  M7 {}x{:.2}/{:.0} (series x W/L um)",
                d.scm6.geom.series,
                d.scm6.geom.w,
                d.scm6.geom.l,
                d.scm7.geom.series,
                d.scm7.geom.w,
                d.scm7.geom.l
            );
        }
        ReferenceDesign::Cwt(d) => {
            println!(
                "  resistor       {} ({:.2} squares of {} ohm/sq)",
                d.resistor.name, d.squares, d.resistor.sheet_resistance
            );
        }
    }
    for note in &result.notes {
        println!("  note: {note}");
    }
}

fn cmd_size(args: CommonArgs, kind: &str) -> curref::Result<()> {
    let deck = load_deck_with_warnings(&args.deck)?;
    let file = load_design(&args.design, &deck)?;
    let result = match (&file.content, kind) {
        (DesignContent::PtatSizing(spec), "ptat") => size_ptat(spec, &deck, args.vdd)?,
        (DesignContent::CwtSizing(spec), "cwt") => size_cwt(spec, &deck, args.vdd)?,
        _ => {
            return Err(Error::config(format!(
                "size-{kind} requires a design file of kind '{kind}' with a [sizing] block"
            )))
        }
    };
    ensure_out_dir(&args.out)?;
    curref::techdata::save_sized_design(
        &args.out.join("design_sized.toml"),
        &result,
        &file.name,
        &deck,
    )?;
    let mut written = vec!["design_sized.toml".to_string()];
    if let Some(map) = &result.sensitivity_map {
        std::fs::write(
            args.out.join("sensitivity_map.csv"),
            sensitivity_map_to_csv(map),
        )?;
        written.push("sensitivity_map.csv".to_string());
    }
    if let Some(tm) = &result.tradeoff_map {
        let mut csv = String::from("m,s2_over_s1,sigma_vref_v,power_w\n");
        for (mi, &m) in tm.m.iter().enumerate() {
            for (si, &s2) in tm.s2_over_s1.iter().enumerate() {
                csv.push_str(&format!(
                    "{m},{s2},{},{}\n",
                    tm.sigma_vref[mi][si], tm.power[mi][si]
                ));
            }
        }
        std::fs::write(args.out.join("tradeoff.csv"), csv)?;
        written.push("tradeoff.csv".to_string());
    }
    if let Some(rows) = &result.tc_vs_ratio {
        std::fs::write(args.out.join("tc_vs_ratio.csv"), tc_vs_ratio_to_csv(rows))?;
        written.push("tc_vs_ratio.csv".to_string());
    }
    print_summary(&result, &file.name, &deck.name, kind);
    println!("wrote {} to {}", written.join(", "), args.out.display());
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> curref::Result<()> {
    let deck = load_deck_with_warnings(&args.common.deck)?;
    let file = load_design(&args.common.design, &deck)?;
    let design = resolve_design(&file, &deck, args.common.vdd)?;
    let corner = deck.corner(&args.corner)?;
    let shifted = curref::analysis::apply_corner(&design, corner);

    let conditions = Conditions {
        v_dd: args.common.vdd,
        temperature_k: args.common.temp + KELVIN_OFFSET,
        corner: args.corner.clone(),
    };
    match args.axis {
        AxisArg::Temp => check_range(
            args.trange.tmin,
            args.trange.tmax,
            args.trange.tstep,
            "temperature",
        )?,
        AxisArg::Vdd => check_range(args.vmin, args.vmax, args.vstep, "supply")?,
    }
    let series = match args.axis {
        AxisArg::Temp => sweep(
            &shifted,
            &file.name,
            SweepAxis::TemperatureK,
            args.trange.tmin + KELVIN_OFFSET,
            args.trange.tmax + KELVIN_OFFSET,
            args.trange.tstep,
            &conditions,
        )?,
        AxisArg::Vdd => sweep(
            &shifted,
            &file.name,
            SweepAxis::SupplyV,
            args.vmin,
            args.vmax,
            args.vstep,
            &conditions,
        )?,
    };
    let metrics = metrics_from_series(&series)?;

    ensure_out_dir(&args.common.out)?;
    save_series(&args.common.out.join("sweep.csv"), &series)?;
    std::fs::write(
        args.common.out.join("metrics.toml"),
        metrics_to_toml(&series, &metrics)?,
    )?;

    println!(
        "swept {} over {} ({} points, {} valid, corner {})",
        file.name,
        series.axis,
        series.points.len(),
        metrics.valid_points,
        args.corner
    );
    match series.axis {
        SweepAxis::TemperatureK => println!(
            "  box TC  {:.4} ppm/degC over [{:.2}, {:.2}] K",
            metrics.tc_ppm_per_degc.unwrap(),
            metrics.x_min,
            metrics.x_max
        ),
        SweepAxis::SupplyV => println!(
            "  box LS  {:.6} %/V over [{:.2}, {:.2}] V",
            metrics.ls_pct_per_v.unwrap(),
            metrics.x_min,
            metrics.x_max
        ),
    }
    println!("  I_REF avg {}", eng(metrics.i_avg, "A"));
    println!(
        "wrote sweep.csv, metrics.toml to {}",
        args.common.out.display()
    );
    Ok(())
}

fn cmd_montecarlo(args: McArgs) -> curref::Result<()> {
    let deck = load_deck_with_warnings(&args.common.deck)?;
    let file = load_design(&args.common.design, &deck)?;
    let design = resolve_design(&file, &deck, args.common.vdd)?;
    let scope: MismatchScope = args.scope.parse()?;
    let conditions = Conditions {
        v_dd: args.common.vdd,
        temperature_k: args.common.temp + KELVIN_OFFSET,
        corner: "tt".to_string(),
    };
    let report = monte_carlo(
        &design,
        &file.name,
        args.samples,
        args.seed,
        scope,
        &conditions,
    )?;

    ensure_out_dir(&args.common.out)?;
    curref::techdata::results::save_mc_report(&args.common.out.join("montecarlo.toml"), &report)?;

    println!(
        "monte carlo on {}: {} samples, seed {}, scope {}",
        file.name, report.samples, report.seed, report.scope
    );
    println!("  mean I_REF       {}", eng(report.mean, "A"));
    println!("  sigma/mu         {:.4} %", report.sigma_over_mu * 100.0);
    println!(
        "  analytic S*sigma {:.4} %",
        report.analytic_sigma_over_mu * 100.0
    );
    println!("wrote montecarlo.toml to {}", args.common.out.display());
    Ok(())
}

fn cmd_corners(args: CornersArgs) -> curref::Result<()> {
    let deck = load_deck_with_warnings(&args.common.deck)?;
    let file = load_design(&args.common.design, &deck)?;
    let design = resolve_design(&file, &deck, args.common.vdd)?;
    let conditions = Conditions {
        v_dd: args.common.vdd,
        temperature_k: args.common.temp + KELVIN_OFFSET,
        corner: "tt".to_string(),
    };
    check_range(
        args.trange.tmin,
        args.trange.tmax,
        args.trange.tstep,
        "temperature",
    )?;
    let corners: Vec<_> = deck.ordered_corners().into_iter().cloned().collect();
    let results = corner_analysis(
        &design,
        &file.name,
        &corners,
        &conditions,
        args.trange.tmin + KELVIN_OFFSET,
        args.trange.tmax + KELVIN_OFFSET,
        args.trange.tstep,
    )?;

    ensure_out_dir(&args.common.out)?;
    let out_file = CornersFile {
        schema: "corners/1".to_string(),
        design: file.name.clone(),
        conditions,
        t_min: args.trange.tmin + KELVIN_OFFSET,
        t_max: args.trange.tmax + KELVIN_OFFSET,
        t_step: args.trange.tstep,
        results: results.clone(),
    };
    curref::techdata::results::save_corners(&args.common.out.join("corners.toml"), &out_file)?;

    println!("corner analysis of {}:", file.name);
    println!("  corner  I_REF         dev%      LS %/V     TC ppm/degC");
    for r in &results {
        println!(
            "  {:<6}  {:<12}  {:+7.2}   {}   {:+10.2}",
            r.corner,
            eng(r.i_ref, "A"),
            r.i_ref_dev_pct,
            r.ls_pct_per_v
                .map(|v| format!("{v:8.4}"))
                .unwrap_or_else(|| "     n/a".to_string()),
            r.tc_ppm_per_degc
        );
    }
    println!("wrote corners.toml to {}", args.common.out.display());
    Ok(())
}

fn cmd_calibrate(args: CalibrateArgs) -> curref::Result<()> {
    let deck = load_deck_with_warnings(&args.common.deck)?;
    let file = load_design(&args.common.design, &deck)?;
    let design = resolve_design(&file, &deck, args.common.vdd)?;
    let cwt = match design {
        ReferenceDesign::Cwt(c) => c,
        ReferenceDesign::Ptat(_) => {
            return Err(Error::config(
                "calibrate requires a cwt design with a calibration block".to_string(),
            ))
        }
    };
    let conditions = Conditions {
        v_dd: args.common.vdd,
        temperature_k: args.common.temp + KELVIN_OFFSET,
        corner: "tt".to_string(),
    };
    check_range(
        args.trange.tmin,
        args.trange.tmax,
        args.trange.tstep,
        "temperature",
    )?;
    let t_min = args.trange.tmin + KELVIN_OFFSET;
    let t_max = args.trange.tmax + KELVIN_OFFSET;
    let scan = select_calibration_code(&cwt, t_min, t_max, args.trange.tstep, &conditions)?;

    ensure_out_dir(&args.common.out)?;
    let out_file = CalibrationFile {
        schema: "calibration/1".to_string(),
        design: file.name.clone(),
        conditions,
        t_min,
        t_max,
        t_step: args.trange.tstep,
        scan: scan.clone(),
    };
    curref::techdata::results::save_calibration(
        &args.common.out.join("calibration.toml"),
        &out_file,
    )?;

    println!(
        "calibration scan of {} over [{:.2}, {:.2}] K:",
        file.name, t_min, t_max
    );
    println!("  code  W2/W1     TC ppm/degC    I_REF");
    for row in &scan.per_code {
        let marker = if row.code == scan.chosen {
            " <- selected"
        } else {
            ""
        };
        println!(
            "  {:>4}  {:.4}  {:+12.3}    {}{}",
            row.code,
            row.ratio,
            row.tc_ppm_per_degc,
            eng(row.i_ref, "A"),
            marker
        );
    }
    println!("selected code {}", scan.chosen);
    println!("wrote calibration.toml to {}", args.common.out.display());
    Ok(())
}
