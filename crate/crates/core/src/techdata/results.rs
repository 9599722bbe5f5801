//! Result persistence: sweep series as CSV, metrics and reports as
//! versioned TOML.
//!
//! Numeric fields are rendered with Rust's shortest round-trip formatting,
//! so save/load cycles are lossless for every finite value (and NaN/inf
//! survive as their textual forms). The series CSV column order is fixed:
//! x, i_ref, v_ref, power, valid.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::analysis::{
    Conditions, CornerResult, Metrics, MonteCarloReport, SweepAxis, SweepPoint, SweepSeries,
};
use crate::error::{Error, Result};
use crate::sizing::CalibrationScan;

pub const SERIES_HEADER: &str = "x,i_ref,v_ref,power,valid";

/// Render a sweep series: metadata comment block, fixed header, one row
/// per point.
pub fn series_to_csv(series: &SweepSeries) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# curref series v1");
    let _ = writeln!(out, "# design = {}", series.design_id);
    let _ = writeln!(out, "# axis = {}", series.axis);
    let _ = writeln!(out, "# corner = {}", series.conditions.corner);
    let _ = writeln!(out, "# v_dd = {}", series.conditions.v_dd);
    let _ = writeln!(out, "# temperature_k = {}", series.conditions.temperature_k);
    let _ = writeln!(out, "{SERIES_HEADER}");
    for p in &series.points {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            p.x, p.i_ref, p.v_ref, p.power, p.valid
        );
    }
    out
}

pub fn save_series(path: &Path, series: &SweepSeries) -> Result<()> {
    std::fs::write(path, series_to_csv(series))?;
    Ok(())
}

pub fn series_from_csv(text: &str, origin: &str) -> Result<SweepSeries> {
    let mut design_id = String::new();
    let mut axis: Option<SweepAxis> = None;
    let mut conditions = Conditions::default();
    let mut points = Vec::new();
    let mut header_seen = false;

    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(meta) = line.strip_prefix('#') {
            if let Some((key, value)) = meta.split_once('=') {
                let (key, value) = (key.trim(), value.trim());
                match key {
                    "design" => design_id = value.to_string(),
                    "axis" => axis = Some(value.parse()?),
                    "corner" => conditions.corner = value.to_string(),
                    "v_dd" => {
                        conditions.v_dd = value.parse().map_err(|_| {
                            Error::parse(origin, format!("line {}: bad v_dd", lineno + 1))
                        })?
                    }
                    "temperature_k" => {
                        conditions.temperature_k = value.parse().map_err(|_| {
                            Error::parse(origin, format!("line {}: bad temperature_k", lineno + 1))
                        })?
                    }
                    _ => {}
                }
            }
            continue;
        }
        if !header_seen {
            if line != SERIES_HEADER {
                return Err(Error::parse(
                    origin,
                    format!(
                        "line {}: expected header '{SERIES_HEADER}', got '{line}'",
                        lineno + 1
                    ),
                ));
            }
            header_seen = true;
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 5 {
            return Err(Error::parse(
                origin,
                format!(
                    "line {}: expected 5 columns, got {}",
                    lineno + 1,
                    cols.len()
                ),
            ));
        }
        let num = |i: usize| -> Result<f64> {
            cols[i].parse().map_err(|_| {
                Error::parse(
                    origin,
                    format!(
                        "line {}: cannot parse column {} ('{}')",
                        lineno + 1,
                        i + 1,
                        cols[i]
                    ),
                )
            })
        };
        let valid = match cols[4] {
            "true" => true,
            "false" => false,
            other => {
                return Err(Error::parse(
                    origin,
                    format!(
                        "line {}: valid column must be true/false, got '{other}'",
                        lineno + 1
                    ),
                ))
            }
        };
        points.push(SweepPoint {
            x: num(0)?,
            i_ref: num(1)?,
            v_ref: num(2)?,
            power: num(3)?,
            valid,
        });
    }
    let axis = axis.ok_or_else(|| Error::parse(origin, "missing '# axis =' line".to_string()))?;
    if !header_seen {
        return Err(Error::parse(origin, "missing column header".to_string()));
    }
    SweepSeries::new(design_id, axis, conditions, points)
}

pub fn load_series(path: &Path) -> Result<SweepSeries> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::parse(path.display().to_string(), e.to_string()))?;
    series_from_csv(&text, &path.display().to_string())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsFile {
    pub schema: String,
    pub design: String,
    pub axis: String,
    pub conditions: Conditions,
    #[serde(flatten)]
    pub metrics: Metrics,
}

pub fn metrics_to_toml(series: &SweepSeries, metrics: &Metrics) -> Result<String> {
    let file = MetricsFile {
        schema: "metrics/1".to_string(),
        design: series.design_id.clone(),
        axis: series.axis.to_string(),
        conditions: series.conditions.clone(),
        metrics: metrics.clone(),
    };
    toml::to_string(&file).map_err(|e| Error::config(e.to_string()))
}

pub fn save_metrics(path: &Path, series: &SweepSeries, metrics: &Metrics) -> Result<()> {
    std::fs::write(path, metrics_to_toml(series, metrics)?)?;
    Ok(())
}

pub fn load_metrics(path: &Path) -> Result<MetricsFile> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::parse(path.display().to_string(), e.to_string()))?;
    let file: MetricsFile = toml::from_str(&text)
        .map_err(|e| Error::parse(path.display().to_string(), e.to_string()))?;
    if file.schema != "metrics/1" {
        return Err(Error::parse(
            path.display().to_string(),
            format!("unsupported schema '{}'", file.schema),
        ));
    }
    Ok(file)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonteCarloFile {
    pub schema: String,
    #[serde(flatten)]
    pub report: MonteCarloReport,
}

pub fn mc_report_to_toml(report: &MonteCarloReport) -> Result<String> {
    let file = MonteCarloFile {
        schema: "montecarlo/1".to_string(),
        report: report.clone(),
    };
    toml::to_string(&file).map_err(|e| Error::config(e.to_string()))
}

pub fn save_mc_report(path: &Path, report: &MonteCarloReport) -> Result<()> {
    std::fs::write(path, mc_report_to_toml(report)?)?;
    Ok(())
}

pub fn load_mc_report(path: &Path) -> Result<MonteCarloReport> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::parse(path.display().to_string(), e.to_string()))?;
    let file: MonteCarloFile = toml::from_str(&text)
        .map_err(|e| Error::parse(path.display().to_string(), e.to_string()))?;
    if file.schema != "montecarlo/1" {
        return Err(Error::parse(
            path.display().to_string(),
            format!("unsupported schema '{}'", file.schema),
        ));
    }
    Ok(file.report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CornersFile {
    pub schema: String,
    pub design: String,
    pub conditions: Conditions,
    pub t_min: f64,
    pub t_max: f64,
    pub t_step: f64,
    pub results: Vec<CornerResult>,
}

pub fn corners_to_toml(file: &CornersFile) -> Result<String> {
    toml::to_string(file).map_err(|e| Error::config(e.to_string()))
}

pub fn save_corners(path: &Path, file: &CornersFile) -> Result<()> {
    std::fs::write(path, corners_to_toml(file)?)?;
    Ok(())
}

pub fn load_corners(path: &Path) -> Result<CornersFile> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::parse(path.display().to_string(), e.to_string()))?;
    toml::from_str(&text).map_err(|e| Error::parse(path.display().to_string(), e.to_string()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationFile {
    pub schema: String,
    pub design: String,
    pub conditions: Conditions,
    pub t_min: f64,
    pub t_max: f64,
    pub t_step: f64,
    #[serde(flatten)]
    pub scan: CalibrationScan,
}

pub fn calibration_to_toml(file: &CalibrationFile) -> Result<String> {
    toml::to_string(file).map_err(|e| Error::config(e.to_string()))
}

pub fn save_calibration(path: &Path, file: &CalibrationFile) -> Result<()> {
    std::fs::write(path, calibration_to_toml(file)?)?;
    Ok(())
}

pub fn load_calibration(path: &Path) -> Result<CalibrationFile> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::parse(path.display().to_string(), e.to_string()))?;
    toml::from_str(&text).map_err(|e| Error::parse(path.display().to_string(), e.to_string()))
}

/// Render the tabular sensitivity map as CSV (one row per alpha value).
pub fn sensitivity_map_to_csv(map: &crate::sizing::SensitivityMap) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "# curref sensitivity map v1 (S_IREF in 1/V; empty = infeasible)"
    );
    let mut header = String::from("alpha_over_s2");
    for s2 in &map.s2_over_s1 {
        let _ = write!(header, ",{s2}");
    }
    let _ = writeln!(out, "{header}");
    for (ai, alpha) in map.alpha.iter().enumerate() {
        let mut row = format!("{alpha}");
        for si in 0..map.s2_over_s1.len() {
            match map.s_iref[ai][si] {
                Some(v) => {
                    let _ = write!(row, ",{v}");
                }
                None => row.push(','),
            }
        }
        let _ = writeln!(out, "{row}");
    }
    out
}

/// Render the TC-vs-ratio landscape as CSV.
pub fn tc_vs_ratio_to_csv(rows: &[(f64, f64)]) -> String {
    let mut out = String::from("s2_over_s1,tc_ppm_per_degc\n");
    for (r, tc) in rows {
        let _ = writeln!(out, "{r},{tc}");
    }
    out
}
