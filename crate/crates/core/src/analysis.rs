//! Sweeps, box-method metric extraction, Monte-Carlo mismatch sampling and
//! process-corner analysis over any reference design.
//!
//! Every run is a pure function of (design, conditions, seed): sweep points
//! are generated on a deterministic grid, Monte-Carlo samples draw from
//! per-sample counter-seeded streams so serial and parallel evaluation
//! orders agree, and invalid points are flagged rather than dropped.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::circuits::{ReferenceDesign, TwoTVref};
use crate::device::{resistance, thermal_voltage, TransistorParams};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepAxis {
    /// Temperature sweep (x in kelvin) at fixed supply.
    TemperatureK,
    /// Supply sweep (x in volts) at fixed temperature.
    SupplyV,
}

impl std::fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SweepAxis::TemperatureK => write!(f, "temperature_k"),
            SweepAxis::SupplyV => write!(f, "supply_v"),
        }
    }
}

impl std::str::FromStr for SweepAxis {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "temperature_k" => Ok(SweepAxis::TemperatureK),
            "supply_v" => Ok(SweepAxis::SupplyV),
            _ => Err(Error::config(format!("unknown sweep axis '{s}'"))),
        }
    }
}

/// Fixed operating conditions of a run; the swept axis overrides its own
/// entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conditions {
    pub v_dd: f64,
    pub temperature_k: f64,
    pub corner: String,
}

impl Default for Conditions {
    fn default() -> Self {
        Conditions {
            v_dd: 1.2,
            temperature_k: 298.15,
            corner: "tt".to_string(),
        }
    }
}

/// One record of a sweep. Points that fail to solve carry NaNs; points
/// below the minimum supply are kept but flagged invalid so box metrics
/// skip them.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SweepPoint {
    pub x: f64,
    pub i_ref: f64,
    pub v_ref: f64,
    pub power: f64,
    pub valid: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepSeries {
    pub design_id: String,
    pub axis: SweepAxis,
    pub conditions: Conditions,
    pub points: Vec<SweepPoint>,
}

impl SweepSeries {
    /// Normalize and validate: points are sorted by x and must be unique.
    pub fn new(
        design_id: String,
        axis: SweepAxis,
        conditions: Conditions,
        mut points: Vec<SweepPoint>,
    ) -> Result<Self> {
        if points.iter().any(|p| !p.x.is_finite()) {
            return Err(Error::domain(
                "sweep series: non-finite x value".to_string(),
            ));
        }
        points.sort_by(|a, b| a.x.partial_cmp(&b.x).unwrap());
        if points.windows(2).any(|w| w[0].x == w[1].x) {
            return Err(Error::domain(
                "sweep series: x values must be strictly increasing".to_string(),
            ));
        }
        Ok(SweepSeries {
            design_id,
            axis,
            conditions,
            points,
        })
    }

    pub fn valid_points(&self) -> impl Iterator<Item = &SweepPoint> {
        self.points.iter().filter(|p| p.valid)
    }
}

/// Inclusive deterministic grid from `min` by `step` up to `max`.
pub fn grid(min: f64, max: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) {
        return Err(Error::config(format!(
            "grid: step must be positive (got {step})"
        )));
    }
    if !(max >= min) {
        return Err(Error::config(format!(
            "grid: empty range (min {min}, max {max})"
        )));
    }
    let count = ((max - min) / step + 1e-9).floor() as usize;
    Ok((0..=count).map(|i| min + i as f64 * step).collect())
}

/// Evaluate the design across the axis. Solver failures annotate the point
/// (NaN, invalid) instead of aborting the sweep.
pub fn sweep(
    design: &ReferenceDesign,
    design_id: &str,
    axis: SweepAxis,
    min: f64,
    max: f64,
    step: f64,
    conditions: &Conditions,
) -> Result<SweepSeries> {
    let xs = grid(min, max, step)?;
    let mut points = Vec::with_capacity(xs.len());
    for x in xs {
        let (t, v_dd) = match axis {
            SweepAxis::TemperatureK => (x, conditions.v_dd),
            SweepAxis::SupplyV => (conditions.temperature_k, x),
        };
        let point = match design.evaluate(t, v_dd) {
            Ok(out) => {
                let above_min = design.vdd_min(t).map(|vm| v_dd >= vm).unwrap_or(false);
                SweepPoint {
                    x,
                    i_ref: out.i_ref,
                    v_ref: out.v_ref,
                    power: out.power,
                    valid: above_min,
                }
            }
            Err(_) => SweepPoint {
                x,
                i_ref: f64::NAN,
                v_ref: f64::NAN,
                power: f64::NAN,
                valid: false,
            },
        };
        points.push(point);
    }
    SweepSeries::new(design_id.to_string(), axis, conditions.clone(), points)
}

/// Box metric building block: (max - min) / (norm * span).
pub fn box_metric(values: &[f64], span: f64, norm: f64) -> Result<f64> {
    if values.len() < 2 {
        return Err(Error::numeric(
            "box metric: fewer than 2 valid points".to_string(),
        ));
    }
    if !(span > 0.0) || norm == 0.0 {
        return Err(Error::numeric(format!(
            "box metric: degenerate span {span} or normalization {norm}"
        )));
    }
    let max = values.iter().cloned().fold(f64::MIN, f64::max);
    let min = values.iter().cloned().fold(f64::MAX, f64::min);
    Ok((max - min) / (norm * span))
}

fn box_over_valid(series: &SweepSeries, expected_axis: SweepAxis, unit: f64) -> Result<f64> {
    if series.axis != expected_axis {
        return Err(Error::config(format!(
            "box metric: series axis {} does not match requested metric",
            series.axis
        )));
    }
    let valid: Vec<&SweepPoint> = series.valid_points().collect();
    if valid.len() < 2 {
        return Err(Error::numeric(
            "box metric: fewer than 2 valid points".to_string(),
        ));
    }
    let span = valid.last().unwrap().x - valid[0].x;
    let i_avg = valid.iter().map(|p| p.i_ref).sum::<f64>() / valid.len() as f64;
    let values: Vec<f64> = valid.iter().map(|p| p.i_ref).collect();
    Ok(box_metric(&values, span, i_avg)? * unit)
}

/// Box line sensitivity over a supply sweep, in %/V.
pub fn box_ls(series: &SweepSeries) -> Result<f64> {
    box_over_valid(series, SweepAxis::SupplyV, 100.0)
}

/// Box temperature coefficient over a temperature sweep, in ppm/degC.
pub fn box_tc(series: &SweepSeries) -> Result<f64> {
    box_over_valid(series, SweepAxis::TemperatureK, 1e6)
}

/// Extracted metrics of one series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub ls_pct_per_v: Option<f64>,
    pub tc_ppm_per_degc: Option<f64>,
    pub i_avg: f64,
    pub i_min: f64,
    pub i_max: f64,
    pub x_min: f64,
    pub x_max: f64,
    pub valid_points: usize,
    pub total_points: usize,
}

pub fn metrics_from_series(series: &SweepSeries) -> Result<Metrics> {
    let valid: Vec<&SweepPoint> = series.valid_points().collect();
    if valid.len() < 2 {
        return Err(Error::numeric(
            "metrics: fewer than 2 valid points".to_string(),
        ));
    }
    let i_avg = valid.iter().map(|p| p.i_ref).sum::<f64>() / valid.len() as f64;
    let i_min = valid.iter().map(|p| p.i_ref).fold(f64::MAX, f64::min);
    let i_max = valid.iter().map(|p| p.i_ref).fold(f64::MIN, f64::max);
    Ok(Metrics {
        ls_pct_per_v: match series.axis {
            SweepAxis::SupplyV => Some(box_ls(series)?),
            SweepAxis::TemperatureK => None,
        },
        tc_ppm_per_degc: match series.axis {
            SweepAxis::TemperatureK => Some(box_tc(series)?),
            SweepAxis::SupplyV => None,
        },
        i_avg,
        i_min,
        i_max,
        x_min: valid[0].x,
        x_max: valid.last().unwrap().x,
        valid_points: valid.len(),
        total_points: series.points.len(),
    })
}

/// Per-polarity parameter shift of one process corner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CornerShift {
    /// Multiplies i_sq_ref.
    pub i_sq_factor: f64,
    /// Added to the threshold magnitude (V); fast corners are negative.
    pub v_t0_delta: f64,
}

impl CornerShift {
    pub const IDENTITY: CornerShift = CornerShift {
        i_sq_factor: 1.0,
        v_t0_delta: 0.0,
    };

    pub fn is_identity(&self) -> bool {
        self.i_sq_factor == 1.0 && self.v_t0_delta == 0.0
    }
}

/// Systematic per-polarity parameter shifts; tt must be the identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CornerSpec {
    pub name: String,
    pub nmos: CornerShift,
    pub pmos: CornerShift,
}

impl CornerSpec {
    pub fn identity(name: &str) -> Self {
        CornerSpec {
            name: name.to_string(),
            nmos: CornerShift::IDENTITY,
            pmos: CornerShift::IDENTITY,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.name == "tt" && !(self.nmos.is_identity() && self.pmos.is_identity()) {
            return Err(Error::config(
                "corner 'tt' must carry identity shifts".to_string(),
            ));
        }
        Ok(())
    }

    fn shift_for(&self, p: &TransistorParams) -> CornerShift {
        match p.polarity {
            crate::device::Polarity::Nmos => self.nmos,
            crate::device::Polarity::Pmos => self.pmos,
        }
    }
}

fn shift_params(p: &mut TransistorParams, s: CornerShift) {
    p.i_sq_ref *= s.i_sq_factor;
    p.v_t0_ref += s.v_t0_delta;
}

/// Re-parameterize a design under a process corner.
pub fn apply_corner(design: &ReferenceDesign, corner: &CornerSpec) -> ReferenceDesign {
    let mut out = design.clone();
    let apply = |dev: &mut crate::circuits::DeviceInst| {
        let s = corner.shift_for(&dev.params);
        shift_params(&mut dev.params, s);
    };
    match &mut out {
        ReferenceDesign::Ptat(p) => {
            apply(&mut p.vref.dev1);
            apply(&mut p.vref.dev2);
            apply(&mut p.scm6);
            apply(&mut p.scm7);
            apply(&mut p.buffer);
            apply(&mut p.mirror);
        }
        ReferenceDesign::Cwt(c) => {
            apply(&mut c.vref.dev1);
            apply(&mut c.vref.dev2);
            apply(&mut c.buffer);
            apply(&mut c.mirror);
        }
    }
    out
}

/// Metrics of one design under one corner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CornerResult {
    pub corner: String,
    /// I_REF at the nominal conditions under this corner (A).
    pub i_ref: f64,
    /// Relative deviation from the tt corner (%).
    pub i_ref_dev_pct: f64,
    /// Analytic supply sensitivity S_IREF * (g_d2/g_m1) (%/V).
    pub ls_pct_per_v: Option<f64>,
    /// Box TC over the requested temperature range (ppm/degC).
    pub tc_ppm_per_degc: f64,
}

/// Re-evaluate the design under every corner; deviations are reported
/// against the tt run.
pub fn corner_analysis(
    design: &ReferenceDesign,
    design_id: &str,
    corners: &[CornerSpec],
    conditions: &Conditions,
    t_min: f64,
    t_max: f64,
    t_step: f64,
) -> Result<Vec<CornerResult>> {
    let t = conditions.temperature_k;
    let tt = design.evaluate(t, conditions.v_dd)?;
    let mut out = Vec::with_capacity(corners.len());
    for corner in corners {
        corner.validate()?;
        let shifted = apply_corner(design, corner);
        let nominal = shifted.evaluate(t, conditions.v_dd)?;
        let mut cond = conditions.clone();
        cond.corner = corner.name.clone();
        let series = sweep(
            &shifted,
            design_id,
            SweepAxis::TemperatureK,
            t_min,
            t_max,
            t_step,
            &cond,
        )?;
        let tc = box_tc(&series)?;
        let ls = shifted
            .predicted_ls(t, conditions.v_dd)
            .ok()
            .map(|v| v * 100.0);
        out.push(CornerResult {
            corner: corner.name.clone(),
            i_ref: nominal.i_ref,
            i_ref_dev_pct: (nominal.i_ref / tt.i_ref - 1.0) * 100.0,
            ls_pct_per_v: ls,
            tc_ppm_per_degc: tc,
        });
    }
    Ok(out)
}

/// Which devices receive threshold perturbations in a Monte-Carlo run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MismatchScope {
    /// M1/M2 only, the scope of the analytic prediction.
    VrefPair,
    /// Additionally the SCM pair and the mirror pair.
    AllDevices,
}

impl std::str::FromStr for MismatchScope {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "vref" => Ok(MismatchScope::VrefPair),
            "all" => Ok(MismatchScope::AllDevices),
            _ => Err(Error::config(format!(
                "unknown mismatch scope '{s}' (expected 'vref' or 'all')"
            ))),
        }
    }
}

impl std::fmt::Display for MismatchScope {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MismatchScope::VrefPair => write!(f, "vref"),
            MismatchScope::AllDevices => write!(f, "all"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloReport {
    pub design_id: String,
    pub samples: usize,
    pub seed: u64,
    pub scope: MismatchScope,
    pub conditions: Conditions,
    pub nominal_i_ref: f64,
    pub mean: f64,
    /// Sample standard deviation (n-1 normalization).
    pub sigma: f64,
    pub sigma_over_mu: f64,
    /// S_IREF * sigma_VREF, the closed-form prediction for the M1/M2 scope.
    pub analytic_sigma_over_mu: f64,
    pub sigma_vref: f64,
    pub i_ref_samples: Vec<f64>,
}

fn pelgrom_sigma(p: &TransistorParams, area_um2: f64, what: &str) -> Result<f64> {
    let a = p.a_vt.ok_or_else(|| {
        Error::config(format!(
            "monte_carlo: a_vt missing for {what}'s device type"
        ))
    })?;
    Ok(a / area_um2.sqrt())
}

/// Threshold-mismatch Monte-Carlo: independent per-device V_T0
/// perturbations with Pelgrom-scaled sigma, full re-solve per sample.
///
/// Sample k draws from stream k+1 of a counter-seeded generator, so the
/// report is reproducible bitwise for a fixed seed regardless of
/// evaluation order.
pub fn monte_carlo(
    design: &ReferenceDesign,
    design_id: &str,
    n_samples: usize,
    seed: u64,
    scope: MismatchScope,
    conditions: &Conditions,
) -> Result<MonteCarloReport> {
    if n_samples < 2 {
        return Err(Error::config(format!(
            "monte_carlo: need at least 2 samples (got {n_samples})"
        )));
    }
    let t = conditions.temperature_k;
    let v_dd = conditions.v_dd;
    let vref: &TwoTVref = design.vref_core();

    let sigma1 = pelgrom_sigma(&vref.dev1.params, vref.dev1.geom.area_um2(), "M1")?;
    let sigma2 = pelgrom_sigma(&vref.dev2.params, vref.dev2.geom.area_um2(), "M2")?;
    let extra = match (scope, design) {
        (MismatchScope::VrefPair, _) => None,
        (MismatchScope::AllDevices, ReferenceDesign::Ptat(p)) => Some((
            pelgrom_sigma(&p.scm6.params, p.scm6.geom.area_um2(), "M6")?,
            pelgrom_sigma(&p.scm7.params, p.scm7.geom.area_um2(), "M7")?,
            pelgrom_sigma(&p.mirror.params, p.mirror.geom.area_um2(), "M4")?,
            pelgrom_sigma(
                &p.mirror.params,
                p.mirror.geom.area_um2() * p.n_mirror as f64,
                "M5",
            )?,
            p.mirror.params.n,
        )),
        (MismatchScope::AllDevices, ReferenceDesign::Cwt(c)) => Some((
            0.0,
            0.0,
            pelgrom_sigma(&c.mirror.params, c.mirror.geom.area_um2(), "M4")?,
            pelgrom_sigma(&c.mirror.params, c.mirror.geom.area_um2(), "M5")?,
            c.mirror.params.n,
        )),
    };

    let nominal = design.evaluate(t, v_dd)?;
    let ut = thermal_voltage(t)?;
    let unit = Normal::new(0.0, 1.0).map_err(|e| Error::numeric(e.to_string()))?;

    let mut samples = Vec::with_capacity(n_samples);
    for k in 0..n_samples {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(k as u64 + 1);
        let d1 = sigma1 * unit.sample(&mut rng);
        let d2 = sigma2 * unit.sample(&mut rng);

        let mut perturbed = design.clone();
        {
            let core = perturbed.vref_core_mut();
            core.dev1.params.v_t0_ref += d1;
            core.dev2.params.v_t0_ref += d2;
        }
        let v_ref = perturbed.vref_core().vref(t)?;

        let i_ref = match (&perturbed, extra) {
            (ReferenceDesign::Ptat(p), None) => p.solve_at_vref(v_ref, t)?.1,
            (ReferenceDesign::Ptat(p), Some((s6, s7, s4, s5, n4))) => {
                let d6 = s6 * unit.sample(&mut rng);
                let d7 = s7 * unit.sample(&mut rng);
                let d4 = s4 * unit.sample(&mut rng);
                let d5 = s5 * unit.sample(&mut rng);
                // SCM mismatch enters gate-referred; mirror mismatch scales
                // the output exponentially in weak inversion.
                let (_, i) = p.solve_at_vref(v_ref + (d7 - d6), t)?;
                i * ((d4 - d5) / (n4 * ut)).exp()
            }
            (ReferenceDesign::Cwt(c), None) => v_ref / resistance(&c.resistor, c.squares, t)?,
            (ReferenceDesign::Cwt(c), Some((_, _, s4, s5, n4))) => {
                let d4 = s4 * unit.sample(&mut rng);
                let d5 = s5 * unit.sample(&mut rng);
                v_ref / resistance(&c.resistor, c.squares, t)? * ((d4 - d5) / (n4 * ut)).exp()
            }
        };
        samples.push(i_ref);
    }

    let mean = samples.iter().sum::<f64>() / n_samples as f64;
    let var =
        samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n_samples as f64 - 1.0);
    let sigma = var.sqrt();
    let sigma_vref = vref.sigma_vref()?;
    let analytic = design.sensitivity(t)? * sigma_vref;

    Ok(MonteCarloReport {
        design_id: design_id.to_string(),
        samples: n_samples,
        seed,
        scope,
        conditions: conditions.clone(),
        nominal_i_ref: nominal.i_ref,
        mean,
        sigma,
        sigma_over_mu: sigma / mean,
        analytic_sigma_over_mu: analytic,
        sigma_vref,
        i_ref_samples: samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuits::{
        CalibrationConfig, CwtReference, DeviceInst, PtatReference, StackVariant, TwoTVref,
    };
    use crate::device::{Geometry, Polarity, ResistorParams};
    use crate::numeric::ls_slope;
    use approx::assert_relative_eq;

    const T_REF: f64 = 298.15;

    fn lvt_pmos() -> TransistorParams {
        TransistorParams {
            polarity: Polarity::Pmos,
            n: 1.14,
            i_sq_ref: 23.98e-9,
            v_t0_ref: 0.383,
            alpha_vt0: 0.82e-3,
            m_mob: 1.5,
            a_vt: Some(3.54e-3),
            v_ea_per_um: 3.96,
            t_ref: T_REF,
        }
    }

    fn lvt_nmos() -> TransistorParams {
        TransistorParams {
            polarity: Polarity::Nmos,
            n: 1.21,
            i_sq_ref: 99.63e-9,
            v_t0_ref: 0.433,
            alpha_vt0: 0.75e-3,
            m_mob: 1.5,
            a_vt: Some(3.54e-3),
            v_ea_per_um: 3.96,
            t_ref: T_REF,
        }
    }

    fn nominal_ptat() -> ReferenceDesign {
        let p = lvt_pmos();
        ReferenceDesign::Ptat(PtatReference {
            vref: TwoTVref::new(
                DeviceInst::new(p.clone(), Geometry::new(1.0, 20.0, 4, 1).unwrap()).unwrap(),
                DeviceInst::new(p.clone(), Geometry::new(1.0, 20.0, 32, 1).unwrap()).unwrap(),
                StackVariant::Single,
            )
            .unwrap(),
            scm6: DeviceInst::new(p.clone(), Geometry::new(0.824, 25.0, 1, 20).unwrap()).unwrap(),
            scm7: DeviceInst::new(p.clone(), Geometry::new(1.0985, 25.0, 1, 20).unwrap()).unwrap(),
            alpha: 3.0,
            n_mirror: 2,
            buffer: DeviceInst::new(p, Geometry::new(0.35, 10.0, 1, 1).unwrap()).unwrap(),
            mirror: DeviceInst::new(lvt_nmos(), Geometry::new(1.0, 25.0, 1, 2).unwrap()).unwrap(),
        })
    }

    fn synthetic_series(axis: SweepAxis, values: &[(f64, f64)]) -> SweepSeries {
        SweepSeries::new(
            "test".to_string(),
            axis,
            Conditions::default(),
            values
                .iter()
                .map(|&(x, i)| SweepPoint {
                    x,
                    i_ref: i,
                    v_ref: 0.1,
                    power: 1e-9,
                    valid: true,
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn grid_counts() {
        // -40..85 degC by 5 degC is 26 points.
        let xs = grid(233.15, 358.15, 5.0).unwrap();
        assert_eq!(xs.len(), 26);
        assert_eq!(xs[0], 233.15);
        assert!((xs[25] - 358.15).abs() < 1e-9);
        assert!(grid(1.0, 0.0, 0.5).is_err());
        assert!(grid(0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn temperature_sweep_has_expected_points_and_tracks_isq() {
        let d = nominal_ptat();
        let s = sweep(
            &d,
            "ptat",
            SweepAxis::TemperatureK,
            233.15,
            358.15,
            5.0,
            &Conditions::default(),
        )
        .unwrap();
        assert_eq!(s.points.len(), 26);
        assert!(s.points.iter().all(|p| p.valid));
        // log I vs log T is affine with slope 2 - m.
        let lx: Vec<f64> = s.points.iter().map(|p| p.x.ln()).collect();
        let ly: Vec<f64> = s.points.iter().map(|p| p.i_ref.ln()).collect();
        assert!((ls_slope(&lx, &ly) - 0.5).abs() < 1e-3);
    }

    #[test]
    fn supply_sweep_flags_points_below_vdd_min() {
        let d = nominal_ptat();
        let s = sweep(
            &d,
            "ptat",
            SweepAxis::SupplyV,
            0.3,
            1.8,
            0.05,
            &Conditions::default(),
        )
        .unwrap();
        let vm = d.vdd_min(T_REF).unwrap();
        for p in &s.points {
            assert_eq!(p.valid, p.x >= vm, "x = {}", p.x);
        }
        assert!(s.points.iter().any(|p| !p.valid));
        assert!(s.points.iter().any(|p| p.valid));
    }

    #[test]
    fn box_metrics_trivial_cases() {
        // Constant series -> 0 for both metrics.
        let flat_v = synthetic_series(SweepAxis::SupplyV, &[(0.8, 1e-6), (1.2, 1e-6), (1.8, 1e-6)]);
        assert_eq!(box_ls(&flat_v).unwrap(), 0.0);
        let flat_t = synthetic_series(
            SweepAxis::TemperatureK,
            &[(233.15, 1e-6), (298.15, 1e-6), (358.15, 1e-6)],
        );
        assert_eq!(box_tc(&flat_t).unwrap(), 0.0);
        // Two-point direct evaluation: 0.995 %/V.
        let two = synthetic_series(SweepAxis::SupplyV, &[(0.8, 1.00e-6), (1.8, 1.01e-6)]);
        assert_relative_eq!(
            box_ls(&two).unwrap(),
            0.995024875621890,
            max_relative = 1e-12
        );
    }

    #[test]
    fn box_ls_of_symmetric_ramp_is_point_count_invariant() {
        // A linear ramp symmetric about its mean keeps the same box value
        // regardless of sampling density.
        let coarse = synthetic_series(SweepAxis::SupplyV, &[(1.0, 9e-7), (2.0, 11e-7)]);
        let fine = synthetic_series(
            SweepAxis::SupplyV,
            &[
                (1.0, 9.0e-7),
                (1.25, 9.5e-7),
                (1.5, 10.0e-7),
                (1.75, 10.5e-7),
                (2.0, 11.0e-7),
            ],
        );
        assert_relative_eq!(
            box_ls(&coarse).unwrap(),
            box_ls(&fine).unwrap(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn box_metric_scaling_invariance() {
        let a = synthetic_series(
            SweepAxis::TemperatureK,
            &[(233.15, 1e-9), (298.15, 1.4e-9), (358.15, 2e-9)],
        );
        let b = synthetic_series(
            SweepAxis::TemperatureK,
            &[(233.15, 4e-9), (298.15, 5.6e-9), (358.15, 8e-9)],
        );
        // power-of-two scaling is exact in binary floating point
        assert_eq!(box_tc(&a).unwrap(), box_tc(&b).unwrap());
    }

    #[test]
    fn box_requires_two_valid_points() {
        let mut s = synthetic_series(SweepAxis::SupplyV, &[(0.8, 1e-6), (1.8, 1.1e-6)]);
        s.points[0].valid = false;
        assert!(box_ls(&s).is_err());
    }

    #[test]
    fn series_normalization_rejects_duplicates_and_sorts() {
        let pts = vec![
            SweepPoint {
                x: 2.0,
                i_ref: 1.0,
                v_ref: 0.1,
                power: 0.0,
                valid: true,
            },
            SweepPoint {
                x: 1.0,
                i_ref: 2.0,
                v_ref: 0.1,
                power: 0.0,
                valid: true,
            },
        ];
        let s = SweepSeries::new(
            "t".to_string(),
            SweepAxis::SupplyV,
            Conditions::default(),
            pts.clone(),
        )
        .unwrap();
        assert_eq!(s.points[0].x, 1.0);
        let dup = vec![pts[0], pts[0]];
        assert!(SweepSeries::new(
            "t".to_string(),
            SweepAxis::SupplyV,
            Conditions::default(),
            dup
        )
        .is_err());
    }

    #[test]
    fn corner_identity_and_isq_scaling() {
        let d = nominal_ptat();
        let corners = vec![
            CornerSpec::identity("tt"),
            CornerSpec {
                name: "ff".to_string(),
                nmos: CornerShift {
                    i_sq_factor: 1.1,
                    v_t0_delta: 0.0,
                },
                pmos: CornerShift {
                    i_sq_factor: 1.1,
                    v_t0_delta: 0.0,
                },
            },
            CornerSpec {
                name: "ss".to_string(),
                nmos: CornerShift {
                    i_sq_factor: 0.9,
                    v_t0_delta: 0.0,
                },
                pmos: CornerShift {
                    i_sq_factor: 0.9,
                    v_t0_delta: 0.0,
                },
            },
        ];
        let res = corner_analysis(
            &d,
            "ptat",
            &corners,
            &Conditions::default(),
            233.15,
            358.15,
            5.0,
        )
        .unwrap();
        // tt is bitwise the nominal run.
        let nominal = d.evaluate(T_REF, 1.2).unwrap();
        assert_eq!(res[0].i_ref, nominal.i_ref);
        assert_eq!(res[0].i_ref_dev_pct, 0.0);
        // A pure +-10% I_SQ shift moves the PTAT output by +-10%.
        assert_relative_eq!(res[1].i_ref_dev_pct, 10.0, max_relative = 1e-9);
        assert_relative_eq!(res[2].i_ref_dev_pct, -10.0, max_relative = 1e-9);
    }

    #[test]
    fn tt_corner_must_be_identity() {
        let c = CornerSpec {
            name: "tt".to_string(),
            nmos: CornerShift {
                i_sq_factor: 1.1,
                v_t0_delta: 0.0,
            },
            pmos: CornerShift::IDENTITY,
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn skewed_corner_moves_cwt_vref_per_closed_form() {
        // Shifting only M1's device type changes V_REF by the closed-form
        // threshold weight (here +delta since dV/dV_T01 = 1).
        let rvt = TransistorParams {
            polarity: Polarity::Pmos,
            n: 1.41,
            i_sq_ref: 29.26e-9,
            v_t0_ref: 0.749,
            alpha_vt0: 0.90e-3,
            m_mob: 1.5,
            a_vt: Some(4.0e-3),
            v_ea_per_um: 5.0,
            t_ref: T_REF,
        };
        let res = ResistorParams {
            name: "p_poly".to_string(),
            sheet_resistance: 295.0,
            tcr1: 102e-6,
            tcr2: 0.0,
            t_ref: T_REF,
        };
        let d = CwtReference {
            vref: TwoTVref::new(
                DeviceInst::new(rvt, Geometry::new(2.25, 5.0, 4, 1).unwrap()).unwrap(),
                DeviceInst::new(lvt_pmos(), Geometry::new(1.26, 5.0, 4, 1).unwrap()).unwrap(),
                StackVariant::Single,
            )
            .unwrap(),
            resistor: res,
            squares: 840.0,
            calibration: Some(CalibrationConfig::new(4, 0.37, 0.83).unwrap()),
            buffer: DeviceInst::new(lvt_pmos(), Geometry::new(10.0, 1.0, 10, 1).unwrap()).unwrap(),
            mirror: DeviceInst::new(lvt_nmos(), Geometry::new(10.0, 1.0, 10, 1).unwrap()).unwrap(),
        };
        // The corner must shift only RVT pMOS; polarity-level shifts hit
        // both pMOS flavors, so emulate a flavor skew via direct edit.
        let design = ReferenceDesign::Cwt(d.clone());
        let mut skewed = d.clone();
        skewed.vref.dev1.params.v_t0_ref += 0.02;
        let v0 = design.evaluate(T_REF, 1.2).unwrap().v_ref;
        let v1 = ReferenceDesign::Cwt(skewed)
            .evaluate(T_REF, 1.2)
            .unwrap()
            .v_ref;
        assert_relative_eq!(v1 - v0, 0.02, max_relative = 1e-9);
    }

    #[test]
    fn monte_carlo_reproducible_and_consistent() {
        let d = nominal_ptat();
        let cond = Conditions::default();
        let r1 = monte_carlo(&d, "ptat", 2000, 42, MismatchScope::VrefPair, &cond).unwrap();
        let r2 = monte_carlo(&d, "ptat", 2000, 42, MismatchScope::VrefPair, &cond).unwrap();
        assert_eq!(r1.i_ref_samples, r2.i_ref_samples);
        // Empirical vs analytic sigma/mu within 3 standard errors.
        let se = r1.analytic_sigma_over_mu / (2.0 * r1.samples as f64).sqrt();
        assert!(
            (r1.sigma_over_mu - r1.analytic_sigma_over_mu).abs() < 3.0 * se,
            "empirical {} vs analytic {} (se {})",
            r1.sigma_over_mu,
            r1.analytic_sigma_over_mu,
            se
        );
        // Mean stays near nominal.
        assert!((r1.mean - r1.nominal_i_ref).abs() < 3.0 * r1.sigma / (r1.samples as f64).sqrt());
    }

    #[test]
    fn monte_carlo_zero_avt_gives_zero_spread() {
        let mut d = nominal_ptat();
        if let ReferenceDesign::Ptat(p) = &mut d {
            p.vref.dev1.params.a_vt = Some(0.0);
            p.vref.dev2.params.a_vt = Some(0.0);
        }
        let r = monte_carlo(
            &d,
            "ptat",
            16,
            7,
            MismatchScope::VrefPair,
            &Conditions::default(),
        )
        .unwrap();
        // identical samples up to summation rounding in the mean
        assert!(r.sigma_over_mu.abs() < 1e-14, "{}", r.sigma_over_mu);
        assert_eq!(r.analytic_sigma_over_mu, 0.0);
    }

    #[test]
    fn monte_carlo_missing_avt_is_config_error() {
        let mut d = nominal_ptat();
        if let ReferenceDesign::Ptat(p) = &mut d {
            p.vref.dev1.params.a_vt = None;
        }
        let err = monte_carlo(
            &d,
            "ptat",
            16,
            7,
            MismatchScope::VrefPair,
            &Conditions::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn monte_carlo_all_devices_widens_spread() {
        let d = nominal_ptat();
        let cond = Conditions::default();
        let narrow = monte_carlo(&d, "ptat", 3000, 11, MismatchScope::VrefPair, &cond).unwrap();
        let wide = monte_carlo(&d, "ptat", 3000, 11, MismatchScope::AllDevices, &cond).unwrap();
        assert!(wide.sigma_over_mu > narrow.sigma_over_mu);
    }
}
