//! Sizing algorithms: design-space exploration and automatic geometry
//! generation for the nA-range PTAT reference (four steps) and the
//! uA-range CWT reference (three steps), plus calibration-code selection.
//!
//! Sizing runs at the deck reference temperature. Realized widths snap to
//! the technology width grid with ties toward the larger width; aspect
//! ratios too small for a single device become series composites of
//! maximum-length segments.

use serde::{Deserialize, Serialize};

use crate::analysis::{box_tc, sweep, Conditions, SweepAxis};
use crate::circuits::{
    scm_aspect_ratio_constraint, sensitivity_ptat, solve_scm, CalibrationConfig, CwtReference,
    DeviceInst, PtatReference, ReferenceDesign, StackVariant, TwoTVref,
};
use crate::device::{specific_sheet_current, thermal_voltage, threshold_voltage, Geometry};
use crate::error::{Error, Result};
use crate::techdata::TechDeck;

/// Composite SCM segments aim for at least this drawn width; matching
/// suffers below it.
const COMPOSITE_TARGET_W: f64 = 0.8;
/// Series-segment cap for composite devices.
const MAX_SERIES_SEGMENTS: u32 = 64;

/// Inputs of the PTAT sizing run. Device fields name entries of the tech
/// deck.
#[derive(Debug, Clone)]
pub struct PtatSizingSpec {
    /// Reference current target (A).
    pub target_iref: f64,
    /// Optional S_IREF target (1/V), reported against the achieved value.
    pub target_sensitivity: Option<f64>,
    pub s2_over_s1: f64,
    pub alpha: f64,
    pub n_mirror: u32,
    /// Parallel multiplier of the M1/M2 unit device.
    pub m_mult: u32,
    pub vref_device: String,
    pub scm_device: String,
    pub buffer_device: String,
    pub mirror_device: String,
    /// Unit geometry of the voltage-reference pair (um).
    pub unit_w: f64,
    pub unit_l: f64,
    /// Buffer length (um) and its inversion-level target.
    pub buffer_l: f64,
    pub buffer_if: f64,
    /// Mirror segment length (um), series count, inversion-level target.
    pub mirror_l: f64,
    pub mirror_series: u32,
    pub mirror_if: f64,
}

impl PtatSizingSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.target_iref > 0.0) {
            return Err(Error::config(
                "ptat sizing: target_iref must be positive".to_string(),
            ));
        }
        if !(self.alpha > 1.0) {
            return Err(Error::config(format!(
                "ptat sizing: invariant alpha > 1 violated (alpha = {})",
                self.alpha
            )));
        }
        if !(self.s2_over_s1 > 0.0) || self.n_mirror < 1 || self.m_mult < 1 {
            return Err(Error::config(
                "ptat sizing: s2_over_s1 > 0, n_mirror >= 1 and m_mult >= 1 required".to_string(),
            ));
        }
        Ok(())
    }
}

/// Inputs of the CWT sizing run.
#[derive(Debug, Clone)]
pub struct CwtSizingSpec {
    /// Reference current target (A).
    pub target_iref: f64,
    /// Higher-threshold device (M1).
    pub m1_device: String,
    /// Lower-threshold device (M2).
    pub m2_device: String,
    /// Shared channel length of the pair (um).
    pub length: f64,
    /// Unit width of M1 (um).
    pub w1: f64,
    pub m_mult: u32,
    pub buffer_device: String,
    pub buffer_w: f64,
    pub buffer_l: f64,
    pub buffer_mult: u32,
    pub mirror_device: String,
    pub mirror_w: f64,
    pub mirror_l: f64,
    pub mirror_mult: u32,
    pub calibration: Option<CalibrationConfig>,
}

impl CwtSizingSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.target_iref > 0.0) {
            return Err(Error::config(
                "cwt sizing: target_iref must be positive".to_string(),
            ));
        }
        if !(self.length > 0.0 && self.w1 > 0.0) || self.m_mult < 1 {
            return Err(Error::config(
                "cwt sizing: positive geometry and m_mult >= 1 required".to_string(),
            ));
        }
        if let Some(c) = &self.calibration {
            c.validate()?;
        }
        Ok(())
    }
}

/// Predicted figures of a sized design at the deck reference temperature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Predictions {
    /// Supply used for the power/LS predictions (V).
    pub v_dd: f64,
    pub v_ref: f64,
    pub i_ref: f64,
    pub i_f7: Option<f64>,
    pub i_f6: Option<f64>,
    /// S_IREF (1/V).
    pub s_iref: f64,
    /// Voltage-reference supply sensitivity (V/V).
    pub vref_ls: f64,
    /// Predicted supply sensitivity of I_REF (1/V).
    pub ls: f64,
    /// Threshold-mismatch spread of V_REF (V); None without Pelgrom data.
    pub sigma_vref: Option<f64>,
    pub sigma_over_mu: Option<f64>,
    pub vdd_min: f64,
    pub power: f64,
    /// CWT only: analytic dI/dT at the reference temperature (A/K).
    pub diref_dt: Option<f64>,
    /// CWT only: box TC of the sized design over -40..125 degC (ppm/degC).
    pub tc_box: Option<f64>,
}

/// S_IREF map over the (S2/S1, alpha) plane, with the i_f7 and
/// V_REF/U_T slices that explain its trends. Infeasible grid cells
/// (reference voltage at or below the SCM floor) are None.
#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityMap {
    pub s2_over_s1: Vec<f64>,
    pub alpha: Vec<f64>,
    /// Indexed [alpha][s2], 1/V.
    pub s_iref: Vec<Vec<Option<f64>>>,
    /// Indexed [alpha][s2].
    pub i_f7: Vec<Vec<Option<f64>>>,
    /// V_REF normalized by U_T per S2/S1 value.
    pub vref_over_ut: Vec<f64>,
}

/// Mismatch/power trade-off over the (m, S2/S1) plane.
#[derive(Debug, Clone, PartialEq)]
pub struct TradeoffMap {
    pub m: Vec<u32>,
    pub s2_over_s1: Vec<f64>,
    /// Indexed [m][s2] (V).
    pub sigma_vref: Vec<Vec<f64>>,
    /// Indexed [m][s2] (W).
    pub power: Vec<Vec<f64>>,
}

/// A sized design with its predictions and the exploration grids used.
#[derive(Debug, Clone)]
pub struct SizingResult {
    pub design: ReferenceDesign,
    pub predictions: Predictions,
    pub notes: Vec<String>,
    pub sensitivity_map: Option<SensitivityMap>,
    pub tradeoff_map: Option<TradeoffMap>,
    /// CWT only: (S2/S1, box TC ppm/degC) around the optimum.
    pub tc_vs_ratio: Option<Vec<(f64, f64)>>,
}

/// Snap a width to the technology grid, ties toward the larger width.
fn snap_width(w: f64, grid: f64) -> f64 {
    (w / grid + 0.5).floor() * grid
}

fn check_min_width(w: f64, w_min: f64, what: &str) -> Result<()> {
    if w + 1e-12 < w_min {
        return Err(Error::sizing(format!(
            "{what}: needed width {w:.3} um is below the technology minimum {w_min} um"
        )));
    }
    Ok(())
}

/// Evaluate S_IREF across a (S2/S1, alpha) grid using the purely PTAT
/// reference voltage V_REF = n U_T ln(S2/S1).
pub fn explore_ptat_space(
    s2_values: &[f64],
    alpha_values: &[f64],
    n: f64,
    t: f64,
) -> Result<SensitivityMap> {
    if s2_values.iter().any(|&s| !(s > 1.0)) || alpha_values.iter().any(|&a| !(a > 1.0)) {
        return Err(Error::domain(
            "explore_ptat_space: grid values must exceed 1".to_string(),
        ));
    }
    let ut = thermal_voltage(t)?;
    let vref_over_ut: Vec<f64> = s2_values.iter().map(|&s2| n * s2.ln()).collect();
    let mut s_iref = Vec::with_capacity(alpha_values.len());
    let mut i_f7 = Vec::with_capacity(alpha_values.len());
    for &alpha in alpha_values {
        let mut row_s = Vec::with_capacity(s2_values.len());
        let mut row_i = Vec::with_capacity(s2_values.len());
        for &s2 in s2_values {
            let v_ref = n * ut * s2.ln();
            match solve_scm(v_ref, alpha, n, t) {
                Ok((i7, _)) => {
                    row_s.push(Some(sensitivity_ptat(i7, alpha, n, t)?));
                    row_i.push(Some(i7));
                }
                Err(Error::Domain(_)) => {
                    row_s.push(None);
                    row_i.push(None);
                }
                Err(e) => return Err(e),
            }
        }
        s_iref.push(row_s);
        i_f7.push(row_i);
    }
    Ok(SensitivityMap {
        s2_over_s1: s2_values.to_vec(),
        alpha: alpha_values.to_vec(),
        s_iref,
        i_f7,
        vref_over_ut,
    })
}

/// Mismatch/power trade-off of the 2T pair: sigma_VREF from the Pelgrom
/// aggregation, power from the zero-V_GS branch current at `v_dd`.
pub fn explore_vref_tradeoff(
    m_values: &[u32],
    s2_values: &[f64],
    unit_w: f64,
    unit_l: f64,
    device: &crate::device::TransistorParams,
    t: f64,
    v_dd: f64,
) -> Result<TradeoffMap> {
    if device.a_vt.is_none() {
        return Err(Error::config(
            "explore_vref_tradeoff: a_vt missing for the selected device type".to_string(),
        ));
    }
    let mut sigma = Vec::with_capacity(m_values.len());
    let mut power = Vec::with_capacity(m_values.len());
    for &m in m_values {
        if m < 1 {
            return Err(Error::domain(
                "explore_vref_tradeoff: multiplier must be >= 1".to_string(),
            ));
        }
        let mut row_s = Vec::with_capacity(s2_values.len());
        let mut row_p = Vec::with_capacity(s2_values.len());
        for &s2 in s2_values {
            let vref = build_ptat_pair(device, unit_w, unit_l, m, s2)?;
            row_s.push(vref.sigma_vref()?);
            row_p.push(v_dd * vref.branch_current(t, v_dd)?);
        }
        sigma.push(row_s);
        power.push(row_p);
    }
    Ok(TradeoffMap {
        m: m_values.to_vec(),
        s2_over_s1: s2_values.to_vec(),
        sigma_vref: sigma,
        power,
    })
}

/// Build the M1/M2 pair from a unit device: M2 uses parallel units when
/// m * s2_over_s1 is integral and a scaled width otherwise.
fn build_ptat_pair(
    device: &crate::device::TransistorParams,
    unit_w: f64,
    unit_l: f64,
    m: u32,
    s2_over_s1: f64,
) -> Result<TwoTVref> {
    let g1 = Geometry::new(unit_w, unit_l, m, 1)?;
    let units = m as f64 * s2_over_s1;
    let g2 = if (units - units.round()).abs() < 1e-9 && units.round() >= 1.0 {
        Geometry::new(unit_w, unit_l, units.round() as u32, 1)?
    } else {
        Geometry::new(unit_w * s2_over_s1, unit_l, m, 1)?
    };
    TwoTVref::new(
        DeviceInst::new(device.clone(), g1)?,
        DeviceInst::new(device.clone(), g2)?,
        StackVariant::Single,
    )
}

fn default_s2_grid() -> Vec<f64> {
    vec![2.0, 4.0, 8.0, 16.0, 32.0]
}

fn default_alpha_grid() -> Vec<f64> {
    vec![1.5, 2.0, 3.0, 4.0, 5.0]
}

/// Size the PTAT reference: reference voltage from the ratio choice, SCM
/// inversion levels from the balance solve, aspect ratios from the current
/// target, buffer and mirror from their inversion-level targets.
pub fn size_ptat(spec: &PtatSizingSpec, deck: &TechDeck, v_dd: f64) -> Result<SizingResult> {
    spec.validate()?;
    let t = deck.t_ref;
    let tech = &deck.technology;
    let p_vref = deck.transistor(&spec.vref_device)?.clone();
    let p_scm = deck.transistor(&spec.scm_device)?.clone();
    let p_buf = deck.transistor(&spec.buffer_device)?.clone();
    let p_mir = deck.transistor(&spec.mirror_device)?.clone();

    // Step 1: the 2T pair and its reference voltage.
    let vref = build_ptat_pair(
        &p_vref,
        spec.unit_w,
        spec.unit_l,
        spec.m_mult,
        spec.s2_over_s1,
    )?;
    let v_ref = vref.vref(t)?;

    // Step 2: SCM inversion levels and sensitivity.
    let (i_f7, i_f6) = solve_scm(v_ref, spec.alpha, p_scm.n, t)?;
    let s_iref = sensitivity_ptat(i_f7, spec.alpha, p_scm.n, t)?;

    // Step 3: SCM aspect ratios and composite realization.
    let isq_scm = specific_sheet_current(&p_scm, t)?;
    let s7 = spec.n_mirror as f64 * spec.target_iref / (isq_scm * i_f7);
    let s6 = s7 * scm_aspect_ratio_constraint(&p_scm, &p_scm, spec.alpha, spec.n_mirror)?;
    let l_seg = tech.l_segment_max;
    let series = ((COMPOSITE_TARGET_W / (s6 * l_seg)).ceil() as u32).clamp(1, MAX_SERIES_SEGMENTS);
    let w6 = snap_width(s6 * series as f64 * l_seg, tech.w_grid);
    let w7 = snap_width(s7 * series as f64 * l_seg, tech.w_grid);
    check_min_width(w6, tech.w_min, "M6")?;
    check_min_width(w7, tech.w_min, "M7")?;

    // Step 4: buffer and mirror from their branch current I_REF.
    let s3 = spec.target_iref / (specific_sheet_current(&p_buf, t)? * spec.buffer_if);
    let w3 = snap_width(s3 * spec.buffer_l, tech.w_grid);
    check_min_width(w3, tech.w_min, "M3")?;
    let s4 = spec.target_iref / (specific_sheet_current(&p_mir, t)? * spec.mirror_if);
    let l4_total = spec.mirror_series as f64 * spec.mirror_l;
    let w4 = snap_width(s4 * l4_total, tech.w_grid);
    check_min_width(w4, tech.w_min, "M4")?;

    let design = PtatReference {
        vref,
        scm6: DeviceInst::new(p_scm.clone(), Geometry::new(w6, l_seg, 1, series)?)?,
        scm7: DeviceInst::new(p_scm.clone(), Geometry::new(w7, l_seg, 1, series)?)?,
        alpha: spec.alpha,
        n_mirror: spec.n_mirror,
        buffer: DeviceInst::new(p_buf, Geometry::new(w3, spec.buffer_l, 1, 1)?)?,
        mirror: DeviceInst::new(
            p_mir,
            Geometry::new(w4, spec.mirror_l, 1, spec.mirror_series)?,
        )?,
    };
    design.validate()?;

    let out = design.evaluate(t, v_dd)?;
    let vref_ls = design.vref.line_sensitivity(t, v_dd)?;
    let sigma_vref = design.vref.sigma_vref().ok();
    let vdd_min = design.vdd_min(t)?;

    let mut notes = Vec::new();
    if let Some(target_s) = spec.target_sensitivity {
        let dev = (s_iref / target_s - 1.0) * 100.0;
        if dev.abs() > 25.0 {
            notes.push(format!(
                "achieved S_IREF {:.3e} 1/V deviates {dev:.0}% from the requested target",
                s_iref
            ));
        }
    }

    let predictions = Predictions {
        v_dd,
        v_ref: out.v_ref,
        i_ref: out.i_ref,
        i_f7: Some(i_f7),
        i_f6: Some(i_f6),
        s_iref,
        vref_ls,
        ls: s_iref * vref_ls,
        sigma_vref,
        sigma_over_mu: sigma_vref.map(|s| s_iref * s),
        vdd_min,
        power: out.power,
        diref_dt: None,
        tc_box: None,
    };

    let sensitivity_map =
        explore_ptat_space(&default_s2_grid(), &default_alpha_grid(), p_vref.n, t)?;
    let tradeoff_map = explore_vref_tradeoff(
        &[1, 2, 4, 8],
        &[4.0, 8.0, 16.0],
        spec.unit_w,
        spec.unit_l,
        &p_vref,
        t,
        v_dd,
    )
    .ok();

    Ok(SizingResult {
        design: ReferenceDesign::Ptat(design),
        predictions,
        notes,
        sensitivity_map: Some(sensitivity_map),
        tradeoff_map,
        tc_vs_ratio: None,
    })
}

/// Size the CWT reference: pick the lowest-|TCR| resistor, set the pair
/// ratio to the zero-TC target, then tune the square count to the current
/// target.
pub fn size_cwt(spec: &CwtSizingSpec, deck: &TechDeck, v_dd: f64) -> Result<SizingResult> {
    spec.validate()?;
    let t = deck.t_ref;
    let tech = &deck.technology;
    let p1 = deck.transistor(&spec.m1_device)?.clone();
    let p2 = deck.transistor(&spec.m2_device)?.clone();
    if !(threshold_voltage(&p1, t) > threshold_voltage(&p2, t)) {
        return Err(Error::sizing(format!(
            "cwt sizing: M1 ('{}') must have a larger threshold magnitude than M2 ('{}')",
            spec.m1_device, spec.m2_device
        )));
    }

    // Step 1: resistor flavor with the lowest |TCR|.
    let (res_name, resistor) = deck
        .resistors
        .iter()
        .min_by(|a, b| {
            a.1.tcr1
                .abs()
                .partial_cmp(&b.1.tcr1.abs())
                .unwrap()
                .then(a.0.cmp(b.0))
        })
        .ok_or_else(|| Error::sizing("cwt sizing: deck has no resistors".to_string()))?;
    let resistor = resistor.clone();

    // Step 2: pair ratio minimizing the TC, snapped to a drawable width.
    let ratio = crate::circuits::cwt_optimal_ratio(&p1, &p2, &resistor, t)?;
    let w2 = snap_width(spec.w1 * ratio, tech.w_grid);
    check_min_width(w2, tech.w_min, "M2")?;
    check_min_width(spec.w1, tech.w_min, "M1")?;
    let g1 = Geometry::new(spec.w1, spec.length, spec.m_mult, 1)?;
    let g2 = Geometry::new(w2, spec.length, spec.m_mult, 1)?;
    let vref = TwoTVref::new(
        DeviceInst::new(p1, g1)?,
        DeviceInst::new(p2, g2)?,
        StackVariant::Single,
    )?;
    let v_ref = vref.vref(t)?;
    if !(v_ref > 0.0) {
        return Err(Error::sizing(format!(
            "cwt sizing: non-positive reference voltage {v_ref:.3} V at the snapped ratio"
        )));
    }

    // Step 3: squares for the current target.
    let squares = v_ref / spec.target_iref / resistor.sheet_resistance;

    let p_buf = deck.transistor(&spec.buffer_device)?.clone();
    let p_mir = deck.transistor(&spec.mirror_device)?.clone();
    let design = CwtReference {
        vref,
        resistor,
        squares,
        calibration: spec.calibration,
        buffer: DeviceInst::new(
            p_buf,
            Geometry::new(spec.buffer_w, spec.buffer_l, spec.buffer_mult, 1)?,
        )?,
        mirror: DeviceInst::new(
            p_mir,
            Geometry::new(spec.mirror_w, spec.mirror_l, spec.mirror_mult, 1)?,
        )?,
    };
    design.validate()?;

    let out = design.evaluate(t, v_dd)?;
    let vref_ls = design.vref.line_sensitivity(t, v_dd)?;
    let sigma_vref = design.vref.sigma_vref().ok();
    let s_iref = 1.0 / out.v_ref;
    let vdd_min = design.vdd_min(t)?;
    let diref = design.diref_dt(t)?;

    let wrapped = ReferenceDesign::Cwt(design.clone());
    let cond = Conditions {
        v_dd,
        temperature_k: t,
        corner: "tt".to_string(),
    };
    let tc_series = sweep(
        &wrapped,
        "sizing",
        SweepAxis::TemperatureK,
        233.15,
        398.15,
        5.0,
        &cond,
    )?;
    let tc = box_tc(&tc_series)?;

    // TC landscape around the realized ratio.
    let realized_ratio = design.ratio();
    let mut tc_vs_ratio = Vec::new();
    for k in -6i32..=6 {
        let r = realized_ratio * (1.0 + 0.05 * k as f64);
        let d = design.with_ratio(r)?;
        let s = sweep(
            &ReferenceDesign::Cwt(d),
            "sizing",
            SweepAxis::TemperatureK,
            233.15,
            398.15,
            5.0,
            &cond,
        )?;
        tc_vs_ratio.push((r, box_tc(&s)?));
    }

    let predictions = Predictions {
        v_dd,
        v_ref: out.v_ref,
        i_ref: out.i_ref,
        i_f7: None,
        i_f6: None,
        s_iref,
        vref_ls,
        ls: s_iref * vref_ls,
        sigma_vref,
        sigma_over_mu: sigma_vref.map(|s| s_iref * s),
        vdd_min,
        power: out.power,
        diref_dt: Some(diref),
        tc_box: Some(tc),
    };

    Ok(SizingResult {
        design: wrapped,
        predictions,
        notes: vec![format!("selected resistor '{res_name}'")],
        sensitivity_map: None,
        tradeoff_map: None,
        tc_vs_ratio: Some(tc_vs_ratio),
    })
}

/// Box TC of every calibration code over a temperature range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodeResult {
    pub code: u32,
    /// Effective S2/S1 at this code.
    pub ratio: f64,
    pub tc_ppm_per_degc: f64,
    /// I_REF at the fixed conditions (A).
    pub i_ref: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationScan {
    pub per_code: Vec<CodeResult>,
    /// argmin |TC|; ties resolve to the lower code.
    pub chosen: u32,
}

/// Sweep every calibration code, box-extract its TC and pick the best.
pub fn select_calibration_code(
    design: &CwtReference,
    t_min: f64,
    t_max: f64,
    t_step: f64,
    conditions: &Conditions,
) -> Result<CalibrationScan> {
    let cal = design.calibration.ok_or_else(|| {
        Error::config("select_calibration_code: design has no calibration configured".to_string())
    })?;
    let mut per_code = Vec::with_capacity(cal.code_count() as usize);
    let mut chosen = 0u32;
    let mut best = f64::INFINITY;
    for code in 0..cal.code_count() {
        let d = design.calibrated(code)?;
        let ratio = d.ratio();
        let i_ref = d.evaluate(conditions.temperature_k, conditions.v_dd)?.i_ref;
        let series = sweep(
            &ReferenceDesign::Cwt(d),
            "calibration",
            SweepAxis::TemperatureK,
            t_min,
            t_max,
            t_step,
            conditions,
        )?;
        let tc = box_tc(&series)?;
        if tc.abs() < best {
            best = tc.abs();
            chosen = code;
        }
        per_code.push(CodeResult {
            code,
            ratio,
            tc_ppm_per_degc: tc,
            i_ref,
        });
    }
    Ok(CalibrationScan { per_code, chosen })
}
