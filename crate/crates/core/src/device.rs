//! Compact MOSFET and resistor models with explicit temperature laws.
//!
//! All device physics used by the rest of the crate lives here: the
//! weak-inversion exponential law, the charge-based drain-current model in
//! terms of forward/reverse inversion levels, the pinch-off relation and its
//! inverse, small-signal conductances, and the resistor temperature law.
//!
//! Conventions:
//! - temperatures in kelvin everywhere (Celsius exists only at the CLI),
//! - voltages and currents are magnitudes; `polarity` records the device
//!   flavor and is applied by callers that need signed quantities,
//! - geometry in micrometres, `a_vt` in V*um so Pelgrom areas come out in
//!   um^2 directly.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::solve_increasing;

/// Boltzmann constant (J/K), exact SI value.
pub const BOLTZMANN: f64 = 1.380_649e-23;
/// Elementary charge (C), exact SI value.
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
/// k/q (V/K), used by the closed-form temperature derivatives.
pub const K_OVER_Q: f64 = BOLTZMANN / ELEMENTARY_CHARGE;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    #[serde(alias = "n-channel", alias = "n")]
    Nmos,
    #[serde(alias = "p-channel", alias = "p")]
    Pmos,
}

/// Per-device-type compact-model parameters.
///
/// `i_sq_ref` is the measured specific sheet current at `t_ref`; the same
/// calibration backs both the weak-inversion exponential law and the
/// charge-based current expression.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransistorParams {
    pub polarity: Polarity,
    /// Subthreshold slope factor (dimensionless, > 1).
    pub n: f64,
    /// Specific sheet current at `t_ref` (A).
    pub i_sq_ref: f64,
    /// Threshold-voltage magnitude at `t_ref` (V).
    pub v_t0_ref: f64,
    /// Threshold tempco magnitude (V/K); the magnitude decreases with T.
    pub alpha_vt0: f64,
    /// Mobility temperature exponent; I_SQ scales as (T/T_ref)^(2 - m_mob).
    pub m_mob: f64,
    /// Pelgrom area coefficient (V*um); absent decks cannot run mismatch
    /// analysis.
    pub a_vt: Option<f64>,
    /// Early voltage per unit length (V/um).
    pub v_ea_per_um: f64,
    /// Reference temperature (K).
    pub t_ref: f64,
}

impl TransistorParams {
    /// Check the type invariants, naming the offending parameter.
    pub fn validate(&self, name: &str) -> Result<()> {
        if !(self.n > 1.0) {
            return Err(Error::config(format!(
                "transistor '{name}': invariant n > 1 violated (n = {})",
                self.n
            )));
        }
        if !(self.i_sq_ref > 0.0) {
            return Err(Error::config(format!(
                "transistor '{name}': invariant i_sq_ref > 0 violated"
            )));
        }
        if !(self.v_t0_ref >= 0.0) {
            return Err(Error::config(format!(
                "transistor '{name}': invariant v_t0_ref >= 0 violated (magnitude convention)"
            )));
        }
        if !(1.0..=2.5).contains(&self.m_mob) {
            return Err(Error::config(format!(
                "transistor '{name}': invariant 1.0 <= m_mob <= 2.5 violated (m_mob = {})",
                self.m_mob
            )));
        }
        if let Some(a) = self.a_vt {
            if !(a >= 0.0) {
                return Err(Error::config(format!(
                    "transistor '{name}': invariant a_vt >= 0 violated"
                )));
            }
        }
        if !(self.v_ea_per_um > 0.0) {
            return Err(Error::config(format!(
                "transistor '{name}': invariant v_ea_per_um > 0 violated"
            )));
        }
        if !(self.t_ref > 0.0) {
            return Err(Error::config(format!(
                "transistor '{name}': invariant t_ref > 0 violated"
            )));
        }
        Ok(())
    }
}

/// Resistor flavor parameters. `tcr1`/`tcr2` are the first- and
/// second-order temperature coefficients about `t_ref`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResistorParams {
    pub name: String,
    /// Ohms per square at `t_ref`.
    pub sheet_resistance: f64,
    /// 1/K.
    pub tcr1: f64,
    /// 1/K^2, zero when uncharacterized.
    pub tcr2: f64,
    pub t_ref: f64,
}

impl ResistorParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.sheet_resistance > 0.0) {
            return Err(Error::config(format!(
                "resistor '{}': invariant sheet_resistance > 0 violated",
                self.name
            )));
        }
        Ok(())
    }
}

/// Drawn geometry of one (possibly composite) device.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    /// Width of one segment (um).
    pub w: f64,
    /// Length of one segment (um).
    pub l: f64,
    /// Parallel multiplier.
    pub mult: u32,
    /// Series segment count (composite device).
    pub series: u32,
}

impl Geometry {
    pub fn new(w: f64, l: f64, mult: u32, series: u32) -> Result<Self> {
        let g = Geometry { w, l, mult, series };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.w > 0.0 && self.l > 0.0) {
            return Err(Error::config(format!(
                "geometry: invariant w, l > 0 violated (w = {}, l = {})",
                self.w, self.l
            )));
        }
        if self.mult < 1 || self.series < 1 {
            return Err(Error::config(
                "geometry: invariant mult >= 1 and series >= 1 violated".to_string(),
            ));
        }
        Ok(())
    }

    /// Aspect ratio S = (mult * w) / (series * l).
    pub fn aspect_ratio(&self) -> f64 {
        (self.mult as f64 * self.w) / (self.series as f64 * self.l)
    }

    /// Total gate area in um^2, the Pelgrom denominator.
    pub fn area_um2(&self) -> f64 {
        self.w * self.l * self.mult as f64 * self.series as f64
    }

    /// Effective electrical length (um), used by the output-conductance
    /// model.
    pub fn effective_length(&self) -> f64 {
        self.l * self.series as f64
    }
}

/// Thermal voltage kT/q (V).
pub fn thermal_voltage(t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::domain(format!(
            "thermal_voltage: temperature must be positive (got {t} K)"
        )));
    }
    Ok(K_OVER_Q * t)
}

/// Specific sheet current at temperature `t`: i_sq_ref * (t/t_ref)^(2 - m).
pub fn specific_sheet_current(p: &TransistorParams, t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::domain(format!(
            "specific_sheet_current: temperature must be positive (got {t} K)"
        )));
    }
    Ok(p.i_sq_ref * (t / p.t_ref).powf(2.0 - p.m_mob))
}

/// Threshold-voltage magnitude at temperature `t` (linear law).
pub fn threshold_voltage(p: &TransistorParams, t: f64) -> f64 {
    p.v_t0_ref - p.alpha_vt0 * (t - p.t_ref)
}

/// Weak-inversion drain current (magnitude).
///
/// The exponential law carries two extensions beyond the saturated ideal:
/// a channel-length-modulation factor (1 + V_DS / V_EA) and the triode
/// factor (1 - exp(-V_DS / U_T)), so callers probing V_DS < 4 U_T get a
/// finite, continuous answer. Both reduce to 1 in deep saturation with
/// infinite Early voltage. `v_bs` is accepted for interface completeness;
/// the model carries no body-effect term, so it must be zero.
pub fn ids_weak_inversion(
    p: &TransistorParams,
    g: &Geometry,
    v_gs: f64,
    v_ds: f64,
    v_bs: f64,
    t: f64,
) -> Result<f64> {
    debug_assert!(v_bs == 0.0, "weak-inversion law is defined at v_bs = 0");
    let _ = v_bs;
    let ut = thermal_voltage(t)?;
    let isq = specific_sheet_current(p, t)?;
    let vt0 = threshold_voltage(p, t);
    let s = g.aspect_ratio();
    let vds = v_ds.abs();
    let vgs = v_gs.abs();
    let exponent = (vgs - vt0) / (p.n * ut);
    let early = 1.0 + vds / (p.v_ea_per_um * g.effective_length());
    let triode = 1.0 - (-vds / ut).exp();
    Ok(isq * s * exponent.exp() * early * triode)
}

/// Charge-based drain current I_D = I_SQ(t) * S * (i_f - i_r).
pub fn acm_drain_current(
    p: &TransistorParams,
    g: &Geometry,
    i_f: f64,
    i_r: f64,
    t: f64,
) -> Result<f64> {
    if i_f < 0.0 || i_r < 0.0 {
        return Err(Error::domain(format!(
            "acm_drain_current: inversion levels must be non-negative (i_f = {i_f}, i_r = {i_r})"
        )));
    }
    if i_r > i_f {
        return Err(Error::domain(format!(
            "acm_drain_current: requires i_f >= i_r (i_f = {i_f}, i_r = {i_r})"
        )));
    }
    let isq = specific_sheet_current(p, t)?;
    Ok(isq * g.aspect_ratio() * (i_f - i_r))
}

/// Dimensionless pinch-off function F(i) = sqrt(1+i) - 2 + ln(sqrt(1+i) - 1).
///
/// `sqrt(1+i) - 1` is evaluated as `i / (sqrt(1+i) + 1)` so the function
/// stays accurate arbitrarily deep in weak inversion.
pub fn pinchoff_fn(i: f64) -> f64 {
    let s = (1.0 + i).sqrt();
    let sm1 = i / (s + 1.0);
    sm1 - 1.0 + sm1.ln()
}

/// Derivative F'(i) = 1 / (2 (sqrt(1+i) - 1)).
fn pinchoff_fn_deriv(i: f64) -> f64 {
    let s = (1.0 + i).sqrt();
    let sm1 = i / (s + 1.0);
    1.0 / (2.0 * sm1)
}

/// Forward pinch-off relation: V_P - V_S = U_T * F(i_f) (V).
pub fn overdrive_from_inversion_level(i_f: f64, t: f64) -> Result<f64> {
    if !(i_f > 0.0) {
        return Err(Error::domain(format!(
            "overdrive_from_inversion_level: i_f must be positive (got {i_f})"
        )));
    }
    Ok(thermal_voltage(t)? * pinchoff_fn(i_f))
}

/// Invert the pinch-off relation: the unique i_f > 0 with
/// U_T * F(i_f) = v_p_minus_v_s. Defined for every finite input; i_f tends
/// to zero as the argument goes to minus infinity.
pub fn inversion_level_from_overdrive(v_p_minus_v_s: f64, t: f64) -> Result<f64> {
    let ut = thermal_voltage(t)?;
    if !v_p_minus_v_s.is_finite() {
        return Err(Error::domain(
            "inversion_level_from_overdrive: non-finite overdrive".to_string(),
        ));
    }
    let y = v_p_minus_v_s / ut;
    // Asymptotics seed the Newton iteration: F(i) ~ -1 + ln(i/2) for small
    // i and F(i) ~ sqrt(i) for large i.
    let init = if y < 0.0 {
        2.0 * (y + 1.0).exp()
    } else {
        (y + 2.0) * (y + 2.0)
    };
    solve_increasing(
        pinchoff_fn,
        pinchoff_fn_deriv,
        y,
        1e-12,
        1e6,
        init,
        "inversion_level_from_overdrive",
    )
}

/// One solved DC operating point of a transistor (source-referenced
/// magnitudes, v_bs = 0).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    pub v_g: f64,
    pub v_s: f64,
    pub v_d: f64,
    /// Forward inversion level.
    pub i_f: f64,
    /// Reverse inversion level; essentially zero in saturation.
    pub i_r: f64,
    /// Drain current magnitude (A).
    pub i_d: f64,
    /// Gate transconductance (S).
    pub g_m: f64,
    /// Output conductance (S).
    pub g_d: f64,
    /// Body transconductance (S).
    pub g_mb: f64,
    /// V_DS > 4 U_T.
    pub saturated: bool,
}

impl OperatingPoint {
    /// Solve the charge-based model at the given terminal voltages
    /// (magnitudes, source-referenced, v_bs = 0).
    pub fn solve(p: &TransistorParams, g: &Geometry, v_gs: f64, v_ds: f64, t: f64) -> Result<Self> {
        let ut = thermal_voltage(t)?;
        let vt0 = threshold_voltage(p, t);
        let v_p = (v_gs - vt0) / p.n;
        let i_f = inversion_level_from_overdrive(v_p, t)?;
        let i_r = inversion_level_from_overdrive(v_p - v_ds, t)?;
        let (i_f, i_r) = if i_r > i_f { (i_f, i_f) } else { (i_f, i_r) };
        let i_d = acm_drain_current(p, g, i_f, i_r, t)?;
        let mut op = OperatingPoint {
            v_g: v_gs,
            v_s: 0.0,
            v_d: v_ds,
            i_f,
            i_r,
            i_d,
            g_m: 0.0,
            g_d: 0.0,
            g_mb: 0.0,
            saturated: v_ds > 4.0 * ut,
        };
        let (g_m, g_d, g_mb) = small_signal(p, g, &op, t)?;
        op.g_m = g_m;
        op.g_d = g_d;
        op.g_mb = g_mb;
        Ok(op)
    }
}

/// Small-signal conductances at a solved operating point.
///
/// g_m uses the charge-model form 2 I_D / (n U_T (sqrt(1+i_f) + 1)), which
/// reduces to I_D / (n U_T) in weak inversion; g_d follows the
/// Early-voltage-per-length model; g_mb = (n - 1) g_m.
pub fn small_signal(
    p: &TransistorParams,
    g: &Geometry,
    op: &OperatingPoint,
    t: f64,
) -> Result<(f64, f64, f64)> {
    let ut = thermal_voltage(t)?;
    let g_m = 2.0 * op.i_d / (p.n * ut * ((1.0 + op.i_f).sqrt() + 1.0));
    let g_d = op.i_d / (p.v_ea_per_um * g.effective_length());
    let g_mb = (p.n - 1.0) * g_m;
    Ok((g_m, g_d, g_mb))
}

/// Resistor value at temperature `t`:
/// sheet * squares * (1 + tcr1 dT + tcr2 dT^2).
pub fn resistance(r: &ResistorParams, squares: f64, t: f64) -> Result<f64> {
    if !(squares > 0.0) {
        return Err(Error::domain(format!(
            "resistance: squares must be positive (got {squares})"
        )));
    }
    let dt = t - r.t_ref;
    Ok(r.sheet_resistance * squares * (1.0 + r.tcr1 * dt + r.tcr2 * dt * dt))
}

/// dR/dT at temperature `t` (Ohm/K), analytic.
pub fn resistance_dt(r: &ResistorParams, squares: f64, t: f64) -> Result<f64> {
    if !(squares > 0.0) {
        return Err(Error::domain(format!(
            "resistance_dt: squares must be positive (got {squares})"
        )));
    }
    let dt = t - r.t_ref;
    Ok(r.sheet_resistance * squares * (r.tcr1 + 2.0 * r.tcr2 * dt))
}
