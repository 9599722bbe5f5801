//! DC models of the 2T voltage reference, the SCM-loaded nA-range PTAT
//! current reference and the resistor-loaded uA-range CWT current
//! reference, plus their small-signal supply sensitivity, mismatch
//! propagation, minimum supply voltage and the stacked line-sensitivity
//! enhancement variants.
//!
//! Everything here is a pure function of immutable design descriptions;
//! designs are cheap to clone and safe to evaluate concurrently.

use serde::{Deserialize, Serialize};

use crate::device::{
    acm_drain_current, ids_weak_inversion, pinchoff_fn, resistance, resistance_dt,
    specific_sheet_current, thermal_voltage, threshold_voltage, Geometry, ResistorParams,
    TransistorParams, K_OVER_Q,
};
use crate::error::{Error, Result};
use crate::numeric::solve_increasing;

/// One placed device: its compact-model parameters and drawn geometry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceInst {
    pub params: TransistorParams,
    pub geom: Geometry,
}

impl DeviceInst {
    pub fn new(params: TransistorParams, geom: Geometry) -> Result<Self> {
        geom.validate()?;
        Ok(DeviceInst { params, geom })
    }

    pub fn aspect_ratio(&self) -> f64 {
        self.geom.aspect_ratio()
    }
}

/// Line-sensitivity enhancement variant applied to the current-source
/// device of the 2T reference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StackVariant {
    Single,
    /// Stack of N devices, each body tied to its own source.
    Stacked(u8),
    /// Stack of N devices with a shared body bias.
    Sbb(u8),
    /// Stack of N devices, each body tied to the source above.
    Hybrid(u8),
}

impl StackVariant {
    pub fn depth(&self) -> u8 {
        match self {
            StackVariant::Single => 1,
            StackVariant::Stacked(n) | StackVariant::Sbb(n) | StackVariant::Hybrid(n) => *n,
        }
    }
}

impl std::str::FromStr for StackVariant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if s == "single" {
            return Ok(StackVariant::Single);
        }
        let (kind, n) = s
            .split_once(':')
            .ok_or_else(|| Error::config(format!("invalid stack variant '{s}'")))?;
        let n: u8 = n
            .parse()
            .map_err(|_| Error::config(format!("invalid stack depth in '{s}'")))?;
        match kind {
            "stacked" => Ok(StackVariant::Stacked(n)),
            "sbb" => Ok(StackVariant::Sbb(n)),
            "hybrid" => Ok(StackVariant::Hybrid(n)),
            _ => Err(Error::config(format!("invalid stack variant '{s}'"))),
        }
    }
}

impl std::fmt::Display for StackVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            StackVariant::Single => write!(f, "single"),
            StackVariant::Stacked(n) => write!(f, "stacked:{n}"),
            StackVariant::Sbb(n) => write!(f, "sbb:{n}"),
            StackVariant::Hybrid(n) => write!(f, "hybrid:{n}"),
        }
    }
}

/// The two-transistor voltage reference: M1 (gate at the output) biased by
/// the zero-V_GS current source M2.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoTVref {
    pub dev1: DeviceInst,
    pub dev2: DeviceInst,
    pub stack: StackVariant,
}

/// Small-signal context of the solved 2T bias point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VrefBias {
    /// Branch current through M1/M2 (A).
    pub i_branch: f64,
    pub g_m1: f64,
    pub g_d1: f64,
    pub g_m2: f64,
    pub g_d2: f64,
    pub g_mb2: f64,
}

/// Conductance set for the stacked line-sensitivity formulas; index 0 is
/// the stack device whose drain faces the supply.
#[derive(Debug, Clone, PartialEq)]
pub struct StackConductances {
    pub g_m1: f64,
    pub g_d1: f64,
    pub g_d2: Vec<f64>,
    pub g_mb2: Vec<f64>,
}

impl TwoTVref {
    pub fn new(dev1: DeviceInst, dev2: DeviceInst, stack: StackVariant) -> Result<Self> {
        dev1.geom.validate()?;
        dev2.geom.validate()?;
        if stack.depth() == 0 || stack.depth() > 3 {
            return Err(Error::config(format!(
                "unsupported stack depth {} (supported: 1..=3)",
                stack.depth()
            )));
        }
        Ok(TwoTVref { dev1, dev2, stack })
    }

    /// ln of the balance argument I_SQ2 S2 / (I_SQ1 S1) at temperature t.
    pub fn ln_balance(&self, t: f64) -> Result<f64> {
        let arg = specific_sheet_current(&self.dev2.params, t)? * self.dev2.aspect_ratio()
            / (specific_sheet_current(&self.dev1.params, t)? * self.dev1.aspect_ratio());
        if !(arg > 0.0) {
            return Err(Error::domain(format!(
                "vref_2t: non-positive balance argument {arg}"
            )));
        }
        Ok(arg.ln())
    }

    /// Closed-form reference voltage at temperature t:
    /// n1 U_T ln(I_SQ2 S2 / (I_SQ1 S1)) + (n2 V_T01 - n1 V_T02) / n2.
    /// With identical device types this reduces to the purely PTAT
    /// n U_T ln(S2/S1).
    pub fn vref(&self, t: f64) -> Result<f64> {
        let ut = thermal_voltage(t)?;
        let n1 = self.dev1.params.n;
        let n2 = self.dev2.params.n;
        let vt01 = threshold_voltage(&self.dev1.params, t);
        let vt02 = threshold_voltage(&self.dev2.params, t);
        Ok(n1 * ut * self.ln_balance(t)? + (n2 * vt01 - n1 * vt02) / n2)
    }

    /// Branch current drawn by the 2T core: the zero-V_GS current of M2 at
    /// V_DS = v_dd - v_ref (weak-inversion law with Early and triode
    /// factors, so the branch collapses gracefully at low supplies).
    pub fn branch_current(&self, t: f64, v_dd: f64) -> Result<f64> {
        let v_ref = self.vref(t)?;
        let v_ds = (v_dd - v_ref).max(0.0);
        ids_weak_inversion(&self.dev2.params, &self.dev2.geom, 0.0, v_ds, 0.0, t)
    }

    /// Solve the bias point and return the small-signal conductances.
    pub fn bias(&self, t: f64, v_dd: f64) -> Result<VrefBias> {
        let ut = thermal_voltage(t)?;
        let i = self.branch_current(t, v_dd)?;
        let p1 = &self.dev1.params;
        let p2 = &self.dev2.params;
        let i_f1 = i / (specific_sheet_current(p1, t)? * self.dev1.aspect_ratio());
        let i_f2 = i / (specific_sheet_current(p2, t)? * self.dev2.aspect_ratio());
        let g_m1 = 2.0 * i / (p1.n * ut * ((1.0 + i_f1).sqrt() + 1.0));
        let g_m2 = 2.0 * i / (p2.n * ut * ((1.0 + i_f2).sqrt() + 1.0));
        let g_d1 = i / (p1.v_ea_per_um * self.dev1.geom.effective_length());
        let g_d2 = i / (p2.v_ea_per_um * self.dev2.geom.effective_length());
        let g_mb2 = (p2.n - 1.0) * g_m2;
        Ok(VrefBias {
            i_branch: i,
            g_m1,
            g_d1,
            g_m2,
            g_d2,
            g_mb2,
        })
    }

    /// Supply sensitivity of the reference voltage (V/V): g_d2/g_m1 for a
    /// single M2, the stacked closed forms otherwise.
    pub fn line_sensitivity(&self, t: f64, v_dd: f64) -> Result<f64> {
        let b = self.bias(t, v_dd)?;
        match self.stack {
            StackVariant::Single => {
                if b.g_m1 == 0.0 {
                    return Err(Error::numeric(
                        "vref_line_sensitivity: g_m1 = 0".to_string(),
                    ));
                }
                Ok(b.g_d2 / b.g_m1)
            }
            v => {
                let n = v.depth() as usize;
                let ss = StackConductances {
                    g_m1: b.g_m1,
                    g_d1: b.g_d1,
                    g_d2: vec![b.g_d2; n],
                    g_mb2: vec![b.g_mb2; n],
                };
                ls_enhanced(v, &ss)
            }
        }
    }

    /// Standard deviation of the reference voltage from local threshold
    /// mismatch, aggregated over both devices:
    /// sigma^2 = sum_i (dV_REF/dV_T0i)^2 a_vt_i^2 / area_i with weights
    /// 1 for M1 and n1/n2 for M2.
    pub fn sigma_vref(&self) -> Result<f64> {
        let a1 = self.dev1.params.a_vt.ok_or_else(|| {
            Error::config("sigma_vref: a_vt missing for M1's device type".to_string())
        })?;
        let a2 = self.dev2.params.a_vt.ok_or_else(|| {
            Error::config("sigma_vref: a_vt missing for M2's device type".to_string())
        })?;
        let w2 = self.dev1.params.n / self.dev2.params.n;
        let var =
            a1 * a1 / self.dev1.geom.area_um2() + w2 * w2 * a2 * a2 / self.dev2.geom.area_um2();
        Ok(var.sqrt())
    }
}

/// Closed-form line sensitivity of the stacked variants (V/V).
///
/// Stacked: (g_d2,1/g_m1) / N. SBB and hybrid share the same algebra (they
/// differ only through the conductance values supplied):
/// N = 2: g_d2,1/(g_m1+g_d1) * g_d2,2/(g_mb2,2+g_d2,1+g_d2,2)
/// N = 3: the above times g_d2,3/(g_mb2,3+g_d2,3).
pub fn ls_enhanced(variant: StackVariant, ss: &StackConductances) -> Result<f64> {
    let n = variant.depth() as usize;
    if n == 0 || n > 3 {
        return Err(Error::config(format!(
            "ls_enhanced: unsupported stack depth {n} (supported: 1..=3)"
        )));
    }
    if ss.g_d2.len() < n || ss.g_mb2.len() < n {
        return Err(Error::config(
            "ls_enhanced: conductance set shorter than stack depth".to_string(),
        ));
    }
    if ss.g_m1 == 0.0 {
        return Err(Error::numeric("ls_enhanced: g_m1 = 0".to_string()));
    }
    match variant {
        StackVariant::Single => Ok(ss.g_d2[0] / ss.g_m1),
        StackVariant::Stacked(_) => Ok(ss.g_d2[0] / ss.g_m1 / n as f64),
        StackVariant::Sbb(_) | StackVariant::Hybrid(_) => {
            let first = ss.g_d2[0] / (ss.g_m1 + ss.g_d1);
            match n {
                1 => Ok(ss.g_d2[0] / ss.g_m1),
                2 => Ok(first * ss.g_d2[1] / (ss.g_mb2[1] + ss.g_d2[0] + ss.g_d2[1])),
                3 => Ok(
                    first * ss.g_d2[1] / (ss.g_mb2[1] + ss.g_d2[0] + ss.g_d2[1]) * ss.g_d2[2]
                        / (ss.g_mb2[2] + ss.g_d2[2]),
                ),
                _ => unreachable!("depth validated above"),
            }
        }
    }
}

/// Solve the SCM balance for the forward inversion level of the saturated
/// device: V_REF = n U_T [ (sqrt(1+a i) - sqrt(1+i)) + ln((sqrt(1+a i)-1)
/// /(sqrt(1+i)-1)) ]. Returns (i_f7, i_f6 = alpha * i_f7).
///
/// The right-hand side tends to n U_T ln(alpha) as i -> 0+, so the
/// equation is solvable only for v_ref above that floor.
pub fn solve_scm(v_ref: f64, alpha: f64, n: f64, t: f64) -> Result<(f64, f64)> {
    if !(alpha > 1.0) {
        return Err(Error::domain(format!(
            "solve_scm: alpha must exceed 1 (got {alpha})"
        )));
    }
    if !(v_ref > 0.0) {
        return Err(Error::domain(format!(
            "solve_scm: v_ref must be positive (got {v_ref})"
        )));
    }
    let ut = thermal_voltage(t)?;
    let y = v_ref / (n * ut);
    let floor = alpha.ln();
    if y <= floor {
        return Err(Error::domain(format!(
            "solve_scm: v_ref = {v_ref:.6} V is at or below the feasibility floor \
             n*U_T*ln(alpha) = {:.6} V; no positive inversion level exists",
            n * ut * floor
        )));
    }

    // g(i) = F(alpha i) - F(i) written with cancellation-free factors;
    // g'(i) = (alpha-1) / (2 (sqrt(1+alpha i) + sqrt(1+i))) exactly.
    let g = |i: f64| {
        let s = (1.0 + i).sqrt();
        let sa = (1.0 + alpha * i).sqrt();
        let sm = i / (s + 1.0);
        let sma = alpha * i / (sa + 1.0);
        (sma - sm) + (alpha * (s + 1.0) / (sa + 1.0)).ln()
    };
    let dg = |i: f64| (alpha - 1.0) / (2.0 * ((1.0 + alpha * i).sqrt() + (1.0 + i).sqrt()));

    let excess = y - floor;
    let init = if excess < 1.0 {
        4.0 * excess / (alpha - 1.0)
    } else {
        (y / (alpha.sqrt() - 1.0)).powi(2)
    };
    let i_f7 = solve_increasing(g, dg, y, 1e-12, 1e6, init, "solve_scm")?;
    Ok((i_f7, alpha * i_f7))
}

/// Aspect-ratio constraint of the SCM pair:
/// S6/S7 = (I_SQ7/I_SQ6) (N+1)/N * 1/(alpha-1).
pub fn scm_aspect_ratio_constraint(
    p6: &TransistorParams,
    p7: &TransistorParams,
    alpha: f64,
    n_mirror: u32,
) -> Result<f64> {
    if !(alpha > 1.0) {
        return Err(Error::domain(format!(
            "scm_aspect_ratio_constraint: alpha must exceed 1 (got {alpha})"
        )));
    }
    if n_mirror < 1 {
        return Err(Error::domain(
            "scm_aspect_ratio_constraint: n_mirror must be >= 1".to_string(),
        ));
    }
    let n = n_mirror as f64;
    Ok((p7.i_sq_ref / p6.i_sq_ref) * (n + 1.0) / n / (alpha - 1.0))
}

/// Relative sensitivity of the reference current to the reference voltage
/// (1/V):
/// S = 2/(i_f7 n U_T) * [alpha/(sqrt(1+alpha i)-1) - 1/(sqrt(1+i)-1)]^-1.
pub fn sensitivity_ptat(i_f7: f64, alpha: f64, n: f64, t: f64) -> Result<f64> {
    if !(i_f7 > 0.0) {
        return Err(Error::domain(format!(
            "sensitivity_ptat: i_f7 must be positive (got {i_f7})"
        )));
    }
    if !(alpha > 1.0) {
        return Err(Error::domain(format!(
            "sensitivity_ptat: alpha must exceed 1 (got {alpha})"
        )));
    }
    let ut = thermal_voltage(t)?;
    // The bracket rationalizes exactly to (alpha-1)/(sqrt(1+alpha i)+sqrt(1+i)).
    let bracket = (alpha - 1.0) / ((1.0 + alpha * i_f7).sqrt() + (1.0 + i_f7).sqrt());
    if !(bracket > 0.0) {
        return Err(Error::domain(
            "sensitivity_ptat: non-positive bracket term".to_string(),
        ));
    }
    Ok(2.0 / (i_f7 * n * ut * bracket))
}

/// LS and mismatch propagation: both the supply and mismatch responses of
/// the reference current are the voltage-reference figures scaled by the
/// current sensitivity.
pub fn propagate_ls_and_mismatch(s_iref: f64, vref_ls: f64, sigma_vref: f64) -> (f64, f64) {
    (s_iref * vref_ls, s_iref * sigma_vref)
}

/// DC output of one reference evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefOutput {
    /// Reference output current (A).
    pub i_ref: f64,
    /// Reference voltage (V).
    pub v_ref: f64,
    /// Total supply power V_DD * sum of branch currents (W).
    pub power: f64,
}

/// 4-bit-style TC calibration: the effective S2/S1 ratio is tuned by
/// switching unit slices of M1, linear in W1 between the two ratio
/// endpoints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationConfig {
    pub bits: u8,
    /// Effective W2/W1 at code 0 (all M1 slices active).
    pub ratio_min: f64,
    /// Effective W2/W1 at the top code.
    pub ratio_max: f64,
}

impl CalibrationConfig {
    pub fn new(bits: u8, ratio_min: f64, ratio_max: f64) -> Result<Self> {
        let c = CalibrationConfig {
            bits,
            ratio_min,
            ratio_max,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.bits == 0 || self.bits > 8 {
            return Err(Error::config(format!(
                "calibration: bits must be in 1..=8 (got {})",
                self.bits
            )));
        }
        if !(0.0 < self.ratio_min && self.ratio_min < self.ratio_max) {
            return Err(Error::config(format!(
                "calibration: require 0 < ratio_min < ratio_max (got {} and {})",
                self.ratio_min, self.ratio_max
            )));
        }
        Ok(())
    }

    pub fn code_count(&self) -> u32 {
        1u32 << self.bits
    }

    /// Effective S2/S1 at a code: W1 interpolates linearly across codes,
    /// so the ratio is the harmonic image of the code axis.
    pub fn ratio_for_code(&self, code: u32) -> Result<f64> {
        if code >= self.code_count() {
            return Err(Error::config(format!(
                "calibration: code {code} out of range 0..{}",
                self.code_count()
            )));
        }
        let steps = (self.code_count() - 1) as f64;
        let w1_hi = 1.0 / self.ratio_min; // relative W1 at code 0
        let w1_lo = 1.0 / self.ratio_max;
        let w1 = w1_hi + (w1_lo - w1_hi) * code as f64 / steps;
        Ok(1.0 / w1)
    }
}

/// nA-range PTAT current reference: 2T PTAT voltage reference buffered
/// onto a self-cascode load, mirrored down by n_mirror.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PtatReference {
    pub vref: TwoTVref,
    /// Triode half of the SCM.
    pub scm6: DeviceInst,
    /// Saturated half of the SCM.
    pub scm7: DeviceInst,
    /// Target i_f6/i_f7 ratio.
    pub alpha: f64,
    /// Mirror division factor N.
    pub n_mirror: u32,
    /// Buffer device between the voltage reference and the SCM (carries
    /// I_REF).
    pub buffer: DeviceInst,
    /// Mirror unit device (diode side, carries I_REF).
    pub mirror: DeviceInst,
}

impl PtatReference {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 1.0) {
            return Err(Error::config(format!(
                "ptat reference: invariant alpha > 1 violated (alpha = {})",
                self.alpha
            )));
        }
        if self.n_mirror < 1 {
            return Err(Error::config(
                "ptat reference: invariant n_mirror >= 1 violated".to_string(),
            ));
        }
        if self.vref.dev1.params != self.vref.dev2.params {
            return Err(Error::config(
                "ptat reference: M1 and M2 must share the same device type".to_string(),
            ));
        }
        for (g, name) in [
            (&self.scm6.geom, "m6"),
            (&self.scm7.geom, "m7"),
            (&self.buffer.geom, "m3"),
            (&self.mirror.geom, "m4"),
        ] {
            g.validate()
                .map_err(|e| Error::config(format!("{name}: {e}")))?;
        }
        Ok(())
    }

    /// Check that the drawn SCM aspect ratios satisfy the ratio constraint
    /// within 5 %.
    fn check_scm_consistency(&self) -> Result<()> {
        let expected = scm_aspect_ratio_constraint(
            &self.scm6.params,
            &self.scm7.params,
            self.alpha,
            self.n_mirror,
        )?;
        let actual = self.scm6.aspect_ratio() / self.scm7.aspect_ratio();
        let dev = (actual / expected - 1.0).abs();
        if dev > 0.05 {
            return Err(Error::domain(format!(
                "ptat reference: S6/S7 = {actual:.4e} deviates {:.1}% from the constraint \
                 value {expected:.4e} (limit 5%)",
                dev * 100.0
            )));
        }
        Ok(())
    }

    /// Solve the SCM at an externally supplied reference voltage; returns
    /// (i_f7, i_ref). Used by the nominal chain, mismatch sampling and
    /// derivative oracles alike.
    pub fn solve_at_vref(&self, v_ref: f64, t: f64) -> Result<(f64, f64)> {
        let (i_f7, _) = solve_scm(v_ref, self.alpha, self.scm7.params.n, t)?;
        let i_scm = acm_drain_current(&self.scm7.params, &self.scm7.geom, i_f7, 0.0, t)?;
        Ok((i_f7, i_scm / self.n_mirror as f64))
    }

    /// Full DC evaluation: closed-form V_REF, SCM solve, branch bookkeeping.
    /// Power = V_DD (I_2T + (N+1) I_REF): the buffer/diode branch carries
    /// I_REF and the SCM branch carries N I_REF.
    pub fn evaluate(&self, t: f64, v_dd: f64) -> Result<RefOutput> {
        self.check_scm_consistency()?;
        let v_ref = self.vref.vref(t)?;
        let (_, i_ref) = self.solve_at_vref(v_ref, t)?;
        let i_2t = self.vref.branch_current(t, v_dd)?;
        let power = v_dd * (i_2t + (self.n_mirror as f64 + 1.0) * i_ref);
        Ok(RefOutput {
            i_ref,
            v_ref,
            power,
        })
    }

    /// Current sensitivity S_IREF at the design point (1/V).
    pub fn sensitivity(&self, t: f64) -> Result<f64> {
        let v_ref = self.vref.vref(t)?;
        let (i_f7, _) = solve_scm(v_ref, self.alpha, self.scm7.params.n, t)?;
        sensitivity_ptat(i_f7, self.alpha, self.scm7.params.n, t)
    }

    /// Minimum supply voltage: 4 U_T plus the largest of the three branch
    /// headroom requirements. Gate-source drops come from inverting the
    /// pinch-off relation at each branch current.
    pub fn vdd_min(&self, t: f64) -> Result<f64> {
        let ut = thermal_voltage(t)?;
        let v_ref = self.vref.vref(t)?;
        let (i_f7, i_ref) = self.solve_at_vref(v_ref, t)?;

        let vgs_at = |dev: &DeviceInst, i: f64| -> Result<f64> {
            let i_f = i / (specific_sheet_current(&dev.params, t)? * dev.aspect_ratio());
            if !(i_f > 0.0) {
                return Err(Error::domain(
                    "vdd_min: zero branch current while inverting device law".to_string(),
                ));
            }
            Ok(threshold_voltage(&dev.params, t) + dev.params.n * ut * pinchoff_fn(i_f))
        };

        let v_gs3 = vgs_at(&self.buffer, i_ref)?;
        let v_sg4 = vgs_at(&self.mirror, i_ref)?;
        let v_g = threshold_voltage(&self.scm7.params, t)
            + self.scm7.params.n * (v_ref + ut * pinchoff_fn(i_f7));
        Ok(4.0 * ut + (v_ref + v_gs3).max(v_ref + v_sg4).max(v_g))
    }
}

/// uA-range CWT current reference: quasi-CWT 2T voltage reference across a
/// resistor with matched temperature coefficients, mirrored at ratio 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CwtReference {
    pub vref: TwoTVref,
    pub resistor: ResistorParams,
    pub squares: f64,
    pub calibration: Option<CalibrationConfig>,
    /// Buffer device (carries I_REF).
    pub buffer: DeviceInst,
    /// Mirror unit device (carries I_REF).
    pub mirror: DeviceInst,
}

impl CwtReference {
    pub fn validate(&self) -> Result<()> {
        if !(self.squares > 0.0) {
            return Err(Error::config(format!(
                "cwt reference: invariant squares > 0 violated (squares = {})",
                self.squares
            )));
        }
        self.resistor.validate()?;
        if let Some(c) = &self.calibration {
            c.validate()?;
        }
        Ok(())
    }

    /// I_REF = V_REF / R. Power = V_DD (I_2T + 2 I_REF): resistor branch
    /// plus the unit mirror output.
    pub fn evaluate(&self, t: f64, v_dd: f64) -> Result<RefOutput> {
        let v_ref = self.vref.vref(t)?;
        let r = resistance(&self.resistor, self.squares, t)?;
        let i_ref = v_ref / r;
        let i_2t = self.vref.branch_current(t, v_dd)?;
        let power = v_dd * (i_2t + 2.0 * i_ref);
        Ok(RefOutput {
            i_ref,
            v_ref,
            power,
        })
    }

    /// Analytic dI_REF/dT (A/K): quotient-rule derivative of the
    /// closed-form V_REF over the resistor law, including the I_SQ-ratio
    /// drift term when the two devices have different mobility exponents.
    pub fn diref_dt(&self, t: f64) -> Result<f64> {
        let p1 = &self.vref.dev1.params;
        let p2 = &self.vref.dev2.params;
        let ln_k = self.vref.ln_balance(t)?;
        let ut = thermal_voltage(t)?;
        let n_ratio = p1.n / p2.n;
        let dv_dt = p1.n * K_OVER_Q * (ln_k + (p1.m_mob - p2.m_mob)) - p1.alpha_vt0
            + n_ratio * p2.alpha_vt0;
        let v = p1.n * ut * ln_k + threshold_voltage(p1, t) - n_ratio * threshold_voltage(p2, t);
        let r = resistance(&self.resistor, self.squares, t)?;
        let dr_dt = resistance_dt(&self.resistor, self.squares, t)?;
        Ok((dv_dt * r - v * dr_dt) / (r * r))
    }

    /// Minimum supply voltage; the SCM gate branch does not exist here.
    pub fn vdd_min(&self, t: f64) -> Result<f64> {
        let ut = thermal_voltage(t)?;
        let v_ref = self.vref.vref(t)?;
        let r = resistance(&self.resistor, self.squares, t)?;
        let i_ref = v_ref / r;

        let vgs_at = |dev: &DeviceInst, i: f64| -> Result<f64> {
            let i_f = i / (specific_sheet_current(&dev.params, t)? * dev.aspect_ratio());
            if !(i_f > 0.0) {
                return Err(Error::domain(
                    "vdd_min: zero branch current while inverting device law".to_string(),
                ));
            }
            Ok(threshold_voltage(&dev.params, t) + dev.params.n * ut * pinchoff_fn(i_f))
        };

        let v_gs3 = vgs_at(&self.buffer, i_ref)?;
        let v_sg4 = vgs_at(&self.mirror, i_ref)?;
        Ok(4.0 * ut + (v_ref + v_gs3).max(v_ref + v_sg4))
    }

    /// Current S2/S1 of the voltage-reference pair.
    pub fn ratio(&self) -> f64 {
        self.vref.dev2.aspect_ratio() / self.vref.dev1.aspect_ratio()
    }

    /// Clone with M1 rescaled so that S2/S1 equals the target ratio.
    pub fn with_ratio(&self, target_ratio: f64) -> Result<CwtReference> {
        if !(target_ratio > 0.0) {
            return Err(Error::domain(format!(
                "with_ratio: ratio must be positive (got {target_ratio})"
            )));
        }
        let mut out = self.clone();
        out.vref.dev1.geom.w *= self.ratio() / target_ratio;
        Ok(out)
    }

    /// Clone with the calibration code applied (M1 width switched).
    pub fn calibrated(&self, code: u32) -> Result<CwtReference> {
        let cal = self.calibration.ok_or_else(|| {
            Error::config("calibrated: design has no calibration configured".to_string())
        })?;
        self.with_ratio(cal.ratio_for_code(code)?)
    }
}

/// Zero-TC aspect-ratio target for the CWT pair at temperature t0, with
/// rho = (1/R)(dR/dT) at t0:
/// S2/S1 = (I_SQ1/I_SQ2) exp([rho dVt_eff + (a1 - (n1/n2) a2)
/// - n1 (k/q)(m1-m2)] / [n1 (k/q) (1 - rho T0)]).
pub fn cwt_optimal_ratio(
    p1: &TransistorParams,
    p2: &TransistorParams,
    res: &ResistorParams,
    t0: f64,
) -> Result<f64> {
    let dt = t0 - res.t_ref;
    let rho = (res.tcr1 + 2.0 * res.tcr2 * dt) / (1.0 + res.tcr1 * dt + res.tcr2 * dt * dt);
    let denom = 1.0 - rho * t0;
    if denom.abs() < 1e-9 {
        return Err(Error::domain(format!(
            "cwt_optimal_ratio: degenerate input, 1 - (T0/R) dR/dT = {denom:e}"
        )));
    }
    let n_ratio = p1.n / p2.n;
    let dvt_eff = threshold_voltage(p1, t0) - n_ratio * threshold_voltage(p2, t0);
    let num = rho * dvt_eff + (p1.alpha_vt0 - n_ratio * p2.alpha_vt0)
        - p1.n * K_OVER_Q * (p1.m_mob - p2.m_mob);
    let ln_k = num / (p1.n * K_OVER_Q * denom);
    Ok(ln_k.exp() * specific_sheet_current(p1, t0)? / specific_sheet_current(p2, t0)?)
}

/// Either of the two concrete reference designs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ReferenceDesign {
    Ptat(PtatReference),
    Cwt(CwtReference),
}

impl ReferenceDesign {
    pub fn kind(&self) -> &'static str {
        match self {
            ReferenceDesign::Ptat(_) => "ptat",
            ReferenceDesign::Cwt(_) => "cwt",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ReferenceDesign::Ptat(p) => p.validate(),
            ReferenceDesign::Cwt(c) => c.validate(),
        }
    }

    pub fn vref_core(&self) -> &TwoTVref {
        match self {
            ReferenceDesign::Ptat(p) => &p.vref,
            ReferenceDesign::Cwt(c) => &c.vref,
        }
    }

    pub fn vref_core_mut(&mut self) -> &mut TwoTVref {
        match self {
            ReferenceDesign::Ptat(p) => &mut p.vref,
            ReferenceDesign::Cwt(c) => &mut c.vref,
        }
    }

    pub fn evaluate(&self, t: f64, v_dd: f64) -> Result<RefOutput> {
        match self {
            ReferenceDesign::Ptat(p) => p.evaluate(t, v_dd),
            ReferenceDesign::Cwt(c) => c.evaluate(t, v_dd),
        }
    }

    /// S_IREF (1/V): the SCM closed form for the PTAT design, 1/V_REF for
    /// the CWT design.
    pub fn sensitivity(&self, t: f64) -> Result<f64> {
        match self {
            ReferenceDesign::Ptat(p) => p.sensitivity(t),
            ReferenceDesign::Cwt(c) => Ok(1.0 / c.vref.vref(t)?),
        }
    }

    pub fn vdd_min(&self, t: f64) -> Result<f64> {
        match self {
            ReferenceDesign::Ptat(p) => p.vdd_min(t),
            ReferenceDesign::Cwt(c) => c.vdd_min(t),
        }
    }

    /// Predicted supply sensitivity of I_REF (1/V): S_IREF times the
    /// voltage-reference line sensitivity.
    pub fn predicted_ls(&self, t: f64, v_dd: f64) -> Result<f64> {
        let s = self.sensitivity(t)?;
        let vls = self.vref_core().line_sensitivity(t, v_dd)?;
        Ok(propagate_ls_and_mismatch(s, vls, 0.0).0)
    }

    /// Predicted relative spread of I_REF: S_IREF times sigma_VREF.
    pub fn predicted_sigma_over_mu(&self, t: f64) -> Result<f64> {
        let s = self.sensitivity(t)?;
        let sv = self.vref_core().sigma_vref()?;
        Ok(propagate_ls_and_mismatch(s, 0.0, sv).1)
    }
}
