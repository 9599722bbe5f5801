//! Ingestion and persistence: technology decks, design files and result
//! serialization.
//!
//! Both deck and design files are versioned TOML with unit-tagged numeric
//! fields (see [`units`]). Unknown fields and unit mismatches are load
//! errors; invariant violations name the offending parameter. Parameters
//! marked `placeholder` in the per-entry provenance tables are collected
//! into a warning list at load.

pub mod results;
pub mod units;

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::analysis::{CornerShift, CornerSpec};
use crate::circuits::{
    CalibrationConfig, CwtReference, DeviceInst, PtatReference, ReferenceDesign, StackVariant,
    TwoTVref,
};
use crate::device::{Geometry, Polarity, ResistorParams, TransistorParams};
use crate::error::{Error, Result};
use crate::sizing::{CwtSizingSpec, Predictions, PtatSizingSpec, SizingResult};
use units::{format_quantity, parse_quantity, Dimension};

pub const DECK_SCHEMA: &str = "tech-deck/1";
pub const DESIGN_SCHEMA: &str = "design/1";

/// Drawn-geometry limits of the technology.
#[derive(Debug, Clone, PartialEq)]
pub struct Technology {
    /// Minimum drawable width (um).
    pub w_min: f64,
    /// Maximum practical segment length for composite devices (um).
    pub l_segment_max: f64,
    /// Width snapping grid (um).
    pub w_grid: f64,
}

/// A validated technology deck.
#[derive(Debug, Clone, PartialEq)]
pub struct TechDeck {
    pub name: String,
    pub t_ref: f64,
    pub technology: Technology,
    pub transistors: BTreeMap<String, TransistorParams>,
    pub resistors: BTreeMap<String, ResistorParams>,
    pub corners: BTreeMap<String, CornerSpec>,
    /// Parameters the deck marks as placeholders rather than measured
    /// values, as `entry.field` paths.
    pub placeholder_params: Vec<String>,
}

impl TechDeck {
    pub fn transistor(&self, name: &str) -> Result<&TransistorParams> {
        self.transistors.get(name).ok_or_else(|| {
            Error::config(format!(
                "deck '{}' has no transistor named '{name}' (available: {})",
                self.name,
                self.transistors
                    .keys()
                    .cloned()
                    .collect::<Vec<_>>()
                    .join(", ")
            ))
        })
    }

    pub fn resistor(&self, name: &str) -> Result<&ResistorParams> {
        self.resistors.get(name).ok_or_else(|| {
            Error::config(format!(
                "deck '{}' has no resistor named '{name}' (available: {})",
                self.name,
                self.resistors
                    .keys()
                    .cloned()
                    .collect::<Vec<_>>()
                    .join(", ")
            ))
        })
    }

    pub fn corner(&self, name: &str) -> Result<&CornerSpec> {
        self.corners.get(name).ok_or_else(|| {
            Error::config(format!(
                "deck '{}' has no corner named '{name}' (available: {})",
                self.name,
                self.corners.keys().cloned().collect::<Vec<_>>().join(", ")
            ))
        })
    }

    /// Corners with tt first, the rest in name order.
    pub fn ordered_corners(&self) -> Vec<&CornerSpec> {
        let mut out = Vec::with_capacity(self.corners.len());
        if let Some(tt) = self.corners.get("tt") {
            out.push(tt);
        }
        out.extend(
            self.corners
                .iter()
                .filter(|(k, _)| *k != "tt")
                .map(|(_, v)| v),
        );
        out
    }

    /// Reverse lookup of a transistor entry by parameter equality; used
    /// when writing sized designs back to disk.
    fn transistor_name(&self, p: &TransistorParams) -> Result<&str> {
        self.transistors
            .iter()
            .find(|(_, v)| *v == p)
            .map(|(k, _)| k.as_str())
            .ok_or_else(|| {
                Error::config(format!(
                    "device parameters do not match any entry of deck '{}'",
                    self.name
                ))
            })
    }

    /// The deck shipped with the toolkit, parsed from the repository copy.
    pub fn example_xfab180() -> Result<TechDeck> {
        TechDeck::from_toml_str(
            include_str!("../../../../decks/xfab180.toml"),
            "builtin:xfab180",
        )
    }

    pub fn from_toml_str(text: &str, origin: &str) -> Result<TechDeck> {
        let raw: RawDeck = toml::from_str(text).map_err(|e| Error::parse(origin, e.to_string()))?;
        raw.into_deck(origin)
    }
}

/// Load and validate a deck file.
pub fn load_tech_deck(path: &Path) -> Result<TechDeck> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::parse(path.display().to_string(), e.to_string()))?;
    TechDeck::from_toml_str(&text, &path.display().to_string())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDeck {
    schema: String,
    name: String,
    t_ref: String,
    technology: RawTechnology,
    transistor: BTreeMap<String, RawTransistor>,
    resistor: BTreeMap<String, RawResistor>,
    #[serde(default)]
    corner: BTreeMap<String, RawCorner>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTechnology {
    w_min: String,
    l_segment_max: String,
    w_grid: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTransistor {
    polarity: String,
    n: f64,
    i_sq_ref: String,
    v_t0_ref: String,
    alpha_vt0: String,
    m_mob: f64,
    #[serde(default)]
    a_vt: Option<String>,
    v_ea_per_um: String,
    #[serde(default)]
    provenance: BTreeMap<String, String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawResistor {
    sheet_resistance: String,
    tcr1: String,
    #[serde(default)]
    tcr2: Option<String>,
    #[serde(default)]
    provenance: BTreeMap<String, String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCorner {
    #[serde(default)]
    nmos: Option<RawShift>,
    #[serde(default)]
    pmos: Option<RawShift>,
    #[serde(default)]
    provenance: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawShift {
    i_sq_factor: f64,
    v_t0_delta: String,
}

fn collect_placeholders(
    entry: &str,
    provenance: &BTreeMap<String, String>,
    sink: &mut Vec<String>,
    origin: &str,
) -> Result<()> {
    for (field, tag) in provenance {
        match tag.as_str() {
            "measured" => {}
            "placeholder" => sink.push(format!("{entry}.{field}")),
            other => {
                return Err(Error::parse(
                    origin,
                    format!(
                        "provenance of {entry}.{field} must be 'measured' or 'placeholder', \
                         got '{other}'"
                    ),
                ))
            }
        }
    }
    Ok(())
}

impl RawDeck {
    fn into_deck(self, origin: &str) -> Result<TechDeck> {
        if self.schema != DECK_SCHEMA {
            return Err(Error::parse(
                origin,
                format!(
                    "unsupported schema '{}' (expected '{DECK_SCHEMA}')",
                    self.schema
                ),
            ));
        }
        let t_ref = parse_quantity(&self.t_ref, Dimension::TemperatureK, "t_ref")?;
        if !(t_ref > 0.0) {
            return Err(Error::config("deck: t_ref must be positive".to_string()));
        }
        let technology = Technology {
            w_min: parse_quantity(
                &self.technology.w_min,
                Dimension::LengthUm,
                "technology.w_min",
            )?,
            l_segment_max: parse_quantity(
                &self.technology.l_segment_max,
                Dimension::LengthUm,
                "technology.l_segment_max",
            )?,
            w_grid: parse_quantity(
                &self.technology.w_grid,
                Dimension::LengthUm,
                "technology.w_grid",
            )?,
        };
        if !(technology.w_min > 0.0 && technology.l_segment_max > 0.0 && technology.w_grid > 0.0) {
            return Err(Error::config(
                "deck: technology limits must be positive".to_string(),
            ));
        }

        let mut placeholders = Vec::new();
        let mut transistors = BTreeMap::new();
        for (name, raw) in self.transistor {
            let polarity = match raw.polarity.as_str() {
                "nmos" | "n-channel" => Polarity::Nmos,
                "pmos" | "p-channel" => Polarity::Pmos,
                other => {
                    return Err(Error::parse(
                        origin,
                        format!("transistor '{name}': unknown polarity '{other}'"),
                    ))
                }
            };
            let field = |f: &str| format!("transistor.{name}.{f}");
            let params = TransistorParams {
                polarity,
                n: raw.n,
                i_sq_ref: parse_quantity(&raw.i_sq_ref, Dimension::Current, &field("i_sq_ref"))?,
                v_t0_ref: parse_quantity(&raw.v_t0_ref, Dimension::Voltage, &field("v_t0_ref"))?,
                alpha_vt0: parse_quantity(
                    &raw.alpha_vt0,
                    Dimension::VoltPerKelvin,
                    &field("alpha_vt0"),
                )?,
                m_mob: raw.m_mob,
                a_vt: raw
                    .a_vt
                    .as_deref()
                    .map(|s| parse_quantity(s, Dimension::VoltMicron, &field("a_vt")))
                    .transpose()?,
                v_ea_per_um: parse_quantity(
                    &raw.v_ea_per_um,
                    Dimension::VoltPerMicron,
                    &field("v_ea_per_um"),
                )?,
                t_ref,
            };
            params.validate(&name)?;
            collect_placeholders(
                &format!("transistor.{name}"),
                &raw.provenance,
                &mut placeholders,
                origin,
            )?;
            transistors.insert(name, params);
        }
        if transistors.is_empty() {
            return Err(Error::config("deck: no transistors defined".to_string()));
        }

        let mut resistors = BTreeMap::new();
        for (name, raw) in self.resistor {
            let field = |f: &str| format!("resistor.{name}.{f}");
            let params = ResistorParams {
                name: name.clone(),
                sheet_resistance: parse_quantity(
                    &raw.sheet_resistance,
                    Dimension::SheetResistance,
                    &field("sheet_resistance"),
                )?,
                tcr1: parse_quantity(&raw.tcr1, Dimension::PerKelvin, &field("tcr1"))?,
                tcr2: raw
                    .tcr2
                    .as_deref()
                    .map(|s| parse_quantity(s, Dimension::PerKelvin2, &field("tcr2")))
                    .transpose()?
                    .unwrap_or(0.0),
                t_ref,
            };
            params.validate()?;
            collect_placeholders(
                &format!("resistor.{name}"),
                &raw.provenance,
                &mut placeholders,
                origin,
            )?;
            resistors.insert(name, params);
        }

        let mut corners = BTreeMap::new();
        for (name, raw) in self.corner {
            let parse_shift = |s: Option<RawShift>, pol: &str| -> Result<CornerShift> {
                match s {
                    None => Ok(CornerShift::IDENTITY),
                    Some(s) => Ok(CornerShift {
                        i_sq_factor: s.i_sq_factor,
                        v_t0_delta: parse_quantity(
                            &s.v_t0_delta,
                            Dimension::Voltage,
                            &format!("corner.{name}.{pol}.v_t0_delta"),
                        )?,
                    }),
                }
            };
            let spec = CornerSpec {
                name: name.clone(),
                nmos: parse_shift(raw.nmos, "nmos")?,
                pmos: parse_shift(raw.pmos, "pmos")?,
            };
            spec.validate()?;
            if let Some(p) = &raw.provenance {
                if p == "placeholder" {
                    placeholders.push(format!("corner.{name}"));
                }
            }
            corners.insert(name, spec);
        }
        corners
            .entry("tt".to_string())
            .or_insert_with(|| CornerSpec::identity("tt"));

        Ok(TechDeck {
            name: self.name,
            t_ref,
            technology,
            transistors,
            resistors,
            corners,
            placeholder_params: placeholders,
        })
    }
}

/// Parsed content of a design file.
#[derive(Debug, Clone)]
pub enum DesignContent {
    PtatSizing(PtatSizingSpec),
    CwtSizing(CwtSizingSpec),
    Explicit(Box<ReferenceDesign>),
}

#[derive(Debug, Clone)]
pub struct DesignFile {
    pub name: String,
    pub kind: String,
    pub content: DesignContent,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDesign {
    schema: String,
    kind: String,
    #[serde(default)]
    name: Option<String>,
    #[serde(default)]
    sizing: Option<toml::Value>,
    #[serde(default)]
    explicit: Option<toml::Value>,
    /// Predictions block written by the sizing commands; accepted and
    /// ignored on load.
    #[serde(default)]
    #[allow(dead_code)]
    predicted: Option<toml::Value>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPtatSizing {
    target_iref: String,
    #[serde(default)]
    target_sensitivity: Option<String>,
    s2_over_s1: f64,
    alpha: f64,
    n_mirror: u32,
    m_mult: u32,
    #[serde(default)]
    vref_device: Option<String>,
    #[serde(default)]
    scm_device: Option<String>,
    #[serde(default)]
    buffer_device: Option<String>,
    #[serde(default)]
    mirror_device: Option<String>,
    #[serde(default)]
    unit_w: Option<String>,
    #[serde(default)]
    unit_l: Option<String>,
    #[serde(default)]
    buffer_l: Option<String>,
    #[serde(default)]
    buffer_if: Option<f64>,
    #[serde(default)]
    mirror_l: Option<String>,
    #[serde(default)]
    mirror_series: Option<u32>,
    #[serde(default)]
    mirror_if: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCwtSizing {
    target_iref: String,
    #[serde(default)]
    m1_device: Option<String>,
    #[serde(default)]
    m2_device: Option<String>,
    #[serde(default)]
    length: Option<String>,
    #[serde(default)]
    w1: Option<String>,
    #[serde(default)]
    m_mult: Option<u32>,
    #[serde(default)]
    buffer_device: Option<String>,
    #[serde(default)]
    buffer_w: Option<String>,
    #[serde(default)]
    buffer_l: Option<String>,
    #[serde(default)]
    buffer_mult: Option<u32>,
    #[serde(default)]
    mirror_device: Option<String>,
    #[serde(default)]
    mirror_w: Option<String>,
    #[serde(default)]
    mirror_l: Option<String>,
    #[serde(default)]
    mirror_mult: Option<u32>,
    #[serde(default)]
    calibration: Option<RawCalibration>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCalibration {
    #[serde(default)]
    bits: Option<u8>,
    #[serde(default)]
    ratio_min: Option<f64>,
    #[serde(default)]
    ratio_max: Option<f64>,
}

impl RawCalibration {
    fn into_config(self) -> Result<CalibrationConfig> {
        CalibrationConfig::new(
            self.bits.unwrap_or(4),
            self.ratio_min.unwrap_or(0.37),
            self.ratio_max.unwrap_or(0.83),
        )
    }

    fn from_config(c: &CalibrationConfig) -> Self {
        RawCalibration {
            bits: Some(c.bits),
            ratio_min: Some(c.ratio_min),
            ratio_max: Some(c.ratio_max),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDevice {
    device: String,
    w: String,
    l: String,
    #[serde(default)]
    mult: Option<u32>,
    #[serde(default)]
    series: Option<u32>,
}

impl RawDevice {
    fn resolve(&self, deck: &TechDeck, what: &str) -> Result<DeviceInst> {
        let params = deck.transistor(&self.device)?.clone();
        let geom = Geometry::new(
            parse_quantity(&self.w, Dimension::LengthUm, &format!("{what}.w"))?,
            parse_quantity(&self.l, Dimension::LengthUm, &format!("{what}.l"))?,
            self.mult.unwrap_or(1),
            self.series.unwrap_or(1),
        )
        .map_err(|e| Error::config(format!("{what}: {e}")))?;
        DeviceInst::new(params, geom)
    }

    fn from_inst(inst: &DeviceInst, deck: &TechDeck) -> Result<Self> {
        Ok(RawDevice {
            device: deck.transistor_name(&inst.params)?.to_string(),
            w: format_quantity(inst.geom.w, Dimension::LengthUm),
            l: format_quantity(inst.geom.l, Dimension::LengthUm),
            mult: Some(inst.geom.mult),
            series: Some(inst.geom.series),
        })
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawExplicitPtat {
    m1: RawDevice,
    m2: RawDevice,
    m3: RawDevice,
    m4: RawDevice,
    m6: RawDevice,
    m7: RawDevice,
    alpha: f64,
    n_mirror: u32,
    #[serde(default)]
    stack: Option<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawResistorUse {
    flavor: String,
    squares: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawExplicitCwt {
    m1: RawDevice,
    m2: RawDevice,
    m3: RawDevice,
    m4: RawDevice,
    resistor: RawResistorUse,
    #[serde(default)]
    calibration: Option<RawCalibration>,
    #[serde(default)]
    stack: Option<String>,
}

fn parse_stack(s: &Option<String>) -> Result<StackVariant> {
    match s {
        None => Ok(StackVariant::Single),
        Some(s) => s.parse(),
    }
}

fn reparse<T: serde::de::DeserializeOwned>(v: toml::Value, origin: &str, what: &str) -> Result<T> {
    v.try_into()
        .map_err(|e| Error::parse(origin, format!("[{what}]: {e}")))
}

/// Load a design file, resolving device names against the deck.
pub fn load_design(path: &Path, deck: &TechDeck) -> Result<DesignFile> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::parse(path.display().to_string(), e.to_string()))?;
    let origin = path.display().to_string();
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "design".to_string());
    design_from_toml_str(&text, &origin, &stem, deck)
}

pub fn design_from_toml_str(
    text: &str,
    origin: &str,
    default_name: &str,
    deck: &TechDeck,
) -> Result<DesignFile> {
    let raw: RawDesign = toml::from_str(text).map_err(|e| Error::parse(origin, e.to_string()))?;
    if raw.schema != DESIGN_SCHEMA {
        return Err(Error::parse(
            origin,
            format!(
                "unsupported schema '{}' (expected '{DESIGN_SCHEMA}')",
                raw.schema
            ),
        ));
    }
    if raw.kind != "ptat" && raw.kind != "cwt" {
        return Err(Error::parse(
            origin,
            format!("design kind must be 'ptat' or 'cwt', got '{}'", raw.kind),
        ));
    }
    let name = raw.name.clone().unwrap_or_else(|| default_name.to_string());
    let content = match (raw.sizing, raw.explicit) {
        (Some(_), Some(_)) | (None, None) => {
            return Err(Error::parse(
                origin,
                "design file must contain exactly one of [sizing] or [explicit]".to_string(),
            ))
        }
        (Some(s), None) => match raw.kind.as_str() {
            "ptat" => {
                let r: RawPtatSizing = reparse(s, origin, "sizing")?;
                DesignContent::PtatSizing(PtatSizingSpec {
                    target_iref: parse_quantity(
                        &r.target_iref,
                        Dimension::Current,
                        "sizing.target_iref",
                    )?,
                    target_sensitivity: r
                        .target_sensitivity
                        .as_deref()
                        .map(|s| parse_quantity(s, Dimension::PerVolt, "sizing.target_sensitivity"))
                        .transpose()?,
                    s2_over_s1: r.s2_over_s1,
                    alpha: r.alpha,
                    n_mirror: r.n_mirror,
                    m_mult: r.m_mult,
                    vref_device: r.vref_device.unwrap_or_else(|| "lvt_pmos".to_string()),
                    scm_device: r.scm_device.unwrap_or_else(|| "lvt_pmos".to_string()),
                    buffer_device: r.buffer_device.unwrap_or_else(|| "lvt_pmos".to_string()),
                    mirror_device: r.mirror_device.unwrap_or_else(|| "lvt_nmos".to_string()),
                    unit_w: r
                        .unit_w
                        .as_deref()
                        .map(|s| parse_quantity(s, Dimension::LengthUm, "sizing.unit_w"))
                        .transpose()?
                        .unwrap_or(1.0),
                    unit_l: r
                        .unit_l
                        .as_deref()
                        .map(|s| parse_quantity(s, Dimension::LengthUm, "sizing.unit_l"))
                        .transpose()?
                        .unwrap_or(20.0),
                    buffer_l: r
                        .buffer_l
                        .as_deref()
                        .map(|s| parse_quantity(s, Dimension::LengthUm, "sizing.buffer_l"))
                        .transpose()?
                        .unwrap_or(10.0),
                    buffer_if: r.buffer_if.unwrap_or(0.12),
                    mirror_l: r
                        .mirror_l
                        .as_deref()
                        .map(|s| parse_quantity(s, Dimension::LengthUm, "sizing.mirror_l"))
                        .transpose()?
                        .unwrap_or(25.0),
                    mirror_series: r.mirror_series.unwrap_or(2),
                    mirror_if: r.mirror_if.unwrap_or(0.05),
                })
            }
            _ => {
                let r: RawCwtSizing = reparse(s, origin, "sizing")?;
                DesignContent::CwtSizing(CwtSizingSpec {
                    target_iref: parse_quantity(
                        &r.target_iref,
                        Dimension::Current,
                        "sizing.target_iref",
                    )?,
                    m1_device: r.m1_device.unwrap_or_else(|| "rvt_pmos".to_string()),
                    m2_device: r.m2_device.unwrap_or_else(|| "lvt_pmos".to_string()),
                    length: r
                        .length
                        .as_deref()
                        .map(|s| parse_quantity(s, Dimension::LengthUm, "sizing.length"))
                        .transpose()?
                        .unwrap_or(5.0),
                    w1: r
                        .w1
                        .as_deref()
                        .map(|s| parse_quantity(s, Dimension::LengthUm, "sizing.w1"))
                        .transpose()?
                        .unwrap_or(2.25),
                    m_mult: r.m_mult.unwrap_or(4),
                    buffer_device: r.buffer_device.unwrap_or_else(|| "lvt_pmos".to_string()),
                    buffer_w: r
                        .buffer_w
                        .as_deref()
                        .map(|s| parse_quantity(s, Dimension::LengthUm, "sizing.buffer_w"))
                        .transpose()?
                        .unwrap_or(10.0),
                    buffer_l: r
                        .buffer_l
                        .as_deref()
                        .map(|s| parse_quantity(s, Dimension::LengthUm, "sizing.buffer_l"))
                        .transpose()?
                        .unwrap_or(1.0),
                    buffer_mult: r.buffer_mult.unwrap_or(10),
                    mirror_device: r.mirror_device.unwrap_or_else(|| "lvt_nmos".to_string()),
                    mirror_w: r
                        .mirror_w
                        .as_deref()
                        .map(|s| parse_quantity(s, Dimension::LengthUm, "sizing.mirror_w"))
                        .transpose()?
                        .unwrap_or(10.0),
                    mirror_l: r
                        .mirror_l
                        .as_deref()
                        .map(|s| parse_quantity(s, Dimension::LengthUm, "sizing.mirror_l"))
                        .transpose()?
                        .unwrap_or(1.0),
                    mirror_mult: r.mirror_mult.unwrap_or(10),
                    calibration: r.calibration.map(|c| c.into_config()).transpose()?,
                })
            }
        },
        (None, Some(e)) => match raw.kind.as_str() {
            "ptat" => {
                let r: RawExplicitPtat = reparse(e, origin, "explicit")?;
                let design = PtatReference {
                    vref: TwoTVref::new(
                        r.m1.resolve(deck, "explicit.m1")?,
                        r.m2.resolve(deck, "explicit.m2")?,
                        parse_stack(&r.stack)?,
                    )?,
                    scm6: r.m6.resolve(deck, "explicit.m6")?,
                    scm7: r.m7.resolve(deck, "explicit.m7")?,
                    alpha: r.alpha,
                    n_mirror: r.n_mirror,
                    buffer: r.m3.resolve(deck, "explicit.m3")?,
                    mirror: r.m4.resolve(deck, "explicit.m4")?,
                };
                design.validate()?;
                DesignContent::Explicit(Box::new(ReferenceDesign::Ptat(design)))
            }
            _ => {
                let r: RawExplicitCwt = reparse(e, origin, "explicit")?;
                let design = CwtReference {
                    vref: TwoTVref::new(
                        r.m1.resolve(deck, "explicit.m1")?,
                        r.m2.resolve(deck, "explicit.m2")?,
                        parse_stack(&r.stack)?,
                    )?,
                    resistor: deck.resistor(&r.resistor.flavor)?.clone(),
                    squares: r.resistor.squares,
                    calibration: r.calibration.map(|c| c.into_config()).transpose()?,
                    buffer: r.m3.resolve(deck, "explicit.m3")?,
                    mirror: r.m4.resolve(deck, "explicit.m4")?,
                };
                design.validate()?;
                DesignContent::Explicit(Box::new(ReferenceDesign::Cwt(design)))
            }
        },
    };
    Ok(DesignFile {
        name,
        kind: raw.kind,
        content,
    })
}

#[derive(Serialize)]
struct RawPredictedOut {
    v_dd: String,
    v_ref: String,
    i_ref: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    i_f7: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    i_f6: Option<f64>,
    s_iref: String,
    vref_ls: f64,
    ls: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    sigma_vref: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sigma_over_mu: Option<f64>,
    vdd_min: String,
    power: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    diref_dt: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    tc_box_ppm_per_degc: Option<f64>,
}

impl RawPredictedOut {
    fn from_predictions(p: &Predictions) -> Self {
        RawPredictedOut {
            v_dd: format_quantity(p.v_dd, Dimension::Voltage),
            v_ref: format_quantity(p.v_ref, Dimension::Voltage),
            i_ref: format_quantity(p.i_ref, Dimension::Current),
            i_f7: p.i_f7,
            i_f6: p.i_f6,
            s_iref: format_quantity(p.s_iref, Dimension::PerVolt),
            vref_ls: p.vref_ls,
            ls: format_quantity(p.ls, Dimension::PerVolt),
            sigma_vref: p.sigma_vref.map(|v| format_quantity(v, Dimension::Voltage)),
            sigma_over_mu: p.sigma_over_mu,
            vdd_min: format_quantity(p.vdd_min, Dimension::Voltage),
            power: format_quantity(p.power, Dimension::Watt),
            diref_dt: p
                .diref_dt
                .map(|v| format_quantity(v, Dimension::CurrentPerKelvin)),
            tc_box_ppm_per_degc: p.tc_box,
        }
    }
}

#[derive(Serialize)]
struct RawDesignOutPtat {
    schema: &'static str,
    kind: &'static str,
    name: String,
    explicit: RawExplicitPtat,
    predicted: RawPredictedOut,
}

#[derive(Serialize)]
struct RawDesignOutCwt {
    schema: &'static str,
    kind: &'static str,
    name: String,
    explicit: RawExplicitCwt,
    predicted: RawPredictedOut,
}

/// Serialize a sized design (with its predictions) as a design file that
/// loads back as an explicit design.
pub fn sized_design_to_toml(result: &SizingResult, name: &str, deck: &TechDeck) -> Result<String> {
    let text = match &result.design {
        ReferenceDesign::Ptat(p) => {
            let out = RawDesignOutPtat {
                schema: DESIGN_SCHEMA,
                kind: "ptat",
                name: name.to_string(),
                explicit: RawExplicitPtat {
                    m1: RawDevice::from_inst(&p.vref.dev1, deck)?,
                    m2: RawDevice::from_inst(&p.vref.dev2, deck)?,
                    m3: RawDevice::from_inst(&p.buffer, deck)?,
                    m4: RawDevice::from_inst(&p.mirror, deck)?,
                    m6: RawDevice::from_inst(&p.scm6, deck)?,
                    m7: RawDevice::from_inst(&p.scm7, deck)?,
                    alpha: p.alpha,
                    n_mirror: p.n_mirror,
                    stack: Some(p.vref.stack.to_string()),
                },
                predicted: RawPredictedOut::from_predictions(&result.predictions),
            };
            toml::to_string(&out).map_err(|e| Error::config(e.to_string()))?
        }
        ReferenceDesign::Cwt(c) => {
            let out = RawDesignOutCwt {
                schema: DESIGN_SCHEMA,
                kind: "cwt",
                name: name.to_string(),
                explicit: RawExplicitCwt {
                    m1: RawDevice::from_inst(&c.vref.dev1, deck)?,
                    m2: RawDevice::from_inst(&c.vref.dev2, deck)?,
                    m3: RawDevice::from_inst(&c.buffer, deck)?,
                    m4: RawDevice::from_inst(&c.mirror, deck)?,
                    resistor: RawResistorUse {
                        flavor: c.resistor.name.clone(),
                        squares: c.squares,
                    },
                    calibration: c.calibration.as_ref().map(RawCalibration::from_config),
                    stack: Some(c.vref.stack.to_string()),
                },
                predicted: RawPredictedOut::from_predictions(&result.predictions),
            };
            toml::to_string(&out).map_err(|e| Error::config(e.to_string()))?
        }
    };
    Ok(text)
}

pub fn save_sized_design(
    path: &Path,
    result: &SizingResult,
    name: &str,
    deck: &TechDeck,
) -> Result<()> {
    std::fs::write(path, sized_design_to_toml(result, name, deck)?)?;
    Ok(())
}
