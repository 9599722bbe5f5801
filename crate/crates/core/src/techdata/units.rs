//! Unit-tagged quantity parsing for deck and design files.
//!
//! Every dimensioned numeric field is written as `"<number> <unit>"`; the
//! expected dimension is fixed per field, and a value carrying a unit of
//! the wrong dimension is a load error. Tempco sign and unit mistakes are
//! the dominant failure mode in this domain, so nothing is inferred.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dimension {
    Voltage,
    Current,
    TemperatureK,
    VoltPerKelvin,
    PerKelvin,
    PerKelvin2,
    SheetResistance,
    LengthUm,
    VoltMicron,
    VoltPerMicron,
    PerVolt,
    Watt,
    CurrentPerKelvin,
}

impl Dimension {
    pub fn name(&self) -> &'static str {
        match self {
            Dimension::Voltage => "voltage",
            Dimension::Current => "current",
            Dimension::TemperatureK => "absolute temperature",
            Dimension::VoltPerKelvin => "voltage tempco",
            Dimension::PerKelvin => "relative tempco",
            Dimension::PerKelvin2 => "second-order relative tempco",
            Dimension::SheetResistance => "sheet resistance",
            Dimension::LengthUm => "length",
            Dimension::VoltMicron => "mismatch area coefficient",
            Dimension::VoltPerMicron => "Early voltage per length",
            Dimension::PerVolt => "per-volt sensitivity",
            Dimension::Watt => "power",
            Dimension::CurrentPerKelvin => "current tempco",
        }
    }

    /// Unit emitted by the writers; internal representation for the
    /// dimension.
    pub fn canonical_unit(&self) -> &'static str {
        match self {
            Dimension::Voltage => "V",
            Dimension::Current => "A",
            Dimension::TemperatureK => "K",
            Dimension::VoltPerKelvin => "V/K",
            Dimension::PerKelvin => "1/K",
            Dimension::PerKelvin2 => "1/K2",
            Dimension::SheetResistance => "ohm/sq",
            Dimension::LengthUm => "um",
            Dimension::VoltMicron => "V*um",
            Dimension::VoltPerMicron => "V/um",
            Dimension::PerVolt => "1/V",
            Dimension::Watt => "W",
            Dimension::CurrentPerKelvin => "A/K",
        }
    }
}

/// (dimension, unit text, scale to the internal representation).
/// Geometry stays in micrometres internally, so "um" scales to 1.
const UNIT_TABLE: &[(Dimension, &str, f64)] = &[
    (Dimension::Voltage, "V", 1.0),
    (Dimension::Voltage, "mV", 1e-3),
    (Dimension::Voltage, "uV", 1e-6),
    (Dimension::Current, "A", 1.0),
    (Dimension::Current, "mA", 1e-3),
    (Dimension::Current, "uA", 1e-6),
    (Dimension::Current, "nA", 1e-9),
    (Dimension::Current, "pA", 1e-12),
    (Dimension::TemperatureK, "K", 1.0),
    (Dimension::VoltPerKelvin, "V/K", 1.0),
    (Dimension::VoltPerKelvin, "mV/K", 1e-3),
    (Dimension::VoltPerKelvin, "uV/K", 1e-6),
    (Dimension::PerKelvin, "1/K", 1.0),
    (Dimension::PerKelvin, "ppm/K", 1e-6),
    (Dimension::PerKelvin, "ppm/degC", 1e-6),
    (Dimension::PerKelvin, "%/K", 1e-2),
    (Dimension::PerKelvin2, "1/K2", 1.0),
    (Dimension::PerKelvin2, "ppm/K2", 1e-6),
    (Dimension::PerKelvin2, "ppm/degC2", 1e-6),
    (Dimension::SheetResistance, "ohm/sq", 1.0),
    (Dimension::SheetResistance, "kohm/sq", 1e3),
    (Dimension::LengthUm, "um", 1.0),
    (Dimension::LengthUm, "nm", 1e-3),
    (Dimension::LengthUm, "mm", 1e3),
    (Dimension::VoltMicron, "V*um", 1.0),
    (Dimension::VoltMicron, "mV*um", 1e-3),
    (Dimension::VoltPerMicron, "V/um", 1.0),
    (Dimension::VoltPerMicron, "mV/um", 1e-3),
    (Dimension::PerVolt, "1/V", 1.0),
    (Dimension::PerVolt, "1/mV", 1e3),
    (Dimension::PerVolt, "%/V", 1e-2),
    (Dimension::PerVolt, "%/mV", 10.0),
    (Dimension::Watt, "W", 1.0),
    (Dimension::Watt, "uW", 1e-6),
    (Dimension::Watt, "nW", 1e-9),
    (Dimension::Watt, "pW", 1e-12),
    (Dimension::CurrentPerKelvin, "A/K", 1.0),
];

/// Parse `"<number> <unit>"` against the expected dimension, converting to
/// the internal representation. `field` names the offender in errors.
pub fn parse_quantity(raw: &str, dim: Dimension, field: &str) -> Result<f64> {
    let mut it = raw.split_whitespace();
    let (num, unit) = match (it.next(), it.next(), it.next()) {
        (Some(n), Some(u), None) => (n, u),
        _ => {
            return Err(Error::config(format!(
                "field '{field}': expected '<number> <unit>' (e.g. \"1.0 {}\"), got \"{raw}\"",
                dim.canonical_unit()
            )))
        }
    };
    let value: f64 = num.parse().map_err(|_| {
        Error::config(format!(
            "field '{field}': cannot parse number from \"{raw}\""
        ))
    })?;
    if let Some(&(_, _, scale)) = UNIT_TABLE.iter().find(|(d, u, _)| *d == dim && *u == unit) {
        return Ok(value * scale);
    }
    // wrong-dimension diagnostics
    if let Some(&(other, _, _)) = UNIT_TABLE.iter().find(|(_, u, _)| *u == unit) {
        return Err(Error::config(format!(
            "field '{field}': unit '{unit}' is a {} unit, but this field expects {} \
             (e.g. \"{}\")",
            other.name(),
            dim.name(),
            dim.canonical_unit()
        )));
    }
    Err(Error::config(format!(
        "field '{field}': unknown unit '{unit}' (expected a {} unit such as \"{}\")",
        dim.name(),
        dim.canonical_unit()
    )))
}

/// Render a value in the dimension's canonical unit with a shortest
/// round-trip number.
pub fn format_quantity(value: f64, dim: Dimension) -> String {
    format!("{} {}", value, dim.canonical_unit())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_scaled_units() {
        assert_eq!(
            parse_quantity("23.98 nA", Dimension::Current, "x").unwrap(),
            23.98e-9
        );
        assert_eq!(
            parse_quantity("0.82 mV/K", Dimension::VoltPerKelvin, "x").unwrap(),
            0.82e-3
        );
        assert_eq!(
            parse_quantity("102 ppm/degC", Dimension::PerKelvin, "x").unwrap(),
            102e-6
        );
        assert_eq!(
            parse_quantity("295 ohm/sq", Dimension::SheetResistance, "x").unwrap(),
            295.0
        );
        assert_eq!(
            parse_quantity("-30 mV", Dimension::Voltage, "x").unwrap(),
            -30e-3
        );
        assert_eq!(
            parse_quantity("5 %/mV", Dimension::PerVolt, "x").unwrap(),
            50.0
        );
    }

    #[test]
    fn rejects_wrong_dimension_with_diagnostic() {
        let err = parse_quantity("23.98 nA", Dimension::Voltage, "m1.v_t0_ref").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("m1.v_t0_ref"));
        assert!(msg.contains("current"));
        assert!(msg.contains("voltage"));
    }

    #[test]
    fn rejects_missing_or_unknown_unit() {
        assert!(parse_quantity("1.0", Dimension::Voltage, "x").is_err());
        assert!(parse_quantity("1.0 furlong", Dimension::Voltage, "x").is_err());
        assert!(parse_quantity("one V", Dimension::Voltage, "x").is_err());
    }

    #[test]
    fn format_round_trips_exactly() {
        for v in [0.1, 23.98e-9, 1.0 / 3.0, 6.02e23, -30e-3] {
            let s = format_quantity(v, Dimension::Voltage);
            assert_eq!(parse_quantity(&s, Dimension::Voltage, "x").unwrap(), v);
        }
    }
}
