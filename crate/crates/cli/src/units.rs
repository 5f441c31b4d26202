//! Unit-suffixed quantities accepted in scenario files.
//!
//! Bare numbers are taken as linear SI values. Strings carry a number and a
//! unit: powers accept `W`, `mW`, `uW`, `nW`, `dBW`, `dBm`; spectral densities
//! accept `W/Hz`, `mW/Hz`, `dBW/Hz`, `dBm/Hz`; gains accept `dB` or no unit.

use serde::{Deserialize, Deserializer};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("cannot read {input:?} as {kind}: {reason}")]
pub struct UnitError {
    pub input: String,
    pub kind: &'static str,
    pub reason: String,
}

fn split(input: &str, kind: &'static str) -> Result<(f64, String), UnitError> {
    let s = input.trim();
    // 'e' is an exponent marker; no unit starts with it
    let at = s
        .find(|c: char| (c.is_alphabetic() && c != 'e' && c != 'E') || c == 'µ')
        .unwrap_or(s.len());
    let (num, unit) = s.split_at(at);
    let value = num.trim().parse::<f64>().map_err(|e| UnitError {
        input: input.to_string(),
        kind,
        reason: e.to_string(),
    })?;
    Ok((value, unit.trim().to_string()))
}

fn bad_unit(input: &str, kind: &'static str, unit: &str) -> UnitError {
    UnitError {
        input: input.to_string(),
        kind,
        reason: format!("unknown unit {unit:?}"),
    }
}

fn db(x: f64) -> f64 {
    10f64.powf(x / 10.0)
}

/// Power in watts.
pub fn parse_power(input: &str) -> Result<f64, UnitError> {
    let (v, unit) = split(input, "power")?;
    Ok(match unit.as_str() {
        "" | "W" => v,
        "mW" => v * 1e-3,
        "uW" | "µW" => v * 1e-6,
        "nW" => v * 1e-9,
        "dBW" => db(v),
        "dBm" => db(v - 30.0),
        other => return Err(bad_unit(input, "power", other)),
    })
}

/// Power spectral density in W/Hz.
pub fn parse_psd(input: &str) -> Result<f64, UnitError> {
    let (v, unit) = split(input, "power spectral density")?;
    Ok(match unit.as_str() {
        "" | "W/Hz" => v,
        "mW/Hz" => v * 1e-3,
        "dBW/Hz" => db(v),
        "dBm/Hz" => db(v - 30.0),
        other => return Err(bad_unit(input, "power spectral density", other)),
    })
}

/// Dimensionless gain, linear.
pub fn parse_gain(input: &str) -> Result<f64, UnitError> {
    let (v, unit) = split(input, "gain")?;
    match unit.as_str() {
        "" => Ok(v),
        "dB" => Ok(db(v)),
        other => Err(bad_unit(input, "gain", other)),
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Raw {
    Num(f64),
    Int(i64),
    Str(String),
}

fn with_parser<'de, D: Deserializer<'de>>(d: D, parse: fn(&str) -> Result<f64, UnitError>) -> Result<f64, D::Error> {
    match Raw::deserialize(d)? {
        Raw::Num(v) => Ok(v),
        Raw::Int(v) => Ok(v as f64),
        Raw::Str(s) => parse(&s).map_err(serde::de::Error::custom),
    }
}

macro_rules! quantity {
    ($name:ident, $parse:ident) => {
        #[derive(Debug, Clone, Copy, PartialEq)]
        pub struct $name(pub f64);

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                with_parser(d, $parse).map($name)
            }
        }
    };
}

quantity!(Power, parse_power);
quantity!(Psd, parse_psd);
quantity!(Gain, parse_gain);
