//! Scenario files: TOML with unit-suffixed quantities, or a resolved JSON
//! scenario (as embedded in `summary.json`).

use std::path::Path;

use retro_wpt::experiments::{log_grid, ErLayout, InitRule, Scenario, Targets};
use retro_wpt::power_control::Measurement;
use retro_wpt::{PathLossModel, SystemParams};
use serde::Deserialize;

use crate::units::{Gain, Power, Psd};
use crate::CliError;

pub const PRESETS: [(&str, &str); 3] = [
    ("fig2", include_str!("../scenarios/fig2.toml")),
    ("fig3", include_str!("../scenarios/fig3.toml")),
    ("fig4", include_str!("../scenarios/fig4.toml")),
];

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    name: Option<String>,
    #[serde(default)]
    seed: u64,
    system: SystemSection,
    path_loss: PathLossSection,
    receivers: ReceiversSection,
    targets: TargetsSection,
    #[serde(default)]
    control: ControlSection,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SystemSection {
    antennas: usize,
    transmit_power: Power,
    max_beacon_power: Power,
    beacon_duration: f64,
    noise_psd: Psd,
    #[serde(default)]
    carrier_frequency: f64,
    efficiency: Option<Efficiency>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum Efficiency {
    Common(f64),
    PerEr(Vec<f64>),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PathLossSection {
    c0: Gain,
    r0: f64,
    alpha: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ReceiversSection {
    distances: Option<Vec<f64>>,
    uniform: Option<UniformSection>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct UniformSection {
    lo: f64,
    hi: f64,
    count: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TargetsSection {
    common: Option<Power>,
    per_er: Option<Vec<Power>>,
    grid: Option<Grid>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum Grid {
    List(Vec<Power>),
    LogSpaced { from: Power, to: Power, points: usize },
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ControlSection {
    init: Option<Init>,
    iterations: Option<usize>,
    tolerance: Option<f64>,
    measurement: Option<String>,
    trials: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum Init {
    Fraction(f64),
    Rule(String),
    Explicit(Vec<Power>),
}

/// `asymptotic`, `exact` (one draw per block) or `exact_averaged:N`.
pub fn parse_measurement(s: &str) -> Result<Measurement, String> {
    match s.trim() {
        "asymptotic" => Ok(Measurement::Asymptotic),
        "exact" | "exact_per_block" => Ok(Measurement::ExactPerBlock),
        other => match other.strip_prefix("exact_averaged:").map(str::parse::<usize>) {
            Some(Ok(n)) if n > 0 => Ok(Measurement::ExactAveraged(n)),
            _ => Err(format!(
                "unknown mode {other:?}; expected asymptotic, exact or exact_averaged:N"
            )),
        },
    }
}

pub fn measurement_label(m: Measurement) -> String {
    match m {
        Measurement::Asymptotic => "asymptotic".into(),
        Measurement::ExactPerBlock => "exact".into(),
        Measurement::ExactAveraged(n) => format!("exact_averaged:{n}"),
    }
}

impl ConfigFile {
    fn into_scenario(self, default_name: &str) -> Result<Scenario, Vec<String>> {
        let mut errors = Vec::new();
        let layout = match (self.receivers.distances, self.receivers.uniform) {
            (Some(distances), None) => Some(ErLayout::Explicit { distances }),
            (None, Some(u)) => Some(ErLayout::Uniform {
                lo: u.lo,
                hi: u.hi,
                count: u.count,
            }),
            _ => {
                errors.push("[receivers] needs exactly one of `distances` or `uniform`".to_string());
                None
            }
        };
        let targets = match (self.targets.common, self.targets.per_er, self.targets.grid) {
            (Some(q), None, None) => Some(Targets::Common(q.0)),
            (None, Some(v), None) => Some(Targets::PerEr(v.into_iter().map(|p| p.0).collect())),
            (None, None, Some(Grid::List(v))) => Some(Targets::Grid(v.into_iter().map(|p| p.0).collect())),
            (None, None, Some(Grid::LogSpaced { from, to, points })) => Some(Targets::Grid(log_grid(from.0, to.0, points))),
            _ => {
                errors.push("[targets] needs exactly one of `common`, `per_er` or `grid`".to_string());
                None
            }
        };
        let init = match self.control.init {
            None => InitRule::MaxPower,
            Some(Init::Rule(r)) if r == "max" => InitRule::MaxPower,
            Some(Init::Rule(r)) => {
                errors.push(format!("[control] init {r:?} is not \"max\", a fraction or a list of powers"));
                InitRule::MaxPower
            }
            Some(Init::Fraction(f)) => InitRule::FractionOfMax(f),
            Some(Init::Explicit(v)) => InitRule::Explicit(v.into_iter().map(|p| p.0).collect()),
        };
        let measurement = match self.control.measurement.as_deref().map(parse_measurement) {
            None => Measurement::Asymptotic,
            Some(Ok(m)) => m,
            Some(Err(e)) => {
                errors.push(format!("[control] measurement: {e}"));
                Measurement::Asymptotic
            }
        };
        let (Some(layout), Some(targets)) = (layout, targets) else {
            return Err(errors);
        };
        if !errors.is_empty() {
            return Err(errors);
        }
        let count = layout.count();
        let sweep = matches!(layout, ErLayout::Uniform { .. });
        let efficiency = self.system.efficiency.map(|e| match e {
            Efficiency::Common(x) => vec![x; count],
            Efficiency::PerEr(v) => v,
        });
        Ok(Scenario {
            name: self.name.unwrap_or_else(|| default_name.to_string()),
            params: SystemParams {
                antennas: self.system.antennas,
                transmit_power: self.system.transmit_power.0,
                max_beacon_power: self.system.max_beacon_power.0,
                beacon_duration: self.system.beacon_duration,
                noise_psd: self.system.noise_psd.0,
                efficiency,
                carrier_frequency: self.system.carrier_frequency,
            },
            path_loss: PathLossModel {
                c0: self.path_loss.c0.0,
                r0: self.path_loss.r0,
                alpha: self.path_loss.alpha,
            },
            layout,
            targets,
            init,
            measurement,
            iterations: self.control.iterations.unwrap_or(if sweep {
                retro_wpt::experiments::SWEEP_UPDATES
            } else {
                retro_wpt::power_control::DEFAULT_MAX_ITERS
            }),
            tolerance: self.control.tolerance.unwrap_or(retro_wpt::power_control::DEFAULT_TOLERANCE),
            trials: self.control.trials.unwrap_or(1),
            seed: self.seed,
        })
    }
}

/// Where a scenario came from, kept for error messages.
#[derive(Debug, Clone)]
pub struct Source {
    pub label: String,
    pub toml: Option<String>,
}

/// Parses `key=value`.
pub fn parse_override(s: &str) -> Result<(String, String), String> {
    match s.split_once('=') {
        Some((k, v)) if !k.trim().is_empty() => Ok((k.trim().to_string(), v.trim().to_string())),
        _ => Err(format!("expected key=value, got {s:?}")),
    }
}

fn toml_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

fn set_toml(table: &mut toml::Table, key: &str, raw: &str) -> Result<(), String> {
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts.pop().unwrap();
    let mut cur = table;
    for p in parts {
        cur = cur
            .entry(p)
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| format!("--set {key}: {p} is not a table"))?;
    }
    cur.insert(last.to_string(), toml_value(raw));
    Ok(())
}

fn set_json(value: &mut serde_json::Value, key: &str, raw: &str) -> Result<(), String> {
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts.pop().unwrap();
    let mut cur = value;
    for p in parts {
        cur = cur
            .get_mut(p)
            .ok_or_else(|| format!("--set {key}: no field {p}"))?;
    }
    let obj = cur.as_object_mut().ok_or_else(|| format!("--set {key}: not an object"))?;
    let parsed = serde_json::from_str(raw).unwrap_or_else(|_| serde_json::Value::String(raw.to_string()));
    obj.insert(last.to_string(), parsed);
    Ok(())
}

fn from_toml(label: &str, text: &str, overrides: &[(String, String)]) -> Result<(Scenario, Source), CliError> {
    let at = |e: toml::de::Error| CliError::Validation(vec![format!("{label}: {}", e.to_string().trim_end())]);
    let cfg: ConfigFile = if overrides.is_empty() {
        toml::from_str(text).map_err(at)?
    } else {
        let mut table: toml::Table = toml::from_str(text).map_err(at)?;
        for (k, v) in overrides {
            set_toml(&mut table, k, v).map_err(CliError::Usage)?;
        }
        table.try_into().map_err(|e: toml::de::Error| {
            CliError::Validation(vec![format!("{label} (after --set): {}", e.to_string().trim_end())])
        })?
    };
    let stem = Path::new(label).file_stem().and_then(|s| s.to_str()).unwrap_or(label);
    let scenario = cfg
        .into_scenario(stem)
        .map_err(|errs| CliError::Validation(errs.into_iter().map(|e| format!("{label}: {e}")).collect()))?;
    Ok((
        scenario,
        Source {
            label: label.to_string(),
            toml: Some(text.to_string()),
        },
    ))
}

fn from_json(label: &str, text: &str, overrides: &[(String, String)]) -> Result<(Scenario, Source), CliError> {
    let bad = |e: serde_json::Error| CliError::Validation(vec![format!("{label}:{}: {e}", e.line())]);
    let mut value: serde_json::Value = serde_json::from_str(text).map_err(bad)?;
    // accept a summary.json and pull out its embedded scenario
    if let Some(inner) = value.get("scenario").cloned() {
        value = inner;
    }
    for (k, v) in overrides {
        set_json(&mut value, k, v).map_err(CliError::Usage)?;
    }
    let scenario = serde_json::from_value(value).map_err(bad)?;
    Ok((
        scenario,
        Source {
            label: label.to_string(),
            toml: None,
        },
    ))
}

/// Resolves `--scenario` (a preset name or a file path) and applies overrides.
pub fn load(name: &str, overrides: &[(String, String)]) -> Result<(Scenario, Source), CliError> {
    if let Some((name, text)) = PRESETS.iter().find(|(n, _)| *n == name) {
        return from_toml(&format!("{name}.toml"), text, overrides);
    }
    let path = Path::new(name);
    if !path.is_file() {
        let names: Vec<&str> = PRESETS.iter().map(|(n, _)| *n).collect();
        return Err(CliError::Usage(format!(
            "unknown scenario {name:?}: not a preset ({}) or a readable file",
            names.join(", ")
        )));
    }
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{name}: {e}")))?;
    if path.extension().is_some_and(|e| e == "json") {
        from_json(name, &text, overrides)
    } else {
        from_toml(name, &text, overrides)
    }
}

fn config_key(name: &str) -> Option<(&'static str, &'static [&'static str])> {
    Some(match name {
        "antennas" => ("system", &["antennas"]),
        "transmit_power" => ("system", &["transmit_power"]),
        "max_beacon_power" => ("system", &["max_beacon_power"]),
        "beacon_duration" => ("system", &["beacon_duration"]),
        "noise_psd" => ("system", &["noise_psd"]),
        "efficiency" => ("system", &["efficiency"]),
        "c0" => ("path_loss", &["c0"]),
        "r0" => ("path_loss", &["r0"]),
        "alpha" => ("path_loss", &["alpha"]),
        "distance" | "layout" | "betas" => ("receivers", &["distances", "uniform"]),
        "target" | "targets" | "per-ER targets" => ("targets", &["common", "per_er", "grid"]),
        "init" | "initial beacon powers" | "beacon power" => ("control", &["init"]),
        "iterations" => ("control", &["iterations"]),
        "tolerance" => ("control", &["tolerance"]),
        "trials" => ("control", &["trials"]),
        "measurement" => ("control", &["measurement"]),
        _ => return None,
    })
}

/// 1-based line of `key` inside `[section]`, or of the section header.
pub fn locate(text: &str, section: &str, keys: &[&str]) -> Option<usize> {
    let mut current = String::new();
    let mut header = None;
    for (i, line) in text.lines().enumerate() {
        let t = line.trim();
        if let Some(name) = t.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            current = name.trim().to_string();
            if current == section {
                header = Some(i + 1);
            }
            continue;
        }
        if current == section {
            if let Some((k, _)) = t.split_once('=') {
                if keys.contains(&k.trim()) {
                    return Some(i + 1);
                }
            }
        }
    }
    header
}

/// Formats a scenario invariant violation, anchored to a line when the
/// scenario came from a TOML file.
pub fn anchor(source: &Source, err: &retro_wpt::Error) -> String {
    let name = match err {
        retro_wpt::Error::Domain { name, .. } => *name,
        retro_wpt::Error::Dimension { what, .. } => *what,
        _ => "",
    };
    let line = source
        .toml
        .as_deref()
        .zip(config_key(name))
        .and_then(|(text, (section, keys))| locate(text, section, keys));
    match line {
        Some(l) => format!("{}:{l}: {err}", source.label),
        None => format!("{}: {err}", source.label),
    }
}
