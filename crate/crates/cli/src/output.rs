//! CSV and JSON writers. Every file carries the resolved scenario and seed.

use std::fmt::Write as _;
use std::path::Path;

use retro_wpt::experiments::{InitRule, Scenario, SweepResult};
use retro_wpt::ControlTrace;
use serde_json::json;

use crate::config::measurement_label;

fn provenance(sc: &Scenario) -> String {
    format!(
        "# {} {}\n# seed={} mode={}\n# scenario={}\n",
        env!("CARGO_PKG_NAME"),
        env!("CARGO_PKG_VERSION"),
        sc.seed,
        measurement_label(sc.measurement),
        serde_json::to_string(sc).expect("scenario serializes"),
    )
}

fn init_label(init: &InitRule) -> String {
    match init {
        InitRule::MaxPower => "p_max".into(),
        InitRule::FractionOfMax(f) => format!("{f:e}*p_max"),
        InitRule::Explicit(_) => "explicit".into(),
    }
}

/// `iteration,er_id,beacon_power_w,harvested_power_w,capped`, ER ids from 1.
pub fn trace_csv(sc: &Scenario, trace: &ControlTrace) -> String {
    let mut out = provenance(sc);
    out.push_str("iteration,er_id,beacon_power_w,harvested_power_w,capped\n");
    let p_max = sc.params.max_beacon_power;
    for it in &trace.iterations {
        for (k, (&p, &q)) in it.powers.as_slice().iter().zip(&it.harvest.total).enumerate() {
            writeln!(out, "{},{},{:e},{:e},{}", it.block, k + 1, p, q, u8::from(p == p_max)).unwrap();
        }
    }
    out
}

pub fn trace_summary(sc: &Scenario, trace: &ControlTrace) -> serde_json::Value {
    json!({
        "kind": "convergence",
        "seed": sc.seed,
        "mode": measurement_label(sc.measurement),
        "converged": trace.converged,
        "iterations": trace.iterations.len(),
        "p_star": trace.p_star,
        "capped_set": trace.capped.iter().map(|k| k + 1).collect::<Vec<_>>(),
        "harvested_at_p_star": trace.last().harvest.total,
        "targets": trace.targets,
        "isotropic_floors": trace.floors,
        "p_init": init_label(&sc.init),
        "scenario": sc,
    })
}

/// `target_w,scheme,pct_achieving,stddev`.
pub fn sweep_csv(sc: &Scenario, res: &SweepResult) -> String {
    let mut out = provenance(sc);
    out.push_str("target_w,scheme,pct_achieving,stddev\n");
    for (j, t) in res.target_grid.iter().enumerate() {
        for c in &res.curves {
            writeln!(out, "{:e},{},{:e},{:e}", t, c.scheme.label(), c.pct_achieving[j], c.stddev[j]).unwrap();
        }
    }
    out
}

pub fn sweep_summary(sc: &Scenario, res: &SweepResult) -> serde_json::Value {
    json!({
        "kind": "sweep",
        "seed": sc.seed,
        "mode": measurement_label(sc.measurement),
        "n_trials": res.n_trials,
        "updates_per_trial": sc.iterations,
        "p_init": init_label(&sc.init),
        "schemes": res.curves.iter().map(|c| c.scheme.label()).collect::<Vec<_>>(),
        "target_grid": res.target_grid,
        "scenario": sc,
    })
}

pub fn write_all(dir: &Path, files: &[(&str, String)]) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    for (name, body) in files {
        std::fs::write(dir.join(name), body)?;
    }
    Ok(())
}
