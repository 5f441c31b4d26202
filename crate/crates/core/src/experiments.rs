//! Scenario runners for the convergence traces and the fairness sweep.

use rand_distr::{Distribution, Uniform};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::PathLossModel;
use crate::error::{domain, Error, Result};
use crate::power_control::{
    run_distributed_control, ControlSettings, ControlTrace, HarvestMeter, Measurement, DEFAULT_MAX_ITERS,
    DEFAULT_TOLERANCE,
};
use crate::retro::{BeaconPowerVector, SystemParams};
use crate::rng::{derive_seed, stream_rng, STREAM_PLACEMENT};

/// Relative slack when deciding whether `Q_k` reached its target, so a
/// receiver sitting exactly on its target is not lost to rounding.
pub const ACHIEVE_REL_TOL: f64 = 1e-9;

/// Number of distributed updates before the sweep scores each trial.
pub const SWEEP_UPDATES: usize = 20;

/// Where the ERs are.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErLayout {
    /// Fixed distances in meters.
    Explicit { distances: Vec<f64> },
    /// `count` distances drawn independently, uniform on `[lo, hi]` meters, per trial.
    Uniform { lo: f64, hi: f64, count: usize },
}

impl ErLayout {
    pub fn count(&self) -> usize {
        match self {
            ErLayout::Explicit { distances } => distances.len(),
            ErLayout::Uniform { count, .. } => *count,
        }
    }
}

/// Harvested-power targets `Qbar_k`, watts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Targets {
    Common(f64),
    PerEr(Vec<f64>),
    /// A list of common targets to sweep over.
    Grid(Vec<f64>),
}

impl Targets {
    /// Per-ER targets for a single run.
    pub fn resolve(&self, count: usize) -> Result<Vec<f64>> {
        match self {
            Targets::Common(q) => Ok(vec![*q; count]),
            Targets::PerEr(v) if v.len() == count => Ok(v.clone()),
            Targets::PerEr(v) => Err(Error::Dimension {
                what: "per-ER targets",
                expected: count,
                actual: v.len(),
            }),
            Targets::Grid(_) => Err(domain("targets", "a target grid only applies to sweeps")),
        }
    }

    /// Common targets to sweep over.
    pub fn grid(&self) -> Result<Vec<f64>> {
        match self {
            Targets::Common(q) => Ok(vec![*q]),
            Targets::Grid(g) => Ok(g.clone()),
            Targets::PerEr(_) => Err(domain("targets", "a sweep needs a common target or a grid")),
        }
    }
}

/// Starting beacon powers `p[1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitRule {
    /// Every ER starts at `P_max`.
    MaxPower,
    /// Every ER starts at this fraction of `P_max`.
    FractionOfMax(f64),
    /// Explicit powers in watts.
    Explicit(Vec<f64>),
}

impl InitRule {
    pub fn resolve(&self, count: usize, max_beacon_power: f64) -> Result<BeaconPowerVector> {
        let powers = match self {
            InitRule::MaxPower => vec![max_beacon_power; count],
            InitRule::FractionOfMax(f) => {
                if !(*f > 0.0 && *f <= 1.0) {
                    return Err(domain("init", format!("fraction must be in (0, 1], got {f}")));
                }
                vec![f * max_beacon_power; count]
            }
            InitRule::Explicit(v) => {
                crate::error::check_len("initial beacon powers", count, v.len())?;
                v.clone()
            }
        };
        if let Some(p) = powers.iter().find(|p| !(**p > 0.0)) {
            return Err(domain("init", format!("initial beacon powers must be positive, got {p}")));
        }
        BeaconPowerVector::new(powers, max_beacon_power)
    }
}

/// A fully resolved, linear-unit experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub params: SystemParams,
    pub path_loss: PathLossModel,
    pub layout: ErLayout,
    pub targets: Targets,
    pub init: InitRule,
    pub measurement: Measurement,
    /// Iteration budget: maximum blocks for convergence runs, number of
    /// updates for sweeps.
    pub iterations: usize,
    /// Convergence tolerance (relative sup-norm step).
    pub tolerance: f64,
    /// Monte-Carlo repetitions (sweeps only).
    pub trials: usize,
    pub seed: u64,
}

/// `points` log-spaced values from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.log10(), hi.log10());
            (0..points)
                .map(|i| 10f64.powf(a + (b - a) * i as f64 / (points - 1) as f64))
                .collect()
        }
    }
}

impl Scenario {
    fn convergence_preset(name: &str, target: f64) -> Scenario {
        Scenario {
            name: name.to_string(),
            params: SystemParams::default(),
            path_loss: PathLossModel::default(),
            layout: ErLayout::Explicit {
                distances: vec![5.0, 10.0, 15.0],
            },
            targets: Targets::Common(target),
            init: InitRule::MaxPower,
            measurement: Measurement::Asymptotic,
            iterations: DEFAULT_MAX_ITERS,
            tolerance: DEFAULT_TOLERANCE,
            trials: 1,
            seed: 0,
        }
    }

    /// Three ERs at 5, 10 and 15 m with a common 0.1 mW target.
    pub fn fig2() -> Scenario {
        Self::convergence_preset("fig2", 1e-4)
    }

    /// As [`Scenario::fig2`] with a common 0.24 mW target.
    pub fn fig3() -> Scenario {
        Self::convergence_preset("fig3", 2.4e-4)
    }

    /// Thirty ERs uniform on 5-15 m, 5000 trials, 20 updates, 21 targets from 1 uW to 1 mW.
    pub fn fig4() -> Scenario {
        Scenario {
            name: "fig4".to_string(),
            layout: ErLayout::Uniform {
                lo: 5.0,
                hi: 15.0,
                count: 30,
            },
            targets: Targets::Grid(log_grid(1e-6, 1e-3, 21)),
            iterations: SWEEP_UPDATES,
            trials: 5000,
            ..Self::convergence_preset("fig4", 0.0)
        }
    }

    pub fn is_sweep(&self) -> bool {
        matches!(self.layout, ErLayout::Uniform { .. })
    }

    /// Every invariant violation, in field order.
    pub fn violations(&self) -> Vec<Error> {
        let mut out = self.params.violations();
        if let Err(e) = self.path_loss.validate() {
            out.push(e);
        }
        let k = self.layout.count();
        if k == 0 {
            out.push(domain("layout", "need at least one ER"));
        }
        if let Some(eta) = &self.params.efficiency {
            if eta.len() != k {
                out.push(Error::Dimension {
                    what: "efficiency",
                    expected: k,
                    actual: eta.len(),
                });
            }
        }
        match &self.layout {
            ErLayout::Explicit { distances } => {
                for (i, &r) in distances.iter().enumerate() {
                    if !(r.is_finite() && r > 0.0) {
                        out.push(domain("distance", format!("ER {} has {r} m, expected > 0", i + 1)));
                    }
                }
                match self.targets.resolve(k) {
                    Ok(targets) if out.is_empty() => {
                        for (i, (&r, &t)) in distances.iter().zip(&targets).enumerate() {
                            if let Err(e) = crate::power_control::ErProfile::new(i, r, t, &self.path_loss, &self.params) {
                                out.push(e);
                            }
                        }
                    }
                    Ok(_) => {}
                    Err(e) => out.push(e),
                }
            }
            ErLayout::Uniform { lo, hi, .. } => {
                if !(lo.is_finite() && *lo > 0.0 && hi.is_finite() && hi >= lo) {
                    out.push(domain("layout", format!("uniform range [{lo}, {hi}] m is invalid")));
                }
                match self.targets.grid() {
                    Ok(g) if g.iter().any(|t| !(t.is_finite() && *t >= 0.0)) => {
                        out.push(domain("targets", "grid values must be finite and non-negative"))
                    }
                    Ok(_) => {}
                    Err(e) => out.push(e),
                }
                if self.trials == 0 {
                    out.push(domain("trials", "must be at least 1"));
                }
            }
        }
        if self.iterations == 0 {
            out.push(domain("iterations", "must be at least 1"));
        }
        if !(self.tolerance.is_finite() && self.tolerance >= 0.0) {
            out.push(domain("tolerance", "must be finite and non-negative"));
        }
        if k > 0 {
            if let Err(e) = self.init.resolve(k, self.params.max_beacon_power) {
                out.push(e);
            }
        }
        if self.measurement == Measurement::ExactAveraged(0) {
            out.push(domain("measurement", "averaging needs at least one block"));
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        match self.violations().into_iter().next() {
            Some(e) => Err(e),
            None => Ok(()),
        }
    }

    /// Large-scale gains of an explicit layout.
    pub fn betas(&self) -> Result<Vec<f64>> {
        match &self.layout {
            ErLayout::Explicit { distances } => self.path_loss.gains(distances),
            ErLayout::Uniform { .. } => Err(domain("layout", "random layouts have per-trial gains")),
        }
    }

    fn trial_distances(&self, trial: u64) -> Result<Vec<f64>> {
        match &self.layout {
            ErLayout::Explicit { distances } => Ok(distances.clone()),
            ErLayout::Uniform { lo, hi, count } => {
                let dist = Uniform::new_inclusive(*lo, *hi).map_err(|e| domain("layout", e.to_string()))?;
                let mut rng = stream_rng(derive_seed(self.seed, trial), STREAM_PLACEMENT);
                Ok((0..*count).map(|_| dist.sample(&mut rng)).collect())
            }
        }
    }
}

/// Runs the distributed update on an explicit layout and records every block.
pub fn run_convergence_scenario(sc: &Scenario) -> Result<ControlTrace> {
    sc.validate()?;
    let betas = sc.betas()?;
    let targets = sc.targets.resolve(betas.len())?;
    let p_init = sc.init.resolve(betas.len(), sc.params.max_beacon_power)?;
    let meter = HarvestMeter::new(sc.params.clone(), betas, sc.measurement, sc.seed)?;
    let settings = ControlSettings {
        max_iters: sc.iterations,
        tolerance: sc.tolerance,
    };
    run_distributed_control(&meter, &targets, &p_init, settings)
}

/// Beacon-power policy compared in a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Distributed update started from the scenario's init rule.
    Proposed,
    /// Every ER fixed at `fraction * P_max`.
    FixedPower { fraction: f64 },
}

impl Scheme {
    pub fn label(&self) -> String {
        match self {
            Scheme::Proposed => "proposed".to_string(),
            Scheme::FixedPower { fraction } if *fraction == 1.0 => "fixed_pmax".to_string(),
            Scheme::FixedPower { fraction } => format!("fixed_{fraction}_pmax"),
        }
    }
}

/// Achievement percentages of one scheme over the target grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeCurve {
    pub scheme: Scheme,
    /// Mean over trials of the percentage of ERs reaching the target.
    pub pct_achieving: Vec<f64>,
    /// Sample standard deviation of the per-trial percentage.
    pub stddev: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub target_grid: Vec<f64>,
    pub curves: Vec<SchemeCurve>,
    pub n_trials: usize,
    pub seed: u64,
}

impl SweepResult {
    pub fn curve(&self, scheme: Scheme) -> Option<&SchemeCurve> {
        self.curves.iter().find(|c| c.scheme == scheme)
    }
}

fn count_achieving(harvest: &[f64], target: f64) -> usize {
    harvest.iter().filter(|&&q| q >= target * (1.0 - ACHIEVE_REL_TOL)).count()
}

/// Per-trial percentages, indexed `[scheme][target]`.
fn run_trial(sc: &Scenario, trial: u64, schemes: &[Scheme], grid: &[f64]) -> Result<Vec<Vec<f64>>> {
    let distances = sc.trial_distances(trial)?;
    let k = distances.len();
    let betas = sc.path_loss.gains(&distances)?;
    let meter = HarvestMeter::new(sc.params.clone(), betas, sc.measurement, derive_seed(derive_seed(sc.seed, trial), 1))?;
    let pct = |n: usize| 100.0 * n as f64 / k as f64;
    schemes
        .iter()
        .map(|scheme| match scheme {
            Scheme::Proposed => {
                let p_init = sc.init.resolve(k, sc.params.max_beacon_power)?;
                let settings = ControlSettings {
                    max_iters: sc.iterations + 1,
                    tolerance: 0.0,
                };
                grid.iter()
                    .map(|&target| {
                        let trace = run_distributed_control(&meter, &vec![target; k], &p_init, settings)?;
                        Ok(pct(count_achieving(&trace.last().harvest.total, target)))
                    })
                    .collect()
            }
            Scheme::FixedPower { fraction } => {
                let p = BeaconPowerVector::uniform(k, fraction * sc.params.max_beacon_power, sc.params.max_beacon_power)?;
                let harvest = meter.measure(&p, 1)?;
                Ok(grid.iter().map(|&t| pct(count_achieving(&harvest.total, t))).collect())
            }
        })
        .collect()
}

fn sweep(sc: &Scenario, schemes: &[Scheme], grid: &[f64]) -> Result<SweepResult> {
    sc.validate()?;
    if let Some(Scheme::FixedPower { fraction }) = schemes
        .iter()
        .find(|s| matches!(s, Scheme::FixedPower { fraction } if !(*fraction > 0.0 && *fraction <= 1.0)))
    {
        return Err(domain("fraction", format!("must be in (0, 1], got {fraction}")));
    }
    let trials: Vec<Vec<Vec<f64>>> = (0..sc.trials as u64)
        .into_par_iter()
        .map(|t| run_trial(sc, t, schemes, grid))
        .collect::<Result<_>>()?;
    let n = trials.len() as f64;
    let curves = schemes
        .iter()
        .enumerate()
        .map(|(s, &scheme)| {
            let mut mean = vec![0.0; grid.len()];
            for trial in &trials {
                for (m, x) in mean.iter_mut().zip(&trial[s]) {
                    *m += x;
                }
            }
            mean.iter_mut().for_each(|m| *m /= n);
            let stddev = (0..grid.len())
                .map(|j| {
                    if trials.len() < 2 {
                        return 0.0;
                    }
                    let ss: f64 = trials.iter().map(|t| (t[s][j] - mean[j]).powi(2)).sum();
                    (ss / (n - 1.0)).sqrt()
                })
                .collect();
            SchemeCurve {
                scheme,
                pct_achieving: mean,
                stddev,
            }
        })
        .collect();
    Ok(SweepResult {
        target_grid: grid.to_vec(),
        curves,
        n_trials: sc.trials,
        seed: sc.seed,
    })
}

/// Percentage of ERs reaching each common target under the distributed
/// update and the two fixed-power benchmarks (`P_max` and `0.1 P_max`).
pub fn run_fairness_sweep(sc: &Scenario, target_grid: &[f64]) -> Result<SweepResult> {
    sweep(
        sc,
        &[
            Scheme::Proposed,
            Scheme::FixedPower { fraction: 1.0 },
            Scheme::FixedPower { fraction: 0.1 },
        ],
        target_grid,
    )
}

/// The sweep pipeline with every ER fixed at `fraction * P_max`.
pub fn benchmark_fixed_power(sc: &Scenario, fraction: f64, target_grid: &[f64]) -> Result<SweepResult> {
    sweep(sc, &[Scheme::FixedPower { fraction }], target_grid)
}
