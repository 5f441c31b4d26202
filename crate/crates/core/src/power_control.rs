//! Distributed beacon-power control and its centralized verifiers.
//!
//! Each ER scales its beacon power by the ratio of its beamed-power target to
//! the beamed power it just measured, capped at `P_max`:
//!
//! ```text
//! p_k[n+1] = min(P_max, qbar_k / q_k(p[n]) * p_k[n])
//! ```
//!
//! Under the large-array harvest model this is the capped iteration of the
//! standard interference function `I(p) = A (B p + eta)` held by
//! [`FeasibilityMatrices`], so it has a unique fixed point which
//! [`fixed_point_oracle`] computes directly.

use serde::{Deserialize, Serialize};

use crate::channel::{draw_beacon_noise, draw_channel, PathLossModel};
use crate::error::{check_len, domain, Error, Result};
use crate::retro::{harvested_power_asymptotic, harvested_power_exact, BeaconPowerVector, HarvestModel, HarvestReport, SystemParams};
use crate::rng::derive_seed;

/// Default relative sup-norm step below which the iteration stops.
pub const DEFAULT_TOLERANCE: f64 = 1e-9;
/// Default iteration budget.
pub const DEFAULT_MAX_ITERS: usize = 1000;
/// Absolute floor (watts) in the relative-change denominator.
pub const CHANGE_FLOOR_W: f64 = 1e-30;

/// Geometry and target of one ER.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErProfile {
    /// Distance to the ET in meters.
    pub distance: f64,
    /// Large-scale gain (linear).
    pub beta: f64,
    /// Harvested-power target `Qbar_k` in watts.
    pub target: f64,
    /// Beamed-power target `qbar_k = Qbar_k - eta_k P_t beta_k` in watts.
    pub beamed_target: f64,
}

impl ErProfile {
    /// Builds the profile of ER `k`, rejecting targets below its isotropic floor.
    pub fn new(k: usize, distance: f64, target: f64, path_loss: &PathLossModel, params: &SystemParams) -> Result<Self> {
        let beta = path_loss.gain(distance)?;
        let floor = params.efficiency(k) * params.transmit_power * beta;
        if !(target >= floor) {
            return Err(domain(
                "target",
                format!("ER {} target {target:e} W is below its isotropic floor {floor:e} W", k + 1),
            ));
        }
        Ok(ErProfile {
            distance,
            beta,
            target,
            beamed_target: target - floor,
        })
    }
}

/// How each ER obtains `Q_k(p[n])` at the end of a block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Measurement {
    /// Deterministic large-array value.
    #[default]
    Asymptotic,
    /// One fresh channel and noise draw per block.
    ExactPerBlock,
    /// Mean of this many independent draws per block.
    ExactAveraged(usize),
}

/// Produces per-block harvested-power measurements for a fixed ER layout.
#[derive(Debug, Clone)]
pub struct HarvestMeter {
    params: SystemParams,
    betas: Vec<f64>,
    measurement: Measurement,
    seed: u64,
}

impl HarvestMeter {
    pub fn new(params: SystemParams, betas: Vec<f64>, measurement: Measurement, seed: u64) -> Result<Self> {
        params.validate_for(betas.len())?;
        if betas.is_empty() {
            return Err(domain("betas", "need at least one ER"));
        }
        if let Some(b) = betas.iter().find(|b| !(b.is_finite() && **b >= 0.0)) {
            return Err(domain("beta", format!("must be finite and non-negative, got {b}")));
        }
        if measurement == Measurement::ExactAveraged(0) {
            return Err(domain("measurement", "averaging needs at least one block"));
        }
        Ok(HarvestMeter {
            params,
            betas,
            measurement,
            seed,
        })
    }

    pub fn params(&self) -> &SystemParams {
        &self.params
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    pub fn measurement(&self) -> Measurement {
        self.measurement
    }

    fn exact_draw(&self, p: &BeaconPowerVector, seed: u64) -> Result<HarvestReport> {
        let ch = draw_channel(&self.params, &self.betas, seed)?;
        let noise = draw_beacon_noise(&self.params, seed)?;
        harvested_power_exact(&ch, p, &noise, &self.params)
    }

    /// Harvested powers at the end of block `block` under beacon powers `p`.
    pub fn measure(&self, p: &BeaconPowerVector, block: u64) -> Result<HarvestReport> {
        let block_seed = derive_seed(self.seed, block);
        match self.measurement {
            Measurement::Asymptotic => harvested_power_asymptotic(&self.betas, p, &self.params),
            Measurement::ExactPerBlock => self.exact_draw(p, block_seed),
            Measurement::ExactAveraged(n) => {
                let mut total = vec![0.0; self.betas.len()];
                for i in 0..n {
                    let rep = self.exact_draw(p, derive_seed(block_seed, i as u64))?;
                    for (acc, q) in total.iter_mut().zip(rep.total) {
                        *acc += q;
                    }
                }
                total.iter_mut().for_each(|q| *q /= n as f64);
                let beamed = total
                    .iter()
                    .zip(&self.betas)
                    .enumerate()
                    .map(|(k, (q, b))| q - self.params.efficiency(k) * self.params.transmit_power * b)
                    .collect();
                Ok(HarvestReport {
                    total,
                    beamed,
                    model: HarvestModel::Exact,
                })
            }
        }
    }
}

/// Block-0 protocol: every ER stays silent and records what it harvests.
pub fn estimate_isotropic_floors(meter: &HarvestMeter) -> Result<Vec<f64>> {
    Ok(meter.measure(&BeaconPowerVector::zeros(meter.betas.len()), 0)?.total)
}

/// Isotropic floor measured by ER `k` in block 0.
pub fn estimate_isotropic_floor(meter: &HarvestMeter, k: usize) -> Result<f64> {
    if k >= meter.betas.len() {
        return Err(domain("er_index", format!("{k} out of range")));
    }
    Ok(estimate_isotropic_floors(meter)?[k])
}

/// One synchronous update of every ER's beacon power.
///
/// `measured` holds the beamed powers `q_k(p[n])`. ERs with a zero target go
/// silent; an ER at zero power stays there.
pub fn beacon_update_step(
    current: &BeaconPowerVector,
    measured: &[f64],
    beamed_targets: &[f64],
    max_beacon_power: f64,
) -> Result<BeaconPowerVector> {
    check_len("measured beamed powers", current.len(), measured.len())?;
    check_len("beamed targets", current.len(), beamed_targets.len())?;
    let mut next = Vec::with_capacity(current.len());
    for (k, ((&p, &q), &target)) in current.as_slice().iter().zip(measured).zip(beamed_targets).enumerate() {
        if !(target >= 0.0) {
            return Err(domain("beamed target", format!("ER {} has {target}", k + 1)));
        }
        let p_next = if target == 0.0 || p == 0.0 {
            0.0
        } else if q > 0.0 && q.is_finite() {
            (max_beacon_power).min(target / q * p)
        } else {
            return Err(Error::DegenerateMeasurement {
                er: k + 1,
                block: 0,
                measured: q,
            });
        };
        next.push(p_next);
    }
    BeaconPowerVector::new(next, max_beacon_power)
}

/// Iteration controls for [`run_distributed_control`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlSettings {
    pub max_iters: usize,
    /// Relative sup-norm step that counts as converged. Zero disables early stop.
    pub tolerance: f64,
}

impl Default for ControlSettings {
    fn default() -> Self {
        ControlSettings {
            max_iters: DEFAULT_MAX_ITERS,
            tolerance: DEFAULT_TOLERANCE,
        }
    }
}

/// One recorded block: beacon powers used and what every ER harvested.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlIterate {
    pub block: u64,
    pub powers: BeaconPowerVector,
    pub harvest: HarvestReport,
}

/// Full record of a distributed-control run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlTrace {
    /// Blocks `1, 2, ...` in order.
    pub iterations: Vec<ControlIterate>,
    /// True when the update proposed after the last recorded block moved no
    /// ER by more than the tolerance (relative, sup-norm).
    pub converged: bool,
    /// Beacon powers of the last recorded block.
    pub p_star: BeaconPowerVector,
    /// Zero-based indices of ERs with `p_star == P_max`.
    pub capped: Vec<usize>,
    /// Block-0 floor estimates, one per ER.
    pub floors: Vec<f64>,
    /// Harvested-power targets `Qbar_k`.
    pub targets: Vec<f64>,
}

impl ControlTrace {
    pub fn last(&self) -> &ControlIterate {
        self.iterations.last().expect("trace has at least one block")
    }
}

fn relative_change(a: &BeaconPowerVector, b: &BeaconPowerVector) -> f64 {
    a.as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(&x, &y)| (y - x).abs() / y.max(CHANGE_FLOOR_W))
        .fold(0.0, f64::max)
}

/// Runs the distributed update from `p_init` until it settles or the budget runs out.
///
/// Block 0 estimates each ER's isotropic floor; from then on each ER only
/// uses its own measurement and target. A target at or below the measured
/// floor is already met, so that ER stays silent.
pub fn run_distributed_control(
    meter: &HarvestMeter,
    targets: &[f64],
    p_init: &BeaconPowerVector,
    settings: ControlSettings,
) -> Result<ControlTrace> {
    let k = meter.betas.len();
    let p_max = meter.params.max_beacon_power;
    check_len("targets", k, targets.len())?;
    check_len("initial beacon powers", k, p_init.len())?;
    if let Some(t) = targets.iter().find(|t| !(t.is_finite() && **t >= 0.0)) {
        return Err(domain("target", format!("must be finite and non-negative, got {t}")));
    }
    if let Some(k0) = p_init.as_slice().iter().position(|&p| !(p > 0.0 && p <= p_max)) {
        return Err(domain(
            "initial beacon power",
            format!("ER {} has {} W, expected (0, {p_max}] W", k0 + 1, p_init[k0]),
        ));
    }
    if settings.max_iters == 0 {
        return Err(domain("max_iters", "must be at least 1"));
    }

    let floors = estimate_isotropic_floors(meter)?;
    let beamed_targets: Vec<f64> = targets.iter().zip(&floors).map(|(t, f)| (t - f).max(0.0)).collect();
    let mut p = BeaconPowerVector::new(
        p_init
            .as_slice()
            .iter()
            .zip(&beamed_targets)
            .map(|(&p, &t)| if t == 0.0 { 0.0 } else { p })
            .collect(),
        p_max,
    )?;

    let mut iterations = Vec::new();
    let mut converged = false;
    for n in 1..=settings.max_iters as u64 {
        let harvest = meter.measure(&p, n)?;
        let measured: Vec<f64> = harvest.total.iter().zip(&floors).map(|(q, f)| q - f).collect();
        iterations.push(ControlIterate {
            block: n,
            powers: p.clone(),
            harvest,
        });
        let next = beacon_update_step(&p, &measured, &beamed_targets, p_max).map_err(|e| match e {
            Error::DegenerateMeasurement { er, measured, .. } => Error::DegenerateMeasurement { er, block: n, measured },
            other => other,
        })?;
        if relative_change(&p, &next) <= settings.tolerance {
            converged = true;
            break;
        }
        if n < settings.max_iters as u64 {
            p = next;
        }
    }

    let capped = p.as_slice().iter().enumerate().filter(|(_, &x)| x == p_max).map(|(i, _)| i).collect();
    Ok(ControlTrace {
        iterations,
        converged,
        p_star: p,
        capped,
        floors,
        targets: targets.to_vec(),
    })
}

/// The matrix form of "every ER meets its target": `p >= A (B p + eta)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityMatrices {
    /// Diagonal of `A`: `qbar_k / (eta_k P_t (M_t - 1) beta_k^2)`.
    pub a_diag: Vec<f64>,
    /// `B`, row-major; every row equals `(beta_1, ..., beta_K)`.
    pub b: Vec<Vec<f64>>,
    /// `eta`: every entry `N0 / tau`.
    pub eta: Vec<f64>,
}

impl FeasibilityMatrices {
    /// Builds the matrices from gains and harvested-power targets. Targets
    /// below the isotropic floor contribute a zero row of `A`.
    pub fn new(betas: &[f64], targets: &[f64], params: &SystemParams) -> Result<Self> {
        check_len("targets", betas.len(), targets.len())?;
        params.validate_for(betas.len())?;
        if params.antennas < 2 {
            return Err(domain("antennas", "beamforming gain needs at least 2 antennas"));
        }
        let gain = params.transmit_power * (params.antennas - 1) as f64;
        let a_diag = betas
            .iter()
            .zip(targets)
            .enumerate()
            .map(|(k, (&beta, &target))| {
                let eta_k = params.efficiency(k);
                let beamed = (target - eta_k * params.transmit_power * beta).max(0.0);
                if beamed == 0.0 {
                    0.0
                } else {
                    beamed / (eta_k * gain * beta * beta)
                }
            })
            .collect();
        Ok(FeasibilityMatrices {
            a_diag,
            b: vec![betas.to_vec(); betas.len()],
            eta: vec![params.noise_power(); betas.len()],
        })
    }

    pub fn len(&self) -> usize {
        self.a_diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a_diag.is_empty()
    }

    /// Dense copy of `A`.
    pub fn a_matrix(&self) -> Vec<Vec<f64>> {
        let k = self.len();
        (0..k)
            .map(|i| (0..k).map(|j| if i == j { self.a_diag[i] } else { 0.0 }).collect())
            .collect()
    }

    /// Interference map `I(p) = A (B p + eta)`: the beacon power each ER
    /// needs to meet its target given everyone's current powers.
    pub fn interference(&self, p: &[f64]) -> Result<Vec<f64>> {
        check_len("beacon powers", self.len(), p.len())?;
        Ok(self
            .b
            .iter()
            .zip(&self.eta)
            .zip(&self.a_diag)
            .map(|((row, eta), a)| {
                let bp: f64 = row.iter().zip(p).map(|(b, x)| b * x).sum();
                if *a == 0.0 {
                    0.0
                } else {
                    a * (bp + eta)
                }
            })
            .collect())
    }

    /// `p_k - [A (B p + eta)]_k`; non-negative where ER `k` meets its target.
    pub fn margins(&self, p: &[f64]) -> Result<Vec<f64>> {
        Ok(self.interference(p)?.iter().zip(p).map(|(req, x)| x - req).collect())
    }
}

/// Per-ER target attainment at `p` under the large-array model.
pub fn feasibility_check(p: &BeaconPowerVector, matrices: &FeasibilityMatrices) -> Result<Vec<bool>> {
    Ok(matrices.margins(p.as_slice())?.iter().map(|&m| m >= 0.0).collect())
}

/// Output of [`fixed_point_oracle`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleSolution {
    pub powers: BeaconPowerVector,
    /// Zero-based, ascending.
    pub capped: Vec<usize>,
}

/// Solves the capped fixed point `p = min(P_max, A (B p + eta))` directly by
/// an active-set method.
///
/// Starting with nothing capped, the uncapped ERs solve the linear system
/// `p_k = a_k (S + eta)` with `S = sum_l beta_l p_l` in closed form. If that
/// has no finite solution, or it puts someone above `P_max`, the ER with the
/// largest `a_k` is pinned at `P_max` and the solve repeats. That ER is
/// necessarily capped at the true fixed point, so at most `K` rounds run.
pub fn fixed_point_oracle(betas: &[f64], targets: &[f64], params: &SystemParams) -> Result<OracleSolution> {
    let m = FeasibilityMatrices::new(betas, targets, params)?;
    let p_max = params.max_beacon_power;
    let noise = params.noise_power();
    let k = betas.len();
    let a = &m.a_diag;
    if noise == 0.0 && a.iter().any(|&x| x > 0.0) {
        return Err(domain("noise_psd", "the fixed point is not unique for a noiseless receiver"));
    }

    let mut capped = vec![false; k];
    // ERs that can never reach a positive target
    for i in 0..k {
        if a[i] > 0.0 && betas[i] == 0.0 || a[i].is_infinite() {
            capped[i] = true;
        }
    }
    loop {
        let capped_sum: f64 = (0..k).filter(|&i| capped[i]).map(|i| betas[i] * p_max).sum();
        let load: f64 = (0..k).filter(|&i| !capped[i]).map(|i| a[i] * betas[i]).sum();
        let worst = (0..k)
            .filter(|&i| !capped[i] && a[i] > 0.0)
            .max_by(|&i, &j| a[i].total_cmp(&a[j]));
        let total = if load < 1.0 {
            Some((noise * load + capped_sum) / (1.0 - load))
        } else {
            None
        };
        match (total, worst) {
            (Some(s), worst) => {
                let powers: Vec<f64> = (0..k)
                    .map(|i| if capped[i] { p_max } else { a[i] * (s + noise) })
                    .collect();
                if let Some(w) = worst.filter(|&w| powers[w] > p_max) {
                    capped[w] = true;
                    continue;
                }
                let capped_idx = (0..k).filter(|&i| powers[i] >= p_max).collect();
                let powers = powers.into_iter().map(|x| x.min(p_max)).collect();
                return Ok(OracleSolution {
                    powers: BeaconPowerVector::new(powers, p_max)?,
                    capped: capped_idx,
                });
            }
            (None, Some(w)) => capped[w] = true,
            (None, None) => unreachable!("load >= 1 needs an uncapped ER with a positive target"),
        }
    }
}
