//! Beacon phase, retrodirective transmission and harvested-power models.
//!
//! Conventions: [`ChannelRealization::row`] returns `[h_k1, ..., h_kM]`, which
//! is both ER `k`'s uplink signature at the ET array and its downlink gain
//! vector. Writing `h_k` for the conjugate of that row, the ET observes
//! `g = sum_k sqrt(p_k) conj(h_k)`, transmits `x = sqrt(P_t) conj(g^) / |g^|`
//! and ER `k` receives `h_k^H x`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::ChannelRealization;
use crate::error::{check_len, domain, Error, Result};

/// Link-level constants shared by every ER, in linear SI units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    /// Number of ET antennas `M_t`.
    pub antennas: usize,
    /// ET total transmit power `P_t` in watts.
    pub transmit_power: f64,
    /// Per-ER beacon power cap `P_max` in watts.
    pub max_beacon_power: f64,
    /// Beacon-phase duration `tau` in seconds.
    pub beacon_duration: f64,
    /// Receiver noise power spectral density `N0` in W/Hz.
    pub noise_psd: f64,
    /// Per-ER RF-to-DC efficiencies; `None` means unit efficiency for all.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub efficiency: Option<Vec<f64>>,
    /// Carrier frequency in Hz. Metadata only.
    pub carrier_frequency: f64,
}

impl Default for SystemParams {
    /// 500 antennas, 1 W, 0.1 W beacon cap, 1 us beacon, -170 dBm/Hz, 900 MHz.
    fn default() -> Self {
        SystemParams {
            antennas: 500,
            transmit_power: 1.0,
            max_beacon_power: 0.1,
            beacon_duration: 1e-6,
            noise_psd: 1e-20,
            efficiency: None,
            carrier_frequency: 900e6,
        }
    }
}

impl SystemParams {
    /// Post-matched-filter noise power `N0 / tau`, in watts.
    pub fn noise_power(&self) -> f64 {
        self.noise_psd / self.beacon_duration
    }

    /// Efficiency of ER `k`.
    pub fn efficiency(&self, k: usize) -> f64 {
        self.efficiency.as_ref().map_or(1.0, |eta| eta[k])
    }

    /// Checks the type invariants, collecting every violation.
    pub fn violations(&self) -> Vec<Error> {
        let mut out = Vec::new();
        let mut positive = |name: &'static str, v: f64| {
            if !(v.is_finite() && v > 0.0) {
                out.push(domain(name, format!("must be finite and positive, got {v}")));
            }
        };
        positive("transmit_power", self.transmit_power);
        positive("max_beacon_power", self.max_beacon_power);
        positive("beacon_duration", self.beacon_duration);
        if self.antennas == 0 {
            out.push(domain("antennas", "must be at least 1"));
        }
        if !(self.noise_psd.is_finite() && self.noise_psd >= 0.0) {
            out.push(domain("noise_psd", format!("must be non-negative, got {}", self.noise_psd)));
        }
        if let Some(eta) = &self.efficiency {
            for (k, &e) in eta.iter().enumerate() {
                if !(e > 0.0 && e <= 1.0) {
                    out.push(domain("efficiency", format!("ER {} has {e}, expected (0, 1]", k + 1)));
                }
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        match self.violations().into_iter().next() {
            Some(e) => Err(e),
            None => Ok(()),
        }
    }

    /// Validates and checks that per-ER data covers `k` receivers.
    pub fn validate_for(&self, k: usize) -> Result<()> {
        self.validate()?;
        if let Some(eta) = &self.efficiency {
            check_len("efficiency", k, eta.len())?;
        }
        Ok(())
    }
}

/// Beacon powers `p`, each in `[0, P_max]` watts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BeaconPowerVector(Vec<f64>);

impl BeaconPowerVector {
    pub fn new(powers: Vec<f64>, max_beacon_power: f64) -> Result<Self> {
        if let Some(p) = powers
            .iter()
            .find(|&&p| !(p.is_finite() && (0.0..=max_beacon_power).contains(&p)))
        {
            return Err(domain(
                "beacon power",
                format!("{p} W outside [0, {max_beacon_power}] W"),
            ));
        }
        Ok(BeaconPowerVector(powers))
    }

    /// Every ER at `power`.
    pub fn uniform(count: usize, power: f64, max_beacon_power: f64) -> Result<Self> {
        Self::new(vec![power; count], max_beacon_power)
    }

    pub fn zeros(count: usize) -> Self {
        BeaconPowerVector(vec![0.0; count])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl std::ops::Index<usize> for BeaconPowerVector {
    type Output = f64;

    fn index(&self, k: usize) -> &f64 {
        &self.0[k]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HarvestModel {
    Exact,
    Asymptotic,
}

/// Harvested powers for every ER.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarvestReport {
    /// `Q_k`, watts.
    pub total: Vec<f64>,
    /// `q_k = Q_k - eta_k P_t beta_k`, watts. May be negative in the exact model.
    pub beamed: Vec<f64>,
    pub model: HarvestModel,
}

impl HarvestReport {
    fn from_totals(total: Vec<f64>, betas: &[f64], params: &SystemParams, model: HarvestModel) -> Self {
        let beamed = total
            .iter()
            .zip(betas)
            .enumerate()
            .map(|(k, (&q, &beta))| q - params.efficiency(k) * params.transmit_power * beta)
            .collect();
        HarvestReport {
            total,
            beamed,
            model,
        }
    }
}

fn squared_norm(v: &[Complex64]) -> f64 {
    v.iter().map(Complex64::norm_sqr).sum()
}

/// Noiseless ET observation `g = sum_k sqrt(p_k) [h_k1, ..., h_kM]`.
pub fn effective_uplink_channel(ch: &ChannelRealization, p: &BeaconPowerVector) -> Result<Vec<Complex64>> {
    check_len("beacon powers", ch.num_ers(), p.len())?;
    if let Some(&bad) = p.as_slice().iter().find(|&&x| !(x >= 0.0)) {
        return Err(domain("beacon power", format!("must be non-negative, got {bad}")));
    }
    let mut g = vec![Complex64::new(0.0, 0.0); ch.antennas()];
    for (row, &pk) in ch.rows().zip(p.as_slice()) {
        if pk == 0.0 {
            continue;
        }
        let amp = pk.sqrt();
        for (gm, h) in g.iter_mut().zip(row) {
            *gm += h * amp;
        }
    }
    Ok(g)
}

/// Matched-filter output `g^ = g + g~`; `noise` is the already integrated `g~`.
pub fn matched_filter_estimate(g: &[Complex64], noise: &[Complex64]) -> Result<Vec<Complex64>> {
    check_len("beacon noise", g.len(), noise.len())?;
    Ok(g.iter().zip(noise).map(|(a, b)| a + b).collect())
}

/// Retrodirective transmit vector `x = sqrt(P_t) conj(g^) / |g^|`.
pub fn et_transmit_signal(estimate: &[Complex64], transmit_power: f64) -> Result<Vec<Complex64>> {
    let norm = squared_norm(estimate).sqrt();
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(Error::DegenerateEstimate);
    }
    let scale = transmit_power.sqrt() / norm;
    Ok(estimate.iter().map(|z| z.conj() * scale).collect())
}

/// Received baseband symbol `h_k^H x = sum_m h_km x_m` at every ER.
pub fn received_symbols(ch: &ChannelRealization, x: &[Complex64]) -> Result<Vec<Complex64>> {
    check_len("transmit vector", ch.antennas(), x.len())?;
    Ok(ch
        .rows()
        .map(|row| row.iter().zip(x).map(|(h, xm)| h * xm).sum())
        .collect())
}

/// Finite-array harvested power for one block (channel and noise given).
pub fn harvested_power_exact(
    ch: &ChannelRealization,
    p: &BeaconPowerVector,
    noise: &[Complex64],
    params: &SystemParams,
) -> Result<HarvestReport> {
    params.validate_for(ch.num_ers())?;
    let g = effective_uplink_channel(ch, p)?;
    let estimate = matched_filter_estimate(&g, noise)?;
    let x = et_transmit_signal(&estimate, params.transmit_power)?;
    let total = received_symbols(ch, &x)?
        .iter()
        .enumerate()
        .map(|(k, r)| params.efficiency(k) * r.norm_sqr())
        .collect();
    Ok(HarvestReport::from_totals(total, ch.betas(), params, HarvestModel::Exact))
}

/// Large-array limit of the harvested power:
/// `Q_k = eta_k P_t (beta_k + p_k beta_k^2 (M_t - 1) / (sum_l p_l beta_l + N0/tau))`.
///
/// With zero beacon power and a noiseless receiver the second term is taken
/// as zero, leaving the isotropic floor.
pub fn harvested_power_asymptotic(betas: &[f64], p: &BeaconPowerVector, params: &SystemParams) -> Result<HarvestReport> {
    check_len("beacon powers", betas.len(), p.len())?;
    params.validate_for(betas.len())?;
    if let Some(b) = betas.iter().find(|b| !(b.is_finite() && **b >= 0.0)) {
        return Err(domain("beta", format!("must be finite and non-negative, got {b}")));
    }
    let gain = (params.antennas - 1) as f64;
    let denom: f64 = betas.iter().zip(p.as_slice()).map(|(b, pk)| b * pk).sum::<f64>() + params.noise_power();
    let total = betas
        .iter()
        .zip(p.as_slice())
        .enumerate()
        .map(|(k, (&beta, &pk))| {
            let beamed = if denom > 0.0 { pk * beta * beta * gain / denom } else { 0.0 };
            params.efficiency(k) * params.transmit_power * (beta + beamed)
        })
        .collect();
    Ok(HarvestReport::from_totals(total, betas, params, HarvestModel::Asymptotic))
}
