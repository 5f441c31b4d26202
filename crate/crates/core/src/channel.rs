//! Large-scale path loss and per-block Rayleigh channel draws.

use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, domain, Result};
use crate::retro::SystemParams;
use crate::rng::{stream_rng, STREAM_CHANNEL, STREAM_NOISE};

/// Log-distance path loss `beta(r) = c0 * (r / r0)^(-alpha)`, all linear.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathLossModel {
    /// Attenuation at the reference distance (linear, not dB).
    pub c0: f64,
    /// Reference distance in meters.
    pub r0: f64,
    /// Path-loss exponent.
    pub alpha: f64,
}

impl PathLossModel {
    pub fn new(c0: f64, r0: f64, alpha: f64) -> Result<Self> {
        let model = PathLossModel { c0, r0, alpha };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("c0", self.c0), ("r0", self.r0), ("alpha", self.alpha)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(domain(name, format!("must be finite and positive, got {v}")));
            }
        }
        Ok(())
    }

    /// Large-scale gain at distance `r` meters.
    pub fn gain(&self, r: f64) -> Result<f64> {
        path_loss(self, r)
    }

    /// Gains for a list of distances.
    pub fn gains(&self, distances: &[f64]) -> Result<Vec<f64>> {
        distances.iter().map(|&r| self.gain(r)).collect()
    }
}

impl Default for PathLossModel {
    /// -30 dB at 1 m with exponent 3.
    fn default() -> Self {
        PathLossModel {
            c0: 1e-3,
            r0: 1.0,
            alpha: 3.0,
        }
    }
}

/// Evaluates `c0 * (r / r0)^(-alpha)`.
pub fn path_loss(model: &PathLossModel, r: f64) -> Result<f64> {
    if !(r.is_finite() && r > 0.0) {
        return Err(domain("distance", format!("must be finite and positive, got {r}")));
    }
    Ok(model.c0 * (r / model.r0).powf(-model.alpha))
}

/// One block's channel: entry `(k, m)` is `h_km = sqrt(beta_k) * h~_km`, the
/// reciprocal gain between ET antenna `m` and ER `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    antennas: usize,
    gains: Vec<Complex64>,
    betas: Vec<f64>,
}

impl ChannelRealization {
    /// Builds a realization from explicit rows (one row per ER).
    pub fn from_rows(rows: Vec<Vec<Complex64>>, betas: Vec<f64>) -> Result<Self> {
        check_len("channel rows vs betas", betas.len(), rows.len())?;
        let antennas = rows.first().map_or(0, Vec::len);
        let mut gains = Vec::with_capacity(rows.len() * antennas);
        for row in rows {
            check_len("channel row length", antennas, row.len())?;
            gains.extend(row);
        }
        if gains.iter().any(|h| !h.is_finite()) {
            return Err(domain("channel", "entries must be finite"));
        }
        Ok(ChannelRealization {
            antennas,
            gains,
            betas,
        })
    }

    pub fn num_ers(&self) -> usize {
        self.betas.len()
    }

    pub fn antennas(&self) -> usize {
        self.antennas
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    /// `[h_k1, ..., h_kM]`.
    pub fn row(&self, k: usize) -> &[Complex64] {
        &self.gains[k * self.antennas..(k + 1) * self.antennas]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[Complex64]> {
        self.gains.chunks_exact(self.antennas.max(1)).take(self.betas.len())
    }
}

fn cscg_fill(out: &mut Vec<Complex64>, n: usize, variance: f64, rng: &mut impl rand::Rng) {
    let sd = (variance / 2.0).sqrt();
    out.extend((0..n).map(|_| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        Complex64::new(sd * re, sd * im)
    }));
}

/// Draws a Rayleigh block: entries are independent CSCG with variance `beta_k`.
pub fn draw_channel(params: &SystemParams, betas: &[f64], seed: u64) -> Result<ChannelRealization> {
    if params.antennas == 0 {
        return Err(domain("antennas", "must be at least 1"));
    }
    if betas.is_empty() {
        return Err(domain("betas", "need at least one ER"));
    }
    if let Some(b) = betas.iter().find(|b| !(b.is_finite() && **b >= 0.0)) {
        return Err(domain("beta", format!("must be finite and non-negative, got {b}")));
    }
    let mut rng = stream_rng(seed, STREAM_CHANNEL);
    let mut gains = Vec::with_capacity(betas.len() * params.antennas);
    for &beta in betas {
        cscg_fill(&mut gains, params.antennas, beta, &mut rng);
    }
    Ok(ChannelRealization {
        antennas: params.antennas,
        gains,
        betas: betas.to_vec(),
    })
}

/// Draws the matched-filter output noise `g~ ~ CN(0, (N0/tau) I)`.
pub fn draw_beacon_noise(params: &SystemParams, seed: u64) -> Result<Vec<Complex64>> {
    if !(params.beacon_duration.is_finite() && params.beacon_duration > 0.0) {
        return Err(domain("beacon_duration", "must be positive"));
    }
    if !(params.noise_psd.is_finite() && params.noise_psd >= 0.0) {
        return Err(domain("noise_psd", "must be non-negative"));
    }
    let mut rng = stream_rng(seed, STREAM_NOISE);
    let mut noise = Vec::with_capacity(params.antennas);
    cscg_fill(&mut noise, params.antennas, params.noise_power(), &mut rng);
    Ok(noise)
}
