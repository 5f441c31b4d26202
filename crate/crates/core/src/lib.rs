//! Retrodirective wireless power transfer from a massive-antenna energy
//! transmitter (ET) to single-antenna energy receivers (ERs), with a
//! distributed beacon-power controller that counters the doubly near-far
//! effect.
//!
//! * [`channel`]: path loss, Rayleigh block draws, beacon noise.
//! * [`retro`]: matched filter, retrodirective transmit vector, exact and
//!   large-array harvested power.
//! * [`power_control`]: the per-ER update, floor estimation, matrix-form
//!   feasibility and a centralized fixed-point solver.
//! * [`experiments`]: scenario presets, convergence runs and the fairness sweep.
//!
//! All quantities are linear SI units (watts, meters, seconds).

// `!(x >= 0.0)` is deliberate: it rejects NaN too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod error;
pub mod experiments;
pub mod power_control;
pub mod retro;
pub mod rng;

pub use channel::{draw_beacon_noise, draw_channel, path_loss, ChannelRealization, PathLossModel};
pub use error::{Error, Result};
pub use experiments::{
    benchmark_fixed_power, log_grid, run_convergence_scenario, run_fairness_sweep, ErLayout, InitRule, Scenario,
    Scheme, SchemeCurve, SweepResult, Targets,
};
pub use power_control::{
    beacon_update_step, estimate_isotropic_floor, estimate_isotropic_floors, feasibility_check, fixed_point_oracle,
    run_distributed_control, ControlIterate, ControlSettings, ControlTrace, ErProfile, FeasibilityMatrices,
    HarvestMeter, Measurement, OracleSolution,
};
pub use retro::{
    effective_uplink_channel, et_transmit_signal, harvested_power_asymptotic, harvested_power_exact,
    matched_filter_estimate, received_symbols, BeaconPowerVector, HarvestModel, HarvestReport, SystemParams,
};

// Book chapters, compiled and run by `cargo test --doc`.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/channel.md")]
    mod channel {}
    #[doc = include_str!("../../../book/src/retrodirective.md")]
    mod retrodirective {}
    #[doc = include_str!("../../../book/src/power-control.md")]
    mod power_control {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
