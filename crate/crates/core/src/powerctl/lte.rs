//! LTE-style baselines: fixed power, fixed SNR target, open loop and
//! closed loop.

use super::{all_sinrs, LinkClass, Network, PowerAllocation, PowerBounds, PowerParams};
use crate::routing::LinkId;
use crate::units::{dbm_to_watts, linear_to_db, watts_to_dbm};

/// Fixed scheme: D2D links at the fixed power, uplinks on open loop,
/// downlinks at the base-station power.
pub fn pc_fixed(class: LinkClass, open_loop_dbm: impl FnOnce() -> f64, params: &PowerParams) -> f64 {
    match class {
        LinkClass::D2d => params.fixed_power_dbm.clamp(params.ue_min_dbm, params.ue_max_dbm),
        LinkClass::Uplink => open_loop_dbm().clamp(params.ue_min_dbm, params.ue_max_dbm),
        LinkClass::Downlink => params.bs_power_dbm,
    }
}

/// Noise-only inversion `P = γ·σ / g`, clamped to the bounds. Returns dBm.
pub fn pc_fixed_snr(target_db: f64, gain: f64, noise_w: f64, bounds: &PowerBounds) -> f64 {
    let p = 10f64.powf(target_db / 10.0) * noise_w / gain;
    watts_to_dbm(bounds.clamp(p))
}

/// `min(Pmax, P0 + 10·log10(M) + α·PL)`, floored at the minimum UE power.
pub fn pc_lte_open_loop(pl_db: f64, params: &PowerParams) -> f64 {
    let p = params.p0_dbm + 10.0 * (params.rbs_per_ue as f64).log10() + params.alpha * pl_db;
    p.min(params.ue_max_dbm).max(params.ue_min_dbm)
}

/// One TPC command: up a step below the dead zone, down a step above it.
pub fn closed_loop_step(
    current_dbm: f64,
    achieved_db: f64,
    target_db: f64,
    step_db: f64,
    dead_zone_db: f64,
    min_dbm: f64,
    max_dbm: f64,
) -> f64 {
    let err = achieved_db - target_db;
    let next = if err < -dead_zone_db {
        current_dbm + step_db
    } else if err > dead_zone_db {
        current_dbm - step_db
    } else {
        current_dbm
    };
    next.clamp(min_dbm, max_dbm)
}

pub fn pc_lte_closed_loop(current_dbm: f64, achieved_db: f64, params: &PowerParams) -> f64 {
    closed_loop_step(
        current_dbm,
        achieved_db,
        params.sinr_target_db,
        params.cl_step_db,
        params.cl_dead_zone_db,
        params.ue_min_dbm,
        params.ue_max_dbm,
    )
}

/// Runs `params.cl_iters` synchronous closed-loop rounds on the links
/// flagged in `adaptive`; other links keep their power.
pub fn run_closed_loop(
    net: &Network<'_>,
    mut p: PowerAllocation,
    adaptive: &[bool],
    params: &PowerParams,
) -> PowerAllocation {
    for _ in 0..params.cl_iters {
        let sinrs = all_sinrs(&p, net);
        let next: Vec<f64> = net
            .active_links()
            .filter(|l| adaptive[l.0])
            .map(|l: LinkId| {
                let b = &net.bounds[l.0];
                let cur = watts_to_dbm(p.powers[l.0]);
                let dbm = closed_loop_step(
                    cur,
                    linear_to_db(sinrs[l.0]),
                    params.sinr_target_db,
                    params.cl_step_db,
                    params.cl_dead_zone_db,
                    watts_to_dbm(b.min_w),
                    watts_to_dbm(b.max_w),
                );
                b.clamp(dbm_to_watts(dbm))
            })
            .collect();
        for (l, w) in net.active_links().filter(|l| adaptive[l.0]).zip(next) {
            p.powers[l.0] = w;
        }
    }
    p
}
