//! Utility-maximizing power control.
//!
//! Maximizes `Σ_i ln(s_i) − ω Σ_l P_l` over per-route SINR targets and link
//! powers. The outer loop moves each route's target in log space; the inner
//! loop ([`zander_inner_loop`]) realizes the targets with locally measured
//! SINRs. All hops of a route share one target.
//!
//! Outer update for route `i` with target `γ_i = e^{x_i}`:
//!
//! * utility slope: with `s_i = W·log2(1 + γ_i)` and price `λ_i = 1/s_i`,
//!   `∂ln(s_i)/∂x_i = λ_i · ∂s_i/∂x_i = γ_i / ((1 + γ_i)·ln(1 + γ_i))`;
//! * power slope: with interference frozen, `∂P_l/∂x_i = P_l` for each
//!   adaptive hop, so the cost slope is `ω·Σ_h P_h`;
//! * step: `x_i += η · ln(utility slope / cost slope)`, clipped to
//!   `±max_log_step`, which has the sign of the gradient and vanishes at the
//!   same stationary point.
//!
//! Targets are then projected onto `[target_min_db, target_max_db]` and onto
//! what the hops can reach within their power bounds under frozen
//! interference. A step that lowers the objective is halved, at most
//! `max_halvings` times; if none is accepted the solver stops.

use serde::{Deserialize, Serialize};

use super::{
    all_sinrs, route_rate_from_sinrs, zander_inner_loop, Network, PowerAllocation, RateVector, SinrTargets, SolverError,
};
use crate::units::dbm_to_watts;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UmConfig {
    /// Weight of total transmit power (W) against utility.
    pub omega: f64,
    pub outer_iters: usize,
    pub inner_iters: usize,
    /// Stop once no target changes by more than this relative amount.
    pub epsilon: f64,
    pub p_init_dbm: f64,
    pub gamma_tgt_init_db: f64,
    pub step_size: f64,
    pub max_halvings: usize,
    pub max_log_step: f64,
    pub target_min_db: f64,
    pub target_max_db: f64,
}

impl Default for UmConfig {
    fn default() -> Self {
        UmConfig {
            omega: 1.0,
            outer_iters: 70,
            inner_iters: 10,
            epsilon: 0.05,
            p_init_dbm: 10.0,
            gamma_tgt_init_db: 0.0,
            step_size: 0.5,
            max_halvings: 5,
            max_log_step: 3.0,
            target_min_db: -80.0,
            target_max_db: 90.0,
        }
    }
}

impl UmConfig {
    pub fn with_omega(omega: f64) -> Self {
        UmConfig { omega, ..Default::default() }
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        let bad = |m: &str| Err(SolverError::InvalidConfig(m.to_string()));
        if !(self.omega > 0.0 && self.omega.is_finite()) {
            return bad("omega must be positive and finite");
        }
        if self.outer_iters == 0 || self.inner_iters == 0 {
            return bad("iteration counts must be at least 1");
        }
        if !(self.epsilon > 0.0 && self.step_size > 0.0 && self.max_log_step > 0.0) {
            return bad("epsilon, step_size and max_log_step must be positive");
        }
        if !(self.target_min_db < self.target_max_db) {
            return bad("target_min_db must be below target_max_db");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub targets: SinrTargets,
    pub powers: PowerAllocation,
    /// Achieved per-link SINR.
    pub sinrs: Vec<f64>,
    /// Achieved end-to-end rates.
    pub rates: RateVector,
    /// `1 / s_i` at the current target rate of each route.
    pub prices: Vec<f64>,
    pub objective: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Converged,
    NoAscent,
    IterationLimit,
}

#[derive(Debug, Clone)]
pub struct UmOutcome {
    pub state: SolverState,
    pub outer_iterations: usize,
    pub stop: StopReason,
    /// Objective after initialization and after every accepted step.
    pub objective_trace: Vec<f64>,
    pub restarts: usize,
}

/// `Σ ln(s_i) − ω · Σ P_l` over links whose power is adjustable.
pub fn um_objective(rates: &RateVector, p: &PowerAllocation, omega: f64) -> f64 {
    let utility: f64 = rates.0.iter().map(|s| s.ln()).sum();
    let power: f64 = p.powers.iter().zip(&p.bounds).filter(|(_, b)| !b.is_fixed()).map(|(w, _)| w).sum();
    utility - omega * power
}

/// Objective in log variables, `Σ s̃_i − ω Σ e^{P̃_l}` for `u = ln`.
pub fn transformed_objective(log_rates: &[f64], log_powers: &[f64], omega: f64) -> f64 {
    log_rates.iter().sum::<f64>() - omega * log_powers.iter().map(|p| p.exp()).sum::<f64>()
}

/// `d ln(log(1+γ)) / d ln γ`.
fn utility_slope(gamma: f64) -> f64 {
    if gamma < 1e-8 {
        1.0 - gamma / 2.0
    } else {
        gamma / ((1.0 + gamma) * gamma.ln_1p())
    }
}

fn evaluate(net: &Network<'_>, targets: SinrTargets, powers: PowerAllocation, omega: f64) -> SolverState {
    let sinrs = all_sinrs(&powers, net);
    let rates = route_rate_from_sinrs(&sinrs, net);
    let objective = um_objective(&rates, &powers, omega);
    let prices = targets.0.iter().map(|&g| 1.0 / super::capacity(g, net.bandwidth_hz)).collect();
    SolverState { targets, powers, sinrs, rates, prices, objective }
}

/// Reachable target interval `[lo, hi]` of each route at the current powers.
fn reachable(net: &Network<'_>, state: &SolverState) -> Vec<(f64, f64)> {
    net.routing
        .routes()
        .iter()
        .map(|r| {
            let mut lo = f64::INFINITY;
            let mut hi = f64::INFINITY;
            for hop in &r.hops {
                let l = hop.link.0;
                let (p, b, g) = (state.powers.powers[l], state.powers.bounds[l], state.sinrs[l]);
                if p > 0.0 {
                    lo = lo.min(g * b.min_w / p);
                    hi = hi.min(g * b.max_w / p);
                }
            }
            (lo, hi)
        })
        .collect()
}

fn attempt(cfg: &UmConfig, net: &Network<'_>, step_size: f64) -> Result<UmOutcome, SolverError> {
    let n = net.routing.num_routes();
    let box_lo = cfg.target_min_db / 10.0 * std::f64::consts::LN_10;
    let box_hi = cfg.target_max_db / 10.0 * std::f64::consts::LN_10;
    let mut x = vec![(cfg.gamma_tgt_init_db / 10.0 * std::f64::consts::LN_10).clamp(box_lo, box_hi); n];
    let to_targets = |x: &[f64]| SinrTargets(x.iter().map(|v| v.exp()).collect());

    let p0 = PowerAllocation::uniform(net, dbm_to_watts(cfg.p_init_dbm));
    let p0 = zander_inner_loop(net, &to_targets(&x), p0, cfg.inner_iters);
    let mut state = evaluate(net, to_targets(&x), p0, cfg.omega);
    if !state.objective.is_finite() {
        return Err(SolverError::NonFiniteObjective);
    }
    let mut trace = vec![state.objective];
    let mut stop = StopReason::IterationLimit;
    let mut iterations = 0;

    for _ in 0..cfg.outer_iters {
        iterations += 1;
        let dir: Vec<f64> = net
            .routing
            .routes()
            .iter()
            .zip(&x)
            .map(|(r, &xi)| {
                let cost: f64 = r
                    .hops
                    .iter()
                    .filter(|h| !state.powers.bounds[h.link.0].is_fixed())
                    .map(|h| state.powers.powers[h.link.0])
                    .sum::<f64>()
                    * cfg.omega;
                if cost <= 0.0 {
                    return 0.0;
                }
                (utility_slope(xi.exp()).ln() - cost.ln()).clamp(-cfg.max_log_step, cfg.max_log_step)
            })
            .collect();
        let bounds = reachable(net, &state);

        let mut step = step_size;
        let mut accepted = None;
        for _ in 0..=cfg.max_halvings {
            let x_new: Vec<f64> = x
                .iter()
                .zip(&dir)
                .zip(&bounds)
                .map(|((&xi, &d), &(lo, hi))| {
                    let v = (xi + step * d).clamp(box_lo, box_hi);
                    v.clamp(lo.ln().min(hi.ln()), hi.ln())
                })
                .collect();
            let p = zander_inner_loop(net, &to_targets(&x_new), state.powers.clone(), cfg.inner_iters);
            let candidate = evaluate(net, to_targets(&x_new), p, cfg.omega);
            if !candidate.objective.is_finite() {
                return Err(SolverError::NonFiniteObjective);
            }
            let tol = 1e-12 * state.objective.abs().max(1.0);
            if candidate.objective >= state.objective - tol {
                accepted = Some((x_new, candidate));
                break;
            }
            step *= 0.5;
        }
        let Some((x_new, candidate)) = accepted else {
            stop = StopReason::NoAscent;
            break;
        };
        let rel_change = x.iter().zip(&x_new).map(|(a, b)| (b - a).exp_m1().abs()).fold(0.0, f64::max);
        x = x_new;
        state = candidate;
        trace.push(state.objective);
        if rel_change < cfg.epsilon {
            stop = StopReason::Converged;
            break;
        }
    }
    Ok(UmOutcome { state, outer_iterations: iterations, stop, objective_trace: trace, restarts: 0 })
}

/// Solves one drop. On a non-finite objective the solve restarts once from
/// the initial targets with half the step size before giving up.
pub fn um_solve(cfg: &UmConfig, net: &Network<'_>) -> Result<UmOutcome, SolverError> {
    cfg.validate()?;
    match attempt(cfg, net, cfg.step_size) {
        Err(SolverError::NonFiniteObjective) => {
            let mut out = attempt(cfg, net, 0.5 * cfg.step_size)?;
            out.restarts = 1;
            Ok(out)
        }
        other => other,
    }
}
