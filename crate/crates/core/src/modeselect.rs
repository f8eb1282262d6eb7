//! Communication mode selection for D2D candidates.
//!
//! Decisions use the large-scale gains of the drop (path loss and shadowing,
//! no fast fading). The harmonic policy compares the equivalent gain of the
//! relay path, `1 / (1/g_first + 1/g_second)`, with the direct alternatives.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Deployment, ScenarioKind};

#[derive(Debug, Error, PartialEq)]
pub enum ModeSelectError {
    #[error("gains must be strictly positive and finite, got ({0}, {1})")]
    NonPositiveGain(f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeDecision {
    /// Through the base station. In range extension this is the direct
    /// uplink to the serving base station.
    Cellular,
    D2dSingleHop,
    D2dTwoHop,
}

impl ModeDecision {
    pub fn as_str(self) -> &'static str {
        match self {
            ModeDecision::Cellular => "cellular",
            ModeDecision::D2dSingleHop => "d2d_single_hop",
            ModeDecision::D2dTwoHop => "d2d_two_hop",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum MsPolicy {
    /// Forced cellular mode.
    Cmode,
    /// Proximity: single-hop D2D or cellular, whichever gain is larger.
    /// Range extension: always through the relay.
    Dms,
    /// Harmonic-mean mode selection.
    Hms,
}

impl MsPolicy {
    pub fn as_str(self) -> &'static str {
        match self {
            MsPolicy::Cmode => "cmode",
            MsPolicy::Dms => "dms",
            MsPolicy::Hms => "hms",
        }
    }
}

/// Equivalent gain of two cascaded hops: the harmonic combination
/// `1 / (1/g_a + 1/g_b)`.
pub fn equivalent_gain(g_a: f64, g_b: f64) -> Result<f64, ModeSelectError> {
    if !(g_a > 0.0 && g_b > 0.0 && g_a.is_finite() && g_b.is_finite()) {
        return Err(ModeSelectError::NonPositiveGain(g_a, g_b));
    }
    // g_a·g_b / (g_a + g_b) avoids the reciprocal overflow for tiny gains.
    Ok(g_a * (g_b / (g_a + g_b)))
}

/// Proximity scenario: relay path if it beats both direct options, then
/// direct D2D if it beats the base station, else cellular. Ties go to the
/// earlier branch.
pub fn hms_proximity(g_eq: f64, g_tx_rx: f64, g_tx_bs: f64) -> ModeDecision {
    if g_eq >= g_tx_rx.max(g_tx_bs) {
        ModeDecision::D2dTwoHop
    } else if g_tx_rx >= g_tx_bs {
        ModeDecision::D2dSingleHop
    } else {
        ModeDecision::Cellular
    }
}

/// Range extension: relay path if its equivalent gain (Tx→relay, relay→BS)
/// is at least the direct Tx→BS gain.
pub fn hms_range_extension(g_eq: f64, g_tx_bs: f64) -> ModeDecision {
    if g_eq >= g_tx_bs {
        ModeDecision::D2dTwoHop
    } else {
        ModeDecision::Cellular
    }
}

/// Large-scale gains a mode decision can depend on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CandidateGains {
    pub tx_rx: f64,
    pub tx_bs: f64,
    pub tx_relay: f64,
    pub relay_rx: f64,
    pub relay_bs: f64,
}

pub fn decide(policy: MsPolicy, scenario: ScenarioKind, g: &CandidateGains) -> Result<ModeDecision, ModeSelectError> {
    Ok(match (policy, scenario) {
        (MsPolicy::Cmode, _) => ModeDecision::Cellular,
        (MsPolicy::Dms, ScenarioKind::Proximity) => {
            if g.tx_rx >= g.tx_bs {
                ModeDecision::D2dSingleHop
            } else {
                ModeDecision::Cellular
            }
        }
        (MsPolicy::Dms, ScenarioKind::RangeExtension) => ModeDecision::D2dTwoHop,
        (MsPolicy::Hms, ScenarioKind::Proximity) => {
            hms_proximity(equivalent_gain(g.tx_relay, g.relay_rx)?, g.tx_rx, g.tx_bs)
        }
        (MsPolicy::Hms, ScenarioKind::RangeExtension) => {
            hms_range_extension(equivalent_gain(g.tx_relay, g.relay_bs)?, g.tx_bs)
        }
    })
}

pub fn candidate_gains(deployment: &Deployment, triplet: usize) -> CandidateGains {
    let t = &deployment.layout.triplets[triplet];
    let bs = deployment.layout.bs_of_cell(t.cell);
    let g = |a, b| deployment.gains.large_scale(a, b);
    CandidateGains {
        tx_rx: g(t.tx, t.rx),
        tx_bs: g(t.tx, bs),
        tx_relay: g(t.tx, t.relay),
        relay_rx: g(t.relay, t.rx),
        relay_bs: g(t.relay, bs),
    }
}

/// One decision per D2D triplet, in triplet order.
pub fn select_modes(
    policy: MsPolicy,
    scenario: ScenarioKind,
    deployment: &Deployment,
) -> Result<Vec<ModeDecision>, ModeSelectError> {
    (0..deployment.layout.triplets.len()).map(|t| decide(policy, scenario, &candidate_gains(deployment, t))).collect()
}
