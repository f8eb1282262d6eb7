//! SINR and capacity evaluation over a routed network, and the power
//! control schemes: fixed power, fixed SNR target, LTE open and closed loop,
//! and distributed utility maximization.

mod lte;
mod um;
mod zander;

pub use lte::{closed_loop_step, pc_fixed, pc_fixed_snr, pc_lte_closed_loop, pc_lte_open_loop, run_closed_loop};
pub use um::{transformed_objective, um_objective, um_solve, SolverState, StopReason, UmConfig, UmOutcome};
pub use zander::zander_inner_loop;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{GainTable, NodeId, NodeKind};
use crate::routing::{Link, LinkId, ResourceId, RouteId, RoutingMatrix};
use crate::units::{dbm_to_watts, linear_to_db, watts_to_dbm};

#[derive(Debug, Error, PartialEq)]
pub enum SolverError {
    #[error("utility objective is not finite after a restart")]
    NonFiniteObjective,
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerBounds {
    pub min_w: f64,
    pub max_w: f64,
}

impl PowerBounds {
    pub fn from_dbm(min_dbm: f64, max_dbm: f64) -> Self {
        PowerBounds { min_w: dbm_to_watts(min_dbm), max_w: dbm_to_watts(max_dbm) }
    }

    pub fn fixed_dbm(dbm: f64) -> Self {
        Self::from_dbm(dbm, dbm)
    }

    #[inline]
    pub fn clamp(&self, p: f64) -> f64 {
        p.clamp(self.min_w, self.max_w)
    }

    pub fn is_fixed(&self) -> bool {
        self.min_w == self.max_w
    }
}

/// Transmit power per link in watts. Each active link transmits on exactly
/// one resource, so the link × resource matrix is stored as one value per
/// link; [`PowerAllocation::to_matrix`] expands it.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerAllocation {
    pub powers: Vec<f64>,
    pub bounds: Vec<PowerBounds>,
}

impl PowerAllocation {
    /// Every active link at `init_w` clamped to its bounds; inactive links at 0.
    pub fn uniform(net: &Network<'_>, init_w: f64) -> Self {
        let powers = (0..net.num_links())
            .map(|l| if net.is_active(LinkId(l)) { net.bounds[l].clamp(init_w) } else { 0.0 })
            .collect();
        PowerAllocation { powers, bounds: net.bounds.clone() }
    }

    pub fn power(&self, link: LinkId) -> f64 {
        self.powers[link.0]
    }

    pub fn to_matrix(&self, routing: &RoutingMatrix) -> Vec<Vec<f64>> {
        let mut m = vec![vec![0.0; routing.num_resources()]; self.powers.len()];
        for route in routing.routes() {
            for hop in &route.hops {
                m[hop.link.0][hop.resource.0] = self.powers[hop.link.0];
            }
        }
        m
    }
}

/// One linear SINR target per route, shared by all of its hops.
#[derive(Debug, Clone, PartialEq)]
pub struct SinrTargets(pub Vec<f64>);

/// End-to-end rate per route in bit/s.
#[derive(Debug, Clone, PartialEq)]
pub struct RateVector(pub Vec<f64>);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkClass {
    /// UE transmitting to a base station.
    Uplink,
    /// UE to UE.
    D2d,
    /// Base station to UE.
    Downlink,
}

pub fn link_class(link: &Link, kinds: &[NodeKind]) -> LinkClass {
    if kinds[link.tx.0].is_base_station() {
        LinkClass::Downlink
    } else if kinds[link.rx.0].is_base_station() {
        LinkClass::Uplink
    } else {
        LinkClass::D2d
    }
}

/// Transmit power settings shared by all schemes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PowerParams {
    pub ue_min_dbm: f64,
    pub ue_max_dbm: f64,
    pub bs_power_dbm: f64,
    /// D2D power of the fixed scheme.
    pub fixed_power_dbm: f64,
    /// Open-loop nominal power P0.
    pub p0_dbm: f64,
    /// Open-loop path-loss compensation factor.
    pub alpha: f64,
    /// Resource blocks per UE in the open-loop formula.
    pub rbs_per_ue: usize,
    /// Target of the fixed-SNR and closed-loop schemes.
    pub sinr_target_db: f64,
    pub cl_step_db: f64,
    pub cl_dead_zone_db: f64,
    pub cl_iters: usize,
}

impl Default for PowerParams {
    fn default() -> Self {
        PowerParams {
            ue_min_dbm: -23.0,
            ue_max_dbm: 23.0,
            bs_power_dbm: 40.0,
            fixed_power_dbm: -10.0,
            p0_dbm: -10.0,
            alpha: 0.8,
            rbs_per_ue: 1,
            sinr_target_db: 15.0,
            cl_step_db: 1.0,
            cl_dead_zone_db: 0.5,
            cl_iters: 10,
        }
    }
}

impl PowerParams {
    pub fn validate(&self) -> Result<(), SolverError> {
        let bad = |m: &str| Err(SolverError::InvalidConfig(m.to_string()));
        if !(self.ue_min_dbm <= self.ue_max_dbm) {
            return bad("ue_min_dbm must not exceed ue_max_dbm");
        }
        if self.rbs_per_ue == 0 {
            return bad("rbs_per_ue must be at least 1");
        }
        if !(self.cl_step_db > 0.0 && self.cl_dead_zone_db >= 0.0) {
            return bad("closed-loop step must be positive and dead zone non-negative");
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return bad("alpha must lie in [0, 1]");
        }
        Ok(())
    }

    pub fn ue_bounds(&self) -> PowerBounds {
        PowerBounds::from_dbm(self.ue_min_dbm, self.ue_max_dbm)
    }

    pub fn bounds_for(&self, class: LinkClass) -> PowerBounds {
        match class {
            LinkClass::Downlink => PowerBounds::fixed_dbm(self.bs_power_dbm),
            _ => self.ue_bounds(),
        }
    }
}

/// Read-only view of one drop: links, their routes and resources, gains and
/// per-link power bounds.
#[derive(Debug, Clone)]
pub struct Network<'a> {
    pub links: &'a [Link],
    pub routing: &'a RoutingMatrix,
    pub gains: &'a GainTable,
    pub noise_w: f64,
    pub bandwidth_hz: f64,
    pub bounds: Vec<PowerBounds>,
    assignment: Vec<Option<(RouteId, ResourceId)>>,
    per_resource: Vec<Vec<LinkId>>,
}

impl<'a> Network<'a> {
    pub fn new(
        links: &'a [Link],
        routing: &'a RoutingMatrix,
        gains: &'a GainTable,
        noise_w: f64,
        bandwidth_hz: f64,
        bounds: Vec<PowerBounds>,
    ) -> Self {
        assert_eq!(links.len(), routing.num_links(), "link list and routing matrix disagree");
        assert_eq!(bounds.len(), links.len(), "one power bound per link");
        Network {
            links,
            routing,
            gains,
            noise_w,
            bandwidth_hz,
            bounds,
            assignment: routing.link_assignments(),
            per_resource: routing.links_per_resource(),
        }
    }

    pub fn num_links(&self) -> usize {
        self.links.len()
    }

    pub fn is_active(&self, link: LinkId) -> bool {
        self.assignment[link.0].is_some()
    }

    pub fn resource_of(&self, link: LinkId) -> Option<ResourceId> {
        self.assignment[link.0].map(|(_, q)| q)
    }

    pub fn route_of(&self, link: LinkId) -> Option<RouteId> {
        self.assignment[link.0].map(|(i, _)| i)
    }

    pub fn links_on(&self, q: ResourceId) -> &[LinkId] {
        &self.per_resource[q.0]
    }

    pub fn active_links(&self) -> impl Iterator<Item = LinkId> + '_ {
        (0..self.links.len()).map(LinkId).filter(|&l| self.is_active(l))
    }

    pub fn desired_gain(&self, link: LinkId) -> f64 {
        let l = &self.links[link.0];
        self.gains.gain(l.tx, l.rx)
    }

    /// Large-scale gain of the link, as a UE would measure it for open-loop
    /// power setting.
    pub fn measured_gain(&self, link: LinkId) -> f64 {
        let l = &self.links[link.0];
        self.gains.large_scale(l.tx, l.rx)
    }

    /// Interference plus noise seen by the receiver of `link`.
    pub fn interference_plus_noise(&self, p: &PowerAllocation, link: LinkId) -> f64 {
        let Some(q) = self.resource_of(link) else { return self.noise_w };
        let rx = self.links[link.0].rx;
        let interference: f64 = self
            .links_on(q)
            .iter()
            .filter(|&&k| k != link && self.links[k.0].tx != rx)
            .map(|&k| self.gains.gain(self.links[k.0].tx, rx) * p.powers[k.0])
            .sum();
        self.noise_w + interference
    }
}

/// Total power received by `rx` on resource `q`, summed over every link
/// transmitting on `q` (the wanted signal included). A node's own
/// transmission is not counted.
pub fn received_total_power(p: &PowerAllocation, net: &Network<'_>, rx: NodeId, q: ResourceId) -> f64 {
    net.links_on(q)
        .iter()
        .filter(|&&k| net.links[k.0].tx != rx)
        .map(|&k| net.gains.gain(net.links[k.0].tx, rx) * p.powers[k.0])
        .sum()
}

/// SINR of an active link: `G·P / (σ + (P_tot − G·P))`, with the
/// interference summed directly instead of by subtraction.
pub fn sinr(p: &PowerAllocation, net: &Network<'_>, link: LinkId) -> f64 {
    let signal = net.desired_gain(link) * p.powers[link.0];
    if signal <= 0.0 {
        return 0.0;
    }
    signal / net.interference_plus_noise(p, link)
}

/// SINR of hop `h` (zero-based) of route `i`.
pub fn hop_sinr(p: &PowerAllocation, net: &Network<'_>, route: RouteId, h: usize) -> f64 {
    sinr(p, net, net.routing.route(route).hops[h].link)
}

/// SINR of every link (0 for inactive links).
pub fn all_sinrs(p: &PowerAllocation, net: &Network<'_>) -> Vec<f64> {
    (0..net.num_links()).map(|l| if net.is_active(LinkId(l)) { sinr(p, net, LinkId(l)) } else { 0.0 }).collect()
}

/// Shannon capacity in bit/s.
pub fn capacity(gamma: f64, w_hz: f64) -> f64 {
    w_hz * gamma.max(0.0).ln_1p() / std::f64::consts::LN_2
}

/// End-to-end rate per route: the smallest hop capacity.
pub fn route_rate(p: &PowerAllocation, net: &Network<'_>) -> RateVector {
    let sinrs = all_sinrs(p, net);
    route_rate_from_sinrs(&sinrs, net)
}

pub(crate) fn route_rate_from_sinrs(sinrs: &[f64], net: &Network<'_>) -> RateVector {
    RateVector(
        net.routing
            .routes()
            .iter()
            .map(|r| r.hops.iter().map(|h| capacity(sinrs[h.link.0], net.bandwidth_hz)).fold(f64::INFINITY, f64::min))
            .collect(),
    )
}

/// End-to-end SINR per route: the smallest hop SINR.
pub fn route_sinr(sinrs: &[f64], net: &Network<'_>) -> Vec<f64> {
    net.routing.routes().iter().map(|r| r.hops.iter().map(|h| sinrs[h.link.0]).fold(f64::INFINITY, f64::min)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum PcScheme {
    /// Uplinks: LTE open loop. D2D: fixed power.
    Fix,
    /// Uplinks: LTE open loop. D2D: fixed SNR target.
    #[value(name = "fixsnr")]
    #[serde(rename = "fixsnr")]
    FixSnr,
    /// LTE open loop everywhere.
    Ol,
    /// Uplinks: LTE open loop. D2D: LTE closed loop.
    Cl,
    /// Utility maximization for every UE link.
    Um,
}

impl PcScheme {
    pub fn as_str(self) -> &'static str {
        match self {
            PcScheme::Fix => "fix",
            PcScheme::FixSnr => "fixsnr",
            PcScheme::Ol => "ol",
            PcScheme::Cl => "cl",
            PcScheme::Um => "um",
        }
    }
}

#[derive(Debug, Clone)]
pub struct PcOutcome {
    pub powers: PowerAllocation,
    /// Only for the utility-maximizing scheme.
    pub um: Option<UmOutcome>,
}

fn open_loop_dbm(net: &Network<'_>, link: LinkId, params: &PowerParams) -> f64 {
    let pl_db = -linear_to_db(net.measured_gain(link));
    pc_lte_open_loop(pl_db, params)
}

/// Runs one power control scheme. Downlink hops always transmit at the
/// fixed base-station power.
pub fn run_scheme(
    scheme: PcScheme,
    net: &Network<'_>,
    kinds: &[NodeKind],
    params: &PowerParams,
    um: &UmConfig,
) -> Result<PcOutcome, SolverError> {
    params.validate()?;
    let mut p = PowerAllocation { powers: vec![0.0; net.num_links()], bounds: net.bounds.clone() };
    let classes: Vec<LinkClass> = net.links.iter().map(|l| link_class(l, kinds)).collect();
    if scheme == PcScheme::Um {
        let outcome = um_solve(um, net)?;
        return Ok(PcOutcome { powers: outcome.state.powers.clone(), um: Some(outcome) });
    }
    for l in net.active_links() {
        let class = classes[l.0];
        let dbm = match (class, scheme) {
            (LinkClass::Downlink, _) => params.bs_power_dbm,
            (LinkClass::Uplink, _) | (LinkClass::D2d, PcScheme::Ol | PcScheme::Cl) => open_loop_dbm(net, l, params),
            (LinkClass::D2d, PcScheme::Fix) => pc_fixed(class, || open_loop_dbm(net, l, params), params),
            (LinkClass::D2d, PcScheme::FixSnr) => {
                pc_fixed_snr(params.sinr_target_db, net.measured_gain(l), net.noise_w, &net.bounds[l.0])
            }
            (LinkClass::D2d, PcScheme::Um) => unreachable!("handled above"),
        };
        p.powers[l.0] = net.bounds[l.0].clamp(dbm_to_watts(dbm));
    }
    if scheme == PcScheme::Cl {
        let adaptive: Vec<bool> = classes.iter().map(|&c| c == LinkClass::D2d).collect();
        p = run_closed_loop(net, p, &adaptive, params);
    }
    Ok(PcOutcome { powers: p, um: None })
}

/// Per-link transmit power in dBm (NaN for inactive links).
pub fn powers_dbm(p: &PowerAllocation) -> Vec<f64> {
    p.powers.iter().map(|&w| if w > 0.0 { watts_to_dbm(w) } else { f64::NAN }).collect()
}

#[cfg(test)]
pub(crate) mod testnet {
    use super::*;
    use crate::routing::{Hop, LinkRole, Route, RouteKind};

    /// Single-resource network of `n` D2D links with an explicit gain matrix
    /// `g[rx_link][tx_link]`. Node `2k` transmits and node `2k+1` receives.
    pub struct Instance {
        pub links: Vec<Link>,
        pub routing: RoutingMatrix,
        pub gains: GainTable,
        pub kinds: Vec<NodeKind>,
    }

    impl Instance {
        pub fn single_resource(g: &[Vec<f64>]) -> Self {
            let n = g.len();
            let links: Vec<Link> =
                (0..n).map(|k| Link { tx: NodeId(2 * k), rx: NodeId(2 * k + 1), role: LinkRole::D2dDirect }).collect();
            let routes = (0..n)
                .map(|k| Route {
                    kind: RouteKind::D2dSingleHop,
                    hops: vec![Hop { link: LinkId(k), resource: ResourceId(0) }],
                })
                .collect();
            let routing = RoutingMatrix::new(n, 1, routes).unwrap();
            let gains = GainTable::from_fn(2 * n, |a, b| {
                let (tx, rx) = if a.0 % 2 == 0 && b.0 % 2 == 1 {
                    (a.0 / 2, b.0 / 2)
                } else if b.0 % 2 == 0 && a.0 % 2 == 1 {
                    (b.0 / 2, a.0 / 2)
                } else {
                    return 1e-20;
                };
                g[rx][tx]
            });
            let kinds = (0..2 * n).map(|k| if k % 2 == 0 { NodeKind::D2dTx } else { NodeKind::D2dRx }).collect();
            Instance { links, routing, gains, kinds }
        }

        pub fn network(&self, noise_w: f64, bounds: PowerBounds) -> Network<'_> {
            Network::new(&self.links, &self.routing, &self.gains, noise_w, 180e3, vec![bounds; self.links.len()])
        }
    }
}
