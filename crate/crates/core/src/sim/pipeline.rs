//! One Monte Carlo drop: deployment, mode selection, routes, resource
//! allocation, power control and measurement.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::config::SimConfig;
use crate::geometry::{generate_deployment, Deployment, GeometryError, NodeKind, ScenarioKind};
use crate::modeselect::{select_modes, ModeDecision, ModeSelectError};
use crate::powerctl::{all_sinrs, capacity, link_class, run_scheme, LinkClass, Network, PcOutcome, SolverError};
use crate::resalloc::{allocate_random, AllocationError, AllocationProblem, RouteSkeleton};
use crate::routing::{validate, Link, LinkId, LinkRole, RouteKind, RoutingMatrix};
use crate::units::{dbm_to_watts, linear_to_db, watts_to_dbm};

const DEPLOYMENT_STREAM: u64 = 0;
const ALLOCATION_STREAM: u64 = 1;

#[derive(Debug, Error)]
pub enum DropError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    ModeSelect(#[from] ModeSelectError),
    #[error(transparent)]
    Allocation(#[from] AllocationError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("allocation violates constraints: {0}")]
    Violations(String),
}

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Generator for one stream of one drop:
/// `ChaCha8(mix64(seed ^ mix64(drop_index)))` on stream `stream`.
/// Stream 0 drives the deployment, stream 1 the resource allocation, so
/// every policy and scheme sees the same deployments.
pub fn drop_rng(seed: u64, drop_index: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(mix64(seed ^ mix64(drop_index)));
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntityKind {
    CellularUe,
    /// The transmitter of a D2D triplet.
    D2dCandidate,
}

impl EntityKind {
    pub const ALL: [EntityKind; 2] = [EntityKind::CellularUe, EntityKind::D2dCandidate];

    pub fn as_str(self) -> &'static str {
        match self {
            EntityKind::CellularUe => "cellular_ue",
            EntityKind::D2dCandidate => "d2d",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityRecord {
    pub kind: EntityKind,
    pub mode: ModeDecision,
    /// Smallest hop SINR of the route.
    pub sinr_db: f64,
    pub hop_power_dbm: Vec<f64>,
    pub rate_bps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DropStats {
    pub drop_index: usize,
    /// Cellular UEs first, then D2D candidates, in deployment order.
    pub records: Vec<EntityRecord>,
    /// Sum of UE transmit powers; base-station power is not included.
    pub total_power_w: f64,
}

/// Links and route skeletons of one drop, one route per entity.
#[derive(Debug, Clone)]
pub struct RoutePlan {
    pub links: Vec<Link>,
    pub routes: Vec<RouteSkeleton>,
    pub entities: Vec<(EntityKind, ModeDecision)>,
}

impl RoutePlan {
    fn push_route(&mut self, entity: (EntityKind, ModeDecision), kind: RouteKind, hops: &[Link]) {
        let start = self.links.len();
        self.links.extend_from_slice(hops);
        let hop_links = (start..self.links.len()).map(LinkId).collect();
        self.routes.push(RouteSkeleton { kind, hop_links });
        self.entities.push(entity);
    }
}

/// Builds the route of every cellular UE and D2D triplet from the chosen
/// modes. Cellular UEs send to their own base station. A D2D pair in
/// cellular mode goes through the base station of the transmitter's cell;
/// in range extension the base station is the destination, so cellular
/// mode is the direct uplink and a relay route ends at the base station.
pub fn build_routes(deployment: &Deployment, modes: &[ModeDecision]) -> RoutePlan {
    let layout = &deployment.layout;
    assert_eq!(modes.len(), layout.triplets.len(), "one mode per triplet");
    let mut plan = RoutePlan { links: Vec::new(), routes: Vec::new(), entities: Vec::new() };
    let link = |tx, rx, role| Link { tx, rx, role };

    for ue in &layout.cellular_ues {
        let bs = layout.bs_of_cell(ue.cell);
        plan.push_route(
            (EntityKind::CellularUe, ModeDecision::Cellular),
            RouteKind::CellularDirect,
            &[link(ue.node, bs, LinkRole::CellularUplink)],
        );
    }

    for (t, &mode) in layout.triplets.iter().zip(modes) {
        let bs = layout.bs_of_cell(t.cell);
        let entity = (EntityKind::D2dCandidate, mode);
        match (deployment.scenario, mode) {
            (ScenarioKind::Proximity, ModeDecision::Cellular) => plan.push_route(
                entity,
                RouteKind::CellularViaBs,
                &[link(t.tx, bs, LinkRole::CellularUplink), link(bs, t.rx, LinkRole::BsDownlink)],
            ),
            (ScenarioKind::Proximity, ModeDecision::D2dSingleHop) => {
                plan.push_route(entity, RouteKind::D2dSingleHop, &[link(t.tx, t.rx, LinkRole::D2dDirect)])
            }
            (ScenarioKind::Proximity, ModeDecision::D2dTwoHop) => plan.push_route(
                entity,
                RouteKind::D2dTwoHop,
                &[link(t.tx, t.relay, LinkRole::D2dFirstHop), link(t.relay, t.rx, LinkRole::D2dSecondHop)],
            ),
            (ScenarioKind::RangeExtension, ModeDecision::Cellular | ModeDecision::D2dSingleHop) => {
                plan.push_route(entity, RouteKind::CellularDirect, &[link(t.tx, bs, LinkRole::CellularUplink)])
            }
            (ScenarioKind::RangeExtension, ModeDecision::D2dTwoHop) => plan.push_route(
                entity,
                RouteKind::D2dTwoHop,
                &[link(t.tx, t.relay, LinkRole::D2dFirstHop), link(t.relay, bs, LinkRole::D2dSecondHop)],
            ),
        }
    }
    plan
}

/// Everything a drop produces before power control.
#[derive(Debug, Clone)]
pub struct PreparedDrop {
    pub deployment: Deployment,
    pub kinds: Vec<NodeKind>,
    pub plan: RoutePlan,
    pub routing: RoutingMatrix,
}

impl PreparedDrop {
    pub fn network(&self, config: &SimConfig) -> Network<'_> {
        let bounds = self.plan.links.iter().map(|l| config.power.bounds_for(link_class(l, &self.kinds))).collect();
        Network::new(
            &self.plan.links,
            &self.routing,
            &self.deployment.gains,
            dbm_to_watts(config.channel.noise_per_rb_dbm),
            config.channel.rb_bandwidth_hz,
            bounds,
        )
    }
}

pub fn prepare_drop(config: &SimConfig, drop_index: usize) -> Result<PreparedDrop, DropError> {
    let mut rng = drop_rng(config.seed, drop_index as u64, DEPLOYMENT_STREAM);
    let deployment = generate_deployment(&config.deployment, &config.channel, config.scenario, &mut rng)?;
    let modes = select_modes(config.mode_selection, config.scenario, &deployment)?;
    let plan = build_routes(&deployment, &modes);
    let kinds = deployment.layout.kinds();

    let problem = AllocationProblem {
        links: plan.links.clone(),
        routes: plan.routes.clone(),
        num_resources: config.channel.num_rbs,
        node_kinds: kinds.clone(),
    };
    let mut rng = drop_rng(config.seed, drop_index as u64, ALLOCATION_STREAM);
    let routing = allocate_random(&problem, &mut rng)?;
    let violations = validate(&routing, &plan.links, &kinds);
    if !violations.is_empty() {
        let text: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
        return Err(DropError::Violations(text.join("; ")));
    }
    Ok(PreparedDrop { deployment, kinds, plan, routing })
}

/// Runs the configured power control on a prepared drop.
pub fn power_control(config: &SimConfig, drop: &PreparedDrop) -> Result<PcOutcome, DropError> {
    let net = drop.network(config);
    Ok(run_scheme(config.power_control, &net, &drop.kinds, &config.power, &config.um_config())?)
}

pub fn run_drop(config: &SimConfig, drop_index: usize) -> Result<DropStats, DropError> {
    let drop = prepare_drop(config, drop_index)?;
    let net = drop.network(config);
    let outcome = run_scheme(config.power_control, &net, &drop.kinds, &config.power, &config.um_config())?;
    let p = &outcome.powers;
    let sinrs = all_sinrs(p, &net);

    let records = drop
        .routing
        .routes()
        .iter()
        .zip(&drop.plan.entities)
        .map(|(route, &(kind, mode))| {
            let sinr = route.hops.iter().map(|h| sinrs[h.link.0]).fold(f64::INFINITY, f64::min);
            EntityRecord {
                kind,
                mode,
                sinr_db: linear_to_db(sinr),
                hop_power_dbm: route.hops.iter().map(|h| watts_to_dbm(p.powers[h.link.0])).collect(),
                rate_bps: capacity(sinr, net.bandwidth_hz),
            }
        })
        .collect();

    let total_power_w = net
        .active_links()
        .filter(|l| link_class(&drop.plan.links[l.0], &drop.kinds) != LinkClass::Downlink)
        .map(|l| p.powers[l.0])
        .sum();

    Ok(DropStats { drop_index, records, total_power_w })
}
