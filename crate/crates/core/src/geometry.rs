//! Network deployment: hexagonal cell layout, random node drops and the
//! large-scale channel gain table shared by every resource block of a drop.
//!
//! The layout is a seven-cell cluster (one centre cell plus one ring) with no
//! wrap-around, so cells on the ring see less interference than the centre
//! cell. Cells are pointy-top hexagons of circumradius `cell_radius_m` and
//! neighbouring base stations sit `sqrt(3) * cell_radius_m` apart.

use std::fmt::Write as _;

use rand::Rng;
use rand_distr::{Distribution, Exp, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::units::db_to_linear;

/// Attempts per node before a drop is declared infeasible.
const MAX_PLACEMENT_ATTEMPTS: usize = 100_000;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("invalid deployment config: {0}")]
    InvalidConfig(String),
    #[error("invalid channel parameters: {0}")]
    InvalidChannel(String),
    #[error("could not place {what} after {attempts} attempts")]
    Infeasible { what: &'static str, attempts: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    /// A D2D pair talks directly, through a relay, or through the base station.
    Proximity,
    /// A coverage-limited D2D transmitter reaches its base station directly or
    /// through a relay.
    RangeExtension,
}

impl ScenarioKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioKind::Proximity => "proximity",
            ScenarioKind::RangeExtension => "range_extension",
        }
    }
}

/// Where the relay of a D2D triplet is dropped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelayPlacement {
    /// Uniform in the disk whose diameter is the segment from the D2D
    /// transmitter to its end point (receiver or serving base station).
    /// The radius is at least `min_ue_ue_m`, otherwise a short pair leaves
    /// no admissible spot for the relay.
    MidpointDisk,
    /// Uniform in the transmitter's cell.
    UniformCell,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeploymentConfig {
    pub num_cells: usize,
    pub cell_radius_m: f64,
    /// Minimum distance from any base station to cellular UEs and to the
    /// D2D transmitter and receiver.
    pub min_bs_ue_m: f64,
    /// Minimum distance from any base station to a relay.
    pub min_bs_relay_m: f64,
    pub min_ue_ue_m: f64,
    pub mean_d2d_pair_m: f64,
    pub cellular_ues_per_cell: usize,
    pub d2d_triplets_per_cell: usize,
    pub relay_placement: RelayPlacement,
}

impl DeploymentConfig {
    pub fn for_scenario(scenario: ScenarioKind) -> Self {
        match scenario {
            ScenarioKind::Proximity => DeploymentConfig {
                num_cells: 7,
                cell_radius_m: 500.0,
                min_bs_ue_m: 50.0,
                min_bs_relay_m: 50.0,
                min_ue_ue_m: 10.0,
                mean_d2d_pair_m: 100.0,
                cellular_ues_per_cell: 6,
                d2d_triplets_per_cell: 6,
                relay_placement: RelayPlacement::MidpointDisk,
            },
            // Every route terminates at the base station here, so 18 triplets
            // already occupy all 18 resource blocks of a cell.
            ScenarioKind::RangeExtension => DeploymentConfig {
                min_bs_ue_m: 400.0,
                cellular_ues_per_cell: 0,
                d2d_triplets_per_cell: 18,
                ..Self::for_scenario(ScenarioKind::Proximity)
            },
        }
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        let bad = |msg: &str| Err(GeometryError::InvalidConfig(msg.to_string()));
        if !(1..=7).contains(&self.num_cells) {
            return bad("num_cells must be between 1 and 7");
        }
        let distances =
            [self.cell_radius_m, self.min_bs_ue_m, self.min_bs_relay_m, self.min_ue_ue_m, self.mean_d2d_pair_m];
        if distances.iter().any(|d| !d.is_finite() || *d <= 0.0) {
            return bad("all distances must be finite and strictly positive");
        }
        if self.min_bs_ue_m >= self.cell_radius_m {
            return bad("min_bs_ue_m must be smaller than cell_radius_m");
        }
        if self.min_bs_relay_m >= self.cell_radius_m {
            return bad("min_bs_relay_m must be smaller than cell_radius_m");
        }
        if self.mean_d2d_pair_m <= self.min_ue_ue_m {
            return bad("mean_d2d_pair_m must exceed min_ue_ue_m");
        }
        Ok(())
    }
}

impl Default for DeploymentConfig {
    fn default() -> Self {
        Self::for_scenario(ScenarioKind::Proximity)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelParams {
    pub gain_1m_db: f64,
    pub pathloss_exponent: f64,
    pub shadowing_sigma_db: f64,
    pub noise_per_rb_dbm: f64,
    pub rb_bandwidth_hz: f64,
    pub carrier_hz: f64,
    pub num_rbs: usize,
    /// Multiply every link by a unit-mean exponential (Rayleigh power) draw.
    pub small_scale_fading: bool,
}

impl Default for ChannelParams {
    fn default() -> Self {
        ChannelParams {
            gain_1m_db: -37.0,
            pathloss_exponent: 3.5,
            shadowing_sigma_db: 8.0,
            noise_per_rb_dbm: -116.4,
            rb_bandwidth_hz: 180e3,
            carrier_hz: 2e9,
            num_rbs: 18,
            small_scale_fading: false,
        }
    }
}

impl ChannelParams {
    pub fn validate(&self) -> Result<(), GeometryError> {
        let bad = |msg: &str| Err(GeometryError::InvalidChannel(msg.to_string()));
        if !(self.pathloss_exponent > 2.0) {
            return bad("pathloss_exponent must exceed 2");
        }
        if !(self.shadowing_sigma_db >= 0.0) {
            return bad("shadowing_sigma_db must be non-negative");
        }
        if !(self.rb_bandwidth_hz > 0.0) {
            return bad("rb_bandwidth_hz must be positive");
        }
        if self.num_rbs == 0 {
            return bad("num_rbs must be at least 1");
        }
        if !self.gain_1m_db.is_finite() || !self.noise_per_rb_dbm.is_finite() {
            return bad("gain_1m_db and noise_per_rb_dbm must be finite");
        }
        Ok(())
    }
}

/// Deterministic distance-dependent gain plus a given shadowing term, in dB.
/// Distances below 1 m are clamped to 1 m.
pub fn path_gain_db(d_m: f64, shadow_db: f64, params: &ChannelParams) -> f64 {
    let d = d_m.max(1.0);
    params.gain_1m_db - 10.0 * params.pathloss_exponent * d.log10() + shadow_db
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    BaseStation,
    CellularUe,
    D2dTx,
    D2dRelay,
    D2dRx,
}

impl NodeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            NodeKind::BaseStation => "bs",
            NodeKind::CellularUe => "cellular_ue",
            NodeKind::D2dTx => "d2d_tx",
            NodeKind::D2dRelay => "d2d_relay",
            NodeKind::D2dRx => "d2d_rx",
        }
    }

    pub fn is_base_station(self) -> bool {
        self == NodeKind::BaseStation
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Node {
    pub kind: NodeKind,
    pub cell: usize,
    pub pos: Point,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellularUe {
    pub node: NodeId,
    pub cell: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct D2dTriplet {
    pub tx: NodeId,
    pub relay: NodeId,
    pub rx: NodeId,
    pub cell: usize,
}

/// Node positions of one drop. Base stations occupy node ids `0..num_cells`,
/// with base station `c` serving cell `c`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    pub nodes: Vec<Node>,
    pub cellular_ues: Vec<CellularUe>,
    pub triplets: Vec<D2dTriplet>,
    pub num_cells: usize,
}

impl Layout {
    pub fn bs_of_cell(&self, cell: usize) -> NodeId {
        NodeId(cell)
    }

    pub fn bs_positions(&self) -> impl Iterator<Item = Point> + '_ {
        self.nodes[..self.num_cells].iter().map(|n| n.pos)
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.0]
    }

    pub fn kinds(&self) -> Vec<NodeKind> {
        self.nodes.iter().map(|n| n.kind).collect()
    }

    pub fn distance(&self, a: NodeId, b: NodeId) -> f64 {
        self.nodes[a.0].pos.distance(self.nodes[b.0].pos)
    }

    /// CSV dump with header `node_id,kind,cell,x_m,y_m`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("node_id,kind,cell,x_m,y_m\n");
        for (id, n) in self.nodes.iter().enumerate() {
            let _ = writeln!(out, "{},{},{},{:.3},{:.3}", id, n.kind.as_str(), n.cell, n.pos.x, n.pos.y);
        }
        out
    }
}

/// Linear power gains between every ordered node pair. Large-scale gains are
/// symmetric; the effective gains additionally carry small-scale fading when
/// it is enabled.
#[derive(Debug, Clone, PartialEq)]
pub struct GainTable {
    n: usize,
    large_scale: Vec<f64>,
    fading: Option<Vec<f64>>,
}

impl GainTable {
    pub fn num_nodes(&self) -> usize {
        self.n
    }

    /// Gain used for SINR evaluation.
    #[inline]
    pub fn gain(&self, tx: NodeId, rx: NodeId) -> f64 {
        let idx = tx.0 * self.n + rx.0;
        match &self.fading {
            Some(f) => self.large_scale[idx] * f[idx],
            None => self.large_scale[idx],
        }
    }

    /// Path loss plus shadowing only; what mode selection measures.
    #[inline]
    pub fn large_scale(&self, tx: NodeId, rx: NodeId) -> f64 {
        self.large_scale[tx.0 * self.n + rx.0]
    }

    /// Builds a table from explicit gains; `gain(i, j)` is called for `i != j`.
    /// Diagonal entries are set to 1 and never used.
    pub fn from_fn(n: usize, mut gain: impl FnMut(NodeId, NodeId) -> f64) -> Self {
        let mut large_scale = vec![1.0; n * n];
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    large_scale[i * n + j] = gain(NodeId(i), NodeId(j));
                }
            }
        }
        GainTable { n, large_scale, fading: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Deployment {
    pub scenario: ScenarioKind,
    pub layout: Layout,
    pub gains: GainTable,
}

/// Base station positions of the seven-cell cluster (centre first).
pub fn bs_positions(num_cells: usize, cell_radius_m: f64) -> Vec<Point> {
    let spacing = 3f64.sqrt() * cell_radius_m;
    let mut out = vec![Point::new(0.0, 0.0)];
    for k in 0..6 {
        let a = std::f64::consts::FRAC_PI_3 * k as f64;
        out.push(Point::new(spacing * a.cos(), spacing * a.sin()));
    }
    out.truncate(num_cells);
    out
}

/// Whether `p` lies in the pointy-top hexagon of circumradius `r` centred at `c`.
pub fn in_hexagon(p: Point, c: Point, r: f64) -> bool {
    let (dx, dy) = (p.x - c.x, p.y - c.y);
    let apothem = r * 3f64.sqrt() / 2.0;
    let s = 3f64.sqrt() / 2.0;
    dx.abs() <= apothem && (0.5 * dx + s * dy).abs() <= apothem && (-0.5 * dx + s * dy).abs() <= apothem
}

fn uniform_in_hexagon<R: Rng + ?Sized>(rng: &mut R, c: Point, r: f64) -> Point {
    let half_w = r * 3f64.sqrt() / 2.0;
    loop {
        let p = Point::new(c.x + rng.random_range(-half_w..=half_w), c.y + rng.random_range(-r..=r));
        if in_hexagon(p, c, r) {
            return p;
        }
    }
}

fn uniform_in_disk<R: Rng + ?Sized>(rng: &mut R, c: Point, radius: f64) -> Point {
    let rho = radius * rng.random::<f64>().sqrt();
    let theta = rng.random_range(0.0..std::f64::consts::TAU);
    Point::new(c.x + rho * theta.cos(), c.y + rho * theta.sin())
}

struct Placer<'a> {
    config: &'a DeploymentConfig,
    bs: Vec<Point>,
    ues: Vec<Point>,
}

impl Placer<'_> {
    fn admissible(&self, p: Point, min_bs: f64) -> bool {
        self.bs.iter().all(|b| b.distance(p) >= min_bs)
            && self.ues.iter().all(|u| u.distance(p) >= self.config.min_ue_ue_m)
    }

    fn place(
        &mut self,
        what: &'static str,
        min_bs: f64,
        mut draw: impl FnMut() -> Point,
    ) -> Result<Point, GeometryError> {
        for _ in 0..MAX_PLACEMENT_ATTEMPTS {
            let p = draw();
            if self.admissible(p, min_bs) {
                self.ues.push(p);
                return Ok(p);
            }
        }
        Err(GeometryError::Infeasible { what, attempts: MAX_PLACEMENT_ATTEMPTS })
    }
}

/// Drops base stations, cellular UEs and D2D triplets.
///
/// The D2D receiver sits at `min_ue_ue_m + Exp(mean_d2d_pair_m - min_ue_ue_m)`
/// from the transmitter, in a uniform direction, so the pair distance has
/// the configured mean and never violates the UE-UE minimum. In the range
/// extension scenario the receiver is still dropped but no route uses it.
pub fn place_nodes<R: Rng + ?Sized>(
    config: &DeploymentConfig,
    scenario: ScenarioKind,
    rng: &mut R,
) -> Result<Layout, GeometryError> {
    config.validate()?;
    let bs = bs_positions(config.num_cells, config.cell_radius_m);
    let r = config.cell_radius_m;
    let pair_excess = Exp::new(1.0 / (config.mean_d2d_pair_m - config.min_ue_ue_m))
        .map_err(|e| GeometryError::InvalidConfig(e.to_string()))?;

    let mut nodes: Vec<Node> =
        bs.iter().enumerate().map(|(cell, &pos)| Node { kind: NodeKind::BaseStation, cell, pos }).collect();
    let mut placer = Placer { config, bs: bs.clone(), ues: Vec::new() };
    let push = |nodes: &mut Vec<Node>, kind, cell, pos| {
        nodes.push(Node { kind, cell, pos });
        NodeId(nodes.len() - 1)
    };

    let mut cellular_ues = Vec::with_capacity(config.num_cells * config.cellular_ues_per_cell);
    for (cell, &centre) in bs.iter().enumerate() {
        for _ in 0..config.cellular_ues_per_cell {
            let pos = placer.place("cellular UE", config.min_bs_ue_m, || uniform_in_hexagon(rng, centre, r))?;
            let node = push(&mut nodes, NodeKind::CellularUe, cell, pos);
            cellular_ues.push(CellularUe { node, cell });
        }
    }

    let mut triplets = Vec::with_capacity(config.num_cells * config.d2d_triplets_per_cell);
    for (cell, &centre) in bs.iter().enumerate() {
        for _ in 0..config.d2d_triplets_per_cell {
            let tx_pos = placer.place("D2D transmitter", config.min_bs_ue_m, || uniform_in_hexagon(rng, centre, r))?;
            let rx_pos = placer.place("D2D receiver", config.min_bs_ue_m, || {
                let d = config.min_ue_ue_m + pair_excess.sample(rng);
                let theta = rng.random_range(0.0..std::f64::consts::TAU);
                Point::new(tx_pos.x + d * theta.cos(), tx_pos.y + d * theta.sin())
            })?;
            let end = match scenario {
                ScenarioKind::Proximity => rx_pos,
                ScenarioKind::RangeExtension => centre,
            };
            let relay_pos = placer.place("D2D relay", config.min_bs_relay_m, || match config.relay_placement {
                RelayPlacement::MidpointDisk => {
                    let mid = Point::new(0.5 * (tx_pos.x + end.x), 0.5 * (tx_pos.y + end.y));
                    uniform_in_disk(rng, mid, (0.5 * tx_pos.distance(end)).max(config.min_ue_ue_m))
                }
                RelayPlacement::UniformCell => uniform_in_hexagon(rng, centre, r),
            })?;
            let tx = push(&mut nodes, NodeKind::D2dTx, cell, tx_pos);
            let relay = push(&mut nodes, NodeKind::D2dRelay, cell, relay_pos);
            let rx = push(&mut nodes, NodeKind::D2dRx, cell, rx_pos);
            triplets.push(D2dTriplet { tx, relay, rx, cell });
        }
    }

    Ok(Layout { nodes, cellular_ues, triplets, num_cells: config.num_cells })
}

/// One independent shadowing draw per unordered node pair, converted to
/// linear gains. With fading enabled, one unit-mean exponential draw per
/// unordered pair multiplies the effective gain.
pub fn build_gain_table<R: Rng + ?Sized>(
    layout: &Layout,
    params: &ChannelParams,
    rng: &mut R,
) -> Result<GainTable, GeometryError> {
    params.validate()?;
    let n = layout.nodes.len();
    let shadowing =
        Normal::new(0.0, params.shadowing_sigma_db).map_err(|e| GeometryError::InvalidChannel(e.to_string()))?;
    let mut large_scale = vec![1.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = layout.nodes[i].pos.distance(layout.nodes[j].pos);
            let g = db_to_linear(path_gain_db(d, shadowing.sample(rng), params));
            large_scale[i * n + j] = g;
            large_scale[j * n + i] = g;
        }
    }
    let fading = if params.small_scale_fading {
        let exp = Exp::new(1.0).expect("unit rate");
        let mut f = vec![1.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let h: f64 = exp.sample(rng);
                f[i * n + j] = h;
                f[j * n + i] = h;
            }
        }
        Some(f)
    } else {
        None
    };
    Ok(GainTable { n, large_scale, fading })
}

pub fn generate_deployment<R: Rng + ?Sized>(
    config: &DeploymentConfig,
    params: &ChannelParams,
    scenario: ScenarioKind,
    rng: &mut R,
) -> Result<Deployment, GeometryError> {
    let layout = place_nodes(config, scenario, rng)?;
    let gains = build_gain_table(&layout, params, rng)?;
    Ok(Deployment { scenario, layout, gains })
}
