//! Links, routes and the link × route × resource routing tensor.
//!
//! A link is one transmitter-receiver hop; a route is the ordered list of one
//! or two links that carries the data of a source-destination pair, each hop
//! on exactly one resource block. The routing tensor `r[l][i][q]` is stored
//! sparsely as the hop list of every route. [`RoutingTensor`] is the dense
//! view, used for inspection and in tests.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{NodeId, NodeKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LinkId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RouteId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ResourceId(pub usize);

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RoutingError {
    #[error("route {route} has {hops} hops; only 1 or 2 are supported")]
    HopCount { route: usize, hops: usize },
    #[error("route {route} references link {link} but only {num_links} links exist")]
    LinkOutOfRange { route: usize, link: usize, num_links: usize },
    #[error("route {route} references resource {resource} but only {num_resources} exist")]
    ResourceOutOfRange { route: usize, resource: usize, num_resources: usize },
    #[error("link {link} and resource {resource} are claimed by routes {first} and {second}")]
    SharedLinkResource { link: usize, resource: usize, first: usize, second: usize },
    #[error("link {link} carries route {route} on more than one resource")]
    SpreadAcrossResources { link: usize, route: usize },
    #[error("hop {hop} is out of range for a route with {hops} hops")]
    HopOutOfRange { hop: usize, hops: usize },
    #[error("route {route} has no hops in the tensor")]
    EmptyRoute { route: usize },
    #[error("the hops of route {route} do not form a chain")]
    BrokenChain { route: usize },
    #[error("tensor dimensions do not match: {0}")]
    Dimensions(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkRole {
    CellularUplink,
    D2dDirect,
    D2dFirstHop,
    D2dSecondHop,
    BsDownlink,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Link {
    pub tx: NodeId,
    pub rx: NodeId,
    pub role: LinkRole,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RouteKind {
    /// UE straight to its base station.
    CellularDirect,
    /// D2D pair served through the base station: uplink then downlink.
    CellularViaBs,
    D2dSingleHop,
    /// Through a D2D relay; the end point is a UE or a base station.
    D2dTwoHop,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Hop {
    pub link: LinkId,
    pub resource: ResourceId,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Route {
    pub kind: RouteKind,
    pub hops: Vec<Hop>,
}

impl Route {
    /// Number of hops, 1 or 2.
    pub fn num_hops(&self) -> usize {
        self.hops.len()
    }

    /// Link and resource of the hop at zero-based position `hop`.
    pub fn hop(&self, hop: usize) -> Result<(LinkId, ResourceId), RoutingError> {
        self.hops
            .get(hop)
            .map(|h| (h.link, h.resource))
            .ok_or(RoutingError::HopOutOfRange { hop, hops: self.hops.len() })
    }
}

/// Sparse routing tensor: every route with its (link, resource) hops.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoutingMatrix {
    num_links: usize,
    num_resources: usize,
    routes: Vec<Route>,
}

impl RoutingMatrix {
    /// Checks shape only: hop counts, index ranges, that no (link, resource)
    /// cell belongs to two routes and that no route uses a link twice.
    /// Allocation constraints are checked by [`validate`].
    pub fn new(num_links: usize, num_resources: usize, routes: Vec<Route>) -> Result<Self, RoutingError> {
        let mut owner: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        for (i, route) in routes.iter().enumerate() {
            if !(1..=2).contains(&route.hops.len()) {
                return Err(RoutingError::HopCount { route: i, hops: route.hops.len() });
            }
            for hop in &route.hops {
                if hop.link.0 >= num_links {
                    return Err(RoutingError::LinkOutOfRange { route: i, link: hop.link.0, num_links });
                }
                if hop.resource.0 >= num_resources {
                    return Err(RoutingError::ResourceOutOfRange { route: i, resource: hop.resource.0, num_resources });
                }
                if let Some(&first) = owner.get(&(hop.link.0, hop.resource.0)) {
                    if first == i {
                        return Err(RoutingError::SpreadAcrossResources { link: hop.link.0, route: i });
                    }
                    return Err(RoutingError::SharedLinkResource {
                        link: hop.link.0,
                        resource: hop.resource.0,
                        first,
                        second: i,
                    });
                }
                owner.insert((hop.link.0, hop.resource.0), i);
            }
            if route.hops.len() == 2 && route.hops[0].link == route.hops[1].link {
                return Err(RoutingError::SpreadAcrossResources { link: route.hops[0].link.0, route: i });
            }
        }
        Ok(RoutingMatrix { num_links, num_resources, routes })
    }

    pub fn num_links(&self) -> usize {
        self.num_links
    }

    pub fn num_routes(&self) -> usize {
        self.routes.len()
    }

    pub fn num_resources(&self) -> usize {
        self.num_resources
    }

    pub fn routes(&self) -> &[Route] {
        &self.routes
    }

    pub fn route(&self, id: RouteId) -> &Route {
        &self.routes[id.0]
    }

    /// Mutable access for building deliberately broken instances.
    pub fn routes_mut(&mut self) -> &mut Vec<Route> {
        &mut self.routes
    }

    /// For each link, the route and resource it serves (`None` if inactive).
    /// When a link is (invalidly) shared the last route wins.
    pub fn link_assignments(&self) -> Vec<Option<(RouteId, ResourceId)>> {
        let mut out = vec![None; self.num_links];
        for (i, route) in self.routes.iter().enumerate() {
            for hop in &route.hops {
                out[hop.link.0] = Some((RouteId(i), hop.resource));
            }
        }
        out
    }

    /// Active links grouped by resource block.
    pub fn links_per_resource(&self) -> Vec<Vec<LinkId>> {
        let mut out = vec![Vec::new(); self.num_resources];
        for route in &self.routes {
            for hop in &route.hops {
                out[hop.resource.0].push(hop.link);
            }
        }
        for links in &mut out {
            links.sort();
        }
        out
    }

    pub fn to_tensor(&self) -> RoutingTensor {
        let mut t = RoutingTensor::zeros(self.num_links, self.routes.len(), self.num_resources);
        for (i, route) in self.routes.iter().enumerate() {
            for hop in &route.hops {
                t.set(hop.link.0, i, hop.resource.0, true);
            }
        }
        t
    }

    /// Equivalent L × I matrix: entry (l, i) is 1 iff link l serves route i.
    pub fn equivalent(&self) -> Vec<Vec<u8>> {
        let mut m = vec![vec![0u8; self.routes.len()]; self.num_links];
        for (i, route) in self.routes.iter().enumerate() {
            for hop in &route.hops {
                m[hop.link.0][i] += 1;
            }
        }
        m
    }

    /// Rebuilds routes from a dense tensor. Hop order follows the chain of
    /// link end points and route kinds are inferred from the node kinds.
    pub fn from_tensor(tensor: &RoutingTensor, links: &[Link], kinds: &[NodeKind]) -> Result<Self, RoutingError> {
        if links.len() != tensor.num_links() {
            return Err(RoutingError::Dimensions(format!(
                "{} links given for a tensor with {} link rows",
                links.len(),
                tensor.num_links()
            )));
        }
        let is_bs = |n: NodeId| kinds[n.0].is_base_station();
        let mut routes = Vec::with_capacity(tensor.num_routes());
        for i in 0..tensor.num_routes() {
            let mut hops: Vec<Hop> = Vec::new();
            for l in 0..tensor.num_links() {
                for q in 0..tensor.num_resources() {
                    if tensor.get(l, i, q) {
                        hops.push(Hop { link: LinkId(l), resource: ResourceId(q) });
                    }
                }
            }
            let kind = match hops.len() {
                0 => return Err(RoutingError::EmptyRoute { route: i }),
                1 => {
                    if is_bs(links[hops[0].link.0].rx) {
                        RouteKind::CellularDirect
                    } else {
                        RouteKind::D2dSingleHop
                    }
                }
                2 => {
                    let (a, b) = (links[hops[0].link.0], links[hops[1].link.0]);
                    if b.rx == a.tx {
                        hops.swap(0, 1);
                    } else if a.rx != b.tx {
                        return Err(RoutingError::BrokenChain { route: i });
                    }
                    if is_bs(links[hops[0].link.0].rx) {
                        RouteKind::CellularViaBs
                    } else {
                        RouteKind::D2dTwoHop
                    }
                }
                n => return Err(RoutingError::HopCount { route: i, hops: n }),
            };
            routes.push(Route { kind, hops });
        }
        RoutingMatrix::new(tensor.num_links(), tensor.num_resources(), routes)
    }

    /// CSV dump with header `route_id,hop,link_id,resource,tx_node,rx_node`.
    /// Hops are numbered from 1.
    pub fn to_csv(&self, links: &[Link]) -> String {
        let mut out = String::from("route_id,hop,link_id,resource,tx_node,rx_node\n");
        for (i, route) in self.routes.iter().enumerate() {
            for (h, hop) in route.hops.iter().enumerate() {
                let link = &links[hop.link.0];
                let _ = writeln!(out, "{},{},{},{},{},{}", i, h + 1, hop.link.0, hop.resource.0, link.tx.0, link.rx.0);
            }
        }
        out
    }
}

/// Dense boolean tensor of shape links × routes × resources.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoutingTensor {
    dims: (usize, usize, usize),
    bits: Vec<bool>,
}

impl RoutingTensor {
    pub fn zeros(links: usize, routes: usize, resources: usize) -> Self {
        RoutingTensor { dims: (links, routes, resources), bits: vec![false; links * routes * resources] }
    }

    /// Builds the tensor from one L × I slice per resource.
    pub fn from_slices(slices: &[Vec<Vec<u8>>]) -> Result<Self, RoutingError> {
        let q = slices.len();
        let l = slices.first().map_or(0, |s| s.len());
        let i = slices.first().and_then(|s| s.first()).map_or(0, |r| r.len());
        let mut t = RoutingTensor::zeros(l, i, q);
        for (qi, slice) in slices.iter().enumerate() {
            if slice.len() != l || slice.iter().any(|row| row.len() != i) {
                return Err(RoutingError::Dimensions(format!("slice {qi} is not {l}x{i}")));
            }
            for (li, row) in slice.iter().enumerate() {
                for (ii, &v) in row.iter().enumerate() {
                    t.set(li, ii, qi, v != 0);
                }
            }
        }
        Ok(t)
    }

    pub fn num_links(&self) -> usize {
        self.dims.0
    }

    pub fn num_routes(&self) -> usize {
        self.dims.1
    }

    pub fn num_resources(&self) -> usize {
        self.dims.2
    }

    #[inline]
    fn index(&self, l: usize, i: usize, q: usize) -> usize {
        (l * self.dims.1 + i) * self.dims.2 + q
    }

    pub fn get(&self, l: usize, i: usize, q: usize) -> bool {
        self.bits[self.index(l, i, q)]
    }

    pub fn set(&mut self, l: usize, i: usize, q: usize, v: bool) {
        let idx = self.index(l, i, q);
        self.bits[idx] = v;
    }

    /// Sum over resources. Fails if a link carries a route on two resources.
    pub fn equivalent(&self) -> Result<Vec<Vec<u8>>, RoutingError> {
        let (nl, ni, nq) = self.dims;
        let mut m = vec![vec![0u8; ni]; nl];
        for (l, row) in m.iter_mut().enumerate() {
            for (i, cell) in row.iter_mut().enumerate() {
                let count = (0..nq).filter(|&q| self.get(l, i, q)).count();
                if count > 1 {
                    return Err(RoutingError::SpreadAcrossResources { link: l, route: i });
                }
                *cell = count as u8;
            }
        }
        Ok(m)
    }
}

/// Free-function form of [`RoutingTensor::equivalent`].
pub fn equivalent_routing_matrix(tensor: &RoutingTensor) -> Result<Vec<Vec<u8>>, RoutingError> {
    tensor.equivalent()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Constraint {
    /// Each link serves one route and each UE transmits to one receiver.
    SingleReceiver,
    /// A relay does not receive and transmit on the same resource.
    HalfDuplex,
    /// Links into or out of one base station use distinct resources.
    BsOrthogonality,
    /// Malformed links or routes.
    Structure,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    LinkSharedByRoutes { link: LinkId, routes: Vec<RouteId> },
    MultipleReceivers { node: NodeId, links: Vec<LinkId> },
    HalfDuplex { route: RouteId, resource: ResourceId },
    BsOrthogonality { bs: NodeId, resource: ResourceId, links: Vec<LinkId> },
    SelfLink { link: LinkId },
    BrokenChain { route: RouteId },
}

impl Violation {
    pub fn constraint(&self) -> Constraint {
        match self {
            Violation::LinkSharedByRoutes { .. } | Violation::MultipleReceivers { .. } => Constraint::SingleReceiver,
            Violation::HalfDuplex { .. } => Constraint::HalfDuplex,
            Violation::BsOrthogonality { .. } => Constraint::BsOrthogonality,
            Violation::SelfLink { .. } | Violation::BrokenChain { .. } => Constraint::Structure,
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::LinkSharedByRoutes { link, routes } => write!(f, "link {} serves routes {:?}", link.0, routes),
            Violation::MultipleReceivers { node, links } => {
                write!(f, "node {} transmits on links {:?}", node.0, links)
            }
            Violation::HalfDuplex { route, resource } => {
                write!(f, "route {} uses resource {} on both hops", route.0, resource.0)
            }
            Violation::BsOrthogonality { bs, resource, links } => {
                write!(f, "base station {} has links {:?} on resource {}", bs.0, links, resource.0)
            }
            Violation::SelfLink { link } => write!(f, "link {} has tx == rx", link.0),
            Violation::BrokenChain { route } => write!(f, "hops of route {} do not chain", route.0),
        }
    }
}

/// Checks the allocation constraints and returns every violation found.
///
/// Base stations may transmit to several receivers (one per resource); every
/// other node may have at most one outgoing active link, which also forbids a
/// relay from serving two routes.
pub fn validate(r: &RoutingMatrix, links: &[Link], kinds: &[NodeKind]) -> Vec<Violation> {
    let mut out = Vec::new();
    let is_bs = |n: NodeId| kinds[n.0].is_base_station();

    let mut routes_of_link: BTreeMap<LinkId, BTreeSet<RouteId>> = BTreeMap::new();
    for (i, route) in r.routes().iter().enumerate() {
        for hop in &route.hops {
            routes_of_link.entry(hop.link).or_default().insert(RouteId(i));
        }
    }

    for &link in routes_of_link.keys() {
        let l = &links[link.0];
        if l.tx == l.rx {
            out.push(Violation::SelfLink { link });
        }
    }
    for (i, route) in r.routes().iter().enumerate() {
        if let [a, b] = route.hops[..] {
            if links[a.link.0].rx != links[b.link.0].tx {
                out.push(Violation::BrokenChain { route: RouteId(i) });
            }
        }
    }

    for (&link, routes) in &routes_of_link {
        if routes.len() > 1 {
            out.push(Violation::LinkSharedByRoutes { link, routes: routes.iter().copied().collect() });
        }
    }
    let mut links_of_tx: BTreeMap<NodeId, Vec<LinkId>> = BTreeMap::new();
    for &link in routes_of_link.keys() {
        let tx = links[link.0].tx;
        if !is_bs(tx) {
            links_of_tx.entry(tx).or_default().push(link);
        }
    }
    for (node, links) in links_of_tx {
        if links.len() > 1 {
            out.push(Violation::MultipleReceivers { node, links });
        }
    }

    for (i, route) in r.routes().iter().enumerate() {
        if let [a, b] = route.hops[..] {
            if a.resource == b.resource {
                out.push(Violation::HalfDuplex { route: RouteId(i), resource: a.resource });
            }
        }
    }

    // A (link, resource) cell is counted once even if several routes claim the link.
    let mut bs_usage: BTreeMap<(NodeId, ResourceId), BTreeSet<LinkId>> = BTreeMap::new();
    for route in r.routes() {
        for hop in &route.hops {
            let l = &links[hop.link.0];
            for node in [l.tx, l.rx] {
                if is_bs(node) {
                    bs_usage.entry((node, hop.resource)).or_default().insert(hop.link);
                }
            }
        }
    }
    for ((bs, resource), links) in bs_usage {
        if links.len() > 1 {
            out.push(Violation::BsOrthogonality { bs, resource, links: links.into_iter().collect() });
        }
    }
    out
}
