//! Oracles and fixtures shared by the integration tests.
#![allow(dead_code)]

use d2dsim::geometry::{GainTable, NodeId};
use d2dsim::powerctl::{Network, PowerBounds};
use d2dsim::routing::{validate, Constraint, Hop, Link, LinkId, LinkRole, ResourceId, Route, RouteKind, RoutingMatrix};
use d2dsim::sim::{prepare_drop, PreparedDrop, SimConfig};
use d2dsim::units::{db_to_linear, dbm_to_watts, linear_to_db};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

pub const NOISE_DBM: f64 = -116.4;
pub const W_HZ: f64 = 180e3;

pub fn noise_w() -> f64 {
    dbm_to_watts(NOISE_DBM)
}

/// `n` single-hop links on one resource. Node `2k` sends to node `2k+1`;
/// `g[r][t]` is the gain from the transmitter of link `t` to the receiver
/// of link `r`.
pub struct SingleResource {
    pub links: Vec<Link>,
    pub routing: RoutingMatrix,
    pub gains: GainTable,
}

impl SingleResource {
    pub fn new(g: &DMatrix<f64>) -> Self {
        let n = g.nrows();
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
            let (tx, rx) = match (a.0 % 2, b.0 % 2) {
                (0, 1) => (a.0 / 2, b.0 / 2),
                (1, 0) => (b.0 / 2, a.0 / 2),
                _ => return 1e-20,
            };
            g[(rx, tx)]
        });
        SingleResource { links, routing, gains }
    }

    pub fn network(&self, bounds: PowerBounds) -> Network<'_> {
        Network::new(&self.links, &self.routing, &self.gains, noise_w(), W_HZ, vec![bounds; self.links.len()])
    }
}

/// Random single-resource instance with feasible targets: gains, targets
/// and the spectral radius of `diag(γ/G_ll)·G_offdiag`.
pub struct ZanderInstance {
    pub gains: DMatrix<f64>,
    pub targets: Vec<f64>,
    pub spectral_radius: f64,
}

pub fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    m.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn normalized_gain_matrix(g: &DMatrix<f64>, targets: &[f64]) -> DMatrix<f64> {
    let n = g.nrows();
    DMatrix::from_fn(n, n, |r, c| if r == c { 0.0 } else { targets[r] * g[(r, c)] / g[(r, r)] })
}

/// Draws instances until one has spectral radius below `max_rho` and a
/// solution strictly inside `bounds`.
pub fn random_zander_instance<R: Rng>(rng: &mut R, n: usize, max_rho: f64, bounds: PowerBounds) -> ZanderInstance {
    loop {
        let g = DMatrix::from_fn(n, n, |r, c| {
            let db = if r == c { rng.random_range(-100.0..-70.0) } else { rng.random_range(-130.0..-90.0) };
            db_to_linear(db)
        });
        let targets: Vec<f64> = (0..n).map(|_| db_to_linear(rng.random_range(0.0..15.0))).collect();
        let rho = spectral_radius(&normalized_gain_matrix(&g, &targets));
        if rho >= max_rho {
            continue;
        }
        let p = zander_fixed_point(&g, &targets, noise_w());
        if p.iter().all(|&w| w > bounds.min_w && w < bounds.max_w) {
            return ZanderInstance { gains: g, targets, spectral_radius: rho };
        }
    }
}

/// Solves `(I − F) P = u` with `F = diag(γ/G_ll)·G_offdiag` and
/// `u_l = γ_l σ / G_ll`: every link meets its target exactly.
pub fn zander_fixed_point(g: &DMatrix<f64>, targets: &[f64], sigma: f64) -> Vec<f64> {
    let n = g.nrows();
    let a = DMatrix::identity(n, n) - normalized_gain_matrix(g, targets);
    let u = DVector::from_fn(n, |r, _| targets[r] * sigma / g[(r, r)]);
    let p = a.lu().solve(&u).expect("nonsingular for spectral radius below one");
    p.iter().copied().collect()
}

/// `ln(W·log2(1+γ)) − ω·P(γ)` for an isolated link with `P(γ) = γσ/G`.
pub fn isolated_utility(gamma: f64, g: f64, omega: f64) -> f64 {
    (W_HZ * gamma.ln_1p() / std::f64::consts::LN_2).ln() - omega * gamma * noise_w() / g
}

/// Brute-force maximizer in dB over every SINR reachable within `bounds`,
/// 0.01 dB grid.
pub fn isolated_grid_optimum_db(g: f64, omega: f64, bounds: PowerBounds) -> f64 {
    let lo = linear_to_db(bounds.min_w * g / noise_w());
    let hi = linear_to_db(bounds.max_w * g / noise_w());
    let steps = ((hi - lo) / 0.01).ceil().max(1.0) as usize;
    let mut best = (f64::NEG_INFINITY, f64::NAN);
    for k in 0..=steps {
        let db = lo + (hi - lo) * k as f64 / steps as f64;
        let f = isolated_utility(db_to_linear(db), g, omega);
        if f > best.0 {
            best = (f, db);
        }
    }
    best.1
}

/// A drop whose allocation is known to be valid, with at least one route
/// of every kind needed by the mutations.
pub fn valid_drop(seed: u64) -> PreparedDrop {
    let config = SimConfig { seed, ..SimConfig::default() };
    (0..)
        .map(|i| prepare_drop(&config, i).unwrap())
        .find(|d| {
            let kinds: Vec<RouteKind> = d.routing.routes().iter().map(|r| r.kind).collect();
            kinds.contains(&RouteKind::D2dTwoHop) && kinds.contains(&RouteKind::CellularDirect)
        })
        .unwrap()
}

fn flags(drop: &PreparedDrop, routing: &RoutingMatrix, links: &[Link], c: Constraint) -> bool {
    validate(routing, links, &drop.kinds).iter().any(|v| v.constraint() == c)
}

/// Injects one violation of each kind into a valid allocation and reports
/// whether the validator flags it.
pub fn mutation_results(drop: &PreparedDrop) -> Vec<(&'static str, bool)> {
    let links = &drop.plan.links;
    let q = drop.routing.num_resources();
    let routes = drop.routing.routes();
    let two_hop = routes.iter().position(|r| r.kind == RouteKind::D2dTwoHop).unwrap();
    let cellular: Vec<usize> =
        routes.iter().enumerate().filter(|(_, r)| r.kind == RouteKind::CellularDirect).map(|(i, _)| i).collect();
    let mut out = Vec::new();

    // relay receives and transmits on the same resource
    let mut r = drop.routing.clone();
    let first = r.routes()[two_hop].hops[0].resource;
    r.routes_mut()[two_hop].hops[1].resource = first;
    out.push(("half_duplex", flags(drop, &r, links, Constraint::HalfDuplex)));

    // two uplinks into one base station on the same resource
    let mut r = drop.routing.clone();
    let bs_of = |i: usize| links[routes[i].hops[0].link.0].rx;
    let (a, b) = cellular
        .iter()
        .flat_map(|&a| cellular.iter().map(move |&b| (a, b)))
        .find(|&(a, b)| a != b && bs_of(a) == bs_of(b))
        .expect("two cellular UEs share a base station");
    let qa = r.routes()[a].hops[0].resource;
    r.routes_mut()[b].hops[0].resource = qa;
    out.push(("bs_orthogonality", flags(drop, &r, links, Constraint::BsOrthogonality)));

    // one link claimed by a second route
    let mut r = drop.routing.clone();
    let stolen = r.routes()[a].hops[0];
    let other_q = ResourceId((stolen.resource.0 + 1) % q);
    r.routes_mut()[b].hops[0] = Hop { link: stolen.link, resource: other_q };
    out.push(("link_shared", flags(drop, &r, links, Constraint::SingleReceiver)));

    // a transmitter with two receivers
    let mut extra = links.clone();
    let tx = links[routes[a].hops[0].link.0].tx;
    let rx = links[routes[b].hops[0].link.0].tx;
    extra.push(Link { tx, rx, role: LinkRole::D2dDirect });
    let mut new_routes = routes.to_vec();
    new_routes.push(Route {
        kind: RouteKind::D2dSingleHop,
        hops: vec![Hop { link: LinkId(extra.len() - 1), resource: ResourceId(0) }],
    });
    let r = RoutingMatrix::new(extra.len(), q, new_routes).unwrap();
    out.push(("multiple_receivers", flags(drop, &r, &extra, Constraint::SingleReceiver)));

    // second hop that does not start at the relay
    let mut r = drop.routing.clone();
    let foreign = routes[a].hops[0].link;
    let keep_q = r.routes()[two_hop].hops[1].resource;
    r.routes_mut()[two_hop].hops[1] = Hop { link: foreign, resource: keep_q };
    out.push(("broken_chain", flags(drop, &r, links, Constraint::Structure)));

    out
}
