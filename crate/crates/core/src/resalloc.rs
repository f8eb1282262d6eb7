//! Random resource-block allocation under the feasibility constraints.
//!
//! Links into or out of a base station are drawn without replacement from
//! that base station's pool, so they are mutually orthogonal. D2D hops draw
//! uniformly from all resources, including those used by cellular links of
//! the same cell, and the second hop of a relay route is redrawn until it
//! differs from the first.

use rand::seq::SliceRandom;
use rand::Rng;
use thiserror::Error;

use crate::geometry::{NodeId, NodeKind};
use crate::routing::{Hop, Link, LinkId, ResourceId, Route, RouteKind, RoutingError, RoutingMatrix};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AllocationError {
    #[error("base station {bs} needs {needed} orthogonal resources but only {available} exist")]
    TooManyBsLinks { bs: usize, needed: usize, available: usize },
    #[error("two-hop routes need at least two resources")]
    TooFewResources,
    #[error(transparent)]
    Routing(#[from] RoutingError),
}

/// A route before resources are assigned.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RouteSkeleton {
    pub kind: RouteKind,
    pub hop_links: Vec<LinkId>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AllocationProblem {
    pub links: Vec<Link>,
    pub routes: Vec<RouteSkeleton>,
    pub num_resources: usize,
    pub node_kinds: Vec<NodeKind>,
}

impl AllocationProblem {
    fn touches_bs(&self, link: LinkId) -> Option<NodeId> {
        let l = &self.links[link.0];
        [l.rx, l.tx].into_iter().find(|n| self.node_kinds[n.0].is_base_station())
    }
}

pub fn allocate_random<R: Rng + ?Sized>(
    problem: &AllocationProblem,
    rng: &mut R,
) -> Result<RoutingMatrix, AllocationError> {
    let q = problem.num_resources;
    if problem.routes.iter().any(|r| r.hop_links.len() == 2) && q < 2 {
        return Err(AllocationError::TooFewResources);
    }

    let mut assigned: Vec<Vec<Option<ResourceId>>> =
        problem.routes.iter().map(|r| vec![None; r.hop_links.len()]).collect();

    // (bs, route, hop) in route order, grouped by base station.
    let mut bs_hops: std::collections::BTreeMap<NodeId, Vec<(usize, usize)>> = Default::default();
    for (i, route) in problem.routes.iter().enumerate() {
        for (h, &link) in route.hop_links.iter().enumerate() {
            if let Some(bs) = problem.touches_bs(link) {
                bs_hops.entry(bs).or_default().push((i, h));
            }
        }
    }
    for (bs, hops) in &bs_hops {
        if hops.len() > q {
            return Err(AllocationError::TooManyBsLinks { bs: bs.0, needed: hops.len(), available: q });
        }
        let mut pool: Vec<usize> = (0..q).collect();
        pool.shuffle(rng);
        for (&(i, h), &r) in hops.iter().zip(&pool) {
            assigned[i][h] = Some(ResourceId(r));
        }
    }

    for (i, route) in problem.routes.iter().enumerate() {
        for h in 0..route.hop_links.len() {
            if assigned[i][h].is_some() {
                continue;
            }
            let other = if route.hop_links.len() == 2 { assigned[i][1 - h] } else { None };
            let r = loop {
                let r = ResourceId(rng.random_range(0..q));
                if Some(r) != other {
                    break r;
                }
            };
            assigned[i][h] = Some(r);
        }
    }

    let routes = problem
        .routes
        .iter()
        .zip(assigned)
        .map(|(skel, res)| Route {
            kind: skel.kind,
            hops: skel
                .hop_links
                .iter()
                .zip(res)
                .map(|(&link, r)| Hop { link, resource: r.expect("every hop assigned") })
                .collect(),
        })
        .collect();
    Ok(RoutingMatrix::new(problem.links.len(), q, routes)?)
}
