//! Distributed SINR-target tracking.
//!
//! Every link scales its power by the ratio of its target to its measured
//! SINR, then clamps to its bounds: `P ← clamp(P · γ_tgt / γ(P))`. Updates
//! are synchronous and use only the link's own measurement. For feasible
//! targets the iteration converges to the smallest power vector meeting them;
//! otherwise the links that cannot keep up saturate at their maximum.

use super::{all_sinrs, Network, PowerAllocation, SinrTargets};

/// Runs `iters` synchronous updates from `p`. Every hop of route `i` tracks
/// `targets.0[i]`. Links with fixed bounds keep their power.
pub fn zander_inner_loop(
    net: &Network<'_>,
    targets: &SinrTargets,
    mut p: PowerAllocation,
    iters: usize,
) -> PowerAllocation {
    let link_targets: Vec<Option<f64>> =
        (0..net.num_links()).map(|l| net.route_of(crate::routing::LinkId(l)).map(|i| targets.0[i.0])).collect();
    for _ in 0..iters {
        let sinrs = all_sinrs(&p, net);
        for (l, target) in link_targets.iter().enumerate() {
            let Some(target) = *target else { continue };
            let b = &p.bounds[l];
            if b.is_fixed() {
                continue;
            }
            let next = if sinrs[l] > 0.0 { p.powers[l] * target / sinrs[l] } else { b.max_w };
            p.powers[l] = b.clamp(next);
        }
    }
    p
}
