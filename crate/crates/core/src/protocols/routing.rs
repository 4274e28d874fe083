//! Next-hop selection for inter-cluster forwarding.
//!
//! Position-based protocols forward greedily by geography: the next hop is
//! the in-range head (or the sink) closest to the sink, and normally must be
//! strictly closer than the holder. Non-position-based protocols forward
//! down the per-round hop gradient. Recovery relaxes each rule: GRC-R allows
//! one non-strict hop per invocation, DEMC-R accepts equal hop counts.

use crate::geom::Vec2;
use crate::network::{Addr, NodeId};

/// A forwarding candidate: an in-range, alive cluster head.
#[derive(Clone, Copy, Debug)]
pub struct GeoCandidate {
    pub id: NodeId,
    pub position: Vec2,
}

/// Greedy geographic choice. `strict` demands progress toward the sink;
/// recovery passes `strict = false` to allow one sideways hop. The sink
/// always wins when reachable.
pub fn greedy_next_hop(
    holder_pos: Vec2,
    sink_pos: Vec2,
    sink_in_range: bool,
    candidates: &[GeoCandidate],
    strict: bool,
) -> Option<Addr> {
    if sink_in_range {
        return Some(Addr::Sink);
    }
    let own = holder_pos.distance(sink_pos);
    candidates
        .iter()
        .filter(|c| !strict || c.position.distance(sink_pos) < own)
        .min_by(|a, b| {
            a.position
                .distance(sink_pos)
                .total_cmp(&b.position.distance(sink_pos))
                .then(a.id.cmp(&b.id))
        })
        .map(|c| Addr::Node(c.id))
}

/// A gradient candidate: an in-range, alive head with a known hop count.
#[derive(Clone, Copy, Debug)]
pub struct GradientCandidate {
    pub id: NodeId,
    pub hops_to_sink: u32,
}

/// Hop-gradient choice. The holder's own hop estimate (`None` = unknown,
/// treated as unreachable) bounds the candidates: normally the next hop must
/// have a strictly smaller count; recovery (`allow_equal`) accepts ties.
pub fn gradient_next_hop(
    own_hops: Option<u32>,
    sink_in_range: bool,
    candidates: &[GradientCandidate],
    allow_equal: bool,
) -> Option<Addr> {
    if sink_in_range {
        return Some(Addr::Sink);
    }
    let own = own_hops.unwrap_or(u32::MAX);
    candidates
        .iter()
        .filter(|c| {
            if allow_equal {
                c.hops_to_sink <= own
            } else {
                c.hops_to_sink < own
            }
        })
        .min_by(|a, b| a.hops_to_sink.cmp(&b.hops_to_sink).then(a.id.cmp(&b.id)))
        .map(|c| Addr::Node(c.id))
}
