//! Cluster-head election rules.
//!
//! MAR and GRC elect from a global view at the round boundary. DECA and DEMC
//! elect through timed announcements on the event kernel; this module holds
//! their weight and delay formulas plus the per-round sink hop gradient the
//! non-position-based protocols forward along.

use std::collections::VecDeque;

use crate::network::{in_range, neighbors, NodeId, RadioParams, Topology};

use super::{Affiliation, Assignment, ElectionResult, ZoneGrid};

/// MAR: greedy minimum-mobility dominating set. Repeatedly pick the
/// unassigned node with the smallest mobility estimate (ties to the lower
/// id) as a head and assign its in-range unassigned neighbors to it, until
/// every alive node is covered.
pub fn mar_elect(mobility: &[f64], topo: &Topology, radio: &RadioParams) -> ElectionResult {
    let n = topo.len();
    debug_assert_eq!(mobility.len(), n);
    let mut assignments = vec![Assignment::Unaffiliated; n];
    let mut covered: Vec<bool> = (0..n).map(|i| !topo.is_active(NodeId(i as u32))).collect();

    loop {
        let pick = (0..n)
            .filter(|&i| !covered[i])
            .min_by(|&a, &b| mobility[a].total_cmp(&mobility[b]).then(a.cmp(&b)));
        let Some(head) = pick else { break };
        covered[head] = true;
        assignments[head] = Assignment::Head;
        let head_id = NodeId(head as u32);
        for nbr in neighbors(head_id, topo, radio).expect("head is in topology") {
            let j = nbr.index();
            if !covered[j] {
                covered[j] = true;
                assignments[j] = Assignment::Member(Affiliation {
                    head: head_id,
                    via: None,
                });
            }
        }
    }
    ElectionResult { assignments }
}

/// GRC: per occupied zone, the head is the node maximizing
/// `0.5 * (1 - dist_to_center / half_diagonal) + 0.5 * energy_fraction`,
/// ties to the lower id. Members attach to their cell's head when it is in
/// range, otherwise to the nearest in-range head of any cell; nodes hearing
/// no head in range stay unaffiliated for the round.
pub fn grc_elect(
    energy_frac: &[f64],
    grid: &ZoneGrid,
    topo: &Topology,
    radio: &RadioParams,
) -> ElectionResult {
    let n = topo.len();
    debug_assert_eq!(energy_frac.len(), n);
    let mut assignments = vec![Assignment::Unaffiliated; n];

    let mut best_per_cell: Vec<Option<(f64, usize)>> = vec![None; grid.cell_count()];
    for i in 0..n {
        if !topo.is_active(NodeId(i as u32)) {
            continue;
        }
        let pos = topo.positions[i];
        let cell = grid.cell_of(pos);
        let center_term = 1.0 - pos.distance(grid.center(cell)) / grid.half_diagonal(cell);
        let score = 0.5 * center_term + 0.5 * energy_frac[i];
        let better = match best_per_cell[cell] {
            None => true,
            Some((best, idx)) => score > best || (score == best && i < idx),
        };
        if better {
            best_per_cell[cell] = Some((score, i));
        }
    }

    let mut cell_head: Vec<Option<NodeId>> = vec![None; grid.cell_count()];
    let mut heads = Vec::new();
    for (cell, best) in best_per_cell.iter().enumerate() {
        if let Some((_, i)) = best {
            let id = NodeId(*i as u32);
            cell_head[cell] = Some(id);
            heads.push(id);
            assignments[*i] = Assignment::Head;
        }
    }

    for i in 0..n {
        let id = NodeId(i as u32);
        if !topo.is_active(id) || matches!(assignments[i], Assignment::Head) {
            continue;
        }
        let pos = topo.positions[i];
        let own = cell_head[grid.cell_of(pos)];
        let chosen = match own {
            Some(h) if in_range(pos, topo.positions[h.index()], radio) => Some(h),
            _ => heads
                .iter()
                .copied()
                .filter(|h| in_range(pos, topo.positions[h.index()], radio))
                .min_by(|a, b| {
                    pos.distance(topo.positions[a.index()])
                        .total_cmp(&pos.distance(topo.positions[b.index()]))
                        .then(a.cmp(b))
                }),
        };
        assignments[i] = match chosen {
            Some(head) => Assignment::Member(Affiliation { head, via: None }),
            None => Assignment::Unaffiliated,
        };
    }
    ElectionResult { assignments }
}

/// DECA node weight: energy, connectivity, and mobility, all normalized to
/// [0, 1]. Higher weight means a better head candidate.
pub fn deca_weight(
    energy_frac: f64,
    degree: usize,
    max_degree: usize,
    mobility: f64,
    v_max: f64,
    weights: (f64, f64, f64),
) -> f64 {
    let (we, wc, wm) = weights;
    let conn = if max_degree == 0 {
        0.0
    } else {
        degree as f64 / max_degree as f64
    };
    let mob = if v_max > 0.0 {
        (mobility / v_max).clamp(0.0, 1.0)
    } else {
        0.0
    };
    we * energy_frac + wc * conn - wm * mob
}

/// Announcement delay: inversely proportional to weight, with a small
/// id-keyed jitter so equal weights still fire in a fixed order. Clamped so
/// even the worst weight announces well before the election commits.
pub fn announce_delay(window: f64, weight: f64, node: NodeId) -> f64 {
    (window * (1.0 - weight)).clamp(0.0, 1.2 * window) + (node.0 as f64 + 1.0) * 1e-4
}

/// DEMC node weight: residual energy plus a random jitter; no degree term
/// (DEMC keeps no neighbor list) and no mobility term. The energy term is
/// scaled so the weight stays in [0, 1] and full-energy nodes still spread
/// their claim timers across the jitter band.
pub fn demc_weight(energy_frac: f64, jitter: f64, jitter_scale: f64) -> f64 {
    energy_frac * (1.0 - jitter_scale) + jitter
}

/// Per-node minimum hop count to the sink, rebuilt each round by flooding
/// outward from the sink over every active node: nodes within radio range of
/// the sink get 1, their in-range neighbors 2, and so on. Heads read their
/// own count from this flood; members and gateway relays use theirs when
/// forwarding. Unreachable nodes get `None`.
pub fn build_sink_gradient(topo: &Topology, radio: &RadioParams) -> Vec<Option<u32>> {
    let n = topo.len();
    let mut hops: Vec<Option<u32>> = vec![None; n];
    let mut queue = VecDeque::new();
    for i in 0..n {
        let id = NodeId(i as u32);
        if topo.is_active(id) && in_range(topo.positions[i], topo.sink, radio) {
            hops[i] = Some(1);
            queue.push_back(id);
        }
    }
    while let Some(u) = queue.pop_front() {
        let next = hops[u.index()].expect("queued nodes have hop counts") + 1;
        for i in 0..n {
            let v = NodeId(i as u32);
            if hops[i].is_some() || !topo.is_active(v) {
                continue;
            }
            if in_range(topo.positions[u.index()], topo.positions[i], radio) {
                hops[i] = Some(next);
                queue.push_back(v);
            }
        }
    }
    hops
}
