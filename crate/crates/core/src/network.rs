//! Radio and topology layer: unit-disk connectivity over current node
//! positions and message delivery with per-hop transmission delay.
//!
//! Loss in this model comes from exactly one cause: a pair moving out of
//! transmission range. A message checks range twice — at send time (an
//! out-of-range target drops immediately) and again at delivery time, so
//! mobility during flight can kill a hop. There is no fading, capture,
//! interference, MAC contention, or bandwidth limit.

use std::fmt;

use thiserror::Error;

use crate::geom::Vec2;
use crate::kernel::{EventHandle, Kernel, KernelError, SimTime};

/// Sensor node identifier; indexes the topology tables.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Message endpoint: a sensor node or the sink.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Addr {
    Node(NodeId),
    Sink,
}

impl fmt::Display for Addr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Addr::Node(id) => write!(f, "{id}"),
            Addr::Sink => write!(f, "sink"),
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct RadioParams {
    /// Transmission radius, meters.
    pub range: f64,
    /// Per-hop transmission delay, seconds.
    pub tx_delay: f64,
}

impl RadioParams {
    pub fn validate(&self) -> Result<(), NetworkError> {
        if !(self.range > 0.0) {
            return Err(NetworkError::BadParams(format!(
                "range must be positive, got {}",
                self.range
            )));
        }
        if !(self.tx_delay >= 0.0) {
            return Err(NetworkError::BadParams(format!(
                "tx_delay must be >= 0, got {}",
                self.tx_delay
            )));
        }
        Ok(())
    }
}

/// Live view of node positions plus the sink location. Every node id is
/// present exactly once; `active` marks nodes that can still transmit and
/// receive (depleted nodes go inactive).
#[derive(Clone, Debug)]
pub struct Topology {
    pub positions: Vec<Vec2>,
    pub active: Vec<bool>,
    pub sink: Vec2,
}

impl Topology {
    pub fn new(positions: Vec<Vec2>, sink: Vec2) -> Self {
        let active = vec![true; positions.len()];
        Topology {
            positions,
            active,
            sink,
        }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn contains(&self, node: NodeId) -> bool {
        node.index() < self.positions.len()
    }

    pub fn position(&self, node: NodeId) -> Result<Vec2, NetworkError> {
        self.positions
            .get(node.index())
            .copied()
            .ok_or(NetworkError::UnknownNode(node))
    }

    pub fn addr_position(&self, addr: Addr) -> Result<Vec2, NetworkError> {
        match addr {
            Addr::Node(id) => self.position(id),
            Addr::Sink => Ok(self.sink),
        }
    }

    pub fn is_active(&self, node: NodeId) -> bool {
        self.active.get(node.index()).copied().unwrap_or(false)
    }

    /// Addr activity; the sink is always up.
    pub fn addr_active(&self, addr: Addr) -> bool {
        match addr {
            Addr::Node(id) => self.is_active(id),
            Addr::Sink => true,
        }
    }
}

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("unknown node id {0}")]
    UnknownNode(NodeId),
    #[error("invalid radio parameters: {0}")]
    BadParams(String),
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

/// Unit-disk test, inclusive at exactly `range`.
pub fn in_range(a: Vec2, b: Vec2, radio: &RadioParams) -> bool {
    a.distance(b) <= radio.range
}

/// All active nodes within range of `node`, excluding `node` itself,
/// in ascending id order.
pub fn neighbors(
    node: NodeId,
    topo: &Topology,
    radio: &RadioParams,
) -> Result<Vec<NodeId>, NetworkError> {
    let origin = topo.position(node)?;
    let mut out = Vec::new();
    for i in 0..topo.len() {
        let other = NodeId(i as u32);
        if other == node || !topo.is_active(other) {
            continue;
        }
        if in_range(origin, topo.positions[i], radio) {
            out.push(other);
        }
    }
    Ok(out)
}

/// Which hop of the member-to-sink path a data transmission belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HopLeg {
    /// Member (or relay) toward its cluster head.
    Intra,
    /// Cluster head toward another head or the sink.
    Inter,
}

/// Globally unique packet identifier.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PacketId(pub u64);

impl fmt::Display for PacketId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Master record for one generated data packet. `hops` is the path of the
/// copy that reached the sink first (starts with the source); duplicates are
/// tracked by the run counters, not here.
#[derive(Clone, Debug)]
pub struct Packet {
    pub id: PacketId,
    pub source: NodeId,
    pub created_at: SimTime,
    pub hops: Vec<NodeId>,
    pub delivered_at: Option<SimTime>,
}

/// Payload of an over-the-air message.
#[derive(Clone, Debug)]
pub enum MessagePayload {
    Data {
        packet: PacketId,
        /// Path of this copy so far, starting with the source.
        hops: Vec<NodeId>,
        leg: HopLeg,
    },
    /// Delivery confirmation for a recovery-protocol inter-cluster hop.
    Ack { packet: PacketId },
    /// DECA clustering announcement: every node transmits exactly one.
    DecaAnnounce { weight: f64, is_head: bool },
    /// DEMC head claim: one per cluster.
    DemcClaim { head: NodeId, weight: f64 },
    /// DEMC member relay of a head claim (extends the cluster to two hops).
    DemcRelay { head: NodeId },
}

impl MessagePayload {
    pub fn is_clustering(&self) -> bool {
        matches!(
            self,
            MessagePayload::DecaAnnounce { .. }
                | MessagePayload::DemcClaim { .. }
                | MessagePayload::DemcRelay { .. }
        )
    }
}

/// A message in flight.
#[derive(Clone, Debug)]
pub struct Transmission {
    pub from: Addr,
    pub to: Addr,
    pub sent_at: SimTime,
    pub payload: MessagePayload,
}

/// Send-time outcome of a unicast.
#[derive(Clone, Debug, PartialEq)]
pub enum SendOutcome {
    DeliveryScheduled {
        handle: EventHandle,
        deliver_at: SimTime,
    },
    DroppedOutOfRange,
}

/// Schedule a unicast hop. If the pair is in range at send time a delivery
/// event fires at `now + tx_delay`; the receive succeeds only if the pair is
/// still in range at that instant (checked by the delivery handler via
/// [`deliverable`]). Out-of-range targets drop immediately.
pub fn unicast<K: fmt::Debug>(
    kernel: &mut Kernel<K>,
    wrap: impl FnOnce(Transmission) -> K,
    from: Addr,
    to: Addr,
    payload: MessagePayload,
    topo: &Topology,
    radio: &RadioParams,
) -> Result<SendOutcome, NetworkError> {
    let from_pos = topo.addr_position(from)?;
    let to_pos = topo.addr_position(to)?;
    if !in_range(from_pos, to_pos, radio) {
        return Ok(SendOutcome::DroppedOutOfRange);
    }
    let now = kernel.now();
    let deliver_at = now + radio.tx_delay;
    let t = Transmission {
        from,
        to,
        sent_at: now,
        payload,
    };
    let handle = kernel.schedule(deliver_at, wrap(t))?;
    Ok(SendOutcome::DeliveryScheduled { handle, deliver_at })
}

/// Schedule one delivery per current neighbor of `from` (no
/// acknowledgements). Returns the number of scheduled deliveries.
pub fn broadcast<K: fmt::Debug>(
    kernel: &mut Kernel<K>,
    mut wrap: impl FnMut(Transmission) -> K,
    from: NodeId,
    payload: &MessagePayload,
    topo: &Topology,
    radio: &RadioParams,
) -> Result<u64, NetworkError> {
    let nbrs = neighbors(from, topo, radio)?;
    let now = kernel.now();
    let deliver_at = now + radio.tx_delay;
    let mut scheduled = 0;
    for to in nbrs {
        let t = Transmission {
            from: Addr::Node(from),
            to: Addr::Node(to),
            sent_at: now,
            payload: payload.clone(),
        };
        kernel.schedule(deliver_at, wrap(t))?;
        scheduled += 1;
    }
    Ok(scheduled)
}

/// Delivery-time check: the pair must still be in range and the receiver
/// still active.
pub fn deliverable(t: &Transmission, topo: &Topology, radio: &RadioParams) -> bool {
    let (Ok(from_pos), Ok(to_pos)) = (topo.addr_position(t.from), topo.addr_position(t.to)) else {
        return false;
    };
    topo.addr_active(t.to) && in_range(from_pos, to_pos, radio)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::RandomStream;

    fn radio(range: f64) -> RadioParams {
        RadioParams {
            range,
            tx_delay: 0.005,
        }
    }

    #[test]
    fn in_range_zero_distance() {
        let a = Vec2::new(5.0, 5.0);
        assert!(in_range(a, a, &radio(150.0)));
    }

    #[test]
    fn in_range_boundary_inclusive() {
        let r = radio(150.0);
        let a = Vec2::ZERO;
        assert!(in_range(a, Vec2::new(150.0, 0.0), &r));
        assert!(!in_range(a, Vec2::new(150.0 + 1e-9, 0.0), &r));
    }

    #[test]
    fn in_range_symmetric_fuzz() {
        let mut s = RandomStream::new(21, "net-fuzz");
        let r = radio(150.0);
        for _ in 0..10_000 {
            let a = Vec2::new(s.uniform(0.0, 1000.0).unwrap(), s.uniform(0.0, 1000.0).unwrap());
            let b = Vec2::new(s.uniform(0.0, 1000.0).unwrap(), s.uniform(0.0, 1000.0).unwrap());
            assert_eq!(in_range(a, b, &r), in_range(b, a, &r));
        }
    }

    #[test]
    fn neighbors_single_node_topology() {
        let topo = Topology::new(vec![Vec2::ZERO], Vec2::new(500.0, 500.0));
        assert!(neighbors(NodeId(0), &topo, &radio(150.0)).unwrap().is_empty());
    }

    #[test]
    fn neighbors_collinear() {
        let topo = Topology::new(
            vec![Vec2::ZERO, Vec2::new(100.0, 0.0), Vec2::new(250.0, 0.0)],
            Vec2::new(500.0, 500.0),
        );
        let r = radio(150.0);
        assert_eq!(
            neighbors(NodeId(1), &topo, &r).unwrap(),
            vec![NodeId(0), NodeId(2)]
        );
        assert_eq!(neighbors(NodeId(0), &topo, &r).unwrap(), vec![NodeId(1)]);
    }

    #[test]
    fn neighbors_unknown_node_rejected() {
        let topo = Topology::new(vec![Vec2::ZERO], Vec2::ZERO);
        assert!(matches!(
            neighbors(NodeId(9), &topo, &radio(10.0)),
            Err(NetworkError::UnknownNode(NodeId(9)))
        ));
    }

    #[test]
    fn neighbors_match_brute_force_oracle() {
        // O(n^2) all-pairs filter over a random 100-node topology.
        let mut s = RandomStream::new(22, "net-oracle");
        let positions: Vec<Vec2> = (0..100)
            .map(|_| Vec2::new(s.uniform(0.0, 1000.0).unwrap(), s.uniform(0.0, 1000.0).unwrap()))
            .collect();
        let topo = Topology::new(positions.clone(), Vec2::new(500.0, 500.0));
        let r = radio(150.0);
        for i in 0..100u32 {
            let got = neighbors(NodeId(i), &topo, &r).unwrap();
            let mut expected: Vec<NodeId> = (0..100u32)
                .filter(|&j| j != i)
                .filter(|&j| {
                    positions[i as usize].distance(positions[j as usize]) <= r.range
                })
                .map(NodeId)
                .collect();
            expected.sort();
            assert_eq!(got, expected, "node {i}");
            // Relation is irreflexive and symmetric.
            assert!(!got.contains(&NodeId(i)));
            for j in &got {
                assert!(neighbors(*j, &topo, &r).unwrap().contains(&NodeId(i)));
            }
        }
    }

    #[test]
    fn unicast_in_range_schedules_at_tx_delay() {
        let mut kernel: Kernel<Transmission> = Kernel::new();
        let topo = Topology::new(
            vec![Vec2::ZERO, Vec2::new(100.0, 0.0)],
            Vec2::new(500.0, 500.0),
        );
        let out = unicast(
            &mut kernel,
            |t| t,
            Addr::Node(NodeId(0)),
            Addr::Node(NodeId(1)),
            MessagePayload::Ack { packet: PacketId(1) },
            &topo,
            &radio(150.0),
        )
        .unwrap();
        match out {
            SendOutcome::DeliveryScheduled { deliver_at, .. } => {
                assert!((deliver_at.0 - 0.005).abs() < 1e-12);
            }
            other => panic!("expected scheduled delivery, got {other:?}"),
        }
        assert_eq!(kernel.pending_len(), 1);
    }

    #[test]
    fn unicast_out_of_range_drops_at_send() {
        let mut kernel: Kernel<Transmission> = Kernel::new();
        let topo = Topology::new(
            vec![Vec2::ZERO, Vec2::new(400.0, 0.0)],
            Vec2::new(500.0, 500.0),
        );
        let out = unicast(
            &mut kernel,
            |t| t,
            Addr::Node(NodeId(0)),
            Addr::Node(NodeId(1)),
            MessagePayload::Ack { packet: PacketId(1) },
            &topo,
            &radio(150.0),
        )
        .unwrap();
        assert_eq!(out, SendOutcome::DroppedOutOfRange);
        assert_eq!(kernel.pending_len(), 0);
    }

    #[test]
    fn in_flight_movement_kills_delivery() {
        // Receiver starts just inside range and moves straight out during the
        // flight. Crossing time: range 150, start 149, speed 10 m/s, so the
        // pair leaves range 0.1 s after send; with tx_delay 2 s the delivery
        // check must fail.
        let r = RadioParams {
            range: 150.0,
            tx_delay: 2.0,
        };
        let mut kernel: Kernel<Transmission> = Kernel::new();
        let mut topo = Topology::new(
            vec![Vec2::ZERO, Vec2::new(149.0, 0.0)],
            Vec2::new(500.0, 500.0),
        );
        let out = unicast(
            &mut kernel,
            |t| t,
            Addr::Node(NodeId(0)),
            Addr::Node(NodeId(1)),
            MessagePayload::Ack { packet: PacketId(7) },
            &topo,
            &r,
        )
        .unwrap();
        let t = Transmission {
            from: Addr::Node(NodeId(0)),
            to: Addr::Node(NodeId(1)),
            sent_at: SimTime::ZERO,
            payload: MessagePayload::Ack { packet: PacketId(7) },
        };
        assert!(matches!(out, SendOutcome::DeliveryScheduled { .. }));
        assert!(deliverable(&t, &topo, &r));
        // Linear motion at 10 m/s for the 2 s flight: 149 + 20 = 169 > 150.
        topo.positions[1] = Vec2::new(169.0, 0.0);
        assert!(!deliverable(&t, &topo, &r));
    }

    #[test]
    fn broadcast_counts_match_neighbors() {
        let mut s = RandomStream::new(23, "bcast");
        let positions: Vec<Vec2> = (0..40)
            .map(|_| Vec2::new(s.uniform(0.0, 500.0).unwrap(), s.uniform(0.0, 500.0).unwrap()))
            .collect();
        let topo = Topology::new(positions, Vec2::new(250.0, 250.0));
        let r = radio(150.0);
        for i in 0..40u32 {
            let mut kernel: Kernel<Transmission> = Kernel::new();
            let count = broadcast(
                &mut kernel,
                |t| t,
                NodeId(i),
                &MessagePayload::DecaAnnounce {
                    weight: 0.5,
                    is_head: true,
                },
                &topo,
                &r,
            )
            .unwrap();
            let nbrs = neighbors(NodeId(i), &topo, &r).unwrap();
            assert_eq!(count as usize, nbrs.len());
            assert_eq!(kernel.pending_len(), nbrs.len());
        }
    }

    #[test]
    fn broadcast_isolated_node_schedules_nothing() {
        let topo = Topology::new(
            vec![Vec2::ZERO, Vec2::new(900.0, 900.0)],
            Vec2::new(500.0, 500.0),
        );
        let mut kernel: Kernel<Transmission> = Kernel::new();
        let count = broadcast(
            &mut kernel,
            |t| t,
            NodeId(0),
            &MessagePayload::DemcRelay { head: NodeId(0) },
            &topo,
            &radio(150.0),
        )
        .unwrap();
        assert_eq!(count, 0);
    }
}
