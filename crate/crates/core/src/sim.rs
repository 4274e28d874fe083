//! The simulation world: wires nodes, mobility, radio, elections, traffic,
//! and recovery together on one event kernel and runs a scenario to
//! completion.
//!
//! Packet accounting tracks *copies*. A plain hop transfers custody of the
//! single copy; a recovery-protocol inter-cluster hop transmits a tentative
//! copy while the sender keeps the packet buffered until an acknowledgement
//! arrives. A lost acknowledgement makes the sender presume failure and
//! re-send even though the hop actually delivered — that is the duplication
//! path, and duplicate sink receptions are counted separately from the
//! sent = delivered + dropped + in-flight partition over packet ids.

use std::collections::HashMap;

use thiserror::Error;

use crate::experiment::{ConfigError, ScenarioConfig};
use crate::geom::Vec2;
use crate::kernel::{
    EventHandle, EventHandler, Kernel, KernelError, RandomStream, SimEvent, SimTime,
};
use crate::metrics::{self, MetricsError, MetricsRecord, RunCounters};
use crate::mobility::{
    self, FieldGeometry, MobilityError, MobilityModel, MobilityParams, MobilityState,
};
use crate::network::{
    self, Addr, HopLeg, MessagePayload, NetworkError, NodeId, Packet, PacketId, RadioParams,
    SendOutcome, Topology, Transmission,
};
use crate::protocols::{
    affiliate, election, routing, Affiliation, Announcement, Assignment, ClusterView,
    ElectionResult, ProtocolConfig, ProtocolError, ProtocolKind, Role, ZoneGrid,
};

/// Events the world reacts to.
#[derive(Clone, Debug)]
pub enum EventKind {
    MobilityStep,
    RoundStart,
    ElectionCommit,
    AnnounceTimer { node: NodeId },
    RelayCheck { node: NodeId, head: NodeId },
    TrafficGen { node: NodeId },
    Delivery(Transmission),
    RecoveryTimeout { holder: NodeId, packet: PacketId },
}

impl EventKind {
    /// Canonical event family for the trace dump.
    pub fn family(&self) -> &'static str {
        match self {
            EventKind::MobilityStep => "mobility-step",
            EventKind::RoundStart
            | EventKind::ElectionCommit
            | EventKind::AnnounceTimer { .. }
            | EventKind::RelayCheck { .. } => "round-timer",
            EventKind::TrafficGen { .. } => "traffic-generation",
            EventKind::Delivery(_) => "packet-delivery",
            EventKind::RecoveryTimeout { .. } => "recovery-timeout",
        }
    }

    pub fn target_label(&self) -> String {
        match self {
            EventKind::MobilityStep | EventKind::RoundStart | EventKind::ElectionCommit => {
                "global".to_owned()
            }
            EventKind::AnnounceTimer { node }
            | EventKind::RelayCheck { node, .. }
            | EventKind::TrafficGen { node } => node.to_string(),
            EventKind::Delivery(t) => t.to.to_string(),
            EventKind::RecoveryTimeout { holder, .. } => holder.to_string(),
        }
    }
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Mobility(#[from] MobilityError),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

/// Which traces to collect during a run.
#[derive(Clone, Copy, Debug, Default)]
pub struct TraceOptions {
    pub events: bool,
    pub mobility: bool,
    pub clusters: bool,
}

/// Collected trace lines (tab-separated, one line per record).
#[derive(Clone, Debug, Default)]
pub struct TraceLog {
    /// `time<TAB>seq<TAB>kind<TAB>target` per dispatched event.
    pub events: Vec<String>,
    /// `time<TAB>node<TAB>x<TAB>y` per sampled mobility step.
    pub mobility: Vec<String>,
    /// `round<TAB>protocol<TAB>head<TAB>member_count` per cluster per round.
    pub clusters: Vec<String>,
}

/// Per-round audit entries derived from logged clustering transmissions.
#[derive(Clone, Debug)]
pub struct RoundAudit {
    pub round: u32,
    pub started_at: f64,
    pub heads: u32,
    pub clustering_tx: u64,
    pub relays: u64,
    /// Committed clusters, ascending by head id.
    pub clusters: Vec<ClusterView>,
}

impl RoundAudit {
    pub fn head_ids(&self) -> Vec<NodeId> {
        self.clusters.iter().map(|c| c.head).collect()
    }
}

/// Where dropped packets died, for loss diagnostics.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct DropBreakdown {
    /// Generated by a node with no cluster affiliation.
    pub unaffiliated_source: u64,
    /// Member-to-head hop failed at send time (head out of range or dead).
    pub intra_send: u64,
    /// Member-to-head hop broke during flight.
    pub intra_flight: u64,
    /// No viable next hop toward the sink (plain protocols drop here).
    pub inter_dead_end: u64,
    /// Inter-cluster hop broke during flight (plain protocols drop here).
    pub inter_flight: u64,
    /// Recovery buffer released after exhausting its retries.
    pub recovery_exhausted: u64,
}

impl DropBreakdown {
    pub fn total(&self) -> u64 {
        self.unaffiliated_source
            + self.intra_send
            + self.intra_flight
            + self.inter_dead_end
            + self.inter_flight
            + self.recovery_exhausted
    }
}

/// Event-log audit of control traffic and forwarding-rule violations.
#[derive(Clone, Debug, Default)]
pub struct RunAudit {
    pub rounds: Vec<RoundAudit>,
    pub drops: DropBreakdown,
    pub clustering_tx_total: u64,
    /// Periodic hello messages; this protocol family never sends any, and the
    /// audit proves it from the log rather than by assumption.
    pub hello_events: u64,
    /// Largest clustering transmission count for any (node, round) pair.
    pub max_clustering_tx_per_node_round: u32,
    /// Clustering transmissions observed outside an election window.
    pub control_tx_outside_window: u64,
    /// Non-recovery greedy hops that failed to reduce distance to the sink.
    pub greedy_violations: u64,
    /// Non-recovery gradient hops that failed to reduce the hop count.
    pub gradient_violations: u64,
}

/// Everything a finished run reports.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub metrics: MetricsRecord,
    pub audit: RunAudit,
    pub trace: TraceLog,
    /// Every uniquely delivered packet with its winning hop trace (source
    /// first; the sink terminal is implicit), in packet-id order.
    pub delivered: Vec<Packet>,
    pub events_dispatched: u64,
    pub final_time: f64,
}

struct NodeSim {
    mob: MobilityState,
    energy: f64,
    alive: bool,
    role: Role,
    affiliation: Option<Affiliation>,
    /// Trailing (time, step path length) samples for the mobility estimate.
    path_hist: Vec<(f64, f64)>,
    weight: f64,
    // Election transients (DECA/DEMC announce window).
    announce_handle: Option<EventHandle>,
    announced: bool,
    suppressed: bool,
    heard: Vec<Announcement>,
    pending: Option<Assignment>,
}

impl NodeSim {
    fn new(mob: MobilityState, energy: f64) -> Self {
        NodeSim {
            mob,
            energy,
            alive: energy > 0.0,
            role: Role::Unaffiliated,
            affiliation: None,
            path_hist: Vec::new(),
            weight: 0.0,
            announce_handle: None,
            announced: false,
            suppressed: false,
            heard: Vec::new(),
            pending: None,
        }
    }
}

struct PacketState {
    source: NodeId,
    created_at: SimTime,
    live_copies: u32,
    delivered_at: Option<SimTime>,
    dropped: bool,
    delivered_hops: Option<Vec<NodeId>>,
}

struct RecoveryEntry {
    hops: Vec<NodeId>,
    attempts_left: u32,
    excluded: Vec<NodeId>,
    timeout: EventHandle,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum DropStage {
    UnaffiliatedSource,
    IntraSend,
    IntraFlight,
    InterDeadEnd,
    InterFlight,
    RecoveryExhausted,
    Absorbed,
    AckRelease,
}

struct RoundAuditBuild {
    started_at: f64,
    heads: u32,
    clustering_tx: u64,
    relays: u64,
    per_node_tx: Vec<u32>,
    clusters: Vec<ClusterView>,
}

/// Simulation state for one scenario run. Single-threaded; owned by exactly
/// one kernel's event loop.
pub struct World {
    cfg: ScenarioConfig,
    field: FieldGeometry,
    radio: RadioParams,
    mob_params: MobilityParams,
    proto: ProtocolConfig,
    grid: Option<ZoneGrid>,
    topo: Topology,
    nodes: Vec<NodeSim>,
    mobility_stream: RandomStream,
    protocol_stream: RandomStream,
    packets: Vec<PacketState>,
    recovery: HashMap<(NodeId, PacketId), RecoveryEntry>,
    gradient: Vec<Option<u32>>,
    heads: Vec<NodeId>,
    round: u32,
    round_started_at: f64,
    counters: RunCounters,
    drops: DropBreakdown,
    audit_rounds: Vec<RoundAuditBuild>,
    out_of_window_tx: u64,
    greedy_violations: u64,
    gradient_violations: u64,
    opts: TraceOptions,
    trace: TraceLog,
    /// Delay from round start to election commit (covers the announce window,
    /// worst-case timer, and broadcast flight times).
    commit_delay: f64,
}

impl World {
    pub fn new(
        cfg: &ScenarioConfig,
        opts: TraceOptions,
        kernel: &mut Kernel<EventKind>,
    ) -> Result<Self, SimError> {
        cfg.validate()?;
        let field = cfg.field()?;
        let mob_params = cfg.mobility_params();
        mob_params.validate()?;

        let mut mobility_stream = RandomStream::new(cfg.seed, "mobility");
        let positions = mobility::init_positions(cfg.nodes as usize, &field, &mut mobility_stream)?;
        // Linear nodes share one run-wide heading; the whole population drifts
        // together and shuffles only at staggered wall reflections.
        let shared_heading = match cfg.mobility {
            MobilityModel::Linear => mobility_stream
                .uniform(0.0, std::f64::consts::TAU)
                .expect("tau > 0"),
            _ => 0.0,
        };
        let states: Vec<(Vec2, Vec2)> = positions
            .into_iter()
            .map(|pos| {
                let velocity =
                    mobility::init_velocity(&mob_params, shared_heading, &mut mobility_stream);
                (pos, velocity)
            })
            .collect();
        Self::build(cfg, &states, mobility_stream, opts, kernel)
    }

    /// Build a world from explicit node positions and velocities. Intended
    /// for controlled-topology tests; the standard entry point is [`new`].
    ///
    /// [`new`]: World::new
    pub fn with_nodes(
        cfg: &ScenarioConfig,
        nodes: &[(Vec2, Vec2)],
        opts: TraceOptions,
        kernel: &mut Kernel<EventKind>,
    ) -> Result<Self, SimError> {
        let mut cfg = cfg.clone();
        cfg.nodes = nodes.len() as u32;
        cfg.validate()?;
        let mobility_stream = RandomStream::new(cfg.seed, "mobility");
        Self::build(&cfg, nodes, mobility_stream, opts, kernel)
    }

    fn build(
        cfg: &ScenarioConfig,
        states: &[(Vec2, Vec2)],
        mobility_stream: RandomStream,
        opts: TraceOptions,
        kernel: &mut Kernel<EventKind>,
    ) -> Result<Self, SimError> {
        let field = cfg.field()?;
        let radio = cfg.radio();
        radio.validate()?;
        let mob_params = cfg.mobility_params();
        mob_params.validate()?;
        let proto = cfg.protocol_config();
        proto.validate()?;
        let grid = if cfg.protocol.is_position_based() && cfg.protocol != ProtocolKind::Mar {
            Some(ZoneGrid::new(field, proto.cell_size)?)
        } else {
            None
        };

        let protocol_stream = RandomStream::new(cfg.seed, "protocol");
        let mut traffic_stream = RandomStream::new(cfg.seed, "traffic");

        let nodes: Vec<NodeSim> = states
            .iter()
            .map(|&(pos, velocity)| {
                let mut state = MobilityState::at(pos);
                state.velocity = velocity;
                NodeSim::new(state, cfg.initial_energy)
            })
            .collect();
        let positions: Vec<Vec2> = states.iter().map(|s| s.0).collect();
        let topo = Topology::new(positions, field.center());
        let n = nodes.len();

        let commit_delay = proto.announce_window * 1.3 + 0.05;

        let mut world = World {
            cfg: cfg.clone(),
            field,
            radio,
            mob_params,
            proto,
            grid,
            topo,
            nodes,
            mobility_stream,
            protocol_stream,
            packets: Vec::new(),
            recovery: HashMap::new(),
            gradient: vec![None; n],
            heads: Vec::new(),
            round: 0,
            round_started_at: 0.0,
            counters: RunCounters::default(),
            drops: DropBreakdown::default(),
            audit_rounds: Vec::new(),
            out_of_window_tx: 0,
            greedy_violations: 0,
            gradient_violations: 0,
            opts,
            trace: TraceLog::default(),
            commit_delay,
        };
        world.sync_alive();

        kernel.schedule(SimTime::ZERO, EventKind::RoundStart)?;
        kernel.schedule(SimTime(world.mob_params.sample_interval), EventKind::MobilityStep)?;
        // Per-node generation phases de-synchronize traffic from the round
        // and mobility-sampling lattices; generation starts after the first
        // election settles.
        for i in 0..world.n() {
            let phase = traffic_stream
                .uniform(0.0, cfg.traffic_period)
                .expect("positive traffic period");
            kernel.schedule(
                SimTime(cfg.traffic_period + phase),
                EventKind::TrafficGen { node: NodeId(i as u32) },
            )?;
        }
        Ok(world)
    }

    fn n(&self) -> usize {
        self.nodes.len()
    }

    fn sync_alive(&mut self) {
        for i in 0..self.n() {
            self.topo.active[i] = self.nodes[i].alive;
        }
    }

    fn kill_if_depleted(&mut self, node: NodeId) {
        let i = node.index();
        if self.nodes[i].energy <= 0.0 && self.nodes[i].alive {
            self.nodes[i].energy = 0.0;
            self.nodes[i].alive = false;
            self.topo.active[i] = false;
        }
    }

    fn charge_tx(&mut self, node: NodeId) {
        let i = node.index();
        if self.nodes[i].alive {
            self.nodes[i].energy -= self.cfg.tx_cost;
            self.kill_if_depleted(node);
        }
    }

    fn charge_rx(&mut self, addr: Addr) {
        if let Addr::Node(node) = addr {
            let i = node.index();
            if self.nodes[i].alive {
                self.nodes[i].energy -= self.cfg.rx_cost;
                self.kill_if_depleted(node);
            }
        }
    }

    /// Mean path length per second over the trailing window; zero before any
    /// movement history exists.
    pub fn estimate_mobility(&self, node: NodeId, now: f64, window: f64) -> f64 {
        let cutoff = now - window;
        let total: f64 = self.nodes[node.index()]
            .path_hist
            .iter()
            .filter(|(t, _)| *t > cutoff)
            .map(|(_, d)| d)
            .sum();
        total / window
    }

    pub fn node_energy(&self, node: NodeId) -> f64 {
        self.nodes[node.index()].energy
    }

    pub fn node_role(&self, node: NodeId) -> Role {
        self.nodes[node.index()].role
    }

    pub fn node_affiliation(&self, node: NodeId) -> Option<Affiliation> {
        self.nodes[node.index()].affiliation
    }

    pub fn committed_heads(&self) -> &[NodeId] {
        &self.heads
    }

    fn audit_clustering_tx(&mut self, node: NodeId, now: f64, is_relay: bool) {
        if now - self.round_started_at > self.commit_delay + 1e-9 {
            self.out_of_window_tx += 1;
        }
        if let Some(round) = self.audit_rounds.last_mut() {
            round.clustering_tx += 1;
            round.per_node_tx[node.index()] += 1;
            if is_relay {
                round.relays += 1;
            }
        }
    }

    // --- event handlers -----------------------------------------------------

    fn on_mobility_step(&mut self, kernel: &mut Kernel<EventKind>) -> Result<(), SimError> {
        let now = kernel.now();
        let dt = self.mob_params.sample_interval;
        for i in 0..self.n() {
            if !self.nodes[i].alive {
                continue;
            }
            let prev = self.nodes[i].mob.position;
            let next = mobility::step(
                &self.nodes[i].mob,
                &self.mob_params,
                dt,
                &self.field,
                &mut self.mobility_stream,
            )?;
            let moved = prev.distance(next.position);
            self.nodes[i].mob = next;
            self.topo.positions[i] = next.position;
            let cutoff = now.secs() - self.proto.mobility_window;
            self.nodes[i].path_hist.push((now.secs(), moved));
            self.nodes[i].path_hist.retain(|(t, _)| *t > cutoff);
            if self.opts.mobility {
                self.trace.mobility.push(format!(
                    "{:.6}\t{}\t{:.6}\t{:.6}",
                    now.secs(),
                    i,
                    next.position.x,
                    next.position.y
                ));
            }
        }
        let next_at = now + dt;
        if next_at.secs() <= self.cfg.duration {
            kernel.schedule(next_at, EventKind::MobilityStep)?;
        }
        Ok(())
    }

    fn on_round_start(&mut self, kernel: &mut Kernel<EventKind>) -> Result<(), SimError> {
        let now = kernel.now();
        self.round += 1;
        self.round_started_at = now.secs();
        self.sync_alive();
        self.audit_rounds.push(RoundAuditBuild {
            started_at: now.secs(),
            heads: 0,
            clustering_tx: 0,
            relays: 0,
            per_node_tx: vec![0; self.n()],
            clusters: Vec::new(),
        });

        match self.cfg.protocol {
            ProtocolKind::Mar => {
                let estimates: Vec<f64> = (0..self.n())
                    .map(|i| {
                        self.estimate_mobility(NodeId(i as u32), now.secs(), self.proto.mobility_window)
                    })
                    .collect();
                let result = election::mar_elect(&estimates, &self.topo, &self.radio);
                self.commit_assignments(&result, now);
                self.instant_head_announcements(now);
            }
            ProtocolKind::Grc | ProtocolKind::GrcR => {
                let energy: Vec<f64> = self
                    .nodes
                    .iter()
                    .map(|n| (n.energy / self.cfg.initial_energy).max(0.0))
                    .collect();
                let grid = self.grid.as_ref().expect("GRC builds a zone grid");
                let result = election::grc_elect(&energy, grid, &self.topo, &self.radio);
                self.commit_assignments(&result, now);
                self.instant_head_announcements(now);
            }
            ProtocolKind::Deca => {
                self.start_timer_election(kernel, now, true)?;
            }
            ProtocolKind::Demc | ProtocolKind::DemcR => {
                self.start_timer_election(kernel, now, false)?;
            }
        }

        let next = now + self.proto.round_length;
        if next.secs() < self.cfg.duration {
            kernel.schedule(next, EventKind::RoundStart)?;
        }
        Ok(())
    }

    /// DECA/DEMC: reset transients, compute weights, and arm per-node
    /// announcement timers plus the commit event that seals the round.
    fn start_timer_election(
        &mut self,
        kernel: &mut Kernel<EventKind>,
        now: SimTime,
        deca: bool,
    ) -> Result<(), SimError> {
        let estimates: Vec<f64> = (0..self.n())
            .map(|i| self.estimate_mobility(NodeId(i as u32), now.secs(), self.proto.mobility_window))
            .collect();
        let degrees: Vec<usize> = if deca {
            (0..self.n())
                .map(|i| {
                    if self.nodes[i].alive {
                        network::neighbors(NodeId(i as u32), &self.topo, &self.radio)
                            .map(|v| v.len())
                            .unwrap_or(0)
                    } else {
                        0
                    }
                })
                .collect()
        } else {
            vec![0; self.n()]
        };
        let max_degree = degrees.iter().copied().max().unwrap_or(0);

        for i in 0..self.n() {
            let node = &mut self.nodes[i];
            node.announce_handle = None;
            node.announced = false;
            node.suppressed = false;
            node.heard.clear();
            node.pending = None;
            if !node.alive {
                continue;
            }
            let energy_frac = (node.energy / self.cfg.initial_energy).max(0.0);
            let weight = if deca {
                election::deca_weight(
                    energy_frac,
                    degrees[i],
                    max_degree,
                    estimates[i],
                    self.mob_params.v_max,
                    self.proto.deca_weights,
                )
            } else {
                let jitter = if self.proto.demc_weight_jitter > 0.0 {
                    self.protocol_stream
                        .uniform(0.0, self.proto.demc_weight_jitter)
                        .expect("positive jitter scale")
                } else {
                    0.0
                };
                election::demc_weight(energy_frac, jitter, self.proto.demc_weight_jitter)
            };
            self.nodes[i].weight = weight;
            let delay = election::announce_delay(self.proto.announce_window, weight, NodeId(i as u32));
            let handle = kernel.schedule(now + delay, EventKind::AnnounceTimer { node: NodeId(i as u32) })?;
            self.nodes[i].announce_handle = Some(handle);
        }
        kernel.schedule(now + self.commit_delay, EventKind::ElectionCommit)?;
        Ok(())
    }

    /// Apply an election result: roles, affiliations, committed clusters,
    /// and the sink hop gradient for the gradient-routed protocols.
    fn commit_assignments(&mut self, result: &ElectionResult, now: SimTime) {
        debug_assert_eq!(result.assignments.len(), self.n());
        for i in 0..self.n() {
            let node = &mut self.nodes[i];
            if !node.alive {
                node.role = Role::Unaffiliated;
                node.affiliation = None;
                continue;
            }
            match result.assignments[i] {
                Assignment::Head => {
                    node.role = Role::Head;
                    node.affiliation = Some(Affiliation {
                        head: NodeId(i as u32),
                        via: None,
                    });
                }
                Assignment::Member(aff) => {
                    node.role = Role::Member;
                    node.affiliation = Some(aff);
                }
                Assignment::Unaffiliated => {
                    node.role = Role::Unaffiliated;
                    node.affiliation = None;
                }
            }
        }
        self.heads = result.heads();
        self.heads.retain(|h| self.nodes[h.index()].alive);

        // No dangling affiliations: every member's head is a committed head,
        // and a two-hop member's relay serves the same head.
        #[cfg(debug_assertions)]
        for (i, node) in self.nodes.iter().enumerate() {
            if node.role == Role::Member {
                let aff = node.affiliation.expect("members carry an affiliation");
                debug_assert!(
                    self.nodes[aff.head.index()].role == Role::Head,
                    "node {i} affiliated to non-head {}",
                    aff.head
                );
                if let Some(via) = aff.via {
                    debug_assert!(
                        self.nodes[via.index()].affiliation.map(|a| a.head) == Some(aff.head),
                        "node {i} relays through {via} which serves a different head"
                    );
                }
            }
        }

        self.gradient = if self.cfg.protocol.is_position_based() {
            vec![None; self.n()]
        } else {
            election::build_sink_gradient(&self.topo, &self.radio)
        };

        let mut clusters: Vec<ClusterView> = self
            .heads
            .iter()
            .map(|&head| ClusterView {
                head,
                members: Vec::new(),
                formed_at: now,
            })
            .collect();
        for (i, node) in self.nodes.iter().enumerate() {
            if node.role == Role::Member {
                let head = node.affiliation.expect("members carry an affiliation").head;
                if let Some(cluster) = clusters.iter_mut().find(|c| c.head == head) {
                    cluster.members.push(NodeId(i as u32));
                }
            }
        }
        if self.opts.clusters {
            for cluster in &clusters {
                self.trace.clusters.push(format!(
                    "{}\t{}\t{}\t{}",
                    self.round,
                    self.cfg.protocol,
                    cluster.head,
                    cluster.members.len()
                ));
            }
        }
        if let Some(round) = self.audit_rounds.last_mut() {
            round.heads = self.heads.len() as u32;
            round.clusters = clusters;
        }
    }

    /// MAR/GRC heads announce themselves once at commit time; the cost is
    /// charged to the head and to every in-range hearer.
    fn instant_head_announcements(&mut self, now: SimTime) {
        let heads = self.heads.clone();
        for h in heads {
            self.charge_tx(h);
            self.audit_clustering_tx(h, now.secs(), false);
            let hearers = network::neighbors(h, &self.topo, &self.radio).unwrap_or_default();
            for v in hearers {
                self.charge_rx(Addr::Node(v));
            }
        }
    }

    fn on_election_commit(&mut self, kernel: &mut Kernel<EventKind>) -> Result<(), SimError> {
        let now = kernel.now();
        let deca = self.cfg.protocol == ProtocolKind::Deca;
        let mut assignments = vec![Assignment::Unaffiliated; self.n()];
        for i in 0..self.n() {
            if !self.nodes[i].alive {
                continue;
            }
            assignments[i] = match self.nodes[i].pending {
                Some(Assignment::Head) => Assignment::Head,
                Some(Assignment::Member(aff)) => Assignment::Member(aff),
                Some(Assignment::Unaffiliated) | None => {
                    if deca {
                        match affiliate(false, &self.nodes[i].heard) {
                            Some(head) => Assignment::Member(Affiliation { head, via: None }),
                            None => Assignment::Unaffiliated,
                        }
                    } else {
                        Assignment::Unaffiliated
                    }
                }
            };
        }
        let result = ElectionResult { assignments };
        self.commit_assignments(&result, now);
        Ok(())
    }

    fn on_announce_timer(
        &mut self,
        kernel: &mut Kernel<EventKind>,
        node: NodeId,
    ) -> Result<(), SimError> {
        let i = node.index();
        if !self.nodes[i].alive {
            return Ok(());
        }
        let now = kernel.now();
        self.nodes[i].announced = true;
        self.nodes[i].announce_handle = None;
        match self.cfg.protocol {
            ProtocolKind::Deca => {
                let is_head = !self.nodes[i].suppressed;
                if is_head {
                    self.nodes[i].pending = Some(Assignment::Head);
                }
                let payload = MessagePayload::DecaAnnounce {
                    weight: self.nodes[i].weight,
                    is_head,
                };
                self.charge_tx(node);
                self.audit_clustering_tx(node, now.secs(), false);
                network::broadcast(kernel, EventKind::Delivery, node, &payload, &self.topo, &self.radio)?;
            }
            ProtocolKind::Demc | ProtocolKind::DemcR => {
                if self.nodes[i].pending.is_some() {
                    return Ok(()); // already covered; stale timer
                }
                self.nodes[i].pending = Some(Assignment::Head);
                let payload = MessagePayload::DemcClaim {
                    head: node,
                    weight: self.nodes[i].weight,
                };
                self.charge_tx(node);
                self.audit_clustering_tx(node, now.secs(), false);
                network::broadcast(kernel, EventKind::Delivery, node, &payload, &self.topo, &self.radio)?;
            }
            _ => {}
        }
        Ok(())
    }

    fn on_relay_check(
        &mut self,
        kernel: &mut Kernel<EventKind>,
        node: NodeId,
        head: NodeId,
    ) -> Result<(), SimError> {
        let i = node.index();
        if !self.nodes[i].alive {
            return Ok(());
        }
        // Still a first-hop member of that head?
        let still_first_hop = matches!(
            self.nodes[i].pending,
            Some(Assignment::Member(Affiliation { head: h, via: None })) if h == head
        );
        if !still_first_hop {
            return Ok(());
        }
        let uncovered_nearby = network::neighbors(node, &self.topo, &self.radio)?
            .into_iter()
            .any(|w| self.nodes[w.index()].pending.is_none());
        if !uncovered_nearby {
            return Ok(());
        }
        let now = kernel.now();
        self.charge_tx(node);
        self.audit_clustering_tx(node, now.secs(), true);
        network::broadcast(
            kernel,
            EventKind::Delivery,
            node,
            &MessagePayload::DemcRelay { head },
            &self.topo,
            &self.radio,
        )?;
        Ok(())
    }

    fn on_traffic_gen(
        &mut self,
        kernel: &mut Kernel<EventKind>,
        source: NodeId,
    ) -> Result<(), SimError> {
        let now = kernel.now();
        let i = source.index();
        // Heads aggregate nothing and generate nothing; the warm-down tail
        // generates no new traffic so in-flight stragglers stay rare.
        if self.nodes[i].alive
            && self.nodes[i].role != Role::Head
            && now.secs() <= self.cfg.duration - self.cfg.warm_down
        {
            let packet = PacketId(self.packets.len() as u64);
            self.packets.push(PacketState {
                source,
                created_at: now,
                live_copies: 1,
                delivered_at: None,
                dropped: false,
                delivered_hops: None,
            });
            self.counters.sent += 1;

            match self.nodes[i].affiliation {
                Some(aff) if self.nodes[i].role == Role::Member => {
                    let target = aff.via.unwrap_or(aff.head);
                    self.send_intra(kernel, source, target, packet, vec![source])?;
                }
                _ => {
                    // Unaffiliated traffic has no route: counted sent and lost.
                    self.release_copy(packet, DropStage::UnaffiliatedSource);
                }
            }
        }
        let next = now + self.cfg.traffic_period;
        if next.secs() < self.cfg.duration {
            kernel.schedule(next, EventKind::TrafficGen { node: source })?;
        }
        Ok(())
    }

    /// Member-to-head (or relay-to-head) hop. Plain custody transfer for all
    /// protocols; recovery never applies intra-cluster. Revisiting a node in
    /// the packet's trace is fine here: intra targets follow the current
    /// affiliation structure (second-hop member -> relay -> head), which is
    /// acyclic, so the walk always reaches a head or dies.
    fn send_intra(
        &mut self,
        kernel: &mut Kernel<EventKind>,
        from: NodeId,
        target: NodeId,
        packet: PacketId,
        hops: Vec<NodeId>,
    ) -> Result<(), SimError> {
        if !self.topo.is_active(target) {
            self.release_copy(packet, DropStage::IntraSend);
            return Ok(());
        }
        self.charge_tx(from);
        let outcome = network::unicast(
            kernel,
            EventKind::Delivery,
            Addr::Node(from),
            Addr::Node(target),
            MessagePayload::Data {
                packet,
                hops,
                leg: HopLeg::Intra,
            },
            &self.topo,
            &self.radio,
        )?;
        if outcome == SendOutcome::DroppedOutOfRange {
            // Head moved away: the packet is lost, and counted.
            self.release_copy(packet, DropStage::IntraSend);
        }
        Ok(())
    }

    /// Inter-cluster forwarding from the current holder toward the sink.
    fn inter_route(
        &mut self,
        kernel: &mut Kernel<EventKind>,
        holder: NodeId,
        packet: PacketId,
        hops: Vec<NodeId>,
    ) -> Result<(), SimError> {
        let next = self.pick_next_hop(holder, &hops, &[], false);
        match next {
            Some(addr) => {
                self.track_forward_progress(holder, addr, false);
                self.send_inter(kernel, holder, addr, packet, hops)?;
            }
            None => {
                if self.cfg.protocol.has_recovery() {
                    self.ensure_recovery_buffer(kernel, holder, packet, hops)?;
                } else {
                    self.release_copy(packet, DropStage::InterDeadEnd);
                }
            }
        }
        Ok(())
    }

    /// Candidate selection shared by normal forwarding and recovery.
    /// Cluster heads are the preferred backbone; when no head qualifies the
    /// hop falls back to an ordinary gateway node under the same progress
    /// rule. `recovery` relaxes that rule (non-strict geographic hop / equal
    /// gradient hop count).
    fn pick_next_hop(
        &self,
        holder: NodeId,
        hops: &[NodeId],
        excluded: &[NodeId],
        recovery: bool,
    ) -> Option<Addr> {
        let holder_pos = self.topo.positions[holder.index()];
        let sink_in_range = network::in_range(holder_pos, self.topo.sink, &self.radio);
        if sink_in_range {
            return Some(Addr::Sink);
        }
        // Strict-progress hops cannot revisit a node (distance / hop count
        // decreases every hop), so the visited-path exclusion only matters
        // for non-strict recovery hops, where it prevents ping-pong.
        let usable = |h: NodeId| {
            h != holder
                && self.nodes[h.index()].alive
                && !(recovery && hops.contains(&h))
                && !excluded.contains(&h)
                && network::in_range(holder_pos, self.topo.positions[h.index()], &self.radio)
        };
        let head_tier = || self.heads.iter().copied().filter(|h| usable(*h)).collect();
        let gateway_tier = || {
            (0..self.n() as u32)
                .map(NodeId)
                .filter(|v| self.nodes[v.index()].role != Role::Head && usable(*v))
                .collect()
        };

        if self.cfg.protocol.is_position_based() {
            let pick = |ids: Vec<NodeId>| {
                let candidates: Vec<routing::GeoCandidate> = ids
                    .into_iter()
                    .map(|id| routing::GeoCandidate {
                        id,
                        position: self.topo.positions[id.index()],
                    })
                    .collect();
                routing::greedy_next_hop(holder_pos, self.topo.sink, false, &candidates, !recovery)
            };
            pick(head_tier()).or_else(|| pick(gateway_tier()))
        } else {
            let own = self.gradient_estimate(holder);
            let pick = |ids: Vec<NodeId>| {
                let candidates: Vec<routing::GradientCandidate> = ids
                    .into_iter()
                    .filter_map(|id| {
                        self.gradient[id.index()].map(|hops_to_sink| routing::GradientCandidate {
                            id,
                            hops_to_sink,
                        })
                    })
                    .collect();
                routing::gradient_next_hop(own, false, &candidates, recovery)
            };
            pick(head_tier()).or_else(|| pick(gateway_tier()))
        }
    }

    /// Holder's hop estimate from the per-round sink flood.
    fn gradient_estimate(&self, holder: NodeId) -> Option<u32> {
        self.gradient[holder.index()]
    }

    fn track_forward_progress(&mut self, holder: NodeId, next: Addr, recovery: bool) {
        if recovery {
            return;
        }
        match next {
            Addr::Sink => {}
            Addr::Node(next_id) => {
                if self.cfg.protocol.is_position_based() {
                    let own = self.topo.positions[holder.index()].distance(self.topo.sink);
                    let theirs = self.topo.positions[next_id.index()].distance(self.topo.sink);
                    if theirs >= own {
                        self.greedy_violations += 1;
                    }
                } else {
                    let own = self.gradient_estimate(holder).unwrap_or(u32::MAX);
                    let theirs = self.gradient[next_id.index()].unwrap_or(u32::MAX);
                    if theirs >= own {
                        self.gradient_violations += 1;
                    }
                }
            }
        }
    }

    /// Transmit an inter-cluster hop. Recovery protocols keep the packet
    /// buffered awaiting an acknowledgement, so the transmission is a copy;
    /// plain protocols transfer custody.
    fn send_inter(
        &mut self,
        kernel: &mut Kernel<EventKind>,
        holder: NodeId,
        to: Addr,
        packet: PacketId,
        hops: Vec<NodeId>,
    ) -> Result<(), SimError> {
        self.charge_tx(holder);
        let outcome = network::unicast(
            kernel,
            EventKind::Delivery,
            Addr::Node(holder),
            to,
            MessagePayload::Data {
                packet,
                hops: hops.clone(),
                leg: HopLeg::Inter,
            },
            &self.topo,
            &self.radio,
        )?;
        if outcome == SendOutcome::DroppedOutOfRange {
            // Candidates are selected in range; a drop here means the caller
            // raced ahead of the topology. Treat like any failed hop.
            if !self.cfg.protocol.has_recovery() {
                self.release_copy(packet, DropStage::InterDeadEnd);
            }
            return Ok(());
        }
        if self.cfg.protocol.has_recovery() {
            // The in-flight transmission is a tentative copy; the buffered
            // copy stays with the holder until acknowledged.
            self.packets[packet.0 as usize].live_copies += 1;
            let now = kernel.now();
            let timeout_at = now + self.proto.recovery_timeout;
            match self.recovery.get_mut(&(holder, packet)) {
                Some(entry) => {
                    kernel.cancel(entry.timeout);
                    entry.timeout =
                        kernel.schedule(timeout_at, EventKind::RecoveryTimeout { holder, packet })?;
                }
                None => {
                    let timeout =
                        kernel.schedule(timeout_at, EventKind::RecoveryTimeout { holder, packet })?;
                    self.recovery.insert(
                        (holder, packet),
                        RecoveryEntry {
                            hops,
                            attempts_left: self.proto.recovery_retries,
                            excluded: Vec::new(),
                            timeout,
                        },
                    );
                }
            }
        }
        Ok(())
    }

    /// Buffer a packet at the holder with a recovery timeout, without
    /// transmitting (no viable next hop right now).
    fn ensure_recovery_buffer(
        &mut self,
        kernel: &mut Kernel<EventKind>,
        holder: NodeId,
        packet: PacketId,
        hops: Vec<NodeId>,
    ) -> Result<(), SimError> {
        if self.recovery.contains_key(&(holder, packet)) {
            return Ok(());
        }
        let timeout = kernel.schedule(
            kernel.now() + self.proto.recovery_timeout,
            EventKind::RecoveryTimeout { holder, packet },
        )?;
        self.recovery.insert(
            (holder, packet),
            RecoveryEntry {
                hops,
                attempts_left: self.proto.recovery_retries,
                excluded: Vec::new(),
                timeout,
            },
        );
        Ok(())
    }

    /// A reported hop failure at a recovery holder: exclude the failed
    /// candidate and immediately try an alternate (non-strict progress is
    /// allowed once per invocation).
    fn recover(
        &mut self,
        kernel: &mut Kernel<EventKind>,
        holder: NodeId,
        packet: PacketId,
        failed: Option<NodeId>,
    ) -> Result<(), SimError> {
        let Some(entry) = self.recovery.get_mut(&(holder, packet)) else {
            return Ok(());
        };
        if let Some(f) = failed {
            entry.excluded.push(f);
        }
        if entry.attempts_left == 0 || !self.nodes[holder.index()].alive {
            self.give_up(kernel, holder, packet);
            return Ok(());
        }
        let hops = entry.hops.clone();
        let excluded = entry.excluded.clone();
        match self.pick_next_hop(holder, &hops, &excluded, true) {
            Some(next) => {
                self.recovery
                    .get_mut(&(holder, packet))
                    .expect("entry present")
                    .attempts_left -= 1;
                self.send_inter(kernel, holder, next, packet, hops)?;
            }
            None => {
                // Stay buffered; the armed timeout re-attempts with whatever
                // neighborhood exists then.
            }
        }
        Ok(())
    }

    fn on_recovery_timeout(
        &mut self,
        kernel: &mut Kernel<EventKind>,
        holder: NodeId,
        packet: PacketId,
    ) -> Result<(), SimError> {
        let Some(entry) = self.recovery.get_mut(&(holder, packet)) else {
            return Ok(());
        };
        if entry.attempts_left == 0 || !self.nodes[holder.index()].alive {
            self.give_up(kernel, holder, packet);
            return Ok(());
        }
        entry.attempts_left -= 1;
        entry.excluded.clear();
        let hops = entry.hops.clone();
        match self.pick_next_hop(holder, &hops, &[], true) {
            Some(next) => {
                self.send_inter(kernel, holder, next, packet, hops)?;
            }
            None => {
                let timeout = kernel.schedule(
                    kernel.now() + self.proto.recovery_timeout,
                    EventKind::RecoveryTimeout { holder, packet },
                )?;
                self.recovery
                    .get_mut(&(holder, packet))
                    .expect("entry present")
                    .timeout = timeout;
            }
        }
        Ok(())
    }

    fn give_up(&mut self, kernel: &mut Kernel<EventKind>, holder: NodeId, packet: PacketId) {
        if let Some(entry) = self.recovery.remove(&(holder, packet)) {
            kernel.cancel(entry.timeout);
            self.release_copy(packet, DropStage::RecoveryExhausted);
        }
    }

    /// Retire one live copy of a packet. When the last copy of an undelivered
    /// packet dies, the packet counts as dropped and the drop is attributed
    /// to `stage`.
    fn release_copy(&mut self, packet: PacketId, stage: DropStage) {
        let p = &mut self.packets[packet.0 as usize];
        debug_assert!(p.live_copies > 0, "copy accounting underflow");
        p.live_copies -= 1;
        if p.live_copies == 0 && p.delivered_at.is_none() && !p.dropped {
            p.dropped = true;
            self.counters.dropped += 1;
            match stage {
                DropStage::UnaffiliatedSource => self.drops.unaffiliated_source += 1,
                DropStage::IntraSend => self.drops.intra_send += 1,
                DropStage::IntraFlight => self.drops.intra_flight += 1,
                DropStage::InterDeadEnd => self.drops.inter_dead_end += 1,
                DropStage::InterFlight => self.drops.inter_flight += 1,
                DropStage::RecoveryExhausted => self.drops.recovery_exhausted += 1,
                DropStage::Absorbed | DropStage::AckRelease => {
                    debug_assert!(false, "absorption cannot drop a packet")
                }
            }
        }
    }

    fn on_delivery(
        &mut self,
        kernel: &mut Kernel<EventKind>,
        t: Transmission,
    ) -> Result<(), SimError> {
        if !network::deliverable(&t, &self.topo, &self.radio) {
            return self.on_delivery_failed(kernel, t);
        }
        self.charge_rx(t.to);
        match t.payload.clone() {
            MessagePayload::Data { packet, hops, leg } => {
                self.on_data(kernel, t.from, t.to, packet, hops, leg)?;
            }
            MessagePayload::Ack { packet } => {
                if let Addr::Node(holder) = t.to {
                    if let Some(entry) = self.recovery.remove(&(holder, packet)) {
                        kernel.cancel(entry.timeout);
                        self.release_copy(packet, DropStage::AckRelease);
                    }
                }
            }
            MessagePayload::DecaAnnounce { weight, is_head } => {
                if self.cfg.protocol == ProtocolKind::Deca {
                    if let (Addr::Node(origin), Addr::Node(hearer)) = (t.from, t.to) {
                        self.on_deca_announce(origin, hearer, weight, is_head);
                    }
                }
            }
            MessagePayload::DemcClaim { head, weight } => {
                if matches!(self.cfg.protocol, ProtocolKind::Demc | ProtocolKind::DemcR) {
                    if let Addr::Node(hearer) = t.to {
                        self.on_demc_claim(kernel, hearer, head, weight)?;
                    }
                }
            }
            MessagePayload::DemcRelay { head } => {
                if matches!(self.cfg.protocol, ProtocolKind::Demc | ProtocolKind::DemcR) {
                    if let (Addr::Node(relayer), Addr::Node(hearer)) = (t.from, t.to) {
                        self.on_demc_relay(kernel, hearer, head, relayer);
                    }
                }
            }
        }
        Ok(())
    }

    fn on_deca_announce(&mut self, origin: NodeId, hearer: NodeId, weight: f64, is_head: bool) {
        let i = hearer.index();
        let distance = self.topo.positions[i].distance(self.topo.positions[origin.index()]);
        self.nodes[i].heard.push(Announcement {
            origin,
            weight,
            is_head,
            distance,
        });
        // A higher-weight head announcement (ties to the higher id) heard
        // before the node's own timer fires suppresses its head claim.
        if is_head && !self.nodes[i].announced {
            let own = (self.nodes[i].weight, hearer);
            if (weight, origin) > own {
                self.nodes[i].suppressed = true;
            }
        }
    }

    fn on_demc_claim(
        &mut self,
        kernel: &mut Kernel<EventKind>,
        hearer: NodeId,
        head: NodeId,
        weight: f64,
    ) -> Result<(), SimError> {
        let i = hearer.index();
        let distance = self.topo.positions[i].distance(self.topo.positions[head.index()]);
        self.nodes[i].heard.push(Announcement {
            origin: head,
            weight,
            is_head: true,
            distance,
        });
        if self.nodes[i].pending.is_some() {
            return Ok(());
        }
        self.nodes[i].pending = Some(Assignment::Member(Affiliation { head, via: None }));
        if let Some(handle) = self.nodes[i].announce_handle.take() {
            kernel.cancel(handle);
        }
        // First-hop members may relay the claim once, shortly after joining,
        // if someone nearby is still uncovered.
        let relay_at = kernel.now()
            + self.radio.tx_delay * 4.0
            + (hearer.0 as f64 + 1.0) * 1e-4;
        kernel.schedule(
            relay_at,
            EventKind::RelayCheck {
                node: hearer,
                head,
            },
        )?;
        Ok(())
    }

    /// Second-hop coverage: the hearer joins the head through the relayer and
    /// drops its own claim. Second-hop members never relay further.
    fn on_demc_relay(
        &mut self,
        kernel: &mut Kernel<EventKind>,
        hearer: NodeId,
        head: NodeId,
        relayer: NodeId,
    ) {
        let i = hearer.index();
        if self.nodes[i].pending.is_some() {
            return;
        }
        self.nodes[i].pending = Some(Assignment::Member(Affiliation {
            head,
            via: Some(relayer),
        }));
        if let Some(handle) = self.nodes[i].announce_handle.take() {
            kernel.cancel(handle);
        }
    }

    fn on_data(
        &mut self,
        kernel: &mut Kernel<EventKind>,
        from: Addr,
        to: Addr,
        packet: PacketId,
        hops: Vec<NodeId>,
        leg: HopLeg,
    ) -> Result<(), SimError> {
        let now = kernel.now();
        match to {
            Addr::Sink => {
                // Acknowledge recovery hops before absorbing.
                if let Addr::Node(sender) = from {
                    if self.recovery.contains_key(&(sender, packet)) {
                        network::unicast(
                            kernel,
                            EventKind::Delivery,
                            Addr::Sink,
                            Addr::Node(sender),
                            MessagePayload::Ack { packet },
                            &self.topo,
                            &self.radio,
                        )?;
                    }
                }
                let p = &mut self.packets[packet.0 as usize];
                if p.delivered_at.is_none() {
                    p.delivered_at = Some(now);
                    p.delivered_hops = Some(hops);
                    self.counters.delivered_unique += 1;
                } else {
                    self.counters.duplicates += 1;
                }
                self.release_copy(packet, DropStage::Absorbed);
            }
            Addr::Node(v) => {
                let mut hops = hops;
                hops.push(v);
                // Acknowledge a recovery-protocol inter-cluster hop.
                if leg == HopLeg::Inter && self.cfg.protocol.has_recovery() {
                    if let Addr::Node(sender) = from {
                        if self.recovery.contains_key(&(sender, packet)) {
                            self.charge_tx(v);
                            network::unicast(
                                kernel,
                                EventKind::Delivery,
                                Addr::Node(v),
                                Addr::Node(sender),
                                MessagePayload::Ack { packet },
                                &self.topo,
                                &self.radio,
                            )?;
                        }
                    }
                }
                match (leg, self.nodes[v.index()].role) {
                    // An inter-cluster packet keeps moving toward the sink no
                    // matter who holds it (heads or gateway relays).
                    (HopLeg::Inter, _) => self.inter_route(kernel, v, packet, hops)?,
                    (HopLeg::Intra, Role::Head) => self.inter_route(kernel, v, packet, hops)?,
                    (HopLeg::Intra, Role::Member) => {
                        // Two-hop members route through their relay; the
                        // relay pushes on to the shared head.
                        let aff = self.nodes[v.index()].affiliation.expect("members are affiliated");
                        let target = aff.via.unwrap_or(aff.head);
                        self.send_intra(kernel, v, target, packet, hops)?;
                    }
                    (HopLeg::Intra, Role::Unaffiliated) => {
                        // The head was demoted while the packet was in the
                        // air; forward toward the sink anyway.
                        self.inter_route(kernel, v, packet, hops)?;
                    }
                }
            }
        }
        Ok(())
    }

    fn on_delivery_failed(
        &mut self,
        kernel: &mut Kernel<EventKind>,
        t: Transmission,
    ) -> Result<(), SimError> {
        if let MessagePayload::Data { packet, leg, .. } = t.payload {
            // The in-flight copy dies here.
            let stage = match leg {
                HopLeg::Intra => DropStage::IntraFlight,
                HopLeg::Inter => DropStage::InterFlight,
            };
            self.release_copy(packet, stage);
            if leg == HopLeg::Inter && self.cfg.protocol.has_recovery() {
                if let Addr::Node(sender) = t.from {
                    if self.recovery.contains_key(&(sender, packet)) {
                        // A failed sink hop has no node to exclude; the
                        // re-attempt simply uses the current neighborhood.
                        let failed = match t.to {
                            Addr::Node(v) => Some(v),
                            Addr::Sink => None,
                        };
                        self.recover(kernel, sender, packet, failed)?;
                    }
                }
            }
        }
        // Lost acknowledgements and clustering messages vanish silently; the
        // recovery timeout covers the ack case.
        Ok(())
    }

    /// Seal the run: count stragglers, verify the conservation partition,
    /// and assemble the report.
    pub fn finish(mut self, kernel: &Kernel<EventKind>) -> Result<RunOutput, SimError> {
        let in_flight = self
            .packets
            .iter()
            .filter(|p| p.live_copies > 0 && p.delivered_at.is_none() && !p.dropped)
            .count() as u64;
        self.counters.in_flight_at_end = in_flight;
        let metrics = metrics::finalize(self.counters)?;
        let delivered: Vec<Packet> = self
            .packets
            .iter()
            .enumerate()
            .filter(|(_, p)| p.delivered_at.is_some())
            .map(|(id, p)| Packet {
                id: PacketId(id as u64),
                source: p.source,
                created_at: p.created_at,
                hops: p.delivered_hops.clone().expect("delivered packets keep their path"),
                delivered_at: p.delivered_at,
            })
            .collect();

        let mut audit = RunAudit {
            rounds: Vec::with_capacity(self.audit_rounds.len()),
            drops: self.drops,
            clustering_tx_total: 0,
            hello_events: 0,
            max_clustering_tx_per_node_round: 0,
            control_tx_outside_window: self.out_of_window_tx,
            greedy_violations: self.greedy_violations,
            gradient_violations: self.gradient_violations,
        };
        for (idx, round) in self.audit_rounds.iter().enumerate() {
            audit.clustering_tx_total += round.clustering_tx;
            let per_node_max = round.per_node_tx.iter().copied().max().unwrap_or(0);
            audit.max_clustering_tx_per_node_round =
                audit.max_clustering_tx_per_node_round.max(per_node_max);
            audit.rounds.push(RoundAudit {
                round: idx as u32 + 1,
                started_at: round.started_at,
                heads: round.heads,
                clustering_tx: round.clustering_tx,
                relays: round.relays,
                clusters: round.clusters.clone(),
            });
        }

        Ok(RunOutput {
            metrics,
            audit,
            trace: self.trace,
            delivered,
            events_dispatched: kernel.dispatched(),
            final_time: kernel.now().secs(),
        })
    }
}

impl EventHandler<EventKind> for World {
    fn handle(&mut self, kernel: &mut Kernel<EventKind>, event: SimEvent<EventKind>) -> Result<(), String> {
        if self.opts.events {
            self.trace.events.push(format!(
                "{:.6}\t{}\t{}\t{}",
                event.fire_at.secs(),
                event.seq,
                event.kind.family(),
                event.kind.target_label()
            ));
        }
        let result = match event.kind {
            EventKind::MobilityStep => self.on_mobility_step(kernel),
            EventKind::RoundStart => self.on_round_start(kernel),
            EventKind::ElectionCommit => self.on_election_commit(kernel),
            EventKind::AnnounceTimer { node } => self.on_announce_timer(kernel, node),
            EventKind::RelayCheck { node, head } => self.on_relay_check(kernel, node, head),
            EventKind::TrafficGen { node } => self.on_traffic_gen(kernel, node),
            EventKind::Delivery(t) => self.on_delivery(kernel, t),
            EventKind::RecoveryTimeout { holder, packet } => {
                self.on_recovery_timeout(kernel, holder, packet)
            }
        };
        result.map_err(|e| e.to_string())
    }
}

/// Build a world, run it to the configured duration, and finalize metrics.
pub fn run_scenario(cfg: &ScenarioConfig, opts: TraceOptions) -> Result<RunOutput, SimError> {
    let mut kernel: Kernel<EventKind> = Kernel::new();
    let mut world = World::new(cfg, opts, &mut kernel)?;
    kernel.run(SimTime(cfg.duration), &mut world)?;
    world.finish(&kernel)
}
