//! The six clustering routing protocols: cluster-head election, member
//! affiliation, and the next-hop rules for intra- and inter-cluster
//! forwarding.
//!
//! Position-based protocols (MAR, GRC, GRC-R) elect and forward using node
//! locations; non-position-based ones (DECA, DEMC, DEMC-R) use weights and a
//! per-round hop gradient toward the sink. The -R variants add an
//! inter-cluster recovery mechanism; plain variants drop on a failed hop.

pub mod election;
pub mod routing;

use thiserror::Error;

use crate::geom::Vec2;
use crate::kernel::SimTime;
use crate::mobility::FieldGeometry;
use crate::network::NodeId;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ProtocolKind {
    Mar,
    Grc,
    GrcR,
    Deca,
    Demc,
    DemcR,
}

impl ProtocolKind {
    pub const ALL: [ProtocolKind; 6] = [
        ProtocolKind::Mar,
        ProtocolKind::Grc,
        ProtocolKind::GrcR,
        ProtocolKind::Deca,
        ProtocolKind::Demc,
        ProtocolKind::DemcR,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ProtocolKind::Mar => "MAR",
            ProtocolKind::Grc => "GRC",
            ProtocolKind::GrcR => "GRC-R",
            ProtocolKind::Deca => "DECA",
            ProtocolKind::Demc => "DEMC",
            ProtocolKind::DemcR => "DEMC-R",
        }
    }

    pub fn parse(s: &str) -> Option<ProtocolKind> {
        match s.to_ascii_uppercase().as_str() {
            "MAR" => Some(ProtocolKind::Mar),
            "GRC" => Some(ProtocolKind::Grc),
            "GRC-R" | "GRCR" => Some(ProtocolKind::GrcR),
            "DECA" => Some(ProtocolKind::Deca),
            "DEMC" => Some(ProtocolKind::Demc),
            "DEMC-R" | "DEMCR" => Some(ProtocolKind::DemcR),
            _ => None,
        }
    }

    /// MAR, GRC, and GRC-R route on location; DECA, DEMC, and DEMC-R do not.
    pub fn is_position_based(&self) -> bool {
        matches!(
            self,
            ProtocolKind::Mar | ProtocolKind::Grc | ProtocolKind::GrcR
        )
    }

    /// Whether failed inter-cluster hops invoke the recovery mechanism.
    pub fn has_recovery(&self) -> bool {
        matches!(self, ProtocolKind::GrcR | ProtocolKind::DemcR)
    }
}

impl std::fmt::Display for ProtocolKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Role {
    Head,
    Member,
    Unaffiliated,
}

/// A member's attachment: its cluster head, and for two-hop DEMC members the
/// relay node the head announcement arrived through.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Affiliation {
    pub head: NodeId,
    pub via: Option<NodeId>,
}

/// Per-node election outcome.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Assignment {
    Head,
    Member(Affiliation),
    Unaffiliated,
}

#[derive(Clone, Debug, Default)]
pub struct ElectionResult {
    pub assignments: Vec<Assignment>,
}

impl ElectionResult {
    pub fn heads(&self) -> Vec<NodeId> {
        self.assignments
            .iter()
            .enumerate()
            .filter(|(_, a)| matches!(a, Assignment::Head))
            .map(|(i, _)| NodeId(i as u32))
            .collect()
    }
}

/// One cluster after an election.
#[derive(Clone, Debug)]
pub struct ClusterView {
    pub head: NodeId,
    pub members: Vec<NodeId>,
    pub formed_at: SimTime,
}

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("invalid protocol parameters: {0}")]
    BadParams(String),
}

#[derive(Clone, Copy, Debug)]
pub struct ProtocolConfig {
    pub protocol: ProtocolKind,
    /// Re-clustering period, seconds.
    pub round_length: f64,
    /// Recovery re-attempts per buffered packet before giving up.
    pub recovery_retries: u32,
    /// Wait between recovery re-attempts, seconds.
    pub recovery_timeout: f64,
    /// DECA weight coefficients (energy, connectivity, mobility); sum to 1.
    pub deca_weights: (f64, f64, f64),
    /// GRC zone cell size, meters.
    pub cell_size: f64,
    /// Election announcement window, seconds.
    pub announce_window: f64,
    /// Trailing window for the mobility estimate, seconds.
    pub mobility_window: f64,
    /// Scale of the DEMC random weight jitter.
    pub demc_weight_jitter: f64,
}

impl ProtocolConfig {
    pub fn validate(&self) -> Result<(), ProtocolError> {
        if !(self.round_length > 0.0) {
            return Err(ProtocolError::BadParams(format!(
                "round_length must be positive, got {}",
                self.round_length
            )));
        }
        if !(self.recovery_timeout > 0.0) {
            return Err(ProtocolError::BadParams(format!(
                "recovery_timeout must be positive, got {}",
                self.recovery_timeout
            )));
        }
        let (we, wc, wm) = self.deca_weights;
        if we < 0.0 || wc < 0.0 || wm < 0.0 || ((we + wc + wm) - 1.0).abs() > 1e-9 {
            return Err(ProtocolError::BadParams(format!(
                "deca weights must be non-negative and sum to 1, got ({we}, {wc}, {wm})"
            )));
        }
        if !(self.cell_size > 0.0) {
            return Err(ProtocolError::BadParams(format!(
                "cell_size must be positive, got {}",
                self.cell_size
            )));
        }
        if !(self.announce_window > 0.0) {
            return Err(ProtocolError::BadParams(format!(
                "announce_window must be positive, got {}",
                self.announce_window
            )));
        }
        if !(self.mobility_window > 0.0) {
            return Err(ProtocolError::BadParams(format!(
                "mobility_window must be positive, got {}",
                self.mobility_window
            )));
        }
        if !(0.0..1.0).contains(&self.demc_weight_jitter) {
            return Err(ProtocolError::BadParams(
                "demc_weight_jitter must lie in [0, 1)".into(),
            ));
        }
        Ok(())
    }
}

/// Grid partition of the field into square zones (edge cells may be cut
/// short when the field does not divide evenly). Every position maps to
/// exactly one cell.
#[derive(Clone, Copy, Debug)]
pub struct ZoneGrid {
    pub cell_size: f64,
    pub cols: usize,
    pub rows: usize,
    pub field: FieldGeometry,
}

impl ZoneGrid {
    pub fn new(field: FieldGeometry, cell_size: f64) -> Result<Self, ProtocolError> {
        if !(cell_size > 0.0) {
            return Err(ProtocolError::BadParams(format!(
                "cell_size must be positive, got {cell_size}"
            )));
        }
        Ok(ZoneGrid {
            cell_size,
            cols: (field.width / cell_size).ceil().max(1.0) as usize,
            rows: (field.height / cell_size).ceil().max(1.0) as usize,
            field,
        })
    }

    pub fn cell_count(&self) -> usize {
        self.cols * self.rows
    }

    /// Cell index for a position; boundary positions fold into the last cell.
    pub fn cell_of(&self, p: Vec2) -> usize {
        let ix = ((p.x / self.cell_size) as usize).min(self.cols - 1);
        let iy = ((p.y / self.cell_size) as usize).min(self.rows - 1);
        iy * self.cols + ix
    }

    fn cell_rect(&self, idx: usize) -> (Vec2, Vec2) {
        let ix = idx % self.cols;
        let iy = idx / self.cols;
        let x0 = ix as f64 * self.cell_size;
        let y0 = iy as f64 * self.cell_size;
        let x1 = (x0 + self.cell_size).min(self.field.width);
        let y1 = (y0 + self.cell_size).min(self.field.height);
        (Vec2::new(x0, y0), Vec2::new(x1, y1))
    }

    pub fn center(&self, idx: usize) -> Vec2 {
        let (lo, hi) = self.cell_rect(idx);
        Vec2::new((lo.x + hi.x) / 2.0, (lo.y + hi.y) / 2.0)
    }

    pub fn half_diagonal(&self, idx: usize) -> f64 {
        let (lo, hi) = self.cell_rect(idx);
        lo.distance(hi) / 2.0
    }
}

/// A heard clustering announcement, as seen by one node.
#[derive(Clone, Copy, Debug)]
pub struct Announcement {
    pub origin: NodeId,
    pub weight: f64,
    pub is_head: bool,
    /// Hearer-to-origin distance at hear time, meters.
    pub distance: f64,
}

/// Choose a cluster head among heard announcements: position-based protocols
/// take the nearest head, non-position-based the highest weight; ties go to
/// the lower head id. Returns `None` when no head announcement was heard
/// (the node stays unaffiliated and retries next round).
pub fn affiliate(position_based: bool, heard: &[Announcement]) -> Option<NodeId> {
    heard
        .iter()
        .filter(|a| a.is_head)
        .min_by(|a, b| {
            let key = if position_based {
                a.distance.total_cmp(&b.distance)
            } else {
                b.weight.total_cmp(&a.weight)
            };
            key.then(a.origin.cmp(&b.origin))
        })
        .map(|a| a.origin)
}
