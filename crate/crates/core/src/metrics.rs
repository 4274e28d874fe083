//! Run-level accounting: percentage packet loss, packet delivery ratio, and
//! cross-seed aggregation.
//!
//! The counters partition every generated packet id exactly once:
//! `sent = delivered_unique + dropped + in_flight_at_end`. Duplicates are
//! extra receptions of already-delivered ids; they are tracked separately and
//! are never part of the partition. Loss (and the unique delivery ratio) use
//! unique deliveries; the delivery ratio "as defined" includes duplicates and
//! can therefore exceed one, which flags duplication.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("packet metrics undefined for zero sent packets")]
    ZeroSent,
    #[error("unique deliveries ({delivered}) exceed sent packets ({sent}): duplicate leakage")]
    DeliveredExceedsSent { delivered: u64, sent: u64 },
    #[error(
        "counter leak: sent {sent} != delivered_unique {delivered_unique} + dropped {dropped} + \
         in_flight {in_flight}"
    )]
    CounterLeak {
        sent: u64,
        delivered_unique: u64,
        dropped: u64,
        in_flight: u64,
    },
    #[error("cannot aggregate an empty record list")]
    EmptyAggregate,
}

/// Raw per-run counters, updated by the simulation world.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RunCounters {
    pub sent: u64,
    pub delivered_unique: u64,
    pub duplicates: u64,
    pub dropped: u64,
    pub in_flight_at_end: u64,
}

/// Immutable per-run record. Metric fields are absent for zero-traffic runs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricsRecord {
    pub counters: RunCounters,
    pub loss_pct: Option<f64>,
    pub pdr_as_defined: Option<f64>,
    pub pdr_unique: Option<f64>,
}

/// Percentage packet loss: `((n - m) / n) * 100` for `n` sent and `m`
/// uniquely received packets.
pub fn packet_loss_pct(n: u64, m: u64) -> Result<f64, MetricsError> {
    if n == 0 {
        return Err(MetricsError::ZeroSent);
    }
    if m > n {
        return Err(MetricsError::DeliveredExceedsSent {
            delivered: m,
            sent: n,
        });
    }
    Ok((n - m) as f64 / n as f64 * 100.0)
}

/// Delivery ratio: delivered (duplicates included) over sent. May exceed one;
/// a value above one means packet duplication is occurring.
pub fn pdr(delivered_total: u64, sent: u64) -> Result<f64, MetricsError> {
    if sent == 0 {
        return Err(MetricsError::ZeroSent);
    }
    Ok(delivered_total as f64 / sent as f64)
}

/// Seal the counters into an immutable record. The partition identity must
/// hold exactly; a violation means a packet was double-counted or leaked.
pub fn finalize(counters: RunCounters) -> Result<MetricsRecord, MetricsError> {
    let RunCounters {
        sent,
        delivered_unique,
        duplicates: _,
        dropped,
        in_flight_at_end,
    } = counters;
    if sent != delivered_unique + dropped + in_flight_at_end {
        return Err(MetricsError::CounterLeak {
            sent,
            delivered_unique,
            dropped,
            in_flight: in_flight_at_end,
        });
    }
    if sent == 0 {
        return Ok(MetricsRecord {
            counters,
            loss_pct: None,
            pdr_as_defined: None,
            pdr_unique: None,
        });
    }
    let loss = packet_loss_pct(sent, delivered_unique)?;
    let pdr_def = pdr(delivered_unique + counters.duplicates, sent)?;
    let pdr_uni = pdr(delivered_unique, sent)?;
    Ok(MetricsRecord {
        counters,
        loss_pct: Some(loss),
        pdr_as_defined: Some(pdr_def),
        pdr_unique: Some(pdr_uni),
    })
}

/// Mean, sample standard deviation, and 95% normal-approximation confidence
/// interval half-width. A single observation has no spread estimate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Aggregate {
    pub n: usize,
    pub mean: f64,
    pub std_dev: Option<f64>,
    pub ci95_half: Option<f64>,
}

pub fn aggregate(values: &[f64]) -> Result<Aggregate, MetricsError> {
    if values.is_empty() {
        return Err(MetricsError::EmptyAggregate);
    }
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return Ok(Aggregate {
            n,
            mean,
            std_dev: None,
            ci95_half: None,
        });
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    let std_dev = var.sqrt();
    let ci95_half = 1.96 * std_dev / (n as f64).sqrt();
    Ok(Aggregate {
        n,
        mean,
        std_dev: Some(std_dev),
        ci95_half: Some(ci95_half),
    })
}
