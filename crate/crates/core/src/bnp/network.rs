//! Busy probability and density of each learned traffic pattern.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{domain, Result};
use crate::traffic::{group_by_pu, TraceRecord};

/// Default PHY rate used to turn packet lengths into airtime (bit/s).
pub const DEFAULT_LINK_RATE: f64 = 54e6;

/// Parameters of one traffic pattern as seen by the network analysis.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrafficPattern {
    pub id: usize,
    /// Busy probability.
    pub p_b: f64,
    /// Density of transmitters with this pattern.
    pub zeta_k: f64,
    /// Fraction of PUs with this pattern.
    pub portion: f64,
    /// Mean packet airtime (s).
    pub mean_airtime: f64,
    /// Mean packet interarrival (s).
    pub mean_interarrival: f64,
    pub member_pus: Vec<u32>,
    /// Set when the raw busy estimate exceeded 1 and was clamped, i.e. the
    /// slot is shorter than the airtime it has to hold.
    pub clamped: bool,
}

/// Estimates every pattern's busy probability, portion and density.
///
/// `pu_labels` gives the pattern of each PU in increasing PU-id order.
/// Packets per slot are the summed gaps of a PU over the pattern's mean
/// gap, averaged over the pattern's PUs. With `slot = None` each pattern
/// uses the mean observed span of its PUs, which reduces the busy
/// probability to mean airtime over mean interarrival.
pub fn estimate_network_params(
    pu_labels: &[usize],
    records: &[TraceRecord],
    slot: Option<f64>,
    link_rate: f64,
    zeta: f64,
) -> Result<Vec<TrafficPattern>> {
    if let Some(t) = slot {
        if !(t > 0.0) {
            return Err(domain(format!("slot length must be positive, got {t}")));
        }
    }
    if !(link_rate > 0.0) {
        return Err(domain(format!(
            "link rate must be positive, got {link_rate}"
        )));
    }
    if !(zeta >= 0.0) {
        return Err(domain(format!("density must be non-negative, got {zeta}")));
    }
    let groups = group_by_pu(records);
    if groups.len() != pu_labels.len() {
        return Err(domain(format!(
            "{} labels for {} PUs",
            pu_labels.len(),
            groups.len()
        )));
    }
    let mut members: BTreeMap<usize, Vec<u32>> = BTreeMap::new();
    for (pu, label) in groups.keys().zip(pu_labels) {
        members.entry(*label).or_default().push(*pu);
    }
    let total_pus = groups.len() as f64;
    let mut out = Vec::with_capacity(members.len());
    for (id, pus) in members {
        let mut gap_sum = 0.0;
        let mut gaps = 0usize;
        let mut length_sum = 0.0;
        let mut packets = 0usize;
        for pu in &pus {
            let p = &groups[pu];
            length_sum += p.iter().map(|r| r.length).sum::<f64>();
            packets += p.len();
            if p.len() > 1 {
                gap_sum += p[p.len() - 1].timestamp - p[0].timestamp;
                gaps += p.len() - 1;
            }
        }
        let mean_interarrival = if gaps > 0 { gap_sum / gaps as f64 } else { 0.0 };
        if !(mean_interarrival > 0.0) {
            return Err(domain(format!("pattern {id} has zero mean interarrival")));
        }
        let n_k = pus.len() as f64;
        let arrivals = gap_sum / mean_interarrival / n_k;
        let slot = slot.unwrap_or(gap_sum / n_k);
        let mean_airtime = 8.0 * length_sum / packets as f64 / link_rate;
        let raw = arrivals * mean_airtime / slot;
        let portion = n_k / total_pus;
        out.push(TrafficPattern {
            id,
            p_b: raw.clamp(0.0, 1.0),
            zeta_k: portion * zeta,
            portion,
            mean_airtime,
            mean_interarrival,
            member_pus: pus,
            clamped: raw > 1.0,
        });
    }
    Ok(out)
}
