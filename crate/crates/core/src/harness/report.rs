//! Summary tables over hourly metrics.

use std::collections::BTreeMap;

use crate::allocator::{Algorithm, SlotMetrics};
use crate::model::SlotIndex;

use super::GridMetrics;

/// Sums and hourly means of one `(delay, diss, algorithm)` series.
#[derive(Clone, Debug, PartialEq)]
pub struct TotalsRow {
    pub delay: f64,
    pub diss: f64,
    pub algorithm: Algorithm,
    pub hours: usize,
    pub total_cost: f64,
    pub mean_latency_ms: f64,
    pub mean_hit_pct: f64,
    pub mean_on_demand_pct: f64,
    pub mean_diss_pct: f64,
    pub unserved: u64,
}

/// Per-slot cost comparison. A flag is `None` when either side is missing.
#[derive(Clone, Debug, PartialEq)]
pub struct OrderingRow {
    pub delay: f64,
    pub diss: f64,
    pub slot: SlotIndex,
    pub gnca_le_gca: Option<bool>,
    pub gca_le_gmc: Option<bool>,
}

/// Total cost of GNCA relative to GMC.
#[derive(Clone, Debug, PartialEq)]
pub struct GainRow {
    pub delay: f64,
    pub diss: f64,
    pub gnca_cost: f64,
    pub gmc_cost: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Report {
    /// Hourly rows per `(delay, diss, algorithm)`, slot order.
    pub hourly: Vec<(f64, f64, Algorithm, Vec<SlotMetrics<f64>>)>,
    pub totals: Vec<TotalsRow>,
    pub ordering: Vec<OrderingRow>,
    pub gain: Vec<GainRow>,
}

fn mean(rows: &[SlotMetrics<f64>], f: impl Fn(&SlotMetrics<f64>) -> f64) -> f64 {
    if rows.is_empty() {
        0.0
    } else {
        rows.iter().map(f).sum::<f64>() / rows.len() as f64
    }
}

pub fn emit_report(grid: &[GridMetrics]) -> Report {
    let mut report = Report::default();
    for point in grid {
        let mut by_alg: BTreeMap<Algorithm, Vec<SlotMetrics<f64>>> = BTreeMap::new();
        for row in &point.rows {
            by_alg.entry(row.algorithm).or_default().push(row.clone());
        }
        for rows in by_alg.values_mut() {
            rows.sort_by_key(|r| r.slot);
        }
        let cost_at = |alg: Algorithm| -> BTreeMap<SlotIndex, f64> {
            by_alg
                .get(&alg)
                .map(|rows| rows.iter().map(|r| (r.slot, r.total_cost)).collect())
                .unwrap_or_default()
        };
        let (gnca, gca, gmc) = (cost_at(Algorithm::Gnca), cost_at(Algorithm::Gca), cost_at(Algorithm::Gmc));
        let slots: std::collections::BTreeSet<SlotIndex> = point.rows.iter().map(|r| r.slot).collect();
        for slot in slots {
            let le = |a: &BTreeMap<SlotIndex, f64>, b: &BTreeMap<SlotIndex, f64>| {
                Some(a.get(&slot)? <= b.get(&slot)?)
            };
            report.ordering.push(OrderingRow {
                delay: point.delay,
                diss: point.diss,
                slot,
                gnca_le_gca: le(&gnca, &gca),
                gca_le_gmc: le(&gca, &gmc),
            });
        }
        for (&alg, rows) in &by_alg {
            report.totals.push(TotalsRow {
                delay: point.delay,
                diss: point.diss,
                algorithm: alg,
                hours: rows.len(),
                total_cost: rows.iter().map(|r| r.total_cost).sum(),
                mean_latency_ms: mean(rows, |r| r.avg_latency_ms),
                mean_hit_pct: mean(rows, |r| r.hit_pct),
                mean_on_demand_pct: mean(rows, |r| r.on_demand_pct),
                mean_diss_pct: mean(rows, |r| r.diss_pct),
                unserved: rows.iter().map(|r| r.unserved).sum(),
            });
        }
        if !gnca.is_empty() && !gmc.is_empty() {
            let gnca_cost: f64 = gnca.values().sum();
            let gmc_cost: f64 = gmc.values().sum();
            report.gain.push(GainRow {
                delay: point.delay,
                diss: point.diss,
                gnca_cost,
                gmc_cost,
                ratio: if gmc_cost > 0.0 { gnca_cost / gmc_cost } else { f64::NAN },
            });
        }
        for (alg, rows) in by_alg {
            report.hourly.push((point.delay, point.diss, alg, rows));
        }
    }
    report
}

impl Report {
    pub fn totals_for(&self, delay: f64, diss: f64, alg: Algorithm) -> Option<&TotalsRow> {
        self.totals
            .iter()
            .find(|t| t.delay == delay && t.diss == diss && t.algorithm == alg)
    }

    pub fn gain_for(&self, delay: f64, diss: f64) -> Option<&GainRow> {
        self.gain.iter().find(|g| g.delay == delay && g.diss == diss)
    }
}
