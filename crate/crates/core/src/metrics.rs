//! Run records and their summaries.

use serde::{Deserialize, Serialize};

use crate::channel::linear_to_db;
use crate::clustering::ZonePartition;
use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// dB value reported for pairs without an RB (SINR of zero).
pub const SINR_FLOOR_DB: f64 = -100.0;

pub fn sinr_db(sinr: f64) -> f64 {
    if sinr > 0.0 {
        linear_to_db(sinr).max(SINR_FLOOR_DB)
    } else {
        SINR_FLOOR_DB
    }
}

/// Per-slot, per-pair observations for one scheme.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SchemeTrace {
    /// Linear SINR on the pair's RB, 0 when unserved. Indexed `[slot][pair]`.
    pub sinr: Vec<Vec<f64>>,
    /// Time load on the pair's RB (clamped), indexed `[slot][pair]`.
    pub load: Vec<Vec<f64>>,
    pub satisfied: Vec<Vec<bool>>,
}

impl SchemeTrace {
    pub fn is_empty(&self) -> bool {
        self.sinr.is_empty()
    }

    pub fn sinr_db_samples(&self) -> Vec<f64> {
        self.sinr.iter().flatten().map(|&s| sinr_db(s)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZoneRecord {
    pub members: Vec<usize>,
    pub rbs: Vec<usize>,
    pub swaps: usize,
    pub evaluations: usize,
    pub converged: bool,
    /// Satisfied pairs under the converged matching, on the window snapshot.
    pub satisfied: usize,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowRecord {
    pub index: usize,
    /// Slot at whose end the zones were formed.
    pub slot: usize,
    pub partition: ZonePartition,
    pub eigenvalues: Vec<f64>,
    pub zones: Vec<ZoneRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineWindow {
    pub slot: usize,
    pub partition: ZonePartition,
    pub served: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowMatrices {
    pub index: usize,
    pub distance: Matrix,
    pub load: Matrix,
    pub affinity: Matrix,
    pub eigenvalues: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsLog {
    pub vue_pairs: usize,
    pub rbs: usize,
    pub seed: u64,
    pub slots: usize,
    pub target_sinr: f64,
    pub proposed: SchemeTrace,
    pub baseline: SchemeTrace,
    pub windows: Vec<WindowRecord>,
    pub baseline_windows: Vec<BaselineWindow>,
    pub matrices: Vec<WindowMatrices>,
}

/// Percentile with linear interpolation between order statistics
/// (rank `p/100 * (n-1)`).
pub fn percentile(samples: &[f64], p: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::input("percentile of an empty sample"));
    }
    if !(0.0..=100.0).contains(&p) {
        return Err(Error::input("percentile must lie in [0, 100]"));
    }
    let mut v = samples.to_vec();
    let rank = p / 100.0 * (v.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let frac = rank - lo as f64;
    let (_, lo_val, upper) = v.select_nth_unstable_by(lo, f64::total_cmp);
    let lo_val = *lo_val;
    if frac == 0.0 || upper.is_empty() {
        return Ok(lo_val);
    }
    let hi_val = upper.iter().copied().min_by(f64::total_cmp).expect("non-empty");
    Ok(lo_val + frac * (hi_val - lo_val))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub scheme: String,
    pub vue_pairs: usize,
    pub rbs: usize,
    pub seed: u64,
    /// Percentage of pair-slots at or above the SINR target.
    pub satisfaction_pct: f64,
    /// Fraction of pair-slots below the SINR target.
    pub outage: f64,
    pub sinr_p25_db: f64,
    pub sinr_p50_db: f64,
    pub sinr_p75_db: f64,
    pub mean_swaps_per_zone: f64,
    pub mean_zones: f64,
    pub unconverged_zones: usize,
}

fn trace_summary(
    scheme: &str,
    log: &MetricsLog,
    trace: &SchemeTrace,
    mean_swaps: f64,
    mean_zones: f64,
    unconverged: usize,
) -> Result<Summary> {
    let total: usize = trace.satisfied.iter().map(Vec::len).sum();
    if total == 0 {
        return Err(Error::input("no samples to summarise"));
    }
    let ok: usize = trace.satisfied.iter().flatten().filter(|&&s| s).count();
    let samples = trace.sinr_db_samples();
    Ok(Summary {
        scheme: scheme.to_string(),
        vue_pairs: log.vue_pairs,
        rbs: log.rbs,
        seed: log.seed,
        satisfaction_pct: 100.0 * ok as f64 / total as f64,
        outage: (total - ok) as f64 / total as f64,
        sinr_p25_db: percentile(&samples, 25.0)?,
        sinr_p50_db: percentile(&samples, 50.0)?,
        sinr_p75_db: percentile(&samples, 75.0)?,
        mean_swaps_per_zone: mean_swaps,
        mean_zones,
        unconverged_zones: unconverged,
    })
}

/// One summary per scheme present in the log (proposed first).
pub fn summarize(log: &MetricsLog) -> Result<Vec<Summary>> {
    let mut out = Vec::new();
    if !log.proposed.is_empty() {
        let zones: Vec<&ZoneRecord> = log.windows.iter().flat_map(|w| &w.zones).collect();
        let mean_swaps = if zones.is_empty() {
            0.0
        } else {
            zones.iter().map(|z| z.swaps as f64).sum::<f64>() / zones.len() as f64
        };
        let mean_zones = if log.windows.is_empty() {
            1.0
        } else {
            log.windows.iter().map(|w| w.zones.len() as f64).sum::<f64>() / log.windows.len() as f64
        };
        let unconverged = zones.iter().filter(|z| !z.converged).count();
        out.push(trace_summary(
            "proposed",
            log,
            &log.proposed,
            mean_swaps,
            mean_zones,
            unconverged,
        )?);
    }
    if !log.baseline.is_empty() {
        let mean_zones = if log.baseline_windows.is_empty() {
            0.0
        } else {
            log.baseline_windows
                .iter()
                .map(|w| w.partition.count() as f64)
                .sum::<f64>()
                / log.baseline_windows.len() as f64
        };
        out.push(trace_summary("baseline", log, &log.baseline, 0.0, mean_zones, 0)?);
    }
    if out.is_empty() {
        return Err(Error::input("metrics log holds no scheme traces"));
    }
    Ok(out)
}
