//! Reference scheme: fixed equal-area zones, load-proportional RB pools,
//! and at most one pair per RB inside a zone.

use serde::{Deserialize, Serialize};

use crate::allocation::{Matching, ZoneAllocation};
use crate::clustering::ZonePartition;
use crate::error::{Error, Result};
use crate::scenario::{Point, Rect};

/// Tile index of `x` among `count` equal strips of `[min, max)`. A point on
/// a shared edge belongs to the lower tile.
fn strip_index(x: f64, min: f64, width: f64, count: usize) -> usize {
    let t = ((x - min) / width).ceil() as isize - 1;
    t.clamp(0, count as isize - 1) as usize
}

/// Zones from `zone_count` vertical strips of equal area over `bounds`.
/// Pairs are placed by their (transmitter) position; empty strips are
/// dropped. Returns the partition and the strip index of each zone.
pub fn fixed_zone_partition(
    positions: &[Point],
    bounds: &Rect,
    zone_count: usize,
) -> Result<(ZonePartition, Vec<usize>)> {
    if zone_count == 0 {
        return Err(Error::config("baseline-zones", "need at least one zone"));
    }
    let width = bounds.width() / zone_count as f64;
    let strips: Vec<usize> = positions
        .iter()
        .map(|p| strip_index(p.x, bounds.min.x, width, zone_count))
        .collect();
    let partition = ZonePartition::from_labels(&strips);
    let tiles = partition.zones.iter().map(|z| strips[z[0]]).collect();
    Ok((partition, tiles))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineAllocation {
    pub pools: ZoneAllocation,
    pub matching: Matching,
}

impl BaselineAllocation {
    pub fn served(&self) -> usize {
        self.matching.assignment.iter().filter(|a| a.is_some()).count()
    }
}

/// Splits `n` RBs over the zones by largest remainder on summed pair loads,
/// then hands each zone's RBs out one per pair in descending-load order
/// (ties by pair id). Pairs left over stay unserved.
pub fn baseline_allocate(partition: &ZonePartition, pair_loads: &[f64], n: usize) -> Result<BaselineAllocation> {
    if pair_loads.len() != partition.pairs() {
        return Err(Error::input("one load per pair required"));
    }
    let zone_loads: Vec<f64> = partition
        .zones
        .iter()
        .map(|z| z.iter().map(|&k| pair_loads[k]).sum())
        .collect();
    let pools = ZoneAllocation::apportion(&zone_loads, n)?;
    let mut matching = Matching::unassigned(partition.pairs());
    for (members, pool) in partition.zones.iter().zip(&pools.rbs) {
        let mut order = members.clone();
        order.sort_by(|&a, &b| pair_loads[b].total_cmp(&pair_loads[a]).then(a.cmp(&b)));
        for (&k, &rb) in order.iter().zip(pool) {
            matching.assignment[k] = Some(rb);
        }
    }
    Ok(BaselineAllocation { pools, matching })
}
