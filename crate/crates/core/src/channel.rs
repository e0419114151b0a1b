//! Path loss, fading, SINR, rate and time-load computations.

use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::{GridLayout, Point};

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    db_to_linear(dbm - 30.0)
}

/// Simplified street-canyon path loss.
///
/// LOS follows a free-space-form law anchored at `ref_loss_db` at
/// `ref_distance`; NLOS adds `corner_loss_db` per street corner on top of
/// the LOS loss evaluated over the routed (Manhattan) length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathLossModel {
    pub ref_loss_db: f64,
    pub ref_distance: f64,
    pub corner_loss_db: f64,
    pub min_distance: f64,
}

impl Default for PathLossModel {
    fn default() -> Self {
        PathLossModel {
            ref_loss_db: 43.0,
            ref_distance: 100.0,
            corner_loss_db: 15.0,
            min_distance: 1.0,
        }
    }
}

impl PathLossModel {
    pub fn los_db(&self, distance: f64) -> f64 {
        let d = distance.max(self.min_distance);
        self.ref_loss_db + 20.0 * (d / self.ref_distance).log10()
    }

    pub fn routed_db(&self, route_length: f64, corners: u32) -> f64 {
        self.los_db(route_length) + self.corner_loss_db * corners as f64
    }

    /// Linear gain between two points in the plane. NLOS assumes a single
    /// corner on the L-shaped route between them.
    pub fn pathloss(&self, tx: Point, rx: Point, los: bool) -> f64 {
        let d = rx - tx;
        let db = if los {
            self.los_db(d.norm())
        } else {
            self.routed_db(d.x.abs() + d.y.abs(), 1)
        };
        db_to_linear(-db)
    }

    /// Loss in dB between two points on the periodic grid.
    pub fn grid_loss_db(&self, grid: &GridLayout, tx: Point, rx: Point) -> f64 {
        match grid.corner_count(tx, rx) {
            0 => self.los_db(grid.distance(tx, rx)),
            c => self.routed_db(grid.route_length(tx, rx), c),
        }
    }

    pub fn grid_gain(&self, grid: &GridLayout, tx: Point, rx: Point) -> f64 {
        db_to_linear(-self.grid_loss_db(grid, tx, rx))
    }
}

/// Unit-mean exponential power gain (Rayleigh amplitude).
pub fn sample_fading<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(Exp1)
}

/// Radio constants shared by every link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadioParams {
    pub bandwidth_hz: f64,
    pub noise_density_dbm_hz: f64,
    pub tx_power_dbm: f64,
    pub target_sinr_db: f64,
    /// Ceiling applied to time loads before averaging and in utilities.
    pub rho_cap: f64,
}

impl Default for RadioParams {
    fn default() -> Self {
        RadioParams {
            bandwidth_hz: 180e3,
            noise_density_dbm_hz: -174.0,
            tx_power_dbm: 10.0,
            target_sinr_db: 3.0,
            rho_cap: 1.0,
        }
    }
}

impl RadioParams {
    pub fn tx_power_w(&self) -> f64 {
        dbm_to_watts(self.tx_power_dbm)
    }

    /// Noise power over one RB: `N0 * bandwidth`.
    pub fn noise_w(&self) -> f64 {
        dbm_to_watts(self.noise_density_dbm_hz) * self.bandwidth_hz
    }

    pub fn target_sinr(&self) -> f64 {
        db_to_linear(self.target_sinr_db)
    }
}

/// `signal / (sum(interference) + noise)`, all in watts.
pub fn sinr(signal: f64, interference: impl IntoIterator<Item = f64>, noise: f64) -> f64 {
    let i: f64 = interference.into_iter().sum();
    signal / (i + noise)
}

pub fn rate(bandwidth_hz: f64, sinr: f64) -> f64 {
    bandwidth_hz * (1.0 + sinr).log2()
}

/// Offered traffic in bit/s.
pub fn traffic_influx(arrival_rate: f64, packet_bits: f64) -> f64 {
    arrival_rate * packet_bits
}

/// Fraction of a slot needed to serve `influx` at `rate`; `+inf` when the rate is zero.
pub fn time_load(influx: f64, rate: f64) -> f64 {
    if rate > 0.0 {
        influx / rate
    } else if influx > 0.0 {
        f64::INFINITY
    } else {
        0.0
    }
}

/// `rho in (0, 1)` marks a successful transmission.
pub fn is_successful(rho: f64) -> bool {
    rho > 0.0 && rho < 1.0
}

/// Mean of per-RB loads after clamping each at `cap`.
pub fn slot_load(per_rb: &[f64], cap: f64) -> f64 {
    if per_rb.is_empty() {
        return 0.0;
    }
    per_rb.iter().map(|r| r.min(cap)).sum::<f64>() / per_rb.len() as f64
}

/// Window average of per-slot loads, each clamped at `cap` first.
pub fn expected_time_load(history: &[f64], cap: f64) -> Result<f64> {
    if history.is_empty() {
        return Err(Error::input("expected time load needs a non-empty window"));
    }
    Ok(history.iter().map(|r| r.min(cap)).sum::<f64>() / history.len() as f64)
}

/// Linear power gains `h[n][tx][rx]`: transmitter of pair `tx` to receiver of
/// pair `rx` on RB `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainTensor {
    rbs: usize,
    pairs: usize,
    data: Vec<f64>,
}

impl GainTensor {
    pub fn zeros(rbs: usize, pairs: usize) -> Self {
        GainTensor {
            rbs,
            pairs,
            data: vec![0.0; rbs * pairs * pairs],
        }
    }

    pub fn rbs(&self) -> usize {
        self.rbs
    }

    pub fn pairs(&self) -> usize {
        self.pairs
    }

    #[inline]
    fn idx(&self, n: usize, tx: usize, rx: usize) -> usize {
        (n * self.pairs + tx) * self.pairs + rx
    }

    #[inline]
    pub fn get(&self, n: usize, tx: usize, rx: usize) -> f64 {
        self.data[self.idx(n, tx, rx)]
    }

    #[inline]
    pub fn set(&mut self, n: usize, tx: usize, rx: usize, v: f64) {
        let i = self.idx(n, tx, rx);
        self.data[i] = v;
    }

    pub fn add_assign(&mut self, other: &GainTensor) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn scale(&mut self, s: f64) {
        for a in &mut self.data {
            *a *= s;
        }
    }
}

/// Gains plus the power/noise constants needed to evaluate SINR.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelState {
    pub gains: GainTensor,
    pub tx_power_w: f64,
    pub noise_w: f64,
    pub bandwidth_hz: f64,
}

impl ChannelState {
    pub fn new(gains: GainTensor, radio: &RadioParams) -> Self {
        ChannelState {
            gains,
            tx_power_w: radio.tx_power_w(),
            noise_w: radio.noise_w(),
            bandwidth_hz: radio.bandwidth_hz,
        }
    }

    /// SINR of pair `k` on RB `n` with `cochannel` transmitting on the same RB.
    /// Entries equal to `k` are ignored.
    pub fn sinr(&self, k: usize, n: usize, cochannel: impl IntoIterator<Item = usize>) -> f64 {
        let signal = self.tx_power_w * self.gains.get(n, k, k);
        let interference = cochannel
            .into_iter()
            .filter(|&j| j != k)
            .map(|j| self.tx_power_w * self.gains.get(n, j, k));
        sinr(signal, interference, self.noise_w)
    }

    pub fn rate(&self, sinr_value: f64) -> f64 {
        rate(self.bandwidth_hz, sinr_value)
    }
}
