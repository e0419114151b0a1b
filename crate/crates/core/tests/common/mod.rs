#![allow(dead_code)]

use rand::Rng;

use v2v_alloc::allocation::{ChannelSnapshot, CostWeights};
use v2v_alloc::channel::{ChannelState, GainTensor, RadioParams};

/// A random single-zone instance over pairs `0..pairs` and RBs `0..rbs`.
pub struct ZoneInstance {
    pub members: Vec<usize>,
    pub rbs: Vec<usize>,
    pub snapshot: ChannelSnapshot,
    pub weights: CostWeights,
}

pub fn random_zone<R: Rng>(pairs: usize, rbs: usize, rng: &mut R) -> ZoneInstance {
    let radio = RadioParams::default();
    let mut gains = GainTensor::zeros(rbs, pairs);
    for n in 0..rbs {
        for tx in 0..pairs {
            for rx in 0..pairs {
                let loss_db = if tx == rx {
                    rng.gen_range(30.0..110.0)
                } else {
                    rng.gen_range(40.0..120.0)
                };
                gains.set(n, tx, rx, 10f64.powf(-loss_db / 10.0));
            }
        }
    }
    let influx = (0..pairs).map(|_| rng.gen_range(5.0..=25.0) * 12_800.0).collect();
    ZoneInstance {
        members: (0..pairs).collect(),
        rbs: (0..rbs).collect(),
        snapshot: ChannelSnapshot {
            channel: ChannelState::new(gains, &radio),
            influx,
            target_sinr: radio.target_sinr(),
            rho_cap: radio.rho_cap,
        },
        weights: CostWeights::default(),
    }
}

/// Zone utility recomputed from first principles: SINR per member from the
/// raw gains, load `phi / (w log2(1 + sinr))` capped (or the cap when below
/// target), then `-(load^alpha / (S/K)^beta)`.
pub fn oracle_utility(inst: &ZoneInstance, assign: &[usize]) -> f64 {
    let s = &inst.snapshot;
    let ch = &s.channel;
    let mut load = 0.0;
    let mut satisfied = 0usize;
    for (i, &k) in inst.members.iter().enumerate() {
        let n = assign[i];
        let signal = ch.tx_power_w * ch.gains.get(n, k, k);
        let mut interference = 0.0;
        for (j, &other) in inst.members.iter().enumerate() {
            if j != i && assign[j] == n {
                interference += ch.tx_power_w * ch.gains.get(n, other, k);
            }
        }
        let sinr = signal / (interference + ch.noise_w);
        let rate = ch.bandwidth_hz * (1.0 + sinr).log2();
        if sinr >= s.target_sinr && rate > 0.0 {
            satisfied += 1;
            load += (s.influx[k] / rate).min(s.rho_cap);
        } else {
            load += s.rho_cap;
        }
    }
    let w = &inst.weights;
    let cost = if satisfied == 0 {
        w.gamma_cap
    } else {
        load.powf(w.alpha) / (satisfied as f64 / inst.members.len() as f64).powf(w.beta)
    };
    -cost
}

/// Every matching of `pairs` members onto `rbs` RBs, in lexicographic order.
pub fn all_matchings(pairs: usize, rbs: usize) -> impl Iterator<Item = Vec<usize>> {
    let total = rbs.pow(pairs as u32);
    (0..total).map(move |mut code| {
        let mut a = vec![0; pairs];
        for slot in a.iter_mut().rev() {
            *slot = code % rbs;
            code /= rbs;
        }
        a
    })
}
