//! Slot-by-slot simulation of both schemes on one shared mobility and
//! fading trace.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::allocation::{solve_zone_matching, ChannelSnapshot, Matching, ZoneAllocation, ZoneGame};
use crate::baseline::{baseline_allocate, fixed_zone_partition};
use crate::channel::{
    expected_time_load, sample_fading, slot_load, time_load, traffic_influx, ChannelState, GainTensor,
};
use crate::clustering::{pairwise_distances, spectral_zones, SimilarityMatrices, ZonePartition};
use crate::config::SimConfig;
use crate::error::Result;
use crate::metrics::{BaselineWindow, MetricsLog, SchemeTrace, WindowMatrices, WindowRecord, ZoneRecord};
use crate::scenario::{build_manhattan_grid, place_pairs, step_mobility, Fleet, GridLayout, Point};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Keep the similarity matrices of every window in the log.
    pub keep_matrices: bool,
}

mod stream {
    pub const PLACEMENT: u64 = 1;
    pub const MOBILITY: u64 = 2;
    pub const FADING: u64 = 3;
    pub const TRAFFIC: u64 = 4;
    pub const CLUSTERING: u64 = 5;
    pub const MATCHING: u64 = 6;
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn run(cfg: &SimConfig) -> Result<MetricsLog> {
    run_with(cfg, RunOptions::default())
}

pub fn run_with(cfg: &SimConfig, opts: RunOptions) -> Result<MetricsLog> {
    cfg.validate()?;
    Engine::new(cfg, opts)?.run()
}

/// Running sums over the current window.
struct WindowAccumulator {
    gains: GainTensor,
    tx: Vec<Point>,
    rx: Vec<Point>,
    histories: Vec<Vec<f64>>,
    slots: usize,
}

impl WindowAccumulator {
    fn new(rbs: usize, pairs: usize) -> Self {
        WindowAccumulator {
            gains: GainTensor::zeros(rbs, pairs),
            tx: vec![Point::new(0.0, 0.0); pairs],
            rx: vec![Point::new(0.0, 0.0); pairs],
            histories: vec![Vec::new(); pairs],
            slots: 0,
        }
    }
}

struct Engine<'a> {
    cfg: &'a SimConfig,
    opts: RunOptions,
    grid: GridLayout,
    fleet: Fleet,
    influx: Vec<f64>,
    rng_mobility: ChaCha8Rng,
    rng_fading: ChaCha8Rng,
    rng_traffic: ChaCha8Rng,
    rng_clustering: ChaCha8Rng,
    rng_matching: ChaCha8Rng,
    proposed: Matching,
    baseline: Matching,
    log: MetricsLog,
}

impl<'a> Engine<'a> {
    fn new(cfg: &'a SimConfig, opts: RunOptions) -> Result<Self> {
        let grid = build_manhattan_grid(&cfg.grid)?;
        let mut rng_placement = rng_for(cfg.seed, stream::PLACEMENT);
        let fleet = place_pairs(
            &grid,
            cfg.vue_pairs,
            &cfg.placement(),
            cfg.packet_bits(),
            &mut rng_placement,
        )?;
        let k = cfg.vue_pairs;
        let log = MetricsLog {
            vue_pairs: k,
            rbs: cfg.rbs,
            seed: cfg.seed,
            slots: cfg.slots(),
            target_sinr: cfg.radio.target_sinr(),
            proposed: SchemeTrace::default(),
            baseline: SchemeTrace::default(),
            windows: Vec::new(),
            baseline_windows: Vec::new(),
            matrices: Vec::new(),
        };
        let mut engine = Engine {
            cfg,
            opts,
            grid,
            fleet,
            influx: vec![0.0; k],
            rng_mobility: rng_for(cfg.seed, stream::MOBILITY),
            rng_fading: rng_for(cfg.seed, stream::FADING),
            rng_traffic: rng_for(cfg.seed, stream::TRAFFIC),
            rng_clustering: rng_for(cfg.seed, stream::CLUSTERING),
            rng_matching: rng_for(cfg.seed, stream::MATCHING),
            proposed: Matching::unassigned(k),
            baseline: Matching::unassigned(k),
            log,
        };
        engine.draw_traffic();
        if cfg.scheme.includes_proposed() {
            for a in engine.proposed.assignment.iter_mut() {
                *a = Some(engine.rng_matching.gen_range(0..cfg.rbs));
            }
        }
        if cfg.scheme.includes_baseline() {
            let tx: Vec<Point> = (0..k).map(|i| engine.fleet.tx_position(i)).collect();
            engine.reassign_baseline(&tx, 0)?;
        }
        Ok(engine)
    }

    fn draw_traffic(&mut self) {
        let bits = self.cfg.packet_bits();
        for (pair, phi) in self.fleet.pairs.iter_mut().zip(self.influx.iter_mut()) {
            pair.arrival_rate = self.rng_traffic.gen_range(self.cfg.arrival_min..=self.cfg.arrival_max);
            *phi = traffic_influx(pair.arrival_rate, bits);
        }
    }

    fn run(mut self) -> Result<MetricsLog> {
        let (k, n, t_win) = (self.cfg.vue_pairs, self.cfg.rbs, self.cfg.window_slots);
        let mut acc = WindowAccumulator::new(n, k);
        for t in 1..=self.cfg.slots() {
            step_mobility(
                &mut self.fleet.vehicles,
                &self.grid,
                self.cfg.slot_s,
                &self.cfg.turns,
                &mut self.rng_mobility,
            );
            let gains = self.sample_gains();
            let channel = ChannelState::new(gains, &self.cfg.radio);

            if self.cfg.scheme.includes_proposed() {
                let (trace, loads) = self.observe_proposed(&channel);
                for (h, l) in acc.histories.iter_mut().zip(loads) {
                    h.push(l);
                }
                push_trace(&mut self.log.proposed, trace);
            }
            if self.cfg.scheme.includes_baseline() {
                let trace = self.observe(&channel, &self.baseline);
                push_trace(&mut self.log.baseline, trace);
            }

            acc.gains.add_assign(&channel.gains);
            for i in 0..k {
                let p = &self.fleet.pairs[i];
                acc.tx[i] = acc.tx[i] + self.fleet.vehicles[p.tx].odometer;
                acc.rx[i] = acc.rx[i] + self.fleet.vehicles[p.rx].odometer;
            }
            acc.slots += 1;

            if t % t_win == 0 {
                self.end_window(t, &mut acc)?;
                acc = WindowAccumulator::new(n, k);
            }
        }
        Ok(self.log)
    }

    /// Path gain times an independent Exp(1) fading draw for every RB and
    /// every transmitter/receiver combination.
    fn sample_gains(&mut self) -> GainTensor {
        let (k, n) = (self.cfg.vue_pairs, self.cfg.rbs);
        let tx: Vec<Point> = (0..k).map(|i| self.fleet.tx_position(i)).collect();
        let rx: Vec<Point> = (0..k).map(|i| self.fleet.rx_position(i)).collect();
        let grid = &self.grid;
        let model = &self.cfg.pathloss;
        let path: Vec<Vec<f64>> = tx
            .par_iter()
            .map(|&a| rx.iter().map(|&b| model.grid_gain(grid, a, b)).collect())
            .collect();
        let mut gains = GainTensor::zeros(n, k);
        for rb in 0..n {
            for (j, row) in path.iter().enumerate() {
                for (i, &g) in row.iter().enumerate() {
                    gains.set(rb, j, i, g * sample_fading(&mut self.rng_fading));
                }
            }
        }
        gains
    }

    /// SINR, own-RB load and satisfaction of every pair under `matching`.
    fn observe(&self, channel: &ChannelState, matching: &Matching) -> SlotTrace {
        let k = self.cfg.vue_pairs;
        let target = self.cfg.radio.target_sinr();
        let cap = self.cfg.radio.rho_cap;
        let mut out = SlotTrace::with_capacity(k);
        for i in 0..k {
            match matching.assignment[i] {
                Some(rb) => {
                    let g = channel.sinr(i, rb, matching.cochannel(rb));
                    let rho = time_load(self.influx[i], channel.rate(g)).min(cap);
                    out.push(g, rho, g >= target);
                }
                None => out.push(0.0, cap, false),
            }
        }
        out
    }

    /// Observations under the proposed matching plus each pair's slot load,
    /// the RB average of its clamped loads against the current occupants.
    fn observe_proposed(&self, channel: &ChannelState) -> (SlotTrace, Vec<f64>) {
        let (k, n) = (self.cfg.vue_pairs, self.cfg.rbs);
        let cap = self.cfg.radio.rho_cap;
        let p = channel.tx_power_w;
        let mut occupied = vec![vec![0.0; k]; n];
        for (j, a) in self.proposed.assignment.iter().enumerate() {
            if let Some(rb) = *a {
                for (i, acc) in occupied[rb].iter_mut().enumerate() {
                    *acc += p * channel.gains.get(rb, j, i);
                }
            }
        }
        let loads = (0..k)
            .map(|i| {
                let per_rb: Vec<f64> = (0..n)
                    .map(|rb| {
                        let own = p * channel.gains.get(rb, i, i);
                        let mut interference = occupied[rb][i];
                        if self.proposed.assignment[i] == Some(rb) {
                            interference -= own;
                        }
                        let g = own / (interference.max(0.0) + channel.noise_w);
                        time_load(self.influx[i], channel.rate(g))
                    })
                    .collect();
                slot_load(&per_rb, cap)
            })
            .collect();
        (self.observe(channel, &self.proposed), loads)
    }

    fn end_window(&mut self, t: usize, acc: &mut WindowAccumulator) -> Result<()> {
        let k = self.cfg.vue_pairs;
        let inv = 1.0 / acc.slots as f64;
        let tx: Vec<Point> = acc.tx.iter().map(|&p| self.grid.wrap(p * inv)).collect();
        let rx: Vec<Point> = acc.rx.iter().map(|&p| self.grid.wrap(p * inv)).collect();

        if self.cfg.scheme.includes_proposed() {
            let mid: Vec<Point> = tx
                .iter()
                .zip(&rx)
                .map(|(&a, &b)| self.grid.wrap(a + self.grid.min_image_delta(a, b) * 0.5))
                .collect();
            let mut gains = acc.gains.clone();
            gains.scale(inv);
            let histories = std::mem::take(&mut acc.histories);
            self.form_zones(t, &mid, &histories, gains)?;
        }
        self.draw_traffic();
        if self.cfg.scheme.includes_baseline() {
            self.reassign_baseline(&tx, t)?;
        }
        debug_assert_eq!(self.proposed.assignment.len(), k);
        Ok(())
    }

    fn form_zones(&mut self, t: usize, mid: &[Point], histories: &[Vec<f64>], gains: GainTensor) -> Result<()> {
        let cfg = self.cfg;
        let (k, n) = (cfg.vue_pairs, cfg.rbs);
        let grid = &self.grid;
        let distances = pairwise_distances(mid, |a, b| grid.distance(a, b));
        let sims = SimilarityMatrices::build(&distances, histories, cfg.sigma_d, cfg.epsilon_d, cfg.theta)?;
        let b_max = (k / 2).min(n).max(cfg.b_min);
        let spectral = spectral_zones(&sims.affinity, cfg.b_min, b_max, &mut self.rng_clustering)?;
        let mut partition = spectral.partition;
        if partition.count() > n {
            let labels: Vec<usize> = partition.labels.iter().map(|&z| z % n).collect();
            partition = ZonePartition::from_labels(&labels);
        }

        let pair_load: Vec<f64> = histories
            .iter()
            .map(|h| expected_time_load(h, cfg.radio.rho_cap))
            .collect::<Result<_>>()?;
        let zone_load: Vec<f64> = partition
            .zones
            .iter()
            .map(|z| z.iter().map(|&i| pair_load[i]).sum())
            .collect();
        let alloc = ZoneAllocation::apportion(&zone_load, n)?;

        let snapshot = ChannelSnapshot {
            channel: ChannelState::new(gains, &cfg.radio),
            influx: self.influx.clone(),
            target_sinr: cfg.radio.target_sinr(),
            rho_cap: cfg.radio.rho_cap,
        };
        let seeds: Vec<u64> = partition.zones.iter().map(|_| self.rng_matching.gen()).collect();
        let outcomes = partition
            .zones
            .par_iter()
            .zip(alloc.rbs.par_iter())
            .zip(seeds.par_iter())
            .map(|((members, rbs), &seed)| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let game = ZoneGame::new(members, rbs, &snapshot, cfg.weights);
                let initial = game.balanced_random_assignment(&mut rng);
                let out = solve_zone_matching(&game, initial, &cfg.matching, &mut rng)?;
                let score = game.score(&out.assign);
                Ok((out, score))
            })
            .collect::<Result<Vec<_>>>()?;

        let mut zones = Vec::with_capacity(outcomes.len());
        for ((members, rbs), (out, score)) in partition.zones.iter().zip(&alloc.rbs).zip(outcomes) {
            for (&i, &rb) in members.iter().zip(&out.assign) {
                self.proposed.assignment[i] = Some(rb);
            }
            zones.push(ZoneRecord {
                members: members.clone(),
                rbs: rbs.clone(),
                swaps: out.swaps,
                evaluations: out.evaluations,
                converged: out.converged,
                satisfied: score.satisfied,
                cost: score.cost,
            });
        }
        debug_assert!(self.proposed.respects(&partition.zones, &alloc));

        let index = self.log.windows.len();
        if self.opts.keep_matrices {
            self.log.matrices.push(WindowMatrices {
                index,
                distance: distances,
                load: sims.load,
                affinity: sims.affinity,
                eigenvalues: spectral.eigenvalues.clone(),
            });
        }
        self.log.windows.push(WindowRecord {
            index,
            slot: t,
            partition,
            eigenvalues: spectral.eigenvalues,
            zones,
        });
        Ok(())
    }

    /// Re-tiles the baseline by transmitter position and re-splits its pools
    /// on the offered traffic.
    fn reassign_baseline(&mut self, tx: &[Point], t: usize) -> Result<()> {
        let (partition, _) = fixed_zone_partition(tx, &self.grid.bounds, self.cfg.baseline_zones)?;
        let alloc = baseline_allocate(&partition, &self.influx, self.cfg.rbs)?;
        self.log.baseline_windows.push(BaselineWindow {
            slot: t,
            served: alloc.served(),
            partition,
        });
        self.baseline = alloc.matching;
        Ok(())
    }
}

struct SlotTrace {
    sinr: Vec<f64>,
    load: Vec<f64>,
    satisfied: Vec<bool>,
}

impl SlotTrace {
    fn with_capacity(k: usize) -> Self {
        SlotTrace {
            sinr: Vec::with_capacity(k),
            load: Vec::with_capacity(k),
            satisfied: Vec::with_capacity(k),
        }
    }

    fn push(&mut self, sinr: f64, load: f64, satisfied: bool) {
        self.sinr.push(sinr);
        self.load.push(load);
        self.satisfied.push(satisfied);
    }
}

fn push_trace(trace: &mut SchemeTrace, slot: SlotTrace) {
    trace.sinr.push(slot.sinr);
    trace.load.push(slot.load);
    trace.satisfied.push(slot.satisfied);
}
