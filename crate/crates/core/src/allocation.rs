//! RB apportionment across zones and the per-zone swap-matching game.
//!
//! Inside a zone every V-UE pair holds exactly one RB from the zone's pool
//! and several pairs may share an RB. Co-channel interference makes each
//! player's utility depend on the whole matching, so the game is solved by
//! swapping the RBs of two pairs whenever that strictly raises the
//! zone-wide utility `W_z = -Gamma_z`.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::ChannelState;
use crate::error::{Error, Result};

/// Remainders this close are ties.
const REMAINDER_TIE: f64 = 1e-12;

/// Largest-remainder (Hare-Niemeyer) apportionment of `n` RBs by load.
///
/// Every zone receives at least one RB. Remainder ties go to the lower zone
/// index. All-zero loads split evenly with leftovers to the lowest indices.
pub fn hare_niemeyer(loads: &[f64], n: usize) -> Result<Vec<usize>> {
    let zones = loads.len();
    if zones == 0 {
        return Err(Error::input("apportionment needs at least one zone"));
    }
    if n < zones {
        return Err(Error::input(format!("{n} RBs cannot cover {zones} zones")));
    }
    if loads.iter().any(|l| !l.is_finite() || *l < 0.0) {
        return Err(Error::input("zone loads must be finite and non-negative"));
    }
    let total: f64 = loads.iter().sum();
    let quotas: Vec<f64> = if total > 0.0 {
        loads.iter().map(|l| n as f64 * l / total).collect()
    } else {
        vec![n as f64 / zones as f64; zones]
    };

    let mut seats: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let remainders: Vec<f64> = quotas.iter().zip(&seats).map(|(q, s)| q - *s as f64).collect();
    let given: usize = seats.iter().sum();
    let mut bumped = vec![false; zones];
    for _ in given..n {
        let mut best: Option<usize> = None;
        for z in (0..zones).filter(|&z| !bumped[z]) {
            if best.is_none_or(|b| remainders[z] > remainders[b] + REMAINDER_TIE) {
                best = Some(z);
            }
        }
        let z = best.expect("leftover seats are fewer than zones");
        bumped[z] = true;
        seats[z] += 1;
    }

    // Guarantee one RB per zone: take from the zone most over its quota.
    for z in 0..zones {
        if seats[z] == 0 {
            let donor = (0..zones)
                .filter(|&d| seats[d] > 1)
                .max_by(|&a, &b| {
                    let ea = seats[a] as f64 - quotas[a];
                    let eb = seats[b] as f64 - quotas[b];
                    ea.total_cmp(&eb).then(a.cmp(&b))
                })
                .expect("n >= zones leaves a zone with two or more RBs");
            seats[donor] -= 1;
            seats[z] = 1;
        }
    }
    Ok(seats)
}

/// Per-zone RB id sets. Zones get contiguous id ranges in zone order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ZoneAllocation {
    pub rbs: Vec<Vec<usize>>,
}

impl ZoneAllocation {
    pub fn from_quotas(quotas: &[usize]) -> Self {
        let mut next = 0;
        let rbs = quotas
            .iter()
            .map(|&q| {
                let ids = (next..next + q).collect();
                next += q;
                ids
            })
            .collect();
        ZoneAllocation { rbs }
    }

    pub fn apportion(loads: &[f64], n: usize) -> Result<Self> {
        Ok(ZoneAllocation::from_quotas(&hare_niemeyer(loads, n)?))
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.rbs.iter().map(Vec::len).collect()
    }

    pub fn total(&self) -> usize {
        self.rbs.iter().map(Vec::len).sum()
    }
}

/// Network-wide matching: the RB of every pair, `None` when unserved.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Matching {
    pub assignment: Vec<Option<usize>>,
}

impl Matching {
    pub fn unassigned(k: usize) -> Self {
        Matching {
            assignment: vec![None; k],
        }
    }

    /// Pairs transmitting on RB `n`.
    pub fn cochannel(&self, n: usize) -> impl Iterator<Item = usize> + '_ {
        self.assignment
            .iter()
            .enumerate()
            .filter(move |(_, a)| **a == Some(n))
            .map(|(k, _)| k)
    }

    /// Every member of a zone holds one RB from that zone's pool.
    pub fn respects(&self, zones: &[Vec<usize>], alloc: &ZoneAllocation) -> bool {
        zones.len() == alloc.rbs.len()
            && zones.iter().zip(&alloc.rbs).all(|(members, pool)| {
                members
                    .iter()
                    .all(|&k| self.assignment[k].is_some_and(|n| pool.contains(&n)))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostWeights {
    pub alpha: f64,
    pub beta: f64,
    /// Cost reported when no pair in the zone is satisfied.
    pub gamma_cap: f64,
}

impl Default for CostWeights {
    fn default() -> Self {
        CostWeights {
            alpha: 1.0,
            beta: 3.0,
            gamma_cap: 1e9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZoneScore {
    pub load: f64,
    pub satisfied: usize,
    pub size: usize,
    pub cost: f64,
    pub utility: f64,
}

/// `Gamma_z = load^alpha / (satisfied/size)^beta`, `W_z = -Gamma_z`.
pub fn zone_score(load: f64, satisfied: usize, size: usize, w: &CostWeights) -> Result<ZoneScore> {
    if size == 0 {
        return Err(Error::input("zone score needs at least one pair"));
    }
    if satisfied > size {
        return Err(Error::input("more satisfied pairs than zone members"));
    }
    let cost = if satisfied == 0 {
        w.gamma_cap
    } else {
        load.powf(w.alpha) / (satisfied as f64 / size as f64).powf(w.beta)
    };
    Ok(ZoneScore {
        load,
        satisfied,
        size,
        cost,
        utility: -cost,
    })
}

/// What the allocator knows about the channel: window-averaged gains and
/// each pair's offered traffic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelSnapshot {
    pub channel: ChannelState,
    /// Traffic influx per pair, bit/s.
    pub influx: Vec<f64>,
    /// Linear SINR target.
    pub target_sinr: f64,
    pub rho_cap: f64,
}

/// One zone's game: its members, its RB pool and the shared snapshot.
#[derive(Debug, Clone, Copy)]
pub struct ZoneGame<'a> {
    pub members: &'a [usize],
    pub rbs: &'a [usize],
    pub snapshot: &'a ChannelSnapshot,
    pub weights: CostWeights,
}

/// Outcome for one member under a given matching.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MemberState {
    pub sinr: f64,
    pub load: f64,
    pub satisfied: bool,
}

/// Matchings within a zone are indexed by member position: `assign[i]` is the
/// RB id held by `members[i]`.
impl<'a> ZoneGame<'a> {
    pub fn new(members: &'a [usize], rbs: &'a [usize], snapshot: &'a ChannelSnapshot, weights: CostWeights) -> Self {
        ZoneGame {
            members,
            rbs,
            snapshot,
            weights,
        }
    }

    pub fn size(&self) -> usize {
        self.members.len()
    }

    pub fn is_valid(&self, assign: &[usize]) -> bool {
        assign.len() == self.members.len() && assign.iter().all(|n| self.rbs.contains(n))
    }

    /// SINR, clamped time load and satisfaction of member `i`.
    pub fn member_state(&self, assign: &[usize], i: usize) -> MemberState {
        let n = assign[i];
        let k = self.members[i];
        let ch = &self.snapshot.channel;
        let cochannel = assign
            .iter()
            .zip(self.members)
            .filter(|(a, _)| **a == n)
            .map(|(_, &j)| j);
        let sinr = ch.sinr(k, n, cochannel);
        let r = ch.rate(sinr);
        let satisfied = sinr >= self.snapshot.target_sinr && r > 0.0;
        let load = if satisfied {
            crate::channel::time_load(self.snapshot.influx[k], r).min(self.snapshot.rho_cap)
        } else {
            self.snapshot.rho_cap
        };
        MemberState { sinr, load, satisfied }
    }

    /// `U_{n,k} = -rho_{n,k}` for the member at position `i`.
    pub fn utility_vue(&self, assign: &[usize], i: usize) -> f64 {
        -self.member_state(assign, i).load
    }

    /// Sum of member utilities on RB `n`; zero for an idle RB.
    pub fn utility_rb(&self, assign: &[usize], n: usize) -> f64 {
        (0..assign.len())
            .filter(|&i| assign[i] == n)
            .map(|i| self.utility_vue(assign, i))
            .sum()
    }

    pub fn score(&self, assign: &[usize]) -> ZoneScore {
        let mut load = 0.0;
        let mut satisfied = 0;
        for i in 0..assign.len() {
            let s = self.member_state(assign, i);
            load += s.load;
            satisfied += usize::from(s.satisfied);
        }
        zone_score(load, satisfied, assign.len(), &self.weights).expect("zone has members")
    }

    pub fn utility(&self, assign: &[usize]) -> f64 {
        self.score(assign).utility
    }

    /// Uniformly random RB from the pool for every member.
    pub fn random_assignment<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<usize> {
        (0..self.members.len())
            .map(|_| self.rbs[rng.gen_range(0..self.rbs.len())])
            .collect()
    }

    /// Random matching with RB occupancies differing by at most one: members
    /// are shuffled and dealt over a shuffled copy of the pool.
    pub fn balanced_random_assignment<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.members.len()).collect();
        order.shuffle(rng);
        let mut pool = self.rbs.to_vec();
        pool.shuffle(rng);
        let mut assign = vec![0; self.members.len()];
        for (slot, &i) in order.iter().enumerate() {
            assign[i] = pool[slot % pool.len()];
        }
        assign
    }
}

/// Exchanges the RBs of members `a` and `b`.
pub fn swap(assign: &[usize], a: usize, b: usize) -> Result<Vec<usize>> {
    if a == b {
        return Err(Error::input("a swap needs two distinct pairs"));
    }
    if a >= assign.len() || b >= assign.len() {
        return Err(Error::input("swap index out of range"));
    }
    let mut out = assign.to_vec();
    out.swap(a, b);
    Ok(out)
}

/// A candidate change to a zone matching.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Move {
    /// Exchange the RBs of two members.
    Swap(usize, usize),
    /// Move one member onto a less crowded RB (the swap with a vacancy).
    Vacate(usize, usize),
}

impl Move {
    pub fn apply(&self, assign: &[usize]) -> Vec<usize> {
        let mut out = assign.to_vec();
        match *self {
            Move::Swap(a, b) => out.swap(a, b),
            Move::Vacate(a, n) => out[a] = n,
        }
        out
    }

    /// Whether the move changes the matching at all.
    pub fn is_effective(&self, assign: &[usize]) -> bool {
        match *self {
            Move::Swap(a, b) => assign[a] != assign[b],
            Move::Vacate(a, n) => {
                let occ = |r: usize| assign.iter().filter(|&&x| x == r).count();
                assign[a] != n && occ(n) < occ(assign[a])
            }
        }
    }
}

fn candidate_moves(game: &ZoneGame<'_>, vacancy_moves: bool) -> Vec<Move> {
    let k = game.size();
    let mut moves = Vec::with_capacity(k * k.saturating_sub(1) / 2);
    for a in 0..k {
        for b in a + 1..k {
            moves.push(Move::Swap(a, b));
        }
    }
    if vacancy_moves {
        for a in 0..k {
            for &n in game.rbs {
                moves.push(Move::Vacate(a, n));
            }
        }
    }
    moves
}

/// Every effective move that strictly raises `W_z`.
pub fn improving_moves(game: &ZoneGame<'_>, assign: &[usize], vacancy_moves: bool) -> Vec<Move> {
    let w = game.utility(assign);
    candidate_moves(game, vacancy_moves)
        .into_iter()
        .filter(|m| m.is_effective(assign) && game.utility(&m.apply(assign)) > w)
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub stable: bool,
    /// A blocking swap `(a, b)` by member position, when not stable.
    pub witness: Option<(usize, usize)>,
    /// Swaps that raise `W_z` without meeting the player-level conditions.
    pub zone_only_improvements: usize,
    /// Swaps meeting the player-level conditions without raising `W_z`.
    pub player_only_improvements: usize,
}

/// Pairwise stability of a zone matching.
///
/// A swap `(k, k')` blocks when the two V-UEs and their two RBs all weakly
/// gain, at least one strictly gains, and `W_z` strictly rises.
pub fn is_pairwise_stable(game: &ZoneGame<'_>, assign: &[usize]) -> StabilityReport {
    let w = game.utility(assign);
    let mut report = StabilityReport {
        stable: true,
        witness: None,
        zone_only_improvements: 0,
        player_only_improvements: 0,
    };
    for a in 0..assign.len() {
        for b in a + 1..assign.len() {
            let (n, n2) = (assign[a], assign[b]);
            if n == n2 {
                continue;
            }
            let swapped = Move::Swap(a, b).apply(assign);
            let before = [
                game.utility_vue(assign, a),
                game.utility_vue(assign, b),
                game.utility_rb(assign, n),
                game.utility_rb(assign, n2),
            ];
            let after = [
                game.utility_vue(&swapped, a),
                game.utility_vue(&swapped, b),
                game.utility_rb(&swapped, n),
                game.utility_rb(&swapped, n2),
            ];
            let weak = before.iter().zip(&after).all(|(x, y)| y >= x);
            let strict = before.iter().zip(&after).any(|(x, y)| y > x);
            let players = weak && strict;
            let zone = game.utility(&swapped) > w;
            match (players, zone) {
                (true, true) => {
                    if report.stable {
                        report.stable = false;
                        report.witness = Some((a, b));
                    }
                }
                (false, true) => report.zone_only_improvements += 1,
                (true, false) => report.player_only_improvements += 1,
                (false, false) => {}
            }
        }
    }
    report
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchingOptions {
    /// Cap on evaluated candidate moves.
    pub count_max: usize,
    pub vacancy_moves: bool,
}

impl Default for MatchingOptions {
    fn default() -> Self {
        MatchingOptions {
            count_max: 500,
            vacancy_moves: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchingOutcome {
    pub assign: Vec<usize>,
    /// Accepted moves.
    pub swaps: usize,
    /// Evaluated (effective) candidate moves.
    pub evaluations: usize,
    pub converged: bool,
    /// `W_z` of the initial matching followed by `W_z` after each accepted move.
    pub trace: Vec<f64>,
}

/// Swap-matching from `initial` until a full shuffled pass over all
/// candidate moves accepts nothing, or `count_max` evaluations are spent.
/// A move is accepted iff it strictly raises `W_z`.
pub fn solve_zone_matching<R: Rng + ?Sized>(
    game: &ZoneGame<'_>,
    initial: Vec<usize>,
    opts: &MatchingOptions,
    rng: &mut R,
) -> Result<MatchingOutcome> {
    if game.rbs.is_empty() {
        return Err(Error::input("zone has no RBs"));
    }
    if !game.is_valid(&initial) {
        return Err(Error::input("initial matching uses RBs outside the zone pool"));
    }
    let mut assign = initial;
    let mut w = game.utility(&assign);
    let mut out = MatchingOutcome {
        assign: Vec::new(),
        swaps: 0,
        evaluations: 0,
        converged: false,
        trace: vec![w],
    };
    let mut moves = candidate_moves(game, opts.vacancy_moves);

    'passes: loop {
        moves.shuffle(rng);
        let mut accepted = false;
        for m in &moves {
            if !m.is_effective(&assign) {
                continue;
            }
            if out.evaluations >= opts.count_max {
                break 'passes;
            }
            out.evaluations += 1;
            let next = m.apply(&assign);
            let w_next = game.utility(&next);
            if w_next > w {
                assign = next;
                w = w_next;
                out.swaps += 1;
                out.trace.push(w);
                accepted = true;
            }
        }
        if !accepted {
            out.converged = true;
            break;
        }
    }
    out.assign = assign;
    Ok(out)
}
