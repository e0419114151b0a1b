//! Acceptance suite. Each test prints one `PASS`/`FAIL` line to stderr
//! (visible without `--nocapture`) and then asserts.

mod common;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use v2v_alloc::allocation::{hare_niemeyer, solve_zone_matching, MatchingOptions, ZoneGame};
use v2v_alloc::clustering::{normalized_laplacian, spectral_zones, ZonePartition};
use v2v_alloc::config::SimConfig;
use v2v_alloc::linalg::{symmetric_eigen, Matrix};
use v2v_alloc::metrics::{percentile, MetricsLog};
use v2v_alloc::sweep::{execute_sweep, run_sweep, SweepOptions, SweepResult};

use common::{all_matchings, oracle_utility, random_zone};

fn report(criterion: u32, name: &str, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let mut err = std::io::stderr().lock();
    let _ = writeln!(err, "[acceptance] criterion {criterion} {name}: {verdict} ({detail})");
}

fn artifacts_dir() -> PathBuf {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests").join("artifacts");
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

/// Largest-remainder seats computed in exact integer arithmetic, for
/// integer loads.
fn exact_largest_remainder(loads: &[u64], n: u64) -> Vec<u64> {
    let z = loads.len() as u64;
    let total: u64 = loads.iter().sum();
    let (num, den): (Vec<u64>, u64) = if total == 0 {
        (vec![n; loads.len()], z)
    } else {
        (loads.iter().map(|l| n * l).collect(), total)
    };
    let mut seats: Vec<u64> = num.iter().map(|q| q / den).collect();
    let rem: Vec<u64> = num.iter().map(|q| q % den).collect();
    let mut order: Vec<usize> = (0..loads.len()).collect();
    order.sort_by(|&a, &b| rem[b].cmp(&rem[a]).then(a.cmp(&b)));
    let left = n - seats.iter().sum::<u64>();
    for &i in order.iter().take(left as usize) {
        seats[i] += 1;
    }
    seats
}

#[test]
fn criterion_1_quota_conservation() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x51a7);
    let start = Instant::now();
    let mut failures = Vec::new();
    for case in 0..10_000 {
        let n = if case % 2 == 0 { 6 } else { 15 };
        let zones = rng.gen_range(1..=10usize.min(n));
        let integral = case % 3 == 0;
        let loads: Vec<f64> = if integral {
            (0..zones).map(|_| rng.gen_range(0..4u32) as f64).collect()
        } else {
            (0..zones).map(|_| rng.gen_range(0.0..1.0)).collect()
        };
        let seats = hare_niemeyer(&loads, n).unwrap();
        if seats.iter().sum::<usize>() != n {
            failures.push(format!("sum != {n} for {loads:?}"));
        }
        if seats.contains(&0) {
            failures.push(format!("empty quota for {loads:?}"));
        }
        for i in 0..zones {
            for j in i + 1..zones {
                if loads[i] == loads[j] && seats[i] < seats[j] {
                    failures.push(format!("tie not to lower index for {loads:?}: {seats:?}"));
                }
            }
        }
        // Exact oracle whenever no minimum-one correction is needed.
        if integral {
            let ints: Vec<u64> = loads.iter().map(|&l| l as u64).collect();
            let exact = exact_largest_remainder(&ints, n as u64);
            if exact.iter().all(|&s| s >= 1) {
                let got: Vec<u64> = seats.iter().map(|&s| s as u64).collect();
                if got != exact {
                    failures.push(format!("{loads:?}: got {got:?}, exact {exact:?}"));
                }
            }
        }
    }
    let elapsed = start.elapsed();
    let pass = failures.is_empty() && elapsed < Duration::from_secs(1);
    report(
        1,
        "quota conservation",
        pass,
        &format!(
            "10000 vectors, {} violations, {:.3} s",
            failures.len(),
            elapsed.as_secs_f64()
        ),
    );
    assert!(failures.is_empty(), "{:?}", &failures[..failures.len().min(5)]);
    assert!(elapsed < Duration::from_secs(1), "took {elapsed:?}");
}

#[test]
fn criterion_2_convergence_and_stability() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xc0de);
    let opts = MatchingOptions::default();
    let start = Instant::now();
    let mut failures = Vec::new();
    let mut max_evals = 0;
    for case in 0..1_000 {
        let pairs = rng.gen_range(1..=10);
        let rbs = rng.gen_range(1..=5);
        let inst = random_zone(pairs, rbs, &mut rng);
        let game = ZoneGame::new(&inst.members, &inst.rbs, &inst.snapshot, inst.weights);
        let initial = game.random_assignment(&mut rng);
        let out = solve_zone_matching(&game, initial.clone(), &opts, &mut rng).unwrap();
        max_evals = max_evals.max(out.evaluations);
        if !out.converged || out.evaluations >= opts.count_max {
            failures.push(format!(
                "case {case}: not converged after {} evaluations",
                out.evaluations
            ));
        }
        if out.trace.windows(2).any(|w| w[1] <= w[0]) {
            failures.push(format!("case {case}: non-increasing utility trace"));
        }
        if (oracle_utility(&inst, &initial) - out.trace[0]).abs() > 1e-9 * out.trace[0].abs().max(1.0) {
            failures.push(format!("case {case}: utility disagrees with oracle"));
        }
        let w = oracle_utility(&inst, &out.assign);
        for a in 0..pairs {
            for b in a + 1..pairs {
                if out.assign[a] == out.assign[b] {
                    continue;
                }
                let mut swapped = out.assign.clone();
                swapped.swap(a, b);
                if oracle_utility(&inst, &swapped) > w {
                    failures.push(format!("case {case}: improving swap ({a}, {b}) left"));
                }
            }
        }
    }
    let elapsed = start.elapsed();
    let pass = failures.is_empty() && elapsed < Duration::from_secs(30);
    report(
        2,
        "convergence and stability",
        pass,
        &format!(
            "1000 zones, {} violations, max evaluations {max_evals}, {:.2} s",
            failures.len(),
            elapsed.as_secs_f64()
        ),
    );
    assert!(failures.is_empty(), "{:?}", &failures[..failures.len().min(5)]);
    assert!(elapsed < Duration::from_secs(30), "took {elapsed:?}");
}

#[test]
fn criterion_3_brute_force_audit() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xb7f0);
    let opts = MatchingOptions::default();
    let mut table = String::from("# schema v1\ninstance,pairs,rbs,converged_utility,optimal_utility,gap\n");
    let mut gaps = Vec::new();
    let mut above_optimum = 0;
    for case in 0..200 {
        let pairs = rng.gen_range(1..=6);
        let rbs = rng.gen_range(1..=3);
        let inst = random_zone(pairs, rbs, &mut rng);
        let game = ZoneGame::new(&inst.members, &inst.rbs, &inst.snapshot, inst.weights);
        let initial = game.balanced_random_assignment(&mut rng);
        let out = solve_zone_matching(&game, initial, &opts, &mut rng).unwrap();
        let got = oracle_utility(&inst, &out.assign);
        let best = all_matchings(pairs, rbs)
            .map(|a| oracle_utility(&inst, &a))
            .fold(f64::NEG_INFINITY, f64::max);
        if got > best + 1e-12 * best.abs() {
            above_optimum += 1;
        }
        let gap = (best - got) / best.abs();
        gaps.push(gap);
        writeln!(table, "{case},{pairs},{rbs},{got},{best},{gap}").unwrap();
    }
    std::fs::write(artifacts_dir().join("bruteforce_gap.csv"), table).unwrap();
    let mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
    let max = gaps.iter().copied().fold(0.0, f64::max);
    let optimal = gaps.iter().filter(|&&g| g <= 1e-12).count();
    let pass = above_optimum == 0 && gaps.iter().all(|g| g.is_finite());
    report(
        3,
        "brute-force audit",
        pass,
        &format!("200 zones, mean gap {mean:.4}, max gap {max:.4}, {optimal} at optimum"),
    );
    assert_eq!(above_optimum, 0);
}

fn planted_affinity(seed: u64) -> (Matrix, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut groups: Vec<usize> = (0..12).map(|i| i / 4).collect();
    groups.shuffle(&mut rng);
    let mut rows = vec![vec![0.0; 12]; 12];
    for i in 0..12 {
        for j in i + 1..12 {
            let v = if groups[i] == groups[j] {
                rng.gen_range(0.8..1.0)
            } else {
                rng.gen_range(0.0..0.05)
            };
            rows[i][j] = v;
            rows[j][i] = v;
        }
    }
    (Matrix::from_rows(&rows).unwrap(), groups)
}

fn block_diagonal(sizes: &[usize], rng: &mut ChaCha8Rng) -> Matrix {
    let k: usize = sizes.iter().sum();
    let mut block = Vec::with_capacity(k);
    for (b, &s) in sizes.iter().enumerate() {
        block.extend(std::iter::repeat_n(b, s));
    }
    let mut rows = vec![vec![0.0; k]; k];
    for i in 0..k {
        for j in i + 1..k {
            if block[i] == block[j] {
                let v = rng.gen_range(0.1..1.0);
                rows[i][j] = v;
                rows[j][i] = v;
            }
        }
    }
    Matrix::from_rows(&rows).unwrap()
}

#[test]
fn criterion_4_spectral_recovery() {
    let mut recovered = 0;
    for seed in 0..10 {
        let (a, groups) = planted_affinity(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let out = spectral_zones(&a, 2, 6, &mut rng).unwrap();
        let planted = ZonePartition::from_labels(&groups);
        if out.chosen == 3 && out.partition == planted {
            recovered += 1;
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut multiplicity_ok = 0;
    let mut lambda1_max: f64 = 0.0;
    let shapes: [&[usize]; 4] = [&[12], &[6, 6], &[3, 4, 5], &[2, 3, 3, 4]];
    for sizes in shapes {
        let a = block_diagonal(sizes, &mut rng);
        let eig = symmetric_eigen(&normalized_laplacian(&a)).unwrap();
        lambda1_max = lambda1_max.max(eig.values[0].abs());
        let zeros = eig.values.iter().filter(|v| v.abs() < 1e-8).count();
        if zeros == sizes.len() {
            multiplicity_ok += 1;
        }
    }
    let pass = recovered == 10 && multiplicity_ok == shapes.len() && lambda1_max < 1e-8;
    report(
        4,
        "spectral recovery",
        pass,
        &format!(
            "{recovered}/10 planted recovered, {multiplicity_ok}/{} null-space multiplicities, max |lambda_1| {lambda1_max:.1e}",
            shapes.len()
        ),
    );
    assert_eq!(recovered, 10);
    assert_eq!(multiplicity_ok, shapes.len());
    assert!(lambda1_max < 1e-8);
}

const KS: [usize; 5] = [10, 15, 20, 25, 30];
const NS: [usize; 2] = [6, 15];

/// The full experiment grid over ten seeds, run once and shared.
fn reference_grid() -> &'static (SweepResult, Duration) {
    static GRID: OnceLock<(SweepResult, Duration)> = OnceLock::new();
    GRID.get_or_init(|| {
        let seeds: Vec<u64> = (1..=10).collect();
        let start = Instant::now();
        let result = execute_sweep(&SimConfig::default(), &KS, &NS, &seeds, SweepOptions::default()).unwrap();
        (result, start.elapsed())
    })
}

fn mean_satisfaction(result: &SweepResult, scheme: &str, k: usize, n: usize) -> f64 {
    let rows: Vec<f64> = result
        .summaries
        .iter()
        .filter(|s| s.scheme == scheme && s.vue_pairs == k && s.rbs == n)
        .map(|s| s.satisfaction_pct)
        .collect();
    assert_eq!(rows.len(), 10);
    rows.iter().sum::<f64>() / rows.len() as f64
}

fn logs_for(result: &SweepResult, k: usize, n: usize) -> Vec<&MetricsLog> {
    result.logs.iter().filter(|l| l.vue_pairs == k && l.rbs == n).collect()
}

#[test]
fn criterion_5_satisfaction_trend() {
    let (result, elapsed) = reference_grid();
    let p10 = mean_satisfaction(result, "proposed", 10, 15);
    let p15 = mean_satisfaction(result, "proposed", 15, 15);
    let gain6 = mean_satisfaction(result, "proposed", 30, 6) - mean_satisfaction(result, "baseline", 30, 6);
    let gain15 = mean_satisfaction(result, "proposed", 30, 15) - mean_satisfaction(result, "baseline", 30, 15);
    let pass = p10 >= 95.0 && p15 >= 95.0 && gain6 >= 20.0 && gain15 >= 20.0 && *elapsed < Duration::from_secs(300);
    report(
        5,
        "satisfaction trend",
        pass,
        &format!(
            "K=10 {p10:.1}%, K=15 {p15:.1}% at N=15; K=30 gain {gain6:.1} pts (N=6), {gain15:.1} pts (N=15); grid {:.1} s",
            elapsed.as_secs_f64()
        ),
    );
    assert!(p10 >= 95.0, "K=10: {p10}");
    assert!(p15 >= 95.0, "K=15: {p15}");
    assert!(gain6 >= 20.0, "N=6 gain {gain6}");
    assert!(gain15 >= 20.0, "N=15 gain {gain15}");
    assert!(*elapsed < Duration::from_secs(300));
}

#[test]
fn criterion_6_sinr_distribution() {
    let (result, _) = reference_grid();
    let logs = logs_for(result, 25, 15);
    let proposed: Vec<f64> = logs.iter().flat_map(|l| l.proposed.sinr_db_samples()).collect();
    let baseline: Vec<f64> = logs.iter().flat_map(|l| l.baseline.sinr_db_samples()).collect();
    let mut lines = Vec::new();
    let mut beats = true;
    for p in [25.0, 50.0, 75.0] {
        let a = percentile(&proposed, p).unwrap();
        let b = percentile(&baseline, p).unwrap();
        beats &= a > b;
        lines.push(format!("p{p}: {a:.1} vs {b:.1} dB"));
    }
    let total: usize = logs
        .iter()
        .map(|l| l.proposed.satisfied.iter().map(Vec::len).sum::<usize>())
        .sum();
    let outages: usize = logs
        .iter()
        .map(|l| l.proposed.satisfied.iter().flatten().filter(|&&s| !s).count())
        .sum();
    let outage = outages as f64 / total as f64;
    let pass = beats && outage < 0.15;
    report(
        6,
        "SINR distribution",
        pass,
        &format!("{}, proposed outage {:.1}%", lines.join(", "), 100.0 * outage),
    );
    assert!(outage < 0.15, "outage {outage}");
    assert!(beats, "proposed percentiles must exceed baseline: {lines:?}");
}

#[test]
fn criterion_7_swap_iteration_scale() {
    let (result, _) = reference_grid();
    let count_max = SimConfig::default().matching.count_max as f64;
    let mut table = String::from("# schema v1\nvue_pairs,rbs,iterations,zones\n");
    let mut means: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    let mut worst = 0usize;
    for &n in &NS {
        for &k in &KS {
            let mut hist: BTreeMap<usize, usize> = BTreeMap::new();
            let mut total = 0usize;
            let mut zones = 0usize;
            for log in logs_for(result, k, n) {
                for z in log.windows.iter().flat_map(|w| &w.zones) {
                    *hist.entry(z.swaps).or_default() += 1;
                    total += z.swaps;
                    zones += 1;
                    worst = worst.max(z.swaps);
                }
            }
            for (iters, count) in &hist {
                writeln!(table, "{k},{n},{iters},{count}").unwrap();
            }
            means.entry(n).or_default().push(total as f64 / zones as f64);
        }
    }
    std::fs::write(artifacts_dir().join("swap_iterations.csv"), table).unwrap();
    let grows = means.values().all(|m| m.windows(2).all(|w| w[1] > w[0]));
    let below = means.values().flatten().all(|&m| m < count_max);
    let fmt = |n: usize| {
        means[&n]
            .iter()
            .map(|m| format!("{m:.2}"))
            .collect::<Vec<_>>()
            .join("/")
    };
    report(
        7,
        "swap iteration scale",
        grows && below,
        &format!(
            "mean swaps per zone over K={KS:?}: N=6 {}, N=15 {}; largest {worst}",
            fmt(6),
            fmt(15)
        ),
    );
    assert!(grows, "{means:?}");
    assert!(below);
}

fn read_tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.insert(
                    path.strip_prefix(root).unwrap().to_path_buf(),
                    std::fs::read(&path).unwrap(),
                );
            }
        }
    }
    out
}

#[test]
fn criterion_8_determinism() {
    let base = SimConfig::default();
    let opts = SweepOptions { dump_matrices: true };
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run_sweep(&base, &[10, 25], &[6, 15], &[1, 2], a.path(), opts).unwrap();
    run_sweep(&base, &[10, 25], &[6, 15], &[1, 2], b.path(), opts).unwrap();
    let (ta, tb) = (read_tree(a.path()), read_tree(b.path()));
    let differing: Vec<&PathBuf> = ta.keys().filter(|p| ta.get(*p) != tb.get(*p)).collect();
    let pass = !ta.is_empty() && ta.len() == tb.len() && differing.is_empty();
    report(
        8,
        "determinism",
        pass,
        &format!("{} files compared, {} differ", ta.len(), differing.len()),
    );
    assert!(pass, "differing files: {differing:?}");
}
