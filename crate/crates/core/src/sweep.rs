//! Parameter sweeps over (K, N, seed) and the plot-ready files they emit.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::config::SimConfig;
use crate::engine::{run_with, RunOptions};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::metrics::{summarize, MetricsLog, Summary};

pub const SCHEMA_HEADER: &str = "# schema v1";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SweepOptions {
    pub dump_matrices: bool,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    /// One entry per (K, N, seed, scheme), in sweep order.
    pub summaries: Vec<Summary>,
    /// One log per (K, N, seed), in sweep order.
    pub logs: Vec<MetricsLog>,
}

/// The sweep grid in output order: K outermost, then N, then seed.
pub fn sweep_points(base: &SimConfig, ks: &[usize], ns: &[usize], seeds: &[u64]) -> Result<Vec<SimConfig>> {
    if ks.is_empty() || ns.is_empty() || seeds.is_empty() {
        return Err(Error::input("sweep lists must be non-empty"));
    }
    let mut points = Vec::with_capacity(ks.len() * ns.len() * seeds.len());
    for &k in ks {
        for &n in ns {
            for &seed in seeds {
                let cfg = SimConfig {
                    vue_pairs: k,
                    rbs: n,
                    seed,
                    ..base.clone()
                };
                cfg.validate()
                    .map_err(|e| Error::input(format!("invalid sweep point K={k}, N={n}, seed={seed}: {e}")))?;
                points.push(cfg);
            }
        }
    }
    Ok(points)
}

/// Runs the sweep in memory.
pub fn execute_sweep(
    base: &SimConfig,
    ks: &[usize],
    ns: &[usize],
    seeds: &[u64],
    opts: SweepOptions,
) -> Result<SweepResult> {
    let points = sweep_points(base, ks, ns, seeds)?;
    let run_opts = RunOptions {
        keep_matrices: opts.dump_matrices,
    };
    let logs = points
        .par_iter()
        .map(|cfg| run_with(cfg, run_opts))
        .collect::<Result<Vec<_>>>()?;
    let mut summaries = Vec::new();
    for log in &logs {
        summaries.extend(summarize(log)?);
    }
    Ok(SweepResult { summaries, logs })
}

/// Runs the sweep and writes `summary.csv`, `summary.json`, `sinr_cdf.csv`,
/// `swap_iters.csv` (and `matrices/` when asked) into `out_dir`.
pub fn run_sweep(
    base: &SimConfig,
    ks: &[usize],
    ns: &[usize],
    seeds: &[u64],
    out_dir: &Path,
    opts: SweepOptions,
) -> Result<SweepResult> {
    let result = execute_sweep(base, ks, ns, seeds, opts)?;
    fs::create_dir_all(out_dir)?;
    write_summary(&out_dir.join("summary.csv"), &result.summaries)?;
    let json = serde_json::to_string_pretty(&result.summaries)?;
    fs::write(out_dir.join("summary.json"), json + "\n")?;
    write_sinr_cdf(&out_dir.join("sinr_cdf.csv"), &result.logs)?;
    write_swap_iters(&out_dir.join("swap_iters.csv"), &result.logs)?;
    if opts.dump_matrices {
        write_matrices(&out_dir.join("matrices"), &result.logs)?;
    }
    Ok(result)
}

fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "{SCHEMA_HEADER}")?;
    Ok(csv::Writer::from_writer(out))
}

fn finish(w: csv::Writer<BufWriter<File>>) -> Result<()> {
    let mut inner = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    inner.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    Error::Parse(e.to_string())
}

pub fn write_summary(path: &Path, rows: &[Summary]) -> Result<()> {
    let mut w = csv_writer(path)?;
    for row in rows {
        w.serialize(row).map_err(csv_err)?;
    }
    finish(w)
}

#[derive(Serialize)]
struct CdfRow<'a> {
    scheme: &'a str,
    vue_pairs: usize,
    rbs: usize,
    rank: usize,
    sinr_db: f64,
}

/// Pooled, sorted SINR samples per (scheme, K, N) over all seeds.
pub fn write_sinr_cdf(path: &Path, logs: &[MetricsLog]) -> Result<()> {
    let mut groups: Vec<((usize, usize), Vec<&MetricsLog>)> = Vec::new();
    for log in logs {
        let key = (log.vue_pairs, log.rbs);
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, g)) => g.push(log),
            None => groups.push((key, vec![log])),
        }
    }
    let mut w = csv_writer(path)?;
    for ((k, n), group) in &groups {
        for scheme in ["proposed", "baseline"] {
            let mut samples: Vec<f64> = group
                .iter()
                .flat_map(|log| match scheme {
                    "proposed" => log.proposed.sinr_db_samples(),
                    _ => log.baseline.sinr_db_samples(),
                })
                .collect();
            samples.sort_by(f64::total_cmp);
            for (rank, &sinr_db) in samples.iter().enumerate() {
                w.serialize(CdfRow {
                    scheme,
                    vue_pairs: *k,
                    rbs: *n,
                    rank,
                    sinr_db,
                })
                .map_err(csv_err)?;
            }
        }
    }
    finish(w)
}

#[derive(Serialize)]
struct SwapRow {
    vue_pairs: usize,
    rbs: usize,
    seed: u64,
    window: usize,
    zone: usize,
    zone_pairs: usize,
    zone_rbs: usize,
    iterations: usize,
    evaluations: usize,
    converged: bool,
}

pub fn write_swap_iters(path: &Path, logs: &[MetricsLog]) -> Result<()> {
    let mut w = csv_writer(path)?;
    for log in logs {
        for win in &log.windows {
            for (zone, z) in win.zones.iter().enumerate() {
                w.serialize(SwapRow {
                    vue_pairs: log.vue_pairs,
                    rbs: log.rbs,
                    seed: log.seed,
                    window: win.index,
                    zone,
                    zone_pairs: z.members.len(),
                    zone_rbs: z.rbs.len(),
                    iterations: z.swaps,
                    evaluations: z.evaluations,
                    converged: z.converged,
                })
                .map_err(csv_err)?;
            }
        }
    }
    finish(w)
}

fn write_matrix(path: &Path, m: &Matrix) -> Result<()> {
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    for i in 0..m.size() {
        w.write_record(m.row(i).iter().map(|v| v.to_string()))
            .map_err(csv_err)?;
    }
    finish(w)
}

fn write_matrices(dir: &Path, logs: &[MetricsLog]) -> Result<()> {
    fs::create_dir_all(dir)?;
    for log in logs {
        for m in &log.matrices {
            let stem = format!("k{}_n{}_s{}_w{}", log.vue_pairs, log.rbs, log.seed, m.index);
            write_matrix(&dir.join(format!("{stem}_distance.csv")), &m.distance)?;
            write_matrix(&dir.join(format!("{stem}_load.csv")), &m.load)?;
            write_matrix(&dir.join(format!("{stem}_affinity.csv")), &m.affinity)?;
            let eig: String = m.eigenvalues.iter().map(|v| format!("{v}\n")).collect();
            fs::write(dir.join(format!("{stem}_eigenvalues.csv")), eig)?;
        }
    }
    Ok(())
}

/// Parses `"1,2,5"`, an inclusive range `"1-10"`, or a mix such as `"1-3,7"`.
pub fn parse_seed_list(text: &str) -> Result<Vec<u64>> {
    let bad = || Error::config("seeds", format!("cannot parse `{text}`"));
    let mut seeds = Vec::new();
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part.split_once('-') {
            Some((a, b)) => {
                let a: u64 = a.trim().parse().map_err(|_| bad())?;
                let b: u64 = b.trim().parse().map_err(|_| bad())?;
                if b < a {
                    return Err(Error::config("seeds", format!("empty range `{part}`")));
                }
                seeds.extend(a..=b);
            }
            None => seeds.push(part.parse().map_err(|_| bad())?),
        }
    }
    if seeds.is_empty() {
        return Err(bad());
    }
    Ok(seeds)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_lists() {
        assert_eq!(parse_seed_list("3").unwrap(), vec![3]);
        assert_eq!(parse_seed_list("1-4").unwrap(), vec![1, 2, 3, 4]);
        assert_eq!(parse_seed_list("1-2, 9").unwrap(), vec![1, 2, 9]);
        assert!(parse_seed_list("4-1").is_err());
        assert!(parse_seed_list("x").is_err());
        assert!(parse_seed_list("").is_err());
    }

    #[test]
    fn grid_counts_and_rejects_bad_points() {
        let base = SimConfig::default();
        let pts = sweep_points(&base, &[10, 20], &[6, 15], &[1, 2, 3]).unwrap();
        assert_eq!(pts.len(), 12);
        assert_eq!((pts[0].vue_pairs, pts[0].rbs, pts[0].seed), (10, 6, 1));
        assert_eq!((pts[11].vue_pairs, pts[11].rbs, pts[11].seed), (20, 15, 3));
        let err = sweep_points(&base, &[10], &[0], &[1]).unwrap_err().to_string();
        assert!(err.contains("N=0"), "{err}");
        assert!(sweep_points(&base, &[], &[6], &[1]).is_err());
    }
}
