//! Zone formation: distance and load similarities, the blended affinity,
//! and normalised spectral clustering with eigengap model selection.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{symmetric_eigen, Matrix};

/// Gaps closer than this are ties (resolved toward fewer zones).
const EIGENGAP_TIE: f64 = 1e-9;

pub fn pairwise_distances<P: Copy>(points: &[P], dist: impl Fn(P, P) -> f64) -> Matrix {
    Matrix::from_fn(
        points.len(),
        |i, j| if i == j { 0.0 } else { dist(points[i], points[j]) },
    )
}

/// `exp(-d^2 / (2 sigma^2))` within `range`, zero beyond it. Diagonal is 1.
pub fn gaussian_distance_similarity(distances: &Matrix, sigma: f64, range: f64) -> Result<Matrix> {
    if !(sigma > 0.0) {
        return Err(Error::config("sigma-d", "must be positive"));
    }
    if !(range > 0.0) {
        return Err(Error::config("epsilon-d", "must be positive"));
    }
    Ok(Matrix::from_fn(distances.size(), |i, j| {
        let d = distances[(i, j)];
        if i == j {
            1.0
        } else if d <= range {
            (-d * d / (2.0 * sigma * sigma)).exp()
        } else {
            0.0
        }
    }))
}

/// Cosine similarity between load histories. A pair with an all-zero
/// history has similarity 0 with everything, itself included.
pub fn cosine_load_similarity(histories: &[Vec<f64>]) -> Result<Matrix> {
    if let Some(first) = histories.first() {
        if histories.iter().any(|h| h.len() != first.len()) {
            return Err(Error::input("load histories must share one window length"));
        }
    }
    let norms: Vec<f64> = histories
        .iter()
        .map(|h| h.iter().map(|x| x * x).sum::<f64>().sqrt())
        .collect();
    Ok(Matrix::from_fn(histories.len(), |i, j| {
        if norms[i] == 0.0 || norms[j] == 0.0 {
            return 0.0;
        }
        let dot: f64 = histories[i].iter().zip(&histories[j]).map(|(a, b)| a * b).sum();
        (dot / (norms[i] * norms[j])).clamp(0.0, 1.0)
    }))
}

/// `theta (1 - C) + (1 - theta)(1 - D)`, symmetrised, with a zero diagonal.
///
/// Large entries mark pairs that differ in load and sit far apart, which is
/// what a zone wants to contain so its members can reuse RBs.
pub fn affinity(load_sim: &Matrix, dist_sim: &Matrix, theta: f64) -> Result<Matrix> {
    if !(0.0..=1.0).contains(&theta) {
        return Err(Error::config("theta", "must lie in [0, 1]"));
    }
    if load_sim.size() != dist_sim.size() {
        return Err(Error::input("similarity matrices differ in size"));
    }
    let raw = Matrix::from_fn(load_sim.size(), |i, j| {
        theta * (1.0 - load_sim[(i, j)]) + (1.0 - theta) * (1.0 - dist_sim[(i, j)])
    });
    Ok(Matrix::from_fn(raw.size(), |i, j| {
        if i == j {
            0.0
        } else {
            0.5 * (raw[(i, j)] + raw[(j, i)])
        }
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityMatrices {
    pub distance: Matrix,
    pub load: Matrix,
    pub affinity: Matrix,
    pub sigma_d: f64,
    pub epsilon_d: f64,
    pub theta: f64,
}

impl SimilarityMatrices {
    pub fn build(distances: &Matrix, histories: &[Vec<f64>], sigma_d: f64, epsilon_d: f64, theta: f64) -> Result<Self> {
        let distance = gaussian_distance_similarity(distances, sigma_d, epsilon_d)?;
        let load = cosine_load_similarity(histories)?;
        if load.size() != distance.size() {
            return Err(Error::input("one load history per pair required"));
        }
        let affinity = affinity(&load, &distance, theta)?;
        Ok(SimilarityMatrices {
            distance,
            load,
            affinity,
            sigma_d,
            epsilon_d,
            theta,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ZonePartition {
    /// Member pair ids per zone, ascending.
    pub zones: Vec<Vec<usize>>,
    /// Zone index of every pair.
    pub labels: Vec<usize>,
}

impl ZonePartition {
    pub fn single(k: usize) -> Self {
        ZonePartition::from_labels(&vec![0; k])
    }

    /// Builds a partition from arbitrary labels. Zones are renumbered by
    /// their smallest member so equal groupings compare equal.
    pub fn from_labels(labels: &[usize]) -> Self {
        let mut remap: Vec<Option<usize>> = Vec::new();
        let mut canonical = Vec::with_capacity(labels.len());
        let mut zones: Vec<Vec<usize>> = Vec::new();
        for (k, &l) in labels.iter().enumerate() {
            if l >= remap.len() {
                remap.resize(l + 1, None);
            }
            let z = *remap[l].get_or_insert_with(|| {
                zones.push(Vec::new());
                zones.len() - 1
            });
            zones[z].push(k);
            canonical.push(z);
        }
        ZonePartition {
            zones,
            labels: canonical,
        }
    }

    pub fn count(&self) -> usize {
        self.zones.len()
    }

    pub fn pairs(&self) -> usize {
        self.labels.len()
    }

    /// Non-empty, disjoint, exhaustive, and consistent with `labels`.
    pub fn is_valid(&self) -> bool {
        let mut seen = vec![false; self.labels.len()];
        for (z, members) in self.zones.iter().enumerate() {
            if members.is_empty() {
                return false;
            }
            for &k in members {
                if k >= seen.len() || seen[k] || self.labels[k] != z {
                    return false;
                }
                seen[k] = true;
            }
        }
        seen.into_iter().all(|s| s)
    }
}

/// `M^{-1/2} (M - A) M^{-1/2}`; rows of zero-degree vertices are zero.
pub fn normalized_laplacian(a: &Matrix) -> Matrix {
    let n = a.size();
    let inv_sqrt: Vec<f64> = (0..n)
        .map(|i| {
            let m: f64 = a.row(i).iter().sum();
            if m > 0.0 {
                1.0 / m.sqrt()
            } else {
                0.0
            }
        })
        .collect();
    Matrix::from_fn(n, |i, j| {
        let diag = if i == j && inv_sqrt[i] > 0.0 { 1.0 } else { 0.0 };
        diag - inv_sqrt[i] * a[(i, j)] * inv_sqrt[j]
    })
}

/// `argmax_{i in [b_min, b_max]} (lambda_{i+1} - lambda_i)` over ascending
/// eigenvalues (1-based `i`), ties toward the smaller `i`.
pub fn eigengap_choice(values: &[f64], b_min: usize, b_max: usize) -> usize {
    let b_min = b_min.max(1);
    let b_max = b_max.min(values.len().saturating_sub(1));
    if b_max < b_min {
        return b_min.min(values.len()).max(1);
    }
    let mut best = b_min;
    let mut best_gap = values[b_min] - values[b_min - 1];
    for i in b_min + 1..=b_max {
        let gap = values[i] - values[i - 1];
        if gap > best_gap + EIGENGAP_TIE {
            best = i;
            best_gap = gap;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralZones {
    pub partition: ZonePartition,
    /// Ascending eigenvalues of the normalised Laplacian over non-isolated pairs.
    pub eigenvalues: Vec<f64>,
    /// Zone count chosen by the eigengap (before isolated pairs are split off).
    pub chosen: usize,
}

/// Partitions pairs into zones from the affinity matrix.
///
/// Fewer than four pairs form a single zone. Zero-degree pairs are taken out
/// of the spectral step and each placed in a zone of its own.
pub fn spectral_zones<R: Rng + ?Sized>(a: &Matrix, b_min: usize, b_max: usize, rng: &mut R) -> Result<SpectralZones> {
    let k = a.size();
    if k == 0 {
        return Err(Error::input("spectral clustering needs at least one pair"));
    }
    if !a.is_symmetric(1e-12) {
        return Err(Error::input("affinity matrix must be symmetric"));
    }
    if (0..k).any(|i| a.row(i).iter().any(|&x| x < 0.0 || !x.is_finite())) {
        return Err(Error::input("affinity entries must be finite and non-negative"));
    }

    let connected: Vec<usize> = (0..k).filter(|&i| a.row(i).iter().sum::<f64>() > 0.0).collect();
    let isolated: Vec<usize> = (0..k).filter(|&i| a.row(i).iter().sum::<f64>() <= 0.0).collect();

    let mut labels = vec![0usize; k];
    let mut eigenvalues = Vec::new();
    let mut chosen = 1;
    let mut next_label = 0;

    if connected.len() >= 4 {
        let sub = Matrix::from_fn(connected.len(), |i, j| a[(connected[i], connected[j])]);
        let lap = normalized_laplacian(&sub);
        let eig = symmetric_eigen(&lap)?;
        let b = eigengap_choice(&eig.values, b_min, b_max);
        let rows: Vec<Vec<f64>> = (0..connected.len())
            .map(|i| {
                let row: Vec<f64> = (0..b).map(|j| eig.vectors[(i, j)]).collect();
                let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
                if norm > 0.0 {
                    row.into_iter().map(|x| x / norm).collect()
                } else {
                    row
                }
            })
            .collect();
        let sub_labels = kmeans(&rows, b, rng)?;
        for (i, &c) in connected.iter().enumerate() {
            labels[c] = sub_labels[i];
        }
        next_label = b;
        chosen = b;
        eigenvalues = eig.values;
    } else if !connected.is_empty() {
        next_label = 1;
    }
    for &i in &isolated {
        labels[i] = next_label;
        next_label += 1;
    }

    Ok(SpectralZones {
        partition: ZonePartition::from_labels(&labels),
        eigenvalues,
        chosen,
    })
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(p: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, centroid) in centroids.iter().enumerate() {
        let d = sq_dist(p, centroid);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

/// k-means with k-means++ seeding and Lloyd iterations (movement < 1e-9 or
/// 100 rounds). An emptied cluster takes the point farthest from its centroid.
pub fn kmeans<R: Rng + ?Sized>(rows: &[Vec<f64>], k: usize, rng: &mut R) -> Result<Vec<usize>> {
    let n = rows.len();
    if k == 0 || k > n {
        return Err(Error::input(format!("k-means needs 1 <= k <= {n}, got {k}")));
    }
    let dim = rows[0].len();
    if rows.iter().any(|r| r.len() != dim) {
        return Err(Error::input("k-means rows differ in dimension"));
    }

    let mut chosen = vec![false; n];
    let first = rng.gen_range(0..n);
    chosen[first] = true;
    let mut centroids = vec![rows[first].clone()];
    let mut d2: Vec<f64> = rows.iter().map(|r| sq_dist(r, &rows[first])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().enumerate().filter(|(i, _)| !chosen[*i]).map(|(_, d)| d).sum();
        let pick = if total > 0.0 {
            let mut target = rng.gen::<f64>() * total;
            let mut pick = None;
            for i in (0..n).filter(|&i| !chosen[i]) {
                if d2[i] <= 0.0 {
                    continue;
                }
                pick = Some(i);
                target -= d2[i];
                if target <= 0.0 {
                    break;
                }
            }
            pick.expect("positive total implies a candidate")
        } else {
            let free: Vec<usize> = (0..n).filter(|&i| !chosen[i]).collect();
            free[rng.gen_range(0..free.len())]
        };
        chosen[pick] = true;
        for (i, r) in rows.iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(r, &rows[pick]));
        }
        centroids.push(rows[pick].clone());
    }

    let mut labels = vec![0usize; n];
    for _ in 0..100 {
        for (i, r) in rows.iter().enumerate() {
            labels[i] = nearest(r, &centroids).0;
        }
        repair_empty(rows, &mut labels, &centroids, k);

        let mut next = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (i, r) in rows.iter().enumerate() {
            counts[labels[i]] += 1;
            for (acc, x) in next[labels[i]].iter_mut().zip(r) {
                *acc += x;
            }
        }
        let mut moved = 0.0_f64;
        for c in 0..k {
            for x in &mut next[c] {
                *x /= counts[c] as f64;
            }
            moved = moved.max(sq_dist(&next[c], &centroids[c]).sqrt());
        }
        centroids = next;
        if moved < 1e-9 {
            break;
        }
    }
    for (i, r) in rows.iter().enumerate() {
        labels[i] = nearest(r, &centroids).0;
    }
    repair_empty(rows, &mut labels, &centroids, k);
    Ok(labels)
}

fn repair_empty(rows: &[Vec<f64>], labels: &mut [usize], centroids: &[Vec<f64>], k: usize) {
    loop {
        let mut counts = vec![0usize; k];
        for &l in labels.iter() {
            counts[l] += 1;
        }
        let Some(empty) = counts.iter().position(|&c| c == 0) else {
            return;
        };
        let donor = (0..rows.len())
            .filter(|&i| counts[labels[i]] > 1)
            .max_by(|&i, &j| {
                let di = sq_dist(&rows[i], &centroids[labels[i]]);
                let dj = sq_dist(&rows[j], &centroids[labels[j]]);
                di.total_cmp(&dj).then(j.cmp(&i))
            })
            .expect("k <= n leaves a cluster with two or more points");
        labels[donor] = empty;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn gaussian_similarity_values() {
        let d = Matrix::from_rows(&[
            vec![0.0, 0.0, 100.0, 101.0],
            vec![0.0, 0.0, 1.0, 1.0],
            vec![100.0, 1.0, 0.0, 1.0],
            vec![101.0, 1.0, 1.0, 0.0],
        ])
        .unwrap();
        let s = gaussian_distance_similarity(&d, 100.0, 100.0).unwrap();
        assert_eq!(s[(0, 1)], 1.0);
        assert!((s[(0, 2)] - (-0.5f64).exp()).abs() < 1e-15);
        assert!((s[(0, 2)] - 0.6065).abs() < 1e-4);
        assert_eq!(s[(0, 3)], 0.0);
        assert_eq!(s[(2, 2)], 1.0);
        assert!(gaussian_distance_similarity(&d, 0.0, 100.0).is_err());
    }

    #[test]
    fn cosine_values() {
        let c = cosine_load_similarity(&[vec![1.0, 1.0], vec![1.0, 0.0], vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap();
        assert!((c[(0, 0)] - 1.0).abs() < 1e-15);
        assert!((c[(0, 1)] - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert_eq!(c[(1, 2)], 0.0);
        assert_eq!(c[(3, 0)], 0.0);
        assert_eq!(c[(3, 3)], 0.0);
    }

    #[test]
    fn affinity_values() {
        let ones = Matrix::from_fn(3, |_, _| 1.0);
        let a = affinity(&ones, &ones, 0.3).unwrap();
        assert!((0..3).all(|i| (0..3).all(|j| a[(i, j)] == 0.0)));

        let half = Matrix::from_fn(2, |_, _| 0.5);
        let a = affinity(&half, &half, 0.3).unwrap();
        assert!((a[(0, 1)] - 0.5).abs() < 1e-15);
        assert_eq!(a[(0, 0)], 0.0);

        let d = Matrix::from_rows(&[vec![1.0, 0.2], vec![0.2, 1.0]]).unwrap();
        let a = affinity(&half, &d, 0.0).unwrap();
        assert!((a[(0, 1)] - 0.8).abs() < 1e-15);
        assert!(affinity(&half, &d, 1.5).is_err());
    }

    #[test]
    fn eigengap_ties_prefer_fewer_zones() {
        assert_eq!(eigengap_choice(&[0.0, 0.0, 1.0, 1.0, 2.0, 3.0], 2, 3), 2);
        assert_eq!(eigengap_choice(&[0.0, 0.5, 0.5, 1.5, 1.6, 1.7], 2, 3), 3);
        assert_eq!(eigengap_choice(&[0.0, 1.0, 2.0, 3.0, 4.0], 2, 4), 2);
    }

    #[test]
    fn small_inputs_form_one_zone() {
        let a = Matrix::from_fn(3, |i, j| if i == j { 0.0 } else { 1.0 });
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let z = spectral_zones(&a, 2, 1, &mut rng).unwrap();
        assert_eq!(z.partition.count(), 1);
        assert!(z.partition.is_valid());
    }

    #[test]
    fn block_diagonal_two_components() {
        let group = |i: usize| usize::from(i >= 4);
        let a = Matrix::from_fn(8, |i, j| if i != j && group(i) == group(j) { 0.7 } else { 0.0 });
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let z = spectral_zones(&a, 2, 4, &mut rng).unwrap();
        assert_eq!(z.chosen, 2);
        assert_eq!(z.partition.zones, vec![vec![0, 1, 2, 3], vec![4, 5, 6, 7]]);
        assert!(z.eigenvalues[0].abs() < 1e-8 && z.eigenvalues[1].abs() < 1e-8);
    }

    #[test]
    fn uniform_affinity_picks_b_min() {
        let a = Matrix::from_fn(10, |i, j| if i == j { 0.0 } else { 0.4 });
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let z = spectral_zones(&a, 2, 5, &mut rng).unwrap();
        assert_eq!(z.chosen, 2);
        assert!(z.partition.is_valid());
        assert_eq!(z.partition.count(), 2);
    }

    #[test]
    fn isolated_vertices_get_their_own_zone() {
        // Pairs 0..6 form a connected blob, pair 6 has zero affinity to all.
        let a = Matrix::from_fn(7, |i, j| if i == j || i == 6 || j == 6 { 0.0 } else { 0.5 });
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let z = spectral_zones(&a, 2, 3, &mut rng).unwrap();
        assert!(z.partition.is_valid());
        let lone = z.partition.labels[6];
        assert_eq!(z.partition.zones[lone], vec![6]);
    }

    #[test]
    fn kmeans_k_equals_n() {
        let rows: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64, (i * i) as f64]).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut labels = kmeans(&rows, 5, &mut rng).unwrap();
        labels.sort_unstable();
        assert_eq!(labels, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn kmeans_antipodal_groups() {
        let mut rows = Vec::new();
        for i in 0..6 {
            let t = 0.05 * i as f64;
            rows.push(vec![t.cos(), t.sin()]);
            rows.push(vec![-t.cos(), -t.sin()]);
        }
        for seed in 0..5 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let labels = kmeans(&rows, 2, &mut rng).unwrap();
            for i in 0..6 {
                assert_eq!(labels[2 * i], labels[0]);
                assert_eq!(labels[2 * i + 1], labels[1]);
            }
            assert_ne!(labels[0], labels[1]);
        }
    }

    #[test]
    fn kmeans_deterministic_and_repairs_duplicates() {
        let rows = vec![vec![1.0, 0.0]; 6];
        let a = kmeans(&rows, 3, &mut ChaCha8Rng::seed_from_u64(8)).unwrap();
        let b = kmeans(&rows, 3, &mut ChaCha8Rng::seed_from_u64(8)).unwrap();
        assert_eq!(a, b);
        for c in 0..3 {
            assert!(a.contains(&c));
        }
        assert!(kmeans(&rows, 7, &mut ChaCha8Rng::seed_from_u64(8)).is_err());
    }

    #[test]
    fn partition_from_labels_is_canonical() {
        let p = ZonePartition::from_labels(&[5, 2, 5, 9]);
        assert_eq!(p.zones, vec![vec![0, 2], vec![1], vec![3]]);
        assert_eq!(p.labels, vec![0, 1, 0, 2]);
        assert!(p.is_valid());
    }
}
