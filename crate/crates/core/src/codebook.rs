//! Codebooks of latent vectors: training, nearest-code quantization, pairwise
//! distance analysis and synonym dictionaries.

use std::collections::{BTreeMap, HashMap, HashSet};

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geom::Descriptor;

/// Synonym threshold used when none is given.
pub const DEFAULT_TAU: f64 = 10.0;

/// `m` latent vectors of dimension `d`, row-major. Rows are unique and finite.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    m: usize,
    d: usize,
    data: Vec<f64>,
    id: String,
}

fn canonical_bits(v: f64) -> u64 {
    // -0.0 and 0.0 are the same code value.
    if v == 0.0 { 0 } else { v.to_bits() }
}

impl Codebook {
    pub fn from_flat(m: usize, d: usize, data: Vec<f64>) -> Result<Self> {
        if m == 0 {
            return Err(Error::TooFewCodes { got: 0, min: 1 });
        }
        if d == 0 {
            return Err(Error::EmptyDimension);
        }
        if data.len() != m * d {
            return Err(Error::DimensionMismatch { expected: m * d, got: data.len() });
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteCode { row: i / d, col: i % d });
        }
        let mut seen: HashMap<Vec<u64>, usize> = HashMap::with_capacity(m);
        for (k, row) in data.chunks_exact(d).enumerate() {
            let key: Vec<u64> = row.iter().map(|&v| canonical_bits(v)).collect();
            if let Some(&first) = seen.get(&key) {
                return Err(Error::DuplicateRows { first, second: k });
            }
            seen.insert(key, k);
        }
        let id = fingerprint(m, d, &data);
        Ok(Self { m, d, data, id })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * d);
        for (k, r) in rows.iter().enumerate() {
            if r.len() != d {
                return Err(Error::RaggedRows { row: k, expected: d, found: r.len() });
            }
            data.extend_from_slice(r);
        }
        Self::from_flat(rows.len(), d, data)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// Content fingerprint binding token sequences to this codebook.
    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.data[k * self.d..(k + 1) * self.d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.d)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }
}

fn fingerprint(m: usize, d: usize, data: &[f64]) -> String {
    let mut h = Sha256::new();
    h.update((m as u64).to_le_bytes());
    h.update((d as u64).to_le_bytes());
    for v in data {
        h.update(canonical_bits(*v).to_le_bytes());
    }
    format!("cb-{}", &hex::encode(h.finalize())[..12])
}

pub(crate) fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    squared_distance(a, b).sqrt()
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Symmetric `m x m` matrix of Euclidean distances between code vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    m: usize,
    data: Vec<f64>,
}

impl DistanceMatrix {
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn get(&self, i: usize, k: usize) -> f64 {
        self.data[i * self.m + k]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.m..(i + 1) * self.m]
    }

    /// Distances for all unordered pairs `i < k`, row by row.
    pub fn off_diagonal(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.m * self.m.saturating_sub(1) / 2);
        for i in 0..self.m {
            out.extend_from_slice(&self.row(i)[i + 1..]);
        }
        out
    }
}

pub fn pairwise_distances(cb: &Codebook) -> DistanceMatrix {
    let m = cb.m();
    // Each unordered pair is evaluated once, in the upper triangle.
    let upper: Vec<Vec<f64>> = (0..m)
        .into_par_iter()
        .map(|i| (i + 1..m).map(|k| euclidean(cb.row(i), cb.row(k))).collect())
        .collect();
    let mut data = vec![0.0; m * m];
    for (i, row) in upper.iter().enumerate() {
        for (off, &v) in row.iter().enumerate() {
            let k = i + 1 + off;
            data[i * m + k] = v;
            data[k * m + i] = v;
        }
    }
    DistanceMatrix { m, data }
}

/// Per-token sets of interchangeable tokens: `i` is a synonym of `k` when
/// their code vectors are closer than `tau`. Every token is its own synonym.
#[derive(Debug, Clone, PartialEq)]
pub struct SynonymDict {
    tau: f64,
    codebook_id: String,
    entries: Vec<Vec<u32>>,
}

impl SynonymDict {
    /// Assembles a dictionary from explicit sets, enforcing self-inclusion,
    /// ordering and symmetry.
    pub fn from_entries(tau: f64, codebook_id: impl Into<String>, mut entries: Vec<Vec<u32>>) -> Result<Self> {
        check_tau(tau)?;
        let m = entries.len();
        for (k, set) in entries.iter_mut().enumerate() {
            if let Some(&bad) = set.iter().find(|&&t| t as usize >= m) {
                return Err(Error::TokenOutOfRange { position: k, token: bad, m });
            }
            set.push(k as u32);
            set.sort_unstable();
            set.dedup();
        }
        for (k, set) in entries.iter().enumerate() {
            for &i in set {
                if entries[i as usize].binary_search(&(k as u32)).is_err() {
                    return Err(Error::InvalidOption(format!(
                        "synonym sets are not symmetric: {i} in S_{k} but {k} not in S_{i}"
                    )));
                }
            }
        }
        Ok(Self { tau, codebook_id: codebook_id.into(), entries })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn codebook_id(&self) -> &str {
        &self.codebook_id
    }

    pub fn m(&self) -> usize {
        self.entries.len()
    }

    pub fn synonyms(&self, k: usize) -> &[u32] {
        &self.entries[k]
    }

    pub fn entries(&self) -> &[Vec<u32>] {
        &self.entries
    }
}

fn check_tau(tau: f64) -> Result<()> {
    if tau.is_nan() || tau < 0.0 {
        return Err(Error::NegativeTau(tau));
    }
    Ok(())
}

pub fn build_synonym_dict(cb: &Codebook, tau: f64) -> Result<SynonymDict> {
    check_tau(tau)?;
    let m = cb.m();
    let entries = (0..m)
        .into_par_iter()
        .map(|k| {
            (0..m)
                .filter(|&i| i == k || euclidean(cb.row(i), cb.row(k)) < tau)
                .map(|i| i as u32)
                .collect()
        })
        .collect();
    Ok(SynonymDict { tau, codebook_id: cb.id().to_string(), entries })
}

/// Same as [`build_synonym_dict`], reusing precomputed distances.
pub fn synonym_dict_from_distances(cb: &Codebook, distances: &DistanceMatrix, tau: f64) -> Result<SynonymDict> {
    check_tau(tau)?;
    if distances.m() != cb.m() {
        return Err(Error::DimensionMismatch { expected: cb.m(), got: distances.m() });
    }
    let entries = (0..cb.m())
        .map(|k| {
            distances
                .row(k)
                .iter()
                .enumerate()
                .filter(|&(i, &d)| i == k || d < tau)
                .map(|(i, _)| i as u32)
                .collect()
        })
        .collect();
    Ok(SynonymDict { tau, codebook_id: cb.id().to_string(), entries })
}

/// Index of the nearest code vector; ties go to the lowest index.
pub fn quantize(values: &[f64], cb: &Codebook) -> Result<usize> {
    if values.len() != cb.d() {
        return Err(Error::DimensionMismatch { expected: cb.d(), got: values.len() });
    }
    Ok(nearest(values, cb.rows()).0)
}

pub fn quantize_descriptor(desc: &Descriptor, cb: &Codebook) -> Result<usize> {
    quantize(&desc.values, cb)
}

fn nearest<'a>(x: &[f64], rows: impl Iterator<Item = &'a [f64]>) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (k, row) in rows.enumerate() {
        let d = squared_distance(x, row);
        if d < best.1 {
            best = (k, d);
        }
    }
    best
}

struct UnionFind {
    parent: Vec<usize>,
    rank: Vec<u8>,
    components: usize,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self { parent: (0..n).collect(), rank: vec![0; n], components: n }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
        self.components -= 1;
    }
}

/// Quantile levels reported for the off-diagonal distance distribution.
pub const QUANTILE_LEVELS: [f64; 11] = [0.0, 0.01, 0.05, 0.10, 0.25, 0.50, 0.75, 0.90, 0.95, 0.99, 1.0];

#[derive(Debug, Clone, PartialEq)]
pub struct RedundancyStats {
    pub tau: f64,
    pub m: usize,
    /// Fraction of tokens with at least one synonym other than themselves.
    pub synonym_fraction: f64,
    /// Connected components of the graph joining codes closer than `tau`.
    pub component_count: usize,
    /// `(|S_k|, number of tokens with that set size)`, ascending by size.
    pub set_size_histogram: Vec<(usize, usize)>,
    /// `(level, distance)` over all unordered code pairs.
    pub distance_quantiles: Vec<(f64, f64)>,
}

/// Linear-interpolation quantile of already sorted data.
pub fn quantile_sorted(sorted: &[f64], level: f64) -> f64 {
    let pos = level * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub fn redundancy_stats(cb: &Codebook, tau: f64) -> Result<RedundancyStats> {
    let distances = pairwise_distances(cb);
    redundancy_stats_from(cb, &distances, tau)
}

pub fn redundancy_stats_from(cb: &Codebook, distances: &DistanceMatrix, tau: f64) -> Result<RedundancyStats> {
    let dict = synonym_dict_from_distances(cb, distances, tau)?;
    let m = cb.m();

    let mut uf = UnionFind::new(m);
    for (k, set) in dict.entries().iter().enumerate() {
        for &i in set {
            if (i as usize) > k {
                uf.union(k, i as usize);
            }
        }
    }

    let with_synonym = dict.entries().iter().filter(|s| s.len() > 1).count();
    let mut hist: BTreeMap<usize, usize> = BTreeMap::new();
    for s in dict.entries() {
        *hist.entry(s.len()).or_default() += 1;
    }

    let mut off = distances.off_diagonal();
    off.par_sort_unstable_by(f64::total_cmp);
    let distance_quantiles = if off.is_empty() {
        Vec::new()
    } else {
        QUANTILE_LEVELS.iter().map(|&q| (q, quantile_sorted(&off, q))).collect()
    };

    Ok(RedundancyStats {
        tau,
        m,
        synonym_fraction: with_synonym as f64 / m as f64,
        component_count: uf.components,
        set_size_histogram: hist.into_iter().collect(),
        distance_quantiles,
    })
}

/// Outcome of k-means codebook training.
#[derive(Debug, Clone)]
pub struct KMeansFit {
    pub codebook: Codebook,
    /// Within-cluster sum of squares after every update step.
    pub inertia: Vec<f64>,
    pub cluster_sizes: Vec<usize>,
    pub iterations: usize,
    pub converged: bool,
}

const MAX_RESEED_ROUNDS: usize = 16;

/// Lloyd's k-means with k-means++ seeding. Empty clusters and duplicate
/// centroids are re-seeded from the point farthest from its centroid.
/// Deterministic for a fixed seed and sample order.
pub fn train_codebook<S>(samples: &[S], m: usize, max_iters: usize, seed: u64) -> Result<KMeansFit>
where
    S: AsRef<[f64]> + Sync,
{
    let n = samples.len();
    if m == 0 {
        return Err(Error::TooFewCodes { got: 0, min: 1 });
    }
    if n < m {
        return Err(Error::TooFewSamples { got: n, needed: m });
    }
    let d = samples[0].as_ref().len();
    if d == 0 {
        return Err(Error::EmptyDimension);
    }
    if let Some(s) = samples.iter().find(|s| s.as_ref().len() != d) {
        return Err(Error::DimensionMismatch { expected: d, got: s.as_ref().len() });
    }
    let distinct: HashSet<Vec<u64>> = samples
        .iter()
        .map(|s| s.as_ref().iter().map(|&v| canonical_bits(v)).collect())
        .collect();
    if distinct.len() < m {
        return Err(Error::TooFewSamples { got: distinct.len(), needed: m });
    }

    let x = |i: usize| samples[i].as_ref();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers = kmeans_plus_plus(samples, m, &mut rng);

    let mut assign = vec![usize::MAX; n];
    let mut inertia = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    let mut reseeds = 0;
    loop {
        while iterations < max_iters {
            iterations += 1;
            let next: Vec<usize> = (0..n)
                .into_par_iter()
                .map(|i| nearest(x(i), centers.chunks_exact(d)).0)
                .collect();
            let changed = next != assign;
            assign = next;
            if !changed {
                converged = true;
                break;
            }
            update_centers(samples, &mut assign, &mut centers, m);
            inertia.push(total_inertia(samples, &assign, &centers));
        }
        let Some(dup) = duplicate_center(&centers, d) else { break };
        if reseeds == MAX_RESEED_ROUNDS {
            return Err(Error::TooFewSamples { got: distinct.len(), needed: m });
        }
        reseeds += 1;
        // Move the duplicate onto the worst-fit point not already a centre.
        let taken: HashSet<Vec<u64>> = centers
            .chunks_exact(d)
            .map(|c| c.iter().map(|&v| canonical_bits(v)).collect())
            .collect();
        let far = (0..n)
            .filter(|&i| !taken.contains(&x(i).iter().map(|&v| canonical_bits(v)).collect::<Vec<_>>()))
            .max_by(|&a, &b| {
                let da = squared_distance(x(a), &centers[assign[a] * d..(assign[a] + 1) * d]);
                let db = squared_distance(x(b), &centers[assign[b] * d..(assign[b] + 1) * d]);
                da.total_cmp(&db).then(b.cmp(&a))
            })
            .expect("more distinct samples than centres");
        centers[dup * d..(dup + 1) * d].copy_from_slice(x(far));
        assign.fill(usize::MAX);
        converged = false;
        // Allow the re-seeded centres a few iterations beyond the budget.
        iterations = iterations.min(max_iters.saturating_sub(10));
    }

    let mut cluster_sizes = vec![0; m];
    for &a in &assign {
        if a < m {
            cluster_sizes[a] += 1;
        }
    }
    Ok(KMeansFit { codebook: Codebook::from_flat(m, d, centers)?, inertia, cluster_sizes, iterations, converged })
}

fn kmeans_plus_plus<S: AsRef<[f64]>>(samples: &[S], m: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let n = samples.len();
    let d = samples[0].as_ref().len();
    let mut centers = Vec::with_capacity(m * d);
    let first = rng.random_range(0..n);
    centers.extend_from_slice(samples[first].as_ref());
    let mut d2: Vec<f64> = samples.iter().map(|s| squared_distance(s.as_ref(), &centers[..d])).collect();
    while centers.len() < m * d {
        let total: f64 = d2.iter().sum();
        let target = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut pick = None;
        for (i, &w) in d2.iter().enumerate() {
            if w <= 0.0 {
                continue;
            }
            acc += w;
            pick = Some(i);
            if acc > target {
                break;
            }
        }
        let pick = pick.expect("a sample away from every chosen centre");
        let start = centers.len();
        centers.extend_from_slice(samples[pick].as_ref());
        for (i, s) in samples.iter().enumerate() {
            d2[i] = d2[i].min(squared_distance(s.as_ref(), &centers[start..start + d]));
        }
    }
    centers
}

fn update_centers<S: AsRef<[f64]>>(samples: &[S], assign: &mut [usize], centers: &mut [f64], m: usize) {
    let d = centers.len() / m;
    let recompute = |assign: &[usize], centers: &mut [f64]| -> Vec<usize> {
        let mut sums = vec![0.0; m * d];
        let mut counts = vec![0usize; m];
        for (s, &a) in samples.iter().zip(assign.iter()) {
            counts[a] += 1;
            for (acc, v) in sums[a * d..(a + 1) * d].iter_mut().zip(s.as_ref()) {
                *acc += v;
            }
        }
        for k in 0..m {
            if counts[k] > 0 {
                for j in 0..d {
                    centers[k * d + j] = sums[k * d + j] / counts[k] as f64;
                }
            }
        }
        counts
    };
    let mut counts = recompute(assign, centers);
    let empty: Vec<usize> = (0..m).filter(|&k| counts[k] == 0).collect();
    if empty.is_empty() {
        return;
    }
    for k in empty {
        let far = (0..samples.len())
            .filter(|&i| counts[assign[i]] > 1)
            .max_by(|&a, &b| {
                let da = squared_distance(samples[a].as_ref(), &centers[assign[a] * d..(assign[a] + 1) * d]);
                let db = squared_distance(samples[b].as_ref(), &centers[assign[b] * d..(assign[b] + 1) * d]);
                da.total_cmp(&db).then(b.cmp(&a))
            });
        let Some(far) = far else { break };
        counts[assign[far]] -= 1;
        counts[k] += 1;
        assign[far] = k;
        centers[k * d..(k + 1) * d].copy_from_slice(samples[far].as_ref());
    }
    recompute(assign, centers);
}

fn total_inertia<S: AsRef<[f64]>>(samples: &[S], assign: &[usize], centers: &[f64]) -> f64 {
    let d = samples[0].as_ref().len();
    samples
        .iter()
        .zip(assign)
        .map(|(s, &a)| squared_distance(s.as_ref(), &centers[a * d..(a + 1) * d]))
        .sum()
}

fn duplicate_center(centers: &[f64], d: usize) -> Option<usize> {
    let mut seen = HashSet::new();
    centers
        .chunks_exact(d)
        .position(|c| !seen.insert(c.iter().map(|&v| canonical_bits(v)).collect::<Vec<_>>()))
}

/// Codebook projected onto its top two principal axes.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub coords: Vec<[f64; 2]>,
    /// Fraction of total variance along each axis, non-increasing.
    pub explained: [f64; 2],
}

/// Principal axes of the sample covariance of `rows` (n x d), sorted by
/// decreasing eigenvalue, each oriented so its largest-magnitude loading is
/// positive.
pub(crate) fn principal_axes(rows: &DMatrix<f64>) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = rows.nrows();
    let d = rows.ncols();
    let mean = rows.row_mean();
    let mut centered = rows.clone();
    for mut r in centered.row_iter_mut() {
        r -= &mean;
    }
    let cov = centered.transpose() * &centered / (n.max(2) - 1) as f64;
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let values = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();
    let axes = order
        .iter()
        .map(|&i| orient(eig.eigenvectors.column(i).iter().copied().collect()))
        .collect();
    (values, axes)
}

/// Flips `v` so its largest-magnitude entry (first on ties) is positive.
pub(crate) fn orient(mut v: Vec<f64>) -> Vec<f64> {
    let mut idx = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[idx].abs() {
            idx = i;
        }
    }
    if v[idx] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
    v
}

pub fn project_2d(cb: &Codebook) -> Result<Projection> {
    if cb.m() < 3 {
        return Err(Error::TooFewCodes { got: cb.m(), min: 3 });
    }
    let rows = DMatrix::from_row_slice(cb.m(), cb.d(), cb.as_flat());
    let (values, axes) = principal_axes(&rows);
    let total: f64 = values.iter().sum();
    let frac = |i: usize| if total > 0.0 { values.get(i).copied().unwrap_or(0.0) / total } else { 0.0 };
    let zero = vec![0.0; cb.d()];
    let a0 = &axes[0];
    let a1 = axes.get(1).unwrap_or(&zero);
    let mean: Vec<f64> = (0..cb.d()).map(|j| rows.column(j).mean()).collect();
    let coords = cb
        .rows()
        .map(|r| {
            let c: Vec<f64> = r.iter().zip(&mean).map(|(x, mu)| x - mu).collect();
            let dot = |a: &[f64]| c.iter().zip(a).map(|(x, y)| x * y).sum::<f64>();
            [dot(a0), dot(a1)]
        })
        .collect();
    Ok(Projection { coords, explained: [frac(0), frac(1)] })
}
