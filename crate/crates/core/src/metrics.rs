//! Ensemble comparison: alignment, RMSF, pairwise RMSD, PCA, Gaussian
//! 2-Wasserstein distances and per-target / corpus reports.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;

use crate::codebook::orient;
use crate::ensemble::{Ensemble, Residue};
use crate::error::{Error, Result};
use crate::geom::{kabsch_superpose, rmsd_aligned, rmsd_raw, Chain, Point};

const ALIGN_MAX_ITERATIONS: usize = 10;
const ALIGN_TOLERANCE: f64 = 1e-6;

/// Estimator used for W2 in reports.
pub const W2_ESTIMATOR: &str = "gaussian_closed_form";
/// How per-target pairwise RMSDs are summarised before cross-target correlation.
pub const PAIRWISE_RMSD_AGGREGATE: &str = "mean";
pub const DEFAULT_PCA_COMPONENTS: usize = 2;

fn mean_structure(members: &[Vec<Point>]) -> Vec<Point> {
    let l = members[0].len();
    let t = members.len() as f64;
    (0..l)
        .map(|i| members.iter().fold(Point::zeros(), |acc, m| acc + m[i]) / t)
        .collect()
}

fn superpose_onto(member: &[Point], target: &[Point]) -> Result<Vec<Point>> {
    Ok(kabsch_superpose(member, target)?.apply_all(member))
}

/// Iterative mean alignment: fit every member onto member 0, then repeatedly
/// onto the running mean until the mean moves less than 1e-6 Å (RMSD) or
/// after 10 rounds.
pub fn align_ensemble(e: &Ensemble) -> Result<Ensemble> {
    let members: Vec<&[Point]> = e.conformations().iter().map(Chain::coords).collect();
    let first = members[0];
    let mut aligned: Vec<Vec<Point>> = members
        .par_iter()
        .map(|m| superpose_onto(m, first))
        .collect::<Result<_>>()?;
    let mut mean = mean_structure(&aligned);
    for _ in 0..ALIGN_MAX_ITERATIONS {
        aligned = members
            .par_iter()
            .map(|m| superpose_onto(m, &mean))
            .collect::<Result<_>>()?;
        let next = mean_structure(&aligned);
        let moved = rmsd_raw(&next, &mean)?;
        mean = next;
        if moved < ALIGN_TOLERANCE {
            break;
        }
    }
    let chains = aligned
        .into_iter()
        .zip(e.conformations())
        .map(|(coords, c)| Chain::new(c.label(), coords))
        .collect::<Result<Vec<_>>>()?;
    e.with_conformations(chains, e.source())
}

pub fn mean_coords(e: &Ensemble) -> Vec<Point> {
    let members: Vec<Vec<Point>> = e.conformations().iter().map(|c| c.coords().to_vec()).collect();
    mean_structure(&members)
}

/// Per-residue root-mean-square fluctuation about the ensemble mean. The
/// ensemble is expected to be aligned already.
pub fn rmsf(e: &Ensemble) -> Result<Vec<f64>> {
    if e.len() < 2 {
        return Err(Error::SingleConformation);
    }
    let mean = mean_coords(e);
    let t = e.len() as f64;
    Ok((0..e.residue_count())
        .map(|i| {
            let ss: f64 = e.conformations().iter().map(|c| (c.coords()[i] - mean[i]).norm_squared()).sum();
            (ss / t).sqrt()
        })
        .collect())
}

/// Sample Pearson correlation. Constant inputs are an error, never 0.
pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::MismatchedLengths { left: a.len(), right: b.len() });
    }
    if a.len() < 2 {
        return Err(Error::ConstantInput);
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::ConstantInput);
    }
    Ok((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

/// Mean RMSD over all unordered member pairs, each pair superposed on its own.
pub fn mean_pairwise_rmsd(e: &Ensemble) -> Result<f64> {
    let t = e.len();
    if t < 2 {
        return Err(Error::SingleConformation);
    }
    let pairs: Vec<(usize, usize)> = (0..t).flat_map(|i| (i + 1..t).map(move |j| (i, j))).collect();
    let members = e.conformations();
    let values: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| rmsd_aligned(&members[i], &members[j]))
        .collect::<Result<_>>()?;
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

/// Principal components of flattened `3L` member coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Pca {
    pub mean: Vec<f64>,
    /// Orthonormal rows of length `3L`, by decreasing eigenvalue.
    pub components: Vec<Vec<f64>>,
    /// Sample-covariance eigenvalues (Å²), non-increasing.
    pub eigenvalues: Vec<f64>,
}

impl Pca {
    pub fn project(&self, chain: &Chain) -> Vec<f64> {
        let flat = flatten(chain);
        self.components
            .iter()
            .map(|c| c.iter().zip(&flat).zip(&self.mean).map(|((v, x), m)| v * (x - m)).sum())
            .collect()
    }
}

fn flatten(chain: &Chain) -> Vec<f64> {
    chain.coords().iter().flat_map(|p| [p.x, p.y, p.z]).collect()
}

pub fn pca_fit(e: &Ensemble, n_components: usize) -> Result<Pca> {
    pca_of_chains(e.conformations(), n_components)
}

fn pca_of_chains(chains: &[Chain], n_components: usize) -> Result<Pca> {
    let t = chains.len();
    if t < 3 {
        return Err(Error::TooFewConformations { got: t, needed: 3 });
    }
    let dim = 3 * chains[0].residue_count();
    let k = n_components.min(dim);
    let rows: Vec<Vec<f64>> = chains.iter().map(flatten).collect();
    let mean: Vec<f64> = (0..dim).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / t as f64).collect();
    let x = DMatrix::from_fn(t, dim, |i, j| rows[i][j] - mean[j]);
    let scale = (t - 1) as f64;

    let (mut eigenvalues, mut components): (Vec<f64>, Vec<Vec<f64>>) = if t < dim {
        // Eigenvectors of the T x T Gram matrix map onto those of the covariance.
        let gram = &x * x.transpose();
        let eig = SymmetricEigen::new(gram);
        let order = descending(&eig.eigenvalues);
        let top = eig.eigenvalues[order[0]].max(0.0);
        let mut values = Vec::new();
        let mut vectors = Vec::new();
        for &i in order.iter().take(k) {
            let mu = eig.eigenvalues[i].max(0.0);
            if mu <= 1e-12 * top || mu == 0.0 {
                break;
            }
            let v = x.transpose() * eig.eigenvectors.column(i);
            let norm = v.norm();
            values.push(mu / scale);
            vectors.push(v.iter().map(|a| a / norm).collect());
        }
        (values, vectors)
    } else {
        let cov = x.transpose() * &x / scale;
        let eig = SymmetricEigen::new(cov);
        let order = descending(&eig.eigenvalues);
        order
            .iter()
            .take(k)
            .map(|&i| (eig.eigenvalues[i].max(0.0), eig.eigenvectors.column(i).iter().copied().collect()))
            .unzip()
    };
    // Zero-variance directions: complete to an orthonormal set.
    let mut basis = 0;
    while components.len() < k {
        let mut v = vec![0.0; dim];
        v[basis] = 1.0;
        basis += 1;
        for c in &components {
            let dot: f64 = v.iter().zip(c).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(c).for_each(|(a, b)| *a -= dot * b);
        }
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm > 1e-6 {
            components.push(v.iter().map(|a| a / norm).collect());
            eigenvalues.push(0.0);
        }
    }
    let components = components.into_iter().map(orient).collect();
    Ok(Pca { mean, components, eigenvalues })
}

fn descending(values: &DVector<f64>) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    order
}

/// Sample mean and covariance (`1 / (n - 1)`) of points given as rows.
pub fn gaussian_fit(points: &[Vec<f64>]) -> (Vec<f64>, DMatrix<f64>) {
    let n = points.len();
    let k = points.first().map_or(0, Vec::len);
    let mean: Vec<f64> = (0..k).map(|j| points.iter().map(|p| p[j]).sum::<f64>() / n as f64).collect();
    let mut cov = DMatrix::zeros(k, k);
    for p in points {
        let d = DVector::from_iterator(k, p.iter().zip(&mean).map(|(x, m)| x - m));
        cov += &d * d.transpose();
    }
    (mean, cov / (n.max(2) - 1) as f64)
}

fn psd_eigen(cov: &DMatrix<f64>) -> Result<SymmetricEigen<f64, nalgebra::Dyn>> {
    let asym = (cov - cov.transpose()).abs().max();
    if asym > 1e-9 * cov.abs().max().max(1.0) {
        return Err(Error::NonSpdCovariance(f64::NAN));
    }
    let eig = SymmetricEigen::new(cov.clone());
    let min = eig.eigenvalues.min();
    if min < -1e-10 {
        return Err(Error::NonSpdCovariance(min));
    }
    Ok(eig)
}

fn sqrtm(eig: &SymmetricEigen<f64, nalgebra::Dyn>) -> DMatrix<f64> {
    let s = DMatrix::from_diagonal(&eig.eigenvalues.map(|v| v.max(0.0).sqrt()));
    &eig.eigenvectors * s * eig.eigenvectors.transpose()
}

/// Closed-form 2-Wasserstein distance between two Gaussians:
/// `W2^2 = |m1 - m2|^2 + tr(S1 + S2 - 2 (S2^(1/2) S1 S2^(1/2))^(1/2))`.
pub fn w2_gaussian(mean1: &[f64], cov1: &DMatrix<f64>, mean2: &[f64], cov2: &DMatrix<f64>) -> Result<f64> {
    let k = mean1.len();
    for (what, n) in [(mean2.len(), k), (cov1.nrows(), k), (cov1.ncols(), k), (cov2.nrows(), k), (cov2.ncols(), k)] {
        if what != n {
            return Err(Error::DimensionMismatch { expected: n, got: what });
        }
    }
    let _ = psd_eigen(cov1)?;
    let e2 = psd_eigen(cov2)?;
    if mean1 == mean2 && cov1 == cov2 {
        return Ok(0.0);
    }
    let s2 = sqrtm(&e2);
    let inner = &s2 * cov1 * &s2;
    let inner = (&inner + inner.transpose()) * 0.5;
    let cross: f64 = SymmetricEigen::new(inner).eigenvalues.iter().map(|v| v.max(0.0).sqrt()).sum();
    let dm: f64 = mean1.iter().zip(mean2).map(|(a, b)| (a - b).powi(2)).sum();
    Ok((dm + cov1.trace() + cov2.trace() - 2.0 * cross).max(0.0).sqrt())
}

/// Evaluation knobs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalConfig {
    pub n_components: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { n_components: DEFAULT_PCA_COMPONENTS }
    }
}

/// Generated-vs-reference metrics for one target. `None` marks a metric
/// that is undefined for this input (e.g. correlation of a constant profile).
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleReport {
    pub target: String,
    pub per_target_rmsf_r: Option<f64>,
    pub mean_pairwise_rmsd_generated: f64,
    pub mean_pairwise_rmsd_reference: f64,
    pub md_pca_w2: Option<f64>,
    pub joint_pca_w2: Option<f64>,
    /// Reference residue ids (`seq` plus insertion code) indexing the RMSF vectors.
    pub residue_ids: Vec<String>,
    pub rmsf_generated: Vec<f64>,
    pub rmsf_reference: Vec<f64>,
}

fn pca_w2(basis_members: &[Chain], generated: &[Chain], reference: &[Chain], k: usize) -> Result<f64> {
    let pca = pca_of_chains(basis_members, k)?;
    let project = |cs: &[Chain]| cs.iter().map(|c| pca.project(c)).collect::<Vec<_>>();
    let (mg, cg) = gaussian_fit(&project(generated));
    let (mr, cr) = gaussian_fit(&project(reference));
    w2_gaussian(&mg, &cg, &mr, &cr)
}

fn residue_id(r: &Residue) -> String {
    format!("{}{}", r.seq, r.icode.to_string().trim())
}

pub fn evaluate_ensembles(generated: &Ensemble, reference: &Ensemble) -> Result<EnsembleReport> {
    evaluate_ensembles_with(generated, reference, &EvalConfig::default())
}

pub fn evaluate_ensembles_with(generated: &Ensemble, reference: &Ensemble, cfg: &EvalConfig) -> Result<EnsembleReport> {
    if generated.residue_count() != reference.residue_count() {
        return Err(Error::MismatchedLengths { left: generated.residue_count(), right: reference.residue_count() });
    }
    for e in [generated, reference] {
        if e.len() < 3 {
            return Err(Error::TooFewConformations { got: e.len(), needed: 3 });
        }
    }
    let reference = align_ensemble(reference)?;
    let generated = align_ensemble(generated)?;
    // Bring the generated ensemble into the reference frame, mean onto mean.
    let to_ref = kabsch_superpose(&mean_coords(&generated), &mean_coords(&reference))?;
    let moved = generated
        .conformations()
        .iter()
        .map(|c| c.transformed(&to_ref.rotation, &to_ref.translation))
        .collect();
    let generated = generated.with_conformations(moved, generated.source())?;

    let rmsf_generated = rmsf(&generated)?;
    let rmsf_reference = rmsf(&reference)?;
    let gen = generated.conformations();
    let refs = reference.conformations();
    let joint: Vec<Chain> = refs.iter().chain(gen).cloned().collect();

    Ok(EnsembleReport {
        target: String::new(),
        per_target_rmsf_r: pearson(&rmsf_generated, &rmsf_reference).ok(),
        mean_pairwise_rmsd_generated: mean_pairwise_rmsd(&generated)?,
        mean_pairwise_rmsd_reference: mean_pairwise_rmsd(&reference)?,
        md_pca_w2: pca_w2(refs, gen, refs, cfg.n_components).ok(),
        joint_pca_w2: pca_w2(&joint, gen, refs, cfg.n_components).ok(),
        residue_ids: reference.residues().iter().map(residue_id).collect(),
        rmsf_generated,
        rmsf_reference,
    })
}

/// Corpus-level summary of per-target reports. Correlations across targets
/// need at least two targets and are `None` otherwise.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusReport {
    pub n_targets: usize,
    pub median_per_target_rmsf_r: Option<f64>,
    pub pairwise_rmsd_r: Option<f64>,
    pub global_rmsf_r: Option<f64>,
    pub median_md_pca_w2: Option<f64>,
    pub median_joint_pca_w2: Option<f64>,
}

/// Median of the defined values; `None` when there are none.
pub fn median(values: impl IntoIterator<Item = Option<f64>>) -> Option<f64> {
    let mut v: Vec<f64> = values.into_iter().flatten().collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

pub fn corpus_report(reports: &[EnsembleReport]) -> Result<CorpusReport> {
    if reports.is_empty() {
        return Err(Error::EmptyInput);
    }
    let multi = reports.len() >= 2;
    let pairwise_rmsd_r = multi
        .then(|| {
            let g: Vec<f64> = reports.iter().map(|r| r.mean_pairwise_rmsd_generated).collect();
            let r: Vec<f64> = reports.iter().map(|r| r.mean_pairwise_rmsd_reference).collect();
            pearson(&g, &r).ok()
        })
        .flatten();
    let global_rmsf_r = multi
        .then(|| {
            let g: Vec<f64> = reports.iter().flat_map(|r| r.rmsf_generated.iter().copied()).collect();
            let r: Vec<f64> = reports.iter().flat_map(|r| r.rmsf_reference.iter().copied()).collect();
            pearson(&g, &r).ok()
        })
        .flatten();
    Ok(CorpusReport {
        n_targets: reports.len(),
        median_per_target_rmsf_r: median(reports.iter().map(|r| r.per_target_rmsf_r)),
        pairwise_rmsd_r,
        global_rmsf_r,
        median_md_pca_w2: median(reports.iter().map(|r| r.md_pca_w2)),
        median_joint_pca_w2: median(reports.iter().map(|r| r.joint_pca_w2)),
    })
}
