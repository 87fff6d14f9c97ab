//! Cα-trace geometry: superposition, RMSD, TM-score, local fragment
//! descriptors and internal-coordinate chain reconstruction.
//!
//! Angles are radians throughout.

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};

pub type Point = Vector3<f64>;

/// Ordered Cα coordinates (Å) of one protein conformation.
#[derive(Debug, Clone, PartialEq)]
pub struct Chain {
    label: String,
    coords: Vec<Point>,
}

impl Chain {
    /// Builds a chain, rejecting non-finite coordinates. Length requirements are
    /// enforced by the operations that need them.
    pub fn new(label: impl Into<String>, coords: Vec<Point>) -> Result<Self> {
        if let Some(i) = coords.iter().position(|p| !p.iter().all(|v| v.is_finite())) {
            return Err(Error::NonFiniteCoordinate(i));
        }
        Ok(Self { label: label.into(), coords })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn set_label(&mut self, label: impl Into<String>) {
        self.label = label.into();
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn residue_count(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[Point] {
        &self.coords
    }

    pub fn into_coords(self) -> Vec<Point> {
        self.coords
    }

    /// Applies `x -> rotation * x + translation` to every residue.
    pub fn transformed(&self, rotation: &Matrix3<f64>, translation: &Point) -> Chain {
        Chain {
            label: self.label.clone(),
            coords: self.coords.iter().map(|p| rotation * p + translation).collect(),
        }
    }

    /// Flags chain breaks: every consecutive Cα–Cα distance must lie in
    /// (`min`, `max`) Å.
    pub fn check_bonds(&self, min: f64, max: f64) -> Result<()> {
        for (i, w) in self.coords.windows(2).enumerate() {
            let d = (w[1] - w[0]).norm();
            if !(d > min && d < max) {
                return Err(Error::BrokenChain { index: i, distance: d });
            }
        }
        Ok(())
    }
}

/// Bounds used to flag broken chains after parsing.
pub const MIN_CA_DISTANCE: f64 = 0.5;
pub const MAX_CA_DISTANCE: f64 = 10.0;

/// Proper rigid transform `x -> rotation * x + translation` and the RMSD it
/// achieves.
#[derive(Debug, Clone, PartialEq)]
pub struct Superposition {
    pub rotation: Matrix3<f64>,
    pub translation: Point,
    pub rmsd: f64,
}

impl Superposition {
    pub fn apply(&self, p: &Point) -> Point {
        self.rotation * p + self.translation
    }

    pub fn apply_all(&self, points: &[Point]) -> Vec<Point> {
        points.iter().map(|p| self.apply(p)).collect()
    }
}

pub fn centroid(points: &[Point]) -> Point {
    let sum = points.iter().fold(Point::zeros(), |acc, p| acc + p);
    sum / points.len() as f64
}

/// Plain coordinate RMSD without any fitting.
pub fn rmsd_raw(a: &[Point], b: &[Point]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::MismatchedLengths { left: a.len(), right: b.len() });
    }
    if a.is_empty() {
        return Ok(0.0);
    }
    let ss: f64 = a.iter().zip(b).map(|(p, q)| (p - q).norm_squared()).sum();
    Ok((ss / a.len() as f64).sqrt())
}

/// Optimal proper rotation and translation carrying `mobile` onto `target`
/// (Kabsch). Reflections are excluded by flipping the singular vector of the
/// smallest singular value when the unconstrained optimum is improper.
pub fn kabsch_superpose(mobile: &[Point], target: &[Point]) -> Result<Superposition> {
    if mobile.len() != target.len() {
        return Err(Error::MismatchedLengths { left: mobile.len(), right: target.len() });
    }
    if mobile.len() < 3 {
        return Err(Error::DegenerateGeometry(format!(
            "{} points cannot define a rotation",
            mobile.len()
        )));
    }
    let cm = centroid(mobile);
    let ct = centroid(target);
    let mut h = Matrix3::<f64>::zeros();
    for (m, t) in mobile.iter().zip(target) {
        h += (m - cm) * (t - ct).transpose();
    }

    let svd = h.svd(true, true);
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Err(Error::DegenerateGeometry("SVD failed to converge".into())),
    };
    let s = svd.singular_values;
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| s[b].total_cmp(&s[a]));
    let (s_max, s_mid) = (s[order[0]], s[order[1]]);
    if s_max <= f64::MIN_POSITIVE || s_mid <= 1e-10 * s_max {
        return Err(Error::DegenerateGeometry(
            "covariance has rank < 2 (collinear or coincident points)".into(),
        ));
    }

    let v = v_t.transpose();
    let mut d = Matrix3::<f64>::identity();
    if (v * u.transpose()).determinant() < 0.0 {
        d[(order[2], order[2])] = -1.0;
    }
    let rotation = v * d * u.transpose();
    let translation = ct - rotation * cm;

    let ss: f64 = mobile
        .iter()
        .zip(target)
        .map(|(m, t)| (rotation * m + translation - t).norm_squared())
        .sum();
    Ok(Superposition { rotation, translation, rmsd: (ss / mobile.len() as f64).sqrt() })
}

/// RMSD between two chains after optimal superposition.
pub fn rmsd_aligned(a: &Chain, b: &Chain) -> Result<f64> {
    Ok(kabsch_superpose(a.coords(), b.coords())?.rmsd)
}

/// Shortest chain for which the TM-score scale `d0` is positive.
pub const TM_MIN_LENGTH: usize = 19;
const TM_MAX_ITERATIONS: usize = 20;

/// TM-score distance scale `1.24 (L - 15)^(1/3) - 1.8`.
pub fn tm_d0(length: usize) -> f64 {
    1.24 * (length as f64 - 15.0).cbrt() - 1.8
}

fn tm_terms(model: &[Point], reference: &[Point], sup: &Superposition, d0: f64) -> (f64, Vec<f64>) {
    let distances: Vec<f64> = model
        .iter()
        .zip(reference)
        .map(|(m, r)| (sup.apply(m) - r).norm())
        .collect();
    let sum: f64 = distances.iter().map(|d| 1.0 / (1.0 + (d / d0).powi(2))).sum();
    (sum / model.len() as f64, distances)
}

/// TM-score of `model` against `reference` under a fixed superposition.
pub fn tm_score_under(model: &Chain, reference: &Chain, sup: &Superposition) -> Result<f64> {
    let d0 = checked_d0(model, reference)?;
    Ok(tm_terms(model.coords(), reference.coords(), sup, d0).0)
}

fn checked_d0(model: &Chain, reference: &Chain) -> Result<f64> {
    let l = reference.residue_count();
    if model.residue_count() != l {
        return Err(Error::MismatchedLengths { left: model.residue_count(), right: l });
    }
    if l < TM_MIN_LENGTH {
        return Err(Error::ChainTooShort { len: l, min: TM_MIN_LENGTH });
    }
    Ok(tm_d0(l))
}

/// TM-score with identity residue mapping, maximised by iterative Kabsch
/// refits on the residues closer than `d0`.
pub fn tm_score(model: &Chain, reference: &Chain) -> Result<f64> {
    let d0 = checked_d0(model, reference)?;
    let (m, r) = (model.coords(), reference.coords());

    let sup = kabsch_superpose(m, r)?;
    let (mut best, mut distances) = tm_terms(m, r, &sup, d0);
    let mut subset: Vec<usize> = Vec::new();
    for _ in 0..TM_MAX_ITERATIONS {
        let next: Vec<usize> = (0..distances.len()).filter(|&i| distances[i] < d0).collect();
        if next.len() < 3 || next == subset {
            break;
        }
        subset = next;
        let ms: Vec<Point> = subset.iter().map(|&i| m[i]).collect();
        let rs: Vec<Point> = subset.iter().map(|&i| r[i]).collect();
        let Ok(sup) = kabsch_superpose(&ms, &rs) else { break };
        let (score, d) = tm_terms(m, r, &sup, d0);
        best = best.max(score);
        distances = d;
    }
    Ok(best.min(1.0))
}

/// Bond length (Å), bond angle and dihedral (radians) placing one residue
/// relative to the three before it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InternalCoord {
    pub bond: f64,
    pub angle: f64,
    pub dihedral: f64,
}

pub fn bond_angle(a: &Point, b: &Point, c: &Point) -> f64 {
    let u = a - b;
    let v = c - b;
    u.cross(&v).norm().atan2(u.dot(&v))
}

/// Signed dihedral of a-b-c-d in (-π, π].
pub fn dihedral(a: &Point, b: &Point, c: &Point, d: &Point) -> f64 {
    let b1 = b - a;
    let b2 = c - b;
    let b3 = d - c;
    let n1 = b1.cross(&b2);
    let n2 = b2.cross(&b3);
    (b2.norm() * b1.dot(&n2)).atan2(n1.dot(&n2))
}

/// Rotation/translation-invariant description of a window of `w` residues:
/// `w-1` bond lengths, `w-2` bond angles, then `w-3` dihedrals as
/// `(sin, cos)` pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct Descriptor {
    pub values: Vec<f64>,
    pub window: usize,
}

pub const fn descriptor_dim(window: usize) -> usize {
    (window - 1) + (window - 2) + 2 * (window - 3)
}

impl Descriptor {
    pub fn bonds(&self) -> &[f64] {
        &self.values[..self.window - 1]
    }

    pub fn angles(&self) -> &[f64] {
        let start = self.window - 1;
        &self.values[start..start + self.window - 2]
    }

    /// `(sin, cos)` of dihedral `j` (0-based).
    pub fn dihedral_pair(&self, j: usize) -> (f64, f64) {
        let base = (self.window - 1) + (self.window - 2) + 2 * j;
        (self.values[base], self.values[base + 1])
    }
}

pub fn validate_window(window: usize) -> Result<()> {
    if window.is_multiple_of(2) {
        return Err(Error::EvenWindow(window));
    }
    if window < 5 {
        return Err(Error::WindowTooSmall(window));
    }
    Ok(())
}

/// Index of the first residue of the (terminally clamped) window centred on
/// residue `t`.
pub fn window_start(t: usize, len: usize, window: usize) -> usize {
    let h = (window - 1) / 2;
    t.saturating_sub(h).min(len - window)
}

/// One descriptor per residue, from the window of `window` residues centred
/// on it. Windows at the termini are clamped to the first/last `window`
/// residues.
pub fn chain_descriptors(chain: &Chain, window: usize) -> Result<Vec<Descriptor>> {
    validate_window(window)?;
    let p = chain.coords();
    let l = p.len();
    if l < window {
        return Err(Error::ChainTooShort { len: l, min: window });
    }
    let bonds: Vec<f64> = p.windows(2).map(|w| (w[1] - w[0]).norm()).collect();
    let angles: Vec<f64> = p.windows(3).map(|w| bond_angle(&w[0], &w[1], &w[2])).collect();
    let dihedrals: Vec<(f64, f64)> = p
        .windows(4)
        .map(|w| dihedral(&w[0], &w[1], &w[2], &w[3]).sin_cos())
        .collect();

    let dim = descriptor_dim(window);
    Ok((0..l)
        .map(|t| {
            let s = window_start(t, l, window);
            let mut values = Vec::with_capacity(dim);
            values.extend_from_slice(&bonds[s..s + window - 1]);
            values.extend_from_slice(&angles[s..s + window - 2]);
            for &(sin, cos) in &dihedrals[s..s + window - 3] {
                values.push(sin);
                values.push(cos);
            }
            Descriptor { values, window }
        })
        .collect())
}

/// Splits a chain into its first three positions and the internal
/// coordinates placing every later residue; `internal[i]` places residue
/// `i + 3`.
pub fn extract_internal(chain: &Chain) -> Result<([Point; 3], Vec<InternalCoord>)> {
    let p = chain.coords();
    if p.len() < 4 {
        return Err(Error::ChainTooShort { len: p.len(), min: 4 });
    }
    let internal = p
        .windows(4)
        .map(|w| InternalCoord {
            bond: (w[3] - w[2]).norm(),
            angle: bond_angle(&w[1], &w[2], &w[3]),
            dihedral: dihedral(&w[0], &w[1], &w[2], &w[3]),
        })
        .collect();
    Ok(([p[0], p[1], p[2]], internal))
}

fn check_internal(index: usize, ic: &InternalCoord) -> Result<()> {
    let reason = if !(ic.bond.is_finite() && ic.bond > 0.0) {
        format!("bond length {} is not positive", ic.bond)
    } else if !(ic.angle > 0.0 && ic.angle < std::f64::consts::PI) {
        format!("bond angle {} is outside (0, π)", ic.angle)
    } else if !ic.dihedral.is_finite() {
        "dihedral is not finite".to_string()
    } else {
        return Ok(());
    };
    Err(Error::InvalidInternalCoordinate { index, reason })
}

/// Natural-extension placement of `d` from the three preceding atoms.
fn place(a: &Point, b: &Point, c: &Point, ic: &InternalCoord) -> Result<Point> {
    let bc = (c - b).normalize();
    let n = (b - a).cross(&bc);
    let n_norm = n.norm();
    if n_norm.is_nan() || n_norm <= 1e-12 || !bc.iter().all(|v| v.is_finite()) {
        return Err(Error::DegenerateGeometry("three reference atoms are collinear".into()));
    }
    let n = n / n_norm;
    let m = n.cross(&bc);
    let (sin_a, cos_a) = ic.angle.sin_cos();
    let (sin_d, cos_d) = ic.dihedral.sin_cos();
    let local = Vector3::new(-ic.bond * cos_a, ic.bond * sin_a * cos_d, ic.bond * sin_a * sin_d);
    Ok(c + bc * local.x + m * local.y + n * local.z)
}

/// Rebuilds a chain from a three-atom seed frame and per-residue internal
/// coordinates, each placed against the three most recently placed atoms.
pub fn rebuild_chain(internal: &[InternalCoord], seed: [Point; 3]) -> Result<Chain> {
    for (i, ic) in internal.iter().enumerate() {
        check_internal(i, ic)?;
    }
    let mut coords = Vec::with_capacity(internal.len() + 3);
    coords.extend_from_slice(&seed);
    for ic in internal {
        let n = coords.len();
        let next = place(&coords[n - 3], &coords[n - 2], &coords[n - 1], ic)?;
        coords.push(next);
    }
    Chain::new("", coords)
}

/// Seed frame from two bond lengths and the angle between them: first atom at
/// the origin, second on +x, third in the xy-plane.
pub fn seed_frame(bond1: f64, bond2: f64, angle: f64) -> Result<[Point; 3]> {
    check_internal(0, &InternalCoord { bond: bond1, angle, dihedral: 0.0 })?;
    check_internal(0, &InternalCoord { bond: bond2, angle, dihedral: 0.0 })?;
    let p0 = Point::zeros();
    let p1 = Point::new(bond1, 0.0, 0.0);
    let p2 = p1 + Point::new(-angle.cos(), angle.sin(), 0.0) * bond2;
    Ok([p0, p1, p2])
}
