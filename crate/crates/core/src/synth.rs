//! Synthetic Cα traces and ensembles for tests, benchmarks and demos.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::geom::{rebuild_chain, seed_frame, Chain, InternalCoord, Point};

/// Ideal Cα–Cα virtual bond length.
pub const CA_BOND: f64 = 3.8;

/// Chain with constant bond, angle and dihedral.
pub fn regular_chain(len: usize, angle: f64, dihedral: f64) -> Chain {
    assert!(len >= 3, "need at least three residues");
    let ic = InternalCoord { bond: CA_BOND, angle, dihedral };
    let seed = seed_frame(CA_BOND, CA_BOND, angle).expect("valid regular geometry");
    rebuild_chain(&vec![ic; len - 3], seed)
        .expect("valid regular geometry")
        .with_label("regular")
}

/// Protein-like random Cα trace: 3.8 Å bonds, angles between 85° and 130°,
/// dihedrals drawn around helix (+50°) and strand (-170°) values with noise.
pub fn random_chain<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Chain {
    assert!(len >= 3, "need at least three residues");
    let noise = Normal::new(0.0, 0.35).unwrap();
    let internal: Vec<InternalCoord> = (0..len - 3)
        .map(|_| {
            let angle = rng.random_range(85f64..130.0).to_radians();
            let base: f64 = if rng.random_bool(0.5) { 50f64 } else { -170f64 };
            InternalCoord { bond: CA_BOND, angle, dihedral: base.to_radians() + noise.sample(rng) }
        })
        .collect();
    let seed = seed_frame(CA_BOND, CA_BOND, 1.6).unwrap();
    rebuild_chain(&internal, seed).expect("valid random geometry").with_label("random")
}

/// Copy of `chain` with independent isotropic Gaussian noise of standard
/// deviation `sigma` (Å) on every coordinate.
pub fn jitter<R: Rng + ?Sized>(chain: &Chain, sigma: f64, rng: &mut R) -> Chain {
    let normal = Normal::new(0.0, sigma).unwrap();
    let coords: Vec<Point> = chain
        .coords()
        .iter()
        .map(|p| p + Point::new(normal.sample(rng), normal.sample(rng), normal.sample(rng)))
        .collect();
    Chain::new(chain.label(), coords).expect("finite jitter")
}
