use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Result};
use crate::lattice::{
    BondKind, ChainSpec, DisorderKind, DisorderRealization, DisorderSymmetry, Granularity, Region, Sublattice,
};

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of realization `index` in an ensemble, independent of the order in
/// which realizations are generated.
pub fn realization_seed(master_seed: u64, index: u64) -> u64 {
    splitmix64(splitmix64(master_seed) ^ index.wrapping_mul(0xd1b5_4a32_d192_ed03))
}

/// Draw one realization with every `delta` uniform on `[-strength, strength]`.
///
/// Mirror-symmetric draws share one value per mirror class (or, with
/// [`Granularity::Global`], one per coupling type). Asymmetric draws take one
/// value per half-chain (per branch for routers), applied to the intercell
/// bonds (off-diagonal) or the b-site energies (diagonal).
pub fn sample_disorder(
    spec: &ChainSpec,
    kind: DisorderKind,
    symmetry: DisorderSymmetry,
    strength: f64,
    seed: u64,
    granularity: Granularity,
) -> Result<DisorderRealization> {
    if !(strength.is_finite() && strength >= 0.0) {
        return Err(invalid("omega_s", format!("must be finite and >= 0, got {strength}")));
    }
    let mut r = DisorderRealization::identity(spec, kind, symmetry);
    r.strength = strength;
    r.seed = seed;
    if strength == 0.0 {
        return Ok(r);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |n: usize| -> Vec<f64> { (0..n).map(|_| rng.random_range(-strength..=strength)).collect() };

    match (symmetry, kind) {
        (DisorderSymmetry::MirrorSymmetric, DisorderKind::Diagonal) => match granularity {
            Granularity::PerSite => {
                let d = draw(spec.site_class_count());
                for (s, f) in r.site_factors.iter_mut().enumerate() {
                    *f = 1.0 + d[spec.site_mirror_class(s)];
                }
            }
            Granularity::Global => {
                let d = draw(2);
                for (s, f) in r.site_factors.iter_mut().enumerate() {
                    *f = 1.0 + d[(spec.sublattice(s) == Sublattice::B) as usize];
                }
            }
        },
        (DisorderSymmetry::MirrorSymmetric, DisorderKind::OffDiagonal) => match granularity {
            Granularity::PerSite => {
                let d = draw(spec.bond_class_count());
                for (b, f) in r.bond_factors.iter_mut().enumerate() {
                    *f = 1.0 + d[spec.bond_mirror_class(b)];
                }
            }
            Granularity::Global => {
                let d = draw(2);
                for (bond, f) in spec.bonds().iter().zip(r.bond_factors.iter_mut()) {
                    *f = 1.0 + d[(bond.kind == BondKind::Inter) as usize];
                }
            }
        },
        (DisorderSymmetry::Asymmetric, DisorderKind::Diagonal) => {
            let d = draw(spec.region_count());
            for (s, f) in r.site_factors.iter_mut().enumerate() {
                if let (Sublattice::B, Region::Branch(k)) = (spec.sublattice(s), spec.site_region(s)) {
                    *f = 1.0 + d[k];
                }
            }
        }
        (DisorderSymmetry::Asymmetric, DisorderKind::OffDiagonal) => {
            let d = draw(spec.region_count());
            for (b, (bond, f)) in spec.bonds().iter().zip(r.bond_factors.iter_mut()).enumerate() {
                if let (BondKind::Inter, Region::Branch(k)) = (bond.kind, spec.bond_region(b)) {
                    *f = 1.0 + d[k];
                }
            }
        }
    }
    Ok(r)
}
