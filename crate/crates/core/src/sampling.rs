//! Seeded random matrices, operators and states for tests and experiments.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::lattice::Region;
use crate::tensorcore::{c64, identity, operator_norm, scale, trace, ComplexMatrix, LocalOperator};

pub type SeededRng = ChaCha8Rng;

pub fn rng(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn gaussian(rng: &mut impl Rng) -> c64 {
    c64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

/// Matrix with i.i.d. standard complex Gaussian entries.
pub fn random_matrix(rng: &mut impl Rng, n: usize) -> ComplexMatrix {
    let mut m = ComplexMatrix::zeros(n, n);
    for j in 0..n {
        for i in 0..n {
            m[(i, j)] = gaussian(rng);
        }
    }
    m
}

/// Exactly Hermitian Gaussian matrix.
pub fn random_hermitian(rng: &mut impl Rng, n: usize) -> ComplexMatrix {
    let g = random_matrix(rng, n);
    ComplexMatrix::from_fn(n, n, |i, j| {
        if i == j {
            c64::new(g[(i, i)].re, 0.0)
        } else if i < j {
            (g[(i, j)] + g[(j, i)].conj()) * 0.5
        } else {
            (g[(j, i)] + g[(i, j)].conj()).conj() * 0.5
        }
    })
}

/// `(G + |G| 1) / Tr(G + |G| 1)` for Hermitian Gaussian `G`.
///
/// The result is positive with at least one zero eigenvalue, so small
/// systems regularly produce rank-deficient (for qubits: pure) states.
pub fn random_density(rng: &mut impl Rng, n: usize) -> ComplexMatrix {
    let g = random_hermitian(rng, n);
    let shift = operator_norm(&g);
    let m = &g + scale(&identity(n), c64::new(shift, 0.0));
    let tr = trace(&m).re;
    ComplexMatrix::from_fn(n, n, |i, j| m[(i, j)] / tr)
}

/// Full-rank density matrix `G G* / Tr(G G*)`.
pub fn random_faithful_density(rng: &mut impl Rng, n: usize) -> ComplexMatrix {
    let g = random_matrix(rng, n);
    let m = &g * g.adjoint();
    let tr = trace(&m).re;
    ComplexMatrix::from_fn(n, n, |i, j| m[(i, j)] / tr)
}

/// Unitary from the QR-like orthonormalization of a Gaussian matrix.
pub fn random_unitary(rng: &mut impl Rng, n: usize) -> ComplexMatrix {
    let g = random_matrix(rng, n);
    let qr = g.qr();
    let q = qr.compute_Q();
    let r = qr.R();
    // fix column phases so the distribution is Haar
    ComplexMatrix::from_fn(n, n, |i, j| {
        let d = r[(j, j)];
        let ph = if d.norm() > 0.0 { d / d.norm() } else { c64::new(1.0, 0.0) };
        q[(i, j)] * ph
    })
}

pub fn random_operator(rng: &mut impl Rng, support: &Region, site_dim: usize) -> LocalOperator {
    let n = site_dim.pow(support.len() as u32);
    LocalOperator::new(support.clone(), random_matrix(rng, n), site_dim).expect("shape is consistent")
}

pub fn random_hermitian_operator(rng: &mut impl Rng, support: &Region, site_dim: usize) -> LocalOperator {
    let n = site_dim.pow(support.len() as u32);
    LocalOperator::new(support.clone(), random_hermitian(rng, n), site_dim).expect("shape is consistent")
}

/// Matrix family drawn by [`random_block_operator`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OperatorKind {
    General,
    Hermitian,
    Unitary,
}

/// Random operator on a block of `1..=max_width` consecutive sites of
/// `region`, consecutive in the canonical site order.
pub fn random_block_operator(
    rng: &mut impl Rng,
    region: &Region,
    max_width: usize,
    kind: OperatorKind,
    site_dim: usize,
) -> LocalOperator {
    let sites = region.sites();
    assert!(!sites.is_empty() && max_width >= 1, "need a nonempty region and width");
    let width = rng.random_range(1..=max_width.min(sites.len()));
    let start = rng.random_range(0..=sites.len() - width);
    let support =
        Region::new(sites[start..start + width].to_vec(), region.geometry().clone()).expect("subset of a valid region");
    let n = site_dim.pow(width as u32);
    let m = match kind {
        OperatorKind::General => random_matrix(rng, n),
        OperatorKind::Hermitian => random_hermitian(rng, n),
        OperatorKind::Unitary => random_unitary(rng, n),
    };
    LocalOperator::new(support, m, site_dim).expect("shape is consistent")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensorcore::{eigenvalues_hermitian, hermiticity_defect, unitarity_defect};

    #[test]
    fn block_operators_stay_in_region() {
        let mut r = rng(9);
        let region = Region::chain(5);
        for kind in [OperatorKind::General, OperatorKind::Hermitian, OperatorKind::Unitary] {
            for _ in 0..50 {
                let a = random_block_operator(&mut r, &region, 2, kind, 2);
                assert!(a.support().is_subset_of(&region));
                assert!((1..=2).contains(&a.support().len()));
                match kind {
                    OperatorKind::Hermitian => assert!(hermiticity_defect(a.matrix()) == 0.0),
                    OperatorKind::Unitary => assert!(unitarity_defect(a.matrix()) < 1e-12),
                    OperatorKind::General => {}
                }
            }
        }
    }

    #[test]
    fn samples_are_reproducible() {
        let a = random_matrix(&mut rng(7), 3);
        let b = random_matrix(&mut rng(7), 3);
        assert_eq!(a, b);
    }

    #[test]
    fn sample_properties() {
        let mut r = rng(1);
        assert_eq!(hermiticity_defect(&random_hermitian(&mut r, 5)), 0.0);
        assert!(unitarity_defect(&random_unitary(&mut r, 6)) < 1e-13);
        for _ in 0..10 {
            let rho = random_density(&mut r, 4);
            assert!((trace(&rho).re - 1.0).abs() < 1e-14);
            let ev = eigenvalues_hermitian(&rho).unwrap();
            assert!(ev[0] > -1e-14);
        }
        let rho = random_faithful_density(&mut r, 4);
        assert!(eigenvalues_hermitian(&rho).unwrap()[0] > 0.0);
    }
}
