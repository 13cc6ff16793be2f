//! GNS representation of a state on the full matrix algebra `M_D`.
//!
//! The algebra is spanned by the matrix units `E_ij` (vectorized row-major,
//! `vec(A)[i D + j] = A_ij`). The sesquilinear form `<A, B> = omega(A* B)`
//! has Gram matrix `G[(ij), (kl)] = delta_ik rho_lj`; its null space is the
//! left ideal `N_omega`. With `G = sum_l mu_l v_l v_l*` and `mu_l` above the
//! threshold, the classes `e_l = [B_l]`, `vec(B_l) = v_l / sqrt(mu_l)`, form an
//! orthonormal basis of `A / N_omega`, and the coordinates of `[A]` are
//! `W* vec(A)` with `W = V diag(sqrt(mu))`.

use crate::error::{Error, Result};
use crate::states::DensityState;
use crate::tensorcore::{c64, hermitian_eig, identity, max_abs, operator_norm, ComplexMatrix, LocalOperator};

/// Largest algebra dimension `D` accepted.
pub const MAX_ALGEBRA_DIM: usize = 16;
/// Relative eigenvalue threshold separating the null space of the Gram matrix.
pub const NULL_TOL: f64 = 1e-9;

#[derive(Clone, Debug)]
pub struct GnsRepresentation {
    algebra_dim: usize,
    /// `W`, a `D^2 x r` matrix.
    basis_map: ComplexMatrix,
    /// `B_l` as `D x D` matrices.
    quotient_basis: Vec<ComplexMatrix>,
    cyclic_vector: ComplexMatrix,
}

fn vec_index(d: usize, i: usize, j: usize) -> usize {
    i * d + j
}

pub fn gns_construct(d: usize, omega: &DensityState) -> Result<GnsRepresentation> {
    if !(2..=MAX_ALGEBRA_DIM).contains(&d) {
        return Err(Error::TooLarge { what: "GNS algebra", dim: d, limit: MAX_ALGEBRA_DIM });
    }
    let rho = omega.matrix();
    if rho.nrows() != d {
        return Err(Error::DimensionMismatch { expected: d, found: rho.nrows() });
    }
    let n = d * d;
    // omega(E_ij* E_kl) = omega(E_ji E_kl) = delta_ik rho_lj
    let gram = ComplexMatrix::from_fn(n, n, |row, col| {
        let (i, j) = (row / d, row % d);
        let (k, l) = (col / d, col % d);
        if i == k {
            rho[(l, j)]
        } else {
            c64::new(0.0, 0.0)
        }
    });
    let spec = hermitian_eig(&gram)?;
    let top = spec.max().max(0.0);
    let keep: Vec<usize> = (0..n).rev().filter(|&k| spec.values[k] > NULL_TOL * top).collect();
    let r = keep.len();
    let basis_map = ComplexMatrix::from_fn(n, r, |row, l| spec.vectors[(row, keep[l])] * spec.values[keep[l]].sqrt());
    let quotient_basis = keep
        .iter()
        .map(|&k| {
            let s = 1.0 / spec.values[k].sqrt();
            ComplexMatrix::from_fn(d, d, |i, j| spec.vectors[(vec_index(d, i, j), k)] * s)
        })
        .collect();
    let mut rep =
        GnsRepresentation { algebra_dim: d, basis_map, quotient_basis, cyclic_vector: ComplexMatrix::zeros(r, 1) };
    rep.cyclic_vector = rep.coords(&identity(d))?;
    Ok(rep)
}

impl GnsRepresentation {
    pub fn algebra_dim(&self) -> usize {
        self.algebra_dim
    }

    /// Dimension of the GNS Hilbert space, `D^2 - dim N_omega`.
    pub fn gns_dim(&self) -> usize {
        self.quotient_basis.len()
    }

    pub fn basis_map(&self) -> &ComplexMatrix {
        &self.basis_map
    }

    /// `Omega = [1]` as an `r x 1` column.
    pub fn cyclic_vector(&self) -> &ComplexMatrix {
        &self.cyclic_vector
    }

    fn check(&self, a: &ComplexMatrix) -> Result<()> {
        let d = self.algebra_dim;
        if a.nrows() != d || a.ncols() != d {
            return Err(Error::DimensionMismatch { expected: d, found: a.nrows() });
        }
        Ok(())
    }

    /// Coordinates of the class `[A]` in the orthonormal quotient basis.
    pub fn coords(&self, a: &ComplexMatrix) -> Result<ComplexMatrix> {
        self.check(a)?;
        let d = self.algebra_dim;
        let w = &self.basis_map;
        Ok(ComplexMatrix::from_fn(self.gns_dim(), 1, |l, _| {
            let mut acc = c64::new(0.0, 0.0);
            for i in 0..d {
                for j in 0..d {
                    acc += w[(vec_index(d, i, j), l)].conj() * a[(i, j)];
                }
            }
            acc
        }))
    }

    /// `pi(A)[B] = [AB]` as an `r x r` matrix.
    pub fn represent(&self, a: &ComplexMatrix) -> Result<ComplexMatrix> {
        self.check(a)?;
        let r = self.gns_dim();
        let mut out = ComplexMatrix::zeros(r, r);
        for (l, b) in self.quotient_basis.iter().enumerate() {
            let col = self.coords(&(a * b))?;
            for k in 0..r {
                out[(k, l)] = col[(k, 0)];
            }
        }
        Ok(out)
    }

    pub fn represent_operator(&self, a: &LocalOperator) -> Result<ComplexMatrix> {
        self.represent(a.matrix())
    }

    /// `<Omega, pi(A) Omega>`.
    pub fn vector_state(&self, a: &ComplexMatrix) -> Result<c64> {
        let pa = self.represent(a)?;
        let o = &self.cyclic_vector;
        let v = &pa * o;
        Ok((0..o.nrows()).map(|k| o[(k, 0)].conj() * v[(k, 0)]).sum())
    }

    /// Matrix unit `E_ij` of `M_D`.
    pub fn matrix_unit(&self, i: usize, j: usize) -> ComplexMatrix {
        let mut e = ComplexMatrix::zeros(self.algebra_dim, self.algebra_dim);
        e[(i, j)] = c64::new(1.0, 0.0);
        e
    }
}

/// Orthonormal basis (columns) of the range of a Hermitian projector.
fn range_basis(p: &ComplexMatrix) -> Result<ComplexMatrix> {
    let s = hermitian_eig(p)?;
    let cols: Vec<usize> = (0..s.dim()).filter(|&k| s.values[k] > 0.5).collect();
    Ok(ComplexMatrix::from_fn(p.nrows(), cols.len(), |i, c| s.vectors[(i, cols[c])]))
}

/// Dimension of `{X : [X, pi(E_ij)] = 0 for all i, j}`.
///
/// Commuting with the projectors `pi(E_ii)` makes `X` block diagonal,
/// `X = sum_i X_i`. The remaining generators `E_{i,i+1}`, `E_{i+1,i}` act
/// between consecutive blocks as `T_i`, `S_i` with `S_i T_i = 1`, so the
/// commutation equations give `X_{i+1} = S_i X_i T_i`: every solution is fixed
/// by `X_0`. The full set of equations is then evaluated on a basis of
/// `X_0` and the null space of that linear map counted.
pub fn commutant_dimension(rep: &GnsRepresentation) -> Result<usize> {
    let d = rep.algebra_dim;
    let r = rep.gns_dim();
    let q: Vec<ComplexMatrix> =
        (0..d).map(|i| range_basis(&rep.represent(&rep.matrix_unit(i, i))?)).collect::<Result<_>>()?;
    let total: usize = q.iter().map(|b| b.ncols()).sum();
    if total != r {
        return Err(Error::Inconsistency(format!("diagonal projectors span {total} of {r} dimensions")));
    }
    let mut t = Vec::with_capacity(d - 1);
    let mut s = Vec::with_capacity(d - 1);
    for i in 0..d - 1 {
        let up = rep.represent(&rep.matrix_unit(i, i + 1))?;
        let down = rep.represent(&rep.matrix_unit(i + 1, i))?;
        let ti = q[i].adjoint() * &up * &q[i + 1];
        let si = q[i + 1].adjoint() * &down * &q[i];
        let defect = max_abs(&(&si * &ti - identity(q[i + 1].ncols())));
        if defect > 1e-8 {
            return Err(Error::Inconsistency(format!("block transfer is not invertible ({defect:e})")));
        }
        t.push(ti);
        s.push(si);
    }
    let m0 = q[0].ncols();
    let mut columns: Vec<Vec<c64>> = Vec::with_capacity(m0 * m0);
    for a in 0..m0 {
        for b in 0..m0 {
            let mut x = ComplexMatrix::zeros(m0, m0);
            x[(a, b)] = c64::new(1.0, 0.0);
            let mut blocks = vec![x];
            for i in 0..d - 1 {
                let next = &s[i] * &blocks[i] * &t[i];
                blocks.push(next);
            }
            let mut residual = Vec::new();
            for i in 0..d - 1 {
                let e1 = &blocks[i] * &t[i] - &t[i] * &blocks[i + 1];
                let e2 = &blocks[i + 1] * &s[i] - &s[i] * &blocks[i];
                for m in [e1, e2] {
                    for jj in 0..m.ncols() {
                        for ii in 0..m.nrows() {
                            residual.push(m[(ii, jj)]);
                        }
                    }
                }
            }
            columns.push(residual);
        }
    }
    let unknowns = columns.len();
    if columns[0].is_empty() {
        return Ok(unknowns);
    }
    let normal = ComplexMatrix::from_fn(unknowns, unknowns, |i, j| {
        columns[i].iter().zip(&columns[j]).map(|(a, b)| a.conj() * b).sum()
    });
    let ev = hermitian_eig(&normal)?.values;
    let top = ev.last().copied().unwrap_or(0.0).max(1.0);
    Ok(ev.iter().filter(|&&v| v <= 1e-10 * top).count())
}

/// `(is_pure, commutant_dim)`, failing with an inconsistency error when
/// purity and irreducibility disagree.
pub fn purity_irreducibility_crosscheck(d: usize, omega: &DensityState) -> Result<(bool, usize)> {
    let rep = gns_construct(d, omega)?;
    let rho = omega.matrix();
    let is_pure = operator_norm(&(rho * rho - rho)) <= 1e-9;
    let dim = commutant_dimension(&rep)?;
    if is_pure != (dim == 1) {
        return Err(Error::Inconsistency(format!(
            "state is {} but the commutant has dimension {dim}",
            if is_pure { "pure" } else { "mixed" }
        )));
    }
    Ok((is_pure, dim))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Region;
    use crate::sampling;
    use crate::states::BlochVector;
    use crate::tensorcore::{scale, trace};
    use crate::Site;
    use proptest::prelude::*;

    fn state(rho: ComplexMatrix) -> DensityState {
        DensityState::new(Region::chain(1), rho).unwrap()
    }

    fn diag(values: &[f64]) -> ComplexMatrix {
        let n = values.len();
        ComplexMatrix::from_fn(n, n, |i, j| if i == j { c64::new(values[i], 0.0) } else { c64::new(0.0, 0.0) })
    }

    /// Gram matrix by explicit products `Tr(rho E_ij* E_kl)` and its rank.
    fn brute_gram_rank(rho: &ComplexMatrix) -> usize {
        let d = rho.nrows();
        let unit = |i: usize, j: usize| {
            let mut e = ComplexMatrix::zeros(d, d);
            e[(i, j)] = c64::new(1.0, 0.0);
            e
        };
        let n = d * d;
        let g = ComplexMatrix::from_fn(n, n, |row, col| {
            let a = unit(row / d, row % d);
            let b = unit(col / d, col % d);
            trace(&(rho * a.adjoint() * b))
        });
        let ev = hermitian_eig(&g).unwrap().values;
        let top = ev[n - 1];
        ev.iter().filter(|&&v| v > 1e-9 * top).count()
    }

    #[test]
    fn vector_state_examples() {
        let rep = gns_construct(2, &state(diag(&[1.0, 0.0]))).unwrap();
        assert_eq!(rep.gns_dim(), 2);
        assert_eq!(commutant_dimension(&rep).unwrap(), 1);
        let lambda = 0.3;
        let rep = gns_construct(2, &state(diag(&[lambda, 1.0 - lambda]))).unwrap();
        assert_eq!(rep.gns_dim(), 4);
        assert_eq!(commutant_dimension(&rep).unwrap(), 4);
        let rep = gns_construct(2, &state(diag(&[0.5, 0.5]))).unwrap();
        assert_eq!(commutant_dimension(&rep).unwrap(), 4);
    }

    #[test]
    fn gns_dim_matches_brute_force_gram_rank() {
        let mut rng = sampling::rng(1);
        for d in [2, 3, 4] {
            for rank in 1..=d {
                // rank-deficient state from a d x rank factor
                let g = sampling::random_matrix(&mut rng, d);
                let f = ComplexMatrix::from_fn(d, d, |i, j| if j < rank { g[(i, j)] } else { c64::new(0.0, 0.0) });
                let m = &f * f.adjoint();
                let tr = trace(&m).re;
                let rho = scale(&m, c64::new(1.0 / tr, 0.0));
                let rep =
                    gns_construct(d, &DensityState::with_site_dim(Region::chain(1), rho.clone(), d).unwrap()).unwrap();
                assert_eq!(rep.gns_dim(), brute_gram_rank(&rho));
                assert_eq!(rep.gns_dim(), rank * d);
                assert_eq!(commutant_dimension(&rep).unwrap(), rank * rank);
            }
        }
    }

    #[test]
    fn reconstruction_and_cyclic_vector() {
        let mut rng = sampling::rng(2);
        for d in [2, 3] {
            let rho = sampling::random_density(&mut rng, d);
            let omega = DensityState::with_site_dim(Region::chain(1), rho.clone(), d).unwrap();
            let rep = gns_construct(d, &omega).unwrap();
            let o = rep.cyclic_vector();
            let norm: f64 = (0..o.nrows()).map(|k| o[(k, 0)].norm_sqr()).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() < 1e-12);
            for _ in 0..100 {
                let a = sampling::random_matrix(&mut rng, d);
                let direct = trace(&(&rho * &a));
                assert!((rep.vector_state(&a).unwrap() - direct).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn crosscheck_examples() {
        let mut rng = sampling::rng(3);
        let g = sampling::random_matrix(&mut rng, 3);
        let psi = ComplexMatrix::from_fn(3, 1, |i, _| g[(i, 0)]);
        let pure = DensityState::pure(Region::chain(1), &psi).unwrap();
        assert_eq!(purity_irreducibility_crosscheck(3, &pure).unwrap(), (true, 1));
        let mixed = DensityState::maximally_mixed(Region::chain(1), 2);
        assert_eq!(purity_irreducibility_crosscheck(2, &mixed).unwrap(), (false, 4));
        let (th, ph) = (0.7f64, 2.1f64);
        let b = BlochVector { x: th.sin() * ph.cos(), y: th.sin() * ph.sin(), z: th.cos() };
        let boundary = b.to_state(Site::line(0)).unwrap();
        assert_eq!(purity_irreducibility_crosscheck(2, &boundary).unwrap(), (true, 1));
        assert!(gns_construct(17, &mixed).is_err());
        assert!(gns_construct(3, &mixed).is_err());
    }

    #[test]
    fn inner_automorphism_is_implemented_unitarily() {
        let mut rng = sampling::rng(4);
        let rho = sampling::random_faithful_density(&mut rng, 2);
        let rep = gns_construct(2, &state(rho)).unwrap();
        let u = sampling::random_unitary(&mut rng, 2);
        let pu = rep.represent(&u).unwrap();
        let a = sampling::random_matrix(&mut rng, 2);
        let lhs = &pu * rep.represent(&a).unwrap() * pu.adjoint();
        let rhs = rep.represent(&(&u * &a * u.adjoint())).unwrap();
        assert!(max_abs(&(lhs - rhs)) < 1e-9);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn representation_is_star_homomorphism(seed in any::<u64>(), faithful in any::<bool>()) {
            let mut rng = sampling::rng(seed);
            let d = 3;
            let rho = if faithful {
                sampling::random_faithful_density(&mut rng, d)
            } else {
                sampling::random_density(&mut rng, d)
            };
            let rep = gns_construct(d, &DensityState::with_site_dim(Region::chain(1), rho, d).unwrap()).unwrap();
            let a = sampling::random_matrix(&mut rng, d);
            let b = sampling::random_matrix(&mut rng, d);
            let pa = rep.represent(&a).unwrap();
            let pb = rep.represent(&b).unwrap();
            let pab = rep.represent(&(&a * &b)).unwrap();
            prop_assert!(operator_norm(&(pab - &pa * &pb)) <= 1e-9);
            let pas = rep.represent(&a.adjoint().to_owned()).unwrap();
            prop_assert!(operator_norm(&(pas - pa.adjoint())) <= 1e-9);
            let na = operator_norm(&a);
            let npa = operator_norm(&pa);
            prop_assert!(npa <= na + 1e-9);
            if faithful {
                prop_assert!((npa - na).abs() <= 1e-8 * na.max(1.0));
            }
        }
    }
}
