//! Density-matrix states and equilibrium criteria.
//!
//! A [`DensityState`] is a positive, unit-trace matrix on a region; it acts on
//! local observables by `omega(A) = Tr(rho A)` after reducing `rho` to the
//! support of `A`.
//!
//! Thermal quantities are computed in the eigenbasis of the Hamiltonian,
//! where the Gibbs state is the diagonal vector of shifted Boltzmann weights.
//! The complex-time factors `e^{-beta(E_n - E_m)}` in the KMS relation are
//! combined with those weights before summation, so no term exceeds the
//! scale of the observables.
//!
//! The distance between two states is the functional norm
//! `sup_{|A| = 1} |omega_1(A) - omega_2(A)|`. On a matrix algebra the dual of
//! the operator norm is the trace norm, so this equals the sum of the
//! singular values of `rho_1 - rho_2`.

use crate::error::{Error, Result};
use crate::lattice::{Region, Site};
use crate::models::{derivation_within, Interaction};
use crate::tensorcore::{
    c64, eigenvalues_hermitian, hermitian_eig, identity, operator_norm, partial_trace, pauli, scale, trace,
    trace_product, Axis, ComplexMatrix, LocalOperator, Spectral,
};

/// Tolerance on `Tr(rho) = 1`.
pub const TRACE_TOL: f64 = 1e-12;
/// Tolerance on negative eigenvalues of `rho`.
pub const POSITIVITY_TOL: f64 = 1e-10;
/// Eigenvalues below this contribute nothing to entropies.
pub const ENTROPY_CLAMP: f64 = 1e-14;
/// Largest `beta * (E_max - E_min)` accepted by [`gibbs_state`].
pub const GIBBS_GUARD: f64 = 1400.0;
/// Eigenvalue threshold deciding the support of a state.
pub const SUPPORT_TOL: f64 = 1e-12;
/// Largest imaginary part tolerated in quantities that must be real.
pub const IMAG_TOL: f64 = 1e-9;

#[derive(Clone, Debug)]
pub struct DensityState {
    rho: LocalOperator,
}

fn infer_site_dim(region: &Region, dim: usize) -> Result<usize> {
    if region.is_empty() {
        return if dim == 1 { Ok(2) } else { Err(Error::DimensionMismatch { expected: 1, found: dim }) };
    }
    let n = region.len() as u32;
    let d = (dim as f64).powf(1.0 / n as f64).round() as usize;
    if d < 2 || d.checked_pow(n) != Some(dim) {
        return Err(Error::BadShape(format!("dimension {dim} on {n} sites")));
    }
    Ok(d)
}

impl DensityState {
    /// Validates Hermiticity, positivity and normalization.
    pub fn new(region: Region, rho: ComplexMatrix) -> Result<Self> {
        let d = infer_site_dim(&region, rho.nrows())?;
        Self::with_site_dim(region, rho, d)
    }

    pub fn with_site_dim(region: Region, rho: ComplexMatrix, site_dim: usize) -> Result<Self> {
        let rho = LocalOperator::new(region, rho, site_dim)?;
        let ev = eigenvalues_hermitian(rho.matrix())?;
        if ev[0] < -POSITIVITY_TOL {
            return Err(Error::InvalidState(format!("negative eigenvalue {:e}", ev[0])));
        }
        let tr = trace(rho.matrix());
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::InvalidState(format!("trace {} != 1", tr.re)));
        }
        Ok(DensityState { rho })
    }

    fn trusted(rho: LocalOperator) -> Self {
        DensityState { rho }
    }

    /// `|psi><psi| / <psi|psi>` for a column vector `psi`.
    pub fn pure(region: Region, psi: &ComplexMatrix) -> Result<Self> {
        let norm2: f64 = (0..psi.nrows()).map(|i| psi[(i, 0)].norm_sqr()).sum();
        if psi.ncols() != 1 || !(norm2 > 0.0) {
            return Err(Error::InvalidState("pure state needs a nonzero column vector".into()));
        }
        let m = ComplexMatrix::from_fn(psi.nrows(), psi.nrows(), |i, j| psi[(i, 0)] * psi[(j, 0)].conj() / norm2);
        let d = infer_site_dim(&region, m.nrows())?;
        Ok(Self::trusted(LocalOperator::new(region, m, d)?))
    }

    pub fn maximally_mixed(region: Region, site_dim: usize) -> Self {
        let n = site_dim.pow(region.len() as u32);
        let m = scale(&identity(n), c64::new(1.0 / n as f64, 0.0));
        Self::trusted(LocalOperator::new(region, m, site_dim).expect("consistent shape"))
    }

    /// Computational basis state; `levels[k]` is the level of the k-th site
    /// in canonical order (for qubits 0 is spin up, `sigma^z = +1`).
    pub fn basis(region: Region, levels: &[usize], site_dim: usize) -> Result<Self> {
        if levels.len() != region.len() || levels.iter().any(|&l| l >= site_dim) {
            return Err(Error::InvalidArgument("basis levels do not match the region".into()));
        }
        let idx = levels.iter().fold(0, |acc, &l| acc * site_dim + l);
        let n = site_dim.pow(region.len() as u32);
        let mut m = ComplexMatrix::zeros(n, n);
        m[(idx, idx)] = c64::new(1.0, 0.0);
        Ok(Self::trusted(LocalOperator::new(region, m, site_dim)?))
    }

    /// `rho_1 (x) rho_2 (x) ...` over disjoint regions.
    pub fn product(factors: &[DensityState]) -> Result<Self> {
        let mut acc = LocalOperator::scalar(c64::new(1.0, 0.0), factors.first().map_or(2, |f| f.site_dim()));
        for f in factors {
            if acc.support().intersects(f.region()) {
                return Err(Error::InvalidArgument("product factors overlap".into()));
            }
            acc = acc.dot(&f.rho)?;
        }
        Ok(Self::trusted(acc))
    }

    pub fn region(&self) -> &Region {
        self.rho.support()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        self.rho.matrix()
    }

    pub fn as_operator(&self) -> &LocalOperator {
        &self.rho
    }

    pub fn site_dim(&self) -> usize {
        self.rho.site_dim()
    }

    pub fn dim(&self) -> usize {
        self.rho.dim()
    }

    /// The reduced state on `sub`.
    pub fn restrict(&self, sub: &Region) -> Result<DensityState> {
        Ok(Self::trusted(partial_trace(&self.rho, sub)?))
    }

    /// `omega(A) = Tr(rho A)`.
    pub fn expectation(&self, a: &LocalOperator) -> Result<c64> {
        if a.site_dim() != self.site_dim() && !a.support().is_empty() {
            return Err(Error::SiteDimMismatch(self.site_dim(), a.site_dim()));
        }
        if a.support().is_empty() {
            return Ok(a.matrix()[(0, 0)] * trace(self.matrix()));
        }
        let reduced = partial_trace(&self.rho, a.support())?;
        Ok(trace_product(reduced.matrix(), a.matrix()))
    }

    /// `|rho^2 - rho| <= tol`.
    pub fn is_pure(&self, tol: f64) -> bool {
        let m = self.matrix();
        operator_norm(&(m * m - m)) <= tol
    }

    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        eigenvalues_hermitian(self.matrix())
    }
}

fn check_same_region(a: &DensityState, b: &DensityState) -> Result<()> {
    if a.region().sites() != b.region().sites() || a.site_dim() != b.site_dim() {
        return Err(Error::InvalidArgument(format!(
            "states live on different regions: {} vs {}",
            a.region(),
            b.region()
        )));
    }
    Ok(())
}

/// Gibbs state of `H` kept in the eigenbasis of `H`.
#[derive(Clone, Debug)]
pub struct Thermal {
    pub hamiltonian: LocalOperator,
    pub spectral: Spectral,
    pub beta: f64,
    /// `e^{-beta (E_k - E_min)} / Z'` in eigenvalue order.
    pub weights: Vec<f64>,
    /// `log Tr e^{-beta H}`.
    pub log_partition: f64,
}

impl Thermal {
    pub fn new(h: &LocalOperator, beta: f64) -> Result<Self> {
        if !(beta > 0.0) || !beta.is_finite() {
            return Err(Error::InvalidArgument(format!("beta = {beta} must be positive")));
        }
        let spectral = hermitian_eig(h.matrix())?;
        let arg = beta * spectral.spread();
        if arg > GIBBS_GUARD {
            return Err(Error::OverflowGuard { value: arg, limit: GIBBS_GUARD });
        }
        let e0 = spectral.min();
        let raw: Vec<f64> = spectral.values.iter().map(|e| (-beta * (e - e0)).exp()).collect();
        let z: f64 = raw.iter().sum();
        Ok(Thermal {
            hamiltonian: h.clone(),
            weights: raw.iter().map(|w| w / z).collect(),
            log_partition: -beta * e0 + z.ln(),
            spectral,
            beta,
        })
    }

    pub fn state(&self) -> DensityState {
        let v = &self.spectral.vectors;
        let w = &self.weights;
        let scaled = ComplexMatrix::from_fn(v.nrows(), v.ncols(), |i, j| v[(i, j)] * w[j]);
        let rho = &scaled * v.adjoint();
        let rho = ComplexMatrix::from_fn(rho.nrows(), rho.ncols(), |i, j| (rho[(i, j)] + rho[(j, i)].conj()) * 0.5);
        DensityState::trusted(
            LocalOperator::new(self.hamiltonian.support().clone(), rho, self.hamiltonian.site_dim())
                .expect("same shape as H"),
        )
    }

    /// `Phi(beta) = -log Tr e^{-beta H} / beta`.
    pub fn free_energy(&self) -> f64 {
        -self.log_partition / self.beta
    }

    fn eigen_components(&self, a: &LocalOperator) -> Result<ComplexMatrix> {
        let a = a.embed(self.hamiltonian.support())?;
        let m = a.matrix();
        let c = m[(0, 0)];
        let n = m.nrows();
        if (0..n).all(|j| (0..n).all(|i| m[(i, j)] == if i == j { c } else { c64::new(0.0, 0.0) })) {
            return Ok(scale(&identity(n), c));
        }
        Ok(self.spectral.to_eigenbasis(m))
    }

    /// `|omega(A alpha_{t + i beta}(B)) - omega(alpha_t(B) A)|` for the Gibbs
    /// state `omega`, with `A` and `B` inside the support of `H`.
    pub fn kms_residual(&self, a: &LocalOperator, b: &LocalOperator, t: f64) -> Result<f64> {
        let a = self.eigen_components(a)?;
        let b = self.eigen_components(b)?;
        Ok(self.kms_residual_eigen(&a, &b, t))
    }

    /// As [`Thermal::kms_residual`] for operators already in the eigenbasis.
    pub fn kms_residual_eigen(&self, a: &ComplexMatrix, b: &ComplexMatrix, t: f64) -> f64 {
        let e = &self.spectral.values;
        let p = &self.weights;
        let n = e.len();
        let (mut lhs, mut rhs) = (c64::new(0.0, 0.0), c64::new(0.0, 0.0));
        for m in 0..n {
            for k in 0..n {
                let phase = c64::from_polar(1.0, t * (e[k] - e[m]));
                // p_m e^{-beta (E_k - E_m)} = p_k
                lhs += a[(m, k)] * b[(k, m)] * phase * p[k];
                rhs += b[(m, k)] * a[(k, m)] * phase.conj() * p[m];
            }
        }
        (lhs - rhs).norm()
    }
}

/// `e^{-beta H} / Tr e^{-beta H}`, with the spectrum shifted by its minimum.
pub fn gibbs_state(h: &LocalOperator, beta: f64) -> Result<DensityState> {
    Ok(Thermal::new(h, beta)?.state())
}

/// KMS residual of the Gibbs state of `H` at inverse temperature `beta`.
pub fn kms_residual(h: &LocalOperator, beta: f64, a: &LocalOperator, b: &LocalOperator, t: f64) -> Result<f64> {
    let union = h.support().union(a.support()).union(b.support());
    let h = h.embed(&union)?;
    Thermal::new(&h, beta)?.kms_residual(a, b, t)
}

/// KMS residual `|omega(A alpha_{t+i beta}(B)) - omega(alpha_t(B) A)|` of an
/// arbitrary state on the support of `H`.
pub fn kms_residual_of_state(
    omega: &DensityState,
    h: &LocalOperator,
    beta: f64,
    a: &LocalOperator,
    b: &LocalOperator,
    t: f64,
) -> Result<f64> {
    let region = omega.region();
    let h = h.embed(region)?;
    let spec = hermitian_eig(h.matrix())?;
    let to_eig = |x: &LocalOperator| -> Result<ComplexMatrix> { Ok(spec.to_eigenbasis(x.embed(region)?.matrix())) };
    let (r, a, b) = (to_eig(&omega.rho)?, to_eig(a)?, to_eig(b)?);
    let bz = spec.evolve_in_eigenbasis(&b, c64::new(t, beta))?;
    let bt = spec.evolve_in_eigenbasis(&b, c64::new(t, 0.0))?;
    let lhs = trace_product(&r, &(&a * &bz));
    let rhs = trace_product(&r, &(&bt * &a));
    Ok((lhs - rhs).norm())
}

/// `-i omega(A* delta_Lambda(A))` with `Lambda` the region of `omega`.
fn dissipation(omega: &DensityState, phi: &Interaction, a: &LocalOperator) -> Result<f64> {
    let da = derivation_within(phi, a, omega.region())?;
    let v = omega.expectation(&a.adjoint().dot(&da)?)? * c64::new(0.0, -1.0);
    let tol = IMAG_TOL * (a.norm() * da.norm()).max(1.0);
    if v.im.abs() > tol {
        return Err(Error::InvalidState(format!(
            "-i omega(A* delta(A)) has imaginary part {:e}; the state is not invariant",
            v.im
        )));
    }
    Ok(v.re)
}

/// `x log(x / y)` with `0 log(0/y) = 0` and `x log(x/0) = +inf` for `x > 0`.
pub fn x_log_x_over_y(x: f64, y: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if y <= 0.0 {
        f64::INFINITY
    } else {
        x * (x / y).ln()
    }
}

/// `(lhs, rhs)` of the autocorrelation lower bound
/// `-i beta omega(A* delta(A)) >= omega(A*A) log(omega(A*A) / omega(A A*))`.
pub fn autocorrelation_lower_bound_check(
    omega: &DensityState,
    phi: &Interaction,
    beta: f64,
    a: &LocalOperator,
) -> Result<(f64, f64)> {
    let x = omega.expectation(&a.adjoint().dot(a)?)?.re;
    let y = omega.expectation(&a.dot(&a.adjoint())?)?.re;
    let lhs = beta * dissipation(omega, phi, a)?;
    Ok((lhs, x_log_x_over_y(x, y)))
}

/// `min_A -i omega(A* delta(A))`; nonnegative for ground states.
pub fn ground_state_residual(omega: &DensityState, phi: &Interaction, samples: &[LocalOperator]) -> Result<f64> {
    let mut best = f64::INFINITY;
    for a in samples {
        best = best.min(dissipation(omega, phi, a)?);
    }
    Ok(best)
}

/// `min_U -i omega(U* delta(U))`; nonnegative for passive states.
pub fn passivity_check(omega: &DensityState, phi: &Interaction, unitaries: &[LocalOperator]) -> Result<f64> {
    let mut best = f64::INFINITY;
    for u in unitaries {
        u.require_unitary()?;
        best = best.min(dissipation(omega, phi, u)?);
    }
    Ok(best)
}

fn entropy_of_spectrum(ev: &[f64]) -> f64 {
    -ev.iter().filter(|&&l| l > ENTROPY_CLAMP).map(|&l| l * l.ln()).sum::<f64>()
}

/// `S(rho) = -Tr rho log rho` (natural logarithm).
pub fn von_neumann_entropy(omega: &DensityState) -> Result<f64> {
    Ok(entropy_of_spectrum(&omega.eigenvalues()?))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RelativeEntropy {
    Finite(f64),
    /// `supp(rho)` is not contained in `supp(sigma)`.
    Infinite,
}

impl RelativeEntropy {
    pub fn value(self) -> f64 {
        match self {
            RelativeEntropy::Finite(v) => v,
            RelativeEntropy::Infinite => f64::INFINITY,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, RelativeEntropy::Finite(_))
    }
}

/// `S(sigma | rho) = Tr(rho log rho - rho log sigma)`.
pub fn relative_entropy(sigma: &DensityState, rho: &DensityState) -> Result<RelativeEntropy> {
    check_same_region(sigma, rho)?;
    let sig = hermitian_eig(sigma.matrix())?;
    let r = sig.to_eigenbasis(rho.matrix());
    let mut cross = 0.0;
    for (k, &mu) in sig.values.iter().enumerate() {
        let weight = r[(k, k)].re;
        if mu <= SUPPORT_TOL {
            if weight > SUPPORT_TOL {
                return Ok(RelativeEntropy::Infinite);
            }
        } else {
            cross += weight * mu.ln();
        }
    }
    let neg_entropy = -entropy_of_spectrum(&rho.eigenvalues()?);
    Ok(RelativeEntropy::Finite(neg_entropy - cross))
}

/// `F_beta(rho) = rho(H) - S(rho) / beta`.
pub fn free_energy(omega: &DensityState, h: &LocalOperator, beta: f64) -> Result<f64> {
    if !(beta > 0.0) {
        return Err(Error::InvalidArgument(format!("beta = {beta} must be positive")));
    }
    Ok(omega.expectation(h)?.re - von_neumann_entropy(omega)? / beta)
}

/// `Phi(beta) = -log Tr e^{-beta H} / beta`.
pub fn gibbs_free_energy(h: &LocalOperator, beta: f64) -> Result<f64> {
    Ok(Thermal::new(h, beta)?.free_energy())
}

/// `S_Lambda / |Lambda|` for each volume, the state on each volume produced by `family`.
pub fn entropy_density_sequence(
    family: impl Fn(&Region) -> Result<DensityState>,
    volumes: &[Region],
) -> Result<Vec<f64>> {
    volumes
        .iter()
        .map(|v| {
            if v.is_empty() {
                return Err(Error::EmptyRegion);
            }
            Ok(von_neumann_entropy(&family(v)?)? / v.len() as f64)
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlochVector {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl BlochVector {
    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    /// `(1 + x sigma^x + y sigma^y + z sigma^z) / 2` at `site`.
    pub fn to_state(&self, site: Site) -> Result<DensityState> {
        if self.norm() > 1.0 + 1e-10 {
            return Err(Error::InvalidState(format!("Bloch vector of length {}", self.norm())));
        }
        let mut m = identity(2);
        for (c, ax) in [(self.x, Axis::X), (self.y, Axis::Y), (self.z, Axis::Z)] {
            m += scale(&pauli(ax), c64::new(c, 0.0));
        }
        let m = scale(&m, c64::new(0.5, 0.0));
        DensityState::new(Region::singleton(site), m)
    }
}

pub fn bloch_vector(omega: &DensityState) -> Result<BlochVector> {
    if omega.region().len() != 1 || omega.site_dim() != 2 {
        return Err(Error::InvalidArgument("Bloch vectors describe single qubits".into()));
    }
    let site = omega.region().sites()[0].clone();
    let e = |ax| -> Result<f64> { Ok(omega.expectation(&LocalOperator::pauli_at(site.clone(), ax))?.re) };
    Ok(BlochVector { x: e(Axis::X)?, y: e(Axis::Y)?, z: e(Axis::Z)? })
}

/// Trace norm of `rho_1 - rho_2`, equal to the functional norm `|omega_1 - omega_2|`.
pub fn state_distance(o1: &DensityState, o2: &DensityState) -> Result<f64> {
    check_same_region(o1, o2)?;
    let diff = o1.matrix() - o2.matrix();
    Ok(eigenvalues_hermitian(&diff)?.iter().map(|l| l.abs()).sum())
}

/// `P(omega_1, omega_2) = 1 - |omega_1 - omega_2|^2 / 4`.
pub fn transition_probability(o1: &DensityState, o2: &DensityState) -> Result<f64> {
    let d = state_distance(o1, o2)?;
    Ok((1.0 - 0.25 * d * d).clamp(0.0, 1.0))
}

/// `omega(m)` for the polarization `m = |Lambda|^{-1} sum_n sigma^z_n`.
pub fn polarization(omega: &DensityState) -> Result<f64> {
    if omega.region().is_empty() {
        return Err(Error::EmptyRegion);
    }
    let mut total = 0.0;
    for s in omega.region().sites() {
        total += omega.expectation(&LocalOperator::pauli_at(s.clone(), Axis::Z))?.re;
    }
    Ok(total / omega.region().len() as f64)
}

/// Polarization of the all-up and all-down states on a chain of odd length.
pub fn polarization_gap(l: usize) -> Result<(f64, f64)> {
    if l % 2 == 0 {
        return Err(Error::InvalidArgument(format!("chain length {l} must be odd")));
    }
    let chain = Region::interval(-(l as i64 / 2), l as i64 / 2 + 1);
    let up = DensityState::basis(chain.clone(), &vec![0; l], 2)?;
    let down = DensityState::basis(chain, &vec![1; l], 2)?;
    Ok((polarization(&up)?, polarization(&down)?))
}
