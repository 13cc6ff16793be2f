//! Dense complex-matrix kernel.
//!
//! Matrices are [`faer::Mat`] over `c64`. A [`LocalOperator`] pairs a matrix
//! with the region it acts on. Tensor products follow the row-major Kronecker
//! convention: for sites `s_0 < s_1 < ... < s_{n-1}` in canonical region order
//! the basis index is `i_0 d^{n-1} + i_1 d^{n-2} + ... + i_{n-1}`, so
//! `kron(A, B)[(i*dB + k, j*dB + l)] = A[(i, j)] * B[(k, l)]`.
//!
//! Every matrix function (exponentials at real or complex time included) goes
//! through the Hermitian eigendecomposition in [`Spectral`].

use std::fmt;

use faer::Side;

use crate::error::{Error, Result};
use crate::lattice::{Geometry, Region, Site};

pub use faer::c64;

pub type ComplexMatrix = faer::Mat<c64>;

/// Relative tolerance for Hermiticity checks.
pub const HERMITIAN_TOL: f64 = 1e-10;

/// Largest exponent argument accepted by complex-time evolution.
pub const EXP_GUARD: f64 = 700.0;

const I: c64 = c64 { re: 0.0, im: 1.0 };
const ONE: c64 = c64 { re: 1.0, im: 0.0 };
const ZERO: c64 = c64 { re: 0.0, im: 0.0 };

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];
}

/// The 2x2 Pauli matrix along `axis`.
pub fn pauli(axis: Axis) -> ComplexMatrix {
    let mut m = ComplexMatrix::zeros(2, 2);
    match axis {
        Axis::X => {
            m[(0, 1)] = ONE;
            m[(1, 0)] = ONE;
        }
        Axis::Y => {
            m[(0, 1)] = -I;
            m[(1, 0)] = I;
        }
        Axis::Z => {
            m[(0, 0)] = ONE;
            m[(1, 1)] = -ONE;
        }
    }
    m
}

pub fn identity(n: usize) -> ComplexMatrix {
    ComplexMatrix::identity(n, n)
}

pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let (ra, ca) = (a.nrows(), a.ncols());
    let (rb, cb) = (b.nrows(), b.ncols());
    ComplexMatrix::from_fn(ra * rb, ca * cb, |i, j| a[(i / rb, j / cb)] * b[(i % rb, j % cb)])
}

pub fn scale(m: &ComplexMatrix, c: c64) -> ComplexMatrix {
    ComplexMatrix::from_fn(m.nrows(), m.ncols(), |i, j| c * m[(i, j)])
}

pub fn adjoint(m: &ComplexMatrix) -> ComplexMatrix {
    m.adjoint().to_owned()
}

pub fn trace(m: &ComplexMatrix) -> c64 {
    (0..m.nrows().min(m.ncols())).map(|i| m[(i, i)]).sum()
}

/// `Tr(a b)` without forming the product.
pub fn trace_product(a: &ComplexMatrix, b: &ComplexMatrix) -> c64 {
    let n = a.nrows();
    let mut acc = ZERO;
    for j in 0..n {
        for i in 0..n {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc
}

pub fn frobenius_norm(m: &ComplexMatrix) -> f64 {
    m.norm_l2()
}

pub fn max_abs(m: &ComplexMatrix) -> f64 {
    m.norm_max()
}

pub fn is_finite(m: &ComplexMatrix) -> bool {
    (0..m.ncols()).all(|j| (0..m.nrows()).all(|i| m[(i, j)].re.is_finite() && m[(i, j)].im.is_finite()))
}

fn is_diagonal(m: &ComplexMatrix) -> bool {
    let n = m.nrows();
    (0..n).all(|j| (0..n).all(|i| i == j || m[(i, j)] == ZERO))
}

/// Frobenius norm of `m - m*`.
pub fn hermiticity_defect(m: &ComplexMatrix) -> f64 {
    let n = m.nrows();
    let mut acc = 0.0;
    for j in 0..n {
        for i in 0..n {
            acc += (m[(i, j)] - m[(j, i)].conj()).norm_sqr();
        }
    }
    acc.sqrt()
}

/// Checks `|m - m*| <= 1e-10 max(1, |m|)`, with Frobenius norms on both sides.
pub fn require_hermitian(m: &ComplexMatrix) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::BadShape(format!("{}x{}", m.nrows(), m.ncols())));
    }
    let defect = hermiticity_defect(m);
    let tolerance = HERMITIAN_TOL * frobenius_norm(m).max(1.0);
    if defect > tolerance || defect.is_nan() {
        return Err(Error::NotHermitian { defect, tolerance });
    }
    Ok(())
}

/// Largest entry of `|u* u - 1|`.
pub fn unitarity_defect(u: &ComplexMatrix) -> f64 {
    let g = u.adjoint() * u;
    max_abs(&(&g - identity(u.nrows())))
}

fn hermitian_part(m: &ComplexMatrix) -> ComplexMatrix {
    ComplexMatrix::from_fn(m.nrows(), m.ncols(), |i, j| (m[(i, j)] + m[(j, i)].conj()) * 0.5)
}

fn eigenvalues_of_hermitian(m: &ComplexMatrix) -> Result<Vec<f64>> {
    m.self_adjoint_eigenvalues(Side::Lower).map_err(|e| Error::Eigen(format!("{e:?}")))
}

/// Hermitian eigenvalues in ascending order, after the Hermiticity check.
pub fn eigenvalues_hermitian(m: &ComplexMatrix) -> Result<Vec<f64>> {
    require_hermitian(m)?;
    eigenvalues_of_hermitian(m)
}

/// Operator norm (largest singular value).
///
/// Normal special cases (diagonal, Hermitian, anti-Hermitian) are read off
/// the spectrum; everything else goes through the singular values.
pub fn operator_norm(m: &ComplexMatrix) -> f64 {
    let n = m.nrows();
    if n == 0 || m.ncols() == 0 {
        return 0.0;
    }
    if n == m.ncols() {
        if is_diagonal(m) {
            return (0..n).map(|i| m[(i, i)].norm()).fold(0.0, f64::max);
        }
        let scale = frobenius_norm(m);
        if scale == 0.0 {
            return 0.0;
        }
        let tight = 1e-14 * scale;
        let spectral_radius = |h: &ComplexMatrix| {
            eigenvalues_of_hermitian(h).ok().map(|ev| ev.iter().fold(0.0f64, |a, x| a.max(x.abs())))
        };
        if hermiticity_defect(m) <= tight {
            if let Some(r) = spectral_radius(&hermitian_part(m)) {
                return r;
            }
        }
        let im = scale_ref(m, I);
        if hermiticity_defect(&im) <= tight {
            if let Some(r) = spectral_radius(&hermitian_part(&im)) {
                return r;
            }
        }
    }
    m.singular_values().map(|s| s.first().copied().unwrap_or(0.0)).unwrap_or(f64::NAN)
}

fn scale_ref(m: &ComplexMatrix, c: c64) -> ComplexMatrix {
    scale(m, c)
}

/// Eigendecomposition `A = V diag(values) V*` of a Hermitian matrix.
#[derive(Clone, Debug)]
pub struct Spectral {
    /// Eigenvalues in ascending order.
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors as columns.
    pub vectors: ComplexMatrix,
}

pub fn hermitian_eig(m: &ComplexMatrix) -> Result<Spectral> {
    require_hermitian(m)?;
    let eig = m.self_adjoint_eigen(Side::Lower).map_err(|e| Error::Eigen(format!("{e:?}")))?;
    let s = eig.S().column_vector();
    let values = (0..s.nrows()).map(|i| s[i].re).collect();
    Ok(Spectral { values, vectors: eig.U().to_owned() })
}

impl Spectral {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn max(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    /// Width of the spectrum, `E_max - E_min`.
    pub fn spread(&self) -> f64 {
        self.max() - self.min()
    }

    /// `V f(D) V*`.
    pub fn apply_fn(&self, f: impl Fn(f64) -> c64) -> ComplexMatrix {
        let v = &self.vectors;
        let fd: Vec<c64> = self.values.iter().map(|&x| f(x)).collect();
        let scaled = ComplexMatrix::from_fn(v.nrows(), v.ncols(), |i, j| v[(i, j)] * fd[j]);
        &scaled * v.adjoint()
    }

    pub fn reconstruct(&self) -> ComplexMatrix {
        self.apply_fn(|x| c64::new(x, 0.0))
    }

    /// `V* m V`.
    pub fn to_eigenbasis(&self, m: &ComplexMatrix) -> ComplexMatrix {
        self.vectors.adjoint() * m * &self.vectors
    }

    /// `V m V*`.
    pub fn from_eigenbasis(&self, m: &ComplexMatrix) -> ComplexMatrix {
        &self.vectors * m * self.vectors.adjoint()
    }

    fn check_guard(&self, z: c64) -> Result<()> {
        let arg = z.im.abs() * self.spread();
        if arg > EXP_GUARD {
            return Err(Error::OverflowGuard { value: arg, limit: EXP_GUARD });
        }
        Ok(())
    }

    /// Entrywise `m[j,k] exp(i z (E_j - E_k))`: the evolution of an operator
    /// already expressed in the eigenbasis.
    pub fn evolve_in_eigenbasis(&self, m: &ComplexMatrix, z: c64) -> Result<ComplexMatrix> {
        self.check_guard(z)?;
        let e = &self.values;
        Ok(ComplexMatrix::from_fn(m.nrows(), m.ncols(), |j, k| m[(j, k)] * (I * z * (e[j] - e[k])).exp()))
    }

    /// `e^{izH} m e^{-izH}`.
    pub fn evolve(&self, m: &ComplexMatrix, z: c64) -> Result<ComplexMatrix> {
        let eig = self.evolve_in_eigenbasis(&self.to_eigenbasis(m), z)?;
        Ok(self.from_eigenbasis(&eig))
    }

    /// `e^{izH}`.
    pub fn propagator(&self, z: c64) -> Result<ComplexMatrix> {
        self.check_guard(z)?;
        let e0 = self.min();
        // a global phase/scale would cancel in conjugation, not here
        Ok(self.apply_fn(|x| (I * z * (x - e0)).exp() * (I * z * e0).exp()))
    }
}

/// A matrix together with the ordered set of sites it acts on.
#[derive(Clone)]
pub struct LocalOperator {
    support: Region,
    matrix: ComplexMatrix,
    site_dim: usize,
}

impl fmt::Debug for LocalOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LocalOperator")
            .field("support", &self.support.to_string())
            .field("dim", &self.dim())
            .field("site_dim", &self.site_dim)
            .finish()
    }
}

fn pow(d: usize, n: usize) -> usize {
    d.checked_pow(n as u32).expect("Hilbert space dimension overflows usize")
}

/// `stride[k] = d^{n-1-k}` for the legs of an n-site register.
fn strides(n: usize, d: usize) -> Vec<usize> {
    let mut s = vec![1; n];
    for k in (0..n.saturating_sub(1)).rev() {
        s[k] = s[k + 1] * d;
    }
    s
}

/// Offsets in the big register of every basis index on the given legs.
fn leg_offsets(legs: &[usize], strides: &[usize], d: usize) -> Vec<usize> {
    let mut out = vec![0usize];
    for &leg in legs {
        let stride = strides[leg];
        let mut next = Vec::with_capacity(out.len() * d);
        for &o in &out {
            for digit in 0..d {
                next.push(o + digit * stride);
            }
        }
        out = next;
    }
    out
}

/// Offsets of the legs of `sub` and of the remaining legs inside `target`.
fn leg_layout(sub: &Region, target: &Region, d: usize) -> (Vec<usize>, Vec<usize>) {
    let n = target.len();
    let st = strides(n, d);
    let legs: Vec<usize> = sub.sites().iter().map(|s| target.position(s).unwrap()).collect();
    let rest: Vec<usize> = (0..n).filter(|k| !legs.contains(k)).collect();
    (leg_offsets(&legs, &st, d), leg_offsets(&rest, &st, d))
}

impl LocalOperator {
    pub fn new(support: Region, matrix: ComplexMatrix, site_dim: usize) -> Result<Self> {
        if site_dim < 2 {
            return Err(Error::InvalidArgument(format!("site dimension {site_dim} < 2")));
        }
        let want = pow(site_dim, support.len());
        if matrix.nrows() != want || matrix.ncols() != want {
            return Err(Error::BadShape(format!(
                "{}x{} matrix on {} sites of dimension {site_dim}",
                matrix.nrows(),
                matrix.ncols(),
                support.len()
            )));
        }
        if !is_finite(&matrix) {
            return Err(Error::NonFinite);
        }
        Ok(LocalOperator { support, matrix, site_dim })
    }

    /// An operator on spin-1/2 sites.
    pub fn qubits(support: Region, matrix: ComplexMatrix) -> Result<Self> {
        Self::new(support, matrix, 2)
    }

    /// `c` times the identity, with empty support.
    pub fn scalar(c: c64, site_dim: usize) -> Self {
        let mut m = ComplexMatrix::zeros(1, 1);
        m[(0, 0)] = c;
        LocalOperator { support: Region::empty(), matrix: m, site_dim }
    }

    pub fn identity_on(support: Region, site_dim: usize) -> Self {
        let n = pow(site_dim, support.len());
        LocalOperator { support, matrix: identity(n), site_dim }
    }

    pub fn on_site(site: Site, matrix: ComplexMatrix) -> Result<Self> {
        let d = matrix.nrows();
        Self::new(Region::singleton(site), matrix, d)
    }

    pub fn pauli_at(site: Site, axis: Axis) -> Self {
        LocalOperator { support: Region::singleton(site), matrix: pauli(axis), site_dim: 2 }
    }

    /// Tensor product of single-site matrices placed on distinct sites.
    pub fn product(factors: Vec<(Site, ComplexMatrix)>) -> Result<Self> {
        let Some(d) = factors.first().map(|f| f.1.nrows()) else {
            return Err(Error::InvalidArgument("empty tensor product".into()));
        };
        let mut factors = factors;
        factors.sort_by(|a, b| a.0.cmp(&b.0));
        if factors.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidArgument("repeated site in tensor product".into()));
        }
        let mut m = identity(1);
        for (_, f) in &factors {
            if f.nrows() != d || f.ncols() != d {
                return Err(Error::SiteDimMismatch(d, f.nrows()));
            }
            m = kron(&m, f);
        }
        let support = Region::open(factors.into_iter().map(|f| f.0))?;
        Self::new(support, m, d)
    }

    /// `prod_j sigma^{axis_j}_{site_j}`.
    pub fn pauli_string(factors: &[(Site, Axis)]) -> Result<Self> {
        Self::product(factors.iter().map(|(s, a)| (s.clone(), pauli(*a))).collect())
    }

    pub fn support(&self) -> &Region {
        &self.support
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn site_dim(&self) -> usize {
        self.site_dim
    }

    /// Hilbert-space dimension of the support.
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Replaces the support by the same sites under different boundary conditions.
    pub fn with_support(mut self, support: Region) -> Result<Self> {
        if support.sites() != self.support.sites() {
            return Err(Error::InvalidArgument("with_support must keep the sites".into()));
        }
        self.support = support;
        Ok(self)
    }

    fn check_site_dim(&self, other: &LocalOperator) -> Result<()> {
        if self.site_dim != other.site_dim {
            return Err(Error::SiteDimMismatch(self.site_dim, other.site_dim));
        }
        Ok(())
    }

    /// The same operator acting on `target`, padded with identities.
    pub fn embed(&self, target: &Region) -> Result<LocalOperator> {
        if !self.support.is_subset_of(target) {
            return Err(Error::SupportNotContained { support: self.support.to_string(), target: target.to_string() });
        }
        if self.support.len() == target.len() {
            return Ok(LocalOperator { support: target.clone(), matrix: self.matrix.clone(), site_dim: self.site_dim });
        }
        let d = self.site_dim;
        let n = target.len();
        let (inner, outer) = leg_layout(&self.support, target, d);
        let big = pow(d, n);
        let mut m = ComplexMatrix::zeros(big, big);
        for (j, &oj) in inner.iter().enumerate() {
            for (i, &oi) in inner.iter().enumerate() {
                let a = self.matrix[(i, j)];
                if a == ZERO {
                    continue;
                }
                for &e in &outer {
                    m[(e + oi, e + oj)] = a;
                }
            }
        }
        Ok(LocalOperator { support: target.clone(), matrix: m, site_dim: d })
    }

    /// Embeds both operators into the union of their supports.
    pub fn align(&self, other: &LocalOperator) -> Result<(LocalOperator, LocalOperator)> {
        self.check_site_dim(other)?;
        let union = self.support.union(&other.support);
        Ok((self.embed(&union)?, other.embed(&union)?))
    }

    pub fn adjoint(&self) -> LocalOperator {
        LocalOperator { support: self.support.clone(), matrix: adjoint(&self.matrix), site_dim: self.site_dim }
    }

    /// Operator product `self * other` on the union of supports.
    pub fn dot(&self, other: &LocalOperator) -> Result<LocalOperator> {
        let (a, b) = self.align(other)?;
        Ok(LocalOperator { matrix: &a.matrix * &b.matrix, ..a })
    }

    pub fn add(&self, other: &LocalOperator) -> Result<LocalOperator> {
        let (a, b) = self.align(other)?;
        Ok(LocalOperator { matrix: &a.matrix + &b.matrix, ..a })
    }

    pub fn sub(&self, other: &LocalOperator) -> Result<LocalOperator> {
        let (a, b) = self.align(other)?;
        Ok(LocalOperator { matrix: &a.matrix - &b.matrix, ..a })
    }

    pub fn scale(&self, c: c64) -> LocalOperator {
        LocalOperator { support: self.support.clone(), matrix: scale(&self.matrix, c), site_dim: self.site_dim }
    }

    pub fn norm(&self) -> f64 {
        operator_norm(&self.matrix)
    }

    pub fn trace(&self) -> c64 {
        trace(&self.matrix)
    }

    /// `|self - other|` in operator norm, on the union of supports.
    pub fn distance(&self, other: &LocalOperator) -> Result<f64> {
        Ok(self.sub(other)?.norm())
    }

    pub fn require_hermitian(&self) -> Result<()> {
        require_hermitian(&self.matrix)
    }

    pub fn is_hermitian(&self) -> bool {
        self.require_hermitian().is_ok()
    }

    pub fn require_unitary(&self) -> Result<()> {
        let defect = unitarity_defect(&self.matrix);
        if defect > 1e-10 || defect.is_nan() {
            return Err(Error::NotUnitary { defect });
        }
        Ok(())
    }

    /// Moves the operator to new sites, `site -> f(site)`, permuting legs so
    /// that the result is in canonical order. `f` must be injective on the support.
    pub fn relabel(&self, f: impl Fn(&Site) -> Site, geometry: Geometry) -> Result<LocalOperator> {
        let new_sites: Vec<Site> = self.support.sites().iter().map(&f).collect();
        let support = Region::new(new_sites.clone(), geometry)?;
        if support.len() != new_sites.len() {
            return Err(Error::InvalidArgument("relabelling is not injective".into()));
        }
        let d = self.site_dim;
        let n = new_sites.len();
        let st = strides(n, d);
        let legs: Vec<usize> = new_sites.iter().map(|s| support.position(s).unwrap()).collect();
        if legs.iter().enumerate().all(|(k, &l)| k == l) {
            return Ok(LocalOperator { support, matrix: self.matrix.clone(), site_dim: d });
        }
        let map = leg_offsets(&legs, &st, d);
        let mut m = ComplexMatrix::zeros(self.dim(), self.dim());
        for j in 0..self.dim() {
            for i in 0..self.dim() {
                m[(map[i], map[j])] = self.matrix[(i, j)];
            }
        }
        Ok(LocalOperator { support, matrix: m, site_dim: d })
    }

    /// `e^{iK}` for Hermitian `K`.
    pub fn exp_i(&self) -> Result<LocalOperator> {
        let spec = hermitian_eig(&self.matrix)?;
        Ok(LocalOperator {
            support: self.support.clone(),
            matrix: spec.apply_fn(|x| (I * x).exp()),
            site_dim: self.site_dim,
        })
    }
}

/// `[A, B] = AB - BA` on the union of the supports.
pub fn commutator(a: &LocalOperator, b: &LocalOperator) -> Result<LocalOperator> {
    a.check_site_dim(b)?;
    if !a.support.intersects(&b.support) {
        let union = a.support.union(&b.support);
        let n = pow(a.site_dim, union.len());
        return Ok(LocalOperator { support: union, matrix: ComplexMatrix::zeros(n, n), site_dim: a.site_dim });
    }
    let (a, b) = a.align(b)?;
    let matrix = if is_diagonal(&b.matrix) {
        diag_commutator(&a.matrix, &b.matrix, false)
    } else if is_diagonal(&a.matrix) {
        diag_commutator(&b.matrix, &a.matrix, true)
    } else {
        &a.matrix * &b.matrix - &b.matrix * &a.matrix
    };
    Ok(LocalOperator { matrix, ..a })
}

/// `[M, D]` (or `[D, M]` when `flip`) for diagonal `D`.
fn diag_commutator(m: &ComplexMatrix, d: &ComplexMatrix, flip: bool) -> ComplexMatrix {
    let sign = if flip { -1.0 } else { 1.0 };
    ComplexMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * (d[(j, j)] - d[(i, i)]) * sign)
}

/// `e^{izH} A e^{-izH}` for Hermitian `H` and complex time `z`.
pub fn evolve_operator(h: &LocalOperator, a: &LocalOperator, z: c64) -> Result<LocalOperator> {
    let (h, a) = h.align(a)?;
    let spec = hermitian_eig(&h.matrix)?;
    let matrix = spec.evolve(&a.matrix, z)?;
    Ok(LocalOperator { matrix, ..a })
}

/// Trace over the legs of `A` outside `keep`.
pub fn partial_trace(a: &LocalOperator, keep: &Region) -> Result<LocalOperator> {
    if !keep.is_subset_of(&a.support) {
        return Err(Error::SupportNotContained { support: keep.to_string(), target: a.support.to_string() });
    }
    let d = a.site_dim;
    let (inner, outer) = leg_layout(keep, &a.support, d);
    let m = &a.matrix;
    let small = ComplexMatrix::from_fn(inner.len(), inner.len(), |i, j| {
        outer.iter().map(|&e| m[(e + inner[i], e + inner[j])]).sum()
    });
    let support = Region::new(keep.sites().to_vec(), a.support.geometry().clone())?;
    Ok(LocalOperator { support, matrix: small, site_dim: d })
}

/// Adds `coeff * (t (x) 1)` to `out`, the matrix of an operator on `target`.
pub fn accumulate_embedded(t: &LocalOperator, target: &Region, coeff: c64, out: &mut ComplexMatrix) -> Result<()> {
    if !t.support.is_subset_of(target) {
        return Err(Error::SupportNotContained { support: t.support.to_string(), target: target.to_string() });
    }
    let big = pow(t.site_dim, target.len());
    if out.nrows() != big || out.ncols() != big {
        return Err(Error::DimensionMismatch { expected: big, found: out.nrows() });
    }
    let (inner, outer) = leg_layout(&t.support, target, t.site_dim);
    for (j, &oj) in inner.iter().enumerate() {
        for (i, &oi) in inner.iter().enumerate() {
            let v = coeff * t.matrix[(i, j)];
            if v == ZERO {
                continue;
            }
            for &e in &outer {
                out[(e + oi, e + oj)] += v;
            }
        }
    }
    Ok(())
}

/// `(t (x) 1) a` and `a (t (x) 1)` for `supp(t)` inside `supp(a)`, without
/// forming the padded matrix. Cost is `dim(a)^2 dim(t)`.
fn local_products(t: &LocalOperator, a: &LocalOperator) -> (ComplexMatrix, ComplexMatrix) {
    let (inner, outer) = leg_layout(&t.support, &a.support, t.site_dim);
    let n = a.dim();
    let k = inner.len();
    let tm = &t.matrix;
    let am = &a.matrix;
    let mut left = ComplexMatrix::zeros(n, n);
    let mut right = ComplexMatrix::zeros(n, n);
    for c in 0..n {
        for &e in &outer {
            for i in 0..k {
                let mut acc = ZERO;
                for j in 0..k {
                    acc += tm[(i, j)] * am[(e + inner[j], c)];
                }
                left[(e + inner[i], c)] = acc;
            }
        }
    }
    for &e in &outer {
        for j in 0..k {
            for i in 0..k {
                let tij = tm[(i, j)];
                if tij == ZERO {
                    continue;
                }
                for r in 0..n {
                    right[(r, e + inner[j])] += am[(r, e + inner[i])] * tij;
                }
            }
        }
    }
    (left, right)
}

/// `[t, a]` computed on `supp(a)` when `supp(t)` is contained in it; falls
/// back to [`commutator`] otherwise.
pub fn local_commutator(t: &LocalOperator, a: &LocalOperator) -> Result<LocalOperator> {
    t.check_site_dim(a)?;
    if !t.support.is_subset_of(&a.support) || t.support.len() == a.support.len() {
        return commutator(t, a);
    }
    let (left, right) = local_products(t, a);
    Ok(LocalOperator { support: a.support.clone(), matrix: left - right, site_dim: a.site_dim })
}

/// Normalized partial trace onto `onto`: the average of `(1 (x) U) A (1 (x) U)*`
/// over the unitaries `U` of the complement.
///
/// If `|[A, P]| <= eps |A|` for every Pauli string `P` on the complement, then
/// `|A - E(A)| <= eps |A|`; Pauli strings are a unitary 1-design, so the
/// twirl equals the average of `P A P*` and the constant in that estimate is 1.
pub fn conditional_expectation(a: &LocalOperator, onto: &Region) -> Result<LocalOperator> {
    let reduced = partial_trace(a, onto)?;
    let comp = pow(a.site_dim, a.support.len() - onto.len()) as f64;
    Ok(reduced.scale(c64::new(1.0 / comp, 0.0)))
}

/// `re+imj` with 17 significant digits per component.
pub fn format_complex(c: c64) -> String {
    format!("{:.16e}{:+.16e}j", c.re, c.im)
}

/// Rows of `re+imj` entries separated by spaces.
pub fn format_matrix(m: &ComplexMatrix) -> String {
    let mut out = String::new();
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format_complex(m[(i, j)])).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}
