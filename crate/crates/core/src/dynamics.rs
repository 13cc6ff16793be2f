//! Heisenberg dynamics in finite volume, its Taylor series, and the
//! Lieb-Robinson machinery built on top of it.
//!
//! `alpha_t^Lambda(A) = e^{itH_Lambda} A e^{-itH_Lambda}` is computed exactly
//! from one eigendecomposition of `H_Lambda`, shared by every operator and
//! time evaluated on the same window ([`WindowDynamics`]).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{Geometry, Region, Site};
use crate::models::{bounded_norm, derivation_apply, interaction_norm, local_hamiltonian, Interaction};
use crate::tensorcore::{
    c64, conditional_expectation, eigenvalues_hermitian, hermitian_eig, local_commutator, operator_norm, ComplexMatrix,
    LocalOperator, Spectral,
};

/// Default decay rate used when evaluating the bounds.
pub const DEFAULT_LAMBDA: f64 = 1.0;

/// Exact dynamics on a fixed window.
#[derive(Clone, Debug)]
pub struct WindowDynamics {
    window: Region,
    site_dim: usize,
    spectral: Spectral,
}

impl WindowDynamics {
    pub fn new(phi: &Interaction, window: &Region) -> Result<Self> {
        if window.is_empty() {
            return Err(Error::EmptyRegion);
        }
        let h = local_hamiltonian(phi, window)?;
        Ok(WindowDynamics { window: window.clone(), site_dim: phi.site_dim(), spectral: hermitian_eig(h.matrix())? })
    }

    pub fn window(&self) -> &Region {
        &self.window
    }

    pub fn spectral(&self) -> &Spectral {
        &self.spectral
    }

    fn embed(&self, a: &LocalOperator) -> Result<LocalOperator> {
        if a.site_dim() != self.site_dim {
            return Err(Error::SiteDimMismatch(self.site_dim, a.site_dim()));
        }
        if !a.support().is_subset_of(&self.window) {
            return Err(Error::SupportNotContained {
                support: a.support().to_string(),
                target: self.window.to_string(),
            });
        }
        a.embed(&self.window)
    }

    /// `alpha_t(A)` as an operator on the whole window.
    pub fn evolve(&self, a: &LocalOperator, t: f64) -> Result<LocalOperator> {
        let big = self.embed(a)?;
        if t == 0.0 {
            return Ok(big);
        }
        let m = self.spectral.evolve(big.matrix(), c64::new(t, 0.0))?;
        LocalOperator::new(self.window.clone(), m, self.site_dim)
    }

    /// Ground vector (lowest eigenvector) and the gap `E_1 - E_0`.
    pub fn ground_state(&self) -> (ComplexMatrix, f64) {
        let v = &self.spectral.vectors;
        let psi = ComplexMatrix::from_fn(v.nrows(), 1, |i, _| v[(i, 0)]);
        let e = &self.spectral.values;
        let gap = if e.len() > 1 { e[1] - e[0] } else { f64::INFINITY };
        (psi, gap)
    }

    /// `<psi, A psi>` for a vector on the window.
    pub fn vector_expectation(&self, psi: &ComplexMatrix, a: &LocalOperator) -> Result<c64> {
        let big = self.embed(a)?;
        let v = big.matrix() * psi;
        Ok((0..psi.nrows()).map(|i| psi[(i, 0)].conj() * v[(i, 0)]).sum())
    }
}

/// `e^{itH_window} A e^{-itH_window}`.
pub fn heisenberg_evolve(phi: &Interaction, window: &Region, a: &LocalOperator, t: f64) -> Result<LocalOperator> {
    WindowDynamics::new(phi, window)?.evolve(a, t)
}

/// Partial sum of `exp(t delta)(A)` and the tail bound.
#[derive(Clone, Debug)]
pub struct TaylorResult {
    pub operator: LocalOperator,
    pub error_bound: f64,
    /// Ratio of the geometric majorant, `2 |Phi| e^{lambda (N_Phi - 1)} |t| / lambda`.
    pub ratio: f64,
}

/// `sum_{n <= order} t^n delta^n(A) / n!` with the tail estimate from
/// `|delta^n(A)| <= |A| n! e^{lambda (|Lambda| + 1 - N_Phi)} (2 |Phi| e^{lambda (N_Phi - 1)} / lambda)^n`.
///
/// The interaction is used as given: pass `phi.restricted(window)` for the
/// finite-volume derivation.
pub fn taylor_evolve(phi: &Interaction, a: &LocalOperator, t: f64, order: usize, lambda: f64) -> Result<TaylorResult> {
    if !(lambda > 0.0) || !lambda.is_finite() || !t.is_finite() {
        return Err(Error::InvalidArgument(format!("need finite t and lambda > 0, got t = {t}, lambda = {lambda}")));
    }
    let norm_phi = bounded_norm(phi);
    let n_phi = phi.max_support_size().max(1) as f64;
    let ratio = 2.0 * norm_phi * (lambda * (n_phi - 1.0)).exp() * t.abs() / lambda;
    if ratio >= 1.0 {
        return Err(Error::NonConvergent { ratio });
    }
    let mut sum = a.clone();
    let mut term = a.clone();
    let mut coeff = 1.0;
    let mut exact = false;
    for n in 1..=order {
        term = derivation_apply(phi, &term)?;
        if term.norm() == 0.0 {
            exact = true;
            break;
        }
        coeff *= t / n as f64;
        sum = sum.add(&term.scale(c64::new(coeff, 0.0)))?;
    }
    let error_bound = if exact || ratio == 0.0 {
        0.0
    } else {
        let size = a.support().len() as f64;
        a.norm() * (lambda * (size + 1.0 - n_phi)).exp() * ratio.powi(order as i32 + 1) / (1.0 - ratio)
    };
    Ok(TaylorResult { operator: sum, error_bound, ratio })
}

/// `|alpha_t^{Lambda_k}(A) - alpha_t^{Lambda_max}(A)|` for nested windows,
/// the largest standing in for infinite volume.
pub fn volume_convergence(phi: &Interaction, a: &LocalOperator, t: f64, windows: &[Region]) -> Result<Vec<f64>> {
    let Some(largest) = windows.last() else {
        return Ok(Vec::new());
    };
    for w in windows.windows(2) {
        if !w[0].is_subset_of(&w[1]) {
            return Err(Error::InvalidArgument(format!("windows {} and {} are not nested", w[0], w[1])));
        }
    }
    let reference = heisenberg_evolve(phi, largest, a, t)?;
    windows
        .iter()
        .map(|w| {
            if w == largest {
                return Ok(0.0);
            }
            let evolved = heisenberg_evolve(phi, w, a, t)?.embed(largest)?;
            evolved.distance(&reference)
        })
        .collect()
}

/// Constants entering the Lieb-Robinson bounds of one model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LrBoundParams {
    pub lambda: f64,
    pub phi_norm_lambda: f64,
    /// Bound on the local Hilbert space dimension.
    pub n: usize,
    pub model_tag: String,
    pub lattice_dim: Option<usize>,
}

impl LrBoundParams {
    pub fn for_interaction(phi: &Interaction, lambda: f64, n: usize, model_tag: impl Into<String>) -> Result<Self> {
        if !(lambda > 0.0) {
            return Err(Error::InvalidArgument(format!("lambda = {lambda} must be positive")));
        }
        Ok(LrBoundParams {
            lambda,
            phi_norm_lambda: interaction_norm(phi, lambda, n)?,
            n,
            model_tag: model_tag.into(),
            lattice_dim: phi.lattice_dim(),
        })
    }

    /// `2 |Phi|_lambda / lambda`.
    pub fn velocity(&self) -> f64 {
        2.0 * self.phi_norm_lambda / self.lambda
    }

    fn growth(&self, size_a: usize, dist: u64, t: f64) -> f64 {
        (self.n as f64).powi(2 * size_a as i32)
            * (2.0 * t.abs() * self.phi_norm_lambda - self.lambda * dist as f64).exp()
    }
}

/// `4 |A| |B| |Lambda_1| |Lambda_2| N^{2|Lambda_1|} e^{2|t| |Phi|_lambda - lambda d}`.
pub fn lr_bound_rough(
    params: &LrBoundParams,
    size_a: usize,
    size_b: usize,
    dist: u64,
    t: f64,
    norm_a: f64,
    norm_b: f64,
) -> f64 {
    if norm_a == 0.0 || norm_b == 0.0 {
        return 0.0;
    }
    4.0 * norm_a * norm_b * size_a as f64 * size_b as f64 * params.growth(size_a, dist, t)
}

/// The one-dimensional bound with `C = 4 / (1 - e^{-lambda})`.
pub fn lr_bound_sharp_1d(
    params: &LrBoundParams,
    size_a: usize,
    dist: u64,
    t: f64,
    norm_a: f64,
    norm_b: f64,
) -> Result<f64> {
    if params.lattice_dim != Some(1) {
        return Err(Error::InvalidArgument(format!(
            "the sharp bound is only available in one dimension (model '{}')",
            params.model_tag
        )));
    }
    if norm_a == 0.0 || norm_b == 0.0 {
        return Ok(0.0);
    }
    let c = 4.0 / (1.0 - (-params.lambda).exp());
    Ok(c * norm_a * norm_b * size_a as f64 * params.growth(size_a, dist, t))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub t: f64,
    pub dist: u64,
    /// `|[alpha_t(A), B]|`.
    pub empirical: f64,
    pub bound_rough: f64,
    pub bound_sharp: Option<f64>,
}

/// Norm of `[X, B]` for `supp B` inside `supp X`.
fn commutator_norm(x: &LocalOperator, b: &LocalOperator, hermitian: bool) -> Result<f64> {
    let c = local_commutator(b, x)?;
    let m = c.matrix();
    if !hermitian {
        return Ok(operator_norm(m));
    }
    // [X, B] is anti-Hermitian for Hermitian X and B
    let h = ComplexMatrix::from_fn(m.nrows(), m.ncols(), |i, j| (m[(i, j)] - m[(j, i)].conj()) * c64::new(0.0, 0.5));
    Ok(eigenvalues_hermitian(&h)?.iter().fold(0.0, |acc, v| acc.max(v.abs())))
}

/// `|[alpha_t(A), B]|` on the window for every `B` and every `t`, sorted by
/// `(t, dist)`.
pub fn commutator_sweep(
    phi: &Interaction,
    window: &Region,
    a: &LocalOperator,
    family: &[LocalOperator],
    t_grid: &[f64],
    params: &LrBoundParams,
) -> Result<Vec<SweepRecord>> {
    for b in family {
        if !b.support().is_subset_of(window) {
            return Err(Error::SupportNotContained { support: b.support().to_string(), target: window.to_string() });
        }
    }
    let dynamics = WindowDynamics::new(phi, window)?;
    let metric = window.metric();
    let dists: Vec<u64> =
        family.iter().map(|b| metric.region_distance(a.support(), b.support())).collect::<Result<_>>()?;
    let norm_a = a.norm();
    let a_hermitian = a.is_hermitian();
    let mut records: Vec<SweepRecord> = t_grid
        .par_iter()
        .map(|&t| -> Result<Vec<SweepRecord>> {
            let evolved = dynamics.evolve(a, t)?;
            family
                .iter()
                .zip(&dists)
                .map(|(b, &dist)| {
                    let empirical = commutator_norm(&evolved, b, a_hermitian && b.is_hermitian())?;
                    let norm_b = b.norm();
                    let size_a = a.support().len();
                    Ok(SweepRecord {
                        t,
                        dist,
                        empirical,
                        bound_rough: lr_bound_rough(params, size_a, b.support().len(), dist, t, norm_a, norm_b),
                        bound_sharp: lr_bound_sharp_1d(params, size_a, dist, t, norm_a, norm_b).ok(),
                    })
                })
                .collect()
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    records.sort_by(|x, y| x.t.total_cmp(&y.t).then(x.dist.cmp(&y.dist)));
    Ok(records)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum VelocityEstimate {
    Resolved {
        v_emp: f64,
        v_bound: f64,
        threshold: f64,
        /// `(dist, first crossing time)`.
        crossings: Vec<(u64, f64)>,
    },
    FrontNotResolved {
        v_bound: f64,
        threshold: f64,
        crossings: Vec<(u64, f64)>,
    },
}

/// First time the empirical commutator reaches `threshold`, per distance
/// `>= 1`, linearly interpolated between grid points; `v_emp` is the
/// least-squares slope of distance against crossing time.
pub fn velocity_estimate(sweep: &[SweepRecord], threshold: f64, params: &LrBoundParams) -> Result<VelocityEstimate> {
    if !(threshold > 0.0) {
        return Err(Error::InvalidArgument(format!("threshold = {threshold} must be positive")));
    }
    let mut by_dist: std::collections::BTreeMap<u64, Vec<(f64, f64)>> = Default::default();
    for r in sweep.iter().filter(|r| r.dist >= 1) {
        by_dist.entry(r.dist).or_default().push((r.t, r.empirical));
    }
    let mut crossings = Vec::new();
    for (dist, mut series) in by_dist {
        series.sort_by(|x, y| x.0.total_cmp(&y.0));
        let Some(k) = series.iter().position(|&(_, e)| e >= threshold) else {
            continue;
        };
        let time = if k == 0 {
            series[0].0
        } else {
            let (t0, e0) = series[k - 1];
            let (t1, e1) = series[k];
            t0 + (threshold - e0) * (t1 - t0) / (e1 - e0)
        };
        crossings.push((dist, time));
    }
    let v_bound = params.velocity();
    let n = crossings.len() as f64;
    let mean_t = crossings.iter().map(|c| c.1).sum::<f64>() / n;
    let mean_d = crossings.iter().map(|c| c.0 as f64).sum::<f64>() / n;
    let stt: f64 = crossings.iter().map(|c| (c.1 - mean_t).powi(2)).sum();
    if crossings.len() < 2 || stt <= 0.0 {
        return Ok(VelocityEstimate::FrontNotResolved { v_bound, threshold, crossings });
    }
    let std: f64 = crossings.iter().map(|c| (c.1 - mean_t) * (c.0 as f64 - mean_d)).sum();
    Ok(VelocityEstimate::Resolved { v_emp: std / stt, v_bound, threshold, crossings })
}

/// Conditional expectation of `alpha_t(A)` onto the `radius`-fattening of
/// `supp A`, and its relative error.
pub fn localize_evolved(
    phi: &Interaction,
    a: &LocalOperator,
    t: f64,
    radius: u64,
    window: &Region,
) -> Result<(LocalOperator, f64)> {
    let metric = window.metric();
    let escapes = a.support().sites().iter().any(|x| !ball_inside(window, x, radius));
    if escapes {
        return Err(Error::InvalidArgument(format!(
            "the radius-{radius} fattening of {} leaves the window {window}",
            a.support()
        )));
    }
    let fattened = metric.fattening(a.support(), radius, window)?;
    let exact = heisenberg_evolve(phi, window, a, t)?;
    let approx = conditional_expectation(&exact, &fattened)?;
    let err = approx.embed(window)?.distance(&exact)? / a.norm().max(f64::MIN_POSITIVE);
    Ok((approx, err))
}

/// Whether every lattice site within `radius` of `x` belongs to `window`.
fn ball_inside(window: &Region, x: &Site, radius: u64) -> bool {
    let r = radius as i64;
    let mut offsets: Vec<Vec<i64>> = vec![Vec::new()];
    for _ in 0..x.dim() {
        offsets = offsets
            .into_iter()
            .flat_map(|o| (-r..=r).map(move |k| [o.as_slice(), &[k]].concat()))
            .filter(|o| o.iter().map(|c| c.unsigned_abs()).sum::<u64>() <= radius)
            .collect();
    }
    offsets.iter().all(|o| {
        let y = x.shifted(o);
        match window.geometry() {
            Geometry::Open => window.contains(&y),
            Geometry::Torus { lengths } => {
                let wrapped = y.0.iter().zip(lengths).map(|(c, l)| c.rem_euclid(*l)).collect();
                window.contains(&Site(wrapped))
            }
        }
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusteringResult {
    /// `(dist, |omega(AB) - omega(A) omega(B)|)` in input order.
    pub points: Vec<(u64, f64)>,
    pub gap: f64,
    pub degenerate: bool,
    /// Decay rate from a least-squares fit of `ln|c|` against distance over
    /// `dist >= 2`; absent when degenerate or with fewer than two points.
    pub mu_fit: Option<f64>,
}

/// Relative gap below which the ground state is treated as degenerate.
pub const DEGENERACY_TOL: f64 = 1e-8;

/// Connected ground-state correlations of observable pairs on a window.
pub fn clustering_sweep(
    phi: &Interaction,
    window: &Region,
    pairs: &[(LocalOperator, LocalOperator)],
) -> Result<ClusteringResult> {
    let dynamics = WindowDynamics::new(phi, window)?;
    let (psi, gap) = dynamics.ground_state();
    let scale = dynamics.spectral().values.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let degenerate = gap <= DEGENERACY_TOL * scale;
    let metric = window.metric();
    let mut points = Vec::with_capacity(pairs.len());
    for (a, b) in pairs {
        let dist = metric.region_distance(a.support(), b.support())?;
        let ab = dynamics.vector_expectation(&psi, &a.dot(b)?)?;
        let ea = dynamics.vector_expectation(&psi, a)?;
        let eb = dynamics.vector_expectation(&psi, b)?;
        points.push((dist, (ab - ea * eb).norm()));
    }
    let fit: Vec<(f64, f64)> =
        points.iter().filter(|&&(d, c)| d >= 2 && c > 0.0).map(|&(d, c)| (d as f64, c.ln())).collect();
    let mu_fit = if degenerate || fit.len() < 2 {
        None
    } else {
        let n = fit.len() as f64;
        let mx = fit.iter().map(|p| p.0).sum::<f64>() / n;
        let my = fit.iter().map(|p| p.1).sum::<f64>() / n;
        let sxx: f64 = fit.iter().map(|p| (p.0 - mx).powi(2)).sum();
        let sxy: f64 = fit.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        (sxx > 0.0).then(|| -sxy / sxx)
    };
    Ok(ClusteringResult { points, gap, degenerate, mu_fit })
}
