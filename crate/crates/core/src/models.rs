//! Interactions, local Hamiltonians and the built-in model library.
//!
//! An [`Interaction`] is either a finite list of terms keyed by their support
//! or a translation-invariant family given by base terms whose smallest site
//! is the origin. Translation-invariant families are materialized on a window
//! on demand; each materialization is cached per window.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::{Arc, RwLock};

use crate::error::{Error, Result};
use crate::lattice::{Geometry, Metric, Region, Site};
use crate::states::DensityState;
use crate::tensorcore::{accumulate_embedded, c64, kron, local_commutator, pauli, Axis, ComplexMatrix, LocalOperator};

/// Largest Hilbert-space dimension assembled as a dense matrix.
pub const MAX_DENSE_DIM: usize = 1 << 14;

#[derive(Clone)]
enum Terms {
    Finite(BTreeMap<Region, LocalOperator>),
    Translation(Vec<LocalOperator>),
}

pub struct Interaction {
    site_dim: usize,
    range_hint: Option<u64>,
    terms: Terms,
    cache: RwLock<HashMap<Region, Arc<Vec<LocalOperator>>>>,
}

impl Clone for Interaction {
    fn clone(&self) -> Self {
        Interaction {
            site_dim: self.site_dim,
            range_hint: self.range_hint,
            terms: self.terms.clone(),
            cache: RwLock::new(HashMap::new()),
        }
    }
}

impl fmt::Debug for Interaction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (kind, n) = match &self.terms {
            Terms::Finite(t) => ("finite", t.len()),
            Terms::Translation(b) => ("translation-invariant", b.len()),
        };
        f.debug_struct("Interaction")
            .field("kind", &kind)
            .field("terms", &n)
            .field("site_dim", &self.site_dim)
            .field("range", &self.range())
            .finish()
    }
}

fn wrap(site: &Site, geometry: &Geometry) -> Site {
    match geometry {
        Geometry::Open => site.clone(),
        Geometry::Torus { lengths } => Site(site.0.iter().zip(lengths).map(|(&c, &l)| c.rem_euclid(l)).collect()),
    }
}

/// `op` translated by `shift`, wrapped around `geometry`. `None` when the
/// wrapped sites collide.
fn translate(op: &LocalOperator, shift: &[i64], geometry: &Geometry) -> Option<LocalOperator> {
    op.relabel(|s| wrap(&s.shifted(shift), geometry), geometry.clone()).ok()
}

fn check_term(term: &LocalOperator, site_dim: usize, hint: Option<u64>, metric: &Metric) -> Result<u64> {
    if term.site_dim() != site_dim {
        return Err(Error::SiteDimMismatch(site_dim, term.site_dim()));
    }
    if term.support().is_empty() {
        return Err(Error::InvalidInteraction("term with empty support".into()));
    }
    term.require_hermitian().map_err(|e| Error::InvalidInteraction(format!("term on {}: {e}", term.support())))?;
    let diam = metric.diameter(term.support())?;
    if let Some(c) = hint {
        if diam > c {
            return Err(Error::InvalidInteraction(format!(
                "term on {} has diameter {diam} > declared range {c}",
                term.support()
            )));
        }
    }
    Ok(diam)
}

impl Interaction {
    /// The interaction with no terms.
    pub fn zero(site_dim: usize) -> Self {
        Interaction {
            site_dim,
            range_hint: Some(0),
            terms: Terms::Finite(BTreeMap::new()),
            cache: RwLock::new(HashMap::new()),
        }
    }

    /// Finitely many terms, each keyed by its own support.
    pub fn finite(
        site_dim: usize,
        terms: impl IntoIterator<Item = LocalOperator>,
        range_hint: Option<u64>,
    ) -> Result<Self> {
        let mut map = BTreeMap::new();
        for t in terms {
            check_term(&t, site_dim, range_hint, &t.support().metric())?;
            let key = t.support().clone();
            if map.insert(key.clone(), t).is_some() {
                return Err(Error::InvalidInteraction(format!("two terms on {key}")));
            }
        }
        Ok(Interaction { site_dim, range_hint, terms: Terms::Finite(map), cache: RwLock::new(HashMap::new()) })
    }

    /// Translation-invariant family `Phi(X + x) = tau_x(Phi(X))` generated by
    /// one base term per translation class. Base terms are moved so that their
    /// smallest site is the origin.
    pub fn translation_invariant(
        site_dim: usize,
        base: impl IntoIterator<Item = LocalOperator>,
        range_hint: Option<u64>,
    ) -> Result<Self> {
        let mut anchored: BTreeMap<Region, LocalOperator> = BTreeMap::new();
        for t in base {
            check_term(&t, site_dim, range_hint, &Metric::Manhattan)?;
            let first = &t.support().sites()[0];
            let shift: Vec<i64> = first.0.iter().map(|c| -c).collect();
            let t = t.relabel(|s| s.shifted(&shift), Geometry::Open)?;
            let key = t.support().clone();
            if anchored.insert(key.clone(), t).is_some() {
                return Err(Error::InvalidInteraction(format!("two base terms in the translation class of {key}")));
            }
        }
        let dims: Vec<usize> = anchored.keys().map(|r| r.dim().unwrap()).collect();
        if dims.windows(2).any(|w| w[0] != w[1]) {
            return Err(Error::InvalidInteraction("base terms of different lattice dimension".into()));
        }
        Ok(Interaction {
            site_dim,
            range_hint,
            terms: Terms::Translation(anchored.into_values().collect()),
            cache: RwLock::new(HashMap::new()),
        })
    }

    pub fn site_dim(&self) -> usize {
        self.site_dim
    }

    pub fn range_hint(&self) -> Option<u64> {
        self.range_hint
    }

    pub fn is_translation_invariant(&self) -> bool {
        matches!(self.terms, Terms::Translation(_))
    }

    /// Base terms (translation-invariant) or all terms (finite).
    pub fn generators(&self) -> Vec<&LocalOperator> {
        match &self.terms {
            Terms::Finite(t) => t.values().collect(),
            Terms::Translation(b) => b.iter().collect(),
        }
    }

    fn term_metric(&self, t: &LocalOperator) -> Metric {
        match self.terms {
            Terms::Finite(_) => t.support().metric(),
            Terms::Translation(_) => Metric::Manhattan,
        }
    }

    fn diameter(&self, t: &LocalOperator) -> u64 {
        self.term_metric(t).diameter(t.support()).expect("terms are nonempty")
    }

    /// Largest term diameter, `c_Phi`.
    pub fn range(&self) -> u64 {
        self.generators().iter().map(|t| self.diameter(t)).max().unwrap_or(0)
    }

    /// Largest number of sites in a term, `N_Phi`.
    pub fn max_support_size(&self) -> usize {
        self.generators().iter().map(|t| t.support().len()).max().unwrap_or(0)
    }

    /// Lattice dimension of the terms, if there are any.
    pub fn lattice_dim(&self) -> Option<usize> {
        self.generators().first().and_then(|t| t.support().dim())
    }

    /// All terms whose support lies in `window`, in canonical key order.
    pub fn terms_in(&self, window: &Region) -> Arc<Vec<LocalOperator>> {
        if let Some(hit) = self.cache.read().unwrap().get(window) {
            return hit.clone();
        }
        let terms = Arc::new(self.materialize(window));
        self.cache.write().unwrap().entry(window.clone()).or_insert(terms).clone()
    }

    fn materialize(&self, window: &Region) -> Vec<LocalOperator> {
        match &self.terms {
            Terms::Finite(t) => t.values().filter(|op| op.support().is_subset_of(window)).cloned().collect(),
            Terms::Translation(base) => {
                let geometry = window.geometry();
                let mut out: BTreeMap<Vec<Site>, LocalOperator> = BTreeMap::new();
                for b in base {
                    if b.support().dim() != window.dim() {
                        continue;
                    }
                    for w in window.sites() {
                        let Some(t) = translate(b, &w.0, geometry) else { continue };
                        if !t.support().is_subset_of(window) {
                            continue;
                        }
                        let key = t.support().sites().to_vec();
                        match out.remove(&key) {
                            Some(prev) => {
                                out.insert(key, prev.add(&t).expect("same support"));
                            }
                            None => {
                                out.insert(key, t);
                            }
                        }
                    }
                }
                out.into_values().collect()
            }
        }
    }

    /// Terms whose support meets `region`, the region's geometry deciding
    /// how translates wrap.
    pub fn terms_touching(&self, region: &Region) -> Vec<LocalOperator> {
        match &self.terms {
            Terms::Finite(t) => t.values().filter(|op| op.support().intersects(region)).cloned().collect(),
            Terms::Translation(base) => {
                let geometry = region.geometry();
                let mut out: BTreeMap<Vec<Site>, LocalOperator> = BTreeMap::new();
                for b in base {
                    if b.support().dim() != region.dim() {
                        continue;
                    }
                    for a in region.sites() {
                        for s in b.support().sites() {
                            let shift = a.offset_from(s);
                            let Some(t) = translate(b, &shift, geometry) else { continue };
                            out.entry(t.support().sites().to_vec()).or_insert(t);
                        }
                    }
                }
                out.into_values().collect()
            }
        }
    }

    /// The finite interaction of all terms inside `window`.
    pub fn restricted(&self, window: &Region) -> Result<Interaction> {
        Interaction::finite(self.site_dim, self.terms_in(window).iter().cloned(), self.range_hint)
    }
}

fn require_dense(region: &Region, site_dim: usize) -> Result<usize> {
    let dim = (site_dim as u128).pow(region.len() as u32);
    if dim > MAX_DENSE_DIM as u128 {
        return Err(Error::TooLarge {
            what: "region Hilbert space",
            dim: dim.min(usize::MAX as u128) as usize,
            limit: MAX_DENSE_DIM,
        });
    }
    Ok(dim as usize)
}

/// `H_Lambda = sum_{X in Lambda} Phi(X)` as a dense operator on `region`.
pub fn local_hamiltonian(phi: &Interaction, region: &Region) -> Result<LocalOperator> {
    if region.is_empty() {
        return Ok(LocalOperator::scalar(c64::new(0.0, 0.0), phi.site_dim));
    }
    let dim = require_dense(region, phi.site_dim)?;
    let mut m = ComplexMatrix::zeros(dim, dim);
    for t in phi.terms_in(region).iter() {
        accumulate_embedded(t, region, c64::new(1.0, 0.0), &mut m)?;
    }
    LocalOperator::new(region.clone(), m, phi.site_dim)
}

/// Weight attached to the size of a term in the decay norm.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum NormWeight {
    /// `e^{lambda diam X}`.
    #[default]
    Diameter,
    /// `e^{lambda |X|}`.
    Cardinality,
}

#[derive(Clone, Debug, PartialEq)]
pub struct InteractionNorms {
    pub lambda: f64,
    /// `sup_x sum_{X ni x} |X| |Phi(X)| N^{2|X|} e^{lambda diam X}`.
    pub norm_lambda: f64,
    /// `sup_x sum_{X ni x} |Phi(X)|`.
    pub norm_bounded: f64,
    pub site_dim_bound: usize,
}

/// `sup_x sum_{X ni x} w(X)`.
fn sup_site_sum(phi: &Interaction, w: impl Fn(&LocalOperator) -> f64) -> f64 {
    match &phi.terms {
        // each base term has |X| translates containing a given site
        Terms::Translation(base) => base.iter().map(|t| t.support().len() as f64 * w(t)).sum(),
        Terms::Finite(terms) => {
            let mut per_site: BTreeMap<&Site, f64> = BTreeMap::new();
            for t in terms.values() {
                let v = w(t);
                for s in t.support().sites() {
                    *per_site.entry(s).or_default() += v;
                }
            }
            per_site.into_values().fold(0.0, f64::max)
        }
    }
}

pub fn interaction_norm_weighted(phi: &Interaction, lambda: f64, n: usize, weight: NormWeight) -> Result<f64> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidArgument(format!("lambda = {lambda} must be finite and >= 0")));
    }
    if n < 2 || n < phi.site_dim {
        return Err(Error::InvalidArgument(format!(
            "N = {n} must be >= 2 and bound the site dimension {}",
            phi.site_dim
        )));
    }
    let nf = n as f64;
    Ok(sup_site_sum(phi, |t| {
        let size = t.support().len() as f64;
        let growth = match weight {
            NormWeight::Diameter => phi.diameter(t) as f64,
            NormWeight::Cardinality => size,
        };
        size * t.norm() * nf.powf(2.0 * size) * (lambda * growth).exp()
    }))
}

/// `|Phi|_lambda` with diameter weights.
pub fn interaction_norm(phi: &Interaction, lambda: f64, n: usize) -> Result<f64> {
    interaction_norm_weighted(phi, lambda, n, NormWeight::Diameter)
}

/// `|Phi| = sup_x sum_{X ni x} |Phi(X)|`.
pub fn bounded_norm(phi: &Interaction) -> f64 {
    sup_site_sum(phi, |t| t.norm())
}

pub fn interaction_norms(phi: &Interaction, lambda: f64, n: usize) -> Result<InteractionNorms> {
    Ok(InteractionNorms {
        lambda,
        norm_lambda: interaction_norm(phi, lambda, n)?,
        norm_bounded: bounded_norm(phi),
        site_dim_bound: n,
    })
}

/// `delta(A) = i sum_{X meets supp A} [Phi(X), A]`.
pub fn derivation_apply(phi: &Interaction, a: &LocalOperator) -> Result<LocalOperator> {
    derivation_from_terms(phi, &phi.terms_touching(a.support()), a)
}

/// `delta_Lambda(A) = i [H_Lambda, A]`, using only the terms inside `window`.
pub fn derivation_within(phi: &Interaction, a: &LocalOperator, window: &Region) -> Result<LocalOperator> {
    if !a.support().is_subset_of(window) {
        return Err(Error::SupportNotContained { support: a.support().to_string(), target: window.to_string() });
    }
    let terms: Vec<LocalOperator> =
        phi.terms_in(window).iter().filter(|t| t.support().intersects(a.support())).cloned().collect();
    derivation_from_terms(phi, &terms, a)
}

fn derivation_from_terms(phi: &Interaction, terms: &[LocalOperator], a: &LocalOperator) -> Result<LocalOperator> {
    if a.site_dim() != phi.site_dim {
        return Err(Error::SiteDimMismatch(phi.site_dim, a.site_dim()));
    }
    let target = terms.iter().fold(a.support().clone(), |r, t| r.union(t.support()));
    let dim = require_dense(&target, phi.site_dim)?;
    let big = a.embed(&target)?;
    let mut acc = ComplexMatrix::zeros(dim, dim);
    for t in terms {
        let c = local_commutator(t, &big)?;
        acc += c.matrix();
    }
    Ok(LocalOperator::new(target, acc, phi.site_dim)?.scale(c64::new(0.0, 1.0)))
}

/// `E_Phi = sum_{X ni 0} Phi(X) / |X|` for a translation-invariant interaction.
pub fn energy_density_observable(phi: &Interaction, window: &Region) -> Result<LocalOperator> {
    let Terms::Translation(base) = &phi.terms else {
        return Err(Error::InvalidInteraction("energy density needs translation invariance".into()));
    };
    let mut e = LocalOperator::scalar(c64::new(0.0, 0.0), phi.site_dim);
    for b in base {
        let weight = c64::new(1.0 / b.support().len() as f64, 0.0);
        for s in b.support().sites() {
            let shift: Vec<i64> = s.0.iter().map(|c| -c).collect();
            let t = translate(b, &shift, window.geometry()).filter(|t| t.support().is_subset_of(window)).ok_or_else(
                || Error::InvalidArgument(format!("window {window} does not contain every term at the origin")),
            )?;
            e = e.add(&t.scale(weight))?;
        }
    }
    Ok(e)
}

/// `omega(E_Phi)`, the mean energy per site of a translation-invariant state.
pub fn mean_energy_density(phi: &Interaction, omega: &DensityState) -> Result<f64> {
    let e = energy_density_observable(phi, omega.region())?;
    Ok(omega.expectation(&e)?.re)
}

fn single(axis: Axis) -> LocalOperator {
    LocalOperator::pauli_at(Site::line(0), axis)
}

fn bond(pairs: &[(f64, Axis)]) -> LocalOperator {
    let mut m = ComplexMatrix::zeros(4, 4);
    for &(c, ax) in pairs {
        m += crate::tensorcore::scale(&kron(&pauli(ax), &pauli(ax)), c64::new(c, 0.0));
    }
    LocalOperator::qubits(Region::interval(0, 2), m).expect("4x4 on two sites")
}

fn nonzero(op: LocalOperator) -> Option<LocalOperator> {
    (crate::tensorcore::max_abs(op.matrix()) > 0.0).then_some(op)
}

/// Chain with `Phi({n}) = -h sigma^z_n` and `Phi({n, n+1}) = -J sigma^x_n sigma^x_{n+1}`.
pub fn ising(h: f64, j: f64) -> Interaction {
    let terms = [nonzero(single(Axis::Z).scale(c64::new(-h, 0.0))), nonzero(bond(&[(-j, Axis::X)]))];
    Interaction::translation_invariant(2, terms.into_iter().flatten(), Some(1)).expect("Ising terms are Hermitian")
}

/// XXZ-type chain with `Phi({n}) = -h sigma^z_n` and
/// `Phi({n, n+1}) = -(Jx XX + Jy YY + Jz ZZ) / 2`.
pub fn heisenberg_xxz(jx: f64, jy: f64, jz: f64, h: f64) -> Interaction {
    let terms = [
        nonzero(single(Axis::Z).scale(c64::new(-h, 0.0))),
        nonzero(bond(&[(-0.5 * jx, Axis::X), (-0.5 * jy, Axis::Y), (-0.5 * jz, Axis::Z)])),
    ];
    Interaction::translation_invariant(2, terms.into_iter().flatten(), Some(1)).expect("XXZ terms are Hermitian")
}

/// Toric code on the `L x L` torus: `-A_s` on stars and `-B_p` on plaquettes.
pub fn toric_interaction(l: usize) -> Result<Interaction> {
    crate::toric::ToricLattice::new(l)?.interaction()
}
