//! Finite sublattices of Z^d and of d-dimensional tori.
//!
//! A [`Region`] keeps its sites in lexicographic order of their coordinates.
//! That order is the tensor-leg order used by every operator in the crate:
//! the first site of a region is the most significant digit of a basis index.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A lattice site given by its integer coordinates.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Site(pub Vec<i64>);

impl Site {
    pub fn new(coords: impl Into<Vec<i64>>) -> Self {
        Site(coords.into())
    }

    /// A site on the one-dimensional lattice.
    pub fn line(x: i64) -> Self {
        Site(vec![x])
    }

    pub fn origin(dim: usize) -> Self {
        Site(vec![0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[i64] {
        &self.0
    }

    pub fn shifted(&self, by: &[i64]) -> Site {
        Site(self.0.iter().zip(by).map(|(a, b)| a + b).collect())
    }

    /// Coordinate-wise difference `self - other`.
    pub fn offset_from(&self, other: &Site) -> Vec<i64> {
        self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect()
    }
}

impl fmt::Display for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

/// Boundary conditions of a region.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Geometry {
    #[default]
    Open,
    Torus {
        lengths: Vec<i64>,
    },
}

/// An ordered, duplicate-free set of sites.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "RegionRepr")]
pub struct Region {
    sites: Vec<Site>,
    geometry: Geometry,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RegionRepr {
    sites: Vec<Site>,
    #[serde(default)]
    geometry: Geometry,
}

impl TryFrom<RegionRepr> for Region {
    type Error = Error;

    fn try_from(repr: RegionRepr) -> Result<Self> {
        Region::new(repr.sites, repr.geometry)
    }
}

impl Region {
    /// Builds a region, sorting and deduplicating the sites.
    pub fn new(sites: impl IntoIterator<Item = Site>, geometry: Geometry) -> Result<Self> {
        let set: BTreeSet<Site> = sites.into_iter().collect();
        let sites: Vec<Site> = set.into_iter().collect();
        if let Some(first) = sites.first() {
            let d = first.dim();
            if d == 0 {
                return Err(Error::InvalidRegion("sites must have dimension >= 1".into()));
            }
            if let Some(bad) = sites.iter().find(|s| s.dim() != d) {
                return Err(Error::DimensionMismatch { expected: d, found: bad.dim() });
            }
            if let Geometry::Torus { lengths } = &geometry {
                if lengths.len() != d {
                    return Err(Error::DimensionMismatch { expected: lengths.len(), found: d });
                }
                if lengths.iter().any(|&l| l <= 0) {
                    return Err(Error::InvalidRegion("torus lengths must be positive".into()));
                }
                for s in &sites {
                    if s.0.iter().zip(lengths).any(|(&c, &l)| c < 0 || c >= l) {
                        return Err(Error::InvalidRegion(format!("site {s} outside torus {lengths:?}")));
                    }
                }
            }
        }
        Ok(Region { sites, geometry })
    }

    pub fn open(sites: impl IntoIterator<Item = Site>) -> Result<Self> {
        Self::new(sites, Geometry::Open)
    }

    /// The empty region (support of multiples of the identity).
    pub fn empty() -> Self {
        Region { sites: Vec::new(), geometry: Geometry::Open }
    }

    /// Sites `start..end` on the line.
    pub fn interval(start: i64, end: i64) -> Self {
        Region { sites: (start..end).map(Site::line).collect(), geometry: Geometry::Open }
    }

    /// Sites `0..n` on the line.
    pub fn chain(n: usize) -> Self {
        Self::interval(0, n as i64)
    }

    /// The box `lower[i] <= x[i] < upper[i]` in Z^d.
    pub fn cuboid(lower: &[i64], upper: &[i64]) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch { expected: lower.len(), found: upper.len() });
        }
        let mut sites = vec![Vec::new()];
        for (&lo, &hi) in lower.iter().zip(upper) {
            let mut next = Vec::new();
            for prefix in &sites {
                for c in lo..hi {
                    let mut p: Vec<i64> = prefix.clone();
                    p.push(c);
                    next.push(p);
                }
            }
            sites = next;
        }
        Self::open(sites.into_iter().map(Site))
    }

    pub fn singleton(site: Site) -> Self {
        Region { sites: vec![site], geometry: Geometry::Open }
    }

    /// Same sites, different boundary conditions.
    pub fn with_geometry(self, geometry: Geometry) -> Result<Self> {
        Self::new(self.sites, geometry)
    }

    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    /// Lattice dimension, or `None` for the empty region.
    pub fn dim(&self) -> Option<usize> {
        self.sites.first().map(Site::dim)
    }

    pub fn contains(&self, site: &Site) -> bool {
        self.sites.binary_search(site).is_ok()
    }

    /// Position of `site` in the canonical order (its tensor leg).
    pub fn position(&self, site: &Site) -> Option<usize> {
        self.sites.binary_search(site).ok()
    }

    pub fn is_subset_of(&self, other: &Region) -> bool {
        self.sites.iter().all(|s| other.contains(s))
    }

    pub fn intersects(&self, other: &Region) -> bool {
        self.sites.iter().any(|s| other.contains(s))
    }

    fn merged_geometry(&self, other: &Region) -> Geometry {
        if self.is_empty() {
            other.geometry.clone()
        } else {
            self.geometry.clone()
        }
    }

    pub fn union(&self, other: &Region) -> Region {
        let set: BTreeSet<Site> = self.sites.iter().chain(&other.sites).cloned().collect();
        Region { sites: set.into_iter().collect(), geometry: self.merged_geometry(other) }
    }

    pub fn intersection(&self, other: &Region) -> Region {
        Region {
            sites: self.sites.iter().filter(|s| other.contains(s)).cloned().collect(),
            geometry: self.geometry.clone(),
        }
    }

    pub fn difference(&self, other: &Region) -> Region {
        Region {
            sites: self.sites.iter().filter(|s| !other.contains(s)).cloned().collect(),
            geometry: self.geometry.clone(),
        }
    }

    /// The metric natural to this region's geometry.
    pub fn metric(&self) -> Metric {
        match &self.geometry {
            Geometry::Open => Metric::Manhattan,
            Geometry::Torus { lengths } => Metric::TorusManhattan(lengths.clone()),
        }
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, s) in self.sites.iter().enumerate() {
            if i > 0 {
                write!(f, " ")?;
            }
            write!(f, "{s}")?;
        }
        write!(f, "}}")
    }
}

/// Taxicab metric on Z^d, optionally with periodic wraparound.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Metric {
    Manhattan,
    TorusManhattan(Vec<i64>),
}

impl Metric {
    /// `sum_i |x_i - y_i|`, each term minimized over wrapped images on a torus.
    pub fn distance(&self, x: &Site, y: &Site) -> Result<u64> {
        if x.dim() != y.dim() {
            return Err(Error::DimensionMismatch { expected: x.dim(), found: y.dim() });
        }
        match self {
            Metric::Manhattan => Ok(x.0.iter().zip(&y.0).map(|(a, b)| a.abs_diff(*b)).sum()),
            Metric::TorusManhattan(lengths) => {
                if lengths.len() != x.dim() {
                    return Err(Error::DimensionMismatch { expected: lengths.len(), found: x.dim() });
                }
                Ok(x.0
                    .iter()
                    .zip(&y.0)
                    .zip(lengths)
                    .map(|((a, b), &l)| {
                        let d = (a - b).rem_euclid(l) as u64;
                        d.min(l as u64 - d)
                    })
                    .sum())
            }
        }
    }

    /// Minimum distance over all pairs of sites.
    pub fn region_distance(&self, a: &Region, b: &Region) -> Result<u64> {
        if a.is_empty() || b.is_empty() {
            return Err(Error::EmptyRegion);
        }
        let mut best = u64::MAX;
        for x in a.sites() {
            for y in b.sites() {
                best = best.min(self.distance(x, y)?);
                if best == 0 {
                    return Ok(0);
                }
            }
        }
        Ok(best)
    }

    /// Sites of `within` at distance at most `radius` from `center`.
    pub fn ball(&self, center: &Site, radius: u64, within: &Region) -> Result<Region> {
        let mut sites = Vec::new();
        for s in within.sites() {
            if self.distance(center, s)? <= radius {
                sites.push(s.clone());
            }
        }
        Ok(Region { sites, geometry: within.geometry.clone() })
    }

    /// Largest pairwise distance; zero for a singleton.
    pub fn diameter(&self, a: &Region) -> Result<u64> {
        if a.is_empty() {
            return Err(Error::EmptyRegion);
        }
        let s = a.sites();
        let mut best = 0;
        for i in 0..s.len() {
            for j in i + 1..s.len() {
                best = best.max(self.distance(&s[i], &s[j])?);
            }
        }
        Ok(best)
    }

    /// Union of the balls of `radius` around each site of `a`, inside `within`.
    pub fn fattening(&self, a: &Region, radius: u64, within: &Region) -> Result<Region> {
        let mut sites = Vec::new();
        for s in within.sites() {
            let mut hit = false;
            for x in a.sites() {
                if self.distance(x, s)? <= radius {
                    hit = true;
                    break;
                }
            }
            if hit {
                sites.push(s.clone());
            }
        }
        Ok(Region { sites, geometry: within.geometry.clone() })
    }
}
