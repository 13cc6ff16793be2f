//! Kitaev's toric code on an `L x L` torus.
//!
//! Spins sit on edges. An edge is the site `(direction, y, x)` with direction
//! 0 for the horizontal edge from vertex `(x, y)` to `(x + 1, y)` and 1 for the
//! vertical edge from `(x, y)` to `(x, y + 1)`; canonical order is therefore
//! `(direction, y, x)` and edge `k` is tensor leg `k`.
//!
//! The star at vertex `(x, y)` is the product of `sigma^x` on the four edges
//! meeting it; the plaquette at face `(x, y)` (lower-left corner `(x, y)`) is
//! the product of `sigma^z` on its boundary.
//!
//! Pauli strings are handled symbolically as `i^e X^a Z^b` with bit vectors
//! `a`, `b`. Ground-state expectations follow from stabilizer-group membership,
//! decided by Gaussian elimination over GF(2).

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::lattice::{Geometry, Region, Site};
use crate::models::{local_hamiltonian, Interaction};
use crate::tensorcore::{c64, eigenvalues_hermitian, max_abs, trace, Axis, ComplexMatrix, LocalOperator};

/// Edge orientation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Direction {
    Horizontal,
    Vertical,
}

impl Direction {
    fn index(self) -> i64 {
        match self {
            Direction::Horizontal => 0,
            Direction::Vertical => 1,
        }
    }

    fn tag(self) -> char {
        match self {
            Direction::Horizontal => 'h',
            Direction::Vertical => 'v',
        }
    }
}

/// Which Pauli matrix a loop operator carries.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Flavor {
    X,
    Z,
}

/// Fixed-length bit vector over GF(2).
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Bits {
    words: Vec<u64>,
    len: usize,
}

impl Bits {
    pub fn zeros(len: usize) -> Self {
        Bits { words: vec![0; len.div_ceil(64)], len }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, i: usize) -> bool {
        (self.words[i / 64] >> (i % 64)) & 1 == 1
    }

    pub fn set(&mut self, i: usize, v: bool) {
        let mask = 1u64 << (i % 64);
        if v {
            self.words[i / 64] |= mask;
        } else {
            self.words[i / 64] &= !mask;
        }
    }

    pub fn flip(&mut self, i: usize) {
        self.words[i / 64] ^= 1u64 << (i % 64);
    }

    pub fn xor_assign(&mut self, other: &Bits) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a ^= b;
        }
    }

    /// Parity of the overlap, `a . b mod 2`.
    pub fn dot(&self, other: &Bits) -> bool {
        self.words.iter().zip(&other.words).map(|(a, b)| (a & b).count_ones()).sum::<u32>() % 2 == 1
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len).filter(|&i| self.get(i))
    }
}

/// `i^phase X^x Z^z` on `n` qubits.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PauliString {
    pub phase: u8,
    pub x: Bits,
    pub z: Bits,
}

impl PauliString {
    pub fn identity(n: usize) -> Self {
        PauliString { phase: 0, x: Bits::zeros(n), z: Bits::zeros(n) }
    }

    pub fn num_qubits(&self) -> usize {
        self.x.len()
    }

    /// `sigma^axis` on qubit `k`.
    pub fn single(n: usize, k: usize, axis: Axis) -> Self {
        let mut p = Self::identity(n);
        p.set(k, axis);
        p
    }

    /// Puts `sigma^axis` on a qubit where the string acts trivially (`Y = i X Z`).
    fn set(&mut self, k: usize, axis: Axis) {
        let (x, z, extra) = match axis {
            Axis::X => (true, false, 0),
            Axis::Y => (true, true, 1),
            Axis::Z => (false, true, 0),
        };
        self.x.set(k, x);
        self.z.set(k, z);
        self.phase = (self.phase + extra) % 4;
    }

    /// Number of qubits acted on nontrivially.
    pub fn weight(&self) -> usize {
        (0..self.num_qubits()).filter(|&k| self.x.get(k) || self.z.get(k)).count()
    }

    pub fn commutes_with(&self, other: &PauliString) -> bool {
        self.x.dot(&other.z) == self.z.dot(&other.x)
    }

    /// `self * other`.
    pub fn mul(&self, other: &PauliString) -> PauliString {
        let swap = if self.z.dot(&other.x) { 2 } else { 0 };
        let mut x = self.x.clone();
        x.xor_assign(&other.x);
        let mut z = self.z.clone();
        z.xor_assign(&other.z);
        PauliString { phase: (self.phase + other.phase + swap) % 4, x, z }
    }

    pub fn adjoint(&self) -> PauliString {
        // (i^e X^a Z^b)* = i^{-e} Z^b X^a = i^{-e} (-1)^{a.b} X^a Z^b
        let sign = if self.x.dot(&self.z) { 2 } else { 0 };
        PauliString { phase: (4 - self.phase + sign) % 4, x: self.x.clone(), z: self.z.clone() }
    }

    /// The scalar `i^phase`.
    pub fn phase_factor(&self) -> c64 {
        phase_c64(self.phase)
    }

    /// Per-qubit axis of `X^x Z^z` (with `XZ = -i Y`), ignoring the phase.
    fn letters(&self) -> impl Iterator<Item = (usize, Option<Axis>)> + '_ {
        (0..self.num_qubits()).map(|k| {
            let axis = match (self.x.get(k), self.z.get(k)) {
                (false, false) => None,
                (true, false) => Some(Axis::X),
                (true, true) => Some(Axis::Y),
                (false, true) => Some(Axis::Z),
            };
            (k, axis)
        })
    }

    /// Phase `c` with `self = c * prod_k sigma^{axis_k}`.
    fn hermitian_phase(&self) -> u8 {
        let ys = (0..self.num_qubits()).filter(|&k| self.x.get(k) && self.z.get(k)).count();
        // X Z = -i Y on each Y site
        ((self.phase as usize + 3 * ys) % 4) as u8
    }
}

fn phase_c64(e: u8) -> c64 {
    match e % 4 {
        0 => c64::new(1.0, 0.0),
        1 => c64::new(0.0, 1.0),
        2 => c64::new(-1.0, 0.0),
        _ => c64::new(0.0, -1.0),
    }
}

/// Linear combination of Pauli strings.
#[derive(Clone, Debug, Default)]
pub struct PauliSum {
    pub terms: Vec<(c64, PauliString)>,
}

impl PauliSum {
    pub fn single(p: PauliString) -> Self {
        PauliSum { terms: vec![(c64::new(1.0, 0.0), p)] }
    }

    pub fn scale(&self, c: c64) -> PauliSum {
        PauliSum { terms: self.terms.iter().map(|(a, p)| (a * c, p.clone())).collect() }
    }

    pub fn add(&self, other: &PauliSum) -> PauliSum {
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        PauliSum { terms }
    }

    pub fn mul(&self, other: &PauliSum) -> PauliSum {
        let mut terms = Vec::with_capacity(self.terms.len() * other.terms.len());
        for (a, p) in &self.terms {
            for (b, q) in &other.terms {
                terms.push((a * b, p.mul(q)));
            }
        }
        PauliSum { terms }
    }

    pub fn adjoint(&self) -> PauliSum {
        PauliSum { terms: self.terms.iter().map(|(a, p)| (a.conj(), p.adjoint())).collect() }
    }

    pub fn commutator(&self, other: &PauliSum) -> PauliSum {
        self.mul(other).add(&other.mul(self).scale(c64::new(-1.0, 0.0)))
    }
}

/// Row-reduced generators of a stabilizer group with their products tracked.
#[derive(Clone, Debug)]
pub struct StabilizerGroup {
    generators: Vec<PauliString>,
    /// (pivot column, reduced (x|z) row, generator combination)
    rows: Vec<(usize, Bits, Bits)>,
}

fn symplectic(p: &PauliString) -> Bits {
    let n = p.num_qubits();
    let mut v = Bits::zeros(2 * n);
    for k in 0..n {
        v.set(k, p.x.get(k));
        v.set(n + k, p.z.get(k));
    }
    v
}

impl StabilizerGroup {
    pub fn new(generators: Vec<PauliString>) -> Self {
        let m = generators.len();
        let mut rows: Vec<(usize, Bits, Bits)> = Vec::new();
        for (g, p) in generators.iter().enumerate() {
            let mut v = symplectic(p);
            let mut combo = Bits::zeros(m);
            combo.set(g, true);
            for (pivot, row, rc) in &rows {
                if v.get(*pivot) {
                    v.xor_assign(row);
                    combo.xor_assign(rc);
                }
            }
            let first = v.ones().next();
            if let Some(pivot) = first {
                for (_, row, rc) in rows.iter_mut() {
                    if row.get(pivot) {
                        row.xor_assign(&v);
                        rc.xor_assign(&combo);
                    }
                }
                rows.push((pivot, v, combo));
            }
        }
        StabilizerGroup { generators, rows }
    }

    /// Number of independent generators.
    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    pub fn generators(&self) -> &[PauliString] {
        &self.generators
    }

    /// The group element with the same `X`/`Z` pattern as `p`, if any.
    pub fn element_matching(&self, p: &PauliString) -> Option<PauliString> {
        let mut v = symplectic(p);
        let mut combo = Bits::zeros(self.generators.len());
        for (pivot, row, rc) in &self.rows {
            if v.get(*pivot) {
                v.xor_assign(row);
                combo.xor_assign(rc);
            }
        }
        if !v.is_zero() {
            return None;
        }
        let n = p.num_qubits();
        Some(combo.ones().fold(PauliString::identity(n), |acc, g| acc.mul(&self.generators[g])))
    }

    /// Expectation in the stabilizer state: `i^k` if `p = i^k g` for a group
    /// element `g`, else 0.
    pub fn expectation(&self, p: &PauliString) -> c64 {
        match self.element_matching(p) {
            Some(g) => phase_c64((4 + p.phase - g.phase) % 4),
            None => c64::new(0.0, 0.0),
        }
    }
}

#[derive(Debug)]
pub struct ToricLattice {
    l: usize,
    edges: Region,
    stars: Vec<Region>,
    plaquettes: Vec<Region>,
    group: OnceLock<StabilizerGroup>,
}

impl Clone for ToricLattice {
    fn clone(&self) -> Self {
        ToricLattice {
            l: self.l,
            edges: self.edges.clone(),
            stars: self.stars.clone(),
            plaquettes: self.plaquettes.clone(),
            group: OnceLock::new(),
        }
    }
}

impl ToricLattice {
    pub fn new(l: usize) -> Result<Self> {
        if l < 2 {
            return Err(Error::InvalidArgument(format!("toric code needs L >= 2, got {l}")));
        }
        let li = l as i64;
        let geometry = Geometry::Torus { lengths: vec![2, li, li] };
        let mut sites = Vec::with_capacity(2 * l * l);
        for d in 0..2 {
            for y in 0..li {
                for x in 0..li {
                    sites.push(Site::new(vec![d, y, x]));
                }
            }
        }
        let edges = Region::new(sites, geometry.clone())?;
        let mut lat = ToricLattice { l, edges, stars: Vec::new(), plaquettes: Vec::new(), group: OnceLock::new() };
        let region = |s: Vec<Site>| Region::new(s, geometry.clone());
        for y in 0..li {
            for x in 0..li {
                lat.stars.push(region(vec![
                    lat.edge(Direction::Horizontal, x, y),
                    lat.edge(Direction::Horizontal, x - 1, y),
                    lat.edge(Direction::Vertical, x, y),
                    lat.edge(Direction::Vertical, x, y - 1),
                ])?);
                lat.plaquettes.push(region(vec![
                    lat.edge(Direction::Horizontal, x, y),
                    lat.edge(Direction::Horizontal, x, y + 1),
                    lat.edge(Direction::Vertical, x, y),
                    lat.edge(Direction::Vertical, x + 1, y),
                ])?);
            }
        }
        Ok(lat)
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn edges(&self) -> &Region {
        &self.edges
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// The edge `(dir, x, y)` with coordinates taken modulo `L`.
    pub fn edge(&self, dir: Direction, x: i64, y: i64) -> Site {
        let li = self.l as i64;
        Site::new(vec![dir.index(), y.rem_euclid(li), x.rem_euclid(li)])
    }

    /// Tensor leg of an edge site.
    pub fn edge_index(&self, site: &Site) -> Option<usize> {
        self.edges.position(site)
    }

    fn vertex_index(&self, x: i64, y: i64) -> Result<usize> {
        let li = self.l as i64;
        if !(0..li).contains(&x) || !(0..li).contains(&y) {
            return Err(Error::InvalidArgument(format!("vertex ({x},{y}) outside the {li}x{li} torus")));
        }
        Ok((y * li + x) as usize)
    }

    /// Stars in vertex order `y * L + x`.
    pub fn stars(&self) -> &[Region] {
        &self.stars
    }

    /// Plaquettes in face order `y * L + x`.
    pub fn plaquettes(&self) -> &[Region] {
        &self.plaquettes
    }

    pub fn star(&self, x: i64, y: i64) -> Result<&Region> {
        Ok(&self.stars[self.vertex_index(x, y)?])
    }

    pub fn plaquette(&self, x: i64, y: i64) -> Result<&Region> {
        Ok(&self.plaquettes[self.vertex_index(x, y)?])
    }

    fn product_on(&self, region: &Region, axis: Axis) -> LocalOperator {
        let factors: Vec<(Site, Axis)> = region.sites().iter().map(|s| (s.clone(), axis)).collect();
        LocalOperator::pauli_string(&factors).and_then(|op| op.with_support(region.clone())).expect("distinct edges")
    }

    /// `A_s`: `sigma^x` on the four edges at vertex `(x, y)`.
    pub fn star_operator(&self, x: i64, y: i64) -> Result<LocalOperator> {
        Ok(self.product_on(self.star(x, y)?, Axis::X))
    }

    /// `B_p`: `sigma^z` on the boundary of face `(x, y)`.
    pub fn plaquette_operator(&self, x: i64, y: i64) -> Result<LocalOperator> {
        Ok(self.product_on(self.plaquette(x, y)?, Axis::Z))
    }

    fn string_on(&self, region: &Region, flavor: Flavor) -> PauliString {
        let mut p = PauliString::identity(self.num_edges());
        for s in region.sites() {
            let k = self.edge_index(s).expect("edge of this lattice");
            match flavor {
                Flavor::X => p.x.set(k, true),
                Flavor::Z => p.z.set(k, true),
            }
        }
        p
    }

    pub fn star_string(&self, v: usize) -> PauliString {
        self.string_on(&self.stars[v], Flavor::X)
    }

    pub fn plaquette_string(&self, f: usize) -> PauliString {
        self.string_on(&self.plaquettes[f], Flavor::Z)
    }

    /// The stabilizer group generated by all stars and plaquettes.
    pub fn stabilizers(&self) -> &StabilizerGroup {
        self.group.get_or_init(|| {
            let n = self.stars.len();
            let gens = (0..n).map(|v| self.star_string(v)).chain((0..n).map(|f| self.plaquette_string(f)));
            StabilizerGroup::new(gens.collect())
        })
    }

    /// `Phi(s) = -A_s`, `Phi(p) = -B_p`, zero otherwise.
    pub fn interaction(&self) -> Result<Interaction> {
        let minus = c64::new(-1.0, 0.0);
        let stars = self.stars.iter().map(|s| self.product_on(s, Axis::X).scale(minus));
        let plaqs = self.plaquettes.iter().map(|p| self.product_on(p, Axis::Z).scale(minus));
        Interaction::finite(2, stars.chain(plaqs), None)
    }

    /// Dense `-sum A_s - sum B_p` on all edges.
    pub fn hamiltonian(&self) -> Result<LocalOperator> {
        local_hamiltonian(&self.interaction()?, &self.edges)
    }

    /// Ground-space dimension `2^{#edges - rank}` from the GF(2) rank of the
    /// stabilizer generators.
    pub fn ground_space_dimension(&self) -> u128 {
        1u128 << (self.num_edges() - self.stabilizers().rank())
    }

    /// Dense `prod_s (1 + A_s)/2 prod_p (1 + B_p)/2`.
    pub fn ground_projector(&self) -> Result<LocalOperator> {
        let h = self.hamiltonian()?;
        let dim = h.dim();
        let mut p = LocalOperator::identity_on(self.edges.clone(), 2);
        let half = c64::new(0.5, 0.0);
        for (region, axis) in
            self.stars.iter().map(|s| (s, Axis::X)).chain(self.plaquettes.iter().map(|q| (q, Axis::Z)))
        {
            let s = self.product_on(region, axis).embed(&self.edges)?;
            let factor = LocalOperator::identity_on(self.edges.clone(), 2).add(&s)?.scale(half);
            p = p.dot(&factor)?;
        }
        debug_assert_eq!(p.dim(), dim);
        Ok(p)
    }

    /// `(rank of the ground projector, multiplicity of the lowest eigenvalue)`
    /// from dense matrices.
    pub fn dense_ground_space_dimension(&self) -> Result<(usize, usize)> {
        let p = self.ground_projector()?;
        let defect = max_abs(&(p.matrix() * p.matrix() - p.matrix()));
        if defect > 1e-10 {
            return Err(Error::Inconsistency(format!("stabilizer projector is not idempotent ({defect:e})")));
        }
        let rank = trace(p.matrix()).re.round() as usize;
        let ev = eigenvalues_hermitian(self.hamiltonian()?.matrix())?;
        let mult = ev.iter().filter(|&&e| e <= ev[0] + 1e-8).count();
        Ok((rank, mult))
    }

    /// The Pauli string of an operator on edges, `A = coeff * P`, or an error
    /// when `A` is not a multiple of a tensor product of Pauli matrices.
    pub fn pauli_decompose(&self, a: &LocalOperator) -> Result<(c64, PauliString)> {
        if a.site_dim() != 2 || !a.support().is_subset_of(&self.edges) {
            return Err(Error::NotPauliString(format!("operator on {} is not on the edges", a.support())));
        }
        let (coeff, x_bits, z_bits) = monomial_pattern(a.matrix())?;
        let mut p = PauliString::identity(self.num_edges());
        for (leg, s) in a.support().sites().iter().enumerate() {
            let k = self.edge_index(s).unwrap();
            p.x.set(k, x_bits[leg]);
            p.z.set(k, z_bits[leg]);
        }
        Ok((coeff, p))
    }

    /// Dense operator for a Pauli string, on its support.
    pub fn to_operator(&self, p: &PauliString) -> LocalOperator {
        let factors: Vec<(Site, Axis)> =
            p.letters().filter_map(|(k, ax)| ax.map(|a| (self.edges.sites()[k].clone(), a))).collect();
        let phase = phase_c64(p.hermitian_phase());
        let op = if factors.is_empty() {
            LocalOperator::scalar(c64::new(1.0, 0.0), 2)
        } else {
            let op = LocalOperator::pauli_string(&factors).expect("distinct edges");
            let support = Region::new(op.support().sites().to_vec(), self.edges.geometry().clone())
                .expect("edges are on the torus");
            op.with_support(support).expect("same sites")
        };
        op.scale(phase)
    }

    /// `omega(P)` in the stabilizer ground state.
    pub fn ground_expectation_pauli(&self, p: &PauliString) -> c64 {
        self.stabilizers().expectation(p)
    }

    /// `omega(A)` for a multiple of a Pauli string on edges.
    pub fn ground_expectation(&self, a: &LocalOperator) -> Result<c64> {
        let (coeff, p) = self.pauli_decompose(a)?;
        Ok(coeff * self.ground_expectation_pauli(&p))
    }

    /// `omega(S)` extended linearly to a sum of Pauli strings.
    pub fn ground_expectation_sum(&self, s: &PauliSum) -> c64 {
        s.terms.iter().map(|(c, p)| c * self.ground_expectation_pauli(p)).sum()
    }

    /// `H = -sum A_s - sum B_p` as a Pauli sum.
    pub fn hamiltonian_sum(&self) -> PauliSum {
        let n = self.stars.len();
        let minus = c64::new(-1.0, 0.0);
        let terms = (0..n)
            .map(|v| (minus, self.star_string(v)))
            .chain((0..n).map(|f| (minus, self.plaquette_string(f))))
            .collect();
        PauliSum { terms }
    }

    /// `min_A -i omega(A* delta(A))` over Pauli strings, evaluated
    /// symbolically with `delta(A) = i [H, A]`.
    pub fn ground_residual(&self, samples: &[PauliString]) -> f64 {
        let h = self.hamiltonian_sum();
        samples
            .iter()
            .map(|p| {
                let a = PauliSum::single(p.clone());
                let delta = h.commutator(&a).scale(c64::new(0.0, 1.0));
                let v = self.ground_expectation_sum(&a.adjoint().mul(&delta)) * c64::new(0.0, -1.0);
                v.re
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Pauli string on a closed path: `sigma^x` on a cycle of the dual lattice
    /// (meeting every plaquette evenly) or `sigma^z` on a cycle of the lattice
    /// (meeting every star evenly).
    pub fn loop_string(&self, cycle: &[Site], flavor: Flavor) -> Result<PauliString> {
        let mut bits = Bits::zeros(self.num_edges());
        for s in cycle {
            let k = self.edge_index(s).ok_or_else(|| Error::InvalidArgument(format!("{s} is not an edge")))?;
            if bits.get(k) {
                return Err(Error::InvalidArgument(format!("edge {s} repeated in the path")));
            }
            bits.set(k, true);
        }
        if bits.is_zero() {
            return Err(Error::InvalidArgument("empty path".into()));
        }
        let checks = match flavor {
            Flavor::X => &self.plaquettes,
            Flavor::Z => &self.stars,
        };
        for c in checks {
            let overlap = c.sites().iter().filter(|s| bits.get(self.edge_index(s).unwrap())).count();
            if overlap % 2 == 1 {
                return Err(Error::InvalidArgument(format!("path is not closed: odd overlap with {c}")));
            }
        }
        let mut p = PauliString::identity(self.num_edges());
        match flavor {
            Flavor::X => p.x = bits,
            Flavor::Z => p.z = bits,
        }
        Ok(p)
    }

    pub fn loop_operator(&self, cycle: &[Site], flavor: Flavor) -> Result<LocalOperator> {
        Ok(self.to_operator(&self.loop_string(cycle, flavor)?))
    }

    /// Non-contractible loop winding in the x direction at row `y`: vertical
    /// edges for the x flavor, horizontal edges for the z flavor.
    pub fn winding_loop(&self, y: i64, flavor: Flavor) -> Vec<Site> {
        let dir = match flavor {
            Flavor::X => Direction::Vertical,
            Flavor::Z => Direction::Horizontal,
        };
        (0..self.l as i64).map(|x| self.edge(dir, x, y)).collect()
    }

    /// Parses `X@(h,0,1)*Z@(v,1,1)` with optional leading phase `-1*`, `i*`, `-i*`.
    pub fn parse_pauli(&self, text: &str) -> Result<PauliString> {
        let bad = |why: &str| Error::NotPauliString(format!("{text:?}: {why}"));
        let mut p = PauliString::identity(self.num_edges());
        let text = text.trim();
        if text.is_empty() || text == "I" {
            return Ok(p);
        }
        for (i, token) in text.split('*').map(str::trim).enumerate() {
            if i == 0 {
                let phase = match token {
                    "1" | "+1" => Some(0),
                    "i" | "+i" => Some(1),
                    "-1" | "-" => Some(2),
                    "-i" => Some(3),
                    _ => None,
                };
                if let Some(e) = phase {
                    p.phase = (p.phase + e) % 4;
                    continue;
                }
            }
            let (letter, at) = token.split_once('@').ok_or_else(|| bad("expected AXIS@(dir,x,y)"))?;
            let axis = match letter {
                "X" => Axis::X,
                "Y" => Axis::Y,
                "Z" => Axis::Z,
                _ => return Err(bad("axis must be X, Y or Z")),
            };
            let inner = at
                .strip_prefix('(')
                .and_then(|s| s.strip_suffix(')'))
                .ok_or_else(|| bad("edge must be parenthesized"))?;
            let parts: Vec<&str> = inner.split(',').map(str::trim).collect();
            let [d, x, y] = parts.as_slice() else { return Err(bad("edge needs (dir,x,y)")) };
            let dir = match *d {
                "h" => Direction::Horizontal,
                "v" => Direction::Vertical,
                _ => return Err(bad("direction must be h or v")),
            };
            let li = self.l as i64;
            let coord = |s: &str| -> Result<i64> {
                let v: i64 = s.parse().map_err(|_| bad("coordinates must be integers"))?;
                if !(0..li).contains(&v) {
                    return Err(bad("coordinate outside the torus"));
                }
                Ok(v)
            };
            let k = self.edge_index(&self.edge(dir, coord(x)?, coord(y)?)).unwrap();
            p = p.mul(&PauliString::single(self.num_edges(), k, axis));
        }
        Ok(p)
    }

    /// Inverse of [`ToricLattice::parse_pauli`] in canonical edge order.
    pub fn format_pauli(&self, p: &PauliString) -> String {
        let mut tokens = Vec::new();
        match p.hermitian_phase() {
            0 => {}
            1 => tokens.push("i".to_string()),
            2 => tokens.push("-1".to_string()),
            _ => tokens.push("-i".to_string()),
        }
        for (k, ax) in p.letters() {
            if let Some(ax) = ax {
                let s = &self.edges.sites()[k];
                let dir = if s.0[0] == 0 { Direction::Horizontal } else { Direction::Vertical };
                let letter = match ax {
                    Axis::X => 'X',
                    Axis::Y => 'Y',
                    Axis::Z => 'Z',
                };
                tokens.push(format!("{letter}@({},{},{})", dir.tag(), s.0[2], s.0[1]));
            }
        }
        if tokens.iter().all(|t| !t.contains('@')) {
            tokens.push("I".to_string());
        }
        tokens.join("*")
    }
}

/// Returns `(coeff, x bits, z bits)` with `m = coeff * X^x Z^z`, leg 0 most significant.
fn monomial_pattern(m: &ComplexMatrix) -> Result<(c64, Vec<bool>, Vec<bool>)> {
    let dim = m.nrows();
    let n = dim.trailing_zeros() as usize;
    if !dim.is_power_of_two() {
        return Err(Error::NotPauliString("dimension is not a power of two".into()));
    }
    let scale = max_abs(m);
    if scale == 0.0 {
        return Ok((c64::new(0.0, 0.0), vec![false; n], vec![false; n]));
    }
    let tol = 1e-12 * scale;
    let col0: Vec<usize> = (0..dim).filter(|&r| m[(r, 0)].norm() > tol).collect();
    let [a] = col0.as_slice() else {
        return Err(Error::NotPauliString("not a monomial matrix".into()));
    };
    let a = *a;
    let coeff = m[(a, 0)];
    let bit = |k: usize| 1usize << (n - 1 - k);
    let mut b = 0usize;
    for k in 0..n {
        let ratio = m[(a ^ bit(k), bit(k))] / coeff;
        if (ratio - c64::new(-1.0, 0.0)).norm() < 1e-9 {
            b |= bit(k);
        }
    }
    for c in 0..dim {
        let sign = if (b & c).count_ones() % 2 == 1 { -1.0 } else { 1.0 };
        let want = coeff * sign;
        for r in 0..dim {
            let expect = if r == c ^ a { want } else { c64::new(0.0, 0.0) };
            if (m[(r, c)] - expect).norm() > tol {
                return Err(Error::NotPauliString("not a multiple of a Pauli tensor product".into()));
            }
        }
    }
    let xs = (0..n).map(|k| a & bit(k) != 0).collect();
    let zs = (0..n).map(|k| b & bit(k) != 0).collect();
    Ok((coeff, xs, zs))
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let phase = ["", "i*", "-1*", "-i*"][self.hermitian_phase() as usize];
        write!(f, "{phase}")?;
        let mut any = false;
        for (k, ax) in self.letters() {
            if let Some(ax) = ax {
                if any {
                    write!(f, "*")?;
                }
                write!(f, "{ax:?}{k}")?;
                any = true;
            }
        }
        if !any {
            write!(f, "I")?;
        }
        Ok(())
    }
}

impl FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "h" => Ok(Direction::Horizontal),
            "v" => Ok(Direction::Vertical),
            _ => Err(Error::InvalidArgument(format!("direction {s:?} must be h or v"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling;
    use crate::states::DensityState;
    use crate::tensorcore::commutator;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn edge_order_golden_l2() {
        let lat = ToricLattice::new(2).unwrap();
        let got: Vec<String> = lat.edges().sites().iter().map(|s| s.to_string()).collect();
        let want = ["(0,0,0)", "(0,0,1)", "(0,1,0)", "(0,1,1)", "(1,0,0)", "(1,0,1)", "(1,1,0)", "(1,1,1)"];
        assert_eq!(got, want);
        assert_eq!(lat.star(0, 0).unwrap().to_string(), "{(0,0,0) (0,0,1) (1,0,0) (1,1,0)}");
        assert_eq!(lat.plaquette(0, 0).unwrap().to_string(), "{(0,0,0) (0,1,0) (1,0,0) (1,0,1)}");
    }

    #[test]
    fn lattice_invariants() {
        for l in 2..5 {
            let lat = ToricLattice::new(l).unwrap();
            assert_eq!(lat.num_edges(), 2 * l * l);
            let mut star_count = vec![0; lat.num_edges()];
            let mut plaq_count = vec![0; lat.num_edges()];
            for (s, p) in lat.stars().iter().zip(lat.plaquettes()) {
                assert_eq!(s.len(), 4);
                assert_eq!(p.len(), 4);
                for e in s.sites() {
                    star_count[lat.edge_index(e).unwrap()] += 1;
                }
                for e in p.sites() {
                    plaq_count[lat.edge_index(e).unwrap()] += 1;
                }
            }
            assert!(star_count.iter().chain(&plaq_count).all(|&c| c == 2));
            let n = lat.num_edges();
            let all_stars = (0..l * l).fold(PauliString::identity(n), |a, v| a.mul(&lat.star_string(v)));
            let all_plaqs = (0..l * l).fold(PauliString::identity(n), |a, f| a.mul(&lat.plaquette_string(f)));
            assert_eq!(all_stars, PauliString::identity(n));
            assert_eq!(all_plaqs, PauliString::identity(n));
        }
        assert!(ToricLattice::new(1).is_err());
    }

    #[test]
    fn stars_and_plaquettes_commute_exhaustively() {
        let lat = ToricLattice::new(2).unwrap();
        for y in 0..2 {
            for x in 0..2 {
                let a = lat.star_operator(x, y).unwrap();
                assert!(
                    a.dot(&a).unwrap().distance(&LocalOperator::identity_on(a.support().clone(), 2)).unwrap() == 0.0
                );
                for yy in 0..2 {
                    for xx in 0..2 {
                        let b = lat.plaquette_operator(xx, yy).unwrap();
                        assert_eq!(commutator(&a, &b).unwrap().norm(), 0.0);
                    }
                }
            }
        }
        assert!(lat.star_operator(2, 0).is_err());
    }

    #[test]
    fn overlaps_are_even_l3() {
        let lat = ToricLattice::new(3).unwrap();
        let mut sharing = 0;
        for s in lat.stars() {
            for p in lat.plaquettes() {
                let k = s.intersection(p).len();
                assert!(k == 0 || k == 2);
                if k > 0 {
                    sharing += 1;
                }
            }
        }
        // each star meets the four faces around its vertex
        assert_eq!(sharing, 4 * 9);
    }

    #[test]
    fn hamiltonian_l2() {
        let lat = ToricLattice::new(2).unwrap();
        let h = lat.hamiltonian().unwrap();
        assert!(h.is_hermitian());
        let ev = eigenvalues_hermitian(h.matrix()).unwrap();
        assert!((ev[0] + 8.0).abs() < 1e-10);
        assert!(ev.iter().all(|e| (e - e.round()).abs() < 1e-10));
        let stars = (0..2).flat_map(|y| (0..2).map(move |x| (x, y)));
        let star_part = stars.clone().fold(LocalOperator::scalar(c64::new(0.0, 0.0), 2), |acc, (x, y)| {
            acc.add(&lat.star_operator(x, y).unwrap()).unwrap()
        });
        let plaq_part = stars.fold(LocalOperator::scalar(c64::new(0.0, 0.0), 2), |acc, (x, y)| {
            acc.add(&lat.plaquette_operator(x, y).unwrap()).unwrap()
        });
        assert_eq!(commutator(&star_part, &plaq_part).unwrap().norm(), 0.0);
        assert!(ToricLattice::new(3).unwrap().hamiltonian().is_err());
    }

    #[test]
    fn degeneracy() {
        let lat = ToricLattice::new(2).unwrap();
        assert_eq!(lat.ground_space_dimension(), 4);
        assert_eq!(lat.dense_ground_space_dimension().unwrap(), (4, 4));
        assert_eq!(lat.stabilizers().rank(), 6);
        let lat3 = ToricLattice::new(3).unwrap();
        assert_eq!(lat3.stabilizers().rank(), 16);
        assert_eq!(lat3.ground_space_dimension(), 4);
    }

    #[test]
    fn expectation_examples() {
        let lat = ToricLattice::new(3).unwrap();
        let a = lat.star_operator(1, 1).unwrap();
        assert_eq!(lat.ground_expectation(&a).unwrap(), c64::new(1.0, 0.0));
        let y = LocalOperator::pauli_at(lat.edge(Direction::Vertical, 0, 2), Axis::Y);
        assert_eq!(lat.ground_expectation(&y).unwrap(), c64::new(0.0, 0.0));
        let ab = a.dot(&lat.plaquette_operator(2, 0).unwrap()).unwrap();
        assert_eq!(lat.ground_expectation(&ab).unwrap(), c64::new(1.0, 0.0));
        let minus = a.scale(c64::new(-2.5, 0.0));
        assert_eq!(lat.ground_expectation(&minus).unwrap(), c64::new(-2.5, 0.0));
        let not_pauli = LocalOperator::pauli_at(lat.edge(Direction::Vertical, 0, 2), Axis::X)
            .add(&LocalOperator::pauli_at(lat.edge(Direction::Vertical, 0, 2), Axis::Z))
            .unwrap();
        assert!(matches!(lat.ground_expectation(&not_pauli), Err(Error::NotPauliString(_))));
    }

    #[test]
    fn dense_oracle_agrees_on_low_weight_strings_l2() {
        let lat = ToricLattice::new(2).unwrap();
        let p = lat.ground_projector().unwrap();
        let omega =
            DensityState::new(lat.edges().clone(), crate::tensorcore::scale(p.matrix(), c64::new(0.25, 0.0))).unwrap();
        let mut rng = sampling::rng(1);
        for _ in 0..200 {
            let mut s = PauliString::identity(8);
            for k in 0..8 {
                match rng.random_range(0..6) {
                    0 => s.set(k, Axis::X),
                    1 => s.set(k, Axis::Y),
                    2 => s.set(k, Axis::Z),
                    _ => {}
                }
            }
            let op = lat.to_operator(&s);
            let dense = omega.expectation(&op).unwrap();
            assert!((dense - lat.ground_expectation_pauli(&s)).norm() < 1e-12, "{s}");
        }
    }

    #[test]
    fn decompose_roundtrip() {
        let lat = ToricLattice::new(2).unwrap();
        let mut rng = sampling::rng(2);
        for _ in 0..50 {
            let mut s = PauliString::identity(8);
            for k in 0..8 {
                if let Some(ax) = [Some(Axis::X), Some(Axis::Y), Some(Axis::Z), None][rng.random_range(0..4)] {
                    s.set(k, ax);
                }
            }
            s.phase = rng.random_range(0..4);
            let op = lat.to_operator(&s);
            let (c, q) = lat.pauli_decompose(&op).unwrap();
            let back = lat.to_operator(&q).scale(c);
            assert!(back.distance(&op).unwrap() < 1e-12);
        }
    }

    #[test]
    fn loops() {
        let lat = ToricLattice::new(3).unwrap();
        let stab = lat.stabilizers();
        for flavor in [Flavor::X, Flavor::Z] {
            let l0 = lat.loop_string(&lat.winding_loop(0, flavor), flavor).unwrap();
            let l1 = lat.loop_string(&lat.winding_loop(1, flavor), flavor).unwrap();
            for g in stab.generators() {
                assert!(l0.commutes_with(g));
            }
            assert_eq!(lat.ground_expectation_pauli(&l0), c64::new(0.0, 0.0));
            assert_eq!(lat.ground_expectation_pauli(&l0.mul(&l1)), c64::new(1.0, 0.0));
        }
        // contractible: boundary of a face is a z cycle, coboundary of a vertex an x cycle
        let face = lat.plaquette(1, 1).unwrap().sites().to_vec();
        let z = lat.loop_string(&face, Flavor::Z).unwrap();
        assert_eq!(lat.ground_expectation_pauli(&z), c64::new(1.0, 0.0));
        let star = lat.star(2, 0).unwrap().sites().to_vec();
        let x = lat.loop_string(&star, Flavor::X).unwrap();
        assert_eq!(lat.ground_expectation_pauli(&x), c64::new(1.0, 0.0));
        let open = vec![lat.edge(Direction::Horizontal, 0, 0)];
        assert!(lat.loop_string(&open, Flavor::Z).is_err());
        assert!(lat.loop_string(&face, Flavor::X).is_err());
    }

    #[test]
    fn winding_loop_ground_value_l2_dense() {
        let lat = ToricLattice::new(2).unwrap();
        let p = lat.ground_projector().unwrap();
        let omega =
            DensityState::new(lat.edges().clone(), crate::tensorcore::scale(p.matrix(), c64::new(0.25, 0.0))).unwrap();
        for flavor in [Flavor::X, Flavor::Z] {
            let op = lat.loop_operator(&lat.winding_loop(0, flavor), flavor).unwrap();
            assert!(omega.expectation(&op).unwrap().norm() < 1e-12);
        }
    }

    #[test]
    fn parse_and_format() {
        let lat = ToricLattice::new(2).unwrap();
        let p = lat.parse_pauli("X@(h,0,1)*Z@(v,1,1)").unwrap();
        assert_eq!(p.weight(), 2);
        assert!(p.x.get(lat.edge_index(&lat.edge(Direction::Horizontal, 0, 1)).unwrap()));
        assert!(p.z.get(lat.edge_index(&lat.edge(Direction::Vertical, 1, 1)).unwrap()));
        assert_eq!(lat.format_pauli(&p), "X@(h,0,1)*Z@(v,1,1)");
        let y = lat.parse_pauli("-1*Y@(v,0,0)").unwrap();
        assert_eq!(lat.format_pauli(&y), "-1*Y@(v,0,0)");
        let xz = lat.parse_pauli("X@(h,0,0)*Z@(h,0,0)").unwrap();
        assert_eq!(lat.format_pauli(&xz), "-i*Y@(h,0,0)");
        assert_eq!(lat.format_pauli(&lat.parse_pauli("I").unwrap()), "I");
        for bad in ["Q@(h,0,0)", "X@(d,0,0)", "X@(h,0,5)", "X@h,0,0", "X@(h,0)"] {
            assert!(lat.parse_pauli(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn symbolic_ground_residual_counts_violated_stabilizers() {
        let lat = ToricLattice::new(3).unwrap();
        let single = PauliString::single(18, 0, Axis::X);
        // sigma^x on an edge anticommutes with its two plaquettes
        assert_eq!(lat.ground_residual(&[single]), 4.0);
        let y = PauliString::single(18, 5, Axis::Y);
        assert_eq!(lat.ground_residual(&[y]), 8.0);
        assert_eq!(lat.ground_residual(&[lat.star_string(3)]), 0.0);
    }

    fn arb_pauli(n: usize) -> impl Strategy<Value = PauliString> {
        (proptest::collection::vec(0u8..4, n), 0u8..4).prop_map(move |(letters, phase)| {
            let mut p = PauliString::identity(n);
            for (k, l) in letters.into_iter().enumerate() {
                match l {
                    1 => p.set(k, Axis::X),
                    2 => p.set(k, Axis::Y),
                    3 => p.set(k, Axis::Z),
                    _ => {}
                }
            }
            p.phase = (p.phase + phase) % 4;
            p
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn stabilizer_lemma(y in arb_pauli(18), g in 0usize..18) {
            let lat = ToricLattice::new(3).unwrap();
            let x = lat.stabilizers().generators()[g].clone();
            let w = lat.ground_expectation_pauli(&y);
            prop_assert_eq!(lat.ground_expectation_pauli(&x.mul(&y)), w);
            prop_assert_eq!(lat.ground_expectation_pauli(&y.mul(&x)), w);
        }

        #[test]
        fn symbolic_product_matches_dense(a in arb_pauli(4), b in arb_pauli(4)) {
            let lat = ToricLattice::new(2).unwrap();
            let pad = |p: &PauliString| {
                let mut q = PauliString::identity(8);
                q.phase = p.phase;
                for k in 0..4 {
                    q.x.set(k, p.x.get(k));
                    q.z.set(k, p.z.get(k));
                }
                q
            };
            let (a, b) = (pad(&a), pad(&b));
            let dense = lat.to_operator(&a).dot(&lat.to_operator(&b)).unwrap();
            let sym = lat.to_operator(&a.mul(&b));
            prop_assert!(dense.distance(&sym).unwrap() < 1e-12);
            prop_assert_eq!(a.commutes_with(&b), commutator(&lat.to_operator(&a), &lat.to_operator(&b)).unwrap().norm() < 1e-12);
            let adj = lat.to_operator(&a.adjoint());
            prop_assert!(adj.distance(&lat.to_operator(&a).adjoint()).unwrap() < 1e-12);
        }

        #[test]
        fn toric_ground_criterion_l3(samples in proptest::collection::vec(arb_pauli(18), 1..20)) {
            let lat = ToricLattice::new(3).unwrap();
            prop_assert!(lat.ground_residual(&samples) >= -1e-9);
        }
    }
}
