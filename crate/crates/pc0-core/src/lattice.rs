//! Periodic (torus) lattice geometry in 2 and 3 dimensions.
//!
//! Everything lives on the *dual* lattice: disorder chains and recovery
//! chains are sets of dual bonds, defects (Ising vortices in 2D, magnetic
//! monopoles in 3D) sit on dual sites. Chains carry mod-2 coefficients, so
//! addition is symmetric difference and every chain is its own inverse.

use std::collections::HashSet;
use std::fmt;

use crate::error::{Error, Result};

pub const MAX_DIM: usize = 3;

/// An `L^d` cubic lattice on the d-torus, d in {2, 3}.
///
/// Sites are addressed by a linear index with x fastest:
/// `idx = x + L*(y + L*z)` (z fixed to 0 in 2D).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LatticeSpec {
    dimension: usize,
    length: usize,
}

impl LatticeSpec {
    pub fn new(dimension: usize, length: usize) -> Result<Self> {
        if dimension < 2 || dimension > MAX_DIM {
            return Err(Error::InvalidInput(format!(
                "dimension must be 2 or 3, got {dimension}"
            )));
        }
        if length < 2 {
            return Err(Error::InvalidInput(format!(
                "linear size must be >= 2, got {length}"
            )));
        }
        let spec = LatticeSpec { dimension, length };
        if (spec.site_count() as u64) * (dimension as u64) > u32::MAX as u64 {
            return Err(Error::InvalidInput(format!(
                "lattice too large: {} bonds exceed the 32-bit bond index space",
                spec.site_count() * dimension
            )));
        }
        Ok(spec)
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn length(&self) -> usize {
        self.length
    }

    /// Number of dual sites, `L^d`.
    pub fn site_count(&self) -> usize {
        self.length.pow(self.dimension as u32)
    }

    /// Number of dual bonds, `d * L^d`.
    pub fn bond_count(&self) -> usize {
        self.dimension * self.site_count()
    }

    pub fn site_index(&self, coords: [usize; MAX_DIM]) -> usize {
        debug_assert!(coords.iter().take(self.dimension).all(|&c| c < self.length));
        debug_assert!(coords.iter().skip(self.dimension).all(|&c| c == 0));
        let l = self.length;
        match self.dimension {
            2 => coords[0] + l * coords[1],
            _ => coords[0] + l * (coords[1] + l * coords[2]),
        }
    }

    pub fn site_coords(&self, site: usize) -> [usize; MAX_DIM] {
        debug_assert!(site < self.site_count());
        let l = self.length;
        match self.dimension {
            2 => [site % l, site / l, 0],
            _ => [site % l, (site / l) % l, site / (l * l)],
        }
    }

    /// Site reached from `site` by `steps` lattice steps along `axis`,
    /// wrapping mod L.
    pub fn shift(&self, site: usize, axis: usize, steps: isize) -> usize {
        debug_assert!(axis < self.dimension);
        let l = self.length as isize;
        let mut c = self.site_coords(site);
        c[axis] = (c[axis] as isize + steps).rem_euclid(l) as usize;
        self.site_index(c)
    }

    /// Forward neighbor along `axis` (the far endpoint of the bond based here).
    pub fn neighbor(&self, site: usize, axis: usize) -> usize {
        self.shift(site, axis, 1)
    }

    pub fn bond(&self, base: usize, axis: usize) -> Result<DualBond> {
        if base >= self.site_count() || axis >= self.dimension {
            return Err(Error::InvalidInput(format!(
                "bond (base {base}, axis {axis}) out of range for L={} d={}",
                self.length, self.dimension
            )));
        }
        Ok(DualBond { base, axis })
    }

    pub fn bond_from_id(&self, id: u32) -> Result<DualBond> {
        if id as usize >= self.bond_count() {
            return Err(Error::InvalidInput(format!(
                "bond id {id} out of range (bond count {})",
                self.bond_count()
            )));
        }
        Ok(DualBond {
            base: id as usize / self.dimension,
            axis: id as usize % self.dimension,
        })
    }
}

/// A dual-lattice bond in canonical form: base site plus positive axis
/// direction. Every bond has exactly one such representation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DualBond {
    pub base: usize,
    pub axis: usize,
}

impl DualBond {
    pub fn id(&self, spec: &LatticeSpec) -> u32 {
        (self.base * spec.dimension() + self.axis) as u32
    }

    /// The two dual sites this bond touches.
    pub fn endpoints(&self, spec: &LatticeSpec) -> (usize, usize) {
        (self.base, spec.neighbor(self.base, self.axis))
    }
}

/// A mod-2 one-chain: a set of dual bonds with symmetric-difference addition.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Chain {
    bonds: HashSet<u32>,
}

impl Chain {
    pub fn new() -> Self {
        Chain::default()
    }

    pub fn from_bonds<I: IntoIterator<Item = DualBond>>(spec: &LatticeSpec, bonds: I) -> Self {
        let mut chain = Chain::new();
        for b in bonds {
            chain.toggle(b, spec);
        }
        chain
    }

    pub fn len(&self) -> usize {
        self.bonds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bonds.is_empty()
    }

    pub fn contains(&self, bond: DualBond, spec: &LatticeSpec) -> bool {
        self.bonds.contains(&bond.id(spec))
    }

    /// Mod-2 insertion: adds the bond if absent, removes it if present.
    pub fn toggle(&mut self, bond: DualBond, spec: &LatticeSpec) {
        self.toggle_id(bond.id(spec));
    }

    pub(crate) fn toggle_id(&mut self, id: u32) {
        if !self.bonds.remove(&id) {
            self.bonds.insert(id);
        }
    }

    pub fn iter_ids(&self) -> impl Iterator<Item = u32> + '_ {
        self.bonds.iter().copied()
    }

    /// Bonds in canonical (sorted id) order.
    pub fn bonds(&self, spec: &LatticeSpec) -> Vec<DualBond> {
        let mut ids: Vec<u32> = self.bonds.iter().copied().collect();
        ids.sort_unstable();
        ids.iter()
            .map(|&id| spec.bond_from_id(id).expect("chain bond in range"))
            .collect()
    }

    /// Mod-2 sum (symmetric difference) of two chains.
    pub fn sum(&self, other: &Chain) -> Chain {
        let (small, large) = if self.len() < other.len() {
            (self, other)
        } else {
            (other, self)
        };
        let mut out = large.clone();
        for &id in &small.bonds {
            out.toggle_id(id);
        }
        out
    }

    /// Coordinate-tuple form `[x, y(, z), axis]` per bond, sorted; used by the
    /// CLI debug dump.
    pub fn to_coord_tuples(&self, spec: &LatticeSpec) -> Vec<Vec<usize>> {
        self.bonds(spec)
            .iter()
            .map(|b| {
                let c = spec.site_coords(b.base);
                let mut t: Vec<usize> = c[..spec.dimension()].to_vec();
                t.push(b.axis);
                t
            })
            .collect()
    }
}

impl std::ops::Add<&Chain> for &Chain {
    type Output = Chain;

    fn add(self, rhs: &Chain) -> Chain {
        self.sum(rhs)
    }
}

/// Dual sites where a chain's boundary is nonzero. Always even in size.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DefectSet {
    sites: Vec<usize>, // sorted, deduplicated
}

impl DefectSet {
    pub fn from_sites(spec: &LatticeSpec, mut sites: Vec<usize>) -> Result<Self> {
        sites.sort_unstable();
        sites.dedup();
        if let Some(&s) = sites.iter().find(|&&s| s >= spec.site_count()) {
            return Err(Error::InvalidInput(format!(
                "defect site {s} out of range (site count {})",
                spec.site_count()
            )));
        }
        if sites.len() % 2 != 0 {
            return Err(Error::InvalidInput(format!(
                "defect set must have even cardinality, got {}",
                sites.len()
            )));
        }
        Ok(DefectSet { sites })
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    /// Sites in increasing linear-index order.
    pub fn sites(&self) -> &[usize] {
        &self.sites
    }

    pub fn contains(&self, site: usize) -> bool {
        self.sites.binary_search(&site).is_ok()
    }

    /// Symmetric difference of two defect sets.
    pub fn sym_diff(&self, other: &DefectSet) -> DefectSet {
        let mut set: HashSet<usize> = self.sites.iter().copied().collect();
        for &s in &other.sites {
            if !set.remove(&s) {
                set.insert(s);
            }
        }
        let mut sites: Vec<usize> = set.into_iter().collect();
        sites.sort_unstable();
        DefectSet { sites }
    }

    pub fn to_coords(&self, spec: &LatticeSpec) -> Vec<Vec<usize>> {
        self.sites
            .iter()
            .map(|&s| spec.site_coords(s)[..spec.dimension()].to_vec())
            .collect()
    }
}

/// Homology class of a cycle on the d-torus: one winding parity per axis.
/// There are `2^d` classes; the all-zero class is trivial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CycleClass {
    dimension: usize,
    bits: u8,
}

impl CycleClass {
    pub fn trivial(dimension: usize) -> Self {
        CycleClass { dimension, bits: 0 }
    }

    pub fn from_windings(dimension: usize, windings: &[bool]) -> Self {
        debug_assert_eq!(windings.len(), dimension);
        let mut bits = 0u8;
        for (axis, &w) in windings.iter().enumerate() {
            if w {
                bits |= 1 << axis;
            }
        }
        CycleClass { dimension, bits }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn is_trivial(&self) -> bool {
        self.bits == 0
    }

    pub fn winding(&self, axis: usize) -> bool {
        debug_assert!(axis < self.dimension);
        self.bits >> axis & 1 == 1
    }

    /// Winding parities as 0/1 per axis.
    pub fn parities(&self) -> Vec<u8> {
        (0..self.dimension).map(|a| self.bits >> a & 1).collect()
    }

    pub fn xor(&self, other: &CycleClass) -> CycleClass {
        debug_assert_eq!(self.dimension, other.dimension);
        CycleClass {
            dimension: self.dimension,
            bits: self.bits ^ other.bits,
        }
    }
}

impl fmt::Display for CycleClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p: Vec<String> = self.parities().iter().map(|b| b.to_string()).collect();
        write!(f, "({})", p.join(","))
    }
}

/// Set of dual sites touched by an odd number of chain bonds.
pub fn boundary(chain: &Chain, spec: &LatticeSpec) -> Result<DefectSet> {
    let mut odd: HashSet<usize> = HashSet::new();
    let mut flip = |site: usize| {
        if !odd.remove(&site) {
            odd.insert(site);
        }
    };
    for id in chain.iter_ids() {
        let bond = spec.bond_from_id(id)?;
        let (a, b) = bond.endpoints(spec);
        flip(a);
        flip(b);
    }
    let mut sites: Vec<usize> = odd.into_iter().collect();
    sites.sort_unstable();
    debug_assert!(sites.len() % 2 == 0);
    Ok(DefectSet { sites })
}

/// Graph distance between two dual sites on the torus:
/// sum over axes of `min(|delta|, L - |delta|)`.
pub fn torus_distance(a: usize, b: usize, spec: &LatticeSpec) -> usize {
    let ca = spec.site_coords(a);
    let cb = spec.site_coords(b);
    let l = spec.length();
    (0..spec.dimension())
        .map(|ax| {
            let d = ca[ax].abs_diff(cb[ax]);
            d.min(l - d)
        })
        .sum()
}

/// Homology class of a cycle, computed with the default cut at the
/// `L-1 -> 0` seam on every axis.
pub fn classify_homology(cycle: &Chain, spec: &LatticeSpec) -> Result<CycleClass> {
    classify_homology_with_cuts(cycle, spec, &[spec.length() - 1; MAX_DIM])
}

/// Homology class with the cut perpendicular to axis `mu` placed between
/// coordinates `cuts[mu]` and `cuts[mu]+1 mod L`. The class of a cycle is
/// independent of the cut positions; exposing them lets the validation
/// suite check exactly that.
pub fn classify_homology_with_cuts(
    cycle: &Chain,
    spec: &LatticeSpec,
    cuts: &[usize; MAX_DIM],
) -> Result<CycleClass> {
    let b = boundary(cycle, spec)?;
    if !b.is_empty() {
        return Err(Error::ContractViolation(format!(
            "homology class requested for a chain with nonempty boundary ({} defects)",
            b.len()
        )));
    }
    let mut bits = 0u8;
    for id in cycle.iter_ids() {
        let bond = spec.bond_from_id(id)?;
        let c = spec.site_coords(bond.base);
        if c[bond.axis] == cuts[bond.axis] % spec.length() {
            bits ^= 1 << bond.axis;
        }
    }
    Ok(CycleClass {
        dimension: spec.dimension(),
        bits,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::VecDeque;

    fn spec2(l: usize) -> LatticeSpec {
        LatticeSpec::new(2, l).unwrap()
    }

    fn spec3(l: usize) -> LatticeSpec {
        LatticeSpec::new(3, l).unwrap()
    }

    #[test]
    fn spec_validation() {
        assert!(LatticeSpec::new(1, 4).is_err());
        assert!(LatticeSpec::new(4, 4).is_err());
        assert!(LatticeSpec::new(2, 1).is_err());
        let s = spec3(5);
        assert_eq!(s.site_count(), 125);
        assert_eq!(s.bond_count(), 375);
    }

    #[test]
    fn site_indexing_round_trips() {
        for spec in [spec2(4), spec3(3)] {
            for site in 0..spec.site_count() {
                assert_eq!(spec.site_index(spec.site_coords(site)), site);
            }
        }
    }

    #[test]
    fn boundary_of_empty_chain_is_empty() {
        let spec = spec2(4);
        assert!(boundary(&Chain::new(), &spec).unwrap().is_empty());
    }

    #[test]
    fn boundary_of_single_bond_is_its_endpoints() {
        let spec = spec2(4);
        let bond = spec.bond(spec.site_index([0, 0, 0]), 0).unwrap();
        let chain = Chain::from_bonds(&spec, [bond]);
        let b = boundary(&chain, &spec).unwrap();
        assert_eq!(
            b.sites(),
            &[spec.site_index([0, 0, 0]), spec.site_index([1, 0, 0])]
        );
    }

    #[test]
    fn boundary_of_square_loop_is_empty() {
        let spec = spec2(4);
        let loop4 = fixtures::plaquette_loop(&spec, [1, 2, 0], 0, 1);
        assert_eq!(loop4.len(), 4);
        assert!(boundary(&loop4, &spec).unwrap().is_empty());
    }

    #[test]
    fn boundary_rejects_out_of_range_bond() {
        let spec = spec2(4);
        let mut chain = Chain::new();
        chain.toggle_id(spec.bond_count() as u32); // one past the end
        assert!(matches!(
            boundary(&chain, &spec),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn torus_distance_examples() {
        let s8 = spec2(8);
        let a = s8.site_index([0, 0, 0]);
        assert_eq!(torus_distance(a, a, &s8), 0);
        assert_eq!(torus_distance(a, s8.site_index([5, 0, 0]), &s8), 3);
        let s6 = spec3(6);
        assert_eq!(
            torus_distance(
                s6.site_index([0, 0, 0]),
                s6.site_index([3, 2, 5]),
                &s6
            ),
            6
        );
    }

    fn bfs_distance(a: usize, b: usize, spec: &LatticeSpec) -> usize {
        let mut dist = vec![usize::MAX; spec.site_count()];
        let mut queue = VecDeque::new();
        dist[a] = 0;
        queue.push_back(a);
        while let Some(v) = queue.pop_front() {
            if v == b {
                return dist[v];
            }
            for ax in 0..spec.dimension() {
                for step in [-1isize, 1] {
                    let w = spec.shift(v, ax, step);
                    if dist[w] == usize::MAX {
                        dist[w] = dist[v] + 1;
                        queue.push_back(w);
                    }
                }
            }
        }
        unreachable!("torus is connected");
    }

    #[test]
    fn torus_distance_matches_bfs() {
        for spec in [spec2(2), spec2(3), spec2(5), spec2(6), spec3(2), spec3(4)] {
            for a in 0..spec.site_count() {
                for b in a..spec.site_count() {
                    let expected = bfs_distance(a, b, &spec);
                    assert_eq!(torus_distance(a, b, &spec), expected);
                    assert_eq!(torus_distance(b, a, &spec), expected);
                }
            }
        }
    }

    #[test]
    fn classify_empty_chain_is_trivial() {
        let spec = spec2(4);
        assert!(classify_homology(&Chain::new(), &spec).unwrap().is_trivial());
    }

    #[test]
    fn classify_straight_loop_winds_once() {
        let spec = spec2(6);
        let loop_x = fixtures::winding_loop(&spec, 0, [0, 3, 0]);
        let class = classify_homology(&loop_x, &spec).unwrap();
        assert!(class.winding(0));
        assert!(!class.winding(1));
    }

    #[test]
    fn classify_cancelled_chains_are_trivial() {
        let spec = spec3(4);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let chain = fixtures::random_chain(&spec, 0.3, &mut rng);
        let d = chain.sum(&chain);
        assert!(d.is_empty());
        assert!(classify_homology(&d, &spec).unwrap().is_trivial());
    }

    #[test]
    fn classify_rejects_nonempty_boundary() {
        let spec = spec2(4);
        let bond = spec.bond(0, 0).unwrap();
        let chain = Chain::from_bonds(&spec, [bond]);
        assert!(matches!(
            classify_homology(&chain, &spec),
            Err(Error::ContractViolation(_))
        ));
    }

    #[test]
    fn boundary_of_sum_is_symmetric_difference() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for spec in [spec2(4), spec2(5), spec3(3)] {
            for _ in 0..200 {
                let c1 = fixtures::random_chain(&spec, 0.2, &mut rng);
                let c2 = fixtures::random_chain(&spec, 0.2, &mut rng);
                let lhs = boundary(&c1.sum(&c2), &spec).unwrap();
                let rhs = boundary(&c1, &spec)
                    .unwrap()
                    .sym_diff(&boundary(&c2, &spec).unwrap());
                assert_eq!(lhs, rhs);
                assert_eq!(lhs.len() % 2, 0);
            }
        }
    }

    #[test]
    fn homology_is_cut_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for spec in [spec2(4), spec2(5), spec3(3)] {
            for _ in 0..50 {
                let (cycle, _) = fixtures::random_cycle(&spec, &mut rng);
                let reference = classify_homology(&cycle, &spec).unwrap();
                for ax in 0..spec.dimension() {
                    for offset in 0..spec.length() {
                        let mut cuts = [spec.length() - 1; MAX_DIM];
                        cuts[ax] = offset;
                        let class =
                            classify_homology_with_cuts(&cycle, &spec, &cuts).unwrap();
                        assert_eq!(class, reference);
                    }
                }
            }
        }
    }

    #[test]
    fn homology_classes_add_under_xor() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for spec in [spec2(4), spec3(4)] {
            for _ in 0..200 {
                let (c1, k1) = fixtures::random_cycle(&spec, &mut rng);
                let (c2, k2) = fixtures::random_cycle(&spec, &mut rng);
                assert_eq!(classify_homology(&c1, &spec).unwrap(), k1);
                assert_eq!(classify_homology(&c2, &spec).unwrap(), k2);
                let sum_class = classify_homology(&c1.sum(&c2), &spec).unwrap();
                assert_eq!(sum_class, k1.xor(&k2));
            }
        }
    }

    #[test]
    fn chain_sum_is_involutive_and_commutative() {
        let spec = spec2(5);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let c1 = fixtures::random_chain(&spec, 0.3, &mut rng);
            let c2 = fixtures::random_chain(&spec, 0.3, &mut rng);
            assert!(c1.sum(&c1).is_empty());
            assert_eq!(c1.sum(&c2), c2.sum(&c1));
            assert_eq!(c1.sum(&c2).sum(&c2), c1);
        }
    }
}
