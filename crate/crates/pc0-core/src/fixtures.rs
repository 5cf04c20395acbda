//! Deterministic lattice fixtures shared by the validation suites and the
//! `oracle-check` command: random chains, cycles of known homology class,
//! and random defect instances.

use rand::Rng;

use crate::lattice::{Chain, CycleClass, DefectSet, LatticeSpec, MAX_DIM};

/// Unit square loop in the (ax1, ax2) plane with lower corner `base`.
/// Always a cycle of trivial class.
pub fn plaquette_loop(
    spec: &LatticeSpec,
    base: [usize; MAX_DIM],
    ax1: usize,
    ax2: usize,
) -> Chain {
    assert!(ax1 != ax2 && ax1 < spec.dimension() && ax2 < spec.dimension());
    let origin = spec.site_index(base);
    let mut chain = Chain::new();
    let along = |site: usize, axis: usize| spec.bond(site, axis).expect("in range");
    chain.toggle(along(origin, ax1), spec);
    chain.toggle(along(spec.neighbor(origin, ax1), ax2), spec);
    chain.toggle(along(spec.neighbor(origin, ax2), ax1), spec);
    chain.toggle(along(origin, ax2), spec);
    chain
}

/// Straight noncontractible loop of L bonds along `axis`, passing through
/// `through`. Winds the torus exactly once in that direction.
pub fn winding_loop(spec: &LatticeSpec, axis: usize, through: [usize; MAX_DIM]) -> Chain {
    assert!(axis < spec.dimension());
    let mut chain = Chain::new();
    let mut c = through;
    for t in 0..spec.length() {
        c[axis] = t;
        chain.toggle(spec.bond(spec.site_index(c), axis).unwrap(), spec);
    }
    chain
}

/// Chain with each dual bond included independently with probability `p`.
pub fn random_chain<R: Rng>(spec: &LatticeSpec, p: f64, rng: &mut R) -> Chain {
    let mut chain = Chain::new();
    for id in 0..spec.bond_count() as u32 {
        if rng.random::<f64>() < p {
            chain.toggle_id(id);
        }
    }
    chain
}

/// Random cycle with a known homology class: a sum of random plaquette
/// loops (trivial) plus, per axis, an optional winding loop (one winding
/// parity flip each). Returns the cycle and its class.
pub fn random_cycle<R: Rng>(spec: &LatticeSpec, rng: &mut R) -> (Chain, CycleClass) {
    let d = spec.dimension();
    let l = spec.length();
    let mut cycle = Chain::new();
    let n_plaquettes = rng.random_range(0..3 * l);
    for _ in 0..n_plaquettes {
        let mut base = [0usize; MAX_DIM];
        for c in base.iter_mut().take(d) {
            *c = rng.random_range(0..l);
        }
        let ax1 = rng.random_range(0..d);
        let ax2 = (ax1 + 1 + rng.random_range(0..d - 1)) % d;
        cycle = cycle.sum(&plaquette_loop(spec, base, ax1, ax2));
    }
    let mut windings = vec![false; d];
    for (axis, w) in windings.iter_mut().enumerate() {
        if rng.random::<bool>() {
            let mut through = [0usize; MAX_DIM];
            for (ax, c) in through.iter_mut().enumerate().take(d) {
                if ax != axis {
                    *c = rng.random_range(0..l);
                }
            }
            cycle = cycle.sum(&winding_loop(spec, axis, through));
            *w = true;
        }
    }
    (cycle, CycleClass::from_windings(d, &windings))
}

/// Random defect instance: `2m` distinct dual sites with `m` drawn in
/// `1..=max_pairs`. Used by the matching oracle battery.
pub fn random_defect_set<R: Rng>(
    spec: &LatticeSpec,
    max_pairs: usize,
    rng: &mut R,
) -> DefectSet {
    let pairs = rng.random_range(1..=max_pairs);
    let want = (2 * pairs).min(spec.site_count() & !1);
    let mut sites: Vec<usize> = Vec::with_capacity(want);
    while sites.len() < want {
        let s = rng.random_range(0..spec.site_count());
        if !sites.contains(&s) {
            sites.push(s);
        }
    }
    DefectSet::from_sites(spec, sites).expect("even by construction")
}
