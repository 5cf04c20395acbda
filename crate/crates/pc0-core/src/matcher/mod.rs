//! Exact minimum-weight perfect matching of defects under the torus metric.
//!
//! The matching graph is the complete graph on the defect set with integer
//! torus distances for weights. Degenerate optima are broken at random: each
//! edge gets an independent jitter small enough that no sum of jitters can
//! ever outweigh a one-unit difference in true weight, so the jittered
//! optimum is always an exact integer-weight optimum and ties are decided by
//! the jitter draw alone.
//!
//! For speed the solver first runs on a nearest-neighbor subgraph and then
//! extends the dual optimality certificate to every excluded edge; if any
//! excluded edge has negative slack the subgraph answer is discarded and a
//! denser graph (ultimately the complete one) is solved instead. The result
//! is therefore always the exact complete-graph optimum.

mod blossom;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::lattice::{torus_distance, DefectSet, LatticeSpec};

const NONE: usize = usize::MAX;

/// One distance unit in jitter space; jitters occupy [0, UNIT / (k^2+1)).
const JITTER_UNIT: i64 = 1 << 30;

/// Below this defect count the complete graph is solved directly.
const SMALL_COMPLETE: usize = 24;

/// First rung of the certificate ladder: neighbors per defect.
const INITIAL_NEIGHBORS: usize = 8;

/// A perfect pairing of defect sites.
#[derive(Debug, Clone, PartialEq)]
pub struct Matching {
    pairs: Vec<(usize, usize)>,
    total_weight: usize,
    jittered_weight: f64,
}

impl Matching {
    pub fn empty() -> Self {
        Matching {
            pairs: Vec::new(),
            total_weight: 0,
            jittered_weight: 0.0,
        }
    }

    /// Matched site pairs, each with the smaller site index first, sorted.
    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    /// Sum of integer torus distances over the pairs; globally minimal.
    pub fn total_weight(&self) -> usize {
        self.total_weight
    }

    /// The tie-broken objective actually minimized (weight plus jitter).
    pub fn jittered_weight(&self) -> f64 {
        self.jittered_weight
    }

    pub fn pairs_as_coords(&self, spec: &LatticeSpec) -> Vec<[Vec<usize>; 2]> {
        self.pairs
            .iter()
            .map(|&(a, b)| {
                [
                    spec.site_coords(a)[..spec.dimension()].to_vec(),
                    spec.site_coords(b)[..spec.dimension()].to_vec(),
                ]
            })
            .collect()
    }

    fn from_pairs(spec: &LatticeSpec, mut pairs: Vec<(usize, usize)>, jitter_sum: f64) -> Self {
        for p in &mut pairs {
            if p.0 > p.1 {
                std::mem::swap(&mut p.0, &mut p.1);
            }
        }
        pairs.sort_unstable();
        let total_weight = pairs
            .iter()
            .map(|&(a, b)| torus_distance(a, b, spec))
            .sum();
        Matching {
            pairs,
            total_weight,
            jittered_weight: total_weight as f64 + jitter_sum,
        }
    }
}

/// Jittered weights for all defect pairs, upper triangle. The jitter stream
/// is drawn for every pair in a fixed order, so the weights are a pure
/// function of (defect set, tie_seed) no matter which subgraph gets solved.
struct ScaledWeights {
    k: usize,
    scaled: Vec<i64>, // dist * JITTER_UNIT + jitter
    cap: i64,         // strictly above every scaled weight
}

impl ScaledWeights {
    fn build(sites: &[usize], spec: &LatticeSpec, tie_seed: u64) -> Self {
        let k = sites.len();
        let jitter_cap = (JITTER_UNIT / (k as i64 * k as i64 + 1)).max(1);
        let mut rng = ChaCha8Rng::seed_from_u64(tie_seed);
        let mut scaled = Vec::with_capacity(k * (k - 1) / 2);
        let mut max_scaled = 0i64;
        for i in 0..k {
            for j in i + 1..k {
                let jitter = rng.random_range(0..jitter_cap);
                let s = torus_distance(sites[i], sites[j], spec) as i64 * JITTER_UNIT + jitter;
                max_scaled = max_scaled.max(s);
                scaled.push(s);
            }
        }
        ScaledWeights {
            k,
            scaled,
            cap: max_scaled + 1,
        }
    }

    #[inline]
    fn index(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < j && j < self.k);
        i * self.k - i * (i + 1) / 2 + (j - i - 1)
    }

    /// Solver weight: minimizing scaled weight equals maximizing
    /// (cap - scaled); doubled so all solver weights are even.
    #[inline]
    fn solver_weight(&self, i: usize, j: usize) -> i64 {
        2 * (self.cap - self.scaled[self.index(i, j)])
    }

    #[inline]
    fn jitter_of(&self, i: usize, j: usize) -> i64 {
        self.scaled[self.index(i, j)] % JITTER_UNIT
    }
}

/// Exact minimum-weight perfect matching on the complete defect graph.
/// Among degenerate optima the returned matching depends on `tie_seed`.
pub fn min_weight_perfect_matching(
    defects: &DefectSet,
    spec: &LatticeSpec,
    tie_seed: u64,
) -> Result<Matching> {
    min_weight_matching_impl(defects, spec, tie_seed, None)
}

/// Locality-pruned variant: each defect is connected only to its `neighbors`
/// nearest defects and no optimality certificate is required, so the result
/// is only heuristically minimal; callers must label it approximate. Widens
/// the graph as needed until a perfect matching exists.
pub fn min_weight_perfect_matching_pruned(
    defects: &DefectSet,
    spec: &LatticeSpec,
    tie_seed: u64,
    neighbors: usize,
) -> Result<Matching> {
    min_weight_matching_impl(defects, spec, tie_seed, Some(neighbors.max(1)))
}

fn min_weight_matching_impl(
    defects: &DefectSet,
    spec: &LatticeSpec,
    tie_seed: u64,
    forced_neighbors: Option<usize>,
) -> Result<Matching> {
    let sites = defects.sites();
    let k = sites.len();
    if k % 2 != 0 {
        return Err(Error::ContractViolation(format!(
            "perfect matching needs an even defect count, got {k}"
        )));
    }
    if k == 0 {
        return Ok(Matching::empty());
    }
    let weights = ScaledWeights::build(sites, spec, tie_seed);
    match forced_neighbors {
        Some(mut m) => loop {
            if m >= k - 1 {
                return Ok(solve_complete(sites, spec, &weights));
            }
            if let Some(matching) = solve_subgraph(sites, spec, &weights, m, false) {
                return Ok(matching);
            }
            m *= 2; // no perfect matching in the pruned graph; widen
        },
        None => {
            if k > SMALL_COMPLETE {
                let mut m = INITIAL_NEIGHBORS;
                while 2 * m < k {
                    if let Some(matching) = solve_subgraph(sites, spec, &weights, m, true) {
                        return Ok(matching);
                    }
                    m *= 4;
                }
            }
            Ok(solve_complete(sites, spec, &weights))
        }
    }
}

/// Solve on the m-nearest-neighbor graph. With `certify`, the matching is
/// returned only if the final duals prove it optimal for the complete graph.
fn solve_subgraph(
    sites: &[usize],
    spec: &LatticeSpec,
    weights: &ScaledWeights,
    m: usize,
    certify: bool,
) -> Option<Matching> {
    let k = sites.len();
    let mut included = vec![false; weights.scaled.len()];
    let mut candidates: Vec<(i64, usize)> = Vec::with_capacity(k - 1);
    for i in 0..k {
        candidates.clear();
        for j in 0..k {
            if j != i {
                let (a, b) = if i < j { (i, j) } else { (j, i) };
                candidates.push((weights.scaled[weights.index(a, b)], j));
            }
        }
        let keep = m.min(candidates.len());
        candidates.select_nth_unstable(keep - 1);
        for &(_, j) in &candidates[..keep] {
            let (a, b) = if i < j { (i, j) } else { (j, i) };
            included[weights.index(a, b)] = true;
        }
    }
    let mut edges = Vec::new();
    for i in 0..k {
        for j in i + 1..k {
            if included[weights.index(i, j)] {
                edges.push((i, j, weights.solver_weight(i, j)));
            }
        }
    }
    let solver = blossom::solve_state(k, &edges, true)?;
    let mate = solver.mates();
    if mate.iter().any(|&v| v == NONE) {
        return None; // subgraph admits no perfect matching
    }
    if certify {
        let chains = solver.ancestor_chains();
        for i in 0..k {
            for j in i + 1..k {
                if !included[weights.index(i, j)]
                    && solver.edge_slack(&chains, i, j, weights.solver_weight(i, j)) < 0
                {
                    return None; // certificate does not extend; need denser graph
                }
            }
        }
    }
    Some(matching_from_mates(sites, spec, weights, &mate))
}

fn solve_complete(sites: &[usize], spec: &LatticeSpec, weights: &ScaledWeights) -> Matching {
    let k = sites.len();
    let mut edges = Vec::with_capacity(k * (k - 1) / 2);
    for i in 0..k {
        for j in i + 1..k {
            edges.push((i, j, weights.solver_weight(i, j)));
        }
    }
    let solver = blossom::solve_state(k, &edges, true).expect("nonempty graph");
    let mate = solver.mates();
    debug_assert!(
        mate.iter().all(|&v| v != NONE),
        "complete graph on an even defect count always has a perfect matching"
    );
    matching_from_mates(sites, spec, weights, &mate)
}

fn matching_from_mates(
    sites: &[usize],
    spec: &LatticeSpec,
    weights: &ScaledWeights,
    mate: &[usize],
) -> Matching {
    let mut jitter_sum = 0.0;
    let mut pairs = Vec::with_capacity(mate.len() / 2);
    for i in 0..mate.len() {
        if i < mate[i] && mate[i] != NONE {
            jitter_sum += weights.jitter_of(i, mate[i]) as f64 / JITTER_UNIT as f64;
            pairs.push((sites[i], sites[mate[i]]));
        }
    }
    Matching::from_pairs(spec, pairs, jitter_sum)
}

/// Brute-force oracle result. `optimum_count` is the number of distinct
/// perfect matchings achieving the minimum integer weight.
#[derive(Debug, Clone)]
pub struct BruteForceMatching {
    pub matching: Matching,
    pub optimum_count: u64,
}

/// Enumerates every perfect matching (double-factorial growth; refused above
/// 14 defects) and returns one of minimum total torus distance.
pub fn brute_force_matching(defects: &DefectSet, spec: &LatticeSpec) -> Result<BruteForceMatching> {
    let sites = defects.sites();
    let k = sites.len();
    if k % 2 != 0 {
        return Err(Error::ContractViolation(format!(
            "perfect matching needs an even defect count, got {k}"
        )));
    }
    if k > 14 {
        return Err(Error::TooLarge(format!(
            "brute-force matching bounded at 14 defects, got {k}"
        )));
    }
    if k == 0 {
        return Ok(BruteForceMatching {
            matching: Matching::empty(),
            optimum_count: 1,
        });
    }
    let mut dist = vec![0usize; k * k];
    for i in 0..k {
        for j in 0..k {
            dist[i * k + j] = torus_distance(sites[i], sites[j], spec);
        }
    }
    let mut best_weight = usize::MAX;
    let mut best_pairs: Vec<(usize, usize)> = Vec::new();
    let mut optimum_count = 0u64;
    let mut taken = vec![false; k];
    let mut stack: Vec<(usize, usize)> = Vec::with_capacity(k / 2);

    fn recurse(
        k: usize,
        dist: &[usize],
        taken: &mut Vec<bool>,
        stack: &mut Vec<(usize, usize)>,
        weight: usize,
        best_weight: &mut usize,
        best_pairs: &mut Vec<(usize, usize)>,
        optimum_count: &mut u64,
    ) {
        if weight > *best_weight {
            return; // strict: equal-weight branches must still be counted
        }
        let first = match (0..k).find(|&i| !taken[i]) {
            Some(i) => i,
            None => {
                if weight < *best_weight {
                    *best_weight = weight;
                    *best_pairs = stack.clone();
                    *optimum_count = 1;
                } else {
                    *optimum_count += 1;
                }
                return;
            }
        };
        taken[first] = true;
        for j in first + 1..k {
            if taken[j] {
                continue;
            }
            taken[j] = true;
            stack.push((first, j));
            recurse(
                k,
                dist,
                taken,
                stack,
                weight + dist[first * k + j],
                best_weight,
                best_pairs,
                optimum_count,
            );
            stack.pop();
            taken[j] = false;
        }
        taken[first] = false;
    }

    recurse(
        k,
        &dist,
        &mut taken,
        &mut stack,
        0,
        &mut best_weight,
        &mut best_pairs,
        &mut optimum_count,
    );
    let pairs: Vec<(usize, usize)> = best_pairs
        .iter()
        .map(|&(i, j)| (sites[i], sites[j]))
        .collect();
    Ok(BruteForceMatching {
        matching: Matching::from_pairs(spec, pairs, 0.0),
        optimum_count,
    })
}
