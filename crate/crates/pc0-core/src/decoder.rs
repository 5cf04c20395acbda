//! Trial pipeline: disorder sample -> defects -> matching -> recovery chain
//! -> homology verdict.
//!
//! The recovery chain joins each matched defect pair by an axis-ordered
//! geodesic (walk out axis 0 fully, then axis 1, then axis 2). The interior
//! shape of a geodesic cannot change any winding parity once the per-axis
//! wrap directions are fixed, so the simple staircase suffices; the only
//! genuine freedom is the wrap direction when a displacement is exactly L/2,
//! which is decided by a coin from the tie stream.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::disorder::{defects, generate_sample, Model, Prob, RngPolicy};
use crate::error::Result;
use crate::lattice::{boundary, classify_homology, Chain, CycleClass, LatticeSpec};
use crate::matcher::{
    min_weight_perfect_matching, min_weight_perfect_matching_pruned, Matching,
};

/// Separates the wrap-direction coin stream from the matcher jitter stream,
/// which both derive from the same trial tie seed.
const WRAP_STREAM_SALT: u64 = 0x77f0_5e7a_2f3c_9b1d;

#[derive(Debug, Clone, Copy, Default)]
pub struct TrialOptions {
    /// Connect each defect only to its m nearest neighbors in the matcher.
    /// Exactness is only guaranteed when `None` (complete graph).
    pub prune: Option<usize>,
}

/// Outcome of a single decoding trial. `success` holds exactly when the
/// combined cycle is homologically trivial.
#[derive(Debug, Clone)]
pub struct TrialOutcome {
    pub success: bool,
    pub cycle_class: CycleClass,
    pub error_weight: usize,
    pub recovery_weight: usize,
    pub timing: Duration,
}

/// Builds the recovery chain for a matching: the mod-2 sum of one geodesic
/// per matched pair. Its boundary equals the matched defect set, and its
/// bond count before cancellation equals the matching weight.
pub fn build_recovery_chain(
    matching: &Matching,
    spec: &LatticeSpec,
    tie_seed: u64,
) -> Chain {
    build_recovery_chain_ordered(matching, spec, tie_seed, None)
}

/// Same as [`build_recovery_chain`] but walking the axes in the given order;
/// used to check that the staircase shape does not affect the homology class.
pub(crate) fn build_recovery_chain_ordered(
    matching: &Matching,
    spec: &LatticeSpec,
    tie_seed: u64,
    axis_order: Option<&[usize]>,
) -> Chain {
    let mut rng = ChaCha8Rng::seed_from_u64(tie_seed ^ WRAP_STREAM_SALT);
    let default_order: Vec<usize> = (0..spec.dimension()).collect();
    let order = axis_order.unwrap_or(&default_order);
    let l = spec.length();
    let mut chain = Chain::new();
    for &(from, to) in matching.pairs() {
        let target = spec.site_coords(to);
        let mut cur = from;
        for &axis in order {
            let delta = (target[axis] + l - spec.site_coords(cur)[axis]) % l;
            if delta == 0 {
                continue;
            }
            let step: isize = if 2 * delta < l {
                1
            } else if 2 * delta > l {
                -1
            } else if rng.random::<bool>() {
                1
            } else {
                -1
            };
            for _ in 0..delta.min(l - delta) {
                let base = if step == 1 { cur } else { spec.shift(cur, axis, -1) };
                chain.toggle(spec.bond(base, axis).expect("in range"), spec);
                cur = spec.shift(cur, axis, step);
            }
        }
        debug_assert_eq!(spec.site_coords(cur), target);
    }
    chain
}

/// Decodes an explicitly given error chain (injected fixture): match its
/// defects, build the recovery chain, and classify the combined cycle.
pub fn decode_error_chain(
    error_chain: &Chain,
    spec: &LatticeSpec,
    tie_seed: u64,
    opts: &TrialOptions,
) -> Result<TrialOutcome> {
    let start = Instant::now();
    let defect_set = boundary(error_chain, spec)?;
    let matching = match opts.prune {
        None => min_weight_perfect_matching(&defect_set, spec, tie_seed)?,
        Some(m) => min_weight_perfect_matching_pruned(&defect_set, spec, tie_seed, m)?,
    };
    let recovery = build_recovery_chain(&matching, spec, tie_seed);
    debug_assert_eq!(&boundary(&recovery, spec)?, &defect_set);
    let cycle = error_chain.sum(&recovery);
    let cycle_class = classify_homology(&cycle, spec)?;
    Ok(TrialOutcome {
        success: cycle_class.is_trivial(),
        cycle_class,
        error_weight: error_chain.len(),
        recovery_weight: recovery.len(),
        timing: start.elapsed(),
    })
}

/// Runs one full trial: sample, match, recover, classify. Deterministic
/// given (rng policy, model, L, p, sample_index).
pub fn run_trial(
    spec: &LatticeSpec,
    model: Model,
    p: Prob,
    sample_index: u64,
    rng: &RngPolicy,
    opts: &TrialOptions,
) -> Result<TrialOutcome> {
    let sample = generate_sample(spec, model, p, sample_index, rng)?;
    let tie_seed = rng.tie_seed(model, spec.length(), p, sample_index);
    decode_error_chain(&sample.error_chain, spec, tie_seed, opts)
}

/// Full per-trial record for debugging dumps: every intermediate object in
/// coordinate form.
#[derive(Debug, Clone, Serialize)]
pub struct TrialRecord {
    pub model: String,
    pub l: usize,
    pub p: String,
    pub sample_index: u64,
    pub master_seed: u64,
    pub sample_seed: u64,
    pub tie_seed: u64,
    pub error_chain: Vec<Vec<usize>>,
    pub defects: Vec<Vec<usize>>,
    pub matching: Vec<[Vec<usize>; 2]>,
    pub matching_weight: usize,
    pub recovery_chain: Vec<Vec<usize>>,
    pub cycle: Vec<Vec<usize>>,
    pub cycle_class: Vec<u8>,
    pub success: bool,
    pub error_weight: usize,
    pub recovery_weight: usize,
}

pub fn run_trial_record(
    spec: &LatticeSpec,
    model: Model,
    p: Prob,
    sample_index: u64,
    rng: &RngPolicy,
    opts: &TrialOptions,
) -> Result<TrialRecord> {
    let sample = generate_sample(spec, model, p, sample_index, rng)?;
    let tie_seed = rng.tie_seed(model, spec.length(), p, sample_index);
    let defect_set = defects(&sample);
    let matching = match opts.prune {
        None => min_weight_perfect_matching(&defect_set, spec, tie_seed)?,
        Some(m) => min_weight_perfect_matching_pruned(&defect_set, spec, tie_seed, m)?,
    };
    let recovery = build_recovery_chain(&matching, spec, tie_seed);
    let cycle = sample.error_chain.sum(&recovery);
    let cycle_class = classify_homology(&cycle, spec)?;
    Ok(TrialRecord {
        model: model.name().to_string(),
        l: spec.length(),
        p: p.to_decimal_string(),
        sample_index,
        master_seed: rng.master_seed,
        sample_seed: sample.seed,
        tie_seed,
        error_chain: sample.error_chain.to_coord_tuples(spec),
        defects: defect_set.to_coords(spec),
        matching: matching.pairs_as_coords(spec),
        matching_weight: matching.total_weight(),
        recovery_chain: recovery.to_coord_tuples(spec),
        cycle: cycle.to_coord_tuples(spec),
        cycle_class: cycle_class.parities(),
        success: cycle_class.is_trivial(),
        error_weight: sample.error_chain.len(),
        recovery_weight: recovery.len(),
    })
}
