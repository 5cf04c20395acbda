//! Quenched disorder samples for the 2D RBIM and 3D RPGM.
//!
//! A sample is the error chain E: the set of dual bonds whose coupling has
//! the wrong sign, each included independently with probability p. Only E is
//! stored; the sign variables themselves are gauge, and everything physical
//! (defect locations, homology) is a function of E alone.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::lattice::{boundary, Chain, DefectSet, LatticeSpec};

/// The two disorder models: antiferromagnetic bonds on the 2-torus,
/// wrong-sign plaquettes on the 3-torus (dual one-chain picture in both).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Model {
    #[serde(rename = "rbim2d")]
    Rbim2d,
    #[serde(rename = "rpgm3d")]
    Rpgm3d,
}

impl Model {
    pub fn dimension(&self) -> usize {
        match self {
            Model::Rbim2d => 2,
            Model::Rpgm3d => 3,
        }
    }

    /// Large-p limit of the failure probability: the chance of landing in a
    /// nontrivial class when all 2^d classes are equally likely.
    pub fn failure_asymptote(&self) -> f64 {
        match self {
            Model::Rbim2d => 3.0 / 4.0,
            Model::Rpgm3d => 7.0 / 8.0,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Model::Rbim2d => "rbim2d",
            Model::Rpgm3d => "rpgm3d",
        }
    }

    fn tag(&self) -> u8 {
        match self {
            Model::Rbim2d => 0,
            Model::Rpgm3d => 1,
        }
    }

    pub fn lattice(&self, length: usize) -> Result<LatticeSpec> {
        LatticeSpec::new(self.dimension(), length)
    }
}

impl std::str::FromStr for Model {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rbim2d" => Ok(Model::Rbim2d),
            "rpgm3d" => Ok(Model::Rpgm3d),
            other => Err(Error::InvalidInput(format!(
                "unknown model '{other}' (expected rbim2d or rpgm3d)"
            ))),
        }
    }
}

impl std::fmt::Display for Model {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

const PROB_DENOM: u32 = 1_000_000;

/// Probability carried as an exact decimal with 10^-6 resolution, so that
/// seed derivation and grid arithmetic never depend on float identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Prob {
    micro: u32,
}

impl Prob {
    pub const ZERO: Prob = Prob { micro: 0 };
    pub const ONE: Prob = Prob { micro: PROB_DENOM };

    pub fn from_micro(micro: u32) -> Result<Self> {
        if micro > PROB_DENOM {
            return Err(Error::InvalidInput(format!(
                "probability {micro}e-6 exceeds 1"
            )));
        }
        Ok(Prob { micro })
    }

    /// Nearest representable probability; rejects values outside [0, 1] and
    /// values that are not multiples of 10^-6 (within float slop).
    pub fn from_f64(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidInput(format!(
                "probability {p} outside [0, 1]"
            )));
        }
        let micro = (p * PROB_DENOM as f64).round();
        if (p * PROB_DENOM as f64 - micro).abs() > 1e-3 {
            return Err(Error::InvalidInput(format!(
                "probability {p} is not a multiple of 1e-6"
            )));
        }
        Prob::from_micro(micro as u32)
    }

    /// Parses a plain decimal like `0.1031` with at most six fractional digits.
    pub fn parse_decimal(s: &str) -> Result<Self> {
        let bad = || Error::InvalidInput(format!("cannot parse probability '{s}'"));
        let (int_part, frac_part) = match s.split_once('.') {
            Some((i, f)) => (i, f),
            None => (s, ""),
        };
        if int_part.is_empty() && frac_part.is_empty() {
            return Err(bad());
        }
        let int: u32 = if int_part.is_empty() {
            0
        } else {
            int_part.parse().map_err(|_| bad())?
        };
        if frac_part.len() > 6 || frac_part.chars().any(|c| !c.is_ascii_digit()) {
            return Err(bad());
        }
        let mut frac: u32 = if frac_part.is_empty() {
            0
        } else {
            frac_part.parse().map_err(|_| bad())?
        };
        frac *= 10u32.pow(6 - frac_part.len() as u32);
        Prob::from_micro(int * PROB_DENOM + frac)
    }

    pub fn micro(&self) -> u32 {
        self.micro
    }

    pub fn value(&self) -> f64 {
        self.micro as f64 / PROB_DENOM as f64
    }

    /// Canonical decimal rendering: trailing zeros trimmed, `0`/`1` for the
    /// endpoints. Stable across runs; used for CSV rows and seed audits.
    pub fn to_decimal_string(&self) -> String {
        if self.micro % PROB_DENOM == 0 {
            return (self.micro / PROB_DENOM).to_string();
        }
        let mut s = format!("{}.{:06}", self.micro / PROB_DENOM, self.micro % PROB_DENOM);
        while s.ends_with('0') {
            s.pop();
        }
        s
    }
}

impl std::fmt::Display for Prob {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.to_decimal_string())
    }
}

/// Deterministic stream derivation: every (master_seed, model, L, p,
/// sample_index) tuple is hashed into an independent 64-bit stream seed, so
/// samples can be generated in any order on any number of workers and still
/// come out bit-identical.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngPolicy {
    pub master_seed: u64,
}

impl RngPolicy {
    pub fn new(master_seed: u64) -> Self {
        RngPolicy { master_seed }
    }

    fn derive(&self, tag: &[u8], model: Model, length: usize, p: Prob, sample_index: u64) -> u64 {
        let mut h = Sha256::new();
        h.update(tag);
        h.update(self.master_seed.to_le_bytes());
        h.update([model.tag()]);
        h.update((length as u32).to_le_bytes());
        h.update(p.micro().to_le_bytes());
        h.update(sample_index.to_le_bytes());
        let digest = h.finalize();
        u64::from_le_bytes(digest[..8].try_into().unwrap())
    }

    /// Seed for the disorder draw of one sample.
    pub fn sample_seed(&self, model: Model, length: usize, p: Prob, sample_index: u64) -> u64 {
        self.derive(b"pc0.sample.v1", model, length, p, sample_index)
    }

    /// Seed for tie-breaking choices (degenerate matchings, wrap directions)
    /// in the same trial; an independent stream from the disorder draw.
    pub fn tie_seed(&self, model: Model, length: usize, p: Prob, sample_index: u64) -> u64 {
        self.derive(b"pc0.tie.v1", model, length, p, sample_index)
    }

    pub fn sample_rng(&self, model: Model, length: usize, p: Prob, sample_index: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.sample_seed(model, length, p, sample_index))
    }
}

/// One quenched sample: the error chain E plus the parameters that produced it.
#[derive(Debug, Clone)]
pub struct DisorderSample {
    pub spec: LatticeSpec,
    pub model: Model,
    pub p: Prob,
    pub seed: u64,
    pub error_chain: Chain,
}

/// Draws the error chain: each dual bond enters E independently with
/// probability p (exact in the 10^-6 grid, not float-thresholded).
pub fn generate_sample(
    spec: &LatticeSpec,
    model: Model,
    p: Prob,
    sample_index: u64,
    rng: &RngPolicy,
) -> Result<DisorderSample> {
    if spec.dimension() != model.dimension() {
        return Err(Error::InvalidInput(format!(
            "model {model} needs dimension {}, lattice has {}",
            model.dimension(),
            spec.dimension()
        )));
    }
    let seed = rng.sample_seed(model, spec.length(), p, sample_index);
    let mut stream = ChaCha8Rng::seed_from_u64(seed);
    // include bond iff next_u64 < micro * 2^64 / 10^6, an exact Bernoulli(p)
    let threshold = ((p.micro() as u128) << 64) / PROB_DENOM as u128;
    let mut error_chain = Chain::new();
    for id in 0..spec.bond_count() as u32 {
        if (stream.random::<u64>() as u128) < threshold {
            error_chain.toggle_id(id);
        }
    }
    Ok(DisorderSample {
        spec: *spec,
        model,
        p,
        seed,
        error_chain,
    })
}

/// Defect locations of a sample: the boundary of its error chain
/// (Ising vortices in 2D, magnetic monopoles in 3D).
pub fn defects(sample: &DisorderSample) -> DefectSet {
    boundary(&sample.error_chain, &sample.spec).expect("sample chain is in range")
}

/// Nishimori coupling K_p = (1/2) ln((1-p)/p), the inverse temperature at
/// which quenched and thermal bond distributions coincide.
pub fn nishimori_coupling(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidInput(format!(
            "Nishimori coupling needs 0 < p < 1, got {p}"
        )));
    }
    Ok(0.5 * ((1.0 - p) / p).ln())
}
