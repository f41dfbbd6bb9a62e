//! Choosing the next document to annotate.

use std::collections::BTreeSet;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Entropies within this distance of the maximum count as tied.
pub const TIE_TOLERANCE: f64 = 1e-12;
pub const DEFAULT_EPSILON: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SamplerError {
    #[error("probability vector has a negative component")]
    NegativeProbability,
    #[error("every document has been shown")]
    PoolExhausted,
    #[error("unknown sampler policy {0:?}")]
    UnknownPolicy(String),
    #[error("{uids} documents but {posteriors} posterior rows")]
    LengthMismatch { uids: usize, posteriors: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    #[default]
    Entropy,
    Random,
    /// Entropy, except that with probability epsilon a random uncovered
    /// document is served.
    EntropyEps,
}

impl FromStr for Policy {
    type Err = SamplerError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "entropy" => Ok(Policy::Entropy),
            "random" => Ok(Policy::Random),
            "entropy_eps" => Ok(Policy::EntropyEps),
            other => Err(SamplerError::UnknownPolicy(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerState {
    pub policy: Policy,
    pub seed: u64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    pub shown: BTreeSet<String>,
}

fn default_epsilon() -> f64 {
    DEFAULT_EPSILON
}

impl SamplerState {
    pub fn new(policy: Policy, seed: u64) -> Self {
        SamplerState { policy, seed, epsilon: DEFAULT_EPSILON, shown: BTreeSet::new() }
    }

    /// The generator for the next draw. It depends only on the seed and the
    /// number of documents shown so far, so replaying the same history
    /// reproduces every draw.
    fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed ^ (self.shown.len() as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
    }
}

/// Shannon entropy in nats, with `0 · ln 0 = 0`.
pub fn entropy(p: &[f64]) -> Result<f64, SamplerError> {
    if p.iter().any(|&x| x < 0.0) {
        return Err(SamplerError::NegativeProbability);
    }
    Ok(-p.iter().filter(|&&x| x > 0.0).map(|&x| x * x.ln()).sum::<f64>())
}

fn pick<'a>(rng: &mut ChaCha8Rng, pool: &[&'a str]) -> &'a str {
    pool[rng.random_range(0..pool.len())]
}

/// The document `state` would serve next, without recording it.
///
/// `covered[i]` tells whether any function fires on document `i`; it only
/// matters for [`Policy::EntropyEps`].
pub fn peek_next(
    uids: &[String],
    posteriors: &[Vec<f64>],
    covered: &[bool],
    state: &SamplerState,
) -> Result<String, SamplerError> {
    if uids.len() != posteriors.len() {
        return Err(SamplerError::LengthMismatch { uids: uids.len(), posteriors: posteriors.len() });
    }
    let unshown: Vec<usize> = (0..uids.len()).filter(|&i| !state.shown.contains(&uids[i])).collect();
    if unshown.is_empty() {
        return Err(SamplerError::PoolExhausted);
    }
    let mut rng = state.rng();
    let all: Vec<&str> = unshown.iter().map(|&i| uids[i].as_str()).collect();
    let by_entropy = |rng: &mut ChaCha8Rng| -> Result<String, SamplerError> {
        let scores = unshown.iter().map(|&i| entropy(&posteriors[i])).collect::<Result<Vec<f64>, _>>()?;
        let best = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let tied: Vec<&str> =
            unshown.iter().zip(&scores).filter(|(_, &s)| best - s <= TIE_TOLERANCE).map(|(&i, _)| uids[i].as_str()).collect();
        Ok(pick(rng, &tied).to_string())
    };
    match state.policy {
        Policy::Entropy => by_entropy(&mut rng),
        Policy::Random => Ok(pick(&mut rng, &all).to_string()),
        Policy::EntropyEps => {
            let explore = rng.random::<f64>() < state.epsilon;
            let uncovered: Vec<&str> =
                unshown.iter().filter(|&&i| !covered.get(i).copied().unwrap_or(false)).map(|&i| uids[i].as_str()).collect();
            if explore && !uncovered.is_empty() {
                Ok(pick(&mut rng, &uncovered).to_string())
            } else {
                by_entropy(&mut rng)
            }
        }
    }
}

/// Serves the next document and records it as shown.
pub fn next_example(
    uids: &[String],
    posteriors: &[Vec<f64>],
    covered: &[bool],
    state: &mut SamplerState,
) -> Result<String, SamplerError> {
    let uid = peek_next(uids, posteriors, covered, state)?;
    state.shown.insert(uid.clone());
    Ok(uid)
}
