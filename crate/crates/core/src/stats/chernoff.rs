//! Sampling estimates with the multiplicative Chernoff deviation bound
//! `Pr[|p̂ − p| ≥ γ] ≤ e^{−γ²B/3}` (per side).
//!
//! Run `i` of an estimate is driven by `seed.path([SAMPLE, i])`, and runs are
//! processed in fixed-size batches merged by summation, so the result does
//! not depend on how many worker threads rayon uses.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::distribution::Distribution;
use crate::error::{Error, Result};
use crate::rng::{tag, RngSeed};

const BATCH: u64 = 1024;

/// z-score for a two-sided 95% normal interval.
pub const Z95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleConfig {
    /// Number of independent runs `B`.
    pub samples: u64,
    /// Deviation target `γ`.
    pub gamma: f64,
}

impl SampleConfig {
    pub fn new(samples: u64, gamma: f64) -> Result<Self> {
        if samples == 0 {
            return Err(Error::InvalidParams("B ≥ 1 required".into()));
        }
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidParams("γ > 0 required".into()));
        }
        Ok(SampleConfig { samples, gamma })
    }

    /// `e^{−γ²B/3}`.
    pub fn bound(&self) -> f64 {
        (-self.gamma * self.gamma * self.samples as f64 / 3.0).exp()
    }
}

/// Seed of run `index` of a sampling experiment rooted at `seed`.
pub fn sample_seed(seed: RngSeed, index: u64) -> RngSeed {
    seed.path(&[tag::SAMPLE, index])
}

/// Two-sided radius `γ` at which the per-side bound equals `(1 − confidence)/2`.
pub fn chernoff_radius(samples: u64, confidence: f64) -> f64 {
    assert!(samples > 0 && confidence > 0.0 && confidence < 1.0);
    (3.0 * (2.0 / (1.0 - confidence)).ln() / samples as f64).sqrt()
}

/// Wilson score interval for a binomial proportion.
pub fn wilson_interval(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    assert!(trials > 0 && successes <= trials);
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let centre = (p + z2 / (2.0 * n)) / (1.0 + z2 / n);
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / (1.0 + z2 / n);
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChernoffEstimate {
    pub element: u64,
    pub hits: u64,
    pub samples: u64,
    pub estimate: f64,
    pub gamma: f64,
    /// `e^{−γ²B/3}`.
    pub bound: f64,
}

fn batched<T, F, G>(samples: u64, per_batch: F, merge: G, empty: T) -> T
where
    T: Send,
    F: Fn(u64, u64) -> T + Sync,
    G: Fn(T, T) -> T + Sync,
    T: Clone + Sync,
{
    let batches = samples.div_ceil(BATCH);
    let parts: Vec<T> = (0..batches)
        .into_par_iter()
        .map(|b| per_batch(b * BATCH, ((b + 1) * BATCH).min(samples)))
        .collect();
    parts.into_iter().fold(empty, merge)
}

/// `p̂_z = (1/B)·Σ X_i` where `X_i` indicates that run `i` produced `z`.
pub fn chernoff_estimate<S>(
    sampler: &S,
    element: u64,
    cfg: &SampleConfig,
    seed: RngSeed,
) -> ChernoffEstimate
where
    S: Fn(RngSeed) -> u64 + Sync + ?Sized,
{
    let hits = batched(
        cfg.samples,
        |lo, hi| {
            (lo..hi)
                .filter(|&i| sampler(sample_seed(seed, i)) == element)
                .count() as u64
        },
        |a, b| a + b,
        0u64,
    );
    ChernoffEstimate {
        element,
        hits,
        samples: cfg.samples,
        estimate: hits as f64 / cfg.samples as f64,
        gamma: cfg.gamma,
        bound: cfg.bound(),
    }
}

/// Empirical output distribution over `width`-bit elements from `B` runs.
pub fn empirical_distribution<S>(
    sampler: &S,
    width: u32,
    samples: u64,
    seed: RngSeed,
) -> Result<Distribution>
where
    S: Fn(RngSeed) -> u64 + Sync + ?Sized,
{
    if samples == 0 {
        return Err(Error::InvalidParams("B ≥ 1 required".into()));
    }
    let counts = batched(
        samples,
        |lo, hi| {
            let mut c = BTreeMap::new();
            for i in lo..hi {
                *c.entry(sampler(sample_seed(seed, i))).or_insert(0u64) += 1;
            }
            c
        },
        |mut a, b| {
            for (k, v) in b {
                *a.entry(k).or_insert(0) += v;
            }
            a
        },
        BTreeMap::new(),
    );
    Ok(Distribution::empirical(width, counts))
}
