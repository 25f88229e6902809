//! Exact and empirical distributions and the probabilistic toolkit.

mod chernoff;
mod claims;
mod distribution;
mod info;

pub use chernoff::{
    chernoff_estimate, chernoff_radius, empirical_distribution, sample_seed, wilson_interval,
    ChernoffEstimate, SampleConfig, Z95,
};
pub use claims::{claim_prob_verify, default_eps_grid, parse_decimal, ClaimReport, ClaimViolation};
pub use distribution::{ratio_to_f64, Distribution, Prob};
pub use info::{
    entropy, entropy_precise, kl_divergence, kl_divergence_precise, kl_uniform_identity_holds,
    pinsker_check, statistical_distance, within_budget, PinskerReport, Precise, ERROR_BUDGET_LOG2,
    PRECISION,
};
