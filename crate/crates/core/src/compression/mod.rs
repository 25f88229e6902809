//! Message compression: the matrix family, the compressed protocol `Π_H`,
//! the matrix-tracking reduction adversaries and the hybrid experiments
//! that relate a reduction run to an ideal `Π_H` run.

mod checks;
mod compressed;
mod hybrid;
mod matrix;
mod params;
mod reduction;

pub use checks::{
    bijective_family, default_slack_levels, reduction_soundness, security_sweep, simulation_check,
    CdfPoint, MatrixSource, SimulationReport, SlackFraction, SoundnessReport, SweepReport,
    ThresholdFraction,
};
pub use compressed::{compressed_protocol, lift, map_h, map_transcript};
pub use hybrid::{
    hybrid_chain, hybrid_distribution, hybrid_experiment, ideal_distribution,
    reduction_distribution, shrinkage_check, transcript_from_key, HybridChainReport, HybridSample,
    ShrinkageLevel, ShrinkageReport, TranscriptDistribution, TranscriptKey,
};
pub use matrix::{
    enumerate_family, family_size, sample_matrices, sample_matrix, MatrixH, MATRIX_BITS_CAP,
};
pub use params::{ell_formula, mu_star, CompressionParams, SlackBudget, MAX_ELL};
pub use reduction::{
    reduction_adversary_static, run_reduction, Family, FamilyMember, ReductionAdversary,
    ReductionRun, StaticChoice, StaticMember,
};
