//! Distribution separation for pseudo-relevance feedback.
//!
//! * [`dist`]: probability vectors over a shared vocabulary, correlation and
//!   divergences.
//! * [`separation`]: the separation estimators (lower bound, minimum squared
//!   correlation, fixed coefficient) and divergence profiles.
//! * [`mmf`]: the two-component mixture feedback model, its EM fit and the
//!   closed-form linear separation it converges to.
//! * [`synth`]: seeded generators for ground-truth mixtures and corpora.
//! * [`harness`]: a small language-model retrieval pipeline with feedback and
//!   MAP evaluation.

pub mod dist;
pub mod error;
pub mod harness;
pub mod mmf;
pub mod separation;
pub mod synth;

pub use dist::{
    divergence_derivative, js_divergence, kl_divergence, linear_combine, pearson_correlation, symmetrized_kl,
    DivergenceKind, DivergenceProfilePoint, TermDistribution, Vocabulary,
};
pub use error::{Error, Result};
pub use mmf::{
    closed_form_theta, em_equivalence_gap, em_step, feedback_tf, mmf_log_likelihood, run_em, ClosedForm, EmConfig,
    EmResult, EquivalenceReport, FeedbackSet,
};
pub use separation::{
    divergence_profile, dsm, estimate_lambda_min_rho2, lambda_lower_bound, separate, zero_correlation_lambda,
    LambdaStrategy, SeparationResult,
};
