//! Executable versions of the compression identities, controllability
//! checks and the error metrics used to score reconstructions.

mod controllability;
mod identities;
mod metrics;

pub use controllability::{
    check_controllability, controllability, controllability_matrix, numerical_rank,
};
pub use identities::{
    assumption_scores, check_lemma1, check_lemma2, check_lemma_sum, check_markov, check_theorem1,
    check_theorem2, check_theorem3, theorem_suite, AssumptionScores, DmdcOperators,
    LowRankOperator, SuiteOptions, TheoremReport,
};
pub use metrics::{b_error, eig_errors, mode_error, pair_eigenvalues, ErrorMetrics};
