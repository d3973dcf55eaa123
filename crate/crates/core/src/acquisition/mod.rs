//! Acquisition functions: safety-indicator entropy, the safe-exploration
//! information gain, max-value entropy search and the combined criterion.

mod entropy;
mod ise;
mod mes;
mod select;

use thiserror::Error;

use crate::search::SearchError;

pub use entropy::{
    approx_entropy, exact_entropy, expected_post_entropy, ise_mutual_info, ise_upper_bound, unsafe_prob, MiQuery, C1,
    C2, MI_CLAMP,
};
pub use ise::{IseObjective, SecondTerm};
pub use mes::{alpha_mes, alpha_mes_hat, alpha_mes_noisy, gumbel_max_sample, max_value_cdf, sample_max_value, MaxValueSample};
pub use select::{select_next, Component, SelectMode, Selection, SelectionContext};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AcquisitionError {
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("no candidate points to sample the maximum value from")]
    EmptyCandidates,
    #[error(transparent)]
    Search(#[from] SearchError),
}
