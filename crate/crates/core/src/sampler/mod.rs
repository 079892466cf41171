//! Joint sampling of the label distribution by blocked Metropolis-within-
//! Gibbs.
//!
//! The pipeline is: scan heavy rules into pairwise association [`bounds`],
//! merge tightly bound pairs into [`blocks`], draw per-block proposals that
//! respect the bounds ([`proposal`]), and run the Metropolis chain over those
//! blocks ([`chain`]). The unblocked baseline shares the entire code path with
//! blocking disabled, so the two are directly comparable.

mod blocks;
mod bounds;
mod chain;
mod proposal;
mod stats;
mod union_find;

use thiserror::Error;

use super::data::DataError;
use super::psl::PslError;

pub use blocks::BlockPartition;
pub use bounds::{AssociationBounds, Range};
pub use chain::{
    abgibbs_run, default_weight_threshold, diagnostics_to_string, load_samples,
    load_samples_from_text, naive_mwg_run, samples_to_string, thin, weighted_distance_delta,
    write_diagnostics, write_samples, ChainDiagnostics, Diagnostics, SampleSet, SamplerConfig,
};
pub use proposal::{block_sample, ordered_log_density, BlockDraw};
pub use stats::{effective_sample_size, mean_and_variance};

#[derive(Debug, Error)]
pub enum SamplerError {
    #[error("invalid sampler configuration: {0}")]
    BadConfig(String),
    #[error("initial assignment has {got} values, the model has {want} random variables")]
    InitLength { got: usize, want: usize },
    #[error("cannot thin to {requested} rows: only {available} retained")]
    ThinTooFew { requested: usize, available: usize },
    #[error("the model has no random variables to sample")]
    NoRandomVariables,
    #[error(transparent)]
    Psl(#[from] PslError),
    #[error(transparent)]
    Data(#[from] DataError),
}
