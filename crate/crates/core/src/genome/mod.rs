//! Genotype of generated tests: recursive genes, REST actions and individuals,
//! together with sampling, mutation and rendering to HTTP calls.

mod gene;
mod individual;
mod render;

use thiserror::Error;

pub use gene::{
    mutate_gene, mutate_in_place, shift_integer, DateTimeValue, Gene, DEFAULT_ARRAY_MAX_SIZE,
    DEFAULT_STRING_MAX_LEN, MAX_DELTA_EXPONENT,
};
pub use individual::{
    genotype_for, Individual, MutationArm, ParamGene, ParamLocation, ResourceLink, RestAction, Sampler,
    DEFAULT_MAX_TEST_SIZE,
};
pub use render::{render, render_action};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GenomeError {
    #[error("parameter {param} cannot be represented: {reason}")]
    Unsupported { param: String, reason: String },
    #[error("schema has no operations to sample")]
    EmptySchema,
    #[error("maximum test size must be at least 1")]
    InvalidSize,
}
