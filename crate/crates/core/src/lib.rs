//! Inference-time validation and input adaptation for code models.
//!
//! A prediction is scored by uncertainty metrics combined into a validity
//! score; when the score falls below a threshold the input is adapted by
//! semantics-preserving rewrites or bounded latent perturbation and the model
//! is queried again.

pub mod adapters;
pub mod corpus;
pub mod latent;
pub mod metrics;
pub mod pipeline;
pub mod search;
pub mod transforms;
pub mod validator;
