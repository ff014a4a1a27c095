//! Dictionary-driven data augmentation for cross-domain machine translation.
//!
//! Out-of-domain sentence pairs act as templates: for every entry of an
//! in-domain dictionary the most similar templates are retrieved from an IVF
//! index, the best-matching noun phrase is located on the source side, its
//! counterpart is found through a word alignment model, and both are replaced
//! by the dictionary pair. The [`coverage`] module measures how many
//! dictionary terms shared with a test set a corpus contains.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases at
//! the crate root fix the precisions the pipeline uses.

pub mod align;
pub mod annindex;
pub mod corpusio;
pub mod coverage;
pub mod embedding;
pub mod error;
pub mod phrase;
pub mod pipeline;
pub mod scalar;
pub mod substitute;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Embedding vector with the precision used by the pipeline.
pub type EmbeddingVector = embedding::Embedding<f32>;
/// Keyed embedding table with the precision used by the pipeline.
pub type EmbeddingStore = embedding::EmbeddingStore<f32>;
/// IVF index over `f32` sentence embeddings.
pub type AnnIndex = annindex::IvfIndex<f32>;
/// Alignment model with `f64` probabilities.
pub type AlignmentModel = align::AlignmentModel<f64>;
/// Phrase match scored in `f32`.
pub type PhraseMatch = phrase::PhraseMatch<f32>;
