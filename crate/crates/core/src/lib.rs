//! Static word embeddings distilled from contextual teacher vectors.
//!
//! The pipeline is:
//!
//! 1. [`corpus`]: lowercase, tokenize and filter raw paragraphs, build a
//!    frequency-ordered [`Vocabulary`] and encode the corpus as ids.
//! 2. [`stream`]: per-sentence teacher vectors in a little-endian binary
//!    format, produced either by an external exporter or by the
//!    deterministic [`mock`] teacher.
//! 3. [`train`]: learn the target matrix by negative-sampling logistic loss
//!    against the averaged teacher context, with target subsampling and lazy
//!    Adam. A static Sent2vec-style context encoder is available as baseline.
//! 4. [`ase`]: average-pooled teacher vectors per word, the aggregated
//!    static embedding baseline.
//! 5. [`eval`]: cosine similarity versus human ratings, Spearman's rho,
//!    nearest neighbours.
//!
//! [`sweep`] ties training, ASE and evaluation together over stream prefixes.

pub mod ase;
pub mod corpus;
pub mod embeddings;
pub mod eval;
pub mod matrix;
pub mod mock;
pub mod planted;
pub mod stream;
pub mod sweep;
pub mod train;

pub use corpus::{EncodedCorpus, TokenizedCorpus, Vocabulary, OOV};
pub use embeddings::Embeddings;
pub use matrix::{EmbeddingMatrix, Matrix};
pub use stream::{Dtype, Scope, SentenceRecord, StreamHeader};
pub use train::{Mode, TrainerConfig};
