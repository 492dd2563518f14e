//! Subword segmentation grounded in a word-embedding space.
//!
//! The pipeline builds word co-occurrence counts, places subwords in the
//! space of a trained skip-gram model, segments words by embedding
//! similarity, and distills any segmenter into a smoothed subword bigram
//! model searched with a beam. Boundary precision/recall and Rényi
//! efficiency are provided for evaluation.
//!
//! Numerical code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the usual double-precision choice.
//!
//! ```
//! use subseg::bigram::{beam_segment, distill, DEFAULT_BEAM};
//! use subseg::Token;
//!
//! let words: Vec<Vec<Token>> = [["un", "do", "ing"], ["re", "do", "ing"]]
//!     .iter()
//!     .map(|w| w.iter().map(|p| Token::new(*p).unwrap()).collect())
//!     .collect();
//! let model = distill(words.iter().map(Vec::as_slice))?;
//! let seg = beam_segment("undo", &model, DEFAULT_BEAM)?;
//! assert_eq!(seg.subwords.concat(), "undo");
//! # Ok::<(), subseg::Error>(())
//! ```

pub mod bigram;
pub mod cooccur;
pub mod error;
pub mod lexseg;
pub mod metrics;
pub mod scalar;
pub mod subspace;
pub mod textio;

pub use error::{Error, ErrorKind, Result};
pub use scalar::Scalar;
pub use textio::Token;

/// Double-precision embedding table.
pub type Embeddings = subspace::EmbeddingTable<f64>;
/// Single-precision embedding table.
pub type Embeddings32 = subspace::EmbeddingTable<f32>;
/// Double-precision refinement settings.
pub type RefineOptions = lexseg::RefineConfig<f64>;
/// Single-precision refinement settings.
pub type RefineOptions32 = lexseg::RefineConfig<f32>;
/// Double-precision refinement result.
pub type Refinement = lexseg::RefinementState<f64>;
/// Single-precision refinement result.
pub type Refinement32 = lexseg::RefinementState<f32>;
/// Double-precision Rényi report.
pub type Renyi = metrics::RenyiReport<f64>;
