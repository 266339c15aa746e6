//! Multi-carousel book recommendation: catalog loading, item similarity,
//! prediction providers, carousel selection and filling, and offline
//! evaluation.
//!
//! Numeric code is generic over [`Scalar`] so that it can run on `f64` in
//! experiments and on exact rationals in tests; the aliases below fix the
//! common instantiations.

pub mod carousel;
pub mod catalog;
pub mod config;
pub mod error;
pub mod evaluation;
pub mod recommender;
pub mod scalar;
pub mod seed;
pub mod similarity;
pub mod synth;

pub use carousel::{CarouselSpec, FilledCarousel, Strategy, StrategyParams};
pub use catalog::{Dataset, Item, ItemId, Transaction, UserId};
pub use config::ExperimentConfig;
pub use error::{Error, Result};
pub use scalar::{Real, Scalar};
pub use similarity::{BisWeights, PairMode, SimilarityScore};

/// Exact rational used by oracles.
pub type Rational = num_rational::Rational64;

pub type Weights = BisWeights<f64>;
pub type ExactWeights = BisWeights<Rational>;
pub type Score = SimilarityScore<f64>;
pub type ExactScore = SimilarityScore<Rational>;
pub type Filler<'a> = carousel::CarouselFiller<'a, f64>;
pub type ExactFiller<'a> = carousel::CarouselFiller<'a, Rational>;
pub type Boxplot = evaluation::BoxplotSummary<f64>;
