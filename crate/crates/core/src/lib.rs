//! Finite-domain workbench for algorithmic stability.

pub mod audit;
pub mod boosting;
pub mod di;
pub mod dimensions;
pub mod dist;
pub mod divergences;
pub mod error;
pub mod exact;
pub mod exec;
pub mod experts;
pub mod learners;
pub mod lp;
pub mod pipeline;
pub mod majority;
pub mod prob;
pub mod types;

pub use dist::{Atom, FiniteDistribution, TruncatedHarmonicMixture};
pub use error::{Error, Result};
pub use exact::LogSum;
pub use exec::Executor;
pub use prob::{LogProb, Prob, Rational};
pub use types::{
    ConsistentSet, Domain, Example, Hypothesis, HypothesisClass, LabeledSample, PopulationDistribution, Universe,
};
