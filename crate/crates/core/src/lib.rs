//! Interpretable fusion of adjective and noun classifiers.
//!
//! A small network ([`fusion::FusionNetwork`]) maps the probability outputs of
//! an adjective classifier and a noun classifier to adjective-noun pair (ANP)
//! probabilities. Deep Taylor relevance ([`relevance`]) splits each ANP score
//! back onto the individual adjectives and nouns, and [`analysis`] turns those
//! contributions into Adjective-to-Noun Ratios, orientation labels,
//! visually-equivalent ANP pairs, and related concepts.
//!
//! Specialist outputs are plain data here: see [`dataio`] for the file
//! formats and the synthetic generator used to plant ground truth.

pub mod analysis;
mod binio;
pub mod checkpoint;
pub mod dataio;
mod error;
pub mod fusion;
pub mod metrics;
pub mod nn;
pub mod relevance;
pub mod tables;

pub use error::{Error, Result};
