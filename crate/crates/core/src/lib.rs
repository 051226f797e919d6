//! Stylometric authorship attribution toolkit.
//!
//! The pipeline runs from review TSV ingestion ([`corpus`]) through text
//! cleaning ([`preprocess`]) and feature extraction ([`features`]) to two
//! classifiers: multinomial logistic regression ([`linear`]) and a
//! triplet-trained embedding with cosine kNN ([`metric`], [`knn`]).
//! [`evaluation`] runs stratified cross-validation with Accuracy,
//! Macro-F1 and Top-k metrics; [`experiments`] drives the method
//! comparison, imbalance, and scaling sweeps; [`synthetic`] generates
//! corpora with a controllable author signal.

pub mod corpus;
pub mod error;
pub mod evaluation;
pub mod experiments;
pub mod features;
pub mod knn;
pub mod linear;
pub mod metric;
pub mod optim;
pub mod preprocess;
pub mod rng;
mod serde_nan;
pub mod synthetic;

pub use error::{Error, Result};
