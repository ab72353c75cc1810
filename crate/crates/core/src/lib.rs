//! Embed an observational dataset in a hypothetical randomized experiment.
//!
//! The pipeline has four ordered stages: a conceptual stage (choosing the
//! hypothetical experiment), an outcome-blind design stage (trimming,
//! stratification, or matching), balance diagnostics, and — only after the
//! design is frozen behind a content-addressed lock — the analysis stage
//! (randomization tests, fiducial intervals, regression estimates, and a
//! Bayesian posterior for the average causal effect).
//!
//! Outcomes are sealed by construction: `dataset::BlindedDataset` exposes no
//! outcome accessor, and every design- and balance-stage operation takes the
//! blinded type. `design::unseal_outcomes` is the single gate to the
//! outcome-visible `design::AnalysisDataset`, and it verifies the lock first.

pub mod balance;
pub mod canon;
pub mod dataset;
pub mod design;
pub mod error;
pub mod inference;
pub mod numerics;
pub mod protocol;

pub use error::{Error, Result};
