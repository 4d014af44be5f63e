// SPDX-License-Identifier: MIT OR Apache-2.0

//! Polarity-aware contrast-consistent search.
//!
//! Unsupervised linear CCS probes over layer-wise hidden states of paired
//! harmful/safe statements, plus diagnostics that check whether a probe's
//! beliefs stay coherent when a statement's polarity is inverted:
//! empirical separation accuracy, polar consistency and the contradiction
//! index.
//!
//! Pipeline: [`dataset`] builds and perturbs statement pairs, an external
//! extractor writes an [`activations`] archive, [`ccs`] trains probes,
//! [`metrics`] scores them and [`harness`] runs everything layer by layer.
//! [`synth`] generates archives with planted structure for testing.

pub mod activations;
pub mod ccs;
pub mod dataset;
pub mod error;
pub mod harness;
pub mod io_util;
pub mod metrics;
pub mod synth;

pub use error::{ErrorKind, PaccsError, Result};
