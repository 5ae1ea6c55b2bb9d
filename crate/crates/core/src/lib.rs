//! Data-driven ground-fault location for a radial distribution feeder.
//!
//! The crate covers the whole chain: feeder model and fault grid
//! ([`netmodel`]), EMT simulation of substation voltages ([`emtsim`]),
//! wavelet decomposition ([`wavelet`]), statistical features ([`features`]),
//! MLP training with Levenberg-Marquardt and scaled conjugate gradient
//! ([`neuralnet`]) and the staged phase/distance/path locator
//! ([`pipeline`]).

pub mod error;
pub mod features;
pub mod emtsim;
pub mod netmodel;
pub mod neuralnet;
pub mod pipeline;
pub mod registry;
pub mod wavelet;

pub use error::{Error, ErrorClass, Result};
