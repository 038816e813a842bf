//! Operator-scaling Gaussian random fields.
//!
//! A field is fixed by a scaling exponent [`ExponentSpec`] and an
//! `E'`-homogeneous spectral density [`HomogeneousPsi`]. The crate evaluates
//! the induced quasi-metric and variogram by deterministic quadrature, samples
//! the field exactly or spectrally, and runs regularity experiments on the
//! samples.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod covariance;
pub mod error;
pub mod exponent;
pub mod harness;
pub mod linalg;
pub mod psi;
pub mod quadrature;
pub mod quasi_metric;
pub mod sampler;

pub use config::ModelConfig;
pub use covariance::{FieldModel, FrequencyBand, QuadratureProfile};
pub use error::{FieldError, Result};
pub use exponent::{BlockKind, ExponentSpec, HVector, JordanBlock};
pub use psi::{CertificationReport, HomogeneousPsi};
pub use quasi_metric::PolarCoordinates;
pub use sampler::{Method, Realization};
