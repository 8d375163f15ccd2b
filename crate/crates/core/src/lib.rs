//! Truncated moment toolkit for Dirac, Gaussian and log-normal mixtures.
//!
//! Forward moment maps in closed form, Carathéodory reduction, Jacobian rank
//! estimates of the minimal component count, moment-cone geometry for
//! univariate systems, and recovery engines that produce mixtures with few
//! components from a given moment vector.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod basis;
pub mod conegeo;
pub mod error;
pub mod harness;
pub mod jacobian;
mod linalg;
pub mod measures;
pub mod moments;
pub mod recover;
pub mod reduce;
pub mod seed;

pub use basis::MonomialBasis;
pub use conegeo::{ConeClassification, ConeStatus};
pub use error::{Error, Result};
pub use measures::{AtomicMeasure, Component, MixtureKind, MixtureMeasure};
pub use moments::{MomentVector, Provenance, SmoothedBasis};
pub use recover::{Engine, RecoveryConfig, RecoveryReport};
