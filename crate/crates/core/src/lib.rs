//! Linear state estimation from PMU data when both the line parameters and
//! the measurements carry bounded uncertainty.
//!
//! Three estimators are provided: interval-arithmetic state bounds
//! ([`interval`]), the bounded-data-uncertainty regularized estimate
//! ([`bdu`]) and joint state/uncertainty estimation by generalized
//! linear-fractional programming ([`glfp`]). [`bench`] runs the full
//! perturb → power flow → measure → estimate → score protocol.

pub mod bdu;
pub mod bench;
pub mod caseio;
pub mod cli;
pub mod data;
pub mod error;
pub mod glfp;
pub mod interval;
pub mod linalg;
pub mod measmodel;
pub mod plot;
pub mod powerflow;

pub use error::{Error, Result};
