//! Hyperspace dynamics of Morse-Smale systems.
//!
//! The library works with the induced maps `2^f` (on closed subsets) and `C(f)`
//! (on subcontinua) of a few concrete Morse-Smale systems: a parametric family
//! of circle diffeomorphisms, a north-south map of the Riemann sphere, and a
//! dendrite homeomorphism with legs that shrink toward two fixed endpoints.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod circle;
pub mod dendrite;
pub mod entropy;
pub mod error;
pub mod experiment;
pub mod hyperspace;
pub mod recurrence;
pub mod report;
pub mod reproduce;
pub mod shadowing;
pub mod sphere;
pub mod symbolic;

pub use error::{Error, Result};
