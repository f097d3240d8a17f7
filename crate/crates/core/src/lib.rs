//! Stackelberg energy trading between a central power station and a set of
//! energy consumers.
//!
//! The consumers play a jointly convex game over how much stored energy to
//! sell ([`gnep`]); the station sets discriminate unit prices that minimise its
//! purchase cost ([`pricing`]); [`engine`] alternates the two as a
//! message-passing protocol until the price vector is a fixed point, and
//! [`experiments`] runs the seeded Monte Carlo studies.

// `!(x > 0.0)` is used deliberately so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod checks;
pub mod engine;
pub mod error;
pub mod experiments;
pub mod gnep;
pub mod model;
pub mod pricing;

pub use error::{GridError, Result};
