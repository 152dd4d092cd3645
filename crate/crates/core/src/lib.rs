//! Concurrent estimation of several ligand concentrations from the binding
//! statistics of a single receptor type.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod crn;
pub mod error;
pub mod estimators;
pub mod experiments;
pub mod kinetics;
pub mod kpr;
pub mod linalg;
pub mod quadrature;
pub mod rng;
pub mod theory;

pub use error::{Error, Result};

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/introduction.md")]
mod book_introduction {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/model.md")]
mod book_model {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/estimators.md")]
mod book_estimators {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/errors.md")]
mod book_errors {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/nu.md")]
mod book_nu {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/proofreading.md")]
mod book_proofreading {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/network.md")]
mod book_network {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/experiments.md")]
mod book_experiments {}
#[cfg(doctest)]
#[doc = include_str!("../../../README.md")]
mod readme {}
