//! Statistical evidence toolkit for redundant perception systems.
//!
//! The crate answers three related questions:
//!
//! * how many failure-free test frames are needed to show that a failure
//!   probability lies below a tolerated level ([`planner`]);
//! * how redundancy and error correlation between subsystems change that
//!   number ([`redundancy`], [`correlation`], [`kofn`]);
//! * how correlated the errors of real classifier ensembles are, and how far
//!   a decorrelation penalty during training can push them apart
//!   ([`indicator`], [`softmax`], [`trainer`], [`simulator`]).
//!
//! Everything here is `no_std` with `alloc`. File formats, the command line
//! front end and thread-parallel drivers live in the companion CLI crate.

#![cfg_attr(not(test), no_std)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod correlation;
pub mod error;
pub mod indicator;
pub mod kofn;
pub mod planner;
pub mod redundancy;
pub mod rng;
pub mod simulator;
pub mod softmax;
pub mod special;
pub mod trainer;

pub use error::{Error, Result};
