//! Cross-entropy design search with an online-trained reward model.
//!
//! The crate is `no_std` + `alloc` at its core. It contains the search
//! machinery ([`cem`], [`schedule`], [`reward_model`], [`campaign`]), the
//! three-finger tendon-hand design space ([`design_space`]), the reward
//! definition ([`objective`]), a deterministic planar grasp surrogate
//! ([`sim`]), synthetic benchmarks ([`bench`]) and the offline teleoperation
//! retargeting math ([`retarget`]).
//!
//! File formats, configuration loading and the command line live in the
//! `cemrm` companion crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod bench;
pub mod campaign;
pub mod cem;
pub mod design_space;
mod error;
pub mod math;
pub mod objective;
pub mod retarget;
pub mod reward_model;
pub mod schedule;
pub mod seed;
pub mod sim;

pub use error::{Error, Result};
