//! Swap-based balancing of competitive two-player tile levels.
//!
//! The crate is `no_std` (it needs `alloc`) and contains every algorithmic
//! piece of the pipeline:
//!
//! * [`level`]: tile vocabulary, grid container, connectivity and text format.
//! * [`sim`]: deterministic two-player forage-survival match engine.
//! * [`balance`]: balancing state of a level, swap reward, simulation-count calibration.
//! * [`generate`]: playable level generator and the generator MDP.
//! * [`env`]: swap-narrow / swap-turtle / swap-wide balancing environments.
//! * [`nn`] and [`ppo`]: policy/value network and a clipped-surrogate trainer.
//! * [`eval`]: evaluation metrics, histograms and tile-impact analysis.
//!
//! IO, file formats and the command line live in the `swapbal` crate.

#![no_std]

extern crate alloc;

pub mod balance;
pub mod env;
pub mod error;
pub mod eval;
pub mod generate;
pub mod level;
pub mod nn;
pub mod ppo;
pub mod rng;
pub mod sim;

pub use error::{Error, Result};
pub use level::{Level, Position, TileKind};
