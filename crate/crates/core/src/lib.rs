//! Central limit theorems for stationary observables of finite Markov shifts.
//!
//! A shift is built from a stochastic matrix ([`markov`]), observables are
//! finite-window cylinder functions ([`cylinder`]) on which the Koopman,
//! transfer and conditional-expectation operators act exactly. On top of
//! that sit the backward-martingale decomposition ([`gordin`]), the
//! forward-filtration approximant ([`forward`]) and a Monte-Carlo check of
//! the resulting normal limit ([`clt`]).

pub mod clt;
pub mod conditions;
pub mod cylinder;
pub mod error;
pub mod forward;
pub mod gordin;
pub mod markov;
pub mod moments;

pub use conditions::{ConditionEntry, ConditionReport, Evidence, Verdict};
pub use cylinder::{CombineOp, CylinderFunction};
pub use error::{Error, Result};
pub use markov::{build_shift, sample_orbit, ErgodicClass, OrbitSample, Sidedness, TransitionModel};
