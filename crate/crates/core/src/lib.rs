//! Symmetric margin losses for learning from mutually-contaminated labels.
//!
//! The crate covers the loss zoo ([`loss`]), exact corrupted-risk algebra on
//! discrete distributions ([`risk`]), calibration and consistency probes
//! ([`calibration`]), data handling ([`dataio`], [`corruption`]) and a small
//! MLP trainer for the BER and AUC objectives ([`model`], [`optim`],
//! [`trainer`]). [`experiment`] and [`verify`] back the `symloss` binary.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calibration;
pub mod corruption;
pub mod dataio;
pub mod error;
pub mod experiment;
pub mod loss;
pub mod model;
pub mod numeric;
pub mod optim;
pub mod risk;
pub mod rng;
pub mod trainer;
pub mod verify;

pub use error::{Error, Result};
pub use loss::{make_loss, Loss};
pub use risk::{DiscreteDist, NoiseSpec, Scorer};
