//! Core numerics for extracting neural-ODE reduced-order models from
//! transient simulation data.
//!
//! The crate is `no_std` (with `alloc`) so the model evaluation path can be
//! embedded; all IO, file formats and the pipeline CLI live in the companion
//! `twinforge` crate.

#![no_std]

extern crate alloc;

pub mod doe;
pub mod error;
pub mod fom;
pub mod metrics;
pub mod rom;
pub mod signals;
pub mod stats;

pub use error::CoreError;
pub use fom::{DataSet, FomConfig};
pub use rom::{RomModel, TrainConfig, Trajectory};
pub use signals::{AprbsConfig, ExcitationSignal, MultisineConfig, SignalKind, TimeGrid};
