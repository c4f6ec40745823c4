//! Double-Lambda atomic-ensemble quantum memory simulator.
//!
//! Two engines share the physical parameters in [`ensemble::CouplingParams`]:
//!
//! * a truncated five-mode Fock-space engine ([`fock`], [`ensemble`],
//!   [`dynamics`], [`analysis`]) for quantized storage, release and
//!   entanglement generation;
//! * a one-dimensional c-number envelope solver ([`propagation`]) for pulse
//!   transport, pulse matching and bandwidth studies.
//!
//! Everything numeric is generic over [`Real`] (`f32` or `f64`); the aliases
//! at the crate root fix the scalar to `f64`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod dynamics;
pub mod ensemble;
pub mod error;
pub mod fock;
pub mod linalg;
pub mod propagation;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::{Cx, Real};

pub type Operator = fock::SparseOperator<f64>;
pub type State = fock::StateVector<f64>;
pub type Params = ensemble::CouplingParams<f64>;
pub type Angles = ensemble::MixingAngles<f64>;
pub type Polaritons = ensemble::PolaritonSet<f64>;
pub type Schedule = dynamics::ControlSchedule<f64>;
pub type Grid = propagation::FieldGrid<f64>;
pub type ContinuumParams = propagation::ContinuumParams<f64>;
