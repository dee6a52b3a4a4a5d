//! Physics-informed digital twin of a binary distillation column.
//!
//! The crate is `no_std` (with `alloc`) and holds all numerical code: the
//! VLE model, the dynamic tray simulator, the dataset pipeline, the network
//! with its hand-written backward pass, the composite physics loss, the
//! training loop and the evaluation routines. File formats and the command
//! line live in the `distill-twin` crate.

#![no_std]

extern crate alloc;

pub mod column;
pub mod scalar;
pub mod thermo;
pub mod dataset;
pub mod linalg;
pub mod network;
pub mod physics;
pub mod training;
pub mod evaluation;
pub mod rng;
pub mod sensors;
