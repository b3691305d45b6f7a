//! Core algorithms for grading the correctness of recorded human movements.
//!
//! The pipeline implemented here takes segmented skeleton recordings (per-joint
//! YXZ Euler angles plus local joint offsets, one frame per line), reconstructs
//! absolute 3D joint trajectories through forward kinematics, turns each
//! recording into a fixed-shape feature tensor, and trains a residual temporal
//! convolutional network to decide whether an execution was correct or not.
//! Cross-subject evaluation (leave-one-subject-out with a validation split for
//! model selection) lives in [`protocol`].
//!
//! Everything in this crate is pure computation over `alloc`: no file IO, no
//! threads, no global state. The companion `motion-grader` crate supplies
//! directory scanning, report files, and the command line. The crate builds
//! without `std` when the `libm` feature provides the float math backend.

#![cfg_attr(not(feature = "std"), no_std)]
#![deny(unsafe_code)]

extern crate alloc;

#[cfg(all(not(feature = "std"), not(feature = "libm")))]
compile_error!("motion-grader-core needs a float math backend: enable `std` or `libm`");

pub mod dataset;
pub mod features;
pub mod kinematics;
mod math;
pub mod nn;
pub mod protocol;

/// Deterministic RNG used everywhere a seed is consumed (weight init, epoch
/// shuffling, dropout). ChaCha streams are portable across platforms.
pub type SeedRng = rand_chacha::ChaCha8Rng;
