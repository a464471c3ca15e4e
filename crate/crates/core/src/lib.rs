//! Quantum state interferography.
//!
//! A single two-path interferogram carries three numbers: the fringe phase
//! shift, the fringe visibility and the phase-averaged intensity. For a qubit
//! these three numbers pin down the full (possibly mixed) density matrix. For
//! a pure qudit of dimension `d`, one interferogram per neighbouring pair of
//! levels (`d - 1` in total) is enough.
//!
//! The crate is split along the measurement chain:
//!
//! - [`quantum`]: state parameterisations, operators and metrics.
//! - [`optics`]: waveplate preparation, the interferometer intensity law and
//!   synthetic interferogram images with shot noise.
//! - [`fit`]: per-slice Gaussian-envelope fringe fitting and aggregation into
//!   a [`fit::FringeEstimate`].
//! - [`reconstruct`]: inversion of fringe observables into states.
//! - [`bench`]: three-setting tomography baseline and resource comparison.
//! - [`sweep`]: the waveplate-grid experiment end to end.
//! - [`io`]: PGM/CSV/JSON file formats.

// `!(x > 0.0)` is used on purpose so NaN takes the rejecting branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod angle;
pub mod bench;
pub mod fit;
pub mod io;
pub mod optics;
pub mod pipeline;
pub mod quantum;
pub mod reconstruct;
pub mod svg;
pub mod sweep;

pub use num_complex::Complex64;
