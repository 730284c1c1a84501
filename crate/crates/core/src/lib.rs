//! Numerical toolkit for extensions with shrinking fibers.
//!
//! A system `T: X -> X` over a factor `S: Y -> Y` with projection `π` and a
//! section `σ` is described by [`FiberedSystem`]. On top of that the crate
//! provides:
//!
//! * discrete measures, push-forward and binned disintegration ([`measures`]),
//! * exact and entropic optimal transport plus the fiber-constrained
//!   ("vertical") Wasserstein distance ([`transport`]),
//! * iterative lifting of base invariant measures ([`lifting`]),
//! * Ulam discretizations of the base transfer operator ([`transfer`]),
//! * coboundary projection of potentials ([`thermo`]),
//! * correlation, Green-Kubo and CLT diagnostics ([`stats`]),
//! * attractor rasters in annulus coordinates ([`render`]).
//!
//! The crate is `no_std` (with `alloc`). Enable `parallel` to spread sampling
//! and per-fiber transport over a rayon pool; results are bitwise identical
//! either way.

#![cfg_attr(not(any(test, feature = "std")), no_std)]
#![deny(unsafe_code)]
// `!(x > 0.0)` is how NaN gets rejected along with the nonpositive values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

mod error;
mod math;
mod par;

pub mod decay;
pub mod geometry;
pub mod lifting;
pub mod measures;
pub mod modulus;
pub mod orbit;
pub mod render;
pub mod rng;
pub mod stats;
pub mod systems;
pub mod thermo;
pub mod transfer;
pub mod transport;

pub use decay::{fit_decay, DecayFit, DecayModel};
pub use error::{Error, Result};
pub use geometry::{BaseMetric, FiberDomain, Metric, Point, MAX_FIBER_DIM};
pub use measures::{EmpiricalMeasure, GridMeasure, Space};
pub use modulus::{ModulusClass, ModulusKind};
pub use systems::FiberedSystem;
