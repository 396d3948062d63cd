//! Monte Carlo engine for non-intersecting 3D random paths.
//!
//! The crate is organised bottom-up:
//!
//! * [`rng`]: counter-based streams keyed by `(master_seed, stream_id)`.
//! * [`walks`]: lattice and Gaussian walkers, first-hitting, and the
//!   exact-law checks (gambler's ruin, sphere hitting, cone survival).
//! * [`survival`]: the pair / tuple non-intersection experiment with the
//!   `k(n)` and `h(n)` exponent estimators.
//! * [`pathspace`]: pairs of curves grown shell by shell, truncation, and the
//!   separation event.
//! * [`splitting`]: multilevel splitting on path space, exponent and
//!   separation estimates, mixing diagnostics, cone exponents.
//!
//! Data-parallel loops go through [`exec`], which uses rayon when the
//! `parallel` feature is on and runs sequentially otherwise. Results never
//! depend on the mode or the thread count.

pub mod error;
pub mod exec;
pub mod lattice;
pub mod pathspace;
pub mod rng;
pub mod splitting;
pub mod stats;
pub mod survival;
pub mod walks;

pub use error::{Error, Result};
pub use rng::{derive_stream, RandomStream, SeedSpec, StreamId};
