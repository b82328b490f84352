//! Speed and horofunction diagnostics for random walks in negative curvature.
//!
//! The crate estimates the linear drift (escape speed) of several families of
//! random walks and cross-checks each estimate through an independent
//! horofunction route:
//!
//! - [`tiling`]: nearest-neighbor walks on `{P, Q}` hyperbolic tilings driven
//!   by the edge-midpoint symmetries, with speed lower bounds and a
//!   dimension bound for the harmonic measure;
//! - [`percolation`]: the same walks restricted to lazily sampled Bernoulli
//!   bond percolation clusters;
//! - [`tree`]: conductance-weighted trees, the electrical speed formula
//!   `E[AC / (AB + AC + BC)]` with certified truncation bounds, and the
//!   weighted canopy tree (transient but zero speed);
//! - [`lyapunov`]: top Lyapunov exponents of i.i.d. SL(2, R) products and
//!   Furstenberg's integral formula over the stationary direction measure;
//! - [`hyperbolic`]: the overflow-safe half-plane geometry underneath;
//! - [`drift`]: batch-means estimators and stationarity/escape diagnostics.
//!
//! Every Monte Carlo entry point takes an explicit seed and produces
//! bit-reproducible results independent of the worker count. The `examples/`
//! directory contains one runnable driver per capability; the `horodrift`
//! binary exposes the same runs as subcommands writing JSON + CSV reports
//! (see [`runner`]).

pub mod drift;
pub mod error;
pub mod hyperbolic;
pub mod lyapunov;
pub mod percolation;
pub mod rng;
pub mod runner;
pub mod tiling;
pub mod tree;

pub use error::{Error, Result};
