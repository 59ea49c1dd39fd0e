//! Numerical simulator and verification suite for stochastic neural field
//! equations
//!
//! ```text
//! dY(t,x) = (-Y(t,x) + ∫ w(x,y) G(Y(t,y)) dy) dt + σ(Y(t,x)) dW^φ(t,x)
//! ```
//!
//! on a periodic box standing in for R^N (N = 1, 2). Two noise
//! formulations are provided: spatially smoothed space-time white noise
//! (random-field mild solution) and a truncated Q-Wiener process composed with
//! the smoothing operator (Hilbert-space formulation).
//!
//! Modules:
//! - [`grid`]: mesh, quadrature, FFT convolution
//! - [`kernels`]: connectivity kernels, condition certifier, ρ_w eigenproblems
//! - [`noise`]: white, smoothed and Q-Wiener increments, covariance oracles
//! - [`dynamics`]: exponential Euler / Euler–Maruyama integrators, Picard oracle
//! - [`verify`]: Monte-Carlo estimators and analytic oracles
//! - [`io`]: binary field and matrix files with JSON sidecars

// `!(x > 0.0)` is used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod dynamics;
pub mod grid;
pub mod io;
pub mod kernels;
pub mod noise;
pub mod rng;
pub mod verify;

#[cfg(feature = "cli")]
pub mod acceptance;
#[cfg(feature = "cli")]
pub mod cli;
#[cfg(feature = "cli")]
pub mod config;

pub(crate) mod par;

pub use dynamics::{Diffusion, Ensemble, Gain, ModelSpec, PicardDiagnostics, Scheme, SolverConfig, Trajectory};
pub use grid::{convolve, integrate, Convolver, Field, Grid, GridSpec};
pub use kernels::{ConditionReport, EigenResult, KernelModel, KernelSpec};
pub use noise::{NoiseMode, NoiseSpec, PhiSpec};
pub use rng::RngStream;
