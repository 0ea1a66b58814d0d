//! Workbench for replacing parts of a numerical simulation with neural surrogates.
//!
//! Two strategies are covered:
//!
//! * **Kernel replacement.** A 1D periodic viscous Burgers solver produces fine-grid
//!   reference runs ([`burgers`]); these are box-filtered into coarse fields and
//!   subgrid-stress labels ([`coarse`]), turned into a training set ([`data`]), and
//!   used to fit a small dense network ([`neural`]) that is plugged back into the
//!   coarse solver as a closure ([`closures`]). [`validation`] implements the
//!   a priori (offline) and a posteriori (coupled) checks.
//! * **Full replacement.** An exact two-body-decay Monte Carlo generator is imitated
//!   by a variational autoencoder that samples from a buffer of encoded latents
//!   ([`eventgen`]).
//!
//! Numerical kernels are generic over the scalar type through [`Real`]; the
//! aliases below fix the common `f64` / `f32` instantiations.

pub mod burgers;
pub mod closures;
pub mod coarse;
pub mod data;
pub mod error;
pub mod eventgen;
pub mod neural;
pub mod rng;
pub mod scalar;
pub mod stats;
pub mod validation;

pub use error::{Error, Result};
pub use scalar::Real;

pub type FlowField64 = burgers::FlowField<f64>;
pub type FlowField32 = burgers::FlowField<f32>;
pub type Trajectory64 = burgers::Trajectory<f64>;
pub type CoarsePair64 = coarse::CoarsePair<f64>;
pub type Mlp64 = neural::Mlp<f64>;
pub type Mlp32 = neural::Mlp<f32>;
pub type AdamState64 = neural::AdamState<f64>;
pub type Vae64 = neural::Vae<f64>;
pub type InferWorkspace64 = closures::InferWorkspace<f64>;
