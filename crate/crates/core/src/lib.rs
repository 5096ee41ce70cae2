//! Risk and regret minimization over finite scenario spaces.
//!
//! The crate is `no_std` (it needs `alloc`) and carries the numerical core:
//!
//! * [`probspace`] finite probability spaces, policies and the projections onto
//!   the nonanticipativity subspace and its orthogonal complement;
//! * [`measures`] a catalog of coherent risk and regret measures with closed
//!   forms, dual (envelope) evaluation and the regret-to-risk trade-off formula;
//! * [`qpsolve`] a dense dual active-set solver for the per-scenario
//!   quadratic programs, with a simplex path for linear ones;
//! * [`pha`] the progressive hedging algorithm;
//! * [`exfunl`] progressive hedging with expectation-functional constraints;
//! * [`problems`] two-stage model builders, seeded instance generators and the
//!   extensive-form oracle.
//!
//! File formats, logging and the command-line harness live in the `hedgekit`
//! crate.
#![no_std]

extern crate alloc;

pub mod exfunl;
pub mod linalg;
pub mod measures;
pub mod pha;
pub mod probspace;
pub mod problems;
pub mod qpsolve;

mod error;
mod simplex;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T, E = Error> = core::result::Result<T, E>;
