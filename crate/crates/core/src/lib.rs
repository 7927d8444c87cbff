//! Gradient-flow solver for the 1D kinetic granular-media equation with
//! quadratic interaction kernel.
//!
//! The kinetic equation
//!
//! ```text
//! ∂_t f + v ∂_x f = ∂_v( f (ρ_t(x) v − m_t(x)) )
//! ```
//!
//! admits the first integral `v + G_t(x)` along characteristics, where `G_t`
//! is the CDF of the spatial marginal `ρ_t`. Changing variables to the label
//! `a = v + G_0(x)` turns the phase-space problem into a family of continuity
//! equations on the line, one per label, coupled only through the common
//! marginal. That family is the gradient flow of a convex energy on a product
//! of Wasserstein spaces, which is what this crate discretizes and solves.
//!
//! Module map:
//!
//! - [`ot1d`]: exact 1D optimal transport between weighted discrete measures,
//!   plus a small LP oracle used to cross-check it.
//! - [`measures`]: the labeled product state (one measure per label), initial
//!   disintegration of a phase-space cloud, and the distances `d` and `d_w`.
//! - [`energy`]: the convex energy `J = J0/4 + J1`, the admissible velocity
//!   bracket, and the midpoint velocity selection.
//! - [`jko`]: the implicit Euler (JKO) minimizing scheme over the product
//!   space, with certified per-step optimality.
//! - [`dynamics`]: independent oracles: the label characteristics ODE, the
//!   second-order kinetic ODE, a Burgers-type system for the per-label CDFs,
//!   and the analytic shock-time bound.
//! - [`kinetic`]: phase-space reconstruction and moments.
//! - [`scenarios`]: built-in initial-data families.
//! - [`suites`]: the validation suites run by the CLI and the acceptance
//!   tests.

// `!(x > 0)`-style checks are deliberate: they reject NaN along with the
// out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dynamics;
pub mod energy;
mod error;
pub mod jko;
pub mod kinetic;
pub mod measures;
pub mod ot1d;
pub mod scenarios;
pub mod suites;
mod transport_lp;

pub use error::{Error, Result};
pub use ot1d::{Coupling, DiscreteMeasure};
pub use measures::{KineticCloud, LabelGrid, ProfileState};
pub use energy::{EnergyReport, VelocityField};
pub use jko::{JkoConfig, Trajectory};
