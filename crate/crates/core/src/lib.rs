//! Asymmetric Langevin unlearning workbench.
//!
//! The crate is organised around the life cycle of a certified unlearning
//! experiment on a strongly convex reference task:
//!
//! - [`model`]: clipped, L2-regularised logistic regression and the ball projection.
//! - [`pngd`]: projected noisy gradient descent and the learn / unlearn / retrain pipelines.
//! - [`bounds`]: closed-form and schedule-based divergence, noise and decision bounds.
//! - [`renyi`]: variational Rényi divergence estimation between weight samples.
//! - [`attack`]: the U-LiRA membership-inference evaluation.
//! - [`workbench`]: synthetic data, experiment configs, persistence and curve emitters.

// `!(x > 0.0)` style checks reject NaN along with out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod attack;
pub mod bounds;
pub mod error;
pub mod io;
pub mod model;
pub mod noise;
pub mod pngd;
pub mod renyi;
pub mod workbench;

mod ext;

pub use error::{Error, Result};
pub use ext::Flagged;
