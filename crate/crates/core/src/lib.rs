//! Embodied universal approximation toolkit.
//!
//! Quantifies how an agent's fixed embodiment (its sensor kernel and world
//! dynamics) reduces the number of policy degrees of freedom that matter for
//! behavior, and how that reduction translates into the number of hidden
//! units a conditional restricted Boltzmann machine policy needs.
//!
//! Module map:
//! - [`kernels`]: Markov kernels, the one-step loop mechanism, simulation.
//! - [`behavior_dim`]: embodied behavior dimension, support sets, the
//!   internal world model and its affine rank.
//! - [`policy_models`]: exponential-family and sparse (face) policy models.
//! - [`crbm`]: CRBM inference, sampling, training, construction, bounds.
//! - [`worlds`]: built-in loop instances.
//! - [`pipeline`]: end-to-end experiment driver.

pub mod behavior_dim;
pub mod crbm;
pub mod error;
pub mod kernels;
pub mod linalg;
pub mod pipeline;
pub mod policy_models;
pub mod rng;
pub mod worlds;

pub use error::{Error, Result};
