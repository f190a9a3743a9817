//! Robust stability certificates for neural-network-controlled nonlinear plants
//! under bounded parametric variation.
//!
//! The pipeline is:
//!
//! 1. [`model`]: the plant `ẋ = f(x, u, θ)`, its Jacobians and interval extensions,
//!    the parameter box and the safe polytope.
//! 2. [`sector`]: elementwise Jacobian bounds of the nonlinearity-plus-parameter-variation
//!    term around a linear gain, and the polytopic hull of the linearization.
//! 3. [`certificate`]: quadratic-constraint blocks, the stability LMI and certificate checks.
//! 4. [`conic`]: the small interior-point SDP layer used to search those LMIs.
//! 5. [`synthesis`]: the alternating search for a nominal gain, a Lipschitz budget and
//!    an ellipsoidal robust safe initialization set.
//! 6. [`policy`]: MLP actor/critic with Lipschitz projection and the actor-critic trainer.
//! 7. [`sim`]: zero-order-hold RK4 rollouts, utilities, LQR baseline and Monte-Carlo runs.
//!
//! [`io`] holds the plain-text/CSV artifact formats shared with the command-line tool.

pub mod certificate;
pub mod conic;
pub mod error;
pub mod interval;
pub mod io;
pub mod linalg;
pub mod model;
pub mod policy;
pub mod sector;
pub mod sim;
pub mod synthesis;

pub use error::{Error, Result};
