//! Steady-state and transient optimal control of linear time-invariant
//! systems under constant disturbances.
//!
//! The crate models a plant ẋ = Ax + Bu + Cd whose desired operating point
//! is the minimizer of a quadratic steady-state program, synthesizes
//!
//! * the disturbance-aware controller u = -K(x - x̄) + ū, which is optimal
//!   for the diverging infinite-horizon cost in the overtaking sense, and
//! * a disturbance-independent near-optimal controller that embeds
//!   primal-dual gradient dynamics of the steady-state program,
//!
//! and evaluates both analytically (Θ-valued cost calculus, exact transient
//! performance gap) and numerically (fixed-step closed-loop simulation).

pub mod casestudy;
pub mod controllers;
pub mod error;
pub mod linalg;
pub mod perf;
pub mod plant;
pub mod sim;

pub use error::{Error, Result};
