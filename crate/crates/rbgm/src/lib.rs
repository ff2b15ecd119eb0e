//! Riemannian Bregman gradient methods for relatively smooth optimization
//! over embedded matrix manifolds.
//!
//! Classical gradient methods assume a global Lipschitz gradient; many
//! matrix problems (nonlinear eigenvalue problems, quadratic sensing) only
//! satisfy the weaker *relative smoothness* inequality
//!
//! ```text
//! f(y) <= f(x) + <grad f(x), y - x> + L * D_h(y, x)
//! ```
//!
//! where `D_h` is the Bregman distance of a convex reference function `h`.
//! This crate implements Bregman gradient descent on embedded submanifolds
//! of Euclidean space in two flavors:
//!
//! * **retraction based**: the Bregman subproblem is solved over the tangent
//!   space and the step is pulled back with a retraction;
//! * **projection based**: the subproblem is solved in the ambient space
//!   (optionally with a normal correction) and the step is re-projected onto
//!   the manifold.
//!
//! Both come with Armijo-style backtracking line searches and stochastic
//! (minibatch, fixed stepsize) variants. Supported manifolds are the unit
//! sphere, the Stiefel manifold, and fixed-rank matrices; reference
//! functions are the quadratic, the quartic `||x||^4/4 + ||x||^2/2`, the log
//! barrier, and negative entropy, each with closed-form or
//! scalar-root-based subproblem solvers. The [`problems`] module provides
//! the two benchmark objectives (a nonlinear eigenvalue problem on the
//! Stiefel manifold and quadratic sensing on fixed-rank matrices) together
//! with a Riemannian steepest descent baseline in [`solvers`].

pub mod bregman;
pub mod error;
pub mod manifolds;
pub mod numerics;
pub mod problems;
pub mod solvers;
pub mod subproblem;

pub use error::{Error, Result};
pub use numerics::{AmbientTensor, Rng};
