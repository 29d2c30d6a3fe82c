//! Numerical toolkit for geometric sub-Laplacians on two-dimensional
//! Carnot-Caratheodory charts.
//!
//! The crate is organised around the pipeline
//!
//! * [`geometry`]: generating vector fields, volume density, pointwise
//!   horizontal gradient / divergence / sub-Laplacian;
//! * [`discretization`]: grids, boundary conditions and the variational
//!   assembly of the stiffness form `q(u) = ∫ |∇_H u|² ω` and the mass form;
//! * [`eigensolver`]: smallest eigenpairs of `A u = λ M u`;
//! * [`nodal`]: nodal-domain counting and Courant checks;
//! * [`cheeger`]: horizontal perimeters, cut searches (upper bounds on
//!   Cheeger constants), flow certificates (lower bounds) and the Cheeger
//!   inequalities;
//! * [`grushin`]: the separated 1D problem on the Grushin cylinder, solved by
//!   shooting;
//! * [`carnot`]: Heisenberg group algebra and homogeneous constants.

pub mod carnot;
pub mod cheeger;
pub mod discretization;
pub mod eigensolver;
mod error;
pub mod geometry;
pub mod grushin;
pub mod nodal;
pub mod ode;
pub mod sparse;

pub use error::{Error, Result};
