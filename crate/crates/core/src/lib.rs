//! Numerical laboratory for finite-time blow-up of weakly coupled
//! Ginzburg-Landau and heat systems.
//!
//! * [`ode`] closed forms, adaptive integration, conserved identities and
//!   explicit lower bounds for the coupled ODE systems;
//! * [`testfn`] the radial weight `phi = psi^2` built from the first Dirichlet eigenfunction of the unit ball;
//! * [`torus`] pseudospectral simulation on the periodic box and its functional inequalities;
//! * [`euclid`] finite-difference simulation of the heat-type system on a truncated box;
//! * [`fit`] blow-up time and rate extraction.

pub mod error;
pub mod euclid;
pub mod fit;
pub mod io;
pub mod ode;
pub mod quad;
pub mod system;
pub mod testfn;
pub mod torus;

pub use error::{Error, Result};
