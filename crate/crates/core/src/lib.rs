//! Numerical laboratory for the spatially homogeneous Landau equation with
//! soft and Coulomb potentials: velocity grids, entropy functionals, the
//! conservative pairwise collision operator, functional-inequality checks
//! and long-time asymptotics.

pub mod asymptotics;
pub mod collision;
pub mod dist;
pub mod error;
mod fft3;
pub mod functionals;
pub mod grid;
pub mod inequalities;
pub mod io;
pub mod kernel;
pub mod solver;
pub mod sum;

pub use collision::CollisionOperator;
pub use dist::{Corpus, GridDistribution};
pub use error::{LabError, Result};
pub use grid::VelocityGrid;
