//! Integration and i.i.d. sampling on real algebraic manifolds by intersecting
//! them with random Gaussian linear spaces.

pub mod expressions;
pub mod solvers;
pub mod slicing;
pub mod estimators;
pub mod manifold_file;
pub mod diagnostics;
