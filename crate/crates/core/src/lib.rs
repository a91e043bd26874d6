//! Well-posedness analysis for 2x2 fourth-order dispersive systems on the
//! circle: integral conditions, diagonalizing and gauge transforms built from
//! a periodic symbol calculus, and Fourier–Galerkin propagator experiments.

pub mod periodic;
pub mod symbols;
pub mod wellposed;
pub mod transforms;
pub mod evolve;
pub mod frame;
