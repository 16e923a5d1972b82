//! Classical and group-equivariant spectral flow for paths of model
//! self-adjoint Fredholm operators, with Morse-theoretic cross checks,
//! cogredient parametrices and equivariant Maslov indices.

pub mod grouprep;
pub mod linalg;
pub mod operators;
pub mod sampling;
pub mod sflcore;
pub mod cogredient;
pub mod maslov;
pub mod cli;
