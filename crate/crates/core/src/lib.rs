//! Boundary integral solver for a transmission problem coupling a
//! Darcy-Forchheimer-Brinkman flow inside a closed surface with a Stokes flow
//! outside it.

pub mod dense;
pub mod geometry;
pub mod kernels;
pub mod nonlinear;
pub mod potentials;
pub mod quadrature;
pub mod transmission;
pub mod verify;
