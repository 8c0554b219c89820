//! Numerical laboratory for stationary discrete shock profiles of the
//! Lax-Wendroff scheme: profiles, linearized operators, spectral stability,
//! Green's functions and their asymptotic descriptions.

pub mod asymptotics;
pub mod experiments;
pub mod greens;
pub mod model;
pub mod profiles;
pub mod quadrature;
pub mod scheme;
pub mod spectral;
