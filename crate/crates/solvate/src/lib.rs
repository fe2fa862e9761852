//! Numerical laboratory for a phase-field model of molecular solvation.
//!
//! The free energy of a phase field `phi` (≈1 in the solute, ≈0 in the
//! solvent) is
//!
//! ```text
//! F_xi[phi] = P0 ∫ phi^2
//!           + gamma0 ∫ [ xi/2 |∇phi|^2 + W(phi)/xi ]
//!           + rho0 ∫ (phi-1)^2 U
//!           + F_ele[phi]
//! ```
//!
//! with `W(phi) = 18 phi^2 (1-phi)^2`, `U` a Lennard-Jones solute-solvent
//! potential, and `F_ele` the Poisson-Boltzmann electrostatic free energy
//! in which the dielectric coefficient follows the phase field. As the
//! interface width `xi` shrinks, `F_xi` approaches a sharp-interface
//! functional `F_0` (volume + surface area + van der Waals integral +
//! dielectric-boundary electrostatics).
//!
//! The crate provides the pieces needed to compute both sides of that
//! limit on structured grids and to measure the convergence claims that
//! connect them: component-wise energy convergence, asymptotic
//! equi-partition of the surface energy, weak convergence of stress
//! tensors to sharp boundary forces, the dielectric-boundary force
//! identity, and the classical counterexample in which an ill-chosen
//! profile family inflates the surface limit by a factor
//! `beta = (1+a)/(2 sqrt(a))`.
//!
//! Module map:
//! - [`model`]: physical parameters and pointwise constitutive functions
//! - [`grid`]: structured grids, fields, difference operators, quadrature,
//!   analytic interface shapes
//! - [`profiles`]: 1D interface profiles and their lifts to fields
//! - [`pb`]: nonlinear Poisson-Boltzmann solver (diffuse and sharp)
//! - [`energy`]: free-energy assembly and equi-partition diagnostics
//! - [`forces`]: first variation, stress tensors, weak pairings, sharp
//!   boundary forces
//! - [`relax`]: gradient-flow relaxation and xi-continuation
//! - [`converge`]: theorem-verification sweep studies
//! - [`report`]: tabulation and CSV export of study reports
//! - [`config`]: experiment configuration parsing and validation

pub mod config;
pub mod converge;
pub mod energy;
pub mod error;
pub mod forces;
pub mod grid;
pub mod model;
pub mod pb;
pub mod profiles;
pub mod relax;
pub mod report;

pub use error::SolvateError;

/// Largest admissible interface width. Profile and schedule constructors
/// reject `xi` outside `(0, XI_MAX]`.
pub const XI_MAX: f64 = 0.9;

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, SolvateError>;
