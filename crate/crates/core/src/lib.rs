//! Recurrence notions for finite-dimensional linear dynamical systems.
//!
//! * [`natset`]: finite-horizon integer sets, densities, Furstenberg-family probes.
//! * [`linop`]: operator zoo, unimodular spectrum, reversible/flight splitting.
//! * [`orbit`]: orbit segments, return sets to balls, boundedness.
//! * [`empmeasure`]: window empirical measures, invariance defects, covariance.
//! * [`classify`]: recurrence reports and the structural checks built on them.

pub mod natset;
pub mod linop;
pub mod orbit;
pub mod empmeasure;
pub mod classify;

pub use num_complex::Complex64;
