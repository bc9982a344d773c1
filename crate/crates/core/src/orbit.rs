//! Orbit segments `x, Tx, …, T^H x` and the return sets they induce.

use std::io::{self, Write};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linop::{block_vector_norm, LinearOperator};
use crate::natset::FiniteNatSet;

pub const DEFAULT_OVERFLOW_CAP: f64 = 1e12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OrbitError {
    #[error("vector has dimension {got}, operator has dimension {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("horizon must be at least 1")]
    ZeroHorizon,
    #[error("radius must be positive and finite, got {0}")]
    InvalidRadius(f64),
}

/// Iterates of one vector, stored contiguously.
#[derive(Debug, Clone)]
pub struct OrbitSegment {
    dim: usize,
    blocks: Vec<usize>,
    points: Vec<Complex64>,
    norms: Vec<f64>,
    horizon_requested: u64,
    horizon_effective: u64,
    overflow: bool,
}

impl OrbitSegment {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn blocks(&self) -> &[usize] {
        &self.blocks
    }

    pub fn base(&self) -> &[Complex64] {
        self.point(0)
    }

    /// `Tⁿx` for `n <= horizon_effective`.
    pub fn point(&self, n: u64) -> &[Complex64] {
        let n = n as usize;
        &self.points[n * self.dim..(n + 1) * self.dim]
    }

    pub fn norms(&self) -> &[f64] {
        &self.norms
    }

    pub fn horizon_requested(&self) -> u64 {
        self.horizon_requested
    }

    pub fn horizon_effective(&self) -> u64 {
        self.horizon_effective
    }

    pub fn overflow(&self) -> bool {
        self.overflow
    }

    /// Distance in the operator's metric.
    pub fn distance(&self, a: &[Complex64], b: &[Complex64]) -> f64 {
        let diff: Vec<Complex64> = a.iter().zip(b).map(|(p, q)| p - q).collect();
        block_vector_norm(&diff, &self.blocks)
    }

    /// One row per iterate: `n, re_0, im_0, …, norm`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        write!(w, "n")?;
        for k in 0..self.dim {
            write!(w, ",re_{k},im_{k}")?;
        }
        writeln!(w, ",norm")?;
        for n in 0..=self.horizon_effective {
            write!(w, "{n}")?;
            for z in self.point(n) {
                write!(w, ",{},{}", z.re, z.im)?;
            }
            writeln!(w, ",{}", self.norms[n as usize])?;
        }
        Ok(())
    }
}

pub fn iterate(t: &LinearOperator, x: &[Complex64], horizon: u64) -> Result<OrbitSegment, OrbitError> {
    iterate_with_cap(t, x, horizon, DEFAULT_OVERFLOW_CAP)
}

/// Iterates until `horizon` or until a norm exceeds `overflow_cap`; the
/// offending iterate is not stored.
pub fn iterate_with_cap(
    t: &LinearOperator,
    x: &[Complex64],
    horizon: u64,
    overflow_cap: f64,
) -> Result<OrbitSegment, OrbitError> {
    let d = t.dim();
    if x.len() != d {
        return Err(OrbitError::DimensionMismatch { expected: d, got: x.len() });
    }
    if horizon == 0 {
        return Err(OrbitError::ZeroHorizon);
    }
    let mut points = Vec::with_capacity((horizon as usize + 1) * d);
    points.extend_from_slice(x);
    let mut norms = Vec::with_capacity(horizon as usize + 1);
    norms.push(t.norm(x));
    let mut next = vec![Complex64::new(0.0, 0.0); d];
    let mut overflow = false;
    let mut effective = 0;
    for n in 1..=horizon {
        let start = (n as usize - 1) * d;
        t.apply(&points[start..start + d], &mut next);
        let nrm = t.norm(&next);
        if !(nrm <= overflow_cap) {
            overflow = true;
            break;
        }
        points.extend_from_slice(&next);
        norms.push(nrm);
        effective = n;
    }
    Ok(OrbitSegment {
        dim: d,
        blocks: t.blocks().to_vec(),
        points,
        norms,
        horizon_requested: horizon,
        horizon_effective: effective,
        overflow,
    })
}

/// `{n <= H_eff : ‖Tⁿx − x‖ < ε}`. Always contains 0.
pub fn return_set(orbit: &OrbitSegment, epsilon: f64) -> Result<FiniteNatSet, OrbitError> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(OrbitError::InvalidRadius(epsilon));
    }
    let base = orbit.base();
    let h = orbit.horizon_effective;
    let elements = (0..=h).filter(|&n| orbit.distance(orbit.point(n), base) < epsilon).collect();
    Ok(FiniteNatSet::new(h, elements).expect("indices are increasing and within the horizon"))
}

/// `{n <= H_eff : ‖Tⁿx − c‖ < r}` for an arbitrary center.
pub fn visits(orbit: &OrbitSegment, center: &[Complex64], radius: f64) -> Result<FiniteNatSet, OrbitError> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(OrbitError::InvalidRadius(radius));
    }
    if center.len() != orbit.dim {
        return Err(OrbitError::DimensionMismatch { expected: orbit.dim, got: center.len() });
    }
    let h = orbit.horizon_effective;
    let elements = (0..=h).filter(|&n| orbit.distance(orbit.point(n), center) < radius).collect();
    Ok(FiniteNatSet::new(h, elements).expect("indices are increasing and within the horizon"))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Boundedness {
    pub bounded_at_horizon: bool,
    pub sup_norm: f64,
    /// Norms increase strictly over the last half of the segment.
    pub growth_detected: bool,
    pub horizon: u64,
}

pub fn boundedness(orbit: &OrbitSegment, bound: Option<f64>) -> Boundedness {
    let sup_norm = orbit.norms.iter().cloned().fold(0.0, f64::max);
    let bounded_at_horizon = !orbit.overflow && bound.is_none_or(|m| sup_norm <= m);
    let h = orbit.horizon_effective as usize;
    let growth_detected = h >= 2 && orbit.norms[h / 2..=h].windows(2).all(|w| w[1] > w[0]);
    Boundedness { bounded_at_horizon, sup_norm, growth_detected, horizon: orbit.horizon_effective }
}
