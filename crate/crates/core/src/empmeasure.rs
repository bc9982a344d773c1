//! Finitely supported probability measures on `ℂ^d` built from orbit
//! windows, and the quantities used to test their invariance.
//!
//! The invariant measure of a reiteratively recurrent vector is approximated
//! by the uniform measure on a single long orbit window `[m, m + N]`. Pushing
//! it through `T` shifts the window by one, so only the two endpoint atoms
//! can change the mass of any set. Masses are summed exactly so that the
//! bound `2/(N + 1)` holds without rounding slack.

use nalgebra::linalg::SymmetricEigen;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linop::{block_vector_norm, euclidean_norm, orthonormal_span, principal_angle, unit_from_turns, CMatrix, LinearOperator};
use crate::natset::{upper_banach_density, BanachWindow, FiniteNatSet, NatSetError};
use crate::orbit::OrbitSegment;

pub const MERGE_TOLERANCE: f64 = 1e-12;
pub const DEFAULT_PRODUCT_CAP: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MeasureError {
    #[error("measure needs at least one atom")]
    NoAtoms,
    #[error("{atoms} atoms but {weights} weights")]
    LengthMismatch { atoms: usize, weights: usize },
    #[error("atom {index} has dimension {got}, expected {expected}")]
    AtomDimension { index: usize, expected: usize, got: usize },
    #[error("weights must be finite and nonnegative")]
    NegativeWeight,
    #[error("weights sum to {0}, not 1")]
    NotNormalized(f64),
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("window [{start}, {end}] exceeds the orbit horizon {horizon}")]
    WindowOutOfRange { start: u64, end: u64, horizon: u64 },
    #[error("product would have {atoms} atoms, cap is {cap}")]
    ProductTooLarge { atoms: usize, cap: usize },
    #[error("mixture weights must be nonnegative and not all zero")]
    BadMixtureWeights,
    #[error(transparent)]
    NatSet(#[from] NatSetError),
}

/// Exactly rounded floating-point sum (Shewchuk partials with the final
/// half-way correction).
pub fn exact_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut partials: Vec<f64> = Vec::new();
    for mut x in values {
        let mut i = 0;
        for j in 0..partials.len() {
            let mut y = partials[j];
            if x.abs() < y.abs() {
                std::mem::swap(&mut x, &mut y);
            }
            let hi = x + y;
            let lo = y - (hi - x);
            if lo != 0.0 {
                partials[i] = lo;
                i += 1;
            }
            x = hi;
        }
        partials.truncate(i);
        partials.push(x);
    }
    let mut n = partials.len();
    if n == 0 {
        return 0.0;
    }
    n -= 1;
    let mut hi = partials[n];
    let mut lo = 0.0;
    while n > 0 {
        let x = hi;
        let y = partials[n - 1];
        n -= 1;
        hi = x + y;
        let yr = hi - x;
        lo = y - yr;
        if lo != 0.0 {
            break;
        }
    }
    if n > 0 && ((lo < 0.0 && partials[n - 1] < 0.0) || (lo > 0.0 && partials[n - 1] > 0.0)) {
        let y = lo * 2.0;
        let x = hi + y;
        if y == x - hi {
            hi = x;
        }
    }
    hi
}

/// Open ball `{z : ‖z − center‖ < radius}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: Vec<Complex64>,
    pub radius: f64,
}

/// Atoms and weights; weights are nonnegative and sum to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MeasureRepr", into = "MeasureRepr")]
pub struct EmpiricalMeasure {
    dim: usize,
    blocks: Vec<usize>,
    atoms: Vec<Complex64>,
    weights: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct MeasureRepr {
    dim: usize,
    atoms: Vec<Vec<Complex64>>,
    weights: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    blocks: Option<Vec<usize>>,
}

impl TryFrom<MeasureRepr> for EmpiricalMeasure {
    type Error = MeasureError;

    fn try_from(r: MeasureRepr) -> Result<Self, Self::Error> {
        let m = EmpiricalMeasure::new(r.dim, r.atoms, r.weights)?;
        match r.blocks {
            Some(b) if b.iter().sum::<usize>() == m.dim && !b.contains(&0) => Ok(m.with_blocks(b)),
            Some(_) => Err(MeasureError::DimensionMismatch(m.dim, 0)),
            None => Ok(m),
        }
    }
}

impl From<EmpiricalMeasure> for MeasureRepr {
    fn from(m: EmpiricalMeasure) -> Self {
        let atoms = (0..m.len()).map(|i| m.atom(i).to_vec()).collect();
        let blocks = (m.blocks.len() > 1).then(|| m.blocks.clone());
        MeasureRepr { dim: m.dim, atoms, weights: m.weights, blocks }
    }
}

impl EmpiricalMeasure {
    pub fn new(dim: usize, atoms: Vec<Vec<Complex64>>, weights: Vec<f64>) -> Result<Self, MeasureError> {
        let m = Self::unnormalized(dim, atoms, weights)?;
        let total = exact_sum(m.weights.iter().copied());
        if (total - 1.0).abs() > 1e-12 {
            return Err(MeasureError::NotNormalized(total));
        }
        Ok(m)
    }

    /// Rescales positive finite weights to sum to one.
    pub fn normalized(dim: usize, atoms: Vec<Vec<Complex64>>, weights: Vec<f64>) -> Result<Self, MeasureError> {
        let mut m = Self::unnormalized(dim, atoms, weights)?;
        let total = exact_sum(m.weights.iter().copied());
        if total <= 0.0 {
            return Err(MeasureError::NotNormalized(total));
        }
        for w in &mut m.weights {
            *w /= total;
        }
        Ok(m)
    }

    fn unnormalized(dim: usize, atoms: Vec<Vec<Complex64>>, weights: Vec<f64>) -> Result<Self, MeasureError> {
        if atoms.is_empty() {
            return Err(MeasureError::NoAtoms);
        }
        if atoms.len() != weights.len() {
            return Err(MeasureError::LengthMismatch { atoms: atoms.len(), weights: weights.len() });
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(MeasureError::NegativeWeight);
        }
        let mut flat = Vec::with_capacity(atoms.len() * dim);
        for (index, a) in atoms.iter().enumerate() {
            if a.len() != dim {
                return Err(MeasureError::AtomDimension { index, expected: dim, got: a.len() });
            }
            flat.extend_from_slice(a);
        }
        Ok(Self { dim, blocks: vec![dim], atoms: flat, weights })
    }

    pub fn dirac(point: &[Complex64]) -> Self {
        Self { dim: point.len(), blocks: vec![point.len()], atoms: point.to_vec(), weights: vec![1.0] }
    }

    /// Uses the max-of-blocks metric for ball masses.
    pub fn with_blocks(mut self, blocks: Vec<usize>) -> Self {
        assert_eq!(blocks.iter().sum::<usize>(), self.dim, "blocks must partition the dimension");
        self.blocks = blocks;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn blocks(&self) -> &[usize] {
        &self.blocks
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn atom(&self, i: usize) -> &[Complex64] {
        &self.atoms[i * self.dim..(i + 1) * self.dim]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total_weight(&self) -> f64 {
        exact_sum(self.weights.iter().copied())
    }

    fn in_ball(&self, z: &[Complex64], ball: &Ball) -> bool {
        let diff: Vec<Complex64> = z.iter().zip(&ball.center).map(|(a, b)| a - b).collect();
        block_vector_norm(&diff, &self.blocks) < ball.radius
    }

    /// `μ(B)`.
    pub fn mass(&self, ball: &Ball) -> Result<f64, MeasureError> {
        if ball.center.len() != self.dim {
            return Err(MeasureError::DimensionMismatch(self.dim, ball.center.len()));
        }
        Ok(exact_sum((0..self.len()).filter(|&i| self.in_ball(self.atom(i), ball)).map(|i| self.weights[i])))
    }

    /// `μ(T⁻¹B)`, by pushing atoms forward.
    pub fn pushforward_mass(&self, t: &LinearOperator, ball: &Ball) -> Result<f64, MeasureError> {
        let pushed = self.pushforward(t)?;
        pushed.mass(ball)
    }

    /// `μ ∘ T⁻¹`, atom by atom, without merging.
    pub fn pushforward(&self, t: &LinearOperator) -> Result<EmpiricalMeasure, MeasureError> {
        if t.dim() != self.dim {
            return Err(MeasureError::DimensionMismatch(t.dim(), self.dim));
        }
        let mut atoms = vec![Complex64::new(0.0, 0.0); self.atoms.len()];
        for i in 0..self.len() {
            t.apply(self.atom(i), &mut atoms[i * self.dim..(i + 1) * self.dim]);
        }
        Ok(Self { dim: self.dim, blocks: self.blocks.clone(), atoms, weights: self.weights.clone() })
    }

    /// Merges atoms closer than `tol` (Euclidean), summing their weights. The
    /// earliest atom of each group is kept, in original order.
    pub fn merged(&self, tol: f64) -> EmpiricalMeasure {
        let n = self.len();
        let d = self.dim;
        // generic projection: atoms within tol have keys within tol * ‖coeffs‖
        let coeffs: Vec<(f64, f64)> = (0..d)
            .map(|k| (1.0 + 0.6180339887498949 * k as f64, 0.7071067811865476 + 0.3141592653589793 * k as f64))
            .collect();
        let coeff_norm = coeffs.iter().map(|(a, b)| a * a + b * b).sum::<f64>().sqrt();
        let key_tol = tol * coeff_norm;
        let keys: Vec<f64> = (0..n)
            .map(|i| self.atom(i).iter().zip(&coeffs).map(|(z, (a, b))| a * z.re + b * z.im).sum())
            .collect();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| keys[i].total_cmp(&keys[j]).then(i.cmp(&j)));

        let mut rep_of = vec![usize::MAX; n];
        let mut reps: Vec<usize> = Vec::new();
        for &i in &order {
            let mut found = None;
            for &r in reps.iter().rev() {
                if keys[r] < keys[i] - key_tol {
                    break;
                }
                let dist = euclidean_norm(&self.atom(i).iter().zip(self.atom(r)).map(|(a, b)| a - b).collect::<Vec<_>>());
                if dist <= tol && found.is_none_or(|f: usize| r < f) {
                    found = Some(r);
                }
            }
            match found {
                Some(r) => rep_of[i] = r,
                None => {
                    // keep reps ordered by key; i has the largest key so far
                    rep_of[i] = i;
                    reps.push(i);
                }
            }
        }
        // groups keyed by representative, then re-anchored at the earliest member
        let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = std::collections::BTreeMap::new();
        for i in 0..n {
            groups.entry(rep_of[i]).or_default().push(i);
        }
        let mut entries: Vec<(usize, f64)> = groups
            .values()
            .map(|members| (members[0], exact_sum(members.iter().map(|&i| self.weights[i]))))
            .collect();
        entries.sort_by_key(|e| e.0);
        let mut atoms = Vec::with_capacity(entries.len() * d);
        let mut weights = Vec::with_capacity(entries.len());
        for (i, w) in entries {
            atoms.extend_from_slice(self.atom(i));
            weights.push(w);
        }
        Self { dim: d, blocks: self.blocks.clone(), atoms, weights }
    }
}

/// Smallest start `m*` maximizing the count of `R` in `[m, m + N]`.
pub fn best_banach_window(r: &FiniteNatSet, window_len: u64) -> Result<BanachWindow, MeasureError> {
    Ok(upper_banach_density(r, window_len)?)
}

/// Uniform measure on `T^m x, …, T^{m+N} x`, duplicates merged.
pub fn empirical_from_window(orbit: &OrbitSegment, start: u64, window_len: u64) -> Result<EmpiricalMeasure, MeasureError> {
    let end = start.checked_add(window_len).unwrap_or(u64::MAX);
    if end > orbit.horizon_effective() {
        return Err(MeasureError::WindowOutOfRange { start, end, horizon: orbit.horizon_effective() });
    }
    let d = orbit.dim();
    let count = (window_len + 1) as usize;
    let w = 1.0 / (window_len + 1) as f64;
    let mut atoms = Vec::with_capacity(count * d);
    for n in start..=end {
        atoms.extend_from_slice(orbit.point(n));
    }
    let raw = EmpiricalMeasure { dim: d, blocks: orbit.blocks().to_vec(), atoms, weights: vec![w; count] };
    Ok(raw.merged(MERGE_TOLERANCE))
}

/// `sup_B |μ(T⁻¹B) − μ(B)|` over the given balls, in the operator's metric.
pub fn invariance_defect(t: &LinearOperator, mu: &EmpiricalMeasure, balls: &[Ball]) -> Result<f64, MeasureError> {
    if t.dim() != mu.dim {
        return Err(MeasureError::DimensionMismatch(t.dim(), mu.dim));
    }
    let pushed = mu.pushforward(t)?;
    let mut worst = 0.0f64;
    for ball in balls {
        if ball.center.len() != mu.dim {
            return Err(MeasureError::DimensionMismatch(mu.dim, ball.center.len()));
        }
        let inside = |z: &[Complex64]| t.distance(z, &ball.center) < ball.radius;
        let terms = (0..mu.len()).filter_map(|i| {
            let before = inside(mu.atom(i));
            let after = inside(pushed.atom(i));
            match (after, before) {
                (true, false) => Some(mu.weights[i]),
                (false, true) => Some(-mu.weights[i]),
                _ => None,
            }
        });
        worst = worst.max(exact_sum(terms).abs());
    }
    Ok(worst)
}

/// `Σ w_j m_j` with weights renormalized; atoms are concatenated.
pub fn mixture(measures: &[EmpiricalMeasure], weights: &[f64]) -> Result<EmpiricalMeasure, MeasureError> {
    let first = measures.first().ok_or(MeasureError::NoAtoms)?;
    if measures.len() != weights.len() {
        return Err(MeasureError::LengthMismatch { atoms: measures.len(), weights: weights.len() });
    }
    if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(MeasureError::BadMixtureWeights);
    }
    let total = exact_sum(weights.iter().copied());
    if total <= 0.0 {
        return Err(MeasureError::BadMixtureWeights);
    }
    let mut atoms = Vec::new();
    let mut out_weights = Vec::new();
    for (m, &w) in measures.iter().zip(weights) {
        if m.dim != first.dim || m.blocks != first.blocks {
            return Err(MeasureError::DimensionMismatch(first.dim, m.dim));
        }
        atoms.extend_from_slice(&m.atoms);
        out_weights.extend(m.weights.iter().map(|v| v * w / total));
    }
    Ok(EmpiricalMeasure { dim: first.dim, blocks: first.blocks.clone(), atoms, weights: out_weights })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub expectation: Vec<Complex64>,
    /// `∫ ‖z‖² dμ` with the Euclidean norm.
    pub second_moment: f64,
}

pub fn moments(mu: &EmpiricalMeasure) -> Moments {
    let d = mu.dim;
    let expectation = (0..d)
        .map(|k| {
            let re = exact_sum((0..mu.len()).map(|i| mu.weights[i] * mu.atom(i)[k].re));
            let im = exact_sum((0..mu.len()).map(|i| mu.weights[i] * mu.atom(i)[k].im));
            Complex64::new(re, im)
        })
        .collect();
    let second_moment = exact_sum((0..mu.len()).map(|i| mu.weights[i] * mu.atom(i).iter().map(|z| z.norm_sqr()).sum::<f64>()));
    Moments { expectation, second_moment }
}

/// `S = Σ w_i z_i z_iᴴ`, so that `⟨Sx, y⟩ = ∫ ⟨x, z⟩ conj⟨y, z⟩ dμ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "Vec<Vec<Complex64>>", try_from = "Vec<Vec<Complex64>>")]
pub struct CovarianceMatrix(pub CMatrix);

impl From<CovarianceMatrix> for Vec<Vec<Complex64>> {
    fn from(s: CovarianceMatrix) -> Self {
        let m = s.0;
        (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
    }
}

impl TryFrom<Vec<Vec<Complex64>>> for CovarianceMatrix {
    type Error = MeasureError;

    fn try_from(rows: Vec<Vec<Complex64>>) -> Result<Self, Self::Error> {
        let d = rows.len();
        if rows.iter().any(|r| r.len() != d) {
            return Err(MeasureError::DimensionMismatch(d, 0));
        }
        Ok(CovarianceMatrix(CMatrix::from_fn(d, d, |i, j| rows[i][j])))
    }
}

impl CovarianceMatrix {
    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn trace(&self) -> f64 {
        (0..self.0.nrows()).map(|i| self.0[(i, i)].re).sum()
    }

    /// `‖S − Sᴴ‖_F`.
    pub fn hermitian_defect(&self) -> f64 {
        (&self.0 - self.0.adjoint()).norm()
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut v: Vec<f64> = SymmetricEigen::new(self.hermitian_part()).eigenvalues.iter().cloned().collect();
        v.sort_by(f64::total_cmp);
        v
    }

    fn hermitian_part(&self) -> CMatrix {
        (&self.0 + self.0.adjoint()) * Complex64::new(0.5, 0.0)
    }
}

pub fn covariance(mu: &EmpiricalMeasure) -> CovarianceMatrix {
    let d = mu.dim;
    let s = CMatrix::from_fn(d, d, |r, c| {
        let re = exact_sum((0..mu.len()).map(|i| {
            let z = mu.atom(i);
            mu.weights[i] * (z[r] * z[c].conj()).re
        }));
        let im = exact_sum((0..mu.len()).map(|i| {
            let z = mu.atom(i);
            mu.weights[i] * (z[r] * z[c].conj()).im
        }));
        Complex64::new(re, im)
    });
    CovarianceMatrix(s)
}

/// `‖T S Tᴴ − S‖_F`.
pub fn conjugation_invariance_check(t: &LinearOperator, s: &CovarianceMatrix) -> Result<f64, MeasureError> {
    if t.dim() != s.0.nrows() {
        return Err(MeasureError::DimensionMismatch(t.dim(), s.0.nrows()));
    }
    let a = t.matrix();
    Ok((a * &s.0 * a.adjoint() - &s.0).norm())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportComparison {
    pub principal_angle: f64,
    pub support_rank: usize,
    pub range_rank: usize,
}

/// Compares the span of the atoms of weight `> tol` with the span of the
/// eigenvectors of `S` whose eigenvalue exceeds `tol` times the largest one.
pub fn support_span_vs_kernel(mu: &EmpiricalMeasure, s: &CovarianceMatrix, tol: f64) -> Result<SupportComparison, MeasureError> {
    let d = mu.dim;
    if s.0.nrows() != d {
        return Err(MeasureError::DimensionMismatch(d, s.0.nrows()));
    }
    let heavy: Vec<usize> = (0..mu.len()).filter(|&i| mu.weights[i] > tol).collect();
    let atoms = CMatrix::from_fn(d, heavy.len(), |r, c| mu.atom(heavy[c])[r]);
    let support = orthonormal_span(&atoms, 1e-10);

    let eig = SymmetricEigen::new(s.hermitian_part());
    let lmax = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    let keep: Vec<usize> = if lmax > 0.0 {
        (0..d).filter(|&i| eig.eigenvalues[i] > tol * lmax).collect()
    } else {
        Vec::new()
    };
    let range = CMatrix::from_fn(d, keep.len(), |r, c| eig.eigenvectors[(r, keep[c])]);
    Ok(SupportComparison {
        principal_angle: principal_angle(&support, &range),
        support_rank: support.ncols(),
        range_rank: range.ncols(),
    })
}

/// Circular average over the `L`-th roots of unity: atoms `λ_j⁻¹ z_i` with
/// weights `w_i / L`, then merged.
pub fn symmetrize(mu: &EmpiricalMeasure, roots: u32) -> EmpiricalMeasure {
    let roots = roots.max(1);
    if roots == 1 {
        return mu.clone();
    }
    let d = mu.dim;
    let mut atoms = Vec::with_capacity(mu.atoms.len() * roots as usize);
    let mut weights = Vec::with_capacity(mu.len() * roots as usize);
    for j in 0..roots {
        let inv = unit_from_turns(-(j as f64) / roots as f64);
        for i in 0..mu.len() {
            atoms.extend(mu.atom(i).iter().map(|z| inv * z));
            weights.push(mu.weights[i] / roots as f64);
        }
    }
    EmpiricalMeasure { dim: d, blocks: mu.blocks.clone(), atoms, weights }.merged(MERGE_TOLERANCE)
}

pub fn product_measure(a: &EmpiricalMeasure, b: &EmpiricalMeasure) -> Result<EmpiricalMeasure, MeasureError> {
    product_measure_with_cap(a, b, DEFAULT_PRODUCT_CAP)
}

/// Atoms `(z_i, y_j)` with weights `w_i v_j` on `ℂ^{d_a + d_b}`.
pub fn product_measure_with_cap(a: &EmpiricalMeasure, b: &EmpiricalMeasure, cap: usize) -> Result<EmpiricalMeasure, MeasureError> {
    let count = a.len().saturating_mul(b.len());
    if count > cap {
        return Err(MeasureError::ProductTooLarge { atoms: count, cap });
    }
    let d = a.dim + b.dim;
    let mut atoms = Vec::with_capacity(count * d);
    let mut weights = Vec::with_capacity(count);
    for i in 0..a.len() {
        for j in 0..b.len() {
            atoms.extend_from_slice(a.atom(i));
            atoms.extend_from_slice(b.atom(j));
            weights.push(a.weights[i] * b.weights[j]);
        }
    }
    let mut blocks = a.blocks.clone();
    blocks.extend_from_slice(&b.blocks);
    Ok(EmpiricalMeasure { dim: d, blocks, atoms, weights })
}
