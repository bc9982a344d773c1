//! Finite-dimensional operators, their unimodular spectrum and the
//! reversible/flight splitting of power-bounded operators.
//!
//! Operators carry a block structure. A direct sum keeps one block per
//! summand and vectors are measured with the maximum of the blockwise
//! Euclidean norms, so balls in the sum are products of balls in the parts.

use nalgebra::linalg::{Schur, SVD};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

pub const DEFAULT_D_MAX: usize = 64;
pub const DEFAULT_POWER_HORIZON: usize = 256;
pub const DEFAULT_POWER_BOUND: f64 = 1e3;
pub const DEFAULT_TOL_UNIMOD: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinopError {
    #[error("operator is singular (smallest singular value {sigma_min:e})")]
    Singular { sigma_min: f64 },
    #[error("dimension {dim} exceeds the configured maximum {max}")]
    TooLarge { dim: usize, max: usize },
    #[error("malformed operator spec: {0}")]
    Malformed(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("numerical failure: {what} (residual {residual:e})")]
    NumericalFailure { what: String, residual: f64 },
    #[error("operator is not power-bounded: {reason}")]
    NotPowerBounded { reason: String, estimate: f64 },
    #[error("power relation T^n x = αx does not hold: {0}")]
    NotPowerFixedPoint(String),
}

/// Compositional description of an operator. Complex numbers are `[re, im]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum OperatorSpec {
    /// `diag(e^{2πiθ_1}, …)` with angles in turns.
    DiagonalUnimodular { angles_turns: Vec<f64> },
    /// Row-major entries.
    DenseMatrix { entries: Vec<Vec<Complex64>> },
    JordanBlock { eigenvalue: Complex64, size: usize },
    /// Truncation of the backward shift `e_k ↦ w_k e_{k-1}` to `dim` coordinates.
    /// This is a finite approximation of the infinite-dimensional operator.
    WeightedBackwardShiftTruncation { weights: Vec<f64>, dim: usize },
    DirectSum { parts: Vec<OperatorSpec> },
    Scale { factor: Complex64, inner: Box<OperatorSpec> },
    Inverse { inner: Box<OperatorSpec> },
    Power { exponent: u32, inner: Box<OperatorSpec> },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RealizeOptions {
    pub d_max: usize,
    pub power_horizon: usize,
}

impl Default for RealizeOptions {
    fn default() -> Self {
        Self { d_max: DEFAULT_D_MAX, power_horizon: DEFAULT_POWER_HORIZON }
    }
}

/// `sup_{n <= horizon} ‖Tⁿ‖`, a heuristic for power-boundedness.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerBound {
    pub sup: f64,
    pub horizon: usize,
    /// Last exponent examined; smaller than `horizon` when the powers blew up.
    pub reached: usize,
}

/// `e^{2πiθ}`, exact at quarter turns.
pub fn unit_from_turns(turns: f64) -> Complex64 {
    let r = turns.rem_euclid(1.0);
    let q = 4.0 * r;
    if q == q.round() {
        return match q as i64 % 4 {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, 1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, -1.0),
        };
    }
    let (s, c) = (2.0 * std::f64::consts::PI * r).sin_cos();
    Complex64::new(c, s)
}

/// A realized operator. Immutable after construction.
#[derive(Debug, Clone)]
pub struct LinearOperator {
    matrix: CMatrix,
    blocks: Vec<usize>,
    rows: Vec<Complex64>,
    diagonal: Option<Vec<Complex64>>,
    operator_norm_estimate: f64,
    power_bound: PowerBound,
}

/// Serializable metadata of a [`LinearOperator`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorSummary {
    pub dim: usize,
    pub blocks: Vec<usize>,
    pub diagonal: bool,
    pub norm_convention: String,
    pub operator_norm_estimate: f64,
    pub power_bound: PowerBound,
    pub power_bound_is_heuristic: bool,
}

impl LinearOperator {
    pub fn from_matrix(matrix: CMatrix) -> Result<Self, LinopError> {
        let d = matrix.nrows();
        Self::with_blocks(matrix, vec![d], RealizeOptions::default())
    }

    pub fn with_blocks(matrix: CMatrix, blocks: Vec<usize>, opts: RealizeOptions) -> Result<Self, LinopError> {
        let d = matrix.nrows();
        if d == 0 || matrix.ncols() != d {
            return Err(LinopError::Malformed(format!("matrix must be square and nonempty, got {}x{}", d, matrix.ncols())));
        }
        if d > opts.d_max {
            return Err(LinopError::TooLarge { dim: d, max: opts.d_max });
        }
        if blocks.iter().sum::<usize>() != d || blocks.contains(&0) {
            return Err(LinopError::Malformed(format!("blocks {blocks:?} do not partition dimension {d}")));
        }
        if matrix.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(LinopError::Malformed("matrix has non-finite entries".into()));
        }
        let mut rows = Vec::with_capacity(d * d);
        for i in 0..d {
            for j in 0..d {
                rows.push(matrix[(i, j)]);
            }
        }
        let is_diag = (0..d).all(|i| (0..d).all(|j| i == j || matrix[(i, j)] == Complex64::new(0.0, 0.0)));
        let diagonal = is_diag.then(|| (0..d).map(|i| matrix[(i, i)]).collect());
        let operator_norm_estimate = block_norm(&matrix, &blocks);
        let power_bound = estimate_power_bound(&matrix, &blocks, opts.power_horizon);
        Ok(Self { matrix, blocks, rows, diagonal, operator_norm_estimate, power_bound })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn blocks(&self) -> &[usize] {
        &self.blocks
    }

    pub fn is_diagonal(&self) -> bool {
        self.diagonal.is_some()
    }

    pub fn diagonal(&self) -> Option<&[Complex64]> {
        self.diagonal.as_deref()
    }

    pub fn operator_norm_estimate(&self) -> f64 {
        self.operator_norm_estimate
    }

    pub fn power_bound(&self) -> PowerBound {
        self.power_bound
    }

    pub fn summary(&self) -> OperatorSummary {
        OperatorSummary {
            dim: self.dim(),
            blocks: self.blocks.clone(),
            diagonal: self.is_diagonal(),
            norm_convention: "max over blocks of the Euclidean norm".into(),
            operator_norm_estimate: self.operator_norm_estimate,
            power_bound: self.power_bound,
            power_bound_is_heuristic: true,
        }
    }

    /// `out = T x`. Every orbit and push-forward in the crate goes through
    /// this routine so repeated applications are bit-identical.
    pub fn apply(&self, x: &[Complex64], out: &mut [Complex64]) {
        let d = self.dim();
        debug_assert_eq!(x.len(), d);
        debug_assert_eq!(out.len(), d);
        if let Some(diag) = &self.diagonal {
            for i in 0..d {
                out[i] = diag[i] * x[i];
            }
            return;
        }
        for i in 0..d {
            let row = &self.rows[i * d..(i + 1) * d];
            let mut acc = Complex64::new(0.0, 0.0);
            for (a, b) in row.iter().zip(x) {
                acc += a * b;
            }
            out[i] = acc;
        }
    }

    pub fn apply_vec(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.dim()];
        self.apply(x, &mut out);
        out
    }

    /// Vector norm of the operator's metric.
    pub fn norm(&self, x: &[Complex64]) -> f64 {
        block_vector_norm(x, &self.blocks)
    }

    pub fn distance(&self, x: &[Complex64], y: &[Complex64]) -> f64 {
        let diff: Vec<Complex64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
        self.norm(&diff)
    }

    pub fn check_vector(&self, x: &[Complex64]) -> Result<(), LinopError> {
        if x.len() != self.dim() {
            Err(LinopError::DimensionMismatch { expected: self.dim(), got: x.len() })
        } else {
            Ok(())
        }
    }

    pub fn inverse(&self) -> Result<Self, LinopError> {
        let inv = invert_blocks(&self.matrix, &self.blocks)?;
        Self::with_blocks(inv, self.blocks.clone(), self.options())
    }

    fn options(&self) -> RealizeOptions {
        RealizeOptions { d_max: self.dim().max(DEFAULT_D_MAX), power_horizon: self.power_bound.horizon }
    }

    /// Spectral radius from the Schur form.
    pub fn spectral_radius(&self) -> Result<f64, LinopError> {
        let (_, t) = complex_schur(&self.matrix)?;
        Ok((0..self.dim()).map(|i| t[(i, i)].norm()).fold(0.0, f64::max))
    }
}

/// Max over blocks of the Euclidean norm of each block's coordinates.
pub fn block_vector_norm(x: &[Complex64], blocks: &[usize]) -> f64 {
    let mut start = 0;
    let mut best = 0.0f64;
    for &b in blocks {
        let s: f64 = x[start..start + b].iter().map(|z| z.norm_sqr()).sum();
        best = best.max(s.sqrt());
        start += b;
    }
    best
}

pub fn euclidean_norm(x: &[Complex64]) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn block_ranges(blocks: &[usize]) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(blocks.len());
    let mut start = 0;
    for &b in blocks {
        out.push((start, b));
        start += b;
    }
    out
}

/// Spectral norm by power iteration on `AᴴA`.
pub fn spectral_norm_estimate(a: &CMatrix, iterations: usize) -> f64 {
    let n = a.ncols();
    if n == 0 {
        return 0.0;
    }
    let mut v = CVector::from_fn(n, |i, _| Complex64::new(1.0 + 0.37 * i as f64, 0.11 * ((i * 7) % 5) as f64));
    let mut est = 0.0;
    for _ in 0..iterations {
        let nv = v.norm();
        if nv == 0.0 || !nv.is_finite() {
            break;
        }
        v /= Complex64::new(nv, 0.0);
        let av = a * &v;
        est = av.norm();
        v = a.adjoint() * av;
    }
    est
}

fn block_norm(m: &CMatrix, blocks: &[usize]) -> f64 {
    block_ranges(blocks)
        .into_iter()
        .map(|(s, b)| spectral_norm_estimate(&m.view((s, s), (b, b)).into_owned(), 100))
        .fold(0.0, f64::max)
}

fn estimate_power_bound(m: &CMatrix, blocks: &[usize], horizon: usize) -> PowerBound {
    let d = m.nrows();
    let mut power = CMatrix::identity(d, d);
    let mut sup = 1.0f64;
    let mut reached = 0;
    for n in 1..=horizon {
        power = m * &power;
        let nrm = block_ranges(blocks)
            .into_iter()
            .map(|(s, b)| spectral_norm_estimate(&power.view((s, s), (b, b)).into_owned(), 30))
            .fold(0.0, f64::max);
        reached = n;
        if !nrm.is_finite() {
            sup = f64::INFINITY;
            break;
        }
        sup = sup.max(nrm);
        if sup > 1e150 {
            break;
        }
    }
    PowerBound { sup, horizon, reached }
}

fn invert_blocks(m: &CMatrix, blocks: &[usize]) -> Result<CMatrix, LinopError> {
    let d = m.nrows();
    let mut out = CMatrix::zeros(d, d);
    for (s, b) in block_ranges(blocks) {
        let block = m.view((s, s), (b, b)).into_owned();
        let diag = (0..b).all(|i| (0..b).all(|j| i == j || block[(i, j)] == Complex64::new(0.0, 0.0)));
        let inv = if diag {
            let mut inv = CMatrix::zeros(b, b);
            for i in 0..b {
                let z = block[(i, i)];
                if z.norm() == 0.0 {
                    return Err(LinopError::Singular { sigma_min: 0.0 });
                }
                inv[(i, i)] = if (z.norm_sqr() - 1.0).abs() == 0.0 { z.conj() } else { z.inv() };
            }
            inv
        } else {
            let sv = SVD::new(block.clone(), false, false).singular_values;
            let smax = sv.iter().cloned().fold(0.0, f64::max);
            let smin = sv.iter().cloned().fold(f64::INFINITY, f64::min);
            if smin <= 1e-13 * smax.max(f64::MIN_POSITIVE) {
                return Err(LinopError::Singular { sigma_min: smin });
            }
            block.try_inverse().ok_or(LinopError::Singular { sigma_min: smin })?
        };
        out.view_mut((s, s), (b, b)).copy_from(&inv);
    }
    Ok(out)
}

fn build(spec: &OperatorSpec, opts: &RealizeOptions) -> Result<(CMatrix, Vec<usize>), LinopError> {
    let check = |d: usize| {
        if d > opts.d_max {
            Err(LinopError::TooLarge { dim: d, max: opts.d_max })
        } else if d == 0 {
            Err(LinopError::Malformed("dimension must be positive".into()))
        } else {
            Ok(())
        }
    };
    match spec {
        OperatorSpec::DiagonalUnimodular { angles_turns } => {
            check(angles_turns.len())?;
            if angles_turns.iter().any(|a| !a.is_finite()) {
                return Err(LinopError::Malformed("angles must be finite".into()));
            }
            let diag: Vec<Complex64> = angles_turns.iter().map(|&t| unit_from_turns(t)).collect();
            Ok((CMatrix::from_diagonal(&CVector::from_vec(diag)), vec![angles_turns.len()]))
        }
        OperatorSpec::DenseMatrix { entries } => {
            let d = entries.len();
            check(d)?;
            if entries.iter().any(|r| r.len() != d) {
                return Err(LinopError::Malformed("dense matrix must be square".into()));
            }
            Ok((CMatrix::from_fn(d, d, |i, j| entries[i][j]), vec![d]))
        }
        OperatorSpec::JordanBlock { eigenvalue, size } => {
            check(*size)?;
            let m = CMatrix::from_fn(*size, *size, |i, j| {
                if i == j {
                    *eigenvalue
                } else if j == i + 1 {
                    Complex64::new(1.0, 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            });
            Ok((m, vec![*size]))
        }
        OperatorSpec::WeightedBackwardShiftTruncation { weights, dim } => {
            check(*dim)?;
            if weights.len() + 1 != *dim {
                return Err(LinopError::Malformed(format!(
                    "backward shift of dimension {dim} needs {} weights, got {}",
                    dim - 1,
                    weights.len()
                )));
            }
            let m = CMatrix::from_fn(*dim, *dim, |i, j| {
                if j == i + 1 {
                    Complex64::new(weights[i], 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            });
            Ok((m, vec![*dim]))
        }
        OperatorSpec::DirectSum { parts } => {
            if parts.is_empty() {
                return Err(LinopError::Malformed("direct sum needs at least one part".into()));
            }
            let built: Vec<(CMatrix, Vec<usize>)> = parts.iter().map(|p| build(p, opts)).collect::<Result<_, _>>()?;
            let d: usize = built.iter().map(|(m, _)| m.nrows()).sum();
            check(d)?;
            let (m, blocks) = block_diagonal(&built);
            Ok((m, blocks))
        }
        OperatorSpec::Scale { factor, inner } => {
            let (m, blocks) = build(inner, opts)?;
            Ok((m * *factor, blocks))
        }
        OperatorSpec::Inverse { inner } => {
            let (m, blocks) = build(inner, opts)?;
            Ok((invert_blocks(&m, &blocks)?, blocks))
        }
        OperatorSpec::Power { exponent, inner } => {
            let (m, blocks) = build(inner, opts)?;
            Ok((matrix_power(&m, *exponent as u64), blocks))
        }
    }
}

fn block_diagonal(parts: &[(CMatrix, Vec<usize>)]) -> (CMatrix, Vec<usize>) {
    let d: usize = parts.iter().map(|(m, _)| m.nrows()).sum();
    let mut out = CMatrix::zeros(d, d);
    let mut blocks = Vec::new();
    let mut s = 0;
    for (m, b) in parts {
        let k = m.nrows();
        out.view_mut((s, s), (k, k)).copy_from(m);
        blocks.extend_from_slice(b);
        s += k;
    }
    (out, blocks)
}

pub fn matrix_power(m: &CMatrix, mut n: u64) -> CMatrix {
    let d = m.nrows();
    let mut result = CMatrix::identity(d, d);
    let mut base = m.clone();
    while n > 0 {
        if n & 1 == 1 {
            result = &result * &base;
        }
        n >>= 1;
        if n > 0 {
            base = &base * &base;
        }
    }
    result
}

pub fn realize(spec: &OperatorSpec) -> Result<LinearOperator, LinopError> {
    realize_with(spec, RealizeOptions::default())
}

pub fn realize_with(spec: &OperatorSpec, opts: RealizeOptions) -> Result<LinearOperator, LinopError> {
    let (m, blocks) = build(spec, &opts)?;
    LinearOperator::with_blocks(m, blocks, opts)
}

/// Block-diagonal sum. The norm estimate is the maximum of the parts' norms.
pub fn direct_sum(parts: &[LinearOperator]) -> Result<LinearOperator, LinopError> {
    if parts.is_empty() {
        return Err(LinopError::Malformed("direct sum needs at least one part".into()));
    }
    let built: Vec<(CMatrix, Vec<usize>)> = parts.iter().map(|p| (p.matrix.clone(), p.blocks.clone())).collect();
    let (m, blocks) = block_diagonal(&built);
    let d = m.nrows();
    let opts = RealizeOptions {
        d_max: d.max(DEFAULT_D_MAX),
        power_horizon: parts.iter().map(|p| p.power_bound.horizon).max().unwrap_or(DEFAULT_POWER_HORIZON),
    };
    LinearOperator::with_blocks(m, blocks, opts)
}

// ---------------------------------------------------------------------------
// Dense linear algebra helpers
// ---------------------------------------------------------------------------

/// Complex Schur form `A = Q T Qᴴ` with `T` upper triangular.
pub fn complex_schur(a: &CMatrix) -> Result<(CMatrix, CMatrix), LinopError> {
    let d = a.nrows();
    if d == 1 {
        return Ok((CMatrix::identity(1, 1), a.clone()));
    }
    let schur = Schur::try_new(a.clone(), f64::EPSILON, 1000 * d.max(10)).ok_or_else(|| LinopError::NumericalFailure {
        what: "Schur iteration did not converge".into(),
        residual: f64::NAN,
    })?;
    let (q, mut t) = schur.unpack();
    for j in 0..d {
        for i in j + 1..d {
            t[(i, j)] = Complex64::new(0.0, 0.0);
        }
    }
    Ok((q, t))
}

/// Givens pair `(c, s, r)` with `[c s; -s̄ c] [f; g] = [r; 0]`.
fn givens(f: Complex64, g: Complex64) -> (f64, Complex64, Complex64) {
    let zero = Complex64::new(0.0, 0.0);
    if g == zero {
        return (1.0, zero, f);
    }
    if f == zero {
        let gn = g.norm();
        return (0.0, g.conj() / gn, Complex64::new(gn, 0.0));
    }
    let fn_ = f.norm();
    let norm = fn_.hypot(g.norm());
    let phase = f / fn_;
    (fn_ / norm, phase * g.conj() / norm, phase * norm)
}

fn rotate(x: &mut Complex64, y: &mut Complex64, c: f64, s: Complex64) {
    let tx = *x * c + s * *y;
    *y = *y * c - s.conj() * *x;
    *x = tx;
}

/// Swaps the adjacent diagonal entries `k`, `k + 1` of an upper triangular
/// Schur factor, updating `Q` so that `Q T Qᴴ` is unchanged.
fn swap_schur(q: &mut CMatrix, t: &mut CMatrix, k: usize) {
    let n = t.nrows();
    let t11 = t[(k, k)];
    let t22 = t[(k + 1, k + 1)];
    let (c, s, _) = givens(t[(k, k + 1)], t22 - t11);
    for j in k + 2..n {
        let (mut a, mut b) = (t[(k, j)], t[(k + 1, j)]);
        rotate(&mut a, &mut b, c, s);
        t[(k, j)] = a;
        t[(k + 1, j)] = b;
    }
    for i in 0..k {
        let (mut a, mut b) = (t[(i, k)], t[(i, k + 1)]);
        rotate(&mut a, &mut b, c, s.conj());
        t[(i, k)] = a;
        t[(i, k + 1)] = b;
    }
    t[(k, k)] = t22;
    t[(k + 1, k + 1)] = t11;
    for i in 0..n {
        let (mut a, mut b) = (q[(i, k)], q[(i, k + 1)]);
        rotate(&mut a, &mut b, c, s.conj());
        q[(i, k)] = a;
        q[(i, k + 1)] = b;
    }
}

/// Orthonormal basis of the invariant subspace belonging to the selected
/// eigenvalues, obtained by reordering the Schur form so they come first.
pub fn schur_invariant_subspace<F>(q: &CMatrix, t: &CMatrix, select: F) -> CMatrix
where
    F: Fn(Complex64) -> bool,
{
    let n = t.nrows();
    let mut q = q.clone();
    let mut t = t.clone();
    let mut target = 0;
    for i in 0..n {
        if select(t[(i, i)]) {
            let mut pos = i;
            while pos > target {
                swap_schur(&mut q, &mut t, pos - 1);
                pos -= 1;
            }
            target += 1;
        }
    }
    q.columns(0, target).into_owned()
}

/// Orthonormal basis of the column span, dropping directions whose singular
/// value is below `rel_tol` times the largest one.
pub fn orthonormal_span(vectors: &CMatrix, rel_tol: f64) -> CMatrix {
    let d = vectors.nrows();
    if vectors.ncols() == 0 {
        return CMatrix::zeros(d, 0);
    }
    let svd = SVD::new(vectors.clone(), true, false);
    let u = svd.u.expect("requested U");
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    if smax == 0.0 {
        return CMatrix::zeros(d, 0);
    }
    let keep: Vec<usize> = (0..svd.singular_values.len()).filter(|&i| svd.singular_values[i] > rel_tol * smax).collect();
    CMatrix::from_fn(d, keep.len(), |i, j| u[(i, keep[j])])
}

/// Largest principal angle between the spans of two orthonormal bases.
/// Subspaces of different dimension are at angle `π/2`.
pub fn principal_angle(a: &CMatrix, b: &CMatrix) -> f64 {
    if a.ncols() != b.ncols() {
        return std::f64::consts::FRAC_PI_2;
    }
    if a.ncols() == 0 {
        return 0.0;
    }
    let residual = b - a * (a.adjoint() * b);
    let s = SVD::new(residual, false, false).singular_values.iter().cloned().fold(0.0, f64::max);
    s.min(1.0).asin()
}

/// `‖x − P x‖` for the orthogonal projector `P` onto the span of `basis`.
pub fn distance_to_span(x: &[Complex64], basis: &CMatrix) -> f64 {
    let v = CVector::from_column_slice(x);
    if basis.ncols() == 0 {
        return v.norm();
    }
    if basis.ncols() >= x.len() {
        return 0.0;
    }
    let proj = basis * (basis.adjoint() * &v);
    (v - proj).norm()
}

// ---------------------------------------------------------------------------
// Spectral data
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenPair {
    pub value: Complex64,
    pub vector: Vec<Complex64>,
    pub residual: f64,
}

#[derive(Debug, Clone)]
pub struct SpectralData {
    /// Schur diagonal, repeated according to algebraic multiplicity.
    pub eigenvalues: Vec<Complex64>,
    pub eigenpairs: Vec<EigenPair>,
    pub unimodular_eigenpairs: Vec<EigenPair>,
    /// Orthonormal basis (columns) of `span ℰ(T)`.
    pub espan_basis: CMatrix,
    pub tol_unimod: f64,
    /// `10 · eps · ‖T‖ · d`.
    pub residual_tolerance: f64,
    pub max_residual: f64,
    /// Some unimodular eigenvalue has geometric multiplicity below its
    /// algebraic multiplicity.
    pub defective_unimodular: bool,
}

impl SpectralData {
    pub fn espan_dim(&self) -> usize {
        self.espan_basis.ncols()
    }

    pub fn residuals_within_tolerance(&self) -> bool {
        self.max_residual <= self.residual_tolerance
    }

    /// Unimodular eigenvalues as angles in turns, one per distinct value.
    pub fn unimodular_angles_turns(&self) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        for p in &self.unimodular_eigenpairs {
            let t = (p.value.arg() / (2.0 * std::f64::consts::PI)).rem_euclid(1.0);
            if !out.iter().any(|&u| (u - t).abs() < 1e-12) {
                out.push(t);
            }
        }
        out
    }
}

fn is_unimodular(z: Complex64, tol: f64) -> bool {
    (z.norm() - 1.0).abs() <= tol
}

struct Cluster {
    center: Complex64,
    members: Vec<Complex64>,
}

fn cluster_eigenvalues(values: &[Complex64], tol: f64) -> Vec<Cluster> {
    let mut clusters: Vec<Cluster> = Vec::new();
    for &v in values {
        match clusters.iter_mut().find(|c| (c.center - v).norm() <= tol) {
            Some(c) => {
                c.members.push(v);
                let k = c.members.len() as f64;
                c.center = c.members.iter().sum::<Complex64>() / k;
            }
            None => clusters.push(Cluster { center: v, members: vec![v] }),
        }
    }
    clusters
}

/// All eigenpairs of `T`, the unimodular ones (`||λ| − 1| <= tol_unimod`)
/// and an orthonormal basis of their span.
///
/// Eigenvalues come from the complex Schur form. Numerically coincident
/// eigenvalues are grouped and their eigenspace is the numerical null space
/// of `T − λI`, so geometric multiplicities are honest.
pub fn unimodular_eigenpairs(t: &LinearOperator, tol_unimod: f64) -> Result<SpectralData, LinopError> {
    let a = t.matrix();
    let d = t.dim();
    let (_, tri) = complex_schur(a)?;
    let eigenvalues: Vec<Complex64> = (0..d).map(|i| tri[(i, i)]).collect();
    let scale = a.norm().max(1.0);
    let clusters = cluster_eigenvalues(&eigenvalues, 1e-7 * scale);
    let null_tol = 1e-8 * scale;

    let mut eigenpairs = Vec::new();
    let mut defective_unimodular = false;
    let mut max_residual = 0.0f64;
    for c in &clusters {
        let shifted = a - CMatrix::identity(d, d) * c.center;
        let svd = SVD::new(shifted.clone(), false, true);
        let v_t = svd.v_t.expect("requested V");
        let sv = &svd.singular_values;
        let mut order: Vec<usize> = (0..sv.len()).collect();
        order.sort_by(|&i, &j| sv[i].total_cmp(&sv[j]));
        let mut take = order.iter().take_while(|&&i| sv[i] <= null_tol).count();
        take = take.clamp(1, c.members.len());
        if take < c.members.len() && is_unimodular(c.center, tol_unimod) {
            defective_unimodular = true;
        }
        for &i in order.iter().take(take) {
            let vector: Vec<Complex64> = (0..d).map(|k| v_t[(i, k)].conj()).collect();
            let tv = t.apply_vec(&vector);
            let residual = tv.iter().zip(&vector).map(|(a, b)| (a - c.center * b).norm_sqr()).sum::<f64>().sqrt();
            max_residual = max_residual.max(residual);
            eigenpairs.push(EigenPair { value: c.center, vector, residual });
        }
    }
    if max_residual > 1e-6 * scale {
        return Err(LinopError::NumericalFailure { what: "eigenvector residual too large".into(), residual: max_residual });
    }
    let unimodular: Vec<EigenPair> = eigenpairs.iter().filter(|p| is_unimodular(p.value, tol_unimod)).cloned().collect();
    let stacked = CMatrix::from_fn(d, unimodular.len(), |i, j| unimodular[j].vector[i]);
    let espan_basis = orthonormal_span(&stacked, 1e-10);
    Ok(SpectralData {
        eigenvalues,
        eigenpairs,
        unimodular_eigenpairs: unimodular,
        espan_basis,
        tol_unimod,
        residual_tolerance: 10.0 * f64::EPSILON * t.operator_norm_estimate().max(f64::MIN_POSITIVE) * d as f64,
        max_residual,
        defective_unimodular,
    })
}

/// Distance from `x` to `span ℰ(T)`.
pub fn eigen_span_residual(x: &[Complex64], spectral: &SpectralData) -> Result<f64, LinopError> {
    if x.len() != spectral.espan_basis.nrows() {
        return Err(LinopError::DimensionMismatch { expected: spectral.espan_basis.nrows(), got: x.len() });
    }
    Ok(distance_to_span(x, &spectral.espan_basis))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JdgOptions {
    pub tol_unimod: f64,
    pub max_power_bound: f64,
}

impl Default for JdgOptions {
    fn default() -> Self {
        Self { tol_unimod: DEFAULT_TOL_UNIMOD, max_power_bound: DEFAULT_POWER_BOUND }
    }
}

/// Reversible and flight parts of a power-bounded operator.
#[derive(Debug, Clone)]
pub struct JdgSplit {
    /// Orthonormal basis of the span of the unimodular eigenvectors.
    pub rev_basis: CMatrix,
    /// Orthonormal basis of the sum of generalized eigenspaces with `|λ| < 1`.
    pub fl_basis: CMatrix,
    /// `‖T^{N_pb}‖` restricted to the flight part.
    pub fl_decay: f64,
    pub power_horizon: usize,
    pub power_bound: PowerBound,
}

pub fn jdg_split(t: &LinearOperator) -> Result<JdgSplit, LinopError> {
    jdg_split_with(t, JdgOptions::default())
}

/// Finite-dimensional reversible/flight splitting. Power-boundedness is
/// checked three ways: the power-norm estimate, the spectral radius and
/// semisimplicity of the unimodular eigenvalues.
pub fn jdg_split_with(t: &LinearOperator, opts: JdgOptions) -> Result<JdgSplit, LinopError> {
    let pb = t.power_bound();
    if !(pb.sup <= opts.max_power_bound) {
        return Err(LinopError::NotPowerBounded {
            reason: format!("sup of ‖Tⁿ‖ for n <= {} is {:e} > {:e}", pb.reached, pb.sup, opts.max_power_bound),
            estimate: pb.sup,
        });
    }
    let (q, tri) = complex_schur(t.matrix())?;
    let d = t.dim();
    let radius = (0..d).map(|i| tri[(i, i)].norm()).fold(0.0, f64::max);
    if radius > 1.0 + opts.tol_unimod {
        return Err(LinopError::NotPowerBounded { reason: format!("spectral radius {radius} exceeds 1"), estimate: pb.sup });
    }
    let spectral = unimodular_eigenpairs(t, opts.tol_unimod)?;
    if spectral.defective_unimodular {
        return Err(LinopError::NotPowerBounded {
            reason: "a unimodular eigenvalue is defective (nontrivial Jordan block)".into(),
            estimate: pb.sup,
        });
    }
    let tol = opts.tol_unimod;
    let rev_basis = schur_invariant_subspace(&q, &tri, |z| is_unimodular(z, tol));
    let fl_basis = schur_invariant_subspace(&q, &tri, |z| !is_unimodular(z, tol));
    let fl_decay = if fl_basis.ncols() == 0 {
        0.0
    } else {
        let p = matrix_power(t.matrix(), pb.horizon as u64);
        spectral_norm_estimate(&(p * &fl_basis), 100)
    };
    Ok(JdgSplit { rev_basis, fl_basis, fl_decay, power_horizon: pb.horizon, power_bound: pb })
}

/// Eigenvector recovered from a power relation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerRelationEigen {
    pub vector: Vec<Complex64>,
    pub eigenvalue: Complex64,
    /// Index `k` of the last nonvanishing chain vector `y_k`.
    pub chain_index: usize,
    pub chain_norms: Vec<f64>,
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerRelationOptions {
    pub tol_fix: f64,
    pub tol_unimod: f64,
    /// `y_j` counts as zero when `‖y_j‖ <= tol_vanish · (1 + ‖T‖) · ‖y_{j−1}‖`.
    pub tol_vanish: f64,
}

impl Default for PowerRelationOptions {
    fn default() -> Self {
        Self { tol_fix: 1e-9, tol_unimod: DEFAULT_TOL_UNIMOD, tol_vanish: 1e-9 }
    }
}

pub fn eigenvector_from_power_relation(
    t: &LinearOperator,
    x: &[Complex64],
    n: u32,
    alpha: Complex64,
) -> Result<PowerRelationEigen, LinopError> {
    eigenvector_from_power_relation_with(t, x, n, alpha, PowerRelationOptions::default())
}

/// Given `Tⁿx = αx`, factors `α − zⁿ = ∏ (α_j − z)` over the n-th roots of
/// `α` and runs `y_0 = x`, `y_j = (α_j − T) y_{j−1}`. The last nonzero `y_k`
/// satisfies `T y_k = α_{k+1} y_k` and lies in the span of the orbit of `x`.
pub fn eigenvector_from_power_relation_with(
    t: &LinearOperator,
    x: &[Complex64],
    n: u32,
    alpha: Complex64,
    opts: PowerRelationOptions,
) -> Result<PowerRelationEigen, LinopError> {
    t.check_vector(x)?;
    let xn = euclidean_norm(x);
    if xn == 0.0 {
        return Err(LinopError::NotPowerFixedPoint("x must be nonzero".into()));
    }
    if n == 0 {
        return Err(LinopError::NotPowerFixedPoint("n must be positive".into()));
    }
    if !is_unimodular(alpha, opts.tol_unimod) {
        return Err(LinopError::NotPowerFixedPoint(format!("|α| = {} is not 1", alpha.norm())));
    }
    let mut y = x.to_vec();
    for _ in 0..n {
        y = t.apply_vec(&y);
    }
    let defect = y.iter().zip(x).map(|(a, b)| (a - alpha * b).norm_sqr()).sum::<f64>().sqrt();
    if defect > opts.tol_fix * xn {
        return Err(LinopError::NotPowerFixedPoint(format!("‖Tⁿx − αx‖ = {defect:e}")));
    }

    let principal = Complex64::from_polar(1.0, alpha.arg() / n as f64);
    let roots: Vec<Complex64> = (0..n).map(|j| principal * unit_from_turns(j as f64 / n as f64)).collect();
    let scale = 1.0 + t.operator_norm_estimate();
    let mut prev = x.to_vec();
    let mut chain_norms = vec![xn];
    let mut k = (n - 1) as usize;
    for (j, &root) in roots.iter().enumerate() {
        let tp = t.apply_vec(&prev);
        let next: Vec<Complex64> = prev.iter().zip(&tp).map(|(p, q)| root * p - q).collect();
        let nn = euclidean_norm(&next);
        let vanished = nn <= opts.tol_vanish * scale * chain_norms[j];
        if vanished || j + 1 == n as usize {
            k = j;
            break;
        }
        chain_norms.push(nn);
        prev = next;
    }
    let eigenvalue = roots[k];
    let ty = t.apply_vec(&prev);
    let residual = ty.iter().zip(&prev).map(|(a, b)| (a - eigenvalue * b).norm_sqr()).sum::<f64>().sqrt();
    Ok(PowerRelationEigen { vector: prev, eigenvalue, chain_index: k, chain_norms, residual })
}
