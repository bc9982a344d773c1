//! Recurrence verdicts for `(T, x)` pairs at a finite horizon, and the
//! structural checks assembled from them.
//!
//! All verdicts are statistics of the positive-time return set
//! `Q = {m : T^{m+1} x ∈ B(x, ε)}`, i.e. the return set with time 0 dropped
//! and re-indexed from 0. The flag rules are chosen so that the inclusion
//! chain `uniformly ⇒ frequently ⇒ u_frequently ⇒ reiteratively ⇒ recurrent`
//! holds for every report by construction, not just typically.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::empmeasure::{best_banach_window, empirical_from_window, Ball, MeasureError};
use crate::linop::{
    direct_sum, eigen_span_residual, euclidean_norm, unimodular_eigenpairs, LinearOperator, LinopError, SpectralData,
    DEFAULT_POWER_BOUND, DEFAULT_TOL_UNIMOD,
};
use crate::natset::{
    burn_in, hits_difference_set, lower_density, syndetic_gap, upper_banach_density, upper_density, BanachWindow,
    Density, FiniteNatSet, NatSetError, PrefixDensity,
};
use crate::orbit::{boundedness, iterate, return_set, Boundedness, OrbitError, OrbitSegment};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ClassifyError {
    #[error("horizon {horizon} is below the minimum {min}")]
    InsufficientHorizon { horizon: u64, min: u64 },
    #[error("epsilons must be a nonempty ascending list of positive numbers")]
    InvalidEpsilons,
    #[error("invalid thresholds: {0}")]
    InvalidThresholds(String),
    #[error(transparent)]
    Orbit(#[from] OrbitError),
    #[error(transparent)]
    Linop(#[from] LinopError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    NatSet(#[from] NatSetError),
}

fn ratio_f64(r: Density) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// User-facing thresholds; unset fields are derived from the horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    pub delta_ld: f64,
    pub delta_ud: f64,
    pub delta_bd: f64,
    /// Largest admissible syndetic gap; `⌊H/100⌋` when unset.
    pub g_max: Option<u64>,
    /// Banach window length; `⌊H/100⌋` when unset.
    pub n_win: Option<u64>,
    pub min_horizon: u64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self { delta_ld: 1e-3, delta_ud: 1e-3, delta_bd: 1e-3, g_max: None, n_win: None, min_horizon: 10_000 }
    }
}

/// Thresholds as actually applied at one horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedThresholds {
    pub delta_ld: f64,
    pub delta_ud: f64,
    pub delta_bd: f64,
    pub g_max_requested: u64,
    /// `min(g_max_requested, ⌊1 / (δ_ld + 3/b)⌋)` with `b` the density
    /// burn-in; any set with this gap has lower density at least `δ_ld` on
    /// the whole burn-in range.
    pub g_max: u64,
    pub n_win: u64,
    pub min_horizon: u64,
}

impl Thresholds {
    pub fn validate(&self) -> Result<(), ClassifyError> {
        let ok = |v: f64| v.is_finite() && v > 0.0 && v <= 1.0;
        if !(ok(self.delta_ld) && ok(self.delta_ud) && ok(self.delta_bd)) {
            return Err(ClassifyError::InvalidThresholds("densities must lie in (0, 1]".into()));
        }
        if !(self.delta_ld >= self.delta_ud && self.delta_ud >= self.delta_bd) {
            return Err(ClassifyError::InvalidThresholds("need delta_ld >= delta_ud >= delta_bd".into()));
        }
        if self.g_max == Some(0) || self.n_win == Some(0) {
            return Err(ClassifyError::InvalidThresholds("g_max and n_win must be positive".into()));
        }
        if self.min_horizon < 2 {
            return Err(ClassifyError::InvalidThresholds("min_horizon must be at least 2".into()));
        }
        Ok(())
    }

    pub fn resolve(&self, horizon: u64) -> Result<ResolvedThresholds, ClassifyError> {
        self.validate()?;
        if horizon < self.min_horizon {
            return Err(ClassifyError::InsufficientHorizon { horizon, min: self.min_horizon });
        }
        let g_req = self.g_max.unwrap_or((horizon / 100).max(1));
        // statistics live on the positive-time set, whose horizon is H - 1
        let b = burn_in(horizon - 1).max(1) as f64;
        let g_safe = (1.0 / (self.delta_ld + 3.0 / b)).floor() as u64;
        Ok(ResolvedThresholds {
            delta_ld: self.delta_ld,
            delta_ud: self.delta_ud,
            delta_bd: self.delta_bd,
            g_max_requested: g_req,
            g_max: g_req.min(g_safe),
            n_win: self.n_win.unwrap_or((horizon / 100).max(1)).min(horizon - 1),
            min_horizon: self.min_horizon,
        })
    }
}

/// `2^{-1}, …, 2^{-8}` times `‖x‖` (times 1 for the zero vector), ascending.
pub fn default_epsilon_grid(x: &[Complex64]) -> Vec<f64> {
    let scale = euclidean_norm(x);
    let scale = if scale > 0.0 { scale } else { 1.0 };
    (1..=8).rev().map(|k| scale * 0.5f64.powi(k)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Flag {
    pub holds: bool,
    pub threshold: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonFlags {
    pub recurrent: Flag,
    pub reiteratively: Flag,
    pub u_frequently: Flag,
    pub frequently: Flag,
    pub uniformly: Flag,
}

impl EpsilonFlags {
    /// `uniformly ⇒ frequently ⇒ u_frequently ⇒ reiteratively ⇒ recurrent`.
    pub fn monotone(&self) -> bool {
        let imp = |a: Flag, b: Flag| !a.holds || b.holds;
        imp(self.uniformly, self.frequently)
            && imp(self.frequently, self.u_frequently)
            && imp(self.u_frequently, self.reiteratively)
            && imp(self.reiteratively, self.recurrent)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReturnSummary {
    /// Including time 0.
    pub count: u64,
    pub positive_count: u64,
    pub first_positive: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsilonRecord {
    pub epsilon: f64,
    pub returns: ReturnSummary,
    pub lower_density: PrefixDensity,
    pub upper_density: PrefixDensity,
    pub banach: BanachWindow,
    /// `max(banach ratio, running upper density)`, compared with `δ_bd`.
    pub reiterative_estimate: Density,
    /// Of the positive-time set; `None` if it is empty.
    pub syndetic_gap: Option<u64>,
    pub flags: EpsilonFlags,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VectorFlags {
    pub recurrent: bool,
    pub reiteratively: bool,
    pub u_frequently: bool,
    pub frequently: bool,
    pub uniformly: bool,
    /// Reiteratively recurrent with an orbit judged bounded.
    pub reiteratively_bounded: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecurrenceReport {
    pub vector_id: String,
    pub dim: usize,
    pub horizon: u64,
    pub horizon_effective: u64,
    pub epsilons: Vec<f64>,
    pub records: Vec<EpsilonRecord>,
    pub flags: VectorFlags,
    pub bounded_orbit: bool,
    pub orbit_norms: Boundedness,
    /// Distance from `x` to `span ℰ(T)`; `None` if the spectral data failed.
    pub eigen_span_residual: Option<f64>,
    pub thresholds: ResolvedThresholds,
    pub notes: Vec<String>,
}

/// A report together with the return sets it was computed from.
#[derive(Debug, Clone)]
pub struct Classification {
    pub report: RecurrenceReport,
    /// Full return sets (time 0 included), one per ε.
    pub return_sets: Vec<FiniteNatSet>,
    pub orbit: OrbitSegment,
}

fn check_epsilons(eps: &[f64]) -> Result<(), ClassifyError> {
    if eps.is_empty() || eps.iter().any(|e| !(e.is_finite() && *e > 0.0)) || eps.windows(2).any(|w| w[1] < w[0]) {
        return Err(ClassifyError::InvalidEpsilons);
    }
    Ok(())
}

fn record_for(epsilon: f64, r: &FiniteNatSet, th: &ResolvedThresholds) -> Result<EpsilonRecord, ClassifyError> {
    let q = r.positive_shift();
    let h = q.horizon();
    let lower = lower_density(&q, h)?;
    let upper = upper_density(&q, h)?;
    let banach = upper_banach_density(&q, th.n_win.min(h))?;
    let reiterative_estimate = banach.ratio.max(upper.running);
    let gap = syndetic_gap(&q).ok();
    let qf = |v: Density, d: f64| ratio_f64(v) >= d;
    let flags = EpsilonFlags {
        recurrent: Flag { holds: !q.is_empty(), threshold: 1.0 },
        reiteratively: Flag { holds: qf(reiterative_estimate, th.delta_bd), threshold: th.delta_bd },
        u_frequently: Flag { holds: qf(upper.running, th.delta_ud), threshold: th.delta_ud },
        frequently: Flag { holds: qf(lower.running, th.delta_ld), threshold: th.delta_ld },
        uniformly: Flag { holds: gap.is_some_and(|g| g <= th.g_max), threshold: th.g_max as f64 },
    };
    Ok(EpsilonRecord {
        epsilon,
        returns: ReturnSummary {
            count: r.len() as u64,
            positive_count: q.len() as u64,
            first_positive: q.elements().first().map(|m| m + 1),
        },
        lower_density: lower,
        upper_density: upper,
        banach,
        reiterative_estimate,
        syndetic_gap: gap,
        flags,
    })
}

/// Classifies `x` with spectral data computed once by the caller.
pub fn classify_with_spectral(
    t: &LinearOperator,
    spectral: Option<&SpectralData>,
    x: &[Complex64],
    epsilons: &[f64],
    horizon: u64,
    thresholds: &Thresholds,
) -> Result<Classification, ClassifyError> {
    check_epsilons(epsilons)?;
    let th = thresholds.resolve(horizon)?;
    let orbit = iterate(t, x, horizon)?;
    let mut notes = vec![format!(
        "finite-horizon verdicts over an epsilon grid of {} radii; each vector flag is the conjunction over the grid",
        epsilons.len()
    )];
    if orbit.overflow() {
        notes.push(format!("orbit norm exceeded the overflow cap after n = {}", orbit.horizon_effective()));
    }
    let mut records = Vec::with_capacity(epsilons.len());
    let mut sets = Vec::with_capacity(epsilons.len());
    for &e in epsilons {
        let r = return_set(&orbit, e)?;
        records.push(record_for(e, &r, &th)?);
        sets.push(r);
    }
    let all = |f: fn(&EpsilonFlags) -> Flag| records.iter().all(|r| f(&r.flags).holds);
    let x_norm = t.norm(x);
    let orbit_norms = boundedness(&orbit, Some(DEFAULT_POWER_BOUND * x_norm.max(f64::MIN_POSITIVE)));
    let bounded_orbit = orbit_norms.bounded_at_horizon && !orbit_norms.growth_detected;
    let reiteratively = all(|f| f.reiteratively);
    let flags = VectorFlags {
        recurrent: all(|f| f.recurrent),
        reiteratively,
        u_frequently: all(|f| f.u_frequently),
        frequently: all(|f| f.frequently),
        uniformly: all(|f| f.uniformly),
        reiteratively_bounded: reiteratively && bounded_orbit,
    };
    let eigen_span_residual = match spectral {
        Some(s) => Some(eigen_span_residual(x, s)?),
        None => {
            notes.push("spectral data unavailable; eigen-span residual not computed".into());
            None
        }
    };
    let report = RecurrenceReport {
        vector_id: String::new(),
        dim: t.dim(),
        horizon,
        horizon_effective: orbit.horizon_effective(),
        epsilons: epsilons.to_vec(),
        records,
        flags,
        bounded_orbit,
        orbit_norms,
        eigen_span_residual,
        thresholds: th,
        notes,
    };
    Ok(Classification { report, return_sets: sets, orbit })
}

pub fn classify_detailed(
    t: &LinearOperator,
    x: &[Complex64],
    epsilons: &[f64],
    horizon: u64,
    thresholds: &Thresholds,
) -> Result<Classification, ClassifyError> {
    let spectral = unimodular_eigenpairs(t, DEFAULT_TOL_UNIMOD).ok();
    classify_with_spectral(t, spectral.as_ref(), x, epsilons, horizon, thresholds)
}

pub fn classify_vector(
    t: &LinearOperator,
    x: &[Complex64],
    epsilons: &[f64],
    horizon: u64,
    thresholds: &Thresholds,
) -> Result<RecurrenceReport, ClassifyError> {
    Ok(classify_detailed(t, x, epsilons, horizon, thresholds)?.report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BirkhoffCheck {
    pub epsilon: f64,
    pub horizon: u64,
    pub horizon_effective: u64,
    /// Density of the full return set over `[0, H_eff]`.
    pub density: Density,
    pub density_value: f64,
    pub window_start: u64,
    pub window_len: u64,
    /// Mass of `B(x, ε)` under the uniform measure on the window's orbit points.
    pub window_mass: f64,
    pub gap: f64,
}

/// Return-set density against the ball mass of the empirical measure on the
/// best window of length `⌊(H_eff + 1)/2⌋`.
pub fn birkhoff_frequent_check(
    t: &LinearOperator,
    x: &[Complex64],
    epsilon: f64,
    horizon: u64,
    thresholds: &Thresholds,
) -> Result<BirkhoffCheck, ClassifyError> {
    check_epsilons(&[epsilon])?;
    thresholds.resolve(horizon)?;
    let orbit = iterate(t, x, horizon)?;
    let r = return_set(&orbit, epsilon)?;
    let h = orbit.horizon_effective();
    let density = Density::new(r.len() as u64, h + 1);
    let window_len = ((h + 1) / 2).saturating_sub(1);
    let window = best_banach_window(&r, window_len)?;
    let mu = empirical_from_window(&orbit, window.start, window_len)?;
    let window_mass = mu.mass(&Ball { center: x.to_vec(), radius: epsilon })?;
    let density_value = ratio_f64(density);
    Ok(BirkhoffCheck {
        epsilon,
        horizon,
        horizon_effective: h,
        density,
        density_value,
        window_start: window.start,
        window_len,
        window_mass,
        gap: (density_value - window_mass).abs(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenSpanEntry {
    pub index: usize,
    pub residual: f64,
    pub uniformly: bool,
    pub reiteratively_bounded: bool,
    pub in_span: bool,
    /// Flagged uniformly (or reiteratively with bounded orbit) ⇒ in the span.
    pub flagged_implies_span: Option<bool>,
    /// In the span ⇒ flagged uniformly.
    pub span_implies_uniform: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenSpanCheck {
    pub tolerance: f64,
    pub espan_dim: usize,
    pub entries: Vec<EigenSpanEntry>,
    pub flagged_implies_span: bool,
    pub span_implies_uniform: bool,
}

pub const DEFAULT_SPAN_TOLERANCE: f64 = 1e-6;

/// Both directions of "uniformly recurrent ⇔ in the unimodular eigen-span".
/// `epsilons = None` uses the default grid of each vector.
pub fn eigen_span_check(
    t: &LinearOperator,
    xs: &[Vec<Complex64>],
    epsilons: Option<&[f64]>,
    horizon: u64,
    thresholds: &Thresholds,
    tolerance: f64,
) -> Result<EigenSpanCheck, ClassifyError> {
    let spectral = unimodular_eigenpairs(t, DEFAULT_TOL_UNIMOD)?;
    let mut entries = Vec::with_capacity(xs.len());
    for (index, x) in xs.iter().enumerate() {
        let grid = match epsilons {
            Some(e) => e.to_vec(),
            None => default_epsilon_grid(x),
        };
        let c = classify_with_spectral(t, Some(&spectral), x, &grid, horizon, thresholds)?;
        let residual = c.report.eigen_span_residual.unwrap_or(f64::INFINITY);
        let f = c.report.flags;
        let in_span = residual <= tolerance;
        entries.push(EigenSpanEntry {
            index,
            residual,
            uniformly: f.uniformly,
            reiteratively_bounded: f.reiteratively_bounded,
            in_span,
            flagged_implies_span: (f.uniformly || f.reiteratively_bounded).then_some(in_span),
            span_implies_uniform: in_span.then_some(f.uniformly),
        });
    }
    Ok(EigenSpanCheck {
        tolerance,
        espan_dim: spectral.espan_dim(),
        flagged_implies_span: entries.iter().all(|e| e.flagged_implies_span != Some(false)),
        span_implies_uniform: entries.iter().all(|e| e.span_implies_uniform != Some(false)),
        entries,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProbeOptions {
    pub random_batteries: usize,
    pub seed: u64,
    /// Largest difference-set generator `B` that is sampled.
    pub max_size: usize,
}

impl Default for ProbeOptions {
    fn default() -> Self {
        Self { random_batteries: 8, seed: 0, max_size: 20_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeltaProbe {
    pub size: usize,
    /// `B` is large enough that pigeonhole forces `(B − B) ∩ R ≠ ∅`.
    pub guaranteed: bool,
    /// A pair `b_i < b_j` in `B` with `b_j − b_i` in the set.
    pub hit: Option<(u64, u64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UnimodularReturn {
    #[serde(skip)]
    pub set: FiniteNatSet,
    pub horizon: u64,
    pub size: usize,
    pub first_positive: Option<u64>,
    pub syndetic_gap: Option<u64>,
    /// Cells per angle in the pigeonhole argument.
    pub pigeonhole_cells: u64,
    pub probes: Vec<DeltaProbe>,
    pub all_probes_hit: bool,
}

/// `|e^{2πi n θ} − 1| = 2 |sin(π {nθ})|`, evaluated from the phase directly.
fn phase_distance(n: u64, theta: f64) -> f64 {
    let frac = (n as f64 * theta).rem_euclid(1.0);
    2.0 * (std::f64::consts::PI * frac).sin().abs()
}

/// `{n <= H : max_i |λ_iⁿ − 1| < ε}` for `λ_i = e^{2πiθ_i}`, with a battery
/// of difference-set hit tests standing in for membership in `Δ*`.
pub fn unimodular_return_set(
    angles_turns: &[f64],
    epsilon: f64,
    horizon: u64,
    opts: &ProbeOptions,
) -> Result<UnimodularReturn, ClassifyError> {
    check_epsilons(&[epsilon])?;
    let elements: Vec<u64> =
        (0..=horizon).filter(|&n| angles_turns.iter().all(|&th| phase_distance(n, th) < epsilon)).collect();
    let set = FiniteNatSet::new(horizon, elements)?;

    // arcs of length 2π/M < 2 asin(ε/2) have chords shorter than ε
    let cells: u64 = if epsilon >= 2.0 {
        1
    } else {
        (std::f64::consts::PI / (epsilon / 2.0).asin()).floor() as u64 + 1
    };
    let needed = (cells as u128).checked_pow(angles_turns.len() as u32).map(|c| c + 1);
    let population = horizon as u128 + 1;
    let (size, guaranteed) = match needed {
        Some(k) if k <= population && k <= opts.max_size as u128 => (k as usize, true),
        _ => (population.min(opts.max_size as u128) as usize, false),
    };

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut probes = Vec::with_capacity(opts.random_batteries);
    for _ in 0..opts.random_batteries.max(1) {
        let mut b: Vec<u64> =
            rand::seq::index::sample(&mut rng, population as usize, size).into_iter().map(|v| v as u64).collect();
        b.sort_unstable();
        probes.push(DeltaProbe { size, guaranteed, hit: hits_difference_set(&set, &b) });
    }
    Ok(UnimodularReturn {
        horizon,
        size: set.len(),
        first_positive: set.elements().iter().copied().find(|&n| n >= 1),
        syndetic_gap: syndetic_gap(&set).ok(),
        pigeonhole_cells: cells,
        all_probes_hit: probes.iter().all(|p| p.hit.is_some()),
        probes,
        set,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductCheck {
    pub epsilon: f64,
    pub horizon: u64,
    pub sum: RecurrenceReport,
    pub first: RecurrenceReport,
    pub second: RecurrenceReport,
    /// Return set of the sum equals the intersection of the part return sets.
    pub intersection_exact: bool,
    pub sum_return_count: usize,
    pub intersection_count: usize,
    pub sum_density: Density,
    pub product_of_densities: f64,
    /// When both parts are flagged reiteratively: whether the sum is flagged
    /// frequently.
    pub reiterative_parts_give_frequent_sum: Option<bool>,
}

pub fn product_recurrence_check(
    t1: &LinearOperator,
    x1: &[Complex64],
    t2: &LinearOperator,
    x2: &[Complex64],
    epsilon: f64,
    horizon: u64,
    thresholds: &Thresholds,
) -> Result<ProductCheck, ClassifyError> {
    let eps = [epsilon];
    let a = classify_detailed(t1, x1, &eps, horizon, thresholds)?;
    let b = classify_detailed(t2, x2, &eps, horizon, thresholds)?;
    let t = direct_sum(&[t1.clone(), t2.clone()])?;
    let x: Vec<Complex64> = x1.iter().chain(x2).copied().collect();
    let s = classify_detailed(&t, &x, &eps, horizon, thresholds)?;

    let rs = &s.return_sets[0];
    let (ra, rb) = (&a.return_sets[0], &b.return_sets[0]);
    let h = rs.horizon().min(ra.horizon()).min(rb.horizon());
    let clip = |r: &FiniteNatSet| -> Vec<u64> { r.elements().iter().copied().take_while(|&n| n <= h).collect() };
    let inter: Vec<u64> = {
        let (ea, eb) = (clip(ra), clip(rb));
        ea.into_iter().filter(|n| eb.binary_search(n).is_ok()).collect()
    };
    let sum_elems = clip(rs);
    let dens = |k: usize| k as f64 / (h + 1) as f64;
    let both_reiterative = a.report.flags.reiteratively && b.report.flags.reiteratively;
    Ok(ProductCheck {
        epsilon,
        horizon,
        intersection_exact: sum_elems == inter,
        sum_return_count: sum_elems.len(),
        intersection_count: inter.len(),
        sum_density: Density::new(sum_elems.len() as u64, h + 1),
        product_of_densities: dens(clip(ra).len()) * dens(clip(rb).len()),
        reiterative_parts_give_frequent_sum: both_reiterative.then_some(s.report.flags.frequently),
        sum: s.report,
        first: a.report,
        second: b.report,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InverseCheck {
    pub forward: RecurrenceReport,
    pub backward: RecurrenceReport,
    /// Per ε: the return sets under `T` and `T⁻¹` coincide.
    pub identical_return_sets: Vec<bool>,
    pub flags_agree: bool,
}

pub fn inverse_recurrence_check(
    t: &LinearOperator,
    x: &[Complex64],
    epsilons: &[f64],
    horizon: u64,
    thresholds: &Thresholds,
) -> Result<InverseCheck, ClassifyError> {
    let inv = t.inverse()?;
    let f = classify_detailed(t, x, epsilons, horizon, thresholds)?;
    let b = classify_detailed(&inv, x, epsilons, horizon, thresholds)?;
    let identical_return_sets = f.return_sets.iter().zip(&b.return_sets).map(|(p, q)| p == q).collect();
    let flags_agree = f.report.flags == b.report.flags;
    Ok(InverseCheck { forward: f.report, backward: b.report, identical_return_sets, flags_agree })
}
