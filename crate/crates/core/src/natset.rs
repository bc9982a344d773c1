//! Finite-horizon subsets of the naturals and their density statistics.
//!
//! A [`FiniteNatSet`] records membership exactly on `[0, horizon]` and says
//! nothing about larger integers. Every verdict computed here is therefore an
//! "at horizon" verdict. Densities are exact rationals built from integer
//! counts.

use std::collections::{BTreeMap, HashSet};

use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Exact density value `count / length`.
pub type Density = Ratio<u64>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NatSetError {
    #[error("requested length {requested} exceeds horizon {horizon}")]
    HorizonExceeded { requested: u64, horizon: u64 },
    #[error("elements must be strictly increasing (violated at index {index})")]
    NotStrictlyIncreasing { index: usize },
    #[error("element {element} exceeds horizon {horizon}")]
    ElementExceedsHorizon { element: u64, horizon: u64 },
    #[error("invalid run [{start}, {end}]")]
    InvalidRun { start: u64, end: u64 },
    #[error("the set is empty, no gap is defined")]
    EmptySet,
    #[error("witness size {size} is below the minimum {min}")]
    InvalidSize { size: usize, min: usize },
    #[error("family sample must contain at least one member")]
    EmptyFamily,
    #[error("witness search gave up after {nodes} nodes")]
    SearchBudgetExceeded { nodes: u64 },
}

/// A subset of `[0, horizon]` stored as a strictly increasing list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "NatSetRepr")]
pub struct FiniteNatSet {
    horizon: u64,
    elements: Vec<u64>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum NatSetRepr {
    Elements { horizon: u64, elements: Vec<u64> },
    Runs { horizon: u64, runs: Vec<[u64; 2]> },
}

impl TryFrom<NatSetRepr> for FiniteNatSet {
    type Error = NatSetError;

    fn try_from(repr: NatSetRepr) -> Result<Self, Self::Error> {
        match repr {
            NatSetRepr::Elements { horizon, elements } => FiniteNatSet::new(horizon, elements),
            NatSetRepr::Runs { horizon, runs } => FiniteNatSet::from_runs(horizon, &runs),
        }
    }
}

impl FiniteNatSet {
    pub fn new(horizon: u64, elements: Vec<u64>) -> Result<Self, NatSetError> {
        for (index, pair) in elements.windows(2).enumerate() {
            if pair[0] >= pair[1] {
                return Err(NatSetError::NotStrictlyIncreasing { index: index + 1 });
            }
        }
        if let Some(&last) = elements.last() {
            if last > horizon {
                return Err(NatSetError::ElementExceedsHorizon { element: last, horizon });
            }
        }
        Ok(Self { horizon, elements })
    }

    /// Builds a set from arbitrary elements, sorting and removing duplicates.
    pub fn from_unsorted<I>(horizon: u64, elements: I) -> Result<Self, NatSetError>
    where
        I: IntoIterator<Item = u64>,
    {
        let mut elements: Vec<u64> = elements.into_iter().collect();
        elements.sort_unstable();
        elements.dedup();
        Self::new(horizon, elements)
    }

    /// `{n <= horizon : pred(n)}`.
    pub fn from_predicate<F>(horizon: u64, mut pred: F) -> Self
    where
        F: FnMut(u64) -> bool,
    {
        let elements = (0..=horizon).filter(|&n| pred(n)).collect();
        Self { horizon, elements }
    }

    /// Union of inclusive runs `[a, b]`, clipped to the horizon. Runs may
    /// overlap and come in any order.
    pub fn from_runs(horizon: u64, runs: &[[u64; 2]]) -> Result<Self, NatSetError> {
        let mut elements = Vec::new();
        for &[start, end] in runs {
            if start > end {
                return Err(NatSetError::InvalidRun { start, end });
            }
            if start > horizon {
                continue;
            }
            elements.extend(start..=end.min(horizon));
        }
        Self::from_unsorted(horizon, elements)
    }

    pub fn full(horizon: u64) -> Self {
        Self { horizon, elements: (0..=horizon).collect() }
    }

    pub fn empty(horizon: u64) -> Self {
        Self { horizon, elements: Vec::new() }
    }

    pub fn horizon(&self) -> u64 {
        self.horizon
    }

    pub fn elements(&self) -> &[u64] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn contains(&self, n: u64) -> bool {
        self.elements.binary_search(&n).is_ok()
    }

    /// `card(A ∩ [0, n])`.
    pub fn count_upto(&self, n: u64) -> u64 {
        self.elements.partition_point(|&e| e <= n) as u64
    }

    /// `card(A ∩ [a, b])`, zero when `a > b`.
    pub fn count_in(&self, a: u64, b: u64) -> u64 {
        if a > b {
            return 0;
        }
        let lo = self.elements.partition_point(|&e| e < a);
        let hi = self.elements.partition_point(|&e| e <= b);
        (hi - lo) as u64
    }

    pub fn is_subset(&self, other: &FiniteNatSet) -> bool {
        self.elements.iter().all(|&e| other.contains(e))
    }

    pub fn intersection(&self, other: &FiniteNatSet) -> FiniteNatSet {
        let horizon = self.horizon.min(other.horizon);
        let (mut i, mut j) = (0, 0);
        let mut out = Vec::new();
        while i < self.elements.len() && j < other.elements.len() {
            let (a, b) = (self.elements[i], other.elements[j]);
            if a == b {
                if a <= horizon {
                    out.push(a);
                }
                i += 1;
                j += 1;
            } else if a < b {
                i += 1;
            } else {
                j += 1;
            }
        }
        FiniteNatSet { horizon, elements: out }
    }

    pub fn intersects(&self, other: &FiniteNatSet) -> bool {
        let (mut i, mut j) = (0, 0);
        while i < self.elements.len() && j < other.elements.len() {
            match self.elements[i].cmp(&other.elements[j]) {
                std::cmp::Ordering::Equal => return true,
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
            }
        }
        false
    }

    /// Positive-time part re-indexed from zero: `{n - 1 : n ∈ A, n >= 1}` on
    /// `[0, horizon - 1]`. For a return set `N(x, U)` this is `N(Tx, U)`.
    pub fn positive_shift(&self) -> FiniteNatSet {
        let elements = self.elements.iter().filter(|&&e| e >= 1).map(|&e| e - 1).collect();
        FiniteNatSet { horizon: self.horizon.saturating_sub(1), elements }
    }

    fn check_len(&self, n: u64) -> Result<(), NatSetError> {
        if n > self.horizon {
            Err(NatSetError::HorizonExceeded { requested: n, horizon: self.horizon })
        } else {
            Ok(())
        }
    }
}

/// Prefix density `card(A ∩ [0, n]) / (n + 1)` at `n`, together with its
/// running infimum or supremum over `n' ∈ [burn_in, n]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrefixDensity {
    pub n: u64,
    pub burn_in: u64,
    pub value: Density,
    pub running: Density,
}

/// Burn-in start for running extrema over prefixes ending at `n`.
pub fn burn_in(n: u64) -> u64 {
    n / 10
}

fn cross_less(a: (u64, u64), b: (u64, u64)) -> bool {
    (a.0 as u128) * (b.1 as u128) < (b.0 as u128) * (a.1 as u128)
}

fn prefix_extremum(a: &FiniteNatSet, n: u64, take_max: bool) -> Result<PrefixDensity, NatSetError> {
    a.check_len(n)?;
    let start = burn_in(n);
    let mut count = a.count_upto(start);
    let mut idx = count as usize;
    let mut best = (count, start + 1);
    for m in start + 1..=n {
        if idx < a.elements.len() && a.elements[idx] == m {
            count += 1;
            idx += 1;
        }
        let cur = (count, m + 1);
        let better = if take_max { cross_less(best, cur) } else { cross_less(cur, best) };
        if better {
            best = cur;
        }
    }
    Ok(PrefixDensity {
        n,
        burn_in: start,
        value: Ratio::new(count, n + 1),
        running: Ratio::new(best.0, best.1),
    })
}

/// Lower density at horizon `n`; `running` is the infimum over the burn-in range.
pub fn lower_density(a: &FiniteNatSet, n: u64) -> Result<PrefixDensity, NatSetError> {
    prefix_extremum(a, n, false)
}

/// Upper density at horizon `n`; `running` is the supremum over the burn-in range.
pub fn upper_density(a: &FiniteNatSet, n: u64) -> Result<PrefixDensity, NatSetError> {
    prefix_extremum(a, n, true)
}

/// Best window `[start, start + window_len]` for upper Banach density.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BanachWindow {
    pub window_len: u64,
    pub start: u64,
    pub count: u64,
    pub ratio: Density,
}

/// `max_m card(A ∩ [m, m + N]) / (N + 1)` over `m ∈ [0, horizon - N]`, with
/// the smallest maximizing `m`. One sliding pass.
pub fn upper_banach_density(a: &FiniteNatSet, window_len: u64) -> Result<BanachWindow, NatSetError> {
    a.check_len(window_len)?;
    let elems = &a.elements;
    // lo: first index with element >= m; hi: first index with element > m + N.
    let mut lo = 0usize;
    let mut hi = elems.partition_point(|&e| e <= window_len);
    let mut best_count = hi as u64;
    let mut best_start = 0;
    for m in 1..=a.horizon - window_len {
        if lo < elems.len() && elems[lo] == m - 1 {
            lo += 1;
        }
        if hi < elems.len() && elems[hi] == m + window_len {
            hi += 1;
        }
        let count = (hi - lo) as u64;
        if count > best_count {
            best_count = count;
            best_start = m;
        }
    }
    Ok(BanachWindow {
        window_len,
        start: best_start,
        count: best_count,
        ratio: Ratio::new(best_count, window_len + 1),
    })
}

/// Density diagnostics of one set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensitySummary {
    pub horizon: u64,
    pub size: u64,
    pub lower_at_horizon: Density,
    pub upper_at_horizon: Density,
    pub banach_upper: BTreeMap<u64, BanachWindow>,
    pub prefix_profile: Vec<(u64, Density)>,
}

/// Summary at the set's own horizon. `profile_points` evenly spaced prefix
/// samples are recorded (the horizon itself is always included).
pub fn summarize(
    a: &FiniteNatSet,
    window_lens: &[u64],
    profile_points: usize,
) -> Result<DensitySummary, NatSetError> {
    let h = a.horizon;
    let lower = lower_density(a, h)?;
    let upper = upper_density(a, h)?;
    let mut banach_upper = BTreeMap::new();
    for &n in window_lens {
        banach_upper.insert(n, upper_banach_density(a, n)?);
    }
    let mut prefix_profile = Vec::new();
    if profile_points > 0 {
        let step = (h / profile_points as u64).max(1);
        let mut n = step - 1;
        while n < h {
            prefix_profile.push((n, Ratio::new(a.count_upto(n), n + 1)));
            n += step;
        }
        prefix_profile.push((h, Ratio::new(a.count_upto(h), h + 1)));
    }
    Ok(DensitySummary {
        horizon: h,
        size: a.len() as u64,
        lower_at_horizon: lower.running,
        upper_at_horizon: upper.running,
        banach_upper,
        prefix_profile,
    })
}

/// Largest gap between consecutive elements, counting the gap from 0 to the
/// first element and from the last element to the horizon.
pub fn syndetic_gap(a: &FiniteNatSet) -> Result<u64, NatSetError> {
    let first = *a.elements.first().ok_or(NatSetError::EmptySet)?;
    let last = *a.elements.last().ok_or(NatSetError::EmptySet)?;
    let inner = a.elements.windows(2).map(|w| w[1] - w[0]).max().unwrap_or(0);
    Ok(inner.max(first).max(a.horizon - last))
}

/// `A` meets every window of `m + 1` consecutive integers inside the horizon.
pub fn is_syndetic_with_bound(a: &FiniteNatSet, m: u64) -> bool {
    syndetic_gap(a).map(|g| g <= m + 1).unwrap_or(false)
}

/// Node budget for the witness searches.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchLimits {
    pub max_nodes: u64,
}

impl Default for SearchLimits {
    fn default() -> Self {
        Self { max_nodes: 10_000_000 }
    }
}

pub fn delta_witness_search(a: &FiniteNatSet, size: usize, bound: u64) -> Result<Option<Vec<u64>>, NatSetError> {
    delta_witness_search_with(a, size, bound, SearchLimits::default())
}

/// Looks for `B ⊂ [0, bound]`, `|B| = size`, whose positive differences all
/// lie in `A`. Differences are translation invariant, so `0 ∈ B` is assumed.
/// Candidates are tried in increasing order, so the first branch explored is
/// the greedy one. `Ok(None)` means the bounded search space holds no witness.
pub fn delta_witness_search_with(
    a: &FiniteNatSet,
    size: usize,
    bound: u64,
    limits: SearchLimits,
) -> Result<Option<Vec<u64>>, NatSetError> {
    if size < 2 {
        return Err(NatSetError::InvalidSize { size, min: 2 });
    }
    a.check_len(bound)?;
    let candidates: Vec<u64> = a.elements.iter().copied().filter(|&e| e >= 1 && e <= bound).collect();
    let mut chosen = vec![0u64];
    let mut nodes = 0u64;

    fn dfs(
        a: &FiniteNatSet,
        candidates: &[u64],
        from: usize,
        chosen: &mut Vec<u64>,
        size: usize,
        nodes: &mut u64,
        limits: SearchLimits,
    ) -> Result<bool, NatSetError> {
        if chosen.len() == size {
            return Ok(true);
        }
        for (i, &c) in candidates.iter().enumerate().skip(from) {
            *nodes += 1;
            if *nodes > limits.max_nodes {
                return Err(NatSetError::SearchBudgetExceeded { nodes: *nodes });
            }
            // 0 is always chosen, so c itself is a difference and already in A.
            if chosen[1..].iter().all(|&b| a.contains(c - b)) {
                chosen.push(c);
                if dfs(a, candidates, i + 1, chosen, size, nodes, limits)? {
                    return Ok(true);
                }
                chosen.pop();
            }
        }
        Ok(false)
    }

    if dfs(a, &candidates, 0, &mut chosen, size, &mut nodes, limits)? {
        Ok(Some(chosen))
    } else {
        Ok(None)
    }
}

/// Generators `x_1 < … < x_k` and their finite sums.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IpWitness {
    pub generators: Vec<u64>,
    pub finite_sums: Vec<u64>,
}

pub fn ip_witness_search(a: &FiniteNatSet, size: usize, bound: u64) -> Result<Option<IpWitness>, NatSetError> {
    ip_witness_search_with(a, size, bound, SearchLimits::default())
}

/// Looks for positive `x_1 < … < x_k <= bound` whose `2^k - 1` nonempty
/// finite sums are pairwise distinct and all lie in `A`. Sums beyond the
/// horizon count as misses.
pub fn ip_witness_search_with(
    a: &FiniteNatSet,
    size: usize,
    bound: u64,
    limits: SearchLimits,
) -> Result<Option<IpWitness>, NatSetError> {
    if size < 1 {
        return Err(NatSetError::InvalidSize { size, min: 1 });
    }
    a.check_len(bound)?;
    let candidates: Vec<u64> = a.elements.iter().copied().filter(|&e| e >= 1 && e <= bound).collect();
    let mut generators = Vec::new();
    let mut sums: Vec<u64> = Vec::new();
    let mut nodes = 0u64;

    #[allow(clippy::too_many_arguments)]
    fn dfs(
        a: &FiniteNatSet,
        candidates: &[u64],
        from: usize,
        generators: &mut Vec<u64>,
        sums: &mut Vec<u64>,
        size: usize,
        nodes: &mut u64,
        limits: SearchLimits,
    ) -> Result<bool, NatSetError> {
        if generators.len() == size {
            return Ok(true);
        }
        for (i, &x) in candidates.iter().enumerate().skip(from) {
            *nodes += 1;
            if *nodes > limits.max_nodes {
                return Err(NatSetError::SearchBudgetExceeded { nodes: *nodes });
            }
            let existing: HashSet<u64> = sums.iter().copied().collect();
            let fresh: Vec<u64> = std::iter::once(x).chain(sums.iter().map(|&s| s + x)).collect();
            let ok = fresh.iter().all(|&s| a.contains(s) && !existing.contains(&s));
            if ok {
                let prev = sums.len();
                generators.push(x);
                sums.extend(fresh);
                if dfs(a, candidates, i + 1, generators, sums, size, nodes, limits)? {
                    return Ok(true);
                }
                sums.truncate(prev);
                generators.pop();
            }
        }
        Ok(false)
    }

    if dfs(a, &candidates, 0, &mut generators, &mut sums, size, &mut nodes, limits)? {
        sums.sort_unstable();
        Ok(Some(IpWitness { generators, finite_sums: sums }))
    } else {
        Ok(None)
    }
}

/// `A ∩ B ≠ ∅` for every sampled member `B`.
pub fn dual_hit_test(a: &FiniteNatSet, members: &[FiniteNatSet]) -> Result<bool, NatSetError> {
    if members.is_empty() {
        return Err(NatSetError::EmptyFamily);
    }
    Ok(members.iter().all(|b| a.intersects(b)))
}

/// `(B - B) ∩ [1, horizon]` for a finite `B`.
pub fn difference_set(b: &[u64], horizon: u64) -> FiniteNatSet {
    let mut diffs = Vec::new();
    for (i, &x) in b.iter().enumerate() {
        for &y in &b[i + 1..] {
            let d = x.abs_diff(y);
            if d >= 1 && d <= horizon {
                diffs.push(d);
            }
        }
    }
    FiniteNatSet::from_unsorted(horizon, diffs).expect("differences are clipped to the horizon")
}

/// Dual hit test against `(B - B) ∩ ℕ` without materializing the difference
/// set. Returns the first witnessing pair `(b_i, b_j)`, `b_i < b_j`, with
/// `b_j - b_i ∈ A`.
pub fn hits_difference_set(a: &FiniteNatSet, b: &[u64]) -> Option<(u64, u64)> {
    let mut sorted = b.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    for (i, &x) in sorted.iter().enumerate() {
        for &y in &sorted[i + 1..] {
            if a.contains(y - x) {
                return Some((x, y));
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    fn evens(h: u64) -> FiniteNatSet {
        FiniteNatSet::from_predicate(h, |n| n % 2 == 0)
    }

    fn odds(h: u64) -> FiniteNatSet {
        FiniteNatSet::from_predicate(h, |n| n % 2 == 1)
    }

    fn factorial_blocks(h: u64) -> FiniteNatSet {
        let mut runs = Vec::new();
        let mut f = 1u64;
        for k in 1..=7u64 {
            f *= k;
            runs.push([f, f + k]);
        }
        FiniteNatSet::from_runs(h, &runs).unwrap()
    }

    fn brute_banach(a: &FiniteNatSet, n: u64) -> (u64, u64) {
        let mut best = (0, 0);
        for m in 0..=a.horizon() - n {
            let c = (m..=m + n).filter(|&k| a.contains(k)).count() as u64;
            if c > best.0 {
                best = (c, m);
            }
        }
        best
    }

    #[test]
    fn rejects_malformed_sets() {
        assert_eq!(
            FiniteNatSet::new(10, vec![1, 1]),
            Err(NatSetError::NotStrictlyIncreasing { index: 1 })
        );
        assert_eq!(
            FiniteNatSet::new(3, vec![1, 4]),
            Err(NatSetError::ElementExceedsHorizon { element: 4, horizon: 3 })
        );
        assert!(FiniteNatSet::from_runs(10, &[[5, 2]]).is_err());
    }

    #[test]
    fn lower_density_examples() {
        let d = lower_density(&evens(9999), 9999).unwrap();
        assert_eq!(d.value, Ratio::new(1, 2));
        assert_eq!(d.burn_in, 999);

        let full = FiniteNatSet::full(500);
        let d = lower_density(&full, 500).unwrap();
        assert_eq!(d.value, Ratio::from_integer(1));
        assert_eq!(d.running, Ratio::from_integer(1));

        let blocks = factorial_blocks(5040);
        let d = lower_density(&blocks, 5040).unwrap();
        assert_eq!(d.value, Ratio::new(27, 5041));
        assert!((d.value.numer() * 10000 / d.value.denom()) == 53);
    }

    #[test]
    fn horizon_exceeded() {
        let a = evens(10);
        assert_eq!(
            lower_density(&a, 11),
            Err(NatSetError::HorizonExceeded { requested: 11, horizon: 10 })
        );
        assert!(upper_density(&a, 11).is_err());
        assert!(upper_banach_density(&a, 11).is_err());
    }

    #[test]
    fn upper_density_examples() {
        let d = upper_density(&evens(9999), 9999).unwrap();
        assert_eq!(d.value, Ratio::new(1, 2));
        // even n gives (n/2 + 1)/(n + 1), largest at the first even n past the burn-in
        assert_eq!(d.running, Ratio::new(501, 1001));

        let d = upper_density(&FiniteNatSet::empty(100), 100).unwrap();
        assert_eq!(d.value, Ratio::from_integer(0));
        assert_eq!(d.running, Ratio::from_integer(0));

        let h = 1u64 << 14;
        let a = FiniteNatSet::from_predicate(h, |n| n >= 1 && (63 - n.leading_zeros()) % 2 == 0);
        let d = upper_density(&a, h).unwrap();
        let mut best = (0u64, 1u64);
        let mut count = 0;
        for n in 0..=h {
            if a.contains(n) {
                count += 1;
            }
            if n >= h / 10 && count * best.1 > best.0 * (n + 1) {
                best = (count, n + 1);
            }
        }
        assert_eq!(d.running, Ratio::new(best.0, best.1));
        assert_eq!(d.value, Ratio::new(count, h + 1));
    }

    #[test]
    fn upper_banach_examples() {
        let w = upper_banach_density(&factorial_blocks(5040), 6).unwrap();
        assert_eq!((w.ratio, w.start), (Ratio::from_integer(1), 720));
        assert_eq!(brute_banach(&factorial_blocks(5040), 6), (7, 720));

        let w = upper_banach_density(&evens(10_000), 100).unwrap();
        assert_eq!(w.ratio, Ratio::new(51, 101));
        assert_eq!(w.start, 0);

        let w = upper_banach_density(&FiniteNatSet::empty(50), 7).unwrap();
        assert_eq!((w.ratio, w.start), (Ratio::from_integer(0), 0));

        let w = upper_banach_density(&evens(9), 9).unwrap();
        assert_eq!((w.count, w.start), (5, 0));
    }

    #[test]
    fn syndetic_gap_examples() {
        let threes = FiniteNatSet::from_predicate(999, |n| n % 3 == 0);
        assert_eq!(syndetic_gap(&threes), Ok(3));
        assert!(is_syndetic_with_bound(&threes, 2));
        assert!(!is_syndetic_with_bound(&threes, 1));

        // |i^n - 1| < 0.5 exactly when 4 | n
        let fours = FiniteNatSet::from_predicate(1000, |n| n % 4 == 0);
        assert_eq!(syndetic_gap(&fours), Ok(4));

        let dyadic = FiniteNatSet::from_unsorted(8192, (0..=13).map(|k| 1u64 << k)).unwrap();
        assert_eq!(syndetic_gap(&dyadic), Ok(4096));
        assert_eq!(syndetic_gap(&FiniteNatSet::empty(5)), Err(NatSetError::EmptySet));
    }

    #[test]
    fn delta_witness_examples() {
        assert_eq!(delta_witness_search(&evens(100), 4, 100).unwrap(), Some(vec![0, 2, 4, 6]));
        assert_eq!(delta_witness_search(&odds(50), 3, 50).unwrap(), None);
        assert_eq!(
            delta_witness_search(&FiniteNatSet::full(30), 5, 30).unwrap(),
            Some(vec![0, 1, 2, 3, 4])
        );
        assert!(matches!(
            delta_witness_search(&evens(10), 1, 10),
            Err(NatSetError::InvalidSize { size: 1, min: 2 })
        ));
    }

    #[test]
    fn odd_differences_exhaustive_oracle() {
        let a = odds(50);
        for x in 0..=50u64 {
            for y in x + 1..=50 {
                for z in y + 1..=50 {
                    let all_odd = [y - x, z - y, z - x].iter().all(|d| a.contains(*d));
                    assert!(!all_odd);
                }
            }
        }
    }

    #[test]
    fn ip_witness_examples() {
        let w = ip_witness_search(&FiniteNatSet::full(100), 3, 100).unwrap().unwrap();
        assert_eq!(w.generators, vec![1, 2, 4]);
        assert_eq!(w.finite_sums, (1..=7).collect::<Vec<_>>());

        let w = ip_witness_search(&evens(100), 3, 100).unwrap().unwrap();
        assert_eq!(w.generators, vec![2, 4, 8]);

        assert_eq!(ip_witness_search(&odds(50), 2, 50).unwrap(), None);
        // exhaustive oracle over pairs
        let a = odds(50);
        let any = (1..=50u64).any(|x| (x + 1..=50).any(|y| a.contains(x) && a.contains(y) && a.contains(x + y)));
        assert!(!any);
    }

    #[test]
    fn search_budget_is_reported() {
        let limits = SearchLimits { max_nodes: 3 };
        assert!(matches!(
            delta_witness_search_with(&odds(1000), 3, 1000, limits),
            Err(NatSetError::SearchBudgetExceeded { .. })
        ));
    }

    #[test]
    fn dual_hit_examples() {
        let h = 300;
        let progressions: Vec<FiniteNatSet> =
            (0..3).map(|r| FiniteNatSet::from_predicate(h, |n| n % 3 == r)).collect();
        assert_eq!(dual_hit_test(&evens(h), &progressions), Ok(true));
        assert_eq!(dual_hit_test(&FiniteNatSet::empty(h), &progressions), Ok(false));
        assert_eq!(dual_hit_test(&FiniteNatSet::full(h), &progressions), Ok(true));
        assert_eq!(dual_hit_test(&evens(h), &[]), Err(NatSetError::EmptyFamily));
    }

    #[test]
    fn difference_sets() {
        let d = difference_set(&[0, 3, 7], 100);
        assert_eq!(d.elements(), &[3, 4, 7]);
        assert_eq!(hits_difference_set(&odds(20), &[0, 3, 7]), Some((0, 3)));
        assert_eq!(hits_difference_set(&evens(20), &[0, 3]), None);
    }

    #[test]
    fn json_forms() {
        let a: FiniteNatSet = serde_json::from_str(r#"{"horizon": 10, "elements": [1, 4, 9]}"#).unwrap();
        assert_eq!(a.elements(), &[1, 4, 9]);
        let b: FiniteNatSet = serde_json::from_str(r#"{"horizon": 10, "runs": [[2, 4], [8, 12]]}"#).unwrap();
        assert_eq!(b.elements(), &[2, 3, 4, 8, 9, 10]);
        assert!(serde_json::from_str::<FiniteNatSet>(r#"{"horizon": 3, "elements": [5]}"#).is_err());
        let back: FiniteNatSet = serde_json::from_str(&serde_json::to_string(&b).unwrap()).unwrap();
        assert_eq!(back, b);
    }

    #[test]
    fn positive_shift_reindexes() {
        let a = FiniteNatSet::new(8, vec![0, 4, 8]).unwrap();
        let p = a.positive_shift();
        assert_eq!(p.horizon(), 7);
        assert_eq!(p.elements(), &[3, 7]);
    }

    #[test]
    fn summary_profile_ends_at_horizon() {
        let s = summarize(&evens(99), &[9, 49], 4).unwrap();
        assert_eq!(s.prefix_profile.last().unwrap().0, 99);
        assert_eq!(s.banach_upper[&9].ratio, Ratio::new(5, 10));
        assert_eq!(s.size, 50);
    }
}
