use proptest::prelude::*;
use recurlab::classify::{
    classify_detailed, classify_vector, default_epsilon_grid, product_recurrence_check, Thresholds,
};
use recurlab::empmeasure::{
    covariance, empirical_from_window, invariance_defect, mixture, moments, symmetrize, Ball, EmpiricalMeasure,
};
use recurlab::linop::{direct_sum, realize, LinearOperator, OperatorSpec};
use recurlab::natset::{
    is_syndetic_with_bound, lower_density, syndetic_gap, upper_banach_density, Density, FiniteNatSet,
};
use recurlab::orbit::iterate;
use recurlab::Complex64;

fn diag(turns: Vec<f64>) -> LinearOperator {
    realize(&OperatorSpec::DiagonalUnimodular { angles_turns: turns }).unwrap()
}

fn nat_set(max_h: u64) -> impl Strategy<Value = FiniteNatSet> {
    (10..max_h, 0.0f64..0.6, any::<u64>()).prop_map(|(h, p, seed)| {
        // cheap deterministic hash so sets are clumpy rather than uniform
        FiniteNatSet::from_predicate(h, |n| {
            let v = (n / 7).wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(seed).rotate_left(17);
            (v % 1000) as f64 / 1000.0 < p
        })
    })
}

fn complex_vec(d: usize) -> impl Strategy<Value = Vec<Complex64>> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0).prop_map(|(a, b)| Complex64::new(a, b)), d)
}

fn quick() -> Thresholds {
    Thresholds { min_horizon: 500, ..Thresholds::default() }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn banach_window_is_a_maximum(a in nat_set(600), frac in 0.0f64..1.0) {
        let n = ((a.horizon() as f64) * frac) as u64;
        let w = upper_banach_density(&a, n).unwrap();
        let best = (0..=a.horizon() - n).map(|m| a.count_in(m, m + n)).max().unwrap();
        prop_assert_eq!(w.count, best);
        prop_assert_eq!(a.count_in(w.start, w.start + n), best);
        prop_assert!((0..w.start).all(|m| a.count_in(m, m + n) < best));
        prop_assert_eq!(w.ratio, Density::new(best, n + 1));
    }

    #[test]
    fn lower_density_never_exceeds_banach(a in nat_set(600)) {
        let h = a.horizon();
        let lower = lower_density(&a, h).unwrap();
        let banach = upper_banach_density(&a, h / 10).unwrap();
        prop_assert!(lower.running <= lower.value);
        prop_assert!(lower.value <= Density::new(a.len() as u64, h + 1));
        prop_assert!(banach.ratio >= Density::new(a.count_upto(h).min(banach.count), h / 10 + 1) || banach.count == 0);
    }

    #[test]
    fn syndetic_gap_is_the_tightest_bound(a in nat_set(400)) {
        if let Ok(g) = syndetic_gap(&a) {
            prop_assert!(is_syndetic_with_bound(&a, g.saturating_sub(1)));
            if g >= 2 {
                prop_assert!(!is_syndetic_with_bound(&a, g - 2));
            }
        } else {
            prop_assert!(a.is_empty());
        }
    }

    #[test]
    fn window_measures_obey_the_boundary_bound(
        turns in prop::collection::vec(0.0f64..1.0, 1..4),
        x_seed in complex_vec(3),
        m in 0u64..300,
        n in 0u64..300,
        radii in prop::collection::vec(0.01f64..2.0, 1..8),
    ) {
        let d = turns.len();
        let t = diag(turns);
        let x = &x_seed[..d];
        let orbit = iterate(&t, x, 600).unwrap();
        let mu = empirical_from_window(&orbit, m, n).unwrap();
        let balls: Vec<Ball> = radii
            .iter()
            .enumerate()
            .map(|(k, &r)| Ball { center: orbit.point((m + 37 * k as u64) % 600).to_vec(), radius: r })
            .collect();
        let defect = invariance_defect(&t, &mu, &balls).unwrap();
        prop_assert!(defect <= 2.0 / (n + 1) as f64, "defect {} N {}", defect, n);
        prop_assert!((mu.total_weight() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn covariance_trace_is_the_second_moment(atoms in prop::collection::vec(complex_vec(3), 1..12)) {
        let k = atoms.len();
        let ws: Vec<f64> = (1..=k).map(|i| i as f64).collect();
        let mu = EmpiricalMeasure::normalized(3, atoms, ws).unwrap();
        let s = covariance(&mu);
        let m = moments(&mu);
        prop_assert!((s.trace() - m.second_moment).abs() <= 1e-12 * m.second_moment.max(1e-300));
        prop_assert!(s.hermitian_defect() <= 1e-12);
        prop_assert!(s.eigenvalues()[0] >= -1e-10);
    }

    #[test]
    fn symmetrize_centers_and_keeps_energy(atoms in prop::collection::vec(complex_vec(2), 1..6), l in 2u32..9) {
        let k = atoms.len();
        let mu = EmpiricalMeasure::normalized(2, atoms, vec![1.0; k]).unwrap();
        let nu = symmetrize(&mu, l);
        let (a, b) = (moments(&mu), moments(&nu));
        prop_assert!((a.second_moment - b.second_moment).abs() <= 1e-12 * a.second_moment.max(1e-300));
        let e: f64 = b.expectation.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        prop_assert!(e <= 1e-12 * a.second_moment.sqrt().max(1e-300));
    }

    #[test]
    fn mixtures_are_probability_measures(ws in prop::collection::vec(0.0f64..5.0, 1..10)) {
        prop_assume!(ws.iter().any(|&w| w > 0.0));
        let parts: Vec<EmpiricalMeasure> =
            (0..ws.len()).map(|i| EmpiricalMeasure::dirac(&[Complex64::new(i as f64, 0.0)])).collect();
        let m = mixture(&parts, &ws).unwrap();
        prop_assert!((m.total_weight() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn direct_sum_orbits_are_bitwise_concatenations(
        a in prop::collection::vec(0.0f64..1.0, 1..3),
        b in complex_vec(4),
        x in complex_vec(3),
    ) {
        let da = a.len();
        let t1 = diag(a);
        let rows: Vec<Vec<Complex64>> = (0..2).map(|i| b[2 * i..2 * i + 2].to_vec()).collect();
        let t2 = realize(&OperatorSpec::Scale {
            factor: Complex64::new(0.5, 0.0),
            inner: Box::new(OperatorSpec::DenseMatrix { entries: rows }),
        })
        .unwrap();
        let sum = direct_sum(&[t1.clone(), t2.clone()]).unwrap();
        let x1 = &x[..da];
        let x2 = [x[0], x[da % 3]];
        let xs: Vec<Complex64> = x1.iter().chain(&x2).copied().collect();
        let (o1, o2, o) = (iterate(&t1, x1, 50).unwrap(), iterate(&t2, &x2, 50).unwrap(), iterate(&sum, &xs, 50).unwrap());
        for n in 0..=50u64 {
            let joined: Vec<Complex64> = o1.point(n).iter().chain(o2.point(n)).copied().collect();
            prop_assert_eq!(o.point(n), joined.as_slice());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn flags_are_monotone(
        turns in prop::collection::vec(0.0f64..1.0, 1..4),
        x in complex_vec(3),
        eps in 0.001f64..1.5,
    ) {
        let d = turns.len();
        let r = classify_vector(&diag(turns), &x[..d], &[eps], 2000, &quick()).unwrap();
        for rec in &r.records {
            prop_assert!(rec.flags.monotone(), "{:?}", rec.flags);
        }
        let f = r.flags;
        prop_assert!(!f.uniformly || f.frequently);
        prop_assert!(!f.frequently || f.u_frequently);
        prop_assert!(!f.u_frequently || f.reiteratively);
        prop_assert!(!f.reiteratively || f.recurrent);
    }

    #[test]
    fn direct_sum_return_sets_intersect(
        a in prop::collection::vec(0.0f64..1.0, 1..3),
        b in prop::collection::vec(0.0f64..1.0, 1..3),
        eps in 0.05f64..1.0,
    ) {
        let x1 = vec![Complex64::new(1.0, 0.0); a.len()];
        let x2 = vec![Complex64::new(0.0, 1.0); b.len()];
        let p = product_recurrence_check(&diag(a), &x1, &diag(b), &x2, eps, 1000, &quick()).unwrap();
        prop_assert!(p.intersection_exact);
    }

    #[test]
    fn unitary_inverse_has_the_same_return_sets(turns in prop::collection::vec(0.0f64..1.0, 1..4), x in complex_vec(3)) {
        let d = turns.len();
        let t = diag(turns);
        let inv = t.inverse().unwrap();
        let grid = default_epsilon_grid(&x[..d]);
        let f = classify_detailed(&t, &x[..d], &grid, 1000, &quick()).unwrap();
        let b = classify_detailed(&inv, &x[..d], &grid, 1000, &quick()).unwrap();
        prop_assert_eq!(f.return_sets, b.return_sets);
    }
}
