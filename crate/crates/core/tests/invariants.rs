mod common;

use common::*;
use pathstat::contraction::{
    adversarial_contraction, build_alternating_contraction, contract_path, ergodicity_diagnostic,
    validate_contraction, AdversarialConfig, Contraction, ValidationConfig, DEFAULT_M_SCHEDULE,
};
use pathstat::generators::{generate, GeneratorSpec};
use pathstat::pathcore::{
    counting_prefix, density_trajectory, occurrence_set, IntervalPattern, Path, TailConfig,
};
use pathstat::properties::{
    check_property_t, consistency_detail, empirical_measure, induced_fdd, GridFamily, PatternGrid,
    PropertyConfig,
};
use pathstat::stattests::{apply_moving_window, make_builtin_test, TestKind};
use proptest::prelude::*;

fn to_pattern(bounds: &[(f64, f64)]) -> IntervalPattern {
    IntervalPattern::from_bounds(bounds).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn occurrences_match_brute_force(x in path_values(50), p in pattern(3)) {
        let path = Path::new(x.clone()).unwrap();
        let pat = to_pattern(&p);
        let lo: Vec<f64> = p.iter().map(|b| b.0).collect();
        let hi: Vec<f64> = p.iter().map(|b| b.1).collect();
        let expected = naive_occurrences(&x, &lo, &hi);
        match occurrence_set(&path, &pat) {
            Ok(occ) => {
                prop_assert_eq!(occ.indices(), expected.as_slice());
                prop_assert!(occ.indices().iter().all(|&i| i + p.len() <= x.len()));
                for n in 0..=x.len() + 1 {
                    prop_assert_eq!(counting_prefix(&occ, n), naive_count(&expected, n));
                }
            }
            Err(_) => prop_assert!(p.len() > x.len()),
        }
    }

    #[test]
    fn counting_steps_are_zero_or_one(x in path_values(60), p in pattern(3)) {
        let path = Path::new(x).unwrap();
        if let Ok(occ) = occurrence_set(&path, &to_pattern(&p)) {
            for n in 0..occ.source_horizon() {
                let step = counting_prefix(&occ, n + 1) - counting_prefix(&occ, n);
                prop_assert!(step <= 1);
            }
        }
    }

    #[test]
    fn nested_patterns_nest_occurrences(
        x in path_values(50),
        p in pattern(3),
        widen in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0), 3),
    ) {
        let path = Path::new(x).unwrap();
        let outer: Vec<(f64, f64)> = p.iter().zip(&widen).map(|(b, w)| (b.0 - w.0, b.1 + w.1)).collect();
        let inner = to_pattern(&p);
        let outer = to_pattern(&outer);
        prop_assert!(inner.is_subset_of(&outer));
        if let (Ok(a), Ok(b)) = (occurrence_set(&path, &inner), occurrence_set(&path, &outer)) {
            prop_assert!(a.indices().iter().all(|&i| b.contains(i)));
        }
    }

    #[test]
    fn empirical_measure_matches_brute_force(
        x in path_values(50),
        e in edges(),
        k in 1usize..=3,
        frac in 0.0f64..=1.0,
    ) {
        prop_assume!(k <= x.len());
        let path = Path::new(x.clone()).unwrap();
        let grid = PatternGrid::product(&e, k).unwrap();
        let max_n = x.len() - k + 1;
        let n = ((frac * max_n as f64).ceil() as usize).clamp(1, max_n);
        let m = empirical_measure(&path, &grid, n).unwrap();
        let (counts, misses) = naive_measure(&x, &e, k, n);
        prop_assert_eq!(&m.counts, &counts);
        prop_assert_eq!(m.misses, misses);
    }

    #[test]
    fn tightness_is_monotone_in_k(x in path_values(80)) {
        let path = Path::new(x).unwrap();
        let levels = [0.25, 0.5, 1.0, 2.0, 4.0];
        let t = check_property_t(&path, &levels, &PropertyConfig::default()).unwrap();
        prop_assert!(t.fractions.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn splitting_a_cell_loses_only_boundary_hits(
        x in path_values(60),
        a in -4i32..4,
        width in 2i32..6,
        cut in 1i32..5,
    ) {
        let (lo, hi) = (a as f64 / 2.0, (a + width) as f64 / 2.0);
        let c = (a + cut.min(width - 1)) as f64 / 2.0;
        let path = Path::new(x.clone()).unwrap();
        let count = |l: f64, h: f64| occurrence_set(&path, &to_pattern(&[(l, h)])).unwrap().len();
        let on_cut = x.iter().filter(|&&v| v == c).count();
        prop_assert_eq!(count(lo, c) + count(c, hi), count(lo, hi) - on_cut);
    }

    #[test]
    fn consistency_gap_is_explained_by_boundary_hits(x in path_values(60), e in edges(), k_max in 2usize..=3) {
        prop_assume!(k_max <= x.len());
        let path = Path::new(x.clone()).unwrap();
        let fdd = induced_fdd(&path, k_max, &e, &TailConfig::default()).unwrap();
        for k in 1..k_max {
            let d = consistency_detail(&fdd, k).unwrap();
            // every gap comes from a matched window whose next value misses the partition
            let hits = (0..d.n).filter(|&i| {
                let v = x[i + k];
                !e.windows(2).any(|w| w[0] < v && v < w[1])
            }).count();
            prop_assert!(d.max_count_gap <= d.trailing_misses);
            prop_assert!(d.trailing_misses <= hits);
            prop_assert!(d.max_count_gap <= k + hits);
        }
    }

    #[test]
    fn contraction_preserves_values(
        x in prop::collection::vec(-5.0f64..5.0, 10..200),
        c in 0.1f64..=1.0,
        phase in 0usize..2,
    ) {
        let path = Path::new(x.clone()).unwrap();
        let g = match build_alternating_contraction(c, x.len(), phase) {
            Ok(g) => g,
            Err(_) => {
                // only when the first kept block cannot fit
                let first = if c == 1.0 { x.len() } else { (c / (1.0 - c)).round() as usize };
                prop_assert!(first + phase > x.len() || first == 0);
                return Ok(());
            }
        };
        let out = contract_path(&path, &g).unwrap();
        let mut pos = 0;
        for b in g.blocks() {
            prop_assert!(b[0] <= b[1] && b[1] < x.len());
            for i in b[0]..=b[1] {
                prop_assert_eq!(out.values()[pos], x[i]);
                pos += 1;
            }
        }
        prop_assert_eq!(pos, out.len());
        prop_assert!(validate_contraction(&g, x.len(), &ValidationConfig::default()).ordering);
    }

    #[test]
    fn prefix_contraction_is_bounded_by_tail_oscillation(
        x in prop::collection::vec(prop_oneof![Just(-1.0), Just(1.0), -2.0f64..2.0], 40..300),
        frac in 0.5f64..=1.0,
    ) {
        let l = x.len();
        let prefix = ((frac * l as f64).ceil() as usize).clamp(20, l);
        let path = Path::new(x).unwrap();
        let edges = vec![f64::NEG_INFINITY, 0.0, f64::INFINITY];
        let grids = GridFamily::new(vec![edges.clone()]).unwrap();
        let g = Contraction::new(vec![[0, prefix - 1]], 1.0).unwrap();
        let tail = TailConfig::default();
        let v = ergodicity_diagnostic(&path, &[g], &grids, 1, 0.05, &tail).unwrap();
        // both tail windows sit inside n in [ceil(prefix/2), l]
        let mut bound: f64 = 0.0;
        for cell in PatternGrid::product(&edges, 1).unwrap().cells() {
            let occ = occurrence_set(&path, &cell).unwrap();
            let traj = density_trajectory(&occ, l).unwrap();
            let from = prefix - (prefix as f64 * tail.tail_fraction).ceil() as usize + 1;
            let seg = &traj.ratios()[from - 1..];
            let hi = seg.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lo = seg.iter().cloned().fold(f64::INFINITY, f64::min);
            bound = bound.max(hi - lo);
        }
        prop_assert!(v.worst_discrepancy <= bound + 1e-12, "{} > {}", v.worst_discrepancy, bound);
    }

    #[test]
    fn raising_tau_never_adds_rejections(
        x in prop::collection::vec(-3.0f64..3.0, 30..200),
        kind in prop::sample::select(TestKind::ALL.to_vec()),
        n in 4usize..20,
        tau in 0.0f64..1.5,
        bump in 0.0f64..1.0,
    ) {
        prop_assume!(n <= x.len());
        let path = Path::new(x).unwrap();
        let low = make_builtin_test(kind, n, tau, 0.05).unwrap();
        let high = make_builtin_test(kind, n, tau + bump, 0.05).unwrap();
        let a = apply_moving_window(&path, &low, 0, 1).unwrap();
        let b = apply_moving_window(&path, &high, 0, 1).unwrap();
        prop_assert!(a.indicators.iter().zip(&b.indicators).all(|(p, q)| q <= p));
        prop_assert!(b.upper_density <= a.upper_density);
        prop_assert_eq!(apply_moving_window(&path, &low, 0, 1).unwrap(), a);
    }
}

#[test]
fn adversarial_trace_invariants_hold_for_every_m() {
    for seed in 0..5 {
        let spec: GeneratorSpec = format!("block_mixture(0,5,{seed}),L=50000")
            .parse()
            .unwrap();
        let path = generate(&spec).unwrap();
        let cell = to_pattern(&[(2.5, 7.5)]);
        let trace = adversarial_contraction(
            &path,
            &cell,
            &DEFAULT_M_SCHEDULE,
            0.75,
            &AdversarialConfig::default(),
            &TailConfig::default(),
        )
        .unwrap();
        for step in &trace.steps {
            let m = step.m;
            assert!(step.v1.iter().all(|j| step.v0.binary_search(j).is_ok()));
            assert!(step.v1.windows(2).all(|w| w[1] - w[0] >= m));
            assert!(step.v2.iter().all(|j| step.v1.binary_search(j).is_ok()));
            assert!(step.h_blocks.iter().all(|b| b[1] - b[0] + 1 == m));
            assert!(step.h_blocks.windows(2).all(|w| w[1][0] > w[0][1]));
        }
        let blocks = trace.result.blocks();
        assert!(blocks.windows(2).all(|w| w[1][0] > w[0][1]));
    }
}

#[test]
fn generators_are_reproducible() {
    for s in [
        "unique_peak(3),L=2000",
        "random_phase_sine(1,3),L=2000",
        "iid_normal(0,1,3),L=2000",
        "ar1(0.5,1,3),L=2000",
        "block_mixture(0,5,3),L=2000",
    ] {
        let spec: GeneratorSpec = s.parse().unwrap();
        let a = generate(&spec).unwrap();
        let b = generate(&spec).unwrap();
        assert_eq!(
            a.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            b.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            "{s}"
        );
        assert_ne!(a, generate(&spec.with_seed(4)).unwrap(), "{s}");
    }
}
