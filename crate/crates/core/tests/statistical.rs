//! Monte Carlo invariants. Seeds are fixed, so outcomes are deterministic.

use pathstat::generators::{generate, GeneratorSpec};
use pathstat::pathcore::{occurrence_set, IntervalPattern, Path, TailConfig};
use pathstat::properties::{empirical_measure, local_density_deviation, PatternGrid};
use pathstat::stattests::{
    apply_moving_window, calibrate_test_size, make_builtin_test, MonteCarlo, TestKind,
};

fn gen(s: &str) -> Path {
    generate(&s.parse::<GeneratorSpec>().unwrap()).unwrap()
}

const Z95: f64 = 1.644_853_626_951_472_2;

#[test]
fn deviation_density_shrinks_along_a_doubling_ladder() {
    let cell = IntervalPattern::from_bounds(&[(0.0, f64::INFINITY)]).unwrap();
    let tail = TailConfig::default();
    for spec in ["iid_normal(0,1,4),L=100000", "ar1(0.5,1,4),L=100000"] {
        let p = gen(spec);
        let ladder: Vec<f64> = (0..8)
            .map(|j| {
                local_density_deviation(&p, &cell, 10 << j, 0.1, &tail)
                    .unwrap()
                    .deviation_density
            })
            .collect();
        for w in ladder.windows(2) {
            assert!(w[1] <= w[0] + 0.05, "{spec}: {ladder:?}");
        }
        assert!(*ladder.last().unwrap() < 0.01, "{spec}: {ladder:?}");
    }
}

#[test]
fn rejection_density_is_generic_in_the_offset() {
    let n = 20;
    let test = make_builtin_test(
        TestKind::ThresholdExceedance,
        n,
        Z95 / (n as f64).sqrt(),
        0.05,
    )
    .unwrap();
    for spec in [
        "iid_normal(0,1,8),L=100000",
        "random_phase_sine(1,8),L=100000",
    ] {
        let p = gen(spec);
        let exceed = (0..n)
            .filter(|&m| apply_moving_window(&p, &test, m, n).unwrap().upper_density > 0.07)
            .count();
        assert!(
            exceed as f64 <= 0.1 * n as f64,
            "{spec}: {exceed} offsets exceed"
        );
    }
}

#[test]
fn random_phase_start_follows_the_arcsine_law() {
    let edges = [-1.0 - 1e-9, -0.5, 0.0, 0.5, 1.0 + 1e-9];
    let grid = PatternGrid::product(&edges, 1).unwrap();
    let mut counts = [0usize; 4];
    for seed in 0..1000 {
        let p = gen(&format!("random_phase_sine(1,{seed}),L=1"));
        let m = empirical_measure(&p, &grid, 1).unwrap();
        for (c, k) in counts.iter_mut().zip(&m.counts) {
            *c += k;
        }
    }
    // P(sin U in (a, b)) = (asin b - asin a) / pi
    let expected = [1.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0, 1.0 / 3.0];
    for (c, e) in counts.iter().zip(expected) {
        let f = *c as f64 / 1000.0;
        assert!((f - e).abs() <= 0.03, "{counts:?}");
    }
}

#[test]
fn calibrated_tests_respect_their_size() {
    for g in ["iid_normal(0,1,0)", "ar1(0.5,1,0)"] {
        let base: GeneratorSpec = g.parse().unwrap();
        for kind in TestKind::ALL {
            let mc = MonteCarlo {
                replicates: 20_000,
                seed: 99,
            };
            let (test, _) = calibrate_test_size(kind, 20, 0.05, &base, &mc).unwrap();
            let seeds = 40;
            let within = (0..seeds)
                .filter(|&s| {
                    let p = generate(&base.with_seed(1000 + s).with_length(100_000)).unwrap();
                    apply_moving_window(&p, &test, 0, 1).unwrap().upper_density <= 0.06
                })
                .count();
            assert!(
                within as f64 >= 0.95 * seeds as f64,
                "{g} {kind}: {within}/{seeds}"
            );
        }
    }
}

#[test]
fn mixture_cell_density_follows_block_bookkeeping() {
    // half the path sits at each level; (2.5, inf) catches level b up to the
    // N(0,1) tails on either side
    let p = gen("block_mixture(0,5,6),L=100000");
    let occ = occurrence_set(
        &p,
        &IntervalPattern::from_bounds(&[(2.5, f64::INFINITY)]).unwrap(),
    )
    .unwrap();
    let tail_mass = 0.006_209_665_325_776_132; // P(Z > 2.5)
    let expected = 0.5 * (1.0 - tail_mass) + 0.5 * tail_mass;
    let f = occ.len() as f64 / p.len() as f64;
    assert!((f - expected).abs() < 0.01, "{f}");
}
