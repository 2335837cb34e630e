//! Naive reimplementations used as oracles.
#![allow(dead_code)]

use proptest::prelude::*;

/// Start indices `i` with `lo[j] < x[i + j] < hi[j]` for every `j`.
pub fn naive_occurrences(x: &[f64], lo: &[f64], hi: &[f64]) -> Vec<usize> {
    let k = lo.len();
    let mut out = Vec::new();
    if k > x.len() {
        return out;
    }
    for i in 0..=x.len() - k {
        let mut hit = true;
        for j in 0..k {
            if !(lo[j] < x[i + j] && x[i + j] < hi[j]) {
                hit = false;
            }
        }
        if hit {
            out.push(i);
        }
    }
    out
}

pub fn naive_count(occ: &[usize], n: usize) -> usize {
    let mut c = 0;
    for &i in occ {
        if i < n {
            c += 1;
        }
    }
    c
}

/// Counts of the first `n` windows per cell of the `k`-fold product of
/// `edges`, cells in row-major order (last coordinate fastest), plus misses.
pub fn naive_measure(x: &[f64], edges: &[f64], k: usize, n: usize) -> (Vec<usize>, usize) {
    let g = edges.len() - 1;
    let cells = g.pow(k as u32);
    let mut counts = vec![0usize; cells];
    let mut misses = 0;
    for i in 0..n {
        let mut found = None;
        for cell in 0..cells {
            let mut rest = cell;
            let mut coords = vec![0; k];
            for j in (0..k).rev() {
                coords[j] = rest % g;
                rest /= g;
            }
            let inside = (0..k).all(|j| {
                let c = coords[j];
                edges[c] < x[i + j] && x[i + j] < edges[c + 1]
            });
            if inside {
                found = Some(cell);
            }
        }
        match found {
            Some(c) => counts[c] += 1,
            None => misses += 1,
        }
    }
    (counts, misses)
}

/// Values on a half-integer lattice so that boundary hits are common,
/// mixed with arbitrary reals.
pub fn value() -> impl Strategy<Value = f64> {
    prop_oneof![(-4i32..=4).prop_map(|v| v as f64 / 2.0), -3.0f64..3.0,]
}

pub fn path_values(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(value(), 1..=max_len)
}

pub fn endpoint() -> impl Strategy<Value = f64> {
    prop_oneof![
        1 => Just(f64::NEG_INFINITY),
        1 => Just(f64::INFINITY),
        6 => (-4i32..=4).prop_map(|v| v as f64 / 2.0),
        2 => -3.0f64..3.0,
    ]
}

/// A valid open interval `(lo, hi)`.
pub fn interval() -> impl Strategy<Value = (f64, f64)> {
    (endpoint(), endpoint()).prop_filter_map("empty interval", |(a, b)| {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        (lo < hi && lo != f64::INFINITY && hi != f64::NEG_INFINITY).then_some((lo, hi))
    })
}

pub fn pattern(max_k: usize) -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec(interval(), 1..=max_k)
}

/// Strictly increasing edges, at least two.
pub fn edges() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::btree_set(-6i32..=6, 2..6).prop_map(|s| {
        let mut e: Vec<f64> = s.into_iter().map(|v| v as f64 / 2.0).collect();
        if e.len() > 2 {
            e[0] = f64::NEG_INFINITY;
        }
        e
    })
}
