//! Deterministic reductions.
//!
//! All quadrature and ensemble reductions in this crate go through the
//! pairwise tree below, so sums are bit-stable across runs and independent of
//! how outer loops are scheduled.

use std::ops::Range;

const PAIRWISE_LEAF: usize = 32;

/// Pairwise-tree sum of `f(i)` over `range`; fixed association order.
pub fn pairwise_sum_by<F: Fn(usize) -> f64>(range: Range<usize>, f: &F) -> f64 {
    let len = range.end - range.start;
    if len <= PAIRWISE_LEAF {
        let mut acc = 0.0;
        for i in range {
            acc += f(i);
        }
        acc
    } else {
        let mid = range.start + len / 2;
        pairwise_sum_by(range.start..mid, f) + pairwise_sum_by(mid..range.end, f)
    }
}

/// Pairwise-tree sum of a slice.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    pairwise_sum_by(0..xs.len(), &|i| xs[i])
}

/// Dot product with the same fixed association order.
pub fn pairwise_dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    pairwise_sum_by(0..a.len(), &|i| a[i] * b[i])
}
