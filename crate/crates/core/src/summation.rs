//! Deterministic reductions.
//!
//! Floating-point addition is not associative, so Monte Carlo reductions must
//! fix their grouping or results would depend on the worker count. Everything
//! here reduces in a fixed balanced tree over index order: callers collect
//! per-path (or per-block) values in index order and hand them over.

/// Balanced pairwise sum; splits at the largest power of two below the length.
/// The fixed grouping is what makes block sums compose: summing a block of
/// four directly performs the same float operations as summing two halves and
/// adding the results.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        2 => xs[0] + xs[1],
        n => {
            let split = 1usize << (63 - ((n - 1).leading_zeros() as usize)).min(62);
            pairwise_sum(&xs[..split]) + pairwise_sum(&xs[split..])
        }
    }
}

/// Neumaier-compensated sum, used as an independent high-accuracy check on
/// the pairwise reductions.
pub fn neumaier_sum(xs: &[f64]) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for &x in xs {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Element-wise `acc += xs`, used when folding per-block partial vectors in
/// block order.
pub(crate) fn add_assign(acc: &mut [f64], xs: &[f64]) {
    debug_assert_eq!(acc.len(), xs.len());
    for (a, x) in acc.iter_mut().zip(xs) {
        *a += x;
    }
}
