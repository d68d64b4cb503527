//! Evaluation of many independent points.
//!
//! With the `parallel` feature (default) the points are spread over the
//! rayon thread pool; without it they run in order on the calling thread.
//! Results keep the input order either way.

use rug::Complex;

use crate::bundle::ThetaBundle;
use crate::error::Result;
use crate::evaluate::{evaluate, EvalOptions};

/// `items.map(f)` in parallel when enabled, preserving order.
#[cfg(feature = "parallel")]
pub fn map_points<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_points<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    items.iter().map(f).collect()
}

/// Sequential map, for timing-sensitive callers.
pub fn map_points_sequential<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    F: Fn(&T) -> R,
{
    items.iter().map(f).collect()
}

/// Whether [`map_points`] runs in parallel in this build.
pub const fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}

/// [`evaluate`] over many `(z, tau)` pairs.
pub fn evaluate_many(
    points: &[(Complex, Complex)],
    target_bits: u32,
    opts: &EvalOptions,
) -> Vec<Result<ThetaBundle>> {
    map_points(points, |(z, tau)| evaluate(z, tau, target_bits, opts))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mpcx::cx;

    #[test]
    fn batch_matches_one_by_one() {
        let pts: Vec<_> = (0..6)
            .map(|k| {
                (
                    cx(64, 0.1 * k as f64, 0.05),
                    cx(64, 0.2, 1.0 + 0.3 * k as f64),
                )
            })
            .collect();
        let opts = EvalOptions::default();
        let many = evaluate_many(&pts, 128, &opts);
        for ((z, tau), r) in pts.iter().zip(many) {
            assert_eq!(r.unwrap(), evaluate(z, tau, 128, &opts).unwrap());
        }
    }

    #[test]
    fn order_is_preserved() {
        let v: Vec<u32> = (0..100).collect();
        assert_eq!(
            map_points(&v, |x| x * 2),
            map_points_sequential(&v, |x| x * 2)
        );
    }
}
